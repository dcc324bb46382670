"""Synthetic PET/CT phantoms with Gaussian lesions, ground-truth masks and a matching report."""

from dataclasses import dataclass

import numpy as np

from ..types.errors import PetGridError
from ..types.modality import Modality
from ..utils.common_utils import setup_logger
from .volume_helper import LesionMask, Volume3D

logger = setup_logger(__name__)

CT_AIR_HU = -1000.0
CT_SOFT_TISSUE_HU = 40.0
BODY_RADIUS_FRACTION = 0.45
DEFAULT_SITES = ("right hilar node", "liver", "left axillary node", "spleen")


@dataclass(frozen=True)
class BlobSpec:
    """Gaussian lesion: peak SUV above background at an integer voxel centre."""

    center: tuple[int, int, int]
    sigma: float
    peak: float
    site: str = "mediastinal node"


@dataclass(frozen=True)
class Phantom:
    """Phantom definition.

    Attributes:
        blobs: Lesions to place
        background: Uniform background SUV
        dims: Grid dims (D, W, H)
        spacing: Isotropic voxel size in mm
        noise_std: Std of additive Gaussian noise (seeded); PET is clipped at 0
        exam_id: Identifier used for file names and records
    """

    blobs: tuple[BlobSpec, ...] = ()
    background: float = 0.0
    dims: tuple[int, int, int] = (64, 64, 64)
    spacing: float = 3.0
    noise_std: float = 0.0
    exam_id: str = "phantom"

    def __post_init__(self):
        if self.background < 0 or self.noise_std < 0 or self.spacing <= 0:
            raise PetGridError("Phantom background and noise must be >= 0 and spacing > 0")
        for blob in self.blobs:
            if not blob.peak > 0 or not blob.sigma > 0:
                raise PetGridError(f"Blob peak and sigma must be positive: {blob}")
            if any(not 0 <= c < n for c, n in zip(blob.center, self.dims)):
                raise PetGridError(f"Blob centre {blob.center} lies outside grid {self.dims}")


@dataclass(frozen=True, eq=False)
class PhantomCase:
    """Generated phantom volumes with per-blob truth and report values."""

    pet: Volume3D
    ct: Volume3D
    truth_masks: tuple[LesionMask, ...]
    report_text: str
    reported: tuple[tuple[float, int], ...]


def _gaussian(dims: tuple[int, int, int], center, sigma: float) -> np.ndarray:
    axes = [np.exp(-((np.arange(n, dtype=np.float64) - c) ** 2) / (2.0 * sigma**2)) for n, c in zip(dims, center)]
    return axes[0][:, None, None] * axes[1][None, :, None] * axes[2][None, None, :]


def _body_ct(dims: tuple[int, int, int]) -> np.ndarray:
    _, w, h = dims
    yy, xx = np.ogrid[:w, :h]
    radius = BODY_RADIUS_FRACTION * min(w, h)
    body = (yy - (w - 1) / 2.0) ** 2 + (xx - (h - 1) / 2.0) ** 2 <= radius**2
    ct = np.full(dims, CT_AIR_HU, dtype=np.float32)
    ct[:, body] = CT_SOFT_TISSUE_HU
    return ct


def make_phantom(p: Phantom, seed: int = 0) -> PhantomCase:
    """Render a phantom.

    Truth mask per blob is its own 50%-of-peak isocontour. Each blob gets one report sentence with
    the measured SUVmax (one decimal) and the 1-based slice of its hottest voxel.
    """
    profiles = [_gaussian(p.dims, blob.center, blob.sigma) for blob in p.blobs]
    pet = np.full(p.dims, p.background, dtype=np.float64)
    for blob, profile in zip(p.blobs, profiles):
        pet += blob.peak * profile
    if p.noise_std > 0:
        rng = np.random.Generator(np.random.PCG64(seed))
        pet = np.clip(pet + rng.normal(0.0, p.noise_std, size=p.dims), 0.0, None)
    pet = pet.astype(np.float32)

    truth = tuple(LesionMask(profile >= 0.5) for profile in profiles)
    sentences = []
    reported = []
    for blob, mask in zip(p.blobs, truth):
        values = np.where(mask.data, pet, -np.inf)
        hottest = np.unravel_index(int(np.argmax(values)), p.dims)
        suv = round(float(pet[hottest]), 1)
        slice_number = int(hottest[0]) + 1
        reported.append((suv, slice_number))
        sentences.append(f"Hypermetabolic {blob.site}, SUV max {suv:.1f}, slice {slice_number}.")
    report_text = "\n".join(sentences) + "\n" if sentences else "No hypermetabolic lesions.\n"

    spacing = (float(p.spacing),) * 3
    logger.debug(f"Phantom {p.exam_id}: {len(p.blobs)} blobs, background {p.background}, noise {p.noise_std}")
    return PhantomCase(
        pet=Volume3D(pet, spacing, (0.0, 0.0, 0.0), Modality.PET),
        ct=Volume3D(_body_ct(p.dims), spacing, (0.0, 0.0, 0.0), Modality.CT),
        truth_masks=truth,
        report_text=report_text,
        reported=tuple(reported),
    )


def random_phantom(
    seed: int,
    n_blobs: int | None = None,
    dims: tuple[int, int, int] = (64, 64, 64),
    spacing: float = 3.0,
    with_background: bool | None = None,
    noise_std: float = 0.0,
    exam_id: str | None = None,
) -> Phantom:
    """Seeded layout of 1-4 well separated blobs.

    Blobs sit near four quarter-grid anchors with up to 2 voxels of jitter, sigma in [1.5, 3.5],
    peak in [3, 15]. Background is drawn from [1, 2] when enabled (a coin flip when None).
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    count = int(rng.integers(1, 5)) if n_blobs is None else int(n_blobs)
    if not 0 <= count <= 4:
        raise PetGridError(f"random_phantom places 0 to 4 blobs, got {count}")
    lo = [n // 4 for n in dims]
    hi = [n - 1 - n // 4 for n in dims]
    anchors = [
        (lo[0], lo[1], lo[2]),
        (lo[0], hi[1], hi[2]),
        (hi[0], lo[1], hi[2]),
        (hi[0], hi[1], lo[2]),
    ]
    blobs = []
    for slot in rng.permutation(4)[:count]:
        jitter = rng.integers(-2, 3, size=3)
        center = tuple(int(min(max(a + j, 0), n - 1)) for a, j, n in zip(anchors[slot], jitter, dims))
        blobs.append(
            BlobSpec(
                center=center,
                sigma=float(rng.uniform(1.5, 3.5)),
                peak=float(rng.uniform(3.0, 15.0)),
                site=DEFAULT_SITES[int(slot)],
            )
        )
    if with_background is None:
        with_background = bool(rng.random() < 0.5)
    background = float(rng.uniform(1.0, 2.0)) if with_background else 0.0
    return Phantom(
        blobs=tuple(blobs),
        background=background,
        dims=tuple(dims),
        spacing=spacing,
        noise_std=noise_std,
        exam_id=exam_id or f"phantom_{seed}",
    )
