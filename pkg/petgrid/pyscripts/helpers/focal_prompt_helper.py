"""Perturbed cubic focal crop around a lesion mask with guaranteed mask containment.

The crop side r is (1 + margin_fraction) times the largest bounding-box extent, clamped below by
min_side. Centre and side each receive an independent uniform draw in [-fraction * r, fraction * r].
The perturbed box is then translated (and grown only when translation cannot help) until it holds
the whole mask. Out-of-volume parts are zero padded.
"""

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..parameters.models import FocalSpec, PerturbSpec
from ..types.errors import EmptyMask
from ..utils.common_utils import setup_logger
from .volume_helper import LesionMask, Volume3D

logger = setup_logger(__name__)

Point = tuple[float, float, float]


@dataclass(frozen=True, eq=False)
class FocalCrop:  # pylint: disable=too-many-instance-attributes
    """Focal crop of PET, CT and mask.

    Attributes:
        center: Perturbed centre in source voxel coordinates
        side: Perturbed side length in voxels
        box_start: First source voxel of the crop box per axis (may be negative)
        box_side: Integer side of the crop box actually extracted
        pet_crop, ct_crop, mask_crop: Crops resampled to resampled_dims
        resampled_dims: Focal grid dims
    """

    center: Point
    side: float
    box_start: tuple[int, int, int]
    box_side: int
    pet_crop: Volume3D
    ct_crop: Volume3D
    mask_crop: LesionMask
    resampled_dims: tuple[int, int, int]

    def contains(self, mask: LesionMask) -> bool:
        """True if every foreground voxel of mask lies inside the crop box."""
        if mask.is_empty:
            return True
        lo, hi = mask.bounding_box()
        return all(s <= l and h <= s + self.box_side - 1 for s, l, h in zip(self.box_start, lo, hi))


def mask_centroid(m: LesionMask) -> Point:
    """Mean foreground voxel coordinate."""
    if m.is_empty:
        raise EmptyMask("Centroid of an empty mask is undefined")
    return tuple(float(c) for c in np.argwhere(m.data).mean(axis=0, dtype=np.float64))


def base_side(m: LesionMask, margin_fraction: float = 0.25, min_side: int = 16) -> float:
    """(1 + margin_fraction) * largest bounding-box extent, at least min_side."""
    lo, hi = m.bounding_box()
    extent = int((hi - lo + 1).max())
    return max((1.0 + margin_fraction) * extent, float(min_side))


def derive_seed(base_seed: int, exam_id: str, lesion_index: int) -> int:
    """Per-lesion 64-bit seed: BLAKE2b-64 over (base_seed, exam_id, lesion_index)."""
    digest = hashlib.blake2b(f"{base_seed}\x1f{exam_id}\x1f{lesion_index}".encode("utf-8"), digest_size=8)
    return int.from_bytes(digest.digest(), "little")


def perturb(c: Point, r: float, spec: PerturbSpec) -> tuple[Point, float]:
    """Shift each centre coordinate and the side by independent draws from U(-fraction * r, fraction * r).

    Uses numpy's PCG64 generator seeded with spec.rng_seed; fraction 0 returns (c, r) unchanged.
    """
    if spec.fraction == 0:
        return tuple(float(v) for v in c), float(r)
    bound = spec.fraction * r
    rng = np.random.Generator(np.random.PCG64(spec.rng_seed))
    deltas = rng.uniform(-bound, bound, size=4)
    center = tuple(float(v + d) for v, d in zip(c, deltas[:3]))
    return center, float(r + deltas[3])


def fit_crop_box(
    lo, hi, dims: tuple[int, int, int], center: Point, side: float
) -> tuple[tuple[int, int, int], int]:
    """Integer cube placement that contains the inclusive box [lo, hi].

    The side is rounded up and grown to the largest mask extent if needed. Each axis start is the
    rounded perturbed start, translated into the range that keeps the mask inside and, when the cube
    fits in the volume, the cube inside the volume.

    Returns:
        (start per axis, integer side)
    """
    extent = max(int(h) - int(l) + 1 for l, h in zip(lo, hi))
    box_side = max(int(math.ceil(side)), 1, extent)
    starts = []
    for l, h, n, c in zip(lo, hi, dims, center):
        low = int(h) - box_side + 1
        high = int(l)
        if box_side <= n:
            low = max(low, 0)
            high = min(high, n - box_side)
        start = int(math.floor(c - (box_side - 1) / 2.0 + 0.5))
        starts.append(min(max(start, low), high))
    return tuple(starts), box_side


def extract_box(array: np.ndarray, start: tuple[int, int, int], side: int) -> np.ndarray:
    """Cube of `side` starting at `start`; voxels outside the array are zero."""
    out = np.zeros((side,) * 3, dtype=array.dtype)
    src = []
    dst = []
    for s, n in zip(start, array.shape):
        a, b = max(s, 0), min(s + side, n)
        if a >= b:
            return out
        src.append(slice(a, b))
        dst.append(slice(a - s, b - s))
    out[tuple(dst)] = array[tuple(src)]
    return out


def _resize(data: np.ndarray, dims: tuple[int, int, int], order: int) -> np.ndarray:
    if data.shape == tuple(dims):
        return data
    factors = [d / n for d, n in zip(dims, data.shape)]
    return ndimage.zoom(data, factors, order=order, mode="nearest", grid_mode=True)


def crop(
    pet: Volume3D,
    ct: Volume3D,
    m: LesionMask,
    center: Point,
    side: float,
    resampled_dims: tuple[int, int, int] = (32, 32, 32),
) -> FocalCrop:
    """Extract the contained cube and resample it (trilinear PET/CT, nearest mask) to resampled_dims."""
    m.check_aligned(pet)
    m.check_aligned(ct)
    lo, hi = m.bounding_box()
    start, box_side = fit_crop_box(lo, hi, pet.dims, center, side)
    resampled_dims = tuple(int(d) for d in resampled_dims)
    scale = box_side / resampled_dims[0]
    spacing = tuple(s * box_side / d for s, d in zip(pet.spacing, resampled_dims))

    def crop_volume(volume: Volume3D) -> Volume3D:
        data = _resize(extract_box(volume.data, start, box_side), resampled_dims, order=1)
        origin = tuple(o + st * s for o, st, s in zip(volume.origin, start, volume.spacing))
        return Volume3D(data, spacing, origin, volume.modality)

    mask_data = _resize(extract_box(m.data.astype(np.uint8), start, box_side), resampled_dims, order=0)
    logger.debug(f"Focal box start={start} side={box_side} (requested {side:.2f}, scale {scale:.3f})")
    return FocalCrop(
        center=tuple(float(c) for c in center),
        side=float(side),
        box_start=start,
        box_side=box_side,
        pet_crop=crop_volume(pet),
        ct_crop=crop_volume(ct),
        mask_crop=LesionMask(mask_data > 0),
        resampled_dims=resampled_dims,
    )


def build_focal_prompt(
    pet: Volume3D,
    ct: Volume3D,
    mask: LesionMask,
    focal_spec: FocalSpec,
    perturb_spec: PerturbSpec,
    resampled_dims: tuple[int, int, int] | None = None,
) -> tuple[FocalCrop, dict]:
    """Centroid, base side, perturbation and crop in one call.

    Returns:
        The crop and its JSON sidecar (centroid, base side, perturbed centre and side, seed, box)
    """
    centroid = mask_centroid(mask)
    r = base_side(mask, focal_spec.margin_fraction, focal_spec.min_side)
    center, side = perturb(centroid, r, perturb_spec)
    focal = crop(pet, ct, mask, center, side, resampled_dims or focal_spec.dims)
    sidecar = {
        "mask_centroid": list(centroid),
        "base_side": r,
        "perturbed_center": list(center),
        "perturbed_side": side,
        "seed": perturb_spec.rng_seed,
        "perturb_fraction": perturb_spec.fraction,
        "box_start": list(focal.box_start),
        "box_side": focal.box_side,
        "resampled_dims": list(focal.resampled_dims),
    }
    return focal, sidecar
