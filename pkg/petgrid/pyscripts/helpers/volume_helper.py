"""Volume representation, NIfTI I/O, SUV scaling and resampling onto the canonical grid.

Arrays are stored in (D, W, H) order with D the axial (depth) axis. A NIfTI array indexed
(i, j, k) maps to (k, j, i); spacing and origin are reversed the same way. Voxel values are
stored as float32 and reductions accumulate in float64.
"""

import gzip
from dataclasses import dataclass, field
from pathlib import Path

import nibabel as nib
import numpy as np
from nibabel.filebasedimages import ImageFileError
from nibabel.spatialimages import HeaderDataError
from scipy import ndimage

from ..parameters.models import GridSpec
from ..types.errors import (
    EmptyMask,
    EmptyResult,
    InvalidDecayFactor,
    MalformedHeader,
    NonFiniteData,
    NonPositiveDose,
    NonPositiveWeight,
    NotPET,
    PetGridError,
    UnsupportedDimensionality,
)
from ..types.modality import Modality
from ..utils.common_utils import setup_logger

logger = setup_logger(__name__)

Triple = tuple[float, float, float]
_NIFTI_TO_DWH = (2, 1, 0)


def _as_triple(values, name: str) -> Triple:
    triple = tuple(float(v) for v in values)
    if len(triple) != 3:
        raise PetGridError(f"{name} must have 3 components, got {values}")
    return triple


@dataclass(frozen=True, eq=False)
class Volume3D:
    """Dense 3D scalar grid.

    Attributes:
        data: Read-only float32 array of shape (D, W, H)
        spacing: Voxel size in mm along (D, W, H)
        origin: Physical position in mm of the centre of voxel (0, 0, 0)
        modality: PET (SUV) or CT (Hounsfield units)
    """

    data: np.ndarray
    spacing: Triple = (1.0, 1.0, 1.0)
    origin: Triple = (0.0, 0.0, 0.0)
    modality: Modality = Modality.PET

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float32, order="C")
        if data.ndim != 3:
            raise UnsupportedDimensionality(f"Volume data must be 3D, got shape {data.shape}")
        spacing = _as_triple(self.spacing, "spacing")
        if not all(np.isfinite(s) and s > 0 for s in spacing):
            raise PetGridError(f"Spacing components must be strictly positive, got {spacing}")
        if not np.isfinite(data).all():
            raise NonFiniteData(f"{Modality(self.modality).value} volume contains NaN or infinite values")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", _as_triple(self.origin, "origin"))
        object.__setattr__(self, "modality", Modality(self.modality))

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.data.shape)

    def with_data(self, data: np.ndarray, modality: Modality | None = None) -> "Volume3D":
        """Same geometry, new voxel values."""
        return Volume3D(data, self.spacing, self.origin, modality or self.modality)


@dataclass(frozen=True, eq=False)
class LesionMask:
    """Binary grid aligned to a Volume3D.

    Attributes:
        data: Read-only bool array of shape (D, W, H)
        voxel_count: Number of set voxels
    """

    data: np.ndarray
    voxel_count: int = field(init=False)

    def __post_init__(self):
        data = np.array(self.data, dtype=bool, order="C")
        if data.ndim != 3:
            raise UnsupportedDimensionality(f"Mask data must be 3D, got shape {data.shape}")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "voxel_count", int(np.count_nonzero(data)))

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.data.shape)

    @property
    def is_empty(self) -> bool:
        return self.voxel_count == 0

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Inclusive (lo, hi) voxel indices of the foreground.

        Raises:
            EmptyMask: If no voxel is set
        """
        if self.is_empty:
            raise EmptyMask("Bounding box of an empty mask is undefined")
        coords = np.argwhere(self.data)
        return coords.min(axis=0), coords.max(axis=0)

    def check_aligned(self, volume: Volume3D) -> None:
        """Raise if the mask and the volume differ in dims."""
        if self.dims != volume.dims:
            raise PetGridError(f"Mask dims {self.dims} do not match volume dims {volume.dims}")


def zeros_like(volume: Volume3D, modality: Modality | None = None) -> Volume3D:
    """Zero volume with the geometry of `volume`."""
    return volume.with_data(np.zeros(volume.dims, dtype=np.float32), modality)


def dice(a: LesionMask, b: LesionMask) -> float:
    """Dice overlap 2|A and B| / (|A| + |B|); two empty masks score 1.0."""
    total = a.voxel_count + b.voxel_count
    if total == 0:
        return 1.0
    return 2.0 * int(np.count_nonzero(a.data & b.data)) / total


def load_nifti(path: str | Path, modality: Modality = Modality.PET) -> Volume3D:
    """Read a single-file NIfTI-1 image (.nii or .nii.gz) into a Volume3D.

    scl_slope / scl_inter are applied by nibabel while reading. A trailing singleton 4th
    dimension is dropped.

    Args:
        path: Image file
        modality: Modality tag for the result

    Returns:
        Volume3D with spacing and origin taken from the header

    Raises:
        MalformedHeader: If the file is not a readable single-file NIfTI image
        UnsupportedDimensionality: If the data is not 3D
        NonFiniteData: If any voxel is NaN or infinite
    """
    try:
        image = nib.load(str(path))
    except FileNotFoundError:
        raise
    except (ImageFileError, HeaderDataError, EOFError, OSError, ValueError) as e:
        raise MalformedHeader(f"Cannot read NIfTI file {path}: {e}") from e

    if not isinstance(image, nib.Nifti1Image):
        raise MalformedHeader(f"{path} is not a single-file NIfTI-1 image ({type(image).__name__})")

    shape = image.shape
    if len(shape) > 3 and all(n == 1 for n in shape[3:]):
        shape = shape[:3]
    if len(shape) != 3:
        raise UnsupportedDimensionality(f"{path} has {len(image.shape)} dimensions {image.shape}, expected 3")

    try:
        data = np.asarray(image.get_fdata(dtype=np.float32)).reshape(shape)
    except (EOFError, OSError, ValueError) as e:
        raise MalformedHeader(f"Cannot read voxel data from {path}: {e}") from e

    zooms = image.header.get_zooms()[:3]
    if any(not z > 0 for z in zooms):
        raise MalformedHeader(f"{path} has non-positive voxel sizes {zooms}")

    volume = Volume3D(
        data=np.transpose(data, _NIFTI_TO_DWH),
        spacing=tuple(float(z) for z in reversed(zooms)),
        origin=tuple(float(t) for t in image.affine[:3, 3][::-1]),
        modality=modality,
    )
    logger.debug(f"Loaded {modality.value} volume {path}: dims={volume.dims} spacing={volume.spacing}")
    return volume


def _nifti_image(array_dwh: np.ndarray, spacing: Triple, origin: Triple) -> nib.Nifti1Image:
    affine = np.diag([*reversed(spacing), 1.0])
    affine[:3, 3] = list(reversed(origin))
    image = nib.Nifti1Image(np.ascontiguousarray(np.transpose(array_dwh, _NIFTI_TO_DWH)), affine)
    image.header.set_xyzt_units("mm")
    return image


def _write_image(image: nib.Nifti1Image, path: str | Path) -> Path:
    """Serialize an image; .gz output uses a zero mtime so identical images give identical bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = image.to_bytes()
    if path.name.endswith(".gz"):
        payload = gzip.compress(payload, mtime=0)
    path.write_bytes(payload)
    return path


def save_nifti(volume: Volume3D, path: str | Path) -> Path:
    """Write a Volume3D as float32 NIfTI-1; exact inverse of load_nifti's axis mapping."""
    return _write_image(_nifti_image(volume.data, volume.spacing, volume.origin), path)


def save_mask_nifti(mask: LesionMask, path: str | Path, spacing: Triple, origin: Triple = (0.0, 0.0, 0.0)) -> Path:
    """Write a LesionMask as uint8 NIfTI-1."""
    return _write_image(_nifti_image(mask.data.astype(np.uint8), spacing, origin), path)


def load_mask_nifti(path: str | Path) -> tuple[LesionMask, Volume3D]:
    """Read a mask image. Returns the mask and the image as a volume (for its geometry)."""
    volume = load_nifti(path, Modality.PET)
    return LesionMask(volume.data > 0.5), volume


def suv_scale(v: Volume3D, injected_dose_bq: float, weight_kg: float, decay_factor: float = 1.0) -> Volume3D:
    """Convert activity concentration (Bq/ml) to body-weight SUV.

    SUV = activity * weight[g] / (dose[Bq] * decay_factor)

    Raises:
        NotPET: If the volume is not tagged PET
        NonPositiveDose: If the dose is <= 0
        NonPositiveWeight: If the weight is <= 0
        InvalidDecayFactor: If decay_factor is outside (0, 1]
    """
    if v.modality != Modality.PET:
        raise NotPET(f"SUV scaling needs a PET volume, got {v.modality.value}")
    if not injected_dose_bq > 0:
        raise NonPositiveDose(f"Injected dose must be positive, got {injected_dose_bq}")
    if not weight_kg > 0:
        raise NonPositiveWeight(f"Weight must be positive, got {weight_kg}")
    if not 0.0 < decay_factor <= 1.0:
        raise InvalidDecayFactor(f"Decay factor must be in (0, 1], got {decay_factor}")

    factor = (weight_kg * 1000.0) / (injected_dose_bq * decay_factor)
    return v.with_data(v.data.astype(np.float64) * factor)


def _intermediate_shape(shape, spacing: Triple, target_spacing: float) -> tuple[int, int, int]:
    return tuple(max(1, int(np.floor(n * s / target_spacing + 0.5))) for n, s in zip(shape, spacing))


def _zoom_to_spacing(
    data: np.ndarray, spacing: Triple, origin: Triple, target_spacing: float, order: int
) -> tuple[np.ndarray, Triple]:
    """Interpolate onto voxels of size target_spacing covering the same physical extent."""
    out_shape = _intermediate_shape(data.shape, spacing, target_spacing)
    if out_shape == data.shape and all(s == target_spacing for s in spacing):
        return data, origin

    factors = [o / n for o, n in zip(out_shape, data.shape)]
    zoomed = ndimage.zoom(data, factors, order=order, mode="nearest", grid_mode=True)
    effective = [s * n / o for s, n, o in zip(spacing, data.shape, out_shape)]
    new_origin = tuple(o + 0.5 * (e - s) for o, e, s in zip(origin, effective, spacing))
    return zoomed, new_origin


def _center_crop_or_pad(
    data: np.ndarray, origin: Triple, spacing: float, target_dims: tuple[int, int, int]
) -> tuple[np.ndarray, Triple]:
    """Symmetric centre crop / zero pad to target_dims; the extra voxel of an odd difference goes last."""
    slices = []
    pads = []
    new_origin = list(origin)
    for axis, (n, t) in enumerate(zip(data.shape, target_dims)):
        if n >= t:
            start = (n - t) // 2
            slices.append(slice(start, start + t))
            pads.append((0, 0))
            new_origin[axis] += start * spacing
        else:
            before = (t - n) // 2
            slices.append(slice(0, n))
            pads.append((before, t - n - before))
            new_origin[axis] -= before * spacing
    cropped = np.pad(data[tuple(slices)], pads, mode="constant", constant_values=0)
    return cropped, tuple(new_origin)


def resample(v: Volume3D, g: GridSpec) -> Volume3D:
    """Trilinear resample to isotropic g.target_spacing, then centre crop / zero pad to g.target_dims."""
    if v.spacing == g.spacing and v.dims == g.dims:
        return v

    data, origin = _zoom_to_spacing(v.data.astype(np.float64), v.spacing, v.origin, g.target_spacing, order=1)
    data, origin = _center_crop_or_pad(data, origin, g.target_spacing, g.dims)
    logger.debug(f"Resampled {v.modality.value} {v.dims}@{v.spacing} -> {g.dims}@{g.target_spacing}")
    return Volume3D(data, g.spacing, origin, v.modality)


def resample_mask(
    m: LesionMask, source_spacing: Triple, g: GridSpec, source_origin: Triple = (0.0, 0.0, 0.0)
) -> LesionMask:
    """Nearest-neighbour resample of a mask with the same crop/pad policy as resample.

    Raises:
        EmptyResult: If the source has foreground but none of it survives
    """
    source_spacing = _as_triple(source_spacing, "source_spacing")
    if source_spacing == g.spacing and m.dims == g.dims:
        return m

    data, origin = _zoom_to_spacing(
        m.data.astype(np.uint8), source_spacing, _as_triple(source_origin, "origin"), g.target_spacing, order=0
    )
    data, _ = _center_crop_or_pad(data, origin, g.target_spacing, g.dims)
    result = LesionMask(data > 0)
    if result.is_empty and not m.is_empty:
        raise EmptyResult(f"All {m.voxel_count} foreground voxels fell outside the target grid {g.dims}")
    return result


def map_slice_index(index: int, source: Volume3D, target: Volume3D) -> int:
    """Carry a depth index from one grid to another through physical coordinates."""
    depth_mm = source.origin[0] + index * source.spacing[0]
    return int(np.floor((depth_mm - target.origin[0]) / target.spacing[0] + 0.5))
