"""Lesion mask recovery from a PET volume, a reported SUVmax and a reported axial slice."""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..parameters.models import SegParams
from ..types.connectivity import Connectivity
from ..types.errors import EmptyInitialThreshold, EmptyMask, NoMatch, PetGridError
from ..utils.common_utils import setup_logger
from .report_parse_helper import LesionRecord
from .volume_helper import LesionMask, Volume3D

logger = setup_logger(__name__)

# float32 voxels vs decimal report values
_SUV_SLACK = 1e-6
_BOX_DILATION = 2


@dataclass(frozen=True, eq=False)
class SegResult:
    """Outcome of segment_lesion / refine.

    Attributes:
        mask: Single connected component on the working grid
        achieved_suv_max: Maximum SUV inside the mask
        iterations_used: Refinement iterations run
        final_threshold: Last threshold applied
        selected_component_seed_slice: Depth index (0-based) of the component's peak voxel
        converged: False when max_iters was hit before the contour stabilized
    """

    mask: LesionMask
    achieved_suv_max: float
    iterations_used: int
    final_threshold: float
    selected_component_seed_slice: int
    converged: bool = True

    def to_metadata(self) -> dict:
        return {
            "achieved_suv_max": self.achieved_suv_max,
            "iterations_used": self.iterations_used,
            "final_threshold": self.final_threshold,
            "selected_component_seed_slice": self.selected_component_seed_slice,
            "converged": self.converged,
            "voxel_count": self.mask.voxel_count,
        }


@dataclass(frozen=True)
class _ComponentStats:
    order: int
    size: int
    suv_max: float
    peak_depth: int
    touches_slice: bool


def _structure(connectivity: int | Connectivity) -> np.ndarray:
    return ndimage.generate_binary_structure(3, Connectivity.from_value(connectivity).rank)


def threshold(v: Volume3D, t: float) -> LesionMask:
    """Voxels with value >= t."""
    if not np.isfinite(t):
        raise PetGridError(f"Threshold must be finite, got {t}")
    return LesionMask(v.data >= np.float32(t))


def _label(data: np.ndarray, connectivity: int | Connectivity) -> tuple[np.ndarray, list[int]]:
    """Label foreground; returns labels and label ids ordered by (size desc, min voxel index).

    scipy numbers components in raster order of their first voxel, so label order is the order of
    each component's lexicographically smallest voxel.
    """
    labels, count = ndimage.label(data, structure=_structure(connectivity))
    if count == 0:
        return labels, []
    sizes = np.bincount(labels.ravel(), minlength=count + 1)
    ordered = sorted(range(1, count + 1), key=lambda label: (-int(sizes[label]), label))
    return labels, ordered


def connected_components(m: LesionMask, connectivity: int | Connectivity = Connectivity.VERTEX) -> list[LesionMask]:
    """Partition the foreground into maximal connected sets, largest first."""
    labels, ordered = _label(m.data, connectivity)
    return [LesionMask(labels == label) for label in ordered]


def _choose(stats: list[_ComponentStats], reported_suv: float, slice_index: int, tolerance: float) -> _ComponentStats:
    matching = [
        s for s in stats if abs(s.suv_max - reported_suv) <= tolerance + _SUV_SLACK and s.touches_slice
    ]
    if not matching:
        closest = min((abs(s.suv_max - reported_suv) for s in stats), default=None)
        raise NoMatch(
            f"No component with SUVmax {reported_suv} +/- {tolerance} on slice {slice_index} "
            f"({len(stats)} components, closest SUVmax difference {closest})"
        )
    return min(matching, key=lambda s: (abs(s.peak_depth - slice_index), -s.size, s.order))


def _stats_for(order: int, component: np.ndarray, pet: np.ndarray, slice_index: int) -> _ComponentStats:
    values = np.where(component, pet, -np.inf)
    peak = np.unravel_index(int(np.argmax(values)), values.shape)
    touches = 0 <= slice_index < component.shape[0] and bool(component[slice_index].any())
    return _ComponentStats(
        order=order,
        size=int(np.count_nonzero(component)),
        suv_max=float(pet[peak]),
        peak_depth=int(peak[0]),
        touches_slice=touches,
    )


def component_peaks(
    labels: np.ndarray, ordered: list[int], pet: np.ndarray
) -> list[tuple[float, tuple[int, int, int]]]:
    """Peak SUV and its voxel index for each label in ``ordered``.

    Each label is reduced inside its own bounding box, so the cost follows the
    foreground rather than the full grid. Ties resolve to the first voxel in
    raster order, as ``ndimage.maximum_position`` does.
    """
    boxes = ndimage.find_objects(labels)
    peaks = []
    for label in ordered:
        box = boxes[label - 1]
        values = np.where(labels[box] == label, pet[box], -np.inf)
        local = np.unravel_index(int(np.argmax(values)), values.shape)
        position = tuple(int(s.start + i) for s, i in zip(box, local))
        peaks.append((float(values[local]), position))
    return peaks


def select_component(
    components: list[LesionMask], pet: Volume3D, reported_suv: float, slice: int, params: SegParams
) -> LesionMask:
    """Pick the component whose SUVmax matches the report and which intersects the reported slice.

    Several matches resolve to the one whose peak is closest in depth to the slice, then the larger one.

    Raises:
        NoMatch: If no component meets both criteria
    """
    for component in components:
        component.check_aligned(pet)
    stats = [_stats_for(i, c.data, pet.data, slice) for i, c in enumerate(components)]
    return components[_choose(stats, reported_suv, slice, params.suv_tolerance).order]


def _dilated_box(lo: np.ndarray, hi: np.ndarray, dims: tuple[int, int, int]) -> tuple[slice, ...]:
    return tuple(
        slice(max(int(l) - _BOX_DILATION, 0), min(int(h) + _BOX_DILATION, n - 1) + 1) for l, h, n in zip(lo, hi, dims)
    )


def refine(
    component: LesionMask, pet: Volume3D, params: SegParams, initial_threshold: float | None = None
) -> SegResult:
    """Adaptive re-thresholding inside the component's bounding box dilated by two voxels.

    Each iteration estimates the background as the median outside the current mask, aims the threshold
    at max(initial_fraction * peak, background + background_margin) moving at most refine_step * peak,
    and keeps the peak-connected part of the thresholded component. Stops once the voxel count changes
    by less than stabilize_eps with the threshold on target.

    Args:
        component: Selected component (never grown)
        pet: PET volume in SUV
        params: Segmentation parameters
        initial_threshold: Threshold the component came from; initial_fraction * peak when omitted

    Returns:
        SegResult; converged is False if max_iters ran out

    Raises:
        EmptyMask: If the component is empty
    """
    if component.is_empty:
        raise EmptyMask("Cannot refine an empty component")
    component.check_aligned(pet)

    lo, hi = component.bounding_box()
    box = _dilated_box(lo, hi, pet.dims)
    region = pet.data[box].astype(np.float64)
    inside = component.data[box]
    structure = _structure(params.connectivity)

    peak = np.unravel_index(int(np.argmax(np.where(inside, region, -np.inf))), region.shape)
    suv_peak = float(region[peak])
    t = float(initial_threshold) if initial_threshold is not None else params.initial_fraction * suv_peak
    max_step = params.refine_step * suv_peak

    current = inside.copy()
    count = int(np.count_nonzero(current))
    converged = False
    iterations = 0
    for iterations in range(1, params.max_iters + 1):
        outside = region[~current]
        background = float(np.median(outside)) if outside.size else 0.0
        target = max(params.initial_fraction * suv_peak, background + params.background_margin)
        delta = target - t
        t = target if abs(delta) <= max_step else t + float(np.copysign(max_step, delta))

        candidate = (region >= t) & inside
        candidate[peak] = True
        labels, _ = ndimage.label(candidate, structure=structure)
        refined = labels == labels[peak]

        new_count = int(np.count_nonzero(refined))
        change = abs(new_count - count) / count
        current, count = refined, new_count
        if change < params.stabilize_eps and t == target:
            converged = True
            break

    if not converged:
        logger.warning(f"Refinement stopped after {params.max_iters} iterations without stabilizing (t={t:.4f})")

    full = np.zeros(pet.dims, dtype=bool)
    full[box] = current
    return SegResult(
        mask=LesionMask(full),
        achieved_suv_max=suv_peak,
        iterations_used=iterations,
        final_threshold=t,
        selected_component_seed_slice=int(peak[0] + box[0].start),
        converged=converged,
    )


def segment_lesion(
    pet: Volume3D, record: LesionRecord, params: SegParams, slice_index: int | None = None
) -> SegResult:
    """Threshold at initial_fraction * reported SUVmax, label, select and refine.

    Args:
        pet: PET volume in SUV on the working grid
        record: Non-prior lesion record
        params: Segmentation parameters
        slice_index: Depth index on pet's grid; record.slice_index when omitted

    Raises:
        EmptyInitialThreshold: If the initial threshold leaves no voxels
        NoMatch: If no component matches the reported SUVmax and slice
    """
    if record.is_prior_reference:
        raise PetGridError(f"Record {record.exam_id}#{record.sentence_index} refers to a prior study")
    slice_index = record.slice_index if slice_index is None else int(slice_index)

    t0 = params.initial_fraction * record.suv_max
    initial = pet.data >= np.float32(t0)
    if not initial.any():
        raise EmptyInitialThreshold(
            f"Threshold {t0:.4f} ({params.initial_fraction} x SUV {record.suv_max}) leaves no voxels "
            f"(volume max {float(pet.data.max()):.4f})"
        )

    labels, ordered = _label(initial, params.connectivity)
    on_slice = set(np.unique(labels[slice_index]).tolist()) if 0 <= slice_index < pet.dims[0] else set()
    sizes = np.bincount(labels.ravel())
    stats = [
        _ComponentStats(
            order=i,
            size=int(sizes[label]),
            suv_max=suv_max,
            peak_depth=int(position[0]),
            touches_slice=label in on_slice,
        )
        for i, (label, (suv_max, position)) in enumerate(zip(ordered, component_peaks(labels, ordered, pet.data)))
    ]
    chosen = _choose(stats, record.suv_max, slice_index, params.suv_tolerance)
    component = LesionMask(labels == ordered[chosen.order])
    logger.debug(
        f"Selected component {chosen.order} of {len(stats)} (size {chosen.size}, SUVmax {chosen.suv_max:.3f})"
    )

    result = refine(component, pet, params, initial_threshold=t0)
    if not result.mask.data[slice_index].any():
        logger.warning(f"Refined mask left slice {slice_index}; keeping the unrefined component")
        result = SegResult(
            mask=component,
            achieved_suv_max=chosen.suv_max,
            iterations_used=result.iterations_used,
            final_threshold=t0,
            selected_component_seed_slice=chosen.peak_depth,
            converged=result.converged,
        )
    return result
