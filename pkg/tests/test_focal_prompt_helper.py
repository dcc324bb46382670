import numpy as np
import pytest

from petgrid.pyscripts.helpers.focal_prompt_helper import (
    base_side,
    build_focal_prompt,
    crop,
    derive_seed,
    extract_box,
    fit_crop_box,
    mask_centroid,
    perturb,
)
from petgrid.pyscripts.helpers.volume_helper import LesionMask, Volume3D
from petgrid.pyscripts.parameters.models import FocalSpec, PerturbSpec
from petgrid.pyscripts.types.errors import EmptyMask
from petgrid.pyscripts.types.modality import Modality


def _cube_mask(dims, lo, hi) -> LesionMask:
    data = np.zeros(dims, dtype=bool)
    data[lo[0] : hi[0] + 1, lo[1] : hi[1] + 1, lo[2] : hi[2] + 1] = True
    return LesionMask(data)


def _volumes(dims):
    pet = Volume3D(np.arange(np.prod(dims), dtype=np.float32).reshape(dims), (3.0, 3.0, 3.0))
    ct = Volume3D(np.full(dims, 40.0), (3.0, 3.0, 3.0), modality=Modality.CT)
    return pet, ct


class TestGeometry:
    def test_centroid(self):
        assert mask_centroid(_cube_mask((32, 32, 32), (12, 4, 0), (19, 5, 2))) == (15.5, 4.5, 1.0)

    def test_centroid_of_empty_mask(self):
        with pytest.raises(EmptyMask):
            mask_centroid(LesionMask(np.zeros((4, 4, 4))))

    def test_base_side(self):
        small = _cube_mask((64, 64, 64), (10, 10, 10), (17, 12, 12))
        assert base_side(small) == 16.0
        large = _cube_mask((64, 64, 64), (0, 0, 0), (39, 3, 3))
        assert base_side(large) == 50.0
        assert base_side(large, margin_fraction=0.0, min_side=8) == 40.0


class TestSeedAndPerturb:
    def test_derive_seed(self):
        seed = derive_seed(0, "exam", 1)
        assert seed == derive_seed(0, "exam", 1)
        assert 0 <= seed < 2**64
        assert seed != derive_seed(0, "exam", 2)
        assert seed != derive_seed(1, "exam", 1)
        assert seed != derive_seed(0, "other", 1)

    def test_zero_fraction_is_identity(self):
        assert perturb((1.0, 2.0, 3.0), 16.0, PerturbSpec(fraction=0.0, rng_seed=9)) == ((1.0, 2.0, 3.0), 16.0)

    def test_same_seed_same_draw(self):
        spec = PerturbSpec(fraction=0.2, rng_seed=42)
        assert perturb((10.0, 10.0, 10.0), 20.0, spec) == perturb((10.0, 10.0, 10.0), 20.0, spec)

    def test_draws_within_bound(self):
        r = 20.0
        for seed in range(2000):
            center, side = perturb((0.0, 0.0, 0.0), r, PerturbSpec(fraction=0.2, rng_seed=seed))
            assert all(abs(c) <= 0.2 * r for c in center)
            assert abs(side - r) <= 0.2 * r


class TestFitCropBox:
    def test_centred_box(self):
        start, side = fit_crop_box((12, 12, 12), (19, 19, 19), (32, 32, 32), (15.5, 15.5, 15.5), 16.0)
        assert start == (8, 8, 8)
        assert side == 16

    def test_side_grows_to_mask_extent(self):
        _, side = fit_crop_box((0, 0, 0), (29, 0, 0), (64, 64, 64), (14.5, 0.0, 0.0), 10.2)
        assert side == 30

    def test_translated_to_contain_mask(self):
        start, side = fit_crop_box((20, 20, 20), (27, 27, 27), (64, 64, 64), (60.0, 0.0, 23.5), 16.0)
        assert side == 16
        assert start[0] == 20
        assert start[1] == 12

    def test_kept_inside_volume_when_it_fits(self):
        start, _ = fit_crop_box((0, 0, 0), (3, 3, 3), (32, 32, 32), (1.5, 1.5, 1.5), 16.0)
        assert start == (0, 0, 0)


def test_extract_box_zero_pads():
    array = np.ones((4, 4, 4), dtype=np.float32)
    out = extract_box(array, (-2, 0, 2), 4)
    assert out.shape == (4, 4, 4)
    assert out[:2].sum() == 0
    assert out[2:, :, :2].sum() == 2 * 4 * 2
    assert out[:, :, 2:].sum() == 0


class TestCrop:
    def test_identity_resolution_copies_voxels(self):
        pet, ct = _volumes((32, 32, 32))
        mask = _cube_mask((32, 32, 32), (12, 12, 12), (19, 19, 19))
        focal = crop(pet, ct, mask, (15.5, 15.5, 15.5), 16.0, resampled_dims=(16, 16, 16))
        assert focal.box_start == (8, 8, 8)
        np.testing.assert_array_equal(focal.pet_crop.data, pet.data[8:24, 8:24, 8:24])
        assert focal.mask_crop.voxel_count == 8**3
        assert focal.pet_crop.origin == (24.0, 24.0, 24.0)
        assert focal.ct_crop.modality == Modality.CT

    def test_box_larger_than_volume_is_zero_padded(self):
        pet, ct = _volumes((8, 8, 8))
        mask = _cube_mask((8, 8, 8), (0, 0, 0), (7, 7, 7))
        focal = crop(pet, ct, mask, (3.5, 3.5, 3.5), 16.0, resampled_dims=(16, 16, 16))
        assert focal.box_side == 16
        assert focal.box_start == (-4, -4, -4)
        assert focal.ct_crop.data[:4].sum() == 0
        np.testing.assert_array_equal(focal.pet_crop.data[4:12, 4:12, 4:12], pet.data)
        assert focal.contains(mask)

    def test_resampled_spacing_per_axis(self):
        pet, ct = _volumes((32, 32, 32))
        mask = _cube_mask((32, 32, 32), (12, 12, 12), (19, 19, 19))
        focal = crop(pet, ct, mask, (15.5, 15.5, 15.5), 16.0, resampled_dims=(32, 32, 64))
        assert focal.pet_crop.dims == (32, 32, 64)
        assert focal.pet_crop.spacing == (1.5, 1.5, 0.75)
        assert focal.mask_crop.voxel_count > 0


def test_build_focal_prompt_sidecar_and_containment():
    pet, ct = _volumes((48, 48, 48))
    mask = _cube_mask((48, 48, 48), (20, 18, 22), (27, 21, 25))
    spec = PerturbSpec(fraction=0.2, rng_seed=derive_seed(0, "exam", 0))
    focal, sidecar = build_focal_prompt(pet, ct, mask, FocalSpec(), spec)
    assert focal.contains(mask)
    assert focal.pet_crop.dims == (32, 32, 32)
    assert sidecar["seed"] == spec.rng_seed
    assert sidecar["base_side"] == 16.0
    assert sidecar["box_side"] == focal.box_side
    assert set(sidecar) == {
        "mask_centroid",
        "base_side",
        "perturbed_center",
        "perturbed_side",
        "seed",
        "perturb_fraction",
        "box_start",
        "box_side",
        "resampled_dims",
    }


@pytest.mark.slow
def test_containment_over_random_geometries():
    rng = np.random.default_rng(2024)
    dims = (64, 64, 64)
    for _ in range(50):
        lo = rng.integers(0, 48, size=3)
        hi = np.minimum(lo + rng.integers(0, 16, size=3), 63)
        mask = _cube_mask(dims, lo, hi)
        centroid = mask_centroid(mask)
        r = base_side(mask)
        for seed in range(1000):
            center, side = perturb(centroid, r, PerturbSpec(fraction=0.2, rng_seed=seed))
            start, box_side = fit_crop_box(lo, hi, dims, center, side)
            assert all(s <= l and h <= s + box_side - 1 for s, l, h in zip(start, lo, hi))


@pytest.mark.slow
def test_perturbation_bound_hard():
    r = 16.0
    for seed in range(100_000):
        center, side = perturb((0.0, 0.0, 0.0), r, PerturbSpec(fraction=0.2, rng_seed=seed))
        assert max(abs(c) for c in center) <= 0.2 * r
        assert abs(side - r) <= 0.2 * r
