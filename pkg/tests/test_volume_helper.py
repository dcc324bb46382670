import struct

import nibabel as nib
import numpy as np
import pytest

from petgrid.pyscripts.helpers.volume_helper import (
    LesionMask,
    Volume3D,
    dice,
    load_mask_nifti,
    load_nifti,
    map_slice_index,
    resample,
    resample_mask,
    save_mask_nifti,
    save_nifti,
    suv_scale,
    zeros_like,
)
from petgrid.pyscripts.parameters.models import GridSpec
from petgrid.pyscripts.types.errors import (
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
from petgrid.pyscripts.types.modality import Modality


def _ramp(dims=(6, 5, 4)) -> np.ndarray:
    return np.arange(np.prod(dims), dtype=np.float32).reshape(dims)


class TestVolume3D:
    def test_stores_read_only_float32(self):
        v = Volume3D(np.ones((2, 3, 4), dtype=np.int16), (2.0, 2.0, 2.0))
        assert v.data.dtype == np.float32
        assert v.dims == (2, 3, 4)
        with pytest.raises(ValueError):
            v.data[0, 0, 0] = 5

    def test_rejects_non_3d(self):
        with pytest.raises(UnsupportedDimensionality):
            Volume3D(np.zeros((4, 4)))

    def test_rejects_non_finite(self):
        data = np.zeros((2, 2, 2))
        data[1, 1, 1] = np.nan
        with pytest.raises(NonFiniteData):
            Volume3D(data)

    def test_rejects_non_positive_spacing(self):
        with pytest.raises(PetGridError):
            Volume3D(np.zeros((2, 2, 2)), (1.0, 0.0, 1.0))

    def test_zeros_like_keeps_geometry(self):
        v = Volume3D(_ramp(), (2.0, 3.0, 4.0), (1.0, 2.0, 3.0))
        z = zeros_like(v, Modality.CT)
        assert z.dims == v.dims and z.spacing == v.spacing and z.origin == v.origin
        assert z.modality == Modality.CT
        assert not z.data.any()


class TestLesionMask:
    def test_bounding_box(self):
        data = np.zeros((5, 5, 5), dtype=bool)
        data[1:3, 2, 0:4] = True
        lo, hi = LesionMask(data).bounding_box()
        assert lo.tolist() == [1, 2, 0]
        assert hi.tolist() == [2, 2, 3]

    def test_empty_bounding_box(self):
        with pytest.raises(EmptyMask):
            LesionMask(np.zeros((3, 3, 3))).bounding_box()

    def test_dice(self):
        a = np.zeros((4, 4, 4), dtype=bool)
        b = np.zeros((4, 4, 4), dtype=bool)
        a[0, 0, :2] = True
        b[0, 0, 1:3] = True
        assert dice(LesionMask(a), LesionMask(a)) == 1.0
        assert dice(LesionMask(a), LesionMask(b)) == pytest.approx(0.5)
        assert dice(LesionMask(a), LesionMask(np.zeros_like(a))) == 0.0
        assert dice(LesionMask(np.zeros_like(a)), LesionMask(np.zeros_like(a))) == 1.0


class TestNifti:
    def test_save_load_keeps_axes_spacing_origin(self, tmp_path):
        v = Volume3D(_ramp(), (2.0, 3.0, 4.0), (-10.0, 5.0, 7.5), Modality.CT)
        path = save_nifti(v, tmp_path / "v.nii.gz")
        back = load_nifti(path, Modality.CT)
        np.testing.assert_array_equal(back.data, v.data)
        assert back.spacing == v.spacing
        assert back.origin == v.origin

    def test_depth_is_nifti_k_axis(self, tmp_path):
        raw = np.zeros((4, 5, 6), dtype=np.float32)
        raw[1, 2, 3] = 1.0
        nib.save(nib.Nifti1Image(raw, np.diag([1.0, 2.0, 3.0, 1.0])), str(tmp_path / "raw.nii"))
        v = load_nifti(tmp_path / "raw.nii")
        assert v.dims == (6, 5, 4)
        assert v.data[3, 2, 1] == 1.0
        assert v.spacing == (3.0, 2.0, 1.0)

    def test_gzip_output_is_byte_stable(self, tmp_path):
        v = Volume3D(_ramp(), (2.0, 2.0, 2.0))
        first = save_nifti(v, tmp_path / "a.nii.gz").read_bytes()
        second = save_nifti(v, tmp_path / "b.nii.gz").read_bytes()
        assert first == second

    def test_mask_round_trip(self, tmp_path):
        data = np.zeros((4, 4, 4), dtype=bool)
        data[1:3, 1:3, 2] = True
        save_mask_nifti(LesionMask(data), tmp_path / "m.nii.gz", (3.0, 3.0, 3.0))
        mask, volume = load_mask_nifti(tmp_path / "m.nii.gz")
        np.testing.assert_array_equal(mask.data, data)
        assert volume.spacing == (3.0, 3.0, 3.0)

    def test_not_a_nifti(self, tmp_path):
        path = tmp_path / "junk.nii"
        path.write_text("this is not an image")
        with pytest.raises(MalformedHeader):
            load_nifti(path)

    def test_four_dimensional_rejected(self, tmp_path):
        nib.save(nib.Nifti1Image(np.zeros((3, 3, 3, 2), dtype=np.float32), np.eye(4)), str(tmp_path / "t.nii"))
        with pytest.raises(UnsupportedDimensionality):
            load_nifti(tmp_path / "t.nii")

    def test_trailing_singleton_dropped(self, tmp_path):
        nib.save(nib.Nifti1Image(np.ones((3, 3, 3, 1), dtype=np.float32), np.eye(4)), str(tmp_path / "t.nii"))
        assert load_nifti(tmp_path / "t.nii").dims == (3, 3, 3)

    def test_two_dimensional_rejected(self, tmp_path):
        nib.save(nib.Nifti1Image(np.ones((4, 4), dtype=np.float32), np.eye(4)), str(tmp_path / "t.nii"))
        with pytest.raises(UnsupportedDimensionality):
            load_nifti(tmp_path / "t.nii")

    def test_header_scaling_applied(self, tmp_path):
        path = tmp_path / "scaled.nii"
        nib.save(nib.Nifti1Image(np.full((4, 4, 4), 3, dtype=np.int16), np.diag([3.0, 3.0, 3.0, 1.0])), str(path))
        payload = bytearray(path.read_bytes())
        struct.pack_into("<ff", payload, 112, 2.0, 1.0)  # scl_slope, scl_inter
        path.write_bytes(bytes(payload))
        volume = load_nifti(path)
        np.testing.assert_array_equal(volume.data, 7.0)
        assert volume.spacing == (3.0, 3.0, 3.0)


class TestSuvScale:
    def test_body_weight_suv(self):
        v = Volume3D(np.full((2, 2, 2), 1000.0))
        suv = suv_scale(v, injected_dose_bq=70e6, weight_kg=70.0)
        np.testing.assert_allclose(suv.data, 1.0, rtol=1e-6)

    def test_decay_factor_raises_suv(self):
        v = Volume3D(np.full((2, 2, 2), 1000.0))
        suv = suv_scale(v, injected_dose_bq=70e6, weight_kg=70.0, decay_factor=0.5)
        np.testing.assert_allclose(suv.data, 2.0, rtol=1e-6)

    @pytest.mark.parametrize(
        "dose, weight, decay, error",
        [
            (0.0, 70.0, 1.0, NonPositiveDose),
            (1e6, -1.0, 1.0, NonPositiveWeight),
            (1e6, 70.0, 1.5, InvalidDecayFactor),
            (1e6, 70.0, 0.0, InvalidDecayFactor),
        ],
    )
    def test_invalid_inputs(self, dose, weight, decay, error):
        with pytest.raises(error):
            suv_scale(Volume3D(np.ones((2, 2, 2))), dose, weight, decay)

    def test_requires_pet(self):
        with pytest.raises(NotPET):
            suv_scale(Volume3D(np.ones((2, 2, 2)), modality=Modality.CT), 1e6, 70.0)


class TestResample:
    def test_canonical_dims(self):
        v = Volume3D(np.ones((30, 20, 10)), (2.0, 4.0, 5.0))
        out = resample(v, GridSpec())
        assert out.dims == (192, 192, 352)
        assert out.spacing == (3.0, 3.0, 3.0)

    def test_identity_returns_same_volume(self):
        g = GridSpec(target_spacing=3.0, target_dims=[8, 8, 8])
        v = Volume3D(_ramp((8, 8, 8)), g.spacing)
        assert resample(v, g) is v

    def test_constant_field_preserved(self):
        v = Volume3D(np.full((30, 30, 30), 5.0), (2.0, 2.0, 2.0))
        out = resample(v, GridSpec(target_spacing=3.0, target_dims=[20, 20, 20]))
        assert out.dims == (20, 20, 20)
        np.testing.assert_allclose(out.data, 5.0, atol=1e-6)

    def test_trilinear_against_linear_field(self):
        # 2x2x2 values 0..7 at 6 mm; output voxel centres 1 and 2 sit at input coordinates 0.25 and 0.75
        v = Volume3D(np.arange(8, dtype=np.float32).reshape(2, 2, 2), (6.0, 6.0, 6.0))
        out = resample(v, GridSpec(target_spacing=3.0, target_dims=[4, 4, 4]))
        assert out.dims == (4, 4, 4)
        coords = {1: 0.25, 2: 0.75}
        for i, x in coords.items():
            for j, y in coords.items():
                for k, z in coords.items():
                    assert out.data[i, j, k] == pytest.approx(4 * x + 2 * y + z, abs=1e-5)

    def test_zero_pad_is_centred(self):
        data = _ramp((10, 10, 10)) + 1.0
        v = Volume3D(data, (3.0, 3.0, 3.0), (0.0, 0.0, 0.0))
        out = resample(v, GridSpec(target_spacing=3.0, target_dims=[20, 20, 20]))
        np.testing.assert_array_equal(out.data[5:15, 5:15, 5:15], data)
        assert out.data[:5].sum() == 0.0
        assert out.origin == (-15.0, -15.0, -15.0)

    def test_mask_nearest_neighbour(self):
        data = np.zeros((10, 10, 10), dtype=bool)
        data[4:6, 4:6, 4:6] = True
        out = resample_mask(LesionMask(data), (3.0, 3.0, 3.0), GridSpec(target_spacing=1.5, target_dims=[20, 20, 20]))
        assert out.voxel_count == 64

    def test_mask_cropped_away(self):
        data = np.zeros((40, 40, 40), dtype=bool)
        data[0, 0, 0] = True
        with pytest.raises(EmptyResult):
            resample_mask(LesionMask(data), (3.0, 3.0, 3.0), GridSpec(target_spacing=3.0, target_dims=[20, 20, 20]))


def test_map_slice_index_through_physical_depth():
    source = Volume3D(np.zeros((40, 2, 2)), (2.0, 1.0, 1.0))
    target = Volume3D(np.zeros((20, 2, 2)), (4.0, 1.0, 1.0))
    assert map_slice_index(10, source, target) == 5
    shifted = Volume3D(np.zeros((20, 2, 2)), (4.0, 1.0, 1.0), (-8.0, 0.0, 0.0))
    assert map_slice_index(10, source, shifted) == 7
