import numpy as np
import pytest

from petgrid.pyscripts.helpers.phantom_helper import (
    CT_AIR_HU,
    CT_SOFT_TISSUE_HU,
    BlobSpec,
    Phantom,
    make_phantom,
    random_phantom,
)
from petgrid.pyscripts.helpers.report_parse_helper import ReportParseHelper
from petgrid.pyscripts.types.errors import PetGridError


def test_zero_blobs_is_uniform_background():
    case = make_phantom(Phantom(background=1.5, dims=(16, 16, 16)))
    np.testing.assert_allclose(case.pet.data, 1.5)
    assert case.truth_masks == ()
    assert case.reported == ()
    assert case.report_text == "No hypermetabolic lesions.\n"


def test_blob_peak_and_report_sentence():
    case = make_phantom(Phantom(blobs=(BlobSpec((10, 12, 14), 2.0, 7.3, site="liver"),), dims=(32, 32, 32)))
    assert case.pet.data[10, 12, 14] == pytest.approx(7.3)
    assert case.reported == ((7.3, 11),)
    assert case.report_text == "Hypermetabolic liver, SUV max 7.3, slice 11.\n"


def test_truth_is_half_peak_isocontour():
    case = make_phantom(Phantom(blobs=(BlobSpec((16, 16, 16), 3.0, 10.0),), dims=(32, 32, 32)))
    truth = case.truth_masks[0]
    assert truth.data[16, 16, 16]
    assert case.pet.data[truth.data].min() >= 5.0 - 1e-5
    assert case.pet.data[~truth.data].max() < 5.0


def test_ct_has_body_and_air():
    case = make_phantom(Phantom(dims=(8, 32, 32)))
    assert case.ct.data[4, 16, 16] == CT_SOFT_TISSUE_HU
    assert case.ct.data[4, 0, 0] == CT_AIR_HU


def test_seeded_noise_is_reproducible():
    phantom = Phantom(blobs=(BlobSpec((8, 8, 8), 2.0, 5.0),), dims=(16, 16, 16), noise_std=0.3)
    first = make_phantom(phantom, seed=7)
    second = make_phantom(phantom, seed=7)
    other = make_phantom(phantom, seed=8)
    assert first.pet.data.tobytes() == second.pet.data.tobytes()
    assert first.pet.data.tobytes() != other.pet.data.tobytes()
    assert first.pet.data.min() >= 0.0


@pytest.mark.parametrize(
    "phantom_kwargs",
    [
        {"blobs": (BlobSpec((40, 0, 0), 2.0, 5.0),), "dims": (32, 32, 32)},
        {"blobs": (BlobSpec((4, 4, 4), 2.0, 0.0),), "dims": (32, 32, 32)},
        {"background": -1.0},
    ],
)
def test_invalid_phantoms(phantom_kwargs):
    with pytest.raises(PetGridError):
        Phantom(**phantom_kwargs)


def test_random_phantom_is_seeded_and_bounded():
    assert random_phantom(3) == random_phantom(3)
    for seed in range(30):
        phantom = random_phantom(seed)
        assert 1 <= len(phantom.blobs) <= 4
        assert phantom.background == 0.0 or 1.0 <= phantom.background <= 2.0
        for blob in phantom.blobs:
            assert 1.5 <= blob.sigma <= 3.5
            assert 3.0 <= blob.peak <= 15.0


def test_random_phantom_blob_count_and_background_switch():
    phantom = random_phantom(5, n_blobs=2, with_background=False)
    assert len(phantom.blobs) == 2
    assert phantom.background == 0.0
    with pytest.raises(PetGridError):
        random_phantom(5, n_blobs=5)


def test_report_parses_back_to_reported_values():
    case = make_phantom(random_phantom(11, n_blobs=4))
    parsed = ReportParseHelper().parse_text("phantom", case.report_text)
    assert [(r.suv_max, r.slice_number) for r in parsed.records] == list(case.reported)
    assert not any(r.is_prior_reference for r in parsed.records)
    assert all(r.organ != "unknown" for r in parsed.records)
