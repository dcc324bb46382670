from pathlib import Path

import pytest

from petgrid.pyscripts.parameters.models import FocalSpec, GridSpec, PatchSpec, PipelineConfig

FIXTURES_DIR = Path(__file__).parent / "fixtures"


@pytest.fixture
def small_config() -> PipelineConfig:
    """64^3 grid at 3 mm with 16^3 global patches and 8^3 focal patches."""
    return PipelineConfig(
        grid=GridSpec(target_spacing=3.0, target_dims=[64, 64, 64]),
        focal=FocalSpec(resampled_dims=[32, 32, 32], patch_size=[8, 8, 8]),
        patch=PatchSpec(patch_size=[16, 16, 16], embed_dim=16),
        workers=1,
    )
