import json
import logging

import pytest

from petgrid.pyscripts.parameters.loader import ConfigLoader, load_pipeline_config
from petgrid.pyscripts.parameters.models import PipelineConfig, SegParams
from petgrid.pyscripts.parameters.validator import PipelineConfigValidator
from petgrid.pyscripts.types.errors import ConfigInvalid
from petgrid.pyscripts.types.log_level import LogLevel


def test_shipped_defaults_match_schema():
    config = load_pipeline_config()
    assert config == PipelineConfig()
    assert config.grid.dims == (192, 192, 352)
    assert config.grid.spacing == (3.0, 3.0, 3.0)
    assert config.patch.voxels_per_patch == 16**3
    assert config.focal_patch.size == (8, 8, 8)
    assert config.focal_patch.embed_dim == config.patch.embed_dim


def test_layers_merge_in_order(tmp_path):
    path = tmp_path / "c.yml"
    path.write_text("workers: 2\nseg:\n  connectivity: 6\nlog_level: debug\n")
    config = load_pipeline_config(path, {"workers": 8, "perturb": {"rng_seed": 7}})
    assert config.workers == 8
    assert config.seg.connectivity == 6
    assert config.seg.initial_fraction == 0.5
    assert config.perturb.rng_seed == 7
    assert config.log_level == "DEBUG"


@pytest.mark.parametrize(
    "name, text",
    [
        ("c.json", json.dumps({"fusion": {"use_ct": False}})),
        ("c.toml", "[fusion]\nuse_ct = false\n"),
    ],
)
def test_json_and_toml(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    assert load_pipeline_config(path).fusion.use_ct is False


def test_unknown_key_is_rejected(tmp_path):
    path = tmp_path / "c.yml"
    path.write_text("seg:\n  threshold: 0.4\n")
    with pytest.raises(ConfigInvalid):
        load_pipeline_config(path)


def test_type_mismatch_and_missing_file(tmp_path):
    with pytest.raises(ConfigInvalid):
        load_pipeline_config(overrides={"workers": "many"})
    with pytest.raises(ConfigInvalid):
        load_pipeline_config(tmp_path / "absent.yml")


def test_non_mapping_file(tmp_path):
    path = tmp_path / "c.yml"
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigInvalid):
        load_pipeline_config(path)


def test_load_section_nested_or_flat(tmp_path):
    nested = tmp_path / "nested.yml"
    nested.write_text("seg:\n  connectivity: 18\n")
    flat = tmp_path / "flat.json"
    flat.write_text('{"max_iters": 5}')
    loader = ConfigLoader()
    assert loader.load_section(nested, SegParams, "seg") == SegParams(connectivity=18)
    assert loader.load_section(flat, SegParams, "seg") == SegParams(max_iters=5)


def test_validator_accumulates_errors():
    config = PipelineConfig(workers=0, log_level="LOUD")
    config.seg.connectivity = 10
    config.seg.initial_fraction = 1.5
    config.perturb.fraction = 0.5
    errors = PipelineConfigValidator().validate(config)
    assert len(errors) == 5
    assert any("seg.connectivity" in e for e in errors)
    with pytest.raises(ConfigInvalid) as excinfo:
        PipelineConfigValidator().validate_or_raise(config)
    assert str(excinfo.value).count("\n- ") == 5


def test_patch_grid_divisibility():
    config = PipelineConfig()
    config.patch.patch_size = [16, 16, 20]
    assert any("divisible by patch.patch_size" in e for e in PipelineConfigValidator().validate(config))
    config = PipelineConfig()
    config.fusion.pool_factor = 5
    assert any("fusion.pool_factor" in e for e in PipelineConfigValidator().validate(config))


def test_seed_range():
    config = PipelineConfig()
    config.fusion.seed = -1
    assert PipelineConfigValidator().validate(config) == [
        "fusion.seed must be an integer in [0, 2^64), got: -1"
    ]


def test_log_level_enum():
    assert LogLevel.normalize("warning") == "WARNING"
    assert LogLevel.for_verbose(True) is LogLevel.DEBUG
    assert LogLevel.for_verbose(False).numeric == logging.INFO
    with pytest.raises(ValueError):
        LogLevel.normalize("loud")
