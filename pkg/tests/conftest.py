import pytest

from thermoface.config import RunConfig
from thermoface.synthetic import generate

TINY_CONFIG_TEXT = """
# small synthetic run for fast tests
seed=7
synth_subjects=6
synth_images_per_subject=2
synth_width=120
synth_height=150
hidden_sizes=24,24
epochs=4
batch_size=256
learning_rate=0.003
"""


@pytest.fixture(scope="session")
def tiny_cfg():
    from thermoface.config import parse_config_text

    return parse_config_text(TINY_CONFIG_TEXT, source="tiny")


@pytest.fixture(scope="session")
def tiny_dataset(tiny_cfg, tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny_data")
    return generate(tiny_cfg.synth_spec(), out)


@pytest.fixture(scope="session")
def tiny_models(tiny_cfg, tiny_dataset):
    from thermoface.pipeline import fit_models

    pca, dpm, report = fit_models(tiny_cfg, tiny_dataset.train_manifest_path)
    return pca, dpm, report


@pytest.fixture(scope="session")
def tiny_config_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "tiny.cfg"
    path.write_text(TINY_CONFIG_TEXT)
    return path
