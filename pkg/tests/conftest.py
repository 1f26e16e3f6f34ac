import pytest

import tweezersim as tw

MASTER_SEED = 2026


@pytest.fixture(scope="session")
def join_cfg():
    return tw.load_config(tw.packaged_config("join"))


@pytest.fixture(scope="session")
def rearrange_cfg():
    return tw.load_config(tw.packaged_config("rearrange"))


@pytest.fixture(scope="session")
def join_sequence(join_cfg):
    return tw.parse_sequence(join_cfg.sequence_path.read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def rearrange_sequence(rearrange_cfg):
    return tw.parse_sequence(
        rearrange_cfg.sequence_path.read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def rearrange_records_10k(rearrange_cfg, rearrange_sequence):
    """10^4 distance-control trials at the measured noise, shared between
    the histogram-shape and quantization acceptance checks."""
    return tw.run_ensemble(rearrange_sequence, rearrange_cfg.noise, 10_000,
                           MASTER_SEED, rearrange_cfg.hdt, rearrange_cfg.vdt,
                           rearrange_cfg.post_selection_min_separation)
