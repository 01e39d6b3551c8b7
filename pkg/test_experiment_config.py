from pathlib import Path

import pytest

from errors import ConfigError
from experiment_config import build_config, load_config, parse_config_text

CONFIG_DIR = Path(__file__).parent / "configs"

MINIMAL = """
# comment line
environment = synthetic_smooth
algorithm = legendre_lsvi, monomial_lsvi   # trailing comment
episodes = 20
seeds = 0, 1
"""


@pytest.mark.parametrize("name", ["lqr_left.conf", "lqr_right.conf", "synthetic_eleanor.conf", "tabular_regret.conf"])
def test_shipped_configs_load(name):
    config = load_config(CONFIG_DIR / name)
    assert config.episodes >= 1
    assert len(config.seeds) >= 2


def test_parse_and_defaults():
    config = build_config(parse_config_text(MINIMAL))
    assert config.environment == "synthetic_smooth"
    assert config.algorithm == ["legendre_lsvi", "monomial_lsvi"]
    assert config.seeds == [0, 1]
    assert config.degree == [3]
    assert config.master_seed == 0
    assert config.plot is False and config.oracle is False
    assert config.resolved_degrees() == [3]


def test_lqr_config_values():
    config = load_config(CONFIG_DIR / "lqr_left.conf")
    assert config.algorithm == ["legendre_lsvi", "monomial_lsvi"]
    assert config.degree == [3, 4]
    assert config.seeds == [0, 1, 2, 3, 4]
    assert config.transition_noise == 0.1
    assert config.plot is True


def test_auto_degree():
    config = build_config({"environment": "lqr_left", "algorithm": "legendre_lsvi", "degree": "auto",
                           "episodes": "500", "seeds": "0, 1", "smoothness": "1"})
    # 500^(1/7) rounds up to 3
    assert config.resolved_degrees() == [3]


@pytest.mark.parametrize("text, fragment", [
    ("environment lqr_left", "Line 1"),
    ("environment = lqr_left\n = 3", "Line 2"),
    ("episodes = 3\nepisodes = 4", "duplicate key"),
])
def test_malformed_lines(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config_text(text)


@pytest.mark.parametrize("override", [
    {"colour": "blue"},
    {"environment": "mountain_car"},
    {"algorithm": "legendre_lsvi, legendre_lsvi"},
    {"seeds": "1, 1"},
    {"seeds": ""},
    {"degree": "0"},
    {"degree": "3, 3"},
    {"episodes": "0"},
    {"ridge": "0"},
    {"eleanor_base": "1.0"},
    {"algorithm": "onehot_lsvi"},
])
def test_invalid_values_raise_config_error(override):
    values = parse_config_text(MINIMAL)
    values.update(override)
    with pytest.raises(ConfigError):
        build_config(values)


def test_tabular_only_pairs_with_one_hot():
    base = {"environment": "tabular", "episodes": "5", "seeds": "0, 1"}
    assert build_config({**base, "algorithm": "onehot_lsvi"}).algorithm == ["onehot_lsvi"]
    with pytest.raises(ConfigError, match="onehot_lsvi"):
        build_config({**base, "algorithm": "legendre_lsvi"})


def test_missing_and_undecodable_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.conf")
    bad = tmp_path / "bad.conf"
    bad.write_bytes(b"environment = \xff\xfe\n")
    with pytest.raises(ConfigError, match="UTF-8"):
        load_config(bad)


def test_config_hash_tracks_content():
    first = build_config(parse_config_text(MINIMAL))
    second = build_config(parse_config_text(MINIMAL))
    changed = build_config(parse_config_text(MINIMAL + "master_seed = 5\n"))
    assert first.config_hash() == second.config_hash()
    assert first.config_hash() != changed.config_hash()
    assert len(first.config_hash()) == 64
