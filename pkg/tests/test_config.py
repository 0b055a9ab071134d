import pytest

from hjhomog.config import (
    ConfigError,
    config_from_dict,
    config_hash,
    echo_config,
    parse_config,
    parse_config_text,
)

MINIMAL = "kind: fluctuations\nseed: 3\n"


def test_minimal_config_fills_defaults():
    cfg = parse_config_text(MINIMAL)
    assert cfg.fluctuations.R_list == [8.0, 16.0, 32.0]
    assert cfg.n_replicas == 50 and cfg.scheme.h == 0.1
    text = echo_config(cfg)
    assert text == echo_config(parse_config_text(MINIMAL))
    assert "R_list" in text and "max_sweeps" in text


def test_echo_round_trip_fixed_point():
    cfg = parse_config_text("kind: bias\nenvironment:\n  kind: poisson_bumps\n  Lambda: 5\n")
    once = echo_config(cfg)
    assert echo_config(parse_config_text(once)) == once
    assert parse_config_text(once) == cfg


def test_rejects_subquadratic_growth():
    with pytest.raises(ConfigError, match="q > 1"):
        parse_config_text("environment:\n  q: 0.5\n")


@pytest.mark.parametrize("text, where", [
    ("seed: 1\nbogus: 2\n", "bogus"),
    ("scheme:\n  hh: 0.1\n", "scheme.hh"),
])
def test_unknown_keys_are_errors(text, where):
    with pytest.raises(ConfigError, match=where):
        parse_config_text(text)


def test_all_violations_listed():
    with pytest.raises(ConfigError) as exc:
        parse_config_text("scheme:\n  h: -1\nn_replicas: 0\n")
    msg = str(exc.value)
    assert "scheme.h" in msg and "n_replicas" in msg


def test_empty_lists_rejected():
    with pytest.raises(ConfigError, match="empty"):
        parse_config_text("cell:\n  delta_list: []\n")


def test_parse_error_position():
    # '@' is a reserved indicator and cannot start a plain scalar
    with pytest.raises(ConfigError, match="line 2, column 7"):
        parse_config_text("seed: 1\nkind: @x\n")


def test_top_level_must_be_mapping():
    with pytest.raises(ConfigError):
        parse_config_text("- 1\n- 2\n")


def test_hash_stable_under_reordering():
    a = parse_config_text("seed: 2\nkind: metric\nscheme:\n  h: 0.2\n  max_sweeps: 10\n")
    b = parse_config_text("scheme:\n  max_sweeps: 10\n  h: 0.2\nkind: metric\nseed: 2\n")
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(config_from_dict({"seed": 3, "kind": "metric"}))


def test_hash_ignores_output_dir():
    assert config_hash(config_from_dict({"output_dir": "a"})) == config_hash(
        config_from_dict({"output_dir": "b"}))


def test_parse_file(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(MINIMAL)
    assert parse_config(path).seed == 3
    with pytest.raises(ConfigError, match="does not exist"):
        parse_config(tmp_path / "missing.yaml")


def test_env_params_carry_seed_and_replica():
    cfg = config_from_dict({"seed": 9, "environment": {"kind": "checkerboard", "Lambda": 4}})
    p = cfg.env_params(replica=3)
    assert (p.seed, p.replica, p.kind) == (9, 3, "checkerboard")
