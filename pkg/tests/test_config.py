import math

import pytest

import oracles
from qndsim.config import ConfigError, RunConfig, dump_config, load_config, parse_config


def test_defaults_and_derived_strengths():
    cfg = RunConfig()
    assert cfg.weak_strength(5.0).s == pytest.approx(oracles.S_NBAR5_ETA02, rel=1e-9)
    assert cfg.weak_strength(5.0).qbar == pytest.approx(1.28 * oracles.S_NBAR5_ETA02)
    assert cfg.weak_strength(0.0).s == 0.0
    nb = cfg.sweep_nbar()
    assert nb[0] == 0.0 and nb[-1] == pytest.approx(5.0) and len(nb) == 11
    steps = [b - a for a, b in zip(map(math.sqrt, nb), map(math.sqrt, nb[1:]))]
    assert max(steps) - min(steps) < 1e-12


def test_round_trip():
    cfg = parse_config("qubit.t1 = 3.1e-6\nmap.nbar = 0.1, 1\namp.q_ratio = auto\n"
                       "run.formats = csv, ndjson\nreadout.thetas = 0, 1.5707963267948966\n")
    assert cfg.t1 == 3.1e-6 and cfg.map_nbar == (0.1, 1.0) and cfg.q_ratio is None
    assert cfg.formats == ("csv", "ndjson")
    assert parse_config(dump_config(cfg)) == cfg
    assert parse_config(dump_config(RunConfig())) == RunConfig()


def test_comments_and_blank_lines(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# header\n\nrun.seed = 7  # trailing\n")
    assert load_config(p).seed == 7


@pytest.mark.parametrize("text, match", [
    ("cavity.nope = 1", "unknown key"),
    ("qubit.t1", "expected"),
    ("qubit.t1 = abc", "qubit.t1"),
    ("qubit.t2 = 9e-6", "t2"),
    ("qubit.p_eq = 1.5", "p_eq"),
    ("amp.eta = 0", "eta"),
    ("readout.s = 1.0", "readout.s"),
    ("readout.thetas = 7", "thetas"),
    ("run.threads = 0", "threads"),
    ("run.formats = pdf", "formats"),
    ("jumps.filter_width = 10e-9", "duration/dt"),
    ("run.seed = -1", "seed"),
])
def test_invalid_configs_are_named(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_missing_file():
    with pytest.raises(OSError):
        load_config("/nonexistent/qnd.cfg")
