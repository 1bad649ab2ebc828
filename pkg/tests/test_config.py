import pytest

from heatctl import config
from heatctl.errors import ConfigurationError

TEXT = """
domain.L = 1.0
domain.a = 0.25
domain.b = 0.75
domain.J = 32
problem.y0 = [2.0, 0.5]
problem.r = 1.0
problem.M = 2.5
sampling.delta = 0.004
sweep.eta = 0.4
sweep.k_range = [3, 20]
run.seed = 7
"""


def test_parse_dotted_keys():
    cfg = config.parse(TEXT)
    assert (cfg.L, cfg.a, cfg.b, cfg.J) == (1.0, 0.25, 0.75, 32)
    assert cfg.M == 2.5 and cfg.M_exit_fraction is None
    assert cfg.k_values() == list(range(3, 21))
    assert cfg.state()[:3].tolist() == [2.0, 0.5, 0.0] and cfg.state().size == 32


def test_tables_equal_dotted():
    tables = "[domain]\nJ = 32\n[sweep]\neta = 0.4\n"
    assert config.parse(tables) == config.parse("domain.J = 32\nsweep.eta = 0.4\n")


def test_round_trip():
    cfg = config.parse(TEXT)
    again = config.parse(config.serialize(cfg))
    assert again == cfg
    assert config.serialize(again) == config.serialize(cfg)


def test_defaults_are_reference():
    cfg = config.parse("")
    assert (cfg.L, cfg.a, cfg.b, cfg.J, cfg.y0, cfg.r) == (1.0, 0.25, 0.75, 64, [2.0, 0.5], 1.0)
    assert cfg.M_exit_fraction == 0.6 and cfg.eta == 0.5 and cfg.k_range == [3, 40]


@pytest.mark.parametrize("text,field", [
    ("domain.a = 0.8\ndomain.b = 0.3", "domain.omega"),
    ("domain.J = 0", "domain.J"),
    ("domain.J = 2.5", "domain.J"),
    ("domain.L = -1.0", "domain.L"),
    ("problem.y0 = [0.1, 0.2]", "problem.y0"),
    ("problem.r = 0", "problem.r"),
    ("sweep.eta = 1.5", "sweep.eta"),
    ("sweep.k_range = [5, 2]", "sweep.k_range"),
    ("sweep.deltas = []", "sweep.deltas"),
    ("sampling.delta = -0.1", "sampling.delta"),
    ("domain.Q = 3", "domain.Q"),
    ("run.seed = -1", "run.seed"),
])
def test_field_precise_errors(text, field):
    with pytest.raises(ConfigurationError) as info:
        config.parse(text)
    assert info.value.field == field
    assert field in str(info.value)


def test_malformed_toml():
    with pytest.raises(ConfigurationError, match="malformed"):
        config.parse("domain.L = = 1")
