import numpy as np
import pytest
from hypothesis import given, strategies as st

from fcsl.config import DEFAULTS, parse_config
from fcsl.errors import ConfigurationError


def test_minimal_config_fills_defaults():
    cfg = parse_config('model = "burgers_frac"\n[solver]\nt_end = 1\n')
    r = cfg.resolved
    assert r["model"]["alpha"] == 0.3 and r["solver"]["dt"] == "auto-cfl"
    assert r["solver"]["t_end"] == 1.0 and isinstance(r["solver"]["t_end"], float)
    assert set(r) == set(DEFAULTS)
    assert cfg.build_model().name == "burgers_frac"
    assert cfg.solver_config().dt is None


def test_unknown_key_suggests_alias():
    with pytest.raises(ConfigurationError, match="did you mean 'tau'"):
        parse_config("[solver]\nviscocity = 0.01\n")
    with pytest.raises(ConfigurationError, match="did you mean 'n_paths'"):
        parse_config("[experiment]\nn_path = 3\n")
    with pytest.raises(ConfigurationError, match="unknown key"):
        parse_config("[solvr]\nn = 32\n")


def test_alpha_regime_error():
    text = '[model]\nalpha = 0.7\n[model.noise]\nkind = "multiplicative"\nfamily = "sine"\n'
    with pytest.raises(ConfigurationError, match=r"alpha in \(0, 1/2\)"):
        parse_config(text)
    with pytest.raises(ConfigurationError, match="alpha"):
        parse_config("[model]\nalpha = 1.3\n")


def test_parse_error_reports_line():
    with pytest.raises(ConfigurationError, match="line 2"):
        parse_config("[solver]\nn = = 3\n")


@pytest.mark.parametrize("text", [
    '[solver]\nn = "many"\n',
    "[solver]\nn = 7\n",
    "[solver]\ndt = -0.1\n",
    '[solver]\ndt = "auto"\n',
    '[experiment]\ncheck = "contration"\n',
    '[experiment]\nu0 = { shape = "wave" }\n',
    "[experiment]\nzeta_range = [1.0, -1.0]\n",
    '[model]\nname = "heat"\n',
])
def test_semantic_errors(text):
    with pytest.raises(ConfigurationError):
        parse_config(text)


def test_custom_model_parts():
    cfg = parse_config('[model]\nflux = "linear"\ndiffusion = "zero"\nc = -0.5\n')
    m = cfg.build_model()
    assert m.flux.name == "linear" and m.flux.params["c"] == -0.5 and m.diffusion.is_zero


def test_initial_data_and_default_perturbation():
    cfg = parse_config('[experiment]\nu0 = { shape = "cosine", amplitude = 2.0, offset = 0.5 }\n')
    g = cfg.solver_config().grid
    u0 = cfg.initial(g).values
    np.testing.assert_allclose(u0, 2 * np.cos(2 * np.pi * g.x) + 0.5)
    ub = cfg.initial(g, "u0_b").values
    np.testing.assert_allclose(ub - u0, 0.1 * np.sin(4 * np.pi * g.x), atol=1e-15)


@given(st.floats(0.01, 0.49), st.integers(3, 12).map(lambda k: 2**k), st.integers(0, 2**63),
       st.sampled_from(["sine", "trig"]), st.booleans(),
       st.lists(st.sampled_from(["contraction", "mean", "nld", "viscosity", "lp_bound"]), max_size=3))
def test_resolved_round_trip(alpha, n, seed, family, auto, checks):
    dt = '"auto-cfl"' if auto else "0.001"
    text = (f"[model]\nalpha = {alpha!r}\n[model.noise]\nfamily = \"{family}\"\n"
            f"[solver]\nn = {n}\nseed = {seed}\ndt = {dt}\n"
            f"[experiment]\ncheck = {checks!r}\n".replace("'", '"'))
    cfg = parse_config(text)
    again = parse_config(cfg.to_toml())
    assert again.resolved == cfg.resolved
    assert again.to_toml() == cfg.to_toml()
