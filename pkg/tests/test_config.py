import pytest
from hypothesis import given, settings, strategies as st

from ipsmom.config import ConfigError, RunConfig, params_from_text, params_to_text, parse_kv
from ipsmom.errors import InvalidParams, IoFailure
from ipsmom.config import read_kv
from ipsmom.model import Link, ModelParams


class TestParseKv:
    def test_comments_blank_lines_and_dashes(self):
        text = "# header\n\nn = 3   # vertices\npi-plus=0.9\n"
        assert parse_kv(text) == {"n": "3", "pi_plus": "0.9"}

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match=":2:"):
            parse_kv("n = 3\nalpha 0.3\n")

    def test_empty_key(self):
        with pytest.raises(ConfigError):
            parse_kv("= 3\n")

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoFailure):
            read_kv(tmp_path / "absent.cfg")


class TestParams:
    def test_round_trip(self):
        p = ModelParams(4, 0.123456789012345, 0.9, 0.1, Link.HARMONIC)
        assert params_from_text(params_to_text(p)) == p

    def test_invalid(self):
        with pytest.raises(InvalidParams):
            params_from_text("n = 3\nalpha = 1.5\npi_plus = 0.9\npi_minus = 0.4\n")


class TestRunConfig:
    def test_defaults(self):
        cfg = RunConfig()
        assert (cfg.k, cfg.l, cfg.seed, cfg.link, cfg.tol, cfg.grid_step) == (10_000, 100, 0, "mean", 1e-6, 0.02)

    def test_round_trip_full(self):
        cfg = RunConfig(command="replicate", n=5, alpha=0.3, alpha_high=0.6, pi_plus=0.9, pi_minus=0.4,
                        link="harmonic", link_high="mean", k=12345, l=7, burn_in=99, p0=0.25,
                        seed=2 ** 62 + 1, workers=3, tol=1e-9, grid_step=0.01, out="a.csv",
                        out_dir="d", dump_chain="c.csv", diagnostics=True, csv=True,
                        inputs=["x.csv", "y.csv"])
        assert RunConfig.from_text(cfg.to_text()) == cfg

    def test_round_trip_defaults(self):
        assert RunConfig.from_text(RunConfig().to_text()) == RunConfig()

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 50), st.floats(1e-9, 1 - 1e-9), st.integers(0, 2 ** 63),
           st.booleans(), st.floats(1e-12, 1.0))
    def test_round_trip_lossless(self, n, alpha, seed, flag, tol):
        cfg = RunConfig(n=n, alpha=alpha, seed=seed, csv=flag, tol=tol)
        assert RunConfig.from_text(cfg.to_text()) == cfg

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            RunConfig.from_text("colour = red\n")

    @pytest.mark.parametrize("text", ["k = 1.5\n", "alpha = abc\n", "csv = maybe\n"])
    def test_bad_values(self, text):
        with pytest.raises(ConfigError):
            RunConfig.from_text(text)

    def test_integer_in_float_notation(self):
        assert RunConfig.from_text("k = 1e5\n").k == 100_000

    def test_merged_ignores_none(self):
        cfg = RunConfig(n=3).merged({"n": None, "alpha": 0.4})
        assert cfg.n == 3 and cfg.alpha == 0.4

    def test_model_params(self):
        cfg = RunConfig(n=3, alpha=0.3, pi_plus=0.9, pi_minus=0.4)
        assert cfg.model_params() == ModelParams(3, 0.3, 0.9, 0.4)
        assert cfg.model_params(alpha=0.6, link="harmonic").alpha == 0.6
