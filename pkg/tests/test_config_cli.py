"""Scenario-file parsing, validation, and the command-line front end."""

import subprocess
import sys

import pytest

from gapcert.cli import (
    EXIT_BUDGET,
    EXIT_CONFIG,
    EXIT_OK,
    emit_plot_script,
    main,
)
from gapcert.config import ConfigError, parse_config
from gapcert.hamiltonian import GaussianKernel, Gibbs


def write_config(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


GIBBS_SMALL = """\
scenario_id = demo
n = 4
instance.num_points = 3
instance.num_hypotheses = 4
hamiltonian.beta = 5.0
methods = bounded_differences,empirical_bernstein
# enough trials for the 99.9% Clopper-Pearson upper bound to clear delta
trials = 200
"""

GAUSSIAN_SMALL = """\
scenario_id = gdemo
hamiltonian.variant = gaussian_kernel
hamiltonian.sigma = 0.5
n = 100
instance.num_points = 6
methods = gaussian_gap
trials = 200
posterior_draws = 200
"""


class TestParse:
    def test_minimal_defaults(self, tmp_path):
        cfg = parse_config(write_config(tmp_path, "minimal.txt", "n = 20\n"))
        assert cfg.scenario_id == "minimal"
        assert isinstance(cfg.spec, Gibbs) and cfg.spec.beta == 5.0
        assert cfg.methods == ("bounded_differences",)
        assert cfg.delta == 0.05
        assert cfg.verify_exact == "auto"
        assert cfg.beta_grid(100) == [0.0, 10.0, 10.0]

    def test_gaussian_variant(self, tmp_path):
        cfg = parse_config(write_config(tmp_path, "g.txt", GAUSSIAN_SMALL))
        assert isinstance(cfg.spec, GaussianKernel)
        assert cfg.spec.sigma == 0.5
        assert cfg.prior.lebesgue_reference

    def test_missing_n(self, tmp_path):
        with pytest.raises(ConfigError, match="n: required"):
            parse_config(write_config(tmp_path, "c.txt", "delta = 0.05\n"))

    def test_delta_out_of_domain_names_field(self, tmp_path):
        with pytest.raises(ConfigError, match="delta"):
            parse_config(write_config(tmp_path, "c.txt", "n = 10\ndelta = 1.5\n"))

    def test_all_errors_collected(self, tmp_path):
        with pytest.raises(ConfigError) as exc:
            parse_config(write_config(tmp_path, "c.txt",
                                      "delta = 1.5\ntrials = 0\n"))
        msgs = "\n".join(exc.value.errors)
        assert len(exc.value.errors) >= 3
        assert "delta" in msgs and "trials" in msgs and "n: required" in msgs

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config(write_config(tmp_path, "c.txt", "n = 10\nbogus = 1\n"))

    def test_duplicate_key(self, tmp_path):
        with pytest.raises(ConfigError, match="duplicate key"):
            parse_config(write_config(tmp_path, "c.txt", "n = 10\nn = 11\n"))

    def test_method_variant_compatibility(self, tmp_path):
        with pytest.raises(ConfigError, match="incompatible"):
            parse_config(write_config(tmp_path, "c.txt",
                                      "n = 10\nmethods = gaussian_gap\n"))

    def test_unknown_method(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown method"):
            parse_config(write_config(tmp_path, "c.txt", "n = 10\nmethods = foo\n"))

    def test_verify_exact_validated(self, tmp_path):
        with pytest.raises(ConfigError, match="verify.exact"):
            parse_config(write_config(tmp_path, "c.txt",
                                      "n = 10\nverify.exact = maybe\n"))

    def test_stability_precondition_checked_at_parse(self, tmp_path):
        text = GAUSSIAN_SMALL.replace("hamiltonian.sigma = 0.5",
                                      "hamiltonian.sigma = 0.01")
        with pytest.raises(ConfigError, match="stability precondition"):
            parse_config(write_config(tmp_path, "c.txt", text))


class TestCli:
    def test_certify_writes_outputs(self, tmp_path):
        cfg = write_config(tmp_path, "demo.txt", GIBBS_SMALL)
        out = tmp_path / "out"
        assert main(["certify", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        assert (out / "demo_certificates.txt").exists()
        csv_text = (out / "demo_certify.csv").read_text()
        assert csv_text.startswith("schema,")
        assert "bounded_differences" in csv_text
        assert "empirical_bernstein" in csv_text

    def test_certify_rerun_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, "demo.txt", GIBBS_SMALL)
        a, b = tmp_path / "a", tmp_path / "b"
        main(["certify", "--config", str(cfg), "--out", str(a)])
        main(["certify", "--config", str(cfg), "--out", str(b)])
        assert (a / "demo_certify.csv").read_bytes() == (b / "demo_certify.csv").read_bytes()

    def test_seed_override_changes_empirical_row(self, tmp_path):
        cfg = write_config(tmp_path, "demo.txt", GIBBS_SMALL)
        a, b = tmp_path / "a", tmp_path / "b"
        main(["certify", "--config", str(cfg), "--out", str(a), "--seed", "1"])
        main(["certify", "--config", str(cfg), "--out", str(b), "--seed", "2"])
        assert (a / "demo_certify.csv").read_bytes() != (b / "demo_certify.csv").read_bytes()

    def test_bad_config_exits_3(self, tmp_path):
        cfg = write_config(tmp_path, "bad.txt", "n = 10\ndelta = 2\n")
        assert main(["certify", "--config", str(cfg)]) == EXIT_CONFIG
        assert main(["certify", "--config", str(tmp_path / "missing.txt")]) == EXIT_CONFIG
        assert main(["certify"]) == EXIT_CONFIG

    def test_verify_small_gibbs(self, tmp_path):
        cfg = write_config(tmp_path, "demo.txt", GIBBS_SMALL)
        out = tmp_path / "out"
        assert main(["verify", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        text = (out / "demo_verify.csv").read_text()
        assert "verify_oracle" in text  # 3^4 x 4 states fit the default budget
        assert "verify_trials" in text

    def test_verify_require_over_budget_exits_4(self, tmp_path):
        cfg = write_config(tmp_path, "demo.txt",
                           GIBBS_SMALL.replace("n = 4", "n = 50")
                           + "verify.exact = require\n")
        assert main(["verify", "--config", str(cfg),
                     "--out", str(tmp_path / "o")]) == EXIT_BUDGET

    def test_verify_require_refused_for_gaussian(self, tmp_path):
        cfg = write_config(tmp_path, "g.txt", GAUSSIAN_SMALL + "verify.exact = require\n")
        assert main(["verify", "--config", str(cfg),
                     "--out", str(tmp_path / "o")]) == EXIT_BUDGET

    def test_verify_gaussian(self, tmp_path):
        cfg = write_config(tmp_path, "g.txt", GAUSSIAN_SMALL)
        out = tmp_path / "out"
        assert main(["verify", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        assert "gaussian_gap" in (out / "gdemo_verify.csv").read_text()

    def test_compare_and_plot_script(self, tmp_path):
        cfg = write_config(tmp_path, "demo.txt", GIBBS_SMALL + (
            "compare.ns = 100,1000\ncompare.betas = 0,sqrt_n\n"
            "compare.deltas = 0.05\ncompare.l_hats = 0,0.1\n"))
        out = tmp_path / "out"
        script = tmp_path / "plot.py"
        assert main(["compare", "--config", str(cfg), "--out", str(out),
                     "--plot-script", str(script)]) == EXIT_OK
        csv_path = out / "demo_compare.csv"
        # 2 ns x 2 betas x 1 delta rows for the simple bound, plus kl-chain rows
        lines = csv_path.read_text().splitlines()
        assert len(lines) == 1 + 4 * (1 + 2)
        # the emitted script is valid python and renders from the CSV
        compile(script.read_text(), str(script), "exec")
        run = subprocess.run([sys.executable, str(script)], cwd=tmp_path,
                             capture_output=True, text=True)
        assert run.returncode == 0, run.stderr
        assert (tmp_path / "bound_vs_n.png").exists()
        assert (tmp_path / "bound_vs_beta.png").exists()

    def test_emit_plot_script_rejects_foreign_csv(self, tmp_path):
        bad = tmp_path / "other.csv"
        bad.write_text("time,value\n1,2\n")
        with pytest.raises(ValueError, match="bad header"):
            emit_plot_script(bad, tmp_path / "plot.py")

    def test_out_dir_env_fallback(self, tmp_path, monkeypatch):
        cfg = write_config(tmp_path, "demo.txt", GIBBS_SMALL)
        env_out = tmp_path / "env_out"
        monkeypatch.setenv("GAPCERT_OUT", str(env_out))
        monkeypatch.chdir(tmp_path)
        assert main(["certify", "--config", str(cfg)]) == EXIT_OK
        assert (env_out / "demo_certify.csv").exists()
