"""Batch front end.

Subcommands:
    certify  - compute the configured certificates for one seeded draw
    verify   - enumeration oracles (when in budget) plus violation-rate trials
    compare  - tightness grids against the closed-form baselines
    accept   - the full acceptance suite

Exit codes: 0 success, 2 invariant violation (a failed exact-regime margin or
a violation rate above the configured confidence), 3 configuration error,
4 enumeration-budget refusal.

All output is deterministic in (config, seed): the CSV files are
byte-identical across reruns. Wall-clock timings therefore live in the
human-readable summary, never in the CSV.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from . import acceptance
from . import bounds as bd
from . import verify as vf
from .config import ConfigError, ScenarioConfig, parse_config
from .hamiltonian import (
    GaussianKernel,
    Gibbs,
    algorithm_variance,
    hypothesis_sensitivity,
)
from .model import BudgetExceeded, generalization_gap

EXIT_OK = 0
EXIT_INVARIANT = 2
EXIT_CONFIG = 3
EXIT_BUDGET = 4

CSV_SCHEMA_VERSION = "gapcert_csv_v1"
CSV_COLUMNS = (
    "schema", "scenario_id", "phase", "method", "value", "delta",
    "violations", "trials", "cp_upper", "baseline", "inputs",
)


def _write_csv(path: Path, rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in sorted(rows, key=lambda r: (r["scenario_id"], r["phase"],
                                               r["method"], r["inputs"])):
            writer.writerow({"schema": CSV_SCHEMA_VERSION, **row})


def _row(cfg_id: str, phase: str, method: str, value, delta="", violations="",
         trials="", cp_upper="", baseline="", inputs="") -> dict:
    return {"scenario_id": cfg_id, "phase": phase, "method": method,
            "value": repr(value) if isinstance(value, float) else value,
            "delta": delta, "violations": violations, "trials": trials,
            "cp_upper": cp_upper, "baseline": baseline, "inputs": inputs}


def _cert_inputs_str(cert: bd.Certificate) -> str:
    return ";".join(f"{k}={cert.inputs[k]!r}" for k in sorted(cert.inputs))


def _certificates_for_draw(config: ScenarioConfig) -> list[bd.Certificate]:
    """Concrete certificates for one seeded (sample, hypothesis) draw.

    Every returned certificate is recomputable bit-identically from its
    recorded inputs by the certificates module.
    """
    rng = vf.substream(config.master_seed, 0)
    sample = vf.draw_sample(config.space, config.n, rng)
    certs: list[bd.Certificate] = []
    n, delta = config.n, config.delta
    if isinstance(config.spec, Gibbs):
        loss = config.loss
        b = loss.bound_b
        beta = config.spec.beta
        c = beta * b / n
        table = loss.values
        idx = np.array(sample.entries)
        L_hat = table[:, idx].mean(axis=1)
        logw = -beta * L_hat + np.log(config.prior.weights)
        logw -= logsumexp(logw)
        w = np.exp(logw)
        h = int(np.searchsorted(np.cumsum(w / w.sum()), rng.random(), side="right")
                .clip(0, len(w) - 1))
        true_L = table @ config.space.probs
        v_h = float(((table[h] - true_L[h]) ** 2) @ config.space.probs)
        rho = (table.max(axis=1) - table.min(axis=1)) / 2.0
        sigma_h = float(rho.max()) * beta / n
        for m in config.methods:
            if m == "bounded_differences":
                certs.append(bd.bound_bounded_differences(b, c, n, delta))
            elif m == "bernstein":
                certs.append(bd.bound_bernstein(v_h, b, c, n, delta))
            elif m == "empirical_bernstein":
                certs.append(bd.bound_empirical_bernstein(float(L_hat[h]), b, c, n, delta))
            elif m in ("subgaussian_sup", "subgaussian_h"):
                pair = bd.bound_subgaussian(float(rho.max()), float(rho[h]),
                                            sigma_h, n, delta)
                certs.append(pair[0] if m == "subgaussian_sup" else pair[1])
    elif isinstance(config.spec, GaussianKernel):
        algorithm = config.spec.algorithm
        sigma = config.spec.sigma
        c_A = hypothesis_sensitivity(algorithm, config.space, n, mode="declared")
        V, _ = algorithm_variance(algorithm, config.space, n)
        center = algorithm(sample)
        h = center + sigma * rng.standard_normal(algorithm.dim_d)
        pl = np.array([config.loss.value(h, i) for i in range(config.space.size)])
        L = float(pl @ config.space.probs)
        for m in config.methods:
            if m == "gaussian_gap":
                certs.append(bd.bound_gaussian_randomization(
                    V, sigma, n, delta, variant="gap_joint", c_A=c_A))
            elif m == "gaussian_gap_bernstein":
                v_h = float(config.space.probs @ (pl - L) ** 2)
                certs.append(bd.bound_gaussian_randomization(
                    V, sigma, n, delta, variant="gap_bernstein", c_A=c_A, v_h=v_h))
            elif m == "gaussian_kl_expectation":
                certs.append(bd.bound_gaussian_randomization(
                    V, sigma, n, delta, variant="kl_expectation", c_A=c_A))
    return certs


def cmd_certify(config: ScenarioConfig, out_dir: Path) -> int:
    certs = _certificates_for_draw(config)
    rows = []
    lines = []
    for cert in certs:
        again = bd.recompute(cert)
        if again.value != cert.value:
            print(f"certificate {cert.method} not recomputable bit-identically",
                  file=sys.stderr)
            return EXIT_INVARIANT
        lines.append(cert.serialize())
        rows.append(_row(config.scenario_id, "certify", cert.method, cert.value,
                         delta=repr(cert.delta), inputs=_cert_inputs_str(cert)))
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{config.scenario_id}_certificates.txt").write_text(
        "\n".join(lines) + ("\n" if lines else ""))
    _write_csv(out_dir / f"{config.scenario_id}_certify.csv", rows)
    summary = [f"scenario {config.scenario_id}: {len(certs)} certificate(s)"]
    summary += [f"  {ln}" for ln in lines]
    (out_dir / f"{config.scenario_id}_certify_summary.txt").write_text(
        "\n".join(summary) + "\n")
    print("\n".join(summary))
    return EXIT_OK


def _exact_oracles(config: ScenarioConfig) -> tuple[list[dict], bool]:
    """Enumerated oracle checks for a Gibbs scenario; returns (rows, ok)."""
    rows = []
    ok = True
    reports = vf.check_logZ_bounded_differences(
        config.spec, config.space, config.loss, config.prior, config.n,
        budget=config.enumeration_budget)
    reports.append(vf.check_proposition_main(
        config.spec, config.space, config.loss, config.prior, config.n,
        lambda h, s: float(config.n) * generalization_gap(h, s, config.space,
                                                          config.loss),
        budget=config.enumeration_budget))
    for rep in reports:
        ok = ok and rep.passed
        rows.append(_row(config.scenario_id, "verify_oracle", rep.name,
                         rep.lhs, baseline=repr(rep.rhs),
                         inputs=f"margin={rep.margin!r};regime={rep.regime}"))
    return rows, ok


def cmd_verify(config: ScenarioConfig, out_dir: Path) -> int:
    rows: list[dict] = []
    ok = True
    summary: list[str] = []
    t0 = time.perf_counter()

    gibbs = isinstance(config.spec, Gibbs)
    if gibbs:
        states = config.space.size**config.n * config.loss.num_hypotheses
        fits = states <= config.enumeration_budget
        if config.verify_exact == "require" and not fits:
            print(f"exact verification requires {states} states, over the "
                  f"budget of {config.enumeration_budget}", file=sys.stderr)
            return EXIT_BUDGET
        if config.verify_exact != "skip" and fits:
            oracle_rows, oracle_ok = _exact_oracles(config)
            rows += oracle_rows
            ok = ok and oracle_ok
            summary.append(f"exact oracles: {'ok' if oracle_ok else 'MARGIN FAILURE'} "
                           f"({len(oracle_rows)} checks)")
        rep = vf.violation_rate_gibbs(
            config.space, config.loss, config.prior, config.spec.beta, config.n,
            config.delta, config.methods, config.trials, config.master_seed)
    else:
        if config.verify_exact == "require":
            print("exact verification is not available for Gaussian-kernel "
                  "scenarios (continuous hypothesis space)", file=sys.stderr)
            return EXIT_BUDGET
        rep = vf.violation_rate_gaussian(
            config.space, config.loss, config.spec.algorithm, config.spec.sigma,
            config.n, config.delta, config.methods, config.trials,
            config.master_seed, posterior_draws=config.posterior_draws)

    for m, stats in sorted(rep.per_method.items()):
        cp = stats.clopper_pearson_upper
        passed = cp <= config.delta
        ok = ok and passed
        rows.append(_row(config.scenario_id, "verify_trials", m, stats.mean_bound,
                         delta=repr(config.delta), violations=str(stats.violations),
                         trials=str(stats.trials), cp_upper=repr(cp),
                         inputs=f"master_seed={config.master_seed}"))
        summary.append(f"{m}: {stats.violations}/{stats.trials} violations, "
                       f"cp99.9={cp:.4f} {'<=':s} delta={config.delta}"
                       if passed else
                       f"{m}: {stats.violations}/{stats.trials} violations, "
                       f"cp99.9={cp:.4f} EXCEEDS delta={config.delta}")

    _write_csv(out_dir / f"{config.scenario_id}_verify.csv", rows)
    summary.append(f"wall-clock: {time.perf_counter() - t0:.2f}s")
    text = "\n".join([f"scenario {config.scenario_id}: verify "
                      f"{'passed' if ok else 'FAILED'}"] + [f"  {s}" for s in summary])
    (out_dir / f"{config.scenario_id}_verify_summary.txt").write_text(text + "\n")
    print(text)
    return EXIT_OK if ok else EXIT_INVARIANT


def cmd_compare(config: ScenarioConfig, out_dir: Path) -> int:
    rows = []
    table = vf.tightness_report(config.compare_ns, config.beta_grid,
                                config.compare_deltas, config.compare_l_hats)
    improved = 0
    for r in table:
        inputs = f"n={r.n};beta={r.beta!r};delta={r.delta!r}"
        rows.append(_row(config.scenario_id, "compare", "bounded_differences",
                         r.eq_simple, delta=repr(r.delta),
                         baseline=repr(r.baseline_gibbs), inputs=inputs))
        improved += int(r.improvement_holds)
        for lh, chain in sorted(r.kl_chain.items()):
            rows.append(_row(config.scenario_id, "compare", "empirical_bernstein",
                             chain["empirical_bernstein"], delta=repr(r.delta),
                             baseline=repr(chain["inverted_kl_baseline"]),
                             inputs=inputs + f";l_hat={lh!r}"))
    _write_csv(out_dir / f"{config.scenario_id}_compare.csv", rows)
    text = (f"scenario {config.scenario_id}: compare grid of {len(table)} points, "
            f"simple bound below baseline at {improved}/{len(table)}")
    (out_dir / f"{config.scenario_id}_compare_summary.txt").write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_accept(out_dir: Path, jobs: int = 1) -> int:
    results = acceptance.run_all(jobs=jobs)
    rows = []
    lines = []
    all_ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        all_ok = all_ok and r.passed
        lines.append(f"[{status}] criterion {r.number}: {r.name} "
                     f"({r.seconds:.1f}s) -- {r.detail}")
        rows.append(_row("acceptance", "accept", f"criterion_{r.number}",
                         "1" if r.passed else "0", inputs=r.name))
    _write_csv(out_dir / "acceptance.csv", rows)
    text = "\n".join(lines + [f"acceptance: {'all passed' if all_ok else 'FAILURES'}"])
    (out_dir / "acceptance_summary.txt").write_text(text + "\n")
    print(text)
    return EXIT_OK if all_ok else EXIT_INVARIANT


PLOT_SCRIPT_TEMPLATE = '''\
#!/usr/bin/env python3
"""Render bound-vs-n and bound-vs-beta curves with baselines overlaid.

Self-contained: reads the results CSV embedded by path below and writes PNG
files next to it. Requires matplotlib.
"""
import csv
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

RESULTS = {results_path!r}


def parse_inputs(s):
    out = {{}}
    for part in s.split(";"):
        if "=" in part:
            k, _, v = part.partition("=")
            try:
                out[k] = float(v)
            except ValueError:
                out[k] = v
    return out


rows = []
with open(RESULTS) as fh:
    for row in csv.DictReader(fh):
        if row.get("phase") == "compare":
            row["_in"] = parse_inputs(row.get("inputs", ""))
            rows.append(row)

for xkey, fname in (("n", "bound_vs_n.png"), ("beta", "bound_vs_beta.png")):
    fig, ax = plt.subplots()
    series = defaultdict(list)
    for row in rows:
        x = row["_in"].get(xkey)
        if x is None:
            continue
        series[(row["method"], "bound")].append((x, float(row["value"])))
        if row.get("baseline"):
            series[(row["method"], "baseline")].append((x, float(row["baseline"])))
    for (method, kind), pts in sorted(series.items()):
        pts.sort()
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        style = "-" if kind == "bound" else "--"
        ax.plot(xs, ys, style, label=f"{{method}} ({{kind}})")
    ax.set_xlabel(xkey)
    ax.set_ylabel("bound value")
    if series:
        ax.set_xscale("log" if xkey == "n" else "linear")
        ax.legend(fontsize=7)
    ax.set_title(f"bound vs {{xkey}}")
    fig.savefig(fname, dpi=120)
    print(f"wrote {{fname}}")
'''


def emit_plot_script(results_path, output_path) -> None:
    """Write a self-contained plotting script for a results CSV."""
    results_path = str(results_path)
    with open(results_path) as fh:
        header = fh.readline()
    if header.strip() and not header.startswith("schema"):
        raise ValueError(f"{results_path}: not a results CSV (bad header)")
    Path(output_path).write_text(PLOT_SCRIPT_TEMPLATE.format(results_path=results_path))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gapcert",
        description="Generalization-gap certificates for Hamiltonian "
                    "stochastic learners: computation, verification, comparison.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
            ("certify", "compute certificates only"),
            ("verify", "enumeration oracles and violation-rate trials"),
            ("compare", "tightness grids against the baselines"),
            ("accept", "run the full acceptance suite")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="scenario file (required except for accept)")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--out", help="output directory (overrides config and "
                                     "the GAPCERT_OUT environment variable)")
        p.add_argument("--budget", type=int, help="override the enumeration budget")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers")
        p.add_argument("--plot-script", help="also emit a plotting script here")
    args = parser.parse_args(argv)

    config = None
    if args.command != "accept" or args.config:
        if not args.config:
            print(f"{args.command}: --config is required", file=sys.stderr)
            return EXIT_CONFIG
        try:
            config = parse_config(args.config)
        except FileNotFoundError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except ConfigError as exc:
            for e in exc.errors:
                print(f"config error: {e}", file=sys.stderr)
            return EXIT_CONFIG
        if args.seed is not None or args.budget is not None:
            import dataclasses
            changes = {}
            if args.seed is not None:
                changes["master_seed"] = args.seed
            if args.budget is not None:
                changes["enumeration_budget"] = args.budget
            config = dataclasses.replace(config, **changes)

    out_dir = Path(args.out or os.environ.get("GAPCERT_OUT")
                   or (config.out_dir if config else "out"))

    try:
        if args.command == "certify":
            code = cmd_certify(config, out_dir)
        elif args.command == "verify":
            code = cmd_verify(config, out_dir)
        elif args.command == "compare":
            code = cmd_compare(config, out_dir)
        else:
            code = cmd_accept(out_dir, jobs=args.jobs)
    except BudgetExceeded as exc:
        print(f"budget refused: {exc}", file=sys.stderr)
        return EXIT_BUDGET

    if args.plot_script and code == EXIT_OK and args.command == "compare":
        emit_plot_script(out_dir / f"{config.scenario_id}_compare.csv",
                         args.plot_script)
    return code


if __name__ == "__main__":
    sys.exit(main())
