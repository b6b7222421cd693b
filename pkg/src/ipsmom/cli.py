"""Command-line entry point.

Subcommands: simulate, exact-moments, estimate, replicate, compare-m3, ks-test.
Flag values override ``--config`` file values, which override defaults.
Exit status: 0 on success, 2 on validation errors, 1 on runtime errors.
Errors are printed as a single line ``error: <code>: <detail>``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import exact_moments as em
from .config import RunConfig, read_kv
from .errors import IpsError, OutOfRange, ValidationError
from .estimator import estimate_all
from .experiments import export_summary, ks_two_sample, m3_comparison, read_sample, run_replications, write_sample
from .simulator import format_trajectory, read_trajectory, simulate, write_trajectory

DUMP_CHAIN_MAX_N = 6

_REQUIRED = {
    "simulate": ("n", "alpha", "pi_plus", "pi_minus"),
    "exact-moments": ("n", "alpha", "pi_plus", "pi_minus"),
    "estimate": ("n",),
    "replicate": ("n", "alpha", "pi_plus", "pi_minus"),
    "compare-m3": ("n", "alpha", "alpha_high", "pi_plus", "pi_minus"),
    "ks-test": (),
}


class UsageError(ValidationError):
    code = "UsageError"


class UnknownFlag(UsageError):
    code = "UnknownFlag"


class MissingRequired(UsageError):
    code = "MissingRequired"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        if "unrecognized arguments" in message or "invalid choice" in message:
            raise UnknownFlag(message)
        if "required" in message:
            raise MissingRequired(message)
        raise UsageError(message)


def fmt(x: float) -> str:
    return f"{x:.12g}"


def _model_flags(p: argparse.ArgumentParser, alpha_append: bool = False) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--n", type=int, default=S, help="number of vertices (>= 2)")
    if alpha_append:
        p.add_argument("--alpha", type=float, action="append", default=S,
                       help="vertex-update probability; give twice (low, high)")
    else:
        p.add_argument("--alpha", type=float, default=S, help="vertex-update probability in (0, 1)")
    p.add_argument("--pi-plus", dest="pi_plus", type=float, default=S, help="edge probability for ++ pairs")
    p.add_argument("--pi-minus", dest="pi_minus", type=float, default=S, help="edge probability for -- pairs")
    p.add_argument("--link", choices=["mean", "harmonic"], default=S, help="linking function (default mean)")


def _common_flags(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="key = value configuration file")
    p.add_argument("--seed", type=int, default=S, help="root random seed (default 0)")


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = _Parser(prog="ipsmom", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log one line per excluded run")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate", help="simulate a trajectory and write t,S[,N] CSV")
    _model_flags(p)
    _common_flags(p)
    p.add_argument("--k", type=int, default=S, help="number of recorded observations")
    p.add_argument("--burn-in", dest="burn_in", type=int, default=S, help="steps discarded before recording")
    p.add_argument("--p0", type=float, default=S, help="initial edge probability (default 0.5)")
    p.add_argument("--diagnostics", action="store_const", const=True, default=S, help="include the N column")
    p.add_argument("--out", default=S, help="output CSV path (default stdout)")

    p = sub.add_parser("exact-moments", help="print m1, m2, cross1, m3")
    _model_flags(p)
    _common_flags(p)
    p.add_argument("--dump-chain", dest="dump_chain", default=S,
                   help=f"write the transition matrix as row,col,value CSV (n <= {DUMP_CHAIN_MAX_N})")

    p = sub.add_parser("estimate", help="estimate (pi_plus, pi_minus, alpha) from a t,S CSV")
    p.add_argument("trajectory", nargs="?", default=S, help="trajectory CSV with header t,S")
    p.add_argument("--n", type=int, default=S, help="number of vertices")
    p.add_argument("--link", choices=["mean", "harmonic"], default=S, help="linking function (default mean)")
    p.add_argument("--grid-step", dest="grid_step", type=float, default=S, help="alpha grid step (default 0.02)")
    p.add_argument("--tol", type=float, default=S, help="stage-1 residual tolerance (default 1e-6)")
    p.add_argument("--csv", action="store_const", const=True, default=S,
                   help="print a CSV header and row instead of key = value lines")
    p.add_argument("--config", default=S, help="key = value configuration file")

    p = sub.add_parser("replicate", help="L independent simulate+estimate runs")
    _model_flags(p)
    _common_flags(p)
    p.add_argument("--k", type=int, default=S, help="observations per run")
    p.add_argument("--l", type=int, default=S, help="number of runs")
    p.add_argument("--burn-in", dest="burn_in", type=int, default=S, help="steps discarded per run")
    p.add_argument("--workers", type=int, default=S, help="worker processes (default 1)")
    p.add_argument("--out-dir", dest="out_dir", default=S, help="directory for runs/summary/histogram CSVs")

    p = sub.add_parser("compare-m3", help="M3 samples at two alpha values, with KS test")
    _model_flags(p, alpha_append=True)
    _common_flags(p)
    p.add_argument("--link-high", dest="link_high", choices=["mean", "harmonic"], default=S,
                   help="linking function for the second configuration (default: same as --link)")
    p.add_argument("--k", type=int, default=S, help="observations per run")
    p.add_argument("--l", type=int, default=S, help="runs per configuration")
    p.add_argument("--burn-in", dest="burn_in", type=int, default=S, help="steps discarded per run")
    p.add_argument("--workers", type=int, default=S, help="worker processes (default 1)")
    p.add_argument("--out-dir", dest="out_dir", default=S, help="directory for the two value-column samples")

    p = sub.add_parser("ks-test", help="two-sample Kolmogorov-Smirnov test on two value CSVs")
    p.add_argument("samples", nargs="*", default=S, help="two single-column CSVs with header 'value'")
    p.add_argument("--config", default=S, help="key = value configuration file")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    flags = dict(vars(args))
    command = flags.pop("command")
    flags.pop("verbose", None)
    config_path = flags.pop("config", None)
    if "trajectory" in flags:
        flags["inputs"] = [flags.pop("trajectory")]
    if "samples" in flags:
        flags["inputs"] = list(flags.pop("samples"))
    if isinstance(flags.get("alpha"), list):
        alphas = flags.pop("alpha")
        if len(alphas) > 2:
            raise UsageError("--alpha given more than twice")
        flags["alpha"] = alphas[0]
        if len(alphas) == 2:
            flags["alpha_high"] = alphas[1]

    cfg = RunConfig()
    if config_path is not None:
        raw = read_kv(config_path)
        from_file = RunConfig.from_mapping(raw)
        cfg = cfg.merged({k: getattr(from_file, k) for k in raw})
    cfg = cfg.merged(flags)
    cfg.command = command
    missing = [k for k in _REQUIRED[command] if getattr(cfg, k) is None]
    if missing:
        raise MissingRequired("missing " + ", ".join("--" + k.replace("_", "-") for k in missing))
    return cfg


def cmd_simulate(cfg: RunConfig, out) -> None:
    params = cfg.model_params()
    series = simulate(params, cfg.k, cfg.burn_in, cfg.seed, p0=cfg.p0)
    if cfg.out:
        write_trajectory(series, cfg.out, with_n=cfg.diagnostics)
    else:
        out.write(format_trajectory(series, with_n=cfg.diagnostics))


def cmd_exact_moments(cfg: RunConfig, out) -> None:
    params = cfg.model_params()
    if cfg.dump_chain and params.n > DUMP_CHAIN_MAX_N:
        raise OutOfRange("n", params.n, f"--dump-chain supports n <= {DUMP_CHAIN_MAX_N}")
    ms = em.moment_set(params)
    for key in ("m1", "m2", "cross1", "m3"):
        out.write(f"{key} = {fmt(getattr(ms, key))}\n")
    if cfg.dump_chain:
        chain = em.build_joint_chain(params)
        with open(cfg.dump_chain, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["row", "col", "value"])
            for r in range(chain.size):
                for c in range(chain.size):
                    w.writerow([r, c, fmt(chain.transition[r, c])])


def cmd_estimate(cfg: RunConfig, out) -> None:
    if len(cfg.inputs) != 1:
        raise MissingRequired("estimate needs exactly one trajectory CSV")
    if cfg.n < 2:
        raise OutOfRange("n", cfg.n, "n must be >= 2")
    series = read_trajectory(cfg.inputs[0])
    res = estimate_all(series, cfg.n, cfg.link, grid_step=cfg.grid_step, tol=cfg.tol)
    row = res.as_row()
    if cfg.csv:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(list(row))
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row.values()])
        return
    for key, value in row.items():
        out.write(f"{key} = {value if isinstance(value, str) else fmt(value)}\n")
    out.write(f"stage1_evals = {res.stage1_evals}\n")
    out.write(f"stage2_evals = {res.stage2_evals}\n")


def cmd_replicate(cfg: RunConfig, out) -> None:
    params = cfg.model_params()
    summary = run_replications(params, cfg.k, cfg.l, cfg.seed, cfg.burn_in, cfg.workers)
    for name, mean, var in summary.table():
        out.write(f"{name}_mean = {fmt(mean)}\n")
        out.write(f"{name}_variance = {fmt(var)}\n")
    out.write(f"runs = {cfg.l}\n")
    out.write(f"failed_runs = {summary.failed}\n")
    if cfg.out_dir:
        export_summary(summary, cfg.out_dir)


def cmd_compare_m3(cfg: RunConfig, out) -> None:
    low = cfg.model_params()
    high = cfg.model_params(alpha=cfg.alpha_high, link=cfg.link_high or cfg.link)
    cmp = m3_comparison(low, high, cfg.k, cfg.l, cfg.seed, cfg.burn_in, cfg.workers)
    for label, sample in (("low", cmp.low), ("high", cmp.high)):
        out.write(f"{label}_alpha = {fmt(sample.params.alpha)}\n")
        out.write(f"{label}_link = {sample.params.link.value}\n")
        out.write(f"{label}_m3_mean = {fmt(sample.mean)}\n")
        out.write(f"{label}_m3_variance = {fmt(sample.variance)}\n")
        out.write(f"{label}_m3_exact = {fmt(sample.exact)}\n")
    _write_ks(cmp.ks, out)
    if cfg.out_dir:
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
        write_sample(cmp.low.values, Path(cfg.out_dir) / "m3_low.csv")
        write_sample(cmp.high.values, Path(cfg.out_dir) / "m3_high.csv")


def _write_ks(ks, out) -> None:
    out.write(f"ks_d = {fmt(ks.d_statistic)}\n")
    out.write(f"ks_p_value = {fmt(ks.p_value)}\n")
    out.write(f"ks_n1 = {ks.n1}\n")
    out.write(f"ks_n2 = {ks.n2}\n")
    out.write(f"ks_reject_at_005 = {str(ks.reject_at_005).lower()}\n")


def cmd_ks_test(cfg: RunConfig, out) -> None:
    if len(cfg.inputs) != 2:
        raise MissingRequired("ks-test needs exactly two sample CSVs")
    _write_ks(ks_two_sample(read_sample(cfg.inputs[0]), read_sample(cfg.inputs[1])), out)


COMMANDS = {
    "simulate": cmd_simulate,
    "exact-moments": cmd_exact_moments,
    "estimate": cmd_estimate,
    "replicate": cmd_replicate,
    "compare-m3": cmd_compare_m3,
    "ks-test": cmd_ks_test,
}


def main(argv: list[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            logging.basicConfig(level=logging.INFO, format="%(message)s", stream=err)
        cfg = resolve_config(args)
        COMMANDS[cfg.command](cfg, out)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except ValidationError as exc:
        err.write(f"error: {exc.code}: {exc.detail}\n")
        return 2
    except IpsError as exc:
        err.write(f"error: {exc.code}: {exc.detail}\n")
        return 1
    except OSError as exc:
        err.write(f"error: IoFailure: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
