"""Replication harness: repeated simulate-and-estimate runs, M3 comparisons, KS test.

Every run draws from its own stream derived from ``(root_seed, run index)``,
so summaries do not depend on worker count or completion order.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import exact_moments as em
from .errors import EmptySample, IoFailure, IpsError
from .estimator import EstimationResult, empirical_moments, estimate_all
from .model import ModelParams
from .simulator import derived_rng, simulate

log = logging.getLogger(__name__)

PARAMETERS = ("pi_plus", "pi_minus", "alpha")
HIST_BINS = 50


@dataclass
class RunRecord:
    run: int
    pi_plus_hat: float = math.nan
    pi_minus_hat: float = math.nan
    alpha_hat: float = math.nan
    flags: list[str] = field(default_factory=list)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class ReplicationSummary:
    true_params: ModelParams | None
    k_obs: int
    l_runs: int
    root_seed: int
    runs: list[RunRecord]

    @property
    def good_runs(self) -> list[RunRecord]:
        return [r for r in self.runs if r.ok]

    @property
    def failed(self) -> int:
        return sum(not r.ok for r in self.runs)

    def estimates(self, parameter: str) -> np.ndarray:
        return np.array([getattr(r, f"{parameter}_hat") for r in self.good_runs], dtype=float)

    def mean(self, parameter: str) -> float:
        return float(np.mean(self.estimates(parameter)))

    def variance(self, parameter: str) -> float:
        """Sample variance with divisor L - 1."""
        return sample_variance(self.estimates(parameter))

    def table(self) -> list[tuple[str, float, float]]:
        return [(p, self.mean(p), self.variance(p)) for p in PARAMETERS]


def sample_variance(values) -> float:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return math.nan
    centred = values - values.mean()
    return float(centred @ centred / (values.size - 1))


def _one_run(args) -> RunRecord:
    params, k_obs, burn_in, root_seed, run = args
    rng = derived_rng(root_seed, run)
    series = simulate(params, k_obs, burn_in, rng)
    try:
        res: EstimationResult = estimate_all(series, params.n, params.link)
    except IpsError as exc:
        return RunRecord(run, error=f"{exc.code}: {exc.detail}")
    return RunRecord(run, res.pi_plus_hat, res.pi_minus_hat, res.alpha_hat, list(res.flags))


def _map(func, jobs, workers: int):
    if workers <= 1:
        return [func(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def run_replications(true_params: ModelParams, k_obs: int, l_runs: int, root_seed: int,
                     burn_in: int | None = None, workers: int = 1) -> ReplicationSummary:
    if l_runs < 2:
        raise ValueError("need at least two replications")
    jobs = [(true_params, k_obs, burn_in, root_seed, r) for r in range(l_runs)]
    runs = _map(_one_run, jobs, workers)
    for rec in runs:
        if not rec.ok:
            log.info("run %d excluded: %s", rec.run, rec.error)
    return ReplicationSummary(true_params, k_obs, l_runs, root_seed, runs)


def _m3_run(args) -> float:
    params, k_obs, burn_in, root_seed, key = args
    series = simulate(params, k_obs, burn_in, derived_rng(root_seed, *key))
    return empirical_moments(series).m3k


def m3_samples(params: ModelParams, k_obs: int, l_runs: int, root_seed: int,
               stream: int = 0, burn_in: int | None = None, workers: int = 1) -> np.ndarray:
    """L independent values of the empirical squared-increment moment."""
    jobs = [(params, k_obs, burn_in, root_seed, (stream, r)) for r in range(l_runs)]
    return np.array(_map(_m3_run, jobs, workers), dtype=float)


@dataclass
class M3Sample:
    params: ModelParams
    values: np.ndarray
    exact: float

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def variance(self) -> float:
        return sample_variance(self.values)

    @property
    def std_error(self) -> float:
        return math.sqrt(self.variance / self.values.size)


@dataclass
class M3Comparison:
    low: M3Sample
    high: M3Sample
    ks: "KsResult"


def m3_comparison(params_low: ModelParams, params_high: ModelParams, k_obs: int, l_runs: int,
                  root_seed: int, burn_in: int | None = None, workers: int = 1) -> M3Comparison:
    samples = []
    for stream, params in enumerate((params_low, params_high)):
        values = m3_samples(params, k_obs, l_runs, root_seed, stream, burn_in, workers)
        samples.append(M3Sample(params, values, em.expected_squared_increment(params)))
    return M3Comparison(samples[0], samples[1], ks_two_sample(samples[0].values, samples[1].values))


@dataclass(frozen=True)
class KsResult:
    d_statistic: float
    p_value: float
    n1: int
    n2: int

    @property
    def reject_at_005(self) -> bool:
        return self.p_value < 0.05


def kolmogorov_sf(lam: float, term_tol: float = 1e-10) -> float:
    """Asymptotic P(K > lam) = 2 sum_{j>=1} (-1)^(j-1) exp(-2 j^2 lam^2)."""
    if lam <= 0.0:
        return 1.0
    total = 0.0
    j = 1
    while True:
        term = math.exp(-2.0 * j * j * lam * lam)
        total += term if j % 2 else -term
        if term < term_tol:
            break
        j += 1
    return min(1.0, max(0.0, 2.0 * total))


def ks_two_sample(a, b) -> KsResult:
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    n1, n2 = a.size, b.size
    if n1 == 0 or n2 == 0:
        raise EmptySample("both samples must be non-empty")

    # merge-scan over the pooled order; ties advance both sides together
    i = j = 0
    d = 0.0
    while i < n1 and j < n2:
        x = min(a[i], b[j])
        while i < n1 and a[i] == x:
            i += 1
        while j < n2 and b[j] == x:
            j += 1
        d = max(d, abs(i / n1 - j / n2))

    ne = n1 * n2 / (n1 + n2)
    lam = (math.sqrt(ne) + 0.12 + 0.11 / math.sqrt(ne)) * d
    return KsResult(float(d), kolmogorov_sf(lam), n1, n2)


def histogram(values, bins: int = HIST_BINS):
    """Equal-width bin counts over the observed range."""
    values = np.asarray(values, dtype=float)
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return counts, edges


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def export_summary(summary: ReplicationSummary, out_dir, prefix: str = "") -> dict[str, Path]:
    """Write ``runs.csv``, ``summary.csv`` and ``histogram.csv`` under ``out_dir``."""
    out_dir = Path(out_dir)
    paths = {name: out_dir / f"{prefix}{name}.csv" for name in ("runs", "summary", "histogram")}
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(paths["runs"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["run", "pi_plus_hat", "pi_minus_hat", "alpha_hat", "flags"])
            for r in summary.runs:
                flags = r.flags + ([r.error.split(":")[0]] if r.error else [])
                # shortest round-trip repr keeps re-imported statistics identical
                w.writerow([r.run, repr(r.pi_plus_hat), repr(r.pi_minus_hat), repr(r.alpha_hat),
                            "|".join(flags)])
        with open(paths["summary"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["parameter", "mean", "variance"])
            for name, mean, var in summary.table():
                w.writerow([name, _fmt(mean), _fmt(var)])
        with open(paths["histogram"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["parameter", "bin", "left", "right", "count"])
            for name in PARAMETERS:
                values = summary.estimates(name)
                if values.size == 0:
                    continue
                counts, edges = histogram(values)
                for k, c in enumerate(counts):
                    w.writerow([name, k, _fmt(edges[k]), _fmt(edges[k + 1]), int(c)])
    except OSError as exc:
        raise IoFailure(f"{out_dir}: {exc.strerror or exc}") from exc
    return paths


def load_runs(path) -> ReplicationSummary:
    """Rebuild a summary from an exported ``runs.csv`` (flagged failures kept as errors)."""
    runs = []
    try:
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                flags = [f for f in row["flags"].split("|") if f]
                rec = RunRecord(int(row["run"]), float(row["pi_plus_hat"]),
                                float(row["pi_minus_hat"]), float(row["alpha_hat"]), flags)
                if math.isnan(rec.alpha_hat):
                    rec.error = flags[-1] if flags else "Failed"
                    rec.flags = flags[:-1]
                runs.append(rec)
    except OSError as exc:
        raise IoFailure(f"{path}: {exc.strerror or exc}") from exc
    return ReplicationSummary(None, 0, len(runs), 0, runs)


def write_sample(values, path) -> None:
    """Single-column CSV with header ``value``."""
    try:
        with open(path, "w", newline="") as fh:
            fh.write("value\n")
            for v in values:
                fh.write(_fmt(float(v)) + "\n")
    except OSError as exc:
        raise IoFailure(f"{path}: {exc.strerror or exc}") from exc


def read_sample(path) -> np.ndarray:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["value"]:
                raise EmptySample(f"{path}: expected a single 'value' column")
            return np.array([float(r["value"]) for r in reader], dtype=float)
    except OSError as exc:
        raise IoFailure(f"{path}: {exc.strerror or exc}") from exc
