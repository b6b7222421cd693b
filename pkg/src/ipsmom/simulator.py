"""Discrete-time simulation of the coupled vertex/edge dynamics.

Each step either flips one uniformly chosen vertex (probability ``alpha``,
edges untouched) or redraws every edge slot independently given the current
vertex states (probability ``1 - alpha``, vertices untouched).

:func:`step` is the literal one-step move. :func:`simulate` produces the same
law in vectorised chunks: vertex states follow from cumulative flip parities
and the edge count at any time equals the count drawn at the most recent
resampling step.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IoFailure, OutOfRange, SeriesTooShort
from .model import ModelParams, SystemState, slot_probabilities

RandomSource = np.random.Generator

# rows per vectorised chunk are capped so that chunk * max(n, C(n,2)) stays near this
_CHUNK_CELLS = 1 << 22


def make_rng(seed: int | None) -> RandomSource:
    return np.random.default_rng(seed)


def derived_seed(root: int, *key: int) -> np.random.SeedSequence:
    """Independent child stream for replication ``key`` under ``root``.

    Depends only on ``(root, key)``, never on the order in which streams are
    requested.
    """
    return np.random.SeedSequence(int(root), spawn_key=tuple(int(k) for k in key))


def derived_rng(root: int, *key: int) -> RandomSource:
    return np.random.default_rng(derived_seed(root, *key))


def default_burn_in(n: int, alpha: float) -> int:
    return math.ceil(10 * n * math.log(n + 1) / alpha)


@dataclass(frozen=True, eq=False)
class ObservationSeries:
    s: np.ndarray
    n_plus: np.ndarray | None = None
    seed_record: int | None = None

    def __post_init__(self):
        s = np.asarray(self.s, dtype=np.int64)
        if s.ndim != 1:
            raise OutOfRange("s", s.shape, "edge-count series must be one-dimensional")
        if np.any(s < 0):
            raise OutOfRange("s", int(s.min()), "edge counts must be non-negative")
        object.__setattr__(self, "s", s)
        if self.n_plus is not None:
            n_plus = np.asarray(self.n_plus, dtype=np.int64)
            if n_plus.shape != s.shape:
                raise OutOfRange("n_plus", n_plus.shape, "N(t) series must match S(t) in length")
            object.__setattr__(self, "n_plus", n_plus)

    @property
    def k(self) -> int:
        return int(self.s.size)

    def __len__(self):
        return self.k

    def __eq__(self, other):
        if not isinstance(other, ObservationSeries):
            return NotImplemented
        same_n = (self.n_plus is None and other.n_plus is None) or (
            self.n_plus is not None and other.n_plus is not None
            and np.array_equal(self.n_plus, other.n_plus))
        return np.array_equal(self.s, other.s) and same_n


def count_edges(state: SystemState) -> int:
    return state.edge_count


def init_state(params: ModelParams, p0: float, rng: RandomSource) -> SystemState:
    """Erdős–Rényi(p0) edges; the lowest ceil(n/2) indices start plus."""
    if not (0.0 <= p0 <= 1.0):
        raise OutOfRange("p0", p0, f"p0={p0!r} must lie in [0, 1]")
    n = params.n
    states = np.zeros(n, dtype=bool)
    states[: (n + 1) // 2] = True
    edges = rng.random(params.m) < p0
    return SystemState(states, edges)


def step(state: SystemState, params: ModelParams, rng: RandomSource) -> SystemState:
    if rng.random() < params.alpha:
        states = state.states.copy()
        v = rng.integers(state.n)
        states[v] = not states[v]
        return SystemState(states, state.edges)
    probs = slot_probabilities(state.states, params)
    return SystemState(state.states, rng.random(probs.size) < probs)


def _advance(states: np.ndarray, edges: np.ndarray, s_now: int, params: ModelParams,
             steps: int, rng: RandomSource, record: bool):
    """Run ``steps`` moves from (states, edges); optionally return per-step S and N.

    Returns ``(states, edges, s_now, s_trace, n_trace)``.
    """
    n, m = params.n, params.m
    chunk = max(1, _CHUNK_CELLS // max(n, m, 1))
    s_parts, n_parts = [], []
    done = 0
    while done < steps:
        size = min(chunk, steps - done)
        vertex_move = rng.random(size) < params.alpha
        vertex_times = np.flatnonzero(vertex_move)
        flipped = rng.integers(n, size=vertex_times.size)

        flips = np.zeros((size, n), dtype=np.uint8)
        flips[vertex_times, flipped] = 1
        # state after each step of the chunk
        traj = (np.cumsum(flips, axis=0, dtype=np.int64) & 1).astype(bool) ^ states

        edge_times = np.flatnonzero(~vertex_move)
        if edge_times.size:
            probs = slot_probabilities(traj[edge_times], params)
            drawn = rng.random(probs.shape) < probs
            drawn_counts = drawn.sum(axis=1)
            edges = drawn[-1]
        else:
            drawn_counts = np.zeros(0, dtype=np.int64)

        if record:
            # S(t) = count from the last resample at or before t, else carried in
            last = np.full(size, -1, dtype=np.int64)
            last[edge_times] = np.arange(edge_times.size)
            last = np.maximum.accumulate(last)
            seq = np.where(last >= 0, drawn_counts[np.maximum(last, 0)] if drawn_counts.size else s_now, s_now)
            s_parts.append(seq.astype(np.int64))
            n_parts.append(traj.sum(axis=1, dtype=np.int64))

        if drawn_counts.size:
            s_now = int(drawn_counts[-1])
        states = traj[-1].copy()
        done += size

    if record:
        s_trace = np.concatenate(s_parts) if s_parts else np.zeros(0, dtype=np.int64)
        n_trace = np.concatenate(n_parts) if n_parts else np.zeros(0, dtype=np.int64)
        return states, edges, s_now, s_trace, n_trace
    return states, edges, s_now, None, None


def run(state: SystemState, params: ModelParams, steps: int, rng: RandomSource):
    """Advance ``state`` by ``steps`` moves; return the final state and the S, N traces."""
    states, edges, _, s_trace, n_trace = _advance(
        state.states.copy(), state.edges.copy(), state.edge_count, params, steps, rng, record=True)
    return SystemState(states, edges), s_trace, n_trace


def simulate(params: ModelParams, k_obs: int, burn_in: int | None = None,
             rng: RandomSource | int | None = None, p0: float = 0.5,
             seed_record: int | None = None) -> ObservationSeries:
    """Record ``k_obs`` edge counts after discarding ``burn_in`` steps.

    ``burn_in=None`` uses :func:`default_burn_in`. ``rng`` may be a generator
    or an integer seed (which is then echoed in ``seed_record``).
    """
    if k_obs < 1:
        raise SeriesTooShort(f"k_obs={k_obs} must be at least 1")
    if burn_in is None:
        burn_in = default_burn_in(params.n, params.alpha)
    if burn_in < 0:
        raise OutOfRange("burn_in", burn_in, "burn_in must be non-negative")
    if rng is None or isinstance(rng, (int, np.integer)):
        seed_record = int(rng) if rng is not None else seed_record
        rng = make_rng(rng)
    start = init_state(params, p0, rng)
    states, edges, s_now, _, _ = _advance(
        start.states.copy(), start.edges.copy(), start.edge_count, params, burn_in, rng, record=False)
    _, _, _, s_trace, n_trace = _advance(states, edges, s_now, params, k_obs, rng, record=True)
    return ObservationSeries(s_trace, n_trace, seed_record)


def write_trajectory(series: ObservationSeries, path, with_n: bool = False) -> None:
    """CSV with header ``t,S`` (or ``t,S,N``); t starts at 1."""
    if with_n and series.n_plus is None:
        raise OutOfRange("n_plus", None, "series has no N(t) record")
    try:
        with open(path, "w", newline="") as fh:
            _write_rows(fh, series, with_n)
    except OSError as exc:
        raise IoFailure(f"{path}: {exc.strerror or exc}") from exc


def format_trajectory(series: ObservationSeries, with_n: bool = False) -> str:
    import io

    buf = io.StringIO()
    _write_rows(buf, series, with_n)
    return buf.getvalue()


def _write_rows(fh, series: ObservationSeries, with_n: bool) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    if with_n:
        writer.writerow(["t", "S", "N"])
        writer.writerows(zip(range(1, series.k + 1), series.s.tolist(), series.n_plus.tolist()))
    else:
        writer.writerow(["t", "S"])
        writer.writerows(zip(range(1, series.k + 1), series.s.tolist()))


def read_trajectory(path) -> ObservationSeries:
    try:
        with open(Path(path), newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "S" not in reader.fieldnames:
                raise OutOfRange("header", reader.fieldnames, f"{path}: expected a 't,S[,N]' header")
            rows = list(reader)
    except OSError as exc:
        raise IoFailure(f"{path}: {exc.strerror or exc}") from exc
    try:
        s = [int(r["S"]) for r in rows]
        n_plus = [int(r["N"]) for r in rows] if "N" in reader.fieldnames else None
    except (TypeError, ValueError) as exc:
        raise OutOfRange("S", None, f"{path}: non-integer entry ({exc})") from exc
    return ObservationSeries(np.array(s, dtype=np.int64), None if n_plus is None else np.array(n_plus))
