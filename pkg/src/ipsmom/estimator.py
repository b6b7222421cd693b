"""Method-of-moments inversion from an edge-count series.

Stage 1 matches E[S] and E[S^2] (closed forms, free of ``alpha``) to their
empirical counterparts and solves for the edge probabilities. Stage 2 plugs
those into E[(S(t+1)-S(t))^2], which depends on ``alpha`` through the joint
chain, and solves for ``alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import exact_moments as em
from .errors import NoConvergence, SeriesTooShort
from .model import Link, ModelParams
from .simulator import ObservationSeries

BOUNDARY_HIT = "BoundaryHit"
MULTIPLE_ROOTS = "MultipleRoots"
NO_BRACKET = "NoBracket"

STAGE1_GRID_STEP = 0.02
STAGE1_TOL = 1e-6
STAGE2_GRID_STEP = 0.02
STAGE2_WIDTH = 1e-5
ALPHA_LO, ALPHA_HI = 0.01, 0.99
_INV_PHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class EmpiricalMoments:
    m1k: float
    m2k: float
    m3k: float
    k: int


def empirical_moments(series: ObservationSeries | np.ndarray) -> EmpiricalMoments:
    s = series.s if isinstance(series, ObservationSeries) else np.asarray(series)
    if s.size < 2:
        raise SeriesTooShort(f"need at least 2 observations, got {s.size}")
    s = s.astype(np.float64)
    return EmpiricalMoments(
        m1k=float(s.mean()),
        m2k=float(np.mean(s * s)),
        m3k=float(np.mean(np.diff(s) ** 2)),
        k=int(s.size),
    )


@dataclass
class EdgeProbEstimate:
    pi_plus_hat: float
    pi_minus_hat: float
    residual: float
    evals: int
    flags: list[str] = field(default_factory=list)


@dataclass
class AlphaEstimate:
    alpha_hat: float
    residual: float
    evals: int
    flags: list[str] = field(default_factory=list)
    bracket: tuple[float, float] | None = None


@dataclass
class EstimationResult:
    pi_plus_hat: float
    pi_minus_hat: float
    alpha_hat: float
    residual_stage1: float
    residual_stage2: float
    stage1_evals: int
    stage2_evals: int
    flags: list[str] = field(default_factory=list)
    moments: EmpiricalMoments | None = None

    def as_row(self) -> dict:
        return {
            "pi_plus_hat": self.pi_plus_hat,
            "pi_minus_hat": self.pi_minus_hat,
            "alpha_hat": self.alpha_hat,
            "residual1": self.residual_stage1,
            "residual2": self.residual_stage2,
            "flags": "|".join(self.flags),
        }


def _grid(step: float, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    count = int(round((hi - lo) / step))
    return np.linspace(lo, hi, count + 1)


def stage1_objective(n: int, link: Link | str, m1k: float, m2k: float):
    """Scaled squared residual of the two closed-form moment equations.

    Accepts array-valued probabilities. The swap symmetry of both linking
    functions means the value is unchanged under exchanging the arguments.
    """
    c1 = float(math.comb(n, 2))
    c2 = c1 * c1

    def objective(pi_plus, pi_minus):
        m1, m2 = em.closed_form_moments(n, pi_plus, pi_minus, link)
        return ((m1 - m1k) / c1) ** 2 + ((m2 - m2k) / c2) ** 2

    return objective


def estimate_edge_probs(m1k: float, m2k: float, n: int, link: Link | str,
                        grid_step: float = STAGE1_GRID_STEP,
                        tol: float = STAGE1_TOL) -> EdgeProbEstimate:
    """Solve E[S] = m1k, E[S^2] = m2k over 0 <= pi_minus <= pi_plus <= 1."""
    link = Link.parse(link)
    objective = stage1_objective(n, link, m1k, m2k)

    grid = _grid(grid_step)
    pp, pm = np.meshgrid(grid, grid, indexing="ij")
    inside = pp >= pm
    values = np.where(inside, objective(pp, pm), np.inf)
    evals = int(inside.sum())

    flags: list[str] = []
    near = inside & (values <= tol)
    if near.sum() > 1:
        if np.ptp(pp[near]) > 0.05 or np.ptp(pm[near]) > 0.05:
            flags.append(MULTIPLE_ROOTS)

    # several well-separated low cells are refined and the best endpoint kept;
    # the objective is swap-symmetric, so searching the square and sorting afterwards
    # yields the minimiser on the triangle
    best_x, best_f = None, math.inf
    for start in _spread_starts(values, pp, pm):
        res = minimize(
            lambda x: float(objective(x[0], x[1])),
            start,
            method="Nelder-Mead",
            bounds=[(0.0, 1.0), (0.0, 1.0)],
            options={"xatol": 1e-12, "fatol": 1e-24, "maxfev": 5000, "initial_simplex":
                     _initial_simplex(start, grid_step)},
        )
        evals += int(res.nfev)
        if res.fun < best_f:
            best_x, best_f = res.x, float(res.fun)
    hi, lo = sorted((float(best_x[0]), float(best_x[1])), reverse=True)
    residual = float(objective(hi, lo))
    if residual > tol:
        raise NoConvergence(
            f"stage 1 residual {residual:.3g} above tolerance {tol:g} "
            f"(m1k={m1k:.6g}, m2k={m2k:.6g})")
    if min(hi, lo) <= 0.0 or max(hi, lo) >= 1.0:
        flags.append(BOUNDARY_HIT)
    return EdgeProbEstimate(hi, lo, residual, evals, flags)


def _spread_starts(values: np.ndarray, pp: np.ndarray, pm: np.ndarray, limit: int = 8,
                   pool: int = 60, spacing: float = 0.05) -> list:
    """Lowest grid cells, skipping any within ``spacing`` of one already chosen.

    The m1 equation cuts a narrow valley through the grid, and the lowest cell
    on it need not sit in the basin of the true root, so several points along
    the valley are refined.
    """
    flat = values.ravel()
    order = np.argsort(flat, kind="stable")[:pool]
    chosen: list[np.ndarray] = []
    for i in order:
        if not np.isfinite(flat[i]):
            break
        point = np.array([pp.ravel()[i], pm.ravel()[i]])
        if all(np.max(np.abs(point - c)) > spacing for c in chosen):
            chosen.append(point)
            if len(chosen) == limit:
                break
    return chosen


def _initial_simplex(start: np.ndarray, step: float) -> np.ndarray:
    simplex = np.array([start, start, start], dtype=float)
    for j in range(2):
        shift = step if start[j] + step <= 1.0 else -step
        simplex[j + 1, j] += shift
    return simplex


class IncrementCurve:
    """g(alpha) = E[(S(t+1)-S(t))^2] at fixed edge probabilities.

    Transition parts are built once; each evaluation solves a fresh
    stationary distribution.
    """

    def __init__(self, n: int, pi_plus: float, pi_minus: float, link: Link | str):
        self.params = ModelParams(n, 0.5, pi_plus, pi_minus, Link.parse(link)) \
            if pi_plus >= pi_minus else ModelParams(n, 0.5, pi_minus, pi_plus, Link.parse(link))
        em.check_irreducible(self.params)
        self._vertex, self._resample = em._chain_parts(
            n, self.params.pi_plus, self.params.pi_minus, self.params.link)
        self.m2 = em.second_moment_S(self.params)
        self.ell = np.tile(np.arange(self.params.m + 1, dtype=float), n + 1)
        self.evals = 0

    def __call__(self, alpha: float) -> float:
        self.evals += 1
        transition = alpha * self._vertex + (1 - alpha) * self._resample
        pi, _ = em.power_stationary(transition)
        cross1 = (pi * self.ell) @ (transition @ self.ell)
        return float(2.0 * self.m2 - 2.0 * cross1)


def golden_section(func, lo: float, hi: float, width: float = STAGE2_WIDTH):
    """Minimise a unimodal ``func`` on [lo, hi] until the bracket is narrower than ``width``."""
    x1 = hi - _INV_PHI * (hi - lo)
    x2 = lo + _INV_PHI * (hi - lo)
    f1, f2 = func(x1), func(x2)
    while hi - lo > width:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _INV_PHI * (hi - lo)
            f1 = func(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _INV_PHI * (hi - lo)
            f2 = func(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def estimate_alpha(m3k: float, pi_plus_hat: float, pi_minus_hat: float, n: int,
                   link: Link | str, grid_step: float = STAGE2_GRID_STEP,
                   width: float = STAGE2_WIDTH) -> AlphaEstimate:
    """Solve g(alpha) = m3k on a coarse grid, then golden-section refine.

    Does not assume g is monotone. If m3k lies outside the range of g over the
    grid, the best boundary grid point is returned with NoBracket and
    BoundaryHit set.
    """
    curve = IncrementCurve(n, pi_plus_hat, pi_minus_hat, link)
    alphas = _grid(grid_step, ALPHA_LO, ALPHA_HI)
    g = np.array([curve(a) for a in alphas])
    gap = np.abs(g - m3k)
    best = int(np.argmin(gap))
    flags: list[str] = []

    if m3k < g.min() or m3k > g.max():
        flags += [NO_BRACKET, BOUNDARY_HIT]
        return AlphaEstimate(float(alphas[best]), float(gap[best]), curve.evals, flags)

    crossings = np.flatnonzero(np.diff(np.sign(g - m3k)) != 0)
    if crossings.size > 1 and np.ptp(alphas[crossings]) > 2 * grid_step:
        flags.append(MULTIPLE_ROOTS)

    lo = float(alphas[max(best - 1, 0)])
    hi = float(alphas[min(best + 1, alphas.size - 1)])
    alpha_hat, residual = golden_section(lambda a: abs(curve(a) - m3k), lo, hi, width)
    if residual > gap[best]:
        alpha_hat, residual = float(alphas[best]), float(gap[best])
    if best in (0, alphas.size - 1) and abs(alpha_hat - alphas[best]) < grid_step / 2:
        flags.append(BOUNDARY_HIT)
    return AlphaEstimate(float(alpha_hat), float(residual), curve.evals, flags, (lo, hi))


def estimate_all(series: ObservationSeries | EmpiricalMoments, n: int, link: Link | str,
                 grid_step: float = STAGE2_GRID_STEP, tol: float = STAGE1_TOL,
                 stage1_grid_step: float = STAGE1_GRID_STEP) -> EstimationResult:
    moments = series if isinstance(series, EmpiricalMoments) else empirical_moments(series)
    stage1 = estimate_edge_probs(moments.m1k, moments.m2k, n, link, stage1_grid_step, tol)
    stage2 = estimate_alpha(moments.m3k, stage1.pi_plus_hat, stage1.pi_minus_hat, n, link, grid_step)
    flags = list(dict.fromkeys(stage1.flags + stage2.flags))
    return EstimationResult(
        pi_plus_hat=stage1.pi_plus_hat,
        pi_minus_hat=stage1.pi_minus_hat,
        alpha_hat=stage2.alpha_hat,
        residual_stage1=stage1.residual,
        residual_stage2=stage2.residual,
        stage1_evals=stage1.evals,
        stage2_evals=stage2.evals,
        flags=flags,
        moments=moments,
    )


def exact_moments_for(params: ModelParams) -> EmpiricalMoments:
    """Noise-free 'empirical' moments, for round-trip checks."""
    ms = em.moment_set(params)
    return EmpiricalMoments(ms.m1, ms.m2, ms.m3, k=0)
