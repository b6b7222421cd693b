"""Stationary moments of the edge-count process.

Closed forms (no dependence on ``alpha``) give E[S] and E[S^2]. Lag moments
need the joint Markov chain on (number of plus vertices, number of edges),
whose transition matrix is::

    alpha * V + (1 - alpha) * R

with ``V`` the vertex-flip move (edge count kept) and ``R`` the resampling move
(plus-count kept, edge count redrawn from the law given the plus-count).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.stats import binom

from .errors import ChainTooLarge, ReducibleChain
from .model import Link, ModelParams, link_value

MAX_CHAIN_N = 20
STATIONARY_TOL = 1e-12
STATIONARY_MAX_ITER = 1_000_000


def comb2(a):
    """C(a, 2) with C(a, 2) = 0 for a < 2; elementwise on arrays."""
    a = np.asarray(a)
    return np.where(a >= 2, a * (a - 1) // 2, 0) if a.ndim else (int(a) * (int(a) - 1) // 2 if a >= 2 else 0)


def vertex_stationary(n: int) -> np.ndarray:
    """P(N = k) = C(n, k) / 2^n for k = 0..n."""
    return np.array([math.comb(n, k) for k in range(n + 1)], dtype=float) / 2.0 ** n


def _class_sizes(n: int):
    k = np.arange(n + 1)
    return comb2(k).astype(float), comb2(n - k).astype(float), (k * (n - k)).astype(float)


def closed_form_moments(n: int, pi_plus, pi_minus, link: Link | str):
    """(E[S], E[S^2]) from the closed forms; broadcasts over array-valued probabilities."""
    pp = np.asarray(pi_plus, dtype=float)[..., None]
    pm = np.asarray(pi_minus, dtype=float)[..., None]
    f = np.asarray(link_value(link, np.asarray(pi_plus, dtype=float),
                              np.asarray(pi_minus, dtype=float)), dtype=float)[..., None]
    plus_pairs, minus_pairs, mixed_pairs = _class_sizes(n)
    weights = vertex_stationary(n)

    mean_given_k = plus_pairs * pp + minus_pairs * pm + mixed_pairs * f
    e1 = plus_pairs * pp * ((plus_pairs - 1) * pp + minus_pairs * pm + mixed_pairs * f)
    e2 = minus_pairs * pm * (plus_pairs * pp + (minus_pairs - 1) * pm + mixed_pairs * f)
    e3 = mixed_pairs * f * (plus_pairs * pp + minus_pairs * pm + (mixed_pairs - 1) * f)

    m1 = (mean_given_k * weights).sum(axis=-1)
    m2 = m1 + ((e1 + e2 + e3) * weights).sum(axis=-1)
    if m1.ndim == 0:
        return float(m1), float(m2)
    return m1, m2


def expected_edges_given_k(k: int, params: ModelParams) -> float:
    n = params.n
    return (comb2(k) * params.pi_plus + comb2(n - k) * params.pi_minus
            + k * (n - k) * params.f)


def mean_S(params: ModelParams) -> float:
    return closed_form_moments(params.n, params.pi_plus, params.pi_minus, params.link)[0]


def second_moment_S(params: ModelParams) -> float:
    return closed_form_moments(params.n, params.pi_plus, params.pi_minus, params.link)[1]


def _binom_pmf(trials: int, p: float) -> np.ndarray:
    return binom.pmf(np.arange(trials + 1), trials, p)


def _edge_law(n: int, i: int, pi_plus: float, pi_minus: float, f: float) -> np.ndarray:
    law = np.convolve(_binom_pmf(comb2(i), pi_plus), _binom_pmf(comb2(n - i), pi_minus))
    return np.convolve(law, _binom_pmf(i * (n - i), f))


def edge_count_law_given_i(i: int, params: ModelParams) -> np.ndarray:
    """Law of the edge count right after a resample with ``i`` plus vertices.

    Convolution of three binomials (++, --, mixed slots); length C(n,2) + 1.
    """
    if not 0 <= i <= params.n:
        raise ValueError(f"i={i} outside [0, {params.n}]")
    return _edge_law(params.n, i, params.pi_plus, params.pi_minus, params.f)


@lru_cache(maxsize=64)
def _chain_parts(n: int, pi_plus: float, pi_minus: float, link: Link):
    if n > MAX_CHAIN_N:
        raise ChainTooLarge(f"joint chain limited to n <= {MAX_CHAIN_N} (got n={n})")
    m = math.comb(n, 2)
    width = m + 1
    size = (n + 1) * width
    f = float(link_value(link, pi_plus, pi_minus))
    vertex = np.zeros((size, size))
    resample = np.zeros((size, size))
    ks = np.arange(width)
    for i in range(n + 1):
        rows = i * width + ks
        if i < n:
            vertex[rows, (i + 1) * width + ks] = (n - i) / n
        if i > 0:
            vertex[rows, (i - 1) * width + ks] = i / n
        resample[rows, i * width:(i + 1) * width] = _edge_law(n, i, pi_plus, pi_minus, f)
    vertex.flags.writeable = False
    resample.flags.writeable = False
    return vertex, resample


class JointChain:
    """Transition matrix of (N, S), states ordered lexicographically by (i, k)."""

    def __init__(self, params: ModelParams):
        self.params = params
        self.n = params.n
        self.m = params.m
        vertex, resample = _chain_parts(params.n, params.pi_plus, params.pi_minus, params.link)
        self.transition = params.alpha * vertex + (1 - params.alpha) * resample
        self.transition.flags.writeable = False
        self._stationary = None
        self.iterations = None

    @property
    def size(self) -> int:
        return (self.n + 1) * (self.m + 1)

    def index(self, i: int, k: int) -> int:
        return i * (self.m + 1) + k

    @property
    def edge_counts(self) -> np.ndarray:
        """Edge count attached to each state, aligned with matrix rows."""
        return np.tile(np.arange(self.m + 1, dtype=float), self.n + 1)

    @property
    def plus_counts(self) -> np.ndarray:
        return np.repeat(np.arange(self.n + 1), self.m + 1)

    @property
    def stationary(self) -> np.ndarray:
        if self._stationary is None:
            self._stationary = stationary_joint(self)
        return self._stationary

    def as_grid(self, vector: np.ndarray) -> np.ndarray:
        """Reshape a state-indexed vector to an (n+1, m+1) array."""
        return np.asarray(vector).reshape(self.n + 1, self.m + 1)


def build_joint_chain(params: ModelParams) -> JointChain:
    return JointChain(params)


def check_irreducible(params: ModelParams) -> None:
    for name, value in (("pi_plus", params.pi_plus), ("pi_minus", params.pi_minus), ("f", params.f)):
        if not 0.0 < value < 1.0:
            raise ReducibleChain(f"{name}={value!r}: edge probabilities must lie strictly inside (0, 1)")


def power_stationary(matrix: np.ndarray, tol: float = STATIONARY_TOL,
                     max_iter: int = STATIONARY_MAX_ITER) -> tuple[np.ndarray, int]:
    """Left fixed point of a row-stochastic matrix by power iteration.

    Starts from the uniform vector and stops once ``max|x P - x| < tol``.
    Falls back to a direct solve of the normalised fixed-point system when
    the iteration cap is hit (then the returned count equals ``max_iter``).
    """
    size = matrix.shape[0]
    x = np.full(size, 1.0 / size)
    for it in range(1, max_iter + 1):
        y = x @ matrix
        y /= y.sum()
        if np.max(np.abs(y - x)) < tol:
            return y, it
        x = y
    system = np.vstack([matrix.T - np.eye(size), np.ones(size)])
    rhs = np.zeros(size + 1)
    rhs[-1] = 1.0
    x = np.linalg.lstsq(system, rhs, rcond=None)[0]
    x = np.clip(x, 0.0, None)
    return x / x.sum(), max_iter


def stationary_joint(chain: JointChain) -> np.ndarray:
    check_irreducible(chain.params)
    pi, iterations = power_stationary(chain.transition)
    chain.iterations = iterations
    pi.flags.writeable = False
    return pi


def _stationary_of(params_or_chain) -> JointChain:
    if isinstance(params_or_chain, JointChain):
        return params_or_chain
    return build_joint_chain(params_or_chain)


def cross_moment_lag1(params: ModelParams | JointChain) -> float:
    """E[S(t) S(t+1)] at stationarity."""
    chain = _stationary_of(params)
    ell = chain.edge_counts
    return float((chain.stationary * ell) @ (chain.transition @ ell))


def cross_moment_lagk(params: ModelParams | JointChain, k: int) -> float:
    """E[S(t) S(t+k)] at stationarity, via k applications of the transition matrix."""
    if k < 1:
        raise ValueError(f"lag k={k} must be >= 1")
    chain = _stationary_of(params)
    ell = chain.edge_counts
    future = ell
    for _ in range(k):
        future = chain.transition @ future
    return float((chain.stationary * ell) @ future)


def expected_squared_increment(params: ModelParams | JointChain) -> float:
    """E[(S(t+1) - S(t))^2] = 2 E[S^2] - 2 E[S(t) S(t+1)]."""
    chain = _stationary_of(params)
    return 2.0 * second_moment_S(chain.params) - 2.0 * cross_moment_lag1(chain)


@dataclass(frozen=True)
class MomentSet:
    m1: float
    m2: float
    m3: float
    cross1: float


def moment_set(params: ModelParams) -> MomentSet:
    chain = build_joint_chain(params)
    m1, m2 = closed_form_moments(params.n, params.pi_plus, params.pi_minus, params.link)
    cross1 = cross_moment_lag1(chain)
    return MomentSet(m1=m1, m2=m2, m3=2.0 * m2 - 2.0 * cross1, cross1=cross1)
