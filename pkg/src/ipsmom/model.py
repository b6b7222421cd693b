"""Parameters, vertex/edge state, and the edge activation rule.

Vertices hold a binary state (plus/minus). During an edge resample an edge
between two plus vertices is active with probability ``pi_plus``, between two
minus vertices with ``pi_minus``, and between a mixed pair with
``f(pi_plus, pi_minus)`` where ``f`` is one of two built-in linking functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Iterable, Mapping

import numpy as np

from .errors import InvalidParams, OrderingViolation, OutOfRange, ValidationError


class Link(str, Enum):
    MEAN = "mean"
    HARMONIC = "harmonic"

    @classmethod
    def parse(cls, value: "Link | str") -> "Link":
        if isinstance(value, Link):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise OutOfRange("link", value, f"link={value!r} is not one of mean, harmonic") from None


class VertexState(IntEnum):
    MINUS = 0
    PLUS = 1


def link_mean(pi_plus, pi_minus):
    return (pi_plus + pi_minus) / 2


def link_harmonic(pi_plus, pi_minus):
    """``pi_plus * pi_minus / (pi_plus + pi_minus)``, with 0 at the origin.

    Works elementwise on numpy arrays as well as on scalars.
    """
    # evaluated as min * (max / total) so rounding never lifts it above min
    lo = np.minimum(pi_plus, pi_minus)
    hi = np.maximum(pi_plus, pi_minus)
    total = np.add(pi_plus, pi_minus)
    if np.ndim(total) == 0:
        return float(lo * (hi / total)) if total > 0 else 0.0
    ratio = np.zeros(np.shape(total))
    np.divide(hi, total, out=ratio, where=total > 0)
    return lo * ratio


def link_value(link: Link | str, pi_plus, pi_minus):
    link = Link.parse(link)
    if link is Link.MEAN:
        return link_mean(pi_plus, pi_minus)
    return link_harmonic(pi_plus, pi_minus)


@dataclass(frozen=True)
class ModelParams:
    n: int
    alpha: float
    pi_plus: float
    pi_minus: float
    link: Link = Link.MEAN

    def __post_init__(self):
        object.__setattr__(self, "link", Link.parse(self.link))
        violations = _violations(self.n, self.alpha, self.pi_plus, self.pi_minus, self.link)
        if violations:
            raise InvalidParams(violations)

    @property
    def m(self) -> int:
        """Number of edge slots, C(n, 2)."""
        return math.comb(self.n, 2)

    @property
    def f(self) -> float:
        return float(link_value(self.link, self.pi_plus, self.pi_minus))

    def replace(self, **changes) -> "ModelParams":
        data = self.to_dict()
        data.update(changes)
        return ModelParams(**data)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "alpha": self.alpha,
            "pi_plus": self.pi_plus,
            "pi_minus": self.pi_minus,
            "link": self.link,
        }


def _violations(n, alpha, pi_plus, pi_minus, link) -> list[ValidationError]:
    out: list[ValidationError] = []
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 2:
        out.append(OutOfRange("n", n, f"n={n!r} must be an integer >= 2"))
    if not (0.0 < alpha < 1.0):
        out.append(OutOfRange("alpha", alpha, f"alpha={alpha!r} must lie in (0, 1)"))
    for name, value in (("pi_plus", pi_plus), ("pi_minus", pi_minus)):
        if not (0.0 <= value <= 1.0):
            out.append(OutOfRange(name, value, f"{name}={value!r} must lie in [0, 1]"))
    if link is Link.MEAN and pi_plus < pi_minus:
        out.append(OrderingViolation(
            f"mean link requires pi_plus >= pi_minus (got {pi_plus!r} < {pi_minus!r})"))
    return out


def validate_params(raw: Mapping | None = None, **fields) -> ModelParams:
    """Build a :class:`ModelParams` from loosely typed values.

    Strings are coerced (``"3"`` -> 3, ``"0.3"`` -> 0.3). Raises
    :class:`InvalidParams` listing every violation found.
    """
    data = dict(raw or {})
    data.update(fields)
    violations: list[ValidationError] = []
    coerced = {}
    for key, conv in (("n", _to_int), ("alpha", float), ("pi_plus", float), ("pi_minus", float)):
        if key not in data or data[key] is None:
            violations.append(OutOfRange(key, None, f"{key} is required"))
            continue
        try:
            coerced[key] = conv(data[key])
        except (TypeError, ValueError):
            violations.append(OutOfRange(key, data[key], f"{key}={data[key]!r} is not a number"))
    try:
        coerced["link"] = Link.parse(data.get("link", Link.MEAN))
    except OutOfRange as exc:
        violations.append(exc)
    if violations:
        raise InvalidParams(violations)
    return ModelParams(**coerced)


def _to_int(value) -> int:
    if isinstance(value, str):
        value = value.strip()
        as_float = float(value)
        if not as_float.is_integer():
            raise ValueError(value)
        return int(as_float)
    if isinstance(value, float) and not value.is_integer():
        raise ValueError(value)
    return int(value)


def pair_probability(a: VertexState | int | bool, b: VertexState | int | bool, params: ModelParams) -> float:
    if bool(a) and bool(b):
        return params.pi_plus
    if not a and not b:
        return params.pi_minus
    return params.f


def slot_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column indices of the C(n, 2) edge slots, ordered (0,1), (0,2), ..., (n-2,n-1)."""
    return np.triu_indices(n, 1)


def slot_probabilities(states: np.ndarray, params: ModelParams) -> np.ndarray:
    """Activation probability of every edge slot given a plus/minus vector.

    ``states`` may be 1-D (one configuration) or 2-D (one row per
    configuration); the result has the matching leading shape.
    """
    rows, cols = slot_pairs(params.n)
    states = np.asarray(states, dtype=np.int8)
    category = states[..., rows] + states[..., cols]  # 0: --, 1: mixed, 2: ++
    table = np.array([params.pi_minus, params.f, params.pi_plus])
    return table[category]


@dataclass(frozen=True, eq=False)
class SystemState:
    """Vertex states (True = plus) and per-slot edge presence at one time step."""

    states: np.ndarray
    edges: np.ndarray
    n: int = field(init=False)

    def __post_init__(self):
        states = np.array(self.states, dtype=bool)
        edges = np.array(self.edges, dtype=bool)
        if states.ndim != 1 or states.size < 2:
            raise OutOfRange("states", states.size, "need a 1-D vector of at least 2 vertex states")
        n = states.size
        if edges.shape != (math.comb(n, 2),):
            raise OutOfRange("edges", edges.shape, f"expected {math.comb(n, 2)} edge slots for n={n}")
        states.flags.writeable = False
        edges.flags.writeable = False
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "n", n)

    @classmethod
    def from_edge_set(cls, states: Iterable, edge_set: Iterable[tuple[int, int]]) -> "SystemState":
        states = np.array([bool(s) for s in states])
        n = states.size
        index = {pair: k for k, pair in enumerate(zip(*map(np.ndarray.tolist, slot_pairs(n))))}
        edges = np.zeros(math.comb(n, 2), dtype=bool)
        for i, j in edge_set:
            i, j = (int(i), int(j)) if i < j else (int(j), int(i))
            if i == j or not (0 <= i and j < n):
                raise OutOfRange("edge", (i, j), f"edge {(i, j)} invalid for n={n}")
            edges[index[(i, j)]] = True
        return cls(states, edges)

    @property
    def n_plus(self) -> int:
        return int(self.states.sum())

    @property
    def edge_count(self) -> int:
        return int(self.edges.sum())

    def edge_set(self) -> set[tuple[int, int]]:
        rows, cols = slot_pairs(self.n)
        return {(int(i), int(j)) for i, j in zip(rows[self.edges], cols[self.edges])}

    def vertex_states(self) -> tuple[VertexState, ...]:
        return tuple(VertexState(int(s)) for s in self.states)

    def __eq__(self, other):
        if not isinstance(other, SystemState):
            return NotImplemented
        return np.array_equal(self.states, other.states) and np.array_equal(self.edges, other.edges)

    def __hash__(self):
        return hash((self.states.tobytes(), self.edges.tobytes()))
