"""Finite data spaces, samples, loss models and elementary loss statistics.

Everything downstream (posteriors, certificates, enumeration oracles) is
built on the handful of quantities defined here: true and empirical loss,
the generalization gap, per-hypothesis variance and the one-coordinate
substitution / difference operators.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

PROB_TOL = 1e-12
DEFAULT_ENUMERATION_BUDGET = 10**6


class ContractViolation(ValueError):
    """A loss evaluator or declared coefficient broke its stated contract."""


class BudgetExceeded(RuntimeError):
    """An exact enumeration was requested beyond the configured state budget."""


@dataclass(frozen=True)
class FiniteDataSpace:
    """A finite data domain with an explicit probability vector.

    points are opaque identifiers (their order defines the index space);
    probs is the probability of each point.
    """

    points: tuple
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=float))
        if len(self.points) < 1:
            raise ValueError("data space needs at least one point")
        if len(set(self.points)) != len(self.points):
            raise ValueError("points must be distinct")
        if len(self.points) != len(self.probs):
            raise ValueError("points/probs length mismatch")
        if np.any(self.probs < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(float(self.probs.sum()) - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {self.probs.sum()!r}, not 1")
        self.probs.setflags(write=False)

    @property
    def size(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class Sample:
    """A vector of point indices into a data space."""

    entries: tuple[int, ...]

    def __post_init__(self):
        if len(self.entries) < 1:
            raise ValueError("sample must be nonempty")
        object.__setattr__(self, "entries", tuple(int(i) for i in self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def validate(self, space: FiniteDataSpace) -> None:
        for i in self.entries:
            if not 0 <= i < space.size:
                raise IndexError(f"sample index {i} out of range for space of size {space.size}")

    def substitute(self, k: int, y: int) -> "Sample":
        """Replace coordinate k (0-based) by point index y."""
        if not 0 <= k < len(self.entries):
            raise IndexError(f"coordinate {k} out of range")
        e = list(self.entries)
        e[k] = int(y)
        return Sample(tuple(e))


@dataclass(frozen=True)
class FiniteTable:
    """Loss table over (hypothesis index, point index), values in [0, bound_b]."""

    values: np.ndarray
    bound_b: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.ndim != 2:
            raise ValueError("loss table must be 2-dimensional")
        if self.bound_b <= 0:
            raise ValueError("bound_b must be positive")
        if np.any(self.values < 0) or np.any(self.values > self.bound_b):
            raise ValueError("loss values must lie in [0, bound_b]")
        self.values.setflags(write=False)

    @property
    def num_hypotheses(self) -> int:
        return self.values.shape[0]

    @property
    def num_points(self) -> int:
        return self.values.shape[1]

    def row(self, h: int) -> np.ndarray:
        if not 0 <= h < self.num_hypotheses:
            raise IndexError(f"hypothesis index {h} out of range")
        return self.values[h]


@dataclass(frozen=True)
class ParametricLoss:
    """Loss over hypotheses parametrized by vectors in R^d, bounded in [0, bound_b].

    The evaluator must be deterministic; values outside [0, bound_b] are a
    contract violation and raise.
    """

    dim_d: int
    evaluator: Callable[[np.ndarray, int], float]
    bound_b: float = 1.0

    def __post_init__(self):
        if self.dim_d < 1:
            raise ValueError("dim_d must be positive")
        if self.bound_b <= 0:
            raise ValueError("bound_b must be positive")

    def value(self, h: np.ndarray, point_index: int) -> float:
        v = float(self.evaluator(np.asarray(h, dtype=float), point_index))
        if not (0.0 <= v <= self.bound_b + 1e-12):
            raise ContractViolation(
                f"parametric loss returned {v} outside [0, {self.bound_b}]"
            )
        return min(v, self.bound_b)


LossModel = FiniteTable | ParametricLoss


@dataclass(frozen=True)
class PriorWeights:
    """Nonnegative a-priori weights over a finite hypothesis class.

    No normalization is required; for parametric classes use
    ``lebesgue_reference=True`` and leave weights empty.
    """

    weights: np.ndarray | None = None
    lebesgue_reference: bool = False

    def __post_init__(self):
        if self.lebesgue_reference:
            if self.weights is not None:
                raise ValueError("Lebesgue reference prior carries no weight vector")
            return
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0):
            raise ValueError("prior weights must be nonnegative")
        if not np.any(w > 0):
            raise ValueError("at least one prior weight must be positive")
        object.__setattr__(self, "weights", w)
        w.setflags(write=False)

    @classmethod
    def uniform(cls, m: int) -> "PriorWeights":
        return cls(weights=np.ones(m))


def _losses_at(loss: LossModel, h, indices: Sequence[int]) -> np.ndarray:
    if isinstance(loss, FiniteTable):
        return loss.row(int(h))[list(indices)]
    return np.array([loss.value(h, i) for i in indices])


def true_loss(h, space: FiniteDataSpace, loss: LossModel) -> float:
    """Expected loss of h under the space's probability vector."""
    vals = _losses_at(loss, h, range(space.size))
    return float(np.dot(space.probs, vals))


def empirical_loss(h, sample: Sample, loss: LossModel) -> float:
    """Mean loss of h over the sample."""
    return float(np.mean(_losses_at(loss, h, sample.entries)))


def generalization_gap(h, sample: Sample, space: FiniteDataSpace, loss: LossModel) -> float:
    """True loss minus empirical loss; lies in [-b, b]."""
    return true_loss(h, space, loss) - empirical_loss(h, sample, loss)


def loss_variance(h, space: FiniteDataSpace, loss: LossModel) -> float:
    """Variance of the loss of h under the data distribution."""
    vals = _losses_at(loss, h, range(space.size))
    mean = float(np.dot(space.probs, vals))
    return float(np.dot(space.probs, (vals - mean) ** 2))


def partial_difference(f: Callable[[Sample], float], sample: Sample, k: int, y: int, yp: int) -> float:
    """f after substituting y at coordinate k, minus f after substituting yp.

    Antisymmetric in (y, yp) and zero when y == yp.
    """
    if y == yp:
        return 0.0
    return f(sample.substitute(k, y)) - f(sample.substitute(k, yp))


# geometric grid used by the certified subgaussian search; recorded in outputs
_CERT_GRID_FACTOR = 1.02
_CERT_LAMBDA_GRID = tuple(float(x) for x in np.concatenate([
    -np.geomspace(1e-2, 50.0, 60)[::-1], np.geomspace(1e-2, 50.0, 60)]))


def subgaussian_parameter(h, space: FiniteDataSpace, loss: LossModel, mode: str = "hoeffding_proxy") -> float:
    """Subgaussian scale of the loss of h under the data distribution.

    hoeffding_proxy: half the range of the loss values (always valid).
    certified_grid: smallest rho on a geometric grid such that the centered
    MGF inequality holds on a fixed symmetric lambda grid. Tighter but
    heuristic; certificates built on it are labeled accordingly.
    """
    vals = _losses_at(loss, h, range(space.size))
    if mode == "hoeffding_proxy":
        return float(vals.max() - vals.min()) / 2.0
    if mode != "certified_grid":
        raise ValueError(f"unknown mode {mode!r}")
    proxy = float(vals.max() - vals.min()) / 2.0
    if proxy == 0.0:
        return 0.0
    mean = float(np.dot(space.probs, vals))
    centered = vals - mean
    lam = np.array(_CERT_LAMBDA_GRID)
    # log E[e^{lam * (h - Eh)}] for every grid lambda, in one shot
    log_mgf = np.log(np.dot(np.exp(np.outer(lam, centered)), space.probs))
    rho = proxy
    candidate = proxy
    while candidate > 1e-12:
        candidate /= _CERT_GRID_FACTOR
        if np.all(log_mgf <= lam**2 * candidate**2 / 2.0 + 1e-12):
            rho = candidate
        else:
            break
    return rho


def enumerate_samples(space: FiniteDataSpace, n: int,
                      budget: int = DEFAULT_ENUMERATION_BUDGET) -> Iterator[tuple[Sample, float]]:
    """Yield every sample in the n-fold product space with its mu^n weight.

    Refuses (rather than silently sampling) when |X|^n exceeds the budget.
    """
    states = space.size**n
    if states > budget:
        raise BudgetExceeded(
            f"enumeration of {space.size}^{n} = {states} states exceeds budget {budget}"
        )
    log_probs = np.log(np.where(space.probs > 0, space.probs, 1.0))
    support = space.probs > 0
    for combo in itertools.product(range(space.size), repeat=n):
        if not all(support[i] for i in combo):
            continue
        w = math.exp(sum(log_probs[i] for i in combo))
        yield Sample(combo), w


def load_loss_table(path) -> tuple[FiniteDataSpace, FiniteTable]:
    """Read a data space and loss table from the plain-text tabular format.

    Format (whitespace separated):
        # comment lines are ignored
        points  x1 x2 ... xm
        #mu     p1 p2 ... pm
        [b      <bound>]            optional, default 1.0
        h0      v01 v02 ... v0m     one row per hypothesis
        ...
    """
    points = None
    probs = None
    bound = 1.0
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or (line.startswith("#") and not line.startswith("#mu")):
                continue
            parts = line.split()
            key = parts[0]
            if key == "points":
                points = tuple(parts[1:])
            elif key == "#mu":
                probs = np.array([float(p) for p in parts[1:]])
            elif key == "b":
                bound = float(parts[1])
            else:
                rows.append([float(v) for v in parts[1:]])
    if points is None or probs is None or not rows:
        raise ValueError(f"{path}: need a points line, a #mu line and at least one hypothesis row")
    space = FiniteDataSpace(points=points, probs=probs)
    table = FiniteTable(values=np.array(rows), bound_b=bound)
    if table.num_points != space.size:
        raise ValueError(f"{path}: table has {table.num_points} columns for {space.size} points")
    return space, table
