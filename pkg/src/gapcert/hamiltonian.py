"""Hamiltonian specifications, partition functions, posteriors and samplers.

A Hamiltonian H(h, x) defines a stochastic algorithm through
dQ_x(h) = e^{H(h,x)} dpi(h) / Z(x). Supported variants: Gibbs (finite loss
table), Gaussian kernel and Lipschitz kernel around a stable deterministic
algorithm, sums of Hamiltonians, and sample-dependent shifts (which leave
the posterior unchanged).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .model import (
    DEFAULT_ENUMERATION_BUDGET,
    BudgetExceeded,
    ContractViolation,
    FiniteDataSpace,
    FiniteTable,
    LossModel,
    ParametricLoss,
    PriorWeights,
    Sample,
    empirical_loss,
    enumerate_samples,
)


class IncompatibleSpec(ValueError):
    """Hamiltonian variant does not fit the given loss model or operation."""


class NotBoundedDifference(ValueError):
    """Requested an analytic bounded-difference coefficient for a Hamiltonian
    that is not bounded-difference (the Gaussian kernel)."""


@dataclass(frozen=True)
class StableAlgorithm:
    """Deterministic map from samples to parameter vectors in R^d.

    declared_c_A, when present, is an upper bound on the one-point
    substitution displacement; brute-force checks must never exceed it.
    variance_fn, when present, computes the exact variance
    E||A(X) - E A(X')||^2 for a given (space, n) without enumeration.
    """

    map: Callable[[Sample], np.ndarray]
    dim_d: int
    declared_c_A: float | None = None
    variance_fn: Callable[[FiniteDataSpace, int], float] | None = None
    name: str = "custom"

    def __call__(self, sample: Sample) -> np.ndarray:
        return np.asarray(self.map(sample), dtype=float)


@dataclass(frozen=True)
class Gibbs:
    beta: float

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")


@dataclass(frozen=True)
class GaussianKernel:
    sigma: float
    algorithm: StableAlgorithm

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class LipschitzKernel:
    kernel_exponent: Callable[[np.ndarray], float]
    lip_constant: float
    algorithm: StableAlgorithm

    def __post_init__(self):
        if self.lip_constant < 0:
            raise ValueError("Lipschitz constant must be nonnegative")


@dataclass(frozen=True)
class Composite:
    parts: tuple

    def __post_init__(self):
        if not self.parts:
            raise ValueError("composite needs at least one part")


@dataclass(frozen=True)
class Shifted:
    base: "HamiltonianSpec"
    shift: Callable[[Sample], float]


HamiltonianSpec = Gibbs | GaussianKernel | LipschitzKernel | Composite | Shifted


@dataclass(frozen=True)
class FiniteWeights:
    """Exactly normalized posterior over a finite hypothesis class."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0):
            raise ValueError("posterior weights must be nonnegative")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise ValueError(f"posterior weights sum to {w.sum()!r}")
        object.__setattr__(self, "weights", w)
        w.setflags(write=False)


@dataclass(frozen=True)
class GaussianPosterior:
    mean: np.ndarray
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))


@dataclass(frozen=True)
class McmcChain:
    """Random-walk Metropolis target; sampling advances burn-in plus thinning steps."""

    log_density: Callable[[np.ndarray], float]
    dim_d: int
    initial: np.ndarray
    proposal_scale: float
    burn_in: int = 1000
    thinning: int = 10


PosteriorDistribution = FiniteWeights | GaussianPosterior | McmcChain


def _check_variant(spec: HamiltonianSpec, loss: LossModel) -> None:
    if isinstance(spec, Gibbs) and not isinstance(loss, FiniteTable):
        raise IncompatibleSpec("Gibbs Hamiltonian requires a finite loss table")
    if isinstance(spec, (GaussianKernel, LipschitzKernel)) and not isinstance(loss, ParametricLoss):
        raise IncompatibleSpec("kernel Hamiltonians require a parametric loss")


def hamiltonian_value(spec: HamiltonianSpec, h, sample: Sample, loss: LossModel) -> float:
    """Evaluate H(h, sample) for the given variant."""
    _check_variant(spec, loss)
    if isinstance(spec, Gibbs):
        return -spec.beta * empirical_loss(h, sample, loss)
    if isinstance(spec, GaussianKernel):
        diff = np.asarray(h, dtype=float) - spec.algorithm(sample)
        return -float(diff @ diff) / (2.0 * spec.sigma**2)
    if isinstance(spec, LipschitzKernel):
        diff = np.asarray(h, dtype=float) - spec.algorithm(sample)
        g = float(spec.kernel_exponent(diff))
        if g < 0:
            raise ContractViolation("kernel exponent must be nonnegative")
        return -g
    if isinstance(spec, Composite):
        return sum(hamiltonian_value(p, h, sample, loss) for p in spec.parts)
    if isinstance(spec, Shifted):
        return hamiltonian_value(spec.base, h, sample, loss) + float(spec.shift(sample))
    raise IncompatibleSpec(f"unknown Hamiltonian variant {type(spec).__name__}")


def _finite_log_weights(spec: HamiltonianSpec, sample: Sample, loss: FiniteTable,
                        prior: PriorWeights) -> np.ndarray:
    w = prior.weights
    out = np.full(loss.num_hypotheses, -np.inf)
    for h in range(loss.num_hypotheses):
        if w[h] > 0:
            out[h] = hamiltonian_value(spec, h, sample, loss) + math.log(w[h])
    return out


def log_partition(spec: HamiltonianSpec, sample: Sample, loss: LossModel,
                  prior: PriorWeights) -> float:
    """ln Z(sample) via log-sum-exp (finite class) or the Gaussian closed form."""
    if isinstance(loss, FiniteTable):
        if prior.lebesgue_reference:
            raise IncompatibleSpec("finite class needs explicit prior weights")
        return float(logsumexp(_finite_log_weights(spec, sample, loss, prior)))
    if isinstance(spec, GaussianKernel):
        d = spec.algorithm.dim_d
        return 0.5 * d * math.log(2.0 * math.pi * spec.sigma**2)
    if isinstance(spec, Shifted):
        return log_partition(spec.base, sample, loss, prior) + float(spec.shift(sample))
    raise IncompatibleSpec(
        "log partition is only available for finite classes, the Gaussian kernel, "
        "and shifts thereof"
    )


def posterior(spec: HamiltonianSpec, sample: Sample, loss: LossModel,
              prior: PriorWeights) -> PosteriorDistribution:
    """The distribution proportional to e^{H(h, sample)} dpi(h)."""
    if isinstance(loss, FiniteTable):
        lw = _finite_log_weights(spec, sample, loss, prior)
        lw = lw - logsumexp(lw)
        w = np.exp(lw)
        return FiniteWeights(weights=w / w.sum())
    if isinstance(spec, GaussianKernel):
        return GaussianPosterior(mean=spec.algorithm(sample), sigma=spec.sigma)
    if isinstance(spec, Shifted):
        return posterior(spec.base, sample, loss, prior)
    raise IncompatibleSpec("no sampler for this spec/loss combination")


def canonical_hamiltonian(spec: HamiltonianSpec, h, sample: Sample, loss: LossModel,
                          prior: PriorWeights) -> float:
    """H(h, sample) - ln Z(sample): the log density of the posterior w.r.t. pi."""
    return hamiltonian_value(spec, h, sample, loss) - log_partition(spec, sample, loss, prior)


def sample_posterior(dist: PosteriorDistribution, rng: np.random.Generator):
    """Draw one hypothesis; exact inverse-CDF for finite classes."""
    if isinstance(dist, FiniteWeights):
        u = rng.random()
        return int(np.searchsorted(np.cumsum(dist.weights), u, side="right").clip(0, len(dist.weights) - 1))
    if isinstance(dist, GaussianPosterior):
        return dist.mean + dist.sigma * rng.standard_normal(dist.mean.shape)
    if isinstance(dist, McmcChain):
        return _advance_chain(dist, rng)
    raise TypeError(f"cannot sample from {type(dist).__name__}")


def _advance_chain(chain: McmcChain, rng: np.random.Generator) -> np.ndarray:
    state = np.asarray(chain.initial, dtype=float).copy()
    logp = chain.log_density(state)
    if not math.isfinite(logp):
        raise ValueError("MCMC log density is not finite at the initial state")
    steps = chain.burn_in + chain.thinning
    for _ in range(steps):
        prop = state + chain.proposal_scale * rng.standard_normal(chain.dim_d)
        logp_prop = chain.log_density(prop)
        if math.log(rng.random()) < logp_prop - logp:
            state, logp = prop, logp_prop
    return state


def _sample_grid(space: FiniteDataSpace, n: int, budget: int):
    """Full enumeration of X^n when it fits the budget, else a deterministic
    stride of repeated/staircase samples. Returns (samples, regime_label)."""
    if space.size**n <= budget:
        return [s for s, _ in enumerate_samples(space, n, budget)], "exhaustive"
    base = []
    for i in range(space.size):
        base.append(Sample((i,) * n))
    for shift in range(min(space.size, max(2, budget // max(space.size, 1)))):
        base.append(Sample(tuple((j + shift) % space.size for j in range(n))))
    return base, "deterministic_sample"


def bounded_difference_coefficient(spec: HamiltonianSpec, space: FiniteDataSpace,
                                   loss: LossModel, n: int, mode: str = "analytic",
                                   budget: int = DEFAULT_ENUMERATION_BUDGET):
    """Coefficient c with sup D^k_{y,y'} H <= c.

    analytic mode returns the closed form per variant; brute_force maximizes
    the partial difference of H over hypotheses, coordinates and point pairs,
    with the base sample ranging over an exhaustive or documented
    deterministic grid. brute_force returns (c, regime_label).
    """
    if mode == "analytic":
        return _analytic_bd(spec, loss, n)
    if mode != "brute_force":
        raise ValueError(f"unknown mode {mode!r}")
    if not isinstance(loss, FiniteTable):
        raise IncompatibleSpec("brute-force coefficients need a finite hypothesis class")
    samples, regime = _sample_grid(space, n, budget)
    c = 0.0
    for h in range(loss.num_hypotheses):
        for s in samples:
            for k in range(n):
                for y in range(space.size):
                    hy = hamiltonian_value(spec, h, s.substitute(k, y), loss)
                    for yp in range(space.size):
                        hyp = hamiltonian_value(spec, h, s.substitute(k, yp), loss)
                        c = max(c, hy - hyp)
    return c, regime


def _analytic_bd(spec: HamiltonianSpec, loss: LossModel, n: int) -> float:
    if isinstance(spec, Gibbs):
        return spec.beta * loss.bound_b / n
    if isinstance(spec, GaussianKernel):
        raise NotBoundedDifference(
            "the Gaussian kernel Hamiltonian is not a bounded-difference Hamiltonian; "
            "use the variance-based bounds instead"
        )
    if isinstance(spec, LipschitzKernel):
        c_A = spec.algorithm.declared_c_A
        if c_A is None:
            raise ValueError("Lipschitz kernel needs a declared sensitivity coefficient")
        return spec.lip_constant * c_A
    if isinstance(spec, Composite):
        return sum(_analytic_bd(p, loss, n) for p in spec.parts)
    if isinstance(spec, Shifted):
        # a sample-dependent shift contributes its own differences to D^k H
        raise IncompatibleSpec("no analytic coefficient for shifted Hamiltonians; use brute_force")
    raise IncompatibleSpec(f"unknown Hamiltonian variant {type(spec).__name__}")


def hypothesis_sensitivity(algorithm: StableAlgorithm, space: FiniteDataSpace, n: int,
                           mode: str = "brute_force",
                           budget: int = DEFAULT_ENUMERATION_BUDGET) -> float:
    """Max displacement ||A(S_y^k x) - A(S_y'^k x)|| over substitutions.

    declared mode echoes the declared coefficient; brute_force maximizes over
    the enumeration grid and raises if a declared value is exceeded.
    """
    if mode == "declared":
        if algorithm.declared_c_A is None:
            raise ValueError(f"algorithm {algorithm.name!r} declares no sensitivity coefficient")
        return algorithm.declared_c_A
    if mode != "brute_force":
        raise ValueError(f"unknown mode {mode!r}")
    samples, _ = _sample_grid(space, n, budget)
    c = 0.0
    for s in samples:
        for k in range(n):
            outs = [algorithm(s.substitute(k, y)) for y in range(space.size)]
            for i in range(space.size):
                for j in range(i + 1, space.size):
                    c = max(c, float(np.linalg.norm(outs[i] - outs[j])))
    if algorithm.declared_c_A is not None and c > algorithm.declared_c_A + 1e-9:
        raise ContractViolation(
            f"brute-force sensitivity {c} exceeds declared {algorithm.declared_c_A}"
        )
    return c


def algorithm_variance(algorithm: StableAlgorithm, space: FiniteDataSpace, n: int,
                       budget: int = DEFAULT_ENUMERATION_BUDGET,
                       mc_samples: int = 200_000, seed: int = 0):
    """E||A(X) - E A(X')||^2, exact when enumeration is feasible.

    Returns (value, standard_error); standard_error is 0.0 in the exact regime
    (closed form or enumeration) and the Monte Carlo standard error otherwise.
    """
    if algorithm.variance_fn is not None:
        return float(algorithm.variance_fn(space, n)), 0.0
    if space.size**n <= budget:
        pairs = list(enumerate_samples(space, n, budget))
        outs = np.array([algorithm(s) for s, _ in pairs])
        w = np.array([p for _, p in pairs])
        mean = w @ outs
        sq = np.einsum("ij,ij->i", outs - mean, outs - mean)
        return float(w @ sq), 0.0
    rng = np.random.Generator(np.random.Philox(key=seed))
    idx = rng.choice(space.size, size=(mc_samples, n), p=space.probs)
    outs = np.array([algorithm(Sample(tuple(row))) for row in idx])
    mean = outs.mean(axis=0)
    sq = np.einsum("ij,ij->i", outs - mean, outs - mean)
    return float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(mc_samples))


# ---------------------------------------------------------------------------
# Built-in stable algorithms, selectable by name in scenario configs.

def constant_algorithm(vector) -> StableAlgorithm:
    v = np.asarray(vector, dtype=float)
    return StableAlgorithm(map=lambda s: v, dim_d=len(v), declared_c_A=0.0,
                           variance_fn=lambda space, n: 0.0, name="constant")

def mean_embedding_algorithm(features: np.ndarray) -> StableAlgorithm:
    """A(x) = (1/n) sum_i phi(x_i) for a fixed per-point feature table phi.

    Sensitivity is diam(phi)/n for each n; the variance has the closed form
    tr Cov(phi(X)) / n, recorded via variance_fn.
    """
    phi = np.asarray(features, dtype=float)
    if phi.ndim != 2:
        raise ValueError("feature table must be (num_points, d)")
    diam = 0.0
    for i in range(phi.shape[0]):
        for j in range(i + 1, phi.shape[0]):
            diam = max(diam, float(np.linalg.norm(phi[i] - phi[j])))

    def amap(sample: Sample) -> np.ndarray:
        return phi[list(sample.entries)].mean(axis=0)

    def variance(space: FiniteDataSpace, n: int) -> float:
        mean = space.probs @ phi
        sq = np.einsum("ij,ij->i", phi - mean, phi - mean)
        return float(space.probs @ sq) / n

    return StableAlgorithm(map=amap, dim_d=phi.shape[1], declared_c_A=None,
                           variance_fn=variance, name="mean_embedding")


def mean_embedding_with_declared(features: np.ndarray, n: int) -> StableAlgorithm:
    """Mean embedding with its diam/n sensitivity declared for a fixed n."""
    base = mean_embedding_algorithm(features)
    phi = np.asarray(features, dtype=float)
    diam = max(
        (float(np.linalg.norm(phi[i] - phi[j]))
         for i in range(phi.shape[0]) for j in range(phi.shape[0])),
        default=0.0,
    )
    return StableAlgorithm(map=base.map, dim_d=base.dim_d, declared_c_A=diam / n,
                           variance_fn=base.variance_fn, name="mean_embedding")


def ridge_algorithm(design: np.ndarray, targets: np.ndarray, reg: float) -> StableAlgorithm:
    """Regularized least squares on a fixed synthetic design.

    Point index i selects row i of the design and target; A(x) solves the
    ridge problem on the multiset of selected rows.
    """
    X = np.asarray(design, dtype=float)
    t = np.asarray(targets, dtype=float)
    if reg <= 0:
        raise ValueError("ridge regularization must be positive")
    d = X.shape[1]

    def amap(sample: Sample) -> np.ndarray:
        idx = list(sample.entries)
        Xi, ti = X[idx], t[idx]
        n = len(idx)
        gram = Xi.T @ Xi / n + reg * np.eye(d)
        return np.linalg.solve(gram, Xi.T @ ti / n)

    return StableAlgorithm(map=amap, dim_d=d, name="ridge")


def builtin_algorithm(name: str, space: FiniteDataSpace, n: int, dim_d: int = 2,
                      seed: int = 0) -> StableAlgorithm:
    """Registry lookup used by scenario configs."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    if name == "constant":
        return constant_algorithm(np.zeros(dim_d))
    if name == "mean_embedding":
        phi = rng.uniform(-0.5, 0.5, size=(space.size, dim_d))
        return mean_embedding_with_declared(phi, n)
    if name == "ridge":
        design = rng.standard_normal((space.size, dim_d))
        targets = rng.standard_normal(space.size)
        return ridge_algorithm(design, targets, reg=1.0)
    raise KeyError(f"unknown stable algorithm {name!r}")
