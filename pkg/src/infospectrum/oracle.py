"""Finite-n ground truth: exact Neyman-Pearson frontiers, brute-force projections,
Monte Carlo spectra and optimal fixed-length codes.

Everything here avoids the large-deviation machinery on purpose so it can be
used to check it. Results that carry a rate are in the problem's log base.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvalidModelError, ResourceError, UnsupportedModelError
from .ldp import _normalise_constraints
from .models import (
    CountingMeasure,
    FiniteDistribution,
    GaussianSource,
    IidSource,
    MarkovSource,
    StepSpectrumModel,
    TestingProblem,
    sample_densities,
)

ENUMERATION_BUDGET = 2**24
TIE_TOL = 1e-10
MC_CHUNK = 100_000


def _check_budget(size, budget):
    if size > budget:
        raise ResourceError(
            f"enumeration of {size} sequences exceeds the budget of {budget}; use mc_spectrum instead"
        )


def _rank_descending(values):
    """Order of ``values`` from largest to smallest, near-equal values grouped.

    Within a group, indices stay in increasing (lexicographic) order. Returns
    (order, starts) with group k spanning order[starts[k]:starts[k+1]].
    """
    v = np.asarray(values, dtype=float)
    order = np.lexsort((np.arange(v.size), -v))
    sv = v[order]
    with np.errstate(invalid="ignore"):
        gap = sv[:-1] - sv[1:]
    scale = np.maximum(1.0, np.abs(sv[1:]))
    new = ~(np.isnan(gap) | (gap <= TIE_TOL * scale))
    starts = np.concatenate([[0], np.flatnonzero(new) + 1, [v.size]])
    # re-sort indices inside each tie group so ties break lexicographically
    for a, b in zip(starts[:-1], starts[1:]):
        if b - a > 1:
            order[a:b] = np.sort(order[a:b])
    return order, starts


@dataclass(frozen=True, eq=False)
class NpTradeoff:
    """Exact (mu_n, lambda_n) tradeoff of likelihood-ratio tests at block length n.

    Atoms are groups of sequences with equal likelihood ratio, sorted from the
    largest ratio down. Vertex k is the test accepting the first k atoms:
    ``mu[k]`` is the null mass left out, ``lam[k]`` the alternative mass let in.
    Between vertices the optimal test randomises on the threshold atom.
    """

    n: int
    null_mass: np.ndarray
    alt_mass: np.ndarray
    log_ratio: np.ndarray
    counts: np.ndarray
    mu: np.ndarray
    lam: np.ndarray
    kappa: float
    order: np.ndarray = None
    starts: np.ndarray = None

    @property
    def atoms(self):
        return list(zip(self.null_mass, self.alt_mass, self.log_ratio))

    def members(self, k):
        """Sequence indices (lexicographic) of atom k; None for models stored by atoms only."""
        if self.order is None:
            return None
        return self.order[self.starts[k]:self.starts[k + 1]]

    def acceptance_set(self, k):
        """Indices of all sequences accepted by deterministic vertex k."""
        if self.order is None:
            return None
        return np.sort(self.order[: self.starts[k]])

    @property
    def frontier(self):
        """Non-dominated vertices as an array of (mu, lambda) rows."""
        keep = np.ones(self.mu.size, bool)
        keep[:-1] &= self.alt_mass > 0
        keep[1:] &= self.null_mass > 0
        keep[0] = keep[0] or self.mu.size == 1
        return np.column_stack([self.mu[keep], self.lam[keep]])

    def best_lambda(self, budget, randomized=True):
        """Smallest lambda_n with mu_n <= budget.

        Returns (lambda, k, gamma): atoms before k-1 are accepted outright and
        atom k-1 with probability gamma (gamma = 1 for deterministic tests).
        """
        # mu[0] is a float sum of the total null mass; absorb its rounding drift
        if budget >= self.mu[0] * (1 - 1e-12):
            return 0.0, 0, 0.0
        k = int(np.argmax(self.mu <= budget))
        if self.mu[k] == budget or not randomized:
            return float(self.lam[k]), k, 1.0
        gamma = (self.mu[k - 1] - budget) / self.null_mass[k - 1]
        return float(self.lam[k - 1] + gamma * self.alt_mass[k - 1]), k, float(gamma)


def _step_tradeoff(model, n):
    atoms = model.atoms(n)
    p = np.array([a[0] for a in atoms])
    g = np.array([a[1] for a in atoms])
    c = np.array([a[2] for a in atoms])
    with np.errstate(divide="ignore"):
        lr = np.log(p) - np.log(g)
    return p, g, lr, c, None, None


def _enumerated_atoms(problem, n, budget):
    null, alt = problem.null, problem.alternative
    size = null.alphabet_size**n
    _check_budget(size, budget)
    lp = null.enumerate_log_prob(n)
    lg = alt.enumerate_log_prob(n)
    with np.errstate(invalid="ignore"):
        lr = lp - lg
    live = ~(np.isneginf(lp) & np.isneginf(lg))
    lr = np.where(live, lr, -np.inf)
    order, starts = _rank_descending(lr)
    keep = live[order[starts[:-1]]]
    p_seq, g_seq = np.exp(lp[order]), np.exp(lg[order])
    p = np.add.reduceat(p_seq, starts[:-1])
    g = np.add.reduceat(g_seq, starts[:-1])
    counts = np.diff(starts)
    if not np.all(keep):
        # sequences with zero mass under both measures sit at the very end
        cut = int(np.argmin(keep))
        order, starts = order[: starts[cut]], starts[: cut + 1]
        p, g, counts = p[:cut], g[:cut], counts[:cut]
    lr_atoms = lr[order[starts[:-1]]]
    return p, g, lr_atoms, counts, order, starts


def np_tradeoff(problem, n, budget=ENUMERATION_BUDGET):
    """Exact Neyman-Pearson frontier at block length n by full enumeration."""
    if n < 1:
        raise InvalidModelError("n must be at least 1")
    if isinstance(problem.null, GaussianSource):
        raise UnsupportedModelError("continuous models cannot be enumerated")
    if isinstance(problem.null, StepSpectrumModel):
        p, g, lr, c, order, starts = _step_tradeoff(problem.null, n)
    else:
        p, g, lr, c, order, starts = _enumerated_atoms(problem, n, budget)
    suffix = np.concatenate([np.cumsum(p[::-1])[::-1], [0.0]])
    lam = np.concatenate([[0.0], np.cumsum(g)])
    kappa = float(lam[-1])
    return NpTradeoff(n, p, g, lr, c, suffix, lam, kappa, order, starts)


@dataclass(frozen=True)
class FiniteNExponents:
    lambda_n: float
    mu_n: float
    error_exponent: float
    correct_exponent: float
    kappa_n: float
    threshold_atom: int
    gamma: float


def finite_n_exponents(problem, n, r, randomized=True, budget=ENUMERATION_BUDGET):
    """Best lambda_n under mu_n <= exp(-n r) and the exponents it implies at this n.

    The correct-side estimate uses kappa_n - lambda_n, which is 1 - lambda_n
    for probability alternatives.
    """
    if r < 0:
        raise InvalidModelError("r must be nonnegative")
    ln_base = math.log(problem.log_base)
    tradeoff = np_tradeoff(problem, n, budget)
    mu_budget = math.exp(-n * r * ln_base)
    lam, k, gamma = tradeoff.best_lambda(mu_budget, randomized)
    if k == 0:
        mu = float(tradeoff.mu[0])
    elif gamma < 1.0:
        mu = mu_budget
    else:
        mu = float(tradeoff.mu[k])
    err = math.inf if lam <= 0 else -math.log(lam) / (n * ln_base)
    rest = tradeoff.kappa - lam
    corr = math.inf if rest <= 0 else -math.log(rest) / (n * ln_base)
    return FiniteNExponents(lam, mu, err, corr, tradeoff.kappa, k - 1 if k else None, gamma)


# ---------------------------------------------------------------------------
# Monte Carlo spectrum
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpectrumEstimate:
    """Empirical law of the divergence density at block length n.

    ``values`` are sorted densities in the problem's log base. The band
    half-width is the two-sided DKW bound at confidence level 0.99.
    """

    n: int
    samples: int
    values: np.ndarray
    log_base: float = math.e
    level: float = 0.01

    @property
    def half_width(self):
        return math.sqrt(math.log(2 / self.level) / (2 * self.samples))

    def cdf(self, R):
        # densities of tied sequences can differ in the last bits, so R is widened slightly
        R = np.asarray(R, dtype=float)
        R = R + 1e-12 * np.maximum(1.0, np.abs(R))
        return np.searchsorted(self.values, R, side="right") / self.samples

    def cdf_band(self, R):
        f = self.cdf(R)
        return np.clip(f - self.half_width, 0, 1), np.clip(f + self.half_width, 0, 1)

    def eta_hat(self, R):
        """-(1/n) log of the empirical CDF; +inf where no sample falls at or below R."""
        f = self.cdf(R)
        with np.errstate(divide="ignore"):
            return -np.log(f) / (self.n * math.log(self.log_base))


def mc_spectrum(problem, n, samples, seed, workers=1, chunk=MC_CHUNK):
    """Sample the divergence density under the null; deterministic in ``seed``.

    The sample is split into fixed-size chunks, each with its own child seed,
    so the result does not depend on ``workers``.
    """
    if samples < 1000:
        raise InvalidModelError("mc_spectrum needs at least 1000 samples")
    if n < 1:
        raise InvalidModelError("n must be at least 1")
    sizes = [chunk] * (samples // chunk)
    if samples % chunk:
        sizes.append(samples % chunk)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(job):
        size, ss = job
        return sample_densities(problem, n, size, np.random.default_rng(ss))

    jobs = list(zip(sizes, seeds))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    values = np.sort(np.concatenate(parts)) / math.log(problem.log_base)
    values.setflags(write=False)
    return SpectrumEstimate(n, samples, values, problem.log_base)


# ---------------------------------------------------------------------------
# Brute-force I-projection
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridProjection:
    value: float
    argmin: np.ndarray
    spacing: float
    error_bound: float


def _simplex_points(size, resolution):
    if size == 1:
        yield np.ones((1, 1))
        return
    if size == 2:
        n = max(int(resolution) - 1, 1)
        i = np.arange(n + 1)
        yield np.column_stack([i / n, (n - i) / n])
        return
    n = int((math.isqrt(8 * int(resolution) + 1) - 3) // 2)
    for i in range(n + 1):
        j = np.arange(n - i + 1)
        yield np.column_stack([np.full(j.size, i / n), j / n, (n - i - j) / n])


def simplex_grid_projection(base, constraints=(), resolution=10**6):
    """Exhaustive minimum of D(Q||base) over a uniform simplex grid meeting the constraints."""
    p = np.asarray(base, dtype=float)
    FiniteDistribution(p)
    if p.size > 3:
        raise UnsupportedModelError("grid projection supports alphabets of size at most 3")
    if resolution > 10**7:
        raise ResourceError("grid resolution above 10^7 points")
    cons = _normalise_constraints(constraints, p.size)
    best, arg, step = math.inf, None, 1.0
    logp = np.log(np.where(p > 0, p, 1.0))
    for q in _simplex_points(p.size, resolution):
        if q.shape[0] > 1:
            step = float(abs(q[1] - q[0]).max()) or step
        ok = np.ones(q.shape[0], bool)
        for c, b, s in cons:
            v = q @ c
            tol = 1e-12 * max(1.0, abs(b))
            if s == "<=":
                ok &= v <= b + tol
            elif s == ">=":
                ok &= v >= b - tol
            else:
                ok &= np.abs(v - b) <= tol
        ok &= ~np.any((q > 0) & (p <= 0), axis=1)
        if not np.any(ok):
            continue
        qq = q[ok]
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(qq > 0, qq * (np.log(qq) - logp), 0.0)
        d = terms.sum(axis=1)
        i = int(np.argmin(d))
        if d[i] < best:
            best, arg = float(d[i]), qq[i].copy()
    if arg is None:
        raise InvalidModelError("no grid point satisfies the constraints")
    grad = float(np.max(np.abs(logp))) + math.log(1 / step) + 1.0
    return GridProjection(best, arg, step, step * grad)


# ---------------------------------------------------------------------------
# Optimal fixed-length codes
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FixedLengthCode:
    """Code that decodes exactly the M most probable length-n sequences."""

    n: int
    size: int
    members: np.ndarray
    epsilon: float


def best_fixed_length_code(source, n, M, budget=ENUMERATION_BUDGET):
    """Keep the M most probable sequences (ties broken lexicographically); exact error."""
    if not isinstance(source, (IidSource, MarkovSource)):
        raise UnsupportedModelError("fixed-length codes need an i.i.d. or Markov source")
    total = source.alphabet_size**n
    _check_budget(total, budget)
    if not 0 <= M <= total:
        raise InvalidModelError(f"M must lie in [0, {total}]")
    lp = source.enumerate_log_prob(n)
    order, _ = _rank_descending(lp)
    eps = float(np.exp(lp[order[M:]]).sum())
    return FixedLengthCode(n, int(M), np.sort(order[:M]), eps)


def coding_tradeoff(source, n, budget=ENUMERATION_BUDGET):
    """NP frontier of the source against the counting measure."""
    return np_tradeoff(TestingProblem(source, CountingMeasure(source.alphabet_size)), n, budget)
