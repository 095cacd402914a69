"""Source models, alternative measures and testing problems.

Every null-hypothesis process and alternative measure lives here, along with
the per-sequence quantities the rest of the package builds on: sequence log
masses, the divergence density, samplers, and the structural checks that the
exponent formulas rely on.

Symbols of a finite alphabet of size ``A`` are the integers ``0 .. A-1``.
All logarithms are natural; :class:`TestingProblem` carries a ``log_base``
that is applied only when results are reported.
"""

from __future__ import annotations

import json
import hashlib
import math
import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (
    AlphabetMismatchError,
    DegeneracyError,
    InvalidModelError,
    UnsupportedModelError,
)

SUM_TOL = 1e-12


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_prob_vector(p, what):
    if p.ndim != 1 or p.size < 1:
        raise InvalidModelError(f"{what} must be a non-empty vector")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise InvalidModelError(f"{what} has negative or non-finite masses")
    if abs(p.sum() - 1.0) > SUM_TOL:
        raise InvalidModelError(f"{what} sums to {p.sum()!r}, not 1")


def _check_stochastic(k, what):
    if k.ndim != 2 or k.shape[0] != k.shape[1] or k.shape[0] < 1:
        raise InvalidModelError(f"{what} must be a square matrix")
    if not np.all(np.isfinite(k)) or np.any(k < 0):
        raise InvalidModelError(f"{what} has negative or non-finite entries")
    bad = np.abs(k.sum(axis=1) - 1.0) > SUM_TOL
    if np.any(bad):
        raise InvalidModelError(f"row {int(np.argmax(bad))} of {what} does not sum to 1")


def reachability(mask):
    """Boolean reachability closure (paths of length >= 0) of a 0/1 matrix."""
    mask = np.asarray(mask, dtype=bool)
    reach = mask | np.eye(mask.shape[0], dtype=bool)
    while True:
        nxt = reach | ((reach.astype(np.int64) @ mask.astype(np.int64)) > 0)
        if np.array_equal(nxt, reach):
            return reach
        reach = nxt


def is_irreducible(mask):
    return bool(np.all(reachability(mask)))


def stationary_distribution(kernel):
    """Stationary row vector of an irreducible row-stochastic kernel."""
    kernel = np.asarray(kernel, dtype=float)
    m = kernel.shape[0]
    if not is_irreducible(kernel > 0):
        raise DegeneracyError("kernel is not irreducible; stationary law is not unique")
    lhs = np.vstack([kernel.T - np.eye(m), np.ones((1, m))])
    rhs = np.zeros(m + 1)
    rhs[-1] = 1.0
    p, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    p = np.clip(p, 0.0, None)
    return p / p.sum()


@dataclass(frozen=True, eq=False)
class FiniteDistribution:
    """Probability masses indexed by symbol."""

    masses: np.ndarray

    def __post_init__(self):
        p = np.array(self.masses, dtype=float)
        _check_prob_vector(p, "distribution")
        p.setflags(write=False)
        object.__setattr__(self, "masses", p)

    @property
    def size(self):
        return self.masses.size

    def __len__(self):
        return self.masses.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.masses, dtype=dtype)


def _as_masses(p):
    if isinstance(p, FiniteDistribution):
        return p.masses
    return FiniteDistribution(p).masses


def _check_sequences(seqs, alphabet_size):
    seqs = np.asarray(seqs)
    if seqs.ndim == 1:
        seqs = seqs[None, :]
    if seqs.ndim != 2 or seqs.shape[1] < 1:
        raise AlphabetMismatchError("sequences must be non-empty")
    if not np.issubdtype(seqs.dtype, np.integer):
        if not np.all(np.mod(seqs, 1) == 0):
            raise AlphabetMismatchError("finite-alphabet symbols must be integers")
        seqs = seqs.astype(np.int64)
    if np.any(seqs < 0) or np.any(seqs >= alphabet_size):
        raise AlphabetMismatchError(
            f"sequence contains a symbol outside the alphabet 0..{alphabet_size - 1}"
        )
    return seqs


# ---------------------------------------------------------------------------
# Null-hypothesis sources
# ---------------------------------------------------------------------------


class _FiniteModel:
    alphabet_size: int

    def log_prob(self, seqs):
        """Natural-log mass of each row of ``seqs``."""
        return self._log_prob(_check_sequences(seqs, self.alphabet_size))

    def enumerate_log_prob(self, n):
        """Log masses of all ``A**n`` sequences in lexicographic order."""
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class IidSource(_FiniteModel):
    """Stationary memoryless source with letter distribution ``probs``."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _readonly(_as_masses(self.probs)))

    @property
    def alphabet_size(self):
        return self.probs.size

    @property
    def dist(self):
        return FiniteDistribution(self.probs)

    def _log_prob(self, seqs):
        return _log(self.probs)[seqs].sum(axis=1)

    def enumerate_log_prob(self, n):
        lp = np.zeros(1)
        logp = _log(self.probs)
        for _ in range(n):
            lp = (lp[:, None] + logp[None, :]).ravel()
        return lp

    def _sample(self, n, count, rng):
        cum = np.cumsum(self.probs)
        u = rng.random((count, n))
        return np.minimum(np.searchsorted(cum, u, side="right"), self.alphabet_size - 1)

    def to_config(self):
        return {"type": "iid", "p": self.probs.tolist()}


@dataclass(frozen=True, eq=False)
class MarkovSource(_FiniteModel):
    """Irreducible Markov chain started from ``initial`` (stationary by default)."""

    kernel: np.ndarray
    initial: np.ndarray = None

    def __post_init__(self):
        k = np.array(self.kernel, dtype=float)
        _check_stochastic(k, "Markov kernel")
        if not is_irreducible(k > 0):
            raise InvalidModelError("Markov kernel is not irreducible")
        k.setflags(write=False)
        object.__setattr__(self, "kernel", k)
        if self.initial is None:
            init = stationary_distribution(k)
        else:
            init = _as_masses(self.initial)
            if init.size != k.shape[0]:
                raise AlphabetMismatchError("initial distribution has the wrong size")
        object.__setattr__(self, "initial", _readonly(init))

    @property
    def alphabet_size(self):
        return self.kernel.shape[0]

    @property
    def stationary(self):
        return stationary_distribution(self.kernel)

    def _log_prob(self, seqs):
        logk = _log(self.kernel)
        lp = _log(self.initial)[seqs[:, 0]]
        if seqs.shape[1] > 1:
            lp = lp + logk[seqs[:, :-1], seqs[:, 1:]].sum(axis=1)
        return lp

    def enumerate_log_prob(self, n):
        a = self.alphabet_size
        logk = _log(self.kernel)
        lp = _log(self.initial).copy()
        for _ in range(n - 1):
            last = np.arange(lp.size) % a
            lp = (lp[:, None] + logk[last]).ravel()
        return lp

    def _sample(self, n, count, rng):
        a = self.alphabet_size
        out = np.empty((count, n), dtype=np.int64)
        cum_init = np.cumsum(self.initial)
        cum = np.cumsum(self.kernel, axis=1)
        out[:, 0] = np.minimum(np.searchsorted(cum_init, rng.random(count), side="right"), a - 1)
        for i in range(1, n):
            u = rng.random(count)
            rows = cum[out[:, i - 1]]
            out[:, i] = np.minimum((u[:, None] >= rows).sum(axis=1), a - 1)
        return out

    def to_config(self):
        return {"type": "markov", "P": self.kernel.tolist()}


@dataclass(frozen=True, eq=False)
class UnifilarSource(_FiniteModel):
    """Unifilar finite-state source.

    ``emission[s, x]`` is P(x|s); ``next_state[x, s]`` is the deterministic
    successor state f(x, s); the chain starts in ``initial_state``.
    """

    emission: np.ndarray
    next_state: np.ndarray
    initial_state: int = 0

    def __post_init__(self):
        e = np.array(self.emission, dtype=float)
        if e.ndim != 2:
            raise InvalidModelError("emission must be a (states x symbols) matrix")
        if not np.all(np.isfinite(e)) or np.any(e < 0):
            raise InvalidModelError("emission has negative or non-finite entries")
        bad = np.abs(e.sum(axis=1) - 1.0) > SUM_TOL
        if np.any(bad):
            raise InvalidModelError(f"emission row of state {int(np.argmax(bad))} does not sum to 1")
        f = np.array(self.next_state)
        n_states, a = e.shape
        if f.shape != (a, n_states):
            raise InvalidModelError("next_state must be total on X x S, shape (symbols, states)")
        if not np.issubdtype(f.dtype, np.integer) and not np.all(np.mod(f, 1) == 0):
            raise InvalidModelError("next_state entries must be state indices")
        f = f.astype(np.int64)
        if np.any(f < 0) or np.any(f >= n_states):
            raise InvalidModelError("next_state maps outside the state set")
        if not 0 <= int(self.initial_state) < n_states:
            raise InvalidModelError("initial_state outside the state set")
        e.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "emission", e)
        object.__setattr__(self, "next_state", f)
        object.__setattr__(self, "initial_state", int(self.initial_state))

    @property
    def alphabet_size(self):
        return self.emission.shape[1]

    @property
    def n_states(self):
        return self.emission.shape[0]

    @property
    def reachable_states(self):
        """States reachable from the initial state through positive-probability emissions."""
        seen = {self.initial_state}
        frontier = [self.initial_state]
        while frontier:
            s = frontier.pop()
            for x in np.flatnonzero(self.emission[s] > 0):
                t = int(self.next_state[x, s])
                if t not in seen:
                    seen.add(t)
                    frontier.append(t)
        return tuple(sorted(seen))

    def _log_prob(self, seqs):
        loge = _log(self.emission)
        state = np.full(seqs.shape[0], self.initial_state)
        lp = np.zeros(seqs.shape[0])
        for i in range(seqs.shape[1]):
            x = seqs[:, i]
            lp = lp + loge[state, x]
            state = self.next_state[x, state]
        return lp

    def enumerate_log_prob(self, n):
        a = self.alphabet_size
        loge = _log(self.emission)
        lp = np.zeros(1)
        st = np.array([self.initial_state])
        xs = np.arange(a)[None, :]
        for _ in range(n):
            lp = (lp[:, None] + loge[st]).ravel()
            st = self.next_state[xs, st[:, None]].ravel()
        return lp

    def _sample(self, n, count, rng):
        a = self.alphabet_size
        cum = np.cumsum(self.emission, axis=1)
        state = np.full(count, self.initial_state)
        out = np.empty((count, n), dtype=np.int64)
        for i in range(n):
            u = rng.random(count)
            x = np.minimum((u[:, None] >= cum[state]).sum(axis=1), a - 1)
            out[:, i] = x
            state = self.next_state[x, state]
        return out

    def to_config(self):
        return {
            "type": "unifilar",
            "emission": self.emission.tolist(),
            "next_state": self.next_state.tolist(),
            "initial_state": self.initial_state,
        }


@dataclass(frozen=True)
class GaussianSource:
    """Memoryless N(mean, std**2) source on the real line."""

    mean: float
    std: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.std)) or self.std <= 0:
            raise InvalidModelError("Gaussian source needs finite mean and std > 0")

    alphabet_size = None

    def log_prob(self, seqs):
        x = np.atleast_2d(np.asarray(seqs, dtype=float))
        z = (x - self.mean) / self.std
        return (-0.5 * z * z - math.log(self.std) - 0.5 * math.log(2 * math.pi)).sum(axis=1)

    def _sample(self, n, count, rng):
        return rng.normal(self.mean, self.std, size=(count, n))

    def to_config(self):
        return {"type": "gaussian", "mean": self.mean, "std": self.std}


@dataclass(frozen=True, eq=False)
class MixedSource(_FiniteModel):
    """Block-level mixture: the component is drawn once per sequence."""

    components: tuple
    weights: np.ndarray

    def __post_init__(self):
        comps = tuple(self.components)
        w = np.array(self.weights, dtype=float)
        if len(comps) != 2 or w.shape != (2,):
            raise InvalidModelError("a mixed source has exactly two components and two weights")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > SUM_TOL:
            raise InvalidModelError("mixture weights must be positive and sum to 1")
        for c in comps:
            if not isinstance(c, (IidSource, MarkovSource)):
                raise InvalidModelError("mixture components must be i.i.d. or Markov sources")
        if comps[0].alphabet_size != comps[1].alphabet_size:
            raise AlphabetMismatchError("mixture components use different alphabets")
        w.setflags(write=False)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", w)

    @property
    def alphabet_size(self):
        return self.components[0].alphabet_size

    def _log_prob(self, seqs):
        parts = [math.log(w) + c._log_prob(seqs) for w, c in zip(self.weights, self.components)]
        return np.logaddexp(*parts)

    def enumerate_log_prob(self, n):
        parts = [math.log(w) + c.enumerate_log_prob(n) for w, c in zip(self.weights, self.components)]
        return np.logaddexp(*parts)

    def _sample(self, n, count, rng):
        labels = rng.choice(2, size=count, p=self.weights)
        out = np.empty((count, n), dtype=np.int64)
        for i, comp in enumerate(self.components):
            rows = np.flatnonzero(labels == i)
            if rows.size:
                out[rows] = comp._sample(n, rows.size, rng)
        return out

    def to_config(self):
        return {
            "type": "mixed",
            "weights": self.weights.tolist(),
            "components": [c.to_config() for c in self.components],
        }


MixedPair = MixedSource


@dataclass(frozen=True)
class StepSpectrumModel:
    """Binary source whose divergence spectrum against the uniform law has three atoms.

    With ``m = 2**(alpha*n)`` sequences of mass ``2**(-2*alpha*n)`` each, one
    sequence of mass ``2**(-3*alpha*n)`` and one carrying the remainder, the
    spectrum (in units of ``log_base``) sits at ``1-3a``, ``1-2a`` and about
    ``1`` with mass exponents ``3a``, ``a`` and ``0``. Nothing is materialised:
    the model exposes only its spectrum and its finite-n atoms.
    """

    alpha: float
    log_base: float = 2.0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise InvalidModelError("step model needs 0 < alpha < 1")
        if not self.log_base > 1:
            raise InvalidModelError("log_base must exceed 1")

    alphabet_size = 2

    @property
    def spectrum(self):
        """(location, mass exponent) pairs of the limiting spectrum, in model units."""
        a = self.alpha
        return ((1 - 3 * a, 3 * a), (1 - 2 * a, a), (1.0, 0.0))

    def atoms(self, n):
        """Exact finite-n atoms as (null mass, alternative mass, count) tuples.

        The alternative is the uniform law ``base**-n``. The first atom is
        the bulk sequence, then the set of ``base**(alpha*n)`` sequences, the
        lone low-mass sequence, and finally all null-impossible sequences.
        """
        b, a = self.log_base, self.alpha
        small = b ** (-a * n)
        tiny = b ** (-3 * a * n)
        unit = b ** (-n)
        size = b ** (a * n)
        total = b ** n
        if size + 2 > total:
            raise InvalidModelError("block length too short for the step construction")
        return [
            (1.0 - small - tiny, unit, 1.0),
            (small, size * unit, size),
            (tiny, unit, 1.0),
            (0.0, 1.0 - (size + 2) * unit, total - size - 2),
        ]

    def _sample_density(self, n, count, rng):
        """Divergence densities (nats) of ``count`` draws from the null at length n."""
        atoms = self.atoms(n)[:3]
        mass = np.array([p for p, _, _ in atoms])
        dens = np.array([math.log(p / (g / c)) / n for p, g, c in atoms])
        idx = np.minimum(np.searchsorted(np.cumsum(mass), rng.random(count), side="right"), 2)
        return dens[idx]

    def to_config(self):
        return {"type": "step", "alpha": self.alpha}


# ---------------------------------------------------------------------------
# Alternative measures that are not probability laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CountingMeasure(_FiniteModel):
    """Counting measure: every sequence of the alphabet has mass 1."""

    alphabet_size: int

    def __post_init__(self):
        if int(self.alphabet_size) < 1:
            raise InvalidModelError("alphabet size must be at least 1")

    @property
    def total_mass_exponent(self):
        return -math.log(self.alphabet_size)

    def _log_prob(self, seqs):
        return np.zeros(seqs.shape[0])

    def enumerate_log_prob(self, n):
        return np.zeros(self.alphabet_size**n)

    def letter_masses(self):
        return np.ones(self.alphabet_size)

    def to_config(self):
        return {"type": "counting"}


@dataclass(frozen=True, eq=False)
class WeightMeasure(_FiniteModel):
    """Product measure with nonnegative per-letter weights."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 1 or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidModelError("weights must be a non-empty vector of nonnegative reals")
        if not np.any(w > 0):
            raise InvalidModelError("weights must not all be zero")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def alphabet_size(self):
        return self.weights.size

    @property
    def total_mass_exponent(self):
        return -math.log(self.weights.sum())

    def _log_prob(self, seqs):
        return _log(self.weights)[seqs].sum(axis=1)

    def enumerate_log_prob(self, n):
        lp = np.zeros(1)
        logw = _log(self.weights)
        for _ in range(n):
            lp = (lp[:, None] + logw[None, :]).ravel()
        return lp

    def letter_masses(self):
        return self.weights

    def to_config(self):
        return {"type": "weights", "w": self.weights.tolist()}


SourceModel = Union[IidSource, MarkovSource, UnifilarSource, GaussianSource, MixedSource, StepSpectrumModel]
AlternativeMeasure = Union[IidSource, MarkovSource, UnifilarSource, GaussianSource, MixedSource,
                           CountingMeasure, WeightMeasure]


def total_mass_exponent(alternative):
    """Exponent of the total mass: liminf of -(1/n) log G_n(X^n), 0 for probability laws."""
    if isinstance(alternative, (CountingMeasure, WeightMeasure)):
        return alternative.total_mass_exponent
    return 0.0


def is_probability(alternative):
    return not isinstance(alternative, (CountingMeasure, WeightMeasure))


# ---------------------------------------------------------------------------
# Paired views used by the large-deviation engines
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MarkovPair:
    """Null kernel P(x2|x1) and alternative per-transition masses on one alphabet.

    ``alt_is_probability`` is False for counting or weighted alternatives, in
    which case ``kernel_alt`` only needs nonnegative entries.
    """

    kernel_null: np.ndarray
    kernel_alt: np.ndarray
    alt_is_probability: bool = True

    def __post_init__(self):
        p = np.array(self.kernel_null, dtype=float)
        q = np.array(self.kernel_alt, dtype=float)
        _check_stochastic(p, "null kernel")
        if q.shape != p.shape:
            raise AlphabetMismatchError("null and alternative kernels differ in shape")
        if self.alt_is_probability:
            _check_stochastic(q, "alternative kernel")
        elif np.any(q < 0) or not np.all(np.isfinite(q)):
            raise InvalidModelError("alternative masses must be nonnegative")
        if not is_irreducible(p > 0):
            raise InvalidModelError("null kernel is not irreducible")
        p.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "kernel_null", p)
        object.__setattr__(self, "kernel_alt", q)

    @property
    def size(self):
        return self.kernel_null.shape[0]

    @property
    def stationary(self):
        return stationary_distribution(self.kernel_null)


@dataclass(frozen=True, eq=False)
class UnifilarPair:
    emission_null: np.ndarray
    emission_alt: np.ndarray
    next_state: np.ndarray
    initial_state: int = 0
    alt_is_probability: bool = True

    def __post_init__(self):
        null = UnifilarSource(self.emission_null, self.next_state, self.initial_state)
        e = np.array(self.emission_alt, dtype=float)
        if e.shape != null.emission.shape:
            raise AlphabetMismatchError("null and alternative emissions differ in shape")
        if np.any(e < 0) or not np.all(np.isfinite(e)):
            raise InvalidModelError("alternative emissions must be nonnegative")
        if self.alt_is_probability and np.any(np.abs(e.sum(axis=1) - 1.0) > SUM_TOL):
            raise InvalidModelError("alternative emission rows must sum to 1")
        e.setflags(write=False)
        object.__setattr__(self, "emission_null", null.emission)
        object.__setattr__(self, "emission_alt", e)
        object.__setattr__(self, "next_state", null.next_state)
        object.__setattr__(self, "initial_state", null.initial_state)

    @property
    def reachable_states(self):
        return UnifilarSource(self.emission_null, self.next_state, self.initial_state).reachable_states


@dataclass(frozen=True)
class GaussianMeanShiftPair:
    mean_null: float
    mean_alt: float
    std_dev: float = 1.0

    def __post_init__(self):
        if not self.std_dev > 0:
            raise InvalidModelError("std_dev must be positive")

    @property
    def a(self):
        """Per-letter divergence (mean_null - mean_alt)^2 / (2 std^2)."""
        return (self.mean_null - self.mean_alt) ** 2 / (2 * self.std_dev**2)


@dataclass(frozen=True, eq=False)
class ExpandedChain:
    """Result of lifting a unifilar pair to a Markov pair on (symbol, state) pairs."""

    pair: MarkovPair
    states: tuple
    weight: np.ndarray
    initial: np.ndarray


def unifilar_expand(pair):
    """Lift a unifilar pair to a Markov chain on the reachable (x, s) pairs.

    The lifted transition (x, s) -> (x', s') has mass 1[s' = f(x, s)] P(x'|s')
    under the null and the analogous P̄ mass under the alternative; the weight
    of the pair (x, s) is log P(x|s)/P̄(x|s), which is also the log ratio of
    every transition entering it.
    """
    e, ebar, f, s1 = pair.emission_null, pair.emission_alt, pair.next_state, pair.initial_state
    start = [(int(x), s1) for x in np.flatnonzero(e[s1] > 0)]
    seen = set(start)
    frontier = list(start)
    while frontier:
        x, s = frontier.pop()
        t = int(f[x, s])
        for y in np.flatnonzero(e[t] > 0):
            nxt = (int(y), t)
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    states = tuple(sorted(seen, key=lambda xs: (xs[1], xs[0])))
    index = {xs: i for i, xs in enumerate(states)}
    m = len(states)
    kn = np.zeros((m, m))
    ka = np.zeros((m, m))
    for i, (x, s) in enumerate(states):
        t = int(f[x, s])
        for y in range(e.shape[1]):
            j = index.get((y, t))
            if j is not None:
                kn[i, j] = e[t, y]
                ka[i, j] = ebar[t, y]
    if not is_irreducible(kn > 0):
        raise DegeneracyError(
            "expanded (symbol, state) chain is not irreducible; the source is asymptotically "
            "a mixture of irreducible pieces, use the Monte Carlo spectrum instead"
        )
    alt_prob = pair.alt_is_probability and bool(np.all(np.abs(ka.sum(axis=1) - 1.0) <= SUM_TOL))
    weight = np.array([_log(e[s, x]) - _log(ebar[s, x]) for x, s in states])
    init = np.zeros(m)
    for x, s in start:
        init[index[(x, s)]] = e[s, x]
    return ExpandedChain(MarkovPair(kn, ka, alt_prob), states, _readonly(weight), _readonly(init))


# ---------------------------------------------------------------------------
# Testing problem
# ---------------------------------------------------------------------------


_LIFTABLE = (IidSource, MarkovSource, CountingMeasure, WeightMeasure)


@dataclass(frozen=True, eq=False)
class TestingProblem:
    """Null source against an alternative measure on the same alphabet."""

    __test__ = False  # keep pytest from collecting this class

    null: object
    alternative: object = None
    log_base: float = math.e

    def __post_init__(self):
        null, alt = self.null, self.alternative
        if not self.log_base > 1:
            raise InvalidModelError("log_base must exceed 1")
        if isinstance(null, StepSpectrumModel):
            if alt is None:
                alt = IidSource([0.5, 0.5])
            elif not (isinstance(alt, IidSource) and np.allclose(alt.probs, 0.5)):
                raise InvalidModelError("the step model is defined against the uniform binary law")
            object.__setattr__(self, "alternative", alt)
            return
        if alt is None:
            raise InvalidModelError("an alternative measure is required")
        if isinstance(null, GaussianSource) or isinstance(alt, GaussianSource):
            if not (isinstance(null, GaussianSource) and isinstance(alt, GaussianSource)):
                raise UnsupportedModelError("Gaussian sources are paired only with Gaussian sources")
            if abs(null.std - alt.std) > 1e-12 * max(null.std, alt.std):
                raise UnsupportedModelError("only equal-variance Gaussian pairs are supported")
            return
        if null.alphabet_size != alt.alphabet_size:
            raise AlphabetMismatchError(
                f"null alphabet has {null.alphabet_size} symbols, alternative has {alt.alphabet_size}"
            )
        if isinstance(null, UnifilarSource):
            if isinstance(alt, UnifilarSource):
                if not (np.array_equal(alt.next_state, null.next_state)
                        and alt.initial_state == null.initial_state):
                    raise InvalidModelError("unifilar null and alternative must share f and s1")
            elif not isinstance(alt, (IidSource, CountingMeasure, WeightMeasure)):
                raise UnsupportedModelError("unsupported alternative for a unifilar null")
        elif isinstance(alt, UnifilarSource):
            raise UnsupportedModelError("a unifilar alternative needs a unifilar null")
        elif isinstance(null, (IidSource, MarkovSource)) and not isinstance(alt, _LIFTABLE):
            raise UnsupportedModelError(
                f"unsupported alternative {type(alt).__name__} for {type(null).__name__} null"
            )

    @property
    def alphabet_size(self):
        return getattr(self.null, "alphabet_size", None)

    def to_config(self):
        cfg = {"version": 1, "null": self.null.to_config(), "alternative": self.alternative.to_config()}
        cfg["log_base"] = "e" if self.log_base == math.e else str(self.log_base).rstrip("0").rstrip(".")
        if isinstance(self.null, StepSpectrumModel) and self.null.log_base != 2.0:
            cfg["null"]["log_base"] = self.null.log_base
        return cfg

    def fingerprint(self):
        blob = json.dumps(self.to_config(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _letter_alt(alt, size):
    if isinstance(alt, IidSource):
        return alt.probs
    return alt.letter_masses()


def markov_pair(problem):
    """MarkovPair view of an i.i.d. or Markov problem (i.i.d. laws become constant rows)."""
    null, alt = problem.null, problem.alternative
    if isinstance(null, IidSource):
        kn = np.tile(null.probs, (null.alphabet_size, 1))
    elif isinstance(null, MarkovSource):
        kn = null.kernel
    else:
        raise UnsupportedModelError(f"no Markov view of a {type(null).__name__} null")
    a = kn.shape[0]
    if isinstance(alt, MarkovSource):
        return MarkovPair(kn, alt.kernel, True)
    if isinstance(alt, IidSource):
        return MarkovPair(kn, np.tile(alt.probs, (a, 1)), True)
    if isinstance(alt, (CountingMeasure, WeightMeasure)):
        return MarkovPair(kn, np.tile(alt.letter_masses(), (a, 1)), False)
    raise UnsupportedModelError(f"no Markov view of a {type(alt).__name__} alternative")


def unifilar_pair(problem):
    null, alt = problem.null, problem.alternative
    if not isinstance(null, UnifilarSource):
        raise UnsupportedModelError("unifilar_pair needs a unifilar null")
    if isinstance(alt, UnifilarSource):
        ebar, prob = alt.emission, True
    else:
        ebar = np.tile(_letter_alt(alt, null.alphabet_size), (null.n_states, 1))
        prob = is_probability(alt)
    return UnifilarPair(null.emission, ebar, null.next_state, null.initial_state, prob)


def gaussian_pair(problem):
    null, alt = problem.null, problem.alternative
    if not isinstance(null, GaussianSource):
        raise UnsupportedModelError("gaussian_pair needs a Gaussian null")
    return GaussianMeanShiftPair(null.mean, alt.mean, null.std)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def divergence_density(problem, x):
    """Per-letter log-likelihood ratio (1/n) log[P(x)/G(x)] in nats.

    Returns +inf when the alternative gives the sequence no mass but the null
    does, -inf in the opposite case. Accepts one sequence or a 2-D batch.
    """
    null, alt = problem.null, problem.alternative
    if isinstance(null, StepSpectrumModel):
        raise UnsupportedModelError("the step model is stored through its spectrum only")
    arr = np.asarray(x)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.shape[1] < 1:
        raise AlphabetMismatchError("sequence must have length >= 1")
    n = arr.shape[1]
    if isinstance(null, GaussianSource):
        lp, lg = null.log_prob(arr), alt.log_prob(arr)
    else:
        arr = _check_sequences(arr, null.alphabet_size)
        lp, lg = null._log_prob(arr), alt._log_prob(arr)
    with np.errstate(invalid="ignore"):
        dens = (lp - lg) / n
    return float(dens[0]) if single else dens


def sample_sequences(model, n, count, seed):
    """``count`` independent length-n sequences from ``model``; deterministic in ``seed``."""
    if n < 1 or count < 1:
        raise ValueError("need n >= 1 and count >= 1")
    if isinstance(model, StepSpectrumModel):
        raise UnsupportedModelError("the step model has no materialised sequences")
    rng = np.random.default_rng(seed)
    return model._sample(int(n), int(count), rng)


def sample_densities(problem, n, count, rng):
    """Divergence densities of ``count`` null draws (nats), using ``rng``."""
    null = problem.null
    if isinstance(null, StepSpectrumModel):
        return null._sample_density(n, count, rng)
    seqs = null._sample(n, count, rng)
    if isinstance(null, GaussianSource):
        lp, lg = null.log_prob(seqs), problem.alternative.log_prob(seqs)
    else:
        lp, lg = null._log_prob(seqs), problem.alternative._log_prob(seqs)
    with np.errstate(invalid="ignore"):
        return (lp - lg) / n


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of the spectrum tail check required by the correct-exponent formula."""

    passed: bool
    reason: str
    witness: object = None


def check_theorem4_assumptions(problem):
    """Sufficient check that the reversed spectrum has exponentially light right tails.

    For finite alphabets the check fails iff some letter (or transition, or
    emission from a reachable state) has null mass 0 and alternative mass > 0.
    Gaussian mean-shift pairs and counting alternatives always pass.
    """
    null, alt = problem.null, problem.alternative
    if isinstance(null, GaussianSource):
        return AssumptionReport(True, "Gaussian spectra have Gaussian tails")
    if isinstance(alt, CountingMeasure):
        return AssumptionReport(True, "counting alternative over a finite alphabet")
    if isinstance(null, StepSpectrumModel):
        return AssumptionReport(
            False,
            "the alternative charges sequences outside the null support",
            witness="sequences outside S_n and {x0, x1}",
        )

    def letters(pn, pa, label):
        bad = np.flatnonzero((pn <= 0) & (pa > 0))
        if bad.size:
            w = int(bad[0])
            return AssumptionReport(
                False, f"{label}: symbol {w} has null mass 0 but alternative mass > 0", witness=w
            )
        return None

    if isinstance(null, MixedSource):
        for i, comp in enumerate(null.components):
            alts = [alt] if not isinstance(alt, MixedSource) else list(alt.components)
            for a in alts:
                rep = check_theorem4_assumptions(TestingProblem(comp, a))
                if not rep.passed:
                    return AssumptionReport(False, f"component {i}: {rep.reason}", rep.witness)
        return AssumptionReport(True, "every component has full support where the alternative does")
    if isinstance(null, UnifilarSource):
        pair = unifilar_pair(problem)
        for s in pair.reachable_states:
            bad = np.flatnonzero((pair.emission_null[s] <= 0) & (pair.emission_alt[s] > 0))
            if bad.size:
                w = (int(bad[0]), s)
                return AssumptionReport(False, f"emission of symbol {w[0]} in state {s} violates support", w)
        return AssumptionReport(True, "emission supports nested")
    if isinstance(null, IidSource) and isinstance(alt, (IidSource, WeightMeasure)):
        rep = letters(null.probs, _letter_alt(alt, null.alphabet_size), "letter")
        return rep or AssumptionReport(True, "null support covers the alternative support")
    pair = markov_pair(problem)
    bad = np.argwhere((pair.kernel_null <= 0) & (pair.kernel_alt > 0))
    if bad.size:
        w = (int(bad[0, 0]), int(bad[0, 1]))
        return AssumptionReport(False, f"transition {w} has null mass 0 but alternative mass > 0", w)
    return AssumptionReport(True, "null transition support covers the alternative support")


def _kl_terms(p, g):
    """sum p log(p/g) over p > 0; +inf when g vanishes on the null support."""
    pos = p > 0
    if np.any(g[pos] <= 0):
        return math.inf
    return float(np.sum(p[pos] * (np.log(p[pos]) - np.log(g[pos]))))


def mean_divergence(problem):
    """Spectral inf-divergence rate in nats for the supported model kinds.

    Returns +inf (with a warning) when the null is not absolutely continuous
    with respect to the alternative.
    """
    null, alt = problem.null, problem.alternative
    if isinstance(null, GaussianSource):
        return gaussian_pair(problem).a
    if isinstance(null, StepSpectrumModel):
        return math.log(null.log_base)
    if isinstance(null, MixedSource):
        alts = alt.components if isinstance(alt, MixedSource) else (alt,)
        return min(mean_divergence(TestingProblem(c, a)) for c in null.components for a in alts)
    if isinstance(null, IidSource) and not isinstance(alt, MarkovSource):
        d = _kl_terms(null.probs, _letter_alt(alt, null.alphabet_size))
    elif isinstance(null, UnifilarSource):
        chain = unifilar_expand(unifilar_pair(problem))
        pi = chain.pair.stationary
        d = math.inf if np.any(~np.isfinite(chain.weight)) else float(pi @ chain.weight)
    else:
        pair = markov_pair(problem)
        p = pair.stationary
        d = sum(p[i] * _kl_terms(pair.kernel_null[i], pair.kernel_alt[i])
                for i in range(pair.size) if p[i] > 0)
    if math.isinf(d):
        warnings.warn("null is not absolutely continuous w.r.t. the alternative", RuntimeWarning,
                      stacklevel=2)
    return d
