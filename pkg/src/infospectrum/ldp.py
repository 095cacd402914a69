"""Cumulant generating functions, rate functions and the eta(R) constructions.

The central object is the log-moment generating function of the per-letter
log-likelihood ratio w = log(P/G) under the null,

    Lambda(theta) = log E_P[exp(theta * w)],

in three flavours: a finite series for memoryless sources, the log spectral
radius of a tilted transition matrix for Markov chains (and unifilar sources
after state expansion), and a closed form for equal-variance Gaussians.  Its
Legendre transform is the rate function I, and eta(R) is the left branch of I.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

from .errors import (
    DegeneracyError,
    DomainError,
    InfeasibleError,
    InvalidModelError,
    NumericalError,
    SingularSupportError,
    UnsupportedModelError,
)
from .models import (
    CountingMeasure,
    ExpandedChain,
    FiniteDistribution,
    GaussianSource,
    IidSource,
    MarkovPair,
    MarkovSource,
    MixedSource,
    StepSpectrumModel,
    UnifilarPair,
    UnifilarSource,
    WeightMeasure,
    gaussian_pair,
    is_irreducible,
    markov_pair,
    total_mass_exponent,
    unifilar_expand,
    unifilar_pair,
)

# Largest |theta| * span(w) allowed for the Markov engine before exp() under/overflows.
_EXP_SPAN_CAP = 600.0
_POWER_TOL = 1e-13
_POWER_MAXITER = 200


def _vectorize(fun, theta):
    t = np.asarray(theta, dtype=float)
    out = fun(t.reshape(-1))
    return float(out[0]) if t.ndim == 0 else out.reshape(t.shape)


# ---------------------------------------------------------------------------
# CGF evaluators
# ---------------------------------------------------------------------------


class CgfEvaluator:
    """Lambda(theta), its derivatives and the support of the log-ratio spectrum.

    Subclasses implement ``_value``, ``_derivative`` and ``_second`` on 1-D
    arrays. ``support`` is the interval (R_min, R_max) of limiting values of
    Lambda'; ``rate_at_min`` is the rate function at the lower endpoint, i.e.
    lim theta*Lambda'(theta) - Lambda(theta) as theta -> -inf.
    """

    method = "abstract"
    theta_domain = (-math.inf, math.inf)
    support = (-math.inf, math.inf)
    rate_at_min = math.inf
    rate_at_max = math.inf

    def value(self, theta):
        return _vectorize(self._value, theta)

    def derivative(self, theta):
        return _vectorize(self._derivative, theta)

    def second_derivative(self, theta):
        return _vectorize(self._second, theta)

    def tilt_rate(self, theta):
        """theta * Lambda'(theta) - Lambda(theta): the rate at R = Lambda'(theta)."""
        t = np.asarray(theta, dtype=float)
        return t * self.derivative(t) - self.value(t)

    @property
    def mean(self):
        return float(self.derivative(0.0))

    @property
    def degenerate(self):
        lo, hi = self.support
        return math.isfinite(lo) and hi - lo <= 1e-12 * max(1.0, abs(lo))


class IidCgf(CgfEvaluator):
    """Series form log sum_i p_i (p_i/g_i)^theta over the null support."""

    method = "series-sum"

    def __init__(self, probs, alt_masses):
        p = np.asarray(probs, dtype=float)
        g = np.asarray(alt_masses, dtype=float)
        if p.shape != g.shape:
            raise InvalidModelError("null and alternative letter masses differ in length")
        pos = p > 0
        if not np.any(pos):
            raise InvalidModelError("null has empty support")
        bad = np.flatnonzero(pos & (g <= 0))
        if bad.size:
            raise SingularSupportError(
                f"symbol {int(bad[0])} has null mass > 0 but alternative mass 0", witness=int(bad[0])
            )
        self.probs, self.alt_masses = p, g
        self.letters = np.flatnonzero(pos)
        self._logp = np.log(p[pos])
        self._w = self._logp - np.log(g[pos])
        w = self._w
        self.support = (float(w.min()), float(w.max()))
        tol = 1e-12 * max(1.0, float(np.abs(w).max()))
        self.rate_at_min = float(-logsumexp(self._logp[w <= w.min() + tol]))
        self.rate_at_max = float(-logsumexp(self._logp[w >= w.max() - tol]))

    @property
    def log_ratio(self):
        return self._w

    def _logits(self, t):
        return self._logp[None, :] + t[:, None] * self._w[None, :]

    def _value(self, t):
        return logsumexp(self._logits(t), axis=1)

    def _weights(self, t):
        lg = self._logits(t)
        q = np.exp(lg - lg.max(axis=1, keepdims=True))
        return q / q.sum(axis=1, keepdims=True)

    def _derivative(self, t):
        return self._weights(t) @ self._w

    def _second(self, t):
        q = self._weights(t)
        m = q @ self._w
        return q @ (self._w**2) - m * m


class GaussianCgf(CgfEvaluator):
    """Lambda(theta) = a(theta + theta^2) for an equal-variance mean shift with divergence a."""

    method = "gaussian-closed-form"

    def __init__(self, a):
        if not a >= 0:
            raise InvalidModelError("a must be nonnegative")
        self.a = float(a)
        if self.a == 0:
            self.support = (0.0, 0.0)
            self.rate_at_min = self.rate_at_max = 0.0

    def _value(self, t):
        return self.a * (t + t * t)

    def _derivative(self, t):
        return self.a * (1 + 2 * t)

    def _second(self, t):
        return np.full_like(t, 2 * self.a)


def _karp_mean_cycle(weights, mask, maximize=False):
    """Minimum (or maximum) cycle mean of a strongly connected weighted digraph."""
    w = np.where(mask, -weights if maximize else weights, np.inf)
    m = w.shape[0]
    d = np.full((m + 1, m), np.inf)
    d[0, 0] = 0.0
    for k in range(m):
        d[k + 1] = np.min(d[k][:, None] + w, axis=0)
    best = np.inf
    for v in range(m):
        if not np.isfinite(d[m, v]):
            continue
        ks = np.arange(m)
        fin = np.isfinite(d[:m, v])
        val = np.max((d[m, v] - d[:m, v][fin]) / (m - ks[fin]))
        best = min(best, val)
    return -best if maximize else best


def _critical_rate(weights, mask, log_kernel, mean, maximize=False):
    """-log spectral radius of the kernel restricted to cycles of extreme mean weight."""
    sign = -1.0 if maximize else 1.0
    red = np.where(mask, sign * (weights - mean), np.inf)
    m = red.shape[0]
    d = np.zeros(m)
    for _ in range(m + 1):
        d = np.minimum(d, np.min(d[:, None] + red, axis=0))
    reduced = red + d[:, None] - d[None, :]
    scale = max(1.0, float(np.max(np.abs(weights[mask]))))
    crit = mask & (reduced <= 1e-9 * scale)
    k = np.where(crit, np.exp(log_kernel), 0.0)
    rho = float(np.max(np.abs(np.linalg.eigvals(k))))
    return -math.log(rho) if rho > 0 else math.inf


class MarkovCgf(CgfEvaluator):
    """Log spectral radius of the tilted matrix A_theta = P * (P/G)^theta.

    The Perron root is found by shifted inverse power iteration with
    Collatz-Wielandt bounds as the stopping rule; Lambda' comes from the
    left and right Perron vectors, Lambda'' from central differences of
    Lambda'.
    """

    method = "tilted-kernel-eigenvalue"

    def __init__(self, pair):
        if isinstance(pair, ExpandedChain):
            pair = pair.pair
        elif isinstance(pair, UnifilarPair):
            pair = unifilar_expand(pair).pair
        if not isinstance(pair, MarkovPair):
            raise UnsupportedModelError("cgf_markov needs a MarkovPair or a unifilar pair")
        p, g = pair.kernel_null, pair.kernel_alt
        mask = p > 0
        bad = np.argwhere(mask & (g <= 0))
        if bad.size:
            w = (int(bad[0, 0]), int(bad[0, 1]))
            raise SingularSupportError(f"transition {w} has null mass > 0 but alternative mass 0", w)
        if not is_irreducible(mask):
            raise DegeneracyError("tilted kernel is reducible")
        self.pair = pair
        self.mask = mask
        with np.errstate(divide="ignore"):
            self._logp = np.where(mask, np.log(p), -np.inf)
            self._w = np.where(mask, np.log(p) - np.log(np.where(mask, g, 1.0)), 0.0)
        lo = _karp_mean_cycle(self._w, mask)
        hi = _karp_mean_cycle(self._w, mask, maximize=True)
        self.support = (float(lo), float(hi))
        span = float(self._w[mask].max() - self._w[mask].min())
        cap = _EXP_SPAN_CAP / span if span > 0 else math.inf
        self.theta_domain = (-cap, cap)
        if self.degenerate:
            self.rate_at_min = self.rate_at_max = 0.0
        else:
            self.rate_at_min = _critical_rate(self._w, mask, self._logp, lo)
            self.rate_at_max = _critical_rate(self._w, mask, self._logp, hi, maximize=True)

    def _balanced(self, t):
        """Log tilted matrices minus their max cycle mean, with max-plus potentials.

        With L the log-entries, lam the maximum cycle mean and red = L - lam,
        the potentials y (longest path into a critical node) and z (longest
        path out of one) give similarities exp(red_ij - y_i + y_j) and
        exp(red_ij + z_i - z_j) whose entries are at most 1, with a 1 in every
        row (respectively column). Their Perron vectors stay within modest
        ratios even when the raw entries span hundreds of e-folds.
        """
        lg = self._logp[None] + t[:, None, None] * self._w[None]
        nb, m, _ = lg.shape
        # Karp's recursion from a virtual source joined to every state
        d = np.full((m + 1, nb, m), -np.inf)
        d[0] = 0.0
        for k in range(m):
            d[k + 1] = np.max(d[k][:, :, None] + lg, axis=1)
        ks = np.arange(m)[:, None, None]
        with np.errstate(invalid="ignore"):
            means = (d[m][None] - d[:m]) / (m - ks)
        means = np.where(np.isfinite(d[:m]), means, np.inf)
        lam = np.max(np.where(np.isfinite(d[m]), means.min(axis=0), -np.inf), axis=1)
        red = lg - lam[:, None, None]
        # max-plus transitive closure (longest paths of length >= 1)
        closure = red.copy()
        for k in range(m):
            closure = np.maximum(closure, closure[:, :, k, None] + closure[:, None, k, :])
        diag = np.diagonal(closure, axis1=1, axis2=2)
        scale = 1e-9 * np.maximum(1.0, np.abs(lg).max(axis=(1, 2)))
        critical = diag >= -scale[:, None]
        into = np.where(critical[:, None, :], closure, -np.inf)
        y = np.max(into, axis=2)
        out = np.where(critical[:, :, None], closure, -np.inf)
        z = np.max(out, axis=1)
        return red, lam, y, z

    @staticmethod
    def _perron_vector(b, transpose=False):
        """Right Perron vector of each irreducible nonnegative matrix in the stack ``b``.

        For sigma above the Perron root, (sigma I - b)^-1 is a positive matrix
        with the same Perron vector, so the iteration also handles periodic chains.
        """
        if transpose:
            b = np.swapaxes(b, 1, 2)
        n, m, _ = b.shape
        eye = np.eye(m)[None]
        # balanced inputs have Perron vectors of order one
        v = np.full((n, m), 1.0 / m)
        gap = np.inf
        for it in range(_POWER_MAXITER):
            bv = np.einsum("bij,bj->bi", b, v)
            ratio = bv / v
            lo, hi = ratio.min(axis=1), ratio.max(axis=1)
            gap = np.max((hi - lo) / hi)
            if gap <= _POWER_TOL:
                return v
            sigma = hi + np.maximum(hi - lo, 1e-15 * hi)
            x = np.linalg.solve(sigma[:, None, None] * eye - b, v[:, :, None])[:, :, 0]
            x = np.abs(x)
            v = x / x.sum(axis=1, keepdims=True)
            if not np.all(np.isfinite(v)) or np.any(v <= 0):
                break
        raise NumericalError(
            "power iteration for the Perron root did not converge",
            {"iterations": it + 1, "relative_bound_gap": float(gap)},
        )

    def perron(self, theta):
        """Lambda(theta) and the log pair law log(u_i A_ij v_j / u A v) for a 1-D theta array."""
        t = np.atleast_1d(np.asarray(theta, dtype=float))
        lo, hi = self.theta_domain
        if np.any(t < lo) or np.any(t > hi):
            raise DomainError("theta outside the numerically safe range", interval=self.theta_domain)
        red, lam, y, z = self._balanced(t)
        with np.errstate(invalid="ignore"):
            right = np.exp(np.minimum(red - y[:, :, None] + y[:, None, :], 0.0))
            left = np.exp(np.minimum(red + z[:, :, None] - z[:, None, :], 0.0))
        right = np.where(self.mask[None], right, 0.0)
        left = np.where(self.mask[None], left, 0.0)
        log_v = np.log(self._perron_vector(right)) + y
        log_u = np.log(self._perron_vector(left, transpose=True)) + z
        log_pair = log_u[:, :, None] + red + log_v[:, None, :]
        log_num = logsumexp(log_pair, axis=(1, 2))
        log_den = logsumexp(log_u + log_v, axis=1)
        return lam + log_num - log_den, log_pair - log_num[:, None, None]

    def _value(self, t):
        return self.perron(t)[0]

    def _derivative(self, t):
        _, log_pair = self.perron(t)
        return np.einsum("bij,ij->b", np.exp(log_pair), self._w)

    def _second(self, t, h=1e-5):
        return (self._derivative(t + h) - self._derivative(t - h)) / (2 * h)

    def tilted_pair(self, theta):
        """Pair law Q(x1, x2) = u_i A_ij v_j / (u A v) of the tilted chain; it is stationary."""
        _, log_pair = self.perron(np.array([float(theta)]))
        return np.exp(log_pair[0])

    def conditional_divergence(self, q):
        """D(Q || P | q) for a pair law Q whose row marginal is q."""
        ref = q.sum(axis=1)[:, None] * self.pair.kernel_null
        pos = q > 0
        return float(np.sum(q[pos] * (np.log(q[pos]) - np.log(ref[pos]))))


def _alt_letter_masses(alt):
    if isinstance(alt, IidSource):
        return alt.probs
    if isinstance(alt, (CountingMeasure, WeightMeasure)):
        return alt.letter_masses()
    raise UnsupportedModelError(f"no per-letter masses for {type(alt).__name__}")


def cgf_iid(problem):
    """Series CGF for a memoryless null against a memoryless alternative measure."""
    if not isinstance(problem.null, IidSource):
        raise UnsupportedModelError("cgf_iid needs an i.i.d. null")
    return IidCgf(problem.null.probs, _alt_letter_masses(problem.alternative))


def cgf_markov(pair):
    return MarkovCgf(pair)


def cgf_for(problem):
    """Pick the CGF engine matching the problem's model kind."""
    null, alt = problem.null, problem.alternative
    if isinstance(null, GaussianSource):
        return GaussianCgf(gaussian_pair(problem).a)
    if isinstance(null, IidSource) and not isinstance(alt, MarkovSource):
        return cgf_iid(problem)
    if isinstance(null, (IidSource, MarkovSource)):
        return MarkovCgf(markov_pair(problem))
    if isinstance(null, UnifilarSource):
        return MarkovCgf(unifilar_expand(unifilar_pair(problem)))
    raise UnsupportedModelError(f"no CGF engine for a {type(null).__name__} null")


# ---------------------------------------------------------------------------
# Legendre transform
# ---------------------------------------------------------------------------


def _bisect_increasing(fun, targets, lo_cap, hi_cap, lo0=-1.5, hi0=0.5, maxiter=200):
    """Vectorised root of an increasing function: returns theta with fun(theta) ~ target.

    Brackets grow geometrically from [lo0, hi0] until they straddle the target
    or hit the caps. Returns (theta, hit_low_cap, hit_high_cap).
    """
    x = np.asarray(targets, dtype=float)
    lo = np.full(x.shape, max(lo0, lo_cap))
    hi = np.full(x.shape, min(hi0, hi_cap))
    low_sat = np.zeros(x.shape, bool)
    high_sat = np.zeros(x.shape, bool)
    for _ in range(64):
        grow = (fun(lo) > x) & ~low_sat
        if not np.any(grow):
            break
        at_cap = lo <= lo_cap
        low_sat |= grow & at_cap
        lo = np.where(grow & ~at_cap, np.maximum(2 * lo, lo_cap), lo)
    for _ in range(64):
        grow = (fun(hi) < x) & ~high_sat
        if not np.any(grow):
            break
        at_cap = hi >= hi_cap
        high_sat |= grow & at_cap
        hi = np.where(grow & ~at_cap, np.minimum(2 * hi, hi_cap), hi)
    # Illinois-modified regula falsi inside the bracket
    flo, fhi = fun(lo) - x, fun(hi) - x
    last = np.zeros(x.shape, int)
    theta = 0.5 * (lo + hi)
    best = np.full(x.shape, np.inf)
    tolf = 1e-15 * np.maximum(1.0, np.abs(x))
    for it in range(maxiter):
        denom = fhi - flo
        with np.errstate(invalid="ignore", divide="ignore"):
            s = lo - flo * (hi - lo) / denom
        bad = ~((s > lo) & (s < hi)) | (it % 8 == 7)
        s = np.where(bad, 0.5 * (lo + hi), s)
        fs = fun(s) - x
        better = np.abs(fs) < best
        theta = np.where(better, s, theta)
        best = np.where(better, np.abs(fs), best)
        up = fs < 0
        fhi = np.where(up & (last == 1), 0.5 * fhi, fhi)
        flo = np.where(~up & (last == -1), 0.5 * flo, flo)
        lo, flo = np.where(up, s, lo), np.where(up, fs, flo)
        hi, fhi = np.where(up, hi, s), np.where(up, fhi, fs)
        last = np.where(up, 1, -1)
        width = hi - lo
        if np.all((best <= tolf) | (width <= 4e-16 * np.maximum(1.0, np.abs(lo) + np.abs(hi)))):
            break
    theta = np.where(low_sat, lo, np.where(high_sat, hi, theta))
    return theta, low_sat, high_sat


def solve_theta(cgf, x):
    """theta with Lambda'(theta) = x, vectorised; endpoints of the support map to -/+inf."""
    x = np.asarray(x, dtype=float)
    lo_cap, hi_cap = cgf.theta_domain
    lo_cap = max(lo_cap, -1e8)
    hi_cap = min(hi_cap, 1e8)
    theta, low_sat, high_sat = _bisect_increasing(cgf.derivative, x, lo_cap, hi_cap)
    r_min, r_max = cgf.support
    theta = np.where(x <= r_min, -np.inf, np.where(x >= r_max, np.inf, theta))
    return theta, low_sat, high_sat


def _rate_values(cgf, x):
    """I(x) on an array; +inf outside the closed support."""
    x = np.asarray(x, dtype=float)
    r_min, r_max = cgf.support
    out = np.full(x.shape, np.inf)
    if cgf.degenerate:
        out[np.abs(x - r_min) <= 1e-12 * max(1.0, abs(r_min))] = 0.0
        return out, np.where(np.isfinite(out), 0.0, np.nan)
    inside = (x > r_min) & (x < r_max)
    thetas = np.full(x.shape, np.nan)
    if np.any(inside):
        t, low_sat, high_sat = solve_theta(cgf, x[inside])
        vals = t * x[inside] - cgf.value(t)
        # saturated brackets: the supremum is approached at the cap
        vals = np.where(low_sat, cgf.rate_at_min, vals)
        vals = np.where(high_sat, cgf.rate_at_max, vals)
        out[inside] = np.maximum(vals, 0.0)
        thetas[inside] = t
    out[x == r_min] = cgf.rate_at_min
    thetas[x == r_min] = -np.inf
    out[x == r_max] = cgf.rate_at_max
    thetas[x == r_max] = np.inf
    return out, thetas


def legendre(cgf, x):
    """Legendre transform I(x) = sup_theta (theta x - Lambda(theta)) and its maximiser."""
    x = float(x)
    r_min, r_max = cgf.support
    if cgf.degenerate:
        return (0.0, 0.0) if abs(x - r_min) <= 1e-12 * max(1.0, abs(r_min)) else (math.inf, math.nan)
    if x < r_min or x > r_max:
        raise DomainError(f"x = {x} lies outside the effective domain", interval=(r_min, r_max))
    vals, thetas = _rate_values(cgf, np.array([x]))
    return float(vals[0]), float(thetas[0])


@dataclass(frozen=True)
class RateFunction:
    """Rate function I(x) = sup_theta (theta x - Lambda(theta)) of a CGF evaluator."""

    cgf: CgfEvaluator

    @property
    def domain(self):
        return self.cgf.support

    @property
    def minimizer(self):
        return self.cgf.mean

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        vals, _ = _rate_values(self.cgf, x.reshape(-1))
        return float(vals[0]) if x.ndim == 0 else vals.reshape(x.shape)

    def argmax(self, x):
        x = np.asarray(x, dtype=float)
        _, thetas = _rate_values(self.cgf, x.reshape(-1))
        return float(thetas[0]) if x.ndim == 0 else thetas.reshape(x.shape)


def tilted_distribution(cgf, R):
    """Exponential tilt Q_R(i) proportional to p_i^(1+theta) g_i^(-theta) with mean log-ratio R."""
    if not isinstance(cgf, IidCgf):
        raise UnsupportedModelError("tilted_distribution is defined for the i.i.d. series CGF")
    _, theta = legendre(cgf, R)
    q = np.zeros(cgf.probs.size)
    if math.isinf(theta):
        w = cgf.log_ratio
        end = w.min() if theta < 0 else w.max()
        sel = np.abs(w - end) <= 1e-12 * max(1.0, abs(end))
        sub = np.where(sel, cgf._logp, -np.inf)
    elif math.isnan(theta):
        sub = cgf._logp
    else:
        sub = cgf._logits(np.array([theta]))[0]
    sub = np.exp(sub - sub.max())
    q[cgf.letters] = sub / sub.sum()
    return FiniteDistribution(q)


# ---------------------------------------------------------------------------
# Constrained I-projection
# ---------------------------------------------------------------------------


_SENSES = {"<=": "<=", "≤": "<=", ">=": ">=", "≥": ">=", "=": "==", "==": "=="}


@dataclass(frozen=True, eq=False)
class IProjection:
    """Minimiser of D(Q||base) under linear constraints."""

    q: np.ndarray
    divergence: float
    active: tuple
    reference_divergence: float = None


def _tilt_project(log_base, coeffs, targets, tol=1e-10, maxiter=200):
    """Batched equality-constrained I-projection by damped Newton on the dual.

    Minimises F(t) = log sum_x base(x) exp(t . c(x)) - t . b for each row b of
    ``targets``. Returns (q, divergence, converged).
    """
    c = np.atleast_2d(coeffs)
    b = np.atleast_2d(targets)
    nb, k = b.shape
    t = np.zeros((nb, k))

    def stats(t):
        lg = log_base[None, :] + t @ c
        lz = logsumexp(lg, axis=1)
        q = np.exp(lg - lz[:, None])
        return lz, q

    lz, q = stats(t)
    f = lz - np.einsum("bk,bk->b", t, b)
    conv = np.zeros(nb, bool)
    for _ in range(maxiter):
        mean = q @ c.T
        grad = mean - b
        conv = np.max(np.abs(grad), axis=1) <= tol
        if np.all(conv):
            break
        centred = c[None, :, :] - mean[:, :, None]
        hess = np.einsum("bx,bkx,blx->bkl", q, centred, centred)
        hess += 1e-300 * np.eye(k)[None]
        try:
            step = -np.linalg.solve(hess, grad[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            step = -grad
        step = np.where(conv[:, None], 0.0, step)
        step = np.where(np.isfinite(step), step, 0.0)
        alpha = np.ones(nb)
        slope = np.einsum("bk,bk->b", grad, step)
        accepted = conv.copy()
        new_t, new_lz, new_q, new_f = t.copy(), lz.copy(), q.copy(), f.copy()
        for _ in range(60):
            trial = t + alpha[:, None] * step
            tlz, tq = stats(trial)
            tf = tlz - np.einsum("bk,bk->b", trial, b)
            armijo = tf <= f + 1e-4 * alpha * slope + 1e-15 * np.abs(f)
            # near the optimum F is flat to rounding, so a smaller gradient also counts there
            flat = tf <= f + 1e-12 * np.maximum(1.0, np.abs(f))
            shrinks = flat & (np.max(np.abs(tq @ c.T - b), axis=1) < np.max(np.abs(grad), axis=1))
            ok = ~accepted & (armijo | shrinks)
            new_t[ok], new_lz[ok], new_q[ok], new_f[ok] = trial[ok], tlz[ok], tq[ok], tf[ok]
            accepted |= ok
            if np.all(accepted):
                break
            alpha = np.where(accepted, alpha, alpha / 2)
        if np.array_equal(new_t, t):
            break
        t, lz, q, f = new_t, new_lz, new_q, new_f
    mean = q @ c.T
    conv = np.max(np.abs(mean - b), axis=1) <= max(tol, 1e-9)
    div = np.einsum("bk,bk->b", t, mean) - lz
    return q, np.maximum(div, 0.0), conv


def _normalise_constraints(constraints, size):
    out = []
    for coeffs, bound, sense in constraints:
        c = np.asarray(coeffs, dtype=float)
        if c.shape != (size,):
            raise InvalidModelError("constraint coefficients must match the alphabet size")
        if sense not in _SENSES:
            raise InvalidModelError(f"unknown constraint sense {sense!r}")
        out.append((c, float(bound), _SENSES[sense]))
    return out


def _satisfies(q, cons, tol=1e-9):
    for c, b, s in cons:
        v = float(q @ c)
        if s == "<=" and v > b + tol:
            return False
        if s == ">=" and v < b - tol:
            return False
        if s == "==" and abs(v - b) > tol:
            return False
    return True


def _lp_feasible(cons, size):
    a_ub, b_ub, a_eq, b_eq = [], [], [np.ones(size)], [1.0]
    for c, b, s in cons:
        if s == "<=":
            a_ub.append(c)
            b_ub.append(b)
        elif s == ">=":
            a_ub.append(-c)
            b_ub.append(-b)
        else:
            a_eq.append(c)
            b_eq.append(b)
    res = linprog(
        np.zeros(size),
        A_ub=np.array(a_ub) if a_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(a_eq),
        b_eq=np.array(b_eq),
        bounds=[(0, None)] * size,
        method="highs",
    )
    return res.status == 0


def _kl(q, p):
    pos = q > 0
    if np.any(p[pos] <= 0):
        return math.inf
    return float(np.sum(q[pos] * (np.log(q[pos]) - np.log(p[pos]))))


def constrained_i_projection(base, constraints=(), objective_ref=None):
    """Minimise D(Q||base) over distributions Q meeting at most two linear constraints.

    ``constraints`` is a sequence of ``(coefficients, bound, sense)`` with sense
    one of ``"<="``, ``">="``, ``"=="``. The minimiser lies in the exponential
    family base * exp(t . c); each subset of constraints that could bind is
    solved as an equality problem, and the best candidate meeting all
    constraints is returned. ``objective_ref`` only adds D(Q*||ref) to the result.
    """
    p = np.asarray(base, dtype=float)
    FiniteDistribution(p)
    cons = _normalise_constraints(constraints, p.size)
    if len(cons) > 2:
        raise InvalidModelError("at most two linear constraints are supported")
    support = np.flatnonzero(p > 0)
    sub_cons = [(c[support], b, s) for c, b, s in cons]
    if not _lp_feasible(sub_cons, support.size):
        raise InfeasibleError("constraints admit no distribution on the support of base")
    log_base = np.log(p[support])
    eq_idx = [i for i, (_, _, s) in enumerate(cons) if s == "=="]
    ineq_idx = [i for i, (_, _, s) in enumerate(cons) if s != "=="]
    best = None
    for extra in itertools.chain.from_iterable(
        itertools.combinations(ineq_idx, k) for k in range(len(ineq_idx) + 1)
    ):
        active = tuple(sorted(eq_idx + list(extra)))
        if not active:
            q_sub, d = np.exp(log_base), 0.0
        else:
            c = np.array([sub_cons[i][0] for i in active])
            aff = np.vstack([c, np.ones(support.size)])
            if np.linalg.matrix_rank(aff, tol=1e-10) < len(active) + 1:
                continue
            b = np.array([[sub_cons[i][1] for i in active]])
            q_all, d_all, ok = _tilt_project(log_base, c, b)
            if not ok[0]:
                continue
            q_sub, d = q_all[0], float(d_all[0])
        if not _satisfies(q_sub, sub_cons):
            continue
        if best is None or d < best[1] - 1e-15:
            best = (q_sub, d, active)
    if best is None:
        raise NumericalError("no candidate active set produced a feasible projection")
    q = np.zeros(p.size)
    q[support] = best[0]
    q /= q.sum()
    ref = None if objective_ref is None else _kl(q, np.asarray(objective_ref, dtype=float))
    return IProjection(q, best[1], best[2], ref)


# ---------------------------------------------------------------------------
# eta(R)
# ---------------------------------------------------------------------------


class EtaFunction:
    """eta(R): exponential rate of Pr{divergence density <= R}.

    Common attributes: ``threshold`` (the point above which eta vanishes),
    ``spectrum_min`` (below it eta is +inf), ``limit_exists``,
    ``kappa_lower`` (total-mass exponent of the alternative) and ``base``
    (the logarithm base of R and eta values).
    """

    kind = "abstract"
    base = math.e
    limit_exists = True
    kappa_lower = 0.0
    threshold = 0.0
    spectrum_min = -math.inf

    def __call__(self, R):
        r = np.asarray(R, dtype=float)
        out = self._eval(r.reshape(-1))
        return float(out[0]) if r.ndim == 0 else out.reshape(r.shape)

    def _eval(self, r):
        raise NotImplementedError


class RateEta(EtaFunction):
    """eta(R) = I(R) left of the mean, 0 right of it."""

    kind = "from-rate-function"

    def __init__(self, rate, kappa_lower=0.0):
        self.rate = rate
        self.cgf = rate.cgf
        self.threshold = self.cgf.mean
        self.spectrum_min = self.cgf.support[0]
        self.kappa_lower = kappa_lower

    def _eval(self, r):
        out = np.zeros(r.shape)
        left = r < self.threshold
        if np.any(left):
            out[left] = self.rate(r[left])
        return out


class PiecewiseEta(EtaFunction):
    """Right-continuous step function: +inf below the first breakpoint.

    ``pieces`` is a sequence of (left endpoint, value) with increasing
    endpoints, non-increasing values, and a last value of 0.
    """

    kind = "piecewise-constant"

    def __init__(self, pieces, base=math.e, kappa_lower=0.0):
        pts = tuple((float(b), float(v)) for b, v in pieces)
        if not pts or pts[-1][1] != 0.0:
            raise InvalidModelError("the last piece of eta must have value 0")
        for (b0, v0), (b1, v1) in zip(pts, pts[1:]):
            if not (b1 > b0 and v1 <= v0):
                raise InvalidModelError("pieces need increasing endpoints and non-increasing values")
        self.pieces = pts
        self.base = base
        self.kappa_lower = kappa_lower
        self.threshold = pts[-1][0]
        self.spectrum_min = pts[0][0]

    @property
    def breakpoints(self):
        return tuple(b for b, _ in self.pieces)

    def _eval(self, r):
        bps = np.array(self.breakpoints)
        vals = np.array([v for _, v in self.pieces])
        idx = np.searchsorted(bps, r, side="right") - 1
        return np.where(idx < 0, np.inf, vals[np.maximum(idx, 0)])


class GaussianEta(EtaFunction):
    """Closed form (R - a)^2 / (4a) for R <= a, 0 beyond."""

    kind = "gaussian-closed-form"

    def __init__(self, a):
        if not a > 0:
            raise InvalidModelError("closed-form Gaussian eta needs a > 0")
        self.a = float(a)
        self.threshold = self.a

    def _eval(self, r):
        return np.where(r <= self.a, (r - self.a) ** 2 / (4 * self.a), 0.0)


def eta_from_rate(rate, kappa_lower=0.0):
    """eta built from a rate function; a point spectrum becomes a single step."""
    if rate.cgf.degenerate:
        return PiecewiseEta([(rate.cgf.support[0], 0.0)], kappa_lower=kappa_lower)
    return RateEta(rate, kappa_lower)


def eta_step(model):
    """Exact three-step eta of the step-spectrum model, in the model's log base."""
    if not isinstance(model, StepSpectrumModel):
        raise InvalidModelError("eta_step needs a StepSpectrumModel")
    a = model.alpha
    return PiecewiseEta([(1 - 3 * a, 3 * a), (1 - 2 * a, a), (1.0, 0.0)], base=model.log_base)


class ProjectionEta(EtaFunction):
    """eta for a two-component memoryless mixture, evaluated by I-projections.

    A type Q is attributed to the component it is closer to in divergence;
    for component i the rate is min D(Q||P_i) over that region intersected
    with {sum Q log(P_i/G) <= R}; eta is the smaller of the two.
    """

    kind = "i-projection"

    def __init__(self, components, alternative):
        self.components = [np.asarray(c, dtype=float) for c in components]
        g = np.asarray(alternative, dtype=float)
        for k, p in enumerate(self.components + [g]):
            if np.any(p <= 0):
                who = "alternative" if k == 2 else f"component {k}"
                raise SingularSupportError(f"{who} lacks full support", witness=int(np.argmin(p)))
        self.alternative = g
        p1, p2 = self.components
        self._split = np.log(p1) - np.log(p2)
        self._same = bool(np.allclose(self._split, 0.0, atol=1e-14))
        self._parts = []
        for i, p in enumerate(self.components):
            sign = 1.0 if i == 0 else -1.0
            ck = np.log(p) - np.log(g)
            mean = float(p @ ck)
            lo = self._lp_min(ck, sign)
            nu_q = nu_val = None
            both = None
            if not self._same:
                c_nu = sign * self._split
                qn, dn, ok = _tilt_project(np.log(p), c_nu[None, :], np.zeros((1, 1)))
                if ok[0]:
                    nu_q, nu_val = qn[0], float(dn[0])
                aff = np.vstack([c_nu, ck, np.ones(p.size)])
                if np.linalg.matrix_rank(aff, tol=1e-10) == 3:
                    both = (self._lp_range(c_nu, ck))
            self._parts.append(dict(p=p, sign=sign, ck=ck, mean=mean, lo=lo, nu_q=nu_q,
                                    nu_val=nu_val, both=both))
        self.threshold = min(part["mean"] for part in self._parts)
        self.spectrum_min = min(part["lo"] for part in self._parts)

    def _lp_min(self, ck, sign):
        size = ck.size
        a_ub = None if self._same else -(sign * self._split)[None, :]
        b_ub = None if self._same else np.zeros(1)
        res = linprog(ck, A_ub=a_ub, b_ub=b_ub, A_eq=np.ones((1, size)), b_eq=[1.0],
                      bounds=[(0, None)] * size, method="highs")
        if res.status != 0:
            raise InfeasibleError("component region is empty")
        return float(res.fun)

    def _lp_range(self, c_nu, ck):
        size = ck.size
        a_eq = np.vstack([np.ones(size), c_nu])
        out = []
        for sgn in (1.0, -1.0):
            res = linprog(sgn * ck, A_eq=a_eq, b_eq=[1.0, 0.0], bounds=[(0, None)] * size,
                          method="highs")
            if res.status != 0:
                return None
            out.append(sgn * float(res.fun))
        return tuple(out)

    def _component(self, part, r):
        p, ck, sign = part["p"], part["ck"], part["sign"]
        best = np.full(r.shape, np.inf)
        best[r >= part["mean"]] = 0.0
        if part["nu_q"] is not None:
            feas = part["nu_q"] @ ck <= r + 1e-12
            best = np.where(feas, np.minimum(best, part["nu_val"]), best)
        lo, hi = float(ck.min()), float(ck.max())
        sel = np.flatnonzero((r > lo) & (r < hi) & (r < part["mean"]))
        if sel.size:
            q, d, ok = _tilt_project(np.log(p), ck[None, :], r[sel][:, None])
            good = ok if self._same else ok & (sign * (q @ self._split) >= -1e-12)
            best[sel[good]] = np.minimum(best[sel[good]], d[good])
        if part["both"] is not None:
            blo, bhi = part["both"]
            sel = np.flatnonzero((r > blo + 1e-12) & (r < bhi - 1e-12))
            if sel.size:
                c = np.vstack([sign * self._split, ck])
                b = np.column_stack([np.zeros(sel.size), r[sel]])
                q, d, ok = _tilt_project(np.log(p), c, b)
                best[sel[ok]] = np.minimum(best[sel[ok]], d[ok])
        return best

    def _eval(self, r):
        return np.minimum(*(self._component(part, r) for part in self._parts))


def eta_mixed(mix, alternative):
    """eta of a two-component memoryless mixture against a memoryless alternative."""
    comps = mix.components if isinstance(mix, MixedSource) else mix
    probs = []
    for c in comps:
        if not isinstance(c, IidSource):
            raise UnsupportedModelError("eta_mixed needs i.i.d. components")
        probs.append(c.probs)
    if isinstance(alternative, IidSource):
        alternative = alternative.probs
    return ProjectionEta(probs, np.asarray(alternative, dtype=float))


def problem_eta(problem, closed_form=False):
    """eta for the problem's model kind, in nats except for the step model."""
    null, alt = problem.null, problem.alternative
    if isinstance(null, StepSpectrumModel):
        return eta_step(null)
    if isinstance(null, MixedSource):
        if isinstance(alt, IidSource):
            return eta_mixed(null, alt)
        raise UnsupportedModelError("eta for mixtures needs a memoryless probability alternative")
    if isinstance(null, GaussianSource) and closed_form:
        a = gaussian_pair(problem).a
        return GaussianEta(a) if a > 0 else PiecewiseEta([(0.0, 0.0)])
    kappa = total_mass_exponent(alt)
    return eta_from_rate(RateFunction(cgf_for(problem)), kappa_lower=kappa)
