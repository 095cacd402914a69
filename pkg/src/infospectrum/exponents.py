"""Error, correct-testing and fixed-length coding exponents from eta(R).

Given eta, the three exponents are one-dimensional optimisations:

    error:    inf { R + eta(R) : eta(R) < r }               (+inf at r = 0)
    correct:  inf { R + eta(R) + max(r - eta(R), 0) }       (kappa at r = 0)
    coding:   -error(r) against the counting measure        (0 at r = 0)

Smooth eta coming from a CGF is handled in the dual parameter theta, where
R = Lambda'(theta), eta = theta Lambda' - Lambda and R + eta = (1 + theta)
Lambda' - Lambda. A dense R-grid search is kept as an independent route;
step-function eta is solved exactly piece by piece.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InfospectrumError,
    InvalidModelError,
    PreconditionError,
    UnsupportedModelError,
)
from .ldp import (
    EtaFunction,
    GaussianEta,
    PiecewiseEta,
    RateEta,
    _bisect_increasing,
    problem_eta,
)
from .models import (
    CountingMeasure,
    IidSource,
    MarkovSource,
    MixedSource,
    StepSpectrumModel,
    TestingProblem,
    check_theorem4_assumptions,
    mean_divergence,
)

KINDS = ("error", "correct", "coding")
METHODS = ("auto", "dual-parameter", "r-grid", "piecewise-exact", "closed-form", "combinator")
GRID_POINTS = 2048
REFINE_ROUNDS = 2


@dataclass(frozen=True)
class ExponentQuery:
    kind: str
    r: float
    method: str = "auto"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if not self.r >= 0:
            raise ValueError("r must be nonnegative")


@dataclass(frozen=True)
class ExponentResult:
    """One exponent value with the R at which the infimum sits and how it was found.

    ``attainment`` is "interior" when the minimising R lies strictly inside
    the feasible set, "boundary" when it is the feasibility edge, and None
    when no R is involved (the r = 0 conventions, errors).
    """

    value: float
    minimizing_R: float = None
    method: str = ""
    attainment: str = None
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ExponentCurve:
    points: tuple
    kind: str
    fingerprint: str = ""
    log_base: float = math.e

    @property
    def r(self):
        return np.array([p[0] for p in self.points])

    @property
    def values(self):
        return np.array([p[1].value for p in self.points])


def _clean(res):
    # round-off around exponents that are exactly 0 analytically
    if abs(res.value) < 1e-12:
        return ExponentResult(0.0, res.minimizing_R, res.method, res.attainment, res.diagnostics)
    return res


def _check_r(r):
    r = float(r)
    if not r >= 0:
        raise InvalidModelError("r must be nonnegative")
    return r


# ---------------------------------------------------------------------------
# Piecewise-constant eta
# ---------------------------------------------------------------------------


def _piecewise_error(eta, r):
    feasible = [(b, v) for b, v in eta.pieces if v < r]
    edge = feasible[0][0]
    best = min(feasible, key=lambda bv: (bv[0] + bv[1], bv[0]))
    where = "boundary" if best[0] == edge else "interior"
    return ExponentResult(best[0] + best[1], best[0], "piecewise-exact", where,
                          {"feasibility_edge": edge})


def _piecewise_correct(eta, r):
    vals = [(b + max(v, r), b, v) for b, v in eta.pieces]
    value, b, v = min(vals, key=lambda t: (t[0], t[1]))
    edge = next(bb for bb, vv in eta.pieces if vv < r) if r > 0 else eta.pieces[0][0]
    where = "boundary" if b == edge else "interior"
    return ExponentResult(value, b, "piecewise-exact", where, {"eta_at_minimizer": v})


# ---------------------------------------------------------------------------
# Dual-parameter route for eta = left branch of a Legendre transform
# ---------------------------------------------------------------------------


def _theta_for_rate(cgf, r):
    """theta_r < 0 with theta Lambda'(theta) - Lambda(theta) = r, or -inf if r >= eta(R_min)."""
    if r >= cgf.rate_at_min:
        return -math.inf
    lo_cap = max(cgf.theta_domain[0], -1e8)

    def neg_h(t):
        return -(t * cgf.derivative(t) - cgf.value(t))

    theta, low_sat, _ = _bisect_increasing(neg_h, np.array([-r]), lo_cap, 0.0, lo0=-1.0, hi0=0.0)
    if low_sat[0]:
        return -math.inf
    return float(theta[0])


def _dual_error(eta, r):
    cgf = eta.cgf
    theta_r = _theta_for_rate(cgf, r)
    theta = max(theta_r, -1.0)
    if theta == -1.0 and cgf.theta_domain[0] > -1.0:
        theta = cgf.theta_domain[0]
    phi = float(cgf.derivative(theta))
    value = (1 + theta) * phi - float(cgf.value(theta))
    where = "boundary" if theta_r >= -1.0 else "interior"
    return ExponentResult(value, phi, "dual-parameter", where, {"theta": theta, "theta_r": theta_r})


def _dual_correct(eta, r):
    cgf = eta.cgf
    theta_r = _theta_for_rate(cgf, r)
    if theta_r == -math.inf:
        r_min = cgf.support[0]
        return ExponentResult(r_min + r, r_min, "dual-parameter", "boundary",
                              {"theta": -math.inf, "theta_r": theta_r})
    if theta_r >= -1.0:
        value = -float(cgf.value(-1.0))
        return ExponentResult(value, float(cgf.derivative(-1.0)), "dual-parameter", "interior",
                              {"theta": -1.0, "theta_r": theta_r})
    phi = float(cgf.derivative(theta_r))
    return ExponentResult(phi + r, phi, "dual-parameter", "boundary",
                          {"theta": theta_r, "theta_r": theta_r})


# ---------------------------------------------------------------------------
# R-grid route
# ---------------------------------------------------------------------------


def _grid_bounds(eta, r):
    lo_edge = eta.spectrum_min
    hi = eta.threshold + 1.0
    width = 1.0
    lo = eta.threshold - width
    target = r + 1.0
    for _ in range(60):
        if lo <= lo_edge:
            return lo_edge, hi
        val = float(eta(lo))
        # keep extending until eta is well above r and R + eta has started rising leftwards
        if val >= target and val + lo > float(eta(lo + width / 4)) + lo + width / 4:
            return lo, hi
        width *= 2
        lo = eta.threshold - width
    return lo, hi


def _objective(eta, R, r, kind):
    e = eta(R)
    if kind == "error":
        return np.where(e < r, R + e, np.inf), e
    return np.where(np.isfinite(e), R + e + np.maximum(r - e, 0.0), np.inf), e


def _polish_edge(eta, r, bad, good):
    """Shrink [bad, good] around the feasibility edge inf{R : eta(R) < r}."""
    for _ in range(200):
        mid = 0.5 * (bad + good)
        if mid <= bad or mid >= good:
            break
        if float(eta(mid)) < r:
            good = mid
        else:
            bad = mid
    return good


def _grid(eta, r, kind):
    lo, hi = _grid_bounds(eta, r)
    grid = np.linspace(lo, hi, GRID_POINTS)
    obj, e = _objective(eta, grid, r, kind)
    rounds = 0
    for rounds in range(REFINE_ROUNDS + 1):
        if not np.any(np.isfinite(obj)):
            return ExponentResult(math.inf, None, "r-grid", None, {"empty_feasible_set": True})
        i = int(np.argmin(obj))
        if rounds == REFINE_ROUNDS:
            break
        a, b = grid[max(i - 2, 0)], grid[min(i + 2, grid.size - 1)]
        grid = np.linspace(a, b, GRID_POINTS)
        obj, e = _objective(eta, grid, r, kind)
    best_R, best = float(grid[i]), float(obj[i])
    spacing = float(grid[1] - grid[0])
    where = "interior"
    # the feasibility edge: eta crosses r between grid[i-1] and grid[i]
    if kind == "error" and i > 0 and not np.isfinite(obj[i - 1]):
        edge = _polish_edge(eta, r, float(grid[i - 1]), best_R)
        val = edge + float(eta(edge))
        if val <= best:
            best_R, best = edge, val
        where = "boundary"
    elif kind == "error" and i == 0:
        where = "boundary"
    if kind == "correct" and 0 < i:
        e_i, e_prev = float(e[i]), float(e[i - 1])
        if (e_prev >= r) != (e_i >= r):
            edge = _polish_edge(eta, r, float(grid[i - 1]), float(grid[i])) if e_i < r else best_R
            val = edge + r
            if val <= best:
                best_R, best = edge, val
                where = "boundary"
    diag = {"grid_points": GRID_POINTS, "refinement_rounds": REFINE_ROUNDS, "final_spacing": spacing,
            "range": (float(lo), float(hi))}
    return ExponentResult(best, best_R, "r-grid", where, diag)


# ---------------------------------------------------------------------------
# Public exponent functions on eta
# ---------------------------------------------------------------------------


def _route(eta, method):
    if method == "auto":
        if isinstance(eta, PiecewiseEta):
            return "piecewise-exact"
        if isinstance(eta, GaussianEta):
            return "closed-form"
        if isinstance(eta, RateEta):
            return "dual-parameter"
        return "r-grid"
    if method == "piecewise-exact" and not isinstance(eta, PiecewiseEta):
        raise UnsupportedModelError("piecewise-exact needs a piecewise-constant eta")
    if method == "dual-parameter" and not isinstance(eta, RateEta):
        raise UnsupportedModelError("dual-parameter needs eta built from a CGF")
    if method == "closed-form" and not isinstance(eta, GaussianEta):
        raise UnsupportedModelError("closed-form needs the Gaussian closed-form eta")
    if method == "combinator":
        raise UnsupportedModelError("the combinator works on mixed problems, not on eta")
    return method


def b_e(eta: EtaFunction, r, method="auto"):
    """Error exponent inf { R + eta(R) : eta(R) < r } with the +inf convention at r = 0."""
    r = _check_r(r)
    if r == 0:
        return ExponentResult(math.inf, None, "convention", None, {"r_zero": True})
    route = _route(eta, method)
    if route == "piecewise-exact":
        return _piecewise_error(eta, r)
    if route == "closed-form":
        a = eta.a
        value = (math.sqrt(r) - math.sqrt(a)) ** 2 if r <= a else 0.0
        R = a - 2 * math.sqrt(a * r) if r <= a else -a
        return ExponentResult(value, R, "closed-form", "boundary" if r <= a else "interior")
    if route == "dual-parameter":
        return _clean(_dual_error(eta, r))
    return _clean(_grid(eta, r, "error"))


def _gate(eta, assumptions):
    if not eta.limit_exists:
        raise UnsupportedModelError(
            "the correct-testing exponent needs eta to exist as a limit, not only a liminf"
        )
    if assumptions is None or not assumptions.passed:
        reason = getattr(assumptions, "reason", "no assumption report supplied")
        raise PreconditionError(f"reversed-spectrum tail condition fails: {reason}", assumptions)


def b_e_star(eta: EtaFunction, r, assumptions, method="auto"):
    """Correct-testing exponent inf_R { R + eta(R) + [r - eta(R)]^+ }.

    Refuses when eta is not a true limit or when ``assumptions`` (from
    :func:`check_theorem4_assumptions`) failed. At r = 0 returns the
    total-mass exponent of the alternative (0 for probability laws).
    """
    r = _check_r(r)
    _gate(eta, assumptions)
    if r == 0:
        return ExponentResult(float(eta.kappa_lower), None, "convention", None, {"r_zero": True})
    route = _route(eta, method)
    if route == "piecewise-exact":
        return _piecewise_correct(eta, r)
    if route == "closed-form":
        a = eta.a
        value = (math.sqrt(r) - math.sqrt(a)) ** 2 if r >= a else 0.0
        R = a - 2 * math.sqrt(a * r) if r >= a else -a
        return ExponentResult(value, R, "closed-form", "boundary" if r >= a else "interior")
    if route == "dual-parameter":
        return _clean(_dual_correct(eta, r))
    return _clean(_grid(eta, r, "correct"))


def sigma(eta_counting: EtaFunction, R):
    """Entropy-spectrum rate sigma(R) = eta(-R) for eta against the counting measure."""
    return eta_counting(-np.asarray(R, dtype=float))


def coding_problem(source):
    if isinstance(source, (IidSource, MarkovSource)):
        return TestingProblem(source, CountingMeasure(source.alphabet_size))
    raise UnsupportedModelError("coding exponents need an i.i.d. or Markov source")


def r_e_coding(source, r, method="auto"):
    """Fixed-length coding rate R_e(r) = -B_e(r) against the counting measure (nats)."""
    r = _check_r(r)
    if r == 0:
        return ExponentResult(0.0, None, "convention", None, {"r_zero": True})
    eta = problem_eta(coding_problem(source))
    res = b_e(eta, r, method)
    R = None if res.minimizing_R is None else -res.minimizing_R
    return ExponentResult(-res.value, R, res.method, res.attainment, dict(res.diagnostics))


def b_e_mixed_combinator(mix, alt_mix, r, method="auto"):
    """min over component pairs (i, j) of the error exponent of X_i against Xbar_j."""
    r = _check_r(r)
    nulls = mix.components
    alts = alt_mix.components if isinstance(alt_mix, MixedSource) else (alt_mix,)
    best = None
    for i, p in enumerate(nulls):
        for j, g in enumerate(alts):
            res = b_e(problem_eta(TestingProblem(p, g)), r, method)
            if best is None or res.value < best[0].value:
                best = (res, (i, j))
    res, pair = best
    diag = dict(res.diagnostics)
    diag["components"] = pair
    return ExponentResult(res.value, res.minimizing_R, "combinator", res.attainment, diag)


# ---------------------------------------------------------------------------
# Problem-level entry points (values in the problem's log base)
# ---------------------------------------------------------------------------


def _scale(src_base, dst_base):
    return 1.0 if src_base == dst_base else math.log(src_base) / math.log(dst_base)


def _rescale(res, factor):
    if factor == 1.0:
        return res
    R = None if res.minimizing_R is None else res.minimizing_R * factor
    return ExponentResult(res.value * factor, R, res.method, res.attainment, res.diagnostics)


def spectral_inf_divergence(problem):
    """Left edge of the limiting divergence spectrum, in the problem's log base."""
    null = problem.null
    if isinstance(null, StepSpectrumModel):
        return 1.0 * _scale(null.log_base, problem.log_base)
    return mean_divergence(problem) / math.log(problem.log_base)


def exponent(problem, kind, r, method="auto"):
    """Evaluate one exponent for a problem; ``r`` and the result use ``problem.log_base``."""
    query = ExponentQuery(kind, float(r), method)
    null = problem.null
    if kind == "coding":
        f = _scale(math.e, problem.log_base)
        res = r_e_coding(null, query.r / f, method)
        return _rescale(res, f)
    if isinstance(null, MixedSource) and kind == "error" and method in ("auto", "combinator"):
        f = _scale(math.e, problem.log_base)
        return _rescale(b_e_mixed_combinator(null, problem.alternative, query.r / f), f)
    eta = problem_eta(problem, closed_form=(method == "closed-form"))
    f = _scale(eta.base, problem.log_base)
    r_eta = query.r / f
    if kind == "error":
        res = b_e(eta, r_eta, method)
    else:
        res = b_e_star(eta, r_eta, check_theorem4_assumptions(problem), method)
    return _rescale(res, f)


def sweep(problem, kind, r_grid, method="auto"):
    """Exponent curve over a strictly increasing r-grid; per-point errors are recorded, not raised."""
    grid = [float(x) for x in r_grid]
    if any(x < 0 for x in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidModelError("r_grid must be strictly increasing and nonnegative")
    points = []
    for r in grid:
        try:
            res = exponent(problem, kind, r, method)
        except InfospectrumError as err:
            res = ExponentResult(math.nan, None, method, None,
                                 {"error": type(err).__name__, "message": str(err)})
        points.append((r, res))
    return ExponentCurve(tuple(points), kind, problem.fingerprint(), problem.log_base)
