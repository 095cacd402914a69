"""Hypothesis-testing exponents for general source pairs via the divergence spectrum."""

from .errors import *  # noqa: F401,F403
from .models import (
    AssumptionReport,
    CountingMeasure,
    FiniteDistribution,
    GaussianMeanShiftPair,
    GaussianSource,
    IidSource,
    MarkovPair,
    MarkovSource,
    MixedPair,
    MixedSource,
    StepSpectrumModel,
    TestingProblem,
    UnifilarPair,
    UnifilarSource,
    WeightMeasure,
    check_theorem4_assumptions,
    divergence_density,
    mean_divergence,
    sample_sequences,
    unifilar_expand,
)
from .ldp import (
    CgfEvaluator,
    EtaFunction,
    RateFunction,
    cgf_iid,
    cgf_markov,
    constrained_i_projection,
    eta_from_rate,
    eta_mixed,
    eta_step,
    legendre,
    problem_eta,
    tilted_distribution,
)

__version__ = "0.1.0"
