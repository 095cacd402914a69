"""Error and correct exponents of a Gaussian mean-shift test.

The generic tilted-CGF pipeline is run next to the closed forms
(sqrt(r) - sqrt(a))^2 on either side of a = (mean gap)^2 / (2 std^2).
"""

import math

import numpy as np

from infospectrum import GaussianSource, TestingProblem
from infospectrum.exponents import sweep


def main():
    problem = TestingProblem(GaussianSource(0.0, 1.0), GaussianSource(2.0, 1.0))
    a = 2.0
    r_grid = np.linspace(0.25, 2 * a, 8)
    error = sweep(problem, "error", r_grid)
    correct = sweep(problem, "correct", r_grid)
    print(f"{'r':>6} {'B_e':>10} {'closed':>10} {'B_e*':>10} {'closed':>10}")
    for r, be, bs in zip(r_grid, error.values, correct.values):
        gap = (math.sqrt(r) - math.sqrt(a)) ** 2
        print(f"{r:6.2f} {be:10.6f} {gap * (r <= a):10.6f} {bs:10.6f} {gap * (r >= a):10.6f}")


if __name__ == "__main__":
    main()
