"""Three-point divergence spectrum with a step in the error exponent.

For r just above alpha the best slice is the interior atom at 1 - 2 alpha,
so the exponent drops from 1 to 1 - alpha and stays there.
"""

import numpy as np

from infospectrum import StepSpectrumModel, TestingProblem
from infospectrum.exponents import exponent


def main():
    for alpha in (0.1, 0.2, 0.3):
        problem = TestingProblem(StepSpectrumModel(alpha), log_base=2)
        print(f"alpha = {alpha}")
        for r in np.round(np.linspace(0.05, 1.2, 6), 3):
            res = exponent(problem, "error", r)
            print(f"  r = {r:5.3f}  B_e = {res.value:.3f} bits  attained at R = {res.minimizing_R}")


if __name__ == "__main__":
    main()
