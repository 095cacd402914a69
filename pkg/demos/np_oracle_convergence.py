"""Exact Neyman-Pearson exponents at small n against the asymptotic Hoeffding value.

The gap closes slowly, which is why finite-n numbers are compared by trend
rather than by a fixed tolerance.
"""

from infospectrum import IidSource, TestingProblem, problem_eta
from infospectrum.exponents import b_e
from infospectrum.oracle import finite_n_exponents


def main():
    problem = TestingProblem(IidSource([0.5, 0.5]), IidSource([0.9, 0.1]))
    r = 0.1
    target = b_e(problem_eta(problem), r).value
    print(f"asymptotic B_e({r}) = {target:.5f} nats")
    for n in (2, 4, 8, 12, 16):
        est = finite_n_exponents(problem, n, r)
        print(f"  n = {n:2d}  -(1/n) log lambda = {est.error_exponent:.5f}  gap = {est.error_exponent - target:+.5f}")


if __name__ == "__main__":
    main()
