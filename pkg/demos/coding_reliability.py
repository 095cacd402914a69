"""Fixed-length source coding through testing against the counting measure.

R_e(r) is the smallest rate whose decoding error decays no slower than e^{-nr};
it tends to the entropy as r -> 0 and to log 2 as r grows. The exact best
codes at small n show the same tradeoff.
"""

import math

import numpy as np

from infospectrum import IidSource
from infospectrum.exponents import r_e_coding
from infospectrum.oracle import coding_tradeoff


def main():
    src = IidSource([0.11, 0.89])
    entropy = -sum(p * math.log(p) for p in (0.11, 0.89))
    print(f"entropy = {entropy:.5f} nats, log 2 = {math.log(2):.5f}")
    for r in (0.001, 0.01, 0.05, 0.1, 0.3, 1.0):
        print(f"  r = {r:5.3f}  R_e = {r_e_coding(src, r).value:.5f}")
    n = 12
    tradeoff = coding_tradeoff(src, n)
    print(f"best codes at n = {n}: rate vs error probability")
    for k in np.linspace(1, len(tradeoff.atoms), 6).astype(int):
        size = tradeoff.lam[k]
        rate = math.log(size) / n
        print(f"  {int(size):5d} codewords  rate {rate:.4f}  error {tradeoff.mu[k]:.4f}")


if __name__ == "__main__":
    main()
