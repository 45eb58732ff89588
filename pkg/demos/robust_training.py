"""The numerical armour: adaptive jitter, the trace guard, and optimizer
restarts, each shown on the failure it exists for.
"""

import numpy as np

from sgpbench.numerics import jittered_cholesky
from sgpbench.optimizer import LbfgsConfig, minimize
from sgpbench.sgpr import guarded_trace


def main():
    print("1. adaptive jitter")
    singular = np.array([[1.0, 1.0], [1.0, 1.0]])
    factor = jittered_cholesky(singular)
    print(f"   exactly singular Gram factorized with jitter {factor.jitter_used:g}\n")

    print("2. trace guard")
    print(f"   tiny negative trace clamps to {guarded_trace(1000.0, 1000.0 + 1e-12, 1000.0)}")
    print(f"   large negative trace signals {guarded_trace(1000.0, 1010.0, 1000.0)} "
          "(surfaces to the optimizer as a restart)\n")

    print("3. optimizer restarts")

    def objective(x):
        # the line search will query points outside the feasible ball
        if np.linalg.norm(x) > 3.0:
            return float("nan"), np.full_like(x, np.nan)
        return 0.5 * float(x @ x), x.copy()

    result = minimize(objective, np.array([2.9, 0.0]), LbfgsConfig())
    print(f"   NaN region next to the start: finished with f = {result.f_final:.2e}, "
          f"{result.restarts_used} restart(s), termination {result.termination!r}")
    print("   every non-finite query cleared the curvature history and resumed")
    print("   from the last accepted iterate.")


if __name__ == "__main__":
    main()
