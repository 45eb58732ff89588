"""Kernel choice decides whether sparsity can ever be near-exact.

A step function defeats a stationary Matern-1/2 kernel: its fitted
lengthscale keeps shrinking, the Gram matrix stays effectively full rank,
and the gap between the bounds never closes no matter how many inducing
points are allowed. A non-stationary arc-cosine kernel compresses far
better on the same data.
"""

from sgpbench import datasets
from sgpbench.baseline import BaselineConfig, run_baseline


def main():
    ds = datasets.generate_toy("step1d", 500, seed=0)
    n = ds.n_train
    print(f"step1d: {n} training points\n")
    config = BaselineConfig(m_schedule=(10, 20, 50, 100, 200))

    for family in ("matern12", "arccos1"):
        print(f"--- kernel: {family}")
        records = run_baseline(ds, family, config)
        print(f"{'M':>4} {'lower':>10} {'gap/N':>9} {'rmse':>7}")
        for r in records:
            gap = (r.upper_bound - r.elbo) / n
            print(f"{r.m:4d} {r.elbo:10.2f} {gap:9.5f} {r.rmse:7.3f}")
        print()

    print("matern12 stays far from its upper bound at every budget, while")
    print("arccos1 closes the gap within the schedule: when a model is")
    print("misspecified, a better kernel beats a bigger inducing set.")


if __name__ == "__main__":
    main()
