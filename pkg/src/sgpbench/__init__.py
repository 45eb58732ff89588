"""Sparse variational GP regression with an automatic baseline and benchmarks.

The heavy lifting lives in the submodules:

- :mod:`sgpbench.numerics` -- jittered Cholesky and log-determinants
- :mod:`sgpbench.kernels` -- kernel families and analytic Gram derivatives
- :mod:`sgpbench.exact_gpr` -- exact GP regression (the accuracy oracle)
- :mod:`sgpbench.sgpr` -- collapsed sparse bounds and predictions
- :mod:`sgpbench.inducing` -- greedy-variance inducing-point selection
- :mod:`sgpbench.optimizer` -- L-BFGS with restart-on-failure semantics
- :mod:`sgpbench.baseline` -- the automatic increasing-M training procedure
- :mod:`sgpbench.svgp` -- uncollapsed stochastic variational GP (torch-backed)
- :mod:`sgpbench.datasets` / :mod:`sgpbench.metrics` / :mod:`sgpbench.reporting`
  -- the benchmarking harness
- :mod:`sgpbench.cli` -- the ``sgpbench`` command

:mod:`sgpbench.svgp` imports torch and is therefore not re-exported here;
import it explicitly when needed.
"""

from . import (
    baseline,
    datasets,
    errors,
    exact_gpr,
    inducing,
    kernels,
    metrics,
    numerics,
    optimizer,
    reporting,
    sgpr,
)

__all__ = [
    "baseline",
    "datasets",
    "errors",
    "exact_gpr",
    "inducing",
    "kernels",
    "metrics",
    "numerics",
    "optimizer",
    "reporting",
    "sgpr",
]

__version__ = "0.1.0"
