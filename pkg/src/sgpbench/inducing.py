"""Greedy-variance inducing-point selection.

Selects training points one at a time, always taking the point whose current
Nystrom residual variance ``k(x_j, x_j) - q_m(x_j, x_j)`` is largest.  This is
exactly a partial pivoted Cholesky of the Gram matrix with diagonal pivoting,
so each selection costs one rank-one residual update: O(N M^2) time and
O(N M) memory overall, never forming the N x N Gram matrix.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels

__all__ = ["SelectionResult", "greedy_variance_select"]

# Stop early once the largest residual falls below this fraction of the
# largest initial diagonal: the remaining points are numerically duplicates
# and would destabilize K_ZZ.
EARLY_STOP_REL = 1e-12


@dataclass(frozen=True)
class SelectionResult:
    """Ordered selected indices plus the final residual diagonal.

    The selection is nested: the first m indices are exactly the selection
    that a budget of m would have produced.
    """

    indices: np.ndarray
    residual_diag_final: np.ndarray

    @property
    def m(self):
        return self.indices.shape[0]


def greedy_variance_select(x, spec, m):
    """Pick up to ``m`` rows of ``x`` by largest residual variance.

    Ties break to the lowest index, and selection stops early (returning
    fewer than ``m`` indices) once the residual diagonal is negligible
    relative to its initial maximum.

    Parameters
    ----------
    x : (N, D) array_like
        Training inputs.
    spec : kernels.KernelSpec
        Kernel under which residual variances are measured.
    m : int
        Selection budget, 1 <= m <= N.
    """
    x = kernels._as_2d(x)
    n = x.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"m must be in [1, {n}], got {m}")

    residual = kernels.gram_diag(spec, x).astype(float).copy()
    threshold = EARLY_STOP_REL * float(residual.max())
    rows = np.zeros((m, n))  # partial factor, one row per selected pivot
    chosen = []

    for step in range(m):
        j = int(np.argmax(residual))  # first max wins: lowest-index tie-break
        if residual[j] < threshold:
            break
        col = kernels.gram(spec, x, x[j : j + 1])[:, 0]
        if step > 0:
            col -= rows[:step].T @ rows[:step, j]
        row = col / np.sqrt(residual[j])
        rows[step] = row
        residual -= row**2
        residual[j] = 0.0
        np.maximum(residual, 0.0, out=residual)
        chosen.append(j)

    return SelectionResult(
        indices=np.array(chosen, dtype=int),
        residual_diag_final=residual,
    )
