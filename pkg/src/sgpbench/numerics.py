"""Hardened dense linear-algebra primitives.

Every Gram-matrix factorization in this package goes through
:func:`jittered_cholesky`, which retries with geometrically growing diagonal
jitter when the matrix is not numerically positive definite.  "Numerically
positive definite" means: every pivot encountered during the factorization is
strictly positive and finite.
"""

from dataclasses import dataclass

import numpy as np

from .errors import PositiveDefiniteFailure

__all__ = [
    "JitterPolicy",
    "CholFactor",
    "DEFAULT_JITTER",
    "jittered_cholesky",
    "log_det",
]


@dataclass(frozen=True)
class JitterPolicy:
    """Schedule of diagonal jitter values for Cholesky retries.

    Attempt ``k`` (1-based) uses ``initial_jitter * growth_factor**(k - 1)``.
    A jitter-free attempt is always made first unless ``always_jitter`` is
    set, in which case the schedule starts immediately at ``initial_jitter``.

    Parameters
    ----------
    initial_jitter : float
        Jitter used on the first retry. Must be positive.
    growth_factor : float
        Multiplier between consecutive retries. Must exceed 1.
    max_attempts : int
        Number of jittered attempts (the jitter-free try is not counted).
    always_jitter : bool
        Skip the jitter-free attempt. Useful for probing how much a given
        jitter level perturbs downstream quantities.
    """

    initial_jitter: float = 1e-10
    growth_factor: float = 10.0
    max_attempts: int = 10
    always_jitter: bool = False

    def __post_init__(self):
        if not self.initial_jitter > 0:
            raise ValueError("initial_jitter must be > 0")
        if not self.growth_factor > 1:
            raise ValueError("growth_factor must be > 1")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")

    def schedule(self):
        """All jitter values in retry order, starting with 0 unless skipped."""
        jittered = [
            self.initial_jitter * self.growth_factor**k
            for k in range(self.max_attempts)
        ]
        if self.always_jitter:
            return jittered
        return [0.0] + jittered


DEFAULT_JITTER = JitterPolicy()


@dataclass(frozen=True)
class CholFactor:
    """Lower-triangular Cholesky factor of ``A + jitter_used * I``."""

    lower_triangular: np.ndarray
    jitter_used: float

    @property
    def n(self):
        return self.lower_triangular.shape[0]


def _strict_cholesky(a):
    """Plain lower Cholesky; None when a pivot is non-positive or non-finite.

    LAPACK's potrf signals non-positive pivots, but can silently propagate
    NaN/Inf, so the diagonal is checked explicitly afterwards.
    """
    try:
        lower = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return None
    diag = np.diag(lower)
    if not np.all(np.isfinite(lower)) or not np.all(diag > 0):
        return None
    return lower


def jittered_cholesky(a, policy=DEFAULT_JITTER):
    """Factorize ``a + eps * I`` for the smallest workable ``eps``.

    ``eps`` runs through ``policy.schedule()`` (starting with 0 by default);
    the first value for which all pivots are strictly positive and finite
    wins. The input is symmetrized as ``(a + a.T) / 2`` before factorizing,
    since Gram construction can introduce asymmetric rounding.

    Parameters
    ----------
    a : (N, N) array_like
        Symmetric matrix (up to rounding).
    policy : JitterPolicy
        Retry schedule.

    Returns
    -------
    CholFactor

    Raises
    ------
    PositiveDefiniteFailure
        If every attempt in the schedule fails. Callers typically surface
        this to an optimizer as a non-finite objective.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] == 0:
        raise ValueError("expected N >= 1")
    a = 0.5 * (a + a.T)
    eye = np.eye(a.shape[0])
    for eps in policy.schedule():
        lower = _strict_cholesky(a + eps * eye if eps else a)
        if lower is not None:
            return CholFactor(lower_triangular=lower, jitter_used=eps)
    raise PositiveDefiniteFailure(
        f"Cholesky failed for all jitter values up to "
        f"{policy.schedule()[-1]:.3g} (N={a.shape[0]})"
    )


def log_det(factor):
    """log-determinant of the factorized matrix, ``2 * sum(log(diag(L)))``."""
    return 2.0 * float(np.sum(np.log(np.diag(factor.lower_triangular))))
