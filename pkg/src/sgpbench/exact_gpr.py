"""Exact Gaussian-process regression.

Serves two roles: a trainable baseline in its own right, and the exactness
oracle that the sparse bounds are judged against.  Everything here is the
textbook O(N^3) dense route; the harness caps it at a configurable N.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from . import kernels
from .errors import InternalConsistencyError, NonFiniteObjective
from .numerics import DEFAULT_JITTER, CholFactor, jittered_cholesky, log_det

__all__ = [
    "GprPosterior",
    "lml",
    "lml_with_gradient",
    "lml_gradient",
    "fit_posterior",
    "fit_mle",
    "gpr_predict",
]

LOG_2PI = float(np.log(2.0 * np.pi))

# Rounding slack below zero tolerated in predictive variances before we
# declare an internal inconsistency.
VARIANCE_ROUNDING_TOL = 1e-10


@dataclass(frozen=True)
class GprPosterior:
    """State needed for prediction: factor of K + sigma_n^2 I and its solve."""

    chol: CholFactor
    alpha: np.ndarray
    x_train: np.ndarray
    spec: kernels.KernelSpec
    noise_variance: float


def _noisy_gram_factor(x, spec, noise_variance, jitter):
    k = kernels.gram(spec, x)
    k[np.diag_indices_from(k)] += noise_variance
    return jittered_cholesky(k, jitter)


def lml(x, y, spec, noise_variance, jitter=DEFAULT_JITTER):
    """Log marginal likelihood of the observations under the GP prior.

    ``-N/2 log(2 pi) - 1/2 y^T (K + sigma_n^2 I)^-1 y
    - 1/2 log|K + sigma_n^2 I|``.

    Raises
    ------
    NonFiniteObjective
        When the factorization fails or the result is not finite; optimizers
        treat this as a restart trigger.
    """
    x = kernels._as_2d(x)
    y = np.asarray(y, dtype=float).ravel()
    try:
        factor = _noisy_gram_factor(x, spec, noise_variance, jitter)
    except Exception as exc:
        raise NonFiniteObjective(f"Cholesky of K + sigma^2 I failed: {exc}") from exc
    alpha = cho_solve((factor.lower_triangular, True), y)
    value = (
        -0.5 * y.size * LOG_2PI
        - 0.5 * float(y @ alpha)
        - 0.5 * log_det(factor)
    )
    if not np.isfinite(value):
        raise NonFiniteObjective(f"log marginal likelihood is {value}")
    return value


def lml_with_gradient(x, y, values, family, jitter=DEFAULT_JITTER):
    """LML and its gradient in the unconstrained hyperparameter space.

    Uses the trace form ``dLML/du = 1/2 tr((alpha alpha^T - C^-1) dC/du)``
    with ``C = K + sigma_n^2 I``, mapped through the constraint transform.
    """
    x = kernels._as_2d(x)
    y = np.asarray(y, dtype=float).ravel()
    spec, noise_variance = kernels.unpack(values, family, x.shape[1])
    try:
        factor = _noisy_gram_factor(x, spec, noise_variance, jitter)
    except Exception as exc:
        raise NonFiniteObjective(f"Cholesky of K + sigma^2 I failed: {exc}") from exc
    lower = factor.lower_triangular
    alpha = cho_solve((lower, True), y)
    value = (
        -0.5 * y.size * LOG_2PI - 0.5 * float(y @ alpha) - 0.5 * log_det(factor)
    )
    c_inv = cho_solve((lower, True), np.eye(y.size))
    w = np.outer(alpha, alpha) - c_inv

    grads = []
    for dk in kernels.gram_hyper_derivatives(spec, x):
        grads.append(0.5 * float(np.sum(w * dk)))
    # noise direction: dC/du_noise = exp(u) * I
    grads.append(0.5 * float(np.trace(w)) * (noise_variance - kernels.HYPER_FLOOR))
    grad = np.array(grads)
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise NonFiniteObjective("non-finite LML value or gradient")
    return value, grad


def lml_gradient(x, y, values, family, jitter=DEFAULT_JITTER):
    """Gradient half of :func:`lml_with_gradient`."""
    return lml_with_gradient(x, y, values, family, jitter)[1]


def fit_posterior(x, y, spec, noise_variance, jitter=DEFAULT_JITTER):
    """Factorize the training system once for repeated prediction."""
    x = kernels._as_2d(x)
    y = np.asarray(y, dtype=float).ravel()
    factor = _noisy_gram_factor(x, spec, noise_variance, jitter)
    alpha = cho_solve((factor.lower_triangular, True), y)
    return GprPosterior(
        chol=factor,
        alpha=alpha,
        x_train=x,
        spec=spec,
        noise_variance=noise_variance,
    )


def fit_mle(x, y, family, initial_noise_variance=0.01, initial_kernel_value=1.0,
            lbfgs_config=None):
    """Type-II maximum likelihood: optimize the hyperparameters by LML.

    Uses the same restarting L-BFGS as the sparse baseline. Returns
    ``(spec, noise_variance, opt_result)``.
    """
    from .optimizer import LbfgsConfig, minimize  # deferred: avoids a cycle

    x = kernels._as_2d(x)
    y = np.asarray(y, dtype=float).ravel()
    family_dim = x.shape[1]
    spec0 = kernels.default_spec(family, family_dim, initial_kernel_value)
    values0 = kernels.pack(spec0, initial_noise_variance)

    def objective(values):
        value, grad = lml_with_gradient(x, y, values, family)
        return -value, -grad

    result = minimize(objective, values0, lbfgs_config or LbfgsConfig())
    spec, noise_variance = kernels.unpack(result.x_final, family, family_dim)
    return spec, noise_variance, result


def _clamp_variance(var):
    bad = var < -VARIANCE_ROUNDING_TOL
    if np.any(bad):
        raise InternalConsistencyError(
            f"predictive variance {var[bad].min():.3e} below rounding tolerance"
        )
    return np.maximum(var, 0.0)


def gpr_predict(posterior, x_star):
    """Latent predictive mean and variance at the given inputs.

    Returns ``(mean, latent_variance, observation_variance)`` where the
    observation variance adds the noise variance (the quantity NLPD is
    evaluated with, since held-out targets include noise).
    """
    x_star = kernels._as_2d(x_star)
    if x_star.shape[0] == 0:
        empty = np.zeros(0)
        return empty, empty.copy(), empty.copy()
    k_xs = kernels.gram(posterior.spec, posterior.x_train, x_star)
    mean = k_xs.T @ posterior.alpha
    v = solve_triangular(posterior.chol.lower_triangular, k_xs, lower=True)
    latent = kernels.gram_diag(posterior.spec, x_star) - np.sum(v**2, axis=0)
    latent = _clamp_variance(latent)
    return mean, latent, latent + posterior.noise_variance
