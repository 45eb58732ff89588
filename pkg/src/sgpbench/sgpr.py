"""Collapsed sparse variational GP regression.

Implements the collapsed lower bound on the log marginal likelihood, the
matching upper bound, their gap (an upper bound on the KL divergence from the
approximate to the exact posterior, and therefore a machine-checkable
near-exactness certificate), predictions, and the analytic gradient of the
lower bound with respect to the kernel and noise hyperparameters.

All quantities are computed through M x M factorizations in
O(N M^2 + M^3) time and O(N M) memory; no N x N matrix is ever formed.
Writing ``Q = K_xz K_zz^-1 K_zx`` and ``t = tr(K_xx) - tr(Q)``:

    lower  = -N/2 log(2 pi) - 1/2 log|Q + s I| - 1/2 y^T (Q + s I)^-1 y
             - t / (2 s)
    upper  = -N/2 log(2 pi) - 1/2 log|Q + s I| - 1/2 y^T (Q + (s + t) I)^-1 y

with ``s`` the noise variance.  The trace ``t`` is mathematically
non-negative; tiny negative rounding is clamped to zero and large negative
values signal an irrecoverable numerical failure (NaN), which callers
surface to the optimizer as :class:`~sgpbench.errors.NonFiniteObjective`.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from . import kernels
from .errors import InternalConsistencyError, NonFiniteObjective
from .numerics import DEFAULT_JITTER, jittered_cholesky

__all__ = [
    "SgprModel",
    "BoundReport",
    "TRACE_GUARD_REL",
    "guarded_trace",
    "elbo",
    "elbo_gradient",
    "elbo_with_gradient",
    "upper_bound",
    "bound_report",
    "kl_gap_bound",
    "sgpr_predict",
]

LOG_2PI = float(np.log(2.0 * np.pi))

# Relative threshold separating trace rounding noise from genuine failure:
# negative traces larger than this fraction of tr(K_xx) are irrecoverable.
TRACE_GUARD_REL = 1e-6


@dataclass(frozen=True)
class SgprModel:
    """Inducing locations plus hyperparameters; the unit of training state."""

    z: np.ndarray
    spec: kernels.KernelSpec
    noise_variance: float

    @property
    def m(self):
        return self.z.shape[0]


@dataclass(frozen=True)
class BoundReport:
    """Both bounds and the KL-gap certificate for one model state."""

    elbo: float
    upper_bound: float
    trace_t: float
    kl_gap_bound: float


def guarded_trace(k_diag_sum, q_diag_sum, k_scale):
    """Trace term ``tr(K_xx) - tr(Q_xx)`` with numerical-error fixing.

    Non-negative values pass through.  Small negative values (within
    ``TRACE_GUARD_REL * k_scale`` of zero) are rounding noise and clamp to
    exactly 0.  Anything more negative returns NaN, the irrecoverable-error
    signal.
    """
    t = k_diag_sum - q_diag_sum
    if t >= 0.0:
        return t
    if t >= -TRACE_GUARD_REL * k_scale:
        return 0.0
    return float("nan")


class _Decomp:
    """Shared O(N M^2) factorization state behind all SGPR quantities."""

    def __init__(self, model, x, y, jitter):
        x = kernels._as_2d(x)
        y = np.asarray(y, dtype=float).ravel()
        spec = model.spec
        z = kernels._as_2d(model.z)
        try:
            kzz_factor = jittered_cholesky(kernels.gram(spec, z), jitter)
        except Exception as exc:
            raise NonFiniteObjective(f"Cholesky of K_zz failed: {exc}") from exc
        kzx = kernels.gram(spec, z, x)
        # v = L^-1 K_zx, so that Q = v^T v
        v = solve_triangular(kzz_factor.lower_triangular, kzx, lower=True)
        k_diag = kernels.gram_diag(spec, x)
        k_diag_sum = float(np.sum(k_diag))
        t = guarded_trace(k_diag_sum, float(np.sum(v**2)), k_diag_sum)
        if np.isnan(t):
            raise NonFiniteObjective(
                "trace term tr(K_xx - Q_xx) is negative beyond rounding"
            )
        self.x, self.y = x, y
        self.model = model
        self.jitter = jitter
        self.kzz_factor = kzz_factor
        self.v = v
        self.k_diag = k_diag
        self.trace_t = t
        self._inner = {}

    def inner(self, shift):
        """Factor of B = I + v v^T / shift, cached per diagonal shift."""
        key = float(shift)
        if key not in self._inner:
            m = self.v.shape[0]
            b = np.eye(m) + (self.v @ self.v.T) / key
            self._inner[key] = jittered_cholesky(b, self.jitter)
        return self._inner[key]

    def quad_and_logdet(self, shift):
        """``y^T (Q + shift I)^-1 y`` and ``log|Q + shift I|``."""
        n = self.y.size
        lb = self.inner(shift).lower_triangular
        vy = self.v @ self.y
        c = solve_triangular(lb, vy, lower=True) / shift
        quad = float(self.y @ self.y) / shift - float(c @ c)
        logdet = n * np.log(shift) + 2.0 * float(np.sum(np.log(np.diag(lb))))
        return quad, logdet

    def elbo(self):
        s = self.model.noise_variance
        quad, logdet = self.quad_and_logdet(s)
        value = (
            -0.5 * self.y.size * LOG_2PI
            - 0.5 * logdet
            - 0.5 * quad
            - self.trace_t / (2.0 * s)
        )
        if not np.isfinite(value):
            raise NonFiniteObjective(f"ELBO evaluated to {value}")
        return value

    def upper_bound(self):
        s = self.model.noise_variance
        _, logdet = self.quad_and_logdet(s)
        quad_shifted, _ = self.quad_and_logdet(s + self.trace_t)
        value = -0.5 * self.y.size * LOG_2PI - 0.5 * logdet - 0.5 * quad_shifted
        if not np.isfinite(value):
            raise NonFiniteObjective(f"upper bound evaluated to {value}")
        return value


def elbo(model, x, y, jitter=DEFAULT_JITTER):
    """Collapsed lower bound on the log marginal likelihood, in nats."""
    return _Decomp(model, x, y, jitter).elbo()


def upper_bound(model, x, y, jitter=DEFAULT_JITTER):
    """Upper bound on the log marginal likelihood, in nats."""
    return _Decomp(model, x, y, jitter).upper_bound()


def bound_report(model, x, y, jitter=DEFAULT_JITTER):
    """Both bounds plus the KL-gap certificate, from one factorization."""
    decomp = _Decomp(model, x, y, jitter)
    lower = decomp.elbo()
    upper = decomp.upper_bound()
    return BoundReport(
        elbo=lower,
        upper_bound=upper,
        trace_t=decomp.trace_t,
        kl_gap_bound=upper - lower,
    )


def kl_gap_bound(model, x, y, jitter=DEFAULT_JITTER):
    """``upper_bound - elbo``: an upper bound on KL[approx || exact posterior]."""
    return bound_report(model, x, y, jitter).kl_gap_bound


def elbo_with_gradient(x, y, values, family, z, jitter=DEFAULT_JITTER):
    """ELBO and its gradient w.r.t. the unconstrained hyperparameters.

    ``z`` is held fixed and receives no gradient; the baseline procedure
    re-selects inducing points instead of optimizing them.  Cost is
    O(N M^2 + (D + 2) N M + M^3), still free of N x N intermediates.
    """
    x = kernels._as_2d(x)
    y = np.asarray(y, dtype=float).ravel()
    spec, noise_variance = kernels.unpack(values, family, x.shape[1])
    model = SgprModel(z=kernels._as_2d(z), spec=spec, noise_variance=noise_variance)
    decomp = _Decomp(model, x, y, jitter)
    value = decomp.elbo()

    s = noise_variance
    v = decomp.v
    lower = decomp.kzz_factor.lower_triangular
    lb = decomp.inner(s).lower_triangular

    # c_mat = K_xz K_zz^-1 (N x M), the Nystrom feature map
    c_mat = solve_triangular(lower, v, trans="T", lower=True).T
    # g_times(w) applies (Q + s I)^-1 = (1/s)(I - A^T B^-1 A), A = v / sqrt(s)
    def apply_g(mat):
        av = v @ mat / s
        sol = solve_triangular(lb, av, lower=True)
        sol = solve_triangular(lb, sol, trans="T", lower=True)
        return (mat - v.T @ sol) / s

    e_vec = apply_g(y)
    gc = apply_g(c_mat)
    w_vec = c_mat.T @ e_vec
    ctgc = c_mat.T @ gc
    ctc = c_mat.T @ c_mat

    lb_inv_a = solve_triangular(lb, v, lower=True) / np.sqrt(s)
    tr_g = (y.size - float(np.sum(lb_inv_a**2))) / s

    dkzz = kernels.gram_hyper_derivatives(spec, model.z)
    dkzx = kernels.gram_hyper_derivatives(spec, model.z, x)
    ddiag = kernels.gram_diag_hyper_derivatives(spec, x)
    trace_clamped = decomp.trace_t == 0.0

    grads = np.zeros(values.size)
    for j in range(len(dkzz)):
        tr_gdq = 2.0 * float(np.sum(gc.T * dkzx[j])) - float(np.sum(ctgc * dkzz[j]))
        e_dq_e = 2.0 * float((dkzx[j] @ e_vec) @ w_vec) - float(
            w_vec @ dkzz[j] @ w_vec
        )
        if trace_clamped:
            dt = 0.0
        else:
            tr_dq = 2.0 * float(np.sum(c_mat.T * dkzx[j])) - float(
                np.sum(ctc * dkzz[j])
            )
            dt = float(np.sum(ddiag[j])) - tr_dq
        grads[j] = -0.5 * tr_gdq + 0.5 * e_dq_e - dt / (2.0 * s)

    # noise direction: d(Q + s I)/du = exp(u) I and the trace term rescales
    dnoise = s - kernels.HYPER_FLOOR
    grads[-1] = dnoise * (
        -0.5 * tr_g + 0.5 * float(e_vec @ e_vec) + decomp.trace_t / (2.0 * s**2)
    )
    if not np.all(np.isfinite(grads)):
        raise NonFiniteObjective("non-finite ELBO gradient")
    return value, grads


def elbo_gradient(x, y, values, family, z, jitter=DEFAULT_JITTER):
    """Gradient half of :func:`elbo_with_gradient`."""
    return elbo_with_gradient(x, y, values, family, z, jitter)[1]


def sgpr_predict(model, x, y, x_star, jitter=DEFAULT_JITTER):
    """Posterior predictions at ``x_star``.

    Returns ``(mean, latent_variance, observation_variance)``; the
    observation variance adds the noise variance for density evaluation
    against held-out targets. Cost O(N M^2 + M^3 + P M^2).
    """
    x_star = kernels._as_2d(x_star)
    decomp = _Decomp(model, x, y, jitter)
    if x_star.shape[0] == 0:
        empty = np.zeros(0)
        return empty, empty.copy(), empty.copy()
    s = model.noise_variance
    lb = decomp.inner(s).lower_triangular
    vy = decomp.v @ decomp.y
    c = solve_triangular(lb, vy, lower=True) / s

    k_zs = kernels.gram(model.spec, kernels._as_2d(model.z), x_star)
    tmp1 = solve_triangular(decomp.kzz_factor.lower_triangular, k_zs, lower=True)
    tmp2 = solve_triangular(lb, tmp1, lower=True)
    mean = tmp2.T @ c
    latent = (
        kernels.gram_diag(model.spec, x_star)
        - np.sum(tmp1**2, axis=0)
        + np.sum(tmp2**2, axis=0)
    )
    bad = latent < -1e-10
    if np.any(bad):
        raise InternalConsistencyError(
            f"sparse predictive variance {latent[bad].min():.3e} below tolerance"
        )
    latent = np.maximum(latent, 0.0)
    return mean, latent, latent + s
