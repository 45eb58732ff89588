"""Kernel families, constraint transforms, and analytic Gram derivatives.

Three families are implemented, each with per-dimension (ARD) scale
hyperparameters and a signal variance:

``se``
    Squared exponential, ``sigma_f^2 * exp(-0.5 * sum_d (x_d - x'_d)^2 / l_d^2)``.
``matern12 | matern32 | matern52``
    Matern with smoothness 1/2, 3/2, 5/2 (elementary closed forms), using the
    ARD-scaled distance ``r = sqrt(sum_d (x_d - x'_d)^2 / l_d^2)``.
``arccos0 | arccos1 | arccos2``
    Arc-cosine kernel of order 0, 1 or 2 (infinite-width limit of a
    single-layer network with Heaviside / ReLU / half-quadratic activations),
    applied after the weighted inner product
    ``<x, x'> = sum_d sigma_{w,d}^2 x_d x'_d + sigma_b^2``.

All positive hyperparameters live above a hard floor of 1e-5, enforced by the
smooth bijection ``raw = 1e-5 + exp(u)`` between constrained and unconstrained
space.  Optimizers work exclusively with the unconstrained vector; all Gram
derivatives returned here are with respect to the unconstrained parameters,
i.e. the constraint chain rule is already applied.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import PackDomainError

__all__ = [
    "HYPER_FLOOR",
    "FAMILIES",
    "KernelSpec",
    "to_unconstrained",
    "from_unconstrained",
    "eval_pair",
    "gram",
    "gram_diag",
    "pack",
    "unpack",
    "n_hyperparameters",
    "hyperparameter_names",
    "gram_hyper_derivatives",
    "gram_diag_hyper_derivatives",
]

HYPER_FLOOR = 1e-5

_STATIONARY = ("se", "matern12", "matern32", "matern52")
_ARCCOS = ("arccos0", "arccos1", "arccos2")
FAMILIES = _STATIONARY + _ARCCOS

# Pairs with tiny angular separation: the arccos pathway of the gradient is
# 0/0 there; the finite limit is 0 along the directions that matter (see
# gram_hyper_derivatives).
_SIN_PHI_GUARD = 1e-12


def to_unconstrained(raw):
    """Map a constrained hyperparameter (> 1e-5) to the real line."""
    raw = np.asarray(raw, dtype=float)
    if np.any(raw <= HYPER_FLOOR):
        raise PackDomainError(
            f"constrained hyperparameter {raw!r} is <= the {HYPER_FLOOR} floor"
        )
    return np.log(raw - HYPER_FLOOR)


def from_unconstrained(u):
    """Inverse of :func:`to_unconstrained`; always lands above the floor."""
    return HYPER_FLOOR + np.exp(np.asarray(u, dtype=float))


@dataclass(frozen=True)
class KernelSpec:
    """One kernel family plus its constrained hyperparameters.

    For stationary families (``se``, ``matern*``) supply ``lengthscales``;
    for arc-cosine families supply ``weight_variances`` and ``bias_variance``.
    """

    family: str
    signal_variance: float
    lengthscales: np.ndarray = None
    weight_variances: np.ndarray = None
    bias_variance: float = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not self.signal_variance >= HYPER_FLOOR:
            raise ValueError("signal_variance must be >= 1e-5")
        if self.family in _STATIONARY:
            if self.lengthscales is None:
                raise ValueError(f"{self.family} requires lengthscales")
            ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
            if np.any(ls < HYPER_FLOOR):
                raise ValueError("lengthscales must be >= 1e-5")
            object.__setattr__(self, "lengthscales", ls)
        else:
            if self.weight_variances is None or self.bias_variance is None:
                raise ValueError(
                    f"{self.family} requires weight_variances and bias_variance"
                )
            wv = np.atleast_1d(np.asarray(self.weight_variances, dtype=float))
            if np.any(wv < HYPER_FLOOR) or self.bias_variance < HYPER_FLOOR:
                raise ValueError("weight/bias variances must be >= 1e-5")
            object.__setattr__(self, "weight_variances", wv)

    @property
    def input_dim(self):
        if self.family in _STATIONARY:
            return self.lengthscales.shape[0]
        return self.weight_variances.shape[0]

    @property
    def arccos_order(self):
        return int(self.family[-1]) if self.family in _ARCCOS else None


def default_spec(family, input_dim, value=1.0):
    """Spec with every kernel hyperparameter set to ``value`` (default 1)."""
    if family in _STATIONARY:
        return KernelSpec(family, value, lengthscales=np.full(input_dim, value))
    return KernelSpec(
        family,
        value,
        weight_variances=np.full(input_dim, value),
        bias_variance=value,
    )


def n_hyperparameters(family, input_dim):
    """Length of the packed vector (kernel hyperparameters + noise variance)."""
    if family in _STATIONARY:
        return input_dim + 2
    return input_dim + 3


def hyperparameter_names(family, input_dim):
    """Names in packed order; the noise variance is always last."""
    if family in _STATIONARY:
        names = [f"lengthscale[{d}]" for d in range(input_dim)]
    else:
        names = [f"weight_variance[{d}]" for d in range(input_dim)]
        names.append("bias_variance")
    return names + ["signal_variance", "noise_variance"]


def pack(spec, noise_variance):
    """Flatten (spec, noise variance) into one unconstrained vector.

    Raises
    ------
    PackDomainError
        If any constrained value sits at or below the 1e-5 floor, where the
        transform has no preimage.
    """
    if spec.family in _STATIONARY:
        raw = np.concatenate([spec.lengthscales, [spec.signal_variance]])
    else:
        raw = np.concatenate(
            [spec.weight_variances, [spec.bias_variance, spec.signal_variance]]
        )
    raw = np.concatenate([raw, [noise_variance]])
    return to_unconstrained(raw)


def unpack(values, family, input_dim):
    """Inverse of :func:`pack`; returns ``(KernelSpec, noise_variance)``."""
    values = np.asarray(values, dtype=float)
    expected = n_hyperparameters(family, input_dim)
    if values.shape != (expected,):
        raise ValueError(
            f"expected {expected} hyperparameters for {family}/D={input_dim}, "
            f"got shape {values.shape}"
        )
    raw = from_unconstrained(values)
    if family in _STATIONARY:
        spec = KernelSpec(
            family, raw[input_dim], lengthscales=raw[:input_dim]
        )
    else:
        spec = KernelSpec(
            family,
            raw[input_dim + 1],
            weight_variances=raw[:input_dim],
            bias_variance=raw[input_dim],
        )
    return spec, raw[-1]


def _as_2d(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    return x


def _scaled_sqdist(x, x2, lengthscales):
    """ARD squared distances via the expanded form, clamped at 0.

    Values below the cancellation noise floor of the expansion snap to
    exactly 0: the expanded form cannot resolve distances that small, and
    leaving the residue in place makes kernels with a kink at r = 0
    (Matern-1/2) wobble at coincident points.
    """
    xs = x / lengthscales
    x2s = x2 / lengthscales
    sx = np.sum(xs**2, axis=1)
    sy = np.sum(x2s**2, axis=1)
    sq = sx[:, None] + sy[None, :] - 2.0 * xs @ x2s.T
    noise_floor = 32.0 * np.finfo(float).eps * (sx[:, None] + sy[None, :])
    sq[sq <= noise_floor] = 0.0
    return sq


def _arccos_parts(spec, x, x2):
    """Weighted inner products and the derived angle quantities.

    Returns (s, sx, sy, p_norm, cosphi, phi) where ``s`` is the N x P matrix
    of weighted inner products, ``sx``/``sy`` the weighted squared norms and
    ``p_norm = sqrt(sx) sqrt(sy)``.  Zero-norm points use the ``phi := 0``
    convention.
    """
    w = spec.weight_variances
    b = spec.bias_variance
    s = (x * w) @ x2.T + b
    sx = np.sum(w * x**2, axis=1) + b
    sy = np.sum(w * x2**2, axis=1) + b
    p_norm = np.sqrt(np.outer(sx, sy))
    with np.errstate(divide="ignore", invalid="ignore"):
        cosphi = np.where(p_norm > 0, s / np.where(p_norm > 0, p_norm, 1.0), 1.0)
    cosphi = np.clip(cosphi, -1.0, 1.0)
    # snap angles that the inner-product route cannot resolve from 0 or pi;
    # arccos is infinitely sensitive there and would amplify rounding noise
    snap = np.abs(cosphi) >= 1.0 - 64.0 * np.finfo(float).eps
    cosphi[snap] = np.sign(cosphi[snap])
    phi = np.arccos(cosphi)
    return s, sx, sy, p_norm, cosphi, phi


def _j_value(order, phi):
    if order == 0:
        return np.pi - phi
    if order == 1:
        return np.sin(phi) + (np.pi - phi) * np.cos(phi)
    sin, cos = np.sin(phi), np.cos(phi)
    return 3.0 * sin * cos + (np.pi - phi) * (1.0 + 2.0 * cos**2)


def _j_derivative(order, phi):
    if order == 0:
        return -np.ones_like(phi)
    if order == 1:
        return -(np.pi - phi) * np.sin(phi)
    # d/dphi J_2 simplifies to -4 sin(phi) J_1(phi)
    return -4.0 * np.sin(phi) * _j_value(1, phi)


def gram(spec, x, x2=None):
    """Gram matrix ``K[i, j] = k(x_i, x2_j)``; symmetrized when ``x2`` is None."""
    x = _as_2d(x)
    symmetric = x2 is None
    x2 = x if symmetric else _as_2d(x2)
    sf2 = spec.signal_variance

    if spec.family in _STATIONARY:
        sq = _scaled_sqdist(x, x2, spec.lengthscales)
        if spec.family == "se":
            k = sf2 * np.exp(-0.5 * sq)
        else:
            r = np.sqrt(sq)
            if spec.family == "matern12":
                k = sf2 * np.exp(-r)
            elif spec.family == "matern32":
                sr = math.sqrt(3.0) * r
                k = sf2 * (1.0 + sr) * np.exp(-sr)
            else:
                sr = math.sqrt(5.0) * r
                k = sf2 * (1.0 + sr + sr**2 / 3.0) * np.exp(-sr)
    else:
        order = spec.arccos_order
        _, _, _, p_norm, _, phi = _arccos_parts(spec, x, x2)
        k = (sf2 / np.pi) * p_norm**order * _j_value(order, phi)

    if symmetric:
        k = 0.5 * (k + k.T)
        # The diagonal has an exact closed form; the pairwise route wobbles
        # at c = 1 where arccos is infinitely sensitive.
        np.fill_diagonal(k, gram_diag(spec, x))
    return k


def gram_diag(spec, x):
    """Diagonal ``k(x_i, x_i)`` in O(N), without forming the Gram matrix."""
    x = _as_2d(x)
    n = x.shape[0]
    sf2 = spec.signal_variance
    if spec.family in _STATIONARY:
        return np.full(n, sf2)
    order = spec.arccos_order
    sx = np.sum(spec.weight_variances * x**2, axis=1) + spec.bias_variance
    if order == 0:
        return np.full(n, sf2)
    if order == 1:
        return sf2 * sx
    return 3.0 * sf2 * sx**2


def eval_pair(spec, x, x2):
    """Single kernel evaluation ``k(x, x2)``."""
    return float(gram(spec, _as_2d(x), _as_2d(x2))[0, 0])


def _chain(spec):
    """d(raw)/d(unconstrained) per kernel hyperparameter, in packed order."""
    if spec.family in _STATIONARY:
        raw = np.concatenate([spec.lengthscales, [spec.signal_variance]])
    else:
        raw = np.concatenate(
            [spec.weight_variances, [spec.bias_variance, spec.signal_variance]]
        )
    return raw - HYPER_FLOOR


def gram_hyper_derivatives(spec, x, x2=None):
    """One matrix per unconstrained kernel hyperparameter, in packed order.

    The noise variance is not included (the Gram matrix does not depend on
    it); callers add its identity-direction term themselves.
    """
    x = _as_2d(x)
    x2 = x if x2 is None else _as_2d(x2)
    sf2 = spec.signal_variance
    chain = _chain(spec)
    out = []

    if spec.family in _STATIONARY:
        ls = spec.lengthscales
        sq = _scaled_sqdist(x, x2, ls)
        r = np.sqrt(sq)
        if spec.family == "se":
            k = sf2 * np.exp(-0.5 * sq)
            radial = k  # dK/dl_d = K * D_d / l_d^3
        elif spec.family == "matern12":
            k = sf2 * np.exp(-r)
            with np.errstate(divide="ignore", invalid="ignore"):
                radial = np.where(r > 0, k / r, 0.0)
        elif spec.family == "matern32":
            sr = math.sqrt(3.0) * r
            k = sf2 * (1.0 + sr) * np.exp(-sr)
            radial = 3.0 * sf2 * np.exp(-sr)
        else:
            sr = math.sqrt(5.0) * r
            k = sf2 * (1.0 + sr + sr**2 / 3.0) * np.exp(-sr)
            radial = (5.0 / 3.0) * sf2 * (1.0 + sr) * np.exp(-sr)
        for d in range(ls.shape[0]):
            diff2 = (x[:, d][:, None] - x2[:, d][None, :]) ** 2
            out.append(radial * diff2 / ls[d] ** 3 * chain[d])
        out.append(k / sf2 * chain[-1])
        return out

    order = spec.arccos_order
    s, sx, sy, p_norm, cosphi, phi = _arccos_parts(spec, x, x2)
    jval = _j_value(order, phi)
    jder = _j_derivative(order, phi)
    k = (sf2 / np.pi) * p_norm**order * jval
    sinphi = np.sqrt(np.maximum(1.0 - cosphi**2, 0.0))
    angle_ok = sinphi > _SIN_PHI_GUARD
    norm_ok = p_norm > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_sx = np.where(sx > 0, 1.0 / sx, 0.0)
        inv_sy = np.where(sy > 0, 1.0 / sy, 0.0)
        inv_pn = np.where(norm_ok, 1.0 / np.where(norm_ok, p_norm, 1.0), 0.0)
        inv_sin = np.where(angle_ok, 1.0 / np.where(angle_ok, sinphi, 1.0), 0.0)

    def d_inner(ds, dsx, dsy, scale):
        # dsx, dsy are vectors; ds is the N x P derivative of the inner product
        dpn = 0.5 * p_norm * (np.add.outer(dsx * inv_sx, dsy * inv_sy))
        dcos = (ds - cosphi * dpn) * inv_pn
        dphi = -dcos * inv_sin
        dk = (sf2 / np.pi) * p_norm**order * jder * dphi
        if order > 0:
            dk = dk + (sf2 / np.pi) * order * p_norm ** (order - 1) * dpn * jval
        return dk * scale

    input_dim = spec.weight_variances.shape[0]
    for d in range(input_dim):
        ds = np.outer(x[:, d], x2[:, d])
        out.append(d_inner(ds, x[:, d] ** 2, x2[:, d] ** 2, chain[d]))
    ones_n = np.ones(x.shape[0])
    ones_p = np.ones(x2.shape[0])
    out.append(d_inner(np.ones_like(s), ones_n, ones_p, chain[input_dim]))
    out.append(k / sf2 * chain[-1])
    return out


def gram_diag_hyper_derivatives(spec, x):
    """Derivatives of :func:`gram_diag` in packed order, O(N) each."""
    x = _as_2d(x)
    n = x.shape[0]
    sf2 = spec.signal_variance
    chain = _chain(spec)
    out = []
    if spec.family in _STATIONARY:
        for d in range(spec.lengthscales.shape[0]):
            out.append(np.zeros(n))
        out.append(np.full(n, chain[-1]))
        return out

    order = spec.arccos_order
    diag = gram_diag(spec, x)
    sx = np.sum(spec.weight_variances * x**2, axis=1) + spec.bias_variance
    # d diag / d s_xx: 0, sigma_f^2, 6 sigma_f^2 s_xx for orders 0, 1, 2
    if order == 0:
        dds = np.zeros(n)
    elif order == 1:
        dds = np.full(n, sf2)
    else:
        dds = 6.0 * sf2 * sx
    input_dim = spec.weight_variances.shape[0]
    for d in range(input_dim):
        out.append(dds * x[:, d] ** 2 * chain[d])
    out.append(dds * chain[input_dim])
    out.append(diag / sf2 * chain[-1])
    return out
