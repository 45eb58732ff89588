"""Uncollapsed stochastic variational GP regression.

Keeps an explicit Gaussian over the inducing values, q(u) = N(m, S), which
makes the bound decompose over datapoints and therefore minibatchable:

    L = (N/|B|) sum_{i in B} E_{q(f(x_i))}[log N(y_i | f(x_i), s)]
        - KL[q(u) || p(u)],

with the expected log likelihood in closed form,
``log N(y_i | mu_i, s) - var_i / (2 s)`` where (mu_i, var_i) are the
marginals of q(f(x_i)).  Training runs Adam over everything at once: the
inducing locations, m, the Cholesky factor of S (softplus-positive
diagonal), and the unconstrained kernel/noise hyperparameters, optionally
with a reduce-on-plateau learning-rate schedule keyed to the full-data
bound once per epoch.

The forward computations are written in torch so that a single
implementation serves both evaluation and gradient-based training; the
public API accepts and returns numpy arrays.  The collapsed bounds in
:mod:`sgpbench.sgpr` are a fully independent numpy path, which the tests
exploit as an oracle.
"""

import math
from dataclasses import dataclass

import numpy as np
import torch

from . import kernels
from .errors import NonFiniteObjective, TrainingFailure
from .inducing import greedy_variance_select
from .numerics import DEFAULT_JITTER

__all__ = [
    "SvgpParams",
    "SvgpTrainConfig",
    "default_params",
    "optimal_q",
    "svgp_elbo_minibatch",
    "svgp_elbo",
    "svgp_predict",
    "train_svgp",
]

_STATIONARY = ("se", "matern12", "matern32", "matern52")


@dataclass(frozen=True)
class SvgpParams:
    """Trainable state: inducing locations, q(u), and hyperparameters."""

    z: np.ndarray
    q_mean: np.ndarray
    q_sqrt: np.ndarray  # lower triangular, positive diagonal
    spec: kernels.KernelSpec
    noise_variance: float

    def __post_init__(self):
        q_sqrt = np.asarray(self.q_sqrt, dtype=float)
        if np.any(np.diag(q_sqrt) <= 0.0):
            raise ValueError("q_sqrt must have a strictly positive diagonal")
        object.__setattr__(self, "q_sqrt", np.tril(q_sqrt))

    @property
    def m(self):
        return self.z.shape[0]


@dataclass(frozen=True)
class SvgpTrainConfig:
    batch_size: int = None  # None: min(N, 10_000)
    learning_rate: float = 0.1
    betas: tuple = (0.9, 0.999)
    total_steps: int = 20000
    use_scheduler: bool = True
    scheduler_patience_epochs: int = 10
    scheduler_factor: float = 0.95
    scheduler_threshold: float = 0.0
    scheduler_min_lr: float = 1e-6
    seed: int = 0
    max_skipped_fraction: float = 0.1

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def default_params(x, family, m, noise_variance=0.1, kernel_value=1.0):
    """Greedy-variance inducing init with m = 0 and identity covariance factor."""
    x = kernels._as_2d(x)
    spec = kernels.default_spec(family, x.shape[1], kernel_value)
    selection = greedy_variance_select(x, spec, min(m, x.shape[0]))
    z = x[selection.indices]
    return SvgpParams(
        z=z,
        q_mean=np.zeros(z.shape[0]),
        q_sqrt=np.eye(z.shape[0]),
        spec=spec,
        noise_variance=noise_variance,
    )


def optimal_q(z, spec, noise_variance, x, y):
    """Closed-form optimum of q(u) for fixed (z, hyperparameters).

    Computed by plain dense numpy algebra, independent of both the torch
    path and the collapsed bounds: with P = K_zz + K_zx K_xz / s,

        m* = K_zz P^-1 K_zx y / s,      S* = K_zz P^-1 K_zz.
    """
    x = kernels._as_2d(x)
    z = kernels._as_2d(z)
    y = np.asarray(y, dtype=float).ravel()
    kzz = kernels.gram(spec, z) + 1e-12 * np.eye(z.shape[0])
    kzx = kernels.gram(spec, z, x)
    p = kzz + kzx @ kzx.T / noise_variance
    m_star = kzz @ np.linalg.solve(p, kzx @ y) / noise_variance
    s_star = kzz @ np.linalg.solve(p, kzz)
    s_star = 0.5 * (s_star + s_star.T)
    return m_star, s_star


# -- torch twins of the kernel computations ---------------------------------

_JITTERS = DEFAULT_JITTER.schedule()


def _t(a):
    # always copies: training mutates leaves in place and must never alias
    # the caller's numpy arrays
    return torch.tensor(np.asarray(a, dtype=float), dtype=torch.float64)


def _chol(mat):
    """Cholesky with the package's adaptive jitter schedule."""
    eye = torch.eye(mat.shape[0], dtype=mat.dtype)
    for eps in _JITTERS:
        shifted = mat + eps * eye if eps else mat
        factor, info = torch.linalg.cholesky_ex(shifted)
        if int(info) == 0 and bool(torch.all(torch.isfinite(factor))):
            return factor
    raise NonFiniteObjective("torch Cholesky failed at every jitter level")


def _sqdist(x, x2, lengthscales):
    xs = x / lengthscales
    x2s = x2 / lengthscales
    sx = (xs**2).sum(dim=1)
    sy = (x2s**2).sum(dim=1)
    sq = sx[:, None] + sy[None, :] - 2.0 * xs @ x2s.T
    floor = 32.0 * torch.finfo(torch.float64).eps * (sx[:, None] + sy[None, :])
    return torch.where(sq <= floor, torch.zeros_like(sq), sq)


def _gram_t(family, hypers, x, x2):
    sf2 = hypers["signal"]
    if family in _STATIONARY:
        sq = _sqdist(x, x2, hypers["lengthscales"])
        if family == "se":
            return sf2 * torch.exp(-0.5 * sq)
        r = torch.sqrt(torch.clamp(sq, min=1e-36))
        if family == "matern12":
            return sf2 * torch.exp(-r)
        if family == "matern32":
            sr = math.sqrt(3.0) * r
            return sf2 * (1.0 + sr) * torch.exp(-sr)
        sr = math.sqrt(5.0) * r
        return sf2 * (1.0 + sr + sr**2 / 3.0) * torch.exp(-sr)

    order = int(family[-1])
    w, b = hypers["weights"], hypers["bias"]
    s = (x * w) @ x2.T + b
    sx = (w * x**2).sum(dim=1) + b
    sy = (w * x2**2).sum(dim=1) + b
    p_norm = torch.sqrt(torch.outer(sx, sy))
    c = torch.clamp(s / p_norm, -1.0 + 1e-12, 1.0 - 1e-12)
    phi = torch.arccos(c)
    if order == 0:
        j = torch.pi - phi
    elif order == 1:
        j = torch.sin(phi) + (torch.pi - phi) * torch.cos(phi)
    else:
        j = 3.0 * torch.sin(phi) * torch.cos(phi) + (torch.pi - phi) * (
            1.0 + 2.0 * torch.cos(phi) ** 2
        )
    return (sf2 / torch.pi) * p_norm**order * j


def _gram_diag_t(family, hypers, x):
    if family in _STATIONARY:
        return hypers["signal"] * torch.ones(x.shape[0], dtype=x.dtype)
    order = int(family[-1])
    sx = (hypers["weights"] * x**2).sum(dim=1) + hypers["bias"]
    if order == 0:
        return hypers["signal"] * torch.ones(x.shape[0], dtype=x.dtype)
    if order == 1:
        return hypers["signal"] * sx
    return 3.0 * hypers["signal"] * sx**2


def _split_hypers(family, input_dim, raw):
    """Constrained hyperparameter tensor -> named pieces (noise last)."""
    if family in _STATIONARY:
        return {
            "lengthscales": raw[:input_dim],
            "signal": raw[input_dim],
        }, raw[-1]
    return {
        "weights": raw[:input_dim],
        "bias": raw[input_dim],
        "signal": raw[input_dim + 1],
    }, raw[-1]


class _TorchState:
    """Leaf tensors for training, built from (and convertible to) SvgpParams."""

    def __init__(self, params, requires_grad=False):
        self.family = params.spec.family
        self.input_dim = params.spec.input_dim
        self.z = _t(params.z).requires_grad_(requires_grad)
        self.q_mean = _t(params.q_mean).requires_grad_(requires_grad)
        factor = np.asarray(params.q_sqrt, dtype=float)
        raw = np.tril(factor, -1) + np.diag(_softplus_inv(np.diag(factor)))
        self.q_sqrt_raw = _t(raw).requires_grad_(requires_grad)
        self.hypers_u = _t(
            kernels.pack(params.spec, params.noise_variance)
        ).requires_grad_(requires_grad)

    def leaves(self):
        return [self.z, self.q_mean, self.q_sqrt_raw, self.hypers_u]

    def q_sqrt(self):
        lower = torch.tril(self.q_sqrt_raw, diagonal=-1)
        diag = torch.nn.functional.softplus(torch.diagonal(self.q_sqrt_raw))
        return lower + torch.diag(diag)

    def hypers(self):
        raw = kernels.HYPER_FLOOR + torch.exp(self.hypers_u)
        return _split_hypers(self.family, self.input_dim, raw)

    def to_params(self):
        with torch.no_grad():
            spec, noise = kernels.unpack(
                self.hypers_u.numpy().copy(), self.family, self.input_dim
            )
            return SvgpParams(
                z=self.z.numpy().copy(),
                q_mean=self.q_mean.numpy().copy(),
                q_sqrt=self.q_sqrt().numpy().copy(),
                spec=spec,
                noise_variance=noise,
            )


def _softplus_inv(x):
    return np.log(np.expm1(x))


def _elbo_t(state, x_batch, y_batch, scale):
    """Minibatch bound as a torch scalar (differentiable)."""
    hypers, noise = state.hypers()
    z = state.z
    m_vec = state.q_mean
    l_s = state.q_sqrt()

    kzz = _gram_t(state.family, hypers, z, z)
    kzz = 0.5 * (kzz + kzz.T)
    lower = _chol(kzz)
    kzb = _gram_t(state.family, hypers, z, x_batch)
    a = torch.linalg.solve_triangular(lower, kzb, upper=False)

    w = torch.linalg.solve_triangular(lower, m_vec[:, None], upper=False)[:, 0]
    mu = a.T @ w
    lt_a = torch.linalg.solve_triangular(lower.T, a, upper=True)
    proj_s = l_s.T @ lt_a
    var = (
        _gram_diag_t(state.family, hypers, x_batch)
        - (a**2).sum(dim=0)
        + (proj_s**2).sum(dim=0)
    )
    var = torch.clamp(var, min=0.0)

    resid = y_batch - mu
    expected_ll = (
        -0.5 * math.log(2.0 * math.pi)
        - 0.5 * torch.log(noise)
        - (resid**2 + var) / (2.0 * noise)
    ).sum()

    l_inv_ls = torch.linalg.solve_triangular(lower, l_s, upper=False)
    kl = 0.5 * (
        (l_inv_ls**2).sum()
        + (w**2).sum()
        - z.shape[0]
        + 2.0 * torch.log(torch.diagonal(lower)).sum()
        - 2.0 * torch.log(torch.diagonal(l_s)).sum()
    )
    return scale * expected_ll - kl


def svgp_elbo_minibatch(params, x_batch, y_batch, scale):
    """Unbiased minibatch estimate of the bound, in nats.

    ``scale`` is N over the batch size; with the full data and scale 1 this
    is the exact (unminibatched) bound.
    """
    state = _TorchState(params)
    with torch.no_grad():
        value = _elbo_t(
            state, _t(kernels._as_2d(x_batch)), _t(y_batch).ravel(), float(scale)
        )
    value = float(value)
    if not np.isfinite(value):
        raise NonFiniteObjective(f"SVGP bound evaluated to {value}")
    return value


def svgp_elbo(params, x, y):
    """Full-data bound: the scale-1 path of :func:`svgp_elbo_minibatch`."""
    return svgp_elbo_minibatch(params, x, y, 1.0)


def svgp_predict(params, x_star):
    """Predictive marginals at ``x_star``.

    Returns ``(mean, latent_variance, observation_variance)``:
    ``k_*z K_zz^-1 m`` and
    ``k_** - k_*z K_zz^-1 (K_zz - S) K_zz^-1 k_z*`` plus noise.
    """
    x_star = kernels._as_2d(x_star)
    if x_star.shape[0] == 0:
        empty = np.zeros(0)
        return empty, empty.copy(), empty.copy()
    state = _TorchState(params)
    with torch.no_grad():
        hypers, noise = state.hypers()
        kzz = _gram_t(state.family, hypers, state.z, state.z)
        kzz = 0.5 * (kzz + kzz.T)
        lower = _chol(kzz)
        kzs = _gram_t(state.family, hypers, state.z, _t(x_star))
        a = torch.linalg.solve_triangular(lower, kzs, upper=False)
        w = torch.linalg.solve_triangular(lower, state.q_mean[:, None], upper=False)
        mean = a.T @ w[:, 0]
        lt_a = torch.linalg.solve_triangular(lower.T, a, upper=True)
        proj_s = state.q_sqrt().T @ lt_a
        latent = (
            _gram_diag_t(state.family, hypers, _t(x_star))
            - (a**2).sum(dim=0)
            + (proj_s**2).sum(dim=0)
        )
        latent = torch.clamp(latent, min=0.0)
        obs = latent + noise
    return mean.numpy(), latent.numpy(), obs.numpy()


def train_svgp(x, y, init, config=SvgpTrainConfig()):
    """Adam training of all SVGP parameters; returns (params, trace).

    Minibatches are drawn without replacement within each epoch from a
    seeded shuffle. Steps whose loss or gradients are non-finite are skipped
    (parameters unchanged) and counted; more than
    ``config.max_skipped_fraction`` of skipped steps aborts with
    :class:`TrainingFailure`. The scheduler (reduce-on-plateau) watches the
    full-data bound once per epoch.

    The trace dict holds per-step minibatch bounds, per-epoch full bounds,
    and the learning rate after each epoch.
    """
    x = kernels._as_2d(x)
    y = np.asarray(y, dtype=float).ravel()
    n = x.shape[0]
    batch_size = config.batch_size or min(n, 10_000)
    batch_size = min(batch_size, n)

    state = _TorchState(init, requires_grad=True)
    opt = torch.optim.Adam(
        state.leaves(), lr=config.learning_rate, betas=config.betas
    )
    scheduler = None
    if config.use_scheduler:
        scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(
            opt,
            mode="max",
            factor=config.scheduler_factor,
            patience=config.scheduler_patience_epochs,
            threshold=config.scheduler_threshold,
            min_lr=config.scheduler_min_lr,
        )

    x_t, y_t = _t(x), _t(y)
    rng = np.random.default_rng(config.seed)
    steps_per_epoch = max(1, int(np.ceil(n / batch_size)))
    trace = {"step_elbo": [], "epoch_elbo": [], "learning_rate": []}
    skipped = 0
    step = 0
    while step < config.total_steps:
        order = rng.permutation(n) if batch_size < n else np.arange(n)
        for start in range(0, n, batch_size):
            if step >= config.total_steps:
                break
            idx = order[start : start + batch_size]
            scale = n / idx.size
            opt.zero_grad()
            try:
                value = _elbo_t(state, x_t[idx], y_t[idx], scale)
            except NonFiniteObjective:
                value = None
            if value is None or not bool(torch.isfinite(value)):
                skipped += 1
                step += 1
                continue
            loss = -value
            loss.backward()
            if any(
                leaf.grad is not None and not bool(torch.all(torch.isfinite(leaf.grad)))
                for leaf in state.leaves()
            ):
                skipped += 1
                step += 1
                continue
            opt.step()
            trace["step_elbo"].append(float(value.detach()))
            step += 1
        # end of epoch: full-data bound for the scheduler and the trace
        with torch.no_grad():
            try:
                full = float(_elbo_t(state, x_t, y_t, 1.0))
            except NonFiniteObjective:
                full = float("nan")
        trace["epoch_elbo"].append(full)
        if scheduler is not None and np.isfinite(full):
            scheduler.step(full)
        trace["learning_rate"].append(float(opt.param_groups[0]["lr"]))
        if skipped > config.max_skipped_fraction * max(step, steps_per_epoch):
            raise TrainingFailure(
                f"{skipped} of {step} SVGP steps produced non-finite losses"
            )
    trace["skipped_steps"] = skipped
    return state.to_params(), trace
