"""Fully automatic SGPR training: the increasing-M baseline procedure.

For each budget M in an increasing schedule (skipping budgets beyond 80% of
the training-set size, where sparsity stops paying for itself), the procedure

1. reinitializes the hyperparameters from scratch (avoiding local optima
   preferred by smaller-M models),
2. selects inducing points by greedy variance,
3. alternates L-BFGS hyperparameter optimization with greedy re-selection of
   the inducing points, accepting a re-selection only if it does not lower
   the bound, for at most ``max_epochs_per_m`` rounds,
4. records the bounds and held-out metrics, without counting metric
   evaluation in the training time.

The procedure takes the same inputs as exact GP regression: data plus a
kernel family. There is nothing to tune.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels, sgpr
from .errors import InvalidStart, NonFiniteObjective, TrainingFailure
from .inducing import greedy_variance_select
from .metrics import nlpd, rmse
from .optimizer import LbfgsConfig, minimize

__all__ = [
    "DEFAULT_M_SCHEDULE",
    "BaselineConfig",
    "CheckpointRecord",
    "fit_fixed_m",
    "run_baseline",
]

DEFAULT_M_SCHEDULE = (10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000)


@dataclass(frozen=True)
class BaselineConfig:
    m_schedule: tuple = DEFAULT_M_SCHEDULE
    max_epochs_per_m: int = 20
    m_cutoff_fraction: float = 0.8
    initial_noise_variance: float = 0.01
    initial_kernel_value: float = 1.0
    lbfgs: LbfgsConfig = field(default_factory=LbfgsConfig)
    timeout_seconds: float = None  # wall-clock budget for the whole run

    def __post_init__(self):
        schedule = tuple(int(m) for m in self.m_schedule)
        if any(b <= a for a, b in zip(schedule, schedule[1:])):
            raise ValueError("m_schedule must be strictly increasing")
        if not 0.0 < self.m_cutoff_fraction <= 1.0:
            raise ValueError("m_cutoff_fraction must be in (0, 1]")
        if self.max_epochs_per_m < 1:
            raise ValueError("max_epochs_per_m must be >= 1")
        object.__setattr__(self, "m_schedule", schedule)


@dataclass(frozen=True)
class CheckpointRecord:
    """One row of the benchmark output, logged after training at one M."""

    m: int
    m_actual: int  # < m when greedy selection stopped early on duplicates
    elapsed_train_seconds: float
    elbo: float
    upper_bound: float
    rmse: float
    nlpd: float
    hyperparameters: dict
    epochs_used: int
    failed: bool = False


def _initial_values(family, input_dim, config):
    spec = kernels.default_spec(family, input_dim, config.initial_kernel_value)
    return kernels.pack(spec, config.initial_noise_variance)


def fit_fixed_m(x, y, family, values0, m, config=BaselineConfig()):
    """Train hyperparameters at a fixed budget M; returns (model, epochs).

    Alternates maximizing the bound over hyperparameters (inducing points
    fixed) with greedy re-selection of the inducing points at the new
    hyperparameters. A re-selection that lowers the bound is rejected and
    ends the loop; by construction the accepted bound sequence is
    non-decreasing.

    Raises
    ------
    TrainingFailure
        If no finite bound can be produced at all for this M.
    """
    x = kernels._as_2d(x)
    y = np.asarray(y, dtype=float).ravel()
    input_dim = x.shape[1]
    values = np.asarray(values0, dtype=float).copy()

    def select(vals):
        spec, _ = kernels.unpack(vals, family, input_dim)
        result = greedy_variance_select(x, spec, min(m, x.shape[0]))
        return x[result.indices]

    def objective(vals):
        value, grad = sgpr.elbo_with_gradient(x, y, vals, family, z)
        return -value, -grad

    def bound_at(vals, z_current):
        spec, noise = kernels.unpack(vals, family, input_dim)
        return sgpr.elbo(
            sgpr.SgprModel(z=z_current, spec=spec, noise_variance=noise), x, y
        )

    z = select(values)
    epochs_used = 0
    for epoch in range(1, config.max_epochs_per_m + 1):
        try:
            result = minimize(objective, values, config.lbfgs)
        except InvalidStart as exc:
            if epoch == 1:
                raise TrainingFailure(
                    f"no finite bound at initialization for M={m}"
                ) from exc
            break  # keep the last accepted state
        values = result.x_final
        epochs_used = epoch
        try:
            current = bound_at(values, z)
        except NonFiniteObjective as exc:
            if epoch == 1:
                raise TrainingFailure(f"bound not finite after optimizing, M={m}") from exc
            break
        z_new = select(values)
        if np.array_equal(z_new, z):
            break  # no-op reselection: nothing left to alternate over
        try:
            proposed = bound_at(values, z_new)
        except NonFiniteObjective:
            break
        if proposed < current:
            break
        z = z_new

    spec, noise = kernels.unpack(values, family, input_dim)
    return sgpr.SgprModel(z=z, spec=spec, noise_variance=noise), epochs_used


def run_baseline(
    dataset,
    family,
    config=BaselineConfig(),
    clock=time.perf_counter,
):
    """Run the full increasing-M procedure over a standardized dataset.

    Training segments are timed with ``clock`` (monotonic); metric
    evaluation happens between timed segments and does not count. A failed
    budget is recorded with non-finite bounds and the run continues, so that
    the remaining budget points of the compute/accuracy frontier still get
    filled in.

    Returns the ordered list of :class:`CheckpointRecord`.
    """
    x, y = dataset.x_train, dataset.y_train
    n = x.shape[0]
    cutoff = int(np.floor(config.m_cutoff_fraction * n))
    records = []
    elapsed = 0.0
    for m in config.m_schedule:
        if m > cutoff:
            break
        if config.timeout_seconds is not None and elapsed >= config.timeout_seconds:
            break
        values0 = _initial_values(family, x.shape[1], config)
        start = clock()
        try:
            model, epochs_used = fit_fixed_m(x, y, family, values0, m, config)
        except TrainingFailure:
            elapsed += clock() - start
            records.append(
                CheckpointRecord(
                    m=m,
                    m_actual=0,
                    elapsed_train_seconds=elapsed,
                    elbo=float("nan"),
                    upper_bound=float("nan"),
                    rmse=float("nan"),
                    nlpd=float("nan"),
                    hyperparameters={},
                    epochs_used=0,
                    failed=True,
                )
            )
            continue
        elapsed += clock() - start

        # untimed: bounds and held-out metrics
        report = sgpr.bound_report(model, x, y)
        mean, _, obs_var = sgpr.sgpr_predict(model, x, y, dataset.x_test)
        records.append(
            CheckpointRecord(
                m=m,
                m_actual=model.m,
                elapsed_train_seconds=elapsed,
                elbo=report.elbo,
                upper_bound=report.upper_bound,
                rmse=rmse(mean, dataset.y_test),
                nlpd=nlpd(mean, obs_var, dataset.y_test),
                hyperparameters=_spec_dict(model),
                epochs_used=epochs_used,
            )
        )
    if not records:
        raise TrainingFailure(f"schedule contains no M <= {cutoff} for N={n}")
    return records


def _spec_dict(model):
    spec = model.spec
    names = kernels.hyperparameter_names(spec.family, spec.input_dim)
    if spec.family in kernels._STATIONARY:
        raw = [*spec.lengthscales, spec.signal_variance, model.noise_variance]
    else:
        raw = [
            *spec.weight_variances,
            spec.bias_variance,
            spec.signal_variance,
            model.noise_variance,
        ]
    return dict(zip(names, [float(v) for v in raw]))
