"""Evaluation metrics, trivial reference models, and metric-curve smoothing."""

import numpy as np

from .errors import LengthMismatch, NonPositiveVariance

__all__ = [
    "rmse",
    "nlpd",
    "linear_baseline",
    "constant_baseline",
    "smooth_metric_curve",
]

LOG_2PI = float(np.log(2.0 * np.pi))

# Ridge penalty applied when the linear baseline's design matrix is singular.
RIDGE_FALLBACK = 1e-8

SMOOTH_CATCHUP_REL = 1e-6


def rmse(pred_mean, y):
    """Root-mean-square error."""
    pred_mean = np.asarray(pred_mean, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if pred_mean.size != y.size:
        raise LengthMismatch(f"{pred_mean.size} predictions vs {y.size} targets")
    if y.size == 0:
        raise LengthMismatch("need at least one point")
    return float(np.sqrt(np.mean((pred_mean - y) ** 2)))


def nlpd(pred_mean, pred_variance, y):
    """Mean negative log predictive density under per-point Gaussians.

    ``pred_variance`` must be the observation variance (latent plus noise):
    held-out targets contain noise.
    """
    pred_mean = np.asarray(pred_mean, dtype=float).ravel()
    pred_variance = np.asarray(pred_variance, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if not pred_mean.size == pred_variance.size == y.size:
        raise LengthMismatch(
            f"sizes differ: {pred_mean.size}/{pred_variance.size}/{y.size}"
        )
    if y.size == 0:
        raise LengthMismatch("need at least one point")
    if np.any(pred_variance <= 0.0):
        raise NonPositiveVariance(f"min variance {pred_variance.min():.3e}")
    dev = (y - pred_mean) ** 2 / (2.0 * pred_variance)
    return float(np.mean(0.5 * np.log(2.0 * np.pi * pred_variance) + dev))


def _gaussian_train_loglik(residuals, variance):
    n = residuals.size
    return float(
        -0.5 * n * LOG_2PI
        - 0.5 * n * np.log(variance)
        - float(np.sum(residuals**2)) / (2.0 * variance)
    )


def linear_baseline(x_train, y_train, x_test, y_test):
    """Ordinary least squares with intercept and MLE Gaussian noise.

    Returns a dict with the training log likelihood (the honest analogue of
    a marginal-likelihood column for a non-Bayesian model), test RMSE and
    NLPD, and a note when a singular design forced a ridge fallback.
    """
    x_train = np.asarray(x_train, dtype=float)
    y_train = np.asarray(y_train, dtype=float).ravel()
    design = np.column_stack([np.ones(x_train.shape[0]), x_train])
    note = ""
    solution, _, rank, _ = np.linalg.lstsq(design, y_train, rcond=None)
    if rank < design.shape[1]:
        gram = design.T @ design + RIDGE_FALLBACK * np.eye(design.shape[1])
        solution = np.linalg.solve(gram, design.T @ y_train)
        note = f"singular design; ridge fallback {RIDGE_FALLBACK:g}"
    residuals = y_train - design @ solution
    noise_variance = max(float(np.mean(residuals**2)), 1e-12)

    design_test = np.column_stack([np.ones(np.asarray(x_test).shape[0]), x_test])
    pred = design_test @ solution
    variances = np.full(pred.shape, noise_variance)
    return {
        "method": "Linear",
        "train_loglik": _gaussian_train_loglik(residuals, noise_variance),
        "rmse": rmse(pred, y_test),
        "nlpd": nlpd(pred, variances, y_test),
        "note": note,
    }


def constant_baseline(y_train, y_test):
    """Predict the training mean with the training variance everywhere."""
    y_train = np.asarray(y_train, dtype=float).ravel()
    y_test = np.asarray(y_test, dtype=float).ravel()
    mean = float(np.mean(y_train))
    variance = max(float(np.var(y_train)), 1e-12)
    pred = np.full(y_test.shape, mean)
    variances = np.full(y_test.shape, variance)
    residuals = y_train - mean
    return {
        "method": "ConstantMean",
        "train_loglik": _gaussian_train_loglik(residuals, variance),
        "rmse": rmse(pred, y_test),
        "nlpd": nlpd(pred, variances, y_test),
        "note": "",
    }


def smooth_metric_curve(series, companions=None, mode="min"):
    """Mask re-initialization discontinuities in a metric-vs-time series.

    ``series`` is an ordered list of ``(time, value, m_label)``. When the
    budget label changes, the model restarts from scratch and the metric
    jumps to a transiently worse value; the smoothed curve holds the last
    pre-transition value until the raw series catches back up to it (within
    a relative tolerance), after which raw values resume.  ``mode`` sets the
    improvement direction of the channel: "min" (losses, negative bounds,
    errors) or "max" (the lower bound itself).

    The final point of the series is always reported raw, and extra channels
    in ``companions`` (same length) are held over exactly the same windows.

    Returns the smoothed values (and the smoothed companions when given).
    """
    if mode not in ("min", "max"):
        raise ValueError(f"mode must be 'min' or 'max', got {mode!r}")
    values = [float(v) for (_, v, _) in series]
    labels = [label for (_, _, label) in series]
    companions = [list(map(float, ch)) for ch in (companions or [])]
    for ch in companions:
        if len(ch) != len(values):
            raise LengthMismatch("companion channel length differs from series")

    out = list(values)
    outc = [list(ch) for ch in companions]
    held_at = None  # index of the value being held
    for i in range(1, len(values)):
        transition = labels[i] != labels[i - 1]
        if held_at is None and not transition:
            continue
        if held_at is None:
            held_at = i - 1
        held = out[held_at]
        tol = SMOOTH_CATCHUP_REL * abs(held)
        caught_up = (
            values[i] <= held + tol if mode == "min" else values[i] >= held - tol
        )
        if caught_up or i == len(values) - 1:
            held_at = None  # raw value resumes (always raw at the end)
        else:
            out[i] = held
            for ch, smoothed in zip(companions, outc):
                smoothed[i] = smoothed[held_at]
    if companions:
        return out, outc
    return out
