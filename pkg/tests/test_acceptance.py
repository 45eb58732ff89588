"""Acceptance suite: every release criterion, one pass/fail line each.

Each test prints ``[criterion NN] PASS|FAIL - summary`` so a plain pytest
run doubles as a checklist. Tolerances are fixed here, not calibrated.
"""

import time

import numpy as np
import pytest

from sgpbench import baseline, datasets, exact_gpr, kernels, metrics, sgpr, svgp
from sgpbench.baseline import BaselineConfig, run_baseline
from sgpbench.inducing import greedy_variance_select
from sgpbench.numerics import jittered_cholesky
from sgpbench.optimizer import GRAD_TOL, MAX_ITERS, LbfgsConfig, minimize
from sgpbench.reporting import MetricRow, pivot_table
from sgpbench.sgpr import SgprModel, guarded_trace
from sgpbench.svgp import SvgpParams, SvgpTrainConfig

from oracles import (
    brute_force_greedy,
    central_difference,
    central_difference_matrix,
    dense_elbo,
    dense_sparse_predict,
    dense_upper_bound,
    random_problem,
)

ALL_FAMILIES = list(kernels.FAMILIES)


def _verdict(number, ok, detail):
    print(f"[criterion {number:02d}] {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {number}: {detail}"


def _subset_model(rng, spec, noise, x, m):
    idx = rng.choice(x.shape[0], size=m, replace=False)
    return SgprModel(z=x[idx], spec=spec, noise_variance=noise)


def test_criterion_01_bound_sandwich():
    """Lower bound <= exact value <= upper bound on 100 random instances."""
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = -np.inf
    for i in range(100):
        family = ALL_FAMILIES[i % len(ALL_FAMILIES)]
        n = int(rng.integers(3, 51))
        spec, noise, x, y = random_problem(rng, n, 2, family)
        model = _subset_model(rng, spec, noise, x, int(rng.integers(1, n + 1)))
        lower = sgpr.elbo(model, x, y)
        exact = exact_gpr.lml(x, y, spec, noise)
        upper = sgpr.upper_bound(model, x, y)
        slack = 1e-8 * n
        worst = max(worst, lower - exact, exact - upper)
        assert lower <= exact + slack and exact <= upper + slack
    elapsed = time.perf_counter() - start
    _verdict(
        1,
        elapsed < 30.0,
        f"bound sandwich held on 100 instances (worst violation "
        f"{worst:.2e}) in {elapsed:.1f}s < 30s",
    )


def test_criterion_02_exact_recovery_at_full_budget():
    """With every training point inducing, the sparse model is the exact one."""
    rng = np.random.default_rng(202)
    worst_bound, worst_pred = 0.0, 0.0
    for i in range(20):
        family = ALL_FAMILIES[i % len(ALL_FAMILIES)]
        n = int(rng.integers(3, 101))
        spec, noise, x, y = random_problem(rng, n, 2, family)
        model = SgprModel(z=x, spec=spec, noise_variance=noise)
        lower = sgpr.elbo(model, x, y)
        exact = exact_gpr.lml(x, y, spec, noise)
        worst_bound = max(worst_bound, abs(lower - exact) / abs(exact))
        x_star = rng.standard_normal((5, 2))
        mean_s, lat_s, _ = sgpr.sgpr_predict(model, x, y, x_star)
        posterior = exact_gpr.fit_posterior(x, y, spec, noise)
        mean_e, lat_e, _ = exact_gpr.gpr_predict(posterior, x_star)
        worst_pred = max(
            worst_pred,
            float(np.max(np.abs(mean_s - mean_e))),
            float(np.max(np.abs(lat_s - lat_e))),
        )
    _verdict(
        2,
        worst_bound <= 1e-6 and worst_pred <= 1e-5,
        f"full-budget recovery: bound rel err {worst_bound:.2e} <= 1e-6, "
        f"prediction err {worst_pred:.2e} <= 1e-5 (20 instances)",
    )


def test_criterion_03_bound_monotone_in_budget():
    """Nested greedy prefixes never lower the bound at fixed hyperparameters."""
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(10, 61))
        spec, noise, x, y = random_problem(rng, n, 2)
        indices = greedy_variance_select(x, spec, min(n, 30)).indices
        previous = -np.inf
        for m in range(1, indices.size + 1):
            model = SgprModel(z=x[indices[:m]], spec=spec, noise_variance=noise)
            value = sgpr.elbo(model, x, y)
            worst = max(worst, previous - value)
            assert value >= previous - 1e-8 * n
            previous = value
    _verdict(3, True, f"budget monotonicity on 20 instances (worst dip {worst:.2e})")


def test_criterion_04_gradient_checks():
    """Analytic gradients match central finite differences to 1e-4."""
    rng = np.random.default_rng(404)
    worst = 0.0
    for family in ALL_FAMILIES:
        for _ in range(20):
            n, m = 8, 4
            spec, noise, x, y = random_problem(rng, n, 2, family)
            values = kernels.pack(spec, noise)
            x2 = rng.standard_normal((5, 2))

            def gram_of(u, x2=x2, family=family, tail=values[-1:]):
                spec_u, _ = kernels.unpack(np.concatenate([u, tail]), family, 2)
                return kernels.gram(spec_u, x[:5], x2)

            fd_mats = central_difference_matrix(gram_of, values[:-1])
            for a, f in zip(kernels.gram_hyper_derivatives(spec, x[:5], x2), fd_mats):
                scale = max(np.max(np.abs(a)), np.max(np.abs(f)), 1e-8)
                worst = max(worst, float(np.max(np.abs(a - f)) / scale))

            def lml_of(u, family=family):
                spec_u, noise_u = kernels.unpack(u, family, 2)
                return exact_gpr.lml(x, y, spec_u, noise_u)

            fd = central_difference(lml_of, values)
            grad = exact_gpr.lml_gradient(x, y, values, family)
            scale = max(np.max(np.abs(fd)), np.max(np.abs(grad)), 1e-8)
            worst = max(worst, float(np.max(np.abs(fd - grad)) / scale))

            model = _subset_model(rng, spec, noise, x, m)

            def elbo_of(u, family=family, z=model.z):
                spec_u, noise_u = kernels.unpack(u, family, 2)
                return sgpr.elbo(
                    SgprModel(z=z, spec=spec_u, noise_variance=noise_u), x, y
                )

            fd = central_difference(elbo_of, values)
            grad = sgpr.elbo_gradient(x, y, values, family, model.z)
            scale = max(np.max(np.abs(fd)), np.max(np.abs(grad)), 1e-8)
            worst = max(worst, float(np.max(np.abs(fd - grad)) / scale))
    _verdict(
        4,
        worst < 1e-4,
        f"gradients vs finite differences: max rel err {worst:.2e} < 1e-4 "
        f"(20 instances x {len(ALL_FAMILIES)} families x 3 gradient kinds)",
    )


def test_criterion_05_dense_oracle_equivalence():
    """Fast M x M route equals the explicit N x N formulas to 1e-8."""
    rng = np.random.default_rng(505)
    worst = 0.0
    for i in range(15):
        family = ALL_FAMILIES[i % len(ALL_FAMILIES)]
        n = int(rng.integers(5, 51))
        spec, noise, x, y = random_problem(rng, n, 2, family)
        model = _subset_model(rng, spec, noise, x, int(rng.integers(1, n + 1)))
        x_star = rng.standard_normal((6, 2))
        worst = max(
            worst,
            abs(sgpr.elbo(model, x, y) - dense_elbo(spec, noise, model.z, x, y)),
            abs(
                sgpr.upper_bound(model, x, y)
                - dense_upper_bound(spec, noise, model.z, x, y)
            ),
        )
        mean, lat, _ = sgpr.sgpr_predict(model, x, y, x_star)
        mean_o, var_o = dense_sparse_predict(spec, noise, model.z, x, y, x_star)
        worst = max(
            worst,
            float(np.max(np.abs(mean - mean_o))),
            float(np.max(np.abs(lat - var_o))),
        )
    _verdict(5, worst <= 1e-8, f"dense-oracle equivalence: max dev {worst:.2e} <= 1e-8")


def test_criterion_06_greedy_selection_oracle():
    """Pivoted-update selection equals from-scratch re-solving, exactly."""
    rng = np.random.default_rng(606)
    checked = 0
    for i in range(20):
        family = ALL_FAMILIES[i % len(ALL_FAMILIES)]
        n = int(rng.integers(5, 31))
        spec, noise, x, _ = random_problem(rng, n, 2, family)
        m = int(rng.integers(1, n + 1))
        fast = greedy_variance_select(x, spec, m).indices.tolist()
        slow = brute_force_greedy(spec, x, len(fast))
        assert fast == slow
        checked += 1
    _verdict(6, True, f"greedy selection equals brute-force oracle on {checked} instances")


def test_criterion_07_smooth_data_near_exact_certificate():
    """On smooth 1-D data the procedure certifies near-exactness by M <= 50
    and lands on hyperparameters matching the exact fit."""
    start = time.perf_counter()
    ds = datasets.generate_toy("smooth1d", 200, seed=0)
    n = ds.n_train
    records = run_baseline(ds, "se", BaselineConfig(m_schedule=(10, 20, 50)))
    certified = [
        r for r in records if (r.upper_bound - r.elbo) / n < 0.01 and r.m <= 50
    ]
    spec, noise, _ = exact_gpr.fit_mle(ds.x_train, ds.y_train, "se")
    exact = exact_gpr.lml(ds.x_train, ds.y_train, spec, noise)
    rel = (
        min(abs(r.elbo - exact) / abs(exact) for r in certified)
        if certified
        else np.inf
    )
    elapsed = time.perf_counter() - start
    _verdict(
        7,
        bool(certified) and rel < 0.01 and elapsed < 120.0,
        f"smooth1d: gap/N < 0.01 at M={certified[0].m if certified else '-'}"
        f", |bound - exact|/|exact| = {rel:.2e} < 0.01, {elapsed:.0f}s < 120s",
    )


def test_criterion_08_step_data_kernel_contrast():
    """On step data the stationary Matern-1/2 never certifies near-exactness
    while the order-1 arc-cosine kernel should certify at M <= 10.

    Note: the arc-cosine half is currently not attained by the automatic
    procedure on this generator (see the assertion message for measured
    values); the stationary half holds with a wide margin.
    """
    start = time.perf_counter()
    ds = datasets.generate_toy("step1d", 500, seed=0)
    n = ds.n_train
    config = BaselineConfig(m_schedule=baseline.DEFAULT_M_SCHEDULE)

    matern_records = run_baseline(ds, "matern12", config)
    largest = matern_records[-1]
    matern_gap = (largest.upper_bound - largest.elbo) / n
    matern_ok = matern_gap > 0.05

    arccos_records = run_baseline(ds, "arccos1", config)
    small_budget = [r for r in arccos_records if r.m <= 10]
    arccos_gap = min(
        (r.upper_bound - r.elbo) / n for r in small_budget
    )
    arccos_ok = arccos_gap < 0.01
    elapsed = time.perf_counter() - start
    _verdict(
        8,
        matern_ok and arccos_ok and elapsed < 300.0,
        f"step1d contrast: matern12 gap/N at M={largest.m} is "
        f"{matern_gap:.3f} (> 0.05 required: {matern_ok}); arccos1 gap/N at "
        f"M<=10 is {arccos_gap:.3f} (< 0.01 required: {arccos_ok}); "
        f"{elapsed:.0f}s < 300s",
    )


def test_criterion_09_constant_baseline_reference_values():
    """Standardized targets pin the constant baseline at RMSE 1, NLPD 1.419."""
    ds = datasets.generate_toy("smooth1d", 2000, seed=0)
    row = metrics.constant_baseline(ds.y_train, ds.y_test)
    ok = abs(row["rmse"] - 1.0) <= 0.05 and abs(row["nlpd"] - 1.419) <= 0.03
    _verdict(
        9,
        ok,
        f"constant baseline: rmse {row['rmse']:.3f} = 1.00 +/- 0.05, "
        f"nlpd {row['nlpd']:.3f} = 1.419 +/- 0.03",
    )


def test_criterion_10_numerical_robustness():
    """NaN regions, trace rounding, and singular Gram matrices all recover."""

    def nan_outside_ball(x):
        if np.linalg.norm(x) > 3.0:
            return float("nan"), np.full_like(x, np.nan)
        return 0.5 * float(x @ x), x.copy()

    result = minimize(nan_outside_ball, np.array([2.9, 0.0]))
    opt_ok = (
        result.termination in (GRAD_TOL, MAX_ITERS)
        and np.isfinite(result.f_final)
        and result.f_final <= 0.5 * 2.9**2
    )
    trace_ok = (
        guarded_trace(1000.0, 1000.0 + 1e-12, 1000.0) == 0.0
        and np.isnan(guarded_trace(1000.0, 1010.0, 1000.0))
    )
    factor = jittered_cholesky(np.array([[1.0, 1.0], [1.0, 1.0]]))
    chol_ok = factor.jitter_used == 1e-10
    _verdict(
        10,
        opt_ok and trace_ok and chol_ok,
        f"robustness: optimizer best f {result.f_final:.2e} finite; trace "
        f"guard clamps/escalates correctly; singular Gram recovered at "
        f"jitter {factor.jitter_used:g}",
    )


def test_criterion_11_svgp_consistency():
    """Explicit-q bound agrees with the collapsed one at the closed-form
    optimum, training approaches it, and minibatching is unbiased."""
    rng = np.random.default_rng(1111)
    spec, noise, x, y = random_problem(rng, 60, 2)
    z = x[greedy_variance_select(x, spec, 12).indices]
    m_star, s_star = svgp.optimal_q(z, spec, noise, x, y)
    params = SvgpParams(
        z=z,
        q_mean=m_star,
        q_sqrt=np.linalg.cholesky(s_star + 1e-12 * np.eye(12)),
        spec=spec,
        noise_variance=noise,
    )
    collapsed = sgpr.elbo(SgprModel(z=z, spec=spec, noise_variance=noise), x, y)
    optimum_dev = abs(svgp.svgp_elbo(params, x, y) - collapsed)

    spec2, noise2, x2, y2 = random_problem(
        np.random.default_rng(1112), 200, 2, "se", low=0.5, high=2.0
    )
    init = svgp.default_params(x2, "se", 20)
    trained, _ = svgp.train_svgp(
        x2, y2, init,
        SvgpTrainConfig(batch_size=None, learning_rate=0.01,
                        total_steps=5000, seed=0),
    )
    final = svgp.svgp_elbo(trained, x2, y2)
    collapsed_at_final = sgpr.elbo(
        SgprModel(z=trained.z, spec=trained.spec,
                  noise_variance=trained.noise_variance),
        x2, y2,
    )
    train_gap = collapsed_at_final - final

    n_small = 12
    spec3, noise3, x3, y3 = random_problem(np.random.default_rng(1113), n_small, 2)
    z3 = x3[greedy_variance_select(x3, spec3, 4).indices]
    m3, s3 = svgp.optimal_q(z3, spec3, noise3, x3, y3)
    params3 = SvgpParams(
        z=z3, q_mean=m3,
        q_sqrt=np.linalg.cholesky(s3 + 1e-12 * np.eye(4)),
        spec=spec3, noise_variance=noise3,
    )
    full = svgp.svgp_elbo(params3, x3, y3)
    partition_dev = 0.0
    for batch in (3, 4, 6):
        perm = np.random.default_rng(batch).permutation(n_small)
        estimates = [
            svgp.svgp_elbo_minibatch(
                params3, x3[perm[s : s + batch]], y3[perm[s : s + batch]],
                n_small / batch,
            )
            for s in range(0, n_small, batch)
        ]
        partition_dev = max(partition_dev, abs(float(np.mean(estimates)) - full))

    _verdict(
        11,
        optimum_dev <= 1e-6 and -1e-6 <= train_gap <= 0.5 and partition_dev <= 1e-10,
        f"svgp: optimal-q dev {optimum_dev:.2e} <= 1e-6; trained bound within "
        f"{train_gap:.2e} <= 0.5 nats of the collapsed bound; partition "
        f"unbiasedness dev {partition_dev:.2e} <= 1e-10",
    )


def test_criterion_12_protocol_mechanics(monkeypatch):
    """Schedule truncation, per-budget reinitialization, untimed metrics,
    seed averaging, and the discontinuity hold rule, on hand fixtures."""
    # truncation: floor(0.8 * 100) = 80, so the budget 100 is skipped
    ds = datasets.generate_toy("smooth1d", 118, seed=0)
    assert ds.n_train == 100
    quick = BaselineConfig(
        m_schedule=(10, 20, 50, 100),
        max_epochs_per_m=2,
        lbfgs=LbfgsConfig(max_iterations=30),
    )
    records = run_baseline(ds, "se", quick)
    truncation_ok = [r.m for r in records] == [10, 20, 50]

    # per-budget reinitialization: every budget starts from the same vector
    seen = []
    original = baseline.fit_fixed_m

    def spy(x, y, family, values0, m, config):
        seen.append(np.asarray(values0).copy())
        return original(x, y, family, values0, m, config)

    monkeypatch.setattr(baseline, "fit_fixed_m", spy)
    small = datasets.generate_toy("smooth1d", 60, seed=1)
    run_baseline(small, "se", BaselineConfig(
        m_schedule=(5, 10), max_epochs_per_m=2,
        lbfgs=LbfgsConfig(max_iterations=30),
    ))
    monkeypatch.setattr(baseline, "fit_fixed_m", original)
    reinit_ok = len(seen) == 2 and np.array_equal(seen[0], seen[1])

    # untimed metrics: a fake clock ticking once per call means each record
    # adds exactly one tick, regardless of metric-evaluation work
    ticks = iter(range(1000))
    records = run_baseline(
        small, "se",
        BaselineConfig(m_schedule=(5, 10), max_epochs_per_m=2,
                       lbfgs=LbfgsConfig(max_iterations=30)),
        clock=lambda: float(next(ticks)),
    )
    timing_ok = [r.elapsed_train_seconds for r in records] == [1.0, 2.0]

    # five-seed aggregation: pivot cells are plain means
    rows = [
        MetricRow(
            dataset="d", method="SGPR-baseline", kernel="se", seed=seed,
            m=10, elapsed_s=1.0, bound_kind="elbo",
            bound_value=-100.0 - seed, upper_bound=-90.0, rmse=0.5, nlpd=0.9,
        )
        for seed in range(5)
    ]
    pivot = pivot_table(rows)
    agg_ok = pivot["cells"]["bound_value"]["SGPR-baseline"]["10"] == pytest.approx(
        -102.0
    )

    # hold rule on the hand-computed fixture
    series = [(0.0, -10.0, 10), (1.0, -12.0, 10), (2.0, -8.0, 20), (3.0, -13.0, 20)]
    smooth_ok = metrics.smooth_metric_curve(series) == [-10.0, -12.0, -12.0, -13.0]

    _verdict(
        12,
        truncation_ok and reinit_ok and timing_ok and agg_ok and smooth_ok,
        f"protocol mechanics: truncation {truncation_ok}, reinit {reinit_ok}, "
        f"untimed metrics {timing_ok}, seed averaging {agg_ok}, "
        f"hold rule {smooth_ok}",
    )
