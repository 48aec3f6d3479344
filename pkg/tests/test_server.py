import numpy as np
import pytest

from byzfl.config import (
    AggregatorSpec,
    AttackSpec,
    ExperimentConfig,
    InitSpec,
    OracleSpec,
    ScheduleSpec,
    SyntheticProblemSpec,
)
from byzfl.problems import global_gradient
from byzfl.server import (
    CoordinateMedianAgg,
    GeometricMedianAgg,
    MeanAgg,
    TrimmedMeanAgg,
    aggregate,
    prepare,
    run_experiment,
    run_prepared,
    run_round,
)
from byzfl.theory import c_beta


def small_config(**overrides):
    base = dict(
        problem=SyntheticProblemSpec(p=4, n_users=8, samples_per_user=30, heterogeneity=0.0, loss="ridge", reg=0.5),
        n_byzantine=2,
        attack=AttackSpec(kind="gaussian", sigma=10.0),
        aggregator=AggregatorSpec(kind="geomed"),
        schedule=ScheduleSpec(kind="uniform", steps="auto", eta="auto"),
        oracle=OracleSpec(kind="full"),
        rounds=12,
        seed=42,
        init=InitSpec(kind="zeros"),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestRunRound:
    def test_identical_honest_uploads_all_aggregators(self):
        # heterogeneity=0 + full gradients + B=0: all uploads coincide, so
        # every aggregator returns the single-client update exactly.
        for agg_kind in ("geomed", "mean", "coordinate_median", "trimmed_mean"):
            cfg = small_config(n_byzantine=0, aggregator=AggregatorSpec(kind=agg_kind))
            prep = prepare(cfg)
            from byzfl.clients import honest_local_update

            single = honest_local_update(
                prep.problem, 0, prep.w1, 1, prep.schedule, prep.oracle_mode, prep.master_seed
            )
            w_next, rec = run_round(prep, prep.w1, 1)
            assert np.array_equal(w_next, single), agg_kind
            assert rec.t == 1

    def test_mean_single_step_is_gradient_descent(self):
        cfg = small_config(
            n_byzantine=0,
            aggregator=AggregatorSpec(kind="mean"),
            schedule=ScheduleSpec(kind="uniform", steps=1, eta=0.1),
        )
        prep = prepare(cfg)
        w_next, _ = run_round(prep, prep.w1, 1)
        expected = prep.w1 - 0.1 * global_gradient(prep.problem, prep.w1)
        assert np.allclose(w_next, expected, rtol=0, atol=1e-15)

    def test_huge_fixed_attack_within_ball_bound(self):
        # M=5, B=2, attackers at norm ~1e6: the new iterate stays within
        # C_{0.4} * max honest distance of w*.
        p = 3
        cfg = small_config(
            problem=SyntheticProblemSpec(p=p, n_users=5, samples_per_user=20, heterogeneity=0.0, loss="ridge", reg=0.5),
            n_byzantine=2,
            attack=AttackSpec(kind="fixed", vector=[1e6] * p),
            rounds=1,
        )
        prep = prepare(cfg)
        from byzfl.clients import honest_local_update

        w_t = prep.w1 + 1.0
        honest_dists = [
            np.linalg.norm(
                honest_local_update(prep.problem, m, w_t, 1, prep.schedule, prep.oracle_mode, prep.master_seed)
                - prep.w_star
            )
            for m in prep.honest_ids
        ]
        w_next, _ = run_round(prep, w_t, 1)
        bound = c_beta(0.4) * max(honest_dists)
        assert np.linalg.norm(w_next - prep.w_star) <= bound + 1e-9

    def test_trace_has_both_bounds_uniform(self):
        prep = prepare(small_config())
        _, rec = run_round(prep, prep.w1, 1)
        assert rec.theorem1_bound is not None
        assert rec.theorem2_bound == pytest.approx(rec.theorem1_bound, rel=1e-12)

    def test_theorem1_none_for_general_schedule(self):
        cfg = small_config(
            schedule=ScheduleSpec(kind="general", steps_cycle=[2, 4], eta_range=[0.5, 1.0])
        )
        prep = prepare(cfg)
        records = run_prepared(prep)
        assert all(r.theorem1_bound is None for r in records)
        assert all(r.theorem2_bound > 0 for r in records)


class TestRunExperiment:
    def test_deterministic_trace(self):
        r1 = run_experiment(small_config())
        r2 = run_experiment(small_config())
        assert [r.to_json_dict() for r in r1] == [r.to_json_dict() for r in r2]

    def test_trace_length_and_fields(self):
        records = run_experiment(small_config(rounds=5))
        assert len(records) == 5
        assert [r.t for r in records] == [1, 2, 3, 4, 5]
        d = records[0].to_json_dict()
        assert "wall_time_s" not in d
        assert records[0].wall_time_s > 0
        assert d["test_accuracy"] is None  # ridge problem

    def test_envelope_in_contractive_regime(self):
        records = run_experiment(small_config(rounds=30))
        for rec in records:
            assert rec.optimality_gap <= rec.theorem1_bound + 1e-9
            assert rec.optimality_gap >= -1e-9

    def test_robustness_contrast_small(self):
        base = dict(rounds=40, n_byzantine=3)
        geo = run_experiment(
            small_config(
                aggregator=AggregatorSpec(kind="geomed"),
                attack=AttackSpec(kind="gaussian", sigma=100.0),
                **base,
            )
        )
        avg = run_experiment(
            small_config(
                aggregator=AggregatorSpec(kind="mean"),
                attack=AttackSpec(kind="gaussian", sigma=100.0),
                **base,
            )
        )
        assert geo[-1].optimality_gap <= 1e-8
        assert avg[-1].optimality_gap > geo[-1].optimality_gap * 1e6

    def test_client_order_invariance(self):
        prep1 = prepare(small_config(rounds=4))
        records1 = run_prepared(prep1)
        prep2 = prepare(small_config(rounds=4))
        prep2.client_specs = tuple(reversed(prep2.client_specs))
        records2 = run_prepared(prep2)
        assert [r.to_json_dict() for r in records1] == [r.to_json_dict() for r in records2]

    def test_parallel_serial_equivalence(self):
        serial = run_experiment(small_config(rounds=6), n_threads=1)
        threaded = run_experiment(small_config(rounds=6), n_threads=4)
        assert [r.to_json_dict() for r in serial] == [r.to_json_dict() for r in threaded]

    def test_minibatch_flagged(self):
        cfg = small_config(
            oracle=OracleSpec(kind="minibatch", batch_size=10),
            schedule=ScheduleSpec(kind="uniform", steps=2, eta=0.05),
            rounds=3,
        )
        records = run_experiment(cfg)
        assert all(r.assumption_violating for r in records)

    def test_logistic_reports_accuracy(self):
        cfg = small_config(
            problem=SyntheticProblemSpec(p=3, n_users=4, samples_per_user=60, heterogeneity=0.0, loss="logistic", reg=0.3),
            n_byzantine=1,
            rounds=8,
        )
        records = run_experiment(cfg)
        assert records[-1].test_accuracy is not None
        assert 0.5 <= records[-1].test_accuracy <= 1.0

    def test_half_plus_rejected_without_override(self):
        from byzfl.config import ConfigError

        with pytest.raises(ConfigError, match="B < M/2"):
            small_config(n_byzantine=4)

    def test_half_plus_override_runs(self):
        cfg = small_config(
            n_byzantine=4,
            override_half_plus=True,
            rounds=2,
            schedule=ScheduleSpec(kind="uniform", steps=2, eta=0.05),
        )
        records = run_experiment(cfg)
        assert len(records) == 2
        assert all(r.theorem1_bound is None and r.theorem2_bound is None for r in records)


class TestAggregateDispatch:
    def test_geomed_diagnostics(self):
        rng = np.random.default_rng(0)
        pts = rng.standard_normal((9, 3))
        value, iters, residual, converged = aggregate(GeometricMedianAgg(), pts)
        assert converged and iters >= 1 and residual <= 1e-10

    def test_baselines_trivially_converged(self):
        pts = np.arange(12.0).reshape(4, 3)
        for agg in (MeanAgg(), CoordinateMedianAgg(), TrimmedMeanAgg(0.25)):
            value, iters, residual, converged = aggregate(agg, pts)
            assert converged and iters == 0 and residual == 0.0
            assert value.shape == (3,)


class TestResolution:
    def test_auto_eta_is_gamma_minimizer(self):
        prep = prepare(small_config())
        c = prep.consts
        expected = c.mu / (c.L_const**2 * (1 + c.delta**2))
        assert prep.schedule.uniform_eta == pytest.approx(expected, rel=1e-12)

    def test_auto_steps_is_min_K(self):
        from byzfl.theory import gamma, min_K

        prep = prepare(small_config())
        c = prep.consts
        g = gamma(prep.schedule.uniform_eta, c.mu, c.L_const, c.delta)
        assert prep.schedule.uniform_K == min_K(g, prep.B / prep.M)

    def test_resolved_config_roundtrip(self):
        prep = prepare(small_config())
        rebuilt = ExperimentConfig.from_dict(prep.resolved)
        assert rebuilt.to_dict() == prep.resolved
        # Resolution is idempotent: preparing the resolved config leaves it fixed.
        prep2 = prepare(rebuilt)
        assert prep2.resolved == prep.resolved

    def test_decay_schedules_resolve_and_run(self):
        for kind, expected_steps in (("floor_decay", [3, 0, 0, 0]), ("linear_decay", [2, 1, 1, 1])):
            cfg = small_config(
                schedule=ScheduleSpec(kind=kind, K1=3, E=2, eta=0.05),
                rounds=4,
            )
            prep = prepare(cfg)
            assert [prep.schedule.steps(t) for t in (1, 2, 3, 4)] == expected_steps, kind
            records = run_prepared(prep)
            assert len(records) == 4
            assert all(r.theorem1_bound is None for r in records)

    def test_csv_problem_via_prepare(self, tmp_path):
        rng = np.random.default_rng(0)
        paths = []
        for m in range(4):
            s = 6 if m else 12  # unequal sizes trigger the weighting warning
            table = np.column_stack([rng.standard_normal((s, 2)), rng.standard_normal(s)])
            p = tmp_path / f"u{m}.csv"
            np.savetxt(p, table, delimiter=",")
            paths.append(str(p))
        from byzfl.config import CsvProblemSpec

        cfg = small_config(
            problem=CsvProblemSpec(paths=tuple(paths), loss="ridge", reg=0.4),
            n_byzantine=1,
            rounds=3,
            schedule=ScheduleSpec(kind="uniform", steps=2, eta=0.05),
        )
        with pytest.warns(RuntimeWarning, match="unequal sample counts"):
            prep = prepare(cfg)
        records = run_prepared(prep)
        assert len(records) == 3

    def test_general_schedule_resolution_freezes_etas(self):
        cfg = small_config(schedule=ScheduleSpec(kind="general", steps_cycle=[4, 8]))
        prep = prepare(cfg)
        etas = prep.resolved["schedule"]["client_etas"]
        assert len(etas) == 8
        c = prep.consts
        eta_star = c.mu / (c.L_const**2 * (1 + c.delta**2))
        for eta in etas:
            assert 0.5 * eta_star <= eta <= 1.0 * eta_star
        assert prep.schedule.steps(1) == 4 and prep.schedule.steps(2) == 8 and prep.schedule.steps(3) == 4
