import dataclasses
import json

import numpy as np
import pytest

from locomem.domain import FootPose, Side, Source, Task, TaskRanges, sample_task, se2_to_local, wrap_angle
from locomem.factory import (
    GenerationConfig,
    build_databases,
    generate_sequences,
    heuristic_plan,
    min_jerk,
    optimize_sample,
    plan_contact_sequence,
    sequences_from_json,
    sequences_to_json,
    standing_start,
    swing_bump,
)
from locomem.ocp import CostWeights, StepperModel, rollout

from .conftest import SMALL_T


@pytest.fixture(scope="module")
def model():
    return StepperModel()


class TestHeuristic:
    def test_stationary_task(self, model):
        left, right = FootPose(0.0, 0.1, 0.0), FootPose(0.0, -0.1, 0.0)
        s = heuristic_plan(Task(left, right, left, Side.LEFT), model, 40, CostWeights(h_apex=0.0))
        np.testing.assert_allclose(s.q.values, np.broadcast_to(s.q.values[:, :1], (7, 40)), atol=1e-15)
        np.testing.assert_allclose(s.u.values, np.tile(model.gravity_vector[:, None], (1, 39)), atol=1e-9)

    def test_boundary_conditions(self, model):
        for seed, side in ((0, Side.LEFT), (1, Side.RIGHT), (2, Side.LEFT)):
            task = sample_task(seed, side)
            q = heuristic_plan(task, model).q.values
            np.testing.assert_allclose(q[:3, 0], 0.0, atol=1e-15)
            end = q[3:6, -1]
            assert abs(end[0] - task.goal.x) < 1e-9 and abs(end[1] - task.goal.y) < 1e-9
            assert abs(wrap_angle(end[2] - task.goal.yaw)) < 1e-9
            assert abs(q[6, 0]) < 1e-12 and abs(q[6, -1]) < 1e-12
            assert q[6].max() == pytest.approx(0.05, rel=1e-3)

    def test_profiles_start_and_stop_at_rest(self):
        # central differences of the analytic profiles, evaluated across each end
        h = 1e-4
        for tau in (0.0, 1.0):
            t = np.array([tau - h, tau, tau + h])
            for f in (min_jerk, lambda x: swing_bump(x, 0.05)):
                v = f(t)
                assert abs(v[2] - v[0]) / (2 * h) < 1e-6
                assert abs(v[2] - 2 * v[1] + v[0]) / h**2 < 1e-6
        assert min_jerk(0.0) == 0.0 and min_jerk(1.0) == 1.0
        assert swing_bump(0.5, 0.05) == pytest.approx(0.05)

    def test_dynamically_consistent(self, model):
        s = heuristic_plan(sample_task(4, Side.RIGHT), model)
        q = s.q.values.T
        x0 = np.concatenate([q[0], np.zeros(7)])
        np.testing.assert_allclose(rollout(model, x0, s.u.values.T)[:, :7], q, atol=1e-6)
        assert s.source is Source.HEURISTIC


class TestOptimize:
    def test_improves_and_keeps_task(self, model):
        heur = heuristic_plan(sample_task(5, Side.LEFT), model)
        opt = optimize_sample(heur, model)
        assert opt is not None and opt.source is Source.OPTIMIZED
        assert opt.task is heur.task
        assert opt.cost <= heur.cost

    def test_fixed_point(self, model):
        heur = heuristic_plan(sample_task(6, Side.LEFT), model)
        opt = optimize_sample(heur, model)
        again = optimize_sample(dataclasses.replace(opt, source=Source.HEURISTIC), model)
        np.testing.assert_allclose(again.q.values, opt.q.values, atol=1e-6)
        assert again.cost == pytest.approx(opt.cost, rel=1e-9)

    def test_only_heuristic_input(self, model):
        opt = optimize_sample(heuristic_plan(sample_task(7, Side.LEFT), model), model)
        with pytest.raises(ValueError):
            optimize_sample(opt, model)


class TestBuildDatabases:
    def test_two_samples(self):
        res = build_databases(GenerationConfig(n=2, T=30))
        for dbs in (res.heuristic, res.optimized):
            assert len(dbs[Side.LEFT]) == 1 and len(dbs[Side.RIGHT]) == 1
        assert res.manifest["retained"] == {"left": 1, "right": 1}

    def test_odd_count_rejected(self):
        with pytest.raises(ValueError):
            GenerationConfig(n=3)

    def test_pairing_and_dominance(self, small_generation):
        for side in Side:
            h, o = small_generation.heuristic[side], small_generation.optimized[side]
            assert len(h) == len(o) > 0
            for a, b in zip(h.samples, o.samples):
                assert a.task == b.task and a.task.side is side
                assert b.cost <= a.cost
            assert h.meta.T == SMALL_T and h.meta.generator_hash == small_generation.manifest["generator_hash"]

    def test_reproducible_and_worker_independent(self, small_generation):
        cfg = GenerationConfig(n=60, seed=7, T=SMALL_T)
        again = build_databases(cfg, workers=2)
        for side in Side:
            assert again.optimized[side] == small_generation.optimized[side]
            assert again.heuristic[side] == small_generation.heuristic[side]
        assert again.manifest == small_generation.manifest

    def test_manifest_contents(self, small_generation):
        m = small_generation.manifest
        assert set(m) == {"generator_hash", "config", "retained", "dropped_indices"}
        assert m["config"]["seed"] == 7
        assert m["config"]["solver"]["threshold"] == 1e-5 and m["config"]["solver"]["max_iters"] == 50
        json.dumps(m)


class TestContactSequences:
    def test_single_step(self):
        seq = plan_contact_sequence(standing_start(), 1, seed=0)
        assert len(seq.steps) == 2 and seq.n_steps == 1

    def test_one_foot_per_step(self):
        for i in range(1000):
            seq = plan_contact_sequence(standing_start(), 3, seed=i, first=Side.RIGHT if i % 2 else Side.LEFT)
            for (l0, r0), (l1, r1) in zip(seq.steps, seq.steps[1:]):
                assert (l0 == l1) != (r0 == r1)

    def test_steps_follow_ranges(self):
        r = TaskRanges()
        seq = plan_contact_sequence(standing_start(), 6, r, seed=3)
        for i in range(seq.n_steps):
            side = seq.moving_side(i)
            left, right = seq.steps[i + 1]
            stance = right if side is Side.LEFT else left
            landing = left if side is Side.LEFT else right
            rel = se2_to_local(stance, landing)
            assert r.step_length[0] - 1e-12 <= rel.x <= r.step_length[1] + 1e-12
            assert side.sign * rel.y >= r.stance_width[0] + r.lateral_offset[0] - 1e-12

    def test_zero_steps_rejected(self):
        with pytest.raises(ValueError):
            plan_contact_sequence(standing_start(), 0)

    def test_generate_and_serialise(self):
        seqs = generate_sequences(6, 3, seed=2)
        assert [s.moving_side(0) for s in seqs] == [Side.LEFT, Side.RIGHT] * 3
        back = sequences_from_json(json.loads(json.dumps(sequences_to_json(seqs))))
        assert back == seqs
        assert generate_sequences(6, 3, seed=2) == seqs

    def test_malformed_sequences(self):
        with pytest.raises(ValueError):
            sequences_from_json({"steps": []})
