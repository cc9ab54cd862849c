import json
import warnings

import numpy as np
import pytest

from locomem.domain import FootPose, Side, Task, poses_to_local, sample_task, se2_to_local
from locomem.factory import plan_contact_sequence, standing_start
from locomem.ocp import SolverConfig, StepperModel, quasi_static_controls
from locomem.pipeline import (
    COLUMNS,
    BenchmarkReport,
    Memory,
    MemoryMismatchError,
    Method,
    ReportRow,
    UMode,
    accuracy_errors,
    build_multistep,
    controls_to_world,
    eval_accuracy,
    format_report,
    load_memory,
    predict_configuration,
    predict_step,
    read_report_csv,
    run_multistep_benchmark,
    run_single_benchmark,
    save_memory,
    segment_to_world,
    train_memory,
    write_report,
)

from .conftest import SMALL_T


@pytest.fixture(scope="module")
def model():
    return StepperModel()


class TestTrainAndPredict:
    def test_knn_reproduces_training_tasks(self, small_memories, small_split):
        mem = small_memories["knn"][Side.LEFT]
        train, _ = small_split[Side.LEFT]
        for s in train.samples[:5]:
            q = predict_configuration(mem, s.task).values
            np.testing.assert_allclose(q, mem.q_codec.decompress(mem.q_codec.compress(s.q)).values, atol=1e-10)
            assert np.max(np.abs(q - s.q.values)) < 1e-3

    def test_defaults_and_determinism(self, small_split):
        train, _ = small_split[Side.RIGHT]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            a = train_memory(train, K=30, M=20, kind="gmr", seed=3)
            b = train_memory(train, K=30, M=20, kind="gmr", seed=3)
        assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())
        assert a.q_codec.basis.K == 30 and a.side is Side.RIGHT and not a.has_u_model

    def test_u_modes(self, small_memories, model):
        mem = small_memories["gpr"][Side.LEFT]
        task = sample_task(11, Side.LEFT)
        assert predict_step(mem, task, UMode.NONE).u_traj is None
        warm = predict_step(mem, task, UMode.QUASI_STATIC, model)
        expect = quasi_static_controls(warm.q_traj, model).values
        np.testing.assert_array_equal(warm.u_traj.values, expect)
        pred = predict_step(mem, task, "predicted")
        assert pred.u_traj.knots == SMALL_T - 1

    def test_predicted_controls_need_u_model(self, small_split):
        train, _ = small_split[Side.LEFT]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            mem = train_memory(train, K=30, M=10, kind="knn")
        with pytest.raises(MemoryMismatchError):
            predict_step(mem, train.samples[0].task, UMode.PREDICTED)

    def test_side_mismatch(self, small_memories):
        with pytest.raises(MemoryMismatchError):
            predict_step(small_memories["gpr"][Side.LEFT], sample_task(0, Side.RIGHT))

    def test_save_load(self, small_memories, tmp_path):
        mem = small_memories["gpr"][Side.RIGHT]
        save_memory(mem, tmp_path / "m.json")
        back = load_memory(tmp_path / "m.json")
        task = sample_task(2, Side.RIGHT)
        np.testing.assert_allclose(
            predict_step(back, task, "predicted").q_traj.values, predict_step(mem, task, "predicted").q_traj.values, atol=1e-12
        )

    def test_codec_hash_checked(self, small_memories):
        d = small_memories["knn"][Side.LEFT].to_dict()
        d["q"]["codec"]["pca"]["mean"][0] += 1.0
        with pytest.raises(MemoryMismatchError):
            Memory.from_dict(d)


class TestMultistep:
    def test_single_step_matches_predict_step(self, small_memories):
        mems = small_memories["gpr"]
        seq = plan_contact_sequence(standing_start(), 1, seed=0)
        warm = build_multistep(mems, seq, UMode.NONE)
        left, right = seq.steps[0]
        direct = predict_step(mems[Side.LEFT], Task(left, right, seq.steps[1][0], Side.LEFT), UMode.NONE)
        np.testing.assert_allclose(warm.q_traj.values, direct.q_traj.values, atol=1e-12)

    def test_shared_boundary_knots(self, small_memories):
        mems = small_memories["gpr"]
        seq = plan_contact_sequence(standing_start(), 3, seed=5)
        warm = build_multistep(mems, seq, UMode.QUASI_STATIC)
        assert warm.q_traj.knots == 3 * (SMALL_T - 1) + 1
        assert warm.u_traj.knots == 3 * (SMALL_T - 1)

    def test_segments_compose_in_previous_root_frame(self, small_memories):
        mems = small_memories["gpr"]
        seq = plan_contact_sequence(standing_start(), 3, seed=9)
        q = build_multistep(mems, seq, UMode.NONE).q_traj.values.T
        seg = SMALL_T - 1
        for i in range(1, 3):
            start = q[i * seg]
            frame = FootPose(start[0], start[1], start[2])
            side = seq.moving_side(i)
            left, right = seq.steps[i]
            goal = seq.steps[i + 1][0 if side is Side.LEFT else 1]
            task = Task(se2_to_local(frame, left), se2_to_local(frame, right), se2_to_local(frame, goal), side)
            local = predict_step(mems[side], task, UMode.NONE).q_traj.values.T
            expect = segment_to_world(frame, local)
            got = q[i * seg : (i + 1) * seg + 1]
            np.testing.assert_allclose(got[1:, [0, 1, 3, 4, 6]], expect[1:, [0, 1, 3, 4, 6]], atol=1e-9)

    def test_frame_round_trip(self):
        rng = np.random.default_rng(0)
        frame = FootPose(0.7, -0.3, 2.1)
        q = rng.normal(size=(20, 7))
        w = segment_to_world(frame, q)
        back = w.copy()
        back[:, :3] = poses_to_local(frame, w[:, :3])
        back[:, 3:6] = poses_to_local(frame, w[:, 3:6])
        np.testing.assert_allclose(back[:, [0, 1, 3, 4, 6]], q[:, [0, 1, 3, 4, 6]], atol=1e-12)
        dyaw = np.angle(np.exp(1j * (back[:, [2, 5]] - q[:, [2, 5]])))
        np.testing.assert_allclose(dyaw, 0.0, atol=1e-12)

    def test_controls_rotate_as_vectors(self):
        u = np.zeros((1, 7))
        u[0, 0] = 1.0
        u[0, 6] = 9.81
        w = controls_to_world(FootPose(5.0, 5.0, np.pi / 2), u)
        np.testing.assert_allclose(w[0], [0, 1, 0, 0, 0, 0, 9.81], atol=1e-15)

    def test_missing_side(self, small_memories):
        seq = plan_contact_sequence(standing_start(), 2, seed=0)
        with pytest.raises(MemoryMismatchError):
            build_multistep({Side.LEFT: small_memories["gpr"][Side.LEFT]}, seq)


class TestAccuracy:
    def test_perfect_predictor(self):
        rng = np.random.default_rng(0)
        qs = [rng.normal(size=(7, 10)) for _ in range(4)]
        res = accuracy_errors(qs, [q.copy() for q in qs])
        assert (res["traj_err"].mean, res["contact_err"].mean) == (0.0, 0.0)

    def test_knn_on_training_set_is_codec_residual(self, small_memories, small_split):
        mem = small_memories["knn"][Side.LEFT]
        train, _ = small_split[Side.LEFT]
        res = eval_accuracy(mem, train)
        resid = [np.linalg.norm(mem.q_codec.decompress(mem.q_codec.compress(s.q)).values - s.q.values) for s in train.samples]
        assert res["traj_err"].mean == pytest.approx(np.mean(resid), rel=1e-6)

    def test_held_out_ordering(self, small_memories, small_split):
        _, test = small_split[Side.LEFT]
        gpr = eval_accuracy(small_memories["gpr"][Side.LEFT], test)
        knn = eval_accuracy(small_memories["knn"][Side.LEFT], test)
        assert gpr["traj_err"].mean < knn["traj_err"].mean

    def test_side_and_empty_checks(self, small_memories, small_split):
        _, test = small_split[Side.RIGHT]
        with pytest.raises(MemoryMismatchError):
            eval_accuracy(small_memories["gpr"][Side.LEFT], test)
        with pytest.raises(ValueError):
            accuracy_errors([], [])


class TestBenchmarks:
    @pytest.fixture(scope="class")
    @classmethod
    def single(cls, small_memories, small_split):
        tasks = [s.task for side in Side for s in small_split[side][1].samples]
        methods = [Method("cold"), Method("gpr", small_memories["gpr"]), Method("knn", small_memories["knn"], UMode.PREDICTED)]
        return tasks, methods, run_single_benchmark(methods, tasks, T=SMALL_T)

    def test_rows(self, single):
        tasks, methods, report = single
        assert [r.method for r in report.rows] == ["cold", "gpr", "knn"]
        for r in report.rows:
            assert r.n == len(tasks) and 0 <= r.success_rate <= 100
            assert r.iter_mean <= SolverConfig.online().max_iters
        assert set(report.latency_ms) == {"gpr", "knn"}
        assert report.row("gpr").iter_mean < report.row("cold").iter_mean

    def test_deterministic(self, single):
        tasks, methods, report = single
        again = run_single_benchmark(methods, tasks, T=SMALL_T)
        assert format_report(again) == format_report(report)

    def test_fixed_point_rows(self, small_memories, small_split):
        tasks = [s.task for s in small_split[Side.LEFT][0].samples[:6]]
        report = run_single_benchmark([Method("knn", small_memories["knn"], UMode.PREDICTED)], tasks, T=SMALL_T)
        assert max(report.iterations["knn"]) <= 1

    def test_single_step_sequences_match(self, small_memories, model):
        seqs = [plan_contact_sequence(standing_start(), 1, seed=i) for i in range(4)]
        tasks = [Task(*s.steps[0], s.steps[1][0], Side.LEFT) for s in seqs]
        methods = [Method("cold"), Method("gpr", small_memories["gpr"])]
        multi = run_multistep_benchmark(methods, seqs, model, T=SMALL_T)
        single = run_single_benchmark(methods, tasks, model, T=SMALL_T)
        assert multi.iterations == single.iterations
        for a, b in zip(multi.rows, single.rows):
            assert a.cost_mean == pytest.approx(b.cost_mean, rel=1e-9)

    def test_controls_only_row(self, small_memories, small_split, model):
        from locomem.ocp import WarmStart, make_step_problem, solve

        mems = small_memories["gpr"]
        tasks = [s.task for s in small_split[Side.LEFT][1].samples]
        report = run_single_benchmark([Method("u", mems, UMode.PREDICTED, with_q=False)], tasks, model, T=SMALL_T)
        expect = []
        for t in tasks:
            u = predict_step(mems[t.side], t, UMode.PREDICTED).u_traj
            expect.append(solve(make_step_problem(t, model, T=SMALL_T), SolverConfig.online(), WarmStart(None, u))[2].iterations)
        assert report.iterations["u"] == expect
        with pytest.raises(ValueError):
            Method("bad", mems, UMode.NONE, with_q=False)

    def test_empty_inputs(self):
        with pytest.raises(ValueError):
            run_single_benchmark([Method("cold")], [])
        with pytest.raises(ValueError):
            run_multistep_benchmark([Method("cold")], [])


class TestReports:
    def report(self):
        return BenchmarkReport([ReportRow("cold", 100.0, 1.5, 0.25, 7.0, 1.0, 4), ReportRow("gpr (quasi-static)", 75.0, 1.0 / 3, 0.0, 2.5, 0.5, 4)])

    def test_empty_csv(self, tmp_path):
        write_report(BenchmarkReport(), tmp_path / "r.csv")
        assert (tmp_path / "r.csv").read_text() == ",".join(COLUMNS) + "\n"

    def test_csv_round_trip(self, tmp_path):
        r = self.report()
        write_report(r, tmp_path / "r.csv")
        assert read_report_csv(tmp_path / "r.csv") == r.rows

    def test_markdown(self):
        text = format_report(self.report(), "md")
        lines = text.strip().split("\n")
        assert len(lines) == 2 + 2
        assert lines[0].startswith("| method |")

    def test_row_validation(self):
        with pytest.raises(ValueError):
            ReportRow("x", 101.0, 0, 0, 0, 0, 1)
        with pytest.raises(ValueError):
            ReportRow("x", 50.0, 0, 0, 0, 0, 0)
        with pytest.raises(ValueError):
            format_report(self.report(), "html")
