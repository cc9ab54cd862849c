"""Command-line interface.

Every command is deterministic for fixed seeds and configuration, so two
runs with the same arguments write byte-identical files.  Errors are
reported on stderr with exit status 1.
"""

from __future__ import annotations

import functools
import json
import logging
import sys
import warnings
from collections import defaultdict
from pathlib import Path

import click

from .config import RunConfig
from .domain import Task, load_database, save_database, split_database
from .factory import GenerationConfig, build_databases, generate_sequences, sequences_from_json, sequences_to_json
from .pipeline import (
    Method,
    UMode,
    eval_accuracy,
    format_report,
    load_memory,
    predict_step,
    run_multistep_benchmark,
    run_single_benchmark,
    save_memory,
    train_memory,
    write_report,
)

log = logging.getLogger("locomem")


def _fail_cleanly(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except Exception as exc:  # noqa: BLE001 - report everything as a CLI error
            log.debug("command failed", exc_info=True)
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _dump(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path is None:
        click.echo(text)
    else:
        Path(path).write_text(text + "\n")


@click.group()
@click.option("-v", "--verbose", count=True, help="Repeat for more logging.")
def main(verbose):
    """Build memories of single-step motions and benchmark their warm starts."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if verbose == 0:
        warnings.simplefilter("ignore", UserWarning)


@main.command("gen-db")
@click.option("--n", "n", type=int, default=1200, show_default=True, help="Total samples (half per foot).")
@click.option("--seed", type=int, default=None, help="Overrides seeds.generation from the config.")
@click.option("--out-heuristic", type=click.Path(file_okay=False), required=True)
@click.option("--out-optimized", type=click.Path(file_okay=False), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--workers", type=int, default=1, show_default=True)
@_fail_cleanly
def gen_db(n, seed, out_heuristic, out_optimized, config_path, workers):
    """Generate heuristic and optimised databases (one JSONL file per foot)."""
    cfg = RunConfig.load(config_path)
    seed = cfg.seeds["generation"] if seed is None else seed
    gen = GenerationConfig(n, seed, cfg.T, cfg.dt, cfg.gravity, cfg.ranges, cfg.weights, cfg.offline)
    result = build_databases(gen, workers)
    for out, dbs in ((out_heuristic, result.heuristic), (out_optimized, result.optimized)):
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        for side, db in dbs.items():
            save_database(db, out / f"{side.value}.jsonl")
        _dump(result.manifest, out / "manifest.json")
    click.echo(f"retained {result.manifest['retained']} samples, dropped {len(result.manifest['dropped_indices'])}")


@main.command("split")
@click.option("--db", "db_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--n-train", type=int, required=True)
@click.option("--n-test", type=int, required=True)
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--out-train", type=click.Path(dir_okay=False), required=True)
@click.option("--out-test", type=click.Path(dir_okay=False), required=True)
@_fail_cleanly
def split(db_path, n_train, n_test, seed, out_train, out_test):
    """Split a database into disjoint training and test files."""
    train, test = split_database(load_database(db_path), n_train, n_test, seed)
    save_database(train, out_train)
    save_database(test, out_test)


@main.command()
@click.option("--db", "db_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--kind", type=click.Choice(["gpr", "gmr", "bgmr", "knn"]), default="gpr", show_default=True)
@click.option("--K", "K", type=int, default=60, show_default=True, help="RBF basis count.")
@click.option("--M", "M", type=int, default=60, show_default=True, help="PCA components.")
@click.option("--with-u-model", is_flag=True, help="Also learn the control trajectories.")
@click.option("--seed", type=int, default=None, help="Overrides seeds.train from the config.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_fail_cleanly
def train(db_path, kind, K, M, with_u_model, seed, config_path, out):
    """Fit a memory on a (training) database."""
    cfg = RunConfig.load(config_path)
    seed = cfg.seeds["train"] if seed is None else seed
    memory = train_memory(load_database(db_path), K, M, kind, with_u_model, seed)
    save_memory(memory, out)


@main.command("eval-accuracy")
@click.option("--memory", "memory_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--test-db", type=click.Path(exists=True, dir_okay=False), required=True)
@_fail_cleanly
def eval_accuracy_cmd(memory_path, test_db):
    """Trajectory and contact errors of a memory on held-out samples."""
    res = eval_accuracy(load_memory(memory_path), load_database(test_db))
    _dump({k: {"mean": v.mean, "std": v.std} for k, v in res.items()})


def _methods(memory_paths, u_modes, u_only=False, cold=True):
    """Group memory files by (source, kind) into one benchmark method per u-mode.

    ``u_only`` adds a row per group that passes only the predicted controls.
    """
    groups = defaultdict(dict)
    for path in memory_paths:
        m = load_memory(path)
        key = f"{m.source.value}-{m.kind}"
        if m.side in groups[key]:
            raise click.BadParameter(f"two {m.side.value} memories for {key}", param_hint="--memories")
        groups[key][m.side] = m
    methods = [Method("cold")] if cold else []
    for key, mems in groups.items():
        for mode in u_modes:
            methods.append(Method(f"{key} ({mode.value})", mems, mode))
        if u_only:
            if not all(m.has_u_model for m in mems.values()):
                raise click.BadParameter(f"--u-only needs memories trained with --with-u-model ({key})")
            methods.append(Method(f"{key} (u only)", mems, UMode.PREDICTED, with_q=False))
    return methods


def _write(report, out, fmt):
    if out is None:
        click.echo(format_report(report, fmt), nl=False)
    else:
        write_report(report, out, fmt)
    for label, ms in report.latency_ms.items():
        log.info("mean query latency %s: %.2f ms", label, ms)


_u_modes = click.option(
    "--u-mode",
    "u_modes",
    type=click.Choice([m.value for m in UMode]),
    multiple=True,
    default=[UMode.QUASI_STATIC.value],
    show_default=True,
    help="Control guess; repeat for several rows per memory.",
)
_u_only = click.option("--u-only", is_flag=True, help="Add a row per memory warm-starting from predicted controls alone.")


@main.command("bench-single")
@click.option("--memories", "memory_paths", type=click.Path(exists=True, dir_okay=False), multiple=True, required=True)
@click.option("--test-db", "test_dbs", type=click.Path(exists=True, dir_okay=False), multiple=True, required=True)
@_u_modes
@_u_only
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Report file (stdout when omitted).")
@click.option("--format", "fmt", type=click.Choice(["csv", "md"]), default="csv", show_default=True)
@_fail_cleanly
def bench_single(memory_paths, test_dbs, u_modes, u_only, config_path, out, fmt):
    """Cold versus warm-started single-step solves on held-out tasks."""
    cfg = RunConfig.load(config_path)
    tasks = [t for p in test_dbs for t in load_database(p).tasks()]
    methods = _methods(memory_paths, [UMode(m) for m in u_modes], u_only)
    report = run_single_benchmark(methods, tasks, cfg.model, cfg.weights, cfg.online, cfg.T)
    _write(report, out, fmt)


@main.command("gen-sequences")
@click.option("--n", "n", type=int, default=25, show_default=True)
@click.option("--steps", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=None, help="Overrides seeds.sequences from the config.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_fail_cleanly
def gen_sequences(n, steps, seed, config_path, out):
    """Random contact sequences for the multi-step benchmark."""
    cfg = RunConfig.load(config_path)
    seed = cfg.seeds["sequences"] if seed is None else seed
    _dump(sequences_to_json(generate_sequences(n, steps, seed, cfg.ranges)), out)


@main.command("bench-multi")
@click.option("--memories", "memory_paths", type=click.Path(exists=True, dir_okay=False), multiple=True, required=True)
@click.option("--sequences", "seq_path", type=click.Path(exists=True, dir_okay=False), required=True)
@_u_modes
@_u_only
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Report file (stdout when omitted).")
@click.option("--format", "fmt", type=click.Choice(["csv", "md"]), default="csv", show_default=True)
@_fail_cleanly
def bench_multi(memory_paths, seq_path, u_modes, u_only, config_path, out, fmt):
    """Cold versus warm-started solves of concatenated multi-step problems."""
    cfg = RunConfig.load(config_path)
    sequences = sequences_from_json(json.loads(Path(seq_path).read_text()))
    methods = _methods(memory_paths, [UMode(m) for m in u_modes], u_only)
    report = run_multistep_benchmark(methods, sequences, cfg.model, cfg.weights, cfg.online, cfg.T)
    _write(report, out, fmt)


@main.command()
@click.option("--memory", "memory_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--task", "task_str", required=True, help='Nine numbers: "lx ly lyaw rx ry ryaw gx gy gyaw".')
@click.option("--u-mode", type=click.Choice([m.value for m in UMode]), default=UMode.QUASI_STATIC.value, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@_fail_cleanly
def query(memory_path, task_str, u_mode, config_path):
    """Predict a warm start for one task and print it as JSON."""
    cfg = RunConfig.load(config_path)
    try:
        values = [float(v) for v in task_str.replace(",", " ").split()]
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--task") from exc
    memory = load_memory(memory_path)
    task = Task.from_vector(values, memory.side)
    warm = predict_step(memory, task, u_mode, cfg.model)
    out = {"side": memory.side.value, "dt": warm.q_traj.dt, "q": warm.q_traj.values.tolist()}
    if warm.u_traj is not None:
        out["u"] = warm.u_traj.values.tolist()
    _dump(out)


if __name__ == "__main__":  # pragma: no cover
    main()
