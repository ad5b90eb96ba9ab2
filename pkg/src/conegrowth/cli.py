"""Command-line runner: ``conegrowth run | replay | list-groups | list-models``.

Every output file is a pure function of the normalised config (worker count
excluded).  ``manifest.json`` lists the outputs with their sha256 digests;
``replay`` re-executes a manifest and byte-compares.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
import time
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from . import cone as K
from . import estimators as E
from . import groups as G
from . import models as M
from .config import CONFIG_FORMAT, TASK_KEYS, ExperimentConfig
from .errors import ConeGrowthError, ConfigError, FloodUnbounded, MemoryBudgetExceeded, TruncationUncertain
from .parallel import ordered_map
from .prf import derive_seed

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_ASSERT, EXIT_BUDGET, EXIT_DRIFT = 0, 1, 2, 3, 4, 5


class TaskResult:
    def __init__(self, report: dict, summary: list[str], verdict: Optional[bool], csvs: Optional[dict] = None):
        self.report = report
        self.summary = summary
        self.verdict = verdict
        self.csvs = csvs or {}


class Context:
    def __init__(self, cfg: ExperimentConfig, workers: int):
        self.cfg = cfg
        self.spec = cfg.group_spec()
        self.model = cfg.model_obj()
        self.run = cfg.run
        self.workers = workers

    def samples(self, task: dict) -> int:
        return int(task.get("samples", self.run["samples"]))

    def ladder(self, task: dict) -> list[int]:
        return [int(n) for n in task.get("ladder", self.run["ladder"])]


def _csv_text(config_hash: str, header, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash: {config_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v) -> str:
    return "none" if v is None else (f"{v:.6g}" if isinstance(v, float) else str(v))


# ---------------------------------------------------------------------------
# task runners


def _phi_sample(args) -> list[list]:
    model, spec, targets, seed, margin = args
    return [s.to_row() for s in M.evaluate_many(model, M.Environment(seed), spec, targets, margin)]


def task_phi(ctx: Context, task: dict, seed: int) -> TaskResult:
    spec, model = ctx.spec, ctx.model
    x = G.validate(spec, task["x"])
    ladder, n_samp = ctx.ladder(task), ctx.samples(task)
    targets = [G.power(spec, x, n) for n in ladder]
    jobs = [(model, spec, targets, E.sample_env(seed, m).master_seed, ctx.run["margin"]) for m in range(n_samp)]
    rows = [r for chunk in ordered_map(_phi_sample, jobs, ctx.workers) for r in chunk]
    values = np.array([float(r[5]) for r in rows]).reshape(n_samp, len(ladder))
    est = E.phi_from_values(x, G.abelianize(spec, x), ladder, values, seed, model.name)
    line = (f"limiting-norm ladder for x={x}: phi_hat={est.phi_hat:.6g} (se {est.std_error:.3g}), "
            f"monotone violations={est.monotone_violations}")
    return TaskResult(E._jsonable(est), [line], est.monotone_violations == 0,
                      {"samples": (M.CocycleSample.CSV_COLUMNS, rows)})


def task_condition_all(ctx: Context, task: dict, seed: int) -> TaskResult:
    rep = E.check_condition_all(ctx.model, ctx.spec, task["radii"], float(task["beta"]), ctx.samples(task), seed,
                                ctx.run["margin"], ctx.workers, int(task.get("grid_points", 12)))
    lines = [f"tail condition (i), beta={task['beta']}: passed={_fmt(rep.passed)}"]
    lines += [f"  radius {r.radius}: {r.status}, exponent={_fmt(r.tail_exponent)} "
              f"(need {rep.parameters['required_exponent']}), concave={_fmt(r.concave)}" for r in rep.results]
    return TaskResult(E._jsonable(rep), lines, rep.passed)


def task_condition_aml(ctx: Context, task: dict, seed: int) -> TaskResult:
    rep = E.check_condition_aml(ctx.model, ctx.spec, task["x"], ctx.ladder(task), ctx.samples(task), seed,
                                ctx.run["margin"], ctx.workers)
    s = rep.results[0]
    line = (f"linear lower bound (ii)/(ii') for x={tuple(task['x'])}: a_ab={_fmt(s['a_ab'])}, "
            f"a_word={_fmt(s['a_word'])}, pathwise a_word={_fmt(s['pathwise_a_word'])}")
    return TaskResult(E._jsonable(rep), [line], rep.passed)


def task_innerness(ctx: Context, task: dict, seed: int) -> TaskResult:
    pairs = int(task.get("pairs", 100))
    rmax = int(task.get("max_radius", 5))
    ok = bad = skipped = 0
    m = 0
    while ok + bad < pairs and m < 10 * pairs:
        env = E.sample_env(seed, m)
        x = E.sample_sphere(ctx.spec, 1 + m % rmax, seed, m)
        m += 1
        try:
            w = E.check_innerness_fpp(ctx.model, env, ctx.spec, x, ctx.run["margin"])
        except TruncationUncertain:
            skipped += 1
            continue
        ok += int(w.equal)
        bad += int(not w.equal)
    rep = dict(pairs_checked=ok + bad, equal=ok, unequal=bad, skipped_boundary=skipped, attempts=m)
    line = f"innerness witness (iii) with epsilon=0: {ok}/{ok + bad} exact, {skipped} skipped at the boundary"
    return TaskResult(rep, [line], bad == 0 and ok + bad == pairs)


def task_polygonal(ctx: Context, task: dict, seed: int) -> TaskResult:
    rep = E.polygonal_ergodic_check(ctx.model, ctx.spec, task["y_list"], ctx.ladder(task), ctx.samples(task), seed,
                                    ctx.run["margin"], ctx.workers)
    gaps = np.abs(np.array(rep.gaps))
    ses = np.array(rep.gap_std_errors)
    verdict = bool(np.all(gaps <= 3 * ses + 1e-12))
    line = f"polygonal ergodic limits: max gap per rung {[round(g, 6) for g in rep.max_gap]}"
    return TaskResult(E._jsonable(rep), [line], verdict)


def task_compare(ctx: Context, task: dict, seed: int) -> TaskResult:
    rep = E.compare_c_cprime(ctx.model, ctx.spec, task["radii"], ctx.samples(task), seed, ctx.run["margin"],
                             ctx.workers)
    deterministic = M.constant_weight(ctx.model) is not None
    verdict = all(r.max_ratio <= r.bound + 1e-12 for r in rep.results) if deterministic else None
    lines = ["c versus c'' (torsion / finite-index maximum):"]
    lines += [f"  radius {r.radius}: median {r.median_ratio:.4g}, max {r.max_ratio:.4g}, bound {r.bound:.4g}"
              for r in rep.results]
    return TaskResult(E._jsonable(rep), lines, verdict)


def task_shape(ctx: Context, task: dict, seed: int) -> TaskResult:
    ns = [float(n) for n in task["n_values"]]
    seeds = int(task.get("seeds", 5))
    margin = float(task.get("margin", 1.0))
    dists = []
    csvs = {}
    for s in range(seeds):
        env = E.sample_env(seed, s)
        row = []
        for n in ns:
            a = K.extract_shape(ctx.spec, ctx.model, env, n, margin)
            b = K.extract_shape(ctx.spec, ctx.model, env, 2 * n, margin)
            row.append(K.hausdorff(a, b))
            if s == 0:
                cols = ["n"] + [f"p{i}" for i in range(a.kind.dim)] + ["seed"]
                csvs[f"cloud_n{n:g}"] = (cols, [[repr(n)] + [repr(float(v)) for v in p] + [env.master_seed]
                                                for p in a.points])
        dists.append(row)
    med = np.median(np.array(dists), axis=0)
    verdict = bool(np.all(np.diff(med) < 0))
    rep = dict(n_values=ns, seeds=seeds, hausdorff=dists, median=med.tolist())
    line = f"shape stabilisation, median d_H(B(n)/n, B(2n)/2n) for n={ns}: {[round(float(v), 4) for v in med]}"
    return TaskResult(rep, [line], verdict, csvs)


def _sweep_task(args) -> list[float]:
    model, spec, x, seed, margins = args
    env = M.Environment(seed)
    return [M.evaluate(model, env, spec, x, mg).value for mg in margins]


def task_margin_sweep(ctx: Context, task: dict, seed: int) -> TaskResult:
    x = G.validate(ctx.spec, task["x"])
    margins = [float(v) for v in task.get("margins", ctx.run["margin_sweep"])]
    jobs = [(ctx.model, ctx.spec, x, E.sample_env(seed, m).master_seed, margins) for m in range(ctx.samples(task))]
    vals = np.array(ordered_map(_sweep_task, jobs, ctx.workers))
    monotone = bool(np.all(np.diff(vals, axis=1) <= 0))
    rep = dict(x=list(x), margins=margins, means=vals.mean(axis=0).tolist(), monotone_per_sample=monotone)
    line = f"truncation sweep for x={x}: means {[round(float(v), 4) for v in rep['means']]}, monotone={monotone}"
    return TaskResult(rep, [line], monotone)


TASKS: dict[str, Callable[[Context, dict, int], TaskResult]] = {
    "phi": task_phi,
    "condition_all": task_condition_all,
    "condition_aml": task_condition_aml,
    "innerness": task_innerness,
    "polygonal": task_polygonal,
    "compare": task_compare,
    "shape": task_shape,
    "margin_sweep": task_margin_sweep,
}
assert set(TASKS) == set(TASK_KEYS)


# ---------------------------------------------------------------------------
# run / replay


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def execute(cfg: ExperimentConfig, out_dir, workers: int = 1) -> dict:
    """Run every task of ``cfg`` and write outputs plus ``manifest.json`` to ``out_dir``.

    Returns the manifest dict (with an extra ``verdicts`` entry).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if "CONEGROWTH_BUDGET_MB" not in os.environ:
        os.environ["CONEGROWTH_BUDGET_MB"] = str(cfg.run["budget_mb"])
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    ctx = Context(cfg, workers)
    chash = cfg.hash()
    fmts = cfg.outputs["formats"]
    files: dict[str, bytes] = {}
    summary = [f"conegrowth {__version__}  config {chash}",
               f"group: {ctx.spec.describe()}",
               f"model: {json.dumps(cfg.model, sort_keys=True)}",
               f"master seed: {cfg.run['master_seed']}", ""]
    seeds, verdicts = [], []
    for i, task in enumerate(cfg.run["tasks"]):
        seed = derive_seed(cfg.run["master_seed"], 7_000_001, i)
        seeds.append(seed)
        stem = f"{i:02d}_{task['type']}"
        try:
            res = TASKS[task["type"]](ctx, task, seed)
        except (MemoryBudgetExceeded, FloodUnbounded) as exc:
            raise type(exc)(f"task {i} ({task['type']}): {exc}") from exc
        verdicts.append(res.verdict)
        summary += [f"[{i}] {res.summary[0]}"] + res.summary[1:] + [f"    verdict: {_fmt(res.verdict)}"]
        if "json" in fmts:
            doc = {"config_hash": chash, "task": task, "seed": seed, "report": res.report, "verdict": res.verdict}
            files[stem + ".json"] = E.to_json(doc).encode()
        if "csv" in fmts:
            for name, (header, rows) in res.csvs.items():
                files[f"{stem}_{name}.csv"] = _csv_text(chash, header, rows).encode()
    files["summary.txt"] = ("\n".join(summary) + "\n").encode()
    for name, data in files.items():
        (out / name).write_bytes(data)
    manifest = {
        "format": CONFIG_FORMAT,
        "version": __version__,
        "config": cfg.to_dict(),
        "config_hash": chash,
        "source_dir": cfg.source_dir,
        "task_seeds": seeds,
        "outputs": {name: _sha(data) for name, data in sorted(files.items())},
        "execution": {"workers": workers, "started": started, "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z")},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return dict(manifest, verdicts=verdicts)


def replay(manifest_path, workers: Optional[int] = None, log=print) -> int:
    """Re-run a manifest; returns the number of drifted or missing outputs."""
    mpath = Path(manifest_path)
    man = json.loads(mpath.read_text())
    cfg = ExperimentConfig.from_dict(man["config"], man.get("source_dir"))
    w = workers if workers is not None else int(man.get("execution", {}).get("workers", 1))
    problems = 0
    with tempfile.TemporaryDirectory() as tmp:
        new = execute(cfg, tmp, w)
        for name, digest in sorted(man["outputs"].items()):
            existing = mpath.parent / name
            if not existing.exists():
                log(f"missing: {name}")
                problems += 1
            elif _sha(existing.read_bytes()) != digest:
                log(f"modified on disk: {name}")
                problems += 1
            if new["outputs"].get(name) != digest:
                log(f"drift: {name}")
                problems += 1
        for name in sorted(set(new["outputs"]) - set(man["outputs"])):
            log(f"drift: unexpected output {name}")
            problems += 1
    if problems == 0:
        log(f"replay ok: {len(man['outputs'])} outputs identical")
    return problems


# ---------------------------------------------------------------------------
# listings


def list_groups() -> str:
    return "\n".join([
        "free_abelian          Z^d, standard or custom generators            keys: dim, generators",
        "heisenberg            discrete Heisenberg group H3(Z)              keys: generators",
        "dihedral              Z^d x| Z_2 with r acting by -id               keys: dim",
        "direct_product_finite base x M for a finite group M                keys: base, finite, "
        "finite_generators, style",
        "  finite groups: {builtin: cyclic, order}, {builtin: sl23}, {builtin: cyclic_x_sl23, m}, {path: table.txt}",
    ])


def list_models() -> str:
    return "\n".join([
        "iid         i.i.d. edge weights                  keys: weight",
        "coloring    random vertex colouring, 0/1 edges   keys: palette",
        "richardson  Exp(lambda) passage times, lambda per direction class   keys: rate, shared_rates",
        "frog        discrete-time frog model             keys: walk_step_cap",
        "  distributions: constant(value), bernoulli(p, lo, hi), exponential(rate), uniform(lo, hi)",
        "  tasks: " + ", ".join(sorted(TASKS)),
    ])


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conegrowth", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="execute a config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default=None, help="output directory (overrides outputs.directory)")
    r.add_argument("--workers", type=int, default=None)
    r.add_argument("--assert", dest="assert_", action="store_true", help="nonzero exit if any verdict fails")
    r.add_argument("--seed-override", type=int, default=None)
    rp = sub.add_parser("replay", help="re-run a manifest and byte-compare outputs")
    rp.add_argument("manifest")
    rp.add_argument("--workers", type=int, default=None)
    sub.add_parser("list-groups")
    sub.add_parser("list-models")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list-groups":
            print(list_groups())
            return EXIT_OK
        if args.command == "list-models":
            print(list_models())
            return EXIT_OK
        if args.command == "replay":
            return EXIT_OK if replay(args.manifest, args.workers) == 0 else EXIT_DRIFT
        cfg = ExperimentConfig.load(args.config)
        if args.seed_override is not None:
            cfg.run["master_seed"] = int(args.seed_override)
        workers = args.workers if args.workers is not None else cfg.run["workers"]
        cfg.run["workers"] = workers
        out = args.out or os.path.join(cfg.source_dir or ".", cfg.outputs["directory"])
        man = execute(cfg, out, workers)
        print((Path(out) / "summary.txt").read_text(), end="")
        if args.assert_ and any(v is False for v in man["verdicts"]):
            print("assertion failed", file=sys.stderr)
            return EXIT_ASSERT
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MemoryBudgetExceeded, FloodUnbounded) as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ConeGrowthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
