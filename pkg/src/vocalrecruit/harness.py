"""Experiment configuration, goal sampling, drivers and result files.

Every driver takes an :class:`ExperimentConfig`, fans independent runs out
over a process pool, joins them in submission order and writes CSV/JSON
files whose bytes depend only on the configuration and the master seed.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .analysis import (
    RecruitmentRecord,
    grid_axis,
    rank_frequencies,
    recruitment_order,
    sensitivity_grid,
)
from .auditory import AuditoryGoal, AuditoryPoint, perceive_hz
from .errors import InvalidConfigError, VocalRecruitError
from .optimizer import OptimizerConfig, optimize, run
from .trajectory import N_ARTICULATORS, BasisConfig, integrate_batch

CONFIG_SCHEMA = "vocalrecruit.config/1"
EXPERIMENTS = ("exp1", "exp2", "exp3", "sweep", "toy")
OUTPUT_ENV = "VOCALRECRUIT_OUT"

# Values the published experiments used; metadata flags any departure.
REFERENCE_VALUES = {
    "optimizer.rollouts": 20,
    "optimizer.updates": 50,
    "basis.n_basis": 4,
    "basis.duration": 500.0,
    "basis.width": 50.0,
    "cost.distance_weight": 1e4,
    "cost.accel_weight": 1e-1,
    "analysis.threshold_pp": 0.05,
}

# Keys that affect how a job is scheduled but never what it computes.
_SCHEDULING_KEYS = ("workers", "output_dir")

# Substream tags so experiments sharing a master seed draw unrelated numbers.
_STREAM = {"exp1": 1, "exp2": 2, "exp3": 3, "sweep": 4, "toy": 5}


# --------------------------------------------------------------- configuration

def _default_dict() -> dict:
    text = resources.files("vocalrecruit.data").joinpath("default_config.yaml").read_text()
    return yaml.safe_load(text)


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if where == "goals":
            # goal labels are free-form; new labels add to the defaults
            _require(isinstance(value, dict), "goals must be a mapping")
            out[key] = {**base[key], **copy.deepcopy(value)}
            continue
        if key not in base:
            raise InvalidConfigError(f"unknown config key {where!r}")
        if isinstance(base.get(key), dict):
            if not isinstance(value, dict):
                raise InvalidConfigError(f"config key {where!r} must be a mapping")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise InvalidConfigError(message)


def _count(value, name: str) -> int:
    _require(isinstance(value, int) and not isinstance(value, bool) and value >= 1,
             f"{name} must be an integer >= 1, got {value!r}")
    return value


@dataclass(frozen=True)
class SynthesizerSpec:
    kind: str = "internal"
    endpoint: str | None = None
    calibration: str | None = None
    timeout: float = 10.0

    def open(self):
        if self.kind == "external":
            from .adapter import ExternalSynthesizer
            return ExternalSynthesizer(self.endpoint, self.timeout)
        from .vocaltract import Calibration, SurrogateSynthesizer
        cal = Calibration.load(self.calibration) if self.calibration else None
        return SurrogateSynthesizer(cal)


@dataclass(frozen=True)
class AnalysisParams:
    threshold_pp: float = 0.05
    dominance_min: float = 0.30
    half_window: int = 4
    grid_step: float = 0.05
    dp: float = 1e-3


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment settings; ``raw`` keeps the merged mapping."""

    raw: dict

    def __post_init__(self):
        r = self.raw
        _require(r.get("schema") == CONFIG_SCHEMA, f"config schema must be {CONFIG_SCHEMA!r}")
        _require(isinstance(r["master_seed"], int) and r["master_seed"] >= 0,
                 "master_seed must be a non-negative integer")
        _count(r["workers"], "workers")
        _require(isinstance(r["goals"], dict) and r["goals"], "goals must be a non-empty mapping")
        self.goals  # validates coordinates
        for v in r["exp1"]["vowels"]:
            _require(v in r["goals"], f"exp1 vowel {v!r} is not a configured goal")
        _require(len(set(r["exp1"]["vowels"])) == len(r["exp1"]["vowels"]), "exp1 vowels repeat")
        _count(r["exp1"]["seeds"], "exp1.seeds")
        _count(r["exp2"]["n_goals"], "exp2.n_goals")
        _require(r["exp3"]["vowel"] in r["goals"], "exp3 vowel is not a configured goal")
        _count(r["exp3"]["snapshot_every"], "exp3.snapshot_every")
        _count(r["sweep"]["samples"], "sweep.samples")
        _require(r["sweep"]["low"] < r["sweep"]["high"], "sweep.low must be below sweep.high")
        for key in ("seeds", "updates", "rollouts"):
            _count(r["toy"][key], f"toy.{key}")
        _require(len(r["toy"]["start"]) >= 1, "toy.start must be a non-empty list")
        _count(r["optimizer"]["updates"], "optimizer.updates")
        _count(r["optimizer"]["rollouts"], "optimizer.rollouts")
        self.basis, self.optimizer, self.analysis, self.toy_optimizer  # noqa: B018
        syn = self.synthesizer
        _require(syn.kind in ("internal", "external"), "synthesizer.kind must be internal or external")
        if syn.kind == "external":
            _require(bool(syn.endpoint), "external synthesizer needs an endpoint")
        if syn.calibration is not None:
            _require(Path(syn.calibration).is_file(),
                     f"calibration file {syn.calibration!r} does not exist")
        a = self.analysis
        _require(a.half_window >= 0 and a.threshold_pp >= 0 and a.dp > 0, "invalid analysis parameters")
        grid_axis(a.grid_step)

    @property
    def master_seed(self) -> int:
        return self.raw["master_seed"]

    @property
    def workers(self) -> int:
        return self.raw["workers"]

    @property
    def output_dir(self) -> Path:
        return Path(self.raw["output_dir"])

    @property
    def goals(self) -> dict:
        out = {}
        for label, spec in self.raw["goals"].items():
            try:
                if "w1" in spec:
                    point = AuditoryPoint(float(spec["w1"]), float(spec["w2"]))
                else:
                    point = AuditoryPoint.from_hz(float(spec["f1"]), float(spec["f2"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise InvalidConfigError(f"goal {label!r}: {exc}") from None
            out[str(label)] = AuditoryGoal(str(label), point)
        return out

    @property
    def basis(self) -> BasisConfig:
        return BasisConfig(**self.raw["basis"])

    @property
    def optimizer(self) -> OptimizerConfig:
        o = self.raw["optimizer"]
        return OptimizerConfig(
            n_updates=o["updates"], n_rollouts=o["rollouts"], lambda_init=float(o["lambda_init"]),
            h=float(o["h"]), eig_floor_ratio=float(o["eig_floor_ratio"]),
            covariance_center=o["covariance_center"], max_failed_updates=o["max_failed_updates"],
        )

    @property
    def toy_optimizer(self) -> OptimizerConfig:
        t = self.raw["toy"]
        return OptimizerConfig(
            n_updates=t["updates"], n_rollouts=t["rollouts"], lambda_init=float(t["lambda_init"]),
            h=float(self.raw["optimizer"]["h"]),
            eig_floor_ratio=float(self.raw["optimizer"]["eig_floor_ratio"]),
            covariance_center=self.raw["optimizer"]["covariance_center"],
        )

    @property
    def synthesizer(self) -> SynthesizerSpec:
        s = self.raw["synthesizer"]
        return SynthesizerSpec(s["kind"], s["endpoint"], s["calibration"], float(s["timeout"]))

    @property
    def analysis(self) -> AnalysisParams:
        a = self.raw["analysis"]
        return AnalysisParams(float(a["threshold_pp"]), float(a["dominance_min"]),
                              int(a["half_window"]), float(a["grid_step"]), float(a["dp"]))

    def with_overrides(self, overrides: dict) -> "ExperimentConfig":
        return ExperimentConfig(_merge(self.raw, overrides))

    def canonical(self) -> dict:
        """The merged config without scheduling-only keys."""
        return {k: v for k, v in self.raw.items() if k not in _SCHEDULING_KEYS}


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Shipped defaults, then the YAML file at ``path``, then ``overrides``."""
    raw = _default_dict()
    if path is not None:
        try:
            user = yaml.safe_load(Path(path).read_text())
        except OSError as exc:
            raise InvalidConfigError(f"cannot read config {path}: {exc}") from None
        except yaml.YAMLError as exc:
            raise InvalidConfigError(f"config {path} is not valid YAML: {exc}") from None
        if user is not None:
            _require(isinstance(user, dict), "config file must hold a mapping")
            raw = _merge(raw, user)
    if overrides:
        raw = _merge(raw, overrides)
    try:
        return ExperimentConfig(raw)
    except (KeyError, TypeError) as exc:
        raise InvalidConfigError(f"malformed config: {exc!r}") from None


# ----------------------------------------------------------------- goal space

@dataclass(frozen=True)
class VocalicTriangle:
    a: AuditoryPoint
    i: AuditoryPoint
    u: AuditoryPoint

    def __post_init__(self):
        if self.area() <= 1e-12:
            raise InvalidConfigError("vocalic triangle is degenerate (zero area)")

    def vertices(self) -> np.ndarray:
        return np.array([self.a.as_array(), self.i.as_array(), self.u.as_array()])

    def area(self) -> float:
        p = self.vertices()
        d1, d2 = p[1] - p[0], p[2] - p[0]
        return 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])

    def contains(self, point, tol: float = 1e-9) -> bool:
        p = self.vertices()
        x = np.asarray(point, dtype=float)
        signs = []
        for k in range(3):
            e = p[(k + 1) % 3] - p[k]
            r = x - p[k]
            signs.append(e[0] * r[1] - e[1] * r[0])
        scale = max(self.area(), 1.0)
        return all(s >= -tol * scale for s in signs) or all(s <= tol * scale for s in signs)

    @classmethod
    def from_goals(cls, goals: dict) -> "VocalicTriangle":
        try:
            return cls(goals["a"].point, goals["i"].point, goals["u"].point)
        except KeyError as exc:
            raise InvalidConfigError(f"vocalic triangle needs goal {exc}") from None


def sample_goal(tri: VocalicTriangle, rng: np.random.Generator, label: str = "random") -> AuditoryGoal:
    """Uniform point in the triangle via folded barycentric coordinates."""
    u, v = rng.random(2)
    if u + v > 1.0:
        u, v = 1.0 - u, 1.0 - v
    p = tri.vertices()
    w = p[0] + u * (p[1] - p[0]) + v * (p[2] - p[0])
    return AuditoryGoal(label, AuditoryPoint(float(w[0]), float(w[1])))


def job_seed(master_seed: int, stream: int, index: int) -> int:
    """Independent 32-bit seed for job ``index`` of an experiment stream."""
    return int(np.random.SeedSequence([master_seed, stream, index]).generate_state(1)[0])


# --------------------------------------------------------------- worker pool

_WORKER: dict = {}


def _init_worker(cfg: ExperimentConfig) -> None:
    _drop_synth()
    _WORKER.update(cfg=cfg, synth=None, pid=os.getpid())


def _drop_synth() -> None:
    # a forked worker inherits the parent's handle; only its owner may close it
    old = _WORKER.pop("synth", None)
    if old is not None and _WORKER.get("pid") == os.getpid():
        try:
            old.close()
        except Exception:
            pass


def _synth():
    """This process's synthesizer handle, opened on first use."""
    if _WORKER.get("synth") is None:
        _WORKER["synth"] = _WORKER["cfg"].synthesizer.open()
        _WORKER["pid"] = os.getpid()
    return _WORKER["synth"]


def _run_goal_job(job: tuple) -> dict:
    """One optimization run; never raises, failures become records."""
    index, goal, seed = job
    cfg = _WORKER["cfg"]
    a = cfg.analysis
    out = {"index": index, "goal": goal, "seed": seed, "failed": False, "error": None}
    try:
        result = run(goal, cfg.optimizer, _synth(), seed, basis=cfg.basis)
        record = recruitment_order(result.trace, goal, a.threshold_pp, a.dominance_min, a.half_window)
        out.update(
            lambdas=result.trace.lambda_array,
            best_costs=np.asarray(result.trace.best_costs),
            mean_costs=np.asarray(result.trace.mean_costs),
            final_means=result.final.means,
            final_formants=np.asarray(result.final_formants, dtype=float),
            final_cost=None if result.final_cost is None else result.final_cost.total,
            record=record,
        )
    except Exception as exc:  # crash isolation: the batch must complete
        _drop_synth()  # a broken connection must not poison the next job
        out.update(failed=True, error=f"{type(exc).__name__}: {exc}",
                   record=RecruitmentRecord(goal=goal, failed=True, error=f"{type(exc).__name__}: {exc}"))
    return out


def _map_jobs(cfg: ExperimentConfig, fn, jobs: list) -> list:
    """Apply ``fn`` to ``jobs`` in submission order over ``cfg.workers`` processes."""
    if cfg.workers == 1 or len(jobs) <= 1:
        _init_worker(cfg)
        return [fn(job) for job in jobs]
    results = []
    with ProcessPoolExecutor(max_workers=min(cfg.workers, len(jobs)),
                             initializer=_init_worker, initargs=(cfg,)) as pool:
        futures = [pool.submit(fn, job) for job in jobs]
        for job, fut in zip(jobs, futures):
            try:
                results.append(fut.result())
            except Exception as exc:  # worker process died
                index, goal, seed = job
                msg = f"{type(exc).__name__}: {exc}"
                results.append({"index": index, "goal": goal, "seed": seed, "failed": True,
                                "error": msg, "record": RecruitmentRecord(goal, failed=True, error=msg)})
    return results


# -------------------------------------------------------------- serialization

def _num(x) -> str:
    x = float(x)
    return repr(x) if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer, bool)):
        return x if isinstance(x, bool) else int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    return x


def write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(data), sort_keys=True, indent=2) + "\n")


def write_csv(path: Path, schema: str, header: list, rows) -> None:
    """CSV with a leading ``# schema: <name>`` line."""
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    buf.write(f"# schema: {schema}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in row])
    path.write_text(buf.getvalue())


def read_csv(path: str | Path) -> tuple[str, list[dict]]:
    """Inverse of :func:`write_csv`: the schema name and the rows as dicts."""
    lines = Path(path).read_text().splitlines()
    schema = lines[0].removeprefix("# schema: ")
    return schema, list(csv.DictReader(lines[1:]))


def goal_dict(goal: AuditoryGoal) -> dict:
    f1, f2 = goal.point.to_hz()
    return {"label": goal.label, "w1": goal.point.w1, "w2": goal.point.w2, "f1_hz": f1, "f2_hz": f2}


def record_dict(rec: RecruitmentRecord, seed: int | None = None) -> dict:
    return {
        "schema": "vocalrecruit.record/1",
        "goal": goal_dict(rec.goal) if rec.goal is not None else None,
        "seed": seed,
        "order": list(rec.order),
        "peak_values": list(rec.peak_values),
        "first_update": list(rec.first_update),
        "qualifying": rec.qualifying,
        "failed": rec.failed,
        "error": rec.error,
    }


def write_trace(path: Path, res: dict) -> None:
    lam = res["lambdas"]
    total = lam.sum(axis=1)
    rel = lam / total[:, None]
    norm = total / total.max()
    idx = range(1, N_ARTICULATORS + 1)
    header = (["update"] + [f"lambda_{m}" for m in idx] + [f"rel_{m}" for m in idx]
              + ["total", "normalized_total", "best_cost", "mean_cost"])
    rows = []
    for u in range(len(lam)):
        rows.append([u + 1, *lam[u].astype(float), *rel[u].astype(float), float(total[u]),
                     float(norm[u]), float(res["best_costs"][u]), float(res["mean_costs"][u])])
    write_csv(path, "vocalrecruit.trace/1", header, rows)


def write_metadata(out: Path, experiment: str, cfg: ExperimentConfig) -> None:
    from . import cost

    raw = cfg.canonical()
    actual = {
        "optimizer.rollouts": raw["optimizer"]["rollouts"],
        "optimizer.updates": raw["optimizer"]["updates"],
        "basis.n_basis": raw["basis"]["n_basis"],
        "basis.duration": float(raw["basis"]["duration"]),
        "basis.width": float(raw["basis"]["width"]),
        "cost.distance_weight": cost.DISTANCE_WEIGHT,
        "cost.accel_weight": cost.ACCEL_WEIGHT,
        "analysis.threshold_pp": float(raw["analysis"]["threshold_pp"]),
    }
    write_json(out / "metadata.json", {
        "schema": "vocalrecruit.metadata/1",
        "experiment": experiment,
        "master_seed": cfg.master_seed,
        "reference_values": REFERENCE_VALUES,
        "effective": actual,
        "deviations": sorted(k for k in REFERENCE_VALUES if actual[k] != REFERENCE_VALUES[k]),
        "config": raw,
    })


def _exp_dir(cfg: ExperimentConfig, name: str) -> Path:
    out = cfg.output_dir / name
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_run(out: Path, stem: str, res: dict) -> None:
    if not res["failed"]:
        write_trace(out / "traces" / f"{stem}.csv", res)
    data = record_dict(res["record"], res["seed"])
    data["final_cost"] = res.get("final_cost")
    data["final_formants_hz"] = res.get("final_formants")
    write_json(out / "records" / f"{stem}.json", data)


# --------------------------------------------------------------- experiments

def run_exp1(cfg: ExperimentConfig) -> dict:
    """Seeds x vowels optimization runs toward the configured vowel goals."""
    goals = cfg.goals
    vowels = cfg.raw["exp1"]["vowels"]
    n_seeds = cfg.raw["exp1"]["seeds"]
    jobs = []
    for v in vowels:
        for s in range(n_seeds):
            jobs.append((len(jobs), goals[v], job_seed(cfg.master_seed, _STREAM["exp1"], s)))
    results = _map_jobs(cfg, _run_goal_job, jobs)

    out = _exp_dir(cfg, "exp1")
    write_metadata(out, "exp1", cfg)
    summary = {"schema": "vocalrecruit.exp1/1", "vowels": {}}
    for k, v in enumerate(vowels):
        runs = results[k * n_seeds:(k + 1) * n_seeds]
        for s, res in enumerate(runs):
            _write_run(out, f"{v}_s{s:02d}", res)
        recs = [r["record"] for r in runs]
        qual = [r for r in recs if r.qualifying and not r.failed]
        summary["vowels"][v] = {
            "goal": goal_dict(goals[v]),
            "orders": [r.order for r in recs],
            "qualifying": len(qual),
            "failed": sum(r.failed for r in recs),
            "p1_first": sum(1 for r in qual if r.order and r.order[0] == 1),
        }
    write_json(out / "summary.json", summary)
    return summary


def run_exp2(cfg: ExperimentConfig) -> dict:
    """Independent runs toward goals drawn uniformly in the vocalic triangle."""
    tri = VocalicTriangle.from_goals(cfg.goals)
    n = cfg.raw["exp2"]["n_goals"]
    jobs = []
    for i in range(n):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, _STREAM["exp2"], i, 0]))
        jobs.append((i, sample_goal(tri, rng, f"g{i:05d}"), job_seed(cfg.master_seed, _STREAM["exp2"], i)))
    results = _map_jobs(cfg, _run_goal_job, jobs)

    out = _exp_dir(cfg, "exp2")
    write_metadata(out, "exp2", cfg)
    for res in results:
        _write_run(out, res["goal"].label, res)
    records = [r["record"] for r in results]
    table, counts = rank_frequencies(records)
    header = ["articulator"] + [f"rank_{r}" for r in range(1, N_ARTICULATORS + 1)]
    write_csv(out / "rank_frequencies.csv", "vocalrecruit.rank_frequencies/1", header,
              [[f"P{m + 1}", *table[m].astype(float)] for m in range(N_ARTICULATORS)])
    summary = {"schema": "vocalrecruit.exp2/1", "counts": counts,
               "rank1": {f"P{m + 1}": float(table[m, 0]) for m in range(N_ARTICULATORS)}}
    write_json(out / "summary.json", summary)
    summary["table"] = table
    return summary


def snapshot_updates(n_updates: int, every: int) -> list[int]:
    """1-based update indices 1, 1 + every, 1 + 2 every, ..."""
    return list(range(1, n_updates + 1, every))


def run_exp3(cfg: ExperimentConfig) -> dict:
    """A run toward one vowel, then the P1/P3 sensitivity grid around its end state."""
    goal = cfg.goals[cfg.raw["exp3"]["vowel"]]
    seed = job_seed(cfg.master_seed, _STREAM["exp3"], 0)
    [res] = _map_jobs(cfg, _run_goal_job, [(0, goal, seed)])
    if res["failed"]:
        raise VocalRecruitError(f"exp3 optimization run failed: {res['error']}")
    pos, _, _ = integrate_batch(res["final_means"][None], cfg.basis)
    end = pos[0, :, -1]
    fixed = end[[1, 3, 4, 5, 6]]
    a = cfg.analysis
    grid = sensitivity_grid(goal, fixed, _synth(), step=a.grid_step, dp=a.dp)

    out = _exp_dir(cfg, "exp3")
    write_metadata(out, "exp3", cfg)
    _write_run(out, f"{goal.label}_run", res)
    rows = []
    for i, p1 in enumerate(grid.p1):
        for j, p3 in enumerate(grid.p3):
            rows.append([float(p1), float(p3), float(grid.w1[i, j]), float(grid.w2[i, j]),
                         float(grid.dj_dp1[i, j]), float(grid.dj_dp3[i, j]), float(grid.ratio[i, j])])
    write_csv(out / "sensitivity_grid.csv", "vocalrecruit.sensitivity_grid/1",
              ["p1", "p3", "w1", "w2", "dj_dp1", "dj_dp3", "ratio"], rows)
    lam = res["lambdas"]
    rel = lam / lam.sum(axis=1, keepdims=True)
    snaps = snapshot_updates(len(lam), cfg.raw["exp3"]["snapshot_every"])
    summary = {
        "schema": "vocalrecruit.exp3/1",
        "goal": goal_dict(goal),
        "seed": seed,
        "end_configuration": end,
        "fixed_others": {f"P{m}": float(v) for m, v in zip((2, 4, 5, 6, 7), fixed)},
        "rest_ratio": grid.ratio_at(0.0, 0.0),
        "n_cells": grid.n_cells,
        "undefined_cells": int(np.isnan(grid.ratio).sum()),
        "snapshots": [{"update": u, "relative": rel[u - 1]} for u in snaps],
        "record": record_dict(res["record"], seed),
    }
    write_json(out / "summary.json", summary)
    summary["grid"] = grid
    return summary


def run_sweep(cfg: ExperimentConfig) -> dict:
    """Formants reached by moving one articulator at a time, others at rest."""
    from .vocaltract import synthesize_configs

    s = cfg.raw["sweep"]
    n = s["samples"]
    _init_worker(cfg)
    synth = _synth()
    rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, _STREAM["sweep"]]))
    values = rng.uniform(s["low"], s["high"], size=(N_ARTICULATORS, n))
    configs = np.zeros((N_ARTICULATORS * n, N_ARTICULATORS))
    for m in range(N_ARTICULATORS):
        configs[m * n:(m + 1) * n, m] = values[m]
    f = synth.formants_for(configs[..., None])
    ok = ~np.isnan(f).any(axis=1)
    w = np.full((len(f), 2), np.nan)
    w[ok] = perceive_hz(f[ok, 0], f[ok, 1])

    out = _exp_dir(cfg, "sweep")
    write_metadata(out, "sweep", cfg)
    rows = []
    for k in range(len(configs)):
        m = k // n
        rows.append([f"P{m + 1}", float(values[m, k % n]), *f[k].astype(float), *w[k].astype(float),
                     int(ok[k])])
    write_csv(out / "samples.csv", "vocalrecruit.sweep_samples/1",
              ["articulator", "value", "f1", "f2", "f3", "w1", "w2", "ok"], rows)

    rest = synth.formants_for(np.zeros((1, N_ARTICULATORS, 1)))[0]
    rest_w = perceive_hz(rest[0], rest[1])
    header = ["articulator", "n_ok"]
    for name in ("f1", "f2", "f3", "w1", "w2"):
        header += [f"{name}_min", f"{name}_max", f"{name}_range"]
    header.append("diagonal")
    table = [["rest", 1] + [v for x in (*rest, *rest_w) for v in (float(x), float(x), 0.0)] + [0.0]]
    summary = {"schema": "vocalrecruit.sweep/1", "rest_hz": rest, "articulators": {}}
    for m in range(N_ARTICULATORS):
        sel = slice(m * n, (m + 1) * n)
        good = ok[sel]
        cols = np.column_stack([f[sel], w[sel]])[good]
        lo, hi = cols.min(axis=0), cols.max(axis=0)
        rng_ = hi - lo
        diag = float(np.hypot(rng_[3], rng_[4]))
        row = [f"P{m + 1}", int(good.sum())]
        for c in range(5):
            row += [float(lo[c]), float(hi[c]), float(rng_[c])]
        table.append(row + [diag])
        summary["articulators"][f"P{m + 1}"] = {"w1_range": float(rng_[3]), "w2_range": float(rng_[4]),
                                                "f1_range_hz": float(rng_[0]), "diagonal": diag,
                                                "failed": int((~good).sum())}
    write_csv(out / "summary.csv", "vocalrecruit.sweep_summary/1", header, table)
    write_json(out / "summary.json", summary)
    return summary


def _toy_job(job: tuple) -> dict:
    index, _, seed = job
    cfg = _WORKER["cfg"]
    start = np.asarray(cfg.raw["toy"]["start"], dtype=float)[None]
    dist, trace = optimize(lambda s: np.linalg.norm(s[:, 0, :], axis=1), start, cfg.toy_optimizer, seed)
    best = trace.best_so_far
    return {"index": index, "seed": seed, "final_mean": dist.means[0],
            "final_norm": float(np.linalg.norm(dist.means[0])),
            "best_nonincreasing": bool(np.all(np.diff(best) <= 0)), "best": best}


def run_toy(cfg: ExperimentConfig) -> dict:
    """Optimizer sanity check: minimize the norm of a small vector."""
    n = cfg.raw["toy"]["seeds"]
    jobs = [(s, None, job_seed(cfg.master_seed, _STREAM["toy"], s)) for s in range(n)]
    results = _map_jobs(cfg, _toy_job, jobs)
    out = _exp_dir(cfg, "toy")
    write_metadata(out, "toy", cfg)
    write_csv(out / "results.csv", "vocalrecruit.toy/1",
              ["run", "seed", "final_norm", "final_best_cost", "best_nonincreasing"],
              [[r["index"], r["seed"], r["final_norm"], float(r["best"][-1]), int(r["best_nonincreasing"])]
               for r in results])
    norms = [r["final_norm"] for r in results]
    summary = {"schema": "vocalrecruit.toy/1", "median_final_norm": float(np.median(norms)),
               "all_best_nonincreasing": all(r["best_nonincreasing"] for r in results)}
    write_json(out / "summary.json", summary)
    return summary


DRIVERS = {"exp1": run_exp1, "exp2": run_exp2, "exp3": run_exp3, "sweep": run_sweep, "toy": run_toy}


def run_experiment(name: str, cfg: ExperimentConfig) -> dict:
    if name not in DRIVERS:
        raise InvalidConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    try:
        return DRIVERS[name](cfg)
    finally:
        _drop_synth()
