"""Seeded experiment campaigns over the model zoo, with per-trial records and summaries."""

from __future__ import annotations

import dataclasses
import functools
import hashlib
import json
import logging
import time
import traceback
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .analysis import path_distance, summarize_values
from .climber import InitialFieldSpec, climb_samples, sample_initial_field
from .core import ControlField, ValidationError
from .levelset import LevelSetParams, connect_samples, explore_samples, walk_far_samples
from .models import LANDSCAPES, Preset, load_preset
from .objectives import Landscape
from .string_method import StringParams, StringState, dense_check, init_arc, init_straight, relax

log = logging.getLogger(__name__)

KINDS = ("climb_pool", "connect_string", "connect_dmorph", "arc_test", "walk_far", "explore_random", "tolerance_sweep")

# metrics summarized over successful trials, per campaign kind
METRICS = {
    "climb_pool": ("s_max", "J", "iterations", "fluence"),
    "connect_string": ("R", "n_st", "iterations"),
    "connect_dmorph": ("R", "path_length"),
    "arc_test": ("R", "d_mean", "d_max"),
    "walk_far": ("R", "fluence"),
    "explore_random": ("max_window_R", "min_window_d_P", "max_window_d_P", "R"),
    "tolerance_sweep": (),
}


@dataclass
class ExperimentConfig:
    kind: str
    preset: str = "fourlevel"
    landscape: str = "STL"
    preset_seed: int = 0
    system: dict | None = None
    objective: dict | None = None
    trials: int = 10
    seed: int = 0
    epsilon: float = 1e-3
    eps_st: float = 1e-3
    eps_dm: float = 1e-3
    tau1: float = 1e-4
    tau2: float | None = None
    max_s: float = 1e3
    string_step: float = 0.05
    n_st0: int = 20
    max_iters: int = 1000
    dense_check: bool = True
    target_R: float = 5.0
    arc_n_st0: int = 32
    walks_per_start: int = 5
    fluence_cap: float = 1e3
    window: float = 1.0
    n_max: int = 100
    eps_values: list[float] = field(default_factory=lambda: [1e-3, 1e-4])
    log10_fluence_range: list[float] | None = None
    out: str | None = None
    workers: int = 1
    save_fields: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown campaign kind {self.kind!r}; expected one of {KINDS}")
        if self.landscape.upper() not in LANDSCAPES:
            raise ValidationError(f"landscape must be one of {LANDSCAPES}")
        self.landscape = self.landscape.upper()
        if not self.epsilon < 0.5 or not self.eps_st < 0.5:
            raise ValidationError("epsilon and eps_st must be below 0.5")
        for name in ("epsilon", "eps_st", "eps_dm", "tau1", "max_s", "string_step", "fluence_cap", "window"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.tau2 is not None and not self.tau2 > 0:
            raise ValidationError("tau2 must be positive")
        for name in ("trials", "n_st0", "max_iters", "walks_per_start", "n_max", "workers", "arc_n_st0"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be at least 1")
        if self.seed is None:
            raise ValidationError("a master seed is required")
        if not self.eps_values or any(not e > 0 for e in self.eps_values):
            raise ValidationError("eps_values must be positive")
        if (self.system is None) != (self.objective is None):
            raise ValidationError("inline system and objective must be given together")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        if "kind" not in data:
            raise ValidationError("config needs a campaign 'kind'")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = io.read_json(path)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """Hash of everything that affects results (not the output path or worker count)."""
        d = self.to_dict()
        d.pop("out")
        d.pop("workers")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def trial_seed(master: int, *path: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(master), *map(int, path)]))


@functools.lru_cache(maxsize=8)
def _preset_cached(name: str, seed: int) -> Preset:
    return load_preset(name, seed)


def build_landscape(cfg: ExperimentConfig) -> tuple[Landscape, Preset]:
    preset = _preset_cached(cfg.preset, cfg.preset_seed)
    if cfg.system is not None:
        system = io.system_from_dict(cfg.system)
        obj = io.objective_from_dict(cfg.objective)
        landscape = Landscape(system, obj, preset.duration, preset.n_steps)
        preset = dataclasses.replace(preset, system=system, objectives={obj.kind: obj})
        return landscape, preset
    return preset.landscape(cfg.landscape), preset


def _init_spec(cfg: ExperimentConfig, preset: Preset) -> InitialFieldSpec:
    if cfg.log10_fluence_range is None:
        return preset.init_spec
    return dataclasses.replace(preset.init_spec, log10_fluence_range=tuple(cfg.log10_fluence_range))


def optimal_field(cfg: ExperimentConfig, landscape: Landscape, preset: Preset, index: int, epsilon=None):
    """Climb the ``index``-th seeded initial field; the same index always gives the same optimum."""
    eps = cfg.epsilon if epsilon is None else epsilon
    E0 = sample_initial_field(_init_spec(cfg, preset), preset.grid, trial_seed(cfg.seed, 0, index))
    rep = climb_samples(landscape, E0.samples, epsilon=eps, max_s=cfg.max_s)
    if not rep.converged:
        raise RuntimeError(f"optimum {index} did not converge (J = {rep.J:.6g}, {rep.reason})")
    return rep.field.samples


def _pair(cfg, landscape, preset, i, epsilon=None):
    return (
        optimal_field(cfg, landscape, preset, 2 * i, epsilon),
        optimal_field(cfg, landscape, preset, 2 * i + 1, epsilon),
    )


def _level_params(cfg: ExperimentConfig, seed) -> LevelSetParams:
    return LevelSetParams(
        epsilon=cfg.epsilon, eps_dm=cfg.eps_dm, tau1=cfg.tau1, tau2=cfg.tau2, fluence_cap=cfg.fluence_cap, seed=seed,
        record_every=10,
    )


def _string_params(cfg: ExperimentConfig, eps_st=None) -> StringParams:
    return StringParams(eps_st=cfg.eps_st if eps_st is None else eps_st, step=cfg.string_step, max_iters=cfg.max_iters)


def _trial_climb(cfg, landscape, preset, i):
    E0 = sample_initial_field(_init_spec(cfg, preset), preset.grid, trial_seed(cfg.seed, 0, i))
    rep = climb_samples(landscape, E0.samples, epsilon=cfg.epsilon, max_s=cfg.max_s)
    Js = np.asarray(rep.J_history)
    rec = {
        "success": rep.converged,
        "reason": rep.reason,
        "J": rep.J,
        "s_max": rep.s_max,
        "iterations": rep.iterations,
        "n_evals": rep.n_evals,
        "fluence_initial": float(np.sum(E0.samples**2) * landscape.dt),
        "fluence": float(np.sum(rep.field.samples**2) * landscape.dt),
        "stalled_mid": bool(_stalled(rep.s_history, Js)),
        "history": rep.to_dict(max_points=200),
    }
    return rec, {"field": rep.field.samples}


def _stalled(s, J, band=(0.4, 0.6), frac=0.5) -> bool:
    """A climb stalls in ``band`` if it spends more than ``frac`` of its flow time there."""
    s = np.asarray(s)
    if len(s) < 2 or s[-1] == 0:
        return False
    ds = np.diff(s)
    mid = (J[:-1] >= band[0]) & (J[:-1] <= band[1])
    return ds[mid].sum() > frac * s[-1]


def _string_record(landscape, st: StringState, want_dense: bool):
    rec = {
        "success": st.status == "converged",
        "reason": st.reason,
        "R": st.R,
        "n_st": st.n_st,
        "iterations": st.iteration,
        "n_insertions": st.n_insertions,
        "path_length": st.path_length,
        "d_E": st.d_E,
        "J_min": float(np.min(st.J)),
        "J": [float(j) for j in st.J],
    }
    if want_dense and rec["success"]:
        rec["dense_J_min"] = float(dense_check(landscape, st).min())
    return rec


def _trial_string(cfg, landscape, preset, i):
    a, b = _pair(cfg, landscape, preset, i)
    st = relax(landscape, init_straight(a, b, cfg.n_st0, landscape.dt), _string_params(cfg))
    return _string_record(landscape, st, cfg.dense_check), {"path": st.images}


def _trial_dmorph(cfg, landscape, preset, i):
    a, b = _pair(cfg, landscape, preset, i)
    rep = connect_samples(landscape, a, b, _level_params(cfg, None))
    floor = 1 - cfg.epsilon - cfg.eps_dm
    rec = {
        "success": rep.outcome == "reached_target",
        "reason": "" if rep.outcome == "reached_target" else rep.outcome,
        "outcome": rep.outcome,
        "R": rep.R,
        "path_length": rep.path_length,
        "d_E": rep.d_E,
        "s": rep.s,
        "D_monotone": rep.level_steps_monotone(),
        "J_min": rep.J_min_recorded,
        "J_max": float(max(rep.J_values)),
        "J_in_band": bool(rep.J_min_recorded >= floor and max(rep.J_values) <= 1 + 1e-12),
        "n_falloffs": rep.n_falloffs,
    }
    return rec, {"path": np.stack(rep.path)}


def _trial_arc(cfg, landscape, preset, i):
    a, b = _pair(cfg, landscape, preset, i)
    st0 = init_arc(a, b, cfg.target_R, plane_seed=trial_seed(cfg.seed, 1, i), n_st0=cfg.arc_n_st0, dt=landscape.dt)
    arc = st0.images.copy()
    st = relax(landscape, st0, _string_params(cfg))
    rec = _string_record(landscape, st, False)
    rec["R_initial"] = StringState(arc, landscape.dt).R
    prof = path_distance(arc, st.images, dt=landscape.dt)
    rec["d_mean"] = prof.mean
    rec["d_max"] = prof.max
    return rec, {"path": st.images}


def _trial_walk(cfg, landscape, preset, i):
    start = optimal_field(cfg, landscape, preset, i // cfg.walks_per_start)
    rep = walk_far_samples(landscape, start, _level_params(cfg, trial_seed(cfg.seed, 2, i)))
    floor = 1 - cfg.epsilon - cfg.eps_dm
    rec = {
        "success": rep.outcome == "fluence_cap",
        "reason": "" if rep.outcome == "fluence_cap" else rep.outcome,
        "start_index": i // cfg.walks_per_start,
        "R": rep.R,
        "fluence": float(np.sum(rep.final**2) * landscape.dt),
        "path_length": rep.path_length,
        "d_E": rep.d_E,
        "J_min": rep.J_min_recorded,
        "J_in_band": bool(rep.J_min_recorded >= floor),
        "D_monotone": rep.level_steps_monotone(increasing=True),
        "n_falloffs": rep.n_falloffs,
    }
    return rec, {"path": np.stack(rep.path)}


def _trial_explore(cfg, landscape, preset, i):
    start = optimal_field(cfg, landscape, preset, i)
    rep = explore_samples(landscape, start, cfg.window, cfg.n_max, _level_params(cfg, trial_seed(cfg.seed, 3, i)))
    w = rep.windows
    rec = {
        "success": rep.outcome == "completed",
        "reason": "" if rep.outcome == "completed" else rep.outcome,
        "n_windows": len(w),
        "n_trapped": sum(x["trapped"] for x in w),
        "max_window_R": max(x["R"] for x in w),
        "min_window_d_P": min(x["d_P"] for x in w),
        "max_window_d_P": max(x["d_P"] for x in w),
        "R": rep.R,
        "d_E": rep.d_E,
        "path_length": rep.path_length,
        "J_min": rep.J_min_recorded,
        "fluence": float(np.sum(rep.final**2) * landscape.dt),
        "windows": w,
    }
    return rec, {"path": np.stack(rep.path)}


def _trial_sweep(cfg, landscape, preset, i):
    rec = {"success": True, "reason": "", "by_eps": {}}
    for eps in cfg.eps_values:
        a, b = _pair(cfg, landscape, preset, i, epsilon=eps)
        st = relax(landscape, init_straight(a, b, cfg.n_st0, landscape.dt), _string_params(cfg, eps_st=eps))
        ok = st.status == "converged"
        rec["by_eps"][repr(float(eps))] = {"converged": ok, "R": st.R, "n_st": st.n_st, "iterations": st.iteration}
        rec[f"R[eps={float(eps)!r}]"] = st.R if ok else None
        rec["success"] &= ok
    if not rec["success"]:
        rec["reason"] = "string_failed"
    return rec, {}


TRIALS = {
    "climb_pool": _trial_climb,
    "connect_string": _trial_string,
    "connect_dmorph": _trial_dmorph,
    "arc_test": _trial_arc,
    "walk_far": _trial_walk,
    "explore_random": _trial_explore,
    "tolerance_sweep": _trial_sweep,
}


def run_trial(cfg_dict: dict, i: int):
    """Run trial ``i``; any exception becomes a failed record instead of propagating."""
    cfg = ExperimentConfig.from_dict(cfg_dict)
    t0 = time.perf_counter()
    try:
        landscape, preset = build_landscape(cfg)
        rec, arrays = TRIALS[cfg.kind](cfg, landscape, preset, i)
    except Exception as exc:
        rec = {"success": False, "reason": f"error: {type(exc).__name__}: {exc}", "traceback": traceback.format_exc()}
        arrays = {}
    rec = {"trial": i, **rec, "elapsed": time.perf_counter() - t0}
    return io.to_jsonable(rec), arrays


def metric_names(kind: str, records: list[dict]) -> list[str]:
    if kind == "tolerance_sweep":
        keys = []
        for r in records:
            keys.extend(k for k in r if k.startswith("R[eps="))
        return sorted(set(keys), key=keys.index)
    return list(METRICS[kind])


def summarize(records: list[dict], kind: str) -> dict:
    """min/avg/max of each metric over successful trials plus failure counts."""
    if not records:
        raise ValidationError("no records to summarize")
    ok = [r for r in records if r.get("success")]
    stats = {name: summarize_values([r.get(name) for r in ok]) for name in metric_names(kind, records)}
    reasons = Counter(r.get("reason") or "unknown" for r in records if not r.get("success"))
    return {
        "n_trials": len(records),
        "n_success": len(ok),
        "n_failed": len(records) - len(ok),
        "failure_reasons": dict(reasons),
        "metrics": stats,
    }


@dataclass
class CampaignSummary:
    config: dict
    config_hash: str
    records: list[dict]
    stats: dict
    wall_clock: float

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "config_hash": self.config_hash,
            "stats": self.stats,
            "wall_clock": self.wall_clock,
            "records": self.records,
        }

    @classmethod
    def from_dict(cls, data: dict, check: bool = True) -> "CampaignSummary":
        s = cls(data["config"], data["config_hash"], data["records"], data["stats"], data["wall_clock"])
        if check:
            s.check_consistency()
        return s

    def check_consistency(self, rel: float = 1e-12):
        again = summarize(self.records, self.config["kind"])
        if again["n_success"] != self.stats["n_success"] or again["n_failed"] != self.stats["n_failed"]:
            raise ValidationError("summary counts disagree with the stored records")
        for name, block in again["metrics"].items():
            stored = self.stats["metrics"].get(name)
            for key in ("min", "avg", "max"):
                a, b = block[key], None if stored is None else stored.get(key)
                if (a is None) != (b is None) or (a is not None and abs(a - b) > rel * max(1.0, abs(a))):
                    raise ValidationError(f"summary statistic {name}.{key} disagrees with the records")

    def metric(self, name: str) -> dict:
        return self.stats["metrics"][name]


def _persist_arrays(out: Path, i: int, arrays: dict, duration: float, rec: dict):
    if "field" in arrays:
        d = out / "fields"
        d.mkdir(parents=True, exist_ok=True)
        io.write_field_csv(d / f"trial_{i}.csv", ControlField(arrays["field"], duration))
    if "path" in arrays:
        manifest = {k: rec[k] for k in ("trial", "success", "R", "n_st", "iterations", "J") if k in rec}
        io.write_path_bundle(out / "paths" / f"trial_{i}", arrays["path"], duration, manifest)


def run_campaign(cfg: ExperimentConfig, progress=None) -> CampaignSummary:
    """Run every trial of the campaign, persisting records as they finish when ``cfg.out`` is set."""
    cfg.validate()
    build_landscape(cfg)  # surface config errors before spawning work
    cfg_dict = cfg.to_dict()
    out = Path(cfg.out) if cfg.out else None
    if out is not None:
        (out / "records").mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    records = []
    duration = _preset_cached(cfg.preset, cfg.preset_seed).duration

    def collect(rec, arrays):
        records.append(rec)
        if out is not None:
            io.write_json(out / "records" / f"trial_{rec['trial']}.json", rec)
            if cfg.save_fields:
                _persist_arrays(out, rec["trial"], arrays, duration, rec)
        if progress is not None:
            progress(rec)

    if cfg.workers <= 1:
        for i in range(cfg.trials):
            collect(*run_trial(cfg_dict, i))
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = {pool.submit(run_trial, cfg_dict, i): i for i in range(cfg.trials)}
            for fut, i in futures.items():
                try:
                    collect(*fut.result())
                except Exception as exc:  # worker died
                    collect({"trial": i, "success": False, "reason": f"worker: {type(exc).__name__}: {exc}"}, {})
    records.sort(key=lambda r: r["trial"])
    summary = CampaignSummary(
        config=cfg_dict,
        config_hash=cfg.digest(),
        records=records,
        stats=summarize(records, cfg.kind),
        wall_clock=time.perf_counter() - t0,
    )
    if out is not None:
        io.write_json(out / "summary.json", summary.to_dict())
    return summary


def load_summary(path) -> CampaignSummary:
    path = Path(path)
    if path.is_dir():
        path = path / "summary.json"
    return CampaignSummary.from_dict(io.read_json(path))
