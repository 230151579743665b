"""Experiment configs, presets, sweeps, exponent fits and bound reports."""

from __future__ import annotations

import copy
import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import generators
from .env import RunFailure, geometric_checkpoints, make_adversary, play_game
from .graph import FeedbackGraph, load_graph
from .partition import LegalPartition, build_partition, load_blocks, validate
from .realizations import (
    MODES,
    ConfigError,
    RealizationConfig,
    exploration_threshold,
    make_schedule,
)

log = logging.getLogger(__name__)

CSV_COLUMNS = ("family", "T", "seed", "checkpoint_t", "regret")


# -- presets ------------------------------------------------------------------


def _preset_c_corrupted(p):
    c = int(p.get("C", 2))
    return {
        "graph": {"generator": "c_corrupted", "params": {"num_clean": int(p.get("num_clean", 8)), "corrupted": c}},
        "partition": {"method": "c-corrupted"},
        "realization": {"mode": "adaptive"},
        "bound": {"theorem": "c-corrupted", "C": c},
    }


def _preset_clique_union(p):
    sizes = p.get("sizes") or [int(p.get("n", 4))] * int(p.get("m", 4))
    return {
        "graph": {"generator": "loopless_clique_union", "params": {"sizes": list(sizes)}},
        "partition": {"method": "components"},
        "realization": {"mode": "well_clustered"},
    }


def _preset_bipartite_union(p):
    sizes = p.get("sizes") or [[int(p.get("a", 2)), int(p.get("b", 2))]] * int(p.get("m", 4))
    return {
        "graph": {"generator": "bipartite_union", "params": {"sizes": [list(s) for s in sizes]}},
        "partition": {"method": "components"},
        "realization": {"mode": "well_clustered"},
    }


def _preset_bounded_degree(p):
    kind = p.get("cycle", "directed")
    gen = "directed_cycle" if kind == "directed" else "undirected_cycle"
    return {
        "graph": {"generator": gen, "params": {"n": int(p.get("n", 10))}},
        "partition": {"method": "trivial"},
        "realization": {"mode": "adaptive"},
    }


def _preset_hypercube(p):
    return {
        "graph": {"generator": "hypercube", "params": {"n": int(p.get("n", 4))}},
        "partition": {"method": "hypercube"},
        "realization": {"mode": "well_clustered"},
    }


PRESETS = {
    "c-corrupted": _preset_c_corrupted,
    "clique-union": _preset_clique_union,
    "bipartite-union": _preset_bipartite_union,
    "bounded-degree": _preset_bounded_degree,
    "hypercube": _preset_hypercube,
}


# -- config -------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    family: str
    graph: dict
    partition: dict
    realization: dict
    adversary: dict
    T: list[int]
    seeds: list[int]
    checkpoints: int = 32
    workers: int = 1
    engine: str = "compiled"
    output: dict = field(default_factory=dict)
    bound: dict = field(default_factory=dict)
    base_dir: str = "."

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base_dir: str | Path = ".") -> "ExperimentConfig":
        if not isinstance(data, Mapping):
            raise ConfigError("config must be a JSON object")
        data = dict(data)
        merged: dict[str, Any] = {}
        preset = data.pop("preset", None)
        if preset is not None:
            if preset not in PRESETS:
                raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
            merged.update(PRESETS[preset](data.pop("preset_params", {}) or {}))
            merged["family"] = preset
        for key, value in data.items():
            if key in ("realization", "partition") and isinstance(value, Mapping) and key in merged:
                merged[key] = {**merged[key], **value}
            else:
                merged[key] = value
        unknown = set(merged) - {f for f in cls.__dataclass_fields__} - {"preset_params"}
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        merged.pop("preset_params", None)
        for key in ("graph", "partition", "realization", "adversary", "T", "seeds"):
            if key not in merged:
                raise ConfigError(f"config is missing {key!r}")
        seeds = merged["seeds"]
        if isinstance(seeds, int):
            seeds = list(range(seeds))
        T = merged["T"]
        if isinstance(T, int):
            T = [T]
        try:
            T = [int(x) for x in T]
            seeds = [int(s) for s in seeds]
        except (TypeError, ValueError):
            raise ConfigError("T and seeds must be integers") from None
        if not T or any(b <= a for a, b in zip(T, T[1:])) or T[0] < 1:
            raise ConfigError("T list must be non-empty, positive and strictly increasing")
        if not seeds or len(set(seeds)) != len(seeds) or min(seeds) < 0:
            raise ConfigError("seeds must be a non-empty list of distinct non-negative integers")
        mode = merged["realization"].get("mode")
        if mode not in MODES:
            raise ConfigError(f"unknown realization mode {mode!r}; choose from {MODES}")
        family = merged.get("family") or merged["graph"].get("generator") or "custom"
        return cls(
            family=str(family),
            graph=dict(merged["graph"]),
            partition=dict(merged["partition"]),
            realization=dict(merged["realization"]),
            adversary=dict(merged["adversary"]),
            T=T,
            seeds=seeds,
            checkpoints=int(merged.get("checkpoints", 32)),
            workers=max(1, int(merged.get("workers", 1))),
            engine=str(merged.get("engine", "compiled")),
            output=dict(merged.get("output", {})),
            bound=dict(merged.get("bound", {})),
            base_dir=str(base_dir),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(data, base_dir=path.parent)

    def resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else Path(self.base_dir) / path

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("base_dir")
        return out


def build_graph(cfg: ExperimentConfig) -> FeedbackGraph:
    spec = cfg.graph
    if "file" in spec:
        return load_graph(cfg.resolve(spec["file"]))
    name = spec.get("generator")
    if name not in generators.GENERATORS:
        raise ConfigError(f"unknown graph generator {name!r}; choose from {sorted(generators.GENERATORS)}")
    try:
        return generators.GENERATORS[name](**spec.get("params", {}))
    except TypeError as exc:
        raise ConfigError(f"bad parameters for generator {name!r}: {exc}") from None


def build_partition_for(cfg: ExperimentConfig, graph: FeedbackGraph) -> LegalPartition:
    spec = cfg.partition
    if "file" in spec:
        return validate(graph, load_blocks(cfg.resolve(spec["file"])))
    if "blocks" in spec:
        return validate(graph, spec["blocks"])
    method = spec.get("method")
    try:
        return build_partition(graph, method)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_schedule(cfg: ExperimentConfig, partition: LegalPartition, T: int) -> RealizationConfig:
    choice = cfg.realization.get("choice")
    if isinstance(choice, Mapping):
        choice = {int(k): v for k, v in choice.items()}
    return make_schedule(cfg.realization["mode"], partition, T, choice)


# -- fits and aggregates ----------------------------------------------------------


@dataclass
class FitResult:
    slope: float | None
    intercept: float | None
    residual: float | None
    points: list[dict]
    defined: bool = True
    reason: str | None = None


def fit_exponent(points: Sequence[Sequence[float]]) -> FitResult:
    """Least-squares line through (log T, log mean regret).

    ``points`` are ``(T, mean)`` or ``(T, mean, stderr)`` tuples.  Nonpositive
    means, or fewer than three points, give an undefined fit.
    """
    rows = [
        {"T": int(p[0]), "mean": float(p[1]), "stderr": float(p[2]) if len(p) > 2 else None}
        for p in points
    ]
    if len(rows) < 3:
        return FitResult(None, None, None, rows, defined=False, reason="needs at least 3 points")
    if any(not r["mean"] > 0 for r in rows):
        return FitResult(None, None, None, rows, defined=False, reason="nonpositive mean regret")
    x = np.log([r["T"] for r in rows])
    y = np.log([r["mean"] for r in rows])
    (slope, intercept), res, *_ = np.polyfit(x, y, 1, full=True)
    residual = float(res[0]) if len(res) else 0.0
    return FitResult(float(slope), float(intercept), residual, rows)


def aggregate(rows: Iterable[Mapping[str, Any]]) -> dict[str, dict[int, dict]]:
    """Per family and T: mean and standard error of the final regret of each run."""
    finals: dict[tuple[str, int, int], tuple[int, float]] = {}
    for r in rows:
        key = (str(r["family"]), int(r["T"]), int(r["seed"]))
        cp, reg = int(r["checkpoint_t"]), float(r["regret"])
        if key not in finals or cp > finals[key][0]:
            finals[key] = (cp, reg)
    out: dict[str, dict[int, dict]] = {}
    for (fam, T, seed) in sorted(finals):
        out.setdefault(fam, {}).setdefault(T, {"seeds": [], "final": []})
        out[fam][T]["seeds"].append(seed)
        out[fam][T]["final"].append(finals[(fam, T, seed)][1])
    for fam in out:
        for T, d in out[fam].items():
            vals = np.array(d["final"])
            d["n"] = len(vals)
            d["mean"] = float(vals.mean())
            d["stderr"] = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return out


def read_results(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
            raise ConfigError(f"results CSV must have columns {','.join(CSV_COLUMNS)}")
        return [
            {
                "family": r["family"],
                "T": int(r["T"]),
                "seed": int(r["seed"]),
                "checkpoint_t": int(r["checkpoint_t"]),
                "regret": float(r["regret"]),
            }
            for r in reader
        ]


def write_results(path: str | Path, rows: Sequence[Mapping[str, Any]]) -> None:
    ordered = sorted(rows, key=lambda r: (r["family"], r["T"], r["seed"], r["checkpoint_t"]))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in ordered:
            w.writerow([r["family"], r["T"], r["seed"], r["checkpoint_t"], repr(float(r["regret"]))])


def fit_results(rows: Sequence[Mapping[str, Any]]) -> dict[str, FitResult]:
    agg = aggregate(rows)
    return {
        fam: fit_exponent([(T, d["mean"], d["stderr"]) for T, d in sorted(per_t.items())])
        for fam, per_t in agg.items()
    }


# -- bounds -------------------------------------------------------------------


def _u2_terms(part: LegalPartition) -> tuple[int, float, float, float]:
    u2 = part.u2
    sq = sum(part.lp[k].delta_star ** 2 for k in u2)
    dlog = sum(part.lp[k].delta_star * math.log(len(part.blocks[k])) for k in u2)
    roots = sum(math.sqrt(len(part.blocks[k])) for k in u2)
    return len(u2), sq, dlog, roots


def well_clustered_bound(part: LegalPartition, T: int) -> float:
    n_s, n_sbar = len(part.u1s), len(part.u1sbar)
    if not part.u2:
        if not n_sbar:
            return 2 * math.sqrt(2 * n_s) * T**0.5
        return (
            4 * math.sqrt(6 * n_s) * T**0.5
            + 2 * math.sqrt(10 * math.log(n_sbar)) * T**0.5
            + T**0.5
        )
    n_u2, sq, dlog, _ = _u2_terms(part)
    restr = 3 / 2 ** (1 / 3) * dlog ** (1 / 3) * T ** (2 / 3)
    if not n_sbar:
        return 3 * 2 ** (2 / 3) * (n_u2 * sq) ** (1 / 6) * T ** (2 / 3) + restr + 4 * math.sqrt(n_s) * T**0.5
    return (
        6 * 2 ** (1 / 3) * (n_u2 * sq) ** (1 / 6) * T ** (2 / 3)
        + restr
        + math.sqrt(6) / 3 * T**0.5
        + 4 * math.sqrt(6 * n_s) * T**0.5
        + 2 * math.sqrt(10 * math.log(n_sbar)) * T**0.5
        + 4 * T ** (1 / 3) * n_u2 ** (5 / 6) / (2 ** (1 / 3) * sq ** (1 / 6))
    )


def adaptive_bound(part: LegalPartition, T: int) -> float:
    """Adaptive-realization bound with the largest block size in place of the optimal arm's."""
    if not part.u2:
        raise ConfigError("the adaptive bound needs a multi-vertex block")
    n_s, n_sbar = len(part.u1s), len(part.u1sbar)
    n_u2, sq, _, roots = _u2_terms(part)
    n_max = max(len(part.blocks[k]) for k in part.u2)
    restr = 3 * (2 * roots) ** (1 / 3) * n_max ** (1 / 6) * T ** (2 / 3)
    if not n_sbar:
        return restr + 3 * 2 ** (2 / 3) * (n_u2 * sq) ** (1 / 6) * T ** (2 / 3) + 4 * math.sqrt(n_s) * T**0.5
    return (
        6 * 2 ** (1 / 3) * (n_u2 * sq) ** (1 / 6) * T ** (2 / 3)
        + restr
        + 4 * math.sqrt(6 * n_s) * T**0.5
        + 2 * math.sqrt(10 * math.log(n_sbar + 1)) * T**0.5
        + 4 * T ** (1 / 3) * n_u2 ** (5 / 6) / (2 ** (1 / 3) * sq ** (1 / 6))
        + math.sqrt(6) / 3 * T**0.5
    )


def c_corrupted_bound(C: int, T: int) -> float:
    return 9 * (4 * C) ** (1 / 3) * T ** (2 / 3)


def clique_union_order(part: LegalPartition, T: int) -> float:
    """Order quantity (sum_k log n_k)^(1/3) T^(2/3), without constants."""
    return sum(math.log(len(part.blocks[k])) for k in part.u2) ** (1 / 3) * T ** (2 / 3)


def bound_report(
    partition: LegalPartition,
    realization: "RealizationConfig | str",
    T: int,
    extra: Mapping[str, Any] | None = None,
) -> dict:
    """Theoretical regret bound matching the realization in use.

    ``extra={"theorem": "c-corrupted", "C": c}`` selects the corrupted-graph
    bound instead of the generic one.
    """
    mode = realization.mode if isinstance(realization, RealizationConfig) else realization
    extra = dict(extra or {})
    out: dict[str, Any] = {"T": T, "mode": mode}
    if extra.get("theorem") == "c-corrupted":
        out.update(theorem="c-corrupted", value=c_corrupted_bound(int(extra["C"]), T))
        return out
    if mode == "well_clustered":
        out.update(theorem="well-clustered", value=well_clustered_bound(partition, T))
    elif mode == "baseline":
        trivial = validate(partition.graph, [list(partition.graph.vertices)])
        out.update(theorem="well-clustered (single block)", value=well_clustered_bound(trivial, T))
    elif mode == "adaptive":
        out.update(theorem="adaptive", value=adaptive_bound(partition, T))
    else:
        out.update(theorem=None, value=None, note="no closed-form bound for mixed realizations")
    if partition.u2 and not partition.u1s and not partition.u1sbar:
        out["union_order"] = clique_union_order(partition, T)
    return out


# -- running --------------------------------------------------------------------


def _one_run(args) -> dict:
    cfg_dict, base_dir, T, seed = args
    cfg = ExperimentConfig.from_dict(cfg_dict, base_dir)
    graph = build_graph(cfg)
    part = build_partition_for(cfg, graph)
    sched = build_schedule(cfg, part, T)
    adv = make_adversary(cfg.adversary, graph.num_vertices, seed)
    cps = geometric_checkpoints(T, cfg.checkpoints)
    try:
        rec = play_game(graph, part, sched, adv, T, seed, checkpoints=cps, engine=cfg.engine)
        failure = None
    except RunFailure as exc:
        rec, failure = exc.record, str(exc)
    return {
        "T": T,
        "seed": seed,
        "checkpoints": rec.checkpoints.tolist(),
        "regret": rec.regret.tolist(),
        "expected_regret": rec.expected_regret.tolist(),
        "diagnostics": rec.diagnostics,
        "failure": failure,
        "adversary": adv.describe(),
    }


@dataclass
class ExperimentResult:
    rows: list[dict]
    summary: dict
    failures: list[dict]

    @property
    def ok(self) -> bool:
        return not self.failures


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    graph = build_graph(cfg)
    part = build_partition_for(cfg, graph)
    if cfg.engine not in ("compiled", "python"):
        raise ConfigError(f"unknown engine {cfg.engine!r}")
    schedules = {T: build_schedule(cfg, part, T) for T in cfg.T}
    make_adversary(cfg.adversary, graph.num_vertices, cfg.seeds[0])  # validate early
    jobs = [(cfg.to_dict(), cfg.base_dir, T, s) for T in cfg.T for s in cfg.seeds]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_one_run, jobs))
    else:
        results = []
        for job in jobs:
            results.append(_one_run(job))
            log.info("%s T=%d seed=%d done", cfg.family, job[2], job[3])
    results.sort(key=lambda r: (r["T"], r["seed"]))

    rows = [
        {"family": cfg.family, "T": r["T"], "seed": r["seed"], "checkpoint_t": int(t), "regret": float(g)}
        for r in results
        for t, g in zip(r["checkpoints"], r["regret"])
    ]
    agg = aggregate(rows).get(cfg.family, {})
    per_t = []
    diag_tot: dict[str, float] = {}
    for T in cfg.T:
        runs = [r for r in results if r["T"] == T]
        d = agg.get(T, {"n": 0, "mean": None, "stderr": None})
        exp_final = [r["expected_regret"][-1] for r in runs if r["expected_regret"]]
        counters = {}
        for r in runs:
            for k, v in r["diagnostics"].items():
                if k == "gamma_bar_max":
                    counters[k] = max(counters.get(k, 0.0), v)
                else:
                    counters[k] = counters.get(k, 0) + v
        for k, v in counters.items():
            diag_tot[k] = max(diag_tot.get(k, 0.0), v) if k == "gamma_bar_max" else diag_tot.get(k, 0) + v
        bound = bound_report(part, schedules[T], T, cfg.bound)
        per_t.append(
            {
                "T": T,
                "runs": d["n"],
                "mean_regret": d["mean"],
                "stderr_regret": d["stderr"],
                "mean_expected_regret": float(np.mean(exp_final)) if exp_final else None,
                "bound": bound,
                "diagnostics": counters,
                "constants": schedules[T].summary(),
            }
        )
    fit = fit_exponent([(p["T"], p["mean_regret"], p["stderr_regret"]) for p in per_t if p["runs"]])
    failures = [{"T": r["T"], "seed": r["seed"], "error": r["failure"]} for r in results if r["failure"]]
    try:
        t0 = exploration_threshold(cfg.realization["mode"], part, schedules[cfg.T[0]].block_choice or None)
    except ConfigError:
        t0 = None
    summary = {
        "family": cfg.family,
        "config": cfg.to_dict(),
        "graph": {"num_vertices": graph.num_vertices, "num_edges": len(graph.edges)},
        "partition": part.summary(),
        "exploration_threshold_T0": t0,
        "per_T": per_t,
        "fit": asdict(fit),
        "guard_totals": diag_tot,
        "failures": failures,
    }
    result = ExperimentResult(rows=rows, summary=summary, failures=failures)
    if write:
        write_outputs(cfg, result)
    return result


def write_outputs(cfg: ExperimentConfig, result: ExperimentResult) -> tuple[Path, Path]:
    csv_path = cfg.resolve(cfg.output.get("csv", f"{cfg.family}_results.csv"))
    json_path = cfg.resolve(cfg.output.get("summary", f"{cfg.family}_summary.json"))
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    write_results(csv_path, result.rows)
    json_path.write_text(json.dumps(result.summary, indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def expand_sweep(data: Mapping[str, Any]) -> list[dict]:
    """Cartesian product over ``sweep`` entries, each a dotted key with a value list.

    Every variant gets a family label naming the swept values.
    """
    data = copy.deepcopy(dict(data))
    grid = data.pop("sweep", None)
    if not grid:
        raise ConfigError("sweep config needs a non-empty 'sweep' object of key -> value list")
    variants = [({}, data)]
    for key, values in grid.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep entry {key!r} must be a non-empty list")
        grown = []
        for labels, base in variants:
            for v in values:
                item = copy.deepcopy(base)
                node = item
                parts = key.split(".")
                for p in parts[:-1]:
                    node = node.setdefault(p, {})
                node[parts[-1]] = v
                grown.append(({**labels, key: v}, item))
        variants = grown
    out = []
    base_family = data.get("family") or data.get("preset") or data.get("graph", {}).get("generator", "sweep")
    for labels, item in variants:
        suffix = ",".join(f"{k.split('.')[-1]}={_label(v)}" for k, v in labels.items())
        item["family"] = f"{base_family}[{suffix}]"
        out.append(item)
    return out


def _label(value: Any) -> str:
    return value if isinstance(value, str) else json.dumps(value, separators=(",", ":"))
