"""Oblivious adversaries, the game loop and regret bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import kernel
from .graph import FeedbackGraph
from .osmd import initial_state, run_round
from .partition import LegalPartition
from .realizations import ConfigError, RealizationConfig, make_schedule

ROLE_PLAYER = 1
ROLE_ADVERSARY = 2
CHUNK = 8192
ADVERSARY_KINDS = ("constant", "stochastic_gap", "fixed_sequence")


class AdversaryError(ValueError):
    """Losses outside [0, 1] or a malformed adversary description."""


class RunFailure(RuntimeError):
    def __init__(self, message: str, record: "RunRecord"):
        super().__init__(message)
        self.record = record


def stream(seed: int, role: int) -> np.random.Generator:
    """Independent Philox stream keyed by (seed, role)."""
    if not 0 <= seed < 2**64:
        raise ValueError("seed must fit in 64 unsigned bits")
    return np.random.Generator(np.random.Philox(key=np.array([seed, role], dtype=np.uint64)))


class Adversary:
    """Oblivious loss sequence, read strictly in round order.

    Rows are produced in blocks by :meth:`_generate`; the sequence never
    depends on how callers slice it, nor on the arms played.
    """

    kind = "abstract"
    rounds_available: int | None = None

    def __init__(self, num_arms: int):
        self.num_arms = num_arms
        self._next = 1  # next round to be handed out
        self._buf = np.empty((0, num_arms))
        self._buf_start = 1

    def _generate(self, t0: int, count: int) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind}

    def chunk(self, t0: int, count: int) -> np.ndarray:
        """Loss rows for rounds ``t0 .. t0 + count - 1``."""
        if t0 != self._next:
            raise AdversaryError(f"rounds must be read in order (expected {self._next}, got {t0})")
        rows = self._generate(t0, count)
        if rows.shape != (count, self.num_arms):
            raise AdversaryError("adversary produced a loss table of the wrong shape")
        if rows.size and (rows.min() < 0.0 or rows.max() > 1.0 or not np.all(np.isfinite(rows))):
            raise AdversaryError("losses must lie in [0, 1]")
        self._next += count
        return rows

    def losses(self, t: int) -> np.ndarray:
        """Full loss vector of round ``t``, buffering ``CHUNK`` rounds at a time."""
        off = t - self._buf_start
        if not 0 <= off < len(self._buf):
            if t != self._next:
                raise AdversaryError(f"rounds must be read in order (expected {self._next}, got {t})")
            count = CHUNK
            if self.rounds_available is not None:
                count = max(1, min(CHUNK, self.rounds_available - t + 1))
            self._buf_start = t
            self._buf = self.chunk(t, count)
            off = 0
        return self._buf[off]


class ConstantAdversary(Adversary):
    kind = "constant"

    def __init__(self, num_arms: int, value: "float | Sequence[float]" = 0.0):
        super().__init__(num_arms)
        row = np.broadcast_to(np.asarray(value, dtype=float), (num_arms,)).copy()
        if row.min() < 0 or row.max() > 1:
            raise AdversaryError("losses must lie in [0, 1]")
        self.row = row

    def _generate(self, t0, count):
        return np.tile(self.row, (count, 1))

    def describe(self):
        return {"kind": self.kind, "value": self.row.tolist()}


class StochasticGapAdversary(Adversary):
    """Best arm Bernoulli(base - gap), every other arm Bernoulli(base)."""

    kind = "stochastic_gap"

    def __init__(self, num_arms: int, gap: float, seed: int, best: int | None = None, base: float = 0.5):
        super().__init__(num_arms)
        if not (0 <= base - gap and base <= 1):
            raise AdversaryError("Bernoulli means must lie in [0, 1]")
        self.rng = stream(seed, ROLE_ADVERSARY)
        if best is None:
            best = int(self.rng.integers(num_arms))
        if not 0 <= best < num_arms:
            raise AdversaryError(f"best arm {best} out of range")
        self.best = best
        self.gap = gap
        self.base = base
        self.means = np.full(num_arms, base)
        self.means[best] = base - gap

    def _generate(self, t0, count):
        return (self.rng.random((count, self.num_arms)) < self.means).astype(float)

    def describe(self):
        return {"kind": self.kind, "best": self.best, "gap": self.gap, "base": self.base}


class FixedSequenceAdversary(Adversary):
    kind = "fixed_sequence"

    def __init__(self, table: np.ndarray):
        table = np.asarray(table, dtype=float)
        if table.ndim != 2:
            raise AdversaryError("loss table must be a T x N matrix")
        if table.size and (table.min() < 0 or table.max() > 1 or not np.all(np.isfinite(table))):
            raise AdversaryError("losses must lie in [0, 1]")
        super().__init__(table.shape[1])
        self.table = table
        self.rounds_available = len(table)

    @classmethod
    def load(cls, path: str | Path) -> "FixedSequenceAdversary":
        path = Path(path)
        if path.suffix == ".npy":
            return cls(np.load(path))
        return cls(np.loadtxt(path, delimiter=",", ndmin=2))

    def _generate(self, t0, count):
        end = t0 - 1 + count
        if end > len(self.table):
            raise AdversaryError(f"loss table has {len(self.table)} rows, round {end} requested")
        return self.table[t0 - 1 : end]

    def describe(self):
        return {"kind": self.kind, "rounds": len(self.table)}


def make_adversary(spec: Mapping, num_arms: int, seed: int) -> Adversary:
    kind = spec.get("kind")
    if kind == "constant":
        return ConstantAdversary(num_arms, spec.get("value", 0.0))
    if kind == "stochastic_gap":
        return StochasticGapAdversary(
            num_arms,
            float(spec.get("gap", 0.1)),
            seed,
            best=spec.get("best"),
            base=float(spec.get("base", 0.5)),
        )
    if kind == "fixed_sequence":
        adv = FixedSequenceAdversary.load(spec["path"])
        if adv.num_arms != num_arms:
            raise AdversaryError(f"loss table has {adv.num_arms} columns, graph has {num_arms} arms")
        return adv
    raise AdversaryError(f"unknown adversary kind {kind!r}; choose from {ADVERSARY_KINDS}")


def reveal(
    adversary: Adversary, t: int, played: int, out_neighbors: Sequence[int]
) -> tuple[dict[int, float], np.ndarray]:
    """Observed losses on ``N_out(played)`` plus the full vector for the books."""
    full = adversary.losses(t)
    return {int(a): float(full[a]) for a in out_neighbors}, full


# -- game loop ----------------------------------------------------------------


def geometric_checkpoints(T: int, points: int = 32) -> np.ndarray:
    cps = np.unique(np.round(np.geomspace(1, T, points)).astype(np.int64))
    return cps


@dataclass
class RunRecord:
    seed: int
    horizon: int
    checkpoints: np.ndarray
    player_loss: np.ndarray  # cumulative loss paid by the player
    expected_loss: np.ndarray  # cumulative <Z, loss>
    best_loss: np.ndarray  # cumulative loss of the best fixed arm so far
    diagnostics: dict = field(default_factory=dict)
    failed_at: int | None = None
    error: str | None = None
    arms: np.ndarray | None = None
    final_y: np.ndarray | None = None
    final_x: np.ndarray | None = None

    @property
    def regret(self) -> np.ndarray:
        return self.player_loss - self.best_loss

    @property
    def expected_regret(self) -> np.ndarray:
        return self.expected_loss - self.best_loss

    @property
    def final_regret(self) -> float:
        return float(self.regret[-1])


def _resolve(graph, partition, realization, T, choice) -> RealizationConfig:
    if isinstance(realization, RealizationConfig):
        cfg = realization
    else:
        if partition is None:
            raise ConfigError("a partition is needed to build a realization by name")
        cfg = make_schedule(realization, partition, T, choice)
    if cfg.partition.graph != graph:
        raise ConfigError("realization was built for a different graph")
    if cfg.horizon != T:
        raise ConfigError(f"realization was tuned for T={cfg.horizon}, asked to play T={T}")
    for k in cfg.partition.u2:
        if cfg.gamma_local[list(cfg.partition.blocks[k])].sum() > 1.0:
            raise ConfigError(f"local exploration of block {k} exceeds 1 at T={T}")
    if cfg.gamma_static.sum() > 1.0:
        raise ConfigError(f"global exploration exceeds 1 at T={T}")
    return cfg


def play_game(
    graph: FeedbackGraph,
    partition: LegalPartition | None,
    realization: "RealizationConfig | str",
    adversary: Adversary,
    T: int,
    seed: int,
    checkpoints: Sequence[int] | None = None,
    engine: str = "compiled",
    choice: Mapping[int, str] | None = None,
    record_arms: bool = False,
) -> RunRecord:
    """Play ``T`` rounds and record cumulative losses at the checkpoints.

    ``engine="compiled"`` runs the numba loop; ``engine="python"`` composes
    the reference round functions.  Both consume the same random streams.
    """
    cfg = _resolve(graph, partition, realization, T, choice)
    if adversary.num_arms != graph.num_vertices:
        raise ConfigError("adversary and graph disagree on the number of arms")
    cps = np.asarray(geometric_checkpoints(T) if checkpoints is None else sorted(set(checkpoints)), dtype=np.int64)
    if len(cps) == 0 or cps[0] < 1 or cps[-1] > T:
        raise ConfigError("checkpoints must lie in [1, T]")
    if engine == "compiled":
        return _play_compiled(cfg, adversary, T, seed, cps, record_arms)
    if engine == "python":
        return _play_python(cfg, adversary, T, seed, cps, record_arms)
    raise ConfigError(f"unknown engine {engine!r}")


def _play_python(cfg, adversary, T, seed, cps, record_arms) -> RunRecord:
    rng = stream(seed, ROLE_PLAYER)
    state = initial_state(cfg)
    n = cfg.partition.graph.num_vertices
    cum = np.zeros(n)
    paid = 0.0
    expected = 0.0
    player, exp_l, best = [], [], []
    arms = []
    cp_set = {int(c) for c in cps}
    failed_at = None
    error = None
    for t in range(1, T + 1):
        try:
            state, out = run_round(state, adversary, float(rng.random()))
        except Exception as exc:  # partial results on failure
            failed_at, error = t, f"{type(exc).__name__}: {exc}"
            break
        paid += out.loss
        expected += out.expected_loss
        cum += out.losses
        arms.append(out.arm)
        if t in cp_set:
            player.append(paid)
            exp_l.append(expected)
            best.append(cum.min())
    done = len(player)
    record = RunRecord(
        seed=seed,
        horizon=T,
        checkpoints=cps[:done].copy(),
        player_loss=np.array(player),
        expected_loss=np.array(exp_l),
        best_loss=np.array(best),
        diagnostics=state.diagnostics.as_dict(),
        failed_at=failed_at,
        error=error,
        arms=np.array(arms, dtype=np.int64) if record_arms else None,
        final_y=state.y.copy(),
        final_x=state.x_by_vertex(),
    )
    if failed_at is not None:
        raise RunFailure(f"run failed at round {failed_at}: {error}", record)
    return record


_ERRORS = {
    kernel.ERR_PROJECTION: "projection step did not converge",
    kernel.ERR_RESTRICTION: "restriction step did not converge",
    kernel.ERR_GAMMA: "global exploration total exceeds 1",
    kernel.ERR_UNOBSERVED: "an observed arm had observation probability 0",
}


def _play_compiled(cfg, adversary, T, seed, cps, record_arms) -> RunRecord:
    rng = stream(seed, ROLE_PLAYER)
    inst = kernel.CompiledInstance.build(cfg)
    init = initial_state(cfg)
    state = {
        "y": init.y.copy(),
        "x": init.x_by_vertex(),
        "cum_arm": np.zeros(inst.n),
        "totals": np.zeros(2),
        "counters": np.zeros(kernel.NUM_COUNTERS, dtype=np.int64),
        "gamma_stats": np.zeros(1),
    }
    book = {
        "t": cps,
        "next": 0,
        "player": np.zeros(len(cps)),
        "expected": np.zeros(len(cps)),
        "best": np.zeros(len(cps)),
    }
    arm_log = [] if record_arms else None
    failed_at = None
    error = None
    t = 1
    while t <= T:
        count = min(CHUNK, T - t + 1)
        uniforms = rng.random(count)
        losses = adversary.chunk(t, count)
        status, t_stop, arms = kernel.run_chunk(inst, state, losses, uniforms, t, book)
        if status < 0:
            failed_at, error = int(t_stop), _ERRORS.get(status, f"status {status}")
            if arm_log is not None:
                arm_log.append(arms[: t_stop - t])
            break
        if arm_log is not None:
            arm_log.append(arms)
        t += count
    c = state["counters"]
    diag = {
        "guard_violations": int(c[kernel.C_GUARD]),
        "w_bound_violations": int(c[kernel.C_WBOUND]),
        "gamma_over_half": int(c[kernel.C_GAMMA_HALF]),
        "gamma_bar_max": float(state["gamma_stats"][0]),
        "solver_failures": int(failed_at is not None and "converge" in (error or "")),
        "solver_iterations": int(c[kernel.C_ITERS]),
        "solver_iterations_max": int(c[kernel.C_ITERS_MAX]),
    }
    done = book["next"]
    record = RunRecord(
        seed=seed,
        horizon=T,
        checkpoints=cps[:done].copy(),
        player_loss=book["player"][:done],
        expected_loss=book["expected"][:done],
        best_loss=book["best"][:done],
        diagnostics=diag,
        failed_at=failed_at,
        error=error,
        arms=np.concatenate(arm_log) if arm_log else (np.zeros(0, np.int64) if record_arms else None),
        final_y=state["y"],
        final_x=state["x"],
    )
    if failed_at is not None:
        raise RunFailure(f"run failed at round {failed_at}: {error}", record)
    return record
