"""Two-level OSMD: a mirror-descent player over blocks (the projection
instance) composed with one mirror-descent player inside every multi-vertex
block (the restriction instances).

This is the readable reference composition, one round at a time.  The
compiled game loop in :mod:`graphosmd.kernel` performs the same arithmetic
and is cross-checked against it in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .graph import FeedbackGraph
from .mirror import (
    MirrorStepError,
    PotentialSpec,
    mirror_step_simplex,
    potential_argmin,
    unconstrained_step,
)
from .partition import LegalPartition
from .realizations import ConfigError, RealizationConfig

SIMPLEX_TOL = 1e-9
Z_TOL = 1e-7
GUARD = -0.25


class InternalError(RuntimeError):
    pass


@dataclass
class Diagnostics:
    """Counters shared by every state of one run."""

    guard_violations: int = 0  # rounds with min L' * max rate < -1/4
    w_bound_violations: int = 0  # guarded rounds where some W(i) > 4 Y(i)
    gamma_over_half: int = 0  # rounds with global exploration above 1/2
    gamma_bar_max: float = 0.0
    solver_failures: int = 0

    def as_dict(self) -> dict:
        return {
            "guard_violations": self.guard_violations,
            "w_bound_violations": self.w_bound_violations,
            "gamma_over_half": self.gamma_over_half,
            "gamma_bar_max": self.gamma_bar_max,
            "solver_failures": self.solver_failures,
        }


@dataclass
class TwoLevelState:
    config: RealizationConfig
    y: np.ndarray
    x: list[np.ndarray]  # per block; U1 blocks hold the constant vector (1.0,)
    t: int = 1
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    @property
    def partition(self) -> LegalPartition:
        return self.config.partition

    def x_by_vertex(self) -> np.ndarray:
        part = self.partition
        out = np.empty(part.graph.num_vertices)
        for block, xs in zip(part.blocks, self.x):
            out[list(block)] = xs
        return out


def initial_state(config: RealizationConfig) -> TwoLevelState:
    part = config.partition
    y = potential_argmin(config.projection) if part.m > 1 else np.ones(1)
    x = [np.full(len(b), 1.0 / len(b)) for b in part.blocks]
    return TwoLevelState(config=config, y=y, x=x)


@dataclass(frozen=True, eq=False)
class RoundPlan:
    graph: FeedbackGraph
    partition: LegalPartition
    y: np.ndarray
    x_tilde: list[np.ndarray]
    z: np.ndarray
    gamma_global: np.ndarray
    gamma_local: np.ndarray
    gamma_bar: float
    gamma_bar_local: dict[int, float]


def plan_round(state: TwoLevelState) -> RoundPlan:
    cfg = state.config
    part = cfg.partition
    gamma = cfg.global_exploration(state.x_by_vertex())
    gbar = float(gamma.sum())
    if gbar > 1.0:
        raise ConfigError(f"global exploration total {gbar:.4f} exceeds 1 at round {state.t}")
    gl_total: dict[int, float] = {}
    x_tilde: list[np.ndarray] = []
    z = np.empty(part.graph.num_vertices)
    for k, block in enumerate(part.blocks):
        idx = list(block)
        if len(block) == 1:
            xt = np.ones(1)
        else:
            gl = cfg.gamma_local[idx]
            g = float(gl.sum())
            if g > 1.0:
                raise ConfigError(f"local exploration total {g:.4f} of block {k} exceeds 1")
            gl_total[k] = g
            xt = (1.0 - g) * state.x[k] + gl
        x_tilde.append(xt)
        z[idx] = (1.0 - gbar) * state.y[k] * xt + gamma[idx]
    if abs(z.sum() - 1.0) > Z_TOL or z.min() < -Z_TOL:
        raise InternalError(f"play distribution does not normalise (sum {z.sum()!r})")
    return RoundPlan(
        graph=part.graph,
        partition=part,
        y=state.y,
        x_tilde=x_tilde,
        z=z,
        gamma_global=gamma,
        gamma_local=cfg.gamma_local,
        gamma_bar=gbar,
        gamma_bar_local=gl_total,
    )


def sample_arm(plan: RoundPlan, rng: "np.random.Generator | float") -> int:
    """Inverse-CDF draw over ascending arm ids; ``rng`` may be a ready uniform in [0, 1)."""
    u = rng if isinstance(rng, float) else float(rng.random())
    cdf = np.cumsum(plan.z)
    arm = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    return min(arm, len(cdf) - 1)


def observation_probability(plan: RoundPlan, arm: int) -> float:
    ins = plan.graph.in_adj[arm]
    return float(plan.z[list(ins)].sum()) if ins else 0.0


def estimate_losses(plan: RoundPlan, played: int, observed: Mapping[int, float]) -> np.ndarray:
    expected = set(plan.graph.out_adj[played])
    if set(observed) != expected:
        raise ValueError(f"observations must cover exactly N_out({played})")
    ellhat = np.zeros(plan.graph.num_vertices)
    for a, loss in observed.items():
        p = observation_probability(plan, a)
        if not p > 0:
            raise InternalError(f"arm {a} was observed with probability 0")
        ellhat[a] = loss / p
    return ellhat


def block_losses(
    plan: RoundPlan, ellhat: np.ndarray, partition: LegalPartition
) -> tuple[np.ndarray, float, np.ndarray]:
    """Block losses L, shift c and the shifted vector L - c."""
    big = np.empty(partition.m)
    for k, block in enumerate(partition.blocks):
        idx = list(block)
        big[k] = ellhat[idx[0]] if len(idx) == 1 else float(plan.x_tilde[k] @ ellhat[idx])
    c = float(sum(big[k] * plan.y[k] for k in partition.u1sbar))
    return big, c, big - c


def update(state: TwoLevelState, ellhat: np.ndarray, shifted: np.ndarray) -> TwoLevelState:
    cfg = state.config
    part = cfg.partition
    diag = state.diagnostics
    y = state.y
    if part.m > 1 and np.any(shifted != 0):
        guarded = shifted.min() * cfg.guard_rate >= GUARD
        if not guarded:
            diag.guard_violations += 1
        else:
            w = unconstrained_step(y, shifted, cfg.projection)
            if np.any(w > 4.0 * y * (1 + 1e-12)):
                diag.w_bound_violations += 1
        try:
            y = mirror_step_simplex(y, shifted, cfg.projection)
        except MirrorStepError as exc:
            diag.solver_failures += 1
            raise MirrorStepError(f"round {state.t}: projection step failed: {exc}") from exc
    x = list(state.x)
    for k in part.u2:
        idx = list(part.blocks[k])
        loss = ellhat[idx]
        if not np.any(loss):
            continue
        spec = PotentialSpec(cfg.restriction_kind[k], 1.0)
        try:
            x[k] = mirror_step_simplex(x[k], loss, spec, step=cfg.restriction_step[k])
        except MirrorStepError as exc:
            diag.solver_failures += 1
            raise MirrorStepError(f"round {state.t}: block {k} step failed: {exc}") from exc
    for dist in [y, *x]:
        if abs(dist.sum() - 1.0) > SIMPLEX_TOL or dist.min() < 0:
            raise InternalError(f"round {state.t}: distribution left the simplex")
    return TwoLevelState(config=cfg, y=y, x=x, t=state.t + 1, diagnostics=diag)


@dataclass(frozen=True)
class RoundOutcome:
    arm: int
    loss: float  # loss paid by the player
    expected_loss: float  # <Z, loss vector>
    losses: np.ndarray  # full loss vector, for the simulator's books
    gamma_bar: float


def run_round(state: TwoLevelState, adversary, rng) -> tuple[TwoLevelState, RoundOutcome]:
    from .env import reveal

    plan = plan_round(state)
    diag = state.diagnostics
    diag.gamma_bar_max = max(diag.gamma_bar_max, plan.gamma_bar)
    if plan.gamma_bar > 0.5:
        diag.gamma_over_half += 1
    arm = sample_arm(plan, rng)
    observed, full = reveal(adversary, state.t, arm, plan.graph.out_adj[arm])
    ellhat = estimate_losses(plan, arm, observed)
    _, _, shifted = block_losses(plan, ellhat, state.partition)
    new = update(state, ellhat, shifted)
    outcome = RoundOutcome(
        arm=arm,
        loss=float(full[arm]),
        expected_loss=float(plan.z @ full),
        losses=full,
        gamma_bar=plan.gamma_bar,
    )
    return new, outcome

