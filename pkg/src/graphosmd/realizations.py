"""Parameter schedules: potentials, exploration factors and step sizes.

``well_clustered`` pairs negative entropy with fixed exploration inside each
multi-vertex block; ``adaptive`` uses Tsallis-1/2 inside blocks with
exploration recomputed every round from the current block distributions;
``hybrid`` picks one of the two per block; ``baseline`` is well_clustered on
the single-block partition.

Projection-level constants (eta, eta_S, eta_Sbar, alpha) follow a three-way
case split on whether U2 and U1^Sbar are empty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .graph import FeedbackGraph, is_observable
from .mirror import Kind, SeparablePotential
from .partition import LegalPartition, NonObservableBlockError, validate

DENSE = "dense"
SPARSE = "sparse"
MODES = ("well_clustered", "adaptive", "hybrid", "baseline")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RealizationConfig:
    mode: str
    horizon: int
    partition: LegalPartition
    constants: dict[str, float]
    projection: SeparablePotential
    block_choice: dict[int, str]  # U2 block -> dense | sparse
    restriction_kind: dict[int, Kind]
    restriction_step: dict[int, float]
    gamma_static: np.ndarray  # fixed global exploration per vertex
    gamma_local: np.ndarray  # local exploration per vertex (zero outside U2)
    adaptive_coef: np.ndarray  # x*/delta_bar * beta_sparse per vertex of sparse blocks
    adaptive_indptr: np.ndarray  # CSR of in-block out-neighbours, for adaptive exploration
    adaptive_indices: np.ndarray
    gamma_bound: float  # upper bound on the total global exploration over all rounds
    flags: dict[str, bool] = field(default_factory=dict)

    @property
    def guard_rate(self) -> float:
        """max{eta, eta_S, eta_Sbar} over the rates that actually appear in the projection."""
        return float(self.projection.rates.max())

    @property
    def exploration_ok(self) -> bool:
        return self.flags.get("gamma_within_half", False)

    def global_exploration(self, x_by_vertex: np.ndarray) -> np.ndarray:
        """Global exploration for the current block distributions.

        ``x_by_vertex[v]`` is X_{block(v)}(local(v)); only sparse blocks read it.
        """
        gamma = self.gamma_static.copy()
        coef = self.adaptive_coef
        if np.any(coef):
            roots = np.sqrt(x_by_vertex)
            ptr, idx = self.adaptive_indptr, self.adaptive_indices
            for v in np.nonzero(coef)[0]:
                gamma[v] += coef[v] * roots[idx[ptr[v] : ptr[v + 1]]].sum()
        return gamma

    def summary(self) -> dict:
        return {
            "mode": self.mode,
            "T": self.horizon,
            "constants": dict(self.constants),
            "eta_k": {str(k): v for k, v in self.restriction_step.items()},
            "block_choice": {str(k): v for k, v in self.block_choice.items()},
            "projection_potential": [
                {"kind": Kind(int(k)).label, "rate": float(r)}
                for k, r in zip(self.projection.kinds, self.projection.rates)
            ],
            "gamma_bar_static": float(self.gamma_static.sum()),
            "gamma_bar_bound": self.gamma_bound,
            "gamma_local_totals": {
                str(k): float(self.gamma_local[list(self.partition.blocks[k])].sum())
                for k in self.partition.u2
            },
            "flags": dict(self.flags),
        }


def _projection_constants(part: LegalPartition, T: int, u1_gamma_total) -> dict[str, float]:
    """eta, eta_S, eta_Sbar and alpha for the projection instance.

    ``u1_gamma_total(eta_s, eta_sbar)`` returns the global exploration placed
    on U1 arms; it enters eta_S when U2 is empty.
    """
    n_u2 = len(part.u2)
    n_sbar = len(part.u1sbar)
    out: dict[str, float] = {}
    if n_sbar:
        out["eta_sbar"] = math.sqrt(math.log(n_sbar + 1) / (10.0 * T))
    if n_u2 == 0:
        bump = 20.0 if n_sbar else 0.0
        eta_sbar = out.get("eta_sbar", 0.0)
        eta_s = math.sqrt(1.0 / (2.0 * T + bump * T))
        # eta_S depends on the realised gamma_bar, which depends on eta_S
        for _ in range(200):
            gbar = u1_gamma_total(eta_s, eta_sbar)
            if gbar >= 1.0:
                raise ConfigError(f"U1 exploration {gbar:.3f} >= 1 at T={T}")
            new = math.sqrt(1.0 / ((2.0 / (1.0 - gbar) + bump) * T))
            if abs(new - eta_s) <= 1e-16 * new:
                eta_s = new
                break
            eta_s = new
        out["eta_s"] = eta_s
        out["gamma_bar_u1"] = u1_gamma_total(eta_s, eta_sbar)
        return out
    sq = sum(part.lp[k].delta_star ** 2 for k in part.u2)
    q = n_u2 * sq
    if n_sbar == 0:
        alpha = 2.0 ** (2.0 / 3.0) * q ** (1.0 / 6.0) / T ** (1.0 / 3.0)
        eta = 0.5 * (n_u2 / sq) ** 0.25 * math.sqrt(alpha / T)
        eta_s = 1.0 / math.sqrt(4.0 * T)
    else:
        alpha = 2.0 ** (4.0 / 3.0) * q ** (1.0 / 6.0) / T ** (1.0 / 3.0)
        eta = 0.25 * (n_u2 / sq) ** 0.25 * math.sqrt(alpha / T)
        eta_s = 1.0 / (2.0 * math.sqrt(6.0 * T))
    out.update(alpha=alpha, eta=eta, eta_s=eta_s)
    out["gamma_bar_u1"] = u1_gamma_total(eta_s, out.get("eta_sbar", 0.0))
    return out


def _u1_gamma(part: LegalPartition):
    n_s = len(part.u1s)
    n_sbar = len(part.u1sbar)

    def per_arm(eta_s: float, eta_sbar: float) -> tuple[float, float]:
        if not n_sbar:
            return 0.0, 0.0
        g_s = 4.0 * eta_s / n_s if n_s else 0.0
        g_sbar = 4.0 * eta_sbar / (n_sbar - 1) if n_sbar > 1 else 0.0
        return g_s, g_sbar

    def total(eta_s: float, eta_sbar: float) -> float:
        g_s, g_sbar = per_arm(eta_s, eta_sbar)
        return g_s * n_s + g_sbar * n_sbar

    return per_arm, total


def _build(
    part: LegalPartition, T: int, choice: Mapping[int, str], mode: str
) -> RealizationConfig:
    if T < 1:
        raise ConfigError("horizon T must be >= 1")
    graph = part.graph
    n = graph.num_vertices
    per_arm, u1_total = _u1_gamma(part)
    consts = _projection_constants(part, T, u1_total)

    kinds = np.zeros(part.m, dtype=np.int64)
    rates = np.zeros(part.m)
    for k in part.u2:
        kinds[k], rates[k] = Kind.TSALLIS_HALF, consts["eta"]
    for k in part.u1s:
        kinds[k], rates[k] = Kind.TSALLIS_HALF, consts["eta_s"]
    for k in part.u1sbar:
        kinds[k], rates[k] = Kind.NEGATIVE_ENTROPY, consts["eta_sbar"]
    projection = SeparablePotential(kinds, rates)

    gamma_static = np.zeros(n)
    gamma_local = np.zeros(n)
    adaptive_coef = np.zeros(n)
    g_s, g_sbar = per_arm(consts.get("eta_s", 0.0), consts.get("eta_sbar", 0.0))
    for k in part.u1s:
        gamma_static[part.blocks[k][0]] = g_s
    for k in part.u1sbar:
        gamma_static[part.blocks[k][0]] = g_sbar

    restriction_kind: dict[int, Kind] = {}
    restriction_step: dict[int, float] = {}
    dense = [k for k in part.u2 if choice[k] == DENSE]
    sparse = [k for k in part.u2 if choice[k] == SPARSE]
    dbar = part.delta_bar
    gamma_bound = float(gamma_static.sum())
    if part.u2:
        alpha = consts["alpha"]
        for k in part.u2:
            lp = part.lp[k]
            for j, v in enumerate(part.blocks[k]):
                gamma_local[v] = lp.weights[j] / lp.delta_star * alpha
    if dense:
        mass = sum(part.lp[k].delta_star * math.log(len(part.blocks[k])) for k in dense)
        beta = dbar / ((2.0 * T) ** (1.0 / 3.0) * mass ** (2.0 / 3.0))
        consts["beta"] = beta
        for k in dense:
            nk = len(part.blocks[k])
            restriction_kind[k] = Kind.NEGATIVE_ENTROPY
            restriction_step[k] = math.sqrt(2.0 * beta) * math.log(nk) / math.sqrt(dbar * T)
            w = part.lp[k].weights
            for j, v in enumerate(part.blocks[k]):
                gamma_static[v] = w[j] * math.log(nk) / dbar * beta
        gamma_bound = float(gamma_static.sum())
    if sparse:
        roots = sum(math.sqrt(len(part.blocks[k])) for k in sparse)
        n_max = max(len(part.blocks[k]) for k in sparse)
        beta_s = 2.0 ** (1.0 / 3.0) * dbar * n_max ** (1.0 / 6.0) / (T ** (1.0 / 3.0) * roots ** (2.0 / 3.0))
        consts["beta_sparse"] = beta_s
        for k in sparse:
            nk = len(part.blocks[k])
            restriction_kind[k] = Kind.TSALLIS_HALF
            restriction_step[k] = math.sqrt(beta_s * math.sqrt(nk) / (2.0 * T * dbar))
            w = part.lp[k].weights
            for j, v in enumerate(part.blocks[k]):
                adaptive_coef[v] = w[j] / dbar * beta_s
        # sum_j x*_j sum_{i in N_out(j)} sqrt(X(i)) <= sum_i sqrt(X(i)) <= sqrt(n_k), using LP feasibility
        gamma_bound += beta_s * roots / dbar

    indptr = np.zeros(n + 1, dtype=np.int64)
    indices: list[int] = []
    for v in range(n):
        if adaptive_coef[v]:
            k = part.block_of[v]
            indices += [u for u in graph.out_adj[v] if part.block_of[u] == k]
        indptr[v + 1] = len(indices)

    local_ok = all(
        gamma_local[list(part.blocks[k])].sum() <= 0.5 for k in part.u2
    )
    flags = {"gamma_within_half": bool(gamma_bound <= 0.5 and local_ok)}
    return RealizationConfig(
        mode=mode,
        horizon=T,
        partition=part,
        constants=consts,
        projection=projection,
        block_choice={k: choice[k] for k in part.u2},
        restriction_kind=restriction_kind,
        restriction_step=restriction_step,
        gamma_static=gamma_static,
        gamma_local=gamma_local,
        adaptive_coef=adaptive_coef,
        adaptive_indptr=indptr,
        adaptive_indices=np.asarray(indices, dtype=np.int64),
        gamma_bound=gamma_bound,
        flags=flags,
    )


def well_clustered_schedule(partition: LegalPartition, T: int) -> RealizationConfig:
    return _build(partition, T, {k: DENSE for k in partition.u2}, "well_clustered")


def adaptive_schedule(partition: LegalPartition, T: int) -> RealizationConfig:
    if not partition.u2:
        raise ConfigError("adaptive realization needs at least one multi-vertex block")
    return _build(partition, T, {k: SPARSE for k in partition.u2}, "adaptive")


def hybrid_schedule(
    partition: LegalPartition, T: int, choice: Mapping[int, str] | Sequence[str]
) -> RealizationConfig:
    if not isinstance(choice, Mapping):
        choice = dict(zip(partition.u2, choice))
    missing = [k for k in partition.u2 if k not in choice]
    if missing:
        raise ConfigError(f"no dense/sparse choice for blocks {missing}")
    bad = {k: c for k, c in choice.items() if c not in (DENSE, SPARSE)}
    if bad:
        raise ConfigError(f"block choices must be 'dense' or 'sparse', got {bad}")
    return _build(partition, T, dict(choice), "hybrid")


def baseline_schedule(graph: FeedbackGraph, T: int) -> RealizationConfig:
    """Single-block partition with the well_clustered realization."""
    if not is_observable(graph):
        raise NonObservableBlockError("graph is not observable")
    if graph.num_vertices < 2:
        raise ConfigError("baseline needs at least two arms")
    part = validate(graph, [list(graph.vertices)])
    return _build(part, T, {0: DENSE}, "baseline")


def make_schedule(
    mode: str,
    partition: LegalPartition,
    T: int,
    choice: Mapping[int, str] | None = None,
) -> RealizationConfig:
    if mode == "well_clustered":
        return well_clustered_schedule(partition, T)
    if mode == "adaptive":
        return adaptive_schedule(partition, T)
    if mode == "hybrid":
        if choice is None:
            raise ConfigError("hybrid mode needs a per-block choice")
        return hybrid_schedule(partition, T, choice)
    if mode == "baseline":
        return baseline_schedule(partition.graph, T)
    raise ConfigError(f"unknown realization mode {mode!r}; choose from {MODES}")


def exploration_threshold(
    mode: str,
    partition: LegalPartition,
    choice: Mapping[int, str] | None = None,
    t_max: int = 1 << 62,
) -> int:
    """Smallest horizon T0 from which every exploration total stays within 1/2.

    Totals are negative powers of T, so a doubling search followed by
    bisection finds the crossover.  Returns ``t_max`` if none is found.
    """

    def ok(T: int) -> bool:
        try:
            return make_schedule(mode, partition, T, choice).exploration_ok
        except ConfigError:
            return False

    hi = 1
    while not ok(hi):
        hi *= 2
        if hi > t_max:
            return t_max
    lo = hi // 2
    if lo < 1:
        return 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi
