"""Compiled game loop for long simulations.

Performs, round for round, the arithmetic of :func:`graphosmd.osmd.run_round`
on flat arrays.  Player uniforms and adversary losses arrive precomputed in
chunks, so the loop itself touches no Python objects.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .mirror import simplex_step_kernel
from .realizations import RealizationConfig

# counter slots
C_GUARD, C_WBOUND, C_GAMMA_HALF, C_ITERS, C_ITERS_MAX = range(5)
NUM_COUNTERS = 5

# status codes (>= 0 means ok)
ERR_PROJECTION = -1
ERR_RESTRICTION = -2
ERR_GAMMA = -3
ERR_UNOBSERVED = -4


def _csr(lists) -> tuple[np.ndarray, np.ndarray]:
    ptr = np.zeros(len(lists) + 1, dtype=np.int64)
    for i, lst in enumerate(lists):
        ptr[i + 1] = ptr[i] + len(lst)
    idx = np.fromiter((v for lst in lists for v in lst), dtype=np.int64, count=int(ptr[-1]))
    return ptr, idx


@dataclass(frozen=True, eq=False)
class CompiledInstance:
    """Flat-array view of a realization for the compiled loop."""

    n: int
    m: int
    block_of: np.ndarray
    blk_ptr: np.ndarray
    blk_idx: np.ndarray
    is_u2: np.ndarray
    is_u1sbar: np.ndarray
    proj_kinds: np.ndarray
    proj_rates: np.ndarray
    r_kind: np.ndarray
    r_eta: np.ndarray
    gamma_static: np.ndarray
    gamma_local: np.ndarray
    gbar_local: np.ndarray
    ad_coef: np.ndarray
    ad_ptr: np.ndarray
    ad_idx: np.ndarray
    out_ptr: np.ndarray
    out_idx: np.ndarray
    in_ptr: np.ndarray
    in_idx: np.ndarray
    guard_rate: float
    adaptive: bool

    @classmethod
    def build(cls, cfg: RealizationConfig) -> "CompiledInstance":
        part = cfg.partition
        g = part.graph
        m = part.m
        blk_ptr, blk_idx = _csr(part.blocks)
        out_ptr, out_idx = _csr(g.out_adj)
        in_ptr, in_idx = _csr(g.in_adj)
        is_u2 = np.zeros(m, dtype=np.bool_)
        is_u2[list(part.u2)] = True
        is_u1sbar = np.zeros(m, dtype=np.bool_)
        is_u1sbar[list(part.u1sbar)] = True
        r_kind = np.zeros(m, dtype=np.int64)
        r_eta = np.zeros(m)
        gbar_local = np.zeros(m)
        for k in part.u2:
            r_kind[k] = int(cfg.restriction_kind[k])
            r_eta[k] = cfg.restriction_step[k]
            gbar_local[k] = float(cfg.gamma_local[list(part.blocks[k])].sum())
        return cls(
            n=g.num_vertices,
            m=m,
            block_of=np.asarray(part.block_of, dtype=np.int64),
            blk_ptr=blk_ptr,
            blk_idx=blk_idx,
            is_u2=is_u2,
            is_u1sbar=is_u1sbar,
            proj_kinds=np.ascontiguousarray(cfg.projection.kinds, dtype=np.int64),
            proj_rates=np.ascontiguousarray(cfg.projection.rates, dtype=float),
            r_kind=r_kind,
            r_eta=r_eta,
            gamma_static=cfg.gamma_static.copy(),
            gamma_local=cfg.gamma_local.copy(),
            gbar_local=gbar_local,
            ad_coef=cfg.adaptive_coef.copy(),
            ad_ptr=cfg.adaptive_indptr,
            ad_idx=cfg.adaptive_indices,
            out_ptr=out_ptr,
            out_idx=out_idx,
            in_ptr=in_ptr,
            in_idx=in_idx,
            guard_rate=cfg.guard_rate,
            adaptive=bool(np.any(cfg.adaptive_coef)),
        )


@njit(cache=True)
def play_chunk(
    inst_block_of, blk_ptr, blk_idx, is_u2, is_u1sbar,
    proj_kinds, proj_rates, r_kind, r_eta,
    gamma_static, gamma_local, gbar_local, ad_coef, ad_ptr, ad_idx, adaptive,
    out_ptr, out_idx, in_ptr, in_idx, guard_rate,
    y, x, cum_arm, totals, counters, gamma_stats,
    losses, uniforms, arms,
    t0, cp_t, cp_next, cp_player, cp_expected, cp_best,
):
    """Play ``len(uniforms)`` rounds starting at round ``t0``.

    ``y`` (blocks) and ``x`` (per vertex) are updated in place; ``totals``
    holds [player loss, expected loss].  Returns ``(status, round, next
    checkpoint slot)``; a negative status names the failure and ``round`` is
    the round it happened in.
    """
    n = x.shape[0]
    m = y.shape[0]
    gamma = np.empty(n)
    xt = np.empty(n)
    z = np.empty(n)
    ellhat = np.zeros(n)
    big = np.empty(m)
    shifted = np.empty(m)
    ybuf = np.empty(m)
    coefs = np.empty(n)
    kinds = np.empty(n, dtype=np.int64)
    xbuf = np.empty(n)
    lbuf = np.empty(n)
    obuf = np.empty(n)
    touched = np.zeros(m, dtype=np.bool_)
    rounds = uniforms.shape[0]
    for r in range(rounds):
        t = t0 + r
        # exploration
        gbar = 0.0
        for v in range(n):
            g = gamma_static[v]
            if adaptive and ad_coef[v] != 0.0:
                acc = 0.0
                for p in range(ad_ptr[v], ad_ptr[v + 1]):
                    acc += np.sqrt(x[ad_idx[p]])
                g += ad_coef[v] * acc
            gamma[v] = g
            gbar += g
        if gbar > 1.0:
            return ERR_GAMMA, t, cp_next
        if gbar > 0.5:
            counters[C_GAMMA_HALF] += 1
        if gbar > gamma_stats[0]:
            gamma_stats[0] = gbar
        # play distribution, inverse-CDF draw in ascending arm order
        for v in range(n):
            k = inst_block_of[v]
            if is_u2[k]:
                xt[v] = (1.0 - gbar_local[k]) * x[v] + gamma_local[v]
            else:
                xt[v] = 1.0
            z[v] = (1.0 - gbar) * y[k] * xt[v] + gamma[v]
        total = 0.0
        for v in range(n):
            total += z[v]
        target = uniforms[r] * total
        acc = 0.0
        arm = n - 1
        for v in range(n):
            acc += z[v]
            if acc > target:
                arm = v
                break
        arms[r] = arm
        # accounting
        totals[0] += losses[r, arm]
        e = 0.0
        for v in range(n):
            e += z[v] * losses[r, v]
            cum_arm[v] += losses[r, v]
        totals[1] += e
        # importance-weighted estimates on N_out(arm)
        for p in range(out_ptr[arm], out_ptr[arm + 1]):
            a = out_idx[p]
            prob = 0.0
            for q in range(in_ptr[a], in_ptr[a + 1]):
                prob += z[in_idx[q]]
            if not prob > 0.0:
                return ERR_UNOBSERVED, t, cp_next
            ellhat[a] = losses[r, a] / prob
            touched[inst_block_of[a]] = True
        # block losses and shift
        for k in range(m):
            s = 0.0
            if touched[k]:
                for p in range(blk_ptr[k], blk_ptr[k + 1]):
                    v = blk_idx[p]
                    s += xt[v] * ellhat[v] if is_u2[k] else ellhat[v]
            big[k] = s
        c = 0.0
        for k in range(m):
            if is_u1sbar[k]:
                c += big[k] * y[k]
        nonzero = False
        lmin = np.inf
        for k in range(m):
            shifted[k] = big[k] - c
            if shifted[k] != 0.0:
                nonzero = True
            if shifted[k] < lmin:
                lmin = shifted[k]
        # projection step
        if m > 1 and nonzero:
            if lmin * guard_rate >= -0.25:
                for k in range(m):
                    if y[k] > 0.0:
                        cf = proj_rates[k] * shifted[k]
                        if proj_kinds[k] == 0:
                            w = y[k] * np.exp(-cf)
                        else:
                            d = 1.0 + 2.0 * cf * np.sqrt(y[k])
                            w = y[k] / (d * d)
                        if w > 4.0 * y[k] * (1.0 + 1e-12):
                            counters[C_WBOUND] += 1
                            break
            else:
                counters[C_GUARD] += 1
            it = simplex_step_kernel(y, shifted, proj_kinds, proj_rates, ybuf)
            if it < 0:
                return ERR_PROJECTION, t, cp_next
            counters[C_ITERS] += it
            if it > counters[C_ITERS_MAX]:
                counters[C_ITERS_MAX] = it
            for k in range(m):
                y[k] = ybuf[k]
        # restriction steps on blocks that saw a nonzero estimate
        for k in range(m):
            if not (touched[k] and is_u2[k]):
                continue
            lo = blk_ptr[k]
            size = blk_ptr[k + 1] - lo
            any_loss = False
            for j in range(size):
                v = blk_idx[lo + j]
                xbuf[j] = x[v]
                lbuf[j] = ellhat[v]
                kinds[j] = r_kind[k]
                coefs[j] = r_eta[k]
                if ellhat[v] != 0.0:
                    any_loss = True
            if not any_loss:
                continue
            it = simplex_step_kernel(xbuf[:size], lbuf[:size], kinds[:size], coefs[:size], obuf[:size])
            if it < 0:
                return ERR_RESTRICTION, t, cp_next
            counters[C_ITERS] += it
            if it > counters[C_ITERS_MAX]:
                counters[C_ITERS_MAX] = it
            for j in range(size):
                x[blk_idx[lo + j]] = obuf[j]
        # reset scratch
        for p in range(out_ptr[arm], out_ptr[arm + 1]):
            a = out_idx[p]
            ellhat[a] = 0.0
            touched[inst_block_of[a]] = False
        # checkpoint
        if cp_next < cp_t.shape[0] and cp_t[cp_next] == t:
            cp_player[cp_next] = totals[0]
            cp_expected[cp_next] = totals[1]
            best = np.inf
            for v in range(n):
                if cum_arm[v] < best:
                    best = cum_arm[v]
            cp_best[cp_next] = best
            cp_next += 1
    return 0, t0 + rounds, cp_next


def run_chunk(inst: CompiledInstance, state: dict, losses, uniforms, t0, cps: dict):
    """Thin wrapper unpacking the instance for :func:`play_chunk`."""
    arms = np.empty(uniforms.shape[0], dtype=np.int64)
    status, t, nxt = play_chunk(
        inst.block_of, inst.blk_ptr, inst.blk_idx, inst.is_u2, inst.is_u1sbar,
        inst.proj_kinds, inst.proj_rates, inst.r_kind, inst.r_eta,
        inst.gamma_static, inst.gamma_local, inst.gbar_local, inst.ad_coef,
        inst.ad_ptr, inst.ad_idx, inst.adaptive,
        inst.out_ptr, inst.out_idx, inst.in_ptr, inst.in_idx, inst.guard_rate,
        state["y"], state["x"], state["cum_arm"], state["totals"], state["counters"],
        state["gamma_stats"],
        np.ascontiguousarray(losses, dtype=float), np.ascontiguousarray(uniforms, dtype=float), arms,
        t0, cps["t"], cps["next"], cps["player"], cps["expected"], cps["best"],
    )
    cps["next"] = nxt
    return status, t, arms
