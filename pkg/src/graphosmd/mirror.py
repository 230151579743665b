"""Separable potentials and mirror steps on the probability simplex.

Every coordinate carries its own potential, either negative entropy
``x log x / rate`` or Tsallis-1/2 ``-sqrt(x) / rate``.  Learning rates are
folded into the potential, so a step with ``step=1`` uses the rates as they
are, while a restriction-level step passes its own ``step`` with unit rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np
from numba import njit
from scipy.optimize import brentq

MAX_ITER = 100
TINY = 1e-15


class Kind(IntEnum):
    NEGATIVE_ENTROPY = 0
    TSALLIS_HALF = 1

    @classmethod
    def parse(cls, value: "str | int | Kind") -> "Kind":
        if isinstance(value, str):
            return {"negative_entropy": cls.NEGATIVE_ENTROPY, "tsallis_half": cls.TSALLIS_HALF}[value]
        return cls(value)

    @property
    def label(self) -> str:
        return "negative_entropy" if self is Kind.NEGATIVE_ENTROPY else "tsallis_half"


class MirrorStepError(RuntimeError):
    pass


@dataclass(frozen=True)
class PotentialSpec:
    kind: Kind
    rate: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", Kind.parse(self.kind))
        if not self.rate > 0:
            raise ValueError("rate must be positive")


@dataclass(frozen=True, eq=False)
class SeparablePotential:
    kinds: np.ndarray  # int64, one Kind per coordinate
    rates: np.ndarray  # float64, one rate per coordinate

    @classmethod
    def of(cls, specs: Sequence[PotentialSpec]) -> "SeparablePotential":
        return cls(
            np.array([int(s.kind) for s in specs], dtype=np.int64),
            np.array([s.rate for s in specs], dtype=float),
        )

    @classmethod
    def uniform(cls, kind: "Kind | str", rate: float, dim: int) -> "SeparablePotential":
        return cls.of([PotentialSpec(Kind.parse(kind), rate)] * dim)

    def __len__(self) -> int:
        return len(self.kinds)

    def __getitem__(self, i: int) -> PotentialSpec:
        return PotentialSpec(Kind(int(self.kinds[i])), float(self.rates[i]))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SeparablePotential):
            return NotImplemented
        return np.array_equal(self.kinds, other.kinds) and np.array_equal(self.rates, other.rates)

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        ent = self.kinds == Kind.NEGATIVE_ENTROPY
        out = np.where(ent, _xlogx(x), -np.sqrt(x)) / self.rates
        return float(out.sum())


def _xlogx(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def _as_potential(potential: "SeparablePotential | PotentialSpec", dim: int) -> SeparablePotential:
    if isinstance(potential, PotentialSpec):
        return SeparablePotential.uniform(potential.kind, potential.rate, dim)
    if len(potential) != dim:
        raise ValueError(f"potential has {len(potential)} coordinates, vector has {dim}")
    return potential


# -- compiled core -------------------------------------------------------------


@njit(cache=True)
def _step_point(y, loss, kinds, coefs, lam, out):
    """Fill ``out`` with x(lam) and return (sum, derivative of sum)."""
    total = 0.0
    deriv = 0.0
    for i in range(y.shape[0]):
        yi = y[i]
        if yi <= 0.0:
            out[i] = 0.0
            continue
        z = loss[i] + lam
        if kinds[i] == 0:
            e = -coefs[i] * z
            if e > 700.0:
                e = 700.0
            xi = yi * math.exp(e)
            out[i] = xi
            total += xi
            deriv -= coefs[i] * xi
        else:
            sy = math.sqrt(yi)
            d = 1.0 + 2.0 * coefs[i] * sy * z
            if d <= 0.0:
                out[i] = math.inf
                return math.inf, -math.inf
            xi = yi / (d * d)
            out[i] = xi
            total += xi
            deriv -= 4.0 * coefs[i] * yi * sy / (d * d * d)
    return total, deriv


@njit(cache=True)
def simplex_step_kernel(y, loss, kinds, coefs, out):
    """Exact minimiser of <x, loss> + B(x, y) on the simplex, written into ``out``.

    ``coefs[i]`` is the effective rate (step times potential rate) of
    coordinate i.  Returns the iteration count, or -1 on non-convergence.
    """
    n = y.shape[0]
    lmin = math.inf
    lmax = -math.inf
    all_ent = True
    c0 = coefs[0]
    for i in range(n):
        if y[i] <= 0.0:
            continue
        if loss[i] < lmin:
            lmin = loss[i]
        if loss[i] > lmax:
            lmax = loss[i]
        if kinds[i] != 0 or coefs[i] != c0:
            all_ent = False
    if lmin == math.inf:
        return -1
    if all_ent:
        # common-rate negative entropy: stable exponential weights
        total = 0.0
        for i in range(n):
            if y[i] <= 0.0:
                out[i] = 0.0
            else:
                out[i] = y[i] * math.exp(-c0 * (loss[i] - lmin))
                total += out[i]
        for i in range(n):
            out[i] /= total
        return 0
    hi = -lmin
    lo = -lmax
    # the Tsallis closed form needs 1 + 2 c sqrt(y) (loss + lam) > 0
    for i in range(n):
        if kinds[i] == 1 and y[i] > TINY:
            bound = -1.0 / (2.0 * coefs[i] * math.sqrt(y[i])) - loss[i]
            if bound > lo:
                lo = bound
    lam = hi
    it = 0
    while it < MAX_ITER:
        it += 1
        s, ds = _step_point(y, loss, kinds, coefs, lam, out)
        err = s - 1.0
        if abs(err) <= 1e-14:
            break
        if err > 0.0:
            lo = lam
        else:
            hi = lam
        if hi - lo <= 1e-15 * (1.0 + abs(lam)):
            break
        nxt = lam - err / ds if ds < 0.0 and s < math.inf else math.nan
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        lam = nxt
    else:
        return -1
    s, ds = _step_point(y, loss, kinds, coefs, lam, out)
    if not s < math.inf:
        s, ds = _step_point(y, loss, kinds, coefs, hi, out)
    for i in range(n):
        out[i] /= s
    return it


# -- public API ------------------------------------------------------------------


def mirror_step_simplex(
    x: np.ndarray,
    loss: np.ndarray,
    potential: "SeparablePotential | PotentialSpec",
    step: float = 1.0,
) -> np.ndarray:
    """``argmin_{z in simplex} step * <z, loss> + B_potential(z, x)``."""
    x = np.ascontiguousarray(x, dtype=float)
    loss = np.ascontiguousarray(loss, dtype=float)
    if x.shape != loss.shape or x.ndim != 1:
        raise ValueError("x and loss must be vectors of equal length")
    if not np.all(np.isfinite(loss)):
        raise ValueError("loss must be finite")
    if not step > 0:
        raise ValueError("step must be positive")
    pot = _as_potential(potential, x.shape[0])
    out = np.empty_like(x)
    iters = simplex_step_kernel(x, loss, pot.kinds, pot.rates * step, out)
    if iters < 0:
        raise MirrorStepError("normalisation multiplier did not converge")
    return out


def potential_argmin(potential: SeparablePotential) -> np.ndarray:
    """Minimiser of a separable potential over the simplex (the OSMD starting point)."""
    kinds, rates = potential.kinds, potential.rates
    if len(potential) == 1:
        return np.ones(1)
    ent = kinds == Kind.NEGATIVE_ENTROPY
    if np.all(ent) and np.all(rates == rates[0]):
        return np.full(len(potential), 1.0 / len(potential))

    # stationarity: grad_i(y_i) = -lam
    def point(lam: float) -> np.ndarray:
        y = np.empty(len(potential))
        y[ent] = np.exp(np.minimum(-rates[ent] * lam - 1.0, 700.0))
        ts = ~ent
        y[ts] = 1.0 / (4.0 * rates[ts] ** 2 * lam**2)
        return y

    def excess(lam: float) -> float:
        return float(point(lam).sum()) - 1.0

    if np.any(~ent):
        hi = 1.0
        while excess(hi) > 0:
            hi *= 2.0
        lo = hi
        while excess(lo) <= 0:  # the sum diverges as lam -> 0+
            lo /= 2.0
    else:
        lo, hi = -1.0, 1.0
        while excess(lo) < 0:
            lo *= 2.0
        while excess(hi) > 0:
            hi *= 2.0
    lam = brentq(excess, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    y = point(lam)
    return y / y.sum()


def unconstrained_step(
    y: np.ndarray, shifted_loss: np.ndarray, potential: "SeparablePotential | PotentialSpec"
) -> np.ndarray:
    """Coordinate-wise minimiser of ``<w, loss> + B(w, y)`` without the simplex constraint.

    Tsallis: ``w = y / (1 + 2 rate sqrt(y) loss)^2``;
    negative entropy: ``w = y exp(-rate loss)``.
    """
    y = np.asarray(y, dtype=float)
    loss = np.asarray(shifted_loss, dtype=float)
    pot = _as_potential(potential, y.shape[0])
    ent = pot.kinds == Kind.NEGATIVE_ENTROPY
    w = np.zeros_like(y)
    pos = y > 0
    e = pos & ent
    w[e] = y[e] * np.exp(-pot.rates[e] * loss[e])
    t = pos & ~ent
    denom = 1.0 + 2.0 * pot.rates[t] * np.sqrt(y[t]) * loss[t]
    if np.any(denom <= 0):
        raise MirrorStepError("Tsallis unconstrained step undefined: 1 + 2 rate sqrt(y) loss <= 0")
    w[t] = y[t] / denom**2
    return w


def local_norm_sq(
    loss: np.ndarray, y: np.ndarray, potential: "SeparablePotential | PotentialSpec"
) -> float:
    """``loss' (Hess potential(y))^{-1} loss`` for a separable potential."""
    loss = np.asarray(loss, dtype=float)
    y = np.asarray(y, dtype=float)
    pot = _as_potential(potential, y.shape[0])
    active = loss != 0
    if np.any(active & (y <= 0)):
        raise ValueError("local norm undefined: zero coordinate carries nonzero loss")
    ent = pot.kinds == Kind.NEGATIVE_ENTROPY
    inv_hess = np.where(ent, pot.rates * y, 4.0 * pot.rates * np.abs(y) ** 1.5)
    return float(np.sum(np.where(active, loss**2 * inv_hess, 0.0)))
