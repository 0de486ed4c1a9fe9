"""Additive secret sharing over 64-bit floats.

A value is split into M slices that sum to the plaintext; any proper subset
of slices is independent of the value because the masks are drawn without
looking at it. All arithmetic is real-valued (no ring reduction), so shares
leak magnitude information; that trade-off is accepted deliberately and a
ring backend is out of scope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ShareError(ValueError):
    pass


class TripleReuseError(RuntimeError):
    pass


# Masks live on a dyadic lattice instead of the continuum: every partial sum
# in share space is then exact in float64 (integer arithmetic in disguise),
# so reconstruction round-trips bit-exactly for any lattice-representable
# payload. 2^-30 steps over +-1e3 leave ~2^41 mask values, which is the same
# heuristic masking the continuous draw gives float shares anyway.
MASK_GRID_BITS = 30
_MASK_GRID = 2.0 ** -MASK_GRID_BITS


def draw_masks(rng: np.random.Generator, count: int, shape, mask_range: float) -> np.ndarray:
    """Uniform lattice masks in [-mask_range, +mask_range] per non-owner party."""
    steps = max(1, int(mask_range / _MASK_GRID))
    ticks = rng.integers(-steps, steps + 1, size=(count, *shape), endpoint=False)
    return ticks.astype(np.float64) * _MASK_GRID


def make_shares(x, m: int, rng: np.random.Generator, *, owner: int = 1,
                mask_range: float = 1e3) -> list[np.ndarray]:
    """Split plaintext ``x`` into ``m`` additive slices.

    The owner's slice is ``x`` minus the sum of the m-1 random masks, so the
    round trip through :func:`reconstruct` is exact (the masks cancel
    bit-for-bit). Returned list is indexed by party (party i at position i-1).
    """
    if m < 2:
        raise ShareError("need at least 2 parties to share")
    if not 1 <= owner <= m:
        raise ShareError(f"owner {owner} out of range 1..{m}")
    x = np.asarray(x, dtype=np.float64)
    masks = draw_masks(rng, m - 1, x.shape, mask_range)
    shares: list[np.ndarray] = []
    k = 0
    for pid in range(1, m + 1):
        if pid == owner:
            shares.append(None)  # type: ignore[arg-type]
        else:
            shares.append(masks[k])
            k += 1
    shares[owner - 1] = x - masks.sum(axis=0)
    return shares

def reconstruct(shares: list[np.ndarray]) -> np.ndarray:
    """Sum a complete share set in ascending party order."""
    if not shares:
        raise ShareError("empty share set")
    if any(s is None for s in shares):
        raise ShareError("incomplete share set: missing party share")
    shape = np.shape(shares[0])
    if any(np.shape(s) != shape for s in shares[1:]):
        raise ShareError("share shapes disagree")
    total = np.array(shares[0], dtype=np.float64, copy=True)
    for s in shares[1:]:
        total = total + s
    return total


@dataclass
class Share:
    """One party's slice of a shared value. Addition and subtraction are local."""

    values: np.ndarray
    owner: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)

    @property
    def shape(self):
        return self.values.shape

    def _check(self, other: "Share") -> None:
        if self.owner != other.owner:
            raise ShareError("shares held by different parties cannot be combined")
        if self.values.shape != other.values.shape:
            raise ShareError(f"shape mismatch {self.values.shape} vs {other.values.shape}")

    def __add__(self, other: "Share") -> "Share":
        self._check(other)
        return Share(self.values + other.values, self.owner)

    def __sub__(self, other: "Share") -> "Share":
        self._check(other)
        return Share(self.values - other.values, self.owner)

    def __neg__(self) -> "Share":
        return Share(-self.values, self.owner)

    def scale(self, k: float) -> "Share":
        """Multiply by a public scalar (local; every party scales its slice)."""
        return Share(self.values * k, self.owner)

    def sum(self) -> "Share":
        """Share of the sum of all elements (local reduction)."""
        return Share(np.sum(self.values), self.owner)

    def sum_axis(self, axis: int) -> "Share":
        return Share(np.sum(self.values, axis=axis), self.owner)

    def pick(self, index) -> "Share":
        """Share of one element / sub-array (local slicing)."""
        return Share(self.values[index], self.owner)

    def tile(self, reps) -> "Share":
        return Share(np.tile(self.values, reps), self.owner)


@dataclass
class Triple:
    """Beaver triple slice: shares of (a, b, c) with c = a*b elementwise.

    Single use: consuming it twice voids the masking guarantee, so reuse
    raises instead of silently leaking.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    used: bool = False

    def consume(self) -> None:
        if self.used:
            raise TripleReuseError("Beaver triple reused")
        self.used = True


def generate_triple_batch(rng: np.random.Generator, count: int, shape,
                          mask_range: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dealer-side draw of ``count`` triples of the given shape.

    a and b sit on a lattice coarse enough that a*b is exact in float64
    (the masking identity needs c to equal the true product, not a rounding
    of it).
    """
    half_bits = int((53 - 2 * math.log2(max(mask_range, 1.0))) // 2)
    grid = 2.0 ** -max(0, half_bits)
    steps = max(1, int(mask_range / grid))
    a = rng.integers(-steps, steps + 1, size=(count, *shape)).astype(np.float64) * grid
    b = rng.integers(-steps, steps + 1, size=(count, *shape)).astype(np.float64) * grid
    return a, b, a * b


def beaver_combine(e: np.ndarray, f: np.ndarray, triple: Triple, *, lead: bool) -> np.ndarray:
    """Local completion of a secure product from the revealed maskings.

    ``e = x - a`` and ``f = y - b`` are public; exactly one party (the lead)
    folds in the ``e*f`` term so the slices sum to ``x*y``.
    """
    z = f * triple.a + e * triple.b + triple.c
    if lead:
        z = z + e * f
    return z


@dataclass
class Counters:
    """Per-session multiplication accounting.

    ``measured`` counts every interactive product exactly once, whatever the
    operand shape (a whole-vector product is one invocation). ``formula`` is
    bumped with the analytic per-phase amounts used by the complexity model,
    which ignores candidate squaring and leaf-solver products; both views are
    reported so they can be compared.
    """

    measured: int = 0
    by_phase: dict = field(default_factory=dict)
    formula: dict = field(default_factory=dict)

    def count_mul(self, phase: str = "other") -> None:
        self.measured += 1
        self.by_phase[phase] = self.by_phase.get(phase, 0) + 1

    def add_formula(self, phase: str, amount: int) -> None:
        self.formula[phase] = self.formula.get(phase, 0) + amount

    @property
    def formula_total(self) -> int:
        return sum(self.formula.values())

    def snapshot(self) -> dict:
        return {
            "measured": self.measured,
            "by_phase": dict(self.by_phase),
            "formula": dict(self.formula),
            "formula_total": self.formula_total,
        }
