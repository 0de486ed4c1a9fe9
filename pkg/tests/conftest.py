"""Shared test machinery.

``LocalSim`` is a transport-free reference of the share algebra: it holds
every party's slice in one process and executes products with dealer-drawn
triples. Protocol-level tests spin up real sessions via ``run_parties``.
"""

from __future__ import annotations

import numpy as np
import pytest

from ssxgb.sharing import (Triple, beaver_combine, generate_triple_batch,
                           make_shares, reconstruct)


def close(a, b, tol: float = 1e-9) -> bool:
    """1e-9 agreement, relative or absolute, whichever is looser.

    Purely absolute 1e-9 is not even representable for float64 values of
    magnitude 1e9 (ulp is ~1.2e-7 there), so law checks over wide operand
    ranges use this float-faithful reading.
    """
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def lattice_values(rng: np.random.Generator, size, scale: float = 1e3,
                   bits: int = 30) -> np.ndarray:
    """Random payloads exactly representable on the sharing lattice."""
    steps = int(scale * 2 ** bits)
    return rng.integers(-steps, steps + 1, size=size).astype(np.float64) / 2 ** bits


class LocalSim:
    """Single-process M-party share algebra with triple-based products."""

    def __init__(self, m: int, seed: int = 0, mask_range: float = 1e3):
        self.m = m
        self.rng = np.random.default_rng(seed)
        self.mask_range = mask_range
        self.mul_count = 0

    def share(self, x, owner: int = 1) -> list[np.ndarray]:
        return make_shares(x, self.m, self.rng, owner=owner,
                           mask_range=self.mask_range)

    def reconstruct(self, shares: list[np.ndarray]) -> np.ndarray:
        return reconstruct(shares)

    def add(self, xs, ys):
        return [x + y for x, y in zip(xs, ys)]

    def sub(self, xs, ys):
        return [x - y for x, y in zip(xs, ys)]

    def triples(self, shape) -> list[Triple]:
        a, b, c = generate_triple_batch(self.rng, 1, shape, self.mask_range)
        a_sh = make_shares(a[0], self.m, self.rng, mask_range=self.mask_range)
        b_sh = make_shares(b[0], self.m, self.rng, mask_range=self.mask_range)
        c_sh = make_shares(c[0], self.m, self.rng, mask_range=self.mask_range)
        return [Triple(a_sh[p], b_sh[p], c_sh[p]) for p in range(self.m)]

    def mul(self, xs, ys):
        triples = self.triples(np.shape(xs[0]))
        for t in triples:
            t.consume()
        e = reconstruct([x - t.a for x, t in zip(xs, triples)])
        f = reconstruct([y - t.b for y, t in zip(ys, triples)])
        self.mul_count += 1
        return [beaver_combine(e, f, t, lead=(p == 0))
                for p, t in enumerate(triples)]


@pytest.fixture
def sim():
    return LocalSim(3, seed=101)


def random_node(rng: np.random.Generator, n: int, features: int, buckets: int):
    """Random split-selection node with every bucket of every feature occupied.

    Columns take values 0..buckets-1 so equal-frequency thresholds are the
    bucket labels themselves and the test oracle bins exactly like the
    trainer.
    """
    assert n >= buckets
    g = rng.uniform(-1.0, 1.0, size=n)
    h = rng.uniform(0.05, 1.0, size=n)
    x = np.empty((n, features))
    for j in range(features):
        column = np.concatenate([np.arange(buckets),
                                 rng.integers(0, buckets, size=n - buckets)])
        x[:, j] = rng.permutation(column)
    return g, h, x


def plaintext_node_argmax(g, h, x, buckets: int, lam: float, gamma: float):
    """Independent split oracle: gains by direct division, linear scan,
    strict-greater updates (earliest candidate wins ties)."""
    b = g.sum()
    a = h.sum() + lam
    parent = b * b / a
    best_gain, best = None, None
    for j in range(x.shape[1]):
        order_vals = np.arange(buckets)
        gl = np.array([g[x[:, j] <= v].sum() for v in order_vals])
        hl = np.array([h[x[:, j] <= v].sum() for v in order_vals])
        gains = 0.5 * (gl * gl / (hl + lam)
                       + (b - gl) ** 2 / (h.sum() - hl + lam)
                       - parent) - gamma
        for k in range(buckets):
            if best_gain is None or gains[k] > best_gain:
                best_gain, best = gains[k], (j, k)
    return best[0], best[1], best_gain
