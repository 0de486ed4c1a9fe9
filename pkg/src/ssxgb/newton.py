"""Secure reciprocal by Newton iteration (division baseline).

Kept off the default training path: it exists to price the division-based
pipeline (2n+1 products per division) and to cross-check the descent-based
leaf solver. Initialization uses order-of-magnitude reports, which bound
d * x0 inside (0, 2) whenever fewer than 20 parties participate.
"""

from __future__ import annotations

import math

import numpy as np

from .party import Party
from .sharing import Share
from .transport import Kind, Tag

DEFAULT_ITERATIONS = 20


def magnitude_of(value: float) -> int:
    """Order of magnitude: value = d' * 10^mu with d' in (0.1, 1]."""
    if value == 0:
        raise ValueError("magnitude of zero share is undefined")
    return math.floor(math.log10(abs(value))) + 1


def init_reciprocal(party: Party, d: Share) -> Share:
    """Magnitude-report initialization for the reciprocal of a shared d > 0.

    Party 1 collects every slice's order of magnitude and publishes
    x0 = 10^-(mu_max + 1), split equally across parties. Since
    d <= M * max|slice| < M * 10^mu_max, the product d*x0 stays below M/10.
    """
    mu = magnitude_of(float(d.values))
    if party.id == 1:
        mus = [mu]
        for src in party.others():
            mus.append(int(party.ep.recv(src, Tag.MAGNITUDE_REPORT).payload))
        plan = np.asarray(10.0 ** (-(max(mus) + 1)))
    else:
        party.ep.send(1, Tag.MAGNITUDE_REPORT, np.asarray(float(mu)),
                      kind=Kind.REPORT, label="newton.magnitude")
        plan = None
    x0 = float(party.publish(plan, 1, tag=Tag.STEP_SIZE, label="newton.x0"))
    return Share(np.asarray(x0 / party.m), party.id)


def newton_reciprocal(party: Party, d: Share, iterations: int = DEFAULT_ITERATIONS) -> Share:
    """n iterations of x <- x * (2 - d*x) on shares; 2 products per iteration."""
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    x = init_reciprocal(party, d)
    two_over_m = party.const_share(2.0)
    for _ in range(iterations):
        dx = party.mul(d, x, phase="newton")
        x = party.mul(x, two_over_m - dx, phase="newton")
    return x


def newton_divide(party: Party, numerator: Share, denominator: Share,
                  iterations: int = DEFAULT_ITERATIONS) -> Share:
    """numerator / denominator via reciprocal; costs exactly 2n+1 products."""
    recip = newton_reciprocal(party, denominator, iterations)
    return party.mul(numerator, recip, phase="newton")


def newton_leaf_weight(party: Party, g_sum: Share, h_sum: Share, *, lam: float,
                       iterations: int = DEFAULT_ITERATIONS) -> Share:
    """Division-based leaf weight -b/a, used to cross-check the descent solver."""
    a = h_sum + party.const_share(lam)
    return newton_divide(party, -g_sum, a, iterations)
