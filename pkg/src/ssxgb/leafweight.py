"""Leaf weight as distributed minimization of a strongly convex quadratic.

Instead of dividing shared sums, each party perturbs its slice of the
curvature term; party 1 only ever sees the perturbed total, from which it
derives a safe step size (never larger than the exact one) and an iteration
count guaranteeing convergence to the closed-form optimum.
"""

from __future__ import annotations

import math

import numpy as np

from .party import Party
from .sharing import Share
from .transport import Kind, Tag


def iteration_bound(v: float, mu: float, ratio: float) -> int:
    """Descent steps guaranteeing |w_t - w*| <= eps given v = (a + sum sigma)/(mu*lam).

    ``ratio`` stands for a*eps/|b|; when it is >= 1 a single step suffices.
    For v <= 1 the contraction factor is bounded by (v*mu - 1)/(v*mu); for
    v > 1 the bound 1/v also applies and the smaller count wins.
    """
    if mu <= 1:
        raise ValueError("mu must be > 1")
    if ratio <= 0:
        raise ValueError("ratio must be > 0")
    if v * mu <= 1:
        raise ValueError("perturbed curvature below its floor: v*mu must exceed 1")
    if ratio >= 1:
        return 1
    log_ratio = math.log(ratio)
    bounds = [math.ceil(log_ratio / math.log((v * mu - 1) / (v * mu)))]
    if v > 1:
        bounds.append(math.ceil(log_ratio / math.log(1 / v)))
    return max(1, min(bounds))


def descent_error(r: float, t: int, b_over_a: float) -> float:
    """Closed-form residual |w_t + b/a| = ((r-1)/r)^t * |b/a| with eta = 1/(r*a)."""
    return abs(b_over_a) * ((r - 1) / r) ** t


def secure_leaf_weight(party: Party, g_sum: Share, h_sum: Share, *, lam: float,
                       mu: float, ratio_floor: float,
                       exact_step: bool = False) -> Share:
    """Solve for the leaf weight; returns this party's share of it.

    Each party adds a positive perturbation to its curvature slice and sends
    the sum to party 1, which forms the step size and broadcasts it together
    with the iteration count. ``exact_step`` (test only) skips perturbation,
    revealing the true curvature and converging in a single step.
    """
    a = h_sum + party.const_share(lam)
    b = g_sum

    if exact_step:
        a_total = party.reconstruct_at(a, 1, label="leaf.exact_a",
                                       tag=Tag.MAGNITUDE_REPORT)
        if party.id == 1:
            plan = np.array([1.0 / float(a_total), 1.0])
        else:
            plan = None
        plan = party.publish(plan, 1, tag=Tag.STEP_SIZE, label="leaf.step")
    else:
        sigma = 0.0
        while sigma <= 0.0:
            sigma = party.rng.uniform(0.0, mu * lam / party.m)
        report = Share(a.values + sigma, party.id)
        total = party.reconstruct_at(report, 1, label="leaf.perturbed_a",
                                     tag=Tag.MAGNITUDE_REPORT)
        if party.id == 1:
            perturbed = float(total)
            v = perturbed / (mu * lam)
            t = iteration_bound(v, mu, ratio_floor)
            plan = np.array([1.0 / perturbed, float(t)])
        else:
            plan = None
        plan = party.publish(plan, 1, tag=Tag.STEP_SIZE, label="leaf.step")

    eta, steps = float(plan[0]), int(plan[1])
    w = party.zeros(np.shape(b.values))
    for _ in range(steps):
        aw = party.mul(a, w, phase="leaf_weight")
        w = w - (aw + b).scale(eta)
    return w
