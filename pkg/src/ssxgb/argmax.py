"""Division-free split selection.

Comparing two split candidates reduces to the sign of a single fraction
obtained by clearing denominators, so no reciprocal is ever computed under
sharing. The fraction's denominator is restored at party 1 and its numerator
at party 2; neither alone reveals the loss reduction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .party import Party
from .sharing import Share
from .transport import Kind, Tag

ZERO_BAND = 1e-12


class CandidateRef(NamedTuple):
    feature: int  # global (permuted) feature id
    bucket: int   # 0-based bucket index


@dataclass
class CandidateStats:
    """Per-feature candidate statistics, all held as shares.

    ``gl[k]`` is the squared left gradient sum for a split after bucket k,
    ``hl[k]`` the lambda-padded left hessian sum; ``gr``/``hr`` analogously
    for the right side.
    """

    gl: Share
    gr: Share
    hl: Share
    hr: Share

    def at(self, k: int):
        return (self.gl.pick(k), self.gr.pick(k), self.hl.pick(k), self.hr.pick(k))


def ceil_log2(n: int) -> int:
    if n < 1:
        raise ValueError("n must be >= 1")
    return (n - 1).bit_length()


def securemax_mul_count(features: int, buckets: int) -> int:
    """Analytic products for one division-free argmax: 9J*ceil(log2 K) + 9*ceil(log2 J)."""
    return 9 * features * ceil_log2(buckets) + 9 * ceil_log2(features)


def div_argmax_mul_count(features: int, buckets: int) -> int:
    """Analytic products for the division-based argmax baseline: 82JK."""
    return 82 * features * buckets


def node_split_mul_count(features: int, buckets: int) -> int:
    """Analytic split-phase products for one internal node.

    Bucket aggregation (2J), argmax, gain-sign fraction (+8) and child
    preparation (+6).
    """
    return 2 * features + securemax_mul_count(features, buckets) + 8 + 6


def pipeline_mul_count(trees: int, depth: int, features: int, buckets: int,
                       parties: int, instances: int) -> int:
    """Whole-training analytic model: complete trees plus per-instance
    prediction updates after all but the last tree."""
    per_node = node_split_mul_count(features, buckets)
    return trees * (2 ** depth - 1) * per_node + parties * instances * (trees - 1)


def sign_protocol(party: Party, num: Share, den: Share) -> int:
    """Two-restorer sign determination.

    Party 1 restores the denominator, party 2 the numerator; party 2 votes
    its sign bit to party 1, which broadcasts the product sign. Values inside
    the zero band count as sign 0 ("not greater").
    """
    den_total = party.reconstruct_at(den, 1, label="sign.den")
    num_total = party.reconstruct_at(num, 2, label="sign.num")

    num_sign = None
    if party.id == 2:
        num_sign = _banded_sign(num_total)
        party.ep.send(1, Tag.SIGN_VOTE, np.asarray(float(num_sign)),
                      kind=Kind.REPORT, label="sign.num_sign")
    if party.id == 1:
        num_sign = int(party.ep.recv(2, Tag.SIGN_VOTE).payload)
        den_sign = _banded_sign(den_total)
        verdict = 0 if (num_sign == 0 or den_sign == 0) else num_sign * den_sign
    else:
        verdict = None
    verdict = party.publish(verdict, 1, tag=Tag.SIGN_VERDICT, label="sign.verdict")
    return int(verdict)


def _banded_sign(value: float) -> int:
    if abs(value) < ZERO_BAND:
        return 0
    return 1 if value > 0 else -1


def diff_numerator_denominator(party: Party, c1, c2, phase: str = "argmax_compare"):
    """Shares of the cleared-denominator difference between two candidates.

    ``c1``/``c2`` are (gl, gr, hl, hr) scalar-share tuples. Exactly nine
    secure products: four cross terms, two denominator-pair products, two
    scalings, one full denominator.
    """
    gl1, gr1, hl1, hr1 = c1
    gl2, gr2, hl2, hr2 = c2
    with party.phase(phase):
        u1 = party.mul(gl1, hl2)
        u2 = party.mul(gl2, hl1)
        u3 = party.mul(gr1, hr2)
        u4 = party.mul(gr2, hr1)
        pl = party.mul(hl1, hl2)
        pr = party.mul(hr1, hr2)
        t1 = party.mul(pr, u1 - u2)
        t2 = party.mul(pl, u3 - u4)
        den = party.mul(pl, pr)
    return t1 + t2, den


def best_gain_sign(party: Party, c_best, loss_n: Share, loss_d: Share,
                   two_gamma: Share) -> int:
    """Sign of the winning candidate's loss reduction as one fraction.

    Clearing Eq.-style denominators of gain = (GL/HL + GR/HR - Gn/Hn)/2 - g
    gives numerator GL*HR*Hn + GR*HL*Hn - Gn*HL*HR - 2g*HL*HR*Hn over
    denominator HL*HR*Hn (the positive factor 2 drops out). Exactly eight
    secure products.
    """
    gl, gr, hl, hr = c_best
    with party.phase("gain_sign"):
        t_lr = party.mul(hl, hr)
        t_rn = party.mul(hr, loss_d)
        t_ln = party.mul(hl, loss_d)
        u1 = party.mul(gl, t_rn)
        u2 = party.mul(gr, t_ln)
        u3 = party.mul(loss_n, t_lr)
        den = party.mul(t_lr, loss_d)
        u4 = party.mul(two_gamma, den)
    num = u1 + u2 - u3 - u4
    return sign_protocol(party, num, den)


def _knockout(party: Party, refs: list, lookup) -> object:
    """Single-elimination max; ties keep the earlier (lower-index) entrant."""
    while len(refs) > 1:
        nxt = []
        for i in range(0, len(refs) - 1, 2):
            first, second = refs[i], refs[i + 1]
            num, den = diff_numerator_denominator(party, lookup(first), lookup(second))
            verdict = sign_protocol(party, num, den)
            nxt.append(first if verdict >= 0 else second)
        if len(refs) % 2:
            nxt.append(refs[-1])
        refs = nxt
    return refs[0]


def secure_argmax(party: Party, stats: dict[int, CandidateStats],
                  candidate_features: list[int], loss_n: Share, loss_d: Share,
                  two_gamma: Share) -> tuple[int, int, int]:
    """Tournament argmax over (feature, bucket) candidates plus gain-sign test.

    Returns (feature, bucket, gain_sign); a non-positive gain sign means the
    caller should emit a leaf.
    """
    if not candidate_features:
        raise ValueError("empty candidate set")

    def lookup(ref: CandidateRef):
        return stats[ref.feature].at(ref.bucket)

    champions = []
    for j in candidate_features:
        k_count = stats[j].gl.values.shape[0]
        refs = [CandidateRef(j, k) for k in range(k_count)]
        champions.append(_knockout(party, refs, lookup))
    best = _knockout(party, champions, lookup)
    gain = best_gain_sign(party, lookup(best), loss_n, loss_d, two_gamma)
    return best.feature, best.bucket, gain
