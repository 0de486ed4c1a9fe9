"""Share algebra: round trips, arithmetic laws, triples, counters."""

import numpy as np
import pytest

from conftest import LocalSim, close, lattice_values
from ssxgb.sharing import (Counters, Share, ShareError, Triple,
                           TripleReuseError, beaver_combine,
                           generate_triple_batch, make_shares, reconstruct)


def test_roundtrip_scalar_exact():
    rng = np.random.default_rng(0)
    shares = make_shares(5.0, 3, rng)
    assert reconstruct(shares) == 5.0


def test_zero_two_parties_is_negated_mask():
    rng = np.random.default_rng(1)
    shares = make_shares(0.0, 2, rng)
    assert shares[0] == -shares[1]
    assert reconstruct(shares) == 0.0


def test_vector_roundtrip_elementwise():
    rng = np.random.default_rng(2)
    x = np.array([1.0, 2.0, 3.0])
    shares = make_shares(x, 4, rng)
    assert len(shares) == 4
    np.testing.assert_array_equal(reconstruct(shares), x)


def test_roundtrip_exact_on_lattice():
    """Bit-exact round trip for any payload the share lattice can carry."""
    rng = np.random.default_rng(3)
    for _ in range(200):
        x = lattice_values(rng, size=int(rng.integers(1, 6)))
        m = int(rng.integers(2, 6))
        owner = int(rng.integers(1, m + 1))
        np.testing.assert_array_equal(reconstruct(make_shares(x, m, rng, owner=owner)), x)


def test_roundtrip_continuous_payloads_tight():
    """Full-mantissa payloads round-trip within lattice resolution (<< 1e-9)."""
    rng = np.random.default_rng(30)
    for _ in range(200):
        x = rng.uniform(-1e3, 1e3, size=4)
        got = reconstruct(make_shares(x, 3, rng))
        np.testing.assert_allclose(got, x, atol=1e-9, rtol=0)


def test_shr_requires_two_parties():
    with pytest.raises(ShareError):
        make_shares(1.0, 1, np.random.default_rng(0))


def test_reconstruct_rejects_incomplete_and_mismatched():
    rng = np.random.default_rng(4)
    shares = make_shares(np.ones(3), 3, rng)
    with pytest.raises(ShareError):
        reconstruct([])
    with pytest.raises(ShareError):
        reconstruct([shares[0], None, shares[2]])
    with pytest.raises(ShareError):
        reconstruct([shares[0], shares[1], np.ones(4)])


def test_add_sub(sim):
    xs = sim.share(3.0)
    ys = sim.share(4.0)
    assert sim.reconstruct(sim.add(xs, ys)) == pytest.approx(7.0, abs=1e-12)
    zs = sim.sub(xs, xs)
    assert sim.reconstruct(zs) == pytest.approx(0.0, abs=1e-12)


def test_add_matches_plaintext_oracle():
    sim = LocalSim(4, seed=5)
    rng = np.random.default_rng(6)
    for _ in range(100):
        x = rng.uniform(-10, 10, size=5)
        y = rng.uniform(-10, 10, size=5)
        got = sim.reconstruct(sim.add(sim.share(x), sim.share(y)))
        np.testing.assert_allclose(got, x + y, atol=1e-9)


def test_mul_basics(sim):
    assert sim.reconstruct(sim.mul(sim.share(3.0), sim.share(4.0))) == pytest.approx(12.0, abs=1e-9)
    y = sim.share(123.456)
    assert sim.reconstruct(sim.mul(sim.share(0.0), y)) == pytest.approx(0.0, abs=1e-9)


def test_mul_vectors_against_plaintext():
    sim = LocalSim(3, seed=7)
    rng = np.random.default_rng(8)
    for _ in range(100):
        x = rng.uniform(-10, 10, size=8)
        y = rng.uniform(-10, 10, size=8)
        got = sim.reconstruct(sim.mul(sim.share(x), sim.share(y)))
        np.testing.assert_allclose(got, x * y, atol=1e-9)


def test_triple_batch_correctness():
    rng = np.random.default_rng(9)
    a, b, c = generate_triple_batch(rng, 1000, (), 1e3)
    np.testing.assert_array_equal(c, a * b)
    a, b, c = generate_triple_batch(rng, 4, (16,), 1e3)
    np.testing.assert_array_equal(c, a * b)


def test_triple_reuse_rejected():
    t = Triple(np.asarray(1.0), np.asarray(2.0), np.asarray(2.0))
    t.consume()
    with pytest.raises(TripleReuseError):
        t.consume()


def test_share_ops_guard_owner_and_shape():
    a = Share(np.ones(3), 1)
    with pytest.raises(ShareError):
        _ = a + Share(np.ones(3), 2)
    with pytest.raises(ShareError):
        _ = a + Share(np.ones(4), 1)


def test_arithmetic_laws():
    """Commutativity, associativity, distributivity on reconstructed values.

    1e-9 relative-or-absolute: chained products reach 1e9 magnitudes where
    float64 itself cannot express 1e-9 absolute agreement.
    """
    sim = LocalSim(3, seed=10)
    rng = np.random.default_rng(11)
    for _ in range(100):
        x, y, z = rng.uniform(-1e3, 1e3, size=3)
        xs, ys, zs = sim.share(x), sim.share(y), sim.share(z)
        assert close(sim.reconstruct(sim.mul(xs, ys)),
                     sim.reconstruct(sim.mul(ys, xs)))
        left = sim.mul(sim.mul(xs, ys), zs)
        right = sim.mul(xs, sim.mul(ys, zs))
        assert close(sim.reconstruct(left), sim.reconstruct(right))
        dist = sim.mul(xs, sim.add(ys, zs))
        split = sim.add(sim.mul(xs, ys), sim.mul(xs, zs))
        assert close(sim.reconstruct(dist), sim.reconstruct(split))


def test_straight_line_program_losslessness():
    """Random ADD/SUB/MUL programs agree with their plaintext evaluation."""
    sim = LocalSim(3, seed=12)
    rng = np.random.default_rng(13)
    for _ in range(50):
        plain = list(rng.uniform(-10, 10, size=3))
        shared = [sim.share(v) for v in plain]
        for _ in range(rng.integers(1, 9)):
            op = rng.integers(0, 3)
            i, j = rng.integers(0, len(plain), size=2)
            if op == 0:
                plain.append(plain[i] + plain[j])
                shared.append(sim.add(shared[i], shared[j]))
            elif op == 1:
                plain.append(plain[i] - plain[j])
                shared.append(sim.sub(shared[i], shared[j]))
            else:
                plain.append(plain[i] * plain[j])
                shared.append(sim.mul(shared[i], shared[j]))
        assert close(sim.reconstruct(shared[-1]), plain[-1])


def test_masks_independent_of_plaintext():
    """Same seed, different secrets: every non-owner slice is identical."""
    sh_a = make_shares(0.0, 4, np.random.default_rng(99))
    sh_b = make_shares(1e6, 4, np.random.default_rng(99))
    for p in range(1, 4):  # owner is party 1 at index 0
        assert sh_a[p] == sh_b[p]
    assert sh_a[0] != sh_b[0]


def test_beaver_combine_identity():
    rng = np.random.default_rng(14)
    x, y = 3.0, 4.5
    a, b, c = 1.25, -2.0, -2.5
    z = beaver_combine(x - a, y - b, Triple(np.asarray(a), np.asarray(b), np.asarray(c)),
                       lead=True)
    assert z == pytest.approx(x * y, abs=1e-12)


def test_counter_tracks_muls_exactly():
    sim = LocalSim(2, seed=15)
    for _ in range(7):
        sim.mul(sim.share(1.0), sim.share(2.0))
    assert sim.mul_count == 7
    c = Counters()
    for _ in range(3):
        c.count_mul("x")
    c.add_formula("split_phase", 10)
    snap = c.snapshot()
    assert snap["measured"] == 3 and snap["by_phase"] == {"x": 3}
    assert snap["formula_total"] == 10
