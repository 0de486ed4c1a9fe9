"""Message layer: framing, delivery, lockstep guards, transcripts, audit."""

import threading

import numpy as np
import pytest

from ssxgb.party import run_parties
from ssxgb.transport import (DEFAULT_RESTORATION_POLICY, InProcHub, Kind,
                             Message, ProtocolError, SessionAbort, Tag,
                             Transcript, TranscriptEntry, audit_transcripts,
                             decode_message, encode_message)

SID = b"\x01" * 8


def make_hub_endpoints(m=3, **kw):
    hub = InProcHub(m)
    return hub, {p: hub.endpoint(p, SID, **kw) for p in range(0, m + 1)}


# -- codec -------------------------------------------------------------

@pytest.mark.parametrize("payload", [
    np.asarray(3.5),
    np.array([1.0, -2.0, 3.25]),
    np.arange(12, dtype=np.float64).reshape(3, 4),
    np.empty((0, 2)),
    b"control-bytes",
])
def test_codec_roundtrip(payload):
    msg = Message(SID, 7, 1, 2, int(Tag.SHARE_DIST), int(Kind.OWN_SHARE), "lbl", payload)
    frame = encode_message(msg)
    got = decode_message(frame[4:])
    assert (got.session, got.round, got.src, got.dst) == (SID, 7, 1, 2)
    assert got.label == "lbl"
    if isinstance(payload, bytes):
        assert got.payload == payload
    else:
        assert got.payload.shape == payload.shape
        np.testing.assert_array_equal(got.payload, payload)


# -- delivery ----------------------------------------------------------

def test_send_recv_identical_payload():
    _, eps = make_hub_endpoints()
    payload = np.array([1.5, 2.5])
    eps[1].send(2, Tag.SHARE_DIST, payload, kind=Kind.OWN_SHARE, label="x")
    msg = eps[2].recv(1, Tag.SHARE_DIST)
    np.testing.assert_array_equal(msg.payload, payload)


def test_broadcast_reaches_all_but_self():
    _, eps = make_hub_endpoints(4)
    eps[1].broadcast(Tag.SIGN_VERDICT, np.asarray(1.0), kind=Kind.PUBLIC)
    for p in (2, 3, 4):
        assert eps[p].recv(1, Tag.SIGN_VERDICT).payload == 1.0
    # coordinator gets nothing
    eps[0].timeout = 0.05
    with pytest.raises(SessionAbort):
        eps[0].recv(1, Tag.SIGN_VERDICT)


def test_lockstep_tag_mismatch_raises():
    _, eps = make_hub_endpoints()
    eps[1].send(2, Tag.SHARE_DIST, np.asarray(1.0), kind=Kind.OWN_SHARE)
    with pytest.raises(ProtocolError, match="lockstep"):
        eps[2].recv(1, Tag.MUL_EF)


def test_recv_timeout_aborts():
    _, eps = make_hub_endpoints(timeout=0.05)
    with pytest.raises(SessionAbort, match="timed out"):
        eps[1].recv(2, Tag.SHARE_DIST)


def test_fifo_rounds_per_pair():
    _, eps = make_hub_endpoints()
    for i in range(3):
        eps[1].send(2, Tag.MUL_EF, np.asarray(float(i)), kind=Kind.CONTRIB)
    for i in range(3):
        msg = eps[2].recv(1, Tag.MUL_EF)
        assert msg.round == i and msg.payload == float(i)


# -- protocol sessions -------------------------------------------------

def _echo_program(party):
    x = party.shr(np.arange(4, dtype=float) if party.id == 1 else None, owner=1)
    y = party.shr(np.full(4, 2.0) if party.id == 2 else None, owner=2)
    z = party.mul(x, y)
    return party.reconstruct_at(z, 1, label="predict.yhat")


def test_session_results_and_counters():
    run = run_parties(3, _echo_program, seed=5)
    np.testing.assert_allclose(run.results[1], np.arange(4) * 2.0, atol=1e-9)
    assert all(run.counters[p].measured == 1 for p in (1, 2, 3))


def test_transcript_deterministic_replay():
    r1 = run_parties(3, _echo_program, seed=5, record_transcripts=True)
    r2 = run_parties(3, _echo_program, seed=5, record_transcripts=True)
    for p in range(0, 4):
        assert r1.transcripts[p].digest == r2.transcripts[p].digest
        assert len(r1.transcripts[p].entries) == len(r2.transcripts[p].entries)
    r3 = run_parties(3, _echo_program, seed=6, record_transcripts=True)
    assert r3.transcripts[1].digest != r1.transcripts[1].digest


def test_tcp_matches_inproc_bit_for_bit():
    r1 = run_parties(3, _echo_program, seed=5, record_transcripts=True)
    r2 = run_parties(3, _echo_program, seed=5, record_transcripts=True, backend="tcp")
    for p in range(0, 4):
        assert r1.transcripts[p].digest == r2.transcripts[p].digest


def test_two_tcp_sessions_interleaved_no_cross_delivery():
    results = {}

    def runner(key, seed):
        run = run_parties(2, _echo_program, seed=seed, backend="tcp")
        results[key] = run.results[1]

    threads = [threading.Thread(target=runner, args=("a", 11)),
               threading.Thread(target=runner, args=("b", 22))]
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout=60)
    np.testing.assert_allclose(results["a"], np.arange(4) * 2.0, atol=1e-9)
    np.testing.assert_allclose(results["b"], np.arange(4) * 2.0, atol=1e-9)


def test_party_failure_propagates_without_hang():
    def bad_program(party):
        if party.id == 2:
            raise RuntimeError("injected fault")
        return _echo_program(party)

    with pytest.raises(RuntimeError, match="injected fault"):
        run_parties(3, bad_program, seed=5, timeout=5.0)


# -- audit -------------------------------------------------------------

def _fake_transcript(party, events):
    t = Transcript(party)
    for src, tag, kind, label in events:
        t.entries.append(TranscriptEntry("recv", src, party, int(tag), int(kind),
                                         label, 0, ()))
    return t


def test_audit_clean_protocol_run():
    run = run_parties(3, _echo_program, seed=5, record_transcripts=True)
    result = audit_transcripts({p: t for p, t in run.transcripts.items()
                                if t is not None}, 3)
    assert result.violations == []
    assert result.restorations == {"mul.e": [1], "mul.f": [1], "predict.yhat": [1]}


def test_audit_flags_unauthorized_restoration():
    # party 3 receives sign.den slices from everyone else: it can restore
    # the denominator even though only party 1 may.
    transcripts = {
        3: _fake_transcript(3, [(1, Tag.SHARE_DIST, Kind.CONTRIB, "sign.den"),
                                (2, Tag.SHARE_DIST, Kind.CONTRIB, "sign.den"),
                                (4, Tag.SHARE_DIST, Kind.CONTRIB, "sign.den")]),
    }
    result = audit_transcripts(transcripts, 4)
    assert len(result.violations) == 1
    assert result.violations[0].party == 3
    assert result.violations[0].label == "sign.den"


def test_audit_partial_share_sets_are_not_restorations():
    transcripts = {
        3: _fake_transcript(3, [(1, Tag.SHARE_DIST, Kind.CONTRIB, "sign.den"),
                                (2, Tag.SHARE_DIST, Kind.CONTRIB, "sign.den")]),
    }
    assert audit_transcripts(transcripts, 4).violations == []


def test_audit_own_share_deliveries_never_complete():
    # M=2: a single OWN_SHARE delivery is the whole "rest of the world" but
    # hands over one slice only.
    transcripts = {
        2: _fake_transcript(2, [(1, Tag.SHARE_DIST, Kind.OWN_SHARE, "grad")] * 5),
    }
    assert audit_transcripts(transcripts, 2).violations == []


def test_audit_coordinator_must_not_receive_shares():
    transcripts = {
        0: _fake_transcript(0, [(1, Tag.SHARE_DIST, Kind.CONTRIB, "mul.e")]),
    }
    result = audit_transcripts(transcripts, 3)
    assert len(result.violations) == 1


def test_audit_report_to_wrong_party_flagged():
    transcripts = {
        3: _fake_transcript(3, [(2, Tag.SIGN_VOTE, Kind.REPORT, "sign.num_sign")]),
    }
    result = audit_transcripts(transcripts, 4)
    assert len(result.violations) == 1
    assert DEFAULT_RESTORATION_POLICY["sign.num_sign"] == 1
