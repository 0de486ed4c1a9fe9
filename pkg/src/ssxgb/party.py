"""Party-side protocol runtime.

Every data holder runs the same program; collectives (share distribution,
restoration, secure products) encode the full message choreography so the
calling code reads like the protocol description. The coordinator only deals
Beaver triples and the feature-index permutation; it never receives
computation shares.
"""

from __future__ import annotations

import json
import threading
from collections import deque
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .sharing import (Counters, Share, ShareError, Triple, beaver_combine,
                      generate_triple_batch, make_shares)
from .transport import (Endpoint, InProcHub, Kind, SessionAbort, Tag,
                        Transcript, make_tcp_listeners, TcpEndpoint)

COORDINATOR = 0


class Party:
    """One data holder's view of a protocol session."""

    def __init__(self, pid: int, m: int, endpoint: Endpoint, rng: np.random.Generator,
                 *, mask_range: float = 1e3, triple_batch: int = 32,
                 counters: Counters | None = None):
        if not 1 <= pid <= m:
            raise ShareError(f"party id {pid} out of range 1..{m}")
        self.id = pid
        self.m = m
        self.ep = endpoint
        self.rng = rng
        self.mask_range = mask_range
        self.triple_batch = triple_batch
        self.counters = counters if counters is not None else Counters()
        self._triples: dict[tuple, deque] = {}
        self._phase = "other"

    @property
    def is_active(self) -> bool:
        return self.id == 1

    def others(self):
        return (p for p in range(1, self.m + 1) if p != self.id)

    @contextmanager
    def phase(self, name: str):
        prev, self._phase = self._phase, name
        try:
            yield
        finally:
            self._phase = prev

    # -- local constructors ---------------------------------------------
    def zeros(self, shape=()) -> Share:
        return Share(np.zeros(shape), self.id)

    def const_share(self, value: float, shape=()) -> Share:
        """Public constant held as an equal split (value / M each)."""
        return Share(np.full(shape, value / self.m), self.id)

    # -- collectives -----------------------------------------------------
    def shr(self, x, owner: int, *, tag: Tag = Tag.SHARE_DIST, label: str = "") -> Share:
        """Collective share distribution; ``x`` is read on the owner only."""
        if self.id == owner:
            slices = make_shares(x, self.m, self.rng, owner=owner,
                                 mask_range=self.mask_range)
            for dst in self.others():
                self.ep.send(dst, tag, slices[dst - 1], kind=Kind.OWN_SHARE, label=label)
            return Share(slices[self.id - 1], self.id)
        msg = self.ep.recv(owner, tag)
        return Share(msg.payload, self.id)

    def reconstruct_at(self, share: Share, at: int, *, label: str,
                       tag: Tag = Tag.SHARE_DIST, kind: Kind = Kind.CONTRIB):
        """Restore the plaintext at one designated party; others get None.

        Summation runs in ascending party order so restores are reproducible.
        """
        if self.id != at:
            self.ep.send(at, tag, share.values, kind=kind, label=label)
            return None
        slices = {self.id: share.values}
        for src in self.others():
            slices[src] = self.ep.recv(src, tag).payload
        total = np.zeros_like(share.values)
        for pid in sorted(slices):
            total = total + slices[pid]
        return total

    def publish(self, value, src: int, *, tag: Tag, label: str = "") -> np.ndarray:
        """One party broadcasts a public value; everyone returns it."""
        if self.id == src:
            value = np.asarray(value, dtype=np.float64)
            self.ep.broadcast(tag, value, kind=Kind.PUBLIC, label=label)
            return value
        return self.ep.recv(src, tag).payload

    def mul(self, x: Share, y: Share, phase: str | None = None) -> Share:
        """Secure elementwise product via a fresh Beaver triple.

        Counts once per invocation regardless of operand shape.
        """
        if x.values.shape != y.values.shape:
            raise ShareError(f"mul shape mismatch {x.values.shape} vs {y.values.shape}")
        triple = self._take_triple(x.values.shape)
        triple.consume()
        e_slice = x.values - triple.a
        f_slice = y.values - triple.b
        e = self.reconstruct_at(Share(e_slice, self.id), 1, label="mul.e", tag=Tag.MUL_EF)
        f = self.reconstruct_at(Share(f_slice, self.id), 1, label="mul.f", tag=Tag.MUL_EF)
        if self.id == 1:
            ef = np.stack([e, f])
            self.ep.broadcast(Tag.MUL_EF_BCAST, ef, kind=Kind.PUBLIC, label="mul.ef")
        else:
            ef = self.ep.recv(1, Tag.MUL_EF_BCAST).payload
            e, f = ef[0], ef[1]
        z = beaver_combine(e, f, triple, lead=(self.id == 1))
        self.counters.count_mul(phase or self._phase)
        return Share(z, self.id)

    # -- triples ----------------------------------------------------------
    def _take_triple(self, shape: tuple) -> Triple:
        buf = self._triples.setdefault(shape, deque())
        if not buf:
            self._request_triples(shape)
        return buf.popleft()

    def _request_triples(self, shape: tuple) -> None:
        count = self.triple_batch
        if self.id == 1:
            req = json.dumps({"op": "triples", "shape": list(shape),
                              "count": count}).encode()
            self.ep.send(COORDINATOR, Tag.CONTROL, req, kind=Kind.CONTROL, label="triple_req")
        msg = self.ep.recv(COORDINATOR, Tag.SHARE_DIST)
        stacked = msg.payload  # (3, count, *shape)
        buf = self._triples[shape]
        for i in range(stacked.shape[1]):
            buf.append(Triple(stacked[0, i], stacked[1, i], stacked[2, i]))

    def shutdown_coordinator(self) -> None:
        if self.id == 1:
            req = json.dumps({"op": "shutdown"}).encode()
            self.ep.send(COORDINATOR, Tag.CONTROL, req, kind=Kind.CONTROL, label="shutdown")


def coordinator_loop(ep: Endpoint, m: int, rng: np.random.Generator, *,
                     mask_range: float = 1e3, feature_count: int | None = None) -> None:
    """Deal the feature permutation (optional) and triples until shutdown."""
    if feature_count is not None:
        perm = rng.permutation(feature_count).astype(np.float64)
        for dst in range(1, m + 1):
            ep.send(dst, Tag.CONTROL, perm, kind=Kind.PUBLIC, label="feature_perm")
    while True:
        msg = ep.recv(1, Tag.CONTROL)
        body = json.loads(bytes(msg.payload))
        if body["op"] == "shutdown":
            return
        if body["op"] != "triples":
            raise SessionAbort(f"coordinator got unknown op {body['op']!r}")
        shape = tuple(body["shape"])
        count = int(body["count"])
        a, b, c = generate_triple_batch(rng, count, shape, mask_range)
        slices = [make_shares(arr, m, rng, owner=m, mask_range=mask_range)
                  for arr in (a, b, c)]
        for dst in range(1, m + 1):
            stacked = np.stack([slices[0][dst - 1], slices[1][dst - 1], slices[2][dst - 1]])
            ep.send(dst, Tag.SHARE_DIST, stacked, kind=Kind.OWN_SHARE, label="triple")


def receive_feature_permutation(party: Party) -> np.ndarray:
    msg = party.ep.recv(COORDINATOR, Tag.CONTROL)
    return msg.payload.astype(np.int64)


@dataclass
class ProtocolRun:
    results: dict[int, object]
    transcripts: dict[int, Transcript | None]
    counters: dict[int, Counters]
    session_id: bytes
    errors: dict[int, BaseException] = field(default_factory=dict)


def _session_id(seed: int, m: int, feature_count: int | None) -> bytes:
    import hashlib
    blob = f"ssxgb:{seed}:{m}:{feature_count}".encode()
    return hashlib.sha256(blob).digest()[:8]


def party_rng(seed: int, pid: int) -> np.random.Generator:
    return np.random.default_rng([seed, pid])


def run_parties(m: int, program, *, seed: int = 0, backend: str = "inproc",
                mask_range: float = 1e3, triple_batch: int = 32,
                feature_count: int | None = None, record_transcripts: bool = False,
                timeout: float = 30.0) -> ProtocolRun:
    """Run one lockstep protocol session across M party threads plus coordinator.

    ``program`` is a callable invoked as ``program(party)`` on every party, or
    a dict mapping party id to callables. All randomness derives from
    ``seed`` and the party index, so a repeated run replays byte-identical
    transcripts.
    """
    programs = program if isinstance(program, dict) else {p: program for p in range(1, m + 1)}
    sid = _session_id(seed, m, feature_count)

    endpoints: dict[int, Endpoint] = {}
    hub = None
    listeners = None
    if backend == "inproc":
        hub = InProcHub(m)
        for p in range(0, m + 1):
            endpoints[p] = hub.endpoint(p, sid, record_transcript=record_transcripts,
                                        timeout=timeout)
    elif backend == "tcp":
        listeners, book = make_tcp_listeners(m)
        for p in range(0, m + 1):
            endpoints[p] = TcpEndpoint(p, m, sid, book, listeners[p],
                                       record_transcript=record_transcripts,
                                       timeout=timeout)
    else:
        raise ValueError(f"unknown backend {backend!r}")

    results: dict[int, object] = {}
    errors: dict[int, BaseException] = {}
    counters = {p: Counters() for p in range(1, m + 1)}
    lock = threading.Lock()

    def poison_everyone(exc: Exception) -> None:
        if hub is not None:
            hub.poison_all()
        for ep in endpoints.values():
            ep.poison(exc)

    def party_main(pid: int) -> None:
        party = Party(pid, m, endpoints[pid], party_rng(seed, pid),
                      mask_range=mask_range, triple_batch=triple_batch,
                      counters=counters[pid])
        try:
            res = programs[pid](party)
            party.shutdown_coordinator()
            with lock:
                results[pid] = res
        except BaseException as exc:  # propagate to peers, re-raised by runner
            with lock:
                errors[pid] = exc
            poison_everyone(SessionAbort(f"party {pid} failed: {exc}"))

    def coordinator_main() -> None:
        try:
            coordinator_loop(endpoints[0], m, party_rng(seed, COORDINATOR),
                             mask_range=mask_range, feature_count=feature_count)
        except BaseException as exc:
            with lock:
                errors[COORDINATOR] = exc
            poison_everyone(SessionAbort(f"coordinator failed: {exc}"))

    threads = [threading.Thread(target=coordinator_main, name="ssxgb-coord", daemon=True)]
    threads += [threading.Thread(target=party_main, args=(p,), name=f"ssxgb-p{p}",
                                 daemon=True)
                for p in range(1, m + 1)]
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout=max(timeout * 4, 60.0))
        if t.is_alive():
            poison_everyone(SessionAbort("session runner timeout"))
    for ep in endpoints.values():
        ep.close()

    if errors:
        # Prefer the root cause over secondary aborts triggered by poisoning.
        primary = [e for e in errors.values() if not isinstance(e, SessionAbort)]
        raise (primary[0] if primary else errors[min(errors)])

    transcripts = {p: endpoints[p].transcript for p in endpoints}
    return ProtocolRun(results, transcripts, counters, sid)
