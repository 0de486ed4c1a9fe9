"""Lockstep message passing between simulated participants.

Parties are sequential logical processes addressed by index (coordinator is
0, data holders are 1..M). Delivery is FIFO per ordered pair; round numbers
are assigned per (destination, tag) stream by the sender and verified by the
receiver, so any reordering surfaces as a protocol error instead of a wrong
result.

Two interchangeable backends: in-process queues and TCP sockets. Both record
the same canonical frame bytes into the transcript, which makes transcripts
byte-comparable across backends and runs.
"""

from __future__ import annotations

import hashlib
import queue
import socket
import struct
import threading
from dataclasses import dataclass, field
from enum import IntEnum
from typing import NamedTuple

import numpy as np


class ProtocolError(RuntimeError):
    pass


class SessionAbort(RuntimeError):
    pass


class Tag(IntEnum):
    SHARE_DIST = 1
    MUL_EF = 2
    MUL_EF_BCAST = 3
    SIGN_VOTE = 4
    SIGN_VERDICT = 5
    SPLIT_INFO = 6
    MAGNITUDE_REPORT = 7
    STEP_SIZE = 8
    PREDICT_SHARE = 9
    CONTROL = 10


class Kind(IntEnum):
    """How the payload relates to secrecy.

    OWN_SHARE hands the receiver its own slice of a value (never completes a
    reconstruction); CONTRIB is one slice sent expressly so the receiver can
    restore the value; REPORT is a plaintext disclosure by protocol design;
    PUBLIC carries already-public data; CONTROL is plumbing.
    """

    OWN_SHARE = 1
    CONTRIB = 2
    REPORT = 3
    PUBLIC = 4
    CONTROL = 5


@dataclass(frozen=True)
class Message:
    session: bytes
    round: int
    src: int
    dst: int
    tag: int
    kind: int
    label: str
    payload: object  # np.ndarray (float64) or bytes


_HEADER = struct.Struct("<8sIhhBBHB")  # session, round, src, dst, tag, kind, label_len, ptype
_PT_FLOATS = 0
_PT_BYTES = 1


def encode_message(msg: Message) -> bytes:
    label = msg.label.encode()
    if isinstance(msg.payload, bytes):
        ptype, body = _PT_BYTES, msg.payload
    else:
        arr = np.asarray(msg.payload, dtype=np.float64)
        dims = struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
        ptype, body = _PT_FLOATS, dims + arr.tobytes()  # tobytes() copies in C order
    head = _HEADER.pack(msg.session, msg.round, msg.src, msg.dst, msg.tag, msg.kind,
                        len(label), ptype)
    frame = head + label + body
    return struct.pack("<I", len(frame)) + frame


def decode_message(frame: bytes) -> Message:
    head = _HEADER.unpack_from(frame)
    session, rnd, src, dst, tag, kind, label_len, ptype = head
    off = _HEADER.size
    label = frame[off:off + label_len].decode()
    off += label_len
    if ptype == _PT_BYTES:
        payload: object = frame[off:]
    else:
        ndim = frame[off]
        off += 1
        shape = struct.unpack_from(f"<{ndim}I", frame, off)
        off += 4 * ndim
        payload = np.frombuffer(frame, dtype="<f8", offset=off).reshape(shape).copy()
    return Message(session, rnd, src, dst, tag, kind, label, payload)


class TranscriptEntry(NamedTuple):
    direction: str  # "sent" | "recv"
    src: int
    dst: int
    tag: int
    kind: int
    label: str
    round: int
    shape: tuple


@dataclass
class Transcript:
    """Append-only record of one party's message events.

    ``digest`` is a rolling hash over the canonical frame bytes of every
    event, so two transcripts are byte-identical iff digests and lengths
    match.
    """

    party: int
    entries: list = field(default_factory=list)
    _hash: "hashlib._Hash" = field(default_factory=hashlib.sha256, repr=False)

    def record(self, direction: str, msg: Message, frame: bytes) -> None:
        self._hash.update(b"S" if direction == "sent" else b"R")
        self._hash.update(frame)
        shape = np.shape(msg.payload) if not isinstance(msg.payload, bytes) else (len(msg.payload),)
        self.entries.append(TranscriptEntry(direction, msg.src, msg.dst, msg.tag,
                                            msg.kind, msg.label, msg.round, tuple(shape)))

    @property
    def digest(self) -> str:
        return self._hash.hexdigest()


_POISON = object()


class Endpoint:
    """One party's attachment to a session (common logic for both backends)."""

    def __init__(self, party: int, m: int, session_id: bytes, *,
                 record_transcript: bool = False, timeout: float = 30.0):
        self.party = party
        self.m = m
        self.session_id = session_id
        self.timeout = timeout
        self.transcript = Transcript(party) if record_transcript else None
        self._send_rounds: dict[tuple[int, int], int] = {}
        self._recv_rounds: dict[tuple[int, int], int] = {}
        self._abort: Exception | None = None

    # -- backend hooks -------------------------------------------------
    def _deliver(self, dst: int, msg: Message, frame: bytes | None) -> None:
        raise NotImplementedError

    def _next_from(self, src: int) -> Message:
        raise NotImplementedError

    # -- public API ----------------------------------------------------
    def send(self, dst: int, tag: Tag, payload, *, kind: Kind, label: str = "") -> None:
        if self._abort is not None:
            raise SessionAbort(str(self._abort))
        key = (dst, int(tag))
        rnd = self._send_rounds.get(key, 0)
        self._send_rounds[key] = rnd + 1
        msg = Message(self.session_id, rnd, self.party, dst, int(tag), int(kind),
                      label, payload)
        frame = encode_message(msg) if self.transcript is not None else None
        if self.transcript is not None:
            self.transcript.record("sent", msg, frame)
        self._deliver(dst, msg, frame)

    def recv(self, src: int, tag: Tag) -> Message:
        if self._abort is not None:
            raise SessionAbort(str(self._abort))
        msg = self._next_from(src)
        if msg.session != self.session_id:
            raise ProtocolError(f"cross-session frame at party {self.party}")
        if msg.tag != int(tag):
            raise ProtocolError(
                f"party {self.party} expected tag {Tag(tag).name} from {src}, "
                f"got {Tag(msg.tag).name} (lockstep violation)")
        key = (src, int(tag))
        expected = self._recv_rounds.get(key, 0)
        if msg.round != expected:
            raise ProtocolError(f"round {msg.round} out of order (expected {expected})")
        self._recv_rounds[key] = expected + 1
        if self.transcript is not None:
            self.transcript.record("recv", msg, encode_message(msg))
        return msg

    def broadcast(self, tag: Tag, payload, *, kind: Kind, label: str = "") -> None:
        """Send to every data-holding party except self (never the coordinator)."""
        for dst in range(1, self.m + 1):
            if dst != self.party:
                self.send(dst, tag, payload, kind=kind, label=label)

    def poison(self, exc: Exception) -> None:
        self._abort = exc

    def close(self) -> None:
        pass


class InProcEndpoint(Endpoint):
    def __init__(self, hub: "InProcHub", party: int, m: int, session_id: bytes, **kw):
        super().__init__(party, m, session_id, **kw)
        self.hub = hub

    def _deliver(self, dst: int, msg: Message, frame: bytes | None) -> None:
        q = self.hub.queue_for(self.party, dst)
        if self.transcript is not None:
            # re-decode so receivers cannot alias the sender's arrays
            q.put(decode_message(frame[4:]))
        else:
            payload = msg.payload
            if isinstance(payload, np.ndarray):
                payload = payload.copy()
                msg = Message(msg.session, msg.round, msg.src, msg.dst, msg.tag,
                              msg.kind, msg.label, payload)
            q.put(msg)

    def _next_from(self, src: int) -> Message:
        q = self.hub.queue_for(src, self.party)
        try:
            item = q.get(timeout=self.timeout)
        except queue.Empty:
            raise SessionAbort(
                f"party {self.party} timed out waiting for party {src}") from None
        if item is _POISON:
            raise SessionAbort(f"peer failure observed by party {self.party}")
        return item


class InProcHub:
    """Ordered queues for every ordered pair of session members."""

    def __init__(self, m: int):
        self.m = m
        self._queues: dict[tuple[int, int], queue.Queue] = {}
        for src in range(0, m + 1):
            for dst in range(0, m + 1):
                if src != dst:
                    self._queues[(src, dst)] = queue.Queue()

    def queue_for(self, src: int, dst: int) -> queue.Queue:
        try:
            return self._queues[(src, dst)]
        except KeyError:
            raise ProtocolError(f"no channel {src}->{dst}") from None

    def endpoint(self, party: int, session_id: bytes, **kw) -> InProcEndpoint:
        return InProcEndpoint(self, party, self.m, session_id, **kw)

    def poison_all(self) -> None:
        for q in self._queues.values():
            q.put(_POISON)


class TcpEndpoint(Endpoint):
    """Socket-backed endpoint: one listener per party, lazy outgoing connections.

    Frames on the wire are exactly the canonical encoding, so the transcript
    of a TCP run matches the in-process run bit for bit.
    """

    def __init__(self, party: int, m: int, session_id: bytes,
                 address_book: dict[int, tuple[str, int]], listener: socket.socket, **kw):
        super().__init__(party, m, session_id, **kw)
        self.address_book = address_book
        self._listener = listener
        self._out: dict[int, socket.socket] = {}
        self._in: dict[int, queue.Queue] = {p: queue.Queue()
                                            for p in range(0, m + 1) if p != party}
        self._lock = threading.Lock()
        self._closed = False
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    def _accept_loop(self) -> None:
        while not self._closed:
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            threading.Thread(target=self._read_loop, args=(conn,), daemon=True).start()

    def _read_loop(self, conn: socket.socket) -> None:
        try:
            while True:
                head = self._read_exact(conn, 4)
                if head is None:
                    return
                (length,) = struct.unpack("<I", head)
                frame = self._read_exact(conn, length)
                if frame is None:
                    return
                msg = decode_message(frame)
                q = self._in.get(msg.src)
                if q is None:
                    return  # unknown peer: drop connection
                q.put(msg)
        except OSError:
            return
        finally:
            conn.close()

    @staticmethod
    def _read_exact(conn: socket.socket, n: int) -> bytes | None:
        buf = b""
        while len(buf) < n:
            chunk = conn.recv(n - len(buf))
            if not chunk:
                return None
            buf += chunk
        return buf

    def _connection(self, dst: int) -> socket.socket:
        with self._lock:
            sock = self._out.get(dst)
            if sock is None:
                sock = socket.create_connection(self.address_book[dst], timeout=self.timeout)
                sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                self._out[dst] = sock
            return sock

    def _deliver(self, dst: int, msg: Message, frame: bytes | None) -> None:
        if frame is None:
            frame = encode_message(msg)
        try:
            self._connection(dst).sendall(frame)
        except OSError as exc:
            raise SessionAbort(f"send to party {dst} failed: {exc}") from exc

    def _next_from(self, src: int) -> Message:
        try:
            item = self._in[src].get(timeout=self.timeout)
        except queue.Empty:
            raise SessionAbort(
                f"party {self.party} timed out waiting for party {src}") from None
        if item is _POISON:
            raise SessionAbort(f"peer failure observed by party {self.party}")
        return item

    def poison(self, exc: Exception) -> None:
        super().poison(exc)
        for q in self._in.values():
            q.put(_POISON)

    def close(self) -> None:
        self._closed = True
        try:
            self._listener.close()
        except OSError:
            pass
        for sock in self._out.values():
            try:
                sock.close()
            except OSError:
                pass


def make_tcp_listeners(m: int, host: str = "127.0.0.1",
                       ports: dict[int, int] | None = None):
    """Bind one listener per member; returns (listeners, address_book).

    With ``ports`` unset the OS picks free ports, which keeps concurrent
    sessions disjoint.
    """
    listeners: dict[int, socket.socket] = {}
    book: dict[int, tuple[str, int]] = {}
    for p in range(0, m + 1):
        s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        s.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        s.bind((host, 0 if ports is None else ports[p]))
        s.listen(m + 1)
        listeners[p] = s
        book[p] = (host, s.getsockname()[1])
    return listeners, book


# ---------------------------------------------------------------------------
# Semi-honest transcript audit
# ---------------------------------------------------------------------------

class Violation(NamedTuple):
    party: int
    label: str
    occurrence: int
    detail: str


class AuditResult(NamedTuple):
    violations: list
    restorations: dict  # label -> sorted list of receiving parties
    counts: dict        # (label, party) -> number of completed restorations


# Who may restore which protocol value. Everything else is a violation.
DEFAULT_RESTORATION_POLICY: dict[str, int] = {
    "mul.e": 1,
    "mul.f": 1,
    "sign.den": 1,
    "sign.num": 2,
    "sign.num_sign": 1,
    "leaf.perturbed_a": 1,
    "predict.yhat": 1,
    "newton.magnitude": 1,
    "leaf.exact_a": 1,  # test-only exact-step mode
}


def audit_transcripts(transcripts: dict[int, Transcript], m: int,
                      policy: dict[str, int] | None = None) -> AuditResult:
    """Flag any party that restored a value it was not designated to restore.

    A restoration is either (a) receiving CONTRIB slices of one labeled value
    from all other M-1 parties (its own slice completes the set) or (b)
    receiving a REPORT, which is plaintext by definition. OWN_SHARE and
    PUBLIC deliveries never complete anything.
    """
    policy = DEFAULT_RESTORATION_POLICY if policy is None else policy
    violations: list[Violation] = []
    restorations: dict[str, set] = {}
    counts: dict[tuple[str, int], int] = {}

    for party, transcript in transcripts.items():
        if party == 0:
            expected_srcs = None  # coordinator never holds shares
        else:
            expected_srcs = frozenset(p for p in range(1, m + 1) if p != party)
        per_label: dict[str, dict[int, int]] = {}
        for entry in transcript.entries:
            if entry.direction != "recv":
                continue
            if entry.kind == int(Kind.REPORT):
                restorations.setdefault(entry.label, set()).add(party)
                key = (entry.label, party)
                counts[key] = counts.get(key, 0) + 1
                if policy.get(entry.label) != party:
                    violations.append(Violation(
                        party, entry.label, counts[key],
                        f"plaintext report from {entry.src} to non-designated party"))
            elif entry.kind == int(Kind.CONTRIB):
                srcs = per_label.setdefault(entry.label, {})
                srcs[entry.src] = srcs.get(entry.src, 0) + 1
                if expected_srcs is None:
                    violations.append(Violation(
                        party, entry.label, srcs[entry.src],
                        "coordinator received a computation share"))
                    continue
                done = min((srcs.get(s, 0) for s in expected_srcs), default=0)
                key = (entry.label, party)
                if done > counts.get(key, 0):
                    counts[key] = done
                    restorations.setdefault(entry.label, set()).add(party)
                    if policy.get(entry.label) != party:
                        violations.append(Violation(
                            party, entry.label, done,
                            f"complete share set restored at party {party}"))
        del per_label

    return AuditResult(
        violations,
        {label: sorted(parties) for label, parties in restorations.items()},
        counts,
    )
