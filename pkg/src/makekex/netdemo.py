"""Key exchange between two peers over TCP.

Every frame is a 4-byte big-endian length followed by ``MAKE``, the version
byte 0x01, a message-type byte and the payload.  A session is exactly::

    server -> client   params offer   (0x00, serialized PublicParams)
    client -> server   token A        (0x01, one matrix)
    server -> client   token B        (0x01, one matrix)
    client -> server   confirmation   (0x02, SHA-256 of K)
    server -> client   confirmation   (0x02, SHA-256 of K)
"""

from __future__ import annotations

import hmac
import logging
import random
import socket
import struct
from dataclasses import dataclass

from .matrix import MatrixZp, decode_matrix
from .paramgen import MAGIC, VERSION, PublicParams, gen_private_exponent
from .protocol import finalize, initiate

log = logging.getLogger(__name__)

MSG_PARAMS = 0x00
MSG_TOKEN = 0x01
MSG_CONFIRM = 0x02

MAX_FRAME = 1 << 20
DIGEST_SIZE = 32

# (sender, msg_type) in the only order a session accepts
SESSION_ORDER = (
    ("server", MSG_PARAMS),
    ("client", MSG_TOKEN),
    ("server", MSG_TOKEN),
    ("client", MSG_CONFIRM),
    ("server", MSG_CONFIRM),
)


class ProtocolError(Exception):
    pass


class KeyMismatch(Exception):
    pass


@dataclass(frozen=True)
class WireMessage:
    msg_type: int
    payload: bytes

    def encode(self) -> bytes:
        body = MAGIC + bytes([VERSION, self.msg_type]) + self.payload
        return struct.pack(">I", len(body)) + body


def decode_frame_body(body: bytes) -> WireMessage:
    if len(body) < 6 or body[:4] != MAGIC:
        raise ProtocolError("bad magic")
    if body[4] != VERSION:
        raise ProtocolError(f"unsupported version {body[4]}")
    msg_type = body[5]
    if msg_type not in (MSG_PARAMS, MSG_TOKEN, MSG_CONFIRM):
        raise ProtocolError(f"unknown message type {msg_type}")
    return WireMessage(msg_type, body[6:])


def decode_frame(data: bytes) -> WireMessage:
    if len(data) < 4:
        raise ProtocolError("truncated length prefix")
    (n,) = struct.unpack_from(">I", data)
    if len(data) != 4 + n:
        raise ProtocolError("frame length does not match prefix")
    return decode_frame_body(data[4:])


def split_frames(stream: bytes) -> list[WireMessage]:
    """Decode a captured byte stream into its frames."""
    out, offset = [], 0
    while offset < len(stream):
        if len(stream) < offset + 4:
            raise ProtocolError("truncated length prefix")
        (n,) = struct.unpack_from(">I", stream, offset)
        out.append(decode_frame(stream[offset : offset + 4 + n]))
        offset += 4 + n
    return out


def parse_params(msg: WireMessage) -> PublicParams:
    try:
        return PublicParams.from_bytes(msg.payload)
    except ValueError as exc:
        raise ProtocolError(f"bad params payload: {exc}") from exc


def parse_token(msg: WireMessage, modulus: int, dim: int) -> MatrixZp:
    try:
        token, end = decode_matrix(msg.payload, modulus)
    except ValueError as exc:
        raise ProtocolError(f"bad token payload: {exc}") from exc
    if end != len(msg.payload) or token.dim != dim:
        raise ProtocolError("token payload is not a single matrix of the agreed size")
    return token


class SessionMachine:
    """Tracks which frame may come next; anything else is a ProtocolError."""

    def __init__(self):
        self.step = 0

    @property
    def done(self) -> bool:
        return self.step == len(SESSION_ORDER)

    def advance(self, sender: str, msg_type: int) -> None:
        if self.done:
            raise ProtocolError("session already complete")
        expected = SESSION_ORDER[self.step]
        if (sender, msg_type) != expected:
            raise ProtocolError(f"out-of-order message {msg_type:#04x} from {sender}; expected {expected[1]:#04x} from {expected[0]}")
        self.step += 1


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ProtocolError("connection closed mid-frame")
        buf.extend(chunk)
    return bytes(buf)


def recv_message(sock: socket.socket) -> WireMessage:
    (n,) = struct.unpack(">I", _recv_exact(sock, 4))
    if n > MAX_FRAME:
        raise ProtocolError(f"frame of {n} bytes exceeds limit")
    return decode_frame_body(_recv_exact(sock, n))


def send_message(sock: socket.socket, msg: WireMessage) -> None:
    sock.sendall(msg.encode())


@dataclass
class SessionResult:
    role: str
    digest: bytes
    peer_digest: bytes
    peer: str = ""

    @property
    def agreed(self) -> bool:
        return hmac.compare_digest(self.digest, self.peer_digest)


def parse_addr(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"expected host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


def _expect(sock, machine: SessionMachine, sender: str) -> WireMessage:
    msg = recv_message(sock)
    machine.advance(sender, msg.msg_type)
    return msg


def _send(sock, machine: SessionMachine, sender: str, msg: WireMessage) -> None:
    machine.advance(sender, msg.msg_type)
    send_message(sock, msg)


def serve_connection(conn: socket.socket, params: PublicParams, rng=None) -> SessionResult:
    """Responder side of one session over an accepted connection."""
    rng = rng or random.SystemRandom()
    machine = SessionMachine()
    _send(conn, machine, "server", WireMessage(MSG_PARAMS, params.to_bytes()))
    token_a = parse_token(_expect(conn, machine, "client"), params.p, params.dim)
    state = initiate(params, gen_private_exponent(params.q, rng))
    _send(conn, machine, "server", WireMessage(MSG_TOKEN, state.sent_token.to_bytes()))
    digest = finalize(state, token_a).derived_bytes
    peer = _expect(conn, machine, "client").payload
    if len(peer) != DIGEST_SIZE:
        raise ProtocolError("confirmation digest has wrong size")
    _send(conn, machine, "server", WireMessage(MSG_CONFIRM, digest))
    return SessionResult("server", digest, peer)


def connect_session(sock: socket.socket, rng=None) -> SessionResult:
    """Initiator side of one session over a connected socket."""
    rng = rng or random.SystemRandom()
    machine = SessionMachine()
    params = parse_params(_expect(sock, machine, "server"))
    state = initiate(params, gen_private_exponent(params.q, rng))
    _send(sock, machine, "client", WireMessage(MSG_TOKEN, state.sent_token.to_bytes()))
    token_b = parse_token(_expect(sock, machine, "server"), params.p, params.dim)
    digest = finalize(state, token_b).derived_bytes
    _send(sock, machine, "client", WireMessage(MSG_CONFIRM, digest))
    peer = _expect(sock, machine, "server").payload
    if len(peer) != DIGEST_SIZE:
        raise ProtocolError("confirmation digest has wrong size")
    return SessionResult("client", digest, peer)


def _checked(result: SessionResult) -> SessionResult:
    if not result.agreed:
        raise KeyMismatch(f"{result.role}: confirmation digest does not match local key")
    return result


def serve(listen_addr, params: PublicParams, rng=None, ready=None, timeout: float | None = 60.0) -> SessionResult:
    """Accept one connection and run the responder side.

    ``ready`` is called with the bound ``(host, port)`` once listening, which
    lets callers bind port 0.
    """
    if isinstance(listen_addr, str):
        listen_addr = parse_addr(listen_addr)
    with socket.create_server(listen_addr) as srv:
        srv.settimeout(timeout)
        bound = srv.getsockname()[:2]
        log.info("listening on %s:%d", *bound)
        if ready is not None:
            ready(bound)
        conn, peer = srv.accept()
        with conn:
            conn.settimeout(timeout)
            result = serve_connection(conn, params, rng)
            result.peer = f"{peer[0]}:{peer[1]}"
    return _checked(result)


def connect(remote_addr, rng=None, timeout: float | None = 60.0) -> SessionResult:
    if isinstance(remote_addr, str):
        remote_addr = parse_addr(remote_addr)
    with socket.create_connection(remote_addr, timeout=timeout) as sock:
        result = connect_session(sock, rng)
        result.peer = f"{remote_addr[0]}:{remote_addr[1]}"
    return _checked(result)
