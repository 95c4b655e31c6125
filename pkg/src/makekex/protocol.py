"""Two-party key exchange over the semidirect product, plus a scalar DH baseline."""

from __future__ import annotations

import hashlib
import random
import time
from dataclasses import dataclass, field

from .matrix import MatrixZp, ShapeMismatch, decode_matrix
from .modmath import Residue
from .paramgen import MAGIC, VERSION, PrivateExponent, PublicParams, gen_private_exponent, validate_params
from .semidirect import SemidirectElement, sd_pow

MSG_TOKEN = 0x01


class InvalidParams(ValueError):
    pass


def key_digest(K: MatrixZp) -> bytes:
    return hashlib.sha256(K.to_bytes()).digest()


@dataclass(frozen=True)
class SharedKey:
    K: MatrixZp

    @property
    def derived_bytes(self) -> bytes:
        return key_digest(self.K)

    def hex(self) -> str:
        return self.derived_bytes.hex()


@dataclass
class ExchangeState:
    params: PublicParams
    secret: PrivateExponent
    own_power: SemidirectElement
    received_token: MatrixZp | None = None
    shared_key: SharedKey | None = field(default=None, repr=False)

    @property
    def sent_token(self) -> MatrixZp:
        return self.own_power.additive

    def token_message(self) -> bytes:
        return encode_token(self.sent_token)

    def __repr__(self):
        # never print the secret or the pair component
        return f"ExchangeState(dim={self.params.dim}, p_bits={self.params.p.bit_length()}, done={self.shared_key is not None})"


def generator(params: PublicParams) -> SemidirectElement:
    return SemidirectElement(params.M, params.H1, params.H2)


def initiate(params: PublicParams, secret, *, check: bool = True) -> ExchangeState:
    """Raise the public generator to ``secret``; the token is the additive part."""
    if check:
        problems = validate_params(params)
        if problems:
            raise InvalidParams("; ".join(problems))
    if not isinstance(secret, PrivateExponent):
        secret = PrivateExponent(int(secret))
    return ExchangeState(params, secret, sd_pow(generator(params), secret.value))


def finalize(state: ExchangeState, received: MatrixZp) -> SharedKey:
    """``K = P^m B Q^m + A`` using the pair component kept from ``initiate``."""
    own = state.own_power
    if received.dim != own.additive.dim or received.modulus != own.additive.modulus:
        raise ShapeMismatch("received token does not match the parameters")
    K = own.pair_left @ received @ own.pair_right + own.additive
    state.received_token = received
    state.shared_key = SharedKey(K)
    return state.shared_key


def encode_token(token: MatrixZp) -> bytes:
    return MAGIC + bytes([VERSION, MSG_TOKEN]) + token.to_bytes()


def decode_token(buf: bytes, modulus: int) -> MatrixZp:
    if buf[:4] != MAGIC:
        raise ValueError("bad magic")
    if len(buf) < 6 or buf[4] != VERSION or buf[5] != MSG_TOKEN:
        raise ValueError("not a version 1 token message")
    token, end = decode_matrix(buf, modulus, 6)
    if end != len(buf):
        raise ValueError("trailing bytes after token")
    return token


@dataclass
class Transcript:
    """What an eavesdropper sees, plus wall-clock timings per phase."""

    alice_message: bytes
    bob_message: bytes
    timings: dict = field(default_factory=dict)

    @property
    def A(self) -> bytes:
        return self.alice_message

    @property
    def B(self) -> bytes:
        return self.bob_message


def run_exchange(params: PublicParams, rng=None, secrets: tuple[int, int] | None = None, *, check: bool = True):
    """Simulate both parties; returns ``(alice_key, bob_key, transcript)``."""
    rng = rng or random.SystemRandom()
    if secrets is None:
        m = gen_private_exponent(params.q, rng)
        n = gen_private_exponent(params.q, rng)
    else:
        m, n = (PrivateExponent(int(s)) for s in secrets)
    timings = {}
    t0 = time.perf_counter()
    alice = initiate(params, m, check=check)
    t1 = time.perf_counter()
    bob = initiate(params, n, check=False)
    t2 = time.perf_counter()
    msg_a, msg_b = alice.token_message(), bob.token_message()
    key_a = finalize(alice, decode_token(msg_b, params.p))
    t3 = time.perf_counter()
    key_b = finalize(bob, decode_token(msg_a, params.p))
    t4 = time.perf_counter()
    timings.update(alice_power=t1 - t0, bob_power=t2 - t1, alice_key=t3 - t2, bob_key=t4 - t3, total=t4 - t0)
    return key_a, key_b, Transcript(msg_a, msg_b, timings)


def random_generator(p: int, rng) -> Residue:
    """A primitive root mod a safe prime p = 2q + 1."""
    q = (p - 1) // 2
    while True:
        g = rng.randrange(2, p - 1)
        if pow(g, 2, p) != 1 and pow(g, q, p) != 1:
            return Residue(g, p)


def classic_dh_exchange(p: int, g, rng=None, secrets: tuple[int, int] | None = None) -> tuple[Residue, Residue]:
    """Scalar Diffie-Hellman in Z_p*; returns both parties' keys."""
    rng = rng or random.SystemRandom()
    g = g if isinstance(g, Residue) else Residue(g, p)
    if g.value == 0:
        raise ValueError("g must be nonzero")
    if secrets is None:
        q = (p - 1) // 2
        m = gen_private_exponent(q, rng).value
        n = gen_private_exponent(q, rng).value
    else:
        m, n = secrets
    token_a = pow(g.value, m, p)
    token_b = pow(g.value, n, p)
    return Residue(pow(token_b, m, p), p), Residue(pow(token_a, n, p), p)
