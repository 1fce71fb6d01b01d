"""Prime-order subgroup of Z_p^* used for Schnorr signatures and affine proofs."""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from functools import lru_cache

import gmpy2

from .errors import ParameterError


@dataclass(frozen=True)
class SchnorrGroup:
    """Subgroup of order ``q`` in ``Z_p^*`` with ``p = k*q + 1``, generated by ``g``."""

    p: int
    q: int
    g: int

    def exp(self, x: int) -> int:
        return int(gmpy2.powmod(self.g, x % self.q, self.p))

    def power(self, h: int, x: int) -> int:
        return int(gmpy2.powmod(h, x % self.q, self.p))

    def mul(self, *elems: int) -> int:
        out = 1
        for e in elems:
            out = out * e % self.p
        return out

    def is_element(self, h: int) -> bool:
        return 0 < h < self.p and gmpy2.powmod(h, self.q, self.p) == 1

    @property
    def scalar_bytes(self) -> int:
        return (self.q.bit_length() + 7) // 8


def generate_group(p_bits: int = 256, q_bits: int = 160, seed: int = 0) -> SchnorrGroup:
    if q_bits < 16 or p_bits <= q_bits + 1:
        raise ParameterError("need p_bits > q_bits + 1 and q_bits >= 16")
    rng = random.Random(f"schnorr-group/{p_bits}/{q_bits}/{seed}")
    q = int(gmpy2.next_prime(rng.getrandbits(q_bits) | (1 << (q_bits - 1))))
    while True:
        k = rng.getrandbits(p_bits - q_bits) | (1 << (p_bits - q_bits - 1))
        k &= ~1
        p = k * q + 1
        if p.bit_length() == p_bits and gmpy2.is_prime(p, 40):
            break
    while True:
        g = int(gmpy2.powmod(rng.randrange(2, p - 1), k, p))
        if g != 1:
            return SchnorrGroup(p, q, g)


@lru_cache(maxsize=None)
def default_group(p_bits: int = 256) -> SchnorrGroup:
    return generate_group(p_bits, 160 if p_bits > 192 else p_bits // 2)


def _hash_to_scalar(group: SchnorrGroup, *parts: bytes) -> int:
    h = hashlib.sha256()
    for part in parts:
        h.update(len(part).to_bytes(4, "big"))
        h.update(part)
    return int.from_bytes(h.digest(), "big") % group.q


def _elem_bytes(group: SchnorrGroup, x: int) -> bytes:
    return x.to_bytes((group.p.bit_length() + 7) // 8, "big")


@dataclass(frozen=True)
class SigningKey:
    x: int
    group: SchnorrGroup

    @property
    def verify_key(self) -> "VerifyKey":
        return VerifyKey(self.group.exp(self.x), self.group)


@dataclass(frozen=True)
class VerifyKey:
    y: int
    group: SchnorrGroup


def signing_keygen(rng: random.Random, group: SchnorrGroup | None = None) -> SigningKey:
    group = group or default_group()
    return SigningKey(rng.randrange(1, group.q), group)


def sign(key: SigningKey, data: bytes) -> bytes:
    """Schnorr signature ``(e, s)`` with a nonce derived from the key and message."""
    G = key.group
    k = _hash_to_scalar(G, b"nonce", key.x.to_bytes(G.scalar_bytes, "big"), data) or 1
    e = _hash_to_scalar(G, _elem_bytes(G, G.exp(k)), data)
    s = (k + e * key.x) % G.q
    w = G.scalar_bytes
    return e.to_bytes(w, "big") + s.to_bytes(w, "big")


def verify(key: VerifyKey, data: bytes, signature: bytes | None) -> bool:
    G = key.group
    w = G.scalar_bytes
    if not signature or len(signature) != 2 * w:
        return False
    e = int.from_bytes(signature[:w], "big")
    s = int.from_bytes(signature[w:], "big")
    if e >= G.q or s >= G.q:
        return False
    r = G.mul(G.exp(s), G.power(key.y, -e))
    return _hash_to_scalar(G, _elem_bytes(G, r), data) == e
