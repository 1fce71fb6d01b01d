"""Additively homomorphic public-key ciphers and modulus chains.

Two schemes share one interface:

* ``paillier_like``: Paillier with generator ``N + 1``; every player has its
  own plaintext modulus ``N``.
* ``shared_modulus``: a Benaloh-style scheme ``c = y^m * u^M mod n`` whose
  plaintext space is exactly ``Z_M`` for a modulus ``M`` shared by all
  players.  Decryption reduces modulo the secret prime ``p`` (``M | p - 1``)
  and solves a discrete logarithm in the order-``M`` subgroup with
  Pohlig-Hellman over baby-step/giant-step, so ``M`` is capped by a search
  bound.

In both schemes multiplying ciphertexts adds plaintexts and raising a
ciphertext to ``k`` multiplies its plaintext by ``k`` (modulo the plaintext
modulus).
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Optional, Sequence

import gmpy2

from .codec import from_hex, to_hex
from .errors import (
    KeyGenerationError,
    KeyMismatchError,
    ParameterError,
    RangeError,
)

MILLER_RABIN_ROUNDS = 40
MAX_KEYGEN_ATTEMPTS = 10_000
DEFAULT_SEARCH_BOUND = 1 << 24


class Scheme(str, Enum):
    PAILLIER_LIKE = "paillier_like"
    SHARED_MODULUS = "shared_modulus"


def is_probable_prime(x: int) -> bool:
    return x >= 2 and bool(gmpy2.is_prime(x, MILLER_RABIN_ROUNDS))


def _powmod(b: int, e: int, m: int) -> int:
    return int(gmpy2.powmod(b, e, m))


def _random_prime(rng: random.Random, lo: int, hi: int) -> Optional[int]:
    """A random odd prime in ``[lo, hi)``, or None if the draw misses."""
    lo = max(lo, 3)
    if hi <= lo:
        return None
    start = rng.randrange(lo, hi)
    p = int(gmpy2.next_prime(start - 1))
    if p >= hi:
        p = int(gmpy2.next_prime(lo - 1))
        if p >= hi:
            return None
    return p


def _key_id(scheme: Scheme, N: int, material: Sequence[int]) -> str:
    blob = json.dumps([scheme.value, to_hex(N), [to_hex(x) for x in material]]).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class PublicKey:
    """Public half of a key pair.

    ``N`` is always the *plaintext* modulus.  ``n`` is the RSA-type modulus
    the ciphertext group is built on (``n == N`` for Paillier); ``y`` is the
    message base of the shared-modulus scheme.
    """

    key_id: str
    scheme: Scheme
    N: int
    n: int
    y: Optional[int] = None

    @property
    def cipher_modulus(self) -> int:
        return self.n * self.n if self.scheme is Scheme.PAILLIER_LIKE else self.n

    @property
    def n_bits(self) -> int:
        return self.n.bit_length()

    def to_json(self) -> dict:
        public = {"g": to_hex(self.n + 1)} if self.scheme is Scheme.PAILLIER_LIKE else {"n": to_hex(self.n), "y": to_hex(self.y)}
        return {"key_id": self.key_id, "scheme": self.scheme.value, "n_bits": self.n_bits, "N": to_hex(self.N), "public": public}


@dataclass(frozen=True)
class SecretKey:
    key_id: str
    scheme: Scheme
    N: int
    p: int
    q: int
    public: PublicKey = field(repr=False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False, hash=False)

    # -- Paillier (CRT decryption) ------------------------------------------
    @cached_property
    def _paillier_crt(self):
        p, q, n = self.p, self.q, self.N
        hp = pow((-q) % p, -1, p)
        hq = pow((-p) % q, -1, q)
        return p * p, q * q, hp, hq, pow(q, -1, p)

    def _paillier_decrypt(self, c: int) -> int:
        p, q = self.p, self.q
        p2, q2, hp, hq, qinv = self._paillier_crt
        mp = ((_powmod(c % p2, p - 1, p2) - 1) // p) * hp % p
        mq = ((_powmod(c % q2, q - 1, q2) - 1) // q) * hq % q
        return (mq + q * ((mp - mq) * qinv % p)) % self.N

    # -- shared modulus (Pohlig-Hellman over BSGS) ---------------------------
    @cached_property
    def _shared_params(self):
        p, M = self.p, self.N
        e = (p - 1) // M
        x = _powmod(self.public.y % p, e, p)
        return e, x, _factor(M)

    def _bsgs_table(self, ell: int, gamma: int):
        key = ("bsgs", ell)
        if key not in self._cache:
            p = self.p
            m = math.isqrt(ell - 1) + 1
            table = {}
            cur = 1
            for j in range(m):
                table.setdefault(cur, j)
                cur = cur * gamma % p
            giant = pow(pow(gamma, m, p), -1, p)
            self._cache[key] = (m, table, giant)
        return self._cache[key]

    def _shared_decrypt(self, c: int) -> int:
        p, M = self.p, self.N
        e, x, factors = self._shared_params
        a = _powmod(c % p, e, p)
        residues, moduli = [], []
        for ell, k in factors:
            pe = ell ** k
            g_i = _powmod(x, M // pe, p)
            h_i = _powmod(a, M // pe, p)
            gamma = _powmod(g_i, ell ** (k - 1), p)
            m, table, giant = self._bsgs_table(ell, gamma)
            g_inv = pow(g_i, -1, p)
            digits = 0
            for j in range(k):
                target = _powmod(_powmod(g_inv, digits, p) * h_i % p, ell ** (k - 1 - j), p)
                found = None
                cur = target
                for i in range(m + 1):
                    hit = table.get(cur)
                    if hit is not None:
                        found = i * m + hit
                        break
                    cur = cur * giant % p
                if found is None or found >= ell:
                    raise RangeError("ciphertext does not decrypt under this key")
                digits += found * ell ** j
            residues.append(digits)
            moduli.append(pe)
        return _crt(residues, moduli)

    def decrypt_int(self, c: int) -> int:
        if self.scheme is Scheme.PAILLIER_LIKE:
            return self._paillier_decrypt(c)
        return self._shared_decrypt(c)

    def to_json(self) -> dict:
        doc = self.public.to_json()
        doc["secret"] = {"p": to_hex(self.p), "q": to_hex(self.q)}
        return doc


def _factor(M: int) -> list[tuple[int, int]]:
    from sympy import factorint

    return sorted((int(p), int(k)) for p, k in factorint(M).items())


def _crt(residues: Sequence[int], moduli: Sequence[int]) -> int:
    total, mod = 0, 1
    for r, m in zip(residues, moduli):
        t = ((r - total) * pow(mod, -1, m)) % m
        total += mod * t
        mod *= m
    return total % mod


@dataclass(frozen=True)
class Ciphertext:
    value: int
    pk: PublicKey = field(repr=False)

    @property
    def key_id(self) -> str:
        return self.pk.key_id

    def __add__(self, other: "Ciphertext") -> "Ciphertext":
        return hom_add(self, other)

    def __mul__(self, k: int) -> "Ciphertext":
        return hom_scale(self, k)


# ---------------------------------------------------------------------------
# key generation
# ---------------------------------------------------------------------------

def _as_rng(rng) -> random.Random:
    if rng is None:
        return random.Random()
    if isinstance(rng, random.Random):
        return rng
    return random.Random(rng)


def _paillier_from_primes(p: int, q: int) -> tuple[PublicKey, SecretKey]:
    N = p * q
    kid = _key_id(Scheme.PAILLIER_LIKE, N, [N + 1])
    pk = PublicKey(kid, Scheme.PAILLIER_LIKE, N, N)
    return pk, SecretKey(kid, Scheme.PAILLIER_LIKE, N, p, q, pk)


def paillier_keygen(bit_length: int = 512, interval: Optional[tuple[int, int]] = None, rng=None):
    """Generate a Paillier key pair ``(pk, sk)``.

    With ``interval=(lo, hi)`` the modulus is drawn so that ``lo <= N < hi``:
    one prime ``p`` of half the bit length of ``hi`` is drawn and a prime
    ``q`` is searched so that ``p*q`` lands in the interval.  Raises
    :class:`KeyGenerationError` after :data:`MAX_KEYGEN_ATTEMPTS` misses.
    """
    rng = _as_rng(rng)
    if interval is None:
        if bit_length < 16:
            raise ParameterError("bit_length must be at least 16")
        lo, hi = 1 << (bit_length - 1), 1 << bit_length
    else:
        lo, hi = (int(v) for v in interval)
        if lo < 2 or hi <= lo:
            raise ParameterError(f"bad modulus interval [{lo}, {hi})")
    pbits = max(2, (hi - 1).bit_length() // 2)
    for _ in range(MAX_KEYGEN_ATTEMPTS):
        p = _random_prime(rng, 1 << (pbits - 1), 1 << pbits)
        if p is None:
            continue
        q = _random_prime(rng, -(-lo // p), -(-hi // p))
        if q is None or q == p:
            continue
        N = p * q
        if lo <= N < hi and math.gcd(N, (p - 1) * (q - 1)) == 1:
            if is_probable_prime(p) and is_probable_prime(q):
                return _paillier_from_primes(p, q)
    raise KeyGenerationError(f"no valid Paillier modulus found in [{lo}, {hi})")


def shared_modulus_keygen(M: int, bit_length: int = 512, rng=None, search_bound: int = DEFAULT_SEARCH_BOUND):
    """Key pair with plaintext space exactly ``Z_M``.

    Independent calls with the same ``M`` give independent trapdoors over a
    common plaintext ring.  ``M`` above ``search_bound`` is refused because
    decryption cost grows with the message space.
    """
    rng = _as_rng(rng)
    M = int(M)
    if M < 2:
        raise ParameterError("shared modulus M must be at least 2")
    if M > search_bound:
        raise ParameterError(f"M={M} exceeds the decryption search bound {search_bound}")
    if bit_length < 16:
        raise ParameterError("bit_length must be at least 16")
    pbits = max(bit_length // 2, M.bit_length() + 8)
    qbits = max(bit_length - pbits, 8)
    factors = _factor(M)
    for _ in range(MAX_KEYGEN_ATTEMPTS):
        k = rng.randrange(max(1, (1 << (pbits - 1)) // M), (1 << pbits) // M + 1)
        if math.gcd(k, M) != 1:
            continue
        p = k * M + 1
        if not is_probable_prime(p):
            continue
        q = _random_prime(rng, 1 << (qbits - 1), 1 << qbits)
        if q is None or q == p:
            continue
        n = p * q
        e = (p - 1) // M
        for _ in range(64):
            y = rng.randrange(2, n)
            if math.gcd(y, n) != 1:
                continue
            x = _powmod(y % p, e, p)
            if all(_powmod(x, M // ell, p) != 1 for ell, _ in factors):
                break
        else:
            continue
        kid = _key_id(Scheme.SHARED_MODULUS, M, [n, y])
        pk = PublicKey(kid, Scheme.SHARED_MODULUS, M, n, y)
        return pk, SecretKey(kid, Scheme.SHARED_MODULUS, M, p, q, pk)
    raise KeyGenerationError(f"no shared-modulus key found for M={M}")


# ---------------------------------------------------------------------------
# encryption and homomorphic operations
# ---------------------------------------------------------------------------

def _unit(rng: random.Random, n: int) -> int:
    while True:
        r = rng.randrange(1, n)
        if math.gcd(r, n) == 1:
            return r


def encrypt(pk: PublicKey, m: int, rng) -> Ciphertext:
    m = int(m)
    if not 0 <= m < pk.N:
        raise RangeError(f"plaintext {m} outside [0, {pk.N})")
    rng = _as_rng(rng)
    if pk.scheme is Scheme.PAILLIER_LIKE:
        n2 = pk.n * pk.n
        c = (1 + m * pk.n) * _powmod(_unit(rng, pk.n), pk.n, n2) % n2
    else:
        c = _powmod(pk.y, m, pk.n) * _powmod(_unit(rng, pk.n), pk.N, pk.n) % pk.n
    return Ciphertext(c, pk)


def decrypt(sk: SecretKey, c: Ciphertext) -> int:
    if c.key_id != sk.key_id:
        raise KeyMismatchError(f"ciphertext under key {c.key_id} given to key {sk.key_id}")
    return sk.decrypt_int(c.value)


def hom_add(c1: Ciphertext, c2: Ciphertext) -> Ciphertext:
    """Ciphertext of ``(m1 + m2) mod N``."""
    if c1.key_id != c2.key_id:
        raise KeyMismatchError(f"cannot add ciphertexts under keys {c1.key_id} and {c2.key_id}")
    return Ciphertext(c1.value * c2.value % c1.pk.cipher_modulus, c1.pk)


def hom_scale(c: Ciphertext, k: int) -> Ciphertext:
    """Ciphertext of ``(m * k) mod N``; requires ``0 <= k < N``."""
    k = int(k)
    if not 0 <= k < c.pk.N:
        raise RangeError(f"scalar {k} outside [0, {c.pk.N})")
    return Ciphertext(_powmod(c.value, k, c.pk.cipher_modulus), c.pk)


def ciphertext_from_int(pk: PublicKey, value: int) -> Ciphertext:
    value = int(value)
    if not 0 < value < pk.cipher_modulus:
        raise RangeError("ciphertext value outside the ciphertext space")
    return Ciphertext(value, pk)


# ---------------------------------------------------------------------------
# key documents
# ---------------------------------------------------------------------------

def key_to_json(key) -> dict:
    return key.to_json()


def key_from_json(doc: dict):
    """Rebuild a PublicKey, or a ``(pk, sk)`` pair when secret material is present."""
    scheme = Scheme(doc["scheme"])
    N = from_hex(doc["N"])
    pub = doc["public"]
    if scheme is Scheme.PAILLIER_LIKE:
        if from_hex(pub["g"]) != N + 1:
            raise ParameterError("only g = N + 1 Paillier keys are supported")
        pk = PublicKey(doc["key_id"], scheme, N, N)
    else:
        pk = PublicKey(doc["key_id"], scheme, N, from_hex(pub["n"]), from_hex(pub["y"]))
    if "secret" not in doc:
        return pk
    sec = doc["secret"]
    return pk, SecretKey(pk.key_id, scheme, N, from_hex(sec["p"]), from_hex(sec["q"]), pk)


# ---------------------------------------------------------------------------
# modulus chains
# ---------------------------------------------------------------------------

def modulus_hypothesis_violations(moduli: Sequence[int], product_bound: int) -> list[int]:
    """Links of a ring whose moduli break exact decrypt/re-encrypt unwinding.

    ``moduli`` are ``N_2..N_m`` in ring order and ``product_bound`` bounds
    each ``u_i v_i``.  Returns the player indices ``i`` (2-based) whose
    inequality fails: ``(m-1)P < N_2`` for ``i = 2`` and
    ``N_{i-1} + (m-i+1)P < N_i`` otherwise.
    """
    m = len(moduli) + 1
    bad = []
    if not (m - 1) * product_bound < moduli[0]:
        bad.append(2)
    for i in range(3, m + 1):
        if not moduli[i - 3] + (m - i + 1) * product_bound < moduli[i - 2]:
            bad.append(i)
    return bad


@dataclass(frozen=True)
class ModulusChain:
    """Per-player Paillier keys for ``P_2..P_n`` in increasing modulus order."""

    public_keys: tuple
    B: int
    d: int = 1
    secret_keys: tuple = field(default=(), repr=False, compare=False)
    ceiling: int = 0

    @property
    def moduli(self) -> list[int]:
        return [pk.N for pk in self.public_keys]

    @property
    def product_bound(self) -> int:
        return self.d * self.B * self.B

    def __len__(self) -> int:
        return len(self.public_keys)

    def violations(self) -> list[int]:
        return modulus_hypothesis_violations(self.moduli, self.product_bound)

    def is_valid(self) -> bool:
        return not self.violations()


def chain_intervals(n: int, B: int, d: int = 1, bit_slack: int = 8) -> list[tuple[int, int]]:
    """Disjoint ``[lo, 2lo)`` target intervals for ``P_2..P_n``.

    Consecutive intervals are separated by at least ``3dB^2`` (and by the
    ring's own ``(n-i+1)dB^2``), so every increasing sub-chain of up to three
    ring players, as used by the block protocols, also satisfies the
    modulus hypothesis.
    """
    if n < 3 or B < 1 or d < 1 or bit_slack < 0:
        raise ParameterError("need n >= 3, B >= 1, d >= 1, bit_slack >= 0")
    P = d * B * B
    lo = (max(n - 1, 3) * P + 1) << bit_slack
    out = [(lo, 2 * lo)]
    for i in range(3, n + 1):
        lo = out[-1][1] + max(n - i + 1, 3) * P
        out.append((lo, 2 * lo))
    return out


def build_modulus_chain(n: int, B: int, d: int = 1, bit_slack: int = 8, rng=None) -> ModulusChain:
    rng = _as_rng(rng)
    pks, sks = [], []
    intervals = chain_intervals(n, B, d, bit_slack)
    for interval in intervals:
        pk, sk = paillier_keygen(interval=interval, rng=rng)
        pks.append(pk)
        sks.append(sk)
    return ModulusChain(tuple(pks), B, d, tuple(sks), ceiling=intervals[-1][1])


def master_keygen(chain: ModulusChain, rng=None):
    """Key for the party that receives the final ring value: ``N`` above every chain modulus."""
    top = chain.ceiling or 2 * max(chain.moduli)
    return paillier_keygen(interval=(top, 2 * top), rng=rng)
