"""(trust, distrust) pairs over Z_N with sequential and parallel aggregation.

Sequential aggregation ``x * y`` composes trust along a path and parallel
aggregation ``x + y`` merges disjoint paths::

    <a,b> * <c,d> = <ac + bd, ad + bc>        neutral <1,0>
    <a,b> + <c,d> = <a + c - ac, bd>          neutral <0,1>

Both lift to ciphertext pairs when the right operand is in clear.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .codec import from_hex, to_hex
from .errors import AlgebraError, ConfigurationError, KeyMismatchError, ParameterError, RangeError
from .hom_cipher import Ciphertext, PublicKey, SecretKey, decrypt, encrypt, hom_add, hom_scale


@dataclass(frozen=True)
class TrustPair:
    a: int
    b: int
    N: int

    def __post_init__(self):
        if self.N < 2:
            raise ParameterError("trust ring modulus must be at least 2")
        if not (0 <= self.a < self.N and 0 <= self.b < self.N):
            raise RangeError(f"<{self.a},{self.b}> outside Z_{self.N}")

    @classmethod
    def of(cls, a: int, b: int, N: int) -> "TrustPair":
        return cls(a % N, b % N, N)

    def __str__(self) -> str:
        return f"⟨{self.a},{self.b}⟩"

    def to_json(self) -> dict:
        return {"a": to_hex(self.a), "b": to_hex(self.b)}

    @classmethod
    def from_json(cls, doc: dict, N: int) -> "TrustPair":
        return cls(from_hex(doc["a"]), from_hex(doc["b"]), N)


def seq_neutral(N: int) -> TrustPair:
    return TrustPair(1, 0, N)


def par_neutral(N: int) -> TrustPair:
    return TrustPair(0, 1, N)


def _same_ring(x: TrustPair, y: TrustPair) -> int:
    if x.N != y.N:
        raise AlgebraError(f"pairs over Z_{x.N} and Z_{y.N} cannot be combined")
    return x.N


def seq_agg(x: TrustPair, y: TrustPair) -> TrustPair:
    N = _same_ring(x, y)
    return TrustPair((x.a * y.a + x.b * y.b) % N, (x.a * y.b + x.b * y.a) % N, N)


def par_agg(x: TrustPair, y: TrustPair) -> TrustPair:
    N = _same_ring(x, y)
    return TrustPair((x.a + y.a - x.a * y.a) % N, x.b * y.b % N, N)


def is_par_invertible(a: int, b: int, N: int) -> bool:
    a, b = a % N, b % N
    return math.gcd(b, N) == 1 and (a == 0 or math.gcd(a - 1, N) == 1)


def par_invert(x: TrustPair) -> Optional[TrustPair]:
    """Inverse for parallel aggregation, or None when none exists."""
    N = x.N
    if not is_par_invertible(x.a, x.b, N):
        return None
    binv = pow(x.b, -1, N)
    if x.a == 0:
        return TrustPair(0, binv, N)
    return TrustPair(x.a * pow(x.a - 1, -1, N) % N, binv, N)


def random_invertible_pair(N: int, rng: random.Random, max_tries: int = 1000) -> TrustPair:
    for _ in range(max_tries):
        a, b = rng.randrange(N), rng.randrange(N)
        if is_par_invertible(a, b, N):
            return TrustPair(a, b, N)
    raise ConfigurationError(f"no invertible mask found over Z_{N} after {max_tries} draws")


# ---------------------------------------------------------------------------
# fixed-precision encoding
# ---------------------------------------------------------------------------

def coefficient_bound(p: int, n: int) -> int:
    """Bound on |coefficients| after parallel aggregation of ``n`` sequential products."""
    if p < 1 or n < 1:
        raise ParameterError("need p >= 1 and n >= 1")
    return 1 << (n * (2 * p + 1))


@dataclass(frozen=True)
class PrecisionParams:
    p: int
    n: int
    N: int

    def __post_init__(self):
        if coefficient_bound(self.p, self.n) >= self.N:
            raise ParameterError(f"2^(n(2p+1)) = 2^{self.n * (2 * self.p + 1)} does not fit below N")


def encode_trust(x, params: PrecisionParams) -> int:
    fx = Fraction(x)
    if not 0 <= fx <= 1:
        raise RangeError(f"trust value {x} outside [0, 1]")
    return math.floor(fx * (1 << params.p)) % params.N


def balanced(v: int, N: int) -> int:
    v %= N
    return v - N if 2 * v >= N else v


def decode_trust(v: int, params: PrecisionParams, scale_exponent: int = 1) -> float:
    return float(Fraction(balanced(v, params.N), 1 << (params.p * scale_exponent)))


def reachable_coefficients(p: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Every integer value either coefficient can take after aggregating ``n`` products.

    Inputs range over pairs with components in ``[0, 2^p - 1]``; the first
    coefficient of the aggregate is ``1 - prod(1 - x_k)`` and the second
    ``prod(y_k)``, where ``(x_k, y_k)`` are sequential products.
    """
    if p < 1 or n < 1:
        raise ParameterError("need p >= 1 and n >= 1")
    c = np.arange(1 << p, dtype=np.int64)
    a, b, cc, d = np.meshgrid(c, c, c, c, indexing="ij")
    xs = np.unique(a * cc + b * d)
    ys = np.unique(a * d + b * cc)
    one_minus = 1 - xs
    prod_x, prod_y = one_minus, ys
    for _ in range(n - 1):
        prod_x = np.unique(np.multiply.outer(prod_x, one_minus).ravel())
        prod_y = np.unique(np.multiply.outer(prod_y, ys).ravel())
    return 1 - prod_x, prod_y


# ---------------------------------------------------------------------------
# enciphered pairs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrustCipherPair:
    ea: Ciphertext
    eb: Ciphertext

    def __post_init__(self):
        if self.ea.key_id != self.eb.key_id:
            raise AlgebraError("pair components encrypted under different keys")

    @property
    def pk(self) -> PublicKey:
        return self.ea.pk


def encrypt_pair(pk: PublicKey, x: TrustPair, rng) -> TrustCipherPair:
    if x.N != pk.N:
        raise AlgebraError(f"pair over Z_{x.N} does not match key modulus {pk.N}")
    return TrustCipherPair(encrypt(pk, x.a, rng), encrypt(pk, x.b, rng))


def decrypt_pair(sk: SecretKey, ex: TrustCipherPair) -> TrustPair:
    return TrustPair(decrypt(sk, ex.ea), decrypt(sk, ex.eb), sk.N)


def _clear_operand(ex: TrustCipherPair, y: TrustPair) -> int:
    N = ex.pk.N
    if y.N != N:
        raise AlgebraError(f"clear pair over Z_{y.N} does not match key modulus {N}")
    return N


def hom_seq_agg(ex: TrustCipherPair, y: TrustPair) -> TrustCipherPair:
    """Encryption of ``x * y`` from ``E(x)`` and clear ``y``."""
    _clear_operand(ex, y)
    try:
        first = hom_add(hom_scale(ex.ea, y.a), hom_scale(ex.eb, y.b))
        second = hom_add(hom_scale(ex.ea, y.b), hom_scale(ex.eb, y.a))
    except KeyMismatchError as exc:
        raise AlgebraError(str(exc)) from exc
    return TrustCipherPair(first, second)


def hom_par_agg(ex: TrustCipherPair, y: TrustPair, rng=None) -> TrustCipherPair:
    """Encryption of ``x + y`` from ``E(x)`` and clear ``y``; ``E(c)`` is drawn with ``rng``."""
    N = _clear_operand(ex, y)
    rng = rng if rng is not None else random.Random()
    try:
        first = hom_add(hom_add(ex.ea, encrypt(ex.pk, y.a, rng)), hom_scale(ex.ea, (-y.a) % N))
    except KeyMismatchError as exc:
        raise AlgebraError(str(exc)) from exc
    return TrustCipherPair(first, hom_scale(ex.eb, y.b))
