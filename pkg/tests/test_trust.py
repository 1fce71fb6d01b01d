import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ringdot.errors import AlgebraError, ParameterError, RangeError
from ringdot.hom_cipher import shared_modulus_keygen
from ringdot.trust import (
    PrecisionParams,
    TrustPair,
    coefficient_bound,
    decode_trust,
    decrypt_pair,
    encode_trust,
    encrypt_pair,
    hom_par_agg,
    hom_seq_agg,
    is_par_invertible,
    par_agg,
    par_invert,
    par_neutral,
    random_invertible_pair,
    reachable_coefficients,
    seq_agg,
    seq_neutral,
)

BIG = 10**9 + 7


def T(a, b, N=BIG):
    return TrustPair(a, b, N)


class TestAlgebra:
    def test_seq_examples(self):
        assert seq_agg(T(1, 0), T(5, 6)) == T(5, 6)
        assert seq_agg(T(3, 2), T(4, 1)) == T(14, 11)
        assert seq_agg(T(0, 0), T(5, 6)) == T(0, 0)

    def test_par_examples(self):
        assert par_agg(T(0, 1), T(5, 6)) == T(5, 6)
        assert par_agg(T(3, 2, 7), T(5, 4, 7)) == T(0, 1, 7)

    def test_ring_mismatch(self):
        with pytest.raises(AlgebraError):
            seq_agg(T(1, 1, 7), T(1, 1, 11))
        with pytest.raises(AlgebraError):
            par_agg(T(1, 1, 7), T(1, 1, 11))

    def test_invert_examples(self):
        assert par_invert(T(0, 1, 7)) == T(0, 1, 7)
        assert par_invert(T(3, 2, 7)) == T(5, 4, 7)
        assert par_invert(T(1, 1, 7)) is None
        assert str(T(3, 2, 7)) == "⟨3,2⟩"

    def test_invertibility_matches_brute_force(self):
        """Exhaustive search for a parallel inverse over every Z_m, m <= 50."""
        for m in range(2, 51):
            r = np.arange(m)
            # a + c - a c = 0 has a solution c, and b d = 1 has a solution d
            a_ok = ((r[:, None] + r[None, :] - r[:, None] * r[None, :]) % m == 0).any(axis=1)
            b_ok = ((r[:, None] * r[None, :]) % m == 1 % m).any(axis=1)
            for a in range(m):
                for b in range(m):
                    expected = bool(a_ok[a] and b_ok[b])
                    assert is_par_invertible(a, b, m) == expected, (m, a, b)
                    inv = par_invert(TrustPair(a, b, m))
                    assert (inv is not None) == expected
                    if inv is not None:
                        assert par_agg(TrustPair(a, b, m), inv) == par_neutral(m)

    def test_random_invertible_pair(self):
        rng = random.Random(1)
        for N in (7, 8, 15, BIG):
            x = random_invertible_pair(N, rng)
            assert par_agg(x, par_invert(x)) == par_neutral(N)


pairs = st.builds(lambda a, b: T(a, b), st.integers(0, BIG - 1), st.integers(0, BIG - 1))


@settings(max_examples=200, deadline=None)
@given(x=pairs, y=pairs, z=pairs)
def test_monoid_laws(x, y, z):
    for op in (seq_agg, par_agg):
        assert op(op(x, y), z) == op(x, op(y, z))
        assert op(x, y) == op(y, x)
    assert seq_agg(seq_neutral(BIG), x) == x
    assert par_agg(par_neutral(BIG), x) == x
    inv = par_invert(x)
    if inv is not None:
        assert par_agg(inv, x) == par_neutral(BIG)


class TestEncoding:
    def test_bound(self):
        assert coefficient_bound(1, 2) == 64
        assert coefficient_bound(255, 4) == 2 ** (4 * 511)
        with pytest.raises(ParameterError):
            PrecisionParams(8, 4, 2 ** 68)
        PrecisionParams(8, 4, 2 ** 68 + 1)

    def test_encode_decode(self):
        P = PrecisionParams(8, 1, 2**20)
        assert encode_trust(0.5, P) == 128
        assert encode_trust(0, P) == 0
        assert encode_trust(1, P) == 256
        assert encode_trust(Fraction(1, 3), P) == 85
        with pytest.raises(RangeError):
            encode_trust(1.5, P)
        assert decode_trust(128, P) == 0.5
        assert decode_trust(0, P) == 0.0
        assert decode_trust(P.N - 1, P) == -(2.0 ** -8)

    @pytest.mark.parametrize("p", [1, 2, 3])
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_reachable_coefficients_below_bound(self, p, n):
        xs, ys = reachable_coefficients(p, n)
        bound = coefficient_bound(p, n)
        assert np.abs(xs).max() < bound and np.abs(ys).max() < bound

    def test_random_aggregation_below_bound(self):
        """Exact integer aggregation of random products, independent of the exhaustive sweep."""
        rng = random.Random(6)
        for _ in range(2000):
            p, n = rng.randint(1, 3), rng.randint(1, 4)
            top = (1 << p) - 1
            a, b = 0, 1
            for _ in range(n):
                x = [rng.randint(0, top) for _ in range(4)]
                c, d = x[0] * x[2] + x[1] * x[3], x[0] * x[3] + x[1] * x[2]
                a, b = a + c - a * c, b * d
            assert abs(a) < coefficient_bound(p, n) and abs(b) < coefficient_bound(p, n)


@pytest.fixture(scope="module")
def trust_key():
    return shared_modulus_keygen(7919, 128, random.Random(7919))


class TestHomomorphicPairs:
    def test_examples(self, trust_key):
        pk, sk = trust_key
        rng = random.Random(1)
        N = pk.N
        ex = encrypt_pair(pk, TrustPair(3, 2, N), rng)
        assert decrypt_pair(sk, hom_seq_agg(ex, TrustPair(4, 1, N))) == TrustPair(14, 11, N)
        assert decrypt_pair(sk, hom_seq_agg(ex, seq_neutral(N))) == TrustPair(3, 2, N)
        assert decrypt_pair(sk, hom_par_agg(ex, par_neutral(N), rng)) == TrustPair(3, 2, N)
        assert decrypt_pair(sk, hom_par_agg(ex, TrustPair(5, 4, N), rng)) == par_agg(TrustPair(3, 2, N), TrustPair(5, 4, N))

    def test_random_trials(self, trust_key):
        pk, sk = trust_key
        rng = random.Random(2)
        N = pk.N
        for _ in range(300):
            x = TrustPair(rng.randrange(N), rng.randrange(N), N)
            y = TrustPair(rng.randrange(N), rng.randrange(N), N)
            ex = encrypt_pair(pk, x, rng)
            assert decrypt_pair(sk, hom_seq_agg(ex, y)) == seq_agg(x, y)
            assert decrypt_pair(sk, hom_par_agg(ex, y, rng)) == par_agg(x, y)

    def test_wrong_ring(self, trust_key):
        pk, _ = trust_key
        ex = encrypt_pair(pk, TrustPair(1, 1, pk.N), random.Random())
        with pytest.raises(AlgebraError):
            hom_seq_agg(ex, TrustPair(1, 1, 7))
        with pytest.raises(AlgebraError):
            encrypt_pair(pk, TrustPair(1, 1, 7), random.Random())

    def test_json(self):
        x = TrustPair(3, 255, 1000)
        assert x.to_json() == {"a": "3", "b": "ff"}
        assert TrustPair.from_json(x.to_json(), 1000) == x
