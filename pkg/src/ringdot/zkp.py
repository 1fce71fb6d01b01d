"""Discrete-log check that a masked ciphertext is a non-trivial affine image ``u*v + r``.

The prover publishes ``mu = g^u`` and ``rho = g^r``.  A verifier holding ``v``
and the decryption ``delta`` of the ciphertext accepts when ``mu`` and ``rho``
avoid ``{1, g}`` and ``g^delta = mu^v * rho * delta_prev``, where
``delta_prev = g^(previous partial sum)`` chains the checks along a ring.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .group import SchnorrGroup
from .hom_cipher import Ciphertext, encrypt, hom_add, hom_scale


@dataclass(frozen=True)
class AffineProofBundle:
    alpha: Ciphertext
    mu: int
    rho: int


@dataclass(frozen=True)
class ChainedCheckState:
    delta_prev: int


@dataclass(frozen=True)
class AffineCheck:
    accepted: bool
    reason: str
    state: Optional[ChainedCheckState]

    def __bool__(self) -> bool:
        return self.accepted


def make_affine_proof(u: int, r: int, v_cipher: Ciphertext, group: SchnorrGroup, rng) -> AffineProofBundle:
    """``alpha = v_cipher^u * E(r)`` together with ``g^u`` and ``g^r``."""
    alpha = hom_add(hom_scale(v_cipher, u), encrypt(v_cipher.pk, r, rng))
    return AffineProofBundle(alpha, group.exp(u), group.exp(r))


def check_nontrivial(group: SchnorrGroup, mu: int, rho: int) -> Optional[str]:
    for name, x in (("mu", mu), ("rho", rho)):
        if not group.is_element(x):
            return f"{name} is not a group element"
        if x == 1 or x == group.g:
            return f"{name} is trivial"
    return None


def verify_affine_step(
    mu: int,
    rho: int,
    v: int,
    delta: int,
    chained: Optional[ChainedCheckState],
    group: SchnorrGroup,
    modulus: Optional[int] = None,
) -> AffineCheck:
    """Check one ring step.

    The decrypted ``delta`` is the running sum ``delta_prev + u*v + r``
    reduced modulo the plaintext ``modulus``.  Each of the three terms is
    below the modulus, so the relation is tested for ``delta + k*modulus``
    with ``k`` in ``{0, 1, 2}``.
    """
    bad = check_nontrivial(group, mu, rho)
    if bad:
        return AffineCheck(False, bad, None)
    rhs = group.mul(group.power(mu, v), rho, chained.delta_prev if chained else 1)
    shifts = (0, 1, 2) if modulus else (0,)
    for k in shifts:
        if group.exp(delta + k * (modulus or 0)) == rhs:
            return AffineCheck(True, "ok", ChainedCheckState(group.exp(delta)))
    return AffineCheck(False, "affine relation does not hold", None)
