"""Distributed dot-product protocols on the simulated network.

* ``run_dsdp``: the linear ring protocol.  Ring members send ``E_i(v_i)`` to
  the master, the master returns masked ``E_i(u_i v_i + r_i)``, the ring
  accumulates the masked sum by decrypt/re-encrypt and the master removes
  the masks.
* ``run_esdp``: the same ring without the master's own term.
* ``run_mpwp`` / ``run_pmpwp``: the weighted-sum protocols with additive
  share matrices, circulated in full or sent point to point.

All ring runs are built from :func:`ring_dot_procs`, which returns one
generator per player so several instances can share one network round.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .codec import from_hex, to_hex
from .errors import HypothesisError, ParameterError, ProtocolAbort, RangeError
from .group import SchnorrGroup, default_group
from .hom_cipher import (
    Ciphertext,
    DEFAULT_SEARCH_BOUND,
    ciphertext_from_int,
    decrypt,
    encrypt,
    hom_add,
    hom_scale,
    modulus_hypothesis_violations,
)
from .netsim import (
    PAILLIER_CHAIN,
    SHARED_MODULUS,
    MODES,
    KeyDirectory,
    Metrics,
    Network,
    build_key_directory,
    metrics_snapshot,
)
from .trust import (
    TrustCipherPair,
    TrustPair,
    decrypt_pair,
    encrypt_pair,
    hom_par_agg,
    hom_seq_agg,
    par_agg,
    par_invert,
    random_invertible_pair,
)
from .zkp import ChainedCheckState, make_affine_proof, verify_affine_step

PROTOCOLS = ("dsdp", "esdp", "mpwp", "pmpwp", "wiretap")


# ---------------------------------------------------------------------------
# instances and results
# ---------------------------------------------------------------------------

@dataclass
class DotProductInstance:
    """``U`` is held by ``P_1``; ``V[i-1]`` is the private coefficient of ``P_i``."""

    n: int
    U: list
    V: list
    B: int
    mode: str = PAILLIER_CHAIN
    proofs: bool = False
    signatures: bool = False
    protocol: str = "dsdp"
    seed: int = 0
    z_bound: Optional[int] = None

    def __post_init__(self):
        self.U = [int(u) for u in self.U]
        self.V = [int(v) for v in self.V]

    def validate(self) -> None:
        if self.n < 3:
            raise ParameterError("need n >= 3 players")
        if self.mode not in MODES:
            raise ParameterError(f"unknown mode {self.mode!r}")
        if len(self.U) != self.n or len(self.V) != self.n:
            raise ParameterError(f"U and V must both have {self.n} entries")
        if self.B < 0:
            raise ParameterError("B must be non-negative")
        for name, vec in (("U", self.U), ("V", self.V)):
            for i, x in enumerate(vec, start=1):
                if not 0 <= x <= self.B:
                    raise HypothesisError(f"{name}[{i}] = {x} outside [0, {self.B}]")

    def dot(self) -> int:
        return sum(u * v for u, v in zip(self.U, self.V))

    def ring_dot(self) -> int:
        return sum(u * v for u, v in zip(self.U[1:], self.V[1:]))

    @classmethod
    def random(cls, n: int, B: int, rng: random.Random, **kw) -> "DotProductInstance":
        lo = 2 if kw.get("proofs") else 0
        if lo > B:
            raise ParameterError("proofs need B >= 2 so that coefficients avoid {0, 1}")
        U = [rng.randint(lo, B) for _ in range(n)]
        V = [rng.randint(0, B) for _ in range(n)]
        return cls(n, U, V, B, **kw)

    def to_json(self) -> dict:
        return {
            "protocol": self.protocol,
            "n": self.n,
            "B": self.B,
            "mode": self.mode,
            "seed": self.seed,
            "proofs": self.proofs,
            "signatures": self.signatures,
            "U": [to_hex(u) for u in self.U],
            "V": [to_hex(v) for v in self.V],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DotProductInstance":
        return cls(
            n=int(doc["n"]),
            U=[from_hex(x) for x in doc["U"]],
            V=[from_hex(x) for x in doc["V"]],
            B=int(doc["B"]),
            mode=doc.get("mode", PAILLIER_CHAIN),
            proofs=bool(doc.get("proofs", False)),
            signatures=bool(doc.get("signatures", False)),
            protocol=doc.get("protocol", "dsdp"),
            seed=int(doc.get("seed", 0)),
        )


@dataclass
class DotResult:
    S: int
    metrics: Metrics
    trace: list = field(default_factory=list)
    deltas: dict = field(default_factory=dict)
    masks: dict = field(default_factory=dict)
    scope: str = ""


@dataclass
class RingOutcome:
    """What the master of one ring instance obtains."""

    value: object
    trace: list
    masks: dict


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _await(net: Network, pid: int, tag: str, label: str):
    while True:
        msg = net.take(pid, tag)
        if msg is not None:
            return msg
        yield label


def _cipher(pid: int, pk, value, step: str) -> Ciphertext:
    try:
        return ciphertext_from_int(pk, value)
    except (RangeError, TypeError) as exc:
        raise ProtocolAbort(pid, step, f"malformed ciphertext: {exc}") from None


def draw_mask(rng: random.Random, N: int, proofs: bool, group: Optional[SchnorrGroup]) -> int:
    """Mask ``r`` in ``[0, N)``; with proofs it must also avoid ``{0, 1}`` in the exponent group."""
    if not proofs:
        return rng.randrange(N)
    if N <= 2:
        raise HypothesisError("plaintext modulus too small for non-trivial masks")
    while True:
        r = rng.randrange(2, N)
        if r % group.q not in (0, 1):
            return r


class _IntegerOps:
    """Ring arithmetic on single ciphertexts."""

    def __init__(self, proofs: bool, group: Optional[SchnorrGroup]):
        self.proofs = proofs
        self.group = group

    def enc(self, pk, x, rng):
        return encrypt(pk, x, rng)

    def wire(self, c) -> object:
        return c.value

    def unwire(self, pid, pk, value, step):
        return _cipher(pid, pk, value, step)

    def dec(self, sk, c):
        return decrypt(sk, c)

    def mask(self, pk, rng):
        return draw_mask(rng, pk.N, self.proofs, self.group)

    def alpha(self, c, u, r, rng):
        return hom_add(hom_scale(c, u % c.pk.N), encrypt(c.pk, r, rng))

    def beta(self, alpha, delta, rng):
        return hom_add(alpha, encrypt(alpha.pk, delta, rng))

    def fits(self, delta, pk) -> bool:
        return 0 <= delta < pk.N


class _TrustOps:
    """Ring arithmetic on enciphered trust pairs over a shared plaintext ring."""

    proofs = False
    group = None

    def enc(self, pk, x: TrustPair, rng):
        return encrypt_pair(pk, x, rng)

    def wire(self, c: TrustCipherPair) -> object:
        return [c.ea.value, c.eb.value]

    def unwire(self, pid, pk, value, step):
        if not isinstance(value, list) or len(value) != 2:
            raise ProtocolAbort(pid, step, "malformed ciphertext pair")
        return TrustCipherPair(_cipher(pid, pk, value[0], step), _cipher(pid, pk, value[1], step))

    def dec(self, sk, c):
        return decrypt_pair(sk, c)

    def mask(self, pk, rng):
        return random_invertible_pair(pk.N, rng)

    def alpha(self, c, u: TrustPair, r: TrustPair, rng):
        return hom_par_agg(hom_seq_agg(c, u), r, rng)

    def beta(self, alpha, delta: TrustPair, rng):
        return hom_par_agg(alpha, delta, rng)

    def fits(self, delta, pk) -> bool:
        return delta.N == pk.N


# ---------------------------------------------------------------------------
# ring engine
# ---------------------------------------------------------------------------

def ring_dot_procs(
    net: Network,
    scope: str,
    master: int,
    ring: Sequence[int],
    U: Sequence,
    V: dict,
    *,
    proofs: bool = False,
    trust: bool = False,
    group: Optional[SchnorrGroup] = None,
):
    """Generators for one ring instance; the master's returns a :class:`RingOutcome`.

    ``ring`` lists the members in ring order (positions ``2..m``), ``U`` the
    master's coefficients in the same order and ``V`` maps member id to its
    private coefficient.
    """
    if len(ring) != len(U) or len(ring) < 2:
        raise ParameterError("ring and U must have the same length >= 2")
    if len(set(ring)) != len(ring) or master in ring:
        raise ParameterError("ring members must be distinct and exclude the master")
    group = group or (default_group() if proofs else None)
    ops = _TrustOps() if trust else _IntegerOps(proofs, group)
    procs = [(master, _master_proc(net, scope, master, list(ring), list(U), ops))]
    for k, pid in enumerate(ring, start=2):
        procs.append((pid, _member_proc(net, scope, master, list(ring), k, V[pid], ops)))
    return procs


def _master_proc(net: Network, scope: str, master: int, ring: list, U: list, ops):
    keys: KeyDirectory = net.keys
    rng = net.rng(master, scope)
    m = len(ring) + 1
    pks = {k: keys.ring_pk(pid) for k, pid in enumerate(ring, start=2)}
    cs = {}
    for k in range(2, m + 1):
        msg = yield from _await(net, master, f"{scope}/c/{k}", "c")
        cs[k] = ops.unwire(master, pks[k], msg.fields()["c"], "c")
    masks, sends = {}, {}
    for k in range(2, m + 1):
        r = ops.mask(pks[k], rng)
        masks[k] = r
        u = U[k - 2]
        fields = {}
        if ops.proofs:
            bundle = make_affine_proof(u, r, cs[k], ops.group, rng)
            fields = {"alpha": bundle.alpha.value, "mu": bundle.mu, "rho": bundle.rho}
        else:
            fields = {"alpha": ops.wire(ops.alpha(cs[k], u, r, rng))}
        sends[k] = fields
    net.record_private(master, scope, u=list(U), r=dict(masks))
    net.send(master, ring[0], f"{scope}/alpha/2", sends[2])
    for k in range(3, m + 1):
        net.send(master, ring[k - 3], f"{scope}/alpha/{k}", sends[k])
    msg = yield from _await(net, master, f"{scope}/gamma", "gamma")
    mpk, msk = keys.master_pk(master), keys.master_sk(master)
    top = ops.dec(msk, ops.unwire(master, mpk, msg.fields()["gamma"], "gamma"))
    return RingOutcome(*_unwind(top, masks, pks, keys.mode, trust=isinstance(ops, _TrustOps)), masks)


def _unwind(top, masks: dict, pks: dict, mode: str, trust: bool):
    if trust:
        s = top
        for k in sorted(masks):
            s = par_agg(s, par_invert(masks[k]))
        return s, [top, s]
    if mode == SHARED_MODULUS:
        M = next(iter(pks.values())).N
        s = (top - sum(masks.values())) % M
        return s, [top, s]
    s, trace = top, [top]
    for k in sorted(masks, reverse=True):
        s = (s - masks[k]) % pks[k].N
        trace.append(s)
    return s, trace


def _member_proc(net: Network, scope: str, master: int, ring: list, k: int, v, ops):
    keys: KeyDirectory = net.keys
    pid = ring[k - 2]
    m = len(ring) + 1
    pk, sk = keys.ring_pk(pid), keys.ring_sk(pid)
    rng = net.rng(pid, scope)
    net.send(pid, master, f"{scope}/c/{k}", {"c": ops.wire(ops.enc(pk, v, rng))})
    yield "alpha"
    chained = None
    if k == 2:
        msg = yield from _await(net, pid, f"{scope}/alpha/2", "alpha")
        f = msg.fields()
        delta = ops.dec(sk, ops.unwire(pid, pk, f["alpha"], "alpha"))
        mu, rho = f.get("mu"), f.get("rho")
        step = "alpha"
    else:
        msg = yield from _await(net, pid, f"{scope}/beta/{k}", "beta")
        f = msg.fields()
        delta = ops.dec(sk, ops.unwire(pid, pk, f["beta"], "beta"))
        mu, rho = f.get("mu"), f.get("rho")
        if ops.proofs:
            if f.get("delta") is None:
                raise ProtocolAbort(pid, "beta", "missing chained check value")
            chained = ChainedCheckState(f["delta"])
        step = "beta"
    if ops.proofs:
        if mu is None or rho is None:
            raise ProtocolAbort(pid, step, "missing affine proof")
        check = verify_affine_step(mu, rho, v, delta, chained, ops.group, pk.N)
        if not check:
            raise ProtocolAbort(pid, "affine-check", check.reason, {"scope": scope, "position": k})
        chained = check.state
    net.record_private(pid, scope, v=v, delta=delta)
    if k < m:
        msg = yield from _await(net, pid, f"{scope}/alpha/{k + 1}", "alpha")
        f = msg.fields()
        nxt = ring[k - 1]
        npk = keys.ring_pk(nxt)
        if not ops.fits(delta, npk):
            raise ProtocolAbort(pid, "beta", "partial sum does not fit the next modulus")
        alpha = ops.unwire(pid, npk, f["alpha"], "alpha")
        out = {"beta": ops.wire(ops.beta(alpha, delta, rng))}
        if ops.proofs:
            out.update(delta=chained.delta_prev, mu=f.get("mu"), rho=f.get("rho"))
        net.send(pid, nxt, f"{scope}/beta/{k + 1}", out)
    else:
        mpk = keys.master_pk(master)
        if not ops.fits(delta, mpk):
            raise ProtocolAbort(pid, "gamma", "final sum does not fit the master modulus")
        net.send(pid, master, f"{scope}/gamma", {"gamma": ops.wire(ops.enc(mpk, delta, rng))})
    return delta


# ---------------------------------------------------------------------------
# preconditions
# ---------------------------------------------------------------------------

def check_ring_moduli(keys: KeyDirectory, master: int, ring: Sequence[int], product_bound: int) -> None:
    """Raise :class:`HypothesisError` unless the ring can unwind exactly."""
    moduli = [keys.ring_pk(pid).N for pid in ring]
    m = len(ring) + 1
    if keys.mode == SHARED_MODULUS:
        M = keys.master_pk(master).N
        if any(N != M for N in moduli):
            raise HypothesisError("shared-modulus players disagree on M")
        if not (m - 1) * product_bound < M:
            raise HypothesisError(f"(n-1)B^2 = {(m - 1) * product_bound} is not below M = {M}")
        return
    bad = modulus_hypothesis_violations(moduli, product_bound)
    if bad:
        raise HypothesisError(f"ring moduli violate the chain inequalities at positions {bad}")
    if not keys.master_pk(master).N > moduli[-1]:
        raise HypothesisError("master modulus must exceed the last ring modulus")


def _check_proof_inputs(U: Sequence[int]) -> None:
    bad = [i for i, u in enumerate(U, start=2) if u in (0, 1)]
    if bad:
        raise HypothesisError(f"affine proofs need coefficients outside {{0, 1}}; u at positions {bad}")


def network_for(inst: DotProductInstance, *, all_ring: bool = False, d: int = 1, bit_slack: int = 32,
                search_bound: int = DEFAULT_SEARCH_BOUND, M: Optional[int] = None, mode: Optional[str] = None) -> Network:
    keys = build_key_directory(inst.n, mode or inst.mode, inst.B, d, all_ring=all_ring, bit_slack=bit_slack,
                               M=M, search_bound=search_bound, seed=inst.seed)
    return Network(inst.n, keys, inst.seed, inst.signatures)


def _run(net: Network, procs, protocol: str, scope: str):
    start = len(net.transcript)
    try:
        results = net.run(procs)
    except ProtocolAbort as exc:
        raise exc.with_context(protocol=protocol, scope=scope) from None
    return results, metrics_snapshot(net, start)


# ---------------------------------------------------------------------------
# DSDP / ESDP
# ---------------------------------------------------------------------------

def run_dsdp(inst: DotProductInstance, net: Optional[Network] = None, *, check: bool = True) -> DotResult:
    """``P_1`` learns ``sum_i u_i v_i``; ``check=False`` skips the modulus hypotheses."""
    inst.validate()
    net = net or network_for(inst)
    net.signatures = inst.signatures
    ring = list(range(2, inst.n + 1))
    if check:
        check_ring_moduli(net.keys, 1, ring, inst.B * inst.B)
    if inst.proofs:
        _check_proof_inputs(inst.U[1:])
    scope = net.new_scope("dsdp")
    V = {pid: inst.V[pid - 1] for pid in ring}
    procs = ring_dot_procs(net, scope, 1, ring, inst.U[1:], V, proofs=inst.proofs)
    results, metrics = _run(net, procs, "dsdp", scope)
    out: RingOutcome = results[0]
    deltas = {k: results[k - 1] for k in range(2, inst.n + 1)}
    return DotResult(out.value + inst.U[0] * inst.V[0], metrics, out.trace, deltas, out.masks, scope)


def run_esdp(master: int, others: Sequence[int], U: Sequence[int], V: Sequence[int], net: Network,
             *, proofs: bool = False, B: Optional[int] = None) -> DotResult:
    """``U^T V`` for the master's ``U`` and the others' ``V``, without any term of the master's own."""
    others = list(others)
    if len(others) != len(U) or len(U) != len(V):
        raise ParameterError("others, U and V must have equal length")
    bound = B if B is not None else max(list(U) + list(V) + [0])
    check_ring_moduli(net.keys, master, others, bound * bound)
    if proofs:
        _check_proof_inputs(U)
    scope = net.new_scope("esdp")
    procs = ring_dot_procs(net, scope, master, others, list(U), dict(zip(others, V)), proofs=proofs)
    results, metrics = _run(net, procs, "esdp", scope)
    out: RingOutcome = results[0]
    deltas = {k: results[k - 1] for k in range(2, len(others) + 2)}
    return DotResult(out.value, metrics, out.trace, deltas, out.masks, scope)


def dsdp_unwind_oracle(moduli: Sequence[int], master_modulus: int, U: Sequence[int], V: Sequence[int],
                       masks: Sequence[int]) -> int:
    """Plaintext replay of the chain-mode ring: what ``P_1`` computes for given masks.

    ``U``, ``V`` and ``masks`` cover ring positions ``2..m``.
    """
    delta = 0
    for N, u, v, r in zip(moduli, U, V, masks):
        delta = (delta + u * v + r) % N
    s = delta % master_modulus
    for N, r in zip(reversed(moduli), reversed(masks)):
        s = (s - r) % N
    return s


# ---------------------------------------------------------------------------
# MPWP and P-MPWP
# ---------------------------------------------------------------------------

def pmpwp_moduli_ok(n: int, B: int, N1: int, others: Sequence[int]) -> bool:
    """Strict modulus requirements for exact recovery with shares bounded by ``B``."""
    return (n - 1) * (B * B + B) < N1 and all((n - 1) * B < N for N in others)


def _composition(total: int, parts: int, rng: random.Random) -> list[int]:
    """Uniform split of ``total`` into ``parts`` non-negative integers."""
    cuts = sorted(rng.randint(0, total) for _ in range(parts - 1))
    bounds = [0] + cuts + [total]
    return [b - a for a, b in zip(bounds, bounds[1:])]


def _mpwp_master(net, scope, n, U, full_matrix: bool):
    keys = net.keys
    pk, sk = keys.master_pk(1), keys.master_sk(1)
    rng = net.rng(1, scope)
    TV = [encrypt(pk, u, rng).value for u in U[1:]]
    state = {"TV": TV, "A": 1}
    if full_matrix:
        state["M"] = [[1] * (n - 1) for _ in range(n - 1)]
    net.send(1, 2, f"{scope}/ring/2", state)
    msg = yield from _await(net, 1, f"{scope}/ring/1", "ring")
    final = msg.fields()
    if full_matrix:
        for j in range(2, n + 1):
            net.send(1, j, f"{scope}/matrix/{j}", {"M": final["M"]})
    A = decrypt(sk, _cipher(1, pk, final["A"], "ring"))
    pss = []
    for j in range(2, n + 1):
        msg = yield from _await(net, 1, f"{scope}/gamma/{j}", "gamma")
        pss.append(decrypt(sk, _cipher(1, pk, msg.fields()["gamma"], "gamma")))
    return A, pss


def _mpwp_member(net, scope, n, i, v, z_bound: int, full_matrix: bool):
    keys = net.keys
    rng = net.rng(i, scope)
    mpk = keys.master_pk(1)
    pk, sk = keys.ring_pk(i), keys.ring_sk(i)
    msg = yield from _await(net, i, f"{scope}/ring/{i}", "ring")
    state = msg.fields()
    TVi = _cipher(i, mpk, state["TV"][i - 2], "ring")
    A = _cipher(i, mpk, state["A"], "ring")
    z = rng.randint(0, z_bound)
    A = hom_add(hom_add(A, hom_scale(TVi, v % mpk.N)), encrypt(mpk, z % mpk.N, rng))
    if full_matrix:
        M = keys.M
        shares = [rng.randrange(M) for _ in range(n - 2)]
        shares.append((z - sum(shares)) % M)
    else:
        shares = _composition(z, n - 1, rng)
    net.record_private(i, scope, v=v, z=z, shares=list(shares))
    state["A"] = A.value
    own = shares[i - 2]
    if full_matrix:
        for j in range(2, n + 1):
            state["M"][j - 2][i - 2] = encrypt(keys.ring_pk(j), shares[j - 2], rng).value
    else:
        for j in range(2, n + 1):
            if j != i:
                net.send(i, j, f"{scope}/share/{j}/{i}", {"z": encrypt(keys.ring_pk(j), shares[j - 2], rng).value})
    nxt = i + 1 if i < n else 1
    net.send(i, nxt, f"{scope}/ring/{nxt}", state)
    if full_matrix:
        msg = yield from _await(net, i, f"{scope}/matrix/{i}", "matrix")
        row = msg.fields()["M"][i - 2]
        pss = sum(decrypt(sk, _cipher(i, pk, c, "matrix")) for c in row) % pk.N
    else:
        acc = encrypt(pk, own, rng)
        for j in range(2, n + 1):
            if j != i:
                msg = yield from _await(net, i, f"{scope}/share/{i}/{j}", "share")
                acc = hom_add(acc, _cipher(i, pk, msg.fields()["z"], "share"))
        pss = decrypt(sk, acc)
    if not pss < mpk.N:
        raise ProtocolAbort(i, "gamma", "partial share sum does not fit the master modulus")
    net.send(i, 1, f"{scope}/gamma/{i}", {"gamma": encrypt(mpk, pss, rng).value})
    return pss


def run_mpwp(inst: DotProductInstance, net: Optional[Network] = None) -> DotResult:
    """Weighted sum with the full share matrix circulated around the ring (shared modulus)."""
    inst.validate()
    if inst.mode != SHARED_MODULUS:
        raise ParameterError("the matrix-circulating protocol needs a shared-modulus cipher")
    net = net or network_for(inst)
    net.signatures = inst.signatures
    M = net.keys.M
    if not (inst.n - 1) * inst.B * inst.B < M:
        raise HypothesisError(f"(n-1)B^2 is not below the shared modulus {M}")
    z_bound = inst.z_bound if inst.z_bound is not None else M - 1
    scope = net.new_scope("mpwp")
    procs = [(1, _mpwp_master(net, scope, inst.n, inst.U, True))]
    procs += [(i, _mpwp_member(net, scope, inst.n, i, inst.V[i - 1], z_bound, True)) for i in range(2, inst.n + 1)]
    results, metrics = _run(net, procs, "mpwp", scope)
    A, pss = results[0]
    return DotResult((A - sum(pss)) % M, metrics, [A] + pss, scope=scope)


def run_pmpwp(inst: DotProductInstance, net: Optional[Network] = None) -> DotResult:
    """Weighted sum with shares sent point to point and per-player Paillier moduli."""
    inst.validate()
    net = net or network_for(inst, mode=PAILLIER_CHAIN)
    net.signatures = inst.signatures
    keys = net.keys
    z_bound = inst.z_bound if inst.z_bound is not None else inst.B
    N1 = keys.master_pk(1).N
    others = [keys.ring_pk(i).N for i in range(2, inst.n + 1)]
    if not pmpwp_moduli_ok(inst.n, inst.B, N1, others):
        raise HypothesisError("moduli do not satisfy (n-1)(B^2+B) < N_1 and (n-1)B < N_i")
    scope = net.new_scope("pmpwp")
    procs = [(1, _mpwp_master(net, scope, inst.n, inst.U, False))]
    procs += [(i, _mpwp_member(net, scope, inst.n, i, inst.V[i - 1], z_bound, False)) for i in range(2, inst.n + 1)]
    results, metrics = _run(net, procs, "pmpwp", scope)
    A, pss = results[0]
    return DotResult(A - sum(pss), metrics, [A] + pss, scope=scope)
