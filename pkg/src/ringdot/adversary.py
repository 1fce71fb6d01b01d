"""Executable attacks on the ring dot product, and Monte Carlo exposure estimates.

* :func:`attack_alice_key`: the master is usurped and replaces every masked
  ``alpha`` except the target's by an encryption of a known value.
* :func:`attack_charlie_key`: the last ring player's key is stolen and the
  master is cut off; forged ``alpha`` messages turn the ring into a relay of
  the target's coefficient.
* :func:`attack_sandwich`: passive colluders holding the master's key and the
  keys of the target's two ring neighbours subtract their partial sums.
* :func:`wiretap_breach_probability` / :func:`mean_occurrences_to_safety`:
  random ring placements over repeated occurrences.

Attacks return an :class:`AttackOutcome` instead of raising.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .codec import canonical_json, derive_seed, encode_payload, from_hex, to_hex
from .dot import DotProductInstance, _check_proof_inputs, network_for, ring_dot_procs
from .errors import ConfigurationError, ParameterError, ProtocolAbort
from .group import default_group, sign
from .hom_cipher import ciphertext_from_int, decrypt, encrypt
from .matmul import avg_bound_thm4
from .netsim import SHARED_MODULUS, AdversaryHook, Message, Network, attach_adversary

ATTACKS = ("alice_key", "charlie_key", "sandwich", "wiretap")
PREDICATES = ("auto", "group", "ring")


@dataclass
class AttackOutcome:
    recovered: Optional[int]
    succeeded: bool
    abort_step: Optional[str] = None
    note: str = ""
    estimate: Optional[float] = None

    def to_json(self) -> dict:
        return {
            "recovered": to_hex(self.recovered) if self.recovered is not None else None,
            "succeeded": self.succeeded,
            "abort_step": self.abort_step,
            "note": self.note,
            "estimate": self.estimate,
        }


def _outcome(recovered: Optional[int], secret: int, note: str = "") -> AttackOutcome:
    return AttackOutcome(recovered, recovered is not None and recovered == secret, None, note)


def _aborted(exc: ProtocolAbort) -> AttackOutcome:
    return AttackOutcome(None, False, exc.step, f"P{exc.player} aborted: {exc.reason}")


def _solve_linear(value: int, u: int, N: int) -> Optional[int]:
    """``value * u^-1 mod N``, or None when ``u`` is not invertible."""
    if math.gcd(u % N, N) != 1:
        return None
    return value * pow(u, -1, N) % N


def _ring_procs(net: Network, inst: DotProductInstance, scope: str):
    ring = list(range(2, inst.n + 1))
    if inst.proofs:
        _check_proof_inputs(inst.U[1:])
    V = {pid: inst.V[pid - 1] for pid in ring}
    return ring_dot_procs(net, scope, 1, ring, inst.U[1:], V, proofs=inst.proofs)


def _receiver_of(k: int) -> int:
    """Player that receives ``alpha_k`` in the linear ring (``P_2`` gets the first two)."""
    return 2 if k == 2 else k - 1


def _observed(net: Network, tag: str) -> Message:
    for msg in net.hook.observed:
        if msg.tag == tag:
            return msg
    raise ConfigurationError(f"no message {tag} was observed")


def _resigned(net: Network, msg: Message, fields: dict, signer: int) -> Message:
    out = msg.replace(payload=encode_payload(fields), signature=None)
    if net.signatures:
        out = out.replace(signature=sign(net.keys.players[signer].signing, out.signed_bytes()))
    return out


# ---------------------------------------------------------------------------
# usurped master
# ---------------------------------------------------------------------------

def attack_alice_key(net: Network, inst: DotProductInstance, target: int = 2,
                     x: Optional[dict] = None) -> AttackOutcome:
    """The adversary holds the master's keys and rewrites every ``alpha_k`` with ``k != target``.

    ``alpha_k`` becomes ``E_k(x_k)`` (``x_k = 0`` by default; keep the
    ``x_k`` small so that no partial sum wraps).  The final sum is then
    ``u_t v_t + r_t + sum x_k``, from which ``v_t`` follows.  With affine
    proofs enabled the first rewritten ring step fails its check.
    """
    if not 2 <= target <= inst.n:
        raise ParameterError(f"target P{target} is not a ring player")
    x = {k: x.get(k, 0) for k in range(2, inst.n + 1) if k != target} if x else \
        {k: 0 for k in range(2, inst.n + 1) if k != target}
    net.signatures = inst.signatures

    def interceptor(msg: Message, net: Network) -> list:
        if msg.sender != 1 or msg.phase != "alpha":
            return [msg]
        k = int(msg.tag.rsplit("/", 1)[1])
        if k == target:
            return [msg]
        fields = msg.fields()
        rng = net.rng(1, f"adversary/{msg.scope}")
        fields["alpha"] = encrypt(net.keys.ring_pk(k), x[k], rng).value
        return [_resigned(net, msg, fields, 1)]

    attach_adversary(net, AdversaryHook("active", {1}, interceptor))
    scope = net.new_scope("dsdp")
    try:
        net.run(_ring_procs(net, inst, scope))
    except ProtocolAbort as exc:
        return _aborted(exc)
    leaked = net.leak(1)
    state = leaked.state[scope]
    gamma = _observed(net, f"{scope}/gamma")
    top = decrypt(leaked.master_sk, ciphertext_from_int(net.keys.master_pk(1), gamma.fields()["gamma"]))
    N_t = net.keys.ring_pk(target).N
    u_t, r_t = state["u"][target - 2], state["r"][target]
    recovered = _solve_linear(top - sum(x.values()) - r_t, u_t, N_t)
    note = "" if recovered is not None else "target coefficient u is not invertible"
    return _outcome(recovered, inst.V[target - 1], note)


# ---------------------------------------------------------------------------
# stolen last-player key
# ---------------------------------------------------------------------------

def attack_charlie_key(net: Network, inst: DotProductInstance, *, replay: bool = False,
                       u_forged: int = 1, r_forged: int = 0) -> AttackOutcome:
    """The adversary holds ``P_n``'s ring key and impersonates the master towards the ring.

    Every message to or from ``P_1`` is dropped.  On seeing ``c_2`` the
    adversary injects ``alpha_2 = c_2^u E_2(r)`` with its own ``u, r`` and
    ``alpha_k = E_k(0)`` for ``k >= 3``, then decrypts ``beta_n`` with the
    stolen key.  Forgeries carry the adversary's own signature, so signed
    runs abort at the first one.  With ``replay`` the adversary instead
    forwards the master's legitimately signed ``alpha`` messages unchanged,
    which leaves the masks unknown.
    """
    n = inst.n
    stolen = n
    net.signatures = inst.signatures
    forged: set[int] = set()
    group = default_group() if inst.proofs else None

    def forge(msg: Message, net: Network) -> None:
        scope = msg.scope
        rng = net.rng(stolen, f"adversary/{scope}")
        c2 = ciphertext_from_int(net.keys.ring_pk(2), msg.fields()["c"])
        payloads = {2: {"alpha": (c2 * u_forged + encrypt(c2.pk, r_forged, rng)).value}}
        for k in range(3, n + 1):
            payloads[k] = {"alpha": encrypt(net.keys.ring_pk(k), 0, rng).value}
        for k, fields in payloads.items():
            if group is not None:
                fields.update(mu=group.exp(u_forged if k == 2 else 0), rho=group.exp(r_forged if k == 2 else 0))
            body = Message(1, _receiver_of(k), net.round, f"{scope}/alpha/{k}", encode_payload(fields), None, 1)
            if net.signatures:
                body = body.replace(signature=sign(net.keys.players[stolen].signing, body.signed_bytes()))
            forged.add(id(body))
            net.inject(body)

    def interceptor(msg: Message, net: Network) -> list:
        if id(msg) in forged:
            return [msg]
        if replay:
            if msg.sender == 1 and msg.phase == "alpha":
                copy = msg.replace()
                forged.add(id(copy))
                net.inject(copy)
                return []
            return [msg]
        if msg.receiver == 1 and msg.tag.endswith("/c/2"):
            forge(msg, net)
        if msg.sender == 1 or msg.receiver == 1:
            return []
        return [msg]

    attach_adversary(net, AdversaryHook("active", {stolen}, interceptor))
    scope = net.new_scope("dsdp")
    procs = _ring_procs(net, inst, scope)
    try:
        net.run(procs if replay else procs[1:])
    except ProtocolAbort as exc:
        return _aborted(exc)
    if replay:
        return AttackOutcome(None, False, None, "replayed alpha messages carry masks unknown to the adversary")
    leaked = net.leak(stolen)
    beta = _observed(net, f"{scope}/beta/{n}")
    pk = net.keys.ring_pk(stolen)
    delta = decrypt(leaked.ring_sk, ciphertext_from_int(pk, beta.fields()["beta"]))
    N2 = net.keys.ring_pk(2).N
    recovered = _solve_linear(delta - r_forged, u_forged, N2)
    return _outcome(recovered, inst.V[1])


# ---------------------------------------------------------------------------
# sandwich
# ---------------------------------------------------------------------------

def attack_sandwich(net: Network, inst: DotProductInstance, target: int, compromised) -> AttackOutcome:
    """Passive colluders ``{P_1, P_(i-1), P_(i+1)}`` recover ``v_i`` from consecutive partial sums.

    ``Delta_(i+1) - Delta_(i-1) - u_(i+1) v_(i+1) - r_i - r_(i+1) = u_i v_i``,
    each step reduced modulo the ring modulus that produced it.  For ``i = 2``
    the predecessor sum is zero, and for ``i = n`` the final sum is read from
    ``gamma`` with the master's key.
    """
    n = inst.n
    if not 2 <= target <= n:
        raise ParameterError(f"target P{target} is not a ring player")
    compromised = frozenset(compromised)
    if target in compromised:
        raise ConfigurationError("the target must be honest")
    net.signatures = inst.signatures
    attach_adversary(net, AdversaryHook("passive", compromised))
    scope = net.new_scope("dsdp")
    try:
        net.run(_ring_procs(net, inst, scope))
    except ProtocolAbort as exc:
        return _aborted(exc)

    needed = {1} | ({target - 1} if target > 2 else set()) | ({target + 1} if target < n else set())
    missing = sorted(needed - compromised)
    if missing:
        return AttackOutcome(None, False, None, f"keys of {['P%d' % p for p in missing]} are not compromised")

    keys = net.keys
    master = net.leak(1)
    u = master.state[scope]["u"]
    r = master.state[scope]["r"]

    def received_sum(k: int) -> int:
        tag = f"{scope}/alpha/2" if k == 2 else f"{scope}/beta/{k}"
        field_name = "alpha" if k == 2 else "beta"
        pk = keys.ring_pk(k)
        return decrypt(net.leak(k).ring_sk, ciphertext_from_int(pk, _observed(net, tag).fields()[field_name]))

    N_i = keys.ring_pk(target).N
    before = 0 if target == 2 else received_sum(target - 1)
    if target == n:
        gamma = _observed(net, f"{scope}/gamma").fields()["gamma"]
        at = decrypt(master.master_sk, ciphertext_from_int(keys.master_pk(1), gamma))
    else:
        nxt = target + 1
        v_next = net.leak(nxt).state[scope]["v"]
        after = received_sum(nxt)
        at = (after - u[nxt - 2] * v_next - r[nxt]) % keys.ring_pk(nxt).N
    uv = (at - before - r[target]) % N_i
    recovered = _solve_linear(uv, u[target - 2], N_i)
    if recovered is None:
        return AttackOutcome(None, False, None, "inconclusive: target coefficient u is not invertible")
    return _outcome(recovered, inst.V[target - 1])


# ---------------------------------------------------------------------------
# random ring repetitions
# ---------------------------------------------------------------------------

def _predicate(n: int, predicate: str) -> bool:
    """True for the ring-neighbour predicate."""
    if predicate not in PREDICATES:
        raise ParameterError(f"unknown exposure predicate {predicate!r}")
    if predicate == "auto":
        return n % 2 == 0
    if predicate == "group" and n % 2 == 0:
        raise ParameterError("the pair-group predicate needs odd n")
    return predicate == "ring"


def _check_nk(n: int, k: int) -> None:
    if n < 3:
        raise ParameterError("need n >= 3")
    if not 2 <= k <= n - 2:
        raise ParameterError(f"need 2 <= k <= n-2, got k={k} for n={n}")


def _first_safe(n: int, k: int, trials: int, horizon: int, seed, ring: bool,
                block: int = 16, chunk: int = 4096) -> np.ndarray:
    """Occurrence (1-based) at which every honest player is protected; 0 if not within ``horizon``."""
    m, bad = n - 1, k - 1
    rng = np.random.default_rng(derive_seed("wiretap-mc", n, k, seed))
    out = np.zeros(trials, dtype=np.int64)
    for start in range(0, trials, chunk):
        size = min(chunk, trials - start)
        covered = np.zeros((size, m), dtype=np.bool_)
        first = np.zeros(size, dtype=np.int64)
        offset = 0
        while offset < horizon and (first == 0).any():
            width = min(block, horizon - offset)
            floats = rng.random((size, width, m))
            _kernels.exposure_update(floats, bad, ring, covered, first, offset)
            offset += width
        out[start:start + size] = first
    return out


def wiretap_breach_probability(n: int, k: int, d: int, trials: int, seed=0, predicate: str = "auto") -> float:
    """Fraction of trials where some honest player stays exposed in all ``d`` occurrences.

    ``k`` counts the colluders including the master.  ``predicate`` is
    ``group`` (pairs of ring players, odd ``n``), ``ring`` (both ring
    neighbours) or ``auto`` (group for odd ``n``, ring otherwise).
    """
    _check_nk(n, k)
    if d < 1 or trials < 1:
        raise ParameterError("need d >= 1 and trials >= 1")
    first = _first_safe(n, k, trials, d, seed, _predicate(n, predicate))
    return float(np.count_nonzero(first == 0)) / trials


def breach_closed_form(n: int, d: int) -> float:
    """Exact breach probability with two honest ring players under the pair predicate."""
    if n < 5 or n % 2 == 0:
        raise ParameterError("need odd n >= 5")
    return (1 - 1 / (n - 2)) ** d


def mean_occurrences_to_safety(n: int, k: int, trials: int, seed=0, predicate: str = "auto",
                               horizon: Optional[int] = None) -> float:
    """Average number of occurrences until every honest player has been protected once."""
    _check_nk(n, k)
    if trials < 1:
        raise ParameterError("need trials >= 1")
    horizon = horizon or max(64, 40 * n)
    first = _first_safe(n, k, trials, horizon, seed, _predicate(n, predicate))
    if (first == 0).any():
        raise ParameterError(f"{int((first == 0).sum())} trials not safe within {horizon} occurrences")
    return float(first.mean())


def binomial_sigma(p: float, trials: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / trials)


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

@dataclass
class AttackScenario:
    attack: str
    n: int
    compromised: frozenset
    target: int = 2
    B: int = 100
    mode: str = "paillier_chain"
    seed: int = 0
    proofs: bool = False
    signatures: bool = False
    wiretap: Optional[int] = None
    replay: bool = False
    trials: int = 10_000
    U: Optional[list] = None
    V: Optional[list] = None

    def __post_init__(self):
        self.compromised = frozenset(int(p) for p in self.compromised)
        self.validate()

    def validate(self) -> None:
        if self.attack not in ATTACKS:
            raise ConfigurationError(f"unknown attack {self.attack!r}; expected one of {ATTACKS}")
        if self.n < 3:
            raise ConfigurationError("need n >= 3")
        if not self.compromised <= set(range(1, self.n + 1)):
            raise ConfigurationError(f"compromised set {sorted(self.compromised)} is not within 1..{self.n}")
        if self.attack != "wiretap" and (self.target in self.compromised or not 2 <= self.target <= self.n):
            raise ConfigurationError(f"target P{self.target} must be an honest ring player")
        if self.wiretap is not None and self.wiretap < 1:
            raise ConfigurationError("wiretap occurrences must be >= 1")

    def instance(self) -> DotProductInstance:
        if self.U is not None and self.V is not None:
            return DotProductInstance(self.n, self.U, self.V, self.B, self.mode, self.proofs, self.signatures,
                                      seed=self.seed)
        import random
        return DotProductInstance.random(self.n, self.B, random.Random(derive_seed("scenario", self.seed)),
                                         mode=self.mode, proofs=self.proofs, signatures=self.signatures,
                                         seed=self.seed)

    def to_json(self) -> dict:
        doc = {
            "attack": self.attack,
            "n": self.n,
            "compromised": sorted(self.compromised),
            "target": self.target,
            "B": self.B,
            "mode": self.mode,
            "seed": self.seed,
            "countermeasures": {"proofs": self.proofs, "signatures": self.signatures, "wiretap": self.wiretap},
            "replay": self.replay,
            "trials": self.trials,
        }
        if self.U is not None and self.V is not None:
            doc["U"] = [to_hex(u) for u in self.U]
            doc["V"] = [to_hex(v) for v in self.V]
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "AttackScenario":
        try:
            cm = doc.get("countermeasures", {})
            U = [from_hex(u) for u in doc["U"]] if "U" in doc else None
            V = [from_hex(v) for v in doc["V"]] if "V" in doc else None
            return cls(
                attack=doc["attack"],
                n=int(doc["n"]),
                compromised=doc.get("compromised", []),
                target=int(doc.get("target", 2)),
                B=int(doc.get("B", 100)),
                mode=doc.get("mode", "paillier_chain"),
                seed=int(doc.get("seed", 0)),
                proofs=bool(cm.get("proofs", False)),
                signatures=bool(cm.get("signatures", False)),
                wiretap=cm.get("wiretap"),
                replay=bool(doc.get("replay", False)),
                trials=int(doc.get("trials", 10_000)),
                U=U,
                V=V,
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"malformed scenario: {exc}") from None


def load_scenario(path) -> AttackScenario:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"scenario is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigurationError("scenario must be a JSON object")
    return AttackScenario.from_json(doc)


def write_outcome(outcome: AttackOutcome, path) -> None:
    with open(path, "wb") as fh:
        fh.write(canonical_json(outcome.to_json()) + b"\n")


def _wiretap_outcome(sc: AttackScenario) -> AttackOutcome:
    k = len(sc.compromised | {1})
    if not k <= sc.n - 2:
        raise ConfigurationError(f"{k} colluders leave fewer than two honest players")
    if k < 2:
        d = sc.wiretap or 1
        return AttackOutcome(None, False, None, f"no colluding ring player; d={d}", 0.0)
    d = sc.wiretap
    if d is None:
        d = max(1, math.ceil(avg_bound_thm4(sc.n, k))) if sc.n % 2 else 1
    p = wiretap_breach_probability(sc.n, k, d, sc.trials, sc.seed)
    return AttackOutcome(None, p >= 0.5, None, f"k={k} d={d} trials={sc.trials}", p)


def run_scenario(sc: AttackScenario) -> AttackOutcome:
    if sc.attack == "wiretap":
        return _wiretap_outcome(sc)
    inst = sc.instance()
    inst.validate()
    net = network_for(inst)
    if sc.attack == "alice_key":
        return attack_alice_key(net, inst, sc.target)
    if sc.attack == "charlie_key":
        return attack_charlie_key(net, inst, replay=sc.replay)
    return attack_sandwich(net, inst, sc.target, sc.compromised)
