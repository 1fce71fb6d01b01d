"""Deterministic lockstep message-passing simulator.

Protocols are written as one generator per (player, instance).  In every
global round each generator runs until it yields (waiting for input), its
messages are queued, and at the round boundary the queue is delivered in
``(round, sender, tag)`` order.  Tags have the form ``scope/phase/...``; the
dependency depth of a message is one more than the deepest message its sender
had received in the same scope, and the round count of a run is the largest
depth, so parallel instances share rounds.
"""

from __future__ import annotations

import csv
import io
import json
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Callable, Generator, Iterable, Optional, Sequence

from .codec import canonical_json, decode_payload, derive_rng, encode_payload
from .errors import ConfigurationError, ParameterError, ProtocolAbort, RoutingError
from .group import SigningKey, VerifyKey, default_group, sign, signing_keygen, verify
from .hom_cipher import (
    DEFAULT_SEARCH_BOUND,
    ModulusChain,
    PublicKey,
    SecretKey,
    build_modulus_chain,
    master_keygen,
    shared_modulus_keygen,
)

PAILLIER_CHAIN = "paillier_chain"
SHARED_MODULUS = "shared_modulus"
MODES = (PAILLIER_CHAIN, SHARED_MODULUS)

METRICS_HEADER = ["protocol", "n", "d", "messages", "bytes", "rounds", "wall_time_ms", "seed"]


# ---------------------------------------------------------------------------
# messages
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Message:
    sender: int
    receiver: int
    round: int
    tag: str
    payload: bytes
    signature: Optional[bytes] = None
    depth: int = field(default=1, compare=False)

    @property
    def size(self) -> int:
        return len(self.payload) + len(self.signature or b"")

    @property
    def scope(self) -> str:
        return self.tag.split("/", 1)[0]

    @property
    def phase(self) -> str:
        parts = self.tag.split("/")
        return parts[1] if len(parts) > 1 else parts[0]

    def fields(self) -> dict:
        return decode_payload(self.payload)

    def signed_bytes(self) -> bytes:
        return signed_bytes(self.sender, self.receiver, self.round, self.tag, self.payload)

    def replace(self, **changes) -> "Message":
        doc = dict(sender=self.sender, receiver=self.receiver, round=self.round, tag=self.tag,
                   payload=self.payload, signature=self.signature, depth=self.depth)
        doc.update(changes)
        return Message(**doc)

    def to_json(self) -> dict:
        return {
            "from": self.sender,
            "to": self.receiver,
            "round": self.round,
            "tag": self.tag,
            "payload": self.payload.decode("utf-8"),
            "signature": self.signature.hex() if self.signature else None,
        }


def signed_bytes(sender: int, receiver: int, rnd: int, tag: str, payload: bytes) -> bytes:
    return canonical_json({"from": sender, "to": receiver, "round": rnd, "tag": tag, "payload": payload.decode("utf-8")})


def sign_message(key: SigningKey, msg: Message) -> Message:
    return msg.replace(signature=sign(key, msg.signed_bytes()))


def verify_message(key: VerifyKey, msg: Message) -> bool:
    return verify(key, msg.signed_bytes(), msg.signature)


# ---------------------------------------------------------------------------
# keys
# ---------------------------------------------------------------------------

@dataclass
class PlayerKeys:
    """``ring`` is used when the player sits in someone's ring, ``master`` when it receives the ring's result."""

    ring: Optional[tuple[PublicKey, SecretKey]]
    master: Optional[tuple[PublicKey, SecretKey]]
    signing: SigningKey


@dataclass
class KeyDirectory:
    mode: str
    players: dict[int, PlayerKeys]
    B: int = 0
    d: int = 1
    chain: Optional[ModulusChain] = None
    M: Optional[int] = None

    def _get(self, pid: int, role: str, idx: int):
        keys = self.players.get(pid)
        pair = getattr(keys, role) if keys else None
        if pair is None:
            raise ConfigurationError(f"P{pid} has no {role} key")
        return pair[idx]

    def ring_pk(self, pid: int) -> PublicKey:
        return self._get(pid, "ring", 0)

    def ring_sk(self, pid: int) -> SecretKey:
        return self._get(pid, "ring", 1)

    def master_pk(self, pid: int) -> PublicKey:
        return self._get(pid, "master", 0)

    def master_sk(self, pid: int) -> SecretKey:
        return self._get(pid, "master", 1)

    def verify_key(self, pid: int) -> VerifyKey:
        return self.players[pid].signing.verify_key

    def snapshot(self) -> dict:
        out = {}
        for pid in sorted(self.players):
            keys = self.players[pid]
            out[str(pid)] = {
                "ring": keys.ring[0].to_json() if keys.ring else None,
                "master": keys.master[0].to_json() if keys.master else None,
                "verify": format(keys.signing.verify_key.y, "x"),
            }
        return out


def default_shared_modulus(n: int, B: int, d: int = 1) -> int:
    """Smallest power of two above ``(n-1)dB^2``; smooth, so decryption stays cheap."""
    return 1 << max(2, ((n - 1) * d * B * B).bit_length())


def _signing_keys(pids: Iterable[int], seed) -> dict[int, SigningKey]:
    group = default_group()
    return {pid: signing_keygen(derive_rng(seed, "signing", pid), group) for pid in pids}


def build_key_directory(
    n: int,
    mode: str,
    B: int,
    d: int = 1,
    *,
    all_ring: bool = False,
    bit_slack: int = 32,
    bit_length: int = 256,
    M: Optional[int] = None,
    search_bound: int = DEFAULT_SEARCH_BOUND,
    seed=0,
) -> KeyDirectory:
    """Keys for ``P_1..P_n``.

    Chain mode gives ``P_2..P_n`` (or every player with ``all_ring``)
    increasing ring moduli and each master a modulus above the whole chain.
    Shared mode gives every player an independent key over ``Z_M``.
    """
    if n < 3:
        raise ParameterError("need at least 3 players")
    if mode not in MODES:
        raise ParameterError(f"unknown cipher mode {mode!r}")
    pids = list(range(1, n + 1))
    signing = _signing_keys(pids, seed)
    if mode == SHARED_MODULUS:
        M = M or default_shared_modulus(n, B, d)
        players = {}
        for pid in pids:
            pair = shared_modulus_keygen(M, bit_length, derive_rng(seed, "shared", pid), search_bound)
            players[pid] = PlayerKeys(pair, pair, signing[pid])
        return KeyDirectory(mode, players, B, d, None, M)
    ring_pids = pids if all_ring else pids[1:]
    chain = build_modulus_chain(len(ring_pids) + 1, B, d, bit_slack, derive_rng(seed, "chain"))
    masters = pids if all_ring else [1]
    players = {pid: PlayerKeys(None, None, signing[pid]) for pid in pids}
    for pid, pk, sk in zip(ring_pids, chain.public_keys, chain.secret_keys):
        players[pid].ring = (pk, sk)
    for pid in masters:
        players[pid].master = master_keygen(chain, derive_rng(seed, "master", pid))
    return KeyDirectory(mode, players, B, d, chain, None)


def directory_from_chain(n: int, chain: ModulusChain, seed=0) -> KeyDirectory:
    if len(chain) != n - 1:
        raise ConfigurationError(f"chain of size {len(chain)} does not fit {n} players")
    if len(chain.secret_keys) != len(chain):
        raise ConfigurationError("chain carries no secret keys")
    signing = _signing_keys(range(1, n + 1), seed)
    players = {pid: PlayerKeys(None, None, signing[pid]) for pid in range(1, n + 1)}
    for pid, pk, sk in zip(range(2, n + 1), chain.public_keys, chain.secret_keys):
        players[pid].ring = (pk, sk)
    players[1].master = master_keygen(chain, derive_rng(seed, "master", 1))
    return KeyDirectory(PAILLIER_CHAIN, players, chain.B, chain.d, chain, None)


def directory_from_shared(n: int, keypairs: Sequence[tuple[PublicKey, SecretKey]], seed=0) -> KeyDirectory:
    if len(keypairs) != n:
        raise ConfigurationError(f"{len(keypairs)} shared keys do not fit {n} players")
    moduli = {pk.N for pk, _ in keypairs}
    if len(moduli) != 1:
        raise ConfigurationError("shared-modulus keys must agree on M")
    signing = _signing_keys(range(1, n + 1), seed)
    players = {pid: PlayerKeys(kp, kp, signing[pid]) for pid, kp in zip(range(1, n + 1), keypairs)}
    return KeyDirectory(SHARED_MODULUS, players, 0, 1, None, moduli.pop())


# ---------------------------------------------------------------------------
# adversary hooks
# ---------------------------------------------------------------------------

Interceptor = Callable[[Message, "Network"], list]


@dataclass
class AdversaryHook:
    """``passive`` copies every delivered message; ``active`` also rewrites traffic.

    An active ``interceptor(msg, net)`` returns the list of messages to
    deliver instead of ``msg`` (empty to drop it) and may queue forged
    messages for the next round with ``net.inject``.
    """

    mode: str = "none"
    compromised: frozenset = frozenset()
    interceptor: Optional[Interceptor] = None
    observed: list = field(default_factory=list)


@dataclass
class LeakedPlayer:
    pid: int
    ring_sk: Optional[SecretKey]
    master_sk: Optional[SecretKey]
    signing: SigningKey
    state: dict


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

@dataclass
class Metrics:
    message_count: int = 0
    total_bytes: int = 0
    round_count: int = 0
    per_phase: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "messages": self.message_count,
            "bytes": self.total_bytes,
            "rounds": self.round_count,
            "per_phase": {k: dict(v) for k, v in sorted(self.per_phase.items())},
        }


def compute_metrics(messages: Iterable[Message]) -> Metrics:
    m = Metrics()
    phases: dict = defaultdict(lambda: {"messages": 0, "bytes": 0})
    for msg in messages:
        m.message_count += 1
        m.total_bytes += msg.size
        m.round_count = max(m.round_count, msg.depth)
        phases[msg.phase]["messages"] += 1
        phases[msg.phase]["bytes"] += msg.size
    m.per_phase = dict(phases)
    return m


def metrics_snapshot(net: "Network", since: int = 0) -> Metrics:
    return compute_metrics(net.transcript[since:])


def metrics_csv(rows: Sequence[dict], header: Sequence[str] = METRICS_HEADER) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(header), lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# network
# ---------------------------------------------------------------------------

Proc = Generator[Optional[str], None, object]


class Network:
    def __init__(self, n: int, keys: KeyDirectory, seed=0, signatures: bool = False, max_idle_rounds: int = 2):
        if n < 3:
            raise ParameterError("a network needs at least 3 players")
        missing = [pid for pid in range(1, n + 1) if pid not in keys.players]
        if missing:
            raise ConfigurationError(f"no key material for players {missing}")
        self.n = n
        self.keys = keys
        self.seed = seed
        self.signatures = signatures
        self.max_idle_rounds = max_idle_rounds
        self.round = 0
        self.transcript: list[Message] = []
        self.hook = AdversaryHook()
        self.private: dict[int, dict] = defaultdict(dict)
        self._queue: list[Message] = []
        self._injected: list[Message] = []
        self._inbox: dict[int, dict[str, deque]] = defaultdict(lambda: defaultdict(deque))
        self._depth: dict[tuple[int, str], int] = {}
        self._scopes: dict[str, int] = defaultdict(int)

    @property
    def players(self) -> list[int]:
        return list(range(1, self.n + 1))

    def _check_player(self, pid: int) -> None:
        if not (isinstance(pid, int) and 1 <= pid <= self.n):
            raise RoutingError(f"unknown player {pid!r}")

    def new_scope(self, name: str) -> str:
        self._scopes[name] += 1
        return f"{name}#{self._scopes[name]}"

    def rng(self, pid: int, scope: str):
        return derive_rng(self.seed, pid, scope)

    def record_private(self, pid: int, scope: str, **values) -> None:
        self.private[pid].setdefault(scope, {}).update(values)

    # -- sending and delivery ------------------------------------------------
    def send(self, sender: int, receiver: int, tag: str, fields: dict) -> Message:
        self._check_player(sender)
        self._check_player(receiver)
        payload = encode_payload(fields)
        scope = tag.split("/", 1)[0]
        msg = Message(sender, receiver, self.round, tag, payload, None, 1 + self._depth.get((sender, scope), 0))
        if self.signatures:
            msg = sign_message(self.keys.players[sender].signing, msg)
        self._queue.append(msg)
        return msg

    def inject(self, msg: Message) -> None:
        self._injected.append(msg)

    def deliver_round(self) -> list[Message]:
        pending = sorted(self._queue + self._injected, key=lambda m: (m.round, m.sender, m.tag))
        self._queue, self._injected = [], []
        delivered = []
        for msg in pending:
            outs = [msg]
            if self.hook.mode == "active" and self.hook.interceptor is not None:
                outs = list(self.hook.interceptor(msg, self) or [])
            for out in outs:
                self._check_player(out.sender)
                self._check_player(out.receiver)
                if self.hook.mode in ("passive", "active"):
                    self.hook.observed.append(out)
                self._inbox[out.receiver][out.tag].append(out)
                key = (out.receiver, out.scope)
                self._depth[key] = max(self._depth.get(key, 0), out.depth)
                self.transcript.append(out)
                delivered.append(out)
        self.round += 1
        return delivered

    def take(self, pid: int, tag: str) -> Optional[Message]:
        box = self._inbox[pid].get(tag)
        if not box:
            return None
        msg = box.popleft()
        if self.signatures and not verify_message(self.keys.verify_key(msg.sender), msg):
            raise ProtocolAbort(pid, msg.phase, "signature verification failed", {"tag": tag, "from": msg.sender})
        return msg

    def run(self, procs: Sequence[tuple[int, Proc]]) -> list:
        """Drive generators in lockstep until all return; results in input order."""
        active = {i: p for i, p in enumerate(procs)}
        waiting: dict[int, tuple[int, Optional[str]]] = {}
        results: list = [None] * len(procs)
        idle = 0
        while active:
            for i in sorted(active):
                pid, gen = active[i]
                try:
                    waiting[i] = (pid, next(gen))
                except StopIteration as stop:
                    results[i] = stop.value
                    del active[i]
                    waiting.pop(i, None)
            sent = bool(self._queue or self._injected)
            delivered = self.deliver_round()
            idle = 0 if (sent or delivered) else idle + 1
            if active and idle > self.max_idle_rounds:
                pid, label = waiting[min(waiting)]
                raise ProtocolAbort(pid, label or "wait", "timed out waiting for a message")
        return results

    # -- adversary -------------------------------------------------------------
    def leak(self, pid: int) -> LeakedPlayer:
        if pid not in self.hook.compromised:
            raise ConfigurationError(f"P{pid} is not compromised")
        keys = self.keys.players[pid]
        return LeakedPlayer(
            pid,
            keys.ring[1] if keys.ring else None,
            keys.master[1] if keys.master else None,
            keys.signing,
            self.private.get(pid, {}),
        )

    # -- export ----------------------------------------------------------------
    def transcript_jsonl(self, since: int = 0) -> str:
        return "".join(canonical_json(m.to_json()).decode("utf-8") + "\n" for m in self.transcript[since:])


def create_network(n: int, keys, seed=0, signatures: bool = False) -> Network:
    """Bind ``keys`` (a KeyDirectory, ModulusChain or list of shared keypairs) to ``n`` players."""
    if n < 3:
        raise ParameterError("a network needs at least 3 players")
    if isinstance(keys, ModulusChain):
        keys = directory_from_chain(n, keys, seed)
    elif not isinstance(keys, KeyDirectory):
        keys = directory_from_shared(n, list(keys), seed)
    return Network(n, keys, seed, signatures)


def send(net: Network, sender: int, receiver: int, tag: str, fields: dict) -> Message:
    return net.send(sender, receiver, tag, fields)


def deliver_round(net: Network) -> list[Message]:
    return net.deliver_round()


def attach_adversary(net: Network, hook: AdversaryHook) -> Network:
    if hook.mode not in ("none", "passive", "active"):
        raise ConfigurationError(f"unknown adversary mode {hook.mode!r}")
    bad = [p for p in hook.compromised if not (isinstance(p, int) and 1 <= p <= net.n)]
    if bad:
        raise ConfigurationError(f"compromised players {bad} are not in the network")
    hook.compromised = frozenset(hook.compromised)
    net.hook = hook
    return net


def write_transcript(net: Network, path, since: int = 0) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(net.transcript_jsonl(since))


def read_transcript(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
