"""Parallel matrix multiplication from pair/triple ring blocks, and its repeated variant.

Entry ``c_ij`` is ``a_ii b_ij`` plus one external ring dot product per block
of the other column indices; all blocks of all entries run concurrently, so
a run takes at most five dependency rounds.  The repeated variant splits each
private coefficient into ``d`` shares and runs one block decomposition per
share, each over a hash-derived player order.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .codec import canonical_json, derive_rng
from .errors import ConfigurationError, HypothesisError, ParameterError, ProtocolAbort
from .hom_cipher import DEFAULT_SEARCH_BOUND
from .netsim import PAILLIER_CHAIN, SHARED_MODULUS, MODES, Metrics, Network, build_key_directory, metrics_snapshot
from .dot import DotProductInstance, RingOutcome, check_ring_moduli, ring_dot_procs
from .trust import TrustPair, par_agg, par_neutral, seq_agg

DEFAULT_TRUST_MODULUS = (1 << 24) - 3


# ---------------------------------------------------------------------------
# block partition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockPartition:
    owner: int
    triple: Optional[tuple]
    pairs: tuple

    @property
    def blocks(self) -> list[tuple]:
        return ([self.triple] if self.triple else []) + list(self.pairs)

    def covered(self) -> list[int]:
        return sorted(k for block in self.blocks for k in block)


def partition_blocks(n: int, i: int) -> BlockPartition:
    """Blocks of the column indices ``{1..n} \\ {i}`` for row owner ``i``.

    Indices wrap cyclically over ``1..n``.  Odd ``n``: pairs
    ``(i+2h-1, i+2h)`` for ``h = 1..(n-1)/2``.  Even ``n``: the triple
    ``(i-3, i-2, i-1)`` and pairs for ``h = 1..(n-4)/2``.
    """
    if n < 3:
        raise ParameterError("need n >= 3")
    if not 1 <= i <= n:
        raise ParameterError(f"row owner {i} outside 1..{n}")

    def wrap(x: int) -> int:
        return (x - 1) % n + 1

    if n % 2 == 0:
        triple = (wrap(i - 3), wrap(i - 2), wrap(i - 1))
        t = (n - 4) // 2
    else:
        triple = None
        t = (n - 1) // 2
    pairs = tuple((wrap(i + 2 * h - 1), wrap(i + 2 * h)) for h in range(1, t + 1))
    return BlockPartition(i, triple, pairs)


# ---------------------------------------------------------------------------
# matrix shares and results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MatrixShare:
    owner: int
    A_row: tuple
    B_row: tuple


def shares_from_matrices(A: Sequence[Sequence], Bm: Sequence[Sequence]) -> list[MatrixShare]:
    n = len(A)
    if len(Bm) != n or any(len(r) != n for r in list(A) + list(Bm)):
        raise ParameterError("A and B must be square matrices of the same size")
    return [MatrixShare(i + 1, tuple(A[i]), tuple(Bm[i])) for i in range(n)]


@dataclass
class MatmulResult:
    C: list
    metrics: Metrics


def matmul_oracle(A, Bm) -> list[list[int]]:
    n = len(A)
    return [[sum(A[i][k] * Bm[k][j] for k in range(n)) for j in range(n)] for i in range(n)]


def trust_matmul_oracle(A, Bm) -> list[list[TrustPair]]:
    """Parallel aggregation over ``k != i`` of ``a_ik * b_kj``."""
    n = len(A)
    N = A[0][0].N
    C = []
    for i in range(n):
        row = []
        for j in range(n):
            s = par_neutral(N)
            for k in range(n):
                if k != i:
                    s = par_agg(s, seq_agg(A[i][k], Bm[k][j]))
            row.append(s)
        C.append(row)
    return C


def _ordered(keys, block: Sequence[int]) -> list[int]:
    """Ring order of a block: ascending ring modulus in chain mode."""
    if keys.mode == PAILLIER_CHAIN:
        return sorted(block, key=lambda pid: keys.ring_pk(pid).N)
    return list(block)


def _run_blocks(net: Network, jobs: list, protocol: str):
    """Run ``(label, master, ring, U, V, trust)`` jobs concurrently; returns outcomes and metrics."""
    start = len(net.transcript)
    procs, heads = [], []
    for label, master, ring, U, V, trust in jobs:
        scope = net.new_scope(f"{protocol}.{label}")
        heads.append(len(procs))
        procs += ring_dot_procs(net, scope, master, ring, U, V, trust=trust)
    try:
        results = net.run(procs)
    except ProtocolAbort as exc:
        raise exc.with_context(protocol=protocol) from None
    outcomes = [results[h] for h in heads]
    return outcomes, metrics_snapshot(net, start)


# ---------------------------------------------------------------------------
# integer matrix product
# ---------------------------------------------------------------------------

def matmul_network(n: int, B: int, mode: str = PAILLIER_CHAIN, d: int = 1, seed=0, *, M: Optional[int] = None,
                   bit_slack: int = 32, search_bound: int = DEFAULT_SEARCH_BOUND, signatures: bool = False) -> Network:
    keys = build_key_directory(n, mode, B, d, all_ring=True, bit_slack=bit_slack, M=M,
                               search_bound=search_bound, seed=seed)
    return Network(n, keys, seed, signatures)


def _validate_shares(shares: Sequence[MatrixShare], B: Optional[int]) -> int:
    n = len(shares)
    if n < 3:
        raise ParameterError("need n >= 3 players")
    for idx, sh in enumerate(shares, start=1):
        if sh.owner != idx or len(sh.A_row) != n or len(sh.B_row) != n:
            raise ParameterError(f"share {idx} is not row {idx} of two {n}x{n} matrices")
        if B is not None:
            for x in list(sh.A_row) + list(sh.B_row):
                if not 0 <= x <= B:
                    raise HypothesisError(f"entry {x} of row {idx} outside [0, {B}]")
    return n


def run_pdsmm(shares: Sequence[MatrixShare], net: Optional[Network] = None, *, B: Optional[int] = None,
              mode: str = PAILLIER_CHAIN, seed=0) -> MatmulResult:
    """Each player learns its row of ``C = A B``; every entry's blocks run in parallel."""
    if B is None:
        B = max(max(max(sh.A_row), max(sh.B_row)) for sh in shares)
    n = _validate_shares(shares, B)
    net = net or matmul_network(n, B, mode, seed=seed)
    keys = net.keys
    jobs, plan, checked = [], [], set()
    for i in range(1, n + 1):
        A_i = shares[i - 1].A_row
        for j in range(1, n + 1):
            for b, block in enumerate(partition_blocks(n, i).blocks):
                ring = _ordered(keys, block)
                if (i, tuple(ring)) not in checked:
                    check_ring_moduli(keys, i, ring, B * B)
                    checked.add((i, tuple(ring)))
                U = [A_i[k - 1] for k in ring]
                V = {k: shares[k - 1].B_row[j - 1] for k in ring}
                jobs.append((f"{i}.{j}.{b}", i, ring, U, V, False))
                plan.append((i, j))
    outcomes, metrics = _run_blocks(net, jobs, "pdsmm")
    C = [[shares[i].A_row[i] * shares[i].B_row[j] for j in range(n)] for i in range(n)]
    for (i, j), out in zip(plan, outcomes):
        C[i - 1][j - 1] += out.value
    return MatmulResult(C, metrics)


def run_pdsmm_entry(shares: Sequence[MatrixShare], i: int, j: int, net: Network, *,
                    B: Optional[int] = None) -> tuple[int, Metrics]:
    """Only entry ``c_ij``: the blocks of one row owner and one column, run in parallel."""
    n = _validate_shares(shares, B)
    if not (1 <= i <= n and 1 <= j <= n):
        raise ParameterError(f"entry ({i}, {j}) outside a {n}x{n} matrix")
    bound = B if B is not None else max(max(max(sh.A_row), max(sh.B_row)) for sh in shares)
    keys = net.keys
    A_i = shares[i - 1].A_row
    jobs = []
    for b, block in enumerate(partition_blocks(n, i).blocks):
        ring = _ordered(keys, block)
        check_ring_moduli(keys, i, ring, bound * bound)
        jobs.append((f"{i}.{j}.{b}", i, ring, [A_i[k - 1] for k in ring],
                     {k: shares[k - 1].B_row[j - 1] for k in ring}, False))
    outcomes, metrics = _run_blocks(net, jobs, "pdsmm")
    return A_i[i - 1] * shares[i - 1].B_row[j - 1] + sum(o.value for o in outcomes), metrics


# ---------------------------------------------------------------------------
# trust matrix product
# ---------------------------------------------------------------------------

def trust_network(n: int, M: int = DEFAULT_TRUST_MODULUS, seed=0, *, bit_length: int = 256,
                  search_bound: int = DEFAULT_SEARCH_BOUND) -> Network:
    keys = build_key_directory(n, SHARED_MODULUS, 1, all_ring=True, M=M, bit_length=bit_length,
                               search_bound=search_bound, seed=seed)
    return Network(n, keys, seed)


def run_pdsmm_trust(A: Sequence[Sequence[TrustPair]], Bm: Sequence[Sequence[TrustPair]],
                    net: Optional[Network] = None, *, seed=0) -> MatmulResult:
    """Rows of the trust aggregation ``c_ij = +_{k != i} (a_ik * b_kj)`` over a shared ring."""
    n = len(A)
    if n < 3 or len(Bm) != n:
        raise ParameterError("need two n x n trust matrices with n >= 3")
    N = A[0][0].N
    if any(x.N != N for row in list(A) + list(Bm) for x in row):
        raise ConfigurationError("all trust pairs must live in the same ring")
    net = net or trust_network(n, N, seed)
    if net.keys.mode != SHARED_MODULUS or net.keys.M != N:
        raise ConfigurationError(f"trust products need shared-modulus keys over Z_{N}")
    jobs, plan = [], []
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            for b, block in enumerate(partition_blocks(n, i).blocks):
                ring = list(block)
                U = [A[i - 1][k - 1] for k in ring]
                V = {k: Bm[k - 1][j - 1] for k in ring}
                jobs.append((f"{i}.{j}.{b}", i, ring, U, V, True))
                plan.append((i, j))
    outcomes, metrics = _run_blocks(net, jobs, "pdsmm-trust")
    C = [[par_neutral(N) for _ in range(n)] for _ in range(n)]
    for (i, j), out in zip(plan, outcomes):
        C[i - 1][j - 1] = par_agg(C[i - 1][j - 1], out.value)
    return MatmulResult(C, metrics)


# ---------------------------------------------------------------------------
# random ring orders
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RingOrder:
    occurrence: int
    order: tuple


def _seed_material(players: Sequence[str], date: str, nonces, occurrence: int) -> bytes:
    names = [str(p) for p in players]
    if len(set(names)) != len(names):
        raise ConfigurationError("player names must be distinct")
    if nonces is None:
        nonces = {}
    elif not isinstance(nonces, dict):
        nonces = dict(zip(names, nonces))
    ordered = sorted(names)
    return canonical_json({
        "names": ordered,
        "date": str(date),
        "nonces": [str(nonces.get(name, "")) for name in ordered],
        "occurrence": int(occurrence),
    })


class _HashStream:
    """Counter-mode SHA-256 expansion yielding unbiased bounded integers."""

    def __init__(self, seed: bytes):
        self.seed = seed
        self.counter = 0
        self.buf = b""

    def _bytes(self, k: int) -> bytes:
        while len(self.buf) < k:
            self.buf += hashlib.sha256(self.seed + self.counter.to_bytes(8, "big")).digest()
            self.counter += 1
        out, self.buf = self.buf[:k], self.buf[k:]
        return out

    def below(self, bound: int) -> int:
        if bound <= 1:
            return 0
        limit = (1 << 64) - (1 << 64) % bound
        while True:
            x = int.from_bytes(self._bytes(8), "big")
            if x < limit:
                return x % bound


def random_ring_order(players: Sequence[str], date: str, nonces=None, occurrence: int = 1) -> RingOrder:
    """Permutation of ``P_2..P_n`` (player indices) derived from public seed material.

    ``players`` lists distinguished names in player-index order; ``nonces`` is
    a name-to-value mapping or a list aligned with ``players``.
    """
    seed = hashlib.sha256(_seed_material(players, date, nonces, occurrence)).digest()
    stream = _HashStream(seed)
    order = list(range(2, len(players) + 1))
    for idx in range(len(order) - 1, 0, -1):
        j = stream.below(idx + 1)
        order[idx], order[j] = order[j], order[idx]
    return RingOrder(occurrence, tuple(order))


# ---------------------------------------------------------------------------
# repeated (wiretap) dot product
# ---------------------------------------------------------------------------

def wiretap_coefficients(v: int, B: int, lambdas: Sequence[int], mode: str, M: Optional[int] = None) -> list[int]:
    """Per-occurrence coefficients: masked ``v`` first, then the mask values."""
    lambdas = [int(x) for x in lambdas]
    if mode == SHARED_MODULUS:
        if M is None:
            raise ParameterError("shared mode needs the modulus M")
        return [(v - sum(lambdas)) % M] + lambdas
    if any(not 0 <= x < B for x in lambdas):
        raise ParameterError("chain-mode masks must lie in [0, B)")
    return [v + sum(B - x for x in lambdas)] + lambdas


def wiretap_recover(sums: Sequence[int], B: int, u_sum: int, mode: str, M: Optional[int] = None) -> int:
    """Combine the occurrence results into ``sum_j u_j v_j``."""
    d = len(sums)
    if mode == SHARED_MODULUS:
        return sum(sums) % M
    return sum(sums) - (d - 1) * B * u_sum


def draw_lambdas(n: int, d: int, B: int, mode: str, rng, M: Optional[int] = None) -> dict[int, list[int]]:
    top = M if mode == SHARED_MODULUS else B
    return {j: [rng.randrange(top) for _ in range(d - 1)] for j in range(2, n + 1)}


@dataclass
class WiretapResult:
    S: int
    metrics: Metrics
    orders: list = field(default_factory=list)
    occurrence_sums: list = field(default_factory=list)


def wiretap_network(inst: DotProductInstance, d: int, *, bit_slack: int = 32, M: Optional[int] = None,
                    search_bound: int = DEFAULT_SEARCH_BOUND) -> Network:
    keys = build_key_directory(inst.n, inst.mode, inst.B, d, bit_slack=bit_slack, M=M,
                               search_bound=search_bound, seed=inst.seed)
    return Network(inst.n, keys, inst.seed, inst.signatures)


def run_wiretap(inst: DotProductInstance, d: int, net: Optional[Network] = None, *,
                lambdas: Optional[dict] = None, names: Optional[Sequence[str]] = None,
                date: str = "1970-01-01", nonces=None) -> WiretapResult:
    """``P_1`` learns ``U^T V`` from ``d`` block decompositions run in parallel."""
    if d < 1:
        raise ParameterError("need at least one occurrence")
    inst.validate()
    n, B = inst.n, inst.B
    net = net or wiretap_network(inst, d)
    keys = net.keys
    M = keys.M if keys.mode == SHARED_MODULUS else None
    product_bound = B * B if keys.mode == SHARED_MODULUS else d * B * B
    if lambdas is None:
        lambdas = draw_lambdas(n, d, B, keys.mode, derive_rng(inst.seed, "wiretap-masks"), M)
    coeffs = {j: wiretap_coefficients(inst.V[j - 1], B, lambdas[j], keys.mode, M) for j in range(2, n + 1)}
    if any(len(c) != d for c in coeffs.values()):
        raise ParameterError(f"each player needs exactly {d - 1} mask values")
    names = list(names) if names is not None else [f"P{i}" for i in range(1, n + 1)]
    if len(names) != n:
        raise ConfigurationError("one distinguished name per player is required")
    base = partition_blocks(n, 1).blocks
    jobs, plan, orders, checked = [], [], [], set()
    for o in range(1, d + 1):
        order = random_ring_order(names, date, nonces, o)
        orders.append(order)
        for b, block in enumerate(base):
            ring = _ordered(keys, [order.order[pos - 2] for pos in block])
            if tuple(ring) not in checked:
                check_ring_moduli(keys, 1, ring, product_bound)
                checked.add(tuple(ring))
            U = [inst.U[k - 1] for k in ring]
            V = {k: coeffs[k][o - 1] for k in ring}
            jobs.append((f"{o}.{b}", 1, ring, U, V, False))
            plan.append(o)
    outcomes, metrics = _run_blocks(net, jobs, "wiretap")
    sums = [0] * d
    for o, out in zip(plan, outcomes):
        sums[o - 1] += out.value
    if M is not None:
        sums = [s % M for s in sums]
    ring_part = wiretap_recover(sums, B, sum(inst.U[1:]), keys.mode, M)
    return WiretapResult(ring_part + inst.U[0] * inst.V[0], metrics, orders, sums)


# ---------------------------------------------------------------------------
# repetition bounds
# ---------------------------------------------------------------------------

def avg_bound_thm4(n: int, k: int) -> float:
    """Average number of occurrences sufficient against ``k`` colluders (master included), odd ``n``."""
    if n < 5 or n % 2 == 0:
        raise ParameterError("the average-case bound needs odd n >= 5")
    if not 2 <= k <= n - 2:
        raise ParameterError(f"need 2 <= k <= n-2, got k={k}")
    m = min(k - 1, n - k, (n - 1) / 2)
    return 2 * math.log(m) * (1 + (k - 1) / (n - k - 1))


def worst_bound_prop1(n: int, eps: float) -> float:
    """Occurrences bounding the breach probability by ``eps`` when all but two players collude."""
    if n < 3 or n % 2 == 0:
        raise ParameterError("the worst-case bound needs odd n >= 3")
    if not 0 < eps < 1:
        raise ParameterError("eps must lie in (0, 1)")
    return n * math.log(1 / eps)
