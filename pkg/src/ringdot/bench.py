"""Communication sweeps over ``n`` and log-log fits of the message volume."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .codec import derive_seed
from .dot import DotProductInstance, network_for, run_dsdp, run_mpwp, run_pmpwp
from .errors import ParameterError
from .matmul import matmul_network, run_pdsmm_entry, shares_from_matrices
from .netsim import PAILLIER_CHAIN, SHARED_MODULUS, METRICS_HEADER, Network, build_key_directory, metrics_csv

DEFAULT_SWEEPS = {
    "dsdp": (8, 16, 32, 64),
    "pmpwp": (8, 16, 32),
    "mpwp": (4, 8, 16),
    "pdsmm": (8, 16, 32, 64),
}
BENCH_PROTOCOLS = tuple(DEFAULT_SWEEPS)
BENCH_B = 100
BENCH_KEY_BITS = 512


@dataclass(frozen=True)
class BenchRow:
    protocol: str
    n: int
    d: int
    messages: int
    bytes: int
    rounds: int
    wall_time_ms: float
    seed: int

    def as_dict(self, timing: bool = True) -> dict:
        return {
            "protocol": self.protocol,
            "n": self.n,
            "d": self.d,
            "messages": self.messages,
            "bytes": self.bytes,
            "rounds": self.rounds,
            "wall_time_ms": f"{self.wall_time_ms:.3f}" if timing else "",
            "seed": self.seed,
        }


def _instance(protocol: str, n: int, seed: int, mode: str) -> DotProductInstance:
    rng = random.Random(derive_seed("bench", protocol, n, seed))
    return DotProductInstance.random(n, BENCH_B, rng, mode=mode, protocol=protocol, seed=seed)


def bench_one(protocol: str, n: int, seed: int = 0, key_bits: int = BENCH_KEY_BITS) -> BenchRow:
    """One run; key generation is outside the timed region.

    ``pdsmm`` measures a single matrix entry, whose volume is what scales
    linearly; the full product is ``n^2`` such entries run in parallel.
    """
    slack = max(8, key_bits - (BENCH_B * BENCH_B * n).bit_length())
    if protocol == "dsdp":
        inst = _instance(protocol, n, seed, PAILLIER_CHAIN)
        net = network_for(inst, bit_slack=slack)
        t0 = time.perf_counter()
        metrics = run_dsdp(inst, net).metrics
    elif protocol == "pmpwp":
        inst = _instance(protocol, n, seed, PAILLIER_CHAIN)
        net = network_for(inst, bit_slack=slack)
        t0 = time.perf_counter()
        metrics = run_pmpwp(inst, net).metrics
    elif protocol == "mpwp":
        inst = _instance(protocol, n, seed, SHARED_MODULUS)
        keys = build_key_directory(n, SHARED_MODULUS, BENCH_B, bit_length=key_bits, seed=seed)
        net = Network(n, keys, seed)
        t0 = time.perf_counter()
        metrics = run_mpwp(inst, net).metrics
    elif protocol == "pdsmm":
        rng = random.Random(derive_seed("bench", protocol, n, seed))
        A = [[rng.randint(0, BENCH_B) for _ in range(n)] for _ in range(n)]
        Bm = [[rng.randint(0, BENCH_B) for _ in range(n)] for _ in range(n)]
        net = matmul_network(n, BENCH_B, PAILLIER_CHAIN, seed=seed, bit_slack=slack)
        t0 = time.perf_counter()
        _, metrics = run_pdsmm_entry(shares_from_matrices(A, Bm), 1, 1, net, B=BENCH_B)
    else:
        raise ParameterError(f"unknown bench protocol {protocol!r}; expected one of {BENCH_PROTOCOLS}")
    wall = (time.perf_counter() - t0) * 1000.0
    return BenchRow(protocol, n, 1, metrics.message_count, metrics.total_bytes, metrics.round_count, wall, seed)


def run_sweep(protocols: Sequence[str] = BENCH_PROTOCOLS, ns: Optional[dict] = None, seed: int = 0,
              key_bits: int = BENCH_KEY_BITS) -> list[BenchRow]:
    """Rows for every ``(protocol, n)``, sorted by ``(protocol, n, d)``."""
    rows = []
    for protocol in protocols:
        sizes = (ns or {}).get(protocol, DEFAULT_SWEEPS.get(protocol))
        if sizes is None:
            raise ParameterError(f"unknown bench protocol {protocol!r}")
        rows += [bench_one(protocol, n, seed, key_bits) for n in sizes]
    return sorted(rows, key=lambda r: (r.protocol, r.n, r.d))


def fit_exponent(ns: Sequence[float], values: Sequence[float]) -> float:
    """Slope of ``log(values)`` against ``log(ns)`` by least squares."""
    if len(ns) != len(values) or len(ns) < 2:
        raise ParameterError("need at least two points of equal-length series")
    slope, _ = np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(values, float)), 1)
    return float(slope)


def fitted_exponents(rows: Sequence[BenchRow], column: str = "bytes") -> dict[str, float]:
    out = {}
    for protocol in sorted({r.protocol for r in rows}):
        pts = sorted((r.n, getattr(r, column)) for r in rows if r.protocol == protocol)
        if len(pts) >= 2:
            out[protocol] = fit_exponent([p[0] for p in pts], [p[1] for p in pts])
    return out


def bench_csv(rows: Sequence[BenchRow], timing: bool = True) -> str:
    return metrics_csv([r.as_dict(timing) for r in rows], METRICS_HEADER)
