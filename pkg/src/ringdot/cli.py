"""Command-line front end: ``ringdot {keygen,dotprod,matmul,trust,attack,bench}``.

Exit codes: 0 success (or countermeasure held), 2 usage or precondition
error, 3 protocol abort, 4 attack succeeded.  Results are canonical JSON and
metrics are CSV, so repeated runs with one seed are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
import time
from typing import Optional, Sequence

import sympy

from .adversary import load_scenario, run_scenario
from .bench import BENCH_PROTOCOLS, DEFAULT_SWEEPS, BENCH_KEY_BITS, bench_csv, fitted_exponents, run_sweep
from .codec import canonical_json, derive_seed, from_hex, to_hex
from .dot import DotProductInstance, network_for, run_dsdp, run_esdp, run_mpwp, run_pmpwp
from .errors import ProtocolAbort, RingdotError
from .hom_cipher import DEFAULT_SEARCH_BOUND
from .matmul import (
    matmul_network,
    run_pdsmm,
    run_pdsmm_trust,
    run_wiretap,
    shares_from_matrices,
    trust_network,
    wiretap_network,
)
from .netsim import MODES, PAILLIER_CHAIN, SHARED_MODULUS, build_key_directory, metrics_csv, write_transcript
from .trust import PrecisionParams, TrustPair, coefficient_bound

EXIT_OK, EXIT_USAGE, EXIT_ABORT, EXIT_ATTACK = 0, 2, 3, 4
SEED_ENV = "RINGDOT_SEED"
DOT_PROTOCOLS = ("dsdp", "esdp", "mpwp", "pmpwp", "wiretap")


class UsageError(Exception):
    pass


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV, "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None


# ---------------------------------------------------------------------------
# inputs
# ---------------------------------------------------------------------------

def default_mode(protocol: str) -> str:
    return SHARED_MODULUS if protocol == "mpwp" else PAILLIER_CHAIN


def seeded_instance(protocol: str, n: int, B: int, seed: int, mode: str, proofs: bool = False,
                    signatures: bool = False) -> DotProductInstance:
    rng = random.Random(derive_seed("cli", protocol, n, B, seed))
    return DotProductInstance.random(n, B, rng, mode=mode, proofs=proofs, signatures=signatures,
                                     protocol=protocol, seed=seed)


def seeded_matrices(n: int, B: int, seed: int) -> tuple[list, list]:
    rng = random.Random(derive_seed("cli-matmul", n, B, seed))
    A = [[rng.randint(0, B) for _ in range(n)] for _ in range(n)]
    Bm = [[rng.randint(0, B) for _ in range(n)] for _ in range(n)]
    return A, Bm


def trust_modulus(p: int, n: int) -> int:
    """Smallest prime above the coefficient bound for aggregating ``n`` products."""
    return int(sympy.nextprime(coefficient_bound(p, n)))


def seeded_trust(n: int, p: int, M: int, seed: int) -> tuple[list, list]:
    rng = random.Random(derive_seed("cli-trust", n, p, seed))
    top = (1 << p) - 1

    def mat():
        return [[TrustPair(rng.randint(0, top), rng.randint(0, top), M) for _ in range(n)] for _ in range(n)]

    return mat(), mat()


def _read_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError(f"{path} must hold a JSON object")
    return doc


def _int_matrix(doc, key: str) -> list:
    try:
        return [[from_hex(x) if isinstance(x, str) else int(x) for x in row] for row in doc[key]]
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"matrix {key!r} is malformed: {exc}") from None


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------

def _write_bytes(path: Optional[str], data: bytes) -> None:
    if path is None:
        sys.stdout.write(data.decode("utf-8"))
        return
    with open(path, "wb") as fh:
        fh.write(data)


def _metrics_row(protocol: str, n: int, d: int, metrics, seed: int, wall_ms: Optional[float]) -> dict:
    return {
        "protocol": protocol,
        "n": n,
        "d": d,
        "messages": metrics.message_count,
        "bytes": metrics.total_bytes,
        "rounds": metrics.round_count,
        "wall_time_ms": f"{wall_ms:.3f}" if wall_ms is not None else "",
        "seed": seed,
    }


def _finish(args, result: dict, protocol: str, n: int, d: int, metrics, wall_ms: float, net=None) -> int:
    doc = dict(result, metrics=metrics.to_json() if metrics else None)
    _write_bytes(args.out, canonical_json(doc) + b"\n")
    if args.metrics and metrics is not None:
        row = _metrics_row(protocol, n, d, metrics, args.seed, wall_ms if args.timing else None)
        _write_bytes(args.metrics, metrics_csv([row]).encode("utf-8"))
    if args.transcript and net is not None:
        write_transcript(net, args.transcript)
    return EXIT_OK


def _abort(args, exc: ProtocolAbort, protocol: str) -> int:
    doc = {"protocol": protocol, "S": None, "aborted": True, "abort_reason": str(exc),
           "abort_step": exc.step, "metrics": None}
    _write_bytes(args.out, canonical_json(doc) + b"\n")
    print(f"protocol aborted: {exc}", file=sys.stderr)
    return EXIT_ABORT


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_keygen(args) -> int:
    mode = args.mode or PAILLIER_CHAIN
    keys = build_key_directory(args.n, mode, args.B, args.d, all_ring=args.all_ring, bit_slack=args.bit_slack,
                               seed=args.seed)
    doc = {"mode": mode, "n": args.n, "B": args.B, "d": args.d, "seed": args.seed,
           "M": to_hex(keys.M) if keys.M else None, "players": keys.snapshot()}
    _write_bytes(args.out, canonical_json(doc) + b"\n")
    return EXIT_OK


def cmd_dotprod(args) -> int:
    protocol = args.protocol
    mode = args.mode or default_mode(protocol)
    if args.input:
        doc = _read_json(args.input)
        try:
            inst = DotProductInstance.from_json(dict(doc, protocol=protocol, mode=mode, seed=args.seed,
                                                     proofs=args.proofs, signatures=args.signatures))
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"malformed instance: {exc}") from None
    else:
        inst = seeded_instance(protocol, args.n, args.B, args.seed, mode, args.proofs, args.signatures)
    inst.validate()
    d = args.d if protocol == "wiretap" else 1
    t0 = time.perf_counter()
    net = None
    try:
        if protocol == "wiretap":
            net = wiretap_network(inst, d)
            res = run_wiretap(inst, d, net)
            S, metrics = res.S, res.metrics
        else:
            net = network_for(inst)
            if protocol == "dsdp":
                res = run_dsdp(inst, net)
            elif protocol == "esdp":
                res = run_esdp(1, range(2, inst.n + 1), inst.U[1:], inst.V[1:], net, proofs=inst.proofs, B=inst.B)
            elif protocol == "mpwp":
                res = run_mpwp(inst, net)
            else:
                res = run_pmpwp(inst, net)
            S, metrics = res.S, res.metrics
    except ProtocolAbort as exc:
        return _abort(args, exc, protocol)
    wall = (time.perf_counter() - t0) * 1000.0
    result = {"protocol": protocol, "mode": inst.mode, "n": inst.n, "d": d, "seed": args.seed,
              "inputs": inst.to_json(), "S": to_hex(S), "aborted": False, "abort_reason": None}
    return _finish(args, result, protocol, inst.n, d, metrics, wall, net)


def cmd_matmul(args) -> int:
    mode = args.mode or PAILLIER_CHAIN
    if args.input:
        doc = _read_json(args.input)
        A, Bm = _int_matrix(doc, "A"), _int_matrix(doc, "B")
    elif args.identity:
        A = [[int(i == j) for j in range(args.n)] for i in range(args.n)]
        Bm = [row[:] for row in A]
    else:
        A, Bm = seeded_matrices(args.n, args.B, args.seed)
    n = len(A)
    bound = max(args.B, max(max(r) for r in A + Bm))
    shares = shares_from_matrices(A, Bm)
    net = matmul_network(n, bound, mode, seed=args.seed)
    t0 = time.perf_counter()
    try:
        res = run_pdsmm(shares, net, B=bound, mode=mode)
    except ProtocolAbort as exc:
        return _abort(args, exc, "pdsmm")
    wall = (time.perf_counter() - t0) * 1000.0
    result = {"protocol": "pdsmm", "mode": mode, "n": n, "seed": args.seed,
              "inputs": {"A": [[to_hex(x) for x in r] for r in A], "B": [[to_hex(x) for x in r] for r in Bm]},
              "C": [[to_hex(x) for x in r] for r in res.C], "aborted": False, "abort_reason": None}
    return _finish(args, result, "pdsmm", n, 1, res.metrics, wall, net)


def cmd_trust(args) -> int:
    n, p = args.n, args.p
    M = trust_modulus(p, n)
    PrecisionParams(p, n, M)
    if args.input:
        doc = _read_json(args.input)
        A = [[TrustPair.of(a, b, M) for a, b in row] for row in _int_matrix(doc, "A")]
        Bm = [[TrustPair.of(a, b, M) for a, b in row] for row in _int_matrix(doc, "B")]
        n = len(A)
    else:
        A, Bm = seeded_trust(n, p, M, args.seed)
    net = trust_network(n, M, args.seed, search_bound=max(DEFAULT_SEARCH_BOUND, M))
    t0 = time.perf_counter()
    try:
        res = run_pdsmm_trust(A, Bm, net, seed=args.seed)
    except ProtocolAbort as exc:
        return _abort(args, exc, "pdsmm-trust")
    wall = (time.perf_counter() - t0) * 1000.0

    def pairs(mat):
        return [[[to_hex(x.a), to_hex(x.b)] for x in row] for row in mat]

    result = {"protocol": "pdsmm-trust", "n": n, "p": p, "M": to_hex(M), "seed": args.seed,
              "inputs": {"A": pairs(A), "B": pairs(Bm)}, "C": pairs(res.C), "aborted": False, "abort_reason": None}
    return _finish(args, result, "pdsmm-trust", n, 1, res.metrics, wall, net)


def cmd_attack(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except OSError as exc:
        raise UsageError(f"cannot read scenario: {exc}") from None
    outcome = run_scenario(scenario)
    doc = dict(outcome.to_json(), scenario=scenario.to_json())
    _write_bytes(args.out, canonical_json(doc) + b"\n")
    return EXIT_ATTACK if outcome.succeeded else EXIT_OK


def cmd_bench(args) -> int:
    protocols = args.protocols or list(BENCH_PROTOCOLS)
    sizes = None
    if args.sizes:
        sizes = {p: tuple(args.sizes) for p in protocols}
    rows = run_sweep(protocols, sizes, args.seed, args.key_bits)
    _write_bytes(args.out, bench_csv(rows, timing=args.timing).encode("utf-8"))
    if args.fit:
        fits = fitted_exponents(rows)
        for protocol, slope in fits.items():
            print(f"{protocol}: bytes ~ n^{slope:.3f}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ringdot", description="Secure distributed dot products on a simulated network.")
    parser.add_argument("--config", help="JSON file whose keys provide defaults for the subcommand's flags")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = sub.choices

    def common(p, *, n=True, B=True, mode=True, outputs=True):
        p.add_argument("--seed", type=int, default=None, help=f"run seed (default: ${SEED_ENV} or 0)")
        if n:
            p.add_argument("--n", type=int, default=3, help="number of players (>= 3)")
        if B:
            p.add_argument("--B", type=int, default=100, help="bound on every private coefficient")
        if mode:
            p.add_argument("--mode", choices=MODES, default=None, help="cipher mode")
        if outputs:
            p.add_argument("--out", help="result JSON path (default: stdout)")
            p.add_argument("--metrics", help="metrics CSV path")
            p.add_argument("--transcript", help="message transcript JSONL path")
            p.add_argument("--timing", action="store_true", help="fill wall_time_ms (not reproducible)")

    p = sub.add_parser("keygen", help="generate key material and print the public part")
    common(p, outputs=False)
    p.add_argument("--d", type=_positive, default=1, help="occurrences the keys must support")
    p.add_argument("--bit-slack", type=int, default=32, help="extra modulus bits above the hypothesis bound")
    p.add_argument("--all-ring", action="store_true", help="give every player a ring key")
    p.add_argument("--out", help="output JSON path (default: stdout)")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("dotprod", help="run one dot-product protocol")
    common(p)
    p.add_argument("--protocol", choices=DOT_PROTOCOLS, default="dsdp")
    p.add_argument("--d", type=_positive, default=1, help="occurrences for the wiretap protocol")
    p.add_argument("--proofs", action="store_true", help="attach affine-transform proofs")
    p.add_argument("--signatures", action="store_true", help="sign every message")
    p.add_argument("--input", help="instance JSON with hex U and V")
    p.set_defaults(func=cmd_dotprod)

    p = sub.add_parser("matmul", help="parallel matrix product")
    common(p)
    p.add_argument("--identity", action="store_true", help="multiply two identity matrices")
    p.add_argument("--input", help="JSON with matrices A and B")
    p.set_defaults(func=cmd_matmul)

    p = sub.add_parser("trust", help="trust-pair matrix aggregation")
    common(p, B=False, mode=False)
    p.add_argument("--p", type=_positive, default=2, help="bits of fixed-point precision")
    p.add_argument("--input", help="JSON with matrices A and B of [trust, distrust] pairs")
    p.set_defaults(func=cmd_trust)

    p = sub.add_parser("attack", help="run an attack scenario")
    p.add_argument("--seed", type=int, default=None, help="unused; scenarios carry their own seed")
    p.add_argument("--scenario", required=True, help="scenario JSON path")
    p.add_argument("--out", help="outcome JSON path (default: stdout)")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("bench", help="communication sweep and exponent fit")
    p.add_argument("--seed", type=int, default=None, help=f"run seed (default: ${SEED_ENV} or 0)")
    p.add_argument("--protocols", nargs="+", choices=BENCH_PROTOCOLS, help="protocols to sweep (default: all)")
    p.add_argument("--sizes", nargs="+", type=int, help="player counts (default: per-protocol sweep "
                   + ", ".join(f"{k}={list(v)}" for k, v in DEFAULT_SWEEPS.items()) + ")")
    p.add_argument("--key-bits", type=int, default=BENCH_KEY_BITS, help="approximate modulus size")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--fit", action="store_true", help="print fitted volume exponents to stderr")
    p.add_argument("--no-timing", dest="timing", action="store_false", help="leave wall_time_ms empty")
    p.set_defaults(func=cmd_bench)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str], args) -> argparse.Namespace:
    doc = _read_json(args.config)
    known = {k for k in vars(args) if k not in ("func", "command", "config")}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {unknown}")
    parser.subcommands[args.command].set_defaults(**doc)
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        if args.config:
            args = _apply_config(parser, argv, args)
        if args.seed is None:
            args.seed = default_seed()
        if hasattr(args, "n") and args.n < 3:
            raise UsageError(f"need n >= 3 players, got {args.n}")
        return args.func(args)
    except ProtocolAbort as exc:
        print(f"protocol aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except (UsageError, RingdotError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
