"""Command-line entry point ``make-kex``.

Output is line oriented: lines starting with ``#`` are for humans, every
other line is a record of space-separated ``key=value`` pairs.

Exit codes: 0 success, 1 protocol failure or key mismatch, 2 usage error,
3 attack did not recover anything.
"""

from __future__ import annotations

import argparse
import logging
import os
import random
import statistics
import sys
import time
from dataclasses import dataclass, field

from . import attacks, netdemo, stats
from .matrix import count_multiplications
from .modmath import Residue, SafePrime, gen_safe_prime
from .paramgen import (
    ParameterError,
    builtin_prime,
    gen_adversarial_params,
    gen_private_exponent,
    gen_public_params,
    load_params,
    params_for_prime,
    validate_params,
)
from .protocol import InvalidParams, classic_dh_exchange, generator, random_generator, run_exchange

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_NOT_FOUND = 0, 1, 2, 3
STATED_SQUARING_MULTS = 24
DEFAULT_BRUTE_BOUND = 1 << 12


class UsageError(Exception):
    pass


@dataclass
class RunReport:
    command: str
    parameters: dict = field(default_factory=dict)
    outcome: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [f"# {n}" for n in self.notes]
        out.append(f"command={self.command}")
        for section in (self.parameters, self.outcome):
            out.extend(f"{k}={_fmt(v)}" for k, v in section.items())
        out.extend(f"time_{k}={v:.6f}" for k, v in self.timings.items())
        out.extend(" ".join(f"{k}={_fmt(v)}" for k, v in row.items()) for row in self.rows)
        return out

    def emit(self, stream=None) -> None:
        stream = stream or sys.stdout
        stream.write("\n".join(self.lines()) + "\n")
        stream.flush()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v).replace(" ", "_")


def parse_records(text: str) -> list[dict]:
    """Parse the machine-readable lines printed by any subcommand."""
    records = []
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        records.append(dict(tok.split("=", 1) for tok in line.split() if "=" in tok))
    return records


def _rng(seed):
    return random.Random(seed) if seed is not None else random.SystemRandom()


def _position(text: str) -> tuple[int, int]:
    try:
        i, j = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected i,j (1-based), got {text!r}") from None
    if i < 1 or j < 1:
        raise argparse.ArgumentTypeError("positions are 1-based")
    return (i - 1, j - 1)


def _bits_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _prime_from_args(args, rng) -> SafePrime:
    if getattr(args, "builtin_prime", False):
        return builtin_prime()
    if getattr(args, "prime", None):
        return params_for_prime(args.prime)
    if args.bits < 4:
        raise UsageError("--bits must be >= 4")
    return gen_safe_prime(args.bits, rng)


def _params_from_args(args, rng):
    if getattr(args, "params", None):
        with open(args.params, "rb") as fh:
            return load_params(fh.read())
    prime = _prime_from_args(args, rng)
    if getattr(args, "allow_invertible_h", False):
        return gen_adversarial_params(dim=args.dim, rng=rng, prime=prime)
    return gen_public_params(dim=args.dim, rng=rng, prime=prime)


def _describe(params, args) -> dict:
    return {"prime_bits": params.p.bit_length(), "dim": params.dim, "seed": args.seed if args.seed is not None else "none"}


def cmd_gen(args) -> int:
    rng = _rng(args.seed)
    start = time.perf_counter()
    params = _params_from_args(args, rng)
    elapsed = time.perf_counter() - start
    data = params.to_hex().encode() if args.hex else params.to_bytes()
    with open(args.out, "wb") as fh:
        fh.write(data)
    report = RunReport("gen", _describe(params, args), timings={"generate": elapsed})
    report.outcome.update(out=args.out, format="hex" if args.hex else "binary", bytes=len(data))
    problems = validate_params(params)
    report.outcome["valid"] = not problems
    if problems:
        report.outcome["violations"] = ",".join(p.replace(" ", "_") for p in problems)
        report.notes.append("generated parameters are deliberately non-compliant")
    report.notes.append(f"wrote {args.out}")
    report.emit()
    return EXIT_OK


def cmd_exchange(args) -> int:
    rng = _rng(args.seed)
    params = _params_from_args(args, rng)
    key_a, key_b, transcript = run_exchange(params, rng)
    agree = key_a.K == key_b.K
    report = RunReport("exchange", _describe(params, args))
    report.outcome.update(key_agree=agree, alice_digest=key_a.hex(), bob_digest=key_b.hex())
    report.timings.update(transcript.timings)
    report.notes.append(f"exchange over {params.p.bit_length()}-bit p, dim {params.dim}: " + ("keys agree" if agree else "KEYS DIFFER"))
    report.emit()
    return EXIT_OK if agree else EXIT_MISMATCH


def cmd_attack(args) -> int:
    rng = _rng(args.seed)
    report = RunReport("attack")
    report.parameters["method"] = args.method
    if args.method == "dlreduce":
        return _attack_dlreduce(args, rng, report)
    params = _params_from_args(args, rng)
    report.parameters.update(_describe(params, args))
    if args.secret:
        secret = args.secret
    elif args.method == "brute":
        secret = rng.randrange(1, (args.bound or DEFAULT_BRUTE_BOUND) + 1)
    else:
        secret = rng.randrange(1, params.p - 1)
    victim = attacks.token_for(params, secret)
    peer = attacks.token_for(params, gen_private_exponent(params.q, rng).value)
    honest = attacks.key_from_exponent(params, secret, victim, peer)
    report.parameters["secret"] = secret
    if args.method == "brute":
        outcome = attacks.brute_force_exponent(params, victim, args.bound or DEFAULT_BRUTE_BOUND, peer)
    else:
        try:
            outcome = attacks.determinant_attack(params, victim, peer)
        except attacks.AttackInapplicable as exc:
            report.outcome.update(method="det", success=False, applicable=False, reason=str(exc))
            report.notes.append(f"determinant attack inapplicable: {exc}")
            report.emit()
            return EXIT_NOT_FOUND
        report.outcome["applicable"] = True
    report.outcome.update({k: v for k, v in outcome.report().items() if k != "method"})
    if outcome.success:
        report.outcome["key_matches_honest"] = outcome.recovered_key == honest
        report.notes.append(f"{args.method}: recovered exponent {outcome.recovered_exponent} after {outcome.work} steps")
    else:
        report.notes.append(f"{args.method}: exponent not found")
    report.emit()
    return EXIT_OK if outcome.success else EXIT_NOT_FOUND


def _attack_dlreduce(args, rng, report: RunReport) -> int:
    prime = params_for_prime(args.prime) if args.prime else gen_safe_prime(args.bits, rng)
    p = prime.p
    g = Residue(args.g, p) if args.g else random_generator(p, rng)
    k = args.k if args.k is not None else rng.randrange(0, p - 1)
    gk = g ** k
    start = time.perf_counter()
    found = attacks.reduce_dlog_to_make(g, gk, attacks.brute_force_oracle(args.bound), rng)
    report.parameters.update(prime=p, g=g.value, k=k, seed=args.seed if args.seed is not None else "none")
    report.outcome.update(method="dlreduce", success=found is not None, recovered_k="" if found is None else found)
    report.timings["reduce"] = time.perf_counter() - start
    report.notes.append("discrete log " + ("recovered" if found is not None else "not recovered") + " via the exponent oracle")
    report.emit()
    return EXIT_OK if found is not None else EXIT_NOT_FOUND


def _stats_stream(args, rng):
    prime = _prime_from_args(args, rng)
    params = gen_public_params(dim=args.dim, rng=rng, prime=prime)
    start = time.perf_counter()
    keys = list(stats.sample_keys(params, args.trials, rng, fresh_params=args.fresh_params))
    return params, keys, time.perf_counter() - start


def _histogram_row(h, csv_path) -> dict:
    result = stats.chi_square_uniform(h)
    if csv_path:
        h.write_csv(csv_path)
    row = {"test": h.label, "trials": h.trials, "cells": len(h.counts), "chi2": round(result.statistic, 3), "critical": round(result.critical, 3), "pass": result.passed}
    if csv_path:
        row["csv"] = csv_path
    return row


def cmd_stats(args) -> int:
    rng = _rng(args.seed)
    params, keys, elapsed = _stats_stream(args, rng)
    report = RunReport("stats", _describe(params, args), timings={"sampling": elapsed})
    report.parameters.update(kind=args.kind, trials=args.trials)
    n = params.dim
    if args.kind == "entry":
        jobs = [(stats.entry_histogram(keys, args.pos), args.csv)]
    elif args.kind == "mean":
        jobs = [(stats.mean_histogram(keys, _one_based_selector(args.select)), args.csv)]
    elif args.kind == "pair":
        jobs = [(stats.pair_histogram(keys, args.pos1, args.pos2), args.csv)]
    else:
        hists = [stats.entry_histogram(keys, (0, 0)), stats.mean_histogram(keys, ("col", 0)), stats.mean_histogram(keys, ("all", None))]
        hists += [stats.mean_histogram(keys, (kind, i)) for kind in ("row", "col") for i in range(n) if (kind, i) != ("col", 0)]
        hists.append(stats.pair_histogram(keys, (0, 0), (1, 1)))
        if args.csv:
            os.makedirs(args.csv, exist_ok=True)
        jobs = [(h, os.path.join(args.csv, _csv_name(h.label)) if args.csv else None) for h in hists]
    for h, path in jobs:
        report.rows.append(_histogram_row(h, path))
    failed = [r["test"] for r in report.rows if not r["pass"]]
    report.outcome["all_pass"] = not failed
    report.notes.append(f"{len(report.rows)} chi-square tests at alpha={stats.ALPHA}; " + (f"failed: {', '.join(failed)}" if failed else "all pass"))
    report.emit()
    return EXIT_OK


def _csv_name(label: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in label).strip("_") + ".csv"


def _one_based_selector(text: str):
    kind, idx = stats.parse_selector(text)
    if idx is not None:
        if idx < 1:
            raise UsageError("row/column indices are 1-based")
        idx -= 1
    return (kind, idx)


def squaring_multiplications(dim: int = 3, bits: int = 16, seed: int = 0) -> tuple[int, int]:
    """Z_p multiplications in one semidirect squaring and in one matrix squaring."""
    params = gen_public_params(bits, dim, random.Random(seed))
    u = generator(params)
    with count_multiplications() as c:
        u.square()
    sd = c.count
    with count_multiplications() as c:
        _ = params.M @ params.M
    return sd, c.count


def bench_row(prime: SafePrime, dim: int, trials: int, rng) -> dict:
    params = gen_public_params(dim=dim, rng=rng, prime=prime)
    g = random_generator(prime.p, rng)
    make_times, dh_times = [], []
    for _ in range(trials):
        t0 = time.perf_counter()
        key_a, key_b, _ = run_exchange(params, rng, check=False)
        t1 = time.perf_counter()
        dh_a, dh_b = classic_dh_exchange(prime.p, g, rng)
        t2 = time.perf_counter()
        if key_a.K != key_b.K or dh_a != dh_b:
            raise AssertionError("benchmark exchange disagreed")
        make_times.append(t1 - t0)
        dh_times.append(t2 - t1)
    make_med, dh_med = statistics.median(make_times), statistics.median(dh_times)
    return {"bits": prime.bit_length, "dim": dim, "trials": trials, "make_median_s": make_med, "dh_median_s": dh_med, "ratio": make_med / dh_med}


def cmd_bench(args) -> int:
    rng = _rng(args.seed)
    report = RunReport("bench", {"dim": args.dim, "trials": args.trials, "seed": args.seed if args.seed is not None else "none"})
    for bits in args.bits:
        prime = builtin_prime() if bits == 2000 else gen_safe_prime(bits, rng)
        report.rows.append(bench_row(prime, args.dim, args.trials, rng))
    sd, sq = squaring_multiplications(args.dim)
    report.outcome.update(zp_mults_per_sd_squaring=sd, zp_mults_per_matrix_squaring=sq, stated_mults_per_squaring=STATED_SQUARING_MULTS)
    report.notes.append(f"{'bits':>6} {'make (s)':>10} {'dh (s)':>10} {'ratio':>8}")
    for row in report.rows:
        report.notes.append(f"{row['bits']:>6} {row['make_median_s']:>10.4f} {row['dh_median_s']:>10.5f} {row['ratio']:>8.1f}")
    report.notes.append(f"one {args.dim}x{args.dim} semidirect squaring = {sd} Z_p multiplications (one matrix squaring = {sq}; stated figure {STATED_SQUARING_MULTS})")
    report.emit()
    return EXIT_OK


def cmd_serve(args) -> int:
    rng = _rng(args.seed)
    params = _params_from_args(args, rng)

    def ready(addr):
        print(f"listening={addr[0]}:{addr[1]}", flush=True)

    start = time.perf_counter()
    try:
        result = netdemo.serve(args.listen, params, rng, ready=ready, timeout=args.timeout)
    except netdemo.KeyMismatch as exc:
        print(f"# {exc}\ncommand=serve\nkey_agree=false", flush=True)
        return EXIT_MISMATCH
    report = RunReport("serve", _describe(params, args), timings={"session": time.perf_counter() - start})
    report.outcome.update(peer=result.peer, key_agree=result.agreed, digest=result.digest.hex())
    report.emit()
    return EXIT_OK


def cmd_connect(args) -> int:
    rng = _rng(args.seed)
    start = time.perf_counter()
    try:
        result = netdemo.connect(args.remote, rng, timeout=args.timeout)
    except netdemo.KeyMismatch as exc:
        print(f"# {exc}\ncommand=connect\nkey_agree=false", flush=True)
        return EXIT_MISMATCH
    report = RunReport("connect", {"seed": args.seed if args.seed is not None else "none"}, timings={"session": time.perf_counter() - start})
    report.outcome.update(peer=result.peer, key_agree=result.agreed, digest=result.digest.hex())
    report.emit()
    return EXIT_OK


def _prime_options(p: argparse.ArgumentParser, default_bits: int) -> None:
    group = p.add_mutually_exclusive_group()
    group.add_argument("--bits", type=int, default=default_bits, help=f"safe prime size in bits (default {default_bits})")
    group.add_argument("--builtin-prime", action="store_true", help="use the built-in 2000-bit safe prime")
    group.add_argument("--prime", type=int, help="use this safe prime")
    p.add_argument("--dim", type=int, default=3, help="matrix dimension (default 3)")
    p.add_argument("--seed", type=int, help="RNG seed for reproducible output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="make-kex", description="Matrix action key exchange toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate public parameters")
    _prime_options(p, 64)
    p.add_argument("--out", required=True, help="output file")
    p.add_argument("--hex", action="store_true", help="write the hex text format")
    p.add_argument("--allow-invertible-h", action="store_true", help="deliberately weak parameters (invertible H1, H2)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("exchange", help="simulate both parties of one exchange")
    _prime_options(p, 64)
    p.add_argument("--params", help="parameters file written by gen")
    p.set_defaults(func=cmd_exchange)

    p = sub.add_parser("attack", help="run an attack on a generated instance")
    p.add_argument("method", choices=("brute", "det", "dlreduce"))
    _prime_options(p, 16)
    p.add_argument("--params", help="parameters file written by gen")
    p.add_argument("--secret", type=int, help="victim exponent (default random)")
    p.add_argument("--bound", type=int, help="brute-force search bound (default 4096; p for dlreduce)")
    p.add_argument("--allow-invertible-h", action="store_true", help="attack deliberately weak parameters")
    p.add_argument("--g", type=int, help="dlreduce: base (default a random generator)")
    p.add_argument("--k", type=int, help="dlreduce: exponent to recover (default random)")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("stats", help="chi-square uniformity tests on shared keys")
    kinds = p.add_subparsers(dest="kind", required=True)
    for name, help_text in (
        ("entry", "histogram of one entry of K"),
        ("mean", "histogram of in-field means of a row, column or all entries"),
        ("pair", "joint histogram of two entries"),
        ("suite", "all of the above; --csv names a directory"),
    ):
        k = kinds.add_parser(name, help=help_text)
        _prime_options(k, 200)
        k.add_argument("--trials", type=int, default=10_000)
        k.add_argument("--fresh-params", action="store_true", help="resample matrices every trial")
        k.add_argument("--csv", help="write histogram CSV here")
        if name == "entry":
            k.add_argument("--pos", type=_position, default=(0, 0), help="entry as i,j (1-based, default 1,1)")
        elif name == "mean":
            k.add_argument("--select", default="col:1", help="row:i, col:j (1-based) or all")
        elif name == "pair":
            k.add_argument("--pos1", type=_position, default=(0, 0))
            k.add_argument("--pos2", type=_position, default=(1, 1))
        k.set_defaults(func=cmd_stats)

    p = sub.add_parser("bench", help="time the exchange against scalar Diffie-Hellman")
    p.add_argument("--bits", type=_bits_list, default=[64, 256, 2000], help="comma-separated sizes; 2000 uses the built-in prime")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="answer one key exchange over TCP")
    _prime_options(p, 64)
    p.add_argument("--listen", default="127.0.0.1:7447", help="addr:port (port 0 picks a free one)")
    p.add_argument("--params", help="parameters file written by gen")
    p.add_argument("--timeout", type=float, default=60.0)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("connect", help="initiate a key exchange over TCP")
    p.add_argument("--remote", required=True, help="addr:port")
    p.add_argument("--seed", type=int)
    p.add_argument("--timeout", type=float, default=60.0)
    p.set_defaults(func=cmd_connect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (netdemo.ProtocolError, ConnectionError, TimeoutError) as exc:
        print(f"make-kex: protocol error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (UsageError, ParameterError, InvalidParams, ValueError, IndexError, OSError) as exc:
        print(f"make-kex: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
