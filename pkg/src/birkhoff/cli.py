"""Command-line interface.

Subcommands cover the spectrum sweep, pointwise pressure evaluation, the
Moebius sieve, counting verification schedules, the transport map, and the
degenerate block-weight example.  All outputs are machine-readable (CSV or
JSON), stamped with a schema version, and byte-identical across runs for a
fixed (configuration, seed) pair.

Exit codes: 0 success, 2 invalid input, 3 numerical failure,
4 verification outside its slack band.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    BirkhoffError,
    CapExceeded,
    DegeneratePotential,
    DimensionMismatch,
    LimitTooLarge,
    OutsideDomain,
    PrefixTooShort,
)
from .oracle import DpConfig, degenerate_weight_example, empirical_spectrum_check
from .pressure import PotentialTable, minimize_pressure, pressure_iid, scalar_mean_range
from .spectrum import empirical_domain, spectrum_curve
from .weights import (
    MOEBIUS_PLUSMINUS_DENSITY,
    MOEBIUS_ZERO_DENSITY,
    _occurrence_map,
    moebius_sieve,
    stream_from_descriptor,
    target_frequency,
    transport_apply,
    transport_mn,
)

SCHEMA_VERSION = 1
CSV_SCHEMA_LINE = "# birkhoff-spectrum-csv v1"


class CliInputError(Exception):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _jsonable_float(x: float):
    return float(x) if math.isfinite(x) else None


def _load_json_file(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliInputError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliInputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _load_potential(path: str) -> PotentialTable:
    data = _load_json_file(path)
    try:
        return PotentialTable.from_json(json.dumps(data))
    except (KeyError, ValueError, TypeError) as exc:
        raise CliInputError(f"{path}: invalid potential table: {exc}") from exc


def _load_stream(path: str, seed=None):
    data = _load_json_file(path)
    if seed is not None and data.get("kind") in ("bernoulli", "markov"):
        data = dict(data)
        data["seed"] = seed
    try:
        return stream_from_descriptor(data)
    except (KeyError, ValueError, TypeError) as exc:
        raise CliInputError(f"{path}: invalid weight stream: {exc}") from exc


def _parse_grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise CliInputError(f"grid must be lo:hi:n, got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise CliInputError(f"grid must be lo:hi:n, got {text!r}") from exc
    if n < 2 or hi < lo:
        raise CliInputError("grid needs hi >= lo and n >= 2")
    return np.linspace(lo, hi, n)


def _parse_schedule(text: str) -> list[tuple[int, float]]:
    out = []
    for item in text.split(","):
        bits = item.split(":")
        if len(bits) != 2:
            raise CliInputError(f"schedule entries are n:epsilon, got {item!r}")
        try:
            out.append((int(bits[0]), float(bits[1])))
        except ValueError as exc:
            raise CliInputError(f"schedule entries are n:epsilon, got {item!r}") from exc
    return out


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise CliInputError(f"expected comma-separated reals, got {text!r}") from exc


def _write_text(path, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        Path(path).write_text(text)


def _dump_json(payload) -> str:
    return json.dumps(payload, indent=2, allow_nan=False)


def _thread_cap() -> int:
    raw = os.environ.get("BIRKHOFF_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# Subcommands

def _cmd_spectrum(args) -> int:
    table = _load_potential(args.potential)
    stream = _load_stream(args.weights, seed=args.seed)
    q = target_frequency(stream)
    grid = _parse_grid(args.grid)
    if table.d != 1:
        raise CliInputError("spectrum sweeps need a scalar potential (d = 1)")
    points = spectrum_curve(q, table, grid)

    lines = [CSV_SCHEMA_LINE, "alpha,p_star,entropy,status"]
    for pt in points:
        p_star = _fmt(pt.p_star[0]) if pt.p_star is not None else ""
        lines.append(
            f"{_fmt(pt.alpha_scalar)},{p_star},{_fmt(pt.entropy)},{pt.status.value}"
        )
    _write_text(args.out, "\n".join(lines) + "\n")

    iv = scalar_mean_range(q, table)
    domain = {"lo": iv.lo, "hi": iv.hi}
    sidecar = {
        "schema_version": SCHEMA_VERSION,
        "command": "spectrum",
        "version": __version__,
        "seed": args.seed,
        "domain": domain,
        "empirical_domain": empirical_domain(points),
        "boundary_convention": "endpoint values are the extremal-symbol counting limit",
        "points": [
            {
                "alpha": pt.alpha_scalar,
                "p_star": _jsonable_float(pt.p_star[0]) if pt.p_star is not None else None,
                "entropy": _jsonable_float(pt.entropy),
                "status": pt.status.value,
                "equilibrium": pt.equilibrium.probs.tolist() if pt.equilibrium else None,
            }
            for pt in points
        ],
    }
    sidecar_path = args.sidecar
    if sidecar_path is None and args.out not in (None, "-"):
        sidecar_path = str(Path(args.out).with_suffix(".json"))
    if sidecar_path is not None:
        _write_text(sidecar_path, _dump_json(sidecar) + "\n")
    return 0


def _cmd_pressure(args) -> int:
    table = _load_potential(args.potential)
    stream = _load_stream(args.weights, seed=args.seed)
    q = target_frequency(stream)
    p = _parse_floats(args.p)
    alpha = _parse_floats(args.alpha)
    ev = pressure_iid(q, table, p, alpha)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "pressure",
        "p": p,
        "alpha": alpha,
        "value": ev.value,
        "gradient": ev.gradient.tolist(),
        "hessian": ev.hessian.tolist(),
    }
    if args.minimize:
        res = minimize_pressure(q, table, alpha)
        payload["minimum"] = {
            "status": res.status.value,
            "p_star": res.p_star.tolist() if res.p_star is not None else None,
            "value": _jsonable_float(res.value),
        }
    _write_text(args.out, _dump_json(payload) + "\n")
    return 0


def _cmd_mobius(args) -> int:
    mu = moebius_sieve(args.limit)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "mobius",
        "limit": args.limit,
        "mertens_sum": int(mu[1:].astype(np.int64).sum()),
    }
    if args.freq:
        counts = {
            "plus": int((mu[1:] == 1).sum()),
            "minus": int((mu[1:] == -1).sum()),
            "zero": int((mu[1:] == 0).sum()),
        }
        freqs = {k: v / args.limit for k, v in counts.items()}
        expected = {
            "plus": MOEBIUS_PLUSMINUS_DENSITY,
            "minus": MOEBIUS_PLUSMINUS_DENSITY,
            "zero": MOEBIUS_ZERO_DENSITY,
        }
        payload.update(
            counts=counts,
            frequencies=freqs,
            expected=expected,
            max_abs_deviation=max(abs(freqs[k] - expected[k]) for k in freqs),
        )
    _write_text(args.out, _dump_json(payload) + "\n")
    return 0


def _cmd_verify(args) -> int:
    table = _load_potential(args.potential)
    stream = _load_stream(args.weights, seed=args.seed)
    q = target_frequency(stream)
    schedule = _parse_schedule(args.schedule)
    cfg = DpConfig(mode=args.mode, bucket_width=args.delta)
    try:
        report = empirical_spectrum_check(q, table, stream, args.alpha, schedule,
                                          cfg=cfg, max_workers=_thread_cap())
    except CapExceeded as exc:
        raise CliInputError(
            f"{exc}; exact mode cannot handle this n, rerun with --mode dp"
        ) from exc
    predicted = report.predicted if args.predicted_entropy is None else args.predicted_entropy
    entries = []
    all_ok = True
    for e in report.entries:
        ok = (predicted - e.slack_lower) <= e.exponent <= (predicted + e.slack_upper)
        all_ok = all_ok and ok
        entries.append(
            {
                "n": e.n,
                "epsilon": e.epsilon,
                "count": str(e.count),
                "exponent": _jsonable_float(e.exponent),
                "predicted": predicted,
                "slack": {"lower": e.slack_lower, "upper": e.slack_upper},
                "within_band": ok,
            }
        )
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "verify",
        "alpha": report.alpha,
        "predicted": predicted,
        "prediction_status": report.prediction_status.value,
        "p_star_norm": report.p_star_norm,
        "mode": args.mode,
        "entries": entries,
        "all_within": all_ok,
    }
    _write_text(args.out, _dump_json(payload) + "\n")
    return 0 if all_ok else 4


def _cmd_transport(args) -> int:
    w = _load_stream(args.w, seed=args.seed)
    w_prime = _load_stream(args.wprime, seed=None if args.seed is None else args.seed + 1)
    m_n = transport_mn(w, w_prime, args.n)
    gamma = _occurrence_map(w, w_prime, min(args.n, 100_000))
    injective = len(np.unique(gamma)) == len(gamma)
    # Round trip on a synthetic payload: the forward image must be long
    # enough that the backward transport only reads computed entries.
    check_len = min(200, args.n)
    l_fwd = int(_occurrence_map(w_prime, w, check_len).max()) + 1
    payload_len = int(_occurrence_map(w, w_prime, l_fwd).max()) + 1
    payload = tuple(int(k % 5) for k in range(payload_len))
    forward = transport_apply(w, w_prime, payload, l_fwd)
    back = transport_apply(w_prime, w, tuple(forward), check_len)
    roundtrip_ok = tuple(back) == payload[:check_len]
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "transport",
        "n": args.n,
        "m_n": m_n,
        "ratio": m_n / args.n,
        "gamma_injective_on_prefix": bool(injective),
        "roundtrip_identity_ok": bool(roundtrip_ok),
        "roundtrip_length": check_len,
    }
    _write_text(args.out, _dump_json(payload) + "\n")
    return 0


def _cmd_example_degenerate(args) -> int:
    phi = _parse_floats(args.phi)
    if len(phi) != 2:
        raise CliInputError("--phi needs exactly two values, e.g. \"-1,2\"")
    report = degenerate_weight_example(
        (phi[0], phi[1]), growth=args.growth, m0=args.m0, n_blocks=args.blocks,
        alpha=args.alpha, epsilon=args.epsilon,
    )
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "example-degenerate",
        "phi": list(report.phi),
        "growth": report.growth,
        "m0": report.m0,
        "alpha": report.alpha,
        "block_fraction_p": report.block_fraction_p,
        "predicted_liminf": _jsonable_float(report.predicted_liminf),
        "full_entropy": report.full_entropy,
        "residual_ratio": report.residual_ratio,
        "scales": [
            {
                "n": r.n,
                "epsilon": r.epsilon,
                "count": str(r.count),
                "exponent": _jsonable_float(r.exponent),
            }
            for r in report.results
        ],
    }
    _write_text(args.out, _dump_json(payload) + "\n")
    return 0


# ---------------------------------------------------------------------------
# Parser

_LEADING_MINUS = re.compile(r"^-\d")


def _allow_negative_values(parser: argparse.ArgumentParser) -> None:
    # Option values like "-0.3:0.3:101" or "-1,2" must not be mistaken for
    # option flags; widen argparse's negative-number detection accordingly.
    parser._negative_number_matcher = _LEADING_MINUS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="birkhoff",
        description="Entropy spectra of weighted Birkhoff averages, with counting verification.",
    )
    _allow_negative_values(parser)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrum", help="sweep the spectrum over a grid of levels")
    sp.add_argument("--potential", required=True, help="potential table JSON file")
    sp.add_argument("--weights", required=True, help="weight stream descriptor JSON file")
    sp.add_argument("--grid", required=True, help="lo:hi:n")
    sp.add_argument("--out", default=None, help="CSV output path (default stdout)")
    sp.add_argument("--sidecar", default=None, help="JSON sidecar path (default: out with .json)")
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=_cmd_spectrum)

    pr = sub.add_parser("pressure", help="evaluate the closed-form pressure at one point")
    pr.add_argument("--potential", required=True)
    pr.add_argument("--weights", required=True)
    pr.add_argument("--p", required=True, help="comma-separated vector")
    pr.add_argument("--alpha", required=True, help="comma-separated vector")
    pr.add_argument("--minimize", action="store_true", help="also minimize over p")
    pr.add_argument("--out", default=None)
    pr.add_argument("--seed", type=int, default=None)
    pr.set_defaults(func=_cmd_pressure)

    mo = sub.add_parser("mobius", help="sieve the Moebius function and report frequencies")
    mo.add_argument("--limit", type=int, required=True)
    mo.add_argument("--freq", action="store_true", help="report symbol frequencies")
    mo.add_argument("--out", default=None)
    mo.set_defaults(func=_cmd_mobius)

    ve = sub.add_parser("verify", help="check counting exponents against the prediction")
    ve.add_argument("--potential", required=True)
    ve.add_argument("--weights", required=True)
    ve.add_argument("--alpha", type=float, required=True)
    ve.add_argument("--schedule", required=True, help="n1:eps1,n2:eps2,...")
    ve.add_argument("--mode", choices=("exact", "dp"), default="dp")
    ve.add_argument("--delta", type=float, default=None, help="DP bucket width (default eps/8)")
    ve.add_argument("--predicted-entropy", type=float, default=None,
                    help="override the predicted value (negative controls)")
    ve.add_argument("--out", default=None)
    ve.add_argument("--seed", type=int, default=None)
    ve.set_defaults(func=_cmd_verify)

    tr = sub.add_parser("transport", help="occurrence-matching transport between two streams")
    tr.add_argument("--w", required=True, help="stream descriptor JSON file")
    tr.add_argument("--wprime", required=True, help="stream descriptor JSON file")
    tr.add_argument("--n", type=int, required=True)
    tr.add_argument("--out", default=None)
    tr.add_argument("--seed", type=int, default=None)
    tr.set_defaults(func=_cmd_transport)

    de = sub.add_parser("example-degenerate", help="block-weight example with dropping exponents")
    de.add_argument("--phi", required=True, help="two potential values, e.g. \"-1,2\"")
    de.add_argument("--growth", type=int, default=4)
    de.add_argument("--blocks", type=int, default=3)
    de.add_argument("--m0", type=int, default=64)
    de.add_argument("--alpha", type=float, default=0.0)
    de.add_argument("--epsilon", type=float, default=None)
    de.add_argument("--out", default=None)
    de.set_defaults(func=_cmd_example_degenerate)

    for sub_parser in (sp, pr, mo, ve, tr, de):
        _allow_negative_values(sub_parser)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DimensionMismatch, DegeneratePotential, OutsideDomain, LimitTooLarge,
            PrefixTooShort, CapExceeded, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BirkhoffError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def console_main() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    console_main()
