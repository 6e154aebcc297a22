"""Command-line front end.

Every command prints a table.  CSV output starts with ``# key=value``
metadata lines followed by a header row; JSON output is an object with
``command``, ``meta`` and ``rows``.  Floats are written with ``repr`` so
both formats carry the same digits and re-parse bit-for-bit.

Columns per command:

  index       k, n_plus, n_minus, n
  roots       re, im, residual, box_winding, newton_iters, near_marginal
  growth      k, re, im               (empty / null when no growing mode)
  nyquist     s, re_w, im_w           (w(s + i0) in the z-plane)
  zone        sigma, tau              (right branch of the zone boundary)
  evolve      t, re_g, im_g, abs_g
  two-stream  k, a, c, b, M, pv_c, criterion, n, lemma5_lhs, lemma5, lemma6_lhs, lemma6
  validate    check, value, ok

Exit status: 0 success, 1 numerical failure, 2 hypothesis violation or
malformed input.  ``VSTAB_THREADS`` caps the worker threads used by k-scans.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import __version__
from .errors import HypothesisViolation, InvalidInput, NumericalFailure, VstabError
from .profiles import PRESETS, VelocityProfile, critical_points, load_profile, moment, preset

log = logging.getLogger("vstab")

EXIT_OK, EXIT_NUMERIC, EXIT_HYPOTHESIS = 0, 1, 2


# ---------------------------------------------------------------- argument helpers


def parse_range(text: str) -> np.ndarray:
    """``a:b:n`` -> ``n`` samples from ``a`` to ``b`` inclusive."""
    parts = text.split(":")
    if len(parts) != 3:
        raise InvalidInput(f"range {text!r} must look like a:b:n", "range")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise InvalidInput(f"range {text!r}: {exc}", "range") from None
    if n < 1 or not (math.isfinite(a) and math.isfinite(b)):
        raise InvalidInput(f"range {text!r} is empty or not finite", "range")
    if n == 1 and a != b:
        raise InvalidInput(f"range {text!r}: one sample needs a == b", "range")
    return np.linspace(a, b, n)


def parse_floats(text: str, count: int, name: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        vals = []
    if len(vals) != count or not all(math.isfinite(v) for v in vals):
        raise InvalidInput(f"--{name} expects {count} comma-separated numbers, got {text!r}", name)
    return vals


def resolve_profile(ref: str) -> VelocityProfile:
    """A JSON file path, or else a preset name such as ``two_stream``, ``twostream`` or ``twostream.json``."""
    path = Path(ref)
    if path.is_file():
        return load_profile(path)
    name = (path.stem if path.suffix == ".json" else ref).replace("_", "").replace("-", "").lower()
    for key in PRESETS:
        if key.replace("_", "") == name:
            return preset(key)
    raise InvalidInput(f"profile {ref!r} is neither a readable file nor a preset ({', '.join(PRESETS)})", "profile")


def _threads() -> int:
    raw = os.environ.get("VSTAB_THREADS", "")
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise InvalidInput(f"VSTAB_THREADS={raw!r} is not an integer", "VSTAB_THREADS") from None
    if n < 1:
        raise InvalidInput("VSTAB_THREADS must be at least 1", "VSTAB_THREADS")
    return n


def scan(fun: Callable[[float], Any], ks: Sequence[float]) -> list[Any]:
    """Map over ``ks`` with up to ``VSTAB_THREADS`` workers; results keep the order of ``ks``."""
    n = min(_threads(), len(ks))
    if n <= 1:
        return [fun(k) for k in ks]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fun, ks))


# ---------------------------------------------------------------- output


def _cell(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _plain(x: Any) -> Any:
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        x = float(x)
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def render(command: str, columns: Sequence[str], rows: Sequence[dict], meta: dict, fmt: str) -> str:
    if fmt == "json":
        doc = {"command": command,
               "meta": {k: _plain(v) for k, v in meta.items()},
               "rows": [{c: _plain(r.get(c)) for c in columns} for r in rows]}
        return json.dumps(doc, indent=1) + "\n"
    buf = io.StringIO()
    for key, val in meta.items():
        buf.write(f"# {key}={_cell(val)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


# ---------------------------------------------------------------- commands


def cmd_index(args, p):
    from .penrose import index_at_k0, instability_index

    ks = [float(k) for k in parse_range(args.k_range)]

    def one(k: float) -> dict:
        if k == 0:
            res = index_at_k0(p)
            return {"k": k, "n_plus": None, "n_minus": None, "n": int(res.unstable)}
        rep = instability_index(p, k)
        return {"k": k, "n_plus": rep.n_plus, "n_minus": rep.n_minus, "n": rep.n}

    return ["k", "n_plus", "n_minus", "n"], scan(one, ks), {}


def cmd_roots(args, p):
    from .roots import find_roots

    region = None
    if args.box:
        sx, sy, ex, ey = parse_floats(args.box, 4, "box")
        region = (complex(sx, sy), complex(ex, ey))
    roots = find_roots(p, args.k, region)
    rows = [r.to_dict() for r in roots]
    return ["re", "im", "residual", "box_winding", "newton_iters", "near_marginal"], rows, {"k": args.k}


def cmd_growth(args, p):
    from .roots import growth_curve

    ks = [float(k) for k in parse_range(args.k_range)]
    if _threads() > 1:
        pairs = scan(lambda k: growth_curve(p, [k])[0], ks)
    else:
        pairs = growth_curve(p, ks)
    rows = [{"k": k, "re": None if lam is None else lam.real, "im": None if lam is None else lam.imag}
            for k, lam in pairs]
    return ["k", "re", "im"], rows, {}


def cmd_nyquist(args, p):
    from .penrose import _oriented
    from .quadrature import plemelj_boundary

    q, kk, _ = _oriented(p, args.k)
    rows = []
    for s in parse_range(args.s_range):
        w = plemelj_boundary(q, kk, float(s), "plus")
        rows.append({"s": float(s), "re_w": w.real, "im_w": w.imag})
    return ["s", "re_w", "im_w"], rows, {"k": args.k}


def cmd_zone(args, p):
    from .dispersion import zone, zone_boundary

    z = zone(p)
    rows = [{"sigma": s, "tau": t} for s, t in zone_boundary(z, parse_range(args.tau_range))]
    return ["sigma", "tau"], rows, {"c": z.c}


def cmd_evolve(args, p):
    from .evolution import evolve_mode

    res = evolve_mode(p, args.k, T=args.T, dt=args.dt, n_v=args.n_v, record_every=args.record_every)
    rows = [{"t": t, "re_g": g.real, "im_g": g.imag, "abs_g": a} for t, g, a in zip(res.times, res.g, res.g_abs)]
    meta = {"k": args.k, "fitted_rate": res.fitted_rate, "fit_r2": res.fit_r2,
            "fit_start": res.fit_window[0], "fit_end": res.fit_window[1],
            "inconclusive": res.inconclusive, "stopped_early": res.stopped_early}
    if args.compare_roots:
        from .penrose import instability_index
        from .roots import find_roots

        rate = 0.0
        if instability_index(p, args.k).n > 0:
            rate = max(r.lam.real for r in find_roots(p, args.k))
        meta["root_rate"] = rate
        meta["ratio"] = res.fitted_rate / rate if rate > 0 else None
    return ["t", "re_g", "im_g", "abs_g"], rows, meta


def cmd_two_stream(args, p):
    from .penrose import (instability_index, lemma5_check, lemma5_lhs, lemma6_check, lemma6_lhs,
                          two_stream_criterion, two_stream_geometry)
    from .quadrature import pv_cauchy

    g = two_stream_geometry(p)
    row = {"k": args.k, "a": g.a, "c": g.c, "b": g.b, "M": g.M, "pv_c": pv_cauchy(p, g.c),
           "criterion": two_stream_criterion(p, g, args.k), "n": instability_index(p, args.k).n}
    if args.lemma5:
        xi, eta = parse_floats(args.lemma5, 2, "lemma5")
        row["lemma5_lhs"] = lemma5_lhs(p, g, xi, eta)
        row["lemma5"] = lemma5_check(p, g, args.k, xi, eta)
    if args.lemma6:
        sigma, tau = parse_floats(args.lemma6, 2, "lemma6")
        row["lemma6_lhs"] = lemma6_lhs(p, g, sigma, tau)
        row["lemma6"] = lemma6_check(p, g, args.k, sigma, tau)
    cols = ["k", "a", "c", "b", "M", "pv_c", "criterion", "n", "lemma5_lhs", "lemma5", "lemma6_lhs", "lemma6"]
    return cols, [row], {}


def validate_profile(p: VelocityProfile) -> list[dict]:
    """Profile invariant suite: zero net slope, finite weighted moments, tail decay, critical points."""
    rows = []
    absphi = moment(p, "int_absphi")
    net = moment(p, "int_phi")
    rows.append({"check": "int_phi_zero", "value": net, "ok": abs(net) <= 1e-10 * max(absphi, 1e-300)})
    m8 = absphi + moment(p, "int_absv_absphi")
    rows.append({"check": "int_1_plus_absv_absphi_finite", "value": m8, "ok": math.isfinite(m8)})
    m3 = moment(p, "int_absv3_absphi")
    rows.append({"check": "int_absv3_absphi_finite", "value": m3, "ok": math.isfinite(m3)})
    rows.append({"check": "tail_mass_small", "value": p.tail_mass, "ok": p.tail_mass <= 1e-12 * absphi})
    if p.f0 is not None:
        v = p.grid(20001)
        low = float(np.min(p.f0(v)))
        rows.append({"check": "f0_nonnegative", "value": low, "ok": low >= -1e-14 * float(np.max(p.f0(v)))})
    try:
        n_cp = len(critical_points(p))
        rows.append({"check": "critical_points_nondegenerate", "value": float(n_cp), "ok": n_cp > 0})
    except HypothesisViolation as exc:
        log.error("%s", exc)
        rows.append({"check": "critical_points_nondegenerate", "value": None, "ok": False})
    return rows


def cmd_validate(args, p):
    rows = validate_profile(p)
    return ["check", "value", "ok"], rows, {"kind": p.kind, "passed": all(r["ok"] for r in rows)}


COMMANDS = {
    "index": cmd_index, "roots": cmd_roots, "growth": cmd_growth, "nyquist": cmd_nyquist,
    "zone": cmd_zone, "evolve": cmd_evolve, "two-stream": cmd_two_stream, "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--profile", required=True, help="profile JSON file or preset name")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--output", "-o", help="write here instead of stdout")
    common.add_argument("--json", action="store_const", dest="format", const="json", help="same as --format json")

    parser = argparse.ArgumentParser(prog="vstab", description=__doc__.split("\n\n")[0],
                                     epilog=__doc__.split("\n\n", 1)[1],
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", parents=[common], help="instability index over a k range")
    p.add_argument("--k-range", required=True, help="a:b:n")

    p = sub.add_parser("roots", parents=[common], help="certified growing roots at one k")
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--box", help="sx,sy,ex,ey corners in the lambda plane")

    p = sub.add_parser("growth", parents=[common], help="fastest growing root over a k range")
    p.add_argument("--k-range", required=True)
    p.add_argument("--csv", help="write CSV here")

    p = sub.add_parser("nyquist", parents=[common], help="boundary curve w(s + i0)")
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--s-range", required=True)

    p = sub.add_parser("zone", parents=[common], help="boundary of the root-free zone")
    p.add_argument("--tau-range", required=True)

    p = sub.add_parser("evolve", parents=[common], help="time-domain mode integration")
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--n-v", type=int, default=512)
    p.add_argument("--record-every", type=int, default=1)
    p.add_argument("--csv", help="write CSV here")
    p.add_argument("--compare-roots", action="store_true", help="add the root growth rate and the ratio")

    p = sub.add_parser("two-stream", parents=[common], help="two-stream criteria at one k")
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--lemma5", help="xi,eta")
    p.add_argument("--lemma6", help="sigma,tau")

    sub.add_parser("validate", parents=[common], help="profile invariant report")
    return parser


def run(args: argparse.Namespace, out=None) -> int:
    out = out or sys.stdout
    fmt, target = args.format, args.output
    if getattr(args, "csv", None):
        fmt, target = "csv", args.csv
    try:
        p = resolve_profile(args.profile)
        columns, rows, meta = COMMANDS[args.command](args, p)
    except (HypothesisViolation, InvalidInput) as exc:
        print(f"vstab {args.command}: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (NumericalFailure, VstabError) as exc:
        print(f"vstab {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = render(args.command, columns, rows, meta, fmt)
    if target:
        Path(target).write_text(text)
    else:
        out.write(text)
    if args.command == "validate" and not meta["passed"]:
        return EXIT_HYPOTHESIS
    return EXIT_OK


VALUE_FLAGS = ("--k-range", "--s-range", "--tau-range", "--k", "--box", "--lemma5", "--lemma6")


def _glue_negative(argv: Sequence[str]) -> list[str]:
    # argparse takes "-6:6:2000" for an option; bind such values to their flag
    out: list[str] = []
    it = iter(argv)
    for tok in it:
        if tok in VALUE_FLAGS:
            nxt = next(it, None)
            if nxt is not None and nxt.startswith("-") and len(nxt) > 1 and (nxt[1].isdigit() or nxt[1] == "."):
                out.append(f"{tok}={nxt}")
                continue
            out.append(tok)
            if nxt is not None:
                out.append(nxt)
            continue
        out.append(tok)
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(_glue_negative(sys.argv[1:] if argv is None else argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
