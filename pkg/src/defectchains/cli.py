"""Command-line entry point ``singular``.

Commands print JSON to stdout; ``--out`` writes it to a file instead. Exit
codes: 0 success, 2 input error, 3 unresolved degeneracy, 4 solver cap.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .field import FieldError, PRESETS, SampledField, make_grid, preset
from .flatnorm import FlatNormCapError, flat_norm, relative_flat_norm
from .io import FieldFileError, export_defects, load_defects, parse_field, write_field
from .lifting import LiftingError, lift_circle_field
from .reports import (
    continuity_report, jacobian_integral_check, mass_coarea_report, n_valued_stability, projection_estimate,
)
from .singular import DegeneracyError, SingularError, singular_set
from .target import TARGETS

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE, EXIT_CAP = 0, 2, 3, 4


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _emit(args, payload) -> None:
    text = payload if isinstance(payload, str) else json.dumps(payload, indent=None)
    if args.out:
        Path(args.out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _load(args, attr: str = "field") -> SampledField:
    u = parse_field(getattr(args, attr))
    if getattr(args, "target", None):
        u = SampledField(u.grid, u.values, args.target)
    return u


# -- commands ---------------------------------------------------------------------

def cmd_gen(args) -> int:
    kwargs = {}
    if args.counts:
        counts = _ints(args.counts)
        kwargs["counts"] = tuple(counts) if args.preset == "noise" else counts[0]
    if args.preset == "degree-n":
        kwargs["n"] = args.degree
    if args.preset == "noise":
        kwargs["rng"] = args.seed
        kwargs["m"] = args.m
    u = preset(args.preset, **kwargs)
    if args.origin or args.spacing:
        # regrid the same values onto an explicit box
        origin = _floats(args.origin) if args.origin else list(u.grid.lower)
        spacing = _floats(args.spacing) if args.spacing else [float(h) for h in u.grid.spacing]
        from .mesh import GridSpec

        u = SampledField(GridSpec(tuple(origin), tuple(spacing), u.grid.counts), u.values, u.target)
    if args.out:
        write_field(u, args.out, blob=args.blob)
        return EXIT_OK
    header = {**u.to_json_header(), "endianness": "little", "values": u.values.tolist()}
    sys.stdout.write(json.dumps(header) + "\n")
    return EXIT_OK


def cmd_extract(args) -> int:
    u = _load(args)
    y = _floats(args.y) if args.y else None
    S = singular_set(u, args.target or u.target, y, backend=args.backend, interpolation=args.interpolation,
                     rng=args.seed)
    _emit(args, export_defects(S, args.format))
    return EXIT_OK


def cmd_flatnorm(args) -> int:
    u = _load(args)
    chain = load_defects(json.loads(Path(args.chain).read_text()), u)
    if args.box:
        lo_hi = _floats(args.box)
        d = u.dim
        lo, hi = np.array(lo_hi[:d]), np.array(lo_hi[d:])

        def region(x):
            return np.all((x > lo) & (x < hi), axis=1)
        res = relative_flat_norm(chain, region, certify=args.certify)
    else:
        res = flat_norm(chain, certify=args.certify)
    _emit(args, {"value": float(res.value), "exactness": res.exactness, "P_cells": len(res.P),
                 "Q_cells": len(res.Q)})
    return EXIT_OK


def cmd_lift(args) -> int:
    u = _load(args)
    L = lift_circle_field(u, minimize_cut=args.minimize_cut)
    _emit(args, {"theta": L.theta.tolist(), "cut": L.cut.to_json(), "variation_report": L.variation,
                 "jumps": {str(k): v for k, v in L.jumps.items()}})
    return EXIT_OK


def cmd_check_jacobian(args) -> int:
    u = _load(args)
    rep = jacobian_integral_check(u, args.samples, seed=args.seed, threads=args.threads,
                                  interpolation=args.interpolation)
    _emit(args, rep.to_json())
    return EXIT_OK


def cmd_report(args) -> int:
    u = _load(args)
    kw = dict(seed=args.seed, threads=args.threads)
    if args.kind == "mass":
        rep = mass_coarea_report(u, args.samples, **kw)
    elif args.kind == "continuity":
        if not args.field2:
            raise FieldFileError("continuity report needs --field2")
        rep = continuity_report(u, _load(args, "field2"), args.samples, **kw)
    elif args.kind == "stability":
        rep = n_valued_stability(u, args.samples, **kw)
    else:
        rep = projection_estimate(u, args.samples, **kw)
    _emit(args, rep.to_json())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for all offset sampling")
    common.add_argument("--threads", type=int, default=1, help="worker threads for offset ensembles")
    common.add_argument("--out", help="write output here instead of stdout")

    p = argparse.ArgumentParser(prog="singular", description="Topological singular sets of sampled fields.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a preset field file")
    g.add_argument("--preset", choices=sorted(PRESETS), required=True)
    g.add_argument("--counts", help="cells per axis, e.g. 64 or 32,32")
    g.add_argument("--origin", help="grid origin override, comma separated")
    g.add_argument("--spacing", help="grid spacing override, comma separated")
    g.add_argument("--degree", type=int, default=1, help="degree for the degree-n preset")
    g.add_argument("--m", type=int, default=2, help="value dimension for the noise preset")
    g.add_argument("--blob", action="store_true", help="store values in a little-endian float64 sidecar")
    g.set_defaults(func=cmd_gen)

    def field_args(sp, target=True):
        sp.add_argument("--field", required=True)
        if target:
            sp.add_argument("--target", choices=sorted(TARGETS))

    e = sub.add_parser("extract", parents=[common], help="extract S_y(u)")
    field_args(e)
    e.add_argument("--y", help="offset, comma separated")
    e.add_argument("--backend", choices=["auto", "link", "preimage"], default="auto")
    e.add_argument("--interpolation", choices=["auto", "pl", "geodesic"], default="auto")
    e.add_argument("--format", choices=["json", "csv", "svg", "obj"], default="json")
    e.set_defaults(func=cmd_extract)

    f = sub.add_parser("flatnorm", parents=[common], help="flat norm of an extracted chain")
    field_args(f)
    f.add_argument("--chain", required=True, help="json output of extract")
    f.add_argument("--box", help="relative region lo..., hi... (comma separated)")
    f.add_argument("--certify", action="store_true")
    f.set_defaults(func=cmd_flatnorm)

    lf = sub.add_parser("lift", parents=[common], help="lift a circle-valued field")
    field_args(lf, target=False)
    lf.add_argument("--minimize-cut", dest="minimize_cut", action="store_true", default=True)
    lf.add_argument("--no-minimize-cut", dest="minimize_cut", action="store_false")
    lf.set_defaults(func=cmd_lift, target=None)

    j = sub.add_parser("check-jacobian", parents=[common], help="Monte-Carlo Jacobian formula check")
    field_args(j)
    j.add_argument("--samples", type=int, default=2000)
    j.add_argument("--interpolation", choices=["auto", "pl", "geodesic"], default="auto")
    j.set_defaults(func=cmd_check_jacobian)

    r = sub.add_parser("report", parents=[common], help="Monte-Carlo reports")
    r.add_argument("kind", choices=["mass", "continuity", "stability", "projection"])
    field_args(r)
    r.add_argument("--field2", help="second field for continuity")
    r.add_argument("--samples", type=int, default=200)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except DegeneracyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except FlatNormCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (FieldFileError, FieldError, SingularError, LiftingError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
