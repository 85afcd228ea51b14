"""Command-line entry point: ``dsl <subcommand> ...``.

Exit codes are 0 on success, 1 on a domain error (its name goes to stderr)
and 2 on a usage error. Every run is deterministic for a given ``--seed``.
"""

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import circulation, classifier, hurwitz, modulus, package, semmes
from .errors import DSLError, InvalidPackage
from .geom import load_curve

PACKAGE_HELP = "built-in id (bing, whitehead, antoineN) or a package descriptor JSON file"


class UsageError(Exception):
    pass


def _package(args):
    source = args.package or args.package_opt
    if source is None:
        raise UsageError("a package is required (positional or --package)")
    try:
        return package.load_package(source)
    except FileNotFoundError:
        raise UsageError(f"no built-in package or file named {source!r}") from None
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise InvalidPackage(f"malformed descriptor {source}: {exc}") from None


def _add_package(p):
    p.add_argument("package", nargs="?", help=PACKAGE_HELP)
    p.add_argument("--package", dest="package_opt", metavar="PKG", help=PACKAGE_HELP)


def _emit(text, out):
    """Write text to a file, or to stdout when no path is given."""
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(data):
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _lam(value):
    lam = float(value)
    if not 0 < lam < 1:
        raise argparse.ArgumentTypeError(f"lambda must lie in (0, 1), got {value}")
    return lam


def _address(text):
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"address must be comma-separated integers, got {text!r}") from None


# ---------------------------------------------------------------------------
# subcommands


def cmd_package_validate(args):
    pkg = _package(args)
    pkg.validate()
    _emit(
        _json(
            {
                "id": pkg.package_id,
                "m": pkg.m,
                "genus": pkg.genus,
                "meridian_t": pkg.meridian_t,
                "contractible_children": pkg.contractible_children,
                "valid": True,
            }
        ),
        args.out,
    )


def cmd_package_realize(args):
    pkg = _package(args)
    tube = package.realize(pkg, args.address).tube
    _emit(_json({"package_id": pkg.package_id, "address": list(args.address), **tube.to_dict()}), args.out)


def _ref_from_json(data):
    address = tuple(int(i) for i in data["address"])
    voxel = data.get("voxel")
    return semmes.PointRef(address, None if voxel is None else int(voxel))


def _ref_label(ref):
    address = ".".join(map(str, ref.address)) or "root"
    return f"{address}:{'limit' if ref.voxel is None else ref.voxel}"


def _sample_pairs(space, count, rng):
    refs = []
    for _ in range(2 * count):
        k = int(rng.integers(0, space.depth + 1))
        address = tuple(int(i) for i in rng.integers(1, space.pkg.m + 1, size=k))
        refs.append(semmes.PointRef(address, int(rng.integers(0, space.shell.n))))
    return list(zip(refs[::2], refs[1::2]))


def cmd_metric(args):
    pkg = _package(args)
    space = semmes.assemble(pkg, args.lam, args.depth, h=args.h)
    if args.pairs:
        with open(args.pairs) as fh:
            raw = json.load(fh)
        pairs = [(_ref_from_json(p["a"]), _ref_from_json(p["b"])) for p in raw]
    else:
        pairs = _sample_pairs(space, args.samples, np.random.default_rng(args.seed))
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["ref_a", "ref_b", "distance", "error_bound"])
    for a, b in pairs:
        d = semmes.distance(space, a, b)
        out.writerow([_ref_label(a), _ref_label(b), repr(d.value), repr(d.error_bound)])
    _emit(buf.getvalue(), args.out)


def cmd_modulus(args):
    pkg = _package(args)
    table = modulus.scaling_experiment(pkg, args.lam, args.depth, mode=args.mode, h=args.h, eps=args.eps)
    _emit(table.to_csv(), args.out)
    if args.out:
        print(f"fitted ratio {table.fitted_ratio!r} over k = 0..{args.depth}")


def cmd_circulation(args):
    pkg = _package(args)
    sigma = None
    if args.sigma:
        sigma = load_curve(args.sigma)
    evidence = circulation.empirical_circulation(pkg, args.k, sigma=sigma)
    bound = circulation.registry_lookup(pkg.package_id)
    data = {"evidence": evidence.to_dict(), "bound": None, "consistent": None}
    if bound is not None:
        data["bound"] = bound.to_dict()
        data["consistent"] = evidence.consistent_with(bound)
    _emit(_json(data), args.out)


def cmd_hurwitz(args):
    data = hurwitz.build_branch_data(args.genus, args.degree)
    report = hurwitz.verify_branch_data(data)
    chi = hurwitz.euler_characteristic_of_cover(data)
    summary = {
        "branch_data": data.to_dict(),
        "cycles": [str(p) for p in data.permutations],
        "euler_characteristic": chi,
        "genus": hurwitz.cover_genus(data),
        "local_degrees": [list(t) for t in report.local_degrees],
        "failed_checks": list(report.failed),
    }
    if args.out:
        _emit(data.dumps() + "\n", args.out)
    sys.stdout.write(_json(summary))
    return 0 if report.ok else 1


def cmd_plan_extension(args):
    plan = hurwitz.extension_plan(args.p, args.degree, args.boundary_degrees or ())
    problems = hurwitz.validate_plan(plan)
    _emit(plan.dumps() + "\n", args.out)
    if problems:
        print("plan problems: " + "; ".join(problems), file=sys.stderr)
        return 1
    return 0


def cmd_plan_hr(args):
    pkg = _package(args)
    plan = hurwitz.heinonen_rickman_plan(pkg, args.degree, args.lam, depth=args.depth)
    _emit(plan.dumps() + "\n", args.out)


def cmd_classify(args):
    pkg = _package(args)
    registry = circulation.DEFAULT_REGISTRY
    if args.registry:
        registry = registry.extended_from_json(args.registry)
    verdict = classifier.classify_package(pkg, args.lam, omega=args.omega, registry=registry)
    _emit(classifier.report(verdict, "json" if args.json else "text"), args.out)


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(prog="dsl", description="Self-similar decomposition spaces of the 3-sphere.")
    sub = parser.add_subparsers(dest="command", required=True)

    pkg = sub.add_parser("package", help="validate or realize an initial package")
    pkg_sub = pkg.add_subparsers(dest="action", required=True)
    p = pkg_sub.add_parser("validate", help="check a package descriptor")
    _add_package(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_package_validate)
    p = pkg_sub.add_parser("realize", help="tube of one component of the defining sequence")
    _add_package(p)
    p.add_argument("--address", type=_address, default=(), help="comma-separated, e.g. 1,2,1")
    p.add_argument("--out")
    p.set_defaults(func=cmd_package_realize)

    p = sub.add_parser("metric", help="Semmes-metric distances as CSV")
    _add_package(p)
    p.add_argument("--lambda", dest="lam", type=_lam, default=0.4)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--h", type=float, help="voxel pitch (default: a quarter of the parent radius)")
    p.add_argument("--pairs", help='JSON list of {"a": ref, "b": ref}; ref = {"address": [...], "voxel": int}')
    p.add_argument("--samples", type=int, default=20, help="random pairs when --pairs is absent")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_metric)

    p = sub.add_parser("modulus", help="longitude-family modulus scaling table as CSV")
    _add_package(p)
    p.add_argument("--lambda", dest="lam", type=_lam, default=0.4)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--mode", choices=["explicit", "implicit"], default="explicit")
    p.add_argument("--h", type=float)
    p.add_argument("--eps", type=float, default=modulus.EPS_VALUE)
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; the solver is deterministic")
    p.add_argument("--out")
    p.set_defaults(func=cmd_modulus)

    p = sub.add_parser("circulation", help="longitude / meridian-disk intersection evidence")
    _add_package(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--sigma", help="user longitude candidate (curve JSON)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_circulation)

    p = sub.add_parser("hurwitz", help="canonical branch data for a genus-g, degree-n cover")
    p.add_argument("--genus", type=int, required=True)
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--out", help="write the branch data JSON here")
    p.set_defaults(func=cmd_hurwitz)

    plan = sub.add_parser("plan", help="combinatorial extension plans")
    plan_sub = plan.add_subparsers(dest="kind", required=True)
    p = plan_sub.add_parser("extension", help="tube table for p boundary components")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--boundary-degrees", type=int, nargs="*")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plan_extension)
    p = plan_sub.add_parser("hr", help="plan for a degree-n BLD map onto a package's Semmes space")
    _add_package(p)
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=_lam, default=0.4)
    p.add_argument("--depth", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_plan_hr)

    p = sub.add_parser("classify", help="ellipticity verdict with rationale")
    _add_package(p)
    p.add_argument("--lambda", dest="lam", type=_lam, default=0.4)
    p.add_argument("--omega", help="circulation order (number or p/q); overrides the registry")
    p.add_argument("--registry", help="JSON file of extra circulation bounds")
    p.add_argument("--json", action="store_true", help="JSON report instead of text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_classify)
    return parser


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        code = args.func(args)
    except DSLError as err:
        print(f"{err.name}: {err}", file=sys.stderr)
        return 1
    except (UsageError, ValueError, OSError) as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 2
    return code or 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
