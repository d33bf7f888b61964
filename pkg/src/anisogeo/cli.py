"""Command-line front end.

Subcommands map one-to-one onto the library pipelines; every stochastic
command requires an explicit --seed so identical invocations are
byte-identical. Bodies and gauges come in as JSON, either inline or as a
path to a file.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .bodies import body_from_json, make_tangential_body
from .cells import BoundaryCellComplex, SpatialGrid
from .errors import AnisoGeoError, IllConditioned, InvalidSpec, NoConvergence
from .gauges import gauge_from_json
from .measures import (default_cells, fit_area_measures, fit_support_measures,
                       proportionality_test)
from .metric import e_distance, sample_box
from .mixed import af_chain, steiner_fit, tangential_detect
from .oracles import (ball_area_profile, box_mixed_volumes,
                      cap_body_mixed_volumes, polygon_area,
                      polygon_ball_area_profile, polygon_perimeter)
from .smooth import integrate_area_measures_smooth


def _load_json_arg(text: str) -> dict:
    text = text.strip()
    if text.startswith("{"):
        return json.loads(text)
    with open(text, "r") as fh:
        return json.load(fh)


def _load_body(args):
    obj = _load_json_arg(args.body)
    if obj.get("type") == "tangential":
        gauge = gauge_from_json(_load_json_arg(args.gauge))
        return make_tangential_body(gauge, obj)
    return body_from_json(obj)


def _load_gauge(args):
    return gauge_from_json(_load_json_arg(args.gauge))


def _parse_grid(text: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 3:
        raise InvalidSpec("grid must be a,b,count")
    a, b, count = float(parts[0]), float(parts[1]), int(parts[2])
    if count < 1:
        raise InvalidSpec("grid count must be positive")
    return np.linspace(a, b, count)


def _cells_for(n: int, count: int | None) -> BoundaryCellComplex:
    if count is None:
        return default_cells(n)
    if n == 2:
        return BoundaryCellComplex.circle(count)
    level = int(round(np.log(count / 8.0) / np.log(4.0)))
    if 8 * 4 ** level != count:
        raise InvalidSpec("cell count must be 8*4^level in dimension 3")
    return BoundaryCellComplex.octahedral(level)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _json_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1)


def cmd_dist(args) -> int:
    K = _load_body(args)
    E = _load_gauge(args)
    pts = np.asarray(json.loads(args.points) if args.points.strip().startswith("[")
                     else json.load(open(args.points)), dtype=float)
    pts = np.atleast_2d(pts)
    def vec(v) -> str:
        if v is None:  # interior points carry no relative normal
            return "[]"
        return "[" + " ".join(repr(float(x)) for x in v) + "]"

    rows = ["x,d,p,y,u"]
    for x in pts:
        r = e_distance(K, E, x, tol=args.tol)
        rows.append(",".join([vec(x), repr(float(r.d)), vec(r.p),
                              vec(r.y), vec(r.u)]))
    _emit("\n".join(rows) + "\n", args.out)
    return 0


def _measure_kwargs(args, n: int) -> dict:
    kw = dict(N=args.samples, seed=args.seed, workers=args.workers,
              tol=args.tol)
    kw["cells"] = _cells_for(n, args.cells)
    if args.rho_grid is not None:
        kw["rho_nodes"] = _parse_grid(args.rho_grid)
    if args.delta is not None:
        kw["delta"] = args.delta
    return kw


def cmd_measures(args) -> int:
    K = _load_body(args)
    E = _load_gauge(args)
    prof = fit_area_measures(K, E, **_measure_kwargs(args, K.n))
    text = prof.to_json() if args.out and args.out.endswith(".json") \
        else prof.to_csv()
    _emit(text, args.out)
    return 0


def cmd_supportmeasures(args) -> int:
    K = _load_body(args)
    E = _load_gauge(args)
    lo, hi = sample_box(K, E, 0.0)
    pad = 1e-9 * np.maximum(np.abs(lo), np.abs(hi))
    grid = SpatialGrid(lo - pad, hi + pad, (args.spatial_grid,) * K.n)
    est = fit_support_measures(K, E, grid, **_measure_kwargs(args, K.n))
    _emit(est.to_json(), args.out)
    return 0


def cmd_mixedvol(args) -> int:
    K = _load_body(args)
    E = _load_gauge(args)
    t_nodes = _parse_grid(args.t_grid) if args.t_grid else None
    table = steiner_fit(K, E, t_nodes=t_nodes, N=args.samples,
                        seed=args.seed, workers=args.workers, tol=args.tol)
    text = table.to_json() if args.out and args.out.endswith(".json") \
        else table.to_csv()
    _emit(text, args.out)
    return 0


def cmd_theorem_check(args) -> int:
    K = _load_body(args)
    E = _load_gauge(args)
    n = K.n
    prof = fit_area_measures(K, E, **_measure_kwargs(args, n))
    prop = proportionality_test(prof, args.k, tol=args.prop_tol)
    t_nodes = _parse_grid(args.t_grid) if args.t_grid else None
    table = steiner_fit(K, E, t_nodes=t_nodes, N=args.samples,
                        seed=args.seed + 1, workers=args.workers,
                        tol=args.tol)
    chain = af_chain(table, raise_on_violation=False)
    tang = tangential_detect(table, tol=args.prop_tol, K=K, E=E)
    gaps = tang.gaps
    report = {
        "k": args.k,
        "proportionality": {
            "verdict": prop.verdict,
            "proportional": bool(prop.proportional),
            "c": prop.c,
            "max_dev": prop.max_dev,
            "max_excess": prop.max_excess,
        },
        "mixed_volumes": {
            "V": [float(v) for v in table.V],
            "stderr": [float(s) for s in table.stderr],
        },
        "chain": {
            "ratios": [float(r) for r in chain.ratios],
            "ok": bool(chain.ok),
        },
        "tangential": {
            "k_detected": tang.k,
            "r": tang.r,
            "contains_translate": bool(tang.contains),
            "gaps": [float(g) for g in gaps],
        },
        "verdict": "proportional" if prop.proportional else "not_proportional",
    }
    _emit(_json_dumps(report), args.out)
    return 0


def cmd_relgeo(args) -> int:
    K = _load_body(args)
    E = _load_gauge(args)
    prof = integrate_area_measures_smooth(K, E, cells=_cells_for(K.n, args.cells),
                                          quad_density=args.quad_density)
    text = prof.to_json() if args.out and args.out.endswith(".json") \
        else prof.to_csv()
    _emit(text, args.out)
    return 0


def cmd_oracle(args) -> int:
    body = _load_json_arg(args.body)
    gauge = _load_json_arg(args.gauge) if args.gauge else {"type": "ball",
                                                           "radius": 1.0}
    out: dict = {"body": body.get("type"), "gauge": gauge.get("type")}
    if gauge.get("type") != "ball" or gauge.get("radius", 1.0) != 1.0:
        raise InvalidSpec("oracle references cover the unit-ball gauge only")
    if body.get("type") == "polytope":
        V = np.asarray(body["vertices"], dtype=float)
        if V.shape[1] == 2:
            cells = default_cells(2)
            prof = polygon_ball_area_profile(V, cells)
            out["area"] = polygon_area(V)
            out["perimeter"] = polygon_perimeter(V)
            out["S0"] = [float(v) for v in prof[0]]
            out["S1"] = [float(v) for v in prof[1]]
        else:
            raise InvalidSpec("polygon oracle needs planar vertices")
    elif body.get("type") == "box":
        out["mixed_volumes"] = [float(v) for v in
                                box_mixed_volumes(body["sides"])]
    elif body.get("type") == "cap":
        out["mixed_volumes"] = [float(v) for v in
                                cap_body_mixed_volumes(body["L"])]
    elif body.get("type") == "ball":
        cells = default_cells(len(body.get("center", [0, 0, 0])))
        prof = ball_area_profile(body["radius"], cells)
        for k, masses in prof.items():
            out[f"S{k}"] = [float(v) for v in masses]
    else:
        raise InvalidSpec(f"no oracle for body type {body.get('type')!r}")
    _emit(_json_dumps(out), args.out)
    return 0


def _add_common(p, seed_required: bool = True) -> None:
    p.add_argument("--body", required=True, help="body JSON (inline or path)")
    p.add_argument("--gauge", required=True, help="gauge JSON (inline or path)")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--tol", type=float, default=1e-9)
    if seed_required:
        p.add_argument("--seed", type=int, required=True,
                       help="RNG seed (mandatory, no wall-clock default)")
        p.add_argument("--samples", type=int, default=1_000_000)
        p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="anisogeo")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dist", help="gauge distance/projection at points")
    _add_common(p, seed_required=False)
    p.add_argument("--points", required=True,
                   help="JSON array of points (inline or path)")
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("measures", help="area-measure profile from shells")
    _add_common(p)
    p.add_argument("--cells", type=int, default=None)
    p.add_argument("--rho-grid", default=None, help="a,b,count")
    p.add_argument("--delta", type=float, default=None)
    p.set_defaults(func=cmd_measures)

    p = sub.add_parser("supportmeasures",
                       help="support-measure estimate on cells x grid")
    _add_common(p)
    p.add_argument("--cells", type=int, default=None)
    p.add_argument("--rho-grid", default=None, help="a,b,count")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--spatial-grid", type=int, default=8,
                   help="spatial boxes per axis")
    p.set_defaults(func=cmd_supportmeasures)

    p = sub.add_parser("mixedvol", help="mixed-volume table via global fit")
    _add_common(p)
    p.add_argument("--t-grid", default=None, help="a,b,count")
    p.set_defaults(func=cmd_mixedvol)

    p = sub.add_parser("theorem-check",
                       help="proportionality + tangential detection verdict")
    _add_common(p)
    p.add_argument("--cells", type=int, default=None)
    p.add_argument("--rho-grid", default=None, help="a,b,count")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--t-grid", default=None, help="a,b,count")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--prop-tol", type=float, default=0.05)
    p.set_defaults(func=cmd_theorem_check)

    p = sub.add_parser("relgeo", help="smooth-pipeline area measures")
    _add_common(p, seed_required=False)
    p.add_argument("--cells", type=int, default=None)
    p.add_argument("--quad-density", type=int, default=64)
    p.set_defaults(func=cmd_relgeo)

    p = sub.add_parser("oracle", help="exact reference values")
    p.add_argument("--body", required=True)
    p.add_argument("--gauge", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_oracle)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # argparse exits 2; that is a spec error here
        return 0 if exc.code in (0, None) else 1
    except (NoConvergence, IllConditioned) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (AnisoGeoError, json.JSONDecodeError, OSError, KeyError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
