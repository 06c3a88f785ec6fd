"""Command-line driver: JSON descriptions in, verdict records and CSV out.

Subcommands mirror the checks; ``gallery run`` is the integration gate
(exit code 0 iff every entry reproduces its expected verdicts).  Identical
config and spec yield byte-identical JSON output.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Optional

import numpy as np

from .asymptotics import Status, Verdict
from .config import DEFAULT_CONFIG, Config
from .errors import MapnetsError, SpecError
from .exprs import EXPRESSION_FAMILIES, build_expr
from .gallery import (
    GALLERY,
    gallery_run_all,
    get_atlas,
    get_net,
    get_region,
    list_nets,
)
from .gmap import (
    MapNet,
    angle_net,
    check_cbounded,
    check_equiv,
    check_equiv0,
    check_moderate,
    check_single_chart,
    compose,
    scalar_net,
)
from .gpoints import GenPoint, eval_at
from .manifold import (
    Atlas,
    Box,
    CompactRegion,
    Point,
    circle_atlas,
    euclidean_atlas,
    sphere_atlas,
)
from .vbundle import check_vbhom_equiv, check_vbhom_moderate, tangent, vbhom_eval


# ======================================================================
# JSON descriptions
# ======================================================================


class SpecEnv:
    """Objects declared by a JSON description, on top of the registries."""

    def __init__(self, spec: Optional[dict] = None):
        spec = spec or {}
        self.atlases: dict = {}
        self.nets: dict = {}
        self.regions: dict = {}
        self.points: dict = {}
        for name, a in spec.get("atlases", {}).items():
            self.atlases[name] = self._build_atlas(name, a)
        for name, n in spec.get("nets", {}).items():
            self.nets[name] = self._build_net(name, n)
        for name, r in spec.get("regions", {}).items():
            self.regions[name] = self._build_region(name, r)
        for name, p in spec.get("points", {}).items():
            self.points[name] = self._build_point(name, p)

    def _build_atlas(self, name: str, a: dict) -> Atlas:
        kind = a.get("builtin")
        if kind == "euclidean":
            if "bounds" not in a:
                raise SpecError("euclidean atlas needs 'bounds'", f"atlases.{name}")
            return euclidean_atlas(a["bounds"], name=name)
        if kind == "circle":
            return circle_atlas(name=name)
        if kind == "sphere":
            return sphere_atlas(name=name)
        raise SpecError(f"unknown builtin {kind!r}", f"atlases.{name}")

    def atlas(self, name: str) -> Atlas:
        if name in self.atlases:
            return self.atlases[name]
        return get_atlas(name)

    def _build_net(self, name: str, n: dict) -> MapNet:
        where = f"nets.{name}"
        kind = n.get("kind")
        try:
            factory = build_expr(n.get("expr", "identity"))
        except SpecError as exc:
            raise SpecError(str(exc), where)
        src = self.atlas(n.get("src", "line"))
        if kind == "scalar":
            dst = self.atlas(n.get("dst", "line"))
            return scalar_net(src, dst, factory, tag=name)
        if kind == "circle_angle":
            return angle_net(src, self.atlas(n.get("dst", "circle")), factory, tag=name)
        raise SpecError(f"unknown net kind {kind!r}", where)

    def net(self, name: str) -> MapNet:
        if name in self.nets:
            return self.nets[name]
        return get_net(name)

    def _build_region(self, name: str, r: dict) -> CompactRegion:
        where = f"regions.{name}"
        try:
            pieces = [(p["chart"], Box.of(p["box"])) for p in r["pieces"]]
            return CompactRegion(pieces, r.get("lattice_density", 33))
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"bad region: {exc}", where)

    def region(self, name: str) -> CompactRegion:
        if name in self.regions:
            return self.regions[name]
        return get_region(name)

    def _build_point(self, name: str, p: dict) -> GenPoint:
        where = f"points.{name}"
        try:
            atlas = self.atlas(p["atlas"])
            pt = Point(p["chart"], np.asarray(p["coords"], dtype=float))
            return GenPoint.constant(atlas, pt, pad=p.get("pad", 0.05), tag=name)
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"bad point: {exc}", where)

    def point(self, name: str) -> GenPoint:
        if name in self.points:
            return self.points[name]
        raise SpecError(f"unknown point {name!r}", "points")


# ======================================================================
# Records and output
# ======================================================================


def verdict_record(check: str, inputs: dict, verdict: Verdict) -> dict:
    est = verdict.estimate
    rec = {
        "check": check,
        "inputs": inputs,
        "status": str(verdict.status),
        "slope": None if est is None or not math.isfinite(est.slope) else est.slope,
        "r2": None if est is None else est.r2,
        "n_or_m": None if est is None else est.n_or_m,
        "samples": ([] if verdict.series is None else
                    [[float(e), None if math.isinf(s) else float(s)]
                     for e, s in zip(verdict.series.eps, verdict.series.sup)]),
        "notes": verdict.notes,
    }
    if verdict.witness is not None:
        rec["witness"] = verdict.witness.as_record()
    return rec


def dump_json(record, path: Optional[str]) -> str:
    text = json.dumps(record, sort_keys=True, indent=2) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def write_outputs(out_dir: Optional[str], name: str, record,
                  series: Optional[dict] = None) -> None:
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        dump_json(record, os.path.join(out_dir, f"{name}.json"))
        for key, s in (series or {}).items():
            if s is None:
                continue
            safe = "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in key)
            with open(os.path.join(out_dir, f"{name}__{safe}.csv"), "w",
                      encoding="utf-8") as fh:
                fh.write(s.to_csv())
    else:
        sys.stdout.write(dump_json(record, None))


def _collect_series(verdict: Verdict) -> dict:
    out = {}
    if verdict.series is not None:
        out["main"] = verdict.series
    for label, sub in verdict.details.items():
        if isinstance(sub, Verdict):
            if sub.series is not None:
                out[label] = sub.series
            for l2, s2 in sub.details.items():
                if isinstance(s2, Verdict) and s2.series is not None:
                    out[f"{label}.{l2}"] = s2.series
    return out


# ======================================================================
# Argument plumbing
# ======================================================================


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of config overrides")
    p.add_argument("--grid-base", type=float)
    p.add_argument("--grid-k-min", type=int)
    p.add_argument("--grid-k-max", type=int)
    p.add_argument("--lattice-density", type=int)
    p.add_argument("--k-max", type=int)
    p.add_argument("--n-cap", type=int)
    p.add_argument("--m-probe", type=int)
    p.add_argument("--r2-min", type=float)
    p.add_argument("--vanish-tol", type=float)
    p.add_argument("--margin-min", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="directory for verdict JSON and series CSV")
    p.add_argument("--spec", help="JSON description of atlases/nets/regions/points")


def _config_from(args) -> Config:
    base = DEFAULT_CONFIG.as_dict()
    if args.config:
        base.update(json.load(open(args.config, "r", encoding="utf-8")))
    for name in ("grid_base", "grid_k_min", "grid_k_max", "lattice_density",
                 "k_max", "n_cap", "m_probe", "r2_min", "vanish_tol",
                 "margin_min", "seed"):
        v = getattr(args, name, None)
        if v is not None:
            base[name] = v
    return Config.from_dict(base)


def _env_from(args) -> SpecEnv:
    spec = None
    if getattr(args, "spec", None):
        spec = json.load(open(args.spec, "r", encoding="utf-8"))
    return SpecEnv(spec)


# ======================================================================
# Subcommands
# ======================================================================


def _cmd_check(args) -> int:
    cfg = _config_from(args)
    env = _env_from(args)
    grid = cfg.grid()
    u = env.net(args.net)
    K = env.region(args.region)
    inputs = {"net": args.net, "region": args.region, "config": cfg.as_dict()}
    if args.cmd == "check-cbounded":
        rep = check_cbounded(u, K, grid, cfg)
        rec = {"check": "check-cbounded", "inputs": inputs, **rep.as_record()}
        write_outputs(args.out, "check-cbounded", rec, {"margins": rep.margins})
        return 0 if rep.status is Status.PASS else 1
    if args.cmd == "check-moderate":
        v = check_moderate(u, K, grid, cfg=cfg)
        rec = verdict_record("check-moderate", inputs, v)
        write_outputs(args.out, "check-moderate", rec, _collect_series(v))
        return 0 if v.status is Status.PASS else 1
    if args.cmd == "check-single-chart":
        rep = check_single_chart(u, K, grid, cfg)
        rec = {"check": "check-single-chart", "inputs": inputs, **rep.as_record()}
        write_outputs(args.out, "check-single-chart", rec)
        return 0 if rep.status is Status.PASS else 1
    raise SpecError(f"unknown check {args.cmd!r}", "cli")


def _cmd_equiv(args) -> int:
    cfg = _config_from(args)
    env = _env_from(args)
    grid = cfg.grid()
    u = env.net(args.net)
    v = env.net(args.net2)
    K = env.region(args.region)
    inputs = {"net": args.net, "net2": args.net2, "region": args.region,
              "config": cfg.as_dict()}
    if args.cmd == "check-equiv0":
        out = check_equiv0(u, v, K, None, grid, cfg)
    else:
        out = check_equiv(u, v, [K], grid, cfg.k_max, cfg)
    rec = verdict_record(args.cmd, inputs, out)
    write_outputs(args.out, args.cmd, rec, _collect_series(out))
    return 0 if out.status is Status.PASS else 1


def _cmd_eval_point(args) -> int:
    cfg = _config_from(args)
    env = _env_from(args)
    grid = cfg.grid()
    u = env.net(args.net)
    p = env.point(args.point)
    q = eval_at(u, p, grid, cfg)
    rec = {"check": "eval-point",
           "inputs": {"net": args.net, "point": args.point, "config": cfg.as_dict()},
           "result": q.as_record(grid)}
    write_outputs(args.out, "eval-point", rec)
    return 0


def _cmd_compose(args) -> int:
    cfg = _config_from(args)
    env = _env_from(args)
    grid = cfg.grid()
    inner = env.net(args.inner)
    outer = env.net(args.outer)
    K = env.region(args.region) if args.region else None
    w = compose(outer, inner, K=K, grid=grid, cfg=cfg)
    rec = {"check": "compose",
           "inputs": {"outer": args.outer, "inner": args.inner,
                      "region": args.region, "config": cfg.as_dict()},
           "tag": w.tag, "provenance": w.provenance}
    if args.point:
        p = env.point(args.point)
        rec["result"] = eval_at(w, p, grid, cfg).as_record(grid)
    write_outputs(args.out, "compose", rec)
    return 0


def _cmd_tangent(args) -> int:
    cfg = _config_from(args)
    env = _env_from(args)
    grid = cfg.grid()
    u = env.net(args.net)
    K = env.region(args.region)
    v = check_vbhom_moderate(tangent(u), K, grid, cfg.k_max, cfg)
    rec = verdict_record("tangent", {"net": args.net, "region": args.region,
                                     "config": cfg.as_dict()}, v)
    write_outputs(args.out, "tangent", rec, _collect_series(v))
    return 0 if v.status is Status.PASS else 1


def _cmd_vb_check(args) -> int:
    cfg = _config_from(args)
    env = _env_from(args)
    grid = cfg.grid()
    u = tangent(env.net(args.net))
    K = env.region(args.region)
    inputs = {"net": args.net, "net2": args.net2, "region": args.region,
              "config": cfg.as_dict()}
    if args.net2:
        v2 = tangent(env.net(args.net2))
        out = check_vbhom_equiv(u, v2, K, grid, cfg.k_max, args.order0, cfg)
    else:
        out = check_vbhom_moderate(u, K, grid, cfg.k_max, cfg)
    rec = verdict_record("vb-check", inputs, out)
    write_outputs(args.out, "vb-check", rec, _collect_series(out))
    return 0 if out.status is Status.PASS else 1


def _cmd_vb_eval(args) -> int:
    cfg = _config_from(args)
    env = _env_from(args)
    grid = cfg.grid()
    u = tangent(env.net(args.net))
    p = env.point(args.point)
    from .manifold import BundleElement
    from .vbundle import VBPoint

    xi = np.asarray(json.loads(args.fiber), dtype=float)

    def at(eps: float, p=p, xi=xi):
        pt = p.at(eps)
        return BundleElement(pt.chart, pt.coords, xi)

    e = VBPoint(u.src, at, p.support, tag=f"tangent-point({args.point})")
    out = vbhom_eval(u, e, grid, cfg)
    samples = []
    for eps in grid.values():
        b = out.at(eps)
        samples.append({"eps": float(eps), "chart": b.chart,
                        "base": [float(c) for c in b.x],
                        "fiber": [float(c) for c in b.xi]})
    rec = {"check": "vb-eval",
           "inputs": {"net": args.net, "point": args.point, "fiber": args.fiber,
                      "config": cfg.as_dict()},
           "growth": out.growth(grid, cfg).as_record(), "samples": samples}
    write_outputs(args.out, "vb-eval", rec)
    return 0


def _cmd_tensor_insert(args) -> int:
    cfg = _config_from(args)
    env = _env_from(args)
    grid = cfg.grid()
    from .gallery import get_atlas
    from .manifold import LocalMap
    from .vbundle import TensorSectionNet, tensor_insert

    atlas = env.atlas(args.atlas)
    p = env.point(args.point)

    def scalar_tensor(spec, r, s, tag):
        factory = build_expr(spec)

        def coeffs(eps, factory=factory):
            f = factory(eps)
            return {cid: LocalMap.from_expr(f, name=tag) for cid in atlas.chart_ids}

        return TensorSectionNet(atlas, r, s, coeffs, tag=tag)

    tensor = scalar_tensor(json.loads(args.tensor), args.r, args.s, "tensor")
    omegas = [scalar_tensor(json.loads(w), 0, 1, f"omega{i}")
              for i, w in enumerate(args.omega or [])]
    xis = [scalar_tensor(json.loads(x), 1, 0, f"xi{i}")
           for i, x in enumerate(args.xi or [])]
    out = tensor_insert(tensor, omegas, xis, p, grid, cfg)
    rec = {"check": "tensor-insert",
           "inputs": {"atlas": args.atlas, "point": args.point,
                      "type": [args.r, args.s], "config": cfg.as_dict()},
           "moderate_bound": None if out.moderate_bound is None
           else out.moderate_bound.as_record(),
           "samples": [[float(e), float(out(e))] for e in grid.values()]}
    write_outputs(args.out, "tensor-insert", rec)
    return 0


def _cmd_gallery(args) -> int:
    cfg = _config_from(args)
    if args.action == "list":
        for entry in GALLERY:
            sys.stdout.write(f"{entry.name}: {entry.description}\n")
        sys.stdout.write(f"nets: {', '.join(list_nets())}\n")
        sys.stdout.write(f"expressions: {', '.join(EXPRESSION_FAMILIES)}\n")
        return 0
    summary, mismatches, all_series = gallery_run_all(cfg)
    ok = not mismatches
    record = {"check": "gallery-run", "config": cfg.as_dict(),
              "entries": summary, "mismatches": mismatches, "ok": ok}
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        dump_json(record, os.path.join(args.out, "gallery.json"))
        for entry_name, series in all_series.items():
            for key, s in series.items():
                if s is None:
                    continue
                safe = "".join(ch if ch.isalnum() or ch in "-_." else "_"
                               for ch in f"{entry_name}__{key}")
                with open(os.path.join(args.out, f"{safe}.csv"), "w",
                          encoding="utf-8") as fh:
                    fh.write(s.to_csv())
    width = max(len(e["entry"]) for e in summary)
    for e in summary:
        mark = "ok " if e["ok"] else "FAIL"
        sys.stdout.write(f"{mark} {e['entry']:<{width}}  "
                         + "; ".join(f"{r['label']}={r['status']}" for r in e["rows"])
                         + "\n")
    for m in mismatches:
        sys.stdout.write(f"mismatch: {m}\n")
    sys.stdout.write(("all entries match\n" if ok else "MISMATCHES PRESENT\n"))
    return 0 if ok else 1


def _cmd_report(args) -> int:
    rows = []
    for fname in sorted(os.listdir(args.dir)):
        if not fname.endswith(".json"):
            continue
        with open(os.path.join(args.dir, fname), "r", encoding="utf-8") as fh:
            rec = json.load(fh)
        status = rec.get("status") or ("ok" if rec.get("ok") else rec.get("check"))
        rows.append((fname, rec.get("check", "?"), status, rec.get("slope")))
    for fname, check, status, slope in rows:
        s = "" if slope is None else f" slope={slope:.3g}"
        sys.stdout.write(f"{fname}: {check} -> {status}{s}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mapnets",
        description="asymptotic verdicts for eps-nets of maps between chart atlases")
    sub = ap.add_subparsers(dest="cmd", required=True)

    for name in ("check-cbounded", "check-moderate", "check-single-chart"):
        p = sub.add_parser(name)
        p.add_argument("--net", required=True)
        p.add_argument("--region", required=True)
        _add_config_flags(p)
        p.set_defaults(func=_cmd_check)

    for name in ("check-equiv", "check-equiv0"):
        p = sub.add_parser(name)
        p.add_argument("--net", required=True)
        p.add_argument("--net2", required=True)
        p.add_argument("--region", required=True)
        _add_config_flags(p)
        p.set_defaults(func=_cmd_equiv)

    p = sub.add_parser("eval-point")
    p.add_argument("--net", required=True)
    p.add_argument("--point", required=True)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_eval_point)

    p = sub.add_parser("compose")
    p.add_argument("--outer", required=True)
    p.add_argument("--inner", required=True)
    p.add_argument("--region")
    p.add_argument("--point")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_compose)

    p = sub.add_parser("tangent")
    p.add_argument("--net", required=True)
    p.add_argument("--region", required=True)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_tangent)

    p = sub.add_parser("vb-check")
    p.add_argument("--net", required=True)
    p.add_argument("--net2")
    p.add_argument("--region", required=True)
    p.add_argument("--order0", action="store_true")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_vb_check)

    p = sub.add_parser("vb-eval")
    p.add_argument("--net", required=True)
    p.add_argument("--point", required=True)
    p.add_argument("--fiber", default="[1.0]")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_vb_eval)

    p = sub.add_parser("tensor-insert")
    p.add_argument("--atlas", default="line")
    p.add_argument("--point", required=True)
    p.add_argument("--tensor", required=True, help="expression spec (JSON)")
    p.add_argument("--r", type=int, default=0)
    p.add_argument("--s", type=int, default=1)
    p.add_argument("--omega", action="append")
    p.add_argument("--xi", action="append")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_tensor_insert)

    p = sub.add_parser("gallery")
    p.add_argument("action", choices=["list", "run"])
    _add_config_flags(p)
    p.set_defaults(func=_cmd_gallery)

    p = sub.add_parser("report")
    p.add_argument("--dir", required=True)
    p.set_defaults(func=_cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except SpecError as exc:
        sys.stderr.write(f"spec error: {exc}\n")
        return 2
    except MapnetsError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
