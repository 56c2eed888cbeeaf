"""Command line: simulate datasets, verify batteries, probe, slope, export."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dataio
from .forward import MFSConfig, add_noise, assemble_farfield
from .geometry import make_surface, s2_quadrature, surface_distance
from .herglotz import TikhonovSchedule
from .indicator import IndicatorKind
from .medium import ContractViolation, ElasticMedium
from .probe import BPolicy, ProbeConfig, blowup_exponent_fit, default_needles, probe_scan, _DomainBuilder, _evaluate_point


def _strict_keys(obj: dict, allowed: set, context: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ContractViolation(f"unknown keys in {context}: {sorted(unknown)}")


def _load_json(path: str) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _parse_medium(obj: dict) -> ElasticMedium:
    _strict_keys(obj, {"lambda0", "mu0", "kappa"}, "medium")
    return ElasticMedium(**obj)


def _parse_shape_spec(spec: str) -> tuple[str, tuple]:
    kind, _, rest = spec.partition(":")
    params = tuple(float(v) for v in rest.split(",")) if rest else ()
    return kind, params


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_json(args.config)
    _strict_keys(cfg, {"medium", "surface", "d_grid", "xhat_grid", "mfs"}, "simulate config")
    medium = _parse_medium(cfg["medium"])
    surf_cfg = cfg["surface"]
    _strict_keys(surf_cfg, {"kind", "params"}, "surface")
    d_cfg = cfg["d_grid"]
    _strict_keys(d_cfg, {"n_theta", "n_phi"}, "d_grid")
    x_cfg = cfg.get("xhat_grid", d_cfg)
    _strict_keys(x_cfg, {"n_theta", "n_phi"}, "xhat_grid")
    mfs_cfg = cfg.get("mfs", {})
    _strict_keys(mfs_cfg, {"collocation", "sources", "contraction", "svd_rcond", "residual_limit"}, "mfs")
    mfs = MFSConfig(
        collocation=tuple(mfs_cfg.get("collocation", (24, 48))),
        sources=tuple(mfs_cfg["sources"]) if "sources" in mfs_cfg else None,
        contraction=mfs_cfg.get("contraction", 0.7),
        svd_rcond=mfs_cfg.get("svd_rcond", 1e-12),
        residual_limit=mfs_cfg.get("residual_limit"),
    )
    surface = make_surface(surf_cfg["kind"], tuple(surf_cfg["params"]), *mfs.collocation)
    d_grid = s2_quadrature(**d_cfg)
    xhat_grid = s2_quadrature(**x_cfg)
    F = assemble_farfield(surface, medium, d_grid, xhat_grid, mfs)
    if args.noise:
        F = add_noise(F, args.noise, args.seed)
    fileset = dataio.write_farfield(F, args.out)
    print(f"wrote {len(fileset.block_paths)} blocks to {fileset.directory} "
          f"(max residual {F.provenance['max_residual']:.2e})")
    return 0


def _parse_probe_config(path: str) -> tuple[ProbeConfig, dict]:
    cfg = _load_json(path)
    allowed = {"kind", "omega", "needles", "step", "max_depth", "threshold_q", "b_policy", "schedule"}
    _strict_keys(cfg, allowed, "probe config")
    omega = cfg.get("omega", {})
    _strict_keys(omega, {"center", "radius"}, "omega")
    center = tuple(omega.get("center", (0.0, 0.0, 0.0)))
    radius = float(omega.get("radius", 3.0))
    needles_cfg = cfg.get("needles", "full26")
    if needles_cfg == "full26":
        needles = default_needles(center, radius)
    else:
        needles = tuple((tuple(entry), tuple(dirn)) for entry, dirn in needles_cfg)
    bp = cfg.get("b_policy", {})
    _strict_keys(bp, {"mode", "clearance", "r_min", "offset", "gap_fraction",
                      "validation_surface", "mesh", "eigenvalue_guard"}, "b_policy")
    vs = bp.get("validation_surface")
    if vs is not None:
        _strict_keys(vs, {"kind", "params"}, "validation_surface")
        vs = (vs["kind"], tuple(vs["params"]))
    policy = BPolicy(
        mode=bp.get("mode", "centered_ball"),
        clearance=bp.get("clearance", 0.1),
        r_min=bp.get("r_min", 0.3),
        offset=bp.get("offset", 0.05),
        gap_fraction=bp.get("gap_fraction", 0.5),
        validation_surface=vs,
        mesh=tuple(bp.get("mesh", (24, 48))),
        eigenvalue_guard=bp.get("eigenvalue_guard", True),
    )
    sched_cfg = cfg.get("schedule", {})
    _strict_keys(sched_cfg, {"alpha0", "rho", "n_max", "stagnation", "fail_residual"}, "schedule")
    schedule = TikhonovSchedule(**sched_cfg) if sched_cfg else TikhonovSchedule()
    probe_cfg = ProbeConfig(
        omega_center=center,
        omega_radius=radius,
        needles=needles,
        step=float(cfg.get("step", 0.05)),
        max_depth=float(cfg.get("max_depth", radius)),
        kind=IndicatorKind(cfg.get("kind", "pp")),
        threshold_q=float(cfg.get("threshold_q", 2.0)),
        b_policy=policy,
        schedule=schedule,
    )
    return probe_cfg, cfg


def cmd_probe(args: argparse.Namespace) -> int:
    F = dataio.read_farfield(args.farfield)
    cfg, _ = _parse_probe_config(args.config)
    field = probe_scan(F, cfg, F.medium)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataio.write_indicator_field(field, out / "field.json")
    dataio.export_indicator(field, out / "samples.csv", "csv")
    dataio.export_indicator(field, out / "detected.vtk", "vtk-legacy")
    summary = {
        "kind": field.kind.value,
        "threshold": format(field.threshold, ".17g"),
        "n_detected": int(len(field.detected_points)),
        "misses": field.misses,
        "exponents": [
            {"needle_id": n.needle_id, "slope": format(n.exponent[0], ".17g"), "r2": format(n.exponent[1], ".17g")}
            for n in field.needles
            if n.exponent is not None
        ],
    }
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(f"detected {summary['n_detected']} boundary points; {len(field.misses)} needle misses")
    return 0


def cmd_slope(args: argparse.Namespace) -> int:
    F = dataio.read_farfield(args.farfield)
    p1_s, _, p2_s = args.needle.partition(":")
    p1 = np.array([float(v) for v in p1_s.split(",")])
    p2 = np.array([float(v) for v in p2_s.split(",")])
    n = args.samples
    if n < 5:
        raise ContractViolation("slope needs at least 5 samples")
    kind = IndicatorKind(args.kind)
    if args.validate_surface:
        vkind, vparams = _parse_shape_spec(args.validate_surface)
        policy = BPolicy(mode="validation", validation_surface=(vkind, vparams))
    else:
        policy = BPolicy()
    schedule = TikhonovSchedule(n_max=args.schedule_depth)
    builder = _DomainBuilder(policy, (0.0, 0.0, 0.0), F.medium, F.d_grid)
    ts = np.linspace(0.0, 1.0, n)
    rows = []
    for t in ts:
        y = (1 - t) * p1 + t * p2
        sample = _evaluate_point(F, builder, y, kind, schedule, F.medium)
        if args.validate_surface:
            d = float(surface_distance(vkind, vparams, y[None])[0])
        else:
            d = float(np.linalg.norm(y - p2))
        rows.append({"y": y.tolist(), "d": d, "abs_I": abs(sample.value), "flags": list(sample.flags)})
    usable = [(r["d"], r["abs_I"]) for r in rows if r["d"] > 0 and r["abs_I"] > 0]
    slope, r2 = blowup_exponent_fit([u[0] for u in usable], [u[1] for u in usable])
    print(json.dumps({"slope": slope, "r2": r2, "samples": rows}, indent=2, sort_keys=True))
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    src = Path(args.input) / "field.json"
    if not src.is_file():
        raise ContractViolation(f"no field.json under {args.input}; run probe first")
    data = json.loads(src.read_text(encoding="utf-8"))
    # Rebuild a minimal field shim for the exporters.
    from .indicator import IndicatorSample
    from .probe import IndicatorField, NeedleResult, ProbeConfig

    needles = []
    for nd in data["needles"]:
        samples = [
            IndicatorSample(
                y=np.array([float(v) for v in s["y"]]),
                kind=IndicatorKind(data["kind"]),
                value=complex(float(s["re"]), float(s["im"])),
                flags=tuple(s["flags"]),
            )
            for s in nd["samples"]
        ]
        needles.append(
            NeedleResult(
                needle_id=nd["needle_id"],
                entry=np.array([float(v) for v in nd["entry"]]),
                direction=np.array([float(v) for v in nd["direction"]]),
                samples=samples,
                detected=np.array([float(v) for v in nd["detected"]]) if nd["detected"] else None,
                exponent=None,
            )
        )
    field = IndicatorField(
        kind=IndicatorKind(data["kind"]),
        needles=needles,
        threshold=float(data["threshold"]),
        shell_stats={},
        config=None,
    )
    suffix = "csv" if args.format == "csv" else "vtk"
    out = Path(args.input) / f"export.{suffix}"
    dataio.export_indicator(field, out, "csv" if args.format == "csv" else "vtk-legacy")
    print(f"wrote {out}")
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    from . import verify

    ok = verify.run_suite(args.suite, tol=args.tol)
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="elastoprobe")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate a far-field dataset")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--noise", type=float, default=0.0)
    p_sim.add_argument("--seed", type=int, default=20260811)
    p_sim.set_defaults(func=cmd_simulate)

    p_ver = sub.add_parser("verify", help="run an analytic test battery")
    p_ver.add_argument("--suite", required=True, choices=["greens", "forward", "herglotz", "indicator"])
    p_ver.add_argument("--tol", type=float, default=None)
    p_ver.set_defaults(func=cmd_verify)

    p_probe = sub.add_parser("probe", help="needle scan from a far-field dataset")
    p_probe.add_argument("--farfield", required=True)
    p_probe.add_argument("--config", required=True)
    p_probe.add_argument("--out", required=True)
    p_probe.set_defaults(func=cmd_probe)

    p_slope = sub.add_parser("slope", help="blow-up exponent along one needle")
    p_slope.add_argument("--farfield", required=True)
    p_slope.add_argument("--needle", required=True, metavar="x1,y1,z1:x2,y2,z2")
    p_slope.add_argument("--samples", type=int, required=True)
    p_slope.add_argument("--validate-surface", default=None, metavar="kind:p1,p2,...")
    p_slope.add_argument("--kind", default="pp", choices=["pp", "ps", "ss", "sp"])
    p_slope.add_argument("--schedule-depth", type=int, default=30)
    p_slope.set_defaults(func=cmd_slope)

    p_exp = sub.add_parser("export", help="re-export a probe result")
    p_exp.add_argument("--in", dest="input", required=True)
    p_exp.add_argument("--format", required=True, choices=["csv", "vtk"])
    p_exp.set_defaults(func=cmd_export)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ContractViolation, dataio.DatasetFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
