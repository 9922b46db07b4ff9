"""Batch experiment runner emitting CSV/JSON tables.

Subcommands: energy-gap, zhukovsky, nonuniqueness, check-map, moser-demo.
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
Outputs are written atomically (temp file + rename) so a failed run never
leaves a partial table behind; identical config + seed gives identical bytes.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile

import numpy as np

from . import constructions, energy, isoperimetry, moser, radial
from .errors import PjacError
from .maps import rotate_map
from .radial import GeneralisedStretching, profile_from_datum
from .regions import disc


class ConfigError(Exception):
    pass


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _emit_json(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        inner = ",\n".join(
            f'{pad}  "{k}": {_emit_json(v, indent + 1).lstrip()}' for k, v in obj.items()
        )
        return f"{pad}{{\n{inner}\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        inner = ",\n".join(f"{pad}  {_emit_json(v, indent + 1).lstrip()}" for v in obj)
        return f"{pad}[\n{inner}\n{pad}]"
    if isinstance(obj, bool):
        return pad + ("true" if obj else "false")
    if isinstance(obj, (int, np.integer)):
        return pad + str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return pad + _fmt(obj)
    return pad + '"' + str(obj) + '"'


def _write_atomic(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".pjac-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_eps_list(text: str) -> list[float]:
    try:
        values = [float(tok) for tok in text.split(",") if tok]
    except ValueError as exc:
        raise ConfigError(f"bad epsilon list {text!r}") from exc
    if not values:
        raise ConfigError("empty epsilon list")
    return values


def _datum_from_name(name: str):
    if name == "uniform":
        return radial.uniform_datum(1.0, 3.0)
    if name == "gauss":
        return radial.truncated_gaussian_datum(1.0, 2.5)
    if name == "annulus":
        return radial.annulus_indicator_datum(1.0, 2.0, 4.0 / 3.0)
    if name.startswith("power:"):
        return radial.power_law_datum(float(name.split(":", 1)[1]))
    raise ConfigError(f"unknown datum {name!r}")


def _competitor_from_name(name: str, datum):
    if name in ("phi1", "phi2", "phi3"):
        k = int(name[-1])
        return GeneralisedStretching(profile_from_datum(datum, k)).as_planar_map()
    if name == "rot-phi1":
        phi1 = GeneralisedStretching(profile_from_datum(datum, 1)).as_planar_map()
        return rotate_map(phi1, 0.7)
    raise ConfigError(f"unknown competitor {name!r}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def run_energy_gap(args) -> str:
    eps_list = _parse_eps_list(args.eps)
    if any(not 0.0 < e <= 1.0 for e in eps_list):
        raise ConfigError("energy-gap needs epsilons in (0, 1]")
    corrector = None
    rows = ["epsilon,p,E_radial,E_competitor,ratio"]
    for eps in eps_list:
        stretch = constructions.layered_profile(eps)
        e_radial = radial.sobolev_energy_1d(stretch, args.p, 3.0)
        if args.corrector == "on":
            _, jdet = constructions.wedge_map(eps)
            corrector, _ = moser.constant_jacobian_corrector(
                jdet, (6.0 - eps) / 5.0, moser.wedge_domain(), iterations=args.iters
            )
        competitor = constructions.assemble_counterexample(eps, corrector=corrector)
        e_comp = energy.region_energy(competitor, args.p, disc(3.0), n=args.grid).value
        rows.append(
            ",".join(_fmt(v) for v in (eps, args.p, e_radial, e_comp, e_radial / e_comp))
        )
    return "\n".join(rows) + "\n"


def run_zhukovsky(args) -> str:
    datum = _datum_from_name(args.datum)
    competitor = _competitor_from_name(args.competitor, datum)
    R = datum.support_radius
    radii = np.linspace(0.08 * R, 0.94 * R, args.radii)
    breaks = [b for b in datum.breakpoints() if 0 < b < R]
    for b in breaks:  # keep circles off derivative jumps
        radii = radii[np.abs(radii - b) > 0.02 * R]
    rows, lam = energy.zhukovsky_comparison(datum, competitor, args.p, radii)
    out = ["r,lhs,rhs,ratio,lambda_star"]
    for row in rows:
        out.append(",".join(_fmt(v) for v in (row.r, row.lhs, row.rhs, row.ratio, lam)))
    return "\n".join(out) + "\n"


def run_nonuniqueness(args) -> str:
    datum, report = constructions.nonuniqueness_datum()
    profile = constructions.nonuniqueness_inner_profile()
    deltas = np.array([1e-2, 1e-3, 1e-4, 1e-5])
    energies = radial.truncated_derivative_energy(profile, 2.0, deltas)
    slope = float(np.polyfit(np.log(1.0 / deltas), energies, 1)[0])

    twisted = constructions.phase_twisted_stretching(
        profile,
        beta=lambda r: 0.4 * np.sin(1.3 * np.asarray(r)),
        beta_dot=lambda r: 0.52 * np.cos(1.3 * np.asarray(r)),
        radius=1.9,
    )
    values = [
        energy.region_energy(rotate_map(twisted, a), args.p, disc(1.85), n=args.grid).value
        for a in (0.0, math.pi / 3.0, 1.0)
    ]
    spread = (max(values) - min(values)) / max(values)

    doc = {
        "constraint_residuals": {
            "mass_ball2": report.mass_ball2_residual,
            "mass_total": report.mass_total_residual,
            "c1_value_gap": report.c1_value_gap,
            "c1_slope_gap": report.c1_slope_gap,
            "tail_value_at_3.5": report.tail_value,
        },
        "truncated_energy": {
            "deltas": list(map(float, deltas)),
            "values": list(map(float, energies)),
            "slope_vs_log_inv_delta": slope,
        },
        "rotation_energy_spread": spread,
    }
    return _emit_json(doc) + "\n"


def run_check_map(args) -> str:
    doc: dict = {"map": args.map}
    if args.map == "eta":
        eta, rot = constructions.ball_to_square()
        pts = 0.2 + 0.6 * np.random.default_rng(args.seed).random((20000, 2))
        keep = eta.breaks_clear(pts, 1e-4)
        from .geometry import det2

        res = np.abs(det2(eta.jacobian_fd(pts[keep])) - 2.0 / math.pi)
        w = eta(pts) @ rot.T
        l1 = np.abs(np.abs(w[:, 0]) + np.abs(w[:, 1]) - np.hypot(pts[:, 0], pts[:, 1]))
        doc["jacobian_fd_residual_max"] = float(np.max(res))
        doc["l1_identity_residual_max"] = float(np.max(l1))
    elif args.map == "shear":
        vmap = constructions.shear_map(args.eps)
        from .maps import continuity_report

        doc["continuity_max"] = max(continuity_report(vmap).values())
        field = lambda pts: np.where(  # noqa: E731
            np.abs(pts[..., 0]) + np.abs(pts[..., 1]) <= 1.0, args.eps, 1.0
        )
        mx, mean = energy.jacobian_residual(vmap, field, vmap.domain, seed=args.seed)
        doc["jacobian_residual_max"] = mx
        doc["jacobian_residual_mean"] = mean
    elif args.map == "wedge":
        wmap, jdet = constructions.wedge_map(args.eps)
        from .maps import continuity_report

        doc["continuity_max"] = max(continuity_report(wmap).values())
        mx, mean = energy.jacobian_residual(
            wmap, lambda pts: jdet(pts), wmap.domain, seed=args.seed
        )
        doc["jacobian_residual_max"] = mx
        doc["jacobian_residual_mean"] = mean
        grid = moser._interior_samples(moser.wedge_domain(), 4000, seed=args.seed)
        doc["jacobian_min"] = float(np.min(jdet(grid)))
    elif args.map == "counterexample":
        u = constructions.assemble_counterexample(args.eps)
        doc["boundary_identity_residual"] = constructions.boundary_identity_residual(u)
        datum = constructions.layered_datum(args.eps)
        mx, mean = energy.jacobian_residual(u, datum.as_field(), disc(2.0), seed=args.seed)
        doc["jacobian_residual_max_inner"] = mx
        doc["jacobian_residual_mean_inner"] = mean
        from .geometry import det2

        iso = []
        for r in (0.5, 1.5, 2.5):
            curve = isoperimetry.image_curve(u, r, n=1024)
            # enclosed area is the integral of the actual Jacobian: on the
            # outer ring the corrector-free assembly does not carry the datum
            grid = energy.build_grid(disc(r), n=max(args.grid, 128),
                                     break_radii=u.break_radii,
                                     break_angles=u.break_angles)
            area = float(np.sum(grid.weights * det2(u.jacobian(grid.nodes))))
            result = isoperimetry.isoperimetric_check(curve, area)
            iso.append(
                {"r": r, "lhs": result.lhs, "rhs": result.rhs,
                 "holds": result.holds, "equality": result.equality}
            )
        doc["isoperimetry"] = iso
    else:
        raise ConfigError(f"unknown map {args.map!r}")
    return _emit_json(doc) + "\n"


def run_moser_demo(args) -> str:
    _, jdet = constructions.wedge_map(args.eps)
    corrector, trace = moser.constant_jacobian_corrector(
        jdet,
        (6.0 - args.eps) / 5.0,
        moser.wedge_domain(),
        iterations=args.iters,
        n_panels=args.resolution,
        seed=args.seed,
    )
    if args.json:
        doc = {
            "trace": [
                {"iter": row.iteration, "max_residual": row.max_residual,
                 "mass_error": row.mass_error}
                for row in trace
            ],
            "boundary_displacement": corrector.boundary_displacement,
        }
        return _emit_json(doc) + "\n"
    rows = ["iter,max_residual,mass_error"]
    for row in trace:
        rows.append(f"{row.iteration},{_fmt(row.max_residual)},{_fmt(row.mass_error)}")
    return "\n".join(rows) + "\n"


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pjac",
        description="prescribed-Jacobian experiments: energies, audits, tables",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--p", type=float, default=1.0, help="energy exponent (>= 1)")
        p.add_argument("--grid", type=int, default=256, help="quadrature resolution")
        p.add_argument("--out", default="-", help="output path ('-' for stdout)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--json", action="store_true")

    p = sub.add_parser("energy-gap", help="radial blow-up vs bounded competitor")
    common(p)
    p.add_argument("--eps", default="1e-1,1e-2,1e-3")
    p.add_argument("--corrector", choices=("off", "on"), default="off")
    p.add_argument("--iters", type=int, default=3)
    p.set_defaults(fn=run_energy_gap)

    p = sub.add_parser("zhukovsky", help="circle-energy comparison audit")
    common(p)
    p.add_argument("--datum", default="uniform")
    p.add_argument("--competitor", default="phi2")
    p.add_argument("--radii", type=int, default=32)
    p.set_defaults(fn=run_zhukovsky)

    p = sub.add_parser("nonuniqueness", help="balanced-datum construction report")
    common(p)
    p.set_defaults(fn=run_nonuniqueness)

    p = sub.add_parser("check-map", help="continuity/Jacobian/isoperimetry audits")
    common(p)
    p.add_argument("--map", required=True,
                   choices=("eta", "shear", "wedge", "counterexample"))
    p.add_argument("--eps", type=float, default=0.5)
    p.set_defaults(fn=run_check_map)

    p = sub.add_parser("moser-demo", help="constant-Jacobian corrector trace")
    common(p)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--iters", type=int, default=3)
    p.add_argument("--resolution", type=int, default=20)
    p.set_defaults(fn=run_moser_demo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        if args.p < 1.0:
            raise ConfigError("exponent p must be >= 1")
        text = args.fn(args)
        _write_atomic(args.out, text)
    except ConfigError as exc:
        print(f"pjac: config error: {exc}", file=sys.stderr)
        return 2
    except (PjacError, FloatingPointError, ValueError) as exc:
        print(f"pjac: numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
