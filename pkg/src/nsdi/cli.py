"""Command-line front end.

Thin shells over the library: every command parses flags (with optional
JSON config-file defaults), builds the domain objects, runs one library
call, and emits CSV/JSON. Exit codes: 0 success, 2 usage error, 3
numerical failure; errors go to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Optional

from . import __version__, CONFIG_SCHEMA_VERSION
from .ensemble import default_workers, run_ensemble
from .fields import (DEFAULT_OMEGA, FieldParams, effective_field,
                     field_from_intensity, intensity_from_field)
from .integrate import IntegratorConfig, integrate
from .models import SymState2e
from .sampling import EnsembleSpec
from . import saddle as saddle_mod

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

_VERSION_TEXT = f"nsdi {__version__} config-schema {CONFIG_SCHEMA_VERSION}"


class UsageError(ValueError):
    """Bad flags or config values; maps to exit code 2."""


def _emit_error(kind: str, message: str) -> None:
    json.dump({"error": {"type": kind, "message": message}}, sys.stderr)
    sys.stderr.write("\n")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("usage", message)
        raise SystemExit(EXIT_USAGE)


def _load_config_file(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    return cfg


def _cfg_get(cfg: dict, section: str, key: str, default):
    sec = cfg.get(section, {})
    if not isinstance(sec, dict):
        raise UsageError(f"config section {section!r} must be an object")
    return sec.get(key, default)


def _pick(flag_value, cfg: dict, section: str, key: str, default):
    """Flag beats config file beats built-in default."""
    if flag_value is not None:
        return flag_value
    return _cfg_get(cfg, section, key, default)


def _field_from_args(args, cfg: dict, default_f: float = 0.137) -> FieldParams:
    return FieldParams(
        F_peak=float(_pick(args.field_strength, cfg, "field", "F_peak",
                           default_f)),
        omega=float(_pick(getattr(args, "omega", None), cfg, "field",
                          "omega", DEFAULT_OMEGA)),
        phi=float(_pick(getattr(args, "phi", None), cfg, "field", "phi",
                        0.0)))


def _integrator_from_args(args, cfg: dict) -> IntegratorConfig:
    defaults = IntegratorConfig()
    kwargs = {}
    for key in ("rel_tol", "abs_tol", "r_escape", "t_end"):
        flag = getattr(args, key, None)
        value = _pick(flag, cfg, "integrator", key, getattr(defaults, key))
        kwargs[key] = None if value is None else float(value)
    kwargs["t_end"] = kwargs["t_end"]  # may stay None (defaults to 3 T_d)
    return IntegratorConfig(rel_tol=kwargs["rel_tol"],
                            abs_tol=kwargs["abs_tol"],
                            r_escape=kwargs["r_escape"],
                            t_end=kwargs["t_end"])


def _field_dict(field: FieldParams) -> dict:
    return {"F_peak": field.F_peak, "omega": field.omega, "phi": field.phi,
            "T_d": field.T_d, "frozen": field.frozen}


def _integrator_dict(config: IntegratorConfig, field: FieldParams) -> dict:
    return {"rel_tol": config.rel_tol, "abs_tol": config.abs_tol,
            "dt_init": config.dt_init, "dt_min": config.dt_min,
            "r_min": config.r_min, "r_escape": config.r_escape,
            "t_end": config.resolved_t_end(field),
            "max_steps": config.max_steps}


def _write_resolved(out_dir: str, resolved: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    resolved = dict(resolved)
    resolved["schema_version"] = CONFIG_SCHEMA_VERSION
    with open(os.path.join(out_dir, "resolved_config.json"), "w",
              encoding="utf-8") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _print_json(payload: dict) -> None:
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


# ---------------------------------------------------------------------------
# commands

def _cmd_convert(args, cfg: dict) -> int:
    if (args.intensity is None) == (args.field is None):
        raise UsageError("give exactly one of --intensity or --field")
    if args.intensity is not None:
        field = field_from_intensity(args.intensity)
        payload = {"intensity_wcm2": args.intensity, "field_au": field}
    else:
        payload = {"field_au": args.field,
                   "intensity_wcm2": intensity_from_field(args.field)}
    payload["config"] = {"schema_version": CONFIG_SCHEMA_VERSION}
    _print_json(payload)
    return EXIT_OK


def _cmd_saddle(args, cfg: dict) -> int:
    f = float(_pick(args.field_strength, cfg, "field", "F_peak", 0.137))
    phase = float(_pick(args.phase_frozen, cfg, "saddle", "phase_frozen",
                        0.0))
    eps = f * math.cos(phase)
    info = saddle_mod.saddle_sym2e(eps)
    payload = {
        "eps": info.eps,
        "r_s": info.r_s,
        "r_s_squared": info.r_s ** 2,
        "theta": info.theta,
        "position": {"x": info.position[0], "y": info.position[1]},
        "V_s": info.V_s,
        "gradient_norm": saddle_mod.saddle_gradient_norm(eps),
        "config": {"field_strength": f, "phase_frozen": phase,
                   "schema_version": CONFIG_SCHEMA_VERSION},
    }
    _print_json(payload)
    if args.out_dir is not None:
        _write_resolved(args.out_dir,
                        {"command": "saddle", "field_strength": f,
                         "phase_frozen": phase})
    return EXIT_OK


def _cmd_stability(args, cfg: dict) -> int:
    f = float(_pick(args.field_strength, cfg, "field", "F_peak", 0.137))
    spectrum = saddle_mod.saddle_stability(f, method=args.method)
    payload = {
        "eps": f,
        "method": args.method,
        "eigenvalues": [float(v) for v in spectrum.eigenvalues],
        "n_unstable": spectrum.n_unstable,
        "n_stable": spectrum.n_stable,
        "n_zero": spectrum.n_zero,
        "zero_tol": spectrum.zero_tol,
        "config": {"field_strength": f, "method": args.method,
                   "schema_version": CONFIG_SCHEMA_VERSION},
    }
    _print_json(payload)
    return EXIT_OK


def _cmd_trajectory(args, cfg: dict) -> int:
    field = _field_from_args(args, cfg)
    config = _integrator_from_args(args, cfg)
    out_dir = args.out_dir

    if args.state is not None:
        parts = [float(v) for v in args.state.split(",")]
        if len(parts) != 4:
            raise UsageError("--state needs x,y,px,py")
        state = SymState2e(*parts)
        t0 = float(args.t0 if args.t0 is not None else 0.0)
        launch = {"mode": "explicit", "state": parts, "t0": t0}
    else:
        k = int(_pick(args.extremum_index, cfg, "trajectory",
                      "extremum_index", 6))
        radius_factor = float(_pick(args.radius_factor, cfg, "trajectory",
                                    "radius_factor", 1.05))
        momentum = float(_pick(args.momentum, cfg, "trajectory", "momentum",
                               0.6))
        t0 = k * math.pi / field.omega
        eps = effective_field(t0, field)
        if eps == 0.0:
            raise UsageError("frozen field vanishes at the requested "
                             "extremum; pick another index")
        info = saddle_mod.saddle_sym2e(eps)
        r0 = radius_factor * info.r_s
        ct, st = math.cos(info.theta), math.sin(info.theta)
        state = SymState2e(x=r0 * ct, y=r0 * st,
                           px=momentum * ct, py=momentum * st)
        launch = {"mode": "saddle_relative", "extremum_index": k,
                  "radius_factor": radius_factor, "momentum": momentum,
                  "t0": t0, "eps": eps}

    record = integrate("sym2e", state, t0, config, field,
                       record_every=args.record_every)
    os.makedirs(out_dir, exist_ok=True)
    record.write_csv(os.path.join(out_dir, "trajectory.csv"))
    with open(os.path.join(out_dir, "events.csv"), "w",
              encoding="utf-8") as fh:
        fh.write("kind,t\n")
        for ev in record.events:
            fh.write(f"{ev.kind},{ev.t:.17g}\n")
    _write_resolved(out_dir, {
        "command": "trajectory", "launch": launch,
        "field": _field_dict(field),
        "integrator": _integrator_dict(config, field),
        "record_every": args.record_every,
    })
    print(f"wrote {out_dir}/trajectory.csv "
          f"({record.t.size} samples, termination {record.termination})")
    return EXIT_OK


def _cmd_ensemble(args, cfg: dict) -> int:
    n = _pick(args.n, cfg, "ensemble", "n_samples", None)
    if n is None:
        raise UsageError("--n is required (or ensemble.n_samples in the "
                         "config file)")
    energy = float(_pick(args.energy, cfg, "ensemble", "E_tilde", -0.58))
    seed = int(_pick(args.seed, cfg, "ensemble", "master_seed", 1))
    spec = EnsembleSpec(E_tilde=energy, n_samples=int(n), master_seed=seed)
    field = _field_from_args(args, cfg)
    config = _integrator_from_args(args, cfg)
    workers = int(_pick(args.threads, cfg, "ensemble", "threads",
                        default_workers()))
    phi_offset = float(_pick(args.phi_offset, cfg, "ensemble", "phi_offset",
                             0.0))
    out_dir = args.out_dir

    result = run_ensemble(spec, field, config, n_workers=workers,
                          phi_offset=phi_offset)
    result.save(out_dir)
    _write_resolved(out_dir, {
        "command": "ensemble",
        "ensemble": {"n_samples": spec.n_samples, "E_tilde": spec.E_tilde,
                     "master_seed": spec.master_seed,
                     "phi_offset": phi_offset, "threads": workers},
        "field": _field_dict(field),
        "integrator": _integrator_dict(config, field),
    })
    s = result.summary()
    print(f"{result.n_total} trajectories: {result.n_double} double-ionized, "
          f"{result.n_rejected} rejected; "
          f"humps {s['hump_metric']['n_local_maxima']}, "
          f"valley {s['hump_metric']['valley_depth_ratio']:.3f}; "
          f"wrote {out_dir}/")
    return EXIT_OK


def _cmd_perturb_scan(args, cfg: dict) -> int:
    f = float(_pick(args.field_strength, cfg, "field", "F_peak", 0.137))
    if args.displacements is not None:
        disps = [float(v) for v in args.displacements.split(",")]
    else:
        disps = list(_cfg_get(cfg, "perturb", "displacements",
                              [0.0, 0.2, 0.4, -0.2, -0.4]))
    e_launch = float(_pick(args.e_launch, cfg, "perturb", "e_launch", -1.2))
    field = FieldParams(F_peak=f, omega=float(
        _pick(args.omega, cfg, "field", "omega", DEFAULT_OMEGA)))
    results = saddle_mod.perturbed_saddle_trajectories(
        f, disps, field, e_launch=e_launch)
    rows = [{"displacement": r.displacement, "tag": r.tag,
             "e1": r.final_energies[0], "e2": r.final_energies[1],
             "termination": r.record.termination} for r in results]
    payload = {"rows": rows,
               "config": {"field_strength": f, "e_launch": e_launch,
                          "displacements": disps,
                          "schema_version": CONFIG_SCHEMA_VERSION}}
    _print_json(payload)
    if args.out_dir is not None:
        os.makedirs(args.out_dir, exist_ok=True)
        with open(os.path.join(args.out_dir, "perturb_scan.csv"), "w",
                  encoding="utf-8") as fh:
            fh.write("displacement,tag,e1,e2,termination\n")
            for row in rows:
                fh.write(f"{row['displacement']:.17g},{row['tag']},"
                         f"{row['e1']:.17g},{row['e2']:.17g},"
                         f"{row['termination']}\n")
        _write_resolved(args.out_dir, {"command": "perturb-scan",
                                       **payload["config"]})
    return EXIT_OK


def _ngon_csv_lines(rows) -> list:
    lines = ["N,eps,exists,rho_s,z_s,V_s,criterion"]
    for n, eps, exists, rho_s, z_s, v_s, crit in rows:
        lines.append(f"{n},{eps:.17g},{str(exists).lower()},{rho_s:.17g},"
                     f"{z_s:.17g},{v_s:.17g},{str(crit).lower()}")
    return lines


def _cmd_ngon_scan(args, cfg: dict) -> int:
    n_min = int(_pick(args.n_min, cfg, "ngon", "n_min", 2))
    n_max = int(_pick(args.n_max, cfg, "ngon", "n_max", 20))
    if n_min < 1 or n_max < n_min:
        raise UsageError("need 1 <= n-min <= n-max")
    f = float(_pick(args.field_strength, cfg, "field", "F_peak", 0.137))
    rows = saddle_mod.ngon_scan_table(range(n_min, n_max + 1), [f])
    lines = _ngon_csv_lines(rows)
    if args.out_dir is not None:
        os.makedirs(args.out_dir, exist_ok=True)
        with open(os.path.join(args.out_dir, "ngon_scan.csv"), "w",
                  encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        _write_resolved(args.out_dir,
                        {"command": "ngon-scan", "n_min": n_min,
                         "n_max": n_max, "field_strength": f})
        print(f"wrote {args.out_dir}/ngon_scan.csv")
    else:
        print("\n".join(lines))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nsdi",
                     description="Classical two-electron strong-field "
                                 "ionization toolkit")
    parser.add_argument("--version", action="version",
                        version=_VERSION_TEXT)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert intensity <-> field strength")
    p.add_argument("--intensity", type=float, help="intensity in W/cm^2")
    p.add_argument("--field", type=float, help="field strength in a.u.")
    p.set_defaults(handler=_cmd_convert)

    def add_common(p, out_default=None):
        p.add_argument("--config", help="JSON config file")
        if out_default is False:
            p.add_argument("--out-dir", default=None,
                           help="directory for output files (optional)")
        else:
            p.add_argument("--out-dir", default=out_default,
                           help="directory for output files")

    p = sub.add_parser("saddle", help="frozen-field saddle location")
    add_common(p, out_default=False)
    p.add_argument("--field-strength", type=float,
                   help="frozen field amplitude in a.u.")
    p.add_argument("--phase-frozen", type=float,
                   help="carrier phase; the frozen field is F cos(phase)")
    p.set_defaults(handler=_cmd_saddle)

    p = sub.add_parser("stability", help="saddle-pair curvature spectrum")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--field-strength", type=float)
    p.add_argument("--method", choices=("analytic", "fd"),
                   default="analytic")
    p.set_defaults(handler=_cmd_stability)

    p = sub.add_parser("trajectory", help="integrate one trajectory to CSV")
    add_common(p, out_default="nsdi-trajectory")
    p.add_argument("--field-strength", type=float)
    p.add_argument("--omega", type=float)
    p.add_argument("--phi", type=float)
    p.add_argument("--state", help="explicit initial state x,y,px,py")
    p.add_argument("--t0", type=float, help="start time for --state")
    p.add_argument("--extremum-index", type=int,
                   help="carrier extremum k for the saddle-relative launch")
    p.add_argument("--radius-factor", type=float,
                   help="launch radius over the saddle radius")
    p.add_argument("--momentum", type=float,
                   help="outward momentum of the saddle-relative launch")
    p.add_argument("--rel-tol", dest="rel_tol", type=float)
    p.add_argument("--abs-tol", dest="abs_tol", type=float)
    p.add_argument("--r-escape", dest="r_escape", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--record-every", type=int, default=1)
    p.set_defaults(handler=_cmd_trajectory)

    p = sub.add_parser("ensemble", help="microcanonical ensemble run")
    add_common(p, out_default="nsdi-ensemble")
    p.add_argument("--n", type=int, help="number of trajectories")
    p.add_argument("--energy", type=float, help="shell energy (a.u.)")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--field-strength", type=float)
    p.add_argument("--omega", type=float)
    p.add_argument("--phi-offset", type=float,
                   help="carrier-phase offset added to every sample")
    p.add_argument("--threads", type=int,
                   help="worker processes (default NSDI_THREADS or CPUs)")
    p.add_argument("--rel-tol", dest="rel_tol", type=float)
    p.add_argument("--abs-tol", dest="abs_tol", type=float)
    p.add_argument("--r-escape", dest="r_escape", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.set_defaults(handler=_cmd_ensemble)

    p = sub.add_parser("perturb-scan",
                       help="classified trajectories off the saddle pair")
    add_common(p, out_default=False)
    p.add_argument("--field-strength", type=float)
    p.add_argument("--omega", type=float)
    p.add_argument("--displacements",
                   help="comma list in units of the saddle radius")
    p.add_argument("--e-launch", dest="e_launch", type=float,
                   help="total energy of the launch state (a.u.)")
    p.set_defaults(handler=_cmd_perturb_scan)

    p = sub.add_parser("ngon-scan", help="ring-configuration saddle table")
    add_common(p, out_default=False)
    p.add_argument("--n-min", dest="n_min", type=int)
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--field-strength", type=float)
    p.set_defaults(handler=_cmd_ngon_scan)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help/--version, EXIT_USAGE via _Parser.error
        return int(exc.code or 0)
    try:
        cfg = _load_config_file(getattr(args, "config", None))
        return args.handler(args, cfg)
    except ValueError as exc:
        # domain validation (dataclass __post_init__, flag checks,
        # precondition violations like a vanishing frozen field) means
        # the inputs were unusable
        _emit_error("usage", str(exc))
        return EXIT_USAGE
    except (ArithmeticError, RuntimeError) as exc:
        # computational dead ends: no crossing found, empty ensemble,
        # Newton failure, degenerate spectra
        _emit_error("numerical", str(exc))
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
