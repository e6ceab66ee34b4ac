"""Command-line driver for forward runs, uniqueness reports and inversions.

Subcommands ``selftest``, ``forward``, ``uniqueness``, ``invert`` and
``sweep``.  Configurations are JSON documents; outputs are CSV tables with
17 significant digits plus JSON reports and manifests.  Exit status is 0 on
success, 1 for invalid configurations and 2 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import lab
from .boundary import ConditioningError, assemble_operators, jump_relation_check, lemma41_check
from .geometry import make_curve, make_grid
from .heat import BackgroundField, HeatMaterial, HeatSetup, MeasurementSet, boundary_measurement
from .kernels import EULER_GAMMA, DrudeParams, expansion_constants, green_low_freq_expansion, helmholtz_green
from .scattering import SolverError, solve_lippmann_schwinger
from .volume import boundary_volume_potential, total_mass, volume_potential

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2
OMEGA_RANGE = (1e-4, 1e-1)
FAULTS = ("gamma_e",)


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""


def _fmt(x):
    return f"{x:.17g}"


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description.

    All lengths are dimensionless; frequencies are in units of the plasma
    frequency scale used by :class:`~photothermal.kernels.DrudeParams`.
    """

    geometry: dict = field(default_factory=lambda: {"kind": "circle", "params": {"radius": 2.0}, "n": 128})
    grid_h: float = 0.05
    drude: dict = field(default_factory=lambda: {"omega_p": 1.0, "tau": 1.0})
    gamma_c: float = 2.0
    background: dict = field(default_factory=lambda: {"a0": 1.0, "a1": 0.1})
    source: dict = field(default_factory=lambda: {"kind": "gaussian", "center": [0.3, -0.2], "width": 0.4})
    pair: dict | None = None
    atoms: list | None = None
    true_coefficients: list | None = None
    noise: float = 0.0
    sweep: dict = field(default_factory=lambda: {"omega_min": 1e-4, "omega_max": 1e-2, "count": 10})
    measurement: dict = field(default_factory=lambda: {"radius": 3.0, "n_angles": 64})
    mode: str = "full"
    ls_tol: float = 1e-10
    method: str = "auto"
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {path}: {exc}") from exc
        return cls.from_dict(data)

    def validate(self):
        def need(cond, name, msg):
            if not cond:
                raise ConfigError(f"{name}: {msg}")

        need(self.geometry.get("kind") in ("circle", "ellipse", "kite"), "geometry.kind",
             "must be circle, ellipse or kite")
        need(self.grid_h > 0, "grid_h", "must be positive")
        need(self.drude.get("omega_p", 1.0) > 0, "drude.omega_p", "must be positive")
        need(self.drude.get("tau", 1.0) > 0, "drude.tau", "must be positive")
        need(self.gamma_c > 0 and self.gamma_c != 1, "gamma_c", "must be positive and different from 1")
        lo, hi = self.sweep.get("omega_min", 0), self.sweep.get("omega_max", 0)
        need(OMEGA_RANGE[0] <= lo <= hi <= OMEGA_RANGE[1], "sweep",
             f"omega_min <= omega_max must lie in [{OMEGA_RANGE[0]:g}, {OMEGA_RANGE[1]:g}]")
        need(int(self.sweep.get("count", 0)) >= 1, "sweep.count", "must be at least 1")
        need(self.measurement.get("radius", 0) > 0, "measurement.radius", "must be positive")
        need(int(self.measurement.get("n_angles", 0)) >= 1, "measurement.n_angles", "must be at least 1")
        need(self.mode in ("full", "asymptotic"), "mode", "must be full or asymptotic")
        need(self.method in ("auto", "dense", "gmres"), "method", "must be auto, dense or gmres")
        need(self.ls_tol > 0, "ls_tol", "must be positive")
        need(self.noise >= 0, "noise", "must be non-negative")
        try:
            BackgroundField(**self.background)
        except TypeError as exc:
            raise ConfigError(f"background: {exc}") from exc

    @property
    def omegas(self):
        s = self.sweep
        return np.logspace(math.log10(s["omega_min"]), math.log10(s["omega_max"]), int(s["count"]))


@dataclass(frozen=True, eq=False)
class Experiment:
    config: ExperimentConfig
    setup: HeatSetup

    @property
    def grid(self):
        return self.setup.grid

    def source(self, spec):
        try:
            return lab.make_source(self.grid, spec)
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"source: {exc}") from exc


def build(cfg: ExperimentConfig) -> Experiment:
    g = cfg.geometry
    try:
        curve = make_curve(g["kind"], g.get("params"), int(g.get("n", 128)))
        grid = make_grid(curve, cfg.grid_h)
        setup = HeatSetup(curve, grid, DrudeParams(**cfg.drude), HeatMaterial(cfg.gamma_c),
                          BackgroundField(**cfg.background), float(cfg.measurement["radius"]),
                          int(cfg.measurement["n_angles"]))
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"geometry/measurement: {exc}") from exc
    return Experiment(cfg, setup)


def measure(exp: Experiment, f, omegas, mode=None, threads: int = 1, literal: bool = False) -> MeasurementSet:
    """Boundary data over a sweep, split across worker threads by frequency."""
    cfg = exp.config
    mode = mode or cfg.mode
    omegas = np.asarray(omegas, dtype=float)

    def run(ws):
        return boundary_measurement(exp.setup, f, ws, mode, literal=literal, method=cfg.method, tol=cfg.ls_tol)

    if threads <= 1 or len(omegas) == 1 or mode == "asymptotic":
        return run(omegas)
    chunks = [c for c in np.array_split(omegas, min(threads, len(omegas))) if len(c)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(run, chunks))
    first = parts[0]
    return MeasurementSet(first.radius, first.theta, omegas, np.vstack([p.values for p in parts]), mode, first.meta)


def _write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _entry(name, residual, tol, ok=None):
    ok = (residual <= tol) if ok is None else ok
    return {"name": name, "residual": float(residual), "tolerance": float(tol), "pass": bool(ok)}


# --------------------------------------------------------------------------
# selftest
# --------------------------------------------------------------------------

# tolerances for the default (n=256, h=0.02) and coarse (n=32, h=0.08) suites
SELFTEST_TOLERANCES = {
    "expansion": (1e-8, 1e-8),
    "S[1]": (1e-8, 1e-6),
    "S[cos 3t]": (1e-8, 1e-6),
    "K*[1]": (1e-8, 1e-8),
    "phi0": (1e-8, 1e-6),
    "N[1](0)": (5e-4, 2e-3),
    "jump": (5e-3, 5e-2),
    "inversion": (1e-6, 1e-4),
    "green 256pi": (1e-6, 1e-6),
}


def selftest(coarse: bool = False, fault: str | None = None, seed: int = 0):
    """Run the analytic disk oracle suite; returns a list of report entries."""
    n, h = (32, 0.08) if coarse else (256, 0.02)
    col = 1 if coarse else 0
    tol = {k: v[col] for k, v in SELFTEST_TOLERANCES.items()}
    R = 2.0
    out = []

    rng = np.random.default_rng(seed)
    gamma_e = EULER_GAMMA + (1e-3 if fault == "gamma_e" else 0.0)
    const = expansion_constants(1, gamma_e)
    x = rng.uniform(-1, 1, (100, 2))
    d = rng.normal(size=(100, 2))
    y = x + 1e-3 * d / np.linalg.norm(d, axis=1, keepdims=True)
    exact = helmholtz_green(x, y, 1.0)
    approx = green_low_freq_expansion(x, y, 1.0, J=1, constants=const)
    out.append(_entry("expansion", np.max(np.abs(approx - exact) / np.abs(exact)), tol["expansion"]))

    curve = make_curve("circle", {"radius": R}, n)
    ops = assemble_operators(curve)
    t = curve.t
    out.append(_entry("S[1]", np.max(np.abs(ops.S @ np.ones(n) - R * np.log(R))), tol["S[1]"]))
    out.append(_entry("S[cos 3t]", np.max(np.abs(ops.S @ np.cos(3 * t) + R / 6 * np.cos(3 * t))), tol["S[cos 3t]"]))
    out.append(_entry("K*[1]", np.max(np.abs(ops.K @ np.ones(n) - 0.5)), tol["K*[1]"]))
    out.append(_entry("phi0", np.max(np.abs(ops.phi0.values - 1 / (2 * np.pi * R))), tol["phi0"]))

    grid = make_grid(curve, h)
    nd0 = volume_potential(grid, np.ones(grid.size), np.zeros((1, 2)))[0]
    out.append(_entry("N[1](0)", abs(nd0 - (R * R / 2 * np.log(R) - R * R / 4)), tol["N[1](0)"]))

    jr = jump_relation_check(curve, 1 + np.cos(3 * t) + 0.5 * np.sin(2 * t), ops=ops)
    out.append(_entry("jump", jr.residual, tol["jump"]))

    g, dg = boundary_volume_potential(curve, lambda p: np.ones(len(p)))
    rep = lemma41_check(curve, g, dg, np.pi * R * R, ops)
    out.append(_entry("inversion", rep.residual, tol["inversion"]))

    gr = lab.greens_identity_check(lab.PolyField.radial([R**4, -2 * R**2, 1.0]), lab.PolyField.constant(1.0), curve)
    rel = max(abs(gr.volume - 256 * np.pi), abs(gr.boundary - 256 * np.pi)) / (256 * np.pi)
    out.append(_entry("green 256pi", rel, tol["green 256pi"]))
    return out


def _print_table(entries, stream=None):
    stream = sys.stdout if stream is None else stream
    stream.write(f"{'check':<14} {'residual':>12} {'tolerance':>10}  status\n")
    for e in entries:
        stream.write(f"{e['name']:<14} {e['residual']:12.3e} {e['tolerance']:10.1e}  {'PASS' if e['pass'] else 'FAIL'}\n")


def cmd_selftest(args) -> int:
    entries = selftest(coarse=args.coarse, fault=args.fault_inject, seed=args.seed or 0)
    _print_table(entries)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "selftest.json", {"coarse": args.coarse, "fault": args.fault_inject, "checks": entries})
    return EXIT_OK if all(e["pass"] for e in entries) else EXIT_NUMERIC


# --------------------------------------------------------------------------
# forward and sweep
# --------------------------------------------------------------------------


def _manifest(exp: Experiment, ms: MeasurementSet, files, extra=None):
    cfg = exp.config
    return {"config": asdict(cfg), "measurement": ms.manifest(), "files": files,
            "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()), **(extra or {})}


def cmd_forward(cfg: ExperimentConfig, out: Path, threads: int = 1) -> dict:
    exp = build(cfg)
    f = exp.source(cfg.source)
    ms = measure(exp, f, cfg.omegas, threads=threads)
    out.mkdir(parents=True, exist_ok=True)
    ms.to_csv(out / "measurements.csv")
    g = exp.grid
    with open(out / "source.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x1", "x2", "area", "f"])
        for (a, b), ar, v in zip(g.centers, g.areas, f.values):
            w.writerow([_fmt(a), _fmt(b), _fmt(ar), _fmt(v)])
    files = ["measurements.csv", "source.csv"]
    if cfg.mode == "full":
        u = solve_lippmann_schwinger(g, f, float(cfg.omegas[0]), exp.setup.drude, tol=cfg.ls_tol, method=cfg.method)
        u.to_csv(out / "field_omega0.csv")
        files.append("field_omega0.csv")
    man = _manifest(exp, ms, files, {"T1": total_mass(g, f.values)})
    _write_json(out / "manifest.json", man)
    return man


def _write_fit_csv(path, ms: MeasurementSet, fit: lab.SweepFit):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "c_2ln2", "c_ln", "c_0", "residual"])
        for i, th in enumerate(ms.theta):
            w.writerow([_fmt(th), _fmt(fit.c_2ln2[i]), _fmt(fit.c_ln[i]), _fmt(fit.c_0[i]), _fmt(fit.residual[i])])


def _zero_offset(exp: Experiment, omegas, mode, threads):
    zero = lab.make_source(exp.grid, {"kind": "constant", "value": 0.0})
    return measure(exp, zero, omegas, mode, threads).values


def cmd_sweep(cfg: ExperimentConfig, out: Path, threads: int = 1) -> dict:
    exp = build(cfg)
    f = exp.source(cfg.source)
    om = cfg.omegas
    ms = measure(exp, f, om, threads=threads)
    fit = lab.fit_frequency_coefficients(ms.values, om, offset=_zero_offset(exp, om, cfg.mode, threads))
    out.mkdir(parents=True, exist_ok=True)
    ms.to_csv(out / "measurements.csv")
    _write_fit_csv(out / "sweep_fit.csv", ms, fit)
    man = _manifest(exp, ms, ["measurements.csv", "sweep_fit.csv"], {"fit_condition": fit.condition})
    _write_json(out / "manifest.json", man)
    return man


# --------------------------------------------------------------------------
# uniqueness
# --------------------------------------------------------------------------


def cmd_uniqueness(cfg: ExperimentConfig, out: Path, threads: int = 1) -> dict:
    if not cfg.pair:
        raise ConfigError("pair: a uniqueness run needs a 'pair' entry with f1, f2 and relation")
    exp = build(cfg)
    p = cfg.pair
    if p.get("relation") not in lab.RELATIONS:
        raise ConfigError(f"pair.relation: must be one of {lab.RELATIONS}")
    f1 = exp.source(p["f1"])
    f2 = -f1 if p["relation"] == "sign-flip" and p.get("f2") is None else exp.source(p["f2"])
    pair = lab.SourcePair(f1, f2, p["relation"], tuple(p.get("direction", (0.0, 1.0))))
    ok, rel_res = pair.check_relation(tol=float(p.get("relation_tol", 1e-6)))
    if not ok:
        raise ConfigError(f"pair: sources do not satisfy relation {pair.relation!r} (residual {rel_res:.3e})")
    om = cfg.omegas
    tau = float(p.get("tolerance", 1e-10))
    d1 = measure(exp, f1, om, threads=threads)
    d2 = measure(exp, f2, om, threads=threads)
    comp = lab.compare_measurements(pair, exp.setup, om, data=(d1, d2))
    entries = [_entry("relation", rel_res, float(p.get("relation_tol", 1e-6))),
               _entry("compare_measurements", comp.max_difference, tau)]
    admissible = comp.max_difference <= tau
    T1 = abs(total_mass(exp.grid, f1.values))
    entries.append(_entry("moment_identity", lab.verify_moment_identity(pair), max(tau, 1e-10 * T1),
                          None if admissible else True))
    tr = lab.verify_trace_identity(pair)
    entries.append(_entry(f"trace_identity(s={tr.sign:+d})", tr.residual, 1e-8, None if admissible else True))
    extra = {}
    if pair.relation == "direction-invariant":
        e = np.asarray(pair.direction, dtype=float)
        # rotate so the invariance direction becomes the x2-axis; only the axis-aligned case is supported
        if abs(abs(e[1]) - np.linalg.norm(e)) > 1e-12:
            raise ConfigError("pair.direction: only the x2-axis direction (0, 1) is supported")
        for label, fn in (("difference", lambda x: f1.sampler(x) - f2.sampler(x)),
                          ("sum", lambda x: f1.sampler(x) + f2.sampler(x))):
            try:
                rep = lab.fourier_direction_test(fn, exp.setup.curve)
            except ValueError:
                continue
            entries.append(_entry(f"fourier_factorisation({label})", float(np.max(rep.relative)), 1e-6))
            extra[f"fourier_{label}"] = {"zeta11": rep.zeta11, "planar_abs": np.abs(rep.planar)}
            break
    if pair.relation == "biharmonic-diff":
        nv = lab.navier_vanishing_test(exp.setup.curve)
        entries.append(_entry("navier_vanishing", nv.residual, 1e-4))
    if pair.relation == "harmonic-diff":
        # a compactly supported function harmonic in the whole plane vanishes identically
        diff = float(np.max(np.abs(f1.values - f2.values)))
        extra["harmonic_in_plane_reading"] = {"max_abs_difference": diff, "holds": diff == 0.0}
        extra["harmonic_in_domain_reading"] = {"measurements_equal": bool(admissible)}
    report = {"relation": pair.relation, "admissible": bool(admissible), "checks": entries,
              "per_frequency": {"omega": comp.omegas, "max_difference": comp.per_frequency}, **extra}
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "uniqueness.json", report)
    return report


# --------------------------------------------------------------------------
# invert
# --------------------------------------------------------------------------


def cmd_invert(cfg: ExperimentConfig, out: Path, threads: int = 1) -> dict:
    exp = build(cfg)
    g = exp.grid
    om = cfg.omegas
    f = exp.source(cfg.source)
    one = exp.source({"kind": "constant"})
    offset = _zero_offset(exp, om, cfg.mode, threads)
    ms_f = measure(exp, f, om, threads=threads)
    ms_1 = measure(exp, one, om, threads=threads)
    fit_f = lab.fit_frequency_coefficients(ms_f.values, om, offset=offset)
    fit_1 = lab.fit_frequency_coefficients(ms_1.values, om, offset=offset)
    T1_unit = total_mass(g, one.values)
    est = lab.recover_total_intensity(fit_f, fit_1, T1_unit)
    report = {"mode": cfg.mode, "fit_condition": fit_f.condition,
              "total_intensity": {"estimate": est, "true_abs": abs(total_mass(g, f.values)),
                                  "calibration": {"source": "constant 1", "T1": T1_unit}}}
    out.mkdir(parents=True, exist_ok=True)
    _write_fit_csv(out / "sweep_fit.csv", ms_f, fit_f)
    if cfg.atoms:
        if not cfg.true_coefficients or len(cfg.true_coefficients) != len(cfg.atoms):
            raise ConfigError("true_coefficients: one coefficient per atom is required")
        atoms = [exp.source(a) for a in cfg.atoms]
        cs = np.asarray(cfg.true_coefficients, dtype=float)
        target = atoms[0].scaled(cs[0])
        for a, c in zip(atoms[1:], cs[1:]):
            target = target + a.scaled(c)
        model = lab.quadratic_model(exp.setup, atoms, om, literal=False)
        obs = measure(exp, target, om, threads=threads).values
        if cfg.noise > 0:
            rng = np.random.default_rng(cfg.seed)
            obs = obs + cfg.noise * np.max(np.abs(obs - model.base)) * rng.standard_normal(obs.shape)
        res = lab.reconstruct_parametric(obs, model, seed=cfg.seed)
        err = min(np.linalg.norm(res.coefficients - cs), np.linalg.norm(res.mirror - cs)) / np.linalg.norm(cs)
        report["parametric"] = {"coefficients": res.coefficients, "mirror": res.mirror, "misfit": res.misfit,
                                "mirror_misfit": res.mirror_misfit, "relative_error": float(err),
                                "converged": res.converged, "noise": cfg.noise, "seed": cfg.seed}
    _write_json(out / "invert.json", report)
    return report


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def _parser():
    p = argparse.ArgumentParser(prog="photothermal", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("selftest", "forward", "uniqueness", "invert", "sweep"):
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON experiment configuration")
        s.add_argument("--out", help="output directory")
        s.add_argument("--threads", type=int, default=1, help="worker threads for frequency solves")
        s.add_argument("--seed", type=int, default=None, help="random seed (overrides the config)")
        s.add_argument("--fault-inject", choices=FAULTS, default=None, help=argparse.SUPPRESS)
        if name == "selftest":
            s.add_argument("--coarse", action="store_true", help="n=32, h=0.08 with relaxed tolerances")
    return p


COMMANDS = {"forward": cmd_forward, "uniqueness": cmd_uniqueness, "invert": cmd_invert, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "selftest":
            return cmd_selftest(args)
        if args.threads < 1:
            raise ConfigError("--threads: must be at least 1")
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            cfg = ExperimentConfig.from_dict({**asdict(cfg), "seed": args.seed})
        out = Path(args.out or f"out_{args.command}")
        report = COMMANDS[args.command](cfg, out, threads=args.threads)
        checks = report.get("checks")
        if checks and args.command == "uniqueness" and report.get("admissible"):
            if not all(c["pass"] for c in checks):
                print(json.dumps(checks, indent=2, default=_json_default))
                return EXIT_NUMERIC
        print(f"{args.command}: wrote {out}")
        return EXIT_OK
    except (SolverError, ConditioningError, lab.FitRefused, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
