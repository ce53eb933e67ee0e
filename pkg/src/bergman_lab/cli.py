"""Run orchestration: configs, report emission and the verification gate.

Config files are flat UTF-8 ``key = value`` text with dotted section
prefixes; unknown keys are rejected so that typos fail loudly.  Reports are
CSV with a fixed header plus a summary JSON; an optional gnuplot script
plots fit residuals against the degree.  Exit codes: 0 all gates pass,
1 a tolerance gate failed, 2 configuration or numerical breakdown.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from . import asymptotics, bergman, family, geometry, hilbert, predictions, quadrature
from .family import HERMITIAN, HOLOMORPHIC, KINDS
from .geometry import AFFINE, CHOICES, INFINITY, OMEGA_ORTHOGONAL, PRODUCT, FiberPoint
from .hilbert import ConditioningError
from .verify import (DEFAULT_TOLS, FIT_GUARD_K, RANDOM_JET_SEED, SUITES,
                     CheckRow, Verifier, thread_count)

EXIT_PASS = 0
EXIT_TOLERANCE = 1
EXIT_BREAKDOWN = 2

BERGMAN_CSV_HEADER = ["scenario", "s_re", "s_im", "chart", "z_re", "z_im",
                      "p", "density", "err_est"]
CURVATURE_CSV_HEADER = BERGMAN_CSV_HEADER + ["kind", "choice", "theta_diag_re",
                                             "theta_diag_im", "fd_err"]


class ConfigError(ValueError):
    """Malformed or out-of-range run configuration."""


class BreakdownError(RuntimeError):
    """Numerical breakdown: quadrature or conditioning gate exceeded."""


# ---------------------------------------------------------------------------
# value parsing / formatting


def _fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def _fmt_complex(z: complex) -> str:
    return f"{format(z.real, 'g')}{z.imag:+g}i"


def parse_complex(tok: str) -> complex:
    try:
        return complex(tok.strip().replace("i", "j"))
    except ValueError as exc:
        raise ConfigError(f"cannot parse complex value {tok!r}") from exc


def parse_fiber_point(tok: str) -> FiberPoint:
    tok = tok.strip()
    if tok.startswith("inf:"):
        return FiberPoint(INFINITY, parse_complex(tok[4:]))
    return FiberPoint(AFFINE, parse_complex(tok))


def _fmt_fiber_point(x: FiberPoint) -> str:
    prefix = "inf:" if x.chart == INFINITY else ""
    return prefix + _fmt_complex(x.z)


# ---------------------------------------------------------------------------
# run configuration


@dataclass
class RunConfig:
    """Scenario, sample grid, numerical knobs, tolerances and output paths."""

    scenario_id: str = "conformal-mix"
    scenario_params: dict = field(default_factory=dict)
    twist_delta: float = 0.0
    s_max: float = geometry.DEFAULT_S_MAX
    p_list: tuple = (16, 24, 32, 48, 64)
    base_points: tuple = (0.2 + 0.1j,)
    fiber_points: tuple = tuple(geometry.fiber_grid(5))
    choice: str = OMEGA_ORTHOGONAL
    kind: str = HOLOMORPHIC
    quad_m: int = 0          # 0 = max(48, 2p)
    fd_step: float = 0.0     # 0 = 1e-3 * s_max
    fit_k: int = FIT_GUARD_K
    tols: dict = field(default_factory=dict)
    out_dir: str = "out"
    plots: bool = False

    def scenario(self) -> geometry.Scenario:
        return geometry.catalog(self.scenario_id, twist_delta=self.twist_delta,
                                s_max=self.s_max, **self.scenario_params)

    def rule(self, p: int) -> quadrature.QuadRule:
        m = self.quad_m or quadrature.default_resolution(p)
        return quadrature.build_rule(m)

    def tol(self, name: str) -> float:
        return float(self.tols.get(name, DEFAULT_TOLS[name]))


_SCENARIO_PARAM_KEYS = ("c", "eps", "eta")


def parse_config(text: str) -> RunConfig:
    """Parse flat key=value text; unknown keys are errors."""
    cfg = RunConfig()
    params = {}
    tols = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        try:
            if key == "scenario.id":
                if val not in geometry.CATALOG_IDS:
                    raise ConfigError(f"unknown scenario id {val!r}")
                cfg.scenario_id = val
            elif key.startswith("scenario.") and key[9:] in _SCENARIO_PARAM_KEYS:
                params[key[9:]] = float(val)
            elif key == "scenario.twist_delta":
                cfg.twist_delta = float(val)
            elif key == "scenario.s_max":
                cfg.s_max = float(val)
            elif key == "run.p_list":
                cfg.p_list = tuple(int(t) for t in val.split(",") if t.strip())
                if not cfg.p_list:
                    raise ConfigError("run.p_list is empty")
            elif key == "run.base_points":
                cfg.base_points = tuple(parse_complex(t) for t in val.split(",") if t.strip())
                if not cfg.base_points:
                    raise ConfigError("run.base_points is empty")
            elif key == "run.fiber_points":
                cfg.fiber_points = tuple(parse_fiber_point(t)
                                         for t in val.split(",") if t.strip())
                if not cfg.fiber_points:
                    raise ConfigError("run.fiber_points is empty")
            elif key == "run.fiber_grid":
                cfg.fiber_points = tuple(geometry.fiber_grid(int(val)))
            elif key == "run.choice":
                if val not in CHOICES:
                    raise ConfigError(f"unknown horizontal choice {val!r}")
                cfg.choice = val
            elif key == "run.kind":
                if val not in KINDS:
                    raise ConfigError(f"unknown connection kind {val!r}")
                cfg.kind = val
            elif key == "run.quad_m":
                cfg.quad_m = int(val)
            elif key == "run.fd_step":
                cfg.fd_step = float(val)
            elif key == "run.fit_k":
                cfg.fit_k = int(val)
            elif key.startswith("tol."):
                name = key[4:]
                if name not in DEFAULT_TOLS:
                    raise ConfigError(f"unknown tolerance {name!r}")
                tols[name] = float(val)
            elif key == "out.dir":
                cfg.out_dir = val
            elif key == "out.plots":
                cfg.plots = val.strip() in ("1", "true", "yes")
            else:
                raise ConfigError(f"unknown key {key!r}")
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {val!r}") from exc
    cfg.scenario_params = params
    cfg.tols = tols
    _validate_config(cfg)
    return cfg


def _validate_config(cfg: RunConfig):
    if any(p < 1 for p in cfg.p_list):
        raise ConfigError("degrees in run.p_list must be >= 1")
    if len(set(cfg.p_list)) != len(cfg.p_list):
        raise ConfigError("run.p_list entries must be distinct")
    if tuple(sorted(cfg.p_list)) != cfg.p_list:
        raise ConfigError("run.p_list must be strictly increasing")
    if cfg.quad_m and (cfg.quad_m < quadrature.MIN_RESOLUTION or cfg.quad_m % 2):
        raise ConfigError("run.quad_m must be 0 or an even integer >= 8")
    if cfg.fd_step < 0:
        raise ConfigError("run.fd_step must be nonnegative")
    if cfg.fit_k < 0 or cfg.fit_k + 2 > len(cfg.p_list):
        raise ConfigError("run.fit_k needs at least fit_k + 2 degrees in run.p_list")
    for s in cfg.base_points:
        if abs(s) >= cfg.s_max:
            raise ConfigError(f"base point {_fmt_complex(s)} outside |s| < {cfg.s_max:g}")
    try:
        cfg.scenario()
    except geometry.ScenarioError as exc:
        raise ConfigError(str(exc)) from exc


def serialize_config(cfg: RunConfig) -> str:
    """Inverse of parse_config (lossless round trip)."""
    lines = [f"scenario.id = {cfg.scenario_id}"]
    for name in _SCENARIO_PARAM_KEYS:
        if name in cfg.scenario_params:
            lines.append(f"scenario.{name} = {_fmt_float(cfg.scenario_params[name])}")
    lines.append(f"scenario.twist_delta = {_fmt_float(cfg.twist_delta)}")
    lines.append(f"scenario.s_max = {_fmt_float(cfg.s_max)}")
    lines.append("run.p_list = " + ",".join(str(p) for p in cfg.p_list))
    lines.append("run.base_points = " + ",".join(_fmt_complex(s) for s in cfg.base_points))
    lines.append("run.fiber_points = "
                 + ",".join(_fmt_fiber_point(x) for x in cfg.fiber_points))
    lines.append(f"run.choice = {cfg.choice}")
    lines.append(f"run.kind = {cfg.kind}")
    lines.append(f"run.quad_m = {cfg.quad_m}")
    lines.append(f"run.fd_step = {_fmt_float(cfg.fd_step)}")
    lines.append(f"run.fit_k = {cfg.fit_k}")
    for name in sorted(cfg.tols):
        lines.append(f"tol.{name} = {_fmt_float(cfg.tols[name])}")
    lines.append(f"out.dir = {cfg.out_dir}")
    lines.append(f"out.plots = {1 if cfg.plots else 0}")
    return "\n".join(lines) + "\n"


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# ---------------------------------------------------------------------------
# reports


def _check_gram_quality(G, cfg):
    if G.err_est > cfg.tol("quad_gate"):
        raise BreakdownError(
            f"quadrature error estimate {G.err_est:.3e} exceeds gate "
            f"{cfg.tol('quad_gate'):g} (resolution too low for p = {G.p})")


def run_bergman(cfg: RunConfig) -> dict:
    """Density sweep: per-(s, x, p) densities and expansion fits.

    Returns a report dict with `csv_rows`, `summary` and optional plot data.
    """
    scn = cfg.scenario()
    rows = []
    fits = []
    all_pass = True
    for s0 in cfg.base_points:
        grams = {}
        for p in cfg.p_list:
            G = hilbert.gram(scn, s0, p, rule=cfg.rule(p), want_derivs=False)
            _check_gram_quality(G, cfg)
            grams[p] = G
        for x in cfg.fiber_points:
            samples = []
            for p in cfg.p_list:
                G = grams[p]
                val = bergman.bergman_diag(G, scn, x).value
                samples.append((p, val / p))
                rows.append([scn.id, _fmt_float(s0.real), _fmt_float(s0.imag),
                             x.chart, _fmt_float(x.z.real), _fmt_float(x.z.imag),
                             p, _fmt_float(val), _fmt_float(G.err_est)])
            ft = asymptotics.fit(samples, cfg.fit_k)
            entry = {
                "s": _fmt_complex(s0),
                "x": _fmt_fiber_point(x),
                "coeffs_re": [float(c.real) for c in ft.coeffs],
                "coeffs_im": [float(c.imag) for c in ft.coeffs],
                "residual": ft.residual,
                "loo_err": [float(e) for e in ft.loo_err],
                "fit_residuals": [[int(p), abs(complex(v) - ft(p))]
                                  for p, v in samples],
            }
            if not scn.twist_delta:
                j = scn.jet(s0, x)
                c0, c1 = predictions.density_coeffs(j)
                err0 = abs(ft.coeffs[0] - c0)
                err1 = abs(ft.coeffs[1] - c1) / abs(c1) if cfg.fit_k >= 1 else math.nan
                entry["predicted"] = [c0, c1]
                entry["c0_err"] = err0
                entry["c1_rel_err"] = err1
                entry["passed"] = bool(err0 <= cfg.tol("b0")
                                       and err1 <= cfg.tol("b1_rel"))
                all_pass = all_pass and entry["passed"]
            fits.append(entry)
    summary = {
        "report": "bergman",
        "config": serialize_config(cfg),
        "tolerances": {"b0": cfg.tol("b0"), "b1_rel": cfg.tol("b1_rel")},
        "fits": fits,
        "all_pass": all_pass,
    }
    return {"csv_header": BERGMAN_CSV_HEADER, "csv_rows": rows, "summary": summary}


def run_curvature(cfg: RunConfig) -> dict:
    """Curvature sweep: theta diagnostics, diagonal samples, coefficient fits."""
    scn = cfg.scenario()
    combo = (cfg.choice, cfg.kind)
    rows = []
    fits = []
    all_pass = True
    h_fd = cfg.fd_step or None
    for s0 in cfg.base_points:
        sweeps = {}
        for p in cfg.p_list:
            res = family.curvature_sweep(scn, s0, p, [combo], h_fd=h_fd,
                                         rule=cfg.rule(p),
                                         fiber_points=list(cfg.fiber_points))
            _check_gram_quality(res[combo].gram, cfg)
            sweeps[p] = res[combo]
        for ix, x in enumerate(cfg.fiber_points):
            samples = []
            for p in cfg.p_list:
                cs = sweeps[p]
                dens = bergman.bergman_diag(cs.gram, scn, x).value
                val = cs.diag[ix][1]
                samples.append((p, val / p**2))
                rows.append([scn.id, _fmt_float(s0.real), _fmt_float(s0.imag),
                             x.chart, _fmt_float(x.z.real), _fmt_float(x.z.imag),
                             p, _fmt_float(dens), _fmt_float(cs.gram.err_est),
                             cfg.kind, cfg.choice, _fmt_float(val.real),
                             _fmt_float(val.imag), _fmt_float(cs.fd_err)])
            ft = asymptotics.fit(samples, cfg.fit_k)
            j = scn.jet(s0, x)
            lead = predictions.curvature_leading(j, cfg.choice)[1]
            entry = {
                "s": _fmt_complex(s0),
                "x": _fmt_fiber_point(x),
                "coeffs_re": [float(c.real) for c in ft.coeffs],
                "coeffs_im": [float(c.imag) for c in ft.coeffs],
                "residual": ft.residual,
                "loo_err": [float(e) for e in ft.loo_err],
                "predicted_lead": [lead.real, lead.imag],
                "lead_rel_err": abs(ft.coeffs[0] - lead) / max(abs(lead), 1e-300),
                "fit_residuals": [[int(p), abs(complex(v) - ft(p))]
                                  for p, v in samples],
            }
            ok = entry["lead_rel_err"] <= cfg.tol("lead_rel")
            if cfg.choice == OMEGA_ORTHOGONAL and cfg.fit_k >= 1:
                tw = scn.twist_jet(x) if scn.twist_delta else None
                sub = predictions.curvature_subleading(j, cfg.choice, tw)
                entry["predicted_sub"] = [sub.real, sub.imag]
                entry["sub_rel_err"] = (abs(ft.coeffs[1] - sub)
                                        / max(abs(sub), 1e-300))
                ok = ok and entry["sub_rel_err"] <= cfg.tol("sub_rel")
            entry["passed"] = bool(ok)
            all_pass = all_pass and entry["passed"]
            fits.append(entry)
    summary = {
        "report": "curvature",
        "config": serialize_config(cfg),
        "tolerances": {"lead_rel": cfg.tol("lead_rel"), "sub_rel": cfg.tol("sub_rel")},
        "fits": fits,
        "all_pass": all_pass,
    }
    return {"csv_header": CURVATURE_CSV_HEADER, "csv_rows": rows, "summary": summary}


def write_report(report: dict, out_dir: str, name: str, plots: bool = False):
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{name}.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(report["csv_header"])
        writer.writerows(report["csv_rows"])
    json_path = os.path.join(out_dir, f"{name}_summary.json")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(report["summary"], fh, indent=2, sort_keys=True)
        fh.write("\n")
    written = [csv_path, json_path]
    if plots:
        written.append(_write_plot_script(report, out_dir, name))
    return written


def _write_plot_script(report: dict, out_dir: str, name: str) -> str:
    data_path = os.path.join(out_dir, f"{name}_residuals.csv")
    with open(data_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample", "p", "abs_residual"])
        for i, entry in enumerate(report["summary"]["fits"]):
            for p, r in entry["fit_residuals"]:
                writer.writerow([i, p, _fmt_float(r)])
    gp_path = os.path.join(out_dir, f"{name}_residuals.gp")
    with open(gp_path, "w", encoding="utf-8") as fh:
        fh.write(
            "set datafile separator ','\n"
            "set logscale xy\n"
            "set xlabel 'p'\n"
            "set ylabel '|fit residual|'\n"
            f"set title 'expansion fit residuals ({name})'\n"
            f"plot '{os.path.basename(data_path)}' skip 1 using 2:3 "
            "with points pt 7 title 'samples'\n")
    return gp_path


# ---------------------------------------------------------------------------
# verification driver


def run_verify(suite: str, cfg: RunConfig | None = None, stream=None,
               out_dir: str | None = None) -> int:
    """Run a verification suite and print one line per check.

    Returns the exit code of the gate contract; optionally writes the check
    table as JSON into out_dir.
    """
    stream = stream or sys.stdout
    cfg = cfg or RunConfig()
    try:
        verifier = Verifier(tols=cfg.tols)
        rows = verifier.suite(suite)
    except (ConfigError, BreakdownError, ConditioningError,
            geometry.ScenarioError, geometry.PositivityError, ValueError) as exc:
        print(f"[BREAKDOWN] {exc}", file=stream)
        return EXIT_BREAKDOWN
    for row in rows:
        print(row.line(), file=stream)
    failed = [r for r in rows if not r.passed]
    print(f"{len(rows) - len(failed)}/{len(rows)} checks passed", file=stream)
    code = EXIT_PASS if not failed else EXIT_TOLERANCE
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        payload = {
            "suite": suite,
            "exit_code": code,
            "random_jet_seed": RANDOM_JET_SEED,
            "checks": [vars(r) for r in rows],
        }
        path = os.path.join(out_dir, f"verify_{suite}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {path}", file=stream)
    return code


# ---------------------------------------------------------------------------
# command line


def _cmd_scenario_list(args) -> int:
    for sid in geometry.scenario_list():
        scn = geometry.catalog(sid)
        params = {k: v for k, v in
                  (("c", scn.c), ("eps", scn.eps), ("eta", scn.eta)) if v}
        extra = ", ".join(f"{k}={v:g}" for k, v in params.items()) or "no parameters"
        print(f"{sid:<15} {extra}; s_max = {scn.s_max:g}")
    return EXIT_PASS


def _run_and_write(kind: str, args) -> int:
    try:
        cfg = load_config(args.config)
        if args.out:
            cfg.out_dir = args.out
        report = run_bergman(cfg) if kind == "bergman" else run_curvature(cfg)
    except (ConfigError, OSError) as exc:
        print(f"[BREAKDOWN] config: {exc}", file=sys.stderr)
        return EXIT_BREAKDOWN
    except (BreakdownError, ConditioningError, geometry.PositivityError,
            geometry.ScenarioError) as exc:
        print(f"[BREAKDOWN] {exc}", file=sys.stderr)
        return EXIT_BREAKDOWN
    written = write_report(report, cfg.out_dir, kind, cfg.plots)
    for path in written:
        print(f"wrote {path}")
    ok = report["summary"]["all_pass"]
    print("all fits within tolerance" if ok else "tolerance failures present")
    return EXIT_PASS if ok else EXIT_TOLERANCE


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bergman-lab",
        description=("Family Bergman kernels on a sphere fibration: density and "
                     "direct-image curvature sweeps with closed-form gates."))
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("scenario-list", help="list catalog scenarios and defaults")

    for name, help_text in (("run-bergman", "density sweep and expansion fits"),
                            ("run-curvature", "curvature sweep and coefficient fits")):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", metavar="PATH", default=None,
                        help="flat key=value config file")
        sp.add_argument("--out", metavar="DIR", default=None,
                        help="output directory (overrides out.dir)")

    vp = sub.add_parser("verify", help="run a verification suite")
    vp.add_argument("--suite", metavar="NAME", default="all", choices=SUITES,
                    help=f"one of {', '.join(SUITES)}")
    vp.add_argument("--config", metavar="PATH", default=None,
                    help="optional config supplying tolerance overrides")
    vp.add_argument("--out", metavar="DIR", default=None,
                    help="directory for the verification summary JSON")

    args = parser.parse_args(argv)
    if args.command == "scenario-list":
        return _cmd_scenario_list(args)
    if args.command == "run-bergman":
        return _run_and_write("bergman", args)
    if args.command == "run-curvature":
        return _run_and_write("curvature", args)
    if args.command == "verify":
        try:
            cfg = load_config(args.config)
        except (ConfigError, OSError) as exc:
            print(f"[BREAKDOWN] config: {exc}", file=sys.stderr)
            return EXIT_BREAKDOWN
        return run_verify(args.suite, cfg, out_dir=args.out)
    parser.error(f"unknown command {args.command!r}")
    return EXIT_BREAKDOWN


if __name__ == "__main__":
    sys.exit(main())
