"""Command-line front end: certificates, advection runs, and optimizer reports.

Every subcommand is deterministic: identical arguments produce byte-identical
artifacts.  All files land inside the directory given by ``--out-dir`` (the
current directory by default); nothing is ever written elsewhere.

Exit codes: 0 on success, 1 for usage or I/O problems, 2 when a stability
certificate comes back as a failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields as dataclass_fields
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np

from .advection import modal_csv, operator_norm, sampled_csv
from .certify import (
    CertFailure,
    certify,
    compose_polynomial,
    rk4_family_report,
)
from .errors import NoSignChange, NotExplicit, RkstabError
from .tableaux import (
    BUILTIN_TABLEAUX,
    builtin_tableau,
    optimize_rk2_mean,
    optimize_rk2_minimax,
    rk2_mean_objective,
    rk2_minimax_objective,
    stability_polynomial,
    tableau_to_json,
)
from .timeloop import (
    SimulationConfig,
    ivp104_operator,
    matrix_exponential_reference,
    run_simulation,
)

USAGE_EXIT = 1
CERT_FAILURE_EXIT = 2


class _Parser(argparse.ArgumentParser):
    """argparse variant whose usage errors exit with code 1, not 2."""

    def error(self, message: str):  # noqa: D401 - argparse hook
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# shared helpers


def _out_dir(args) -> Path:
    path = Path(args.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _fraction(text: str, what: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"cannot parse {what} '{text}' as a rational") from exc


# ---------------------------------------------------------------------------
# certify


def _certification_target(method: str):
    """Resolve a method name to (certify callable arguments)."""
    if method in BUILTIN_TABLEAUX:
        tableau = builtin_tableau(method)
        if not tableau.is_explicit:
            raise ValueError(
                f"'{method}' is implicit; certificates cover explicit methods"
            )
        return stability_polynomial(tableau), method, None
    if method == "rk44x2":
        squared = compose_polynomial(
            stability_polynomial(builtin_tableau("rk44_classic")), 2
        )
        return squared, "rk44x2", None
    if method.startswith("rk4family:"):
        payload = method[len("rk4family:"):]
        if "," in payload:
            parts = payload.split(",")
            if len(parts) != 2:
                raise ValueError(
                    "rk4family takes exactly two coefficients, e.g. "
                    "rk4family:17/2160,7/6480"
                )
            a5 = _fraction(parts[0], "a5")
            a6 = _fraction(parts[1], "a6")
        else:
            parts = payload.split("/")
            if len(parts) == 2:
                a5 = _fraction(parts[0], "a5")
                a6 = _fraction(parts[1], "a6")
            elif len(parts) == 4:
                a5 = _fraction(f"{parts[0]}/{parts[1]}", "a5")
                a6 = _fraction(f"{parts[2]}/{parts[3]}", "a6")
            else:
                raise ValueError(
                    "ambiguous rk4family coefficients; separate them with a "
                    "comma, e.g. rk4family:17/2160,7/6480"
                )
        return None, None, (a5, a6)
    raise ValueError(
        f"unknown method '{method}'; choose a builtin explicit tableau, "
        f"'rk44x2', or 'rk4family:a5,a6'"
    )


def cmd_certify(args) -> int:
    try:
        poly, method_name, family = _certification_target(args.method)
        tol = _fraction(args.tol, "tolerance")
    except (ValueError, NotExplicit) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    try:
        if family is not None:
            outcome = rk4_family_report(family[0], family[1], mode=args.mode, tol=tol)
        else:
            outcome = certify(poly, mode=args.mode, tol=tol, method=method_name)
    except NoSignChange as exc:
        document = {"result": "unconditional", "detail": str(exc)}
        text = json.dumps(document, indent=2)
        print(text)
        if args.out_dir is not None:
            _write(_out_dir(args) / "certificate.json", text + "\n")
        return 0
    text = json.dumps(outcome.to_jsonable(), indent=2)
    print(text)
    if args.out_dir is not None:
        _write(_out_dir(args) / "certificate.json", text + "\n")
    return CERT_FAILURE_EXIT if isinstance(outcome, CertFailure) else 0


# ---------------------------------------------------------------------------
# advect


_CONFIG_INT_KEYS = {"steps", "n_elements", "degree", "sf"}
_CONFIG_FLOAT_KEYS = {"t_final", "velocity", "x_left", "x_right"}
_CONFIG_STR_KEYS = {"method", "filter_mode", "initial_condition"}
_CONFIG_KEYS = _CONFIG_INT_KEYS | _CONFIG_FLOAT_KEYS | _CONFIG_STR_KEYS


def parse_config_file(path: Path) -> Dict[str, object]:
    """Read a flat key=value file into typed simulation settings."""
    values: Dict[str, object] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got '{line}'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(
                f"{path}:{lineno}: unknown key '{key}' "
                f"(known: {', '.join(sorted(_CONFIG_KEYS))})"
            )
        if key in _CONFIG_INT_KEYS:
            values[key] = int(value)
        elif key in _CONFIG_FLOAT_KEYS:
            values[key] = float(value)
        else:
            values[key] = value
    return values


def _advect_config(args, file_values: Dict[str, object]) -> SimulationConfig:
    """Combine config-file values and CLI flags; explicit flags win."""
    settings: Dict[str, object] = dict(file_values)
    cli_values = {
        "method": args.method,
        "filter_mode": args.filter,
        "steps": args.steps,
        "t_final": args.t_final,
        "n_elements": args.elements,
        "degree": args.degree,
        "initial_condition": args.ic,
        "velocity": args.velocity,
        "sf": args.sf,
    }
    for key, value in cli_values.items():
        if value is not None:
            settings[key] = value
    return SimulationConfig(system="advection", **settings)


_PLOT_SCRIPT = '''#!/usr/bin/env python3
"""Regenerate the energy/solution figure from the CSV artifacts alongside it."""
import csv
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent


def read_columns(name):
    with open(here / name, newline="") as handle:
        rows = list(csv.DictReader(handle))
    return {key: [float(row[key]) for row in rows] for key in rows[0]}


energy = read_columns("energy.csv")
solution = read_columns("solution.csv")
reference = read_columns("reference.csv")

figure, (left, right) = plt.subplots(1, 2, figsize=(11, 4))
left.plot(energy["t"], energy["energy"], color="tab:blue")
left.set_xlabel("t")
left.set_ylabel("squared norm")
left.set_title("Energy over time")
right.plot(solution["x"], solution["u"], color="tab:blue", label="computed")
right.plot(reference["x"], reference["u"], "--", color="tab:red", label="reference")
right.set_xlabel("x")
right.set_ylabel("u")
right.set_title("Final solution")
right.legend()
figure.tight_layout()
figure.savefig(here / "figure.png", dpi=150)
print("wrote", here / "figure.png")
'''


def _run_advect_into(config: SimulationConfig, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    result = run_simulation(config)
    reference = matrix_exponential_reference(
        result.operator, result.initial_state, config.t_final
    )
    _write(directory / "energy.csv", result.trace.to_csv())
    _write(directory / "solution.csv", sampled_csv(result.final_state, result.mesh))
    _write(directory / "solution_modal.csv", modal_csv(result.final_state))
    _write(directory / "reference.csv", sampled_csv(reference, result.mesh))
    _write(directory / "plot.py", _PLOT_SCRIPT)


def cmd_advect(args) -> int:
    out_dir = _out_dir(args)
    try:
        if args.config:
            jobs = []
            for config_path in args.config:
                file_values = parse_config_file(Path(config_path))
                config = _advect_config(args, file_values)
                jobs.append((config, out_dir / Path(config_path).stem))
            if len({directory for _, directory in jobs}) != len(jobs):
                raise ValueError("config files must have distinct names")
            workers = max(1, args.jobs)
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [
                    pool.submit(_run_advect_into, config, directory)
                    for config, directory in jobs
                ]
                for future in futures:
                    future.result()
        else:
            _run_advect_into(_advect_config(args, {}), out_dir)
    except (ValueError, RkstabError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    return 0


# ---------------------------------------------------------------------------
# ivp104


def cmd_ivp104(args) -> int:
    if args.steps < 1:
        print("error: steps must be at least 1", file=sys.stderr)
        return USAGE_EXIT
    config = SimulationConfig(
        method="ssprk104",
        filter_mode="none",
        steps=args.steps,
        t_final=1000.0,
        system="ivp104",
    )
    result = run_simulation(config)
    dt = config.t_final / config.steps
    scaled_step = dt * operator_norm(ivp104_operator())
    max_energy = float(np.max(result.trace.energies))
    print(f"steps = {args.steps}")
    print(f"dt * operator norm = {scaled_step!r}")
    print(f"max energy = {max_energy!r}")
    if args.out_dir is not None:
        _write(_out_dir(args) / "energy.csv", result.trace.to_csv())
    return 0


# ---------------------------------------------------------------------------
# optimize-rk2


def _objective_csv(objective) -> str:
    lines = ["b2,objective"]
    step = Fraction(1, 1000)
    b2 = Fraction(1, 10)
    while b2 <= 2:
        lines.append(f"{float(b2)!r},{float(objective(b2))!r}")
        b2 += step
    return "\n".join(lines) + "\n"


def cmd_optimize_rk2(args) -> int:
    mean = optimize_rk2_mean()
    minimax = optimize_rk2_minimax()
    print(f"mean optimizer: b2 = {mean} ({float(mean)!r})")
    print(f"minimax optimizer: b2 = {minimax} ({float(minimax)!r})")
    if args.out_dir is not None:
        directory = _out_dir(args)
        _write(directory / "mean_objective.csv", _objective_csv(rk2_mean_objective))
        _write(
            directory / "minimax_objective.csv",
            _objective_csv(rk2_minimax_objective),
        )
    return 0


# ---------------------------------------------------------------------------
# tableaux


def cmd_tableaux(args) -> int:
    document = [
        json.loads(tableau_to_json(BUILTIN_TABLEAUX[name]))
        for name in BUILTIN_TABLEAUX
    ]
    text = json.dumps(document, indent=2)
    print(text)
    if args.out_dir is not None:
        _write(_out_dir(args) / "tableaux.json", text + "\n")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> _Parser:
    parser = _Parser(
        prog="rkstab",
        description=(
            "Energy-stability certificates for explicit Runge-Kutta methods "
            "and filtered advection experiments."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    cert = sub.add_parser(
        "certify", help="certify strong stability of an explicit method"
    )
    cert.add_argument(
        "method",
        help=(
            "builtin explicit tableau, 'rk44x2' (two composed classical RK4 "
            "steps), or 'rk4family:a5,a6'"
        ),
    )
    cert.add_argument("--mode", choices=("general", "skew"), default="general")
    cert.add_argument("--tol", default="1e-6", help="root isolation width")
    cert.add_argument("--out-dir", default=None, help="also write certificate.json")
    cert.set_defaults(func=cmd_certify)

    advect = sub.add_parser("advect", help="run a filtered advection experiment")
    advect.add_argument("--method", default=None, help="tableau or implicit_euler")
    advect.add_argument(
        "--filter",
        default=None,
        choices=("none", "filter", "project", "mimic_implicit"),
        help="per-step energy repair strategy",
    )
    advect.add_argument("--ic", default=None, choices=("gaussian", "box", "sine"))
    advect.add_argument("--elements", type=int, default=None, help="element count")
    advect.add_argument("--degree", type=int, default=None, help="polynomial degree")
    advect.add_argument("--steps", type=int, default=None)
    advect.add_argument("--t-final", type=float, default=None)
    advect.add_argument("--velocity", type=float, default=None)
    advect.add_argument("--sf", type=int, default=None, help="filter exponent")
    advect.add_argument(
        "--config",
        action="append",
        default=None,
        help="key=value file; repeat to fan out multiple runs into subdirectories",
    )
    advect.add_argument("--jobs", type=int, default=1, help="worker threads")
    advect.add_argument("--out-dir", default=".")
    advect.set_defaults(func=cmd_advect)

    ivp = sub.add_parser(
        "ivp104", help="ten-stage method on the 3x3 skew test system over [0,1000]"
    )
    ivp.add_argument("--steps", type=int, default=204)
    ivp.add_argument("--out-dir", default=None, help="also write energy.csv")
    ivp.set_defaults(func=cmd_ivp104)

    opt = sub.add_parser(
        "optimize-rk2", help="optimal second-order two-stage method"
    )
    opt.add_argument("--out-dir", default=None, help="also write objective curves")
    opt.set_defaults(func=cmd_optimize_rk2)

    tab = sub.add_parser("tableaux", help="list builtin tableaux as JSON")
    tab.add_argument("--out-dir", default=None, help="also write tableaux.json")
    tab.set_defaults(func=cmd_tableaux)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT


if __name__ == "__main__":
    raise SystemExit(main())
