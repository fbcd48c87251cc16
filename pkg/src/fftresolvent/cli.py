"""Command-line front end: ``fftresolvent {solve,rates,bounds,oracle,funcalc}``.

Exit status is 0 on success, 2 when a solve fails to converge or diverges,
and 1 for invalid input.  Nothing is written when the input is invalid.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from .grid import Field, GridGeometry, constant, field_norm, random_field, read_field, write_field
from .media import (
    TwoPhaseMedium,
    apply_A,
    apply_L,
    make_checkerboard,
    make_disk,
    make_homogeneous,
    make_laminate,
    make_random,
    make_tiled,
    read_indicator,
)
from .rates import contour_atlas, write_atlas_csv
from .schemes import (
    DivergenceError,
    NonConvergenceError,
    SchemeKind,
    SolveConfig,
    function_of_operator,
    polynomial,
    project,
    solve,
    write_report_json,
    write_residual_csv,
)
from .spectral import (
    MAX_DENSE_SIZE,
    Provenance,
    SpectralBounds,
    dense_assemble,
    dense_bounds,
    dense_spectrum,
    dense_two_phase_resolvent,
    power_method_extremes,
    write_eigenvalues_csv,
)

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 1, 2

_COMPLEX = {
    "type": "array",
    "items": {"type": "number"},
    "minItems": 2,
    "maxItems": 2,
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["geometry", "microstructure", "z1", "z2"],
    "properties": {
        "geometry": {
            "type": "array",
            "items": {"type": "integer", "minimum": 2},
            "minItems": 1,
            "maxItems": 3,
        },
        "microstructure": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type"],
            "properties": {
                "type": {
                    "enum": ["laminate", "random", "disk", "checkerboard", "homogeneous", "tiled", "file"]
                },
                "normal_axis": {"type": "integer", "minimum": 0},
                "f1": {"type": "number", "minimum": 0, "maximum": 1},
                "seed": {"type": "integer"},
                "radius_fraction": {"type": "number"},
                "blocks": {"type": "integer"},
                "phase": {"enum": [1, 2]},
                "pattern": {"type": "array"},
                "path": {"type": "string"},
            },
        },
        "z1": _COMPLEX,
        "z2": _COMPLEX,
        "scheme": {"enum": [k.value for k in SchemeKind]},
        "shift": {"type": "number"},
        "bounds": {
            "type": "object",
            "additionalProperties": False,
            "required": ["mode"],
            "properties": {
                "mode": {"enum": ["exact", "power", "manual", "none"]},
                "a_minus": {"type": "number"},
                "a_plus": {"type": "number"},
                "iterations": {"type": "integer", "minimum": 1},
            },
        },
        "tolerance": {"type": "number", "exclusiveMinimum": 0},
        "max_iter": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "source": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type"],
            "properties": {
                "type": {"enum": ["uniform", "random", "file"]},
                "axis": {"type": "integer", "minimum": 0},
                "path": {"type": "string"},
            },
        },
    },
}


class InvalidInput(Exception):
    pass


# -- configuration ------------------------------------------------------------


def load_config(path: str, seed: int | None = None) -> dict:
    try:
        config = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InvalidInput(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"config {path} is not valid JSON: {exc}") from None
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for err in errors:
            where = "/".join(str(p) for p in err.absolute_path) or "<root>"
            lines.append(f"{where}: {err.message}")
        raise InvalidInput("invalid config:\n  " + "\n  ".join(lines))
    if seed is not None:
        config = dict(config, seed=seed)
    return config


def _complex(pair) -> complex:
    return complex(pair[0], pair[1])


def _relative(base: str, path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else Path(base).parent / p


def build_medium(config: dict, config_path: str = ".") -> TwoPhaseMedium:
    geometry = GridGeometry(tuple(config["geometry"]))
    micro = config["microstructure"]
    z1, z2 = _complex(config["z1"]), _complex(config["z2"])
    kind = micro["type"]
    if kind == "laminate":
        return make_laminate(geometry, micro.get("normal_axis", 0), micro.get("f1", 0.5), z1, z2)
    if kind == "random":
        seed = micro.get("seed", config.get("seed", 0))
        return make_random(geometry, micro.get("f1", 0.5), seed, z1, z2)
    if kind == "disk":
        return make_disk(geometry, micro.get("radius_fraction", 0.25), z1, z2)
    if kind == "checkerboard":
        return make_checkerboard(geometry, micro.get("blocks", 2), z1, z2)
    if kind == "homogeneous":
        return make_homogeneous(geometry, micro.get("phase", 2), z1, z2)
    if kind == "tiled":
        if "pattern" not in micro:
            raise InvalidInput("microstructure/pattern: required for tiled media")
        return make_tiled(geometry, micro["pattern"], z1, z2)
    if "path" not in micro:
        raise InvalidInput("microstructure/path: required for file media")
    medium = read_indicator(_relative(config_path, micro["path"]), z1, z2)
    if medium.geometry != geometry:
        raise InvalidInput(
            f"microstructure file grid {medium.geometry.cells} differs from geometry {geometry.cells}"
        )
    return medium


def build_source(config: dict, medium: TwoPhaseMedium, config_path: str = ".") -> Field:
    """Uniform sources drive the medium with a unit applied field along ``axis``."""
    source = config.get("source", {"type": "uniform", "axis": 0})
    geometry = medium.geometry
    if source["type"] == "uniform":
        axis = source.get("axis", 0)
        if axis >= geometry.dim:
            raise InvalidInput(f"source/axis: {axis} out of range for a {geometry.dim}D grid")
        applied = constant(geometry, np.eye(geometry.dim)[axis])
        return -project(apply_L(medium, applied))
    if source["type"] == "random":
        rng = np.random.default_rng(config.get("seed", 0))
        return project(random_field(geometry, geometry.dim, rng))
    if "path" not in source:
        raise InvalidInput("source/path: required for file sources")
    field = read_field(_relative(config_path, source["path"]))
    if field.geometry != geometry or field.components != geometry.dim:
        raise InvalidInput("source file does not match the configured grid")
    return project(field)


def build_bounds(config: dict, medium: TwoPhaseMedium) -> SpectralBounds | None:
    scheme = config.get("scheme", SchemeKind.EYRE_MILTON.value)
    default = "power" if scheme == SchemeKind.SPECTRAL.value else "none"
    entry = config.get("bounds", {"mode": default})
    mode = entry["mode"]
    if mode == "none":
        return None
    if mode == "manual":
        if "a_minus" not in entry or "a_plus" not in entry:
            raise InvalidInput("bounds: manual mode needs a_minus and a_plus")
        return SpectralBounds(entry["a_minus"], entry["a_plus"], Provenance.MANUAL)
    if mode == "exact":
        return dense_bounds(dense_assemble(medium))
    return power_method_extremes(medium, entry.get("iterations", 500), config.get("seed", 0))


def build_solve_config(config: dict, medium: TwoPhaseMedium) -> SolveConfig:
    return SolveConfig(
        medium,
        config.get("scheme", SchemeKind.EYRE_MILTON.value),
        config.get("tolerance", 1e-10),
        config.get("max_iter", 1000),
        build_bounds(config, medium),
        config.get("shift", 0.5),
    )


def _bounds_dict(bounds: SpectralBounds | None):
    if bounds is None:
        return None
    return {
        "a_minus": bounds.a_minus,
        "a_plus": bounds.a_plus,
        "provenance": bounds.provenance.value,
        "iterations_used": bounds.iterations_used,
    }


def _pair(z: complex) -> list[float]:
    return [z.real, z.imag]


# -- commands -----------------------------------------------------------------


def cmd_solve(args) -> int:
    config = load_config(args.config, args.seed)
    medium = build_medium(config, args.config)
    source = build_source(config, medium, args.config)
    cfg = build_solve_config(config, medium)
    diverged = None
    try:
        x, report = solve(cfg, source)
    except DivergenceError as exc:
        diverged = exc
    parameters = {
        "z1": _pair(medium.z1),
        "z2": _pair(medium.z2),
        "contrast": _pair(medium.contrast),
        "tolerance": cfg.tolerance,
        "max_iter": cfg.max_iter,
        "shift": cfg.shift,
        "bounds": _bounds_dict(cfg.bounds),
    }
    if diverged is not None:
        document = {
            "scheme": cfg.scheme.value,
            "parameters": parameters,
            "iterations": diverged.iteration,
            "measured_rate": None,
            "theoretical_rate": None,
            "converged": False,
            "diverged": True,
            "message": str(diverged),
            "config": config,
        }
        write_report_json(args.out, document)
        return EXIT_NOT_CONVERGED
    document = {"scheme": cfg.scheme.value, "parameters": parameters}
    body = report.to_dict()
    del body["scheme"]
    document.update(body)
    document["source_norm"] = field_norm(source)
    document["solution_norm"] = field_norm(x)
    document["final_residual"] = report.residual_history[-1]
    document["config"] = config
    write_report_json(args.out, document)
    if args.residuals:
        write_residual_csv(args.residuals, report)
    if args.field:
        write_field(args.field, x)
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def _parse_window(text: str) -> tuple[float, float, float, float]:
    parts = text.split(",")
    if len(parts) != 4:
        raise InvalidInput(f"--window needs RE0,RE1,IM0,IM1, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise InvalidInput(f"--window values must be numbers, got {text!r}") from None


def cmd_rates(args) -> int:
    window = _parse_window(args.window)
    estimated = None
    if args.estimated:
        try:
            estimated = tuple(float(p) for p in args.estimated.split(","))
        except ValueError:
            raise InvalidInput("--estimated needs D_L,D_R") from None
        if len(estimated) != 2:
            raise InvalidInput("--estimated needs D_L,D_R")
    atlas = contour_atlas(args.alpha, args.beta, window, args.resolution, estimated)
    write_atlas_csv(args.out, atlas)
    return EXIT_OK


def cmd_bounds(args) -> int:
    config = load_config(args.config, args.seed)
    medium = build_medium(config, args.config)
    iterations = config.get("bounds", {}).get("iterations", 500)
    estimate = power_method_extremes(medium, iterations, config.get("seed", 0))
    document = {"power_method": _bounds_dict(estimate), "exact_dense": None}
    values = None
    if medium.geometry.dim * medium.geometry.size <= MAX_DENSE_SIZE:
        op = dense_assemble(medium)
        values = dense_spectrum(op)
        document["exact_dense"] = _bounds_dict(dense_bounds(op))
    elif args.eigenvalues:
        raise InvalidInput(f"--eigenvalues needs a grid with d*N <= {MAX_DENSE_SIZE}")
    write_report_json(args.out, document)
    if args.eigenvalues:
        write_eigenvalues_csv(args.eigenvalues, values)
    return EXIT_OK


def cmd_oracle(args) -> int:
    config = load_config(args.config, args.seed)
    medium = build_medium(config, args.config)
    size = medium.geometry.dim * medium.geometry.size
    if size > MAX_DENSE_SIZE:
        raise InvalidInput(f"oracle grid has d*N = {size}, above the dense limit {MAX_DENSE_SIZE}")
    source = build_source(config, medium, args.config)
    cfg = build_solve_config(config, medium)
    op = dense_assemble(medium)
    reference = dense_two_phase_resolvent(op, medium.z1, medium.z2, source)
    try:
        x, report = solve(cfg, source)
    except DivergenceError as exc:
        write_report_json(args.out, {"scheme": cfg.scheme.value, "converged": False, "message": str(exc)})
        return EXIT_NOT_CONVERGED
    scale = field_norm(reference) or 1.0
    peak = np.abs(reference.values).max() or 1.0
    deviation = float(np.abs(x.values - reference.values).max() / peak)
    document = {
        "scheme": cfg.scheme.value,
        "iterations": report.iterations,
        "converged": report.converged,
        "max_relative_deviation": deviation,
        "relative_error_norm": field_norm(x - reference) / scale,
        "config": config,
    }
    write_report_json(args.out, document)
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def parse_function(text: str) -> list[complex]:
    kind, _, body = text.partition(":")
    if kind != "poly" or not body:
        raise InvalidInput(f"--function must look like poly:c0,c1,..., got {text!r}")
    try:
        return [complex(c.strip()) for c in body.split(",")]
    except ValueError:
        raise InvalidInput(f"--function coefficients must be numbers, got {body!r}") from None


def cmd_funcalc(args) -> int:
    coefficients = parse_function(args.function)
    config = load_config(args.config, args.seed)
    medium = build_medium(config, args.config)
    source = build_source(config, medium, args.config)
    bounds = build_bounds(dict(config, scheme="eyre_milton"), medium)
    try:
        result = function_of_operator(medium, polynomial(coefficients), source, bounds=bounds)
    except (NonConvergenceError, DivergenceError) as exc:
        write_report_json(args.out, {"function": args.function, "converged": False, "message": str(exc)})
        return EXIT_NOT_CONVERGED
    # direct evaluation by Horner's rule on the operator
    direct = source * 0
    for c in reversed(coefficients):
        direct = apply_A(medium, direct) + c * source
    scale = field_norm(direct) or 1.0
    document = {
        "function": args.function,
        "nodes": 64,
        "source_norm": field_norm(source),
        "result_norm": field_norm(result),
        "direct_norm": field_norm(direct),
        "relative_deviation": field_norm(result - direct) / scale,
        "config": config,
    }
    write_report_json(args.out, document)
    return EXIT_OK


# -- entry point ----------------------------------------------------------------


def _float_or_inf(text: str) -> float:
    value = float(text)
    if math.isnan(value):
        raise argparse.ArgumentTypeError("nan is not an admissible interval endpoint")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fftresolvent", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one scheme and write its report")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="JSON report")
    p.add_argument("--residuals", help="residual CSV log")
    p.add_argument("--field", help="write the solution field here")
    p.add_argument("--seed", type=int)
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("rates", help="tabulate convergence rates over the contrast plane")
    p.add_argument("--alpha", type=_float_or_inf, required=True)
    p.add_argument("--beta", type=_float_or_inf, required=True, help="'inf' is accepted")
    p.add_argument("--window", default="-4,4,-4,4")
    p.add_argument("--resolution", type=int, default=81)
    p.add_argument("--estimated", help="relative bound slacks D_L,D_R")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_rates)

    p = sub.add_parser("bounds", help="estimate spectral bounds of A")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--eigenvalues", help="dense eigenvalue CSV")
    p.add_argument("--seed", type=int)
    p.set_defaults(handler=cmd_bounds)

    p = sub.add_parser("oracle", help="compare a scheme with the dense direct solve")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(handler=cmd_oracle)

    p = sub.add_parser("funcalc", help="apply a polynomial of A by contour quadrature")
    p.add_argument("--config", required=True)
    p.add_argument("--function", required=True, help="poly:c0,c1,...")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(handler=cmd_funcalc)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (ValueError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
