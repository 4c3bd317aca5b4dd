# SPDX-License-Identifier: MIT
# Copyright 2025 The nhbp authors

"""
The nhbp command line

    nhbp spectrum       OBC spectrum with edge/bulk labels
    nhbp gbz            GBZ contour and ν_tot
    nhbp invariants     Closed-form and numeric invariants at one point
    nhbp sweep          |E|, P and ν_tot along a parameter sweep
    nhbp phase-diagram  (γ, t1) phase diagrams of the x-OBC Chern model
    nhbp reproduce NAME Run a shipped figure recipe

A run is configured by an optional INI file (--config) with [run],
[model], [numeric] and [output] sections, overridden by flags. Every key
is declared once in CONFIG_SCHEMA, which drives parsing, validation,
defaults, the --help text and the flags themselves.

The effective config is written next to the outputs, so any run can be
repeated with --config.

Exit status is 0 on success, 2 for invalid input and 3 for a numerical
failure, whose diagnostics are printed to stderr as JSON.
"""

import argparse
import configparser
import json
import math
import os
import sys
import time

from collections import namedtuple

import numpy as np

from nhbp import (
    MSG_DEBUG,
    MSG_FATAL,
    MSG_INFO,
    MSG_SEVERITY_NAMES,
    MSG_WARNING,
    MODEL_KEYS,
    VARIANT_CHERN_X_OBC,
    VARIANT_SSH_1D,
    VARIANTS,
    ModelError,
    ModelSpec,
    NumericalError,
    SingularConditionError,
    __version__,
    add_message_handler,
    is_two_d,
    model_spec_from_mapping,
    model_spec_to_mapping,
    post_message,
    remove_message_handler,
)
from nhbp_gbz import contour_radius, gbz_contour, non_bloch_winding, write_contour_csv
from nhbp_invariants import (
    analytic_bp,
    edge_localization,
    edge_ratios,
    expected_edge_energy,
    gbz_radius,
    obc_gap_closings,
    pbc_ep_locations,
    pbc_loop_vorticity,
)
from nhbp_realspace import (
    TERMINATION_BROKEN_CELL,
    TERMINATIONS,
    biorthogonal_polarization,
    biorthogonal_spectrum,
    build_obc,
    classify_modes,
    select_edge_modes,
    spectrum_to_json,
    write_spectrum_csv,
)
from nhbp_recipes import recipe_names, recipe_text
from nhbp_sweeps import (
    PHASE_OBC,
    PHASE_PBC,
    SWEEP_PARAMETERS,
    SweepAxis,
    SweepSettings,
    find_jumps,
    phase_diagram_obc,
    phase_diagram_pbc,
    plot_phase_diagram,
    plot_sweep,
    sweep,
    sweep_manifest_payload,
    write_manifest,
    write_phase_diagram_csv,
    write_sweep_csv,
)

__all__ = [
    "COMMANDS",
    "FORMATS",
    "CONFIG_SECTIONS",
    "ConfigKey",
    "CONFIG_SCHEMA",
    "RunConfig",
    "ConfigError",
    "read_config_text",
    "read_config_file",
    "build_run_config",
    "run_config_to_ini",
    "run",
    "main",
]

COMMAND_SPECTRUM = "spectrum"
COMMAND_GBZ = "gbz"
COMMAND_INVARIANTS = "invariants"
COMMAND_SWEEP = "sweep"
COMMAND_PHASE_DIAGRAM = "phase-diagram"
COMMAND_REPRODUCE = "reproduce"

COMMANDS = (
    COMMAND_SPECTRUM,
    COMMAND_GBZ,
    COMMAND_INVARIANTS,
    COMMAND_SWEEP,
    COMMAND_PHASE_DIAGRAM,
    COMMAND_REPRODUCE,
)

DIAGRAM_BOTH = "both"
DIAGRAMS = (PHASE_PBC, PHASE_OBC, DIAGRAM_BOTH)

FORMAT_CSV = "csv"
FORMAT_JSON = "json"
FORMAT_SVG = "svg"
FORMATS = (FORMAT_CSV, FORMAT_JSON, FORMAT_SVG)

CONFIG_SECTIONS = ("run", "model", "numeric", "output")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


#
# Value parsers. Each takes the raw string and returns the value or
# raises ValueError.
#


def _text(raw: str) -> str:
    return raw.strip()


def _choice(*options):
    def parse(raw: str) -> str:
        value = raw.strip()
        if value not in options:
            raise ValueError(f"'{value}' is not one of {', '.join(options)}")
        return value

    return parse


def _real(raw: str) -> float:
    value = float(raw)
    if not math.isfinite(value):
        raise ValueError(f"{value} is not finite")
    return value


def _positive(raw: str) -> float:
    value = _real(raw)
    if not value > 0:
        raise ValueError(f"{value} is not positive")
    return value


def _fraction(raw: str) -> float:
    value = _real(raw)
    if not 0 < value < 1:
        raise ValueError(f"{value} is not in (0, 1)")
    return value


def _optional_real(raw: str) -> float | None:
    if raw.strip().lower() in ("", "none"):
        return None
    return _real(raw)


def _count(minimum: int):
    def parse(raw: str) -> int:
        value = int(raw)
        if value < minimum:
            raise ValueError(f"{value} is below {minimum}")
        return value

    return parse


def _boolean(raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("1", "yes", "true", "on"):
        return True
    if value in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"'{raw}' is not a boolean")


def _optional_pair(raw: str) -> tuple | None:
    if raw.strip().lower() in ("", "none"):
        return None
    parts = [part for part in raw.replace(",", " ").split() if part]
    if len(parts) != 2:
        raise ValueError(f"'{raw}' is not a pair of reals")
    return (_real(parts[0]), _real(parts[1]))


def _formats(raw: str) -> tuple:
    values = tuple(v.strip() for v in raw.split(",") if v.strip())
    unknown = [v for v in values if v not in FORMATS]
    if unknown:
        raise ValueError(f"unknown formats {', '.join(unknown)}, expected {', '.join(FORMATS)}")
    return values


ConfigKey = namedtuple("ConfigKey", ("section", "name", "parse", "default", "help"))

CONFIG_SCHEMA = (
    ConfigKey("run", "command", _choice(*COMMANDS), COMMAND_SPECTRUM, "The computation to run."),
    ConfigKey("run", "recipe", _text, "", f"Figure recipe: {', '.join(recipe_names())}."),
    ConfigKey("run", "diagram", _choice(*DIAGRAMS), DIAGRAM_BOTH, "Phase diagrams to compute."),
    ConfigKey("model", "variant", _choice(*VARIANTS), VARIANT_SSH_1D, "Model variant."),
    ConfigKey("model", "t1", _real, "1.0", "Intra-cell hopping t1."),
    ConfigKey("model", "t2", _real, "1.0", "Inter-cell hopping t2 (SSH)."),
    ConfigKey("model", "t3", _real, "0.0", "Longer-ranged hopping t3."),
    ConfigKey("model", "gamma", _real, "0.0", "Non-reciprocity γ."),
    ConfigKey("model", "delta_onsite", _real, "0.0", "Staggered onsite potential Δ."),
    ConfigKey("model", "delta_stagger", _real, "0.0", "Inter-chain coupling δ (2d)."),
    ConfigKey("numeric", "n_cells", _count(2), "20", "Unit cells of the OBC chain."),
    ConfigKey("numeric", "n_p", _count(2), "100", "Unit cells used for P in sweeps."),
    ConfigKey("numeric", "n_phi", _count(64), "512", "φ-grid size for the GBZ."),
    ConfigKey("numeric", "n_pbc", _count(2), "512", "Momenta for the PBC bands."),
    ConfigKey(
        "numeric", "transverse_k", _optional_real, "none", "Fixed periodic momentum (2d)."
    ),
    ConfigKey(
        "numeric", "termination", _choice(*TERMINATIONS), TERMINATION_BROKEN_CELL, "OBC ends."
    ),
    ConfigKey("numeric", "window_cells", _count(0), "0", "Edge window, 0 for max(3, N/20)."),
    ConfigKey("numeric", "threshold", _fraction, "0.5", "Boundary weight for an edge mode."),
    ConfigKey("numeric", "ep_tolerance", _positive, "0.01", "|E_PBC| flagged as an EP."),
    ConfigKey("numeric", "admission_tolerance", _positive, "1e-06", "GBZ admission tolerance."),
    ConfigKey("numeric", "biorthogonal", _boolean, "true", "Biorthogonal ν_tot."),
    ConfigKey(
        "numeric", "sweep_parameter", _choice(*SWEEP_PARAMETERS), "t1", "Swept parameter."
    ),
    ConfigKey("numeric", "sweep_start", _real, "0.05", "Sweep start."),
    ConfigKey("numeric", "sweep_stop", _real, "3.0", "Sweep stop."),
    ConfigKey("numeric", "sweep_points", _count(2), "61", "Sweep grid points."),
    ConfigKey("numeric", "gamma_start", _real, "0.05", "Phase diagram γ start."),
    ConfigKey("numeric", "gamma_stop", _real, "6.0", "Phase diagram γ stop."),
    ConfigKey("numeric", "gamma_points", _count(1), "64", "Phase diagram γ points."),
    ConfigKey("numeric", "t1_start", _real, "0.05", "Phase diagram t1 start."),
    ConfigKey("numeric", "t1_stop", _real, "3.0", "Phase diagram t1 stop."),
    ConfigKey("numeric", "t1_points", _count(1), "64", "Phase diagram t1 points."),
    ConfigKey("numeric", "n_checks", _count(0), "100", "Cells cross-checked by scan."),
    ConfigKey("numeric", "n_ky", _count(4), "4096", "ky grid of the brute-force scan."),
    ConfigKey("numeric", "seed", _count(0), "0", "Seed for the cross-check subsample."),
    ConfigKey(
        "numeric",
        "loop_center",
        _optional_pair,
        "none",
        "Vorticity loop centre: re, im of k (SSH) or kx, ky (2d).",
    ),
    ConfigKey("numeric", "loop_radius", _positive, "0.1", "Vorticity loop radius."),
    ConfigKey("numeric", "loop_samples", _count(64), "256", "Initial vorticity loop samples."),
    ConfigKey("numeric", "workers", _count(0), "0", "Sweep and phase-diagram workers, 0 for all CPUs."),
    ConfigKey("output", "out_dir", _text, ".", "Output directory."),
    ConfigKey("output", "formats", _formats, "csv, json, svg", "Outputs to write."),
    ConfigKey("output", "prefix", _text, "", "Output file prefix, defaults to the recipe."),
)

_SCHEMA_BY_NAME = {key.name: key for key in CONFIG_SCHEMA}

RunConfig = namedtuple("RunConfig", tuple(key.name for key in CONFIG_SCHEMA))
RunConfig.__doc__ = "A parsed, validated run. Fields are the CONFIG_SCHEMA keys."


#
# Reading
#


def _sections_to_raw(parser: configparser.ConfigParser, source: str) -> dict:
    problems = []
    raw = {}
    for section in parser.sections():
        if section not in CONFIG_SECTIONS:
            problems.append(f"unknown section [{section}]")
            continue
        for name, value in parser.items(section):
            key = _SCHEMA_BY_NAME.get(name)
            if key is None or key.section != section:
                problems.append(f"unknown key '{name}' in [{section}]")
                continue
            raw[name] = value
    if problems:
        raise ConfigError(f"Invalid config {source}: " + "; ".join(problems))
    return raw


def read_config_text(text: str, source: str = "<text>") -> dict:
    """
    Reads INI text into a dict of raw string values keyed by schema name.

    :raises ConfigError: For unknown sections or keys, or bad syntax.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"Unable to parse {source}: {e}") from e
    return _sections_to_raw(parser, source)


def read_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"Unable to read config '{path}': {e}") from e
    return read_config_text(text, str(path))


def _with_recipe(raw: dict) -> dict:
    """
    Layers a reproduce request over its recipe. The recipe supplies the
    command, values given explicitly win.
    """
    if raw.get("command", "").strip() != COMMAND_REPRODUCE:
        return raw
    name = raw.get("recipe", "").strip()
    if not name:
        raise ConfigError("reproduce needs a recipe name")
    layered = read_config_text(recipe_text(name), f"recipe {name}")
    layered.update({k: v for k, v in raw.items() if k != "command"})
    layered["recipe"] = name
    return layered


def build_run_config(raw: dict) -> RunConfig:
    """
    Parses and validates raw values over the schema defaults.

    :raises ConfigError: Listing every bad field.
    :raises ModelError: For an invalid model.
    """
    raw = _with_recipe(raw)
    problems = []
    values = {}
    for key in CONFIG_SCHEMA:
        text = raw.get(key.name, key.default)
        try:
            values[key.name] = key.parse(str(text))
        except ValueError as e:
            problems.append(f"{key.name}: {e}")

    if problems:
        raise ConfigError("Invalid config: " + "; ".join(problems))

    config = RunConfig(**values)
    spec = model_spec_from_mapping({name: getattr(config, name) for name in MODEL_KEYS})

    if config.sweep_start >= config.sweep_stop:
        problems.append("sweep_start must be below sweep_stop")
    if config.gamma_start > config.gamma_stop:
        problems.append("gamma_start must not exceed gamma_stop")
    if config.t1_start > config.t1_stop:
        problems.append("t1_start must not exceed t1_stop")
    sweeps_transverse = (
        config.command == COMMAND_SWEEP and config.sweep_parameter == "transverse_k"
    )
    if is_two_d(spec) and config.transverse_k is None and not sweeps_transverse:
        if config.command != COMMAND_PHASE_DIAGRAM:
            problems.append(f"transverse_k must be set for {spec.variant}")
    if config.command == COMMAND_PHASE_DIAGRAM and spec.variant != VARIANT_CHERN_X_OBC:
        problems.append(f"phase diagrams need variant {VARIANT_CHERN_X_OBC}")

    if problems:
        raise ConfigError("Invalid config: " + "; ".join(problems))
    return config


def run_config_to_ini(config: RunConfig) -> str:
    """The config as INI text that rebuilds it when read back."""
    parser = configparser.ConfigParser(interpolation=None)
    for section in CONFIG_SECTIONS:
        parser.add_section(section)
    for key in CONFIG_SCHEMA:
        value = getattr(config, key.name)
        if value is None:
            text = "none"
        elif isinstance(value, tuple):
            text = ", ".join(str(v) if isinstance(v, str) else repr(v) for v in value)
        elif isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        parser.set(key.section, key.name, text)

    lines = []
    for section in CONFIG_SECTIONS:
        lines.append(f"[{section}]")
        lines.extend(f"{name} = {value}" for name, value in parser.items(section))
        lines.append("")
    return "\n".join(lines)


#
# Commands
#


def _model(config: RunConfig) -> ModelSpec:
    return model_spec_from_mapping({name: getattr(config, name) for name in MODEL_KEYS})


def _prefix(config: RunConfig) -> str:
    return config.prefix or config.recipe or config.command


def _output_dir(config: RunConfig) -> str:
    try:
        os.makedirs(config.out_dir, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"Unable to create out_dir '{config.out_dir}': {e}") from e
    if not os.access(config.out_dir, os.W_OK):
        raise ConfigError(f"out_dir '{config.out_dir}' is not writable")
    return config.out_dir


def _summary(name: str, value):
    print(f"{name}: {value}")


def _format_complex(value: complex) -> str:
    return f"{value.real:+.10f}{value.imag:+.10f}j"


def _gauge_radius(spec: ModelSpec, config: RunConfig) -> float | None:
    if spec.t3 == 0:
        return None
    try:
        return contour_radius(
            gbz_contour(spec, config.transverse_k, config.n_phi, config.admission_tolerance)
        )
    except NumericalError as e:
        post_message(f"No gauge radius, the GBZ failed: {e}", MSG_WARNING)
        return None


def _run_spectrum(config: RunConfig, spec: ModelSpec, outputs: list) -> dict:
    hamiltonian = build_obc(spec, config.n_cells, config.transverse_k, config.termination)
    spectrum = biorthogonal_spectrum(hamiltonian, _gauge_radius(spec, config))
    labels = classify_modes(spectrum, config.window_cells or None, config.threshold)

    for i, (energy, label) in enumerate(zip(spectrum.eigenvalues, labels)):
        print(f"E[{i}] = {_format_complex(energy)}  {label.kind}  {label.boundary_weight:.4f}")
    _summary("pairing residual", f"{spectrum.pairing_residual:.3g}")

    expected = expected_edge_energy(spec, config.transverse_k)
    selected = select_edge_modes(spectrum, labels, expected)
    polarization = biorthogonal_polarization(spectrum, selected, config.n_cells)
    _summary("P", f"{polarization:.6f}")

    if FORMAT_CSV in config.formats:
        path = os.path.join(config.out_dir, f"{_prefix(config)}_spectrum.csv")
        write_spectrum_csv(path, spectrum, labels)
        outputs.append(path)
    result = spectrum_to_json(spectrum, labels)
    result["polarization"] = polarization
    return result


def _closed_form_radius(config: RunConfig, spec: ModelSpec) -> float | None:
    if spec.t3 != 0:
        return None
    try:
        return gbz_radius(spec, config.transverse_k)
    except (ModelError, NumericalError):
        # y-OBC variants and singular radii have no closed form
        return None


def _run_gbz(config: RunConfig, spec: ModelSpec, outputs: list) -> dict:
    contour = gbz_contour(spec, config.transverse_k, config.n_phi, config.admission_tolerance)
    radii = np.abs(contour.betas)
    deviation = float(np.max(np.abs(radii - 1)))
    _summary("GBZ points", len(contour.betas))
    _summary("closure gap", f"{contour.closure_gap:.3g}")
    _summary("mean |β|", f"{radii.mean():.10f}")
    _summary("max |β| deviation from 1", f"{deviation:.3g}")
    radius = _closed_form_radius(config, spec)
    radius_deviation = None
    if radius is not None:
        radius_deviation = float(np.max(np.abs(radii - radius)))
        _summary("Γ", f"{radius:.10f}")
        _summary("max |β| deviation from Γ", f"{radius_deviation:.3g}")

    winding = non_bloch_winding(spec, contour, config.transverse_k, config.biorthogonal)
    _summary("ν_tot", f"{winding.nu_total:.6f}")
    _summary("Im ν_tot", f"{winding.nu_imag:.6f}")

    if FORMAT_CSV in config.formats:
        path = os.path.join(config.out_dir, f"{_prefix(config)}_gbz.csv")
        write_contour_csv(path, contour)
        outputs.append(path)
    return {
        "n_points": len(contour.betas),
        "closure_gap": contour.closure_gap,
        "mean_abs_beta": float(radii.mean()),
        "max_abs_beta_deviation": deviation,
        "gbz_radius": radius,
        "max_gbz_radius_deviation": radius_deviation,
        "nu_tot": winding.nu_total,
        "nu_imag": winding.nu_imag,
    }


def _closed_form_invariants(config: RunConfig, spec: ModelSpec) -> dict:
    result = {}
    ky = config.transverse_k
    radius = gbz_radius(spec, ky)
    ratios = edge_ratios(spec, ky)
    result["gbz_radius"] = radius
    result["r_R"] = [float(np.real(ratios.r_R)), float(np.imag(ratios.r_R))]
    result["r_L"] = [float(np.real(ratios.r_L)), float(np.imag(ratios.r_L))]
    result["edge_localization"] = edge_localization(ratios)
    result["analytic_P"] = analytic_bp(spec, ky, config.n_p)

    _summary("Γ", f"{radius:.10f}")
    _summary("|r_L* r_R|", f"{ratios.product_abs:.6f}")
    _summary("edge mode", result["edge_localization"])
    _summary(f"P (closed form, N={config.n_p})", f"{result['analytic_P']:.6f}")

    if spec.variant == VARIANT_CHERN_X_OBC:
        closings = obc_gap_closings(spec)
        result["obc_gap_closings"] = closings
        _summary("OBC gap closings ky", ", ".join(f"{k:.6f}" for k in closings) or "none")
        try:
            eps = pbc_ep_locations(spec)
        except SingularConditionError as e:
            post_message(f"PBC EPs not located: {e}", MSG_WARNING)
        else:
            result["pbc_eps"] = [list(ep) for ep in eps]
            located = ", ".join(f"({kx:.6f}, {ky_ep:.6f})" for kx, ky_ep in eps)
            _summary("PBC EPs (kx, ky)", located or "none")
    return result


def _run_invariants(config: RunConfig, spec: ModelSpec, _outputs: list) -> dict:
    result = {}
    if spec.t3 == 0 and spec.variant in (VARIANT_SSH_1D, VARIANT_CHERN_X_OBC):
        try:
            result.update(_closed_form_invariants(config, spec))
        except ModelError as e:
            post_message(f"No closed forms: {e}", MSG_INFO)

    if config.loop_center is not None:
        center = config.loop_center
        if spec.variant == VARIANT_SSH_1D:
            center = complex(*center)
        loop = pbc_loop_vorticity(spec, center, config.loop_radius, config.loop_samples)
        result["vorticity"] = loop.nu_12
        _summary(f"vorticity around {config.loop_center}", f"{loop.nu_12:.6f}")

    hamiltonian = build_obc(spec, config.n_cells, config.transverse_k, config.termination)
    spectrum = biorthogonal_spectrum(hamiltonian, _gauge_radius(spec, config))
    labels = classify_modes(spectrum, config.window_cells or None, config.threshold)
    expected = expected_edge_energy(spec, config.transverse_k)
    selected = select_edge_modes(spectrum, labels, expected)
    result["numeric_P"] = biorthogonal_polarization(spectrum, selected, config.n_cells)
    _summary(f"P (diagonalised, N={config.n_cells})", f"{result['numeric_P']:.6f}")

    contour = gbz_contour(spec, config.transverse_k, config.n_phi, config.admission_tolerance)
    winding = non_bloch_winding(spec, contour, config.transverse_k, config.biorthogonal)
    result["nu_tot"] = winding.nu_total
    result["nu_imag"] = winding.nu_imag
    _summary("ν_tot", f"{winding.nu_total:.6f}")
    return result


def _run_sweep(config: RunConfig, spec: ModelSpec, outputs: list) -> dict:
    axis = SweepAxis(
        config.sweep_parameter, config.sweep_start, config.sweep_stop, config.sweep_points
    )
    settings = SweepSettings(
        n_pbc=config.n_pbc,
        transverse_k=config.transverse_k,
        termination=config.termination,
        window_cells=config.window_cells or None,
        threshold=config.threshold,
        ep_tolerance=config.ep_tolerance,
        biorthogonal=config.biorthogonal,
    )
    started = time.perf_counter()
    result = sweep(
        spec, axis, config.n_cells, config.n_p, config.n_phi, settings, config.workers or None
    )
    wall_time = time.perf_counter() - started

    grid = [point.value for point in result.points]
    p_jumps = find_jumps([point.polarization for point in result.points], grid)
    nu_jumps = find_jumps([point.nu_tot for point in result.points], grid)
    failed = sum(1 for point in result.points if point.failures)
    _summary("points", len(result.points))
    _summary("failed points", failed)
    _summary("P jumps", ", ".join(f"{j:.6f}" for j in p_jumps) or "none")
    _summary("ν_tot jumps", ", ".join(f"{j:.6f}" for j in nu_jumps) or "none")

    prefix = _prefix(config)
    if FORMAT_CSV in config.formats:
        path = os.path.join(config.out_dir, f"{prefix}.csv")
        write_sweep_csv(path, result)
        outputs.append(path)
    if FORMAT_SVG in config.formats:
        path = os.path.join(config.out_dir, f"{prefix}.svg")
        plot_sweep(path, result, prefix)
        outputs.append(path)

    payload = sweep_manifest_payload(result, wall_time)
    payload["p_jumps"] = p_jumps
    payload["nu_tot_jumps"] = nu_jumps
    return payload


def _run_phase_diagram(config: RunConfig, spec: ModelSpec, outputs: list) -> dict:
    gamma_grid = np.linspace(config.gamma_start, config.gamma_stop, config.gamma_points)
    t1_grid = np.linspace(config.t1_start, config.t1_stop, config.t1_points)
    kinds = (PHASE_PBC, PHASE_OBC) if config.diagram == DIAGRAM_BOTH else (config.diagram,)
    workers = config.workers or None
    prefix = _prefix(config)
    payload = {"spec": model_spec_to_mapping(spec)}

    for kind in kinds:
        if kind == PHASE_PBC:
            grid = phase_diagram_pbc(
                spec.delta_stagger, spec.delta_onsite, gamma_grid, t1_grid, workers
            )
        else:
            grid = phase_diagram_obc(
                spec.delta_stagger,
                spec.delta_onsite,
                gamma_grid,
                t1_grid,
                config.n_checks,
                config.n_ky,
                config.seed,
                workers,
            )
        labels, counts = np.unique(grid.labels, return_counts=True)
        histogram = {int(label): int(count) for label, count in zip(labels, counts)}
        _summary(f"{kind} labels", ", ".join(f"{k}: {v}" for k, v in histogram.items()))
        if kind == PHASE_OBC:
            _summary("scan disagreements", f"{grid.disagreements} of {grid.checked}")

        name = prefix if len(kinds) == 1 else f"{prefix}_{kind}"
        if FORMAT_CSV in config.formats:
            path = os.path.join(config.out_dir, f"{name}.csv")
            write_phase_diagram_csv(path, grid)
            outputs.append(path)
        if FORMAT_SVG in config.formats:
            path = os.path.join(config.out_dir, f"{name}.svg")
            plot_phase_diagram(path, grid, name)
            outputs.append(path)
        payload[kind] = {
            "labels": histogram,
            "checked": grid.checked,
            "disagreements": grid.disagreements,
        }
    return payload


_RUNNERS = {
    COMMAND_SPECTRUM: _run_spectrum,
    COMMAND_GBZ: _run_gbz,
    COMMAND_INVARIANTS: _run_invariants,
    COMMAND_SWEEP: _run_sweep,
    COMMAND_PHASE_DIAGRAM: _run_phase_diagram,
}


def _execute(config: RunConfig) -> list:
    spec = _model(config)
    directory = _output_dir(config)
    prefix = _prefix(config)
    outputs = []

    config_path = os.path.join(directory, f"{prefix}.ini")
    with open(config_path, "w", encoding="utf-8") as f:
        f.write(run_config_to_ini(config))
    outputs.append(config_path)

    post_message(f"Running {config.command} for {spec.variant}", MSG_INFO)
    started = time.perf_counter()
    result = _RUNNERS[config.command](config, spec, outputs)
    wall_time = time.perf_counter() - started

    if FORMAT_JSON in config.formats:
        path = os.path.join(directory, f"{prefix}_manifest.json")
        payload = {
            "command": config.command,
            "recipe": config.recipe or None,
            "config": run_config_to_ini(config),
            "spec": model_spec_to_mapping(spec),
            "result": result,
            "outputs": sorted(outputs + [path]),
            "wall_time_s": wall_time,
        }
        write_manifest(path, payload)
        outputs.append(path)

    for path in outputs:
        post_message(f"Wrote {path}", MSG_INFO)
    return outputs


def run(config: RunConfig) -> int:
    """
    Runs a validated config, writing its outputs and printing a summary
    line per computed quantity.

    :return: The exit status.
    """
    try:
        _execute(config)
    except NumericalError as e:
        post_message(f"{type(e).__name__}: {e}", MSG_FATAL)
        report = {"error": type(e).__name__, "message": str(e), "diagnostics": e.diagnostics}
        print(json.dumps(report, default=str, sort_keys=True), file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as e:
        post_message(str(e), MSG_FATAL)
        return EXIT_INVALID
    return EXIT_OK


#
# Entry point
#


def _add_config_flags(parser: argparse.ArgumentParser):
    groups = {section: parser.add_argument_group(f"[{section}]") for section in CONFIG_SECTIONS}
    for key in CONFIG_SCHEMA:
        if key.name == "command":
            continue
        groups[key.section].add_argument(
            "--" + key.name.replace("_", "-"),
            dest=key.name,
            default=None,
            metavar=key.name.upper(),
            help=f"{key.help} Default: {key.default or 'unset'}.",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nhbp",
        description="Biorthogonal polarization and non-Bloch invariants of two-band chains.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        subparser = subparsers.add_parser(command, help=f"Run {command}.")
        if command == COMMAND_REPRODUCE:
            subparser.add_argument("recipe_name", choices=recipe_names(), help="Figure recipe.")
        subparser.add_argument("--config", help="INI file, overridden by flags.")
        subparser.add_argument("--verbose", action="store_true", help="Print debug messages.")
        _add_config_flags(subparser)
    return parser


def _stderr_handler(verbose: bool):
    def handler(msg: str, severity: int):
        if severity == MSG_DEBUG and not verbose:
            return
        print(f"[{MSG_SEVERITY_NAMES[severity]}] {msg}", file=sys.stderr)

    return handler


def main(argv: list | None = None) -> int:
    """
    The nhbp console script.

    :param argv: Arguments, defaults to sys.argv[1:].
    :return: The exit status.
    """
    args = build_parser().parse_args(argv)
    handler = _stderr_handler(args.verbose)
    add_message_handler(handler)
    try:
        try:
            raw = read_config_file(args.config) if args.config else {}
            for key in CONFIG_SCHEMA:
                value = getattr(args, key.name, None)
                if key.name != "command" and value is not None:
                    raw[key.name] = value
            raw["command"] = args.command
            if args.command == COMMAND_REPRODUCE:
                raw["recipe"] = args.recipe_name
            config = build_run_config(raw)
        except ValueError as e:
            post_message(str(e), MSG_FATAL)
            return EXIT_INVALID
        return run(config)
    finally:
        remove_message_handler(handler)


if __name__ == "__main__":
    sys.exit(main())
