# SPDX-License-Identifier: MIT
# Copyright 2025 The nhbp authors

"""
Parameter sweeps and phase diagrams

A sweep varies one parameter (t1, γ or the transverse momentum) along a
grid and, at each point, computes:

- |E| of the PBC bands over a dense momentum grid,
- the OBC spectrum with edge/bulk labels,
- the biorthogonal polarization P, from the closed form when t3 = 0 and
  from diagonalisation otherwise,
- ν_tot from the GBZ.

Points are independent and run on a joblib worker pool. Results come back
in grid order. A numerical failure at one point is recorded against that
point (its values become NaN) and the sweep carries on.

Phase diagrams label a (γ, t1) grid of the x-OBC Chern model by whether
the PBC bands have EPs, or by how many ky close the OBC gap.

Results are written as long-format CSV, JSON manifests and SVG figures.
"""

import csv
import json
import math

from collections import namedtuple

import joblib
import matplotlib
import numpy as np

from joblib import Parallel, delayed

from nhbp import (
    MSG_INFO,
    MSG_WARNING,
    VARIANT_CHERN_X_OBC,
    VARIANT_SSH_1D,
    GapClosedError,
    ModelError,
    ModelSpec,
    NumericalError,
    __version__,
    d_vector,
    is_two_d,
    model_spec_to_mapping,
    pbc_energy,
    post_message,
    validate_model_spec,
)
from nhbp_gbz import DEFAULT_N_PHI, contour_radius, gbz_contour, non_bloch_winding
from nhbp_invariants import (
    analytic_bp,
    expected_edge_energy,
    ep_candidates,
    obc_gap_closings,
    scan_delocalization_points,
)
from nhbp_realspace import (
    MODE_BULK,
    TERMINATION_BROKEN_CELL,
    TERMINATIONS,
    biorthogonal_polarization,
    biorthogonal_spectrum,
    build_obc,
    classify_modes,
    select_edge_modes,
)

matplotlib.use("Agg")

# pylint: disable=wrong-import-position
from matplotlib import pyplot as plt  # noqa: E402

__all__ = [
    "PARAM_T1",
    "PARAM_GAMMA",
    "PARAM_TRANSVERSE_K",
    "SWEEP_PARAMETERS",
    "PHASE_PBC",
    "PHASE_OBC",
    "FLAG_PBC_EP",
    "FLAG_OBC_GAP_CLOSED",
    "SCHEMA_VERSION",
    "SWEEP_CSV_COLUMNS",
    "SweepAxis",
    "SweepSettings",
    "SweepPoint",
    "SweepResult",
    "PhaseDiagramGrid",
    "validate_sweep_axis",
    "validate_sweep_settings",
    "sweep_values",
    "sweep_point",
    "sweep",
    "find_jumps",
    "phase_diagram_pbc",
    "phase_diagram_obc",
    "write_sweep_csv",
    "write_phase_diagram_csv",
    "write_manifest",
    "sweep_manifest_payload",
    "plot_sweep",
    "plot_phase_diagram",
]

PARAM_T1 = "t1"
PARAM_GAMMA = "gamma"
PARAM_TRANSVERSE_K = "transverse_k"

SWEEP_PARAMETERS = (PARAM_T1, PARAM_GAMMA, PARAM_TRANSVERSE_K)

PHASE_PBC = "pbc"
PHASE_OBC = "obc"

FLAG_PBC_EP = "pbc_ep"
FLAG_OBC_GAP_CLOSED = "obc_gap_closed"

SCHEMA_VERSION = 1

SweepAxis = namedtuple("SweepAxis", ("parameter", "start", "stop", "n_points"))

SweepSettings = namedtuple(
    "SweepSettings",
    (
        "n_obc",
        "n_p",
        "gbz_resolution",
        "n_pbc",
        "transverse_k",
        "termination",
        "window_cells",
        "threshold",
        "ep_tolerance",
        "biorthogonal",
    ),
    defaults=(100, 100, DEFAULT_N_PHI, 512, None, TERMINATION_BROKEN_CELL, None, 0.5, 1e-2, True),
)
SweepSettings.__doc__ = """
Sizes and switches for a sweep. transverse_k is the fixed periodic
momentum of a 2d variant when it isn't the swept parameter. window_cells
None means max(3, N // 20). ep_tolerance is the |E_PBC| below which a
point is flagged as (near) a PBC EP.
"""

SweepPoint = namedtuple(
    "SweepPoint",
    (
        "value",
        "obc_abs_energies",
        "pbc_abs_energies",
        "edge_energies",
        "boundary_weights",
        "mode_kinds",
        "polarization",
        "nu_tot",
        "nu_imag",
        "ep_flags",
        "failures",
    ),
)

SweepResult = namedtuple("SweepResult", ("spec", "axis", "settings", "points"))

PhaseDiagramGrid = namedtuple(
    "PhaseDiagramGrid", ("kind", "gamma_grid", "t1_grid", "labels", "checked", "disagreements")
)
PhaseDiagramGrid.__doc__ = """
labels[i, j] is the label at (gamma_grid[i], t1_grid[j]): 1/0 for EPs
present/absent in a PHASE_PBC grid, the number of gap-closing ky (0, 2, 4
or 6) in a PHASE_OBC grid. checked and disagreements count the cells
cross-checked against a brute-force scan.
"""


def validate_sweep_axis(axis: SweepAxis, spec: ModelSpec) -> SweepAxis:
    """
    :raises ModelError: If the parameter doesn't suit the variant, the
      range is empty or there are fewer than two points.
    """
    problems = []
    if axis.parameter not in SWEEP_PARAMETERS:
        problems.append(f"parameter must be one of {', '.join(SWEEP_PARAMETERS)}")
    elif axis.parameter == PARAM_TRANSVERSE_K and not is_two_d(spec):
        problems.append(f"{PARAM_TRANSVERSE_K} can only be swept for 2d variants")
    if not axis.start < axis.stop:
        problems.append(f"start ({axis.start}) must be below stop ({axis.stop})")
    if int(axis.n_points) != axis.n_points or axis.n_points < 2:
        problems.append(f"n_points must be an integer >= 2, got {axis.n_points}")
    if problems:
        raise ModelError("Invalid sweep axis: " + "; ".join(problems))
    return SweepAxis(axis.parameter, float(axis.start), float(axis.stop), int(axis.n_points))


def validate_sweep_settings(settings: SweepSettings, spec: ModelSpec, axis: SweepAxis):
    problems = []
    for key in ("n_obc", "n_p"):
        if getattr(settings, key) < 2:
            problems.append(f"{key} must be >= 2")
    if settings.gbz_resolution < 64:
        problems.append("gbz_resolution must be >= 64")
    if settings.n_pbc < 2:
        problems.append("n_pbc must be >= 2")
    if settings.termination not in TERMINATIONS:
        problems.append(f"termination must be one of {', '.join(TERMINATIONS)}")
    if settings.window_cells is not None and settings.window_cells < 1:
        problems.append("window_cells must be >= 1")
    if not 0 < settings.threshold < 1:
        problems.append("threshold must be in (0, 1)")
    if not settings.ep_tolerance > 0:
        problems.append("ep_tolerance must be positive")
    if is_two_d(spec) and axis.parameter != PARAM_TRANSVERSE_K and settings.transverse_k is None:
        problems.append("transverse_k must be set for 2d variants")
    if problems:
        raise ModelError("Invalid sweep settings: " + "; ".join(problems))


def sweep_values(axis: SweepAxis) -> np.ndarray:
    return np.linspace(axis.start, axis.stop, axis.n_points)


def _uses_closed_form(spec: ModelSpec) -> bool:
    return spec.t3 == 0 and spec.variant in (VARIANT_SSH_1D, VARIANT_CHERN_X_OBC)


def _point_model(spec, parameter, value, settings):
    if parameter == PARAM_TRANSVERSE_K:
        return spec, value
    return spec._replace(**{parameter: value}), settings.transverse_k


def sweep_point(
    spec: ModelSpec, parameter: str, value: float, settings: SweepSettings
) -> SweepPoint:
    """
    Computes every sweep quantity at one grid point. Numerical failures
    are caught per stage and recorded as "stage: message" strings.
    """
    point_spec, transverse_k = _point_model(spec, parameter, float(value), settings)
    failures = []
    flags = []

    momenta = 2 * math.pi * np.arange(settings.n_pbc) / settings.n_pbc
    pbc_abs = np.abs(pbc_energy(d_vector(point_spec, momenta, transverse_k)))
    if pbc_abs.min() < settings.ep_tolerance:
        flags.append(FLAG_PBC_EP)

    nu_tot = nu_imag = math.nan
    gauge_radius = None
    try:
        contour = gbz_contour(point_spec, transverse_k, settings.gbz_resolution)
        gauge_radius = contour_radius(contour)
        winding = non_bloch_winding(point_spec, contour, transverse_k, settings.biorthogonal)
        nu_tot, nu_imag = winding.nu_total, winding.nu_imag
    except GapClosedError as e:
        flags.append(FLAG_OBC_GAP_CLOSED)
        failures.append(f"gbz: {e}")
    except (NumericalError, ModelError) as e:
        failures.append(f"gbz: {e}")

    obc_abs = []
    edge_energies = []
    weights = []
    kinds = []
    spectrum = labels = None
    try:
        hamiltonian = build_obc(point_spec, settings.n_obc, transverse_k, settings.termination)
        spectrum = biorthogonal_spectrum(hamiltonian, gauge_radius)
        labels = classify_modes(spectrum, settings.window_cells, settings.threshold)
        obc_abs = np.abs(spectrum.eigenvalues).tolist()
        kinds = [label.kind for label in labels]
        weights = [label.boundary_weight for label in labels]
        edge_energies = [
            abs(e) for e, label in zip(spectrum.eigenvalues, labels) if label.kind != MODE_BULK
        ]
    except NumericalError as e:
        failures.append(f"obc: {e}")

    polarization = math.nan
    try:
        if _uses_closed_form(point_spec):
            polarization = analytic_bp(point_spec, transverse_k, settings.n_p)
        else:
            if settings.n_p != settings.n_obc or spectrum is None:
                hamiltonian = build_obc(
                    point_spec, settings.n_p, transverse_k, settings.termination
                )
                spectrum = biorthogonal_spectrum(hamiltonian, gauge_radius)
                labels = classify_modes(spectrum, settings.window_cells, settings.threshold)
            selected = select_edge_modes(
                spectrum, labels, expected_edge_energy(point_spec, transverse_k)
            )
            polarization = biorthogonal_polarization(spectrum, selected, settings.n_p)
    except NumericalError as e:
        failures.append(f"polarization: {e}")

    return SweepPoint(
        float(value),
        obc_abs,
        pbc_abs.tolist(),
        edge_energies,
        weights,
        kinds,
        polarization,
        nu_tot,
        nu_imag,
        flags,
        failures,
    )


def sweep(
    spec: ModelSpec,
    axis: SweepAxis,
    n_obc: int,
    n_p: int,
    gbz_resolution: int = DEFAULT_N_PHI,
    settings: SweepSettings | None = None,
    workers: int | None = None,
) -> SweepResult:
    """
    Runs a sweep, one work item per grid point.

    :param n_obc: The chain length for the OBC spectra.
    :param n_p: The chain length for P.
    :param gbz_resolution: The φ-grid size for the GBZ.
    :param settings: Further options. n_obc, n_p and gbz_resolution
      override the values it holds.
    :param workers: The worker count, defaults to all available CPUs.
    """
    spec = validate_model_spec(spec)
    axis = validate_sweep_axis(axis, spec)
    settings = (settings or SweepSettings())._replace(
        n_obc=int(n_obc), n_p=int(n_p), gbz_resolution=int(gbz_resolution)
    )
    validate_sweep_settings(settings, spec, axis)

    values = sweep_values(axis)
    n_jobs = workers or joblib.cpu_count()
    post_message(
        f"Sweeping {axis.parameter} over {axis.n_points} points of {spec.variant}"
        f" with {n_jobs} workers",
        MSG_INFO,
    )

    points = Parallel(n_jobs=n_jobs)(
        delayed(sweep_point)(spec, axis.parameter, value, settings) for value in values
    )

    failed = 0
    for point in points:
        if point.failures:
            failed += 1
            for failure in point.failures:
                post_message(f"{axis.parameter}={point.value:.6g}: {failure}", MSG_WARNING)

    post_message(f"Sweep done, {failed} of {len(points)} points with failures", MSG_INFO)
    return SweepResult(spec, axis, settings, points)


def find_jumps(values, grid, threshold: float = 0.5) -> list:
    """
    :return: The midpoints of grid-adjacent steps with |Δvalue| > threshold.
      Steps touching a NaN are skipped.
    """
    values = np.asarray(values, dtype=float)
    grid = np.asarray(grid, dtype=float)
    steps = np.abs(np.diff(values))
    jumps = np.flatnonzero(np.isfinite(steps) & (steps > threshold))
    return [float((grid[j] + grid[j + 1]) / 2) for j in jumps]


#
# Phase diagrams
#


def _chern_grid_spec(delta_stagger, delta_onsite, gamma, t1):
    return ModelSpec(
        VARIANT_CHERN_X_OBC,
        t1=float(t1),
        gamma=float(gamma),
        delta_onsite=float(delta_onsite),
        delta_stagger=float(delta_stagger),
    )


def _checked_grids(gamma_grid, t1_grid):
    gamma_grid = np.asarray(gamma_grid, dtype=float)
    t1_grid = np.asarray(t1_grid, dtype=float)
    if gamma_grid.size == 0 or t1_grid.size == 0:
        raise ModelError("Phase diagram grids must be nonempty")
    return gamma_grid, t1_grid


def _grid_cells(gamma_grid, t1_grid):
    return [(gamma, t1) for gamma in gamma_grid for t1 in t1_grid]


def _pbc_cell_label(delta_stagger, delta_onsite, gamma, t1) -> int:
    spec = _chern_grid_spec(delta_stagger, delta_onsite, gamma, t1)
    return 1 if ep_candidates(spec).points else 0


def phase_diagram_pbc(
    delta_stagger: float, delta_onsite: float, gamma_grid, t1_grid, workers: int | None = None
) -> PhaseDiagramGrid:
    """
    Labels each (γ, t1) cell 1 if the PBC bands of the x-OBC Chern model
    (t3 = 0) have isolated EPs, 0 otherwise. Singular EP branches (Δ = 0,
    Δ² = 4δ²) are reported once and contribute no EPs.

    :param workers: The worker count, defaults to all available CPUs.
    """
    gamma_grid, t1_grid = _checked_grids(gamma_grid, t1_grid)
    singular = ep_candidates(
        _chern_grid_spec(delta_stagger, delta_onsite, gamma_grid[0], t1_grid[0])
    ).singular_branches
    for kx in singular:
        post_message(f"The kx={kx:.6g} EP branch is singular and skipped", MSG_WARNING)

    n_jobs = workers or joblib.cpu_count()
    post_message(
        f"PBC phase diagram over {gamma_grid.size}x{t1_grid.size} cells with {n_jobs} workers",
        MSG_INFO,
    )
    cells = Parallel(n_jobs=n_jobs)(
        delayed(_pbc_cell_label)(delta_stagger, delta_onsite, gamma, t1)
        for gamma, t1 in _grid_cells(gamma_grid, t1_grid)
    )
    labels = np.array(cells, dtype=int).reshape(gamma_grid.size, t1_grid.size)
    return PhaseDiagramGrid(PHASE_PBC, gamma_grid, t1_grid, labels, 0, 0)


def _gap_closing_count(spec: ModelSpec, n_ky: int) -> int:
    try:
        return len(obc_gap_closings(spec))
    except ModelError:
        # t1 = 0 has no closed form
        return len(scan_delocalization_points(spec, n_ky))


def _obc_cell_label(delta_stagger, delta_onsite, gamma, t1, n_ky) -> int:
    return _gap_closing_count(_chern_grid_spec(delta_stagger, delta_onsite, gamma, t1), n_ky)


def _scan_cell_label(delta_stagger, delta_onsite, gamma, t1, n_ky) -> int:
    spec = _chern_grid_spec(delta_stagger, delta_onsite, gamma, t1)
    return len(scan_delocalization_points(spec, n_ky))


def phase_diagram_obc(
    delta_stagger: float,
    delta_onsite: float,
    gamma_grid,
    t1_grid,
    n_checks: int = 100,
    n_ky: int = 4096,
    seed: int = 0,
    workers: int | None = None,
) -> PhaseDiagramGrid:
    """
    Labels each (γ, t1) cell by the number of ky at which the OBC gap of
    the x-OBC Chern model (t3 = 0) closes.

    A reproducible random subsample of n_checks cells is recounted by the
    brute-force scan of |r_L* r_R| = 1 on n_ky momenta, and disagreements
    are reported.

    :param workers: The worker count, defaults to all available CPUs.
    """
    gamma_grid, t1_grid = _checked_grids(gamma_grid, t1_grid)
    if delta_stagger == 0:
        raise ModelError("The OBC phase diagram needs a nonzero δ")

    n_jobs = workers or joblib.cpu_count()
    post_message(
        f"OBC phase diagram over {gamma_grid.size}x{t1_grid.size} cells with {n_jobs} workers",
        MSG_INFO,
    )
    parallel = Parallel(n_jobs=n_jobs)
    cells = parallel(
        delayed(_obc_cell_label)(delta_stagger, delta_onsite, gamma, t1, n_ky)
        for gamma, t1 in _grid_cells(gamma_grid, t1_grid)
    )
    labels = np.array(cells, dtype=int).reshape(gamma_grid.size, t1_grid.size)

    checks = min(n_checks, labels.size)
    chosen = [
        np.unravel_index(flat, labels.shape)
        for flat in np.random.default_rng(seed).choice(labels.size, size=checks, replace=False)
    ]
    scanned = parallel(
        delayed(_scan_cell_label)(delta_stagger, delta_onsite, gamma_grid[i], t1_grid[j], n_ky)
        for i, j in chosen
    )
    disagreements = 0
    for (i, j), count in zip(chosen, scanned):
        if count != labels[i, j]:
            disagreements += 1
            post_message(
                f"Gap closing count {labels[i, j]} disagrees with scan count {count}"
                f" at γ={gamma_grid[i]:.6g}, t1={t1_grid[j]:.6g}",
                MSG_WARNING,
            )

    return PhaseDiagramGrid(PHASE_OBC, gamma_grid, t1_grid, labels, checks, disagreements)


#
# Output
#

SWEEP_CSV_COLUMNS = ("param", "quantity", "value")


def _sweep_rows(result: SweepResult):
    for point in result.points:
        param = repr(point.value)
        yield param, "P", repr(float(point.polarization))
        yield param, "nu_tot", repr(float(point.nu_tot))
        yield param, "nu_imag", repr(float(point.nu_imag))
        for value in point.pbc_abs_energies:
            yield param, "pbc_abs_E", repr(float(value))
        for value, weight, kind in zip(
            point.obc_abs_energies, point.boundary_weights, point.mode_kinds
        ):
            yield param, "obc_abs_E", repr(float(value))
            yield param, f"boundary_weight_{kind}", repr(float(weight))
        for value in point.edge_energies:
            yield param, "edge_abs_E", repr(float(value))
        for flag in point.ep_flags:
            yield param, f"flag_{flag}", "1"
        yield param, "failures", repr(len(point.failures))


def write_sweep_csv(path, result: SweepResult):
    """
    Writes the sweep in long format, one (param, quantity, value) row per
    number. Floats are written with repr so reruns are bitwise identical.
    """
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SWEEP_CSV_COLUMNS)
        writer.writerows(_sweep_rows(result))


def write_phase_diagram_csv(path, grid: PhaseDiagramGrid):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(("gamma", "t1", "label"))
        for i, gamma in enumerate(grid.gamma_grid):
            for j, t1 in enumerate(grid.t1_grid):
                writer.writerow((repr(float(gamma)), repr(float(t1)), int(grid.labels[i, j])))


def write_manifest(path, payload: dict) -> dict:
    """
    Writes a JSON manifest: the payload plus the schema and library
    versions.

    :return: The manifest as written.
    """
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "versions": {
            "nhbp": __version__,
            "numpy": np.__version__,
            "joblib": joblib.__version__,
            "matplotlib": matplotlib.__version__,
        },
    }
    manifest.update(payload)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest


def sweep_manifest_payload(result: SweepResult, wall_time: float) -> dict:
    return {
        "spec": model_spec_to_mapping(result.spec),
        "axis": dict(result.axis._asdict()),
        "settings": dict(result.settings._asdict()),
        "failed_points": {
            repr(point.value): point.failures for point in result.points if point.failures
        },
        "wall_time_s": wall_time,
    }


def _save_svg(figure, path):
    figure.savefig(path, format="svg", metadata={"Date": None})
    plt.close(figure)


def plot_sweep(path, result: SweepResult, title: str | None = None):
    """
    |E| against the swept parameter: OBC in black, PBC in grey, edge
    modes in green, with P (dashed red) and ν_tot (blue) on a second axis.
    """
    matplotlib.rcParams["svg.hashsalt"] = "nhbp"
    figure, axes = plt.subplots(figsize=(6, 4), layout="constrained")

    for point in result.points:
        axes.scatter(
            np.full(len(point.pbc_abs_energies), point.value),
            point.pbc_abs_energies,
            s=1,
            color="0.8",
        )
        axes.scatter(
            np.full(len(point.obc_abs_energies), point.value),
            point.obc_abs_energies,
            s=1,
            color="black",
        )
        axes.scatter(
            np.full(len(point.edge_energies), point.value),
            point.edge_energies,
            s=3,
            color="green",
        )
    axes.set_xlabel(result.axis.parameter)
    axes.set_ylabel("|E|")

    values = [p.value for p in result.points]
    invariants = axes.twinx()
    invariants.step(
        values, [p.polarization for p in result.points], "r--", where="mid", label="P"
    )
    invariants.plot(values, [p.nu_tot for p in result.points], "b-", label="ν_tot")
    invariants.set_ylabel("P, ν_tot")
    invariants.legend(loc="upper right")
    if title:
        axes.set_title(title)

    _save_svg(figure, path)


def plot_phase_diagram(path, grid: PhaseDiagramGrid, title: str | None = None):
    matplotlib.rcParams["svg.hashsalt"] = "nhbp"
    figure, axes = plt.subplots(figsize=(5, 4), layout="constrained")
    mesh = axes.pcolormesh(
        grid.t1_grid, grid.gamma_grid, grid.labels, shading="nearest", cmap="viridis"
    )
    colorbar = figure.colorbar(mesh, ax=axes)
    colorbar.set_label("EP region" if grid.kind == PHASE_PBC else "gap-closing ky count")
    axes.set_xlabel("t1")
    axes.set_ylabel("γ")
    if title:
        axes.set_title(title)
    _save_svg(figure, path)
