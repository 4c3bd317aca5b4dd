# SPDX-License-Identifier: MIT
# Copyright 2025 The nhbp authors

"""
Real-space open chains

Finite open-boundary Hamiltonians assembled from the nearest-cell
hopping blocks of nhbp, their biorthogonal eigen-decomposition, the
edge/bulk classification of the modes and the biorthogonal polarization
P computed from them.

Sites are ordered (1, A), (1, B), (2, A), (2, B), ... Each spectrum
carries the cell number of every site, so the broken-cell termination
(which drops the last B site) needs no special casing downstream.

Skin-effect chains are exponentially non-normal. Tridiagonal matrices
are therefore diagonalised after an exact diagonal similarity that
balances every pair of opposite hoppings. Other chains may be given a
per-cell gauge radius. Neither changes the eigenvalues or the
biorthogonal products ψ_L* ψ_R, which are all P needs.
"""

import csv
import math

from collections import namedtuple

import numpy as np

from nhbp import (
    MSG_DEBUG,
    ModelError,
    ModelSpec,
    NearExceptionalPointError,
    BiorthogonalBreakdownError,
    hopping_blocks,
    post_message,
)

__all__ = [
    "TERMINATION_FULL_CELLS",
    "TERMINATION_BROKEN_CELL",
    "TERMINATIONS",
    "MODE_BULK",
    "MODE_EDGE_LEFT",
    "MODE_EDGE_RIGHT",
    "ObcHamiltonian",
    "BiorthogonalSpectrum",
    "ModeLabel",
    "build_obc",
    "biorthogonal_spectrum",
    "default_window_cells",
    "classify_modes",
    "select_edge_modes",
    "biorthogonal_polarization",
    "SPECTRUM_COLUMNS",
    "spectrum_rows",
    "write_spectrum_csv",
    "spectrum_to_json",
]

TERMINATION_FULL_CELLS = "full_cells"
TERMINATION_BROKEN_CELL = "broken_cell_a_both_ends"

TERMINATIONS = (TERMINATION_FULL_CELLS, TERMINATION_BROKEN_CELL)

MODE_BULK = "bulk"
MODE_EDGE_LEFT = "edge_left"
MODE_EDGE_RIGHT = "edge_right"

ObcHamiltonian = namedtuple("ObcHamiltonian", ("n_cells", "matrix", "termination"))

BiorthogonalSpectrum = namedtuple(
    "BiorthogonalSpectrum",
    ("eigenvalues", "right_vectors", "left_vectors", "pairing_residual", "site_cells"),
)
BiorthogonalSpectrum.__doc__ = """
Eigenvalues E_i with right vectors (columns, H ψ_R = E ψ_R) and left
vectors (columns, H† ψ_L = E* ψ_L) normalised so that ⟨ψ_L,i|ψ_R,i⟩ = 1.
pairing_residual is the largest deviation of the overlap matrix from the
identity. site_cells holds the 1-based cell of each site.
"""

ModeLabel = namedtuple("ModeLabel", ("kind", "boundary_weight"))

# Largest log-ratio of gauge scales kept representable in float64
_MAX_GAUGE_LOG_SPAN = 600.0

_MATCH_RELATIVE_TOL = 1e-6
_BREAKDOWN_TOL = 1e-12


def build_obc(
    spec: ModelSpec,
    n_cells: int,
    transverse_k: float | None = None,
    termination: str = TERMINATION_FULL_CELLS,
) -> ObcHamiltonian:
    """
    Assembles the open chain of n_cells unit cells along the open direction
    of the model variant.

    :param n_cells: The number of unit cells, at least 2.
    :param transverse_k: The retained periodic momentum, required for the
      2d variants.
    :param termination: TERMINATION_FULL_CELLS (2N sites) or
      TERMINATION_BROKEN_CELL (2N-1 sites, A at both ends).
    :raises ModelError: For bad sizes, terminations, or a missing
      transverse momentum.
    """
    if isinstance(n_cells, bool) or not isinstance(n_cells, (int, np.integer)) or n_cells < 2:
        raise ModelError(f"n_cells must be an integer >= 2, got {n_cells!r}")
    if termination not in TERMINATIONS:
        raise ModelError(f"termination must be one of {', '.join(TERMINATIONS)}")

    blocks = hopping_blocks(spec, transverse_k)
    n_cells = int(n_cells)
    matrix = (
        np.kron(np.eye(n_cells), blocks.onsite)
        + np.kron(np.eye(n_cells, k=-1), blocks.forward)
        + np.kron(np.eye(n_cells, k=1), blocks.backward)
    )
    if termination == TERMINATION_BROKEN_CELL:
        matrix = matrix[:-1, :-1]

    post_message(
        f"Built {spec.variant} OBC chain: {n_cells} cells, {termination}, {matrix.shape[0]} sites",
        MSG_DEBUG,
    )
    return ObcHamiltonian(n_cells, matrix, termination)


def _site_cells(dimension: int) -> np.ndarray:
    return np.arange(dimension) // 2 + 1


def _tridiagonal_gauge(matrix: np.ndarray) -> np.ndarray | None:
    """
    Log-scales s_j of the diagonal similarity that equalises |H[j+1, j]| and
    |H[j, j+1]|, or None if the matrix has longer-range couplings.
    """
    dimension = matrix.shape[0]
    if dimension < 2:
        return None
    if np.any(np.triu(matrix, 2)) or np.any(np.tril(matrix, -2)):
        return None

    lower = np.abs(np.diagonal(matrix, -1))
    upper = np.abs(np.diagonal(matrix, 1))
    steps = np.zeros(dimension - 1)
    both = (lower > 0) & (upper > 0)
    steps[both] = 0.5 * (np.log(lower[both]) - np.log(upper[both]))
    return np.concatenate(([0.0], np.cumsum(steps)))


def _usable_gauge(log_scales: np.ndarray | None) -> np.ndarray | None:
    if log_scales is None:
        return None
    span = float(np.ptp(log_scales))
    if span == 0.0:
        return None
    if span > _MAX_GAUGE_LOG_SPAN:
        post_message(
            f"Gauge scales span e^{span:.0f}, diagonalising without the similarity",
            MSG_DEBUG,
        )
        return None
    return np.exp(log_scales - log_scales.mean())


def _match_left_to_right(eigenvalues, adjoint_eigenvalues, tolerance):
    """
    Greedy nearest pairing of the eigenvalues of H with the conjugated
    eigenvalues of H†.

    :return: The permutation of the adjoint columns.
    """
    targets = np.conj(adjoint_eigenvalues)
    distances = np.abs(eigenvalues[:, None] - targets[None, :])
    order = np.argsort(distances.min(axis=1), kind="stable")
    used = np.zeros(len(targets), dtype=bool)
    permutation = np.empty(len(eigenvalues), dtype=int)

    for i in order:
        candidates = np.where(used, np.inf, distances[i])
        j = int(np.argmin(candidates))
        if candidates[j] > tolerance:
            cluster = eigenvalues[np.abs(eigenvalues - eigenvalues[i]) <= 10 * tolerance]
            raise NearExceptionalPointError(
                f"Could not pair eigenvalue {complex(eigenvalues[i]):.6g} of H with H†",
                {
                    "eigenvalue": [float(eigenvalues[i].real), float(eigenvalues[i].imag)],
                    "cluster": [[float(e.real), float(e.imag)] for e in cluster],
                    "nearest_distance": float(candidates[j]),
                    "tolerance": float(tolerance),
                },
            )
        used[j] = True
        permutation[i] = j

    return permutation


def _clusters(eigenvalues: np.ndarray, tolerance: float) -> list:
    """Groups of indices whose eigenvalues chain together within tolerance."""
    remaining = list(range(len(eigenvalues)))
    groups = []
    while remaining:
        group = [remaining.pop(0)]
        grown = True
        while grown:
            grown = False
            for i in list(remaining):
                if np.min(np.abs(eigenvalues[group] - eigenvalues[i])) <= tolerance:
                    group.append(i)
                    remaining.remove(i)
                    grown = True
        groups.append(group)
    return groups


def _biorthonormalise(eigenvalues, right, left, tolerance):
    """
    Rescales the left vectors in place so that left† right = 1 for each
    isolated mode, and re-combines them within degenerate clusters.
    """
    overlaps = np.einsum("ij,ij->j", left.conj(), right)
    isolated = np.ones(len(eigenvalues), dtype=bool)

    near = np.abs(eigenvalues[:, None] - eigenvalues[None, :]) <= tolerance
    np.fill_diagonal(near, False)
    crowded = np.flatnonzero(near.any(axis=1))
    if crowded.size:
        for group in _clusters(eigenvalues[crowded], tolerance):
            if len(group) < 2:
                continue
            indices = crowded[group]
            isolated[indices] = False
            overlap = left[:, indices].conj().T @ right[:, indices]
            if np.linalg.cond(overlap) > 1 / _BREAKDOWN_TOL:
                raise BiorthogonalBreakdownError(
                    "Left and right eigenvectors are linearly dependent in a degenerate cluster",
                    {"cluster": [[float(e.real), float(e.imag)] for e in eigenvalues[indices]]},
                )
            left[:, indices] = left[:, indices] @ np.linalg.inv(overlap).conj().T

    small = isolated & (np.abs(overlaps) < _BREAKDOWN_TOL)
    if np.any(small):
        i = int(np.flatnonzero(small)[0])
        raise BiorthogonalBreakdownError(
            f"⟨ψ_L|ψ_R⟩ vanishes for eigenvalue {complex(eigenvalues[i]):.6g}",
            {
                "eigenvalue": [float(eigenvalues[i].real), float(eigenvalues[i].imag)],
                "overlap": float(abs(overlaps[i])),
            },
        )
    left[:, isolated] = left[:, isolated] / overlaps[isolated].conj()


def biorthogonal_spectrum(
    hamiltonian: ObcHamiltonian | np.ndarray, gauge_radius: float | None = None
) -> BiorthogonalSpectrum:
    """
    Computes the full biorthogonal eigen-system of a chain.

    Right vectors come from the decomposition of H and left vectors from a
    separate decomposition of H†, paired by nearest conjugate eigenvalue.
    Pairs are then normalised so that ⟨ψ_L|ψ_R⟩ = 1, with degenerate
    clusters biorthogonalised as a block.

    :param hamiltonian: An ObcHamiltonian, or a bare square matrix whose
      consecutive site pairs are taken as cells.
    :param gauge_radius: For chains that are not tridiagonal, an optional
      per-cell decay r. Cell n is then scaled by r^n before diagonalising.
    :raises NearExceptionalPointError: If the spectra can't be paired.
    :raises BiorthogonalBreakdownError: If a pair has vanishing overlap.
    """
    matrix = np.asarray(getattr(hamiltonian, "matrix", hamiltonian), dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ModelError(f"Expected a square matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ModelError("The Hamiltonian has non-finite entries")

    site_cells = _site_cells(matrix.shape[0])

    log_scales = _tridiagonal_gauge(matrix)
    if log_scales is None and gauge_radius is not None:
        if not gauge_radius > 0:
            raise ModelError(f"gauge_radius must be positive, got {gauge_radius}")
        log_scales = site_cells * math.log(gauge_radius)
    scales = _usable_gauge(log_scales)

    work = matrix if scales is None else matrix * (scales[None, :] / scales[:, None])

    scale = max(float(np.linalg.norm(matrix, 1)), np.finfo(float).tiny)
    tolerance = _MATCH_RELATIVE_TOL * scale

    eigenvalues, right = np.linalg.eig(work)
    adjoint_eigenvalues, left = np.linalg.eig(work.conj().T)
    left = left[:, _match_left_to_right(eigenvalues, adjoint_eigenvalues, tolerance)]

    _biorthonormalise(eigenvalues, right, left, tolerance)

    # ⟨ψ_L|ψ_R⟩ is invariant under the similarity, so check it in the
    # balanced frame.
    overlap = left.conj().T @ right
    pairing_residual = float(np.max(np.abs(overlap - np.eye(len(eigenvalues)))))

    if scales is not None:
        right = right * scales[:, None]
        left = left / scales[:, None]

    post_message(
        f"Diagonalised {matrix.shape[0]} sites, pairing residual {pairing_residual:.3g}",
        MSG_DEBUG,
    )
    return BiorthogonalSpectrum(eigenvalues, right, left, pairing_residual, site_cells)


def _cell_densities(spectrum: BiorthogonalSpectrum) -> np.ndarray:
    """Biorthogonal densities |ψ_R||ψ_L| summed per cell, (cells, modes)."""
    densities = np.abs(spectrum.right_vectors) * np.abs(spectrum.left_vectors)
    n_cells = int(spectrum.site_cells.max())
    per_cell = np.zeros((n_cells, densities.shape[1]))
    np.add.at(per_cell, spectrum.site_cells - 1, densities)
    return per_cell


def default_window_cells(n_cells: int) -> int:
    return max(3, n_cells // 20)


def classify_modes(
    spectrum: BiorthogonalSpectrum, window_cells: int | None = None, threshold: float = 0.5
) -> list:
    """
    Labels each mode as bulk or as localised at the left or right edge.

    The weight at an edge is the share of the biorthogonal density
    |ψ_R||ψ_L| in the outermost window_cells cells. Skin-localised bulk
    modes have a spread-out biorthogonal density and so stay bulk.

    :param window_cells: Defaults to max(3, N // 20).
    :param threshold: The edge weight needed to label a mode as an edge mode.
    :return: A ModeLabel per mode, in spectrum order.
    """
    per_cell = _cell_densities(spectrum)
    n_cells = per_cell.shape[0]
    if window_cells is None:
        window_cells = default_window_cells(n_cells)
    if window_cells < 1:
        raise ModelError(f"window_cells must be >= 1, got {window_cells}")
    if not 0 < threshold < 1:
        raise ModelError(f"threshold must be in (0, 1), got {threshold}")

    totals = per_cell.sum(axis=0)
    totals[totals == 0] = 1.0
    left_weight = per_cell[:window_cells].sum(axis=0) / totals
    right_weight = per_cell[n_cells - window_cells :].sum(axis=0) / totals

    labels = []
    for left, right in zip(left_weight, right_weight):
        if left >= threshold and left >= right:
            kind = MODE_EDGE_LEFT
        elif right >= threshold:
            kind = MODE_EDGE_RIGHT
        else:
            kind = MODE_BULK
        labels.append(ModeLabel(kind, float(min(1.0, max(left, right)))))
    return labels


def select_edge_modes(
    spectrum: BiorthogonalSpectrum, labels: list, expected_energy: complex | None = None
) -> list:
    """
    The modes that enter P: every edge-labelled mode or, when there are
    none, the single mode closest to the expected edge energy. The
    delocalised mode at a merge point is picked up by the latter.

    :return: A list of mode indices, possibly empty.
    """
    edges = [i for i, label in enumerate(labels) if label.kind != MODE_BULK]
    if edges or expected_energy is None:
        return edges
    return [int(np.argmin(np.abs(spectrum.eigenvalues - expected_energy)))]


def biorthogonal_polarization(
    spectrum: BiorthogonalSpectrum, selected_modes: list, n_cells: int | None = None
) -> float:
    """
    P = M - Σ_α (1/N) Σ_n n ⟨ψ_L,α|Π_n|ψ_R,α⟩ / ⟨ψ_L,α|ψ_R,α⟩ over the M
    selected modes, with Π_n projecting onto both sites of cell n.

    A mode at cell 1 gives 1 - 1/N, one at cell N gives 0. An empty
    selection gives 0.

    :param n_cells: N, defaults to the number of cells in the spectrum.
    :raises BiorthogonalBreakdownError: If a selected overlap is below 1e-12.
    """
    if n_cells is None:
        n_cells = int(spectrum.site_cells.max())
    if n_cells < 1:
        raise ModelError(f"n_cells must be positive, got {n_cells}")

    polarization = float(len(selected_modes))
    for index in selected_modes:
        right = spectrum.right_vectors[:, index]
        left = spectrum.left_vectors[:, index]
        products = left.conj() * right
        overlap = products.sum()
        if not abs(overlap) >= _BREAKDOWN_TOL:
            raise BiorthogonalBreakdownError(
                f"⟨ψ_L|ψ_R⟩ = {abs(overlap):.3g} for mode {index}",
                {"mode": int(index), "overlap": float(abs(overlap))},
            )
        position = (spectrum.site_cells * products).sum() / overlap
        polarization -= float(position.real) / n_cells

    return polarization


#
# Export
#

SPECTRUM_COLUMNS = ("re_E", "im_E", "abs_E", "kind", "boundary_weight")


def spectrum_rows(spectrum: BiorthogonalSpectrum, labels: list) -> list:
    """:return: One dict per mode, keyed by SPECTRUM_COLUMNS."""
    return [
        {
            "re_E": repr(float(energy.real)),
            "im_E": repr(float(energy.imag)),
            "abs_E": repr(float(abs(energy))),
            "kind": label.kind,
            "boundary_weight": repr(label.boundary_weight),
        }
        for energy, label in zip(spectrum.eigenvalues, labels)
    ]


def write_spectrum_csv(path, spectrum: BiorthogonalSpectrum, labels: list):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=SPECTRUM_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(spectrum_rows(spectrum, labels))


def spectrum_to_json(
    spectrum: BiorthogonalSpectrum, labels: list, include_vectors: bool = False
) -> dict:
    """
    A JSON-serialisable dict of the spectrum. Eigenvectors are only
    included on request, as [re, im] pairs per site and mode.
    """
    data = {
        "eigenvalues": [[float(e.real), float(e.imag)] for e in spectrum.eigenvalues],
        "labels": [label.kind for label in labels],
        "boundary_weights": [label.boundary_weight for label in labels],
        "pairing_residual": spectrum.pairing_residual,
        "site_cells": [int(c) for c in spectrum.site_cells],
    }
    if include_vectors:
        for key in ("right_vectors", "left_vectors"):
            vectors = getattr(spectrum, key)
            data[key] = np.stack((vectors.real, vectors.imag), axis=-1).tolist()
    return data
