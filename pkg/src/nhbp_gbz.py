# SPDX-License-Identifier: MIT
# Copyright 2025 The nhbp authors

"""
Generalized Brillouin zone

The GBZ is traced with the φ-sweep: for a phase φ, any pair β, βe^{iφ}
with a common energy solves

    β^p [E²(β) - E²(βe^{iφ})] = 0,

in which E no longer appears. Each root is a candidate GBZ point. It is
admitted when it and its partner are the M-th and (M+1)-th roots by
magnitude of the characteristic polynomial β^p [E²(β) - E²], where p
(= M) is the pole order of E²(β). Sweeping φ over a symmetric grid
yields both members of every admitted pair, and sorting the admitted
points by arg β closes the contour.

E²(β) = -det H(β) is held exactly as a Laurent polynomial in β built from
the hopping blocks, so the polynomials here carry no truncation error.

The non-Bloch winding ν_tot sums the discrete biorthogonal Berry phases
of both bands around the contour.
"""

import csv
import math

from collections import namedtuple

import numpy as np

from nhbp import (
    MSG_DEBUG,
    DegenerateModelError,
    DVector,
    EmptyContourError,
    GapClosedError,
    ModelError,
    ModelSpec,
    branch_eigenvector,
    continuous_band_signs,
    d_vector,
    hopping_blocks,
    pbc_energy,
    post_message,
)

__all__ = [
    "CharPoly",
    "GbzContour",
    "NonBlochWinding",
    "DEFAULT_N_PHI",
    "ADMISSIBILITY_TOL",
    "energy_squared_laurent",
    "char_polynomial",
    "phi_polynomial",
    "poly_roots",
    "gbz_contour",
    "obc_bands_from_gbz",
    "contour_radius",
    "non_bloch_winding",
    "CONTOUR_COLUMNS",
    "write_contour_csv",
]

CharPoly = namedtuple("CharPoly", ("coefficients", "degree", "pole_order"))
CharPoly.__doc__ = """
A polynomial in β with ascending complex coefficients, trimmed so that
the leading one is nonzero. pole_order is the power p of β that was
multiplied in to clear the negative powers.
"""

GbzContour = namedtuple("GbzContour", ("phis", "betas", "closure_gap"))
GbzContour.__doc__ = """
The admitted β (ordered by arg β) with the sweep phase φ that produced
each. closure_gap is |β_last - β_first|.
"""

NonBlochWinding = namedtuple("NonBlochWinding", ("nu_total", "nu_imag", "branch_data"))
NonBlochWinding.__doc__ = """
nu_total is the sum of the band windings, unrounded. nu_imag is the
discarded imaginary part, and branch_data the accumulated phase of each
band (as followed from the first contour point).
"""

DEFAULT_N_PHI = 512
ADMISSIBILITY_TOL = 1e-6

MIN_N_PHI = 64
MIN_WINDING_POINTS = 128

_TRIM_RELATIVE_TOL = 1e-14
_GAP_TOL = 1e-10


def energy_squared_laurent(spec: ModelSpec, transverse_k: float | None = None) -> np.ndarray:
    """
    :return: The coefficients c_{-2}, ..., c_2 of E²(β) = Σ c_m β^m.
    """
    blocks = hopping_blocks(spec, transverse_k)

    def entry(i, j):
        # Powers β^-1, β^0, β^1
        return np.array([blocks.forward[i, j], blocks.onsite[i, j], blocks.backward[i, j]])

    det = np.convolve(entry(0, 0), entry(1, 1)) - np.convolve(entry(0, 1), entry(1, 0))
    return -det


def _trimmed(coefficients: np.ndarray, pole_order: int, what: str) -> CharPoly:
    coefficients = np.asarray(coefficients, dtype=complex)
    scale = np.max(np.abs(coefficients)) if coefficients.size else 0.0
    if scale == 0.0:
        raise DegenerateModelError(f"The {what} vanishes identically", {"polynomial": what})

    significant = np.flatnonzero(np.abs(coefficients) > _TRIM_RELATIVE_TOL * scale)
    low, high = significant[0], significant[-1]
    trimmed = coefficients[low : high + 1]
    return CharPoly(trimmed, len(trimmed) - 1, pole_order - int(low))


def char_polynomial(
    spec: ModelSpec, transverse_k: float | None, energy_squared: complex
) -> CharPoly:
    """
    β^p [E²(β) - E²] for a given E², whose roots are the β of all states
    with that energy.

    :raises DegenerateModelError: If it vanishes identically.
    """
    coefficients = energy_squared_laurent(spec, transverse_k).astype(complex)
    coefficients[2] -= energy_squared
    return _trimmed(coefficients, 2, "characteristic polynomial")


def _phi_polynomial_from_laurent(laurent: np.ndarray, phi: float) -> CharPoly:
    # Each c_m β^m (1 - e^{imφ}) divided by the common (1 - e^{-iφ})
    phase = complex(math.cos(phi), math.sin(phi))
    factors = np.array(
        [1 + phase.conjugate(), 1, 0, -phase, -phase * (1 + phase)],
        dtype=complex,
    )
    return _trimmed(laurent * factors, 2, "φ-polynomial")


def phi_polynomial(spec: ModelSpec, transverse_k: float | None, phi: float) -> CharPoly:
    """
    β^p [E²(β) - E²(βe^{iφ})] with the β-independent factor (1 - e^{-iφ})
    cancelled. β-dependent factors are kept.

    :param phi: The sweep phase, in (0, 2π).
    :raises ModelError: If phi is outside (0, 2π).
    :raises DegenerateModelError: If the polynomial vanishes identically.
    """
    if not 0 < phi < 2 * math.pi:
        raise ModelError(f"phi must be in (0, 2π), got {phi}")
    return _phi_polynomial_from_laurent(energy_squared_laurent(spec, transverse_k), phi)


def poly_roots(poly: CharPoly) -> np.ndarray:
    """
    All roots, with multiplicity, from the eigenvalues of the companion
    matrix. Each is polished by one Newton step, kept only if it reduces
    the residual.

    :raises ModelError: For constant polynomials.
    """
    coefficients = np.asarray(poly.coefficients, dtype=complex)
    if len(coefficients) < 2:
        raise ModelError("Root finding needs a polynomial of degree >= 1")

    roots = np.polynomial.polynomial.polyroots(coefficients).astype(complex)
    derivative = np.polynomial.polynomial.polyder(coefficients)

    values = np.polynomial.polynomial.polyval(roots, coefficients)
    slopes = np.polynomial.polynomial.polyval(roots, derivative)
    with np.errstate(divide="ignore", invalid="ignore"):
        polished = roots - values / slopes
    polished_values = np.polynomial.polynomial.polyval(polished, coefficients)

    better = np.isfinite(polished) & (np.abs(polished_values) < np.abs(values))
    roots[better] = polished[better]
    return roots


def _admission_mismatch(spec, transverse_k, laurent, beta) -> float:
    """
    Relative distance of |β| from the M-th and (M+1)-th root magnitudes of
    the characteristic polynomial at E²(β).
    """
    energy_squared = np.polynomial.polynomial.polyval(beta, laurent) / beta**2
    poly = char_polynomial(spec, transverse_k, energy_squared)
    magnitudes = np.sort(np.abs(poly_roots(poly)))
    m = poly.pole_order
    if not 0 < m < len(magnitudes):
        return math.inf
    radius = abs(beta)
    return max(abs(radius - magnitudes[m - 1]), abs(radius - magnitudes[m])) / radius


def gbz_contour(
    spec: ModelSpec,
    transverse_k: float | None = None,
    n_phi: int = DEFAULT_N_PHI,
    tolerance: float = ADMISSIBILITY_TOL,
) -> GbzContour:
    """
    Traces the GBZ by sweeping φ = 2πj/n_phi for j = 1 .. n_phi - 1.

    The equal-magnitude condition holds for every candidate by
    construction, so admission only tests the ordering of the roots and
    holds over whole φ-intervals. No refinement in φ is needed.

    :param n_phi: The φ-grid size, at least 64.
    :param tolerance: The relative magnitude tolerance for admission.
    :raises EmptyContourError: If nothing is admitted. The diagnostics
      hold the smallest mismatch found.
    """
    if n_phi < MIN_N_PHI:
        raise ModelError(f"n_phi must be >= {MIN_N_PHI}, got {n_phi}")
    if not tolerance > 0:
        raise ModelError(f"tolerance must be positive, got {tolerance}")

    laurent = energy_squared_laurent(spec, transverse_k)
    phis = []
    betas = []
    smallest_mismatch = math.inf

    for j in range(1, n_phi):
        phi = 2 * math.pi * j / n_phi
        for beta in poly_roots(_phi_polynomial_from_laurent(laurent, phi)):
            if beta == 0 or not np.isfinite(beta):
                continue
            mismatch = _admission_mismatch(spec, transverse_k, laurent, complex(beta))
            smallest_mismatch = min(smallest_mismatch, mismatch)
            if mismatch < tolerance:
                phis.append(phi)
                betas.append(complex(beta))

    if not betas:
        raise EmptyContourError(
            "No admissible β pairs were found",
            {
                "n_phi": int(n_phi),
                "tolerance": float(tolerance),
                "smallest_mismatch": float(smallest_mismatch),
            },
        )

    betas = np.array(betas)
    phis = np.array(phis)
    order = np.argsort(np.mod(np.angle(betas), 2 * math.pi), kind="stable")
    betas = betas[order]
    phis = phis[order]
    closure_gap = float(abs(betas[-1] - betas[0]))

    post_message(
        f"GBZ: {len(betas)} points from {n_phi} phases, closure gap {closure_gap:.3g}",
        MSG_DEBUG,
    )
    return GbzContour(phis, betas, closure_gap)


def contour_radius(contour: GbzContour) -> float:
    """
    The geometric mean of |β| over the contour. Γ for a circular GBZ, and
    the imaginary gauge radius used to balance longer-ranged OBC chains.
    """
    return float(np.exp(np.mean(np.log(np.abs(contour.betas)))))


def _momenta(betas: np.ndarray) -> np.ndarray:
    return -1j * np.log(betas)


def obc_bands_from_gbz(
    spec: ModelSpec, contour: GbzContour, transverse_k: float | None = None
) -> list:
    """
    The OBC bulk bands, from the model evaluated at the complex momenta
    k = -i ln β of the contour.

    :return: A list of (β, +E, -E).
    """
    if len(contour.betas) == 0:
        raise ModelError("The contour is empty")
    energies = pbc_energy(d_vector(spec, _momenta(contour.betas), transverse_k))
    return [(complex(b), complex(e), -complex(e)) for b, e in zip(contour.betas, energies)]


def non_bloch_winding(
    spec: ModelSpec,
    contour: GbzContour,
    transverse_k: float | None = None,
    biorthogonal: bool = True,
) -> NonBlochWinding:
    """
    ν_tot = (1/2π) Im Σ ln z_j summed over every link of both bands, with

        z_j = ⟨u_L(β_j)|u_R(β_j+1)⟩ / ⟨u_L(β_j)|u_R(β_j)⟩.

    Bands are followed by continuity of E around the contour. Where the
    two bands exchange on going round once, the closing link joins each
    band to the other.

    :param biorthogonal: If False, right vectors are used in the bra too.
    :raises ModelError: If the contour has fewer than 128 points or is not
      closed.
    :raises GapClosedError: If E vanishes on the contour.
    """
    betas = np.asarray(contour.betas, dtype=complex)
    if len(betas) < MIN_WINDING_POINTS:
        raise ModelError(
            f"Winding needs >= {MIN_WINDING_POINTS} contour points, got {len(betas)}"
        )
    steps = np.abs(np.diff(betas))
    if contour.closure_gap > 2 * steps.max():
        raise ModelError(
            f"The contour is not closed: gap {contour.closure_gap:.3g},"
            f" largest step {steps.max():.3g}"
        )

    d = d_vector(spec, _momenta(betas), transverse_k)
    energies = np.asarray(pbc_energy(d))
    smallest = float(np.min(np.abs(energies)))
    if smallest < _GAP_TOL:
        j = int(np.argmin(np.abs(energies)))
        raise GapClosedError(
            "The OBC bands touch on the GBZ",
            {"beta": [float(betas[j].real), float(betas[j].imag)], "abs_energy": smallest},
        )

    signs = continuous_band_signs(energies)
    wrap = signs[-1] * energies[-1]
    wraps_swapped = abs(wrap - energies[0]) > abs(wrap + energies[0])

    points = [DVector(d.dx[j], d.dy[j], d.dz[j]) for j in range(len(betas))]
    transposed = [DVector(p.dx, -p.dy, p.dz) for p in points]

    def vectors(band):
        bands = band * signs * energies
        right = [branch_eigenvector(p, e) for p, e in zip(points, bands)]
        if biorthogonal:
            bras = [branch_eigenvector(p, e) for p, e in zip(transposed, bands)]
        else:
            bras = [r.conj() for r in right]
        return right, bras

    bands = {band: vectors(band) for band in (1, -1)}

    branch_data = []
    total_log = 0j
    for band in (1, -1):
        right, bras = bands[band]
        closing = bands[-band][0][0] if wraps_swapped else right[0]
        accumulated = 0j
        for j, bra in enumerate(bras):
            following = right[j + 1] if j + 1 < len(right) else closing
            accumulated += np.log(np.dot(bra, following) / np.dot(bra, right[j]))
        branch_data.append(float(accumulated.imag))
        total_log += accumulated

    nu_total = total_log.imag / (2 * math.pi)
    nu_imag = -total_log.real / (2 * math.pi)
    post_message(
        f"ν_tot = {nu_total:.6g} (imaginary part {nu_imag:.3g})"
        f"{', bands exchange on the contour' if wraps_swapped else ''}",
        MSG_DEBUG,
    )
    return NonBlochWinding(float(nu_total), float(nu_imag), tuple(branch_data))


CONTOUR_COLUMNS = ("phi", "re_beta", "im_beta", "abs_beta")


def write_contour_csv(path, contour: GbzContour):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CONTOUR_COLUMNS)
        for phi, beta in zip(contour.phis, contour.betas):
            writer.writerow(
                (repr(float(phi)), repr(float(beta.real)), repr(float(beta.imag)), repr(float(abs(beta))))
            )
