# SPDX-License-Identifier: MIT
# Copyright 2025 The nhbp authors

"""
Closed-form invariants and eigenvalue vorticity

For t3 = 0, the SSH chain and the x-OBC Chern model at fixed ky are the
same two-site chain with

    intra-cell hopping  t1           or  t+ = t1 + δ cos ky
    inter-cell hopping  t2           or  t- = t1 - δ cos ky
    onsite potential    Δ            or  Δ sin ky

and everything about it is known in closed form: the GBZ radius Γ, the
edge-mode ratios r_R and r_L, the OBC bands, the bulk standing waves
and the polarization of the edge mode. The functions here accept either
variant and use this mapping.

The vorticity helpers measure the winding of Arg(E1 - E2) around a
sampled loop. The PBC EP locators and the OBC gap-closing conditions of
the Chern model are also here, along with a brute-force scan of the
delocalisation condition that arbitrates them.
"""

import math

from collections import namedtuple

import numpy as np

from nhbp import (
    MSG_DEBUG,
    MSG_WARNING,
    VARIANT_CHERN_X_OBC,
    VARIANT_SSH_1D,
    AnalyticRegimeError,
    EPOnLoopError,
    ModelError,
    ModelSpec,
    QuantizationError,
    RatioSingularityError,
    SingularConditionError,
    SingularRadiusError,
    UnderResolvedLoopError,
    VariantMismatchError,
    continuous_band_signs,
    d_chern_x,
    d_chern_y,
    d_ssh,
    d_vector,
    pbc_energy,
    post_message,
    validate_model_spec,
)
from nhbp_realspace import MODE_BULK, MODE_EDGE_LEFT, MODE_EDGE_RIGHT

__all__ = [
    "EdgeRatios",
    "AnalyticObcBand",
    "VorticityResult",
    "EpCandidates",
    "effective_chain",
    "gbz_radius",
    "gbz_radius_ssh",
    "gbz_radius_chern",
    "edge_ratios",
    "edge_localization",
    "expected_edge_energy",
    "obc_gap_closings",
    "scan_delocalization_points",
    "analytic_obc_energy",
    "analytic_obc_band",
    "bulk_state_amplitudes",
    "bulk_state_ansatz",
    "analytic_bp",
    "vorticity",
    "pbc_loop_vorticity",
    "ep_candidates",
    "pbc_ep_locations",
]

EdgeRatios = namedtuple("EdgeRatios", ("r_R", "r_L", "product_abs"))
EdgeRatios.__doc__ = """
Per-cell amplitude ratios of the right and left edge vectors, and
|r_L* r_R|. The biorthogonal edge density goes as (r_L* r_R)^n, so the
mode sits at cell 1 below 1, at cell N above 1 and is delocalised at 1.
"""

AnalyticObcBand = namedtuple("AnalyticObcBand", ("theta", "energy", "eta", "gamma_radius"))

VorticityResult = namedtuple("VorticityResult", ("nu_12", "unwrapped_phase"))

EffectiveChain = namedtuple("EffectiveChain", ("intra", "inter", "onsite", "gamma"))

EpCandidates = namedtuple("EpCandidates", ("points", "rejected", "singular_branches"))
EpCandidates.__doc__ = """
Accepted (kx, ky) EPs, rejected (kx, ky, |E|) candidates and the kx of
the branches skipped as singular.
"""

_SINGULAR_TOL = 1e-12
_DELOCALIZED_TOL = 1e-12
_NEAR_UNITY = 1e-6
_QUANTIZATION_TOL = 1e-9
_EP_ENERGY_TOL = 1e-6

MIN_LOOP_SAMPLES = 64
MAX_LOOP_SAMPLES = 2**16


def effective_chain(spec: ModelSpec, ky: float | None = None) -> EffectiveChain:
    """
    The two-site chain equivalent to a t3 = 0 model.

    :param ky: Required for VARIANT_CHERN_X_OBC, ignored for VARIANT_SSH_1D.
    :raises AnalyticRegimeError: If t3 != 0 or the variant has no closed form.
    """
    spec = validate_model_spec(spec)
    if spec.variant not in (VARIANT_SSH_1D, VARIANT_CHERN_X_OBC):
        raise AnalyticRegimeError(f"No closed form for '{spec.variant}' models")
    if spec.t3 != 0:
        raise AnalyticRegimeError(f"Closed forms need t3 = 0, got t3 = {spec.t3}")

    if spec.variant == VARIANT_SSH_1D:
        return EffectiveChain(spec.t1, spec.t2, spec.delta_onsite, spec.gamma)

    if ky is None:
        raise ModelError("ky is required for chern_x_obc models")
    ky = float(ky)
    return EffectiveChain(
        spec.t1 + spec.delta_stagger * math.cos(ky),
        spec.t1 - spec.delta_stagger * math.cos(ky),
        spec.delta_onsite * math.sin(ky),
        spec.gamma,
    )


#
# GBZ radius and edge modes
#


def gbz_radius(spec: ModelSpec, ky: float | None = None) -> float:
    """
    Γ = √(|2t - γ| / |2t + γ|), with t the intra-cell hopping.

    :raises SingularRadiusError: If |2t + γ| vanishes.
    """
    chain = effective_chain(spec, ky)
    numerator = abs(2 * chain.intra - chain.gamma)
    denominator = abs(2 * chain.intra + chain.gamma)
    if denominator < _SINGULAR_TOL:
        raise SingularRadiusError(
            "The GBZ radius diverges: 2t + γ = 0",
            {"intra": chain.intra, "gamma": chain.gamma},
        )
    return math.sqrt(numerator / denominator)


def gbz_radius_ssh(spec: ModelSpec) -> float:
    if spec.variant != VARIANT_SSH_1D:
        raise VariantMismatchError(f"Expected a {VARIANT_SSH_1D} model, got '{spec.variant}'")
    return gbz_radius(spec)


def gbz_radius_chern(spec: ModelSpec, ky: float) -> float:
    if spec.variant != VARIANT_CHERN_X_OBC:
        raise VariantMismatchError(
            f"Expected a {VARIANT_CHERN_X_OBC} model, got '{spec.variant}'"
        )
    return gbz_radius(spec, ky)


def edge_ratios(spec: ModelSpec, ky: float | None = None) -> EdgeRatios:
    """
    r_R = -(t - γ/2)/t', r_L = -(t + γ/2)/t' for the mode with energy dz
    on the A sites of a chain terminated on A at both ends.

    :raises RatioSingularityError: If the inter-cell hopping t' vanishes.
    """
    chain = effective_chain(spec, ky)
    if abs(chain.inter) < _SINGULAR_TOL:
        raise RatioSingularityError(
            "The edge ratios diverge: the inter-cell hopping vanishes",
            {"inter": chain.inter, "ky": ky},
        )
    r_right = -(chain.intra - chain.gamma / 2) / chain.inter
    r_left = -(chain.intra + chain.gamma / 2) / chain.inter
    return EdgeRatios(r_right, r_left, abs(r_left * r_right))


def edge_localization(ratios: EdgeRatios, tolerance: float = _DELOCALIZED_TOL) -> str:
    """
    :return: MODE_EDGE_LEFT for a mode at cell 1, MODE_EDGE_RIGHT for one
      at cell N, MODE_BULK where it merges with the bulk.
    """
    if abs(ratios.product_abs - 1) <= tolerance:
        return MODE_BULK
    return MODE_EDGE_LEFT if ratios.product_abs < 1 else MODE_EDGE_RIGHT


def expected_edge_energy(spec: ModelSpec, transverse_k: float | None = None) -> float | None:
    """
    The energy dz of the A-terminated edge mode: -Δ for the SSH chain and
    -Δ sin ky for the x-OBC Chern model. None for the y-OBC models.
    """
    if spec.variant == VARIANT_SSH_1D:
        return -spec.delta_onsite
    if spec.variant == VARIANT_CHERN_X_OBC and transverse_k is not None:
        return -spec.delta_onsite * math.sin(transverse_k)
    return None


def _require_chern_x(spec: ModelSpec):
    if spec.variant != VARIANT_CHERN_X_OBC:
        raise VariantMismatchError(
            f"Expected a {VARIANT_CHERN_X_OBC} model, got '{spec.variant}'"
        )
    if spec.t3 != 0:
        raise AnalyticRegimeError(f"Closed forms need t3 = 0, got t3 = {spec.t3}")


def _unique_angles(angles) -> list:
    unique = []
    for angle in sorted(a % (2 * math.pi) for a in angles):
        if not unique or angle - unique[-1] > _SINGULAR_TOL:
            unique.append(angle)
    if len(unique) > 1 and unique[0] + 2 * math.pi - unique[-1] <= _SINGULAR_TOL:
        unique.pop()
    return unique


def obc_gap_closings(spec: ModelSpec) -> list:
    """
    The ky in [0, 2π) where the OBC gap of the x-OBC Chern model closes,
    i.e. where |r_L* r_R| = 1:

        cos ky = γ² / (16 δ t1)
        cos ky = ±√(γ²/8 - t1²) / δ

    :return: The sorted ky, 0, 2, 4 or 6 of them.
    :raises ModelError: If δ or t1 vanishes.
    """
    spec = validate_model_spec(spec)
    _require_chern_x(spec)
    t1, stagger, gamma = spec.t1, spec.delta_stagger, spec.gamma
    if stagger == 0 or t1 == 0:
        raise ModelError("Gap closings need nonzero δ and t1")

    cosines = [gamma**2 / (16 * stagger * t1)]
    radicand = gamma**2 / 8 - t1**2
    if radicand >= 0:
        root = math.sqrt(radicand) / stagger
        cosines.extend((root, -root))

    angles = []
    for cosine in cosines:
        if -1 <= cosine <= 1:
            angle = math.acos(cosine)
            angles.extend((angle, 2 * math.pi - angle))
    return _unique_angles(angles)


def scan_delocalization_points(spec: ModelSpec, n_ky: int = 10000) -> list:
    """
    Brute-force roots of |r_L* r_R| - 1 over a periodic grid of n_ky
    momenta, located by linear interpolation between sign changes. Points
    where the ratios diverge are skipped, and tangential touches are not
    seen.

    :return: The sorted ky in [0, 2π).
    """
    spec = validate_model_spec(spec)
    _require_chern_x(spec)
    if n_ky < 4:
        raise ModelError(f"n_ky must be >= 4, got {n_ky}")

    ky = 2 * math.pi * np.arange(n_ky) / n_ky
    t_plus = spec.t1 + spec.delta_stagger * np.cos(ky)
    t_minus = spec.t1 - spec.delta_stagger * np.cos(ky)
    with np.errstate(divide="ignore", invalid="ignore"):
        excess = np.abs((t_plus - spec.gamma / 2) * (t_plus + spec.gamma / 2)) / t_minus**2 - 1

    following = np.roll(excess, -1)
    following_ky = np.roll(ky, -1)
    following_ky[-1] += 2 * math.pi

    roots = [float(k) for k, e in zip(ky, excess) if e == 0]
    crossing = np.isfinite(excess) & np.isfinite(following) & (excess * following < 0)
    for j in np.flatnonzero(crossing):
        fraction = excess[j] / (excess[j] - following[j])
        roots.append(float(ky[j] + fraction * (following_ky[j] - ky[j])))
    return _unique_angles(roots)


#
# OBC bands and states
#


def analytic_obc_energy(spec: ModelSpec, ky: float | None, theta: float) -> complex:
    """
    The principal root of

        E² = t² + t'² - γ²/4 + u² + t' [Γ e^{iθ} (t + γ/2) + e^{-iθ} (t - γ/2) / Γ]

    with t, t', u the intra, inter and onsite terms. This is E² at the
    complex momentum θ - i ln Γ.
    """
    chain = effective_chain(spec, ky)
    radius = gbz_radius(spec, ky)
    if radius < _SINGULAR_TOL:
        raise SingularRadiusError(
            "The GBZ radius vanishes: 2t - γ = 0", {"intra": chain.intra, "gamma": chain.gamma}
        )
    phase = complex(math.cos(theta), math.sin(theta))
    energy_squared = (
        chain.intra**2
        + chain.inter**2
        - chain.gamma**2 / 4
        + chain.onsite**2
        + chain.inter
        * (
            radius * phase * (chain.intra + chain.gamma / 2)
            + phase.conjugate() * (chain.intra - chain.gamma / 2) / radius
        )
    )
    return complex(np.sqrt(complex(energy_squared)))


def analytic_obc_band(spec: ModelSpec, ky: float | None, theta: float) -> AnalyticObcBand:
    """
    The OBC band point at θ, with η the d-vector at k = θ - i ln Γ.
    """
    radius = gbz_radius(spec, ky)
    energy = analytic_obc_energy(spec, ky, theta)
    eta = tuple(complex(c) for c in d_vector(spec, theta - 1j * math.log(radius), ky))
    return AnalyticObcBand(float(theta), energy, eta, radius)


def _standing_wave(spec, ky, theta, branch):
    chain = effective_chain(spec, ky)
    if abs(chain.intra + chain.gamma / 2) < _SINGULAR_TOL:
        raise SingularRadiusError(
            "Standing waves diverge: t + γ/2 = 0", {"intra": chain.intra, "gamma": chain.gamma}
        )
    ratio = (chain.intra - chain.gamma / 2) / (chain.intra + chain.gamma / 2)
    if abs(ratio) < _SINGULAR_TOL:
        raise SingularRadiusError(
            "Standing waves collapse: t - γ/2 = 0", {"intra": chain.intra, "gamma": chain.gamma}
        )
    if branch not in (1, -1):
        raise ModelError(f"branch must be +1 or -1, got {branch}")

    size = np.sqrt(complex(ratio))
    beta_1 = size * complex(math.cos(theta), math.sin(theta))
    beta_2 = size * complex(math.cos(theta), -math.sin(theta))

    d = d_vector(spec, -1j * np.log(beta_1), ky)
    energy = branch * pbc_energy(d)
    dz = complex(d.dz)

    def h_ba(beta):
        return chain.intra - chain.gamma / 2 + chain.inter * beta

    return beta_1, beta_2, h_ba(beta_1), h_ba(beta_2), dz + energy


def bulk_state_amplitudes(
    spec: ModelSpec, ky: float | None, theta: float, cells, branch: int = 1
) -> tuple:
    """
    The A and B amplitudes of the standing wave

        A_n = (dz ± E) (C1 β1^n + C2 β2^n)
        B_n = C1 β1^n h_BA(β1) + C2 β2^n h_BA(β2)

    with β1,2 = s e^{±iθ}, s² = (t - γ/2)/(t + γ/2), h_BA(β) = t - γ/2 + t'β,
    C1 = h_BA(β2) and C2 = -h_BA(β1), at the given cells. B_0 vanishes
    identically and B_N vanishes when θ = πj/N.

    :return: (A, B) arrays over cells.
    """
    beta_1, beta_2, h_1, h_2, prefactor = _standing_wave(spec, ky, theta, branch)
    cells = np.asarray(cells)
    wave_1 = h_2 * beta_1**cells
    wave_2 = -h_1 * beta_2**cells
    return prefactor * (wave_1 + wave_2), wave_1 * h_1 + wave_2 * h_2


def bulk_state_ansatz(
    spec: ModelSpec, ky: float | None, theta: float, n_cells: int, branch: int = 1
) -> np.ndarray:
    """
    The unnormalised bulk eigenvector of the chain terminated on A at both
    ends (2N - 1 sites), ordered A1, B1, ..., B(N-1), AN.

    :param theta: Must be πj/N for an integer j in [1, N - 1].
    :param branch: +1 or -1, selecting ±E.
    :raises QuantizationError: If theta is off the grid.
    """
    if n_cells < 2:
        raise ModelError(f"n_cells must be >= 2, got {n_cells}")
    j = round(theta * n_cells / math.pi)
    if not 1 <= j <= n_cells - 1 or abs(theta - math.pi * j / n_cells) > _QUANTIZATION_TOL:
        raise QuantizationError(
            f"theta = {theta} is not πj/{n_cells} for an integer j in [1, {n_cells - 1}]"
        )

    cells = np.arange(1, n_cells + 1)
    a_amplitudes, b_amplitudes = bulk_state_amplitudes(spec, ky, theta, cells, branch)
    vector = np.empty(2 * n_cells - 1, dtype=complex)
    vector[0::2] = a_amplitudes
    vector[1::2] = b_amplitudes[:-1]
    return vector


def _mean_position(x: complex, n_cells: int) -> complex:
    """Σ n x^n / Σ x^n over n = 1..N, for |x| away from 1."""
    if abs(abs(x) - 1) < _NEAR_UNITY:
        cells = np.arange(1, n_cells + 1)
        powers = x**cells
        return complex((cells * powers).sum() / powers.sum())
    if abs(x) > 1:
        return n_cells + 1 - _mean_position(1 / x, n_cells)
    x_n = x**n_cells
    return (1 - (n_cells + 1) * x_n + n_cells * x_n * x) / ((1 - x) * (1 - x_n))


def analytic_bp(spec: ModelSpec, ky: float | None, n_cells: int) -> float:
    """
    P = 1 - (1/N) Σ n x^n / Σ x^n with x = r_L* r_R, summed over n = 1..N in
    closed form. No diagonalisation is done, so N can be large.

    At |x| = 1 the mode is delocalised and P = 1 - (N+1)/(2N), which is
    reported as not quantized.
    """
    if n_cells < 1:
        raise ModelError(f"n_cells must be positive, got {n_cells}")
    ratios = edge_ratios(spec, ky)
    x = complex(ratios.r_L).conjugate() * ratios.r_R

    if edge_localization(ratios) == MODE_BULK:
        post_message(
            f"The edge mode is delocalised (|r_L* r_R| = 1), P is not quantized (ky={ky})",
            MSG_WARNING,
        )
        mean = (n_cells + 1) / 2
    else:
        mean = _mean_position(x, n_cells).real

    return 1 - mean / n_cells


#
# Vorticity
#


def vorticity(energies_1, energies_2) -> VorticityResult:
    """
    ν = (1/2π) ∮ d Arg(E1 - E2) over a sampled closed loop.

    The loop is closed back onto either E1 - E2 or E2 - E1 at the first
    sample, whichever is nearer in phase, so bands that exchange round a
    single EP give a half-integer.

    :raises ModelError: For fewer than 64 samples or mismatched lengths.
    :raises EPOnLoopError: If |E1 - E2| < 1e-12 at a sample.
    :raises UnderResolvedLoopError: If a phase step exceeds π/2.
    """
    if len(energies_1) != len(energies_2):
        raise ModelError("The two bands must be sampled at the same points")
    differences = np.asarray(energies_1, dtype=complex) - np.asarray(energies_2, dtype=complex)
    if len(differences) < MIN_LOOP_SAMPLES:
        raise ModelError(f"A loop needs >= {MIN_LOOP_SAMPLES} samples, got {len(differences)}")

    gaps = np.abs(differences)
    if gaps.min() < 1e-12:
        j = int(np.argmin(gaps))
        raise EPOnLoopError(
            "The bands coalesce on the loop", {"sample": j, "gap": float(gaps[j])}
        )

    steps = np.angle(differences[1:] * differences[:-1].conj())
    last = differences[-1].conj()
    closing = min(
        (np.angle(differences[0] * last), np.angle(-differences[0] * last)), key=abs
    )
    steps = np.append(steps, closing)

    largest = float(np.max(np.abs(steps)))
    if largest > math.pi / 2:
        raise UnderResolvedLoopError(
            f"A phase step of {largest:.3g} exceeds π/2",
            {"samples": len(differences), "largest_step": largest},
        )

    unwrapped = float(np.angle(differences[0])) + np.concatenate(([0.0], np.cumsum(steps)))
    return VorticityResult(math.fsum(steps) / (2 * math.pi), unwrapped.tolist())


def _loop_energies(spec: ModelSpec, center, radius: float, n_samples: int) -> np.ndarray:
    angles = 2 * math.pi * np.arange(n_samples) / n_samples
    if spec.variant == VARIANT_SSH_1D:
        return np.asarray(pbc_energy(d_ssh(spec, complex(center) + radius * np.exp(1j * angles))))
    kx0, ky0 = center
    kx = kx0 + radius * np.cos(angles)
    ky = ky0 + radius * np.sin(angles)
    if spec.variant == VARIANT_CHERN_X_OBC:
        return np.asarray(pbc_energy(d_chern_x(spec, kx, ky)))
    return np.asarray(pbc_energy(d_chern_y(spec, kx, ky)))


def pbc_loop_vorticity(
    spec: ModelSpec, center, radius: float, n_samples: int = 256
) -> VorticityResult:
    """
    The vorticity of the PBC bands ±E on a circle in momentum space: the
    complex k plane for the SSH chain, the real (kx, ky) plane otherwise.
    The bands are followed by continuity and the sampling is doubled, up
    to 2^16 points, until the phase is resolved.

    :param center: A complex k, or a (kx, ky) pair for the 2d variants.
    """
    spec = validate_model_spec(spec)
    if not radius > 0:
        raise ModelError(f"radius must be positive, got {radius}")
    n_samples = max(int(n_samples), MIN_LOOP_SAMPLES)

    while True:
        energies = _loop_energies(spec, center, radius, n_samples)
        band = continuous_band_signs(energies) * energies
        try:
            return vorticity(band, -band)
        except UnderResolvedLoopError:
            if n_samples * 2 > MAX_LOOP_SAMPLES:
                raise
            n_samples *= 2
            post_message(f"Refining the vorticity loop to {n_samples} samples", MSG_DEBUG)


#
# PBC exceptional points
#


def ep_candidates(spec: ModelSpec) -> EpCandidates:
    """
    Solves for the EPs of the PBC x-OBC Chern model bands, at

        kx = 0:  sin² ky = (γ²/4 - 4t1²) / Δ²
        kx = π:  sin² ky = (γ²/4 - 4δ²) / (Δ² - 4δ²)

    A branch whose denominator vanishes (Δ = 0 for kx = 0, Δ² = 4δ² for
    kx = π) has no isolated EPs and is listed in singular_branches.

    Candidates are accepted if their |E| is below 1e-6 and d is nonzero.
    |E| is the square root of |E²|, so a rounding-level E² of 1e-16 shows
    up as |E| ~ 1e-8.

    Nothing is posted, see pbc_ep_locations.
    """
    spec = validate_model_spec(spec)
    _require_chern_x(spec)
    onsite_sq = spec.delta_onsite**2
    stagger_sq = 4 * spec.delta_stagger**2
    quarter_gamma_sq = spec.gamma**2 / 4

    branches = []
    singular = []
    if abs(onsite_sq) < _SINGULAR_TOL:
        singular.append(0.0)
    else:
        branches.append((0.0, (quarter_gamma_sq - 4 * spec.t1**2) / onsite_sq))
    if abs(onsite_sq - stagger_sq) < _SINGULAR_TOL:
        singular.append(math.pi)
    else:
        branches.append((math.pi, (quarter_gamma_sq - stagger_sq) / (onsite_sq - stagger_sq)))

    points = []
    rejected = []
    for kx, sin_sq in branches:
        if not 0 <= sin_sq <= 1:
            continue
        angle = math.asin(math.sqrt(sin_sq))
        for ky in _unique_angles((angle, math.pi - angle, math.pi + angle, -angle)):
            d = d_chern_x(spec, kx, ky)
            energy = abs(pbc_energy(d))
            if energy < _EP_ENERGY_TOL:
                # d = 0 is a diagonalisable degeneracy
                if np.abs(np.asarray(d, dtype=complex)).max() > _EP_ENERGY_TOL:
                    points.append((kx, ky))
            else:
                rejected.append((kx, ky, float(energy)))
    return EpCandidates(sorted(points), rejected, singular)


def pbc_ep_locations(spec: ModelSpec) -> list:
    """
    The EPs of the PBC x-OBC Chern model bands, see ep_candidates.
    Singular branches and rejected candidates are reported as warnings.

    :return: The sorted (kx, ky) pairs.
    :raises SingularConditionError: If both branches are singular
      (Δ = δ = 0).
    """
    candidates = ep_candidates(spec)
    if len(candidates.singular_branches) == 2:
        raise SingularConditionError(
            "The EP conditions are singular for Δ = 0 and δ = 0",
            {"delta_onsite": spec.delta_onsite, "delta_stagger": spec.delta_stagger},
        )
    for kx in candidates.singular_branches:
        post_message(f"Skipping the singular kx={kx:.6g} EP branch", MSG_WARNING)
    for kx, ky, energy in candidates.rejected:
        post_message(
            f"Rejected EP candidate kx={kx:.6g}, ky={ky:.6g}: |E| = {energy:.3g}", MSG_WARNING
        )
    return candidates.points
