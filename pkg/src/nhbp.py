# SPDX-License-Identifier: MIT
# Copyright 2025 The nhbp authors

"""
Non-Hermitian Biorthogonal Polarization: model core

Two-band tight-binding models of the form H = d(k)·σ, with the open
boundary imposed along one direction. This module holds everything the
other nhbp modules share:

- Message handlers: the library reports progress and diagnostics by
  posting messages with a severity to any registered handlers.
- The error hierarchy: ModelError (a ValueError) for bad input and
  NumericalError (a RuntimeError) for numerical failures.
- ModelSpec, the model variant plus its couplings, and its plain
  key-value (de)serialisation.
- The d-vector fields for each variant, the Bloch matrix and its PBC
  eigen-system.
- The nearest-cell hopping blocks, from which both the real-space OBC
  matrices and the β-substituted Bloch Hamiltonians are generated.

Momenta are complex throughout, so β = e^{ik} substitution (k -> -i ln β)
reuses the same code.
"""

import math
import sys
import traceback

from collections import namedtuple

import numpy as np


__all__ = [
    "__version__",
    "MSG_DEBUG",
    "MSG_INFO",
    "MSG_WARNING",
    "MSG_FATAL",
    "MSG_SEVERITY_NAMES",
    "add_message_handler",
    "remove_message_handler",
    "message_handlers",
    "post_message",
    "ModelError",
    "VariantMismatchError",
    "AnalyticRegimeError",
    "QuantizationError",
    "NumericalError",
    "NearExceptionalPointError",
    "BiorthogonalBreakdownError",
    "DegenerateModelError",
    "EmptyContourError",
    "GapClosedError",
    "SingularRadiusError",
    "RatioSingularityError",
    "SingularConditionError",
    "EPOnLoopError",
    "UnderResolvedLoopError",
    "VARIANT_SSH_1D",
    "VARIANT_CHERN_X_OBC",
    "VARIANT_CHERN_Y_OBC_A",
    "VARIANT_CHERN_Y_OBC_B",
    "VARIANTS",
    "TWO_D_VARIANTS",
    "MODEL_KEYS",
    "ModelSpec",
    "DVector",
    "HoppingBlocks",
    "validate_model_spec",
    "model_spec_from_mapping",
    "model_spec_to_mapping",
    "is_two_d",
    "d_ssh",
    "d_chern_x",
    "d_chern_y",
    "d_vector",
    "bloch_matrix",
    "pbc_energy",
    "pbc_eigenvectors",
    "pbc_left_eigenvectors",
    "continuous_band_signs",
    "branch_eigenvector",
    "hopping_blocks",
    "bloch_matrix_beta",
]

__version__ = "0.1.0"

MSG_DEBUG = 0
MSG_INFO = 1
MSG_WARNING = 2
MSG_FATAL = 3

MSG_SEVERITY_NAMES = ("DEBUG", "INFO", "WARNING", "FATAL")

#
# Messages
#

__message_handlers = []


def add_message_handler(handler):
    """
    Adds a handler that will be called with any library messages.
    Handlers are called in the order of registration. Exceptions
    raised in a handler will be suppressed to ensure other handlers
    continue to run.

    No checks are made to ensure the handler hasn't already been
    registered.

    :param handler: A callable that will be invoked for each message.
    :type handler: Callable[[str, int], None]
    """
    __message_handlers.append(handler)
    post_message(f"Added message handler: {handler}", MSG_DEBUG)


def remove_message_handler(handler):
    """
    Remove a previously registered message handler.

    :param handler: A previously registered handler.
    :type handler: Callable[[str, int], None]
    :raises ValueError: If the handler was not registered.
    """
    __message_handlers.remove(handler)
    post_message(f"Removed message handler: {handler}", MSG_DEBUG)


def message_handlers() -> tuple:
    """
    Returns the currently registered message handlers.
    """
    return tuple(__message_handlers)


def post_message(msg: str, severity: int = MSG_INFO):
    """
    Post a message to any registered handlers.

    :param msg: A text message, may contain multiple lines.
    :param severity: One of the MSG_* severity constants.
    """
    for i, handler in enumerate(tuple(__message_handlers)):
        # A failing handler does not stop delivery to the rest.
        try:
            handler(msg, severity)
        except Exception:  # pylint: disable=broad-except
            print(f"Exception in message handler {i} {handler}", file=sys.stderr)
            traceback.print_exc()


#
# Errors
#


class ModelError(ValueError):
    """Invalid model input: bad couplings, variants or arguments."""


class VariantMismatchError(ModelError):
    """An operation was given a ModelSpec of a variant it doesn't cover."""


class AnalyticRegimeError(ModelError):
    """A closed form was requested outside the t3 = 0 solvable regime."""


class QuantizationError(ModelError):
    """A bulk-state angle is not on the θ = πj/N grid."""


class NumericalError(RuntimeError):
    """
    A numerical failure. The diagnostics dict holds JSON-serialisable
    details of what went wrong, for reporting.
    """

    def __init__(self, msg: str, diagnostics: dict | None = None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class NearExceptionalPointError(NumericalError):
    """The spectra of H and H† could not be paired."""


class BiorthogonalBreakdownError(NumericalError):
    """A left/right overlap vanished (coalescing eigenvectors)."""


class DegenerateModelError(NumericalError):
    """The couplings make the GBZ polynomial vanish identically."""


class EmptyContourError(NumericalError):
    """No φ produced an admissible β pair."""


class GapClosedError(NumericalError):
    """The OBC bands touch (E = 0) on the GBZ contour."""


class SingularRadiusError(NumericalError):
    """The closed-form GBZ radius has a vanishing denominator."""


class RatioSingularityError(NumericalError):
    """The edge-mode ratios have a vanishing denominator."""


class SingularConditionError(NumericalError):
    """An EP condition has a vanishing denominator."""


class EPOnLoopError(NumericalError):
    """Two bands coalesce on a vorticity loop."""


class UnderResolvedLoopError(NumericalError):
    """The sampling of a vorticity loop is too coarse to unwrap."""


#
# Model specification
#

VARIANT_SSH_1D = "ssh1d"
VARIANT_CHERN_X_OBC = "chern_x_obc"
VARIANT_CHERN_Y_OBC_A = "chern_y_obc_a"
VARIANT_CHERN_Y_OBC_B = "chern_y_obc_b"

VARIANTS = (VARIANT_SSH_1D, VARIANT_CHERN_X_OBC, VARIANT_CHERN_Y_OBC_A, VARIANT_CHERN_Y_OBC_B)
TWO_D_VARIANTS = VARIANTS[1:]

MODEL_KEYS = ("variant", "t1", "t2", "t3", "gamma", "delta_onsite", "delta_stagger")

ModelSpec = namedtuple("ModelSpec", MODEL_KEYS, defaults=(0.0,) * 6)
ModelSpec.__doc__ = """
The model variant and its couplings, in dimensionless energy units.

variant is one of the VARIANT_* constants. gamma is the non-Hermitian
hopping asymmetry γ, delta_onsite the sublattice potential Δ and
delta_stagger the ky-dependent stagger δ. Ssh1d ignores delta_stagger,
the 2d variants ignore t2 and the y-OBC variants also ignore t3.
"""

DVector = namedtuple("DVector", ("dx", "dy", "dz"))

HoppingBlocks = namedtuple("HoppingBlocks", ("onsite", "forward", "backward"))
HoppingBlocks.__doc__ = """
The 2x2 blocks of a nearest-cell chain in the (A, B) sublattice basis.
onsite is H[n, n], forward is H[n+1, n] and backward is H[n, n+1], so
that the Bloch matrix is onsite + forward/β + backward·β.
"""


def is_two_d(spec: ModelSpec) -> bool:
    """:returns: True if the variant needs a transverse momentum."""
    return spec.variant in TWO_D_VARIANTS


def validate_model_spec(spec: ModelSpec) -> ModelSpec:
    """
    Checks the variant is known and every coupling is a finite real.

    :return: The spec, with the couplings coerced to float.
    :raises ModelError: Listing every bad field.
    """
    problems = []
    if spec.variant not in VARIANTS:
        problems.append(f"variant: '{spec.variant}' is not one of {', '.join(VARIANTS)}")

    values = {}
    for key in MODEL_KEYS[1:]:
        value = getattr(spec, key)
        try:
            value = float(value)
        except (TypeError, ValueError):
            problems.append(f"{key}: '{value}' is not a real number")
            continue
        if not math.isfinite(value):
            problems.append(f"{key}: {value} is not finite")
        values[key] = value

    if problems:
        raise ModelError("Invalid model: " + "; ".join(problems))

    return ModelSpec(spec.variant, **values)


def model_spec_from_mapping(mapping: dict) -> ModelSpec:
    """
    Builds a ModelSpec from a plain key-value mapping, as read from a
    config file section. Missing couplings default to 0.

    :param mapping: Keys are a subset of MODEL_KEYS, variant is required.
    :raises ModelError: For unknown keys, a missing variant or invalid
      values.
    """
    unknown = sorted(set(mapping) - set(MODEL_KEYS))
    if unknown:
        raise ModelError(f"Unknown model keys: {', '.join(unknown)}")
    if "variant" not in mapping:
        raise ModelError("Missing model key: variant")
    return validate_model_spec(ModelSpec(**mapping))


def model_spec_to_mapping(spec: ModelSpec) -> dict:
    """:returns: The spec as an ordered plain dict of MODEL_KEYS."""
    return dict(spec._asdict())


def _require_variant(spec: ModelSpec, *variants: str):
    if spec.variant not in variants:
        raise VariantMismatchError(
            f"Expected a {' or '.join(variants)} model, got '{spec.variant}'"
        )


def _as_complex(k):
    return np.asarray(k, dtype=complex)[()]


#
# d-vectors
#


def d_ssh(spec: ModelSpec, k) -> DVector:
    """
    The d-vector of the non-Hermitian SSH / Rice-Mele chain:

        dx = t1 + (t2 + t3) cos k
        dy = (t2 - t3) sin k + iγ/2
        dz = -Δ

    :param k: Momentum, may be complex (or an array of them).
    :raises VariantMismatchError: If spec is not VARIANT_SSH_1D.
    """
    _require_variant(spec, VARIANT_SSH_1D)
    k = _as_complex(k)
    dx = spec.t1 + (spec.t2 + spec.t3) * np.cos(k)
    dy = (spec.t2 - spec.t3) * np.sin(k) + 0.5j * spec.gamma
    dz = -spec.delta_onsite + 0 * k
    return DVector(dx, dy, dz)


def d_chern_x(spec: ModelSpec, kx, ky) -> DVector:
    """
    The d-vector of the stacked Rice-Mele Chern model, with
    t± = t1 ± δ cos ky:

        dx = t+ + (t- + t3) cos kx
        dy = (t- - t3) sin kx + iγ/2
        dz = -Δ sin ky

    :param kx: Momentum along the open direction, may be complex.
    :param ky: Transverse momentum.
    :raises VariantMismatchError: If spec is not VARIANT_CHERN_X_OBC.
    """
    _require_variant(spec, VARIANT_CHERN_X_OBC)
    kx = _as_complex(kx)
    ky = _as_complex(ky)
    t_plus = spec.t1 + spec.delta_stagger * np.cos(ky)
    t_minus = spec.t1 - spec.delta_stagger * np.cos(ky)
    dx = t_plus + (t_minus + spec.t3) * np.cos(kx)
    dy = (t_minus - spec.t3) * np.sin(kx) + 0.5j * spec.gamma
    dz = -spec.delta_onsite * np.sin(ky) + 0 * kx
    return DVector(dx, dy, dz)


def d_chern_y(spec: ModelSpec, kx, ky) -> DVector:
    """
    The d-vector of the Chern models used with the open boundary along y.

    Variant A is the x-OBC model (t3 = 0) regrouped by powers of cos ky:

        dx = t1 (1 + cos kx) + δ (1 - cos kx) cos ky
        dy = t1 sin kx + iγ/2 - δ sin kx cos ky
        dz = -Δ sin ky

    Variant B replaces dy with iγ/2 - δ cos ky.

    :param kx: Transverse momentum.
    :param ky: Momentum along the open direction, may be complex.
    :raises VariantMismatchError: For other variants.
    """
    _require_variant(spec, VARIANT_CHERN_Y_OBC_A, VARIANT_CHERN_Y_OBC_B)
    kx = _as_complex(kx)
    ky = _as_complex(ky)
    cos_kx = np.cos(kx)
    dx = spec.t1 * (1 + cos_kx) + spec.delta_stagger * (1 - cos_kx) * np.cos(ky)
    if spec.variant == VARIANT_CHERN_Y_OBC_A:
        dy = (spec.t1 - spec.delta_stagger * np.cos(ky)) * np.sin(kx) + 0.5j * spec.gamma
    else:
        dy = 0.5j * spec.gamma - spec.delta_stagger * np.cos(ky) + 0 * kx
    dz = -spec.delta_onsite * np.sin(ky) + 0 * kx
    return DVector(dx, dy, dz)


def d_vector(spec: ModelSpec, k, transverse_k=None) -> DVector:
    """
    The d-vector of any variant, addressed by the momentum along the open
    direction (k) and the retained periodic momentum (transverse_k).

    :raises ModelError: If transverse_k is missing for a 2d variant.
    """
    if spec.variant == VARIANT_SSH_1D:
        return d_ssh(spec, k)
    if transverse_k is None:
        raise ModelError(f"A transverse momentum is required for '{spec.variant}'")
    if spec.variant == VARIANT_CHERN_X_OBC:
        return d_chern_x(spec, k, transverse_k)
    return d_chern_y(spec, transverse_k, k)


#
# Bloch matrices
#


def bloch_matrix(d: DVector) -> np.ndarray:
    """
    :return: H = dx σx + dy σy + dz σz as a traceless 2x2 complex array.
    """
    dx, dy, dz = (complex(c) for c in d)
    return np.array([[dz, dx - 1j * dy], [dx + 1j * dy, -dz]], dtype=complex)


def pbc_energy(d: DVector):
    """
    :return: The principal square root of dx² + dy² + dz². The bands are
      ±E, an EP is where this vanishes. Arrays are evaluated elementwise.
    """
    dx, dy, dz = d
    energy = np.sqrt(np.asarray(dx * dx + dy * dy + dz * dz, dtype=complex))
    return complex(energy) if energy.ndim == 0 else energy


_ZERO_VECTOR_TOL = 1e-12
_ZERO_ENERGY_TOL = 1e-8


def branch_eigenvector(d: DVector, energy: complex) -> np.ndarray:
    """
    The unnormalised right eigenvector (dz + E, dx + i dy) of d·σ for the
    signed band energy E (either root of E²).

    Where that form vanishes away from an EP, the equivalent form from
    the other matrix row, (dx - i dy, E - dz), is used instead and a pure
    σz field gets the exact basis vector.
    """
    dx, dy, dz = (complex(c) for c in d)
    energy = complex(energy)
    vector = np.array([dz + energy, dx + 1j * dy], dtype=complex)
    if np.linalg.norm(vector) >= _ZERO_VECTOR_TOL or abs(energy) <= _ZERO_ENERGY_TOL:
        return vector
    if abs(dx - 1j * dy) < _ZERO_VECTOR_TOL:
        return np.array([0, 1], dtype=complex)
    return np.array([dx - 1j * dy, energy - dz], dtype=complex)


def pbc_eigenvectors(d: DVector) -> tuple:
    """
    :return: The unnormalised right eigenvectors (ψ+, ψ-) for +E and -E.
      At an EP both are the same (zero) vector, callers should check
      pbc_energy first.
    """
    energy = pbc_energy(d)
    return branch_eigenvector(d, energy), branch_eigenvector(d, -energy)


def pbc_left_eigenvectors(d: DVector) -> tuple:
    """
    :return: The unnormalised left eigenvectors (φ+, φ-), satisfying
      φ† H = ±E φ†. Since Hᵀ is d·σ with dy -> -dy, these are the
      conjugated right vectors of that field.
    """
    energy = pbc_energy(d)
    transposed = DVector(d.dx, -d.dy, d.dz)
    return (
        branch_eigenvector(transposed, energy).conj(),
        branch_eigenvector(transposed, -energy).conj(),
    )


def continuous_band_signs(energies) -> np.ndarray:
    """
    Signs s_j such that s_j E_j follows one band continuously along a
    sampled path, starting from s_0 = +1. The principal root E jumps
    between the bands where it crosses its branch cut, this undoes that.
    """
    energies = np.asarray(energies, dtype=complex)
    signs = np.ones(len(energies))
    for j in range(1, len(energies)):
        previous = signs[j - 1] * energies[j - 1]
        if abs(previous - energies[j]) > abs(previous + energies[j]):
            signs[j] = -signs[j - 1]
        else:
            signs[j] = signs[j - 1]
    return signs


#
# Real-space blocks
#


def hopping_blocks(spec: ModelSpec, transverse_k: float | None = None) -> HoppingBlocks:
    """
    The onsite and nearest-cell hopping blocks of the chain along the open
    direction, read off the lattice Hamiltonians of each variant.

    :param transverse_k: ky for VARIANT_CHERN_X_OBC, kx for the y-OBC
      variants, ignored for VARIANT_SSH_1D.
    :raises ModelError: If transverse_k is missing for a 2d variant.
    """
    spec = validate_model_spec(spec)
    gamma, delta = spec.gamma, spec.delta_onsite

    if spec.variant in (VARIANT_SSH_1D, VARIANT_CHERN_X_OBC):
        if spec.variant == VARIANT_SSH_1D:
            intra, inter, onsite = spec.t1, spec.t2, delta
        else:
            if transverse_k is None:
                raise ModelError(f"A transverse momentum is required for '{spec.variant}'")
            ky = float(transverse_k)
            intra = spec.t1 + spec.delta_stagger * math.cos(ky)
            inter = spec.t1 - spec.delta_stagger * math.cos(ky)
            onsite = delta * math.sin(ky)
        t3 = spec.t3
        return HoppingBlocks(
            np.array([[-onsite, intra + gamma / 2], [intra - gamma / 2, onsite]], dtype=complex),
            np.array([[0, inter], [t3, 0]], dtype=complex),
            np.array([[0, t3], [inter, 0]], dtype=complex),
        )

    if transverse_k is None:
        raise ModelError(f"A transverse momentum is required for '{spec.variant}'")
    cos_kx = math.cos(float(transverse_k))
    sin_kx = math.sin(float(transverse_k))
    stagger = spec.delta_stagger
    even = spec.t1 * (1 + cos_kx)

    if spec.variant == VARIANT_CHERN_Y_OBC_A:
        ab = even + gamma / 2 - 1j * spec.t1 * sin_kx
        ba = even - gamma / 2 + 1j * spec.t1 * sin_kx
        hop_ab = stagger * ((1 - cos_kx) + 1j * sin_kx) / 2
        hop_ba = stagger * ((1 - cos_kx) - 1j * sin_kx) / 2
    else:
        ab = even + gamma / 2
        ba = even - gamma / 2
        hop_ab = stagger * ((1 - cos_kx) + 1j) / 2
        hop_ba = stagger * ((1 - cos_kx) - 1j) / 2

    # -Δ sin ky on A and +Δ sin ky on B become ∓iΔ/2 nearest-cell hops
    return HoppingBlocks(
        np.array([[0, ab], [ba, 0]], dtype=complex),
        np.array([[-0.5j * delta, hop_ab], [hop_ba, 0.5j * delta]], dtype=complex),
        np.array([[0.5j * delta, hop_ab], [hop_ba, -0.5j * delta]], dtype=complex),
    )


def bloch_matrix_beta(spec: ModelSpec, beta: complex, transverse_k: float | None = None):
    """
    :return: The generalised Bloch matrix H(β) = onsite + forward/β +
      backward·β, equal to bloch_matrix(d_vector(spec, -i ln β, ...)).
    """
    blocks = hopping_blocks(spec, transverse_k)
    beta = complex(beta)
    return blocks.onsite + blocks.forward / beta + blocks.backward * beta
