# SPDX-License-Identifier: MIT
# Copyright 2025 The nhbp authors

"""
Tests for the closed forms of the t3 = 0 models, the vorticity and the
PBC exceptional points.
"""

import math

import numpy as np
import pytest

from nhbp import (
    MSG_WARNING,
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
    bloch_matrix,
    d_chern_x,
    d_vector,
    pbc_energy,
)
from nhbp_invariants import (
    MIN_LOOP_SAMPLES,
    analytic_bp,
    analytic_obc_band,
    analytic_obc_energy,
    bulk_state_amplitudes,
    bulk_state_ansatz,
    edge_localization,
    edge_ratios,
    effective_chain,
    ep_candidates,
    expected_edge_energy,
    gbz_radius,
    gbz_radius_chern,
    gbz_radius_ssh,
    obc_gap_closings,
    pbc_ep_locations,
    pbc_loop_vorticity,
    scan_delocalization_points,
    vorticity,
)
from nhbp_realspace import (
    MODE_BULK,
    MODE_EDGE_LEFT,
    MODE_EDGE_RIGHT,
    TERMINATION_BROKEN_CELL,
    biorthogonal_spectrum,
    build_obc,
    classify_modes,
)

# pylint: disable=missing-class-docstring, missing-function-docstring
# pylint: disable=invalid-name


def _loop(n_samples=256):
    return 2 * math.pi * np.arange(n_samples) / n_samples


class Test_effective_chain:

    def test_when_chern_slice_then_hoppings_follow_ky(self, chern_solvable):

        chain = effective_chain(chern_solvable, math.pi / 3)
        assert chain.intra == pytest.approx(1.5)
        assert chain.inter == pytest.approx(0.5)
        assert chain.onsite == pytest.approx(math.sin(math.pi / 3))
        assert chain.gamma == 3

    def test_when_long_range_hopping_then_analytic_regime_error_raised(self, ssh_long_range):

        with pytest.raises(AnalyticRegimeError):
            effective_chain(ssh_long_range)

    def test_when_y_obc_then_analytic_regime_error_raised(self, chern_y):

        with pytest.raises(AnalyticRegimeError):
            effective_chain(chern_y, 0.5)

    def test_when_chern_without_ky_then_model_error_raised(self, chern_solvable):

        with pytest.raises(ModelError):
            effective_chain(chern_solvable)


class Test_gbz_radius:

    def test_when_solvable_ssh_then_one_over_root_five(self):

        spec = ModelSpec(VARIANT_SSH_1D, t1=1, t2=1, gamma=3)
        assert gbz_radius_ssh(spec) == pytest.approx(1 / math.sqrt(5))

    def test_when_chern_slice_at_half_pi_then_one_over_root_five(self, chern_solvable):

        assert gbz_radius_chern(chern_solvable, math.pi / 2) == pytest.approx(1 / math.sqrt(5))

    def test_when_hermitian_then_unit_radius(self, ssh_hermitian):

        assert gbz_radius(ssh_hermitian) == 1

    def test_when_variant_differs_then_mismatch_error_raised(self, ssh_chiral, chern_solvable):

        with pytest.raises(VariantMismatchError):
            gbz_radius_ssh(chern_solvable)
        with pytest.raises(VariantMismatchError):
            gbz_radius_chern(ssh_chiral, 0.3)

    def test_when_denominator_vanishes_then_singular_radius_error_raised(self):

        spec = ModelSpec(VARIANT_SSH_1D, t1=-1.5, t2=1, gamma=3)
        with pytest.raises(SingularRadiusError) as info:
            gbz_radius(spec)
        assert info.value.diagnostics["gamma"] == 3


class Test_edge_ratios:

    def test_when_chern_slice_at_half_pi_then_known_ratios(self, chern_solvable):

        ratios = edge_ratios(chern_solvable, math.pi / 2)
        assert ratios.r_R == pytest.approx(0.5)
        assert ratios.r_L == pytest.approx(-2.5)
        assert ratios.product_abs == pytest.approx(1.25)
        assert edge_localization(ratios) == MODE_EDGE_RIGHT

    def test_when_topological_ssh_then_mode_on_left(self, ssh_chiral):

        assert edge_localization(edge_ratios(ssh_chiral)) == MODE_EDGE_LEFT

    def test_when_product_is_one_then_bulk(self):

        spec = ModelSpec(VARIANT_SSH_1D, t1=math.sqrt(1.25), t2=1, gamma=3)
        assert edge_localization(edge_ratios(spec)) == MODE_BULK

    def test_when_inter_cell_hopping_vanishes_then_ratio_error_raised(self):

        with pytest.raises(RatioSingularityError):
            edge_ratios(ModelSpec(VARIANT_SSH_1D, t1=1, gamma=3))

    def test_when_mode_from_ratios_then_it_is_an_exact_eigenvector(self, chern_solvable):

        ky = 2.6
        ratios = edge_ratios(chern_solvable, ky)
        n_cells = 12
        vector = np.zeros(2 * n_cells - 1, dtype=complex)
        vector[0::2] = ratios.r_R ** np.arange(1, n_cells + 1)
        matrix = build_obc(chern_solvable, n_cells, ky, termination=TERMINATION_BROKEN_CELL).matrix
        energy = expected_edge_energy(chern_solvable, ky)
        np.testing.assert_allclose(matrix @ vector, energy * vector, atol=1e-12)

    def test_when_chains_diagonalised_then_classifier_agrees_with_ratios(self):

        rng = np.random.default_rng(11)
        checked = 0
        while checked < 10:
            t1, gamma, delta = rng.uniform((0.2, 0.5, 0.0), (2.5, 3.0, 0.5))
            spec = ModelSpec(VARIANT_SSH_1D, t1=t1, t2=1, gamma=gamma, delta_onsite=delta)
            ratios = edge_ratios(spec)
            if abs(math.log(ratios.product_abs)) < 0.3 or abs(2 * t1 - gamma) < 0.4:
                continue
            spectrum = biorthogonal_spectrum(
                build_obc(spec, 200, termination=TERMINATION_BROKEN_CELL)
            )
            labels = classify_modes(spectrum)
            edge = int(np.argmin(np.abs(spectrum.eigenvalues - expected_edge_energy(spec))))
            assert labels[edge].kind == edge_localization(ratios)
            checked += 1


class Test_expected_edge_energy:

    def test_when_variant_given_then_onsite_term_of_a_sites(self, chern_solvable, chern_y):

        assert expected_edge_energy(ModelSpec(VARIANT_SSH_1D, delta_onsite=0.3)) == -0.3
        assert expected_edge_energy(chern_solvable, 0.4) == pytest.approx(-math.sin(0.4))
        assert expected_edge_energy(chern_y, 0.4) is None


class Test_obc_gap_closings:

    def test_when_solvable_chern_then_six_closings(self, chern_solvable, gap_closing_cosines):

        closings = obc_gap_closings(chern_solvable)
        assert len(closings) == 6
        assert closings == sorted(closings)
        for cosine in gap_closing_cosines:
            matches = [k for k in closings if abs(math.cos(k) - cosine) < 1e-12]
            assert len(matches) == 2

    def test_when_scanned_then_closings_agree(self, chern_solvable):

        closings = obc_gap_closings(chern_solvable)
        scanned = scan_delocalization_points(chern_solvable)
        assert len(scanned) == len(closings)
        np.testing.assert_allclose(scanned, closings, atol=1e-3)

    def test_when_at_closing_then_edge_mode_delocalised(self, chern_solvable):

        for ky in obc_gap_closings(chern_solvable):
            assert edge_ratios(chern_solvable, ky).product_abs == pytest.approx(1, abs=1e-9)

    def test_when_weak_non_hermiticity_then_fewer_closings(self, chern_solvable):

        spec = chern_solvable._replace(gamma=1.0)
        assert len(obc_gap_closings(spec)) == 2

    @pytest.mark.parametrize("field", ("delta_stagger", "t1"))
    def test_when_coupling_vanishes_then_model_error_raised(self, chern_solvable, field):

        with pytest.raises(ModelError):
            obc_gap_closings(chern_solvable._replace(**{field: 0.0}))

    def test_when_long_range_then_analytic_regime_error_raised(self, chern_long_range):

        with pytest.raises(AnalyticRegimeError):
            obc_gap_closings(chern_long_range)

    def test_when_scan_too_coarse_then_model_error_raised(self, chern_solvable):

        with pytest.raises(ModelError):
            scan_delocalization_points(chern_solvable, n_ky=3)


class Test_analytic_obc_energy:

    @pytest.mark.parametrize("theta", (0.2, 1.3, 2.9, 4.4))
    def test_when_evaluated_then_bloch_energy_at_complex_momentum(self, chern_solvable, theta):

        ky = 1.0
        radius = gbz_radius(chern_solvable, ky)
        energy = analytic_obc_energy(chern_solvable, ky, theta)
        expected = pbc_energy(d_vector(chern_solvable, theta - 1j * math.log(radius), ky))
        assert energy**2 == pytest.approx(expected**2, abs=1e-10)

    def test_when_band_requested_then_eta_and_radius_returned(self, ssh_chiral):

        band = analytic_obc_band(ssh_chiral, None, 0.7)
        radius = gbz_radius(ssh_chiral)
        assert band.gamma_radius == radius
        assert band.theta == 0.7
        eta = d_vector(ssh_chiral, 0.7 - 1j * math.log(radius))
        assert band.eta == pytest.approx(tuple(eta))
        assert band.energy == analytic_obc_energy(ssh_chiral, None, 0.7)


class Test_bulk_state_ansatz:

    @pytest.mark.parametrize("branch", (1, -1))
    def test_when_theta_quantized_then_every_state_is_an_eigenvector(
        self, chern_solvable, branch
    ):

        ky, n_cells = 1.0, 40
        matrix = build_obc(chern_solvable, n_cells, ky, termination=TERMINATION_BROKEN_CELL).matrix
        for j in range(1, n_cells):
            theta = math.pi * j / n_cells
            vector = bulk_state_ansatz(chern_solvable, ky, theta, n_cells, branch)
            energy = analytic_obc_energy(chern_solvable, ky, theta)
            norm = np.linalg.norm(vector) * abs(energy)
            residual = min(
                np.linalg.norm(matrix @ vector - sign * energy * vector) for sign in (1, -1)
            )
            assert residual < 1e-8 * norm

    def test_when_evaluated_at_cell_zero_then_b_amplitude_vanishes(self, ssh_chiral):

        _, b_amplitudes = bulk_state_amplitudes(ssh_chiral, None, 0.4, [0, 1, 2])
        assert b_amplitudes[0] == 0

    @pytest.mark.parametrize("theta", (0.0, math.pi, 0.1))
    def test_when_theta_off_grid_then_quantization_error_raised(self, ssh_chiral, theta):

        with pytest.raises(QuantizationError):
            bulk_state_ansatz(ssh_chiral, None, theta, 10)

    def test_when_branch_invalid_then_model_error_raised(self, ssh_chiral):

        with pytest.raises(ModelError):
            bulk_state_ansatz(ssh_chiral, None, math.pi / 10, 10, branch=0)


class Test_analytic_bp:

    def test_when_edge_mode_on_left_then_p_near_one(self, ssh_chiral):

        assert analytic_bp(ssh_chiral, None, 1000) > 0.99

    @pytest.mark.parametrize("t1", (0.5, 2.5))
    def test_when_edge_mode_on_right_then_p_near_zero(self, t1):

        spec = ModelSpec(VARIANT_SSH_1D, t1=t1, t2=1, gamma=3)
        assert analytic_bp(spec, None, 1000) < 0.01

    def test_when_chain_very_long_then_closed_form_stays_finite(self, ssh_chiral):

        value = analytic_bp(ssh_chiral, None, 10**7)
        assert value == pytest.approx(1, abs=1e-6)

    def test_when_delocalised_then_warning_posted(self, message_handler):

        spec = ModelSpec(VARIANT_SSH_1D, t1=math.sqrt(1.25), t2=1, gamma=3)
        assert analytic_bp(spec, None, 100) == pytest.approx(1 - 101 / 200)
        severities = [c.args[1] for c in message_handler.call_args_list]
        assert MSG_WARNING in severities

    def test_when_chain_empty_then_model_error_raised(self, ssh_chiral):

        with pytest.raises(ModelError):
            analytic_bp(ssh_chiral, None, 0)


class Test_vorticity:

    def test_when_square_root_branch_point_then_half(self):

        phi = _loop()
        root = np.sqrt(0.5) * np.exp(0.5j * phi)
        assert vorticity(root, -root).nu_12 == pytest.approx(0.5)

    def test_when_sample_order_reversed_then_sign_flips(self):

        phi = _loop()[::-1]
        root = np.sqrt(0.5) * np.exp(0.5j * phi)
        assert vorticity(root, -root).nu_12 == pytest.approx(-0.5)

    def test_when_loop_encloses_two_branch_points_then_zero(self):

        z = 2 * np.exp(1j * _loop())
        band = np.sqrt((z - 0.5) / (z + 0.5))
        assert vorticity(band, -band).nu_12 == pytest.approx(0, abs=1e-12)

    def test_when_differences_real_and_positive_then_exactly_zero(self):

        band = 2 + np.cos(_loop())
        result = vorticity(band, np.zeros_like(band))
        assert result.nu_12 == 0
        assert len(result.unwrapped_phase) == len(band) + 1

    def test_when_difference_winds_once_then_one(self):

        assert vorticity(np.exp(1j * _loop()), np.zeros(256)).nu_12 == pytest.approx(1)

    def test_when_bands_touch_on_loop_then_ep_on_loop_error_raised(self):

        band = np.exp(1j * _loop())
        other = -band
        other[10] = band[10]
        with pytest.raises(EPOnLoopError) as info:
            vorticity(band, other)
        assert info.value.diagnostics["sample"] == 10

    def test_when_phase_steps_large_then_under_resolved_error_raised(self):

        with pytest.raises(UnderResolvedLoopError):
            vorticity(np.exp(20j * _loop(64)), np.zeros(64))

    def test_when_too_few_samples_then_model_error_raised(self):

        band = np.ones(MIN_LOOP_SAMPLES - 1)
        with pytest.raises(ModelError):
            vorticity(band, -band)

    def test_when_lengths_differ_then_model_error_raised(self):

        with pytest.raises(ModelError):
            vorticity(np.ones(64), np.ones(65))


class Test_pbc_loop_vorticity:

    def test_when_loop_encircles_chern_ep_then_half(self, chern_solvable):

        for kx, ky in pbc_ep_locations(chern_solvable):
            result = pbc_loop_vorticity(chern_solvable, (kx, ky), 0.1)
            assert abs(result.nu_12) == pytest.approx(0.5, abs=1e-9)

    def test_when_loop_avoids_eps_then_zero(self, chern_solvable):

        result = pbc_loop_vorticity(chern_solvable, (0.5, 0.5), 0.1)
        assert result.nu_12 == pytest.approx(0, abs=1e-9)

    def test_when_loop_encircles_ssh_ep_in_complex_plane_then_half(self, ssh_chiral):

        result = pbc_loop_vorticity(ssh_chiral, 1j * math.log(10), 0.1)
        assert abs(result.nu_12) == pytest.approx(0.5, abs=1e-9)

    def test_when_radius_not_positive_then_model_error_raised(self, ssh_chiral):

        with pytest.raises(ModelError):
            pbc_loop_vorticity(ssh_chiral, 0j, 0.0)


class Test_pbc_ep_locations:

    def test_when_solvable_chern_then_four_eps_at_kx_pi(self, chern_solvable):

        points = pbc_ep_locations(chern_solvable)
        assert len(points) == 4
        for kx, ky in points:
            assert kx == math.pi
            assert math.sin(ky) ** 2 == pytest.approx(7 / 12)
            d = d_chern_x(chern_solvable, kx, ky)
            assert abs(pbc_energy(d)) < 1e-6
            # Defective: the eigenvectors coalesce
            assert np.linalg.matrix_rank(bloch_matrix(d), tol=1e-8) == 1

    def test_when_hermitian_then_no_eps(self, chern_solvable):

        assert not pbc_ep_locations(chern_solvable._replace(gamma=0.0))

    def test_when_onsite_zero_then_kx_pi_eps_returned(self, chern_solvable, message_handler):

        points = pbc_ep_locations(chern_solvable._replace(delta_onsite=0.0))
        assert len(points) == 4
        for kx, ky in points:
            assert kx == math.pi
            assert math.sin(ky) ** 2 == pytest.approx(0.4375)
        assert MSG_WARNING in [c.args[1] for c in message_handler.call_args_list]

    def test_when_onsite_matches_stagger_then_kx_zero_eps_returned(self, chern_solvable):

        spec = chern_solvable._replace(delta_onsite=2.0, gamma=5.0)
        points = pbc_ep_locations(spec)
        assert len(points) == 4
        for kx, ky in points:
            assert kx == 0
            assert math.sin(ky) ** 2 == pytest.approx(0.5625)
        assert ep_candidates(spec).singular_branches == [math.pi]

    def test_when_both_branches_singular_then_error_raised(self, chern_solvable):

        spec = chern_solvable._replace(delta_onsite=0.0, delta_stagger=0.0)
        with pytest.raises(SingularConditionError):
            pbc_ep_locations(spec)

    def test_when_degeneracy_is_hermitian_then_not_an_ep(self, chern_solvable):

        spec = chern_solvable._replace(delta_onsite=0.0, gamma=0.0)
        assert not pbc_ep_locations(spec)
