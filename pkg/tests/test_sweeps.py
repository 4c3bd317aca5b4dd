# SPDX-License-Identifier: MIT
# Copyright 2025 The nhbp authors

"""
Tests for parameter sweeps, phase diagrams and their output files.
"""

import csv
import json
import math

from unittest import mock

import numpy as np
import pytest

from nhbp import (
    MSG_WARNING,
    VARIANT_SSH_1D,
    EmptyContourError,
    GapClosedError,
    ModelError,
    ModelSpec,
    __version__,
)
from nhbp_invariants import obc_gap_closings, pbc_ep_locations
from nhbp_realspace import MODE_BULK, TERMINATION_FULL_CELLS
from nhbp_sweeps import (
    FLAG_OBC_GAP_CLOSED,
    FLAG_PBC_EP,
    PARAM_GAMMA,
    PARAM_T1,
    PARAM_TRANSVERSE_K,
    PHASE_OBC,
    PHASE_PBC,
    SCHEMA_VERSION,
    SWEEP_CSV_COLUMNS,
    SweepAxis,
    SweepSettings,
    find_jumps,
    phase_diagram_obc,
    phase_diagram_pbc,
    plot_phase_diagram,
    plot_sweep,
    sweep,
    sweep_manifest_payload,
    sweep_point,
    sweep_values,
    validate_sweep_axis,
    write_manifest,
    write_phase_diagram_csv,
    write_sweep_csv,
)

# pylint: disable=missing-class-docstring, missing-function-docstring
# pylint: disable=invalid-name

_SMALL = SweepSettings(n_pbc=64)


def _ssh_sweep(ssh_chiral, **kwargs):
    axis = SweepAxis(PARAM_T1, 0.6, 1.4, 3)
    return sweep(ssh_chiral, axis, 20, 20, 128, settings=_SMALL, workers=1, **kwargs)


class Test_validate_sweep_axis:

    def test_when_valid_then_values_coerced(self, ssh_chiral):

        axis = validate_sweep_axis(SweepAxis(PARAM_T1, 0, 2, 5.0), ssh_chiral)
        assert axis == SweepAxis(PARAM_T1, 0.0, 2.0, 5)
        np.testing.assert_allclose(sweep_values(axis), [0, 0.5, 1, 1.5, 2])

    @pytest.mark.parametrize(
        "axis",
        (
            SweepAxis("t2", 0, 1, 5),
            SweepAxis(PARAM_TRANSVERSE_K, 0, 1, 5),
            SweepAxis(PARAM_T1, 1, 1, 5),
            SweepAxis(PARAM_T1, 0, 1, 1),
            SweepAxis(PARAM_T1, 0, 1, 2.5),
        ),
    )
    def test_when_invalid_then_model_error_raised(self, ssh_chiral, axis):

        with pytest.raises(ModelError):
            validate_sweep_axis(axis, ssh_chiral)


class Test_sweep_point:

    def test_when_topological_ssh_then_edge_mode_and_quantized_invariants(self, ssh_chiral):

        point = sweep_point(ssh_chiral, PARAM_T1, 1.4, _SMALL._replace(gbz_resolution=128))
        assert not point.failures
        assert point.value == 1.4
        assert len(point.obc_abs_energies) == 2 * 100 - 1
        assert len(point.pbc_abs_energies) == 64
        assert point.mode_kinds.count(MODE_BULK) == len(point.mode_kinds) - 1
        assert point.edge_energies == [pytest.approx(0, abs=1e-8)]
        assert point.polarization == pytest.approx(1 - 1 / (1.29 * 100), abs=1e-6)
        assert point.nu_tot == pytest.approx(1, abs=1e-2)

    def test_when_long_range_hopping_then_polarization_from_diagonalisation(
        self, ssh_long_range
    ):

        settings = SweepSettings(n_obc=24, n_p=24, gbz_resolution=128, n_pbc=64)
        point = sweep_point(ssh_long_range, PARAM_GAMMA, 4 / 3, settings)
        assert math.isfinite(point.polarization)
        assert len(point.obc_abs_energies) == 2 * 24 - 1

    def test_when_swept_across_transverse_momentum_then_value_is_ky(self, chern_solvable):

        settings = SweepSettings(
            n_obc=20, n_p=20, gbz_resolution=128, n_pbc=64, termination=TERMINATION_FULL_CELLS
        )
        point = sweep_point(chern_solvable, PARAM_TRANSVERSE_K, 2.6, settings)
        assert point.value == 2.6
        assert point.polarization == pytest.approx(1, abs=0.05)

    def test_when_pbc_gap_small_then_ep_flag_set(self, chern_solvable):

        ky = math.asin(math.sqrt(7 / 12))
        settings = SweepSettings(n_obc=10, n_p=10, gbz_resolution=128, n_pbc=2, transverse_k=ky)
        # kx = 0 and π are both on the two-point grid
        point = sweep_point(chern_solvable, PARAM_T1, 1.0, settings)
        assert FLAG_PBC_EP in point.ep_flags

    def test_when_gbz_fails_then_failure_recorded_and_values_nan(self, ssh_chiral):

        with mock.patch(
            "nhbp_sweeps.gbz_contour", side_effect=EmptyContourError("nothing admitted")
        ):
            point = sweep_point(ssh_chiral, PARAM_T1, 1.4, _SMALL)
        assert point.failures == ["gbz: nothing admitted"]
        assert math.isnan(point.nu_tot)
        assert math.isfinite(point.polarization)

    def test_when_gap_closes_on_gbz_then_flag_set(self, ssh_chiral):

        with mock.patch(
            "nhbp_sweeps.non_bloch_winding", side_effect=GapClosedError("bands touch")
        ):
            point = sweep_point(ssh_chiral, PARAM_T1, 1.4, _SMALL)
        assert FLAG_OBC_GAP_CLOSED in point.ep_flags
        assert point.failures == ["gbz: bands touch"]


class Test_sweep:

    def test_when_ssh_swept_then_points_in_grid_order(self, ssh_chiral):

        result = _ssh_sweep(ssh_chiral)
        values = [p.value for p in result.points]
        assert values == pytest.approx([0.6, 1.0, 1.4])
        assert result.settings.n_obc == 20
        assert result.settings.n_pbc == 64

        polarization = [p.polarization for p in result.points]
        assert polarization[0] == pytest.approx(0, abs=0.05)
        assert polarization[1] == pytest.approx(0, abs=0.05)
        assert polarization[2] == pytest.approx(1, abs=0.05)
        nu_tot = [p.nu_tot for p in result.points]
        assert nu_tot == pytest.approx([0, 0, 1], abs=1e-2)

        assert find_jumps(polarization, values) == pytest.approx([1.2])

    def test_when_point_fails_then_warning_posted_and_sweep_completes(
        self, ssh_chiral, message_handler
    ):

        with mock.patch(
            "nhbp_sweeps.gbz_contour", side_effect=EmptyContourError("nothing admitted")
        ):
            result = _ssh_sweep(ssh_chiral)
        assert len(result.points) == 3
        warnings = [c.args[0] for c in message_handler.call_args_list if c.args[1] == MSG_WARNING]
        assert len(warnings) == 3
        assert all("nothing admitted" in w for w in warnings)

    def test_when_two_d_without_transverse_k_then_model_error_raised(self, chern_solvable):

        with pytest.raises(ModelError):
            sweep(chern_solvable, SweepAxis(PARAM_T1, 0.5, 1, 3), 10, 10, workers=1)

    def test_when_sizes_invalid_then_model_error_raised(self, ssh_chiral):

        with pytest.raises(ModelError):
            sweep(ssh_chiral, SweepAxis(PARAM_T1, 0.5, 1, 3), 1, 10, workers=1)
        with pytest.raises(ModelError):
            sweep(ssh_chiral, SweepAxis(PARAM_T1, 0.5, 1, 3), 10, 10, 32, workers=1)


class Test_find_jumps:

    def test_when_values_step_then_midpoints_returned(self):

        assert find_jumps([0, 0, 1, 1, 0], [0, 1, 2, 3, 4]) == [1.5, 3.5]

    def test_when_nan_present_then_adjacent_steps_skipped(self):

        assert find_jumps([0, 0, 1, math.nan, 0], [0, 1, 2, 3, 4]) == [1.5]

    def test_when_below_threshold_then_no_jumps(self):

        assert not find_jumps([0, 0.3, 0.6], [0, 1, 2], threshold=0.5)


class Test_phase_diagrams:

    def test_when_pbc_then_ep_region_labelled(self):

        grid = phase_diagram_pbc(1.0, 1.0, [0.0, 3.0], [1.0, 0.5], workers=1)
        assert grid.kind == PHASE_PBC
        np.testing.assert_array_equal(grid.labels, [[0, 0], [1, 1]])

    def test_when_obc_then_gap_closings_counted_and_cross_checked(self):

        grid = phase_diagram_obc(1.0, 1.0, [0.0, 3.0], [1.0, 0.5], n_checks=10, workers=1)
        assert grid.kind == PHASE_OBC
        np.testing.assert_array_equal(grid.labels, [[2, 2], [6, 4]])
        assert grid.checked == 4
        assert grid.disagreements == 0

    def test_when_t1_zero_then_scan_used(self, message_handler):

        grid = phase_diagram_obc(1.0, 1.0, [3.0], [0.0], n_checks=0, workers=1)
        assert grid.labels.shape == (1, 1)
        assert grid.checked == 0
        assert MSG_WARNING not in [c.args[1] for c in message_handler.call_args_list]

    @pytest.mark.parametrize("delta_onsite, gammas", ((0.0, [0.0, 3.0]), (2.0, [0.0, 5.0])))
    def test_when_one_ep_branch_singular_then_other_branch_labels(
        self, message_handler, delta_onsite, gammas
    ):

        grid = phase_diagram_pbc(1.0, delta_onsite, gammas, [1.0], workers=1)
        np.testing.assert_array_equal(grid.labels, [[0], [1]])
        warnings = [c for c in message_handler.call_args_list if c.args[1] == MSG_WARNING]
        assert len(warnings) == 1

    def test_when_both_ep_branches_singular_then_no_eps_labelled(self):

        grid = phase_diagram_pbc(0.0, 0.0, [1.0, 3.0], [1.0], workers=1)
        np.testing.assert_array_equal(grid.labels, [[0], [0]])

    @pytest.mark.parametrize("diagram", (phase_diagram_pbc, phase_diagram_obc))
    def test_when_grid_refined_then_labels_change_only_at_boundaries(self, diagram):

        coarse = diagram(1.0, 1.0, np.linspace(0, 4, 9), np.linspace(0.2, 2, 9), workers=1)
        fine = diagram(1.0, 1.0, np.linspace(0, 4, 17), np.linspace(0.2, 2, 17), workers=1)
        np.testing.assert_array_equal(fine.labels[::2, ::2], coarse.labels)
        for (i, j), label in np.ndenumerate(fine.labels):
            neighbours = coarse.labels[i // 2 : (i + 1) // 2 + 1, j // 2 : (j + 1) // 2 + 1]
            if np.all(neighbours == neighbours.flat[0]):
                assert label == neighbours.flat[0]

    def test_when_solvable_chern_swept_then_p_jumps_at_gap_closings(self, chern_solvable):

        axis = SweepAxis(PARAM_TRANSVERSE_K, 0.05, 2 * math.pi - 0.05, 241)
        result = sweep(chern_solvable, axis, 10, 3500, 64, settings=_SMALL, workers=1)
        grid = sweep_values(axis)
        step = grid[1] - grid[0]
        jumps = find_jumps([point.polarization for point in result.points], grid)
        closings = np.array(obc_gap_closings(chern_solvable))
        eps = np.array([ky for _, ky in pbc_ep_locations(chern_solvable)])

        def distance(ky, targets):
            offsets = np.abs(targets - ky) % (2 * math.pi)
            return np.minimum(offsets, 2 * math.pi - offsets).min()

        assert len(jumps) == len(closings) == 6
        for ky in jumps:
            assert distance(ky, closings) <= step
        assert any(distance(ky, eps) > step for ky in jumps)

    def test_when_grid_empty_then_model_error_raised(self):

        with pytest.raises(ModelError):
            phase_diagram_pbc(1.0, 1.0, [], [1.0])
        with pytest.raises(ModelError):
            phase_diagram_obc(1.0, 1.0, [1.0], [])

    def test_when_stagger_zero_then_model_error_raised(self):

        with pytest.raises(ModelError):
            phase_diagram_obc(0.0, 1.0, [1.0], [1.0])


class Test_output:

    def test_when_sweep_written_twice_then_files_identical(self, tmp_path, ssh_chiral):

        first = tmp_path / "first.csv"
        second = tmp_path / "second.csv"
        write_sweep_csv(first, _ssh_sweep(ssh_chiral))
        write_sweep_csv(second, _ssh_sweep(ssh_chiral))
        assert first.read_bytes() == second.read_bytes()

        with open(first, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert tuple(rows[0]) == SWEEP_CSV_COLUMNS
        quantities = {row[1] for row in rows[1:]}
        assert {"P", "nu_tot", "pbc_abs_E", "obc_abs_E", "edge_abs_E"} <= quantities
        assert len([row for row in rows if row[1] == "P"]) == 3

    def test_when_phase_diagram_written_then_one_row_per_cell(self, tmp_path):

        grid = phase_diagram_pbc(1.0, 1.0, [0.0, 3.0], [1.0, 0.5])
        path = tmp_path / "pd.csv"
        write_phase_diagram_csv(path, grid)
        with open(path, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["gamma", "t1", "label"]
        assert rows[1:] == [
            ["0.0", "1.0", "0"],
            ["0.0", "0.5", "0"],
            ["3.0", "1.0", "1"],
            ["3.0", "0.5", "1"],
        ]

    def test_when_manifest_written_then_versions_and_run_recorded(self, tmp_path, ssh_chiral):

        result = _ssh_sweep(ssh_chiral)
        path = tmp_path / "manifest.json"
        written = write_manifest(path, sweep_manifest_payload(result, 1.5))
        with open(path, encoding="utf-8") as f:
            manifest = json.load(f)
        assert manifest == written
        assert manifest["schema_version"] == SCHEMA_VERSION
        assert manifest["versions"]["nhbp"] == __version__
        assert manifest["spec"]["variant"] == VARIANT_SSH_1D
        assert manifest["axis"]["n_points"] == 3
        assert manifest["settings"]["n_obc"] == 20
        assert manifest["failed_points"] == {}
        assert manifest["wall_time_s"] == 1.5

    def test_when_plots_written_then_svg_is_reproducible(self, tmp_path, ssh_chiral):

        result = _ssh_sweep(ssh_chiral)
        grid = phase_diagram_pbc(1.0, 1.0, [0.0, 3.0], [1.0, 0.5])
        for name in ("a", "b"):
            plot_sweep(tmp_path / f"sweep_{name}.svg", result, "SSH")
            plot_phase_diagram(tmp_path / f"pd_{name}.svg", grid)

        sweep_svg = (tmp_path / "sweep_a.svg").read_bytes()
        assert b"<svg" in sweep_svg
        assert sweep_svg == (tmp_path / "sweep_b.svg").read_bytes()
        assert (tmp_path / "pd_a.svg").read_bytes() == (tmp_path / "pd_b.svg").read_bytes()


class Test_gamma_sweep:

    def test_when_gamma_swept_then_edge_mode_changes_side(self):

        spec = ModelSpec(VARIANT_SSH_1D, t1=1.4, t2=1)
        result = sweep(
            spec, SweepAxis(PARAM_GAMMA, 2.5, 3.5, 2), 20, 20, 128, settings=_SMALL, workers=1
        )
        assert result.points[0].polarization > 0.9
        assert result.points[1].polarization < 0.1
