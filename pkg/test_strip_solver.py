import numpy as np
import pytest

from dyadic import g_sequence
from errors import DomainError
from inertia import negative_count_spectral
from orlicz import Quadrature
from potentials import BoxPotential, GaussianPotential, ZeroPotential
from strip_solver import (StripGrid, _disjoint_packing, assemble_form, cell_mean_zero_counts, certify_lower_bound,
                          cosine_modes, count_negative, empirical_cell_constants, grid_converged, line_count,
                          reduced_count, semiclassical_scan, split_counts, stiffness_matrix, subspace_counts,
                          trapezoid_weights, trial_energy, trial_form_value, trial_profile,
                          truncation_counts)

QUAD = Quadrature(inner_panels=16, outer_panels_per_unit=64, max_outer_panels=4096)
GRID = StripGrid(1.0, 4.0, 64, 4)


class TestStripGrid:
    def test_geometry(self):
        assert GRID.h1 == pytest.approx(0.125)
        assert GRID.h2 == pytest.approx(0.25)
        assert GRID.block == 5
        assert GRID.size == 65 * 5
        assert GRID.aligned

    def test_weights_sum_to_lengths(self):
        assert GRID.w1.sum() == pytest.approx(8.0)
        assert GRID.w2.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(trapezoid_weights(4, 0.5), [0.25, 0.5, 0.5, 0.5, 0.25])

    def test_rejects_coarse_grids(self):
        with pytest.raises(DomainError):
            StripGrid(1.0, 4.0, 2, 4)
        with pytest.raises(DomainError):
            StripGrid(1.0, 4.0, 16, 1)
        with pytest.raises(DomainError):
            StripGrid(-1.0, 4.0, 16, 4)

    def test_unaligned(self):
        assert not StripGrid(1.0, 2.5, 20, 4).aligned
        assert not StripGrid(1.0, 2.0, 6, 4).aligned

    def test_coarsened(self):
        coarse = GRID.coarsened()
        assert (coarse.nx, coarse.ny) == (32, 2)
        odd = StripGrid(1.0, 4.0, 101, 8).coarsened()
        assert (odd.nx, odd.ny, odd.L) == (50, 4, 4.0)
        assert not StripGrid(1.0, 4.0, 10, 3).can_coarsen
        with pytest.raises(DomainError):
            StripGrid(1.0, 4.0, 10, 3).coarsened()

    def test_widened_keeps_the_mesh(self):
        wide = GRID.widened(3)
        assert (wide.L, wide.nx, wide.ny) == (12.0, 192, 4)
        assert wide.h1 == pytest.approx(GRID.h1)
        assert wide.h2 == GRID.h2

    def test_for_potential_defaults(self):
        grid = StripGrid.for_potential(BoxPotential(1.0, 1.0, [0.0, 1.0]), ny=8)
        assert grid.L == 4.0
        assert grid.h1 <= 1.0 / 64
        assert grid.aligned

    def test_for_potential_caps_nx(self, monkeypatch):
        from config import CONFIG
        monkeypatch.setattr(CONFIG, 'MAX_NX', 256)
        grid = StripGrid.for_potential(GaussianPotential(1.0, 1.0, 0.0, 0.1))
        assert grid.nx <= 256


class TestAssembleForm:
    def test_stiffness_kernel_is_constants(self):
        K = stiffness_matrix(GRID)
        np.testing.assert_allclose(K @ np.ones(GRID.size), 0.0, atol=1e-12)

    def test_symmetric(self):
        problem = assemble_form(GaussianPotential(1.0, 3.0, 0.0, 0.5, profile='cos2'), GRID)
        assert problem.symmetry_defect == 0.0

    def test_zero_potential_has_no_negatives(self):
        assert count_negative(assemble_form(ZeroPotential(1.0), GRID)) == 0

    def test_any_nonzero_potential_binds(self):
        assert count_negative(assemble_form(BoxPotential(1.0, 0.01, [0.0, 0.5]), GRID)) >= 1

    def test_matches_dense_spectrum(self):
        problem = assemble_form(BoxPotential(1.0, 20.0, [-1.0, 1.0], profile='cos2'), GRID)
        assert count_negative(problem) == negative_count_spectral(problem.matrix)

    def test_rejects_negative_scale(self):
        with pytest.raises(DomainError):
            assemble_form(ZeroPotential(1.0), GRID, -1.0)

    def test_count_grows_with_coupling(self):
        V = GaussianPotential(1.0, 1.0, 0.0, 1.0)
        counts = [count_negative(assemble_form(V, GRID, s)) for s in (1.0, 10.0, 100.0)]
        assert counts == sorted(counts)

    def test_count_grows_with_box_strength(self):
        counts = [count_negative(assemble_form(BoxPotential(1.0, lam, [-1.0, 1.0], profile='cos2'), GRID))
                  for lam in (1.0, 5.0, 25.0, 125.0)]
        assert counts == sorted(counts)
        assert counts[-1] > counts[0]


class TestSplitCounts:
    def test_cosine_modes_are_mean_zero(self):
        for ny in (2, 5, 8):
            w2 = trapezoid_weights(ny, 1.0 / ny)
            np.testing.assert_allclose(w2 @ cosine_modes(ny), 0.0, atol=1e-12)

    def test_decomposition(self):
        for V in (BoxPotential(1.0, 20.0, [-1.0, 1.0], profile='cos2'),
                  GaussianPotential(1.0, 15.0, 0.5, 0.5, profile='cos_offset')):
            full = count_negative(assemble_form(V, GRID))
            n1, n2 = subspace_counts(V, GRID)
            assert full <= n1 + n2

    def test_n1_is_the_reduced_line_count(self):
        V = BoxPotential(1.0, 5.0, [-1.0, 1.0], profile='cos2')
        n1, _ = split_counts(assemble_form(V, GRID, 2.0))
        assert n1 == reduced_count(V, GRID)

    def test_x2_independent_weak_potential_has_no_n2(self):
        # 2λ stays below the first transverse Neumann eigenvalue
        V = BoxPotential(1.0, 3.0, [-1.0, 1.0])
        _, n2 = split_counts(assemble_form(V, StripGrid(1.0, 4.0, 64, 8), 2.0))
        assert n2 == 0

    def test_line_count(self):
        assert line_count(0.1, np.zeros(11)) == 0
        assert line_count(0.1, np.full(11, 0.01)) == 1


class TestTrialFunctions:
    def test_energies(self):
        assert trial_energy(*trial_profile(0)) == pytest.approx(2.0)
        assert trial_energy(*trial_profile(3)) == pytest.approx(40.0)
        assert trial_energy(*trial_profile(-2)) == pytest.approx(20.0)

    def test_plateau_on_the_cell(self):
        xs, ys = trial_profile(-3)
        assert (xs[1], xs[2]) == (-8.0, -4.0)
        assert ys[1] == ys[2] == 8.0
        assert (xs[0], xs[-1]) == (-16.0, -2.0)

    def test_form_value_of_box(self):
        V = BoxPotential(1.0, 1.0, [2.0, 4.0])
        assert trial_form_value(V, 2, QUAD) == pytest.approx(20.0 - 32.0, rel=1e-10)

    def test_packing(self):
        supports = {0: (-2.0, 2.0), 1: (0.5, 4.0), 3: (2.0, 16.0), 5: (8.0, 64.0)}
        assert _disjoint_packing(supports) == [0, 3]


class TestCertifier:
    def test_zero_potential(self):
        report = certify_lower_bound(ZeroPotential(1.0), QUAD, (-4, 4))
        assert report.lower_bound == 0 and report.ceil_third == 0

    def test_lower_bound_below_count(self):
        V = BoxPotential(1.0, 4.0, [-4.0, 4.0])
        report = certify_lower_bound(V, QUAD, (-4, 4))
        assert report.lower_bound >= 1
        assert not report.truncated
        grid = StripGrid(1.0, 8.0, 128, 4)
        assert report.lower_bound <= count_negative(assemble_form(V, grid))

    def test_threshold_is_five_a(self):
        report = certify_lower_bound(BoxPotential(2.0, 1.0, [2.0, 4.0]), QUAD, (-4, 4))
        assert report.threshold == 10.0

    def test_flags_potential_beyond_reach(self):
        report = certify_lower_bound(BoxPotential(1.0, 1.0, [2.0, 40.0]), QUAD, (-3, 3))
        assert report.truncated


class TestSemiclassicalScan:
    def test_monotone(self):
        V = GaussianPotential(1.0, 1.0, 0.0, 1.0)
        rows = semiclassical_scan(V, GRID, [1.0, 4.0, 16.0, 64.0], QUAD, (-4, 4))
        counts = [row.count for row in rows]
        assert counts == sorted(counts)
        quasinorm = rows[0].weak_quasinorm
        assert rows[2].weak_quasinorm == pytest.approx(16.0 * quasinorm)

    def test_rejects_unsorted_couplings(self):
        with pytest.raises(DomainError):
            semiclassical_scan(ZeroPotential(1.0), GRID, [2.0, 1.0], QUAD, (-2, 2))
        with pytest.raises(DomainError):
            semiclassical_scan(ZeroPotential(1.0), GRID, [], QUAD, (-2, 2))

    def test_quasinorm_scales(self):
        V = BoxPotential(1.0, 2.0, [0.0, 1.0])
        rows = semiclassical_scan(V, GRID, [0.0, 3.0], QUAD, (-4, 4))
        G = g_sequence(V, (-4, 4), QUAD)
        assert rows[0].count == 0
        assert rows[1].weak_quasinorm == pytest.approx(3.0 * max(G.values()))


class TestCellCounts:
    def test_unaligned_grid_is_skipped(self):
        assert cell_mean_zero_counts(BoxPotential(1.0, 5.0, [0.0, 1.0]), StripGrid(1.0, 2.5, 20, 4)) == {}

    def test_cell_decomposition(self):
        V = BoxPotential(1.0, 40.0, [-1.0, 1.0], profile='cos2')
        grid = StripGrid(1.0, 3.0, 48, 4)
        cells = cell_mean_zero_counts(V, grid)
        assert sorted(cells) == [-1, 0]
        _, n2 = split_counts(assemble_form(V, grid, 2.0))
        assert n2 <= sum(cells.values())

    def test_empirical_constants(self):
        V = BoxPotential(1.0, 40.0, [0.0, 1.0], profile='cos2')
        constants = empirical_cell_constants(V, StripGrid(1.0, 2.0, 32, 4), 2.0, QUAD)
        assert set(constants.counts) == {0}
        assert constants.c1_ratio >= 0 and constants.c2_ratio >= 0


class TestGridConvergence:
    def test_zero_potential(self):
        assert grid_converged(ZeroPotential(1.0), GRID)

    def test_odd_grid_is_checked(self):
        V = BoxPotential(1.0, 10.0, [1.0, 2.0])
        assert isinstance(grid_converged(V, StripGrid(1.0, 4.0, 101, 8)), bool)
        assert grid_converged(ZeroPotential(1.0), StripGrid(1.0, 4.0, 63, 4)) is True

    def test_too_coarse_to_halve(self):
        assert grid_converged(ZeroPotential(1.0), StripGrid(1.0, 4.0, 6, 4)) is None


class TestTruncationCounts:
    def test_nonincreasing_in_window(self):
        V = BoxPotential(1.0, 20.0, [-1.0, 1.0], profile='cos2')
        counts = truncation_counts(V, GRID, (1, 2, 4))
        assert counts[0] >= 1
        assert counts == sorted(counts, reverse=True)
        assert counts[0] == count_negative(assemble_form(V, GRID))

    def test_zero_potential(self):
        assert truncation_counts(ZeroPotential(1.0), GRID, (1, 2)) == [0, 0]

    def test_support_at_the_edge(self):
        assert truncation_counts(BoxPotential(1.0, 5.0, [-4.0, 1.0]), GRID) is None
