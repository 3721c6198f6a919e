"""Adaptive increments, grid construction, and regridding."""

import numpy as np
import pytest

from cwblowup import SimParams, build_grid, carry_to_grid, compute_h, compute_tau, regrid
from cwblowup.grid import build_grid_by_count, interval_count_for
from cwblowup.state import SolutionState


class TestComputeTau:
    def test_shrinks_with_sup(self):
        assert compute_tau(SimParams(p=3.0, tau=0.1), 10.0) == pytest.approx(1e-3)

    def test_clamped_below_one(self):
        assert compute_tau(SimParams(p=2.0, tau=0.1), 0.5) == 0.1

    def test_clamp_boundary(self):
        assert compute_tau(SimParams(p=2.0, tau=0.2), 1.0) == 0.2

    def test_rejects_nonpositive_sup(self):
        with pytest.raises(ValueError):
            compute_tau(SimParams(), 0.0)


class TestComputeH:
    def test_q_one_never_shrinks(self):
        params = SimParams(p=3.0, q=1.0, h=0.05)
        for sup in (1.0, 1e3, 1e12):
            assert compute_h(params, sup) == 0.05

    def test_shrinks_for_q_above_one(self):
        params = SimParams(p=3.0, q=1.5, h=0.1)
        assert compute_h(params, 1e4) == pytest.approx(4e-4)

    def test_clamped_at_base(self):
        params = SimParams(p=3.0, q=1.5, h=0.1)
        assert compute_h(params, 16.0) == pytest.approx(0.1)

    def test_rejects_q_at_two(self):
        params = SimParams(p=3.0, q=2.0, h=0.1)
        with pytest.raises(ValueError):
            compute_h(params, 10.0)


class TestBuildGrid:
    def test_exact_divisor(self):
        g = build_grid(0.5)
        assert (g.interval_count, g.h, g.num_interior, g.mid) == (4, 0.5, 3, 2)
        assert g.nodes[g.mid] == 0.0

    def test_rounds_up_to_even(self):
        g = build_grid(0.3)
        assert (g.interval_count, g.h, g.num_interior, g.mid) == (8, 0.25, 7, 4)

    def test_large_count(self):
        g = build_grid(4e-4)
        assert (g.interval_count, g.num_interior, g.mid) == (5000, 4999, 2500)

    def test_nodes_uniform_and_anchored(self):
        g = build_grid(0.07)
        assert g.nodes[0] == -1.0 and g.nodes[-1] == 1.0
        assert g.nodes[g.mid] == 0.0
        assert np.max(np.abs(np.diff(g.nodes) - g.h)) < 1e-15
        assert (g.num_interior + 1) * g.h == pytest.approx(2.0, rel=1e-15)

    def test_interval_count_floating_safety(self):
        # 2/h computing to 4.000000000000001 must still give 4
        assert interval_count_for(2.0 / 4.0000000000000009) == 4

    def test_rejects_bad_target(self):
        for bad in (0.0, -1.0, 2.5):
            with pytest.raises(ValueError):
                interval_count_for(bad)


def _state(values):
    return SolutionState(u=np.asarray(values, dtype=float), t=0.0, n=3, tau_last=0.01)


class TestRegrid:
    def test_linear_interpolation(self):
        old = build_grid_by_count(2)
        new = build_grid_by_count(4)
        out = regrid(_state([0.0, 4.0, 0.0]), old, new)
        assert np.allclose(out.u, [0.0, 2.0, 4.0, 2.0, 0.0])

    def test_identity(self):
        g = build_grid_by_count(4)
        st = _state([0.0, 1.0, 4.0, 1.0, 0.0])
        out = regrid(st, g, g)
        assert np.array_equal(out.u, st.u)

    def test_midpoint_average(self):
        old = build_grid_by_count(4)
        new = build_grid_by_count(8)
        out = regrid(_state([0.0, 1.0, 4.0, 1.0, 0.0]), old, new)
        assert out.u[1] == pytest.approx(0.5)  # x = -0.75
        assert out.u[new.mid] == 4.0

    def test_refuses_coarsening(self):
        fine = build_grid_by_count(8)
        coarse = build_grid_by_count(4)
        with pytest.raises(ValueError, match="coarsen"):
            regrid(_state(np.zeros(9)), fine, coarse)

    def test_preserves_profile_structure(self):
        old = build_grid_by_count(8)
        rng = np.random.default_rng(7)
        left = np.concatenate([[0.0], np.cumsum(rng.uniform(0.5, 2.0, 4))])
        u = np.concatenate([left, left[-2::-1]])
        new = build_grid_by_count(14)
        out = regrid(_state(u), old, new)
        assert np.max(out.u) == np.max(u)  # peak is a shared node
        assert np.array_equal(out.u, out.u[::-1])
        assert np.all(np.diff(out.u[: new.mid + 1]) >= 0.0)
        assert np.all(out.u >= 0.0)
        assert out.u[0] == 0.0 and out.u[-1] == 0.0


class TestCarryToGrid:
    def test_offsets_preserved_and_outer_zeros(self):
        old = build_grid_by_count(4)
        new = build_grid_by_count(8)
        out = carry_to_grid(_state([0.0, 1.0, 4.0, 1.0, 0.0]), old, new)
        assert np.array_equal(out.u, [0, 0, 0.0, 1.0, 4.0, 1.0, 0.0, 0, 0])
        assert out.u[new.mid] == 4.0

    def test_sup_and_symmetry_preserved(self):
        old = build_grid_by_count(6)
        new = build_grid_by_count(10)
        u = np.array([0.0, 2.0, 5.0, 9.0, 5.0, 2.0, 0.0])
        out = carry_to_grid(_state(u), old, new)
        assert np.max(out.u) == 9.0
        assert np.array_equal(out.u, out.u[::-1])

    def test_refuses_coarsening(self):
        fine = build_grid_by_count(8)
        coarse = build_grid_by_count(4)
        with pytest.raises(ValueError, match="coarsen"):
            carry_to_grid(_state(np.zeros(9)), fine, coarse)
