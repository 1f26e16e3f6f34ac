import math

import numpy as np
import pytest

from tweezersim.traps import (TrapConfig, default_hdt, default_vdt,
                              nearest_well, potential_at, stiffness_ratio,
                              total_potential, well_center)


@pytest.fixture
def hdt():
    return default_hdt()


@pytest.fixture
def vdt():
    return default_vdt()


class TestPotential:
    def test_well_center_gives_full_depth(self, hdt):
        for k in (-3, 0, 7):
            point = (0.0, well_center(hdt, k), 0.0)
            assert potential_at(hdt, point) == pytest.approx(-0.8, abs=1e-15)

    def test_quarter_wavelength_node(self, hdt):
        y = well_center(hdt, 0) + hdt.wavelength / 4.0
        assert potential_at(hdt, (0.0, y, 0.0)) == pytest.approx(0.0, abs=1e-12)

    def test_one_waist_off_axis(self, hdt):
        point = (hdt.waist, well_center(hdt, 0), 0.0)
        assert potential_at(hdt, point) == pytest.approx(-0.8 * math.exp(-2),
                                                         rel=1e-12)

    def test_never_positive_and_bounded(self, hdt):
        rng = np.random.default_rng(3)
        for _ in range(300):
            p = tuple(rng.uniform(-60, 60, size=3))
            u = potential_at(hdt, p)
            assert -hdt.depth <= u <= 0.0

    def test_axial_periodicity_exact_reduction(self, hdt):
        rng = np.random.default_rng(4)
        spacing = hdt.well_spacing
        for _ in range(200):
            y = rng.uniform(-40, 40)
            x = rng.uniform(-5, 5)
            a = potential_at(hdt, (x, y, 0.0))
            b = potential_at(hdt, (x, y + spacing, 0.0))
            assert b == pytest.approx(a, rel=1e-12, abs=1e-13)

    def test_vertical_trap_axis_orientation(self, vdt):
        # wells stack along z; moving along z by a quarter wavelength kills
        # the potential, moving along x only decays the Gaussian
        assert potential_at(vdt, (0.0, 0.0, 0.0)) == pytest.approx(-1.5)
        node = potential_at(vdt, (0.0, 0.0, vdt.wavelength / 4.0))
        assert node == pytest.approx(0.0, abs=1e-12)
        off = potential_at(vdt, (vdt.waist, 0.0, 0.0))
        assert off == pytest.approx(-1.5 * math.exp(-2), rel=1e-12)


class TestTotalPotential:
    def test_single_trap_identity(self, hdt):
        point = (1.0, 2.0, 0.5)
        assert total_potential([(hdt, 1.0)], point) == potential_at(hdt, point)

    def test_all_scales_zero(self, hdt, vdt):
        rng = np.random.default_rng(5)
        for _ in range(20):
            p = tuple(rng.uniform(-30, 30, size=3))
            assert total_potential([(hdt, 0.0), (vdt, 0.0)], p) == 0.0

    def test_far_trap_contributes_gaussian_tail_only(self, hdt, vdt):
        # point on the HDT axis, 5 VDT waists away from the VDT beam line
        point = (5.0 * vdt.waist, well_center(hdt, 0), 0.0)
        both = total_potential([(hdt, 1.0), (vdt, 1.0)], point)
        alone = potential_at(hdt, point)
        assert abs(both - alone) <= 1e-6 * vdt.depth

    def test_scale_out_of_range_rejected(self, hdt):
        with pytest.raises(ValueError):
            total_potential([(hdt, 1.5)], (0.0, 0.0, 0.0))


class TestNearestWell:
    def test_offset_maps_to_well_zero(self):
        cfg = TrapConfig("t", 1.064, 19.0, 0.8, "y", axial_phase_offset=3.7)
        assert nearest_well(cfg, 3.7).index == 0

    def test_one_spacing_up(self, hdt):
        assert nearest_well(hdt, 0.532).index == 1

    def test_exact_tie_resolves_to_lower_index(self, hdt):
        assert nearest_well(hdt, 0.266).index == 0
        assert nearest_well(hdt, 0.532 + 0.266).index == 1
        assert nearest_well(hdt, -0.266).index == -1

    def test_round_trip_over_indices(self, hdt):
        for k in range(-200, 201):
            assert nearest_well(hdt, well_center(hdt, k)).index == k

    def test_round_trip_with_shift(self, hdt):
        shift = 12.3456789
        for k in range(-50, 51):
            y = well_center(hdt, k, axial_shift=shift)
            assert nearest_well(hdt, y, axial_shift=shift).index == k

    def test_trap_id_carried(self, vdt):
        w = nearest_well(vdt, 0.0)
        assert w.trap_id == "vdt" and w.index == 0


def _fd_curvature_ratio(cfg, h=1e-4):
    y0 = well_center(cfg, 0)
    if cfg.axis == "y":
        ax = lambda d: (0.0, y0 + d, 0.0)
        ra = lambda d: (d, y0, 0.0)
    else:
        ax = lambda d: (0.0, 0.0, y0 + d)
        ra = lambda d: (d, 0.0, 0.0)
    dd_ax = (potential_at(cfg, ax(h)) - 2 * potential_at(cfg, ax(0.0))
             + potential_at(cfg, ax(-h))) / h ** 2
    dd_ra = (potential_at(cfg, ra(h)) - 2 * potential_at(cfg, ra(0.0))
             + potential_at(cfg, ra(-h))) / h ** 2
    return dd_ax / dd_ra


class TestStiffness:
    def test_matches_finite_difference_oracle(self, hdt, vdt):
        for cfg in (hdt, vdt):
            assert stiffness_ratio(cfg) == pytest.approx(
                _fd_curvature_ratio(cfg), rel=1e-3)

    def test_apparatus_values(self, hdt, vdt):
        # frozen from the finite-difference oracle above
        assert stiffness_ratio(hdt) == pytest.approx(6.294e3, rel=1e-3)
        assert stiffness_ratio(vdt) == pytest.approx(1.861e3, rel=1e-3)
        assert stiffness_ratio(hdt) > 50 and stiffness_ratio(vdt) > 50

    def test_unity_construction(self):
        wavelength = 1.0
        waist = wavelength / (2 * math.pi) * math.sqrt(2.0)
        cfg = TrapConfig("t", wavelength, waist, 1.0, "y")
        assert stiffness_ratio(cfg) == pytest.approx(1.0, rel=1e-12)


class TestValidation:
    @pytest.mark.parametrize("kwargs", [
        {"wavelength": -1.0}, {"wavelength": 0.0}, {"waist": 0.0},
        {"depth": -0.1}, {"axis": "x"},
    ])
    def test_bad_geometry_rejected(self, kwargs):
        base = dict(name="t", wavelength=1.064, waist=19.0, depth=0.8,
                    axis="y")
        base.update(kwargs)
        with pytest.raises(ValueError):
            TrapConfig(**base)

    def test_well_spacing_is_half_wavelength(self, hdt):
        assert hdt.well_spacing == hdt.wavelength / 2.0
