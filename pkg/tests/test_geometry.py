import numpy as np
import pytest

from echotriage.geometry import (
    CardiacCycle,
    DegenerateMask,
    NoCycleFound,
    NoCycles,
    UncalibratedClip,
    VolumeMethod,
    area_series,
    biplane_volume,
    compute_lvef,
    detect_cycles,
    disk_volume,
)
from echotriage.segmentation import Chamber, ChamberMask

from . import raster_oracle as oracle


def mask_of(bits, spacing=(0.5, 0.5), frame=0):
    return ChamberMask(Chamber.LV, frame, np.asarray(bits, dtype=bool), spacing)


class TestAreaSeries:
    def test_ten_pixels_at_half_mm(self):
        bits = np.zeros((5, 5), dtype=bool)
        bits.flat[:10] = True
        assert area_series([mask_of(bits)]) == pytest.approx([2.5])

    def test_empty_mask_zero(self):
        assert area_series([mask_of(np.zeros((4, 4)))]) == pytest.approx([0.0])

    def test_matches_analytic_ellipse_area(self):
        # raster area within one pixel-area per boundary pixel of pi*a*b
        spacing = 0.5
        bits = oracle.ellipse_mask(30, 18, spacing)
        area = area_series([mask_of(bits, (spacing, spacing))])[0]
        budget = oracle.boundary_pixel_count(bits) * spacing * spacing
        assert abs(area - oracle.ellipse_area(30, 18)) <= budget

    def test_uncalibrated_rejected(self):
        with pytest.raises(UncalibratedClip):
            area_series([mask_of(np.ones((2, 2)), spacing=None)])

    def test_empty_sequence_rejected(self):
        with pytest.raises(ValueError):
            area_series([])


class TestDetectCycles:
    def test_hand_traced_series(self):
        assert detect_cycles([5, 7, 9, 7, 5, 7, 9]) == [(2, 4)]

    def test_monotone_series_has_no_cycle(self):
        with pytest.raises(NoCycleFound):
            detect_cycles([1, 2, 3, 4])

    def test_too_short_series(self):
        with pytest.raises(NoCycleFound):
            detect_cycles([1, 2])

    def test_two_sinusoid_periods(self):
        # 20 frames per period starting at a trough: peaks at 10 and 30
        t = np.arange(40)
        areas = 10.0 - 4.0 * np.cos(2 * np.pi * t / 20)
        cycles = detect_cycles(areas)
        assert cycles == [(10, 20)]

    def test_phantom_style_three_periods(self):
        # starts at a peak: maxima at 0, 20, 40 plus the rising tail endpoint
        t = np.arange(60)
        areas = 10.0 + 4.0 * np.cos(2 * np.pi * t / 20)
        cycles = detect_cycles(areas)
        assert cycles == [(0, 10), (20, 30), (40, 50)]

    def test_cycles_disjoint_ordered_and_ed_dominates_es(self):
        rng = np.random.default_rng(12)
        t = np.arange(120)
        areas = 20 + 6 * np.cos(2 * np.pi * t / 24) + rng.normal(0, 0.3, 120)
        cycles = detect_cycles(areas)
        assert len(cycles) >= 2
        prev_es = -1
        for ed, es in cycles:
            assert ed < es
            assert ed > prev_es
            prev_es = es
            assert areas[ed] >= areas[es]

    def test_ties_resolve_to_earliest_es(self):
        # flat trough between two peaks: frames 4 and 5 tie, earliest wins
        assert detect_cycles([2, 6, 9, 6, 3, 3, 6, 9, 6, 2]) == [(2, 4)]

    def test_flat_series_no_cycle(self):
        with pytest.raises(NoCycleFound):
            detect_cycles([3, 3, 3, 3, 3])


class TestDiskVolume:
    def test_cylinder_rectangle(self):
        bits = oracle.rectangle_mask(40, 20, 0.5)
        got = disk_volume(mask_of(bits), n_disks=20)
        want = oracle.cylinder_volume_ml(40, 20)
        assert got == pytest.approx(want, rel=0.02)
        assert want == pytest.approx(12.566, abs=0.001)

    def test_prolate_spheroid(self):
        bits = oracle.ellipse_mask(40, 15, 0.5)
        got = disk_volume(mask_of(bits), n_disks=20)
        want = oracle.prolate_spheroid_volume_ml(40, 15)
        assert got == pytest.approx(want, rel=0.02)
        assert want == pytest.approx(37.699, abs=0.001)

    @pytest.mark.parametrize("theta", [0, 17, 30, 45, 60])
    def test_convergence_non_increasing(self, theta):
        bits = oracle.ellipse_mask(40, 15, 0.5, theta_deg=theta)
        want = oracle.prolate_spheroid_volume_ml(40, 15)
        errors = [abs(disk_volume(mask_of(bits), n) - want) for n in (5, 10, 20, 40)]
        assert all(errors[i] >= errors[i + 1] - 1e-12 for i in range(3))
        assert errors[2] <= 0.02 * want

    def test_anisotropic_spacing(self):
        bits = oracle.ellipse_mask(40, 15, 0.5)
        # build the same ellipse on a (0.4, 0.6) grid
        rows = int(np.ceil(2 * 15 / 0.4)) + 8
        cols = int(np.ceil(2 * 40 / 0.6)) + 8
        r = np.arange(rows)[:, None]
        c = np.arange(cols)[None, :]
        y = (r - (rows - 1) / 2) * 0.4
        x = (c - (cols - 1) / 2) * 0.6
        bits = (x / 40) ** 2 + (y / 15) ** 2 <= 1
        got = disk_volume(mask_of(bits, (0.4, 0.6)), n_disks=20)
        assert got == pytest.approx(oracle.prolate_spheroid_volume_ml(40, 15), rel=0.02)

    def test_scale_equivariance(self):
        bits = oracle.ellipse_mask(20, 8, 0.5, theta_deg=25)
        v1 = disk_volume(mask_of(bits, (0.5, 0.5)))
        s = 1.7
        v2 = disk_volume(mask_of(bits, (0.5 * s, 0.5 * s)))
        assert v2 == pytest.approx(v1 * s ** 3, rel=1e-9)

    def test_single_pixel_degenerate(self):
        bits = np.zeros((5, 5), dtype=bool)
        bits[2, 2] = True
        with pytest.raises(DegenerateMask):
            disk_volume(mask_of(bits))

    def test_collinear_degenerate(self):
        bits = np.zeros((5, 8), dtype=bool)
        bits[2, 1:7] = True
        with pytest.raises(DegenerateMask):
            disk_volume(mask_of(bits))

    def test_empty_degenerate(self):
        with pytest.raises(DegenerateMask):
            disk_volume(mask_of(np.zeros((4, 4))))

    def test_uncalibrated_rejected(self):
        with pytest.raises(UncalibratedClip):
            disk_volume(mask_of(np.ones((4, 4)), spacing=None))


class TestBiplaneVolume:
    def test_identical_views_match_single_plane(self):
        bits = oracle.ellipse_mask(40, 15, 0.5)
        m = mask_of(bits)
        single = disk_volume(m, 20)
        both, flags = biplane_volume(m, m, 20)
        assert both == pytest.approx(single, rel=0.005)
        assert flags == frozenset()

    def test_triaxial_ellipsoid(self):
        a4c = mask_of(oracle.ellipse_mask(40, 15, 0.5))
        a2c = mask_of(oracle.ellipse_mask(40, 10, 0.5))
        got, flags = biplane_volume(a4c, a2c, 20)
        want = oracle.triaxial_ellipsoid_volume_ml(40, 15, 10)
        assert got == pytest.approx(want, rel=0.02)
        assert want == pytest.approx(25.133, abs=0.001)
        assert flags == frozenset()

    def test_axis_mismatch_flagged(self):
        a4c = mask_of(oracle.ellipse_mask(40, 15, 0.5))
        a2c = mask_of(oracle.ellipse_mask(25, 15, 0.5))
        _, flags = biplane_volume(a4c, a2c)
        assert "axis-length-mismatch" in flags

    def test_empty_view_degenerate(self):
        a4c = mask_of(oracle.ellipse_mask(40, 15, 0.5))
        with pytest.raises(DegenerateMask):
            biplane_volume(a4c, mask_of(np.zeros((4, 4))))


class TestComputeLvef:
    def cycle(self, ed, es, edv, esv):
        return CardiacCycle(ed_frame=ed, es_frame=es, edv_ml=edv, esv_ml=esv)

    def test_single_cycle_formula(self):
        result = compute_lvef([self.cycle(0, 5, 120.0, 50.0)])
        assert result.per_cycle_lvef[0] == pytest.approx(58.3333, abs=1e-3)
        assert result.mean_lvef == pytest.approx(58.3333, abs=1e-3)
        assert result.cycles_used == 1
        assert "fewer-than-5-beats" in result.quality_flags

    def test_no_ejection(self):
        result = compute_lvef([self.cycle(0, 5, 80.0, 80.0)])
        assert result.mean_lvef == 0.0

    def test_first_five_of_seven(self):
        lvefs = [60, 62, 58, 61, 59, 10, 90]
        cycles = [self.cycle(10 * i, 10 * i + 5, 100.0, 100.0 - v)
                  for i, v in enumerate(lvefs)]
        result = compute_lvef(cycles)
        assert result.cycles_used == 5
        assert result.mean_lvef == pytest.approx(60.0)
        assert "fewer-than-5-beats" not in result.quality_flags

    def test_scale_invariance(self):
        cycles = [self.cycle(0, 4, 130.0, 55.0), self.cycle(8, 12, 128.0, 54.0)]
        scaled = [self.cycle(c.ed_frame, c.es_frame, 3.7 * c.edv_ml, 3.7 * c.esv_ml)
                  for c in cycles]
        assert compute_lvef(cycles).mean_lvef == pytest.approx(
            compute_lvef(scaled).mean_lvef)

    def test_no_cycles_rejected(self):
        with pytest.raises(NoCycles):
            compute_lvef([])

    def test_method_recorded(self):
        result = compute_lvef([self.cycle(0, 5, 100, 40)], VolumeMethod.BIPLANE)
        assert result.method is VolumeMethod.BIPLANE

    def test_invalid_cycles_rejected(self):
        with pytest.raises(ValueError):
            self.cycle(3, 3, 100, 40)
        with pytest.raises(ValueError):
            self.cycle(0, 5, 40, 100)
