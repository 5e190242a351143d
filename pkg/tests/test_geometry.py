import math

import numpy as np
import pytest
from scipy.stats import spearmanr

from fovregress.core.geometry.geometry import (
    CameraPose,
    FrustumPolygon,
    convex_polygon_intersection_area,
    fov_overlap,
    frustum_polygon,
    heading_difference,
    heading_from_track,
    is_positive,
    psi_matrix,
)
from fovregress.utils.exceptions import InputError


def random_pose(rng, pose_id=0):
    return CameraPose(
        pose_id,
        rng.uniform(0.0, 20.0),
        rng.uniform(0.0, 20.0),
        rng.uniform(0.0, 2.0 * math.pi),
        rng.uniform(0.2, 2.8),
        rng.uniform(5.0, 15.0),
    )


def signed_area(v):
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def monte_carlo_psi(a, b, n_samples, rng):
    fa, fb = frustum_polygon(a), frustum_polygon(b)
    pts = np.vstack([fa.vertices, fb.vertices])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    samples = rng.uniform(lo, hi, size=(n_samples, 2))
    in_a, in_b = fa.contains(samples), fb.contains(samples)
    union = np.count_nonzero(in_a | in_b)
    return np.count_nonzero(in_a & in_b) / union


class TestCameraPose:
    def test_heading_is_normalized(self):
        pose = CameraPose.from_degrees(1, 0.0, 0.0, 370.0, 90.0, 10.0)
        assert pose.heading == pytest.approx(math.radians(10.0))
        assert 0.0 <= CameraPose(2, 0, 0, -0.5, 1.0, 1.0).heading < 2.0 * math.pi

    @pytest.mark.parametrize("fov, rng_m", [(0.0, 1.0), (math.pi, 1.0), (1.0, 0.0), (1.0, -3.0)])
    def test_degenerate_frustums_are_rejected(self, fov, rng_m):
        with pytest.raises(InputError):
            CameraPose(0, 0.0, 0.0, 0.0, fov, rng_m)

    def test_negative_id_is_rejected(self):
        with pytest.raises(InputError):
            CameraPose(-1, 0.0, 0.0, 0.0, 1.0, 1.0)


class TestFrustumPolygon:
    def test_quarter_turn_triangle(self):
        poly = frustum_polygon(CameraPose(0, 0.0, 0.0, 0.0, math.pi / 2, 1.0))
        c = math.cos(math.pi / 4)
        np.testing.assert_allclose(poly.vertices, [[0, 0], [c, -c], [c, c]], atol=1e-15)
        assert signed_area(poly.vertices) > 0

    def test_apex_and_ray_angles(self):
        poly = frustum_polygon(CameraPose(0, 5.0, 5.0, math.pi, math.pi / 3, 2.0))
        np.testing.assert_allclose(poly.vertices[0], [5.0, 5.0])
        rays = poly.vertices[1:] - poly.vertices[0]
        np.testing.assert_allclose(np.linalg.norm(rays, axis=1), [2.0, 2.0])
        angles = sorted(np.arctan2(rays[:, 1], rays[:, 0]) % (2 * math.pi))
        np.testing.assert_allclose(angles, [math.pi - math.pi / 6, math.pi + math.pi / 6])

    def test_area_identity(self, rng):
        for _ in range(50):
            pose = random_pose(rng)
            half = pose.fov_angle / 2
            expected = pose.range ** 2 * math.sin(half) * math.cos(half)
            assert frustum_polygon(pose).area() == pytest.approx(expected, rel=1e-12)
            assert signed_area(frustum_polygon(pose).vertices) > 0

    def test_rejects_too_few_vertices(self):
        with pytest.raises(InputError):
            FrustumPolygon(np.array([[0.0, 0.0], [1.0, 0.0]]))


class TestIntersectionArea:
    square = FrustumPolygon(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))

    def test_self_intersection(self):
        assert convex_polygon_intersection_area(self.square, self.square) == pytest.approx(1.0)

    def test_shifted_square(self):
        shifted = FrustumPolygon(self.square.vertices + [0.5, 0.0])
        assert convex_polygon_intersection_area(self.square, shifted) == pytest.approx(0.5)

    def test_disjoint(self):
        far = FrustumPolygon(self.square.vertices + [3.0, 0.0])
        assert convex_polygon_intersection_area(self.square, far) == 0.0

    def test_matches_shapely_and_is_symmetric(self, rng):
        for _ in range(100):
            fa, fb = frustum_polygon(random_pose(rng)), frustum_polygon(random_pose(rng))
            ours = convex_polygon_intersection_area(fa, fb)
            exact = fa.to_shapely().intersection(fb.to_shapely()).area
            assert ours == pytest.approx(exact, abs=1e-9)
            assert convex_polygon_intersection_area(fb, fa) == pytest.approx(ours, abs=1e-9)


class TestFovOverlap:
    def test_reflexive(self, rng):
        for _ in range(20):
            pose = random_pose(rng)
            assert fov_overlap(pose, pose) == 1.0

    def test_identical_poses_with_different_ids(self):
        a = CameraPose(1, 3.0, 4.0, 1.0, 1.2, 10.0)
        b = CameraPose(2, 3.0, 4.0, 1.0, 1.2, 10.0)
        assert fov_overlap(a, b) == 1.0

    def test_far_apart_is_zero(self):
        a = CameraPose(1, 0.0, 0.0, 0.0, 1.0, 10.0)
        b = CameraPose(2, 25.0, 0.0, math.pi, 1.0, 10.0)
        assert fov_overlap(a, b) == 0.0

    def test_symmetric_and_bounded(self, rng):
        for _ in range(2000):
            a, b = random_pose(rng, 0), random_pose(rng, 1)
            psi = fov_overlap(a, b)
            assert 0.0 <= psi <= 1.0
            assert fov_overlap(b, a) == psi

    def test_monotone_along_view_axis(self):
        a = CameraPose(0, 0.0, 0.0, 0.0, math.radians(90), 30.0)
        values = [fov_overlap(a, CameraPose(1, t, 0.0, 0.0, math.radians(90), 30.0))
                  for t in np.linspace(0.0, 40.0, 81)]
        assert values[0] == 1.0
        assert np.all(np.diff(values) <= 1e-12)
        assert values[-1] == 0.0

    def test_overlap_falls_with_separation(self, rng):
        a = CameraPose(0, 0.0, 0.0, 0.0, math.radians(90), 30.0)
        dist, psi = [], []
        for k in range(300):
            r, angle = rng.uniform(0.0, 60.0), rng.uniform(0.0, 2.0 * math.pi)
            b = CameraPose(k + 1, r * math.cos(angle), r * math.sin(angle), 0.0, math.radians(90), 30.0)
            dist.append(r)
            psi.append(fov_overlap(a, b))
        assert spearmanr(dist, psi).correlation < -0.5

    def test_headings_one_fov_apart(self):
        fov = math.radians(60)
        a = CameraPose(0, 0.0, 0.0, 0.0, fov, 10.0)
        b = CameraPose(1, 0.0, 0.0, fov, fov, 10.0)
        # The two triangles share an edge only.
        assert fov_overlap(a, b) == pytest.approx(0.0, abs=1e-12)
        c = CameraPose(2, 0.0, 0.0, fov / 2, fov, 10.0)
        assert fov_overlap(a, c) == pytest.approx(monte_carlo_psi(a, c, 10 ** 6, np.random.default_rng(0)),
                                                  abs=1e-2)

    def test_matches_monte_carlo_oracle(self):
        rng = np.random.default_rng(7)
        mc_rng = np.random.default_rng(8)
        checked = 0
        while checked < 100:
            a, b = random_pose(rng, 0), random_pose(rng, 1)
            psi = fov_overlap(a, b)
            if psi == 0.0:
                continue
            assert psi == pytest.approx(monte_carlo_psi(a, b, 10 ** 6, mc_rng), abs=1e-2)
            checked += 1

    def test_psi_matrix_matches_pairwise(self, rng):
        queries = [random_pose(rng, k) for k in range(6)]
        maps = [random_pose(rng, 10 + k) for k in range(9)]
        expected = np.array([[fov_overlap(q, m) for m in maps] for q in queries])
        np.testing.assert_array_equal(psi_matrix(queries, maps), expected)
        assert psi_matrix([], maps).shape == (0, 9)


class TestIsPositive:
    def test_within_thresholds(self):
        a = CameraPose.from_degrees(0, 0.0, 0.0, 0.0, 90.0, 30.0)
        b = CameraPose.from_degrees(1, 6.0, 8.0, 10.0, 90.0, 30.0)
        assert is_positive(a, b, 25.0, math.radians(40))

    def test_too_far(self):
        a = CameraPose.from_degrees(0, 0.0, 0.0, 0.0, 90.0, 30.0)
        b = CameraPose.from_degrees(1, 30.0, 0.0, 0.0, 90.0, 30.0)
        assert not is_positive(a, b, 25.0, math.radians(40))

    def test_boundaries(self):
        a = CameraPose.from_degrees(0, 0.0, 0.0, 0.0, 90.0, 30.0)
        inside = CameraPose.from_degrees(1, 25.0, 0.0, 39.9, 90.0, 30.0)
        on_angle = CameraPose.from_degrees(2, 0.0, 0.0, 40.0, 90.0, 30.0)
        assert is_positive(a, inside, 25.0, math.radians(40))
        assert not is_positive(a, on_angle, 25.0, math.radians(40))

    def test_heading_difference_is_circular(self):
        assert heading_difference(math.radians(350), math.radians(10)) == pytest.approx(math.radians(20))
        a = CameraPose.from_degrees(0, 0.0, 0.0, 350.0, 90.0, 30.0)
        b = CameraPose.from_degrees(1, 0.0, 0.0, 10.0, 90.0, 30.0)
        assert is_positive(a, b, 25.0, math.radians(40))

    def test_zero_thresholds_reject_everything(self):
        a = CameraPose(0, 0.0, 0.0, 0.0, 1.0, 1.0)
        assert not is_positive(a, a, 0.0, 0.0)

    def test_negative_threshold(self):
        a = CameraPose(0, 0.0, 0.0, 0.0, 1.0, 1.0)
        with pytest.raises(InputError):
            is_positive(a, a, -1.0, 0.5)


def test_heading_from_track():
    assert heading_from_track((0.0, 0.0), (0.0, 1.0)) == pytest.approx(math.pi / 2)
    assert heading_from_track((0.0, 0.0), (-1.0, 0.0)) == pytest.approx(math.pi)
    assert heading_from_track((0.0, 0.0), (1.0, -1.0)) == pytest.approx(7 * math.pi / 4)
