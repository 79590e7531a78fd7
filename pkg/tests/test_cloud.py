import math
import struct

import numpy as np
import pytest

from slrecon.cloud import (
    PointCloud,
    ShapeSpec,
    cloud_stats,
    estimate_resolution,
    exact_sdf,
    load_cloud,
    sample_shape,
    write_cloud_xyz,
    _cube_spheres_body_sdf,
    _rotation,
)
from slrecon.errors import (
    CloudFormatError,
    EmptyCloudError,
    InsufficientDataError,
    ParseError,
    ShapeSpecError,
)


def brute_nn_mean(pts, which):
    d = np.linalg.norm(pts[which, None, :] - pts[None, :, :], axis=-1)
    d[np.arange(len(which)), which] = np.inf
    return d.min(axis=1).mean()


class TestLoad:
    def test_xyz_2d(self, tmp_path):
        p = tmp_path / "a.xyz"
        p.write_text("0 0\n1 0\n")
        c = load_cloud(p)
        assert c.dim == 2
        np.testing.assert_array_equal(c.points, [[0, 0], [1, 0]])

    def test_xyz_comments_and_blank_lines(self, tmp_path):
        p = tmp_path / "a.xyz"
        p.write_text("# header\n\n0 0 1\n# mid\n1 2 3\n")
        c = load_cloud(p)
        assert c.dim == 3 and len(c) == 2

    def test_mixed_arity_reports_line(self, tmp_path):
        p = tmp_path / "bad.xyz"
        p.write_text("0 0\n1 0 0\n")
        with pytest.raises(CloudFormatError) as exc:
            load_cloud(p)
        assert exc.value.line == 2
        assert "line 2" in str(exc.value)

    def test_garbage_line(self, tmp_path):
        p = tmp_path / "bad.xyz"
        p.write_text("0 0\n1 x\n")
        with pytest.raises(ParseError) as exc:
            load_cloud(p)
        assert exc.value.line == 2

    def test_empty_file(self, tmp_path):
        p = tmp_path / "e.xyz"
        p.write_text("# nothing\n")
        with pytest.raises(EmptyCloudError):
            load_cloud(p)

    def test_ascii_ply(self, tmp_path):
        p = tmp_path / "a.ply"
        p.write_text(
            "ply\nformat ascii 1.0\ncomment hi\nelement vertex 3\n"
            "property float x\nproperty float y\nproperty float z\nproperty uchar red\n"
            "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
            "0 0 0 255\n1 0 0 255\n0 1 0.5 255\n3 0 1 2\n"
        )
        c = load_cloud(p)
        assert c.dim == 3
        np.testing.assert_allclose(c.points, [[0, 0, 0], [1, 0, 0], [0, 1, 0.5]])

    def test_binary_ply(self, tmp_path):
        p = tmp_path / "b.ply"
        header = (
            b"ply\nformat binary_little_endian 1.0\nelement vertex 2\n"
            b"property double x\nproperty double y\nproperty double z\nend_header\n"
        )
        body = struct.pack("<6d", 0.1, 0.2, 0.3, 1.5, -2.5, 3.25)
        p.write_bytes(header + body)
        c = load_cloud(p)
        np.testing.assert_array_equal(c.points, [[0.1, 0.2, 0.3], [1.5, -2.5, 3.25]])

    def test_ply_bad_header(self, tmp_path):
        p = tmp_path / "c.ply"
        p.write_text("ply\nformat ascii 1.0\nelement vertex 1\nproperty float q\nbogus\n")
        with pytest.raises(ParseError) as exc:
            load_cloud(p)
        assert exc.value.line == 5

    def test_xyz_round_trip_bit_exact(self, tmp_path, rng):
        c = PointCloud(rng.normal(size=(50, 3)) * 1e3)
        p = tmp_path / "r.xyz"
        write_cloud_xyz(c, p)
        np.testing.assert_array_equal(load_cloud(p).points, c.points)

    def test_invariants(self):
        with pytest.raises(EmptyCloudError):
            PointCloud(np.zeros((0, 2)))
        with pytest.raises(CloudFormatError):
            PointCloud([[0.0, np.nan]])
        with pytest.raises(CloudFormatError):
            PointCloud([[0.0, 1.0, 2.0, 3.0]])


class TestResolution:
    def test_circle_matches_chord(self):
        c = sample_shape(ShapeSpec("circle", 64))
        assert estimate_resolution(c, 1.0) == pytest.approx(2 * math.sin(math.pi / 64), abs=1e-12)
        # the 10% sample gives the same value because every spacing is equal
        assert estimate_resolution(c, 0.1, seed=3) == pytest.approx(9.81e-2, abs=5e-5)

    def test_pair(self):
        assert estimate_resolution(PointCloud([[0.0, 0.0], [1.0, 0.0]]), 1.0) == 1.0

    def test_brute_force_oracle(self):
        pts = np.random.default_rng(7).uniform(size=(100, 2))
        got = estimate_resolution(PointCloud(pts), 1.0, seed=7)
        assert got == pytest.approx(brute_nn_mean(pts, np.arange(100)), rel=1e-12)

    def test_seeded_sample_oracle(self):
        pts = np.random.default_rng(1).uniform(size=(300, 3))
        which = np.random.default_rng(5).permutation(300)[:30]
        assert estimate_resolution(PointCloud(pts), 0.1, seed=5) == pytest.approx(brute_nn_mean(pts, which), rel=1e-12)

    def test_permutation_invariant_full_sample(self, rng):
        pts = rng.uniform(size=(80, 2))
        a = estimate_resolution(PointCloud(pts), 1.0)
        b = estimate_resolution(PointCloud(pts[rng.permutation(80)]), 1.0)
        assert a == pytest.approx(b, rel=1e-14)

    def test_single_point(self):
        with pytest.raises(InsufficientDataError):
            estimate_resolution(PointCloud([[0.0, 0.0]]))

    def test_stats(self):
        s = cloud_stats(sample_shape(ShapeSpec("circle", 64)), K_S=2.0)
        assert s.gamma_S == pytest.approx(2 * s.h_S)
        assert all(lo <= hi for lo, hi in zip(s.bbox_min, s.bbox_max))


class TestShapes:
    def test_circle(self):
        c = sample_shape(ShapeSpec("circle", 64))
        assert len(c) == 64
        np.testing.assert_allclose(np.linalg.norm(c.points, axis=1), 1.0, atol=1e-14)

    def test_square45(self):
        e = 1.3
        c = sample_shape(ShapeSpec("square45", 24, {"edge": e}))
        assert len(c) == 24
        th = -math.pi / 4
        rot = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        local = c.points @ rot.T
        np.testing.assert_allclose(np.max(np.abs(local), axis=1), e / 2, atol=1e-14)
        # not axis aligned: the corners sit on the axes
        assert np.max(np.abs(c.points[:, 0])) == pytest.approx(e / math.sqrt(2))

    def test_sphere(self):
        c = sample_shape(ShapeSpec("sphere", 2562))
        np.testing.assert_allclose(np.linalg.norm(c.points, axis=1), 1.0, atol=1e-12)
        from scipy.spatial.distance import pdist
        assert pdist(c.points).min() > 0

    def test_cube_spheres(self):
        spec = ShapeSpec("cube_spheres", 1500)
        c = sample_shape(spec)
        assert abs(len(c) - 1500) < 0.1 * 1500
        np.testing.assert_allclose(exact_sdf(spec, c.points), 0.0, atol=1e-12)

    def test_unknown_kind(self):
        with pytest.raises(ShapeSpecError):
            ShapeSpec("torus", 10)
        with pytest.raises(ShapeSpecError):
            ShapeSpec("circle", 3)
        with pytest.raises(ShapeSpecError):
            ShapeSpec("circle", 10, {"radius": -1.0})


class TestExactSdf:
    def test_examples(self):
        circ = ShapeSpec("circle", 8)
        assert exact_sdf(circ, (2.0, 0.0)) == 1.0
        assert exact_sdf(circ, (0.0, 0.0)) == -1.0
        assert exact_sdf(ShapeSpec("sphere", 8), (0.0, 0.0, 0.5)) == -0.5

    def test_square_corner_and_face(self):
        sq = ShapeSpec("square45", 8, {"edge": 2.0})
        # corner of the rotated square lies on the x axis at sqrt(2)
        assert exact_sdf(sq, (math.sqrt(2), 0.0)) == pytest.approx(0.0, abs=1e-14)
        assert exact_sdf(sq, (0.0, 0.0)) == pytest.approx(-1.0)
        assert exact_sdf(sq, (3.0, 0.0)) == pytest.approx(3.0 - math.sqrt(2))

    def test_union_below_components(self, rng):
        spec = ShapeSpec("cube_spheres", 100)
        q = rng.uniform(-1, 1, size=(500, 3))
        body = q @ _rotation(spec.params["angles"])
        _, parts = _cube_spheres_body_sdf(body, spec.params)
        val = exact_sdf(spec, q)
        for part in parts:
            assert np.all(val <= part + 1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeSpecError):
            exact_sdf(ShapeSpec("circle", 8), (0.0, 0.0, 0.0))
