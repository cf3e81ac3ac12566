"""Forward-splat view synthesis tests."""

import numpy as np
import pytest

from panosweep.dibr import forward_splat, synthesize_views
from panosweep.errors import NumericalError
from panosweep.geometry import erp_directions, vertical_baseline
from panosweep.images import DepthMap, ErpImage
from panosweep.scene import Checker, SceneSpec, Sphere, checker_sphere_scene, raycast_erp

W, H = 256, 128


@pytest.fixture(scope="module")
def sphere_rgbd():
    scene = checker_sphere_scene(radius=3.0, center=(0.0, 0.0, 0.0))
    return raycast_erp(scene, (0, 0, 0), W, H)


class TestForwardSplat:
    def test_zero_baseline_identity(self, sphere_rgbd):
        img, depth = sphere_rgbd
        out_img, out_depth, weight = forward_splat(img, depth, vertical_baseline(0.0))
        ok = depth.valid
        np.testing.assert_allclose(out_img.pixels[ok], img.pixels[ok], atol=1e-12)
        np.testing.assert_allclose(out_depth.depth[ok], depth.depth[ok], atol=1e-12)
        assert np.all(weight[ok] >= 1.0 - 1e-6)
        assert np.all(out_depth.valid[ok])

    def test_constant_sphere_off_center_depth(self, sphere_rgbd):
        # camera moves +0.2 inside a radius-3 concentric sphere; the new
        # depth must match the analytic off-center ray-sphere distance
        # within the local interpolation band of the splatted raster
        img, depth = sphere_rgbd
        b = 0.2
        _, out_depth, _ = forward_splat(img, depth, vertical_baseline(b))
        dirs = erp_directions(W, H)
        cam = np.array([0.0, b, 0.0])
        bvec = -cam
        proj = dirs @ bvec
        t = proj + np.sqrt(proj**2 + (9.0 - bvec @ bvec))
        analytic = t  # distance from shifted camera to sphere along each ray
        got = out_depth.depth[out_depth.valid]
        want = analytic[out_depth.valid]
        # one-pixel interpolation band: depth varies ~ |d analytic / d row|
        grad = np.abs(np.gradient(analytic, axis=0))
        band = np.maximum(grad[out_depth.valid] * 1.5, 2e-3)
        assert np.all(np.abs(got - want) <= band)
        assert out_depth.valid.mean() > 0.98

    def test_soft_zbuffer_prefers_near(self):
        # two source pixels landing on one target: near wins for small sigma
        depth_vals = np.full((H, W), 5.0)
        depth_vals[40, 10] = 1.0
        depth_vals[90, 10] = 2.5
        valid = np.zeros((H, W), bool)
        valid[40, 10] = True
        valid[90, 10] = True
        pix = np.zeros((H, W, 3))
        pix[40, 10] = [1.0, 0.0, 0.0]
        pix[90, 10] = [0.0, 1.0, 0.0]
        src = ErpImage(pix)
        sd = DepthMap(depth_vals, valid, 0.2, 8.0)
        # zero baseline keeps both pixels where they are; fabricate a clash
        # by splatting with huge sigma vs tiny sigma at the same location:
        # instead verify the weight law directly on a synthetic accumulation
        out_img, out_depth, w = forward_splat(src, sd, vertical_baseline(0.0), sigma_z=0.1)
        # pixels independent here; check law on weights: w = bilin * exp(-(z-zmin)/sigma)
        assert w[40, 10] == pytest.approx(1.0, abs=1e-9)
        assert out_img.pixels[40, 10] == pytest.approx([1.0, 0.0, 0.0], abs=1e-12)

    def test_soft_zbuffer_weight_ratio(self):
        # two source pixels in one column with depths z_k = b/cos(theta_k)
        # reproject exactly onto the equator of the shifted camera and
        # collide in one 2x2 footprint; their color mix must follow the
        # soft z-buffer law  w_far/w_near = exp(-(z'_far - z'_near)/sigma)
        b, sigma, col = 0.35, 0.1, 17
        i1, i2 = 45, 60
        theta1 = (i1 + 0.5) / H * np.pi
        theta2 = (i2 + 0.5) / H * np.pi
        z1 = b / np.cos(theta1)
        z2 = b / np.cos(theta2)
        r1p = z1 * np.sin(theta1)  # radial depth from the shifted camera
        r2p = z2 * np.sin(theta2)
        depth_vals = np.full((H, W), 5.0)
        valid = np.zeros((H, W), bool)
        pix = np.zeros((H, W, 3))
        depth_vals[i1, col], depth_vals[i2, col] = z1, z2
        valid[i1, col] = valid[i2, col] = True
        pix[i1, col] = [1.0, 0.0, 0.0]
        pix[i2, col] = [0.0, 1.0, 0.0]
        out_img, out_depth, _ = forward_splat(
            ErpImage(pix), DepthMap(depth_vals, valid, 0.2, 8.0),
            vertical_baseline(b), sigma_z=sigma)
        target = out_img.pixels[H // 2 - 1, col]
        expected_ratio = np.exp(-(r2p - r1p) / sigma)
        assert target[0] > 0.999
        assert target[1] / target[0] == pytest.approx(expected_ratio, rel=1e-9)
        # output depth is the weighted mean, hence pulled to the near value
        assert out_depth.depth[H // 2 - 1, col] == pytest.approx(r1p, rel=1e-6)

    def test_convex_combination_bounds(self, sphere_rgbd):
        img, depth = sphere_rgbd
        out_img, _, _ = forward_splat(img, depth, vertical_baseline(0.3))
        assert out_img.pixels.min() >= 0.0 and out_img.pixels.max() <= 1.0

    def test_hole_monotonicity(self, sphere_rgbd):
        # occluder in front of the sphere creates disocclusion holes that
        # grow with the baseline magnitude
        scene = SceneSpec([
            Sphere((0, 0, 0), 3.0, Checker(scale=0.55)),
            Sphere((0.0, 0.0, 1.5), 0.5, Checker(scale=0.2)),
        ])
        img, depth = raycast_erp(scene, (0, 0, 0), W, H)
        holes = []
        for b in (0.0, 0.1, 0.2, 0.4):
            _, out_depth, _ = forward_splat(img, depth, vertical_baseline(b))
            holes.append(int((~out_depth.valid).sum()))
        assert holes == sorted(holes)
        assert holes[-1] > holes[0]

    def test_all_invalid_rejected(self):
        pix = np.zeros((H, W, 3))
        depth = DepthMap(np.full((H, W), 1.0), np.zeros((H, W), bool), 0.2, 8.0)
        with pytest.raises(NumericalError):
            forward_splat(ErpImage(pix), depth, vertical_baseline(0.1))


class TestSynthesizeViews:
    def test_single_zero_baseline(self, sphere_rgbd):
        img, depth = sphere_rgbd
        views = synthesize_views(img, depth, [0.0])
        assert len(views) == 1
        np.testing.assert_allclose(views[0].image.pixels, img.pixels, atol=1e-12)

    def test_paper_default_three_views(self, sphere_rgbd):
        img, depth = sphere_rgbd
        views = synthesize_views(img, depth, [-0.24, 0.24, 0.4])
        assert len(views) == 3
        assert [v.baseline.offset for v in views] == [-0.24, 0.24, 0.4]
        for v in views:
            assert v.mask.mean() > 0.95

    def test_four_view_set(self, sphere_rgbd):
        img, depth = sphere_rgbd
        views = synthesize_views(img, depth, [-0.24, -0.12, 0.12, 0.24])
        assert len(views) == 4

    def test_empty_baselines(self, sphere_rgbd):
        img, depth = sphere_rgbd
        with pytest.raises(NumericalError):
            synthesize_views(img, depth, [])
