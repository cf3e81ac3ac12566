"""PFM / PNG round-trip and format rejection tests."""

import numpy as np
import pytest

from panosweep.errors import FormatError
from panosweep.fileio import read_depth_pfm, read_png, write_depth_pfm, write_png
from panosweep.images import DepthMap, ErpImage


def make_depth(h=256, w=512, seed=0):
    rng = np.random.default_rng(seed)
    depth = rng.uniform(0.5, 7.5, (h, w)).astype(np.float32).astype(np.float64)
    valid = rng.uniform(size=(h, w)) > 0.1
    return DepthMap(depth, valid, 0.2, 8.0)


class TestPfm:
    def test_round_trip_bit_exact(self, tmp_path):
        dm = make_depth()
        path = tmp_path / "d.pfm"
        write_depth_pfm(path, dm)
        back = read_depth_pfm(path, 0.2, 8.0)
        # valid pixels bit-identical (stored as float32)
        assert np.array_equal(back.depth[dm.valid],
                              dm.depth.astype(np.float32)[dm.valid])
        assert np.array_equal(back.valid, dm.valid)
        # invalid pixels encode as the negative sentinel
        assert np.all(back.depth[~dm.valid] == -1.0)
        # a second write reproduces the file byte for byte
        path2 = tmp_path / "d2.pfm"
        write_depth_pfm(path2, back)
        assert path.read_bytes() == path2.read_bytes()

    def test_header_layout(self, tmp_path):
        dm = make_depth(4, 8)
        path = tmp_path / "d.pfm"
        write_depth_pfm(path, dm)
        raw = path.read_bytes()
        assert raw.startswith(b"Pf\n8 4\n-1.0\n")
        assert len(raw) == len(b"Pf\n8 4\n-1.0\n") + 4 * 4 * 8

    def test_bottom_to_top_row_order(self, tmp_path):
        depth = np.arange(8, dtype=np.float64).reshape(2, 4) + 1.0
        dm = DepthMap(depth, np.ones((2, 4), bool), 0.5, 10.0)
        path = tmp_path / "d.pfm"
        write_depth_pfm(path, dm)
        raw = path.read_bytes()
        payload = np.frombuffer(raw.split(b"-1.0\n", 1)[1], dtype="<f4")
        # first stored row is the bottom image row (values 5..8)
        np.testing.assert_array_equal(payload[:4], depth[1].astype(np.float32))

    def test_color_pfm_rejected(self, tmp_path):
        path = tmp_path / "c.pfm"
        path.write_bytes(b"PF\n2 2\n-1.0\n" + b"\x00" * 48)
        with pytest.raises(FormatError, match="PF"):
            read_depth_pfm(path)

    def test_big_endian_rejected(self, tmp_path):
        path = tmp_path / "b.pfm"
        path.write_bytes(b"Pf\n2 2\n1.0\n" + b"\x00" * 16)
        with pytest.raises(FormatError, match="big-endian"):
            read_depth_pfm(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "t.pfm"
        path.write_bytes(b"Pf\n4 4\n-1.0\n" + b"\x00" * 10)
        with pytest.raises(FormatError, match="truncated"):
            read_depth_pfm(path)

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "m.pfm"
        path.write_bytes(b"Pf\nnot dims\n-1.0\n")
        with pytest.raises(FormatError):
            read_depth_pfm(path)
        path.write_bytes(b"P6\n2 2\n-1.0\n")
        with pytest.raises(FormatError):
            read_depth_pfm(path)

    def test_huge_dimensions_rejected(self, tmp_path):
        path = tmp_path / "h.pfm"
        path.write_bytes(b"Pf\n100000 100000\n-1.0\n")
        with pytest.raises(FormatError, match="dimensions"):
            read_depth_pfm(path)


class TestPng:
    def test_round_trip_quantized(self, tmp_path):
        rng = np.random.default_rng(2)
        # quantized image survives the 8-bit round trip exactly
        pix = np.round(rng.uniform(0, 1, (64, 128, 3)) * 255) / 255.0
        img = ErpImage(pix)
        path = tmp_path / "i.png"
        write_png(path, img)
        back = read_png(path)
        np.testing.assert_allclose(back.pixels, pix, atol=1e-12)

    def test_generic_image_within_quantization(self, tmp_path):
        rng = np.random.default_rng(3)
        img = ErpImage(rng.uniform(0, 1, (32, 64, 3)))
        path = tmp_path / "i.png"
        write_png(path, img)
        back = read_png(path)
        assert np.abs(back.pixels - img.pixels).max() <= 0.5 / 255 + 1e-12
