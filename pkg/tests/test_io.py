import numpy as np
import pytest
from PIL import Image

from vdff.io import read_keyvalue, read_pfm, write_csv, write_depth_png, write_manifest, write_pfm


def test_pfm_roundtrip_is_bit_exact(tmp_path, rng):
    depth = rng.random((7, 5)).astype(np.float32)
    write_pfm(tmp_path / "d.pfm", depth)
    np.testing.assert_array_equal(read_pfm(tmp_path / "d.pfm"), depth)
    raw = (tmp_path / "d.pfm").read_bytes()
    assert raw.startswith(b"Pf\n5 7\n-1.0\n")
    # first stored row is the bottom image row
    assert np.frombuffer(raw[12:32], "<f4")[0] == depth[-1, 0]


def test_pfm_rejects_garbage(tmp_path):
    (tmp_path / "x.pfm").write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
    with pytest.raises(ValueError):
        read_pfm(tmp_path / "x.pfm")


def test_depth_png_colours(tmp_path):
    write_depth_png(tmp_path / "d.png", np.array([[0.0, 1.0]]))
    rgb = np.asarray(Image.open(tmp_path / "d.png"))
    near, far = rgb[0, 0].astype(int), rgb[0, 1].astype(int)
    assert near[2] > near[0] and far[0] > far[2]


def test_keyvalue_and_manifest(tmp_path):
    write_manifest(tmp_path / "m.txt", {"b": 2, "a": "x"})
    text = (tmp_path / "m.txt").read_text().splitlines()
    assert text == sorted(text)
    kv = read_keyvalue(tmp_path / "m.txt")
    assert kv["a"] == "x" and kv["b"] == "2" and "version.numpy" in kv
    (tmp_path / "bad.txt").write_text("no equals sign\n")
    with pytest.raises(ValueError):
        read_keyvalue(tmp_path / "bad.txt")


def test_csv(tmp_path):
    write_csv(tmp_path / "s.csv", ["a", "b"], [[1, "x,y"]])
    assert (tmp_path / "s.csv").read_text().splitlines() == ["a,b", '1,"x,y"']
