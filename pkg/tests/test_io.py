import numpy as np
import pytest

from egoscene import io
from egoscene.errors import ParseError
from egoscene.pose import JOINT_NAMES, Pose


@pytest.mark.parametrize("dtype", [np.uint8, np.float32, np.float64, np.int32])
def test_volume_round_trip(tmp_path, dtype, rng):
    arr = (rng.uniform(0, 100, (4, 5, 6)) ).astype(dtype)
    io.write_volume(tmp_path / "v.egvx", arr)
    back = io.read_volume(tmp_path / "v.egvx")
    assert back.dtype == arr.dtype and np.array_equal(back, arr)


def test_volume_bad_magic(tmp_path):
    (tmp_path / "x.egvx").write_bytes(b"nope" + bytes(20))
    with pytest.raises(ParseError):
        io.read_volume(tmp_path / "x.egvx")


def test_ply_round_trip(tmp_path, rng):
    pts = rng.normal(size=(50, 3))
    io.write_ply(tmp_path / "c.ply", pts)
    assert np.allclose(io.read_ply(tmp_path / "c.ply"), pts, atol=1e-12)


@pytest.mark.parametrize("maxval,dtype", [(255, np.uint8), (65535, np.uint16)])
def test_pgm_round_trip(tmp_path, rng, maxval, dtype):
    img = rng.integers(0, maxval + 1, (7, 9)).astype(dtype)
    io.write_pgm(tmp_path / "i.pgm", img, maxval)
    assert np.array_equal(io.read_pgm(tmp_path / "i.pgm"), img)


def test_pose_and_detections(tmp_path, rng):
    pose = Pose(rng.normal(size=(15, 3)))
    io.write_pose(tmp_path / "p.json", pose)
    assert io.read_pose(tmp_path / "p.json") == pose
    uv = rng.uniform(0, 300, (15, 2))
    conf = rng.uniform(0, 1, 15)
    io.write_detections(tmp_path / "d.json", uv, conf, JOINT_NAMES)
    uv2, conf2 = io.read_detections(tmp_path / "d.json")
    assert np.allclose(uv2, uv) and np.allclose(conf2, conf)
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ParseError):
        io.read_detections(tmp_path / "bad.json")
