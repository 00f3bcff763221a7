import gzip

import numpy as np
import pytest

from valveseg.errors import NrrdFormatError
from valveseg.nrrd_io import load_mask, load_nrrd, load_nrrd_bytes, nrrd_bytes, save_nrrd
from valveseg.volume import Grid, LabelMask, Volume3D


def small_volume():
    grid = Grid((2, 2, 2), (1, 1, 1), np.zeros(3), np.eye(3))
    return Volume3D(grid, np.arange(8, dtype=np.float32).reshape(2, 2, 2))


def test_round_trip_identity(tmp_path):
    vol = small_volume()
    path = tmp_path / "v.nrrd"
    save_nrrd(vol, path)
    back = load_nrrd(path)
    assert np.array_equal(back.data, vol.data)
    assert back.grid.matches(vol.grid)


def test_round_trip_ramp_bit_exact(tmp_path):
    grid = Grid((5, 4, 3), (0.4, 0.5, 0.6), np.array([1.0, 2.0, 3.0]), np.eye(3))
    rng = np.random.default_rng(11)
    vol = Volume3D(grid, rng.normal(size=(5, 4, 3)).astype(np.float32))
    for encoding in ("raw", "gzip"):
        path = tmp_path / f"r_{encoding}.nrrd"
        save_nrrd(vol, path, encoding=encoding)
        back = load_nrrd(path)
        assert back.data.tobytes() == vol.data.tobytes()


def test_round_trip_orientation(tmp_path):
    rot = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    grid = Grid((3, 3, 3), (0.45, 0.45, 0.45), np.array([-7.25, 0.5, 12.0]), rot)
    vol = Volume3D(grid, np.zeros((3, 3, 3), np.float32))
    path = tmp_path / "o.nrrd"
    save_nrrd(vol, path)
    back = load_nrrd(path)
    assert np.max(np.abs(back.grid.orientation - rot)) < 1e-9
    assert np.max(np.abs(np.asarray(back.grid.spacing) - 0.45)) < 1e-9
    assert np.max(np.abs(back.grid.origin - grid.origin)) < 1e-9


def test_mask_round_trip(tmp_path):
    grid = Grid((4, 4, 4), (1, 1, 1), np.zeros(3), np.eye(3))
    rng = np.random.default_rng(5)
    mask = LabelMask(grid, rng.random((4, 4, 4)) > 0.5)
    path = tmp_path / "m.nrrd"
    save_nrrd(mask, path)
    back = load_mask(path)
    assert np.array_equal(back.data, mask.data)


def test_raw_payload_length(tmp_path):
    vol = small_volume()
    path = tmp_path / "c.nrrd"
    save_nrrd(vol, path, encoding="raw")
    raw = path.read_bytes()
    header_end = raw.index(b"\n\n") + 2
    assert len(raw) - header_end == 2 * 2 * 2 * 4  # float32


def test_rejects_dimension_4():
    content = b"NRRD0004\ndimension: 4\nsizes: 2 2 2 2\ntype: uint8\nencoding: raw\n\n" + bytes(16)
    with pytest.raises(NrrdFormatError) as err:
        load_nrrd_bytes(content)
    assert "dimension" in str(err.value)


def test_rejects_unknown_type():
    content = b"NRRD0004\ndimension: 3\nsizes: 2 2 2\ntype: int64\nencoding: raw\n\n" + bytes(64)
    with pytest.raises(NrrdFormatError) as err:
        load_nrrd_bytes(content)
    assert "type" in str(err.value)


def test_rejects_truncated_payload():
    content = b"NRRD0004\ndimension: 3\nsizes: 2 2 2\ntype: uint8\nencoding: raw\n\n" + bytes(5)
    with pytest.raises(NrrdFormatError) as err:
        load_nrrd_bytes(content)
    assert "data" in str(err.value)


def test_rejects_bad_magic():
    with pytest.raises(NrrdFormatError):
        load_nrrd_bytes(b"NOPE0001\n\n")


def test_missing_space_directions_warns(caplog):
    content = b"NRRD0004\ndimension: 3\nsizes: 2 2 2\ntype: uint8\nencoding: raw\n\n" + bytes(8)
    with caplog.at_level("WARNING"):
        vol = load_nrrd_bytes(content)
    assert vol.grid.spacing == (1.0, 1.0, 1.0)
    assert any("space directions" in r.message for r in caplog.records)


def test_independent_writer_fixture():
    """Gzip NRRD assembled by hand (header text + gzip module), independent of
    this package's writer; the sample pattern must come back exactly."""
    pattern = np.arange(24, dtype=np.uint8)  # x-fastest on disk
    header = (
        "NRRD0004\n"
        "# hand-assembled fixture\n"
        "type: unsigned char\n"
        "dimension: 3\n"
        "sizes: 2 3 4\n"
        "encoding: gzip\n"
        "space directions: (0.5,0,0) (0,0.5,0) (0,0,0.5)\n"
        "space origin: (1,2,3)\n"
        "\n"
    ).encode("ascii")
    vol = load_nrrd_bytes(header + gzip.compress(pattern.tobytes()))
    assert vol.grid.dims == (2, 3, 4)
    # x-fastest order: sample (i,j,k) = i + 2*j + 6*k
    i, j, k = np.meshgrid(np.arange(2), np.arange(3), np.arange(4), indexing="ij")
    assert np.array_equal(vol.data, (i + 2 * j + 6 * k).astype(np.float32))
    assert np.allclose(vol.grid.origin, [1, 2, 3])


def test_nrrd_bytes_round_trip():
    vol = small_volume()
    back = load_nrrd_bytes(nrrd_bytes(vol, encoding="gzip"))
    assert np.array_equal(back.data, vol.data)


def test_big_endian_raw():
    data = np.arange(8, dtype=">u2")
    content = (b"NRRD0004\ndimension: 3\nsizes: 2 2 2\ntype: uint16\n"
               b"endian: big\nencoding: raw\n\n") + data.tobytes()
    vol = load_nrrd_bytes(content)
    assert np.array_equal(vol.data.ravel(order="F"), np.arange(8, dtype=np.float32))


def test_raw_multibyte_requires_endian():
    content = b"NRRD0004\ndimension: 3\nsizes: 2 2 2\ntype: uint16\nencoding: raw\n\n" + bytes(16)
    with pytest.raises(NrrdFormatError) as err:
        load_nrrd_bytes(content)
    assert "endian" in str(err.value)
