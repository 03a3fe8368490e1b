import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cellseg import (
    BinaryMask,
    LabelMap,
    Raster,
    ZStack,
    load_labels,
    load_raster,
    max_project,
    save_labels,
    save_raster,
)
from cellseg.errors import (
    CorruptFileError,
    DimensionMismatchError,
    DimensionOverflowError,
    EmptyStackError,
    LabelOverflowError,
    SampleRangeError,
    UnsupportedFormatError,
)
from cellseg.raster import RAS_MAGIC


def test_raster_rejects_nonfinite():
    with pytest.raises(SampleRangeError):
        Raster(np.array([[1.0, np.nan]]))
    with pytest.raises(SampleRangeError):
        Raster(np.array([[np.inf, 0.0]]))


def test_raster_rejects_bad_shape():
    with pytest.raises(DimensionMismatchError):
        Raster(np.zeros(4))
    with pytest.raises(DimensionMismatchError):
        Raster(np.zeros((0, 3)))


def test_raster_is_immutable():
    r = Raster(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        r.samples[0, 0] = 1.0


def test_labelmap_invariants():
    with pytest.raises(SampleRangeError):
        LabelMap(np.array([[-1, 0]]))
    with pytest.raises(SampleRangeError):
        LabelMap(np.array([[0.5, 1.0]]))
    lm = LabelMap(np.array([[0, 3], [7, 3]]))
    assert lm.distinct_labels().tolist() == [3, 7]


def test_png16_roundtrip_spec_values(tmp_path):
    r = Raster(np.array([[0, 17], [255, 65535]], dtype=np.uint16))
    p = tmp_path / "a.png"
    save_raster(r, p, "png16")
    back = load_raster(p)
    assert back.samples.dtype == np.float32
    assert back.samples.tolist() == [[0.0, 17.0], [255.0, 65535.0]]


def test_png16_boundary_values(tmp_path):
    r = Raster(np.array([[0.0, 65535.0]]))
    p = tmp_path / "b.png"
    save_raster(r, p, "png16")
    assert load_raster(p).samples.tolist() == [[0.0, 65535.0]]


def test_png16_range_errors(tmp_path):
    with pytest.raises(SampleRangeError):
        save_raster(Raster(np.array([[1.5]])), tmp_path / "x.png", "png16")
    with pytest.raises(SampleRangeError):
        save_raster(Raster(np.array([[-1.0]])), tmp_path / "x.png", "png16")
    with pytest.raises(SampleRangeError):
        save_raster(Raster(np.array([[65536.0]])), tmp_path / "x.png", "png16")


def test_ras_roundtrip_f32(tmp_path):
    r = Raster(np.array([[1.5, -2.0, 0.0]], dtype=np.float32))
    p = tmp_path / "a.ras"
    save_raster(r, p, "ras")
    back = load_raster(p)
    assert back.width == 3 and back.height == 1
    assert np.array_equal(back.samples, r.samples)


def test_ras_bytes_are_exact_container(tmp_path):
    r = Raster(np.array([[1.5, -2.0, 0.0]], dtype=np.float32))
    p = tmp_path / "a.ras"
    save_raster(r, p, "ras")
    data = p.read_bytes()
    assert data[:4] == RAS_MAGIC
    w, h, dtype = struct.unpack_from("<III", data, 4)
    assert (w, h, dtype) == (3, 1, 3)
    assert data[16:] == np.array([1.5, -2.0, 0.0], dtype="<f4").tobytes()
    # round-trip is the identity on the file bytes
    save_raster(load_raster(p), tmp_path / "b.ras", "ras")
    assert (tmp_path / "b.ras").read_bytes() == data


@settings(max_examples=50, deadline=None)
@given(
    arrays(
        np.float32,
        st.tuples(st.integers(1, 12), st.integers(1, 12)),
        elements=st.floats(width=32, allow_nan=False, allow_infinity=False),
    )
)
def test_ras_roundtrip_any_finite(tmp_path_factory, arr):
    p = tmp_path_factory.mktemp("ras") / "x.ras"
    save_raster(Raster(arr), p, "ras")
    assert np.array_equal(load_raster(p).samples, np.asarray(arr, dtype=np.float32))


def test_ras_integer_dtypes_load_unscaled(tmp_path):
    for dtype, code, top in (("<u1", 0, 255), ("<u2", 1, 65535), ("<u4", 2, 70000)):
        payload = np.array([[3, 0], [top, 1]], dtype=dtype)
        p = tmp_path / f"d{code}.ras"
        p.write_bytes(RAS_MAGIC + struct.pack("<III", 2, 2, code) + payload.tobytes())
        back = load_raster(p)
        assert np.array_equal(back.samples, payload.astype(np.float32))


def test_bad_magic(tmp_path):
    p = tmp_path / "bad.ras"
    p.write_bytes(b"XXXX" + b"\x00" * 20)
    with pytest.raises(UnsupportedFormatError):
        load_raster(p)


def test_truncated_ras(tmp_path):
    p = tmp_path / "t.ras"
    p.write_bytes(RAS_MAGIC + struct.pack("<III", 4, 4, 3) + b"\x00" * 7)
    with pytest.raises(CorruptFileError):
        load_raster(p)


def test_dimension_overflow_header(tmp_path):
    p = tmp_path / "big.ras"
    p.write_bytes(RAS_MAGIC + struct.pack("<III", 2**16, 2**16, 0))
    with pytest.raises(DimensionOverflowError):
        load_raster(p)


def test_nonfinite_ras_payload(tmp_path):
    p = tmp_path / "nan.ras"
    p.write_bytes(
        RAS_MAGIC + struct.pack("<III", 2, 1, 3) + np.array([np.nan, 1.0], "<f4").tobytes()
    )
    with pytest.raises(CorruptFileError):
        load_raster(p)


def test_color_png_rejected(tmp_path):
    from PIL import Image

    p = tmp_path / "rgb.png"
    Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8)).save(p)
    with pytest.raises(UnsupportedFormatError):
        load_raster(p)
    with pytest.raises(UnsupportedFormatError):
        load_labels(p)


def test_labels_png_roundtrip(tmp_path):
    lm = LabelMap(np.array([[0, 1], [1, 2]]))
    p = tmp_path / "l.png"
    save_labels(lm, p, "png16")
    back = load_labels(p)
    assert np.array_equal(back.labels, lm.labels)
    assert back.distinct_labels().tolist() == [1, 2]


def test_labels_all_zero(tmp_path):
    p = tmp_path / "z.png"
    save_labels(LabelMap(np.zeros((4, 4), dtype=np.int32)), p, "png16")
    assert len(load_labels(p).distinct_labels()) == 0


def test_label_overflow_png16(tmp_path):
    lm = LabelMap(np.array([[70000]], dtype=np.int64))
    with pytest.raises(LabelOverflowError):
        save_labels(lm, tmp_path / "o.png", "png16")
    # the same map still round-trips via RAS (promoted to u32)
    p = tmp_path / "o.ras"
    save_labels(lm, p, "ras")
    assert load_labels(p).labels[0, 0] == 70000


def test_labels_reject_float_ras(tmp_path):
    save_raster(Raster(np.ones((2, 2), dtype=np.float32)), tmp_path / "f.ras", "ras")
    with pytest.raises(UnsupportedFormatError):
        load_labels(tmp_path / "f.ras")


def test_max_project_identity():
    r = Raster(np.arange(6, dtype=np.float32).reshape(2, 3))
    out = max_project(ZStack((r,)))
    assert np.array_equal(out.samples, r.samples)


def test_max_project_constant_planes():
    planes = tuple(Raster(np.full((3, 3), v, dtype=np.float32)) for v in (1, 2, 3, 4))
    assert np.all(max_project(ZStack(planes)).samples == 4)


def test_max_project_elementwise():
    a = Raster(np.array([[1.0, 5.0]]))
    b = Raster(np.array([[4.0, 2.0]]))
    assert max_project(ZStack((a, b))).samples.tolist() == [[4.0, 5.0]]


def test_max_project_plane_order_irrelevant():
    rng = np.random.default_rng(5)
    planes = [Raster(rng.random((6, 7), dtype=np.float32)) for _ in range(4)]
    fwd = max_project(ZStack(tuple(planes)))
    rev = max_project(ZStack(tuple(reversed(planes))))
    assert np.array_equal(fwd.samples, rev.samples)


def test_zstack_errors():
    with pytest.raises(EmptyStackError):
        ZStack(())
    with pytest.raises(DimensionMismatchError):
        ZStack((Raster(np.zeros((2, 2))), Raster(np.zeros((3, 2)))))


def test_binary_mask_coercion():
    m = BinaryMask(np.array([[0, 2], [1, 0]]))
    assert m.bits.dtype == bool
    assert m.bits.tolist() == [[False, True], [True, False]]
