import math
import struct
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prwalk.grid import BinaryMask, Pixel, ProbabilityMap, Roi, euclidean_distance, pixels_of
from prwalk.raster import RasterError, decode_raster, encode_raster, read_raster, write_raster


# -- types -------------------------------------------------------------------


def test_probability_map_rejects_out_of_range_and_nan():
    with pytest.raises(ValueError):
        ProbabilityMap([[0.0, 1.5]])
    with pytest.raises(ValueError):
        ProbabilityMap([[-0.01]])
    with pytest.raises(ValueError):
        ProbabilityMap([[np.nan, 0.2]])
    with pytest.raises(ValueError):
        ProbabilityMap(np.zeros(4))


def test_grids_are_read_only():
    p = ProbabilityMap(np.zeros((2, 3)))
    m = BinaryMask(np.ones((2, 3)))
    assert (p.width, p.height) == (3, 2)
    with pytest.raises(ValueError):
        p.values[0, 0] = 1.0
    with pytest.raises(ValueError):
        m.values[0, 0] = False


def test_mask_equality_and_count():
    a = BinaryMask([[1, 0], [0, 1]])
    assert a == BinaryMask(np.eye(2, dtype=bool))
    assert a.count() == 2


def test_pixels_of_is_raster_ordered():
    m = np.zeros((3, 3), bool)
    m[2, 0] = m[0, 2] = m[0, 1] = True
    assert pixels_of(m) == [Pixel(1, 0), Pixel(2, 0), Pixel(0, 2)]


@pytest.mark.parametrize("a,b,d", [((0, 0), (3, 4), 5.0), ((7, 7), (7, 7), 0.0), ((1, 1), (2, 2), math.sqrt(2))])
def test_euclidean_distance_examples(a, b, d):
    assert euclidean_distance(Pixel(*a), Pixel(*b)) == pytest.approx(d, abs=1e-15)


coords = st.tuples(st.integers(-500, 500), st.integers(-500, 500))


@given(coords, coords, coords)
def test_distance_is_a_metric(a, b, c):
    ab, bc, ac = euclidean_distance(a, b), euclidean_distance(b, c), euclidean_distance(a, c)
    assert ab == euclidean_distance(b, a) >= 0
    assert ac <= ab + bc + 1e-9


def test_roi_examples():
    r = Roi.around(Pixel(50, 50), 100, 512, 512)
    assert (r.x_min, r.x_max, r.y_min, r.y_max) == (0, 100, 0, 100)
    r = Roi.around(Pixel(5, 5), 100, 512, 512)
    assert (r.x_min, r.x_max, r.y_min, r.y_max) == (0, 55, 0, 55)
    r = Roi.around(Pixel(500, 3), 20, 510, 40)
    assert (r.x_min, r.x_max, r.y_min, r.y_max) == (490, 509, 0, 13)
    assert r.contains(500, 13) and not r.contains(500, 14)
    assert r.to_mask((40, 510)).sum() == r.area


@given(st.integers(0, 63), st.integers(0, 47), st.integers(0, 120))
def test_roi_bounds_inside_image(cx, cy, side):
    r = Roi.around(Pixel(cx, cy), side, 64, 48)
    assert 0 <= r.x_min <= cx <= r.x_max < 64
    assert 0 <= r.y_min <= cy <= r.y_max < 48
    assert r.x_max - r.x_min <= side and r.y_max - r.y_min <= side


# -- PGM ---------------------------------------------------------------------


def test_p5_8bit_examples():
    data = b"P5\n2 1\n255\n" + bytes([255, 0])
    p = decode_raster(data)
    assert p.values.tolist() == [[1.0, 0.0]]
    m = decode_raster(data, "mask")
    assert m.values.tolist() == [[True, False]]


def test_p2_16bit_example():
    data = b"P2\n# a comment\n1 1\n65535\n32768\n"
    p = decode_raster(data)
    assert p.values[0, 0] == 32768 / 65535
    assert p.values[0, 0] == pytest.approx(0.50001, abs=1e-5)


def test_p5_16bit_is_big_endian():
    data = b"P5 2 1 1000\n" + struct.pack(">HH", 1000, 250)
    assert decode_raster(data).values.tolist() == [[1.0, 0.25]]


@pytest.mark.parametrize("data,offset", [
    (b"P5\n2 2\n255\n\x00\x01\x02", 14),  # one byte short
    (b"P5\n2 x\n255\n", 5),
    (b"P5\n0 2\n255\n", 3),
    (b"P2\n2 1\n10\n3 11\n", 12),  # sample above maxval
    (b"P5\n1 1\n255", 10),  # no separator after maxval
    (b"XX\n1 1\n", 0),
])
def test_pgm_errors_name_offset(data, offset):
    with pytest.raises(RasterError) as info:
        decode_raster(data)
    assert info.value.offset == offset
    assert str(offset) in str(info.value)


@settings(max_examples=60)
@given(st.integers(1, 9), st.integers(1, 9), st.data())
def test_mask_round_trip_exact(h, w, data):
    bits = data.draw(st.lists(st.booleans(), min_size=h * w, max_size=h * w))
    m = BinaryMask(np.array(bits).reshape(h, w))
    for fmt in ("pgm", "png"):
        assert decode_raster(encode_raster(m, fmt=fmt), "mask") == m


@settings(max_examples=60)
@given(st.integers(1, 8), st.integers(1, 8), st.sampled_from([255, 1000, 65535]), st.data())
def test_probability_round_trip_within_half_step(h, w, maxval, data):
    vals = data.draw(st.lists(st.floats(0, 1), min_size=h * w, max_size=h * w))
    p = ProbabilityMap(np.array(vals).reshape(h, w))
    back = decode_raster(encode_raster(p, maxval=maxval))
    assert np.max(np.abs(back.values - p.values)) <= 1 / (2 * maxval) + 1e-15


def test_half_at_8bit():
    back = decode_raster(encode_raster(ProbabilityMap([[0.5]]), maxval=255))
    assert back.values[0, 0] in (127 / 255, 128 / 255)
    assert abs(back.values[0, 0] - 0.5) <= 1 / 510


def test_probability_default_is_16bit_pgm():
    data = encode_raster(ProbabilityMap([[0.25, 1.0]]))
    assert data.startswith(b"P5\n2 1\n65535\n")


def test_degenerate_grid_rejected():
    with pytest.raises(ValueError):
        encode_raster(np.zeros((0, 0), dtype=bool))


def test_file_round_trip(tmp_path):
    m = BinaryMask(np.eye(5, dtype=bool))
    write_raster(tmp_path / "m.png", m)
    write_raster(tmp_path / "m.pgm", m)
    assert read_raster(tmp_path / "m.png", "mask") == m
    assert read_raster(tmp_path / "m.pgm", "mask") == m


# -- PNG ---------------------------------------------------------------------


def _paeth(a, b, c):
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    return b if pb <= pc else c


def _png_with_filters(img: np.ndarray, filters) -> bytes:
    """Independent forward filtering, one filter type per row."""
    h, w = img.shape
    raw = bytearray()
    prev = [0] * w
    for y in range(h):
        row = [int(v) for v in img[y]]
        f = filters[y % len(filters)]
        out = []
        for x in range(w):
            a = row[x - 1] if x else 0
            b = prev[x]
            c = prev[x - 1] if x else 0
            pred = [0, a, b, (a + b) // 2, _paeth(a, b, c)][f]
            out.append((row[x] - pred) % 256)
        raw.append(f)
        raw.extend(out)
        prev = row

    def chunk(t, body):
        return struct.pack(">I", len(body)) + t + body + struct.pack(">I", zlib.crc32(t + body))

    ihdr = struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0)
    idat = zlib.compress(bytes(raw))
    # split the stream over two IDAT chunks
    return (b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr) + chunk(b"IDAT", idat[:5])
            + chunk(b"IDAT", idat[5:]) + chunk(b"IEND", b""))


def test_png_all_filter_types():
    rng = np.random.default_rng(4)
    img = rng.integers(0, 256, size=(10, 7))
    data = _png_with_filters(img, [0, 1, 2, 3, 4])
    back = decode_raster(data)
    assert np.array_equal(np.round(back.values * 255).astype(int), img)


def test_png_matches_pillow_when_available(tmp_path):
    Image = pytest.importorskip("PIL.Image")
    rng = np.random.default_rng(5)
    img = rng.integers(0, 256, size=(13, 9)).astype(np.uint8)
    Image.fromarray(img, mode="L").save(tmp_path / "x.png", optimize=True)
    back = read_raster(tmp_path / "x.png")
    assert np.array_equal(np.round(back.values * 255).astype(np.uint8), img)
    ours = encode_raster(ProbabilityMap(img / 255.0), fmt="png")
    (tmp_path / "y.png").write_bytes(ours)
    assert np.array_equal(np.asarray(Image.open(tmp_path / "y.png")), img)


def test_png_rejects_bad_crc_and_depth():
    good = encode_raster(BinaryMask([[1, 0]]), fmt="png")
    bad = bytearray(good)
    bad[20] ^= 0xFF  # inside IHDR body
    with pytest.raises(RasterError, match="CRC"):
        decode_raster(bytes(bad))
    ihdr = struct.pack(">IIBBBBB", 1, 1, 16, 0, 0, 0, 0)
    body = b"IHDR" + ihdr
    data = b"\x89PNG\r\n\x1a\n" + struct.pack(">I", 13) + body + struct.pack(">I", zlib.crc32(body))
    with pytest.raises(RasterError, match="bit depth 16") as info:
        decode_raster(data)
    assert info.value.offset == 24


def test_png_truncated():
    good = encode_raster(BinaryMask([[1, 0]]), fmt="png")
    with pytest.raises(RasterError, match="truncated"):
        decode_raster(good[:30])
