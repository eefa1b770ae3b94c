import struct

import numpy as np
import pytest

from signcut.containers import (
    FormatError,
    read_ppm,
    read_raw,
    read_scd,
    scd_size,
    truncate_scd,
    write_ppm,
    write_raw,
    write_scd,
)
from signcut.decompose import CutDecomposition, DecomposeConfig, expand, greedy_decompose, rgb_scalars_decompose
from signcut.search import SearchConfig


def two_by_two():
    A = np.array([[2.0, 0.0], [0.0, 2.0]])
    d, _ = greedy_decompose(A, DecomposeConfig(width=2, search=SearchConfig(restarts=4)))
    return d


class TestScd:
    def test_width_zero(self):
        d = CutDecomposition.empty((3, 5))
        data = write_scd(d)
        assert len(data) == scd_size((3, 5), 0) == 4 + 2 + 16 + 8 + 1
        assert read_scd(data) == d

    def test_small_round_trip(self):
        d = two_by_two()
        data = write_scd(d)
        assert read_scd(data) == d
        assert len(data) == scd_size((2, 2), 2)

    def test_header_layout(self):
        d = two_by_two()
        data = write_scd(d, 64)
        assert data[:4] == b"SCD1"
        assert data[4:6] == bytes([2, 0])
        assert struct.unpack("<2QQB", data[6:31]) == (2, 2, 2, 64)
        assert struct.unpack("<2d", data[31:47]) == tuple(d.coefficients)
        # term-major planes: term 0 axis 0, term 0 axis 1, term 1 axis 0, ...
        assert data[47:] == b"".join(f[j].to_bytes() for j in range(2) for f in d.factors)

    def test_random_round_trip_and_size(self, rng):
        for shape in [(13, 70), (5, 4, 9), (130,)]:
            d, _ = greedy_decompose(rng.standard_normal(shape), DecomposeConfig(width=11))
            data = write_scd(d)
            assert read_scd(data) == d
            assert len(data) == scd_size(shape, 11)
            assert len(data) == 4 + 2 + 8 * len(shape) + 9 + 11 * 8 + 11 * sum((n + 7) // 8 for n in shape)

    def test_f32_coefficients(self, rng):
        d, _ = greedy_decompose(rng.standard_normal((9, 9)), DecomposeConfig(width=5))
        back = read_scd(write_scd(d, 32))
        np.testing.assert_array_equal(back.coefficients, d.coefficients.astype(np.float32).astype(np.float64))
        assert back.factors == d.factors
        assert len(write_scd(d, 32)) == scd_size((9, 9), 5, 32)

    def test_channel_mode(self, rng):
        a = rng.standard_normal((6, 7, 3))
        d, _ = rgb_scalars_decompose(a, DecomposeConfig(width=4))
        data = write_scd(d)
        assert data[5] == 1 and data[6] == 2
        assert read_scd(data) == d
        assert len(data) == scd_size(a.shape, 4, 64, channel_axis=2)
        np.testing.assert_array_equal(expand(read_scd(data)), expand(d))

    def test_truncation(self, rng):
        d, _ = greedy_decompose(rng.standard_normal((10, 12)), DecomposeConfig(width=9))
        data = write_scd(d)
        for w in (0, 1, 4, 9):
            assert read_scd(data, w) == d.truncated(w)
            assert read_scd(truncate_scd(data, w)) == d.truncated(w)
        a = rng.standard_normal((5, 6, 3))
        dc, _ = rgb_scalars_decompose(a, DecomposeConfig(width=5))
        assert read_scd(truncate_scd(write_scd(dc, 32), 2)) == read_scd(write_scd(dc, 32), 2)

    def test_errors(self):
        data = write_scd(two_by_two())
        with pytest.raises(FormatError):
            read_scd(b"XXXX" + data[4:])
        with pytest.raises(FormatError):
            read_scd(data[:-1])
        with pytest.raises(FormatError):
            read_scd(data[:10])
        with pytest.raises(FormatError):
            read_scd(data + b"\x00")
        huge = b"SCD1" + bytes([2, 0]) + struct.pack("<2QQB", 2**40, 2**40, 0, 64)
        with pytest.raises(FormatError):
            read_scd(huge)
        with pytest.raises(ValueError):
            write_scd(two_by_two(), 16)


class TestRaw:
    def test_f64_round_trip(self, rng):
        A = rng.standard_normal((2, 3))
        back = read_raw(write_raw(A))
        assert back.tobytes() == A.tobytes()

    def test_header(self):
        data = write_raw(np.zeros((2, 3)), "f32")
        assert data[:4] == b"DTEN"
        assert data[4] == 2
        assert struct.unpack("<2Q", data[5:21]) == (2, 3)
        assert data[21] == 0
        assert len(data) == 22 + 6 * 4

    def test_widening(self, rng):
        A = rng.standard_normal((4, 5)).astype(np.float32)
        back, dtype = read_raw(write_raw(A, "f32"), return_dtype=True)
        assert dtype == "f32" and back.dtype == np.float64
        np.testing.assert_array_equal(back, A.astype(np.float64))

    def test_u8_matches_ppm(self, rng):
        img = rng.integers(0, 256, size=(4, 6, 3), dtype=np.uint8)
        ppm = b"P6\n6 4\n255\n" + img.tobytes()
        np.testing.assert_array_equal(read_raw(write_raw(img, "u8")), read_ppm(ppm))

    def test_rejections(self):
        data = write_raw(np.ones((2, 2)))
        with pytest.raises(FormatError):
            read_raw(b"NOPE" + data[4:])
        with pytest.raises(FormatError):
            read_raw(data[:-3])
        with pytest.raises(FormatError):
            read_raw(data[:21] + bytes([9]) + data[22:])
        with pytest.raises(FormatError):
            read_raw(b"DTEN" + bytes([2]) + struct.pack("<2Q", 0, 3) + bytes([1]))
        with pytest.raises(ValueError):
            write_raw(np.zeros((0, 3)))
        with pytest.raises(ValueError):
            write_raw(np.array([1.5]), "u8")


class TestPpm:
    def test_white_pixel(self):
        data = b"P6\n1 1\n255\n\xff\xff\xff"
        img = read_ppm(data)
        np.testing.assert_array_equal(img, np.full((1, 1, 3), 255.0))
        assert write_ppm(img) == data

    def test_clamp_and_round(self):
        img = np.array([[[255.7, -3.2, 127.5]], [[0.49, 254.5, 12.0]]])
        data = write_ppm(img)
        assert data.endswith(bytes([255, 0, 128, 0, 255, 12]))

    def test_random_round_trip(self, rng):
        img = rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8)
        data = b"P6\n8 8\n255\n" + img.tobytes()
        assert write_ppm(read_ppm(data)) == data

    def test_comments_and_whitespace(self):
        data = b"P6 # comment\n2\t1\n# another\n255\n" + bytes(range(6))
        np.testing.assert_array_equal(read_ppm(data).ravel(), np.arange(6.0))

    def test_rejections(self):
        with pytest.raises(FormatError):
            read_ppm(b"P3\n1 1\n255\n1 2 3")
        with pytest.raises(FormatError):
            read_ppm(b"P6\n1 1\n65535\n" + bytes(6))
        with pytest.raises(FormatError):
            read_ppm(b"P6\n2 2\n255\n" + bytes(5))
        with pytest.raises(ValueError):
            write_ppm(np.zeros((2, 2)))
