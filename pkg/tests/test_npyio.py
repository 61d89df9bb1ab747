"""NPY subset reader/writer: round-trips, numpy interop, typed failures."""

import io
import struct
import warnings

import numpy as np
import pytest

from helpers import mutate_npy, random_mask, random_multimask, random_scores


def scores_fixture(seed: int, k: int, h: int, w: int):
    return random_scores(np.random.default_rng(seed), k, h, w)

from crcseg.errors import (
    BadMagic,
    DataSizeError,
    FortranOrderUnsupported,
    HeaderParseError,
    InvalidMultiMask,
    NpyFormatError,
    ShapeRankError,
    SoftmaxValidationError,
    UnsupportedDescriptor,
    UnsupportedVersion,
)
from crcseg.npyio import (
    MAGIC,
    _header_bytes,
    parse_scores_bytes,
    read_mask,
    read_multimask,
    read_scores,
    scores_bytes,
    write_mask,
    write_multimask,
    write_scores,
)


def header_blob(descr="'<f4'", order="False", shape="(3, 2, 2)", keys=None) -> bytes:
    """Hand-built preamble + a generous payload, for error-path probes."""
    if keys is None:
        body = f"{{'descr': {descr}, 'fortran_order': {order}, 'shape': {shape}, }}"
    else:
        body = keys
    header = body + "\n"
    blob = MAGIC + b"\x01\x00" + struct.pack("<H", len(header)) + header.encode("latin-1")
    return blob + bytes(3 * 2 * 2 * 4)


# ------------------------------------------------------------ round-trips


def test_scores_round_trip_is_bit_exact(tmp_path):
    scores = scores_fixture(0, k=4, h=6, w=5)
    path = tmp_path / "scores.npy"
    write_scores(path, scores)
    again = read_scores(path)
    assert np.array_equal(again.values, scores.values)
    write_scores(tmp_path / "twice.npy", scores)
    assert path.read_bytes() == (tmp_path / "twice.npy").read_bytes()


@pytest.mark.parametrize("dtype", [np.uint8, np.uint16])
def test_mask_round_trip(tmp_path, dtype):
    k = 4 if dtype == np.uint8 else 300
    mask = random_mask(np.random.default_rng(1), k=k, h=6, w=5, ignore_fraction=0.2, dtype=dtype)
    path = tmp_path / "mask.npy"
    write_mask(path, mask)
    again = read_mask(path, k)
    assert again.labels.dtype == dtype
    assert np.array_equal(again.labels, mask.labels)


def test_multimask_round_trip(tmp_path):
    mask = random_multimask(np.random.default_rng(2), k=5, h=4, w=4)
    path = tmp_path / "mm.npy"
    write_multimask(path, mask)
    assert np.array_equal(read_multimask(path).bits, mask.bits)


def test_numpy_can_load_our_files(tmp_path):
    scores = scores_fixture(3, k=3, h=4, w=4)
    path = tmp_path / "scores.npy"
    write_scores(path, scores)
    assert np.array_equal(np.load(path), scores.values)


def test_we_can_load_numpy_files(tmp_path):
    values = scores_fixture(4, k=3, h=4, w=4).values
    path = tmp_path / "np.npy"
    np.save(path, values)
    assert np.array_equal(read_scores(path).values, values)
    labels = np.zeros((4, 4), np.uint8)
    np.save(tmp_path / "mask.npy", labels)
    assert np.array_equal(read_mask(tmp_path / "mask.npy", 3).labels, labels)


def test_header_is_64_byte_aligned():
    for shape in [(3, 2, 2), (19, 128, 256), (7,) * 3, (4, 4)]:
        blob = _header_bytes("<f4", shape)
        assert len(blob) % 64 == 0
        assert blob.endswith(b"\n")


def test_scores_bytes_matches_write_scores(tmp_path):
    scores = scores_fixture(5, k=3, h=5, w=7)
    path = tmp_path / "s.npy"
    write_scores(path, scores)
    assert scores_bytes(scores) == path.read_bytes()


# ------------------------------------------------------------ typed errors


def test_bad_magic():
    with pytest.raises(BadMagic):
        parse_scores_bytes(b"\x93NUMPZ" + bytes(100))
    with pytest.raises(BadMagic):
        parse_scores_bytes(b"")


def test_unsupported_versions():
    for version in (b"\x02\x00", b"\x03\x00", b"\x00\x01"):
        with pytest.raises(UnsupportedVersion):
            parse_scores_bytes(MAGIC + version + bytes(64))
    with pytest.raises(UnsupportedVersion):
        parse_scores_bytes(MAGIC + b"\x01")  # cut mid-version


def test_header_length_and_text_errors():
    with pytest.raises(HeaderParseError):
        parse_scores_bytes(MAGIC + b"\x01\x00\x40")  # cut mid-length
    with pytest.raises(HeaderParseError):
        parse_scores_bytes(MAGIC + b"\x01\x00" + struct.pack("<H", 500) + b"{}")
    with pytest.raises(HeaderParseError):
        parse_scores_bytes(header_blob(keys="{'descr': '<f4', \xff\xfe}"))
    with pytest.raises(HeaderParseError):
        parse_scores_bytes(header_blob(keys="not a dict at all"))
    with pytest.raises(HeaderParseError):
        parse_scores_bytes(header_blob(keys="{'descr': '<f4', 'shape': (3, 2, 2)}"))
    with pytest.raises(HeaderParseError):
        parse_scores_bytes(header_blob(keys="[1, 2, 3]"))


def test_fortran_order_errors():
    with pytest.raises(FortranOrderUnsupported):
        parse_scores_bytes(header_blob(order="True"))
    with pytest.raises(HeaderParseError):
        parse_scores_bytes(header_blob(order="1"))
    with pytest.raises(HeaderParseError):
        parse_scores_bytes(header_blob(order="'False'"))


def test_descriptor_errors():
    for descr in ("'<f8'", "'>f4'", "'|i1'", "'<u4'", "12"):
        with pytest.raises((UnsupportedDescriptor, HeaderParseError)):
            parse_scores_bytes(header_blob(descr=descr))
    # masks reject float descriptors outright
    with pytest.raises(UnsupportedDescriptor):
        read_mask(io.BytesIO(header_blob(shape="(2, 2)")), 3)


def test_shape_errors():
    with pytest.raises(HeaderParseError):
        parse_scores_bytes(header_blob(shape="[3, 2, 2]"))
    with pytest.raises(HeaderParseError):
        parse_scores_bytes(header_blob(shape="(3, 2.5, 2)"))
    with pytest.raises(HeaderParseError):
        parse_scores_bytes(header_blob(shape="(3, True, 2)"))
    with pytest.raises(ShapeRankError):
        parse_scores_bytes(header_blob(shape="(4, 4)"))
    with pytest.raises(ShapeRankError):
        parse_scores_bytes(header_blob(shape="(3, 0, 2)"))
    with pytest.raises(ShapeRankError):
        parse_scores_bytes(header_blob(shape="(3, -2, 2)"))
    with pytest.raises(ShapeRankError):
        parse_scores_bytes(header_blob(shape="(1, 4, 3)"))  # k < 2


def test_size_errors(tmp_path):
    scores = scores_fixture(6, k=3, h=2, w=2)
    good = scores_bytes(scores)
    with pytest.raises(DataSizeError):
        parse_scores_bytes(good[:-5])
    with pytest.raises(DataSizeError):
        parse_scores_bytes(good + b"\x00")


def test_multimask_value_check(tmp_path):
    bad = np.full((3, 2, 2), 2, np.uint8)
    path = tmp_path / "bad.npy"
    np.save(path, bad)
    with pytest.raises(InvalidMultiMask):
        read_multimask(path)
    np.save(path, np.zeros((1, 2, 2), np.uint8))
    with pytest.raises(ShapeRankError):
        read_multimask(path)


def test_scores_validation_is_applied():
    values = np.full((2, 2, 2), 0.9, np.float32)
    blob = _header_bytes("<f4", values.shape) + values.tobytes()
    with pytest.raises(SoftmaxValidationError):
        parse_scores_bytes(blob)
    loose = parse_scores_bytes(blob, validate=False)
    assert loose.values[0, 0, 0] == np.float32(0.9)


# ------------------------------------------------------------ header fuzz


def test_thousand_mutated_headers_fail_closed():
    """Damaged preambles must raise typed format errors, never escape."""
    rng = np.random.default_rng(90210)
    pristine = scores_bytes(scores_fixture(7, k=3, h=4, w=4))
    outcomes = {"ok": 0, "typed": 0}
    with warnings.catch_warnings():
        # literal_eval warns about bogus escapes in garbage header text
        warnings.simplefilter("ignore", SyntaxWarning)
        warnings.simplefilter("ignore", DeprecationWarning)
        for _ in range(1000):
            blob = mutate_npy(rng, pristine)
            try:
                parsed = parse_scores_bytes(blob)
            except NpyFormatError:
                outcomes["typed"] += 1
            except SoftmaxValidationError:
                # header survived but the payload reads as non-softmax floats
                outcomes["typed"] += 1
            else:
                # mutation landed in padding or was a no-op; result must be sane
                assert parsed.dims.k >= 2
                outcomes["ok"] += 1
    assert outcomes["typed"] > 0
    assert outcomes["ok"] + outcomes["typed"] == 1000
