import io
import itertools
import time
from math import comb
from pathlib import Path

import numpy as np
import pytest

from tapid.encoding import (
    IMAGE_COLS,
    IMAGE_ROWS,
    IMAGE_SEQUENCE,
    PGM_HEADER,
    SignalImage,
    SignalSequence,
    encode_image,
    generate_sequence,
    max_symbols,
    pgm_bytes,
    read_pgm,
    verify_coverage,
    write_pgm,
)
from tapid.errors import InvalidInputError
from tapid.signal import normalize_signal

GOLDEN = Path(__file__).parent / "data" / "checkerboard.pgm"


def covers_all(symbols, k, n):
    """Independent check: every n-subset is some window's symbol set."""
    windows = {frozenset(symbols[i : i + n]) for i in range(len(symbols) - n + 1)}
    return all(frozenset(c) in windows for c in itertools.combinations(range(k), n))


def test_image_sequence_covers_all_triplets():
    cov = verify_coverage(SignalSequence(IMAGE_SEQUENCE))
    assert len(IMAGE_SEQUENCE) == 25
    assert (cov.covered, cov.total, cov.missing) == (20, 20, [])


def test_generate_six_three():
    start = time.perf_counter()
    seq = generate_sequence(6, 3)
    assert time.perf_counter() - start < 1.0
    assert len(seq) <= 25
    assert verify_coverage(seq).complete
    assert covers_all(seq.symbols, 6, 3)


def test_generate_small_cases():
    assert generate_sequence(3, 3).symbols == (0, 1, 2)
    assert len(generate_sequence(4, 3)) == 6


def test_four_three_optimum_by_exhaustion():
    # no sequence of length 5 covers the 4 triplets of {0,1,2,3}; some of length 6 does
    assert not any(covers_all(s, 4, 3) for s in itertools.product(range(4), repeat=5))
    assert any(covers_all(s, 4, 3) for s in itertools.product(range(4), repeat=6))


@pytest.mark.parametrize("k,n", [(k, n) for k in range(2, 8) for n in range(2, k + 1)])
def test_generate_exhaustive_coverage(k, n):
    seq = generate_sequence(k, n)
    cov = verify_coverage(seq)
    assert cov.complete and cov.covered == comb(k, n)
    assert covers_all(seq.symbols, k, n)
    assert len(seq) <= max_symbols(k, n) <= k * comb(k, n)


def test_generate_rejects_bad_window():
    with pytest.raises(InvalidInputError):
        generate_sequence(3, 4)


def test_coverage_partial_and_repeats():
    cov = verify_coverage(SignalSequence((0, 1, 2)))
    assert cov.covered == 1 and len(cov.missing) == 19
    assert verify_coverage(SignalSequence((0, 0, 0))).covered == 0


def test_identical_signals_give_identical_rows(rng):
    sig = normalize_signal(rng.normal(size=150))
    img = encode_image(np.tile(sig, (6, 1)))
    assert img.pixels.shape == (IMAGE_ROWS, IMAGE_COLS)
    assert (img.pixels == img.pixels[0]).all()
    assert img.pixels.max() == 255


def test_zero_signals_give_black_image():
    assert not encode_image(np.zeros((6, 150))).pixels.any()


def test_single_ramp_against_pixel_oracle():
    ramp = normalize_signal(np.linspace(0, 1, 150))
    signals = np.zeros((6, 150))
    signals[0] = ramp
    img = encode_image(signals).pixels
    peak = ramp.max()
    for r, sym in enumerate(IMAGE_SEQUENCE):
        for col in range(150):
            expected = int(np.floor(255 * signals[sym, col] / peak + 0.5)) if sym == 0 else 0
            assert img[r, col] == expected
    assert img[0, -1] == 255


def test_quantization_bound_and_rows_by_symbol(rng):
    signals = np.stack([normalize_signal(rng.normal(size=150)) for _ in range(6)])
    img = encode_image(signals).pixels.astype(float)
    peak = signals.max()
    for r, sym in enumerate(IMAGE_SEQUENCE):
        assert np.all(np.abs(img[r] / 255 * peak - signals[sym]) <= peak / 510 + 1e-12)
    for a, b in itertools.combinations(range(25), 2):
        if IMAGE_SEQUENCE[a] == IMAGE_SEQUENCE[b]:
            assert (img[a] == img[b]).all()


def test_scale_invariance_through_normalization(rng):
    raw = rng.normal(size=(6, 150))
    a = encode_image(np.stack([normalize_signal(r) for r in raw]))
    b = encode_image(np.stack([normalize_signal(3.7 * r) for r in raw]))
    np.testing.assert_array_equal(a.pixels, b.pixels)


def test_per_signal_rescale(rng):
    signals = np.stack([normalize_signal(rng.normal(size=150)) for _ in range(6)])
    img = encode_image(signals, rescale="per-signal").pixels
    assert all(img[r].max() == 255 for r in range(25))
    with pytest.raises(InvalidInputError):
        encode_image(signals, rescale="nope")


def test_encode_rejects_signal_count():
    with pytest.raises(InvalidInputError):
        encode_image(np.zeros((5, 150)))


def test_pgm_zero_image():
    data = pgm_bytes(SignalImage(np.zeros((25, 150), np.uint8)))
    assert len(data) == len(PGM_HEADER) + 3750 == 3764
    assert data[: len(PGM_HEADER)] == b"P5\n150 25\n255\n"
    assert data[len(PGM_HEADER) :] == bytes(3750)


def checkerboard():
    r, c = np.indices((25, 150))
    return SignalImage(np.where((r + c) % 2 == 0, 0, 255).astype(np.uint8))


def test_pgm_golden_checkerboard():
    buf = io.BytesIO()
    assert write_pgm(checkerboard(), buf) == 3764
    assert buf.getvalue() == GOLDEN.read_bytes()


def test_golden_file_readable_by_pillow():
    from PIL import Image

    with Image.open(GOLDEN) as im:
        assert im.mode == "L" and im.size == (150, 25)
        np.testing.assert_array_equal(np.asarray(im), checkerboard().pixels)


def test_pgm_round_trip(rng):
    img = SignalImage(rng.integers(0, 256, (25, 150)).astype(np.uint8))
    np.testing.assert_array_equal(read_pgm(pgm_bytes(img)), img.pixels)


def test_sequence_prints_comma_separated():
    assert str(SignalSequence((0, 1, 2))) == "0,1,2"
