"""Triplet-covering row order and the 25x150 gray-scale signal image."""

from __future__ import annotations

import io
import itertools
from dataclasses import dataclass, field
from math import comb
from typing import BinaryIO, Sequence

import numpy as np

from .errors import FormatError, InvalidInputError
from .signal import SIGNAL_LENGTH

# Row order used for every encoded image unless another sequence is given.
IMAGE_SEQUENCE = (0, 1, 2, 3, 4, 5, 0, 2, 4, 5, 1, 3, 0, 4, 1, 2, 5, 3, 0, 2, 0, 5, 1, 3, 4)

IMAGE_ROWS = len(IMAGE_SEQUENCE)
IMAGE_COLS = SIGNAL_LENGTH
PGM_HEADER = b"P5\n150 25\n255\n"


@dataclass(frozen=True)
class SignalSequence:
    symbols: tuple[int, ...]
    k: int = 6
    n: int = 3

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        if any(s < 0 or s >= self.k for s in self.symbols):
            raise InvalidInputError(f"symbols must lie in 0..{self.k - 1}")

    def __len__(self):
        return len(self.symbols)

    def __str__(self):
        return ",".join(str(s) for s in self.symbols)


@dataclass(frozen=True)
class Coverage:
    covered: int
    total: int
    missing: list[tuple[int, ...]] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.missing


def _windows(symbols: Sequence[int], n: int):
    for i in range(len(symbols) - n + 1):
        window = symbols[i : i + n]
        if len(set(window)) == n:
            yield frozenset(window)


def verify_coverage(seq: SignalSequence) -> Coverage:
    """Report which unordered n-subsets appear as distinct-symbol windows."""
    seen = set(_windows(seq.symbols, seq.n))
    subsets = list(itertools.combinations(range(seq.k), seq.n))
    missing = [s for s in subsets if frozenset(s) not in seen]
    return Coverage(covered=len(subsets) - len(missing), total=len(subsets), missing=missing)


def generate_sequence(k: int = 6, n: int = 3) -> SignalSequence:
    """Greedily grow a sequence whose length-n windows cover every n-subset.

    Each step appends the fewest symbols that put a new, uncovered subset in
    the trailing window; among equally short extensions the lexicographically
    smallest one wins, which makes the result deterministic.
    """
    if n < 2 or n > k:
        raise InvalidInputError(f"need 2 <= n <= k, got k={k}, n={n}")
    remaining = {frozenset(c) for c in itertools.combinations(range(k), n)}
    seq: list[int] = []
    while remaining:
        for extra in range(max(1, n - len(seq)), n + 1):
            choice = _first_extension(seq, extra, k, n, remaining)
            if choice is not None:
                break
        appended, gained = choice
        seq.extend(appended)
        remaining -= gained
    return SignalSequence(tuple(seq), k=k, n=n)


def _first_extension(seq, extra, k, n, remaining):
    for appended in itertools.product(range(k), repeat=extra):
        candidate = seq + list(appended)
        start = max(0, len(seq) - n + 1)
        gained = {w for w in _windows(candidate[start:], n) if w in remaining}
        if gained:
            return appended, gained
    return None


@dataclass(frozen=True)
class SignalImage:
    pixels: np.ndarray
    source_user: str = ""
    source_tap: int = -1

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.shape != (IMAGE_ROWS, IMAGE_COLS):
            raise InvalidInputError(f"image must be {IMAGE_ROWS}x{IMAGE_COLS}, got {px.shape}")
        if px.dtype != np.uint8:
            if np.any(px < 0) or np.any(px > 255):
                raise InvalidInputError("pixels must lie in [0, 255]")
            px = px.astype(np.uint8)
        px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)


def encode_image(
    signals,
    seq: SignalSequence | None = None,
    rescale: str = "global",
    source_user: str = "",
    source_tap: int = -1,
) -> SignalImage:
    """Stack six normalized signals by ``seq`` and quantize to 8 bits.

    With ``rescale="global"`` one maximum over all six signals maps to 255, so
    the relative magnitudes left by L2 normalization survive. ``"per-signal"``
    stretches each signal to its own maximum instead.
    """
    sig = np.asarray(signals, dtype=np.float64)
    if sig.ndim != 2 or sig.shape[0] != 6:
        raise InvalidInputError(f"expected 6 signals, got array of shape {sig.shape}")
    if seq is None:
        seq = SignalSequence(IMAGE_SEQUENCE)
    if seq.k != 6:
        raise InvalidInputError("sequence must be over an alphabet of 6 signals")
    if len(seq) != IMAGE_ROWS:
        raise InvalidInputError(f"sequence must have {IMAGE_ROWS} symbols, got {len(seq)}")

    if rescale == "global":
        peak = sig.max()
        scaled = np.zeros_like(sig) if peak <= 0 else sig * (255.0 / peak)
    elif rescale == "per-signal":
        peaks = sig.max(axis=1, keepdims=True)
        safe = np.where(peaks > 0, peaks, 1.0)
        scaled = np.where(peaks > 0, sig * (255.0 / safe), 0.0)
    else:
        raise InvalidInputError(f"unknown rescale mode {rescale!r}")

    rows = np.clip(np.rint(scaled), 0, 255).astype(np.uint8)
    return SignalImage(rows[list(seq.symbols)], source_user=source_user, source_tap=source_tap)


def write_pgm(image: SignalImage, destination: BinaryIO) -> int:
    payload = PGM_HEADER + np.ascontiguousarray(image.pixels, dtype=np.uint8).tobytes()
    return destination.write(payload)


def pgm_bytes(image: SignalImage) -> bytes:
    buf = io.BytesIO()
    write_pgm(image, buf)
    return buf.getvalue()


def read_pgm(data: bytes) -> np.ndarray:
    """Parse a binary 8-bit PGM with a single-space/newline header."""
    parts = []
    pos = 0
    while len(parts) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header")
        parts.append(data[start:pos])
    pos += 1
    if parts[0] != b"P5":
        raise FormatError(f"not a binary PGM (magic {parts[0]!r})")
    width, height, maxval = (int(p) for p in parts[1:])
    if maxval != 255:
        raise FormatError("only 8-bit PGM is supported")
    body = data[pos:]
    if len(body) != width * height:
        raise FormatError(f"expected {width * height} pixel bytes, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width).copy()


def max_symbols(k: int, n: int) -> int:
    """Loose upper bound on greedy output length: n symbols per subset."""
    return n * comb(k, n)
