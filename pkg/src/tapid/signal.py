"""Sensor channel containers and the resample/normalize preprocessing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

SIGNAL_LENGTH = 150
CHANNEL_NAMES = ("acc_x", "acc_y", "acc_z", "gyro_x", "gyro_y", "gyro_z")


@dataclass(frozen=True)
class RawChannel:
    values: np.ndarray
    timestamps: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        timestamps = np.asarray(self.timestamps, dtype=np.float64)
        if values.ndim != 1 or timestamps.shape != values.shape:
            raise InvalidInputError(
                f"values and timestamps must be 1-D of equal length, got "
                f"{values.shape} and {timestamps.shape}"
            )
        if values.size >= 2 and np.any(np.diff(timestamps) <= 0):
            raise InvalidInputError("timestamps must be strictly increasing")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "timestamps", timestamps)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class TapSession:
    """Six motion channels recorded around one tap.

    Channel order is acc x/y/z followed by gyro x/y/z. The two sensors report
    independently, so the accelerometer triple and the gyroscope triple may
    have different lengths.
    """

    user_id: str
    tap_index: int
    channels: tuple[RawChannel, ...]
    window_seconds: float = 1.5

    def __post_init__(self):
        channels = tuple(self.channels)
        if len(channels) != 6:
            raise InvalidInputError(f"expected 6 channels, got {len(channels)}")
        if self.tap_index < 0:
            raise InvalidInputError("tap_index must be non-negative")
        for lo in (0, 3):
            lengths = {len(c) for c in channels[lo : lo + 3]}
            if len(lengths) != 1:
                sensor = "accelerometer" if lo == 0 else "gyroscope"
                raise InvalidInputError(f"{sensor} axes differ in length: {sorted(lengths)}")
        if any(len(c) < 2 for c in channels):
            raise InvalidInputError("every channel needs at least 2 samples")
        object.__setattr__(self, "channels", channels)

    @property
    def key(self) -> tuple[str, int]:
        return (self.user_id, self.tap_index)


def resample_linear(channel, target_len: int = SIGNAL_LENGTH) -> np.ndarray:
    """Resize a channel to ``target_len`` points by index-space interpolation.

    Output point ``i`` sits at fractional source index ``i*(L-1)/(N-1)``, so
    both endpoints are reproduced exactly. Timestamps are ignored.
    """
    values = channel.values if isinstance(channel, RawChannel) else np.asarray(channel, dtype=np.float64)
    if values.ndim != 1 or values.size < 2:
        raise InvalidInputError("channel must be 1-D with at least 2 samples")
    if target_len < 2:
        raise InvalidInputError("target_len must be >= 2")
    n = values.size
    if n == target_len:
        return values.astype(np.float64, copy=True)
    positions = np.arange(target_len) * ((n - 1) / (target_len - 1))
    out = np.interp(positions, np.arange(n), values)
    out[-1] = values[-1]
    return out


def normalize_signal(values) -> np.ndarray:
    """Shift a length-150 signal to a zero minimum and scale it to unit L2 norm.

    A constant signal has nothing left after the shift and maps to zeros.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.shape != (SIGNAL_LENGTH,):
        raise InvalidInputError(f"expected {SIGNAL_LENGTH} values, got shape {v.shape}")
    return _shift_to_unit(v)


def _shift_to_unit(v: np.ndarray) -> np.ndarray:
    shifted = v - v.min()
    norm = np.linalg.norm(shifted)
    if norm < 1e-12:
        return np.zeros_like(shifted)
    return shifted / norm


def resample_session(session: TapSession, target_len: int = SIGNAL_LENGTH) -> np.ndarray:
    """Return the six resampled channels as a (6, target_len) array."""
    return np.stack([resample_linear(c, target_len) for c in session.channels])


def preprocess_session(session: TapSession) -> np.ndarray:
    """Resample then normalize each channel; shape (6, 150)."""
    return np.stack([normalize_signal(row) for row in resample_session(session)])
