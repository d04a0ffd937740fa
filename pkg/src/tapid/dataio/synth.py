"""Seeded synthetic tap sessions standing in for real recordings.

Every user owns a latent parameter set drawn around a shared population
profile; ``separation`` scales how far users stray from it (0 makes all
users statistically identical). A channel is a mixture of three sinusoids
plus a smooth bump locked to the tap at 0.5 s. Every tap jitters the
amplitudes and the timing, and Gaussian noise is added on top.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError
from ..signal import RawChannel, TapSession

TAP_TIME = 0.5
_POP_STREAM = 0
_USER_STREAM = 1
_TAP_STREAM = 2

# gravity sits mostly on z when the phone lies in the hand
_ACC_OFFSET = np.array([0.3, 2.0, 9.5])
_ACC_AMPLITUDE = 0.3
_GYRO_AMPLITUDE = 0.1


@dataclass(frozen=True)
class SynthConfig:
    num_users: int = 10
    taps_per_user: int = 40
    sample_rate_hz: float = 100.0
    window_seconds: float = 1.5
    jitter_std_seconds: float = 0.001
    length_range: tuple[int, int] = (140, 160)
    separation: float = 1.0
    noise_std: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.num_users < 1 or self.taps_per_user < 1:
            raise InvalidInputError("num_users and taps_per_user must be >= 1")
        lo, hi = self.length_range
        if not 2 <= lo <= hi <= 10 * self.sample_rate_hz * self.window_seconds:
            raise InvalidInputError(f"invalid length_range {self.length_range}")
        if self.separation < 0 or self.noise_std < 0 or self.jitter_std_seconds < 0:
            raise InvalidInputError("separation, noise_std and jitter must be >= 0")


@dataclass(frozen=True)
class UserProfile:
    freqs: np.ndarray  # (6, 3) Hz
    amps: np.ndarray  # (6, 3)
    phases: np.ndarray  # (6, 3) radians at the tap instant
    bump_amp: np.ndarray  # (6,)
    bump_width: np.ndarray  # (6,) seconds
    bump_shift: float  # seconds relative to the tap
    offsets: np.ndarray  # (6,)


def _population(seed: int) -> UserProfile:
    rng = np.random.default_rng([seed, _POP_STREAM])
    base_amp = np.repeat([_ACC_AMPLITUDE, _GYRO_AMPLITUDE], 3)[:, None]
    return UserProfile(
        freqs=rng.uniform(2.0, 12.0, (6, 3)),
        amps=base_amp * rng.uniform(0.5, 1.0, (6, 3)),
        phases=rng.uniform(-np.pi, np.pi, (6, 3)),
        bump_amp=np.repeat([_ACC_AMPLITUDE, _GYRO_AMPLITUDE], 3) * rng.uniform(1.0, 2.0, 6) * rng.choice([-1, 1], 6),
        bump_width=rng.uniform(0.04, 0.08, 6),
        bump_shift=0.0,
        offsets=np.concatenate([_ACC_OFFSET, np.zeros(3)]),
    )


def user_profile(config: SynthConfig, user_index: int) -> UserProfile:
    pop = _population(config.seed)
    rng = np.random.default_rng([config.seed, _USER_STREAM, user_index])
    s = config.separation
    scale = np.repeat([_ACC_AMPLITUDE, _GYRO_AMPLITUDE], 3)
    return UserProfile(
        freqs=np.clip(pop.freqs + s * rng.normal(0.0, 3.0, (6, 3)), 1.0, 15.0),
        amps=pop.amps * np.exp(s * rng.normal(0.0, 0.05, (6, 3))),
        phases=pop.phases + s * rng.normal(0.0, 1.5, (6, 3)),
        bump_amp=pop.bump_amp + s * scale * rng.normal(0.0, 0.1, 6),
        bump_width=pop.bump_width * np.exp(s * rng.normal(0.0, 0.1, 6)),
        bump_shift=float(s * rng.normal(0.0, 0.08)),
        offsets=pop.offsets + s * 0.05 * scale * rng.normal(0.0, 1.0, 6),
    )


def _timestamps(rng, n, config):
    dt = config.window_seconds / n
    jitter = np.clip(rng.normal(0.0, config.jitter_std_seconds, n), -0.4 * dt, 0.4 * dt)
    return np.round((np.arange(n) + 0.5) * dt + jitter, 6)


def _tap(config: SynthConfig, profile: UserProfile, user_index: int, tap: int) -> list[RawChannel]:
    rng = np.random.default_rng([config.seed, _TAP_STREAM, user_index, tap])
    lo, hi = config.length_range
    lengths = rng.integers(lo, hi + 1, size=2)
    intensity = float(np.exp(rng.normal(0.0, 0.5)))
    phase_jitter = rng.normal(0.0, 1.0, (6, 3))
    amp_jitter = np.exp(rng.normal(0.0, 0.25, (6, 3)))
    bump_jitter = np.exp(rng.normal(0.0, 0.3, 6))
    tap_time = TAP_TIME + profile.bump_shift + rng.normal(0.0, 0.02)
    channels = []
    for sensor in range(2):
        t = _timestamps(rng, int(lengths[sensor]), config)
        rel = t - tap_time
        for axis in range(3):
            c = 3 * sensor + axis
            waves = (profile.amps[c] * amp_jitter[c])[:, None] * np.sin(
                2 * np.pi * profile.freqs[c, :, None] * rel[None, :] + (profile.phases[c] + phase_jitter[c])[:, None]
            )
            bump = profile.bump_amp[c] * bump_jitter[c] * np.exp(-0.5 * (rel / profile.bump_width[c]) ** 2)
            values = profile.offsets[c] + intensity * (waves.sum(axis=0) + bump)
            values = values + rng.normal(0.0, config.noise_std, t.size)
            channels.append(RawChannel(np.round(values, 6), t))
    return channels


def user_id(index: int) -> str:
    return f"u{index:03d}"


def synth_generate(config: SynthConfig) -> list[TapSession]:
    """Sessions for every user, ordered by (user_id, tap_index)."""
    sessions = []
    for u in range(config.num_users):
        profile = user_profile(config, u)
        for tap in range(config.taps_per_user):
            chans = _tap(config, profile, u, tap)
            sessions.append(TapSession(user_id(u), tap, tuple(chans), config.window_seconds))
    return sessions
