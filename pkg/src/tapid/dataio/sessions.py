"""Newline-delimited JSON session files.

One record per line::

    {"user_id": "u003", "tap_index": 12,
     "accelerometer": {"t": [...], "x": [...], "y": [...], "z": [...]},
     "gyroscope":     {"t": [...], "x": [...], "y": [...], "z": [...]}}

``t`` is seconds from the start of the 1.5 s window (the tap happens at
0.5 s). Axis order maps to signal symbols 0..5 as acc x, y, z, gyro x, y, z.
"""

from __future__ import annotations

import io
import json
import os
from pathlib import Path
from typing import Iterable

import numpy as np

from ..errors import ParseError, ValidationError
from ..signal import RawChannel, TapSession

SENSORS = ("accelerometer", "gyroscope")
AXES = ("x", "y", "z")


def session_to_record(session: TapSession) -> dict:
    record = {"user_id": session.user_id, "tap_index": session.tap_index}
    for s, sensor in enumerate(SENSORS):
        chans = session.channels[3 * s : 3 * s + 3]
        block = {"t": chans[0].timestamps.tolist()}
        for axis, ch in zip(AXES, chans):
            block[axis] = ch.values.tolist()
        record[sensor] = block
    return record


def record_to_session(record: dict, line: int | None = None) -> TapSession:
    try:
        user = record["user_id"]
        tap = record["tap_index"]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"missing field {exc}", line) from None
    if not isinstance(user, str) or not isinstance(tap, int) or isinstance(tap, bool):
        raise ParseError("user_id must be a string and tap_index an integer", line)
    where = f"record ({user!r}, {tap})"
    channels = []
    for sensor in SENSORS:
        block = record.get(sensor)
        if not isinstance(block, dict):
            raise ParseError(f"{where}: missing {sensor} block", line)
        try:
            t = np.asarray(block["t"], dtype=np.float64)
            axes = [np.asarray(block[a], dtype=np.float64) for a in AXES]
        except KeyError as exc:
            raise ParseError(f"{where}: {sensor} lacks array {exc}", line) from None
        except (TypeError, ValueError):
            raise ParseError(f"{where}: {sensor} arrays must be numeric lists", line) from None
        for axis, arr in zip(AXES, axes):
            if arr.ndim != 1 or arr.shape != t.shape:
                raise ValidationError(
                    f"{where}: {sensor}.{axis} has {arr.size} values but t has {t.size}", line
                )
        if t.size < 2:
            raise ValidationError(f"{where}: {sensor} needs at least 2 samples", line)
        if np.any(np.diff(t) <= 0):
            raise ValidationError(f"{where}: {sensor} timestamps are not strictly increasing", line)
        if not (np.all(np.isfinite(t)) and all(np.all(np.isfinite(a)) for a in axes)):
            raise ValidationError(f"{where}: {sensor} contains non-finite values", line)
        channels += [RawChannel(a, t) for a in axes]
    if tap < 0:
        raise ValidationError(f"{where}: tap_index must be non-negative", line)
    return TapSession(user, tap, tuple(channels))


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, encoding="utf-8"), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("utf-8")), True
    return source, False


def iter_sessions(source) -> Iterable[TapSession]:
    fh, owned = _open_text(source)
    try:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", lineno) from None
            if not isinstance(record, dict):
                raise ParseError("record must be a JSON object", lineno)
            yield record_to_session(record, lineno)
    finally:
        if owned:
            fh.close()


def load_sessions(source) -> list[TapSession]:
    """Read every session, sorted by (user_id, tap_index)."""
    sessions = sorted(iter_sessions(source), key=lambda s: s.key)
    for prev, cur in zip(sessions, sessions[1:]):
        if prev.key == cur.key:
            raise ValidationError(f"duplicate record for user {cur.user_id!r} tap {cur.tap_index}")
    return sessions


def dumps_sessions(sessions: Iterable[TapSession]) -> str:
    return "".join(json.dumps(session_to_record(s), separators=(",", ":")) + "\n" for s in sessions)


def save_sessions(sessions: Iterable[TapSession], path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(dumps_sessions(sessions), encoding="utf-8")
    os.replace(tmp, path)


def group_by_user(sessions: Iterable[TapSession]) -> dict[str, list[TapSession]]:
    out: dict[str, list[TapSession]] = {}
    for s in sessions:
        out.setdefault(s.user_id, []).append(s)
    for taps in out.values():
        taps.sort(key=lambda s: s.tap_index)
    return out
