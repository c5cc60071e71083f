"""Address-event file ingestion: CSV and the binary-v1 record format.

binary-v1 is a stream of little-endian 9-byte records
``{u32 timestamp_us, u16 x, u16 y, i8 polarity}``; CSV rows are
``timestamp_us,x,y,polarity``. Polarity is +1 or -1. Events are returned
sorted by timestamp (stable, so same-time events keep file order).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

from .errors import ParseError

_RECORD = struct.Struct("<IHHb")


@dataclass(frozen=True)
class AerEvent:
    t_us: int
    x: int
    y: int
    polarity: int

    def __post_init__(self):
        if self.t_us < 0:
            raise ParseError(f"negative timestamp {self.t_us}")
        if self.polarity not in (-1, 1):
            raise ParseError(f"polarity must be +1 or -1, got {self.polarity}")
        if self.x < 0 or self.y < 0:
            raise ParseError(f"negative coordinate ({self.x},{self.y})")


def _check_bounds(events: list[AerEvent], sensor_size: tuple[int, int] | None,
                  path: str | None) -> list[AerEvent]:
    if sensor_size is not None:
        w, h = sensor_size
        for ev in events:
            if ev.x >= w or ev.y >= h:
                raise ParseError(
                    f"event at ({ev.x},{ev.y}) outside {w}x{h} sensor",
                    path=path)
    return sorted(events, key=lambda e: e.t_us)


def ingest_aer(path: str | Path, fmt: str = "csv",
               sensor_size: tuple[int, int] | None = None) -> list[AerEvent]:
    """Read an event file; returns events sorted by timestamp."""
    path = Path(path)
    if fmt == "csv":
        events = []
        with open(path) as fp:
            for lineno, raw in enumerate(fp, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.split(",")
                if len(parts) != 4:
                    raise ParseError(f"expected 4 fields, got {len(parts)}",
                                     path=str(path), line=lineno)
                try:
                    t, x, y, pol = (int(p) for p in parts)
                    events.append(AerEvent(t_us=t, x=x, y=y, polarity=pol))
                except (ValueError, ParseError) as exc:
                    raise ParseError(f"bad event record: {exc}",
                                     path=str(path), line=lineno) from exc
        return _check_bounds(events, sensor_size, str(path))

    if fmt == "binary-v1":
        data = path.read_bytes()
        if len(data) % _RECORD.size != 0:
            offset = len(data) - len(data) % _RECORD.size
            raise ParseError(
                f"truncated record ({len(data) % _RECORD.size} trailing bytes)",
                path=str(path), offset=offset)
        events = []
        for offset in range(0, len(data), _RECORD.size):
            t, x, y, pol = _RECORD.unpack_from(data, offset)
            try:
                events.append(AerEvent(t_us=t, x=x, y=y, polarity=pol))
            except ParseError as exc:
                raise ParseError(f"bad event record: {exc}",
                                 path=str(path), offset=offset) from exc
        return _check_bounds(events, sensor_size, str(path))

    raise ParseError(f"unknown AER format {fmt!r}; expected csv or binary-v1")


def write_aer(events: list[AerEvent], path: str | Path,
              fmt: str = "csv") -> None:
    path = Path(path)
    if fmt == "csv":
        with open(path, "w") as fp:
            fp.write("# timestamp_us,x,y,polarity\n")
            for ev in events:
                fp.write(f"{ev.t_us},{ev.x},{ev.y},{ev.polarity}\n")
    elif fmt == "binary-v1":
        with open(path, "wb") as fp:
            for ev in events:
                fp.write(_RECORD.pack(ev.t_us, ev.x, ev.y, ev.polarity))
    else:
        raise ParseError(f"unknown AER format {fmt!r}; expected csv or binary-v1")
