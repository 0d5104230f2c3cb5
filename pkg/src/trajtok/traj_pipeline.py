"""Raw visit logs to canonical trajectory windows.

Space is discretized on a 500 m grid under a local equirectangular
projection about the city origin; time is binned into 48 half-hour slots
per day. Windows cover three consecutive local days (stride one day);
windows with fewer than five points are dropped and longer ones keep the
most recent 145 points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .errors import DataError
from .io_utils import iter_jsonl, write_jsonl
from .rq_codebook import render_token_indices

EARTH_RADIUS_M = 6_371_000.0
SECONDS_PER_DAY = 86_400
SECONDS_PER_SLOT = 1_800
EPOCH_WEEKDAY = 3  # 1970-01-01 was a Thursday; Monday = 0

DEFAULT_CELL_SIZE_M = 500.0
DEFAULT_WINDOW_DAYS = 3
DEFAULT_STRIDE_DAYS = 1
DEFAULT_MIN_POINTS = 5
DEFAULT_MAX_POINTS = 145


@dataclass(frozen=True)
class CityGrid:
    """City frame: grid origin, bounding box, metric anchor, and timezone.

    ``ref_lat`` anchors the east-west metre scale; it defaults to the
    origin latitude and exists so that a translated origin can keep the
    exact same projection.
    """

    name: str
    origin_lat: float
    origin_lon: float
    min_lat: float
    max_lat: float
    min_lon: float
    max_lon: float
    cell_size_m: float = DEFAULT_CELL_SIZE_M
    tz_offset_s: int = 0
    ref_lat: float | None = None

    def __post_init__(self):
        if not (self.min_lat <= self.origin_lat <= self.max_lat):
            raise DataError("city origin latitude outside bounding box")
        if not (self.min_lon <= self.origin_lon <= self.max_lon):
            raise DataError("city origin longitude outside bounding box")
        if self.cell_size_m <= 0:
            raise DataError("cell size must be positive")

    @property
    def metric_lat(self) -> float:
        return self.origin_lat if self.ref_lat is None else self.ref_lat

    def to_record(self) -> dict:
        rec = {
            "name": self.name,
            "origin_lat": self.origin_lat,
            "origin_lon": self.origin_lon,
            "min_lat": self.min_lat,
            "max_lat": self.max_lat,
            "min_lon": self.min_lon,
            "max_lon": self.max_lon,
            "cell_size_m": self.cell_size_m,
            "tz_offset_s": self.tz_offset_s,
        }
        if self.ref_lat is not None:
            rec["ref_lat"] = self.ref_lat
        return rec

    @staticmethod
    def from_record(rec: dict) -> "CityGrid":
        try:
            return CityGrid(**rec)
        except TypeError as exc:
            raise DataError(f"bad city config: {exc}") from exc


@dataclass(frozen=True)
class RawVisit:
    user_id: str
    timestamp: float  # seconds since epoch, UTC
    lat: float
    lon: float

    def __post_init__(self):
        if not math.isfinite(self.timestamp):
            raise DataError("visit timestamp must be finite")
        if not (-90.0 <= self.lat <= 90.0):
            raise DataError(f"latitude {self.lat} out of range")
        if not (-180.0 <= self.lon <= 180.0):
            raise DataError(f"longitude {self.lon} out of range")


@dataclass(frozen=True)
class TrajPoint:
    weekday: int  # Monday = 0
    slot: int  # half-hour bin, 0..47
    cell: tuple[int, int]  # (row, col)
    token_seq: tuple[int, ...] | None = None
    day_offset: int = 0  # position within the window; not serialized

    def __post_init__(self):
        if not 0 <= self.weekday < 7:
            raise DataError(f"weekday {self.weekday} out of range")
        if not 0 <= self.slot < SECONDS_PER_DAY // SECONDS_PER_SLOT:
            raise DataError(f"slot {self.slot} out of range")

    @property
    def location_key(self) -> str:
        if self.token_seq is not None:
            return render_token_indices(self.token_seq)
        return f"({self.cell[0]},{self.cell[1]})"

    def to_record(self) -> dict:
        rec = {
            "weekday": self.weekday,
            "slot": self.slot,
            "row": self.cell[0],
            "col": self.cell[1],
        }
        if self.token_seq is not None:
            rec["tokens"] = list(self.token_seq)
        return rec


@dataclass(frozen=True)
class Trajectory:
    user_id: str
    window_start_day: int  # local day ordinal (days since epoch)
    city: str
    points: tuple[TrajPoint, ...]

    def to_record(self) -> dict:
        return {
            "user_id": self.user_id,
            "window_start_day": self.window_start_day,
            "city": self.city,
            "points": [p.to_record() for p in self.points],
        }


def assign_grid(lat: float, lon: float, city: CityGrid, cell_size_m: float | None = None) -> tuple[int, int]:
    """Grid cell of a coordinate under the city's local projection."""
    if not (city.min_lat <= lat <= city.max_lat and city.min_lon <= lon <= city.max_lon):
        raise DataError(f"point ({lat}, {lon}) outside the {city.name} bounding box")
    cell = city.cell_size_m if cell_size_m is None else cell_size_m
    northing = math.radians(lat - city.origin_lat) * EARTH_RADIUS_M
    easting = math.radians(lon - city.origin_lon) * EARTH_RADIUS_M * math.cos(
        math.radians(city.metric_lat)
    )
    return (math.floor(northing / cell), math.floor(easting / cell))


def _split_local(timestamp: float, tz_offset_s: int) -> tuple[int, float]:
    """(local day ordinal, seconds into that day), robust to float rounding."""
    if not math.isfinite(timestamp):
        raise DataError("timestamp must be finite")
    local = timestamp + tz_offset_s
    day = math.floor(local / SECONDS_PER_DAY)
    rem = local - day * SECONDS_PER_DAY
    while rem < 0.0:
        day -= 1
        rem += SECONDS_PER_DAY
    while rem >= SECONDS_PER_DAY:
        day += 1
        rem -= SECONDS_PER_DAY
    return day, rem


def bin_time(timestamp: float, tz_offset_s: int) -> tuple[int, int]:
    """(weekday, half-hour slot) of a UTC timestamp at the given fixed offset."""
    day, rem = _split_local(timestamp, tz_offset_s)
    weekday = (day + EPOCH_WEEKDAY) % 7
    return weekday, int(rem // SECONDS_PER_SLOT)


def local_day(timestamp: float, tz_offset_s: int) -> int:
    return _split_local(timestamp, tz_offset_s)[0]


def weekday_of_day(day: int) -> int:
    return (day + EPOCH_WEEKDAY) % 7


def window_trajectories(
    visits: Sequence[RawVisit],
    city: CityGrid,
    window_days: int = DEFAULT_WINDOW_DAYS,
    stride_days: int = DEFAULT_STRIDE_DAYS,
    min_points: int = DEFAULT_MIN_POINTS,
    max_points: int = DEFAULT_MAX_POINTS,
    cell_size_m: float | None = None,
) -> list[Trajectory]:
    """Slice per-user visit streams into fixed-length day windows.

    Consecutive identical (slot, cell) events within one day collapse to a
    single point. Windows never fabricate points: every output point is
    one of the input visits.
    """
    if window_days < 1 or stride_days < 1:
        raise DataError("window_days and stride_days must be >= 1")
    per_user: dict[str, list[RawVisit]] = {}
    for v in visits:
        per_user.setdefault(v.user_id, []).append(v)

    out: list[Trajectory] = []
    for user_id in sorted(per_user):
        stream = sorted(per_user[user_id], key=lambda v: v.timestamp)
        events: list[tuple[int, int, int, tuple[int, int]]] = []  # (day, weekday, slot, cell)
        for v in stream:
            weekday, slot = bin_time(v.timestamp, city.tz_offset_s)
            day = local_day(v.timestamp, city.tz_offset_s)
            cell = assign_grid(v.lat, v.lon, city, cell_size_m)
            if events and events[-1][0] == day and events[-1][2] == slot and events[-1][3] == cell:
                continue
            events.append((day, weekday, slot, cell))
        if not events:
            continue
        min_day, max_day = events[0][0], events[-1][0]
        for start in range(min_day - window_days + 1, max_day + 1, stride_days):
            in_window = [e for e in events if start <= e[0] < start + window_days]
            if len(in_window) < min_points:
                continue
            in_window.sort(key=lambda e: (e[0], e[2]))
            if len(in_window) > max_points:
                in_window = in_window[-max_points:]
            points = tuple(
                TrajPoint(weekday=w, slot=s, cell=c, day_offset=d - start)
                for d, w, s, c in in_window
            )
            out.append(Trajectory(user_id, start, city.name, points))
    return out


def load_visits(path, strict: bool = False) -> list[RawVisit]:
    """Read line-delimited {user_id, timestamp, lat, lon} records."""
    visits = []
    issues = []
    for lineno, rec in iter_jsonl(path):
        try:
            visits.append(
                RawVisit(
                    user_id=str(rec["user_id"]),
                    timestamp=float(rec["timestamp"]),
                    lat=float(rec["lat"]),
                    lon=float(rec["lon"]),
                )
            )
        except (KeyError, TypeError, ValueError, DataError) as exc:
            if strict:
                raise DataError(f"{path}: line {lineno}: {exc}") from exc
            issues.append((lineno, str(exc)))
    if issues:
        import logging

        logging.getLogger(__name__).warning(
            "%s: skipped %d malformed visit line(s): first at line %d (%s)",
            path, len(issues), issues[0][0], issues[0][1],
        )
    return visits


def save_trajectories(path, trajectories: Iterable[Trajectory]) -> int:
    return write_jsonl(path, (t.to_record() for t in trajectories))


def load_trajectories(path) -> list[Trajectory]:
    """Read the canonical trajectory interchange file, rebuilding day offsets."""
    out = []
    for lineno, rec in iter_jsonl(path):
        try:
            start = int(rec["window_start_day"])
            points = []
            offset = 0
            prev_weekday = None
            for p in rec["points"]:
                w = int(p["weekday"])
                if prev_weekday is None:
                    offset = (w - weekday_of_day(start)) % 7
                elif w != prev_weekday:
                    offset += (w - prev_weekday) % 7
                prev_weekday = w
                tokens = tuple(int(t) for t in p["tokens"]) if "tokens" in p else None
                points.append(
                    TrajPoint(
                        weekday=w,
                        slot=int(p["slot"]),
                        cell=(int(p["row"]), int(p["col"])),
                        token_seq=tokens,
                        day_offset=offset,
                    )
                )
            out.append(
                Trajectory(
                    user_id=str(rec["user_id"]),
                    window_start_day=start,
                    city=str(rec.get("city", "")),
                    points=tuple(points),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: line {lineno}: bad trajectory record ({exc})") from exc
    return out


def attach_tokens(
    trajectories: Sequence[Trajectory], cell_tokens: dict[tuple[int, int], tuple[int, ...]]
) -> list[Trajectory]:
    """Annotate points with location token sequences by grid cell."""
    out = []
    for traj in trajectories:
        points = tuple(
            replace(p, token_seq=cell_tokens.get(p.cell, p.token_seq)) for p in traj.points
        )
        out.append(replace(traj, points=points))
    return out
