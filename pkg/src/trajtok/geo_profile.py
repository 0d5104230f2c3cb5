"""Per-location semantic profiles and their vector encodings.

A profile aggregates the textual and geographic attributes of one
location (address, coordinates, bounding box, OSM identifiers, nearby-POI
counts over a fixed 34-category vocabulary). Profiles render to a
canonical text description; semantic vectors come either from an external
embeddings file or from a deterministic hashed fallback encoder good
enough for desk-scale pipeline runs.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import DataError
from .io_utils import iter_jsonl, write_jsonl

logger = logging.getLogger(__name__)

# The fixed nearby-POI vocabulary. The source listing also carries a
# "gid" entry, which is a record identifier rather than a POI category
# and is therefore not part of the vocabulary.
POI_CATEGORIES: tuple[str, ...] = (
    "finance",
    "public",
    "transport",
    "entertainment",
    "health",
    "service",
    "education",
    "government",
    "religion",
    "accommodation",
    "food",
    "cafe",
    "fast_food",
    "ice_cream",
    "pub",
    "restaurant",
    "shop_beauty",
    "shop_clothes",
    "boutique",
    "shop_transport",
    "retail",
    "commodity",
    "marketplace",
    "home-improvement",
    "sport",
    "public_transport",
    "kindergarten",
    "office",
    "recycling",
    "travel_agency",
    "tourism",
    "shop_livelihood",
    "residential",
    "dormitory",
)

_POI_INDEX = {name: i for i, name in enumerate(POI_CATEGORIES)}

OSM_TYPES = ("node", "way", "relation")

# Real-world centroids sit slightly outside their bounding boxes often
# enough (about 10 m in the canonical example) that exact containment
# would reject valid records.
BBOX_TOLERANCE_DEG = 1e-3


@dataclass(frozen=True)
class LocationProfile:
    location_id: str
    address: str = ""
    center_lat: float = 0.0
    center_lon: float = 0.0
    bbox: tuple[float, float, float, float] | None = None  # (min_lat, max_lat, min_lon, max_lon)
    osm_type: str | None = None
    osm_id: int | None = None
    place_id: int | None = None
    poi_counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.location_id:
            raise DataError("location_id must be non-empty")
        if not (-90.0 <= self.center_lat <= 90.0 and -180.0 <= self.center_lon <= 180.0):
            raise DataError(f"{self.location_id}: center coordinates out of range")
        if self.osm_type is not None and self.osm_type not in OSM_TYPES:
            raise DataError(f"{self.location_id}: unknown OSM type {self.osm_type!r}")
        if self.bbox is not None:
            min_lat, max_lat, min_lon, max_lon = self.bbox
            if min_lat > max_lat or min_lon > max_lon:
                raise DataError(f"{self.location_id}: inverted bounding box")
            t = BBOX_TOLERANCE_DEG
            if not (min_lat - t <= self.center_lat <= max_lat + t):
                raise DataError(f"{self.location_id}: center latitude outside bounding box")
            if not (min_lon - t <= self.center_lon <= max_lon + t):
                raise DataError(f"{self.location_id}: center longitude outside bounding box")
        for cat, count in self.poi_counts.items():
            if cat not in _POI_INDEX:
                raise DataError(f"{self.location_id}: unknown POI category {cat!r}")
            if not isinstance(count, int) or count < 0:
                raise DataError(f"{self.location_id}: POI count for {cat!r} must be a non-negative integer")

    def to_record(self) -> dict:
        rec: dict = {
            "location_id": self.location_id,
            "address": self.address,
            "center_lat": self.center_lat,
            "center_lon": self.center_lon,
            "poi_counts": {k: self.poi_counts[k] for k in sorted(self.poi_counts)},
        }
        if self.bbox is not None:
            rec["bbox"] = list(self.bbox)
        if self.osm_type is not None:
            rec["osm_type"] = self.osm_type
        if self.osm_id is not None:
            rec["osm_id"] = self.osm_id
        if self.place_id is not None:
            rec["place_id"] = self.place_id
        return rec


@dataclass(frozen=True)
class SemanticVector:
    values: np.ndarray
    source: str  # "imported" | "fallback"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.ndim != 1:
            raise DataError("semantic vector must be 1-D")
        if not np.all(np.isfinite(v)):
            raise DataError("semantic vector has non-finite entries")
        if self.source not in ("imported", "fallback"):
            raise DataError(f"unknown vector source {self.source!r}")

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


def _profile_from_record(rec: Mapping) -> LocationProfile:
    bbox = rec.get("bbox")
    if bbox is not None:
        if len(bbox) != 4:
            raise DataError("bbox must have 4 entries (min_lat, max_lat, min_lon, max_lon)")
        bbox = tuple(float(x) for x in bbox)
    poi_raw = rec.get("poi_counts", {})
    poi = {str(k): int(v) for k, v in poi_raw.items()}
    return LocationProfile(
        location_id=str(rec["location_id"]),
        address=str(rec.get("address", "")),
        center_lat=float(rec.get("center_lat", 0.0)),
        center_lon=float(rec.get("center_lon", 0.0)),
        bbox=bbox,
        osm_type=rec.get("osm_type"),
        osm_id=int(rec["osm_id"]) if rec.get("osm_id") is not None else None,
        place_id=int(rec["place_id"]) if rec.get("place_id") is not None else None,
        poi_counts=poi,
    )


def load_profiles(path, format: str = "jsonl", strict: bool = False) -> list[LocationProfile]:
    """Read line-delimited location profiles.

    Lenient mode logs and skips invalid records; strict mode raises on the
    first one, naming the line.
    """
    if format != "jsonl":
        raise DataError(f"unsupported profile format {format!r}")
    profiles: list[LocationProfile] = []
    seen: dict[str, int] = {}
    for lineno, rec in iter_jsonl(path):
        try:
            profile = _profile_from_record(rec)
            if profile.location_id in seen:
                raise DataError(
                    f"duplicate location_id {profile.location_id!r} "
                    f"(first seen at line {seen[profile.location_id]})"
                )
            seen[profile.location_id] = lineno
            profiles.append(profile)
        except (KeyError, TypeError, ValueError, DataError) as exc:
            msg = f"{path}: line {lineno}: {exc}"
            if strict:
                raise DataError(msg) from exc
            logger.warning("skipping profile: %s", msg)
    return profiles


def save_profiles(path, profiles: Iterable[LocationProfile]) -> int:
    return write_jsonl(path, (p.to_record() for p in profiles))


def render_profile_text(profile: LocationProfile) -> str:
    """Canonical description: address, coordinates/boundary, OSM details, POIs.

    Pure function of the profile; identical profiles render identical
    bytes. Missing optional fields drop their section.
    """
    lines = []
    if profile.address:
        lines.append(f"The location is situated at {profile.address}.")
    lines.append(
        "The center of the location is at latitude "
        f"{profile.center_lat!r} and longitude {profile.center_lon!r}."
    )
    if profile.bbox is not None:
        min_lat, max_lat, min_lon, max_lon = profile.bbox
        lines.append(
            "The area is bounded by: "
            f"Minimum latitude: {min_lat!r}, Maximum latitude: {max_lat!r}, "
            f"Minimum longitude: {min_lon!r}, Maximum longitude: {max_lon!r}."
        )
    osm_bits = []
    if profile.osm_type is not None:
        osm_bits.append(f"OSM Type: {profile.osm_type}")
    if profile.osm_id is not None:
        osm_bits.append(f"OSM ID: {profile.osm_id}")
    if profile.place_id is not None:
        osm_bits.append(f"Place ID: {profile.place_id}")
    if osm_bits:
        lines.append(". ".join(osm_bits) + ".")
    pois = [
        f"{profile.poi_counts[cat]} {cat.replace('_', ' ')}"
        for cat in POI_CATEGORIES
        if profile.poi_counts.get(cat, 0) > 0
    ]
    if pois:
        lines.append(f"The location includes {', '.join(pois)}.")
    else:
        lines.append("The location includes no points of interest.")
    return "\n".join(lines)


MIN_FALLBACK_DIM = 8
_DEDICATED_CHANNEL_MIN_DIM = len(POI_CATEGORIES) + MIN_FALLBACK_DIM


def _hash_slot(token: bytes, seed: int, buckets: int) -> tuple[int, float]:
    digest = hashlib.blake2b(token, digest_size=8, key=seed.to_bytes(8, "little")).digest()
    idx = int.from_bytes(digest[:4], "little") % buckets
    sign = 1.0 if digest[4] & 1 else -1.0
    return idx, sign


def encode_profile_fallback(
    profile: LocationProfile, d: int = 2048, seed: int = 0
) -> SemanticVector:
    """Deterministic stand-in for a text encoder: hashed character trigrams
    of the rendered description plus POI-count channels, L2-normalized.

    For d >= 42 the last 34 dimensions are dedicated POI-count channels;
    below that everything is feature-hashed into the d dimensions.
    """
    if d < MIN_FALLBACK_DIM:
        raise DataError(f"fallback dimension must be >= {MIN_FALLBACK_DIM}")
    text = render_profile_text(profile)
    vec = np.zeros(d, dtype=np.float64)
    dedicated = d >= _DEDICATED_CHANNEL_MIN_DIM
    text_dims = d - len(POI_CATEGORIES) if dedicated else d
    data = text.encode("utf-8")
    grams = [data[i : i + 3] for i in range(len(data) - 2)] or [data]
    for gram in grams:
        idx, sign = _hash_slot(b"3g:" + gram, seed, text_dims)
        vec[idx] += sign
    if dedicated:
        for cat, count in profile.poi_counts.items():
            if count > 0:
                vec[text_dims + _POI_INDEX[cat]] = float(count)
    else:
        for cat, count in profile.poi_counts.items():
            if count > 0:
                idx, sign = _hash_slot(b"poi:" + cat.encode(), seed, d)
                vec[idx] += sign * count
    norm = math.sqrt(float((vec**2).sum()))
    if norm == 0.0:
        vec[0] = 1.0
        norm = 1.0
    return SemanticVector(vec / norm, source="fallback")


def import_embeddings(path) -> dict[str, SemanticVector]:
    """Read line-delimited {location_id, values} vectors (source=imported)."""
    out: dict[str, SemanticVector] = {}
    dim: int | None = None
    for lineno, rec in iter_jsonl(path):
        try:
            key = str(rec["location_id"])
            values = np.asarray(rec["values"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}: line {lineno}: bad embedding record ({exc})") from exc
        if key in out:
            raise DataError(f"{path}: line {lineno}: duplicate location_id {key!r}")
        if dim is None:
            dim = int(values.shape[0])
        elif values.shape[0] != dim:
            raise DataError(
                f"{path}: line {lineno}: dimension {values.shape[0]} != corpus dimension {dim}"
            )
        out[key] = SemanticVector(values, source="imported")
    return out


def export_embeddings(path, vectors: Mapping[str, SemanticVector]) -> int:
    return write_jsonl(
        path,
        (
            {"location_id": key, "values": vectors[key].values.tolist()}
            for key in sorted(vectors)
        ),
    )
