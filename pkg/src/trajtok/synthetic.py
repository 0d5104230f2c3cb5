"""Deterministic synthetic data generators for tests, demos, and scripts."""

from __future__ import annotations

import math

import numpy as np

from .geo_profile import POI_CATEGORIES, LocationProfile
from .traj_pipeline import EARTH_RADIUS_M, CityGrid, RawVisit


def make_cluster_corpus(
    n_clusters: int,
    per_cluster: int,
    dim: int,
    separation: float = 10.0,
    spread: float = 0.05,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Well-separated Gaussian blobs.

    Returns (points, integer labels, cluster centers); points are shuffled
    deterministically.
    """
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, separation, size=(n_clusters, dim))
    points = np.repeat(centers, per_cluster, axis=0)
    points = points + rng.normal(0.0, spread, size=points.shape)
    labels = np.repeat(np.arange(n_clusters), per_cluster)
    order = rng.permutation(len(points))
    return points[order], labels[order], centers


def make_city(name: str = "testopolis", tz_offset_s: int = 0) -> CityGrid:
    return CityGrid(
        name=name,
        origin_lat=40.0,
        origin_lon=-100.0,
        min_lat=39.5,
        max_lat=40.5,
        min_lon=-100.5,
        max_lon=-99.5,
        tz_offset_s=tz_offset_s,
    )


def cell_center_latlon(city: CityGrid, row: int, col: int) -> tuple[float, float]:
    """Inverse of the grid projection, at the cell midpoint."""
    north = (row + 0.5) * city.cell_size_m
    east = (col + 0.5) * city.cell_size_m
    lat = city.origin_lat + math.degrees(north / EARTH_RADIUS_M)
    lon = city.origin_lon + math.degrees(
        east / (EARTH_RADIUS_M * math.cos(math.radians(city.metric_lat)))
    )
    return lat, lon


def make_location_profiles(
    n: int, city: CityGrid, seed: int = 0, grid_width: int = 8
) -> list[LocationProfile]:
    """Profiles pinned to distinct grid-cell centers with varied POI mixes."""
    rng = np.random.default_rng(seed)
    streets = ("Main Street", "Oak Avenue", "River Road", "Hill Lane", "Market Square")
    profiles = []
    for i in range(n):
        row, col = i // grid_width, i % grid_width
        lat, lon = cell_center_latlon(city, row, col)
        n_cats = int(rng.integers(1, 5))
        cats = rng.choice(len(POI_CATEGORIES), size=n_cats, replace=False)
        poi = {POI_CATEGORIES[int(c)]: int(rng.integers(1, 6)) for c in sorted(cats)}
        profiles.append(
            LocationProfile(
                location_id=f"loc-{i:04d}",
                address=f"{100 + i} {streets[i % len(streets)]}, {city.name.title()}",
                center_lat=lat,
                center_lon=lon,
                osm_type="node",
                osm_id=10_000 + i,
                place_id=500 + i,
                poi_counts=poi,
            )
        )
    return profiles


def make_visits(
    profiles: list[LocationProfile],
    n_users: int = 5,
    days: int = 7,
    visits_per_day: int = 29,
    start_day: int = 19_000,
    seed: int = 0,
) -> list[RawVisit]:
    """Habitual visit streams: each user favors a few locations with a
    time-of-day routine plus noise."""
    rng = np.random.default_rng(seed)
    visits = []
    for u in range(n_users):
        favorites = rng.choice(len(profiles), size=min(5, len(profiles)), replace=False)
        weights = rng.dirichlet(np.ones(len(favorites)) * 2.0)
        for d in range(days):
            day = start_day + d
            slots = np.sort(rng.choice(48, size=visits_per_day, replace=False))
            for slot in slots:
                p = profiles[int(rng.choice(favorites, p=weights))]
                ts = day * 86400 + int(slot) * 1800 + int(rng.integers(0, 1800))
                visits.append(RawVisit(f"user-{u}", float(ts), p.center_lat, p.center_lon))
    visits.sort(key=lambda v: (v.user_id, v.timestamp))
    return visits
