"""Engineered source features: geographic zones, country codes, coordinate clusters.

Derived feature names (``genus``, ``family``, ``country``, ``latzone``,
``lonzone``, ``latlon``, ``cluster``, ``name``) live in the same namespace as
the linguistic features; the id prefixes of real feature names keep them from
colliding.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .data import Dataset, LanguageRecord
from .errors import ConfigError, DataValidationError
from .validation import check_positive_int

#: Latitude cut points giving the 5 default zones.
DEFAULT_LAT_CUTS = (-10.0, 10.0, 35.0, 60.0)
#: Longitude cut points on the circle giving the 11 default zones; the last
#: zone wraps the antimeridian (160E across to 140W).
DEFAULT_LON_CUTS = (-140.0, -100.0, -60.0, -30.0, 0.0, 35.0, 70.0, 95.0, 120.0, 140.0, 160.0)

#: The country code never trusted as evidence (frequently attached in error).
UNTRUSTED_COUNTRY = "US"

PROBABILISTIC_PROFILE = "probabilistic"
NEURAL_PROFILE = "neural"


def _fmt(x: float) -> str:
    return format(float(x), "g")


def _span(lo: float, hi: float) -> str:
    return f"{_fmt(lo)}–{_fmt(hi)}"


@dataclass(frozen=True)
class GeoZoning:
    """A fixed partition of the globe into 5 latitude and 11 longitude bands.

    All intervals are half-open ``[lo, hi)``; the northernmost latitude band
    is closed at 90 and the last longitude band wraps the antimeridian, so
    every valid coordinate falls in exactly one band of each kind.
    """

    lat_cuts: tuple[float, ...] = DEFAULT_LAT_CUTS
    lon_cuts: tuple[float, ...] = DEFAULT_LON_CUTS

    def __post_init__(self):
        object.__setattr__(self, "lat_cuts", tuple(float(c) for c in self.lat_cuts))
        object.__setattr__(self, "lon_cuts", tuple(float(c) for c in self.lon_cuts))
        if len(self.lat_cuts) != 4:
            raise ConfigError(f"need exactly 4 latitude cut points, got {len(self.lat_cuts)}")
        if len(self.lon_cuts) != 11:
            raise ConfigError(f"need exactly 11 longitude cut points, got {len(self.lon_cuts)}")
        if any(b <= a for a, b in zip(self.lat_cuts, self.lat_cuts[1:])):
            raise ConfigError("latitude cut points must be strictly increasing")
        if any(b <= a for a, b in zip(self.lon_cuts, self.lon_cuts[1:])):
            raise ConfigError("longitude cut points must be strictly increasing")
        if self.lat_cuts[0] <= -90.0 or self.lat_cuts[-1] >= 90.0:
            raise ConfigError("latitude cut points must lie strictly inside (-90, 90)")
        if self.lon_cuts[0] < -180.0 or self.lon_cuts[-1] > 180.0:
            raise ConfigError("longitude cut points must lie in [-180, 180]")

    def lat_zone(self, lat: float) -> str:
        if not -90.0 <= lat <= 90.0:
            raise DataValidationError(f"latitude {lat} outside [-90, 90]")
        edges = (-90.0,) + self.lat_cuts + (90.0,)
        i = bisect_right(self.lat_cuts, lat)
        return _span(edges[i], edges[i + 1])

    def lon_zone(self, lon: float) -> str:
        if not -180.0 <= lon <= 180.0:
            raise DataValidationError(f"longitude {lon} outside [-180, 180]")
        cuts = self.lon_cuts
        if lon < cuts[0] or lon >= cuts[-1]:
            return _span(cuts[-1], cuts[0])  # the antimeridian-wrapping band
        i = bisect_right(cuts, lon) - 1
        return _span(cuts[i], cuts[i + 1])

    def latlon_zone(self, lat: float, lon: float) -> str:
        return f"{self.lat_zone(lat)};{self.lon_zone(lon)}"


def assign_geo_zones(lat: float, lon: float, zoning: GeoZoning) -> tuple[str, str, str]:
    """Return ``(lat_zone, lon_zone, latlon_zone)`` labels for a coordinate."""
    lat_z = zoning.lat_zone(lat)
    lon_z = zoning.lon_zone(lon)
    return lat_z, lon_z, f"{lat_z};{lon_z}"


def load_zoning(path) -> GeoZoning:
    """Read zone cut points from a plain-text file.

    The file holds one ``lat`` and one ``lon`` line, each followed by its
    space-separated cut points; blank lines and ``#`` comments are ignored.
    """
    cuts: dict[str, tuple[float, ...]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, *values = line.replace(":", " ").split()
            if key not in ("lat", "lon") or key in cuts:
                raise ConfigError(f"{path}:{lineno}: expected one 'lat' and one 'lon' line")
            try:
                cuts[key] = tuple(float(v) for v in values)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: non-numeric cut point") from None
    if set(cuts) != {"lat", "lon"}:
        raise ConfigError(f"{path}: missing 'lat' or 'lon' line")
    return GeoZoning(cuts["lat"], cuts["lon"])


def expand_country_codes(record: LanguageRecord) -> list[tuple[str, str]]:
    """One ``("country", code)`` observation per trusted country code."""
    return [
        ("country", code)
        for code in sorted(record.country_codes)
        if code != UNTRUSTED_COUNTRY
    ]


# ---------------------------------------------------------------------------
# Coordinate clustering


class CoordinateKMeans(BaseEstimator):
    """Lloyd's algorithm with k-means++ seeding on raw degree coordinates.

    Distances are squared Euclidean on (lat, lon) pairs; no antimeridian
    wrapping.  Iterates to an assignment fixpoint (or ``max_iter``).  Ties go
    to the lowest cluster id, an emptied cluster is re-seeded with the point
    farthest from its current centroid, and the whole procedure is
    deterministic for a fixed seed.
    """

    def __init__(self, n_clusters: int = 300, seed: int = 0, max_iter: int = 300):
        self.n_clusters = n_clusters
        self.seed = seed
        self.max_iter = max_iter

    @staticmethod
    def _sq_distances(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
        return ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)

    def _init_centers(self, X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
        n = len(X)
        centers = np.empty((k, X.shape[1]))
        centers[0] = X[int(rng.integers(n))]
        d2 = ((X - centers[0]) ** 2).sum(axis=1)
        for j in range(1, k):
            total = d2.sum()
            if total > 0.0:
                idx = int(rng.choice(n, p=d2 / total))
            else:  # unreachable when k <= number of distinct points
                idx = int(rng.integers(n))
            centers[j] = X[idx]
            d2 = np.minimum(d2, ((X - centers[j]) ** 2).sum(axis=1))
        return centers

    def fit(self, X) -> "CoordinateKMeans":
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != 2 or len(X) == 0:
            raise DataValidationError("expected a non-empty array of (lat, lon) rows")
        k = check_positive_int(self.n_clusters, "n_clusters")
        n_distinct = len(np.unique(X, axis=0))
        if k > n_distinct:
            raise DataValidationError(
                f"n_clusters={k} exceeds the {n_distinct} distinct coordinate points"
            )

        rng = np.random.default_rng(self.seed)
        centers = self._init_centers(X, k, rng)
        n = len(X)
        prev = None
        trace = []
        for iteration in range(1, self.max_iter + 1):
            d2 = self._sq_distances(X, centers)
            labels = d2.argmin(axis=1)
            point_d2 = d2[np.arange(n), labels]
            trace.append(float(point_d2.sum()))
            if prev is not None and np.array_equal(labels, prev):
                break
            prev = labels

            sums = np.zeros_like(centers)
            np.add.at(sums, labels, X)
            counts = np.bincount(labels, minlength=k)
            new_centers = centers.copy()
            nonempty = counts > 0
            new_centers[nonempty] = sums[nonempty] / counts[nonempty, None]
            if not nonempty.all():
                stealable = point_d2.copy()
                for j in np.flatnonzero(~nonempty):
                    far = int(stealable.argmax())
                    new_centers[j] = X[far]
                    stealable[far] = -1.0
            centers = new_centers

        self.cluster_centers_ = centers
        self.labels_ = labels
        self.inertia_ = trace[-1]
        self.inertia_trace_ = tuple(trace)
        self.n_iter_ = iteration
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self)
        X = np.asarray(X, dtype=float)
        return self._sq_distances(X, self.cluster_centers_).argmin(axis=1)

    def fit_predict(self, X) -> np.ndarray:
        return self.fit(X).labels_


@dataclass(frozen=True, eq=False)
class CoordClustering:
    """A fitted coordinate clustering with the per-language assignments."""

    k: int
    seed: int
    centroids: np.ndarray
    assignment: dict[str, int] = field(default_factory=dict)

    def assign(self, lat: float, lon: float) -> int:
        """Id of the nearest centroid; ties go to the lowest id."""
        d2 = ((self.centroids - np.array([lat, lon])) ** 2).sum(axis=1)
        return int(d2.argmin())

    def cluster_of(self, record: LanguageRecord) -> int:
        cached = self.assignment.get(record.wals_code)
        if cached is not None:
            return cached
        return self.assign(record.latitude, record.longitude)


def cluster_coordinates(
    points: list[tuple[str, float, float]], k: int, seed: int
) -> CoordClustering:
    """Cluster ``(wals_code, lat, lon)`` points into ``k`` geographic groups."""
    if not points:
        raise DataValidationError("no coordinate points to cluster")
    codes = [code for code, _, _ in points]
    X = np.array([(lat, lon) for _, lat, lon in points], dtype=float)
    model = CoordinateKMeans(n_clusters=k, seed=seed).fit(X)
    assignment = {code: int(label) for code, label in zip(codes, model.labels_)}
    return CoordClustering(k=k, seed=seed, centroids=model.cluster_centers_, assignment=assignment)


def cluster_dataset(dataset: Dataset, k: int, seed: int) -> CoordClustering:
    return cluster_coordinates(
        [(rec.wals_code, rec.latitude, rec.longitude) for rec in dataset], k, seed
    )


# ---------------------------------------------------------------------------
# Feature profiles


def derive_features(
    record: LanguageRecord,
    zoning: GeoZoning,
    clustering: CoordClustering | None = None,
    profile: str = PROBABILISTIC_PROFILE,
) -> list[tuple[str, str]]:
    """The source observations a model may condition on for one language.

    The probabilistic profile uses the known linguistic features, genus,
    family, the trusted country codes and the three zone features.  The
    neural profile uses the known linguistic features, the language name,
    genus, family and the coordinate cluster id; it never exposes country
    codes or raw coordinates.  Masked cells never appear in either profile.
    """
    observations = [(name, value) for name, value in record.known_features()]
    if profile == PROBABILISTIC_PROFILE:
        if record.genus:
            observations.append(("genus", record.genus))
        if record.family:
            observations.append(("family", record.family))
        observations.extend(expand_country_codes(record))
        lat_z, lon_z, latlon_z = assign_geo_zones(record.latitude, record.longitude, zoning)
        observations.append(("latzone", lat_z))
        observations.append(("lonzone", lon_z))
        observations.append(("latlon", latlon_z))
    elif profile == NEURAL_PROFILE:
        if clustering is None:
            raise DataValidationError("the neural profile requires a fitted clustering")
        if record.name:
            observations.append(("name", record.name))
        if record.genus:
            observations.append(("genus", record.genus))
        if record.family:
            observations.append(("family", record.family))
        observations.append(("cluster", str(clustering.cluster_of(record))))
    else:
        raise DataValidationError(f"unknown feature profile {profile!r}")
    return observations
