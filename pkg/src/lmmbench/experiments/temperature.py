"""Latitude regression from daily temperature series.

Each city's series is treated as a random function of its (latent) location.
The first p readings are standardised per city and latitude is regressed on
p^{-1/2}-scaled covariates with the same ridge estimator as the rate sweeps.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import ridge

log = logging.getLogger(__name__)

MIN_CITIES = 5
POOLED_GROUP = "ALL"
MISSING = {"", "na", "nan", "null"}


class CityCsvError(ValueError):
    pass


@dataclass(frozen=True)
class CityRecord:
    city_id: str
    continent: str
    latitude: float
    temps: np.ndarray

    def __post_init__(self):
        if not abs(self.latitude) <= 90:
            raise ValueError(f"{self.city_id}: latitude {self.latitude} outside [-90, 90]")
        temps = np.array(self.temps, dtype=np.float64)
        temps.setflags(write=False)
        object.__setattr__(self, "temps", temps)

    def __eq__(self, other):
        if not isinstance(other, CityRecord):
            return NotImplemented
        return (
            (self.city_id, self.continent, self.latitude) == (other.city_id, other.continent, other.latitude)
            and np.array_equal(self.temps, other.temps)
        )

    __hash__ = None


@dataclass(frozen=True)
class IngestReport:
    records: list[CityRecord]
    skipped: list[tuple[int, str]]
    counts: dict[str, int]


def read_city_csv(path) -> IngestReport:
    """Parse a city file; rows with missing readings are skipped and listed with line numbers."""
    path = Path(path)
    records: list[CityRecord] = []
    skipped: list[tuple[int, str]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise CityCsvError(f"{path}: missing header")
        _check_header(header, path)
        width = len(header)
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != width:
                raise CityCsvError(f"{path}:{line}: expected {width} fields, found {len(row)}")
            city_id, continent, lat_text = row[0].strip(), row[1].strip(), row[2].strip()
            try:
                lat = float(lat_text)
            except ValueError:
                raise CityCsvError(f"{path}:{line}: non-numeric latitude {lat_text!r}") from None
            if not abs(lat) <= 90:
                raise CityCsvError(f"{path}:{line}: latitude {lat} outside [-90, 90]")
            cells = [c.strip() for c in row[3:]]
            if any(c.lower() in MISSING for c in cells):
                skipped.append((line, f"{city_id}: missing temperature"))
                log.warning("%s:%d: skipping %s (missing temperature)", path, line, city_id)
                continue
            try:
                temps = np.array([float(c) for c in cells])
            except ValueError:
                bad = next(c for c in cells if not _is_float(c))
                raise CityCsvError(f"{path}:{line}: non-numeric temperature {bad!r}") from None
            if not np.all(np.isfinite(temps)):
                raise CityCsvError(f"{path}:{line}: non-finite temperature")
            records.append(CityRecord(city_id, continent, lat, temps))
    counts = dict(sorted(Counter(r.continent for r in records).items()))
    for continent, count in counts.items():
        log.info("%s: %d cities", continent, count)
    return IngestReport(records, skipped, counts)


def ingest_city_csv(path) -> list[CityRecord]:
    return read_city_csv(path).records


def _is_float(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _check_header(header: list[str], path) -> None:
    header = [h.strip() for h in header]
    if header[:3] != ["city_id", "continent", "latitude"] or len(header) < 4:
        raise CityCsvError(f"{path}:1: malformed header, expected city_id,continent,latitude,t_0001,...")
    for j, name in enumerate(header[3:], start=1):
        if name != f"t_{j:04d}":
            raise CityCsvError(f"{path}:1: malformed header, column {j + 3} is {name!r}, expected t_{j:04d}")


def write_city_csv(records: list[CityRecord], path) -> None:
    if not records:
        raise ValueError("no records to write")
    p = records[0].temps.size
    if any(r.temps.size != p for r in records):
        raise ValueError("all series must have the same length")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["city_id", "continent", "latitude"] + [f"t_{j:04d}" for j in range(1, p + 1)])
        for r in records:
            w.writerow([r.city_id, r.continent, repr(r.latitude)] + [repr(float(t)) for t in r.temps])


def continent_counts(records: list[CityRecord]) -> dict[str, int]:
    return dict(sorted(Counter(r.continent for r in records).items()))


# ---------------------------------------------------------------- synthetic data


@dataclass(frozen=True)
class SyntheticCityModel:
    """Seasonal cycle plus a daily weather anomaly that varies smoothly with latitude.

    temps_t = m(lat) + A(lat) cos(2 pi t / period + phase(lat)) + w_t(lat) + noise,
    where phase is 0 or pi by hemisphere plus a small latitude-linear lag and
    each day's anomaly w_t is an independent draw of a random function of
    latitude (cosine expansion with exponentially decaying weights).
    """

    base_temp: float = 27.0
    temp_slope: float = 0.45
    amp_intercept: float = 1.5
    amp_slope: float = 0.3
    lag_per_degree: float = 0.01
    anomaly_sd: float = 3.0
    anomaly_modes: int = 40
    anomaly_decay: float = 0.15
    noise_sd: float = 1.5
    period: float = 365.25

    def mean(self, lat):
        return self.base_temp - self.temp_slope * np.abs(lat)

    def amplitude(self, lat):
        return self.amp_intercept + self.amp_slope * np.abs(lat)

    def phase(self, lat):
        return np.where(np.asarray(lat) < 0, math.pi, 0.0) + self.lag_per_degree * np.asarray(lat)

    def signal(self, lat: float, p_len: int) -> np.ndarray:
        t = np.arange(1, p_len + 1)
        return self.mean(lat) + self.amplitude(lat) * np.cos(2 * math.pi * t / self.period + self.phase(lat))

    def anomaly_basis(self, lat) -> np.ndarray:
        """Rows: cities; columns: weighted cosine modes in u = (lat + 90) pi / 180."""
        k = np.arange(1, self.anomaly_modes + 1)
        w = np.exp(-self.anomaly_decay * k)
        w = w / w.sum()
        u = (np.asarray(lat, dtype=np.float64)[..., None] + 90.0) * math.pi / 180.0
        return self.anomaly_sd * np.sqrt(2.0 * w) * np.cos(k * u)


def _continent(lat: float, lon: float) -> str:
    if lon < -60:
        return "North America" if lat > 12 else "South America"
    if lon < 60:
        return "Europe" if lat > 36 else "Africa"
    return "Oceania" if lat < -10 else "Asia"


def generate_synthetic_cities(
    n_cities: int,
    p_len: int,
    seed: int,
    model: SyntheticCityModel | None = None,
) -> list[CityRecord]:
    """Cities with latitude ~ U(-60, 70) and noisy seasonal temperature series."""
    if n_cities < 10:
        raise ValueError("n_cities must be >= 10")
    if p_len < 1:
        raise ValueError("p_len must be >= 1")
    model = SyntheticCityModel() if model is None else model
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 0x7E3])))
    lats = rng.uniform(-60.0, 70.0, size=n_cities)
    lons = rng.uniform(-180.0, 180.0, size=n_cities)
    temps = np.stack([model.signal(lat, p_len) for lat in lats])
    if model.anomaly_sd and model.anomaly_modes:
        xi = rng.standard_normal((p_len, model.anomaly_modes))  # shared by all cities on a given day
        temps += model.anomaly_basis(lats) @ xi.T
    if model.noise_sd:
        temps += model.noise_sd * rng.standard_normal((n_cities, p_len))
    width = len(str(n_cities))
    return [
        CityRecord(f"C{i:0{width}d}", _continent(lat, lon), float(lat), np.round(temps[i], 6))
        for i, (lat, lon) in enumerate(zip(lats, lons))
    ]


# ---------------------------------------------------------------- regression


def standardise(temps: np.ndarray, p: int) -> np.ndarray:
    """First p readings of each row, centred and scaled to unit (population) variance."""
    X = np.asarray(temps, dtype=np.float64)[:, :p]
    sd = X.std(axis=1, keepdims=True)
    if np.any(sd == 0):
        raise ValueError("constant temperature series cannot be standardised")
    return (X - X.mean(axis=1, keepdims=True)) / sd


def _membership_key(seed: int, trial: int, city_id: str) -> int:
    h = hashlib.blake2b(f"{seed}/{trial}/{city_id}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(h, "little")


def train_mask(city_ids: list[str], train_frac: float, seed: int, trial: int) -> np.ndarray:
    """Training membership for one trial, determined by a salted hash of each city_id.

    The cities with the smallest ceil(train_frac * N) keys train; the result
    does not depend on row order.
    """
    n_train = max(1, math.ceil(train_frac * len(city_ids) - 1e-9))
    keys = np.array([_membership_key(seed, trial, c) for c in city_ids], dtype=np.uint64)
    order = np.argsort(keys, kind="stable")
    mask = np.zeros(len(city_ids), dtype=bool)
    mask[order[:n_train]] = True
    return mask


@dataclass(frozen=True)
class TemperatureRow:
    continent: str
    p: int
    trial: int
    n_train: int
    n_test: int
    rmse: float


@dataclass(frozen=True)
class TemperatureResult:
    rows: list[TemperatureRow]
    counts: dict[str, int]
    skipped: list[str] = field(default_factory=list)
    lat_sd: dict[str, float] = field(default_factory=dict)

    def continents(self) -> list[str]:
        return sorted({r.continent for r in self.rows})

    def median_rmse(self, continent: str) -> dict[int, float]:
        by_p: dict[int, list[float]] = {}
        for r in self.rows:
            if r.continent == continent:
                by_p.setdefault(r.p, []).append(r.rmse)
        return {p: float(np.median(v)) for p, v in sorted(by_p.items())}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["continent", "p", "trial", "n_train", "n_test", "rmse"])
            for r in self.rows:
                w.writerow([r.continent, r.p, r.trial, r.n_train, r.n_test, repr(r.rmse)])


def fit_predict_latitude(
    X_train: np.ndarray,
    lat_train: np.ndarray,
    X_test: np.ndarray,
    gamma: float = 0.0,
    pinv: bool = True,
    center: bool = False,
) -> np.ndarray:
    """Ridge fit of latitude on standardised series; no intercept unless ``center``."""
    offset = float(lat_train.mean()) if center else 0.0
    sol = ridge.fit_dual(X_train, lat_train - offset, gamma, pinv=pinv)
    return ridge.predict(sol, X_test) + offset


def run_temperature(
    records: list[CityRecord],
    train_frac: float = 0.2,
    trials: int = 50,
    p_grid=(10, 50, 200, 800, 1450),
    gamma: float = 0.0,
    seed: int = 0,
    pinv: bool = True,
    center_latitude: bool = False,
    min_cities: int = MIN_CITIES,
    include_pooled: bool = True,
    workers: int = 1,
) -> TemperatureResult:
    """Per-(continent, p, trial) test RMSE of latitude regression.

    With ``include_pooled`` an extra group named ``POOLED_GROUP`` regresses over
    all cities at once.
    """
    if not 0 < train_frac < 1:
        raise ValueError("train_frac must lie in (0, 1)")
    if not records:
        raise ValueError("no city records")
    p_len = records[0].temps.size
    p_grid = [int(p) for p in p_grid]
    if any(not 1 <= p <= p_len for p in p_grid):
        raise ValueError(f"p_grid values must lie in [1, {p_len}]")
    if any(r.temps.size != p_len for r in records):
        raise ValueError("all series must have the same length")

    records = sorted(records, key=lambda r: r.city_id)
    groups: dict[str, list[CityRecord]] = {}
    for r in records:
        groups.setdefault(r.continent, []).append(r)
    if include_pooled:
        if POOLED_GROUP in groups:
            raise ValueError(f"continent name {POOLED_GROUP!r} is reserved for the pooled group")
        groups[POOLED_GROUP] = list(records)

    rows: list[TemperatureRow] = []
    skipped: list[str] = []
    lat_sd: dict[str, float] = {}
    tasks = []
    for continent in sorted(groups):
        cities = groups[continent]
        if len(cities) < min_cities:
            log.warning("skipping %s: %d cities (< %d)", continent, len(cities), min_cities)
            skipped.append(continent)
            continue
        lat_sd[continent] = float(np.std([c.latitude for c in cities], ddof=1)) if len(cities) > 1 else 0.0
        tasks.append((continent, cities, train_frac, trials, p_grid, gamma, seed, pinv, center_latitude))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_group, tasks))
    else:
        chunks = [_run_group(t) for t in tasks]
    for chunk in chunks:
        rows.extend(chunk)
    return TemperatureResult(rows, continent_counts(records), skipped, lat_sd)


def _run_group(task) -> list[TemperatureRow]:
    continent, cities, train_frac, trials, p_grid, gamma, seed, pinv, center = task
    ids = [c.city_id for c in cities]
    lat = np.array([c.latitude for c in cities])
    temps = np.stack([c.temps for c in cities])
    masks = [train_mask(ids, train_frac, seed, t) for t in range(trials)]
    rows = []
    for p in p_grid:
        X = standardise(temps, p)
        for t, mask in enumerate(masks):
            n_test = int((~mask).sum())
            if n_test == 0:
                continue
            pred = fit_predict_latitude(X[mask], lat[mask], X[~mask], gamma, pinv, center)
            rmse = float(np.sqrt(np.mean((pred - lat[~mask]) ** 2)))
            rows.append(TemperatureRow(continent, p, t, int(mask.sum()), n_test, rmse))
    return rows


def export_gram(records: list[CityRecord], p: int, csv_path, json_path) -> np.ndarray:
    """Write p^{-1} X X^T of the standardised series with rows sorted by latitude."""
    ordered = sorted(records, key=lambda r: (r.latitude, r.city_id))
    X = standardise(np.stack([r.temps for r in ordered]), p)
    G = ridge.scaled_gram(X)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in G:
            w.writerow([repr(float(v)) for v in row])
    sidecar = {"p": p, "city_ids": [r.city_id for r in ordered], "latitudes": [r.latitude for r in ordered]}
    Path(json_path).write_text(json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")
    return G
