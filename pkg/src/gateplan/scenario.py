"""Scenario sets, representative-day clustering and NPV scaling."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

HOURS_PER_YEAR = 8760
PROB_TOL = 1e-9
# exhaustive medoid search below this many combinations, PAM above
EXACT_COMBINATION_LIMIT = 20_000


@dataclass(frozen=True)
class NpvFactors:
    years: tuple[int, ...]
    yearly: np.ndarray
    hourly: np.ndarray

    def f_y(self, year: int) -> float:
        return float(self.yearly[self.years.index(year)])

    def f_h(self, year: int) -> float:
        return float(self.hourly[self.years.index(year)])


def npv_factors(
    discount_rate: float,
    base_year: int,
    years: Sequence[int],
    multiplicity: int = 1,
) -> NpvFactors:
    """Discount factors for yearly investments and for hourly value streams.

    ``hourly`` covers ``multiplicity`` calendar years per simulation year and
    is still to be multiplied by day weights when summing hourly terms.
    """
    if discount_rate <= -1:
        raise ValueError("discount rate must exceed -1")
    if multiplicity < 1:
        raise ValueError("calendar multiplicity must be >= 1")
    d = 1.0 + discount_rate
    yearly = np.array([d ** -(y - base_year) for y in years], dtype=float)
    hourly = np.array(
        [sum(d ** -(y - base_year + k) for k in range(multiplicity)) for y in years],
        dtype=float,
    )
    return NpvFactors(tuple(years), yearly, hourly)


@dataclass(frozen=True)
class ScenarioSet:
    """Weighted representative-day time structure.

    Hours are ordered blocks of ``hours_per_block`` steps. ``block_weights``
    has shape (scenarios, years, blocks) in days per year.
    """

    scenarios: tuple[str, ...]
    probabilities: np.ndarray
    years: tuple[int, ...]
    block_weights: np.ndarray
    hours_per_block: int = 24
    dt: float = 1.0
    base_year: int | None = None
    multiplicity: int = 1
    medoids: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        w = np.asarray(self.block_weights, dtype=float)
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "block_weights", w)
        if p.shape != (len(self.scenarios),):
            raise ValueError("one probability per scenario required")
        if np.any(p < 0) or abs(p.sum() - 1.0) > PROB_TOL:
            raise ValueError("scenario probabilities must be nonnegative and sum to 1")
        if w.shape[:2] != (len(self.scenarios), len(self.years)):
            raise ValueError("block weights must have shape (scenarios, years, blocks)")

    @property
    def n_blocks(self) -> int:
        return self.block_weights.shape[2]

    @property
    def n_hours(self) -> int:
        return self.n_blocks * self.hours_per_block

    @property
    def first_year(self) -> int:
        return self.years[0]

    def block_of(self, hour: int) -> int:
        return hour // self.hours_per_block

    def is_block_start(self, hour: int) -> bool:
        return hour % self.hours_per_block == 0

    def is_block_end(self, hour: int) -> bool:
        return hour % self.hours_per_block == self.hours_per_block - 1

    def previous_year(self, year: int) -> int | None:
        i = self.years.index(year)
        return self.years[i - 1] if i > 0 else None

    def hour_weights(self) -> np.ndarray:
        """Represented hours per simulated step, shape (S, Y, H), one calendar year."""
        return np.repeat(self.block_weights, self.hours_per_block, axis=2) * self.dt

    def npv(self, discount_rate: float) -> NpvFactors:
        base = self.first_year if self.base_year is None else self.base_year
        return npv_factors(discount_rate, base, self.years, self.multiplicity)

    def objective_weights(self, discount_rate: float) -> np.ndarray:
        """pi_s * f^h_y * w_d * dt for every (s, y, t)."""
        f = self.npv(discount_rate)
        return (
            self.probabilities[:, None, None]
            * f.hourly[None, :, None]
            * self.hour_weights()
        )

    def hours(self):
        for si in range(len(self.scenarios)):
            for y in self.years:
                for t in range(self.n_hours):
                    yield si, y, t


@dataclass(frozen=True)
class ProfileLibrary:
    """profile key -> array (scenarios, years, hours)."""

    series: Mapping[str, np.ndarray]

    def __getitem__(self, key: str) -> np.ndarray:
        return self.series[key]

    def __contains__(self, key: str) -> bool:
        return key in self.series

    def keys(self):
        return self.series.keys()

    def check(self, scenarios: ScenarioSet, per_unit: Sequence[str] = ()) -> list[str]:
        problems = []
        shape = (len(scenarios.scenarios), len(scenarios.years), scenarios.n_hours)
        for k, v in self.series.items():
            if v.shape != shape:
                problems.append(f"profile {k}: shape {v.shape}, expected {shape}")
            if np.any(v < 0):
                problems.append(f"profile {k}: negative values")
            if k in per_unit and np.any(v > 1 + 1e-9):
                problems.append(f"profile {k}: per-unit series above 1")
        return problems


def _normalize(features: np.ndarray) -> np.ndarray:
    mu = features.mean(axis=0)
    sd = features.std(axis=0)
    sd[sd == 0] = 1.0
    return (features - mu) / sd


def _pairwise(x: np.ndarray) -> np.ndarray:
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2 * x @ x.T
    np.maximum(d2, 0, out=d2)
    return np.sqrt(d2)


def medoid_cost(dist: np.ndarray, medoids: Sequence[int]) -> float:
    return float(dist[:, list(medoids)].min(axis=1).sum())


def _exhaustive(dist: np.ndarray, k: int) -> list[int]:
    best, best_cost = None, np.inf
    for combo in itertools.combinations(range(dist.shape[0]), k):
        c = dist[:, combo].min(axis=1).sum()
        if c < best_cost - 1e-12:
            best, best_cost = list(combo), c
    return best


def _pam(dist: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 200) -> list[int]:
    n = dist.shape[0]
    # BUILD
    medoids = [int(np.argmin(dist.sum(axis=1)))]
    nearest = dist[:, medoids[0]].copy()
    while len(medoids) < k:
        gains = np.maximum(nearest[:, None] - dist, 0).sum(axis=0)
        gains[medoids] = -np.inf
        best = np.flatnonzero(gains == gains.max())
        pick = int(best[0]) if len(best) == 1 else int(rng.choice(best))
        medoids.append(pick)
        nearest = np.minimum(nearest, dist[:, pick])
    # SWAP
    cost = medoid_cost(dist, medoids)
    for _ in range(max_iter):
        improved = False
        for i in range(k):
            others = medoids[:i] + medoids[i + 1:]
            base = dist[:, others].min(axis=1) if others else np.full(n, np.inf)
            trial = np.minimum(base[:, None], dist).sum(axis=0)
            trial[medoids] = np.inf
            h = int(np.argmin(trial))
            if trial[h] < cost - 1e-12:
                medoids[i] = h
                cost = float(trial[h])
                improved = True
        if not improved:
            break
    return medoids


def cluster_representative_days(
    features: np.ndarray,
    k: int,
    seed: int = 0,
    normalize: bool = True,
    exact_limit: int = EXACT_COMBINATION_LIMIT,
) -> tuple[np.ndarray, np.ndarray]:
    """k-medoids over days; returns (medoid day indices, integer weights).

    Rows of ``features`` are days, columns the concatenated hourly series.
    Small problems are solved by exhaustive medoid enumeration, larger ones
    with PAM (build + swap). Medoids are returned in chronological order.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.size == 0:
        raise ValueError("feature matrix must be a non-empty 2-D array")
    if k <= 0:
        raise ValueError("k must be positive")
    n = x.shape[0]
    if k > n:
        raise ValueError("k exceeds number of days")
    if normalize:
        x = _normalize(x)
    dist = _pairwise(x)
    from math import comb

    if comb(n, k) <= exact_limit:
        medoids = _exhaustive(dist, k)
    else:
        medoids = _pam(dist, k, np.random.default_rng(seed))
    medoids = sorted(medoids)
    assign = np.argmin(dist[:, medoids], axis=1)
    weights = np.bincount(assign, minlength=k)
    return np.asarray(medoids), weights


def build_scenario_set(
    raw: Mapping[str, Mapping[int, Mapping[str, np.ndarray]]],
    k: int,
    probabilities: Mapping[str, float] | Sequence[float] | None = None,
    hours_per_day: int = 24,
    seed: int = 0,
    base_year: int | None = None,
    multiplicity: int = 1,
) -> tuple[ScenarioSet, ProfileLibrary]:
    """Reduce hourly scenario-year data to ``k`` representative days per year.

    ``raw[scenario][year][profile_key]`` is an hourly series; all series of a
    scenario-year must share one length, a multiple of ``hours_per_day``.
    Clustering runs per scenario-year on the concatenation of all series of a
    day so cross-series correlation is kept.
    """
    scenarios = tuple(raw)
    if not scenarios:
        raise ValueError("no scenarios")
    years = tuple(sorted(raw[scenarios[0]]))
    keys = sorted(raw[scenarios[0]][years[0]])
    if probabilities is None:
        probs = np.full(len(scenarios), 1.0 / len(scenarios))
    elif isinstance(probabilities, Mapping):
        probs = np.array([probabilities[s] for s in scenarios], dtype=float)
    else:
        probs = np.asarray(probabilities, dtype=float)
    if abs(probs.sum() - 1.0) > PROB_TOL:
        raise ValueError(f"probabilities sum to {probs.sum()}, not 1")
    probs = probs / probs.sum()

    weights = np.zeros((len(scenarios), len(years), k))
    series = {key: np.zeros((len(scenarios), len(years), k * hours_per_day)) for key in keys}
    medoid_log = {}
    for si, s in enumerate(scenarios):
        if tuple(sorted(raw[s])) != years:
            raise ValueError(f"scenario {s}: years differ from {years}")
        for yi, y in enumerate(years):
            data = raw[s][y]
            if sorted(data) != keys:
                raise ValueError(f"scenario {s} year {y}: profile keys differ")
            lengths = {len(np.asarray(data[key])) for key in keys}
            if len(lengths) != 1:
                raise ValueError(f"scenario {s} year {y}: misaligned series lengths {sorted(lengths)}")
            length = lengths.pop()
            if length % hours_per_day:
                raise ValueError(f"series length {length} is not a whole number of days")
            days = length // hours_per_day
            cube = np.stack([np.asarray(data[key], dtype=float).reshape(days, hours_per_day) for key in keys])
            feats = cube.transpose(1, 0, 2).reshape(days, -1)
            med, w = cluster_representative_days(feats, k, seed=seed)
            weights[si, yi] = w * (HOURS_PER_YEAR / hours_per_day) / days
            for ki, key in enumerate(keys):
                series[key][si, yi] = cube[ki, med].reshape(-1)
            medoid_log[(s, y)] = (med, w)
    sset = ScenarioSet(
        scenarios=scenarios,
        probabilities=probs,
        years=years,
        block_weights=weights,
        hours_per_block=hours_per_day,
        base_year=base_year,
        multiplicity=multiplicity,
        medoids=medoid_log,
    )
    return sset, ProfileLibrary(series)


def assignments_frame(sset: ScenarioSet) -> pd.DataFrame:
    rows = []
    for (s, y), (med, w) in sset.medoids.items():
        for d, (m, c) in enumerate(zip(med, w)):
            rows.append({"scenario": s, "year": y, "block": d, "medoid_day": int(m), "days": int(c)})
    return pd.DataFrame(rows, columns=["scenario", "year", "block", "medoid_day", "days"])


def read_profile_csv(path: str | Path) -> dict[tuple[str, int], np.ndarray]:
    """One profile per file with columns scenario, year, hour, value."""
    df = pd.read_csv(path)
    missing = {"scenario", "year", "hour", "value"} - set(df.columns)
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    out = {}
    for (s, y), g in df.groupby(["scenario", "year"], sort=False):
        g = g.sort_values("hour")
        if not np.array_equal(g["hour"].to_numpy(), np.arange(len(g))):
            raise ValueError(f"{path}: hours of {s}/{y} are not a contiguous 0-based index")
        out[(str(s), int(y))] = g["value"].to_numpy(dtype=float)
    return out


def profiles_to_frame(sset: ScenarioSet, lib: ProfileLibrary) -> pd.DataFrame:
    """Long table (scenario, year, hour, key, value)."""
    frames = []
    S, Y, H = len(sset.scenarios), len(sset.years), sset.n_hours
    s_idx, y_idx, h_idx = np.meshgrid(np.arange(S), np.arange(Y), np.arange(H), indexing="ij")
    for key in sorted(lib.keys()):
        frames.append(pd.DataFrame({
            "scenario": np.asarray(sset.scenarios)[s_idx.ravel()],
            "year": np.asarray(sset.years)[y_idx.ravel()],
            "hour": h_idx.ravel(),
            "key": key,
            "value": lib[key].ravel(),
        }))
    return pd.concat(frames, ignore_index=True)


def profiles_from_frame(df: pd.DataFrame, sset: ScenarioSet) -> ProfileLibrary:
    shape = (len(sset.scenarios), len(sset.years), sset.n_hours)
    s_pos = {s: i for i, s in enumerate(sset.scenarios)}
    y_pos = {y: i for i, y in enumerate(sset.years)}
    series = {}
    for key, g in df.groupby("key", sort=True):
        arr = np.full(shape, np.nan)
        arr[
            g["scenario"].astype(str).map(s_pos).to_numpy(),
            g["year"].astype(int).map(y_pos).to_numpy(),
            g["hour"].astype(int).to_numpy(),
        ] = g["value"].to_numpy(dtype=float)
        if np.isnan(arr).any():
            raise ValueError(f"profile {key}: incomplete (scenario, year, hour) coverage")
        series[str(key)] = arr
    return ProfileLibrary(series)
