"""Monte Carlo estimators for OTOCs and autocorrelators in fixed-charge sectors.

Conventions: ``z(1) = +1`` and ``z(0) = -1``.  An OTOC sample for sites
``(i, j)`` is ``(z_j(s(t)) - z_j(s*(t)))**2``, with ``s* = X_i s`` evolved under
the same circuit realization as ``s``; it is 4 when bit ``j`` differs between
the two branches and 0 otherwise.

Trajectory ``m`` of an estimator seeded by stream ``rng`` uses
``rng.child("traj", m, "state")`` for the initial state and sites and
``rng.child("traj", m, "circuit")`` for its circuit realization.  All
reductions go through integer accumulators, so results do not depend on how
trajectories are split across workers.
"""
from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .circuit import AllToAll, Chain, CircuitRealization, build_schedule, evolve
from .lattice import BitState, ChargeSector, RngStream, as_stream, flip_bit, sample_sector_state

__all__ = [
    "CurveEstimate",
    "Profile",
    "otoc_sample",
    "otoc_curve",
    "autocorr_curve",
    "otoc_profile",
]

_CURVE_HEADER = ["t", "value", "stderr", "n_samples"]
_PROFILE_HEADER = ["t", "r", "value", "stderr"]


@dataclass
class CurveEstimate:
    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    n_samples: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)
        if not (self.times.shape == self.values.shape == self.stderr.shape):
            raise ValueError("times, values and stderr must have the same length")
        if np.any(self.stderr < 0):
            raise ValueError("stderr must be non-negative")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(_CURVE_HEADER)
            for t, v, e in zip(self.times, self.values, self.stderr):
                writer.writerow([int(t), repr(float(v)), repr(float(e)), self.n_samples])

    @classmethod
    def from_csv(cls, path, metadata: dict | None = None) -> "CurveEstimate":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != _CURVE_HEADER:
                raise ValueError(f"{path}: expected header {_CURVE_HEADER}, got {header}")
            rows = [row for row in reader if row]
        if not rows:
            raise ValueError(f"{path}: no data rows")
        times = [int(r[0]) for r in rows]
        values = [float(r[1]) for r in rows]
        stderr = [float(r[2]) for r in rows]
        return cls(times, values, stderr, int(rows[0][3]), dict(metadata or {}))


@dataclass
class Profile:
    """Spatial OTOC ``C(r, t)``; ``values[t_index, r_index]``."""

    distances: np.ndarray
    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    n_samples: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.distances = np.asarray(self.distances, dtype=np.int64)
        self.times = np.asarray(self.times, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)
        shape = (self.times.size, self.distances.size)
        if self.values.shape != shape or self.stderr.shape != shape:
            raise ValueError(f"values and stderr must have shape {shape}")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(_PROFILE_HEADER)
            for a, t in enumerate(self.times):
                for b, r in enumerate(self.distances):
                    writer.writerow(
                        [int(t), int(r), repr(float(self.values[a, b])), repr(float(self.stderr[a, b]))]
                    )

    @classmethod
    def from_csv(cls, path, metadata: dict | None = None) -> "Profile":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != _PROFILE_HEADER:
                raise ValueError(f"{path}: expected header {_PROFILE_HEADER}, got {header}")
            rows = [row for row in reader if row]
        ts = sorted({int(r[0]) for r in rows})
        rs = sorted({int(r[1]) for r in rows})
        t_index = {t: a for a, t in enumerate(ts)}
        r_index = {r: b for b, r in enumerate(rs)}
        values = np.full((len(ts), len(rs)), np.nan)
        stderr = np.full((len(ts), len(rs)), np.nan)
        for row in rows:
            a, b = t_index[int(row[0])], r_index[int(row[1])]
            values[a, b] = float(row[2])
            stderr[a, b] = float(row[3])
        if np.isnan(values).any():
            raise ValueError(f"{path}: profile grid is incomplete")
        return cls(rs, ts, values, stderr, 0, dict(metadata or {}))


def otoc_sample(sector: ChargeSector, i: int, j: int, circuit: CircuitRealization, t: int, rng,
                direction: str = "forward") -> int:
    """Single OTOC sample: 4 if bit ``j`` differs after evolving ``s`` and ``X_i s``."""
    n = sector.n_sites
    if circuit.n_sites != n:
        raise ValueError("circuit and sector have different sizes")
    for x in (i, j):
        if not 0 <= x < n:
            raise IndexError(f"site {x} out of range for {n} sites")
    s = sample_sector_state(sector, rng)
    s_star = flip_bit(s, i)
    a = evolve(s, circuit, t, direction)
    b = evolve(s_star, circuit, t, direction)
    return 4 if a[j] != b[j] else 0


def _geometry_for(sector: ChargeSector, geometry) -> AllToAll | Chain:
    if geometry is None or geometry == "all-to-all":
        geometry = AllToAll(sector.n_sites)
    elif geometry == "chain":
        geometry = Chain(sector.n_sites)
    if geometry.n_sites != sector.n_sites:
        raise ValueError("geometry and sector have different numbers of sites")
    return geometry


def _chunks(n_samples: int, workers: int):
    workers = max(1, min(int(workers), n_samples))
    bounds = np.linspace(0, n_samples, workers + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _map_chunks(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _trajectory_start(stream: RngStream, m: int, n: int, n_up: int):
    gen = stream.child("traj", m, "state").generator()
    s = np.empty(n, np.uint8)
    _kernels.sample_sector(gen, n, n_up, s)
    i = int(gen.integers(n))
    j = (i + 1 + int(gen.integers(n - 1))) % n if n > 1 else i
    return s, i, j


def _curve_chunk(job):
    code, periodic_geom, n, n_up, k, f, t_max, seed, key, start, stop, pair = job
    stream = RngStream(seed, key)
    geometry = AllToAll(n) if code == _kernels.ALL_TO_ALL else Chain(n, periodic_geom)
    sums = {name: np.zeros(t_max + 1, np.int64) for name in
            ("excl", "excl2", "tot", "tot2", "j", "auto", "auto2")}
    d_excl = np.empty(t_max + 1, np.int64)
    d_diag = np.empty(t_max + 1, np.int64)
    d_j = np.empty(t_max + 1, np.int64)
    auto = np.empty(t_max + 1, np.int64)
    for m in range(start, stop):
        s, i, j = _trajectory_start(stream, m, n, n_up)
        circ = CircuitRealization(geometry, k, f, stream.child("traj", m, "circuit"), t_max)
        _kernels.pair_trajectory(
            geometry.code, circ.generator_at(0), s, i, j, n, k, f, t_max,
            circ.draws_per_step, circ.slots_per_step, pair, d_excl, d_diag, d_j, auto,
        )
        tot = d_excl + d_diag
        sums["excl"] += d_excl
        sums["excl2"] += d_excl * d_excl
        sums["tot"] += tot
        sums["tot2"] += tot * tot
        sums["j"] += d_j
        sums["auto"] += auto
        sums["auto2"] += auto * auto
    return sums


def _run_curve(sector, geometry, k, f, t_max, n_samples, rng, pair, workers):
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if t_max < 0:
        raise ValueError("t_max must be non-negative")
    geometry = _geometry_for(sector, geometry)
    build_schedule(geometry, k, f, t_max, 0)  # validates geometry / k / f
    stream = as_stream(rng)
    periodic = getattr(geometry, "periodic", True)
    jobs = [
        (geometry.code, periodic, sector.n_sites, sector.n_up, k, float(f), t_max,
         stream.seed, stream.key, a, b, pair)
        for a, b in _chunks(n_samples, workers)
    ]
    parts = _map_chunks(_curve_chunk, jobs, workers)
    total = {name: sum(p[name] for p in parts) for name in parts[0]}
    return geometry, total


def _mean_stderr(s1, s2, n, scale):
    mean = s1 / n
    if n > 1:
        var = np.maximum(s2 - s1 * s1 / n, 0) / (n - 1)
    else:
        var = np.zeros_like(mean, dtype=float)
    return scale * mean, scale * np.sqrt(var / n)


def _base_metadata(sector, geometry, k, f, rng, n_samples):
    stream = as_stream(rng)
    return {
        "n_sites": sector.n_sites,
        "n_up": sector.n_up,
        "convention": sector.convention,
        "density": sector.density,
        "geometry": "all-to-all" if isinstance(geometry, AllToAll) else "chain",
        "periodic": getattr(geometry, "periodic", None),
        "k": k,
        "f": f,
        "seed": stream.seed,
        "stream_key": list(stream.key),
        "n_samples": n_samples,
    }


def otoc_curve(sector: ChargeSector, geometry, k: int, f: float, t_max: int, n_samples: int, rng,
               *, pair_policy: str = "all", include_diagonal: bool = False,
               direction: str = "forward", workers: int = 1) -> CurveEstimate:
    """Site-averaged OTOC ``C_XZ(t)`` for ``t = 0..t_max``.

    Each sample is one trajectory: a fresh sector state, a uniformly random
    flipped site ``i`` and a fresh circuit realization.  With
    ``pair_policy="all"`` the sample averages the OTOC over every ``j != i``
    (``j = i`` too when ``include_diagonal``); ``"random"`` uses a single
    uniformly random ``j != i``.
    """
    if pair_policy not in ("all", "random"):
        raise ValueError("pair_policy must be 'all' or 'random'")
    if direction == "reverse":
        return _otoc_curve_reverse(sector, geometry, k, f, t_max, n_samples, rng,
                                   pair_policy, include_diagonal)
    if direction != "forward":
        raise ValueError("direction must be 'forward' or 'reverse'")
    geometry, tot = _run_curve(sector, geometry, k, f, t_max, n_samples, rng, True, workers)
    n = sector.n_sites
    if pair_policy == "random":
        values, stderr = _mean_stderr(tot["j"], tot["j"], n_samples, 4.0)
    elif include_diagonal:
        values, stderr = _mean_stderr(tot["tot"], tot["tot2"], n_samples, 4.0 / n)
    else:
        values, stderr = _mean_stderr(tot["excl"], tot["excl2"], n_samples, 4.0 / max(n - 1, 1))
    meta = _base_metadata(sector, geometry, k, f, rng, n_samples)
    meta.update(observable="otoc", pair_policy=pair_policy,
                include_diagonal=include_diagonal, direction=direction)
    return CurveEstimate(np.arange(t_max + 1), values, stderr, n_samples, meta)


def _otoc_curve_reverse(sector, geometry, k, f, t_max, n_samples, rng, pair_policy, include_diagonal):
    # Re-evolves every prefix backwards: O(t_max^2) work, intended for small checks.
    geometry = _geometry_for(sector, geometry)
    stream = as_stream(rng)
    n = sector.n_sites
    samples = np.zeros((n_samples, t_max + 1))
    for m in range(n_samples):
        s, i, j = _trajectory_start(stream, m, n, sector.n_up)
        state = BitState(np.packbits(s), n)
        star = flip_bit(state, i)
        circ = CircuitRealization(geometry, k, f, stream.child("traj", m, "circuit"), t_max)
        for t in range(t_max + 1):
            a = evolve(state, circ, t, "reverse").bits
            b = evolve(star, circ, t, "reverse").bits
            diff = a != b
            if pair_policy == "random":
                samples[m, t] = 4.0 * diff[j]
            elif include_diagonal:
                samples[m, t] = 4.0 * diff.sum() / n
            else:
                samples[m, t] = 4.0 * (diff.sum() - diff[i]) / max(n - 1, 1)
    stderr = samples.std(axis=0, ddof=1) / np.sqrt(n_samples) if n_samples > 1 else np.zeros(t_max + 1)
    meta = _base_metadata(sector, geometry, k, f, rng, n_samples)
    meta.update(observable="otoc", pair_policy=pair_policy,
                include_diagonal=include_diagonal, direction="reverse")
    return CurveEstimate(np.arange(t_max + 1), samples.mean(axis=0), stderr, n_samples, meta)


def autocorr_curve(sector: ChargeSector, geometry, k: int, f: float, t_max: int, n_samples: int, rng,
                   *, workers: int = 1) -> CurveEstimate:
    """Autocorrelator ``C_Z(t)``: ``z_i(0) z_i(t)`` averaged over all sites and samples."""
    geometry, tot = _run_curve(sector, geometry, k, f, t_max, n_samples, rng, False, workers)
    values, stderr = _mean_stderr(tot["auto"], tot["auto2"], n_samples, 1.0 / sector.n_sites)
    meta = _base_metadata(sector, geometry, k, f, rng, n_samples)
    meta.update(observable="autocorr", saturation=(1.0 - 2.0 * sector.up_fraction) ** 2)
    return CurveEstimate(np.arange(t_max + 1), values, stderr, n_samples, meta)


_SIDES = {"both": 0, "right": 1, "left": 2}


def _profile_chunk(job):
    code, n, n_up, k, f, t_max, seed, key, start, stop, i0, n_r, side = job
    stream = RngStream(seed, key)
    geometry = Chain(n, code == _kernels.CHAIN)
    acc1 = np.zeros((t_max + 1, n_r), np.int64)
    acc2 = np.zeros((t_max + 1, n_r), np.int64)
    s = np.empty(n, np.uint8)
    for m in range(start, stop):
        gen = stream.child("traj", m, "state").generator()
        _kernels.sample_sector(gen, n, n_up, s)
        circ = CircuitRealization(geometry, k, f, stream.child("traj", m, "circuit"), t_max)
        _kernels.pair_profile(
            code, circ.generator_at(0), s, i0, n, k, f, t_max,
            circ.draws_per_step, circ.slots_per_step, side, acc1, acc2,
        )
    return acc1, acc2


def otoc_profile(sector: ChargeSector, k: int, f: float, t_max: int, n_samples: int, rng,
                 *, i0: int = 0, periodic: bool = True, r_max: int | None = None,
                 side: str = "both", workers: int = 1) -> Profile:
    """Chain OTOC ``C(r, t)`` with source ``i0`` and probe at distance ``r``.

    ``side="both"`` averages the probes at ``i0 + r`` and ``i0 - r``
    (periodic distance); ``"right"`` / ``"left"`` keep a single direction.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if side not in _SIDES:
        raise ValueError(f"side must be one of {sorted(_SIDES)}")
    n = sector.n_sites
    if not 0 <= i0 < n:
        raise IndexError(f"source site {i0} out of range")
    geometry = Chain(n, periodic)
    build_schedule(geometry, k, f, t_max, 0)
    if r_max is None:
        r_max = n // 2
    r_max = min(int(r_max), n - 1)
    stream = as_stream(rng)
    jobs = [
        (geometry.code, n, sector.n_up, k, float(f), t_max, stream.seed, stream.key,
         a, b, i0, r_max + 1, _SIDES[side])
        for a, b in _chunks(n_samples, workers)
    ]
    parts = _map_chunks(_profile_chunk, jobs, workers)
    acc1 = sum(p[0] for p in parts)
    acc2 = sum(p[1] for p in parts)
    values, stderr = _mean_stderr(acc1, acc2, n_samples, 2.0)
    meta = _base_metadata(sector, geometry, k, f, rng, n_samples)
    meta.update(observable="otoc-profile", i0=i0, side=side)
    return Profile(np.arange(r_max + 1), np.arange(t_max + 1), values, stderr, n_samples, meta)
