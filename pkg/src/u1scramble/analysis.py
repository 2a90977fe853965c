"""Rates, scaling exponents and front velocities from measured curves."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize, stats

from .observables import CurveEstimate, Profile

__all__ = [
    "FitError",
    "InsufficientDataError",
    "WindowError",
    "NoFrontError",
    "FitResult",
    "fit_exponential_rate",
    "fit_powerlaw_exponent",
    "front_velocity",
    "bootstrap_ci",
]


class FitError(ValueError):
    pass


class InsufficientDataError(FitError):
    pass


class WindowError(FitError):
    pass


class NoFrontError(FitError):
    pass


@dataclass
class FitResult:
    value: float
    uncertainty: float
    window: tuple
    quality: float
    method: str
    n_points: int
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_points < 1:
            raise ValueError("fit window is empty")
        if not math.isfinite(self.uncertainty) or self.uncertainty < 0:
            raise ValueError(f"uncertainty must be finite and non-negative, got {self.uncertainty}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        return d

    def to_json(self, path=None, **kw) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default, **kw)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _line_fit(x, y, sigma=None):
    """Straight-line least squares; returns slope, intercept, slope error, R^2, chi2_red."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    w = np.ones_like(x) if sigma is None else 1.0 / np.asarray(sigma, float) ** 2
    sw = w.sum()
    xm = (w * x).sum() / sw
    ym = (w * y).sum() / sw
    sxx = (w * (x - xm) ** 2).sum()
    if sxx <= 0:
        raise InsufficientDataError("fit abscissae are degenerate")
    slope = (w * (x - xm) * (y - ym)).sum() / sxx
    intercept = ym - slope * xm
    resid = y - (intercept + slope * x)
    ssr = (w * resid ** 2).sum()
    sst = (w * (y - ym) ** 2).sum()
    dof = x.size - 2
    chi2_red = ssr / dof if dof > 0 else 0.0
    if sigma is None:
        slope_err = math.sqrt(chi2_red / sxx) if dof > 0 else 0.0
    else:
        # scaled by the reduced chi^2 when the scatter exceeds the quoted errors
        slope_err = math.sqrt(max(chi2_red, 1.0) / sxx)
    quality = 1.0 - ssr / sst if sst > 0 else 1.0
    return slope, intercept, slope_err, float(min(max(quality, 0.0), 1.0)), chi2_red


def _auto_window(t, r, se, mode, saturation):
    positive = se > 0
    if mode == "growth":
        sat = float(saturation) if saturation is not None else float(np.max(r))
        hi = 0.05 * sat
        pre = positive & (r <= hi)
        noise = float(np.median(se[pre])) if pre.any() else 0.0
        lo = 10.0 * noise
        ok = (r > 0) & (r >= lo) & (r <= hi)
        # first contiguous run after the curve clears the noise floor
        idx = np.flatnonzero(ok)
        if idx.size == 0:
            raise InsufficientDataError("no points between the noise floor and 5% of saturation")
        start = idx[0]
        stop = start
        while stop + 1 < t.size and ok[stop + 1]:
            stop += 1
        return start, stop, {"lower": lo, "upper": hi, "saturation": sat, "median_stderr": noise}
    noise = float(np.median(se[positive])) if positive.any() else 0.0
    lo = 10.0 * noise
    ok = (r > 0) & (r >= lo)
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        raise InsufficientDataError("decay residual never exceeds the noise floor")
    start = idx[0]
    stop = start
    while stop + 1 < t.size and ok[stop + 1]:
        stop += 1
    return start, stop, {"lower": lo, "median_stderr": noise}


def fit_exponential_rate(curve: CurveEstimate, baseline: float = 0.0, *, mode: str = "auto",
                         window: tuple | None = None, saturation: float | None = None) -> FitResult:
    """Exponential rate of ``curve.values - baseline``.

    ``mode="growth"`` returns the growth rate (slope of the log residual) and
    ``"decay"`` its magnitude.  Without an explicit ``window=(t_lo, t_hi)`` the
    growth window keeps residuals between ten times the median standard error
    of the pre-saturation points and 5% of ``saturation`` (default: the curve
    maximum); the decay window keeps residuals above ten times the median
    standard error.  Fits are weighted by ``1/sigma_log^2`` with
    ``sigma_log = stderr / residual``.
    """
    t = np.asarray(curve.times, float)
    r = np.asarray(curve.values, float) - baseline
    se = np.asarray(curve.stderr, float)
    if t.size < 4:
        raise InsufficientDataError(f"need at least 4 points, curve has {t.size}")
    if mode == "auto":
        mode = "decay" if r[-1] < r[0] else "growth"
    if mode not in ("growth", "decay"):
        raise ValueError("mode must be 'growth', 'decay' or 'auto'")
    info: dict = {}
    if window is None:
        a, b, info = _auto_window(t, r, se, mode, saturation)
        sel = np.arange(a, b + 1)
    else:
        t_lo, t_hi = window
        sel = np.flatnonzero((t >= t_lo) & (t <= t_hi))
        if sel.size and np.any(r[sel] <= 0):
            bad = t[sel][r[sel] <= 0]
            raise WindowError(f"non-positive residual inside window at t={bad.tolist()}")
    if sel.size < 4:
        raise InsufficientDataError(f"fit window has {sel.size} usable points, need 4")
    x, y, s = t[sel], r[sel], se[sel]
    sigma = None
    if np.any(s > 0):
        floor = float(np.min(s[s > 0]))
        sigma = np.maximum(s, floor) / y
    slope, intercept, err, quality, chi2 = _line_fit(x, np.log(y), sigma)
    value = slope if mode == "growth" else -slope
    extra = {"mode": mode, "baseline": baseline, "log_intercept": intercept,
             "chi2_red": chi2, "weighted": sigma is not None}
    extra.update(info)
    return FitResult(float(value), float(err), (float(x[0]), float(x[-1])), quality,
                     f"exponential-{mode}", int(sel.size), extra)


def fit_powerlaw_exponent(points) -> FitResult:
    """Log-log slope of ``(x, y)`` or ``(x, y, y_err)`` points (``y ~ x^alpha``)."""
    pts = [tuple(p) for p in points]
    if len(pts) < 3:
        raise InsufficientDataError(f"need at least 3 points, got {len(pts)}")
    arr = np.array([p[:2] for p in pts], float)
    x, y = arr[:, 0], arr[:, 1]
    if np.any(~np.isfinite(arr)) or np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs finite, positive abscissae and ordinates")
    sigma = None
    if all(len(p) >= 3 for p in pts):
        yerr = np.array([p[2] for p in pts], float)
        if np.all(yerr > 0):
            sigma = yerr / y
    slope, intercept, err, quality, chi2 = _line_fit(np.log(x), np.log(y), sigma)
    return FitResult(float(slope), float(err), (float(x.min()), float(x.max())), quality,
                     "powerlaw", len(pts),
                     {"log_prefactor": intercept, "chi2_red": chi2, "weighted": sigma is not None,
                      "points": arr.tolist()})


def _select_slices(profile: Profile, t_min, t_max):
    t = profile.times
    keep = t > 0
    if t_min is not None:
        keep &= t >= t_min
    if t_max is not None:
        keep &= t <= t_max
    return np.flatnonzero(keep)


def _front_positions(profile: Profile, rows, theta, reference):
    r = profile.distances.astype(float)
    gmax = float(np.max(profile.values[rows])) if rows.size else 0.0
    ts, pos = [], []
    for a in rows:
        c = profile.values[a]
        mx = float(c.max()) if reference == "slice" else gmax
        if mx <= 0:
            continue
        thr = theta * mx
        above = np.flatnonzero(c >= thr)
        if above.size == 0:
            continue
        b = above[-1]
        if b + 1 >= c.size:
            # front has reached the edge of the grid
            break
        frac = (c[b] - thr) / (c[b] - c[b + 1])
        ts.append(float(profile.times[a]))
        pos.append(r[b] + frac * (r[b + 1] - r[b]))
    return np.array(ts), np.array(pos)


def _threshold_fit(profile, rows, theta, reference):
    ts, pos = _front_positions(profile, rows, theta, reference)
    if ts.size < 4:
        raise InsufficientDataError(f"front detected in {ts.size} time slices, need 4")
    slope, intercept, err, quality, _ = _line_fit(ts, pos)
    return slope, intercept, err, quality, ts, pos


def _collapse_objective(profile, rows, v):
    r = profile.distances.astype(float)
    t = profile.times[rows].astype(float)
    lo = np.max(r[0] - v * t)
    hi = np.min(r[-1] - v * t)
    if hi - lo < 2.0:
        return np.inf
    x = np.linspace(lo, hi, 64)
    curves = np.array([np.interp(x, r - v * tt, profile.values[a]) for a, tt in zip(rows, t)])
    return float(np.mean(np.var(curves, axis=0)))


def _collapse_fit(profile, rows, v_bounds, n_grid=120):
    lo, hi = v_bounds
    grid = np.linspace(lo, hi, n_grid)
    vals = np.array([_collapse_objective(profile, rows, v) for v in grid])
    if not np.isfinite(vals).any():
        raise InsufficientDataError("time slices do not overlap for any trial velocity")
    b = int(np.nanargmin(np.where(np.isfinite(vals), vals, np.nan)))
    a0, c0 = grid[max(b - 1, 0)], grid[min(b + 1, n_grid - 1)]
    if a0 == grid[b] or c0 == grid[b]:
        return float(grid[b]), float(vals[b])
    res = optimize.minimize_scalar(
        lambda v: _collapse_objective(profile, rows, v),
        bracket=(a0, grid[b], c0), method="golden",
        options={"xtol": 1e-6},
    )
    if res.fun <= vals[b]:
        return float(res.x), float(res.fun)
    return float(grid[b]), float(vals[b])


def front_velocity(profile: Profile, method: str = "threshold", *, theta: float = 0.5,
                   t_min: float | None = None, t_max: float | None = None,
                   reference: str = "slice", v_bounds: tuple | None = None,
                   max_slices: int = 12) -> FitResult:
    """Butterfly velocity from a chain OTOC profile.

    ``threshold``: front ``r*(t)`` is the largest distance where the linearly
    interpolated profile crosses ``theta`` times the maximum (of each slice
    for ``reference="slice"``, of all slices for ``"global"``); ``v`` is the
    slope of ``r*`` against ``t``.  Results for ``theta = 0.3, 0.7`` are
    attached in ``extra``.

    ``collapse``: ``v`` minimizes the variance across slices of ``C`` plotted
    against ``r - v t`` (grid scan, then golden-section refinement); the
    uncertainty is a leave-one-slice-out jackknife.
    """
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    if reference not in ("slice", "global"):
        raise ValueError("reference must be 'slice' or 'global'")
    rows = _select_slices(profile, t_min, t_max)
    if rows.size == 0 or not np.any(profile.values[rows] > 0):
        raise NoFrontError("profile is identically zero; no front to track")
    if method == "threshold":
        slope, intercept, err, quality, ts, pos = _threshold_fit(profile, rows, theta, reference)
        sens = {}
        for th in (0.3, 0.7):
            try:
                sens[str(th)] = _threshold_fit(profile, rows, th, reference)[0]
            except FitError:
                sens[str(th)] = None
        return FitResult(float(slope), float(err), (float(ts[0]), float(ts[-1])), quality,
                         "threshold-front", int(ts.size),
                         {"theta": theta, "reference": reference, "intercept": intercept,
                          "theta_sensitivity": sens, "front_t": ts.tolist(), "front_r": pos.tolist()})
    if method != "collapse":
        raise ValueError("method must be 'threshold' or 'collapse'")
    ts, _ = _front_positions(profile, rows, theta, reference)
    t_set = set(ts.tolist())
    rows = np.array([a for a in rows if float(profile.times[a]) in t_set])
    if rows.size < 4:
        raise InsufficientDataError(f"front detected in {rows.size} time slices, need 4")
    if rows.size > max_slices:
        rows = rows[np.unique(np.linspace(0, rows.size - 1, max_slices).round().astype(int))]
    if v_bounds is None:
        span = float(profile.distances[-1] - profile.distances[0])
        v_bounds = (0.0, span / float(profile.times[rows[-1]]))
    v, obj = _collapse_fit(profile, rows, v_bounds)
    jack = []
    for drop in range(rows.size):
        sub = np.delete(rows, drop)
        jack.append(_collapse_fit(profile, sub, v_bounds)[0])
    jack = np.array(jack)
    m = rows.size
    err = math.sqrt((m - 1) / m * float(np.sum((jack - jack.mean()) ** 2)))
    spread = float(np.mean(np.var(profile.values[rows], axis=0)))
    quality = 1.0 - obj / spread if spread > 0 else 0.0
    times = profile.times[rows]
    return FitResult(float(v), err, (float(times[0]), float(times[-1])),
                     float(min(max(quality, 0.0), 1.0)), "collapse", int(rows.size),
                     {"objective": obj, "v_bounds": list(v_bounds), "slices": times.tolist(),
                      "jackknife": jack.tolist()})


def bootstrap_ci(samples, statistic=np.mean, n_resamples: int = 1000, level: float = 0.68,
                 seed: int | None = 0) -> tuple:
    """Percentile bootstrap interval ``(low, high)`` of ``statistic``."""
    data = np.asarray(samples, dtype=float)
    if data.size == 0:
        raise ValueError("bootstrap needs at least one sample")
    if n_resamples < 100:
        raise ValueError("n_resamples must be at least 100")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    if np.all(data == data.flat[0]):
        v = float(statistic(data))
        return v, v
    res = stats.bootstrap(
        (data,), statistic, n_resamples=n_resamples, confidence_level=level,
        method="percentile", vectorized=False, rng=np.random.default_rng(seed),
    )
    return float(res.confidence_interval.low), float(res.confidence_interval.high)
