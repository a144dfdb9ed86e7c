"""Post-processing: thermalization times, plateau fits, rate extraction.

Crossing times interpolate linearly in log-time between stroboscopic
samples (the schedules are log-spaced).  Runs that never cross are
reported as censored fit results, not numbers, so that downstream
frequency fits can refuse to ingest them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .observables import page_value
from .timeseries import TimeSeries

_CENSOR_E0 = 1e-12


@dataclass
class FitResult:
    """A scalar estimate with a 2-sigma style uncertainty band."""

    value: float | None
    uncertainty: float = 0.0
    window: tuple[float, float] | None = None
    n_points: int = 0
    residual: float = 0.0
    censored: bool = False
    reason: str = ""
    method: str = ""

    def require(self) -> float:
        if self.censored or self.value is None:
            raise ValueError(f"censored fit result: {self.reason}")
        return self.value

    def to_record(self, quantity: str, inputs_hash: str = "") -> dict:
        return {
            "quantity": quantity,
            "value": self.value,
            "uncertainty_2sigma": self.uncertainty,
            "window": list(self.window) if self.window else None,
            "method": self.method,
            "censored": self.censored,
            "reason": self.reason,
            "n_points": self.n_points,
            "inputs_hash": inputs_hash,
        }


def _first_crossing(times, vals, level, rising):
    """First crossing time of `level`, log-time interpolated; None if absent."""
    sign = 1.0 if rising else -1.0
    hit = sign * (np.asarray(vals) - level) >= 0.0
    idx = np.flatnonzero(hit)
    if idx.size == 0:
        return None
    i = int(idx[0])
    if i == 0 or vals[i] == level:
        return float(times[i])
    t0, t1 = times[i - 1], times[i]
    f = (level - vals[i - 1]) / (vals[i] - vals[i - 1])
    if t0 > 0.0:
        return float(math.exp(math.log(t0) + f * (math.log(t1) - math.log(t0))))
    return float(t0 + f * (t1 - t0))


def _banded_crossing(times, vals, levels, rising, method):
    """FitResult from a (mid, early, late) triple of crossing levels."""
    mid, early, late = levels
    tau = _first_crossing(times, vals, mid, rising)
    if tau is None:
        return FitResult(None, censored=True, method=method,
                         reason="no halfway crossing within the sampled window")
    t_early = _first_crossing(times, vals, early, rising)
    t_late = _first_crossing(times, vals, late, rising)
    reason = ""
    devs = []
    if t_early is not None:
        devs.append(abs(tau - t_early))
    if t_late is not None:
        devs.append(abs(t_late - tau))
    else:
        reason = "upper band beyond series end"
    return FitResult(tau, uncertainty=max(devs) if devs else 0.0,
                     window=(t_early if t_early is not None else tau,
                             t_late if t_late is not None else tau),
                     n_points=len(times), censored=False, reason=reason,
                     method=method)


def tau_star_entropy(series: TimeSeries, S_P: float, L: int) -> FitResult:
    """Time at which S_{L/2} is halfway from its plateau to the Page value.

    The uncertainty band comes from the 0.35 and 0.65 fractional
    crossings; the error is the larger deviation from the halfway time.
    """
    S_inf = page_value(L)
    delta = S_inf - S_P
    levels = tuple(S_P + f * delta for f in (0.5, 0.35, 0.65))
    return _banded_crossing(series.times, series.column("entropy"), levels,
                            rising=True, method="entropy-halfway")


def tau_star_energy(series: TimeSeries, n: int) -> FitResult:
    """Time at which |<Dn>|/L falls to half its initial magnitude.

    Magnitude-based, so initial states on either side of the spectrum
    (energy rising toward zero or falling toward zero) are treated the
    same.  An initial value at the infinite-temperature point is
    censored rather than fitted.
    """
    y = np.abs(series.column(f"energy_n{n}"))
    e0 = y[0]
    if e0 < _CENSOR_E0:
        return FitResult(None, censored=True, method="energy-halfway",
                         reason="initial energy density is at the "
                                "infinite-temperature value")
    levels = (0.5 * e0, 0.65 * e0, 0.35 * e0)
    return _banded_crossing(series.times, y, levels, rising=False,
                            method="energy-halfway")


def tau_deff_onset(series: TimeSeries, S_P: float, tol: float,
                   dwell: int = 3) -> float:
    """First time the entropy enters and stays within tol*S_P of S_P."""
    S = series.column("entropy")
    near = np.abs(S - S_P) <= tol * abs(S_P)
    n = len(S)
    if dwell < 1:
        raise ValueError("dwell must be >= 1")
    for i in range(n - dwell + 1):
        if near[i:i + dwell].all():
            return float(series.times[i])
    raise ValueError("no plateau detected: entropy never dwells near S_P")


def delta_series(series_full: TimeSeries, series_deff: TimeSeries,
                 observable: str) -> TimeSeries:
    """Pointwise |difference| of one observable between two evolutions."""
    if not np.array_equal(series_full.periods, series_deff.periods):
        raise ValueError("schedule mismatch between the two series")
    if not np.allclose(series_full.times, series_deff.times, rtol=1e-12, atol=0):
        raise ValueError("time axis mismatch between the two series")
    a = series_full.metadata.get("initial_state")
    b = series_deff.metadata.get("initial_state")
    if a is not None and b is not None and a != b:
        raise ValueError("initial-state mismatch between the two series")
    dv = np.abs(series_full.column(observable) - series_deff.column(observable))
    return TimeSeries([observable], series_full.periods, series_full.times,
                      dv.reshape(-1, 1), {"delta_of": observable})


def _resolve_column(series: TimeSeries, column):
    if column is not None:
        return column
    if len(series.column_names) == 1:
        return series.column_names[0]
    raise ValueError("ambiguous series; pass column=")


def _window_index(series, window):
    t_lo, t_hi = window
    return np.flatnonzero((series.times >= t_lo) & (series.times <= t_hi))


def slope_six_subregions(series: TimeSeries, window, column=None) -> FitResult:
    """Mean linear slope over six equal sample blocks inside the window.

    The samples in the window split into six contiguous equal-count
    blocks; each gets its own least-squares line.  The value is the
    mean of the six slopes, the uncertainty twice their standard
    deviation.
    """
    col = _resolve_column(series, column)
    idx = _window_index(series, window)
    if idx.size < 12:
        raise ValueError(f"window holds {idx.size} samples; need >= 12")
    slopes = []
    resid = 0.0
    for chunk in np.array_split(idx, 6):
        t = series.times[chunk]
        y = series.column(col)[chunk]
        coef = np.polyfit(t, y, 1)
        slopes.append(coef[0])
        resid += float(np.sum((np.polyval(coef, t) - y) ** 2))
    slopes = np.asarray(slopes)
    return FitResult(float(slopes.mean()), uncertainty=2.0 * float(slopes.std()),
                     window=tuple(window), n_points=int(idx.size),
                     residual=math.sqrt(resid), method="six-subregion-slope")


def plateau_height(series: TimeSeries, window, column=None) -> FitResult:
    """Mean value in the window with a 2-sigma spread."""
    col = _resolve_column(series, column)
    idx = _window_index(series, window)
    if idx.size == 0:
        raise ValueError("empty plateau window")
    y = series.column(col)[idx]
    return FitResult(float(y.mean()), uncertainty=2.0 * float(y.std()),
                     window=tuple(window), n_points=int(idx.size),
                     method="plateau-mean")


# -- frequency-dependence fits ------------------------------------------------


@dataclass
class ExponentialFit:
    """Result of fitting values ~ exp(+-omega / J_eff)."""

    j_eff: float
    j_eff_uncertainty: float
    prefactor: float
    r_squared: float
    slope: float
    n_points: int
    weighted: bool
    flag: str = ""


@dataclass
class PowerLawFit:
    exponent: float
    r_squared: float
    n_points: int
    flag: str = ""


def _as_value_unc(item):
    if isinstance(item, FitResult):
        if item.censored:
            return None
        return item.value, item.uncertainty
    return float(item), 0.0


def _linear_fit(x, y, w=None):
    """Weighted straight-line fit; returns slope, intercept, var(slope), r2, ssr."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if w is None:
        w = np.ones(n)
    W = np.sum(w)
    xb = np.sum(w * x) / W
    yb = np.sum(w * y) / W
    sxx = np.sum(w * (x - xb) ** 2)
    if sxx == 0:
        raise ValueError("degenerate fit: all abscissae equal")
    slope = np.sum(w * (x - xb) * (y - yb)) / sxx
    intercept = yb - slope * xb
    resid = y - (intercept + slope * x)
    ssr = float(np.sum(w * resid ** 2))
    sst = float(np.sum(w * (y - yb) ** 2))
    r2 = 1.0 if sst == 0 else 1.0 - ssr / sst
    if np.all(w == 1.0):
        dof = max(n - 2, 1)
        var_slope = (ssr / dof) / sxx
    else:
        var_slope = 1.0 / sxx
    return float(slope), float(intercept), float(var_slope), float(r2), ssr


def _collect(omegas, items, require_positive=False, what="value"):
    xs, ys, uncs = [], [], []
    for omega, item in zip(omegas, items):
        vu = _as_value_unc(item)
        if vu is None:
            continue
        val, unc = vu
        if require_positive and val <= 0:
            raise ValueError(f"non-positive {what} at omega={omega}")
        xs.append(float(omega))
        ys.append(val)
        uncs.append(unc)
    return np.asarray(xs), np.asarray(ys), np.asarray(uncs)


def fit_exponential_tau(omegas, taus, weighted: bool = True) -> ExponentialFit:
    """Fit tau* ~ prefactor * exp(omega / J_eff) by weighted log-linear LSQ.

    Censored entries are dropped; at least 3 uncensored points are
    required.  Weights come from the propagated tau* uncertainties when
    they are all positive, otherwise the fit is unweighted.
    """
    x, tau, unc = _collect(omegas, taus, require_positive=True, what="tau*")
    if x.size < 3:
        raise ValueError(f"need >= 3 uncensored points, have {x.size}")
    y = np.log(tau)
    w = None
    use_w = weighted and np.all(unc > 0)
    if use_w:
        sigma_y = unc / tau
        w = 1.0 / sigma_y ** 2
    slope, intercept, var_slope, r2, _ = _linear_fit(x, y, w)
    flag = ""
    if slope <= 0:
        return ExponentialFit(math.inf, math.inf, math.exp(intercept), r2, slope,
                              int(x.size), bool(use_w),
                              flag="non-positive slope: no exponential regime")
    j = 1.0 / slope
    j_unc = math.sqrt(var_slope) / slope ** 2
    return ExponentialFit(j, j_unc, math.exp(intercept), r2, slope,
                          int(x.size), bool(use_w), flag)


def slope_from_delta_jeff(omegas, slopes, weighted: bool = True) -> ExponentialFit:
    """J_eff from late-time error-growth slopes, m ~ exp(-omega / J_eff)."""
    x, m, unc = _collect(omegas, slopes, what="slope")
    if x.size < 3:
        raise ValueError(f"need >= 3 uncensored points, have {x.size}")
    if np.any(m <= 0):
        if np.any(m > 0):
            raise ValueError("mixed-sign slopes; no common exponential trend")
        raise ValueError("slopes must be positive growth rates")
    y = np.log(m)
    w = None
    use_w = weighted and np.all(unc > 0)
    if use_w:
        w = 1.0 / (unc / m) ** 2
    slope, intercept, var_slope, r2, _ = _linear_fit(x, y, w)
    if slope >= 0:
        return ExponentialFit(math.inf, math.inf, math.exp(intercept), r2, slope,
                              int(x.size), bool(use_w),
                              flag="non-negative trend: no exponential suppression")
    j = -1.0 / slope
    j_unc = math.sqrt(var_slope) / slope ** 2
    return ExponentialFit(j, j_unc, math.exp(intercept), r2, slope,
                          int(x.size), bool(use_w))


def fit_powerlaw_plateau(omegas, heights, weighted: bool = True) -> PowerLawFit:
    """Exponent gamma of h_p ~ omega^(-gamma) from log-log least squares."""
    x, h, unc = _collect(omegas, heights, what="plateau height")
    if x.size < 3:
        raise ValueError(f"need >= 3 points, have {x.size}")
    if np.any(h <= 0):
        raise ValueError("plateau heights must be positive")
    w = None
    if weighted and np.all(unc > 0):
        w = 1.0 / (unc / h) ** 2
    slope, _, _, r2, _ = _linear_fit(np.log(x), np.log(h), w)
    gamma = -slope
    flag = "" if gamma >= 0 else "negative exponent: heights increase with frequency"
    return PowerLawFit(float(gamma), r2, int(x.size), flag)
