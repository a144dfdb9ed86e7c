"""Small-size exact diagonalization and the plateau-entropy estimate.

The truncated generator is materialized column-by-column through its
matrix-free map (dense ceiling L=12), diagonalized once, and reused for
every inverse temperature.  The (energy density, entropy density) curve
feeds a natural cubic interpolant; the plateau estimate rescales the
target energy density into the interpolant domain and subtracts the 0.5
pure-state correction.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dense import map_to_dense
from .timeseries import TimeSeries

_ED_L_MAX = 12
_EIG_CUTOFF = 1e-14


@dataclass
class Spectrum:
    """Full Hermitian eigendecomposition of a materialized map."""

    evals: np.ndarray
    evecs: np.ndarray
    L: int

    def max_energy_density(self, sign: int = +1) -> float:
        """Spectral edge per site; sign=+1 for the top of the spectrum."""
        return float(self.evals.max() / self.L if sign > 0 else self.evals.min() / self.L)


def ed_dense(H, L: int | None = None) -> Spectrum:
    """Dense eigendecomposition of a matrix-free Hermitian map.

    Refuses chains beyond L=12 (the 4096^2 dense ceiling).  The
    materialized matrix must be Hermitian to 1e-9 relative; it is
    symmetrized before diagonalization.
    """
    L = L if L is not None else H.L
    if L > _ED_L_MAX:
        raise ValueError(f"dense diagonalization capped at L={_ED_L_MAX}, got {L}")
    M = map_to_dense(H)
    scale = np.linalg.norm(M)
    herm_defect = np.linalg.norm(M - M.conj().T)
    if scale > 0 and herm_defect > 1e-9 * scale:
        raise ValueError(f"map is not Hermitian: defect {herm_defect:.3e}")
    M = 0.5 * (M + M.conj().T)
    evals, evecs = scipy.linalg.eigh(M, driver="evd")
    return Spectrum(evals, evecs, L)


def thermal_point(spectrum: Spectrum, beta: float, L: int | None = None):
    """(epsilon, s_half) of the Gibbs state at inverse temperature beta.

    epsilon is energy per site; s_half is the entropy of the reduced
    state over the upper half-chain, per half-chain site.  Boltzmann
    weights are computed with a max shift so arbitrarily large |beta|
    stays finite.
    """
    L = L if L is not None else spectrum.L
    if L % 2 != 0:
        raise ValueError("half-chain thermal entropy needs even L")
    cut = L // 2
    logw = -beta * spectrum.evals
    logw -= logw.max()
    w = np.exp(logw)
    Z = w.sum()
    p = w / Z
    epsilon = float(np.dot(spectrum.evals, p) / L)

    # rho_half[b, b'] = sum_{a,i} p_i V[(b,a), i] V*[(b',a), i]
    # (a = low bits = traced-out half)
    W = spectrum.evecs * np.sqrt(p)
    M = W.reshape(1 << (L - cut), (1 << cut) * W.shape[1])
    rho = M @ M.conj().T
    lam = np.linalg.eigvalsh(rho)
    lam = lam[lam > _EIG_CUTOFF]
    s_half = float(-np.sum(lam * np.log(lam)) / (L - cut))
    return epsilon, s_half


@dataclass
class ThermalCurve:
    """Sampled (beta, epsilon, s_half) relation for one model and size."""

    betas: np.ndarray
    epsilons: np.ndarray
    s_halves: np.ndarray
    L_source: int
    model: str = ""

    def __post_init__(self):
        order = np.argsort(self.betas)
        self.betas = np.asarray(self.betas, dtype=float)[order]
        self.epsilons = np.asarray(self.epsilons, dtype=float)[order]
        self.s_halves = np.asarray(self.s_halves, dtype=float)[order]
        if not np.any(self.betas == 0.0):
            raise ValueError("thermal curve must include the beta=0 anchor")
        i0 = int(np.flatnonzero(self.betas == 0.0)[0])
        if abs(self.epsilons[i0]) > 1e-10:
            raise ValueError("beta=0 energy density is not zero; operator not traceless?")
        if abs(self.s_halves[i0] - math.log(2.0)) > 1e-10:
            raise ValueError("beta=0 entropy density is not ln 2")
        if np.any(np.diff(self.epsilons) > 1e-9):
            raise ValueError("epsilon(beta) must be non-increasing in beta")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["beta", "epsilon", "s_half"])
            for b, e, s in zip(self.betas, self.epsilons, self.s_halves):
                w.writerow([repr(b), repr(e), repr(s)])

    def knots(self):
        order = np.argsort(self.epsilons)
        return [(float(self.epsilons[i]), float(self.s_halves[i])) for i in order]


def default_betas(beta_max: float = 1e3, n_per_side: int = 25) -> np.ndarray:
    """Log-spaced grid on both spectrum sides plus the beta=0 anchor.

    Extends to beta_max=1e3 so the largest-|beta| points sit essentially
    on the spectral edges, anchoring the interpolant domain there.
    """
    half = np.logspace(-3, math.log10(beta_max), n_per_side)
    return np.concatenate((-half[::-1], [0.0], half))


def build_thermal_curve(spectrum: Spectrum, betas=None, model: str = "") -> ThermalCurve:
    """Sample the Gibbs (epsilon, s_half) relation over a beta grid.

    The outermost points are snapped onto the exact spectral edges when
    they land within 1e-6 of them (near-degenerate edge states keep the
    largest-|beta| Gibbs state a sliver inside the edge; the snap lets
    edge-energy queries fall inside the interpolant domain).
    """
    betas = default_betas() if betas is None else np.asarray(betas, dtype=float)
    eps = np.empty_like(betas)
    s = np.empty_like(betas)
    for i, b in enumerate(betas):
        eps[i], s[i] = thermal_point(spectrum, b)
    for sign, idx in ((+1, np.argmin(eps)), (-1, np.argmax(eps))):
        edge = spectrum.max_energy_density(-sign)
        if 0 < abs(eps[idx] - edge) < 1e-6 * max(1.0, abs(edge)):
            eps[idx] = edge
    return ThermalCurve(betas, eps, s, spectrum.L, model)


def build_interpolant(curve: ThermalCurve):
    """Natural cubic through the (epsilon, s_half) samples.

    Returns a callable s_est(eps) that raises outside the sampled
    epsilon range instead of extrapolating.  The knots are exposed as
    s_est.knots for run manifests.
    """
    from scipy.interpolate import CubicSpline

    eps = []
    s = []
    for e, sv in sorted(curve.knots()):
        if eps and e - eps[-1] < 1e-12:
            continue  # large-|beta| points collapse onto the spectral edge
        eps.append(e)
        s.append(sv)
    if len(eps) < 4:
        raise ValueError(f"need >= 4 distinct epsilon samples, have {len(eps)}")
    spline = CubicSpline(eps, s, bc_type="natural", extrapolate=False)
    lo, hi = eps[0], eps[-1]

    def s_est(x: float) -> float:
        if not lo <= x <= hi:
            raise ValueError(
                f"epsilon {x:.6g} outside interpolant domain [{lo:.6g}, {hi:.6g}]")
        return float(spline(x))

    s_est.domain = (lo, hi)
    s_est.knots = list(zip(eps, s))
    return s_est


def estimate_plateau(eps_L: float, eps_L_max: float, eps_Lp_max: float,
                     s_est, L: int) -> float:
    """Plateau entropy estimate (L/2) s_est(rescaled eps) - 0.5.

    The rescaling eps -> eps/eps_L_max * eps_Lp_max maps the target
    size's energy density into the diagonalized size's spectrum; it is
    applied only on the positive side, where the spectrum width grows
    with system size.  Negative energy densities are used raw.
    """
    if eps_L_max == 0:
        raise ValueError("eps_L_max must be nonzero")
    arg = eps_L if eps_L <= 0 else eps_L / eps_L_max * eps_Lp_max
    return (L / 2.0) * s_est(arg) - 0.5


def plateau_from_timeseries(series: TimeSeries, t_pre: float) -> float:
    """Measured plateau: entropy at the first sample with t >= t_pre."""
    idx = np.flatnonzero(series.times >= t_pre)
    if idx.size == 0:
        raise ValueError(f"series ends before t_pre={t_pre}")
    return float(series.column("entropy")[idx[0]])
