"""Driven spin-chain model: operator construction and matrix-free action.

The chain is an open 1D array of L spins with Ising couplings (power-law
or truncated to next-nearest neighbor), a nearest-neighbor XX term, and
uniform fields.  The static part D collects the time-independent terms,
the drive part E the square-wave y/z field.

Basis convention: integer bitstrings, bit i = site i, bit 0 = up
(sigma^z = +1).  All operators are stored as sums of Pauli strings with
real coefficients and applied matrix-free; dense matrices are built only
for small-L validation (see floqsim.dense).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._kernels import apply_pauli_sum, apply_pauli_sum_mat, popcount_parity

_TWO_PI = 2.0 * math.pi


class RangeKind(enum.Enum):
    """Interaction range of the Ising couplings."""

    LONG = "long"
    SHORT = "short"


_MODEL_FIELDS = ("L", "J", "Jx", "hx", "hy", "hz", "alpha", "range", "omega", "boundary")


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the driven chain.

    Defaults are the working point used throughout: J=1, Jx=0.19,
    hx=0.21, hy=0.17, hz=0.13, alpha=1.25.
    """

    L: int
    J: float = 1.0
    Jx: float = 0.19
    hx: float = 0.21
    hy: float = 0.17
    hz: float = 0.13
    alpha: float = 1.25
    range: RangeKind = RangeKind.LONG
    omega: float = 9.0
    boundary: str = "open"

    def __post_init__(self):
        if self.L < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.omega <= 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.boundary != "open":
            raise ValueError("only open boundary conditions are supported")
        if not isinstance(self.range, RangeKind):
            object.__setattr__(self, "range", RangeKind(self.range))

    @property
    def period(self) -> float:
        """Drive period T = 2 pi / omega."""
        return _TWO_PI / self.omega

    def with_omega(self, omega: float) -> "ModelParams":
        return replace(self, omega=omega)

    def to_dict(self) -> dict:
        d = {name: getattr(self, name) for name in _MODEL_FIELDS}
        d["range"] = self.range.value
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict, **overrides) -> "ModelParams":
        unknown = set(d) - set(_MODEL_FIELDS)
        if unknown:
            raise ValueError(f"unknown ModelParams keys: {sorted(unknown)}")
        kw = dict(d)
        kw.update(overrides)
        if "range" in kw:
            kw["range"] = RangeKind(kw["range"])
        return cls(**kw)

    @classmethod
    def from_json(cls, s: str) -> "ModelParams":
        return cls.from_dict(json.loads(s))


class PauliTermSum:
    """Hermitian operator as a weighted sum of Pauli strings.

    Terms are canonicalized on construction: duplicate strings merged,
    exact zeros dropped.  Coefficients must be real (Pauli strings are
    Hermitian, so real weights keep the sum Hermitian).  Instances are
    immutable and safe to share across threads.
    """

    __slots__ = ("L", "_terms", "_compiled")

    def __init__(self, L: int, terms=()):
        """terms: iterable of (coefficient, {site: 'X'|'Y'|'Z'})."""
        self.L = int(L)
        acc: dict[tuple[int, int], float] = {}
        for coeff, string in terms:
            if isinstance(coeff, complex):
                if coeff.imag != 0.0:
                    raise ValueError("Pauli-term coefficients must be real")
                coeff = coeff.real
            mx = mz = 0
            for site, letter in string.items():
                if not 0 <= site < self.L:
                    raise ValueError(f"site {site} outside chain of length {self.L}")
                if letter == "X":
                    mx |= 1 << site
                elif letter == "Y":
                    mx |= 1 << site
                    mz |= 1 << site
                elif letter == "Z":
                    mz |= 1 << site
                else:
                    raise ValueError(f"unknown Pauli letter {letter!r}")
            acc[(mx, mz)] = acc.get((mx, mz), 0.0) + float(coeff)
        self._terms = {k: c for k, c in acc.items() if c != 0.0}
        self._compiled = None

    @classmethod
    def from_masks(cls, L: int, masked_terms) -> "PauliTermSum":
        """masked_terms: iterable of (coeff, mask_x, mask_z)."""
        op = cls.__new__(cls)
        op.L = int(L)
        acc: dict[tuple[int, int], float] = {}
        for coeff, mx, mz in masked_terms:
            acc[(mx, mz)] = acc.get((mx, mz), 0.0) + float(coeff)
        op._terms = {k: c for k, c in acc.items() if c != 0.0}
        op._compiled = None
        return op

    @property
    def dim(self) -> int:
        return 1 << self.L

    @property
    def n_terms(self) -> int:
        return len(self._terms)

    def terms(self):
        """Yield (coefficient, {site: letter}) in canonical mask order."""
        for (mx, mz), c in sorted(self._terms.items()):
            string = {}
            for site in range(self.L):
                bit = 1 << site
                if mx & bit and mz & bit:
                    string[site] = "Y"
                elif mx & bit:
                    string[site] = "X"
                elif mz & bit:
                    string[site] = "Z"
            yield c, string

    def term_dict(self) -> dict[tuple[int, int], float]:
        return dict(self._terms)

    def coefficient_sum(self) -> float:
        """Sum of |coefficients|; an upper bound on the spectral norm."""
        return sum(abs(c) for c in self._terms.values())

    norm_bound = coefficient_sum

    # -- algebra ----------------------------------------------------------

    def _binary(self, other, sign) -> "PauliTermSum":
        if not isinstance(other, PauliTermSum):
            return NotImplemented
        if other.L != self.L:
            raise ValueError("operator size mismatch")
        merged = dict(self._terms)
        for k, c in other._terms.items():
            merged[k] = merged.get(k, 0.0) + sign * c
        return PauliTermSum.from_masks(
            self.L, ((c, mx, mz) for (mx, mz), c in merged.items())
        )

    def __add__(self, other):
        return self._binary(other, +1.0)

    def __sub__(self, other):
        return self._binary(other, -1.0)

    def __mul__(self, scalar):
        scalar = float(scalar)
        return PauliTermSum.from_masks(
            self.L, ((scalar * c, mx, mz) for (mx, mz), c in self._terms.items())
        )

    __rmul__ = __mul__

    # -- matrix-free action -----------------------------------------------

    def compiled(self):
        """(diag, mask_x, mask_z, amp) arrays consumed by the kernels."""
        if self._compiled is None:
            idx = np.arange(self.dim, dtype=np.int64)
            diag = np.zeros(self.dim, dtype=np.float64)
            off = []
            for (mx, mz), c in sorted(self._terms.items()):
                if mx == 0:
                    diag += c * popcount_parity(idx, mz)
                else:
                    ny = bin(mx & mz).count("1")
                    off.append((mx, mz, c * (1j ** ny)))
            mxs = np.array([t[0] for t in off], dtype=np.int64)
            mzs = np.array([t[1] for t in off], dtype=np.int64)
            amps = np.array([t[2] for t in off], dtype=np.complex128)
            self._compiled = (diag, mxs, mzs, amps)
        return self._compiled

    def matvec(self, x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        diag, mx, mz, amp = self.compiled()
        x = np.asarray(x)
        if x.shape[0] != self.dim:
            raise ValueError(f"dimension mismatch: operator {self.dim}, vector {x.shape[0]}")
        if out is None:
            out = np.empty_like(x, dtype=np.complex128)
        if x.ndim == 1:
            return apply_pauli_sum(x.astype(np.complex128, copy=False), diag, mx, mz, amp, out)
        return apply_pauli_sum_mat(x.astype(np.complex128, copy=False), diag, mx, mz, amp, out)

    def __repr__(self):
        return f"PauliTermSum(L={self.L}, n_terms={self.n_terms})"


@dataclass
class StateVector:
    """Normalized complex amplitudes over the 2^L product basis."""

    amplitudes: np.ndarray
    L: int

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (1 << self.L,):
            raise ValueError("amplitude vector length must be 2**L")

    @classmethod
    def basis_state(cls, L: int, index: int) -> "StateVector":
        amp = np.zeros(1 << L, dtype=np.complex128)
        amp[index] = 1.0
        return cls(amp, L)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes.copy(), self.L)


# -- builders ---------------------------------------------------------------


def build_static_part(p: ModelParams) -> PauliTermSum:
    """Static Hamiltonian D: Ising zz couplings + Jx XX + hx X fields.

    Long range gives J/|i-j|^alpha for every pair; short range keeps
    only |i-j| <= 2.  Open boundaries.
    """
    if p.L < 2:
        raise ValueError("static part needs at least 2 sites")
    max_dist = p.L - 1 if p.range is RangeKind.LONG else 2
    terms = []
    for i in range(p.L):
        for j in range(i + 1, min(i + max_dist, p.L - 1) + 1):
            terms.append((p.J / (j - i) ** p.alpha, {i: "Z", j: "Z"}))
    for i in range(p.L - 1):
        terms.append((p.Jx, {i: "X", i + 1: "X"}))
    for i in range(p.L):
        terms.append((p.hx, {i: "X"}))
    return PauliTermSum(p.L, terms)


def build_drive_part(p: ModelParams) -> PauliTermSum:
    """Drive operator E: uniform y and z fields (square-wave sign in time)."""
    terms = []
    for i in range(p.L):
        terms.append((p.hy, {i: "Y"}))
        terms.append((p.hz, {i: "Z"}))
    return PauliTermSum(p.L, terms)


_LOCAL_KINDS = ("Z", "X", "ZZ", "XX")


def build_local_operator(kind: str, site: int, L: int) -> PauliTermSum:
    """Single local Pauli operator with unit coefficient.

    kind: one of Z, X (single site) or ZZ, XX (site and site+1).
    """
    if kind not in _LOCAL_KINDS:
        raise ValueError(f"kind must be one of {_LOCAL_KINDS}, got {kind!r}")
    span = 2 if len(kind) == 2 else 1
    if not 0 <= site <= L - span:
        raise ValueError(f"site {site} out of range for {kind} on chain of {L}")
    string = {site + k: letter for k, letter in enumerate(kind)}
    return PauliTermSum(L, [(1.0, string)])


def initial_state(L: int, domain_walls: int) -> StateVector:
    """Product state in the z basis with equally spaced domain walls.

    The chain splits into domain_walls+1 contiguous segments of
    alternating polarization, up first; segment boundaries sit at
    round(k*L/(domain_walls+1)) (round half up).
    """
    if not 0 <= domain_walls <= L - 1:
        raise ValueError(f"domain_walls must be in [0, {L - 1}], got {domain_walls}")
    nseg = domain_walls + 1
    bounds = [0] + [int(math.floor(k * L / nseg + 0.5)) for k in range(1, nseg)] + [L]
    index = 0
    for seg in range(nseg):
        if seg % 2 == 1:
            for site in range(bounds[seg], bounds[seg + 1]):
                index |= 1 << site
    return StateVector.basis_state(L, index)


def apply(op: PauliTermSum, v) -> np.ndarray:
    """Exact linear action op @ v; returns an unnormalized ndarray."""
    x = v.amplitudes if isinstance(v, StateVector) else np.asarray(v)
    return op.matvec(x)
