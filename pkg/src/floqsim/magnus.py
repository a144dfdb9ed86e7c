"""Effective-Hamiltonian word expansion for the square-wave drive.

The one-period unitary factorizes into two half-period exponentials
generated by D+E and D-E.  Expanding its logarithm in powers of the
period yields a time-independent generator expressed as a weighted sum
of products ("words") of D and E; the table below carries the expansion
through 4th order.  Truncations are evaluated matrix-free as nested
matvec chains, never as explicit operator products.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._kernels import apply_word_plan
from .hamiltonian import PauliTermSum, StateVector

MAX_ORDER = 4

# (word, numerator, denominator, i_power); the full coefficient of a word
# at order k is i^i_power * num/den * (T/2)^k.
_WORD_TABLE: dict[int, list[tuple[str, int, int, int]]] = {
    0: [("D", 1, 1, 0)],
    1: [("ED", 1, 2, 1), ("DE", -1, 2, 1)],
    2: [("EED", -1, 6, 0), ("EDE", 2, 6, 0), ("DEE", -1, 6, 0)],
    3: [
        ("EDDD", 1, 24, 1), ("DEEE", 1, 24, 1),
        ("EEED", -1, 24, 1), ("DDDE", -1, 24, 1),
        ("EEDE", 3, 24, 1), ("DDED", 3, 24, 1),
        ("EDEE", -3, 24, 1), ("DEDD", -3, 24, 1),
    ],
    4: [
        ("EDDED", -27, 360, 0), ("DEDDE", -27, 360, 0),
        ("DDEDE", 23, 360, 0), ("EDEDD", 23, 360, 0),
        ("EDDDE", 18, 360, 0), ("EEDEE", 18, 360, 0),
        ("DEDED", 8, 360, 0),
        ("EEEDE", -12, 360, 0), ("EDEEE", -12, 360, 0),
        ("EEDDD", -7, 360, 0), ("DDDEE", -7, 360, 0),
        ("DEEEE", 3, 360, 0), ("EEEED", 3, 360, 0),
        ("DEEDD", -2, 360, 0), ("DDEED", -2, 360, 0),
    ],
}


@dataclass(frozen=True)
class OperatorWord:
    """One word of the expansion: letters over {D, E} plus its weight.

    The scalar coefficient at drive period T is
    i^i_power * rational * (T/2)^order, with order = len(letters) - 1.
    """

    letters: str
    rational: Fraction
    i_power: int
    order: int

    def coefficient(self, T: float) -> complex:
        return (1j ** self.i_power) * float(self.rational) * (T / 2.0) ** self.order


def magnus_words(order: int) -> list[OperatorWord]:
    """Words contributing at a single expansion order (0..4)."""
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"expansion order must be in [0, {MAX_ORDER}], got {order}")
    return [
        OperatorWord(w, Fraction(num, den), ip, order)
        for w, num, den, ip in _WORD_TABLE[order]
    ]


def words_table_rows():
    """Audit rows (order, word, rational, i_power, t_half_power)."""
    rows = []
    for order in range(MAX_ORDER + 1):
        for w in magnus_words(order):
            rows.append((order, w.letters, str(w.rational), w.i_power, w.order))
    return rows


class LinearMapExpr:
    """Matrix-free linear map: a weighted sum of D/E words.

    Words sharing a suffix share the corresponding intermediate vector,
    so one matvec of the full 4th-order truncation costs 44 elementary
    applies instead of 136.  Instances are immutable and safe to share;
    concurrent matvecs on distinct vectors are safe.
    """

    def __init__(self, D: PauliTermSum, E: PauliTermSum, T: float, order: int,
                 components: list[tuple[complex, str]]):
        if D.L != E.L:
            raise ValueError("D and E must act on the same chain")
        self.D = D
        self.E = E
        self.T = float(T)
        self.order = order
        self.components = list(components)
        self.L = D.L
        self._plan = None
        self._buf = None

    @property
    def dim(self) -> int:
        return self.D.dim

    def norm_bound(self) -> float:
        """Upper bound on the spectral norm via word-wise products."""
        bd = self.D.norm_bound()
        be = self.E.norm_bound()
        total = 0.0
        for coeff, word in self.components:
            prod = 1.0
            for letter in word:
                prod *= bd if letter == "D" else be
            total += abs(coeff) * prod
        return total

    def _build_plan(self):
        nodes: dict[str, int] = {}
        letters: list[int] = []
        parents: list[int] = []
        words = sorted({w for _, w in self.components}, key=lambda s: (len(s), s))
        for word in words:
            for k in range(1, len(word) + 1):
                suffix = word[-k:]
                if suffix in nodes:
                    continue
                nodes[suffix] = len(letters)
                letters.append(0 if suffix[0] == "D" else 1)
                parents.append(nodes[suffix[1:]] if k > 1 else -1)
        ocoeff = np.zeros(len(letters), dtype=np.complex128)
        for coeff, word in self.components:
            ocoeff[nodes[word]] += coeff
        self._plan = (
            np.array(letters, dtype=np.int8),
            np.array(parents, dtype=np.int32),
            ocoeff,
        )

    def matvec(self, x: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        x = np.asarray(x, dtype=np.complex128)
        if x.shape[0] != self.dim:
            raise ValueError(f"dimension mismatch: map {self.dim}, vector {x.shape[0]}")
        if x.ndim == 2:
            return self._matvec_mat(x)
        if self._plan is None:
            self._build_plan()
        letters, parents, ocoeff = self._plan
        if self._buf is None or self._buf.shape[1] != self.dim:
            self._buf = np.empty((len(letters), self.dim), dtype=np.complex128)
        if out is None:
            out = np.empty_like(x)
        return apply_word_plan(
            x, letters, parents, ocoeff,
            *self.D.compiled(), *self.E.compiled(),
            self._buf, out,
        )

    def _matvec_mat(self, X: np.ndarray) -> np.ndarray:
        # column-batched path (used by dense materialization); plain
        # per-word evaluation keeps the memory footprint at two buffers
        acc = np.zeros_like(X)
        ops = {"D": self.D, "E": self.E}
        for coeff, word in self.components:
            w = X
            for letter in reversed(word):
                w = ops[letter].matvec(w)
            acc += coeff * w
        return acc

    def __repr__(self):
        return (f"LinearMapExpr(L={self.L}, order={self.order}, "
                f"n_words={len(self.components)}, T={self.T})")


def assemble_deff(D: PauliTermSum, E: PauliTermSum, T: float, n: int) -> LinearMapExpr:
    """Truncation of the effective generator to order n as a linear map."""
    if D.L != E.L:
        raise ValueError("D and E must act on the same chain")
    if not 0 <= n <= MAX_ORDER:
        raise ValueError(f"truncation order must be in [0, {MAX_ORDER}], got {n}")
    components = []
    for order in range(n + 1):
        for w in magnus_words(order):
            components.append((w.coefficient(T), w.letters))
    return LinearMapExpr(D, E, T, n, components)


def floquet_unitary_apply(D: PauliTermSum, E: PauliTermSum, T: float,
                          v: StateVector, cfg=None) -> StateVector:
    """One drive period: exp(-i T/2 (D-E)) exp(-i T/2 (D+E)) applied to v."""
    from .krylov import expm_apply

    w = expm_apply(D + E, v, T / 2.0, cfg)
    return expm_apply(D - E, w, T / 2.0, cfg)


def bch_order_check(D: PauliTermSum, E: PauliTermSum, n: int, T_grid) -> float:
    """Scaling exponent of ||U_f - exp(-i T Deff_n)|| against T.

    Fits the log-log slope over the supplied period grid using dense
    matrices (small L only); a correct order-n truncation gives slope
    n+2.  Grid points whose difference norm sits at the double-precision
    noise floor are dropped; fewer than 4 surviving points is an error.
    """
    from .dense import expm_hermitian, floquet_dense, pauli_sum_to_dense

    if D.L > 6:
        raise ValueError("order check is a dense validator; use L <= 6")
    T_grid = np.asarray(sorted(T_grid), dtype=np.float64)
    Dd = pauli_sum_to_dense(D)
    Ed = pauli_sum_to_dense(E)
    dim = Dd.shape[0]
    noise_floor = 200 * np.finfo(np.float64).eps * dim

    diffs = []
    for T in T_grid:
        Hn = np.zeros_like(Dd)
        prods = {"": np.eye(dim, dtype=np.complex128)}

        def word_matrix(word):
            if word not in prods:
                head = Dd if word[0] == "D" else Ed
                prods[word] = head @ word_matrix(word[1:])
            return prods[word]

        for order in range(n + 1):
            for w in magnus_words(order):
                Hn += w.coefficient(T) * word_matrix(w.letters)
        diff = floquet_dense(Dd, Ed, T) - expm_hermitian(Hn, T)
        diffs.append(np.linalg.norm(diff))

    diffs = np.asarray(diffs)
    keep = diffs > noise_floor
    if keep.sum() < 4:
        raise ValueError(
            "degenerate order fit: fewer than 4 grid points above the "
            "floating-point noise floor; use larger periods"
        )
    slope = np.polyfit(np.log(T_grid[keep]), np.log(diffs[keep]), 1)[0]
    return float(slope)
