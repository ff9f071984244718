"""Truncated Hilbert space and elementary operators.

The composite system is two two-level atoms ({g, r}) and two localized
cavity modes, each truncated at ``n_max`` photons.  Basis vectors are
ordered lexicographically by ``(atom1, atom2, n_a1, n_a2)`` with ``g < r``,
so the flat index of ``|s1, s2, n1, n2>`` is::

    ((s1 * 2 + s2) * (n_max + 1) + n1) * (n_max + 1) + n2

Every operator and state in the package uses this ordering.  The collective
atomic states G, S, A, R are derived vectors over the product basis, not a
second basis.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial, sqrt

import numpy as np

ATOM_LEVELS = ("g", "r")

# Collective two-atom states over the atomic product basis (gg, gr, rg, rr).
COLLECTIVE_KETS = {
    "G": np.array([1.0, 0.0, 0.0, 0.0]),
    "S": np.array([0.0, 1.0, 1.0, 0.0]) / sqrt(2.0),
    "A": np.array([0.0, 1.0, -1.0, 0.0]) / sqrt(2.0),
    "R": np.array([0.0, 0.0, 0.0, 1.0]),
}

PRODUCT_KETS = {
    "gg": np.array([1.0, 0.0, 0.0, 0.0]),
    "gr": np.array([0.0, 1.0, 0.0, 0.0]),
    "rg": np.array([0.0, 0.0, 1.0, 0.0]),
    "rr": np.array([0.0, 0.0, 0.0, 1.0]),
}

HERMITIAN_TOL = 1e-12


def atomic_ket(label: str) -> np.ndarray:
    """Return the 4-component atomic vector for a collective or product label."""
    if label in COLLECTIVE_KETS:
        return COLLECTIVE_KETS[label].copy()
    if label in PRODUCT_KETS:
        return PRODUCT_KETS[label].copy()
    raise ValueError(
        f"unknown atomic label {label!r}; expected one of "
        f"{sorted(COLLECTIVE_KETS) + sorted(PRODUCT_KETS)}"
    )


@dataclass(frozen=True)
class HilbertSpace:
    """Two atoms times two Fock-truncated localized modes."""

    n_max: int

    def __post_init__(self):
        if isinstance(self.n_max, bool) or not isinstance(self.n_max, (int, np.integer)):
            raise TypeError(f"n_max must be an integer, got {self.n_max!r}")
        if self.n_max < 2:
            raise ValueError(f"n_max must be >= 2 to hold two-photon states, got {self.n_max}")

    @property
    def atom_levels(self) -> int:
        return 2

    @property
    def fock_dim(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return 4 * self.fock_dim**2

    def index(self, s1, s2, n1: int, n2: int) -> int:
        """Flat index of ``|s1, s2, n1, n2>``; atoms given as 'g'/'r' or 0/1."""
        s1, s2 = _level(s1), _level(s2)
        for n in (n1, n2):
            if not 0 <= n <= self.n_max:
                raise ValueError(f"photon number {n} outside [0, {self.n_max}]")
        d = self.fock_dim
        return ((s1 * 2 + s2) * d + n1) * d + n2

    def unravel(self, index: int) -> tuple[int, int, int, int]:
        return tuple(int(i) for i in np.unravel_index(index, (2, 2, self.fock_dim, self.fock_dim)))

    def label(self, index: int) -> str:
        s1, s2, n1, n2 = self.unravel(index)
        return f"{ATOM_LEVELS[s1]},{ATOM_LEVELS[s2]},{n1},{n2}"

    def labels(self) -> list[str]:
        return [self.label(i) for i in range(self.dim)]

    def parse_label(self, label: str) -> int:
        try:
            s1, s2, n1, n2 = (part.strip() for part in label.split(","))
            return self.index(s1, s2, int(n1), int(n2))
        except (ValueError, KeyError) as exc:
            raise ValueError(f"bad basis label {label!r}") from exc

    def embed(self, atom1=None, atom2=None, mode1=None, mode2=None) -> np.ndarray:
        """Kronecker product of the given factors, identities elsewhere."""
        factors = [
            np.eye(2) if atom1 is None else atom1,
            np.eye(2) if atom2 is None else atom2,
            np.eye(self.fock_dim) if mode1 is None else mode1,
            np.eye(self.fock_dim) if mode2 is None else mode2,
        ]
        out = factors[0]
        for f in factors[1:]:
            out = np.kron(out, f)
        return out.astype(complex)

    def embed_atomic(self, op4: np.ndarray) -> np.ndarray:
        """Embed a 4x4 two-atom operator (basis gg, gr, rg, rr)."""
        return np.kron(op4, np.eye(self.fock_dim**2)).astype(complex)


def _level(s) -> int:
    if s in (0, 1):
        return int(s)
    if s in ATOM_LEVELS:
        return ATOM_LEVELS.index(s)
    raise ValueError(f"atomic level must be 'g', 'r', 0 or 1, got {s!r}")


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense operator over a HilbertSpace basis.

    The matrix is stored read-only.  When ``hermitian`` is set the
    constructor verifies ``max|M - M^dagger| < 1e-12``.
    """

    matrix: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator must be a square matrix, got shape {m.shape}")
        if self.hermitian:
            res = hermiticity_residual(m)
            if res >= HERMITIAN_TOL:
                raise ValueError(f"operator flagged hermitian but max|M - M^dag| = {res:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dag(self) -> "OperatorMatrix":
        return OperatorMatrix(self.matrix.conj().T.copy(), self.hermitian)

    def hermiticity_residual(self) -> float:
        return hermiticity_residual(self.matrix)

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


def hermiticity_residual(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def commutator(a, b) -> np.ndarray:
    a, b = np.asarray(a), np.asarray(b)
    return a @ b - b @ a


def _destroy(d: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, d, dtype=float)), 1)


def _check_mode(which) -> int:
    if which not in (1, 2):
        raise ValueError(f"mode index must be 1 or 2, got {which!r}")
    return which


def annihilation_local(space: HilbertSpace, which: int) -> OperatorMatrix:
    """Annihilator ``a_1`` or ``a_2`` of a localized cavity mode."""
    _check_mode(which)
    a = _destroy(space.fock_dim)
    m = space.embed(mode1=a) if which == 1 else space.embed(mode2=a)
    return OperatorMatrix(m)


def annihilation_normal(space: HilbertSpace, which: int) -> OperatorMatrix:
    """Normal-mode annihilator ``c_1 = (a_1 + a_2)/sqrt2`` or ``c_2 = (a_1 - a_2)/sqrt2``."""
    _check_mode(which)
    a1 = annihilation_local(space, 1).matrix
    a2 = annihilation_local(space, 2).matrix
    sign = 1.0 if which == 1 else -1.0
    return OperatorMatrix((a1 + sign * a2) / sqrt(2.0))


def number_local(space: HilbertSpace, which: int) -> OperatorMatrix:
    a = annihilation_local(space, which).matrix
    return OperatorMatrix(a.conj().T @ a, hermitian=True)


def number_normal(space: HilbertSpace, which: int) -> OperatorMatrix:
    c = annihilation_normal(space, which).matrix
    return OperatorMatrix(c.conj().T @ c, hermitian=True)


def _single_atom(which: int, op2: np.ndarray) -> np.ndarray:
    return np.kron(op2, np.eye(2)) if which == 1 else np.kron(np.eye(2), op2)


_SIGMA_RG = np.array([[0.0, 0.0], [1.0, 0.0]])  # |r><g|
_PROJ_R = np.array([[0.0, 0.0], [0.0, 1.0]])
_PROJ_G = np.array([[1.0, 0.0], [0.0, 0.0]])

_ATOMIC_KINDS = ("raise_1", "raise_2", "proj_G", "proj_S", "proj_A", "proj_R",
                 "proj_rr_1", "proj_rr_2", "proj_gg_1", "proj_gg_2")


def atomic_matrix(kind: str) -> np.ndarray:
    """4x4 two-atom operator for ``kind`` (see :func:`atomic_operator`)."""
    if kind.startswith("proj_") and kind[5:] in COLLECTIVE_KETS:
        v = COLLECTIVE_KETS[kind[5:]]
        return np.outer(v, v)
    table = {
        "raise_1": _single_atom(1, _SIGMA_RG),
        "raise_2": _single_atom(2, _SIGMA_RG),
        "proj_rr_1": _single_atom(1, _PROJ_R),
        "proj_rr_2": _single_atom(2, _PROJ_R),
        "proj_gg_1": _single_atom(1, _PROJ_G),
        "proj_gg_2": _single_atom(2, _PROJ_G),
    }
    if kind not in table:
        raise ValueError(f"unknown atomic operator kind {kind!r}; expected one of {_ATOMIC_KINDS}")
    return table[kind]


def atomic_operator(space: HilbertSpace, kind: str) -> OperatorMatrix:
    """Atomic operator embedded in the full space.

    ``kind`` is one of ``raise_k`` (``|r>_k<g|``), ``proj_G``, ``proj_S``,
    ``proj_A``, ``proj_R`` (collective projectors), ``proj_rr_k``
    (``|r>_k<r|``) or ``proj_gg_k`` (``|g>_k<g|``), with ``k`` in {1, 2}.
    """
    m = atomic_matrix(kind)
    return OperatorMatrix(space.embed_atomic(m), hermitian=kind.startswith("proj_"))


def atomic_transition(space: HilbertSpace, ket: str, bra: str) -> OperatorMatrix:
    """``|ket><bra|`` between collective/product atomic states, identity on the field."""
    return OperatorMatrix(space.embed_atomic(np.outer(atomic_ket(ket), atomic_ket(bra))))


def total_excitation(space: HilbertSpace) -> OperatorMatrix:
    """``N = a1^dag a1 + a2^dag a2 + sum_k |r>_k<r|``, conserved by the interaction Hamiltonian."""
    n = number_local(space, 1).matrix + number_local(space, 2).matrix
    n = n + atomic_operator(space, "proj_rr_1").matrix + atomic_operator(space, "proj_rr_2").matrix
    return OperatorMatrix(n, hermitian=True)


def photon_numbers(space: HilbertSpace) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal ``n_a1`` and ``n_a2`` values for every basis index."""
    idx = np.arange(space.dim)
    d = space.fock_dim
    return idx // d % d, idx % d


def top_fock_population(space: HilbertSpace, psi: np.ndarray) -> float:
    """Largest population on the cutoff level ``n_max`` of either localized mode.

    Callers use this to assert that truncation is harmless (e.g. < 1e-6).
    Accepts a state vector, a density matrix, or a stack of state vectors
    (rows), in which case the maximum over the stack is returned.
    """
    psi = np.asarray(psi)
    n1, n2 = photon_numbers(space)
    if psi.ndim == 2 and psi.shape == (space.dim, space.dim) and np.allclose(psi, psi.conj().T):
        diag = np.real(np.diag(psi))
        return float(max(diag[n1 == space.n_max].sum(), diag[n2 == space.n_max].sum()))
    probs = np.abs(np.atleast_2d(psi)) ** 2
    return float(max(probs[:, n1 == space.n_max].sum(axis=1).max(),
                     probs[:, n2 == space.n_max].sum(axis=1).max()))


@lru_cache(maxsize=None)
def beam_splitter(n_max: int) -> np.ndarray:
    """Localized-to-normal-mode Fock transform.

    Returns ``B`` of shape ``((2 n_max + 1)**2, (n_max + 1)**2)`` with
    ``B[m1 * (2 n_max + 1) + m2, n1 * (n_max + 1) + n2] = <m1, m2|_c |n1, n2>_a``.
    Total photon number is conserved, so the map is exact (isometric) on
    the truncated localized space.
    """
    d_in = n_max + 1
    d_out = 2 * n_max + 1
    out = np.zeros((d_out * d_out, d_in * d_in))
    for n1 in range(d_in):
        for n2 in range(d_in):
            total = n1 + n2
            pref = 2.0 ** (-total / 2) / sqrt(factorial(n1) * factorial(n2))
            # (c1+ + c2+)^n1 (c1+ - c2+)^n2 expanded term by term
            for j in range(n1 + 1):
                for k in range(n2 + 1):
                    m1 = j + k
                    m2 = total - m1
                    coef = comb(n1, j) * comb(n2, k) * (-1) ** (n2 - k)
                    out[m1 * d_out + m2, n1 * d_in + n2] += (
                        pref * coef * sqrt(factorial(m1) * factorial(m2))
                    )
    out.setflags(write=False)
    return out


def exact_sector_mask(space: HilbertSpace, max_total: int | None = None) -> np.ndarray:
    """Boolean mask of basis states with ``n_a1 + n_a2 <= max_total`` (default ``n_max``).

    Total photon number is conserved by the mode rotation, so inside this
    block normal-mode operators obey their untruncated algebra exactly;
    per-mode truncation only shows up outside it.
    """
    n1, n2 = photon_numbers(space)
    return (n1 + n2) <= (space.n_max if max_total is None else max_total)
