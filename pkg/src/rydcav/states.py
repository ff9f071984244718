"""Initial and target states over the atom-cavity basis.

All constructors return normalized states with the global-phase convention
that the first nonzero amplitude (in basis order) is real and positive.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from math import factorial, sqrt

import numpy as np

from .hilbert import HilbertSpace, annihilation_normal, atomic_ket

NORM_TOL = 1e-10


class TruncationError(ValueError):
    """Requested state does not fit below the Fock cutoff."""


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Pure state (vector) or mixed state (density matrix) over ``space``."""

    data: np.ndarray
    space: HilbertSpace

    def __post_init__(self):
        d = np.array(self.data, dtype=complex)
        dim = self.space.dim
        if not (d.shape == (dim,) or d.shape == (dim, dim)):
            raise ValueError(f"state shape {d.shape} does not match space dimension {dim}")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @property
    def is_pure(self) -> bool:
        return self.data.ndim == 1

    def norm(self) -> float:
        if self.is_pure:
            return float(np.linalg.norm(self.data))
        return float(np.real(np.trace(self.data)))

    def density(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return self.data.copy()

    def check(self, tol: float = NORM_TOL) -> None:
        """Raise ``ValueError`` unless the state is normalized (and a valid density)."""
        if self.is_pure:
            if abs(self.norm() - 1) > tol:
                raise ValueError(f"pure state norm {self.norm():.12f} != 1")
            return
        rho = self.data
        if np.max(np.abs(rho - rho.conj().T)) > tol:
            raise ValueError("density matrix is not Hermitian")
        if abs(self.norm() - 1) > tol:
            raise ValueError(f"density trace {self.norm():.12f} != 1")
        if np.linalg.eigvalsh(rho).min() < -tol:
            raise ValueError("density matrix has negative eigenvalues")

    def expect(self, op) -> complex:
        op = np.asarray(op)
        if self.is_pure:
            return complex(np.vdot(self.data, op @ self.data))
        return complex(np.trace(op @ self.data))

    def label_amplitudes(self, tol: float = 0.0) -> list[tuple[str, complex]]:
        if not self.is_pure:
            raise ValueError("basis amplitudes are only defined for pure states")
        return [(self.space.label(i), complex(a)) for i, a in enumerate(self.data) if abs(a) > tol]


def fix_global_phase(psi: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """Rotate ``psi`` so its first nonzero amplitude is real and positive."""
    psi = np.asarray(psi, dtype=complex)
    nz = np.flatnonzero(np.abs(psi) > tol)
    if nz.size == 0:
        return psi.copy()
    lead = psi[nz[0]]
    return psi * (abs(lead) / lead)


def _finish(psi: np.ndarray, space: HilbertSpace) -> QuantumState:
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValueError("state vector is zero")
    return QuantumState(fix_global_phase(psi / norm), space)


def product_state(space: HilbertSpace, atoms: str, field: np.ndarray) -> QuantumState:
    """Atomic label tensored with a field vector of length ``(n_max + 1)**2``."""
    field = np.asarray(field, dtype=complex).ravel()
    if field.size != space.fock_dim**2:
        raise ValueError(f"field vector has length {field.size}, expected {space.fock_dim**2}")
    return _finish(np.kron(atomic_ket(atoms), field), space)


def _fock_field(space: HilbertSpace, n1: int, n2: int) -> np.ndarray:
    for n in (n1, n2):
        if not 0 <= n <= space.n_max:
            raise TruncationError(f"photon number {n} exceeds cutoff n_max={space.n_max}")
    f = np.zeros(space.fock_dim**2, dtype=complex)
    f[n1 * space.fock_dim + n2] = 1.0
    return f


def localized_fock(space: HilbertSpace, atoms: str, n1: int, n2: int) -> QuantumState:
    """``|atoms> (x) |n1>_a1 |n2>_a2``."""
    return product_state(space, atoms, _fock_field(space, n1, n2))


def normal_mode_fock(space: HilbertSpace, atoms: str, n_c1: int, n_c2: int) -> QuantumState:
    """``|atoms> (x) |n_c1>_c1 |n_c2>_c2`` expanded in the localized basis.

    Built as ``(c1^dag)^n_c1 (c2^dag)^n_c2 |0, 0> / sqrt(n_c1! n_c2!)``;
    requires ``n_c1 + n_c2 <= n_max`` so no amplitude is lost to truncation.
    """
    if n_c1 < 0 or n_c2 < 0:
        raise ValueError("photon numbers must be non-negative")
    if n_c1 + n_c2 > space.n_max:
        raise TruncationError(
            f"n_c1 + n_c2 = {n_c1 + n_c2} exceeds cutoff n_max={space.n_max}"
        )
    return _finish(_normal_fock_raw(space, atoms, n_c1, n_c2), space)


def _normal_fock_raw(space: HilbertSpace, atoms: str, n_c1: int, n_c2: int) -> np.ndarray:
    psi = np.kron(atomic_ket(atoms), _fock_field(space, 0, 0))
    c1d = annihilation_normal(space, 1).matrix.conj().T
    c2d = annihilation_normal(space, 2).matrix.conj().T
    for _ in range(n_c2):
        psi = c2d @ psi
    for _ in range(n_c1):
        psi = c1d @ psi
    return psi / sqrt(factorial(n_c1) * factorial(n_c2))


def coherent_amplitudes(alpha: complex, n_max: int) -> np.ndarray:
    """Fock amplitudes ``exp(-|alpha|^2/2) alpha^n / sqrt(n!)`` for ``n = 0..n_max`` (not renormalized)."""
    amps = np.empty(n_max + 1, dtype=complex)
    amps[0] = np.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, n_max + 1):
        amps[n] = amps[n - 1] * alpha / sqrt(n)
    return amps


def coherent_product(space: HilbertSpace, atoms: str, alpha: complex, beta: complex,
                     tail_tol: float = 1e-6) -> QuantumState:
    """``|atoms> (x) |alpha>_a1 |beta>_a2`` by truncated series and renormalization.

    Raises :class:`TruncationError` if the discarded tail probability
    exceeds ``tail_tol``.
    """
    ca = coherent_amplitudes(alpha, space.n_max)
    cb = coherent_amplitudes(beta, space.n_max)
    tail = 1.0 - np.sum(np.abs(ca) ** 2) * np.sum(np.abs(cb) ** 2)
    if tail > tail_tol:
        raise TruncationError(
            f"coherent tail probability {tail:.3e} above {tail_tol:g} at n_max={space.n_max}"
        )
    return product_state(space, atoms, np.kron(ca, cb))


def normal_mode_coherent(space: HilbertSpace, atoms: str, gamma1: complex, gamma2: complex,
                         tail_tol: float = 1e-6) -> QuantumState:
    """``|atoms> (x) |gamma1>_c1 |gamma2>_c2`` summed over normal-mode Fock states.

    Only terms with ``m1 + m2 <= n_max`` are kept; the discarded weight
    must stay below ``tail_tol``.
    """
    c1 = coherent_amplitudes(gamma1, space.n_max)
    c2 = coherent_amplitudes(gamma2, space.n_max)
    psi = np.zeros(space.dim, dtype=complex)
    kept = 0.0
    for m1 in range(space.n_max + 1):
        for m2 in range(space.n_max + 1 - m1):
            amp = c1[m1] * c2[m2]
            if amp == 0:
                continue
            kept += abs(amp) ** 2
            psi += amp * _normal_fock_raw(space, atoms, m1, m2)
    if 1 - kept > tail_tol:
        raise TruncationError(f"normal-mode coherent tail {1 - kept:.3e} above {tail_tol:g}")
    return _finish(psi, space)


def noon_target(space: HilbertSpace, sign: int = 1) -> QuantumState:
    """``|G> (x) (|2,0>_c + sign |0,2>_c)/sqrt2``."""
    psi = _normal_fock_raw(space, "G", 2, 0) + sign * _normal_fock_raw(space, "G", 0, 2)
    return _finish(psi, space)


def fidelity(state, target) -> float:
    """``|<target|psi>|^2`` (pure) or ``<target|rho|target>`` (mixed), target pure."""
    psi = state.data if isinstance(state, QuantumState) else np.asarray(state)
    tgt = target.data if isinstance(target, QuantumState) else np.asarray(target)
    if tgt.ndim != 1:
        raise ValueError("target must be a pure state")
    if psi.shape[0] != tgt.shape[0]:
        raise ValueError(f"dimension mismatch: {psi.shape[0]} vs {tgt.shape[0]}")
    if psi.ndim == 1:
        return float(abs(np.vdot(tgt, psi)) ** 2)
    return float(np.real(np.vdot(tgt, psi @ tgt)))


def export_snapshot(state: QuantumState) -> str:
    """Text snapshot: header lines, then one ``label re im`` record per basis state."""
    if not state.is_pure:
        raise ValueError("snapshot export supports pure states only")
    buf = io.StringIO()
    buf.write(f"# rydcav-state n_max={state.space.n_max}\n")
    buf.write("# label re im\n")
    for i, amp in enumerate(state.data):
        buf.write(f"{state.space.label(i)} {float(amp.real)!r} {float(amp.imag)!r}\n")
    return buf.getvalue()


def parse_snapshot(text: str) -> QuantumState:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("# rydcav-state n_max="):
        raise ValueError("missing snapshot header")
    space = HilbertSpace(int(lines[0].split("=", 1)[1]))
    psi = np.zeros(space.dim, dtype=complex)
    for lineno, ln in enumerate(lines[1:], start=2):
        if ln.startswith("#"):
            continue
        parts = ln.split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'label re im', got {ln!r}")
        psi[space.parse_label(parts[0])] = complex(float(parts[1]), float(parts[2]))
    return QuantumState(psi, space)
