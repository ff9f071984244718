"""Single-mode reductions, atomic post-selection and phase-space pictures.

Quadrature convention: ``x = (a + a^dag)/sqrt2``, ``p = (a - a^dag)/(i sqrt2)``
with hbar = 1, so the vacuum has variance 1/2 and ``W(0, 0) = 1/pi``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from .dynamics import SpectralPropagator
from .hilbert import HilbertSpace, atomic_operator, beam_splitter
from .model import SystemParams, build_h_frame, build_h_interaction, derived_couplings
from .states import QuantumState, coherent_product

MODES = ("a1", "a2", "c1", "c2")


class ProjectionError(RuntimeError):
    """Post-selection onto an outcome with (numerically) zero probability."""


@dataclass(frozen=True, eq=False)
class ModeDensity:
    """Density matrix of one field mode in its Fock basis.

    Localized modes keep the cutoff ``n_max``; normal modes can hold up to
    ``2 n_max`` photons, because the mode rotation redistributes the total
    photon number of both localized modes.
    """

    matrix: np.ndarray
    mode: str = ""

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"density must be square, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def cutoff(self) -> int:
        return self.matrix.shape[0] - 1

    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def to_csv(self, dest=None) -> str:
        """Rows ``m,n,re,im`` for every matrix element."""
        lines = ["m,n,re,im"]
        for m in range(self.matrix.shape[0]):
            for n in range(self.matrix.shape[1]):
                z = self.matrix[m, n]
                lines.append(f"{m},{n},{float(z.real)!r},{float(z.imag)!r}")
        text = "\n".join(lines) + "\n"
        if dest is not None:
            Path(dest).write_text(text)
        return text

    @classmethod
    def from_csv(cls, text: str, mode: str = "") -> "ModeDensity":
        rows = [r.split(",") for r in text.strip().splitlines()[1:]]
        size = max(int(r[0]) for r in rows) + 1
        m = np.zeros((size, size), dtype=complex)
        for r in rows:
            m[int(r[0]), int(r[1])] = complex(float(r[2]), float(r[3]))
        return cls(m, mode)


def _field_tensor(state: QuantumState) -> tuple[np.ndarray, bool]:
    space = state.space
    d = space.fock_dim
    if state.is_pure:
        return state.data.reshape(4, d, d), True
    return state.data.reshape(4, d, d, 4, d, d), False


def _to_normal(space: HilbertSpace, psi: np.ndarray, pure: bool) -> np.ndarray:
    """Rotate the field factor into normal-mode Fock coordinates."""
    b = beam_splitter(space.n_max)
    d_out = 2 * space.n_max + 1
    if pure:
        flat = psi.reshape(4, -1) @ b.T
        return flat.reshape(4, d_out, d_out)
    rho = psi.reshape(4 * space.fock_dim**2, 4 * space.fock_dim**2)
    big = np.kron(np.eye(4), b)
    return (big @ rho @ big.T).reshape(4, d_out, d_out, 4, d_out, d_out)


def reduce_to_mode(state: QuantumState, mode: str) -> ModeDensity:
    """Partial trace over the atoms and the other field mode."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    t, pure = _field_tensor(state)
    if mode in ("c1", "c2"):
        t = _to_normal(state.space, t, pure)
    keep_first = mode in ("a1", "c1")
    if pure:
        rho = (np.einsum("sij,skj->ik", t, t.conj()) if keep_first
               else np.einsum("sji,sjk->ik", t, t.conj()))
    else:
        rho = np.einsum("sijskj->ik", t) if keep_first else np.einsum("sjisjk->ik", t)
    rho = 0.5 * (rho + rho.conj().T)
    return ModeDensity(rho, mode)


def project_atoms(state: QuantumState, label: str, min_probability: float = 1e-12):
    """Post-select the atoms in collective state ``label``.

    Returns ``(probability, collapsed_state)`` with the collapsed state
    renormalized.  Raises :class:`ProjectionError` below
    ``min_probability``.
    """
    if not state.is_pure:
        raise ValueError("project_atoms expects a pure state")
    if label not in ("G", "S", "A", "R"):
        raise ValueError(f"label must be one of G, S, A, R, got {label!r}")
    proj = atomic_operator(state.space, f"proj_{label}").matrix
    psi = proj @ state.data
    prob = float(np.real(np.vdot(psi, psi)))
    norm0 = float(np.real(np.vdot(state.data, state.data)))
    if norm0 > 0:
        prob /= norm0
    if prob < min_probability:
        raise ProjectionError(f"projection onto {label} has probability {prob:.3e}")
    return prob, QuantumState(psi / np.linalg.norm(psi), state.space)


def photon_distribution(rho: ModeDensity) -> np.ndarray:
    """Photon-number probabilities ``p(n) = <n|rho|n>``."""
    return np.clip(np.real(np.diag(rho.matrix)), 0.0, None)


@dataclass(frozen=True, eq=False)
class WignerGrid:
    x: np.ndarray
    p: np.ndarray
    values: np.ndarray  # indexed [ix, ip]

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def dp(self) -> float:
        return float(self.p[1] - self.p[0])

    def integral(self) -> float:
        return float(self.values.sum() * self.dx * self.dp)

    def value_at(self, x: float, p: float) -> float:
        ix = int(np.argmin(np.abs(self.x - x)))
        ip = int(np.argmin(np.abs(self.p - p)))
        return float(self.values[ix, ip])

    def x_marginal(self) -> np.ndarray:
        return self.values.sum(axis=1) * self.dp

    def to_csv(self, dest=None) -> str:
        buf = io.StringIO()
        buf.write("x,p,W\n")
        for i, x in enumerate(self.x):
            for j, p in enumerate(self.p):
                buf.write(f"{float(x)!r},{float(p)!r},{float(self.values[i, j])!r}\n")
        text = buf.getvalue()
        if dest is not None:
            Path(dest).write_text(text)
        return text


def default_axis(extent: float = 4.0, points: int = 81) -> np.ndarray:
    return np.linspace(-extent, extent, points)


def wigner_values(rho: np.ndarray, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Wigner function on the ``x`` by ``p`` mesh via the Laguerre-Gaussian kernels.

    Uses ``W = sum_mn rho_mn W_nm`` with ``W_nm`` generated by the standard
    two-term recursion in ``alpha = (x + i p)/sqrt2``, starting from the
    vacuum ``exp(-2|alpha|^2)/pi``.
    """
    rho = np.asarray(rho, dtype=complex)
    X, P = np.meshgrid(x, p, indexing="ij")
    alpha = (X + 1j * P) / math.sqrt(2)
    cutoff = rho.shape[0]
    # prev[n] holds the |m><n| kernel for the previous row m
    prev = np.zeros((cutoff,) + alpha.shape, dtype=complex)
    prev[0] = np.exp(-2.0 * np.abs(alpha) ** 2) / math.pi
    for n in range(1, cutoff):
        prev[n] = 2.0 * alpha * prev[n - 1] / math.sqrt(n)
    W = np.real(rho[0, 0]) * np.real(prev[0])
    for n in range(1, cutoff):
        W = W + 2.0 * np.real(rho[0, n] * prev[n])
    for m in range(1, cutoff):
        cur = np.zeros_like(prev)
        cur[m] = (2.0 * np.conj(alpha) * prev[m] - math.sqrt(m) * prev[m - 1]) / math.sqrt(m)
        W = W + np.real(rho[m, m] * cur[m])
        for n in range(m + 1, cutoff):
            cur[n] = (2.0 * alpha * cur[n - 1] - math.sqrt(m) * prev[n - 1]) / math.sqrt(n)
            W = W + 2.0 * np.real(rho[m, n] * cur[n])
        prev = cur
    return W


def wigner(rho: ModeDensity, x: np.ndarray | None = None, p: np.ndarray | None = None,
           norm_tol: float = 0.01) -> WignerGrid:
    """Wigner function of a single-mode density on a uniform grid.

    Defaults to ``x, p`` in [-4, 4] with 81 points each.  Raises
    ``ValueError`` when the grid-integrated value misses the trace by more
    than ``norm_tol`` (grid too small or too coarse for the state).
    """
    x = default_axis() if x is None else np.asarray(x, dtype=float)
    p = default_axis() if p is None else np.asarray(p, dtype=float)
    if x.size < 2 or p.size < 2:
        raise ValueError("grid needs at least two points per axis")
    grid = WignerGrid(x, p, wigner_values(rho.matrix, x, p))
    total = grid.integral()
    if abs(total - rho.trace()) > norm_tol:
        raise ValueError(f"Wigner grid integrates to {total:.4f}, expected {rho.trace():.4f}: "
                         "enlarge or refine the grid")
    return grid


@dataclass(frozen=True)
class NegativityMetrics:
    min_value: float
    negative_volume: float


def negativity_metrics(grid: WignerGrid) -> NegativityMetrics:
    """Minimum of W and the integrated ``|W|`` over its negative region (midpoint rule)."""
    neg = np.clip(grid.values, None, 0.0)
    return NegativityMetrics(float(grid.values.min()), float(-neg.sum() * grid.dx * grid.dp))


def position_distribution(rho: ModeDensity, x: np.ndarray) -> np.ndarray:
    """``<x|rho|x>`` from Hermite-function wavefunctions (independent of the Wigner kernel)."""
    x = np.asarray(x, dtype=float)
    n = rho.matrix.shape[0]
    psi = np.zeros((n, x.size))
    psi[0] = np.pi**-0.25 * np.exp(-x**2 / 2)
    if n > 1:
        psi[1] = math.sqrt(2) * x * psi[0]
    for k in range(2, n):
        psi[k] = math.sqrt(2 / k) * x * psi[k - 1] - math.sqrt((k - 1) / k) * psi[k - 2]
    return np.real(np.einsum("mx,mn,nx->x", psi, rho.matrix, psi))


def to_rotating_frame(params: SystemParams, space: HilbertSpace, psi: np.ndarray, t: float) -> np.ndarray:
    """Remove the free normal-mode and blockade phases: ``exp(i H0 t) psi``."""
    return expm(1j * t * build_h_frame(params, space).matrix) @ psi


def filter_time(params: SystemParams) -> float:
    """Quarter two-photon Rabi cycle ``pi / (2 sqrt2 xi)`` of a two-photon pair."""
    return math.pi / (2 * math.sqrt(2) * abs(derived_couplings(params).xi))


@dataclass(frozen=True, eq=False)
class FilterResult:
    time: float
    probability: float
    state: QuantumState
    rho: ModeDensity
    p_n: np.ndarray
    wigner: WignerGrid
    metrics: NegativityMetrics


def filter_protocol(params: SystemParams, space: HilbertSpace, alpha: complex = 1 / math.sqrt(2),
                    beta: complex = 1 / math.sqrt(2), atoms: str = "G", t: float | None = None,
                    measure: str = "G", mode: str = "c1", grid: tuple | None = None,
                    tail_tol: float = 1e-3) -> FilterResult:
    """Evolve, post-select the atoms, and characterize one normal mode.

    The field starts in ``|alpha>_a1 |beta>_a2``.  Atoms starting in
    ``G`` remove photon pairs from ``c1``; atoms starting in ``R`` deposit a
    pair on top of the vacuum component.  The collapsed state is taken in
    the frame rotating with the free normal-mode Hamiltonian before
    reducing to ``mode``.  ``grid`` is an optional ``(x, p)`` pair of axes
    for the Wigner function.
    """
    psi0 = coherent_product(space, atoms, alpha, beta, tail_tol=tail_tol)
    t = filter_time(params) if t is None else float(t)
    if t < 0:
        raise ValueError("filter time must be non-negative")
    prop = SpectralPropagator(build_h_interaction(params, space), psi0)
    psi_t = to_rotating_frame(params, space, prop.states(np.array([t]))[0], t)
    prob, collapsed = project_atoms(QuantumState(psi_t, space), measure)
    rho = reduce_to_mode(collapsed, mode)
    x, p = grid if grid is not None else (None, None)
    w = wigner(rho, x, p)
    return FilterResult(t, prob, collapsed, rho, photon_distribution(rho), w, negativity_metrics(w))
