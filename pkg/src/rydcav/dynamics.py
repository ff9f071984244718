"""Time evolution and the time-averaged observables built on it.

Time-independent Hamiltonians are propagated exactly by eigendecomposition
(Hermitian) or by repeated application of the one-step matrix exponential
(non-Hermitian, uniform grids).  Both split the Hamiltonian into its
decoupled blocks first: the interaction Hamiltonian conserves the total
excitation number, so a Fock initial state only touches a handful of
basis vectors.  Explicitly time-dependent Hamiltonians use fixed-step RK4.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.linalg import expm
from scipy.optimize import curve_fit
from scipy.sparse.csgraph import connected_components

from .hilbert import (
    HilbertSpace,
    OperatorMatrix,
    annihilation_local,
    atomic_operator,
    number_local,
)
from .model import (
    SystemParams,
    _branch,
    build_h_frame,
    build_h_interaction,
    build_h_nonhermitian,
    derived_couplings,
)
from .states import QuantumState, fidelity, localized_fock, normal_mode_fock

CHANNELS = ("P_G", "P_S", "P_A", "P_R", "n_a1", "n_a2", "n_c1", "n_c2", "norm")

UNITARY_NORM_TOL = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling of ``[t_start, t_end]`` with ``n_samples`` points (time in 1/g)."""

    t_end: float
    t_start: float = 0.0
    n_samples: int = 2001

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError(f"t_end ({self.t_end}) must exceed t_start ({self.t_start})")
        if int(self.n_samples) != self.n_samples or self.n_samples < 2:
            raise ValueError(f"n_samples must be an integer >= 2, got {self.n_samples}")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, int(self.n_samples))

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / (self.n_samples - 1)


@dataclass
class TimeSeries:
    """Observables sampled on a time grid.

    ``norm`` is the squared norm ``<psi|psi>`` (the no-jump probability for
    non-Hermitian runs); every other channel is the expectation value in
    the normalized state.  ``states`` optionally holds one row per sample.
    """

    times: np.ndarray
    channels: dict[str, np.ndarray]
    states: np.ndarray | None = None
    space: HilbertSpace | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, values in self.channels.items():
            if len(values) != len(self.times):
                raise ValueError(f"channel {name} has {len(values)} samples, expected {len(self.times)}")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]

    def state_at(self, i: int) -> QuantumState:
        if self.states is None or self.space is None:
            raise ValueError("trajectory was run without store_states=True")
        return QuantumState(self.states[i], self.space)

    def to_csv(self, dest=None) -> str:
        """Write ``t,P_G,...,norm`` rows with round-trip float formatting; returns the text."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("t",) + CHANNELS)
        for i, t in enumerate(self.times):
            writer.writerow([repr(float(t))] + [repr(float(self.channels[c][i])) for c in CHANNELS])
        text = buf.getvalue()
        if dest is not None:
            Path(dest).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "TimeSeries":
        text = Path(source).read_text() if isinstance(source, (str, Path)) and Path(source).exists() else source
        rows = list(csv.reader(io.StringIO(text)))
        header = tuple(rows[0])
        if header != ("t",) + CHANNELS:
            raise ValueError(f"unexpected CSV header {header}")
        data = np.array([[float(x) for x in r] for r in rows[1:]])
        return cls(data[:, 0], {c: data[:, i + 1] for i, c in enumerate(CHANNELS)})


@lru_cache(maxsize=16)
def _observables(space: HilbertSpace) -> dict[str, sparse.csr_matrix]:
    ops = {f"P_{x}": atomic_operator(space, f"proj_{x}").matrix for x in "GSAR"}
    n1 = number_local(space, 1).matrix
    n2 = number_local(space, 2).matrix
    a1 = annihilation_local(space, 1).matrix
    a2 = annihilation_local(space, 2).matrix
    hop = 0.5 * (a1.conj().T @ a2 + a2.conj().T @ a1)
    ops.update(n_a1=n1, n_a2=n2, n_c1=0.5 * (n1 + n2) + hop, n_c2=0.5 * (n1 + n2) - hop)
    return {k: sparse.csr_matrix(v) for k, v in ops.items()}


def measure(space: HilbertSpace, states: np.ndarray) -> dict[str, np.ndarray]:
    """All :data:`CHANNELS` for a stack of state vectors (one per row)."""
    states = np.atleast_2d(states)
    norm = np.sum(np.abs(states) ** 2, axis=1)
    safe = np.where(norm > 0, norm, 1.0)
    out = {}
    for name, op in _observables(space).items():
        out[name] = np.real(np.sum(states.conj() * (op @ states.T).T, axis=1)) / safe
    out["norm"] = norm
    return out


def _space_for(dim: int) -> HilbertSpace:
    n = math.isqrt(dim // 4)
    if 4 * n * n != dim:
        raise ValueError(f"dimension {dim} is not of the form 4 (n_max + 1)^2")
    return HilbertSpace(n - 1)


def _as_vector(psi0, dim: int | None = None) -> tuple[np.ndarray, HilbertSpace]:
    if isinstance(psi0, QuantumState):
        if not psi0.is_pure:
            raise ValueError("evolution requires a pure initial state")
        vec, space = np.asarray(psi0.data, dtype=complex), psi0.space
    else:
        vec = np.asarray(psi0, dtype=complex)
        space = _space_for(vec.shape[0])
    if dim is not None and vec.shape[0] != dim:
        raise ValueError(f"dimension mismatch: state {vec.shape[0]} vs Hamiltonian {dim}")
    return vec, space


def _as_matrix(H) -> tuple[np.ndarray, bool]:
    if isinstance(H, OperatorMatrix):
        return np.asarray(H.matrix), H.hermitian
    m = np.asarray(H, dtype=complex)
    return m, bool(np.allclose(m, m.conj().T, atol=1e-12, rtol=0))


def _blocks(h: np.ndarray, support: np.ndarray) -> list[np.ndarray]:
    """Index sets of the decoupled blocks of ``h`` that overlap ``support``."""
    n_comp, labels = connected_components(sparse.csr_matrix(np.abs(h) > 0), directed=False)
    wanted = np.unique(labels[support])
    return [np.flatnonzero(labels == k) for k in wanted]


class SpectralPropagator:
    """Exact ``exp(-i H (t - t0)) psi0`` for a Hermitian ``H`` at arbitrary times."""

    def __init__(self, H, psi0, t0: float = 0.0):
        h, herm = _as_matrix(H)
        if not herm:
            raise ValueError("SpectralPropagator needs a Hermitian Hamiltonian")
        self.psi0, self.space = _as_vector(psi0, h.shape[0])
        self.t0 = t0
        self._parts = []
        for idx in _blocks(h, np.flatnonzero(np.abs(self.psi0) > 0)):
            w, v = np.linalg.eigh(h[np.ix_(idx, idx)])
            self._parts.append((idx, w, v, v.conj().T @ self.psi0[idx]))

    def states(self, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float)) - self.t0
        out = np.zeros((times.size, self.psi0.size), dtype=complex)
        for idx, w, v, c in self._parts:
            out[:, idx] = (np.exp(-1j * np.outer(times, w)) * c) @ v.T
        return out


def _stepper_states(h: np.ndarray, psi0: np.ndarray, grid: TimeGrid) -> np.ndarray:
    out = np.zeros((grid.n_samples, psi0.size), dtype=complex)
    for idx in _blocks(h, np.flatnonzero(np.abs(psi0) > 0)):
        step = expm(-1j * grid.dt * h[np.ix_(idx, idx)])
        psi = psi0[idx]
        out[0, idx] = psi
        for i in range(1, grid.n_samples):
            psi = step @ psi
            out[i, idx] = psi
    return out


def evolve(H, psi0, grid: TimeGrid, store_states: bool = False) -> TimeSeries:
    """Propagate ``psi0`` under a time-independent ``H`` and record :data:`CHANNELS`.

    Hermitian Hamiltonians are diagonalized; the norm must stay within
    1e-9 of one.  Non-Hermitian ones (``hermitian`` flag false) are stepped
    with the exact one-step propagator and the decaying norm is reported
    without renormalization.
    """
    h, herm = _as_matrix(H)
    psi, space = _as_vector(psi0, h.shape[0])
    if herm:
        states = SpectralPropagator(h, psi, grid.t_start).states(grid.times)
    else:
        states = _stepper_states(h, psi, grid)
    ch = measure(space, states)
    if herm:
        drift = float(np.max(np.abs(ch["norm"] - 1)))
        if drift > UNITARY_NORM_TOL:
            raise RuntimeError(f"unitary evolution lost normalization (max drift {drift:.2e})")
    return TimeSeries(grid.times, ch, states if store_states else None, space)


def _rk4_default_step(H_of_t, t0: float) -> float:
    bound = getattr(H_of_t, "norm_bound", None)
    if bound is None:
        bound = float(np.linalg.norm(np.asarray(H_of_t(t0)), 2))
    freqs = getattr(H_of_t, "freqs", None)
    dt = 0.02 / max(bound, 1e-12)
    if freqs is not None and len(freqs):
        dt = min(dt, 0.1 / max(np.max(np.abs(freqs)), 1e-12))
    return dt


def evolve_td(H_of_t, psi0, grid: TimeGrid, dt_max: float | None = None,
              store_states: bool = False) -> TimeSeries:
    """Fixed-step RK4 for a time-dependent Hamiltonian.

    ``H_of_t`` is a callable returning the matrix at time t; if it also has
    an ``apply(t, psi)`` method that is used instead, and a ``norm_bound``
    attribute replaces the spectral-norm estimate.  Each grid interval is
    split into equal steps no longer than ``dt_max`` (chosen automatically
    when omitted).  Raises ``ValueError`` if ``||H|| dt >= 0.05``.
    """
    psi, space = _as_vector(psi0)
    if dt_max is None:
        dt_max = _rk4_default_step(H_of_t, grid.t_start)
    n_sub = max(1, math.ceil(grid.dt / dt_max - 1e-12))
    dt = grid.dt / n_sub
    bound = getattr(H_of_t, "norm_bound", None)
    if bound is None:
        bound = float(np.linalg.norm(np.asarray(H_of_t(grid.t_start)), 2))
    if bound * dt >= 0.05:
        raise ValueError(f"step-size violation: ||H|| dt = {bound * dt:.3g} >= 0.05")

    if hasattr(H_of_t, "apply"):
        def rhs(t, y):
            return -1j * H_of_t.apply(t, y)
    else:
        def rhs(t, y):
            return -1j * (np.asarray(H_of_t(t)) @ y)

    times = grid.times
    out = np.empty((times.size, psi.size), dtype=complex)
    out[0] = psi
    y = psi.copy()
    for i in range(1, times.size):
        t = times[i - 1]
        for _ in range(n_sub):
            k1 = rhs(t, y)
            k2 = rhs(t + dt / 2, y + dt / 2 * k1)
            k3 = rhs(t + dt / 2, y + dt / 2 * k2)
            k4 = rhs(t + dt, y + dt * k3)
            y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += dt
        out[i] = y
    return TimeSeries(times, measure(space, out), out if store_states else None, space,
                      meta={"dt": dt})


def evolve_no_jump(params: SystemParams, psi0: QuantumState, grid: TimeGrid,
                   store_states: bool = False) -> TimeSeries:
    """Conditional evolution under ``H_I - (i kappa/2) sum_k a_k^dag a_k``."""
    return evolve(build_h_nonhermitian(params, psi0.space), psi0, grid, store_states)


def dominant_period(times: np.ndarray, signal: np.ndarray) -> float:
    """Period of the strongest oscillation, refined by a sinusoidal least-squares fit."""
    times = np.asarray(times, dtype=float)
    y = np.asarray(signal, dtype=float) - np.mean(signal)
    dt = times[1] - times[0]
    spec = np.abs(np.fft.rfft(y))
    freqs = np.fft.rfftfreq(y.size, dt)
    if spec.size < 2 or not np.any(spec[1:] > 0):
        return math.inf
    k = int(np.argmax(spec[1:])) + 1
    T0 = 1.0 / freqs[k]

    def model(t, a, b, c, T):
        return a + b * np.cos(2 * np.pi * t / T) + c * np.sin(2 * np.pi * t / T)

    try:
        popt, _ = curve_fit(model, times, signal, p0=[np.mean(signal), np.std(signal), 0.0, T0],
                            maxfev=20000)
        T = abs(popt[3])
        return T if 0.5 * T0 < T < 2 * T0 else T0
    except RuntimeError:
        return T0


# --- time-averaged observables ----------------------------------------------

def _window(params: SystemParams, n: int, window) -> float:
    if not isinstance(window, str):
        w = float(window)
        if w <= 0:
            raise ValueError("averaging window must be positive")
        return w
    xi = abs(derived_couplings(params).xi)
    if window == "fig4":
        return 2 * math.pi / (math.sqrt(2) * xi)
    if window == "fig3":
        if n >= 2:
            return 2 * math.pi / (math.sqrt(n * (n - 1)) * xi)
        if n == 1:
            warnings.warn("n = 1: averaging window 2 pi / xi is a convention (formula diverges)",
                          UserWarning, stacklevel=3)
            return 2 * math.pi / xi
        raise ValueError("the photon-number-dependent window is undefined for n = 0")
    raise ValueError(f"window must be 'fig3', 'fig4' or a duration, got {window!r}")


def _branch_state(space: HilbertSpace, atoms: str, branch: str, n: int) -> QuantumState:
    return normal_mode_fock(space, atoms, n, 0) if branch == "c1" else normal_mode_fock(space, atoms, 0, n)


def time_averaged_photons(params: SystemParams, branch: str, atoms: str, n_init: int,
                          window="fig3", space: HilbertSpace | None = None,
                          n_samples: int = 2001) -> float:
    """Trapezoidal average of ``<n_cb(t)>`` from ``|atoms> (x) |n_init>_cb |0>``."""
    branch = _branch(branch)
    if n_init < 0:
        raise ValueError("n_init must be non-negative")
    space = space or HilbertSpace(max(2, n_init + 2))
    T = _window(params, n_init, window)
    psi0 = _branch_state(space, atoms, branch, n_init)
    ts = evolve(build_h_interaction(params, space), psi0, TimeGrid(T, n_samples=n_samples))
    return float(np.trapezoid(ts["n_" + branch], ts.times) / T)


def time_averaged_absorption(params: SystemParams, branch: str, n_init: int, window="fig3",
                             space: HilbertSpace | None = None, n_samples: int = 2001) -> float:
    """``n(0) - <n_cb(t)>_t`` with the atoms starting in ``|G>``.

    ``window`` is ``"fig3"`` (``2 pi / (sqrt(n(n-1)) xi)``; ``2 pi / xi`` for
    n = 1, flagged), ``"fig4"`` (``2 pi / (sqrt2 xi)``) or an explicit duration.
    """
    return n_init - time_averaged_photons(params, branch, "G", n_init, window, space, n_samples)


def time_averaged_emission(params: SystemParams, branch: str, n_init: int, window="fig4",
                           space: HilbertSpace | None = None, n_samples: int = 2001,
                           normalized: bool = False) -> float:
    """``<n_cb(t)>_t - n(0)`` with the atoms starting in ``|R>``; optionally divided by ``n(0)``."""
    if normalized and n_init < 1:
        raise ValueError("normalized emission needs n_init >= 1")
    emitted = time_averaged_photons(params, branch, "R", n_init, window, space, n_samples) - n_init
    return emitted / n_init if normalized else emitted


@dataclass(frozen=True)
class SweepResult:
    vdd_over_j: np.ndarray
    absorption: np.ndarray
    argmax: float
    resolution: float

    def to_csv(self, dest=None) -> str:
        lines = ["vdd_over_J,absorption"]
        lines += [f"{float(x)!r},{float(y)!r}" for x, y in zip(self.vdd_over_j, self.absorption)]
        text = "\n".join(lines) + "\n"
        if dest is not None:
            Path(dest).write_text(text)
        return text


def _sweep_point(args) -> float:
    params, branch, n_init, window, n_max, n_samples = args
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return time_averaged_absorption(params, branch, n_init, window, HilbertSpace(n_max), n_samples)


def sweep_vdd(params: SystemParams, branch: str, n_init: int, vdd_range: tuple[float, float],
              n_points: int = 41, window="fig3", space: HilbertSpace | None = None,
              n_samples: int = 2001, workers: int = 1) -> SweepResult:
    """Absorption versus ``V_dd / J`` on a uniform grid over ``vdd_range``.

    Points are independent; with ``workers > 1`` they run in a process
    pool and are reassembled in grid order.  The argmax takes the lowest
    ``V_dd`` on ties.
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    lo, hi = sorted(vdd_range)
    grid = np.linspace(lo, hi, n_points)
    n_max = (space or HilbertSpace(max(2, n_init + 2))).n_max
    if n_init == 1 and window == "fig3":
        _window(params, 1, window)  # emit the convention warning once
    jobs = [(_replace_vdd(params, x * params.J), branch, n_init, window, n_max, n_samples) for x in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(_sweep_point, jobs))
    else:
        values = [_sweep_point(j) for j in jobs]
    values = np.array(values)
    k = int(np.argmax(values))
    return SweepResult(grid, values, float(grid[k]), float(grid[1] - grid[0]))


def _replace_vdd(params: SystemParams, v_dd: float) -> SystemParams:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return replace(params, v_dd=float(v_dd))


@dataclass(frozen=True)
class NoonResult:
    time: float
    fidelity: float
    period: float
    times: np.ndarray = field(repr=False, default=None)
    fidelities: np.ndarray = field(repr=False, default=None)


def noon_protocol(params: SystemParams, space: HilbertSpace | None = None,
                  n_samples: int = 20001) -> NoonResult:
    """Best interaction time for ``|G>|1,1>_a -> |G>(|2,0>_c + |0,2>_c)/sqrt2``.

    Scans the first two effective Rabi periods ``[0, 2 pi/(sqrt2 xi')]``.
    Fidelity is taken in the frame rotating with
    ``J(c1^dag c1 - c2^dag c2) + V_dd |R><R|``: in the bare interaction
    picture photon hopping alone swaps the relative sign of the two
    components every quarter hopping period, which is not the atomic
    two-photon process this protocol is about.
    """
    space = space or HilbertSpace(6)
    branch = "c1" if params.v_dd >= 0 else "c2"
    xi_p = abs(derived_couplings(params).xi_prime(branch))
    period = math.pi / (math.sqrt(2) * xi_p)
    prop = SpectralPropagator(build_h_interaction(params, space), localized_fock(space, "G", 1, 1))
    h0 = build_h_frame(params, space).matrix
    u = normal_mode_fock(space, "G", 2, 0).data
    v = normal_mode_fock(space, "G", 0, 2).data
    e_u = float(np.real(np.vdot(u, h0 @ u)))
    e_v = float(np.real(np.vdot(v, h0 @ v)))

    times = np.linspace(0.0, 2 * period, n_samples)
    states = prop.states(times)
    amp = (np.exp(1j * e_u * times) * (states @ u.conj())
           + np.exp(1j * e_v * times) * (states @ v.conj())) / math.sqrt(2)
    fid = np.abs(amp) ** 2
    k = int(np.argmax(fid))
    if fid[k] < 0.5:
        raise RuntimeError(f"NOON fidelity ceiling {fid[k]:.3f} < 0.5: parameters outside the protocol regime")
    return NoonResult(float(times[k]), float(fid[k]), period, times, fid)


def fidelity_trace(ts: TimeSeries, target: QuantumState) -> np.ndarray:
    if ts.states is None:
        raise ValueError("trajectory was run without store_states=True")
    return np.array([fidelity(s, target) for s in ts.states])
