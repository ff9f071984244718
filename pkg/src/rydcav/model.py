"""Hamiltonians for two Rydberg atoms in two coupled cavities.

Units: ``g = 1`` fixes the frequency scale, every rate is a multiple of g
and time is measured in ``1/g``.

Builders return :class:`~rydcav.hilbert.OperatorMatrix` values over the
product basis of :mod:`rydcav.hilbert`:

* :func:`build_h_interaction` -- localized-mode form (after elimination of
  the intermediate level).
* :func:`build_h_collective` -- same operator assembled from collective
  atomic states and normal modes; must agree with the former to rounding.
* :func:`build_h_rotating` -- rotating frame w.r.t.
  ``J(c1^dag c1 - c2^dag c2) + V_dd |R><R|``.
* :func:`build_h_effective` -- two-photon effective Hamiltonians.
* :func:`build_h_nonhermitian` -- no-jump Hamiltonian with cavity loss.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from math import exp, pi, sqrt
from types import SimpleNamespace

import numpy as np
from scipy import sparse

from .hilbert import (
    HilbertSpace,
    OperatorMatrix,
    annihilation_local,
    annihilation_normal,
    atomic_operator,
    atomic_transition,
)

BRANCHES = ("c1", "c2")

# Spontaneous decay of the n=70 Rydberg level, in rad/s.
RYDBERG_DECAY_N70 = 2 * pi * 0.55e3


class ValidityWarning(UserWarning):
    """A parameter regime where an approximation is not well justified."""


@dataclass(frozen=True)
class SystemParams:
    """Physical couplings and loss rates, all in units of g.

    Attributes:
        g: atom-cavity coupling on the ``g <-> e`` transition.
        omega_l: laser Rabi frequency on ``e <-> r``.
        delta: single-photon detuning from the intermediate level.
        J: photon hopping rate between the cavities.
        v_dd: Rydberg-Rydberg energy shift of ``|r, r>``.
        kappa: cavity field decay rate.
        gamma: spontaneous emission rate of the intermediate level.
        gamma_r: Rydberg level decay rate.
    """

    g: float = 1.0
    omega_l: float = 1.0
    delta: float = 10.0
    J: float = 10.0
    v_dd: float = 20.0
    kappa: float = 0.0
    gamma: float = 0.0
    gamma_r: float = 0.0

    def __post_init__(self):
        for name in ("g", "omega_l", "delta", "J", "v_dd", "kappa", "gamma", "gamma_r"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float, np.floating, np.integer)):
                raise TypeError(f"{name} must be a real number, got {value!r}")
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.g <= 0:
            raise ValueError(f"g must be positive, got {self.g}")
        if self.delta == 0:
            raise ValueError("delta must be nonzero")
        for name in ("kappa", "gamma", "gamma_r"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")
        if abs(self.delta) < 5 * max(self.g, abs(self.omega_l)):
            warnings.warn(
                f"|delta| = {abs(self.delta):g} < 5 max(g, Omega) = {5 * max(self.g, abs(self.omega_l)):g}: "
                "adiabatic elimination of the intermediate level is questionable",
                ValidityWarning,
                stacklevel=3,
            )


@dataclass(frozen=True)
class DerivedCouplings:
    lambda_: float
    lambda_p: float
    lambda_pp: float
    xi: float
    xi_prime_plus: float
    xi_prime_minus: float

    def xi_prime(self, branch: str) -> float:
        return self.xi_prime_plus if _branch(branch) == "c1" else self.xi_prime_minus

    def as_dict(self) -> dict[str, float]:
        return {
            "lambda": self.lambda_,
            "lambda_p": self.lambda_p,
            "lambda_pp": self.lambda_pp,
            "xi": self.xi,
            "xi_prime_plus": self.xi_prime_plus,
            "xi_prime_minus": self.xi_prime_minus,
        }


def _lambdas(p: SystemParams) -> tuple[float, float, float]:
    return p.omega_l * p.g / p.delta, p.g**2 / p.delta, p.omega_l**2 / p.delta


def derived_couplings(params: SystemParams) -> DerivedCouplings:
    """Two-photon couplings after eliminating the intermediate level.

    ``lambda = Omega g / delta``, ``lambda' = g^2 / delta``,
    ``lambda'' = Omega^2 / delta``, ``xi = lambda^2 / J`` and the
    Stark-corrected ``xi'_+- = lambda^2 / (J +- lambda / 2)``.
    """
    if params.J == 0:
        raise ValueError("J must be nonzero to define the effective two-photon coupling")
    lam, lam_p, lam_pp = _lambdas(params)
    for sign in (1, -1):
        if params.J + sign * lam / 2 == 0:
            raise ValueError("J = -+lambda/2 makes the corrected coupling xi' singular")
    return DerivedCouplings(
        lambda_=lam,
        lambda_p=lam_p,
        lambda_pp=lam_pp,
        xi=lam**2 / params.J,
        xi_prime_plus=lam**2 / (params.J + lam / 2),
        xi_prime_minus=lam**2 / (params.J - lam / 2),
    )


def _branch(branch: str) -> str:
    if branch not in BRANCHES:
        raise ValueError(f"branch must be one of {BRANCHES}, got {branch!r}")
    return branch


@lru_cache(maxsize=16)
def _ops(space: HilbertSpace) -> SimpleNamespace:
    a1 = annihilation_local(space, 1).matrix
    a2 = annihilation_local(space, 2).matrix
    c1 = annihilation_normal(space, 1).matrix
    c2 = annihilation_normal(space, 2).matrix
    ops = SimpleNamespace(
        a1=a1, a2=a2, c1=c1, c2=c2,
        n_a1=a1.conj().T @ a1, n_a2=a2.conj().T @ a2,
        n_c1=c1.conj().T @ c1, n_c2=c2.conj().T @ c2,
        eye=np.eye(space.dim, dtype=complex),
    )
    for kind in ("raise_1", "raise_2", "proj_G", "proj_S", "proj_A", "proj_R",
                 "proj_rr_1", "proj_rr_2", "proj_gg_1", "proj_gg_2"):
        setattr(ops, kind, atomic_operator(space, kind).matrix)
    for ket in "GSAR":
        for bra in "GSAR":
            setattr(ops, f"t_{ket}{bra}", atomic_transition(space, ket, bra).matrix)
    return ops


def _dag(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def build_h_interaction(params: SystemParams, space: HilbertSpace) -> OperatorMatrix:
    """Interaction-picture Hamiltonian in the localized-mode basis.

    ``J(a1^dag a2 + h.c.) + V_dd |rr><rr| + [lambda sum_k |r>_k<g| a_k + h.c.]
    + lambda' sum_k a_k^dag a_k |g>_k<g| + lambda'' sum_k |r>_k<r|``
    """
    o = _ops(space)
    lam, lam_p, lam_pp = _lambdas(params)
    hop = params.J * o.a1.conj().T @ o.a2
    h = hop + _dag(hop)
    h = h + params.v_dd * o.proj_R
    drive = lam * (o.raise_1 @ o.a1 + o.raise_2 @ o.a2)
    h = h + drive + _dag(drive)
    h = h + lam_p * (o.n_a1 @ o.proj_gg_1 + o.n_a2 @ o.proj_gg_2)
    h = h + lam_pp * (o.proj_rr_1 + o.proj_rr_2)
    return OperatorMatrix(_symmetrize(h), hermitian=True)


def _symmetrize(h: np.ndarray) -> np.ndarray:
    # removes rounding asymmetry from products of dense matrices
    return 0.5 * (h + _dag(h))


def build_h_frame(params: SystemParams, space: HilbertSpace) -> OperatorMatrix:
    """Rotating-frame generator ``J(c1^dag c1 - c2^dag c2) + V_dd |R><R|``."""
    o = _ops(space)
    return OperatorMatrix(_symmetrize(params.J * (o.n_c1 - o.n_c2) + params.v_dd * o.proj_R),
                          hermitian=True)


def build_h_stark(params: SystemParams, space: HilbertSpace) -> OperatorMatrix:
    """Photon-number-dependent Stark shifts of the collective states."""
    o = _ops(space)
    lam, lam_p, lam_pp = _lambdas(params)
    n_tot = o.n_c1 + o.n_c2
    h = (0.5 * lam_p * n_tot + lam_pp * o.eye) @ (o.proj_S + o.proj_A)
    h = h + lam_p * n_tot @ o.proj_G + 2 * lam_pp * o.proj_R
    return OperatorMatrix(_symmetrize(h), hermitian=True)


def _transition_terms(params: SystemParams, space: HilbertSpace) -> list[tuple[float, np.ndarray]]:
    """Non-Hermitian halves of the transition Hamiltonian with their frame frequencies.

    Each entry ``(f, K)`` contributes ``exp(i f t) K + h.c.`` in the
    rotating frame.  The A-channel signs follow from expanding the
    localized form with ``|A> = (|g,r> - |r,g>)/sqrt2``.
    """
    o = _ops(space)
    lam, lam_p, _ = _lambdas(params)
    J, V = params.J, params.v_dd
    return [
        (-J, lam * o.c1 @ o.t_SG),
        (J, -lam * o.c2 @ o.t_AG),
        (V - J, lam * o.c1 @ o.t_RS),
        (V + J, lam * o.c2 @ o.t_RA),
        (2 * J, 0.5 * lam_p * _dag(o.c1) @ o.c2 @ o.t_SA),
        (-2 * J, 0.5 * lam_p * _dag(o.c2) @ o.c1 @ o.t_SA),
    ]


def build_h_collective(params: SystemParams, space: HilbertSpace) -> OperatorMatrix:
    """Interaction Hamiltonian assembled from collective states and normal modes."""
    h = build_h_frame(params, space).matrix + build_h_stark(params, space).matrix
    for _, k in _transition_terms(params, space):
        h = h + k + _dag(k)
    return OperatorMatrix(_symmetrize(h), hermitian=True)


class RotatingHamiltonian:
    """Time-dependent Hamiltonian ``H_tr(t) + H_st`` in the rotating frame.

    Terms sharing a frame frequency are merged and stored sparse, so
    :meth:`apply` costs one sparse product per call.
    """

    def __init__(self, params: SystemParams, space: HilbertSpace):
        self.params = params
        self.space = space
        self.static = build_h_stark(params, space).matrix
        merged: dict[float, np.ndarray] = {}
        for f, k in _transition_terms(params, space):
            merged[f] = merged.get(f, 0) + k
            merged[-f] = merged.get(-f, 0) + _dag(k)
        self.freqs = np.array(sorted(merged))
        self._dense = [merged[f] for f in self.freqs]
        self._stack = sparse.vstack(
            [sparse.csr_matrix(self.static)] + [sparse.csr_matrix(m) for m in self._dense]
        ).tocsr()
        self.norm_bound = float(
            np.linalg.norm(self.static, 2) + sum(np.linalg.norm(m, 2) for m in self._dense)
        )

    def __call__(self, t: float) -> np.ndarray:
        h = self.static.copy()
        for f, m in zip(self.freqs, self._dense):
            h += np.exp(1j * f * t) * m
        return h

    def apply(self, t: float, psi: np.ndarray) -> np.ndarray:
        parts = (self._stack @ psi).reshape(len(self.freqs) + 1, -1)
        phases = np.concatenate(([1.0], np.exp(1j * self.freqs * t)))
        return phases @ parts


def build_h_rotating(params: SystemParams, space: HilbertSpace, t: float) -> OperatorMatrix:
    """Rotating-frame Hamiltonian at time ``t``."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    return OperatorMatrix(RotatingHamiltonian(params, space)(t), hermitian=True)


def build_h_effective(
    params: SystemParams,
    space: HilbertSpace,
    branch: str = "c1",
    include_stark: bool = False,
    coupling: str = "xi_prime",
    include_neglected_stark: bool = False,
) -> OperatorMatrix:
    """Effective two-photon Hamiltonian ``xi(|G><R| c_b^dag^2 + |R><G| c_b^2)``.

    Args:
        branch: ``"c1"`` (resonant for ``V_dd = +2J``) or ``"c2"``
            (``V_dd = -2J``).
        include_stark: add the first-order Stark Hamiltonian.
        coupling: ``"xi_prime"`` uses ``lambda^2/(J +- lambda/2)`` with the
            sign set by the branch; ``"xi"`` uses ``lambda^2/J``.
        include_neglected_stark: add the second-order shifts
            ``(lambda^2/J)[(n_c1 - n_c2)|G><G| + |R><R|(c1 c1^dag + c2 c2^dag/3)]``
            (branch c1; the c2 branch uses the image under ``J -> -J``,
            ``c1 <-> c2``).
    """
    branch = _branch(branch)
    dc = derived_couplings(params)
    if coupling == "xi_prime":
        xi = dc.xi_prime(branch)
    elif coupling == "xi":
        xi = dc.xi
    else:
        raise ValueError(f"coupling must be 'xi' or 'xi_prime', got {coupling!r}")
    target = 2 * params.J if branch == "c1" else -2 * params.J
    if abs(params.v_dd - target) > 0.1 * abs(params.J):
        warnings.warn(
            f"V_dd = {params.v_dd:g} is far from the {branch} two-photon resonance {target:g}; "
            "the effective Hamiltonian does not describe this regime",
            ValidityWarning,
            stacklevel=2,
        )
    o = _ops(space)
    c = o.c1 if branch == "c1" else o.c2
    down = xi * o.t_RG @ c @ c
    h = down + _dag(down)
    if include_stark:
        h = h + build_h_stark(params, space).matrix
    if include_neglected_stark:
        # c c^dag written as n + 1 to stay clear of truncation edge effects
        if branch == "c1":
            h = h + dc.xi * ((o.n_c1 - o.n_c2) @ o.proj_G
                             + o.proj_R @ (o.n_c1 + o.eye + (o.n_c2 + o.eye) / 3))
        else:
            h = h + dc.xi * ((o.n_c1 - o.n_c2) @ o.proj_G
                             - o.proj_R @ (o.n_c2 + o.eye + (o.n_c1 + o.eye) / 3))
    return OperatorMatrix(_symmetrize(h), hermitian=True)


def build_h_nonhermitian(params: SystemParams, space: HilbertSpace) -> OperatorMatrix:
    """No-jump Hamiltonian ``H_I - (i kappa / 2)(a1^dag a1 + a2^dag a2)``."""
    o = _ops(space)
    h = build_h_interaction(params, space).matrix - 0.5j * params.kappa * (o.n_a1 + o.n_a2)
    return OperatorMatrix(h, hermitian=params.kappa == 0)


def resonance_vdd(params: SystemParams, n_photons: int, branch: str = "c1") -> float:
    """Two-photon resonant ``V_dd = +-2J + (n - 2) lambda`` for ``n`` photons in the branch mode.

    The condition holds for ``Omega = g`` (where the ground and doubly
    excited Stark shifts balance); a warning is issued otherwise.
    """
    branch = _branch(branch)
    if n_photons < 0:
        raise ValueError(f"n_photons must be >= 0, got {n_photons}")
    if not np.isclose(params.omega_l, params.g):
        warnings.warn(
            "resonance condition is only known for Omega = g; returned value is the Omega = g formula",
            ValidityWarning,
            stacklevel=2,
        )
    lam = _lambdas(params)[0]
    sign = 1.0 if branch == "c1" else -1.0
    return sign * 2 * params.J + (n_photons - 2) * lam


def dispersive_validity(params: SystemParams, n_c1: float, n_c2: float,
                        margin: float = 5.0) -> list[str]:
    """Check the dispersive conditions behind the effective Hamiltonian.

    Requires ``2J >= margin * sqrt(n_c1 n_c2) lambda'/2`` (up-conversion
    suppressed) and ``|J| >= margin * sqrt(n) lambda`` for the photon number
    of each populated normal mode.  Returns human-readable violations and
    emits a :class:`ValidityWarning` for each; never raises.
    """
    lam, lam_p, _ = _lambdas(params)
    problems = []
    conv = sqrt(max(n_c1, 0) * max(n_c2, 0)) * lam_p / 2
    if 2 * abs(params.J) < margin * conv:
        problems.append(f"up-conversion not suppressed: 2J = {2 * abs(params.J):g} vs "
                        f"sqrt(n_c1 n_c2) lambda'/2 = {conv:g}")
    for name, n in (("n_c1", n_c1), ("n_c2", n_c2)):
        drive = sqrt(max(n, 0)) * lam
        if abs(params.J) < margin * drive:
            problems.append(f"J = {abs(params.J):g} not >> sqrt({name}) lambda = {drive:g}")
    for msg in problems:
        warnings.warn(msg, ValidityWarning, stacklevel=2)
    return problems


@dataclass(frozen=True)
class DecoherenceEstimates:
    gamma_e: float
    error: float
    kappa: float
    t: float

    def survival(self, n_mean: float) -> float:
        """No-jump probability ``exp(-n_mean kappa t)``."""
        return exp(-n_mean * self.kappa * self.t)


def decoherence_estimates(params: SystemParams, t: float) -> DecoherenceEstimates:
    """Effective intermediate-level decay and accumulated error at time ``t``.

    ``gamma_e = (g^2 + Omega^2) gamma / delta^2`` and
    ``E = (gamma_e + gamma_r + kappa) t``.
    """
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    gamma_e = (params.g**2 + params.omega_l**2) / params.delta**2 * params.gamma
    return DecoherenceEstimates(
        gamma_e=gamma_e,
        error=(gamma_e + params.gamma_r + params.kappa) * t,
        kappa=params.kappa,
        t=t,
    )


def rydberg_decay_in_units_of_g(g_angular: float, rate: float = RYDBERG_DECAY_N70) -> float:
    """Convert a Rydberg decay rate in rad/s to units of a coupling ``g`` given in rad/s."""
    if g_angular <= 0:
        raise ValueError("g_angular must be positive")
    return rate / g_angular
