"""Invariant suite run by ``rydcav validate``.

Each check returns a :class:`CheckResult` with the measured residual and
the threshold it is held to.  ``fault`` injects a deliberate defect so the
suite itself can be shown to catch failures.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import TimeGrid, evolve, evolve_td
from .hilbert import HilbertSpace, hermiticity_residual, total_excitation
from .model import (
    RotatingHamiltonian,
    SystemParams,
    build_h_collective,
    build_h_effective,
    build_h_frame,
    build_h_interaction,
    build_h_stark,
    derived_couplings,
)
from .states import coherent_product, localized_fock, normal_mode_fock
from .tomography import ModeDensity, position_distribution, reduce_to_mode, wigner

FAULTS = ("hermiticity",)


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    threshold: float
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual) and self.residual < self.threshold)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name:<24} residual={self.residual:.3e} threshold={self.threshold:.0e}"


def random_params(rng: np.random.Generator) -> SystemParams:
    """Dispersive-regime parameters with both signs of hopping and blockade shift."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return SystemParams(
            g=1.0,
            omega_l=float(rng.uniform(0.3, 2.0)),
            delta=float(rng.choice([-1, 1]) * rng.uniform(8.0, 30.0)),
            J=float(rng.choice([-1, 1]) * rng.uniform(0.5, 15.0)),
            v_dd=float(rng.uniform(-40.0, 40.0)),
        )


def _inject(h: np.ndarray, fault: str | None) -> np.ndarray:
    if fault == "hermiticity":
        h = h.copy()
        h[0, 1] += 1e-3
    return h


def check_hermiticity(fault: str | None = None, n_sets: int = 10, seed: int = 1) -> float:
    rng = np.random.default_rng(seed)
    space = HilbertSpace(4)
    worst = 0.0
    for _ in range(n_sets):
        p = random_params(rng)
        mats = [build_h_interaction(p, space), build_h_collective(p, space),
                build_h_frame(p, space), build_h_stark(p, space)]
        for m in mats:
            worst = max(worst, hermiticity_residual(_inject(m.matrix, fault)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for branch in ("c1", "c2"):
            h = build_h_effective(SystemParams(), space, branch=branch, include_stark=True,
                                  include_neglected_stark=True)
            worst = max(worst, hermiticity_residual(h.matrix))
    return worst


def check_builder_equivalence(n_sets: int = 50, seed: int = 2) -> float:
    rng = np.random.default_rng(seed)
    space = HilbertSpace(4)
    worst = 0.0
    for _ in range(n_sets):
        p = random_params(rng)
        diff = build_h_interaction(p, space).matrix - build_h_collective(p, space).matrix
        worst = max(worst, float(np.max(np.abs(diff))))
    return worst


def _fig2_run(n_samples: int = 2001):
    p = SystemParams(J=10.0, v_dd=20.0)
    space = HilbertSpace(6)
    period = math.pi / (math.sqrt(2) * derived_couplings(p).xi_prime_plus)
    ts = evolve(build_h_interaction(p, space), localized_fock(space, "G", 1, 1),
                TimeGrid(period, n_samples=n_samples), store_states=True)
    return p, space, ts


def check_norm_conservation() -> float:
    _, _, ts = _fig2_run()
    return float(np.max(np.abs(ts["norm"] - 1.0)))


def check_excitation_conservation() -> float:
    _, space, ts = _fig2_run()
    n_op = total_excitation(space).matrix
    vals = np.real(np.einsum("ti,ij,tj->t", ts.states.conj(), n_op, ts.states))
    return float(np.max(np.abs(vals - vals[0])))


def check_frame_equivalence(t_end: float = 60.0, n_max: int = 8) -> float:
    """Lab-frame interaction evolution versus the rotating-frame RK4 run.

    The default cutoff keeps the coherent tail well away from the truncation
    edge, where the per-mode cutoff breaks the normal-mode frame identity.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = SystemParams(J=0.998, v_dd=2.0)
    space = HilbertSpace(n_max)
    psi0 = coherent_product(space, "G", 1 / math.sqrt(2), 1 / math.sqrt(2), tail_tol=1e-3)
    grid = TimeGrid(t_end, n_samples=301)
    lab = evolve(build_h_interaction(p, space), psi0, grid)
    rot = evolve_td(RotatingHamiltonian(p, space), psi0, grid)
    return float(max(np.max(np.abs(lab["P_R"] - rot["P_R"])),
                     np.max(np.abs(lab["n_c1"] - rot["n_c1"]))))


def check_effective_vs_full() -> float:
    """Two-photon effective model (with the second-order shifts) against the full model, one period."""
    worst = 0.0
    for v_dd, branch in ((20.0, "c1"), (-20.0, "c2")):
        p = SystemParams(J=10.0, v_dd=v_dd)
        space = HilbertSpace(6)
        period = math.pi / (math.sqrt(2) * abs(derived_couplings(p).xi_prime(branch)))
        grid = TimeGrid(period, n_samples=1001)
        psi0 = localized_fock(space, "G", 1, 1)
        full = evolve(build_h_interaction(p, space), psi0, grid)["P_R"]
        eff = evolve(build_h_effective(p, space, branch=branch, include_neglected_stark=True),
                     psi0, grid)["P_R"]
        worst = max(worst, float(np.max(np.abs(full - eff))))
    return worst


def _fock_density(n: int, size: int = 6) -> ModeDensity:
    rho = np.zeros((size, size))
    rho[n, n] = 1.0
    return ModeDensity(rho)


def check_wigner_normalization() -> float:
    space = HilbertSpace(4)
    rhos = [_fock_density(n) for n in range(3)]
    rhos.append(reduce_to_mode(normal_mode_fock(space, "G", 2, 1), "c1"))
    rhos.append(reduce_to_mode(coherent_product(space, "G", 0.7, 0.7, tail_tol=1e-2), "c1"))
    return max(abs(wigner(r, norm_tol=np.inf).integral() - r.trace()) for r in rhos)


def check_wigner_marginals() -> float:
    worst = 0.0
    for n in (0, 1):
        rho = _fock_density(n)
        grid = wigner(rho)
        worst = max(worst, float(np.max(np.abs(grid.x_marginal() - position_distribution(rho, grid.x)))))
    return worst


CHECKS = (
    ("hermiticity", check_hermiticity, 1e-12),
    ("builder_equivalence", check_builder_equivalence, 1e-12),
    ("norm_conservation", check_norm_conservation, 1e-9),
    ("excitation_conservation", check_excitation_conservation, 1e-9),
    ("frame_equivalence", check_frame_equivalence, 1e-4),
    ("effective_vs_full", check_effective_vs_full, 0.05),
    ("wigner_normalization", check_wigner_normalization, 0.01),
    ("wigner_marginals", check_wigner_marginals, 1e-3),
)


def run_checks(fault: str | None = None, only: tuple[str, ...] | None = None) -> list[CheckResult]:
    """Run the suite (optionally a subset by name) and return one result per check."""
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}; known: {', '.join(FAULTS)}")
    results = []
    for name, fn, threshold in CHECKS:
        if only is not None and name not in only:
            continue
        start = time.perf_counter()
        residual = fn(fault) if name == "hermiticity" else fn()
        results.append(CheckResult(name, float(residual), threshold, time.perf_counter() - start))
    return results
