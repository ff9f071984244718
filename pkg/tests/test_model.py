import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from rydcav.hilbert import HilbertSpace, atomic_ket, exact_sector_mask, hermiticity_residual, number_local
from rydcav.model import (
    RotatingHamiltonian,
    SystemParams,
    ValidityWarning,
    build_h_collective,
    build_h_effective,
    build_h_frame,
    build_h_interaction,
    build_h_nonhermitian,
    build_h_rotating,
    build_h_stark,
    decoherence_estimates,
    derived_couplings,
    dispersive_validity,
    resonance_vdd,
    rydberg_decay_in_units_of_g,
)
from rydcav.states import localized_fock, normal_mode_fock

from oracles import interaction_by_loops

params_strategy = st.builds(
    lambda omega, delta, J, v_dd: (omega, delta, J, v_dd),
    st.floats(0.2, 3.0),
    st.floats(5.0, 40.0) | st.floats(-40.0, -5.0),
    st.floats(0.3, 15.0) | st.floats(-15.0, -0.3),
    st.floats(-40.0, 40.0),
)


def make(omega, delta, J, v_dd, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return SystemParams(omega_l=omega, delta=delta, J=J, v_dd=v_dd, **kw)


def amp(space, bra, op, ket):
    bra = getattr(bra, "data", bra)
    ket = getattr(ket, "data", ket)
    return complex(np.vdot(bra, op.matrix @ ket))


def raw_ket(space, atoms, field):
    """Unphased ``|atoms> (x) sum c |n1, n2>_a`` from a ``{(n1, n2): c}`` dict."""
    f = np.zeros(space.fock_dim**2, dtype=complex)
    for (n1, n2), c in field.items():
        f[n1 * space.fock_dim + n2] = c
    return np.kron(atomic_ket(atoms), f)


class TestSystemParams:
    def test_defaults_are_fig2(self):
        p = SystemParams()
        assert (p.g, p.omega_l, p.delta, p.J, p.v_dd) == (1.0, 1.0, 10.0, 10.0, 20.0)

    @pytest.mark.parametrize("kw", [{"g": 0.0}, {"delta": 0.0}, {"kappa": -1e-3}, {"gamma_r": -1.0},
                                    {"J": float("nan")}])
    def test_rejects_invalid(self, kw):
        with pytest.raises(ValueError):
            SystemParams(**kw)

    def test_rejects_non_numbers(self):
        with pytest.raises(TypeError):
            SystemParams(J="10")

    def test_warns_outside_elimination_regime(self):
        with pytest.warns(ValidityWarning):
            SystemParams(delta=3.0)


class TestDerivedCouplings:
    def test_unit_hopping(self):
        dc = derived_couplings(SystemParams(J=1.0))
        assert dc.lambda_ == pytest.approx(0.1)
        assert dc.xi == pytest.approx(0.01)
        assert dc.xi_prime_plus == pytest.approx(0.01 / 1.05)
        assert dc.xi_prime_plus == pytest.approx(0.0095238, abs=1e-7)

    def test_fig2(self):
        dc = derived_couplings(SystemParams(J=10.0))
        assert dc.lambda_ == pytest.approx(0.1)
        assert dc.xi == pytest.approx(0.001)
        assert dc.xi_prime("c1") == dc.xi_prime_plus
        assert dc.xi_prime("c2") == dc.xi_prime_minus

    def test_zero_hopping(self):
        with pytest.raises(ValueError):
            derived_couplings(SystemParams(J=0.0))

    @given(params_strategy)
    def test_lambda_identity(self, args):
        dc = derived_couplings(make(*args))
        assert dc.lambda_**2 == pytest.approx(dc.lambda_p * dc.lambda_pp, rel=1e-12)

    @given(params_strategy)
    def test_positive_above_half_lambda(self, args):
        omega, delta, J, v_dd = args
        dc = derived_couplings(make(omega, delta, abs(J), v_dd))
        if abs(J) > dc.lambda_ / 2 and dc.lambda_ > 0:
            assert dc.xi > 0 and dc.xi_prime_plus > 0 and dc.xi_prime_minus > 0


class TestInteraction:
    def test_matches_loop_oracle(self, space4):
        p = SystemParams(omega_l=1.3, delta=12.0, J=-3.1, v_dd=7.5)
        ref = interaction_by_loops(4, 1.0, 1.3, 12.0, -3.1, 7.5)
        assert np.max(np.abs(build_h_interaction(p, space4).matrix - ref)) < 1e-14

    def test_diagonal_elements(self, space4, fig2_params):
        h = build_h_interaction(fig2_params, space4)
        dc = derived_couplings(fig2_params)
        g11 = localized_fock(space4, "G", 1, 1)
        r00 = localized_fock(space4, "R", 0, 0)
        assert amp(space4, g11, h, g11).real == pytest.approx(2 * dc.lambda_p)
        assert amp(space4, r00, h, r00).real == pytest.approx(fig2_params.v_dd + 2 * dc.lambda_pp)

    @given(params_strategy)
    def test_hermitian_builders(self, args):
        p = make(*args)
        space = HilbertSpace(3)
        for b in (build_h_interaction, build_h_collective, build_h_frame, build_h_stark):
            assert hermiticity_residual(b(p, space).matrix) < 1e-12
        assert hermiticity_residual(build_h_rotating(p, space, 0.37 / abs(p.J)).matrix) < 1e-12


class TestCollective:
    @given(params_strategy)
    def test_equals_interaction(self, args):
        p = make(*args)
        space = HilbertSpace(4)
        diff = build_h_collective(p, space).matrix - build_h_interaction(p, space).matrix
        assert np.max(np.abs(diff)) < 1e-12

    def test_s_channel_element(self, space4, fig2_params):
        h = build_h_collective(fig2_params, space4)
        lam = derived_couplings(fig2_params).lambda_
        r2 = 1 / math.sqrt(2)
        bra = raw_ket(space4, "S", {(1, 0): r2, (0, 1): r2})
        ket = raw_ket(space4, "G", {(2, 0): 0.5, (1, 1): r2, (0, 2): 0.5})
        assert amp(space4, bra, h, ket) == pytest.approx(lam * math.sqrt(2))

    def test_a_channel_sign(self, space4, fig2_params):
        # <A, 0, 1_c2| H |G, 0, 2_c2> carries the opposite sign of the S channel
        h = build_h_collective(fig2_params, space4)
        lam = derived_couplings(fig2_params).lambda_
        r2 = 1 / math.sqrt(2)
        bra = raw_ket(space4, "A", {(1, 0): r2, (0, 1): -r2})  # |A> c2^dag |0>
        ket = raw_ket(space4, "G", {(2, 0): 0.5, (1, 1): -r2, (0, 2): 0.5})  # |G> c2^dag^2/sqrt2 |0>
        assert amp(space4, bra, h, ket) == pytest.approx(-lam * math.sqrt(2))

    def test_blockade_diagonal(self, space4, fig2_params):
        h = build_h_collective(fig2_params, space4)
        r00 = localized_fock(space4, "R", 0, 0)
        dc = derived_couplings(fig2_params)
        assert amp(space4, r00, h, r00).real == pytest.approx(fig2_params.v_dd + 2 * dc.lambda_pp)

    def test_hopping_spectrum(self, space4):
        p = SystemParams(J=2.5, v_dd=0.0)
        keep = exact_sector_mask(space4)
        h = build_h_frame(p, space4).matrix[np.ix_(keep, keep)]
        evals = np.sort(np.linalg.eigvalsh(h))
        expected = sorted(2.5 * (m1 - m2) for _ in range(4) for m1 in range(5) for m2 in range(5)
                          if m1 + m2 <= 4)
        np.testing.assert_allclose(evals, expected, atol=1e-12)


class TestRotating:
    def test_zero_time(self, space4, fig2_params):
        h0 = build_h_rotating(fig2_params, space4, 0.0).matrix
        ref = build_h_collective(fig2_params, space4).matrix - build_h_frame(fig2_params, space4).matrix
        assert np.max(np.abs(h0 - ref)) < 1e-13

    def test_negative_time(self, space4, fig2_params):
        with pytest.raises(ValueError):
            build_h_rotating(fig2_params, space4, -1.0)

    @pytest.mark.parametrize("t", [0.0, 0.137, 1.9, 13.3])
    def test_frame_transform_oracle(self, space4, t):
        # U^dag (H_I - H0) U with U = exp(-i H0 t), compared on the block
        # where the per-mode cutoff does not disturb the normal-mode algebra
        p = SystemParams(omega_l=1.2, delta=9.0, J=1.7, v_dd=3.1)
        h0 = build_h_frame(p, space4).matrix
        u = expm(-1j * h0 * t)
        lhs = u.conj().T @ (build_h_interaction(p, space4).matrix - h0) @ u
        rhs = build_h_rotating(p, space4, t).matrix
        keep = exact_sector_mask(space4)
        diff = (lhs - rhs)[np.ix_(keep, keep)]
        assert np.max(np.abs(diff)) < 1e-12
        np.testing.assert_allclose(np.linalg.eigvalsh(lhs[np.ix_(keep, keep)]),
                                   np.linalg.eigvalsh(rhs[np.ix_(keep, keep)]), atol=1e-12)

    def test_apply_matches_dense(self, space4, fig2_params):
        rh = RotatingHamiltonian(fig2_params, space4)
        rng = np.random.default_rng(3)
        psi = rng.normal(size=space4.dim) + 1j * rng.normal(size=space4.dim)
        for t in (0.0, 0.4, 7.0):
            np.testing.assert_allclose(rh.apply(t, psi), rh(t) @ psi, atol=1e-12)


class TestEffective:
    def test_two_photon_element(self, space4, fig2_params):
        h = build_h_effective(fig2_params, space4, coupling="xi")
        xi = derived_couplings(fig2_params).xi
        val = amp(space4, normal_mode_fock(space4, "R", 0, 0), h, normal_mode_fock(space4, "G", 2, 0))
        assert val == pytest.approx(xi * math.sqrt(2))

    def test_default_coupling_is_corrected(self, space4, fig2_params):
        h = build_h_effective(fig2_params, space4)
        xi_p = derived_couplings(fig2_params).xi_prime_plus
        val = amp(space4, normal_mode_fock(space4, "R", 0, 0), h, normal_mode_fock(space4, "G", 2, 0))
        assert val == pytest.approx(xi_p * math.sqrt(2))

    def test_wrong_branch_decouples(self, space4, fig2_params):
        h = build_h_effective(fig2_params, space4, branch="c1")
        val = amp(space4, normal_mode_fock(space4, "R", 0, 0), h, normal_mode_fock(space4, "G", 0, 2))
        assert abs(val) < 1e-15

    def test_branch_selectivity(self, space4, fig2_params):
        # no G <-> R element that changes the c2 photon number
        h = build_h_effective(fig2_params, space4, branch="c1", include_stark=True)
        for m1 in range(3):
            for m2 in range(1, 3):
                if m1 + m2 > 4:
                    continue
                g = normal_mode_fock(space4, "G", m1 + 2 if m1 + 2 + m2 <= 4 else m1, m2)
                for k2 in range(0, 3):
                    if k2 == m2 or k2 > 4:
                        continue
                    r = normal_mode_fock(space4, "R", 0, k2)
                    assert abs(amp(space4, r, h, g)) < 1e-15

    def test_invalid_branch(self, space4, fig2_params):
        with pytest.raises(ValueError):
            build_h_effective(fig2_params, space4, branch="c3")

    def test_off_resonance_warns(self, space4):
        with pytest.warns(ValidityWarning):
            build_h_effective(SystemParams(v_dd=0.0), space4)

    def test_stark_flag_adds_stark(self, space4, fig2_params):
        bare = build_h_effective(fig2_params, space4).matrix
        full = build_h_effective(fig2_params, space4, include_stark=True).matrix
        np.testing.assert_allclose(full - bare, build_h_stark(fig2_params, space4).matrix, atol=1e-14)

    def test_neglected_stark_diagonal(self, space4, fig2_params):
        h = build_h_effective(fig2_params, space4, include_neglected_stark=True)
        xi = derived_couplings(fig2_params).xi
        r = normal_mode_fock(space4, "R", 1, 0)
        # xi [ (n_c1 + 1) + (n_c2 + 1)/3 ] on |R, 1, 0>_c
        assert amp(space4, r, h, r).real == pytest.approx(xi * (2 + 1 / 3))
        g = normal_mode_fock(space4, "G", 1, 2)
        assert amp(space4, g, h, g).real == pytest.approx(xi * (1 - 2))


class TestNonHermitian:
    def test_zero_loss_is_interaction(self, space4, fig2_params):
        h = build_h_nonhermitian(fig2_params, space4)
        assert h.hermitian
        assert np.array_equal(h.matrix, build_h_interaction(fig2_params, space4).matrix)

    def test_antihermitian_part(self, space4):
        p = SystemParams(kappa=0.02)
        h = build_h_nonhermitian(p, space4)
        assert not h.hermitian
        anti = (h.matrix - h.matrix.conj().T) / 2
        expected = -0.5j * 0.02 * (number_local(space4, 1).matrix + number_local(space4, 2).matrix)
        assert np.max(np.abs(anti - expected)) < 1e-15


class TestResonance:
    @pytest.mark.parametrize("n, branch, expected", [(2, "c1", 20.0), (4, "c1", 20.2), (2, "c2", -20.0),
                                                     (4, "c2", -19.8), (0, "c1", 19.8)])
    def test_values(self, fig2_params, n, branch, expected):
        assert resonance_vdd(fig2_params, n, branch) == pytest.approx(expected)

    def test_warns_for_unequal_couplings(self):
        with pytest.warns(ValidityWarning):
            resonance_vdd(SystemParams(omega_l=2.0, delta=20.0), 2)

    def test_negative_photons(self, fig2_params):
        with pytest.raises(ValueError):
            resonance_vdd(fig2_params, -1)


class TestValidity:
    def test_fig2_regime_clean(self, fig2_params):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert dispersive_validity(fig2_params, 2, 0) == []

    def test_small_hopping_flagged(self):
        with pytest.warns(ValidityWarning):
            problems = dispersive_validity(SystemParams(J=0.2), 2, 2)
        assert problems


class TestDecoherence:
    def test_effective_decay(self):
        est = decoherence_estimates(SystemParams(gamma=1e-3), 0.0)
        assert est.gamma_e == pytest.approx(2e-5, rel=1e-12)

    def test_survival(self):
        est = decoherence_estimates(SystemParams(kappa=1e-3), 111.0)
        assert est.survival(1.0) == pytest.approx(math.exp(-0.111))
        assert est.survival(1.0) == pytest.approx(0.895, abs=5e-4)

    def test_error_budget(self):
        gamma_r = rydberg_decay_in_units_of_g(2 * math.pi * 50e6)
        assert gamma_r == pytest.approx(1.1e-5)
        est = decoherence_estimates(SystemParams(kappa=1e-3, gamma=1e-3, gamma_r=gamma_r), 111.07)
        assert est.error == pytest.approx((2e-5 + 1.1e-5 + 1e-3) * 111.07)

    def test_negative_time(self):
        with pytest.raises(ValueError):
            decoherence_estimates(SystemParams(), -1.0)
