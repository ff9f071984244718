import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rydcav.hilbert import (
    HilbertSpace,
    OperatorMatrix,
    annihilation_local,
    annihilation_normal,
    atomic_operator,
    beam_splitter,
    commutator,
    exact_sector_mask,
    number_local,
    number_normal,
    photon_numbers,
    top_fock_population,
    total_excitation,
)
from rydcav.model import SystemParams, build_h_interaction

from oracles import basis_index


def ket(space, s1, s2, n1, n2):
    v = np.zeros(space.dim, dtype=complex)
    v[space.index(s1, s2, n1, n2)] = 1.0
    return v


class TestHilbertSpace:
    @pytest.mark.parametrize("n_max", [2, 3, 6, 10])
    def test_dimension(self, n_max):
        assert HilbertSpace(n_max).dim == 4 * (n_max + 1) ** 2

    @pytest.mark.parametrize("bad", [0, 1, -3])
    def test_rejects_small_cutoff(self, bad):
        with pytest.raises(ValueError):
            HilbertSpace(bad)

    def test_rejects_non_integer(self):
        with pytest.raises(TypeError):
            HilbertSpace(3.0)

    def test_index_matches_documented_ordering(self, space4):
        for s1 in (0, 1):
            for s2 in (0, 1):
                for n1 in range(5):
                    for n2 in range(5):
                        assert space4.index(s1, s2, n1, n2) == basis_index(4, s1, s2, n1, n2)

    def test_labels_roundtrip(self, space4):
        for i in range(space4.dim):
            assert space4.parse_label(space4.label(i)) == i
        assert space4.label(space4.index("g", "r", 1, 0)) == "g,r,1,0"

    def test_index_out_of_range(self, space4):
        with pytest.raises(ValueError):
            space4.index("g", "g", 5, 0)


class TestOperators:
    def test_a1_lowers_one_photon(self, space4):
        a1 = annihilation_local(space4, 1).matrix
        out = a1 @ ket(space4, "g", "g", 1, 0)
        np.testing.assert_allclose(out, ket(space4, "g", "g", 0, 0), atol=1e-15)

    def test_a1_kills_vacuum(self, space4):
        a1 = annihilation_local(space4, 1).matrix
        assert np.allclose(a1 @ ket(space4, "g", "g", 0, 0), 0)

    def test_number_expectation(self, space4):
        psi = ket(space4, "g", "g", 2, 1)
        assert np.vdot(psi, number_local(space4, 1).matrix @ psi).real == pytest.approx(2.0)

    def test_invalid_mode(self, space4):
        with pytest.raises(ValueError):
            annihilation_local(space4, 3)
        with pytest.raises(ValueError):
            annihilation_normal(space4, 0)

    def test_canonical_commutator_below_cutoff(self, space4):
        n1, n2 = photon_numbers(space4)
        keep = (n1 < space4.n_max) & (n2 < space4.n_max)
        for i in (1, 2):
            for j in (1, 2):
                a_i = annihilation_local(space4, i).matrix
                a_j = annihilation_local(space4, j).matrix
                c = commutator(a_i, a_j.conj().T)[np.ix_(keep, keep)]
                expected = np.eye(keep.sum()) * (i == j)
                np.testing.assert_allclose(c, expected, atol=1e-13)

    def test_normal_mode_commutator_in_exact_sector(self, space4):
        keep = exact_sector_mask(space4, space4.n_max - 1)
        c1 = annihilation_normal(space4, 1).matrix
        c = commutator(c1, c1.conj().T)[np.ix_(keep, keep)]
        np.testing.assert_allclose(c, np.eye(keep.sum()), atol=1e-13)

    def test_normal_number_on_localized_pair(self, space4):
        psi = ket(space4, "g", "g", 1, 1)
        assert np.vdot(psi, number_normal(space4, 1).matrix @ psi).real == pytest.approx(1.0)

    def test_total_number_invariant_under_rotation(self, space4):
        lhs = number_normal(space4, 1).matrix + number_normal(space4, 2).matrix
        rhs = number_local(space4, 1).matrix + number_local(space4, 2).matrix
        assert np.max(np.abs(lhs - rhs)) < 1e-14

    def test_disjoint_subsystems_commute(self, space4):
        ops = [
            annihilation_local(space4, 1).matrix,
            annihilation_local(space4, 2).matrix,
            atomic_operator(space4, "raise_1").matrix,
            atomic_operator(space4, "raise_2").matrix,
        ]
        for i in range(4):
            for j in range(i + 1, 4):
                assert np.max(np.abs(commutator(ops[i], ops[j]))) < 1e-13

    def test_operator_matrix_hermitian_flag(self):
        with pytest.raises(ValueError):
            OperatorMatrix(np.array([[0, 1], [0, 0]]), hermitian=True)
        m = OperatorMatrix(np.eye(2), hermitian=True)
        with pytest.raises(ValueError):
            m.matrix[0, 0] = 2.0


class TestAtomicOperators:
    def test_proj_s_on_gr(self, space4):
        psi = ket(space4, "g", "r", 0, 0)
        out = atomic_operator(space4, "proj_S").matrix @ psi
        s_ket = (ket(space4, "g", "r", 0, 0) + ket(space4, "r", "g", 0, 0)) / np.sqrt(2)
        assert np.vdot(s_ket, out) == pytest.approx(1 / np.sqrt(2))

    def test_projectors_complete_and_idempotent(self, space4):
        total = sum(atomic_operator(space4, f"proj_{x}").matrix for x in "GSAR")
        assert np.max(np.abs(total - np.eye(space4.dim))) < 1e-14
        for x in "GSAR":
            p = atomic_operator(space4, f"proj_{x}").matrix
            assert np.max(np.abs(p @ p - p)) < 1e-14

    def test_proj_r_eigenstate(self, space4):
        psi = ket(space4, "r", "r", 2, 1)
        np.testing.assert_allclose(atomic_operator(space4, "proj_R").matrix @ psi, psi)

    def test_unknown_kind(self, space4):
        with pytest.raises(ValueError):
            atomic_operator(space4, "proj_X")


class TestTotalExcitation:
    @pytest.mark.parametrize("atoms, n1, n2", [(("g", "g"), 1, 1), (("r", "r"), 0, 0)])
    def test_eigenvalue_two(self, space4, atoms, n1, n2):
        psi = ket(space4, *atoms, n1, n2)
        np.testing.assert_allclose(total_excitation(space4).matrix @ psi, 2 * psi)

    @given(
        omega=st.floats(0.1, 3.0),
        delta=st.floats(5.0, 40.0),
        J=st.floats(-15.0, 15.0),
        v_dd=st.floats(-40.0, 40.0),
    )
    def test_commutes_with_interaction(self, omega, delta, J, v_dd):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            p = SystemParams(omega_l=omega, delta=delta, J=J, v_dd=v_dd)
        space = HilbertSpace(3)
        c = commutator(total_excitation(space).matrix, build_h_interaction(p, space).matrix)
        assert np.max(np.abs(c)) < 1e-12


class TestBeamSplitter:
    @pytest.mark.parametrize("n_max", [2, 4, 6])
    def test_isometry(self, n_max):
        b = beam_splitter(n_max)
        np.testing.assert_allclose(b.T @ b, np.eye((n_max + 1) ** 2), atol=1e-12)

    def test_pair_state(self):
        # |1,1>_a = (|2,0>_c - |0,2>_c)/sqrt2
        b = beam_splitter(2)
        col = b[:, 1 * 3 + 1]
        d = 5
        expected = np.zeros(d * d)
        expected[2 * d + 0] = 1 / np.sqrt(2)
        expected[0 * d + 2] = -1 / np.sqrt(2)
        np.testing.assert_allclose(col, expected, atol=1e-14)


def test_top_fock_population(space4):
    psi = (ket(space4, "g", "g", 4, 0) + ket(space4, "g", "g", 0, 0)) / np.sqrt(2)
    assert top_fock_population(space4, psi) == pytest.approx(0.5)
    assert top_fock_population(space4, np.outer(psi, psi.conj())) == pytest.approx(0.5)
    assert top_fock_population(space4, ket(space4, "g", "g", 1, 1)) == 0.0
