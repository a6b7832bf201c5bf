import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from usitir.control import (
    ControlSet,
    c2,
    collective_z,
    control_set_from_label,
    ct_search_generic,
    ct_solve_c2,
    custom,
    is_dmc,
    lie_closure_basis,
    lie_closure_dim,
    local_common,
    local_independent,
    spectral_residual,
    spectrum_shift_match,
    unitarily_equivalent,
)
from usitir.errors import DimensionMismatchError, IncompatibleControlSetError, PureLimitError
from usitir.operators import SIGMA, DensityMatrix, HermitianOperator, HilbertSpace, ket_state, matrix_function
from usitir.oracle import random_density_matrix, random_unitary
from usitir.thermo import ThermalContext, gibbs_state, partition_function


def gibbs_of_targets(targets, beta=1.0):
    return DensityMatrix.diagonal(np.exp(-beta * np.asarray(targets)) / np.exp(-beta * np.asarray(targets)).sum())


class TestNamedSets:
    def test_sizes(self):
        assert len(local_independent(3).generators) == 9
        assert len(local_common(2).generators) == 3
        assert len(collective_z(4).generators) == 1
        assert len(c2().generators) == 7

    def test_boson_sets_live_on_occupation_space(self):
        cs = local_common(3, "boson")
        assert cs.dim == 4
        np.testing.assert_allclose(collective_z(3, "boson").generators[0].matrix, np.diag([-3, -1, 1, 3]))

    def test_labels(self):
        assert control_set_from_label("L2").label == "L2"
        assert control_set_from_label("f_3", "boson").space == HilbertSpace(3, 2, "boson")
        assert control_set_from_label("C2").name == "C_2"

    @pytest.mark.parametrize("label,stats", [("X2", "distinguishable"), ("C3", "distinguishable"),
                                             ("L2", "boson"), ("C2", "boson")])
    def test_bad_labels(self, label, stats):
        with pytest.raises(IncompatibleControlSetError):
            control_set_from_label(label, stats)

    def test_generator_dimension_checked(self):
        with pytest.raises(DimensionMismatchError):
            ControlSet("custom", (SIGMA["z"],), HilbertSpace.qubits(2))


class TestLieClosure:
    @pytest.mark.parametrize("cs,dim", [(c2(), 15), (local_independent(2), 6), (local_common(2), 3),
                                        (collective_z(1), 1), (collective_z(2), 1), (collective_z(3), 1),
                                        (local_independent(1), 3), (local_independent(3), 9)])
    def test_dimensions(self, cs, dim):
        assert lie_closure_dim(cs) == dim

    def test_boson_sets(self):
        assert lie_closure_dim(collective_z(3, "boson")) == 1
        assert lie_closure_dim(local_common(3, "boson")) == 3

    def test_dmc_verdicts(self):
        assert is_dmc(c2())
        assert is_dmc(local_independent(1))
        for n in (2, 3):
            assert not is_dmc(local_independent(n))
            assert not is_dmc(local_common(n))
            assert not is_dmc(collective_z(n))

    def test_identity_offsets_do_not_matter(self, rng):
        base = c2()
        shifted = custom([g.matrix + rng.normal() * np.eye(4) for g in base.generators])
        assert lie_closure_dim(shifted) == 15
        shifted_l2 = custom([g.matrix + 3.0 * np.eye(4) for g in local_independent(2).generators])
        assert lie_closure_dim(shifted_l2) == 6

    def test_basis_is_orthonormal_and_traceless(self):
        basis = [b.matrix for b in lie_closure_basis(c2())]
        gram = np.array([[np.trace(a.conj().T @ b).real for b in basis] for a in basis])
        np.testing.assert_allclose(gram, np.eye(15), atol=1e-9)
        assert all(abs(np.trace(b)) < 1e-12 for b in basis)

    def test_heisenberg_alone_is_abelian(self):
        assert lie_closure_dim(custom([c2().generators[6].matrix])) == 1


class TestUnitaryEquivalence:
    def test_conjugation(self, rng):
        for _ in range(20):
            rho = random_density_matrix(4, seed=rng)
            assert unitarily_equivalent(rho, rho.conjugate_by(random_unitary(4, rng)))

    def test_pure_vs_mixed(self):
        assert not unitarily_equivalent(ket_state("0"), DensityMatrix.maximally_mixed(2))

    def test_reflexive(self, rng):
        rho = random_density_matrix(3, seed=rng)
        assert unitarily_equivalent(rho, rho)


class TestSpectrumShift:
    def test_gibbs_state(self, rng):
        m = rng.normal(size=(4, 4))
        h = HermitianOperator(m + m.T)
        beta = 0.7
        rho = gibbs_state(h, ThermalContext(beta))
        s = spectrum_shift_match(rho, h, ThermalContext(beta))
        assert s == pytest.approx(-math.log(partition_function(h, ThermalContext(beta))) / beta, abs=1e-9)

    @pytest.mark.parametrize("dim", [2, 4])
    def test_maximally_mixed(self, dim):
        # H = 0 and -ln(I/D) = ln D: the shift is -ln D
        s = spectrum_shift_match(DensityMatrix.maximally_mixed(dim), np.zeros((dim, dim)))
        assert s == pytest.approx(-math.log(dim), abs=1e-12)

    def test_construct_and_recover(self, rng):
        rho = random_density_matrix(4, seed=rng)
        h = HermitianOperator(-matrix_function(rho, np.log).matrix + 3 * np.eye(4))
        assert spectrum_shift_match(rho, h) == pytest.approx(3.0, abs=1e-9)

    def test_no_match(self):
        rho = DensityMatrix.diagonal([0.5, 0.3, 0.2])
        assert spectrum_shift_match(rho, np.diag([0.0, 1.0, 5.0])) is None

    def test_pure_limit(self):
        with pytest.raises(PureLimitError):
            spectrum_shift_match(ket_state("0"), SIGMA["z"])


class TestCtSolveC2:
    def test_documented_targets(self):
        rho = gibbs_of_targets([0.1, 0.2, 0.3, 0.4])
        sol = ct_solve_c2(rho)
        log_z = math.log(np.exp(-np.array([0.1, 0.2, 0.3, 0.4])).sum())
        p = sol.parameters
        assert p["c4"] == pytest.approx(0.2 + log_z, abs=1e-12)
        assert p["c3"] == pytest.approx(0.0, abs=1e-12)
        assert sorted([p["c1"], p["c2"]]) == pytest.approx([-0.1, 0.2], abs=1e-12)
        energies = np.linalg.eigvalsh(sol.achieved_hamiltonian.matrix) - log_z
        np.testing.assert_allclose(energies, [0.1, 0.2, 0.3, 0.4], atol=1e-12)

    def test_maximally_mixed(self):
        sol = ct_solve_c2(DensityMatrix.maximally_mixed(4))
        p = sol.parameters
        assert p["c1"] == p["c2"] == p["c3"] == 0.0
        assert sol.spectral_residual == pytest.approx(0.0, abs=1e-15)

    def test_coefficients_rebuild_hamiltonian(self, rng):
        rho = random_density_matrix(4, seed=rng)
        sol = ct_solve_c2(rho)
        gens = [g.matrix for g in c2().generators] + [np.eye(4)]
        rebuilt = sum(c * g for c, g in zip(sol.coefficients, gens))
        np.testing.assert_allclose(rebuilt, sol.achieved_hamiltonian.matrix, atol=1e-12)

    def test_random_states(self):
        for seed in range(100):
            rho = random_density_matrix(4, seed=seed)
            sol = ct_solve_c2(rho, ThermalContext(1.0 + seed % 3))
            assert sol.spectral_residual <= 1e-9
            assert unitarily_equivalent(gibbs_state(sol.achieved_hamiltonian, ThermalContext(1.0 + seed % 3)), rho)

    def test_pure_limit(self):
        with pytest.raises(PureLimitError):
            ct_solve_c2(ket_state("00"))

    def test_wrong_dimension(self):
        with pytest.raises(DimensionMismatchError):
            ct_solve_c2(DensityMatrix.maximally_mixed(2))

    @settings(max_examples=200)
    @given(st.lists(st.floats(1e-6, 1.0), min_size=4, max_size=4))
    def test_any_spectrum(self, weights):
        w = np.array(weights) / sum(weights)
        sol = ct_solve_c2(DensityMatrix.diagonal(w))
        assert sol.spectral_residual <= 1e-9


class TestCtSearch:
    def test_finds_c2_solution(self):
        rho = random_density_matrix(4, seed=3)
        res = ct_search_generic(c2(), rho)
        assert res.solution is not None
        assert res.best_residual <= 1e-6
        assert unitarily_equivalent(gibbs_state(res.solution.achieved_hamiltonian), rho, tol=1e-6)

    def test_collective_z_cannot_thermalize_generic_spectrum(self):
        rho = DensityMatrix.diagonal([0.5, 0.3, 0.15, 0.05])
        res = ct_search_generic(collective_z(2), rho)
        assert res.solution is None
        # one-parameter scan: Gibbs states of h F_2 have spectrum {e^-2h, 1, 1, e^2h}/Z
        f = np.array([2.0, 0.0, 0.0, -2.0])
        scan = min(
            spectral_residual(HermitianOperator(np.diag(-h * f)), rho) for h in np.linspace(-5, 5, 20001)
        )
        assert scan > 1e-3
        assert res.best_residual >= scan - 1e-6

    def test_single_qubit_with_z_control(self, rng):
        for _ in range(5):
            rho = random_density_matrix(2, seed=rng)
            res = ct_search_generic(custom([SIGMA["z"]]), rho)
            assert res.solution is not None
            # bisection oracle: the field solving tanh(h) = polarization
            lam = rho.eigenvalues()
            h = math.atanh(lam[1] - lam[0])
            ref = gibbs_state(-h * SIGMA["z"])
            assert unitarily_equivalent(gibbs_state(res.solution.achieved_hamiltonian), ref, tol=1e-6)

    def test_pure_limit(self):
        with pytest.raises(PureLimitError):
            ct_search_generic(c2(), ket_state("00"))
