import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from usitir.control import c2, collective_z, control_set_from_label, ct_solve_c2, local_common, local_independent
from usitir.cycle import (
    CSV_COLUMNS,
    EngineSpec,
    brillouin_mu,
    closed_form_cycle_work,
    feedback_branches,
    feedback_measurement,
    optimal_bf,
    polarized_qubit,
    run_1mqihe,
    run_1mqihe_feedback,
    run_2mqihe,
    usitir_stage_machine,
)
from usitir.errors import DomainError, InvalidStateError, PureLimitError
from usitir.operators import DensityMatrix, HilbertSpace, bell_state, ket_state, werner_state
from usitir.oracle import random_density_matrix
from usitir.thermo import LN2, ThermalContext, free_energy, mean_energy, gibbs_state, von_neumann_entropy
from usitir.work import extractable_work

# mpmath values
TANH_1 = 0.761594156
ARTANH_HALF = 0.549306144
FEE_AT_UNIT_FIELD = 0.327813325
WERNER_HALF_W = 0.312751515


def spec(c=None, **kw):
    return EngineSpec(ancilla_state=None if c is None else polarized_qubit(c), **kw)


class TestClosedForms:
    def test_brillouin(self):
        assert brillouin_mu(0.0, 1.0) == 0.0
        assert brillouin_mu(1e3, 1.0) == pytest.approx(1.0)
        assert brillouin_mu(1.0, 1.0) == pytest.approx(TANH_1, abs=1e-9)
        assert brillouin_mu(1.0, 1.0, mu_m=2.0) == pytest.approx(2 * TANH_1, abs=1e-9)
        np.testing.assert_allclose(brillouin_mu(np.array([0.0, 1.0]), 1.0), [0.0, TANH_1], atol=1e-9)

    def test_optimal_bf(self):
        assert optimal_bf(0.0, 1.0) == 0.0
        assert optimal_bf(math.tanh(1.0), 1.0) == pytest.approx(1.0, abs=1e-12)
        assert optimal_bf(0.5, 2.0) == pytest.approx(ARTANH_HALF / 2, abs=1e-9)

    def test_optimal_bf_limits(self):
        with pytest.raises(PureLimitError):
            optimal_bf(1.0, 1.0)
        with pytest.raises(DomainError):
            optimal_bf(1.2, 1.0)
        with pytest.raises(DomainError):
            optimal_bf(-0.1, 1.0)

    def test_depolarized(self):
        cf = closed_form_cycle_work(0.0)
        assert cf.ledger_form == 0.0 and cf.entropy_form == pytest.approx(0.0, abs=1e-15)

    def test_unit_field(self):
        cf = closed_form_cycle_work(math.tanh(1.0))
        assert cf.ledger_form == pytest.approx(FEE_AT_UNIT_FIELD, abs=1e-9)
        assert cf.entropy_form == pytest.approx(FEE_AT_UNIT_FIELD, abs=1e-9)

    def test_pure_limit(self):
        assert closed_form_cycle_work(1 - 1e-12).ledger_form == pytest.approx(LN2, abs=1e-9)

    @given(st.floats(0.0, 0.999999))
    def test_forms_agree(self, c):
        cf = closed_form_cycle_work(c)
        assert abs(cf.ledger_form - cf.entropy_form) <= 1e-10


class TestOneQubitEngine:
    def test_matches_closed_form(self):
        trace = run_1mqihe(spec(0.9, steps=10_000))
        assert trace.relative_deviation <= 1e-4
        assert trace.closed_form_work == pytest.approx(closed_form_cycle_work(0.9).ledger_form, abs=1e-12)

    def test_depolarized_is_exactly_zero(self):
        assert run_1mqihe(spec(0.0)).final_work == 0.0

    def test_clamped_pure(self):
        trace = run_1mqihe(EngineSpec(ancilla_state=ket_state("0"), clamp=True))
        assert trace.final_work == pytest.approx(LN2, abs=1e-3)
        assert abs(trace.final_work - LN2) <= trace.diagnostics["clamp_error_bound"] + 1e-6

    def test_pure_needs_clamp(self):
        with pytest.raises(PureLimitError):
            run_1mqihe(EngineSpec(ancilla_state=ket_state("0")))

    def test_rotated_ancilla(self):
        # the ancilla is rotated onto z first, so only its spectrum matters
        rho = DensityMatrix(np.array([[0.5, 0.3], [0.3, 0.5]]))
        c = 0.6
        assert run_1mqihe(EngineSpec(ancilla_state=rho)).final_work == pytest.approx(
            closed_form_cycle_work(c).ledger_form, rel=1e-6)

    @pytest.mark.parametrize("c", [0.3, 0.6, 0.9])
    def test_ledger_invariants(self, c):
        tr = run_1mqihe(spec(c, steps=500, inductance=2.5))
        assert tr.stage[0] == "i" and tr.stage[-1] == "iii"
        order = [s for k, s in enumerate(tr.stage) if k == 0 or tr.stage[k - 1] != s]
        assert order == ["i", "ii", "iii"]
        ii = tr.stage_slice("ii")
        b_f = tr.diagnostics["B_f"]
        gained = tr.E_battery[ii.stop - 1] - tr.E_battery[ii.start]
        expected = -(tr.R[ii.stop - 1] - tr.R[ii.start]) + c * b_f
        assert gained == pytest.approx(expected, abs=1e-9)
        assert tr.R[-1] == 0.0
        loop = float(np.sum(0.5 * (tr.mu_z[1:] + tr.mu_z[:-1]) * np.diff(tr.B)))
        assert tr.E_battery[-1] == pytest.approx(loop, abs=1e-12)

    def test_inductance_cancels(self):
        a = run_1mqihe(spec(0.7, steps=200, inductance=0.1)).final_work
        b = run_1mqihe(spec(0.7, steps=200, inductance=50.0)).final_work
        assert a == pytest.approx(b, abs=1e-12)

    @pytest.mark.parametrize("c", [0.3, 0.6, 0.9])
    def test_second_order_convergence(self, c):
        errs = [abs(run_1mqihe(spec(c, steps=n)).final_work - closed_form_cycle_work(c).ledger_form)
                for n in (100, 200)]
        assert errs[0] / errs[1] >= 3.0

    def test_beta_and_moment(self):
        tr = run_1mqihe(EngineSpec(ancilla_state=polarized_qubit(0.6), mu_M=2.0, ctx=ThermalContext(0.5)))
        assert tr.final_work == pytest.approx(closed_form_cycle_work(0.6).ledger_form, rel=1e-6)

    def test_identity_offset(self):
        base = run_1mqihe(spec(0.8, steps=300)).final_work
        shifted = run_1mqihe(spec(0.8, steps=300, offset=lambda t: 4.0 * np.sin(2 * np.pi * t) ** 2 - 1.0)).final_work
        assert shifted == pytest.approx(base, abs=1e-10)

    def test_csv(self, tmp_path):
        tr = run_1mqihe(spec(0.5, steps=10))
        text = tr.to_csv(str(tmp_path / "trace.csv"))
        rows = list(csv.reader(io.StringIO(text)))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert len(rows) == len(tr.t) + 1
        assert (tmp_path / "trace.csv").read_text() == text

    def test_spec_validation(self):
        with pytest.raises(InvalidStateError):
            EngineSpec(steps=5)
        with pytest.raises(InvalidStateError):
            EngineSpec(mode="magic")
        with pytest.raises(InvalidStateError):
            run_1mqihe(EngineSpec(ancilla_state=ket_state("00")))


class TestFeedbackEngine:
    def test_measurement_statistics(self):
        probs, states = feedback_measurement(0.9)
        np.testing.assert_allclose(probs, [0.5, 0.5])
        np.testing.assert_allclose(states[0].matrix, np.diag([0.95, 0.05]))
        np.testing.assert_allclose(states[1].matrix, np.diag([0.05, 0.95]))

    def test_branches_equal(self):
        (p1, t1), (p2, t2) = feedback_branches(spec(0.9))
        assert t1.final_work == pytest.approx(t2.final_work, abs=1e-9)
        assert t2.diagnostics["B_f"] == pytest.approx(-t1.diagnostics["B_f"])

    def test_expectation_equals_swap(self):
        branches = feedback_branches(spec(0.9))
        expected = sum(p * t.final_work for p, t in branches)
        assert expected == pytest.approx(run_1mqihe(spec(0.9)).final_work, abs=1e-9)

    def test_seeded_sampling(self):
        a = run_1mqihe_feedback(spec(0.4, seed=3, mode="feedback"))
        b = run_1mqihe_feedback(spec(0.4, seed=3, mode="feedback"))
        assert a.diagnostics["outcome"] == b.diagnostics["outcome"]
        assert a.diagnostics["outcome_probabilities"] == pytest.approx([0.5, 0.5])
        outcomes = {run_1mqihe_feedback(spec(0.4, seed=s)).diagnostics["outcome"] for s in range(20)}
        assert outcomes == {1, 2}

    def test_explicit_outcome(self):
        tr = run_1mqihe_feedback(spec(0.4), outcome=2)
        assert tr.diagnostics["outcome"] == 2
        assert np.all(tr.B <= 0)
        with pytest.raises(DomainError):
            run_1mqihe_feedback(spec(0.4), outcome=3)


class TestTwoQubitEngine:
    def test_werner(self):
        tr = run_2mqihe(werner_state(0.5), EngineSpec(steps=10_000))
        assert tr.relative_deviation <= 1e-4
        assert tr.final_work == pytest.approx(WERNER_HALF_W, abs=1e-7)

    def test_free_energy_oracle(self):
        rho = werner_state(0.5)
        h = ct_solve_c2(rho).achieved_hamiltonian
        # steering costs <H>, relaxation returns F(H) - F(0)
        ref = -mean_energy(gibbs_state(h), h) + free_energy(h) - free_energy(np.zeros((4, 4)))
        assert run_2mqihe(rho, EngineSpec()).final_work == pytest.approx(ref, rel=1e-4)

    def test_maximally_mixed(self):
        tr = run_2mqihe(DensityMatrix.maximally_mixed(4), EngineSpec(steps=100))
        assert tr.final_work == pytest.approx(0.0, abs=1e-14)

    def test_near_pure_clamped(self):
        tr = run_2mqihe(bell_state("phi+"), EngineSpec(clamp=True))
        assert abs(tr.final_work - math.log(4)) <= tr.diagnostics["clamp_error_bound"] + 1e-6

    def test_pure_needs_clamp(self):
        with pytest.raises(PureLimitError):
            run_2mqihe(bell_state("phi+"), EngineSpec())

    def test_dimension(self):
        with pytest.raises(InvalidStateError):
            run_2mqihe(ket_state("0"), EngineSpec())

    def test_identity_offset(self, rng):
        for _ in range(5):
            rho = random_density_matrix(4, seed=rng)
            amp = rng.uniform(-5, 5)
            base = run_2mqihe(rho, EngineSpec(steps=100)).final_work
            shifted = run_2mqihe(rho, EngineSpec(steps=100, offset=lambda t: amp * np.cos(2 * np.pi * t))).final_work
            assert shifted == pytest.approx(base, abs=1e-10)

    def test_convergence(self):
        rho = random_density_matrix(4, seed=5)
        errs = [abs(run_2mqihe(rho, EngineSpec(steps=n)).relative_deviation) for n in (50, 100)]
        assert errs[0] / errs[1] >= 3.0


class TestStageMachine:
    def test_bell_full_control(self):
        s = usitir_stage_machine(bell_state("phi+"), c2())
        assert s.it_penalty == pytest.approx(0.0, abs=1e-12)
        assert s.total == pytest.approx(math.log(4))

    def test_bell_local(self):
        s = usitir_stage_machine(bell_state("phi+"), local_independent(2))
        assert s.it_penalty == pytest.approx(2 * LN2)
        assert s.total == pytest.approx(0.0, abs=1e-12)
        assert s.us_work + s.ir_work == pytest.approx(s.total, abs=1e-12)

    def test_boson_half(self):
        rho = DensityMatrix.diagonal([0.5, 0.5, 0.0], HilbertSpace(2, 2, "boson"))
        s = usitir_stage_machine(rho, collective_z(2, "boson"))
        assert s.it_penalty == pytest.approx(0.208087520, abs=1e-9)
        assert s.total == pytest.approx(0.197377588, abs=1e-9)

    def test_edge_boson_has_no_finite_hamiltonian(self):
        from usitir.operators import occupation_state

        s = usitir_stage_machine(occupation_state(0, 2), collective_z(2, "boson"))
        assert s.control_hamiltonian is None and s.us_work is None
        assert s.total == pytest.approx(math.log(3))

    def test_totals_match_extractable_work(self):
        rng = np.random.default_rng(200)
        sets = [control_set_from_label(x) for x in ("L2", "G2", "F2", "C2")]
        for k in range(200):
            rho = random_density_matrix(4, rank=1 + k % 4, seed=rng)
            cs = sets[k % 4]
            s = usitir_stage_machine(rho, cs)
            assert s.total == pytest.approx(extractable_work(rho, cs).work, abs=1e-8)
            if s.us_work is not None:
                assert s.us_work + s.ir_work == pytest.approx(s.total, abs=1e-8)

    def test_three_qubit_sets(self, rng):
        rho = random_density_matrix(8, seed=rng)
        for cs in (local_independent(3), local_common(3), collective_z(3)):
            s = usitir_stage_machine(rho, cs)
            assert s.total == pytest.approx(extractable_work(rho, cs).work, abs=1e-8)

    def test_to_dict(self):
        d = usitir_stage_machine(werner_state(0.3), c2()).to_dict()
        assert set(d) == {"us_work", "it_penalty", "ir_work", "total", "report"}
