"""Quasi-static engine cycles with an explicit battery ledger.

Every cycle is a loop in one control parameter ``x`` (the field ``B`` for
the one-qubit engine, the Hamiltonian scale ``lambda`` for the two-qubit
engine) with generalized force ``f = -<dH/dx>``. The coil/battery ledger
uses ``R = L x^2 / 2 + f x`` and credits the battery ``-dR + f dx`` per
step, integrated with the trapezoid rule.
"""
from __future__ import annotations

import csv
import functools
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import get_tolerances
from .control import c2, ct_solve_c2, is_dmc
from .errors import DomainError, IncompatibleControlSetError, InvalidStateError, PureLimitError
from .operators import DensityMatrix, HermitianOperator, HilbertSpace, partial_trace, tensor
from .thermo import DEFAULT_CONTEXT, LN2, ThermalContext, gibbs_state, mean_energy, relative_entropy, von_neumann_entropy
from .work import WorkReport, clamp_state, extractable_work, find_h_star, uncontrollable_entropy
from .control import ControlSet

CSV_COLUMNS = ("t", "stage", "B", "mu_z", "R", "E_battery")


def brillouin_mu(b: float | np.ndarray, beta_mu_m: float, mu_m: float = 1.0):
    """Equilibrium moment ``mu_M tanh(beta mu_M B)``."""
    return mu_m * np.tanh(beta_mu_m * np.asarray(b, dtype=float)) if np.ndim(b) else mu_m * math.tanh(beta_mu_m * b)


def optimal_bf(c: float, beta_mu_m: float) -> float:
    """Field at which the equilibrium polarization equals ``c``."""
    if c == 1.0:
        raise PureLimitError("polarization c = 1 needs an unbounded field B_f")
    if not 0.0 <= c < 1.0:
        raise DomainError(f"polarization must satisfy 0 <= c < 1, got {c}")
    return math.atanh(c) / beta_mu_m


def _log_cosh(x: float) -> float:
    return float(np.logaddexp(x, -x)) - LN2


def _qubit_entropy(c: float) -> float:
    p = np.array([(1 + c) / 2, (1 - c) / 2])
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


@dataclass(frozen=True)
class ClosedFormWork:
    ledger_form: float  # mu_M B_f tanh - ln cosh, in k_B T
    entropy_form: float  # ln 2 (1 - S)


def closed_form_cycle_work(c: float, beta_mu_m: float = 1.0) -> ClosedFormWork:
    """One-qubit cycle work from the energy ledger and from the entropy drop.

    Both are dimensionless; the two must agree to 1e-10.
    """
    x = beta_mu_m * optimal_bf(c, beta_mu_m)
    ledger = x * math.tanh(x) - _log_cosh(x)
    entropic = LN2 * (1.0 - _qubit_entropy(c))
    if abs(ledger - entropic) > 1e-10:
        raise AssertionError(f"ledger and entropy forms disagree: {ledger} vs {entropic}")
    return ClosedFormWork(ledger, entropic)


# --------------------------------------------------------------------------
# traces


@dataclass(frozen=True)
class CycleTrace:
    """Sampled cycle. ``B`` and ``mu_z`` hold the control parameter and its force."""

    t: np.ndarray
    stage: tuple[str, ...]
    B: np.ndarray
    mu_z: np.ndarray
    R: np.ndarray
    E_battery: np.ndarray
    final_work: float
    closed_form_work: float
    entropy_in: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def relative_deviation(self) -> float:
        if self.closed_form_work == 0.0:
            return abs(self.final_work)
        return abs(self.final_work - self.closed_form_work) / abs(self.closed_form_work)

    def stage_slice(self, label: str) -> slice:
        idx = [k for k, s in enumerate(self.stage) if s == label]
        return slice(idx[0], idx[-1] + 1)

    def to_csv(self, path: str | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in zip(self.t, self.stage, self.B, self.mu_z, self.R, self.E_battery):
            w.writerow([int(row[0]), row[1], *(repr(float(v)) for v in row[2:])])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text

    def summary(self) -> dict:
        return {
            "final_work": self.final_work,
            "closed_form_work": self.closed_form_work,
            "relative_deviation": self.relative_deviation,
            "entropy_in": self.entropy_in,
            "samples": len(self.t),
            **self.diagnostics,
        }


@dataclass(frozen=True)
class EngineSpec:
    mu_M: float = 1.0
    ctx: ThermalContext = DEFAULT_CONTEXT
    steps: int = 10_000
    ancilla_state: DensityMatrix | None = None
    mode: str = "swap"
    clamp: bool = False
    inductance: float = 1.0
    # f(tau) * identity added to the Hamiltonian along the cycle, tau in [0, 1]
    offset: Callable[[np.ndarray], np.ndarray] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.steps < 10:
            raise InvalidStateError(f"EngineSpec invariant violated: steps >= 10 (got {self.steps})")
        if self.mode not in ("swap", "feedback"):
            raise InvalidStateError(f"EngineSpec mode must be 'swap' or 'feedback', got {self.mode!r}")
        if not self.inductance > 0:
            raise InvalidStateError("EngineSpec invariant violated: inductance > 0")

    @property
    def beta_mu_m(self) -> float:
        return self.ctx.beta * self.mu_M


def polarized_qubit(c: float) -> DensityMatrix:
    """``(1 + c sigma_z) / 2``."""
    if not -1.0 <= c <= 1.0:
        raise DomainError(f"polarization must satisfy -1 <= c <= 1, got {c}")
    return DensityMatrix.diagonal([(1 + c) / 2, (1 - c) / 2], HilbertSpace.qubits(1))


def _prepare(rho: DensityMatrix, clamp: bool) -> tuple[DensityMatrix, float]:
    """Apply the opt-in clamp; returns the state used and the work error bound."""
    if not clamp:
        return rho, 0.0
    floor = get_tolerances().clamp_floor
    if rho.eigenvalues()[0] >= floor:
        return rho, 0.0
    clamped = clamp_state(rho, floor)
    return clamped, LN2 * (von_neumann_entropy(clamped) - von_neumann_entropy(rho))


def _ledger(
    x: np.ndarray, force: np.ndarray, stage: list[str], spec: EngineSpec
) -> tuple[np.ndarray, np.ndarray]:
    r = 0.5 * spec.inductance * x**2 + force * x
    de = -np.diff(r) + 0.5 * (force[1:] + force[:-1]) * np.diff(x)
    if spec.offset is not None:
        tau = np.linspace(0.0, 1.0, len(x))
        de -= np.diff(np.asarray(spec.offset(tau), dtype=float))
    return r, np.concatenate([[0.0], np.cumsum(de)])


def _loop(
    x_f: float,
    force_prepared: float,
    force_before: float,
    equilibrium_force: Callable[[np.ndarray], np.ndarray],
    spec: EngineSpec,
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Stage i at x = 0, ramp ii at fixed force, equilibrium ramp iii back to 0."""
    n = spec.steps
    up = np.linspace(0.0, x_f, n + 1)
    down = np.linspace(x_f, 0.0, n + 1)[1:]
    x = np.concatenate([[0.0, 0.0], up, down])
    force = np.concatenate([[force_before, force_prepared], np.full(n + 1, force_prepared), equilibrium_force(down)])
    stage = ["i", "i"] + ["ii"] * (n + 1) + ["iii"] * n
    return x, force, stage


def _trace(x, force, stage, spec, closed_form, entropy_in, diagnostics) -> CycleTrace:
    r, e = _ledger(x, force, stage, spec)
    return CycleTrace(
        t=np.arange(len(x)),
        stage=tuple(stage),
        B=x,
        mu_z=force,
        R=r,
        E_battery=e,
        final_work=float(spec.ctx.beta * e[-1]),
        closed_form_work=closed_form,
        entropy_in=entropy_in,
        diagnostics=diagnostics,
    )


def _ancilla(spec: EngineSpec) -> DensityMatrix:
    if spec.ancilla_state is None:
        raise InvalidStateError("EngineSpec.ancilla_state is required for the one-qubit engine")
    if spec.ancilla_state.dim != 2:
        raise InvalidStateError(f"one-qubit engine needs a 2-dimensional ancilla, got {spec.ancilla_state.dim}")
    return spec.ancilla_state


def _one_qubit_cycle(c_signed: float, spec: EngineSpec, entropy_in: float, extra: dict) -> CycleTrace:
    c = abs(c_signed)
    sign = 1.0 if c_signed >= 0 else -1.0
    b_f = sign * optimal_bf(c, spec.beta_mu_m)
    x, force, stage = _loop(
        b_f, sign * c * spec.mu_M, 0.0, lambda b: brillouin_mu(b, spec.beta_mu_m, spec.mu_M), spec
    )
    closed = LN2 * (1.0 - entropy_in)
    return _trace(x, force, stage, spec, closed, entropy_in, {"B_f": b_f, "c": c, **extra})


def _polarization(spec: EngineSpec) -> tuple[float, float, float]:
    """``c``, input entropy and clamp bound of the ancilla after rotation to the z axis."""
    rho = _ancilla(spec)
    s_in = von_neumann_entropy(rho)
    used, bound = _prepare(rho, spec.clamp)
    lam = used.eigenvalues()
    if lam[0] < get_tolerances().eigenvalue_floor:
        raise PureLimitError("pure ancilla: the cycle needs an unbounded field; enable clamp mode")
    return float(lam[1] - lam[0]), s_in, bound


def run_1mqihe(spec: EngineSpec) -> CycleTrace:
    """Swap engine with one internal qubit.

    Stage i swaps the ancilla in and rotates it onto the z axis with the
    field off. Stage ii raises ``B`` to ``B_f`` with the moment frozen at
    ``c mu_M``; stage iii lowers it back in equilibrium along the Brillouin
    curve.
    """
    c, s_in, bound = _polarization(spec)
    return _one_qubit_cycle(c, spec, s_in, {"clamp_error_bound": bound})


def feedback_measurement(c: float) -> tuple[np.ndarray, list[DensityMatrix]]:
    """Outcome probabilities and post-measurement internal states.

    The internal qubit S starts depolarized; CNOT with S as control and the
    ancilla A as target is followed by a z measurement of A.
    """
    rho_a = polarized_qubit(c)
    rho_as = tensor(rho_a, DensityMatrix.maximally_mixed(HilbertSpace.qubits(1)))
    # qubit 1 = A (target), qubit 2 = S (control)
    cnot = np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=float)
    joint = cnot @ rho_as.matrix @ cnot.T
    probs, states = [], []
    for a in (0, 1):
        proj = np.kron(np.diag([1.0 - a, float(a)]), np.eye(2))
        branch = proj @ joint @ proj
        p = float(np.trace(branch).real)
        probs.append(p)
        states.append(partial_trace(DensityMatrix(branch / p, HilbertSpace.qubits(2)), [2]))
    return np.array(probs), states


def feedback_branches(spec: EngineSpec) -> list[tuple[float, CycleTrace]]:
    """Both measurement branches with their probabilities."""
    c, s_in, bound = _polarization(spec)
    probs, states = feedback_measurement(c)
    out = []
    for k, (p, s) in enumerate(zip(probs, states)):
        c_s = float(s.matrix[0, 0].real - s.matrix[1, 1].real)
        out.append((float(p), _one_qubit_cycle(c_s, spec, s_in, {"outcome": k + 1, "clamp_error_bound": bound})))
    return out


def run_1mqihe_feedback(spec: EngineSpec, outcome: int | None = None) -> CycleTrace:
    """Feedback engine: outcome 2 leaves S polarized along -z, so ``B`` is inverted.

    The outcome is drawn from a generator seeded with ``spec.seed`` unless
    given explicitly.
    """
    branches = feedback_branches(spec)
    probs = np.array([p for p, _ in branches])
    if outcome is None:
        outcome = int(np.random.default_rng(spec.seed).choice(2, p=probs / probs.sum())) + 1
    if outcome not in (1, 2):
        raise DomainError(f"feedback outcome must be 1 or 2, got {outcome}")
    tr = branches[outcome - 1][1]
    diag = {**tr.diagnostics, "outcome_probabilities": probs.tolist()}
    return CycleTrace(tr.t, tr.stage, tr.B, tr.mu_z, tr.R, tr.E_battery, tr.final_work,
                      tr.closed_form_work, tr.entropy_in, diag)


@functools.lru_cache(maxsize=1)
def _c2_controllable() -> bool:
    return is_dmc(c2())


def run_2mqihe(rho_in: DensityMatrix, spec: EngineSpec) -> CycleTrace:
    """Two-qubit swap engine with the C_2 controls.

    After the swap the state is rotated (at zero Hamiltonian) onto the
    Gibbs state of ``H_beta``; stage ii ramps ``lambda H_beta`` from 0 to 1
    at fixed state, stage iii returns ``lambda`` to 0 in equilibrium.
    """
    if rho_in.dim != 4:
        raise InvalidStateError(f"two-qubit engine needs a 4-dimensional input, got {rho_in.dim}")
    if not _c2_controllable():
        raise IncompatibleControlSetError("C_2 failed the controllability check")
    s_in = von_neumann_entropy(rho_in)
    used, bound = _prepare(rho_in, spec.clamp)
    sol = ct_solve_c2(used, spec.ctx)
    energies = np.linalg.eigvalsh(sol.achieved_hamiltonian.matrix)
    beta = spec.ctx.beta
    prepared = gibbs_state(sol.achieved_hamiltonian, spec.ctx)

    def equilibrium_force(lam: np.ndarray) -> np.ndarray:
        a = -beta * np.outer(lam, energies - energies[0])
        w = np.exp(a - a.max(axis=1, keepdims=True))
        return -(w @ energies) / w.sum(axis=1)

    x, force, stage = _loop(
        1.0,
        -mean_energy(prepared, sol.achieved_hamiltonian),
        -float(np.mean(energies)),
        equilibrium_force,
        spec,
    )
    closed = LN2 * (2.0 - s_in)
    return _trace(x, force, stage, spec, closed, s_in,
                  {"spectral_residual": sol.spectral_residual, "clamp_error_bound": bound})


# --------------------------------------------------------------------------
# three-stage decomposition


@dataclass(frozen=True)
class StagedReport:
    rho1: DensityMatrix
    rho2: DensityMatrix
    control_hamiltonian: HermitianOperator | None
    us_work: float | None
    it_penalty: float
    ir_work: float | None
    total: float
    report: WorkReport

    def to_dict(self) -> dict:
        return {
            "us_work": self.us_work,
            "it_penalty": self.it_penalty,
            "ir_work": self.ir_work,
            "total": self.total,
            "report": self.report.to_dict(),
        }


def _gibbs_family_target(rho: DensityMatrix, cs: ControlSet, ctx: ThermalContext) -> tuple[DensityMatrix, DensityMatrix]:
    """Reached state and Gibbs state attaining the minimum for the named sets."""
    from .operators import reduced_states, tensor_all
    from .thermo import averaged_decohered_reduced, averaged_reduced

    stats = rho.space.statistics
    n = rho.space.n_particles
    if rho.dim == 1:
        return rho, rho
    if cs.name == "L_N":
        return rho, tensor_all(reduced_states(rho)).with_space(rho.space)
    if cs.name == "G_N" and stats == "distinguishable":
        return rho, tensor_all([averaged_reduced(rho)] * n).with_space(rho.space)
    if cs.name == "F_N" and stats == "distinguishable":
        return rho, tensor_all([averaged_decohered_reduced(rho)] * n).with_space(rho.space)
    if cs.name == "F_N":
        from .work import _fn_diagonal

        f = _fn_diagonal(rho.space)
        hs = find_h_star(rho)
        if math.isinf(hs.h_star):
            edge = f.max() if hs.h_star > 0 else f.min()
            w = (np.abs(f - edge) < 1e-9).astype(float)
        else:
            a = hs.h_star * f
            w = np.exp(a - a.max())
        return rho, DensityMatrix.diagonal(w / w.sum(), rho.space)
    if cs.name == "C_2":
        try:
            target = gibbs_state(ct_solve_c2(rho, ctx).achieved_hamiltonian, ctx, rho.space)
        except PureLimitError:
            target = DensityMatrix.diagonal(np.sort(rho.eigenvalues())[::-1], rho.space)
        return target, target
    from .oracle import brute_force_su

    res = brute_force_su(rho, cs)
    return res.rho1, res.rho2


def usitir_stage_machine(
    rho_in: DensityMatrix, cs: ControlSet, ctx: ThermalContext = DEFAULT_CONTEXT
) -> StagedReport:
    """Split the optimal cycle into steering, irreversible thermalization and relaxation.

    The steering stage raises ``H_c = -ln(rho2)/beta`` on the reached state
    ``rho1``; relaxation lowers it back isothermally. When ``rho2`` is rank
    deficient ``H_c`` is unbounded and only the entropic total is given.
    """
    report = extractable_work(rho_in, cs, ctx)
    rho1, rho2 = _gibbs_family_target(rho_in, cs, ctx)
    penalty = LN2 * relative_entropy(rho1, rho2)
    total = report.optimal_work - penalty
    lam, vec = np.linalg.eigh(rho2.matrix)
    h_c = us = ir = None
    if lam[0] >= get_tolerances().eigenvalue_floor:
        h_c = HermitianOperator((vec * (-np.log(lam) / ctx.beta)) @ vec.conj().T)
        us = -ctx.beta * mean_energy(rho1, h_c)
        # Z(H_c) = 1 by construction
        ir = math.log(rho_in.dim)
    return StagedReport(rho1, rho2, h_c, us, penalty, ir, total, report)
