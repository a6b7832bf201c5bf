"""Uncontrollable entropies and extractable work.

All works are dimensionless, ``W / (k_B T)``; entropies are in bits, so a
penalty of ``S`` bits costs ``S ln 2``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import logsumexp

from .config import get_tolerances
from .control import ControlSet, collective_z, ct_solve_c2, is_dmc
from .errors import (
    IncompatibleControlSetError,
    PureLimitError,
    UnsupportedStatisticsError,
)
from .operators import SIGMA, DensityMatrix, HilbertSpace, occupation_state, reduced_states, tensor_all
from .thermo import (
    DEFAULT_CONTEXT,
    LN2,
    ThermalContext,
    averaged_decohered_reduced,
    averaged_reduced,
    relative_entropy,
    von_neumann_entropy,
)

OPTIMALITY_TOL = 1e-9


@dataclass(frozen=True)
class WorkReport:
    input_entropy: float
    uncontrollable_entropy: float
    work: float
    optimal_work: float
    is_optimal: bool
    control_set: str
    mode: str
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class HStarResult:
    h_star: float
    j_value: float  # bits
    converged: bool


def _clean(su: float) -> float:
    # round-off can leave -1e-16 on exactly optimal inputs
    return 0.0 if -OPTIMALITY_TOL <= su <= 0.0 else su


def _require_distinguishable(rho: DensityMatrix, what: str) -> None:
    if rho.space.statistics != "distinguishable":
        raise UnsupportedStatisticsError(
            f"{what} requires distinguishable statistics, got {rho.space.statistics}"
        )


def optimal_work(rho: DensityMatrix, ctx: ThermalContext = DEFAULT_CONTEXT) -> float:
    """Second-law bound ``ln 2 (log2 D - S(rho))``."""
    return LN2 * (math.log2(rho.dim) - von_neumann_entropy(rho))


def work_penalty(rho1: DensityMatrix, rho2: DensityMatrix, ctx: ThermalContext = DEFAULT_CONTEXT) -> float:
    """Work lost by thermalising ``rho1`` irreversibly into ``rho2``."""
    return LN2 * relative_entropy(rho1, rho2)


def s_u_local_independent(rho: DensityMatrix) -> float:
    """Sum of single-site entropies minus the joint entropy."""
    _require_distinguishable(rho, "s_u_local_independent")
    return _clean(sum(von_neumann_entropy(r) for r in reduced_states(rho)) - von_neumann_entropy(rho))


def s_u_local_common(rho: DensityMatrix) -> float:
    _require_distinguishable(rho, "s_u_local_common")
    n = rho.space.n_particles
    return _clean(n * von_neumann_entropy(averaged_reduced(rho)) - von_neumann_entropy(rho))


def s_u_fn_distinguishable(rho: DensityMatrix) -> float:
    _require_distinguishable(rho, "s_u_fn_distinguishable")
    n = rho.space.n_particles
    return _clean(n * von_neumann_entropy(averaged_decohered_reduced(rho)) - von_neumann_entropy(rho))


# --------------------------------------------------------------------------
# collective-field optimum


def _fn_diagonal(space: HilbertSpace) -> np.ndarray:
    """Diagonal of the collective sigma_z in the space's computational basis."""
    return np.real(np.diag(collective_z(space.n_particles, space.statistics).generators[0].matrix))


def find_h_star(rho: DensityMatrix, n: int | None = None, statistics: str | None = None) -> HStarResult:
    """Field ``h*`` of the Gibbs family ``exp(h F_N)/Z`` matching ``<F_N>`` of ``rho``.

    ``J(h) = h <F_N> / ln 2 - log2 Z(h)``. When ``<F_N>`` sits on an edge of
    the spectrum, ``h*`` is infinite and ``J`` takes its limit
    ``-log2(degeneracy of the edge level)``.
    """
    from .oracle import bisect_monotone

    space = rho.space
    if n is not None and n != space.n_particles:
        raise IncompatibleControlSetError(f"state has {space.n_particles} particles, expected {n}")
    if statistics is not None and statistics != space.statistics:
        raise IncompatibleControlSetError(f"state statistics {space.statistics} != {statistics}")
    f = _fn_diagonal(space)
    target = float(np.real(np.diag(rho.matrix)) @ f)
    f_min, f_max = float(f.min()), float(f.max())
    assert f_min - 1e-9 <= target <= f_max + 1e-9, "<F_N> outside the spectrum of F_N"

    def mean_f(h: float) -> float:
        w = h * f
        w = np.exp(w - w.max())
        return float(f @ w / w.sum())

    if f_max - f_min < 1e-12:
        return HStarResult(0.0, 0.0 - math.log2(len(f)), True)
    h = bisect_monotone(mean_f, target, asymptotes=(f_min, f_max))
    if math.isinf(h):
        edge = f_max if h > 0 else f_min
        degeneracy = int(np.sum(np.abs(f - edge) < 1e-9))
        return HStarResult(h, 0.0 - math.log2(degeneracy), True)
    j = (h * target - float(logsumexp(h * f))) / LN2
    return HStarResult(h, j, abs(mean_f(h) - target) <= 1e-10)


def s_u_fn_boson(rho: DensityMatrix, n: int | None = None) -> float:
    """``-J(h*) - S(rho)`` on the bosonic occupation space."""
    if rho.space.statistics != "boson":
        raise UnsupportedStatisticsError(f"s_u_fn_boson requires bosonic statistics, got {rho.space.statistics}")
    hs = find_h_star(rho, n, "boson")
    return _clean(-hs.j_value - von_neumann_entropy(rho))


# --------------------------------------------------------------------------
# dispatch


def _check_compatible(rho: DensityMatrix, cs: ControlSet) -> None:
    if rho.dim != cs.dim:
        raise IncompatibleControlSetError(
            f"control set {cs.label} acts on dimension {cs.dim}, state has dimension {rho.dim}"
        )
    if cs.name != "custom" and rho.space != cs.space:
        raise IncompatibleControlSetError(
            f"control set {cs.label} is defined on {cs.space}, state lives on {rho.space}"
        )


def uncontrollable_entropy(
    rho: DensityMatrix,
    cs: ControlSet,
    ctx: ThermalContext = DEFAULT_CONTEXT,
    strict_ct: bool = False,
    oracle_budget: dict | None = None,
) -> tuple[float, dict]:
    """``S_u(rho, cs)`` in bits and the diagnostics explaining how it was obtained."""
    _check_compatible(rho, cs)
    diag: dict = {"route": None}
    if rho.dim == 1:
        diag["route"] = "trivial"
        return 0.0, diag
    stats = rho.space.statistics
    if cs.name == "L_N":
        diag["route"] = "closed-form local-independent"
        return s_u_local_independent(rho), diag
    if cs.name == "G_N" and stats == "distinguishable":
        diag["route"] = "closed-form local-common"
        return s_u_local_common(rho), diag
    if cs.name == "F_N":
        hs = find_h_star(rho)
        diag.update(h_star=hs.h_star, j_value=hs.j_value, h_star_converged=hs.converged)
        if stats == "distinguishable":
            diag["route"] = "closed-form collective-z (decohered average)"
            su = s_u_fn_distinguishable(rho)
            diag["h_star_cross_check"] = _clean(-hs.j_value - von_neumann_entropy(rho))
            return su, diag
        diag["route"] = "collective-z field matching"
        return _clean(-hs.j_value - von_neumann_entropy(rho)), diag
    if cs.name == "C_2":
        if not is_dmc(cs):
            raise IncompatibleControlSetError("C_2 generators failed the controllability check")
        try:
            sol = ct_solve_c2(rho, ctx)
            diag["ct"] = "exact"
        except PureLimitError:
            if strict_ct:
                raise
            # thermal only as a limit of Gibbs states; certify on the clamped spectrum
            floor = get_tolerances().clamp_floor
            sol = ct_solve_c2(clamp_state(rho, floor), ctx)
            diag["ct"] = "limit"
        diag.update(route="DMC + CT", spectral_residual=sol.spectral_residual, ct_parameters={k: float(v) for k, v in sol.parameters.items()})
        return 0.0, diag
    from .oracle import brute_force_su

    res = brute_force_su(rho, cs, **(oracle_budget or {}))
    diag.update(route="numeric oracle estimate", numeric=True, converged=res.converged, evaluations=res.evaluations)
    return _clean(res.value), diag


def clamp_state(rho: DensityMatrix, floor: float) -> DensityMatrix:
    """Raise eigenvalues below ``floor`` to ``floor`` and renormalise."""
    w, v = np.linalg.eigh(rho.matrix)
    w = np.maximum(w, floor)
    w /= w.sum()
    return DensityMatrix((v * w) @ v.conj().T, rho.space)


def _report(rho, su, cs_label, mode, diag) -> WorkReport:
    s = von_neumann_entropy(rho)
    w_opt = LN2 * (math.log2(rho.dim) - s)
    w = LN2 * (math.log2(rho.dim) - s - su)
    if abs(w) < 1e-12:
        w = 0.0
    return WorkReport(
        input_entropy=s,
        uncontrollable_entropy=su,
        work=w,
        optimal_work=w_opt,
        is_optimal=su <= OPTIMALITY_TOL,
        control_set=cs_label,
        mode=mode,
        diagnostics=diag,
    )


def extractable_work(
    rho: DensityMatrix,
    cs: ControlSet,
    ctx: ThermalContext = DEFAULT_CONTEXT,
    strict_ct: bool = False,
    oracle_budget: dict | None = None,
) -> WorkReport:
    """Maximum work of a swap engine: ``ln 2 (log2 D - S(rho) - S_u(rho, cs))``."""
    su, diag = uncontrollable_entropy(rho, cs, ctx, strict_ct, oracle_budget)
    return _report(rho, su, cs.label, "swap", diag)


def post_measurement_states(rho: DensityMatrix) -> list[DensityMatrix]:
    """Equally likely states of the internal qudit after CNOT and measurement.

    Distinguishable qubits pick up a NOT on every qubit whose ancilla bit
    reads 1 (outcome ``p`` has the bits of ``p``); other qudits are shifted
    cyclically, ``X^p rho X^-p``.
    """
    space = rho.space
    if space.statistics == "distinguishable" and space.local_dim == 2 and space.n_particles >= 1:
        n = space.n_particles
        ops = [
            tensor_all([SIGMA["x"] if b else SIGMA["i"] for b in bits])
            for bits in itertools.product((0, 1), repeat=n)
        ]
    else:
        shift = np.roll(np.eye(rho.dim), 1, axis=0)
        ops = [np.linalg.matrix_power(shift, p) for p in range(rho.dim)]
    return [rho.conjugate_by(u) for u in ops]


def feedback_work(
    rho: DensityMatrix,
    cs: ControlSet,
    ctx: ThermalContext = DEFAULT_CONTEXT,
    strict_ct: bool = False,
    oracle_budget: dict | None = None,
) -> WorkReport:
    """Feedback engine: the penalty is averaged over the ``P = D`` outcomes."""
    outcomes = post_measurement_states(rho)
    per = [uncontrollable_entropy(o, cs, ctx, strict_ct, oracle_budget)[0] for o in outcomes]
    su = _clean(float(np.mean(per)))
    return _report(rho, su, cs.label, "feedback", {"per_outcome_su": per, "outcomes": len(per)})


def szilard_ancilla(statistics: str) -> DensityMatrix:
    """Pure two-particle ancilla in the lowest computational/occupation state."""
    if statistics == "distinguishable":
        return DensityMatrix.diagonal([1, 0, 0, 0], HilbertSpace.qubits(2))
    if statistics == "boson":
        return occupation_state(0, 2)
    if statistics == "fermion":
        return DensityMatrix(np.ones((1, 1)), HilbertSpace.qubits(2, "fermion"))
    raise UnsupportedStatisticsError(f"unknown statistics {statistics!r}")


def szilard_summary(statistics: str, mode: str = "feedback") -> WorkReport:
    """Two-particle Szilard engine with pure ancillas.

    ``mode="feedback"`` uses the collective-z control alone;
    ``mode="full-control"`` assumes a controllable and thermalizable set, so
    the penalty vanishes and the work is ``ln D``.
    """
    rho = szilard_ancilla(statistics)
    if mode == "feedback":
        return feedback_work(rho, collective_z(2, statistics))
    if mode == "full-control":
        return _report(rho, 0.0, "DMC+CT", "feedback", {"route": "assumed DMC + CT", "D": rho.dim})
    raise IncompatibleControlSetError(f"unsupported Szilard mode {mode!r}; use 'feedback' or 'full-control'")
