"""Control sets, density-matrix controllability (Lie-algebra closure) and
controllable thermalizability (spectrum matching of Gibbs states)."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .config import get_tolerances
from .errors import (
    DimensionMismatchError,
    IncompatibleControlSetError,
    InvalidOperatorError,
    PureLimitError,
    UnsupportedStatisticsError,
)
from .operators import (
    DensityMatrix,
    HermitianOperator,
    HilbertSpace,
    antisymmetric_isometry_2,
    as_array,
    boson_fn_operator,
    collective,
    heisenberg,
    pauli_on_site,
    symmetric_isometry,
)
from .thermo import DEFAULT_CONTEXT, ThermalContext, gibbs_state

NAMED_SETS = ("L_N", "G_N", "F_N", "C_2", "custom")


@dataclass(frozen=True)
class ControlSet:
    name: str
    generators: tuple[HermitianOperator, ...]
    space: HilbertSpace

    def __post_init__(self):
        if self.name not in NAMED_SETS:
            raise IncompatibleControlSetError(f"control set name must be one of {NAMED_SETS}")
        gens = tuple(g if isinstance(g, HermitianOperator) else HermitianOperator(g) for g in self.generators)
        if not gens:
            raise IncompatibleControlSetError("control set must contain at least one generator")
        for g in gens:
            if g.dim != self.space.dim:
                raise DimensionMismatchError(
                    f"ControlSet invariant violated: generator dim {g.dim} != space dim {self.space.dim}"
                )
        object.__setattr__(self, "generators", gens)

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def label(self) -> str:
        """Short label such as ``L2``, ``F3`` or ``C2``."""
        if self.name == "custom":
            return "custom"
        return self.name[0] + str(self.space.n_particles)


def local_independent(n: int) -> ControlSet:
    """All single-qubit Pauli controls on each of ``n`` distinguishable qubits."""
    gens = [pauli_on_site(a, k, n) for k in range(1, n + 1) for a in "xyz"]
    return ControlSet("L_N", tuple(gens), HilbertSpace.qubits(n))


def _project(op: HermitianOperator, iso: np.ndarray) -> HermitianOperator:
    return HermitianOperator(iso.conj().T @ op.matrix @ iso)


def _embedding(n: int, statistics: str) -> np.ndarray | None:
    if statistics == "distinguishable":
        return None
    if statistics == "boson":
        return symmetric_isometry(n)
    if n == 1:
        return None
    if n == 2:
        return antisymmetric_isometry_2()
    raise UnsupportedStatisticsError(f"no fermionic qubit states for N={n}")


def local_common(n: int, statistics: str = "distinguishable") -> ControlSet:
    """Common field controls ``sum_k sigma_a^(k)``, restricted to the symmetry sector."""
    space = HilbertSpace.qubits(n, statistics)
    iso = _embedding(n, statistics)
    gens = [collective(a, n) for a in "xyz"]
    if iso is not None:
        gens = [_project(g, iso) for g in gens]
    return ControlSet("G_N", tuple(gens), space)


def collective_z(n: int, statistics: str = "distinguishable") -> ControlSet:
    """The singleton ``{sum_k sigma_z^(k)}``."""
    space = HilbertSpace.qubits(n, statistics)
    if statistics == "boson":
        gen = boson_fn_operator(n)
    else:
        gen = collective("z", n)
        iso = _embedding(n, statistics)
        if iso is not None:
            gen = _project(gen, iso)
    return ControlSet("F_N", (gen,), space)


def c2() -> ControlSet:
    """Single-qubit Paulis on two qubits plus their Heisenberg coupling."""
    gens = [pauli_on_site(a, k, 2) for k in (1, 2) for a in "xyz"] + [heisenberg((1, 2), 2)]
    return ControlSet("C_2", tuple(gens), HilbertSpace.qubits(2))


def custom(generators: Sequence, space: HilbertSpace | None = None) -> ControlSet:
    gens = tuple(g if isinstance(g, HermitianOperator) else HermitianOperator(g) for g in generators)
    if space is None:
        from .operators import infer_space

        space = infer_space(gens[0].dim)
    return ControlSet("custom", gens, space)


def control_set_from_label(label: str, statistics: str = "distinguishable") -> ControlSet:
    """Parse ``L2``, ``G3``, ``F2``, ``C2`` (case-insensitive, ``F_2`` also accepted)."""
    m = re.fullmatch(r"([LGFC])_?(\d+)", label.strip(), re.IGNORECASE)
    if not m:
        raise IncompatibleControlSetError(f"unknown control set label {label!r}")
    kind, n = m.group(1).upper(), int(m.group(2))
    if kind == "C":
        if n != 2 or statistics != "distinguishable":
            raise IncompatibleControlSetError("C_2 is defined for two distinguishable qubits only")
        return c2()
    if kind == "L":
        if statistics != "distinguishable":
            raise IncompatibleControlSetError("L_N requires distinguishable particles")
        return local_independent(n)
    if kind == "G":
        return local_common(n, statistics)
    return collective_z(n, statistics)


# --------------------------------------------------------------------------
# Lie closure

_CLOSURE_TOL = 1e-9


def _vec(a: np.ndarray) -> np.ndarray:
    return np.concatenate([a.real.ravel(), a.imag.ravel()])


def _unvec(v: np.ndarray, dim: int) -> np.ndarray:
    n = dim * dim
    return (v[:n] + 1j * v[n:]).reshape(dim, dim)


def _orthonormal_add(basis: list[np.ndarray], v: np.ndarray) -> np.ndarray | None:
    for _ in range(2):
        for b in basis:
            v = v - (b @ v) * b
    norm = np.linalg.norm(v)
    if norm <= _CLOSURE_TOL:
        return None
    return v / norm


def lie_closure_basis(cs: ControlSet) -> list[HermitianOperator]:
    """Orthonormal Hermitian basis ``{G_k}`` with ``span{i G_k}`` the generated Lie algebra.

    Traceless parts of the generators seed a breadth-first commutator
    expansion that stops once a full pass adds nothing.
    """
    dim = cs.dim
    target = dim * dim - 1
    basis: list[np.ndarray] = []
    for g in cs.generators:
        m = g.matrix - np.trace(g.matrix) / dim * np.eye(dim)
        v = _orthonormal_add(basis, _vec(1j * m))
        if v is not None:
            basis.append(v)
    frontier = list(basis)
    iterations = 0
    cap = dim**4
    while frontier and len(basis) < target and iterations < cap:
        new = []
        for a in frontier:
            ma = _unvec(a, dim)
            for b in list(basis):
                iterations += 1
                mb = _unvec(b, dim)
                v = _orthonormal_add(basis, _vec(ma @ mb - mb @ ma))
                if v is not None:
                    basis.append(v)
                    new.append(v)
                if len(basis) >= target:
                    break
            if len(basis) >= target:
                break
        frontier = new
    return [HermitianOperator(-1j * _unvec(v, dim)) for v in basis]


def lie_closure_dim(cs: ControlSet) -> int:
    return len(lie_closure_basis(cs))


def is_dmc(cs: ControlSet) -> bool:
    """Density-matrix controllable: the generated algebra is all of su(D)."""
    return lie_closure_dim(cs) == cs.dim**2 - 1


# --------------------------------------------------------------------------
# thermalizability


def unitarily_equivalent(rho1: DensityMatrix, rho2: DensityMatrix, tol: float = 1e-8) -> bool:
    if rho1.dim != rho2.dim:
        raise DimensionMismatchError(f"dims differ: {rho1.dim} vs {rho2.dim}")
    return bool(np.max(np.abs(rho1.eigenvalues() - rho2.eigenvalues())) <= tol)


def _thermal_targets(rho: DensityMatrix, ctx: ThermalContext) -> np.ndarray:
    """Ascending ``-ln(r)/beta`` for the spectrum ``r`` of a strictly positive state."""
    r = rho.eigenvalues()
    floor = get_tolerances().eigenvalue_floor
    if r[0] < floor:
        raise PureLimitError(
            f"state has eigenvalue {r[0]:.3e} below the floor {floor:.0e}: it is thermal only "
            "for Hamiltonians with infinite energy differences"
        )
    return np.sort(-np.log(r) / ctx.beta)


def spectrum_shift_match(
    rho: DensityMatrix, h: HermitianOperator, ctx: ThermalContext = DEFAULT_CONTEXT, tol: float = 1e-9
) -> float | None:
    """Shift ``s`` with ``spec(H) = spec(-ln(rho)/beta) + s``, or ``None``."""
    t = _thermal_targets(rho, ctx)
    e = np.linalg.eigvalsh(as_array(h))
    if e.shape != t.shape:
        raise DimensionMismatchError(f"dims differ: {len(e)} vs {len(t)}")
    s = float(np.mean(e) - np.mean(t))
    scale = max(1.0, float(np.max(np.abs(t))))
    if np.max(np.abs(e - t - s)) <= tol * scale:
        return s
    return None


@dataclass(frozen=True)
class CtSolution:
    """Coefficients for each generator followed by the identity coefficient."""

    coefficients: tuple[float, ...]
    achieved_hamiltonian: HermitianOperator
    spectral_residual: float
    parameters: dict = field(default_factory=dict)


def spectral_residual(h: HermitianOperator, rho: DensityMatrix, ctx: ThermalContext = DEFAULT_CONTEXT) -> float:
    g = gibbs_state(h, ctx)
    return float(np.max(np.abs(g.eigenvalues() - rho.eigenvalues())))


_H3 = pauli_on_site("z", 1, 2).matrix
_H6 = pauli_on_site("z", 2, 2).matrix
_H7 = heisenberg((1, 2), 2).matrix


def c2_intrinsic_hamiltonian(c1: float, c2_: float, c3: float, c4: float) -> HermitianOperator:
    """``c1 (1-H3)/2 + c2 (1-H6)/2 + c3 (1-H7)/2 + c4 1``."""
    eye = np.eye(4)
    return HermitianOperator(
        c1 * (eye - _H3) / 2 + c2_ * (eye - _H6) / 2 + c3 * (eye - _H7) / 2 + c4 * eye
    )


def ct_solve_c2(rho: DensityMatrix, ctx: ThermalContext = DEFAULT_CONTEXT) -> CtSolution:
    """Closed-form Hamiltonian in the span of C_2 whose Gibbs state has the spectrum of ``rho``.

    With ascending targets ``t1..t4`` and the assignment ``|00> -> t2``,
    ``|11> -> t3`` and the exchange block ``-> (t1, t4)``:
    ``c4 = t2``, ``c3 = (t1 + t4 - t2 - t3)/2``, ``c1 + c2 = t3 - t2`` and
    ``(c1 - c2)^2 = (t4 - t1)^2 - 4 c3^2``, which is non-negative for any
    ordered targets.
    """
    if rho.dim != 4:
        raise DimensionMismatchError(f"ct_solve_c2 needs a 4-dimensional state, got {rho.dim}")
    t1, t2, t3, t4 = _thermal_targets(rho, ctx)
    c4 = t2
    c3 = (t1 + t4 - t2 - t3) / 2
    total = t3 - t2
    disc = (t4 - t1) ** 2 - (2 * c3) ** 2
    diff = math.sqrt(max(disc, 0.0))
    c1, c2_ = (total + diff) / 2, (total - diff) / 2
    h = c2_intrinsic_hamiltonian(c1, c2_, c3, c4)
    # generator order of c2(): x1 y1 z1 x2 y2 z2 heisenberg, then identity
    coeffs = (0.0, 0.0, -c1 / 2, 0.0, 0.0, -c2_ / 2, -c3 / 2, (c1 + c2_ + c3) / 2 + c4)
    return CtSolution(
        coefficients=coeffs,
        achieved_hamiltonian=h,
        spectral_residual=spectral_residual(h, rho, ctx),
        parameters={"c1": c1, "c2": c2_, "c3": c3, "c4": c4},
    )


@dataclass(frozen=True)
class CtSearchResult:
    solution: CtSolution | None
    best_residual: float
    best: CtSolution


def ct_search_generic(
    cs: ControlSet,
    rho: DensityMatrix,
    ctx: ThermalContext = DEFAULT_CONTEXT,
    restarts: int = 16,
    maxfev: int = 4000,
    seed: int = 0,
    box: float = 50.0,
    threshold: float = 1e-6,
) -> CtSearchResult:
    """Multi-start Nelder-Mead search for a CT Hamiltonian in ``span(cs) + R 1``.

    The simplex works on the centred energy mismatch (smooth in the
    coefficients); acceptance uses the spectral residual of the Gibbs state.
    The identity coefficient is recovered from the forced shift.
    """
    if rho.dim != cs.dim:
        raise DimensionMismatchError(f"state dim {rho.dim} != control set dim {cs.dim}")
    t = _thermal_targets(rho, ctx)
    t_c = t - t.mean()
    mats = np.array([g.matrix for g in cs.generators])

    def hamiltonian(c: np.ndarray) -> np.ndarray:
        return np.tensordot(c, mats, axes=1)

    def objective(c: np.ndarray) -> float:
        e = np.linalg.eigvalsh(hamiltonian(c))
        return float(np.sum((e - e.mean() - t_c) ** 2))

    k = len(cs.generators)
    bounds = [(-box, box)] * k
    best_c, best_f = None, math.inf
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        x0 = rng.uniform(-3.0, 3.0, size=k)
        res = minimize(objective, x0, method="Nelder-Mead", bounds=bounds,
                       options={"maxfev": maxfev, "xatol": 1e-12, "fatol": 1e-20, "adaptive": k > 4})
        # restart from the end point: the simplex often stalls on a collapsed face
        res = minimize(objective, res.x, method="Nelder-Mead", bounds=bounds,
                       options={"maxfev": maxfev, "xatol": 1e-13, "fatol": 1e-22, "adaptive": k > 4})
        if res.fun < best_f:
            best_f, best_c = float(res.fun), np.asarray(res.x)
        if best_f < 1e-20:
            break
    h = hamiltonian(best_c)
    shift = float(np.mean(np.linalg.eigvalsh(h)) - t.mean())
    h_beta = HermitianOperator(h - shift * np.eye(cs.dim))
    sol = CtSolution(
        coefficients=tuple(float(c) for c in best_c) + (-shift,),
        achieved_hamiltonian=h_beta,
        spectral_residual=spectral_residual(h_beta, rho, ctx),
        parameters={"objective": best_f},
    )
    found = sol.spectral_residual <= threshold
    return CtSearchResult(solution=sol if found else None, best_residual=sol.spectral_residual, best=sol)
