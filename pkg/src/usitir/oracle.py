"""Brute-force verification routes.

``brute_force_su`` minimises the relative entropy between states reachable
from the input under a control set and Gibbs states of that set's
Hamiltonians, directly from the definition and without any closed form.
It is an upper bound on the true minimum up to optimiser noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .control import ControlSet, lie_closure_basis
from .errors import BracketError, IncompatibleControlSetError, InvalidStateError
from .operators import DensityMatrix, HermitianOperator, HilbertSpace, infer_space, pauli_on_site
from .thermo import LN2, gibbs_state, von_neumann_entropy


# --------------------------------------------------------------------------
# random states


def random_density_matrix(
    dim: int, rank: int | None = None, seed: int | np.random.Generator = 0, space: HilbertSpace | None = None
) -> DensityMatrix:
    """Ginibre construction ``G G^dagger / tr`` with ``rank`` complex-normal columns."""
    rank = dim if rank is None else rank
    if not 1 <= rank <= dim:
        raise InvalidStateError(f"rank must satisfy 1 <= rank <= {dim}, got {rank}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real, space or infer_space(dim))


def random_unitary(dim: int, seed: int | np.random.Generator = 0) -> np.ndarray:
    """Haar unitary from the QR decomposition of a Ginibre matrix."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


# --------------------------------------------------------------------------
# monotone root search


def bisect_monotone(
    f: Callable[[float], float],
    target: float,
    asymptotes: tuple[float, float] | None = None,
    max_expansions: int = 60,
) -> float:
    """Root of ``f(x) = target`` for strictly increasing ``f``.

    When ``target`` coincides with one of ``asymptotes = (f(-inf), f(+inf))``
    within 1e-12 the signed infinity is returned. The bracket starts at
    ``[-1, 1]`` and doubles at most ``max_expansions`` times; bisection then
    runs to machine precision.
    """
    if asymptotes is not None:
        lo_lim, hi_lim = asymptotes
        if abs(target - lo_lim) <= 1e-12:
            return -math.inf
        if abs(target - hi_lim) <= 1e-12:
            return math.inf
    lo, hi = -1.0, 1.0
    for _ in range(max_expansions):
        if f(lo) <= target:
            break
        lo *= 2.0
    else:
        raise BracketError(f"lower bracket not found after {max_expansions} expansions")
    for _ in range(max_expansions):
        if f(hi) >= target:
            break
        hi *= 2.0
    else:
        raise BracketError(f"upper bracket not found after {max_expansions} expansions")
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# uncontrollable entropy by direct minimisation


@dataclass(frozen=True)
class ReachableParameterization:
    """Unitaries ``exp(-i sum theta_k U_k)`` and Gibbs states of ``sum h_j F_j``."""

    control_set: str
    unitary_generators: tuple[np.ndarray, ...]
    field_generators: tuple[np.ndarray, ...]

    def __post_init__(self):
        dim = self.field_generators[0].shape[0]
        u = np.array(self.unitary_generators).reshape(-1, dim * dim)
        f = np.array(self.field_generators)
        diagonal = all(np.count_nonzero(m - np.diag(np.diag(m))) == 0 for m in f)
        object.__setattr__(self, "_u_stack", u)
        object.__setattr__(self, "_f_stack", f)
        object.__setattr__(self, "_f_diag", np.array([np.diag(m).real for m in f]) if diagonal else None)

    @property
    def n_params(self) -> int:
        return len(self.unitary_generators) + len(self.field_generators)

    def split(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        k = len(self.unitary_generators)
        return x[:k], x[k:]

    def unitary(self, theta: np.ndarray) -> np.ndarray:
        if len(theta) == 0:
            return np.eye(self._f_stack.shape[1], dtype=complex)
        dim = self._f_stack.shape[1]
        w, v = np.linalg.eigh((theta @ self._u_stack).reshape(dim, dim))
        return (v * np.exp(-1j * w)) @ v.conj().T

    def hamiltonian(self, fields: np.ndarray) -> np.ndarray:
        return np.tensordot(fields, self._f_stack, axes=1)

    def energy_and_log_z(self, rho1: np.ndarray, fields: np.ndarray) -> tuple[float, float]:
        """``Tr(rho1 H)`` and ``ln Tr exp(-H)`` for ``H = sum fields_j F_j``."""
        if self._f_diag is not None:
            e = fields @ self._f_diag
            energy = float(np.real(np.diagonal(rho1)) @ e)
        else:
            h = self.hamiltonian(fields)
            energy = float(np.real(np.sum(rho1 * h.T)))
            e = np.linalg.eigvalsh(h)
        m = -e.min()
        return energy, m + math.log(float(np.sum(np.exp(-e - m))))


def parameterization(cs: ControlSet) -> ReachableParameterization:
    """Unitaries always come from the Lie-closure basis of ``cs``.

    Gibbs families are reduced where local rotations make it exact: for L_N
    a z-field per site, for G_N one common z-field. C_2 keeps its
    z1, z2 and exchange terms; other sets use every generator.
    """
    unitary = tuple(b.matrix for b in lie_closure_basis(cs))
    n = cs.space.n_particles
    if cs.name == "L_N":
        fields = tuple(pauli_on_site("z", k, n).matrix for k in range(1, n + 1))
    elif cs.name == "G_N":
        fields = (cs.generators[2].matrix,)
    elif cs.name == "C_2":
        fields = (cs.generators[2].matrix, cs.generators[5].matrix, cs.generators[6].matrix)
    else:
        fields = tuple(g.matrix for g in cs.generators)
    return ReachableParameterization(cs.label, unitary, fields)


@dataclass(frozen=True)
class OracleResult:
    value: float  # bits
    converged: bool
    evaluations: int
    params: tuple[float, ...]
    rho1: DensityMatrix
    rho2: DensityMatrix


def relative_entropy_objective(rho: DensityMatrix, par: ReachableParameterization) -> Callable[[np.ndarray], float]:
    """``x -> S(U rho U^dag || exp(-H)/Z)`` in bits.

    For a Gibbs state ``ln rho2 = -H - ln Z``, so only ``<H>`` and ``ln Z``
    are needed; ``S(U rho U^dag) = S(rho)`` is a constant.
    """
    s0 = von_neumann_entropy(rho)
    m = rho.matrix
    k = len(par.unitary_generators)
    dim = m.shape[0]
    u_stack, f_diag = par._u_stack, par._f_diag

    if f_diag is None or k == 0:

        def objective(x: np.ndarray) -> float:
            theta, fields = par.split(np.asarray(x, dtype=float))
            u = par.unitary(theta)
            energy, log_z = par.energy_and_log_z(u @ m @ u.conj().T, fields)
            return -s0 + (energy + log_z) / LN2

        return objective

    # diagonal Gibbs family: only the populations of U rho U^dag matter
    def objective(x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        w, v = np.linalg.eigh((x[:k] @ u_stack).reshape(dim, dim))
        u = (v * np.exp(-1j * w)) @ v.conj().T
        populations = ((u @ m) * u.conj()).real.sum(axis=1)
        e = x[k:] @ f_diag
        lo = e.min()
        return -s0 + (populations @ e + math.log(np.exp(lo - e).sum()) - lo) / LN2

    return objective


def brute_force_su(
    rho: DensityMatrix,
    cs: ControlSet,
    restarts: int = 32,
    maxfev: int = 2000,
    seed: int = 0,
    field_box: float = 50.0,
) -> OracleResult:
    """Multi-start simplex minimisation of the defining relative entropy.

    ``converged`` means at least two restarts reached the best value within
    1e-5 bits.
    """
    if rho.dim != cs.dim:
        raise IncompatibleControlSetError(f"state dim {rho.dim} != control set dim {cs.dim}")
    if rho.dim == 1:
        return OracleResult(0.0, True, 0, (), rho, rho)
    par = parameterization(cs)
    obj = relative_entropy_objective(rho, par)
    k_u = len(par.unitary_generators)
    # angles stay unbounded: walls at +-pi trap the simplex, and exp covers the group anyway
    bounds = [(None, None)] * k_u + [(-field_box, field_box)] * len(par.field_generators)
    results = []
    evals = 0
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        x0 = np.concatenate([rng.uniform(-math.pi, math.pi, k_u), rng.uniform(-2.0, 2.0, par.n_params - k_u)])
        res = minimize(obj, x0, method="Nelder-Mead", bounds=bounds,
                       options={"maxfev": maxfev, "xatol": 1e-6, "fatol": 1e-10, "adaptive": par.n_params > 4})
        evals += res.nfev
        results.append((float(res.fun), r, res.x))
    results.sort(key=lambda t: (t[0], t[1]))
    best, _, x = results[0]
    converged = len(results) > 1 and results[1][0] - best <= 1e-5
    theta, fields = par.split(x)
    u = par.unitary(theta)
    h = par.hamiltonian(fields)
    return OracleResult(
        value=max(best, 0.0),
        converged=converged,
        evaluations=evals,
        params=tuple(float(v) for v in x),
        rho1=rho.conjugate_by(u),
        rho2=gibbs_state(HermitianOperator(h), space=rho.space),
    )
