"""Entropies, Gibbs states and free energies.

Entropies are in bits. Energies and free energies are in units of k_B T
when ``beta = 1`` (the default), i.e. they are ``beta * E`` in general.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .config import get_tolerances
from .errors import DimensionMismatchError, InvalidStateError, UnsupportedStatisticsError
from .operators import (
    DensityMatrix,
    HermitianOperator,
    HilbertSpace,
    OperatorLike,
    as_array,
    eig_hermitian,
    reduced_states,
)

LN2 = math.log(2.0)


@dataclass(frozen=True)
class ThermalContext:
    """Reservoir inverse temperature; ``beta = 1`` reports energies in k_B T."""

    beta: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise InvalidStateError(f"ThermalContext invariant violated: beta > 0 (got {self.beta})")


DEFAULT_CONTEXT = ThermalContext()


def _shannon_bits(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """``-sum lambda log2 lambda`` with ``0 log 0 = 0``."""
    s = _shannon_bits(rho.eigenvalues())
    # + 0.0 turns -0.0 from a pure spectrum into 0.0
    return min(max(s, 0.0), math.log2(rho.dim)) + 0.0


def relative_entropy(sigma: DensityMatrix, tau: DensityMatrix) -> float:
    """``S(sigma || tau)`` in bits; ``math.inf`` when supp(sigma) is not in supp(tau)."""
    if sigma.dim != tau.dim:
        raise DimensionMismatchError(f"relative_entropy dims differ: {sigma.dim} vs {tau.dim}")
    tol = get_tolerances()
    ls, vs = np.linalg.eigh(sigma.matrix)
    lt, vt = np.linalg.eigh(tau.matrix)
    ls = np.clip(ls, 0.0, None)
    lt = np.clip(lt, 0.0, None)
    # overlap[i, j] = |<s_i|t_j>|^2
    overlap = np.abs(vs.conj().T @ vt) ** 2
    weight_on_t = ls @ overlap
    null = lt < tol.support_tau
    if np.any(weight_on_t[null] > tol.support_sigma):
        return math.inf
    with np.errstate(divide="ignore"):
        log_t = np.where(null, 0.0, np.log2(np.where(null, 1.0, lt)))
    cross = float(weight_on_t @ log_t)
    val = -_shannon_bits(ls) - cross
    return max(val, 0.0)


def _log_partition(h: OperatorLike, beta: float) -> tuple[float, np.ndarray, np.ndarray]:
    evals, evecs = eig_hermitian(h)
    return float(logsumexp(-beta * evals)), evals, evecs


def partition_function(h: OperatorLike, ctx: ThermalContext = DEFAULT_CONTEXT) -> float:
    return math.exp(_log_partition(h, ctx.beta)[0])


def gibbs_state(
    h: OperatorLike, ctx: ThermalContext = DEFAULT_CONTEXT, space: HilbertSpace | None = None
) -> DensityMatrix:
    """``exp(-beta H) / Z``, evaluated on the spectrum shifted by its minimum."""
    evals, evecs = eig_hermitian(h)
    w = np.exp(-ctx.beta * (evals - evals[0]))
    w /= w.sum()
    return DensityMatrix((evecs * w) @ evecs.conj().T, space)


def free_energy(h: OperatorLike, ctx: ThermalContext = DEFAULT_CONTEXT) -> float:
    """Helmholtz free energy ``-(1/beta) ln Tr exp(-beta H)``."""
    return -_log_partition(h, ctx.beta)[0] / ctx.beta


def mean_energy(rho: DensityMatrix, h: OperatorLike) -> float:
    return float(np.real(np.trace(rho.matrix @ as_array(h))))


def decohere(rho: DensityMatrix) -> DensityMatrix:
    """Drop every off-diagonal element in the computational basis."""
    return DensityMatrix(np.diag(np.diag(rho.matrix).real), rho.space)


def averaged_decohered_reduced(rho: DensityMatrix) -> DensityMatrix:
    """Mean over sites of the decohered single-qubit reduced states."""
    if rho.space.statistics != "distinguishable":
        raise UnsupportedStatisticsError(
            f"averaged_decohered_reduced requires distinguishable qubits, got {rho.space.statistics}"
        )
    reds = reduced_states(rho)
    avg = sum(decohere(r).matrix for r in reds) / len(reds)
    return DensityMatrix(avg, HilbertSpace(1, rho.space.local_dim))


def averaged_reduced(rho: DensityMatrix) -> DensityMatrix:
    """``(1/N) sum_k rho^(k)``."""
    reds = reduced_states(rho)
    return DensityMatrix(sum(r.matrix for r in reds) / len(reds), HilbertSpace(1, rho.space.local_dim))
