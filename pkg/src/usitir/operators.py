"""Dense operator foundation: Hilbert spaces, Hermitian operators, density
matrices and builders for the spin operators used throughout the package.

Basis conventions
-----------------
* Multi-qubit states use the computational basis ``|q1 q2 ... qN>`` with qubit
  1 the slowest index (``np.kron`` order). ``|0>`` is the sigma_z = +1 state.
* Bosonic qubits use the occupation basis ``|0>, ..., |N>`` where ``|n>`` has
  ``n`` particles in the sigma_z = +1 level, so the collective sigma_z reads
  ``diag(-N, -N + 2, ..., N)``.
* Sites are numbered from 1, matching the physics notation sigma^(k).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .config import get_tolerances
from .errors import (
    DimensionMismatchError,
    DomainError,
    InvalidOperatorError,
    InvalidStateError,
    UnsupportedStatisticsError,
)

STATISTICS = ("distinguishable", "boson", "fermion")

SIGMA = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class HilbertSpace:
    """Labelled state space of ``n_particles`` systems of ``local_dim`` levels."""

    n_particles: int
    local_dim: int = 2
    statistics: str = "distinguishable"

    def __post_init__(self):
        if self.n_particles < 0 or self.local_dim < 1:
            raise InvalidStateError(
                "HilbertSpace invariant violated: n_particles >= 0 and local_dim >= 1"
            )
        if self.statistics not in STATISTICS:
            raise UnsupportedStatisticsError(
                f"statistics must be one of {STATISTICS}, got {self.statistics!r}"
            )
        if self.statistics == "fermion" and self.n_particles > self.local_dim:
            raise UnsupportedStatisticsError(
                f"no fermionic states exist for {self.n_particles} particles with "
                f"local_dim={self.local_dim}"
            )

    @classmethod
    def qudit(cls, dim: int) -> "HilbertSpace":
        return cls(1, dim, "distinguishable")

    @classmethod
    def qubits(cls, n: int, statistics: str = "distinguishable") -> "HilbertSpace":
        return cls(n, 2, statistics)

    @property
    def dim(self) -> int:
        n, d = self.n_particles, self.local_dim
        if self.statistics == "distinguishable":
            return d**n
        if self.statistics == "boson":
            return math.comb(n + d - 1, n)
        return math.comb(d, n)

    @property
    def subsystem_dims(self) -> tuple[int, ...]:
        if self.statistics != "distinguishable":
            raise UnsupportedStatisticsError(
                f"subsystem structure requires distinguishable statistics, got {self.statistics}"
            )
        return (self.local_dim,) * self.n_particles

    @property
    def is_qubits(self) -> bool:
        return self.local_dim == 2


def infer_space(dim: int) -> HilbertSpace:
    """Distinguishable qubits when ``dim`` is a power of two, else one qudit."""
    n = dim.bit_length() - 1
    if dim >= 2 and 2**n == dim:
        return HilbertSpace.qubits(n)
    return HilbertSpace.qudit(dim)


@dataclass(frozen=True)
class HermitianOperator:
    """Hermitian matrix used as a Hamiltonian or control generator."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidOperatorError(f"HermitianOperator must be square, got shape {m.shape}")
        resid = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
        if resid > get_tolerances().hermiticity * max(1.0, np.max(np.abs(m))):
            raise InvalidOperatorError(
                f"HermitianOperator invariant violated: |M - M^dagger|_max <= hermiticity "
                f"tolerance (residual {resid:.3e})"
            )
        object.__setattr__(self, "matrix", _frozen(0.5 * (m + m.conj().T)))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __add__(self, other):
        if isinstance(other, HermitianOperator):
            return HermitianOperator(self.matrix + other.matrix)
        return HermitianOperator(self.matrix + float(other) * np.eye(self.dim))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, scalar: float):
        return HermitianOperator(float(scalar) * self.matrix)

    __rmul__ = __mul__

    def __neg__(self):
        return HermitianOperator(-self.matrix)

    @classmethod
    def zeros(cls, dim: int) -> "HermitianOperator":
        return cls(np.zeros((dim, dim)))

    @classmethod
    def identity(cls, dim: int) -> "HermitianOperator":
        return cls(np.eye(dim))


@dataclass(frozen=True)
class DensityMatrix:
    """Unit-trace positive semidefinite matrix on a labelled space.

    When ``space`` is omitted it is inferred: ``2**n`` dimensions become ``n``
    distinguishable qubits, anything else a single qudit.
    """

    matrix: np.ndarray
    space: HilbertSpace = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidStateError(f"DensityMatrix must be square, got shape {m.shape}")
        space = self.space if self.space is not None else infer_space(m.shape[0])
        if space.dim != m.shape[0]:
            raise DimensionMismatchError(
                f"DensityMatrix invariant violated: matrix dim {m.shape[0]} != space.dim {space.dim}"
            )
        tol = get_tolerances()
        herm = np.max(np.abs(m - m.conj().T))
        if herm > tol.hermiticity:
            raise InvalidStateError(
                f"DensityMatrix invariant violated: Hermitian within tolerance (residual {herm:.3e})"
            )
        m = 0.5 * (m + m.conj().T)
        tr = np.trace(m).real
        if abs(tr - 1.0) > tol.trace:
            raise InvalidStateError(
                f"DensityMatrix invariant violated: trace = 1 within tolerance (got {tr:.12g})"
            )
        lam_min = np.linalg.eigvalsh(m)[0]
        if lam_min < -tol.psd:
            raise InvalidStateError(
                "DensityMatrix invariant violated: smallest eigenvalue >= -tolerance "
                f"(got {lam_min:.3e})"
            )
        object.__setattr__(self, "matrix", _frozen(m))
        object.__setattr__(self, "space", space)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        """Ascending spectrum, clipped to ``[0, inf)`` (validated PSD already)."""
        return np.clip(np.linalg.eigvalsh(self.matrix), 0.0, None)

    def with_space(self, space: HilbertSpace) -> "DensityMatrix":
        return DensityMatrix(self.matrix, space)

    def conjugate_by(self, u: np.ndarray) -> "DensityMatrix":
        u = np.asarray(u)
        return DensityMatrix(u @ self.matrix @ u.conj().T, self.space)

    @classmethod
    def from_ket(cls, psi: Sequence[complex], space: HilbertSpace | None = None) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).ravel()
        norm = np.linalg.norm(psi)
        if norm == 0:
            raise InvalidStateError("cannot build a state from the zero vector")
        psi = psi / norm
        return cls(np.outer(psi, psi.conj()), space)

    @classmethod
    def maximally_mixed(cls, space: HilbertSpace | int) -> "DensityMatrix":
        if isinstance(space, int):
            space = infer_space(space)
        return cls(np.eye(space.dim) / space.dim, space)

    @classmethod
    def diagonal(cls, probs: Sequence[float], space: HilbertSpace | None = None) -> "DensityMatrix":
        return cls(np.diag(np.asarray(probs, dtype=float)), space)


OperatorLike = Union[HermitianOperator, DensityMatrix, np.ndarray]


def as_array(a: OperatorLike) -> np.ndarray:
    if isinstance(a, (HermitianOperator, DensityMatrix)):
        return a.matrix
    return np.asarray(a, dtype=complex)


def _hermitian(a: OperatorLike) -> HermitianOperator:
    return a if isinstance(a, HermitianOperator) else HermitianOperator(as_array(a))


# --------------------------------------------------------------------------
# basic operations


def tensor(a: OperatorLike, b: OperatorLike):
    """Kronecker product with ``a`` as the slow index; keeps the operand kind."""
    ma, mb = as_array(a), as_array(b)
    if ma.shape[0] != ma.shape[1] or mb.shape[0] != mb.shape[1]:
        raise DimensionMismatchError("tensor operands must be square")
    out = np.kron(ma, mb)
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        sa, sb = a.space, b.space
        if (
            sa.statistics == sb.statistics == "distinguishable"
            and sa.local_dim == sb.local_dim
        ):
            space = HilbertSpace(sa.n_particles + sb.n_particles, sa.local_dim)
        else:
            space = HilbertSpace.qudit(out.shape[0])
        return DensityMatrix(out, space)
    if isinstance(a, HermitianOperator) and isinstance(b, HermitianOperator):
        return HermitianOperator(out)
    return out


def tensor_all(factors: Iterable[OperatorLike]):
    factors = list(factors)
    out = factors[0]
    for f in factors[1:]:
        out = tensor(out, f)
    return out


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on the (1-based) subsystems listed in ``keep``.

    Kept factors appear in ascending site order regardless of the order of
    ``keep``.
    """
    dims = rho.space.subsystem_dims
    n = len(dims)
    keep = sorted(set(int(k) for k in keep))
    if len(keep) == 0 or any(k < 1 or k > n for k in keep):
        raise InvalidStateError(f"keep indices must be distinct values in 1..{n}, got {keep}")
    idx = [k - 1 for k in keep]
    traced = [i for i in range(n) if i not in idx]
    t = rho.matrix.reshape(dims + dims)
    # move kept row/col axes to front, traced ones after, then contract
    perm = idx + traced + [n + i for i in idx] + [n + i for i in traced]
    t = np.transpose(t, perm)
    dk = int(np.prod([dims[i] for i in idx]))
    dt = int(np.prod([dims[i] for i in traced])) if traced else 1
    t = t.reshape(dk, dt, dk, dt)
    red = np.einsum("ajbj->ab", t)
    return DensityMatrix(red, HilbertSpace(len(idx), rho.space.local_dim))


def reduced_states(rho: DensityMatrix) -> list[DensityMatrix]:
    """Single-site reduced states ``[rho^(1), ..., rho^(N)]``."""
    return [partial_trace(rho, [k]) for k in range(1, rho.space.n_particles + 1)]


def eig_hermitian(h: OperatorLike) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and a unitary matrix of eigenvectors (columns)."""
    m = _hermitian(h).matrix
    evals, evecs = np.linalg.eigh(m)
    return evals, evecs


def matrix_function(h: OperatorLike, f: Callable[[np.ndarray], np.ndarray]) -> HermitianOperator:
    """``V diag(f(lambda)) V^dagger`` for a real scalar function ``f``."""
    evals, evecs = eig_hermitian(h)
    with np.errstate(all="ignore"):
        fv = np.asarray(f(evals), dtype=float)
    if not np.all(np.isfinite(fv)):
        bad = evals[~np.isfinite(fv)]
        raise DomainError(f"function undefined at eigenvalue(s) {bad.tolist()}")
    return HermitianOperator((evecs * fv) @ evecs.conj().T)


def commutator(a: OperatorLike, b: OperatorLike) -> np.ndarray:
    ma, mb = as_array(a), as_array(b)
    if ma.shape != mb.shape:
        raise DimensionMismatchError(f"commutator dims differ: {ma.shape} vs {mb.shape}")
    return ma @ mb - mb @ ma


# --------------------------------------------------------------------------
# builders


def pauli_on_site(axis: str, site: int, n_qubits: int) -> HermitianOperator:
    """sigma_axis acting on qubit ``site`` (1-based) of ``n_qubits``."""
    if axis not in ("x", "y", "z"):
        raise InvalidOperatorError(f"axis must be x, y or z, got {axis!r}")
    if not 1 <= site <= n_qubits:
        raise InvalidOperatorError(f"site must satisfy 1 <= site <= {n_qubits}, got {site}")
    factors = [SIGMA["i"]] * n_qubits
    factors[site - 1] = SIGMA[axis]
    out = factors[0]
    for f in factors[1:]:
        out = np.kron(out, f)
    return HermitianOperator(out)


def collective(axis: str, n_qubits: int) -> HermitianOperator:
    """``sum_k sigma_axis^(k)`` on distinguishable qubits."""
    out = np.zeros((2**n_qubits,) * 2, dtype=complex)
    for k in range(1, n_qubits + 1):
        out = out + pauli_on_site(axis, k, n_qubits).matrix
    return HermitianOperator(out)


def heisenberg(pair: tuple[int, int], n_qubits: int) -> HermitianOperator:
    """Exchange coupling ``sum_a sigma_a^(j) sigma_a^(k)``."""
    j, k = pair
    if j == k or not (1 <= j <= n_qubits and 1 <= k <= n_qubits):
        raise InvalidOperatorError(f"invalid Heisenberg pair {pair} for {n_qubits} qubits")
    out = sum(
        pauli_on_site(a, j, n_qubits).matrix @ pauli_on_site(a, k, n_qubits).matrix
        for a in "xyz"
    )
    return HermitianOperator(out)


def boson_fn_operator(n: int) -> HermitianOperator:
    """Collective sigma_z of ``n`` bosonic qubits in the occupation basis."""
    if n < 1:
        raise InvalidOperatorError(f"particle count must be >= 1, got {n}")
    return HermitianOperator(np.diag(np.arange(-n, n + 1, 2).astype(float)))


def symmetric_isometry(n: int) -> np.ndarray:
    """Columns are the normalised symmetric (Dicke) states ``|0>..|n>``.

    Maps the bosonic occupation basis into the ``2**n`` distinguishable space.
    """
    iso = np.zeros((2**n, n + 1), dtype=complex)
    for bits in itertools.product((0, 1), repeat=n):
        up = bits.count(0)  # computational |0> is the sigma_z = +1 level
        iso[int("".join(map(str, bits)), 2) if n else 0, up] = 1.0
    return iso / np.linalg.norm(iso, axis=0)


def antisymmetric_isometry_2() -> np.ndarray:
    """The two-qubit singlet: the only fermionic state of two qubits."""
    return np.array([[0.0], [1.0], [-1.0], [0.0]], dtype=complex) / np.sqrt(2)


def swap_operator(n_qubits: int, j: int, k: int) -> np.ndarray:
    dim = 2**n_qubits
    out = np.zeros((dim, dim))
    for i in range(dim):
        bits = list(format(i, f"0{n_qubits}b"))
        bits[j - 1], bits[k - 1] = bits[k - 1], bits[j - 1]
        out[int("".join(bits), 2), i] = 1.0
    return out


def ket_state(label: str, space: HilbertSpace | None = None) -> DensityMatrix:
    """Product state from a string over ``0 1 + -``, e.g. ``"10"`` or ``"+0"``."""
    single = {
        "0": np.array([1, 0], dtype=complex),
        "1": np.array([0, 1], dtype=complex),
        "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
        "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
    }
    if not label or any(ch not in single for ch in label):
        raise InvalidStateError(f"ket label must use characters 0 1 + -, got {label!r}")
    psi = single[label[0]]
    for ch in label[1:]:
        psi = np.kron(psi, single[ch])
    return DensityMatrix.from_ket(psi, space or HilbertSpace.qubits(len(label)))


def bell_state(name: str = "phi+") -> DensityMatrix:
    s = 1 / np.sqrt(2)
    vecs = {
        "phi+": [s, 0, 0, s],
        "phi-": [s, 0, 0, -s],
        "psi+": [0, s, s, 0],
        "psi-": [0, s, -s, 0],
    }
    if name not in vecs:
        raise InvalidStateError(f"unknown Bell state {name!r}; expected one of {sorted(vecs)}")
    return DensityMatrix.from_ket(vecs[name], HilbertSpace.qubits(2))


def werner_state(p: float) -> DensityMatrix:
    """``(1 - p) I/4 + p |Phi+><Phi+|``."""
    if not 0.0 <= p <= 1.0:
        raise InvalidStateError(f"Werner weight must satisfy 0 <= p <= 1, got {p}")
    return DensityMatrix(
        (1 - p) * np.eye(4) / 4 + p * bell_state("phi+").matrix, HilbertSpace.qubits(2)
    )


def occupation_state(n: int, n_particles: int) -> DensityMatrix:
    """Bosonic Fock state ``|n><n|`` of ``n_particles`` qubits."""
    if not 0 <= n <= n_particles:
        raise InvalidStateError(f"occupation must satisfy 0 <= n <= {n_particles}, got {n}")
    space = HilbertSpace.qubits(n_particles, "boson")
    psi = np.zeros(space.dim)
    psi[n] = 1.0
    return DensityMatrix.from_ket(psi, space)
