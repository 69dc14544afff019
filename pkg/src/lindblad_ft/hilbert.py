"""Dense linear algebra over small complex Hilbert spaces.

Operators, kets and density matrices are thin immutable wrappers around
numpy arrays with their physical invariants checked at construction time.
Everything is dense; the target dimensions are single digits, so no sparse
path exists.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances for state/operator validation."""

    hermiticity: float = 1e-9
    trace: float = 1e-8
    positivity: float = 1e-7      # smallest admissible eigenvalue is -positivity
    ket_norm: float = 1e-9
    eigh_input: float = 1e-8


DEFAULT_TOLS = Tolerances()


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Operator:
    """A d x d complex matrix indexed by basis labels."""

    mat: np.ndarray

    def __post_init__(self):
        m = _as_readonly(self.mat)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise ValueError(f"operator must be a square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m.view(float))):
            raise ValueError("operator entries must be finite")
        object.__setattr__(self, "mat", m)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def dagger(self) -> "Operator":
        return Operator(self.mat.conj().T)

    def is_hermitian(self, atol: float = DEFAULT_TOLS.hermiticity) -> bool:
        return bool(np.max(np.abs(self.mat - self.mat.conj().T)) <= atol)

    @staticmethod
    def identity(dim: int) -> "Operator":
        return Operator(np.eye(dim))


@dataclass(frozen=True)
class Ket:
    """A normalised state vector."""

    vec: np.ndarray
    tols: Tolerances = field(default=DEFAULT_TOLS, compare=False)

    def __post_init__(self):
        v = _as_readonly(self.vec)
        if v.ndim != 1 or v.shape[0] < 1:
            raise ValueError(f"ket must be a vector, got shape {v.shape}")
        if not np.all(np.isfinite(v.view(float))):
            raise ValueError("ket amplitudes must be finite")
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > self.tols.ket_norm:
            raise ValueError(f"ket norm {norm} deviates from 1 beyond tolerance")
        object.__setattr__(self, "vec", v)

    @property
    def dim(self) -> int:
        return self.vec.shape[0]

    @staticmethod
    def basis(dim: int, index: int) -> "Ket":
        v = np.zeros(dim, dtype=complex)
        v[index] = 1.0
        return Ket(v)


@dataclass(frozen=True)
class DensityMatrix:
    """A Hermitian, unit-trace, positive-semidefinite operator."""

    op: Operator
    tols: Tolerances = field(default=DEFAULT_TOLS, compare=False)

    def __post_init__(self):
        if not isinstance(self.op, Operator):
            object.__setattr__(self, "op", Operator(self.op))
        m = self.op.mat
        t = self.tols
        herm = np.max(np.abs(m - m.conj().T))
        if herm > t.hermiticity:
            raise ValueError(f"density matrix not Hermitian: max asymmetry {herm:.3e}")
        tr = np.trace(m)
        if abs(tr - 1.0) > t.trace:
            raise ValueError(f"density matrix trace {tr} deviates from 1")
        lo = float(np.min(np.linalg.eigvalsh(0.5 * (m + m.conj().T))))
        if lo < -t.positivity:
            raise ValueError(f"density matrix has eigenvalue {lo:.3e} below -{t.positivity}")

    @property
    def mat(self) -> np.ndarray:
        return self.op.mat

    @property
    def dim(self) -> int:
        return self.op.dim

    @staticmethod
    def from_ket(psi: Ket) -> "DensityMatrix":
        return DensityMatrix(Operator(np.outer(psi.vec, psi.vec.conj())))

    @staticmethod
    def from_diagonal(weights) -> "DensityMatrix":
        w = np.asarray(weights, dtype=float)
        return DensityMatrix(Operator(np.diag(w.astype(complex))))


def tensor(a: Operator, b: Operator) -> Operator:
    """Kronecker product with the left factor as the slow index."""
    return Operator(np.kron(a.mat, b.mat))


def expectation(x: Operator, state) -> complex:
    """<psi|X|psi> for kets, Tr[X rho] for density matrices."""
    if isinstance(state, Ket):
        if state.dim != x.dim:
            raise ValueError(f"dimension mismatch: operator {x.dim}, ket {state.dim}")
        return complex(state.vec.conj() @ x.mat @ state.vec)
    if isinstance(state, DensityMatrix):
        if state.dim != x.dim:
            raise ValueError(f"dimension mismatch: operator {x.dim}, state {state.dim}")
        return complex(np.trace(x.mat @ state.mat))
    raise TypeError(f"expected Ket or DensityMatrix, got {type(state).__name__}")


def eigh(x: Operator, atol: float = DEFAULT_TOLS.eigh_input):
    """Eigendecomposition of a Hermitian operator.

    Returns (eigenvalues ascending, matrix of orthonormal eigenvector
    columns).  Raises on non-Hermitian input beyond `atol`.
    """
    m = x.mat
    asym = np.max(np.abs(m - m.conj().T))
    if asym > atol:
        raise ValueError(f"eigh requires a Hermitian operator (asymmetry {asym:.3e})")
    vals, vecs = np.linalg.eigh(0.5 * (m + m.conj().T))
    return vals, vecs


def hermitian_function(x: Operator, fn) -> Operator:
    """Apply a scalar function to a Hermitian operator via its spectrum."""
    vals, vecs = eigh(x)
    return Operator((vecs * fn(vals)) @ vecs.conj().T)
