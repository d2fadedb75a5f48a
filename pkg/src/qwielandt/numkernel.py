"""Dense complex-matrix kernels.

Conventions used everywhere in the package:

* vectorization is column stacking, ``vec(A X B) = (B.T ⊗ A) vec(X)``;
* the Hilbert-Schmidt inner product is ``<A, B> = tr(A^† B)``, which is the
  Euclidean inner product of the vectorizations;
* numerical rank counts singular values ``σ > rel_tol · σ_max``.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NotHermitian, SchemaError

HERMITIAN_RTOL = 1e-12


@dataclass(frozen=True)
class ToleranceConfig:
    """Numerical thresholds shared by all analyses.

    ``chain_dim_cap=None`` means "use d² for the map at hand".
    """

    psd_tol: float = 1e-8
    rank_rel_tol: float = 1e-8
    peripheral_tol: float = 1e-7
    strict_pos_tol: float = 1e-6
    subspace_tol: float = 1e-7
    chain_dim_cap: int | None = None

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if f.name == "chain_dim_cap":
                continue
            value = getattr(self, f.name)
            if not (isinstance(value, (int, float)) and 0 < value < 1e-2):
                raise ValueError(f"{f.name} must lie in (0, 1e-2), got {value!r}")
        cap = self.chain_dim_cap
        if cap is not None and (not isinstance(cap, int) or cap < 1):
            raise ValueError(f"chain_dim_cap must be a positive integer, got {cap!r}")

    def chain_cap(self, d: int) -> int:
        return self.chain_dim_cap if self.chain_dim_cap is not None else d * d

    @classmethod
    def from_mapping(cls, data: dict) -> "ToleranceConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise SchemaError(f"unknown tolerance fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json_file(cls, path) -> "ToleranceConfig":
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise SchemaError("tolerance file must hold a JSON object")
        return cls.from_mapping(data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


DEFAULT_TOL = ToleranceConfig()


def as_matc(a, *, square: bool = False) -> np.ndarray:
    """Validate and convert to a finite 2-D complex128 array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionMismatch(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    if square and m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2).conj()


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return (a + dagger(a)) / 2


def herm_eig(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix.

    Returns ascending eigenvalues and a unitary matrix of eigenvectors
    (columns). Raises :class:`NotHermitian` if ``‖A − A†‖_F`` exceeds
    ``1e-12 · ‖A‖_F``.
    """
    a = as_matc(a, square=True)
    scale = np.linalg.norm(a)
    if np.linalg.norm(a - a.conj().T) > HERMITIAN_RTOL * scale:
        raise NotHermitian("matrix is not Hermitian within relative tolerance 1e-12")
    return np.linalg.eigh(hermitian_part(a))


def min_eig(a: np.ndarray) -> float:
    """Smallest eigenvalue of the Hermitian part (no Hermiticity check)."""
    return float(np.linalg.eigvalsh(hermitian_part(np.asarray(a)))[0])


def svd_rank(a, rel_tol: float = DEFAULT_TOL.rank_rel_tol) -> int:
    s = np.linalg.svd(np.asarray(a, dtype=np.complex128), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))


def trace_norm(a) -> float:
    return float(np.linalg.svd(as_matc(a), compute_uv=False).sum())


def polar_unitary(a) -> np.ndarray:
    """Unitary ``u`` with ``a = u |a|``; it attains ``|tr(a u†)| = ‖a‖₁``."""
    w, _, vh = np.linalg.svd(as_matc(a, square=True))
    return w @ vh


def operator_norm(a) -> float:
    return float(np.linalg.norm(np.asarray(a), 2))


def nullspace(mat, rel_tol: float = DEFAULT_TOL.rank_rel_tol, atol: float = 0.0) -> np.ndarray:
    """Orthonormal kernel basis as the columns of an ``(n, k)`` array.

    Singular values ``σ ≤ max(rel_tol·σ_max, atol)`` count as zero.  ``atol``
    keeps a matrix made only of rounding noise from being read as full rank.
    A zero matrix has the full space as kernel; the identity has an empty
    ``(n, 0)`` kernel.
    """
    mat = np.asarray(mat, dtype=np.complex128)
    n = mat.shape[1]
    if mat.shape[0] == 0:
        return np.eye(n, dtype=np.complex128)
    if atol <= 0:
        return scipy.linalg.null_space(mat, rcond=rel_tol)
    _, s, vh = np.linalg.svd(mat, full_matrices=True)
    smax = s[0] if s.size else 0.0
    rank = int(np.count_nonzero(s > max(rel_tol * smax, atol)))
    return vh[rank:].conj().T


# -- vectorization and tensor plumbing ------------------------------------------


def vec(x) -> np.ndarray:
    return np.asarray(x).reshape(-1, order="F")


def unvec(v, shape: int | tuple[int, int]) -> np.ndarray:
    if isinstance(shape, (int, np.integer)):
        shape = (int(shape), int(shape))
    return np.asarray(v).reshape(shape, order="F")


def kron(*mats) -> np.ndarray:
    out = np.ones((1, 1), dtype=np.complex128)
    for m in mats:
        out = np.kron(out, m)
    return out


def _check_bipartite(x: np.ndarray, dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    n = int(np.prod(dims))
    if x.shape != (n, n):
        raise DimensionMismatch(f"matrix of shape {x.shape} does not match dims {dims}")
    return dims


def partial_trace(x, dims: Sequence[int], leg: int) -> np.ndarray:
    """Trace out subsystem ``leg`` of a matrix on ``⊗_k C^{dims[k]}``."""
    x = np.asarray(x)
    dims = _check_bipartite(x, dims)
    k = len(dims)
    t = x.reshape(dims + dims)
    t = np.trace(t, axis1=leg, axis2=leg + k)
    rest = [d for i, d in enumerate(dims) if i != leg]
    n = int(np.prod(rest)) if rest else 1
    return t.reshape(n, n)


def partial_transpose(x, dims: Sequence[int], leg: int) -> np.ndarray:
    x = np.asarray(x)
    dims = _check_bipartite(x, dims)
    k = len(dims)
    t = x.reshape(dims + dims)
    axes = list(range(2 * k))
    axes[leg], axes[leg + k] = axes[leg + k], axes[leg]
    return t.transpose(axes).reshape(x.shape)


# -- operator subspaces ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OperatorSubspace:
    """Subspace of M_d given by a Hilbert-Schmidt orthonormal basis.

    ``basis`` has shape ``(k, d, d)``.  The ``verified_*`` flags are set by
    :func:`qwielandt.multdomain.algebra_residuals` style checks; they are not
    inferred here.
    """

    d: int
    basis: np.ndarray
    verified_star_closed: bool = False
    verified_mult_closed: bool = False
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=np.complex128).reshape(-1, self.d, self.d)
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def vectors(self) -> np.ndarray:
        """Basis as columns of a ``(d², k)`` array of vectorizations."""
        return self.basis.transpose(0, 2, 1).reshape(self.dim, self.d * self.d).T

    def projector(self) -> np.ndarray:
        v = self.vectors()
        return v @ v.conj().T

    def project(self, x) -> np.ndarray:
        """Orthogonal projection of ``x`` onto the span."""
        v = self.vectors()
        return unvec(v @ (v.conj().T @ vec(x)), self.d)

    def contains(self, x, tol: float) -> bool:
        x = np.asarray(x)
        scale = max(np.linalg.norm(x), 1.0)
        return bool(np.linalg.norm(x - self.project(x)) <= tol * scale)

    def gram_error(self) -> float:
        v = self.vectors()
        return float(np.linalg.norm(v.conj().T @ v - np.eye(self.dim)))

    @classmethod
    def from_vectors(cls, vecs: np.ndarray, d: int, **kwargs) -> "OperatorSubspace":
        vecs = np.asarray(vecs).reshape(d * d, -1)
        mats = np.stack([unvec(vecs[:, j], d) for j in range(vecs.shape[1])]) if vecs.shape[1] else np.zeros((0, d, d))
        return cls(d=d, basis=mats, **kwargs)

    @classmethod
    def span(cls, mats: Iterable, d: int, rel_tol: float = DEFAULT_TOL.rank_rel_tol) -> "OperatorSubspace":
        return cls(d=d, basis=hs_orthonormalize(list(mats), d, rel_tol))


def hs_orthonormalize(mats: Sequence, d: int | None = None, rel_tol: float = DEFAULT_TOL.rank_rel_tol) -> np.ndarray:
    """HS-orthonormal basis ``(k, d, d)`` of the span of ``mats``.

    Uses an SVD of the stacked vectorizations so that the basis dimension is
    the numerical rank at ``rel_tol``.
    """
    if len(mats) == 0:
        if d is None:
            raise ValueError("dimension required for an empty list")
        return np.zeros((0, d, d), dtype=np.complex128)
    stack = np.stack([np.asarray(m, dtype=np.complex128) for m in mats])
    d = stack.shape[-1] if d is None else d
    cols = stack.transpose(0, 2, 1).reshape(len(mats), -1).T
    u, s, _ = np.linalg.svd(cols, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((0, d, d), dtype=np.complex128)
    r = int(np.count_nonzero(s > rel_tol * s[0]))
    return u[:, :r].T.reshape(r, d, d).transpose(0, 2, 1).copy()


def subspace_distance(s1: OperatorSubspace, s2: OperatorSubspace) -> float:
    """Frobenius distance between the orthogonal projectors onto two spans."""
    if s1.d != s2.d:
        raise DimensionMismatch(f"ambient dimensions differ: {s1.d} vs {s2.d}")
    return float(np.linalg.norm(s1.projector() - s2.projector()))


# -- random sampling helpers ----------------------------------------------------


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def ginibre(rng: np.random.Generator, *shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_unit_vectors(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """``n`` Haar-random unit vectors in C^d, shape ``(n, d)``."""
    z = ginibre(rng, n, d)
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def haar_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    z = ginibre(rng, d, d)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def rank_one(psi: np.ndarray) -> np.ndarray:
    """Batched outer products ``ψψ^†`` for ``psi`` of shape ``(..., d)``."""
    return psi[..., :, None] * psi[..., None, :].conj()
