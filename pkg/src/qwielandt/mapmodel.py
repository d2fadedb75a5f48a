"""Linear maps on M_d: representations, algebra, and structural predicates.

A :class:`SuperOperator` always stores the d²×d² transfer matrix ``T`` with
``vec(Φ(X)) = T vec(X)`` (column stacking).  Choi and Kraus forms are derived
on demand; the Choi matrix is ``C = Σ_ij E_ij ⊗ Φ(E_ij)``, so trace
preservation reads ``tr_2 C = 1``.
"""
from __future__ import annotations

import enum
import functools
import json
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Sequence

import numpy as np

from . import numkernel as nk
from .errors import (
    DimensionMismatch,
    NotCompletelyPositive,
    SchemaError,
    ShapeMismatch,
)
from .numkernel import DEFAULT_TOL, ToleranceConfig

DEFAULT_SAMPLES = 10_000


# -- representation changes on raw arrays ---------------------------------------


def transfer_to_choi(transfer: np.ndarray, d: int) -> np.ndarray:
    t4 = transfer.reshape((d, d, d, d), order="F")  # (row, col, in_row, in_col)
    return t4.transpose(2, 0, 3, 1).reshape(d * d, d * d)


def choi_to_transfer(choi: np.ndarray, d: int) -> np.ndarray:
    t4 = choi.reshape(d, d, d, d).transpose(1, 3, 0, 2)
    return t4.reshape((d * d, d * d), order="F")


def kraus_to_transfer(ops: Sequence[np.ndarray]) -> np.ndarray:
    a = np.asarray(ops)
    d = a.shape[-1]
    return np.einsum("kab,kcd->acbd", a.conj(), a).reshape(d * d, d * d)


@dataclass(frozen=True, eq=False)
class SuperOperator:
    """A linear map on M_d stored by its transfer matrix.

    ``meta`` carries construction provenance (for example
    ``{"construction": "holevo"}``) and analytically known ground truth used
    by the test-suite.  Instances are immutable; derived forms are cached.
    """

    d: int
    transfer: np.ndarray
    choi_cache: np.ndarray | None = None
    kraus_cache: tuple | None = None
    name: str | None = None
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        t = nk.as_matc(self.transfer, square=True)
        if t.shape != (self.d * self.d, self.d * self.d):
            raise ShapeMismatch(f"transfer of shape {t.shape} does not act on M_{self.d}")
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "transfer", t)
        if self.kraus_cache is not None:
            ks = tuple(np.array(k, dtype=np.complex128) for k in self.kraus_cache)
            for k in ks:
                k.setflags(write=False)
            object.__setattr__(self, "kraus_cache", ks)
        object.__setattr__(self, "meta", MappingProxyType(dict(self.meta)))

    # -- evaluation --

    def __call__(self, x) -> np.ndarray:
        return self.apply(x)

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.complex128)
        if x.shape != (self.d, self.d):
            raise DimensionMismatch(f"input of shape {x.shape} for a map on M_{self.d}")
        return nk.unvec(self.transfer @ nk.vec(x), self.d)

    def apply_batch(self, xs: np.ndarray) -> np.ndarray:
        """Apply to a stack ``(m, d, d)`` of inputs."""
        m = xs.shape[0]
        flat = np.swapaxes(xs, 1, 2).reshape(m, -1)
        return np.swapaxes((flat @ self.transfer.T).reshape(m, self.d, self.d), 1, 2)

    def apply_rank_one(self, psi: np.ndarray) -> np.ndarray:
        """``Φ(ψψ†)`` for a batch of vectors ``psi`` of shape ``(m, d)``."""
        return self.apply_batch(nk.rank_one(psi))

    # -- derived forms --

    @functools.cached_property
    def choi(self) -> np.ndarray:
        if self.choi_cache is not None:
            return np.asarray(self.choi_cache)
        return transfer_to_choi(self.transfer, self.d)

    @property
    def kraus(self) -> tuple | None:
        return self.kraus_cache

    @property
    def has_kraus(self) -> bool:
        return self.kraus_cache is not None

    def with_meta(self, **updates) -> "SuperOperator":
        meta = dict(self.meta)
        meta.update(updates)
        return SuperOperator(self.d, self.transfer, self.choi_cache, self.kraus_cache, self.name, meta)

    def renamed(self, name: str) -> "SuperOperator":
        return SuperOperator(self.d, self.transfer, self.choi_cache, self.kraus_cache, name, self.meta)

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        kraus = f", {len(self.kraus_cache)} Kraus" if self.has_kraus else ""
        return f"<SuperOperator{label} on M_{self.d}{kraus}>"


# -- constructors ---------------------------------------------------------------


def from_kraus(ops: Sequence, name: str | None = None, meta: Mapping | None = None) -> SuperOperator:
    if len(ops) == 0:
        raise ShapeMismatch("at least one Kraus operator is required")
    mats = [nk.as_matc(k) for k in ops]
    d = mats[0].shape[0]
    for k in mats:
        if k.shape != (d, d):
            raise ShapeMismatch(f"Kraus operators must all be {d}×{d}, got {k.shape}")
    return SuperOperator(d, kraus_to_transfer(mats), kraus_cache=tuple(mats), name=name, meta=meta or {})


def from_choi(choi, name: str | None = None, meta: Mapping | None = None) -> SuperOperator:
    c = nk.as_matc(choi, square=True)
    d = int(round(np.sqrt(c.shape[0])))
    if d * d != c.shape[0]:
        raise ShapeMismatch(f"Choi matrix size {c.shape[0]} is not a perfect square")
    return SuperOperator(d, choi_to_transfer(c, d), choi_cache=c, name=name, meta=meta or {})


def from_transfer(t, name: str | None = None, meta: Mapping | None = None) -> SuperOperator:
    t = nk.as_matc(t, square=True)
    d = int(round(np.sqrt(t.shape[0])))
    if d * d != t.shape[0]:
        raise ShapeMismatch(f"transfer size {t.shape[0]} is not a perfect square")
    return SuperOperator(d, t, name=name, meta=meta or {})


def from_function(fn: Callable[[np.ndarray], np.ndarray], d: int, name: str | None = None, meta: Mapping | None = None) -> SuperOperator:
    """Tabulate an arbitrary linear ``fn`` on the matrix units of M_d."""
    t = np.zeros((d * d, d * d), dtype=np.complex128)
    for j in range(d):
        for i in range(d):
            e = np.zeros((d, d), dtype=np.complex128)
            e[i, j] = 1.0
            t[:, i + j * d] = nk.vec(fn(e))
    return SuperOperator(d, t, name=name, meta=meta or {})


def identity_map(d: int) -> SuperOperator:
    return from_kraus([np.eye(d)], name="identity")


def to_kraus(s: SuperOperator, tol: ToleranceConfig = DEFAULT_TOL) -> list[np.ndarray]:
    """Canonical (HS-orthogonal) Kraus operators from the Choi eigendecomposition."""
    c = s.choi
    scale = max(nk.operator_norm(c), np.finfo(float).tiny)
    if np.linalg.norm(c - c.conj().T) > tol.psd_tol * scale:
        raise NotCompletelyPositive("Choi matrix is not Hermitian")
    w, v = np.linalg.eigh(nk.hermitian_part(c))
    if w[0] < -tol.psd_tol * scale:
        raise NotCompletelyPositive(f"Choi matrix has eigenvalue {w[0]:.3e}")
    keep = w > tol.rank_rel_tol * w[-1]
    ops = [np.sqrt(lam) * nk.unvec(v[:, j], s.d) for j, lam in zip(np.flatnonzero(keep), w[keep])]
    return ops[::-1]


def with_kraus(s: SuperOperator, tol: ToleranceConfig = DEFAULT_TOL) -> SuperOperator:
    """Return ``s`` with a Kraus cache, computing one from the Choi matrix if needed."""
    if s.has_kraus:
        return s
    return SuperOperator(s.d, s.transfer, s.choi_cache, tuple(to_kraus(s, tol)), s.name, s.meta)


# -- algebra --------------------------------------------------------------------


def _same_d(s1: SuperOperator, s2: SuperOperator):
    if s1.d != s2.d:
        raise DimensionMismatch(f"maps act on M_{s1.d} and M_{s2.d}")


def compose(s1: SuperOperator, s2: SuperOperator) -> SuperOperator:
    """``s1 ∘ s2`` (apply ``s2`` first)."""
    _same_d(s1, s2)
    kraus = None
    if s1.has_kraus and s2.has_kraus and len(s1.kraus) * len(s2.kraus) <= s1.d**4:
        kraus = tuple(a @ b for a in s1.kraus for b in s2.kraus)
    return SuperOperator(s1.d, s1.transfer @ s2.transfer, kraus_cache=kraus)


def power(s: SuperOperator, k: int) -> SuperOperator:
    if k < 0:
        raise ValueError("power must be non-negative")
    if k == 0:
        return identity_map(s.d)
    if k == 1:
        return s
    return SuperOperator(s.d, np.linalg.matrix_power(s.transfer, k))


def tensor(s1: SuperOperator, s2: SuperOperator) -> SuperOperator:
    """``Φ ⊗ Ψ`` acting on M_{d1} ⊗ M_{d2} = M_{d1 d2} (Kronecker ordering)."""
    d1, d2 = s1.d, s2.d
    t1 = s1.transfer.reshape((d1,) * 4, order="F")
    t2 = s2.transfer.reshape((d2,) * 4, order="F")
    big = d1 * d2
    t = np.einsum("aceg,bdfh->abcdefgh", t1, t2).reshape(big, big, big, big)
    kraus = None
    if s1.has_kraus and s2.has_kraus:
        kraus = tuple(np.kron(a, b) for a in s1.kraus for b in s2.kraus)
    meta = {"tensor_of": (s1.name, s2.name)}
    return SuperOperator(big, t.reshape((big * big,) * 2, order="F"), kraus_cache=kraus, meta=meta)


def adjoint(s: SuperOperator) -> SuperOperator:
    """Hilbert-Schmidt adjoint: ``tr(Φ(A)† B) = tr(A† Φ*(B))``."""
    kraus = tuple(k.conj().T for k in s.kraus) if s.has_kraus else None
    name = f"adjoint({s.name})" if s.name else None
    return SuperOperator(s.d, s.transfer.conj().T, kraus_cache=kraus, name=name)


def linear_combination(coeffs: Sequence[float], maps: Sequence[SuperOperator]) -> SuperOperator:
    d = maps[0].d
    for m in maps:
        _same_d(maps[0], m)
    t = sum(c * m.transfer for c, m in zip(coeffs, maps))
    return SuperOperator(d, t)


def transfer_distance(s1: SuperOperator, s2: SuperOperator) -> float:
    _same_d(s1, s2)
    return float(np.linalg.norm(s1.transfer - s2.transfer))


# -- predicates -----------------------------------------------------------------


class Verdict(str, enum.Enum):
    CERTIFIED = "Certified"
    FALSIFIED = "Falsified"
    UNFALSIFIED = "Unfalsified"

    def __str__(self):
        return self.value


@dataclass(frozen=True, eq=False)
class PredicateVerdict:
    verdict: Verdict
    witness: np.ndarray | None = None
    samples_used: int = 0
    margin: float = float("nan")
    detail: str = ""

    def __post_init__(self):
        if self.verdict is Verdict.FALSIFIED and self.witness is None:
            raise ValueError("a Falsified verdict must carry a witness")

    @property
    def certified(self) -> bool:
        return self.verdict is Verdict.CERTIFIED

    @property
    def falsified(self) -> bool:
        return self.verdict is Verdict.FALSIFIED

    def to_dict(self, with_witness: bool = True) -> dict:
        out = {
            "verdict": self.verdict.value,
            "samples_used": self.samples_used,
            "margin": None if not np.isfinite(self.margin) else float(self.margin),
        }
        if self.detail:
            out["detail"] = self.detail
        if with_witness and self.witness is not None:
            out["witness"] = encode_matrix(self.witness)
        return out


def _bool_verdict(ok: bool, witness, margin: float, detail: str = "") -> PredicateVerdict:
    if ok:
        return PredicateVerdict(Verdict.CERTIFIED, margin=margin, detail=detail)
    return PredicateVerdict(Verdict.FALSIFIED, witness=np.asarray(witness), margin=margin, detail=detail)


def is_trace_preserving(s: SuperOperator, tol: ToleranceConfig = DEFAULT_TOL) -> PredicateVerdict:
    reduced = nk.partial_trace(s.choi, (s.d, s.d), leg=1)
    err = float(np.linalg.norm(reduced - np.eye(s.d), 2))
    return _bool_verdict(err <= tol.psd_tol, reduced, err)


def is_unital(s: SuperOperator, tol: ToleranceConfig = DEFAULT_TOL) -> PredicateVerdict:
    out = s.apply(np.eye(s.d))
    err = float(np.linalg.norm(out - np.eye(s.d), 2))
    return _bool_verdict(err <= tol.psd_tol, out, err)


def is_hermiticity_preserving(s: SuperOperator, tol: ToleranceConfig = DEFAULT_TOL) -> PredicateVerdict:
    c = s.choi
    err = float(np.linalg.norm(c - c.conj().T, 2))
    scale = max(nk.operator_norm(c), 1.0)
    return _bool_verdict(err <= tol.psd_tol * scale, c - c.conj().T, err)


def _psd_verdict(c: np.ndarray, tol: ToleranceConfig, d: int) -> PredicateVerdict:
    scale = max(nk.operator_norm(c), np.finfo(float).tiny)
    if np.linalg.norm(c - c.conj().T, 2) > tol.psd_tol * scale:
        return PredicateVerdict(Verdict.FALSIFIED, witness=c - c.conj().T, margin=float("-inf"), detail="not Hermitian")
    w, v = np.linalg.eigh(nk.hermitian_part(c))
    ok = w[0] >= -tol.psd_tol * scale
    return _bool_verdict(ok, nk.unvec(v[:, 0], d), float(w[0]))


def is_cp(s: SuperOperator, tol: ToleranceConfig = DEFAULT_TOL) -> PredicateVerdict:
    """Choi positivity; on failure the witness is the offending Choi eigenvector as a d×d matrix."""
    return _psd_verdict(s.choi, tol, s.d)


def is_ppt(s: SuperOperator, tol: ToleranceConfig = DEFAULT_TOL) -> PredicateVerdict:
    cp = is_cp(s, tol)
    if not cp.certified:
        return PredicateVerdict(Verdict.FALSIFIED, witness=cp.witness, margin=cp.margin, detail="not CP")
    return _psd_verdict(nk.partial_transpose(s.choi, (s.d, s.d), leg=0), tol, s.d)


def is_positive_sampled(
    s: SuperOperator, tol: ToleranceConfig = DEFAULT_TOL, n_samples: int = DEFAULT_SAMPLES, seed=0
) -> PredicateVerdict:
    """Falsification search over Haar-random rank-one projections."""
    rng = nk.as_rng(seed)
    psi = nk.random_unit_vectors(rng, n_samples, s.d)
    out = nk.hermitian_part(s.apply_rank_one(psi))
    ev = np.linalg.eigvalsh(out)
    scale = np.maximum(np.abs(ev).max(axis=1), 1.0)
    rel = ev[:, 0] / scale
    worst = int(np.argmin(rel))
    if rel[worst] < -tol.strict_pos_tol:
        return PredicateVerdict(
            Verdict.FALSIFIED, witness=nk.rank_one(psi[worst]), samples_used=worst + 1, margin=float(ev[worst, 0])
        )
    return PredicateVerdict(Verdict.UNFALSIFIED, samples_used=n_samples, margin=float(ev[:, 0].min()))


def schwarz_check(
    s: SuperOperator, tol: ToleranceConfig = DEFAULT_TOL, n_samples: int = DEFAULT_SAMPLES, seed=0
) -> PredicateVerdict:
    """Schwarz inequality ``Φ(a†a) ≥ Φ(a)†Φ(a)``.

    Unital CP maps are certified outright.  Otherwise ``a = 1`` followed by
    Ginibre samples (unit Frobenius norm) are searched for a violation; no
    violation yields only ``Unfalsified``.
    """
    if is_cp(s, tol).certified and is_unital(s, tol).certified:
        return PredicateVerdict(Verdict.CERTIFIED, detail="unital and completely positive")
    d = s.d
    rng = nk.as_rng(seed)
    a = nk.ginibre(rng, n_samples, d, d)
    a /= np.linalg.norm(a, axis=(1, 2), keepdims=True)
    a[0] = np.eye(d)
    ad = nk.dagger(a)
    lhs = s.apply_batch(ad @ a)
    fa = s.apply_batch(a)
    gap = nk.hermitian_part(lhs - nk.dagger(fa) @ fa)
    ev = np.linalg.eigvalsh(gap)[:, 0]
    thresholds = -tol.psd_tol * np.maximum(np.linalg.norm(a, axis=(1, 2)) ** 2, 1.0)
    bad = np.flatnonzero(ev < thresholds)
    if bad.size:
        i = int(bad[0])
        return PredicateVerdict(Verdict.FALSIFIED, witness=a[i].copy(), samples_used=i + 1, margin=float(ev[i]))
    return PredicateVerdict(Verdict.UNFALSIFIED, samples_used=n_samples, margin=float(ev.min()))


@dataclass(frozen=True)
class Predicates:
    is_trace_preserving: PredicateVerdict
    is_unital: PredicateVerdict
    is_hermiticity_preserving: PredicateVerdict
    is_cp: PredicateVerdict
    is_ppt: PredicateVerdict
    is_positive_sampled: PredicateVerdict
    schwarz_check: PredicateVerdict

    def to_dict(self) -> dict:
        return {name: getattr(self, name).to_dict() for name in self.__dataclass_fields__}


def predicates(
    s: SuperOperator, tol: ToleranceConfig = DEFAULT_TOL, n_samples: int = DEFAULT_SAMPLES, seed=0
) -> Predicates:
    return Predicates(
        is_trace_preserving=is_trace_preserving(s, tol),
        is_unital=is_unital(s, tol),
        is_hermiticity_preserving=is_hermiticity_preserving(s, tol),
        is_cp=is_cp(s, tol),
        is_ppt=is_ppt(s, tol),
        is_positive_sampled=is_positive_sampled(s, tol, n_samples, seed),
        schwarz_check=schwarz_check(s, tol, n_samples, seed),
    )


def entanglement_breaking_check(s: SuperOperator, tol: ToleranceConfig = DEFAULT_TOL) -> PredicateVerdict:
    """Entanglement breaking verdict.

    At d = 2 the Choi matrix lives on C²⊗C², where PPT is equivalent to
    separability, so the verdict is decisive.  For d ≥ 3 only maps built in
    measure-and-prepare form (``meta["construction"] == "holevo"``) are
    certified; a PPT failure still refutes EB.
    """
    ppt = is_ppt(s, tol)
    if ppt.falsified:
        return PredicateVerdict(Verdict.FALSIFIED, witness=ppt.witness, margin=ppt.margin, detail="PPT fails")
    if s.d == 2:
        return PredicateVerdict(Verdict.CERTIFIED, margin=ppt.margin, detail="2x2 PPT criterion")
    if s.meta.get("construction") == "holevo":
        return PredicateVerdict(Verdict.CERTIFIED, detail="measure-and-prepare construction")
    return PredicateVerdict(Verdict.UNFALSIFIED, margin=ppt.margin, detail="PPT holds; separability undecided")


# -- channel JSON ---------------------------------------------------------------


def encode_matrix(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def decode_matrix(data, shape: tuple[int, int] | None = None) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"matrix data is ragged or non-numeric: {exc}") from None
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise SchemaError(f"matrix must be rows of [re, im] pairs, got array of shape {arr.shape}")
    m = arr[..., 0] + 1j * arr[..., 1]
    if shape is not None and m.shape != shape:
        raise SchemaError(f"expected a {shape[0]}×{shape[1]} matrix, got {m.shape[0]}×{m.shape[1]}")
    if not np.all(np.isfinite(m)):
        raise SchemaError("matrix entries must be finite")
    return m


def channel_to_dict(s: SuperOperator, repr: str = "transfer") -> dict:
    if repr == "kraus":
        ops = s.kraus if s.has_kraus else to_kraus(s)
        data = [encode_matrix(k) for k in ops]
    elif repr == "choi":
        data = encode_matrix(s.choi)
    elif repr == "transfer":
        data = encode_matrix(s.transfer)
    else:
        raise SchemaError(f"unknown repr {repr!r}")
    out = {"d": s.d, "repr": repr, "data": data}
    if s.name is not None:
        out["name"] = s.name
    return out


def channel_from_dict(obj) -> SuperOperator:
    if not isinstance(obj, dict):
        raise SchemaError("channel JSON must be an object")
    missing = {"d", "repr", "data"} - set(obj)
    if missing:
        raise SchemaError(f"channel JSON missing keys: {sorted(missing)}")
    d = obj["d"]
    if not isinstance(d, int) or isinstance(d, bool) or d < 1:
        raise SchemaError(f"'d' must be a positive integer, got {d!r}")
    name = obj.get("name")
    if name is not None and not isinstance(name, str):
        raise SchemaError("'name' must be a string")
    rep = obj["repr"]
    data = obj["data"]
    if rep == "kraus":
        if not isinstance(data, list) or not data:
            raise SchemaError("kraus data must be a non-empty list of matrices")
        return from_kraus([decode_matrix(k, (d, d)) for k in data], name=name)
    if rep == "choi":
        return from_choi(decode_matrix(data, (d * d, d * d)), name=name)
    if rep == "transfer":
        return from_transfer(decode_matrix(data, (d * d, d * d)), name=name)
    raise SchemaError(f"unknown repr {rep!r}")


def load_channel(path) -> SuperOperator:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from None
    return channel_from_dict(obj)


def dump_channel(s: SuperOperator, path, repr: str = "transfer") -> None:
    with open(path, "w") as fh:
        json.dump(channel_to_dict(s, repr), fh)
