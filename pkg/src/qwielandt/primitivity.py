"""Primitivity indices and the Wielandt-type bounds that constrain them.

Classical side: the index ``p(W)`` of a nonnegative matrix from boolean powers.
Quantum side: the index of primitivity ω (least k with Φᵏ strictly positive),
the Kraus-word index i (least k with length-k Kraus words spanning M_d), and
the multiplicative index κ.  :func:`verify_bounds` compares them with every
bound whose hypotheses the map satisfies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import mapmodel as mm
from . import multdomain as md
from . import numkernel as nk
from .errors import CapExceeded, ChainCapExceeded, NotPrimitive, NotStochastic, ShapeMismatch
from .mapmodel import SuperOperator
from .numkernel import DEFAULT_TOL, ToleranceConfig
from .positivity import StrictPositivityResult, strict_positivity
from .spectral import SpectralReport, analyze_spectrum

__all__ = [
    "BOUND_NAMES",
    "INF",
    "BoundRow",
    "IndexReport",
    "classical_wielandt",
    "embed_stochastic",
    "kraus_rank",
    "omega_index",
    "strict_positivity",
    "tensor_omega_check",
    "verify_bounds",
    "wielandt_matrix",
    "word_span_index",
]

INF = math.inf
BOUND_NAMES = ("classical", "quantum", "main", "corollary", "ppt_eb", "kappa", "omega_le_i", "adjoint")


# -- classical ------------------------------------------------------------------


@dataclass(frozen=True)
class ClassicalResult:
    primitive: bool
    p: int | None
    d: int

    @property
    def bound(self) -> int:
        return self.d * self.d - 2 * self.d + 2

    @property
    def bound_ok(self) -> bool:
        return self.p is None or self.p <= self.bound

    def to_dict(self) -> dict:
        return {"primitive": self.primitive, "p": self.p, "d": self.d, "bound": self.bound, "bound_ok": self.bound_ok}


def classical_wielandt(w) -> ClassicalResult:
    """Index of primitivity of a nonnegative square matrix via boolean powers."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ShapeMismatch(f"expected a square matrix, got shape {w.shape}")
    if (w < 0).any():
        raise ValueError("matrix must be entrywise nonnegative")
    d = w.shape[0]
    pattern = (w > 0).astype(np.int64)
    cap = d * d - 2 * d + 2 + 1
    acc = pattern.copy()
    for k in range(1, cap + 1):
        if acc.all():
            return ClassicalResult(True, k, d)
        acc = ((acc @ pattern) > 0).astype(np.int64)
    return ClassicalResult(False, None, d)


def wielandt_matrix(d: int) -> np.ndarray:
    """Column-stochastic matrix on the extremal Wielandt graph.

    Edges ``j → j+1`` for ``j < d`` plus ``d → 1`` and ``d → 2``; entry
    ``W[i, j] > 0`` encodes the edge ``j → i``.
    """
    if d < 2:
        raise ValueError("Wielandt matrix needs d >= 2")
    w = np.zeros((d, d))
    for j in range(d - 1):
        w[j + 1, j] = 1.0
    w[0, d - 1] = 0.5
    w[1, d - 1] = 0.5
    return w


def embed_stochastic(w, name: str | None = None) -> SuperOperator:
    """Channel with Kraus operators ``√W_ij E_ij``, so ``Φ(x) = diag(W diag x)``."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise NotStochastic(f"expected a square matrix, got shape {w.shape}")
    if (w < -1e-12).any() or not np.allclose(w.sum(axis=0), 1.0, atol=1e-9, rtol=0):
        raise NotStochastic("matrix must be nonnegative with columns summing to 1")
    d = w.shape[0]
    ops = []
    for i, j in zip(*np.nonzero(w > 0)):
        a = np.zeros((d, d), dtype=np.complex128)
        a[i, j] = np.sqrt(w[i, j])
        ops.append(a)
    meta = {"construction": "embed_stochastic", "stochastic_matrix": w.tolist()}
    return mm.from_kraus(ops, name=name or "embed_stochastic", meta=meta)


# -- Kraus words ----------------------------------------------------------------


def kraus_rank(kraus, tol: ToleranceConfig = DEFAULT_TOL) -> int:
    """Number of linearly independent Kraus operators (HS Gram rank)."""
    vecs = np.array([nk.vec(k) for k in kraus]).T
    return nk.svd_rank(vecs, tol.rank_rel_tol)


def _orthonormal_columns(vecs: np.ndarray, rel_tol: float) -> np.ndarray:
    u, s, _ = np.linalg.svd(vecs, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return u[:, :0]
    return u[:, s > rel_tol * s[0]]


def word_span_index(kraus, cap: int | None = None, tol: ToleranceConfig = DEFAULT_TOL) -> int:
    """Least k such that the length-k Kraus words span M_d.

    Raises :class:`CapExceeded` when no such k ≤ ``cap`` exists, and earlier
    if the sequence of spans becomes periodic without reaching M_d.
    """
    ops = [nk.as_matc(k) for k in kraus]
    if not ops:
        raise ValueError("Kraus list is empty")
    d = ops[0].shape[0]
    full = d * d
    if cap is None:
        cap = (full - kraus_rank(ops, tol) + 1) * full + 1
    mats = np.stack(ops)
    span = _orthonormal_columns(np.stack([nk.vec(a) for a in ops], axis=1), tol.rank_rel_tol)
    seen: list[np.ndarray] = []
    dims = []
    for k in range(1, cap + 1):
        dims.append(span.shape[1])
        if span.shape[1] == full:
            return k
        proj = span @ span.conj().T
        if any(p.shape == proj.shape and np.linalg.norm(p - proj) < tol.subspace_tol for p in seen):
            raise CapExceeded(f"word spans cycle at dimension {span.shape[1]} < {full}", partial=dims)
        seen.append(proj)
        basis = np.stack([nk.unvec(span[:, j], d) for j in range(span.shape[1])])
        words = np.einsum("iab,jbc->ijac", mats, basis).reshape(-1, d, d)
        span = _orthonormal_columns(np.stack([nk.vec(x) for x in words], axis=1), tol.rank_rel_tol)
    raise CapExceeded(f"word span did not reach M_{d} within {cap} steps", partial=dims)


# -- index report ---------------------------------------------------------------


@dataclass(frozen=True)
class BoundRow:
    claimed: float | None
    observed: float | None
    satisfied: bool | None
    applicable: bool = True
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "claimed": _json_num(self.claimed),
            "observed": _json_num(self.observed),
            "satisfied": self.satisfied,
            "applicable": self.applicable,
            "detail": self.detail,
        }


def _json_num(x):
    if x is None:
        return None
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


NOT_APPLICABLE = BoundRow(None, None, None, applicable=False)


@dataclass(eq=False)
class IndexReport:
    d: int
    omega_lower: int
    omega_upper: float
    i_index: int | None = None
    kappa: int | None = None
    n_kraus: int | None = None
    bounds: dict = field(default_factory=dict)
    provenance: list = field(default_factory=list)
    hypotheses: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def violations(self) -> list[str]:
        return [name for name, row in self.bounds.items() if row.applicable and row.satisfied is False]

    @property
    def all_satisfied(self) -> bool:
        return not self.violations

    def bound_flags(self) -> dict:
        """``name -> satisfied`` with None for rows that do not apply."""
        return {name: self.bounds.get(name, NOT_APPLICABLE).satisfied for name in BOUND_NAMES}

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "omega_lower": self.omega_lower,
            "omega_upper": _json_num(self.omega_upper),
            "i_index": self.i_index,
            "kappa": self.kappa,
            "n_kraus": self.n_kraus,
            "bounds": {name: row.to_dict() for name, row in self.bounds.items()},
            "provenance": self.provenance,
            "hypotheses": self.hypotheses,
            "diagnostics": self.diagnostics,
        }


def _row(claimed, observed, ok_hyp: bool, detail: str = "") -> BoundRow:
    if not ok_hyp:
        return BoundRow(claimed, observed, None, applicable=False, detail=detail or "hypotheses not met")
    if observed is None or claimed is None:
        return BoundRow(claimed, observed, None, applicable=False, detail=detail or "value unavailable")
    return BoundRow(claimed, observed, bool(observed <= claimed), detail=detail)


def _hypotheses(s: SuperOperator, tol: ToleranceConfig) -> dict:
    cp = mm.is_cp(s, tol)
    hyp = {
        "tp": mm.is_trace_preserving(s, tol).certified,
        "unital": mm.is_unital(s, tol).certified,
        "cp": cp.certified,
        "schwarz": mm.schwarz_check(s, tol).verdict.value,
    }
    hyp["ppt"] = mm.is_ppt(s, tol).certified if cp.certified else False
    hyp["eb"] = mm.entanglement_breaking_check(s, tol).verdict.value if cp.certified else "Falsified"
    hyp["schwarz_tp"] = hyp["tp"] and hyp["schwarz"] != "Falsified"
    hyp["stochastic"] = s.meta.get("stochastic_matrix") is not None
    return hyp


def _entry(k: int, res: StrictPositivityResult) -> dict:
    return {"k": k, "verdict": res.verdict.value, "source": res.certificate_source.value, "min_eig": res.min_eig_found}


def omega_index(
    s: SuperOperator,
    cap: int | None = None,
    tol: ToleranceConfig = DEFAULT_TOL,
    *,
    seed=0,
    check_primitive: bool = True,
    spectral: SpectralReport | None = None,
) -> IndexReport:
    """Bracket ω and fill every applicable bound row.

    ``omega_lower`` is one more than the largest k certified singular and
    ``omega_upper`` the smallest k found positive (certified or numerically).
    The scan stops at the first positive power; one extra power is checked to
    confirm monotonicity.  Raises :class:`CapExceeded` with the partial report
    (``omega_upper = INF``) when no positive power is found up to ``cap``.
    A precomputed ``spectral`` report replaces the primitivity analysis.
    """
    d = s.d
    if check_primitive or spectral is not None:
        spec = spectral or analyze_spectrum(s, tol, seed=seed)
        if spec.primitive.falsified:
            raise NotPrimitive(f"map is not primitive: {spec.primitive.detail}")
    hyp = _hypotheses(s, tol)

    kraus = None
    if s.has_kraus:
        kraus = s.kraus
    elif hyp["cp"]:
        kraus = mm.to_kraus(s, tol)
    n = kraus_rank(kraus, tol) if kraus is not None else None
    if cap is None:
        if hyp["schwarz_tp"]:
            cap = 2 * (d - 1) ** 2 + 2
        else:
            cap = (d * d - (n or 1) + 1) * d * d + 1

    provenance = []
    lower, upper = 1, INF
    t = np.eye(d * d, dtype=np.complex128)
    for k in range(1, cap + 1):
        t = t @ s.transfer
        # k = 1 keeps the map itself so analytic metadata can certify it
        res = strict_positivity(s if k == 1 else SuperOperator(d, t), tol, seed=seed, check_positive=k == 1)
        provenance.append(_entry(k, res))
        if res.singular:
            lower = k + 1
        else:
            upper = k
            break

    report = IndexReport(d=d, omega_lower=lower, omega_upper=upper, n_kraus=n, provenance=provenance, hypotheses=hyp)
    if upper is INF:
        report.diagnostics["cap"] = cap
        raise CapExceeded(f"no strictly positive power up to k = {cap}", partial=report)

    nxt = strict_positivity(SuperOperator(d, t @ s.transfer), tol, seed=seed, check_positive=False)
    report.diagnostics["next_power"] = _entry(upper + 1, nxt)
    report.diagnostics["monotone_next"] = not nxt.singular

    if hyp["schwarz_tp"]:
        try:
            report.kappa = md.mult_chain(s, tol).kappa
        except ChainCapExceeded as exc:
            report.diagnostics["kappa_error"] = str(exc)
    if kraus is not None:
        try:
            report.i_index = word_span_index(kraus, tol=tol)
        except CapExceeded as exc:
            report.diagnostics["i_index_error"] = str(exc)
    report.bounds = _bound_rows(report)
    return report


def _bound_rows(r: IndexReport) -> dict:
    d, hyp, w = r.d, r.hypotheses, r.omega_upper
    rows = {}
    rows["classical"] = _row(d * d - 2 * d + 2, w, hyp["stochastic"])
    if hyp["cp"] and hyp["tp"] and r.n_kraus is not None:
        rows["quantum"] = _row((d * d - r.n_kraus + 1) * d * d, r.i_index, True, "i(E) ≤ (d²−n+1)d²")
        if r.i_index is None:
            rows["quantum"] = BoundRow((d * d - r.n_kraus + 1) * d * d, None, False, detail="word span never full")
    else:
        rows["quantum"] = _row(None, None, False)
    schwarz = hyp["schwarz_tp"]
    rows["main"] = _row(None if r.kappa is None else r.kappa * (d - 1), w, schwarz and r.kappa is not None)
    rows["corollary"] = _row(2 * (d - 1) ** 2, w, schwarz)
    rows["kappa"] = _row(2 * (d - 1), r.kappa, schwarz and r.kappa is not None)
    rows["omega_le_i"] = _row(r.i_index, w, r.i_index is not None)
    ppt_eb = hyp["cp"] and hyp["tp"] and hyp["unital"] and (hyp["ppt"] or hyp["eb"] == "Certified")
    rows["ppt_eb"] = _row(d * (d - 1), w, ppt_eb)
    rows["adjoint"] = NOT_APPLICABLE
    return rows


def verify_bounds(
    s: SuperOperator,
    tol: ToleranceConfig = DEFAULT_TOL,
    *,
    which: str = "all",
    seed=0,
    spectral: SpectralReport | None = None,
) -> IndexReport:
    """:func:`omega_index` plus the structural checks behind the PPT/EB and adjoint rows.

    ``which`` selects ``all``, ``main``, ``ppt-eb``, ``tensor`` or ``adjoint``;
    rows outside the selection are marked not applicable.  The tensor rule
    needs a pair of maps, see :func:`tensor_omega_check`.
    """
    report = omega_index(s, tol=tol, seed=seed, spectral=spectral)
    if report.hypotheses["stochastic"]:
        report.diagnostics["classical_p"] = classical_wielandt(s.meta["stochastic_matrix"]).p
    d = s.d

    row = report.bounds["ppt_eb"]
    if row.applicable:
        dom = md.mult_domain(s, tol)
        comm = md.commutator_residual(dom)
        abelian = comm < tol.subspace_tol
        kappa_ok = report.kappa is not None and report.kappa <= d
        report.diagnostics["ppt_eb_commutator"] = comm
        report.bounds["ppt_eb"] = BoundRow(
            row.claimed,
            row.observed,
            bool(row.satisfied and abelian and kappa_ok),
            detail=f"abelian domain {abelian}, kappa ≤ d {kappa_ok}",
        )

    hyp = report.hypotheses
    adj = mm.adjoint(s)
    if hyp["tp"] and hyp["unital"] and hyp["schwarz"] != "Falsified" and not mm.schwarz_check(adj, tol).falsified:
        try:
            adj_report = omega_index(adj, tol=tol, seed=seed, check_primitive=False)
            report.bounds["adjoint"] = _row(2 * (d - 1) ** 2, adj_report.omega_upper, True, "ω(E*) ≤ 2(d−1)²")
            report.diagnostics["adjoint_kappa"] = adj_report.kappa
        except CapExceeded:
            report.bounds["adjoint"] = BoundRow(2 * (d - 1) ** 2, INF, False, detail="adjoint ω not found by cap")

    selection = {
        "all": set(BOUND_NAMES),
        "main": {"main", "corollary", "kappa"},
        "ppt-eb": {"ppt_eb"},
        "tensor": set(),
        "adjoint": {"adjoint"},
    }
    if which not in selection:
        raise ValueError(f"unknown bound selection {which!r}")
    keep = selection[which]
    for name in list(report.bounds):
        if name not in keep:
            report.bounds[name] = NOT_APPLICABLE
    return report


@dataclass(frozen=True)
class TensorOmegaCheck:
    omega_1: float
    omega_2: float
    omega_tensor: float
    kappa_1: int | None
    kappa_2: int | None
    kappa_tensor: int | None

    @property
    def omega_rule_ok(self) -> bool:
        return self.omega_tensor == max(self.omega_1, self.omega_2)

    @property
    def kappa_rule_ok(self) -> bool:
        if None in (self.kappa_1, self.kappa_2, self.kappa_tensor):
            return False
        return self.kappa_tensor == max(self.kappa_1, self.kappa_2)

    def to_dict(self) -> dict:
        out = {k: _json_num(v) for k, v in self.__dict__.items()}
        out.update(omega_rule_ok=self.omega_rule_ok, kappa_rule_ok=self.kappa_rule_ok)
        return out


def tensor_omega_check(s1: SuperOperator, s2: SuperOperator, tol: ToleranceConfig = DEFAULT_TOL, *, seed=0) -> TensorOmegaCheck:
    """Compare ω and κ of ``Φ⊗Ψ`` with the larger of the factors' values."""
    r1 = omega_index(s1, tol=tol, seed=seed)
    r2 = omega_index(s2, tol=tol, seed=seed)
    rt = omega_index(mm.tensor(s1, s2), tol=tol, seed=seed)
    return TensorOmegaCheck(r1.omega_upper, r2.omega_upper, rt.omega_upper, r1.kappa, r2.kappa, rt.kappa)
