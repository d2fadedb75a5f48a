"""Multiplicative domains, their decreasing chain, and full irreducibility.

The multiplicative domain of Φ is the set of ``a`` with ``Φ(ab) = Φ(a)Φ(b)``
and ``Φ(ba) = Φ(b)Φ(a)`` for every ``b``.  Both conditions are linear in
``a``, so the domain is the kernel of one stacked linear system.  For
trace-preserving Schwarz maps it also equals the eigenspace of ``T†T`` at 1
(the subspace on which Φ is a Hilbert-Schmidt isometry); that second route is
used as an independent cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import mapmodel as mm
from . import numkernel as nk
from .errors import ChainCapExceeded, PreconditionFailed
from .mapmodel import PredicateVerdict, SuperOperator, Verdict
from .numkernel import DEFAULT_TOL, OperatorSubspace, ToleranceConfig, subspace_distance

__all__ = [
    "ChainReport",
    "OperatorSubspace",
    "TensorSplitReport",
    "algebra_residuals",
    "commutator_residual",
    "fully_irreducible_check",
    "mult_chain",
    "mult_domain",
    "nontrivial_projection",
    "tensor_split_check",
]


def _noise_floor(t: np.ndarray) -> float:
    norm = np.linalg.norm(t, 2)
    return 1e-12 * max(norm * norm, 1.0)


def bimodule_system(t: np.ndarray, d: int) -> np.ndarray:
    """The ``2d⁴ × d²`` matrix whose kernel is the multiplicative domain."""
    eye = np.eye(d)
    blocks = []
    for j in range(d):
        for i in range(d):
            e = np.zeros((d, d))
            e[i, j] = 1.0
            fe = nk.unvec(t[:, i + j * d], d)
            blocks.append(t @ np.kron(e.T, eye) - np.kron(fe.T, eye) @ t)
            blocks.append(t @ np.kron(eye, e) - np.kron(eye, fe) @ t)
    return np.vstack(blocks)


def isometry_kernel(t: np.ndarray, d: int, tol: ToleranceConfig = DEFAULT_TOL) -> OperatorSubspace:
    """Kernel of ``1 − T†T``: elements whose HS norm Φ preserves."""
    gap = np.eye(d * d) - t.conj().T @ t
    return OperatorSubspace.from_vectors(nk.nullspace(gap, tol.rank_rel_tol, _noise_floor(t)), d)


def algebra_residuals(sub: OperatorSubspace) -> tuple[float, float]:
    """Largest distance of ``b_i†`` and of ``b_i b_j`` from the span."""
    b = sub.basis
    if sub.dim == 0:
        return 0.0, 0.0
    star = max(np.linalg.norm(x - sub.project(x)) for x in nk.dagger(b))
    prods = np.einsum("iab,jbc->ijac", b, b).reshape(-1, sub.d, sub.d)
    mult = max(np.linalg.norm(x - sub.project(x)) for x in prods)
    return float(star), float(mult)


def commutator_residual(sub: OperatorSubspace) -> float:
    """Largest ``‖[b_i, b_j]‖_F`` over pairs of basis elements."""
    b = sub.basis
    if sub.dim < 2:
        return 0.0
    prods = np.einsum("iab,jbc->ijac", b, b)
    return float(np.linalg.norm(prods - prods.transpose(1, 0, 2, 3), axis=(2, 3)).max())


def _schwarz_not_falsified(s: SuperOperator, tol: ToleranceConfig) -> bool:
    return not mm.schwarz_check(s, tol).falsified


def mult_domain(
    s: SuperOperator,
    tol: ToleranceConfig = DEFAULT_TOL,
    *,
    cross_check: bool | None = None,
) -> OperatorSubspace:
    """Multiplicative domain of ``s`` as an HS-orthonormal basis.

    The bimodule nullspace is always the returned result.  When ``cross_check``
    is None it runs whenever ``s`` is trace preserving and its Schwarz check is
    not falsified; the projector distance between the two routes is stored in
    ``diagnostics["route_distance"]``.
    """
    d = s.d
    t = s.transfer
    kernel = nk.nullspace(bimodule_system(t, d), tol.rank_rel_tol, _noise_floor(t))
    base = OperatorSubspace.from_vectors(kernel, d)
    star, mult = algebra_residuals(base)
    diagnostics = {"star_residual": star, "mult_residual": mult}

    if cross_check is None:
        cross_check = mm.is_trace_preserving(s, tol).certified and _schwarz_not_falsified(s, tol)
    if cross_check:
        alt = isometry_kernel(t, d, tol)
        dist = subspace_distance(base, alt)
        diagnostics["route_distance"] = dist
        diagnostics["routes_agree"] = bool(dist < tol.subspace_tol)
        diagnostics["isometry_dim"] = alt.dim

    return OperatorSubspace(
        d=d,
        basis=base.basis,
        verified_star_closed=star < tol.subspace_tol,
        verified_mult_closed=mult < tol.subspace_tol,
        diagnostics=diagnostics,
    )


def _contains_identity(sub: OperatorSubspace, tol: ToleranceConfig) -> bool:
    return sub.contains(np.eye(sub.d) / np.sqrt(sub.d), tol.subspace_tol)


@dataclass(frozen=True, eq=False)
class ChainReport:
    dims: tuple
    kappa: int
    stabilized: OperatorSubspace
    trivial: bool
    domains: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self, emit_basis: bool = False) -> dict:
        out = {
            "dims": list(self.dims),
            "kappa": self.kappa,
            "trivial": self.trivial,
            "stabilized_dim": self.stabilized.dim,
            "diagnostics": self.diagnostics,
        }
        if emit_basis:
            out["stabilized_basis"] = [mm.encode_matrix(b) for b in self.stabilized.basis]
        return out


def mult_chain(
    s: SuperOperator,
    tol: ToleranceConfig = DEFAULT_TOL,
    *,
    check_hypotheses: bool = True,
) -> ChainReport:
    """Follow ``M_Φ ⊇ M_{Φ²} ⊇ …`` until it stabilizes.

    ``kappa`` is the first n with ``M_{Φⁿ} = M_{Φ^{n+1}} = M_{Φ^{n+2}}``
    (projector distance below ``subspace_tol``).  Raises
    :class:`ChainCapExceeded` if that does not happen for any n up to the
    chain cap.
    """
    d = s.d
    if check_hypotheses:
        if not mm.is_trace_preserving(s, tol).certified:
            raise PreconditionFailed("multiplicative chain requires a trace-preserving map")
        if not _schwarz_not_falsified(s, tol):
            raise PreconditionFailed("multiplicative chain requires a map whose Schwarz check is not falsified")
    cap = tol.chain_cap(d)
    domains: list[OperatorSubspace] = []
    t = np.eye(d * d, dtype=np.complex128)
    kappa = None
    # powers of a TP Schwarz map stay TP Schwarz, so the cross-check stays valid
    for n in range(1, cap + 3):
        t = t @ s.transfer
        domains.append(mult_domain(SuperOperator(d, t), tol, cross_check=check_hypotheses))
        if n >= 3:
            m = n - 2
            a, b, c = domains[m - 1], domains[m], domains[m + 1]
            if subspace_distance(a, b) < tol.subspace_tol and subspace_distance(b, c) < tol.subspace_tol:
                kappa = m
                break
    dims = tuple(x.dim for x in domains)
    diagnostics = {
        "monotone": all(x >= y for x, y in zip(dims, dims[1:])),
        "kappa_bound_2(d-1)": 2 * (d - 1),
        "route_distances": [x.diagnostics.get("route_distance") for x in domains],
        "closure_ok": all(x.verified_star_closed and x.verified_mult_closed for x in domains),
    }
    if kappa is None:
        raise ChainCapExceeded(f"chain did not stabilize within {cap} iterates", partial=dims)
    stab = domains[kappa - 1]
    trivial = stab.dim == 1 and _contains_identity(stab, tol)
    diagnostics["exceeds_expected_bound"] = kappa > max(2 * (d - 1), 1)
    return ChainReport(dims, kappa, stab, trivial, tuple(domains), diagnostics)


@dataclass(frozen=True)
class TensorSplitReport:
    split_ok: bool
    kappa_rule_ok: bool
    distance: float
    kappa_1: int
    kappa_2: int
    kappa_tensor: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def tensor_split_check(s1: SuperOperator, s2: SuperOperator, tol: ToleranceConfig = DEFAULT_TOL) -> TensorSplitReport:
    """Check that the domain of ``Φ⊗Ψ`` is ``M_Φ ⊗ M_Ψ`` and ``κ(Φ⊗Ψ) = max κ``."""
    for s in (s1, s2):
        if not (mm.is_unital(s, tol).certified and mm.is_trace_preserving(s, tol).certified and mm.is_cp(s, tol).certified):
            raise PreconditionFailed("tensor splitting requires unital trace-preserving CP maps")
    joint = mm.tensor(s1, s2)
    m1, m2 = mult_domain(s1, tol), mult_domain(s2, tol)
    product = OperatorSubspace(
        d=s1.d * s2.d, basis=np.array([np.kron(a, b) for a in m1.basis for b in m2.basis])
    )
    dist = subspace_distance(mult_domain(joint, tol), product)
    k1, k2, kt = mult_chain(s1, tol).kappa, mult_chain(s2, tol).kappa, mult_chain(joint, tol).kappa
    return TensorSplitReport(dist < tol.subspace_tol, kt == max(k1, k2), dist, k1, k2, kt)


def nontrivial_projection(sub: OperatorSubspace, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray | None:
    """A projection ``p ∉ {0, 1}`` in the span, or None if only scalars are present.

    Takes the non-scalar Hermitian element of largest norm among the Hermitian
    and anti-Hermitian parts of the basis and returns the spectral projection
    onto its top eigenvalue cluster.
    """
    d = sub.d
    eye = np.eye(d)
    best, best_norm = None, 0.0
    for b in sub.basis:
        for h in ((b + b.conj().T) / 2, (b - b.conj().T) / 2j):
            h = h - np.trace(h) / d * eye
            n = np.linalg.norm(h)
            if n > best_norm:
                best, best_norm = h, n
    if best is None or best_norm < 1e-6:
        return None
    w, v = np.linalg.eigh(nk.hermitian_part(best / best_norm))
    spread = w[-1] - w[0]
    top = w >= w[-1] - 1e-6 * max(spread, 1e-12)
    if top.all():
        return None
    vv = v[:, top]
    p = vv @ vv.conj().T
    if not sub.contains(p, 1e3 * tol.subspace_tol):
        return None
    return p


def _random_psd_of_rank(rng, d: int, r: int, m: int) -> np.ndarray:
    v = nk.ginibre(rng, m, d, r)
    return v @ nk.dagger(v)


def fully_irreducible_check(
    s: SuperOperator,
    tol: ToleranceConfig = DEFAULT_TOL,
    *,
    samples_per_rank: int = 200,
    seed=0,
) -> PredicateVerdict:
    """Full irreducibility by two routes.

    Route 1: the multiplicative domain is trivial.  Route 2: every sampled
    singular PSD input of rank r = 1..d-1 (plus any projection found in the
    domain) is mapped to something of strictly larger rank.  Disagreement
    downgrades the verdict to Unfalsified.
    """
    if not mm.is_trace_preserving(s, tol).certified:
        raise PreconditionFailed("full irreducibility check requires a trace-preserving map")
    if not _schwarz_not_falsified(s, tol):
        raise PreconditionFailed("full irreducibility check requires a Schwarz-unfalsified map")
    d = s.d
    dom = mult_domain(s, tol)
    domain_trivial = dom.dim == 1 and _contains_identity(dom, tol)
    proj = None if domain_trivial else nontrivial_projection(dom, tol)

    inputs = []
    if proj is not None:
        inputs.append(proj)
    rng = nk.as_rng(seed)
    for r in range(1, d):
        inputs.extend(_random_psd_of_rank(rng, d, r, samples_per_rank))
    rank_witness = None
    checked = 0
    for a in inputs:
        checked += 1
        ra = nk.svd_rank(a, tol.rank_rel_tol)
        if nk.svd_rank(s.apply(a), tol.rank_rel_tol) <= ra:
            rank_witness = a
            break
    rank_increasing = rank_witness is None

    detail = f"domain dim {dom.dim}; rank route {'strict increase' if rank_increasing else 'rank not increased'}"
    if domain_trivial and rank_increasing:
        return PredicateVerdict(Verdict.CERTIFIED, samples_used=checked, margin=0.0, detail=detail)
    if not domain_trivial and not rank_increasing:
        witness = proj if proj is not None else rank_witness
        return PredicateVerdict(Verdict.FALSIFIED, witness=witness, samples_used=checked, detail=detail)
    return PredicateVerdict(Verdict.UNFALSIFIED, samples_used=checked, detail="routes disagree: " + detail)
