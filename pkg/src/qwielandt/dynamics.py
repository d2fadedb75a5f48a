"""Trace-norm contraction and zero-error certificates.

Two estimates bracket the contraction modulus ``c(Φ)`` of a trace preserving
positive map.  ``c_lower`` is a maximized ratio over pure-state pairs.
``c_upper_from_delta = 1/(1+δ*)`` comes from the largest δ for which
``(1+δ)Φ − δΩ`` still looks positive: writing Φ as a convex mix of that map
and Ω shows Φ shrinks traceless Hermitians by the factor ``1/(1+δ)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import mapmodel as mm
from . import multdomain as md
from . import numkernel as nk
from .errors import InconclusiveSpan, NotPositive, NotTracePreserving, PreconditionFailed
from .mapmodel import SuperOperator
from .numkernel import DEFAULT_TOL, ToleranceConfig
from .optimize import batch_nelder_mead
from .positivity import rank_one_multistart
from .primitivity import IndexReport, omega_index
from .spectral import analyze_spectrum

__all__ = [
    "Branch",
    "ContractionReport",
    "PowerContractionReport",
    "ZeroErrorCertificate",
    "contraction_coefficient",
    "contractivity_of_power",
    "word_product_span",
    "zero_error_dichotomy",
]

DELTA_CAP = 1e3
BISECTION_STEPS = 40


@dataclass(frozen=True, eq=False)
class ContractionReport:
    c_lower: float
    delta_star: float
    c_upper_from_delta: float
    strictly_contractive: bool
    delta_capped: bool = False
    witness_pair: tuple | None = None

    def to_dict(self) -> dict:
        out = {
            "c_lower": self.c_lower,
            "delta_star": self.delta_star,
            "c_upper_from_delta": self.c_upper_from_delta,
            "strictly_contractive": self.strictly_contractive,
            "delta_capped": self.delta_capped,
        }
        if self.witness_pair is not None:
            out["witness_pair"] = [[[float(z.real), float(z.imag)] for z in v] for v in self.witness_pair]
        return out


def _pair_vectors(x: np.ndarray, d: int) -> tuple[np.ndarray, np.ndarray]:
    psi = x[:, :d] + 1j * x[:, d : 2 * d]
    phi = x[:, 2 * d : 3 * d] + 1j * x[:, 3 * d :]
    psi = psi / np.maximum(np.linalg.norm(psi, axis=1, keepdims=True), 1e-300)
    phi = phi / np.maximum(np.linalg.norm(phi, axis=1, keepdims=True), 1e-300)
    return psi, phi


def _pair_starts(d: int, n_starts: int, rng) -> np.ndarray:
    x = rng.standard_normal((n_starts, 4 * d))
    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
    for row, (i, j) in enumerate(pairs[:n_starts]):
        x[row] = 0.0
        x[row, i] = 1.0
        x[row, 2 * d + j] = 1.0
    return x


def _lower_ratio(s: SuperOperator, n_starts: int, maxiter: int, rng) -> tuple[float, tuple]:
    d = s.d

    def objective(x):
        psi, phi = _pair_vectors(x, d)
        delta = nk.rank_one(psi) - nk.rank_one(phi)
        ev = np.linalg.eigvalsh(nk.hermitian_part(s.apply_batch(delta)))
        return -0.5 * np.abs(ev).sum(axis=1)

    res = batch_nelder_mead(objective, _pair_starts(d, n_starts, rng), maxiter=maxiter, xatol=None)
    psi, phi = _pair_vectors(res.best_x[None, :], d)
    return float(-res.best_fun), (psi[0], phi[0])


def _delta_star(s: SuperOperator, tol: ToleranceConfig, n_probe: int, n_starts: int, maxiter: int, seed) -> tuple[float, bool]:
    """Bisection for the largest δ with (1+δ)Φ − δΩ positive on the probe set.

    The probes are the local minimizers of λ_min(Φ(ψψ†)) together with random
    and computational-basis vectors; since Ω(ψψ†) = 1/d, the most negative
    probe does not depend on δ, but every bisection step re-evaluates them all.
    """
    d = s.d
    _, minimizers = rank_one_multistart(s, relative=False, n_starts=n_starts, maxiter=maxiter, seed=seed)
    rng = nk.as_rng(seed)
    probes = np.vstack([minimizers, nk.random_unit_vectors(rng, n_probe, d), np.eye(d)])
    outputs = nk.hermitian_part(s.apply_rank_one(probes))
    eye = np.eye(d) / d

    def positive(delta: float) -> bool:
        ev = np.linalg.eigvalsh((1 + delta) * outputs - delta * eye)
        return bool(ev[:, 0].min() >= -tol.psd_tol)

    if not positive(0.0):
        return 0.0, False
    if positive(DELTA_CAP):
        return DELTA_CAP, True
    lo, hi = 0.0, DELTA_CAP
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if positive(mid):
            lo = mid
        else:
            hi = mid
    return lo, False


def contraction_coefficient(
    s: SuperOperator,
    tol: ToleranceConfig = DEFAULT_TOL,
    *,
    n_starts: int = 32,
    maxiter: int = 500,
    n_probe: int = 1000,
    seed=0,
) -> ContractionReport:
    """Bracket the trace-norm contraction modulus of a trace preserving positive map."""
    if not mm.is_trace_preserving(s, tol).certified:
        raise NotTracePreserving("contraction analysis requires a trace-preserving map")
    if mm.is_positive_sampled(s, tol, seed=seed).falsified:
        raise NotPositive("contraction analysis requires a positive map")
    rng = nk.as_rng(seed)
    c_lower, pair = _lower_ratio(s, n_starts, maxiter, rng)
    delta, capped = _delta_star(s, tol, n_probe, n_starts, maxiter, seed)
    c_upper = 1.0 / (1.0 + delta)
    strict = c_lower < 1 - 1e-6 and delta > 0
    return ContractionReport(c_lower, delta, c_upper, strict, capped, pair)


@dataclass(frozen=True, eq=False)
class PowerContractionReport:
    omega: float
    omega_report: ContractionReport
    i_index: int | None = None
    i_report: ContractionReport | None = None

    @property
    def strictly_contractive(self) -> bool:
        ok = self.omega_report.strictly_contractive
        if self.i_report is not None:
            ok = ok and self.i_report.strictly_contractive
        return ok

    def to_dict(self) -> dict:
        return {
            "omega": self.omega,
            "omega_report": self.omega_report.to_dict(),
            "i_index": self.i_index,
            "i_report": None if self.i_report is None else self.i_report.to_dict(),
            "strictly_contractive": self.strictly_contractive,
        }


def contractivity_of_power(
    s: SuperOperator,
    tol: ToleranceConfig = DEFAULT_TOL,
    *,
    index_report: IndexReport | None = None,
    seed=0,
    **kwargs,
) -> PowerContractionReport:
    """Contraction of ``Φ^ω`` and, when the Kraus-word index is known, of ``Φ^i``."""
    rep = index_report or omega_index(s, tol=tol, seed=seed)
    omega = int(rep.omega_upper)
    r_omega = contraction_coefficient(mm.power(s, omega), tol, seed=seed, **kwargs)
    r_i = None
    if rep.i_index is not None:
        r_i = r_omega if rep.i_index == omega else contraction_coefficient(mm.power(s, rep.i_index), tol, seed=seed, **kwargs)
    return PowerContractionReport(omega, r_omega, rep.i_index, r_i)


# -- zero-error dichotomy -------------------------------------------------------


class Branch(str, enum.Enum):
    PRIMITIVE = "PrimitiveBranch"
    NON_PRIMITIVE = "NonPrimitiveBranch"

    def __str__(self):
        return self.value


@dataclass(frozen=True, eq=False)
class ZeroErrorCertificate:
    branch: Branch
    span_dim: int | None = None
    projection: np.ndarray | None = None
    recovery_checked_n: tuple | None = None
    recovery_residuals: tuple | None = None
    omega: int | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        """Whether the certificate establishes its branch of the dichotomy."""
        if self.branch is Branch.PRIMITIVE:
            return self.span_dim is not None and self.span_dim == self.diagnostics.get("full_dim")
        return bool(self.recovery_residuals) and max(self.recovery_residuals) < 1e-8

    def to_dict(self) -> dict:
        return {
            "branch": self.branch.value,
            "span_dim": self.span_dim,
            "projection": None if self.projection is None else mm.encode_matrix(self.projection),
            "recovery_checked_n": None if self.recovery_checked_n is None else list(self.recovery_checked_n),
            "recovery_residuals": None if self.recovery_residuals is None else list(self.recovery_residuals),
            "omega": self.omega,
            "holds": self.holds,
            "diagnostics": self.diagnostics,
        }


def _word_basis(kraus, length: int, rel_tol: float) -> np.ndarray:
    """Orthonormal basis (as matrices) of the span of all length-``length`` words."""
    mats = np.stack([nk.as_matc(k) for k in kraus])
    d = mats.shape[1]
    basis = nk.hs_orthonormalize(list(mats), d, rel_tol)
    for _ in range(length - 1):
        words = np.einsum("iab,jbc->ijac", mats, basis).reshape(-1, d, d)
        basis = nk.hs_orthonormalize(list(words), d, rel_tol)
    return basis


def word_product_span(kraus, length: int, tol: ToleranceConfig = DEFAULT_TOL) -> int:
    """Dimension of ``span{w'† w}`` over words ``w, w'`` of the given length.

    Computed from a basis of the word span rather than by enumerating pairs,
    which gives the same span by bilinearity.
    """
    basis = _word_basis(kraus, length, tol.rank_rel_tol)
    d = basis.shape[1]
    prods = np.einsum("iba,jbc->ijac", basis.conj(), basis).reshape(-1, d, d)
    return int(nk.hs_orthonormalize(list(prods), d, tol.rank_rel_tol).shape[0])


def zero_error_dichotomy(
    s: SuperOperator,
    tol: ToleranceConfig = DEFAULT_TOL,
    *,
    seed=0,
    recovery_n: tuple = (1, 2, 3, 4, 5),
    index_report: IndexReport | None = None,
) -> ZeroErrorCertificate:
    """Certificate for whichever side of the zero-error dichotomy ``s`` falls on.

    Primitive channels: at length ω the products ``w'† w`` span M_d, so no
    orthogonal pair survives ``Φ^ω`` and both zero-error capacities of ``Φ^ω``
    vanish.  Non-primitive channels: a nontrivial projection ``p`` in the
    stabilized multiplicative domain satisfies ``Φ*ⁿΦⁿ(p) = p`` for all n.
    """
    if not (mm.is_cp(s, tol).certified and mm.is_trace_preserving(s, tol).certified and mm.is_unital(s, tol).certified):
        raise PreconditionFailed("zero-error dichotomy requires a unital channel")
    d = s.d
    kraus = s.kraus if s.has_kraus else mm.to_kraus(s, tol)
    spec = analyze_spectrum(s, tol, seed=seed)

    if not spec.primitive.falsified:
        rep = index_report or omega_index(s, tol=tol, seed=seed, check_primitive=False)
        omega = int(rep.omega_upper)
        dim = word_product_span(kraus, omega, tol)
        diag = {"full_dim": d * d, "primitive_verdict": spec.primitive.verdict.value}
        if dim < d * d:
            raise InconclusiveSpan(f"products of length-{omega} words span only {dim} of {d * d} dimensions")
        return ZeroErrorCertificate(Branch.PRIMITIVE, span_dim=dim, omega=omega, diagnostics=diag)

    chain = md.mult_chain(s, tol)
    p = md.nontrivial_projection(chain.stabilized, tol)
    if p is None:
        raise InconclusiveSpan("non-primitive channel but no nontrivial projection in the stabilized domain")
    adj = mm.adjoint(s)
    residuals = []
    for n in recovery_n:
        fwd = mm.power(s, n)
        back = mm.power(adj, n)
        residuals.append(float(np.linalg.norm(back.apply(fwd.apply(p)) - p)))
    diag = {
        "stabilized_dim": chain.stabilized.dim,
        "kappa": chain.kappa,
        "projection_rank": nk.svd_rank(p, tol.rank_rel_tol),
    }
    return ZeroErrorCertificate(
        Branch.NON_PRIMITIVE,
        projection=p,
        recovery_checked_n=tuple(recovery_n),
        recovery_residuals=tuple(residuals),
        diagnostics=diag,
    )
