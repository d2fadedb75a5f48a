"""Strict-positivity oracle for positive maps.

A positive map is strictly positive iff it sends every rank-one projection
to an invertible matrix, so the search runs over unit vectors ψ only.
Singularity is witnessed by a concrete ψ; positivity is proved only for CP
maps whose Choi matrix is non-singular (then the Kraus operators span M_d and
``λ_min(Φ(ψψ†)) ≥ λ_min(C)``) or via an analytic bound attached to the map.
Everything else is reported as numerically positive.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import mapmodel as mm
from . import numkernel as nk
from .errors import NotPositive
from .numkernel import DEFAULT_TOL, ToleranceConfig
from .optimize import MultistartResult, batch_nelder_mead

N_STARTS = 64
MAX_ITER = 500


class PositivityVerdict(str, enum.Enum):
    CERTIFIED_SINGULAR = "CertifiedSingular"
    CERTIFIED_POSITIVE = "CertifiedPositive"
    NUMERICALLY_POSITIVE = "NumericallyPositive"

    def __str__(self):
        return self.value


class CertificateSource(str, enum.Enum):
    WORD_SPAN_FULL = "word_span_full"
    ANALYTIC = "analytic"
    MULTISTART = "multistart"

    def __str__(self):
        return self.value


@dataclass(frozen=True, eq=False)
class StrictPositivityResult:
    verdict: PositivityVerdict
    witness: np.ndarray | None
    min_eig_found: float
    certificate_source: CertificateSource
    lower_bound: float | None = None
    starts_used: int = 0
    iterations: int = 0

    @property
    def singular(self) -> bool:
        return self.verdict is PositivityVerdict.CERTIFIED_SINGULAR

    @property
    def positive(self) -> bool:
        return not self.singular

    def to_dict(self) -> dict:
        out = {
            "verdict": self.verdict.value,
            "min_eig_found": self.min_eig_found,
            "certificate_source": self.certificate_source.value,
            "lower_bound": self.lower_bound,
            "starts_used": self.starts_used,
            "iterations": self.iterations,
        }
        if self.witness is not None:
            out["witness"] = [[float(z.real), float(z.imag)] for z in self.witness]
        return out


def _unit_vectors(x: np.ndarray, d: int) -> np.ndarray:
    psi = x[:, :d] + 1j * x[:, d:]
    norms = np.linalg.norm(psi, axis=1, keepdims=True)
    return psi / np.where(norms > 0, norms, 1.0)


def output_spectra(s: mm.SuperOperator, psi: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of ``Φ(ψψ†)`` for each row of ``psi``."""
    return np.linalg.eigvalsh(nk.hermitian_part(s.apply_rank_one(psi)))


def start_points(d: int, n_starts: int, seed) -> np.ndarray:
    """Computational basis vectors first, then seeded Gaussian points (real 2d coordinates)."""
    rng = nk.as_rng(seed)
    x = rng.standard_normal((n_starts, 2 * d))
    k = min(d, n_starts)
    x[:k] = 0.0
    x[np.arange(k), np.arange(k)] = 1.0
    return x


def rank_one_multistart(
    s: mm.SuperOperator,
    *,
    relative: bool = True,
    n_starts: int = N_STARTS,
    maxiter: int = MAX_ITER,
    seed=0,
    stop_below: float | None = None,
) -> tuple[MultistartResult, np.ndarray]:
    """Minimize ``λ_min(Φ(ψψ†))`` (optionally divided by ``λ_max``) over unit ψ.

    Returns the raw multistart result and the unit vectors at each start's
    best point.
    """
    d = s.d

    def objective(x):
        ev = output_spectra(s, _unit_vectors(x, d))
        if not relative:
            return ev[:, 0]
        top = np.abs(ev).max(axis=1)
        return ev[:, 0] / np.where(top > 0, top, 1.0)

    res = batch_nelder_mead(objective, start_points(d, n_starts, seed), maxiter=maxiter, xatol=None, stop_below=stop_below)
    return res, _unit_vectors(res.x, d)


def strict_positivity(
    s: mm.SuperOperator,
    tol: ToleranceConfig = DEFAULT_TOL,
    *,
    n_starts: int = N_STARTS,
    maxiter: int = MAX_ITER,
    seed=0,
    check_positive: bool = True,
) -> StrictPositivityResult:
    """Decide whether ``s`` maps every nonzero PSD matrix to a positive definite one.

    Singular means ``λ_min(Φ(ψψ†)) ≤ strict_pos_tol · λ_max(Φ(ψψ†))`` at the
    returned witness ψ.
    """
    if check_positive:
        pos = mm.is_positive_sampled(s, tol, seed=seed)
        if pos.falsified:
            raise NotPositive(f"map is not positive (output eigenvalue {pos.margin:.3e})")

    d = s.d
    cert = _certificate(s, tol)
    if cert is not None:
        source, lower = cert
        x0 = start_points(d, n_starts, seed)
        ev = output_spectra(s, _unit_vectors(x0, d))
        return StrictPositivityResult(
            PositivityVerdict.CERTIFIED_POSITIVE,
            witness=None,
            min_eig_found=float(ev[:, 0].min()),
            certificate_source=source,
            lower_bound=lower,
        )

    res, psi = rank_one_multistart(s, n_starts=n_starts, maxiter=maxiter, seed=seed, stop_below=tol.strict_pos_tol)
    i = res.best_index
    witness = psi[i]
    ev = output_spectra(s, witness[None, :])[0]
    if ev[0] <= tol.strict_pos_tol * np.abs(ev).max():
        return StrictPositivityResult(
            PositivityVerdict.CERTIFIED_SINGULAR,
            witness=witness,
            min_eig_found=float(ev[0]),
            certificate_source=CertificateSource.MULTISTART,
            starts_used=n_starts,
            iterations=res.iterations,
        )
    return StrictPositivityResult(
        PositivityVerdict.NUMERICALLY_POSITIVE,
        witness=witness,
        min_eig_found=float(ev[0]),
        certificate_source=CertificateSource.MULTISTART,
        starts_used=n_starts,
        iterations=res.iterations,
    )


def _certificate(s: mm.SuperOperator, tol: ToleranceConfig) -> tuple[CertificateSource, float] | None:
    analytic = s.meta.get("analytic_min_output_eig")
    if analytic is not None and analytic > tol.strict_pos_tol:
        return CertificateSource.ANALYTIC, float(analytic)
    c = s.choi
    if np.linalg.norm(c - c.conj().T) > tol.psd_tol * max(nk.operator_norm(c), 1e-300):
        return None
    w = np.linalg.eigvalsh(nk.hermitian_part(c))
    # λ_max(Φ(ψψ†)) ≤ ‖C‖, so this margin also clears the singularity threshold
    if w[0] > tol.strict_pos_tol * w[-1]:
        return CertificateSource.WORD_SPAN_FULL, float(w[0])
    return None
