"""Transfer-matrix spectrum, irreducibility and primitivity verdicts."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import mapmodel as mm
from . import numkernel as nk
from .errors import NotPositive, NotPrimitive
from .mapmodel import PredicateVerdict, SuperOperator, Verdict
from .numkernel import DEFAULT_TOL, ToleranceConfig
from .positivity import strict_positivity


@dataclass(frozen=True, eq=False)
class SpectralReport:
    eigenvalues: np.ndarray
    spectral_radius: float
    peripheral: np.ndarray
    second_modulus: float
    fixed_point: np.ndarray
    irreducible: PredicateVerdict
    primitive: PredicateVerdict
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        pair = lambda z: [float(z.real), float(z.imag)]  # noqa: E731
        return {
            "eigenvalues": [pair(z) for z in self.eigenvalues],
            "spectral_radius": self.spectral_radius,
            "peripheral": [pair(z) for z in self.peripheral],
            "second_modulus": self.second_modulus,
            "fixed_point": mm.encode_matrix(self.fixed_point),
            "irreducible": self.irreducible.to_dict(),
            "primitive": self.primitive.to_dict(),
            "diagnostics": self.diagnostics,
        }


def sorted_spectrum(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and right eigenvectors ordered by decreasing modulus."""
    w, v = np.linalg.eig(t)
    order = np.lexsort((-w.imag.round(12), -w.real.round(12), -np.abs(w).round(12)))
    return w[order], v[:, order]


def _normalize_fixed_point(x: np.ndarray) -> np.ndarray:
    tr = np.trace(x)
    if abs(tr) > 1e-10 * max(np.linalg.norm(x), 1e-300):
        return x / tr
    k = np.argmax(np.abs(x))
    return x / (x.flat[k] / abs(x.flat[k])) / np.linalg.norm(x)


def _route_a(w, v, r, tol: ToleranceConfig, d: int) -> tuple[bool, dict, np.ndarray]:
    """Necessary condition: simple Perron root with positive definite eigenvector."""
    scale = max(r, 1.0)
    multiplicity = int(np.count_nonzero(np.abs(w - r) <= tol.peripheral_tol * scale))
    x = _normalize_fixed_point(nk.unvec(v[:, 0], d))
    herm_err = float(np.linalg.norm(x - x.conj().T))
    ev = np.linalg.eigvalsh(nk.hermitian_part(x))
    pd = herm_err <= 1e-8 * max(np.linalg.norm(x), 1.0) and ev[0] > tol.strict_pos_tol * abs(ev[-1])
    ok = multiplicity == 1 and pd
    info = {"perron_multiplicity": multiplicity, "fixed_point_min_eig": float(ev[0]), "fixed_point_pd": bool(pd)}
    return ok, info, x


def analyze_spectrum(s: SuperOperator, tol: ToleranceConfig = DEFAULT_TOL, seed=0) -> SpectralReport:
    """Spectrum of the transfer matrix with cross-checked irreducibility and primitivity.

    Irreducibility is decided by two routes: (A) the Perron root is simple
    with a positive definite eigenvector, (B) ``(id + Φ)^{d-1}`` is strictly
    positive.  It is certified only when both routes say so, falsified only
    when both refute it, and otherwise left unfalsified.
    """
    d = s.d
    w, v = sorted_spectrum(s.transfer)
    r = float(np.abs(w[0]))
    if r > 0:
        shell = np.abs(w) >= r * (1 - tol.peripheral_tol)
    else:
        shell = np.zeros(len(w), dtype=bool)
    peripheral = w[shell]
    inner = np.abs(w[~shell])
    mu = float(inner.max()) if inner.size else 0.0

    a_ok, a_info, fixed = _route_a(w, v, w[0].real if r > 0 else 0.0, tol, d)
    diagnostics = {"route_a": a_info}

    b_result = None
    try:
        shifted = SuperOperator(d, np.linalg.matrix_power(np.eye(d * d) + s.transfer, max(d - 1, 0)))
        b_result = strict_positivity(shifted, tol, seed=seed)
        diagnostics["route_b"] = {
            "verdict": b_result.verdict.value,
            "min_eig_found": b_result.min_eig_found,
            "source": b_result.certificate_source.value,
        }
    except NotPositive:
        diagnostics["route_b"] = {"verdict": "not_applicable", "reason": "map is not positive"}

    b_ok = None if b_result is None else b_result.positive
    if r == 0:
        irreducible = PredicateVerdict(Verdict.FALSIFIED, witness=np.eye(d), detail="nilpotent map")
    elif a_ok and b_ok:
        irreducible = PredicateVerdict(Verdict.CERTIFIED, margin=a_info["fixed_point_min_eig"], detail="routes A and B agree")
    elif not a_ok and b_ok is False:
        irreducible = PredicateVerdict(
            Verdict.FALSIFIED,
            witness=nk.rank_one(b_result.witness),
            margin=b_result.min_eig_found,
            detail="routes A and B agree",
        )
    else:
        irreducible = PredicateVerdict(Verdict.UNFALSIFIED, detail=f"route A {'passes' if a_ok else 'fails'}, route B {b_ok}")

    primitive = _primitive_verdict(w, v, r, shell, irreducible, tol, d)
    return SpectralReport(w, r, peripheral, mu, fixed, irreducible, primitive, diagnostics)


def _primitive_verdict(w, v, r, shell, irreducible, tol, d) -> PredicateVerdict:
    if r == 0:
        return PredicateVerdict(Verdict.FALSIFIED, witness=np.eye(d), detail="spectral radius 0")
    off_root = np.flatnonzero(shell & (np.abs(w / r - 1) > tol.peripheral_tol))
    if off_root.size:
        j = int(off_root[0])
        return PredicateVerdict(
            Verdict.FALSIFIED,
            witness=nk.unvec(v[:, j], d),
            margin=float(np.abs(w[j] / r - 1)),
            detail=f"peripheral eigenvalue {complex(w[j]):.6g}",
        )
    multiplicity = int(np.count_nonzero(shell))
    if multiplicity > 1:
        return PredicateVerdict(
            Verdict.FALSIFIED, witness=nk.unvec(v[:, 1], d), detail=f"Perron root has multiplicity {multiplicity}"
        )
    if irreducible.falsified:
        return PredicateVerdict(Verdict.FALSIFIED, witness=irreducible.witness, detail="reducible")
    if irreducible.certified:
        return PredicateVerdict(Verdict.CERTIFIED, margin=1.0 - float(np.abs(w[~shell]).max(initial=0.0)) / r)
    return PredicateVerdict(Verdict.UNFALSIFIED, detail="irreducibility undecided")


def asymptotic_projector(s: SuperOperator, tol: ToleranceConfig = DEFAULT_TOL, report: SpectralReport | None = None) -> SuperOperator:
    """Spectral projector of the transfer matrix at the Perron root.

    For a unital trace-preserving primitive map this is ``ρ ↦ tr(ρ)·1/d``.
    """
    report = report or analyze_spectrum(s, tol)
    if not report.primitive.certified:
        raise NotPrimitive(f"primitivity is {report.primitive.verdict.value}")
    d2 = s.d * s.d
    root = complex(report.eigenvalues[0])
    right = nk.nullspace(s.transfer - root * np.eye(d2), 1e-10)
    left = nk.nullspace(s.transfer.conj().T - np.conj(root) * np.eye(d2), 1e-10)
    if right.shape[1] != 1 or left.shape[1] != 1:
        w, vr = np.linalg.eig(s.transfer)
        wl, vl = np.linalg.eig(s.transfer.conj().T)
        right = vr[:, [np.argmin(np.abs(w - root))]]
        left = vl[:, [np.argmin(np.abs(wl - np.conj(root)))]]
    p = right @ left.conj().T / (left.conj().T @ right)
    return SuperOperator(s.d, p, name="asymptotic_projector")


@dataclass(frozen=True)
class ConvergenceFit:
    ks: tuple
    distances: tuple
    mu: float
    fitted_rate: float
    constant: float

    def bound_holds(self, slack: float = 1e-12) -> bool:
        """``‖T^k − P‖ ≤ C μ^k`` at every fitted k, with C the smallest such constant."""
        if self.mu == 0:
            return max(self.distances) <= slack
        return all(dist <= self.constant * self.mu**k * (1 + 1e-9) + slack for k, dist in zip(self.ks, self.distances))


def convergence_fit(s: SuperOperator, ks=range(10, 31), tol: ToleranceConfig = DEFAULT_TOL) -> ConvergenceFit:
    """Fit ``‖Φ^k − P_∞‖ ≈ C·rate^k`` over ``ks`` (operator norm of transfer matrices)."""
    report = analyze_spectrum(s, tol)
    p = asymptotic_projector(s, tol, report).transfer
    ks = tuple(int(k) for k in ks)
    dists = tuple(float(np.linalg.norm(np.linalg.matrix_power(s.transfer, k) - p, 2)) for k in ks)
    mu = report.second_modulus
    usable = [(k, dist) for k, dist in zip(ks, dists) if dist > 1e-13]
    if len(usable) >= 2:
        kk, dd = np.array(usable).T
        slope, _ = np.polyfit(kk, np.log(dd), 1)
        rate = float(np.exp(slope))
    else:
        rate = 0.0
    constant = max((dist / mu**k for k, dist in zip(ks, dists)), default=0.0) if mu > 0 else 0.0
    return ConvergenceFit(ks, dists, mu, rate, float(constant))
