"""Named maps with known ground truth and seeded random channel ensembles."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import mapmodel as mm
from . import numkernel as nk
from .errors import BadParams, RejectionCapExceeded, UnknownName
from .mapmodel import SuperOperator
from .primitivity import classical_wielandt, embed_stochastic, wielandt_matrix

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = ["FAMILIES", "NAMES", "EnsembleSpec", "named", "sample", "weyl_operators"]


# -- named maps -----------------------------------------------------------------


def weyl_operators(d: int) -> list[np.ndarray]:
    """The d² unitaries ``X^a Z^b`` (Paulis up to phase when d = 2)."""
    omega = np.exp(2j * np.pi / d)
    x = np.roll(np.eye(d), 1, axis=0)
    z = np.diag(omega ** np.arange(d))
    return [np.linalg.matrix_power(x, a) @ np.linalg.matrix_power(z, b) for a in range(d) for b in range(d)]


def _check_d(d, minimum: int = 1) -> int:
    if not isinstance(d, (int, np.integer)) or d < minimum:
        raise BadParams(f"dimension must be an integer >= {minimum}, got {d!r}")
    return int(d)


def _identity(d: int = 2) -> SuperOperator:
    d = _check_d(d)
    return mm.from_kraus([np.eye(d)], name="identity", meta={"expected_kappa": 1, "expected_domain_dim": d * d, "primitive": False})


def _omega(d: int = 2) -> SuperOperator:
    d = _check_d(d)
    ops = []
    for i in range(d):
        for j in range(d):
            a = np.zeros((d, d))
            a[i, j] = 1 / np.sqrt(d)
            ops.append(a)
    meta = {"expected_omega": 1, "expected_kappa": 1, "expected_domain_dim": 1, "analytic_min_output_eig": 1.0 / d}
    return mm.from_kraus(ops, name="omega", meta=meta)


def _depolarizing(d: int = 2, p: float = 0.5) -> SuperOperator:
    d = _check_d(d)
    if not 0 <= p <= 1:
        raise BadParams(f"depolarizing parameter must lie in [0, 1], got {p}")
    weights = np.full(d * d, p / d**2)
    weights[0] += 1 - p
    ops = [np.sqrt(w) * u for w, u in zip(weights, weyl_operators(d)) if w > 0]
    meta = {"p": p}
    if p > 0:
        meta.update(expected_omega=1, analytic_min_output_eig=p / d, expected_c=1 - p)
        if p < 1:
            meta["expected_delta_star"] = p / (1 - p)
    return mm.from_kraus(ops, name="depolarizing", meta=meta)


def _transpose_depolarizing(d: int = 3) -> SuperOperator:
    """``x ↦ (tr(x)·1 − xᵀ)/(d−1)``; for d = 3 this is ``½(tr(x)1 − xᵀ)``."""
    d = _check_d(d, 2)
    ops = []
    for i in range(d):
        for j in range(i + 1, d):
            a = np.zeros((d, d))
            a[i, j], a[j, i] = 1.0, -1.0
            ops.append(a / np.sqrt(d - 1))
    meta = {"expected_kappa": 1, "expected_domain_dim": 1}
    if d == 3:
        meta["expected_omega"] = 2
    return mm.from_kraus(ops, name="transpose_depolarizing", meta=meta)


def _choi_schwarz_m2() -> SuperOperator:
    """``x ↦ ½xᵀ + ¼tr(x)1`` on M₂: Schwarz but not 2-positive."""
    s = mm.from_function(lambda x: 0.5 * x.T + 0.25 * np.trace(x) * np.eye(2), 2, name="choi_schwarz_m2")
    return s.with_meta(analytic_min_output_eig=0.25, expected_omega=1, cp=False)


def _unitary(u=None, d: int = 2, seed=None) -> SuperOperator:
    if u is None:
        d = _check_d(d)
        u = nk.haar_unitary(nk.as_rng(0 if seed is None else seed), d)
    u = mm.decode_matrix(u) if isinstance(u, (list, dict)) else nk.as_matc(u, square=True)
    d = u.shape[0]
    if np.linalg.norm(u.conj().T @ u - np.eye(d)) > 1e-9:
        raise BadParams("matrix is not unitary")
    meta = {"expected_kappa": 1, "expected_domain_dim": d * d, "primitive": d == 1}
    return mm.from_kraus([u], name="unitary", meta=meta)


def _amplitude_damping(gamma: float = 0.3) -> SuperOperator:
    if not 0 <= gamma <= 1:
        raise BadParams(f"damping rate must lie in [0, 1], got {gamma}")
    a0 = np.array([[1, 0], [0, np.sqrt(1 - gamma)]])
    a1 = np.array([[0, np.sqrt(gamma)], [0, 0]])
    return mm.from_kraus([a0, a1], name="amplitude_damping", meta={"gamma": gamma, "schwarz": "Falsified"})


def _block_sum(phi1: SuperOperator | None = None, phi2: SuperOperator | None = None) -> SuperOperator:
    """``x ↦ Φ₁(x₁₁) ⊕ Φ₂(x₂₂)`` on the block decomposition of M_{d₁+d₂}."""
    phi1 = phi1 if phi1 is not None else _depolarizing(2, 0.5)
    phi2 = phi2 if phi2 is not None else _depolarizing(2, 0.5)
    k1 = phi1.kraus if phi1.has_kraus else mm.to_kraus(phi1)
    k2 = phi2.kraus if phi2.has_kraus else mm.to_kraus(phi2)
    d1, d2 = phi1.d, phi2.d
    d = d1 + d2
    ops = []
    for a in k1:
        big = np.zeros((d, d), dtype=np.complex128)
        big[:d1, :d1] = a
        ops.append(big)
    for b in k2:
        big = np.zeros((d, d), dtype=np.complex128)
        big[d1:, d1:] = b
        ops.append(big)
    block = np.diag([1.0] * d1 + [0.0] * d2)
    return mm.from_kraus(ops, name="block_sum", meta={"primitive": False, "block_projector": block.tolist()})


def _wielandt_classical(d: int = 3) -> SuperOperator:
    d = _check_d(d, 2)
    s = embed_stochastic(wielandt_matrix(d), name="wielandt_classical")
    return s.with_meta(expected_omega=d * d - 2 * d + 2)


_REGISTRY: dict[str, Callable[..., SuperOperator]] = {
    "identity": _identity,
    "omega": _omega,
    "depolarizing": _depolarizing,
    "transpose_depolarizing_d3": lambda d=3: _transpose_depolarizing(d).renamed("transpose_depolarizing_d3"),
    "transpose_depolarizing": _transpose_depolarizing,
    "choi_schwarz_m2": _choi_schwarz_m2,
    "unitary": _unitary,
    "amplitude_damping": _amplitude_damping,
    "block_sum": _block_sum,
    "wielandt_classical": _wielandt_classical,
}
NAMES = tuple(_REGISTRY)


def named(name: str, **params) -> SuperOperator:
    """Build a registry map, e.g. ``named("depolarizing", d=2, p=0.3)``."""
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise UnknownName(f"unknown map {name!r}; known: {', '.join(NAMES)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise BadParams(f"bad parameters for {name!r}: {exc}") from None


# -- ensembles ------------------------------------------------------------------


@dataclass(frozen=True)
class EnsembleSpec:
    family: str
    d: int
    count: int = 1
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UnknownName(f"unknown family {self.family!r}; known: {', '.join(FAMILIES)}")
        if self.count < 1:
            raise BadParams("count must be at least 1")
        _check_d(self.d)

    @classmethod
    def from_mapping(cls, data: dict) -> "EnsembleSpec":
        data = dict(data)
        unknown = set(data) - {"family", "d", "count", "seed", "params"}
        if unknown:
            raise BadParams(f"unknown ensemble fields: {sorted(unknown)}")
        try:
            return cls(
                family=data["family"],
                d=int(data["d"]),
                count=int(data.get("count", 1)),
                seed=int(data.get("seed", 0)),
                params=dict(data.get("params", {})),
            )
        except KeyError as exc:
            raise BadParams(f"missing ensemble field {exc}") from None

    @classmethod
    def from_file(cls, path) -> "EnsembleSpec":
        """Read a JSON file or a TOML file (optionally under an ``[ensemble]`` table)."""
        path = Path(path)
        text = path.read_text()
        data = tomllib.loads(text) if path.suffix == ".toml" else json.loads(text)
        return cls.from_mapping(data.get("ensemble", data))

    def to_dict(self) -> dict:
        return {"family": self.family, "d": self.d, "count": self.count, "seed": self.seed, "params": self.params}


def _haar_kraus(rng, d: int, n_kraus: int = 2) -> SuperOperator:
    v, _ = np.linalg.qr(nk.ginibre(rng, n_kraus * d, d))
    ops = [v[k * d : (k + 1) * d] for k in range(n_kraus)]
    return mm.from_kraus(ops, name="haar_kraus", meta={"declared": ["cp", "tp"]})


def _mixed_unitary(rng, d: int, n_kraus: int = 2) -> SuperOperator:
    w = rng.dirichlet(np.ones(n_kraus))
    ops = [np.sqrt(wk) * nk.haar_unitary(rng, d) for wk in w]
    return mm.from_kraus(ops, name="mixed_unitary", meta={"declared": ["cp", "tp", "unital"], "weights": w.tolist()})


def sinkhorn(a: np.ndarray, max_iter: int = 1000, tol: float = 1e-12) -> tuple[np.ndarray, bool]:
    """Alternate row and column normalization; the last step fixes the columns."""
    a = np.array(a, dtype=float)
    for _ in range(max_iter):
        a /= a.sum(axis=1, keepdims=True)
        a /= a.sum(axis=0, keepdims=True)
        if np.abs(a.sum(axis=1) - 1).max() < tol:
            return a, True
    return a, False


def _doubly_stochastic_embed(rng, d: int, density: float = 0.6, max_tries: int = 1000) -> SuperOperator:
    for _ in range(max_tries):
        mask = rng.random((d, d)) < density
        mask[np.arange(d), rng.permutation(d)] = True
        w, ok = sinkhorn(np.where(mask, rng.uniform(0.5, 1.5, (d, d)), 0.0))
        if ok:
            s = embed_stochastic(w, name="doubly_stochastic_embed")
            return s.with_meta(declared=["cp", "tp", "unital"])
    raise RejectionCapExceeded("Sinkhorn failed to converge on every sampled pattern")


def _column_stochastic_embed(rng, d: int, density: float = 0.4, max_tries: int = 10_000) -> SuperOperator:
    """Embedded random primitive column-stochastic matrix (weights in [1, 2] before normalizing)."""
    for _ in range(max_tries):
        mask = rng.random((d, d)) < density
        if classical_wielandt(mask).primitive:
            w = np.where(mask, rng.uniform(1.0, 2.0, (d, d)), 0.0)
            w /= w.sum(axis=0, keepdims=True)
            s = embed_stochastic(w, name="column_stochastic_embed")
            return s.with_meta(declared=["cp", "tp"], classical_p=classical_wielandt(w).p)
    raise RejectionCapExceeded("no primitive pattern found")


def _random_state(rng, d: int) -> np.ndarray:
    g = nk.ginibre(rng, d, d)
    r = g @ g.conj().T
    return r / np.trace(r).real


def _eb_holevo(rng, d: int, n_outcomes: int | None = None, unital: bool = False) -> SuperOperator:
    """Measure-and-prepare channel ``x ↦ Σ tr(F_k x) R_k``.

    With ``unital=True`` the prepared states are ``R_k = F_k / tr F_k``, which
    makes ``Φ(1) = Σ F_k = 1`` while keeping the measure-and-prepare form.
    """
    n = n_outcomes or d * d
    g = nk.ginibre(rng, n, d, d)
    g = g @ nk.dagger(g)
    w, v = np.linalg.eigh(g.sum(axis=0))
    inv_sqrt = (v / np.sqrt(w)) @ v.conj().T
    povm = inv_sqrt @ g @ inv_sqrt
    povm = nk.hermitian_part(povm)
    if unital:
        states = povm / np.trace(povm, axis1=1, axis2=2).real[:, None, None]
    else:
        states = np.stack([_random_state(rng, d) for _ in range(n)])
    choi = sum(np.kron(f.T, r) for f, r in zip(povm, states))
    declared = ["cp", "tp", "eb"] + (["unital"] if unital else [])
    meta = {"construction": "holevo", "declared": declared, "unital_requested": unital}
    return mm.from_choi(choi, name="eb_holevo", meta=meta)


def _ppt_rejection(rng, d: int, rank: int | None = None, max_tries: int = 10_000) -> SuperOperator:
    r = rank or d * d
    for _ in range(max_tries):
        g = nk.ginibre(rng, d * d, r)
        c = g @ g.conj().T
        x = nk.partial_trace(c, (d, d), leg=1)
        w, v = np.linalg.eigh(x)
        inv_sqrt = (v / np.sqrt(w)) @ v.conj().T
        c = np.kron(inv_sqrt, np.eye(d)) @ c @ np.kron(inv_sqrt, np.eye(d))
        c = nk.hermitian_part(c)
        if np.linalg.eigvalsh(nk.hermitian_part(nk.partial_transpose(c, (d, d), leg=0)))[0] >= 0:
            return mm.from_choi(c, name="ppt_rejection", meta={"declared": ["cp", "tp", "ppt"]})
    raise RejectionCapExceeded(f"no PPT Choi matrix in {max_tries} draws at d = {d}")


FAMILIES: dict[str, Callable[..., SuperOperator]] = {
    "haar_kraus": _haar_kraus,
    "mixed_unitary": _mixed_unitary,
    "doubly_stochastic_embed": _doubly_stochastic_embed,
    "eb_holevo": _eb_holevo,
    "ppt_rejection": _ppt_rejection,
    "column_stochastic_embed": _column_stochastic_embed,
}


def sample(spec: EnsembleSpec) -> list[SuperOperator]:
    """``spec.count`` maps drawn sequentially from one seeded generator."""
    rng = np.random.default_rng(spec.seed)
    factory = FAMILIES[spec.family]
    out = []
    for k in range(spec.count):
        try:
            s = factory(rng, spec.d, **spec.params)
        except TypeError as exc:
            raise BadParams(f"bad parameters for family {spec.family!r}: {exc}") from None
        out.append(s.with_meta(family=spec.family, instance=k, seed=spec.seed))
    return out
