import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qwielandt import mapmodel as mm
from qwielandt import numkernel as nk
from qwielandt import zoo
from qwielandt.errors import DimensionMismatch, NotCompletelyPositive, SchemaError, ShapeMismatch
from qwielandt.mapmodel import Verdict

from conftest import random_density, random_psd


def _kraus_oracle(ops, x):
    return sum(k @ x @ k.conj().T for k in ops)


def _choi_oracle(ops, d):
    c = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d))
            e[i, j] = 1
            c += np.kron(e, _kraus_oracle(ops, e))
    return c


def _random_kraus(rng, d, n):
    g = rng.standard_normal((n * d, d)) + 1j * rng.standard_normal((n * d, d))
    q, _ = np.linalg.qr(g)
    return [q[k * d:(k + 1) * d] for k in range(n)]


@pytest.mark.parametrize("d,n", [(2, 1), (2, 3), (3, 2)])
def test_representations_agree_with_oracle(rng, d, n):
    ops = _random_kraus(rng, d, n)
    s = mm.from_kraus(ops)
    x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    np.testing.assert_allclose(s(x), _kraus_oracle(ops, x), atol=1e-12)
    np.testing.assert_allclose(s.choi, _choi_oracle(ops, d), atol=1e-12)
    np.testing.assert_allclose(s.transfer, sum(np.kron(k.conj(), k) for k in ops), atol=1e-12)
    via_choi = mm.from_choi(s.choi)
    via_transfer = mm.from_transfer(s.transfer)
    np.testing.assert_allclose(via_choi(x), s(x), atol=1e-12)
    np.testing.assert_allclose(via_transfer.choi, s.choi, atol=1e-12)


def test_from_function_matches_kraus(rng):
    ops = _random_kraus(rng, 3, 2)
    s = mm.from_function(lambda x: _kraus_oracle(ops, x), 3)
    np.testing.assert_allclose(s.transfer, mm.from_kraus(ops).transfer, atol=1e-12)


def test_to_kraus_reconstructs_channel(rng):
    s = mm.from_kraus(_random_kraus(rng, 3, 2))
    ops = mm.to_kraus(mm.from_choi(s.choi))
    assert len(ops) == 2
    np.testing.assert_allclose(mm.from_kraus(ops).transfer, s.transfer, atol=1e-10)


def test_to_kraus_rejects_non_cp():
    with pytest.raises(NotCompletelyPositive):
        mm.to_kraus(mm.from_function(lambda x: x.T, 2))


def test_apply_batch_and_rank_one(rng):
    s = mm.from_kraus(_random_kraus(rng, 2, 2))
    xs = rng.standard_normal((5, 2, 2)) + 0j
    out = s.apply_batch(xs)
    for x, y in zip(xs, out):
        np.testing.assert_allclose(y, s(x), atol=1e-12)
    psi = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    for p, y in zip(psi, s.apply_rank_one(psi)):
        np.testing.assert_allclose(y, s(np.outer(p, p.conj())), atol=1e-12)


def test_shape_errors():
    with pytest.raises(ShapeMismatch):
        mm.from_kraus([np.eye(2), np.eye(3)])
    with pytest.raises(ShapeMismatch):
        mm.from_choi(np.eye(5))
    with pytest.raises(DimensionMismatch):
        mm.identity_map(2)(np.eye(3))
    with pytest.raises(DimensionMismatch):
        mm.compose(mm.identity_map(2), mm.identity_map(3))


def test_compose_power_and_adjoint(rng):
    a = mm.from_kraus(_random_kraus(rng, 2, 2))
    b = mm.from_kraus(_random_kraus(rng, 2, 3))
    x = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    y = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    np.testing.assert_allclose(mm.compose(a, b)(x), a(b(x)), atol=1e-12)
    np.testing.assert_allclose(mm.power(a, 3)(x), a(a(a(x))), atol=1e-12)
    np.testing.assert_allclose(mm.power(a, 0)(x), x)
    lhs = np.trace(a(x).conj().T @ y)
    rhs = np.trace(x.conj().T @ mm.adjoint(a)(y))
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_tensor_acts_on_products(rng):
    a = mm.from_kraus(_random_kraus(rng, 2, 2))
    b = mm.from_kraus(_random_kraus(rng, 3, 2))
    x = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    y = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    ab = mm.tensor(a, b)
    assert ab.d == 6
    np.testing.assert_allclose(ab(np.kron(x, y)), np.kron(a(x), b(y)), atol=1e-12)
    np.testing.assert_allclose(mm.from_kraus(list(ab.kraus)).transfer, ab.transfer, atol=1e-12)


def test_maps_are_immutable(rng):
    s = mm.from_kraus(_random_kraus(rng, 2, 1))
    with pytest.raises(ValueError):
        s.transfer[0, 0] = 5
    with pytest.raises(TypeError):
        s.meta["x"] = 1


def test_predicates_on_known_maps():
    transpose = mm.from_function(lambda x: x.T, 2)
    assert mm.is_trace_preserving(transpose).certified
    assert mm.is_unital(transpose).certified
    assert mm.is_hermiticity_preserving(transpose).certified
    cp = mm.is_cp(transpose)
    assert cp.falsified
    assert cp.margin == pytest.approx(-1.0)
    assert mm.is_positive_sampled(transpose).verdict is Verdict.UNFALSIFIED
    dep = zoo.named("depolarizing", d=2, p=0.8)
    assert mm.is_cp(dep).certified
    assert mm.is_ppt(dep).certified
    assert mm.entanglement_breaking_check(dep).certified
    weak = zoo.named("depolarizing", d=2, p=0.5)
    assert mm.is_ppt(weak).margin == pytest.approx(0.5 / 2 - 0.5, abs=1e-12)
    assert mm.is_ppt(mm.identity_map(2)).falsified
    assert mm.entanglement_breaking_check(mm.identity_map(3)).falsified


def test_not_trace_preserving_witness():
    s = mm.from_kraus([0.5 * np.eye(2)])
    v = mm.is_trace_preserving(s)
    assert v.falsified
    np.testing.assert_allclose(v.witness, 0.25 * np.eye(2))


def test_positive_sampling_finds_negative_map():
    s = mm.from_function(lambda x: np.trace(x) * np.eye(2) - 2 * x, 2)
    v = mm.is_positive_sampled(s, n_samples=100)
    assert v.falsified
    assert v.samples_used == 1


def test_schwarz_amplitude_damping_witness():
    v = mm.schwarz_check(zoo.named("amplitude_damping", gamma=0.3))
    assert v.falsified
    np.testing.assert_allclose(v.witness, np.eye(2))
    assert v.samples_used == 1


def test_schwarz_certified_for_unital_cp():
    v = mm.schwarz_check(zoo.named("depolarizing", d=3, p=0.2))
    assert v.verdict is Verdict.CERTIFIED


def test_choi_schwarz_map_is_schwarz_but_not_cp():
    s = zoo.named("choi_schwarz_m2")
    assert mm.is_cp(s).margin == pytest.approx(-0.25, abs=1e-12)
    v = mm.schwarz_check(s, n_samples=10_000)
    assert v.verdict is Verdict.UNFALSIFIED
    assert v.samples_used == 10_000


def test_predicates_bundle_serializes():
    out = mm.predicates(zoo.named("depolarizing", d=2, p=0.3), n_samples=50).to_dict()
    assert set(out) == {
        "is_trace_preserving", "is_unital", "is_hermiticity_preserving",
        "is_cp", "is_ppt", "is_positive_sampled", "schwarz_check",
    }
    json.dumps(out)


@pytest.mark.parametrize("rep", ["kraus", "choi", "transfer"])
def test_channel_json_roundtrip(tmp_path, rep):
    s = zoo.named("transpose_depolarizing_d3")
    path = tmp_path / "c.json"
    mm.dump_channel(s, path, repr=rep)
    back = mm.load_channel(path)
    assert mm.transfer_distance(back, s) < 1e-12
    assert back.name == s.name


@pytest.mark.parametrize(
    "obj",
    [
        [],
        {"d": 2, "repr": "kraus"},
        {"d": 0, "repr": "kraus", "data": [[[[1, 0]]]]},
        {"d": 2, "repr": "weird", "data": []},
        {"d": 2, "repr": "choi", "data": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]},
        {"d": 1, "repr": "transfer", "data": [[[1, 0, 0]]]},
        {"d": 1, "repr": "transfer", "data": [[["a", 0]]]},
    ],
)
def test_channel_json_schema_errors(obj):
    with pytest.raises(SchemaError):
        mm.channel_from_dict(obj)


def test_invalid_json_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(SchemaError):
        mm.load_channel(path)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_trace_distance_data_processing(d, n, seed):
    rng = np.random.default_rng(seed)
    s = mm.from_kraus(_random_kraus(rng, d, n))
    r1, r2 = random_density(rng, d), random_density(rng, d)
    assert nk.trace_norm(s(r1) - s(r2)) <= nk.trace_norm(r1 - r2) + 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 3), st.integers(0, 2**32 - 1))
def test_unital_channel_majorization(d, seed):
    rng = np.random.default_rng(seed)
    s = zoo.sample(zoo.EnsembleSpec("mixed_unitary", d, seed=seed % 1000))[0]
    a = random_psd(rng, d, rank=int(rng.integers(1, d + 1)))
    before = np.sort(np.linalg.eigvalsh(a))[::-1]
    after = np.sort(np.linalg.eigvalsh(nk.hermitian_part(s(a))))[::-1]
    assert np.all(np.cumsum(after) <= np.cumsum(before) + 1e-9)
    assert np.cumsum(after)[-1] == pytest.approx(np.cumsum(before)[-1], abs=1e-9)
    assert nk.svd_rank(s(a)) >= nk.svd_rank(a)
