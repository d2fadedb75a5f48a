import json

import numpy as np
import pytest

from qwielandt import dynamics as dyn
from qwielandt import mapmodel as mm
from qwielandt import numkernel as nk
from qwielandt import zoo
from qwielandt.dynamics import Branch
from qwielandt.errors import NotPositive, NotTracePreserving, PreconditionFailed


def brute_product_span(kraus, length):
    """Dimension of span{w'† w} by enumerating every word pair."""
    import itertools

    words = [np.linalg.multi_dot(w) if length > 1 else w[0] for w in itertools.product(kraus, repeat=length)]
    prods = [a.conj().T @ b for a in words for b in words]
    return np.linalg.matrix_rank(np.array([x.ravel() for x in prods]), tol=1e-9)


@pytest.mark.parametrize("p", [0.2, 0.6])
def test_depolarizing_contraction_closed_form(p):
    rep = dyn.contraction_coefficient(zoo.named("depolarizing", d=2, p=p))
    assert rep.c_lower == pytest.approx(1 - p, abs=1e-4)
    assert rep.delta_star == pytest.approx(p / (1 - p), abs=1e-4)
    assert rep.c_lower <= rep.c_upper_from_delta + 1e-6
    assert rep.strictly_contractive


def test_witness_pair_attains_lower_bound():
    s = zoo.sample(zoo.EnsembleSpec("mixed_unitary", 2, seed=8))[0]
    rep = dyn.contraction_coefficient(s)
    psi, phi = rep.witness_pair
    ratio = 0.5 * nk.trace_norm(s(np.outer(psi, psi.conj()) - np.outer(phi, phi.conj())))
    assert ratio == pytest.approx(rep.c_lower, abs=1e-9)
    json.dumps(rep.to_dict())


def test_unitary_channel_is_not_contractive():
    rep = dyn.contraction_coefficient(zoo.named("unitary", d=2, seed=4))
    assert rep.c_lower == pytest.approx(1.0, abs=1e-6)
    assert rep.delta_star == pytest.approx(0.0, abs=1e-6)
    assert not rep.strictly_contractive


def test_completely_depolarizing_has_capped_delta():
    rep = dyn.contraction_coefficient(zoo.named("omega", d=2))
    assert rep.c_lower == pytest.approx(0.0, abs=1e-6)
    assert rep.delta_capped
    assert rep.delta_star == dyn.DELTA_CAP


def test_contraction_preconditions():
    with pytest.raises(NotTracePreserving):
        dyn.contraction_coefficient(mm.from_kraus([0.5 * np.eye(2)]))
    with pytest.raises(NotPositive):
        dyn.contraction_coefficient(mm.from_function(lambda x: 1.5 * np.trace(x) * np.eye(2) - 2 * x, 2))


def test_contraction_does_not_exceed_trace_distance_bound(rng):
    s = zoo.sample(zoo.EnsembleSpec("haar_kraus", 3, seed=2))[0]
    rep = dyn.contraction_coefficient(s)
    for _ in range(200):
        a = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        b = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
        ratio = 0.5 * nk.trace_norm(s(np.outer(a, a.conj()) - np.outer(b, b.conj())))
        assert ratio <= rep.c_lower + 1e-6


def test_power_contraction(td3):
    rep = dyn.contractivity_of_power(td3)
    assert rep.omega == 2 and rep.i_index == 2
    assert rep.i_report is rep.omega_report
    assert rep.strictly_contractive
    assert rep.to_dict()["strictly_contractive"]


def test_word_product_span_matches_enumeration(td3):
    for length in (1, 2):
        assert dyn.word_product_span(td3.kraus, length) == brute_product_span(list(td3.kraus), length)
    s = zoo.sample(zoo.EnsembleSpec("mixed_unitary", 2, seed=1))[0]
    assert dyn.word_product_span(s.kraus, 1) == brute_product_span(list(s.kraus), 1)


def test_zero_error_primitive_branch(td3):
    cert = dyn.zero_error_dichotomy(td3)
    assert cert.branch is Branch.PRIMITIVE
    assert cert.span_dim == 9
    assert cert.omega == 2
    assert cert.holds


def test_zero_error_unitary_branch():
    cert = dyn.zero_error_dichotomy(zoo.named("unitary", d=3, seed=2))
    assert cert.branch is Branch.NON_PRIMITIVE
    assert cert.recovery_checked_n == (1, 2, 3, 4, 5)
    assert max(cert.recovery_residuals) < 1e-10
    assert cert.holds
    json.dumps(cert.to_dict())


def test_zero_error_block_sum_projection():
    s = zoo.named("block_sum")
    cert = dyn.zero_error_dichotomy(s)
    assert cert.branch is Branch.NON_PRIMITIVE
    block = np.array(s.meta["block_projector"])
    p = cert.projection
    assert np.allclose(p, block, atol=1e-8) or np.allclose(p, np.eye(4) - block, atol=1e-8)
    assert cert.holds


def test_zero_error_requires_unital_channel():
    with pytest.raises(PreconditionFailed):
        dyn.zero_error_dichotomy(zoo.named("amplitude_damping"))
