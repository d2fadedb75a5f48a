import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qwielandt import mapmodel as mm
from qwielandt import multdomain as md
from qwielandt import numkernel as nk
from qwielandt import zoo
from qwielandt.errors import PreconditionFailed
from qwielandt.mapmodel import Verdict


def defining_residual(s, a, probes):
    """max over probes b of ‖Φ(ab) − Φ(a)Φ(b)‖ + ‖Φ(ba) − Φ(b)Φ(a)‖."""
    fa = s(a)
    return max(
        np.linalg.norm(s(a @ b) - fa @ s(b)) + np.linalg.norm(s(b @ a) - s(b) @ fa) for b in probes
    )


def matrix_units(d):
    out = []
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d))
            e[i, j] = 1
            out.append(e)
    return out


def test_identity_domain_is_everything():
    dom = md.mult_domain(mm.identity_map(3))
    assert dom.dim == 9
    assert dom.diagnostics["routes_agree"]


def test_unitary_channel_domain_is_full_algebra():
    dom = md.mult_domain(zoo.named("unitary", d=3, seed=1))
    assert dom.dim == 9
    assert dom.diagnostics["route_distance"] < 1e-7


def test_transpose_depolarizing_domain_is_trivial(td3):
    dom = md.mult_domain(td3)
    assert dom.dim == 1
    np.testing.assert_allclose(np.abs(dom.basis[0]), np.eye(3) / np.sqrt(3), atol=1e-12)
    assert dom.verified_star_closed and dom.verified_mult_closed


def test_block_sum_domain_contains_block_projector():
    s = zoo.named("block_sum")
    dom = md.mult_domain(s)
    assert dom.dim == 2
    assert dom.contains(np.array(s.meta["block_projector"]), 1e-9)


def test_diagonal_dephasing_domain_is_diagonal():
    s = mm.from_kraus([np.diag(e) for e in np.eye(3)])
    dom = md.mult_domain(s)
    assert dom.dim == 3
    for k in range(3):
        assert dom.contains(np.diag(np.eye(3)[k]), 1e-10)
    assert md.commutator_residual(dom) < 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_domain_elements_satisfy_definition(seed):
    s = zoo.sample(zoo.EnsembleSpec("mixed_unitary", 3, seed=seed, params={"n_kraus": 1}))[0]
    dom = md.mult_domain(s)
    for a in dom.basis:
        assert defining_residual(s, a, matrix_units(3)) < 1e-9


def test_non_members_fail_definition(td3):
    off = np.zeros((3, 3))
    off[0, 1] = 1
    assert defining_residual(td3, off, matrix_units(3)) > 1e-3


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_routes_agree_on_random_unital_channels(d, n, seed):
    s = zoo.sample(zoo.EnsembleSpec("mixed_unitary", d, seed=seed, params={"n_kraus": n}))[0]
    dom = md.mult_domain(s)
    assert dom.diagnostics["route_distance"] < 1e-7
    star, mult = md.algebra_residuals(dom)
    assert star < 1e-7 and mult < 1e-7


def test_chain_examples(td3):
    chain = md.mult_chain(td3)
    assert chain.kappa == 1
    assert chain.dims[:3] == (1, 1, 1)
    assert chain.trivial
    ident = md.mult_chain(mm.identity_map(2))
    assert ident.kappa == 1 and not ident.trivial
    json.dumps(chain.to_dict(emit_basis=True))


def test_chain_of_random_channel_is_monotone():
    s = zoo.sample(zoo.EnsembleSpec("mixed_unitary", 3, seed=2))[0]
    chain = md.mult_chain(s)
    assert chain.diagnostics["monotone"]
    assert chain.diagnostics["closure_ok"]
    assert chain.kappa <= 2 * (3 - 1)
    assert chain.trivial


def test_chain_preconditions():
    with pytest.raises(PreconditionFailed):
        md.mult_chain(mm.from_kraus([0.5 * np.eye(2)]))
    with pytest.raises(PreconditionFailed):
        md.mult_chain(zoo.named("amplitude_damping"))


def test_tensor_split_on_qubit_pair(qubit_mixed_unitaries):
    a, b = qubit_mixed_unitaries[2:4]
    rep = md.tensor_split_check(a, b)
    assert rep.split_ok and rep.kappa_rule_ok
    assert rep.distance < 1e-7


def test_tensor_split_with_nontrivial_factor(qubit_mixed_unitaries):
    rep = md.tensor_split_check(zoo.named("unitary", d=2, seed=3), qubit_mixed_unitaries[0])
    assert rep.split_ok


def test_tensor_split_preconditions():
    with pytest.raises(PreconditionFailed):
        md.tensor_split_check(zoo.named("amplitude_damping"), mm.identity_map(2))


def test_nontrivial_projection():
    dom = md.mult_domain(zoo.named("block_sum"))
    p = md.nontrivial_projection(dom)
    np.testing.assert_allclose(p @ p, p, atol=1e-10)
    assert 0 < np.trace(p).real < 4
    scalars = nk.OperatorSubspace.span([np.eye(3)], 3)
    assert md.nontrivial_projection(scalars) is None


def test_fully_irreducible_check():
    assert md.fully_irreducible_check(zoo.named("transpose_depolarizing_d3")).verdict is Verdict.CERTIFIED
    assert md.fully_irreducible_check(zoo.named("block_sum")).falsified
    assert md.fully_irreducible_check(zoo.named("unitary", d=2, seed=0)).falsified
    with pytest.raises(PreconditionFailed):
        md.fully_irreducible_check(zoo.named("amplitude_damping"))
