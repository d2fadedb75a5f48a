import numpy as np
import pytest

from qwielandt import mapmodel as mm
from qwielandt import positivity as pos
from qwielandt import spectral as sp
from qwielandt import zoo
from qwielandt.errors import NotPositive, NotPrimitive
from qwielandt.numkernel import ToleranceConfig
from qwielandt.positivity import CertificateSource, PositivityVerdict


def test_depolarizing_spectrum_is_known():
    p = 0.3
    rep = sp.analyze_spectrum(zoo.named("depolarizing", d=3, p=p))
    ev = np.sort(np.abs(rep.eigenvalues))[::-1]
    np.testing.assert_allclose(ev, [1.0] + [1 - p] * 8, atol=1e-12)
    assert rep.spectral_radius == pytest.approx(1.0)
    assert rep.second_modulus == pytest.approx(1 - p)
    np.testing.assert_allclose(rep.fixed_point, np.eye(3) / 3, atol=1e-12)
    assert rep.irreducible.certified
    assert rep.primitive.certified


def test_unitary_channel_is_not_primitive():
    rep = sp.analyze_spectrum(zoo.named("unitary", d=2, seed=5))
    assert rep.primitive.falsified
    assert rep.peripheral.size == 4


def test_block_sum_is_reducible():
    rep = sp.analyze_spectrum(zoo.named("block_sum"))
    assert rep.irreducible.falsified
    assert rep.primitive.falsified
    assert rep.diagnostics["route_a"]["perron_multiplicity"] == 2


def test_embedded_cycle_has_peripheral_roots_of_unity():
    w = np.roll(np.eye(3), 1, axis=0)
    from qwielandt.primitivity import embed_stochastic

    rep = sp.analyze_spectrum(embed_stochastic(w))
    assert rep.primitive.falsified
    roots = np.exp(2j * np.pi * np.arange(3) / 3)
    for z in roots:
        assert np.min(np.abs(rep.peripheral - z)) < 1e-9


def test_report_serializes():
    import json

    json.dumps(sp.analyze_spectrum(zoo.named("transpose_depolarizing_d3")).to_dict())


def test_asymptotic_projector_is_completely_depolarizing():
    s = zoo.sample(zoo.EnsembleSpec("mixed_unitary", 3, seed=11))[0]
    p = sp.asymptotic_projector(s)
    x = np.random.default_rng(0).standard_normal((3, 3))
    np.testing.assert_allclose(p(x), np.trace(x) * np.eye(3) / 3, atol=1e-9)


def test_asymptotic_projector_requires_primitive():
    with pytest.raises(NotPrimitive):
        sp.asymptotic_projector(zoo.named("identity", d=2))


def test_convergence_rate_matches_second_eigenvalue():
    fit = sp.convergence_fit(zoo.named("depolarizing", d=2, p=0.2))
    assert fit.mu == pytest.approx(0.8)
    assert fit.fitted_rate == pytest.approx(0.8, rel=1e-6)
    assert fit.bound_holds()


def test_convergence_fit_on_random_channel():
    s = zoo.sample(zoo.EnsembleSpec("mixed_unitary", 2, seed=3))[0]
    fit = sp.convergence_fit(s, ks=range(5, 16))
    assert fit.fitted_rate <= fit.mu * (1 + 1e-3)
    assert fit.bound_holds()


def test_strict_positivity_certificate_sources():
    omega = pos.strict_positivity(zoo.named("omega", d=3))
    assert omega.verdict is PositivityVerdict.CERTIFIED_POSITIVE
    assert omega.certificate_source is CertificateSource.ANALYTIC
    assert omega.lower_bound == pytest.approx(1 / 3)
    dep = pos.strict_positivity(zoo.named("depolarizing", d=2, p=0.5).with_meta(analytic_min_output_eig=None))
    assert dep.certificate_source is CertificateSource.WORD_SPAN_FULL


def test_identity_is_certified_singular():
    res = pos.strict_positivity(mm.identity_map(3))
    assert res.singular
    assert res.min_eig_found == pytest.approx(0.0, abs=1e-10)
    out = mm.identity_map(3).apply_rank_one(res.witness[None, :])[0]
    assert np.linalg.eigvalsh(out)[0] < 1e-6


def test_transpose_depolarizing_power_one_singular():
    s = zoo.named("transpose_depolarizing_d3")
    res = pos.strict_positivity(s)
    assert res.singular
    assert res.certificate_source is CertificateSource.MULTISTART


def test_numerically_positive_without_certificate():
    # map is positive definite on rank-one inputs but its Choi matrix is singular
    s = mm.power(zoo.named("transpose_depolarizing_d3"), 2)
    res = pos.strict_positivity(s)
    assert res.verdict in (PositivityVerdict.NUMERICALLY_POSITIVE, PositivityVerdict.CERTIFIED_POSITIVE)
    assert res.min_eig_found > 1e-3


def test_strict_positivity_rejects_non_positive():
    s = mm.from_function(lambda x: np.trace(x) * np.eye(2) - 2 * x, 2)
    with pytest.raises(NotPositive):
        pos.strict_positivity(s)


def test_strict_positivity_is_seeded():
    s = zoo.named("transpose_depolarizing_d3")
    a = pos.strict_positivity(s, seed=9).to_dict()
    b = pos.strict_positivity(s, seed=9).to_dict()
    assert a == b


def test_tolerance_override_changes_threshold():
    # minimal output eigenvalue p/d = 5e-5 sits between the two thresholds
    s = zoo.named("depolarizing", d=2, p=1e-4).with_meta(analytic_min_output_eig=None)
    assert pos.strict_positivity(s, ToleranceConfig(strict_pos_tol=1e-4)).singular
    assert pos.strict_positivity(s).positive
