import logging
import math

import numpy as np
import pytest

from decoupler import analytic, bath, sequences
from decoupler.analytic import DecayLaw
from decoupler.bath import BathParams
from decoupler.errors import QuadratureError


def test_t2_for_both_centers(nv1, nv2):
    assert analytic.t2_from_bath(nv1) == pytest.approx(2.850, abs=2e-3)
    assert analytic.t2_from_bath(nv2) == pytest.approx(3.443, abs=2e-3)


def test_tau_c_round_trip(nv2):
    t2 = analytic.t2_from_bath(nv2)
    assert analytic.tau_c_from_t2(t2, nv2.b) == pytest.approx(23.0)


def test_fast_bath_warns(caplog):
    with caplog.at_level(logging.WARNING, logger='decoupler.analytic'):
        analytic.t2_from_bath(BathParams(b=0.1, tau_c=1.0))
    assert 'slow-bath' in caplog.text


def test_ramsey_exponent_is_half_the_integral_variance(nv1):
    for t in (0.1, 1.0, 30.0):
        expected = 0.5 * float(bath.integral_variance(nv1, t))
        assert analytic.chi_gaussian(sequences.ramsey(t), nv1) == pytest.approx(expected, rel=1e-12)


def test_ramsey_follows_gaussian_envelope_for_short_times(nv1):
    t = np.array([0.05, 0.2, 0.4])
    exact = [analytic.chi_gaussian(sequences.ramsey(x), nv1) for x in t]
    envelope = -np.log(analytic.fid_envelope(nv1, t))
    np.testing.assert_allclose(exact, envelope, rtol=1e-2)


def test_spin_echo_follows_cubic_law(nv1):
    t = 1.0
    chi = analytic.chi_gaussian(sequences.spin_echo(t), nv1)
    assert chi == pytest.approx((t / analytic.t2_from_bath(nv1)) ** 3, rel=0.02)


def test_spin_echo_closed_form(nv1):
    t = 7.0
    x = t / nv1.tau_c
    closed = nv1.b ** 2 * nv1.tau_c ** 2 * (x - 3 + 4 * math.exp(-x / 2) - math.exp(-x))
    assert analytic.chi_gaussian(sequences.spin_echo(t), nv1) == pytest.approx(closed, rel=1e-10)


def test_echo_refocuses_static_field():
    # a quasi-static bath leaves the echo untouched at short times
    static = BathParams(b=1.0, tau_c=1e6)
    assert analytic.chi_gaussian(sequences.spin_echo(1.0), static) < 1e-6


@pytest.mark.parametrize(
    'factory',
    [
        lambda t: sequences.ramsey(t),
        lambda t: sequences.spin_echo(t),
        lambda t: sequences.cpmg(4, t),
        lambda t: sequences.udd(5, t),
        lambda t: sequences.xy(8, t),
    ],
)
@pytest.mark.parametrize('center', ['nv1', 'nv2'])
@pytest.mark.parametrize('t', [0.7, 6.0])
def test_time_domain_and_filter_function_agree(factory, center, t, request):
    p = request.getfixturevalue(center)
    seq = factory(t)
    chi = analytic.chi_gaussian(seq, p)
    assert analytic.filter_exponent(seq, p) == pytest.approx(chi, rel=1e-4)


@pytest.mark.parametrize('t', [6.0, 40.0])
def test_many_pulse_filter_exponent(nv1, t):
    seq = sequences.cpmg(64, t)
    assert analytic.filter_exponent(seq, nv1) == pytest.approx(analytic.chi_gaussian(seq, nv1), rel=1e-4)


def test_filter_function_at_zero_frequency():
    assert analytic.filter_function(sequences.ramsey(2.0), 0.0)[0] == pytest.approx(4.0)
    assert analytic.filter_function(sequences.spin_echo(2.0), 0.0)[0] == pytest.approx(0.0, abs=1e-24)


def test_filter_quadrature_reports_failure(nv1):
    with pytest.raises(QuadratureError) as info:
        analytic.filter_exponent(sequences.cpmg(2, 3.0), nv1, max_refinements=0)
    assert math.isinf(info.value.achieved_tolerance)


@pytest.mark.parametrize('n', [3, 6, 12])
def test_cpmg_outperforms_udd(nv1, n):
    t = analytic.t_coh(nv1, n)
    assert analytic.chi_gaussian(sequences.cpmg(n, t), nv1) < analytic.chi_gaussian(sequences.udd(n, t), nv1)


@pytest.mark.parametrize('n', [1, 4, 16])
def test_cpmg_decays_to_one_over_e_at_predicted_time(nv1, n):
    seq = sequences.cpmg(n, analytic.t_coh(nv1, n))
    assert analytic.predicted_coherence(seq, nv1) == pytest.approx(math.exp(-1), abs=0.03)


def test_scaling_enhancement_factor(nv1):
    ratio = analytic.t_coh(nv1, 136) / analytic.t2_from_bath(nv1)
    assert ratio == pytest.approx(26.45, abs=0.01)


def test_scaling_amplitude(nv1):
    assert analytic.scaling_amplitude(nv1) == pytest.approx(2 / 3 * 3.6 ** 2 * 25.0 ** 2)
    with pytest.raises(ValueError):
        analytic.scaling_decay(nv1, 0, 1.0)


@pytest.mark.parametrize('kind', ['gaussian_fid', 'cubic_echo', 'scaling'])
def test_decay_laws_cross_one_over_e(nv1, kind):
    law = DecayLaw(kind, nv1, n=8)
    assert float(law(law.one_over_e_time)) == pytest.approx(math.exp(-1))
    assert law(np.array([0.0, 1.0])).shape == (2,)


def test_decay_law_rejects_zero_pulses(nv1):
    with pytest.raises(ValueError):
        DecayLaw('scaling', nv1, n=0)


def test_echo_decay_crosses_one_over_e_at_t2(nv1):
    t2 = analytic.t2_from_bath(nv1)
    assert float(analytic.echo_decay(nv1, t2)) == pytest.approx(math.exp(-1))
    np.testing.assert_allclose(analytic.echo_decay(nv1, [0.0]), [1.0])


@pytest.mark.parametrize('factory', [sequences.ramsey, sequences.spin_echo, lambda t: sequences.cpmg(8, t), lambda t: sequences.udd(5, t)])
def test_decoherence_exponent_grows_with_time(nv1, factory):
    chi = [analytic.chi_gaussian(factory(t), nv1) for t in np.linspace(0.05, 60.0, 120)]
    assert np.all(np.diff(chi) >= -1e-12)


@pytest.mark.parametrize('center', ['nv1', 'nv2'])
@pytest.mark.parametrize('n', [1, 2, 8, 64])
def test_pulses_never_hurt_within_correlation_time(center, n, request):
    p = request.getfixturevalue(center)
    for t in np.linspace(0.1, p.tau_c, 25):
        assert analytic.chi_gaussian(sequences.cpmg(n, t), p) <= analytic.chi_gaussian(sequences.ramsey(t), p) + 1e-12
