import math

import numpy as np
import pytest

from rcbound.channel import validate_channel, validate_input_distribution
from rcbound.errors import DegenerateChannelError, OptimizerDidNotConvergeError, RateOutOfOpenIntervalError
from rcbound.exponents import (
    OptimizerConfig,
    blahut_arimoto,
    capacity,
    channel_critical_rate,
    channel_rates,
    critical_rate,
    eo,
    eo_rho_derivative,
    eo_rho_second_derivative,
    er,
    er_q,
    esp,
    esp_q,
    is_degenerate,
    maximize_eo,
    mutual_information,
    rho_star,
    subdifferential_report,
)
from rcbound.utils.parsing.channel import PresetParser
from tests._channels import bec, bsc, random_channel, random_input, typewriter, uniform

LOG2 = math.log(2.0)


def _binary_entropy(p: float) -> float:
    return -p * math.log(p) - (1 - p) * math.log(1 - p)


def _bsc_eo(rho: float, p: float) -> float:
    s = 1 / (1 + rho)
    return rho * LOG2 - (1 + rho) * math.log(p**s + (1 - p) ** s)


def _bec_eo(rho: float, eps: float) -> float:
    return -math.log(eps + (1 - eps) * 2.0**-rho)


@pytest.mark.parametrize("rho", [0.0, 0.25, 0.5, 1.0, 3.0])
def test_eo_closed_forms(rho: float) -> None:
    assert eo(rho, uniform(bsc(0.1)), bsc(0.1)) == pytest.approx(_bsc_eo(rho, 0.1), abs=1e-14)
    assert eo(rho, uniform(bec(0.5)), bec(0.5)) == pytest.approx(_bec_eo(rho, 0.5), abs=1e-14)


def test_eo_rejects_negative_rho() -> None:
    with pytest.raises(ValueError):
        eo(-0.5, uniform(bsc(0.1)), bsc(0.1))


def test_eo_derivative_matches_finite_differences() -> None:
    rng = np.random.default_rng(3)
    for _ in range(100):
        channel = random_channel(rng, int(rng.integers(2, 6)), int(rng.integers(2, 6)))
        q = random_input(rng, channel)
        rho = float(rng.uniform(0.05, 1.0))
        h = 1e-5
        numeric = (eo(rho + h, q, channel) - eo(rho - h, q, channel)) / (2 * h)
        assert eo_rho_derivative(rho, q, channel) == pytest.approx(numeric, abs=1e-7)


def test_eo_derivative_endpoints() -> None:
    channel = bec(0.5)
    q = uniform(channel)
    assert eo_rho_derivative(0.0, q, channel) == pytest.approx(0.5 * LOG2)
    assert mutual_information(q, channel) == pytest.approx(0.5 * LOG2)
    assert critical_rate(q, channel) == pytest.approx(LOG2 / 3, abs=1e-12)
    assert critical_rate(q, channel) == pytest.approx(0.2310, abs=1e-4)
    assert eo_rho_second_derivative(0.5, q, channel) < 0


def test_bec_rho_star_closed_form() -> None:
    channel, eps, rate = bec(0.5), 0.5, 0.3
    t = rate * eps / (LOG2 - rate)
    expected = -math.log2(t / (1 - eps))
    rho = rho_star(rate, uniform(channel), channel)
    assert rho == pytest.approx(expected, abs=1e-10)
    assert eo_rho_derivative(rho, uniform(channel), channel) == pytest.approx(rate, abs=1e-11)


def test_rho_star_errors() -> None:
    channel = bsc(0.1)
    with pytest.raises(RateOutOfOpenIntervalError):
        rho_star(0.05, uniform(channel), channel)
    with pytest.raises(RateOutOfOpenIntervalError):
        rho_star(0.5, uniform(channel), channel)
    identity = PresetParser.parse("identity:2")
    assert is_degenerate(uniform(identity), identity)
    with pytest.raises(DegenerateChannelError):
        rho_star(0.3, uniform(identity), identity)


def test_noisy_typewriter_is_degenerate_under_uniform_input() -> None:
    channel = typewriter(3)
    # E_o(rho, uniform) = rho log 1.5
    assert eo(0.7, uniform(channel), channel) == pytest.approx(0.7 * math.log(1.5))
    assert is_degenerate(uniform(channel), channel)
    assert not is_degenerate(validate_input_distribution([0.5, 0.3, 0.2]), channel)


def test_er_q_branches() -> None:
    channel = bec(0.5)
    q = uniform(channel)
    below = er_q(0.15, q, channel)
    assert below.rho_star == 1.0
    assert below.e_r_q == pytest.approx(-0.15 + _bec_eo(1.0, 0.5))
    above = er_q(0.3, q, channel)
    assert 0 < above.rho_star < 1
    assert above.e_r_q == pytest.approx(-above.rho_star * 0.3 + _bec_eo(above.rho_star, 0.5))
    beyond = er_q(0.4, q, channel)
    assert beyond.e_r_q == 0.0
    assert beyond.rho_star == 0.0
    with pytest.raises(ValueError):
        er_q(-0.1, q, channel)


def test_capacity() -> None:
    assert capacity(bsc(0.1)) == pytest.approx(LOG2 - _binary_entropy(0.1), abs=1e-9)
    assert capacity(bec(0.5)) == pytest.approx(0.3466, abs=1e-4)
    value, q = blahut_arimoto(bsc(0.1))
    np.testing.assert_allclose(q.q, [0.5, 0.5], atol=1e-6)
    assert value == pytest.approx(mutual_information(q, bsc(0.1)))


def test_maximize_eo_on_symmetric_channel() -> None:
    channel = bsc(0.1)
    best, maximizers = maximize_eo(0.5, channel)
    assert best == pytest.approx(_bsc_eo(0.5, 0.1), abs=1e-10)
    assert len(maximizers) == 1
    np.testing.assert_allclose(maximizers[0].q, [0.5, 0.5], atol=1e-5)


def test_maximize_eo_on_asymmetric_channel() -> None:
    z = validate_channel([[1.0, 0.0], [0.3, 0.7]], name="z")
    best, maximizers = maximize_eo(1.0, z)
    grid = np.linspace(0.0, 1.0, 2001)
    brute = max(eo(1.0, validate_input_distribution([a, 1 - a]), z) for a in grid)
    assert best >= brute - 1e-9
    assert all(eo(1.0, q, z) >= best - 1e-9 for q in maximizers)


def test_er_on_erasure_channel() -> None:
    channel = bec(0.5)
    value, maximizers = er(0.3, channel)
    assert value == pytest.approx(er_q(0.3, uniform(channel), channel).e_r_q, abs=1e-9)
    assert any(np.allclose(q.q, [0.5, 0.5], atol=1e-5) for q in maximizers)
    zero, at_capacity = er(0.5, channel)
    assert zero == 0.0
    assert len(at_capacity) == 1


def test_sphere_packing_matches_random_coding_above_critical_rate() -> None:
    channel = bec(0.5)
    point = esp(0.3, channel)
    assert not point.infinite
    assert point.value == pytest.approx(er(0.3, channel)[0], abs=1e-8)
    assert esp_q(0.4, uniform(channel), channel).value == 0.0


def test_sphere_packing_is_finite_for_the_erasure_channel() -> None:
    point = esp(0.05, bec(0.5))
    assert not point.infinite
    assert math.isfinite(point.value)


def test_sphere_packing_is_infinite_below_r_infinity() -> None:
    config = OptimizerConfig(rho_max=4000.0)
    point = esp(0.01, typewriter(3), config)
    assert point.still_increasing
    assert point.infinite
    assert point.value > config.infinity_threshold


def test_channel_rates() -> None:
    channel = bec(0.5)
    rates = channel_rates(channel, uniform(channel))
    assert rates.capacity == pytest.approx(0.5 * LOG2, abs=1e-9)
    assert rates.r_cr_q == pytest.approx(LOG2 / 3, abs=1e-12)
    assert rates.i_q_w == pytest.approx(0.5 * LOG2)
    assert rates.r_infinity_is_estimate
    assert not rates.degenerate
    assert 0 <= rates.r_infinity_estimate <= rates.r_cr_q


def test_subdifferential_report_on_symmetric_channel() -> None:
    channel = bsc(0.1)
    rate = 0.32
    report = subdifferential_report(rate, channel)
    assert report.attained
    assert report.rho_bar_star_R == pytest.approx(report.rho_star_R)
    assert report.rho_star_R == pytest.approx(rho_star(rate, uniform(channel), channel), abs=1e-9)
    assert report.hull[0] <= report.hull[1]
    np.testing.assert_allclose(report.best_nonsingular.q, [0.5, 0.5], atol=1e-5)
    with pytest.raises(RateOutOfOpenIntervalError):
        subdifferential_report(0.4, channel)
    # below the critical rate of the channel, about 0.1308 nats
    with pytest.raises(RateOutOfOpenIntervalError):
        subdifferential_report(0.1, channel)


def test_subdifferential_report_on_singular_channel() -> None:
    channel = bec(0.5)
    report = subdifferential_report(0.3, channel)
    assert report.rho_bar_star_R is None
    assert report.best_nonsingular is None
    assert not report.attained
    assert all(verdict.is_singular for verdict in report.verdicts)


def test_optimizer_config_validation() -> None:
    with pytest.raises(ValueError):
        OptimizerConfig(n_starts=0)
    with pytest.raises(ValueError):
        OptimizerConfig(value_tol=0.0)
    with pytest.raises(ValueError):
        OptimizerConfig(stall_tol=1e-12)


def test_eo_is_concave_in_rho() -> None:
    rng = np.random.default_rng(17)
    grid = np.linspace(0.0, 64.0, 257)
    for _ in range(10):
        channel = random_channel(rng, int(rng.integers(2, 5)), int(rng.integers(2, 5)))
        q = random_input(rng, channel)
        values = np.array([eo(rho, q, channel) for rho in grid])
        assert np.diff(values, 2).max() <= 1e-9
    values = np.array([eo(rho, uniform(bec(0.5)), bec(0.5)) for rho in grid])
    assert np.diff(values, 2).max() <= 1e-9


def test_er_q_is_convex_and_non_increasing() -> None:
    rng = np.random.default_rng(19)
    cases = [(bsc(0.1), uniform(bsc(0.1))), (bec(0.5), uniform(bec(0.5)))]
    for _ in range(5):
        channel = random_channel(rng, 3, 3)
        cases.append((channel, random_input(rng, channel)))
    for channel, q in cases:
        rates = np.linspace(0.0, 1.1 * mutual_information(q, channel), 111)
        values = np.array([er_q(rate, q, channel).e_r_q for rate in rates])
        assert np.diff(values).max() <= 1e-12
        assert np.diff(values, 2).min() >= -1e-9


def test_channel_critical_rate() -> None:
    assert channel_critical_rate(bec(0.5)) == pytest.approx(LOG2 / 3, abs=1e-9)
    channel = bsc(0.1)
    assert channel_critical_rate(channel) == pytest.approx(critical_rate(uniform(channel), channel), abs=1e-9)


@pytest.mark.parametrize("rate", [0.15, 0.25, 0.3])
def test_er_on_erasure_channel_matches_uniform_input(rate: float) -> None:
    channel = bec(0.5)
    value, maximizers = er(rate, channel)
    assert value == pytest.approx(er_q(rate, uniform(channel), channel).e_r_q, abs=1e-9)
    assert any(np.allclose(q.q, [0.5, 0.5], atol=1e-5) for q in maximizers)


@pytest.mark.parametrize("seed", [5, 100, 101, 102, 103])
def test_er_on_random_positive_channels(seed: int) -> None:
    rng = np.random.default_rng(seed)
    channel = random_channel(rng, 3, 3)
    cap = capacity(channel)
    for fraction in (0.3, 0.6, 0.9):
        rate = fraction * cap
        value, maximizers = er(rate, channel)
        assert value > 0
        assert maximizers
        for q in maximizers:
            assert er_q(rate, q, channel).e_r_q >= value - 1e-9
        for _ in range(100):
            other = validate_input_distribution(rng.dirichlet(np.ones(channel.num_inputs)), channel)
            assert er_q(rate, other, channel).e_r_q <= value + 1e-9


def test_maximize_eo_reaches_the_simplex_boundary() -> None:
    # the third input is dominated, so the maximizer puts no mass on it
    channel = validate_channel([[0.9, 0.05, 0.05], [0.05, 0.9, 0.05], [0.4, 0.4, 0.2]])
    best, maximizers = maximize_eo(0.4, channel)
    assert len(maximizers) == 1
    assert maximizers[0].q[2] == 0.0
    grid = np.linspace(0.0, 1.0, 201)
    brute = max(eo(0.4, validate_input_distribution([a, b, max(0.0, 1 - a - b)]), channel) for a in grid for b in grid if a + b <= 1)
    assert best >= brute - 1e-12


def test_unconverged_optimizer_raises() -> None:
    z = validate_channel([[1.0, 0.0], [0.3, 0.7]], name="z")
    with pytest.raises(OptimizerDidNotConvergeError):
        maximize_eo(1.0, z, OptimizerConfig(max_iter=1, n_starts=4))
    best, _ = maximize_eo(1.0, z, OptimizerConfig(max_iter=1, n_starts=4, stall_tol=1.0))
    assert best <= maximize_eo(1.0, z)[0] + 1e-12
