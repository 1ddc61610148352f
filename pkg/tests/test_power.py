import math

import numpy as np
import pytest

from metric_estimands import power
from metric_estimands.curves import ExponentialDecay, StepConstant, Zero
from metric_estimands.estimands import tau_cumulative
from metric_estimands.exceptions import (
    DegenerateVarianceError,
    DomainError,
    InsufficientDataError,
    UndefinedConditionalError,
)
from metric_estimands.exposure import Exponential, TwoPoint
from metric_estimands.models import Sidedness, StrategyKind, ZConvention
from metric_estimands.power import AnalyticScenario, LinearGrowth

C = 0.05
SIGMA2 = 2.0


@pytest.fixture
def two_batches():
    """1,000 users, half exposed on day 0 and half on day 7, constant effect for a week"""
    return AnalyticScenario(
        curve=StepConstant(c=C, t_end=7),
        dist=TwoPoint(times=[0.0, 7.0], probs=[0.5, 0.5]),
        variance=LinearGrowth(sigma2=SIGMA2),
        n1=500,
        n0=500,
        z_convention=ZConvention.VARIANCE,
    )


@pytest.fixture
def fast_decay():
    return AnalyticScenario(
        curve=ExponentialDecay(a=1.0, b=1.0),
        dist=Exponential(rate=0.4),
        variance=LinearGrowth(sigma2=1.0),
        n1=350,
        n0=350,
    )


@pytest.mark.unit
class TestTwoBatchClosedForm:
    """Test the piecewise E(Z_t) of the two-batch example"""

    def test_constant_before_second_batch(self):
        """E(Z_t) = 125 c / sigma^2 = 3.125 on [0, 7)"""
        for t in (0.0, 3.0, 6.9):
            assert power.example2_expected_z(C, SIGMA2, t) == pytest.approx(3.125, abs=1e-12)

    def test_reference_values(self):
        """Values at the start, end and last week of the middle branch"""
        assert power.example2_expected_z(C, SIGMA2, 7.0) == pytest.approx(6.2228, abs=1e-4)
        assert power.example2_expected_z(C, SIGMA2, 14.0) == pytest.approx(4.1667, abs=1e-4)
        assert power.example2_expected_z(C, SIGMA2, 21.0) == pytest.approx(2.5, abs=1e-12)

    def test_non_increasing_after_day_seven(self):
        """E(Z_t) only falls once the second batch arrives"""
        grid = np.round(np.arange(7.0, 21.05, 0.1), 10)
        values = [power.example2_expected_z(C, SIGMA2, t) for t in grid]
        assert all(later <= earlier + 1e-12 for earlier, later in zip(values, values[1:]))

    def test_branches_meet_at_day_fourteen(self):
        """Middle and last branches agree at t = 14"""
        middle = 125 * 14 * C / (SIGMA2 * (14 - 3.5))
        assert power.example2_expected_z(C, SIGMA2, 14.0) == pytest.approx(middle, abs=1e-9)
        assert power.example2_expected_z(C, SIGMA2, 13.999999) == pytest.approx(middle, abs=1e-5)

    def test_invalid_arguments(self):
        """sigma^2 must be positive and t non-negative"""
        with pytest.raises(DomainError):
            power.example2_expected_z(C, 0.0, 3.0)
        with pytest.raises(DomainError):
            power.example2_expected_z(C, SIGMA2, -1.0)


@pytest.mark.unit
class TestExpectedZ:
    """Test E(Z_t) from quadrature"""

    def test_reproduces_closed_form(self, two_batches):
        """Generic E(Z_t) equals the closed form on a fine grid"""
        for t in np.round(np.arange(0.1, 21.05, 0.1), 10):
            generic = power.expected_z(two_batches, float(t))
            assert generic == pytest.approx(power.example2_expected_z(C, SIGMA2, float(t)), rel=1e-9)

    def test_variance_closed_form(self, two_batches):
        """Mixture variance matches the piecewise closed form"""
        for t in (3.0, 7.0, 8.0, 10.0, 13.0, 15.0, 20.0):
            assert power.mixture_variance(two_batches, t) == pytest.approx(
                power.example2_variance(C, SIGMA2, t), rel=1e-9
            )

    def test_exposed_counts(self, two_batches):
        """Counts follow n F(t) rounded"""
        assert power.exposed_counts(two_batches, 3.0) == (250, 250)
        assert power.exposed_counts(two_batches, 7.0) == (500, 500)

    def test_zero_variance_at_exposure(self, two_batches):
        """At t = 0 nobody has accumulated variance yet"""
        with pytest.raises(DegenerateVarianceError):
            power.expected_z(two_batches, 0.0)

    def test_explicit_counts(self, two_batches):
        """Realised counts replace the default schedule"""
        default = power.expected_z(two_batches, 10.0)
        halved = power.expected_z(two_batches, 10.0, counts=(250, 250))
        assert halved == pytest.approx(default / 2, rel=1e-12)

    def test_standard_deviation_convention(self, fast_decay):
        """Dividing by the standard deviation gives tau / sqrt(V)"""
        t = 10.0
        n1, n0 = power.exposed_counts(fast_decay, t)
        variance = power.estimator_variance(fast_decay, t, n1, n0)
        expected = tau_cumulative(fast_decay.curve, fast_decay.dist, t) / math.sqrt(variance)
        assert power.expected_z(fast_decay, t) == pytest.approx(expected, rel=1e-12)


@pytest.mark.unit
class TestMixtureVariance:
    """Test measurement variances by strategy"""

    def test_no_effect_is_pure_noise(self):
        """With no effect the variance is sigma^2 (t - E(E | E <= t))"""
        rate, t = 0.4, 10.0
        scenario = AnalyticScenario(
            curve=Zero(), dist=Exponential(rate=rate), variance=LinearGrowth(sigma2=1.5), n1=10, n0=10
        )
        mean_e = 1 / rate - t / math.expm1(rate * t)
        assert power.mixture_variance(scenario, t) == pytest.approx(1.5 * (t - mean_e), rel=1e-10)

    def test_windowed_variance(self, fast_decay):
        """Every windowed measurement spans nu days"""
        value = power.strategy_mixture_variance(fast_decay, StrategyKind.WINDOWED, 14.0, 7.0)
        assert value == pytest.approx(7.0)

    def test_windowed_needs_completed_windows(self, fast_decay):
        """No user has finished a window by t = nu"""
        with pytest.raises(UndefinedConditionalError):
            power.strategy_mixture_variance(fast_decay, StrategyKind.WINDOWED, 7.0, 7.0)

    def test_capped_equals_cumulative_early(self, fast_decay):
        """Before anyone reaches the cap, both strategies measure the same thing"""
        for t in (2.0, 5.0, 7.0):
            capped = power.strategy_mixture_variance(
                fast_decay, StrategyKind.CUMULATIVE_WINDOWED, t, 7.0
            )
            assert capped == pytest.approx(power.mixture_variance(fast_decay, t), rel=1e-7)

    def test_empty_group(self, fast_decay):
        """Variance of a mean needs users in both groups"""
        with pytest.raises(InsufficientDataError) as excinfo:
            power.estimator_variance(fast_decay, 5.0, 0, 10)
        assert excinfo.value.group == 1


@pytest.mark.unit
class TestDecomposition:
    """Test the three-term split of the change in tau_C / sqrt(V)"""

    @pytest.mark.parametrize("pair", [(3.0, 5.0), (6.0, 8.0), (7.0, 14.0), (8.0, 12.0), (10.0, 20.0)])
    def test_identity_two_batches(self, two_batches, pair):
        """Terms sum to the direct difference"""
        terms = power.theorem2_decomposition(two_batches, *pair)
        assert terms.total == pytest.approx(terms.direct, abs=1e-8)
        assert abs(terms.gap) < 1e-8

    @pytest.mark.parametrize("pair", [(1.0, 2.0), (2.0, 5.0), (5.0, 7.0), (7.0, 14.0), (14.0, 21.0)])
    def test_identity_exponential(self, fast_decay, pair):
        """Terms sum to the direct difference for a continuous exposure law"""
        terms = power.theorem2_decomposition(fast_decay, *pair)
        assert terms.total == pytest.approx(terms.direct, abs=1e-8)

    @pytest.mark.parametrize("pair", [(3.0, 5.0), (8.0, 12.0), (10.0, 20.0)])
    def test_no_new_users(self, two_batches, pair):
        """No exposure mass in (t, t'] gives exactly zero for the new-user term"""
        assert power.theorem2_decomposition(two_batches, *pair).term_new_users == 0.0

    def test_new_users_counted(self, two_batches):
        """The day-7 batch contributes when it falls inside (t, t']"""
        assert power.theorem2_decomposition(two_batches, 6.0, 8.0).term_new_users > 0

    def test_zero_curve(self):
        """No effect means every term is zero"""
        scenario = AnalyticScenario(
            curve=Zero(), dist=Exponential(rate=0.4), variance=LinearGrowth(sigma2=1.0), n1=350, n0=350
        )
        terms = power.theorem2_decomposition(scenario, 7.0, 14.0)
        assert terms.term_variance_reweight == 0.0
        assert terms.term_new_time_old_users == 0.0
        assert terms.term_new_users == 0.0
        assert terms.direct == 0.0

    def test_times_must_increase(self, two_batches):
        """Requires 0 < t < t'"""
        with pytest.raises(DomainError):
            power.theorem2_decomposition(two_batches, 8.0, 8.0)


@pytest.mark.unit
class TestPowerFunctions:
    """Test critical values and power"""

    def test_critical_values(self):
        """Standard normal quantiles"""
        assert power.critical_value(0.05, Sidedness.ONE) == pytest.approx(1.6448536, abs=1e-6)
        assert power.critical_value(0.10, Sidedness.TWO) == pytest.approx(1.6448536, abs=1e-6)
        assert power.critical_value(0.05, Sidedness.TWO) == pytest.approx(1.9599640, abs=1e-6)
        with pytest.raises(DomainError):
            power.critical_value(1.5)

    def test_one_sided_power(self):
        """Power is one half at z = c and increases strictly"""
        assert power.power_one_sided(1.96, 1.96) == pytest.approx(0.5)
        values = [power.power_one_sided(z, 1.96) for z in np.linspace(-3, 6, 50)]
        assert all(later > earlier for earlier, later in zip(values, values[1:]))

    def test_two_sided_size(self):
        """Two-sided power under the null is alpha"""
        critical = power.critical_value(0.10, Sidedness.TWO)
        assert power.power_two_sided(0.0, critical) == pytest.approx(0.10, abs=1e-9)
