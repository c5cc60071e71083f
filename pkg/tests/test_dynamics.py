import math
import random

import pytest

from dynapsim.dynamics import (
    DEFAULT_SYNAPSES,
    NeuronParams,
    NeuronState,
    SynParams,
    SynapseState,
    apply_pulse,
    dpi_step,
    lif_isi_ms,
    neuron_step,
    validate_pulse_width,
)
from dynapsim.errors import ConfigError, NumericalFault
from dynapsim.packets import SynType


def make_syn(tau=20.0, weight=1.0, width=0.5):
    return SynapseState(SynParams(tau_ms=tau, weight=weight, pulse_width_ms=width))


class TestDpi:
    def test_decay_one_tau(self):
        s = make_syn(tau=20.0)
        s.current = 1.0
        dpi_step(s, 20.0)
        assert s.current == pytest.approx(math.exp(-1.0), rel=1e-12)

    def test_rise_one_tau(self):
        s = make_syn(tau=20.0)
        s.drive = 1.0
        dpi_step(s, 20.0)
        assert s.current == pytest.approx(1.0 - math.exp(-1.0), rel=1e-12)

    def test_dt_invariance(self):
        # exact integrator: halving dt leaves the trajectory unchanged
        a = make_syn(tau=7.3, weight=2.0)
        b = make_syn(tau=7.3, weight=2.0)
        apply_pulse(a, 0.0)
        apply_pulse(b, 0.0)
        for _ in range(100):
            dpi_step(a, 0.2)
        for _ in range(200):
            dpi_step(b, 0.1)
        assert a.current == pytest.approx(b.current, abs=1e-12)

    def test_pulse_returns_to_rest(self):
        s = make_syn(tau=5.0, width=1.0)
        apply_pulse(s, 0.0)
        assert s.advance(200.0) == pytest.approx(0.0, abs=1e-12)
        assert s.drive == 0.0

    def test_superposition(self):
        # linear filter: response to summed trains equals summed responses
        rng = random.Random(42)
        times_a = sorted(rng.uniform(0, 50) for _ in range(40))
        times_b = sorted(rng.uniform(0, 50) for _ in range(25))
        sa, sb, sab = make_syn(), make_syn(), make_syn()
        for t in times_a:
            apply_pulse(sa, t)
        for t in times_b:
            apply_pulse(sb, t)
        for t in sorted(times_a + times_b):  # pulses arrive in time order
            apply_pulse(sab, t)
        for t in (55.0, 60.0, 80.0):
            total = sa.advance(t) + sb.advance(t)
            assert sab.advance(t) == pytest.approx(total, rel=1e-9)

    def test_steady_pulse_train_dc_gain(self):
        # mean current of the filter equals weight * rate * width
        rate_per_ms, width, weight = 0.2, 0.5, 3.0
        s = make_syn(tau=20.0, weight=weight, width=width)
        period = 1.0 / rate_per_ms
        n_pulses = 400
        burn_in = 300
        samples = []
        for k in range(n_pulses):
            apply_pulse(s, k * period)
            if k >= burn_in:  # steady-state tail, sampled over whole periods
                t = k * period
                while t < (k + 1) * period:
                    samples.append(s.advance(t))
                    t += 0.01
        mean = sum(samples) / len(samples)
        assert mean == pytest.approx(weight * rate_per_ms * width, rel=0.01)

    def test_pulse_width_validation(self):
        validate_pulse_width(0.0005)  # fractions of a microsecond
        validate_pulse_width(50.0)    # tens of ms
        with pytest.raises(ConfigError):
            validate_pulse_width(1e-6)
        with pytest.raises(ConfigError):
            validate_pulse_width(1e4)

    def test_bad_dt(self):
        with pytest.raises(ConfigError):
            dpi_step(make_syn(), 0.0)

    def test_bad_tau(self):
        with pytest.raises(ConfigError):
            SynParams(tau_ms=0.0, weight=1.0, pulse_width_ms=1.0)

    def test_default_synapse_table_is_complete(self):
        assert set(DEFAULT_SYNAPSES) == set(SynType)


class TestNeuron:
    def test_rest_is_fixed_point(self):
        p = NeuronParams(lif_limit=True)
        n = NeuronState(p)
        for _ in range(1000):
            n, spiked = neuron_step(n, 0.0, 0.0, 0.0, 0.0, 0.1)
            assert not spiked
        assert n.v_mv == pytest.approx(p.e_l_mv)
        assert n.w_adapt == pytest.approx(0.0)

    def test_lif_isi_matches_closed_form(self):
        p = NeuronParams(lif_limit=True, a_ns=0.0, b_pa=0.0,
                         v_cut_mv=-50.0, t_ref_ms=2.0)
        i_dc = 400.0  # pA; I_th = 10 nS * 20 mV = 200 pA
        expected = lif_isi_ms(p, i_dc)
        assert expected == pytest.approx(2.0 + 20.0 * math.log(2.0))
        n = NeuronState(p)
        dt = 0.02
        spikes = []
        for k in range(int(200.0 / dt)):
            n, spiked = neuron_step(n, i_dc, 0.0, 0.0, 0.0, dt)
            if spiked:
                spikes.append(n.t_ms)
        isis = [b - a for a, b in zip(spikes, spikes[1:])]
        assert isis
        mean_isi = sum(isis) / len(isis)
        assert mean_isi == pytest.approx(expected, rel=0.01)

    def test_subthreshold_never_spikes(self):
        p = NeuronParams(lif_limit=True, v_cut_mv=-50.0)
        n = NeuronState(p)
        for _ in range(5000):
            n, spiked = neuron_step(n, 150.0, 0.0, 0.0, 0.0, 0.1)  # < I_th
            assert not spiked

    def test_fi_curve_monotone(self):
        rates = []
        for i_dc in [200 + 65 * k for k in range(20)]:
            p = NeuronParams()  # full AdEx with exponential term
            n = NeuronState(p)
            count = 0
            for _ in range(5000):  # 500 ms at 0.1 ms
                n, spiked = neuron_step(n, float(i_dc), 0.0, 0.0, 0.0, 0.1)
                count += spiked
            rates.append(count)
        assert all(b >= a for a, b in zip(rates, rates[1:]))
        assert rates[-1] > rates[0]

    def test_refractory_spacing(self):
        p = NeuronParams(t_ref_ms=2.0)
        n = NeuronState(p)
        spikes = []
        for _ in range(20000):
            n, spiked = neuron_step(n, 3000.0, 0.0, 0.0, 0.0, 0.1)
            if spiked:
                spikes.append(n.t_ms)
        assert len(spikes) > 100
        assert all(b - a >= p.t_ref_ms for a, b in zip(spikes, spikes[1:]))

    def test_subtractive_shifts_shunt_divides(self):
        # same drive: subtractive current lowers rate; shunt never raises it
        def rate(i_sub, g_shunt):
            n = NeuronState(NeuronParams())
            count = 0
            for _ in range(5000):
                n, spiked = neuron_step(n, 800.0, 0.0, i_sub, g_shunt, 0.1)
                count += spiked
            return count

        base = rate(0.0, 0.0)
        assert rate(300.0, 0.0) < base
        shunted = [rate(0.0, g) for g in (0.0, 5.0, 10.0, 20.0)]
        assert all(b <= a for a, b in zip(shunted, shunted[1:]))

    def test_adaptation_slows_firing(self):
        def count(b_pa):
            n = NeuronState(NeuronParams(a_ns=0.0, b_pa=b_pa, tau_w_ms=150.0))
            c = 0
            for _ in range(5000):
                n, s = neuron_step(n, 700.0, 0.0, 0.0, 0.0, 0.1)
                c += s
            return c

        assert count(100.0) < count(0.0)

    def test_non_finite_input_faults(self):
        n = NeuronState(NeuronParams())
        with pytest.raises(NumericalFault):
            neuron_step(n, float("nan"), 0.0, 0.0, 0.0, 0.1)

    def test_bad_dt(self):
        with pytest.raises(ConfigError):
            neuron_step(NeuronState(NeuronParams()), 0, 0, 0, 0, -0.1)
