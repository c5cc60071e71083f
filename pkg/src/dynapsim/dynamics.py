"""Scalar reference dynamics: DPI synapse filters and the AdEx neuron.

These are the single-neuron contracts; the per-core vectorized model in
:mod:`dynapsim.core` reproduces them bit-for-bit (see the equivalence
tests). Units: mV, ms, pF, nS, pA. The shunting accumulator is read as a
conductance in nS; all other accumulators as currents in pA.

The synapse filter is a first-order low-pass

    tau * dI/dt = -I + u(t)

driven by rectangular pulses: each accepted event raises u by the type's
weight for the type's pulse width. Integration is exact per interval of
constant u (I -> u + (I - u) * exp(-dt/tau)), so trajectories do not
depend on the step size.

The neuron integrates AdEx dynamics

    C dV/dt = -gL (V-EL) + gL dT exp((V-VT)/dT) - w + I_exc - I_sub
              - g_shunt (V-EL)
    tau_w dw/dt = a (V-EL) - w

by exponential Euler: the conductance part is solved exactly over the
step with the remaining terms frozen at the step start. In the leaky
integrate-and-fire limit (``lif_limit=True``, a=b=0) the update is exact
for constant input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import ConfigError, NumericalFault
from .packets import SynType

EXP_ARG_CLAMP = 16.0  # keeps the spike-initiation term finite past V_cut


@dataclass(frozen=True)
class SynParams:
    """Core-global parameters of one synapse type (shared biases)."""

    tau_ms: float
    weight: float          # pulse height: pA for currents, nS for shunt
    pulse_width_ms: float  # T_pulse

    def __post_init__(self):
        if self.tau_ms <= 0:
            raise ConfigError(f"synapse tau must be positive, got {self.tau_ms}")
        if self.pulse_width_ms <= 0:
            raise ConfigError(
                f"pulse width must be positive, got {self.pulse_width_ms}")


# Defaults: fast/slow excitatory 5/100 ms, inhibitory 10 ms. Pulse widths
# sit in the tunable range of fractions of a microsecond to tens of ms.
DEFAULT_SYNAPSES: dict[SynType, SynParams] = {
    SynType.FAST_EXC: SynParams(tau_ms=5.0, weight=60.0, pulse_width_ms=1.0),
    SynType.SLOW_EXC: SynParams(tau_ms=100.0, weight=60.0, pulse_width_ms=1.0),
    SynType.SUB_INH: SynParams(tau_ms=10.0, weight=60.0, pulse_width_ms=1.0),
    SynType.SHUNT_INH: SynParams(tau_ms=10.0, weight=1.0, pulse_width_ms=1.0),
}

PULSE_WIDTH_MIN_MS = 1e-4   # fractions of a microsecond
PULSE_WIDTH_MAX_MS = 100.0  # tens of milliseconds


def validate_pulse_width(width_ms: float) -> float:
    if not PULSE_WIDTH_MIN_MS <= width_ms <= PULSE_WIDTH_MAX_MS:
        raise ConfigError(
            f"pulse width {width_ms} ms outside supported range "
            f"[{PULSE_WIDTH_MIN_MS}, {PULSE_WIDTH_MAX_MS}] ms")
    return width_ms


@dataclass
class SynapseState:
    """One DPI accumulator: exact value at ``t_ms`` plus pending pulse ends."""

    params: SynParams
    current: float = 0.0
    drive: float = 0.0
    t_ms: float = 0.0
    pending_off: list[float] = field(default_factory=list)

    def _decay_to(self, t_ms: float) -> None:
        dt = t_ms - self.t_ms
        if dt < 0:
            raise NumericalFault(f"synapse time moved backwards by {-dt} ms")
        if dt > 0:
            fac = math.exp(-dt / self.params.tau_ms)
            self.current = self.drive + (self.current - self.drive) * fac
            self.t_ms = t_ms

    def advance(self, t_ms: float) -> float:
        """Advance exactly to ``t_ms``, consuming pulse ends on the way."""
        while self.pending_off and self.pending_off[0] <= t_ms:
            edge = self.pending_off.pop(0)
            self._decay_to(edge)
            self.drive -= self.params.weight
        self._decay_to(t_ms)
        return self.current


def apply_pulse(state: SynapseState, t_ms: float) -> SynapseState:
    """Inject one rectangular pulse at ``t_ms``; overlapping pulses superpose."""
    state.advance(t_ms)
    state.drive += state.params.weight
    off = t_ms + state.params.pulse_width_ms
    # keep ends sorted; insertion order breaks ties deterministically
    idx = len(state.pending_off)
    while idx > 0 and state.pending_off[idx - 1] > off:
        idx -= 1
    state.pending_off.insert(idx, off)
    return state


def dpi_step(state: SynapseState, dt_ms: float) -> float:
    """Advance the accumulator by ``dt_ms``; returns the updated current."""
    if dt_ms <= 0:
        raise ConfigError(f"dt must be positive, got {dt_ms}")
    return state.advance(state.t_ms + dt_ms)


@dataclass(frozen=True)
class NeuronParams:
    """AdEx parameters; defaults give tau_m = C/gL = 20 ms."""

    c_mem_pf: float = 200.0
    g_l_ns: float = 10.0
    e_l_mv: float = -70.0
    v_t_mv: float = -50.0
    delta_t_mv: float = 2.0
    a_ns: float = 0.0
    b_pa: float = 0.0
    tau_w_ms: float = 100.0
    v_reset_mv: float = -70.0
    v_cut_mv: float = -30.0
    t_ref_ms: float = 2.0
    lif_limit: bool = False  # drop the exponential term (delta_T -> 0)

    def __post_init__(self):
        if self.c_mem_pf <= 0 or self.g_l_ns <= 0 or self.tau_w_ms <= 0:
            raise ConfigError("c_mem, g_l and tau_w must be positive")
        if not self.lif_limit and self.delta_t_mv <= 0:
            raise ConfigError("delta_t must be positive unless lif_limit is set")

    @property
    def tau_m_ms(self) -> float:
        return self.c_mem_pf / self.g_l_ns


@dataclass
class NeuronState:
    params: NeuronParams
    v_mv: float = float("nan")
    w_adapt: float = 0.0
    t_ms: float = 0.0
    refractory_until_ms: float = -math.inf

    def __post_init__(self):
        if math.isnan(self.v_mv):
            self.v_mv = self.params.e_l_mv


def spike_current(params: NeuronParams, v_mv: float) -> float:
    """The exponential spike-initiation current, clamped to stay finite."""
    if params.lif_limit:
        return 0.0
    arg = min((v_mv - params.v_t_mv) / params.delta_t_mv, EXP_ARG_CLAMP)
    return params.g_l_ns * params.delta_t_mv * math.exp(arg)


def neuron_step(state: NeuronState, i_fast_pa: float, i_slow_pa: float,
                i_sub_pa: float, g_shunt_ns: float,
                dt_ms: float) -> tuple[NeuronState, bool]:
    """Integrate one step; returns the updated state and a spike flag.

    Inputs are frozen over the step. A neuron inside its refractory window
    stays clamped at the reset potential; if the window ends mid-step only
    the remaining fraction is integrated.
    """
    if dt_ms <= 0:
        raise ConfigError(f"dt must be positive, got {dt_ms}")
    p = state.params
    t_end = state.t_ms + dt_ms

    dt_active = min(dt_ms, max(0.0, t_end - max(state.t_ms, state.refractory_until_ms)))

    v = state.v_mv
    w_pre = state.w_adapt
    if dt_active > 0.0:
        g_tot = p.g_l_ns + g_shunt_ns
        i_tot = (spike_current(p, v) + i_fast_pa + i_slow_pa
                 - i_sub_pa - w_pre)
        v_inf = p.e_l_mv + i_tot / g_tot
        fac = math.exp(-dt_active * g_tot / p.c_mem_pf)
        v = v_inf + (v - v_inf) * fac

    w_inf = p.a_ns * (state.v_mv - p.e_l_mv)
    fac_w = math.exp(-dt_ms / p.tau_w_ms)
    w = w_inf + (w_pre - w_inf) * fac_w

    if not (math.isfinite(v) and math.isfinite(w)):
        raise NumericalFault(
            f"non-finite neuron state at t={t_end} ms: v={v}, w={w}")

    spiked = v >= p.v_cut_mv
    refractory_until = state.refractory_until_ms
    if spiked:
        v = p.v_reset_mv
        w += p.b_pa
        refractory_until = t_end + p.t_ref_ms

    return replace(state, v_mv=v, w_adapt=w, t_ms=t_end,
                   refractory_until_ms=refractory_until), spiked


def lif_isi_ms(params: NeuronParams, i_dc_pa: float) -> float:
    """Closed-form inter-spike interval of the leaky I&F limit.

    Charging from reset to cut under constant current I:
    t = tau_m * ln(I / (I - I_th)) with I_th = gL * (V_cut - E_L),
    plus the refractory period.
    """
    i_th = params.g_l_ns * (params.v_cut_mv - params.e_l_mv)
    if i_dc_pa <= i_th:
        return math.inf
    return params.t_ref_ms + params.tau_m_ms * math.log(i_dc_pa / (i_dc_pa - i_th))
