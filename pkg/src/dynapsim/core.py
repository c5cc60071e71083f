"""Per-core compute model: CAM tag matching and vectorized node dynamics.

A core holds ``n_neurons`` nodes, each with 64 CAM subscriber slots and
one accumulator per synapse type. Broadcast handling is a content match
across the whole core followed by pulse injection into the matched
accumulators. The dynamics math is identical to the scalar reference in
:mod:`dynapsim.dynamics`; state is kept in numpy arrays so a core ticks
in a handful of vector operations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import (
    EXP_ARG_CLAMP,
    NeuronParams,
    SynParams,
    DEFAULT_SYNAPSES,
    spike_current,
)
from .errors import NumericalFault, RangeError
from .packets import CAM_SLOTS_PER_NEURON, CamEntry, SynType, TAG_MAX

EMPTY = -1  # unprogrammed CAM slot


@dataclass(frozen=True)
class CamMatch:
    neuron: int
    slot: int
    syn_type: SynType


class CoreMemory:
    """The CAM image of one core: per-neuron tag/type slots."""

    def __init__(self, n_neurons: int = 256,
                 n_slots: int = CAM_SLOTS_PER_NEURON):
        self.n_neurons = n_neurons
        self.n_slots = n_slots
        self.tags = np.full((n_neurons, n_slots), EMPTY, dtype=np.int16)
        self.syn = np.zeros((n_neurons, n_slots), dtype=np.int8)
        self._match_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def write(self, neuron: int, slot: int, entry: CamEntry) -> None:
        self.tags[neuron, slot] = entry.tag
        self.syn[neuron, slot] = int(entry.syn_type)
        self._match_cache.clear()

    def clear(self, neuron: int, slot: int) -> None:
        self.tags[neuron, slot] = EMPTY
        self._match_cache.clear()

    def entry_count(self, neuron: int) -> int:
        return int(np.count_nonzero(self.tags[neuron] != EMPTY))

    def free_slot(self, neuron: int) -> int | None:
        empty = np.nonzero(self.tags[neuron] == EMPTY)[0]
        return int(empty[0]) if empty.size else None

    def match_arrays(self, tag: int) -> tuple[np.ndarray, np.ndarray]:
        """(neuron, slot) index arrays of every slot storing ``tag``."""
        if not 0 <= tag <= TAG_MAX:
            raise RangeError(f"tag {tag} outside 10-bit range")
        cached = self._match_cache.get(tag)
        if cached is None:
            cached = np.nonzero(self.tags == tag)
            self._match_cache[tag] = cached
        return cached


def cam_match(core: CoreMemory, tag: int) -> list[CamMatch]:
    """Every valid slot whose stored tag equals the broadcast tag.

    All slots are compared simultaneously; results come out in
    (neuron, slot) order, the same order a linear scan would produce.
    """
    neurons, slots = core.match_arrays(tag)
    return [CamMatch(int(n), int(s), SynType(int(core.syn[n, s])))
            for n, s in zip(neurons, slots)]


class CoreState:
    """Vectorized dynamic state of one core's nodes.

    Synaptic accumulators advance exactly between drive edges (the drive
    is piecewise constant). The membrane is stepped on the global
    integration clock over the trailing interval, with synaptic inputs
    frozen at the interval start, mirroring
    :func:`dynapsim.dynamics.neuron_step`.
    """

    def __init__(self, n_neurons: int, neuron: NeuronParams,
                 synapses: dict[SynType, SynParams] | None = None,
                 weight_gain: np.ndarray | None = None):
        self.n = n_neurons
        self.neuron = neuron
        self.synapses = dict(synapses or DEFAULT_SYNAPSES)
        self.tau_ms = np.array([self.synapses[SynType(k)].tau_ms
                                for k in range(4)])
        self.weights = np.array([self.synapses[SynType(k)].weight
                                 for k in range(4)])
        self.pulse_width_ms = np.array(
            [self.synapses[SynType(k)].pulse_width_ms for k in range(4)])
        # per-neuron multiplicative mismatch on pulse heights (1.0 = ideal)
        self.gain = (np.ones(n_neurons) if weight_gain is None
                     else np.asarray(weight_gain, dtype=float))

        self.v = np.full(n_neurons, neuron.e_l_mv)
        self.w_adapt = np.zeros(n_neurons)
        self.refractory_until = np.full(n_neurons, -np.inf)
        self.i_dc = np.zeros(n_neurons)
        self.i_syn = np.zeros((4, n_neurons))   # accumulator outputs
        self.drive = np.zeros((4, n_neurons))   # piecewise-constant inputs
        self.i_snap = np.zeros((4, n_neurons))  # inputs seen by the membrane
        self.t_ms = 0.0
        self.v_rest = self._resting_potential()
        self.w_rest = neuron.a_ns * (self.v_rest - neuron.e_l_mv)

    def _resting_potential(self) -> float:
        """Zero-input fixed point; sits above E_L by i_exp(v)/g_L."""
        p = self.neuron
        v = p.e_l_mv
        for _ in range(60):
            v = p.e_l_mv + spike_current(p, v) / p.g_l_ns
        return v if np.isfinite(v) and v < p.v_cut_mv else p.e_l_mv

    # -- synaptic accumulators ------------------------------------------

    def advance_currents(self, t_ms: float) -> None:
        dt = t_ms - self.t_ms
        if dt < 0:
            raise NumericalFault(f"core time moved backwards by {-dt} ms")
        if dt > 0:
            fac = np.exp(-dt / self.tau_ms)[:, None]
            self.i_syn = self.drive + (self.i_syn - self.drive) * fac
            self.t_ms = t_ms

    def apply_edges(self, t_ms: float, neurons: np.ndarray,
                    syn_types: np.ndarray, sign: int) -> None:
        """Raise (+1) or drop (-1) pulse drives at ``t_ms``; superposing."""
        self.advance_currents(t_ms)
        amounts = sign * self.weights[syn_types] * self.gain[neurons]
        np.add.at(self.drive, (syn_types, neurons), amounts)

    # -- membrane integration -------------------------------------------

    def tick(self, t_end_ms: float, dt_ms: float) -> np.ndarray:
        """Integrate [t_end - dt, t_end]; returns indices of spiking nodes.

        Synaptic inputs are the values snapshotted at the previous tick,
        so edges landing inside the interval take effect one tick later.
        """
        p = self.neuron
        t_start = t_end_ms - dt_ms

        dt_active = np.clip(t_end_ms - np.maximum(t_start, self.refractory_until),
                            0.0, dt_ms)
        g_shunt = self.i_snap[SynType.SHUNT_INH]
        g_tot = p.g_l_ns + g_shunt
        if p.lif_limit:
            i_exp = 0.0
        else:
            arg = np.minimum((self.v - p.v_t_mv) / p.delta_t_mv, EXP_ARG_CLAMP)
            i_exp = p.g_l_ns * p.delta_t_mv * np.exp(arg)
        i_tot = (i_exp + self.i_snap[SynType.FAST_EXC]
                 + self.i_snap[SynType.SLOW_EXC]
                 - self.i_snap[SynType.SUB_INH]
                 + self.i_dc - self.w_adapt)
        v_inf = p.e_l_mv + i_tot / g_tot
        fac = np.exp(-dt_active * g_tot / p.c_mem_pf)
        v_pre = self.v
        self.v = np.where(dt_active > 0.0, v_inf + (self.v - v_inf) * fac, self.v)

        w_inf = p.a_ns * (v_pre - p.e_l_mv)
        fac_w = np.exp(-dt_ms / p.tau_w_ms)
        self.w_adapt = w_inf + (self.w_adapt - w_inf) * fac_w

        if not (np.isfinite(self.v).all() and np.isfinite(self.w_adapt).all()):
            raise NumericalFault(f"non-finite core state at t={t_end_ms} ms")

        spiked = np.nonzero(self.v >= p.v_cut_mv)[0]
        if spiked.size:
            self.v[spiked] = p.v_reset_mv
            self.w_adapt[spiked] += p.b_pa
            self.refractory_until[spiked] = t_end_ms + p.t_ref_ms

        self.advance_currents(t_end_ms)
        self.i_snap = self.i_syn.copy()
        return spiked
