"""Behavioral router models and the deterministic discrete-event engine.

Three router levels move address events:

* R1 (one per core) runs the SRAM fan-out loop for spikes of its own core
  and broadcasts incoming events into the core;
* R2 (one per chip) merges core streams and splits them toward sibling
  cores or the mesh;
* R3 (one per chip) is a dimension-order (XY) mesh router: X hops are
  exhausted before Y hops, decrementing by one per hop.

All routers are modeled as unbounded FIFOs with fixed per-stage
latencies. Hardware merge arbitration is non-deterministic; here every
event carries a unique sequence number and ties in timestamp are resolved
by it, so identical (config, seed, inputs) produce identical traces.

Energy bookkeeping is counter-based: the engine counts operations and the
total is always the exact dot product of those counters with the config's
per-operation energy table. Route energy is charged once per packet
delivered outside its source core plus once per mesh hop; a remote
delivery's broadcast cost is folded into that charge, while same-core
broadcasts (and external stimulus broadcasts) charge the broadcast entry.
"""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field, replace

import numpy as np

from .config import FabricConfig
from .core import CoreMemory, CoreState
from .errors import EncodingError, ParseError, RangeError, SimulationError
from .packets import (
    MemoryImage,
    Packet,
    RoutingWord,
    SRAM_SLOTS_PER_NEURON,
    decode_cam_entry,
    decode_routing_word,
)

NS_PER_MS = 1e6
EMPTY_WORD = -1


class Port(enum.Enum):
    LOCAL = "local"
    N = "N"
    S = "S"
    E = "E"
    W = "W"


_OPPOSITE = {Port.N: Port.S, Port.S: Port.N, Port.E: Port.W, Port.W: Port.E}
_STEP = {Port.E: (1, 0), Port.W: (-1, 0), Port.N: (0, 1), Port.S: (0, -1)}


class R1Decision(enum.Enum):
    BROADCAST_LOCAL = "broadcast_local"
    TO_R2 = "to_r2"


class R2Direction(enum.Enum):
    UP = "up"      # from an R1 toward the mesh
    DOWN = "down"  # from the R3 toward a core


@dataclass(frozen=True)
class R2Decision:
    target: str               # "r3", "r1" or "fault"
    core: int | None = None
    reason: str | None = None


class R1State:
    """Per-core SRAM fan-out table: up to 4 routing words per neuron."""

    def __init__(self, n_neurons: int):
        self.n_neurons = n_neurons
        self.sram = np.full((n_neurons, SRAM_SLOTS_PER_NEURON), EMPTY_WORD,
                            dtype=np.int64)

    def set_word(self, neuron: int, slot: int, word: RoutingWord) -> None:
        if not 0 <= slot < SRAM_SLOTS_PER_NEURON:
            raise RangeError(f"SRAM slot {slot} outside 0..3")
        from .packets import encode_routing_word

        self.sram[neuron, slot] = encode_routing_word(word)

    def set_raw(self, neuron: int, slot: int, value: int) -> None:
        decode_routing_word(value)  # validates range
        self.sram[neuron, slot] = value

    def clear(self, neuron: int, slot: int) -> None:
        self.sram[neuron, slot] = EMPTY_WORD

    def words(self, neuron: int) -> list[RoutingWord]:
        """Programmed words of one neuron, in slot order."""
        return [decode_routing_word(int(v)) for v in self.sram[neuron]
                if v != EMPTY_WORD]


def r1_dispatch(packet: Packet, local_core: int) -> R1Decision:
    """Broadcast back into this core, or hand off to the R2 router."""
    if packet.dx == 0 and packet.dy == 0 and packet.core == local_core:
        return R1Decision.BROADCAST_LOCAL
    return R1Decision.TO_R2


def r2_route(packet: Packet, direction: R2Direction,
             cores_per_chip: int) -> R2Decision:
    """Split toward the mesh (upstream) or toward a local core."""
    if direction is R2Direction.UP and (packet.dx != 0 or packet.dy != 0):
        return R2Decision("r3")
    if packet.core >= cores_per_chip:
        return R2Decision("fault",
                          reason=f"core id {packet.core} >= {cores_per_chip}")
    return R2Decision("r1", core=packet.core)


def r3_route(packet: Packet, arrival_port: Port) -> tuple[Port, Packet]:
    """One XY routing decision.

    X hops are exhausted first, then Y hops. Packets arriving on the N/S
    ports are already done with X, so only the Y count is checked; packets
    from E/W or from the local R2 check X first. Each forwarding decision
    decrements the consumed counter by exactly one.
    """
    if arrival_port in (Port.N, Port.S):
        if packet.dy != 0:
            return (Port.N if packet.sy == 0 else Port.S), packet.with_hop_y()
        return Port.LOCAL, packet
    if packet.dx != 0:
        return (Port.E if packet.sx == 0 else Port.W), packet.with_hop_x()
    if packet.dy != 0:
        return (Port.N if packet.sy == 0 else Port.S), packet.with_hop_y()
    return Port.LOCAL, packet


def r1_emit(core_id: int, neuron: int, r1: R1State,
            src_chip: int, seq_start: int = 0) -> list[Packet]:
    """Expand one spike through the SRAM address loop.

    A spike with k programmed words circulates k times: the fan-out header
    starts at k-1 and is decremented each pass, so packet i carries
    header k-1-i and the loop exits at zero.
    """
    words = r1.words(neuron)
    k = len(words)
    return [Packet.from_routing_word(word, src=(src_chip, core_id, neuron),
                                     fanout_hdr=k - 1 - i, seq=seq_start + i)
            for i, word in enumerate(words)]


# -- external input ---------------------------------------------------------


@dataclass(frozen=True)
class StimulusEvent:
    """An address event presented to a chip's input interface."""

    t_ns: float
    chip: int
    packet: Packet


@dataclass(frozen=True)
class ProgramEvent:
    """A memory-programming word presented to a chip's input interface.

    ``kind`` is "sram" (20-bit routing word) or "cam" (12-bit entry).
    """

    t_ns: float
    chip: int
    core: int
    neuron: int
    slot: int
    kind: str
    value: int


ExternalEvent = StimulusEvent | ProgramEvent


def read_stimulus_tsv(fp, *, path: str | None = None) -> list[StimulusEvent]:
    """Parse a fabric-native stimulus file.

    One event per line: ``time_ns<TAB>chip<TAB>core<TAB>tag`` with
    optional ``dx dy sx sy`` mesh-header columns; '#' comments allowed.
    """
    events = []
    for lineno, raw in enumerate(fp, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith("time_ns"):
            continue
        parts = line.split()
        if len(parts) not in (4, 8):
            raise ParseError("expected 'time_ns chip core tag [dx dy sx sy]'",
                             path=path, line=lineno)
        try:
            t = float(parts[0])
            chip, core, tag = (int(p) for p in parts[1:4])
            dx = dy = sx = sy = 0
            if len(parts) == 8:
                dx, dy, sx, sy = (int(p) for p in parts[4:8])
            events.append(StimulusEvent(
                t_ns=t, chip=chip,
                packet=Packet(tag=tag, core=core, dx=dx, dy=dy, sx=sx, sy=sy)))
        except (ValueError, RangeError, EncodingError) as exc:
            raise ParseError(f"bad stimulus record: {exc}",
                             path=path, line=lineno) from exc
    return events


def write_stimulus_tsv(events: list[StimulusEvent], fp) -> None:
    fp.write("time_ns\tchip\tcore\ttag\tdx\tdy\tsx\tsy\n")
    for ev in events:
        p = ev.packet
        fp.write(f"{ev.t_ns:.3f}\t{ev.chip}\t{p.core}\t{p.tag}"
                 f"\t{p.dx}\t{p.dy}\t{p.sx}\t{p.sy}\n")


# -- statistics --------------------------------------------------------------

COUNTER_NAMES = (
    "events_injected", "events_foreign_forwarded", "events_foreign_dropped",
    "spikes", "spikes_encoded", "dropped_at_source", "packets_spawned",
    "broadcasts", "broadcasts_local", "broadcasts_external",
    "cross_core", "cross_chip", "r3_hops", "pulses",
    "delivered", "faulted", "routing_faults", "programs",
)


@dataclass
class SimStats:
    """Accumulated counters, exact energy ledger and latency samples."""

    counters: dict[str, int] = field(
        default_factory=lambda: {name: 0 for name in COUNTER_NAMES})
    energy_pj: float = 0.0
    latencies_ns: list[float] = field(default_factory=list)
    t_ns: float = 0.0

    def energy_counters(self) -> dict[str, int]:
        """Operation counts in the keying of the config energy table."""
        c = self.counters
        return {
            "spike_gen": c["spikes"],
            "encode_append": c["spikes_encoded"],
            "broadcast_same_core": c["broadcasts_local"] + c["broadcasts_external"],
            "route_diff_core": c["cross_core"] + c["cross_chip"] + c["r3_hops"],
            "pulse_extend": c["pulses"],
        }

    def compute_energy_pj(self, table: dict[str, float]) -> float:
        return sum(count * table[op] for op, count in self.energy_counters().items())

    def latency_histogram(self, bin_ns: float = 10.0) -> list[tuple[float, int]]:
        if not self.latencies_ns:
            return []
        hi = max(self.latencies_ns)
        n_bins = int(hi // bin_ns) + 1
        bins = [0] * n_bins
        for v in self.latencies_ns:
            bins[int(v // bin_ns)] += 1
        return [(i * bin_ns, n) for i, n in enumerate(bins)]

    def to_tsv(self, bin_ns: float = 10.0) -> str:
        lines = ["counter\tvalue"]
        for name in COUNTER_NAMES:
            lines.append(f"{name}\t{self.counters[name]}")
        lines.append(f"energy_pj\t{self.energy_pj:.6f}")
        lines.append(f"t_ns\t{self.t_ns:.3f}")
        lines.append("")
        lines.append("latency_bin_ns\tdelivered")
        for lo, n in self.latency_histogram(bin_ns):
            lines.append(f"{lo:.1f}\t{n}")
        return "\n".join(lines) + "\n"


# -- the engine --------------------------------------------------------------


class CoreNode:
    """One core: its R1 SRAM table, CAM image and (lazy) dynamic state."""

    def __init__(self, chip: int, core: int, cfg: FabricConfig,
                 weight_gain: np.ndarray | None):
        self.chip = chip
        self.core = core
        self.r1 = R1State(cfg.neurons_per_core)
        self.cam = CoreMemory(cfg.neurons_per_core)
        self._cfg = cfg
        self._gain = weight_gain
        self._neuron_params = cfg.neuron
        self._synapses = cfg.synapses
        self.state: CoreState | None = None

    def set_params(self, neuron=None, synapses=None) -> None:
        """Per-core bias override; must precede any dynamic activity."""
        if self.state is not None:
            raise SimulationError(
                f"core ({self.chip},{self.core}) dynamics already "
                "instantiated; set parameters before loading or running")
        if neuron is not None:
            self._neuron_params = neuron
        if synapses is not None:
            self._synapses = synapses

    def dynamics(self) -> CoreState:
        if self.state is None:
            self.state = CoreState(self._cfg.neurons_per_core,
                                   self._neuron_params,
                                   self._synapses, self._gain)
        return self.state


class Engine:
    """Deterministic event engine over the whole mesh.

    Events are processed in (timestamp, sequence) order; the sequence is a
    single run-global counter, so re-running an identical setup replays an
    identical trace byte for byte.
    """

    def __init__(self, config: FabricConfig, *, trace: bool = False):
        self.cfg = config
        self.now_ns = 0.0
        self._seq = 0
        self._queue: list[tuple[float, int, str, tuple]] = []
        self.stats = SimStats()
        self.trace_enabled = trace
        self.trace_lines: list[str] = []
        self.rasters: list[tuple[float, int, int, int]] = []
        self._tick_cores: set[tuple[int, int]] = set()
        self._ticking = False
        self._throttle_free_ns: dict[int, float] = {}

        rng = np.random.default_rng(config.seed)
        self.nodes: dict[tuple[int, int], CoreNode] = {}
        for chip in range(config.n_chips):
            for core in range(config.cores_per_chip):
                if config.mismatch_sigma > 0:
                    gain = rng.lognormal(0.0, config.mismatch_sigma,
                                         config.neurons_per_core)
                else:
                    gain = None
                self.nodes[(chip, core)] = CoreNode(chip, core, config, gain)

    # -- plumbing -----------------------------------------------------------

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def _schedule(self, t_ns: float, kind: str, payload: tuple) -> None:
        if t_ns < self.now_ns:
            raise SimulationError(
                f"event scheduled in the past: {t_ns} < {self.now_ns}")
        heapq.heappush(self._queue, (t_ns, self._next_seq(), kind, payload))

    def _trace(self, t_ns: float, seq: int, kind: str, location: str) -> None:
        if self.trace_enabled:
            self.trace_lines.append(f"{t_ns:.3f}\t{seq}\t{kind}\t{location}")

    def node(self, chip: int, core: int) -> CoreNode:
        return self.nodes[(chip, core)]

    def _activate(self, chip: int, core: int) -> None:
        self._tick_cores.add((chip, core))
        node = self.nodes[(chip, core)]
        node.dynamics()
        if not self._ticking:
            self._ticking = True
            dt_ns = self.cfg.tick_dt_ms * NS_PER_MS
            first = (int(self.now_ns // dt_ns) + 1) * dt_ns
            self._schedule(first, "tick", ())

    # -- programming ----------------------------------------------------------

    def load_image(self, image: MemoryImage) -> None:
        """Install a full memory image before (or between) runs."""
        for (chip, core, neuron, slot), value in image.sram.items():
            self._check_address(chip, core, neuron)
            self.nodes[(chip, core)].r1.set_raw(neuron, slot, value)
        for (chip, core, neuron, slot), value in image.cam.items():
            self._check_address(chip, core, neuron)
            self.nodes[(chip, core)].cam.write(neuron, slot,
                                               decode_cam_entry(value))
            self._activate(chip, core)

    def _check_address(self, chip: int, core: int, neuron: int) -> None:
        if chip >= self.cfg.n_chips:
            raise RangeError(f"chip {chip} outside 0..{self.cfg.n_chips - 1}")
        if core >= self.cfg.cores_per_chip:
            raise RangeError(f"core {core} outside 0..{self.cfg.cores_per_chip - 1}")
        if neuron >= self.cfg.neurons_per_core:
            raise RangeError(
                f"neuron {neuron} outside 0..{self.cfg.neurons_per_core - 1}")

    def set_dc_current(self, chip: int, core: int, neuron: int, pa: float) -> None:
        self._check_address(chip, core, neuron)
        self.nodes[(chip, core)].dynamics().i_dc[neuron] = pa
        self._activate(chip, core)

    def set_core_params(self, chip: int, core: int, *, neuron=None,
                        synapses=None) -> None:
        """Program a core's bias set (neuron and/or synapse parameters)."""
        self.nodes[(chip, core)].set_params(neuron, synapses)

    # -- external interface ---------------------------------------------------

    def inject_external(self, events: list[ExternalEvent]) -> None:
        """Feed stimulus and programming events through the input interface.

        Events are sorted by time (the queue would anyway); with the I/O
        throttle enabled, arrivals at each chip are spaced at the
        configured input rate.
        """
        spacing = self.cfg.input_spacing_ns if self.cfg.throttle_io else 0.0
        for ev in sorted(events, key=lambda e: e.t_ns):
            arrival = max(ev.t_ns, self.now_ns)
            if spacing > 0.0:
                free = self._throttle_free_ns.get(ev.chip, 0.0)
                arrival = max(arrival, free)
                self._throttle_free_ns[ev.chip] = arrival + spacing
            if isinstance(ev, ProgramEvent):
                self._schedule(arrival, "program", (ev,))
            else:
                self._schedule(arrival, "ext_in", (ev.chip, ev.packet, arrival))

    def schedule_spike(self, t_ns: float, chip: int, core: int, neuron: int) -> None:
        """Force a neuron spike at an absolute time (scripting/tests)."""
        self._check_address(chip, core, neuron)
        self._schedule(t_ns, "spike", (chip, core, neuron))

    # -- event handlers ---------------------------------------------------------

    def _handle_spike(self, t: float, seq: int, chip: int, core: int,
                      neuron: int) -> None:
        cfg = self.cfg
        st = self.stats.counters
        st["spikes"] += 1
        self.rasters.append((t, chip, core, neuron))
        self._trace(t, seq, "spike", f"chip{chip}:core{core}:n{neuron}")
        node = self.nodes[(chip, core)]
        packets = r1_emit(core, neuron, node.r1, chip, seq_start=0)
        if not packets:
            st["dropped_at_source"] += 1
            return
        st["spikes_encoded"] += 1
        for i, pkt in enumerate(packets):
            pkt = replace(pkt, seq=self._next_seq())
            st["packets_spawned"] += 1
            t_out = t + (i + 1) * cfg.latency.r1_loop_read
            self._schedule(t_out, "r1_out", (chip, core, pkt, t))

    def _handle_r1_out(self, t: float, seq: int, chip: int, core: int,
                       pkt: Packet, t0: float) -> None:
        decision = r1_dispatch(pkt, core)
        self._trace(t, seq, "r1_out", f"chip{chip}:core{core}:{decision.value}")
        if decision is R1Decision.BROADCAST_LOCAL:
            self._schedule(t + self.cfg.latency.broadcast, "deliver",
                           (chip, core, pkt, t0, "local"))
        else:
            self._schedule(t + self.cfg.latency.r2_hop, "r2_up",
                           (chip, pkt, t0))

    def _handle_r2_up(self, t: float, seq: int, chip: int, pkt: Packet,
                      t0: float) -> None:
        decision = r2_route(pkt, R2Direction.UP, self.cfg.cores_per_chip)
        self._trace(t, seq, "r2_up", f"chip{chip}:{decision.target}")
        if decision.target == "r3":
            self._schedule(t + self.cfg.latency.r3_hop, "r3",
                           (chip, Port.LOCAL, pkt, t0))
        elif decision.target == "r1":
            lat = self.cfg.latency.r2_hop + self.cfg.latency.broadcast
            self._schedule(t + lat, "deliver",
                           (chip, decision.core, pkt, t0, "routed"))
        else:
            self._fault(decision.reason or "r2 fault")

    def _handle_r3(self, t: float, seq: int, chip: int, port: Port,
                   pkt: Packet, t0: float) -> None:
        cfg = self.cfg
        exit_port, pkt = r3_route(pkt, port)
        self._trace(t, seq, "r3", f"chip{chip}:{port.value}->{exit_port.value}")
        if exit_port is Port.LOCAL:
            decision = r2_route(pkt, R2Direction.DOWN, cfg.cores_per_chip)
            if decision.target == "fault":
                self._fault(decision.reason or "r2 fault")
                return
            lat = cfg.latency.r3_hop + cfg.latency.r2_hop + cfg.latency.broadcast
            self._schedule(t + lat, "deliver",
                           (chip, decision.core, pkt, t0, "routed"))
            return
        x, y = cfg.chip_xy(chip)
        dx, dy = _STEP[exit_port]
        nx, ny = x + dx, y + dy
        if not (0 <= nx < cfg.grid_w and 0 <= ny < cfg.grid_h):
            self._fault(f"mesh boundary exceeded at chip{chip} port "
                        f"{exit_port.value}")
            return
        self.stats.counters["r3_hops"] += 1
        self._schedule(t + cfg.latency.chip_traverse, "r3",
                       (cfg.chip_id(nx, ny), _OPPOSITE[exit_port], pkt, t0))

    def _fault(self, reason: str) -> None:
        self.stats.counters["routing_faults"] += 1
        self.stats.counters["faulted"] += 1

    def _handle_deliver(self, t: float, seq: int, chip: int, core: int,
                        pkt: Packet, t0: float, mode: str) -> None:
        st = self.stats.counters
        st["broadcasts"] += 1
        st["delivered"] += 1
        self.stats.latencies_ns.append(t - t0)
        if mode == "external":
            st["broadcasts_external"] += 1
        elif mode == "local":
            st["broadcasts_local"] += 1
        else:
            src_chip = pkt.src[0]
            if src_chip == chip:
                st["cross_core"] += 1
            else:
                st["cross_chip"] += 1
        self._trace(t, seq, "deliver",
                    f"chip{chip}:core{core}:tag{pkt.tag}:{mode}")

        node = self.nodes[(chip, core)]
        neurons, slots = node.cam.match_arrays(pkt.tag)
        n_matches = neurons.size
        if n_matches == 0:
            return
        st["pulses"] += int(n_matches)
        state = node.dynamics()
        self._activate(chip, core)
        t_ms = t / NS_PER_MS
        syn_types = node.cam.syn[neurons, slots].astype(np.intp)
        state.apply_edges(t_ms, neurons, syn_types, +1)
        for syn in np.unique(syn_types):
            mask = syn_types == syn
            width_ns = state.pulse_width_ms[syn] * NS_PER_MS
            self._schedule(t + width_ns, "pulse_off",
                           (chip, core, neurons[mask], syn_types[mask]))

    def _handle_pulse_off(self, t: float, seq: int, chip: int, core: int,
                          neurons: np.ndarray, syn_types: np.ndarray) -> None:
        state = self.nodes[(chip, core)].dynamics()
        state.apply_edges(t / NS_PER_MS, neurons, syn_types, -1)

    def _handle_ext_in(self, t: float, seq: int, chip: int, pkt: Packet,
                       t0: float) -> None:
        cfg = self.cfg
        st = self.stats.counters
        self._trace(t, seq, "ext_in", f"chip{chip}:tag{pkt.tag}")
        if pkt.dx == 0 and pkt.dy == 0:
            st["events_injected"] += 1
            if pkt.core >= cfg.cores_per_chip:
                self._fault(f"external event core id {pkt.core} out of range")
                return
            self._schedule(t + cfg.latency.broadcast, "deliver",
                           (chip, pkt.core, pkt, t0, "external"))
        elif cfg.forward_foreign:
            st["events_injected"] += 1
            st["events_foreign_forwarded"] += 1
            self._schedule(t + cfg.latency.r2_hop, "r2_up", (chip, pkt, t0))
        else:
            st["events_foreign_dropped"] += 1

    def _handle_program(self, t: float, seq: int, ev: ProgramEvent) -> None:
        self._check_address(ev.chip, ev.core, ev.neuron)
        node = self.nodes[(ev.chip, ev.core)]
        self._trace(t, seq, "program",
                    f"chip{ev.chip}:core{ev.core}:n{ev.neuron}:"
                    f"{ev.kind}{ev.slot}")
        if ev.kind == "sram":
            node.r1.set_raw(ev.neuron, ev.slot, ev.value)
        elif ev.kind == "cam":
            node.cam.write(ev.neuron, ev.slot, decode_cam_entry(ev.value))
            self._activate(ev.chip, ev.core)
        else:
            raise SimulationError(f"unknown programming kind {ev.kind!r}")
        self.stats.counters["programs"] += 1

    def _handle_tick(self, t: float, seq: int) -> None:
        dt_ms = self.cfg.tick_dt_ms
        t_ms = t / NS_PER_MS
        for chip, core in sorted(self._tick_cores):
            state = self.nodes[(chip, core)].dynamics()
            spiked = state.tick(t_ms, dt_ms)
            for neuron in spiked:
                self._schedule(t, "spike", (chip, core, int(neuron)))
        self._schedule(t + dt_ms * NS_PER_MS, "tick", ())

    _HANDLERS = {
        "spike": _handle_spike,
        "r1_out": _handle_r1_out,
        "r2_up": _handle_r2_up,
        "r3": _handle_r3,
        "deliver": _handle_deliver,
        "pulse_off": _handle_pulse_off,
        "ext_in": _handle_ext_in,
        "program": _handle_program,
    }

    # -- run loop --------------------------------------------------------------

    def step(self) -> tuple[float, str] | None:
        """Process the single next event; None when the queue is idle."""
        while self._queue:
            t, seq, kind, payload = heapq.heappop(self._queue)
            self.now_ns = t
            if kind == "tick":
                if not self._pending_work():
                    self._ticking = False
                    continue  # drop the tick chain once nothing can happen
                self._handle_tick(t, seq)
            else:
                self._HANDLERS[kind](self, t, seq, *payload)
            return t, kind

        return None

    def _pending_work(self) -> bool:
        if any(kind != "tick" for _, _, kind, _ in self._queue):
            return True
        for chip, core in self._tick_cores:
            state = self.nodes[(chip, core)].dynamics()
            if (np.any(state.i_dc) or np.any(state.drive)
                    or float(np.abs(state.i_syn).max(initial=0.0)) > 1e-6
                    or float(np.abs(state.i_snap).max(initial=0.0)) > 1e-6
                    or float(np.abs(state.v - state.v_rest).max(initial=0.0)) > 1e-6
                    or float(np.abs(state.w_adapt - state.w_rest).max(initial=0.0)) > 1e-9):
                return True
        return False

    def run_until(self, t_end_ns: float) -> SimStats:
        """Run every event up to and including ``t_end_ns``; snapshot stats."""
        if t_end_ns < self.now_ns:
            raise SimulationError(
                f"t_end {t_end_ns} ns is before current time {self.now_ns} ns")
        while self._queue and self._queue[0][0] <= t_end_ns:
            self.step()
        self.now_ns = t_end_ns
        return self.snapshot()

    def run(self) -> SimStats:
        """Run until the queue drains (ticks stop once all cores are quiet)."""
        while self.step() is not None:
            pass
        return self.snapshot()

    def snapshot(self) -> SimStats:
        stats = SimStats(counters=dict(self.stats.counters),
                         latencies_ns=list(self.stats.latencies_ns),
                         t_ns=self.now_ns)
        stats.energy_pj = stats.compute_energy_pj(self.cfg.energy_table)
        return stats

    def raster_tsv(self) -> str:
        lines = ["time_ns\tchip\tcore\tneuron"]
        for t, chip, core, neuron in self.rasters:
            lines.append(f"{t:.3f}\t{chip}\t{core}\t{neuron}")
        return "\n".join(lines) + "\n"

    def trace_tsv(self) -> str:
        return "time_ns\tseq\tevent\tlocation\n" + "\n".join(self.trace_lines) + "\n"
