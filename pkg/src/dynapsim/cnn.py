"""Event-driven CNN construction: fixed feature kernels, pooling, readout.

The network is a three-layer pipeline on a 32x32 event input:

* 4 convolution maps of 16x16 neurons, 8x8 signed two-level kernels,
  stride 2, zero padding 3 (positive cells subscribe fast-excitatory,
  negative cells subtractive-inhibitory);
* 2x2 sum pooling to 4 maps of 8x8;
* 4 output populations of 64 neurons, wired offline by ranking pooling
  activity per class and connecting the 64 most active pooling neurons
  to the class population.

Input pixels are not simulated: each pixel is an external relay whose
events are injected as tag broadcasts into the conv cores.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .aer import AerEvent
from .compiler import Placement
from .errors import ConfigError
from .fabric import StimulusEvent
from .netlist import Edge, NetworkSpec, Population
from .packets import Packet, SynType

GLYPH_NAMES = ("heart", "diamond", "club", "spade")
KERNEL_NAMES = ("vertical_edge", "horizontal_edge", "up_vertex", "down_vertex")

CLASSIFY_WINDOW_MS = 20.0
CLASSIFY_DELAY_MS = 24.0


@dataclass(frozen=True)
class CnnSpec:
    """Layer geometry; defaults give 4x16x16 conv and 4x8x8 pooling."""

    input_size: int = 32
    n_maps: int = 4
    kernel_size: int = 8
    stride: int = 2
    pad: int = 3
    pool_size: int = 2
    readout_pops: int = 4
    readout_size: int = 64

    def __post_init__(self):
        span = self.input_size + 2 * self.pad - self.kernel_size
        if span < 0 or span % self.stride != 0:
            raise ConfigError(
                f"conv shape mismatch: ({self.input_size} + 2*{self.pad} - "
                f"{self.kernel_size}) not divisible by stride {self.stride}")
        if self.conv_out % self.pool_size != 0:
            raise ConfigError(
                f"pool shape mismatch: conv output {self.conv_out} not "
                f"divisible by pool {self.pool_size}")

    @property
    def conv_out(self) -> int:
        return (self.input_size + 2 * self.pad - self.kernel_size) \
            // self.stride + 1

    @property
    def pool_out(self) -> int:
        return self.conv_out // self.pool_size

    @property
    def n_pixels(self) -> int:
        return self.input_size * self.input_size

    @property
    def n_conv(self) -> int:
        return self.n_maps * self.conv_out * self.conv_out

    @property
    def n_pool(self) -> int:
        return self.n_maps * self.pool_out * self.pool_out


def feature_kernels(size: int = 8) -> list[np.ndarray]:
    """Four signed two-level templates: edges and vertices.

    Each is a +1 band on the feature with a full -1 surround, so a window
    uses every subscriber slot and off-feature input actively suppresses.
    """
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    cx = (size - 1) / 2.0

    vert = np.full((size, size), -1, dtype=int)
    vert[:, size // 2 - 1:size // 2 + 1] = 1

    horiz = vert.T.copy()

    # up vertex: an inverted-V band, apex on the top row
    ridge = np.abs(xx - cx)
    up = np.full((size, size), -1, dtype=int)
    up[np.abs(yy - ridge) <= 1.0] = 1

    down = up[::-1].copy()

    return [vert, horiz, up, down]


def build_cnn(spec: CnnSpec = CnnSpec()) -> NetworkSpec:
    """Netlist of the feature pipeline with an untrained readout layer."""
    pops = [Population("pix", spec.n_pixels, external=True)]
    pops += [Population(f"conv{m}", spec.conv_out * spec.conv_out)
             for m in range(spec.n_maps)]
    pops += [Population(f"pool{m}", spec.pool_out * spec.pool_out)
             for m in range(spec.n_maps)]
    pops += [Population(f"out{c}", spec.readout_size)
             for c in range(spec.readout_pops)]
    net = NetworkSpec(name="event_cnn", populations=pops, edges=[])

    kernels = feature_kernels(spec.kernel_size)[:spec.n_maps]
    edges: list[Edge] = []
    for m, kernel in enumerate(kernels):
        conv_base = net.gid(f"conv{m}", 0)
        for oy in range(spec.conv_out):
            for ox in range(spec.conv_out):
                conv_gid = conv_base + oy * spec.conv_out + ox
                x0 = ox * spec.stride - spec.pad
                y0 = oy * spec.stride - spec.pad
                for ky in range(spec.kernel_size):
                    for kx in range(spec.kernel_size):
                        x, y = x0 + kx, y0 + ky
                        if not (0 <= x < spec.input_size
                                and 0 <= y < spec.input_size):
                            continue
                        w = kernel[ky, kx]
                        if w == 0:
                            continue
                        syn = SynType.FAST_EXC if w > 0 else SynType.SUB_INH
                        edges.append(Edge(src=y * spec.input_size + x,
                                          dst=conv_gid, syn_type=syn))
        pool_base = net.gid(f"pool{m}", 0)
        for py in range(spec.pool_out):
            for px in range(spec.pool_out):
                pool_gid = pool_base + py * spec.pool_out + px
                for dy in range(spec.pool_size):
                    for dx in range(spec.pool_size):
                        cy = py * spec.pool_size + dy
                        cx2 = px * spec.pool_size + dx
                        edges.append(Edge(
                            src=conv_base + cy * spec.conv_out + cx2,
                            dst=pool_gid, syn_type=SynType.FAST_EXC))

    return NetworkSpec(name=net.name, populations=pops, edges=edges)


# -- synthetic stimulus -------------------------------------------------------


def glyph_mask(name: str, size: int = 31) -> np.ndarray:
    """Binary 31x31 suit-like glyphs for the synthetic event streams."""
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    c = (size - 1) / 2.0

    def disc(x0, y0, r):
        return (xx - x0) ** 2 + (yy - y0) ** 2 <= r * r

    if name == "diamond":
        return np.abs(xx - c) + np.abs(yy - c) <= 9.0
    if name == "heart":
        lobes = disc(10, 10, 6.2) | disc(20, 10, 6.2)
        tip = (yy >= 11) & (yy <= 26) & (np.abs(xx - c) <= 11.5 * (1 - (yy - 11) / 15.0))
        return lobes | tip
    if name == "spade":
        lobes = disc(9, 21, 5.0) | disc(21, 21, 5.0)
        tip = (yy >= 3) & (yy <= 21) & (np.abs(xx - c) <= 12.0 * ((yy - 3) / 18.0))
        stem = (np.abs(xx - c) <= 1.5) & (yy >= 21) & (yy <= 29)
        return lobes | tip | stem
    if name == "club":
        lobes = disc(15, 6, 5.8) | disc(6, 14, 5.8) | disc(24, 14, 5.8)
        stem = (np.abs(xx - c) <= 1.5) & (yy >= 14) & (yy <= 28)
        return lobes | stem
    raise ConfigError(f"unknown glyph {name!r}; expected one of {GLYPH_NAMES}")


def synth_glyph_events(name: str, onset_us: int, duration_us: int,
                       rate_hz: float, rng: np.random.Generator,
                       size: int = 31) -> list[AerEvent]:
    """Poisson pixel events for one glyph presentation.

    Every active pixel fires at ``rate_hz`` (the intensity ceiling of the
    rendered symbols); timestamps are uniform over the presentation.
    """
    mask = glyph_mask(name, size)
    ys, xs = np.nonzero(mask)
    lam = rate_hz * duration_us * 1e-6
    counts = rng.poisson(lam, size=len(xs))
    events: list[AerEvent] = []
    for x, y, n in zip(xs, ys, counts):
        if n == 0:
            continue
        times = rng.integers(onset_us, onset_us + duration_us, size=n)
        for t in times:
            events.append(AerEvent(t_us=int(t), x=int(x), y=int(y), polarity=1))
    events.sort(key=lambda e: e.t_us)
    return events


def stimulus_from_aer(placement: Placement, events: list[AerEvent],
                      input_size: int = 32,
                      pix_pop: str = "pix") -> list[StimulusEvent]:
    """Expand sensor events into per-core tag broadcasts.

    Each pixel is a virtual relay: one AER event becomes one stimulus
    packet per destination core of that pixel, injected at the target
    chip with the pixel's per-core tag.
    """
    net = placement.network
    base = net.gid(pix_pop, 0)
    out: list[StimulusEvent] = []
    for ev in events:
        if ev.x >= input_size or ev.y >= input_size:
            continue
        gid = base + ev.y * input_size + ev.x
        for chip, core in placement.dest_cores.get(gid, []):
            tag = placement.tag_map[(gid, (chip, core))]
            out.append(StimulusEvent(
                t_ns=ev.t_us * 1e3, chip=chip,
                packet=Packet(tag=tag, core=core, dx=0, dy=0, sx=0, sy=0)))
    return out


# -- readout training and classification -------------------------------------


def train_readout(net: NetworkSpec, pool_counts_per_class: list[np.ndarray],
                  spec: CnnSpec = CnnSpec()) -> list[Edge]:
    """Offline Hebbian-style wiring of the fully-connected layer.

    Per class, pooling neurons are ranked by spike count (ties broken by
    index) and the ``readout_size`` most active ones are connected, fast
    excitatory, to every neuron of the class population. Classes with
    fewer active pooling neurons connect all of them, with a warning.
    """
    if len(pool_counts_per_class) != spec.readout_pops:
        raise ConfigError(
            f"expected {spec.readout_pops} per-class count vectors, got "
            f"{len(pool_counts_per_class)}")
    pool_base = net.gid("pool0", 0)
    edges: list[Edge] = []
    for cls, counts in enumerate(pool_counts_per_class):
        counts = np.asarray(counts)
        if counts.shape != (spec.n_pool,):
            raise ConfigError(
                f"class {cls}: counts shape {counts.shape} != ({spec.n_pool},)")
        order = sorted(range(spec.n_pool), key=lambda i: (-counts[i], i))
        active = [i for i in order if counts[i] > 0]
        chosen = active[:spec.readout_size]
        if len(chosen) < spec.readout_size:
            warnings.warn(
                f"class {cls}: only {len(chosen)} active pooling neurons; "
                f"connecting all of them", stacklevel=2)
        out_base = net.gid(f"out{cls}", 0)
        for pool_idx in chosen:
            for k in range(spec.readout_size):
                edges.append(Edge(src=pool_base + pool_idx,
                                  dst=out_base + k,
                                  syn_type=SynType.FAST_EXC))
    return edges


def classify_windows(out_spikes: list[tuple[float, int]],
                     onsets_ms: list[float], n_pops: int = 4,
                     window_ms: float = CLASSIFY_WINDOW_MS,
                     delay_ms: float = CLASSIFY_DELAY_MS) -> list[int | None]:
    """Label each stimulus window by output-population spike count.

    Counts fall in [onset + delay, onset + delay + window). The label is
    the argmax population; ties (including all-silent) yield None, the
    ambiguous label, never an arbitrary winner.
    """
    labels: list[int | None] = []
    for onset in onsets_ms:
        lo = onset + delay_ms
        hi = lo + window_ms
        counts = [0] * n_pops
        for t, pop in out_spikes:
            if lo <= t < hi:
                counts[pop] += 1
        best = max(counts)
        winners = [i for i, c in enumerate(counts) if c == best]
        labels.append(winners[0] if best > 0 and len(winners) == 1 else None)
    return labels


def first_correct_decision_ms(out_spikes: list[tuple[float, int]],
                              onset_ms: float, truth: int,
                              horizon_ms: float, n_pops: int = 4,
                              ) -> float | None:
    """Earliest stable correct decision time, relative to stimulus onset.

    Walking the cumulative output counts from the onset, this is the first
    spike time after which the argmax is uniquely the true class for the
    rest of the horizon. None when no such point exists.
    """
    window = sorted((t, pop) for t, pop in out_spikes
                    if onset_ms <= t < onset_ms + horizon_ms)
    if not window:
        return None
    counts = [0] * n_pops
    states: list[tuple[float, bool]] = []
    for t, pop in window:
        counts[pop] += 1
        best = max(counts)
        winners = [i for i, c in enumerate(counts) if c == best]
        states.append((t, winners == [truth]))
    decision: float | None = None
    for t, good in reversed(states):
        if not good:
            break
        decision = t
    return decision - onset_ms if decision is not None else None
