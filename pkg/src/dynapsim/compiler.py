"""Maps an abstract network onto the fabric.

The pipeline is: cluster neurons into cores (populations are chunked and
packed first-fit, ordered by connection affinity), assign cores to mesh
chips row-major, give every source a distinct tag in each core it
projects into, then emit the bit-exact memory image. ``validate``
reconstructs the realized connectivity symbolically and diffs it against
the network, so a compiled image is checked edge-for-edge before it ever
reaches the simulator.

Hardware bounds enforced here: neurons per core, 64 subscriber slots per
neuron, 4 fan-out cores per source, 1024 tags per core, and the 2-bit
mesh hop fields at emission.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from .config import FabricConfig
from .errors import ResourceError
from .memopt import NetParams, mem_two_stage
from .netlist import NetworkSpec
from .packets import (
    CAM_SLOTS_PER_NEURON,
    SRAM_SLOTS_PER_NEURON,
    CamEntry,
    MemoryImage,
    RoutingWord,
    HOP_MAX,
    TAG_MAX,
)

CoreKey = tuple[int, int]  # (chip, core)

PROVISIONED_BITS_PER_NEURON = (SRAM_SLOTS_PER_NEURON * 20
                               + CAM_SLOTS_PER_NEURON * 12)  # 848


@dataclass
class Placement:
    """A complete mapping of one network onto the fabric."""

    network: NetworkSpec
    grid_w: int
    grid_h: int
    cores_per_chip: int
    neurons_per_core: int
    seed: int
    neuron_loc: dict[int, tuple[int, int, int]] = field(default_factory=dict)
    core_members: dict[CoreKey, list[int]] = field(default_factory=dict)
    tag_map: dict[tuple[int, CoreKey], int] = field(default_factory=dict)
    # per destination neuron: CAM entries in slot order
    cam_images: dict[int, list[CamEntry]] = field(default_factory=dict)
    # per source: destination cores in slot order
    dest_cores: dict[int, list[CoreKey]] = field(default_factory=dict)

    def chip_xy(self, chip: int) -> tuple[int, int]:
        return chip % self.grid_w, chip // self.grid_w

    def tags_used(self, core: CoreKey) -> int:
        return len({tag for (src, c), tag in self.tag_map.items() if c == core})

    def routing_words_for(self, src: int) -> list[RoutingWord]:
        """Mesh-relative routing words of one source, in slot order.

        Raises when a destination exceeds the 2-bit hop range.
        """
        src_chip = self.neuron_loc[src][0]
        sx0, sy0 = self.chip_xy(src_chip)
        words = []
        for chip, core in self.dest_cores.get(src, []):
            dx_signed = self.chip_xy(chip)[0] - sx0
            dy_signed = self.chip_xy(chip)[1] - sy0
            if abs(dx_signed) > HOP_MAX or abs(dy_signed) > HOP_MAX:
                raise ResourceError(
                    "mesh_hop_range",
                    f"source {src} to chip {chip}: offset "
                    f"({dx_signed},{dy_signed}) exceeds 2-bit hop field; "
                    "re-place with a tighter chip assignment")
            words.append(RoutingWord(
                tag=self.tag_map[(src, (chip, core))], core=core,
                dx=abs(dx_signed), dy=abs(dy_signed),
                sx=0 if dx_signed >= 0 else 1,
                sy=0 if dy_signed >= 0 else 1))
        return words


def _affinity_order(spec: NetworkSpec) -> list[str]:
    """Greedy population ordering: start big, append the most-connected."""
    pops = [p.name for p in spec.populations]
    if not pops:
        return []
    weight: dict[tuple[str, str], int] = defaultdict(int)
    for e in spec.edges:
        a = spec.population_of(e.src)[0].name
        b = spec.population_of(e.dst)[0].name
        if a != b:
            weight[(a, b)] += e.mult
            weight[(b, a)] += e.mult
    sizes = {p.name: p.size for p in spec.populations}
    ordered = [max(pops, key=lambda n: (sizes[n], n))]
    remaining = [p for p in pops if p != ordered[0]]
    while remaining:
        def pull(name: str) -> tuple[int, int, str]:
            return (sum(weight[(name, o)] for o in ordered), sizes[name], name)

        nxt = max(remaining, key=pull)
        ordered.append(nxt)
        remaining.remove(nxt)
    return ordered


def place(spec: NetworkSpec, fabric: FabricConfig, seed: int = 0) -> Placement:
    """Deterministically map a network; raises on any violated bound."""
    placement = Placement(network=spec, grid_w=fabric.grid_w,
                          grid_h=fabric.grid_h,
                          cores_per_chip=fabric.cores_per_chip,
                          neurons_per_core=fabric.neurons_per_core, seed=seed)

    for e in spec.edges:
        if spec.is_external(e.dst):
            raise ResourceError(
                "external_target",
                f"edge into external population neuron {e.dst}")

    # fan-in bound, multiplicity included
    fan_in: dict[int, int] = defaultdict(int)
    for e in spec.edges:
        fan_in[e.dst] += e.mult
    for dst, n in fan_in.items():
        if n > CAM_SLOTS_PER_NEURON:
            raise ResourceError(
                "fan_in", f"neuron {dst} has fan-in {n} > "
                f"{CAM_SLOTS_PER_NEURON} subscriber slots")

    # cluster: chunk populations (affinity order) and pack chunks first-fit
    # without splitting a chunk across cores; only populations larger than
    # one core are cut, at core-size boundaries
    cap = fabric.neurons_per_core
    n_cores_total = fabric.n_chips * fabric.cores_per_chip
    chunks: list[list[int]] = []
    for pop_name in _affinity_order(spec):
        pop = spec.population(pop_name)
        if pop.external:
            continue
        base = spec.gid(pop_name, 0)
        members = list(range(base, base + pop.size))
        for lo in range(0, len(members), cap):
            chunks.append(members[lo:lo + cap])
    cores: list[list[int]] = []
    for chunk in chunks:
        for members in cores:
            if len(members) + len(chunk) <= cap:
                members.extend(chunk)
                break
        else:
            cores.append(list(chunk))
    if len(cores) > n_cores_total:
        raise ResourceError(
            "core_capacity",
            f"network needs {len(cores)} cores but the fabric has "
            f"{n_cores_total} ({fabric.n_chips} chips x "
            f"{fabric.cores_per_chip})")

    for idx, members in enumerate(cores):
        key = (idx // fabric.cores_per_chip, idx % fabric.cores_per_chip)
        placement.core_members[key] = members
        for local, gid in enumerate(members):
            placement.neuron_loc[gid] = (key[0], key[1], local)

    _wire(placement, spec)
    return placement


def rewire(placement: Placement, spec: NetworkSpec) -> Placement:
    """Re-derive tags, routing and CAM images for new edges on a fixed
    geometry.

    The population layout must be unchanged (same names and sizes); only
    the edge list may differ. Used when connectivity is grown after
    placement, e.g. wiring a trained readout.
    """
    old = placement.network
    if [(p.name, p.size, p.external) for p in old.populations] != \
            [(p.name, p.size, p.external) for p in spec.populations]:
        raise ResourceError(
            "rewire_geometry", "population layout changed; re-place instead")
    fresh = Placement(network=spec, grid_w=placement.grid_w,
                      grid_h=placement.grid_h,
                      cores_per_chip=placement.cores_per_chip,
                      neurons_per_core=placement.neurons_per_core,
                      seed=placement.seed,
                      neuron_loc=dict(placement.neuron_loc),
                      core_members={k: list(v) for k, v
                                    in placement.core_members.items()})
    for e in spec.edges:
        if spec.is_external(e.dst):
            raise ResourceError(
                "external_target",
                f"edge into external population neuron {e.dst}")
    fan_in: dict[int, int] = defaultdict(int)
    for e in spec.edges:
        fan_in[e.dst] += e.mult
    for dst, n in fan_in.items():
        if n > CAM_SLOTS_PER_NEURON:
            raise ResourceError(
                "fan_in", f"neuron {dst} has fan-in {n} > "
                f"{CAM_SLOTS_PER_NEURON} subscriber slots")
    _wire(fresh, spec)
    return fresh


def _wire(placement: Placement, spec: NetworkSpec) -> None:
    """Destination sets, tags, CAM images and hop checks for spec edges."""
    dest_sets: dict[int, list[CoreKey]] = {}
    edges_by_src: dict[int, list] = defaultdict(list)
    for e in spec.edges:
        edges_by_src[e.src].append(e)
    for src in sorted(edges_by_src):
        seen: list[CoreKey] = []
        for e in edges_by_src[src]:
            key = placement.neuron_loc[e.dst][:2]
            if key not in seen:
                seen.append(key)
        if len(seen) > SRAM_SLOTS_PER_NEURON:
            kind = "external source" if spec.is_external(src) else "source"
            raise ResourceError(
                "fanout_cores",
                f"{kind} {src} projects into {len(seen)} cores > "
                f"{SRAM_SLOTS_PER_NEURON} routing slots")
        dest_sets[src] = sorted(seen)
    placement.dest_cores = dest_sets

    allocate_tags(placement)

    # CAM images, entries ordered by (source, type) for reproducibility
    edges_by_dst: dict[int, list] = defaultdict(list)
    for e in spec.edges:
        edges_by_dst[e.dst].append(e)
    placement.cam_images = {}
    for dst in sorted(edges_by_dst):
        chip, core, _ = placement.neuron_loc[dst]
        entries: list[CamEntry] = []
        for e in sorted(edges_by_dst[dst],
                        key=lambda e: (e.src, int(e.syn_type))):
            tag = placement.tag_map[(e.src, (chip, core))]
            entries.extend([CamEntry(tag=tag, syn_type=e.syn_type)] * e.mult)
        placement.cam_images[dst] = entries

    # hop-range sanity happens at emission; do it now for fail-fast placement
    for src in dest_sets:
        if not spec.is_external(src):
            placement.routing_words_for(src)


def allocate_tags(placement: Placement) -> dict[tuple[int, CoreKey], int]:
    """Give every source a distinct tag per destination core.

    Tag spaces are independent per core, so disjoint cores reuse the same
    ids freely. Assignment is lowest-free-tag-first over sources in id
    order, which is the degenerate (fully conflicting) case of greedy
    coloring: any two sources broadcasting into one core must differ.
    """
    spec = placement.network
    sources_into: dict[CoreKey, list[int]] = defaultdict(list)
    for src in sorted(placement.dest_cores):
        for key in placement.dest_cores[src]:
            sources_into[key].append(src)
    placement.tag_map.clear()
    for key in sorted(sources_into):
        srcs = sources_into[key]
        if len(srcs) > TAG_MAX + 1:
            raise ResourceError(
                "tag_exhaustion",
                f"core {key} receives {len(srcs)} distinct sources > "
                f"{TAG_MAX + 1} tags")
        for tag, src in enumerate(srcs):
            placement.tag_map[(src, key)] = tag
    return placement.tag_map


def emit_images(placement: Placement) -> MemoryImage:
    """The bit-exact SRAM/CAM programming image of a placement."""
    image = MemoryImage()
    for src in sorted(placement.dest_cores):
        if placement.network.is_external(src):
            continue  # stimulus relays have no SRAM; the host synthesizes them
        chip, core, local = placement.neuron_loc[src]
        for slot, word in enumerate(placement.routing_words_for(src)):
            image.set_routing_word(chip, core, local, slot, word)
    for dst in sorted(placement.cam_images):
        chip, core, local = placement.neuron_loc[dst]
        entries = placement.cam_images[dst]
        if len(entries) > CAM_SLOTS_PER_NEURON:
            raise ResourceError(
                "fan_in", f"neuron {dst} needs {len(entries)} CAM slots")
        for slot, entry in enumerate(entries):
            image.set_cam_entry(chip, core, local, slot, entry)
    return image


@dataclass
class EdgeDiff:
    src: int
    dst: int
    syn_type: int
    count: int  # positive multiplicity of the discrepancy


@dataclass
class ValidationReport:
    missing: list[EdgeDiff]
    spurious: list[EdgeDiff]
    type_mismatched: list[tuple[int, int]]
    n_placed: int
    bits_used_avg: float
    bits_provisioned: int
    eq2_prediction_bits: float

    @property
    def ok(self) -> bool:
        return not self.missing and not self.spurious


def validate(placement: Placement, spec: NetworkSpec) -> ValidationReport:
    """Reconstruct connectivity by symbolic routing and diff against spec.

    Every source's routing words are walked to their destination core;
    every CAM entry there that matches the word's tag realizes one edge.
    The diff is multiset-exact in (src, dst, type).
    """
    # symbolic broadcast: index each core's CAM image by tag once
    core_index: dict[CoreKey, dict[int, list[tuple[int, int]]]] = {}
    for key, members in placement.core_members.items():
        idx: dict[int, list[tuple[int, int]]] = defaultdict(list)
        for dst in members:
            for entry in placement.cam_images.get(dst, []):
                idx[entry.tag].append((dst, int(entry.syn_type)))
        core_index[key] = idx

    realized: dict[tuple[int, int, int], int] = defaultdict(int)
    for src in sorted(placement.dest_cores):
        if spec.is_external(src):
            words = [(key, placement.tag_map[(src, key)])
                     for key in placement.dest_cores[src]]
        else:
            words = []
            src_chip = placement.neuron_loc[src][0]
            sx0, sy0 = placement.chip_xy(src_chip)
            for word in placement.routing_words_for(src):
                ox, oy = word.chip_offset()
                chip = (sy0 + oy) * placement.grid_w + (sx0 + ox)
                words.append(((chip, word.core), word.tag))
        for key, tag in words:
            for dst, syn in core_index.get(key, {}).get(tag, []):
                realized[(src, dst, syn)] += 1

    wanted: dict[tuple[int, int, int], int] = defaultdict(int)
    for e in spec.edges:
        wanted[(e.src, e.dst, int(e.syn_type))] += e.mult

    missing = []
    spurious = []
    for key in sorted(set(wanted) | set(realized)):
        delta = wanted.get(key, 0) - realized.get(key, 0)
        if delta > 0:
            missing.append(EdgeDiff(*key, count=delta))
        elif delta < 0:
            spurious.append(EdgeDiff(*key, count=-delta))
    mismatch_pairs = sorted(
        {(d.src, d.dst) for d in missing}
        & {(d.src, d.dst) for d in spurious})

    n_placed = len(placement.neuron_loc)
    bits_used = 0
    for src in placement.dest_cores:
        if not spec.is_external(src):
            bits_used += 20 * len(placement.dest_cores[src])
    for entries in placement.cam_images.values():
        bits_used += 12 * len(entries)
    bits_avg = bits_used / n_placed if n_placed else 0.0

    eq2 = _eq2_prediction(placement, spec)

    return ValidationReport(missing=missing, spurious=spurious,
                            type_mismatched=mismatch_pairs,
                            n_placed=n_placed,
                            bits_used_avg=bits_avg,
                            bits_provisioned=PROVISIONED_BITS_PER_NEURON,
                            eq2_prediction_bits=eq2)


def _eq2_prediction(placement: Placement, spec: NetworkSpec) -> float:
    """Two-stage memory formula evaluated at the network's empirical shape."""
    sources = [s for s in placement.dest_cores if placement.dest_cores[s]]
    if not sources or not placement.neuron_loc:
        return 0.0
    fan_out: dict[int, int] = defaultdict(int)
    for e in spec.edges:
        fan_out[e.src] += e.mult
    f = sum(fan_out.values()) / len(sources)
    subscribers: dict[tuple[int, CoreKey], int] = defaultdict(int)
    for e in spec.edges:
        key = placement.neuron_loc[e.dst][:2]
        subscribers[(e.src, key)] += e.mult
    m = sum(subscribers.values()) / len(subscribers)
    core_tags: dict[CoreKey, set[int]] = defaultdict(set)
    for (_, key), tag in placement.tag_map.items():
        core_tags[key].add(tag)
    k = max((len(tags) for tags in core_tags.values()), default=2)
    n = max(2, len(placement.neuron_loc))
    c = min(placement.neurons_per_core, n)  # degenerate below one core
    try:
        report = mem_two_stage(NetParams(n=n, f=max(f, 1.0), c=c,
                                         m=max(m, 1.0), k=max(k, 2)),
                               check=False)
        return report.mem_total_bits
    except Exception:
        return 0.0
