"""Abstract network description and its text netlist format.

A netlist declares populations and connection rules:

.. code-block:: text

    network demo seed=42
    population pix 1024 external
    population conv0 256 params=default
    connect pix conv0 fast_exc prob 0.05 seed=1
    connect conv0 conv0 slow_exc edges
      0 1
      1 2 3        # third column: multiplicity
    end

Rules: ``all-to-all [mult=k]``, ``one-to-one``, ``prob <p> [seed=s]`` and
``edges`` (explicit list, terminated by ``end``). Populations marked
``external`` are stimulus relays: they occupy tags in their target cores
but are never placed on neurons. Repeating a (src, dst, type) triple is
rejected; intended multi-synapses use the multiplicity column.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .errors import ParseError
from .packets import SynType

SYN_NAMES = {
    "fast_exc": SynType.FAST_EXC,
    "slow_exc": SynType.SLOW_EXC,
    "sub_inh": SynType.SUB_INH,
    "shunt_inh": SynType.SHUNT_INH,
}
SYN_TO_NAME = {v: k for k, v in SYN_NAMES.items()}


@dataclass(frozen=True)
class Population:
    name: str
    size: int
    external: bool = False
    params: str = "default"


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    syn_type: SynType
    mult: int = 1


@dataclass
class NetworkSpec:
    """Populations plus an expanded, canonically sorted edge list."""

    name: str = "net"
    seed: int = 0
    populations: list[Population] = field(default_factory=list)
    edges: list[Edge] = field(default_factory=list)

    def __post_init__(self):
        self._offsets: dict[str, int] = {}
        off = 0
        for pop in self.populations:
            if pop.name in self._offsets:
                raise ParseError(f"duplicate population {pop.name!r}")
            if pop.size <= 0:
                raise ParseError(f"population {pop.name!r} size must be positive")
            self._offsets[pop.name] = off
            off += pop.size
        self._total = off
        seen: set[tuple[int, int, SynType]] = set()
        for e in self.edges:
            key = (e.src, e.dst, e.syn_type)
            if key in seen:
                raise ParseError(
                    f"duplicate edge {key}; use the multiplicity field")
            seen.add(key)
            if not 0 <= e.src < off or not 0 <= e.dst < off:
                raise ParseError(f"edge {key} references unknown neuron id")
            if e.mult < 1:
                raise ParseError(f"edge {key} multiplicity must be >= 1")
        self.edges = sorted(self.edges,
                            key=lambda e: (e.src, e.dst, int(e.syn_type)))

    @property
    def n_neurons(self) -> int:
        return self._total

    def gid(self, pop: str, index: int) -> int:
        if pop not in self._offsets:
            raise ParseError(f"unknown population {pop!r}")
        size = self.population(pop).size
        if not 0 <= index < size:
            raise ParseError(f"index {index} outside population {pop!r} "
                             f"of size {size}")
        return self._offsets[pop] + index

    def population(self, name: str) -> Population:
        for pop in self.populations:
            if pop.name == name:
                return pop
        raise ParseError(f"unknown population {name!r}")

    def population_of(self, gid: int) -> tuple[Population, int]:
        for pop in self.populations:
            off = self._offsets[pop.name]
            if off <= gid < off + pop.size:
                return pop, gid - off
        raise ParseError(f"neuron id {gid} out of range")

    def is_external(self, gid: int) -> bool:
        return self.population_of(gid)[0].external

    def fan_in(self, gid: int) -> int:
        return sum(e.mult for e in self.edges if e.dst == gid)


class _NetlistBuilder:
    """Accumulates edges with duplicate folding disabled (duplicates error)."""

    def __init__(self):
        self.edges: list[Edge] = []
        self._seen: set[tuple[int, int, SynType]] = set()

    def add(self, src: int, dst: int, syn: SynType, mult: int,
            where: str) -> None:
        key = (src, dst, syn)
        if key in self._seen:
            raise ParseError(f"{where}: duplicate edge {key}; "
                             "use a multiplicity instead")
        self._seen.add(key)
        self.edges.append(Edge(src, dst, syn, mult))


def _pop_pair(spec_pops: dict[str, tuple[int, int]], name: str,
              where: str) -> tuple[int, int]:
    if name not in spec_pops:
        raise ParseError(f"{where}: unknown population {name!r}")
    return spec_pops[name]


def parse_netlist(text: str, *, path: str | None = None) -> NetworkSpec:
    name = "net"
    seed = 0
    populations: list[Population] = []
    pop_ranges: dict[str, tuple[int, int]] = {}  # name -> (offset, size)
    offset = 0
    builder = _NetlistBuilder()

    lines = text.splitlines()
    i = 0
    while i < len(lines):
        lineno = i + 1
        line = lines[i].split("#", 1)[0].strip()
        i += 1
        if not line:
            continue
        where = f"line {lineno}"
        tokens = line.split()
        kw = tokens[0]

        if kw == "network":
            if len(tokens) < 2:
                raise ParseError(f"{where}: network needs a name", path=path)
            name = tokens[1]
            for tok in tokens[2:]:
                if tok.startswith("seed="):
                    seed = int(tok[5:])
                else:
                    raise ParseError(f"{where}: unknown option {tok!r}", path=path)

        elif kw == "population":
            if len(tokens) < 3:
                raise ParseError(f"{where}: population needs name and size",
                                 path=path)
            pname, size = tokens[1], int(tokens[2])
            external = False
            params = "default"
            for tok in tokens[3:]:
                if tok == "external":
                    external = True
                elif tok.startswith("params="):
                    params = tok[7:]
                else:
                    raise ParseError(f"{where}: unknown option {tok!r}", path=path)
            if pname in pop_ranges:
                raise ParseError(f"{where}: duplicate population {pname!r}",
                                 path=path)
            populations.append(Population(pname, size, external, params))
            pop_ranges[pname] = (offset, size)
            offset += size

        elif kw == "connect":
            if len(tokens) < 5:
                raise ParseError(f"{where}: connect needs src dst type rule",
                                 path=path)
            src_off, src_n = _pop_pair(pop_ranges, tokens[1], where)
            dst_off, dst_n = _pop_pair(pop_ranges, tokens[2], where)
            if tokens[3] not in SYN_NAMES:
                raise ParseError(f"{where}: unknown synapse type {tokens[3]!r}",
                                 path=path)
            syn = SYN_NAMES[tokens[3]]
            rule = tokens[4]
            opts = tokens[5:]

            if rule == "all-to-all":
                mult = 1
                for tok in opts:
                    if tok.startswith("mult="):
                        mult = int(tok[5:])
                    else:
                        raise ParseError(f"{where}: unknown option {tok!r}",
                                         path=path)
                for a in range(src_n):
                    for b in range(dst_n):
                        builder.add(src_off + a, dst_off + b, syn, mult, where)

            elif rule == "one-to-one":
                if src_n != dst_n:
                    raise ParseError(
                        f"{where}: one-to-one needs equal sizes "
                        f"({src_n} vs {dst_n})", path=path)
                for a in range(src_n):
                    builder.add(src_off + a, dst_off + a, syn, 1, where)

            elif rule == "prob":
                if not opts:
                    raise ParseError(f"{where}: prob needs a probability",
                                     path=path)
                p = float(opts[0])
                rule_seed = seed
                for tok in opts[1:]:
                    if tok.startswith("seed="):
                        rule_seed = int(tok[5:])
                    else:
                        raise ParseError(f"{where}: unknown option {tok!r}",
                                         path=path)
                rng = random.Random(rule_seed)
                for a in range(src_n):
                    for b in range(dst_n):
                        if rng.random() < p:
                            builder.add(src_off + a, dst_off + b, syn, 1, where)

            elif rule == "edges":
                while True:
                    if i >= len(lines):
                        raise ParseError(f"{where}: edges block missing 'end'",
                                         path=path)
                    sub = lines[i].split("#", 1)[0].strip()
                    subno = i + 1
                    i += 1
                    if not sub:
                        continue
                    if sub == "end":
                        break
                    parts = sub.split()
                    if len(parts) not in (2, 3):
                        raise ParseError(
                            f"line {subno}: edge needs 'src dst [mult]'",
                            path=path)
                    a, b = int(parts[0]), int(parts[1])
                    mult = int(parts[2]) if len(parts) == 3 else 1
                    if not 0 <= a < src_n or not 0 <= b < dst_n:
                        raise ParseError(
                            f"line {subno}: edge ({a},{b}) outside populations",
                            path=path)
                    builder.add(src_off + a, dst_off + b, syn, mult,
                                f"line {subno}")
            else:
                raise ParseError(f"{where}: unknown rule {rule!r}", path=path)
        else:
            raise ParseError(f"{where}: unknown keyword {kw!r}", path=path)

    return NetworkSpec(name=name, seed=seed, populations=populations,
                       edges=builder.edges)


def load_netlist(path) -> NetworkSpec:
    with open(path) as fp:
        return parse_netlist(fp.read(), path=str(path))


def format_netlist(spec: NetworkSpec) -> str:
    """Render a spec back to netlist text (explicit edge lists)."""
    out = [f"network {spec.name} seed={spec.seed}"]
    for pop in spec.populations:
        line = f"population {pop.name} {pop.size}"
        if pop.external:
            line += " external"
        if pop.params != "default":
            line += f" params={pop.params}"
        out.append(line)
    by_group: dict[tuple[str, str, SynType], list[Edge]] = {}
    for e in spec.edges:
        src_pop, si = spec.population_of(e.src)
        dst_pop, di = spec.population_of(e.dst)
        by_group.setdefault((src_pop.name, dst_pop.name, e.syn_type),
                            []).append(e)
    for (src, dst, syn), edges in sorted(
            by_group.items(), key=lambda kv: (kv[0][0], kv[0][1], int(kv[0][2]))):
        out.append(f"connect {src} {dst} {SYN_TO_NAME[syn]} edges")
        src_off = spec.gid(src, 0)
        dst_off = spec.gid(dst, 0)
        for e in edges:
            line = f"  {e.src - src_off} {e.dst - dst_off}"
            if e.mult != 1:
                line += f" {e.mult}"
            out.append(line)
        out.append("end")
    return "\n".join(out) + "\n"
