"""Bit-exact domain types for routing words, CAM entries and in-flight packets.

The fabric programs two kinds of memory words:

* a 20-bit SRAM routing word per source-neuron fan-out slot, and
* a 12-bit CAM word (10-bit tag + 2-bit synapse type) per destination synapse.

The packed layouts are fixed here so that memory-image files are portable:

==============  ==========  =============================================
field           bits        meaning
==============  ==========  =============================================
tag             0..9        10-bit tag id shared by source and subscribers
core            10..13      4-bit destination core id on the target chip
dx              14..15      remaining mesh hops along X
dy              16..17      remaining mesh hops along Y
sx              18          X direction: 0 = +X (east), 1 = -X (west)
sy              19          Y direction: 0 = +Y (north), 1 = -Y (south)
==============  ==========  =============================================

CAM words place the tag in bits 0..9 and the synapse type in bits 10..11.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, TextIO

from .errors import EncodingError, ParseError, RangeError

TAG_BITS = 10
CORE_BITS = 4
HOP_BITS = 2

TAG_MAX = (1 << TAG_BITS) - 1
CORE_MAX = (1 << CORE_BITS) - 1
HOP_MAX = (1 << HOP_BITS) - 1

ROUTING_WORD_BITS = 20
CAM_WORD_BITS = 12

SRAM_SLOTS_PER_NEURON = 4
CAM_SLOTS_PER_NEURON = 64


class SynType(enum.IntEnum):
    """The four synapse behaviors selectable by the 2-bit CAM type field."""

    FAST_EXC = 0
    SLOW_EXC = 1
    SUB_INH = 2
    SHUNT_INH = 3

    @property
    def is_excitatory(self) -> bool:
        return self in (SynType.FAST_EXC, SynType.SLOW_EXC)


def _check(field_name: str, value: int, width: int) -> int:
    if not 0 <= value < (1 << width):
        raise EncodingError(field_name, value, width)
    return value


@dataclass(frozen=True)
class RoutingWord:
    """One 20-bit SRAM fan-out entry of a source neuron."""

    tag: int
    core: int
    dx: int = 0
    dy: int = 0
    sx: int = 0
    sy: int = 0

    def __post_init__(self):
        _check("tag", self.tag, TAG_BITS)
        _check("core", self.core, CORE_BITS)
        _check("dx", self.dx, HOP_BITS)
        _check("dy", self.dy, HOP_BITS)
        _check("sx", self.sx, 1)
        _check("sy", self.sy, 1)

    @property
    def is_local_chip(self) -> bool:
        return self.dx == 0 and self.dy == 0

    def chip_offset(self) -> tuple[int, int]:
        """Signed (x, y) chip displacement encoded by the mesh header."""
        ox = self.dx if self.sx == 0 else -self.dx
        oy = self.dy if self.sy == 0 else -self.dy
        return ox, oy


@dataclass(frozen=True)
class CamEntry:
    """One 12-bit subscriber word: source tag plus synapse class."""

    tag: int
    syn_type: SynType

    def __post_init__(self):
        _check("tag", self.tag, TAG_BITS)
        _check("syn_type", int(self.syn_type), 2)


@dataclass(frozen=True)
class Packet:
    """An in-flight address event.

    ``fanout_hdr`` is the remaining-copy counter appended by the R1 input
    stage: a value of h causes h+1 SRAM reads, so 2 bits encode 1..4 copies.
    ``seq`` is unique per run and breaks all timestamp ties, which is what
    makes merges deterministic.
    """

    tag: int
    core: int
    dx: int
    dy: int
    sx: int
    sy: int
    fanout_hdr: int = 0
    src: tuple[int, int, int] = (0, 0, 0)  # (chip, core, neuron) provenance
    seq: int = 0

    def __post_init__(self):
        _check("tag", self.tag, TAG_BITS)
        _check("core", self.core, CORE_BITS)
        _check("dx", self.dx, HOP_BITS)
        _check("dy", self.dy, HOP_BITS)
        _check("sx", self.sx, 1)
        _check("sy", self.sy, 1)
        _check("fanout_hdr", self.fanout_hdr, HOP_BITS)

    def with_hop_x(self) -> "Packet":
        """Consume one X hop; decrements are always by exactly 1."""
        return replace(self, dx=self.dx - 1)

    def with_hop_y(self) -> "Packet":
        return replace(self, dy=self.dy - 1)

    @classmethod
    def from_routing_word(cls, word: RoutingWord, *, src: tuple[int, int, int],
                          fanout_hdr: int, seq: int) -> "Packet":
        return cls(tag=word.tag, core=word.core, dx=word.dx, dy=word.dy,
                   sx=word.sx, sy=word.sy, fanout_hdr=fanout_hdr,
                   src=src, seq=seq)


def encode_routing_word(word: RoutingWord) -> int:
    """Pack a routing word into its 20-bit integer image."""
    return (word.tag
            | word.core << 10
            | word.dx << 14
            | word.dy << 16
            | word.sx << 18
            | word.sy << 19)


def decode_routing_word(value: int) -> RoutingWord:
    """Unpack a 20-bit integer; inverse of :func:`encode_routing_word`."""
    if not 0 <= value < (1 << ROUTING_WORD_BITS):
        raise RangeError(f"routing word {value:#x} outside 20-bit range")
    return RoutingWord(tag=value & TAG_MAX,
                       core=(value >> 10) & CORE_MAX,
                       dx=(value >> 14) & HOP_MAX,
                       dy=(value >> 16) & HOP_MAX,
                       sx=(value >> 18) & 1,
                       sy=(value >> 19) & 1)


def encode_cam_entry(entry: CamEntry) -> int:
    """Pack a CAM entry into its 12-bit integer image."""
    return entry.tag | int(entry.syn_type) << 10


def decode_cam_entry(value: int) -> CamEntry:
    """Unpack a 12-bit integer; inverse of :func:`encode_cam_entry`."""
    if not 0 <= value < (1 << CAM_WORD_BITS):
        raise RangeError(f"CAM word {value:#x} outside 12-bit range")
    return CamEntry(tag=value & TAG_MAX, syn_type=SynType((value >> 10) & 3))


# --------------------------------------------------------------------------
# Memory-image files
#
# One line per programmed word:
#
#   chip:core:neuron:slot = 0xHHHHH     (SRAM routing word, 5 hex digits)
#   chip:core:neuron:slot = 0xHHH       (CAM entry, 3 hex digits)
#
# The hex width is significant: exactly 5 digits for routing words, exactly
# 3 for CAM entries. Chips are numbered row-major on the mesh. Blank lines
# and '#' comments are ignored.
# --------------------------------------------------------------------------

_LINE_RE = re.compile(
    r"^(\d+):(\d+):(\d+):(\d+)\s*=\s*0x([0-9a-fA-F]+)$")

Key = tuple[int, int, int, int]  # (chip, core, neuron, slot)


@dataclass
class MemoryImage:
    """The bit-exact programming image of every SRAM and CAM word."""

    sram: dict[Key, int] = field(default_factory=dict)
    cam: dict[Key, int] = field(default_factory=dict)

    def set_routing_word(self, chip: int, core: int, neuron: int, slot: int,
                         word: RoutingWord) -> None:
        if not 0 <= slot < SRAM_SLOTS_PER_NEURON:
            raise RangeError(f"SRAM slot {slot} outside 0..{SRAM_SLOTS_PER_NEURON - 1}")
        self.sram[(chip, core, neuron, slot)] = encode_routing_word(word)

    def set_cam_entry(self, chip: int, core: int, neuron: int, slot: int,
                      entry: CamEntry) -> None:
        if not 0 <= slot < CAM_SLOTS_PER_NEURON:
            raise RangeError(f"CAM slot {slot} outside 0..{CAM_SLOTS_PER_NEURON - 1}")
        self.cam[(chip, core, neuron, slot)] = encode_cam_entry(entry)

    def routing_words(self) -> Iterable[tuple[Key, RoutingWord]]:
        for key in sorted(self.sram):
            yield key, decode_routing_word(self.sram[key])

    def cam_entries(self) -> Iterable[tuple[Key, CamEntry]]:
        for key in sorted(self.cam):
            yield key, decode_cam_entry(self.cam[key])

    def dump(self, fp: TextIO) -> None:
        fp.write("# memory image: chip:core:neuron:slot = word\n")
        fp.write("# 5 hex digits = SRAM routing word, 3 hex digits = CAM entry\n")
        for key in sorted(self.sram):
            chip, core, neuron, slot = key
            fp.write(f"{chip}:{core}:{neuron}:{slot} = 0x{self.sram[key]:05X}\n")
        for key in sorted(self.cam):
            chip, core, neuron, slot = key
            fp.write(f"{chip}:{core}:{neuron}:{slot} = 0x{self.cam[key]:03X}\n")

    def dumps(self) -> str:
        import io

        buf = io.StringIO()
        self.dump(buf)
        return buf.getvalue()

    @classmethod
    def load(cls, fp: TextIO, *, path: str | None = None) -> "MemoryImage":
        image = cls()
        for lineno, raw in enumerate(fp, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            m = _LINE_RE.match(line)
            if m is None:
                raise ParseError(f"malformed image line {raw.strip()!r}",
                                 path=path, line=lineno)
            chip, core, neuron, slot = (int(m.group(i)) for i in range(1, 5))
            digits = m.group(5)
            value = int(digits, 16)
            key = (chip, core, neuron, slot)
            if len(digits) == 5:
                if value >= 1 << ROUTING_WORD_BITS:
                    raise ParseError(f"routing word 0x{digits} exceeds 20 bits",
                                     path=path, line=lineno)
                if slot >= SRAM_SLOTS_PER_NEURON:
                    raise ParseError(f"SRAM slot {slot} outside 0..3",
                                     path=path, line=lineno)
                image.sram[key] = value
            elif len(digits) == 3:
                if slot >= CAM_SLOTS_PER_NEURON:
                    raise ParseError(f"CAM slot {slot} outside 0..63",
                                     path=path, line=lineno)
                image.cam[key] = value
            else:
                raise ParseError(
                    f"word 0x{digits} has {len(digits)} hex digits; "
                    "expected 5 (SRAM) or 3 (CAM)", path=path, line=lineno)
        return image

    @classmethod
    def loads(cls, text: str) -> "MemoryImage":
        import io

        return cls.load(io.StringIO(text))
