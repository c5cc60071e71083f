import io

import pytest
from hypothesis import given, strategies as st

from dynapsim.errors import EncodingError, ParseError, RangeError
from dynapsim.packets import (
    CamEntry,
    MemoryImage,
    Packet,
    RoutingWord,
    SynType,
    decode_cam_entry,
    decode_routing_word,
    encode_cam_entry,
    encode_routing_word,
)


def test_zero_word_encodes_to_zero():
    assert encode_routing_word(RoutingWord(tag=0, core=0)) == 0x00000


def test_all_ones_word_encodes_to_fffff():
    word = RoutingWord(tag=1023, core=15, dx=3, dy=3, sx=1, sy=1)
    assert encode_routing_word(word) == 0xFFFFF


def test_decode_zero():
    assert decode_routing_word(0x00000) == RoutingWord(tag=0, core=0)


def test_decode_tag_field_only():
    # 0x003FF covers exactly bits 0..9
    word = decode_routing_word(0x003FF)
    assert word == RoutingWord(tag=1023, core=0, dx=0, dy=0, sx=0, sy=0)


def test_routing_word_roundtrip_exhaustive():
    # encode(decode(v)) == v over the full 20-bit domain
    for v in range(1 << 20):
        assert encode_routing_word(decode_routing_word(v)) == v


@given(tag=st.integers(0, 1023), core=st.integers(0, 15),
       dx=st.integers(0, 3), dy=st.integers(0, 3),
       sx=st.integers(0, 1), sy=st.integers(0, 1))
def test_routing_word_roundtrip_random(tag, core, dx, dy, sx, sy):
    word = RoutingWord(tag=tag, core=core, dx=dx, dy=dy, sx=sx, sy=sy)
    assert decode_routing_word(encode_routing_word(word)) == word


@pytest.mark.parametrize("kwargs,bad_field", [
    (dict(tag=1024, core=0), "tag"),
    (dict(tag=0, core=16), "core"),
    (dict(tag=0, core=0, dx=4), "dx"),
    (dict(tag=0, core=0, dy=-1), "dy"),
    (dict(tag=0, core=0, sx=2), "sx"),
])
def test_field_overflow_names_the_field(kwargs, bad_field):
    with pytest.raises(EncodingError) as exc:
        RoutingWord(**kwargs)
    assert exc.value.field == bad_field


def test_decode_out_of_range():
    with pytest.raises(RangeError):
        decode_routing_word(1 << 20)
    with pytest.raises(RangeError):
        decode_routing_word(-1)


def test_cam_entry_zero():
    assert encode_cam_entry(CamEntry(tag=0, syn_type=SynType.FAST_EXC)) == 0x000


def test_cam_entry_shunting():
    assert encode_cam_entry(CamEntry(tag=5, syn_type=SynType.SHUNT_INH)) == 0xC05


def test_cam_roundtrip_exhaustive():
    for v in range(1 << 12):
        assert encode_cam_entry(decode_cam_entry(v)) == v


def test_syn_type_has_exactly_four_variants():
    assert [t.value for t in SynType] == [0, 1, 2, 3]
    assert SynType.FAST_EXC.is_excitatory
    assert SynType.SLOW_EXC.is_excitatory
    assert not SynType.SUB_INH.is_excitatory
    assert not SynType.SHUNT_INH.is_excitatory


def test_packet_hop_decrements_by_one():
    p = Packet(tag=7, core=2, dx=2, dy=1, sx=0, sy=1, seq=1)
    q = p.with_hop_x()
    assert (q.dx, q.dy) == (1, 1)
    r = q.with_hop_x().with_hop_y()
    assert (r.dx, r.dy) == (0, 0)
    with pytest.raises(EncodingError):
        r.with_hop_x()  # cannot go below zero


def test_chip_offset_sign_convention():
    # sx=0 means +X (east), sy=0 means +Y (north)
    assert RoutingWord(tag=0, core=0, dx=2, dy=1, sx=0, sy=0).chip_offset() == (2, 1)
    assert RoutingWord(tag=0, core=0, dx=2, dy=1, sx=1, sy=1).chip_offset() == (-2, -1)


class TestMemoryImage:
    def test_roundtrip(self):
        image = MemoryImage()
        image.set_routing_word(0, 1, 37, 2, RoutingWord(tag=511, core=3, dx=1, sy=1))
        image.set_cam_entry(1, 0, 255, 63, CamEntry(tag=511, syn_type=SynType.SLOW_EXC))
        text = image.dumps()
        back = MemoryImage.loads(text)
        assert back.sram == image.sram
        assert back.cam == image.cam

    def test_dump_is_sorted_and_stable(self):
        image = MemoryImage()
        image.set_cam_entry(0, 0, 2, 0, CamEntry(tag=9, syn_type=SynType.FAST_EXC))
        image.set_cam_entry(0, 0, 1, 0, CamEntry(tag=9, syn_type=SynType.FAST_EXC))
        a = image.dumps()
        assert a == image.dumps()
        assert a.index("0:0:1:0") < a.index("0:0:2:0")

    def test_rejects_wrong_width(self):
        with pytest.raises(ParseError):
            MemoryImage.loads("0:0:0:0 = 0x1FFF\n")  # 4 digits: neither 3 nor 5

    def test_rejects_oversized_routing_word(self):
        with pytest.raises(ParseError):
            MemoryImage.loads("0:0:0:0 = 0xFFFFFF\n")

    def test_rejects_malformed_line(self):
        with pytest.raises(ParseError) as exc:
            MemoryImage.load(io.StringIO("0:0:0 = 0x00000\n"), path="img.mem")
        assert "img.mem" in str(exc.value)

    def test_rejects_bad_slots(self):
        with pytest.raises(ParseError):
            MemoryImage.loads("0:0:0:4 = 0x00000\n")  # SRAM slot > 3
        with pytest.raises(ParseError):
            MemoryImage.loads("0:0:0:64 = 0x000\n")  # CAM slot > 63

    def test_comments_and_blanks_ignored(self):
        text = "# header\n\n0:0:0:0 = 0x00FA1  # inline\n"
        image = MemoryImage.loads(text)
        assert image.sram == {(0, 0, 0, 0): 0x00FA1}
