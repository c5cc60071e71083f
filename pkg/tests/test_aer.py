import random

import pytest

from dynapsim.aer import AerEvent, ingest_aer, write_aer
from dynapsim.errors import ParseError


def random_events(rng, n, sensor=32):
    return [AerEvent(t_us=rng.randrange(0, 10_000_000),
                     x=rng.randrange(sensor), y=rng.randrange(sensor),
                     polarity=rng.choice([-1, 1])) for _ in range(n)]


class TestCsv:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("")
        assert ingest_aer(path, "csv") == []

    def test_single_event(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("100,3,4,1\n")
        assert ingest_aer(path, "csv") == [AerEvent(t_us=100, x=3, y=4,
                                                    polarity=1)]

    def test_sorted_by_timestamp(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("200,0,0,1\n100,1,1,-1\n")
        events = ingest_aer(path, "csv")
        assert [e.t_us for e in events] == [100, 200]

    def test_bad_field_count(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("100,3,4\n")
        with pytest.raises(ParseError) as exc:
            ingest_aer(path, "csv")
        assert "line 1" in str(exc.value)

    def test_bad_polarity(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("100,3,4,2\n")
        with pytest.raises(ParseError):
            ingest_aer(path, "csv")

    def test_sensor_bounds(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("100,40,4,1\n")
        with pytest.raises(ParseError):
            ingest_aer(path, "csv", sensor_size=(32, 32))
        assert len(ingest_aer(path, "csv", sensor_size=(64, 64))) == 1


class TestBinary:
    def test_roundtrip_random(self, tmp_path):
        rng = random.Random(8)
        events = sorted(random_events(rng, 10_000), key=lambda e: e.t_us)
        path = tmp_path / "e.bin"
        write_aer(events, path, "binary-v1")
        assert ingest_aer(path, "binary-v1") == events

    def test_csv_roundtrip_random(self, tmp_path):
        rng = random.Random(9)
        events = sorted(random_events(rng, 10_000), key=lambda e: e.t_us)
        path = tmp_path / "e.csv"
        write_aer(events, path, "csv")
        assert ingest_aer(path, "csv") == events

    def test_truncated_record_reports_offset(self, tmp_path):
        path = tmp_path / "e.bin"
        write_aer([AerEvent(t_us=5, x=1, y=2, polarity=1)], path, "binary-v1")
        data = path.read_bytes()
        path.write_bytes(data + b"\x01\x02")  # 2 trailing bytes
        with pytest.raises(ParseError) as exc:
            ingest_aer(path, "binary-v1")
        assert exc.value.offset == 9

    def test_bad_polarity_reports_offset(self, tmp_path):
        import struct

        path = tmp_path / "e.bin"
        good = struct.pack("<IHHb", 1, 2, 3, 1)
        bad = struct.pack("<IHHb", 2, 2, 3, 5)
        path.write_bytes(good + bad)
        with pytest.raises(ParseError) as exc:
            ingest_aer(path, "binary-v1")
        assert exc.value.offset == 9

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ParseError):
            ingest_aer(tmp_path / "x", "aedat")
