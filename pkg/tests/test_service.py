import warnings

import pytest

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    from fastapi.testclient import TestClient

from dynapsim.service import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


NETLIST = """
network svc seed=1
population a 16
population b 16
connect a b fast_exc one-to-one
connect b b sub_inh edges
  0 1
  1 0
end
"""


class TestHealth:
    def test_health(self, client):
        r = client.get("/health")
        assert r.status_code == 200
        assert r.json()["status"] == "ok"


class TestAnalyzeMemory:
    def test_single_point(self, client):
        r = client.post("/analyze-memory", json={
            "points": [{"n": 2 ** 20, "f": 2 ** 13, "c": 256}]})
        assert r.status_code == 200
        row = r.json()["rows"][0]
        assert row["flat_bits"] == 163840.0
        assert row["mem_total_bits"] == pytest.approx(2289.7336, abs=1e-3)
        assert row["feasible"]

    def test_grid_cross_product(self, client):
        r = client.post("/analyze-memory", json={
            "grid": {"n": [2 ** 16, 2 ** 20], "f": [1024], "c": [128, 256]}})
        assert r.status_code == 200
        body = r.json()
        assert len(body["rows"]) == 4
        assert body["tsv"].splitlines()[0].split("\t") == [
            "N", "F", "C", "K", "M*", "MEM_S", "MEM_T", "MEM", "flat",
            "feasible"]

    def test_empty_request_rejected(self, client):
        r = client.post("/analyze-memory", json={})
        assert r.status_code == 400
        assert r.json()["detail"]["category"] == "config"

    def test_artifact_written(self, client, tmp_path):
        r = client.post("/analyze-memory", json={
            "points": [{"n": 1024, "f": 64, "c": 64}],
            "out_dir": str(tmp_path)})
        assert r.status_code == 200
        report = tmp_path / "memory_report.tsv"
        assert report.exists()
        assert r.json()["tsv"] == report.read_text()


class TestCompile:
    def test_inline_netlist(self, client, tmp_path):
        r = client.post("/compile", json={
            "netlist_text": NETLIST, "out_dir": str(tmp_path)})
        assert r.status_code == 200
        body = r.json()
        assert body["network"] == "svc"
        assert body["n_neurons"] == 32
        assert body["validation"]["ok"]
        assert (tmp_path / "image.mem").exists()
        assert (tmp_path / "placement.tsv").exists()

    def test_bad_netlist_is_parse_error(self, client):
        r = client.post("/compile", json={"netlist_text": "bogus line\n"})
        assert r.status_code == 400
        assert r.json()["detail"]["category"] == "parse"

    def test_infeasible_is_resource_error(self, client):
        net = ("network big\npopulation a 3000\n")
        r = client.post("/compile", json={"netlist_text": net})
        assert r.status_code == 422
        assert r.json()["detail"]["category"] == "resource"

    def test_both_sources_rejected(self, client):
        r = client.post("/compile", json={
            "netlist_text": NETLIST, "netlist_path": "/nonexistent"})
        assert r.status_code == 400

    def test_missing_file_is_usage_error(self, client):
        r = client.post("/compile", json={"netlist_path": "/no/such.net"})
        assert r.status_code == 400
        assert r.json()["detail"]["category"] == "usage"


class TestSimulate:
    @pytest.fixture()
    def compiled(self, client, tmp_path):
        r = client.post("/compile", json={
            "netlist_text": NETLIST, "out_dir": str(tmp_path)})
        assert r.status_code == 200
        return tmp_path

    def test_stimulus_drive(self, client, compiled, tmp_path):
        # fire tags 0..15 at core (0,0): population a's sources
        stim = tmp_path / "stim.tsv"
        with open(stim, "w") as fp:
            fp.write("time_ns\tchip\tcore\ttag\n")
            for k in range(16):
                fp.write(f"{1000.0 * k}\t0\t0\t{k}\n")
        r = client.post("/simulate", json={
            "image_path": str(compiled / "image.mem"),
            "stimulus_path": str(stim),
            "until_ms": 5.0,
            "out_dir": str(tmp_path / "sim")})
        assert r.status_code == 200
        body = r.json()
        assert body["counters"]["events_injected"] == 16
        assert (tmp_path / "sim" / "stats.tsv").exists()
        assert (tmp_path / "sim" / "rasters.tsv").exists()

    def test_trace_artifact(self, client, compiled, tmp_path):
        stim = tmp_path / "stim.tsv"
        stim.write_text("0.0\t0\t0\t3\n")
        r = client.post("/simulate", json={
            "image_path": str(compiled / "image.mem"),
            "stimulus_path": str(stim),
            "until_ms": 1.0, "trace": True,
            "out_dir": str(tmp_path / "tr")})
        assert r.status_code == 200
        trace = (tmp_path / "tr" / "trace.tsv").read_text()
        assert trace.startswith("time_ns\tseq\tevent\tlocation")
        assert "ext_in" in trace

    def test_bad_stimulus_is_parse_error(self, client, tmp_path):
        stim = tmp_path / "bad.tsv"
        stim.write_text("not a stimulus\n")
        r = client.post("/simulate", json={
            "stimulus_path": str(stim), "until_ms": 1.0})
        assert r.status_code == 400
        assert r.json()["detail"]["category"] == "parse"

    def test_validation_error_on_bad_body(self, client):
        r = client.post("/simulate", json={"until_ms": -1.0})
        assert r.status_code == 422
