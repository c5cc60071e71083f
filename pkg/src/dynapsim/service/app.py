"""FastAPI service wrapping the simulator, compiler and memory model.

One process serves compile/simulate/analyze jobs for any number of
clients; the bundled CLI is one such client (in-process by default).
Endpoints are synchronous: jobs at desk scale finish in seconds to a few
minutes and callers get the summary in the response body, with artifact
files written server-side when ``out_dir`` is given.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
from pathlib import Path

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..config import FabricConfig, load_config
from ..compiler import emit_images, place, validate
from ..demo import run_demo_cnn
from ..errors import (
    ConfigError,
    DomainError,
    DynapsimError,
    ParseError,
    RangeError,
    ResourceError,
    SimulationError,
)
from ..fabric import Engine, read_stimulus_tsv
from ..memopt import NetParams, check_constraints, m_star, mem_flat, mem_two_stage
from ..netlist import load_netlist, parse_netlist
from ..packets import MemoryImage
from . import schemas

log = logging.getLogger("dynapsim.service")

MEMORY_TSV_COLUMNS = ("N", "F", "C", "K", "M*", "MEM_S", "MEM_T", "MEM",
                      "flat", "feasible")

_CATEGORIES = [
    (ParseError, "parse", 400),
    (ConfigError, "config", 400),
    (DomainError, "domain", 400),
    (RangeError, "range", 400),
    (ResourceError, "resource", 422),
    (SimulationError, "simulation", 500),
]


def _http_error(exc: DynapsimError) -> HTTPException:
    for etype, category, status in _CATEGORIES:
        if isinstance(exc, etype):
            return HTTPException(
                status_code=status,
                detail={"category": category, "message": str(exc)})
    return HTTPException(status_code=500,
                         detail={"category": "internal", "message": str(exc)})


def _memory_rows(req: schemas.MemoryAnalysisRequest) -> list[schemas.MemoryRow]:
    points: list[schemas.MemoryPoint] = list(req.points or [])
    if req.grid is not None:
        for n, f, c, alpha in itertools.product(req.grid.n, req.grid.f,
                                                req.grid.c, req.grid.alpha):
            points.append(schemas.MemoryPoint(n=n, f=f, c=c, alpha=alpha))
    if not points:
        raise ConfigError("memory analysis needs points or a grid")
    rows = []
    for pt in points:
        ms = m_star(pt.n, pt.f, pt.c, pt.alpha)
        m = pt.m if pt.m is not None else ms.value
        params = NetParams(n=pt.n, f=pt.f, c=pt.c, m=m, alpha=pt.alpha)
        report = mem_two_stage(params, hardware_bits=req.hardware_bits)
        violations = check_constraints(params)
        rows.append(schemas.MemoryRow(
            n=pt.n, f=pt.f, c=pt.c, k=params.k, m_star=ms.value,
            mem_source_bits=report.mem_source_bits,
            mem_target_bits=report.mem_target_bits,
            mem_total_bits=report.mem_total_bits,
            flat_bits=mem_flat(pt.n, pt.f),
            feasible=not violations,
            violations=[v.name for v in violations]))
    return rows


def _memory_tsv(rows: list[schemas.MemoryRow]) -> str:
    out = ["\t".join(MEMORY_TSV_COLUMNS)]
    for r in rows:
        out.append("\t".join([
            f"{r.n:g}", f"{r.f:g}", f"{r.c:g}", f"{r.k:g}",
            f"{r.m_star:.3f}", f"{r.mem_source_bits:.3f}",
            f"{r.mem_target_bits:.3f}", f"{r.mem_total_bits:.3f}",
            f"{r.flat_bits:.3f}", "yes" if r.feasible else "no"]))
    return "\n".join(out) + "\n"


def create_app() -> FastAPI:
    app = FastAPI(title="dynapsim", version=__version__,
                  description="Neuromorphic fabric simulation service")

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/analyze-memory", response_model=schemas.MemoryAnalysisResponse)
    def analyze_memory(req: schemas.MemoryAnalysisRequest,
                       ) -> schemas.MemoryAnalysisResponse:
        try:
            rows = _memory_rows(req)
        except DynapsimError as exc:
            raise _http_error(exc)
        tsv = _memory_tsv(rows)
        artifacts = {}
        if req.out_dir:
            out = Path(req.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            path = out / "memory_report.tsv"
            path.write_text(tsv)
            artifacts["report"] = str(path)
        return schemas.MemoryAnalysisResponse(rows=rows, tsv=tsv,
                                              artifacts=artifacts)

    @app.post("/compile", response_model=schemas.CompileResponse)
    def compile_network(req: schemas.CompileRequest) -> schemas.CompileResponse:
        try:
            if (req.netlist_text is None) == (req.netlist_path is None):
                raise ConfigError(
                    "exactly one of netlist_text or netlist_path is required")
            if req.netlist_text is not None:
                net = parse_netlist(req.netlist_text)
            else:
                net = load_netlist(req.netlist_path)
            cfg = (load_config(req.config_path) if req.config_path
                   else FabricConfig())
            placement = place(net, cfg, seed=req.seed)
            image = emit_images(placement)
            report = validate(placement, net)
        except FileNotFoundError as exc:
            raise HTTPException(status_code=400, detail={
                "category": "usage", "message": str(exc)})
        except DynapsimError as exc:
            raise _http_error(exc)

        artifacts = {}
        if req.out_dir:
            out = Path(req.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            with open(out / "image.mem", "w") as fp:
                image.dump(fp)
            with open(out / "placement.tsv", "w") as fp:
                fp.write("gid\tchip\tcore\tneuron\n")
                for gid in sorted(placement.neuron_loc):
                    chip, core, local = placement.neuron_loc[gid]
                    fp.write(f"{gid}\t{chip}\t{core}\t{local}\n")
            artifacts = {"image": str(out / "image.mem"),
                         "placement": str(out / "placement.tsv")}

        n_external = sum(p.size for p in net.populations if p.external)
        log.info("compiled %s: %d neurons on %d cores",
                 net.name, len(placement.neuron_loc),
                 len(placement.core_members))
        return schemas.CompileResponse(
            network=net.name,
            n_neurons=len(placement.neuron_loc),
            n_external=n_external,
            n_edges=len(net.edges),
            n_cores=len(placement.core_members),
            n_chips=len({chip for chip, _ in placement.core_members}),
            sram_words=len(image.sram),
            cam_words=len(image.cam),
            validation=schemas.ValidationSummary(
                ok=report.ok,
                missing_edges=len(report.missing),
                spurious_edges=len(report.spurious),
                type_mismatched=len(report.type_mismatched),
                n_placed=report.n_placed,
                bits_used_avg=report.bits_used_avg,
                bits_provisioned=report.bits_provisioned,
                eq2_prediction_bits=report.eq2_prediction_bits),
            artifacts=artifacts)

    @app.post("/simulate", response_model=schemas.SimulateResponse)
    def simulate(req: schemas.SimulateRequest) -> schemas.SimulateResponse:
        try:
            cfg = (load_config(req.config_path) if req.config_path
                   else FabricConfig())
            overrides = {}
            if req.seed is not None:
                overrides["seed"] = req.seed
            if req.throttle_io is not None:
                overrides["throttle_io"] = req.throttle_io
            if overrides:
                cfg = dataclasses.replace(cfg, **overrides)
            engine = Engine(cfg, trace=req.trace)
            if req.image_path:
                with open(req.image_path) as fp:
                    engine.load_image(MemoryImage.load(fp, path=req.image_path))
            if req.stimulus_path:
                with open(req.stimulus_path) as fp:
                    engine.inject_external(
                        read_stimulus_tsv(fp, path=req.stimulus_path))
            stats = engine.run_until(req.until_ms * 1e6)
        except FileNotFoundError as exc:
            raise HTTPException(status_code=400, detail={
                "category": "usage", "message": str(exc)})
        except DynapsimError as exc:
            raise _http_error(exc)

        artifacts = {}
        if req.out_dir:
            out = Path(req.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / "stats.tsv").write_text(stats.to_tsv())
            (out / "rasters.tsv").write_text(engine.raster_tsv())
            artifacts = {"stats": str(out / "stats.tsv"),
                         "rasters": str(out / "rasters.tsv")}
            if req.trace:
                (out / "trace.tsv").write_text(engine.trace_tsv())
                artifacts["trace"] = str(out / "trace.tsv")
        return schemas.SimulateResponse(
            t_ns=stats.t_ns, counters=stats.counters,
            energy_pj=stats.energy_pj,
            n_spikes=stats.counters["spikes"],
            artifacts=artifacts)

    @app.post("/demo-cnn", response_model=schemas.DemoCnnResponse)
    def demo_cnn(req: schemas.DemoCnnRequest) -> schemas.DemoCnnResponse:
        try:
            result = run_demo_cnn(req.out_dir, seed=req.seed,
                                  n_test_per_class=req.n_test_per_class,
                                  trace=req.trace)
        except DynapsimError as exc:
            raise _http_error(exc)
        decided = [d for d in result.first_decision_ms if d is not None]
        return schemas.DemoCnnResponse(
            accuracy=result.accuracy,
            n_correct=result.n_correct,
            n_total=result.n_total,
            labels=result.labels,
            truths=result.truths,
            first_decision_ms=result.first_decision_ms,
            max_first_decision_ms=max(decided) if decided else None,
            energy_pj=result.energy_pj,
            sim_time_ms=result.sim_time_ms,
            artifacts=result.artifacts)

    return app
