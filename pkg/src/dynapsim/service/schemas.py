"""Request/response models of the HTTP service.

File paths in requests are resolved on the service host; the bundled CLI
runs the app in-process, so client and service share one filesystem.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


# -- memory analysis ----------------------------------------------------------


class MemoryPoint(BaseModel):
    n: float = Field(gt=0, description="total neuron count")
    f: float = Field(gt=0, description="fan-out per neuron")
    c: float = Field(gt=0, description="cluster (core) size")
    alpha: float = Field(default=1.0, gt=0, description="tags per cluster / C")
    m: float | None = Field(default=None, gt=0,
                            description="within-cluster fan-out; default M*")


class MemoryGrid(BaseModel):
    """Cross product of parameter lists, one analysis row per combination."""

    n: list[float]
    f: list[float]
    c: list[float]
    alpha: list[float] = [1.0]


class MemoryAnalysisRequest(BaseModel):
    points: list[MemoryPoint] | None = None
    grid: MemoryGrid | None = None
    hardware_bits: bool = False
    out_dir: str | None = None


class MemoryRow(BaseModel):
    n: float
    f: float
    c: float
    k: float
    m_star: float
    mem_source_bits: float
    mem_target_bits: float
    mem_total_bits: float
    flat_bits: float
    feasible: bool
    violations: list[str] = []


class MemoryAnalysisResponse(BaseModel):
    rows: list[MemoryRow]
    tsv: str
    artifacts: dict[str, str] = {}


# -- compilation --------------------------------------------------------------


class CompileRequest(BaseModel):
    netlist_text: str | None = None
    netlist_path: str | None = None
    config_path: str | None = None
    seed: int = 0
    out_dir: str | None = None


class ValidationSummary(BaseModel):
    ok: bool
    missing_edges: int
    spurious_edges: int
    type_mismatched: int
    n_placed: int
    bits_used_avg: float
    bits_provisioned: int
    eq2_prediction_bits: float


class CompileResponse(BaseModel):
    network: str
    n_neurons: int
    n_external: int
    n_edges: int
    n_cores: int
    n_chips: int
    sram_words: int
    cam_words: int
    validation: ValidationSummary
    artifacts: dict[str, str] = {}


# -- simulation ---------------------------------------------------------------


class SimulateRequest(BaseModel):
    config_path: str | None = None
    image_path: str | None = None
    stimulus_path: str | None = None
    until_ms: float = Field(default=10.0, gt=0)
    seed: int | None = None
    throttle_io: bool | None = None
    trace: bool = False
    out_dir: str | None = None


class SimulateResponse(BaseModel):
    t_ns: float
    counters: dict[str, int]
    energy_pj: float
    n_spikes: int
    artifacts: dict[str, str] = {}


# -- CNN demo -----------------------------------------------------------------


class DemoCnnRequest(BaseModel):
    out_dir: str
    seed: int = 7
    n_test_per_class: int = Field(default=10, ge=1, le=50)
    trace: bool = False


class DemoCnnResponse(BaseModel):
    accuracy: float
    n_correct: int
    n_total: int
    labels: list[int | None]
    truths: list[int]
    first_decision_ms: list[float | None]
    max_first_decision_ms: float | None
    energy_pj: float
    sim_time_ms: float
    artifacts: dict[str, str] = {}


class ErrorDetail(BaseModel):
    category: str
    message: str
