"""Analytic model of two-stage routing memory and its feasibility constraints.

A network of N neurons with fan-out F is mapped onto N/C clusters of C
neurons. Each source stores F/M point-to-point entries (stage 1); each
destination cluster filters broadcasts through K tags, M subscribers per
tag (stage 2). Per-neuron memory splits into a source part

    MEM_S = (F/M) * (log2 K + log2(N/C))

and a target part

    MEM_T = (K*M/C) * log2 K

whose sum, with K = alpha*C, is minimized over M at

    M* = sqrt((F/alpha) * log2(alpha*N) / log2(alpha*C))

giving MEM = 2*sqrt(alpha*F * log2(alpha*C) * log2(alpha*N)).

All formulas are evaluated in real arithmetic; integer design points are
reported as the floor/ceil pair around M*. ``hardware_bits=True`` applies
ceilings to the individual log2 terms for bit-width budgeting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DomainError

__all__ = [
    "NetParams", "MemReport", "MStar", "Violation",
    "mem_flat", "mem_two_stage", "m_star", "mem_at_optimum",
    "check_constraints", "min_cluster_size", "scaling_table",
]


def _log2(x: float, what: str) -> float:
    if x <= 0:
        raise DomainError(f"log2 argument {what} = {x} must be positive")
    return math.log2(x)


@dataclass(frozen=True)
class NetParams:
    """A two-stage design point.

    Either ``alpha`` or ``k`` may be given; the other is derived from
    K = alpha * C. M is the within-cluster fan-out of the design point.
    """

    n: float
    f: float
    c: float
    m: float
    alpha: float | None = None
    k: float | None = None

    def __post_init__(self):
        for name in ("n", "f", "c", "m"):
            if getattr(self, name) <= 0:
                raise DomainError(f"parameter {name} must be positive, got "
                                  f"{getattr(self, name)}")
        if self.alpha is None and self.k is None:
            object.__setattr__(self, "alpha", 1.0)
        if self.alpha is None:
            object.__setattr__(self, "alpha", self.k / self.c)
        elif self.k is None:
            object.__setattr__(self, "k", self.alpha * self.c)
        elif not math.isclose(self.k, self.alpha * self.c, rel_tol=1e-9):
            raise DomainError(f"k={self.k} inconsistent with alpha*c="
                              f"{self.alpha * self.c}")
        if self.alpha <= 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")

    @property
    def tags(self) -> float:
        return self.k

    def with_m(self, m: float) -> "NetParams":
        return NetParams(n=self.n, f=self.f, c=self.c, m=m, alpha=self.alpha)


@dataclass(frozen=True)
class Violation:
    """One violated feasibility requirement, with its numeric margin."""

    name: str
    detail: str
    margin: float           # lhs - rhs of the requirement; negative when violated
    min_cluster_size: float  # smallest C that would satisfy it, other params fixed


@dataclass(frozen=True)
class MemReport:
    """Per-neuron memory of a design point, in bits."""

    mem_source_bits: float
    mem_target_bits: float
    mem_total_bits: float
    m_star: float
    feasible: bool
    violations: tuple[Violation, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class MStar:
    """Continuous optimum of the stage trade-off plus its integer candidates."""

    value: float
    floor: int
    ceil: int

    def best_integer(self, params: NetParams) -> int:
        """The MEM-minimizing integer neighbor of the continuous optimum.

        The memory curve A/M + B*M is strictly convex in M, so its global
        integer minimum is always floor(M*) or ceil(M*), but not necessarily
        the nearer of the two.
        """
        lo = max(1, self.floor)
        hi = max(1, self.ceil)
        if lo == hi:
            return lo
        mem_lo = mem_two_stage(params.with_m(lo), check=False).mem_total_bits
        mem_hi = mem_two_stage(params.with_m(hi), check=False).mem_total_bits
        return lo if mem_lo <= mem_hi else hi


def mem_flat(n: float, f: float) -> float:
    """Bits/neuron of a flat one-stage table: F entries of log2(N) bits."""
    if n < 2:
        raise DomainError(f"flat scheme needs n >= 2, got {n}")
    if f < 1:
        raise DomainError(f"fan-out must be >= 1, got {f}")
    return f * math.log2(n)


def _split(params: NetParams, hardware_bits: bool) -> tuple[float, float]:
    tag_bits = _log2(params.k, "K")
    node_bits = _log2(params.n / params.c, "N/C")
    if hardware_bits:
        tag_bits = math.ceil(tag_bits)
        node_bits = math.ceil(node_bits)
    mem_s = (params.f / params.m) * (tag_bits + node_bits)
    mem_t = (params.k * params.m / params.c) * tag_bits
    return mem_s, mem_t


def mem_two_stage(params: NetParams, *, hardware_bits: bool = False,
                  check: bool = True) -> MemReport:
    """Evaluate the two-stage memory split at a concrete design point."""
    mem_s, mem_t = _split(params, hardware_bits)
    try:
        ms = m_star(params.n, params.f, params.c, params.alpha).value
    except DomainError:
        ms = float("nan")
    violations = check_constraints(params) if check else []
    return MemReport(mem_source_bits=mem_s,
                     mem_target_bits=mem_t,
                     mem_total_bits=mem_s + mem_t,
                     m_star=ms,
                     feasible=not violations,
                     violations=tuple(violations))


def m_star(n: float, f: float, c: float, alpha: float = 1.0) -> MStar:
    """Continuous M minimizing total memory, with its integer neighbors."""
    if n <= 0 or f <= 0 or c <= 0 or alpha <= 0:
        raise DomainError("n, f, c, alpha must all be positive")
    if alpha * c <= 1:
        raise DomainError(f"alpha*C = {alpha * c} must exceed 1 "
                          "(log2 would be non-positive)")
    value = math.sqrt((f / alpha) * _log2(alpha * n, "alpha*N")
                      / _log2(alpha * c, "alpha*C"))
    return MStar(value=value, floor=math.floor(value), ceil=math.ceil(value))


def mem_at_optimum(n: float, f: float, c: float, alpha: float = 1.0) -> float:
    """Closed-form bits/neuron at M = M*: 2*sqrt(aF log2(aC) log2(aN))."""
    if alpha * c <= 1:
        raise DomainError(f"alpha*C = {alpha * c} must exceed 1")
    return 2.0 * math.sqrt(alpha * f * _log2(alpha * c, "alpha*C")
                           * _log2(alpha * n, "alpha*N"))


def min_cluster_size(n: float, f: float, alpha: float = 1.0) -> tuple[float, float]:
    """Smallest C satisfying each optimality requirement, other params fixed.

    Requirement 1 (F >= M*) reduces to C >= (alpha*N)^(1/(alpha*F)) / alpha.
    Requirement 2 (C >= M*) has no closed form in C; it is solved numerically.
    """
    c1 = (alpha * n) ** (1.0 / (alpha * f)) / alpha

    # requirement 2: alpha * C^2 * log2(alpha*C) >= F * log2(alpha*N)
    rhs = f * _log2(alpha * n, "alpha*N")

    def ok(c: float) -> bool:
        return alpha * c > 1 and alpha * c * c * math.log2(alpha * c) >= rhs

    lo, hi = 1.0 / alpha, 2.0 / alpha
    while not ok(hi):
        hi *= 2
    for _ in range(200):
        mid = (lo + hi) / 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return c1, hi


def check_constraints(params: NetParams) -> list[Violation]:
    """Report every violated requirement of the optimal design point.

    Requirement 1: F >= M*; requirement 2: C >= M*. Both are evaluated in
    their explicit forms; a design also needs M <= F and M <= C for the
    chosen M itself. Reports, never raises, for positive parameters.
    """
    n, f, c, alpha, m = params.n, params.f, params.c, params.alpha, params.m
    violations: list[Violation] = []
    c1, c2 = min_cluster_size(n, f, alpha)

    if alpha * c <= 1:
        violations.append(Violation(
            name="tags_gt_one",
            detail=f"alpha*C = {alpha * c:g} must exceed 1 for the tag space "
                   "to carry information",
            margin=alpha * c - 1.0,
            min_cluster_size=max(c1, c2)))
        return violations

    ms = m_star(n, f, c, alpha).value

    # requirement 1: F >= M*, equivalently C >= (alpha*N)^(1/(alpha*F))/alpha
    if f < ms:
        violations.append(Violation(
            name="fanout_supports_optimum",
            detail=f"F = {f:g} < M* = {ms:.3f}; cluster size must reach "
                   f"C >= {c1:.3f}",
            margin=f - ms,
            min_cluster_size=c1))

    # requirement 2: C >= M*, i.e. sqrt(alpha)*C*sqrt(log2(alpha*C)) >= sqrt(F*log2(alpha*N))
    lhs = math.sqrt(alpha) * c * math.sqrt(math.log2(alpha * c))
    rhs = math.sqrt(f * math.log2(alpha * n))
    if c < ms:
        violations.append(Violation(
            name="cluster_holds_optimum",
            detail=f"C = {c:g} < M* = {ms:.3f}; cluster size must reach "
                   f"C >= {math.ceil(c2)}",
            margin=lhs - rhs,
            min_cluster_size=c2))

    if m > f:
        violations.append(Violation(
            name="m_within_fanout", detail=f"M = {m:g} exceeds F = {f:g}",
            margin=f - m, min_cluster_size=c))
    if m > c:
        violations.append(Violation(
            name="m_within_cluster", detail=f"M = {m:g} exceeds C = {c:g}",
            margin=c - m, min_cluster_size=m))
    return violations


# Fixed design point used for scaling tables: the fabricated 4-core device.
# 4 SRAM entries of 20 bits and K*M/C = 64 CAM entries of 10 bits per neuron;
# Eq-style evaluation below reproduces exactly those widths.
PROTOTYPE_DESIGN = NetParams(n=2 ** 18, f=64, c=256, m=16, k=1024)


def scaling_table(model_sizes: list[int], bits_per_syn_extra: int = 2,
                  design: NetParams = PROTOTYPE_DESIGN) -> list[tuple[int, float]]:
    """Total memory vs model size for a fixed per-neuron provisioning.

    The per-neuron cost is the two-stage figure of the hardware design
    point plus ``bits_per_syn_extra`` bits for each of the K*M/C synapse
    entries (the per-synapse type/weight field). The cost is constant per
    neuron, so the table is linear in N.
    """
    mem_s, mem_t = _split(design, hardware_bits=False)
    per_syn = design.k * design.m / design.c
    per_neuron = mem_s + mem_t + per_syn * bits_per_syn_extra
    return [(int(size), float(size) * per_neuron) for size in model_sizes]


def per_neuron_provisioned_bits(design: NetParams = PROTOTYPE_DESIGN,
                                bits_per_syn_extra: int = 2) -> float:
    """Constant per-neuron bits implied by a hardware design point."""
    mem_s, mem_t = _split(design, hardware_bits=False)
    return mem_s + mem_t + design.k * design.m / design.c * bits_per_syn_extra
