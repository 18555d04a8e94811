"""Forward/backward microbenchmark of single activations, normalized to Identity.

Each call is timed individually with ``time.perf_counter_ns`` so the spread
across iterations is available; the ratio columns divide each mean by the
Identity mean measured in the same run.  "Backward" is the pure derivative
kernel (``backward_x``); no upstream-gradient multiply is included.

Run on an otherwise idle machine: background load skews the numbers.
"""
from __future__ import annotations

import json
import statistics
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from iglu.activations import ActivationSpec, Kind, compiled_kernel

SCHEMA = "iglu-bench/1"
DEFAULT_ZOO_NAMES = ("identity", "relu", "iglu", "iglu_approx", "gelu_tanh")


@dataclass(frozen=True)
class BenchProtocol:
    input_dim: int = 10_000
    iterations: int = 1_000
    warmup_iterations: int = 20
    seed: int = 0
    precision: str = "single"

    def __post_init__(self):
        if self.input_dim < 1 or self.iterations < 1 or self.warmup_iterations < 1:
            raise ValueError("input_dim, iterations and warmup_iterations must be positive")
        if self.precision not in ("single", "double"):
            raise ValueError("precision must be 'single' or 'double'")

    @property
    def dtype(self):
        return np.float32 if self.precision == "single" else np.float64


@dataclass
class BenchRow:
    name: str
    forward_ns_mean: float
    forward_ns_stddev: float
    backward_ns_mean: float
    backward_ns_stddev: float
    forward_ratio_vs_identity: float = float("nan")
    backward_ratio_vs_identity: float = float("nan")
    checksum: float = 0.0


@dataclass
class BenchReport:
    rows: list[BenchRow]
    protocol: BenchProtocol
    warnings: list[str] = field(default_factory=list)
    schema: str = SCHEMA

    def row(self, name: str) -> BenchRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"schema": self.schema, "protocol": asdict(self.protocol),
                "warnings": list(self.warnings), "rows": [asdict(r) for r in self.rows]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_markdown(self) -> str:
        p = self.protocol
        lines = [
            f"CPU, {p.input_dim}-dim input, {p.iterations} iterations, {p.precision} precision",
            "",
            "| Activation | Forward | Backward | Forward mean (ns) | Backward mean (ns) |",
            "|---|---:|---:|---:|---:|",
        ]
        for r in self.rows:
            lines.append(f"| {r.name} | {r.forward_ratio_vs_identity:.2f}x | "
                         f"{r.backward_ratio_vs_identity:.2f}x | {r.forward_ns_mean:.0f} | "
                         f"{r.backward_ns_mean:.0f} |")
        if self.warnings:
            lines.append("")
            lines += [f"> warning: {w}" for w in self.warnings]
        return "\n".join(lines) + "\n"


def default_zoo(sigma: float = 1.0) -> list[ActivationSpec]:
    return [ActivationSpec.from_name(n, sigma=sigma) for n in DEFAULT_ZOO_NAMES]


def _time_kernel(fn, x, iterations, warmup):
    for _ in range(warmup):
        out = fn(x)
    times = np.empty(iterations, dtype=np.int64)
    checksum = 0.0
    clock = time.perf_counter_ns
    for i in range(iterations):
        t0 = clock()
        out = fn(x)
        t1 = clock()
        times[i] = t1 - t0
        # keep every output live outside the timed window
        checksum += float(out[i % out.shape[0]])
    checksum += float(np.sum(out, dtype=np.float64))
    return times, checksum


def _mean_std(times):
    vals = times.astype(np.float64)
    mean = float(vals.mean())
    std = float(statistics.stdev(vals)) if vals.size > 1 else 0.0
    return mean, std


def run_bench(zoo: Sequence[ActivationSpec], proto: BenchProtocol = BenchProtocol()) -> BenchReport:
    if not any(s.kind is Kind.IDENTITY for s in zoo):
        raise ValueError("the zoo must include identity (the normalizer)")
    rng = np.random.default_rng(proto.seed)
    x = np.ascontiguousarray(rng.standard_normal(proto.input_dim).astype(proto.dtype))
    warnings = []
    if proto.iterations < 30:
        warnings.append(f"only {proto.iterations} iterations: statistics are unreliable")
    rows = []
    for spec in zoo:
        fwd = compiled_kernel(spec, "forward", proto.dtype)
        bwd = compiled_kernel(spec, "backward", proto.dtype)
        tf, cf = _time_kernel(fwd, x, proto.iterations, proto.warmup_iterations)
        tb, cb = _time_kernel(bwd, x, proto.iterations, proto.warmup_iterations)
        fm, fs = _mean_std(tf)
        bm, bs = _mean_std(tb)
        rows.append(BenchRow(spec.label, fm, fs, bm, bs, checksum=cf + cb))
    ident = next(r for r, s in zip(rows, zoo) if s.kind is Kind.IDENTITY)
    for r in rows:
        r.forward_ratio_vs_identity = r.forward_ns_mean / ident.forward_ns_mean
        r.backward_ratio_vs_identity = r.backward_ns_mean / ident.backward_ns_mean
    resolution_ns = time.get_clock_info("perf_counter").resolution * 1e9
    shortest = min(min(r.forward_ns_mean, r.backward_ns_mean) for r in rows)
    if resolution_ns > 0.01 * shortest:
        warnings.append(f"timer resolution {resolution_ns:.0f} ns exceeds 1% of the "
                        f"shortest mean ({shortest:.0f} ns)")
    return BenchReport(rows, proto, warnings)
