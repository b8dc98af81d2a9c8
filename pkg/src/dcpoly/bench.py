"""Benchmark harness: seeded instances, paired arms, CSV/JSON reports.

Two experiments are provided.  ``bench_decomp`` times the sphere-trace
decomposition at each certificate level on shared seeded instances and
checks the value ordering sos <= sdsos <= dsos cell by cell.  ``bench_ccp``
runs the four one-shot decomposition arms plus the multiple-decomposition
variant on a shared (instance, start, budget) design and reports final
objectives and iteration counts per arm.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .certify import ConvexityCone
from .conic import MatrixCone
from .dcd import (
    FEASIBILITY,
    LAMBDA_MAX_AT_POINT,
    LAMBDA_MAX_ON_BALL,
    UNDOMINATED,
    DecompositionRequest,
    decompose,
)
from .ccp import CcpConfig, ProblemInstance, ccp, multi_decomp_ccp, random_instance, random_start
from .poly import Polynomial

DECOMP_CSV_COLUMNS = ("experiment", "n", "degree", "cone", "seed",
                      "time_ms", "objective_value", "status")
CCP_CSV_COLUMNS = ("experiment", "n", "degree", "seed", "arm", "radius",
                   "iterations", "time_ms", "f0_start", "f0_final", "status")


@dataclass
class BenchReport:
    experiment: str
    records: list = field(default_factory=list)
    aggregates: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {"experiment": self.experiment, "records": self.records,
                "aggregates": self.aggregates, "violations": self.violations}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    def to_csv(self, columns: Sequence[str]) -> str:
        lines = [",".join(columns)]
        for rec in self.records:
            lines.append(",".join(_csv_cell(rec.get(c)) for c in columns))
        return "\n".join(lines) + "\n"


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def _aggregate(records: Sequence[dict], keys: Sequence[str],
               means: Sequence[str]) -> list:
    groups: dict[tuple, list] = {}
    for rec in records:
        if rec.get("status") != "ok":
            continue
        groups.setdefault(tuple(rec[k] for k in keys), []).append(rec)
    out = []
    for group_key, members in sorted(groups.items(), key=lambda kv: str(kv[0])):
        row = dict(zip(keys, group_key))
        row["count"] = len(members)
        for m in means:
            row[f"mean_{m}"] = float(np.mean([r[m] for r in members]))
        out.append(row)
    return out


def bench_decomp(n_list: Sequence[int], degree: int,
                 cones: Sequence[ConvexityCone], seeds: Sequence[int],
                 solver_tol: float | None = None, workers: int = 1) -> BenchReport:
    """Sphere-trace decomposition value/time per cone on seeded instances."""
    report = BenchReport("bench-decomp")

    def run_cell(n: int, seed: int, cone: ConvexityCone) -> dict:
        f = random_instance(n, degree, seed)
        rec = {"experiment": "bench-decomp", "n": n, "degree": degree,
               "cone": cone.label, "seed": seed}
        tic = time.perf_counter()
        try:
            dec = decompose(f, DecompositionRequest(UNDOMINATED, cone),
                            solver_tol)
            rec["objective_value"] = dec.objective_value
            rec["status"] = "ok"
        except Exception as exc:  # per-cell failures recorded, run continues
            rec["objective_value"] = None
            rec["status"] = f"error: {exc}"
        rec["time_ms"] = int((time.perf_counter() - tic) * 1000)
        return rec

    cells = [(n, seed, cone) for n in n_list for seed in seeds for cone in cones]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            report.records = list(pool.map(lambda c: run_cell(*c), cells))
    else:
        report.records = [run_cell(*c) for c in cells]

    by_instance: dict[tuple, dict] = {}
    for rec in report.records:
        if rec["status"] == "ok":
            by_instance.setdefault((rec["n"], rec["seed"]), {})[rec["cone"]] = \
                rec["objective_value"]
    chain = [c.label for c in sorted(cones, reverse=True)]  # sos, sdsos, dsos
    for (n, seed), values in sorted(by_instance.items()):
        for tighter, looser in zip(chain, chain[1:]):
            if tighter in values and looser in values:
                lo, hi = values[tighter], values[looser]
                if lo > hi + 1e-5 * (1 + abs(hi)):
                    report.violations.append(
                        {"n": n, "seed": seed, "kind": "value-ordering",
                         "detail": f"{tighter}={lo} > {looser}={hi}"})
    report.aggregates = _aggregate(report.records, ("n", "cone"),
                                   ("objective_value", "time_ms"))
    return report


CCP_ARMS = ("feasibility", "lmax-point", "lmax-ball", "undominated", "multi")


def _arm_request(arm: str, x0, radius: float) -> DecompositionRequest | None:
    if arm == "feasibility":
        return DecompositionRequest(FEASIBILITY, ConvexityCone.SOS)
    if arm == "lmax-point":
        return DecompositionRequest(LAMBDA_MAX_AT_POINT, ConvexityCone.SOS,
                                    point=tuple(x0), lambda_bound_cone=MatrixCone.PSD)
    if arm == "lmax-ball":
        return DecompositionRequest(LAMBDA_MAX_ON_BALL, ConvexityCone.SOS,
                                    radius=radius)
    if arm == "undominated":
        return DecompositionRequest(UNDOMINATED, ConvexityCone.SOS)
    return None  # the multiple-decomposition arm carries no one-shot request


def ball_constraint(n: int, radius: float) -> Polynomial:
    terms = {tuple(2 * int(i == k) for i in range(n)): 1.0 for k in range(n)}
    terms[tuple([0] * n)] = -float(radius) ** 2
    return Polynomial(n, terms, "float")


def bench_ccp(n: int, degree: int, seeds: Sequence[int], budget_s: float,
              radius: float | None = None, arms: Sequence[str] = CCP_ARMS,
              solver_tol: float | None = None, workers: int = 1,
              max_iterations: int = 500) -> BenchReport:
    """Paired comparison of decomposition arms on shared seeded instances."""
    report = BenchReport("bench-ccp")
    setups = []
    for seed in seeds:
        f0 = random_instance(n, degree, seed)
        rng = np.random.default_rng(seed + 10**6)
        R = float(radius) if radius is not None else float(rng.integers(20, 51))
        x0 = random_start(n, seed)
        setups.append((seed, f0, R, x0))

    def run_arm(seed, f0, R, x0, arm) -> dict:
        rec = {"experiment": "bench-ccp", "n": n, "degree": degree,
               "seed": seed, "arm": arm, "radius": R}
        instance = ProblemInstance(f0, (ball_constraint(n, R),))
        tic = time.perf_counter()
        try:
            if arm == "multi":
                config = CcpConfig(max_iterations=max_iterations,
                                   time_budget=budget_s)
                trace = multi_decomp_ccp(instance, config, x0, solver_tol)
            else:
                config = CcpConfig(max_iterations=max_iterations,
                                   time_budget=budget_s,
                                   decomposition_request=_arm_request(arm, x0, R))
                trace = ccp(instance, config, x0, solver_tol)
            rec.update(iterations=len(trace.iterates),
                       f0_start=trace.f0_at_x0, f0_final=trace.final_value,
                       status="ok")
        except Exception as exc:
            rec.update(iterations=None, f0_start=None, f0_final=None,
                       status=f"error: {exc}")
        rec["time_ms"] = int((time.perf_counter() - tic) * 1000)
        return rec

    cells = [(seed, f0, R, x0, arm) for (seed, f0, R, x0) in setups for arm in arms]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            report.records = list(pool.map(lambda c: run_arm(*c), cells))
    else:
        report.records = [run_arm(*c) for c in cells]
    report.aggregates = _aggregate(report.records, ("arm",),
                                   ("f0_final", "iterations", "time_ms"))
    return report
