"""Parameter sweeps over Paley primes: one CSV row per (quantity, p)."""

from __future__ import annotations

import csv
import math
import multiprocessing as mp
import os
import time
from dataclasses import dataclass
from pathlib import Path

from .field import is_prime

CSV_HEADER = ("p", "quantity", "value", "runtime_seconds", "status")
STATUSES = ("ok", "capped", "failed")
BASE_QUANTITIES = ("omega", "sos2", "sos4", "fk4", "t441norm", "diamondnorm", "charsum1norm")
TRACE_HEADER = ("p", "iteration", "primal_residual", "dual_residual", "objective", "upper", "rho")


@dataclass(frozen=True)
class SweepRecord:
    p: int
    quantity: str
    value: float
    runtime_seconds: float
    status: str

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"bad status {self.status!r}")
        if self.status == "ok" and not (is_prime(self.p) and self.p % 4 == 1):
            raise ValueError(f"p={self.p} is not a prime 1 mod 4")


def parse_quantity(quantity: str) -> tuple[str, tuple]:
    """Split 'restricted:T421:2:*' or 'norm:U541' into a kind and arguments ('*': no projection)."""
    from .graphmx import PAIR_SHAPES, SHAPES

    parts = quantity.split(":")
    kind = parts[0]
    if kind in BASE_QUANTITIES and len(parts) == 1:
        return kind, ()
    if kind == "norm" and len(parts) == 2 and parts[1] in SHAPES:
        return kind, (parts[1],)
    if kind == "restricted" and len(parts) == 4 and parts[1] in PAIR_SHAPES:
        side = {"0": 0, "1": 1, "2": 2, "*": None}
        if parts[2] in side and parts[3] in side:
            return kind, (parts[1], side[parts[2]], side[parts[3]])
    raise ValueError(f"unknown quantity {quantity!r}")


def compute_quantity(quantity: str, p: int, tol: float = 1e-4) -> tuple[float, str, list[dict]]:
    """Value, status and (for SDP quantities) the solver trace."""
    import numpy as np

    from .paley import build_paley

    kind, args = parse_quantity(quantity)
    g = build_paley(p)
    if kind == "omega":
        from .paley import clique_number

        return float(clique_number(g)), "ok", []
    if kind == "sos2":
        from .sdp import build_sos2, solve

        sol = solve(build_sos2(g), tol=tol, trace=True)
        return sol.value, "ok" if sol.status == "optimal" else "capped", sol.trace
    if kind == "sos4":
        from .invariant import build_sos4_invariant, solve_invariant

        sol = solve_invariant(build_sos4_invariant(g), tol=tol, trace=True)
        return sol.value, "ok" if sol.status == "optimal" else "capped", sol.trace
    if kind == "fk4":
        from .pseudomoments import fk4_value

        res = fk4_value(g, tol=tol)
        return res.lo, "ok" if res.converged else "capped", []
    if kind == "t441norm":
        from .blockcirc import t441_norm

        return t441_norm(g), "ok", []
    if kind == "charsum1norm":
        from .blockcirc import charsum1_matrix

        return float(np.linalg.norm(charsum1_matrix(g.ctx), 2)), "ok", []
    from .graphmx import build_graph_matrix, restricted_norm, spectral_norm

    if kind == "diamondnorm":
        return spectral_norm(build_graph_matrix(g, "DIAMOND"), method="dense"), "ok", []
    if kind == "norm":
        m = build_graph_matrix(g, args[0], dense=False)
        return spectral_norm(m, method="dense" if args[0] == "DIAMOND" else "blocks"), "ok", []
    shape, i, j = args
    m = build_graph_matrix(g, shape, dense=False)
    return restricted_norm(m, None, i, j, method="blocks"), "ok", []


def _worker(conn, quantity: str, p: int, tol: float) -> None:
    try:
        value, status, trace = compute_quantity(quantity, p, tol)
        if not math.isfinite(value):
            status = "failed"
        conn.send((value, status, trace))
    except Exception as err:  # recorded as a failed row
        conn.send((float("nan"), "failed", [{"error": repr(err)}]))
    finally:
        conn.close()


def run_sweep(
    quantity: str,
    primes: list[int],
    jobs: int | None = None,
    timeout: float | None = 600.0,
    tol: float = 1e-4,
) -> tuple[list[SweepRecord], dict[int, list[dict]]]:
    """Evaluate `quantity` at every prime in worker processes, at most `jobs` at a time.

    Runs past `timeout` seconds are killed and recorded as capped; exceptions become failed
    rows. Records come back sorted by p whatever the completion order.
    """
    parse_quantity(quantity)
    jobs = max(1, jobs or os.cpu_count() or 1)
    pending = sorted(set(primes))
    running: dict[int, tuple] = {}
    records: dict[int, SweepRecord] = {}
    traces: dict[int, list[dict]] = {}
    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else mp.get_context()
    while pending or running:
        while pending and len(running) < jobs:
            p = pending.pop(0)
            recv, send = ctx.Pipe(duplex=False)
            proc = ctx.Process(target=_worker, args=(send, quantity, p, tol), daemon=True)
            proc.start()
            send.close()
            running[p] = (proc, recv, time.perf_counter())
        for p, (proc, recv, start) in list(running.items()):
            elapsed = time.perf_counter() - start
            if recv.poll(0.02):
                try:
                    value, status, trace = recv.recv()
                except EOFError:
                    value, status, trace = float("nan"), "failed", []
                proc.join()
            elif not proc.is_alive():
                value, status, trace = float("nan"), "failed", []
            elif timeout is not None and elapsed > timeout:
                proc.terminate()
                proc.join()
                value, status, trace = float("nan"), "capped", []
            else:
                continue
            recv.close()
            records[p] = SweepRecord(p, quantity, float(value), time.perf_counter() - start, status)
            if trace:
                traces[p] = trace
            del running[p]
    return [records[p] for p in sorted(records)], traces


def _format_value(v: float) -> str:
    return "nan" if not math.isfinite(v) else repr(float(v))


def write_csv(records: list[SweepRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in sorted(records, key=lambda r: (r.quantity, r.p)):
            w.writerow([r.p, r.quantity, _format_value(r.value), f"{r.runtime_seconds:.3f}", r.status])


def write_trace(traces: dict[int, list[dict]], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for p in sorted(traces):
            for row in traces[p]:
                if "iteration" in row:
                    w.writerow([p] + [row[k] for k in TRACE_HEADER[1:]])


def read_csv(path) -> list[SweepRecord]:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
        out = []
        for n, row in enumerate(reader, start=2):
            if len(row) != len(CSV_HEADER):
                raise ValueError(f"{path}:{n}: expected {len(CSV_HEADER)} fields")
            try:
                out.append(SweepRecord(int(row[0]), row[1], float(row[2]), float(row[3]), row[4]))
            except ValueError as err:
                raise ValueError(f"{path}:{n}: {err}") from None
    return out
