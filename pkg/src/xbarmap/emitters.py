"""CSV artifacts describing a mapping, and the loader that reads them back.

Output tree::

    report.csv              per-layer utilization and core counts
    connections.csv         routing table: producer slot -> consumer axon
    connectivity_L{n}.csv   boolean core-to-core matrix feeding layer n
    cores/core_{id}.csv     crossbar contents of each core
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .connectivity import ConnectivityList
from .ir import NetworkSpec, NeuronId
from .mapper import CoreAllocation, CoreSpec, MappingResult, TilePlan, plan_network

INPUT_CORE = -1
_CORNER = "axon\\neuron"


def _csv_text(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def _write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def _fmt(value: float) -> str:
    return repr(float(value))


# --- utilization report -----------------------------------------------------


@dataclass(frozen=True)
class LayerUtilization:
    layer: int
    axons: int
    neurons: int
    cores: int
    note: str = ""


@dataclass(frozen=True)
class UtilizationReport:
    core: CoreSpec
    layers: Tuple[LayerUtilization, ...]
    notes: Tuple[str, ...] = field(default=())

    @property
    def total_cores(self) -> int:
        return sum(row.cores for row in self.layers)


def build_utilization_report(result: MappingResult, reference: Optional[Sequence] = None) -> UtilizationReport:
    """Summarize ``result``; if ``reference`` gives expected ``(axons, neurons, cores)``
    per layer, every disagreement is recorded as a note instead of being hidden."""
    counts = result.layer_core_counts
    rows, notes = [], []
    for plan in result.plans:
        note = ""
        if reference is not None and plan.layer <= len(reference) and reference[plan.layer - 1] is not None:
            ax, ne, nc = reference[plan.layer - 1]
            diffs = []
            if (ax, ne) != plan.utilization:
                diffs.append(f"utilization [{ax},{ne}] expected, [{plan.axons_used},{plan.neurons_used}] computed")
            if nc != counts[plan.layer]:
                diffs.append(f"{nc} cores expected, {counts[plan.layer]} computed")
            note = "; ".join(diffs)
            if note:
                notes.append(f"layer {plan.layer}: {note}")
        rows.append(LayerUtilization(plan.layer, plan.axons_used, plan.neurons_used, counts[plan.layer], note))
    return UtilizationReport(result.core, tuple(rows), tuple(notes))


def render_utilization_report(report: UtilizationReport) -> str:
    size = str(report.core)
    rows = [("layer", "axons", "neurons", "cores", "core_size", "notes")]
    for r in report.layers:
        rows.append((r.layer, r.axons, r.neurons, r.cores, size, r.note))
    rows.append(("total", "", "", report.total_cores, size, ""))
    return _csv_text(rows)


def emit_utilization_report(result: MappingResult, path, reference=None) -> Path:
    return _write(path, render_utilization_report(build_utilization_report(result, reference)))


# --- routing ----------------------------------------------------------------


def _owners(result: MappingResult, layer: int) -> Tuple[np.ndarray, np.ndarray]:
    """Producing core id and neuron slot for every neuron of ``layer``."""
    size = result.spec.output_of(layer).size
    owner_core = np.full(size, -2, dtype=np.int64)
    owner_slot = np.full(size, -1, dtype=np.int64)
    for c in result.cores_of(layer):
        owner_core[c.dst_index] = c.core_id
        owner_slot[c.dst_index] = np.arange(c.neurons_used)
    return owner_core, owner_slot


def connection_rows(result: MappingResult) -> List[Tuple[int, int, int, int, float]]:
    """``(src_core, src_slot, dst_core, dst_axon, weight)`` per axon of every core.

    Input-layer axons use ``src_core = -1`` and the input's flat index as
    ``src_slot``.  Routing carries values unscaled, so ``weight`` is 1; the
    synaptic weights live in the core dumps.
    """
    rows = []
    owners = {}
    for c in result.cores:
        if c.layer == 1:
            src_core = np.full(c.axons_used, INPUT_CORE)
            src_slot = c.src_index
        else:
            if c.layer - 1 not in owners:
                owners[c.layer - 1] = _owners(result, c.layer - 1)
            oc, os_ = owners[c.layer - 1]
            src_core, src_slot = oc[c.src_index], os_[c.src_index]
        rows.extend(
            (int(sc), int(ss), c.core_id, a, 1.0)
            for a, (sc, ss) in enumerate(zip(src_core, src_slot))
        )
    rows.sort()
    return rows


def render_connection_list(result: MappingResult) -> str:
    rows = [("src_core", "src_slot", "dst_core", "dst_axon", "weight")]
    rows.extend((sc, ss, dc, da, _fmt(w)) for sc, ss, dc, da, w in connection_rows(result))
    return _csv_text(rows)


def emit_connection_list(result: MappingResult, path) -> Path:
    return _write(path, render_connection_list(result))


def core_adjacency(result: MappingResult) -> np.ndarray:
    """Square boolean matrix over ``[input] + cores``; entry ``[i, j]`` is true
    when node ``i`` feeds at least one axon of node ``j``."""
    n = result.total_cores + 1
    adj = np.zeros((n, n), dtype=bool)
    for sc, _, dc, _, _ in connection_rows(result):
        adj[sc + 1, dc + 1] = True
    return adj


def connectivity_matrix(result: MappingResult, layer: int) -> Tuple[List[str], List[int], np.ndarray]:
    """Rows: the input pseudo-core plus every core of layers ``< layer``.
    Columns: the cores of ``layer``."""
    adj = core_adjacency(result)
    sources = [c.core_id for c in result.cores if c.layer < layer]
    targets = [c.core_id for c in result.cores_of(layer)]
    row_idx = [0] + [s + 1 for s in sources]
    col_idx = [t + 1 for t in targets]
    labels = ["input"] + [str(s) for s in sources]
    return labels, targets, adj[np.ix_(row_idx, col_idx)]


def render_connectivity_matrix(result: MappingResult, layer: int) -> str:
    labels, targets, matrix = connectivity_matrix(result, layer)
    rows = [["src\\dst"] + [str(t) for t in targets]]
    for label, line in zip(labels, matrix):
        rows.append([label] + ["1" if v else "0" for v in line])
    return _csv_text(rows)


def emit_connectivity_matrix(result: MappingResult, layer: int, path) -> Path:
    return _write(path, render_connectivity_matrix(result, layer))


def render_connectivity_dump(conn: ConnectivityList) -> str:
    """Debug listing of every synapse feeding one layer."""
    rows = [("src", "dst", "weight", "krow", "kcol", "inch")]
    for s in conn:
        rows.append((str(s.src), str(s.dst), _fmt(s.weight)) + s.tap)
    return _csv_text(rows)


# --- core dumps -------------------------------------------------------------


def render_core_dump(core: CoreAllocation) -> str:
    rows = [[_CORNER] + [str(n) for n in core.neuron_slots]]
    for axon, weights in zip(core.axon_slots, core.weight_matrix):
        rows.append([str(axon)] + [_fmt(w) for w in weights])
    return _csv_text(rows)


def emit_core_dump(core: CoreAllocation, path) -> Path:
    return _write(path, render_core_dump(core))


def write_outputs(result: MappingResult, out_dir, reference=None) -> Path:
    out = Path(out_dir)
    emit_utilization_report(result, out / "report.csv", reference)
    emit_connection_list(result, out / "connections.csv")
    for layer in range(1, len(result.spec) + 1):
        emit_connectivity_matrix(result, layer, out / f"connectivity_L{layer}.csv")
    for core in result.cores:
        emit_core_dump(core, out / "cores" / f"core_{core.core_id}.csv")
    return out


# --- reading artifacts back -------------------------------------------------

_CORE_FILE = re.compile(r"^core_(\d+)\.csv$")


def read_core_dump(text: str, spec: NetworkSpec, core_id: int) -> CoreAllocation:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or not rows[0] or rows[0][0] != _CORNER:
        raise ValueError(f"core {core_id}: not a core dump")
    neurons = tuple(NeuronId.parse(t) for t in rows[0][1:])
    axons = tuple(NeuronId.parse(r[0]) for r in rows[1:])
    matrix = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=np.float64)
    matrix = matrix.reshape(len(axons), len(neurons))
    if not neurons:
        raise ValueError(f"core {core_id}: no neurons")
    layer = neurons[0].layer
    if not 1 <= layer <= len(spec):
        raise ValueError(f"core {core_id}: layer {layer} not in network")
    src_shape, dst_shape = spec.input_of(layer), spec.output_of(layer)
    return CoreAllocation(
        core_id=core_id,
        layer=layer,
        axon_slots=axons,
        neuron_slots=neurons,
        weight_matrix=matrix,
        src_index=np.array([a.flat(src_shape) for a in axons], dtype=np.int64),
        dst_index=np.array([n.flat(dst_shape) for n in neurons], dtype=np.int64),
    )


def read_report_core(text: str) -> CoreSpec:
    for row in csv.DictReader(io.StringIO(text)):
        axons, neurons = row["core_size"].split("x")
        return CoreSpec(int(axons), int(neurons))
    raise ValueError("empty report")


def load_mapping(out_dir, spec: NetworkSpec) -> MappingResult:
    """Rebuild a :class:`MappingResult` from a directory written by :func:`write_outputs`.

    Raises ``FileNotFoundError`` when the report or core dumps are missing.
    """
    out = Path(out_dir)
    core = read_report_core((out / "report.csv").read_text(encoding="utf-8"))
    core_dir = out / "cores"
    if not core_dir.is_dir():
        raise FileNotFoundError(f"{core_dir} does not exist")
    found = []
    for path in core_dir.iterdir():
        match = _CORE_FILE.match(path.name)
        if match:
            found.append((int(match.group(1)), path))
    found.sort()
    cores = tuple(read_core_dump(p.read_text(encoding="utf-8"), spec, cid) for cid, p in found)
    if len(spec) and not cores:
        raise FileNotFoundError(f"no core dumps in {core_dir}")
    plans: Tuple[TilePlan, ...] = plan_network(spec, core)
    return MappingResult(spec, core, plans, cores)
