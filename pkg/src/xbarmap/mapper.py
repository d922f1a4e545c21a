"""Tile selection and core packing.

A layer's output grid is cut into ``rows x cols`` spatial blocks, times a
group of output channels, and each block becomes one crossbar core.  All
neurons in a core read one shared set of axons (the union of their
receptive fields), so overlapping windows cost a single axon each.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .connectivity import ConnectivityList, build_connectivity
from .errors import MappingError
from .ir import NetworkSpec, NeuronId, TensorShape, WeightStore, neuron_ids


@dataclass(frozen=True)
class CoreSpec:
    axon_capacity: int
    neuron_capacity: int

    def __post_init__(self):
        if self.axon_capacity < 1 or self.neuron_capacity < 1:
            raise ValueError("core capacities must be >= 1")

    def __str__(self):
        return f"{self.axon_capacity}x{self.neuron_capacity}"


@dataclass(frozen=True)
class TilePlan:
    layer: int
    neuron_rows: int
    neuron_cols: int
    channels_per_core: int
    axons_used: int
    neurons_used: int

    @property
    def utilization(self) -> Tuple[int, int]:
        return (self.axons_used, self.neurons_used)

    def __str__(self):
        return f"[{self.axons_used},{self.neurons_used}]"


@dataclass(eq=False)
class CoreAllocation:
    """One physical core.

    ``weight_matrix[a, n]`` is the conductance from axon ``a`` to neuron
    ``n``.  ``src_index``/``dst_index`` hold the flat indices of the
    axon/neuron slots in the source/destination layers.
    """

    core_id: int
    layer: int
    axon_slots: Tuple[NeuronId, ...]
    neuron_slots: Tuple[NeuronId, ...]
    weight_matrix: np.ndarray
    src_index: np.ndarray
    dst_index: np.ndarray
    channel_group: int = 0
    block: Tuple[int, int] = (0, 0)

    @property
    def axons_used(self) -> int:
        return len(self.axon_slots)

    @property
    def neurons_used(self) -> int:
        return len(self.neuron_slots)


@dataclass(eq=False)
class MappingResult:
    spec: NetworkSpec
    core: CoreSpec
    plans: Tuple[TilePlan, ...]
    cores: Tuple[CoreAllocation, ...]
    connectivity: Tuple[ConnectivityList, ...] = ()

    @property
    def layer_core_counts(self) -> Dict[int, int]:
        counts = {i: 0 for i in range(1, len(self.spec) + 1)}
        for c in self.cores:
            counts[c.layer] += 1
        return counts

    @property
    def total_cores(self) -> int:
        return len(self.cores)

    def cores_of(self, layer: int) -> List[CoreAllocation]:
        return [c for c in self.cores if c.layer == layer]


def axons_required(K: int, S: int, neuron_rows: int, neuron_cols: int) -> int:
    """Distinct input positions read by a ``rows x cols`` block of one feature map."""
    return (
        K * K
        + K * S * (neuron_cols - 1)
        + S * S * (neuron_cols - 1) * (neuron_rows - 1)
        + K * S * (neuron_rows - 1)
    )


def _window_extent(k: int, s: int, n: int) -> int:
    return k + s * (n - 1)


def best_factor_pair(a: int, K: int, S: int) -> Tuple[int, int]:
    """Block shape with exactly ``a`` neurons that needs the fewest axons.

    Ties go to the most square pair, then ``rows <= cols``, the same order
    :func:`choose_tile_shape` uses.
    """
    pairs = [(r, a // r) for r in range(1, a + 1) if a % r == 0]
    return min(pairs, key=lambda p: (axons_required(K, S, *p), abs(p[0] - p[1]), p[0] > p[1]))


def choose_tile_shape(
    out_shape: TensorShape,
    kernel,
    stride,
    in_channels: int,
    out_channels: int,
    core: CoreSpec,
    layer: int = 0,
) -> TilePlan:
    """Pick the block shape and channel packing for a convolution layer.

    Candidates are ranked by most neurons per core, then fewest axons, then
    the most square block, then ``rows <= cols``.  For a fixed ``(rows, cols)``
    packing more channels only adds neurons, so each block shape is scored at
    its largest feasible channel count.
    """
    kh, kw = (kernel, kernel) if isinstance(kernel, int) else kernel
    sh, sw = (stride, stride) if isinstance(stride, int) else stride
    fan_in = kh * kw * in_channels
    if fan_in > core.axon_capacity:
        raise MappingError(
            f"layer {layer}: one neuron needs {fan_in} axons but the axon capacity is "
            f"{core.axon_capacity}"
        )

    best_key, best = None, None
    for rows in range(1, out_shape.height + 1):
        ext_h = _window_extent(kh, sh, rows)
        if ext_h * kw * in_channels > core.axon_capacity or rows > core.neuron_capacity:
            break
        for cols in range(1, out_shape.width + 1):
            spatial = rows * cols
            axons = ext_h * _window_extent(kw, sw, cols) * in_channels
            if axons > core.axon_capacity or spatial > core.neuron_capacity:
                break
            channels = min(out_channels, core.neuron_capacity // spatial)
            neurons = spatial * channels
            key = (-neurons, axons, abs(rows - cols), rows > cols)
            if best_key is None or key < best_key:
                best_key = key
                best = TilePlan(layer, rows, cols, channels, axons, neurons)
    assert best is not None  # rows = cols = 1 is always feasible after the fan-in check
    return best


def plan_layer(spec: NetworkSpec, index: int, core: CoreSpec) -> TilePlan:
    layer = spec.layer(index)
    src = spec.input_of(index)
    if layer.is_conv:
        return choose_tile_shape(
            spec.output_of(index), layer.kernel, layer.stride, src.channels, layer.out_channels, core, index
        )
    if src.size > core.axon_capacity:
        raise MappingError(
            f"layer {index}: fully-connected fan-in {src.size} exceeds the axon capacity "
            f"{core.axon_capacity}; split the layer so each neuron reads at most "
            f"{core.axon_capacity} inputs"
        )
    channels = min(layer.out_channels, core.neuron_capacity)
    return TilePlan(index, 1, 1, channels, src.size, channels)


def plan_network(spec: NetworkSpec, core: CoreSpec) -> Tuple[TilePlan, ...]:
    return tuple(plan_layer(spec, i, core) for i in range(1, len(spec) + 1))


def map_layer(
    plan: TilePlan, connectivity: ConnectivityList, core: CoreSpec, first_id: int = 0
) -> List[CoreAllocation]:
    """Cut one layer into cores following ``plan``.

    Blocks are laid row-major over the output grid; edge blocks may be
    partial.  Core ids run channel group first, then block row-major.
    """
    dst = connectivity.dst_shape
    src = connectivity.src_shape
    r, c, g = plan.neuron_rows, plan.neuron_cols, plan.channels_per_core
    n_br, n_bc = math.ceil(dst.height / r), math.ceil(dst.width / c)
    n_groups = math.ceil(dst.channels / g)

    def core_of(flat):
        pixel, feat = np.divmod(flat, dst.channels)
        row, col = np.divmod(pixel, dst.width)
        return (feat // g) * (n_br * n_bc) + (row // r) * n_bc + col // c

    syn_core = core_of(connectivity.dst)
    order = np.argsort(syn_core, kind="stable")
    bounds = np.searchsorted(syn_core[order], np.arange(n_groups * n_br * n_bc + 1))

    all_dst = np.arange(dst.size)
    dst_core = core_of(all_dst)
    dst_order = np.argsort(dst_core, kind="stable")
    dst_bounds = np.searchsorted(dst_core[dst_order], np.arange(n_groups * n_br * n_bc + 1))

    cores = []
    for local in range(n_groups * n_br * n_bc):
        picked = order[bounds[local]:bounds[local + 1]]
        neurons = all_dst[dst_order[dst_bounds[local]:dst_bounds[local + 1]]]
        axons, axon_pos = np.unique(connectivity.src[picked], return_inverse=True)
        neuron_pos = np.searchsorted(neurons, connectivity.dst[picked])
        matrix = np.zeros((len(axons), len(neurons)))
        matrix[axon_pos, neuron_pos] = connectivity.weight[picked]
        if len(axons) > core.axon_capacity or len(neurons) > core.neuron_capacity:
            raise MappingError(
                f"layer {plan.layer}: core {first_id + local} is {len(axons)}x{len(neurons)}, "
                f"over capacity {core}"
            )
        group, block = divmod(local, n_br * n_bc)
        cores.append(
            CoreAllocation(
                core_id=first_id + local,
                layer=plan.layer,
                axon_slots=neuron_ids(plan.layer - 1, src, axons),
                neuron_slots=neuron_ids(plan.layer, dst, neurons),
                weight_matrix=matrix,
                src_index=axons,
                dst_index=neurons,
                channel_group=group,
                block=divmod(block, n_bc),
            )
        )
    return cores


def map_network(spec: NetworkSpec, weights: WeightStore, core: CoreSpec) -> MappingResult:
    plans = plan_network(spec, core)
    conns, cores = [], []
    for plan in plans:
        conn = build_connectivity(spec, weights, plan.layer)
        conns.append(conn)
        cores.extend(map_layer(plan, conn, core, first_id=len(cores)))
    return MappingResult(spec, core, plans, tuple(cores), tuple(conns))


__all__ = [
    "CoreSpec",
    "TilePlan",
    "CoreAllocation",
    "MappingResult",
    "axons_required",
    "best_factor_pair",
    "choose_tile_shape",
    "plan_layer",
    "plan_network",
    "map_layer",
    "map_network",
]

