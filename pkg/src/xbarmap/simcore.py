"""Execution of a mapped network and verification against a dense oracle.

Two neuron models are supported: a plain (linear or ReLU) accumulator used
to check mapping correctness, and a leaky integrate-and-fire neuron stepped
with forward Euler for spiking runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np

from .errors import ConfigError, DimensionError, MissingSourceError
from .ir import NetworkSpec, NeuronId, TensorShape, WeightStore, check_tensor, neuron_id
from .mapper import CoreAllocation, MappingResult

ACTIVATIONS = ("linear", "relu")


def _activate(x: np.ndarray, activation: str) -> np.ndarray:
    if activation == "linear":
        return x
    if activation == "relu":
        return np.maximum(x, 0.0)
    raise ValueError(f"activation must be one of {ACTIVATIONS}, got {activation!r}")


def core_mvm(core: CoreAllocation, axon_inputs) -> np.ndarray:
    """Column currents of the crossbar: ``out[n] = sum_a W[a, n] * x[a]``."""
    x = np.asarray(axon_inputs, dtype=np.float64)
    if x.shape != (core.axons_used,):
        raise DimensionError(f"core {core.core_id}: got {x.shape[0] if x.ndim else 0} inputs, needs {core.axons_used}")
    return x @ core.weight_matrix


def _gather(core: CoreAllocation, values: np.ndarray, filled: np.ndarray) -> np.ndarray:
    missing = ~filled[core.src_index]
    if missing.any():
        raise MissingSourceError(core.axon_slots[int(np.argmax(missing))], core.core_id)
    return values[core.src_index]


def run_mapped_inference(result: MappingResult, input_tensor, activation: str = "linear") -> List[np.ndarray]:
    """Evaluate the network core by core.

    Returns ``[input, layer1, layer2, ...]`` as ``(H, W, C)`` arrays.  A core
    reading a neuron that no core produced raises :class:`MissingSourceError`.
    """
    _activate(np.zeros(0), activation)
    spec = result.spec
    x = check_tensor(input_tensor, spec.input_shape)
    outputs = [x]
    prev = x.ravel()
    prev_filled = np.ones(prev.size, dtype=bool)
    for layer in range(1, len(spec) + 1):
        shape = spec.output_of(layer)
        values = np.zeros(shape.size)
        filled = np.zeros(shape.size, dtype=bool)
        for core in result.cores_of(layer):
            axon_in = _gather(core, prev, prev_filled)
            values[core.dst_index] = _activate(core_mvm(core, axon_in), activation)
            filled[core.dst_index] = True
        outputs.append(values.reshape(shape.as_tuple()))
        prev, prev_filled = values, filled
    return outputs


def dense_reference(spec: NetworkSpec, weights: WeightStore, input_tensor, activation: str = "linear") -> List[np.ndarray]:
    """Direct convolution with explicit zero padding; no mapping involved."""
    _activate(np.zeros(0), activation)
    x = check_tensor(input_tensor, spec.input_shape)
    outputs = [x]
    for layer in spec.layers:
        w = weights[layer.index]
        out_shape = spec.output_of(layer.index)
        if not layer.is_conv:
            y = (w @ x.ravel()).reshape(out_shape.as_tuple())
        else:
            kh, kw = layer.kernel
            sh, sw = layer.stride
            top, bottom, left, right = layer.padding
            padded = np.pad(x, ((top, bottom), (left, right), (0, 0)))
            y = np.zeros(out_shape.as_tuple())
            for i in range(out_shape.height):
                for j in range(out_shape.width):
                    window = padded[i * sh:i * sh + kh, j * sw:j * sw + kw, :]
                    # w is [out][in][kr][kc], window is [kr][kc][in]
                    y[i, j, :] = np.einsum("oikl,kli->o", w, window)
        x = _activate(y, activation)
        outputs.append(x)
    return outputs


@dataclass(frozen=True)
class LayerCheck:
    layer: int
    max_abs_deviation: float
    max_deviation: float  # relative to the layer's largest reference magnitude
    passed: bool
    first_mismatch: Optional[NeuronId] = None


@dataclass(frozen=True)
class VerificationReport:
    tolerance: float
    layers: Tuple[LayerCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.layers)

    @property
    def max_deviation(self) -> float:
        return max((c.max_deviation for c in self.layers), default=0.0)

    @property
    def first_failure(self) -> Optional[LayerCheck]:
        return next((c for c in self.layers if not c.passed), None)

    def summary(self) -> str:
        if self.passed:
            return f"PASS maxdev={self.max_deviation:.1e}"
        bad = self.first_failure
        return (
            f"FAIL layer {bad.layer} maxdev={bad.max_deviation:.1e} "
            f"first mismatch {bad.first_mismatch}"
        )


def verify(result: MappingResult, spec: NetworkSpec, weights: WeightStore, input_tensor,
           tolerance: float = 1e-5, activation: str = "linear") -> VerificationReport:
    """Compare mapped inference with :func:`dense_reference` layer by layer.

    The deviation of a layer is ``|mapped - dense| / max|dense|``; a layer
    passes when every neuron's deviation is within ``tolerance``.
    """
    mapped = run_mapped_inference(result, input_tensor, activation)
    dense = dense_reference(spec, weights, input_tensor, activation)
    checks = []
    for layer in range(1, len(spec) + 1):
        m, d = mapped[layer].ravel(), dense[layer].ravel()
        diff = np.abs(m - d)
        scale = max(float(np.abs(d).max(initial=0.0)), 1e-12)
        rel = diff / scale
        over = rel > tolerance
        first = None
        if over.any():
            first = neuron_id(layer, spec.output_of(layer), int(np.argmax(over)))
        checks.append(
            LayerCheck(layer, float(diff.max(initial=0.0)), float(rel.max(initial=0.0)), not over.any(), first)
        )
    return VerificationReport(tolerance, tuple(checks))


# --- spiking mode -----------------------------------------------------------


@dataclass(frozen=True)
class LIFParams:
    tau_m: float = 20e-3
    R: float = 1.0
    u_rest: float = 0.0
    u_threshold: float = 1.0
    u_reset: float = 0.0
    dt: float = 1e-3

    def __post_init__(self):
        if not self.tau_m > 0:
            raise ConfigError("tau_m must be positive")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.u_threshold > self.u_reset:
            raise ConfigError("u_threshold must exceed u_reset")

    def check_stable(self):
        if self.dt > self.tau_m:
            raise ConfigError(f"dt={self.dt} exceeds tau_m={self.tau_m}; Euler step is unstable")


@dataclass(frozen=True, eq=False)
class CoreState:
    u: np.ndarray
    axon_input: np.ndarray

    @classmethod
    def resting(cls, core: CoreAllocation, params: LIFParams) -> "CoreState":
        return cls(np.full(core.neurons_used, params.u_rest), np.zeros(core.axons_used))


def lif_step(state: CoreState, params: LIFParams, input_current) -> Tuple[CoreState, np.ndarray]:
    """One forward-Euler step of the leaky membrane, then threshold and reset."""
    params.check_stable()
    current = np.asarray(input_current, dtype=np.float64)
    if current.shape != state.u.shape:
        raise DimensionError(f"current has shape {current.shape}, membrane has {state.u.shape}")
    u = state.u + (params.dt / params.tau_m) * (-(state.u - params.u_rest) + params.R * current)
    spikes = u >= params.u_threshold
    u = np.where(spikes, params.u_reset, u)
    return replace(state, u=u), spikes


def closed_form_membrane(t, params: LIFParams, current: float, u0: Optional[float] = None):
    """Exact subthreshold solution for a constant input current."""
    u0 = params.u_rest if u0 is None else u0
    target = params.u_rest + params.R * current
    return target + (u0 - target) * np.exp(-np.asarray(t) / params.tau_m)


def run_snn(result: MappingResult, lif: LIFParams, input_rates, timesteps: int, seed: int = 0) -> np.ndarray:
    """Rate-coded spiking run; returns spike counts of the last layer as ``(H, W, C)``.

    Each step the input pixels fire with probability equal to their rate
    (clipped to ``[0, 1]``), and spikes propagate through all layers within
    the same step.
    """
    if timesteps < 1:
        raise ConfigError("timesteps must be >= 1")
    lif.check_stable()
    spec = result.spec
    rates = np.clip(check_tensor(input_rates, spec.input_shape).ravel(), 0.0, 1.0)
    rng = np.random.default_rng(seed)
    layers = list(range(1, len(spec) + 1))
    by_layer = {layer: result.cores_of(layer) for layer in layers}
    states = {c.core_id: CoreState.resting(c, lif) for c in result.cores}
    filled = {0: np.ones(rates.size, dtype=bool)}
    for layer in layers:
        mask = np.zeros(spec.output_of(layer).size, dtype=bool)
        for c in by_layer[layer]:
            mask[c.dst_index] = True
        filled[layer] = mask

    out_shape = spec.shapes[-1]
    counts = np.zeros(out_shape.size, dtype=np.int64)
    for _ in range(timesteps):
        spikes = (rng.random(rates.size) < rates).astype(np.float64)
        for layer in layers:
            nxt = np.zeros(spec.output_of(layer).size)
            for c in by_layer[layer]:
                axon_in = _gather(c, spikes, filled[layer - 1])
                state = replace(states[c.core_id], axon_input=axon_in)
                state, fired = lif_step(state, lif, core_mvm(c, axon_in))
                states[c.core_id] = state
                nxt[c.dst_index] = fired
            spikes = nxt
        if layers:
            counts += spikes.astype(np.int64)
    return counts.reshape(out_shape.as_tuple())


def spike_count_rows(counts: np.ndarray, layer: int) -> List[Tuple[str, int]]:
    shape = TensorShape(*counts.shape)
    return [(str(neuron_id(layer, shape, i)), int(v)) for i, v in enumerate(counts.ravel())]


def lif_euler_error(params: LIFParams, current: float, horizon: float) -> float:
    """Largest gap between the Euler trajectory and the closed form over ``[0, horizon]``
    with the threshold out of reach."""
    params = replace(params, u_threshold=math.inf)
    state = CoreState(np.array([params.u_rest]), np.zeros(0))
    steps = int(round(horizon / params.dt))
    worst = 0.0
    for n in range(1, steps + 1):
        state, _ = lif_step(state, params, np.array([current]))
        exact = closed_form_membrane(n * params.dt, params, current)
        worst = max(worst, abs(float(state.u[0]) - float(exact)))
    return worst
