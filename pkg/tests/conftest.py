import itertools

import numpy as np
import pytest

from xbarmap import CoreSpec, LayerSpec, NetworkSpec, TensorShape, WeightStore
from xbarmap.errors import ShapeError


def rf_union_size(K, S, rows, cols):
    """Brute-force count of input positions read by a rows x cols output block."""
    cells = set()
    for i, j, a, b in itertools.product(range(rows), range(cols), range(K), range(K)):
        cells.add((i * S + a, j * S + b))
    return len(cells)


def brute_fan_in(h, w, k, s, pad, out_h, out_w):
    """Per-output count of kernel taps landing inside the real (unpadded) grid."""
    fan = np.zeros((out_h, out_w), dtype=int)
    for i in range(out_h):
        for j in range(out_w):
            for a in range(k):
                for b in range(k):
                    r, c = i * s + a - pad, j * s + b - pad
                    if 0 <= r < h and 0 <= c < w:
                        fan[i, j] += 1
    return fan


def im2col_forward(spec, weights, x, activation="linear"):
    """Second dense oracle: unfold patches into a matrix and multiply."""
    outs = [x]
    for layer in spec.layers:
        w = weights[layer.index]
        out = spec.output_of(layer.index)
        if not layer.is_conv:
            y = (w @ x.reshape(-1)).reshape(out.as_tuple())
        else:
            kh, kw = layer.kernel
            sh, sw = layer.stride
            t, b, l, r = layer.padding
            xp = np.pad(x, ((t, b), (l, r), (0, 0)))
            cols = np.empty((out.height * out.width, w.shape[1] * kh * kw))
            for n, (i, j) in enumerate(itertools.product(range(out.height), range(out.width))):
                patch = xp[i * sh:i * sh + kh, j * sw:j * sw + kw, :]  # kh, kw, cin
                cols[n] = patch.transpose(2, 0, 1).ravel()  # cin, kh, kw
            y = (cols @ w.reshape(w.shape[0], -1).T).reshape(out.as_tuple())
        x = np.maximum(y, 0) if activation == "relu" else y
        outs.append(x)
    return outs


def random_network(rng, max_layers=3, max_dim=12, max_ch=8, allow_fc=True):
    """Random conv stack within the property-test bounds (K in {1,3,5}, S in {1,2}, pad in {0,1})."""
    while True:
        shape = TensorShape(int(rng.integers(1, max_dim + 1)), int(rng.integers(1, max_dim + 1)),
                            int(rng.integers(1, max_ch + 1)))
        layers = []
        n = int(rng.integers(1, max_layers + 1))
        try:
            for i in range(1, n + 1):
                if allow_fc and i == n and rng.random() < 0.2:
                    layers.append(LayerSpec.fc(i, int(rng.integers(1, max_ch + 1))))
                else:
                    layers.append(LayerSpec.conv(i, int(rng.integers(1, max_ch + 1)),
                                                 k=int(rng.choice([1, 3, 5])),
                                                 stride=int(rng.integers(1, 3)),
                                                 pad=int(rng.integers(0, 2))))
            spec = NetworkSpec(shape, tuple(layers))
        except ShapeError:
            continue
        return spec


def random_core(rng, spec):
    """A random core geometry that can hold every layer of ``spec``."""
    need = 1
    for layer in spec.layers:
        src = spec.input_of(layer.index)
        fan = layer.kernel[0] * layer.kernel[1] * src.channels if layer.is_conv else src.size
        need = max(need, fan)
    axons = int(rng.integers(need, max(need, 300) + 1))
    neurons = int(rng.choice([1, 3, 16, 64, 256]))
    return CoreSpec(axons, neurons)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_spec():
    return NetworkSpec(TensorShape(3, 3, 1), (LayerSpec.conv(1, 1, k=3, stride=1, pad=0),))


@pytest.fixture
def ones_weights(tiny_spec):
    return WeightStore(tiny_spec, {1: np.ones((1, 1, 3, 3))})
