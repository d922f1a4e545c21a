"""Benchmark networks: the MNIST and CIFAR-10 three-layer CNNs.

``width`` scales every layer's channel count (1, 2 or 4 give the 8/16/64,
16/32/128 and 32/64/256 variants).  ``REPORTED`` holds the published
``(axons, neurons, cores)`` per layer for each network at a fixed
architecture, keyed by ``(name, core side)``.  Some of those cells are not
reachable by uniform tiling; pass them as ``reference`` to the utilization
report so the disagreements show up as notes.
"""

from .ir import LayerSpec, NetworkSpec, TensorShape


def mnist(width: int = 1) -> NetworkSpec:
    return NetworkSpec(
        TensorShape(28, 28, 1),
        (
            LayerSpec.conv(1, 8 * width, k=3, stride=1, pad=1),
            LayerSpec.conv(2, 16 * width, k=3, stride=2, pad=1),
            LayerSpec.conv(3, 64 * width, k=3, stride=2, pad=0),
        ),
    )


def cifar10(width: int = 1) -> NetworkSpec:
    # the third layer is unpadded: 14x14 -> 6x6 at stride 2 needs pad 0
    return NetworkSpec(
        TensorShape(32, 32, 3),
        (
            LayerSpec.conv(1, 8 * width, k=3, stride=1, pad=0),
            LayerSpec.conv(2, 16 * width, k=3, stride=2, pad=0),
            LayerSpec.conv(3, 64 * width, k=3, stride=2, pad=0),
        ),
    )


NETWORKS = {"mnist": mnist, "cifar10": cifar10}

REPORTED = {
    ("mnist", 256): [(60, 256, 28), (200, 64, 49), (240, 128, 18)],
    ("mnist", 512): [(100, 512, 15), (504, 192, 25), (400, 256, 9)],
    ("mnist", 1024): [(180, 1024, 7), (968, 400, 10), (1008, 768, 3)],
    ("cifar10", 256): [(180, 240, 30), (200, 64, 49), (240, 128, 18)],
    ("cifar10", 512): [(300, 512, 14), (504, 192, 17), (400, 256, 9)],
    ("cifar10", 1024): [(540, 1024, 7), (968, 400, 10), (1008, 768, 3)],
}

REPORTED_TOTALS = {
    ("mnist", 256): 95,
    ("mnist", 512): 49,
    ("mnist", 1024): 20,
    ("cifar10", 256): 97,
    ("cifar10", 512): 40,
    ("cifar10", 1024): 20,
}

# widened networks (width = core side / 256), one architecture per core size
REPORTED_SCALED = {
    ("mnist", 256): [(60, 256, 28), (200, 64, 49), (240, 128, 18)],
    ("mnist", 512): [(60, 512, 28), (400, 128, 49), (480, 256, 18)],
    ("mnist", 1024): [(60, 1024, 28), (800, 256, 49), (960, 512, 18)],
    ("cifar10", 256): [(180, 256, 30), (200, 64, 49), (240, 128, 18)],
    ("cifar10", 512): [(180, 512, 30), (400, 128, 49), (480, 256, 18)],
    ("cifar10", 1024): [(180, 1024, 30), (800, 256, 49), (960, 512, 18)],
}
