"""Command line front end.

Exit codes: 0 ok, 1 usage, 2 mapping or configuration error, 3 I/O error,
4 verification mismatch.
"""

import argparse
import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import zoo
from .emitters import load_mapping, write_outputs
from .errors import XbarError
from .ir import (
    WeightStore,
    dump_weights,
    load_weights,
    parse_network,
    read_tensor_csv,
    serialize_network,
    write_tensor_csv,
)
from .mapper import CoreSpec, map_network
from .simcore import ACTIVATIONS, LIFParams, run_snn, spike_count_rows, verify

EXIT_OK, EXIT_USAGE, EXIT_MAPPING, EXIT_IO, EXIT_MISMATCH = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


@dataclass
class RunConfig:
    network: Optional[Path] = None
    weights: Optional[Path] = None
    weights_manifest: Optional[Path] = None
    core: tuple = (256, 256)
    out: Optional[Path] = None
    input: Optional[Path] = None
    tolerance: float = 1e-5
    timesteps: int = 100
    seed: int = 0
    activation: str = "linear"
    reference: Optional[str] = None
    lif: dict = field(default_factory=dict)
    spikes: Optional[Path] = None


def _require(cfg: RunConfig, *names):
    for name in names:
        if getattr(cfg, name) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required")


def _read_network(cfg):
    return parse_network(cfg.network.read_bytes())


def _read_weights(cfg, spec):
    return load_weights(spec, cfg.weights.read_bytes(), cfg.weights_manifest.read_bytes())


def cmd_map(cfg: RunConfig) -> int:
    _require(cfg, "network", "weights", "weights_manifest", "out")
    spec = _read_network(cfg)
    weights = _read_weights(cfg, spec)
    core = CoreSpec(*cfg.core)
    result = map_network(spec, weights, core)
    reference = None
    if cfg.reference:
        if cfg.core[0] != cfg.core[1] or (cfg.reference, cfg.core[0]) not in zoo.REPORTED:
            raise UsageError(f"no reported figures for {cfg.reference} on {core} cores")
        reference = zoo.REPORTED[(cfg.reference, cfg.core[0])]
    stale = cfg.out / "cores"
    if stale.is_dir():
        for old in stale.glob("core_*.csv"):
            old.unlink()
    write_outputs(result, cfg.out, reference)
    counts = result.layer_core_counts
    for plan in result.plans:
        print(f"layer {plan.layer}: {plan} x {counts[plan.layer]} cores")
    print(f"total cores: {result.total_cores}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    _require(cfg, "network", "weights", "weights_manifest", "out", "input")
    spec = _read_network(cfg)
    weights = _read_weights(cfg, spec)
    result = load_mapping(cfg.out, spec)
    x = read_tensor_csv(cfg.input.read_text(), spec.input_shape)
    report = verify(result, spec, weights, x, cfg.tolerance, cfg.activation)
    for check in report.layers:
        status = "ok" if check.passed else f"mismatch at {check.first_mismatch}"
        print(f"layer {check.layer}: maxdev={check.max_deviation:.1e} {status}")
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_MISMATCH


def cmd_simulate(cfg: RunConfig) -> int:
    _require(cfg, "network", "out", "input")
    if cfg.timesteps < 1:
        raise UsageError("--timesteps must be >= 1")
    lif = LIFParams(**cfg.lif)
    lif.check_stable()
    spec = _read_network(cfg)
    result = load_mapping(cfg.out, spec)
    rates = read_tensor_csv(cfg.input.read_text(), spec.input_shape)
    counts = run_snn(result, lif, rates, cfg.timesteps, cfg.seed)
    target = cfg.spikes or cfg.out / "spikes.csv"
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("neuron", "count"))
        writer.writerows(spike_count_rows(counts, len(spec)))
    print(f"{int(counts.sum())} output spikes in {cfg.timesteps} steps -> {target}")
    return EXIT_OK


def cmd_example(args) -> int:
    """Write a benchmark network, random weights and a random input tensor."""
    spec = zoo.NETWORKS[args.name](args.width)
    weights = WeightStore.random(spec, seed=args.seed, scale=0.3)
    blob, manifest = dump_weights(spec, weights)
    out = Path(args.dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "network.json").write_bytes(serialize_network(spec))
    (out / "weights.bin").write_bytes(blob)
    (out / "weights.json").write_bytes(manifest)
    rng = np.random.default_rng(args.seed)
    x = rng.random(spec.input_shape.as_tuple()).astype(np.float32).astype(np.float64)
    (out / "input.csv").write_text(write_tensor_csv(x))
    print(f"wrote {args.name} example to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="xbarmap", description="Map feed-forward networks onto crossbar cores.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, weights=True):
        p.add_argument("--network", type=Path)
        if weights:
            p.add_argument("--weights", type=Path)
            p.add_argument("--weights-manifest", type=Path)
        p.add_argument("--out", type=Path, help="mapping output directory")

    p = sub.add_parser("map", help="map a network and write reports, routing and core dumps")
    common(p)
    p.add_argument("--core", type=int, nargs=2, metavar=("AXONS", "NEURONS"), default=(256, 256))
    p.add_argument("--reference", choices=sorted(zoo.NETWORKS), help="compare against reported figures")

    p = sub.add_parser("verify", help="check a mapping directory against the dense oracle")
    common(p)
    p.add_argument("--input", type=Path)
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.add_argument("--activation", choices=ACTIVATIONS, default="linear")

    p = sub.add_parser("simulate", help="rate-coded spiking run over a mapping directory")
    common(p, weights=False)
    p.add_argument("--input", type=Path, help="per-pixel firing probabilities")
    p.add_argument("--timesteps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spikes", type=Path, help="spike-count CSV (default OUT/spikes.csv)")
    defaults = LIFParams()
    p.add_argument("--tau-m", type=float, default=defaults.tau_m)
    p.add_argument("--dt", type=float, default=defaults.dt)
    p.add_argument("--resistance", type=float, default=defaults.R)
    p.add_argument("--u-rest", type=float, default=defaults.u_rest)
    p.add_argument("--u-threshold", type=float, default=defaults.u_threshold)
    p.add_argument("--u-reset", type=float, default=defaults.u_reset)

    p = sub.add_parser("example", help="write a benchmark network with random weights")
    p.add_argument("name", choices=sorted(zoo.NETWORKS))
    p.add_argument("dir", type=Path)
    p.add_argument("--width", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _config(args) -> RunConfig:
    cfg = RunConfig()
    for name in ("network", "weights", "weights_manifest", "out", "input", "tolerance",
                 "timesteps", "seed", "activation", "reference", "spikes"):
        if hasattr(args, name):
            setattr(cfg, name, getattr(args, name))
    if hasattr(args, "core"):
        if min(args.core) < 1:
            raise UsageError("--core capacities must be >= 1")
        cfg.core = tuple(args.core)
    if hasattr(args, "tau_m"):
        cfg.lif = dict(tau_m=args.tau_m, dt=args.dt, R=args.resistance, u_rest=args.u_rest,
                       u_threshold=args.u_threshold, u_reset=args.u_reset)
    return cfg


COMMANDS = {"map": cmd_map, "verify": cmd_verify, "simulate": cmd_simulate}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
        if args.command == "example":
            return cmd_example(args)
        return COMMANDS[args.command](_config(args))
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except XbarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MAPPING
    except (OSError, ValueError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
