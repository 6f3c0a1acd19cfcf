"""Command-line entry point: ``pingpong-qkd <scenario> [options]``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from typing import Sequence

from .adversary import InterceptResend, LossHiding, TrojanHorse
from .harness import (
    PRESETS,
    SCENARIOS,
    CalibrationError,
    ConfigError,
    ScenarioConfig,
    load_config,
    preset,
    run_scenario,
)

EXIT_OK, EXIT_IO, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML scenario file; command-line flags override it")
    common.add_argument("--seed", type=int, help="master seed (default 0)")
    common.add_argument("--preset", choices=sorted(PRESETS), help="calibrated parameter preset")
    common.add_argument("--out", help="output directory (default ./out)")
    common.add_argument("--workers", type=int, help="worker processes")

    parser = argparse.ArgumentParser(prog="pingpong-qkd", description="Ping-pong QKD simulator.")
    sub = parser.add_subparsers(dest="scenario", required=True)

    for name in ("transmit", "otp"):
        p = sub.add_parser(name, parents=[common])
        if name == "transmit":
            p.add_argument("--bits", type=int, help="key length (default 10000)")

    p = sub.add_parser("homscan", parents=[common])
    p.add_argument("--bell", choices=("plus", "minus"))
    p.add_argument("--start", type=float, default=None)
    p.add_argument("--stop", type=float, default=None)
    p.add_argument("--step", type=float, default=None)

    p = sub.add_parser("control", parents=[common])
    p.add_argument("--runs", type=int)

    p = sub.add_parser("attack", parents=[common])
    p.add_argument("--runs", type=int)
    p.add_argument("--kind", choices=("intercept_resend", "trojan_horse", "loss_hiding"))
    p.add_argument("--basis", choices=("z", "x"), default="x")
    p.add_argument("--probe-pass", type=float, default=1.0)
    p.add_argument("--photons", type=int, default=1)
    p.add_argument("--transmission", type=float, default=1.0)

    sub.add_parser("calibrate", parents=[common])
    assert set(sub.choices) == set(SCENARIOS)
    return parser


def _attack_from_args(args: argparse.Namespace):
    if args.kind == "intercept_resend":
        return InterceptResend(args.basis)
    if args.kind == "trojan_horse":
        return TrojanHorse(args.probe_pass, args.photons)
    return LossHiding(args.transmission)


def config_from_args(args: argparse.Namespace) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig(args.scenario)
    changes: dict = {"scenario": args.scenario}
    protocol = cfg.protocol
    if args.preset:
        protocol = preset(args.preset, protocol.seed)
        changes["preset"] = args.preset
    if args.seed is not None:
        protocol = replace(protocol, seed=args.seed)
    changes["protocol"] = protocol
    if args.out:
        changes["out_dir"] = args.out
    if args.workers is not None:
        changes["workers"] = args.workers
    if getattr(args, "bits", None) is not None:
        changes["n_bits"] = args.bits
    if getattr(args, "runs", None) is not None:
        changes["n_runs"] = args.runs
    if getattr(args, "bell", None):
        changes["bell"] = args.bell
    if args.scenario == "homscan" and None not in (args.start, args.stop, args.step):
        n = int(round((args.stop - args.start) / args.step)) + 1
        changes["positions"] = tuple(round(args.start + i * args.step, 9) for i in range(n))
    if args.scenario == "attack" and args.kind:
        changes["attack"] = _attack_from_args(args)
    return replace(cfg, **changes)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        _, summary = run_scenario(cfg)
    except CalibrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    print(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
