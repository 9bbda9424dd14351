"""Batch CLI: run one scenario deterministically and export its CSV report."""

from __future__ import annotations

import argparse
import sys

from . import harness
from .channel import TraceError


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="simulate",
        description="Packet-level mmWave cellular link simulator",
    )
    p.add_argument("--scenario", required=True,
                   choices=["s1", "s2", "s3", "trace"])
    p.add_argument("--transport", choices=["newreno", "cubic", "udp"])
    p.add_argument("--rate", type=float, help="application source rate [bit/s]")
    p.add_argument("--rlc-buffer", type=int, help="RLC buffer size [bytes]")
    p.add_argument("--tti", choices=["flexible", "fixed"])
    p.add_argument("--core-delay", type=float, help="one-way core latency [s]")
    p.add_argument("--speed", type=float, help="user speed [m/s]")
    p.add_argument("--trace-file", help="channel trace CSV (scenario 'trace')")
    p.add_argument("--duration", type=float, help="simulated seconds")
    p.add_argument("--seed", type=int, required=True, help="run seed (required)")
    p.add_argument("--out", required=True, help="output directory")
    return p


_FLAG_TO_KEY = {
    "transport": "transport",
    "rate": "rate_bps",
    "rlc_buffer": "rlc_buffer_bytes",
    "tti": "tti_mode",
    "core_delay": "core_delay_s",
    "speed": "speed_mps",
    "trace_file": "trace_file",
    "duration": "duration_s",
    "seed": "seed",
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {}
    for flag, key in _FLAG_TO_KEY.items():
        val = getattr(args, flag)
        if val is not None:
            overrides[key] = val
    try:
        cfg = harness.build_scenario(args.scenario, overrides)
        result = harness.run_scenario(cfg)
        paths = harness.export_report(result, args.out)
    except (harness.ConfigError, TraceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    s = result.summary
    print(f"{cfg.name}: goodput {s['mean_goodput_bps'] / 1e9:.3f} Gbps, "
          f"p95 owd {s['p95_owd_s'] * 1e3:.1f} ms, "
          f"report in {paths['summary'].parent}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
