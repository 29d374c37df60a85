"""Command line entry points: run, serve, validate, trace-summarize."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import powersim
from .harness import DEFAULT_GATEWAY_PORT, RunConfig, run, summarize_trace_file
from .loader import load_system
from .scl import findings_to_jsonl, parse_scl, validate_against_model


def _add_fixture_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--system", type=Path, default=None,
                   help="system description JSON (default: packaged scenario)")
    p.add_argument("--scl", type=Path, default=None,
                   help="SCL configuration XML (default: packaged scenario)")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="fb61850",
                                     description="function-block substation scenario runner")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario and print the summary")
    _add_fixture_args(p_run)
    p_run.add_argument("--script", type=Path, default=None, help="fault script JSON")
    p_run.add_argument("--mode", choices=["fast", "paced"], default="fast")
    p_run.add_argument("--factor", type=float, default=1.0,
                       help="paced mode: wall ms per virtual ms")
    p_run.add_argument("--horizon-ms", type=int, default=10_000)
    p_run.add_argument("--transport", choices=["inproc", "udp"], default="inproc")
    p_run.add_argument("--servers", action="store_true", help="start the per-device TCP servers")
    p_run.add_argument("--trace-out", type=Path, default=None, help="trace file (JSON lines)")

    p_serve = sub.add_parser("serve", help="paced run with the operator gateway")
    _add_fixture_args(p_serve)
    p_serve.add_argument("--script", type=Path, default=None)
    p_serve.add_argument("--factor", type=float, default=1.0)
    p_serve.add_argument("--horizon-ms", type=int, default=600_000)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--gateway-port", type=int, default=DEFAULT_GATEWAY_PORT)
    p_serve.add_argument("--servers", action="store_true")

    p_val = sub.add_parser("validate", help="cross-check an SCL file against a system")
    _add_fixture_args(p_val)

    p_sum = sub.add_parser("trace-summarize", help="recompute a run summary from a trace file")
    p_sum.add_argument("trace", type=Path)

    args = parser.parse_args(argv)

    if args.command == "run":
        config = RunConfig(
            system_path=args.system,
            scl_path=args.scl,
            script_path=args.script,
            mode=args.mode,
            pace_factor=args.factor,
            horizon_ms=args.horizon_ms,
            transport=args.transport,
            start_servers=args.servers,
            trace_path=args.trace_out,
        )
        summary, trace_path = run(config)
        out = summary.to_json()
        if trace_path is not None:
            out["trace_path"] = str(trace_path)
        print(json.dumps(out, indent=2))
        return 0

    if args.command == "serve":
        from .gateway import PacedGateway
        from .harness import SimulationRun

        config = RunConfig(
            system_path=args.system,
            scl_path=args.scl,
            script_path=args.script,
            mode="paced",
            pace_factor=args.factor,
            horizon_ms=args.horizon_ms,
            start_servers=args.servers,
        )
        sim = SimulationRun(config)
        gw = PacedGateway(sim, host=args.host, port=args.gateway_port)
        print(f"gateway on http://{args.host}:{args.gateway_port} "
              f"(horizon {args.horizon_ms} ms, factor {args.factor})", file=sys.stderr)
        gw.serve()
        return 0

    if args.command == "validate":
        scl_path = args.scl or powersim.scenario_scl_path()
        system_path = args.system or powersim.scenario_system_path()
        doc = parse_scl(Path(scl_path).read_text(encoding="utf-8"))
        system = load_system(system_path)
        findings = validate_against_model(doc, system)
        if findings:
            print(findings_to_jsonl(findings))
            return 1
        print(json.dumps({"consistent": True, "ieds": [i.name for i in doc.ieds]}))
        return 0

    if args.command == "trace-summarize":
        summary = summarize_trace_file(args.trace)
        print(json.dumps(summary.to_json(), indent=2))
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
