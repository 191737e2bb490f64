"""``consentchain`` command-line entry point."""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, Sequence

from ..authorization import AccessRequest
from ..domain.conditions import RequestContext
from ..domain.serialize import consent_from_dict, ppa_from_dict
from ..domain.types import OperationKind, UserRef
from ..errors import ConsentChainError
from ..ledger.chain import verify_blocks
from ..ledger.config import PROFILES, ChainConfig, profile_config
from ..provenance import Mode, OrientationQuery, ProvenanceGraph
from .bench import DEFAULT_COUNTS, OPERATIONS, plot_report, run_bench, to_csv
from .scenario import ORIENTATIONS, run_scenario
from .state import CHAIN_FILE, Workspace

STATE_ENV = "CONSENTCHAIN_STATE"


def _emit(args, human: str, machine: dict[str, Any]) -> None:
    if args.machine:
        print(json.dumps(machine, sort_keys=True, separators=(",", ":")))
    else:
        print(human)


def _load_json(path: str) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _config(args) -> ChainConfig | None:
    if args.config:
        return ChainConfig.from_file(args.config)
    if args.profile:
        return profile_config(args.profile[0])
    return None


def _workspace(args) -> Workspace:
    at = datetime.fromisoformat(args.at) if args.at else None
    return Workspace.open(args.state, _config(args), at)


# subcommands -----------------------------------------------------------
def cmd_ppa_create(args) -> int:
    ws = _workspace(args)
    ppa = ppa_from_dict(_load_json(args.file))
    ppa_id, integrity = ws.service.create_ppa(ppa)
    deployed = [] if args.no_deploy else ws.service.deploy_consents(ppa_id)
    ws.save()
    _emit(args, f"PPA {ppa_id} stored, h_ppa={integrity.hex()}"
                + (f", deployed {', '.join(deployed)}" if deployed else ""),
          {"ppa_id": ppa_id, "h_ppa": integrity.hex(), "deployed": deployed})
    return 0


def cmd_ppa_verify(args) -> int:
    ws = _workspace(args)
    current = ppa_from_dict(_load_json(args.file)) if args.file else None
    verdict = ws.service.verify_ppa_integrity(args.ppa_id, current)
    ws.save()
    _emit(args, verdict.value, {"ppa_id": args.ppa_id, "integrity": verdict.value})
    return 0 if verdict.value == "Intact" else 1


def cmd_consent_create(args) -> int:
    ws = _workspace(args)
    ic = consent_from_dict(_load_json(args.file))
    ws.service.create_consent(ic.patient_id, ic)
    ws.save()
    _emit(args, f"created {ic.consent_id}", {"consent_id": ic.consent_id})
    return 0


def cmd_consent_alter(args) -> int:
    ws = _workspace(args)
    new = ws.service.alter_consent(args.old_id, consent_from_dict(_load_json(args.file)))
    ws.save()
    _emit(args, f"altered {args.old_id} -> {new}", {"old_id": args.old_id, "consent_id": new})
    return 0


def cmd_consent_terminate(args) -> int:
    ws = _workspace(args)
    ws.service.terminate_consent(args.consent_id)
    ws.save()
    _emit(args, f"terminated {args.consent_id}", {"consent_id": args.consent_id})
    return 0


def cmd_consent_sweep(args) -> int:
    ws = _workspace(args)
    swept = ws.service.expire_sweep()
    ws.save()
    _emit(args, "expired " + (", ".join(swept) if swept else "nothing"), {"swept": swept})
    return 0


def cmd_request(args) -> int:
    ws = _workspace(args)
    ctx = RequestContext(ws.service.now(), args.zone, args.ip)
    rid = args.id or f"req-{ws.service.ledger.height + 1}"
    req = AccessRequest(rid, UserRef.parse(args.user), args.patient, args.phi, OperationKind(args.op), ctx)
    decision = ws.authorizer.authorize(req)
    ws.save()
    reasons = ", ".join(str(r) for r in decision.reasons)
    human = (f"{decision.outcome.value} via {decision.matched_consent}" if decision.granted
             else f"{decision.outcome.value}: {reasons}")
    _emit(args, human, decision.to_dict())
    return 0


def _graph(ws: Workspace) -> ProvenanceGraph:
    return ProvenanceGraph(ws.service.catalog).ingest(ws.service.ledger.events())


def cmd_provenance_query(args) -> int:
    ws = _workspace(args)
    q = OrientationQuery(ORIENTATIONS[args.orientation], args.key, Mode(args.mode))
    rows = _graph(ws).query(q)
    if args.machine:
        for r in rows:
            print(json.dumps(r.to_dict(), sort_keys=True, separators=(",", ":")))
        return 0
    for r in rows:
        line = f"{r.consent_id:<16} {','.join(r.users):<20} {','.join(r.resources):<28} {','.join(r.operations):<18}"
        line += " " + (",".join(r.conditions) or "-")
        if q.mode is Mode.EXECUTED:
            line += f" {r.outcome} at={r.timestamp} n={r.use_ordinal}"
        print(line.rstrip())
    return 0


def cmd_provenance_export(args) -> int:
    ws = _workspace(args)
    data = _graph(ws).export(args.format)
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        sys.stdout.write(data.decode())
    return 0


def cmd_chain_verify(args) -> int:
    path = Path(args.file) if args.file else Path(args.state) / CHAIN_FILE
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln]
    status = verify_blocks(lines)
    _emit(args, str(status), {"status": str(status), "valid": status.valid,
                              "first_bad_height": status.first_bad_height})
    return 0 if status.valid else 1


def cmd_chain_dump(args) -> int:
    ws = _workspace(args)
    sys.stdout.write(ws.service.ledger.dump())
    return 0


def cmd_bench(args) -> int:
    profiles = args.profile or ["desk"]
    counts = [int(c) for c in args.counts.split(",")] if args.counts else list(DEFAULT_COUNTS)
    operations = args.operations.split(",") if args.operations else list(OPERATIONS)
    config = ChainConfig.from_file(args.config) if args.config else None
    rows = run_bench(profiles, counts, operations, config=config, wall=args.wall)
    text = to_csv(rows)
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "bench.csv").write_text(text, encoding="utf-8")
        for path in plot_report(rows, out):
            print(f"wrote {path}", file=sys.stderr)
    return 0


def cmd_run(args) -> int:
    result = run_scenario(args.scenario)
    sys.stdout.write(result.transcript(machine=args.machine))
    return result.exit_code


# parser ----------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--state", default=os.environ.get(STATE_ENV, ".consentchain"),
                        help=f"workspace directory (default ${STATE_ENV} or .consentchain)")
    common.add_argument("--config", help="chain config JSON file")
    common.add_argument("--profile", action="append", choices=sorted(PROFILES),
                        help="chain profile; repeatable for bench")
    common.add_argument("--machine", action="store_true", help="structured one-line JSON output")
    common.add_argument("--at", help="logical time for this command, ISO format")

    parser = argparse.ArgumentParser(prog="consentchain", description="Consent management on an embedded ledger.")
    parser.add_argument("--scenario", help="run a scenario file (same as the 'run' subcommand)")
    parser.add_argument("--machine", action="store_true", help=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command")

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=func)
        return p

    p = add("run", cmd_run, "run a scenario file")
    p.add_argument("--scenario", required=True)

    p = add("ppa-create", cmd_ppa_create, "store a PPA digest and deploy its consents")
    p.add_argument("--file", required=True)
    p.add_argument("--no-deploy", action="store_true")

    p = add("ppa-verify", cmd_ppa_verify, "compare a PPA against its on-chain digest")
    p.add_argument("ppa_id")
    p.add_argument("--file", help="check this PPA document instead of the stored copy")

    p = add("consent-create", cmd_consent_create, "add one consent")
    p.add_argument("--file", required=True)

    p = add("consent-alter", cmd_consent_alter, "replace a consent with a new version")
    p.add_argument("old_id")
    p.add_argument("--file", required=True)

    p = add("consent-terminate", cmd_consent_terminate, "revoke a consent")
    p.add_argument("consent_id")

    add("consent-sweep", cmd_consent_sweep, "archive expired consents")

    p = add("request", cmd_request, "issue an access request")
    p.add_argument("--user", required=True, help="ROLE:user_id")
    p.add_argument("--patient", required=True)
    p.add_argument("--phi", required=True)
    p.add_argument("--op", required=True, choices=[o.value for o in OperationKind])
    p.add_argument("--zone")
    p.add_argument("--ip")
    p.add_argument("--id")

    p = add("provenance-query", cmd_provenance_query, "query the provenance graph")
    p.add_argument("--orientation", required=True, choices=sorted(ORIENTATIONS))
    p.add_argument("--key", required=True)
    p.add_argument("--mode", default="Given", choices=[m.value for m in Mode])

    p = add("provenance-export", cmd_provenance_export, "export the provenance graph")
    p.add_argument("--format", default="dot", choices=["dot", "json"])
    p.add_argument("--out")

    p = add("chain-verify", cmd_chain_verify, "check the hash chain")
    p.add_argument("--file", help="chain dump to check (default: the workspace chain)")

    add("chain-dump", cmd_chain_dump, "print the chain as JSON lines")

    p = add("bench", cmd_bench, "gas and latency benchmark")
    p.add_argument("--counts", help="comma-separated consent counts (default 4..48 step 4)")
    p.add_argument("--operations", help=f"comma-separated subset of {','.join(OPERATIONS)}")
    p.add_argument("--out", help="directory for bench.csv and figures")
    p.add_argument("--wall", action="store_true", help="real block waits instead of simulated time")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        if args.scenario:
            result = run_scenario(args.scenario)
            sys.stdout.write(result.transcript(machine=args.machine))
            return result.exit_code
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except ConsentChainError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
