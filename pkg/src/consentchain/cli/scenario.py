"""Scenario files: a JSON list of steps run against a fresh ledger, with expectations.

Exit status is 0 when every ``expect`` holds, 1 when one fails and 2 when the
file cannot be parsed. Time comes only from the file, so two runs produce the
same transcript byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any

from ..authorization import AccessRequest, Authorizer
from ..clock import LogicalClock
from ..contract.service import ConsentService
from ..domain.conditions import RequestContext
from ..domain.matrix import PermissionMatrix, PhiCatalog
from ..domain.serialize import consent_from_dict, ppa_from_dict
from ..domain.types import OperationKind, RoleCode, UserRef
from ..errors import ConsentChainError, ScenarioParseError
from ..fixtures import jordan_ppa, table3_ppa
from ..ledger.chain import EventKind, Ledger
from ..ledger.config import ChainConfig
from ..provenance import Mode, Orientation, OrientationQuery, ProvenanceGraph

EXIT_OK, EXIT_FAILED, EXIT_PARSE = 0, 1, 2

REQUIRED = {
    "create_ppa": (),
    "create_consent": ("consent",),
    "alter": ("old_id", "consent"),
    "terminate": ("consent_id",),
    "sweep": (),
    "request": ("user", "patient_id", "phi_id", "operation"),
    "seal": (),
    "query": ("orientation", "key"),
    "expect": ("step",),
}
PREDICATES = {"outcome", "reason", "reasons", "error", "rows", "events", "swept", "matched", "status"}
FIXTURES = {"jordan": jordan_ppa, "table3": table3_ppa}
ORIENTATIONS = {
    "user": Orientation.USER, "resource": Orientation.RESOURCE,
    "operation": Orientation.OPERATION, "condition": Orientation.CONDITION,
    **{o.value: o for o in Orientation},
}
_STEP_KEYS = {"id", "op", "at", "note"}


@dataclass
class StepResult:
    index: int
    step_id: str
    op: str
    status: str = "ok"
    error: str | None = None
    result: dict[str, Any] = field(default_factory=dict)
    txs: list[str] = field(default_factory=list)
    events: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {"index": self.index, "step": self.step_id, "op": self.op, "status": self.status,
                "error": self.error, "result": self.result, "txs": self.txs, "events": self.events}

    def human(self) -> str:
        if self.op == "expect":
            text = "pass" if self.status == "pass" else f"FAIL {self.result.get('message', '')}"
        elif self.error:
            text = f"error {self.error}"
        else:
            text = " ".join(f"{k}={_short(v)}" for k, v in self.result.items()) or "ok"
        ids = f" tx={','.join(t[:12] for t in self.txs)}" if self.txs else ""
        return f"{self.index:>4} {self.step_id:<14} {self.op:<14} {text}{ids}"


def _short(v: Any) -> str:
    if isinstance(v, list):
        return "[" + ",".join(map(str, v)) + "]"
    return str(v)


@dataclass
class ScenarioRun:
    exit_code: int
    steps: list[StepResult]
    message: str = ""

    def transcript(self, machine: bool = False) -> str:
        if machine:
            lines = [json.dumps(s.to_dict(), sort_keys=True, separators=(",", ":")) for s in self.steps]
        else:
            lines = [s.human() for s in self.steps]
        if self.message:
            lines.append(self.message)
        return "".join(line + "\n" for line in lines)


def _parse_time(value: Any, where: str) -> datetime:
    try:
        return datetime.fromisoformat(value)
    except (TypeError, ValueError):
        raise ScenarioParseError(f"{where}: bad timestamp {value!r}") from None


def _check_payloads(step: dict[str, Any]) -> None:
    if "consent" in step:
        consent_from_dict(step["consent"])
    if "ppa" in step:
        ppa_from_dict(step["ppa"])
    if step["op"] == "request":
        UserRef.parse(step["user"])
        OperationKind(step["operation"])
    if step["op"] == "query":
        Mode(step.get("mode", "Given"))
    if "events" in step:
        EventKind(step["events"]["kind"])
        if not isinstance(step["events"]["count"], int):
            raise TypeError("events.count must be an integer")


def parse_scenario(data: Any, base: Path | None = None) -> dict[str, Any]:
    """Validate a decoded scenario and resolve fixture paths; raises ScenarioParseError."""
    if not isinstance(data, dict) or not isinstance(data.get("steps"), list):
        raise ScenarioParseError("a scenario is an object with a 'steps' list")
    base = base or Path.cwd()
    out = dict(data)
    try:
        out["chain"] = ChainConfig.from_dict(data.get("chain", {}))
        out["required_roles"] = [RoleCode(r) for r in data.get("required_roles", ["DOC", "NRS"])]
    except (ValueError, TypeError) as exc:
        raise ScenarioParseError(str(exc)) from None
    for key, loader in (("catalog", PhiCatalog.from_file), ("matrix", PermissionMatrix.from_file)):
        if data.get(key):
            path = base / data[key]
            if not path.exists():
                raise ScenarioParseError(f"{key} fixture {path} not found")
            out[key] = loader(path)
    out["start"] = _parse_time(data.get("start", "2024-06-03T08:00"), "start")
    seen: list[str] = []
    last = out["start"]
    for i, step in enumerate(data["steps"]):
        where = f"step {i}"
        if not isinstance(step, dict) or step.get("op") not in REQUIRED:
            raise ScenarioParseError(f"{where}: unknown op {step.get('op') if isinstance(step, dict) else step!r}")
        sid = step.get("id", f"step-{i}")
        if sid in seen:
            raise ScenarioParseError(f"{where}: duplicate step id {sid!r}")
        missing = [k for k in REQUIRED[step["op"]] if k not in step]
        if missing:
            raise ScenarioParseError(f"{where} ({sid}): missing {', '.join(missing)}")
        if "at" in step:
            at = _parse_time(step["at"], where)
            if at < last:
                raise ScenarioParseError(f"{where} ({sid}): time moves backwards")
            last = at
        if step["op"] == "expect":
            if step["step"] not in seen:
                raise ScenarioParseError(f"{where} ({sid}): expect names unknown earlier step {step['step']!r}")
            unknown = set(step) - PREDICATES - _STEP_KEYS - {"step"}
            if unknown or not (set(step) & PREDICATES):
                raise ScenarioParseError(f"{where} ({sid}): bad predicates {sorted(unknown) or 'none given'}")
        if step["op"] == "create_ppa" and "ppa" not in step and step.get("fixture") not in FIXTURES:
            raise ScenarioParseError(f"{where} ({sid}): create_ppa needs 'ppa' or a known 'fixture'")
        if step["op"] == "query" and step["orientation"] not in ORIENTATIONS:
            raise ScenarioParseError(f"{where} ({sid}): unknown orientation {step['orientation']!r}")
        try:
            _check_payloads(step)
        except (KeyError, ValueError, TypeError, AttributeError) as exc:
            raise ScenarioParseError(f"{where} ({sid}): malformed step ({exc!r})") from None
        seen.append(sid)
    return out


def load_scenario(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioParseError(f"cannot read scenario {path}: {exc}") from None
    return parse_scenario(data, path.parent)


class ScenarioRunner:
    def __init__(self, spec: dict[str, Any]) -> None:
        self.spec = spec
        clock = LogicalClock(spec["start"])
        ledger = Ledger(spec["chain"], genesis_time=clock.now_ms())
        self.service = ConsentService(ledger, clock=clock, required_roles=spec["required_roles"],
                                      matrix=spec.get("matrix"), catalog=spec.get("catalog"),
                                      auto_sweep=spec.get("auto_sweep", True))
        self.authorizer = Authorizer(self.service)
        self.graph = ProvenanceGraph(self.service.catalog)
        self.autoseal = spec.get("autoseal", True)
        self.results: dict[str, StepResult] = {}

    def run(self) -> ScenarioRun:
        out: list[StepResult] = []
        failed = []
        for i, step in enumerate(self.spec["steps"]):
            sid = step.get("id", f"step-{i}")
            res = self.run_step(i, sid, step)
            self.results[sid] = res
            out.append(res)
            if res.status == "fail":
                failed.append(sid)
        if failed:
            return ScenarioRun(EXIT_FAILED, out, f"ExpectationFailed: {', '.join(failed)}")
        return ScenarioRun(EXIT_OK, out)

    def run_step(self, index: int, sid: str, step: dict[str, Any]) -> StepResult:
        svc = self.service
        res = StepResult(index, sid, step["op"])
        if step["op"] == "expect":
            return self._expect(res, step)
        if "at" in step:
            svc.advance_clock(datetime.fromisoformat(step["at"]))
        height = svc.ledger.height
        pending = {tx.tx_id for tx in svc.ledger.pending}
        try:
            res.result = getattr(self, f"_do_{step['op']}")(step)
        except ConsentChainError as exc:
            res.status, res.error = "error", exc.code
        new_blocks = svc.ledger.blocks[height + 1:]
        res.txs = [tx.tx_id for b in new_blocks for tx in b.transactions if tx.tx_id not in pending]
        res.txs += [tx.tx_id for tx in svc.ledger.pending if tx.tx_id not in pending]
        res.events = [ev.event_id for b in new_blocks for ev in b.events]
        return res

    # step handlers ---------------------------------------------------------
    def _do_create_ppa(self, step):
        ppa = ppa_from_dict(step["ppa"]) if "ppa" in step else FIXTURES[step["fixture"]]()
        ppa_id, integrity = self.service.create_ppa(ppa)
        result = {"ppa_id": ppa_id, "h_ppa": integrity.hex()}
        if step.get("deploy", True):
            result["deployed"] = self.service.deploy_consents(ppa_id)
        return result

    def _do_create_consent(self, step):
        ic = consent_from_dict(step["consent"])
        return {"consent_id": self.service.create_consent(ic.patient_id, ic)}

    def _do_alter(self, step):
        return {"consent_id": self.service.alter_consent(step["old_id"], consent_from_dict(step["consent"]))}

    def _do_terminate(self, step):
        self.service.terminate_consent(step["consent_id"])
        return {"consent_id": step["consent_id"]}

    def _do_sweep(self, step):
        return {"swept": self.service.expire_sweep()}

    def _do_seal(self, step):
        return {"blocks": len(self.service.flush())}

    def _do_request(self, step):
        ctx = RequestContext(self.service.now(), step.get("zone"), step.get("source_address"))
        req = AccessRequest(step.get("request_id", step.get("id", "")), UserRef.parse(step["user"]),
                            step["patient_id"], step["phi_id"], step["operation"], ctx)
        decision = self.authorizer.authorize(req)
        if self.autoseal:
            self.service.flush()
        out = {"outcome": decision.outcome.value, "matched": decision.matched_consent,
               "reasons": [str(r) for r in decision.reasons]}
        if decision.use_ordinal is not None:
            out["ordinal"] = decision.use_ordinal
        return out

    def _do_query(self, step):
        self.graph.ingest(self.service.ledger.events())
        q = OrientationQuery(ORIENTATIONS[step["orientation"]], step["key"], Mode(step.get("mode", "Given")))
        rows = self.graph.query(q)
        return {"rows": len(rows), "consents": [r.consent_id for r in rows]}

    # expectations ----------------------------------------------------------
    def _expect(self, res: StepResult, step: dict[str, Any]) -> StepResult:
        target = self.results[step["step"]]
        problems = []

        def check(name, actual, wanted):
            if actual != wanted:
                problems.append(f"{name}: wanted {wanted!r}, got {actual!r}")

        if "status" in step:
            check("status", target.status, step["status"])
        if "error" in step:
            check("error", target.error, step["error"])
        if "outcome" in step:
            check("outcome", target.result.get("outcome"), step["outcome"])
        if "matched" in step:
            check("matched", target.result.get("matched"), step["matched"])
        codes = [r.split("(", 1)[0] for r in target.result.get("reasons", [])]
        if "reason" in step and step["reason"] not in codes:
            problems.append(f"reason: wanted {step['reason']!r} among {codes!r}")
        if "reasons" in step:
            check("reasons", codes, step["reasons"])
        if "rows" in step:
            check("rows", target.result.get("rows"), step["rows"])
        if "swept" in step:
            check("swept", target.result.get("swept"), step["swept"])
        if "events" in step:
            spec = step["events"]
            evs = self.service.ledger.events(EventKind(spec["kind"]), consent_id=spec.get("consent_id"))
            check("events", len(evs), spec["count"])
        res.status = "fail" if problems else "pass"
        res.result = {"target": step["step"]}
        if problems:
            res.result["message"] = f"{step['step']}: " + "; ".join(problems)
        return res


def run_scenario(source: str | Path | dict[str, Any]) -> ScenarioRun:
    """Run a scenario file (or an already decoded dict). Parse problems give exit status 2."""
    try:
        spec = parse_scenario(source) if isinstance(source, dict) else load_scenario(source)
    except ScenarioParseError as exc:
        return ScenarioRun(EXIT_PARSE, [], f"ScenarioParseError: {exc}")
    return ScenarioRunner(spec).run()
