"""On-ledger contract logic. State changes happen only inside ``execute``.

Every ``check_*`` function is pure so the service can dry-run an operation
against the sealed state before submitting it.
"""

from __future__ import annotations

from typing import Any, Iterable

from ..clock import from_ms
from ..domain.conditions import RequestContext, Verdict
from ..domain.encoding import consent_slots
from ..domain.matrix import PermissionMatrix, PhiCatalog, default_catalog, default_matrix, validate_consent
from ..domain.serialize import condition_from_dict, condition_to_dict, consent_from_dict, consent_to_dict
from ..domain.types import ArchiveReasonKind, InformedConsent, RoleCode
from ..errors import (
    ConsentConflict,
    DuplicateConsentId,
    DuplicateContainer,
    DuplicatePpaId,
    UnknownConsent,
    UnknownFunction,
    UnknownPatient,
    ValidationFailed,
)
from ..ledger.chain import EventKind, Execution, Ledger, Transaction, encode_args
from .conflicts import ConflictReport, detect_conflicts
from .container import ArchiveEntry, ConsentContainer, ContainerView

CONSENT_CONTRACT = "consent-container"
PPA_CONTRACT = "ppa-integrity"
SYSTEM_SENDER = "system"
# nominal bytecode size charged when a patient's container is deployed
CONTAINER_CODE_SIZE = 2000


def consent_payload(ic: InformedConsent) -> dict[str, Any]:
    d = consent_to_dict(ic)
    d.pop("state", None)
    return d


class ConsentContract:
    def __init__(self, ledger: Ledger, *, matrix: PermissionMatrix | None = None,
                 catalog: PhiCatalog | None = None, auto_sweep: bool = True) -> None:
        self.ledger = ledger
        self.matrix = matrix or default_matrix()
        self.catalog = catalog or default_catalog()
        self.auto_sweep = auto_sweep
        self._containers: dict[str, ConsentContainer] = {}
        self._owner: dict[str, str] = {}

    # read side -------------------------------------------------------------
    def has_container(self, patient_id: str) -> bool:
        return patient_id in self._containers

    def view(self, patient_id: str) -> ContainerView:
        try:
            return self._containers[patient_id].snapshot()
        except KeyError:
            raise UnknownPatient(patient_id) from None

    def patients(self) -> list[str]:
        return sorted(self._containers)

    def owner_of(self, consent_id: str) -> str:
        try:
            return self._owner[consent_id]
        except KeyError:
            raise UnknownConsent(f"{consent_id} does not exist") from None

    def detect(self, proposed: Iterable[InformedConsent], required_roles) -> ConflictReport:
        return detect_conflicts(proposed, required_roles, self.matrix)

    # pure checks -----------------------------------------------------------
    def check_new_consent(self, ic: InformedConsent) -> None:
        findings = validate_consent(ic, self.catalog, self.matrix)
        if findings:
            raise ValidationFailed(findings)
        if ic.consent_id in self._owner:
            raise DuplicateConsentId(f"consent id {ic.consent_id} already used")

    def check_create(self, view: ContainerView, ic: InformedConsent) -> None:
        self._check_patient(view, ic)
        self.check_new_consent(ic)
        report = self.detect([*view.active(), ic], view.required_roles)
        if not report.ok:
            raise ConsentConflict(report, f"consent {ic.consent_id} must be modified: {report.describe()}")

    def check_removal(self, view: ContainerView, consent_id: str) -> ConflictReport:
        if consent_id not in view.repository:
            raise UnknownConsent(f"{consent_id} does not exist in the repository")
        rest = [ic for ic in view.active() if ic.consent_id != consent_id]
        report = self.detect(rest, view.required_roles)
        if not report.ok:
            raise ConsentConflict(report, f"{consent_id} cannot be removed: {report.describe()}")
        return report

    def check_alter(self, view: ContainerView, old_id: str, new_ic: InformedConsent) -> None:
        if old_id not in view.repository:
            raise UnknownConsent(f"{old_id} does not exist in the repository")
        self._check_patient(view, new_ic)
        self.check_new_consent(new_ic)
        rest = [ic for ic in view.active() if ic.consent_id != old_id]
        stage1 = self.detect(rest, view.required_roles)
        if not stage1.ok:
            raise ConsentConflict(stage1, f"{old_id} cannot be modified: {stage1.describe()}")
        stage2 = self.detect([*rest, new_ic], view.required_roles)
        if not stage2.ok:
            raise ConsentConflict(stage2, f"modify {new_ic.consent_id}: {stage2.describe()}")

    def check_deploy(self, view: ContainerView, batch: list[InformedConsent]) -> ConflictReport:
        return self.detect([*view.active(), *batch], view.required_roles)

    @staticmethod
    def _check_patient(view: ContainerView, ic: InformedConsent) -> None:
        if ic.patient_id != view.patient_id:
            raise ValidationFailed([], f"consent {ic.consent_id} belongs to {ic.patient_id}, not {view.patient_id}")

    def plan_expirations(self, patient_id: str, now_ms: int) -> list[tuple[str, dict]]:
        """Active consents whose calendar or frequency condition is spent and whose removal is admissible."""
        view = self.view(patient_id)
        now = from_ms(now_ms)
        plan: list[tuple[str, dict]] = []
        remaining = {ic.consent_id: ic for ic in view.active()}
        for ic in view.active():
            ctx = RequestContext(timestamp=now, prior_use_count=self.ledger.grant_count(ic.consent_id))
            violated = None
            for cond in ic.sorted_conditions():
                if cond.terminal and cond.evaluate(ctx).verdict is not Verdict.SATISFIED:
                    violated = cond
                    break
            if violated is None:
                continue
            rest = [c for cid, c in remaining.items() if cid != ic.consent_id]
            if self.detect(rest, view.required_roles).ok:
                del remaining[ic.consent_id]
                plan.append((ic.consent_id, condition_to_dict(violated)))
        return plan

    # ledger hooks ----------------------------------------------------------
    def on_seal(self, now: int) -> list[Transaction]:
        if not self.auto_sweep:
            return []
        txs = []
        nonce = self.ledger.next_nonce(SYSTEM_SENDER)
        for pid in self.patients():
            plan = self.plan_expirations(pid, now)
            if plan:
                args = {"patient_id": pid, "expirations": [{"consent_id": c, "violated": v} for c, v in plan]}
                txs.append(Transaction(SYSTEM_SENDER, CONSENT_CONTRACT, "expire_consents",
                                       encode_args(args), now, nonce + len(txs)))
        return txs

    def execute(self, tx: Transaction, block_height: int, now: int) -> Execution:
        handler = getattr(self, f"_exec_{tx.call}", None)
        if handler is None:
            raise UnknownFunction(f"contract has no function {tx.call!r}")
        return handler(tx.decoded_args(), tx, now)

    # state transitions -----------------------------------------------------
    def _container(self, patient_id: str) -> ConsentContainer:
        try:
            return self._containers[patient_id]
        except KeyError:
            raise UnknownPatient(patient_id) from None

    def _exec_deploy_container(self, args, tx, now) -> Execution:
        pid = args["patient_id"]
        if pid in self._containers:
            raise DuplicateContainer(pid)
        seed = [consent_from_dict(d) for d in args.get("seed", [])]
        for ic in seed:
            if ic.consent_id in self._owner or ic.patient_id != pid:
                raise DuplicateConsentId(ic.consent_id)
        roles = frozenset(RoleCode(r) for r in args.get("required_roles", []))
        box = ConsentContainer(pid, roles)
        for ic in seed:
            box.repository[ic.consent_id] = ic
            self._owner[ic.consent_id] = pid
        self._containers[pid] = box
        out = Execution(new_slots=1 + sum(consent_slots(ic) for ic in seed))
        out.events = [(EventKind.CONSENT_CREATED, {**consent_payload(ic), "source": "seed"}) for ic in seed]
        return out

    def _insert(self, box: ConsentContainer, ic: InformedConsent) -> None:
        box.repository[ic.consent_id] = ic
        self._owner[ic.consent_id] = box.patient_id

    def _exec_deploy_consent(self, args, tx, now) -> Execution:
        box = self._container(args["patient_id"])
        ic = consent_from_dict(args["consent"])
        self._check_patient(box.snapshot(), ic)
        self.check_new_consent(ic)
        report = self.detect([*box.active(), ic], ())
        dupes = [f for f in report.findings if f.code in ("DuplicateGrant", "MatrixViolation")]
        if dupes:
            raise ConsentConflict(ConflictReport(tuple(dupes)))
        self._insert(box, ic)
        payload = {**consent_payload(ic), "source": "ppa", "ppa_id": args["ppa_id"]}
        return Execution([(EventKind.CONSENT_CREATED, payload)], new_slots=consent_slots(ic))

    def _exec_create_consent(self, args, tx, now) -> Execution:
        box = self._container(args["patient_id"])
        ic = consent_from_dict(args["consent"])
        self.check_create(box.snapshot(), ic)
        self._insert(box, ic)
        payload = {**consent_payload(ic), "source": "direct"}
        return Execution([(EventKind.CONSENT_CREATED, payload)], new_slots=consent_slots(ic))

    def _archive(self, box: ConsentContainer, consent_id: str, reason: ArchiveReasonKind, now: int,
                 tx: Transaction, replaced_by: str | None = None, violated: dict | None = None):
        ic = box.repository.pop(consent_id)
        cond = condition_from_dict(violated) if violated else None
        box.archive[consent_id] = ArchiveEntry(ic.archived(reason, now), reason, now, tx.tx_id, replaced_by, cond)
        return (EventKind.CONSENT_ARCHIVED, {
            "consent_id": consent_id, "patient_id": box.patient_id, "reason": reason.value,
            "replaced_by": replaced_by, "violated": violated, "archived_at": now,
        })

    def _exec_alter_consent(self, args, tx, now) -> Execution:
        box = self._container(args["patient_id"])
        old_id = args["old_id"]
        new_ic = consent_from_dict(args["consent"])
        self.check_alter(box.snapshot(), old_id, new_ic)
        altered = (EventKind.CONSENT_ALTERED, {
            "consent_id": old_id, "patient_id": box.patient_id, "reason": "Altered",
            "new_consent_id": new_ic.consent_id,
        })
        archived = self._archive(box, old_id, ArchiveReasonKind.ALTERED, now, tx, replaced_by=new_ic.consent_id)
        self._insert(box, new_ic)
        created = (EventKind.CONSENT_CREATED, {**consent_payload(new_ic), "source": "alteration",
                                               "replaces": old_id})
        return Execution([altered, archived, created], new_slots=1 + consent_slots(new_ic), updated_slots=1)

    def _exec_terminate_consent(self, args, tx, now) -> Execution:
        box = self._container(args["patient_id"])
        cid = args["consent_id"]
        self.check_removal(box.snapshot(), cid)
        terminated = (EventKind.CONSENT_TERMINATED, {
            "consent_id": cid, "patient_id": box.patient_id, "reason": "Terminated",
        })
        archived = self._archive(box, cid, ArchiveReasonKind.TERMINATED, now, tx)
        return Execution([terminated, archived], new_slots=1, updated_slots=1)

    def _exec_archive_consent(self, args, tx, now) -> Execution:
        box = self._container(args["patient_id"])
        cid = args["consent_id"]
        self.check_removal(box.snapshot(), cid)
        reason = ArchiveReasonKind(args["reason"])
        archived = self._archive(box, cid, reason, now, tx, args.get("replaced_by"), args.get("violated"))
        return Execution([archived], new_slots=1, updated_slots=1)

    def _exec_expire_consents(self, args, tx, now) -> Execution:
        box = self._container(args["patient_id"])
        out = Execution()
        for item in args["expirations"]:
            cid = item["consent_id"]
            if cid not in box.repository:
                continue
            rest = [ic for ic in box.active() if ic.consent_id != cid]
            if not self.detect(rest, box.required_roles).ok:
                continue
            out.events.append((EventKind.CONSENT_EXPIRED, {
                "consent_id": cid, "patient_id": box.patient_id, "reason": "Expired",
                "violated": item["violated"],
            }))
            out.events.append(self._archive(box, cid, ArchiveReasonKind.EXPIRED, now, tx,
                                            violated=item["violated"]))
            out.new_slots += 1
            out.updated_slots += 1
        return out

    def _exec_log_access(self, args, tx, now) -> Execution:
        self._container(args["patient_id"])
        granted = args["outcome"] == "Grant"
        kind = EventKind.ACCESS_GRANTED if granted else EventKind.ACCESS_DENIED
        return Execution([(kind, args)], updated_slots=1 if granted else 0)


class PpaIntegrityContract:
    """Stores (ppa_id, H_PPA) pairs; a stored digest is never overwritten."""

    def __init__(self) -> None:
        self._digests: dict[str, dict[str, Any]] = {}

    def digest_for(self, ppa_id: str) -> str | None:
        entry = self._digests.get(ppa_id)
        return entry["h_ppa"] if entry else None

    def entries(self) -> dict[str, dict[str, Any]]:
        return {k: dict(v) for k, v in self._digests.items()}

    def on_seal(self, now: int) -> list[Transaction]:
        return []

    def execute(self, tx: Transaction, block_height: int, now: int) -> Execution:
        if tx.call != "store_ppa_integrity":
            raise UnknownFunction(f"contract has no function {tx.call!r}")
        args = tx.decoded_args()
        if args["ppa_id"] in self._digests:
            raise DuplicatePpaId(args["ppa_id"])
        self._digests[args["ppa_id"]] = {"h_ppa": args["h_ppa"], "patient_id": args["patient_id"],
                                         "stored_at": now}
        payload = {"ppa_id": args["ppa_id"], "patient_id": args["patient_id"], "h_ppa": args["h_ppa"]}
        return Execution([(EventKind.PPA_INTEGRITY_STORED, payload)], new_slots=1)
