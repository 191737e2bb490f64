"""Consent administration facade.

Every operation is dry-run against sealed state first, so a failing call
raises before anything is submitted and leaves the container untouched.
Admissible calls are submitted as ledger transactions and sealed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable

from .. import errors
from ..clock import LogicalClock, to_ms
from ..domain.encoding import hash_ppa
from ..domain.matrix import PermissionMatrix, PhiCatalog, validate_consent
from ..domain.serialize import condition_to_dict, consent_to_dict
from ..domain.types import ArchiveReasonKind, InformedConsent, Ppa, PpaIntegrity, RoleCode
from ..errors import (
    ConsentConflict,
    DuplicatePpaId,
    IncompletePpa,
    PpaConflict,
    TamperedPpa,
    UnknownPpa,
    ValidationFailed,
)
from ..ledger.chain import Block, EventKind, Ledger, Receipt, Transaction, TxStatus, encode_args
from .conflicts import DEFAULT_REQUIRED_ROLES, ConflictFinding, ConflictReport
from .consent_contract import (
    CONSENT_CONTRACT,
    CONTAINER_CODE_SIZE,
    PPA_CONTRACT,
    ConsentContract,
    PpaIntegrityContract,
)
from .container import ContainerView


class Integrity(str, enum.Enum):
    INTACT = "Intact"
    TAMPERED = "Tampered"


class SealMode(str, enum.Enum):
    FORCE = "force"          # seal immediately at the current clock reading (test mode)
    SCHEDULED = "scheduled"  # jump the logical clock to the next due block time
    WALL = "wall"            # sleep until the next block is due


@dataclass
class PpaRegistry:
    """Off-chain PPA store (R_PPA) and patient profiles; only digests go on-chain."""

    store: dict[str, Ppa] = field(default_factory=dict)
    profiles: dict[str, list[str]] = field(default_factory=dict)
    tampered: set[str] = field(default_factory=set)
    deployed: set[str] = field(default_factory=set)

    def profile(self, patient_id: str) -> list[str]:
        return list(self.profiles.get(patient_id, ()))


def _raise_reverted(receipt: Receipt) -> None:
    code, _, message = receipt.error.partition(": ")
    exc_type = getattr(errors, code, errors.ConsentChainError)
    if exc_type in (ConsentConflict, PpaConflict):
        raise exc_type(ConflictReport(), message)
    if exc_type is ValidationFailed:
        raise ValidationFailed([], message)
    raise exc_type(message)


class ConsentService:
    def __init__(self, ledger: Ledger | None = None, *, clock=None,
                 required_roles: Iterable[RoleCode] = DEFAULT_REQUIRED_ROLES,
                 matrix: PermissionMatrix | None = None, catalog: PhiCatalog | None = None,
                 auto_sweep: bool = True, seal_mode: SealMode | str = SealMode.FORCE,
                 sender: str = "hospital") -> None:
        self.clock = clock or LogicalClock()
        self.ledger = ledger or Ledger(genesis_time=self.clock.now_ms())
        self.seal_mode = SealMode(seal_mode)
        self.required_roles = frozenset(RoleCode(r) for r in required_roles)
        self.contract = ConsentContract(self.ledger, matrix=matrix, catalog=catalog, auto_sweep=auto_sweep)
        self.ppa_contract = PpaIntegrityContract()
        self.ledger.register(CONSENT_CONTRACT, self.contract)
        self.ledger.register(PPA_CONTRACT, self.ppa_contract)
        self.registry = PpaRegistry()
        self.sender = sender
        self._next_nonce = 0

    @property
    def matrix(self) -> PermissionMatrix:
        return self.contract.matrix

    @property
    def catalog(self) -> PhiCatalog:
        return self.contract.catalog

    @property
    def auto_sweep(self) -> bool:
        return self.contract.auto_sweep

    # transaction plumbing ----------------------------------------------
    def build_tx(self, target: str, call: str, args: dict, **kw) -> Transaction:
        nonce = max(self.ledger.next_nonce(self.sender), self._next_nonce)
        self._next_nonce = nonce + 1
        return Transaction(self.sender, target, call, encode_args(args), self.clock.now_ms(), nonce, **kw)

    def submit(self, tx: Transaction) -> Receipt:
        return self.ledger.submit(tx)

    def seal(self) -> Block:
        """Seal one block according to the seal mode."""
        if self.seal_mode is SealMode.FORCE:
            now = max(self.clock.now_ms(), self.ledger.blocks[-1].timestamp)
            return self.ledger.seal_block(now, force=True)
        # a submitted tx waits at least one full interval before it can be confirmed
        pool = self.ledger.pending
        earliest = min((tx.submitted_at for tx in pool), default=self.clock.now_ms())
        due = max(self.ledger.next_due, earliest + self.ledger.config.block_interval_ms)
        self.clock.wait_until(due)
        return self.ledger.seal_block(max(self.clock.now_ms(), due))

    def flush(self) -> list[Block]:
        sealed = []
        while self.ledger.pending:
            sealed.append(self.seal())
        return sealed

    def _commit(self, *txs: Transaction) -> list[Receipt]:
        for tx in txs:
            self.submit(tx)
        self.flush()
        receipts = [self.ledger.receipt(tx.tx_id) for tx in txs]
        for r in receipts:
            if r.status is TxStatus.REVERTED:
                _raise_reverted(r)
        return receipts

    # containers ----------------------------------------------------------
    def container(self, patient_id: str) -> ContainerView:
        return self.contract.view(patient_id)

    def has_container(self, patient_id: str) -> bool:
        return self.contract.has_container(patient_id)

    def deploy_container(self, patient_id: str, required_roles: Iterable[RoleCode] | None = None,
                         seed: Iterable[InformedConsent] = ()) -> Receipt:
        """Deploy a patient's container; ``seed`` consents are constructor state and skip conflict checks."""
        if self.contract.has_container(patient_id):
            raise errors.DuplicateContainer(patient_id)
        roles = self.required_roles if required_roles is None else frozenset(RoleCode(r) for r in required_roles)
        seed = list(seed)
        for ic in seed:
            findings = validate_consent(ic, self.catalog, self.matrix)
            if findings:
                raise ValidationFailed(findings)
        args = {"patient_id": patient_id, "required_roles": sorted(r.value for r in roles),
                "seed": [consent_to_dict(ic) for ic in seed]}
        tx = self.build_tx(CONSENT_CONTRACT, "deploy_container", args, is_deploy=True,
                           code_size=CONTAINER_CODE_SIZE)
        return self._commit(tx)[0]

    def _required_roles_for(self, patient_id: str) -> frozenset[RoleCode]:
        if self.contract.has_container(patient_id):
            return self.contract.view(patient_id).required_roles
        return self.required_roles

    # PPA -----------------------------------------------------------------
    def create_ppa(self, ppa: Ppa) -> tuple[str, PpaIntegrity]:
        integrity = hash_ppa(ppa)  # raises IncompletePpa
        if ppa.ppa_id in self.registry.store or self.ppa_contract.digest_for(ppa.ppa_id):
            raise DuplicatePpaId(ppa.ppa_id)
        findings: list[ConflictFinding] = []
        for ic in ppa.icc:
            if ic.patient_id != ppa.patient_id:
                findings.append(ConflictFinding("MatrixViolation", f"{ic.consent_id} names another patient",
                                                (ic.consent_id,)))
            for f in validate_consent(ic, self.catalog, self.matrix):
                findings.append(ConflictFinding(f.code, f.detail, (ic.consent_id,)))
        report = self.contract.detect(ppa.icc, self._required_roles_for(ppa.patient_id))
        findings.extend(f for f in report.findings if f not in findings)
        ids = [ic.consent_id for ic in ppa.icc]
        if len(set(ids)) != len(ids):
            findings.append(ConflictFinding("DuplicateGrant", "consent ids repeat inside the PPA", tuple(sorted(ids))))
        if findings:
            raise PpaConflict(ConflictReport(tuple(findings)),
                              "PPA revision required: " + "; ".join(f"{f.code}: {f.detail}" for f in findings))
        args = {"ppa_id": ppa.ppa_id, "patient_id": ppa.patient_id, "h_ppa": integrity.hex()}
        self._commit(self.build_tx(PPA_CONTRACT, "store_ppa_integrity", args))
        self.registry.store[ppa.ppa_id] = ppa
        self.registry.profiles.setdefault(ppa.patient_id, []).append(ppa.ppa_id)
        return ppa.ppa_id, integrity

    def verify_ppa_integrity(self, ppa_id: str, current: Ppa | None = None) -> Integrity:
        stored = self.ppa_contract.digest_for(ppa_id)
        if stored is None:
            raise UnknownPpa(ppa_id)
        if current is None:
            current = self.registry.store[ppa_id]
        try:
            ok = hash_ppa(current).hex() == stored
        except IncompletePpa:
            ok = False
        if not ok:
            self.registry.tampered.add(ppa_id)
            return Integrity.TAMPERED
        return Integrity.INTACT

    def deploy_consents(self, ppa_id: str) -> list[str]:
        if ppa_id not in self.registry.store:
            raise UnknownPpa(ppa_id)
        if ppa_id in self.registry.tampered or self.verify_ppa_integrity(ppa_id) is Integrity.TAMPERED:
            raise TamperedPpa(f"PPA {ppa_id} no longer matches its on-chain integrity digest")
        ppa = self.registry.store[ppa_id]
        if not self.contract.has_container(ppa.patient_id):
            self.deploy_container(ppa.patient_id)
        view = self.contract.view(ppa.patient_id)
        report = self.contract.check_deploy(view, list(ppa.icc))
        if not report.ok:
            raise ConsentConflict(report, f"PPA {ppa_id} cannot be deployed: {report.describe()}")
        txs = [self.build_tx(CONSENT_CONTRACT, "deploy_consent",
                             {"patient_id": ppa.patient_id, "ppa_id": ppa_id, "consent": consent_to_dict(ic)})
               for ic in ppa.icc]
        self._commit(*txs)
        self.registry.deployed.add(ppa_id)
        return [ic.consent_id for ic in ppa.icc]

    # consent administration --------------------------------------------
    def _settle(self) -> None:
        # archive spent consents first so the dry-run sees what the next block will see
        if self.auto_sweep and not self.ledger.pending:
            self.expire_sweep()

    def create_consent(self, patient_id: str, ic: InformedConsent) -> str:
        self._settle()
        self.contract.check_create(self.contract.view(patient_id), ic)
        self._commit(self.build_tx(CONSENT_CONTRACT, "create_consent",
                                   {"patient_id": patient_id, "consent": consent_to_dict(ic)}))
        return ic.consent_id

    def alter_consent(self, old_id: str, new_ic: InformedConsent) -> str:
        self._settle()
        patient_id = self.contract.owner_of(old_id)
        self.contract.check_alter(self.contract.view(patient_id), old_id, new_ic)
        self._commit(self.build_tx(CONSENT_CONTRACT, "alter_consent", {
            "patient_id": patient_id, "old_id": old_id, "consent": consent_to_dict(new_ic),
        }))
        return new_ic.consent_id

    def terminate_consent(self, consent_id: str) -> None:
        self._settle()
        patient_id = self.contract.owner_of(consent_id)
        self.contract.check_removal(self.contract.view(patient_id), consent_id)
        self._commit(self.build_tx(CONSENT_CONTRACT, "terminate_consent",
                                   {"patient_id": patient_id, "consent_id": consent_id}))

    def archive_consent(self, consent_id: str, reason: ArchiveReasonKind | str, *,
                        replaced_by: str | None = None, violated=None) -> None:
        self._settle()
        patient_id = self.contract.owner_of(consent_id)
        self.contract.check_removal(self.contract.view(patient_id), consent_id)
        args = {"patient_id": patient_id, "consent_id": consent_id,
                "reason": ArchiveReasonKind(reason).value, "replaced_by": replaced_by,
                "violated": condition_to_dict(violated) if violated is not None else None}
        self._commit(self.build_tx(CONSENT_CONTRACT, "archive_consent", args))

    def plan_expirations(self, now: datetime | None = None) -> dict[str, list[tuple[str, dict]]]:
        now_ms = self.clock.now_ms() if now is None else to_ms(now)
        plans = {}
        for pid in self.contract.patients():
            plan = self.contract.plan_expirations(pid, now_ms)
            if plan:
                plans[pid] = plan
        return plans

    def advance_clock(self, when: datetime) -> None:
        """Move a logical clock forward to ``when``; earlier readings and wall clocks are left alone."""
        if isinstance(self.clock, LogicalClock) and to_ms(when) > self.clock.now_ms():
            self.clock.set(when)

    def expire_sweep(self, now: datetime | None = None) -> list[str]:
        """Archive every consent whose calendar or frequency condition is spent.

        Returns the ids archived during this call, including any picked up by
        the automatic sweep that runs when the block seals.
        """
        if now is not None:
            self.advance_clock(now)
        plans = self.plan_expirations()
        if not plans:
            return []
        for pid, plan in plans.items():
            args = {"patient_id": pid,
                    "expirations": [{"consent_id": cid, "violated": v} for cid, v in plan]}
            self.submit(self.build_tx(CONSENT_CONTRACT, "expire_consents", args))
        blocks = self.flush()
        return [ev.payload["consent_id"] for b in blocks for ev in b.events
                if ev.kind is EventKind.CONSENT_EXPIRED]

    def now(self) -> datetime:
        return self.clock.now()
