"""Embedded append-only ledger: pending pool, sealed hash-chained blocks, event logs."""

from __future__ import annotations

import enum
import hashlib
import json
import threading
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Protocol

from ..domain.encoding import H, ZERO_DIGEST, canonical_encode
from ..errors import ChainFormatError, ConsentChainError, DuplicateTxId, NotYetDue, UnknownTarget
from .config import ChainConfig

ZERO_HASH = ZERO_DIGEST.hex()


class EventKind(str, enum.Enum):
    PPA_INTEGRITY_STORED = "PpaIntegrityStored"
    CONSENT_CREATED = "ConsentCreated"
    CONSENT_ALTERED = "ConsentAltered"
    CONSENT_TERMINATED = "ConsentTerminated"
    CONSENT_EXPIRED = "ConsentExpired"
    CONSENT_ARCHIVED = "ConsentArchived"
    ACCESS_GRANTED = "AccessGranted"
    ACCESS_DENIED = "AccessDenied"


class TxStatus(str, enum.Enum):
    PENDING = "Pending"
    SUCCESS = "Success"
    REVERTED = "Reverted"


def selector(call: str) -> bytes:
    return hashlib.sha256(call.encode()).digest()[:4]


def encode_args(args: dict[str, Any]) -> bytes:
    return json.dumps(args, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode()


@dataclass(frozen=True)
class Transaction:
    sender: str
    target: str
    call: str
    args: bytes = b""
    submitted_at: int = 0
    nonce: int = 0
    is_deploy: bool = False
    code_size: int = 0
    gas_used: int | None = None
    status: TxStatus = TxStatus.PENDING
    error: str = ""
    tx_id: str = field(init=False, default="")

    def __post_init__(self) -> None:
        object.__setattr__(self, "tx_id", self.compute_id())

    def compute_id(self) -> str:
        return H(canonical_encode([
            self.sender, self.target, self.call, bytes(self.args), self.submitted_at,
            self.nonce, self.is_deploy, self.code_size,
        ])).hex()

    @property
    def calldata(self) -> bytes:
        return selector(self.call) + bytes(self.args)

    def decoded_args(self) -> dict[str, Any]:
        return json.loads(self.args) if self.args else {}

    def to_dict(self) -> dict[str, Any]:
        return {
            "tx_id": self.tx_id,
            "sender": self.sender,
            "target": self.target,
            "call": self.call,
            "args": bytes(self.args).hex(),
            "submitted_at": self.submitted_at,
            "nonce": self.nonce,
            "is_deploy": self.is_deploy,
            "code_size": self.code_size,
            "gas_used": self.gas_used,
            "status": self.status.value,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Transaction":
        tx = cls(
            sender=d["sender"], target=d["target"], call=d["call"], args=bytes.fromhex(d["args"]),
            submitted_at=d["submitted_at"], nonce=d["nonce"], is_deploy=d["is_deploy"],
            code_size=d["code_size"], gas_used=d["gas_used"], status=TxStatus(d["status"]),
            error=d["error"],
        )
        # keep the recorded id so verification can catch a mismatch
        object.__setattr__(tx, "tx_id", d["tx_id"])
        return tx


@dataclass(frozen=True)
class Receipt:
    tx_id: str
    status: TxStatus
    block_height: int | None = None
    gas_used: int | None = None
    error: str = ""


@dataclass(frozen=True)
class EventRecord:
    event_id: str
    block_height: int
    tx_id: str
    kind: EventKind
    payload: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {
            "event_id": self.event_id,
            "block_height": self.block_height,
            "tx_id": self.tx_id,
            "kind": self.kind.value,
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "EventRecord":
        return cls(d["event_id"], d["block_height"], d["tx_id"], EventKind(d["kind"]), d["payload"])


def merkle_root(leaves: list[bytes]) -> bytes:
    if not leaves:
        return H(b"")
    level = leaves
    while len(level) > 1:
        if len(level) % 2:
            level = level + [level[-1]]
        level = [H(level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


def _json_leaf(record: dict[str, Any]) -> bytes:
    return H(canonical_encode(json.loads(json.dumps(record))))


def compute_block_hash(height: int, parent_hash: str, timestamp: int,
                       transactions: Iterable[Transaction], events: Iterable[EventRecord]) -> str:
    leaves = [_json_leaf(tx.to_dict()) for tx in transactions]
    leaves += [_json_leaf(ev.to_dict()) for ev in events]
    return H(canonical_encode([height, bytes.fromhex(parent_hash), timestamp, merkle_root(leaves)])).hex()


@dataclass(frozen=True)
class Block:
    height: int
    parent_hash: str
    timestamp: int
    transactions: tuple[Transaction, ...]
    events: tuple[EventRecord, ...]
    block_hash: str

    def recompute_hash(self) -> str:
        return compute_block_hash(self.height, self.parent_hash, self.timestamp,
                                  self.transactions, self.events)

    def to_dict(self) -> dict[str, Any]:
        return {
            "height": self.height,
            "parent_hash": self.parent_hash,
            "timestamp": self.timestamp,
            "transactions": [tx.to_dict() for tx in self.transactions],
            "events": [ev.to_dict() for ev in self.events],
            "block_hash": self.block_hash,
        }

    def to_line(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=True)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Block":
        return cls(
            height=d["height"], parent_hash=d["parent_hash"], timestamp=d["timestamp"],
            transactions=tuple(Transaction.from_dict(t) for t in d["transactions"]),
            events=tuple(EventRecord.from_dict(e) for e in d["events"]),
            block_hash=d["block_hash"],
        )

    @classmethod
    def from_line(cls, line: str) -> "Block":
        try:
            block = cls.from_dict(json.loads(line))
        except (ValueError, KeyError, TypeError, AttributeError) as exc:
            raise ChainFormatError(f"undecodable block record: {exc}") from exc
        if block.to_line() != line:
            raise ChainFormatError("block record is not in canonical form")
        return block


@dataclass(frozen=True)
class ChainStatus:
    first_bad_height: int | None = None

    @property
    def valid(self) -> bool:
        return self.first_bad_height is None

    def __str__(self) -> str:
        return "Valid" if self.valid else f"Broken({self.first_bad_height})"


def _block_ok(block: Block, height: int, parent: str | None) -> bool:
    if block.height != height:
        return False
    expected_parent = ZERO_HASH if height == 0 else parent
    if block.parent_hash != expected_parent:
        return False
    tx_ids = set()
    for tx in block.transactions:
        if tx.compute_id() != tx.tx_id:
            return False
        tx_ids.add(tx.tx_id)
    for ev in block.events:
        if ev.block_height != height or ev.tx_id not in tx_ids:
            return False
    try:
        return block.recompute_hash() == block.block_hash
    except (TypeError, ValueError):
        return False


def verify_blocks(blocks: Iterable[Block | str]) -> ChainStatus:
    """Recompute every hash and parent link from height 0.

    Accepts decoded blocks or raw dump lines; an undecodable or non-canonical
    line counts as a broken block at its position.
    """
    parent: str | None = None
    for height, item in enumerate(blocks):
        if isinstance(item, str):
            try:
                item = Block.from_line(item)
            except ChainFormatError:
                return ChainStatus(height)
        if not _block_ok(item, height, parent):
            return ChainStatus(height)
        parent = item.block_hash
    return ChainStatus()


@dataclass
class Execution:
    """What a contract call did: events to log and storage words touched."""

    events: list[tuple[EventKind, dict[str, Any]]] = field(default_factory=list)
    new_slots: int = 0
    updated_slots: int = 0


class Contract(Protocol):
    def execute(self, tx: Transaction, block_height: int, now: int) -> Execution: ...

    def on_seal(self, now: int) -> list[Transaction]: ...


class Ledger:
    """Single-writer ledger. ``test_mode`` lets callers force a seal before it is due."""

    def __init__(self, config: ChainConfig | None = None, *, test_mode: bool = True,
                 genesis_time: int = 0) -> None:
        self.config = config or ChainConfig()
        self.test_mode = test_mode
        self._contracts: dict[str, Contract] = {}
        self._pool: list[Transaction] = []
        self._seen: set[str] = set()
        self._receipts: dict[str, Receipt] = {}
        self._nonces: Counter[str] = Counter()
        self._blocks: list[Block] = []
        self._events_by_consent: dict[str, list[EventRecord]] = defaultdict(list)
        self._grants: Counter[str] = Counter()
        self._lock = threading.RLock()
        self._append(Block(0, ZERO_HASH, genesis_time, (), (),
                           compute_block_hash(0, ZERO_HASH, genesis_time, (), ())))

    # contracts -----------------------------------------------------------
    def register(self, address: str, contract: Contract) -> None:
        self._contracts[address] = contract

    def contract(self, address: str) -> Contract:
        return self._contracts[address]

    # writes --------------------------------------------------------------
    def next_nonce(self, sender: str) -> int:
        return self._nonces[sender]

    def submit(self, tx: Transaction) -> Receipt:
        with self._lock:
            if tx.target not in self._contracts:
                raise UnknownTarget(tx.target)
            if tx.tx_id in self._seen:
                raise DuplicateTxId(tx.tx_id)
            self._seen.add(tx.tx_id)
            self._nonces[tx.sender] = max(self._nonces[tx.sender], tx.nonce + 1)
            self._pool.append(tx)
            receipt = Receipt(tx.tx_id, TxStatus.PENDING)
            self._receipts[tx.tx_id] = receipt
            return receipt

    @property
    def pending(self) -> tuple[Transaction, ...]:
        return tuple(self._pool)

    @property
    def next_due(self) -> int:
        return self._blocks[-1].timestamp + self.config.block_interval_ms

    def seal_block(self, now: int, force: bool = False) -> Block:
        with self._lock:
            last = self._blocks[-1]
            if now < last.timestamp:
                raise ValueError(f"time went backwards: {now} < {last.timestamp}")
            if now < self.next_due and not (force and self.test_mode):
                raise NotYetDue(f"next block due at {self.next_due}, now {now}")
            height = last.height + 1
            queue: list[Transaction] = []
            for address in sorted(self._contracts):
                hook = getattr(self._contracts[address], "on_seal", None)
                if hook is not None:
                    for sys_tx in hook(now):
                        if sys_tx.tx_id not in self._seen:
                            self._seen.add(sys_tx.tx_id)
                            self._nonces[sys_tx.sender] = max(self._nonces[sys_tx.sender], sys_tx.nonce + 1)
                            queue.append(sys_tx)
            queue.extend(self._pool)
            self._pool = []
            included: list[Transaction] = []
            events: list[EventRecord] = []
            for tx in queue:
                done, new_events = self._execute(tx, height, now, len(events))
                included.append(done)
                events.extend(new_events)
            block = Block(height, last.block_hash, now, tuple(included), tuple(events),
                          compute_block_hash(height, last.block_hash, now, included, events))
            self._append(block)
            for tx in included:
                self._receipts[tx.tx_id] = Receipt(tx.tx_id, tx.status, height, tx.gas_used, tx.error)
            return block

    def seal_if_due(self, now: int) -> Block | None:
        if now >= self.next_due:
            return self.seal_block(now)
        return None

    def _execute(self, tx: Transaction, height: int, now: int, event_offset: int):
        schedule = self.config.gas_schedule
        contract = self._contracts[tx.target]
        try:
            result = contract.execute(tx, height, now)
        except ConsentChainError as exc:
            gas = schedule.estimate(tx.calldata)
            done = replace(tx, gas_used=gas, status=TxStatus.REVERTED, error=f"{exc.code}: {exc}")
            return done, []
        gas = schedule.estimate(tx.calldata, result.new_slots, result.updated_slots,
                                tx.is_deploy, tx.code_size)
        done = replace(tx, gas_used=gas, status=TxStatus.SUCCESS)
        events = [
            EventRecord(f"{height}-{event_offset + i}", height, done.tx_id, kind, payload)
            for i, (kind, payload) in enumerate(result.events)
        ]
        return done, events

    def _append(self, block: Block) -> None:
        self._blocks.append(block)
        for ev in block.events:
            cid = ev.payload.get("consent_id")
            if cid:
                self._events_by_consent[cid].append(ev)
                if ev.kind is EventKind.ACCESS_GRANTED:
                    self._grants[cid] += 1

    # reads ---------------------------------------------------------------
    @property
    def blocks(self) -> tuple[Block, ...]:
        return tuple(self._blocks)

    @property
    def height(self) -> int:
        return self._blocks[-1].height

    def receipt(self, tx_id: str) -> Receipt:
        return self._receipts[tx_id]

    def grant_count(self, consent_id: str) -> int:
        return self._grants[consent_id]

    def events(self, kind: EventKind | str | None = None, patient_id: str | None = None,
               consent_id: str | None = None, heights: tuple[int, int] | None = None) -> list[EventRecord]:
        """Sealed events matching every given filter, in chain order. Gas-free."""
        kind = EventKind(kind) if kind is not None else None
        if consent_id is not None:
            source: Iterable[EventRecord] = list(self._events_by_consent.get(consent_id, ()))
        else:
            lo, hi = heights if heights else (0, self.height)
            source = [ev for b in self._blocks[max(lo, 0):hi + 1] for ev in b.events]
        out = []
        for ev in source:
            if kind is not None and ev.kind is not kind:
                continue
            if patient_id is not None and ev.payload.get("patient_id") != patient_id:
                continue
            if heights is not None and not (heights[0] <= ev.block_height <= heights[1]):
                continue
            out.append(ev)
        return out

    def verify_chain(self) -> ChainStatus:
        return verify_blocks(self._blocks)

    # dump / restore ------------------------------------------------------
    def dump(self) -> str:
        return "".join(b.to_line() + "\n" for b in self._blocks)

    def dump_lines(self) -> list[str]:
        return [b.to_line() for b in self._blocks]

    @classmethod
    def restore(cls, text: str, config: ChainConfig | None = None, *, test_mode: bool = True) -> "Ledger":
        """Rebuild a ledger from dump text without re-executing anything."""
        lines = [ln for ln in text.splitlines() if ln]
        if not lines:
            raise ChainFormatError("empty chain dump")
        ledger = cls.__new__(cls)
        ledger.config = config or ChainConfig()
        ledger.test_mode = test_mode
        ledger._contracts = {}
        ledger._pool = []
        ledger._receipts = {}
        ledger._nonces = Counter()
        ledger._blocks = []
        ledger._events_by_consent = defaultdict(list)
        ledger._grants = Counter()
        ledger._lock = threading.RLock()
        for line in lines:
            ledger._append(Block.from_line(line))
        ledger._seen = {tx.tx_id for b in ledger._blocks for tx in b.transactions}
        for b in ledger._blocks:
            for tx in b.transactions:
                ledger._nonces[tx.sender] = max(ledger._nonces[tx.sender], tx.nonce + 1)
                ledger._receipts[tx.tx_id] = Receipt(tx.tx_id, tx.status, b.height, tx.gas_used, tx.error)
        return ledger
