"""Per-blockchain state machine: contracts, the lock discipline, and the
block ledger.

A chain holds named contracts.  Each contract carries plain variables
(int | bool | bytes values), lock metadata, and a method table of host
functions.  Method invocations are recorded in a pending list which a
seal step freezes into numbered immutable blocks; the block index is what
bridge messages later cite as their origin.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .trace import INVOKE, LOCK, UNLOCK, SEAL, Trace, TraceEvent

Value = object  # int | bool | bytes


class ScenarioError(Exception):
    """Configuration mistake: bad references, malformed scenario input."""


class FatalScenarioError(Exception):
    """Runtime detection of a protocol or scenario bug; aborts the run."""


class MethodFailure(Exception):
    """Raised inside a method body to reject the invocation.

    The failure is an ordinary outcome: state rolls back, the attempt is
    still recorded on-chain and in the trace.
    """

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True, order=True)
class Address:
    chain: str
    local: str

    def canon(self) -> str:
        return "%s/%s" % (self.chain, self.local)

    @staticmethod
    def parse(text: str) -> "Address":
        chain, _, local = text.partition("/")
        if not chain or not local:
            raise ScenarioError("bad address %r" % text)
        return Address(chain, local)


@dataclass
class MethodDef:
    """A contract method: a deterministic host function plus its declared
    write reach (every contract the body may modify, itself included)."""
    name: str
    body: Callable  # (MethodContext) -> Value
    declared_scope: frozenset  # of Address


@dataclass
class Contract:
    addr: Address
    vars: dict
    owner: Address
    kind: str = "custom"
    locked: bool = False
    locked_by: Optional[Address] = None
    checkpoint: Optional[dict] = None
    trusted_executors: set = field(default_factory=set)
    methods: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Block:
    index: int
    records: tuple


@dataclass
class InvokeOutcome:
    ok: bool
    result: Optional[Value] = None
    reason: Optional[str] = None


class MethodContext:
    """Execution context handed to method bodies.

    `vars` is the live variable dict of the target contract; mutations
    are validated against the method's declared scope and rolled back on
    failure.  `call` invokes another contract's method, relaying the
    original external caller, as a nested invocation of the same chain
    transaction.
    """

    def __init__(self, chain: "Chain", target: Contract, caller: Address,
                 origin: Address, params: list, depth: int, txid, actor):
        self.chain = chain
        self.target = target
        self.vars = target.vars
        self.caller = caller
        self.origin = origin
        self.params = params
        self._depth = depth
        self._txid = txid
        self._actor = actor

    def fail(self, reason: str):
        raise MethodFailure(reason)

    def call(self, target: Address, method: str, params: list) -> InvokeOutcome:
        return self.chain.invoke(self.origin, target, method, params,
                                 depth=self._depth + 1, txid=self._txid,
                                 actor=self._actor)


class Chain:
    def __init__(self, chain_id: str, trace: Trace, seal_every: int = 1):
        self.id = chain_id
        self.trace = trace
        self.seal_every = max(1, seal_every)
        self.contracts: dict[Address, Contract] = {}
        self.ledger: list[Block] = []
        self.pending: list = []
        self.executor_addr: Optional[Address] = None
        self.clock = 0  # current tick, maintained by the engine

    # Construction -----------------------------------------------------

    def add_contract(self, contract: Contract) -> Contract:
        if contract.addr.chain != self.id:
            raise ScenarioError("contract %s added to chain %s"
                                % (contract.addr.canon(), self.id))
        if contract.addr in self.contracts:
            raise ScenarioError("duplicate contract %s" % contract.addr.canon())
        self.contracts[contract.addr] = contract
        return contract

    def contract(self, addr: Address) -> Optional[Contract]:
        return self.contracts.get(addr)

    # Operations -------------------------------------------------------

    def invoke(self, caller: Address, target: Address, method: str,
               params: list, depth: int = 0, txid=None,
               actor=None) -> InvokeOutcome:
        """Run a method and record the attempt (success or not)."""
        contract = self.contracts.get(target)
        if contract is None:
            return self._invoke_failed(caller, target, method, params, depth,
                                       "UnknownTarget", txid, actor)
        mdef = contract.methods.get(method)
        if mdef is None and not self._is_executor(target):
            return self._invoke_failed(caller, target, method, params, depth,
                                       "UnknownMethod", txid, actor)
        if contract.locked and caller != contract.locked_by:
            return self._invoke_failed(caller, target, method, params, depth,
                                       "LockedByOther", txid, actor)

        if self._is_executor(target):
            return self._invoke_executor(caller, target, method, params,
                                         depth, txid, actor)

        # Snapshot every contract so a failure rolls the whole invocation
        # back and writes outside the declared scope are caught (values
        # are immutable, so a dict copy is a full checkpoint).
        pre = {a: dict(c.vars) for a, c in self.contracts.items()}
        ctx = MethodContext(self, contract, caller, caller, params, depth,
                            txid, actor)
        try:
            result = mdef.body(ctx)
        except MethodFailure as f:
            for a, vars_ in pre.items():
                if self.contracts[a].vars != vars_:
                    self.contracts[a].vars = vars_
            return self._invoke_failed(caller, target, method, params, depth,
                                       f.reason, txid, actor)
        changed = [a for a in sorted(pre) if self.contracts[a].vars != pre[a]]
        outside = [a for a in changed if a not in mdef.declared_scope]
        if outside:
            raise FatalScenarioError(
                "method %s.%s wrote outside its declared scope: %s"
                % (target.canon(), method,
                   ",".join(a.canon() for a in outside)))
        writes = tuple(a.canon() for a in changed)
        outcome = InvokeOutcome(True, result)
        self._record_invoke(caller, target, method, params, depth, outcome,
                            writes, txid, actor)
        return outcome

    def lock(self, caller: Address, target: Address, txid=None) -> InvokeOutcome:
        contract = self.contracts.get(target)
        if contract is None:
            raise ScenarioError("lock of unknown contract %s" % target.canon())
        if contract.locked:
            return self._lock_event(caller, target, False, "AlreadyLocked", txid)
        if caller not in contract.trusted_executors:
            return self._lock_event(caller, target, False, "NotTrusted", txid)
        contract.locked = True
        contract.locked_by = caller
        contract.checkpoint = dict(contract.vars)
        return self._lock_event(caller, target, True, None, txid)

    def unlock(self, caller: Address, target: Address, failure: bool,
               txid=None) -> InvokeOutcome:
        contract = self.contracts.get(target)
        if contract is None:
            raise ScenarioError("unlock of unknown contract %s" % target.canon())
        if not contract.locked or caller != contract.locked_by:
            return self._unlock_event(caller, target, failure, False,
                                      "NotLockOwner", txid)
        if failure:
            contract.vars = dict(contract.checkpoint)
        contract.locked = False
        contract.locked_by = None
        contract.checkpoint = None
        return self._unlock_event(caller, target, failure, True, None, txid)

    def add_executor(self, caller: Address, target: Address,
                     executor: Address) -> InvokeOutcome:
        contract = self.contracts.get(target)
        if contract is None:
            raise ScenarioError("addExecutor on unknown contract %s"
                                % target.canon())
        params = [executor.canon().encode()]
        if caller != contract.owner:
            return self._invoke_failed(caller, target, "addExecutor", params,
                                       0, "NotOwner", None, None)
        contract.trusted_executors.add(executor)
        outcome = InvokeOutcome(True, True)
        self._record_invoke(caller, target, "addExecutor", params, 0, outcome,
                            (), None, None)
        return outcome

    def seal_block(self) -> Block:
        block = Block(len(self.ledger), tuple(self.pending))
        self.ledger.append(block)
        self.pending.clear()
        if block.records:
            self.trace.append(TraceEvent(self.clock, SEAL, self.id, {
                "block": block.index, "count": len(block.records)}))
        return block

    # Internals ----------------------------------------------------------

    def _is_executor(self, addr: Address) -> bool:
        return addr == self.executor_addr

    def _invoke_executor(self, caller, target, method, params, depth,
                         txid, actor) -> InvokeOutcome:
        handler = self.contracts[target].methods.get("__dispatch__")
        if handler is None:
            return self._invoke_failed(caller, target, method, params, depth,
                                       "UnknownMethod", txid, actor)
        try:
            result = handler(caller, method, params, depth)
        except MethodFailure as f:
            return self._invoke_failed(caller, target, method, params, depth,
                                       f.reason, txid, actor)
        outcome = InvokeOutcome(True, result)
        self._record_invoke(caller, target, method, params, depth, outcome,
                            (), txid, actor)
        return outcome

    def _invoke_failed(self, caller, target, method, params, depth, reason,
                       txid, actor) -> InvokeOutcome:
        outcome = InvokeOutcome(False, None, reason)
        self._record_invoke(caller, target, method, params, depth, outcome,
                            (), txid, actor)
        return outcome

    def _record_invoke(self, caller, target, method, params, depth, outcome,
                       writes, txid, actor) -> None:
        record = ("invoke", caller, target, method, tuple(params),
                  outcome.ok, outcome.reason)
        self.pending.append(record)
        data = {"caller": caller, "target": target, "method": method,
                "params": list(params), "depth": depth, "ok": outcome.ok}
        if outcome.ok and outcome.result is not None:
            data["result"] = outcome.result
        if not outcome.ok:
            data["err"] = outcome.reason
        if writes:
            data["writes"] = list(writes)
        if txid is not None:
            data["txid"] = txid
        if actor is not None:
            data["actor"] = actor
        self.trace.append(TraceEvent(self.clock, INVOKE, self.id, data))

    def _lock_event(self, caller, target, ok, reason, txid) -> InvokeOutcome:
        self.pending.append(("lock", caller, target, ok, reason))
        data = {"caller": caller, "target": target, "ok": ok}
        if reason:
            data["err"] = reason
        if txid is not None:
            data["txid"] = txid
        self.trace.append(TraceEvent(self.clock, LOCK, self.id, data))
        return InvokeOutcome(ok, None, reason)

    def _unlock_event(self, caller, target, failure, ok, reason,
                      txid) -> InvokeOutcome:
        self.pending.append(("unlock", caller, target, failure, ok, reason))
        data = {"caller": caller, "target": target, "failure": failure,
                "ok": ok}
        if reason:
            data["err"] = reason
        if txid is not None:
            data["txid"] = txid
        self.trace.append(TraceEvent(self.clock, UNLOCK, self.id, data))
        return InvokeOutcome(ok, None, reason)
