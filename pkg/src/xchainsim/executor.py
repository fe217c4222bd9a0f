"""Trusted per-chain transaction executors and the two-phase commit driver.

Every chain hosts one executor contract.  On its own chain an executor
accepts transaction proposals and runs the commit protocol as the
proposer; for transactions proposed elsewhere it acts as a participant,
serving checkpoint/lock, action execution, and unlock requests that
arrive through the chain's bridge adapters.

The proposer walks the participating chains in lock order, acquiring
each chain's scope before contacting the next; executes the layer plan
round by round with one remote call per action; and finally unlocks in
reverse order, restoring checkpoints when anything failed.  A chain that
refused its lock still receives the unlock request during the abort walk
(a no-op for it), which keeps dangling-lock cleanup unconditional.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .chain import Address, FatalScenarioError, MethodFailure
from .trace import OUTCOME, TraceEvent
from .txn import CrossChainTransaction, LayerPlan, layer_partition, scope_union

LOCKING = "locking"
EXECUTING = "executing"
UNLOCKING = "unlocking"
DONE = "done"

COMMITTED = "Committed"
ABORTED = "Aborted"

LOCK_CONFLICT = "LockConflict"
OP_FAILED = "OpFailed"

PROTOCOL_METHODS = ("propose", "lock_scope", "run_action", "unlock_scope")


def encode_address(addr: Address) -> bytes:
    return addr.canon().encode()


def decode_address(value) -> Address:
    if not isinstance(value, bytes):
        raise MethodFailure("BadRequest")
    try:
        return Address.parse(value.decode("utf-8"))
    except Exception:
        raise MethodFailure("BadRequest") from None


def decode_text(value) -> str:
    if not isinstance(value, bytes):
        raise MethodFailure("BadRequest")
    return value.decode("utf-8")


class ExecutorContract:
    """Executor state plus the dispatch handler wired into the chain."""

    def __init__(self, world, chain, addr: Address):
        self.world = world
        self.chain = chain
        self.addr = addr
        self.trusted_adapters: set = set()
        self.active: Optional[ProposerMachine] = None
        self.participant_locks: dict[str, list] = {}

    # Dispatch from chain.invoke ----------------------------------------

    def dispatch(self, caller: Address, method: str, params: list, depth: int):
        if method == "propose":
            return self._propose(caller, params)
        if method == "lock_scope":
            return self._lock_scope(caller, params)
        if method == "run_action":
            return self._run_action(caller, params, depth)
        if method == "unlock_scope":
            return self._unlock_scope(caller, params)
        raise MethodFailure("UnknownMethod")

    def _authorize(self, caller: Address) -> None:
        if caller != self.addr and caller not in self.trusted_adapters:
            raise MethodFailure("NotTrusted")

    def _propose(self, caller: Address, params: list):
        if len(params) != 1:
            raise MethodFailure("BadRequest")
        txid = decode_text(params[0])
        txn = self.world.transactions.get(txid)
        if txn is None or txn.proposer_chain != self.chain.id:
            raise MethodFailure("UnknownTransaction")
        if self.active is not None:
            raise MethodFailure("ExecutorBusy")
        machine = ProposerMachine(self.world, self, txn)
        self.active = machine
        self.world.machines.append(machine)
        self.world.kicks.append(machine)
        return params[0]

    def _lock_scope(self, caller: Address, params: list):
        self._authorize(caller)
        if not params:
            raise MethodFailure("BadRequest")
        txid = decode_text(params[0])
        targets = [decode_address(p) for p in params[1:]]
        acquired = []
        for target in targets:
            outcome = self.chain.lock(self.addr, target, txid=txid)
            if not outcome.ok:
                for held in reversed(acquired):
                    self.chain.unlock(self.addr, held, failure=True, txid=txid)
                raise MethodFailure(LOCK_CONFLICT)
            acquired.append(target)
        self.participant_locks[txid] = acquired
        return True

    def _run_action(self, caller: Address, params: list, depth: int):
        self._authorize(caller)
        if len(params) < 3:
            raise MethodFailure("BadRequest")
        txid = decode_text(params[0])
        target = decode_address(params[1])
        method = decode_text(params[2])
        args = list(params[3:])
        contract = self.chain.contract(target)
        if contract is None:
            raise MethodFailure("UnknownTarget")
        mdef = contract.methods.get(method)
        if mdef is None:
            raise MethodFailure("UnknownMethod")
        needed = set(mdef.declared_scope) | {target}
        held = set(self.participant_locks.get(txid, ()))
        if not needed <= held:
            raise FatalScenarioError(
                "ScopeNotLocked: %s.%s needs %s, %s holds %s for %s"
                % (target.canon(), method,
                   ",".join(a.canon() for a in sorted(needed)),
                   self.addr.canon(),
                   ",".join(a.canon() for a in sorted(held)) or "nothing",
                   txid))
        outcome = self.chain.invoke(self.addr, target, method, args,
                                    depth=depth + 1, txid=txid)
        if not outcome.ok:
            raise MethodFailure(outcome.reason)
        return outcome.result

    def _unlock_scope(self, caller: Address, params: list):
        self._authorize(caller)
        if len(params) != 2 or not isinstance(params[1], bool):
            raise MethodFailure("BadRequest")
        txid = decode_text(params[0])
        failure = params[1]
        for target in reversed(self.participant_locks.pop(txid, [])):
            self.chain.unlock(self.addr, target, failure=failure, txid=txid)
        return True


@dataclass
class RoundResult:
    action_id: int
    ok: bool
    detail: object = None


class ProposerMachine:
    """Event-driven protocol state for one proposed transaction."""

    def __init__(self, world, executor: ExecutorContract,
                 txn: CrossChainTransaction):
        self.world = world
        self.executor = executor
        self.txn = txn
        self.plan: LayerPlan = layer_partition(txn)
        if world.lock_order == "declared":
            self.chain_order = txn.chains_declared()
        else:
            self.chain_order = txn.chains()
        self.scopes = {c: scope_union(txn, world, c) for c in self.chain_order}
        self.phase = LOCKING
        self.failure = False
        self.reason: Optional[str] = None
        self.outcome: Optional[str] = None
        self.round_no = -1
        self.rounds_run = 0
        self.lock_index = 0
        self.contacted: list = []
        self.unlock_queue: list = []
        self.awaiting: dict = {}          # (adapter addr, seq) -> purpose
        self.results: list[RoundResult] = []

    # Engine entry points -------------------------------------------------

    def start(self) -> None:
        self._advance()

    def on_future(self, adapter, future) -> None:
        key = (adapter.addr, future.seq)
        purpose = self.awaiting.pop(key, None)
        if purpose is None:
            return
        kind = purpose[0]
        if kind == "lock":
            if future.ok:
                self.lock_index += 1
            else:
                self._begin_abort(LOCK_CONFLICT)
        elif kind == "action":
            self.results.append(RoundResult(purpose[1], bool(future.ok),
                                            future.result))
            if not future.ok:
                self.failure = True
                self.reason = OP_FAILED
        if not self.awaiting:
            self._advance()

    @property
    def done(self) -> bool:
        return self.phase == DONE

    # Phases --------------------------------------------------------------

    def _advance(self) -> None:
        """Drive the machine until it blocks on a future or reaches Done.

        Only called with no futures outstanding; every issuing helper
        returns control here, so the loop is the single place phases
        change hands.
        """
        while not self.awaiting:
            if self.phase == LOCKING:
                if self.lock_index >= len(self.chain_order):
                    if not self.plan.layers:   # vacuous transaction
                        self.phase = UNLOCKING
                        self.unlock_queue = list(reversed(self.contacted))
                        continue
                    self.phase = EXECUTING
                    self.round_no = 0
                    self._issue_round()
                    continue
                chain_id = self.chain_order[self.lock_index]
                self.contacted.append(chain_id)
                params = [self.txn.txid.encode()] + \
                    [encode_address(a) for a in self.scopes[chain_id]]
                if chain_id == self.executor.chain.id:
                    outcome = self._local_call("lock_scope", params)
                    if outcome.ok:
                        self.lock_index += 1
                    else:
                        self._begin_abort(LOCK_CONFLICT)
                else:
                    self._remote_call(chain_id, "lock_scope", params,
                                      ("lock", chain_id))
            elif self.phase == EXECUTING:
                # A round just completed.
                if self.failure:
                    self._begin_abort(self.reason or OP_FAILED)
                elif self.round_no + 1 < len(self.plan.layers):
                    self.round_no += 1
                    self._issue_round()
                else:
                    self.phase = UNLOCKING
                    self.unlock_queue = list(reversed(self.contacted))
            elif self.phase == UNLOCKING:
                if not self.unlock_queue:
                    self._finish()
                    return
                chain_id = self.unlock_queue.pop(0)
                params = [self.txn.txid.encode(), self.failure]
                if chain_id == self.executor.chain.id:
                    self._local_call("unlock_scope", params)
                else:
                    self._remote_call(chain_id, "unlock_scope", params,
                                      ("unlock", chain_id))
            else:
                return

    def _issue_round(self) -> None:
        self.rounds_run += 1
        for action_id in self.plan.layers[self.round_no]:
            action = self.txn.action(action_id)
            params = [self.txn.txid.encode(), encode_address(action.target),
                      action.method.encode()] + list(action.params)
            if action.chain == self.executor.chain.id:
                outcome = self._local_call("run_action", params)
                self.results.append(RoundResult(action_id, outcome.ok,
                                                outcome.result
                                                if outcome.ok
                                                else outcome.reason))
                if not outcome.ok:
                    self.failure = True
                    self.reason = OP_FAILED
            else:
                self._remote_call(action.chain, "run_action", params,
                                  ("action", action_id))

    def _begin_abort(self, reason: str) -> None:
        self.failure = True
        self.reason = reason
        self.phase = UNLOCKING
        self.unlock_queue = list(reversed(self.contacted))

    def _finish(self) -> None:
        self.phase = DONE
        self.outcome = ABORTED if self.failure else COMMITTED
        if self.executor.active is self:
            self.executor.active = None
        chain = self.executor.chain
        data = {"txid": self.txn.txid, "outcome": self.outcome,
                "rounds": self.rounds_run}
        if self.failure:
            data["reason"] = self.reason
        chain.trace.append(TraceEvent(chain.clock, OUTCOME, chain.id, data))

    def _local_call(self, method: str, params: list):
        chain = self.executor.chain
        return chain.invoke(self.executor.addr, self.executor.addr, method,
                            params, txid=self.txn.txid)

    def _remote_call(self, chain_id: str, method: str, params: list,
                     purpose: tuple) -> None:
        adapter = self.world.adapter_between(self.executor.chain.id, chain_id)
        remote_exec = self.world.chains[chain_id].executor_addr
        future = adapter.rcall(self.executor.addr, remote_exec, method, params)
        self.awaiting[(adapter.addr, future.seq)] = purpose
        self.world.future_owner[(adapter.addr, future.seq)] = self
