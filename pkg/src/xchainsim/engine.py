"""Deterministic discrete-event scheduler and world container.

Each tick runs four phases in a fixed order: adversary injections fire,
due bridge messages deliver, protocol machines step on the futures those
deliveries resolved (and newly scheduled transactions are proposed), and
finally every chain seals one block, at which point freshly recorded
bridge sends become in-flight messages with seeded delivery delays.

All nondeterminism (delays, reorder permutations) draws from one seeded
generator, so a (scenario, seed) pair fully determines the trace.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from .adapter import Adapter
from .bridge import Bridge, BridgeId, BridgeMessage, BridgePolicy
from .chain import Address, Chain, Contract, ScenarioError
from .executor import ExecutorContract
from .methods import build_contract
from .trace import ADVERSARY, ANOMALY, SEND, ContractSnapshot, Trace, TraceEvent
from .txn import CrossChainTransaction, validate_transaction

EXECUTOR_LOCAL = "exec"


@dataclass
class StopCondition:
    quiesce: bool = True
    max_ticks: int = 400


@dataclass
class Injection:
    tick: int
    op: str                      # invoke | lock | unlock | forge | drop | corrupt
    chain: Optional[str] = None
    caller: Optional[Address] = None
    target: Optional[Address] = None
    method: Optional[str] = None
    params: list = field(default_factory=list)
    failure: bool = False
    bridge: Optional[BridgeId] = None
    payload: object = None
    fake_block: int = 0
    dest: Optional[Address] = None
    queue_index: Optional[int] = None
    msg_id: Optional[int] = None


class World:
    def __init__(self, seed: int = 0, lock_order: str = "canonical",
                 scenario_name: str = "adhoc"):
        if lock_order not in ("canonical", "declared"):
            raise ScenarioError("lock_order must be canonical or declared")
        self.rng = random.Random(seed)
        self.lock_order = lock_order
        self.trace = Trace(scenario=scenario_name, seed=seed,
                           lock_order=lock_order)
        self.chains: dict[str, Chain] = {}
        self.bridges: dict[BridgeId, Bridge] = {}
        self.adapters: dict[Address, Adapter] = {}
        self.executors: dict[str, ExecutorContract] = {}
        self.transactions: dict[str, CrossChainTransaction] = {}
        self.tx_schedule: list = []       # (tick, txid) in declaration order
        self.injections: list[Injection] = []
        self.machines: list = []
        self.kicks: list = []
        self.future_owner: dict = {}
        self.resolutions: list = []
        self.clock = 0
        self._msg_counter = 0
        self.quiesced = False
        self.end_tick = 0

    # Construction ---------------------------------------------------------

    def add_chain(self, chain_id: str, executor_local: str = EXECUTOR_LOCAL,
                  seal_every: int = 1) -> Chain:
        if chain_id in self.chains:
            raise ScenarioError("duplicate chain %s" % chain_id)
        chain = Chain(chain_id, self.trace, seal_every=seal_every)
        self.chains[chain_id] = chain
        exec_addr = Address(chain_id, executor_local)
        executor = ExecutorContract(self, chain, exec_addr)
        contract = Contract(addr=exec_addr, vars={}, owner=exec_addr,
                            kind="executor",
                            methods={"__dispatch__": executor.dispatch})
        chain.add_contract(contract)
        chain.executor_addr = exec_addr
        self.executors[chain_id] = executor
        return chain

    def add_contract(self, chain_id: str, local: str, kind: str,
                     owner: str = "owner", init: Optional[dict] = None,
                     trusted: Optional[list] = None) -> Contract:
        chain = self.chains[chain_id]
        addr = Address(chain_id, local)
        if trusted is None:
            trusted_addrs = {chain.executor_addr}
        else:
            trusted_addrs = {Address(chain_id, t) for t in trusted}
        contract = build_contract(addr, kind, Address(chain_id, owner),
                                  init or {}, trusted_addrs)
        return chain.add_contract(contract)

    def add_custom_contract(self, contract: Contract) -> Contract:
        return self.chains[contract.addr.chain].add_contract(contract)

    def add_bridge(self, src: str, dst: str, max_delay: int = 3,
                   reorder: bool = False, mode: str = "honest",
                   tag: int = 0) -> Bridge:
        if src not in self.chains or dst not in self.chains:
            raise ScenarioError("bridge %s>%s references an unknown chain"
                                % (src, dst))
        if src == dst:
            raise ScenarioError("bridge endpoints must differ (%s)" % src)
        bridge_id = BridgeId(src, dst, tag)
        if bridge_id in self.bridges:
            raise ScenarioError("duplicate bridge %s" % bridge_id.canon())
        bridge = Bridge(bridge_id, BridgePolicy(max_delay, reorder, mode))
        self.bridges[bridge_id] = bridge
        self._maybe_pair_adapters(bridge_id)
        return bridge

    def _maybe_pair_adapters(self, bridge_id: BridgeId) -> None:
        reverse = BridgeId(bridge_id.dst, bridge_id.src, bridge_id.tag)
        if reverse not in self.bridges:
            return
        for out_id in (bridge_id, reverse):
            in_id = BridgeId(out_id.dst, out_id.src, out_id.tag)
            local = "adapter:%s" % out_id.dst if out_id.tag == 0 \
                else "adapter:%s#%d" % (out_id.dst, out_id.tag)
            addr = Address(out_id.src, local)
            if addr in self.adapters:
                continue
            peer_local = "adapter:%s" % out_id.src if out_id.tag == 0 \
                else "adapter:%s#%d" % (out_id.src, out_id.tag)
            peer = Address(out_id.dst, peer_local)
            adapter = Adapter(self, self.chains[out_id.src], addr, peer,
                              out_id, in_id)
            self.adapters[addr] = adapter
            self.executors[out_id.src].trusted_adapters.add(addr)

    def add_transaction(self, txn: CrossChainTransaction,
                        tick: int = 0) -> None:
        if txn.txid in self.transactions:
            raise ScenarioError("duplicate transaction id %s" % txn.txid)
        validate_transaction(txn, self)
        if txn.proposer_chain not in self.chains:
            raise ScenarioError("%s: unknown proposer chain %s"
                                % (txn.txid, txn.proposer_chain))
        self.transactions[txn.txid] = txn
        self.tx_schedule.append((tick, txn.txid))

    def add_injection(self, injection: Injection) -> None:
        self.injections.append(injection)

    # Wiring helpers ---------------------------------------------------------

    def adapter_between(self, local_chain: str, remote_chain: str,
                        tag: int = 0) -> Adapter:
        local = "adapter:%s" % remote_chain if tag == 0 \
            else "adapter:%s#%d" % (remote_chain, tag)
        adapter = self.adapters.get(Address(local_chain, local))
        if adapter is None:
            raise ScenarioError("no adapter pair between %s and %s"
                                % (local_chain, remote_chain))
        return adapter

    def next_msg_id(self) -> int:
        self._msg_counter += 1
        return self._msg_counter

    def queue_send(self, bridge_id: BridgeId, sender: Address, payload,
                   dest: Address) -> int:
        """Record a bridge send on the source chain; the message enters
        the bridge when the surrounding block seals."""
        bridge = self.bridges.get(bridge_id)
        if bridge is None:
            raise ScenarioError("unknown bridge %s" % bridge_id.canon())
        bridge.validate_send(sender, dest)
        msg_id = self.next_msg_id()
        self.chains[bridge_id.src].pending.append(
            ("send", bridge_id, msg_id, sender, dest, payload))
        return msg_id

    def notify_resolution(self, adapter: Adapter, future) -> None:
        self.resolutions.append((adapter, future))

    # Run loop -----------------------------------------------------------

    def snapshot(self) -> list:
        out = []
        for chain_id in sorted(self.chains):
            for addr, contract in sorted(self.chains[chain_id].contracts
                                         .items()):
                if contract.kind == "executor":
                    continue
                out.append(ContractSnapshot(
                    chain=chain_id, local=addr.local, kind=contract.kind,
                    owner=contract.owner.canon(),
                    trusted=tuple(sorted(a.canon()
                                         for a in contract.trusted_executors)),
                    vars=dict(contract.vars)))
        return out

    def run(self, stop: Optional[StopCondition] = None) -> Trace:
        stop = stop or StopCondition()
        self.trace.initial = self.snapshot()
        injections_by_tick: dict[int, list] = {}
        for injection in self.injections:
            injections_by_tick.setdefault(injection.tick, []).append(injection)
        schedule_by_tick: dict[int, list] = {}
        for tick, txid in self.tx_schedule:
            schedule_by_tick.setdefault(tick, []).append(txid)
        last_scheduled = max([t for t, _ in self.tx_schedule] +
                             [i.tick for i in self.injections] + [0])

        try:
            for tick in range(stop.max_ticks):
                self.clock = tick
                for chain in self.chains.values():
                    chain.clock = tick

                for injection in injections_by_tick.get(tick, ()):
                    self._apply_injection(injection)
                self._drain_kicks()

                for bridge_id in sorted(self.bridges):
                    bridge = self.bridges[bridge_id]
                    for message in bridge.take_due(tick, self.rng):
                        adapter = self.adapters.get(message.dest)
                        if adapter is None:
                            self.trace.append(TraceEvent(
                                tick, ANOMALY, bridge_id.dst,
                                {"what": "NoSuchAdapter",
                                 "msgid": message.msg_id}))
                            continue
                        adapter.on_recv(message)

                pending_resolutions = self.resolutions
                self.resolutions = []
                for adapter, future in pending_resolutions:
                    owner = self.future_owner.get((adapter.addr, future.seq))
                    if owner is not None:
                        owner.on_future(adapter, future)

                for txid in schedule_by_tick.get(tick, ()):
                    txn = self.transactions[txid]
                    chain = self.chains[txn.proposer_chain]
                    chain.invoke(txn.originator, chain.executor_addr,
                                 "propose", [txid.encode()], txid=txid)
                    self._drain_kicks()

                for chain_id in sorted(self.chains):
                    chain = self.chains[chain_id]
                    if tick % chain.seal_every == 0:
                        self._seal_chain(chain, tick)

                self.end_tick = tick
                if stop.quiesce and tick >= last_scheduled and \
                        self.quiescent():
                    self.quiesced = True
                    break
        finally:
            # On a fatal mid-run error the partial trace is still closed
            # out so it can be inspected.
            self.trace.final = self.snapshot()
            self.trace.quiesced = self.quiesced
            self.trace.end_tick = self.end_tick
        return self.trace

    def _drain_kicks(self) -> None:
        while self.kicks:
            self.kicks.pop(0).start()

    def _seal_chain(self, chain: Chain, tick: int) -> None:
        block = chain.seal_block()
        for record in block.records:
            if record[0] != "send":
                continue
            _, bridge_id, msg_id, sender, dest, payload = record
            message = BridgeMessage(msg_id, payload, sender, dest,
                                    origin_block=block.index)
            self.bridges[bridge_id].enqueue(message, tick, self.rng)
            self.trace.append(TraceEvent(tick, SEND, bridge_id.src, {
                "bridge": bridge_id, "msgid": msg_id, "sender": sender,
                "dest": dest, "block": block.index, "payload": payload}))

    def quiescent(self) -> bool:
        if any(b.queue for b in self.bridges.values()):
            return False
        for chain in self.chains.values():
            if any(r[0] == "send" for r in chain.pending):
                return False
        if any(not m.done for m in self.machines):
            return False
        for adapter in self.adapters.values():
            if any(not f.terminal for f in adapter.futures.values()):
                return False
        return True

    # Adversary ------------------------------------------------------------

    def _apply_injection(self, injection: Injection) -> None:
        tick = self.clock
        actor = injection.caller.canon() if injection.caller else "bridge"
        if injection.op == "invoke":
            self.trace.append(TraceEvent(tick, ADVERSARY, injection.chain, {
                "op": "invoke", "caller": injection.caller,
                "target": injection.target, "method": injection.method,
                "params": list(injection.params)}))
            self.chains[injection.chain].invoke(
                injection.caller, injection.target, injection.method,
                list(injection.params), actor=actor)
        elif injection.op == "lock":
            self.trace.append(TraceEvent(tick, ADVERSARY, injection.chain, {
                "op": "lock", "caller": injection.caller,
                "target": injection.target}))
            self.chains[injection.chain].lock(injection.caller,
                                              injection.target)
        elif injection.op == "unlock":
            self.trace.append(TraceEvent(tick, ADVERSARY, injection.chain, {
                "op": "unlock", "caller": injection.caller,
                "target": injection.target}))
            self.chains[injection.chain].unlock(injection.caller,
                                                injection.target,
                                                injection.failure)
        elif injection.op == "forge":
            bridge = self.bridges[injection.bridge]
            dest = injection.dest
            if dest is None:
                dest = self.adapter_between(injection.bridge.dst,
                                            injection.bridge.src).addr
            sender = Address(injection.bridge.src,
                             "adapter:%s" % injection.bridge.dst)
            message = BridgeMessage(self.next_msg_id(), injection.payload,
                                    sender, dest, injection.fake_block)
            bridge.forge(message, tick, self.rng)
            self.trace.append(TraceEvent(tick, ADVERSARY, injection.bridge.dst,
                                         {"op": "forge", "bridge":
                                          injection.bridge,
                                          "msgid": message.msg_id,
                                          "fake_block": injection.fake_block,
                                          "payload": injection.payload}))
        elif injection.op in ("drop", "corrupt"):
            bridge = self.bridges[injection.bridge]
            msg_id = injection.msg_id
            if msg_id is None and injection.queue_index is not None:
                queued = bridge.queued_ids()
                if injection.queue_index < len(queued):
                    msg_id = queued[injection.queue_index]
            if msg_id is None:
                self.trace.append(TraceEvent(
                    tick, ADVERSARY, injection.bridge.dst,
                    {"op": injection.op, "bridge": injection.bridge}))
                return
            if injection.op == "drop":
                bridge.drop(msg_id)
            else:
                bridge.corrupt(msg_id, injection.payload)
            self.trace.append(TraceEvent(tick, ADVERSARY, injection.bridge.dst,
                                         {"op": injection.op,
                                          "bridge": injection.bridge,
                                          "msgid": msg_id,
                                          "payload": injection.payload}))
        else:
            raise ScenarioError("unknown injection op %r" % injection.op)

    # Oracle support ---------------------------------------------------------

    def clone_for_oracle(self) -> "World":
        """Interference-free copy for reference execution: same contracts
        and initial variables, all locks cleared, no bridges or traffic."""
        clone = World(seed=0, lock_order=self.lock_order,
                      scenario_name=self.trace.scenario + ":oracle")
        for chain_id in sorted(self.chains):
            chain = self.chains[chain_id]
            clone.add_chain(chain_id, chain.executor_addr.local)
            for addr, contract in sorted(chain.contracts.items()):
                if contract.kind == "executor":
                    continue
                copy = Contract(addr=addr, vars=dict(contract.vars),
                                owner=contract.owner, kind=contract.kind,
                                trusted_executors=set(
                                    contract.trusted_executors),
                                methods=contract.methods)
                clone.chains[chain_id].add_contract(copy)
        return clone
