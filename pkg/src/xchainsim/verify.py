"""Post-hoc trace checkers.

All checkers consume a finished Trace (events plus the initial and final
contract snapshots the engine embeds in it) and return a Verdict.  The
secure-transfer audit joins deliveries against sealed send records; the
all-or-nothing audit replays committed transactions through the
sequential reference execution and compares scoped state byte for byte;
the strict-serializability checker searches exhaustively for a
reordering of the mutating events into non-overlapping transaction
blocks that replays to the observed final state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .chain import Address, Contract, ScenarioError
from .engine import World
from .methods import build_contract
from .trace import (INVOKE, LOCK, OUTCOME, RECV, SEND, UNLOCK, Trace, canon)
from .txn import ideal_execute, layer_partition, scope_union

SAFETY = "secure-transfer-safety"
LIVENESS = "secure-transfer-liveness"
EXACTLY_ONCE = "exactly-once"
ALL_OR_NOTHING = "all-or-nothing"
SERIALIZABILITY = "strict-serializability"


class MissingOutcomeError(Exception):
    """Trace lacks an outcome event for a transaction under audit."""


class BudgetExceededError(Exception):
    """Trace has more mutating events than the search budget allows."""


@dataclass
class Violation:
    prop: str
    events: list
    explanation: str

    def render(self) -> str:
        ids = ",".join(str(i) for i in self.events)
        return "violation prop=%s events=[%s] note=%s" % (
            self.prop, ids, self.explanation.replace(" ", "_"))


@dataclass
class Verdict:
    passed: bool
    violations: list = field(default_factory=list)
    witness: Optional[list] = None

    @staticmethod
    def from_violations(violations: list,
                        witness: Optional[list] = None) -> "Verdict":
        return Verdict(passed=not violations, violations=violations,
                       witness=witness)

    def render(self, name: str) -> str:
        lines = ["verdict check=%s pass=%s" % (name, canon(self.passed))]
        lines += [v.render() for v in self.violations]
        if self.witness is not None:
            lines.append("witness events=[%s]"
                         % ",".join(str(i) for i in self.witness))
        return "\n".join(lines)


# --------------------------------------------------------------------------
# Secure transfer


def check_secure_transfer(trace: Trace) -> Verdict:
    violations = []
    sends = {}
    for index, event in enumerate(trace.events):
        if event.kind == SEND:
            sends[event.data["msgid"]] = (index, event)
    delivered: dict[int, int] = {}
    for index, event in enumerate(trace.events):
        if event.kind != RECV:
            continue
        msg_id = event.data["msgid"]
        if msg_id in delivered:
            violations.append(Violation(
                EXACTLY_ONCE, [delivered[msg_id], index],
                "message %d delivered more than once" % msg_id))
            continue
        delivered[msg_id] = index
        if msg_id not in sends:
            violations.append(Violation(
                SAFETY, [index],
                "delivery of message %d without a recorded send" % msg_id))
            continue
        send_index, send = sends[msg_id]
        if send.data["block"] != event.data["origin_block"]:
            violations.append(Violation(
                SAFETY, [send_index, index],
                "message %d claims origin block %d but was sealed in %d"
                % (msg_id, event.data["origin_block"], send.data["block"])))
        elif canon(send.data["payload"]) != canon(event.data["payload"]):
            violations.append(Violation(
                SAFETY, [send_index, index],
                "message %d payload altered in transit" % msg_id))
    for msg_id, (send_index, _) in sorted(sends.items()):
        if msg_id not in delivered:
            violations.append(Violation(
                LIVENESS, [send_index],
                "message %d was sent but never delivered" % msg_id))
    return Verdict.from_violations(violations)


# --------------------------------------------------------------------------
# Replay-world reconstruction


def build_replay_world(trace: Trace, extra_chains=()) -> World:
    """Rebuild a runnable world from the trace's initial snapshot.

    Contracts must come from the built-in method library; custom host
    methods cannot be reconstructed from a serialized trace.
    """
    world = World(seed=0, scenario_name=trace.scenario + ":replay")
    chains = {s.chain for s in trace.initial} | set(extra_chains)
    for chain_id in sorted(chains):
        world.add_chain(chain_id)
    for snap in trace.initial:
        try:
            contract = build_contract(
                Address(snap.chain, snap.local), snap.kind,
                Address.parse(snap.owner), dict(snap.vars),
                {Address.parse(t) for t in snap.trusted})
        except KeyError:
            raise ScenarioError(
                "cannot replay contract kind %r (%s/%s); checkers support "
                "library kinds only" % (snap.kind, snap.chain, snap.local))
        world.chains[snap.chain].add_contract(contract)
    return world


def _outcomes(trace: Trace) -> dict:
    out = {}
    for index, event in enumerate(trace.events):
        if event.kind == OUTCOME:
            out[event.data["txid"]] = (index, event)
    return out


# --------------------------------------------------------------------------
# All or nothing


def check_all_or_nothing(trace: Trace, transactions: list) -> Verdict:
    """Committed transactions must land exactly on the reference result,
    aborted ones must leave no mark: the final scoped state has to equal
    the reference execution of the committed subset, applied in commit
    order to the initial state."""
    outcomes = _outcomes(trace)
    for txn in transactions:
        if txn.txid not in outcomes:
            raise MissingOutcomeError(txn.txid)

    committed = [(index, txn) for txn in transactions
                 for index, event in [outcomes[txn.txid]]
                 if event.data["outcome"] == "Committed"]
    committed.sort(key=lambda pair: pair[0])

    world = build_replay_world(
        trace, extra_chains={a.chain for t in transactions
                             for a in t.actions})
    violations = []
    for index, txn in committed:
        report = ideal_execute(txn, world)
        if not report.ok:
            violations.append(Violation(
                ALL_OR_NOTHING, [index],
                "%s committed but the reference execution fails at action "
                "%s (%s)" % (txn.txid, report.failed_action,
                             report.failure_reason)))

    scoped = set()
    for txn in transactions:
        for chain_id in txn.chains():
            for addr in scope_union(txn, world, chain_id):
                scoped.add((chain_id, addr.local))

    final = trace.final_vars()
    for chain_id, local in sorted(scoped):
        expected = world.chains[chain_id].contract(
            Address(chain_id, local)).vars
        observed = final.get((chain_id, local))
        if observed != expected:
            outcome_ids = [i for i, _ in outcomes.values()]
            violations.append(Violation(
                ALL_OR_NOTHING, sorted(outcome_ids),
                "scoped contract %s/%s ended at %s, reference says %s"
                % (chain_id, local,
                   canon(sorted((observed or {}).items())),
                   canon(sorted(expected.items())))))
    return Verdict.from_violations(violations)


# --------------------------------------------------------------------------
# Strict serializability


@dataclass
class _MutEvent:
    index: int            # position in trace.events
    chain: str
    kind: str             # invoke | lock | unlock
    caller: Address
    target: Address
    method: Optional[str]
    params: tuple
    failure: bool
    txid: Optional[str]
    actor: Optional[str]
    layer: Optional[int] = None


def _extract_mutating(trace: Trace, transactions: list) -> list:
    by_txid = {t.txid: t for t in transactions}
    plans = {t.txid: layer_partition(t) for t in transactions}
    events = []
    for index, event in enumerate(trace.events):
        data = event.data
        if event.kind == INVOKE:
            if not data.get("writes"):
                continue
            ev = _MutEvent(index, event.chain, "invoke", data["caller"],
                           data["target"], data["method"],
                           tuple(data["params"]), False,
                           data.get("txid"), data.get("actor"))
        elif event.kind == LOCK and data["ok"]:
            ev = _MutEvent(index, event.chain, "lock", data["caller"],
                           data["target"], None, (), False,
                           data.get("txid"), None)
        elif event.kind == UNLOCK and data["ok"]:
            ev = _MutEvent(index, event.chain, "unlock", data["caller"],
                           data["target"], None, (), bool(data["failure"]),
                           data.get("txid"), None)
        else:
            continue
        txn = by_txid.get(ev.txid)
        if txn is not None and ev.kind == "invoke":
            for action in txn.actions:
                if (action.target == ev.target and action.method == ev.method
                        and tuple(action.params) == ev.params):
                    ev.layer = plans[txn.txid].layer_of(action.action_id)
                    break
        if ev.txid is not None and ev.txid not in by_txid:
            ev.txid, ev.actor = None, ev.txid
        if ev.txid is None and ev.actor is None:
            ev.actor = ev.caller.canon()
        events.append(ev)
    return events


def _tx_windows(trace: Trace, transactions: list) -> dict:
    """Propose and completion ticks per transaction, for the real-time
    ordering constraint between non-overlapping transactions."""
    windows = {}
    outcomes = _outcomes(trace)
    for txn in transactions:
        start = None
        for event in trace.events:
            if event.kind == INVOKE and event.data.get("txid") == txn.txid \
                    and event.data.get("method") == "propose":
                start = event.tick
                break
        end = outcomes[txn.txid][1].tick if txn.txid in outcomes else None
        windows[txn.txid] = (start, end)
    return windows


def _world_key(world: World):
    parts = []
    for chain_id in sorted(world.chains):
        for addr, contract in sorted(world.chains[chain_id].contracts.items()):
            if contract.kind == "executor":
                continue
            parts.append((addr, tuple(sorted(contract.vars.items())),
                          contract.locked, contract.locked_by,
                          tuple(sorted(contract.checkpoint.items()))
                          if contract.checkpoint else None))
    return tuple(parts)


def _replay_one(world: World, ev: _MutEvent) -> bool:
    chain = world.chains[ev.chain]
    if ev.kind == "lock":
        return chain.lock(ev.caller, ev.target).ok
    if ev.kind == "unlock":
        return chain.unlock(ev.caller, ev.target, ev.failure).ok
    return chain.invoke(ev.caller, ev.target, ev.method,
                        list(ev.params)).ok


def check_strict_serializability(trace: Trace, transactions: list,
                                 budget: int = 14) -> Verdict:
    """Exhaustive witness search with memoized pruning.

    A witness is an ordering of all mutating events such that (1) events
    of one transaction keep their per-chain order and their layer order,
    (2) each transaction's events form one contiguous block, (3) blocks
    of transactions that did not overlap in real time keep that order,
    (4) independent actors keep their own per-chain order, and (5)
    replaying the ordering from the initial snapshot reproduces every
    contract's observed final variables.
    """
    events = _extract_mutating(trace, transactions)
    if len(events) > budget:
        raise BudgetExceededError(
            "%d mutating events exceed the budget of %d"
            % (len(events), budget))

    tx_queues: dict[str, list] = {t.txid: [] for t in transactions}
    actor_queues: dict[tuple, list] = {}
    for ev in events:
        if ev.txid is not None:
            tx_queues[ev.txid].append(ev)
        else:
            actor_queues.setdefault((ev.chain, ev.actor), []).append(ev)

    windows = _tx_windows(trace, transactions)
    tx_ids = [t.txid for t in transactions]
    must_precede = {txid: set() for txid in tx_ids}
    for a in tx_ids:
        for b in tx_ids:
            start_b, end_a = windows[b][0], windows[a][1]
            if a != b and end_a is not None and start_b is not None \
                    and end_a < start_b:
                must_precede[b].add(a)

    base = build_replay_world(
        trace, extra_chains={a.chain for t in transactions
                             for a in t.actions})
    final = trace.final_vars()

    def finals_match(world: World) -> bool:
        for snap in trace.initial:
            contract = world.chains[snap.chain].contract(
                Address(snap.chain, snap.local))
            if contract.vars != final.get((snap.chain, snap.local)):
                return False
        return True

    # The per-tx queues are consumed as multisets with constraints; keep
    # per-tx consumed flags rather than a single cursor.
    consumed: dict[str, list] = {txid: [False] * len(q)
                                 for txid, q in tx_queues.items()}
    actor_cursor = {key: 0 for key in actor_queues}
    seen = set()
    order: list = []

    def tx_candidates(txid: str) -> list:
        queue = tx_queues[txid]
        flags = consumed[txid]
        out = []
        for pos, ev in enumerate(queue):
            if flags[pos]:
                continue
            if any(not flags[p] for p in range(pos)
                   if queue[p].chain == ev.chain):
                continue
            if ev.layer is not None and any(
                    not flags[p] for p in range(len(queue))
                    if queue[p].layer is not None
                    and queue[p].layer < ev.layer):
                continue
            out.append((pos, ev))
        return out

    def search(world: World, open_tx, done_txs: frozenset) -> bool:
        total_left = sum(f.count(False) for f in consumed.values()) + \
            sum(len(q) - actor_cursor[k] for k, q in actor_queues.items())
        if total_left == 0:
            return finals_match(world)
        progress_key = (open_tx,
                        tuple((t, tuple(f)) for t, f in sorted(
                            consumed.items())),
                        tuple(sorted(actor_cursor.items())),
                        _world_key(world))
        if progress_key in seen:
            return False
        seen.add(progress_key)

        candidates = []
        if open_tx is not None:
            for pos, ev in tx_candidates(open_tx):
                candidates.append(("tx", open_tx, pos, ev))
        else:
            for key in sorted(actor_queues):
                cursor = actor_cursor[key]
                if cursor < len(actor_queues[key]):
                    candidates.append(("actor", key, cursor,
                                       actor_queues[key][cursor]))
            for txid in tx_ids:
                if txid in done_txs:
                    continue
                if any(p not in done_txs for p in must_precede[txid]):
                    continue
                for pos, ev in tx_candidates(txid):
                    candidates.append(("tx", txid, pos, ev))

        for source, key, pos, ev in candidates:
            clone = _clone_replay(world)
            if not _replay_one(clone, ev):
                continue
            if source == "tx":
                consumed[key][pos] = True
                next_open = key if any(not f for f in consumed[key]) else None
                next_done = done_txs if next_open else done_txs | {key}
            else:
                actor_cursor[key] += 1
                next_open, next_done = open_tx, done_txs
            order.append(ev.index)
            if search(clone, next_open, next_done):
                return True
            order.pop()
            if source == "tx":
                consumed[key][pos] = False
            else:
                actor_cursor[key] -= 1
        return False

    empty_done = frozenset(txid for txid in tx_ids if not tx_queues[txid])
    if search(base, None, empty_done):
        return Verdict(True, [], witness=list(order))
    return Verdict(False, [Violation(
        SERIALIZABILITY, sorted(ev.index for ev in events),
        "no serial ordering of the mutating events reproduces the final "
        "state under program-order, contiguity, and real-time constraints")],
        witness=None)


def _clone_replay(world: World) -> World:
    clone = World(seed=0, scenario_name="replay")
    for chain_id in sorted(world.chains):
        chain = world.chains[chain_id]
        clone.add_chain(chain_id, chain.executor_addr.local)
        for addr, contract in sorted(chain.contracts.items()):
            if contract.kind == "executor":
                continue
            clone.chains[chain_id].add_contract(Contract(
                addr=addr, vars=dict(contract.vars), owner=contract.owner,
                kind=contract.kind, locked=contract.locked,
                locked_by=contract.locked_by,
                checkpoint=dict(contract.checkpoint)
                if contract.checkpoint else None,
                trusted_executors=set(contract.trusted_executors),
                methods=contract.methods))
    return clone


# --------------------------------------------------------------------------
# Metrics


@dataclass
class MetricsReport:
    per_chain: dict = field(default_factory=dict)
    per_transaction: dict = field(default_factory=dict)

    def render(self) -> str:
        lines = []
        for chain_id in sorted(self.per_chain):
            row = self.per_chain[chain_id]
            lines.append("chain=%s role=%s xc_msgs=%d tx_count=%d op_cost=%d"
                         % (chain_id, row["role"], row["xc_msgs"],
                            row["tx_count"], row["op_cost"]))
        for txid in sorted(self.per_transaction):
            row = self.per_transaction[txid]
            line = "txn=%s outcome=%s rounds=%d" % (txid, row["outcome"],
                                                    row["rounds"])
            if row.get("reason"):
                line += " reason=%s" % row["reason"]
            lines.append(line)
        return "\n".join(lines)


def extract_metrics(trace: Trace) -> MetricsReport:
    report = MetricsReport()
    chains = sorted({s.chain for s in trace.initial} |
                    {e.chain for e in trace.events if e.chain})
    proposer_chains = set()
    for event in trace.events:
        if event.kind == OUTCOME:
            proposer_chains.add(event.chain)
            report.per_transaction[event.data["txid"]] = {
                "outcome": event.data["outcome"],
                "reason": event.data.get("reason"),
                "rounds": event.data["rounds"],
            }
    for chain_id in chains:
        xc_msgs = sum(1 for e in trace.events
                      if e.kind == SEND and e.chain == chain_id)
        tx_count = sum(1 for e in trace.events
                       if e.kind == INVOKE and e.chain == chain_id
                       and e.data["depth"] == 0)
        op_cost = sum(1 for e in trace.events
                      if e.chain == chain_id
                      and e.kind in (INVOKE, LOCK, UNLOCK))
        report.per_chain[chain_id] = {
            "role": "proposer" if chain_id in proposer_chains
            else "participant",
            "xc_msgs": xc_msgs, "tx_count": tx_count, "op_cost": op_cost,
        }
    return report
