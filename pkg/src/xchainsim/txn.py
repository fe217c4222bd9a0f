"""Cross-chain transactions: indexed actions under a partial order, the
layer plan used for round scheduling, and the sequential reference
execution that the atomicity checkers compare protocol runs against.
"""

from __future__ import annotations

import graphlib
from dataclasses import dataclass, field
from typing import Optional

from .chain import Address, ScenarioError


class CyclicOrderError(ScenarioError):
    """The declared precedence relation contains a cycle."""


@dataclass(frozen=True)
class IndexedAction:
    action_id: int
    chain: str
    target: Address
    method: str
    params: tuple

    def __post_init__(self):
        if self.target.chain != self.chain:
            raise ScenarioError("action %d targets %s but is indexed on %s"
                                % (self.action_id, self.target.canon(),
                                   self.chain))


@dataclass
class CrossChainTransaction:
    txid: str
    actions: list            # of IndexedAction
    prec: set                # of (before_id, after_id)
    originator: Address
    proposer_chain: str

    def __post_init__(self):
        ids = [a.action_id for a in self.actions]
        if len(set(ids)) != len(ids):
            raise ScenarioError("duplicate action ids in %s" % self.txid)
        known = set(ids)
        for before, after in self.prec:
            if before not in known or after not in known:
                raise ScenarioError("%s: precedence pair (%d,%d) references "
                                    "an unknown action" % (self.txid, before,
                                                           after))
            if before == after:
                raise CyclicOrderError("%s: action %d precedes itself"
                                       % (self.txid, before))
        layer_partition(self)  # raises CyclicOrderError on a cycle

    def action(self, action_id: int) -> IndexedAction:
        for a in self.actions:
            if a.action_id == action_id:
                return a
        raise KeyError(action_id)

    def chains(self) -> list:
        """Participating chains in canonical (sorted id) order."""
        return sorted({a.chain for a in self.actions})

    def chains_declared(self) -> list:
        """Participating chains in first-appearance order of the action
        list; used when the lock-order flag is `declared`."""
        seen: list = []
        for a in self.actions:
            if a.chain not in seen:
                seen.append(a.chain)
        return seen


@dataclass
class LayerPlan:
    layers: list              # of list of action ids, each sorted ascending

    def layer_of(self, action_id: int) -> int:
        for i, layer in enumerate(self.layers):
            if action_id in layer:
                return i
        raise KeyError(action_id)


def layer_partition(txn: CrossChainTransaction) -> LayerPlan:
    """Deterministic longest-path layering of the action DAG.

    An action lands one layer past its latest predecessor, so actions
    with no constraints form layer 0 and the layer count equals the
    longest precedence chain.
    """
    preds: dict[int, set] = {a.action_id: set() for a in txn.actions}
    for before, after in txn.prec:
        preds[after].add(before)
    sorter = graphlib.TopologicalSorter(preds)
    try:
        sorter.prepare()
    except graphlib.CycleError as err:
        raise CyclicOrderError("%s: precedence is cyclic (%s)"
                               % (txn.txid, err.args[1])) from None
    layers = []
    while sorter.is_active():
        ready = sorted(sorter.get_ready())
        layers.append(ready)
        sorter.done(*ready)
    return LayerPlan(layers)


def scope_union(txn: CrossChainTransaction, world, chain_id: str) -> list:
    """All contracts a transaction may touch on one chain, in canonical
    address order: the action targets plus their methods' declared reach."""
    out = set()
    for action in txn.actions:
        if action.chain != chain_id:
            continue
        out.add(action.target)
        contract = world.chains[chain_id].contract(action.target)
        if contract is not None:
            mdef = contract.methods.get(action.method)
            if mdef is not None:
                out |= set(mdef.declared_scope)
    return sorted(out)


def validate_transaction(txn: CrossChainTransaction, world) -> LayerPlan:
    """Scenario-level validation: references resolve and same-layer
    actions on one chain have disjoint scopes (which is what makes
    within-layer execution order irrelevant)."""
    plan = layer_partition(txn)
    for action in txn.actions:
        chain = world.chains.get(action.chain)
        if chain is None:
            raise ScenarioError("%s: action %d references unknown chain %s"
                                % (txn.txid, action.action_id, action.chain))
        contract = chain.contract(action.target)
        if contract is None:
            raise ScenarioError("%s: action %d references unknown contract %s"
                                % (txn.txid, action.action_id,
                                   action.target.canon()))
        if action.method not in contract.methods:
            raise ScenarioError("%s: action %d references unknown method "
                                "%s.%s" % (txn.txid, action.action_id,
                                           action.target.canon(),
                                           action.method))
    for layer in plan.layers:
        per_chain: dict[str, set] = {}
        for action_id in layer:
            action = txn.action(action_id)
            contract = world.chains[action.chain].contract(action.target)
            scope = set(contract.methods[action.method].declared_scope)
            scope.add(action.target)
            seen = per_chain.setdefault(action.chain, set())
            overlap = seen & scope
            if overlap:
                raise ScenarioError(
                    "%s: same-layer actions on %s share scope %s"
                    % (txn.txid, action.chain,
                       ",".join(a.canon() for a in sorted(overlap))))
            seen |= scope
    return plan


@dataclass
class IdealReport:
    ok: bool
    results: list = field(default_factory=list)  # (action_id, ok, result/reason)
    failed_layer: Optional[int] = None
    failed_action: Optional[int] = None
    failure_reason: Optional[str] = None


def ideal_execute(txn: CrossChainTransaction, world) -> IdealReport:
    """Reference semantics: run the layers sequentially on a scratch copy
    of the world with no locking and no interference.

    On success the scratch copy's scoped state is committed back into
    `world`; on the first failure `world` is left untouched.  The caller
    normally passes a clone, using the returned report plus the clone's
    state as the expected outcome of a protocol run.
    """
    scoped = {}
    for chain_id in txn.chains():
        for addr in scope_union(txn, world, chain_id):
            scoped[addr] = world.chains[chain_id].contract(addr)
    checkpoint = {addr: dict(c.vars) for addr, c in scoped.items()}

    plan = layer_partition(txn)
    report = IdealReport(True)
    for layer_index, layer in enumerate(plan.layers):
        for action_id in layer:
            action = txn.action(action_id)
            chain = world.chains[action.chain]
            outcome = chain.invoke(chain.executor_addr, action.target,
                                   action.method, list(action.params),
                                   txid=txn.txid)
            if outcome.ok:
                report.results.append((action_id, True, outcome.result))
                continue
            report.ok = False
            report.failed_layer = layer_index
            report.failed_action = action_id
            report.failure_reason = outcome.reason
            report.results.append((action_id, False, outcome.reason))
            for addr, vars_ in checkpoint.items():
                scoped[addr].vars = dict(vars_)
            return report
    return report
