"""Chain-core behavior: guarded invocation, lock/unlock with
checkpoints, block sealing, and the lock-discipline stress test."""

import random

import pytest

from xchainsim import Address, FatalScenarioError, MethodDef, World
from xchainsim.chain import Contract


ALICE = Address("one", "alice")
BOB = Address("one", "bob")
EVE = Address("one", "eve")
TOKEN = Address("one", "token")


@pytest.fixture
def world():
    w = World(seed=0)
    w.add_chain("one")
    w.add_contract("one", "token", "token", owner="alice",
                   init={"bal:alice": 10, "bal:bob": 0, "bal:eve": 0})
    return w


def chain_of(world):
    return world.chains["one"]


def test_transfer_success_applies_balances(world):
    # hand-applied: 10-5=5 for alice, 0+5=5 for bob
    chain = chain_of(world)
    outcome = chain.invoke(ALICE, TOKEN, "transfer", [b"alice", b"bob", 5])
    assert outcome.ok
    assert chain.contract(TOKEN).vars["bal:alice"] == 5
    assert chain.contract(TOKEN).vars["bal:bob"] == 5


def test_transfer_insufficient_funds_is_recorded_noop(world):
    chain = chain_of(world)
    before = dict(chain.contract(TOKEN).vars)
    outcome = chain.invoke(BOB, TOKEN, "transfer", [b"bob", b"alice", 5])
    assert not outcome.ok and outcome.reason == "InsufficientFunds"
    assert chain.contract(TOKEN).vars == before
    assert chain.pending[-1][0] == "invoke" and chain.pending[-1][5] is False


def test_locked_contract_rejects_other_callers(world):
    chain = chain_of(world)
    executor = chain.executor_addr
    assert chain.lock(executor, TOKEN).ok
    outcome = chain.invoke(ALICE, TOKEN, "transfer", [b"alice", b"bob", 1])
    assert not outcome.ok and outcome.reason == "LockedByOther"
    # the lock owner can still run the method
    assert chain.invoke(executor, TOKEN, "transfer", [b"alice", b"bob", 1]).ok


def test_unknown_target_and_method_are_failures(world):
    chain = chain_of(world)
    assert chain.invoke(ALICE, Address("one", "nope"), "transfer",
                        []).reason == "UnknownTarget"
    assert chain.invoke(ALICE, TOKEN, "nope", []).reason == "UnknownMethod"


def test_lock_saves_checkpoint_and_requires_trust(world):
    chain = chain_of(world)
    executor = chain.executor_addr
    pre = dict(chain.contract(TOKEN).vars)
    assert chain.lock(executor, TOKEN).ok
    assert chain.contract(TOKEN).checkpoint == pre
    assert chain.contract(TOKEN).locked_by == executor
    # double lock, even by the owner of the lock, is refused
    assert chain.lock(executor, TOKEN).reason == "AlreadyLocked"
    # untrusted callers are refused on an unlocked contract too
    chain.unlock(executor, TOKEN, failure=False)
    assert chain.lock(EVE, TOKEN).reason == "NotTrusted"


def test_unlock_failure_restores_state_byte_for_byte(world):
    chain = chain_of(world)
    executor = chain.executor_addr
    pre = dict(chain.contract(TOKEN).vars)
    chain.lock(executor, TOKEN)
    chain.invoke(executor, TOKEN, "transfer", [b"alice", b"bob", 7])
    assert chain.contract(TOKEN).vars != pre
    assert chain.unlock(executor, TOKEN, failure=True).ok
    assert chain.contract(TOKEN).vars == pre
    assert not chain.contract(TOKEN).locked
    assert chain.contract(TOKEN).checkpoint is None


def test_unlock_success_keeps_mutations(world):
    chain = chain_of(world)
    executor = chain.executor_addr
    chain.lock(executor, TOKEN)
    chain.invoke(executor, TOKEN, "transfer", [b"alice", b"bob", 7])
    after = dict(chain.contract(TOKEN).vars)
    assert chain.unlock(executor, TOKEN, failure=False).ok
    assert chain.contract(TOKEN).vars == after


def test_unlock_unlocked_or_foreign_is_rejected(world):
    chain = chain_of(world)
    executor = chain.executor_addr
    assert chain.unlock(executor, TOKEN, failure=True).reason == "NotLockOwner"
    chain.lock(executor, TOKEN)
    assert chain.unlock(EVE, TOKEN, failure=True).reason == "NotLockOwner"


def test_add_executor_owner_only_and_idempotent(world):
    chain = chain_of(world)
    extra = Address("one", "exec2")
    assert chain.add_executor(EVE, TOKEN, extra).reason == "NotOwner"
    assert chain.add_executor(ALICE, TOKEN, extra).ok
    before = set(chain.contract(TOKEN).trusted_executors)
    assert chain.add_executor(ALICE, TOKEN, extra).ok
    assert chain.contract(TOKEN).trusted_executors == before


def test_seal_block_indices_and_immutability(world):
    chain = chain_of(world)
    chain.invoke(ALICE, TOKEN, "transfer", [b"alice", b"bob", 1])
    chain.invoke(ALICE, TOKEN, "transfer", [b"alice", b"bob", 1])
    chain.invoke(ALICE, TOKEN, "transfer", [b"alice", b"bob", 1])
    block = chain.seal_block()
    assert block.index == 0 and len(block.records) == 3
    empty = chain.seal_block()
    assert empty.index == 1 and empty.records == ()
    assert chain.ledger[0] is block
    with pytest.raises(Exception):
        block.records.append("x")  # tuple: sealed blocks cannot grow


def test_scope_violation_is_fatal(world):
    chain = chain_of(world)
    other = Contract(addr=Address("one", "other"), vars={"x": 1},
                     owner=ALICE, kind="custom")
    other.methods["poke"] = MethodDef("poke", lambda ctx: True,
                                      frozenset([other.addr]))
    chain.add_contract(other)

    def sneaky(ctx):
        ctx.chain.contract(other.addr).vars["x"] = 99
        return True

    token = chain.contract(TOKEN)
    token.methods["sneaky"] = MethodDef("sneaky", sneaky, frozenset([TOKEN]))
    with pytest.raises(FatalScenarioError):
        chain.invoke(ALICE, TOKEN, "sneaky", [])


def test_nested_call_relays_original_caller(world):
    chain = chain_of(world)
    proxy_addr = Address("one", "proxy")
    token = chain.contract(TOKEN)

    def relay(ctx):
        inner = ctx.call(TOKEN, "transfer", ctx.params)
        if not inner.ok:
            ctx.fail(inner.reason)
        return inner.result

    proxy = Contract(addr=proxy_addr, vars={}, owner=ALICE, kind="custom")
    proxy.methods["relay"] = MethodDef("relay", relay,
                                       frozenset([proxy_addr, TOKEN]))
    chain.add_contract(proxy)

    executor = chain.executor_addr
    chain.lock(executor, TOKEN)
    # eve's call reaches the token through the proxy, but the guard sees
    # eve (the original external caller), not the proxy
    outcome = chain.invoke(EVE, proxy_addr, "relay", [b"alice", b"bob", 1])
    assert not outcome.ok and outcome.reason == "LockedByOther"
    assert chain.invoke(executor, proxy_addr, "relay",
                        [b"alice", b"bob", 1]).ok


def test_nested_failure_rolls_back_whole_invocation(world):
    chain = chain_of(world)
    combo_addr = Address("one", "combo")

    def double_spend(ctx):
        first = ctx.call(TOKEN, "transfer", [b"alice", b"bob", 6])
        assert first.ok
        second = ctx.call(TOKEN, "transfer", [b"alice", b"bob", 6])
        if not second.ok:
            ctx.fail(second.reason)
        return True

    combo = Contract(addr=combo_addr, vars={}, owner=ALICE, kind="custom")
    combo.methods["both"] = MethodDef("both", double_spend,
                                      frozenset([combo_addr, TOKEN]))
    chain.add_contract(combo)
    before = dict(chain.contract(TOKEN).vars)
    outcome = chain.invoke(ALICE, combo_addr, "both", [])
    assert not outcome.ok
    assert chain.contract(TOKEN).vars == before


# ---------------------------------------------------------------------------
# Lock-discipline stress: random operation sequences against a shadow
# model.  Guard safety means state only moves when the caller may move
# it; checkpoint fidelity means a failed unlock lands exactly on the
# state saved by the matching lock.


def _stress_once(seed: int) -> None:
    rng = random.Random(seed)
    world = World(seed=0)
    world.add_chain("s")
    world.add_contract("s", "tok", "token", owner="alice",
                       init={"bal:alice": 20, "bal:bob": 20})
    chain = world.chains["s"]
    token = Address("s", "tok")
    executor = chain.executor_addr
    second = Address("s", "exec2")
    chain.contract(token).trusted_executors.add(second)
    callers = [executor, second, Address("s", "alice"), Address("s", "eve")]

    shadow = dict(chain.contract(token).vars)
    shadow_checkpoint = None
    shadow_locked_by = None

    for _ in range(rng.randint(1, 14)):
        op = rng.choice(("lock", "unlock", "unlock_keep", "transfer"))
        caller = rng.choice(callers)
        if op == "lock":
            outcome = chain.lock(caller, token)
            may = shadow_locked_by is None and caller in (executor, second)
            assert outcome.ok == may
            if may:
                shadow_locked_by = caller
                shadow_checkpoint = dict(shadow)
        elif op in ("unlock", "unlock_keep"):
            failure = op == "unlock"
            outcome = chain.unlock(caller, token, failure=failure)
            may = shadow_locked_by is not None and caller == shadow_locked_by
            assert outcome.ok == may
            if may:
                if failure:
                    shadow = dict(shadow_checkpoint)
                shadow_locked_by = None
                shadow_checkpoint = None
        else:
            amount = rng.randint(0, 25)
            src, dst = rng.sample(("alice", "bob"), 2)
            outcome = chain.invoke(caller, token, "transfer",
                                   [src.encode(), dst.encode(), amount])
            guard_ok = shadow_locked_by is None or caller == shadow_locked_by
            funded = shadow["bal:" + src] >= amount
            assert outcome.ok == (guard_ok and funded)
            if outcome.ok:
                shadow["bal:" + src] -= amount
                shadow["bal:" + dst] += amount
        assert chain.contract(token).vars == shadow
        locked_by = chain.contract(token).locked_by
        assert locked_by == shadow_locked_by
        if shadow_locked_by is None:
            assert chain.contract(token).checkpoint is None
        else:
            assert chain.contract(token).checkpoint == shadow_checkpoint


def test_lock_discipline_stress_10k_sequences():
    for seed in range(10_000):
        _stress_once(seed)
