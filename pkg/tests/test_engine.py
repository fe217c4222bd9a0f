"""Engine behavior: determinism, quiescence, block-rate skew, scenario
loading and validation."""

import pytest

from xchainsim import (Address, ScenarioError, StopCondition, ValidationError,
                       World, build_world, bundled_scenarios, load_scenario,
                       parse_scenario)

BUNDLED = ["adversary-drop", "adversary-forge", "swap", "swap-lockfail",
           "swap-updatefail", "symmetric-conflict", "three-exchange"]


def test_bundled_scenarios_present():
    assert bundled_scenarios() == BUNDLED


@pytest.mark.parametrize("name", BUNDLED)
def test_same_seed_bit_identical_traces(name):
    scenario = load_scenario(name)
    first = build_world(scenario, seed=42).run(scenario.stop).render()
    second = build_world(scenario, seed=42).run(scenario.stop).render()
    assert first == second


def test_different_seed_changes_schedule_not_outcome():
    scenario = load_scenario("swap")
    ticks = set()
    for seed in range(8):
        world = build_world(scenario, seed=seed)
        world.run(scenario.stop)
        assert world.machines[0].outcome == "Committed"
        ticks.add(world.end_tick)
    assert len(ticks) > 1  # delays actually vary with the seed


def test_quiesce_waits_for_everything():
    scenario = load_scenario("swap")
    world = build_world(scenario, seed=0)
    world.run(scenario.stop)
    assert world.quiesced
    assert all(not b.queue for b in world.bridges.values())
    assert all(m.done for m in world.machines)
    for adapter in world.adapters.values():
        assert all(f.terminal for f in adapter.futures.values())


def test_max_ticks_stop_leaves_quiesced_false():
    scenario = load_scenario("adversary-drop")
    world = build_world(scenario, seed=0)
    world.run(scenario.stop)
    assert not world.quiesced
    assert world.machines[0].outcome is None


def test_seal_skew_still_commits():
    raw = {
        "name": "skewed",
        "chains": [
            {"id": "a", "seal_every": 2, "contracts": [
                {"local": "tok", "kind": "token", "owner": "o",
                 "init": {"x": 9, "y": 0}}]},
            {"id": "b", "contracts": [
                {"local": "tok", "kind": "token", "owner": "o",
                 "init": {"x": 9, "y": 0}}]},
        ],
        "bridges": [
            {"src": "a", "dst": "b", "max_delay": 2},
            {"src": "b", "dst": "a", "max_delay": 2},
        ],
        "transactions": [
            {"txid": "t", "proposer": "a", "actions": [
                {"chain": "a", "target": "tok", "method": "transfer",
                 "params": ["x", "y", 1]},
                {"chain": "b", "target": "tok", "method": "transfer",
                 "params": ["x", "y", 1]},
            ]},
        ],
    }
    scenario = parse_scenario(raw)
    world = build_world(scenario, seed=3)
    world.run(scenario.stop)
    assert world.quiesced
    assert world.machines[0].outcome == "Committed"
    assert world.chains["a"].contract(Address("a", "tok")).vars == \
        {"bal:x": 8, "bal:y": 1}


def test_unknown_chain_reference_names_location():
    raw = {"name": "bad", "chains": [{"id": "a"}],
           "bridges": [{"src": "a", "dst": "ghost"}]}
    with pytest.raises(ValidationError, match="ghost"):
        parse_scenario(raw)


def test_unknown_contract_in_transaction_rejected():
    raw = {
        "name": "bad",
        "chains": [{"id": "a", "contracts": []}],
        "transactions": [{"txid": "t", "proposer": "a", "actions": [
            {"chain": "a", "target": "ghost", "method": "transfer"}]}],
    }
    scenario = parse_scenario(raw)
    with pytest.raises(ScenarioError, match="ghost"):
        build_world(scenario)


def test_cyclic_precedence_rejected_at_build():
    raw = {
        "name": "bad",
        "chains": [{"id": "a", "contracts": [
            {"local": "tok", "kind": "token", "owner": "o",
             "init": {"x": 5}}]}],
        "transactions": [{"txid": "t", "proposer": "a",
                          "actions": [
                              {"id": 0, "chain": "a", "target": "tok",
                               "method": "mint", "params": ["x", 1]},
                              {"id": 1, "chain": "a", "target": "tok",
                               "method": "mint", "params": ["x", 1]}],
                          "prec": [[0, 1], [1, 0]]}],
    }
    scenario = parse_scenario(raw)
    with pytest.raises(ScenarioError):
        build_world(scenario)


def test_missing_scenario_file_is_validation_error():
    with pytest.raises(ValidationError):
        load_scenario("/nonexistent/path.yaml")


def test_fatal_error_aborts_run_with_partial_trace():
    from xchainsim import FatalScenarioError, Injection, MethodDef
    world = World(seed=0)
    world.add_chain("a")
    world.add_contract("a", "tok", "token", owner="o", init={"bal:x": 5})
    world.add_contract("a", "other", "counter", init={"count": 0})
    tok = world.chains["a"].contract(Address("a", "tok"))

    def rogue(ctx):
        ctx.chain.contract(Address("a", "other")).vars["count"] = 7
        return True

    tok.methods["rogue"] = MethodDef("rogue", rogue,
                                     frozenset([Address("a", "tok")]))
    world.add_injection(Injection(tick=1, op="invoke", chain="a",
                                  caller=Address("a", "user"),
                                  target=Address("a", "tok"),
                                  method="rogue", params=[]))
    with pytest.raises(FatalScenarioError):
        world.run(StopCondition(quiesce=False, max_ticks=5))
    # the partial trace is still closed out for inspection
    assert world.trace.final
    assert world.trace.quiesced is False


def test_layered_transaction_runs_round_per_layer():
    # a diamond across two chains: layer count 3, rounds 3
    raw = {
        "name": "diamond",
        "chains": [
            {"id": "a", "contracts": [
                {"local": "t1", "kind": "counter", "init": {"count": 0}},
                {"local": "t2", "kind": "counter", "init": {"count": 0}}]},
            {"id": "b", "contracts": [
                {"local": "t1", "kind": "counter", "init": {"count": 0}},
                {"local": "t2", "kind": "counter", "init": {"count": 0}}]},
        ],
        "bridges": [
            {"src": "a", "dst": "b", "max_delay": 2, "reorder": True},
            {"src": "b", "dst": "a", "max_delay": 2, "reorder": True},
        ],
        "transactions": [
            {"txid": "d", "proposer": "a", "actions": [
                {"id": 0, "chain": "a", "target": "t1", "method": "incr",
                 "params": [1]},
                {"id": 1, "chain": "b", "target": "t1", "method": "incr",
                 "params": [2]},
                {"id": 2, "chain": "a", "target": "t2", "method": "incr",
                 "params": [3]},
                {"id": 3, "chain": "b", "target": "t2", "method": "incr",
                 "params": [4]},
            ], "prec": [[0, 1], [0, 2], [1, 3], [2, 3]]}],
    }
    scenario = parse_scenario(raw)
    world = build_world(scenario, seed=2)
    world.run(scenario.stop)
    machine = world.machines[0]
    assert machine.outcome == "Committed"
    assert machine.rounds_run == 3
    for chain_id, local, count in (("a", "t1", 1), ("b", "t1", 2),
                                   ("a", "t2", 3), ("b", "t2", 4)):
        assert world.chains[chain_id].contract(
            Address(chain_id, local)).vars["count"] == count
