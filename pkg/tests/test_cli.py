"""Command-line interface: exit codes and output shapes."""

from xchainsim.cli import main


def test_run_writes_trace_and_prints_outcome(tmp_path, capsys):
    out = tmp_path / "trace.log"
    code = main(["run", "--scenario", "swap", "--seed", "7",
                 "--out", str(out)])
    assert code == 0
    captured = capsys.readouterr()
    assert "swap1: Committed" in captured.out
    text = out.read_text()
    assert text.startswith("meta scenario=swap seed=7")
    assert "kind=outcome" in text


def test_run_lockfail_reports_abort_reason(capsys):
    code = main(["run", "--scenario", "swap-lockfail", "--out", "/dev/null"])
    assert code == 0
    assert "Aborted(LockConflict)" in capsys.readouterr().out


def test_run_missing_scenario_exits_2(capsys):
    assert main(["run", "--scenario", "no-such-scenario"]) == 2
    assert "error" in capsys.readouterr().err


def test_check_clean_scenario_exits_0(capsys):
    assert main(["check", "--scenario", "swap", "--seed", "3"]) == 0
    out = capsys.readouterr().out
    assert out.count("pass=b1") == 3


def test_check_adversarial_scenarios_exit_1(capsys):
    assert main(["check", "--scenario", "adversary-forge"]) == 1
    out = capsys.readouterr().out
    assert "secure-transfer-safety" in out
    assert main(["check", "--scenario", "adversary-drop"]) == 1
    out = capsys.readouterr().out
    assert "secure-transfer-liveness" in out


def test_check_budget_exceeded_exits_3(capsys):
    assert main(["check", "--scenario", "three-exchange",
                 "--budget", "2"]) == 3
    assert "budget" in capsys.readouterr().err


def test_metrics_prints_table(capsys):
    assert main(["metrics", "--scenario", "swap"]) == 0
    out = capsys.readouterr().out
    assert "fantom       proposer            3        4" in out
    assert "mumbai       participant         3        3" in out


def test_metrics_three_exchange_proposer_row(capsys):
    assert main(["metrics", "--scenario", "three-exchange"]) == 0
    out = capsys.readouterr().out
    assert "fantom       proposer            6        4" in out


def test_sweep_reports_stability(capsys):
    assert main(["sweep", "--scenario", "swap", "--seeds", "25"]) == 0
    out = capsys.readouterr().out
    assert "25/25 checks passed; counts stable" in out


def test_sweep_exit_1_on_adversarial(capsys):
    assert main(["sweep", "--scenario", "adversary-forge",
                 "--seeds", "5"]) == 1
    assert "0/5 checks passed" in capsys.readouterr().out


def test_lock_order_override_flag(capsys):
    assert main(["run", "--scenario", "symmetric-conflict",
                 "--lock-order", "canonical", "--out", "/dev/null"]) == 0
    out = capsys.readouterr().out
    assert "Committed" in out and "Aborted(LockConflict)" in out
