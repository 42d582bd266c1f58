import json


from civi.cli import main, read_chain_file, read_trace
from civi.compose import compose_all
from civi.loader import SPECS_DIR, load_text
from civi.model import ActionEvent

TOY = sorted(str(p) for p in (SPECS_DIR / "toy2pc").glob("*.civ"))
TWO = ["--instance", "RMs=r1,r2"]


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_proved(capsys):
    code, out, _ = run(capsys, "check", "--contract", "TM_contract", *TWO, *TOY)
    assert code == 0


def test_check_unknown_contract(capsys):
    code, out, err = run(capsys, "check", "--contract", "Nope", *TWO, *TOY)
    assert code == 1 and "unknown contract" in out + err


def test_check_naive_cti(capsys):
    code, out, _ = run(capsys, "check", "--contract", "Global_naive", *TWO, *TOY)
    assert code == 2 and "consecution" in out


def test_check_several_contracts_in_parallel(capsys):
    code, out, _ = run(capsys, "check", "--contract", "TM_contract", "--contract", "RM_contract", "--workers", "2", *TWO, *TOY)
    assert code == 0 and "TM_contract" in out and "RM_contract" in out


def test_missing_file_is_user_error(capsys):
    code, _, err = run(capsys, "check", "--contract", "X", "/nonexistent/file.civ")
    assert code == 1


def test_ceiling_exit_code(capsys):
    code, _, _ = run(capsys, "check", "--contract", "Global_naive", "--ceiling", "10", *TWO, *TOY)
    assert code == 3


def test_ceiling_env(capsys, monkeypatch):
    monkeypatch.setenv("CIVI_STATE_CEILING", "10")
    code, _, _ = run(capsys, "check", "--contract", "Global_naive", *TWO, *TOY)
    assert code == 3


def test_certify_chain(capsys, tmp_path):
    report = tmp_path / "cert.json"
    code, out, _ = run(capsys, "certify", "--chain", "toy2pc.chain", *TWO, "--json", str(report), *TOY)
    assert code == 0 and "PROVED" in out
    data = json.loads(report.read_text())
    assert data["verdict"] == "proved" and data["recheck"]["verdict"] == "proved"
    assert "I_TM" not in data["conclusion"]["invariant"]  # printed in full, not by name


def test_certify_json_deterministic(capsys, tmp_path):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        assert main(["certify", "--chain", "toy2pc", "--no-run-info", "--json", str(p), *TWO, *TOY]) == 0
    capsys.readouterr()
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_json_to_stdout_is_pure(capsys):
    code, out, err = run(capsys, "check", "--contract", "Global_naive", "--json", "-", *TWO, *TOY)
    assert code == 2
    report = json.loads(out)
    assert report["results"][0]["cti"]["action"] == "Abort(r1)"
    assert "NOT inductive" in err


def test_trace_holds(capsys):
    trace = str(SPECS_DIR / "toy2pc" / "sigma2.trace")
    code, out, _ = run(capsys, "trace", "--formula", "rho1", "--trace", trace, *TWO, *TOY)
    assert code == 0 and "holds at all indices" in out


def test_trace_fails(capsys, tmp_path):
    t = tmp_path / "bad.trace"
    t.write_text("Commit(r1)\n")
    code, out, _ = run(capsys, "trace", "--formula", "rho1", "--trace", str(t), *TWO, *TOY)
    assert code == 2 and "fails at indices 1" in out


def test_compose_round_trip(capsys, toy):
    code, out, _ = run(capsys, "compose", "ToyRM", "ToyTM", "--name", "Both", *TOY)
    assert code == 0
    got = load_text(out).component("Both")
    want = compose_all([toy.component("ToyRM"), toy.component("ToyTM")])
    assert got.vars == want.vars and got.init == want.init
    assert [(a.name, a.body) for a in got.actions] == [(a.name, a.body) for a in want.actions]


def test_infer(capsys, tmp_path):
    log = tmp_path / "ctis.jsonl"
    code, out, _ = run(capsys, "infer", "--contract", "RM_contract", "--log-ctis", str(log), *TWO, *TOY)
    assert code == 0 and "conjunct" in out
    lines = [json.loads(x) for x in log.read_text().splitlines()]
    assert lines and all("dropped" in x for x in lines)


def test_infer_failure(capsys):
    code, _, _ = run(capsys, "infer", "--contract", "RM_unassumed", *TWO, *TOY)
    assert code == 2


def test_validate_fluent(capsys):
    code, out, _ = run(capsys, "validate-fluent", *TWO, *TOY)
    assert code == 0 and "oncePrepare" in out
    code, out, _ = run(capsys, "validate-fluent", "currentLeader", "--entry", "mongo")
    assert code == 0


def test_bundled_entry_default(capsys):
    code, _, _ = run(capsys, "check", "--contract", "RM_noabort")
    assert code == 0


def test_helpers():
    assert read_trace("Prepare(r1)\n# c\nCommit(r2)\n") == (ActionEvent("Prepare", ("r1",)), ActionEvent("Commit", ("r2",)))
    assert read_chain_file("# chain\nA\nB, C\n") == ["A", "B", "C"]
