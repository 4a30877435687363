import json
import subprocess
import sys

import pytest

from prefalign.cli import main
from prefalign.gradfield import read_field_csv
from prefalign.toylm import load_checkpoint, load_dataset_jsonl, read_trajectory_csv


def run_cli(*argv):
    return main(list(argv))


# ---------------------------------------------------------------------------
# field
# ---------------------------------------------------------------------------


def test_field_row_count(tmp_path):
    out = tmp_path / "f.csv"
    code = run_cli("field", "--loss", "asft", "--grid", "10", "--lo", "0.05", "--hi", "0.95", "--out", str(out))
    assert code == 0
    points, meta = read_field_csv(out)
    assert len(points) == 100
    assert meta["command"] == "field"
    assert meta["seed"] == "0"


def test_field_bt_signs(tmp_path):
    out = tmp_path / "f.csv"
    code = run_cli("field", "--loss", "bt", "--beta", "0.1", "--grid", "12", "--lo", "0.05", "--hi", "0.95", "--out", str(out))
    assert code == 0
    points, _ = read_field_csv(out)
    assert all(p.d1 < 0.0 < p.d2 for p in points)


def test_field_invalid_range_exits_2(tmp_path):
    out = tmp_path / "f.csv"
    assert run_cli("field", "--lo", "0", "--hi", "0.9", "--grid", "5", "--out", str(out)) == 2
    assert not out.exists()


def test_field_svg(tmp_path):
    out, svg = tmp_path / "f.csv", tmp_path / "f.svg"
    assert run_cli("field", "--grid", "6", "--lo", "0.1", "--hi", "0.9", "--out", str(out), "--svg", str(svg)) == 0
    assert svg.read_text().startswith("<svg")


# ---------------------------------------------------------------------------
# gendata
# ---------------------------------------------------------------------------


def test_gendata_valid_and_seeded(tmp_path):
    out = tmp_path / "d.jsonl"
    assert run_cli("gendata", "--n", "500", "--seed", "3", "--out", str(out)) == 0
    triples = load_dataset_jsonl(out)
    assert len(triples) == 500
    assert all(t.chosen != t.rejected for t in triples)


def test_gendata_repeat_identical(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    run_cli("gendata", "--n", "40", "--seed", "5", "--out", str(a))
    run_cli("gendata", "--n", "40", "--seed", "5", "--out", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_gendata_zero_records(tmp_path):
    out = tmp_path / "empty.jsonl"
    assert run_cli("gendata", "--n", "0", "--seed", "1", "--out", str(out)) == 0
    assert load_dataset_jsonl(out) == []


def test_gendata_env_seed_fallback(tmp_path, monkeypatch):
    flagged, env = tmp_path / "flag.jsonl", tmp_path / "env.jsonl"
    run_cli("gendata", "--n", "20", "--seed", "9", "--out", str(flagged))
    monkeypatch.setenv("PREFALIGN_SEED", "9")
    run_cli("gendata", "--n", "20", "--out", str(env))
    assert flagged.read_bytes() == env.read_bytes()


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


@pytest.fixture()
def dataset_path(tmp_path):
    path = tmp_path / "data.jsonl"
    run_cli("gendata", "--n", "60", "--seed", "2", "--out", str(path))
    return path


def test_train_writes_trajectory_and_checkpoint(dataset_path, tmp_path):
    traj, ckpt = tmp_path / "t.csv", tmp_path / "c.json"
    code = run_cli(
        "train", "--data", str(dataset_path), "--loss", "asft", "--steps", "6",
        "--seed", "7", "--out", str(traj), "--checkpoint", str(ckpt),
    )
    assert code == 0
    records, meta = read_trajectory_csv(traj)
    assert len(records) == 7
    assert meta["command"] == "train"
    policy = load_checkpoint(ckpt)
    assert policy.version == 6


def test_train_repeat_identical(dataset_path, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    ca, cb = tmp_path / "a.json", tmp_path / "b.json"
    for out, ck in ((a, ca), (b, cb)):
        run_cli("train", "--data", str(dataset_path), "--loss", "asft", "--steps", "5",
                "--seed", "7", "--out", str(out), "--checkpoint", str(ck))
    assert a.read_bytes() == b.read_bytes()
    assert ca.read_bytes() == cb.read_bytes()


def test_train_dpo_without_reference_exits_2(dataset_path, tmp_path):
    out = tmp_path / "t.csv"
    code = run_cli("train", "--data", str(dataset_path), "--loss", "dpo", "--steps", "2", "--out", str(out))
    assert code == 2
    assert not out.exists()


def test_train_dpo_with_reference(dataset_path, tmp_path):
    out = tmp_path / "t.csv"
    code = run_cli(
        "train", "--data", str(dataset_path), "--loss", "dpo", "--ref-snapshot",
        "--steps", "2", "--out", str(out),
    )
    assert code == 0


def test_train_missing_dataset_exits_2(tmp_path):
    code = run_cli("train", "--data", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path / "t.csv"))
    assert code == 2


def test_train_margin_improves(dataset_path, tmp_path):
    out = tmp_path / "t.csv"
    run_cli("train", "--data", str(dataset_path), "--loss", "asft", "--steps", "40",
            "--seed", "1", "--out", str(out))
    records, _ = read_trajectory_csv(out)
    assert records[-1].margin > records[0].margin


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def test_eval_identical_files(tmp_path):
    hyp, ref, out = tmp_path / "h.txt", tmp_path / "r.txt", tmp_path / "m.json"
    text = "the cat sat on the mat\na dog ran far away\n"
    hyp.write_text(text)
    ref.write_text(text)
    assert run_cli("eval", "--hyp", str(hyp), "--ref", str(ref), "--out", str(out)) == 0
    payload = json.loads(out.read_text())
    assert payload["metrics"]["bleu4"] == pytest.approx(1.0)
    assert payload["metrics"]["rougeL"]["f1"] == pytest.approx(1.0)


def test_eval_hand_example(tmp_path):
    hyp, ref, out = tmp_path / "h.txt", tmp_path / "r.txt", tmp_path / "m.json"
    hyp.write_text("the cat\n")
    ref.write_text("the cat sat\n")
    assert run_cli("eval", "--hyp", str(hyp), "--ref", str(ref), "--out", str(out)) == 0
    payload = json.loads(out.read_text())
    assert payload["metrics"]["rougeL"]["f1"] == pytest.approx(0.8)


def test_eval_jsonl_input(tmp_path):
    src, out = tmp_path / "pairs.jsonl", tmp_path / "m.json"
    src.write_text(
        json.dumps({"hypothesis": "a b c d", "reference": "a b c d"}) + "\n"
    )
    assert run_cli("eval", "--jsonl", str(src), "--out", str(out)) == 0
    assert json.loads(out.read_text())["metrics"]["bleu4"] == pytest.approx(1.0)


def test_eval_missing_file_exits_2(tmp_path, capsys):
    ref = tmp_path / "r.txt"
    ref.write_text("x\n")
    missing = tmp_path / "missing.txt"
    assert run_cli("eval", "--hyp", str(missing), "--ref", str(ref)) == 2
    assert str(missing) in capsys.readouterr().err


def test_eval_repeat_identical(tmp_path):
    hyp, ref = tmp_path / "h.txt", tmp_path / "r.txt"
    hyp.write_text("a b c d\n")
    ref.write_text("a b x d\n")
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run_cli("eval", "--hyp", str(hyp), "--ref", str(ref), "--out", str(a))
    run_cli("eval", "--hyp", str(hyp), "--ref", str(ref), "--out", str(b))
    assert a.read_bytes() == b.read_bytes()


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def test_verify_default_passes(capsys):
    assert run_cli("verify") == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out


def test_verify_coarse_step_fails():
    assert run_cli("verify", "--h", "1e-2") == 1


def test_verify_extra_beta(capsys):
    assert run_cli("verify", "--loss", "bt", "--beta", "0.7", "--points", "10") == 0
    assert "beta=0.7" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# config file and misc plumbing
# ---------------------------------------------------------------------------


def test_toml_config_with_flag_override(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('seed = 5\n[gendata]\nn = 25\n')
    out1 = tmp_path / "c1.jsonl"
    run_cli("gendata", "--config", str(cfg), "--out", str(out1))
    assert len(load_dataset_jsonl(out1)) == 25
    # an explicit flag beats the config value
    out2 = tmp_path / "c2.jsonl"
    run_cli("gendata", "--config", str(cfg), "--n", "10", "--out", str(out2))
    assert len(load_dataset_jsonl(out2)) == 10
    # config seed matches the equivalent flag run
    out3 = tmp_path / "c3.jsonl"
    run_cli("gendata", "--n", "25", "--seed", "5", "--out", str(out3))
    assert json.loads(out1.read_text().splitlines()[1]) == json.loads(out3.read_text().splitlines()[1])


def test_unknown_command_exits_2():
    assert run_cli("frobnicate") == 2


def test_console_entry_point(tmp_path):
    result = subprocess.run(
        [sys.executable, "-m", "prefalign", "gendata", "--n", "3", "--out", str(tmp_path / "d.jsonl")],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0
    assert "3 preference triples" in result.stdout
