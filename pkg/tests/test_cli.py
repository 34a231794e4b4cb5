import json

import pytest

from squintlab.cli import main


def write_small_config(path, **extra):
    doc = {
        "array": {"n_ph": 2, "n_pv": 1, "n_tiles": 4, "n_elements": 4},
        "band": {"n_subcarriers": 8},
        "users": {"count": 2},
        "seeds": {"count": 2, "base": 3},
        "snr_db": 10.0,
        "algorithm": {"sca": {"n_outer": 1}},
        "sweep": {"axis": "snr", "values": [0.0, 20.0]},
    }
    doc.update(extra)
    path.write_text(json.dumps(doc))
    return path


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 1
    return code, json.loads(out[0])


def test_validate_shipped_default(capsys):
    code, summary = run(capsys, "validate-config")
    assert code == 0 and summary["status"] == "ok"


def test_missing_config_exit_2(capsys, tmp_path):
    missing = tmp_path / "absent.json"
    code, summary = run(capsys, "validate-config", "--config", str(missing))
    assert code == 2 and str(missing) in summary["error"]


def test_bad_arguments_exit_2(capsys):
    assert run(capsys, "rate-vs-snr", "--schemes", "warp")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "validate-config", "--seed", "-4")[0] == 2


def test_invalid_config_content_exit_2(capsys, tmp_path):
    cfg = write_small_config(tmp_path / "c.json", users={"count": 9})
    assert run(capsys, "validate-config", "--config", str(cfg))[0] == 2


def test_runtime_error_exit_1(capsys, tmp_path):
    cfg = write_small_config(tmp_path / "c.json")
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, summary = run(capsys, "convergence", "--config", str(cfg), "--out", str(blocker / "sub"))
    assert code == 1 and summary["status"] == "error"


def test_rate_vs_snr_byte_identical(capsys, tmp_path):
    cfg = write_small_config(tmp_path / "c.json")
    outs = []
    for i, threads in enumerate(("1", "2")):
        out = tmp_path / f"o{i}"
        code, summary = run(capsys, "rate-vs-snr", "--config", str(cfg), "--out", str(out), "--seed", "11", "--threads", threads)
        assert code == 0 and summary["seed"] == 11
        outs.append(out)
    for name in ("rate_vs_snr.csv", "rate_vs_snr_summary.csv", "rate_vs_snr.config.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_schemes_flag(capsys, tmp_path):
    cfg = write_small_config(tmp_path / "c.json")
    code, summary = run(capsys, "rate-vs-snr", "--config", str(cfg), "--out", str(tmp_path), "--schemes", "fpa,fpa_ttd")
    assert code == 0 and set(k.split("@")[0] for k in summary["means"]) == {"fpa", "fpa_ttd"}


def test_threads_env_overrides(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("SQUINTLAB_THREADS", "2")
    cfg = write_small_config(tmp_path / "c.json", seeds={"count": 1, "base": 3})
    code, summary = run(capsys, "rate-vs-snr", "--config", str(cfg), "--out", str(tmp_path), "--threads", "1")
    assert code == 0 and summary["threads"] == 2
    monkeypatch.setenv("SQUINTLAB_THREADS", "many")
    assert run(capsys, "validate-config")[0] == 2


@pytest.mark.parametrize("command", ["convergence", "gain-vs-freq", "optimize-layout", "rate-vs-bw"])
def test_other_subcommands(capsys, tmp_path, command):
    cfg = write_small_config(
        tmp_path / "c.json", seeds={"count": 1, "base": 3}, sweep={"axis": "bandwidth", "values": [5e9, 20e9]}
    )
    code, summary = run(capsys, command, "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert code == 0 and summary["outputs"]
