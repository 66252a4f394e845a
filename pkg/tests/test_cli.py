import json
from pathlib import Path

import pytest

from markedgibbs import cli, oracle
from markedgibbs.config import ConfigError, parse_config

ROOT = Path(__file__).resolve().parents[1]
WORKED = (ROOT / "configs" / "worked.toml").read_text()
SMALL_SAMPLER = "[sampler]\nburn_in = 2000\nthin = 10\nn_samples = 2000\n"


def small(text, extra=""):
    """Shrink the sampler budget of a shipped config."""
    head, _, rest = text.partition("[sampler]")
    rest = rest.split("\n[", 1)[1]
    return head + SMALL_SAMPLER + extra + "\n[" + rest


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_validate_worked_model(tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["validate", "--config", write(tmp_path, WORKED), "--out", str(out)]) == 0
    cert = (out / "certificate.txt").read_text()
    assert "feasible=True" in cert
    assert (out / "config.toml").read_text() == WORKED
    report = json.loads((out / "assumptions.json").read_text())
    assert report["ok"] and report["model_fingerprint"] in cert


def test_validate_flat_potential_names_growth_condition(tmp_path, capsys):
    text = WORKED.replace('{ family = "power_law", A = 1.0, delta = 2.0 }', '{ family = "zero" }')
    assert cli.main(["validate", "--config", write(tmp_path, text), "--out", str(tmp_path / "o")]) == 1
    assert "A5" in capsys.readouterr().out


@pytest.mark.parametrize("mutation", [
    lambda t: t.replace("[window]", "[window]\nshape = 3"),
    lambda t: t + "\n[plots]\nx = 1\n",
    lambda t: t.replace("beta = 1.0", 'beta = "hot"'),
    lambda t: t.replace('family = "bilinear"', 'family = "dipolar"'),
    lambda t: t.replace("z = 0.5\n", "z = -0.5\n", 1),
    lambda t: t.replace("[model]", "[model"),
])
def test_schema_errors_exit_2(tmp_path, mutation):
    assert cli.main(["validate", "--config", write(tmp_path, mutation(WORKED))]) == 2


def test_parse_config_sections():
    cfg = parse_config(WORKED)
    assert cfg.ladder == [3, 5, 7] and cfg.cell == (0,)
    assert cfg.dpcheck["J0_grid"] == [0.02, 0.1, 0.3]
    with pytest.raises(ConfigError):
        parse_config("seed = 1\n")


def test_failing_certificate_needs_force(tmp_path):
    text = small((ROOT / "configs" / "certification.toml").read_text())
    path = write(tmp_path, text)
    assert cli.main(["sample", "--config", path, "--out", str(tmp_path / "a")]) == 1
    assert cli.main(["sample", "--config", path, "--out", str(tmp_path / "b"), "--force"]) == 0


def test_oracle_then_sample_and_reruns_are_byte_identical(tmp_path):
    path = write(tmp_path, small(WORKED))
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert cli.main(["oracle", "--config", path, "--out", str(out)]) == 0
        assert cli.main(["sample", "--config", path, "--out", str(out)]) == 0
        outs.append(out)
    files = sorted(p.name for p in outs[0].iterdir())
    assert {"samples.jsonl", "comparison.csv", "oracle.json", "counts.csv", "count_trace.dat"} <= set(files)
    for f in files:
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes(), f
    header = (outs[0] / "comparison.csv").read_text().splitlines()[0]
    assert header.startswith("# model_fingerprint=") and "certificate_hash=" in header


def test_seed_flag_and_environment(tmp_path, monkeypatch):
    path = write(tmp_path, small(WORKED))
    cli.main(["sample", "--config", path, "--out", str(tmp_path / "flag"), "--seed", "11"])
    monkeypatch.setenv("MARKEDGIBBS_SEED", "11")
    cli.main(["sample", "--config", path, "--out", str(tmp_path / "env")])
    monkeypatch.setenv("MARKEDGIBBS_SEED", "12")
    cli.main(["sample", "--config", path, "--out", str(tmp_path / "other")])
    a, b, c = ((tmp_path / d / "samples.jsonl").read_bytes() for d in ("flag", "env", "other"))
    assert a == b and a != c


def test_moments_with_zero_exponent(tmp_path):
    text = small(WORKED, "\n[moments]\na = 0.0\n").replace("ladder = [3, 5, 7]", "ladder = [3, 5]")
    out = tmp_path / "m"
    assert cli.main(["moments", "--config", write(tmp_path, text), "--out", str(out)]) == 0
    recs = [json.loads(line) for line in (out / "moments.jsonl").read_text().splitlines()]
    assert [r["estimate"] for r in recs] == [1.0, 1.0]


def test_dpcheck_output_is_independent_of_workers(tmp_path):
    text = small(WORKED).replace("reference_samples = 20000", "reference_samples = 2000")
    text = text.replace("z_grid = [0.1, 0.3, 0.5]", "z_grid = [0.1, 0.5]").replace(
        "J0_grid = [0.02, 0.1, 0.3]", "J0_grid = [0.1]")
    path = write(tmp_path, text)
    for w in ("1", "2"):
        assert cli.main(["dpcheck", "--config", path, "--out", str(tmp_path / w), "--workers", w]) == 0
    assert (tmp_path / "1" / "dpcheck.jsonl").read_bytes() == (tmp_path / "2" / "dpcheck.jsonl").read_bytes()
    rows = (tmp_path / "1" / "dpcheck.csv").read_text().splitlines()
    assert rows[1].startswith("z,J0,l_hat") and len(rows) == 4


def test_numerical_failure_exit_3(tmp_path, monkeypatch):
    monkeypatch.setattr(oracle, "REFINE_TOL", 0.0)
    text = small(WORKED).replace('kind = "empty"', 'kind = "deterministic_grid"\nspacing = 0.7')
    assert cli.main(["oracle", "--config", write(tmp_path, text), "--out", str(tmp_path / "o")]) == 3
