import json

import pytest

from katoflow import cli


def run(args):
    return cli.main(args)


def test_unknown_config_key_exits_2(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"no_such_key": 1}))
    assert run(["fk", "--config", str(cfg), "--seed", "1",
                "--out", str(tmp_path / "o")]) == 2


def test_bad_config_value_exits_2(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"t_grid": 0.5}))
    assert run(["fk", "--config", str(cfg), "--seed", "1",
                "--out", str(tmp_path / "o")]) == 2


def test_missing_seed_exits_2(tmp_path):
    assert run(["fk", "--out", str(tmp_path / "o")]) == 2


def test_missing_config_file_exits_2(tmp_path):
    assert run(["fk", "--config", str(tmp_path / "nope.json"), "--seed", "1",
                "--out", str(tmp_path / "o")]) == 2


def test_fk_zero_potential_exit_zero(tmp_path):
    out = tmp_path / "o"
    assert run(["fk", "--seed", "3", "--out", str(out)]) == 0
    rows = (out / "fk_results.csv").read_text().strip().splitlines()
    assert rows[0].startswith("x,t,value,stderr,n_paths,epsilon,grid_step,seed")
    assert ",1.0," in rows[1] and rows[1].endswith("holds")


def test_couple_csv_schema_and_determinism(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    args = ["couple", "--seed", "11", "--set", "n_runs=20000",
            "--set", "t_grid=[0.25,1.0]"]
    assert run(args + ["--out", str(out1)]) == 0
    assert run(args + ["--out", str(out2)]) == 0
    for name in ("couple_results.csv", "couple_equivalence_results.csv",
                 "couple_marginals_results.csv", "records.ndjson"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    header = (out1 / "couple_results.csv").read_text().splitlines()[0]
    assert header == ("strategy,d,separation,t,p_tau_gt_t,stderr,"
                      "tv_supB,half_L1,verdict")


def test_worker_count_invariance(tmp_path):
    out1, out8 = tmp_path / "w1", tmp_path / "w8"
    args = ["couple", "--seed", "5", "--set", "n_runs=20000"]
    assert run(args + ["--out", str(out1), "--workers", "1"]) == 0
    assert run(args + ["--out", str(out8), "--workers", "8"]) == 0
    assert (out1 / "couple_results.csv").read_bytes() == (
        out8 / "couple_results.csv"
    ).read_bytes()
    assert (out1 / "records.ndjson").read_bytes() == (
        out8 / "records.ndjson"
    ).read_bytes()


def test_report_empty_directory_exits_2(tmp_path):
    assert run(["report", str(tmp_path)]) == 2


def test_report_pass_and_fail(tmp_path, capsys):
    out = tmp_path / "o"
    assert run(["fk", "--seed", "3", "--out", str(out)]) == 0
    assert run(["report", str(out)]) == 0
    assert "PASS" in capsys.readouterr().out
    with open(out / "records.ndjson", "a") as fh:
        fh.write(json.dumps({
            "record": "bound_report", "suite": "fk", "bound_name": "fake",
            "theoretical_value": 0.0, "empirical_value": 1.0,
            "verdict": "violated",
        }) + "\n")
    assert run(["report", str(out)]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_set_override_requires_key_value(tmp_path):
    assert run(["fk", "--seed", "1", "--out", str(tmp_path / "o"),
                "--set", "garbage"]) == 2


def test_duhamel_suite_verdicts(tmp_path):
    out = tmp_path / "o"
    assert run(["duhamel", "--seed", "1", "--out", str(out)]) == 0
    lines = (out / "duhamel_results.csv").read_text().strip().splitlines()
    assert len(lines) == 5  # header + 4 refinement rows


def test_timestamp_confined_to_meta(tmp_path):
    out = tmp_path / "o"
    assert run(["fk", "--seed", "3", "--out", str(out)]) == 0
    meta = json.loads((out / "meta.json").read_text())
    assert "created_utc" in meta
    results = (out / "fk_results.csv").read_text()
    ndjson = (out / "records.ndjson").read_text()
    assert meta["created_utc"] not in results
    assert meta["created_utc"] not in ndjson


@pytest.mark.slow
def test_all_suites_smoke(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "couple": {"n_runs": 15000, "t_grid": [0.25, 1.0]},
        "moments": {"n_samples": 15000},
        "kato": {"mc_samples": 20000},
        "fk": {},
        "kernel-checks": {"n_ks": 15000},
        "khashminskii": {"n_paths": 15000},
        "theorem": {"n_paths": 1500, "t_grid": [0.5]},
        "molecule": {"n_paths": 1500},
        "holder": {"t_grid": [0.5, 1.0]},
        "duhamel": {},
    }))
    out = tmp_path / "o"
    assert run(["all", "--config", str(cfg), "--seed", "9",
                "--out", str(out)]) == 0
    assert run(["report", str(out)]) == 0
