"""End-to-end runs of the command line entry points (in process)."""

import csv
import json
import os

import pytest

from spectral_forge import cli


def run(tmp_path, *argv):
    return cli.main([*argv, "--out", str(tmp_path)])


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# scan-circle
# ---------------------------------------------------------------------------

def test_scan_circle_small_grid(tmp_path):
    rc = run(tmp_path, "scan-circle", "--orders", "1", "--grid", "8",
             "--exclusion", "0.05")
    assert rc == 0
    header, rows = read_csv(tmp_path / "scan_circle.csv")
    assert header == ["theta", "re_lambda", "im_lambda", "verdict",
                      "denominator_abs_lower", "empirical_block_bound"]
    assert len(rows) == 8
    verdicts = [r[3] for r in rows]
    assert verdicts.count("CertifiedResolvent") == 7
    assert verdicts.count("TailInvalid") == 1      # the excluded target

    summary = read_json(tmp_path / "scan_circle.json")
    assert summary["all_nonexcluded_certified"] is True
    assert summary["certificates_ok"] is True
    assert len(summary["certificates"]) == 1       # the one target point
    cert = summary["certificates"][0]
    assert cert["residual"] <= cert["threshold"]


def test_scan_circle_certificates_cover_targets(tmp_path):
    rc = run(tmp_path, "scan-circle", "--orders", "2,3", "--grid", "60")
    assert rc == 0
    summary = read_json(tmp_path / "scan_circle.json")
    assert len(summary["certificates"]) == 4       # 1, -1 and the 6th roots
    assert all(c["residual"] < 1e-8 for c in summary["certificates"])


# ---------------------------------------------------------------------------
# eigs / convergence
# ---------------------------------------------------------------------------

def test_eigs_summary(tmp_path):
    rc = run(tmp_path, "eigs", "--orders", "2,3", "--N", "3")
    assert rc == 0
    summary = read_json(tmp_path / "eigs.json")
    assert summary["dimension"] == 1 + 5 * 3
    assert summary["count"] == summary["dimension"]
    assert summary["head_column_sum"] == pytest.approx(1.0, abs=1e-12)
    assert summary["max_column_sum_deviation"] < 1e-12
    assert summary["strongly_connected"] is True
    assert summary["max_residual"] < 1e-9
    (top,) = summary["peripheral_values"]
    assert complex(top["re"], top["im"]) == pytest.approx(1.0, abs=1e-10)
    header, rows = read_csv(tmp_path / "eigs.csv")
    assert header == ["re", "im", "kind", "residual"]
    assert len(rows) == summary["count"]


def test_eigs_raw_truncation_head_sum(tmp_path):
    rc = run(tmp_path, "eigs", "--orders", "1", "--N", "4",
             "--no-renormalize")
    assert rc == 0
    summary = read_json(tmp_path / "eigs.json")
    assert summary["renormalized"] is False
    assert summary["head_column_sum"] == 1.0 - 2.0 ** -4


def test_convergence_table(tmp_path):
    rc = run(tmp_path, "convergence", "--orders", "2", "--n-max", "6")
    assert rc == 0
    header, rows = read_csv(tmp_path / "convergence.csv")
    assert header == ["n_blocks", "angle", "distance", "bound", "within_bound"]
    assert len(rows) == 2 * 6                      # two target angles
    assert all(r[4] == "true" for r in rows)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def test_verify_single_suite(tmp_path):
    rc = run(tmp_path, "verify", "--suites", "circles")
    assert rc == 0
    report = read_json(tmp_path / "verify.json")
    assert report["all_passed"] is True
    assert list(report["suites"]) == ["circles"]
    assert report["suites"]["circles"]["failures"] == 0


def test_verify_corrupt_control_fails(tmp_path):
    rc = run(tmp_path, "verify", "--suites", "sherman-morrison,circles",
             "--corrupt")
    assert rc == 1
    report = read_json(tmp_path / "verify.json")
    assert report["all_passed"] is False


def test_verify_unknown_suite_is_usage_error(tmp_path):
    assert run(tmp_path, "verify", "--suites", "nope") == 2


def test_verify_reports_are_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(a, "verify", "--seed", "7") == 0
    assert run(b, "verify", "--seed", "7") == 0
    assert (a / "verify.json").read_bytes() == (b / "verify.json").read_bytes()


# ---------------------------------------------------------------------------
# semigroup subcommands
# ---------------------------------------------------------------------------

def test_semigroup_cert(tmp_path):
    rc = run(tmp_path, "semigroup", "cert", "--r", "1,3/2,2,7/3")
    assert rc == 0
    certs = read_json(tmp_path / "semigroup_cert.json")
    by_r = {c["r"]: c for c in certs}
    assert by_r["1"]["n"] == 1 and by_r["1"]["k"] == 1
    assert by_r["3/2"]["n"] == 6
    assert by_r["2"]["n"] == 3
    assert by_r["7/3"] == {"r": "7/3", "omega": "7/6", "k": 2, "n": 78,
                           "q_n": by_r["7/3"]["q_n"],
                           "residual": by_r["7/3"]["q_n"], "matches": True}


def test_semigroup_cert_rejects_small_speed(tmp_path):
    assert run(tmp_path, "semigroup", "cert", "--r", "1/2") == 2


def test_semigroup_scan_axis(tmp_path):
    rc = run(tmp_path, "semigroup", "scan-axis",
             "--betas", "0,0.5,-0.5,0.95,1.5")
    assert rc == 0
    header, rows = read_csv(tmp_path / "scan_axis.csv")
    assert header == ["beta", "verdict", "denominator_abs_lower"]
    verdicts = {float(r[0]): r[1] for r in rows}
    assert verdicts[0.0] == "SingularCandidate"
    assert verdicts[1.5] == "SingularCandidate"
    assert verdicts[0.5] == "CertifiedResolvent"
    summary = read_json(tmp_path / "scan_axis.json")
    assert summary["mismatched_betas"] == []


def test_semigroup_scan_axis_default_grid(tmp_path):
    rc = run(tmp_path, "semigroup", "scan-axis")
    assert rc == 0
    _, rows = read_csv(tmp_path / "scan_axis.csv")
    assert len(rows) == 39
    summary = read_json(tmp_path / "scan_axis.json")
    assert summary["counts"]["CertifiedResolvent"] == 38
    assert summary["counts"]["SingularCandidate"] == 1


def test_semigroup_evolve(tmp_path):
    rc = run(tmp_path, "semigroup", "evolve", "--t", "2.0",
             "--samples", "5", "--trace-blocks", "3")
    assert rc == 0
    header, rows = read_csv(tmp_path / "evolve.csv")
    assert header == ["t", "mass", "head",
                      "block_mass_1", "block_mass_2", "block_mass_3"]
    assert len(rows) == 5
    assert all(abs(float(r[1]) - 1.0) < 1e-8 for r in rows)
    assert float(rows[0][2]) == 1.0                # starts in the head


def test_semigroup_evolve_mode_flag(tmp_path):
    rc = run(tmp_path, "semigroup", "evolve", "--t", "1.0",
             "--samples", "3", "--mode", "6,1")
    assert rc == 0
    _, rows = read_csv(tmp_path / "evolve.csv")
    assert all(abs(float(r[1])) < 1e-12 for r in rows)   # massless mode
    assert run(tmp_path, "semigroup", "evolve", "--mode", "banana") == 2


# ---------------------------------------------------------------------------
# configuration plumbing
# ---------------------------------------------------------------------------

def test_config_file_round_trip(tmp_path):
    cfg = tmp_path / "run.json"
    out = tmp_path / "from_config"
    cfg.write_text(json.dumps({
        "orders": [2], "grid_size": 12, "exclusion_radius": 0.1,
        "out": str(out),
    }))
    assert cli.main(["scan-circle", "--config", str(cfg)]) == 0
    _, rows = read_csv(out / "scan_circle.csv")
    assert len(rows) == 12


def test_config_flag_overrides_file(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"orders": [1], "grid_size": 12}))
    rc = run(tmp_path, "scan-circle", "--config", str(cfg), "--grid", "16")
    assert rc == 0
    _, rows = read_csv(tmp_path / "scan_circle.csv")
    assert len(rows) == 16


@pytest.mark.parametrize("payload", [
    {"grid": 10},                          # unknown key
    {"weight_rule": "uniform"},            # unimplemented rule
    {"truncation_depth": 0},
    {"exclusion_radius": 1.5},
])
def test_config_rejections(tmp_path, payload):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps(payload))
    assert run(tmp_path, "scan-circle", "--config", str(cfg)) == 2


def test_bad_orders_flag(tmp_path):
    assert run(tmp_path, "scan-circle", "--orders", "0") == 2
    assert run(tmp_path, "scan-circle", "--orders", "a,b") == 2


def test_out_directory_is_created(tmp_path):
    nested = tmp_path / "x" / "y"
    rc = cli.main(["eigs", "--orders", "1", "--N", "2",
                   "--out", str(nested)])
    assert rc == 0
    assert os.path.exists(nested / "eigs.json")
