import io
import json

import pytest

from mallows_lcs.cli import EXIT_CAP, EXIT_INVALID, main


def call(*argv):
    buf = io.StringIO()
    code = main(list(argv), out=buf)
    return code, buf.getvalue()


def test_lcs():
    assert call("lcs", "--a", "3,4,1,2,5", "--b", "1,2,3,4,5") == (0, "3\n")
    code, text = call("lcs", "--a", "2,1,3", "--b", "1,2,3", "--witness")
    length, witness = text.splitlines()
    assert code == 0 and length == "2" and len(witness.split(",")) == 2


def test_lcs_invalid_permutation():
    assert call("lcs", "--a", "1,1", "--b", "1,2")[0] == EXIT_INVALID


def test_sample_needs_seed():
    assert call("sample", "--n", "5", "--q", "0.5")[0] == EXIT_INVALID


def test_sample_reproducible():
    a = call("sample", "--n", "6", "--q", "0.5", "--count", "3", "--seed", "9")
    b = call("sample", "--n", "6", "--q", "0.5", "--count", "3", "--seed", "9")
    assert a == b and a[0] == 0 and len(a[1].splitlines()) == 3


def test_jbar():
    code, text = call("jbar", "--beta", "2")
    value, err = map(float, text.split())
    assert code == 0 and value == pytest.approx(1.0500117, abs=1e-6) and err <= 1e-10
    assert call("jbar", "--beta", "0")[0] == EXIT_INVALID
    assert call("jbar", "--beta", "400", "--tol", "1e-14", "--max-evaluations", "50")[0] == EXIT_CAP


def test_argparse_error_exit_code():
    with pytest.raises(SystemExit) as info:
        main(["weak-law", "--n", "ten"])
    assert info.value.code == EXIT_INVALID


def test_renewal_outputs(tmp_path):
    csv_path = tmp_path / "blocks.csv"
    code, text = call("renewal", "--q", "0.5", "--qprime", "0.5", "--blocks", "200", "--seed", "3", "--csv", str(csv_path))
    assert code == 0
    summary = json.loads(text)
    assert {"a_hat", "delta2_hat", "sigma_hat", "nu00", "se_a"} <= set(summary["extras"])
    rows = csv_path.read_text().splitlines()
    assert rows[0] == "j,x,y" and len(rows) == 201


def test_cap_exit_code():
    code, _ = call("renewal", "--q", "0.97", "--qprime", "0.97", "--blocks", "50", "--seed", "1", "--config", _cap_file())
    assert code == EXIT_CAP


def _cap_file(_cache={}):
    import tempfile

    if "path" not in _cache:
        fh = tempfile.NamedTemporaryFile("w", suffix=".json", delete=False)
        json.dump({"cap": 2}, fh)
        fh.close()
        _cache["path"] = fh.name
    return _cache["path"]


def test_config_file_and_override(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"n": 50, "q": 0.5, "replicas": 3, "seed": 4}))
    code, text = call("weak-law", "--config", str(conf), "--replicas", "5")
    doc = json.loads(text)
    assert code == 0 and doc["config"]["replicas"] == 5 and doc["config"]["n"] == 50


def test_experiment_out_formats(tmp_path):
    for fmt in ("csv", "json"):
        out = tmp_path / f"r.{fmt}"
        code, _ = call("finite-beta", "--n", "100", "--beta", "2", "--replicas", "4", "--seed", "5", "--out", str(out), "--format", fmt)
        assert code == 0 and out.exists()
    assert (tmp_path / "r.csv").read_text().startswith("replica,value\n")


def test_invalid_experiment_parameters():
    assert call("finite-beta", "--n", "10", "--beta", "20", "--seed", "1")[0] == EXIT_INVALID
    assert call("clt", "--q", "1.5", "--seed", "1")[0] == EXIT_INVALID
    assert call("weak-law", "--n", "100")[0] == EXIT_INVALID


def test_stationary_and_clt_smoke():
    code, text = call("stationary", "--q", "0.5", "--steps", "50000", "--seed", "2")
    assert code == 0 and "total_variation" in json.loads(text)["extras"]
    code, text = call("clt", "--n", "200", "--q", "0.3", "--replicas", "10", "--blocks", "1000", "--seed", "2", "--workers", "2")
    assert code == 0 and json.loads(text)["stats"]["count"] == 10
