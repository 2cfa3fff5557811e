import json

import pytest

from toric_sasaki.cli import main


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


W32 = {"m": 1, "lambda": [[1, 0], [0, 1]], "xi": ["3/2", "1/2"]}


class TestValidate:
    def test_round_s3(self, tmp_path, capsys):
        code, out, _ = run(capsys, "validate",
                           write(tmp_path, "s3.json", {"m": 1, "lambda": [[1, 0], [0, 1]], "xi": [1, 1]}))
        rep = json.loads(out)
        assert code == 0 and rep["validation"]["passed"]
        assert rep["validation"]["gamma"] == ["-1", "-1"]

    def test_inconsistent_chern(self, tmp_path, capsys):
        doc = {"m": 1, "lambda": [[1, 0], [0, 1], [-1, -2]], "xi": [1, 1]}
        code, out, _ = run(capsys, "validate", write(tmp_path, "c.json", doc))
        assert code == 2
        assert json.loads(out)["validation"]["error"]["code"] == "InconsistentChernCondition"

    def test_reeb_not_positive(self, tmp_path, capsys):
        doc = {"m": 1, "lambda": [[1, 0], [0, 1]], "xi": [1, -1]}
        code, out, _ = run(capsys, "validate", write(tmp_path, "r.json", doc))
        assert code == 2
        assert json.loads(out)["validation"]["error"]["code"] == "ReebNotPositive"

    def test_float_rejected(self, tmp_path, capsys):
        doc = {"m": 1, "lambda": [[1, 0], [0, 1]], "xi": [1.5, 0.5]}
        code, out, err = run(capsys, "validate", write(tmp_path, "f.json", doc))
        assert code == 1 and "float" in err and out == ""

    def test_usage_errors(self, tmp_path, capsys):
        assert run(capsys, "frobnicate")[0] == 1
        assert run(capsys, "validate")[0] == 1
        assert run(capsys, "validate", str(tmp_path / "nope.json"))[0] == 1


class TestR:
    @pytest.mark.parametrize("xi,R", [(["3/2", "1/2"], "1/2"), (["4/3", "2/3"], "2/3"),
                                      ([1, 1], "1")])
    def test_weighted_s3(self, tmp_path, capsys, xi, R):
        code, out, _ = run(capsys, "r", write(tmp_path, "w.json", {**W32, "xi": xi}))
        rep = json.loads(out)
        assert code == 0 and rep["R"]["exact"] == R
        assert rep["R"]["decimal_note"] == "display only"

    def test_round_s5(self, tmp_path, capsys):
        doc = {"m": 2, "lambda": [[1, 0, 0], [0, 1, 0], [0, 0, 1]], "xi": [1, 1, 1]}
        code, out, _ = run(capsys, "r", write(tmp_path, "s5.json", doc))
        assert code == 0 and json.loads(out)["R"]["exact"] == "1"

    def test_no_floats_in_exact_fields(self, tmp_path, capsys):
        _, out, _ = run(capsys, "r", write(tmp_path, "w.json", W32))
        rep = json.loads(out)

        def walk(x):
            if isinstance(x, dict):
                for v in x.values():
                    walk(v)
            elif isinstance(x, list):
                for v in x:
                    walk(v)
            else:
                assert not isinstance(x, float)
        walk({k: rep[k] for k in ("validation", "polytope", "R")})

    def test_unbounded_is_hypothesis_error(self, tmp_path, capsys):
        # xi on the boundary of the dual cone: the cross-section is unbounded
        code, out, _ = run(capsys, "r", write(tmp_path, "u.json", {**W32, "xi": [1, 0]}))
        assert code == 2 and "error" in json.loads(out)


class TestCatalog:
    def test_list(self, capsys):
        code, out, _ = run(capsys, "catalog", "list")
        assert code == 0 and len(out.strip().splitlines()) >= 6

    def test_export_then_r(self, tmp_path, capsys):
        path = tmp_path / "e.json"
        assert run(capsys, "catalog", "export", "weighted-S3-3/2", "-o", str(path))[0] == 0
        code, out, _ = run(capsys, "r", str(path))
        assert code == 0 and json.loads(out)["R"]["exact"] == "1/2"

    def test_export_stdout(self, capsys):
        code, out, _ = run(capsys, "catalog", "export", "round-S5")
        assert code == 0 and json.loads(out)["xi"] == ["1", "1", "1"]

    def test_unknown(self, capsys):
        assert run(capsys, "catalog", "export", "nope")[0] == 1


class TestSolvePath:
    def test_w32(self, tmp_path, capsys):
        src = write(tmp_path, "w32.json", W32)
        code, _, _ = run(capsys, "solve-path", src, "--out", str(tmp_path / "a"))
        assert code == 0
        rep = json.loads((tmp_path / "a" / "w32_report.json").read_text())
        path = rep["path"]
        assert 0.4 < path["bracket"]["t_lo"] < path["bracket"]["t_hi"] < 0.6
        assert path["abs_error"] <= 0.05
        assert rep["provenance"]["parameters"]["N"] is None
        rows = (tmp_path / "a" / "w32_trace.csv").read_text().splitlines()
        assert sum(r.split(",")[1] == "1" for r in rows[1:]) >= 10
        assert (tmp_path / "a" / "w32_trace.dat").exists()

    def test_deterministic_and_env(self, tmp_path, capsys, monkeypatch):
        src = write(tmp_path, "w32.json", W32)
        run(capsys, "solve-path", src, "--out", str(tmp_path / "a"))
        monkeypatch.setenv("TORIC_SASAKI_OUT", str(tmp_path / "b"))
        run(capsys, "solve-path", src)
        for suffix in ("_trace.csv", "_trace.dat", "_report.json"):
            a = (tmp_path / "a" / f"w32{suffix}").read_bytes()
            assert a == (tmp_path / "b" / f"w32{suffix}").read_bytes()

    def test_symmetric_cap(self, tmp_path, capsys):
        src = write(tmp_path, "s3.json", {**W32, "xi": [1, 1]})
        assert run(capsys, "solve-path", src, "--out", str(tmp_path))[0] == 0
        rep = json.loads((tmp_path / "s3_report.json").read_text())
        assert rep["path"]["bracket"]["reason"] == "reached t cap"
        assert rep["path"]["R_numeric"] == 1.0

    def test_options_and_overrides(self, tmp_path, capsys):
        src = write(tmp_path, "o.json", {**W32, "solver": {"N": 512, "t_step": 0.1}})
        run(capsys, "solve-path", src, "--out", str(tmp_path), "--N", "1024", "--t-max", "0.2")
        rep = json.loads((tmp_path / "o_report.json").read_text())
        params = rep["provenance"]["parameters"]
        assert params["N"] == 1024 and params["t_step"] == 0.1
        assert rep["path"]["bracket"]["reason"] == "reached t_max"
        assert rep["path"]["R_numeric"] is None

    def test_solver_error_in_document(self, tmp_path, capsys):
        src = write(tmp_path, "s.json", W32)
        code, _, _ = run(capsys, "solve-path", src, "--out", str(tmp_path), "--L", "2")
        rep = json.loads((tmp_path / "s_report.json").read_text())
        assert code == 3 and rep["path"]["error"]["code"] == "GridTooSmall"
        assert not (tmp_path / "s_trace.csv").exists()

    def test_bad_grid_size(self, tmp_path, capsys):
        src = write(tmp_path, "s.json", W32)
        assert run(capsys, "solve-path", src, "--out", str(tmp_path), "--N", "8")[0] == 1
