import json

import pytest

from bilap.cli import config_hash, main


def write_cfg(tmp_path, cfg, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def run_json(tmp_path, command, cfg, *extra):
    out = tmp_path / "out"
    code = main([command, "--config", write_cfg(tmp_path, cfg), "--out", str(out), *extra])
    stem = command.replace("-", "_")
    doc = json.loads((out / f"{stem}.json").read_text()) if (out / f"{stem}.json").exists() else None
    return code, doc


D1 = {"d": 1, "generator": "delta"}


class TestThresholds:
    def test_delta_d1(self, tmp_path):
        code, doc = run_json(tmp_path, "thresholds", {"problem": D1})
        assert code == 0
        flat = json.dumps(doc)
        assert '"mu_lower": 0.0' in flat and '"mu_upper": 0.0' in flat

    def test_delta_d5(self, tmp_path):
        code, doc = run_json(tmp_path, "thresholds", {"problem": {"d": 5, "generator": "delta"}})
        flat = json.dumps(doc)
        assert code == 0 and '"Resonance"' in flat

    def test_malformed_json(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text('{"problem": {"d": 1,, }')
        assert main(["thresholds", "--config", str(path)]) == 2
        assert "configuration error" in capsys.readouterr().err

    def test_bad_field_named(self, tmp_path, capsys):
        cfg = {"problem": {"d": 1, "generator": "delta"}, "quadrature": {"tol_q": -1.0}}
        assert main(["thresholds", "--config", write_cfg(tmp_path, cfg)]) == 2
        assert "tol_q" in capsys.readouterr().err

    def test_two_blocks_rejected(self, tmp_path):
        cfg = {"problem": D1, "eigenvalue": {"mu": 1.0}, "sweep": {"mu_list": [1.0, 2.0]}}
        assert main(["eigenvalue", "--config", write_cfg(tmp_path, cfg)]) == 2


class TestEigenvalue:
    def test_rows(self, tmp_path):
        code, doc = run_json(tmp_path, "eigenvalue", {"problem": D1, "eigenvalue": {"mu_list": [1.0, -1.0]}})
        assert code == 0
        flat = json.dumps(doc["payload"])
        assert "-0.4608222088" in flat and "4.143111634" in flat

    def test_mu_in_gap(self, tmp_path, capsys):
        cfg = {"problem": {"d": 1, "generator": "laplacian_d1"}, "eigenvalue": {"mu": 0.1}}
        assert main(["eigenvalue", "--config", write_cfg(tmp_path, cfg)]) == 2
        assert "configuration error" in capsys.readouterr().err

    def test_ladder_ratio_checked(self, tmp_path):
        cfg = {"problem": D1, "eigenvalue": {"ladder": {"mu_start": 1.0, "ratio": 2.0, "count": 3}}}
        assert main(["eigenvalue", "--config", write_cfg(tmp_path, cfg)]) == 2

    def test_inline_and_file_generator(self, tmp_path):
        gen = {"d": 1, "sites": [{"x": [0], "v": 1.0}]}
        (tmp_path / "g.json").write_text(json.dumps(gen))
        a = run_json(tmp_path, "eigenvalue", {"problem": {"generator": "g.json"}, "eigenvalue": {"mu": 1.0}})[1]
        b = run_json(tmp_path, "eigenvalue", {"problem": {"generator": gen}, "eigenvalue": {"mu": 1.0}})[1]
        assert a["payload"] == b["payload"]


class TestSweep:
    def test_csv(self, tmp_path):
        cfg = {"problem": D1, "sweep": {"ladder": {"mu_start": 1.0, "ratio": 0.5, "count": 6, "side": "bottom"}}}
        out = tmp_path / "out"
        assert main(["sweep", "--config", write_cfg(tmp_path, cfg), "--out", str(out), "--format", "csv"]) == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        assert lines[0] == "# command: sweep"
        assert any(line.startswith("# config_hash: ") for line in lines)
        header = next(line for line in lines if not line.startswith("#"))
        assert header.split(",")[:3] == ["mu", "side", "e"]
        rows = lines[lines.index(header) + 1:]
        assert len(rows) == 6
        assert (out / "sweep.json").exists() and (out / "sweep.timings.json").exists()


class TestFit:
    def test_delta_d1(self, tmp_path):
        cfg = {"problem": D1, "fit": {"edge": "bottom", "tolerance": 0.01,
                                      "ladder": {"mu_start": 1e-2, "ratio": 0.5623413251903491, "count": 9}}}
        code, doc = run_json(tmp_path, "fit", cfg)
        assert code == 0
        summ = doc["payload"]["summary"]
        assert abs(summ["fitted"] - 4 / 3) <= 0.01 * 4 / 3

    def test_failed_check_exit_4(self, tmp_path):
        cfg = {"problem": D1, "fit": {"edge": "bottom", "tolerance": 1e-9,
                                      "ladder": {"mu_start": 1e-1, "ratio": 0.5, "count": 6}}}
        assert run_json(tmp_path, "fit", cfg)[0] == 4


class TestOracle:
    def test_d1(self, tmp_path):
        code, doc = run_json(tmp_path, "oracle", {"problem": D1, "oracle": {"mu": 1.0, "N": 64}})
        assert code == 0
        assert doc["payload"]["comparison"]["abs_diff"] <= 1e-10


class TestAppendix:
    def test_default_checks(self, tmp_path):
        code, doc = run_json(tmp_path, "appendix-verify", {"appendix_verify": {"samples": 500}})
        assert code == 0 and doc["payload"]["passed"] is True
        j0 = next(r for r in doc["payload"]["singular_parts"] if "j_0" in r["name"])
        assert abs(j0["value"] - j0["target"]) <= 1e-3


class TestReproducibility:
    def test_byte_identical(self, tmp_path):
        cfg = {"problem": D1, "eigenvalue": {"mu_list": [0.3, 2.0], "derivatives": True}}
        path = write_cfg(tmp_path, cfg)
        outs = []
        for k in range(2):
            out = tmp_path / f"o{k}"
            for fmt in ("csv", "json"):
                assert main(["eigenvalue", "--config", path, "--out", str(out), "--format", fmt]) == 0
            outs.append(((out / "eigenvalue.csv").read_bytes(), (out / "eigenvalue.json").read_bytes()))
        assert outs[0] == outs[1]

    def test_hash_ignores_key_order(self):
        a = {"problem": {"d": 1, "generator": "delta"}, "eigenvalue": {"mu": 1.0}}
        b = {"eigenvalue": {"mu": 1.0}, "problem": {"generator": "delta", "d": 1}}
        assert config_hash(a) == config_hash(b)
        assert config_hash(a) != config_hash({**a, "eigenvalue": {"mu": 2.0}})

    def test_stdout(self, tmp_path, capsys):
        assert main(["eigenvalue", "--config", write_cfg(tmp_path, {"problem": D1, "eigenvalue": {"mu": 1.0}})]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["command"] == "eigenvalue" and doc["version"]
