import csv
import io
import json
import math

import pytest

from spinlab.cli import EXIT_CONFIG, EXIT_DEGENERATE, EXIT_OK, run
from spinlab.config import ExperimentFile
from spinlab.errors import ConfigError

STANDARD = {
    "A": {"orientation": {"theta": "0deg"}},
    "A'": {"orientation": {"theta": "90deg"}},
    "B": {"orientation": {"theta": "45deg"}},
    "B'": {"orientation": {"theta": "135deg"}},
}
CHSH_SETTINGS = [["A", "B"], ["A", "B'"], ["A'", "B'"], ["A'", "B"]]


def write(tmp_path, doc, name="exp.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc, indent=2) if isinstance(doc, dict) else doc)
    return p


def invoke(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run([str(a) for a in argv], stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestPredict:
    def test_sharp_antiparallel(self, tmp_path):
        doc = {
            "model": "qm-contextual",
            "analyzers": {
                "A": {"orientation": [0, 0, 1], "eta": 0.9},
                "B": {"orientation": [0, 0, -1], "eta": 0.5},
            },
            "settings": [["A", "B"]],
        }
        code, out, _ = invoke("predict", "--config", write(tmp_path, doc), "--format", "csv")
        assert code == EXIT_OK
        (row,) = rows(out)
        assert float(row["correlation"]) == pytest.approx(0.45, abs=1e-15)
        assert float(row["coincidence_probability"]) == pytest.approx(0.45 / 2, abs=1e-15)
        assert float(row["conditional_correlation"]) == pytest.approx(1.0, abs=1e-15)

    def test_smeared_aligned(self, tmp_path):
        cap = {"epsilon": 0.5, "smearing": "uniform-cap", "eta": 0.8}
        doc = {
            "model": "qm-contextual",
            "analyzers": {"A": {"orientation": [0, 0, 1], **cap}, "B": {"orientation": [0, 0, 1], **cap}},
            "settings": [["A", "B"]],
        }
        code, out, _ = invoke("predict", "--config", write(tmp_path, doc), "--format", "csv")
        (row,) = rows(out)
        assert float(row["correlation"]) == pytest.approx(-0.5625 * 0.64, abs=1e-15)
        assert float(row["kappa_first"]) == 0.75

    def test_zero_efficiency_row(self, tmp_path):
        doc = {
            "model": "qm-contextual",
            "analyzers": {"A": {"orientation": [0, 0, 1], "eta": 0}, "B": {"orientation": [1, 0, 0]}},
            "settings": [["A", "B"]],
        }
        code, out, _ = invoke("predict", "--config", write(tmp_path, doc), "--format", "json")
        (row,) = json.loads(out)["rows"]
        assert row["coincidence_probability"] == 0.0 and row["correlation"] == 0.0
        assert row["conditional_correlation"] is None

    def test_table_echoes_config(self, tmp_path):
        doc = {"model": "bell-sign", "analyzers": STANDARD, "settings": CHSH_SETTINGS, "seed": 3}
        code, out, _ = invoke("predict", "--config", write(tmp_path, doc))
        assert code == EXIT_OK
        assert out.startswith("# predict: ") and '"seed": 3' in out.splitlines()[0]


class TestChsh:
    def base(self, **kw):
        doc = {"model": "qm-contextual", "seed": 1, "pairs_per_run": 2000, "runs": 3,
               "analyzers": STANDARD, "settings": CHSH_SETTINGS}
        doc.update(kw)
        return doc

    def test_csv_columns(self, tmp_path):
        out_path = tmp_path / "out" / "chsh.csv"
        code, out, _ = invoke("chsh", "--config", write(tmp_path, self.base()), "--out", out_path)
        assert code == EXIT_OK
        data = out_path.read_bytes()
        assert b"\r" not in data
        header = data.decode().splitlines()[0]
        assert header == "run_index,E1,E2,E3,E4,S"
        assert len(rows(data.decode())) == 3
        assert "S = " in out

    def test_shared_bell_sign_bounded(self, tmp_path):
        doc = self.base(model="bell-sign", mode="shared", pairs_per_run=15, runs=300)
        code, out, _ = invoke("chsh", "--config", write(tmp_path, doc), "--format", "csv")
        assert code == EXIT_OK
        assert max(float(r["S"]) for r in rows(out)) <= 2.0

    def test_factorized_fresh(self, tmp_path):
        doc = self.base(model="factorized(0.5,0.5)", pairs_per_run=20_000, runs=5)
        code, out, _ = invoke("chsh", "--config", write(tmp_path, doc), "--format", "json")
        summary = json.loads(out)["summary"]
        assert abs(summary["S"] - 0.5) <= 4 * summary["stderr_S"]

    def test_wrong_setting_count(self, tmp_path):
        code, _, err = invoke("chsh", "--config", write(tmp_path, self.base(settings=CHSH_SETTINGS[:3])))
        assert code == EXIT_CONFIG and "four settings" in err

    def test_shared_contextual_rejected(self, tmp_path):
        code, _, err = invoke("chsh", "--config", write(tmp_path, self.base(mode="shared")))
        assert code == EXIT_CONFIG

    def test_degenerate_exit(self, tmp_path):
        an = {k: dict(v, eta=0.0) for k, v in STANDARD.items()}
        code, _, err = invoke("chsh", "--config", write(tmp_path, self.base(analyzers=an)))
        assert code == EXIT_DEGENERATE and "coincidences=0" in err

    def test_seed_required(self, tmp_path):
        doc = self.base()
        del doc["seed"]
        code, _, err = invoke("chsh", "--config", write(tmp_path, doc))
        assert code == EXIT_CONFIG and "seed" in err
        code, _, _ = invoke("chsh", "--config", write(tmp_path, doc), "--seed", 9)
        assert code == EXIT_OK

    def test_flag_overrides(self, tmp_path):
        path = write(tmp_path, self.base())
        code, out, _ = invoke("chsh", "--config", path, "--runs", 2, "--pairs", 100, "--model", "bell-sign",
                              "--format", "json")
        echo = json.loads(out)["config"]
        assert (echo["runs"], echo["pairs_per_run"], echo["model"]) == (2, 100, "bell-sign")
        assert len(json.loads(out)["rows"]) == 2

    def test_byte_identical_across_workers(self, tmp_path):
        path = write(tmp_path, self.base(pairs_per_run=5000))
        outs = []
        for w in (1, 4, 1):
            target = tmp_path / f"w{w}_{len(outs)}.csv"
            assert invoke("chsh", "--config", path, "--workers", w, "--out", target)[0] == EXIT_OK
            outs.append(target.read_bytes())
        assert outs[0] == outs[1] == outs[2]


class TestHerbert:
    def doc(self, model):
        return {"model": model, "seed": 2, "pairs_per_run": 200_000,
                "herbert": {"thetas": ["22.5deg", "45deg", "67.5deg"]}}

    def test_quantum_violates_everywhere(self, tmp_path):
        code, out, _ = invoke("herbert", "--config", write(tmp_path, self.doc("qm-contextual")), "--format", "csv")
        assert code == EXIT_OK
        assert [r["violated"] for r in rows(out)] == ["true"] * 3

    def test_bell_sign_equality(self, tmp_path):
        code, out, _ = invoke("herbert", "--config", write(tmp_path, self.doc("bell-sign")), "--format", "csv")
        for r in rows(out):
            assert r["violated"] == "false" and r["consistent_with_equality"] == "true"
            assert float(r["d_theta"]) == pytest.approx(float(r["theta"]) / math.pi, abs=0.01)

    def test_boundary(self, tmp_path):
        doc = self.doc("qm-contextual")
        doc["herbert"]["thetas"] = [math.pi / 2]
        code, out, _ = invoke("herbert", "--config", write(tmp_path, doc), "--format", "csv")
        (r,) = rows(out)
        assert r["violated"] == "false" and float(r["d_2theta"]) == 1.0

    def test_theta_too_large(self, tmp_path):
        doc = self.doc("qm-contextual")
        doc["herbert"]["thetas"] = ["100deg"]
        code, _, err = invoke("herbert", "--config", write(tmp_path, doc))
        assert code == EXIT_CONFIG and "2*theta" in err


class TestScan:
    def doc(self, model, steps=7):
        return {"model": model, "seed": 5, "pairs_per_run": 50_000,
                "scan": {"start": 0, "stop": "180deg", "steps": steps}}

    def test_contextual(self, tmp_path):
        code, out, _ = invoke("scan", "--config", write(tmp_path, self.doc("qm-contextual")), "--format", "csv")
        data = rows(out)
        assert list(data[0]) == ["theta", "E_qm_closed", "E_model_mc", "stderr", "E_model_closed"]
        for r in data:
            assert abs(float(r["E_model_mc"]) - float(r["E_qm_closed"])) <= 4 * float(r["stderr"]) + 1e-12

    def test_bell_sign(self, tmp_path):
        code, out, _ = invoke("scan", "--config", write(tmp_path, self.doc("bell-sign")), "--format", "csv")
        for r in rows(out):
            expected = -(1 - 2 * float(r["theta"]) / math.pi)
            assert abs(float(r["E_model_mc"]) - expected) <= 4 * float(r["stderr"]) + 1e-12

    def test_single_point(self, tmp_path):
        code, out, _ = invoke("scan", "--config", write(tmp_path, self.doc("qm-contextual", steps=1)), "--format", "csv")
        (r,) = rows(out)
        assert float(r["E_qm_closed"]) == -1.0 and float(r["E_model_mc"]) == -1.0

    def test_empty_grid(self, tmp_path):
        code, _, err = invoke("scan", "--config", write(tmp_path, self.doc("qm-contextual", steps=0)))
        assert code == EXIT_CONFIG and "empty" in err


class TestConfigValidation:
    def test_unknown_key_reports_line(self, tmp_path):
        text = '{\n  "model": "bell-sign",\n  "seed": 1,\n  "colour": "blue"\n}\n'
        code, _, err = invoke("predict", "--config", write(tmp_path, text))
        assert code == EXIT_CONFIG
        assert "exp.json:4:" in err and "colour" in err

    def test_nested_error_line(self, tmp_path):
        text = (
            '{\n  "model": "bell-sign",\n  "analyzers": {\n    "A": {"orientation": [0, 0, 1]},\n'
            '    "B": {"orientation": [0, 0, 1], "eta": 1.5}\n  },\n  "settings": [["A", "B"]]\n}\n'
        )
        with pytest.raises(ConfigError, match=r":5: "):
            ExperimentFile.loads(text, "x.json")

    def test_unknown_analyzer(self):
        text = '{"model": "bell-sign", "analyzers": {}, "settings": [["A", "B"]]}'
        with pytest.raises(ConfigError, match="unknown analyzer 'A'"):
            ExperimentFile.loads(text)

    def test_syntax_error_line(self, tmp_path):
        code, _, err = invoke("predict", "--config", write(tmp_path, '{\n  "model": "bell-sign",\n  oops\n}'))
        assert code == EXIT_CONFIG and "exp.json:3:" in err

    def test_bad_model(self):
        with pytest.raises(ConfigError, match="unknown model"):
            ExperimentFile.loads('{"model": "magic"}')

    def test_yaml_accepted(self):
        doc = ExperimentFile.loads("model: bell-sign\nseed: 4\nscan: {start: 0, stop: 90deg, steps: 3}\n")
        assert doc.scan_grid() == pytest.approx([0, math.pi / 4, math.pi / 2])

    def test_exponent_numbers_in_json(self):
        doc = ExperimentFile.loads(
            '{"model": "qm-contextual", "analyzers": {"A": {"orientation": [0,0,1], "epsilon": 1e-3, '
            '"smearing": "uniform-cap"}}, "settings": [["A", "A"]]}'
        )
        assert doc.analyzer("A").smearing.cap.epsilon == 1e-3

    def test_missing_file(self, tmp_path):
        code, _, err = invoke("predict", "--config", tmp_path / "absent.json")
        assert code == EXIT_CONFIG

    def test_bad_cli_usage(self):
        assert invoke("predict")[0] == EXIT_CONFIG
