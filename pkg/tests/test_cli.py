import json
import os

import pytest

import sbmi.cli as cli


def run_cli(argv, capsys):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestContractExamples:
    def test_replica_defaults(self, capsys):
        code, out, err = run_cli(["replica", "--lambda", "1.5",
                                  "--r", "0.5"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["schema_version"] == 1
        assert payload["command"] == "replica"
        assert payload["result"]["q_star"] > 0.0
        assert payload["result"]["psi_star"] < 0.375

    def test_mi_exact_zero_signal(self, capsys):
        code, out, err = run_cli(["mi-exact", "--n", "4", "--delta", "0"],
                                 capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["result"]["mi_per_node"] == 0.0

    def test_byte_identical_repeats(self, tmp_path, capsys):
        cfgv = ["generate", "--n", "12", "--seed", "77", "--t", "0.3",
                "--R", "0.5"]
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        assert cli.main(cfgv + ["--output", str(a)]) == 0
        assert cli.main(cfgv + ["--output", str(b)]) == 0
        capsys.readouterr()
        ba = a.read_bytes()
        bb = b.read_bytes()
        # artifacts embed their own output path; neutralize only that
        assert ba.replace(b"a.json", b"x.json") \
            == bb.replace(b"b.json", b"x.json")

    def test_stdout_byte_identical(self, capsys):
        code1, out1, _ = run_cli(["replica", "--lambda", "1.2",
                                  "--r", "0.4"], capsys)
        code2, out2, _ = run_cli(["replica", "--lambda", "1.2",
                                  "--r", "0.4"], capsys)
        assert code1 == code2 == 0
        assert out1 == out2


class TestExitCodes:
    def test_parameter_error_is_2(self, capsys):
        code, _, err = run_cli(["generate", "--n", "6", "--r", "0.7"],
                               capsys)
        assert code == 2
        assert err.startswith("error: parameter:")
        assert "\n" == err[-1] and err.count("\n") == 1

    def test_domain_error_is_2(self, capsys):
        code, _, err = run_cli(["mi-exact", "--n", "30"], capsys)
        assert code == 2
        assert "error: parameter:" in err

    def test_unknown_command_is_64(self, capsys):
        code, _, err = run_cli(["annihilate", "--n", "4"], capsys)
        assert code == 64
        assert "unknown command" in err

    def test_unwritable_output_is_73(self, tmp_path, capsys):
        target = tmp_path / "no" / "such" / "dir" / "out.json"
        code, _, err = run_cli(["generate", "--n", "6",
                                "--output", str(target)], capsys)
        assert code == 73
        assert "error: output:" in err
        assert not target.exists()

    def test_output_path_is_directory_is_73(self, tmp_path, capsys):
        code, _, err = run_cli(["generate", "--n", "6",
                                "--output", str(tmp_path)], capsys)
        assert code == 73

    def test_bad_seed_is_2(self, capsys):
        code, _, err = run_cli(["generate", "--n", "6",
                                "--seed", str(1 << 64)], capsys)
        assert code == 2

    def test_estimator_failure_preserves_partial(self, tmp_path, capsys,
                                                 monkeypatch):
        out = tmp_path / "run.json"

        def explode(cfg, emit):
            emit.emit(cfg.output, "half-written\n")
            raise RuntimeError("backend fell over")

        monkeypatch.setitem(cli._DISPATCH, "generate", explode)
        code, _, err = run_cli(["generate", "--n", "6",
                                "--output", str(out)], capsys)
        assert code == 1
        assert not out.exists()
        partial = tmp_path / "run.json.partial"
        assert partial.exists()
        assert partial.read_text() == "half-written\n"
        assert "error: estimator:" in err
        assert "partial:" in err


class TestConfigFile:
    def test_file_supplies_values(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"n": 4, "delta": 0.0}))
        code, out, _ = run_cli(["mi-exact", "--config", str(cfg)], capsys)
        assert code == 0
        assert json.loads(out)["result"]["mi_per_node"] == 0.0

    def test_flag_overrides_file(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"lambda": 0.5, "r": 0.5}))
        code, out, _ = run_cli(["replica", "--config", str(cfg),
                                "--lambda", "1.5"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["run_config"]["lambda"] == 1.5
        assert payload["result"]["q_star"] > 0.0

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"n": 4, "walkers": 7}))
        code, _, err = run_cli(["mi-exact", "--config", str(cfg)], capsys)
        assert code == 2
        assert "walkers" in err

    def test_malformed_file_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text("{not json")
        code, _, err = run_cli(["mi-exact", "--config", str(cfg)], capsys)
        assert code == 2

    def test_embedded_config_reproduces_run(self, tmp_path, capsys):
        first = tmp_path / "first.json"
        assert cli.main(["generate", "--n", "9", "--seed", "123",
                         "--t", "0.2", "--R", "0.4",
                         "--output", str(first)]) == 0
        embedded = json.loads(first.read_text())["run_config"]
        command = embedded.pop("command")
        cfgfile = tmp_path / "replay.json"
        cfgfile.write_text(json.dumps(embedded))
        second = tmp_path / "second.json"
        assert cli.main([command, "--config", str(cfgfile),
                         "--output", str(second)]) == 0
        capsys.readouterr()
        a = json.loads(first.read_text())
        b = json.loads(second.read_text())
        a["run_config"].pop("output")
        b["run_config"].pop("output")
        assert a == b


class TestArtifacts:
    def test_ti_emits_csv_and_summary(self, tmp_path, capsys):
        out = tmp_path / "ti.json"
        code, _, _ = run_cli(
            ["ti", "--n", "6", "--seed", "3", "--t-nodes", "3",
             "--sweeps", "120", "--burn-in", "20", "--instances", "2",
             "--output", str(out)], capsys)
        assert code == 0
        summary = json.loads(out.read_text())
        res = summary["result"]
        assert {"mi_per_node", "stderr", "lambda_n", "unreliable",
                "branch_warning", "instances_per_node"} <= set(res)
        csv_path = tmp_path / "ti.csv"
        lines = csv_path.read_text().splitlines()
        comments = [ln for ln in lines if ln.startswith("#")]
        assert any("schema_version" in c for c in comments)
        assert any("run_config" in c for c in comments)
        assert any("params" in c for c in comments)
        data = [ln for ln in lines if not ln.startswith("#")]
        assert data[0] == "t,q2_mean,q2_stderr"
        assert len(data) == 4  # header + one row per node

    def test_ti_stdout_embeds_rows(self, capsys):
        code, out, _ = run_cli(
            ["ti", "--n", "5", "--seed", "3", "--t-nodes", "3",
             "--sweeps", "100", "--burn-in", "20", "--instances", "2"],
            capsys)
        assert code == 0
        payload = json.loads(out)
        assert len(payload["result"]["q2_at_t"]) == 3

    def test_mi_exact_dump_brackets(self, tmp_path, capsys):
        dump = tmp_path / "pairs.csv"
        code, out, _ = run_cli(
            ["mi-exact", "--n", "4", "--lambda", "1.2", "--t", "0.1",
             "--R", "0.3", "--seed", "9",
             "--dump-brackets", str(dump)], capsys)
        assert code == 0
        payload = json.loads(out)
        assert "report" in payload["result"]
        assert "pair_xx" in payload["result"]["report"]
        lines = [ln for ln in dump.read_text().splitlines()
                 if not ln.startswith("#")]
        assert lines[0] == "x0,x1,x2,x3"
        assert len(lines) == 5

    def test_generate_embeds_params_and_instance(self, capsys):
        code, out, _ = run_cli(["generate", "--n", "7", "--seed", "4"],
                               capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["params"]["n"] == 7
        assert len(payload["result"]["spins"]) == 7
        assert "edges_b64" in payload["result"]

    def test_interpolate_csv_columns(self, tmp_path, capsys):
        out = tmp_path / "path.csv"
        code, _, _ = run_cli(
            ["interpolate", "--n", "5", "--epsilon", "0.1",
             "--t-nodes", "3", "--instances", "2", "--seed", "2",
             "--output", str(out)], capsys)
        assert code == 0
        data = [ln for ln in out.read_text().splitlines()
                if not ln.startswith("#")]
        assert data[0] == "t,R,q,stderr"
        assert len(data) == 5  # header + K+1 nodes

    def test_concentration_free_energy(self, tmp_path, capsys):
        out = tmp_path / "conc.csv"
        code, _, _ = run_cli(
            ["concentration", "--kind", "free-energy",
             "--n-grid", "6,8", "--samples", "12", "--seed", "5",
             "--output", str(out)], capsys)
        assert code == 0
        data = [ln for ln in out.read_text().splitlines()
                if not ln.startswith("#")]
        assert data[0].startswith("n,variance")
        assert len(data) == 3

    def test_mi_mc_reports_stderr(self, capsys):
        code, out, _ = run_cli(
            ["mi-mc", "--n", "4", "--lambda", "1.0", "--samples", "200",
             "--seed", "8"], capsys)
        assert code == 0
        res = json.loads(out)["result"]
        assert res["samples"] == 200
        assert res["stderr"] > 0.0

    def test_sumrule_json(self, capsys):
        code, out, _ = run_cli(
            ["sumrule", "--n", "5", "--epsilon", "0.1", "--t-nodes", "4",
             "--instances", "3", "--mi-samples", "200", "--seed", "6",
             "--q-path", "zero"], capsys)
        assert code == 0
        res = json.loads(out)["result"]
        assert {"residual", "psi_term", "r1", "r2_integral",
                "r3"} <= set(res)
        assert res["r1"] == 0.0


class TestParsing:
    def test_delta_sugar_sets_lambda(self, capsys):
        code, out, _ = run_cli(
            ["generate", "--n", "16", "--delta", "0.125",
             "--p-bar", "0.5"], capsys)
        assert code == 0
        params = json.loads(out)["params"]
        assert params["delta"] == 0.125
        assert params["lambda_n"] == pytest.approx(
            16 * 0.125 ** 2 / 0.25, rel=1e-12)

    def test_negative_sign_flag(self, capsys):
        code, out, _ = run_cli(
            ["generate", "--n", "16", "--lambda", "0.5",
             "--sign", "-1"], capsys)
        assert code == 0
        assert json.loads(out)["params"]["delta"] < 0.0

    def test_missing_n_rejected(self, capsys):
        code, _, err = run_cli(["generate", "--lambda", "1.0"], capsys)
        assert code == 2
        assert "n" in err

    def test_format_choice_validated(self, capsys):
        code, _, err = run_cli(
            ["generate", "--n", "4", "--format", "yaml"], capsys)
        assert code == 2

    def test_csv_format_rejected_for_json_only_command(self, capsys):
        code, _, err = run_cli(
            ["replica", "--lambda", "1.0", "--format", "csv"], capsys)
        assert code == 2

    def test_help_exits_zero(self, capsys):
        assert cli.main(["--help"]) == 0
        capsys.readouterr()
        assert cli.main(["ti", "--help"]) == 0
        out = capsys.readouterr().out
        assert "q2_mean" in out  # csv columns documented per subcommand
