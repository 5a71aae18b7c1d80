"""CLI behavior: subcommands, config precedence, exit codes, atomicity."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from estlora import cli, gate, schedule_export

from conftest import lora_entries, write_container


@pytest.fixture
def pair_files(tmp_path, rng):
    shapes = [(f"unet.block{i}.attn", 8, 12, 2) for i in range(4)]
    content = tmp_path / "content.safetensors"
    style = tmp_path / "style.safetensors"
    write_container(content, lora_entries(rng, shapes, alpha=2.0))
    write_container(style, lora_entries(rng, shapes, alpha=2.0))
    return str(content), str(style)


def write_embedding(path, values):
    path.write_text(
        json.dumps(
            {
                "model": "t",
                "dim": len(values),
                "embedding": list(values),
                "source": "x",
            }
        )
    )
    return str(path)


def run_cli(*argv):
    return cli.main(list(argv))


class TestAnalyze:
    def test_writes_report(self, pair_files, tmp_path):
        out = tmp_path / "energies.json"
        code = run_cli(
            "analyze", "--content", pair_files[0], "--style", pair_files[1],
            "--out", str(out),
        )
        assert code == 0
        obj = json.loads(out.read_text())
        assert obj["method"] == "gram"
        assert len(obj["layers"]) == 4
        assert all(
            entry["e_content"] > 0 and entry["e_style"] > 0
            for entry in obj["layers"]
        )

    def test_stdout_default(self, pair_files, capsys):
        assert run_cli(
            "analyze", "--content", pair_files[0], "--style", pair_files[1]
        ) == 0
        obj = json.loads(capsys.readouterr().out)
        assert obj["method"] == "gram"

    def test_disjoint_pair_exit_2(self, tmp_path, rng, capsys):
        a = tmp_path / "a.safetensors"
        b = tmp_path / "b.safetensors"
        write_container(a, lora_entries(rng, [("x", 4, 4, 2)]))
        write_container(b, lora_entries(rng, [("y", 4, 4, 2)]))
        assert run_cli("analyze", "--content", str(a), "--style", str(b)) == 2
        assert "adapters share no layers" in capsys.readouterr().err

    def test_corrupt_file_exit_2(self, tmp_path, pair_files, capsys):
        bad = tmp_path / "bad.safetensors"
        bad.write_bytes(b"\xff" * 32)
        assert run_cli("analyze", "--content", str(bad), "--style", pair_files[1]) == 2
        assert "error:" in capsys.readouterr().err

    def test_missing_flag_exit_2(self, pair_files, capsys):
        assert run_cli("analyze", "--content", pair_files[0]) == 2
        assert "--style" in capsys.readouterr().err


class TestDiscrepancy:
    def test_identical_files(self, tmp_path, rng, capsys):
        emb = write_embedding(tmp_path / "e.json", rng.standard_normal(8).tolist())
        assert run_cli("discrepancy", "--style-emb", emb, "--content-emb", emb) == 0
        assert capsys.readouterr().out.strip() == '{"d":1.0,"raw_sq_distance":0.0}'

    def test_d_passthrough(self, capsys):
        assert run_cli("discrepancy", "--d", "0.40") == 0
        obj = json.loads(capsys.readouterr().out)
        assert obj["d"] == 0.40
        assert obj["raw_sq_distance"] == pytest.approx(2.4)

    def test_dim_mismatch_exit_2(self, tmp_path, rng, capsys):
        a = write_embedding(tmp_path / "a.json", rng.standard_normal(8).tolist())
        b = write_embedding(tmp_path / "b.json", rng.standard_normal(9).tolist())
        assert run_cli("discrepancy", "--style-emb", a, "--content-emb", b) == 2
        assert "dimension mismatch" in capsys.readouterr().err

    def test_conflicting_inputs_exit_2(self, tmp_path, rng, capsys):
        emb = write_embedding(tmp_path / "e.json", [1.0, 0.0])
        assert run_cli(
            "discrepancy", "--d", "0.5", "--style-emb", emb, "--content-emb", emb
        ) == 2

    def test_d_out_of_range_exit_2(self, capsys):
        assert run_cli("discrepancy", "--d", "1.5") == 2


class TestPlan:
    def test_schedule_and_csv(self, pair_files, tmp_path):
        out = tmp_path / "schedule.json"
        csv = tmp_path / "schedule.csv"
        code = run_cli(
            "plan", "--content", pair_files[0], "--style", pair_files[1],
            "--alpha", "1.0", "--steps", "6", "--d", "0.5",
            "--out", str(out), "--csv", str(csv),
        )
        assert code == 0
        schedule = gate.schedule_from_json(out.read_text())
        assert schedule.steps == 6
        assert len(schedule.ordered_keys) == 4
        lines = csv.read_text().splitlines()
        assert len(lines) == 7

    def test_deterministic_bytes(self, pair_files, tmp_path):
        outs = []
        for name in ("one.json", "two.json"):
            out = tmp_path / name
            assert run_cli(
                "plan", "--content", pair_files[0], "--style", pair_files[1],
                "--steps", "5", "--out", str(out),
            ) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_style_only_constant(self, pair_files, tmp_path):
        out = tmp_path / "schedule.json"
        assert run_cli(
            "plan", "--content", pair_files[0], "--style", pair_files[1],
            "--selector", "style_only", "--steps", "3", "--out", str(out),
        ) == 0
        schedule = gate.schedule_from_json(out.read_text())
        assert np.all(schedule.choices == gate.STYLE)

    def test_alpha_zero_d_one_all_subject(self, pair_files, tmp_path):
        out = tmp_path / "schedule.json"
        assert run_cli(
            "plan", "--content", pair_files[0], "--style", pair_files[1],
            "--alpha", "0", "--d", "1", "--steps", "4", "--out", str(out),
        ) == 0
        schedule = gate.schedule_from_json(out.read_text())
        assert np.all(schedule.choices == gate.SUBJECT)

    def test_embeddings_feed_d(self, pair_files, tmp_path, rng):
        emb = write_embedding(tmp_path / "e.json", rng.standard_normal(8).tolist())
        out = tmp_path / "schedule.json"
        assert run_cli(
            "plan", "--content", pair_files[0], "--style", pair_files[1],
            "--style-emb", emb, "--content-emb", emb, "--out", str(out),
        ) == 0
        schedule = gate.schedule_from_json(out.read_text())
        assert schedule.config.d_score == 1.0

    def test_direct_merge_plan(self, pair_files, tmp_path):
        out = tmp_path / "merge.json"
        assert run_cli(
            "plan", "--content", pair_files[0], "--style", pair_files[1],
            "--selector", "direct_merge", "--w-content", "0.7",
            "--w-style", "0.3", "--out", str(out),
        ) == 0
        obj = json.loads(out.read_text())
        assert obj["selector"] == "direct_merge"
        assert obj["weights"] == {"w_content": 0.7, "w_style": 0.3}

    def test_bad_alpha_exit_2(self, pair_files, capsys):
        assert run_cli(
            "plan", "--content", pair_files[0], "--style", pair_files[1],
            "--alpha", "-1",
        ) == 2


class TestRenderStatsBake:
    @pytest.fixture
    def schedule_file(self, pair_files, tmp_path):
        out = tmp_path / "schedule.json"
        assert run_cli(
            "plan", "--content", pair_files[0], "--style", pair_files[1],
            "--alpha", "1.0", "--steps", "4", "--d", "0.5", "--out", str(out),
        ) == 0
        return str(out)

    def test_render(self, schedule_file, tmp_path):
        out = tmp_path / "map.pgm"
        assert run_cli("render", "--schedule", schedule_file, "--out", str(out)) == 0
        data = out.read_bytes()
        assert data.startswith(b"P5\n4 4\n255\n")
        parsed = schedule_export.parse_heatmap(data)
        schedule = gate.schedule_from_json(open(schedule_file).read())
        assert np.array_equal(parsed, schedule.choices)

    def test_stats(self, schedule_file, capsys):
        assert run_cli("stats", "--schedule", schedule_file) == 0
        obj = json.loads(capsys.readouterr().out)
        assert set(obj) == {
            "per_step_style_fraction",
            "overall_style_fraction",
            "per_layer_onset",
        }
        assert len(obj["per_step_style_fraction"]) == 4

    def test_bake_step(self, pair_files, schedule_file, tmp_path):
        out = tmp_path / "baked.safetensors"
        assert run_cli(
            "bake", "--content", pair_files[0], "--style", pair_files[1],
            "--schedule", schedule_file, "--step", "0", "--out", str(out),
        ) == 0
        from estlora.adapter_io import load_adapter

        schedule = gate.schedule_from_json(open(schedule_file).read())
        baked = load_adapter(str(out))
        content = load_adapter(pair_files[0])
        style = load_adapter(pair_files[1])
        for j, key in enumerate(schedule.ordered_keys):
            want = content if schedule.choices[0, j] == gate.SUBJECT else style
            assert baked.layers[key].down.data == want.layers[key].down.data

    def test_bake_step_out_of_range(self, pair_files, schedule_file, capsys):
        assert run_cli(
            "bake", "--content", pair_files[0], "--style", pair_files[1],
            "--schedule", schedule_file, "--step", "99", "--out", "x.safetensors",
        ) == 2

    def test_bake_all(self, pair_files, schedule_file, tmp_path):
        out_dir = tmp_path / "steps"
        assert run_cli(
            "bake-all", "--content", pair_files[0], "--style", pair_files[1],
            "--schedule", schedule_file, "--out-dir", str(out_dir),
        ) == 0
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert manifest["steps"] == 4
        for name in manifest["files"]:
            assert (out_dir / name).exists()

    def test_bake_all_nonempty_needs_force(self, pair_files, schedule_file, tmp_path, capsys):
        out_dir = tmp_path / "steps"
        out_dir.mkdir()
        (out_dir / "junk").write_text("x")
        assert run_cli(
            "bake-all", "--content", pair_files[0], "--style", pair_files[1],
            "--schedule", schedule_file, "--out-dir", str(out_dir),
        ) == 2
        assert run_cli(
            "bake-all", "--content", pair_files[0], "--style", pair_files[1],
            "--schedule", schedule_file, "--out-dir", str(out_dir), "--force",
        ) == 0


class TestConfigFile:
    def test_config_supplies_values(self, pair_files, tmp_path):
        cfg = tmp_path / "run.toml"
        cfg.write_text(
            "[gate]\nalpha = 2.0\nsteps = 3\nd = 0.25\n\n"
            f'[io]\ncontent = "{pair_files[0]}"\nstyle = "{pair_files[1]}"\n'
        )
        out = tmp_path / "schedule.json"
        assert run_cli("--config", str(cfg), "plan", "--out", str(out)) == 0
        schedule = gate.schedule_from_json(out.read_text())
        assert schedule.steps == 3
        assert schedule.config.alpha == 2.0
        assert schedule.config.d_score == 0.25

    def test_flags_override_config(self, pair_files, tmp_path):
        cfg = tmp_path / "run.toml"
        cfg.write_text("[gate]\nsteps = 3\n")
        out = tmp_path / "schedule.json"
        assert run_cli(
            "--config", str(cfg), "plan",
            "--content", pair_files[0], "--style", pair_files[1],
            "--steps", "7", "--out", str(out),
        ) == 0
        assert gate.schedule_from_json(out.read_text()).steps == 7

    def test_unknown_key_exit_2(self, pair_files, tmp_path, capsys):
        cfg = tmp_path / "run.toml"
        cfg.write_text("[gate]\nbogus = 1\n")
        assert run_cli(
            "--config", str(cfg), "plan",
            "--content", pair_files[0], "--style", pair_files[1],
        ) == 2
        assert "unknown [gate] keys" in capsys.readouterr().err

    def test_malformed_toml_exit_2(self, pair_files, tmp_path, capsys):
        cfg = tmp_path / "run.toml"
        cfg.write_text("[gate\n")
        assert run_cli("--config", str(cfg), "discrepancy", "--d", "0.5") == 2
        assert "malformed TOML" in capsys.readouterr().err


class TestExitCodesAndAtomicity:
    def test_io_error_exit_3(self, pair_files, tmp_path):
        missing_dir = tmp_path / "nope" / "out.json"
        assert run_cli(
            "analyze", "--content", pair_files[0], "--style", pair_files[1],
            "--out", str(missing_dir),
        ) == 3

    def test_unknown_flag_is_error(self, pair_files):
        with pytest.raises(SystemExit) as exc:
            run_cli("analyze", "--content", pair_files[0], "--wat")
        assert exc.value.code == 2

    def test_unknown_subcommand_is_error(self):
        with pytest.raises(SystemExit) as exc:
            run_cli("frobnicate")
        assert exc.value.code == 2

    def test_no_partial_file_on_failure(self, tmp_path, rng, pair_files):
        # schedule refers to layers the pair does not have -> bake fails
        keys = ("zz.only",)
        cfg = gate.GateConfig(steps=1)
        schedule = gate.SelectionSchedule(
            steps=1,
            ordered_keys=keys,
            choices=np.asarray([[2]], dtype=np.int8),
            gamma_trace=(gate.gamma(0, cfg),),
            config=cfg,
            energy_digest="0" * 64,
        )
        schedule_path = tmp_path / "schedule.json"
        schedule_path.write_text(gate.schedule_to_json(schedule))
        out = tmp_path / "baked.safetensors"
        assert run_cli(
            "bake", "--content", pair_files[0], "--style", pair_files[1],
            "--schedule", str(schedule_path), "--step", "0", "--out", str(out),
        ) == 2
        assert not out.exists()
        leftovers = [p for p in tmp_path.iterdir() if p.name.startswith(".tmp-")]
        assert leftovers == []


class TestEntryPointProcess:
    def test_console_script(self, tmp_path):
        out = subprocess.run(
            [sys.executable, "-m", "estlora", "discrepancy", "--d", "0.5"],
            capture_output=True,
            text=True,
        )
        assert out.returncode == 0
        assert json.loads(out.stdout)["d"] == 0.5

    def test_help_lists_subcommands(self):
        out = subprocess.run(
            [sys.executable, "-m", "estlora", "--help"],
            capture_output=True,
            text=True,
        )
        assert out.returncode == 0
        for name in ("analyze", "discrepancy", "plan", "render", "stats", "bake"):
            assert name in out.stdout

    def test_log_env_var(self):
        env = dict(os.environ, EST_LORA_LOG="nonsense")
        out = subprocess.run(
            [sys.executable, "-m", "estlora", "discrepancy", "--d", "0.5"],
            capture_output=True,
            text=True,
            env=env,
        )
        assert out.returncode == 0
        assert "unknown EST_LORA_LOG" in out.stderr

    def test_debug_logging(self, tmp_path, rng):
        shapes = [("a", 4, 4, 2), ("b", 4, 4, 2)]
        content = tmp_path / "c.safetensors"
        style = tmp_path / "s.safetensors"
        write_container(content, lora_entries(rng, shapes))
        write_container(style, lora_entries(rng, [("a", 4, 4, 2), ("zz", 4, 4, 2)]))
        env = dict(os.environ, EST_LORA_LOG="info")
        out = subprocess.run(
            [
                sys.executable, "-m", "estlora", "analyze",
                "--content", str(content), "--style", str(style),
            ],
            capture_output=True,
            text=True,
            env=env,
        )
        assert out.returncode == 0
        # skipped-key warnings surface on stderr
        assert "skipped" in out.stderr
