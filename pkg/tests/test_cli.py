import pytest

from cli import main as cli_main
from cli.main import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from utils.utils_io import read_depth


@pytest.fixture
def trained(tmp_path):
    data = tmp_path / "data"
    assert main(["synth-data", "--out", str(data), "--frames", "3", "--seed", "0"]) == EXIT_OK
    assert main(["train", "--data", str(data), "--out", str(tmp_path / "run"), "--epochs", "0"]) == EXIT_OK
    return data, tmp_path / "run" / "checkpoint_00000000.pt"


class TestUsage:
    def test_unknown_flag(self):
        assert main(["train", "--data", "x", "--bogus"]) == EXIT_USAGE

    def test_unknown_subcommand(self):
        assert main(["serve"]) == EXIT_USAGE

    def test_missing_subcommand(self):
        assert main([]) == EXIT_USAGE

    def test_help(self):
        assert main(["--help"]) == EXIT_OK


class TestCommands:
    def test_synth_then_train_zero_epochs(self, trained):
        _, checkpoint = trained
        assert checkpoint.is_file()

    def test_eval_emits_csv(self, trained, tmp_path):
        data, checkpoint = trained
        out = tmp_path / "eval"
        assert main(["eval", "--ckpt", str(checkpoint), "--data", str(data), "--out", str(out)]) == EXIT_OK
        assert (out / "eval_summary.csv").is_file()

    def test_eval_without_scaling(self, trained, tmp_path):
        data, checkpoint = trained
        out = tmp_path / "eval"
        args = ["eval", "--ckpt", str(checkpoint), "--data", str(data), "--out", str(out), "--no-scale", "--cap", "40"]
        assert main(args) == EXIT_OK

    @pytest.mark.parametrize("domain", ["day", "night"])
    def test_infer_writes_png_and_bin(self, trained, tmp_path, domain):
        data, checkpoint = trained
        stem = tmp_path / "pred" / "frame"
        args = ["infer", "--ckpt", str(checkpoint), "--image", str(data / "frames" / "000001.png"),
                "--out", str(stem), "--domain", domain]
        (tmp_path / "pred").mkdir()
        assert main(args) == EXIT_OK
        assert (tmp_path / "pred" / "frame.png").is_file()
        assert read_depth(tmp_path / "pred" / "frame.bin").shape == (96, 160)

    def test_translate_leaves_input_alone(self, trained, tmp_path):
        data, _ = trained
        before = {p.name: p.read_bytes() for p in (data / "frames").iterdir()}
        assert main(["translate", "--in", str(data), "--out", str(tmp_path / "night"), "--seed", "1"]) == EXIT_OK
        assert {p.name: p.read_bytes() for p in (data / "frames").iterdir()} == before
        assert len(list((tmp_path / "night").glob("*.png"))) == 3

    def test_runtime_error_exit_code(self, tmp_path):
        assert main(["train", "--data", str(tmp_path / "missing"), "--out", str(tmp_path / "run")]) == EXIT_RUNTIME

    def test_missing_checkpoint(self, tmp_path):
        args = ["eval", "--ckpt", str(tmp_path / "none.pt"), "--data", str(tmp_path)]
        assert main(args) == EXIT_RUNTIME

    def test_unexpected_exception_exit_code(self, tmp_path, monkeypatch, captured_logs):
        def explode(args):
            raise RuntimeError("device lost")

        monkeypatch.setitem(cli_main.COMMANDS, "translate", explode)
        args = ["translate", "--in", str(tmp_path), "--out", str(tmp_path / "night"), "--seed", "0"]
        assert main(args) == EXIT_RUNTIME
        assert any("translate failed unexpectedly" in m for m in captured_logs)


@pytest.mark.slow
def test_smoke_chain(tmp_path):
    data, run = tmp_path / "data", tmp_path / "run"
    assert main(["synth-data", "--out", str(data), "--frames", "20"]) == EXIT_OK
    assert main(["train", "--data", str(data), "--out", str(run), "--max-steps", "50"]) == EXIT_OK
    checkpoint = sorted(run.glob("checkpoint_*.pt"))[-1]
    assert checkpoint.name == "checkpoint_00000050.pt"
    assert main(["eval", "--ckpt", str(checkpoint), "--data", str(data), "--out", str(tmp_path / "eval")]) == EXIT_OK
    assert main(["infer", "--ckpt", str(checkpoint), "--image", str(data / "frames" / "000005.png"),
                 "--out", str(tmp_path / "infer")]) == EXIT_OK
