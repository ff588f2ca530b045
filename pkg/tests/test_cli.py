import subprocess
import sys

from walab.cli import main
from walab.harness import preset, run_plan
from walab.landscape import read_probe_csv
from walab.ndcore import save_checkpoint
from walab.nn import init_weights, mlp_spec


def test_preset_list(capsys):
    assert main(["preset", "list"]) == 0
    out = capsys.readouterr().out
    for name in ("case1-backbone", "table3-desk", "fig4-desk", "quad-variance"):
        assert name in out


def test_preset_show_carries_provenance(capsys):
    assert main(["preset", "show", "fig4-desk"]) == 0
    out = capsys.readouterr().out
    assert "momentum = 0.9" in out
    assert "# reference:" in out


def test_train_smoke_and_compare(tmp_path, capsys):
    rc = main(["train", "--preset", "blobs-smoke", "--seed", "1",
               "--out", str(tmp_path / "r1")])
    assert rc == 0
    rc = main(["train", "--preset", "blobs-smoke", "--seed", "2",
               "--out", str(tmp_path / "r2")])
    assert rc == 0
    rc = main(["compare", str(tmp_path / "r1"), str(tmp_path / "r2"),
               "--out", str(tmp_path / "cmp.csv")])
    assert rc == 0
    assert (tmp_path / "cmp.csv").read_text().startswith("epoch,")


def test_train_from_config(tmp_path):
    run_plan(preset("blobs-smoke")[0], tmp_path / "a")
    rc = main(["train", "--config", str(tmp_path / "a" / "config.toml"),
               "--out", str(tmp_path / "b")])
    assert rc == 0
    strip = lambda text: "\n".join(
        ",".join(ln.split(",")[:-1]) for ln in text.strip().split("\n")
    )
    assert strip((tmp_path / "a" / "metrics.csv").read_text()) == strip(
        (tmp_path / "b" / "metrics.csv").read_text()
    )


def test_unknown_preset_is_usage_error(capsys):
    assert main(["train", "--preset", "nope", "--out", "/tmp/x"]) == 2
    assert "unknown preset" in capsys.readouterr().err


def test_quad_subcommand(tmp_path, capsys):
    rc = main(["quad", "--lr", "0.1", "--h", "1.0", "--sigma", "1.0",
               "--steps", "500", "--window", "20", "--seeds", "50",
               "--out", str(tmp_path / "q.csv")])
    assert rc == 0
    text = (tmp_path / "q.csv").read_text()
    assert text.startswith("lr,h_summary,window,var_final,var_tail,ratio")
    assert "ratio=" in capsys.readouterr().out


def test_quad_rejects_unstable(capsys):
    assert main(["quad", "--lr", "3.0", "--h", "1.0"]) == 2


def test_probe_subcommand(tmp_path, capsys):
    spec = mlp_spec([48, 24, 10])  # matches the default blobs config
    a, b = init_weights(spec, 1), init_weights(spec, 2)
    save_checkpoint(tmp_path / "a.ckpt", a)
    save_checkpoint(tmp_path / "b.ckpt", b)
    rc = main([
        "probe", "--ckpt-a", str(tmp_path / "a.ckpt"), "--ckpt-b", str(tmp_path / "b.ckpt"),
        "--model", "mlp:48,24,10", "--dataset", "blobs",
        "--t-min", "0", "--t-max", "1", "--t-count", "5",
        "--out", str(tmp_path / "probe.csv"),
    ])
    assert rc == 0
    res = read_probe_csv(tmp_path / "probe.csv")
    assert len(res.ts) == 5
    assert res.ts[0] == 0.0 and res.ts[-1] == 1.0


def test_probe_missing_checkpoint_exit_3(tmp_path, capsys):
    rc = main(["probe", "--ckpt-a", str(tmp_path / "none.ckpt"),
               "--ckpt-b", str(tmp_path / "none.ckpt"), "--dataset", "blobs"])
    assert rc == 3


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "walab", "preset", "list"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "quad-variance" in proc.stdout
