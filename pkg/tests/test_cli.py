import numpy as np
import pytest

from lidarloc.cli import main
from lidarloc.config import Config, ConfigError, parse_config_text
from lidarloc.errors import ParseError

TINY = ["--set", "density=20", "--set", "n_frames=5", "--set", "samples_per_frame=2",
        "--set", "width=32", "--set", "height=24", "--set", "cx=16", "--set", "cy=12",
        "--set", "fx=24", "--set", "fy=24", "--set", "split=0.6,0.2,0.2"]


def test_parse_config_later_keys_win():
    vals = parse_config_text("a = 1  # note\n# full comment\n\nb=2\na = 3\n")
    assert vals == {"a": "3", "b": "2"}


def test_parse_config_error_line():
    with pytest.raises(ParseError) as exc:
        parse_config_text("a = 1\nnonsense\n")
    assert exc.value.line == 2


def test_config_require_names_key():
    with pytest.raises(ConfigError, match="'cloud'"):
        Config().require("cloud")


def test_gradcheck_exit_zero(capsys):
    assert main(["gradcheck", "--seed", "1"]) == 0
    assert "max relative gradient error" in capsys.readouterr().out


def test_missing_cloud_is_data_error(capsys, tmp_path):
    code = main(["render-dataset", "--dataset", str(tmp_path / "ds")])
    assert code == 2
    assert "cloud" in capsys.readouterr().err


def test_unknown_flag_is_usage_error(capsys):
    assert main(["train", "--no-such-flag"]) == 1
    assert "usage" in capsys.readouterr().err


def test_no_subcommand_is_usage_error():
    assert main([]) == 1


def test_unreadable_cloud_is_data_error(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("1 2 x\n")
    assert main(["render-dataset", "--cloud", str(bad), "--dataset", str(tmp_path / "d")]) == 2


def run_pipeline(root, seed=3):
    root.mkdir()
    common = TINY + ["--seed", str(seed)]
    cloud, sparse = root / "dense.txt", root / "sparse.txt"
    assert main(["generate-scene", "--cloud", str(cloud),
                 "--sparse-cloud", str(sparse)] + common) == 0
    assert main(["render-dataset", "--cloud", str(cloud), "--sparse-cloud", str(sparse),
                 "--dataset", str(root / "ds")] + common) == 0
    assert main(["train", "--dataset", str(root / "ds"), "--checkpoint", str(root / "m.ckpt"),
                 "--loss-log", str(root / "loss.csv"), "--set", "epochs=2",
                 "--set", "warmup_epochs=1", "--set", "batch_size=4"] + common) == 0
    assert main(["evaluate", "--dataset", str(root / "ds"), "--checkpoint", str(root / "m.ckpt"),
                 "--error-table", str(root / "errors.csv")] + common) == 0
    return root


def test_end_to_end_pipeline_is_deterministic(tmp_path):
    a = run_pipeline(tmp_path / "a")
    b = run_pipeline(tmp_path / "b")
    table = (a / "errors.csv").read_text()
    assert table.splitlines()[0] == "E_trans,E_rotation,E_x,E_y,E_z,E_roll,E_pitch,E_yaw"
    assert np.isfinite([float(v) for v in table.splitlines()[1].split(",")]).all()
    for name in ("errors.csv", "m.ckpt", "loss.csv", "ds/index.csv", "sparse.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_localize_and_baseline_commands(tmp_path, capsys):
    root = run_pipeline(tmp_path / "p")
    capsys.readouterr()
    frame = sorted((root / "ds").glob("frame_*_intensity.pgm"))[0]
    init = "10 5 1.5 0 0 0 0"
    trace = root / "trace.csv"
    code = main(["localize", "--checkpoint", str(root / "m.ckpt"),
                 "--sparse-cloud", str(root / "sparse.txt"), "--intensity", str(frame),
                 "--init-pose", init, "--trace", str(trace), "--set", "max_iters=3"] + TINY)
    out = capsys.readouterr().out
    assert code in (0, 2)
    assert out.splitlines()[0].count(" ") == 6
    if code == 0:
        assert trace.read_text().startswith("iteration,delta_trans,delta_rot,value")
    scores = root / "scores.csv"
    assert main(["baseline", "--cloud", str(root / "dense.txt"), "--intensity", str(frame),
                 "--scores", str(scores), "--set", "grid_step=0.5"] + TINY) == 0
    lines = scores.read_text().splitlines()
    assert lines[0] == "dx,dy,dz,droll,dpitch,dyaw,score"
    assert len(lines) == 1 + 5
    assert main(["baseline", "--cloud", str(root / "dense.txt"), "--intensity", str(frame),
                 "--scores", str(scores), "--set", "grid_step=0.5",
                 "--set", "depth_render=surface"] + TINY) == 0
    assert main(["baseline", "--cloud", str(root / "dense.txt"), "--intensity", str(frame),
                 "--set", "depth_render=mesh"] + TINY) == 2
