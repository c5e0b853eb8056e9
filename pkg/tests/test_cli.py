import numpy as np
import pytest

from pianoadapt.db.artifact_store import read_header
from pianoadapt.main import main
from pianoadapt.models.hand import trajectory_from_text
from pianoadapt.models.score import emit_fingering, emit_roll

SMALL_CONFIG = """
[ppo]
total_steps = 16
num_envs = 2
num_steps = 8
num_minibatches = 2
update_epochs = 1
hidden_dims = [16]
eval_every = 1

[td3]
episodes = 1
eval_every = 1
eval_rollouts = 1
batch_size = 8
hidden_dims = [16]
initial_exploration = 0
update_every = 5
utd_ratio = 2

[refine]
iterations = 1

[eval]
rollouts = 2
"""


@pytest.fixture
def run(artifact_dir, tmp_path):
    """Invoke the CLI against the fresh artifact directory with the small training config."""
    config = tmp_path / "small.toml"
    config.write_text(SMALL_CONFIG)

    def invoke(*argv):
        return main(["--config", str(config), "--artifact-dir", str(artifact_dir), *argv])

    return invoke


@pytest.fixture
def scripted_song(run):
    assert run("parse", "three_keys") == 0
    assert run("train-sim", "three_keys", "--scripted") == 0
    return "three_keys"


def test_parse_bundled_song(run, artifact_dir, capsys):
    assert run("parse", "three_keys") == 0
    assert "three_keys: 'Three Keys'" in capsys.readouterr().out
    assert (artifact_dir / "three_keys" / "roll.mid").exists()
    header = read_header((artifact_dir / "three_keys" / "fingering.txt").read_text())
    assert header["command"] == "parse"
    assert header["split_key"] == "44"
    assert len(header["config_hash"]) == 64


def test_parse_midi_file(run, artifact_dir, tmp_path, twinkle):
    midi = tmp_path / "song.mid"
    fingering = tmp_path / "song.fingering.txt"
    midi.write_bytes(emit_roll(twinkle))
    fingering.write_text(emit_fingering(twinkle))
    assert run("parse", "custom", "--midi", str(midi), "--fingering", str(fingering)) == 0
    assert (artifact_dir / "custom" / "fingering.txt").exists()


def test_midi_without_fingering_is_a_usage_error(run, tmp_path, twinkle):
    midi = tmp_path / "song.mid"
    midi.write_bytes(emit_roll(twinkle))
    assert run("parse", "custom", "--midi", str(midi)) == 1


def test_corrupt_midi_is_a_validation_failure(run, tmp_path, twinkle, capsys):
    midi = tmp_path / "broken.mid"
    fingering = tmp_path / "broken.fingering.txt"
    midi.write_bytes(b"RIFF" + emit_roll(twinkle)[4:])
    fingering.write_text(emit_fingering(twinkle))
    assert run("parse", "broken", "--midi", str(midi), "--fingering", str(fingering)) == 2
    assert "offset 0" in capsys.readouterr().err


def test_unknown_song(run):
    assert run("parse", "no_such_song") == 1


def test_usage_errors(run):
    assert run() == 1
    assert run("parse") == 1
    assert run("rollout", "three_keys", "--mode", "sideways") == 1


def test_missing_artifact_names_the_producing_command(run, capsys):
    assert run("train-sim", "three_keys", "--scripted") == 1
    assert "run `python -m pianoadapt parse three_keys` first" in capsys.readouterr().err


def test_invalid_config(artifact_dir, tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[td3]\nbogus = 1\n")
    assert main(["--config", str(bad), "--artifact-dir", str(artifact_dir), "parse", "three_keys"]) == 2


def test_scripted_sim_trajectory(scripted_song, artifact_dir):
    text = (artifact_dir / scripted_song / "tau_sim.traj").read_text()
    header = read_header(text)
    assert header["nominal_f1"] == "1.000000"
    assert header["command"] == "train-sim"
    assert trajectory_from_text(text).num_steps == 75


def test_open_loop_rollout_log(run, scripted_song, artifact_dir, capsys):
    assert run("rollout", scripted_song, "--gap", "identity") == 0
    assert "open-loop on identity: F1 100.0" in capsys.readouterr().out
    log = (artifact_dir / scripted_song / "identity" / "rollout_open-loop.log").read_text()
    rows = [line for line in log.splitlines() if not line.startswith("#")]
    assert len(rows) == 75
    assert read_header(log)["trajectory"] == "tau_sim"


def test_unknown_gap(run, scripted_song, capsys):
    assert run("rollout", scripted_song, "--gap", "wobbly") == 1
    assert "unknown gap preset 'wobbly'" in capsys.readouterr().err


def test_closed_loop_needs_a_trained_policy(run, scripted_song):
    assert run("rollout", scripted_song, "--mode", "closed-loop", "--gap", "identity") == 1


def test_zero_refinement_iterations_keep_tau_sim(run, scripted_song, artifact_dir):
    assert run("refine", scripted_song, "--gap", "bias-only", "--iterations", "0") == 0
    song = artifact_dir / scripted_song
    tau_sim = trajectory_from_text((song / "tau_sim.traj").read_text())
    refined = trajectory_from_text((song / "bias-only" / "tau_refined.traj").read_text())
    np.testing.assert_array_equal(refined.right.q, tau_sim.right.q)
    np.testing.assert_array_equal(refined.left.wrist, tau_sim.left.wrist)
    history = (song / "bias-only" / "refine_history.tsv").read_text()
    assert len([line for line in history.splitlines() if not line.startswith("#")]) == 2
    assert (song / "bias-only" / "refine_iterates" / "iter_00.traj").exists()


def test_refine_then_eval(run, scripted_song, artifact_dir, capsys):
    assert run("refine", scripted_song, "--gap", "paper-like") == 0
    assert run("eval", scripted_song, "--gap", "paper-like", "--source", "tau_refined") == 0
    assert "tau_refined on paper-like: F1" in capsys.readouterr().out
    directory = artifact_dir / scripted_song / "paper-like"
    assert (directory / "report_tau_refined.svg").exists()
    table = (directory / "report_tau_refined.tsv").read_text()
    assert read_header(table)["source"] == "tau_refined"
    assert len(list((directory / "refine_iterates").glob("iter_*.traj"))) == 2


def test_eval_before_refine(run, scripted_song):
    assert run("eval", scripted_song, "--gap", "identity", "--source", "tau_refined") == 1


def test_trained_policy_hybrid_matches_closed_loop_without_a_gap(run, artifact_dir, capsys):
    assert run("parse", "three_keys") == 0
    assert run("train-sim", "three_keys") == 0
    song = artifact_dir / "three_keys"
    assert (song / "policy_sim_right.pt").exists()
    assert (song / "sim_curve_right.tsv").exists()
    assert not (song / "policy_sim_left.pt").exists()
    capsys.readouterr()
    assert run("rollout", "three_keys", "--mode", "closed-loop", "--gap", "identity") == 0
    closed = capsys.readouterr().out.split(": ", 1)[1]
    assert run("rollout", "three_keys", "--mode", "hybrid", "--gap", "identity") == 0
    hybrid = capsys.readouterr().out.split(": ", 1)[1]
    assert closed == hybrid


def test_residual_training_and_evaluation(run, scripted_song, artifact_dir, capsys):
    assert run("train-residual", scripted_song, "--gap", "identity", "--base", "tau_sim") == 0
    out = capsys.readouterr().out
    assert "episode 0: F1 100.0" in out
    directory = artifact_dir / scripted_song / "identity"
    assert (directory / "agent_tau_sim_right.pt").exists()
    assert (directory / "residual_curve_tau_sim.tsv").exists()
    assert run("eval", scripted_song, "--gap", "identity", "--source", "residual-tau_sim") == 0


def test_residual_from_scratch(run, scripted_song, artifact_dir):
    assert run("train-residual", scripted_song, "--gap", "identity", "--base", "scratch", "--concurrency", "threaded") == 0
    assert (artifact_dir / scripted_song / "identity" / "agent_scratch_right.pt").exists()


def test_matrix_without_a_sim_policy(run, scripted_song, artifact_dir, capsys):
    assert run("matrix", scripted_song, "--gap", "identity") == 0
    out = capsys.readouterr().out.splitlines()
    rows = [line.split("\t") for line in out[1:]]
    assert [row[0] for row in rows] == [
        "sim closed-loop",
        "RL from scratch",
        "sim open-loop",
        "sim + residual RL",
        "refinement only",
        "refinement + residual RL",
    ]
    assert rows[0][1] == "n/a"
    assert rows[2][1] == "100.00"
    assert (artifact_dir / scripted_song / "identity" / "matrix.tsv").exists()


def test_ablation_rows(run, scripted_song, artifact_dir, capsys):
    assert run("refine", scripted_song, "--gap", "identity") == 0
    capsys.readouterr()
    assert run("ablate", scripted_song, "--gap", "identity") == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 6
    assert lines[0].split(":")[1] == lines[3].split(":")[1]
    table = (artifact_dir / scripted_song / "identity" / "ablation.tsv").read_text()
    assert "guided_prob\t0" in table
