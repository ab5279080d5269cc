import pytest

from teleimp.protocol import FsrSample, GripperToggle, PoseSample, ScaleSet, TeleopToggle
from teleimp.scripts import OperatorScript, peg_in_hole_script, run_script
from teleimp.session import SessionConfig


def test_script_rejects_decreasing_timestamps():
    with pytest.raises(ValueError):
        OperatorScript([(1.0, GripperToggle()), (0.5, GripperToggle())])


def test_script_save_load_roundtrip(tmp_path):
    script = OperatorScript(
        [
            (0.0, ScaleSet(s=1.0)),
            (0.0, FsrSample(t=0.0, pt=0.3, pr=0.2)),
            (0.1, PoseSample(t=0.1, p=(0.0, 0.0, 0.2), q=(1.0, 0.0, 0.0, 0.0))),
            (0.2, TeleopToggle()),
            (0.3, GripperToggle()),
        ]
    )
    path = tmp_path / "script.jsonl"
    script.save(path)
    back = OperatorScript.load(path)
    assert back.entries == script.entries


def test_bundled_script_shape():
    script = peg_in_hole_script(SessionConfig())
    kinds = [type(m).__name__ for _, m in script.entries]
    assert kinds.count("TeleopToggle") == 1
    assert kinds.count("GripperToggle") == 1
    assert kinds.count("FsrSample") == 4  # reach, carry, align, insert regimes
    assert kinds.count("ScaleSet") == 1
    assert kinds.count("PoseSample") > 900  # 50 Hz stream
    times = [t for t, _ in script.entries]
    assert times == sorted(times)
    assert script.duration < 60.0


def test_empty_script_times_out(tmp_path):
    result = run_script(OperatorScript([]), SessionConfig(), tmp_path / "empty.jsonl", cap=0.5)
    assert result.status == "timeout"
    assert not result.success
    assert result.exit_code == 2
    assert result.episode_paths == []  # never engaged, nothing recorded


def test_failing_script_reports_failure(tmp_path):
    entries = [
        (0.0, PoseSample(t=0.0, p=(0.0, 0.0, 0.2), q=(1.0, 0.0, 0.0, 0.0))),
        (0.02, TeleopToggle()),
        (0.04, FsrSample(t=0.04, pt=0.2, pr=0.2)),
    ]
    result = run_script(OperatorScript(entries), SessionConfig(), tmp_path / "fail.jsonl", cap=30.0)
    assert result.status == "failure"
    assert result.exit_code == 1
    assert len(result.episode_paths) == 1


def test_cap_truncates_long_script(tmp_path):
    entries = [
        (0.0, PoseSample(t=0.0, p=(0.0, 0.0, 0.2), q=(1.0, 0.0, 0.0, 0.0))),
        (0.02, TeleopToggle()),
        (5.0, GripperToggle()),  # beyond the cap
    ]
    result = run_script(OperatorScript(entries), SessionConfig(), tmp_path / "capped.jsonl", cap=0.2)
    assert result.status == "timeout"
    assert result.sim_time == pytest.approx(0.2, abs=1e-9)
