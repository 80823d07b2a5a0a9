import json
import logging
from importlib import resources

import yaml

from finecap.cli import main
from finecap.records import load_dataset


def _run(wd, *extra):
    return main(["run", "--mock", "--workdir", str(wd), *extra])


def test_run_then_rerun_skips(workdir, caplog):
    assert _run(workdir) == 0
    fig = load_dataset(workdir / "fig.jsonl", "fig")
    assert len(fig) == 20 and all(a.selected is not None for a in fig)
    first = (workdir / "fig.jsonl").read_bytes()
    caplog.clear()
    with caplog.at_level(logging.INFO, logger="finecap"):
        assert _run(workdir) == 0
    assert sum("manifest match" in r.getMessage() for r in caplog.records) == 8
    caplog.clear()
    with caplog.at_level(logging.INFO, logger="finecap"):
        assert _run(workdir, "--force") == 0
    assert not any("manifest match" in r.getMessage() for r in caplog.records)
    assert (workdir / "fig.jsonl").read_bytes() == first


def test_changed_input_reruns_downstream(workdir, caplog):
    assert _run(workdir) == 0
    lines = (workdir / "moments.jsonl").read_text().splitlines()
    (workdir / "moments.jsonl").write_text("\n".join(lines[:10]) + "\n")
    assert _run(workdir) == 0
    assert len(load_dataset(workdir / "fig.jsonl", "fig")) == 10


def test_single_stages_in_order(workdir):
    for stage in ("keyframes", "caption-statics", "caption-dynamics", "perturb", "embed",
                  "train-evaluator", "score", "select"):
        assert main([stage, "--mock", "--workdir", str(workdir)]) == 0, stage
    header = (workdir / "loss_trace.csv").read_text().splitlines()[0]
    assert header == "epoch,l_c,l_m,l"


def test_missing_inputs_exit_2(tmp_path):
    assert _run(tmp_path) == 2
    assert main(["score", "--mock", "--workdir", str(tmp_path)]) == 2


def _rules_config(workdir, output):
    bundled = resources.files("finecap.data").joinpath("mock_rules.yaml").read_text("utf-8")
    rules = [{"pattern": "Task: answer-and-describe\nCoarse caption: a dog", "output": output}]
    rules += yaml.safe_load(bundled)
    (workdir / "rules.yaml").write_text(yaml.safe_dump(rules))
    (workdir / "cfg.yaml").write_text(f"backends:\n  mock_rules: {workdir / 'rules.yaml'}\n")
    return str(workdir / "cfg.yaml")


def _dog_moments(workdir):
    fig = load_dataset(workdir / "fig.jsonl", "fig")
    assert len(fig) == 20
    dog = [a for a in fig if a.moment.q.startswith("a dog")]
    assert dog and all(not a.dynamics and a.selected[0] == "static" for a in dog)
    return dog


def test_failing_moment_gives_partial_exit(workdir):
    assert _run(workdir, "--config", _rules_config(workdir, "!error")) == 1
    _dog_moments(workdir)


def test_refusal_keeps_statics_only(workdir):
    assert _run(workdir, "--config", _rules_config(workdir, "!refuse")) == 0
    assert all("dynamics-failed" in a.flags for a in _dog_moments(workdir))


def test_config_command(tmp_path, capsys):
    assert main(["config"]) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["keyframe"]["L"] == 1 and cfg["evaluator"]["tau"] == 0.07
    (tmp_path / "c.yaml").write_text("dataset: activitynet\n")
    assert main(["config", "--config", str(tmp_path / "c.yaml"), "--seed", "7"]) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert (cfg["keyframe"]["L"], cfg["dynamics"]["frame_policy"], cfg["seed"]) == \
        (5, "uniform64", 7)


def test_bad_config_exit_2(tmp_path, caplog):
    bad = tmp_path / "c.yaml"
    bad.write_text("foo: 1\n")
    assert main(["config", "--config", str(bad)]) == 2
    assert "foo" in caplog.text
    bad.write_text("evaluator:\n  tau: 0\n")
    assert main(["config", "--config", str(bad)]) == 2
    assert "evaluator.tau" in caplog.text
    assert main(["config", "--config", str(tmp_path / "missing.yaml")]) == 2


def test_stats_and_metrics_commands(workdir, tmp_path, capsys):
    assert _run(workdir) == 0
    capsys.readouterr()
    assert main(["stats", "--input", str(workdir / "fig.jsonl"),
                 "--output", str(tmp_path / "s.json")]) == 0
    report = json.loads((tmp_path / "s.json").read_text())
    assert report["fine"]["num_captions"] == 20
    assert report["many_to_many_definition"] == "definition v1"
    pred = tmp_path / "p.jsonl"
    gt = tmp_path / "g.jsonl"
    pred.write_text('{"query_id":"a","ranked":[{"video_id":"v","t_s":0,"t_e":1,"score":1}]}\n')
    gt.write_text('{"query_id":"a","video_id":"v","t_s":0,"t_e":1}\n')
    assert main(["eval-metrics", "--predictions", str(pred), "--ground-truth", str(gt)]) == 0
    assert "100.00" in capsys.readouterr().out
    assert main(["eval-metrics", "--predictions", str(tmp_path / "nope"),
                 "--ground-truth", str(gt)]) == 2
