import json
import os

import pytest

from targetopt.cli import atomic_write, main
from targetopt.config import StudyConfig
from targetopt.errors import ConfigError


def write_config(tmp_path, **kw):
    data = {"schema_version": 1, "methods": ["approach3"], "models": [1], "sigmas": [0.0],
            "replicates": [1], "r": 2, "n_paths": 2}
    data.update(kw)
    path = tmp_path / "study.json"
    path.write_text(json.dumps(data))
    return path


def test_config_roundtrip_is_fixed_point():
    cfg = StudyConfig(methods=["approach5", "nsga2"], models=[12, 123], sigmas=[0.0, 0.2],
                      replicates=[1, 5], nsga2={"population_size": 10})
    again = StudyConfig.loads(cfg.dumps())
    assert again == cfg and again.dumps() == cfg.dumps()
    assert again.nsga2_config().population_size == 10


@pytest.mark.parametrize("patch,field", [({"models": [7]}, "models"), ({"methods": ["sms"]}, "methods"),
                                         ({"sigmas": [-1]}, "sigmas"), ({"n_paths": 0}, "n_paths"),
                                         ({"schema_version": 2}, "schema_version"),
                                         ({"bogus": 1}, "bogus"), ({"nsga2": {"population_size": 3}}, "nsga2")])
def test_config_errors_name_the_field(patch, field):
    data = {"schema_version": 1, **patch}
    with pytest.raises(ConfigError) as info:
        StudyConfig.from_dict(data)
    assert info.value.field == field and str(info.value).startswith(field)


def test_bench_minimal(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["bench", "--config", str(cfg), "--out", str(out)]) == 0
    rows = (out / "results.csv").read_text().splitlines()
    assert len(rows) == 1 + 2 * 6
    for name in ("quantiles.csv", "bias.csv", "timing.csv", "failures.csv", "config.json"):
        assert (out / name).exists()
    assert not [p for p in os.listdir(out) if p.endswith(".tmp")]


def test_bench_deterministic_across_threads(tmp_path):
    cfg = write_config(tmp_path, methods=["approach4", "random"], models=[3], n_paths=3, r=4)
    assert main(["bench", "--config", str(cfg), "--out", str(tmp_path / "a"), "--threads", "1"]) == 0
    assert main(["bench", "--config", str(cfg), "--out", str(tmp_path / "b"), "--threads", "2"]) == 0
    assert (tmp_path / "a/results.csv").read_bytes() == (tmp_path / "b/results.csv").read_bytes()


def test_bench_env_default_output(tmp_path, monkeypatch):
    cfg = write_config(tmp_path)
    monkeypatch.setenv("TARGETOPT_OUT", str(tmp_path / "env"))
    assert main(["bench", "--config", str(cfg), "--paths", "1"]) == 0
    assert len((tmp_path / "env/results.csv").read_text().splitlines()) == 7


def test_bench_config_error_exit(tmp_path, capsys):
    cfg = write_config(tmp_path, models=[9])
    assert main(["bench", "--config", str(cfg)]) == 2
    assert "models" in capsys.readouterr().err
    (tmp_path / "broken.json").write_text("{\n  \"r\": ,\n}")
    assert main(["bench", "--config", str(tmp_path / "broken.json")]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["bench", "--config", str(tmp_path / "missing.json")]) == 2


def test_plot(tmp_path):
    cfg = write_config(tmp_path, methods=["approach3", "random"], models=[1, 2])
    out = tmp_path / "o"
    main(["bench", "--config", str(cfg), "--out", str(out)])
    assert main(["plot", "--out", str(out)]) == 0
    svgs = sorted(p.name for p in out.glob("*.svg"))
    assert svgs == ["model1_sigma0_l1.svg", "model2_sigma0_l1.svg"]
    text = (out / svgs[0]).read_text()
    assert text.count("<polyline") == 2 and ">approach3<" in text and ">random<" in text


def test_plot_empty_results(tmp_path, capsys):
    (tmp_path / "results.csv").write_text(
        "method,model,sigma,replicates,path,eval_index,observed_min,actual_min,incumbent_actual\n")
    assert main(["plot", "--results", str(tmp_path / "results.csv")]) == 3
    assert not list(tmp_path.glob("*.svg"))
    (tmp_path / "bad.csv").write_text("a,b\n")
    assert main(["plot", "--results", str(tmp_path / "bad.csv")]) == 3


def test_session_commands(tmp_path, capsys):
    out = tmp_path / "s"
    assert main(["init-design", "--out", str(out), "--target=-0.4", "--lower=-5,-5", "--upper=5,5"]) == 0
    sugg = (out / "suggestions.csv").read_text().splitlines()
    assert len(sugg) == 5
    meas = ["p1,p2,d1,point_id,replicate"]
    for line in sugg[1:]:
        p1, p2, pid, rep = line.split(",")
        meas.append(f"{p1},{p2},{0.8 * float(p1) - 1.2 * float(p2)!r},{pid},{rep}")
    (tmp_path / "m.csv").write_text("\n".join(meas) + "\n")
    state = str(out / "state.json")
    assert main(["observe", "--state", state, "--measurements", str(tmp_path / "m.csv")]) == 0
    assert "stored 4" in capsys.readouterr().out
    assert main(["suggest", "--state", state, "--measurements", str(tmp_path / "m.csv")]) == 0
    first = (out / "suggestions.csv").read_bytes()
    assert main(["suggest", "--state", state, "--measurements", str(tmp_path / "m.csv")]) == 0
    assert (out / "suggestions.csv").read_bytes() == first
    assert json.loads((out / "state.json").read_text())["iteration"] == 1


def test_session_errors(tmp_path, capsys):
    (tmp_path / "state.json").write_text("not json")
    assert main(["suggest", "--state", str(tmp_path / "state.json")]) == 3
    assert "StateCorrupt" in capsys.readouterr().err
    assert main(["init-design", "--out", str(tmp_path), "--target=x", "--lower=0", "--upper=1"]) == 2
    assert main(["init-design", "--out", str(tmp_path), "--target=0", "--lower=1", "--upper=0"]) == 2


def test_atomic_write_replaces(tmp_path):
    p = atomic_write(tmp_path / "x" / "f.txt", "one")
    atomic_write(p, "two")
    assert p.read_text() == "two" and os.listdir(p.parent) == ["f.txt"]


def test_module_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "targetopt", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "bench" in res.stdout
