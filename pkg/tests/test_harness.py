import math
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hardrods import acceptance, cli
from hardrods.config import ConfigError, ExperimentConfig
from hardrods.experiments import run_experiment, snapshot_times
from hardrods.particles import Model, ReinsertRule
from hardrods.sde_kernel import StepScheme
from hardrods.statcheck import StatReport
from hardrods.storage import read_checkpoint


def small_influx(**kw):
    base = dict(model="influx", drift=0.5, sigma2=1.0, epsilon=0.02, h=4e-3, t_end=4.0, burn_in=2.0,
                snapshot_interval=0.5, bins=5, bin_lo=0.0, bin_hi=1.0, windows=((0.2, 0.4),), replicas=1,
                base_seed=17)
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    def test_round_trip_default(self):
        c = ExperimentConfig()
        assert ExperimentConfig.parse(c.serialize()) == c

    @settings(max_examples=100, deadline=None)
    @given(model=st.sampled_from(list(Model)), drift=st.floats(0.01, 50), sigma2=st.floats(0, 10),
           eps=st.floats(1e-4, 0.1), n=st.one_of(st.none(), st.integers(1, 2000)),
           scheme=st.sampled_from(list(StepScheme)), rule=st.sampled_from(list(ReinsertRule)),
           h=st.floats(1e-6, 1e-2), seed=st.integers(0, 2**63), windows=st.lists(
               st.tuples(st.floats(-1, 0), st.floats(0.5, 2)), max_size=3))
    def test_round_trip(self, model, drift, sigma2, eps, n, scheme, rule, h, seed, windows):
        c = ExperimentConfig(model=model, drift=drift, sigma2=sigma2, epsilon=eps, n=n, scheme=scheme,
                             reinsert=rule, h=h, base_seed=seed, windows=tuple(windows))
        assert ExperimentConfig.parse(c.serialize()) == c

    def test_comments_and_aliases(self):
        c = ExperimentConfig.parse("model = C  # influx\nscheme=grid\n\nt-end = 3.5\n")
        assert c.model is Model.INFLUX_KILLED and c.scheme is StepScheme.GRID_SKOROHOD and c.t_end == 3.5

    @pytest.mark.parametrize("text", ["bogus = 1", "h 0.1", "replicas = many", "model = q"])
    def test_parse_errors(self, text):
        with pytest.raises(ConfigError):
            ExperimentConfig.parse(text)

    def test_divisibility_rejected(self):
        # eps/(a h) = 7.5
        with pytest.raises(ConfigError, match="divide"):
            small_influx(epsilon=0.015, h=4e-3).validate()

    @pytest.mark.parametrize("kw", [dict(h=0.0), dict(replicas=0), dict(t_end=1.0, burn_in=2.0),
                                    dict(model="jump", n=60, epsilon=0.02),
                                    dict(model="barrier", n=None), dict(engine="direct")])
    def test_infeasible(self, kw):
        with pytest.raises(ConfigError):
            small_influx(**kw).validate()

    def test_snapshot_schedule(self):
        assert len(snapshot_times(small_influx())) == 5
        assert snapshot_times(small_influx(snapshot_interval=0.0, burn_in=0.0)) == [1000]


class TestRunExperiment:
    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = small_influx()
        run_experiment(cfg, out=tmp_path / "a")
        run_experiment(cfg, out=tmp_path / "b")
        for name in ("profile.csv", "summary.json", "snapshots.csv", "config.txt", "checkpoints/replica_0000.bin"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        meta = json.loads((tmp_path / "a" / "metadata.json").read_text())
        assert "timestamp" in meta and meta["config"]["base_seed"] == 17

    def test_serial_equals_concurrent(self, tmp_path):
        serial = run_experiment(small_influx(replicas=4), out=tmp_path / "s")
        threaded = run_experiment(small_influx(replicas=4, workers=3), out=tmp_path / "t")
        assert (tmp_path / "s" / "profile.csv").read_bytes() == (tmp_path / "t" / "profile.csv").read_bytes()
        assert serial.summary == {**threaded.summary, "config": serial.summary["config"]}

    def test_replica_streams_differ(self):
        res = run_experiment(small_influx(replicas=2), write=False)
        assert not np.array_equal(res.replicas[0].final.x, res.replicas[1].final.x)

    def test_checkpoint_resumes(self, tmp_path):
        run_experiment(small_influx(), out=tmp_path)
        state, stream = read_checkpoint(tmp_path / "checkpoints" / "replica_0000.bin")
        assert state.t == pytest.approx(4.0) and stream.stream_id == 0

    @pytest.mark.parametrize("model,kw", [
        ("barrier", dict(n=20, epsilon=0.01, drift=2.0, bin_lo=0.0, bin_hi=1.0, windows=((0.0, 0.1),))),
        ("jump", dict(n=20, epsilon=0.01, drift=1.0)),
        ("barrier", dict(n=20, epsilon=0.01, drift=2.0, engine="direct")),
    ])
    def test_other_models(self, model, kw):
        res = run_experiment(small_influx(model=model, **kw), write=False)
        assert res.summary["mean_alive"] == 20
        assert np.all((res.profile.values >= 0) & (res.profile.values <= 1))


class TestCli:
    def test_simulate_and_env_default(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv(cli.ENV_OUT, str(tmp_path / "env"))
        rc = cli.main(["simulate", "--model", "influx", "--epsilon", "0.02", "--h", "0.004",
                       "--t-end", "2", "--burn-in", "1", "--bins", "4"])
        assert rc == 0
        assert (tmp_path / "env" / "profile.csv").exists()
        assert "profile:" in capsys.readouterr().out

    def test_config_file_and_flag_precedence(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(small_influx(out=str(tmp_path / "file")).serialize())
        rc = cli.main(["simulate", "--config", str(path), "--seed", "5", "--out", str(tmp_path / "flag")])
        assert rc == 0
        echoed = ExperimentConfig.load(tmp_path / "flag" / "config.txt")
        assert echoed.base_seed == 5 and echoed.epsilon == 0.02

    def test_divisibility_exit_code(self, tmp_path, capsys):
        rc = cli.main(["simulate", "--model", "influx", "--epsilon", "0.015", "--h", "0.004", "--out", str(tmp_path)])
        assert rc == 2 and "divide" in capsys.readouterr().err

    def test_analytic_density_c(self, tmp_path, capsys):
        assert cli.main(["analytic", "density-c", "--points", "5", "--out", str(tmp_path)]) == 0
        captured = capsys.readouterr()
        assert "v0 = 0.693147" in captured.err
        rows = captured.out.splitlines()
        assert rows[0] == "x,value" and len(rows) == 6
        # hand values (1-x)/(1-x+1) at x = 0, 0.25
        assert [float(r.split(",")[1]) for r in rows[1:3]] == pytest.approx([0.5, 0.75 / 1.75])
        assert (tmp_path / "analytic_density-c.csv").read_text() == captured.out

    def test_analytic_green_and_inverse(self, capsys):
        assert cli.main(["analytic", "green", "--points", "3"]) == 0
        rows = capsys.readouterr().out.splitlines()
        assert rows[1] == "0.0,2.0" and rows[-1].endswith(",0.0")
        assert cli.main(["analytic", "invert-a", "--b", "1", "--lambda", "2", "--from", "0", "--to",
                         repr(2 - math.exp(-2.0)), "--points", "2"]) == 0
        last = capsys.readouterr().out.splitlines()[-1]
        assert float(last.split(",")[1]) == pytest.approx(1.0, abs=1e-8)

    def test_analytic_domain_error(self, capsys):
        assert cli.main(["analytic", "density-c", "--from", "-1"]) == 2
        assert "configuration error" in capsys.readouterr().err

    def test_tagged(self, tmp_path, capsys):
        rc = cli.main(["tagged", "--model", "influx", "--epsilon", "0.02", "--h", "0.004", "--t-end", "6",
                       "--burn-in", "2", "--lags", "0.004,0.008,0.016", "--sample-every", "1", "--window", "0.1:0.9", "--out", str(tmp_path)])
        assert rc == 0
        report = json.loads((tmp_path / "tagged.json").read_text())
        assert report["tracks"] > 0 and np.isfinite(report["slope"])

    def test_verify_exit_status(self, tmp_path, monkeypatch):
        fake = {k: (lambda cache=None, k=k: [StatReport(f"c{k}", 0.0, 1.0)]) for k in range(1, 10)}
        monkeypatch.setattr(acceptance, "CRITERIA", fake)
        assert cli.main(["verify", "--suite", "unit", "--out", str(tmp_path)]) == 0
        data = json.loads((tmp_path / "verify_unit.json").read_text())
        assert [r["name"] for r in data["reports"]] == ["c1", "c2", "c5"]
        fake[2] = lambda cache=None: [StatReport("c2", 2.0, 1.0)]
        assert cli.main(["verify", "--suite", "unit", "--out", str(tmp_path)]) == 1
        fake[7] = lambda cache=None: [StatReport("c7", 2.0, 1.0, gating=False)]
        assert cli.main(["verify", "--suite", "exploratory", "--out", str(tmp_path)]) == 0
