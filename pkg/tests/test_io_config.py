import json

import numpy as np
import pytest
import yaml

from gpmtd import config as cfgmod
from gpmtd import io
from gpmtd.errors import ConfigError, DataError
from gpmtd.model import build_design
from gpmtd.sampler import McmcConfig, record_fields, run_chain
from gpmtd.model import default_hyperparameters


class TestSeries:
    def test_round_trip_full_precision(self, tmp_path, rng):
        y = rng.normal(size=50) * 1e3
        io.write_series(tmp_path / "y.csv", y)
        assert np.array_equal(io.read_series(tmp_path / "y.csv"), y)

    def test_named_column_and_log(self, tmp_path):
        (tmp_path / "d.csv").write_text("t,count\n1,2.0\n2,8.0\n")
        assert np.allclose(io.read_series(tmp_path / "d.csv", "count", log=True), np.log([2.0, 8.0]))

    def test_no_header(self, tmp_path):
        (tmp_path / "d.txt").write_text("1.5\n2.5\n")
        assert np.array_equal(io.read_series(tmp_path / "d.txt", header=False), [1.5, 2.5])

    def test_errors(self, tmp_path):
        (tmp_path / "bad.csv").write_text("y\n1\nabc\n")
        with pytest.raises(DataError):
            io.read_series(tmp_path / "bad.csv")
        (tmp_path / "neg.csv").write_text("y\n1\n-2\n")
        with pytest.raises(DataError):
            io.read_series(tmp_path / "neg.csv", log=True)
        with pytest.raises(DataError):
            io.read_series(tmp_path / "missing.csv")


class TestRecords:
    def test_lossless_round_trip(self, tmp_path):
        y = np.sin(np.arange(25.0)) + 0.01 * np.arange(25)
        data = build_design(y, 2)
        st = run_chain(data, default_hyperparameters(data),
                       McmcConfig(n_adapt=2, n_burn=2, n_keep=4, thin=1, seed=9))
        io.write_records(tmp_path / "c.jsonl", st.records)
        io.write_f(tmp_path / "c_f.csv", st)
        back = io.load_store([tmp_path / "c.jsonl"], [tmp_path / "c_f.csv"])
        assert back.records == st.records
        assert all(np.array_equal(a, b) for a, b in zip(back.f, st.f))
        assert io.n_lags_from_records(back.records) == 2

    def test_missing_fields(self, tmp_path):
        (tmp_path / "c.jsonl").write_text(json.dumps({"chain": 0, "kappa_1": 1.0}) + "\n")
        with pytest.raises(DataError):
            io.load_store([tmp_path / "c.jsonl"])

    def test_empty(self, tmp_path):
        (tmp_path / "c.jsonl").write_text("")
        with pytest.raises(DataError):
            io.load_store([tmp_path / "c.jsonl"])


class TestConfig:
    def _write(self, tmp_path, doc):
        (tmp_path / "y.csv").write_text("y\n" + "\n".join(str(v) for v in np.sin(np.arange(30.0))) + "\n")
        p = tmp_path / "cfg.yaml"
        p.write_text(yaml.safe_dump(doc))
        return cfgmod.load_config(p)

    def test_defaults_materialized(self, tmp_path):
        raw = self._write(tmp_path, {"data": {"path": "y.csv"}, "model": {"lags": 3}})
        cfg = cfgmod.validate(raw)
        assert cfg["data"]["path"] == str((tmp_path / "y.csv").resolve())
        assert cfg["mcmc"]["n_chains"] == 3 and cfg["mcmc"]["n_burn"] == 5000
        assert cfg["output"]["grid"] == {"n_points": 201, "padding": 0.1}
        data = build_design(io.read_series(cfg["data"]["path"]), 3)
        hyper = cfgmod.build_hyperparameters(cfg, data)
        full = cfgmod.materialize(cfg, hyper)
        pri = full["model"]["priors"]
        assert pri["kappa_dof_support"] == [5.0, 7.5, 10.0, 25.0, 50.0]
        assert pri["sbm"]["eta"] == 1000.0 and len(pri["level_var"]) == 4

    def test_overrides_broadcast(self, tmp_path):
        raw = self._write(tmp_path, {"data": {"path": "y.csv"},
                                     "model": {"lags": 2, "smoothness": "inf",
                                               "priors": {"sigma_dof": 7, "level_mean": [0, 1, 2],
                                                          "sbm": {"eta": 50, "gamma": 2}}}})
        cfg = cfgmod.validate(raw)
        data = build_design(io.read_series(cfg["data"]["path"]), 2)
        h = cfgmod.build_hyperparameters(cfg, data)
        assert np.all(h.sigma_dof == 7) and list(h.level_mean) == [0, 1, 2]
        assert h.sbm.eta == 50 and h.sbm.gamma == (2.0, 2.0) and h.smoothness == float("inf")

    @pytest.mark.parametrize("doc,where", [
        ({"data": {"path": "y.csv"}, "mcmc": {"thinning": 3}}, "mcmc"),
        ({"data": {"path": "y.csv"}, "model": {"priors": {"kappa": 1}}}, "model.priors"),
        ({"data": {"path": "y.csv"}, "extra": {}}, "<root>"),
        ({"data": {"path": "y.csv"}, "model": {"lags": 0}}, "model.lags"),
        ({"data": {"path": "y.csv"}, "model": {"smoothness": 1.5}}, "model.smoothness"),
        ({"data": {"path": "y.csv"}, "model": {"priors": {"level_var": [1, 2]}}}, "model.priors.level_var"),
        ({"model": {"lags": 2}}, "data.path"),
    ])
    def test_rejections_carry_key_path(self, tmp_path, doc, where):
        raw = self._write(tmp_path, doc)
        with pytest.raises(ConfigError) as err:
            cfg = cfgmod.validate(raw)
            data = build_design(io.read_series(cfg["data"]["path"]), cfg["model"]["lags"])
            cfgmod.build_hyperparameters(cfg, data)
        assert err.value.key_path == where

    def test_config_error_picklable(self):
        import pickle
        e = pickle.loads(pickle.dumps(ConfigError("bad", "mcmc.thin")))
        assert e.key_path == "mcmc.thin" and str(e) == "mcmc.thin: bad"

    def test_record_fields_layout(self):
        f = record_fields(2)
        assert f[:5] == ["chain", "iteration", "lambda_0", "lambda_1", "lambda_2"]
        assert f[-1] == "log_likelihood" and "n_2" in f and "psi_2" in f
