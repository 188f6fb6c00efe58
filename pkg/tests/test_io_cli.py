import numpy as np
import pytest

from hsrecover import io
from hsrecover.cli import main
from hsrecover.experiments import CampaignConfig, ValidationError, run_campaign
from hsrecover.hypersurface import fit


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def small_config_text(**extra):
    lines = ["experiment: t1_relax", "repetitions: 30", "t1_range: [5, 15]",
             "recovery_orders: [0, 1, 2]", "seed: 5", "times: [0, 5, 10, 20, 40]"]
    lines += [f"{k}: {v}" for k, v in extra.items()]
    return "\n".join(lines) + "\n"


def test_parse_minimal_t1_config(tmp_path):
    p = write(tmp_path, "t1.cfg", "{experiment: t1_relax, repetitions: 450, t1_range: [5, 15], "
                                  "recovery_orders: [1, 10], seed: 1}")
    cfg = io.parse_config(p)
    assert cfg.repetitions == 450 and cfg.recovery_orders == (1, 10)
    assert len(cfg.times) == 81


def test_parse_camel_case_keys(tmp_path):
    p = write(tmp_path, "t1.cfg", "{experiment: T1Relax, repetitions: 450, t1Range: [5, 15], "
                                  "recoveryOrders: [1, 10], seed: 1}")
    cfg = io.parse_config(p)
    assert cfg.t1_range == (5.0, 15.0) and cfg.experiment.value == "t1_relax"


def test_parse_json(tmp_path):
    p = write(tmp_path, "c.json", '{"experiment": "t1_relax", "repetitions": 20, '
                                  '"t1_range": [5, 15], "recovery_orders": [1], "seed": 2}')
    assert io.parse_config(p).seed == 2


def test_parse_errors(tmp_path):
    with pytest.raises(io.ParseError):
        io.parse_config(write(tmp_path, "empty.cfg", ""))
    with pytest.raises(io.ParseError) as err:
        io.parse_config(write(tmp_path, "bad.cfg", "experiment: t1_relax\nrepetitions: [1, 2\n"))
    assert err.value.line is not None
    with pytest.raises(ValidationError) as verr:
        io.parse_config(write(tmp_path, "under.cfg", "{experiment: t1_relax, repetitions: 3, "
                                                     "t1_range: [5, 15], recovery_orders: [10], seed: 1}"))
    assert verr.value.field == "repetitions"
    with pytest.raises(ValidationError) as verr:
        io.parse_config(write(tmp_path, "unk.cfg", small_config_text(colour="red")))
    assert verr.value.field == "colour"


def test_config_hash(tmp_path):
    a = io.parse_config(write(tmp_path, "a.cfg", small_config_text()))
    b = io.parse_config(write(tmp_path, "b.cfg", "\n\n" + small_config_text().replace(": ", ":   ").replace("\n", "  \n\n")))
    c = io.parse_config(write(tmp_path, "c.cfg", small_config_text().replace("seed: 5", "seed: 6")))
    # an explicit default is the same semantic content
    d = io.parse_config(write(tmp_path, "d.cfg", small_config_text(rate_sampling="uniform_rate")))
    assert io.config_hash(a) == io.config_hash(b) == io.config_hash(d)
    assert io.config_hash(a) != io.config_hash(c)
    assert len(io.config_hash(a)) == 64


@pytest.fixture(scope="module")
def small_result():
    cfg = CampaignConfig("t1_relax", 30, (1, 4), 5, t1_range=(5, 15), times=(0, 5, 10, 20, 40))
    return run_campaign(cfg)


def test_curves_header_and_round_trip(small_result, tmp_path):
    path = tmp_path / "curves.csv"
    io.write_curves_csv(small_result, path)
    raw = path.read_bytes()
    assert raw.splitlines()[0] == b"time_us,best,worst,average,order_1,order_4"
    assert b"\r" not in raw
    data = io.read_curves_csv(path)
    np.testing.assert_allclose(data["average"], small_result.average, rtol=1e-11, atol=1e-10)
    np.testing.assert_allclose(data["order_4"], small_result.recovered[4], rtol=1e-11, atol=1e-10)
    io.write_curves_csv(small_result, tmp_path / "again.csv")
    assert (tmp_path / "again.csv").read_bytes() == raw


def test_zero_width_curves(tmp_path):
    cfg = CampaignConfig("t1_relax", 10, (0,), 5, t1_range=(8, 8), times=(0, 5, 10))
    io.write_curves_csv(run_campaign(cfg), tmp_path / "c.csv")
    for row in (tmp_path / "c.csv").read_text().splitlines()[1:]:
        _, best, worst, avg, o0 = row.split(",")
        assert best == worst == avg == o0


def test_models_csv(tmp_path):
    model = fit(np.array([0.1, 0.2, 0.3]), np.array([0.8, 0.6, 0.4]), 1)
    np.testing.assert_allclose(model.unscaled_coefficients(), [1, -2], atol=1e-12)
    io.write_models_csv({10.0: [model]}, tmp_path / "m.csv")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "time_us,order,exponents,coefficient"
    assert [l.split(",")[2] for l in lines[1:]] == ["0", "1"]
    rates = np.random.default_rng(0).uniform(0.1, 0.2, (20, 2))
    m2 = fit(rates, rates.sum(1), 2)
    io.write_models_csv({1.0: [m2], 0.5: [model]}, tmp_path / "m2.csv")
    rows = [l.split(",") for l in (tmp_path / "m2.csv").read_text().splitlines()[1:]]
    assert [r[0] for r in rows] == ["0.5"] * 2 + ["1"] * 6
    assert rows[2][2] == "0|0" and [r[2] for r in rows[2:]] == ["0|0", "1|0", "0|1", "2|0", "1|1", "0|2"]


def test_samples_round_trip_is_exact(small_result, tmp_path):
    io.write_samples_csv(small_result, tmp_path / "s.csv")
    rates, times, curves = io.read_samples_csv(tmp_path / "s.csv")
    assert np.array_equal(rates, small_result.rates)
    assert np.array_equal(times, small_result.times)
    assert np.array_equal(curves, small_result.curves)


def test_cli_run_recover_report(tmp_path, capsys):
    cfg = write(tmp_path, "t1.cfg", small_config_text())
    out = tmp_path / "results"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    for name in ("curves.csv", "models.csv", "samples.csv", "manifest.txt"):
        assert (out / name).exists()
    manifest = (out / "manifest.txt").read_text()
    assert "seed: 5" in manifest and "config_hash: " in manifest
    rec = tmp_path / "rec"
    assert main(["recover", "--samples", str(out / "samples.csv"), "--orders", "0,1,2",
                 "--out", str(rec)]) == 0
    assert (rec / "curves.csv").read_bytes() == (out / "curves.csv").read_bytes()
    assert main(["recover", "--samples", str(out / "samples.csv"), "--orders", "3",
                 "--out", str(tmp_path / "rec3")]) == 0
    header = (tmp_path / "rec3" / "curves.csv").read_text().splitlines()[0]
    assert header == "time_us,best,worst,average,order_3"
    capsys.readouterr()
    assert main(["report", "--curves", str(out / "curves.csv")]) == 0
    text = capsys.readouterr().out
    assert "order_2" in text and "visibility" in text


def test_cli_seed_override(tmp_path):
    cfg = write(tmp_path, "t1.cfg", small_config_text())
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "99"]) == 0
    assert "seed: 99" in (tmp_path / "a" / "manifest.txt").read_text()


def test_cli_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 2
    assert "usage" in capsys.readouterr().err
    bad = write(tmp_path, "bad.cfg", "")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "x")]) == 1
    assert "config failed" in capsys.readouterr().err
    assert main(["recover", "--samples", str(tmp_path / "missing.csv"), "--orders", "1",
                 "--out", str(tmp_path / "y")]) == 1
    assert "samples failed" in capsys.readouterr().err
