import dataclasses
import json

import numpy as np
import pytest

from pvtgnn.data import (
    CHECKPOINT_VERSION,
    GeneratorConfig,
    MonitoringRecord,
    generate_synthetic,
    inject_anomalies,
    load_checkpoint,
    make_windows,
    parse_csv,
    read_labels,
    records_to_array,
    save_checkpoint,
    write_csv,
    write_labels,
)
from pvtgnn.errors import (
    BadConfig,
    BadFraction,
    BadHeader,
    BadRow,
    CorruptCheckpoint,
    NonMonotonicTimestamps,
    ShapeMismatch,
    TooShort,
    VersionMismatch,
)
from pvtgnn.graph import build_parameter_graph
from pvtgnn.model import ModelDims, init_params, predict_windows
from pvtgnn.training import TrainConfig, fit_scaler

HEADER = "timestamp,gsw_wm2,glw_wm2,tair_c,tpv_c,pout_w\n"


@pytest.fixture(scope="module")
def two_days():
    return generate_synthetic(GeneratorConfig(days=2, seed=5))


def test_parse_well_formed(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text(HEADER + "0,0,300,10,9,0\n60,10.5,301,10.1,9.2,3.25\n120,20,302,10.2,9.5,6.5\n")
    recs = parse_csv(p)
    assert len(recs) == 3
    assert recs[1] == MonitoringRecord(60, 10.5, 301.0, 10.1, 9.2, 3.25)


def test_parse_errors(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text(HEADER + "120,0,300,10,9,0\n60,0,300,10,9,0\n")
    with pytest.raises(NonMonotonicTimestamps):
        parse_csv(p)
    p.write_text(HEADER.strip() + ",extra\n0,0,300,10,9,0,1\n")
    with pytest.raises(BadHeader):
        parse_csv(p)
    p.write_text(HEADER + "0,0,300,10,9,0\n60,abc,300,10,9,0\n")
    with pytest.raises(BadRow) as info:
        parse_csv(p)
    assert info.value.line_no == 3
    p.write_text(HEADER + "0,0,300,10,9\n")
    with pytest.raises(BadRow):
        parse_csv(p)
    p.write_text(HEADER + "0,-1,300,10,9,0\n")
    with pytest.raises(BadRow):
        parse_csv(p)


def test_csv_round_trip_exact(tmp_path, two_days):
    p = tmp_path / "d.csv"
    write_csv(two_days, p)
    assert parse_csv(p) == two_days


def test_labels_round_trip(tmp_path, two_days):
    recs, labels = inject_anomalies(two_days, 0.1, seed=3)
    p = tmp_path / "l.csv"
    write_labels(recs, labels, p)
    got = read_labels(p)
    assert [got[r.timestamp] for r in recs] == labels


def _ramp(n):
    return [MonitoringRecord(60 * k, float(k), 300.0 + k, 10.0 + k, 11.0 + k, float(k)) for k in range(n)]


def test_make_windows_counts_and_targets():
    recs = _ramp(5)
    scaler = fit_scaler(records_to_array(recs))
    w = make_windows(recs, scaler, 3)
    assert len(w) == 3
    assert w[0].steps.shape == (3, 4, 1)
    assert [x.target for x in w] == [0.5, 0.75, 1.0]
    assert [x.timestamp for x in w] == [120, 180, 240]
    w1 = make_windows(recs, scaler, 3, horizon=1)
    assert len(w1) == 2
    assert [x.target for x in w1] == [0.75, 1.0]
    np.testing.assert_array_equal(w1[0].steps, w[0].steps)
    with pytest.raises(TooShort):
        make_windows(recs, scaler, 6)
    with pytest.raises(TooShort):
        make_windows(recs, scaler, 5, horizon=1)


def test_generator_count_and_night(two_days):
    assert len(two_days) == 2 * 86400 // 60
    night = [r for r in two_days if (r.timestamp % 86400) < 6 * 3600]
    assert night and all(r.g_sw == 0.0 and r.p_out == 0.0 for r in night)
    ts = [r.timestamp for r in two_days]
    assert all(b - a == 60 for a, b in zip(ts, ts[1:]))


def test_generator_deterministic(tmp_path):
    cfg = GeneratorConfig(days=1, seed=9)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(generate_synthetic(cfg), a)
    write_csv(generate_synthetic(cfg), b)
    assert a.read_bytes() == b.read_bytes()
    write_csv(generate_synthetic(dataclasses.replace(cfg, seed=10)), b)
    assert a.read_bytes() != b.read_bytes()


def test_generator_physics(two_days):
    arr = records_to_array(two_days)
    day = arr[arr[:, 0] > 50]
    assert np.corrcoef(day[:, 0], day[:, 4])[0, 1] > 0.95
    hot = arr[arr[:, 0] > 100]
    assert np.all(hot[:, 3] >= hot[:, 2] - 1.0)
    assert np.all(arr[:, 0] >= 0) and np.all(arr[:, 1] >= 0) and np.all(arr[:, 4] >= 0)


def test_generator_config_errors():
    for bad in (dict(days=0), dict(period_s=7), dict(anomaly_fraction=1.0), dict(drop_range=(0.5, 1.0))):
        with pytest.raises(BadConfig):
            generate_synthetic(GeneratorConfig(**bad))


def test_inject_fraction_zero(two_days):
    recs, labels = inject_anomalies(two_days, 0.0)
    assert recs == two_days and not any(labels)


def test_inject_only_labeled_power_changes(two_days):
    before = list(two_days)
    recs, labels = inject_anomalies(two_days, 0.05, seed=4)
    assert two_days == before  # input untouched
    for old, new, lab in zip(two_days, recs, labels):
        for f in ("timestamp", "g_sw", "g_lw", "t_air", "t_pv"):
            assert getattr(old, f) == getattr(new, f)
        if lab:
            assert new.p_out < old.p_out
            assert 0.3 * old.p_out <= new.p_out <= 0.7 * old.p_out
        else:
            assert new.p_out == old.p_out


def test_inject_floor_count():
    recs = [MonitoringRecord(k, 500.0, 350.0, 20.0, 35.0, 150.0) for k in range(1000)]
    recs += [MonitoringRecord(1000 + k, 0.0, 300.0, 10.0, 10.0, 0.0) for k in range(300)]
    _, labels = inject_anomalies(recs, 0.05, seed=1)
    assert sum(labels) == 50
    assert not any(labels[1000:])
    _, labels = inject_anomalies(recs, 0.0519, seed=1)
    assert sum(labels) == 51
    with pytest.raises(BadFraction):
        inject_anomalies(recs, 1.0)
    with pytest.raises(BadFraction):
        inject_anomalies(recs, 0.1, drop_range=(0.2, 1.2))


@pytest.fixture
def saved(tmp_path, two_days):
    spec = build_parameter_graph()
    params = init_params(3, ModelDims(4))
    scaler = fit_scaler(records_to_array(two_days))
    path = tmp_path / "m.ckpt"
    save_checkpoint(params, scaler, spec, TrainConfig(), path)
    return path, params, scaler, spec


def test_checkpoint_round_trip_bitwise(saved, two_days):
    path, params, scaler, spec = saved
    ck = load_checkpoint(path)
    for name, t in params.tensors.items():
        assert np.array_equal(ck.params.tensors[name], t)
    assert ck.scaler == scaler and ck.spec == spec and ck.config == TrainConfig()
    w = make_windows(two_days[:200], scaler, 12)
    assert np.array_equal(predict_windows(w, spec, params), predict_windows(w, ck.spec, ck.params))


def test_checkpoint_errors(saved):
    path = saved[0]
    doc = json.loads(path.read_text())
    doc["format_version"] = CHECKPOINT_VERSION + 1
    bumped = path.with_name("v2.ckpt")
    bumped.write_text(json.dumps(doc))
    with pytest.raises(VersionMismatch):
        load_checkpoint(bumped)

    text = path.read_text()
    truncated = path.with_name("cut.ckpt")
    truncated.write_text(text[: len(text) // 2])
    with pytest.raises(CorruptCheckpoint):
        load_checkpoint(truncated)

    doc = json.loads(text)
    doc["weights"]["W_r"]["data"].pop()
    bad = path.with_name("shape.ckpt")
    bad.write_text(json.dumps(doc))
    with pytest.raises(ShapeMismatch):
        load_checkpoint(bad)

    doc = json.loads(text)
    del doc["weights"]["fc_b"]
    bad.write_text(json.dumps(doc))
    with pytest.raises(CorruptCheckpoint):
        load_checkpoint(bad)


def test_checkpoint_matches_schema(saved):
    jsonschema = pytest.importorskip("jsonschema")
    from importlib.resources import files

    schema = json.loads(files("pvtgnn").joinpath("schemas/checkpoint.schema.json").read_text())
    jsonschema.validate(json.loads(saved[0].read_text()), schema)
