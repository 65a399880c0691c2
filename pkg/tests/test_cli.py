"""CLI round trips on a small trace (few epochs, narrow model)."""

import io
import re

import numpy as np
import pytest

from aedetect import cli, csvio, modelstore, pipeline, report, stream
from aedetect import detector as det

FAST = ["--epochs", "3", "--hidden-mult", "2", "--seed", "5"]


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.main([str(a) for a in argv], out=out, err=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    code, out, _ = run("synth", "--out", root / "traces", "--nodes", 2, "--length", 800, "--dim", 10,
                       "--seed", 3)
    assert code == 0
    trace = root / "traces" / "node00.csv"
    code, out, _ = run("train", trace, "-o", root / "m.aed", *FAST)
    assert code == 0, out
    code, out, _ = run("calibrate", root / "m.aed", trace, "-o", root / "cal.aed",
                       "--report", root / "cal_report.csv", "--errors-out", root / "cal_errors.txt")
    assert code == 0, out
    return root


def test_synth_default_node_files(tmp_path):
    code, out, _ = run("synth", "--out", tmp_path, "--length", 300, "--dim", 8)
    assert code == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == [f"node0{i}.csv" for i in range(4)]


def test_synth_is_deterministic(tmp_path):
    for name in ("a", "b"):
        assert run("synth", "--out", tmp_path / name, "--length", 300, "--nodes", 2, "--seed", 9)[0] == 0
    for f in ("node00.csv", "node01.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_synth_full_width_headers(tmp_path):
    assert run("synth", "--out", tmp_path, "--dim", 166, "--nodes", 8, "--length", 200)[0] == 0
    files = sorted(tmp_path.iterdir())
    assert len(files) == 8
    assert all(f.read_text().splitlines()[0] == "#dim=166" for f in files)


def test_synth_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"nodes": 3, "length": 300, "dim": 9}')
    assert run("synth", "--out", tmp_path / "t", "--config", cfg)[0] == 0
    assert len(list((tmp_path / "t").iterdir())) == 3


def test_trace_csv_round_trip(workdir):
    path = workdir / "traces" / "node01.csv"
    tr = csvio.read_trace(path)
    again = workdir / "copy.csv"
    csvio.write_trace(tr, again)
    assert again.read_bytes() == path.read_bytes()
    assert csvio.read_trace(again).equals(tr)


def test_train_prints_every_epoch_and_is_reproducible(workdir):
    trace = workdir / "traces" / "node00.csv"
    code, out, _ = run("train", trace, "-o", workdir / "again.aed", *FAST)
    assert code == 0
    assert len(re.findall(r"^epoch \d+ loss", out, re.M)) == 3
    assert (workdir / "again.aed").read_bytes() == (workdir / "m.aed").read_bytes()
    model, profile = modelstore.load(workdir / "m.aed")
    assert profile is None and model.d == 10 and model.h == 20


def test_calibrate_report_and_theta(workdir):
    lines = (workdir / "cal_report.csv").read_text().splitlines()
    assert lines[0] == "node,n95_N,n95_A,n97_N,n97_A,n99_N,n99_A"
    assert len(lines) == 2
    errors = [float(x) for x in (workdir / "cal_errors.txt").read_text().split()]
    _, profile = modelstore.load(workdir / "cal.aed")
    assert profile.theta == det.percentile(errors, profile.percentile_n)
    assert profile.train_error_mean == pytest.approx(np.mean(errors), rel=1e-14)


def test_calibrate_missing_label_is_data_error(workdir, tmp_path):
    lines = (workdir / "traces" / "node00.csv").read_text().splitlines()
    fields = lines[5].split(",")
    fields[2] = ""
    lines[5] = ",".join(fields)
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(lines) + "\n")
    code, _, err = run("calibrate", workdir / "m.aed", bad, "-o", tmp_path / "x.aed")
    assert code == cli.EXIT_DATA and "missing label" in err


def stream_lines(trace_path, rows):
    tr = csvio.read_trace(trace_path)
    return [f"{tr.node_id},{int(tr.timestamps[i])}," + ",".join(repr(float(v)) for v in tr.samples[i])
            for i in rows]


def test_infer_empty_stream(workdir, tmp_path):
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    code, out, err = run("infer", workdir / "cal.aed", "--input", empty)
    assert code == 0 and out == "" and err == ""


def test_infer_requires_profile(workdir, tmp_path):
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    assert run("infer", workdir / "m.aed", "--input", empty)[0] == cli.EXIT_MODEL


def test_infer_malformed_and_dimension(workdir, tmp_path):
    good = stream_lines(workdir / "traces" / "node00.csv", [0, 1])
    src = tmp_path / "s.txt"
    src.write_text("\n".join([good[0], "node00,7," + ",".join(["abc"] * 10), good[1]]) + "\n")
    code, out, err = run("infer", workdir / "cal.aed", "--input", src)
    assert code == 0
    assert len(out.splitlines()) == 2 and "line 2" in err
    src.write_text("node00,1,0.5,0.5\n")
    assert run("infer", workdir / "cal.aed", "--input", src)[0] == cli.EXIT_DATA


def test_infer_output_format(workdir, tmp_path):
    src = tmp_path / "s.txt"
    src.write_text("\n".join(stream_lines(workdir / "traces" / "node00.csv", range(5))) + "\n")
    code, out, _ = run("infer", workdir / "cal.aed", "--input", src)
    rows = [line.split(",") for line in out.splitlines()]
    assert [r[1] for r in rows] == ["0", "1", "2", "3", "4"]
    assert all(len(r) == 6 and r[4] in ("normal", "anomaly") for r in rows)


def test_infer_training_rows_mostly_normal(workdir, tmp_path):
    trace = csvio.read_trace(workdir / "traces" / "node00.csv")
    train, _ = pipeline.dp.split(trace, 0.5)
    src = tmp_path / "train.txt"
    src.write_text("".join(f"{train.node_id},{int(t)}," + ",".join(repr(float(v)) for v in x) + "\n"
                           for t, x in zip(train.timestamps, train.samples)))
    _, out, _ = run("infer", workdir / "cal.aed", "--input", src)
    _, profile = modelstore.load(workdir / "cal.aed")
    verdicts = [line.split(",")[4] for line in out.splitlines()]
    share_normal = verdicts.count("normal") / len(verdicts)
    # nearest-rank threshold on exactly these rows
    assert share_normal >= profile.percentile_n / 100


def test_evaluate_outputs_and_online_equivalence(workdir, tmp_path):
    trace_path = workdir / "traces" / "node00.csv"
    code, out, _ = run("evaluate", workdir / "cal.aed", trace_path, "--report", tmp_path / "r.csv",
                       "--summary", tmp_path / "s.csv", "--rows", tmp_path / "rows.csv")
    assert code == 0
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "node,n95_N,n95_A,n97_N,n97_A,n99_N,n99_A"
    assert "ratio=" in out
    rows = csvio.read_rows(tmp_path / "rows.csv")
    trace = csvio.read_trace(trace_path)
    index = {int(t): i for i, t in enumerate(trace.timestamps)}
    src = tmp_path / "eval.txt"
    src.write_text("\n".join(stream_lines(trace_path, [index[r["timestamp_index"]] for r in rows])) + "\n")
    _, out, _ = run("infer", workdir / "cal.aed", "--input", src)
    online = [line.split(",") for line in out.splitlines()]
    assert [o[4] for o in online] == [r["verdict"] for r in rows]
    assert [float(o[2]) for o in online] == [r["error"] for r in rows]


def test_report_outputs(workdir, tmp_path):
    trace_path = workdir / "traces" / "node00.csv"
    run("evaluate", workdir / "cal.aed", trace_path, "--rows", tmp_path / "rows.csv")
    code, out, _ = run("report", tmp_path / "rows.csv", "--csv", tmp_path / "ts.csv", "--svg", tmp_path / "e.svg")
    assert code == 0
    rows = csvio.read_rows(tmp_path / "rows.csv")
    trace = csvio.read_trace(trace_path)
    _, ev = pipeline.dp.split(trace, 0.5)
    assert len((tmp_path / "ts.csv").read_text().splitlines()) - 1 == len(rows) == len(ev)
    svg = (tmp_path / "e.svg").read_text()
    assert svg.count("<path") == 1
    n_anomaly_runs = len(report.anomaly_bands([r["timestamp_index"] for r in rows], [r["label"] for r in rows]))
    assert svg.count('class="anomaly-band"') == n_anomaly_runs == 3


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["train"])
    assert info.value.code == cli.EXIT_USAGE
    assert run("train", "missing.csv", "-o", "x.aed", "--epochs", 0)[0] == cli.EXIT_USAGE


def test_bad_model_file_exit_code(tmp_path, workdir):
    bad = tmp_path / "bad.aed"
    bad.write_bytes(b"NOTAMODEL" * 4)
    assert run("evaluate", bad, workdir / "traces" / "node00.csv")[0] == cli.EXIT_MODEL


def test_stream_parser():
    rec = stream.parse_record("n1,4,1.0,2.5", 2)
    assert rec.node_id == "n1" and rec.seq == 4 and rec.values.tolist() == [1.0, 2.5]
    with pytest.raises(stream.DimensionMismatch):
        stream.parse_record("n1,4,1.0", 2)
    with pytest.raises(stream.MalformedRecord):
        stream.parse_record("n1,x,1.0,2.0", 2)
    with pytest.raises(stream.MalformedRecord):
        stream.parse_record("n1,1,nan,2.0", 2)
