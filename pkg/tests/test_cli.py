"""End-to-end command tests, run in-process through cli.main."""
import pytest

from pepco.cli import main


def run(argv):
    return main(argv)


@pytest.fixture()
def synth_csv(tmp_path):
    out = tmp_path / "synth.csv"
    assert run(["gen-synth", "--n", "60", "--max-len", "8", "--seed", "3",
                "--out", str(out)]) == 0
    return out


@pytest.fixture()
def fast_cfg(tmp_path, synth_csv):
    p = tmp_path / "run.cfg"
    p.write_text(
        f"dataset = {synth_csv}\n"
        f"out_dir = {tmp_path / 'run'}\n"
        "task = regression\n"
        "fusion = repcon\n"
        "epochs = 2\n"
        "batch_size = 16\n"
        "hidden_dim = 16\n"
        "heads = 2\n"
        "seq_layers = 1\n"
        "ff_dim = 32\n"
        "graph_layers = 2\n"
        "predictor_hidden = 16\n"
        "max_len = 8\n"
        "seed = 5\n"
    )
    return p


@pytest.fixture()
def trained_run(tmp_path, fast_cfg):
    out_dir = tmp_path / "run"
    assert run(["train", "--config", str(fast_cfg)]) == 0
    return out_dir


# ---------------------------------------------------------------------------
# gen-synth
# ---------------------------------------------------------------------------

def test_gen_synth_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["gen-synth", "--n", "100", "--max-len", "10", "--seed", "7",
                "--out", str(a)]) == 0
    assert run(["gen-synth", "--n", "100", "--max-len", "10", "--seed", "7",
                "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    header, first = a.read_text().splitlines()[:2]
    assert header == "sequence,label"


def test_gen_synth_label_rule(tmp_path):
    out = tmp_path / "c.csv"
    run(["gen-synth", "--n", "40", "--max-len", "6", "--seed", "1",
         "--out", str(out)])
    for line in out.read_text().splitlines()[1:]:
        seq, label = line.split(",")
        expected = sum(ch in "FWY" for ch in seq) / len(seq)
        assert abs(float(label) - expected) <= 5e-7


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def test_train_writes_artifacts(trained_run):
    assert (trained_run / "checkpoint.pcn").exists()
    assert (trained_run / "loss_curve.csv").exists()
    assert (trained_run / "metrics.txt").exists()
    assert (trained_run / "config.txt").exists()
    curve = (trained_run / "loss_curve.csv").read_text().splitlines()
    assert curve[0] == "epoch,loss_pred,loss_con,loss_train,val_metric"
    assert len(curve) == 3  # header + 2 epochs
    metrics = dict(line.split("=") for line in
                   (trained_run / "metrics.txt").read_text().splitlines())
    assert set(metrics) == {"mae", "mse", "r2"}


def test_train_missing_dataset_key_is_usage_error(tmp_path, capsys):
    cfg = tmp_path / "no_data.cfg"
    cfg.write_text("task = regression\n")
    assert run(["train", "--config", str(cfg)]) == 1
    assert "'dataset'" in capsys.readouterr().err


def test_train_rerun_byte_identical(tmp_path, fast_cfg):
    assert run(["train", "--config", str(fast_cfg),
                "--out-dir", str(tmp_path / "r1")]) == 0
    assert run(["train", "--config", str(fast_cfg),
                "--out-dir", str(tmp_path / "r2")]) == 0
    c1 = (tmp_path / "r1" / "loss_curve.csv").read_bytes()
    c2 = (tmp_path / "r2" / "loss_curve.csv").read_bytes()
    assert c1 == c2


def test_train_set_overrides_seed(tmp_path, fast_cfg):
    assert run(["train", "--config", str(fast_cfg),
                "--out-dir", str(tmp_path / "s9"), "--set", "seed=9"]) == 0
    resolved = (tmp_path / "s9" / "config.txt").read_text()
    assert "seed = 9" in resolved


# ---------------------------------------------------------------------------
# infer
# ---------------------------------------------------------------------------

@pytest.fixture()
def fasta(tmp_path):
    p = tmp_path / "q.fasta"
    p.write_text(">a\nWWFY\n>b\nGAK\n>c\nlerk\n")
    return p


def test_infer_writes_predictions(trained_run, fasta, tmp_path):
    out = tmp_path / "preds.csv"
    assert run(["infer", "--checkpoint", str(trained_run / "checkpoint.pcn"),
                "--fasta", str(fasta), "--out", str(out),
                "--assert-seq-only"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "id,prediction"
    assert len(lines) == 4
    assert lines[1].startswith("a,")


def test_infer_deterministic(trained_run, fasta, tmp_path):
    o1, o2 = tmp_path / "p1.csv", tmp_path / "p2.csv"
    for o in (o1, o2):
        assert run(["infer", "--checkpoint", str(trained_run / "checkpoint.pcn"),
                    "--fasta", str(fasta), "--out", str(o)]) == 0
    assert o1.read_bytes() == o2.read_bytes()


def test_infer_rejects_baseline_checkpoint(tmp_path, synth_csv, fasta, capsys):
    cfg = tmp_path / "concat.cfg"
    cfg.write_text(
        f"dataset = {synth_csv}\nout_dir = {tmp_path / 'cc'}\n"
        "fusion = concat\nepochs = 1\nbatch_size = 16\nhidden_dim = 16\n"
        "heads = 2\nseq_layers = 1\nff_dim = 32\ngraph_layers = 2\n"
        "predictor_hidden = 16\nmax_len = 8\nseed = 5\n"
    )
    assert run(["train", "--config", str(cfg)]) == 0
    code = run(["infer", "--checkpoint", str(tmp_path / "cc" / "checkpoint.pcn"),
                "--fasta", str(fasta)])
    assert code == 1
    assert "repcon" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# attribute / compare
# ---------------------------------------------------------------------------

def test_attribute_and_compare_round_trip(trained_run, synth_csv, tmp_path, capsys):
    ckpt = str(trained_run / "checkpoint.pcn")
    pa = tmp_path / "seq_profiles.csv"
    pb = tmp_path / "graph_profiles.csv"
    assert run(["attribute", "--checkpoint", ckpt, "--dataset", str(synth_csv),
                "--route", "seq", "--m", "20", "--out", str(pa)]) == 0
    assert run(["attribute", "--checkpoint", ckpt, "--dataset", str(synth_csv),
                "--route", "graph", "--m", "20", "--out", str(pb)]) == 0
    lines = pa.read_text().splitlines()
    assert lines[0] == "id,position,residue,score"

    # profiles normalize per peptide
    sums = {}
    for line in lines[1:]:
        pid, _, _, score = line.split(",")
        sums[pid] = sums.get(pid, 0.0) + float(score)
    assert all(abs(s - 1.0) <= 2e-5 for s in sums.values())

    report = tmp_path / "report.csv"
    assert run(["compare", "--profiles-a", str(pa), "--profiles-b", str(pb),
                "--out", str(report)]) == 0
    body = report.read_text()
    assert body.splitlines()[0] == "metric,statistic,value"

    # self comparison is the identity report
    self_report = tmp_path / "self.csv"
    assert run(["compare", "--profiles-a", str(pa), "--profiles-b", str(pa),
                "--out", str(self_report)]) == 0
    rows = dict()
    for line in self_report.read_text().splitlines()[1:]:
        metric, stat, value = line.split(",")
        rows[(metric, stat)] = float(value)
    assert rows[("kendall_tau", "mean")] == 1.0
    assert rows[("js_divergence", "mean")] == 0.0
    assert rows[("top_1_overlap", "fraction")] == 1.0


def test_attribute_warns_for_tiny_m(trained_run, synth_csv, tmp_path, capsys):
    ckpt = str(trained_run / "checkpoint.pcn")
    out = tmp_path / "m1.csv"
    assert run(["attribute", "--checkpoint", ckpt, "--dataset", str(synth_csv),
                "--route", "seq", "--m", "1", "--out", str(out)]) == 0
    assert "completeness" in capsys.readouterr().err


def test_compare_mismatched_ids_fail(trained_run, synth_csv, tmp_path, capsys):
    ckpt = str(trained_run / "checkpoint.pcn")
    pa = tmp_path / "a.csv"
    assert run(["attribute", "--checkpoint", ckpt, "--dataset", str(synth_csv),
                "--route", "seq", "--m", "5", "--out", str(pa)]) == 0
    text = pa.read_text().replace("r1,", "zz,")
    pb = tmp_path / "b.csv"
    pb.write_text(text)
    assert run(["compare", "--profiles-a", str(pa), "--profiles-b", str(pb)]) == 2
    assert "paired" in capsys.readouterr().err


def test_three_way_comparison_composes(trained_run, synth_csv, tmp_path):
    # pairwise reports among three profile sets come from three invocations
    ckpt = str(trained_run / "checkpoint.pcn")
    files = {}
    for name, route, m in (("a", "seq", 10), ("b", "graph", 10), ("c", "seq", 3)):
        out = tmp_path / f"{name}.csv"
        assert run(["attribute", "--checkpoint", ckpt, "--dataset", str(synth_csv),
                    "--route", route, "--m", str(m), "--out", str(out)]) == 0
        files[name] = out
    for x, y in (("a", "b"), ("b", "c"), ("a", "c")):
        report = tmp_path / f"{x}_vs_{y}.csv"
        assert run(["compare", "--profiles-a", str(files[x]),
                    "--profiles-b", str(files[y]), "--out", str(report)]) == 0
        assert report.read_text().startswith("metric,statistic,value")


def test_train_classification_reports_accuracy(tmp_path):
    rows = ["sequence,label"]
    for i in range(40):
        rows.append("WFYW,1" if i % 2 else "GAKL,0")
    data = tmp_path / "cls.csv"
    data.write_text("\n".join(rows) + "\n")
    out = tmp_path / "cls_run"
    assert run(["train", "--set", f"dataset={data}", "--set", "task=classification",
                "--set", "n_classes=2", "--set", "epochs=2", "--set", "lambda=0.05",
                "--set", "batch_size=8", "--set", "hidden_dim=16", "--set", "heads=2",
                "--set", "seq_layers=1", "--set", "ff_dim=32",
                "--set", "graph_layers=2", "--set", "predictor_hidden=16",
                "--set", "max_len=8", "--out-dir", str(out)]) == 0
    metrics = dict(line.split("=") for line in
                   (out / "metrics.txt").read_text().splitlines())
    assert set(metrics) == {"accuracy"}
    assert 0.0 <= float(metrics["accuracy"]) <= 1.0


# ---------------------------------------------------------------------------
# sweep-lambda
# ---------------------------------------------------------------------------

def test_sweep_lambda_rows_sorted(tmp_path, synth_csv):
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text(
        f"dataset = {synth_csv}\nout_dir = {tmp_path / 'sw'}\n"
        "epochs = 1\nbatch_size = 16\nhidden_dim = 16\nheads = 2\n"
        "seq_layers = 1\nff_dim = 32\ngraph_layers = 2\npredictor_hidden = 16\n"
        "max_len = 8\nseed = 5\n"
    )
    out = tmp_path / "sweep.csv"
    assert run(["sweep-lambda", "--config", str(cfg),
                "--grid", "1e-4,0,1e-3", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "lambda,val_metric"
    lams = [float(line.split(",")[0]) for line in lines[1:]]
    assert lams == sorted(lams) and len(lams) == 3


def test_sweep_lambda_empty_grid_is_usage_error(tmp_path, synth_csv):
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text(f"dataset = {synth_csv}\nepochs = 1\n")
    assert run(["sweep-lambda", "--config", str(cfg), "--grid", ","]) == 1


# ---------------------------------------------------------------------------
# usage errors
# ---------------------------------------------------------------------------

def test_unknown_command_is_usage_error():
    assert run(["frobnicate"]) == 1


def test_unknown_config_key_via_set(tmp_path, synth_csv):
    assert run(["train", "--set", f"dataset={synth_csv}",
                "--set", "bogus_key=1"]) == 1


def test_missing_dataset_file_is_runtime_error(tmp_path, capsys):
    assert run(["train", "--set", "dataset=/does/not/exist.csv",
                "--out-dir", str(tmp_path / "x")]) == 2
