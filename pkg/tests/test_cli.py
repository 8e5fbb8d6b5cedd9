import json

import numpy as np
import pytest

from ptqkit import load_bundle, load_quantized
from ptqkit.cli import run as main


def run(*argv):
    return main([str(a) for a in argv])


def quantize_args(model, out, report, alpha=50, beta=0.5, hi=8, lo=2):
    return [
        "quantize", "--model", model, "--alpha", alpha, "--beta", beta,
        "--bits-important", hi, "--bits-other", lo, "--act-bits", 8,
        "--out", out, "--report", report,
    ]


@pytest.fixture
def tiny_model(tmp_path, arch_file):
    path = tmp_path / "m.ptqb"
    assert run("gen", "--arch", arch_file, "--dist", "gaussian",
               "--sigma", 0.05, "--seed", 1, "--out", path) == 0
    return path


def test_gen_and_inspect(tmp_path, arch_file, capsys):
    model = tmp_path / "m.ptqb"
    assert run("gen", "--arch", arch_file, "--sigma", 0.05, "--seed", 7,
               "--out", model) == 0
    assert model.exists()
    assert run("inspect", model) == 0
    out = capsys.readouterr().out
    assert "layers: 3" in out
    assert "score" in out  # per-layer importance scores are shown


def test_quantize_dequantize_pipeline(tmp_path, tiny_model, capsys):
    quantized = tmp_path / "m.ptqq"
    report_path = tmp_path / "report.json"
    assert run(*quantize_args(tiny_model, quantized, report_path)) == 0
    report = json.loads(report_path.read_text())
    assert report["baseline_bits"] == 32 * load_bundle(tiny_model).total_weights
    assert 0 < report["quantized_bits"] < report["baseline_bits"]
    assert run("inspect", quantized) == 0
    assert "quantized model" in capsys.readouterr().out

    decoded_path = tmp_path / "d.ptqb"
    assert run("dequantize", "--model", quantized, "--out", decoded_path) == 0
    original = load_bundle(tiny_model)
    decoded = load_bundle(decoded_path)
    model = load_quantized(quantized)
    for layer, qlayer in zip(original.layers, model.layers):
        orig = original.tensor_for(layer).data.astype(np.float64)
        rest = decoded.tensor_for(layer).data.astype(np.float64)
        outer = np.abs(orig) > qlayer.split
        shape = (-1,) + (1,) * (orig.ndim - 1)
        step = np.where(
            outer,
            np.asarray(qlayer.scales_sparse).reshape(shape),
            np.asarray(qlayer.scales_dense).reshape(shape),
        )
        tolerance = step / 2 + 4 * np.spacing(np.float32(qlayer.bound))
        assert (np.abs(rest - orig) <= tolerance).all()


def test_report_stdout_and_files(tmp_path, tiny_model, capsys):
    quantized = tmp_path / "m.ptqq"
    assert run(*quantize_args(tiny_model, quantized, tmp_path / "r.json")) == 0
    capsys.readouterr()

    assert run("report", "--original", tiny_model, "--quantized", quantized,
               "--format", "json") == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["model_name"].startswith("tiny-file")

    assert run("report", "--original", tiny_model, "--quantized", quantized,
               "--format", "csv") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "layer_index,params,bits_histogram,p,l,mse,bops"
    assert len(lines) == 4

    out_csv = tmp_path / "r.csv"
    figures = tmp_path / "figures"
    assert run("report", "--original", tiny_model, "--quantized", quantized,
               "--format", "csv", "--out", out_csv, "--plot-dir", figures) == 0
    assert out_csv.read_text().splitlines()[0].startswith("layer_index")
    assert sorted(p.name for p in figures.iterdir()) == [
        "channel_bits.png",
        "per_layer_mse.png",
    ]


def test_sweep_rows_and_figures(tmp_path, tiny_model, capsys):
    out = tmp_path / "sweep.csv"
    figures = tmp_path / "sweepfigs"
    assert run("sweep", "--model", tiny_model, "--alphas", "10,30,50,100",
               "--beta", 0.5, "--bits-important", 8, "--bits-other", 2,
               "--out", out, "--plot-dir", figures) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("#")
    assert lines[1] == "alpha,size_mbit,total_mse,total_bops"
    rows = [line.split(",") for line in lines[2:]]
    assert [float(row[0]) for row in rows] == [10.0, 30.0, 50.0, 100.0]
    sizes = [float(row[1]) for row in rows]
    assert sizes == sorted(sizes)  # non-decreasing in alpha
    assert sorted(p.name for p in figures.iterdir()) == [
        "bops_vs_alpha.png",
        "size_vs_mse.png",
    ]


def test_usage_errors_exit_2(tmp_path, tiny_model):
    out, rep = tmp_path / "q.ptqq", tmp_path / "r.json"
    bad_flag_sets = [
        quantize_args(tiny_model, out, rep, alpha=150),
        quantize_args(tiny_model, out, rep, beta=2),
        quantize_args(tiny_model, out, rep, hi=2, lo=8),
        quantize_args(tiny_model, out, rep, lo=1),
        ["quantize", "--model", str(tiny_model)],
        ["report", "--original", str(tiny_model), "--quantized", str(out),
         "--format", "xml"],
        ["sweep", "--model", str(tiny_model), "--alphas", "10,bad",
         "--beta", "0.5", "--bits-important", "8", "--bits-other", "2",
         "--out", str(out)],
        ["gen", "--arch", "resnet50-like", "--dist", "cauchy",
         "--out", str(out)],
        ["nonsense"],
    ]
    for argv in bad_flag_sets:
        with pytest.raises(SystemExit) as excinfo:
            run(*argv)
        assert excinfo.value.code == 2, argv


def test_data_errors_exit_1(tmp_path, tiny_model, capsys):
    missing = tmp_path / "missing.ptqb"
    assert run("inspect", missing) == 1
    assert "error:" in capsys.readouterr().err

    garbage = tmp_path / "garbage.ptqb"
    garbage.write_bytes(b"JUNKJUNKJUNKJUNK")
    assert run("inspect", garbage) == 1

    # a .ptqb where a .ptqq is required
    assert run("dequantize", "--model", tiny_model, "--out", tmp_path / "x.ptqb") == 1
    assert "magic" in capsys.readouterr().err

    truncated = tmp_path / "trunc.ptqb"
    truncated.write_bytes(tiny_model.read_bytes()[:40])
    assert run("inspect", truncated) == 1

    assert run("gen", "--arch", tmp_path / "no_such_arch.json",
               "--out", tmp_path / "x.ptqb") == 1


def test_quantize_outputs_byte_deterministic(tmp_path, tiny_model):
    pairs = []
    for tag in ("one", "two"):
        out = tmp_path / f"{tag}.ptqq"
        rep = tmp_path / f"{tag}.json"
        assert run(*quantize_args(tiny_model, out, rep, alpha=30, beta=0.6)) == 0
        pairs.append((out.read_bytes(), rep.read_bytes()))
    assert pairs[0] == pairs[1]


def test_sweep_output_byte_deterministic(tmp_path, tiny_model):
    blobs = []
    for tag in ("one", "two"):
        out = tmp_path / f"{tag}.csv"
        assert run("sweep", "--model", tiny_model, "--alphas", "20,40",
                   "--beta", 0.5, "--bits-important", 6, "--bits-other", 3,
                   "--out", out) == 0
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1]


@pytest.mark.slow
def test_resnet_scale_mp_size_under_four_bit_ceiling(tmp_path):
    model = tmp_path / "rn.ptqb"
    quantized = tmp_path / "rn.ptqq"
    report_path = tmp_path / "rn.json"
    assert run("gen", "--arch", "resnet50-like", "--dist", "gaussian",
               "--sigma", 0.05, "--seed", 0, "--out", model) == 0
    assert run(*quantize_args(model, quantized, report_path,
                              alpha=40, beta=0.5, hi=4, lo=2)) == 0
    report = json.loads(report_path.read_text())
    total_weights = report["baseline_bits"] // 32
    assert total_weights == 25_502_912
    assert report["quantized_bits"] <= 4 * total_weights
    assert report["quantized_mbit"] <= 102.02
