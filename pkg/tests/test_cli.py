import hashlib
import json
import os
import re
import subprocess
import sys

import numpy as np
import pytest

from ofmkit.formats import read_flo, read_image, read_matrix_csv, write_matrix_csv

CLI = [sys.executable, "-m", "ofmkit"]
STDERR_SHAPE = re.compile(r"^ofmkit: (config|data|numerical)-error: \S.*$")


def run_cli(*argv, backend="numpy", check=True):
    """Run the installed CLI; the numpy backend keeps subprocesses cheap."""
    env = dict(os.environ)
    if backend is not None:
        env["OFMKIT_BACKEND"] = backend
    proc = subprocess.run(
        [*CLI, *map(str, argv)], capture_output=True, text=True, env=env
    )
    if check:
        assert proc.returncode == 0, f"rc={proc.returncode}\n{proc.stderr}"
    return proc


def digest_tree(root):
    out = {}
    for name in sorted(os.listdir(root)):
        with open(os.path.join(root, name), "rb") as fh:
            out[name] = hashlib.sha256(fh.read()).hexdigest()
    return out


@pytest.fixture(scope="module")
def crops(tmp_path_factory):
    """Four 64x64 crops sliding 4 px along a texture row."""
    out = tmp_path_factory.mktemp("crops")
    run_cli(
        "gen", "--kind", "crop", "--width", 64, "--height", 64,
        "--centers", "grid4x1", "--spacing", 4, "--origin", "60,48",
        "--seed", 4, "--out", out,
    )
    return out


def frame_paths(root, n, fmt="pgm"):
    return [os.path.join(root, f"frame_{i:03d}.{fmt}") for i in range(n)]


def test_gen_writes_frames_params_and_manifest(tmp_path):
    out = tmp_path / "disks"
    run_cli(
        "gen", "--kind", "textured-disk", "--width", 96, "--height", 96,
        "--r", 12, "--centers", "grid2x2", "--spacing", 8, "--out", out,
    )
    frames = frame_paths(out, 4)
    for p in frames:
        assert os.path.exists(p)
        with open(p, "rb") as fh:
            assert fh.read(2) == b"P5"
    assert not os.path.exists(os.path.join(out, "frame_004.pgm"))
    params = read_matrix_csv(os.path.join(out, "params.csv"))
    assert params.shape == (4, 3)
    np.testing.assert_array_equal(params[:, 0], [0, 1, 2, 3])
    # grid2x2 around the canvas center at spacing 8
    assert sorted(params[:, 1].tolist()) == [43.5, 43.5, 51.5, 51.5]
    doc = json.load(open(os.path.join(out, "manifest.json")))
    assert doc["tool"] == "ofmkit" and doc["subcommand"] == "gen"
    assert doc["options"]["kind"] == "textured-disk"
    assert "config" not in doc["options"]


def test_manifest_rerun_reproduces_bit_exactly(tmp_path):
    first = tmp_path / "a"
    again = tmp_path / "b"
    run_cli(
        "gen", "--kind", "disk", "--width", 80, "--height", 64, "--r", 9.5,
        "--centers", "30,30;50.5,33", "--no-antialias", "--out", first,
    )
    run_cli("gen", "--config", os.path.join(first, "manifest.json"), "--out", again)
    d1, d2 = digest_tree(first), digest_tree(again)
    d1.pop("manifest.json")
    d2.pop("manifest.json")
    assert d1 == d2
    # flags given alongside --config win over the stored options
    third = tmp_path / "c"
    run_cli(
        "gen", "--config", os.path.join(first, "manifest.json"),
        "--r", 5, "--out", third,
    )
    doc = json.load(open(os.path.join(third, "manifest.json")))
    assert doc["options"]["r"] == 5.0


def test_flow_reports_consistency(crops, tmp_path):
    frames = frame_paths(crops, 2)
    out = tmp_path / "flow"
    run_cli("flow", "--frames", *frames, "--require-consistent", "--out", out)
    rep = json.load(open(out / "report.json"))
    assert rep["consistent"] is True
    assert rep["fb_error_forward"] < 0.5
    flow = read_flo(out / "flow.flo")
    back = read_flo(out / "flow_back.flo")
    assert flow.shape == (64, 64)
    # second crop sits 4 px to the right, so the flow points +x
    assert np.median(flow.vx) == pytest.approx(4.0, abs=0.3)
    assert np.median(back.vx) == pytest.approx(-4.0, abs=0.3)


def test_metric_matrix_properties(crops, tmp_path):
    frames = frame_paths(crops, 4)
    out = tmp_path / "metric"
    run_cli("metric", "--inputs", *frames, "--ambient", "--out", out)
    d = read_matrix_csv(out / "metric.csv")
    assert d.shape == (4, 4)
    np.testing.assert_array_equal(d, d.T)
    np.testing.assert_array_equal(np.diag(d), 0.0)
    assert d[0, 3] == pytest.approx(12.0, abs=1.0)
    rep = json.load(open(out / "report.json"))
    assert rep["connected"] is True
    amb = read_matrix_csv(out / "ambient.csv")
    assert amb.shape == (4, 4) and np.all(np.isfinite(amb))


def test_embed_recovers_line(tmp_path):
    pts = np.array([0.0, 4.1, 7.9, 12.2])
    d = np.abs(pts[:, None] - pts[None, :])
    write_matrix_csv(tmp_path / "d.csv", d)
    ref = np.stack([pts, np.zeros(4)], axis=1)
    write_matrix_csv(tmp_path / "ref.csv", ref)
    out = tmp_path / "emb"
    run_cli(
        "embed", "--distances", tmp_path / "d.csv",
        "--reference", tmp_path / "ref.csv", "--out", out,
    )
    rep = json.load(open(out / "report.json"))
    assert rep["procrustes_residual"] <= 1e-9
    coords = read_matrix_csv(out / "coords.csv")
    assert coords.shape == (4, 2)
    np.testing.assert_allclose(np.abs(np.diff(coords[:, 0])), np.diff(pts), atol=1e-9)


def test_interp_blend_baseline(crops, tmp_path):
    frames = frame_paths(crops, 2)
    out = tmp_path / "mid"
    run_cli("interp", "--frames", *frames, "--t", 0.5, "--blend", "--out", out)
    mid = read_image(os.path.join(out, "frame_000.pgm"))
    a = read_image(frames[0])
    b = read_image(frames[1])
    np.testing.assert_allclose(mid.data, 0.5 * (a.data + b.data), atol=1e-4)


def test_curve_fields_resample_chain(crops, tmp_path):
    frames = frame_paths(crops, 4)
    curve_dir = tmp_path / "curve"
    run_cli("curve", "--inputs", *frames, "--out", curve_dir)
    doc = json.load(open(curve_dir / "curve.json"))
    arc = np.array(doc["arc"])
    assert len(doc["hop_flows"]) == 3
    np.testing.assert_allclose(np.diff(arc), 4.0, atol=0.35)
    np.testing.assert_allclose(doc["radius"], arc[-1] - arc, atol=1e-9)

    manifest = str(curve_dir / "curve.json")
    trans_dir = tmp_path / "translate"
    run_cli("fields", "--curve", manifest, "--translate", 4.0, "--out", trans_dir)
    rep = json.load(open(trans_dir / "report.json"))
    assert rep["operation"] == "translate" and rep["parallel"] is True
    motion = read_matrix_csv(trans_dir / "motion.csv")
    np.testing.assert_array_equal(motion[:, 1], 4.0)

    res_dir = tmp_path / "resampled"
    step = float(arc[1])
    run_cli("resample", "--curve", manifest, "--step", step, "--out", res_dir)
    stamps = read_matrix_csv(res_dir / "stamps.csv")
    assert stamps.shape[1] == 3
    rep = json.load(open(res_dir / "report.json"))
    assert rep["n_frames"] == stamps.shape[0]
    first = read_image(os.path.join(res_dir, "frame_000.pgm"))
    orig = read_image(frames[0])
    np.testing.assert_allclose(first.data, orig.data, atol=1e-4)


def test_fields_algebra_on_ideal_curve(tmp_path):
    manifest = tmp_path / "ideal.json"
    manifest.write_text(
        json.dumps(
            {
                "frames": [],
                "times": [0.0, 1.0, 2.0, 3.0],
                "arc": [0.0, 2.0, 4.0, 6.0],
                "radius": [8.0, 8.0, 8.0, 8.0],
                "hop_flows": [],
                "foreground_threshold": None,
            }
        )
    )
    motion = tmp_path / "motion.csv"
    write_matrix_csv(motion, np.array([[0.0, 3.0], [1.0, 3.0], [2.0, 3.0], [3.0, 3.0]]))

    conj_dir = tmp_path / "conj"
    run_cli("fields", "--curve", manifest, "--conjugate", motion, "--out", conj_dir)
    np.testing.assert_array_equal(read_matrix_csv(conj_dir / "motion.csv")[:, 1], 5.0)

    add_dir = tmp_path / "add"
    run_cli("fields", "--curve", manifest, "--add", motion, motion, "--out", add_dir)
    np.testing.assert_array_equal(read_matrix_csv(add_dir / "motion.csv")[:, 1], 6.0)

    appr_dir = tmp_path / "approx"
    run_cli("fields", "--curve", manifest, "--approx", motion, "--out", appr_dir)
    rep = json.load(open(appr_dir / "report.json"))
    assert rep["level"] == 3.0 and rep["lower_bound"] == 0.0

    quant_dir = tmp_path / "quant"
    run_cli(
        "fields", "--curve", manifest, "--quantize", motion,
        "--n", 1, "--k", 2, "--out", quant_dir,
    )
    rep = json.load(open(quant_dir / "report.json"))
    assert rep["index"] == 1 and rep["step"] == 4.0 and rep["error"] == 1.0
    np.testing.assert_array_equal(read_matrix_csv(quant_dir / "motion.csv")[:, 1], 4.0)

    both = run_cli(
        "fields", "--curve", manifest, "--translate", 1.0,
        "--conjugate", motion, "--out", tmp_path / "x", check=False,
    )
    assert both.returncode == 2 and "exactly one operation" in both.stderr


def test_estimate_translation_from_templates(tmp_path):
    tpl_dir = tmp_path / "templates"
    run_cli(
        "gen", "--kind", "textured-disk", "--width", 96, "--height", 96,
        "--r", 14, "--centers", "grid3x1", "--spacing", 10, "--seed", 9,
        "--out", tpl_dir,
    )
    params = read_matrix_csv(tpl_dir / "params.csv")
    write_matrix_csv(tpl_dir / "thetas.csv", params[:, 1:3])
    query_dir = tmp_path / "query"
    run_cli(
        "gen", "--kind", "textured-disk", "--width", 96, "--height", 96,
        "--r", 14, "--centers", "50.3,46.4", "--seed", 9, "--out", query_dir,
    )
    out = tmp_path / "est"
    run_cli(
        "estimate", "--kind", "translation",
        "--query", os.path.join(query_dir, "frame_000.pgm"),
        "--templates", *frame_paths(tpl_dir, 3),
        "--thetas", tpl_dir / "thetas.csv", "--out", out,
    )
    rep = json.load(open(out / "report.json"))
    assert rep["theta"][0] == pytest.approx(50.3, abs=0.15)
    assert rep["theta"][1] == pytest.approx(46.4, abs=0.15)
    assert rep["template_index"] == 1


def test_exit_codes_and_stderr_contract(crops, tmp_path):
    bad_kind = run_cli("gen", "--kind", "pyramid", "--out", tmp_path / "x", check=False)
    assert bad_kind.returncode == 2
    missing = run_cli(
        "flow", "--frames", "no_such_a.pgm", "no_such_b.pgm",
        "--out", tmp_path / "y", check=False,
    )
    assert missing.returncode == 3 and "file not found" in missing.stderr
    # np.loadtxt raises FileNotFoundError without .filename; the path must
    # still appear in the message rather than a literal "None"
    missing_csv = run_cli(
        "embed", "--distances", "no_such.csv", "--out", tmp_path / "w",
        check=False,
    )
    assert missing_csv.returncode == 3
    assert "no_such.csv" in missing_csv.stderr and "None" not in missing_csv.stderr
    frames = frame_paths(crops, 2)
    stubborn = run_cli(
        "karcher", "--inputs", *frames, "--tol", 1e-9, "--max-iters", 1,
        "--require-converged", "--out", tmp_path / "z", check=False,
    )
    assert stubborn.returncode == 4
    for proc in (bad_kind, missing, missing_csv, stubborn):
        lines = proc.stderr.strip().splitlines()
        assert len(lines) == 1, proc.stderr
        assert STDERR_SHAPE.match(lines[0]), lines[0]


def test_inconsistent_frames_fail_gate_with_data_error(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    run_cli("gen", "--kind", "crop", "--centers", "10,10", "--width", 48,
            "--height", 48, "--seed", 1, "--out", a)
    run_cli("gen", "--kind", "crop", "--centers", "300,300", "--width", 48,
            "--height", 48, "--seed", 1, "--out", b)
    proc = run_cli(
        "flow", "--frames", os.path.join(a, "frame_000.pgm"),
        os.path.join(b, "frame_000.pgm"), "--require-consistent",
        "--out", tmp_path / "f", check=False,
    )
    assert proc.returncode == 3
    assert proc.stderr.startswith("ofmkit: data-error: frames fail the consistency gate")


def test_verify_analytic_quick(tmp_path):
    out = tmp_path / "analytic"
    run_cli(
        "verify-analytic", "--model", "affine", "--pairs", 3,
        "--resolution", 64, "--sigma-resolution", 128, "--out", out,
    )
    rep = json.load(open(out / "report.json"))
    assert rep["affine"]["sigma_abs_dev"] <= 1e-4
    assert rep["affine"]["max_rel_dev"] <= 1e-3
    sigma = read_matrix_csv(out / "affine_sigma.csv")
    assert sigma.shape == (6, 6)


def test_karcher_cli_writes_trace(tmp_path):
    disks = tmp_path / "disks"
    run_cli(
        "gen", "--kind", "textured-disk", "--width", 96, "--height", 96,
        "--r", 16, "--centers", "grid2x1", "--spacing", 6, "--seed", 7,
        "--out", disks,
    )
    frames = frame_paths(disks, 2)
    out = tmp_path / "mean"
    run_cli(
        "karcher", "--inputs", *frames, "--alpha", 0.5, "--tol", 0.05,
        "--out", out, backend=None,
    )
    rep = json.load(open(out / "report.json"))
    assert rep["converged"] is True
    trace = read_matrix_csv(out / "trace.csv")
    assert trace.shape[0] == rep["iterations"]
    assert os.path.exists(os.path.join(out, "mean.pgm"))


def test_backend_parity_through_cli(crops, tmp_path):
    frames = frame_paths(crops, 2)
    out_np = tmp_path / "np"
    out_nb = tmp_path / "nb"
    run_cli("flow", "--frames", *frames, "--out", out_np, backend="numpy")
    run_cli("flow", "--frames", *frames, "--out", out_nb, backend="numba")
    d1, d2 = digest_tree(out_np), digest_tree(out_nb)
    d1.pop("manifest.json")
    d2.pop("manifest.json")
    assert d1 == d2


def test_figures_quick_bundle(tmp_path):
    out = tmp_path / "figs"
    run_cli("figures", "--quick", "--out", out, backend=None)
    for name in (
        "saturation.csv", "midpoint_grid.pgm", "sequence_strip.pgm",
        "embedding_report.json", "karcher_trace.csv", "report.json",
    ):
        assert os.path.exists(os.path.join(out, name)), name
    sat = read_matrix_csv(out / "saturation.csv")
    assert np.all(np.diff(sat[:, 0]) > 0)
    rep = json.load(open(out / "embedding_report.json"))
    assert rep["flow_residual"] < rep["ambient_residual"]


def test_version_and_missing_subcommand():
    ver = run_cli("--version")
    assert ver.stdout.strip().startswith("ofmkit ")
    none = run_cli(check=False)
    assert none.returncode == 2
