import json
import subprocess
import sys

import numpy as np
import pytest

from depara import dense_net, export_bundle, save_bundle, save_refnet
from depara.cli import main

from conftest import make_bundle, random_net


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def identity_setup(tmp_path):
    net = dense_net([(np.eye(2), np.zeros(2), "identity")])
    net_path = tmp_path / "net.depn"
    save_refnet(net, net_path)
    probe_path = tmp_path / "probe.csv"
    probe_path.write_text("1.0,0.0\n0.0,1.0\n0.5,0.5\n")
    return net, net_path, probe_path


def test_export_ref(identity_setup, tmp_path, capsys):
    _, net_path, probe_path = identity_setup
    out_path = tmp_path / "out.depb"
    code, out, _ = run_cli(capsys, "export-ref", "--net", str(net_path),
                           "--probe", str(probe_path), "--tap", "1", "--out", str(out_path))
    assert code == 0
    payload = json.loads(out)
    assert payload["n"] == 3 and payload["d_embed"] == 2 and payload["d_input"] == 2
    assert out_path.is_file()


def test_export_ref_tap_out_of_range(identity_setup, tmp_path, capsys):
    _, net_path, probe_path = identity_setup
    code, _, err = run_cli(capsys, "export-ref", "--net", str(net_path),
                           "--probe", str(probe_path), "--tap", "9",
                           "--out", str(tmp_path / "x.depb"))
    assert code == 2
    assert "tap out of range" in err


def test_export_ref_non_csv_probe(identity_setup, tmp_path, capsys):
    _, net_path, _ = identity_setup
    bad = tmp_path / "probe.csv"
    bad.write_text("not,numbers\nat,all\n")
    code, _, err = run_cli(capsys, "export-ref", "--net", str(net_path),
                           "--probe", str(bad), "--tap", "1",
                           "--out", str(tmp_path / "x.depb"))
    assert code == 2
    assert "probe" in err


def test_compare_self(tmp_path, capsys, rng):
    bundle = make_bundle(rng)
    path = tmp_path / "b.depb"
    save_bundle(bundle, path)
    code, out, _ = run_cli(capsys, "compare", "--a", str(path), "--b", str(path),
                           "--lambda", "1.0")
    assert code == 0
    report = json.loads(out)
    assert report["score"] == pytest.approx(2.0, abs=1e-9)
    assert set(report) == {"s_nodes", "s_edges", "lambda", "score"}


def test_compare_probe_mismatch(tmp_path, capsys, rng):
    save_bundle(make_bundle(rng, probe_id="p1"), tmp_path / "a.depb")
    save_bundle(make_bundle(rng, probe_id="p2"), tmp_path / "b.depb")
    code, _, err = run_cli(capsys, "compare", "--a", str(tmp_path / "a.depb"),
                           "--b", str(tmp_path / "b.depb"))
    assert code == 2
    assert "incomparable graphs" in err


def test_compare_lambda_zero(tmp_path, capsys, rng):
    save_bundle(make_bundle(rng, model_id="a"), tmp_path / "a.depb")
    save_bundle(make_bundle(rng, model_id="b"), tmp_path / "b.depb")
    code, out, _ = run_cli(capsys, "compare", "--a", str(tmp_path / "a.depb"),
                           "--b", str(tmp_path / "b.depb"), "--lambda", "0")
    assert code == 0
    report = json.loads(out)
    assert report["score"] == report["s_nodes"]


def test_rank_contains_target(tmp_path, capsys, rng):
    candidates = tmp_path / "pool"
    candidates.mkdir()
    target_bundle = make_bundle(rng, model_id="target")
    save_bundle(target_bundle, candidates / "self.depb")
    for i in range(3):
        save_bundle(make_bundle(rng, model_id=f"m{i}"), candidates / f"cand{i}.depb")
    target_path = tmp_path / "target.depb"
    save_bundle(target_bundle, target_path)
    code, out, _ = run_cli(capsys, "rank", "--target", str(target_path),
                           "--candidates", str(candidates))
    assert code == 0
    table = json.loads(out)
    assert table["entries"][0]["candidate_id"] == "self"
    assert table["entries"][0]["rank"] == 1


def test_rank_csv_format(tmp_path, capsys, rng):
    candidates = tmp_path / "pool"
    candidates.mkdir()
    for i in range(2):
        save_bundle(make_bundle(rng, model_id=f"m{i}"), candidates / f"c{i}.depb")
    target_path = tmp_path / "target.depb"
    save_bundle(make_bundle(rng, model_id="t"), target_path)
    code, out, _ = run_cli(capsys, "rank", "--target", str(target_path),
                           "--candidates", str(candidates), "--format", "csv")
    assert code == 0
    assert out.splitlines()[0] == "candidate_id,score,rank"


def test_rank_deterministic_output(tmp_path, rng, capsys):
    candidates = tmp_path / "pool"
    candidates.mkdir()
    for i in range(3):
        save_bundle(make_bundle(rng, model_id=f"m{i}"), candidates / f"c{i}.depb")
    target_path = tmp_path / "target.depb"
    save_bundle(make_bundle(rng, model_id="t"), target_path)
    outputs = []
    for _ in range(2):
        code, out, _ = run_cli(capsys, "rank", "--target", str(target_path),
                               "--candidates", str(candidates))
        assert code == 0
        outputs.append(out)
    assert outputs[0] == outputs[1]


def test_select_layer_cli(tmp_path, capsys, rng):
    net = random_net(rng, [6, 5, 4, 3])
    probe = rng.normal(size=(8, 6))
    layers_dir = tmp_path / "layers"
    layers_dir.mkdir()
    for tap in (1, 2, 3):
        bundle = export_bundle(net, probe, tap, model_id="net", probe_id="p")
        save_bundle(bundle, layers_dir / f"tap{tap}.depb")
    target_path = tmp_path / "encoder.depb"
    save_bundle(export_bundle(net, probe, 2, model_id="net", probe_id="p"), target_path)
    code, out, _ = run_cli(capsys, "select-layer", "--layers", str(layers_dir),
                           "--target-encoder", str(target_path))
    assert code == 0
    payload = json.loads(out)
    assert payload["selected"] == "tap2"
    assert payload["tied"] is False


def test_eval_cli(tmp_path, capsys):
    rankings = {
        "target_id": "q",
        "direction": "descending_by_score",
        "entries": [
            {"candidate_id": c, "score": s, "rank": r}
            for c, s, r in [("a", 0.9, 1), ("b", 0.8, 2), ("c", 0.7, 3),
                            ("d", 0.6, 4), ("e", 0.5, 5), ("f", 0.4, 6)]
        ],
    }
    rank_path = tmp_path / "r.json"
    rank_path.write_text(json.dumps(rankings))
    rel_path = tmp_path / "rel.json"
    rel_path.write_text(json.dumps({"q": ["a", "b", "c", "d", "f"]}))
    curve_path = tmp_path / "curve.csv"
    svg_path = tmp_path / "curve.svg"
    code, out, _ = run_cli(capsys, "eval", "--rankings", str(rank_path),
                           "--relevance", str(rel_path), "--k", "5",
                           "--curve", str(curve_path), "--svg", str(svg_path))
    assert code == 0
    payload = json.loads(out)
    assert payload["per_query"]["q"]["precision"] == 0.8
    assert payload["per_query"]["q"]["recall"] == 0.8
    assert payload["macro"]["precision"] == 0.8
    assert curve_path.read_text().splitlines()[0] == "k,precision,recall"
    assert svg_path.read_text().startswith("<svg")


def test_eval_missing_relevance(tmp_path, capsys):
    rank_path = tmp_path / "r.json"
    rank_path.write_text(json.dumps({
        "target_id": "q",
        "direction": "descending_by_score",
        "entries": [{"candidate_id": "a", "score": 1.0, "rank": 1}],
    }))
    rel_path = tmp_path / "rel.json"
    rel_path.write_text(json.dumps({"other": ["a"]}))
    code, _, err = run_cli(capsys, "eval", "--rankings", str(rank_path),
                           "--relevance", str(rel_path), "--k", "1")
    assert code == 2
    assert "missing relevance" in err


def test_tree_cli_separates_blocks(tmp_path, capsys, rng):
    bundles = tmp_path / "bundles"
    bundles.mkdir()
    base_a = make_bundle(rng, n=6, model_id="a0")
    base_b = make_bundle(rng, n=6, model_id="b0")
    # near-duplicates of two distinct bundles form two blocks
    from depara import ProbeBundle
    jitter = rng.normal(scale=1e-3, size=base_a.embeddings.shape).astype(np.float32)
    a1 = ProbeBundle("a1", "l", base_a.probe_id,
                     embeddings=base_a.embeddings + jitter,
                     attributions=base_a.attributions)
    jitter_b = rng.normal(scale=1e-3, size=base_b.embeddings.shape).astype(np.float32)
    b1 = ProbeBundle("b1", "l", base_b.probe_id,
                     embeddings=base_b.embeddings + jitter_b,
                     attributions=base_b.attributions)
    save_bundle(base_a, bundles / "a0.depb")
    save_bundle(a1, bundles / "a1.depb")
    save_bundle(base_b, bundles / "b0.depb")
    save_bundle(b1, bundles / "b1.depb")
    code, out, _ = run_cli(capsys, "tree", "--bundles", str(bundles), "--format", "newick")
    assert code == 0
    assert out.strip().endswith(";")
    # a-block ids and b-block ids must not interleave in the newick string
    positions = {name: out.index(name) for name in ("a0", "a1", "b0", "b1")}
    a_span = sorted([positions["a0"], positions["a1"]])
    b_span = sorted([positions["b0"], positions["b1"]])
    assert a_span[1] < b_span[0] or b_span[1] < a_span[0]


def test_tree_json_has_matrix(tmp_path, capsys, rng):
    bundles = tmp_path / "bundles"
    bundles.mkdir()
    for i in range(3):
        save_bundle(make_bundle(rng, model_id=f"m{i}"), bundles / f"m{i}.depb")
    code, out, _ = run_cli(capsys, "tree", "--bundles", str(bundles))
    assert code == 0
    payload = json.loads(out)
    assert payload["ids"] == ["m0", "m1", "m2"]
    assert "newick" in payload and payload["linkage"] == "average"


def test_synth_cli(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "synth", "--seed", "3", "--sigmas", "0", "0.5",
                           "--out", str(tmp_path), "--n-probe", "8",
                           "--d-input", "8", "--d-embed", "3")
    assert code == 0
    payload = json.loads(out)
    assert (tmp_path / "family-3" / "base" / "bundle.depb").is_file()
    sigmas = [s["sigma"] for s in payload["scores"]]
    assert sigmas == [0.0, 0.5]
    assert payload["scores"][0]["score"] == pytest.approx(2.0, abs=1e-6)


def test_rank_empty_dir(tmp_path, capsys, rng):
    target_path = tmp_path / "t.depb"
    save_bundle(make_bundle(rng), target_path)
    empty = tmp_path / "empty"
    empty.mkdir()
    code, _, err = run_cli(capsys, "rank", "--target", str(target_path),
                           "--candidates", str(empty))
    assert code == 2
    assert "no .depb files" in err


def test_error_names_offending_file(tmp_path, capsys, rng):
    candidates = tmp_path / "pool"
    candidates.mkdir()
    (candidates / "broken.depb").write_bytes(b"garbage bytes here")
    target_path = tmp_path / "t.depb"
    save_bundle(make_bundle(rng), target_path)
    code, _, err = run_cli(capsys, "rank", "--target", str(target_path),
                           "--candidates", str(candidates))
    assert code == 2
    assert "broken.depb" in err


def test_missing_file_is_runtime_error(tmp_path, capsys):
    code, _, err = run_cli(capsys, "compare", "--a", str(tmp_path / "nope.depb"),
                           "--b", str(tmp_path / "nope.depb"))
    assert code == 1
    assert "error" in err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "depara", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "rank" in proc.stdout


def test_dep_threads_env(tmp_path, capsys, rng, monkeypatch):
    bundles = tmp_path / "bundles"
    bundles.mkdir()
    for i in range(3):
        save_bundle(make_bundle(rng, model_id=f"m{i}"), bundles / f"m{i}.depb")
    code, serial, _ = run_cli(capsys, "tree", "--bundles", str(bundles))
    monkeypatch.setenv("DEPARA_THREADS", "4")
    code2, threaded, _ = run_cli(capsys, "tree", "--bundles", str(bundles))
    assert code == code2 == 0
    assert serial == threaded
