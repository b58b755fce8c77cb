import numpy as np
import pytest

from depara import (
    DeparaError,
    RelevanceSet,
    pr_curve,
    precision_at_k,
    rank_by_score,
    recall_at_k,
    sim_accuracy_correlation,
    task_tree,
)


def fixture_ranking():
    # 6 candidates ranked a > b > c > d > e > f
    return rank_by_score("q", [("a", 0.9), ("b", 0.8), ("c", 0.7),
                               ("d", 0.6), ("e", 0.5), ("f", 0.4)])


def test_precision_top1():
    table = fixture_ranking()
    rel = RelevanceSet("q", frozenset(["a"]))
    assert precision_at_k(table, rel, 1) == 1.0


def test_precision_four_of_five():
    # relevant {a,b,c,d,f}: top-5 = a..e hits 4 -> P@5 = R@5 = 0.8
    table = fixture_ranking()
    rel = RelevanceSet("q", frozenset(["a", "b", "c", "d", "f"]))
    assert precision_at_k(table, rel, 5) == 0.8
    assert recall_at_k(table, rel, 5) == 0.8


def test_precision_no_hits():
    table = fixture_ranking()
    rel = RelevanceSet("q", frozenset(["zzz"]))
    assert precision_at_k(table, rel, 3) == 0.0
    assert recall_at_k(table, rel, 3) == 0.0


def test_recall_full_retrieval():
    table = fixture_ranking()
    rel = RelevanceSet("q", frozenset(["b", "f"]))
    assert recall_at_k(table, rel, 6) == 1.0


def test_k_out_of_range():
    table = fixture_ranking()
    rel = RelevanceSet("q", frozenset(["a"]))
    for k in (0, 7, -1):
        with pytest.raises(DeparaError, match="out of range"):
            precision_at_k(table, rel, k)


def test_hit_counts_agree():
    table = fixture_ranking()
    rel = RelevanceSet("q", frozenset(["a", "c", "e"]))
    for k in range(1, 7):
        p = precision_at_k(table, rel, k)
        r = recall_at_k(table, rel, k)
        assert p * k == pytest.approx(r * len(rel.relevant_ids))
        assert float(p * k).is_integer()


def test_precision_invariant_under_relabeling():
    table = fixture_ranking()
    rel = RelevanceSet("q", frozenset(["a", "d"]))
    renamed = rank_by_score("q", [(f"x-{e.candidate_id}", e.score) for e in table.entries])
    rel_renamed = RelevanceSet("q", frozenset(["x-a", "x-d"]))
    for k in range(1, 7):
        assert precision_at_k(table, rel, k) == precision_at_k(renamed, rel_renamed, k)


def test_relevance_set_must_be_non_empty():
    with pytest.raises(DeparaError, match="empty"):
        RelevanceSet("q", frozenset())


def test_pr_curve_all_relevant():
    table = fixture_ranking()
    rel = RelevanceSet("q", frozenset("abcdef"))
    curve = pr_curve([table], [rel])
    assert all(p.precision == 1.0 for p in curve.points)
    assert curve.points[-1].recall == 1.0


def test_pr_curve_hand_computed():
    # relevant {a, c, f}: hits by K = 1,1,2,2,2,3
    table = fixture_ranking()
    rel = RelevanceSet("q", frozenset(["a", "c", "f"]))
    curve = pr_curve([table], [rel])
    hits = [1, 1, 2, 2, 2, 3]
    for point, h in zip(curve.points, hits):
        assert point.precision == pytest.approx(h / point.k)
        assert point.recall == pytest.approx(h / 3)
    recalls = [p.recall for p in curve.points]
    assert recalls == sorted(recalls)


def test_pr_curve_macro_average():
    t1 = rank_by_score("q1", [("a", 0.9), ("b", 0.8)])
    t2 = rank_by_score("q2", [("a", 0.9), ("b", 0.8)])
    rels = [RelevanceSet("q1", frozenset(["a"])), RelevanceSet("q2", frozenset(["b"]))]
    curve = pr_curve([t1, t2], rels)
    assert curve.points[0].precision == pytest.approx(0.5)  # one query hits at K=1
    assert curve.points[1].recall == pytest.approx(1.0)


def test_pr_curve_missing_query():
    table = fixture_ranking()
    with pytest.raises(DeparaError, match="missing relevance set for query 'q'"):
        pr_curve([table], [RelevanceSet("other", frozenset(["a"]))])


def test_pr_curve_csv_and_svg():
    table = fixture_ranking()
    rel = RelevanceSet("q", frozenset(["a", "c", "f"]))
    curve = pr_curve([table], [rel])
    csv_text = curve.to_csv()
    assert csv_text.splitlines()[0] == "k,precision,recall"
    assert len(csv_text.splitlines()) == 7
    svg = curve.to_svg()
    assert svg.startswith("<svg") and "polyline" in svg and svg.rstrip().endswith("</svg>")


def test_sim_accuracy_correlation_monotone():
    assert sim_accuracy_correlation([0.1, 0.2, 0.3, 0.4], [10, 20, 30, 40]) == 1.0
    assert sim_accuracy_correlation([0.1, 0.2, 0.3, 0.4], [40, 30, 20, 10]) == -1.0


def test_sim_accuracy_correlation_fixture():
    assert sim_accuracy_correlation([1, 2, 3, 4], [2, 1, 3, 4]) == 0.8


def test_sim_accuracy_correlation_validation():
    with pytest.raises(DeparaError, match="at least 3"):
        sim_accuracy_correlation([1, 2], [1, 2])
    with pytest.raises(DeparaError, match="degenerate"):
        sim_accuracy_correlation([1.0, 1.0, 1.0], [1, 2, 3])


def block_matrix(lam=1.0):
    # two obvious blocks {t0, t1} and {t2, t3}
    m = np.full((4, 4), 0.1)
    m[0, 1] = m[1, 0] = 0.9
    m[2, 3] = m[3, 2] = 0.9
    np.fill_diagonal(m, 1.0 + lam)
    return m


def test_task_tree_blocks_merge_first():
    ids = ["t0", "t1", "t2", "t3"]
    tree = task_tree(block_matrix(), ids, lam=1.0)
    root = tree.root
    assert not root.is_leaf
    sides = []
    for child in root.children:
        assert not child.is_leaf
        sides.append({leaf.id for leaf in child.children})
    assert {frozenset(s) for s in sides} == {frozenset({"t0", "t1"}), frozenset({"t2", "t3"})}
    newick = tree.to_newick()
    assert newick.endswith(";")
    assert ("t0" in newick.split("t2")[0]) == ("t1" in newick.split("t2")[0])


def test_task_tree_identical_pair_merges_at_zero():
    # t0 and t1 identical graphs: score 2 with lambda 1 -> distance 0
    m = np.array([
        [2.0, 2.0, 0.2],
        [2.0, 2.0, 0.2],
        [0.2, 0.2, 2.0],
    ])
    tree = task_tree(m, ["t0", "t1", "t2"], lam=1.0)
    first = tree.root.children[0]
    assert {leaf.id for leaf in first.children} == {"t0", "t1"}
    assert first.height == 0.0


def test_task_tree_single_task():
    tree = task_tree(np.array([[2.0]]), ["only"], lam=1.0)
    assert tree.root.is_leaf and tree.root.id == "only"
    assert tree.to_newick() == "only;"


def test_task_tree_heights_non_decreasing():
    rng = np.random.default_rng(11)
    raw = rng.uniform(-1, 1, size=(6, 6))
    m = (raw + raw.T) / 2
    np.fill_diagonal(m, 2.0)
    tree = task_tree(m, [f"t{i}" for i in range(6)], lam=1.0)

    def walk(node, parent_height):
        assert node.height <= parent_height + 1e-15
        for child in node.children:
            walk(child, node.height)

    walk(tree.root, float("inf"))


def test_task_tree_permutation_invariant():
    ids = ["t0", "t1", "t2", "t3"]
    m = block_matrix()
    perm = [2, 0, 3, 1]
    permuted = m[np.ix_(perm, perm)]
    tree_a = task_tree(m, ids, lam=1.0)
    tree_b = task_tree(permuted, [ids[i] for i in perm], lam=1.0)
    assert tree_a.to_newick() == tree_b.to_newick()


def test_task_tree_rejects_asymmetric():
    m = block_matrix()
    m[0, 1] += 1e-6
    with pytest.raises(DeparaError, match="asymmetric"):
        task_tree(m, ["a", "b", "c", "d"], lam=1.0)


def test_dendrogram_json_metadata():
    d = task_tree(block_matrix(), ["a", "b", "c", "d"], lam=1.0).to_dict()
    assert d["linkage"] == "average"
    assert d["distance"] == "1 - score / (1 + lambda)"
    assert d["lambda"] == 1.0
