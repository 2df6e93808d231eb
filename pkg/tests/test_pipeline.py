import csv
from pathlib import Path

import numpy as np
import numpy.testing as npt
import pytest

from meshwalk.datagen import box, dumbbell, icosphere, torus
from meshwalk.dataset import Dataset, DatasetEntry
from meshwalk.errors import NumericalError
from meshwalk.mesh import Mesh, is_closed_manifold
from meshwalk.model import ModelConfig, Network, load_model
from meshwalk.nn import sha256_file
from meshwalk.pipeline import (TrainConfig, _grouped_batch_loss,
                               accumulate_walk_probabilities,
                               aggregate_vertex_scores, classify_mesh,
                               edge_accuracy, edge_ground_truth, entry_seeds,
                               evaluate_classification, evaluate_segmentation,
                               evaluate_task, perturb_triangulation,
                               predicted_edge_labels, resolve_walk_length,
                               rotation_sweep, segment_mesh, train,
                               walk_count_sweep, walk_length_sweep)


def small_net(num_classes=3, seed=0):
    cfg = ModelConfig(num_classes=num_classes, fc_dims=(8, 12),
                      gru_dims=(10, 10, 8))
    return Network(cfg, np.random.default_rng(seed))


def classification_dataset():
    shapes = [(icosphere(1), 0, "icosphere"), (box(3), 1, "box"),
              (torus(8, 6), 2, "torus")]
    entries = []
    for i, (mesh, cid, fam) in enumerate(shapes):
        for split in ("train", "train", "test"):
            entries.append(DatasetEntry(name=f"{fam}_{len(entries)}",
                                        mesh=mesh, split=split, family=fam,
                                        class_id=cid))
    return Dataset(root=Path("."), task="classification", num_classes=3,
                   class_names=["icosphere", "box", "torus"],
                   entries=entries)


def segmentation_dataset():
    mesh, labels = dumbbell(8, 8)
    entries = [DatasetEntry(name=f"dumbbell_{i}", mesh=mesh, split=split,
                            family="dumbbell", vertex_labels=labels)
               for i, split in enumerate(["train", "train", "test"])]
    return Dataset(root=Path("."), task="segmentation", num_classes=3,
                   class_names=["bottom", "neck", "top"], entries=entries)


# -- walk length resolution ---------------------------------------------------

def test_resolve_walk_length():
    assert resolve_walk_length(250, 0.0) == 100   # ceil(V / 2.5)
    assert resolve_walk_length(162, 0.0) == 65
    assert resolve_walk_length(100, None) == 40
    assert resolve_walk_length(100, 0.6) == 60
    assert resolve_walk_length(100, 0.05) == 5
    assert resolve_walk_length(3, 0.05) == 1      # fraction floors at one
    assert resolve_walk_length(100, 37) == 37     # >= 1 means literal steps


# -- vertex score aggregation -------------------------------------------------

def scores_by_hand(mesh, acc):
    """Scalar-loop restatement: own mass plus half the ring average."""
    nv, nc = acc.shape
    out = np.zeros((nv, nc))
    for v in range(nv):
        ring = mesh.adjacency[v]
        for c in range(nc):
            s = acc[v, c]
            if len(ring) > 0:
                total = 0.0
                for u in ring:
                    total += acc[u, c]
                s += total / (2.0 * len(ring))
            out[v, c] = s
    return out


def test_aggregate_vertex_scores_matches_loop(rng):
    mesh = icosphere(1)
    for _ in range(5):
        acc = rng.uniform(0.0, 2.0, size=(mesh.vertex_count, 4))
        scores, unresolved = aggregate_vertex_scores(mesh, acc)
        npt.assert_allclose(scores, scores_by_hand(mesh, acc), atol=1e-12)
        assert not unresolved.any()


def test_aggregate_flags_isolated_zero_regions(rng):
    # two disjoint triangles; wipe all mass from the second one
    verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0],
                      [5, 0, 0], [6, 0, 0], [5, 1, 0]], dtype=float)
    faces = np.array([[0, 1, 2], [3, 4, 5]], dtype=np.int64)
    mesh = Mesh.from_arrays(verts, faces)
    acc = rng.uniform(0.5, 1.0, size=(6, 2))
    acc[3:] = 0.0
    scores, unresolved = aggregate_vertex_scores(mesh, acc)
    npt.assert_array_equal(unresolved, [False] * 3 + [True] * 3)
    npt.assert_array_equal(scores[3:], 0.0)


def test_segment_mesh_falls_back_to_majority(rng):
    # one-step walks have an empty trailing half, so nothing accumulates
    net = small_net()
    mesh = icosphere(1)
    with pytest.warns(UserWarning, match="never visited"):
        labels, scores = segment_mesh(net, mesh, n_walks=2, rng=rng,
                                      walk_length=1)
    npt.assert_array_equal(scores, 0.0)
    assert set(np.unique(labels)) == {0}


def test_accumulate_only_counts_trailing_half(rng):
    net = small_net()
    mesh = icosphere(1)
    acc = accumulate_walk_probabilities(mesh, net, n_walks=3, rng=rng,
                                        walk_length=10)
    # 3 walks x 5 trailing steps, each step contributing a unit of mass
    assert acc.sum() == pytest.approx(15.0)
    assert (acc >= 0).all()


# -- edge labelling -----------------------------------------------------------

def triangle_mesh():
    verts = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
    faces = np.array([[0, 1, 2]], dtype=np.int64)
    return Mesh.from_arrays(verts, faces)


def test_edge_ground_truth_lower_index_wins():
    mesh = triangle_mesh()
    npt.assert_array_equal(mesh.edges, [[0, 1], [0, 2], [1, 2]])
    gt = edge_ground_truth(mesh, np.array([0, 1, 1]))
    npt.assert_array_equal(gt, [0, 0, 1])


def test_predicted_edge_labels_rules():
    mesh = triangle_mesh()
    labels = np.array([0, 1, 1])
    scores = np.array([[0.9, 0.1],    # v0 confident in label 0
                       [0.05, 0.95],  # v1 more confident in label 1
                       [0.1, 0.9]])   # v2 ties v0's own-label confidence
    pred = predicted_edge_labels(mesh, labels, scores)
    # (0,1): disagree, 0.9 < 0.95 -> v1 wins; (0,2): disagree, 0.9 >= 0.9
    # -> lower index wins; (1,2): agree
    npt.assert_array_equal(pred, [1, 0, 1])


def test_edge_accuracy_is_length_weighted():
    mesh = triangle_mesh()
    gt_vertex = np.array([0, 1, 1])
    labels = np.array([0, 1, 1])
    scores = np.array([[0.9, 0.1], [0.05, 0.95], [0.1, 0.9]])
    # predicted [1, 0, 1] vs ground truth [0, 0, 1]: only edges (0,2) and
    # (1,2) are right, with lengths 2 and sqrt(5) out of 3 + sqrt(5)
    expected = (2.0 + np.sqrt(5.0)) / (3.0 + np.sqrt(5.0))
    got = edge_accuracy(mesh, labels, scores, gt_vertex)
    assert got == pytest.approx(expected, abs=1e-12)


def test_edge_accuracy_perfect_prediction():
    mesh = triangle_mesh()
    labels = np.array([2, 2, 2])
    scores = np.zeros((3, 3))
    assert edge_accuracy(mesh, labels, scores, labels) == 1.0


# -- batching -----------------------------------------------------------------

def test_grouped_batch_loss_matches_singles(rng):
    net = small_net()
    walks = [(rng.normal(size=(7, 3)), 0),
             (rng.normal(size=(5, 3)), 2),
             (rng.normal(size=(7, 3)), 1),
             (rng.normal(size=(5, 3)), 0)]
    net.zero_grad()
    batched = _grouped_batch_loss(net, walks, "classification")
    grads = [t.grad.copy() for t in net.tensors()]

    net.zero_grad()
    singles = [net.classification_loss(f, l) for f, l in walks]
    npt.assert_allclose(batched, np.mean(singles), rtol=1e-12)
    for g, t in zip(grads, net.tensors()):
        npt.assert_allclose(g, t.grad / len(walks), rtol=1e-9, atol=1e-12)


def test_grouped_batch_loss_segmentation(rng):
    net = small_net()
    walks = [(rng.normal(size=(6, 3)), rng.integers(0, 3, size=6)),
             (rng.normal(size=(4, 3)), rng.integers(0, 3, size=4))]
    net.zero_grad()
    batched = _grouped_batch_loss(net, walks, "segmentation")
    singles = [net.segmentation_loss(f, l) for f, l in walks]
    npt.assert_allclose(batched, np.mean(singles), rtol=1e-12)


# -- inference ----------------------------------------------------------------

def test_classify_mesh_returns_distribution(rng):
    net = small_net(4)
    pred, probs = classify_mesh(net, icosphere(1), n_walks=3, rng=rng)
    assert 0 <= pred < 4
    assert probs.shape == (4,)
    assert probs.sum() == pytest.approx(1.0)
    assert pred == int(np.argmax(probs))


def test_entry_seeds_are_stable_and_distinct():
    a = [s.generate_state(2).tolist() for s in entry_seeds(7, 4)]
    b = [s.generate_state(2).tolist() for s in entry_seeds(7, 4)]
    assert a == b
    assert len({tuple(s) for s in a}) == 4
    c = [s.generate_state(2).tolist() for s in entry_seeds((7, 3), 4)]
    assert c != a


def test_evaluation_is_thread_invariant():
    net = small_net()
    entries = classification_dataset().entries
    acc1, preds1 = evaluate_classification(net, entries, 2, seed=5, threads=1)
    acc4, preds4 = evaluate_classification(net, entries, 2, seed=5, threads=4)
    assert acc1 == acc4
    assert preds1 == preds4
    again, preds_again = evaluate_classification(net, entries, 2, seed=5,
                                                 threads=1)
    assert preds_again == preds1


@pytest.mark.filterwarnings("ignore:.*never visited.*")
def test_segmentation_evaluation_thread_invariant():
    net = small_net()
    entries = segmentation_dataset().entries
    acc1, per1 = evaluate_segmentation(net, entries, 2, seed=9, threads=1)
    acc3, per3 = evaluate_segmentation(net, entries, 2, seed=9, threads=3)
    assert acc1 == acc3
    assert per1 == per3
    assert 0.0 <= acc1 <= 1.0


@pytest.mark.filterwarnings("ignore:.*never visited.*")
def test_evaluate_task_dispatch():
    net = small_net()
    cls = classification_dataset().entries[:2]
    seg = segmentation_dataset().entries[:2]
    acc, preds = evaluate_task(net, cls, "classification", 1, 0, 0.0, 1)
    assert len(preds) == 2 and all(isinstance(p, int) for p in preds)
    acc, per = evaluate_task(net, seg, "segmentation", 1, 0, 0.0, 1)
    assert len(per) == 2


# -- training -----------------------------------------------------------------

def test_train_smoke_and_metrics(tmp_path):
    ds = classification_dataset()
    cfg = TrainConfig(iterations=30, batch_walks=4, seed=1, log_every=10,
                      eval_every=30, eval_walks=1, rate_cycle=30)
    result = train(ds, ModelConfig(num_classes=3, fc_dims=(8, 12),
                                   gru_dims=(10, 10, 8)),
                   cfg, out_dir=tmp_path)
    assert len(result.metrics) == 3
    iters = [row[0] for row in result.metrics]
    assert iters == [10, 20, 30]
    assert all(np.isfinite(row[1]) for row in result.metrics)
    assert result.metrics[-1][3] != ""  # final row carries an evaluation

    with open(tmp_path / "metrics.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iteration", "loss", "rate", "eval_accuracy"]
    assert len(rows) == 4

    net, meta = load_model(result.checkpoint)
    assert meta["task"] == "classification"
    assert meta["iterations"] == 30
    assert meta["seed"] == 1
    assert net.param_count() == result.network.param_count()


def test_train_is_deterministic(tmp_path):
    ds = classification_dataset()
    cfg = TrainConfig(iterations=25, batch_walks=4, seed=3, log_every=25,
                      rate_cycle=25)
    model_cfg = ModelConfig(num_classes=3, fc_dims=(8, 12),
                            gru_dims=(10, 10, 8))
    train(ds, model_cfg, cfg, out_dir=tmp_path / "a")
    train(ds, model_cfg, cfg, out_dir=tmp_path / "b")
    assert sha256_file(tmp_path / "a" / "model.ckpt") == \
        sha256_file(tmp_path / "b" / "model.ckpt")

    cfg_other = TrainConfig(iterations=25, batch_walks=4, seed=4,
                            log_every=25, rate_cycle=25)
    train(ds, model_cfg, cfg_other, out_dir=tmp_path / "c")
    assert sha256_file(tmp_path / "a" / "model.ckpt") != \
        sha256_file(tmp_path / "c" / "model.ckpt")


def test_train_segmentation_smoke(tmp_path):
    ds = segmentation_dataset()
    cfg = TrainConfig(iterations=10, batch_walks=2, seed=0, log_every=5,
                      rotate=False, walk_length=0.3, rate_cycle=10)
    result = train(ds, ModelConfig(num_classes=3, fc_dims=(8, 12),
                                   gru_dims=(10, 10, 8)), cfg)
    assert len(result.metrics) == 2
    assert result.checkpoint is None


def test_train_requires_entries():
    ds = Dataset(root=Path("."), task="classification", num_classes=2,
                 class_names=["a", "b"], entries=[])
    with pytest.raises(NumericalError):
        train(ds, ModelConfig.tiny(2), TrainConfig(iterations=1))


# -- sweeps -------------------------------------------------------------------

def test_walk_count_sweep_shape_and_determinism():
    net = small_net()
    entries = classification_dataset().split("test")
    rows = walk_count_sweep(net, entries, (1, 2), seed=0)
    again = walk_count_sweep(net, entries, (1, 2), seed=0)
    assert rows == again
    assert [n for n, _ in rows] == [1, 2]
    assert all(0.0 <= acc <= 1.0 for _, acc in rows)


def test_walk_length_sweep_shape():
    net = small_net()
    entries = classification_dataset().split("test")
    rows = walk_length_sweep(net, entries, (0.1, 0.5), n_walks=1, seed=0)
    assert [f for f, _ in rows] == [0.1, 0.5]


def test_rotation_sweep_shape_and_determinism():
    net = small_net()
    entries = classification_dataset().split("test")
    base, accs = rotation_sweep(net, entries, n_walks=1, rotations=2, seed=0)
    base2, accs2 = rotation_sweep(net, entries, n_walks=1, rotations=2,
                                  seed=0)
    assert (base, accs) == (base2, accs2)
    assert len(accs) == 2


# -- triangulation perturbation -----------------------------------------------

def test_perturb_triangulation_preserves_structure(rng):
    mesh = icosphere(2)
    flipped = perturb_triangulation(mesh, rng)
    assert flipped.vertex_count == mesh.vertex_count
    assert flipped.face_count == mesh.face_count
    assert flipped.edge_count == mesh.edge_count
    assert is_closed_manifold(flipped)
    npt.assert_array_equal(flipped.vertices, mesh.vertices)
    assert not np.array_equal(flipped.faces, mesh.faces)
    # outward orientation survives the diagonal swaps
    tri = flipped.vertices[flipped.faces]
    assert np.linalg.det(tri).sum() > 0.0


def test_perturb_triangulation_deterministic():
    mesh = icosphere(1)
    a = perturb_triangulation(mesh, np.random.default_rng(5), flips=10)
    b = perturb_triangulation(mesh, np.random.default_rng(5), flips=10)
    npt.assert_array_equal(a.faces, b.faces)
