"""Training loop, inference, evaluation metrics and ablation sweeps.

Training samples a batch of walks per iteration, backpropagates the mean
per-walk loss and applies one Adam update on a cyclic learning rate.
Classification batches draw every walk from a distinct training mesh when
possible; segmentation batches draw several walks from each sampled mesh
(4 by default), since each walk only supervises the vertices it visits.
Walks of equal length are stacked and pushed through the network together;
per-walk semantics (instance-norm statistics, losses) are unaffected by
the stacking.

Classification inference averages final-step class probabilities over a
number of independent walks.  Segmentation inference accumulates per-step
probabilities onto the visited vertices (second half of each walk only) and
assigns each vertex the argmax of its own accumulated mass plus a
half-weighted share of its neighbours' (see ``aggregate_vertex_scores``).
"""

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import NumericalError
from .mesh import Mesh, random_rotation, rotation_matrix
from .model import Network, save_model, second_half_start
from .nn import Adam, CyclicSchedule, softmax
from .walker import default_walk_length, features_from_positions, generate_walk

_EVAL_STREAM = 0xE7A1  # keeps evaluation RNG separate from training RNG


@dataclass
class TrainConfig:
    iterations: int = 20000
    batch_walks: int = 32
    walks_per_mesh: int = 0      # 0 -> 1 (classification) / 4 (segmentation)
    walk_length: float = 0.0     # 0 -> ceil(V/2.5); (0,1) -> fraction of V
    seed: int = 0
    min_rate: float = 1e-6
    max_rate: float = 5e-4
    rate_cycle: int = 20000
    rotate: bool = True
    log_every: int = 100
    eval_every: int = 0          # 0 -> no mid-training evaluation
    eval_walks: int = 8
    threads: int = 1


@dataclass
class TrainResult:
    network: Network
    metrics: list = field(default_factory=list)
    checkpoint: Path = None


def resolve_walk_length(vertex_count, walk_length):
    """Map the walk_length setting to a concrete step count (>= 1)."""
    if walk_length is None or walk_length <= 0:
        return default_walk_length(vertex_count)
    if walk_length < 1:
        return max(1, math.ceil(walk_length * vertex_count))
    return int(round(walk_length))


def _sample_walk(entry, walk_length, rng, rotate, task):
    mesh = entry.mesh
    length = resolve_walk_length(mesh.vertex_count, walk_length)
    start = int(rng.integers(mesh.vertex_count))
    walk = generate_walk(mesh, start, length, rng)
    feats = features_from_positions(mesh.vertices, walk.vertices)
    if rotate:
        rot = rotation_matrix(*rng.uniform(0.0, 2.0 * np.pi, size=3))
        feats = feats @ rot.T
    if task == "classification":
        label = entry.class_id
    else:
        label = entry.vertex_labels[walk.vertices]
    return feats, label


def _grouped_batch_loss(network, walks, task):
    """Mean per-walk loss over the batch; gradients match (scaled 1/n)."""
    n = len(walks)
    groups = {}
    for feats, label in walks:
        groups.setdefault(len(feats), []).append((feats, label))
    total = 0.0
    for length in sorted(groups):
        members = groups[length]
        feats = np.stack([f for f, _ in members], axis=1)
        if task == "classification":
            labels = np.array([lab for _, lab in members], dtype=np.int64)
            total += network.classification_loss_batch(
                feats, labels, grad_scale=1.0 / n)
        else:
            labels = np.stack([lab for _, lab in members], axis=1)
            total += network.segmentation_loss_batch(
                feats, labels, grad_scale=1.0 / n)
    return total / n


def train(dataset, model_config, cfg, out_dir=None, on_progress=None):
    """Train a fresh network on the dataset's train split.

    Writes ``metrics.csv`` and ``model.ckpt`` under out_dir when given.
    With a fixed seed (and threads=1, the default) the resulting checkpoint
    is bit-identical across runs.
    """
    entries = dataset.split("train")
    test_entries = dataset.split("test")
    if not entries:
        raise NumericalError("dataset has no training entries")

    rng = np.random.default_rng(cfg.seed)
    network = Network(model_config, rng)
    adam = Adam(network.tensors())
    schedule = CyclicSchedule(cfg.min_rate, cfg.max_rate, cfg.rate_cycle)

    out_dir = Path(out_dir) if out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    metrics = []
    csv_fh = open(out_dir / "metrics.csv", "w", newline="") if out_dir else None
    writer = None
    if csv_fh:
        writer = csv.writer(csv_fh)
        writer.writerow(["iteration", "loss", "rate", "eval_accuracy"])

    n_train = len(entries)
    per_mesh = cfg.walks_per_mesh
    if per_mesh <= 0:
        per_mesh = 4 if dataset.task == "segmentation" else 1
    per_mesh = min(per_mesh, cfg.batch_walks)
    n_meshes = max(1, cfg.batch_walks // per_mesh)
    window = []
    try:
        for it in range(cfg.iterations):
            rate = schedule.rate(it)
            if n_meshes <= n_train:
                picks = rng.choice(n_train, size=n_meshes, replace=False)
            else:
                picks = rng.integers(n_train, size=n_meshes)
            walks = [_sample_walk(entries[int(i)], cfg.walk_length, rng,
                                  cfg.rotate, dataset.task)
                     for i in picks for _ in range(per_mesh)]
            network.zero_grad()
            loss = _grouped_batch_loss(network, walks, dataset.task)
            if not math.isfinite(loss):
                raise NumericalError(
                    f"non-finite loss {loss!r} at iteration {it}")
            adam.step(rate)
            window.append(loss)

            last = it + 1 == cfg.iterations
            if (it + 1) % cfg.log_every == 0 or last:
                acc = ""
                if test_entries and cfg.eval_every and (
                        (it + 1) % cfg.eval_every == 0 or last):
                    acc = evaluate_task(network, test_entries, dataset.task,
                                    cfg.eval_walks, (cfg.seed, it + 1),
                                    cfg.walk_length, cfg.threads)[0]
                row = (it + 1, float(np.mean(window)), rate, acc)
                metrics.append(row)
                window = []
                if writer:
                    writer.writerow(row)
                    csv_fh.flush()
                if on_progress:
                    on_progress(row)
    finally:
        if csv_fh:
            csv_fh.close()

    ckpt = None
    if out_dir:
        ckpt = out_dir / "model.ckpt"
        save_model(ckpt, network,
                   meta={"task": dataset.task,
                         "class_names": dataset.class_names,
                         "iterations": cfg.iterations,
                         "seed": cfg.seed})
    return TrainResult(network=network, metrics=metrics, checkpoint=ckpt)


# -- classification ----------------------------------------------------------

def classify_mesh(network, mesh, n_walks, rng, walk_length=0.0):
    """Average final-step class probabilities over n independent walks."""
    length = resolve_walk_length(mesh.vertex_count, walk_length)
    feats = []
    for _ in range(n_walks):
        start = int(rng.integers(mesh.vertex_count))
        walk = generate_walk(mesh, start, length, rng)
        feats.append(features_from_positions(mesh.vertices, walk.vertices))
    stacked = np.stack(feats, axis=1)
    logits = network.logits(stacked)
    probs = softmax(logits[-1]).mean(axis=0)
    return int(np.argmax(probs)), probs


def entry_seeds(seed, count):
    seed = seed if isinstance(seed, (tuple, list)) else (seed,)
    base = np.random.SeedSequence([int(s) for s in seed] + [_EVAL_STREAM])
    return base.spawn(count)


def evaluate_classification(network, entries, n_walks, seed,
                            walk_length=0.0, threads=1):
    """Accuracy over entries; deterministic for a given seed regardless of
    thread count (each entry owns a spawned RNG, results reduce in order)."""
    seeds = entry_seeds(seed, len(entries))

    def one(i):
        pred, _ = classify_mesh(network, entries[i].mesh, n_walks,
                                np.random.default_rng(seeds[i]), walk_length)
        return pred

    preds = _ordered_map(one, len(entries), threads)
    hits = sum(1 for e, p in zip(entries, preds) if p == e.class_id)
    return hits / len(entries), preds


# -- segmentation ------------------------------------------------------------

def accumulate_walk_probabilities(mesh, network, n_walks, rng,
                                  walk_length=0.0):
    """Sum per-step class probabilities onto visited vertices.

    Only steps in the second half of each walk contribute (earlier steps
    see too little context to be trusted).  Returns a (V, C) matrix of
    unnormalized probability mass.
    """
    length = resolve_walk_length(mesh.vertex_count, walk_length)
    num_classes = network.config.num_classes
    acc = np.zeros((mesh.vertex_count, num_classes))
    feats, seqs = [], []
    for _ in range(n_walks):
        start = int(rng.integers(mesh.vertex_count))
        walk = generate_walk(mesh, start, length, rng)
        feats.append(features_from_positions(mesh.vertices, walk.vertices))
        seqs.append(walk.vertices)
    stacked = np.stack(feats, axis=1)
    probs = softmax(network.logits(stacked))
    start_step = second_half_start(length)
    for i, seq in enumerate(seqs):
        np.add.at(acc, seq[start_step:], probs[start_step:, i, :])
    return acc


def aggregate_vertex_scores(mesh, acc):
    """Blend each vertex's mass with half the average of its ring.

    score(v) = acc(v) + sum_ring(acc) / (2 * ring size).  Vertices whose
    score is identically zero (never visited, no visited neighbour) are
    flagged in the returned mask.
    """
    scores = acc.copy()
    for v, nbrs in enumerate(mesh.adjacency):
        if nbrs.size:
            scores[v] += acc[nbrs].sum(axis=0) / (2.0 * nbrs.size)
    unresolved = ~scores.any(axis=1)
    return scores, unresolved


def segment_mesh(network, mesh, n_walks, rng, walk_length=0.0):
    """Per-vertex labels plus the score matrix used to assign them."""
    acc = accumulate_walk_probabilities(mesh, network, n_walks, rng,
                                        walk_length)
    scores, unresolved = aggregate_vertex_scores(mesh, acc)
    labels = np.argmax(scores, axis=1)
    if unresolved.any():
        total = acc.sum(axis=0)
        majority = int(np.argmax(total)) if total.any() else 0
        labels[unresolved] = majority
        warnings.warn(
            f"{int(unresolved.sum())} vertices were never visited and have "
            f"no visited neighbours; assigned majority label {majority}",
            stacklevel=2)
    return labels, scores


def edge_ground_truth(mesh, vertex_labels):
    """Edge labels from vertex labels; ties go to the lower-index endpoint.

    Edges are stored (u, v) with u < v, so this is simply the label of the
    first endpoint (identical to either endpoint when they agree).
    """
    return vertex_labels[mesh.edges[:, 0]]


def predicted_edge_labels(mesh, labels, scores):
    """Edge labels from predicted vertex labels.

    Agreeing endpoints give the shared label; otherwise the endpoint more
    confident in its own label wins (score ties go to the lower index).
    """
    a = mesh.edges[:, 0]
    b = mesh.edges[:, 1]
    la, lb = labels[a], labels[b]
    sa = scores[a, la]
    sb = scores[b, lb]
    return np.where(la == lb, la, np.where(sa >= sb, la, lb))


def edge_accuracy(mesh, labels, scores, gt_vertex_labels):
    """Length-weighted fraction of edges whose predicted label is correct."""
    gt = edge_ground_truth(mesh, gt_vertex_labels)
    pred = predicted_edge_labels(mesh, labels, scores)
    weights = mesh.edge_lengths
    return float((weights * (pred == gt)).sum() / weights.sum())


def evaluate_segmentation(network, entries, n_walks, seed,
                          walk_length=0.0, threads=1):
    """Mean edge accuracy over entries (same determinism contract as
    evaluate_classification)."""
    seeds = entry_seeds(seed, len(entries))

    def one(i):
        entry = entries[i]
        labels, scores = segment_mesh(network, entry.mesh, n_walks,
                                      np.random.default_rng(seeds[i]),
                                      walk_length)
        return edge_accuracy(entry.mesh, labels, scores, entry.vertex_labels)

    accs = _ordered_map(one, len(entries), threads)
    return float(np.mean(accs)), accs


def evaluate_task(network, entries, task, n_walks, seed, walk_length, threads):
    if task == "classification":
        return evaluate_classification(network, entries, n_walks, seed,
                                       walk_length, threads)
    return evaluate_segmentation(network, entries, n_walks, seed,
                                 walk_length, threads)


def _ordered_map(fn, count, threads):
    if threads <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


# -- ablations ---------------------------------------------------------------

def walk_count_sweep(network, entries, walk_counts, seed, walk_length=0.0,
                     threads=1):
    """Accuracy as a function of the number of inference walks."""
    rows = []
    for k, n in enumerate(walk_counts):
        acc, _ = evaluate_classification(network, entries, n,
                                         (seed, 1000 + k), walk_length,
                                         threads)
        rows.append((int(n), acc))
    return rows


def walk_length_sweep(network, entries, length_fractions, n_walks, seed,
                      threads=1):
    """Accuracy as a function of walk length (fraction of vertex count)."""
    rows = []
    for k, frac in enumerate(length_fractions):
        acc, _ = evaluate_classification(network, entries, n_walks,
                                         (seed, 2000 + k), float(frac),
                                         threads)
        rows.append((float(frac), acc))
    return rows


def rotation_sweep(network, entries, n_walks, rotations, seed,
                   walk_length=0.0, threads=1):
    """Accuracy on the entries under a series of random rotations.

    Returns (unrotated accuracy, list of rotated accuracies).  Every
    rotation pass redraws an independent random orientation per mesh.
    """
    base, _ = evaluate_classification(network, entries, n_walks,
                                      (seed, 3000), walk_length, threads)
    accs = []
    for k in range(rotations):
        rng = np.random.default_rng(
            np.random.SeedSequence([int(seed), 0x307A7E, k]))
        rotated = [replace(e, mesh=random_rotation(e.mesh, rng))
                   for e in entries]
        acc, _ = evaluate_classification(network, rotated, n_walks,
                                         (seed, 3001 + k), walk_length,
                                         threads)
        accs.append(acc)
    return base, accs


def ablation_sweep(network, entries, seed=0,
                   walk_counts=(1, 2, 4, 8, 16, 32),
                   length_fractions=(0.05, 0.1, 0.2, 0.4, 0.6),
                   n_walks=8, threads=1):
    """The stock sweep bundle: inference-walk count and walk length."""
    return {
        "walks": walk_count_sweep(network, entries, walk_counts, seed,
                                  threads=threads),
        "lengths": walk_length_sweep(network, entries, length_fractions,
                                     n_walks, seed, threads=threads),
    }


# -- triangulation perturbation ----------------------------------------------

def perturb_triangulation(mesh, rng, flips=None):
    """Randomly flip interior edges, preserving orientation and manifoldness.

    Each attempt picks an edge with exactly two incident faces and replaces
    it by the opposite diagonal of the quad, skipping flips that would
    duplicate an existing edge or create a degenerate face.
    """
    faces = [tuple(f) for f in mesh.faces]
    attempts = flips if flips is not None else max(1, mesh.edge_count // 5)
    verts = mesh.vertices

    for _ in range(attempts):
        edge_faces = {}
        for fi, f in enumerate(faces):
            for k in range(3):
                a, b = f[k], f[(k + 1) % 3]
                key = (a, b) if a < b else (b, a)
                edge_faces.setdefault(key, []).append(fi)
        keys = sorted(edge_faces)
        key = keys[int(rng.integers(len(keys)))]
        incident = edge_faces[key]
        if len(incident) != 2:
            continue
        f1, f2 = faces[incident[0]], faces[incident[1]]
        # Orient the edge as it appears in f1.
        for k in range(3):
            if {f1[k], f1[(k + 1) % 3]} == set(key):
                a, b = f1[k], f1[(k + 1) % 3]
                break
        c = next(v for v in f1 if v not in key)
        d = next(v for v in f2 if v not in key)
        if c == d:
            continue
        cd = (c, d) if c < d else (d, c)
        if cd in edge_faces:
            continue
        area1 = np.linalg.norm(np.cross(verts[a] - verts[c],
                                        verts[d] - verts[c]))
        area2 = np.linalg.norm(np.cross(verts[b] - verts[d],
                                        verts[c] - verts[d]))
        if area1 < 1e-12 or area2 < 1e-12:
            continue
        faces[incident[0]] = (c, a, d)
        faces[incident[1]] = (d, b, c)

    return Mesh.from_arrays(mesh.vertices,
                            np.array(faces, dtype=np.int64))
