import json

import numpy as np
import numpy.testing as npt
import pytest

from meshwalk.datagen import classification_specs, generate_dataset
from meshwalk.dataset import (MANIFEST_NAME, load_dataset, read_labels,
                              save_manifest, write_class_label,
                              write_vertex_labels)
from meshwalk.errors import DataError

TET_OFF = """OFF
4 4 0
0 0 0
1 0 0
0 1 0
0 0 1
3 0 2 1
3 0 1 3
3 0 3 2
3 1 2 3
"""


def make_root(tmp_path, manifest, files):
    """Write a manifest dict plus {relpath: text} files under tmp_path."""
    for rel, text in files.items():
        path = tmp_path / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    (tmp_path / MANIFEST_NAME).write_text(json.dumps(manifest))
    return tmp_path


def base_manifest(**overrides):
    manifest = {
        "version": 1,
        "task": "classification",
        "num_classes": 2,
        "class_names": ["a", "b"],
        "entries": [{"mesh": "m.off", "labels": "m.labels",
                     "split": "train", "class_id": 0}],
    }
    manifest.update(overrides)
    return manifest


# -- label sidecars -----------------------------------------------------------

def test_class_label_round_trip(tmp_path):
    path = tmp_path / "x.labels"
    write_class_label(path, 7)
    assert read_labels(path) == ("class", 7)


def test_vertex_labels_round_trip(tmp_path):
    path = tmp_path / "x.labels"
    labels = np.array([0, 2, 1, 1, 0])
    write_vertex_labels(path, labels)
    kind, back = read_labels(path)
    assert kind == "vertex"
    npt.assert_array_equal(back, labels)


@pytest.mark.parametrize("text", ["", "class\n", "class 1 2\n",
                                  "class one\n", "0\nbanana\n",
                                  "class 0\nclass 1\n"])
def test_read_labels_rejects_malformed(tmp_path, text):
    path = tmp_path / "bad.labels"
    path.write_text(text)
    with pytest.raises(DataError):
        read_labels(path)


# -- manifest loading ---------------------------------------------------------

def test_load_generated_dataset(tmp_path):
    generate_dataset(tmp_path, classification_specs(5), seed=1,
                     task="classification")
    data = load_dataset(tmp_path)
    assert data.task == "classification"
    assert data.num_classes == 3
    assert data.class_names == ["icosphere", "box", "torus"]
    assert len(data.entries) == 15
    assert len(data.split("train")) == 12
    assert len(data.split("test")) == 3
    for entry in data.entries:
        assert 0 <= entry.class_id < 3
        # meshes arrive centered and scaled to the unit sphere
        radii = np.linalg.norm(entry.mesh.vertices, axis=1)
        assert radii.max() == pytest.approx(1.0)


def test_load_accepts_manifest_path_and_skips_normalize(tmp_path):
    generate_dataset(tmp_path, classification_specs(5), seed=1,
                     task="classification")
    via_file = load_dataset(tmp_path / MANIFEST_NAME)
    assert len(via_file.entries) == 15
    raw = load_dataset(tmp_path, normalize=False)
    radii = np.linalg.norm(raw.entries[0].mesh.vertices, axis=1)
    assert radii.max() > 1.0 - 1e-9  # unnormalized icospheres keep scale


def test_missing_manifest(tmp_path):
    with pytest.raises(DataError, match="manifest not found"):
        load_dataset(tmp_path / "nowhere")


def test_invalid_json(tmp_path):
    (tmp_path / MANIFEST_NAME).write_text("{not json")
    with pytest.raises(DataError, match="invalid JSON"):
        load_dataset(tmp_path)


def test_bad_task(tmp_path):
    make_root(tmp_path, base_manifest(task="detection"),
              {"m.off": TET_OFF, "m.labels": "class 0\n"})
    with pytest.raises(DataError, match="task"):
        load_dataset(tmp_path)


def test_num_classes_lower_bound(tmp_path):
    make_root(tmp_path, base_manifest(num_classes=1),
              {"m.off": TET_OFF, "m.labels": "class 0\n"})
    with pytest.raises(DataError, match="num_classes"):
        load_dataset(tmp_path)


def test_entry_without_mesh(tmp_path):
    manifest = base_manifest(entries=[{"split": "train", "class_id": 0}])
    make_root(tmp_path, manifest, {})
    with pytest.raises(DataError, match="without a mesh"):
        load_dataset(tmp_path)


def test_classification_requires_class(tmp_path):
    manifest = base_manifest(entries=[{"mesh": "m.off", "split": "train"}])
    make_root(tmp_path, manifest, {"m.off": TET_OFF})
    with pytest.raises(DataError, match="no class"):
        load_dataset(tmp_path)


def test_class_id_range_checked(tmp_path):
    manifest = base_manifest(
        entries=[{"mesh": "m.off", "split": "train", "class_id": 5}])
    make_root(tmp_path, manifest, {"m.off": TET_OFF})
    with pytest.raises(DataError, match="out of range"):
        load_dataset(tmp_path)


def test_segmentation_requires_vertex_labels(tmp_path):
    manifest = base_manifest(task="segmentation",
                             entries=[{"mesh": "m.off", "split": "train"}])
    make_root(tmp_path, manifest, {"m.off": TET_OFF})
    with pytest.raises(DataError, match="no vertex labels"):
        load_dataset(tmp_path)


def test_vertex_label_count_must_match(tmp_path):
    manifest = base_manifest(task="segmentation")
    make_root(tmp_path, manifest,
              {"m.off": TET_OFF, "m.labels": "0\n1\n1\n"})
    with pytest.raises(DataError, match="labels for"):
        load_dataset(tmp_path)


def test_vertex_label_range_checked(tmp_path):
    manifest = base_manifest(task="segmentation")
    make_root(tmp_path, manifest,
              {"m.off": TET_OFF, "m.labels": "0\n1\n2\n1\n"})
    with pytest.raises(DataError, match="out of range"):
        load_dataset(tmp_path)


def test_empty_dataset_rejected(tmp_path):
    make_root(tmp_path, base_manifest(entries=[]), {})
    with pytest.raises(DataError, match="no entries"):
        load_dataset(tmp_path)


def test_save_manifest_is_stable(tmp_path):
    entries = [{"mesh": "m.off", "split": "train", "class_id": 0}]
    p1 = save_manifest(tmp_path, "classification", 2, ["a", "b"], entries)
    text1 = p1.read_text()
    p2 = save_manifest(tmp_path, "classification", 2, ["a", "b"], entries)
    assert text1 == p2.read_text()
    data = json.loads(text1)
    assert data["version"] == 1
    assert data["num_classes"] == 2
