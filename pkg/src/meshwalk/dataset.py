"""Dataset layout: a JSON manifest plus per-mesh label sidecars.

A dataset directory contains ``manifest.json`` and the mesh/label files it
points at (paths are relative to the manifest).  The manifest looks like::

    {
      "version": 1,
      "task": "classification",          # or "segmentation"
      "num_classes": 3,
      "class_names": ["sphere", "box", "torus"],
      "entries": [
        {"mesh": "train/sphere_000.off",
         "labels": "train/sphere_000.labels",
         "split": "train", "family": "sphere", "class_id": 0},
        ...
      ]
    }

Label sidecars are plain text.  A whole-mesh label is a single line
``class <id>``; per-vertex labels are one integer per line, one line per
vertex in file order.  Meshes are centered and scaled to the unit sphere
when loaded.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .mesh import Mesh, load_mesh, normalize_unit_sphere

MANIFEST_NAME = "manifest.json"
TASKS = ("classification", "segmentation")


@dataclass
class DatasetEntry:
    name: str
    mesh: Mesh
    split: str
    family: str = ""
    class_id: int = -1
    vertex_labels: np.ndarray = None


@dataclass
class Dataset:
    root: Path
    task: str
    num_classes: int
    class_names: list
    entries: list = field(default_factory=list)

    def split(self, which):
        return [e for e in self.entries if e.split == which]


def write_class_label(path, class_id):
    Path(path).write_text(f"class {int(class_id)}\n")


def write_vertex_labels(path, labels):
    lines = "\n".join(str(int(v)) for v in labels)
    Path(path).write_text(lines + "\n")


def read_labels(path):
    """Return ("class", id) or ("vertex", int array) from a sidecar file."""
    text = Path(path).read_text()
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty label file")
    if lines[0].startswith("class"):
        parts = lines[0].split()
        if len(parts) != 2 or len(lines) != 1:
            raise DataError(f"{path}: malformed class label")
        try:
            return "class", int(parts[1])
        except ValueError as exc:
            raise DataError(f"{path}: malformed class label") from exc
    try:
        return "vertex", np.array([int(ln) for ln in lines], dtype=np.int64)
    except ValueError as exc:
        raise DataError(f"{path}: malformed vertex labels: {exc}") from exc


def save_manifest(root, task, num_classes, class_names, entries):
    """entries: list of dicts with mesh/labels/split and metadata keys."""
    manifest = {
        "version": 1,
        "task": task,
        "num_classes": int(num_classes),
        "class_names": list(class_names),
        "entries": entries,
    }
    path = Path(root) / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_dataset(root, normalize=True):
    """Parse a manifest and eagerly load every mesh and label file."""
    root = Path(root)
    manifest_path = root / MANIFEST_NAME if root.is_dir() else root
    if not manifest_path.exists():
        raise DataError(f"{manifest_path}: manifest not found")
    root = manifest_path.parent
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{manifest_path}: invalid JSON: {exc}") from exc

    task = manifest.get("task")
    if task not in TASKS:
        raise DataError(f"{manifest_path}: task must be one of {TASKS}, "
                        f"got {task!r}")
    num_classes = int(manifest.get("num_classes", 0))
    if num_classes < 2:
        raise DataError(f"{manifest_path}: num_classes must be >= 2")
    class_names = list(manifest.get("class_names")
                       or [str(i) for i in range(num_classes)])

    ds = Dataset(root=root, task=task, num_classes=num_classes,
                 class_names=class_names)
    for raw in manifest.get("entries", []):
        mesh_rel = raw.get("mesh")
        if not mesh_rel:
            raise DataError(f"{manifest_path}: entry without a mesh path")
        mesh = load_mesh(root / mesh_rel)
        if normalize:
            mesh = normalize_unit_sphere(mesh)
        entry = DatasetEntry(
            name=Path(mesh_rel).stem,
            mesh=mesh,
            split=raw.get("split", "train"),
            family=raw.get("family", ""),
        )
        label_rel = raw.get("labels")
        if label_rel:
            kind, value = read_labels(root / label_rel)
            if kind == "class":
                entry.class_id = value
            else:
                if len(value) != mesh.vertex_count:
                    raise DataError(
                        f"{root / label_rel}: {len(value)} labels for "
                        f"{mesh.vertex_count} vertices")
                entry.vertex_labels = value
        if "class_id" in raw:
            entry.class_id = int(raw["class_id"])

        if task == "classification":
            if entry.class_id < 0:
                raise DataError(f"{manifest_path}: {mesh_rel} has no class")
            if entry.class_id >= num_classes:
                raise DataError(f"{manifest_path}: {mesh_rel} class "
                                f"{entry.class_id} out of range")
        else:
            if entry.vertex_labels is None:
                raise DataError(
                    f"{manifest_path}: {mesh_rel} has no vertex labels")
            bad = (entry.vertex_labels < 0) | (
                entry.vertex_labels >= num_classes)
            if bad.any():
                raise DataError(f"{manifest_path}: {mesh_rel} has vertex "
                                f"labels out of range")
        ds.entries.append(entry)
    if not ds.entries:
        raise DataError(f"{manifest_path}: dataset has no entries")
    return ds
