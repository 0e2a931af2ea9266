"""Labeled image sets, directory ingestion and per-class train/test splits.

Dataset layout is ``root/<class-name>/<image>.ppm``; labels follow the
sorted class-directory names. A split manifest is plain text::

    seed=<n>
    train<TAB>relative/path.ppm<TAB>label
    test<TAB>relative/path.ppm<TAB>label
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .geometry import fit_to_input
from .image import Image, to_input
from .ppm import read_ppm, write_ppm


class DatasetError(ValueError):
    pass


@dataclass
class Item:
    ref: str
    label: int
    image: Optional[Image] = field(default=None, repr=False, compare=False)


@dataclass
class LabeledSet:
    items: list[Item]
    classes: list[str]
    root: Optional[Path] = None
    # (w, h) that ``arrays`` fits every image to; None keeps native sizes
    size: Optional[tuple[int, int]] = None

    def __post_init__(self):
        if len(self.classes) < 2:
            raise DatasetError("a labeled set needs at least 2 classes")
        for it in self.items:
            if not 0 <= it.label < len(self.classes):
                raise DatasetError(f"{it.ref}: label {it.label} outside [0, {len(self.classes)})")

    def __len__(self) -> int:
        return len(self.items)

    def image(self, item: Item) -> Image:
        if item.image is not None:
            return item.image
        if self.root is None:
            raise DatasetError(f"{item.ref}: no pixels in memory and no dataset root")
        return read_ppm(self.root / item.ref)

    def labels(self) -> np.ndarray:
        return np.array([it.label for it in self.items], dtype=np.int64)

    def subset(self, refs) -> "LabeledSet":
        by_ref = {it.ref: it for it in self.items}
        try:
            items = [by_ref[r] for r in refs]
        except KeyError as exc:
            raise DatasetError(f"unknown item {exc.args[0]!r}") from None
        return LabeledSet(items, self.classes, self.root, self.size)

    def arrays(self, transform=None) -> tuple[np.ndarray, np.ndarray]:
        """NHWC float inputs and integer labels; ``transform`` maps Image -> Image first."""
        imgs = []
        for it in self.items:
            img = self.image(it)
            if transform is not None:
                img = transform(img)
            if self.size is not None and (img.w, img.h) != self.size:
                img = fit_to_input(img, *self.size)
            imgs.append(to_input(img.pixels))
        if not imgs:
            raise DatasetError("empty labeled set")
        return np.stack(imgs), self.labels()


def load_dataset(root) -> LabeledSet:
    """Index ``root/<class>/<image>.ppm``; images stay on disk until needed."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a directory")
    classes = sorted(p.name for p in root.iterdir() if p.is_dir())
    items = []
    for label, name in enumerate(classes):
        files = sorted(p.name for p in (root / name).iterdir() if p.suffix.lower() == ".ppm")
        if not files:
            raise DatasetError(f"class directory {name!r} has no .ppm images")
        items.extend(Item(f"{name}/{f}", label) for f in files)
    if len(classes) < 2:
        raise DatasetError(f"need at least 2 class directories under {root}, found {len(classes)}")
    return LabeledSet(items, classes, root)


def write_dataset(data: LabeledSet, root) -> None:
    root = Path(root)
    for it in data.items:
        path = root / it.ref
        path.parent.mkdir(parents=True, exist_ok=True)
        write_ppm(path, data.image(it))


@dataclass
class SplitManifest:
    train: list[Item]
    test: list[Item]
    seed: int

    def to_text(self) -> str:
        lines = [f"seed={self.seed}"]
        lines += [f"train\t{it.ref}\t{it.label}" for it in self.train]
        lines += [f"test\t{it.ref}\t{it.label}" for it in self.test]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "SplitManifest":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("seed="):
            raise DatasetError("manifest must start with a 'seed=<n>' line")
        seed = int(lines[0][5:])
        parts: dict[str, list[Item]] = {"train": [], "test": []}
        for n, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 3 or fields[0] not in parts:
                raise DatasetError(f"manifest line {n}: expected 'train|test<TAB>path<TAB>label'")
            parts[fields[0]].append(Item(fields[1], int(fields[2])))
        return cls(parts["train"], parts["test"], seed)

    @classmethod
    def load(cls, path) -> "SplitManifest":
        return cls.from_text(Path(path).read_text())

    def subsets(self, data: LabeledSet) -> tuple[LabeledSet, LabeledSet]:
        return data.subset(it.ref for it in self.train), data.subset(it.ref for it in self.test)


def make_split(data: LabeledSet, per_class_train: int, seed: int) -> SplitManifest:
    """Sample exactly ``per_class_train`` training items per class; the rest is test."""
    if per_class_train < 1:
        raise DatasetError("per-class training count must be >= 1")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for label, name in enumerate(data.classes):
        members = [it for it in data.items if it.label == label]
        if len(members) < per_class_train:
            raise DatasetError(
                f"class {name!r} has {len(members)} images, fewer than {per_class_train} requested"
            )
        chosen = set(rng.choice(len(members), size=per_class_train, replace=False).tolist())
        for i, it in enumerate(members):
            (train if i in chosen else test).append(Item(it.ref, it.label))
    return SplitManifest(train, test, seed)
