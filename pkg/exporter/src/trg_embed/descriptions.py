"""Loading and validating description fixture files.

A description file is a JSON list of objects with "label" and
"description" keys, one entry per joint or action class. Order matters
because downstream consumers index embedding rows by position.
"""

import json
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class DescriptionSet:
    """Ordered (label, description) pairs from one fixture file."""

    labels: tuple
    texts: tuple

    def __post_init__(self):
        if len(self.labels) != len(self.texts):
            raise ValueError(
                f"{len(self.labels)} labels but {len(self.texts)} descriptions")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate labels in description set")
        for label, text in zip(self.labels, self.texts):
            if not str(text).strip():
                raise ValueError(f"empty description for label {label!r}")

    def __len__(self):
        return len(self.labels)


def load_descriptions(path):
    """Read a description JSON file into a validated DescriptionSet."""
    entries = json.loads(Path(path).read_text())
    if not isinstance(entries, list) or not entries:
        raise ValueError(f"{path}: expected a non-empty JSON list")
    labels = []
    texts = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or "label" not in entry or "description" not in entry:
            raise ValueError(f"{path}: entry {i} needs label and description keys")
        labels.append(str(entry["label"]))
        texts.append(str(entry["description"]))
    return DescriptionSet(labels=tuple(labels), texts=tuple(texts))
