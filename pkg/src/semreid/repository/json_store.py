"""JSON-based storage for semreid artifacts."""

from __future__ import annotations

import json
from collections.abc import Iterable, Iterator
from pathlib import Path

from pydantic import BaseModel


def dump_document(document: BaseModel) -> str:
    """Canonical text of a document: sorted keys, two-space indent, trailing newline."""

    return json.dumps(document.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


class JsonArtifactStore:
    """Persist artifact documents as JSON / JSON-lines files under a directory."""

    def __init__(self, base_path: Path) -> None:
        self.base_path = base_path

    def path_for(self, name: str) -> Path:
        return self.base_path / name

    def save[M: BaseModel](self, name: str, document: M) -> Path:
        """Serialize ``document`` to ``name`` and return the path."""

        path = self.path_for(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dump_document(document), encoding="utf-8")
        return path

    def load[M: BaseModel](self, name: str, model: type[M]) -> M:
        """Load and validate a previously saved document."""

        return model.model_validate_json(self.path_for(name).read_bytes())

    def save_lines(self, name: str, documents: Iterable[BaseModel]) -> Path:
        """Write one compact JSON object per line."""

        path = self.path_for(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as handle:
            for document in documents:
                handle.write(json.dumps(document.model_dump(mode="json"), sort_keys=True))
                handle.write("\n")
        return path

    def iter_lines(self, name: str) -> Iterator[str]:
        """Yield the non-blank lines of a JSON-lines file."""

        with self.path_for(name).open(encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    yield line
