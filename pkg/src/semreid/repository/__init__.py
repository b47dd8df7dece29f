"""Persistence adapters for semreid artifacts."""

from .json_store import JsonArtifactStore, dump_document

__all__ = ["JsonArtifactStore", "dump_document"]
