"""Manifest index: the client-side map from lattice blocks to chunk addresses."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Optional

from .codec import CodecConfig
from .lattice import BlockId, BlockKind, LatticeConfig, Strand, all_blocks
from .store import ChunkAddress, keccak256

MANIFEST_VERSION = 1


class ManifestError(ValueError):
    pass


@dataclass
class ManifestIndex:
    codec: CodecConfig
    entries: dict[BlockId, ChunkAddress]
    created_at: float = field(default_factory=time.time)
    source_digest: Optional[bytes] = None

    @property
    def lattice(self) -> LatticeConfig:
        return self.codec.lattice

    @property
    def original_length(self) -> int:
        return self.codec.original_length

    def validate(self) -> None:
        expected = set(all_blocks(self.lattice))
        got = set(self.entries)
        if got != expected:
            missing = sorted(expected - got)[:5]
            extra = sorted(got - expected)[:5]
            raise ManifestError(f"manifest entries do not match lattice (missing {missing}, extra {extra})")

    def to_json(self) -> dict:
        lat = self.lattice
        entries = []
        for b in sorted(self.entries):
            entries.append({
                "class": b.kind.value,
                "node": b.node,
                "strand": b.strand.value if b.strand else None,
                "address": self.entries[b].hex(),
            })
        doc = {
            "version": MANIFEST_VERSION,
            "alpha": lat.alpha,
            "s": lat.s,
            "p": lat.p,
            "block_size": self.codec.block_size,
            "original_length": self.codec.original_length,
            "n_data": lat.n_data,
            "created_at": self.created_at,
            "entries": entries,
        }
        if self.source_digest is not None:
            doc["source_digest"] = self.source_digest.hex()
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "ManifestIndex":
        try:
            if doc["version"] != MANIFEST_VERSION:
                raise ManifestError(f"unsupported manifest version {doc['version']}")
            lat = LatticeConfig(s=doc["s"], p=doc["p"], n_data=doc["n_data"], alpha=doc["alpha"])
            codec = CodecConfig(lat, doc["block_size"], doc["original_length"])
            entries = {}
            for e in doc["entries"]:
                kind = BlockKind(e["class"])
                strand = Strand(e["strand"]) if e.get("strand") else None
                entries[BlockId(kind, e["node"], strand)] = ChunkAddress.from_hex(e["address"])
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, ManifestError):
                raise
            raise ManifestError(f"malformed manifest: {e}") from e
        digest = doc.get("source_digest")
        m = cls(codec, entries, created_at=doc.get("created_at", 0.0),
                source_digest=bytes.fromhex(digest) if digest else None)
        m.validate()
        return m

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)

    @classmethod
    def loads(cls, text: str) -> "ManifestIndex":
        return cls.from_json(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.dumps())

    @classmethod
    def load(cls, path) -> "ManifestIndex":
        with open(path) as f:
            return cls.loads(f.read())


def file_digest(data: bytes) -> bytes:
    return keccak256(data)
