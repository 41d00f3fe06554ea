"""Alpha entanglement codes over a content-addressed chunk store."""

from .codec import Block, CodecConfig, encode, reassemble, split
from .lattice import BlockId, LatticeConfig, Strand
from .manifest import ManifestIndex
from .repair import FetchReport, RepairConfig, Strategy, download, entangle, repair_block
from .store import (
    ChunkAddress,
    DiskStore,
    FailureInjectingStore,
    FailurePolicy,
    GatewayStore,
    MemoryStore,
    address_of,
)

__all__ = [
    "Block", "BlockId", "ChunkAddress", "CodecConfig", "DiskStore", "FailureInjectingStore",
    "FailurePolicy", "FetchReport", "GatewayStore", "LatticeConfig", "ManifestIndex",
    "MemoryStore", "RepairConfig", "Strand", "Strategy", "address_of", "download", "encode",
    "entangle", "reassemble", "repair_block", "split",
]
