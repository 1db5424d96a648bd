"""Per-(seed, node, purpose) random streams.

Streams use numpy's counter-based Philox bit generator keyed from a
``SeedSequence`` over ``(master_seed, node_id, purpose)``. Two streams never
share state, so draw order in one subsystem cannot perturb another and
parallel execution replays the same numbers as serial.
"""

from __future__ import annotations

import zlib

import numpy as np

PURPOSES = ("sensing", "environment", "link", "relay", "scenario", "fuzz")


def _purpose_code(purpose: str) -> int:
    # stable across processes, unlike hash()
    return zlib.crc32(purpose.encode("utf-8"))


def stream(master_seed: int, node_id: int, purpose: str) -> np.random.Generator:
    if master_seed < 0 or node_id < 0:
        raise ValueError("seed and node id must be non-negative")
    seq = np.random.SeedSequence([int(master_seed), int(node_id), _purpose_code(purpose)])
    return np.random.Generator(np.random.Philox(seq))


class NodeStreams:
    """Lazily created named streams for one node."""

    def __init__(self, master_seed: int, node_id: int):
        self.master_seed = master_seed
        self.node_id = node_id
        self._streams: dict[str, np.random.Generator] = {}

    def __getitem__(self, purpose: str) -> np.random.Generator:
        gen = self._streams.get(purpose)
        if gen is None:
            gen = self._streams[purpose] = stream(self.master_seed, self.node_id, purpose)
        return gen
