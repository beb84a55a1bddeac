"""Deterministic per-item random streams.

Each (master_seed, item_key) pair maps to an independent counter-based
Philox stream, so a batch produces identical outputs no matter how work is
split across workers or in which order samples are processed.
"""
import hashlib
from dataclasses import dataclass, field

import numpy as np

_DOMAIN = b"cuedecomp.rng.v1"


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible random stream.

    Carries its own provenance (master_seed, item_key) so sub-streams can be
    derived from it (see :func:`derive_substream`).
    """

    master_seed: int
    item_key: str
    generator: np.random.Generator = field(compare=False, repr=False)

    def spawn(self, suffix):
        """Derive an independent child stream keyed by ``suffix``."""
        return derive_stream(self.master_seed, f"{self.item_key}|{suffix}")


def _philox_key(master_seed, item_key):
    h = hashlib.sha256()
    h.update(_DOMAIN)
    h.update(str(int(master_seed)).encode())
    h.update(b"\x00")
    h.update(item_key.encode("utf-8"))
    return int.from_bytes(h.digest()[:16], "little")


def derive_stream(master_seed, item_key=""):
    """Create the stream for one work item.

    The stream depends only on the two arguments; distinct keys give
    statistically independent streams.
    """
    key = _philox_key(master_seed, item_key)
    gen = np.random.Generator(np.random.Philox(key=key))
    return RngStream(master_seed=int(master_seed), item_key=item_key, generator=gen)


def as_generator(rng):
    """Accept an RngStream, a numpy Generator, or an int seed."""
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, (int, np.integer)):
        return derive_stream(int(rng)).generator
    raise TypeError(f"expected RngStream, numpy Generator, or int seed, got {type(rng)!r}")
