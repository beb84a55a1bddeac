"""Cue-conflict composition: shape cue from one class, texture cue from another."""
from dataclasses import dataclass, field

import numpy as np

from .rng import as_generator
from .validation import check_image, check_same_shape, clamp01

MODES = ("blend", "sum")


@dataclass(frozen=True)
class ConflictPair:
    shape_sample_id: str
    texture_sample_id: str
    shape_class: str
    texture_class: str

    def __post_init__(self):
        if self.shape_class == self.texture_class:
            raise ValueError(
                f"cue classes must differ, both are {self.shape_class!r} "
                f"({self.shape_sample_id} / {self.texture_sample_id})"
            )


@dataclass(frozen=True)
class ConflictSpec:
    mode: str = "blend"
    gamma_s: float = 1.0
    gamma_t: float = 1.0
    pairing: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.gamma_s < 0 or self.gamma_t < 0:
            raise ValueError("cue weights must be nonnegative")
        if self.mode == "blend" and self.gamma_s + self.gamma_t <= 0:
            raise ValueError("blend mode needs gamma_s + gamma_t > 0")


def compose(shape_img, texture_img, spec):
    """Overlay a shape-cue image with a texture-cue image.

    blend: (gamma_s * S + gamma_t * T) / (gamma_s + gamma_t)
    sum:   clamp(gamma_s * S + gamma_t * T)
    """
    shape_img = check_image(shape_img)
    texture_img = check_image(texture_img)
    check_same_shape(shape_img, texture_img, ("shape image", "texture image"))
    gs, gt = spec.gamma_s, spec.gamma_t
    mixed = gs * shape_img + gt * texture_img
    if spec.mode == "blend":
        mixed = mixed / (gs + gt)
    return clamp01(mixed)


def build_pairing(shape_manifest, texture_manifest, rng, derangement=False):
    """Pair every shape sample with a texture sample of a different class.

    With derangement=True each texture sample is used exactly once (the two
    manifests must then have equal length). Raises if any manifest lacks
    labels or only one class is present.
    """
    shape_entries = list(shape_manifest)
    texture_entries = list(texture_manifest)
    for name, entries in (("shape", shape_entries), ("texture", texture_entries)):
        if not entries:
            raise ValueError(f"{name} manifest is empty")
        if any(e.label is None for e in entries):
            raise ValueError(f"{name} manifest must carry class labels on every entry")
    gen = as_generator(rng)

    if derangement:
        if len(shape_entries) != len(texture_entries):
            raise ValueError("derangement pairing needs equally sized manifests")
        for _ in range(1000):
            perm = gen.permutation(len(texture_entries))
            if all(shape_entries[i].label != texture_entries[perm[i]].label
                   for i in range(len(perm))):
                return tuple(
                    ConflictPair(shape_entries[i].sample_id,
                                 texture_entries[perm[i]].sample_id,
                                 shape_entries[i].label,
                                 texture_entries[perm[i]].label)
                    for i in range(len(perm))
                )
        raise ValueError("could not find a class-disjoint derangement (classes too unbalanced?)")

    pairs = []
    for s in shape_entries:
        candidates = [t for t in texture_entries if t.label != s.label]
        if not candidates:
            raise ValueError(
                f"no texture sample with a class different from {s.label!r}; "
                "need at least two classes"
            )
        t = candidates[int(gen.integers(len(candidates)))]
        pairs.append(ConflictPair(s.sample_id, t.sample_id, s.label, t.label))
    return tuple(pairs)
