"""Dataset manifests: JSON lines, one sample per record.

Record fields: sample_id, image, mask (optional), label (optional), variant.
"""
import json
from dataclasses import dataclass, field


@dataclass(frozen=True)
class ManifestEntry:
    sample_id: str
    image: str
    mask: str = None
    label: str = None
    variant: str = "original"

    def to_record(self):
        rec = {"sample_id": self.sample_id, "image": self.image, "variant": self.variant}
        if self.mask is not None:
            rec["mask"] = self.mask
        if self.label is not None:
            rec["label"] = self.label
        return rec


@dataclass
class DatasetManifest:
    entries: list = field(default_factory=list)
    variant_tag: str = "original"

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.sample_id in seen:
                raise ValueError(f"duplicate sample_id {e.sample_id!r} in manifest")
            seen.add(e.sample_id)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def labels(self):
        return [e.label for e in self.entries]

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for e in sorted(self.entries, key=lambda e: e.sample_id):
                fh.write(json.dumps(e.to_record(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path):
        entries = []
        variants = set()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
                if "sample_id" not in rec or "image" not in rec:
                    raise ValueError(f"{path}:{lineno}: record needs sample_id and image")
                entries.append(ManifestEntry(
                    sample_id=str(rec["sample_id"]),
                    image=rec["image"],
                    mask=rec.get("mask"),
                    label=None if rec.get("label") is None else str(rec["label"]),
                    variant=rec.get("variant", "original"),
                ))
                variants.add(entries[-1].variant)
        tag = variants.pop() if len(variants) == 1 else "mixed"
        return cls(entries=entries, variant_tag=tag)
