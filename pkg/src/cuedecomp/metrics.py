"""Evaluation statistics over externally produced prediction logs.

Quality measures (accuracy, mean IoU), the normalized cue-decomposition
shape bias and robustness scores, the cue-conflict shape bias, relative
corruption robustness, Spearman rank correlation, and the metric table that
ties them together.

Variant tags: original | eed | voronoi | patch | diamond | tex_eed |
tex_eed_patch | conflict | corrupt:<kind>:<intensity>.
"""
import csv
import io
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

VARIANT_ORIGINAL = "original"
VARIANT_SHAPE = "eed"
VARIANT_TEXTURE = "voronoi"
REQUIRED_VARIANTS = (VARIANT_ORIGINAL, VARIANT_SHAPE, VARIANT_TEXTURE)
VARIANT_CONFLICT = "conflict"
CORRUPT_PREFIX = "corrupt:"


# ---------------------------------------------------------------------------
# records

@dataclass(frozen=True)
class ClassificationRecord:
    model_id: str
    variant: str
    sample_id: str
    true_class: str
    predicted_class: str


@dataclass(frozen=True)
class ConflictRecord:
    model_id: str
    variant: str
    sample_id: str
    shape_class: str
    texture_class: str
    predicted_class: str


@dataclass(frozen=True)
class SegmentationRecord:
    model_id: str
    variant: str
    sample_id: str
    confusion: np.ndarray  # (K, K) int, rows = truth, cols = prediction


@dataclass(frozen=True)
class QualityRecord:
    """Pre-aggregated quality for one (model, variant); bypasses per-sample scoring."""

    model_id: str
    variant: str
    quality: float


@dataclass(frozen=True)
class QualityTriple:
    model_id: str
    q_o: float
    q_s: float
    q_t: float


class LogSchemaError(ValueError):
    pass


# ---------------------------------------------------------------------------
# quality measures

def accuracy(records):
    """Fraction of records whose prediction equals the true class."""
    records = list(records)
    if not records:
        raise ValueError("cannot compute accuracy of an empty record set")
    hits = sum(1 for r in records if r.predicted_class == r.true_class)
    return hits / len(records)


def confusion_from_labels(truth, prediction, class_count, ignore_index=None):
    """Build a (K, K) confusion matrix from label maps; ignored pixels are skipped."""
    truth = np.asarray(truth).ravel()
    prediction = np.asarray(prediction).ravel()
    if truth.shape != prediction.shape:
        raise ValueError("truth and prediction label maps differ in size")
    keep = np.ones(truth.shape, dtype=bool)
    if ignore_index is not None:
        keep = truth != ignore_index
    t = truth[keep]
    p = prediction[keep]
    if np.any(t < 0) or np.any(t >= class_count) or np.any(p < 0) or np.any(p >= class_count):
        raise ValueError("labels outside [0, class_count)")
    counts = np.bincount(t * class_count + p, minlength=class_count * class_count)
    return counts.reshape(class_count, class_count)


def mean_iou(confusion):
    """Mean over classes of diag / (row + col - diag); zero-union classes are excluded."""
    cm = np.asarray(confusion, dtype=np.int64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ValueError(f"confusion matrix must be square, got {cm.shape}")
    if np.any(cm < 0):
        raise ValueError("confusion matrix has negative counts")
    inter = np.diag(cm)
    union = cm.sum(axis=0) + cm.sum(axis=1) - inter
    valid = union > 0
    if not valid.any():
        raise ValueError("every class has zero union; mIoU undefined")
    return float(np.mean(inter[valid] / union[valid]))


# ---------------------------------------------------------------------------
# cue-decomposition scores

def cue_normalizers(triples):
    """Arithmetic means (s, t) of shape and texture qualities over a model set."""
    triples = list(triples)
    if not triples:
        raise ValueError("cannot normalize over an empty model set")
    s = float(np.mean([t.q_s for t in triples]))
    t = float(np.mean([t.q_t for t in triples]))
    if s <= 0 or t <= 0:
        raise ValueError(f"degenerate normalizers s={s}, t={t}")
    return s, t


def shape_bias(triple, s, t):
    """Normalized shape share (q_s/s) / (q_s/s + q_t/t); > 0.5 means shape-biased.

    Returns None when both cue qualities are zero.
    """
    if s <= 0 or t <= 0:
        raise ValueError(f"normalizers must be positive, got s={s}, t={t}")
    qs = triple.q_s / s
    qt = triple.q_t / t
    if qs + qt == 0:
        return None
    return qs / (qs + qt)


def cue_robustness(triple):
    """(q_s + q_t) / (2 q_o): corruption-robustness estimate from cue-only quality."""
    if triple.q_o <= 0:
        raise ValueError(f"original quality must be > 0, got {triple.q_o}")
    return (triple.q_s + triple.q_t) / (2.0 * triple.q_o)


def cue_conflict_bias(records):
    """TP_shape / (TP_shape + TP_texture) over conflict records for one model.

    Predictions matching neither cue class are ignored; returns None when no
    prediction matches either class.
    """
    tp_s = tp_t = 0
    for r in records:
        if r.predicted_class == r.shape_class:
            tp_s += 1
        elif r.predicted_class == r.texture_class:
            tp_t += 1
    if tp_s + tp_t == 0:
        return None
    return tp_s / (tp_s + tp_t)


def mean_quality(values):
    """Arithmetic mean of a per-model metric column."""
    values = list(values)
    if not values:
        raise ValueError("cannot average an empty value set")
    return float(np.mean(values))


def relative_robustness(clean_quality, corrupted_qualities, mode="ratio"):
    """Quality that remains under a corruption, averaged over the grid.

    ratio mode: mean_i(quality_i / clean); absolute mode: mean_i(quality_i).
    """
    corrupted = list(corrupted_qualities)
    if not corrupted:
        raise ValueError("no corrupted-variant qualities given")
    if mode == "ratio":
        if clean_quality <= 0:
            raise ValueError("ratio mode needs clean quality > 0")
        return float(np.mean([q / clean_quality for q in corrupted]))
    if mode == "absolute":
        return float(np.mean(corrupted))
    raise ValueError(f"mode must be 'ratio' or 'absolute', got {mode!r}")


# ---------------------------------------------------------------------------
# rank statistics

def rankdata(values):
    """1-based fractional ranks; tied values share the average of their ranks."""
    a = np.asarray(values, dtype=np.float64)
    order = np.argsort(a, kind="mergesort")
    ranks = np.empty(len(a), dtype=np.float64)
    sa = a[order]
    i = 0
    while i < len(a):
        j = i
        while j + 1 < len(a) and sa[j + 1] == sa[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y):
    """Pearson correlation of average-tie ranks; None if either list is constant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("spearman needs two equally long 1-D value lists")
    if len(x) < 2:
        raise ValueError("spearman needs at least two observations")
    if np.all(x == x[0]) or np.all(y == y[0]):
        return None
    rx = rankdata(x)
    ry = rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    return float(rx @ ry / np.sqrt((rx @ rx) * (ry @ ry)))


# ---------------------------------------------------------------------------
# prediction log I/O

def parse_corrupt_variant(variant):
    """Split 'corrupt:<kind>:<intensity>' into (kind, intensity)."""
    parts = variant.split(":")
    if len(parts) != 3 or parts[0] != "corrupt":
        raise ValueError(f"not a corruption variant tag: {variant!r}")
    return parts[1], float(parts[2])


def _record_from_dict(rec, where):
    try:
        model = str(rec["model_id"])
        variant = str(rec["variant"])
    except KeyError as exc:
        raise LogSchemaError(f"{where}: record lacks {exc.args[0]}") from None
    if "quality" in rec:
        return QualityRecord(model, variant, float(rec["quality"]))
    sample = rec.get("sample_id")
    if sample is None:
        raise LogSchemaError(f"{where}: per-sample record lacks sample_id")
    sample = str(sample)
    if "shape_class" in rec or "texture_class" in rec:
        try:
            return ConflictRecord(model, variant, sample, str(rec["shape_class"]),
                                  str(rec["texture_class"]), str(rec["pred"]))
        except KeyError as exc:
            raise LogSchemaError(f"{where}: conflict record lacks {exc.args[0]}") from None
    if "counts" in rec:
        counts = np.asarray(rec["counts"], dtype=np.int64)
        k = int(round(len(counts.ravel()) ** 0.5))
        if k * k != counts.size:
            raise LogSchemaError(f"{where}: confusion counts are not a K*K square")
        return SegmentationRecord(model, variant, sample, counts.reshape(k, k))
    if "counts_file" in rec:
        counts = np.loadtxt(rec["counts_file"], dtype=np.int64, ndmin=2)
        return SegmentationRecord(model, variant, sample, counts)
    try:
        return ClassificationRecord(model, variant, sample, str(rec["true"]), str(rec["pred"]))
    except KeyError as exc:
        raise LogSchemaError(f"{where}: classification record lacks {exc.args[0]}") from None


def read_prediction_log(path):
    """Read a JSONL or CSV prediction log; the schema is detected per record.

    JSONL fields: model_id, variant, then one of
      classification: sample_id, true, pred
      cue-conflict:   sample_id, shape_class, texture_class, pred
      segmentation:   sample_id, counts (K*K flat list) or counts_file
      aggregate:      quality
    CSV uses the same field names in the header.
    """
    records = []
    text = open(path, encoding="utf-8").read()
    stripped = text.lstrip()
    if not stripped:
        return records
    if stripped[0] == "{":
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogSchemaError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
            records.append(_record_from_dict(rec, f"{path}:{lineno}"))
    else:
        reader = csv.DictReader(io.StringIO(text))
        for lineno, row in enumerate(reader, 2):
            rec = {k: v for k, v in row.items() if v not in (None, "")}
            if "counts" in rec:
                rec["counts"] = [int(v) for v in rec["counts"].split(";")]
            records.append(_record_from_dict(rec, f"{path}:{lineno}"))
    return records


# ---------------------------------------------------------------------------
# the metric table

REL_ROB_PREFIX = "rel_rob_"
BASE_COLUMNS = ("q_o", "q_s", "q_t", "s_cd", "r_cd", "cue_conflict")


@dataclass
class MetricTable:
    """Per-model metric rows plus the provenance needed to reproduce them."""

    rows: dict                 # model_id -> {column -> float or None}
    columns: list              # column order (after model_id)
    metadata: dict = field(default_factory=dict)

    def column(self, name, models=None):
        models = list(self.rows) if models is None else models
        missing = [m for m in models if name not in self.rows[m] or self.rows[m][name] is None]
        if missing:
            raise ValueError(f"column {name!r} missing for models: {missing[:5]}")
        return [self.rows[m][name] for m in models]

    def spearman_between(self, col_a, col_b, exclude=()):
        models = [m for m in self.rows if m not in set(exclude)
                  and self.rows[m].get(col_a) is not None
                  and self.rows[m].get(col_b) is not None]
        if len(models) < 2:
            raise ValueError(f"not enough models with both {col_a!r} and {col_b!r}")
        return spearman([self.rows[m][col_a] for m in models],
                        [self.rows[m][col_b] for m in models])

    def _format(self, v):
        return "" if v is None else f"{v:.6g}"

    def to_csv(self, path_or_buf):
        close = False
        if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
            fh = open(path_or_buf, "w", newline="", encoding="utf-8")
            close = True
        else:
            fh = path_or_buf
        try:
            writer = csv.writer(fh)
            writer.writerow(["model_id"] + self.columns)
            for model in self.rows:
                writer.writerow([model] + [self._format(self.rows[model].get(c))
                                           for c in self.columns])
        finally:
            if close:
                fh.close()

    def to_markdown(self):
        header = ["model_id"] + self.columns
        body = [[m] + [self._format(self.rows[m].get(c)) for c in self.columns]
                for m in self.rows]
        widths = [max(len(h), *(len(r[i]) for r in body)) if body else len(h)
                  for i, h in enumerate(header)]
        def line(cells):
            return "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"
        sep = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
        return "\n".join([line(header), sep] + [line(r) for r in body]) + "\n"


def _quality_of(variant_records, model, variant):
    """Score one (model, variant) bucket from whatever record type it holds."""
    recs = variant_records
    kinds = {type(r) for r in recs}
    if QualityRecord in kinds:
        if len(recs) > 1:
            raise LogSchemaError(
                f"{model}/{variant}: aggregate quality mixed with other records")
        return recs[0].quality
    if SegmentationRecord in kinds:
        if kinds != {SegmentationRecord}:
            raise LogSchemaError(f"{model}/{variant}: mixed record schemas")
        total = recs[0].confusion.astype(np.int64).copy()
        for r in recs[1:]:
            if r.confusion.shape != total.shape:
                raise LogSchemaError(f"{model}/{variant}: confusion sizes differ")
            total += r.confusion
        return mean_iou(total)
    if kinds != {ClassificationRecord}:
        raise LogSchemaError(f"{model}/{variant}: mixed record schemas")
    return accuracy(recs)


def build_metric_table(records, normalization_exclude=(), robustness_mode="ratio"):
    """Aggregate prediction records into the per-model metric table.

    Models must cover the original, eed, and voronoi variants; models with a
    missing required variant are dropped with a warning. Normalizers are
    computed over the included models not listed in normalization_exclude.
    """
    by_model = {}
    conflict_records = {}
    for r in records:
        if isinstance(r, ConflictRecord):
            conflict_records.setdefault(r.model_id, []).append(r)
        else:
            by_model.setdefault(r.model_id, {}).setdefault(r.variant, []).append(r)

    qualities = {}
    excluded_models = []
    for model, variants in by_model.items():
        missing = [v for v in REQUIRED_VARIANTS if v not in variants]
        if missing:
            excluded_models.append((model, missing))
            continue
        qualities[model] = {v: _quality_of(recs, model, v) for v, recs in variants.items()}
    for model, missing in excluded_models:
        warnings.warn(f"model {model!r} lacks required variants {missing}; excluded")

    triples = {m: QualityTriple(m, q[VARIANT_ORIGINAL], q[VARIANT_SHAPE], q[VARIANT_TEXTURE])
               for m, q in qualities.items()}
    norm_models = [m for m in triples if m not in set(normalization_exclude)]
    if not norm_models:
        raise ValueError("no models left to compute normalizers from")
    s, t = cue_normalizers([triples[m] for m in norm_models])

    corruption_kinds = sorted({parse_corrupt_variant(v)[0]
                               for q in qualities.values() for v in q
                               if v.startswith(CORRUPT_PREFIX)})
    columns = list(BASE_COLUMNS) + [REL_ROB_PREFIX + k for k in corruption_kinds]
    if corruption_kinds:
        columns.append(REL_ROB_PREFIX + "mean")

    grids = {}
    rows = {}
    for model in sorted(qualities):
        q = qualities[model]
        triple = triples[model]
        row = {
            "q_o": triple.q_o,
            "q_s": triple.q_s,
            "q_t": triple.q_t,
            "s_cd": shape_bias(triple, s, t),
            "r_cd": cue_robustness(triple) if triple.q_o > 0 else None,
            "cue_conflict": (cue_conflict_bias(conflict_records[model])
                             if model in conflict_records else None),
        }
        family_values = []
        for kind in corruption_kinds:
            pts = sorted((parse_corrupt_variant(v)[1], qv) for v, qv in q.items()
                         if v.startswith(CORRUPT_PREFIX)
                         and parse_corrupt_variant(v)[0] == kind)
            if not pts:
                row[REL_ROB_PREFIX + kind] = None
                continue
            grids.setdefault(kind, sorted({p[0] for p in pts}))
            row[REL_ROB_PREFIX + kind] = relative_robustness(
                triple.q_o, [p[1] for p in pts], mode=robustness_mode)
            family_values.append(row[REL_ROB_PREFIX + kind])
        if corruption_kinds:
            row[REL_ROB_PREFIX + "mean"] = (float(np.mean(family_values))
                                            if family_values else None)
        rows[model] = row

    metadata = {
        "normalizers": {"s": s, "t": t},
        "normalization_models": sorted(norm_models),
        "normalization_excluded": sorted(set(normalization_exclude) & set(triples)),
        "robustness_mode": robustness_mode,
        "grids": grids,
        "dropped_models": [m for m, _ in excluded_models],
    }
    return MetricTable(rows=rows, columns=columns, metadata=metadata)
