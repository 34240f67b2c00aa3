"""File formats and synthetic data.

Test sets travel as TSV: optional `#key=value` directive lines, a header
row naming the metric columns, then one row per segment.  The score column
may be empty (unrated segment).  Floats are written with repr, so a
load/save round trip is bit-exact.  Simulation configs are flat key=value
files; results land in two CSVs plus an aligned text summary.
"""

import csv
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .model import SampleDraw, Segment, TestSet
from .simulate import SimulationConfig, curve_rows, report, result_rows
from .stratify import round_allocation

_FIXED_COLUMNS = ("segment_id", "doc_id", "score")


class DataFormatError(ValueError):
    """A file does not parse; the message carries the offending line."""


def _fmt(value: float) -> str:
    return repr(float(value))


def _parse_float(text: str, line_no: int, what: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataFormatError(
            f"line {line_no}: {what} {text!r} is not a number"
        ) from None
    if not math.isfinite(value):
        raise DataFormatError(f"line {line_no}: {what} {text!r} is not finite")
    return value


def load_test_set(path) -> TestSet:
    path = Path(path)
    direction = "lower"
    header: Optional[list] = None
    segments = []
    seen: dict[str, int] = {}
    with path.open(encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" not in body:
                    raise DataFormatError(
                        f"line {line_no}: directive {line!r} is not key=value"
                    )
                key, value = (part.strip() for part in body.split("=", 1))
                if key != "direction":
                    raise DataFormatError(
                        f"line {line_no}: unknown directive {key!r} "
                        "(known: direction)"
                    )
                if value not in ("lower", "higher"):
                    raise DataFormatError(
                        f"line {line_no}: direction must be lower or higher, "
                        f"got {value!r}"
                    )
                direction = value
                continue
            cells = line.split("\t")
            if header is None:
                if tuple(cells[:3]) != _FIXED_COLUMNS:
                    raise DataFormatError(
                        f"line {line_no}: header must start with "
                        f"{', '.join(_FIXED_COLUMNS)}"
                    )
                header = cells
                continue
            if len(cells) != len(header):
                raise DataFormatError(
                    f"line {line_no}: {len(cells)} columns, header has {len(header)}"
                )
            seg_id, doc_id, score_text = cells[0], cells[1], cells[2]
            if not seg_id or not doc_id:
                raise DataFormatError(f"line {line_no}: empty segment or doc id")
            if seg_id in seen:
                raise DataFormatError(
                    f"line {line_no}: duplicate segment id {seg_id!r} "
                    f"(first on line {seen[seg_id]})"
                )
            seen[seg_id] = line_no
            score = (
                None
                if score_text == ""
                else _parse_float(score_text, line_no, "score")
            )
            metrics = tuple(
                _parse_float(cell, line_no, f"metric {header[3 + j]!r}")
                for j, cell in enumerate(cells[3:])
            )
            segments.append(
                Segment(id=seg_id, doc_id=doc_id, metrics=metrics, score=score)
            )
    if header is None:
        raise DataFormatError(f"{path}: no header row")
    if not segments:
        raise DataFormatError(f"{path}: no data rows")
    return TestSet(
        segments=tuple(segments),
        metric_names=tuple(header[3:]),
        score_direction=direction,
    )


def save_test_set(test_set: TestSet, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"#direction={test_set.score_direction}\n")
        fh.write("\t".join(_FIXED_COLUMNS + test_set.metric_names) + "\n")
        for seg in test_set.segments:
            score = "" if seg.score is None else _fmt(seg.score)
            cells = [seg.id, seg.doc_id, score, *(_fmt(m) for m in seg.metrics)]
            fh.write("\t".join(cells) + "\n")


def load_ratings(path, test_set: TestSet) -> SampleDraw:
    """Two-column TSV (segment_id, score) mapped onto the test set."""
    path = Path(path)
    index_of = {seg.id: i for i, seg in enumerate(test_set.segments)}
    indices = []
    scores = []
    seen: dict[str, int] = {}
    with path.open(encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            cells = line.split("\t")
            if cells[0] == "segment_id":
                continue
            if len(cells) != 2:
                raise DataFormatError(
                    f"line {line_no}: expected segment_id<TAB>score"
                )
            seg_id, score_text = cells
            if seg_id not in index_of:
                raise DataFormatError(
                    f"line {line_no}: segment id {seg_id!r} is not in the test set"
                )
            if seg_id in seen:
                raise DataFormatError(
                    f"line {line_no}: duplicate rating for {seg_id!r} "
                    f"(first on line {seen[seg_id]})"
                )
            seen[seg_id] = line_no
            indices.append(index_of[seg_id])
            scores.append(_parse_float(score_text, line_no, "score"))
    if not indices:
        raise DataFormatError(f"{path}: no ratings")
    return SampleDraw(indices=tuple(indices), scores=tuple(scores))


def save_ratings(draw: SampleDraw, test_set: TestSet, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write("segment_id\tscore\n")
        for idx, score in zip(draw.indices, draw.scores):
            fh.write(f"{test_set.segments[idx].id}\t{_fmt(score)}\n")


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a synthetic test set with known structure.

    Scores follow a zero-inflated exponential-like shape (a point mass at
    0, a capped heavy tail), segments within a document share a latent
    effect controlling how much of the variance lives between documents,
    and each metric hits its target correlation with the score exactly by
    construction.  `metric_noise_corr` correlates the noise across metrics
    so that averaging them cannot wash it out entirely, which keeps the
    mean-of-metrics correlation realistic.
    """

    n_segments: int
    n_documents: int
    metric_corrs: tuple
    seed: int = 0
    doc_effect: float = 0.3
    p_zero: float = 0.55
    score_scale: float = 5.0
    score_max: float = 25.0
    doc_size_concentration: float = 8.0
    metric_noise_corr: float = 0.0
    score_direction: str = "lower"

    def __post_init__(self):
        object.__setattr__(
            self, "metric_corrs", tuple(float(r) for r in self.metric_corrs)
        )
        if self.n_segments < 1:
            raise ValueError("n_segments must be >= 1")
        if not 1 <= self.n_documents <= self.n_segments:
            raise ValueError("need 1 <= n_documents <= n_segments")
        for r in self.metric_corrs:
            if not -1.0 < r < 1.0:
                raise ValueError(f"metric correlation {r} out of (-1, 1)")
        if not 0.0 <= self.doc_effect <= 1.0:
            raise ValueError("doc_effect must be in [0, 1]")
        if not 0.0 <= self.p_zero < 1.0:
            raise ValueError("p_zero must be in [0, 1)")
        if self.score_scale <= 0 or self.score_max <= 0:
            raise ValueError("score_scale and score_max must be positive")
        if self.doc_size_concentration <= 0:
            raise ValueError("doc_size_concentration must be positive")
        if not 0.0 <= self.metric_noise_corr <= 1.0:
            raise ValueError("metric_noise_corr must be in [0, 1]")
        if self.score_direction not in ("lower", "higher"):
            raise ValueError("score_direction must be lower or higher")


def _normal_cdf(t: np.ndarray) -> np.ndarray:
    out = np.empty(len(t))
    for i, v in enumerate(t.tolist()):
        out[i] = 0.5 * (1.0 + math.erf(v / math.sqrt(2.0)))
    return out


def generate_synthetic(spec: SyntheticSpec) -> TestSet:
    """Deterministic synthetic test set for a given spec (seed included)."""
    rng = np.random.default_rng(spec.seed)
    n, n_docs = spec.n_segments, spec.n_documents

    # Uneven document sizes, every document non-empty.
    props = rng.dirichlet(np.full(n_docs, spec.doc_size_concentration))
    sizes = 1 + round_allocation(props * (n - n_docs))
    doc_of = np.repeat(np.arange(n_docs), sizes)

    # Latent quality: a shared per-document pull plus segment noise, pushed
    # through the zero-inflated capped-tail quantile.
    doc_pull = rng.standard_normal(n_docs)
    latent = math.sqrt(spec.doc_effect) * doc_pull[doc_of]
    latent = latent + math.sqrt(1.0 - spec.doc_effect) * rng.standard_normal(n)
    u = _normal_cdf(latent)
    scores = np.zeros(n)
    tail = u > spec.p_zero
    frac = (u[tail] - spec.p_zero) / (1.0 - spec.p_zero)
    with np.errstate(divide="ignore"):
        scores[tail] = np.minimum(
            spec.score_max, -spec.score_scale * np.log1p(-frac)
        )

    std = scores.std()
    if std < 1e-12:
        raise ValueError(
            "generated scores are constant; metric correlations are "
            "unachievable (got 0.0 for every target)"
        )
    scores_z = (scores - scores.mean()) / std

    # Each metric is built as target * standardized score plus orthogonal
    # noise, so the realized in-sample Pearson correlation is the target
    # exactly.  Sharing `metric_noise_corr` of the noise across metrics
    # keeps their average from being a much better predictor than any one
    # of them.
    shared = rng.standard_normal(n)
    columns = []
    for r in spec.metric_corrs:
        own = rng.standard_normal(n)
        eps = math.sqrt(spec.metric_noise_corr) * shared
        eps = eps + math.sqrt(1.0 - spec.metric_noise_corr) * own
        eps = eps - eps.mean()
        eps = eps - np.mean(eps * scores_z) * scores_z
        eps_std = eps.std()
        if eps_std < 1e-12:
            raise ValueError("metric noise degenerated; try another seed")
        eps = eps / eps_std
        columns.append(r * scores_z + math.sqrt(1.0 - r * r) * eps)

    id_width = len(str(n))
    doc_width = len(str(n_docs))
    segments = tuple(
        Segment(
            id=f"seg{i + 1:0{id_width}d}",
            doc_id=f"doc{doc_of[i] + 1:0{doc_width}d}",
            metrics=tuple(float(col[i]) for col in columns),
            score=float(scores[i]),
        )
        for i in range(n)
    )
    names = tuple(f"m{j + 1:02d}" for j in range(len(spec.metric_corrs)))
    return TestSet(
        segments=segments,
        metric_names=names,
        score_direction=spec.score_direction,
    )


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_list(text: str) -> tuple:
    return tuple(part.strip() for part in text.split(",") if part.strip())


_CONFIG_PARSERS = {
    "methods": _parse_list,
    "size_fractions": lambda s: tuple(float(x) for x in _parse_list(s)),
    "draws_per_size": int,
    "master_seed": int,
    "knn_k": int,
    "metric_bin_size": int,
    "cv_metric_index": int,
    "centered_cov": _parse_bool,
    "realloc_stride": int,
    "gamma": float,
    "r_override": lambda s: None if s.strip().lower() == "none" else float(s),
}

# The parser table must track the config dataclass exactly.
assert set(_CONFIG_PARSERS) == {f.name for f in fields(SimulationConfig)}


def load_config(path) -> SimulationConfig:
    """Flat key=value file; unknown keys are rejected by name."""
    path = Path(path)
    values = {}
    with path.open(encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DataFormatError(f"line {line_no}: expected key=value")
            key, text = (part.strip() for part in line.split("=", 1))
            if key not in _CONFIG_PARSERS:
                raise DataFormatError(
                    f"line {line_no}: unknown key {key!r}; valid keys: "
                    + ", ".join(sorted(_CONFIG_PARSERS))
                )
            if key in values:
                raise DataFormatError(f"line {line_no}: duplicate key {key!r}")
            try:
                values[key] = _CONFIG_PARSERS[key](text)
            except ValueError as exc:
                raise DataFormatError(f"line {line_no}: {exc}") from None
    try:
        return SimulationConfig(**values)
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None


def _format_config_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(
            _fmt(v) if isinstance(v, float) else str(v) for v in value
        )
    if isinstance(value, float):
        return _fmt(value)
    return str(value)


def save_config(config: SimulationConfig, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for f in fields(config):
            fh.write(f"{f.name}={_format_config_value(getattr(config, f.name))}\n")


def export_results(results: dict, out_dir) -> dict:
    """Write results.csv, curves.csv, and summary.txt; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "results": out_dir / "results.csv",
        "curves": out_dir / "curves.csv",
        "summary": out_dir / "summary.txt",
    }
    with paths["results"].open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["method", "simulation", "size_fraction", "mean_abs_err", "err_sdev", "win"]
        )
        for method, sim, frac, err, sd, win in result_rows(results):
            writer.writerow([method, sim, _fmt(frac), _fmt(err), _fmt(sd), win])
    with paths["curves"].open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "size_fraction", "mean_abs_err", "err_sdev"])
        for method, frac, err, sd in curve_rows(results):
            writer.writerow([method, _fmt(frac), _fmt(err), _fmt(sd)])
    paths["summary"].write_text(report(results) + "\n", encoding="utf-8")
    return paths
