"""Enhance -> segment -> extract ROI -> features -> classify, per image."""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .enhance import MAX_RMSHE_DEPTH, enhance, normalize_method
from .classify import SvmModel, load_model, svm_classify
from .features import FEATURE_NAMES, format_value, extract_all
from .imgcore import GrayImage, load_image, save_image
from .quality import method_params
from .segment import extract_roi, kmeans, largest_component, outline

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".pgm", ".png")
SUMMARY_HEADER = ("image", "status") + FEATURE_NAMES + ("grade", "decision_value", "error")


class ConfigError(ValueError):
    pass


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_offset(text) -> tuple:
    if isinstance(text, (tuple, list)):
        return tuple(int(v) for v in text)
    parts = str(text).replace(" ", "").split(",")
    if len(parts) != 2:
        raise ConfigError(f"offset must be 'dy,dx', got {text!r}")
    return int(parts[0]), int(parts[1])


@dataclass(frozen=True)
class PipelineConfig:
    """Flat pipeline settings; see :meth:`to_text` for the file format."""

    enhance_method: str = "RMSHE"
    rmshe_r: int = 2
    dhe_spread_factor: float = 3.0
    dhe_min_width: int = 3
    dhe_allocation: str = "span"
    kmeans_k: int = 4
    kmeans_max_iter: int = 100
    kmeans_tol: float = 0.25
    kmeans_init: str = "even"
    roi: str = "brightest"
    largest_component: bool = True
    connectivity: int = 8
    glcm_levels: int = 8
    glcm_offset: tuple = (0, 1)
    variance_scale: str = "normalized"
    feature_source: str = "enhanced"
    svm_c: float = 1.0
    svm_tol: float = 1e-3
    svm_max_passes: int = 10
    model: str = ""
    output_dir: str = "pipeline_out"
    seed: int = 0

    def validate(self) -> "PipelineConfig":
        try:
            normalize_method(self.enhance_method)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        checks = [
            (0 <= self.rmshe_r <= MAX_RMSHE_DEPTH, f"rmshe_r must be in [0, {MAX_RMSHE_DEPTH}]"),
            (self.dhe_spread_factor > 0, "dhe_spread_factor must be > 0"),
            (1 <= self.dhe_min_width <= 255, "dhe_min_width must be in [1, 255]"),
            (self.dhe_allocation in ("span", "span_log_population"), "dhe_allocation must be span or span_log_population"),
            (1 <= self.kmeans_k <= 256, "kmeans_k must be in [1, 256]"),
            (self.kmeans_max_iter >= 1, "kmeans_max_iter must be >= 1"),
            (self.kmeans_tol >= 0, "kmeans_tol must be >= 0"),
            (self.kmeans_init in ("even", "random"), "kmeans_init must be even or random"),
            (self.roi == "brightest" or (self.roi.isdigit() and int(self.roi) < self.kmeans_k), "roi must be 'brightest' or a cluster index below kmeans_k"),
            (self.connectivity in (4, 8), "connectivity must be 4 or 8"),
            (2 <= self.glcm_levels <= 256, "glcm_levels must be in [2, 256]"),
            (self.glcm_offset != (0, 0), "glcm_offset must be nonzero"),
            (self.variance_scale in ("normalized", "raw"), "variance_scale must be normalized or raw"),
            (self.feature_source in ("enhanced", "original"), "feature_source must be enhanced or original"),
            (self.svm_c > 0, "svm_c must be > 0"),
            (self.svm_tol > 0, "svm_tol must be > 0"),
            (self.svm_max_passes >= 1, "svm_max_passes must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self

    @classmethod
    def from_mapping(cls, values: dict) -> "PipelineConfig":
        kw = {}
        types = {f.name: f.type for f in fields(cls)}
        for key, raw in values.items():
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            default = getattr(cls, key)
            try:
                if key == "glcm_offset":
                    kw[key] = _parse_offset(raw)
                elif isinstance(default, bool):
                    kw[key] = raw if isinstance(raw, bool) else _parse_bool(str(raw))
                elif isinstance(default, int):
                    kw[key] = int(raw)
                elif isinstance(default, float):
                    kw[key] = float(raw)
                else:
                    kw[key] = str(raw).strip()
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from None
        if "enhance_method" in kw:
            kw["enhance_method"] = kw["enhance_method"].upper()
        return cls(**kw)

    @classmethod
    def from_text(cls, text: str) -> "PipelineConfig":
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
        return cls.from_mapping(values)

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    def replace(self, **changes) -> "PipelineConfig":
        d = asdict(self)
        d.update(changes)
        return type(self).from_mapping(d)

    def enhance_params(self) -> dict:
        return method_params(
            self.enhance_method,
            {
                "r": self.rmshe_r,
                "spread_factor": self.dhe_spread_factor,
                "min_partition_width": self.dhe_min_width,
                "allocation": self.dhe_allocation,
            },
        )

    def roi_strategy(self):
        return "brightest" if self.roi == "brightest" else int(self.roi)


@dataclass
class ImageResult:
    image: str
    status: str = "ok"
    features: object = None
    grade: str = ""
    decision_value: float | None = None
    error: str = ""

    def row(self) -> list:
        feats = [""] * len(FEATURE_NAMES) if self.features is None else [format_value(v) for v in self.features.as_tuple()]
        dv = "" if self.decision_value is None else format_value(self.decision_value)
        return [self.image, self.status] + feats + [self.grade, dv, self.error]


def process_image(img: GrayImage, cfg: PipelineConfig, model: SvmModel | None = None):
    """Run every stage on one image and return the intermediate products."""
    enhanced = enhance(cfg.enhance_method, img, **cfg.enhance_params())
    lm = kmeans(enhanced, cfg.kmeans_k, max_iter=cfg.kmeans_max_iter, tol=cfg.kmeans_tol, init=cfg.kmeans_init, seed=cfg.seed)
    mask = extract_roi(enhanced, lm, cfg.roi_strategy())
    if cfg.largest_component:
        mask = largest_component(mask, cfg.connectivity)
    outlined = outline(img, mask)
    source = enhanced if cfg.feature_source == "enhanced" else img
    fv = extract_all(source, mask, levels=cfg.glcm_levels, offset=cfg.glcm_offset, variance_scale=cfg.variance_scale)
    grade, value = (svm_classify(model, fv) if model is not None else ("", None))
    return {
        "enhanced": enhanced,
        "labels": lm,
        "mask": mask,
        "outline": outlined,
        "features": fv,
        "grade": grade,
        "decision_value": value,
    }


def artifact_paths(out_dir: Path, stem: str) -> dict:
    return {
        "enhanced": out_dir / f"{stem}.enhanced.pgm",
        "labels": out_dir / f"{stem}.labels.pgm",
        "mask": out_dir / f"{stem}.mask.pgm",
        "outline": out_dir / f"{stem}.outline.pgm",
        "features": out_dir / f"{stem}.features.csv",
    }


def feature_row_csv(name: str, fv) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("image",) + FEATURE_NAMES)
    w.writerow([name] + [format_value(v) for v in fv.as_tuple()])
    return buf.getvalue()


def _run_one(path: Path, cfg: PipelineConfig, model, out_dir: Path) -> ImageResult:
    res = ImageResult(image=path.name)
    try:
        img = load_image(path)
        out = process_image(img, cfg, model)
        paths = artifact_paths(out_dir, path.stem)
        save_image(out["enhanced"], paths["enhanced"])
        save_image(out["labels"].visualize(), paths["labels"])
        save_image(out["mask"].to_image(), paths["mask"])
        save_image(out["outline"], paths["outline"])
        paths["features"].write_text(feature_row_csv(path.name, out["features"]), encoding="utf-8")
        res.features = out["features"]
        res.grade = out["grade"]
        res.decision_value = out["decision_value"]
        log.info("%s: %s", path.name, res.grade or "features extracted")
    except Exception as exc:  # per-image isolation: log and keep going
        res.status = "failed"
        res.error = f"{type(exc).__name__}: {exc}"
        log.error("%s: %s", path.name, res.error)
    return res


def expand_inputs(paths) -> list:
    """Files as given plus image files inside directories, sorted by name."""
    found = []
    for p in map(Path, paths):
        if p.is_dir():
            found.extend(q for q in p.iterdir() if q.suffix.lower() in IMAGE_SUFFIXES and q.is_file())
        else:
            found.append(p)
    return sorted(found, key=lambda q: (q.name, str(q)))


def run_pipeline(inputs, cfg: PipelineConfig, jobs: int = 1) -> list:
    """Process every input; writes artifacts and ``summary.csv`` to ``cfg.output_dir``."""
    cfg.validate()
    model = load_model(cfg.model) if cfg.model else None
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = expand_inputs(inputs)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda p: _run_one(p, cfg, model, out_dir), paths))
    else:
        results = [_run_one(p, cfg, model, out_dir) for p in paths]
    with open(out_dir / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for r in results:
            w.writerow(r.row())
    return results
