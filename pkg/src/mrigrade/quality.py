"""Image quality measures for comparing equalizers.

MSE and PSNR are computed between an input image and a processed one.
AMBE (absolute mean brightness error) is included as the brightness
preservation witness; complexity is reported as exact operation counts
from an instrumented run.

Operation-count formulas (N pixels, w = width of a gray-level range):

* histogram: N additions
* equalizing one occupied range: ``w - 1`` additions (prefix sum) and ``w``
  multiplications (scaling), plus ``w`` additions when the output range does
  not start at 0
* floor-mean split of a range: ``2(w - 1)`` additions, ``w + 1``
  multiplications

So HE costs ``N + 255`` additions and 256 multiplications on any image.
For a constant image of value v, BBHE costs ``N + 510 + v`` additions and
``258 + v`` multiplications (one split, one occupied leaf of width
``v + 1``).  RMSHE with ``r >= 2`` adds one more split attempt on that leaf
when ``0 < v < 255``: ``2v`` additions and ``v + 2`` multiplications.  DHE
detects the single level and costs only the N histogram additions.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .enhance import METHODS, OpCounter, enhance, normalize_method
from .imgcore import MAX_LEVEL, GrayImage, as_image, check_same_shape, mean_intensity

CSV_HEADER = ("method", "psnr_db", "mse", "ambe", "additions", "multiplications")

# ordinal labels used for the complexity column of the comparison table
COMPLEXITY_LABELS = ("Very low", "Low", "Moderate", "High")


def mse(a: GrayImage, b: GrayImage) -> float:
    a, b = as_image(a), as_image(b)
    check_same_shape(a, b)
    diff = a.pixels.astype(np.int64) - b.pixels.astype(np.int64)
    # exact integer sum, one rounding at the division
    return int(np.sum(diff * diff)) / a.size


def psnr_from_mse(value: float) -> float:
    if value == 0:
        return math.inf
    return 10.0 * math.log10(MAX_LEVEL**2 / value)


def psnr(a: GrayImage, b: GrayImage) -> float:
    """Peak signal-to-noise ratio in dB, ``math.inf`` for identical images."""
    return psnr_from_mse(mse(a, b))


def ambe(a: GrayImage, b: GrayImage) -> float:
    a, b = as_image(a), as_image(b)
    check_same_shape(a, b)
    return abs(mean_intensity(a) - mean_intensity(b))


@dataclass(frozen=True)
class QualityReport:
    mse: float
    psnr: float
    ambe: float
    additions: int | None = None
    multiplications: int | None = None

    @classmethod
    def between(cls, original: GrayImage, processed: GrayImage, ops: OpCounter | None = None):
        value = mse(original, processed)
        return cls(
            mse=value,
            psnr=psnr_from_mse(value),
            ambe=ambe(original, processed),
            additions=None if ops is None else ops.additions,
            multiplications=None if ops is None else ops.multiplications,
        )

    @property
    def op_counts(self) -> dict:
        return {"additions": self.additions, "multiplications": self.multiplications}


def method_params(method: str, params: dict | None) -> dict:
    """Pick the keyword arguments relevant to ``method`` out of a mixed dict."""
    params = params or {}
    method = normalize_method(method)
    if method == "RMSHE":
        return {"r": params.get("r", 2)}
    if method == "DHE":
        keys = ("spread_factor", "min_partition_width", "allocation")
        return {k: params[k] for k in keys if k in params}
    return {}


def run_with_report(method: str, img: GrayImage, params: dict | None = None):
    """Enhance ``img`` and return ``(output, QualityReport)``."""
    img = as_image(img)
    ops = OpCounter()
    out = enhance(method, img, ops, **method_params(method, params))
    return out, QualityReport.between(img, out, ops)


def compare_methods(img: GrayImage, params: dict | None = None) -> dict:
    """One QualityReport per equalizer, keyed by method name in table order."""
    return {m: run_with_report(m, img, params)[1] for m in METHODS}


def op_count_report(method: str, img: GrayImage, params: dict | None = None) -> dict:
    ops = OpCounter()
    enhance(method, img, ops, **method_params(method, params))
    return {"additions": ops.additions, "multiplications": ops.multiplications}


def complexity_labels(reports: dict) -> dict:
    """Map each method to an ordinal label by rank of its total op count."""
    totals = sorted(reports, key=lambda m: (reports[m].additions or 0) + (reports[m].multiplications or 0))
    return {m: COMPLEXITY_LABELS[min(i, len(COMPLEXITY_LABELS) - 1)] for i, m in enumerate(totals)}


def format_float(x: float) -> str:
    if x is None:
        return ""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def report_row(name: str, rep: QualityReport) -> list:
    return [
        name,
        format_float(rep.psnr),
        format_float(rep.mse),
        format_float(rep.ambe),
        "" if rep.additions is None else str(rep.additions),
        "" if rep.multiplications is None else str(rep.multiplications),
    ]


def reports_to_csv(reports: dict, header: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header:
        writer.writerow(CSV_HEADER)
    for name, rep in reports.items():
        writer.writerow(report_row(name, rep))
    return buf.getvalue()


def parse_reports_csv(text: str) -> dict:
    """Inverse of :func:`reports_to_csv`."""
    reader = csv.DictReader(io.StringIO(text))
    out = {}
    for row in reader:
        out[row["method"]] = QualityReport(
            mse=float(row["mse"]),
            psnr=float(row["psnr_db"]),
            ambe=float(row["ambe"]),
            additions=int(row["additions"]) if row["additions"] else None,
            multiplications=int(row["multiplications"]) if row["multiplications"] else None,
        )
    return out
