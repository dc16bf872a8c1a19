"""Quantile-based method comparison.

For method m at site s the correspondence metric is
D^p_m(s) = ln(q_model / q_empirical) at quantile level p: positive when the
method overestimates the empirical quantile, negative when it
underestimates.  Per (method, p) the distribution of D across sites is
summarized by its median and quartiles, and classified as underestimating
(U, Q3 < 0), overestimating (O, Q1 > 0), or nominal (N, the IQR contains 0,
endpoints inclusive).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

import numpy as np

from .empirical import empirical_quantile

__all__ = [
    "EvaluationSummary",
    "FitResult",
    "MethodId",
    "PAPER_QUANTILES",
    "QuantileSet",
    "SummaryCell",
    "asinh_axis_transform",
    "classify",
    "log_ratio_metric",
    "summarize",
]


class MethodId(str, Enum):
    """The seven benchmark methods; the registry in `pipeline` is extensible."""

    # str() must yield the wire value on every supported Python, not the
    # qualified member name that plain (str, Enum) produces from 3.11 on.
    __str__ = str.__str__

    NAVEAU_MLE = "naveau-mle"
    NAVEAU_PWM = "naveau-pwm"
    NAVEAU_MLE_C = "naveau-mle-c"
    NAVEAU_PWM_C = "naveau-pwm-c"
    GAMMA_MIXTURE_2 = "gamma-mixture-2"
    GAMMA_MIXTURE_3 = "gamma-mixture-3"
    GAMMA_MIXTURE_4 = "gamma-mixture-4"


PAPER_METHOD_ORDER: tuple[str, ...] = tuple(m.value for m in MethodId)

PAPER_QUANTILES: tuple[float, ...] = (0.01, 0.10, 0.25, 0.50, 0.75, 0.90, 0.99)


@dataclass(frozen=True)
class QuantileSet:
    """Strictly ascending probabilities in (0, 1) at which methods are scored."""

    probabilities: tuple[float, ...] = PAPER_QUANTILES

    def __post_init__(self) -> None:
        ps = tuple(float(p) for p in self.probabilities)
        if len(ps) == 0:
            raise ValueError("quantile set must be nonempty")
        if any(not 0.0 < p < 1.0 for p in ps):
            raise ValueError("quantile levels must lie strictly inside (0, 1)")
        if any(b <= a for a, b in zip(ps, ps[1:])):
            raise ValueError("quantile levels must be strictly ascending")
        object.__setattr__(self, "probabilities", ps)


@dataclass
class FitResult:
    """One (site, method) fit: parameters, quantiles, and diagnostics.

    `estimated_quantiles` maps p to the fitted model's quantile in mm and
    must be strictly increasing in p for converged fits.  `error` is set
    (and `converged` is False) when the fit raised instead of returning.
    `empirical_quantiles` carries the site's own sample quantiles so that
    reports can be rebuilt from the records file alone.
    """

    site_id: str
    method: str
    estimated_quantiles: dict[float, float]
    converged: bool
    fit_seconds: float
    params: dict
    diagnostics: dict = field(default_factory=dict)
    n_wet: int | None = None
    empirical_quantiles: dict[float, float] | None = None
    error: str | None = None

    def __post_init__(self) -> None:
        if self.converged and self.error is None and len(self.estimated_quantiles) > 1:
            qs = [self.estimated_quantiles[p] for p in sorted(self.estimated_quantiles)]
            if any(b <= a for a, b in zip(qs, qs[1:])):
                raise ValueError("converged fit has non-increasing quantiles")

    def to_record(self) -> dict:
        # json.dumps-ready: keys become repr(p) strings, scalars plain Python.
        return {
            "site_id": self.site_id,
            "method": str(self.method),
            "estimated_quantiles": {repr(float(p)): float(v) for p, v in self.estimated_quantiles.items()},
            "converged": bool(self.converged),
            "fit_seconds": float(self.fit_seconds),
            "params": self.params,
            "diagnostics": self.diagnostics,
            "n_wet": self.n_wet,
            "empirical_quantiles": (
                None
                if self.empirical_quantiles is None
                else {repr(float(p)): float(v) for p, v in self.empirical_quantiles.items()}
            ),
            "error": self.error,
        }

    @classmethod
    def from_record(cls, record: Mapping) -> "FitResult":
        emp = record.get("empirical_quantiles")
        return cls(
            site_id=record["site_id"],
            method=record["method"],
            estimated_quantiles={float(k): v for k, v in record["estimated_quantiles"].items()},
            converged=record["converged"],
            fit_seconds=record["fit_seconds"],
            params=record["params"],
            diagnostics=record.get("diagnostics", {}),
            n_wet=record.get("n_wet"),
            empirical_quantiles=None if emp is None else {float(k): v for k, v in emp.items()},
            error=record.get("error"),
        )


def log_ratio_metric(q_model: float, q_empirical: float) -> float:
    """D = ln(q_model / q_empirical); zero iff equal, positive iff overestimate."""
    if not (q_model > 0.0 and q_empirical > 0.0):
        raise ValueError("quantiles must be > 0 (zero empirical quantiles are flagged upstream)")
    return math.log(q_model / q_empirical)


def classify(d_values) -> str:
    """U/O/N rule on the quartiles of the D distribution across sites.

    U if Q3 < 0 (the whole IQR is below zero), O if Q1 > 0, N otherwise;
    an endpoint exactly at zero counts as containing zero.  Quartiles use
    the same type-7 convention as everything else in the package.
    """
    arr = np.asarray(d_values, dtype=float)
    if arr.size < 4:
        raise ValueError("need at least 4 values to classify an IQR")
    q1 = empirical_quantile(arr, 0.25)
    q3 = empirical_quantile(arr, 0.75)
    if q3 < 0.0:
        return "U"
    if q1 > 0.0:
        return "O"
    return "N"


def asinh_axis_transform(x, scale: float = 8.0):
    """Axis transform asinh(scale * x): odd, monotone, linear near zero."""
    arr = np.asarray(x, dtype=float)
    out = np.arcsinh(scale * arr)
    return float(out) if arr.ndim == 0 else out


@dataclass(frozen=True)
class SummaryCell:
    """Distribution of D^p over sites for one (method, p)."""

    n_sites: int
    median: float
    q1: float
    q3: float
    lo: float
    hi: float
    whisker_lo: float
    whisker_hi: float
    klass: str | None


@dataclass
class EvaluationSummary:
    """Per-(method, p) statistics plus bookkeeping of failures/exclusions.

    `failures` counts fits per method that errored or did not converge;
    `excluded` counts converged fits dropped at one p for a non-positive
    quantile on either side of the ratio.
    """

    methods: tuple[str, ...]
    probabilities: tuple[float, ...]
    cells: dict[tuple[str, float], SummaryCell]
    failures: dict[str, int]
    excluded: dict[tuple[str, float], int]
    n_sites: int
    warnings: list[str] = field(default_factory=list)


def _cell_from_d(d: np.ndarray) -> SummaryCell:
    d = np.sort(d)
    n = d.size
    if n == 1:
        med = q1 = q3 = float(d[0])
    else:
        med = empirical_quantile(d, 0.5)
        q1 = empirical_quantile(d, 0.25)
        q3 = empirical_quantile(d, 0.75)
    iqr = q3 - q1
    in_lo = d[d >= q1 - 1.5 * iqr]
    in_hi = d[d <= q3 + 1.5 * iqr]
    # The U/O/N rule is well defined for any n >= 1 (q1 = q3 = d[0] when
    # degenerate), so summary cells are always classified even though the
    # standalone classify() keeps its >= 4 precondition.
    if q3 < 0.0:
        klass = "U"
    elif q1 > 0.0:
        klass = "O"
    else:
        klass = "N"
    return SummaryCell(
        n_sites=n,
        median=med,
        q1=q1,
        q3=q3,
        lo=float(d[0]),
        hi=float(d[-1]),
        whisker_lo=float(in_lo[0]) if in_lo.size else q1,
        whisker_hi=float(in_hi[-1]) if in_hi.size else q3,
        klass=klass,
    )


def summarize(
    results: Iterable[FitResult],
    empirical: Mapping[str, Mapping[float, float]],
    qset: QuantileSet = QuantileSet(),
) -> EvaluationSummary:
    """Aggregate fit results into per-(method, p) distribution statistics.

    Only converged, error-free fits contribute to D distributions; the rest
    are counted per method in `failures`.  A site is dropped at a single p
    (and counted in `excluded`, with a warning) when the empirical or
    estimated quantile there is missing or non-positive.  Output is
    independent of input ordering: sites are processed in sorted id order
    and methods in the canonical benchmark order, extras alphabetically.
    """
    results = list(results)
    if not results:
        raise ValueError("no fit results to summarize")

    present = {r.method for r in results}
    methods = tuple(
        [m for m in PAPER_METHOD_ORDER if m in present]
        + sorted(present - set(PAPER_METHOD_ORDER))
    )
    by_method: dict[str, dict[str, FitResult]] = {m: {} for m in methods}
    for r in results:
        by_method[r.method][r.site_id] = r

    cells: dict[tuple[str, float], SummaryCell] = {}
    failures: dict[str, int] = {}
    excluded: dict[tuple[str, float], int] = {}
    warnings: list[str] = []
    site_ids: set[str] = set()

    for method in methods:
        rows = by_method[method]
        site_ids.update(rows)
        ok = {s: r for s, r in sorted(rows.items()) if r.converged and r.error is None}
        failures[method] = len(rows) - len(ok)
        for p in qset.probabilities:
            d_list = []
            dropped = 0
            for site, r in ok.items():
                q_m = r.estimated_quantiles.get(p)
                q_e = empirical.get(site, {}).get(p)
                if q_m is None or q_e is None or q_m <= 0.0 or q_e <= 0.0:
                    dropped += 1
                    continue
                d_list.append(log_ratio_metric(q_m, q_e))
            if dropped:
                excluded[(method, p)] = dropped
                warnings.append(
                    f"{method} at p={p:g}: {dropped} site(s) excluded "
                    "(missing or non-positive quantile)"
                )
            if d_list:
                cells[(method, p)] = _cell_from_d(np.array(d_list))

    return EvaluationSummary(
        methods=methods,
        probabilities=qset.probabilities,
        cells=cells,
        failures=failures,
        excluded=excluded,
        n_sites=len(site_ids),
        warnings=warnings,
    )
