"""Text, CSV and JSON renderings of fits, comparisons, IDRs and study summaries.

Text tables use four decimals; CSV and JSON carry full precision.
"""
from __future__ import annotations

import csv
import io
import json
import math

from .estimation import FitResult
from .inference import IdrReport
from .simulation import MEASURES, SummaryTable, parameter_labels

MEASURE_LABELS = {
    "estimate": "Estimate",
    "std_error": "Std. error",
    "sb_std_error": "SB std. err.",
    "bias": "Bias",
    "rel_bias": "Rel. bias",
    "mse": "MSE",
}


def _num(v, width=0):
    s = "NA" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.4f}"
    return s.rjust(width) if width else s


def _cell(fit: FitResult, name: str) -> str:
    if name not in fit.names:
        return ""
    j = fit.names.index(name)
    star = "*" if fit.significant_at_05[j] else ""
    return f"{_num(fit.values[j])}({_num(fit.std_errors[j])}{star})"


def fit_table(fits) -> str:
    """Side-by-side parameter table: ``Estimate(s.e)`` cells, ``*`` when |z| > 1.96."""
    fits = list(fits)
    count_rows, zero_rows = [], []
    for f in fits:
        for name in f.names:
            if name.startswith("count:") and name not in count_rows:
                count_rows.append(name)
            elif name.startswith("zero:") and name not in zero_rows:
                zero_rows.append(name)
    width = max(18, *(len(r) for r in count_rows + zero_rows))
    cw = 22
    lines = ["".ljust(width) + "".join(str(f.kind).rjust(cw) for f in fits)]
    lines.append("Effect".ljust(width) + "".join("Estimate(s.e)".rjust(cw) for _ in fits))
    rule = "-" * (width + cw * len(fits))
    lines.append(rule)

    def section(title, rows, prefix):
        lines.append(title)
        for r in rows:
            lines.append(("  " + r[len(prefix):]).ljust(width) + "".join(_cell(f, r).rjust(cw) for f in fits))

    section("Count part", count_rows, "count:")
    if zero_rows:
        section("Zero-inflated part", zero_rows, "zero:")
    if any(f.kind.has_k for f in fits):
        lines.append("Overdispersion k".ljust(width) + "".join(_cell(f, "k").rjust(cw) for f in fits))
    lines.append(rule)
    lines.append("-2Log-likelihood".ljust(width) + "".join(_num(f.minus2ll, cw) for f in fits))
    lines.append("AIC".ljust(width) + "".join(_num(f.aic, cw) for f in fits))
    lines.append("Converged".ljust(width) + "".join(("yes" if f.ok else "NO").rjust(cw) for f in fits))
    lines.append("(*) significant at alpha = 0.05")
    return "\n".join(lines)


def fit_record(fit: FitResult) -> dict:
    return {
        "kind": fit.kind.value,
        "parameters": [
            {
                "name": name,
                "estimate": float(est),
                "std_error": float(se),
                "z": float(z),
                "significant": bool(sig),
            }
            for name, est, se, z, sig in fit.table()
        ],
        "loglik": fit.loglik,
        "minus2ll": fit.minus2ll,
        "aic": fit.aic,
        "n_params": fit.n_params,
        "converged": fit.converged,
        "condition_warning": fit.condition_warning,
        "iterations": fit.iterations,
    }


def fit_csv(fits) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "parameter", "estimate", "std_error", "z", "significant", "minus2ll", "aic", "converged"])
    for f in fits:
        for name, est, se, z, sig in f.table():
            w.writerow([f.kind.value, name, repr(float(est)), repr(float(se)), repr(float(z)), int(sig),
                        repr(f.minus2ll), repr(f.aic), int(f.ok)])
    return buf.getvalue()


def compare_table(ranked) -> str:
    best = ranked[0].aic
    lines = [f"{'Rank':>4}  {'Model':<8}{'Params':>7}{'-2LL':>14}{'AIC':>14}{'dAIC':>10}"]
    for i, f in enumerate(ranked, 1):
        lines.append(f"{i:>4}  {f.kind.value:<8}{f.n_params:>7}{_num(f.minus2ll, 14)}{_num(f.aic, 14)}{_num(f.aic - best, 10)}")
    return "\n".join(lines)


def compare_records(ranked) -> list:
    return [
        {"rank": i, "kind": f.kind.value, "n_params": f.n_params, "minus2ll": f.minus2ll, "aic": f.aic}
        for i, f in enumerate(ranked, 1)
    ]


def idr_record(rep: IdrReport) -> dict:
    out = {"covariate": rep.covariate, "kind": rep.kind.value, "constant": rep.constant}
    if rep.constant:
        out["idr"] = rep.idr
        out["ci_95"] = list(rep.ci_95)
    else:
        out.update(rep.summary)
    return out


def idr_text(reports) -> str:
    lines = []
    for rep in reports:
        if rep.constant:
            lo, hi = rep.ci_95
            lines.append(f"{rep.kind.value:<8}{rep.covariate:<20}IDR {_num(rep.idr)}  95% CI ({_num(lo)}, {_num(hi)})")
        else:
            s = rep.summary
            lines.append(
                f"{rep.kind.value:<8}{rep.covariate:<20}IDR varies by profile: "
                f"min {_num(s['min'])}  median {_num(s['median'])}  max {_num(s['max'])}"
            )
    return "\n".join(lines)


def summary_text(table: SummaryTable) -> str:
    """One block per fitted kind, rows grouped by sample size and measure."""
    d = table.design
    out = [
        f"Data generated from {d.generator.value}"
        + (f" with k={d.true_k:g}" if d.true_k is not None else "")
        + f"; {d.replicates} replicates; seed {d.seed}"
    ]
    for kind in d.fit_kinds:
        labels = parameter_labels(kind)
        rows0 = [table.row(kind, d.sample_sizes[0], lab) for lab in labels]
        out.append("")
        out.append(f"== {kind.value}")
        out.append(f"{'True parameters':<26}" + "".join(_num(r.true_value, 10) if not math.isnan(r.true_value) else "-".rjust(10) for r in rows0))
        out.append(f"{'Sample size':<12}{'Measure':<14}" + "".join(lab.rjust(10) for lab in labels))
        for n in d.sample_sizes:
            rows = [table.row(kind, n, lab) for lab in labels]
            for i, m in enumerate(MEASURES):
                lead = str(n) if i == 0 else ""
                out.append(f"{lead:<12}{MEASURE_LABELS[m]:<14}" + "".join(_num(r.measure(m), 10) for r in rows))
            out.append(f"{'':<12}{'converged':<14}{rows[0].converged:>10}  (failed {rows[0].failed})")
    return "\n".join(out)


TIDY_COLUMNS = ("generator", "fit_kind", "n", "k_true", "parameter", "measure", "value", "replicates_converged")


def summary_csv(table: SummaryTable) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=TIDY_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in table.tidy():
        row = dict(row)
        row["value"] = repr(float(row["value"]))
        w.writerow(row)
    return buf.getvalue()


def to_json(obj) -> str:
    def default(o):
        if hasattr(o, "item"):
            return o.item()
        raise TypeError(type(o))

    return json.dumps(obj, indent=2, default=default, allow_nan=True)
