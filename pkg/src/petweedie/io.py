"""CSV ingestion and JSON/CSV report serialization."""
import csv
from datetime import datetime, timezone
import io as _io
import json
import math

import numpy as np

from .errors import ParseError
from .estimating import FitResult, RegressionData
from .study import STUDY_COLUMNS, FrequencyTable

CURVE_COLUMNS = ("m", "p_di", "g0_di", "p_zi", "g0_zi")


def package_version():
    from importlib.metadata import PackageNotFoundError, version
    try:
        return version("artifact")
    except PackageNotFoundError:
        from . import __version__
        return __version__


def fmt(x):
    """Number with 17 significant digits; integers stay integral."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def dumps(obj, indent=2, _level=0):
    """JSON text with floats written at 17 significant digits (NaN -> null)."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_, int, float, np.integer, np.floating)):
        return fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) \
            + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# reading -----------------------------------------------------------------------------

def _rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", row=1) from None
        rows = [(i, r) for i, r in enumerate(reader, start=2) if any(c.strip() for c in r)]
    return header, rows


def _column(header, name):
    try:
        return header.index(name)
    except ValueError:
        raise ParseError(f"missing column {name!r}", row=1, column=name) from None


def _cell(row, line, j, name):
    if j >= len(row) or not row[j].strip():
        raise ParseError("missing value", row=line, column=name)
    return row[j].strip()


def _real(text, line, name):
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"not a number: {text!r}", row=line, column=name) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite value {text!r}", row=line, column=name)
    return v


def _count(text, line, name):
    v = _real(text, line, name)
    if v != int(v):
        raise ParseError(f"non-integer count {text!r}", row=line, column=name)
    if v < 0:
        raise ParseError(f"negative count {text!r}", row=line, column=name)
    return int(v)


def read_csv(path, response, covariates=(), intercept=True):
    """Regression data from a headed CSV file; rows are reported 1-based with the header as row 1."""
    header, rows = _rows(path)
    jy = _column(header, response)
    jx = [_column(header, c) for c in covariates]
    y = []
    X = []
    for line, row in rows:
        y.append(_count(_cell(row, line, jy, response), line, response))
        X.append([_real(_cell(row, line, j, c), line, c) for j, c in zip(jx, covariates)])
    if not y:
        raise ParseError("no data rows", row=2)
    X = np.array(X, dtype=float).reshape(len(y), len(jx))
    names = list(covariates)
    if intercept:
        X = np.column_stack([np.ones(len(y)), X])
        names = ["(Intercept)"] + names
    return RegressionData(np.array(y, dtype=np.int64), X, tuple(names))


def read_counts(path, column):
    header, rows = _rows(path)
    j = _column(header, column)
    return np.array([_count(_cell(r, line, j, column), line, column) for line, r in rows],
                    dtype=np.int64)


def read_frequency_table(path, value_column="y", count_column="count"):
    header, rows = _rows(path)
    jy = _column(header, value_column)
    jc = _column(header, count_column)
    counts = {}
    for line, row in rows:
        y = _count(_cell(row, line, jy, value_column), line, value_column)
        if y in counts:
            raise ParseError(f"duplicate value {y}", row=line, column=value_column)
        counts[y] = _count(_cell(row, line, jc, count_column), line, count_column)
    if not counts:
        raise ParseError("no data rows", row=2)
    return FrequencyTable(counts)


# reports -------------------------------------------------------------------------------

def fit_report(fit, seed, timestamp=False):
    se = fit.std_errors
    q = len(fit.beta)
    report = {
        "model": "PET",
        "coefficients": [{"name": n, "estimate": float(b), "std_error": float(s)}
                         for n, b, s in zip(fit.names, fit.beta, se[:q])],
        "dispersion": {"phi": fit.phi, "p": fit.p},
        "dispersion_std_error": {"phi": float(se[q]), "p": float(se[q + 1])},
        "fixed": list(fit.fixed),
        "godambe_cov": fit.godambe_cov.tolist(),
        "fit": {"converged": bool(fit.converged), "iterations": int(fit.iterations),
                "paic": fit.paic, "paic_se": fit.paic_se, "p_at_bound": bool(fit.p_at_bound)},
        "seed": int(seed),
        "version": package_version(),
    }
    if timestamp:
        report["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return report


def coefficient_csv(fit):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "estimate", "std_error"])
    for name, est, se in zip(fit.labels, fit.theta, fit.std_errors):
        w.writerow([name, fmt(est), fmt(se)])
    return buf.getvalue()


def write_report(fit, path, seed, format="json", timestamp=False):
    """Write a fit as the JSON report or the coefficient CSV table."""
    if format == "json":
        text = dumps(fit_report(fit, seed, timestamp)) + "\n"
    elif format == "csv":
        text = coefficient_csv(fit)
    else:
        raise ValueError(f"unknown report format {format!r}")
    with open(path, "w") as fh:
        fh.write(text)


def read_report(path):
    with open(path) as fh:
        return json.load(fh)


def fit_from_report(report):
    """Rebuild a :class:`FitResult` from a parsed JSON report."""
    coefs = report["coefficients"]
    cov = np.array(report["godambe_cov"], dtype=float)
    f = report["fit"]
    return FitResult(beta=np.array([c["estimate"] for c in coefs]),
                     phi=report["dispersion"]["phi"], p=report["dispersion"]["p"],
                     godambe_cov=cov, iterations=f["iterations"], converged=f["converged"],
                     names=tuple(c["name"] for c in coefs),
                     fixed=tuple(report.get("fixed", ())),
                     paic=f.get("paic"), paic_se=f.get("paic_se"),
                     p_at_bound=f.get("p_at_bound", False))


def table_csv(columns, rows):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["" if v is None or (isinstance(v, float) and math.isnan(v)) else
                    (fmt(v) if isinstance(v, (int, float, np.integer, np.floating)) else v)
                    for v in r])
    return buf.getvalue()


def curves_csv(curves):
    return table_csv(CURVE_COLUMNS, [tuple(float(v) for v in row) for row in curves])


def study_csv(result):
    return table_csv(STUDY_COLUMNS, [tuple(r[c] for c in STUDY_COLUMNS) for r in result.rows])
