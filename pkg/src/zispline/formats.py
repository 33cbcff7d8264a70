"""File formats: dataset CSV, model spec and model grid text files, JSON fit
reports, curve sample CSV, and plain-text result tables.

Data CSV: UTF-8 with a header row. The first column is the count response
unless another column is named; remaining columns are real covariates. A
missing or non-numeric cell is a hard error naming the line.

Model spec file: flat ``key = value`` lines, ``#`` comments allowed.

    family = zip
    count.intercept = true
    count.terms = bmi:spline, f3:linear
    count.bmi.degree = 3
    count.bmi.knots = 3
    count.bmi.regime = variable
    count.bmi.natural = false
    zero.intercept = true
    zero.terms = bmi:linear

``knots`` takes either a single integer (number of quantile knots) or a list
of numbers (explicit locations, for example ``17.5 21 24``).

Model grid file: the same keys, with ``|`` separating alternatives for any
key; the grid is the cartesian product over all axes, deduplicated after
dropping spline options that do not apply to an alternative.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from .estimation import FittedModel
from .model import ComponentSpec, Dataset, LinearTerm, ModelSpec, SplineTerm, assemble
from .selection import GridReport
from .simulation import StudyReport

__all__ = [
    "load_dataset",
    "write_dataset",
    "parse_model_spec",
    "parse_grid",
    "spec_to_dict",
    "spec_from_dict",
    "fit_report",
    "reevaluate_report",
    "curve_samples",
    "write_curve_csv",
    "write_json",
    "render_study_table",
    "study_report_dict",
    "render_grid_table",
    "grid_report_dict",
    "fmt",
]


def fmt(x, digits: int = 4) -> str:
    """Human-table number: fixed significant digits."""
    if x is None or (isinstance(x, float) and not np.isfinite(x)):
        return "."
    return f"{x:.{digits}g}"


def _full(x: float) -> str:
    """Machine-file number: round-trip exact."""
    return f"{float(x):.17g}"


# ----- dataset CSV -----------------------------------------------------------


def load_dataset(path, response: str | None = None) -> Dataset:
    """Read a dataset CSV; the response defaults to the first column."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if response is None:
            response = header[0]
        if response not in header:
            raise ValueError(f"{path}: no column named {response!r} in header {header}")
        resp_idx = header.index(response)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(
                    f"{path} line {lineno}: expected {len(header)} cells, found {len(row)}"
                )
            parsed = []
            for name, cell in zip(header, row):
                cell = cell.strip()
                if cell == "":
                    raise ValueError(f"{path} line {lineno}: missing value in column {name!r}")
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path} line {lineno}: non-numeric value {cell!r} in column {name!r}"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=float)
    y = arr[:, resp_idx]
    X = np.delete(arr, resp_idx, axis=1)
    columns = tuple(name for i, name in enumerate(header) if i != resp_idx)
    if np.any(y < 0) or np.any(y != np.floor(y)):
        bad = int(np.argmax((y < 0) | (y != np.floor(y))))
        raise ValueError(
            f"{path} line {bad + 2}: response {response!r} must be a non-negative integer"
        )
    return Dataset(y=y.astype(np.int64), X=X, columns=columns)


def write_dataset(path, data: Dataset, response: str = "count") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([response, *data.columns])
        for i in range(data.n):
            writer.writerow([int(data.y[i]), *(_full(v) for v in data.X[i])])


# ----- model spec text -------------------------------------------------------


def _parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip().lower()
        if key in out:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def _parse_bool(value: str, key: str) -> bool:
    v = value.strip().lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"{key}: expected a boolean, got {value!r}")


def _parse_knots(value: str, key: str):
    """Single integer -> quantile knot count; numbers -> explicit locations."""
    tokens = value.replace(",", " ").split()
    if not tokens:
        raise ValueError(f"{key}: empty knots value")
    if len(tokens) == 1:
        tok = tokens[0]
        try:
            as_float = float(tok)
        except ValueError:
            raise ValueError(f"{key}: expected a number, got {tok!r}") from None
        if "." not in tok and "e" not in tok.lower() and as_float == int(as_float):
            return int(as_float), None
        return None, (as_float,)
    try:
        return None, tuple(float(t) for t in tokens)
    except ValueError:
        raise ValueError(f"{key}: expected numbers, got {value!r}") from None


def _build_terms(kv: dict[str, str], comp: str, columns) -> tuple:
    spec = kv.get(f"{comp}.terms", "").strip()
    if not spec:
        return ()
    terms = []
    for chunk in spec.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" not in chunk:
            raise ValueError(f"{comp}.terms: expected 'column:kind', got {chunk!r}")
        name, kind = (s.strip() for s in chunk.split(":", 1))
        if name not in columns:
            raise ValueError(f"{comp}.terms: unknown column {name!r}; data has {list(columns)}")
        col = columns.index(name)
        kind = kind.lower()
        if kind == "linear":
            terms.append(LinearTerm(col))
        elif kind == "spline":
            prefix = f"{comp}.{name}"
            degree = int(kv.get(f"{prefix}.degree", "3"))
            natural = _parse_bool(kv.get(f"{prefix}.natural", "false"), f"{prefix}.natural")
            regime = kv.get(f"{prefix}.regime", "fixed").strip().lower()
            if regime not in ("fixed", "variable"):
                raise ValueError(f"{prefix}.regime: expected fixed or variable, got {regime!r}")
            n_knots, explicit = _parse_knots(kv.get(f"{prefix}.knots", "1"), f"{prefix}.knots")
            terms.append(
                SplineTerm(
                    col,
                    degree=degree,
                    n_knots=n_knots if n_knots is not None else 0,
                    free_knots=regime == "variable",
                    natural=natural,
                    knots=explicit,
                )
            )
        else:
            raise ValueError(f"{comp}.terms: kind must be linear or spline, got {kind!r}")
    return tuple(terms)


def _spec_from_kv(kv: dict[str, str], columns) -> ModelSpec:
    family = kv.get("family", "").strip().lower()
    if not family:
        raise ValueError("missing required key 'family'")
    count = ComponentSpec(
        terms=_build_terms(kv, "count", columns),
        intercept=_parse_bool(kv.get("count.intercept", "true"), "count.intercept"),
    )
    zero = None
    if family in ("zip", "zinb"):
        zero = ComponentSpec(
            terms=_build_terms(kv, "zero", columns),
            intercept=_parse_bool(kv.get("zero.intercept", "true"), "zero.intercept"),
        )
    return ModelSpec(family=family, count=count, zero=zero)


def parse_model_spec(text: str, columns) -> ModelSpec:
    """Parse a model spec file body against the dataset's covariate names."""
    columns = tuple(columns)
    return _spec_from_kv(_parse_kv(text), columns)


def parse_grid(text: str, columns) -> list[tuple[str, ModelSpec]]:
    """Expand a grid file into named model specs (cartesian product of axes)."""
    columns = tuple(columns)
    kv = _parse_kv(text)
    axes: list[tuple[str, list[str]]] = []
    for key, value in kv.items():
        alternatives = [alt.strip() for alt in value.split("|")]
        axes.append((key, alternatives))

    combos = [{}]
    for key, alternatives in axes:
        combos = [dict(c, **{key: alt}) for c in combos for alt in alternatives]

    seen: dict[ModelSpec, str] = {}
    out: list[tuple[str, ModelSpec]] = []
    for i, combo in enumerate(combos):
        try:
            spec = _spec_from_kv(combo, columns)
        except ValueError as exc:
            raise ValueError(f"grid combination {i}: {exc}") from None
        if spec in seen:
            continue
        name = f"g{len(out):03d}:{_spec_summary(spec, columns)}"
        seen[spec] = name
        out.append((name, spec))
    return out


def _term_summary(t, columns) -> str:
    if isinstance(t, LinearTerm):
        return f"{columns[t.col]}"
    bits = [f"{columns[t.col]}~s(d{t.degree},m{t.n_knots}"]
    if t.free_knots:
        bits.append(",var")
    if t.natural:
        bits.append(",nat")
    return "".join(bits) + ")"


def _spec_summary(spec: ModelSpec, columns) -> str:
    count = "+".join([_term_summary(t, columns) for t in spec.count.terms]) or "1"
    s = f"{spec.family}[{count}]"
    if spec.zero_inflated:
        zero = "+".join([_term_summary(t, columns) for t in spec.zero.terms]) or "1"
        s += f"[z:{zero}]"
    return s


# ----- JSON fit reports ------------------------------------------------------


def spec_to_dict(spec: ModelSpec, columns) -> dict:
    def term_dict(t):
        if isinstance(t, LinearTerm):
            return {"column": columns[t.col], "kind": "linear"}
        return {
            "column": columns[t.col],
            "kind": "spline",
            "degree": t.degree,
            "n_knots": t.n_knots,
            "regime": "variable" if t.free_knots else "fixed",
            "natural": t.natural,
            "knots": list(t.knots) if t.knots is not None else None,
        }

    out = {
        "family": spec.family,
        "count": {
            "intercept": spec.count.intercept,
            "terms": [term_dict(t) for t in spec.count.terms],
        },
    }
    if spec.zero_inflated:
        out["zero"] = {
            "intercept": spec.zero.intercept,
            "terms": [term_dict(t) for t in spec.zero.terms],
        }
    return out


def spec_from_dict(d: dict, columns) -> ModelSpec:
    columns = tuple(columns)

    def term_from(td):
        col = columns.index(td["column"])
        if td["kind"] == "linear":
            return LinearTerm(col)
        return SplineTerm(
            col,
            degree=td["degree"],
            n_knots=td["n_knots"],
            free_knots=td["regime"] == "variable",
            natural=td["natural"],
            knots=tuple(td["knots"]) if td.get("knots") else None,
        )

    count = ComponentSpec(
        terms=tuple(term_from(td) for td in d["count"]["terms"]),
        intercept=d["count"]["intercept"],
    )
    zero = None
    if "zero" in d:
        zero = ComponentSpec(
            terms=tuple(term_from(td) for td in d["zero"]["terms"]),
            intercept=d["zero"]["intercept"],
        )
    return ModelSpec(family=d["family"], count=count, zero=zero)


def fit_report(result: FittedModel, columns, *, seed=None, options=None, cv=None) -> dict:
    """Machine-readable fit report: spec echo, parameters, knots, scores."""
    p = result.dimension
    report = {
        "spec": spec_to_dict(result.spec, columns),
        "n": result.n,
        "loglik": result.loglik,
        "dimension": p,
        "aic": -2.0 * result.loglik + 2.0 * p,
        "bic": -2.0 * result.loglik + p * float(np.log(result.n)),
        "converged": result.converged,
        "ebok_iterations": result.ebok_iterations,
        "warnings": list(result.warnings),
        "params": [
            {"name": name, "value": value} for name, value in result.param_table()
        ],
        "knots": {name: list(map(float, k)) for name, k in result.knots.items()},
    }
    if seed is not None:
        report["seed"] = seed
    if options:
        report["options"] = dict(options)
    if cv is not None:
        report["cv"] = cv
    return report


def reevaluate_report(report: dict, data: Dataset) -> float:
    """Rebuild the model a report describes and return its log-likelihood at
    the reported parameters (knots pinned at their reported final values)."""
    spec = spec_from_dict(report["spec"], data.columns)
    model = assemble(spec, data)
    by_name = {e["name"]: e["value"] for e in report["params"]}
    params = np.array([by_name[name] for name in model.slot_names])
    return model.log_likelihood(params)


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, allow_nan=True)
        fh.write("\n")


# ----- curve samples ---------------------------------------------------------


def curve_samples(result: FittedModel, n_points: int = 200):
    """Rows sampling each spline term: covariate value, term contribution, and
    the fitted mu, pi, mean along that covariate with all other covariates at
    their training means."""
    data = result.model.data
    means = data.X.mean(axis=0)
    rows = []
    for term in result.model.terms:
        if not term.is_spline:
            continue
        interior = result.knots[term.name]
        grid = term.grid.with_interior(interior)
        us = np.linspace(grid.a, grid.b, n_points)
        contributions = result.model.term_curve(result.params, term.name, us)
        X = np.tile(means, (n_points, 1))
        X[:, term.col] = us
        mu, pi, mean = result.model.predict(result.params, X=X)
        for i in range(n_points):
            rows.append(
                {
                    "term": term.name,
                    "column": data.columns[term.col],
                    "value": us[i],
                    "contribution": contributions[i],
                    "mu": mu[i],
                    "pi": pi[i],
                    "mean": mean[i],
                }
            )
    return rows


def write_curve_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["term", "column", "value", "contribution", "mu", "pi", "mean"])
        for r in rows:
            writer.writerow(
                [
                    r["term"],
                    r["column"],
                    _full(r["value"]),
                    _full(r["contribution"]),
                    _full(r["mu"]),
                    _full(r["pi"]),
                    _full(r["mean"]),
                ]
            )


# ----- tables ----------------------------------------------------------------

_ROW_BLOCKS = (
    ("sup", ("best", "med", "sd")),
    ("l1", ("best", "med", "sd")),
    ("mre", ("best", "med", "sd")),
    ("aic", ("best", "med", "sd")),
    ("bic", ("best", "med")),
)


def render_study_table(report: StudyReport, title: str = "") -> str:
    """Plain-text table: one column per fitted family, criterion blocks as rows."""
    names = report.family_names
    header = ["criterion", "stat", *names]
    lines = [title] if title else []
    rows = []
    for criterion, stats in _ROW_BLOCKS:
        if criterion not in report.criteria:
            continue
        best = report.best_counts(criterion)
        med = report.median(criterion)
        sd = report.sd(criterion)
        for stat in stats:
            if stat == "best":
                rows.append([criterion, "best", *[str(int(v)) for v in best]])
            elif stat == "med":
                rows.append(["", "med.", *[fmt(v) for v in med]])
            else:
                rows.append(["", "sd", *[f"({fmt(v)})" for v in sd]])
    zmed = report.zero_coef_median()
    zsd = report.zero_coef_sd()
    for ci, label in enumerate(("b0_zero", "b1_zero")):
        rows.append([label, "med.", *[fmt(v) for v in zmed[:, ci]]])
        rows.append(["", "sd", *[f"({fmt(v)})" for v in zsd[:, ci]]])
    if report.failures:
        rows.append(["failures", "", *[str(report.failures.get(n, 0)) for n in names]])

    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    out = []
    for r in [header, *rows]:
        out.append("  ".join(str(c).rjust(w) for c, w in zip(r, widths)))
    return "\n".join(lines + out) + "\n"


def study_report_dict(report: StudyReport) -> dict:
    out = {
        "families": report.family_names,
        "replications": report.replications,
        "criteria": {},
        "zero_component": {
            "median": report.zero_coef_median().tolist(),
            "sd": report.zero_coef_sd().tolist(),
        },
        "failures": report.failures,
    }
    for criterion in report.criteria:
        out["criteria"][criterion] = {
            "best": report.best_counts(criterion).tolist(),
            "median": report.median(criterion).tolist(),
            "sd": report.sd(criterion).tolist(),
            "values": report.values[criterion].tolist(),
        }
    return out


def render_grid_table(report: GridReport) -> str:
    header = ["rank", "name", "family", "dim", "loglik", "aic", "bic", "cv_mre", "status"]
    rows = []
    for rank, entry in enumerate(report.ranked_entries(), start=1):
        s = entry.score
        status = "winner" if entry.index == report.winner else ("ok" if s.converged else "flagged")
        rows.append(
            [
                str(rank),
                entry.name,
                entry.spec.family,
                str(s.dimension),
                fmt(s.loglik, 6),
                fmt(s.aic, 6),
                fmt(s.bic, 6),
                fmt(s.cv_mre) if s.cv_mre is not None else ".",
                status,
            ]
        )
    for entry in report.entries:
        if not entry.ok:
            rows.append(["-", entry.name, entry.spec.family, ".", ".", ".", ".", ".", f"failed: {entry.error}"])
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)) for r in [header, *rows]]
    return "\n".join(lines) + "\n"


def grid_report_dict(report: GridReport, columns) -> dict:
    entries = []
    for entry in report.entries:
        e = {
            "index": entry.index,
            "name": entry.name,
            "spec": spec_to_dict(entry.spec, columns),
        }
        if entry.ok:
            e.update(
                {
                    "loglik": entry.score.loglik,
                    "dimension": entry.score.dimension,
                    "aic": entry.score.aic,
                    "bic": entry.score.bic,
                    "cv_mre": entry.score.cv_mre,
                    "converged": entry.score.converged,
                }
            )
            if entry.cv is not None:
                e["cv"] = {
                    "value": entry.cv.value,
                    "kind": entry.cv.kind,
                    "folds": entry.cv.plan.k,
                    "n_clamped": entry.cv.n_clamped,
                    "n_retried": entry.cv.n_retried,
                    "valid": entry.cv.valid,
                }
        else:
            e["error"] = entry.error
        entries.append(e)
    return {
        "entries": entries,
        "ranked": report.ranked,
        "winner": report.winner,
        "top_t": report.top_t,
    }
