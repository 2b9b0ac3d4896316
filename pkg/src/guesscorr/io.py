"""File formats: CSV matrices, report tables, config files, run manifests.

Conventions: comma-separated UTF-8 with a mandatory header row; response
cells are "1" (correct), "W" (wrong), "." (omitted); numbers print with 6
decimals; "NA" marks undefined values.  Scored matrices carry their
kind/scheme/option metadata in '#'-prefixed lines before the header, and on
reading, cells are snapped back to the exact grid value those metadata imply,
so a write/read round trip reproduces the in-memory matrix bit for bit.
All writes go through a temp file and rename, so readers never see partial
output.
"""

from __future__ import annotations

import csv
import io as _stdio
import json
import os
import tempfile
import time
from datetime import datetime, timezone
from typing import Optional

import numpy as np

from .errors import InputFormatError
from .matrix import (CORRECT, ItemBank, Kind, OMITTED, ResponseMatrix, Scheme,
                     ScoredMatrix, WRONG, _column_value_grid)

_RESPONSE_CODES = {"1": CORRECT, "W": WRONG, ".": OMITTED}
_CODE_TEXT = {CORRECT: "1", WRONG: "W", OMITTED: "."}

_SNAP_ATOL = 1e-4  # covers 6-decimal rounding with a wide margin


def format_number(x, decimals: int = 6) -> str:
    if x is None:
        return "NA"
    x = float(x)
    if np.isnan(x):
        return "NA"
    return f"{x:.{decimals}f}"


def atomic_write_text(path, text: str) -> None:
    """Write text to path via a temp file + rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(rows) -> str:
    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


# --- item banks -----------------------------------------------------------

def write_item_bank(bank: ItemBank, path) -> None:
    rows = [["item_id", "options"]]
    rows += [[iid, str(m)] for iid, m in zip(bank.item_ids, bank.option_counts)]
    atomic_write_text(path, _csv_text(rows))


def read_item_bank(path) -> ItemBank:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["item_id", "options"]:
            raise InputFormatError(f"{path}: expected header 'item_id,options'")
        ids, counts = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise InputFormatError(f"{path}:{lineno}: need item_id and options")
            ids.append(row[0].strip())
            try:
                counts.append(int(row[1]))
            except ValueError as e:
                raise InputFormatError(
                    f"{path}:{lineno}: options must be an integer, got {row[1]!r}") from e
    return ItemBank(tuple(ids), tuple(counts))


# --- response matrices ----------------------------------------------------

def write_response_matrix(matrix: ResponseMatrix, path) -> None:
    rows = [["person_id", *matrix.bank.item_ids]]
    for i, pid in enumerate(matrix.person_ids):
        rows.append([pid, *(_CODE_TEXT[int(c)] for c in matrix.codes[i])])
    atomic_write_text(path, _csv_text(rows))


def read_response_matrix(path, bank: ItemBank) -> ResponseMatrix:
    """Read raw responses; file column order wins, ids must exist in the bank."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "person_id":
            raise InputFormatError(f"{path}: first header column must be 'person_id'")
        item_ids = [h.strip() for h in header[1:]]
        known = {iid: m for iid, m in zip(bank.item_ids, bank.option_counts)}
        for iid in item_ids:
            if iid not in known:
                raise InputFormatError(f"{path}: unknown item id {iid!r}")
        persons, code_rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(item_ids) + 1:
                raise InputFormatError(
                    f"{path}:{lineno}: expected {len(item_ids) + 1} cells, got {len(row)}")
            persons.append(row[0].strip())
            codes = []
            for iid, cell in zip(item_ids, row[1:]):
                cell = cell.strip()
                if cell not in _RESPONSE_CODES:
                    raise InputFormatError(
                        f"{path}:{lineno}: row {row[0].strip()!r}, column {iid!r}: "
                        f"invalid outcome code {cell!r} (want '1', 'W' or '.')")
                codes.append(_RESPONSE_CODES[cell])
            code_rows.append(codes)
    sub_bank = ItemBank(tuple(item_ids), tuple(known[iid] for iid in item_ids))
    return ResponseMatrix(tuple(persons), sub_bank,
                          np.array(code_rows, dtype=np.int8).reshape(len(persons), len(item_ids)))


# --- scored matrices ------------------------------------------------------

def write_scored_matrix(matrix: ScoredMatrix, path) -> None:
    meta = [
        "# guesscorr scored matrix",
        f"# kind={matrix.kind.value}",
        f"# scheme={matrix.scheme.value if matrix.scheme else '-'}",
        "# options=" + ",".join(f"{iid}:{m}" for iid, m in
                                zip(matrix.bank.item_ids, matrix.bank.option_counts)),
    ]
    rows = [["person_id", *matrix.bank.item_ids]]
    for i, pid in enumerate(matrix.person_ids):
        rows.append([pid, *(format_number(v) for v in matrix.values[i])])
    atomic_write_text(path, "\n".join(meta) + "\n" + _csv_text(rows))


def _parse_scored_metadata(lines, path):
    meta = {}
    for line in lines:
        body = line[1:].strip()
        if "=" in body:
            key, _, value = body.partition("=")
            meta[key.strip()] = value.strip()
    if "kind" not in meta:
        raise InputFormatError(f"{path}: scored matrix needs a '# kind=...' metadata line")
    try:
        kind = Kind(meta["kind"])
    except ValueError as e:
        raise InputFormatError(f"{path}: unknown kind {meta['kind']!r}") from e
    scheme_text = meta.get("scheme", "-")
    scheme = None if scheme_text in ("-", "", "none") else Scheme(scheme_text)
    if "options" not in meta:
        raise InputFormatError(f"{path}: scored matrix needs a '# options=...' metadata line")
    ids, counts = [], []
    for part in meta["options"].split(","):
        if not part.strip():
            continue
        iid, _, m = part.partition(":")
        try:
            counts.append(int(m))
        except ValueError as e:
            raise InputFormatError(f"{path}: bad option count in {part!r}") from e
        ids.append(iid.strip())
    return kind, scheme, ItemBank(tuple(ids), tuple(counts))


def read_scored_matrix(path) -> ScoredMatrix:
    """Read a scored matrix, snapping cells to the exact grid values."""
    with open(path, encoding="utf-8", newline="") as fh:
        meta_lines = []
        pos = fh.tell()
        while True:
            pos = fh.tell()
            line = fh.readline()
            if line.startswith("#"):
                meta_lines.append(line.rstrip("\n"))
            else:
                fh.seek(pos)
                break
        kind, scheme, bank = _parse_scored_metadata(meta_lines, path)
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "person_id":
            raise InputFormatError(f"{path}: first header column must be 'person_id'")
        if [h.strip() for h in header[1:]] != list(bank.item_ids):
            raise InputFormatError(f"{path}: header item ids do not match options metadata")
        grids = [np.array(_column_value_grid(kind, scheme, m))
                 for m in bank.option_counts]
        persons, value_rows = [], []
        for lineno, row in enumerate(reader, start=len(meta_lines) + 2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(bank) + 1:
                raise InputFormatError(
                    f"{path}:{lineno}: expected {len(bank) + 1} cells, got {len(row)}")
            persons.append(row[0].strip())
            vals = []
            for j, cell in enumerate(row[1:]):
                try:
                    v = float(cell)
                except ValueError as e:
                    raise InputFormatError(
                        f"{path}:{lineno}: row {row[0].strip()!r}, column "
                        f"{bank.item_ids[j]!r}: not a number: {cell!r}") from e
                dist = np.abs(grids[j] - v)
                nearest = int(dist.argmin())
                if dist[nearest] > _SNAP_ATOL:
                    raise InputFormatError(
                        f"{path}:{lineno}: row {row[0].strip()!r}, column "
                        f"{bank.item_ids[j]!r}: value {cell!r} is not a valid "
                        f"{kind.value} score for {bank.option_counts[j]} options")
                vals.append(float(grids[j][nearest]))
            value_rows.append(vals)
    values = np.array(value_rows, dtype=np.float64).reshape(len(persons), len(bank))
    return ScoredMatrix(tuple(persons), bank, values, kind, scheme)


# --- tabular reports ------------------------------------------------------

def write_score_vectors(scores, path) -> None:
    rows = [["role", "id", "score"]]
    rows += [["person", pid, format_number(s)]
             for pid, s in zip(scores.person_ids, scores.person_scores)]
    rows += [["item", iid, format_number(s)]
             for iid, s in zip(scores.item_ids, scores.item_scores)]
    atomic_write_text(path, _csv_text(rows))


def write_prune_report(report, path) -> None:
    rows = [["pass", "axis", "index", "id", "trigger"]]
    rows += [[str(r.pass_no), r.axis, str(r.index), r.label, r.trigger]
             for r in report.removals]
    atomic_write_text(path, _csv_text(rows))


def write_item_stats(stats, path) -> None:
    rows = [["item_id", "n", "p", "var_pop", "var_sample", "k_j",
             "r_raw", "r_corrected", "r_rest", "valid", "notes"]]
    for s in stats:
        valid = "NA" if s.valid is None else ("1" if s.valid else "0")
        rows.append([s.item_id, str(s.n), format_number(s.p),
                     format_number(s.var_pop), format_number(s.var_sample),
                     format_number(s.k_j), format_number(s.r_raw),
                     format_number(s.r_corrected), format_number(s.r_rest),
                     valid, "; ".join(s.notes)])
    atomic_write_text(path, _csv_text(rows))


def write_intercorrelations(inter, path) -> None:
    rows = [["item_s", "item_t", "r_raw", "r_scaled", "flag"]]
    ids = inter.item_ids
    for s in range(len(ids)):
        for t in range(s, len(ids)):
            rows.append([ids[s], ids[t], format_number(inter.raw[s, t]),
                         format_number(inter.scaled[s, t]), str(inter.flags[s, t])])
    atomic_write_text(path, _csv_text(rows))


def write_reliability_reports(reports, path) -> None:
    lines = []
    for rep in reports:
        if isinstance(rep, tuple):  # (method name, reason) for undefined results
            method, reason = rep
            lines.append(f"method: {method}")
            lines.append("value: NA")
            lines.append(f"reason: {reason}")
        else:
            lines.append(f"method: {rep.method.value}")
            lines.append(f"value: {format_number(rep.value)}")
            if rep.detail is not None:
                lines.append(f"r_halves: {format_number(rep.detail.r_halves)}")
                lines.append(f"r_difference: {format_number(rep.detail.r_difference)}")
                lines.append(f"r_full_spearman_brown: {format_number(rep.detail.r_full)}")
            if rep.warning:
                lines.append(f"warning: {rep.warning}")
        lines.append("")
    atomic_write_text(path, "\n".join(lines))


def write_irt_params(params, person_ids, item_ids, path) -> None:
    rows = [["role", "id", "potential", "selectivity", "guessing"]]
    for i, pid in enumerate(person_ids):
        rows.append(["person", pid, format_number(params.theta[i]),
                     format_number(params.d_person[i]), format_number(params.c_person[i])])
    for j, iid in enumerate(item_ids):
        rows.append(["item", iid, format_number(params.delta[j]),
                     format_number(params.d_item[j]), format_number(params.c_item[j])])
    atomic_write_text(path, _csv_text(rows))


def write_fit_diagnostics(diag, path) -> None:
    lines = [
        f"model: {diag.model.value}",
        f"converged: {'yes' if diag.converged else 'no'}",
        f"stop_reason: {diag.stop_reason}",
        f"iterations: {diag.iterations}",
        f"final_log_likelihood: {format_number(diag.final_ll)}",
        f"gradient_norm: {format_number(diag.grad_norm)}",
        f"parameters_at_bounds: {diag.n_clamped}",
        "",
    ]
    atomic_write_text(path, "\n".join(lines))


def write_recovery_rows(report, path) -> None:
    """Long format: one row per estimator per replication."""
    rows = [["replication", "estimator", "value"]]
    for r, row in enumerate(report.rows):
        for name in sorted(row):
            rows.append([str(r), name, format_number(row[name])])
    atomic_write_text(path, _csv_text(rows))


def write_recovery_summary(report, path) -> None:
    rows = [["estimator", "mean", "sd", "replications"]]
    summary = report.summary()
    for name in sorted(summary):
        mean, sd, count = summary[name]
        rows.append([name, format_number(mean), format_number(sd), str(count)])
    atomic_write_text(path, _csv_text(rows))


# --- config files and manifests -------------------------------------------

def read_config_file(path) -> dict:
    """Parse a simple 'key = value' file ('#' comments allowed).

    Values become int, float, or bare string; comma-separated values become
    lists.  This covers the flat subset of TOML the tool's config files use.
    """
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InputFormatError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip().strip('"').strip("'")
            if not key:
                raise InputFormatError(f"{path}:{lineno}: empty key")
            if "," in value:
                out[key] = [_parse_scalar(v.strip()) for v in value.split(",") if v.strip()]
            else:
                out[key] = _parse_scalar(value)
    return out


def _parse_scalar(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def run_timestamp() -> str:
    """ISO timestamp; honours SOURCE_DATE_EPOCH for reproducible output."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch else time.time()
    return datetime.fromtimestamp(t, timezone.utc).isoformat()


def write_manifest(path, command: str, argv: list, inputs: dict,
                   outputs: list, seed: Optional[int], config: dict,
                   version: str) -> None:
    manifest = {
        "command": command,
        "argv": list(argv),
        "inputs": inputs,
        "outputs": list(outputs),
        "seed": seed,
        "config": config,
        "version": version,
        "timestamp": run_timestamp(),
    }
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
