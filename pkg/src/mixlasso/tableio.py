"""CSV schemas, manifests and digests for the command-line pipeline.

All numeric fields serialize with 17 significant digits so that
write-then-read round-trips reproduce doubles exactly.  Cluster labels
are 1-based on disk and 0-based in memory.
"""

from __future__ import annotations

import csv
import hashlib
from pathlib import Path

import numpy as np

from .errors import DataError
from .model import Dataset
from .pgibbs import PosteriorChain


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        return header, [row for row in reader]


def _parse_float(token: str, path: Path, lineno: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise DataError(f"{path}:{lineno}: not a number: {token!r}") from None


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(path: Path, entries: dict[str, str]) -> None:
    lines = [f"{key} = {entries[key]}" for key in sorted(entries)]
    Path(path).write_text("\n".join(lines) + "\n")


# ------------------------------------------------------------------- datasets

def write_dataset(out: Path, data: Dataset) -> None:
    header = ["y"] + [f"x{j}" for j in range(1, data.p + 1)]
    rows = ([data.y[i]] + list(data.X[i]) for i in range(data.n))
    write_csv(out / "data.csv", header, rows)
    if data.z_true is not None:
        write_csv(out / "truth_labels.csv", ["label"],
                  ([int(z) + 1] for z in data.z_true))
    if data.gamma_true is not None:
        header = ["cluster"] + [f"x{j}" for j in range(1, data.p + 1)]
        write_csv(out / "truth_gamma.csv", header,
                  ([k + 1] + list(map(int, row))
                   for k, row in enumerate(data.gamma_true)))


def read_data_csv(path: Path) -> Dataset:
    header, rows = read_csv(path)
    p = len(header) - 1
    if header[0] != "y" or p < 1 or header[1:] != [f"x{j}" for j in range(1, p + 1)]:
        raise DataError(f"{path}: expected header y,x1,...,xp")
    y = np.empty(len(rows))
    X = np.empty((len(rows), p))
    for idx, row in enumerate(rows):
        lineno = idx + 2
        if len(row) != p + 1:
            raise DataError(f"{path}:{lineno}: expected {p + 1} fields, got {len(row)}")
        y[idx] = _parse_float(row[0], path, lineno)
        X[idx] = [_parse_float(tok, path, lineno) for tok in row[1:]]
    return Dataset(y=y, X=X)


def read_labels_csv(path: Path) -> np.ndarray:
    header, rows = read_csv(path)
    if header != ["label"]:
        raise DataError(f"{path}: expected header 'label'")
    out = np.empty(len(rows), dtype=np.int64)
    for idx, row in enumerate(rows):
        try:
            out[idx] = int(row[0]) - 1
        except (ValueError, IndexError):
            raise DataError(f"{path}:{idx + 2}: bad label row") from None
    return out


def read_gamma_csv(path: Path) -> np.ndarray:
    header, rows = read_csv(path)
    if not header or header[0] != "cluster":
        raise DataError(f"{path}: expected header cluster,x1,...,xp")
    p = len(header) - 1
    out = np.zeros((len(rows), p), dtype=np.int64)
    for idx, row in enumerate(rows):
        if len(row) != p + 1:
            raise DataError(f"{path}:{idx + 2}: expected {p + 1} fields")
        out[idx] = [int(tok) for tok in row[1:]]
    return out


# ---------------------------------------------------------------- chain output

def write_chain(out: Path, chain: PosteriorChain) -> None:
    n = chain.samples[0].z.shape[0] if chain.samples else 0
    p = chain.samples[0].gamma.shape[1] if chain.samples else 0
    write_csv(out / "samples_z.csv",
              ["sample"] + [f"z{i}" for i in range(1, n + 1)],
              ([idx + 1] + [int(z) + 1 for z in st.z]
               for idx, st in enumerate(chain.samples)))
    xcols = [f"x{j}" for j in range(1, p + 1)]
    gamma_rows = ([idx + 1, k + 1] + list(map(int, st.gamma[k]))
                  for idx, st in enumerate(chain.samples)
                  for k in range(st.gamma.shape[0]))
    write_csv(out / "samples_gamma.csv", ["sample", "cluster"] + xcols, gamma_rows)
    tau_rows = ([idx + 1, k + 1] + list(st.tau2[k])
                for idx, st in enumerate(chain.samples)
                for k in range(st.tau2.shape[0]))
    write_csv(out / "samples_tau2.csv", ["sample", "cluster"] + xcols, tau_rows)
    write_csv(out / "trace.csv",
              ["iteration", "ess_min", "ess_final", "unique_paths",
               "resamples", "log_target", "acc_tau", "acc_s", "acc_gamma"],
              ([r.iteration, r.ess_min, r.ess_final, r.unique_paths,
                r.resample_count, r.log_target, r.acc_tau, r.acc_s,
                r.acc_gamma] for r in chain.trace))


def read_samples_z(path: Path) -> np.ndarray:
    header, rows = read_csv(path)
    if not header or header[0] != "sample":
        raise DataError(f"{path}: expected header sample,z1,...,zn")
    n = len(header) - 1
    out = np.empty((len(rows), n), dtype=np.int64)
    for idx, row in enumerate(rows):
        if len(row) != n + 1:
            raise DataError(f"{path}:{idx + 2}: expected {n + 1} fields")
        out[idx] = [int(tok) - 1 for tok in row[1:]]
    return out


def read_samples_gamma(path: Path) -> np.ndarray:
    """Selector samples as an (S, K, p) stack."""
    header, rows = read_csv(path)
    if header[:2] != ["sample", "cluster"]:
        raise DataError(f"{path}: expected header sample,cluster,x1,...,xp")
    p = len(header) - 2
    if not rows:
        raise DataError(f"{path}: no samples")
    K = max(int(r[1]) for r in rows)
    S = max(int(r[0]) for r in rows)
    out = np.zeros((S, K, p), dtype=np.int64)
    for idx, row in enumerate(rows):
        if len(row) != p + 2:
            raise DataError(f"{path}:{idx + 2}: expected {p + 2} fields")
        out[int(row[0]) - 1, int(row[1]) - 1] = [int(t) for t in row[2:]]
    return out


# -------------------------------------------------------------------- reports

def write_matrix_csv(path: Path, matrix: np.ndarray, prefix: str = "c") -> None:
    n = matrix.shape[1]
    write_csv(path, [f"{prefix}{j}" for j in range(1, n + 1)], matrix)


def read_matrix_csv(path: Path) -> np.ndarray:
    _, rows = read_csv(path)
    return np.array([[float(tok) for tok in row] for row in rows])


def write_mergetree(path: Path, merges: list[tuple[int, int, float]]) -> None:
    lines = [f"{a} {b} {fmt(h)}" for a, b, h in merges]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


# -------------------------------------------------------------------- prices

def read_price_csv(path: Path) -> tuple[np.ndarray, list[str]]:
    header, rows = read_csv(path)
    if header != ["date", "price"]:
        raise DataError(f"{path}: expected header date,price")
    if len(rows) < 2:
        raise DataError(f"{path}: need at least two prices")
    prices = np.empty(len(rows))
    dates = []
    for idx, row in enumerate(rows):
        lineno = idx + 2
        if len(row) != 2:
            raise DataError(f"{path}:{lineno}: expected 2 fields")
        dates.append(row[0])
        prices[idx] = _parse_float(row[1], path, lineno)
    if not np.all(prices > 0) or not np.all(np.isfinite(prices)):
        raise DataError(f"{path}: prices must be positive and finite")
    return prices, dates
