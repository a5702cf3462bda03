"""On-disk formats: MODPOLY v1 polynomial files, row files and job manifests."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .engine import BivariatePolynomial, EvalRow
from .modfunc import FunctionFamily
from .numerics import FormatError, format_complex, format_real, parse_complex, parse_real


def _atomic_write(path: Path, text: str):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- MODPOLY v1 ---------------------------------------------------------------

def format_modpoly(poly: BivariatePolynomial) -> str:
    """Text form; coefficient lines sorted by (X power, base power) descending."""
    fam = poly.family
    lines = ["MODPOLY v1", f"family {fam.kind}", f"level {fam.ell}"]
    lines += [f"param {k}={v}" for k, v in sorted(fam.params().items())]
    lines += [f"degX {poly.deg_X}", f"degJ {poly.deg_j}", f"height {poly.height}"]
    terms = poly.all_terms()
    for (i, k) in sorted(terms, reverse=True):
        if terms[(i, k)]:
            lines.append(f"coeff {i} {k} {terms[(i, k)]}")
    lines.append("END")
    return "\n".join(lines) + "\n"


def write_modpoly(poly: BivariatePolynomial, path) -> None:
    _atomic_write(Path(path), format_modpoly(poly))


def parse_modpoly(text: str) -> BivariatePolynomial:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "MODPOLY v1":
        raise FormatError("missing MODPOLY v1 header")
    if lines[-1] != "END":
        raise FormatError("missing END trailer (truncated file?)")
    head: Dict[str, str] = {}
    params: Dict[str, int] = {}
    terms: Dict[Tuple[int, int], int] = {}
    for ln in lines[1:-1]:
        key, _, rest = ln.partition(" ")
        try:
            if key == "coeff":
                i, k, c = rest.split()
                if (int(i), int(k)) in terms:
                    raise FormatError(f"duplicate coefficient {i} {k}")
                terms[(int(i), int(k))] = int(c)
            elif key == "param":
                name, _, val = rest.partition("=")
                params[name] = int(val)
            elif key in ("family", "level", "degX", "degJ", "height"):
                head[key] = rest
            else:
                raise FormatError(f"unknown line {ln!r}")
        except ValueError as exc:
            raise FormatError(f"bad line {ln!r}") from exc
    missing = {"family", "level", "degX", "degJ", "height"} - head.keys()
    if missing:
        raise FormatError(f"missing header fields {sorted(missing)}")
    fam = FunctionFamily(head["family"], int(head["level"]), **params)
    dX, dJ = int(head["degX"]), int(head["degJ"])
    if terms.pop((dX, 0), None) != 1:
        raise FormatError("polynomial is not monic in X")
    poly = BivariatePolynomial(fam, dX, dJ, terms)
    if poly.height != int(head["height"]):
        raise FormatError("height field does not match the coefficients")
    return poly


def read_modpoly(path) -> BivariatePolynomial:
    return parse_modpoly(Path(path).read_text())


# --- row files ------------------------------------------------------------------

def row_path(directory, k: int) -> Path:
    return Path(directory) / f"row_{k}.dat"


def format_row(row: EvalRow, precision: int) -> str:
    lines = [f"ROW {row.k} {len(row.values)} {precision}", format_complex(row.point)]
    lines += [format_real(v) for v in row.values]
    return "\n".join(lines) + "\n"


def write_row(directory, row: EvalRow, precision: int) -> Path:
    path = row_path(directory, row.k)
    _atomic_write(path, format_row(row, precision))
    return path


def read_row(path) -> Tuple[EvalRow, int]:
    """(row, precision); raises FormatError on anything malformed."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty row file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "ROW":
        raise FormatError(f"{path}: bad header")
    try:
        k, n, P = int(head[1]), int(head[2]), int(head[3])
    except ValueError as exc:
        raise FormatError(f"{path}: bad header") from exc
    if len(lines) != 4 + n:
        raise FormatError(f"{path}: expected {n} values, found {len(lines) - 4}")
    point = parse_complex(lines[1:4])
    values = [parse_real(ln) for ln in lines[4:]]
    return EvalRow(k, point, values), P


# --- job manifest ------------------------------------------------------------

@dataclass
class JobManifest:
    """Everything a worker needs to evaluate its share of the points."""

    kind: str
    ell: int
    params: Dict[str, int]
    deg_j: int
    precision: int
    sparse: bool
    safety: float
    npoints: int
    ranges: List[Tuple[int, int]]  # half-open [lo, hi) per worker
    directory: str = "."
    version: int = field(default=1)

    def __post_init__(self):
        self.ranges = [tuple(r) for r in self.ranges]
        pos = 0
        for lo, hi in self.ranges:
            if lo != pos or hi < lo:
                raise ValueError("point ranges do not partition the plan")
            pos = hi
        if pos != self.npoints:
            raise ValueError("point ranges do not cover the plan")

    @property
    def family(self) -> FunctionFamily:
        return FunctionFamily(self.kind, self.ell, **self.params)

    def to_json(self) -> str:
        d = asdict(self)
        d["ranges"] = [list(r) for r in self.ranges]
        return json.dumps(d, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "JobManifest":
        try:
            return cls(**json.loads(text))
        except (TypeError, json.JSONDecodeError) as exc:
            raise FormatError(f"bad manifest: {exc}") from exc

    def same_job(self, other: "JobManifest") -> bool:
        a, b = asdict(self), asdict(other)
        a.pop("directory"), b.pop("directory")
        return a == b


def split_ranges(n: int, workers: int) -> List[Tuple[int, int]]:
    """Contiguous, nearly equal ranges covering 0..n-1."""
    if workers < 1:
        raise ValueError("need at least one worker")
    q, r = divmod(n, workers)
    out, lo = [], 0
    for w in range(workers):
        hi = lo + q + (1 if w < r else 0)
        out.append((lo, hi))
        lo = hi
    return out


def manifest_path(directory) -> Path:
    return Path(directory) / "manifest.json"


def load_manifest(directory) -> Optional[JobManifest]:
    path = manifest_path(directory)
    if not path.exists():
        return None
    return JobManifest.from_json(path.read_text())


def save_manifest(m: JobManifest) -> JobManifest:
    """Write ``m`` unless a manifest exists; return the one on disk.

    Creation is exclusive, so concurrent workers agree on a single manifest.
    """
    path = manifest_path(m.directory)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_EXCL, 0o644)
    except FileExistsError:
        return load_manifest(m.directory)
    with os.fdopen(fd, "w") as fh:
        fh.write(m.to_json())
    return m
