"""Reading and writing genotype matrices, genetic maps, phenotypes and reports.

Individuals are rows and SNPs are columns. Missing genotype calls are held
as NaN in a float64 matrix; loading never recodes or imputes.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import DataError

MISSING_TOKENS = frozenset({"NA", "", "?"})
_CODES = {"0": 0.0, "1": 1.0, "2": 2.0}


class ParseError(DataError):
    """Malformed input file; the message carries the file and line number."""


@dataclass(frozen=True)
class SnpMap:
    """Chromosome and genetic position (cM) per SNP; unknown positions are NaN."""

    snp_ids: tuple
    chromosomes: tuple
    positions: np.ndarray

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=np.float64)
        object.__setattr__(self, "snp_ids", tuple(self.snp_ids))
        object.__setattr__(self, "chromosomes", tuple(str(c) for c in self.chromosomes))
        object.__setattr__(self, "positions", positions)
        if not (len(self.snp_ids) == len(self.chromosomes) == positions.shape[0]):
            raise DataError("SnpMap fields have inconsistent lengths")
        seen = set()
        for snp in self.snp_ids:
            if snp in seen:
                raise DataError(f"duplicate snp_id {snp!r} in map")
            seen.add(snp)
        if np.any(positions[~np.isnan(positions)] < 0):
            raise DataError("negative genetic position in map")

    def __len__(self):
        return len(self.snp_ids)

    @property
    def mapped(self):
        """Boolean mask of SNPs with a known position."""
        return ~np.isnan(self.positions)

    def index(self):
        return {snp: i for i, snp in enumerate(self.snp_ids)}

    def distance(self, a, b):
        """Within-chromosome distance in cM between SNPs ``a`` and ``b`` (IDs).

        Returns ``inf`` across chromosomes and NaN if either SNP is unmapped.
        """
        idx = self.index()
        i, j = idx[a], idx[b]
        if self.chromosomes[i] != self.chromosomes[j]:
            return math.inf
        return abs(float(self.positions[i] - self.positions[j]))

    def subset(self, snp_ids):
        """Map restricted to ``snp_ids`` in the given order."""
        idx = self.index()
        try:
            rows = [idx[s] for s in snp_ids]
        except KeyError as exc:
            raise DataError(f"SNP {exc.args[0]!r} is not in the map") from None
        return SnpMap(
            [self.snp_ids[r] for r in rows],
            [self.chromosomes[r] for r in rows],
            self.positions[rows],
        )

    def take(self, columns):
        columns = np.asarray(columns, dtype=int)
        return SnpMap(
            [self.snp_ids[c] for c in columns],
            [self.chromosomes[c] for c in columns],
            self.positions[columns],
        )


@dataclass
class GenotypeDataset:
    """Genotype matrix with IDs and optional map and phenotype."""

    individuals: list
    snp_ids: list
    X: np.ndarray
    map: SnpMap | None = None
    phenotype: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.individuals = [str(i) for i in self.individuals]
        self.snp_ids = [str(s) for s in self.snp_ids]
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2:
            raise DataError("genotype matrix must be 2-D")
        n, m = self.X.shape
        if len(self.individuals) != n:
            raise DataError(f"{len(self.individuals)} individual IDs for {n} rows")
        if len(self.snp_ids) != m:
            raise DataError(f"{len(self.snp_ids)} SNP IDs for {m} columns")
        observed = self.X[~np.isnan(self.X)]
        if np.any((observed != 0) & (observed != 1) & (observed != 2)):
            raise DataError("genotype codes must be 0, 1, 2 or missing")
        if self.map is not None:
            if set(self.map.snp_ids) != set(self.snp_ids) or len(self.map) != m:
                raise DataError("map does not cover exactly the dataset SNPs")
            if list(self.map.snp_ids) != self.snp_ids:
                self.map = self.map.subset(self.snp_ids)
        if self.phenotype is not None:
            self.phenotype = np.asarray(self.phenotype, dtype=np.float64)
            if self.phenotype.shape != (n,):
                raise DataError(f"phenotype has shape {self.phenotype.shape}, expected ({n},)")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def m(self):
        return self.X.shape[1]

    @property
    def missing_mask(self):
        return np.isnan(self.X)

    def take_snps(self, columns):
        """Dataset restricted to the given column indices (order kept)."""
        columns = np.asarray(columns, dtype=int)
        return GenotypeDataset(
            self.individuals,
            [self.snp_ids[c] for c in columns],
            self.X[:, columns],
            map=None if self.map is None else self.map.take(columns),
            phenotype=self.phenotype,
        )

    def take_rows(self, rows):
        rows = np.asarray(rows, dtype=int)
        return GenotypeDataset(
            [self.individuals[r] for r in rows],
            self.snp_ids,
            self.X[rows],
            map=self.map,
            phenotype=None if self.phenotype is None else self.phenotype[rows],
        )


def _parse_cell(token, path, lineno):
    token = token.strip()
    if token in MISSING_TOKENS:
        return math.nan
    try:
        return _CODES[token]
    except KeyError:
        raise ParseError(f"{path}:{lineno}: invalid genotype token {token!r}") from None


def _read_rows(path, fmt):
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    with open(path, newline="") as fh:
        if fmt == "csv":
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if row:
                    yield lineno, row
        elif fmt == "raw":
            header_seen = False
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                if not header_seen:
                    if not line.startswith("#"):
                        raise ParseError(f"{path}:{lineno}: raw header must start with '#'")
                    header_seen = True
                    yield lineno, line[1:].split()
                elif not line.startswith("#"):
                    yield lineno, line.split()
        else:
            raise ValueError(f"unknown genotype format {fmt!r}")


def load_genotypes(path, format="csv"):
    """Load a genotype file into a :class:`GenotypeDataset`.

    The CSV layout is a header ``id,<snp_1>,...,<snp_m>`` followed by one
    row per individual. The raw layout carries the same content separated by
    whitespace, with the header line prefixed by ``#``.
    """
    rows = _read_rows(path, format)
    try:
        _, header = next(rows)
    except StopIteration:
        raise ParseError(f"{path}:1: empty genotype file") from None
    snp_ids = [h.strip() for h in header[1:]]
    if not snp_ids:
        raise ParseError(f"{path}:1: header lists no SNPs")
    if len(set(snp_ids)) != len(snp_ids):
        raise ParseError(f"{path}:1: duplicate SNP IDs in header")
    m = len(snp_ids)
    individuals, data = [], []
    for lineno, row in rows:
        if len(row) != m + 1:
            raise ParseError(f"{path}:{lineno}: expected {m + 1} fields, found {len(row)}")
        individuals.append(row[0].strip())
        data.append([_parse_cell(tok, path, lineno) for tok in row[1:]])
    if not individuals:
        raise ParseError(f"{path}: no individuals")
    if len(set(individuals)) != len(individuals):
        raise ParseError(f"{path}: duplicate individual IDs")
    return GenotypeDataset(individuals, snp_ids, np.array(data, dtype=np.float64))


def _genotype_token(value):
    return "NA" if np.isnan(value) else str(int(value))


def write_genotypes(dataset, path, format="csv"):
    """Write ``dataset`` so that :func:`load_genotypes` reproduces it exactly."""
    with open(path, "w", newline="") as fh:
        if format == "csv":
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["id", *dataset.snp_ids])
            for ind, row in zip(dataset.individuals, dataset.X):
                writer.writerow([ind, *map(_genotype_token, row)])
        elif format == "raw":
            fh.write("#" + " ".join(["id", *dataset.snp_ids]) + "\n")
            for ind, row in zip(dataset.individuals, dataset.X):
                fh.write(" ".join([ind, *map(_genotype_token, row)]) + "\n")
        else:
            raise ValueError(f"unknown genotype format {format!r}")


def load_map(path):
    """Load a ``snp_id,chromosome,position_cM`` map; ``?`` marks unknown positions."""
    ids, chroms, positions = [], [], []
    seen = set()
    for lineno, row in _read_rows(path, "csv"):
        if lineno == 1 and row[0].strip() == "snp_id":
            continue
        if len(row) != 3:
            raise ParseError(f"{path}:{lineno}: expected 3 fields, found {len(row)}")
        snp, chrom, pos = (t.strip() for t in row)
        if snp in seen:
            raise DataError(f"{path}:{lineno}: duplicate snp_id {snp!r}")
        seen.add(snp)
        if pos in MISSING_TOKENS:
            value = math.nan
        else:
            try:
                value = float(pos)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: invalid position {pos!r}") from None
            if value < 0:
                raise DataError(f"{path}:{lineno}: negative position {value} for {snp!r}")
        ids.append(snp)
        chroms.append(chrom)
        positions.append(value)
    return SnpMap(ids, chroms, np.array(positions, dtype=np.float64))


def write_map(snp_map, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["snp_id", "chromosome", "position_cM"])
        for snp, chrom, pos in zip(snp_map.snp_ids, snp_map.chromosomes, snp_map.positions):
            writer.writerow([snp, chrom, "?" if np.isnan(pos) else format_float(pos)])


def load_phenotypes(path, individuals=None):
    """Load an ``id,value`` phenotype file.

    With ``individuals`` given, the values are returned in that order and the
    IDs must match one-to-one.
    """
    ids, values = [], []
    for lineno, row in _read_rows(path, "csv"):
        if lineno == 1 and row[0].strip() == "id":
            continue
        if len(row) != 2:
            raise ParseError(f"{path}:{lineno}: expected 2 fields, found {len(row)}")
        try:
            values.append(float(row[1]))
        except ValueError:
            raise ParseError(f"{path}:{lineno}: invalid phenotype value {row[1]!r}") from None
        ids.append(row[0].strip())
    if len(set(ids)) != len(ids):
        raise DataError(f"{path}: duplicate individual IDs")
    values = np.array(values, dtype=np.float64)
    if individuals is None:
        return ids, values
    lookup = dict(zip(ids, values))
    if set(lookup) != set(individuals) or len(ids) != len(individuals):
        raise DataError(f"{path}: phenotype IDs do not match genotype IDs one-to-one")
    return np.array([lookup[i] for i in individuals], dtype=np.float64)


def write_phenotypes(individuals, y, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "value"])
        for ind, value in zip(individuals, y):
            writer.writerow([ind, repr(float(value))])


def write_kinship(K, individuals, path):
    """Write an n x n kinship matrix with individual IDs on both margins."""
    K = np.asarray(K)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", *individuals])
        for ind, row in zip(individuals, K):
            writer.writerow([ind, *map(format_float, row)])


def load_kinship(path):
    rows = list(_read_rows(path, "csv"))
    header = [h.strip() for h in rows[0][1][1:]]
    names = [r[0].strip() for _, r in rows[1:]]
    if names != header:
        raise DataError(f"{path}: row and column IDs differ")
    K = np.array([[float(v) for v in r[1:]] for _, r in rows[1:]], dtype=np.float64)
    return header, K


def format_float(value):
    """Six significant digits, the fixed format for every report value."""
    value = float(value)
    if value == 0.0:
        return "0"
    return f"{value:.6g}"


def _round_floats(obj):
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if not math.isfinite(value):
            return None
        return float(format_float(value))
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_round_floats(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "NA" if not math.isfinite(value) else format_float(value)
    return str(value)


def write_report(report, path, format="csv"):
    """Serialize a report deterministically.

    ``report`` must provide ``columns`` and ``to_records()`` for CSV, and
    ``to_dict()`` for JSON. Identical reports give byte-identical files.
    """
    try:
        fh = open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror}") from exc
    with fh:
        if format == "csv":
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(report.columns)
            for record in report.to_records():
                writer.writerow([_csv_cell(record.get(c)) for c in report.columns])
        elif format == "json":
            json.dump(_round_floats(report.to_dict()), fh, sort_keys=True, indent=2)
            fh.write("\n")
        else:
            raise ValueError(f"unknown report format {format!r}")


@dataclass
class Table:
    """Plain tabular report: ``columns`` plus one dict per row."""

    columns: tuple
    rows: list
    meta: dict = field(default_factory=dict)

    def to_records(self):
        return self.rows

    def to_dict(self):
        return {**self.meta, "rows": self.rows}
