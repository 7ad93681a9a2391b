"""
IRMA codes, dataset manifests and the hierarchical retrieval error.

An IRMA code is 13 characters in four axes, TTTT-DDD-AAA-BBB. The error of a
retrieved code weighs every mismatching position by 1/b_i (branching at that
position) and 1/i (depth inside the axis), so early and low-branching
mistakes cost most.
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import pandas as pd

from src.errors import (BadCharacter, BadLength, DataError, EmptyInput, MalformedRow,
                        MisplacedHyphen, MissingFile, PositionNotInTable)
from utils.constants import IRMA_ALPHABET, IRMA_AXES, IRMA_CODE_LENGTH, UNCATEGORIZED

logger = logging.getLogger(__name__)

_HYPHEN_POSITIONS = [4, 8, 12]
_ALLOWED = frozenset(IRMA_ALPHABET)


# ============================================================================
# CODES
# ============================================================================

@dataclass(frozen=True)
class IrmaCode:
    raw: str

    @property
    def axes(self):
        out, start = [], 0
        for _, length in IRMA_AXES:
            out.append(self.raw[start:start + length])
            start += length
        return tuple(out)

    def formatted(self):
        return "-".join(self.axes)

    def __str__(self):
        return self.raw


def parse_irma(s: str) -> IrmaCode:
    """
    Parse a 13-character code or its hyphenated 16-character form

    Examples:
        >>> parse_irma("1121-120-200-700").axes
        ('1121', '120', '200', '700')
    """
    s = s.strip()
    if "-" in s:
        hyphens = [i for i, ch in enumerate(s) if ch == "-"]
        if len(s) != IRMA_CODE_LENGTH + 3 or hyphens != _HYPHEN_POSITIONS:
            raise MisplacedHyphen(f"{s!r}: expected the TTTT-DDD-AAA-BBB layout")
        s = s.replace("-", "")
    if len(s) != IRMA_CODE_LENGTH:
        raise BadLength(f"{s!r}: IRMA codes have {IRMA_CODE_LENGTH} characters, got {len(s)}")
    bad = sorted(set(s) - _ALLOWED)
    if bad:
        raise BadCharacter(f"{s!r}: characters outside 0-9a-z: {''.join(bad)}")
    return IrmaCode(s)


# ============================================================================
# ERROR METRIC
# ============================================================================

@dataclass(frozen=True)
class AlphabetTable:
    symbols: tuple  # frozenset of characters per position

    @property
    def sizes(self):
        return tuple(len(s) for s in self.symbols)


def build_alphabets(codes) -> AlphabetTable:
    """Distinct characters observed at every position over the given codes"""
    codes = list(codes)
    if not codes:
        raise EmptyInput("cannot build alphabets from zero codes")
    symbols = [set() for _ in range(IRMA_CODE_LENGTH)]
    for code in codes:
        for pos, ch in enumerate(code.raw):
            symbols[pos].add(ch)
    return AlphabetTable(tuple(frozenset(s) for s in symbols))


def _raw_error(truth, retrieved, sizes, propagate, axis_local, all_wrong=False):
    terms = []
    pos = 0
    for _, length in IRMA_AXES:
        earlier_wrong = False
        for depth in range(length):
            wrong_here = all_wrong or truth.raw[pos] != retrieved.raw[pos]
            wrong = wrong_here or (propagate and earlier_wrong)
            earlier_wrong = earlier_wrong or wrong_here
            if wrong:
                i = depth + 1 if axis_local else pos + 1
                terms.append(1.0 / (sizes[pos] * i))
            pos += 1
    return math.fsum(terms)


def irma_error(truth: IrmaCode, retrieved: IrmaCode, table: AlphabetTable,
               normalize=True, propagate=True, axis_local=True):
    """
    Hierarchical error of one retrieved code

    Args:
        truth: Ground-truth code
        retrieved: Code of the retrieved image
        table: Per-position branching factors
        normalize: Divide by the error of a fully wrong code
        propagate: A wrong character makes every deeper position in its axis wrong
        axis_local: Number positions 1..len(axis) inside each axis (else 1..13)

    Returns:
        Non-negative error; in [0, 1] when normalized
    """
    sizes = table.sizes
    if len(sizes) < IRMA_CODE_LENGTH or min(sizes) < 1:
        raise PositionNotInTable(
            f"alphabet table covers {len(sizes)} positions, need {IRMA_CODE_LENGTH}")
    error = _raw_error(truth, retrieved, sizes, propagate, axis_local)
    if normalize:
        error /= _raw_error(truth, truth, sizes, propagate, axis_local, all_wrong=True)
    return error


def total_error(pairs, table: AlphabetTable, normalize=True, propagate=True, axis_local=True):
    """Sum of irma_error over (truth, retrieved) pairs, in pair order"""
    return math.fsum(irma_error(t, r, table, normalize, propagate, axis_local) for t, r in pairs)


# ============================================================================
# MANIFESTS
# ============================================================================

@dataclass(frozen=True, eq=False)
class Manifest:
    """Dataset records with columns image_id, path, code (IrmaCode or None), label"""

    records: pd.DataFrame
    split: str
    source: Path

    def __len__(self):
        return len(self.records)

    @property
    def n_uncategorized(self):
        return int(self.records["code"].isna().sum())

    def categorized(self):
        return self.records[self.records["code"].notna()].reset_index(drop=True)


def load_manifest(path, split="train") -> Manifest:
    """
    Read a tab-separated manifest: id, relative path, code or '*'

    Lines starting with '#' and blank lines are skipped. Paths resolve
    against the manifest's directory.
    """
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"manifest not found: {path}")
    if split not in ("train", "test"):
        raise DataError(f"split must be train or test, got {split!r}")

    rows, seen = [], set()
    text = path.read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise MalformedRow(path, lineno, f"expected 3 tab-separated fields, got {len(fields)}")
        image_id, rel_path, raw_code = (f.strip() for f in fields)
        if not image_id or not rel_path:
            raise MalformedRow(path, lineno, "empty id or path")
        if image_id in seen:
            raise MalformedRow(path, lineno, f"duplicate id {image_id!r}")
        seen.add(image_id)
        if raw_code == UNCATEGORIZED:
            code = None
        else:
            try:
                code = parse_irma(raw_code)
            except DataError as e:
                raise MalformedRow(path, lineno, str(e)) from e
        rows.append({
            "image_id": image_id,
            "path": path.parent / rel_path,
            "code": code,
            "label": code.raw if code else None,
        })

    records = pd.DataFrame(rows, columns=["image_id", "path", "code", "label"])
    manifest = Manifest(records=records, split=split, source=path)
    logger.info("Loaded %s manifest %s: %d records, %d uncategorized (ignored)",
                split, path.name, len(manifest), manifest.n_uncategorized)
    return manifest


def write_manifest(path, rows, comment=None):
    """
    Write (image_id, relative path, code-or-None) rows as a manifest

    Returns:
        Path written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(
        [(i, str(p), c.formatted() if c else UNCATEGORIZED) for i, p, c in rows],
        columns=["image_id", "path", "code"],
    )
    with open(path, "w", encoding="utf-8", newline="") as f:
        if comment:
            f.write(f"# {comment}\n")
        df.to_csv(f, sep="\t", header=False, index=False, lineterminator="\n")
    return path
