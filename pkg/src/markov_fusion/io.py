"""File formats: sequences, matrices, count tables, alphabets and null hypotheses.

Sequence files hold one token per line (blank lines ignored): integers
``1..m`` or single symbols resolved through an :class:`AlphabetMap`.
Matrices are JSON ``{"m": int, "rows": [[...]]}`` or headerless CSV; count
tables are headerless CSV of nonnegative integers.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass

import numpy as np

from .chain import (
    EqualityPartition,
    Mode,
    StateSequence,
    TransitionCounts,
    TransitionMatrix,
    validate_matrix,
)
from .errors import FileFormatError, ValidationError

__all__ = [
    "AlphabetMap",
    "ACGT",
    "load_alphabet",
    "read_sequence",
    "parse_sequence",
    "write_sequence",
    "read_matrix",
    "parse_matrix",
    "matrix_json",
    "matrix_csv",
    "read_counts",
    "parse_counts",
    "counts_csv",
    "parse_null",
]


@dataclass(frozen=True)
class AlphabetMap:
    """Ordered symbols; symbol ``k`` (0-based) is state ``k + 1``."""

    symbols: tuple[str, ...]

    def __post_init__(self):
        syms = tuple(self.symbols)
        if len(syms) < 2:
            raise ValidationError("an alphabet needs at least two symbols")
        if len(set(syms)) != len(syms):
            raise ValidationError("alphabet symbols must be unique")
        if any(len(s) != 1 or s.isspace() or s.isdigit() or s in ",;=" for s in syms):
            raise ValidationError("alphabet symbols must be single non-digit, non-separator characters")
        object.__setattr__(self, "symbols", syms)

    @property
    def m(self) -> int:
        return len(self.symbols)

    def state(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol) + 1
        except ValueError:
            raise FileFormatError(f"symbol {symbol!r} is not in the alphabet {''.join(self.symbols)}") from None

    def symbol(self, state: int) -> str:
        return self.symbols[state - 1]


ACGT = AlphabetMap(("A", "C", "G", "T"))


def load_alphabet(name: str | None) -> AlphabetMap | None:
    """Resolve ``"ACGT"`` or ``"file:<path>"`` (one symbol per line)."""
    if name is None:
        return None
    if name.upper() == "ACGT":
        return ACGT
    if name.startswith("file:"):
        text = _read_text(name[5:])
        return AlphabetMap(tuple(line.strip() for line in text.splitlines() if line.strip()))
    raise ValidationError(f"unknown alphabet {name!r}; use ACGT or file:<path>")


def _read_text(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def parse_sequence(text: str, alphabet: AlphabetMap | None = None, m: int | None = None) -> StateSequence:
    tokens = [t.strip() for t in text.splitlines()]
    tokens = [t for t in tokens if t]
    if not tokens:
        raise FileFormatError("sequence file is empty")
    if alphabet is not None:
        states = [alphabet.state(t) for t in tokens]
        m = alphabet.m if m is None else m
    else:
        try:
            states = [int(t) for t in tokens]
        except ValueError as exc:
            raise FileFormatError(f"non-integer token in sequence ({exc}); pass an alphabet for symbols") from None
        m = max(states) if m is None else m
    if m < 2:
        raise ValidationError("a chain needs at least two states")
    return StateSequence(np.asarray(states), m)


def read_sequence(path: str, alphabet: AlphabetMap | None = None, m: int | None = None) -> StateSequence:
    return parse_sequence(_read_text(path), alphabet, m)


def write_sequence(seq: StateSequence, alphabet: AlphabetMap | None = None) -> str:
    if alphabet is not None:
        return "".join(alphabet.symbol(int(s)) + "\n" for s in seq.states)
    return "".join(f"{int(s)}\n" for s in seq.states)


def _csv_rows(text: str) -> list[list[str]]:
    rows = [[c.strip() for c in r] for r in csv.reader(io.StringIO(text))]
    rows = [r for r in rows if any(r)]
    if not rows:
        raise FileFormatError("no rows found")
    if any(len(r) != len(rows[0]) for r in rows):
        raise FileFormatError("CSV rows have unequal lengths")
    return rows


def parse_matrix(text: str, mode: Mode | str = Mode.STOCHASTIC) -> TransitionMatrix:
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            obj = json.loads(text)
            rows = obj["rows"]
            m = int(obj.get("m", len(rows)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise FileFormatError(f"malformed matrix JSON: {exc}") from None
        if len(rows) != m:
            raise FileFormatError(f"matrix JSON declares m={m} but has {len(rows)} rows")
    else:
        try:
            rows = [[float(c) for c in r] for r in _csv_rows(text)]
        except ValueError as exc:
            raise FileFormatError(f"malformed matrix CSV: {exc}") from None
    if not isinstance(rows, list) or any(not isinstance(r, list) or len(r) != len(rows) for r in rows):
        raise FileFormatError("matrix rows must form a square array")
    try:
        arr = np.asarray(rows, dtype=float)
    except (TypeError, ValueError):
        raise FileFormatError("matrix entries must be numbers") from None
    return validate_matrix(arr, mode)


def read_matrix(path: str, mode: Mode | str = Mode.STOCHASTIC) -> TransitionMatrix:
    return parse_matrix(_read_text(path), mode)


def matrix_json(P: TransitionMatrix) -> str:
    return json.dumps({"m": P.m, "rows": P.entries.tolist()})


def matrix_csv(P: TransitionMatrix, decimals: int | None = None) -> str:
    """CSV rows; full ``repr`` precision unless ``decimals`` is given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in P.entries:
        w.writerow([repr(float(v)) if decimals is None else f"{v:.{decimals}f}" for v in row])
    return buf.getvalue()


def parse_counts(text: str) -> TransitionCounts:
    rows = _csv_rows(text)
    try:
        arr = np.asarray([[int(c) for c in r] for r in rows], dtype=np.int64)
    except ValueError as exc:
        raise FileFormatError(f"counts must be integer CSV rows: {exc}") from None
    return TransitionCounts(arr)


def read_counts(path: str) -> TransitionCounts:
    return parse_counts(_read_text(path))


def counts_csv(counts: TransitionCounts) -> str:
    return "".join(",".join(str(int(v)) for v in row) + "\n" for row in counts.counts)


_INT_CELL = re.compile(r"^\(?\s*(\d+)\s*,\s*(\d+)\s*\)?$")


def _parse_cell(token: str, m: int, alphabet: AlphabetMap | None) -> tuple[int, int]:
    token = token.strip()
    hit = _INT_CELL.match(token)
    if hit:
        cell = (int(hit.group(1)), int(hit.group(2)))
    elif alphabet is not None and len(token) == 2 and all(s in alphabet.symbols for s in token):
        cell = (alphabet.state(token[0]), alphabet.state(token[1]))
    else:
        raise ValidationError(f"cannot read cell {token!r}; use i,j or a two-letter pair with an alphabet")
    if not all(1 <= c <= m for c in cell):
        raise ValidationError(f"cell {cell} is outside a {m}-state chain")
    return cell


def _integer_groups(chunk: str, m: int) -> list[list[tuple[int, int]]]:
    # "1,3=2,3,1,1=3,1": a piece with four numbers closes one group and opens the next
    groups, current = [], []
    for piece in chunk.split("="):
        nums = [t for t in re.split(r"[(),\s]+", piece) if t]
        if not all(t.isdigit() for t in nums) or len(nums) not in (2, 4):
            raise ValidationError(f"cannot read cells from {piece!r}; use i,j pairs joined by '='")
        current.append(_parse_cell(f"{nums[0]},{nums[1]}", m, None))
        if len(nums) == 4:
            groups.append(current)
            current = [_parse_cell(f"{nums[2]},{nums[3]}", m, None)]
    groups.append(current)
    return groups


def parse_null(text: str, m: int, alphabet: AlphabetMap | None = None) -> EqualityPartition:
    """Read fused groups such as ``"AG=GC"``, ``"AA=GA,AG=GC"`` or ``"1,3=2,3,1,1=3,1"``.

    Groups are separated by commas, ``;`` or whitespace.  In integer cells
    the comma inside ``i,j`` belongs to the cell, so a comma between groups
    is recognized as the one after the second number of a cell.
    """
    groups = []
    for chunk in re.split(r"[;\s]+", text.strip()):
        if not chunk:
            continue
        if re.search(r"\d", chunk):
            found = _integer_groups(chunk, m)
        else:
            found = [[_parse_cell(tok, m, alphabet) for tok in part.split("=")] for part in chunk.split(",")]
        for cells in found:
            if len(cells) < 2:
                raise ValidationError(f"group {cells} needs at least two cells joined by '='")
            groups.append(cells)
    if not groups:
        raise ValidationError("empty null hypothesis")
    return EqualityPartition.from_groups(m, groups)
