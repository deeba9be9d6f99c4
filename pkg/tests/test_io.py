import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import count_tables, ergodic_matrices
from markov_fusion import StateSequence
from markov_fusion.datasets import ACGT_COUNTS
from markov_fusion.errors import FileFormatError, RowSumError, ValidationError
from markov_fusion.io import (
    ACGT,
    AlphabetMap,
    counts_csv,
    load_alphabet,
    matrix_csv,
    matrix_json,
    parse_counts,
    parse_matrix,
    parse_null,
    parse_sequence,
    read_counts,
    read_sequence,
    write_sequence,
)


class TestAlphabet:
    def test_acgt(self):
        assert [ACGT.state(s) for s in "ACGT"] == [1, 2, 3, 4]
        assert ACGT.symbol(3) == "G"
        assert load_alphabet("acgt") is ACGT
        assert load_alphabet(None) is None

    def test_file(self, tmp_path):
        path = tmp_path / "abc.txt"
        path.write_text("x\ny\n\nz\n")
        alpha = load_alphabet(f"file:{path}")
        assert alpha.symbols == ("x", "y", "z")

    def test_invalid(self):
        for bad in (("A",), ("A", "A"), ("A", "1"), ("A", "="), ("AB", "C")):
            with pytest.raises(ValidationError):
                AlphabetMap(bad)
        with pytest.raises(ValidationError):
            load_alphabet("DNA")

    def test_unknown_symbol(self):
        with pytest.raises(FileFormatError):
            ACGT.state("N")


class TestSequences:
    def test_symbols(self):
        seq = parse_sequence("A\nC\n\nG\nT\nA\n", ACGT)
        assert seq.tolist() == [1, 2, 3, 4, 1]
        assert seq.m == 4

    def test_integers_infer_m(self):
        seq = parse_sequence("1\n3\n2\n")
        assert seq.m == 3
        assert parse_sequence("1\n2\n", m=5).m == 5

    def test_errors(self):
        with pytest.raises(FileFormatError):
            parse_sequence("\n\n")
        with pytest.raises(FileFormatError):
            parse_sequence("1\nA\n")
        with pytest.raises(ValidationError):
            parse_sequence("1\n1\n")

    @settings(max_examples=30, deadline=None)
    @given(states=st.lists(st.integers(1, 4), min_size=2, max_size=50))
    def test_roundtrip(self, states, tmp_path_factory):
        seq = StateSequence(states, 4)
        path = tmp_path_factory.mktemp("seq") / "s.txt"
        path.write_text(write_sequence(seq, ACGT))
        assert read_sequence(str(path), ACGT).tolist() == states
        assert parse_sequence(write_sequence(seq), m=4).tolist() == states


class TestMatrices:
    @settings(max_examples=30, deadline=None)
    @given(P=ergodic_matrices())
    def test_roundtrip(self, P):
        assert np.array_equal(parse_matrix(matrix_json(P)).entries, P.entries)
        assert np.array_equal(parse_matrix(matrix_csv(P)).entries, P.entries)

    def test_rounded_csv(self):
        P = parse_matrix("0.123456789,0.876543211\n0.5,0.5\n")
        assert matrix_csv(P, 3).splitlines()[0] == "0.123,0.877"

    def test_json_shape(self):
        obj = json.loads(matrix_json(parse_matrix("0.5,0.5\n0.5,0.5\n")))
        assert obj == {"m": 2, "rows": [[0.5, 0.5], [0.5, 0.5]]}

    def test_format_errors(self):
        for text in ("", "0.5,0.5\n0.5\n", "0.5,x\n0.5,0.5\n", "{not json", '{"m": 3, "rows": [[1]]}',
                     "0.5,0.5\n"):
            with pytest.raises(FileFormatError):
                parse_matrix(text)

    def test_bad_rows_are_validation_errors(self):
        with pytest.raises(RowSumError):
            parse_matrix("0.5,0.6\n0.5,0.5\n")


class TestCounts:
    def test_acgt_roundtrip(self, tmp_path):
        path = tmp_path / "acgt.csv"
        path.write_text(counts_csv(ACGT_COUNTS))
        assert np.array_equal(read_counts(str(path)).counts, ACGT_COUNTS.counts)

    @settings(max_examples=30, deadline=None)
    @given(counts=count_tables())
    def test_roundtrip(self, counts):
        assert np.array_equal(parse_counts(counts_csv(counts)).counts, counts.counts)

    def test_errors(self):
        with pytest.raises(FileFormatError):
            parse_counts("1,2\n3\n")
        with pytest.raises(FileFormatError):
            parse_counts("1,2.5\n3,4\n")
        with pytest.raises(ValidationError):
            parse_counts("1,-2\n3,4\n")


class TestNull:
    @pytest.mark.parametrize("text", ["AG=GC", "GC=AG", " AG = GC ", "1,3=3,2", "(1,3)=(3,2)"])
    def test_single_group(self, text):
        part = parse_null(text.replace(" = ", "="), 4, ACGT)
        assert part.nontrivial() == [frozenset({(1, 3), (3, 2)})]

    @pytest.mark.parametrize("text", ["AA=GA,AG=GC", "AA=GA;AG=GC", "AA=GA AG=GC", "1,1=3,1,1,3=3,2",
                                      "1,1=3,1; 1,3=3,2", "(1,1)=(3,1),(1,3)=(3,2)"])
    def test_two_groups(self, text):
        part = parse_null(text, 4, ACGT)
        assert set(part.nontrivial()) == {frozenset({(1, 1), (3, 1)}), frozenset({(1, 3), (3, 2)})}

    def test_longer_group(self):
        part = parse_null("1,1=1,3=3,1", 3)
        assert part.nontrivial() == [frozenset({(1, 1), (1, 3), (3, 1)})]

    @pytest.mark.parametrize("text", ["", "AG", "1,3", "1,3=2", "1,3=2,3,1", "AG=XY", "5,1=1,1", "AG=AG"])
    def test_rejected(self, text):
        with pytest.raises(ValidationError):
            parse_null(text, 4, ACGT)

    def test_letters_need_alphabet(self):
        with pytest.raises(ValidationError):
            parse_null("AG=GC", 4)

    def test_overlapping_groups(self):
        with pytest.raises(ValidationError):
            parse_null("AG=GC,GC=TT", 4, ACGT)
