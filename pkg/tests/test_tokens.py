"""Flat vocabulary and sequence framing tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperstroke.raster import BBoxTokens
from hyperstroke.tokens import (
    KIND_BBOX,
    KIND_SPECIAL,
    KIND_VISUAL,
    TokenVocab,
    frame_sequence,
    parse_sequence,
    position_kind,
)

VOCAB = TokenVocab(grid_c=16, codebook_size=512)


class TestVocab:
    def test_flat_size(self):
        assert VOCAB.size == 17 + 512 + 3

    def test_id_ranges_disjoint_and_bijective(self):
        seen = set()
        for tid in range(VOCAB.size):
            kind, local = VOCAB.kind_of(tid)
            seen.add((kind, local))
            # round-trip back to the flat id
            if kind == KIND_BBOX:
                assert VOCAB.bbox_id(local) == tid
            elif kind == KIND_VISUAL:
                assert VOCAB.visual_id(local) == tid
            else:
                assert tid in (VOCAB.start_id, VOCAB.end_id, VOCAB.pad_id)
        assert len(seen) == VOCAB.size

    def test_out_of_vocab_rejected(self):
        with pytest.raises(ValueError):
            VOCAB.kind_of(VOCAB.size)
        with pytest.raises(ValueError):
            VOCAB.bbox_id(17)
        with pytest.raises(ValueError):
            VOCAB.visual_id(512)

    @given(st.integers(0, 16 + 512 + 3 - 1))
    @settings(max_examples=100, deadline=None)
    def test_kind_of_total_on_vocab(self, tid):
        kind, local = VOCAB.kind_of(tid)
        assert kind in (KIND_BBOX, KIND_VISUAL, KIND_SPECIAL)
        assert local >= 0


def _stroke(rng, k=64):
    x1, y1 = int(rng.integers(0, 16)), int(rng.integers(0, 16))
    box = BBoxTokens(x1, y1, int(rng.integers(x1 + 1, 17)), int(rng.integers(y1 + 1, 17)))
    return box, rng.integers(0, 512, size=k)


class TestFraming:
    def test_stroke_serializes_to_68_tokens(self):
        rng = np.random.default_rng(0)
        box, codes = _stroke(rng)
        assert len(VOCAB.stroke_ids(box, codes)) == 68

    def test_twelve_stroke_context_is_817_tokens(self):
        rng = np.random.default_rng(1)
        seq = frame_sequence(VOCAB, [_stroke(rng) for _ in range(12)], k=64)
        assert len(seq) == 817

    def test_zero_strokes_is_just_start(self):
        seq = frame_sequence(VOCAB, [], k=64)
        assert list(seq) == [VOCAB.start_id]

    def test_parse_round_trip(self):
        rng = np.random.default_rng(2)
        strokes = [_stroke(rng) for _ in range(5)]
        seq = frame_sequence(VOCAB, strokes, k=64)
        parsed = parse_sequence(VOCAB, seq, k=64)
        assert len(parsed) == 5
        for (box, codes), (pbox, pcodes) in zip(strokes, parsed):
            assert box == pbox
            np.testing.assert_array_equal(np.asarray(codes), pcodes)

    def test_parse_stops_at_end_and_pad(self):
        rng = np.random.default_rng(3)
        strokes = [_stroke(rng) for _ in range(2)]
        seq = list(frame_sequence(VOCAB, strokes, k=64))
        seq += [VOCAB.end_id] + [VOCAB.pad_id] * 10
        assert len(parse_sequence(VOCAB, seq, k=64)) == 2

    def test_parse_rejects_missing_start(self):
        with pytest.raises(ValueError, match="start"):
            parse_sequence(VOCAB, [0, 1, 2], k=64)

    def test_parse_rejects_out_of_kind(self):
        rng = np.random.default_rng(4)
        seq = list(frame_sequence(VOCAB, [_stroke(rng)], k=64))
        seq[1] = VOCAB.visual_id(3)  # visual token where a box corner belongs
        with pytest.raises(ValueError, match="box token"):
            parse_sequence(VOCAB, seq, k=64)

    def test_parse_rejects_truncated_stroke(self):
        rng = np.random.default_rng(5)
        seq = list(frame_sequence(VOCAB, [_stroke(rng)], k=64))[:-3]
        with pytest.raises(ValueError, match="truncated"):
            parse_sequence(VOCAB, seq, k=64)

    @given(st.integers(1, 12))
    @settings(max_examples=20, deadline=None)
    def test_length_formula(self, n):
        rng = np.random.default_rng(n)
        seq = frame_sequence(VOCAB, [_stroke(rng) for _ in range(n)], k=64)
        assert len(seq) == 1 + n * 68
        assert len(parse_sequence(VOCAB, seq, k=64)) == n


class TestPositionKind:
    def test_start_position(self):
        assert position_kind(0, 64)[0] == KIND_SPECIAL

    def test_cycle(self):
        # positions 1..4 are the first stroke's corners, then 64 visuals
        for p in range(1, 5):
            assert position_kind(p, 64) == (KIND_BBOX, p - 1)
        for p in range(5, 69):
            assert position_kind(p, 64) == (KIND_VISUAL, p - 5)
        assert position_kind(69, 64) == (KIND_BBOX, 0)
