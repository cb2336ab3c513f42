"""Flat token vocabulary and sequence framing for stroke sequences.

A serialized stroke is 4 box tokens followed by k visual tokens. Box tokens
live in {0..C} (grid corner indices), visual tokens in {0..codebook_size-1}
(codebook entries); both are offset into one flat id space together with
three specials (start, end, pad), so one embedding table covers everything:

    [0 .. C]                      box corners
    [C+1 .. C+codebook_size]      visual codes
    start, end, pad               specials, in that order

A full drawing sequence is ``[start] s_1 .. s_n`` and has exactly
1 + n * (4 + k) ids; an end id is appended only when the sequence is shorter
than the model context, and pad ids fill the remainder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import BBoxTokens

KIND_BBOX = "bbox"
KIND_VISUAL = "visual"
KIND_SPECIAL = "special"


@dataclass(frozen=True)
class TokenVocab:
    grid_c: int
    codebook_size: int

    @property
    def bbox_vocab(self) -> int:
        return self.grid_c + 1

    @property
    def visual_offset(self) -> int:
        return self.bbox_vocab

    @property
    def start_id(self) -> int:
        return self.bbox_vocab + self.codebook_size

    @property
    def end_id(self) -> int:
        return self.start_id + 1

    @property
    def pad_id(self) -> int:
        return self.start_id + 2

    @property
    def size(self) -> int:
        return self.bbox_vocab + self.codebook_size + 3

    def bbox_id(self, corner: int) -> int:
        if not 0 <= corner <= self.grid_c:
            raise ValueError(f"box corner {corner} outside 0..{self.grid_c}")
        return corner

    def visual_id(self, code: int) -> int:
        if not 0 <= code < self.codebook_size:
            raise ValueError(f"visual code {code} outside codebook")
        return self.visual_offset + code

    def kind_of(self, token_id: int) -> tuple[str, int]:
        """Map a flat id back to (kind, local index)."""
        if 0 <= token_id < self.bbox_vocab:
            return (KIND_BBOX, token_id)
        if self.visual_offset <= token_id < self.start_id:
            return (KIND_VISUAL, token_id - self.visual_offset)
        if token_id in (self.start_id, self.end_id, self.pad_id):
            return (KIND_SPECIAL, token_id - self.start_id)
        raise ValueError(f"token id {token_id} outside vocabulary of {self.size}")

    def stroke_ids(self, box: BBoxTokens, visual_codes) -> list[int]:
        """Serialize one stroke: (X1, Y1, X2, Y2) then its k visual codes."""
        ids = [self.bbox_id(v) for v in box.as_tuple()]
        ids.extend(self.visual_id(int(c)) for c in visual_codes)
        return ids


def frame_sequence(vocab: TokenVocab, strokes, k: int) -> np.ndarray:
    """[start] followed by each stroke's 4+k ids."""
    ids = [vocab.start_id]
    for box, codes in strokes:
        codes = np.asarray(codes)
        if codes.shape != (k,):
            raise ValueError(f"expected {k} visual codes per stroke, got {codes.shape}")
        ids.extend(vocab.stroke_ids(box, codes))
    return np.asarray(ids, dtype=np.int32)


def parse_sequence(vocab: TokenVocab, ids, k: int):
    """Recover (BBoxTokens, visual code array) strokes from a framed sequence.

    Stops at the end or pad id; raises on malformed framing or out-of-kind
    tokens.
    """
    ids = [int(i) for i in np.asarray(ids).ravel()]
    if not ids or ids[0] != vocab.start_id:
        raise ValueError("sequence must begin with the start id")
    body = ids[1:]
    strokes = []
    pos = 0
    while pos < len(body):
        if body[pos] in (vocab.end_id, vocab.pad_id):
            break
        chunk = body[pos : pos + 4 + k]
        if len(chunk) < 4 + k:
            raise ValueError(f"truncated stroke at position {pos}")
        corners = []
        for tid in chunk[:4]:
            kind, local = vocab.kind_of(tid)
            if kind != KIND_BBOX:
                raise ValueError(f"expected box token at offset {pos}, got {kind}")
            corners.append(local)
        codes = []
        for tid in chunk[4:]:
            kind, local = vocab.kind_of(tid)
            if kind != KIND_VISUAL:
                raise ValueError(f"expected visual token, got {kind}")
            codes.append(local)
        box = BBoxTokens(corners[0], corners[1], corners[2], corners[3], vocab.grid_c)
        strokes.append((box, np.asarray(codes, dtype=np.int32)))
        pos += 4 + k
    return strokes


def position_kind(pos: int, k: int) -> tuple[str, int]:
    """Kind of the token at 0-based position ``pos`` of a framed sequence.

    Returns (kind, offset) where offset is the within-stroke index for body
    positions; position 0 is the start id.
    """
    if pos == 0:
        return (KIND_SPECIAL, 0)
    r = (pos - 1) % (4 + k)
    return (KIND_BBOX, r) if r < 4 else (KIND_VISUAL, r - 4)
