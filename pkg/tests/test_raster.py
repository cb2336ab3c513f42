"""Stroke algebra tests against naive per-pixel references."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperstroke.raster import (
    AlphaImage,
    BBox,
    BBoxTokens,
    BoundsError,
    Canvas,
    GridSpec,
    Hyperstroke,
    ShapeError,
    blend,
    canvas_from_png_bytes,
    canvas_png_bytes,
    compose,
    crop_and_resize,
    diff_bbox,
    from_u8,
    resize_bilinear,
    read_alpha_png,
    read_canvas_png,
    read_hyperstroke,
    snap_box,
    support_bbox,
    to_u8,
    unsnap_box,
    write_alpha_png,
    write_canvas_png,
    write_hyperstroke,
)


def reference_blend(canvas: Canvas, stroke: Hyperstroke) -> np.ndarray:
    """Independent per-pixel loop implementation of the blending rule."""
    out = canvas.pixels.copy()
    box = stroke.box
    rgb, alpha = stroke.image.rgb, stroke.image.alpha
    for y in range(box.y1, box.y2):
        for x in range(box.x1, box.x2):
            a = alpha[y - box.y1, x - box.x1]
            for c in range(3):
                i = rgb[y - box.y1, x - box.x1, c]
                out[y, x, c] = i * a + out[y, x, c] * (1.0 - a)
    return out


def random_case(rng, size=16):
    canvas = Canvas(rng.random((size, size, 3)))
    x1, y1 = int(rng.integers(0, size - 1)), int(rng.integers(0, size - 1))
    x2 = int(rng.integers(x1 + 1, size + 1))
    y2 = int(rng.integers(y1 + 1, size + 1))
    box = BBox(x1, y1, x2, y2)
    image = AlphaImage(
        rgb=rng.random((box.height, box.width, 3)),
        alpha=rng.random((box.height, box.width)),
    )
    return canvas, Hyperstroke(image=image, box=box)


class TestBlend:
    def test_full_opacity_replaces_canvas(self):
        rng = np.random.default_rng(0)
        canvas = Canvas(rng.random((8, 8, 3)))
        image = AlphaImage(rgb=rng.random((8, 8, 3)), alpha=np.ones((8, 8)))
        out = blend(canvas, Hyperstroke(image=image, box=BBox(0, 0, 8, 8)))
        np.testing.assert_array_equal(out.pixels, image.rgb)

    def test_zero_alpha_is_identity(self):
        rng = np.random.default_rng(1)
        canvas = Canvas(rng.random((8, 8, 3)))
        image = AlphaImage(rgb=rng.random((4, 4, 3)), alpha=np.zeros((4, 4)))
        out = blend(canvas, Hyperstroke(image=image, box=BBox(2, 2, 6, 6)))
        np.testing.assert_array_equal(out.pixels, canvas.pixels)

    def test_single_pixel_arithmetic(self):
        canvas = Canvas(np.full((1, 1, 3), [0.2, 0.4, 0.6]))
        image = AlphaImage(
            rgb=np.array([[[1.0, 0.0, 0.0]]]), alpha=np.array([[0.5]])
        )
        out = blend(canvas, Hyperstroke(image=image, box=BBox(0, 0, 1, 1)))
        np.testing.assert_allclose(out.pixels[0, 0], [0.6, 0.2, 0.3], atol=1e-15)

    def test_matches_reference_on_random_cases(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            canvas, stroke = random_case(rng)
            out = blend(canvas, stroke)
            np.testing.assert_allclose(out.pixels, reference_blend(canvas, stroke), atol=1e-6)

    def test_outside_box_bit_identical(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            canvas, stroke = random_case(rng)
            out = blend(canvas, stroke)
            mask = np.ones((16, 16), dtype=bool)
            b = stroke.box
            mask[b.y1 : b.y2, b.x1 : b.x2] = False
            assert np.array_equal(out.pixels[mask], canvas.pixels[mask])

    def test_input_canvas_unmodified(self):
        rng = np.random.default_rng(4)
        canvas, stroke = random_case(rng)
        before = canvas.pixels.copy()
        blend(canvas, stroke)
        np.testing.assert_array_equal(canvas.pixels, before)

    def test_output_stays_in_unit_range(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            canvas, stroke = random_case(rng)
            out = blend(canvas, stroke)
            assert out.pixels.min() >= 0.0 and out.pixels.max() <= 1.0

    def test_box_out_of_bounds(self):
        canvas = Canvas(np.zeros((8, 8, 3)))
        image = AlphaImage(rgb=np.zeros((4, 4, 3)), alpha=np.zeros((4, 4)))
        with pytest.raises(BoundsError):
            blend(canvas, Hyperstroke(image=image, box=BBox(6, 6, 10, 10)))

    def test_dim_mismatch_without_resize_flag(self):
        image = AlphaImage(rgb=np.zeros((4, 4, 3)), alpha=np.zeros((4, 4)))
        with pytest.raises(ShapeError):
            Hyperstroke(image=image, box=BBox(0, 0, 8, 8))

    def test_resized_stroke_is_resampled(self):
        canvas = Canvas(np.zeros((8, 8, 3)))
        image = AlphaImage(rgb=np.ones((2, 2, 3)) * 0.5, alpha=np.ones((2, 2)))
        stroke = Hyperstroke(image=image, box=BBox(0, 0, 8, 8), resized=True)
        out = blend(canvas, stroke)
        np.testing.assert_allclose(out.pixels, 0.5, atol=1e-12)


class TestCompose:
    def test_empty_list_identity(self):
        canvas = Canvas(np.random.default_rng(0).random((8, 8, 3)))
        out = compose(canvas, [])
        np.testing.assert_array_equal(out.pixels, canvas.pixels)

    def test_single_stroke_equals_blend(self):
        rng = np.random.default_rng(6)
        canvas, stroke = random_case(rng)
        np.testing.assert_array_equal(
            compose(canvas, [stroke]).pixels, blend(canvas, stroke).pixels
        )

    def test_matches_stepwise_blending(self):
        rng = np.random.default_rng(7)
        canvas, _ = random_case(rng)
        strokes = [random_case(rng)[1] for _ in range(6)]
        out = compose(canvas, strokes)
        expected = canvas
        for s in strokes:
            expected = blend(expected, s)
        np.testing.assert_array_equal(out.pixels, expected.pixels)

    def test_error_carries_stroke_index(self):
        canvas = Canvas(np.zeros((8, 8, 3)))
        ok = Hyperstroke(
            image=AlphaImage(rgb=np.zeros((2, 2, 3)), alpha=np.zeros((2, 2))),
            box=BBox(0, 0, 2, 2),
        )
        bad = Hyperstroke(
            image=AlphaImage(rgb=np.zeros((4, 4, 3)), alpha=np.zeros((4, 4))),
            box=BBox(6, 6, 10, 10),
        )
        with pytest.raises(BoundsError, match="stroke 1"):
            compose(canvas, [ok, bad])


GRID = GridSpec(256, 256, 16)


def random_boxes(rng, n, w=256, h=256):
    x1 = rng.integers(0, w, size=n)
    y1 = rng.integers(0, h, size=n)
    x2 = rng.integers(x1 + 1, w + 1)
    y2 = rng.integers(y1 + 1, h + 1)
    return [BBox(*map(int, b)) for b in zip(x1, y1, x2, y2)]


class TestGridSnap:
    @pytest.mark.parametrize(
        "box,expected",
        [
            ((0, 0, 256, 256), (0, 0, 16, 16)),
            ((5, 5, 20, 20), (0, 0, 2, 2)),
            ((16, 32, 32, 48), (1, 2, 2, 3)),
        ],
    )
    def test_worked_examples(self, box, expected):
        assert snap_box(BBox(*box), GRID).as_tuple() == expected

    @pytest.mark.parametrize(
        "tokens,expected",
        [((0, 0, 16, 16), (0, 0, 256, 256)), ((1, 2, 2, 3), (16, 32, 32, 48))],
    )
    def test_unsnap_examples(self, tokens, expected):
        assert unsnap_box(BBoxTokens(*tokens), GRID).as_tuple() == expected

    def test_containment_and_minimality(self):
        rng = np.random.default_rng(8)
        for box in random_boxes(rng, 200):
            snapped = unsnap_box(snap_box(box, GRID), GRID)
            assert snapped.contains(box)
            # shrinking any edge by one cell must break containment
            cw, ch = GRID.cell_width, GRID.cell_height
            for shrunk in (
                (snapped.x1 + cw, snapped.y1, snapped.x2, snapped.y2),
                (snapped.x1, snapped.y1 + ch, snapped.x2, snapped.y2),
                (snapped.x1, snapped.y1, snapped.x2 - cw, snapped.y2),
                (snapped.x1, snapped.y1, snapped.x2, snapped.y2 - ch),
            ):
                x1, y1, x2, y2 = shrunk
                if x1 < x2 and y1 < y2:
                    assert not BBox(x1, y1, x2, y2).contains(box)

    def test_snap_unsnap_idempotent(self):
        rng = np.random.default_rng(9)
        for box in random_boxes(rng, 200):
            t = snap_box(box, GRID)
            assert snap_box(unsnap_box(t, GRID), GRID) == t

    @given(
        st.integers(0, 255), st.integers(0, 255), st.integers(1, 256), st.integers(1, 256)
    )
    @settings(max_examples=200, deadline=None)
    def test_roundtrip_containment_property(self, x1, y1, dx, dy):
        box = BBox(x1, y1, min(x1 + dx, 256), min(y1 + dy, 256))
        assert unsnap_box(snap_box(box, GRID), GRID).contains(box)

    def test_grid_requires_divisibility(self):
        with pytest.raises(ValueError):
            GridSpec(250, 256, 16)


class TestCropAndResize:
    def test_full_canvas_identity(self):
        rng = np.random.default_rng(10)
        a = Canvas(rng.random((256, 256, 3)))
        b = Canvas(rng.random((256, 256, 3)))
        pa, pb = crop_and_resize(a, b, BBoxTokens(0, 0, 16, 16), (256, 256))
        np.testing.assert_array_equal(pa, a.pixels)
        np.testing.assert_array_equal(pb, b.pixels)

    def test_target_shape(self):
        rng = np.random.default_rng(11)
        a = Canvas(rng.random((256, 256, 3)))
        pa, pb = crop_and_resize(a, a, BBoxTokens(2, 2, 4, 4), (128, 128))
        assert pa.shape == (128, 128, 3) and pb.shape == (128, 128, 3)

    def test_constant_patch_survives_down_and_up(self):
        a = Canvas(np.full((256, 256, 3), 0.37))
        down, _ = crop_and_resize(a, a, BBoxTokens(1, 1, 3, 3), (16, 16))
        up = resize_bilinear(down, 32, 32)
        np.testing.assert_allclose(down, 0.37, atol=1e-12)
        np.testing.assert_allclose(up, 0.37, atol=1e-12)


class TestDiffBBox:
    def test_identical_frames(self):
        a = Canvas(np.random.default_rng(12).random((16, 16, 3)))
        assert diff_bbox(a, a) is None

    def test_single_changed_pixel(self):
        a = Canvas(np.zeros((32, 32, 3)))
        px = a.pixels.copy()
        px[20, 10] = 0.5
        assert diff_bbox(a, Canvas(px)).as_tuple() == (10, 20, 11, 21)

    def test_below_threshold_ignored(self):
        a = Canvas(np.zeros((8, 8, 3)))
        px = a.pixels.copy()
        px[3, 3] = 1.0 / 255.0
        assert diff_bbox(a, Canvas(px)) is None

    def test_dim_mismatch(self):
        a = Canvas(np.zeros((8, 8, 3)))
        b = Canvas(np.zeros((9, 8, 3)))
        with pytest.raises(ShapeError):
            diff_bbox(a, b)


class TestPngIO:
    def test_round_half_up(self):
        # 0.5/255 rounds up to 1; bankers rounding would give 0
        assert to_u8(np.array([0.5 / 255.0]))[0] == 1
        assert to_u8(np.array([1.49 / 255.0]))[0] == 1
        assert to_u8(np.array([1.5 / 255.0]))[0] == 2

    def test_canvas_round_trip(self, tmp_path):
        rng = np.random.default_rng(13)
        canvas = Canvas(from_u8(rng.integers(0, 256, size=(16, 16, 3)).astype(np.uint8)))
        write_canvas_png(canvas, tmp_path / "c.png")
        back = read_canvas_png(tmp_path / "c.png")
        np.testing.assert_array_equal(back.pixels, canvas.pixels)

    def test_canvas_bytes_round_trip(self):
        canvas = Canvas(np.full((4, 4, 3), 0.25))
        back = canvas_from_png_bytes(canvas_png_bytes(canvas))
        np.testing.assert_allclose(back.pixels, canvas.pixels, atol=0.5 / 255.0)

    def test_alpha_round_trip(self, tmp_path):
        rng = np.random.default_rng(14)
        img = AlphaImage(
            rgb=from_u8(rng.integers(0, 256, (8, 8, 3)).astype(np.uint8)),
            alpha=from_u8(rng.integers(0, 256, (8, 8)).astype(np.uint8)),
        )
        write_alpha_png(img, tmp_path / "a.png")
        back = read_alpha_png(tmp_path / "a.png")
        np.testing.assert_array_equal(back.rgb, img.rgb)
        np.testing.assert_array_equal(back.alpha, img.alpha)

    def test_hyperstroke_sidecar_round_trip(self, tmp_path):
        rng = np.random.default_rng(15)
        image = AlphaImage(
            rgb=from_u8(rng.integers(0, 256, (4, 6, 3)).astype(np.uint8)),
            alpha=from_u8(rng.integers(0, 256, (4, 6)).astype(np.uint8)),
        )
        stroke = Hyperstroke(image=image, box=BBox(10, 20, 16, 24))
        write_hyperstroke(stroke, tmp_path / "s.png", grid_c=16)
        back = read_hyperstroke(tmp_path / "s.png")
        assert back.box == stroke.box
        np.testing.assert_array_equal(back.image.rgb, image.rgb)


class TestSupportBBox:
    def test_empty(self):
        assert support_bbox(np.zeros((4, 4))) is None

    def test_tight(self):
        alpha = np.zeros((8, 8))
        alpha[2:5, 3:6] = 0.5
        assert support_bbox(alpha).as_tuple() == (3, 2, 6, 5)
