import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from echotriage.dicom import EchoClip
from echotriage.segmentation import (
    Chamber,
    ChamberMask,
    DimensionMismatch,
    MalformedSidecar,
    SidecarBackend,
    ThresholdBackend,
    decode_mask,
    decode_sidecar,
    dice,
    encode_mask,
    encode_sidecar,
    read_sidecar,
    segment_clip,
    write_sidecar,
)


def mask_of(array, chamber=Chamber.LV, frame=0, spacing=(0.5, 0.5)):
    return ChamberMask(chamber, frame, np.asarray(array, dtype=bool), spacing)


def brute_force_dice(a, b):
    """Pixel-by-pixel double loop; intentionally naive."""
    overlap = size_a = size_b = 0
    for r in range(a.rows):
        for c in range(a.cols):
            pa = bool(a.bits[r, c])
            pb = bool(b.bits[r, c])
            size_a += pa
            size_b += pb
            overlap += pa and pb
    if size_a + size_b == 0:
        return 1.0
    return 2.0 * overlap / (size_a + size_b)


class TestDice:
    def test_identical_nonempty(self):
        m = mask_of([[1, 1], [0, 1]])
        assert dice(m, m) == 1.0

    def test_disjoint(self):
        a = mask_of([[1, 0], [0, 0]])
        b = mask_of([[0, 0], [0, 1]])
        assert dice(a, b) == 0.0

    def test_shifted_block(self):
        # 2x2 block vs the same block shifted right by one: areas 4, overlap 2
        grid_a = np.zeros((4, 4), dtype=bool)
        grid_a[1:3, 0:2] = True
        grid_b = np.zeros((4, 4), dtype=bool)
        grid_b[1:3, 1:3] = True
        assert dice(mask_of(grid_a), mask_of(grid_b)) == 0.5

    def test_both_empty_is_one(self):
        a = mask_of(np.zeros((3, 3)))
        b = mask_of(np.zeros((3, 3)))
        assert dice(a, b) == 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            dice(mask_of(np.zeros((2, 2))), mask_of(np.zeros((3, 3))))

    def test_symmetric_and_bounded_random(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            a = mask_of(rng.random((8, 8)) < 0.4)
            b = mask_of(rng.random((8, 8)) < 0.4)
            d = dice(a, b)
            assert 0.0 <= d <= 1.0
            assert d == dice(b, a)
            assert d == pytest.approx(brute_force_dice(a, b))

    def test_one_iff_equal(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            a = mask_of(rng.random((6, 6)) < 0.5)
            b = mask_of(rng.random((6, 6)) < 0.5)
            if dice(a, b) == 1.0:
                assert np.array_equal(a.bits, b.bits)


class TestRle:
    def test_all_ones_2x2(self):
        m = mask_of(np.ones((2, 2)))
        header, runs, _ = encode_mask(m).split("\n")
        assert header == "LV,0,2,2"
        assert runs == "0,4"

    def test_empty_2x2(self):
        m = mask_of(np.zeros((2, 2)))
        assert encode_mask(m).split("\n")[1] == "4"

    def test_round_trip_identity_random(self):
        rng = np.random.default_rng(16)
        for i in range(1000):
            bits = rng.random((16, 16)) < rng.uniform(0.0, 1.0)
            m = ChamberMask(Chamber.LV, i, bits, (0.4, 0.4))
            assert decode_mask(encode_mask(m), (0.4, 0.4)) == m

    @given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1))
    @settings(max_examples=200, deadline=None)
    def test_round_trip_property(self, rows, cols, seed):
        rng = np.random.default_rng(seed)
        m = ChamberMask(Chamber.LA, 3, rng.random((rows, cols)) < 0.5, None)
        assert decode_mask(encode_mask(m)) == m

    def test_text_round_trip_is_canonical(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            m = mask_of(rng.random((9, 7)) < 0.5)
            text = encode_mask(m)
            assert encode_mask(decode_mask(text, (0.5, 0.5))) == text

    @pytest.mark.parametrize("record", [
        "LV,0,2,2\n5\n",            # wrong total
        "LV,0,2,2\n0,3\n",          # wrong total with leading zero
        "LV,0,2,2\n2,0,2\n",        # zero-length interior run
        "LV,0,2,2\n-1,5\n",         # negative run
        "XX,0,2,2\n4\n",            # unknown chamber
        "LV,0,2\n4\n",              # short header
        "LV,0,2,2\n4\nextra\n",     # trailing garbage
        "LV,a,2,2\n4\n",            # unparseable frame
    ])
    def test_malformed_records_rejected(self, record):
        with pytest.raises(MalformedSidecar):
            decode_mask(record)

    def test_sidecar_file_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        masks = [ChamberMask(Chamber.LV, i, rng.random((5, 6)) < 0.5, (0.7, 0.7))
                 for i in range(4)]
        path = write_sidecar(tmp_path, "clip-1", masks)
        assert path.name == "clip-1.LV.masks.rle"
        assert read_sidecar(path, (0.7, 0.7)) == masks

    def test_sidecar_text_round_trip(self):
        rng = np.random.default_rng(4)
        masks = [ChamberMask(Chamber.LA, i, rng.random((3, 3)) < 0.5, None)
                 for i in range(3)]
        assert decode_sidecar(encode_sidecar(masks)) == masks


def make_clip(frames):
    frames = np.asarray(frames, dtype=np.uint8)
    return EchoClip(study_id="s", clip_id="c", rows=frames.shape[1],
                    cols=frames.shape[2], num_frames=frames.shape[0],
                    frame_interval_ms=33.0, pixel_spacing_mm=(0.5, 0.5),
                    frames=frames)


class TestThresholdBackend:
    def test_recovers_dark_pool(self):
        frame = np.full((8, 8), 200, dtype=np.uint8)
        frame[2:6, 3:6] = 40
        clip = make_clip([frame])
        masks = segment_clip(clip, None, Chamber.LV, ThresholdBackend())
        expected = np.zeros((8, 8), dtype=bool)
        expected[2:6, 3:6] = True
        assert np.array_equal(masks[0].bits, expected)
        assert masks[0].pixel_spacing_mm == (0.5, 0.5)

    def test_keeps_largest_4_connected_component(self):
        frame = np.full((8, 8), 200, dtype=np.uint8)
        frame[1:3, 1:3] = 40       # 4 pixels
        frame[5:8, 5:8] = 40       # 9 pixels, separate
        clip = make_clip([frame])
        masks = segment_clip(clip, None, Chamber.LV, ThresholdBackend())
        assert masks[0].pixel_count == 9
        assert masks[0].bits[6, 6]
        assert not masks[0].bits[1, 1]

    def test_diagonal_touch_is_not_connected(self):
        frame = np.full((4, 4), 200, dtype=np.uint8)
        frame[0, 0] = 40
        frame[1, 1] = 40
        frame[1, 2] = 40
        clip = make_clip([frame])
        masks = segment_clip(clip, None, Chamber.LV, ThresholdBackend())
        assert masks[0].pixel_count == 2  # the pair, not the corner pixel

    def test_all_black_clip_degenerate(self):
        # uniformly bright frame: nothing below threshold anywhere
        frame = np.full((6, 6), 210, dtype=np.uint8)
        clip = make_clip([frame, frame])
        masks = segment_clip(clip, None, Chamber.LV, ThresholdBackend())
        assert all(m.degenerate for m in masks)

    def test_one_mask_per_frame(self):
        frame = np.full((5, 5), 40, dtype=np.uint8)
        clip = make_clip([frame] * 4)
        masks = segment_clip(clip, None, Chamber.LV, ThresholdBackend())
        assert [m.frame_index for m in masks] == [0, 1, 2, 3]


class TestSidecarBackend:
    def test_replays_stored_masks(self, tmp_path):
        rng = np.random.default_rng(8)
        stored = [ChamberMask(Chamber.LV, i, rng.random((4, 4)) < 0.5, (0.5, 0.5))
                  for i in range(2)]
        write_sidecar(tmp_path, "c", stored)
        clip = make_clip(np.zeros((2, 4, 4), dtype=np.uint8))
        masks = segment_clip(clip, None, Chamber.LV, SidecarBackend(tmp_path))
        assert masks == stored
