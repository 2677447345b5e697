"""Core types, the scaled block product and the document format."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsdstab import (
    DocumentError,
    MixingMatrix,
    PartitionedGain,
    ScalingDiagonal,
    apply_scaling,
    block_offset,
    flat_index,
    gain_document,
    kbar_matrix,
    load_gain,
    read_gain_document,
)


def doc(m, n, partition, a, k=None):
    obj = {"m": m, "n": n, "partition": partition, "A": a}
    if k is not None:
        obj["K_gains"] = k
    return json.dumps(obj)


class TestLoadGain:
    def test_well_formed_2x4(self):
        gain = load_gain(doc(2, 4, [2, 2], [1, 1, 0, 0, 0, 0, 1, 1]))
        assert gain.m == 2 and gain.n == 4
        assert gain.partition == (2, 2)

    def test_paper_shape_3x8(self):
        gain = load_gain(doc(3, 8, [3, 2, 3], list(range(24))))
        assert gain.m == 3 and gain.n == 8
        assert gain.partition == (3, 2, 3)

    def test_partition_sum_mismatch(self):
        with pytest.raises(DocumentError):
            load_gain(doc(2, 4, [2, 3], [0.0] * 8))

    def test_nonpositive_partition_entry(self):
        with pytest.raises(DocumentError):
            load_gain(doc(2, 4, [4, 0], [0.0] * 8))

    def test_malformed_json(self):
        with pytest.raises(DocumentError):
            load_gain("{not json")

    def test_missing_field(self):
        with pytest.raises(DocumentError):
            load_gain(json.dumps({"m": 2, "n": 4, "A": [0.0] * 8}))

    def test_nested_rows_accepted(self):
        gain = load_gain(doc(2, 4, [2, 2], [[1, 1, 0, 0], [0, 0, 1, 1]]))
        assert gain.entries[0, 1] == 1.0

    def test_k_gains_parsed(self):
        _, mixing = read_gain_document(
            doc(2, 4, [2, 2], [0.0] * 8, k=[[1, 2], [3, 4]])
        )
        assert mixing is not None
        assert np.allclose(mixing.as_vector(), [1, 2, 3, 4])

    def test_k_gains_shape_checked(self):
        with pytest.raises(DocumentError):
            read_gain_document(doc(2, 4, [2, 2], [0.0] * 8, k=[[1], [2, 3, 4]]))

    def test_roundtrip_17_digits(self):
        rng = np.random.default_rng(3)
        entries = rng.normal(size=(2, 5)) * np.exp(rng.uniform(-8, 8, size=(2, 5)))
        gain = PartitionedGain(entries, (3, 2))
        mixing = MixingMatrix((rng.uniform(size=3), rng.uniform(size=2)))
        text = gain_document(gain, mixing)
        back, kback = read_gain_document(text)
        assert np.array_equal(back.entries, gain.entries)
        assert all(np.array_equal(a, b) for a, b in zip(kback.gains, mixing.gains))


class TestFlatIndex:
    def test_prefix_sum(self):
        assert flat_index((3, 2, 3), 2, 1) == 4

    def test_first(self):
        assert flat_index((3, 2, 3), 1, 1) == 1

    def test_last(self):
        assert flat_index((3, 2, 3), 3, 3) == 8

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            flat_index((3, 2, 3), 4, 1)
        with pytest.raises(ValueError):
            flat_index((3, 2, 3), 2, 3)

    @given(st.lists(st.integers(1, 4), min_size=1, max_size=5), st.data())
    @settings(max_examples=60, deadline=None)
    def test_roundtrip(self, partition, data):
        partition = tuple(partition)
        block = data.draw(st.integers(1, len(partition)))
        offset = data.draw(st.integers(1, partition[block - 1]))
        flat = flat_index(partition, block, offset)
        assert block_offset(partition, flat) == (block, offset)

    def test_inverse_covers_all(self):
        partition = (3, 2, 3)
        seen = [block_offset(partition, i) for i in range(1, 9)]
        assert len(set(seen)) == 8


class TestApplyScaling:
    def setup_method(self):
        self.gain = PartitionedGain([[1, 1, 0, 0], [0, 0, 1, 1]], (2, 2))
        self.ones_e = ScalingDiagonal.ones((2, 2))
        self.ones_k = MixingMatrix.ones((2, 2))

    def test_unit_columns(self):
        result, active = apply_scaling(self.gain, self.ones_e, self.ones_k)
        assert np.array_equal(result, [[2, 0], [0, 2]])
        assert active.blocks == (1, 2)

    def test_single_column_deactivated(self):
        e = ScalingDiagonal.from_vector((2, 2), [1, 0, 1, 1])
        result, active = apply_scaling(self.gain, e, self.ones_k)
        assert np.array_equal(result, [[1, 0], [0, 2]])
        assert active.columns == ((1,), (1, 2))

    def test_block_deactivated(self):
        e = ScalingDiagonal.from_vector((2, 2), [0, 0, 1, 1])
        result, active = apply_scaling(self.gain, e, self.ones_k)
        assert result.shape == (1, 1) and result[0, 0] == 2
        assert active.blocks == (2,)

    def test_everything_deactivated(self):
        e = ScalingDiagonal.from_vector((2, 2), [0, 0, 0, 0])
        result, active = apply_scaling(self.gain, e, self.ones_k)
        assert result.shape == (0, 0) and active.blocks == ()

    def test_partition_mismatch(self):
        with pytest.raises(ValueError):
            apply_scaling(self.gain, ScalingDiagonal.ones((1, 3)), self.ones_k)

    def test_identity_scaling_equals_block_column_sums(self):
        rng = np.random.default_rng(11)
        gain = PartitionedGain(rng.normal(size=(3, 7)), (2, 2, 3))
        result, _ = apply_scaling(
            gain, ScalingDiagonal.ones((2, 2, 3)), MixingMatrix.ones((2, 2, 3))
        )
        expected = np.column_stack(
            [gain.entries[:, gain.block_slice(b)].sum(axis=1) for b in (1, 2, 3)]
        )
        assert np.allclose(result, expected, rtol=0, atol=0)

    def test_positive_scaling_matches_dense_triple_product(self):
        rng = np.random.default_rng(12)
        partition = (2, 1, 3)
        gain = PartitionedGain(rng.normal(size=(3, 6)), partition)
        e = ScalingDiagonal.from_vector(partition, np.exp(rng.uniform(-2, 2, 6)))
        k = MixingMatrix(tuple(rng.uniform(0.1, 3, size=p) for p in partition))
        result, active = apply_scaling(gain, e, k)
        dense = gain.entries @ np.diag(e.as_vector()) @ k.as_dense()
        assert active.blocks == (1, 2, 3)
        assert np.allclose(result, dense, rtol=1e-12, atol=0)

    def test_kbar_matrix_matches_diag_product(self):
        rng = np.random.default_rng(13)
        partition = (2, 3)
        e = ScalingDiagonal.from_vector(partition, rng.uniform(0, 2, 5))
        k = MixingMatrix(tuple(rng.uniform(0, 2, size=p) for p in partition))
        assert np.allclose(
            kbar_matrix(e, k), np.diag(e.as_vector()) @ k.as_dense(), rtol=0, atol=0
        )

    def test_tiny_product_counts_as_zero(self):
        e = ScalingDiagonal.from_vector((2, 2), [1.0, 1e-20, 0.0, 1e-20])
        result, active = apply_scaling(self.gain, e, self.ones_k)
        assert active.blocks == (1,)
        assert active.columns == ((1,),)


class TestTypes:
    def test_gain_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            PartitionedGain([[1, 2], [3, 4], [5, 6]], (1, 1))  # n < m

    def test_gain_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            PartitionedGain([[np.nan, 1.0]], (2,))

    def test_mixing_rejects_negative(self):
        with pytest.raises(ValueError):
            MixingMatrix(([-1.0, 1.0],))

    def test_scaling_rejects_negative(self):
        with pytest.raises(ValueError):
            ScalingDiagonal(([1.0], [-0.5]))

    def test_entries_read_only(self):
        gain = PartitionedGain([[1.0, 2.0]], (2,))
        with pytest.raises(ValueError):
            gain.entries[0, 0] = 5.0

    def test_mixing_dense_structure(self):
        k = MixingMatrix(([1, 2], [3]))
        assert np.array_equal(k.as_dense(), [[1, 0], [2, 0], [0, 3]])
