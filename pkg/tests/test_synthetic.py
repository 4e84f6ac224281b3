import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pdn.errors import ConfigError, DataError
from pdn.synthetic import (audit_context_sample, blob_mask, decode_sample, encode_sample,
                           gen_context_task, gen_local_task, local_rule, read_dataset,
                           write_dataset)


def test_local_deterministic():
    a, b = gen_local_task(3, 12, 4), gen_local_task(3, 12, 4)
    assert encode_sample(a) == encode_sample(b)
    assert encode_sample(a) != encode_sample(gen_local_task(4, 12, 4))


def test_local_labels_follow_rule():
    s = gen_local_task(0, 10, 3)
    for r in range(1, 9):
        for c in range(1, 9):
            assert s.labels[r, c] == local_rule(s.image[r - 1:r + 2, c - 1:c + 2], 3)
    assert np.all(s.labels[0] == 255) and np.all(s.labels[:, -1] == 255)


@pytest.mark.parametrize("K", [2, 3, 5])
def test_local_histogram_non_degenerate(K):
    counts = np.zeros(K)
    for seed in range(100):
        lab = gen_local_task(seed, 12, K).labels
        counts += np.bincount(lab[lab != 255], minlength=K)
    assert np.all(counts / counts.sum() >= 0.05)


def test_local_preconditions():
    with pytest.raises(ConfigError):
        gen_local_task(0, 7, 3)
    with pytest.raises(ConfigError):
        gen_local_task(0, 10, 1)


def test_context_reference_sample_is_reproducible():
    a = encode_sample(gen_context_task(42, 17, 3, 6))
    b = encode_sample(gen_context_task(42, 17, 3, 6))
    assert a == b


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), K=st.integers(2, 5), d=st.integers(0, 8))
def test_context_metadata_matches_pixels(seed, K, d):
    s = gen_context_task(seed, 17, K, d)
    audit = audit_context_sample(s, K)
    assert audit["distance"] == d == s.metadata["distance"]
    assert audit["class"] == s.metadata["class"]
    assert tuple(s.metadata["blob_center"]) == audit["blob_center"]
    lab = s.labels
    assert set(np.unique(lab)) <= {0, s.metadata["class"], 255}
    assert np.all(lab[0] == 255)


def test_blob_looks_identical_across_classes():
    # pixels within distance d - 2 of any blob pixel do not depend on the class
    K, d = 3, 6
    seen = {}
    for seed in range(60):
        s = gen_context_task(seed, 17, K, d)
        blob = np.argwhere(blob_mask(s.labels))
        cr, cc = s.metadata["cue_center"]
        for r, c in blob:
            assert max(abs(r - cr), abs(c - cc)) - 1 > 3  # nearest cue pixel is beyond radius 3
        seen.setdefault(s.metadata["class"], []).append(s.image[blob[:, 0], blob[:, 1]])
    assert set(seen) == {1, 2}
    np.testing.assert_array_equal(np.concatenate(seen[1]).max(0), np.concatenate(seen[2]).max(0))
    np.testing.assert_array_equal(np.concatenate(seen[1]).min(0), np.concatenate(seen[2]).min(0))


def test_context_zero_distance_is_local():
    s = gen_context_task(5, 17, 3, 0)
    blob = blob_mask(s.labels)
    # every blob pixel is painted with the cue color
    colors = {tuple(v) for v in s.image[blob]}
    assert len(colors) == 1 and colors != {(1.0, 1.0, 1.0)}


def test_context_placement_impossible():
    with pytest.raises(ConfigError):
        gen_context_task(0, 9, 3, 8)


def test_pdns_layout_is_bit_exact():
    s = gen_context_task(1, 9, 3, 2)
    raw = encode_sample(s)
    assert raw[:4] == b"PDNS"
    assert struct.unpack_from("<III", raw, 4) == (1, 9, 9)
    assert len(raw) == 16 + 9 * 9 * 3 * 4 + 9 * 9 * 2
    img = np.frombuffer(raw, "<f4", 9 * 9 * 3, 16).reshape(9, 9, 3)
    np.testing.assert_array_equal(img, s.image.astype(np.float32))
    lab = np.frombuffer(raw, "<u2", 81, 16 + 9 * 9 * 3 * 4).reshape(9, 9)
    np.testing.assert_array_equal(lab, s.labels)
    assert lab[0, 0] == 255


def test_pdns_round_trip_and_corruption():
    s = gen_local_task(2, 10, 3)
    back = decode_sample(encode_sample(s))
    np.testing.assert_array_equal(back.image, s.image)
    np.testing.assert_array_equal(back.labels, s.labels)
    with pytest.raises(DataError):
        decode_sample(b"XXXX" + encode_sample(s)[4:])
    with pytest.raises(DataError):
        decode_sample(encode_sample(s)[:-1])


def test_dataset_dir(tmp_path):
    samples = [gen_local_task(i, 8, 2) for i in range(3)]
    write_dataset(samples, tmp_path / "d")
    assert sorted(p.name for p in (tmp_path / "d").iterdir()) == [f"sample_{i}.pdns" for i in range(3)]
    back = read_dataset(tmp_path / "d")
    assert [encode_sample(b) for b in back] == [encode_sample(s) for s in samples]
    with pytest.raises(DataError):
        read_dataset(tmp_path / "missing")
