import numpy as np
import pytest

from sepscan import (
    CallableFunction,
    SampleBatch,
    Subset,
    generate_samples,
    mixed_batch,
    uniform_field,
)

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def reference_finalize(v):
    v &= MASK
    v ^= v >> 30
    v = (v * 0xBF58476D1CE4E5B9) & MASK
    v ^= v >> 27
    v = (v * 0x94D049BB133111EB) & MASK
    v ^= v >> 31
    return v


def reference_uniform(seed, counter):
    key = reference_finalize(seed)
    word = reference_finalize((key + (counter + 1) * GOLDEN) & MASK)
    return (word >> 11) * 2.0 ** -53


def test_uniform_field_matches_pure_python_reference():
    counters = np.array([0, 1, 2, 17, 1 << 40], dtype=np.uint64)
    for seed in (0, 1, 12345, 2**63):
        got = uniform_field(seed, counters)
        want = [reference_uniform(seed, int(c)) for c in counters]
        np.testing.assert_array_equal(got, want)


def test_uniform_field_range_and_spread():
    values = uniform_field(7, np.arange(20000, dtype=np.uint64))
    assert values.min() >= 0.0
    assert values.max() < 1.0
    assert abs(values.mean() - 0.5) < 0.02
    assert len(np.unique(values)) == len(values)


def test_generate_samples_deterministic():
    a = generate_samples(4, 100, 3)
    b = generate_samples(4, 100, 3)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.z, b.z)
    c = generate_samples(4, 100, 4)
    assert not np.array_equal(a.x, c.x)


def test_sample_streams_are_distinct():
    batch = generate_samples(3, 500, 0)
    assert not np.array_equal(batch.x, batch.z)
    assert batch.n == 500
    assert batch.dimension == 3
    assert batch.seed == 0


def test_prefix_property():
    # growing n extends the draw without reshuffling earlier points
    small = generate_samples(5, 8, 42)
    large = generate_samples(5, 32, 42)
    np.testing.assert_array_equal(small.x, large.x[:8])
    np.testing.assert_array_equal(small.z, large.z[:8])


def test_counter_layout():
    # point i, coordinate j of the x stream uses counter (2i)s + j,
    # of the z stream counter (2i+1)s + j
    s, n, seed = 3, 4, 9
    batch = generate_samples(s, n, seed)
    for i in range(n):
        for j in range(s):
            assert batch.x[i, j] == reference_uniform(seed, 2 * i * s + j)
            assert batch.z[i, j] == reference_uniform(seed, (2 * i + 1) * s + j)


def test_arrays_are_read_only():
    batch = generate_samples(2, 10, 0)
    with pytest.raises(ValueError):
        batch.x[0, 0] = 0.5
    with pytest.raises(ValueError):
        batch.z[0, 0] = 0.5


def test_values_routing():
    f = CallableFunction(lambda p: p[:, 0] + 10 * p[:, 1], 2, label="probe")
    batch = generate_samples(2, 50, 1)
    full = Subset.full(2)
    np.testing.assert_array_equal(
        batch.values(f, full), f.evaluate_batch(np.asarray(batch.x))
    )
    np.testing.assert_array_equal(
        batch.values(f, Subset.empty()), f.evaluate_batch(np.asarray(batch.z))
    )
    u = Subset.of(1)
    mixed = mixed_batch(batch.x, batch.z, u)
    np.testing.assert_array_equal(batch.values(f, u), f.evaluate_batch(mixed))


def test_values_cached_per_mask():
    calls = []

    def fn(p):
        calls.append(len(p))
        return p[:, 0] * p[:, 1]

    f = CallableFunction(fn, 2, label="counted")
    batch = generate_samples(2, 30, 5)
    u = Subset.of(1)
    first = batch.values(f, u)
    count = f.eval_count
    second = batch.values(f, u)
    assert f.eval_count == count
    assert first is second
    assert len(calls) == 1


def test_cached_masks_listing():
    f = CallableFunction(lambda p: p[:, 0], 3, label="probe")
    batch = generate_samples(3, 10, 0)
    assert batch.cached_masks(f) == []
    batch.values(f, Subset.full(3))
    batch.values(f, Subset.of(2))
    batch.values(f, Subset.of(2))
    masks = batch.cached_masks(f)
    assert sorted(masks) == sorted([Subset.full(3).mask, Subset.of(2).mask])


def test_cache_is_per_function():
    f = CallableFunction(lambda p: p[:, 0], 2, label="a")
    g = CallableFunction(lambda p: p[:, 1], 2, label="b")
    batch = generate_samples(2, 10, 0)
    batch.values(f, Subset.full(2))
    assert batch.cached_masks(g) == []
    batch.values(g, Subset.full(2))
    assert g.eval_count == 10


def test_scale_tracks_largest_magnitude():
    f = CallableFunction(lambda p: 3.5 * np.ones(len(p)), 2, label="const")
    batch = generate_samples(2, 10, 0)
    assert batch.scale(f) == 0.0
    batch.values(f, Subset.full(2))
    assert batch.scale(f) == 3.5


def test_cached_values_are_read_only():
    f = CallableFunction(lambda p: p[:, 0], 2, label="probe")
    batch = generate_samples(2, 10, 0)
    vals = batch.values(f, Subset.full(2))
    with pytest.raises(ValueError):
        vals[0] = 99.0


def test_dimension_mismatch_rejected():
    f = CallableFunction(lambda p: p[:, 0], 3, label="probe")
    batch = generate_samples(2, 10, 0)
    with pytest.raises(ValueError, match="dimension"):
        batch.values(f, Subset.full(2))


def test_subset_beyond_dimension_rejected():
    f = CallableFunction(lambda p: p[:, 0], 2, label="probe")
    batch = generate_samples(2, 10, 0)
    with pytest.raises(ValueError):
        batch.values(f, Subset.of(3))


def test_bad_sizes_rejected():
    with pytest.raises(ValueError):
        generate_samples(2, 0, 0)
    with pytest.raises(ValueError):
        generate_samples(0, 10, 0)


def test_direct_construction_checks_shapes():
    x = np.zeros((4, 2))
    z = np.zeros((3, 2))
    with pytest.raises(ValueError):
        SampleBatch(x, z, 0)
