import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from snnfc.dataset import FeatureSchema, KeyValueRecord, one_hot_matrix
from snnfc.encoding import (CTECodebook, CTEConfig, TargetGenerationError, TargetPatternSet,
                            build_codebook, decode_rate, decode_rate_batch, decode_temporal,
                            encode_batch, encode_record, generate_targets, kernel_traces,
                            van_rossum_distance, van_rossum_matrix)

# sum_{t<80} exp(-2t/10) / 10, evaluated once by direct summation
ONE_SPIKE_ENERGY_T80_TAU10 = 0.5516654945309197


def schema(cards=(4, 3, 3, 3, 2, 5)):
    keys = tuple(f"k{i}" for i in range(len(cards)))
    cats = tuple(tuple(f"v{j}" for j in range(c - 1)) for c in cards)  # "?" makes c
    return FeatureSchema(keys, ("categorical",) * len(cards), cats, ("a", "b", "c"))


def brute_van_rossum(a, b, tau):
    """Explicit causal convolution with exp(-t/tau), no recursion."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    T = a.shape[-1]
    kern = np.exp(-np.arange(T) / tau)
    diff = a - b
    total = 0.0
    for row in diff.reshape(-1, T):
        f = np.array([sum(row[s] * kern[t - s] for s in range(t + 1)) for t in range(T)])
        total += (f ** 2).sum()
    return np.sqrt(total / tau)


spike_trains = arrays(np.uint8, (3, 20), elements=st.integers(0, 1))


# ---------------------------------------------------------------- codebook

def test_codebook_geometry_and_determinism():
    s = schema()
    a, b = build_codebook(s), build_codebook(s)
    assert a.n_inputs == 120
    for pa, pb in zip(a.patterns, b.patterns):
        assert np.array_equal(pa, pb)
    groups = [set(range(*a.group(k).indices(120))) for k in range(a.n_keys)]
    assert set().union(*groups) == set(range(120))
    assert sum(len(g) for g in groups) == 120


def test_codebook_round_trip():
    cb = build_codebook(schema(), CTEConfig(master_seed=5))
    back = CTECodebook.from_dict(cb.to_dict())
    assert all(np.array_equal(p, q) for p, q in zip(cb.patterns, back.patterns))


def test_master_seed_changes_patterns():
    a = build_codebook(schema(), CTEConfig(master_seed=0))
    b = build_codebook(schema(), CTEConfig(master_seed=1))
    assert not np.array_equal(a.patterns[0], b.patterns[0])


def test_spike_density_matches_rate():
    cfg = CTEConfig(n_per_key=50, n_steps=80, spike_rate=4)
    cb = build_codebook(schema((30,)), cfg)
    rate = cb.patterns[0].mean()
    assert abs(rate - 4 / 80) < 0.005


def test_config_preconditions():
    with pytest.raises(ValueError):
        CTEConfig(n_per_key=0)
    with pytest.raises(ValueError):
        CTEConfig(spike_rate=0)
    with pytest.raises(ValueError):
        CTEConfig(n_steps=10, spike_rate=11)


def test_third_key_group_layout():
    # five shared keys and one differing key: only the last group differs
    cb = build_codebook(schema((2, 2, 2, 2, 2, 3)))
    x = encode_record(KeyValueRecord((0, 0, 0, 0, 0, 0), 0), cb)
    y = encode_record(KeyValueRecord((0, 0, 0, 0, 0, 1), 0), cb)
    rows = np.flatnonzero((x != y).any(axis=1))
    assert rows.min() >= 100 and rows.max() < 120
    assert np.array_equal(x[:100], y[:100])


# ---------------------------------------------------------------- encoding

@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=6, max_size=6), st.integers(0, 5))
def test_encoding_shares_groups_of_shared_pairs(vals, flip):
    cb = build_codebook(schema())
    other = list(vals)
    other[flip] = 1 - vals[flip]
    x = encode_record(KeyValueRecord(tuple(vals), 0), cb)
    y = encode_record(KeyValueRecord(tuple(other), 0), cb)
    assert np.array_equal(x, encode_record(KeyValueRecord(tuple(vals), 0), cb))
    for k in range(6):
        g = cb.group(k)
        assert np.array_equal(x[g], y[g]) == (k != flip)
    assert set(np.unique(x)) <= {0, 1}
    assert (x.astype(int) * x).sum() == x.sum()


def test_encode_rejects_out_of_range_values():
    cb = build_codebook(schema())
    with pytest.raises(ValueError):
        encode_batch(np.array([[9, 0, 0, 0, 0, 0]]), cb)


def test_inner_product_grows_with_shared_pairs():
    cards = (40,) * 6
    cb = build_codebook(schema(cards))
    rng = np.random.default_rng(0)
    means = []
    for shared in range(7):
        dots = []
        for _ in range(1000):
            a = rng.integers(0, 40, 6)
            b = a.copy()
            diff = rng.choice(6, 6 - shared, replace=False)
            b[diff] = (a[diff] + rng.integers(1, 40, len(diff))) % 40
            x, y = encode_batch(np.stack([a, b]), cb).astype(int)
            dots.append((x * y).sum())
        means.append(np.mean(dots))
    assert np.all(np.diff(means) > 0), means


def test_inner_product_decomposition():
    cb = build_codebook(schema((40,) * 6))
    a = np.array([1, 2, 3, 4, 5, 6])
    b = np.array([1, 2, 3, 9, 9, 9])
    x, y = encode_batch(np.stack([a, b]), cb).astype(int)
    exact = sum(cb.patterns[k][a[k]].sum() for k in range(3))
    chance = sum((cb.patterns[k][a[k]].astype(int) * cb.patterns[k][b[k]]).sum() for k in range(3, 6))
    assert (x * y).sum() == exact + chance


def test_one_hot_agrees_with_pattern_identity():
    # records with equal one-hot vectors encode identically and vice versa
    s = schema()
    cb = build_codebook(s)
    rng = np.random.default_rng(1)
    vals = rng.integers(0, 2, size=(60, 6))
    X = one_hot_matrix(vals, s)
    P = encode_batch(vals, cb).reshape(60, -1)
    for i in range(60):
        for j in range(i):
            assert np.array_equal(X[i], X[j]) == np.array_equal(P[i], P[j])


# ---------------------------------------------------------------- van Rossum

def test_van_rossum_matches_brute_force():
    rng = np.random.default_rng(2)
    for _ in range(5):
        a = (rng.random((4, 30)) < 0.1).astype(np.uint8)
        b = (rng.random((4, 30)) < 0.1).astype(np.uint8)
        assert van_rossum_distance(a, b, 7.0) == pytest.approx(brute_van_rossum(a, b, 7.0), rel=1e-12)


def test_single_spike_energy():
    a = np.zeros((1, 80), dtype=np.uint8)
    a[0, 0] = 1
    d = van_rossum_distance(a, np.zeros_like(a), 10.0)
    assert d ** 2 == pytest.approx(ONE_SPIKE_ENERGY_T80_TAU10, rel=1e-12)


def test_van_rossum_shape_mismatch():
    with pytest.raises(ValueError):
        van_rossum_distance(np.zeros((2, 5)), np.zeros((2, 6)))


def test_kernel_traces_recursion():
    x = np.zeros(6)
    x[1] = 1
    np.testing.assert_allclose(kernel_traces(x, 2.0), [0, 1, *np.exp(-np.arange(1, 5) / 2.0)])


@settings(max_examples=1000, deadline=None)
@given(spike_trains, spike_trains, spike_trains)
def test_van_rossum_metric_axioms(a, b, c):
    tau = 5.0
    dab = van_rossum_distance(a, b, tau)
    assert dab >= 0
    assert van_rossum_distance(a, a, tau) == 0
    assert dab == pytest.approx(van_rossum_distance(b, a, tau), abs=1e-12)
    assert van_rossum_distance(a, c, tau) <= dab + van_rossum_distance(b, c, tau) + 1e-9


def test_matrix_agrees_with_pairwise():
    rng = np.random.default_rng(3)
    out = (rng.random((5, 3, 40)) < 0.1).astype(np.uint8)
    tgt = (rng.random((4, 3, 40)) < 0.1).astype(np.uint8)
    D = van_rossum_matrix(out, tgt, 10.0)
    for i in range(5):
        for j in range(4):
            assert D[i, j] == pytest.approx(van_rossum_distance(out[i], tgt[j], 10.0), rel=1e-12)


# ---------------------------------------------------------------- targets and decoding

def test_targets_three_classes():
    t = generate_targets(3, 3, 80, seed=0)
    assert t.patterns.shape == (3, 3, 80)
    assert len({p.tobytes() for p in t.patterns}) == 3
    assert np.all(t.patterns.sum(axis=2)[np.eye(3, dtype=bool)] == 4)
    assert np.all(t.patterns.sum(axis=2)[~np.eye(3, dtype=bool)] == 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 8), st.integers(0, 1000), st.integers(1, 3))
def test_targets_respect_floor(M, seed, per_class):
    t = generate_targets(M, M * per_class, 80, seed=seed, floor=1.0)
    D = van_rossum_matrix(t.patterns, t.patterns, t.tau)
    assert D[~np.eye(M, dtype=bool)].min() > 1.0
    again = generate_targets(M, M * per_class, 80, seed=seed, floor=1.0)
    assert np.array_equal(t.patterns, again.patterns)


def test_single_class_target():
    t = generate_targets(1, 1, 80, seed=0)
    assert t.patterns.shape == (1, 1, 80)


def test_unreachable_floor():
    with pytest.raises(TargetGenerationError):
        generate_targets(3, 3, 12, seed=0, floor=50.0, max_attempts=5)


def test_targets_round_trip():
    t = generate_targets(4, 8, 80, seed=9)
    assert np.array_equal(TargetPatternSet.from_dict(t.to_dict()).patterns, t.patterns)


def rate_output(counts, T=10):
    out = np.zeros((len(counts), T), dtype=np.uint8)
    for i, c in enumerate(counts):
        out[i, :c] = 1
    return out


def test_decode_rate_examples():
    assert decode_rate(rate_output([3, 7, 2]), [0, 1, 2]) == 1
    assert decode_rate(rate_output([0, 0, 0]), [2, 1, 0]) == 2
    assert decode_rate(rate_output([5, 5, 1]), [1, 0, 2]) == 1
    batch = np.stack([rate_output([3, 7, 2]), rate_output([5, 5, 1])])
    assert decode_rate_batch(batch, [0, 1, 2]).tolist() == [1, 0]


def test_decode_temporal_exact_and_empty():
    t = generate_targets(4, 4, 80, seed=1)
    assert decode_temporal(t.patterns[2], t) == 2
    energy = [van_rossum_distance(p, np.zeros_like(p), t.tau) for p in t.patterns]
    assert decode_temporal(np.zeros_like(t.patterns[0]), t) == int(np.argmin(energy))


def test_decode_temporal_tie_goes_low():
    pats = np.zeros((3, 1, 10), dtype=np.uint8)
    pats[0, 0, 2] = pats[1, 0, 2] = 1  # classes 0 and 1 identical
    pats[2, 0, 9] = 1
    t = TargetPatternSet(pats, 0)
    assert decode_temporal(pats[1], t) == 0
