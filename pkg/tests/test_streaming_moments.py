import numpy as np
import pytest

from config import DEFAULT_SEED
from counter_rng import normals, seeded_permutation, uniforms
from errors import AccumulatorError, ConfigError
from exact_oracle import as_exact, error_report, exact_moments, round_to, ulp_at
from float_utils import same_bits, to_bits_hex
from streaming_moments import (
    ALL_ALGORITHMS,
    MomentAccumulator,
    MomentAlgorithm,
    accumulate,
    accumulate_all,
    empty,
    merge,
    parse_algorithm,
    parse_algorithms,
    update,
)

CENTRED = (MomentAlgorithm.LING, MomentAlgorithm.LING_KAHAN, MomentAlgorithm.CHAN_LEWIS_KAHAN)
COMPENSATED = (MomentAlgorithm.NAIVE_KAHAN, MomentAlgorithm.LING_KAHAN, MomentAlgorithm.CHAN_LEWIS_KAHAN)


@pytest.fixture(scope="module")
def shifted_normals():
    return 1e5 + normals(11, 1, 4000)


class TestParse:
    def test_tags_aliases_and_spelling(self):
        assert parse_algorithm("ChanLewisKahan") is MomentAlgorithm.CHAN_LEWIS_KAHAN
        assert parse_algorithm("chan-lewis-kahan") is MomentAlgorithm.CHAN_LEWIS_KAHAN
        assert parse_algorithm("kahan") is MomentAlgorithm.NAIVE_KAHAN
        assert parse_algorithm("knuth") is MomentAlgorithm.NAIVE_KNUTH
        assert parse_algorithm("shifted") is MomentAlgorithm.SHIFTED_NAIVE_KAHAN

    def test_unknown_and_empty(self):
        with pytest.raises(ConfigError):
            parse_algorithm("welford")
        with pytest.raises(ConfigError):
            parse_algorithms([])

    def test_duplicates_collapse(self):
        assert parse_algorithms(["naive", "Naive", "ling"]) == (MomentAlgorithm.NAIVE, MomentAlgorithm.LING)


class TestSmallSequences:
    def test_chan_lewis_on_one_two_three(self):
        stats = accumulate([1.0, 2.0, 3.0], MomentAlgorithm.CHAN_LEWIS_KAHAN).finalize()
        assert stats.n == 3
        assert stats.mean == 2.0
        assert stats.variance == 2.0 / 3.0
        assert stats.sum == 6.0

    def test_ling_on_one_two_three(self):
        stats = accumulate([1.0, 2.0, 3.0], MomentAlgorithm.LING).finalize()
        assert stats.mean == 2.0
        assert stats.variance == 2.0 / 3.0

    @pytest.mark.parametrize("algorithm", ALL_ALGORITHMS)
    def test_every_algorithm_on_one_two_three(self, algorithm):
        stats = accumulate([1.0, 2.0, 3.0], algorithm).finalize()
        assert stats.mean == pytest.approx(2.0, rel=1e-15)
        assert stats.variance == pytest.approx(2.0 / 3.0, rel=1e-14)
        assert stats.sum == pytest.approx(6.0, rel=1e-15)

    def test_sample_variance(self):
        stats = accumulate([1.0, 2.0, 3.0], MomentAlgorithm.CHAN_LEWIS_KAHAN).finalize(sample=True)
        assert stats.variance == pytest.approx(1.0)
        with pytest.raises(AccumulatorError):
            accumulate([1.0], MomentAlgorithm.NAIVE).finalize(sample=True)

    def test_shifted_naive_near_a_large_offset(self):
        xs = [1e9 + 1, 1e9 + 2, 1e9 + 3]
        stats = accumulate(xs, MomentAlgorithm.SHIFTED_NAIVE_KAHAN).finalize()
        assert stats.mean == 1e9 + 2
        assert stats.variance == pytest.approx(2.0 / 3.0, rel=1e-12)

    @pytest.mark.parametrize("algorithm", CENTRED)
    def test_constant_data_has_zero_variance(self, algorithm):
        stats = accumulate([1e5 + 0.125] * 1000, algorithm).finalize()
        assert stats.variance == 0.0
        assert stats.mean == 1e5 + 0.125

    def test_binary32_state(self):
        acc = accumulate(np.array([0.5, 0.25, 0.125], dtype=np.float32), "Naive", "binary32")
        stats = acc.finalize()
        assert acc.state.dtype == np.float32
        assert stats.mean.dtype == np.float32
        assert stats.mean == np.float32(0.875) / np.float32(3.0)


class TestMerge:
    def test_two_blocks_of_two(self):
        a = accumulate([1.0, 2.0], MomentAlgorithm.NAIVE)
        b = accumulate([3.0, 4.0], MomentAlgorithm.NAIVE)
        stats = merge(a, b).finalize()
        assert stats.n == 4
        assert stats.mean == 2.5
        assert stats.variance == 1.25
        assert a.k == 2

    @pytest.mark.parametrize("algorithm", ALL_ALGORITHMS)
    def test_every_algorithm_merges_two_blocks(self, algorithm):
        stats = merge(accumulate([1.0, 2.0], algorithm), accumulate([3.0, 4.0], algorithm)).finalize()
        assert stats.mean == pytest.approx(2.5, rel=1e-15)
        assert stats.variance == pytest.approx(1.25, rel=1e-14)

    @pytest.mark.parametrize("algorithm", ALL_ALGORITHMS)
    def test_empty_is_the_identity(self, algorithm, shifted_normals):
        acc = accumulate(shifted_normals[:100], algorithm)
        left = merge(empty(algorithm), acc)
        right = merge(acc, empty(algorithm))
        assert np.array_equal(left.state, acc.state) and left.k == acc.k
        assert np.array_equal(right.state, acc.state) and right.k == acc.k

    @pytest.mark.parametrize("algorithm", ALL_ALGORITHMS)
    def test_blocks_of_one_replay_the_sequential_fold(self, algorithm, shifted_normals):
        xs = shifted_normals[:300]
        total = empty(algorithm)
        for x in xs:
            total.merge(accumulate([x], algorithm))
        assert np.array_equal(total.state, accumulate(xs, algorithm).state)

    @pytest.mark.parametrize("algorithm", ALL_ALGORITHMS)
    def test_uneven_blocks_stay_close_to_the_oracle(self, algorithm, shifted_normals):
        exact = exact_moments(shifted_normals)
        total = empty(algorithm)
        for start, stop in [(0, 1), (1, 700), (700, 701), (701, 2500), (2500, 4000)]:
            total.merge(accumulate(shifted_normals[start:stop], algorithm))
        stats = total.finalize()
        assert stats.n == shifted_normals.size
        assert error_report(stats.mean, exact.mean).relative < 1e-12
        assert stats.variance == pytest.approx(float(exact.variance), rel=1e-2)

    def test_mismatched_accumulators(self):
        with pytest.raises(AccumulatorError):
            merge(empty("Naive"), accumulate([1.0], "Ling"))
        with pytest.raises(AccumulatorError):
            merge(empty("Naive", "binary32"), accumulate([1.0], "Naive"))


class TestUpdate:
    @pytest.mark.parametrize("algorithm", ALL_ALGORITHMS)
    def test_per_step_equals_bulk(self, algorithm, shifted_normals):
        xs = shifted_normals[:500]
        acc = empty(algorithm)
        for x in xs:
            acc.update(x)
        bulk = accumulate(xs, algorithm)
        assert np.array_equal(acc.state, bulk.state)
        assert same_bits(acc.finalize().variance, bulk.finalize().variance)

    def test_functional_update_leaves_input_alone(self):
        acc = accumulate([1.0, 2.0], "Ling")
        after = update(acc, 3.0)
        assert acc.k == 2 and after.k == 3
        assert after.first == 1.0

    def test_empty_finalize_raises(self):
        with pytest.raises(AccumulatorError):
            empty("ChanLewisKahan").finalize()
        with pytest.raises(AccumulatorError):
            empty("Ling").first


def test_compensated_means_at_desk_scale(shifted_normals):
    exact = exact_moments(shifted_normals)
    results = accumulate_all(shifted_normals, ALL_ALGORITHMS)
    for algorithm in (MomentAlgorithm.NAIVE_KAHAN, MomentAlgorithm.NAIVE_KLEIN, MomentAlgorithm.CHAN_LEWIS_KAHAN):
        assert error_report(results[algorithm].finalize().mean, exact.mean).ulps <= 4
    for algorithm in CENTRED:
        assert results[algorithm].finalize().variance >= 0


def test_sum_reporting_by_tag():
    xs = [0.5, 1.5, 2.5, 3.5]
    assert accumulate(xs, "Naive").finalize().sum == 8.0
    assert accumulate(xs, "ChanLewisKahan").finalize().sum == 8.0
    ling = accumulate(xs, "Ling").finalize()
    assert ling.sum == ling.mean * 4


def _within_one_ulp(approx, exact) -> bool:
    return abs(as_exact(approx) - as_exact(round_to(exact))) <= ulp_at(exact)


@pytest.mark.parametrize("algorithm", COMPENSATED)
def test_merge_is_associative_on_small_corpora(algorithm):
    rng = np.random.default_rng(77)
    for _ in range(1000):
        xs = 1e3 * rng.uniform(1.0, 2.0, int(rng.integers(3, 40)))
        i, j = sorted(int(c) for c in rng.choice(np.arange(1, xs.size), 2, replace=False))
        a, b, c = (accumulate(part, algorithm) for part in (xs[:i], xs[i:j], xs[j:]))
        exact = exact_moments(xs).mean
        left = merge(merge(a, b), c).finalize()
        right = merge(a, merge(b, c)).finalize()
        assert left.n == right.n == xs.size
        assert _within_one_ulp(left.mean, exact)
        assert _within_one_ulp(right.mean, exact)


def test_block_merges_in_twenty_orders_agree_to_one_ulp():
    xs = 1e5 + normals(5, 1, 1_000_000)
    algorithm = MomentAlgorithm.CHAN_LEWIS_KAHAN
    blocks = [accumulate(xs[i * 125_000:(i + 1) * 125_000], algorithm) for i in range(8)]
    means = []
    for seed in range(20):
        total = empty(algorithm)
        for index in seeded_permutation(8, seed):
            total.merge(blocks[index])
        assert total.k == xs.size
        means.append(float(total.finalize().mean))
    assert max(means) - min(means) <= ulp_at(means[0])
    assert all(block.k == 125_000 for block in blocks)


def test_reordering_the_normal_corpus_only_moves_the_naive_mean():
    xs = 1e5 + normals(DEFAULT_SEED, 1, 100_000)
    orderings = [xs, np.sort(xs)] + [xs[seeded_permutation(xs.size, seed)] for seed in range(1, 21)]
    for algorithm in COMPENSATED:
        patterns = {to_bits_hex(accumulate(o, algorithm).finalize().mean) for o in orderings}
        assert len(patterns) == 1, algorithm
    naive = {to_bits_hex(accumulate(o, MomentAlgorithm.NAIVE).finalize().mean) for o in orderings}
    assert len(naive) >= 2


def test_payoff_like_data_keeps_compensated_means_exact():
    # n copies of 1e6 among zeros: the exact sum is an integer below 2**53
    n = 1_000_003
    xs = np.where(uniforms(DEFAULT_SEED, 1, n) < 0.3, 1e6, 0.0)
    expected = round_to(exact_moments(xs).mean)
    for algorithm in (MomentAlgorithm.NAIVE, MomentAlgorithm.LING_KAHAN, MomentAlgorithm.CHAN_LEWIS_KAHAN):
        assert accumulate(xs, algorithm).finalize().mean == expected, algorithm
    assert accumulate(xs, MomentAlgorithm.LING).finalize().mean != expected
