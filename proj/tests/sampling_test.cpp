#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "panonerf/fenwick.hpp"
#include "panonerf/sampling.hpp"
#include "support.hpp"

namespace pn = panonerf;

namespace {

std::vector<double> random_weights(size_t n, pn::Rng& rng) {
    std::vector<double> w(n);
    for (auto& x : w) x = rng.uniform(0.01, 1.0);
    return w;
}

}  // namespace

TEST(Fenwick, PrefixSumsMatchNaive) {
    pn::Rng rng(11);
    for (size_t n : {1ul, 7ul, 64ul, 1000ul}) {
        auto w = random_weights(n, rng);
        pn::FenwickTree tree(w);
        double naive = 0.0;
        EXPECT_EQ(tree.prefix_sum(0), 0.0);
        for (size_t i = 0; i < n; ++i) {
            naive += w[i];
            EXPECT_NEAR(tree.prefix_sum(i + 1), naive, 1e-12 * naive);
        }
        EXPECT_NEAR(tree.total(), naive, 1e-12 * naive);
    }
}

TEST(Fenwick, PointAssignment) {
    pn::Rng rng(12);
    auto w = random_weights(100, rng);
    pn::FenwickTree tree(w);
    for (int k = 0; k < 500; ++k) {
        size_t i = rng.next_below(100);
        double v = rng.uniform(0.0, 2.0);
        tree.set(i, v);
        w[i] = v;
    }
    for (size_t i = 0; i < w.size(); ++i) EXPECT_EQ(tree.value(i), w[i]);
    double naive = 0.0;
    for (size_t i = 0; i < w.size(); ++i) {
        naive += w[i];
        EXPECT_NEAR(tree.prefix_sum(i + 1), naive, 1e-12 * (naive + 1.0));
    }
}

TEST(Fenwick, SelectBoundaries) {
    pn::FenwickTree tree({1.0, 2.0, 3.0});
    EXPECT_EQ(tree.select(0.0), 0u);
    EXPECT_EQ(tree.select(0.999), 0u);
    EXPECT_EQ(tree.select(1.0), 1u);   // prefix 1.0 is not > 1.0
    EXPECT_EQ(tree.select(2.999), 1u);
    EXPECT_EQ(tree.select(3.0), 2u);
    EXPECT_EQ(tree.select(5.999), 2u);
    EXPECT_EQ(tree.select(6.0), 2u);   // clamped; callers keep target < total
}

TEST(Fenwick, SelectSkipsZeroWeight) {
    pn::FenwickTree tree({1.0, 0.0, 2.0});
    EXPECT_EQ(tree.select(1.0), 2u);
    EXPECT_EQ(tree.select(0.5), 0u);
}

TEST(Fenwick, Errors) {
    EXPECT_THROW(pn::FenwickTree(std::vector<double>{}), pn::InputDomainError);
    pn::FenwickTree tree({1.0});
    EXPECT_THROW(tree.set(1, 0.0), pn::InputDomainError);
    EXPECT_THROW(tree.prefix_sum(2), pn::InputDomainError);
}

TEST(PixelLayout, FlatIndexBijection) {
    pn::PixelLayout layout({{4, 2}, {3, 3}});
    EXPECT_EQ(layout.total_pixels(), 17u);
    // Equal-dims formula: image*W*H + row*W + col.
    pn::PixelLayout same({{4, 2}, {4, 2}});
    EXPECT_EQ(same.flat_index({1, 1, 3}), 1u * 8 + 1 * 4 + 3);
    for (size_t f = 0; f < layout.total_pixels(); ++f) {
        EXPECT_EQ(layout.flat_index(layout.pixel(f)), f);
    }
    EXPECT_THROW(layout.flat_index({2, 0, 0}), pn::InputDomainError);
    EXPECT_THROW(layout.flat_index({0, 2, 0}), pn::InputDomainError);
    EXPECT_THROW(layout.pixel(17), pn::InputDomainError);
}

TEST(DistortionTable, TwoRowImageIsUniform) {
    pn::PixelLayout layout({{4, 2}});
    auto table = pn::build_distortion_table(layout);
    ASSERT_EQ(table.p.size(), 8u);
    for (double p : table.p) EXPECT_NEAR(p, 0.125, 1e-15);
    EXPECT_NEAR(pn::kahan_sum(table.p), 1.0, 1e-12);
}

TEST(DistortionTable, EquatorToPoleRatio) {
    // Ratio of equator-adjacent row to pole row from the closed-form band area
    // (2pi/W)(sin th_hi - sin th_lo), evaluated independently here.
    int W = 64, H = 32;
    pn::PixelLayout layout({{W, H}});
    auto table = pn::build_distortion_table(layout);
    auto band = [&](int v) {
        double hi = pn::kPi / 2 - pn::kPi * v / H;
        double lo = pn::kPi / 2 - pn::kPi * (v + 1) / H;
        return std::sin(hi) - std::sin(lo);
    };
    double expect = band(15) / band(0);
    double got = table.p[15 * W] / table.p[0];
    EXPECT_NEAR(got, expect, 1e-12 * expect);
    EXPECT_NEAR(pn::kahan_sum(table.p), 1.0, 1e-12);
}

TEST(DistortionTable, TwoIdenticalImagesHalveProbabilities) {
    pn::PixelLayout one({{16, 8}});
    pn::PixelLayout two({{16, 8}, {16, 8}});
    auto t1 = pn::build_distortion_table(one);
    auto t2 = pn::build_distortion_table(two);
    for (size_t i = 0; i < t1.p.size(); ++i) {
        EXPECT_NEAR(t2.p[i], 0.5 * t1.p[i], 1e-15 * t1.p[i]);
        EXPECT_NEAR(t2.p[i + t1.p.size()], 0.5 * t1.p[i], 1e-15 * t1.p[i]);
    }
}

TEST(DistortionTable, UniformTable) {
    pn::PixelLayout layout({{10, 5}});
    auto table = pn::build_uniform_table(layout);
    for (double p : table.p) EXPECT_EQ(p, 1.0 / 50.0);
}

TEST(ContentState, PointwiseUpdateRules) {
    pn::ContentState state(10);
    for (double s : state.s) EXPECT_EQ(s, 1.0);
    pn::content_update(state, {{3, 0.5}});
    EXPECT_EQ(state.s[3], 0.5);
    EXPECT_EQ(state.s[2], 1.0);
    pn::content_update(state, {{4, 0.0}});
    EXPECT_EQ(state.s[4], state.floor_eps);
    // Repeated pixel in one batch: last occurrence wins.
    pn::content_update(state, {{5, 0.3}, {5, 0.7}});
    EXPECT_EQ(state.s[5], 0.7);
    EXPECT_THROW(pn::content_update(state, {{6, -0.1}}), pn::DataError);
    EXPECT_THROW(pn::content_update(state, {{6, std::nan("")}}), pn::DataError);
    EXPECT_THROW(pn::content_update(state, {{99, 0.1}}), pn::InputDomainError);
}

TEST(SamplingTable, RebuildRatioPreservation) {
    pn::PixelLayout layout({{8, 4}});
    auto pd = pn::build_distortion_table(layout);
    pn::ContentState sc(layout.total_pixels());
    pn::SamplingTable table(layout, pd, sc);
    size_t k = 9, ref = 10;  // same row, equal base probability
    double before = table.weight(k) / table.weight(ref);
    pn::content_update(sc, {{k, 10.0}});
    table.rebuild_combined(pd, sc, {k});
    double after = table.weight(k) / table.weight(ref);
    EXPECT_NEAR(after, 10.0 * before, 1e-12);
}

TEST(SamplingTable, EmptyTouchedIsIdentity) {
    pn::PixelLayout layout({{8, 4}});
    auto pd = pn::build_distortion_table(layout);
    pn::ContentState sc(layout.total_pixels());
    pn::SamplingTable table(layout, pd, sc);
    std::vector<double> w_before(table.size());
    for (size_t i = 0; i < table.size(); ++i) w_before[i] = table.weight(i);
    double total_before = table.total_weight();
    table.rebuild_combined(pd, sc, {});
    for (size_t i = 0; i < table.size(); ++i) EXPECT_EQ(table.weight(i), w_before[i]);
    EXPECT_EQ(table.total_weight(), total_before);
}

TEST(SamplingTable, IncrementalMatchesFromScratch) {
    pn::PixelLayout layout({{64, 32}});
    auto pd = pn::build_distortion_table(layout);
    pn::ContentState sc(layout.total_pixels());
    pn::SamplingTable incremental(layout, pd, sc);
    pn::Rng rng(99);
    for (int iter = 0; iter < 1000; ++iter) {
        std::vector<std::pair<size_t, double>> batch;
        std::vector<size_t> touched;
        for (int j = 0; j < 8; ++j) {
            size_t flat = rng.next_below(layout.total_pixels());
            batch.emplace_back(flat, rng.uniform(0.0, 2.0));
            touched.push_back(flat);
        }
        pn::content_update(sc, batch);
        incremental.rebuild_combined(pd, sc, touched);
    }
    pn::SamplingTable fresh(layout, pd, sc);
    for (size_t c = 0; c <= incremental.size(); ++c) {
        double a = incremental.prefix_sum(c);
        double b = fresh.prefix_sum(c);
        EXPECT_NEAR(a, b, 1e-12 * (std::abs(b) + 1e-30)) << "prefix " << c;
    }
    incremental.verify_total();
}

TEST(SamplingTable, OneHotDrawsDominant) {
    size_t n = 1000, hot = 437;
    pn::PixelLayout layout({{static_cast<int>(n), 1}});
    auto pd = pn::build_uniform_table(layout);
    pn::ContentState sc(layout.total_pixels());
    std::vector<std::pair<size_t, double>> batch;
    for (size_t i = 0; i < n; ++i) batch.emplace_back(i, i == hot ? 1e9 * sc.floor_eps : 0.0);
    pn::content_update(sc, batch);
    pn::SamplingTable table(layout, pd, sc);
    pn::Rng rng(5);
    auto ids = table.draw_batch(100000, rng);
    size_t hits = 0;
    for (const auto& id : ids) hits += (id.col == static_cast<int>(hot));
    EXPECT_GE(hits, 99990u);
}

TEST(SamplingTable, UniformDrawsPassChiSquare) {
    size_t n = 1000;
    pn::PixelLayout layout({{static_cast<int>(n), 1}});
    auto pd = pn::build_uniform_table(layout);
    pn::ContentState sc(n);
    pn::SamplingTable table(layout, pd, sc);
    pn::Rng rng(2024);
    auto ids = table.draw_batch(1000000, rng);
    std::vector<long long> counts(n, 0);
    for (const auto& id : ids) counts[static_cast<size_t>(id.col)]++;
    std::vector<double> probs(n, 1.0 / n);
    int dof = 0;
    double stat = testsupport::chi2_stat(counts, probs, static_cast<long long>(ids.size()), dof);
    EXPECT_LT(stat, testsupport::chi2_crit_999(dof)) << "dof=" << dof;
}

TEST(SamplingTable, BatchSizeAndDeterminism) {
    pn::PixelLayout layout({{64, 32}});
    auto pd = pn::build_distortion_table(layout);
    pn::ContentState sc(layout.total_pixels());
    pn::SamplingTable table(layout, pd, sc);
    pn::Rng a(77), b(77), c(78);
    auto batch_a = table.draw_batch(2048, a);
    auto batch_b = table.draw_batch(2048, b);
    auto batch_c = table.draw_batch(2048, c);
    ASSERT_EQ(batch_a.size(), 2048u);
    EXPECT_TRUE(batch_a == batch_b);
    EXPECT_FALSE(batch_a == batch_c);
}

TEST(SamplingTable, DistortionMonotonicityInDraws) {
    // With uniform content state, per-pixel weight is maximal at the equator
    // rows and strictly decreases toward both poles.
    int W = 32, H = 16;
    pn::PixelLayout layout({{W, H}});
    auto pd = pn::build_distortion_table(layout);
    pn::ContentState sc(layout.total_pixels());
    pn::SamplingTable table(layout, pd, sc);
    for (int v = 0; v + 1 < H / 2; ++v) {
        EXPECT_LT(table.weight(layout.flat_index({0, v, 0})),
                  table.weight(layout.flat_index({0, v + 1, 0})));
    }
    for (int v = H / 2; v + 1 < H; ++v) {
        EXPECT_GT(table.weight(layout.flat_index({0, v, 0})),
                  table.weight(layout.flat_index({0, v + 1, 0})));
    }
}

TEST(SamplingTable, ConstructorRejectsNonpositiveWeights) {
    pn::PixelLayout layout({{4, 1}});
    pn::DistortionTable pd{{0.25, 0.25, 0.0, 0.5}};
    pn::ContentState sc(4);
    EXPECT_THROW(pn::SamplingTable(layout, pd, sc), pn::DataError);
}

TEST(Heatmap, FreshTableRowsConstantBrightestAtEquator) {
    pn::PixelLayout layout({{32, 16}});
    auto pd = pn::build_distortion_table(layout);
    pn::ContentState sc(layout.total_pixels());
    pn::SamplingTable table(layout, pd, sc);
    pn::ErpImage heat = pn::sampling_heatmap(table, 0);
    for (int v = 0; v < 16; ++v) {
        for (int u = 1; u < 32; ++u) EXPECT_EQ(heat.at(u, v, 0), heat.at(0, v, 0));
    }
    EXPECT_EQ(heat.at(0, 7, 0), 1.0f);
    EXPECT_EQ(heat.at(0, 8, 0), 1.0f);
    EXPECT_LT(heat.at(0, 0, 0), heat.at(0, 7, 0));
}

TEST(Heatmap, OneHotContentSingleBrightPixel) {
    pn::PixelLayout layout({{8, 4}});
    auto pd = pn::build_uniform_table(layout);
    pn::ContentState sc(layout.total_pixels());
    std::vector<std::pair<size_t, double>> batch;
    for (size_t i = 0; i < layout.total_pixels(); ++i) batch.emplace_back(i, 0.0);
    batch[13].second = 1000.0;
    pn::content_update(sc, batch);
    pn::SamplingTable table(layout, pd, sc);
    pn::ErpImage heat = pn::sampling_heatmap(table, 0);
    auto id = layout.pixel(13);
    EXPECT_EQ(heat.at(id.col, id.row, 0), 1.0f);
    for (size_t i = 0; i < layout.total_pixels(); ++i) {
        if (i == 13) continue;
        auto p = layout.pixel(i);
        EXPECT_LT(heat.at(p.col, p.row, 0), 1e-6f);
    }
}

TEST(Heatmap, MatchesDrawFrequencies) {
    // Draw frequencies fit the probabilities reconstructed from the heatmap.
    pn::PixelLayout layout({{64, 32}});
    auto pd = pn::build_distortion_table(layout);
    pn::ContentState sc(layout.total_pixels());
    pn::Rng urng(31);
    std::vector<std::pair<size_t, double>> batch;
    for (size_t i = 0; i < 400; ++i)
        batch.emplace_back(urng.next_below(layout.total_pixels()), urng.uniform(0.0, 3.0));
    pn::content_update(sc, batch);
    pn::SamplingTable table(layout, pd, sc);

    pn::ErpImage heat = pn::sampling_heatmap(table, 0);
    std::vector<double> heatvals(table.size());
    double sum = 0.0;
    for (size_t i = 0; i < table.size(); ++i) {
        auto p = layout.pixel(i);
        heatvals[i] = heat.at(p.col, p.row, 0);
        sum += heatvals[i];
    }
    for (auto& x : heatvals) x /= sum;

    pn::Rng rng(451);
    auto ids = table.draw_batch(1000000, rng);
    std::vector<long long> counts(table.size(), 0);
    for (const auto& id : ids) counts[layout.flat_index(id)]++;
    int dof = 0;
    double stat = testsupport::chi2_stat(counts, heatvals, static_cast<long long>(ids.size()), dof);
    EXPECT_LT(stat, testsupport::chi2_crit_999(dof)) << "dof=" << dof;
}
