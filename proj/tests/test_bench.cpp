#include <gtest/gtest.h>

#include <cmath>

#include "idoc/bench.hpp"
#include "idoc/error.hpp"
#include "idoc/similarity.hpp"

using namespace idoc;

namespace {

BenchConfig small_profile(BenchMode mode)
{
    BenchConfig cfg;
    cfg.mode = mode;
    cfg.pages = 6;
    cfg.queries = 5;
    cfg.regions_per_page = 9;
    cfg.dim = 16;
    cfg.page_width = 60;
    cfg.page_height = 40;
    cfg.stride = 5;
    cfg.top_k = 10;
    return cfg;
}

}  // namespace

TEST(Bench, RandomUnitVectors)
{
    const auto a = random_unit_vectors(3, 10, 24);
    ASSERT_EQ(a.size(), 240u);
    for (std::size_t i = 0; i < 10; ++i) {
        const std::span<const float> v(a.data() + i * 24, 24);
        EXPECT_NEAR(dot(v, v), 1.0, 1e-6);
    }
    EXPECT_EQ(random_unit_vectors(3, 10, 24), a);
    EXPECT_NE(random_unit_vectors(4, 10, 24), a);
}

TEST(Bench, SparseCounts)
{
    const BenchReport r = run_bench(small_profile(BenchMode::sparse));
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_EQ(r.rows[0].mode, "sparse");
    EXPECT_EQ(r.rows[0].comparisons, 5u * 6u * 9u);
    EXPECT_EQ(r.rows[0].placements_per_page, 9u);
    EXPECT_FALSE(r.rows[0].extrapolated);
    EXPECT_FALSE(r.costs.has_value());
}

TEST(Bench, DenseCountsAndRatio)
{
    BenchConfig cfg = small_profile(BenchMode::both);
    cfg.query_grid_w = 2;
    cfg.query_grid_h = 3;
    const BenchReport r = run_bench(cfg);
    ASSERT_EQ(r.rows.size(), 2u);
    const std::uint64_t placements = (12 - 2 + 1) * (8 - 3 + 1);
    EXPECT_EQ(r.dense_placements_per_page, placements);
    EXPECT_EQ(r.rows[1].comparisons, 6u * 5u * placements * 6u);
    EXPECT_EQ(r.dense_counted_sample, r.dense_closed_form_sample);
    EXPECT_EQ(r.dense_counted_sample, placements * 6u);  // 1 page x 1 query sampled
    EXPECT_DOUBLE_EQ(r.placement_ratio, static_cast<double>(placements) / 9.0);
    ASSERT_TRUE(r.costs.has_value());
    EXPECT_DOUBLE_EQ(r.costs->placement_ratio, r.placement_ratio);
}

TEST(Bench, ProfilePlacementRatio)
{
    BenchConfig cfg;
    cfg.mode = BenchMode::dense;
    cfg.pages = 2;
    cfg.queries = 1;
    cfg.dim = 8;
    const BenchReport r = run_bench(cfg);
    EXPECT_EQ(r.dense_placements_per_page, 22080u);
    EXPECT_DOUBLE_EQ(r.placement_ratio, 22080.0 / 112.0);
    EXPECT_GE(r.placement_ratio, 5.0);
}

TEST(Bench, CountsAreDeterministic)
{
    const BenchConfig cfg = small_profile(BenchMode::both);
    EXPECT_EQ(run_bench(cfg, 1).counts_json().dump(), run_bench(cfg, 3).counts_json().dump());
    const std::string csv = run_bench(cfg).csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "mode,pages,queries,comparisons,wall_ms,per_query_ms,placements_per_page,comparisons_per_page,"
              "measured_pages,measured_queries,extrapolated");
}

TEST(Bench, Validation)
{
    BenchConfig cfg = small_profile(BenchMode::sparse);
    cfg.dim = 0;
    EXPECT_THROW(cfg.validate(), Error);
    cfg = small_profile(BenchMode::dense);
    cfg.stride = 100;
    EXPECT_THROW(run_bench(cfg), Error);
    EXPECT_THROW(bench_mode_from_string("fast"), Error);
}
