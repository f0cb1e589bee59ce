#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "oracle.hpp"
#include "ttpmf/cross.hpp"
#include "ttpmf/errors.hpp"

using namespace ttpmf;

namespace {

DenseTensor fill(const Shape& shape, const std::function<double(std::span<const std::size_t>)>& f) {
    DenseTensor t(shape);
    std::vector<std::size_t> idx(shape.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        t.unravel(i, idx);
        t.values()[i] = f(idx);
    }
    return t;
}

}  // namespace

TEST(GreedyCross, SeparableFunctionIsRankOne) {
    BlackBoxTensor bb{{8, 9, 10}, [](std::span<const std::size_t> i) {
                          return (1.0 + static_cast<double>(i[0])) * std::exp(-0.1 * static_cast<double>(i[1])) *
                                 (2.0 + std::cos(static_cast<double>(i[2])));
                      }};
    const CrossResult r = greedy_cross(bb, CrossConfig{});
    EXPECT_TRUE(r.report.converged);
    EXPECT_EQ(r.tt.max_rank(), 1u);
    EXPECT_LT(oracle::relative_error(oracle::expand(r.tt), fill(bb.shape, bb.evaluator)), 1e-12);
}

TEST(GreedyCross, GaussianBumpWithFewerCallsThanElements) {
    // correlated 2D Gaussian on a 33 x 33 grid
    auto f = [](std::span<const std::size_t> i) {
        const double x = (static_cast<double>(i[0]) - 16.0) / 5.0, y = (static_cast<double>(i[1]) - 16.0) / 5.0;
        return std::exp(-0.5 * (x * x - 1.2 * x * y + y * y) / (1 - 0.36));
    };
    const BlackBoxTensor bb{{33, 33}, f};
    const CrossResult r = greedy_cross(bb, CrossConfig{});
    EXPECT_TRUE(r.report.converged);
    EXPECT_LT(r.report.evaluator_calls, 33u * 33u);
    EXPECT_LT(oracle::relative_error(oracle::expand(r.tt), fill(bb.shape, f)), 1e-5);
}

TEST(GreedyCross, LowRankFunctionThreeModes) {
    auto f = [](std::span<const std::size_t> i) {
        const double a = static_cast<double>(i[0]), b = static_cast<double>(i[1]), c = static_cast<double>(i[2]);
        return 1.0 / (1.0 + a + b + c);
    };
    const BlackBoxTensor bb{{10, 10, 10}, f};
    const CrossResult r = greedy_cross(bb, CrossConfig{.tol = 1e-8});
    EXPECT_LT(oracle::relative_error(oracle::expand(r.tt), fill(bb.shape, f)), 1e-6);
    EXPECT_LE(r.report.achieved_error, 1e-6);
}

TEST(GreedyCross, SameSeedSameResult) {
    auto f = [](std::span<const std::size_t> i) {
        return std::sin(0.3 * static_cast<double>(i[0] * i[1])) + 0.1 * static_cast<double>(i[2]);
    };
    const BlackBoxTensor bb{{7, 8, 9}, f};
    const CrossResult a = greedy_cross(bb, CrossConfig{.rng_seed = 42});
    const CrossResult b = greedy_cross(bb, CrossConfig{.rng_seed = 42});
    ASSERT_EQ(a.tt.ranks(), b.tt.ranks());
    for (std::size_t k = 0; k < a.tt.dims(); ++k)
        EXPECT_TRUE(std::equal(a.tt.core(k).data().begin(), a.tt.core(k).data().end(), b.tt.core(k).data().begin()));
}

TEST(GreedyCross, RankCapIsReported) {
    auto f = [](std::span<const std::size_t> i) { return i[0] == i[1] ? 1.0 : 0.0; };
    const BlackBoxTensor bb{{12, 12}, f};
    const CrossResult r = greedy_cross(bb, CrossConfig{.max_rank = 3, .full_search_elements = 1000});
    EXPECT_TRUE(r.report.rank_capped);
    EXPECT_LE(r.tt.max_rank(), 3u);
}

TEST(GreedyCross, NarrowSupportFoundByFullSearch) {
    auto f = [](std::span<const std::size_t> i) {
        const double x = static_cast<double>(i[0]) - 27.0, y = static_cast<double>(i[1]) - 4.0;
        return std::exp(-0.5 * (x * x + 3.0 * y * y + x * y));
    };
    const BlackBoxTensor bb{{33, 33}, f};
    const CrossResult r = greedy_cross(bb, CrossConfig{.full_search_elements = 1u << 16});
    EXPECT_LT(oracle::relative_error(oracle::expand(r.tt), fill(bb.shape, f)), 1e-5);
}

TEST(GreedyCross, NonFiniteValuesAreRejected) {
    auto f = [](std::span<const std::size_t> i) {
        return i[0] == 2 ? std::numeric_limits<double>::quiet_NaN() : 1.0;
    };
    const BlackBoxTensor bb{{4, 4}, f};
    EXPECT_THROW((void)greedy_cross(bb, CrossConfig{.full_search_elements = 100}), NonFiniteValueError);
}

TEST(GreedyCross, InvalidInputs) {
    const BlackBoxTensor empty{{}, [](std::span<const std::size_t>) { return 1.0; }};
    EXPECT_THROW((void)greedy_cross(empty, CrossConfig{}), ShapeError);
    const BlackBoxTensor ok{{3, 3}, [](std::span<const std::size_t>) { return 1.0; }};
    EXPECT_THROW((void)greedy_cross(ok, CrossConfig{.tol = -1.0}), std::invalid_argument);
}
