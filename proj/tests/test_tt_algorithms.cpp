#include <gtest/gtest.h>

#include <random>

#include <Eigen/Core>

#include "oracle.hpp"
#include "ttpmf/errors.hpp"
#include "ttpmf/tt_algorithms.hpp"

using namespace ttpmf;

TEST(EinsumTpm, MatchesDenseContraction) {
    std::mt19937_64 rng(11);
    for (std::size_t d = 1; d <= 3; ++d) {
        Shape s(d, 4), ts(d, 5);
        ts.insert(ts.end(), s.begin(), s.end());
        const TensorTrain T = oracle::random_tt(ts, std::vector<std::size_t>(2 * d - 1, 3), rng);
        const TensorTrain P = oracle::random_tt(s, std::vector<std::size_t>(d - 1, 2), rng);
        const TensorTrain out = tt_einsum_tpm(T, P);
        EXPECT_EQ(out.shape(), Shape(d, 5));
        EXPECT_LT(oracle::relative_error(oracle::expand(out), oracle::einsum_tpm(oracle::expand(T), oracle::expand(P))),
                  1e-12);
    }
}

TEST(EinsumTpm, OneDimensionIsMatrixVectorProduct) {
    std::mt19937_64 rng(12);
    const TensorTrain T = oracle::random_tt({6, 7}, {4}, rng);
    const TensorTrain P = oracle::random_tt({7}, {}, rng);
    const TensorTrain out = tt_einsum_tpm(T, P);
    ASSERT_EQ(out.dims(), 1u);
    EXPECT_EQ(out.ranks(), (std::vector<std::size_t>{1, 1}));
    const DenseTensor m = oracle::expand(T);
    const Eigen::Map<const Eigen::MatrixXd> M(m.values().data(), 6, 7);
    const Eigen::Map<const Eigen::VectorXd> p(P.core(0).data().data(), 7);
    const Eigen::VectorXd want = M * p;
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(out.core(0)(0, i, 0), want(static_cast<Eigen::Index>(i)), 1e-13);
}

TEST(EinsumTpm, RejectsMismatchedModes) {
    const TensorTrain T = TensorTrain::ones(Shape{3, 3, 4, 4});
    EXPECT_THROW((void)tt_einsum_tpm(T, TensorTrain::ones(Shape{4, 5})), ShapeError);
    EXPECT_THROW((void)tt_einsum_tpm(T, TensorTrain::ones(Shape{4})), ShapeError);
}

TEST(FftConvolve, MatchesDirectSumAndDenseFft) {
    std::mt19937_64 rng(13);
    const TensorTrain K = oracle::random_tt({5, 7, 3}, {2, 3}, rng);
    const TensorTrain P = oracle::random_tt({5, 7, 3}, {3, 2}, rng);
    const DenseTensor want = oracle::circular_convolve(oracle::expand(K), oracle::expand(P));
    EXPECT_LT(oracle::relative_error(oracle::expand(tt_fft_convolve(K, P, 1e-13)), want), 1e-12);
    EXPECT_LT(oracle::relative_error(fft_convolve_dense(oracle::expand(K), oracle::expand(P)), want), 1e-12);
}

TEST(FftConvolve, DeltaKernelIsIdentity) {
    std::mt19937_64 rng(14);
    const TensorTrain P = oracle::random_tt({5, 5}, {2}, rng);
    const TensorTrain delta = tt_rank_one({{1, 0, 0, 0, 0}, {1, 0, 0, 0, 0}});
    EXPECT_LT(oracle::relative_error(oracle::expand(tt_fft_convolve(delta, P, 1e-14)), oracle::expand(P)), 1e-13);
}

TEST(FftConvolve, EvenModesRejected) {
    const TensorTrain a = TensorTrain::ones(Shape{4, 5});
    EXPECT_THROW((void)tt_fft_convolve(a, a, 1e-10), ShapeError);
}

TEST(Interpolation, SameGridIsIdentity) {
    std::mt19937_64 rng(15);
    const TensorTrain P = oracle::random_tt({5, 6}, {3}, rng);
    const Grid g({{0, 1, 2, 3, 4}, {-1, 0, 1, 2, 3, 4}});
    EXPECT_LT(oracle::relative_error(oracle::expand(tt_interpolate(P, g, g)), oracle::expand(P)), 1e-15);
}

TEST(Interpolation, MatrixRowsAreConvexOrZero) {
    const std::vector<double> old_axis{0, 1, 2, 3}, new_axis{-0.5, 0.0, 0.25, 2.9, 3.0, 3.5};
    const Eigen::MatrixXd w = linear_interpolation_matrix(old_axis, new_axis);
    EXPECT_DOUBLE_EQ(w.row(0).sum(), 0.0);
    EXPECT_DOUBLE_EQ(w.row(5).sum(), 0.0);
    for (int r = 1; r < 5; ++r) EXPECT_NEAR(w.row(r).sum(), 1.0, 1e-15);
    EXPECT_NEAR(w(2, 0), 0.75, 1e-15);
    EXPECT_NEAR(w(2, 1), 0.25, 1e-15);
}

TEST(Interpolation, LinearFunctionsReproducedExactly) {
    // f(x, y) = 2x - y + 1 is rank two and multilinear interpolation is exact
    const Grid old_grid({{0, 0.5, 1, 1.5, 2}, {0, 1, 2, 3}});
    const Grid new_grid({{0.1, 0.4, 0.7, 1.0, 1.3, 1.6, 1.9}, {0.2, 1.2, 2.2}});
    std::vector<double> ax, ay, ones_x(5, 1.0), ones_y(4, 1.0);
    for (double x : old_grid.axis(0)) ax.push_back(2 * x + 1);
    for (double y : old_grid.axis(1)) ay.push_back(-y);
    const TensorTrain f = tt_add(tt_rank_one({ax, ones_y}), tt_rank_one({ones_x, ay}));
    const TensorTrain g = tt_interpolate(f, old_grid, new_grid);
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            EXPECT_NEAR(tt_eval(g, std::vector<std::size_t>{i, j}),
                        2 * new_grid.axis(0)[i] - new_grid.axis(1)[j] + 1, 1e-13);
}

TEST(Interpolation, MappedDiagonalAndRotatedMaps) {
    std::mt19937_64 rng(16);
    const Grid src({{-2, -1, 0, 1, 2}, {-2, -1, 0, 1, 2}});
    std::vector<double> ax{1, 2, 3, 2, 1}, ay{0.5, 1, 2, 1, 0.5};
    const TensorTrain P = tt_rank_one({ax, ay});
    const Grid dst({{-3, -1.5, 0, 1.5, 3}, {-3, -1.5, 0, 1.5, 3}});

    // diagonal map: values at (1.5 x, 1.5 y), so the destination hits source nodes
    const Eigen::Matrix2d D = 1.5 * Eigen::Matrix2d::Identity();
    const CrossResult rd = tt_interpolate_mapped(P, src, D, dst, CrossConfig{});
    EXPECT_LT(oracle::relative_error(oracle::expand(rd.tt), oracle::expand(P)), 1e-13);

    // 90 degree rotation permutes the nodes
    Eigen::Matrix2d R;
    R << 0, -1, 1, 0;
    const CrossResult rr = tt_interpolate_mapped(P, src, R, src, CrossConfig{.tol = 1e-10, .full_search_elements = 100});
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) {
            // point (x_i, y_j) = R (x', y') with x' = y_j, y' = -x_i
            const std::vector<std::size_t> src_idx{j, 4 - i};
            EXPECT_NEAR(tt_eval(rr.tt, std::vector<std::size_t>{i, j}), tt_eval(P, src_idx), 1e-8);
        }
}

TEST(Interpolation, MultilinearEvaluation) {
    const TensorTrain P = tt_rank_one({{0, 1, 2}, {1, 1}});
    EXPECT_NEAR(tt_eval_multilinear(P, std::vector<double>{0.5, 0.3}), 0.5, 1e-15);
    EXPECT_DOUBLE_EQ(tt_eval_multilinear(P, std::vector<double>{2.5, 0.0}), 0.0);
}
