#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ttpmf/dense_tensor.hpp"

namespace ttpmf {

inline constexpr std::size_t kUnboundedRank = std::numeric_limits<std::size_t>::max();

/// Default element cap for tt_to_dense (2^27 doubles, 1 GiB).
inline constexpr std::size_t kDefaultDenseGuard = std::size_t{1} << 27;

/// One 3-mode TT core of size left x mode x right.
///
/// Storage is first-index fastest: element (a, i, b) lives at
/// a + left * (i + mode * b). The left unfolding ((left*mode) x right) and the
/// right unfolding (left x (mode*right)) are therefore plain column-major
/// views of the same buffer.
class TtCore {
public:
    using Matrix = Eigen::MatrixXd;
    using ConstMap = Eigen::Map<const Matrix>;
    using Map = Eigen::Map<Matrix>;
    using ConstSlice = Eigen::Map<const Matrix, 0, Eigen::OuterStride<>>;

    TtCore() = default;
    TtCore(std::size_t left, std::size_t mode, std::size_t right);
    TtCore(std::size_t left, std::size_t mode, std::size_t right, std::vector<double> data);

    [[nodiscard]] std::size_t left() const noexcept { return left_; }
    [[nodiscard]] std::size_t mode() const noexcept { return mode_; }
    [[nodiscard]] std::size_t right() const noexcept { return right_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

    [[nodiscard]] double operator()(std::size_t a, std::size_t i, std::size_t b) const noexcept {
        return data_[a + left_ * (i + mode_ * b)];
    }
    [[nodiscard]] double& operator()(std::size_t a, std::size_t i, std::size_t b) noexcept {
        return data_[a + left_ * (i + mode_ * b)];
    }

    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] std::span<double> data() noexcept { return data_; }

    [[nodiscard]] ConstMap left_unfolding() const {
        return {data_.data(), static_cast<Eigen::Index>(left_ * mode_), static_cast<Eigen::Index>(right_)};
    }
    [[nodiscard]] ConstMap right_unfolding() const {
        return {data_.data(), static_cast<Eigen::Index>(left_), static_cast<Eigen::Index>(mode_ * right_)};
    }
    /// The left x right matrix G(:, i, :).
    [[nodiscard]] ConstSlice slice(std::size_t i) const {
        return {data_.data() + left_ * i, static_cast<Eigen::Index>(left_),
                static_cast<Eigen::Index>(right_), Eigen::OuterStride<>(static_cast<Eigen::Index>(left_ * mode_))};
    }

    static TtCore from_left_unfolding(const Matrix& m, std::size_t left, std::size_t mode);
    static TtCore from_right_unfolding(const Matrix& m, std::size_t mode, std::size_t right);

private:
    std::size_t left_ = 0;
    std::size_t mode_ = 0;
    std::size_t right_ = 0;
    std::vector<double> data_;
};

/// d-mode tensor in tensor-train format: a chain of 3-mode cores with
/// boundary ranks R_0 = R_d = 1. Values are immutable after construction;
/// every operation below returns a new train.
class TensorTrain {
public:
    TensorTrain() = default;
    /// Validates the rank chain; throws ShapeError.
    explicit TensorTrain(std::vector<TtCore> cores);

    /// Rank-1 train of all ones.
    static TensorTrain ones(std::span<const std::size_t> shape);

    [[nodiscard]] std::size_t dims() const noexcept { return cores_.size(); }
    [[nodiscard]] Shape shape() const;
    /// R_0 .. R_d.
    [[nodiscard]] std::vector<std::size_t> ranks() const;
    [[nodiscard]] std::size_t max_rank() const;
    [[nodiscard]] const TtCore& core(std::size_t k) const { return cores_[k]; }
    [[nodiscard]] const std::vector<TtCore>& cores() const noexcept { return cores_; }

private:
    std::vector<TtCore> cores_;
};

/// Element evaluation by the chained core product. Throws IndexError.
double tt_eval(const TensorTrain& tt, std::span<const std::size_t> idx);

/// TT-SVD. The relative Frobenius tolerance is split as tol/sqrt(d-1) over
/// the d-1 unfoldings; with an unbounded max_rank the reconstruction error is
/// at most tol * ||t||_F. Singular values below 1e-14 of the largest are
/// always dropped.
TensorTrain tt_from_dense(const DenseTensor& t, double tol, std::size_t max_rank = kUnboundedRank);

/// Throws GuardError when the element count exceeds max_elements.
DenseTensor tt_to_dense(const TensorTrain& tt, std::size_t max_elements = kDefaultDenseGuard);

/// Right-to-left QR orthogonalisation followed by a left-to-right truncated
/// SVD sweep. Ranks never increase.
TensorTrain tt_round(const TensorTrain& tt, double tol, std::size_t max_rank = kUnboundedRank);

/// Elementwise product; output ranks are the products of the input ranks.
TensorTrain tt_hadamard(const TensorTrain& a, const TensorTrain& b);

/// Elementwise integer power (p >= 1) by repeated Hadamard products, unrounded.
TensorTrain tt_power(const TensorTrain& a, unsigned p);

double tt_dot(const TensorTrain& a, const TensorTrain& b);
double tt_sum(const TensorTrain& a);
double tt_norm(const TensorTrain& a);
TensorTrain tt_scale(const TensorTrain& a, double c);
/// Block concatenation of the cores; output ranks are the sums of the input
/// ranks (boundary ranks stay 1). No rounding.
TensorTrain tt_add(const TensorTrain& a, const TensorTrain& b);

/// Rank-1 train with element (i_1..i_d) = prod_l v_l(i_l).
TensorTrain tt_rank_one(const std::vector<std::vector<double>>& axis_vectors);

/// Sum of R_{l-1} * N_l * R_l * 8 over the cores.
std::size_t tt_storage_bytes(const TensorTrain& tt) noexcept;

/// One line per core: "core l: R_{l-1} x N_l x R_l" (l counted from 1).
std::string tt_describe(const TensorTrain& tt);
std::ostream& operator<<(std::ostream& os, const TensorTrain& tt);

}  // namespace ttpmf
