#include "ttpmf/tensor_train.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "ttpmf/errors.hpp"

namespace ttpmf {

namespace {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

constexpr double kRelativeSingularFloor = 1e-14;

Index as_index(std::size_t n) { return static_cast<Index>(n); }

// Smallest rank whose discarded tail has Frobenius norm <= delta.
std::size_t truncation_rank(const Eigen::VectorXd& s, double delta, std::size_t max_rank) {
    const auto n = static_cast<std::size_t>(s.size());
    if (n == 0) return 1;
    std::size_t numerical = 0;
    const double floor = s(0) * kRelativeSingularFloor;
    for (std::size_t j = 0; j < n; ++j)
        if (s(as_index(j)) > floor) ++numerical;

    std::size_t r = n;
    double tail = 0.0;
    const double budget = delta * delta;
    while (r > 1) {
        const double next = tail + s(as_index(r - 1)) * s(as_index(r - 1));
        if (next > budget) break;
        tail = next;
        --r;
    }
    r = std::min({r, numerical, max_rank});
    return std::max<std::size_t>(r, 1);
}

Eigen::BDCSVD<Matrix> thin_svd(const Matrix& m) {
    return Eigen::BDCSVD<Matrix>(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
}

void require_same_shape(const TensorTrain& a, const TensorTrain& b, const char* op) {
    if (a.shape() != b.shape()) throw ShapeError(std::string(op) + ": shape mismatch");
}

}  // namespace

TtCore::TtCore(std::size_t left, std::size_t mode, std::size_t right)
    : left_(left), mode_(mode), right_(right), data_(left * mode * right, 0.0) {}

TtCore::TtCore(std::size_t left, std::size_t mode, std::size_t right, std::vector<double> data)
    : left_(left), mode_(mode), right_(right), data_(std::move(data)) {
    if (data_.size() != left * mode * right) throw ShapeError("TtCore: data size does not match dimensions");
}

TtCore TtCore::from_left_unfolding(const Matrix& m, std::size_t left, std::size_t mode) {
    if (static_cast<std::size_t>(m.rows()) != left * mode)
        throw ShapeError("TtCore::from_left_unfolding: row count mismatch");
    const auto right = static_cast<std::size_t>(m.cols());
    return {left, mode, right, std::vector<double>(m.data(), m.data() + m.size())};
}

TtCore TtCore::from_right_unfolding(const Matrix& m, std::size_t mode, std::size_t right) {
    if (static_cast<std::size_t>(m.cols()) != mode * right)
        throw ShapeError("TtCore::from_right_unfolding: column count mismatch");
    const auto left = static_cast<std::size_t>(m.rows());
    return {left, mode, right, std::vector<double>(m.data(), m.data() + m.size())};
}

TensorTrain::TensorTrain(std::vector<TtCore> cores) : cores_(std::move(cores)) {
    if (cores_.empty()) throw ShapeError("TensorTrain: no cores");
    if (cores_.front().left() != 1 || cores_.back().right() != 1)
        throw ShapeError("TensorTrain: boundary ranks must be 1");
    for (std::size_t k = 0; k < cores_.size(); ++k) {
        if (cores_[k].mode() == 0 || cores_[k].left() == 0 || cores_[k].right() == 0)
            throw ShapeError("TensorTrain: empty core");
        if (k + 1 < cores_.size() && cores_[k].right() != cores_[k + 1].left())
            throw ShapeError("TensorTrain: rank mismatch between cores " + std::to_string(k + 1) +
                             " and " + std::to_string(k + 2));
    }
}

TensorTrain TensorTrain::ones(std::span<const std::size_t> shape) {
    std::vector<TtCore> cores;
    cores.reserve(shape.size());
    for (auto n : shape) cores.emplace_back(1, n, 1, std::vector<double>(n, 1.0));
    return TensorTrain(std::move(cores));
}

Shape TensorTrain::shape() const {
    Shape s;
    s.reserve(cores_.size());
    for (const auto& c : cores_) s.push_back(c.mode());
    return s;
}

std::vector<std::size_t> TensorTrain::ranks() const {
    std::vector<std::size_t> r;
    r.reserve(cores_.size() + 1);
    r.push_back(1);
    for (const auto& c : cores_) r.push_back(c.right());
    return r;
}

std::size_t TensorTrain::max_rank() const {
    std::size_t m = 1;
    for (const auto& c : cores_) m = std::max(m, c.right());
    return m;
}

double tt_eval(const TensorTrain& tt, std::span<const std::size_t> idx) {
    if (idx.size() != tt.dims()) throw IndexError("tt_eval: wrong index arity");
    std::vector<double> v{1.0};
    std::vector<double> w;
    for (std::size_t k = 0; k < tt.dims(); ++k) {
        const auto& g = tt.core(k);
        if (idx[k] >= g.mode()) throw IndexError("tt_eval: index out of bounds in mode " + std::to_string(k + 1));
        w.assign(g.right(), 0.0);
        for (std::size_t b = 0; b < g.right(); ++b) {
            double s = 0.0;
            for (std::size_t a = 0; a < g.left(); ++a) s += v[a] * g(a, idx[k], b);
            w[b] = s;
        }
        v.swap(w);
    }
    return v[0];
}

TensorTrain tt_from_dense(const DenseTensor& t, double tol, std::size_t max_rank) {
    if (t.size() == 0) throw ShapeError("tt_from_dense: empty tensor");
    if (tol < 0.0) throw std::invalid_argument("tt_from_dense: negative tolerance");
    const auto& shape = t.shape();
    const std::size_t d = shape.size();
    std::vector<TtCore> cores;
    cores.reserve(d);
    if (d == 1) {
        cores.emplace_back(1, shape[0], 1, std::vector<double>(t.values().begin(), t.values().end()));
        return TensorTrain(std::move(cores));
    }

    const double delta = tol / std::sqrt(static_cast<double>(d - 1)) * t.frobenius_norm();
    std::size_t remaining = t.size();
    std::size_t r_prev = 1;
    Matrix c = Eigen::Map<const Matrix>(t.values().data(), as_index(shape[0]), as_index(remaining / shape[0]));
    remaining /= shape[0];
    for (std::size_t k = 0; k + 1 < d; ++k) {
        // c is (r_prev * N_k) x remaining here
        auto svd = thin_svd(c);
        const std::size_t r = truncation_rank(svd.singularValues(), delta, max_rank);
        Matrix u = svd.matrixU().leftCols(as_index(r));
        cores.push_back(TtCore::from_left_unfolding(u, r_prev, shape[k]));
        Matrix next = svd.singularValues().head(as_index(r)).asDiagonal() *
                      svd.matrixV().leftCols(as_index(r)).transpose();
        // r x (N_{k+1} * rest) has the same buffer as (r * N_{k+1}) x rest
        const std::size_t n_next = shape[k + 1];
        remaining /= n_next;
        c = Eigen::Map<Matrix>(next.data(), as_index(r * n_next), as_index(remaining));
        r_prev = r;
    }
    cores.push_back(TtCore::from_left_unfolding(c, r_prev, shape[d - 1]));
    return TensorTrain(std::move(cores));
}

DenseTensor tt_to_dense(const TensorTrain& tt, std::size_t max_elements) {
    const Shape shape = tt.shape();
    if (element_count_estimate(shape) > static_cast<double>(max_elements))
        throw GuardError("tt_to_dense: " + std::to_string(element_count_estimate(shape)) +
                         " elements exceed the guard of " + std::to_string(max_elements));
    Matrix acc = tt.core(0).left_unfolding();  // N_1 x R_1
    std::size_t rows = shape[0];
    for (std::size_t k = 1; k < tt.dims(); ++k) {
        const auto& g = tt.core(k);
        Matrix next = acc * g.right_unfolding();  // rows x (N_k R_k)
        rows *= g.mode();
        acc = Eigen::Map<Matrix>(next.data(), as_index(rows), as_index(g.right()));
    }
    return DenseTensor(shape, std::vector<double>(acc.data(), acc.data() + acc.size()));
}

TensorTrain tt_round(const TensorTrain& tt, double tol, std::size_t max_rank) {
    if (tol < 0.0) throw std::invalid_argument("tt_round: negative tolerance");
    const std::size_t d = tt.dims();
    if (d == 1) return tt;
    std::vector<TtCore> cores = tt.cores();

    for (std::size_t k = d - 1; k > 0; --k) {
        const auto& g = cores[k];
        Matrix mt = g.right_unfolding().transpose();  // (N_k R_k) x R_{k-1}
        const Index q = std::min(mt.rows(), mt.cols());
        Eigen::HouseholderQR<Matrix> qr(mt);
        Matrix qthin = qr.householderQ() * Matrix::Identity(mt.rows(), q);
        Matrix rfac = qr.matrixQR().topRows(q).triangularView<Eigen::Upper>();
        Matrix newg = qthin.transpose();  // q x (N_k R_k)
        const std::size_t mode = g.mode();
        const std::size_t right = g.right();
        cores[k] = TtCore::from_right_unfolding(newg, mode, right);
        const auto& prev = cores[k - 1];
        Matrix merged = prev.left_unfolding() * rfac.transpose();
        cores[k - 1] = TtCore::from_left_unfolding(merged, prev.left(), prev.mode());
    }

    const double norm = Eigen::Map<const Eigen::VectorXd>(cores[0].data().data(), as_index(cores[0].size())).norm();
    const double delta = tol / std::sqrt(static_cast<double>(d - 1)) * norm;

    for (std::size_t k = 0; k + 1 < d; ++k) {
        const auto& g = cores[k];
        auto svd = thin_svd(Matrix(g.left_unfolding()));
        const std::size_t r = truncation_rank(svd.singularValues(), delta, max_rank);
        Matrix u = svd.matrixU().leftCols(as_index(r));
        Matrix sv = svd.singularValues().head(as_index(r)).asDiagonal() *
                    svd.matrixV().leftCols(as_index(r)).transpose();
        const std::size_t left = g.left();
        const std::size_t mode = g.mode();
        cores[k] = TtCore::from_left_unfolding(u, left, mode);
        const auto& next = cores[k + 1];
        Matrix merged = sv * next.right_unfolding();
        cores[k + 1] = TtCore::from_right_unfolding(merged, next.mode(), next.right());
    }
    return TensorTrain(std::move(cores));
}

TensorTrain tt_hadamard(const TensorTrain& a, const TensorTrain& b) {
    require_same_shape(a, b, "tt_hadamard");
    std::vector<TtCore> cores;
    cores.reserve(a.dims());
    for (std::size_t k = 0; k < a.dims(); ++k) {
        const auto& ga = a.core(k);
        const auto& gb = b.core(k);
        const std::size_t la = ga.left(), lb = gb.left(), ra = ga.right(), rb = gb.right();
        TtCore g(la * lb, ga.mode(), ra * rb);
        for (std::size_t b2 = 0; b2 < rb; ++b2)
            for (std::size_t b1 = 0; b1 < ra; ++b1)
                for (std::size_t i = 0; i < ga.mode(); ++i)
                    for (std::size_t a2 = 0; a2 < lb; ++a2) {
                        const double vb = gb(a2, i, b2);
                        for (std::size_t a1 = 0; a1 < la; ++a1)
                            g(a1 + la * a2, i, b1 + ra * b2) = ga(a1, i, b1) * vb;
                    }
        cores.push_back(std::move(g));
    }
    return TensorTrain(std::move(cores));
}

TensorTrain tt_power(const TensorTrain& a, unsigned p) {
    if (p == 0) throw std::invalid_argument("tt_power: exponent must be >= 1");
    TensorTrain out = a;
    for (unsigned k = 1; k < p; ++k) out = tt_hadamard(out, a);
    return out;
}

double tt_dot(const TensorTrain& a, const TensorTrain& b) {
    require_same_shape(a, b, "tt_dot");
    Matrix w = Matrix::Ones(1, 1);
    for (std::size_t k = 0; k < a.dims(); ++k) {
        const auto& ga = a.core(k);
        const auto& gb = b.core(k);
        Matrix next = Matrix::Zero(as_index(ga.right()), as_index(gb.right()));
        for (std::size_t i = 0; i < ga.mode(); ++i) next.noalias() += ga.slice(i).transpose() * w * gb.slice(i);
        w.swap(next);
    }
    return w(0, 0);
}

double tt_sum(const TensorTrain& a) {
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Ones(1);
    for (const auto& g : a.cores()) {
        Matrix s = Matrix::Zero(as_index(g.left()), as_index(g.right()));
        for (std::size_t i = 0; i < g.mode(); ++i) s += g.slice(i);
        Eigen::RowVectorXd next = v * s;
        v.swap(next);
    }
    return v(0);
}

double tt_norm(const TensorTrain& a) { return std::sqrt(std::max(0.0, tt_dot(a, a))); }

TensorTrain tt_scale(const TensorTrain& a, double c) {
    std::vector<TtCore> cores = a.cores();
    for (double& v : cores[0].data()) v *= c;
    return TensorTrain(std::move(cores));
}

TensorTrain tt_add(const TensorTrain& a, const TensorTrain& b) {
    require_same_shape(a, b, "tt_add");
    const std::size_t d = a.dims();
    std::vector<TtCore> cores;
    cores.reserve(d);
    for (std::size_t k = 0; k < d; ++k) {
        const auto& ga = a.core(k);
        const auto& gb = b.core(k);
        const bool first = (k == 0);
        const bool last = (k + 1 == d);
        const std::size_t left = first ? 1 : ga.left() + gb.left();
        const std::size_t right = last ? 1 : ga.right() + gb.right();
        TtCore g(left, ga.mode(), right);
        const std::size_t a_off_l = 0, a_off_r = 0;
        const std::size_t b_off_l = first ? 0 : ga.left();
        const std::size_t b_off_r = last ? 0 : ga.right();
        for (std::size_t i = 0; i < ga.mode(); ++i) {
            for (std::size_t r = 0; r < ga.right(); ++r)
                for (std::size_t l = 0; l < ga.left(); ++l) g(a_off_l + l, i, a_off_r + r) += ga(l, i, r);
            for (std::size_t r = 0; r < gb.right(); ++r)
                for (std::size_t l = 0; l < gb.left(); ++l) g(b_off_l + l, i, b_off_r + r) += gb(l, i, r);
        }
        cores.push_back(std::move(g));
    }
    return TensorTrain(std::move(cores));
}

TensorTrain tt_rank_one(const std::vector<std::vector<double>>& axis_vectors) {
    if (axis_vectors.empty()) throw ShapeError("tt_rank_one: no axis vectors");
    std::vector<TtCore> cores;
    cores.reserve(axis_vectors.size());
    for (const auto& v : axis_vectors) {
        if (v.empty()) throw ShapeError("tt_rank_one: empty axis vector");
        cores.emplace_back(1, v.size(), 1, v);
    }
    return TensorTrain(std::move(cores));
}

std::size_t tt_storage_bytes(const TensorTrain& tt) noexcept {
    std::size_t n = 0;
    for (const auto& g : tt.cores()) n += g.left() * g.mode() * g.right();
    return n * sizeof(double);
}

std::string tt_describe(const TensorTrain& tt) {
    std::ostringstream os;
    os << tt;
    return os.str();
}

std::ostream& operator<<(std::ostream& os, const TensorTrain& tt) {
    for (std::size_t k = 0; k < tt.dims(); ++k) {
        const auto& g = tt.core(k);
        os << "core " << k + 1 << ": " << g.left() << " x " << g.mode() << " x " << g.right() << '\n';
    }
    return os;
}

}  // namespace ttpmf
