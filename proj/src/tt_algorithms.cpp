#include "ttpmf/tt_algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "fft.hpp"
#include "ttpmf/errors.hpp"

namespace ttpmf {

namespace {

using detail::Complex;
using Matrix = Eigen::MatrixXd;

constexpr double kHullSlack = 1e-9;  // in index units

void require_odd(const Shape& shape, const char* op) {
    for (std::size_t k = 0; k < shape.size(); ++k)
        if (shape[k] % 2 == 0)
            throw ShapeError(std::string(op) + ": mode " + std::to_string(k + 1) + " has even size " +
                             std::to_string(shape[k]));
}

std::vector<Complex> to_spectrum(const TtCore& g) {
    std::vector<Complex> out(g.data().begin(), g.data().end());
    detail::dft_middle(out.data(), g.left(), g.mode(), g.right(), -1);
    return out;
}

// Interpolation weights of a fractional index u on an axis of n points:
// (lower index, weight of the upper neighbour). Returns false outside.
bool bracket(double u, std::size_t n, std::size_t& i0, double& t) {
    const double top = static_cast<double>(n - 1);
    if (u < -kHullSlack || u > top + kHullSlack) return false;
    if (n == 1) {
        i0 = 0;
        t = 0.0;
        return true;
    }
    const double uc = std::clamp(u, 0.0, top);
    i0 = std::min(static_cast<std::size_t>(std::floor(uc)), n - 2);
    t = std::clamp(uc - static_cast<double>(i0), 0.0, 1.0);
    return true;
}

}  // namespace

TensorTrain tt_einsum_tpm(const TensorTrain& T, const TensorTrain& P) {
    const std::size_t d = P.dims();
    if (T.dims() != 2 * d)
        throw ShapeError("tt_einsum_tpm: transition train has " + std::to_string(T.dims()) + " modes, expected " +
                         std::to_string(2 * d));
    for (std::size_t k = 0; k < d; ++k)
        if (T.core(d + k).mode() != P.core(k).mode())
            throw ShapeError("tt_einsum_tpm: mode " + std::to_string(d + k + 1) + " does not match the weights");

    Matrix Z = Matrix::Ones(1, 1);
    for (std::size_t j = d; j-- > 0;) {
        const TtCore& t = T.core(j + d);
        const TtCore& p = P.core(j);
        Matrix next = Matrix::Zero(static_cast<Eigen::Index>(t.left()), static_cast<Eigen::Index>(p.left()));
        for (std::size_t i = 0; i < t.mode(); ++i) next.noalias() += (t.slice(i) * Z) * p.slice(i).transpose();
        Z.swap(next);
    }

    std::vector<TtCore> cores(T.cores().begin(), T.cores().begin() + static_cast<long>(d - 1));
    const TtCore& last = T.core(d - 1);
    Matrix merged = last.left_unfolding() * Z;
    cores.push_back(TtCore::from_left_unfolding(merged, last.left(), last.mode()));
    return TensorTrain(std::move(cores));
}

TensorTrain tt_fft_convolve(const TensorTrain& kernel, const TensorTrain& P, double round_tol,
                            std::size_t max_rank) {
    if (kernel.shape() != P.shape()) throw ShapeError("tt_fft_convolve: shape mismatch");
    require_odd(P.shape(), "tt_fft_convolve");

    std::vector<TtCore> cores;
    cores.reserve(P.dims());
    for (std::size_t k = 0; k < P.dims(); ++k) {
        const TtCore& gk = kernel.core(k);
        const TtCore& gp = P.core(k);
        const std::size_t l1 = gk.left(), r1 = gk.right(), l2 = gp.left(), r2 = gp.right(), n = gk.mode();
        const std::vector<Complex> fk = to_spectrum(gk);
        const std::vector<Complex> fp = to_spectrum(gp);
        const std::size_t L = l1 * l2, R = r1 * r2;
        std::vector<Complex> prod(L * n * R);
        for (std::size_t b2 = 0; b2 < r2; ++b2)
            for (std::size_t b1 = 0; b1 < r1; ++b1)
                for (std::size_t f = 0; f < n; ++f)
                    for (std::size_t a2 = 0; a2 < l2; ++a2) {
                        const Complex vp = fp[a2 + l2 * (f + n * b2)];
                        for (std::size_t a1 = 0; a1 < l1; ++a1)
                            prod[(a1 + l1 * a2) + L * (f + n * (b1 + r1 * b2))] = fk[a1 + l1 * (f + n * b1)] * vp;
                    }
        detail::dft_middle(prod.data(), L, n, R, +1);
        // each fiber is a circular convolution of real fibers, so the
        // imaginary part is roundoff
        std::vector<double> real(prod.size());
        const double scale = 1.0 / static_cast<double>(n);
        for (std::size_t e = 0; e < prod.size(); ++e) real[e] = prod[e].real() * scale;
        cores.emplace_back(L, n, R, std::move(real));
    }
    return tt_round(TensorTrain(std::move(cores)), round_tol, max_rank);
}

DenseTensor fft_convolve_dense(const DenseTensor& kernel, const DenseTensor& P) {
    if (kernel.shape() != P.shape()) throw ShapeError("fft_convolve_dense: shape mismatch");
    require_odd(P.shape(), "fft_convolve_dense");
    std::vector<Complex> a(kernel.values().begin(), kernel.values().end());
    std::vector<Complex> b(P.values().begin(), P.values().end());
    detail::dft_dense(a.data(), P.shape(), -1);
    detail::dft_dense(b.data(), P.shape(), -1);
    for (std::size_t e = 0; e < a.size(); ++e) a[e] *= b[e];
    detail::dft_dense(a.data(), P.shape(), +1);
    std::vector<double> out(a.size());
    const double scale = 1.0 / static_cast<double>(a.size());
    for (std::size_t e = 0; e < a.size(); ++e) out[e] = a[e].real() * scale;
    return DenseTensor(P.shape(), std::move(out));
}

Matrix linear_interpolation_matrix(std::span<const double> old_axis, std::span<const double> new_axis) {
    if (old_axis.size() < 2) throw ShapeError("linear_interpolation_matrix: old axis needs 2 points");
    const std::size_t n_old = old_axis.size();
    const double lo = old_axis.front();
    const double step = (old_axis.back() - lo) / static_cast<double>(n_old - 1);
    Matrix w = Matrix::Zero(static_cast<Eigen::Index>(new_axis.size()), static_cast<Eigen::Index>(n_old));
    for (std::size_t r = 0; r < new_axis.size(); ++r) {
        std::size_t i0 = 0;
        double t = 0.0;
        if (!bracket((new_axis[r] - lo) / step, n_old, i0, t)) continue;
        const auto rr = static_cast<Eigen::Index>(r);
        w(rr, static_cast<Eigen::Index>(i0)) = 1.0 - t;
        if (t > 0.0) w(rr, static_cast<Eigen::Index>(i0 + 1)) = t;
    }
    return w;
}

TensorTrain tt_interpolate(const TensorTrain& P, const Grid& old_grid, const Grid& new_grid) {
    if (old_grid.dims() != P.dims() || new_grid.dims() != P.dims())
        throw ShapeError("tt_interpolate: dimension mismatch");
    if (old_grid.shape() != P.shape()) throw ShapeError("tt_interpolate: old grid does not match the train");
    std::vector<TtCore> cores;
    cores.reserve(P.dims());
    for (std::size_t k = 0; k < P.dims(); ++k) {
        const TtCore& g = P.core(k);
        const Matrix w = linear_interpolation_matrix(old_grid.axis(k), new_grid.axis(k));
        const std::size_t n_new = new_grid.axis(k).size();
        TtCore out(g.left(), n_new, g.right());
        for (std::size_t b = 0; b < g.right(); ++b)
            for (std::size_t i = 0; i < n_new; ++i)
                for (std::size_t j = 0; j < g.mode(); ++j) {
                    const double wij = w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                    if (wij == 0.0) continue;
                    for (std::size_t a = 0; a < g.left(); ++a) out(a, i, b) += wij * g(a, j, b);
                }
        cores.push_back(std::move(out));
    }
    return TensorTrain(std::move(cores));
}

double tt_eval_multilinear(const TensorTrain& tt, std::span<const double> u) {
    if (u.size() != tt.dims()) throw IndexError("tt_eval_multilinear: wrong index arity");
    std::vector<double> v{1.0}, w;
    for (std::size_t k = 0; k < tt.dims(); ++k) {
        const TtCore& g = tt.core(k);
        std::size_t i0 = 0;
        double t = 0.0;
        if (!bracket(u[k], g.mode(), i0, t)) return 0.0;
        w.assign(g.right(), 0.0);
        for (std::size_t b = 0; b < g.right(); ++b) {
            double s = 0.0;
            for (std::size_t a = 0; a < g.left(); ++a) {
                double x = (1.0 - t) * g(a, i0, b);
                if (t > 0.0) x += t * g(a, i0 + 1, b);
                s += v[a] * x;
            }
            w[b] = s;
        }
        v.swap(w);
    }
    return v[0];
}

CrossResult tt_interpolate_mapped(const TensorTrain& P, const Grid& source_grid, const Eigen::MatrixXd& map,
                                  const Grid& new_grid, const CrossConfig& cfg) {
    const std::size_t d = P.dims();
    const auto di = static_cast<Eigen::Index>(d);
    if (source_grid.dims() != d || new_grid.dims() != d || map.rows() != di || map.cols() != di)
        throw ShapeError("tt_interpolate_mapped: dimension mismatch");
    if (source_grid.shape() != P.shape()) throw ShapeError("tt_interpolate_mapped: source grid does not match the train");

    bool diagonal = true;
    for (Eigen::Index r = 0; r < di; ++r)
        for (Eigen::Index c = 0; c < di; ++c)
            if ((r == c && !(map(r, c) > 0.0)) || (r != c && map(r, c) != 0.0)) diagonal = false;
    if (diagonal) {
        std::vector<std::vector<double>> axes(d);
        for (std::size_t k = 0; k < d; ++k) {
            const double s = map(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
            for (double x : source_grid.axis(k)) axes[k].push_back(s * x);
        }
        CrossResult out{tt_interpolate(P, Grid(std::move(axes)), new_grid), {}};
        out.report.converged = true;
        return out;
    }

    Eigen::FullPivLU<Matrix> lu(map);
    if (!lu.isInvertible()) throw ConfigError("tt_interpolate_mapped: map is singular");
    const Matrix inv = lu.inverse();
    BlackBoxTensor bb;
    bb.shape = new_grid.shape();
    bb.evaluator = [&, inv](std::span<const std::size_t> idx) {
        const Eigen::VectorXd xi = inv * new_grid.point(idx);
        double u[16];
        std::vector<double> heap;
        double* up = u;
        if (d > 16) {
            heap.resize(d);
            up = heap.data();
        }
        for (std::size_t k = 0; k < d; ++k)
            up[k] = (xi(static_cast<Eigen::Index>(k)) - source_grid.lower(k)) / source_grid.step(k);
        return tt_eval_multilinear(P, std::span<const double>(up, d));
    };
    return greedy_cross(bb, cfg);
}

}  // namespace ttpmf
