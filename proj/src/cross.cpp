#include "ttpmf/cross.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/SVD>

#include "ttpmf/errors.hpp"

namespace ttpmf {

namespace {

using Fiber = std::vector<double>;

// Bookkeeping for one bond between core b and core b + 1.
//
// Rows of the bond superblock are (a, i) with a over the left index set of
// core b, id a * N_b + i. Columns are (j, c) with c over the right index set
// of core b + 1, id c * N_{b+1} + j.
struct Bond {
    struct Step {
        std::size_t row;
        std::vector<double> ell;  // L row of the pivot before the update
        double s;
    };
    std::vector<std::vector<double>> L;  // L = C * inverse(pivot block), per row
    std::vector<int> row_pivot;
    std::vector<int> col_pivot;
    std::vector<Step> steps;
    std::vector<std::vector<double>> cache;  // full-search entries, NaN when unknown
    std::size_t hint = 0;
    bool has_hint = false;
    bool converged = false;
    bool capped = false;
};

class GreedyCross {
public:
    GreedyCross(const BlackBoxTensor& bb, const CrossConfig& cfg)
        : bb_(bb), cfg_(cfg), shape_(bb.shape), d_(bb.shape.size()), rng_(cfg.rng_seed) {}

    CrossResult run();

private:
    double eval(std::span<const std::size_t> idx);
    double value(std::size_t b, std::size_t x, std::size_t y);
    double approx(std::size_t b, std::size_t x, std::size_t y) const;
    std::size_t rows(std::size_t b) const { return left_[b].size() * shape_[b]; }
    std::size_t cols(std::size_t b) const { return shape_[b + 1] * right_[b + 2].size(); }

    std::vector<MultiIndex> starting_indices();
    void initialise(const std::vector<MultiIndex>& samples);
    std::vector<double> eliminate(std::size_t b, std::size_t p, std::size_t q, const std::vector<double>& colvals);
    void visit(std::size_t b);
    bool visit_full(std::size_t b);
    double cached(std::size_t b, std::size_t x, std::size_t y);
    void add_pivot(std::size_t b, std::size_t p, std::size_t q, const std::vector<double>& colvals,
                   const std::vector<double>& rowvals);
    std::vector<double> replay(std::size_t b, std::size_t x) const;
    TensorTrain assemble() const;
    void probe(const TensorTrain& tt);

    const BlackBoxTensor& bb_;
    const CrossConfig& cfg_;
    Shape shape_;
    std::size_t d_;
    std::mt19937_64 rng_;
    CrossReport report_;
    double maxabs_ = 0.0;
    MultiIndex scratch_;
    MultiIndex worst_probe_;
    std::vector<MultiIndex> extra_hints_;

    std::vector<std::vector<MultiIndex>> left_;   // left_[k]: prefixes of modes 0..k-1
    std::vector<std::vector<MultiIndex>> right_;  // right_[k]: suffixes of modes k..d-1
    // fibers_[k][a][m][i] = A(left_[k][a], i, right_[k+1][m])
    std::vector<std::vector<std::vector<Fiber>>> fibers_;
    std::vector<Bond> bonds_;
};

std::size_t uniform_below(std::mt19937_64& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

double GreedyCross::eval(std::span<const std::size_t> idx) {
    const double v = bb_.evaluator(idx);
    ++report_.evaluator_calls;
    if (!std::isfinite(v)) {
        std::string where;
        for (auto i : idx) where += (where.empty() ? "" : ",") + std::to_string(i);
        throw NonFiniteValueError("greedy_cross: evaluator returned a non-finite value at (" + where + ")");
    }
    maxabs_ = std::max(maxabs_, std::abs(v));
    return v;
}

double GreedyCross::value(std::size_t b, std::size_t x, std::size_t y) {
    const Bond& bond = bonds_[b];
    const std::size_t nb = shape_[b];
    const std::size_t nn = shape_[b + 1];
    const std::size_t a = x / nb, i = x % nb, c = y / nn, j = y % nn;
    if (bond.row_pivot[x] >= 0) return fibers_[b + 1][static_cast<std::size_t>(bond.row_pivot[x])][c][j];
    if (bond.col_pivot[y] >= 0) return fibers_[b][a][static_cast<std::size_t>(bond.col_pivot[y])][i];
    scratch_.clear();
    scratch_.insert(scratch_.end(), left_[b][a].begin(), left_[b][a].end());
    scratch_.push_back(i);
    scratch_.push_back(j);
    scratch_.insert(scratch_.end(), right_[b + 2][c].begin(), right_[b + 2][c].end());
    return eval(scratch_);
}

double GreedyCross::approx(std::size_t b, std::size_t x, std::size_t y) const {
    const std::size_t nn = shape_[b + 1];
    const std::size_t c = y / nn, j = y % nn;
    const auto& l = bonds_[b].L[x];
    const auto& next = fibers_[b + 1];
    double s = 0.0;
    for (std::size_t m = 0; m < l.size(); ++m) s += l[m] * next[m][c][j];
    return s;
}

MultiIndex splice(const MultiIndex& head, const MultiIndex& tail, std::size_t cut) {
    MultiIndex out(head.begin(), head.begin() + static_cast<long>(cut));
    out.insert(out.end(), tail.begin() + static_cast<long>(cut), tail.end());
    return out;
}

std::vector<MultiIndex> GreedyCross::starting_indices() {
    std::vector<std::pair<double, MultiIndex>> seen;
    MultiIndex best(d_), idx(d_);
    double best_abs = -1.0;
    auto consider = [&](const MultiIndex& cand) {
        const double v = std::abs(eval(cand));
        seen.emplace_back(v, cand);
        if (v > best_abs) {
            best_abs = v;
            best = cand;
        }
    };
    for (std::size_t k = 0; k < d_; ++k) idx[k] = shape_[k] / 2;
    consider(idx);
    for (const auto& h : bb_.hints) {
        if (h.size() != d_) throw ShapeError("greedy_cross: hint index has the wrong length");
        for (std::size_t k = 0; k < d_; ++k)
            if (h[k] >= shape_[k]) throw IndexError("greedy_cross: hint index out of range");
        consider(h);
    }
    for (const auto& h : extra_hints_) consider(h);
    for (std::size_t s = 0; s < cfg_.initial_samples; ++s) {
        for (std::size_t k = 0; k < d_; ++k) idx[k] = uniform_below(rng_, shape_[k]);
        consider(idx);
    }
    // coordinate-wise maximisation from the best sample
    for (std::size_t pass = 0; pass < 4; ++pass) {
        const double before = best_abs;
        for (std::size_t k = 0; k < d_; ++k) {
            idx = best;
            const std::size_t start = best[k];
            for (std::size_t i = 0; i < shape_[k]; ++i) {
                if (i == start) continue;
                idx[k] = i;
                consider(idx);
            }
        }
        if (!(best_abs > before)) break;
    }

    std::vector<MultiIndex> chosen{best};
    if (cfg_.initial_rank <= 1 || best_abs <= 0.0) return chosen;
    std::stable_sort(seen.begin(), seen.end(), [](const auto& x, const auto& y) { return x.first > y.first; });

    // Accept a candidate only if every bond's pivot block stays well conditioned.
    std::vector<Eigen::MatrixXd> blocks(d_ - 1, Eigen::MatrixXd::Constant(1, 1, eval(best)));
    for (const auto& [v, cand] : seen) {
        if (chosen.size() >= cfg_.initial_rank) break;
        if (!(v > cfg_.tol * best_abs)) break;
        if (std::find(chosen.begin(), chosen.end(), cand) != chosen.end()) continue;
        const auto r = static_cast<Eigen::Index>(chosen.size());
        std::vector<Eigen::MatrixXd> grown(d_ - 1);
        bool ok = true;
        for (std::size_t b = 0; ok && b + 1 < d_; ++b) {
            Eigen::MatrixXd m(r + 1, r + 1);
            m.topLeftCorner(r, r) = blocks[b];
            for (Eigen::Index t = 0; t < r; ++t) {
                const auto& other = chosen[static_cast<std::size_t>(t)];
                m(t, r) = eval(splice(other, cand, b + 1));
                m(r, t) = eval(splice(cand, other, b + 1));
            }
            m(r, r) = eval(cand);
            const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
            const auto& sv = svd.singularValues();
            ok = sv(r) > 1e-8 * sv(0);
            grown[b] = std::move(m);
        }
        if (!ok) continue;
        chosen.push_back(cand);
        blocks = std::move(grown);
    }
    return chosen;
}

void GreedyCross::initialise(const std::vector<MultiIndex>& samples) {
    const std::size_t R = samples.size();
    left_.assign(d_, {});
    right_.assign(d_ + 1, {});
    left_[0].emplace_back();
    right_[d_].emplace_back();
    for (std::size_t k = 1; k < d_; ++k) {
        for (const auto& s : samples) {
            left_[k].emplace_back(s.begin(), s.begin() + static_cast<long>(k));
            right_[k].emplace_back(s.begin() + static_cast<long>(k), s.end());
        }
    }

    fibers_.assign(d_, {});
    for (std::size_t k = 0; k < d_; ++k) {
        fibers_[k].resize(left_[k].size());
        for (std::size_t a = 0; a < left_[k].size(); ++a) {
            for (const auto& suffix : right_[k + 1]) {
                Fiber f(shape_[k]);
                MultiIndex idx = left_[k][a];
                idx.push_back(0);
                idx.insert(idx.end(), suffix.begin(), suffix.end());
                for (std::size_t i = 0; i < shape_[k]; ++i) {
                    idx[k] = i;
                    f[i] = eval(idx);
                }
                fibers_[k][a].push_back(std::move(f));
            }
        }
    }

    bonds_.assign(d_ - 1, {});
    for (std::size_t b = 0; b + 1 < d_; ++b) {
        Bond& bond = bonds_[b];
        const std::size_t nb = shape_[b];
        const std::size_t nn = shape_[b + 1];
        bond.row_pivot.assign(rows(b), -1);
        bond.col_pivot.assign(cols(b), -1);
        bond.L.assign(rows(b), {});
        for (std::size_t m = 0; m < R; ++m) {
            const std::size_t a = b == 0 ? 0 : m;
            const std::size_t c = b + 2 < d_ ? m : 0;
            const std::size_t p = a * nb + samples[m][b];
            const std::size_t q = c * nn + samples[m][b + 1];
            std::vector<double> colvals(rows(b));
            for (std::size_t x = 0; x < colvals.size(); ++x) colvals[x] = fibers_[b][x / nb][m][x % nb];
            eliminate(b, p, q, colvals);
        }
    }
}

std::vector<double> GreedyCross::replay(std::size_t b, std::size_t x) const {
    const Bond& bond = bonds_[b];
    const std::size_t nb = shape_[b];
    const std::size_t a = x / nb, i = x % nb;
    const auto& fib = fibers_[b];
    std::vector<double> l;
    l.reserve(bond.steps.size());
    for (std::size_t k = 0; k < bond.steps.size(); ++k) {
        double e = fib[a][k][i];
        for (std::size_t m = 0; m < k; ++m) {
            const std::size_t pr = bond.steps[m].row;
            e -= l[m] * fib[pr / nb][k][pr % nb];
        }
        const auto& step = bond.steps[k];
        const double f = e / step.s;
        for (std::size_t m = 0; m < k; ++m) l[m] -= f * step.ell[m];
        l.push_back(f);
    }
    return l;
}

std::vector<double> GreedyCross::eliminate(std::size_t b, std::size_t p, std::size_t q,
                                           const std::vector<double>& colvals) {
    Bond& bond = bonds_[b];
    const std::size_t nrows = rows(b);
    const std::size_t m_new = bond.steps.size();
    std::vector<double> e(nrows);
    for (std::size_t x = 0; x < nrows; ++x) e[x] = colvals[x] - approx(b, x, q);
    const double s = e[p];
    std::vector<double> ell = bond.L[p];
    for (std::size_t x = 0; x < nrows; ++x) {
        auto& l = bond.L[x];
        const double f = e[x] / s;
        for (std::size_t m = 0; m < m_new; ++m) l[m] -= f * ell[m];
        l.push_back(f);
    }
    bond.steps.push_back({p, std::move(ell), s});
    bond.row_pivot[p] = static_cast<int>(m_new);
    bond.col_pivot[q] = static_cast<int>(m_new);
    return e;
}

void GreedyCross::add_pivot(std::size_t b, std::size_t p, std::size_t q, const std::vector<double>& colvals,
                            const std::vector<double>& rowvals) {
    Bond& bond = bonds_[b];
    const std::size_t nb = shape_[b];
    const std::size_t nn = shape_[b + 1];
    const std::size_t nrows = rows(b);
    const std::size_t ncols = cols(b);
    const std::vector<double> e = eliminate(b, p, q, colvals);

    // next hint: worst remaining row of the pre-update residual column
    double worst = -1.0;
    for (std::size_t x = 0; x < nrows; ++x) {
        if (bond.row_pivot[x] >= 0) continue;
        if (std::abs(e[x]) > worst) {
            worst = std::abs(e[x]);
            bond.hint = x;
        }
    }
    bond.has_hint = worst >= 0.0;

    const std::size_t ap = p / nb, ip = p % nb;
    const std::size_t cq = q / nn, jq = q % nn;
    MultiIndex prefix = left_[b][ap];
    prefix.push_back(ip);
    left_[b + 1].push_back(std::move(prefix));
    MultiIndex suffix{jq};
    suffix.insert(suffix.end(), right_[b + 2][cq].begin(), right_[b + 2][cq].end());
    right_[b + 1].push_back(std::move(suffix));

    // core b gains a right fiber, core b + 1 a left fiber
    for (std::size_t a = 0; a < left_[b].size(); ++a) {
        Fiber f(nb);
        for (std::size_t i = 0; i < nb; ++i) f[i] = colvals[a * nb + i];
        fibers_[b][a].push_back(std::move(f));
    }
    std::vector<Fiber> row(right_[b + 2].size(), Fiber(nn));
    for (std::size_t y = 0; y < ncols; ++y) row[y / nn][y % nn] = rowvals[y];
    fibers_[b + 1].push_back(std::move(row));

    if (b > 0) {
        Bond& prev = bonds_[b - 1];
        prev.col_pivot.resize(prev.col_pivot.size() + nb, -1);
        prev.converged = false;
    }
    if (b + 2 < d_) {
        Bond& next = bonds_[b + 1];
        const std::size_t first = next.L.size();
        next.row_pivot.resize(first + nn, -1);
        next.L.resize(first + nn);
        for (std::size_t x = first; x < first + nn; ++x) next.L[x] = replay(b + 1, x);
        next.converged = false;
    }
}

double GreedyCross::cached(std::size_t b, std::size_t x, std::size_t y) {
    auto& cache = bonds_[b].cache;
    if (cache.size() <= x) cache.resize(x + 1);
    auto& row = cache[x];
    if (row.size() <= y) row.resize(cols(b), std::numeric_limits<double>::quiet_NaN());
    if (std::isnan(row[y])) row[y] = value(b, x, y);
    return row[y];
}

// Exhaustive residual search; returns false once the bond has converged.
bool GreedyCross::visit_full(std::size_t b) {
    Bond& bond = bonds_[b];
    const std::size_t nrows = rows(b);
    const std::size_t ncols = cols(b);
    std::size_t p = 0, q = 0;
    double best = -1.0;
    for (std::size_t x = 0; x < nrows; ++x) {
        if (bond.row_pivot[x] >= 0) continue;
        for (std::size_t y = 0; y < ncols; ++y) {
            if (bond.col_pivot[y] >= 0) continue;
            const double res = std::abs(cached(b, x, y) - approx(b, x, y));
            if (res > best) {
                best = res;
                p = x;
                q = y;
            }
        }
    }
    if (!(best > cfg_.tol * maxabs_)) return false;
    std::vector<double> colvals(nrows), rowvals(ncols);
    for (std::size_t x = 0; x < nrows; ++x) colvals[x] = cached(b, x, q);
    for (std::size_t y = 0; y < ncols; ++y) rowvals[y] = cached(b, p, y);
    add_pivot(b, p, q, colvals, rowvals);
    return true;
}

void GreedyCross::visit(std::size_t b) {
    Bond& bond = bonds_[b];
    const std::size_t nrows = rows(b);
    const std::size_t ncols = cols(b);
    const std::size_t r = bond.steps.size();
    if (r >= std::min(nrows, ncols)) {
        bond.converged = true;
        return;
    }
    if (r >= cfg_.max_rank) {
        bond.capped = true;
        return;
    }
    if (nrows * ncols <= cfg_.full_search_elements) {
        bonds_[b].converged = !visit_full(b);
        return;
    }

    if (!bond.has_hint || bond.row_pivot[bond.hint] >= 0) {
        std::size_t x = uniform_below(rng_, nrows);
        while (bond.row_pivot[x] >= 0) x = (x + 1) % nrows;
        bond.hint = x;
        bond.has_hint = true;
    }
    const std::size_t h = bond.hint;
    std::vector<double> hint_vals(ncols);
    std::size_t q_hint = 0;
    double best_hint = -1.0;
    for (std::size_t y = 0; y < ncols; ++y) {
        hint_vals[y] = value(b, h, y);
        if (bond.col_pivot[y] >= 0) continue;
        const double res = std::abs(hint_vals[y] - approx(b, h, y));
        if (res > best_hint) {
            best_hint = res;
            q_hint = y;
        }
    }

    std::size_t q_rand = 0;
    double best_rand = -1.0;
    for (std::size_t k = 0; k < cfg_.random_candidates; ++k) {
        const std::size_t x = uniform_below(rng_, nrows);
        const std::size_t y = uniform_below(rng_, ncols);
        if (bond.row_pivot[x] >= 0 || bond.col_pivot[y] >= 0) continue;
        const double res = std::abs(value(b, x, y) - approx(b, x, y));
        if (res > best_rand) {
            best_rand = res;
            q_rand = y;
        }
    }

    const double threshold = cfg_.tol * maxabs_;
    if (std::max(best_hint, best_rand) <= threshold) {
        bond.converged = true;
        return;
    }

    const bool use_hint = best_hint >= best_rand;
    const std::size_t q = use_hint ? q_hint : q_rand;
    std::vector<double> colvals(nrows);
    std::size_t p = h;
    double best_col = -1.0;
    for (std::size_t x = 0; x < nrows; ++x) {
        colvals[x] = (use_hint && x == h) ? hint_vals[q] : value(b, x, q);
        if (!use_hint && bond.row_pivot[x] < 0) {
            const double res = std::abs(colvals[x] - approx(b, x, q));
            if (res > best_col) {
                best_col = res;
                p = x;
            }
        }
    }
    std::vector<double> rowvals;
    if (use_hint) {
        rowvals = std::move(hint_vals);
    } else {
        rowvals.resize(ncols);
        for (std::size_t y = 0; y < ncols; ++y) rowvals[y] = (y == q) ? colvals[p] : value(b, p, y);
    }
    const double s = colvals[p] - approx(b, p, q);
    if (!(std::abs(s) > threshold)) {
        bond.converged = true;
        return;
    }
    add_pivot(b, p, q, colvals, rowvals);
    bond.converged = false;
}

TensorTrain GreedyCross::assemble() const {
    std::vector<TtCore> cores;
    cores.reserve(d_);
    for (std::size_t k = 0; k + 1 < d_; ++k) {
        const Bond& bond = bonds_[k];
        const std::size_t left = left_[k].size();
        const std::size_t nk = shape_[k];
        const std::size_t right = bond.steps.size();
        TtCore g(left, nk, right);
        for (std::size_t a = 0; a < left; ++a)
            for (std::size_t i = 0; i < nk; ++i)
                for (std::size_t m = 0; m < right; ++m) g(a, i, m) = bond.L[a * nk + i][m];
        cores.push_back(std::move(g));
    }
    const std::size_t last = d_ - 1;
    TtCore g(left_[last].size(), shape_[last], 1);
    for (std::size_t a = 0; a < left_[last].size(); ++a)
        for (std::size_t i = 0; i < shape_[last]; ++i) g(a, i, 0) = fibers_[last][a][0][i];
    cores.push_back(std::move(g));
    return TensorTrain(std::move(cores));
}

// Half of the probes are uniform; the other half perturb two modes of a
// random fiber entry by up to two steps, which samples the region where the
// tensor is large even when its support is a small part of the index space.
void GreedyCross::probe(const TensorTrain& tt) {
    MultiIndex idx(d_);
    double max_diff = 0.0;
    double max_val = 0.0;
    worst_probe_.clear();
    for (std::size_t s = 0; s < cfg_.validation_count; ++s) {
        if (s % 2 == 0 || left_.empty()) {
            for (std::size_t k = 0; k < d_; ++k) idx[k] = uniform_below(rng_, shape_[k]);
        } else {
            const std::size_t k = uniform_below(rng_, d_);
            idx = left_[k][uniform_below(rng_, left_[k].size())];
            idx.push_back(uniform_below(rng_, shape_[k]));
            const auto& suffix = right_[k + 1][uniform_below(rng_, right_[k + 1].size())];
            idx.insert(idx.end(), suffix.begin(), suffix.end());
            for (int t = 0; t < 2; ++t) {
                const std::size_t mode = uniform_below(rng_, d_);
                const auto n = static_cast<long>(shape_[mode]);
                const long shifted = static_cast<long>(idx[mode]) + static_cast<long>(uniform_below(rng_, 5)) - 2;
                idx[mode] = static_cast<std::size_t>(std::clamp(shifted, 0L, n - 1));
            }
        }
        const double v = bb_.evaluator(idx);
        ++report_.probe_calls;
        if (!std::isfinite(v)) throw NonFiniteValueError("greedy_cross: evaluator returned a non-finite probe value");
        max_val = std::max(max_val, std::abs(v));
        const double diff = std::abs(v - tt_eval(tt, idx));
        if (diff > max_diff) {
            max_diff = diff;
            worst_probe_ = idx;
        }
    }
    const double scale = std::max(max_val, maxabs_);
    report_.achieved_error = scale > 0.0 ? max_diff / scale : max_diff;
}

CrossResult GreedyCross::run() {
    if (d_ == 1) {
        Fiber f(shape_[0]);
        MultiIndex idx(1);
        for (std::size_t i = 0; i < shape_[0]; ++i) {
            idx[0] = i;
            f[i] = eval(idx);
        }
        std::vector<TtCore> cores;
        cores.emplace_back(1, shape_[0], 1, std::move(f));
        report_.converged = true;
        return {TensorTrain(std::move(cores)), report_};
    }

    for (std::size_t attempt = 0;; ++attempt) {
        const std::vector<MultiIndex> start = starting_indices();
        if (maxabs_ == 0.0) {
            std::vector<TtCore> cores;
            for (auto n : shape_) cores.emplace_back(1, n, 1);
            TensorTrain zero(std::move(cores));
            report_.converged = true;
            probe(zero);
            return {std::move(zero), report_};
        }
        initialise(start);

        bool done = false;
        for (std::size_t sweep = 0; !done && sweep < cfg_.max_sweeps; ++sweep) {
            ++report_.sweeps;
            for (std::size_t b = 0; b + 1 < d_; ++b)
                if (!bonds_[b].converged && !bonds_[b].capped) visit(b);
            done = std::all_of(bonds_.begin(), bonds_.end(), [](const Bond& x) { return x.converged || x.capped; });
        }
        report_.rank_capped = std::any_of(bonds_.begin(), bonds_.end(), [](const Bond& x) { return x.capped; });
        report_.converged = std::all_of(bonds_.begin(), bonds_.end(), [](const Bond& x) { return x.converged; });

        TensorTrain tt = assemble();
        probe(tt);
        // A probe error well above tol after convergence means part of the
        // tensor was never seen; start again with the offending index among
        // the candidates.
        if (report_.achieved_error <= 10.0 * cfg_.tol || !report_.converged || attempt >= cfg_.restarts ||
            worst_probe_.empty())
            return {std::move(tt), report_};
        extra_hints_.push_back(worst_probe_);
        report_.restarts = attempt + 1;
    }
}

}  // namespace

CrossResult greedy_cross(const BlackBoxTensor& bb, const CrossConfig& cfg) {
    if (bb.shape.empty()) throw ShapeError("greedy_cross: empty shape");
    for (auto n : bb.shape)
        if (n == 0) throw ShapeError("greedy_cross: zero mode size");
    if (!bb.evaluator) throw std::invalid_argument("greedy_cross: missing evaluator");
    if (!(cfg.tol > 0.0) || cfg.max_rank < 1 || cfg.validation_count < 1 || cfg.max_sweeps < 1)
        throw std::invalid_argument("greedy_cross: invalid CrossConfig");
    return GreedyCross(bb, cfg).run();
}

}  // namespace ttpmf
