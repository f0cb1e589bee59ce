#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ttpmf/tensor_train.hpp"

namespace ttpmf {

/// A tensor known only through an element evaluator. The evaluator must be
/// deterministic and defined for every index within shape.
struct BlackBoxTensor {
    Shape shape;
    std::function<double(std::span<const std::size_t>)> evaluator;
    /// Optional indices where the tensor is expected to be large; tried
    /// before the random samples when looking for the first pivot.
    std::vector<MultiIndex> hints = {};
};

struct CrossConfig {
    double tol = 1e-6;
    std::size_t max_rank = 50;
    std::size_t max_sweeps = 200;
    std::uint64_t rng_seed = 1;
    std::size_t validation_count = 100;
    /// Random superblock entries tried per bond visit, in addition to the
    /// scanned hint row.
    std::size_t random_candidates = 3;
    /// Random full indices sampled to find the first pivot.
    std::size_t initial_samples = 32;
    /// Number of well-conditioned starting indices (largest first) used to
    /// seed every bond. More than one lets couplings between non-adjacent
    /// modes show up in the restricted superblocks.
    std::size_t initial_rank = 1;
    /// Bonds whose superblock has at most this many entries are searched
    /// exhaustively (entries are cached). Needed for targets whose support
    /// is a few grid cells, which random candidates miss.
    std::size_t full_search_elements = 0;
    /// Fresh starts allowed when the probe error exceeds 10 * tol after
    /// convergence; each restart adds the worst probe index to the starting
    /// candidates.
    std::size_t restarts = 0;
};

struct CrossReport {
    std::size_t evaluator_calls = 0;  ///< construction only
    std::size_t probe_calls = 0;
    std::size_t sweeps = 0;  ///< summed over restarts
    std::size_t restarts = 0;
    /// max |tt - f| over the validation probes, divided by the largest |f|
    /// seen during construction or probing.
    double achieved_error = 0.0;
    bool converged = false;
    bool rank_capped = false;
};

struct CrossResult {
    TensorTrain tt;
    CrossReport report;
};

/// Greedy restricted cross interpolation.
///
/// Every bond keeps nested left/right index sets; each sweep adds at most one
/// pivot per bond, chosen as the largest residual among one scanned row of
/// the bond's superblock and a few random entries. A bond stops once that
/// residual is below tol times the largest magnitude seen so far.
///
/// Throws ShapeError on an empty shape, std::invalid_argument on an invalid
/// config and NonFiniteValueError if the evaluator returns NaN or infinity.
CrossResult greedy_cross(const BlackBoxTensor& bb, const CrossConfig& cfg);

}  // namespace ttpmf
