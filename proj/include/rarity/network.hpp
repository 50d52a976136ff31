#pragma once

// Context-relative refinement: a symmetric, sparse, inhibitory network
// whose neurons are block origins. Each neuron receives a positive field
// from the improbability of its projections and negative feedback from
// distant origins that project similarly.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rarity/core.hpp"
#include "rarity/projection.hpp"

namespace rarity {

enum class Activation {
    Logistic,  ///< 1 / (1 + e^-u)
    Tanh,      ///< (1 + tanh(u / 2)) / 2, the logistic written through tanh
};

struct NetworkParams {
    /// Field/coupling balance. Unset: chosen so positive and negative
    /// fluxes match at s = 1 (falls back to 1 when there are no weights).
    std::optional<double> h0;
    /// Similarity window on projection values; infinity drops the test.
    double delta = std::numeric_limits<double>::infinity();
    double a = 3.0;
    /// Inverse temperature. Unset: 10 / stddev(h).
    std::optional<double> beta;
    double target_fraction = 0.02;
    int max_iters = 50;           ///< dynamics iterations per run
    int calibration_steps = 40;   ///< bisection steps for the threshold
    double tol = 1e-4;
    std::size_t weight_cap = 64;  ///< max partners per origin, 0 = unlimited
    std::size_t bins = 257;       ///< histogram bins for log p(x)
    Activation activation = Activation::Logistic;
    SeparationRule rule = SeparationRule::Chebyshev;
    unsigned threads = 1;
};

/// Binned empirical log-probability of one pass's projection values.
class LogProbTable {
public:
    /// Histogram of `values` with `bins` symmetric bins over +-max|value|.
    /// Empty bins get log(0.5 / total).
    LogProbTable(std::span<const double> values, std::size_t bins);
    /// Explicit table.
    LogProbTable(double half_range, std::vector<double> log_probs);

    double log_p(double x) const;
    std::size_t bins() const { return log_probs_.size(); }
    double half_range() const { return half_range_; }

private:
    double half_range_ = 0.0;
    std::vector<double> log_probs_;
};

std::vector<LogProbTable> build_log_prob_tables(std::span<const ProjectionField> fields,
                                                std::size_t bins = 257);

/// h(r) = -h0 * sum_i log p_i(C_i(r)).
std::vector<double> build_external_field(std::span<const ProjectionField> fields,
                                         std::span<const LogProbTable> tables, double h0);

/// Symmetric sparse non-positive integer weights, one entry per unordered
/// pair (a < b).
class SparseWeights {
public:
    struct Entry {
        std::uint32_t a = 0;
        std::uint32_t b = 0;
        int weight = 0;
    };

    SparseWeights() = default;
    /// Entries need not be sorted; duplicate pairs are summed.
    SparseWeights(std::size_t neurons, std::vector<Entry> entries);

    std::size_t neurons() const { return neurons_; }
    std::size_t pairs() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    std::span<const Entry> entries() const { return entries_; }

    /// w(r, r'); 0 when absent.
    int weight(std::size_t r, std::size_t r2) const;

    /// Sum over r' of w(r, r').
    std::vector<double> row_sums() const;

    /// acc[r] += sum_r' w(r, r') s[r'].
    void apply(std::span<const double> s, std::span<double> acc) const;

    std::span<const std::uint32_t> neighbours(std::size_t r) const {
        return {col_.data() + row_ptr_[r], col_.data() + row_ptr_[r + 1]};
    }

private:
    std::size_t neurons_ = 0;
    std::vector<Entry> entries_;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::uint32_t> col_;
    std::vector<double> val_;
};

/// For every pass and every unordered disjoint pair whose projections both
/// exceed a * sigma_i with the same sign and differ by less than delta,
/// decrements w(r, r') by one.
SparseWeights build_weights(std::span<const ProjectionField> fields, const Shape& shape,
                            const NetworkParams& params);

struct NetworkState {
    std::vector<double> s;
    int t = 0;
};

double activate(double u, Activation g);

/// Synchronous update s_r <- g(beta * (h_r + sum_r' w_rr' s_r' - T)).
NetworkState step_dynamics(const NetworkState& state, std::span<const double> h,
                           const SparseWeights& w, double beta, double threshold,
                           Activation g = Activation::Logistic);

enum class Convergence { Converged, Cycle, MaxIters };
std::string to_string(Convergence c);

struct DynamicsResult {
    NetworkState state;
    Convergence status = Convergence::MaxIters;
};

/// Iterates from s = 1 until max |s(t+1) - s(t)| < tol, a 2-cycle is
/// detected, or max_iters steps have run.
DynamicsResult run_dynamics(std::span<const double> h, const SparseWeights& w, double beta,
                            double threshold, int max_iters, double tol,
                            Activation g = Activation::Logistic);

/// Fraction of neurons with s > 0.5.
double active_fraction(std::span<const double> s);

struct ThresholdCalibration {
    double threshold = 0.0;
    double fraction = 0.0;
    bool within_tolerance = false;  ///< |fraction - f| <= 0.1 f
    bool bracketed = true;          ///< false: endpoints do not straddle f
    int steps = 0;
};

struct DynamicsOptions {
    int max_iters = 50;
    double tol = 1e-4;
    Activation activation = Activation::Logistic;
};

/// Bisection on T over [min h + min row sum, max h] for an active fraction
/// of f after running the dynamics. Throws std::invalid_argument unless
/// 0 < f < 1.
ThresholdCalibration calibrate_threshold(std::span<const double> h, const SparseWeights& w,
                                         double beta, double f, int max_steps,
                                         const DynamicsOptions& dynamics = {});

/// h0 such that sum_r h0 * h_raw(r) equals sum_r |sum_r' w_rr'| at s = 1.
/// Throws std::invalid_argument when w is empty or sum h_raw <= 0.
double calibrate_h0(std::span<const double> h_raw, const SparseWeights& w);

struct NetworkResult {
    OriginRegion region{0, 0};
    std::vector<double> activity;
    std::vector<double> field;  ///< h after h0 scaling
    SparseWeights weights;
    double h0 = 1.0;
    double beta = 1.0;
    ThresholdCalibration calibration;
    Convergence status = Convergence::MaxIters;
    int iterations = 0;
};

/// Builds tables, field and weights from precomputed projection fields,
/// calibrates h0 and T, and runs the dynamics from s = 1.
NetworkResult run_network(std::span<const ProjectionField> fields, const Shape& shape,
                          const NetworkParams& params);

/// Convenience overload computing the fields with `scoring` first.
NetworkResult run_network(const Image& image, const Shape& shape, const ScoringParams& scoring,
                          const NetworkParams& params);

}  // namespace rarity
