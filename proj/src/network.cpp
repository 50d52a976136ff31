#include "rarity/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "rarity/parallel.hpp"

namespace rarity {

LogProbTable::LogProbTable(std::span<const double> values, std::size_t bins) {
    if (bins < 1) throw std::invalid_argument("log-probability table needs at least one bin");
    for (double v : values) half_range_ = std::max(half_range_, std::abs(v));
    std::vector<std::uint64_t> counts(bins, 0);
    for (double v : values) ++counts[symmetric_bin(v, half_range_, bins)];
    const double total = static_cast<double>(values.size());
    log_probs_.resize(bins);
    for (std::size_t i = 0; i < bins; ++i) {
        const double c = counts[i] > 0 ? static_cast<double>(counts[i]) : 0.5;
        log_probs_[i] = total > 0.0 ? std::log(c / total) : 0.0;
    }
}

LogProbTable::LogProbTable(double half_range, std::vector<double> log_probs)
    : half_range_(half_range), log_probs_(std::move(log_probs)) {
    if (log_probs_.empty()) throw std::invalid_argument("log-probability table needs at least one bin");
}

double LogProbTable::log_p(double x) const {
    return log_probs_[symmetric_bin(x, half_range_, log_probs_.size())];
}

std::vector<LogProbTable> build_log_prob_tables(std::span<const ProjectionField> fields,
                                                std::size_t bins) {
    std::vector<LogProbTable> tables;
    tables.reserve(fields.size());
    for (const auto& f : fields) tables.emplace_back(f.values, bins);
    return tables;
}

std::vector<double> build_external_field(std::span<const ProjectionField> fields,
                                         std::span<const LogProbTable> tables, double h0) {
    if (fields.size() != tables.size()) {
        throw std::invalid_argument("field and table counts differ");
    }
    if (fields.empty()) return {};
    const std::size_t n = fields.front().values.size();
    std::vector<double> h(n, 0.0);
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i].values.size() != n) throw std::invalid_argument("field sizes differ");
        for (std::size_t r = 0; r < n; ++r) h[r] += tables[i].log_p(fields[i].values[r]);
    }
    for (double& v : h) v *= -h0;
    return h;
}

SparseWeights::SparseWeights(std::size_t neurons, std::vector<Entry> entries) : neurons_(neurons) {
    for (auto& e : entries) {
        if (e.a == e.b) throw std::invalid_argument("self-connections are not allowed");
        if (e.a >= neurons || e.b >= neurons) throw std::invalid_argument("weight index out of range");
        if (e.weight > 0) throw std::invalid_argument("weights must be non-positive");
        if (e.a > e.b) std::swap(e.a, e.b);
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
        return x.a != y.a ? x.a < y.a : x.b < y.b;
    });
    for (const auto& e : entries) {
        if (!entries_.empty() && entries_.back().a == e.a && entries_.back().b == e.b) {
            entries_.back().weight += e.weight;
        } else {
            entries_.push_back(e);
        }
    }
    std::erase_if(entries_, [](const Entry& e) { return e.weight == 0; });

    std::vector<std::size_t> degree(neurons_, 0);
    for (const auto& e : entries_) {
        ++degree[e.a];
        ++degree[e.b];
    }
    row_ptr_.assign(neurons_ + 1, 0);
    for (std::size_t r = 0; r < neurons_; ++r) row_ptr_[r + 1] = row_ptr_[r] + degree[r];
    col_.resize(row_ptr_.back());
    val_.resize(row_ptr_.back());
    std::vector<std::size_t> fill(row_ptr_.begin(), row_ptr_.end() - 1);
    // Entries are sorted by (a, b), so every row ends up in ascending column order.
    for (const auto& e : entries_) {
        col_[fill[e.a]] = e.b;
        val_[fill[e.a]++] = e.weight;
    }
    for (const auto& e : entries_) {
        col_[fill[e.b]] = e.a;
        val_[fill[e.b]++] = e.weight;
    }
    for (std::size_t r = 0; r < neurons_; ++r) {
        std::vector<std::pair<std::uint32_t, double>> row;
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) row.emplace_back(col_[k], val_[k]);
        std::sort(row.begin(), row.end());
        for (std::size_t k = 0; k < row.size(); ++k) {
            col_[row_ptr_[r] + k] = row[k].first;
            val_[row_ptr_[r] + k] = row[k].second;
        }
    }
}

int SparseWeights::weight(std::size_t r, std::size_t r2) const {
    const auto cols = neighbours(r);
    const auto it = std::lower_bound(cols.begin(), cols.end(), static_cast<std::uint32_t>(r2));
    if (it == cols.end() || *it != r2) return 0;
    return static_cast<int>(val_[row_ptr_[r] + static_cast<std::size_t>(it - cols.begin())]);
}

std::vector<double> SparseWeights::row_sums() const {
    std::vector<double> sums(neurons_, 0.0);
    for (std::size_t r = 0; r < neurons_; ++r)
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) sums[r] += val_[k];
    return sums;
}

void SparseWeights::apply(std::span<const double> s, std::span<double> acc) const {
    for (std::size_t r = 0; r < neurons_; ++r) {
        double sum = 0.0;
        for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) sum += val_[k] * s[col_[k]];
        acc[r] += sum;
    }
}

namespace {

std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

struct Supra {
    double value;
    std::uint32_t index;
};

// Qualifying pairs of one pass; each unordered pair appears once.
std::vector<std::uint64_t> pass_pairs(const ProjectionField& field, const Shape& shape,
                                      const NetworkParams& params) {
    std::vector<std::uint64_t> keys;
    if (!(field.sigma > 0.0)) return keys;
    const double cut = params.a * field.sigma;
    std::vector<Supra> pos, neg;
    for (std::size_t i = 0; i < field.values.size(); ++i) {
        const double v = field.values[i];
        if (v > cut) pos.push_back({v, static_cast<std::uint32_t>(i)});
        if (v < -cut) neg.push_back({v, static_cast<std::uint32_t>(i)});
    }
    const bool windowed = std::isfinite(params.delta);
    for (auto* group : {&pos, &neg}) {
        auto& g = *group;
        std::sort(g.begin(), g.end(), [](const Supra& x, const Supra& y) {
            return x.value != y.value ? x.value < y.value : x.index < y.index;
        });
        for (std::size_t i = 0; i < g.size(); ++i) {
            const Origin ri = field.region.origin(g[i].index);
            for (std::size_t j = i + 1; j < g.size(); ++j) {
                if (windowed && !(g[j].value - g[i].value < params.delta)) break;
                if (!origins_disjoint(ri, field.region.origin(g[j].index), shape, params.rule)) continue;
                keys.push_back(pair_key(g[i].index, g[j].index));
            }
        }
    }
    return keys;
}

}  // namespace

SparseWeights build_weights(std::span<const ProjectionField> fields, const Shape& shape,
                            const NetworkParams& params) {
    if (fields.empty()) return {};
    const OriginRegion region = fields.front().region;
    for (const auto& f : fields) {
        if (!(f.region == region)) throw std::invalid_argument("fields do not share one origin region");
    }
    std::vector<std::vector<std::uint64_t>> per_pass(fields.size());
    parallel_for(fields.size(), params.threads,
                 [&](std::size_t i) { per_pass[i] = pass_pairs(fields[i], shape, params); });

    // Integer counts: the merge is order independent.
    std::unordered_map<std::uint64_t, int> counts;
    for (const auto& keys : per_pass)
        for (std::uint64_t k : keys) --counts[k];

    std::vector<SparseWeights::Entry> entries;
    entries.reserve(counts.size());
    for (const auto& [key, w] : counts) {
        entries.push_back({static_cast<std::uint32_t>(key >> 32),
                           static_cast<std::uint32_t>(key & 0xFFFFFFFFu), w});
    }

    if (params.weight_cap > 0) {
        // Keep a pair only if it ranks within the cap at both endpoints.
        std::vector<std::vector<std::pair<int, std::uint32_t>>> incident(region.count());
        for (const auto& e : entries) {
            incident[e.a].emplace_back(e.weight, e.b);
            incident[e.b].emplace_back(e.weight, e.a);
        }
        std::vector<int> cutoff_weight(region.count(), 0);
        std::vector<std::uint32_t> cutoff_partner(region.count(), 0);
        std::vector<bool> capped(region.count(), false);
        for (std::size_t r = 0; r < incident.size(); ++r) {
            auto& list = incident[r];
            if (list.size() <= params.weight_cap) continue;
            std::nth_element(list.begin(), list.begin() + (params.weight_cap - 1), list.end());
            cutoff_weight[r] = list[params.weight_cap - 1].first;
            cutoff_partner[r] = list[params.weight_cap - 1].second;
            capped[r] = true;
        }
        const auto keeps = [&](std::uint32_t r, int w, std::uint32_t partner) {
            if (!capped[r]) return true;
            return std::pair{w, partner} <= std::pair{cutoff_weight[r], cutoff_partner[r]};
        };
        std::erase_if(entries, [&](const SparseWeights::Entry& e) {
            return !(keeps(e.a, e.weight, e.b) && keeps(e.b, e.weight, e.a));
        });
    }
    return SparseWeights(region.count(), std::move(entries));
}

double activate(double u, Activation g) {
    if (g == Activation::Tanh) return 0.5 * (1.0 + std::tanh(0.5 * u));
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
}

NetworkState step_dynamics(const NetworkState& state, std::span<const double> h,
                           const SparseWeights& w, double beta, double threshold, Activation g) {
    const std::size_t n = state.s.size();
    if (h.size() != n || (w.neurons() != 0 && w.neurons() != n)) {
        throw std::invalid_argument("network dimensions are inconsistent");
    }
    NetworkState next;
    next.t = state.t + 1;
    next.s.assign(h.begin(), h.end());
    if (!w.empty()) w.apply(state.s, next.s);
    for (double& v : next.s) v = std::clamp(activate(beta * (v - threshold), g), 0.0, 1.0);
    return next;
}

std::string to_string(Convergence c) {
    switch (c) {
        case Convergence::Converged: return "converged";
        case Convergence::Cycle: return "cycle";
        case Convergence::MaxIters: return "max_iters";
    }
    return "unknown";
}

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

DynamicsResult run_dynamics(std::span<const double> h, const SparseWeights& w, double beta,
                            double threshold, int max_iters, double tol, Activation g) {
    DynamicsResult result;
    result.state.s.assign(h.size(), 1.0);
    std::vector<double> before;
    for (int it = 0; it < max_iters; ++it) {
        NetworkState next = step_dynamics(result.state, h, w, beta, threshold, g);
        const bool settled = max_abs_diff(next.s, result.state.s) < tol;
        const bool cycling = !settled && !before.empty() && max_abs_diff(next.s, before) < tol;
        before = std::move(result.state.s);
        result.state = std::move(next);
        if (settled) {
            result.status = Convergence::Converged;
            return result;
        }
        if (cycling) {
            // Report the persistently active part of the 2-cycle.
            for (std::size_t i = 0; i < before.size(); ++i)
                result.state.s[i] = std::min(result.state.s[i], before[i]);
            result.status = Convergence::Cycle;
            return result;
        }
    }
    result.status = Convergence::MaxIters;
    return result;
}

double active_fraction(std::span<const double> s) {
    if (s.empty()) return 0.0;
    const auto active = std::count_if(s.begin(), s.end(), [](double v) { return v > 0.5; });
    return static_cast<double>(active) / static_cast<double>(s.size());
}

ThresholdCalibration calibrate_threshold(std::span<const double> h, const SparseWeights& w,
                                         double beta, double f, int max_steps,
                                         const DynamicsOptions& dynamics) {
    if (!(f > 0.0 && f < 1.0)) throw std::invalid_argument("target fraction must lie in (0, 1)");
    if (h.empty()) throw std::invalid_argument("network has no neurons");
    const auto fraction_at = [&](double t) {
        return active_fraction(
            run_dynamics(h, w, beta, t, dynamics.max_iters, dynamics.tol, dynamics.activation).state.s);
    };
    const double n = static_cast<double>(h.size());
    const auto target_count = std::llround(f * n);
    const auto within = [&](double frac) { return std::abs(frac - f) <= 0.1 * f; };

    const auto rows = w.row_sums();
    double lo = *std::min_element(h.begin(), h.end()) +
                (rows.empty() ? 0.0 : std::min(0.0, *std::min_element(rows.begin(), rows.end())));
    double hi = *std::max_element(h.begin(), h.end());
    const double f_lo = fraction_at(lo);
    const double f_hi = fraction_at(hi);

    ThresholdCalibration best;
    const auto consider = [&](double t, double frac) {
        if (best.steps == 0 || std::abs(frac - f) < std::abs(best.fraction - f)) {
            best.threshold = t;
            best.fraction = frac;
        }
    };
    consider(lo, f_lo);
    best.steps = 1;
    consider(hi, f_hi);
    if (!(f_lo >= f && f_hi <= f)) {
        best.bracketed = false;
        best.within_tolerance = within(best.fraction);
        return best;
    }
    for (int step = 0; step < max_steps; ++step) {
        const double mid = 0.5 * (lo + hi);
        const double frac = fraction_at(mid);
        consider(mid, frac);
        ++best.steps;
        if (std::llround(frac * n) == target_count) break;
        if (frac > f) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best.within_tolerance = within(best.fraction);
    return best;
}

double calibrate_h0(std::span<const double> h_raw, const SparseWeights& w) {
    if (w.empty()) throw std::invalid_argument("no negative flux to balance: weight set is empty");
    double positive = 0.0;
    for (double v : h_raw) positive += v;
    if (!(positive > 0.0)) throw std::invalid_argument("external field has no positive flux");
    double negative = 0.0;
    for (double r : w.row_sums()) negative += std::abs(r);
    return negative / positive;
}

NetworkResult run_network(std::span<const ProjectionField> fields, const Shape& shape,
                          const NetworkParams& params) {
    if (fields.empty()) throw std::invalid_argument("network needs at least one projection field");
    NetworkResult result;
    result.region = fields.front().region;
    const auto tables = build_log_prob_tables(fields, params.bins);
    const auto h_raw = build_external_field(fields, tables, 1.0);
    result.weights = build_weights(fields, shape, params);
    if (params.h0) {
        result.h0 = *params.h0;
    } else {
        result.h0 = result.weights.empty() ? 1.0 : calibrate_h0(h_raw, result.weights);
    }
    if (!(result.h0 > 0.0)) throw std::invalid_argument("h0 must be positive");
    result.field = h_raw;
    for (double& v : result.field) v *= result.h0;

    if (params.beta) {
        result.beta = *params.beta;
    } else {
        const double sd = standard_deviation(result.field);
        result.beta = sd > 0.0 ? 10.0 / sd : 1.0;
    }
    if (!(result.beta > 0.0)) throw std::invalid_argument("beta must be positive");

    const DynamicsOptions dyn{params.max_iters, params.tol, params.activation};
    result.calibration = calibrate_threshold(result.field, result.weights, result.beta,
                                             params.target_fraction, params.calibration_steps, dyn);
    auto run = run_dynamics(result.field, result.weights, result.beta, result.calibration.threshold,
                            params.max_iters, params.tol, params.activation);
    result.activity = std::move(run.state.s);
    result.iterations = run.state.t;
    result.status = run.status;
    return result;
}

NetworkResult run_network(const Image& image, const Shape& shape, const ScoringParams& scoring,
                          const NetworkParams& params) {
    const auto fields = compute_fields(image, shape, scoring);
    return run_network(fields, shape, params);
}

}  // namespace rarity
