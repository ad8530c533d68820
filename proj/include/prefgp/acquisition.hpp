#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <utility>
#include <vector>

#include "gp.hpp"
#include "normal.hpp"
#include "random.hpp"

namespace prefgp {

/// Finite candidate (coverage) set the acquisition is restricted to, plus the
/// ids already shown to the user.
class CandidateSet {
public:
    CandidateSet() = default;
    explicit CandidateSet(std::vector<std::pair<ItemId, PolicyValue>> items) : items_(std::move(items)) {
        if (items_.empty()) throw InputError("candidate set is empty");
        std::set<ItemId> ids;
        for (const auto& [id, v] : items_) {
            if (id.is_virtual()) throw InputError("candidate ids must be non-negative");
            if (!ids.insert(id).second) throw InputError("duplicate candidate id " + std::to_string(id.value));
            if (v.dims() != items_.front().second.dims()) throw InputError("candidate dimension mismatch");
        }
    }

    const std::vector<std::pair<ItemId, PolicyValue>>& items() const { return items_; }
    const std::set<ItemId>& queried() const { return queried_; }
    std::size_t size() const { return items_.size(); }
    std::size_t unqueried_count() const { return items_.size() - queried_.size(); }
    Eigen::Index dims() const { return items_.front().second.dims(); }

    bool is_queried(ItemId id) const { return queried_.contains(id); }
    const PolicyValue& value(ItemId id) const {
        for (const auto& [cid, v] : items_)
            if (cid == id) return v;
        throw InputError("unknown candidate " + std::to_string(id.value));
    }
    void mark_queried(ItemId id) {
        value(id);
        queried_.insert(id);
    }

    bool operator==(const CandidateSet&) const = default;

private:
    std::vector<std::pair<ItemId, PolicyValue>> items_;
    std::set<ItemId> queried_;
};

/// Closed-form expected improvement over best_mean given predictive mean and
/// standard deviation.
inline double expected_improvement(double mean, double stddev, double best_mean) {
    const double diff = mean - best_mean;
    if (!(stddev > 0.0)) return std::max(diff, 0.0);
    const double z = diff / stddev;
    return std::max(diff * normal::cdf(z) + stddev * normal::pdf(z), 0.0);
}

inline double expected_improvement(const GPState& gp, const PolicyValue& x, double best_mean) {
    const auto p = predict(gp, x);
    return expected_improvement(p.mean, std::sqrt(p.variance), best_mean);
}

/// Highest posterior mean over queried candidates, with its id. Ties go to
/// the lower id.
inline std::pair<ItemId, double> best_queried(const GPState& gp, const CandidateSet& cands) {
    std::optional<std::pair<ItemId, double>> best;
    for (const auto& [id, v] : cands.items()) {
        if (!cands.is_queried(id)) continue;
        const double mu = predict(gp, v).mean;
        if (!best || mu > best->second || (mu == best->second && id < best->first)) best = {id, mu};
    }
    if (!best) throw StateError("no queried candidates");
    return *best;
}

/// Next candidate to show. Uniform over the unqueried candidates while the
/// GP has seen no comparisons; otherwise the expected-improvement argmax
/// (lowest id on ties).
inline ItemId select_next(const GPState& gp, const CandidateSet& cands, Rng& rng) {
    std::vector<ItemId> open;
    for (const auto& [id, v] : cands.items())
        if (!cands.is_queried(id)) open.push_back(id);
    if (open.empty()) throw ExhaustedError("all candidates have been queried");
    std::ranges::sort(open);

    if (!gp.fitted() || gp.comparison_count() == 0) return open[rng.below(open.size())];

    const double incumbent = best_queried(gp, cands).second;
    ItemId best_id = open.front();
    double best_ei = -1.0;
    for (const auto& id : open) {
        const double ei = expected_improvement(gp, cands.value(id), incumbent);
        if (ei > best_ei) {
            best_ei = ei;
            best_id = id;
        }
    }
    return best_id;
}

}  // namespace prefgp
