#pragma once

#include <limits>
#include <string>
#include <vector>

#include "gp.hpp"
#include "preferences.hpp"

namespace prefgp {

enum class VirtualMode { off, first_k, always };

/// Use of monotone-utility knowledge: a linear prior mean for the first
/// queries and virtual comparisons against the nadir and ideal points.
struct MonotonicityConfig {
    static constexpr std::size_t kAlwaysLinear = std::numeric_limits<std::size_t>::max();

    std::size_t prior_switch_after = 5;  // 0 = never linear; kAlwaysLinear = never switch
    VirtualMode virtual_mode = VirtualMode::always;
    std::size_t virtual_k = 0;  // only read for first_k
    PolicyValue nadir;
    PolicyValue ideal;

    static MonotonicityConfig hypercube(Eigen::Index d, std::size_t switch_after = 5,
                                        VirtualMode mode = VirtualMode::always, std::size_t k = 0) {
        return {switch_after, mode, k, PolicyValue::constant(d, 0.0), PolicyValue::constant(d, 1.0)};
    }

    void validate() const {
        if (nadir.dims() != ideal.dims()) throw InputError("nadir and ideal dimensions differ");
        if (!(nadir.values().array() < ideal.values().array()).all())
            throw InputError("nadir must be strictly below ideal in every objective");
    }
    bool operator==(const MonotonicityConfig&) const = default;
};

/// Componentwise extrema of a point set, for use as nadir/ideal on supplied
/// data. Degenerate objectives are widened to keep nadir < ideal.
inline std::pair<PolicyValue, PolicyValue> componentwise_extrema(std::span<const PolicyValue> points) {
    if (points.empty()) throw InputError("extrema of an empty set");
    Vector lo = points.front().values(), hi = lo;
    for (const auto& p : points) {
        lo = lo.cwiseMin(p.values());
        hi = hi.cwiseMax(p.values());
    }
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
        if (lo[i] < hi[i]) continue;
        lo[i] = std::max(0.0, lo[i] - 0.5);
        hi[i] = std::min(1.0, hi[i] + 0.5);
    }
    return {PolicyValue(lo), PolicyValue(hi)};
}

/// Prior mean to use when fitting after the given (zero-based) query.
inline MeanConfig prior_mean_kind(std::size_t query_index, const MonotonicityConfig& cfg) {
    return {query_index < cfg.prior_switch_after ? MeanKind::linear : MeanKind::zero, std::nullopt};
}

/// Equal-weight linear prior mean: the component average.
inline double linear_prior_mean(const PolicyValue& v) { return v.values().mean(); }

inline bool virtual_active(std::size_t query_index, const MonotonicityConfig& cfg) {
    switch (cfg.virtual_mode) {
        case VirtualMode::off: return false;
        case VirtualMode::first_k: return query_index < cfg.virtual_k;
        case VirtualMode::always: return true;
    }
    return false;
}

/// {item > nadir, ideal > item}, when virtual comparisons are active.
inline std::vector<Comparison> virtual_comparisons(ItemId item, const MonotonicityConfig& cfg, std::size_t query_index) {
    if (!virtual_active(query_index, cfg)) return {};
    return {{item, ItemId::nadir(), Origin::virtual_}, {ItemId::ideal(), item, Origin::virtual_}};
}

/// Registers nadir/ideal (idempotent) and appends the virtual comparisons
/// for item.
inline void add_virtual_comparisons(PreferenceDataset& ds, ItemId item, const MonotonicityConfig& cfg,
                                    std::size_t query_index) {
    const auto comps = virtual_comparisons(item, cfg, query_index);
    if (comps.empty()) return;
    ds.add_item(ItemId::nadir(), cfg.nadir);
    ds.add_item(ItemId::ideal(), cfg.ideal);
    for (const auto& c : comps) ds.add_comparison(c);
}

inline std::string to_string(VirtualMode m) {
    switch (m) {
        case VirtualMode::off: return "off";
        case VirtualMode::first_k: return "first_k";
        case VirtualMode::always: return "always";
    }
    return "off";
}

}  // namespace prefgp
