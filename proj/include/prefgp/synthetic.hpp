#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "core.hpp"
#include "preferences.hpp"
#include "random.hpp"

namespace prefgp::synthetic {

/// sum_{j=1..n} 1 / (1 + exp(-x (a - j) + (b + j)))
struct StackedSigmoid {
    double a;
    double b;
    int n;
    bool operator==(const StackedSigmoid&) const = default;
};

/// (c x - 1)^3
struct Polynomial {
    double c;
    bool operator==(const Polynomial&) const = default;
};

using ComponentShape = std::variant<StackedSigmoid, Polynomial>;

inline constexpr double kSigmoidA[2] = {10.0, 50.0};
inline constexpr double kSigmoidB[2] = {1.0, 20.0};
inline constexpr int kSigmoidN[2] = {1, 10};
inline constexpr double kPolynomialC[2] = {1.0, 5.0};

inline double raw_component(const ComponentShape& shape, double x) {
    if (const auto* s = std::get_if<StackedSigmoid>(&shape)) {
        double sum = 0.0;
        for (int j = 1; j <= s->n; ++j) sum += 1.0 / (1.0 + std::exp(-x * (s->a - j) + (s->b + j)));
        return sum;
    }
    const double t = std::get<Polynomial>(shape).c * x - 1.0;
    return t * t * t;
}

/// A component shape with its min-max normalization constants over [0,1].
struct ComponentSpec {
    ComponentShape shape;
    double raw_min = 0.0;
    double raw_max = 1.0;
    bool operator==(const ComponentSpec&) const = default;
};

inline constexpr int kMonotoneGrid = 1000;

/// Builds a component, or nullopt if its raw function is not non-decreasing
/// on the check grid. Extrema come from the same grid (endpoints included).
inline std::optional<ComponentSpec> make_component(const ComponentShape& shape) {
    double prev = raw_component(shape, 0.0);
    double lo = prev, hi = prev;
    for (int i = 1; i <= kMonotoneGrid; ++i) {
        const double y = raw_component(shape, static_cast<double>(i) / kMonotoneGrid);
        if (y < prev) return std::nullopt;
        lo = std::min(lo, y);
        hi = std::max(hi, y);
        prev = y;
    }
    if (!(hi > lo)) return std::nullopt;
    return ComponentSpec{shape, lo, hi};
}

inline double eval_component(const ComponentSpec& spec, double x) {
    if (!(x >= 0.0 && x <= 1.0)) throw InputError("component input outside [0,1]");
    const double y = (raw_component(spec.shape, x) - spec.raw_min) / (spec.raw_max - spec.raw_min);
    return std::clamp(y, 0.0, 1.0);
}

/// Ground-truth utility u(v) = sum_i w_i f_i(v_i) with normalized f_i.
struct UtilitySpec {
    std::vector<double> weights;
    std::vector<ComponentSpec> components;

    std::size_t dims() const { return weights.size(); }
    bool operator==(const UtilitySpec&) const = default;
};

inline double eval_utility(const UtilitySpec& spec, const PolicyValue& v) {
    if (static_cast<std::size_t>(v.dims()) != spec.dims()) throw InputError("utility: dimension mismatch");
    double u = 0.0;
    for (std::size_t i = 0; i < spec.dims(); ++i)
        u += spec.weights[i] * eval_component(spec.components[i], v[static_cast<Eigen::Index>(i)]);
    return std::clamp(u, 0.0, 1.0);
}

inline ComponentShape sample_shape(Rng& rng) {
    if (rng.below(2) == 0) {
        const double a = rng.uniform(kSigmoidA[0], kSigmoidA[1]);
        const double b = rng.uniform(kSigmoidB[0], kSigmoidB[1]);
        const int n = kSigmoidN[0] + static_cast<int>(rng.below(static_cast<std::uint64_t>(kSigmoidN[1] - kSigmoidN[0] + 1)));
        return StackedSigmoid{a, b, n};
    }
    return Polynomial{rng.uniform(kPolynomialC[0], kPolynomialC[1])};
}

/// Uniform on the probability simplex (normalized exponentials).
inline std::vector<double> sample_simplex(Rng& rng, std::size_t d) {
    std::vector<double> w(d);
    for (auto& x : w) x = -std::log1p(-rng.uniform());
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) x /= total;
    return w;
}

inline UtilitySpec sample_utility(Rng& rng, std::size_t d) {
    if (d < 2) throw InputError("utility needs at least 2 objectives");
    UtilitySpec spec;
    for (std::size_t i = 0; i < d; ++i) {
        std::optional<ComponentSpec> comp;
        while (!comp) comp = make_component(sample_shape(rng));
        spec.components.push_back(std::move(*comp));
    }
    spec.weights = sample_simplex(rng, d);
    return spec;
}

/// p dominates q: p >= q everywhere, strictly somewhere.
inline bool dominates(const PolicyValue& p, const PolicyValue& q) {
    return (p.values().array() >= q.values().array()).all() && (p.values().array() > q.values().array()).any();
}

/// Non-dominated subset, original order kept.
inline std::vector<PolicyValue> non_dominated(std::span<const PolicyValue> points) {
    std::vector<PolicyValue> out;
    for (std::size_t i = 0; i < points.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < points.size() && !dominated; ++j)
            dominated = j != i && dominates(points[j], points[i]);
        // exact duplicates keep only the first copy
        for (std::size_t j = 0; j < i && !dominated; ++j) dominated = points[j] == points[i];
        if (!dominated) out.push_back(points[i]);
    }
    return out;
}

struct SyntheticPCS {
    std::vector<PolicyValue> points;
    bool operator==(const SyntheticPCS&) const = default;
};

inline constexpr int kPcsRetries = 16;

/// Uniform pool in [0,1]^d, filtered to the non-dominated subset, then
/// downsampled uniformly (order preserved) to at most target_count.
inline SyntheticPCS generate_pcs(Rng& rng, std::size_t d, std::size_t pool_size, std::size_t target_count) {
    if (d < 2) throw InputError("PCS needs at least 2 objectives");
    if (target_count < 2 || pool_size < target_count) throw InputError("PCS requires pool_size >= target_count >= 2");
    for (int attempt = 0; attempt < kPcsRetries; ++attempt) {
        std::vector<PolicyValue> pool;
        pool.reserve(pool_size);
        for (std::size_t i = 0; i < pool_size; ++i) {
            Vector v(static_cast<Eigen::Index>(d));
            for (auto& x : v) x = rng.uniform();
            pool.emplace_back(std::move(v));
        }
        auto front = non_dominated(pool);
        if (front.size() < 2) continue;
        if (front.size() > target_count) {
            std::vector<std::size_t> idx(front.size());
            std::iota(idx.begin(), idx.end(), 0);
            for (std::size_t i = 0; i < target_count; ++i)
                std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
            idx.resize(target_count);
            std::ranges::sort(idx);
            std::vector<PolicyValue> kept;
            for (auto i : idx) kept.push_back(front[i]);
            front = std::move(kept);
        }
        return {std::move(front)};
    }
    throw NumericalError("could not generate a PCS with at least 2 non-dominated points");
}

/// Two-means on scalars, initialized at the min and max, run to a fixed
/// assignment. Returns index sets, higher-centroid cluster first. Ties in
/// distance go to the upper cluster.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> two_means(std::span<const double> xs) {
    std::vector<std::size_t> upper, lower;
    if (xs.empty()) return {upper, lower};
    auto [mn, mx] = std::ranges::minmax_element(xs);
    double c_hi = *mx, c_lo = *mn;
    if (!(c_hi > c_lo)) {
        for (std::size_t i = 0; i < xs.size(); ++i) upper.push_back(i);
        return {upper, lower};
    }
    std::vector<int> assign(xs.size(), -1);
    for (int iter = 0; iter < 1000; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const int a = std::abs(xs[i] - c_hi) <= std::abs(xs[i] - c_lo) ? 0 : 1;
            changed |= a != assign[i];
            assign[i] = a;
        }
        if (!changed) break;
        double s[2] = {0, 0};
        std::size_t n[2] = {0, 0};
        for (std::size_t i = 0; i < xs.size(); ++i) {
            s[assign[i]] += xs[i];
            ++n[assign[i]];
        }
        if (n[0]) c_hi = s[0] / static_cast<double>(n[0]);
        if (n[1]) c_lo = s[1] / static_cast<double>(n[1]);
    }
    for (std::size_t i = 0; i < xs.size(); ++i) (assign[i] == 0 ? upper : lower).push_back(i);
    return {upper, lower};
}

/// Virtual user's answer to one query over `items`.
///
/// Every call draws fresh i.i.d. N(0, sigma^2) noise for every item. Ties in
/// noisy utility keep the input order.
inline QueryResponse simulate_response(const UtilitySpec& spec, QueryType type,
                                       std::span<const std::pair<ItemId, PolicyValue>> items, double sigma, Rng& rng,
                                       std::size_t top_k = 3) {
    if (items.empty()) throw InputError("simulate_response: no items");
    if (sigma < 0.0) throw InputError("simulate_response: negative sigma");

    std::vector<double> noisy(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        const double eps = rng.normal();
        noisy[i] = eval_utility(spec, items[i].second) + sigma * eps;
    }
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), 0);
    std::ranges::stable_sort(order, [&](std::size_t l, std::size_t r) { return noisy[l] > noisy[r]; });
    auto id = [&](std::size_t i) { return items[i].first; };

    switch (type) {
        case QueryType::pairwise: {
            if (items.size() != 2) throw InputError("pairwise query needs exactly 2 items");
            return PairwiseChoice{id(order[0]), id(order[1])};
        }
        case QueryType::ranking: {
            Ranking r;
            for (auto i : order) r.order.push_back(id(i));
            return r;
        }
        case QueryType::toprank: {
            if (top_k < 1) throw InputError("top-rank needs k >= 1");
            TopRank t;
            for (std::size_t pos = 0; pos < order.size(); ++pos) (pos < top_k ? t.top : t.rest).push_back(id(order[pos]));
            return t;
        }
        case QueryType::clustering: {
            Clustering c{id(order[0]), {}};
            std::vector<double> rest;
            for (std::size_t pos = 1; pos < order.size(); ++pos) rest.push_back(noisy[order[pos]]);
            const auto [upper, lower] = two_means(rest);
            c.clusters.resize(2);
            for (auto k : upper) c.clusters[0].push_back(id(order[k + 1]));
            for (auto k : lower) c.clusters[1].push_back(id(order[k + 1]));
            return c;
        }
    }
    throw InputError("unknown query type");
}

}  // namespace prefgp::synthetic
