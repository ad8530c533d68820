#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "core.hpp"

namespace prefgp {

enum class Origin { user, virtual_ };

enum class QueryType { pairwise, ranking, clustering, toprank };

inline std::string to_string(QueryType t) {
    switch (t) {
        case QueryType::pairwise: return "pairwise";
        case QueryType::ranking: return "ranking";
        case QueryType::clustering: return "clustering";
        case QueryType::toprank: return "toprank";
    }
    return "pairwise";
}

inline QueryType parse_query_type(const std::string& s) {
    if (s == "pairwise") return QueryType::pairwise;
    if (s == "ranking") return QueryType::ranking;
    if (s == "clustering") return QueryType::clustering;
    if (s == "toprank") return QueryType::toprank;
    throw InputError("unknown query type '" + s + "'");
}

/// winner is preferred over loser.
struct Comparison {
    ItemId winner;
    ItemId loser;
    Origin origin = Origin::user;

    bool operator==(const Comparison&) const = default;
};

struct PairwiseChoice {
    ItemId winner;
    ItemId loser;
    bool operator==(const PairwiseChoice&) const = default;
};

/// Full ordering, best first.
struct Ranking {
    std::vector<ItemId> order;
    bool operator==(const Ranking&) const = default;
};

/// A single best item followed by clusters of decreasing utility.
struct Clustering {
    ItemId best;
    std::vector<std::vector<ItemId>> clusters;
    bool operator==(const Clustering&) const = default;
};

/// Ordered top-k followed by one unordered bucket.
struct TopRank {
    std::vector<ItemId> top;
    std::vector<ItemId> rest;
    bool operator==(const TopRank&) const = default;
};

using QueryResponse = std::variant<PairwiseChoice, Ranking, Clustering, TopRank>;

namespace detail {
inline void require_distinct(std::span<const ItemId> ids, const char* what) {
    std::unordered_set<ItemId> seen;
    for (const auto& id : ids)
        if (!seen.insert(id).second)
            throw InputError(std::string(what) + ": item " + std::to_string(id.value) + " appears more than once");
}
}  // namespace detail

/// Every item a response mentions, in expressed order (best first).
inline std::vector<ItemId> response_items(const QueryResponse& resp) {
    return std::visit(
        [](const auto& r) -> std::vector<ItemId> {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, PairwiseChoice>) {
                return {r.winner, r.loser};
            } else if constexpr (std::is_same_v<T, Ranking>) {
                return r.order;
            } else if constexpr (std::is_same_v<T, Clustering>) {
                std::vector<ItemId> out{r.best};
                for (const auto& c : r.clusters) out.insert(out.end(), c.begin(), c.end());
                return out;
            } else {
                std::vector<ItemId> out = r.top;
                out.insert(out.end(), r.rest.begin(), r.rest.end());
                return out;
            }
        },
        resp);
}

inline std::vector<Comparison> comparisons_from_pairwise(const PairwiseChoice& p) {
    if (p.winner == p.loser) throw InputError("pairwise choice: winner equals loser");
    return {{p.winner, p.loser, Origin::user}};
}

/// Successive pairs of the ranking: r[i] > r[i+1].
inline std::vector<Comparison> comparisons_from_ranking(const Ranking& r) {
    detail::require_distinct(r.order, "ranking");
    std::vector<Comparison> out;
    for (std::size_t i = 0; i + 1 < r.order.size(); ++i) out.push_back({r.order[i], r.order[i + 1], Origin::user});
    return out;
}

/// best beats all of the first cluster; each cluster beats all of the next.
/// Items within one cluster are not compared.
inline std::vector<Comparison> comparisons_from_clustering(const Clustering& c) {
    detail::require_distinct(response_items(c), "clustering");
    std::vector<Comparison> out;
    if (c.clusters.empty()) return out;
    for (const auto& item : c.clusters.front()) out.push_back({c.best, item, Origin::user});
    for (std::size_t k = 0; k + 1 < c.clusters.size(); ++k)
        for (const auto& hi : c.clusters[k])
            for (const auto& lo : c.clusters[k + 1]) out.push_back({hi, lo, Origin::user});
    return out;
}

/// Chain through the top list, then the last top item beats every rest item.
inline std::vector<Comparison> comparisons_from_toprank(const TopRank& t) {
    if (t.top.empty()) throw InputError("top-rank: top list is empty");
    detail::require_distinct(response_items(t), "top-rank");
    std::vector<Comparison> out;
    for (std::size_t i = 0; i + 1 < t.top.size(); ++i) out.push_back({t.top[i], t.top[i + 1], Origin::user});
    for (const auto& item : t.rest) out.push_back({t.top.back(), item, Origin::user});
    return out;
}

inline std::vector<Comparison> to_comparisons(const QueryResponse& resp) {
    return std::visit(
        [](const auto& r) {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, PairwiseChoice>) return comparisons_from_pairwise(r);
            else if constexpr (std::is_same_v<T, Ranking>) return comparisons_from_ranking(r);
            else if constexpr (std::is_same_v<T, Clustering>) return comparisons_from_clustering(r);
            else return comparisons_from_toprank(r);
        },
        resp);
}

/// Items plus an append-only list of comparisons. Contradictory comparisons
/// are kept as-is.
class PreferenceDataset {
public:
    const std::map<ItemId, PolicyValue>& items() const { return items_; }
    const std::vector<Comparison>& comparisons() const { return comparisons_; }

    bool contains(ItemId id) const { return items_.contains(id); }
    const PolicyValue& item(ItemId id) const {
        auto it = items_.find(id);
        if (it == items_.end()) throw InputError("unknown item " + std::to_string(id.value));
        return it->second;
    }

    /// Registers an item. Re-adding an id with the same value is a no-op.
    void add_item(ItemId id, const PolicyValue& value) {
        if (!items_.empty() && items_.begin()->second.dims() != value.dims())
            throw InputError("item dimension mismatch");
        auto [it, inserted] = items_.emplace(id, value);
        if (!inserted && !(it->second == value))
            throw InputError("item " + std::to_string(id.value) + " re-registered with a different value");
    }

    void add_comparison(const Comparison& c) {
        if (c.winner == c.loser) throw InputError("comparison winner equals loser");
        if (!contains(c.winner) || !contains(c.loser))
            throw InputError("comparison references unknown item");
        comparisons_.push_back(c);
    }

    std::size_t count(Origin origin) const {
        return static_cast<std::size_t>(std::ranges::count_if(comparisons_, [&](const auto& c) { return c.origin == origin; }));
    }

    bool operator==(const PreferenceDataset&) const = default;

private:
    std::map<ItemId, PolicyValue> items_;
    std::vector<Comparison> comparisons_;
};

/// Converts the response and appends all resulting comparisons. Never
/// deduplicates or removes earlier comparisons.
inline PreferenceDataset append_response(PreferenceDataset ds, const QueryResponse& resp) {
    for (const auto& id : response_items(resp))
        if (!ds.contains(id)) throw InputError("response references unknown item " + std::to_string(id.value));
    for (const auto& c : to_comparisons(resp)) ds.add_comparison(c);
    return ds;
}

}  // namespace prefgp
