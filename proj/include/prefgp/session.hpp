#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "acquisition.hpp"
#include "gp.hpp"
#include "monotonicity.hpp"
#include "preferences.hpp"
#include "random.hpp"
#include "synthetic.hpp"

namespace prefgp {

/// Candidate as supplied by a client: raw objective values plus an optional
/// display label.
struct CandidateItem {
    ItemId id;
    std::vector<double> values;
    std::string label;
    bool operator==(const CandidateItem&) const = default;
};

struct ObjectiveInfo {
    std::string name;
    std::string unit;
    bool operator==(const ObjectiveInfo&) const = default;
};

/// Parameters for a randomly generated candidate set.
struct SyntheticSource {
    std::size_t dims = 5;
    std::size_t pool_size = 1000;
    std::size_t count = 75;
    bool operator==(const SyntheticSource&) const = default;
};

enum class ReferencePoints { hypercube, extrema };

struct SessionConfig {
    QueryType query_type = QueryType::ranking;
    std::size_t top_k = 3;
    KernelConfig kernel;
    FitOptions fit;  // fit.sigma is the model-side comparison noise
    std::size_t prior_switch_after = 5;
    VirtualMode virtual_mode = VirtualMode::always;
    std::size_t virtual_k = 5;
    // Unset: hypercube corners for synthetic candidates, componentwise
    // extrema for supplied ones.
    std::optional<ReferencePoints> reference_points;
    std::vector<CandidateItem> candidates;
    std::optional<SyntheticSource> synthetic;
    // Min-max normalize supplied values per objective. Without it, supplied
    // values must already lie in [0,1].
    bool normalize = false;
    std::vector<ObjectiveInfo> objectives;
    std::uint64_t seed = 0;

    void validate() const {
        kernel.validate();
        fit.validate();
        if (query_type == QueryType::toprank && top_k < 1) throw InputError("top-rank needs k >= 1");
        if (virtual_mode == VirtualMode::first_k && virtual_k == 0)
            throw InputError("virtual first_k mode needs k >= 1");
        if (synthetic.has_value() == !candidates.empty())
            throw InputError("exactly one of candidates or synthetic must be given");
        if (synthetic) {
            if (synthetic->dims < 2) throw InputError("synthetic candidates need at least 2 objectives");
            if (synthetic->count < 2 || synthetic->pool_size < synthetic->count)
                throw InputError("synthetic candidates need pool_size >= count >= 2");
        } else if (candidates.size() < 2) {
            throw InputError("candidate set needs at least 2 items");
        }
    }
    bool operator==(const SessionConfig&) const = default;
};

/// One item of a query payload.
struct PayloadItem {
    ItemId id;
    PolicyValue value;          // normalized, as seen by the model
    std::vector<double> raw;    // as supplied, for display
    std::string label;
    bool is_new = false;
    bool operator==(const PayloadItem&) const = default;
};

/// What the user is asked next: the previously shown items in their
/// last-expressed order, followed by the new item(s).
struct QueryPayload {
    QueryType type;
    std::size_t top_k;
    std::size_t query_index;
    std::vector<PayloadItem> items;
    std::optional<QueryResponse> previous;  // last response, for re-arranging
    bool operator==(const QueryPayload&) const = default;
};

struct Event {
    enum class Kind { created, query, response, fit_failed, finished };

    Kind kind;
    std::int64_t timestamp_ms = 0;
    std::optional<SessionConfig> config;    // created
    std::vector<ItemId> items;              // query: payload ids in order
    std::optional<QueryResponse> response;  // response
    std::string message;                    // fit_failed

    /// Equality ignoring timestamps.
    bool same_content(const Event& o) const {
        return kind == o.kind && config == o.config && items == o.items && response == o.response &&
               message == o.message;
    }
};

inline std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

/// Raised when a response does not cover exactly the pending payload.
struct ItemMismatchError : Error {
    explicit ItemMismatchError(const std::string& what) : Error("item_mismatch", what) {}
};

/// One elicitation loop: refit, acquire, query, ingest.
class Session {
public:
    Session(std::string id, SessionConfig cfg) : id_(std::move(id)), cfg_(std::move(cfg)), rng_(0) {
        cfg_.validate();
        build_candidates();
        rng_ = Rng(Rng::derive_seed(cfg_.seed, 2));
        log(Event{Event::Kind::created, now_ms(), cfg_, {}, {}, {}});

        // Two starting items, chosen by the acquisition on an empty model.
        for (int i = 0; i < 2; ++i) {
            const ItemId next = select_next(gp_, candidates_, rng_);
            candidates_.mark_queried(next);
            pending_.push_back(next);
        }
        log_query();
    }

    const std::string& id() const { return id_; }
    const SessionConfig& config() const { return cfg_; }
    const CandidateSet& candidates() const { return candidates_; }
    const PreferenceDataset& dataset() const { return dataset_; }
    const GPState& gp() const { return gp_; }
    const MonotonicityConfig& monotonicity() const { return mono_; }
    std::size_t query_count() const { return query_count_; }
    const std::vector<ItemId>& pending() const { return pending_; }
    const std::vector<ItemId>& shown_order() const { return shown_; }
    bool finished() const { return finished_; }
    std::size_t fit_failures() const { return fit_failures_; }
    const std::vector<Event>& events() const { return events_; }
    const CandidateItem& candidate_info(ItemId id) const { return info_.at(id); }

    std::vector<ItemId> payload_ids() const {
        std::vector<ItemId> ids = shown_;
        ids.insert(ids.end(), pending_.begin(), pending_.end());
        return ids;
    }

    QueryPayload next_query() const {
        if (finished_) throw ExhaustedError("session is finished");
        QueryPayload p{cfg_.query_type, cfg_.top_k, query_count_, {}, last_response_};
        for (const auto& id : payload_ids()) {
            const auto& info = info_.at(id);
            const bool is_new = std::ranges::find(pending_, id) != pending_.end();
            p.items.push_back({id, candidates_.value(id), info.values, info.label, is_new});
        }
        return p;
    }

    /// Ingests a response to the pending payload, refits and picks the next
    /// item. A failed refit keeps the previous model and is logged.
    void submit_response(const QueryResponse& resp) {
        if (finished_) throw ExhaustedError("session is finished");
        check_response(resp);

        PreferenceDataset next = dataset_;
        for (const auto& id : payload_ids()) next.add_item(id, candidates_.value(id));
        next = append_response(std::move(next), resp);
        const std::size_t query_index = query_count_;
        for (const auto& id : pending_) add_virtual_comparisons(next, id, mono_, query_index);

        dataset_ = std::move(next);
        ++query_count_;
        log(Event{Event::Kind::response, now_ms(), {}, {}, resp, {}});
        refit(query_index);

        last_response_ = resp;
        shown_ = expressed_order(resp);
        pending_.clear();
        update_best();

        if (candidates_.unqueried_count() == 0) {
            finish();
            return;
        }
        const ItemId next_item = select_next(gp_, candidates_, rng_);
        candidates_.mark_queried(next_item);
        pending_.push_back(next_item);
        log_query();
    }

    /// Argmax posterior mean over queried items (lowest id on ties).
    std::pair<ItemId, double> current_best() const {
        if (!current_best_) throw StateError("no responses yet");
        return *current_best_;
    }

    void finish() {
        if (finished_) return;
        finished_ = true;
        pending_.clear();
        log(Event{Event::Kind::finished, now_ms(), {}, {}, {}, {}});
    }

    /// State equality (event timestamps excluded).
    bool same_state(const Session& o) const {
        if (events_.size() != o.events_.size()) return false;
        for (std::size_t i = 0; i < events_.size(); ++i)
            if (!events_[i].same_content(o.events_[i])) return false;
        return id_ == o.id_ && cfg_ == o.cfg_ && candidates_ == o.candidates_ && dataset_ == o.dataset_ &&
               gp_ == o.gp_ && query_count_ == o.query_count_ && pending_ == o.pending_ && shown_ == o.shown_ &&
               last_response_ == o.last_response_ && current_best_ == o.current_best_ && finished_ == o.finished_ &&
               fit_failures_ == o.fit_failures_;
    }

    /// Rebuilds a session by re-applying the responses of an event log.
    /// Issued queries must match the log.
    static Session replay(const std::string& id, const std::vector<Event>& log) {
        if (log.empty() || log.front().kind != Event::Kind::created || !log.front().config)
            throw InputError("event log must start with a created event");
        Session s(id, *log.front().config);
        for (std::size_t i = 1; i < log.size(); ++i) {
            if (log[i].kind == Event::Kind::response) s.submit_response(*log[i].response);
            else if (log[i].kind == Event::Kind::finished) s.finish();
        }
        auto queries = [](const std::vector<Event>& events) {
            std::vector<std::vector<ItemId>> out;
            for (const auto& e : events)
                if (e.kind == Event::Kind::query) out.push_back(e.items);
            return out;
        };
        if (queries(s.events_) != queries(log)) throw InputError("event log replay diverged from the recorded queries");
        // Keep the original timestamps.
        if (s.events_.size() == log.size())
            for (std::size_t i = 0; i < log.size(); ++i) s.events_[i].timestamp_ms = log[i].timestamp_ms;
        return s;
    }

private:
    void build_candidates() {
        std::vector<std::pair<ItemId, PolicyValue>> items;
        std::vector<PolicyValue> points;
        if (cfg_.synthetic) {
            Rng pcs_rng(Rng::derive_seed(cfg_.seed, 1));
            const auto pcs = synthetic::generate_pcs(pcs_rng, cfg_.synthetic->dims, cfg_.synthetic->pool_size,
                                                     cfg_.synthetic->count);
            for (std::size_t i = 0; i < pcs.points.size(); ++i) {
                const ItemId id{static_cast<std::int64_t>(i)};
                items.emplace_back(id, pcs.points[i]);
                info_[id] = CandidateItem{id, pcs.points[i].to_vector(), {}};
            }
        } else {
            const std::size_t d = cfg_.candidates.front().values.size();
            std::vector<double> lo(d, 0.0), hi(d, 1.0);
            for (const auto& c : cfg_.candidates)
                if (c.values.size() != d) throw InputError("candidate dimension mismatch");
            if (cfg_.normalize) {
                lo = hi = cfg_.candidates.front().values;
                for (const auto& c : cfg_.candidates)
                    for (std::size_t i = 0; i < d; ++i) {
                        lo[i] = std::min(lo[i], c.values[i]);
                        hi[i] = std::max(hi[i], c.values[i]);
                    }
            }
            for (const auto& c : cfg_.candidates) {
                std::vector<double> v(d);
                for (std::size_t i = 0; i < d; ++i)
                    v[i] = cfg_.normalize ? (hi[i] > lo[i] ? (c.values[i] - lo[i]) / (hi[i] - lo[i]) : 0.5) : c.values[i];
                items.emplace_back(c.id, PolicyValue::from(v));
                if (!info_.emplace(c.id, c).second) throw InputError("duplicate candidate id " + std::to_string(c.id.value));
            }
        }
        candidates_ = CandidateSet(items);
        for (const auto& [id, v] : items) points.push_back(v);

        const auto d = candidates_.dims();
        const auto ref = cfg_.reference_points.value_or(cfg_.synthetic ? ReferencePoints::hypercube : ReferencePoints::extrema);
        mono_ = MonotonicityConfig::hypercube(d, cfg_.prior_switch_after, cfg_.virtual_mode, cfg_.virtual_k);
        if (ref == ReferencePoints::extrema) std::tie(mono_.nadir, mono_.ideal) = componentwise_extrema(points);
        mono_.validate();
    }

    void check_response(const QueryResponse& resp) const {
        const auto expected = payload_ids();
        const bool type_ok = std::visit(
            [&](const auto& r) {
                using T = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<T, PairwiseChoice>) return expected.size() == 2 || cfg_.query_type == QueryType::pairwise;
                else if constexpr (std::is_same_v<T, Ranking>) return cfg_.query_type == QueryType::ranking;
                else if constexpr (std::is_same_v<T, Clustering>) return cfg_.query_type == QueryType::clustering;
                else return cfg_.query_type == QueryType::toprank;
            },
            resp);
        if (!type_ok) throw ItemMismatchError("response type does not match the session's query type");

        auto got = response_items(resp);
        detail::require_distinct(got, "response");
        auto want = expected;
        std::ranges::sort(got);
        std::ranges::sort(want);
        if (got != want) throw ItemMismatchError("response must cover exactly the items of the pending query");
        if (const auto* t = std::get_if<TopRank>(&resp)) {
            if (t->top.size() != std::min(cfg_.top_k, expected.size()))
                throw ItemMismatchError("top-rank response must rank exactly min(k, items) items");
        }
    }

    void refit(std::size_t query_index) {
        try {
            gp_ = fit_laplace(dataset_, cfg_.kernel, prior_mean_kind(query_index, mono_), cfg_.fit);
        } catch (const ConvergenceError& e) {
            ++fit_failures_;
            log(Event{Event::Kind::fit_failed, now_ms(), {}, {}, {}, e.what()});
        } catch (const NumericalError& e) {
            ++fit_failures_;
            log(Event{Event::Kind::fit_failed, now_ms(), {}, {}, {}, e.what()});
        }
    }

    void update_best() {
        if (gp_.fitted() && gp_.comparison_count() > 0) {
            current_best_ = best_queried(gp_, candidates_);
            return;
        }
        // No usable model yet: the user's own top pick.
        const ItemId top = shown_.front();
        current_best_ = {top, 0.0};
    }

    std::vector<ItemId> expressed_order(const QueryResponse& resp) const {
        // A pairwise loser is dropped; the winner meets the next item.
        if (const auto* p = std::get_if<PairwiseChoice>(&resp); p && cfg_.query_type == QueryType::pairwise)
            return {p->winner};
        return response_items(resp);
    }

    void log_query() { log(Event{Event::Kind::query, now_ms(), {}, payload_ids(), {}, {}}); }
    void log(Event e) { events_.push_back(std::move(e)); }

    std::string id_;
    SessionConfig cfg_;
    CandidateSet candidates_;
    std::map<ItemId, CandidateItem> info_;
    MonotonicityConfig mono_;
    PreferenceDataset dataset_;
    GPState gp_;
    Rng rng_;
    std::size_t query_count_ = 0;
    std::vector<ItemId> shown_;    // previously shown, last-expressed order
    std::vector<ItemId> pending_;  // newly selected, awaiting a response
    std::optional<QueryResponse> last_response_;
    std::optional<std::pair<ItemId, double>> current_best_;
    bool finished_ = false;
    std::size_t fit_failures_ = 0;
    std::vector<Event> events_;
};

}  // namespace prefgp
