#pragma once

// JSON schema for datasets, responses, synthetic utilities, candidate sets,
// session configs, query payloads and event-log records.

#include <string>
#include <vector>

#include <json.hpp>

#include "preferences.hpp"
#include "session.hpp"
#include "synthetic.hpp"

namespace prefgp {

using json = nlohmann::json;

inline void to_json(json& j, const ItemId& id) { j = id.value; }
inline void from_json(const json& j, ItemId& id) { id.value = j.get<std::int64_t>(); }

inline void to_json(json& j, const PolicyValue& v) { j = v.to_vector(); }
inline void from_json(const json& j, PolicyValue& v) { v = PolicyValue::from(j.get<std::vector<double>>()); }

inline void to_json(json& j, const Comparison& c) {
    j = {{"winner", c.winner}, {"loser", c.loser}, {"origin", c.origin == Origin::user ? "user" : "virtual"}};
}
inline void from_json(const json& j, Comparison& c) {
    c.winner = j.at("winner").get<ItemId>();
    c.loser = j.at("loser").get<ItemId>();
    c.origin = j.value("origin", std::string("user")) == "virtual" ? Origin::virtual_ : Origin::user;
}

inline json response_to_json(const QueryResponse& resp) {
    return std::visit(
        [](const auto& r) -> json {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, PairwiseChoice>)
                return {{"type", "pairwise"}, {"winner", r.winner}, {"loser", r.loser}};
            else if constexpr (std::is_same_v<T, Ranking>)
                return {{"type", "ranking"}, {"order", r.order}};
            else if constexpr (std::is_same_v<T, Clustering>)
                return {{"type", "clustering"}, {"best", r.best}, {"clusters", r.clusters}};
            else
                return {{"type", "toprank"}, {"top", r.top}, {"rest", r.rest}};
        },
        resp);
}

inline QueryResponse response_from_json(const json& j) {
    const auto type = j.at("type").get<std::string>();
    if (type == "pairwise") return PairwiseChoice{j.at("winner").get<ItemId>(), j.at("loser").get<ItemId>()};
    if (type == "ranking") return Ranking{j.at("order").get<std::vector<ItemId>>()};
    if (type == "clustering")
        return Clustering{j.at("best").get<ItemId>(), j.at("clusters").get<std::vector<std::vector<ItemId>>>()};
    if (type == "toprank")
        return TopRank{j.at("top").get<std::vector<ItemId>>(), j.value("rest", std::vector<ItemId>{})};
    throw InputError("unknown response type '" + type + "'");
}

inline json dataset_to_json(const PreferenceDataset& ds) {
    json items = json::array();
    for (const auto& [id, v] : ds.items()) items.push_back({{"id", id}, {"values", v}});
    return {{"items", items}, {"comparisons", ds.comparisons()}};
}

inline PreferenceDataset dataset_from_json(const json& j) {
    PreferenceDataset ds;
    for (const auto& it : j.at("items")) ds.add_item(it.at("id").get<ItemId>(), it.at("values").get<PolicyValue>());
    for (const auto& c : j.at("comparisons")) ds.add_comparison(c.get<Comparison>());
    return ds;
}

namespace synthetic {

inline void to_json(json& j, const ComponentSpec& c) {
    if (const auto* s = std::get_if<StackedSigmoid>(&c.shape))
        j = {{"kind", "stacked_sigmoid"}, {"a", s->a}, {"b", s->b}, {"n", s->n}};
    else
        j = {{"kind", "polynomial"}, {"c", std::get<Polynomial>(c.shape).c}};
    j["raw_min"] = c.raw_min;
    j["raw_max"] = c.raw_max;
}
inline void from_json(const json& j, ComponentSpec& c) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "stacked_sigmoid")
        c.shape = StackedSigmoid{j.at("a").get<double>(), j.at("b").get<double>(), j.at("n").get<int>()};
    else if (kind == "polynomial")
        c.shape = Polynomial{j.at("c").get<double>()};
    else
        throw InputError("unknown component kind '" + kind + "'");
    c.raw_min = j.at("raw_min").get<double>();
    c.raw_max = j.at("raw_max").get<double>();
}

inline void to_json(json& j, const UtilitySpec& u) { j = {{"weights", u.weights}, {"components", u.components}}; }
inline void from_json(const json& j, UtilitySpec& u) {
    u.weights = j.at("weights").get<std::vector<double>>();
    u.components = j.at("components").get<std::vector<ComponentSpec>>();
    if (u.weights.size() != u.components.size()) throw InputError("utility: weights and components differ in length");
}

/// Same shape as a session's "candidates" list, so a generated set can be
/// posted as-is.
inline void to_json(json& j, const SyntheticPCS& pcs) {
    json items = json::array();
    for (std::size_t i = 0; i < pcs.points.size(); ++i) items.push_back({{"id", i}, {"values", pcs.points[i]}});
    j = {{"dims", pcs.points.empty() ? 0 : pcs.points.front().dims()}, {"items", items}};
}
inline void from_json(const json& j, SyntheticPCS& pcs) {
    pcs.points.clear();
    for (const auto& it : j.at("items")) pcs.points.push_back(it.at("values").get<PolicyValue>());
}

}  // namespace synthetic

inline void to_json(json& j, const CandidateItem& c) {
    j = {{"id", c.id}, {"values", c.values}};
    if (!c.label.empty()) j["label"] = c.label;
}
inline void from_json(const json& j, CandidateItem& c) {
    c.id = j.at("id").get<ItemId>();
    c.values = j.at("values").get<std::vector<double>>();
    c.label = j.value("label", std::string());
}

inline json config_to_json(const SessionConfig& c) {
    json j = {
        {"query_type", to_string(c.query_type)},
        {"top_k", c.top_k},
        {"kernel", {{"signal_variance", c.kernel.signal_variance}, {"length_scale", c.kernel.length_scale}, {"jitter", c.kernel.jitter}}},
        {"noise", c.fit.sigma},
        {"fit", {{"tol", c.fit.tol}, {"max_iter", c.fit.max_iter}, {"max_halvings", c.fit.max_halvings}}},
        {"virtual", to_string(c.virtual_mode)},
        {"virtual_k", c.virtual_k},
        {"normalize", c.normalize},
        {"seed", c.seed},
    };
    if (c.prior_switch_after == MonotonicityConfig::kAlwaysLinear) j["prior_switch_after"] = "always";
    else j["prior_switch_after"] = c.prior_switch_after;
    if (c.reference_points) j["reference_points"] = *c.reference_points == ReferencePoints::hypercube ? "hypercube" : "extrema";
    if (!c.candidates.empty()) j["candidates"] = c.candidates;
    if (c.synthetic)
        j["synthetic"] = {{"dims", c.synthetic->dims}, {"pool_size", c.synthetic->pool_size}, {"count", c.synthetic->count}};
    if (!c.objectives.empty()) {
        json objs = json::array();
        for (const auto& o : c.objectives) objs.push_back({{"name", o.name}, {"unit", o.unit}});
        j["objectives"] = objs;
    }
    return j;
}

inline VirtualMode parse_virtual_mode(const std::string& s) {
    if (s == "off") return VirtualMode::off;
    if (s == "always") return VirtualMode::always;
    if (s == "first_k") return VirtualMode::first_k;
    throw InputError("unknown virtual mode '" + s + "'");
}

/// Missing fields take their defaults. Throws InputError on malformed input.
inline SessionConfig config_from_json(const json& j) {
    try {
        SessionConfig c;
        if (!j.is_object()) throw InputError("session config must be a JSON object");
        c.query_type = parse_query_type(j.value("query_type", std::string("ranking")));
        c.top_k = j.value("top_k", c.top_k);
        if (j.contains("kernel")) {
            const auto& k = j.at("kernel");
            c.kernel.signal_variance = k.value("signal_variance", c.kernel.signal_variance);
            c.kernel.length_scale = k.value("length_scale", c.kernel.length_scale);
            c.kernel.jitter = k.value("jitter", c.kernel.jitter);
        }
        c.fit.sigma = j.value("noise", c.fit.sigma);
        if (j.contains("fit")) {
            const auto& f = j.at("fit");
            c.fit.tol = f.value("tol", c.fit.tol);
            c.fit.max_iter = f.value("max_iter", c.fit.max_iter);
            c.fit.max_halvings = f.value("max_halvings", c.fit.max_halvings);
        }
        if (j.contains("prior_switch_after")) {
            const auto& p = j.at("prior_switch_after");
            if (p.is_string()) {
                if (p.get<std::string>() != "always") throw InputError("prior_switch_after must be an integer or \"always\"");
                c.prior_switch_after = MonotonicityConfig::kAlwaysLinear;
            } else {
                c.prior_switch_after = p.get<std::size_t>();
            }
        }
        c.virtual_mode = parse_virtual_mode(j.value("virtual", std::string("always")));
        c.virtual_k = j.value("virtual_k", c.virtual_k);
        if (j.contains("reference_points")) {
            const auto r = j.at("reference_points").get<std::string>();
            if (r == "hypercube") c.reference_points = ReferencePoints::hypercube;
            else if (r == "extrema") c.reference_points = ReferencePoints::extrema;
            else throw InputError("unknown reference_points '" + r + "'");
        }
        if (j.contains("candidates")) c.candidates = j.at("candidates").get<std::vector<CandidateItem>>();
        if (j.contains("synthetic")) {
            const auto& s = j.at("synthetic");
            SyntheticSource src;
            src.dims = s.value("dims", src.dims);
            src.pool_size = s.value("pool_size", src.pool_size);
            src.count = s.value("count", src.count);
            c.synthetic = src;
        }
        c.normalize = j.value("normalize", c.normalize);
        if (j.contains("objectives"))
            for (const auto& o : j.at("objectives"))
                c.objectives.push_back({o.value("name", std::string()), o.value("unit", std::string())});
        c.seed = j.value("seed", c.seed);
        return c;
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed session config: ") + e.what());
    }
}

inline json payload_to_json(const QueryPayload& p) {
    json items = json::array();
    for (const auto& it : p.items) {
        json item = {{"id", it.id}, {"values", it.value}, {"raw", it.raw}, {"new", it.is_new}};
        if (!it.label.empty()) item["label"] = it.label;
        items.push_back(item);
    }
    json j = {{"query_type", to_string(p.type)}, {"query_index", p.query_index}, {"items", items}};
    if (p.type == QueryType::toprank) j["top_k"] = p.top_k;
    j["previous"] = p.previous ? response_to_json(*p.previous) : json(nullptr);
    return j;
}

inline std::string to_string(Event::Kind k) {
    switch (k) {
        case Event::Kind::created: return "created";
        case Event::Kind::query: return "query";
        case Event::Kind::response: return "response";
        case Event::Kind::fit_failed: return "fit_failed";
        case Event::Kind::finished: return "finished";
    }
    return "created";
}

inline json event_to_json(const Event& e) {
    json j = {{"event", to_string(e.kind)}, {"ts", e.timestamp_ms}};
    switch (e.kind) {
        case Event::Kind::created: j["config"] = config_to_json(*e.config); break;
        case Event::Kind::query: j["items"] = e.items; break;
        case Event::Kind::response: j["response"] = response_to_json(*e.response); break;
        case Event::Kind::fit_failed: j["message"] = e.message; break;
        case Event::Kind::finished: break;
    }
    return j;
}

inline Event event_from_json(const json& j) {
    try {
        Event e{Event::Kind::created, 0, {}, {}, {}, {}};
        const auto kind = j.at("event").get<std::string>();
        e.timestamp_ms = j.value("ts", std::int64_t{0});
        if (kind == "created") {
            e.kind = Event::Kind::created;
            e.config = config_from_json(j.at("config"));
        } else if (kind == "query") {
            e.kind = Event::Kind::query;
            e.items = j.at("items").get<std::vector<ItemId>>();
        } else if (kind == "response") {
            e.kind = Event::Kind::response;
            e.response = response_from_json(j.at("response"));
        } else if (kind == "fit_failed") {
            e.kind = Event::Kind::fit_failed;
            e.message = j.value("message", std::string());
        } else if (kind == "finished") {
            e.kind = Event::Kind::finished;
        } else {
            throw InputError("unknown event '" + kind + "'");
        }
        return e;
    } catch (const json::exception& ex) {
        throw InputError(std::string("malformed event: ") + ex.what());
    }
}

/// One JSON document per line.
inline std::string events_to_jsonl(const std::vector<Event>& events) {
    std::string out;
    for (const auto& e : events) {
        out += event_to_json(e).dump();
        out += '\n';
    }
    return out;
}

inline std::vector<Event> events_from_jsonl(const std::string& text) {
    std::vector<Event> events;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        const auto line = text.substr(start, end - start);
        if (!line.empty()) {
            try {
                events.push_back(event_from_json(json::parse(line)));
            } catch (const json::parse_error& e) {
                throw InputError(std::string("malformed event line: ") + e.what());
            }
        }
        start = end + 1;
    }
    return events;
}

}  // namespace prefgp
