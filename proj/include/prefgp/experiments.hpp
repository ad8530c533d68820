#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "random.hpp"
#include "session.hpp"
#include "synthetic.hpp"

namespace prefgp::experiments {

/// How monotonicity knowledge is used, with a label for output.
struct MonotonicityVariant {
    std::string label;
    std::size_t prior_switch_after = 5;
    VirtualMode virtual_mode = VirtualMode::always;
    std::size_t virtual_k = 5;
};

/// none / linear-prior-5 / virtual-always / mixed.
inline std::vector<MonotonicityVariant> monotonicity_grid(std::size_t switch_after = 5) {
    return {
        {"none", 0, VirtualMode::off, 0},
        {"linear-prior-" + std::to_string(switch_after), switch_after, VirtualMode::off, 0},
        {"virtual-always", 0, VirtualMode::always, 0},
        {"mixed", switch_after, VirtualMode::always, 0},
    };
}

struct ExperimentConfig {
    std::size_t dims = 5;
    double sigma_user = 0.01;
    std::optional<double> sigma_model;  // unset: same as sigma_user
    std::size_t budget = 25;
    std::size_t runs = 100;
    QueryType query_type = QueryType::ranking;
    std::size_t top_k = 3;
    MonotonicityVariant variant{"mixed", 5, VirtualMode::always, 0};
    std::uint64_t seed = 42;
    std::size_t pool_size = 1000;
    std::size_t pcs_count = 75;
    KernelConfig kernel;
    unsigned threads = 0;  // 0 = hardware concurrency

    void validate() const {
        if (runs < 1) throw InputError("runs must be >= 1");
        if (budget < 1) throw InputError("query budget must be >= 1");
        if (dims < 2) throw InputError("dims must be >= 2");
        if (!(sigma_user >= 0.0)) throw InputError("user noise must be >= 0");
        if (sigma_model && !(*sigma_model > 0.0)) throw InputError("model noise must be > 0");
        if (!sigma_model && !(sigma_user > 0.0)) throw InputError("zero user noise needs an explicit model noise");
    }
};

/// Seed of run r; independent of the query type and variant so that
/// configurations are compared on the same utilities and candidate sets.
inline std::uint64_t run_seed(std::uint64_t master, std::size_t run) { return Rng::derive_seed(master, run); }

/// Utility and candidate set of a run.
struct RunProblem {
    synthetic::UtilitySpec utility;
    synthetic::SyntheticPCS pcs;
};

inline RunProblem make_problem(const ExperimentConfig& cfg, std::uint64_t seed) {
    Rng urng(Rng::derive_seed(seed, 1));
    Rng prng(Rng::derive_seed(seed, 2));
    auto utility = synthetic::sample_utility(urng, cfg.dims);
    auto pcs = synthetic::generate_pcs(prng, cfg.dims, cfg.pool_size, cfg.pcs_count);
    return {std::move(utility), std::move(pcs)};
}

inline SessionConfig session_config_for(const ExperimentConfig& cfg, const synthetic::SyntheticPCS& pcs,
                                        std::uint64_t seed) {
    SessionConfig s;
    s.query_type = cfg.query_type;
    s.top_k = cfg.top_k;
    s.kernel = cfg.kernel;
    s.fit.sigma = cfg.sigma_model.value_or(cfg.sigma_user);
    s.prior_switch_after = cfg.variant.prior_switch_after;
    s.virtual_mode = cfg.variant.virtual_mode;
    s.virtual_k = cfg.variant.virtual_k;
    s.reference_points = ReferencePoints::hypercube;
    for (std::size_t i = 0; i < pcs.points.size(); ++i)
        s.candidates.push_back({ItemId{static_cast<std::int64_t>(i)}, pcs.points[i].to_vector(), {}});
    s.seed = Rng::derive_seed(seed, 3);
    return s;
}

/// Drives a session with a simulated user on a known problem and returns the
/// true utility of the session's current best after every query.
inline std::vector<double> run_problem(const ExperimentConfig& cfg, const RunProblem& problem, std::uint64_t seed,
                                       Session* keep = nullptr) {
    Session session("run-" + std::to_string(seed), session_config_for(cfg, problem.pcs, seed));
    Rng user_rng(Rng::derive_seed(seed, 4));
    std::vector<double> trace;
    trace.reserve(cfg.budget);
    for (std::size_t q = 0; q < cfg.budget; ++q) {
        if (!session.finished()) {
            std::vector<std::pair<ItemId, PolicyValue>> items;
            for (const auto& it : session.next_query().items) items.emplace_back(it.id, it.value);
            session.submit_response(
                synthetic::simulate_response(problem.utility, cfg.query_type, items, cfg.sigma_user, user_rng, cfg.top_k));
        }
        const ItemId best = session.current_best().first;
        trace.push_back(synthetic::eval_utility(problem.utility, session.candidates().value(best)));
    }
    if (keep) *keep = std::move(session);
    return trace;
}

inline std::vector<double> run_single(const ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    return run_problem(cfg, make_problem(cfg, seed), seed);
}

/// Per-query mean and standard error over runs.
struct UtilityCurve {
    std::string label;
    QueryType query_type = QueryType::ranking;
    double sigma_user = 0.0;
    std::vector<double> mean;
    std::vector<double> stderr_;
    std::vector<std::vector<double>> traces;  // successful runs, in seed order
    std::vector<std::string> failures;        // "run <i>: <what>"
};

inline void aggregate(UtilityCurve& curve, std::size_t budget) {
    curve.mean.assign(budget, 0.0);
    curve.stderr_.assign(budget, 0.0);
    const auto n = curve.traces.size();
    if (n == 0) return;
    for (std::size_t q = 0; q < budget; ++q) {
        double sum = 0.0;
        for (const auto& t : curve.traces) sum += t[q];
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (const auto& t : curve.traces) ss += (t[q] - mean) * (t[q] - mean);
        curve.mean[q] = mean;
        curve.stderr_[q] = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    }
}

/// Runs cfg.runs independent seeds (in parallel when threads allow) and
/// reduces them in seed order. Failed runs are recorded and skipped.
inline UtilityCurve run_batch(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<std::vector<double>> traces(cfg.runs);
    std::vector<std::string> errors(cfg.runs);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t r; (r = next.fetch_add(1)) < cfg.runs;) {
            try {
                traces[r] = run_single(cfg, run_seed(cfg.seed, r));
            } catch (const std::exception& e) {
                errors[r] = "run " + std::to_string(r) + ": " + e.what();
            }
        }
    };
    unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, cfg.runs));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    UtilityCurve curve{cfg.variant.label, cfg.query_type, cfg.sigma_user, {}, {}, {}, {}};
    for (std::size_t r = 0; r < cfg.runs; ++r) {
        if (!errors[r].empty()) curve.failures.push_back(errors[r]);
        else curve.traces.push_back(std::move(traces[r]));
    }
    aggregate(curve, cfg.budget);
    return curve;
}

/// Pools the traces of several curves (e.g. all query types) into one.
inline UtilityCurve pool_curves(const std::string& label, const std::vector<UtilityCurve>& curves, std::size_t budget) {
    UtilityCurve out{label, curves.empty() ? QueryType::ranking : curves.front().query_type,
                     curves.empty() ? 0.0 : curves.front().sigma_user, {}, {}, {}, {}};
    for (const auto& c : curves) {
        out.traces.insert(out.traces.end(), c.traces.begin(), c.traces.end());
        out.failures.insert(out.failures.end(), c.failures.begin(), c.failures.end());
    }
    aggregate(out, budget);
    return out;
}

inline constexpr const char* kCsvHeader = "label,query_type,noise,query_index,mean,stderr,runs";

/// Fixed formatting so output is byte-identical across platforms.
inline void write_csv(std::ostream& os, const std::vector<UtilityCurve>& curves) {
    os << kCsvHeader << '\n';
    char buf[256];
    for (const auto& c : curves) {
        for (std::size_t q = 0; q < c.mean.size(); ++q) {
            std::snprintf(buf, sizeof buf, "%s,%s,%.4f,%zu,%.6f,%.6f,%zu\n", c.label.c_str(),
                          to_string(c.query_type).c_str(), c.sigma_user, q + 1, c.mean[q], c.stderr_[q], c.traces.size());
            os << buf;
        }
    }
}

}  // namespace prefgp::experiments
