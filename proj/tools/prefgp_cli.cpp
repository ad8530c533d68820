// prefgp command line: synthetic experiments, the session service, and
// candidate-set generation.

#include <csignal>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <prefgp/prefgp.hpp>
#include <prefgp/service.hpp>

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

using namespace prefgp;

std::size_t parse_prior_switch(const std::string& s) {
    if (s == "always") return MonotonicityConfig::kAlwaysLinear;
    try {
        std::size_t pos = 0;
        const auto v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw CLI::ValidationError("--prior-switch", "expected a non-negative integer or 'always'");
    }
}

// off | always | first:K
std::pair<VirtualMode, std::size_t> parse_virtual(const std::string& s) {
    if (s == "off") return {VirtualMode::off, 0};
    if (s == "always") return {VirtualMode::always, 0};
    if (s.rfind("first:", 0) == 0) {
        try {
            const auto k = std::stoull(s.substr(6));
            if (k > 0) return {VirtualMode::first_k, static_cast<std::size_t>(k)};
        } catch (const std::exception&) {
        }
    }
    throw CLI::ValidationError("--virtual", "expected off, always or first:K");
}

struct SimulateArgs {
    std::size_t dims = 5;
    double noise = 0.01;
    double model_noise = 0.0;
    std::size_t queries = 25;
    std::size_t runs = 100;
    std::string query_type = "ranking";
    std::size_t top_k = 3;
    std::string prior_switch = "5";
    std::string virtual_mode = "always";
    std::string grid = "single";
    std::uint64_t seed = 42;
    std::size_t pool_size = 1000;
    std::size_t pcs_size = 75;
    double length_scale = 0.2;
    unsigned threads = 0;
    std::string out;
    std::string bundle;
};

int run_simulate(const SimulateArgs& a) {
    experiments::ExperimentConfig base;
    base.dims = a.dims;
    base.sigma_user = a.noise;
    if (a.model_noise > 0.0) base.sigma_model = a.model_noise;
    base.budget = a.queries;
    base.runs = a.runs;
    base.top_k = a.top_k;
    base.seed = a.seed;
    base.pool_size = a.pool_size;
    base.pcs_count = a.pcs_size;
    base.kernel.length_scale = a.length_scale;
    base.threads = a.threads;

    const auto switch_after = parse_prior_switch(a.prior_switch);
    std::vector<experiments::MonotonicityVariant> variants;
    if (a.grid == "monotonicity") {
        variants = experiments::monotonicity_grid(switch_after == MonotonicityConfig::kAlwaysLinear ? 5 : switch_after);
    } else {
        const auto [mode, k] = parse_virtual(a.virtual_mode);
        const std::string label = "prior-" + a.prior_switch + "_virtual-" + a.virtual_mode;
        variants.push_back({label, switch_after, mode, k});
    }
    std::vector<QueryType> types;
    if (a.query_type == "all")
        types = {QueryType::pairwise, QueryType::ranking, QueryType::clustering, QueryType::toprank};
    else
        types = {parse_query_type(a.query_type)};

    std::vector<experiments::UtilityCurve> curves;
    std::size_t failures = 0;
    for (const auto& v : variants) {
        for (auto t : types) {
            auto cfg = base;
            cfg.variant = v;
            cfg.query_type = t;
            auto curve = experiments::run_batch(cfg);
            for (const auto& f : curve.failures) std::cerr << v.label << "/" << to_string(t) << ": " << f << '\n';
            failures += curve.failures.size();
            curves.push_back(std::move(curve));
        }
    }

    if (a.out.empty()) {
        experiments::write_csv(std::cout, curves);
    } else {
        std::ofstream os(a.out, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + a.out);
        experiments::write_csv(os, curves);
    }

    if (!a.bundle.empty()) {
        json runs = json::array();
        for (std::size_t r = 0; r < base.runs; ++r) {
            const auto seed = experiments::run_seed(base.seed, r);
            const auto problem = experiments::make_problem(base, seed);
            runs.push_back({{"run", r}, {"seed", seed}, {"utility", problem.utility}, {"pcs", problem.pcs}});
        }
        std::ofstream os(a.bundle, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + a.bundle);
        os << json{{"dims", base.dims}, {"seed", base.seed}, {"runs", runs}}.dump(1) << '\n';
    }
    return failures == 0 ? 0 : kExitRuntime;
}

httplib::Server* g_server = nullptr;

int run_serve(const std::string& host, int port, const std::string& log_dir) {
    service::SessionService svc(log_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(log_dir));
    httplib::Server server;
    svc.mount(server);
    g_server = &server;
    std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
    std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });

    int bound = port;
    if (port == 0) {
        bound = server.bind_to_any_port(host);
    } else if (!server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) {
        std::cerr << "cannot bind " << host << ":" << port << '\n';
        return kExitRuntime;
    }
    std::cout << "listening on " << host << ":" << bound << " (" << svc.size() << " sessions restored)" << std::endl;
    server.listen_after_bind();
    return 0;
}

int run_gen_pcs(std::size_t dims, std::size_t count, std::size_t pool, std::uint64_t seed, const std::string& out) {
    Rng rng(seed);
    const auto pcs = synthetic::generate_pcs(rng, dims, std::max(pool, count), count);
    const std::string text = json(pcs).dump(1) + "\n";
    if (out.empty()) {
        std::cout << text;
    } else {
        std::ofstream os(out, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + out);
        os << text;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Preference elicitation over Pareto coverage sets with Gaussian processes"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Run synthetic-user experiments and write utility curves as CSV");
    simulate->add_option("--dims", sim.dims, "Number of objectives")->check(CLI::Range(2, 64));
    simulate->add_option("--noise", sim.noise, "Simulated-user utility noise sigma")->check(CLI::NonNegativeNumber);
    simulate->add_option("--model-noise", sim.model_noise, "Model-side comparison noise (default: --noise)");
    simulate->add_option("--queries", sim.queries, "Query budget per run")->check(CLI::PositiveNumber);
    simulate->add_option("--runs", sim.runs, "Runs per configuration")->check(CLI::PositiveNumber);
    simulate->add_option("--query-type", sim.query_type, "pairwise | ranking | clustering | toprank | all")
        ->check(CLI::IsMember({"pairwise", "ranking", "clustering", "toprank", "all"}));
    simulate->add_option("--top-k", sim.top_k, "k for top-rank queries")->check(CLI::PositiveNumber);
    simulate->add_option("--prior-switch", sim.prior_switch, "Queries with a linear prior mean (integer or 'always')");
    simulate->add_option("--virtual", sim.virtual_mode, "Virtual comparisons: off | always | first:K");
    simulate->add_option("--grid", sim.grid, "single | monotonicity")->check(CLI::IsMember({"single", "monotonicity"}));
    simulate->add_option("--seed", sim.seed, "Master seed");
    simulate->add_option("--pool-size", sim.pool_size, "Uniform pool size for candidate generation");
    simulate->add_option("--pcs-size", sim.pcs_size, "Candidate set size")->check(CLI::Range(2, 100000));
    simulate->add_option("--length-scale", sim.length_scale, "Kernel length scale")->check(CLI::PositiveNumber);
    simulate->add_option("--threads", sim.threads, "Worker threads (0 = all cores)");
    simulate->add_option("--out", sim.out, "CSV output path (default: stdout)");
    simulate->add_option("--bundle", sim.bundle, "Write sampled utilities and candidate sets as JSON");

    std::string host = "127.0.0.1";
    int port = 8080;
    std::string log_dir;
    auto* serve = app.add_subcommand("serve", "Run the session HTTP service");
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port (0 = any free port)")->check(CLI::Range(0, 65535));
    serve->add_option("--log-dir", log_dir, "Directory for durable session event logs");

    std::size_t dims = 5, count = 75, pool = 1000;
    std::uint64_t seed = 42;
    std::string out;
    auto* gen = app.add_subcommand("gen-pcs", "Generate a random non-dominated candidate set as JSON");
    gen->add_option("--dims", dims, "Number of objectives")->check(CLI::Range(2, 64));
    gen->add_option("--count", count, "Target number of candidates")->check(CLI::Range(2, 100000));
    gen->add_option("--pool-size", pool, "Uniform pool size");
    gen->add_option("--seed", seed, "Seed");
    gen->add_option("--out", out, "Output path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (*simulate) return run_simulate(sim);
        if (*serve) return run_serve(host, port, log_dir);
        if (*gen) return run_gen_pcs(dims, count, pool, seed, out);
    } catch (const CLI::ValidationError& e) {
        std::cerr << e.what() << '\n';
        return kExitUsage;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}
