#include "ssg/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "ssg/io.hpp"
#include "ssg/parallel.hpp"
#include "ssg/preprocess.hpp"

namespace ssg {

namespace {

using nlohmann::json;

constexpr const char* kVersion = "0.4.0";

template <typename T>
void take(const json& j, const char* key, T& out, std::set<std::string>& seen) {
    if (!j.contains(key)) return;
    seen.insert(key);
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw SpecError(std::string("config key '") + key + "': " + e.what());
    }
}

json topology_json(const TopologySpec& t) {
    return {{"kind", to_string(t.kind)},           {"p", t.p},
            {"n_hubs", t.n_hubs},                 {"q_true", t.q_true},
            {"within_prob", t.within_prob},       {"between_prob", t.between_prob},
            {"attachment_count", t.attachment_count}, {"bandwidth", t.bandwidth}};
}

TopologySpec topology_from_json(const json& j, TopologySpec t) {
    std::set<std::string> seen;
    std::string kind = to_string(t.kind);
    take(j, "kind", kind, seen);
    t.kind = topology_from_string(kind);
    take(j, "p", t.p, seen);
    take(j, "n_hubs", t.n_hubs, seen);
    take(j, "q_true", t.q_true, seen);
    take(j, "within_prob", t.within_prob, seen);
    take(j, "between_prob", t.between_prob, seen);
    take(j, "attachment_count", t.attachment_count, seen);
    take(j, "bandwidth", t.bandwidth, seen);
    for (const auto& [k, v] : j.items()) {
        if (!seen.count(k)) throw SpecError("unknown topology key '" + k + "'");
    }
    return t;
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double mean(const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

bool is_subset(const Adjacency& a, const Adjacency& b) {
    return ((a.array() != 0) && (b.array() == 0)).count() == 0;
}

}  // namespace

void RunConfig::validate() const {
    if (input.has_value() == synthetic.has_value()) {
        throw SpecError("exactly one of an input file or a synthetic topology must be given");
    }
    if (synthetic) {
        synthetic->topology.validate();
        if (synthetic->n < 2) throw SpecError("synthetic sample size must be >= 2");
        if (!(synthetic->beta > 0.0)) throw SpecError("beta must be positive");
    }
    if (replications < 1) throw SpecError("replications must be >= 1");
    if (threads < 1) throw SpecError("threads must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw SpecError("alpha must lie in (0, 1)");
    if (topologies.empty()) throw SpecError("benchmark needs at least one topology");
    if (calibrate) {
        grid.validate();
    } else {
        Hyperparameters{1.0, sigma1, Q, alpha}.validate();
        if (!(c > 0.0)) throw SpecError("c must be positive");
    }
    vem_config().validate();
}

VemConfig RunConfig::vem_config() const {
    VemConfig v;
    v.max_outer_iter = max_outer_iter;
    v.max_vem_iter = max_vem_iter;
    v.elbo_tol = elbo_tol;
    v.k_tol = k_tol;
    v.tau_damping = tau_damping;
    v.initial_edge_prob = initial_edge_prob;
    v.seed = seed;
    v.threads = threads;
    return v;
}

json to_json(const RunConfig& config) {
    json j;
    j["input"] = config.input ? json(config.input->string()) : json(nullptr);
    if (config.synthetic) {
        j["synthetic"] = {{"topology", topology_json(config.synthetic->topology)},
                          {"n", config.synthetic->n},
                          {"gamma", config.synthetic->gamma},
                          {"beta", config.synthetic->beta}};
    } else {
        j["synthetic"] = nullptr;
    }
    json kinds = json::array();
    for (auto k : config.topologies) kinds.push_back(to_string(k));
    j["topologies"] = kinds;
    j["calibrate"] = config.calibrate;
    j["grid"] = {{"c", config.grid.c_grid},           {"sigma1", config.grid.sigma_grid},
                 {"sigma_lower", config.grid.sigma_lower}, {"sigma_upper", config.grid.sigma_upper},
                 {"q_min", config.grid.q_min},         {"q_max", config.grid.q_max}};
    j["c"] = config.c;
    j["sigma1"] = config.sigma1;
    j["Q"] = config.Q;
    j["alpha"] = config.alpha;
    j["seed"] = config.seed;
    j["replications"] = config.replications;
    j["output_dir"] = config.output_dir.string();
    j["standardize"] = config.standardize;
    j["nonparanormal"] = config.nonparanormal;
    j["labels"] = config.labels ? json(config.labels->string()) : json(nullptr);
    j["threads"] = config.threads;
    j["max_outer_iter"] = config.max_outer_iter;
    j["max_vem_iter"] = config.max_vem_iter;
    j["elbo_tol"] = config.elbo_tol;
    j["k_tol"] = config.k_tol;
    j["tau_damping"] = config.tau_damping;
    j["initial_edge_prob"] = config.initial_edge_prob ? json(*config.initial_edge_prob) : json(nullptr);
    return j;
}

RunConfig config_from_json(const json& j, RunConfig c) {
    if (!j.is_object()) throw SpecError("config must be a JSON object");
    std::set<std::string> seen;
    auto optional_path = [&](const char* key, std::optional<std::filesystem::path>& out) {
        if (!j.contains(key)) return;
        seen.insert(key);
        if (j.at(key).is_null()) {
            out.reset();
        } else if (j.at(key).is_string()) {
            out = j.at(key).get<std::string>();
        } else {
            throw SpecError(std::string("config key '") + key + "' must be a string or null");
        }
    };
    optional_path("input", c.input);
    optional_path("labels", c.labels);
    if (j.contains("synthetic")) {
        seen.insert("synthetic");
        const json& s = j.at("synthetic");
        if (s.is_null()) {
            c.synthetic.reset();
        } else {
            SyntheticSource src = c.synthetic.value_or(SyntheticSource{});
            std::set<std::string> sseen;
            if (s.contains("topology")) {
                sseen.insert("topology");
                src.topology = topology_from_json(s.at("topology"), src.topology);
            }
            take(s, "n", src.n, sseen);
            take(s, "gamma", src.gamma, sseen);
            take(s, "beta", src.beta, sseen);
            for (const auto& [k, v] : s.items()) {
                if (!sseen.count(k)) throw SpecError("unknown synthetic key '" + k + "'");
            }
            c.synthetic = src;
        }
    }
    if (j.contains("topologies")) {
        seen.insert("topologies");
        std::vector<std::string> names;
        take(j, "topologies", names, seen);
        c.topologies.clear();
        for (const auto& n : names) c.topologies.push_back(topology_from_string(n));
    }
    if (j.contains("grid")) {
        seen.insert("grid");
        std::set<std::string> gseen;
        const json& g = j.at("grid");
        take(g, "c", c.grid.c_grid, gseen);
        take(g, "sigma1", c.grid.sigma_grid, gseen);
        take(g, "sigma_lower", c.grid.sigma_lower, gseen);
        take(g, "sigma_upper", c.grid.sigma_upper, gseen);
        take(g, "q_min", c.grid.q_min, gseen);
        take(g, "q_max", c.grid.q_max, gseen);
        for (const auto& [k, v] : g.items()) {
            if (!gseen.count(k)) throw SpecError("unknown grid key '" + k + "'");
        }
    }
    take(j, "calibrate", c.calibrate, seen);
    take(j, "c", c.c, seen);
    take(j, "sigma1", c.sigma1, seen);
    take(j, "Q", c.Q, seen);
    take(j, "alpha", c.alpha, seen);
    take(j, "seed", c.seed, seen);
    take(j, "replications", c.replications, seen);
    std::string out = c.output_dir.string();
    take(j, "output_dir", out, seen);
    c.output_dir = out;
    take(j, "standardize", c.standardize, seen);
    take(j, "nonparanormal", c.nonparanormal, seen);
    take(j, "threads", c.threads, seen);
    take(j, "max_outer_iter", c.max_outer_iter, seen);
    take(j, "max_vem_iter", c.max_vem_iter, seen);
    take(j, "elbo_tol", c.elbo_tol, seen);
    take(j, "k_tol", c.k_tol, seen);
    take(j, "tau_damping", c.tau_damping, seen);
    if (j.contains("initial_edge_prob")) {
        seen.insert("initial_edge_prob");
        const json& v = j.at("initial_edge_prob");
        if (v.is_null()) {
            c.initial_edge_prob.reset();
        } else if (v.is_number()) {
            c.initial_edge_prob = v.get<double>();
        } else {
            throw SpecError("config key 'initial_edge_prob' must be a number or null");
        }
    }
    // Written by run_inference alongside the settings; ignored on reload.
    for (const char* info : {"version", "command"}) {
        if (j.contains(info)) seen.insert(info);
    }
    for (const auto& [k, v] : j.items()) {
        if (!seen.count(k)) throw SpecError("unknown config key '" + k + "'");
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return config_from_json(j, std::move(base));
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(base) ^ stream) ^ index);
}

std::string library_version() { return kVersion; }

PreparedData prepare_data(const RunConfig& config) {
    PreparedData out{config.input ? ingest_csv(*config.input) : ObservationMatrix{}, std::nullopt};
    if (config.synthetic) {
        const SyntheticSource& s = *config.synthetic;
        GroundTruth truth = generate_ground_truth(s.topology, s.gamma, s.beta, derive_seed(config.seed, 0, 0));
        out.data = sample_gaussian(truth.precision, s.n, derive_seed(config.seed, 1, 0));
        out.truth = std::move(truth);
    }
    if (config.nonparanormal) out.data = nonparanormal(out.data);
    if (config.standardize) out.data = standardize(out.data);
    return out;
}

InferenceResult infer(const ObservationMatrix& data, const RunConfig& config,
                      const std::optional<std::vector<int>>& labels) {
    VemConfig vem = config.vem_config();
    InferenceResult out;
    int label_q = 0;
    if (labels) {
        if (static_cast<Eigen::Index>(labels->size()) != data.p()) {
            throw SpecError("label file has " + std::to_string(labels->size()) + " entries for " +
                            std::to_string(data.p()) + " variables");
        }
        label_q = *std::max_element(labels->begin(), labels->end()) + 1;
        vem.fixed_labels = *labels;
    }
    if (config.calibrate) {
        CalibrationGrid grid = config.grid;
        grid.alpha = config.alpha;
        if (labels) grid.q_min = grid.q_max = label_q;
        CalibrationResult cal = calibrate_all(data, grid, vem);
        out.hyper = Hyperparameters{cal.best_xi0, cal.best_sigma1, cal.best_Q, config.alpha};
        out.fit = std::move(cal.best_fit);
        out.decision = std::move(cal.best_decision);
        out.bic_table = std::move(cal.bic_table);
        out.max_kkt_residual = 0.0;
        out.min_vem_step_delta = std::numeric_limits<double>::infinity();
        for (const auto& row : *out.bic_table) {
            if (row.failed) continue;
            out.max_kkt_residual = std::max(out.max_kkt_residual, row.max_kkt_residual);
            out.min_vem_step_delta = std::min(out.min_vem_step_delta, row.min_vem_step_delta);
        }
    } else {
        out.hyper = Hyperparameters{spike_from_constant(config.c, data.n(), data.p()), config.sigma1,
                                    labels ? label_q : config.Q, config.alpha};
        out.fit = fit(data, out.hyper, vem);
        out.decision = decide(out.fit, out.hyper, config.alpha);
        out.max_kkt_residual = out.fit.diagnostics.max_kkt_residual;
        out.min_vem_step_delta = out.fit.diagnostics.min_vem_step_delta;
    }
    return out;
}

void write_bic_table(const std::filesystem::path& path, const std::vector<BicRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open " + path.string() + " for writing");
    out << "Q,c,xi0,sigma1,n_edges,pseudo_loglik,bic_hyper,bic_q,max_kkt_residual,min_vem_step_delta,failed\n";
    for (const auto& r : rows) {
        out << r.Q << ',' << format_real(r.c) << ',' << format_real(r.xi0) << ',' << format_real(r.sigma1) << ','
            << r.n_edges << ',' << format_real(r.pseudo_loglik) << ',' << format_real(r.bic_hyper) << ','
            << format_real(r.bic_q) << ',' << format_real(r.max_kkt_residual) << ','
            << format_real(r.min_vem_step_delta) << ',' << (r.failed ? 1 : 0) << '\n';
    }
}

InferenceResult run_inference(const RunConfig& config) {
    config.validate();
    PreparedData prepared = prepare_data(config);
    std::optional<std::vector<int>> labels;
    if (config.labels) labels = read_labels_csv(*config.labels);
    InferenceResult res = infer(prepared.data, config, labels);

    const auto& dir = config.output_dir;
    std::filesystem::create_directories(dir);
    const auto& names = prepared.data.names();
    write_edge_list(dir / "edges.csv", res.fit.precision, res.decision);
    write_adjacency_csv(dir / "adjacency.csv", res.decision.adjacency, names);
    write_dot(dir / "graph.dot", res.decision, names);
    write_labels_csv(dir / "clusters.csv", res.decision.z_hat);
    if (res.bic_table) write_bic_table(dir / "bic_table.csv", *res.bic_table);
    if (prepared.truth) write_adjacency_csv(dir / "true_adjacency.csv", prepared.truth->adjacency, names);

    json manifest = to_json(config);
    manifest["version"] = library_version();
    manifest["command"] = config.calibrate ? "calibrate" : "fit";
    std::ofstream m(dir / "manifest.json", std::ios::binary);
    m << manifest.dump(2) << '\n';
    return res;
}

Adjacency partial_correlation_baseline(const ObservationMatrix& data, int n_edges) {
    const Eigen::Index p = data.p();
    const Matrix pc = shrunk_partial_correlation(data.sample_covariance(), 0.1);
    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    pairs.reserve(pair_count(p));
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = i + 1; j < p; ++j) pairs.emplace_back(i, j);
    }
    std::stable_sort(pairs.begin(), pairs.end(), [&](const auto& a, const auto& b) {
        return std::abs(pc(a.first, a.second)) > std::abs(pc(b.first, b.second));
    });
    Adjacency A = Adjacency::Zero(p, p);
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(std::max(n_edges, 0)), pairs.size());
    for (std::size_t m = 0; m < k; ++m) {
        A(pairs[m].first, pairs[m].second) = A(pairs[m].second, pairs[m].first) = 1;
    }
    return A;
}

std::vector<double> nesting_alpha_grid() {
    std::vector<double> g;
    for (int k = 1; k <= 20; ++k) g.push_back(0.01 * k);
    return g;
}

std::vector<BenchmarkRecord> run_benchmark(const RunConfig& config, const Selector& selector) {
    config.validate();
    if (!config.synthetic) throw SpecError("benchmark needs a synthetic topology");
    const SyntheticSource& src = *config.synthetic;
    const auto reps = static_cast<std::size_t>(config.replications);
    std::vector<BenchmarkRecord> records(config.topologies.size() * reps);

    RunConfig inner = config;
    inner.threads = 1;

    parallel_for(records.size(), config.threads, [&](std::size_t job) {
        const TopologyKind kind = config.topologies[job / reps];
        const auto r = static_cast<int>(job % reps);
        const auto stream = 2 * static_cast<std::uint64_t>(kind);
        BenchmarkRecord& rec = records[job];
        rec.topology = kind;
        rec.replication = r;
        rec.seed = derive_seed(config.seed, stream, static_cast<std::uint64_t>(r));
        const auto t0 = std::chrono::steady_clock::now();
        try {
            TopologySpec spec = src.topology;
            spec.kind = kind;
            const GroundTruth truth = generate_ground_truth(spec, src.gamma, src.beta, rec.seed);
            ObservationMatrix data =
                sample_gaussian(truth.precision, src.n, derive_seed(config.seed, stream + 1, static_cast<std::uint64_t>(r)));
            if (config.nonparanormal) data = nonparanormal(data);
            if (config.standardize) data = standardize(data);

            Adjacency selected;
            if (selector) {
                selected = selector(truth, data);
            } else {
                RunConfig job_cfg = inner;
                job_cfg.seed = rec.seed;
                const InferenceResult res = infer(data, job_cfg);
                selected = res.decision.adjacency;
                rec.selected_Q = res.hyper.Q;
                rec.max_kkt_residual = res.max_kkt_residual;
                rec.min_vem_step_delta = res.min_vem_step_delta;
                const Eigen::Index p = data.p();
                Adjacency prev = Adjacency::Zero(p, p);
                for (double a : nesting_alpha_grid()) {
                    Adjacency cur = select_graph(res.decision.q_values, p, a);
                    rec.nested = rec.nested && is_subset(prev, cur);
                    prev = std::move(cur);
                }
            }
            const DiscoveryRates rates = fdp_tdp(selected, truth.adjacency);
            rec.fdp = rates.fdp;
            rec.tdp = rates.tdp;
            rec.n_edges = edge_count(selected);
            const DiscoveryRates base = fdp_tdp(partial_correlation_baseline(data, rec.n_edges), truth.adjacency);
            rec.baseline_fdp = base.fdp;
            rec.baseline_tdp = base.tdp;
        } catch (const Error& e) {
            rec.failed = true;
            rec.error = e.what();
        }
        rec.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });
    return records;
}

std::vector<BenchmarkSummary> summarize(const std::vector<BenchmarkRecord>& records) {
    std::vector<BenchmarkSummary> out;
    for (const auto& rec : records) {
        auto it = std::find_if(out.begin(), out.end(), [&](const auto& s) { return s.topology == rec.topology; });
        if (it == out.end()) {
            out.push_back(BenchmarkSummary{});
            it = out.end() - 1;
            it->topology = rec.topology;
        }
    }
    for (auto& s : out) {
        std::vector<double> fdp, tdp, btdp;
        for (const auto& rec : records) {
            if (rec.topology != s.topology) continue;
            ++s.replications;
            if (rec.failed) {
                ++s.failures;
                continue;
            }
            fdp.push_back(rec.fdp);
            tdp.push_back(rec.tdp);
            btdp.push_back(rec.baseline_tdp);
        }
        s.mean_fdp = mean(fdp);
        s.median_fdp = median(fdp);
        s.mean_tdp = mean(tdp);
        s.median_tdp = median(tdp);
        s.mean_baseline_tdp = mean(btdp);
    }
    return out;
}

void write_benchmark(const std::filesystem::path& dir, const std::vector<BenchmarkRecord>& records,
                     const RunConfig& config) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "benchmark.csv", std::ios::binary);
        out << "topology,replication,seed,fdp,tdp,n_edges,baseline_fdp,baseline_tdp,selected_Q,"
               "max_kkt_residual,min_vem_step_delta,nested,failed\n";
        for (const auto& r : records) {
            out << to_string(r.topology) << ',' << r.replication << ',' << r.seed << ',' << format_real(r.fdp) << ','
                << format_real(r.tdp) << ',' << r.n_edges << ',' << format_real(r.baseline_fdp) << ','
                << format_real(r.baseline_tdp) << ',' << r.selected_Q << ',' << format_real(r.max_kkt_residual)
                << ',' << format_real(r.min_vem_step_delta) << ',' << (r.nested ? 1 : 0) << ','
                << (r.failed ? 1 : 0) << '\n';
        }
    }
    {
        std::ofstream out(dir / "summary.csv", std::ios::binary);
        out << "topology,replications,failures,mean_fdp,median_fdp,mean_tdp,median_tdp,mean_baseline_tdp\n";
        for (const auto& s : summarize(records)) {
            out << to_string(s.topology) << ',' << s.replications << ',' << s.failures << ','
                << format_real(s.mean_fdp) << ',' << format_real(s.median_fdp) << ',' << format_real(s.mean_tdp)
                << ',' << format_real(s.median_tdp) << ',' << format_real(s.mean_baseline_tdp) << '\n';
        }
    }
    {
        std::ofstream out(dir / "timing.csv", std::ios::binary);
        out << "topology,replication,runtime_seconds,error\n";
        for (const auto& r : records) {
            std::string err = r.error;
            std::replace(err.begin(), err.end(), ',', ';');
            std::replace(err.begin(), err.end(), '\n', ' ');
            out << to_string(r.topology) << ',' << r.replication << ',' << format_real(r.runtime_seconds) << ','
                << err << '\n';
        }
    }
    json manifest = to_json(config);
    manifest["version"] = library_version();
    manifest["command"] = "benchmark";
    std::ofstream m(dir / "manifest.json", std::ios::binary);
    m << manifest.dump(2) << '\n';
}

}  // namespace ssg
