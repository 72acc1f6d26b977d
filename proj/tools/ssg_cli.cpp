// ssg: command-line front end for graph inference, calibration and benchmarks.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ssg/io.hpp"
#include "ssg/pipeline.hpp"
#include "ssg/preprocess.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

// Values collected from the command line; only options actually given
// override the config file.
struct Flags {
    std::string config;
    std::string input;
    std::string topology;
    int p = 0;
    int n = 0;
    double gamma = 0.0;
    double beta = 0.0;
    int n_hubs = 0;
    int q_true = 0;
    double within = 0.0;
    double between = 0.0;
    int bandwidth = 0;
    std::vector<std::string> topologies;
    double c = 0.0;
    double sigma1 = 0.0;
    int Q = 0;
    std::vector<double> c_grid;
    std::vector<double> sigma_grid;
    int q_min = 0;
    int q_max = 0;
    double alpha = 0.0;
    std::uint64_t seed = 0;
    int replications = 0;
    std::string out;
    std::string labels;
    int threads = 0;
    int max_outer_iter = 0;
};

struct Options {
    std::vector<CLI::Option*> all;
    CLI::Option* get(const std::string& name) const {
        for (auto* o : all) {
            if (o->check_name(name)) return o;
        }
        return nullptr;
    }
    bool given(const std::string& name) const {
        auto* o = get(name);
        return o != nullptr && o->count() > 0;
    }
};

void add_data_flags(CLI::App& cmd, Flags& f, Options& o) {
    o.all.push_back(cmd.add_option("--config", f.config, "JSON config file; flags override its values"));
    o.all.push_back(cmd.add_option("--input", f.input, "numeric CSV with a header row"));
    o.all.push_back(cmd.add_option("--topology", f.topology, "simulate from hub|sbm|scale_free|band"));
    o.all.push_back(cmd.add_option("--p", f.p, "simulated variables"));
    o.all.push_back(cmd.add_option("--n", f.n, "simulated observations"));
    o.all.push_back(cmd.add_option("--gamma", f.gamma, "off-diagonal precision value"));
    o.all.push_back(cmd.add_option("--beta", f.beta, "smallest eigenvalue of the precision"));
    o.all.push_back(cmd.add_option("--n-hubs", f.n_hubs));
    o.all.push_back(cmd.add_option("--q-true", f.q_true));
    o.all.push_back(cmd.add_option("--within", f.within, "sbm within-block edge probability"));
    o.all.push_back(cmd.add_option("--between", f.between, "sbm between-block edge probability"));
    o.all.push_back(cmd.add_option("--bandwidth", f.bandwidth));
    o.all.push_back(cmd.add_option("--seed", f.seed));
    o.all.push_back(cmd.add_option("--out", f.out, "output directory"));
    o.all.push_back(cmd.add_flag("--standardize", "centre and scale each column"));
    o.all.push_back(cmd.add_flag("--nonparanormal", "rank-Gaussianize each column"));
}

void add_model_flags(CLI::App& cmd, Flags& f, Options& o) {
    o.all.push_back(cmd.add_option("--c", f.c, "spike constant: xi0 = c sqrt(n log p)"));
    o.all.push_back(cmd.add_option("--sigma1", f.sigma1, "slab standard deviation"));
    o.all.push_back(cmd.add_option("--Q", f.Q, "number of blocks"));
    o.all.push_back(cmd.add_option("--c-grid", f.c_grid)->delimiter(','));
    o.all.push_back(cmd.add_option("--sigma-grid", f.sigma_grid)->delimiter(','));
    o.all.push_back(cmd.add_option("--q-min", f.q_min));
    o.all.push_back(cmd.add_option("--q-max", f.q_max));
    o.all.push_back(cmd.add_option("--alpha", f.alpha, "nominal FDR level"));
    o.all.push_back(cmd.add_option("--labels", f.labels, "known block labels (CSV, one per variable)"));
    o.all.push_back(cmd.add_option("--threads", f.threads));
    o.all.push_back(cmd.add_option("--max-outer-iter", f.max_outer_iter));
}

ssg::RunConfig build_config(const Flags& f, const Options& o, ssg::RunConfig base) {
    ssg::RunConfig c = f.config.empty() ? std::move(base) : ssg::load_config(f.config, std::move(base));
    if (o.given("--input")) {
        c.input = f.input;
        c.synthetic.reset();
    }
    const bool synth_flag = o.given("--topology") || o.given("--p") || o.given("--n") || o.given("--gamma") ||
                            o.given("--beta") || o.given("--n-hubs") || o.given("--q-true") ||
                            o.given("--within") || o.given("--between") || o.given("--bandwidth");
    if (synth_flag) {
        ssg::SyntheticSource s = c.synthetic.value_or(ssg::SyntheticSource{});
        if (o.given("--topology")) s.topology.kind = ssg::topology_from_string(f.topology);
        if (o.given("--p")) s.topology.p = f.p;
        if (o.given("--n")) s.n = f.n;
        if (o.given("--gamma")) s.gamma = f.gamma;
        if (o.given("--beta")) s.beta = f.beta;
        if (o.given("--n-hubs")) s.topology.n_hubs = f.n_hubs;
        if (o.given("--q-true")) s.topology.q_true = f.q_true;
        if (o.given("--within")) s.topology.within_prob = f.within;
        if (o.given("--between")) s.topology.between_prob = f.between;
        if (o.given("--bandwidth")) s.topology.bandwidth = f.bandwidth;
        c.synthetic = s;
        if (!o.given("--input")) c.input.reset();
    }
    if (o.given("--topologies")) {
        c.topologies.clear();
        for (const auto& t : f.topologies) c.topologies.push_back(ssg::topology_from_string(t));
    }
    if (o.given("--seed")) c.seed = f.seed;
    if (o.given("--out")) c.output_dir = f.out;
    if (o.given("--standardize")) c.standardize = true;
    if (o.given("--nonparanormal")) c.nonparanormal = true;
    if (o.given("--c")) c.c = f.c;
    if (o.given("--sigma1")) c.sigma1 = f.sigma1;
    if (o.given("--Q")) c.Q = f.Q;
    if (o.given("--c-grid")) c.grid.c_grid = f.c_grid;
    if (o.given("--sigma-grid")) c.grid.sigma_grid = f.sigma_grid;
    if (o.given("--q-min")) c.grid.q_min = f.q_min;
    if (o.given("--q-max")) c.grid.q_max = f.q_max;
    if (o.given("--alpha")) c.alpha = f.alpha;
    if (o.given("--labels")) c.labels = f.labels;
    if (o.given("--threads")) c.threads = f.threads;
    if (o.given("--max-outer-iter")) c.max_outer_iter = f.max_outer_iter;
    if (o.given("--replications")) c.replications = f.replications;
    if (o.given("--calibrate")) c.calibrate = true;
    if (o.given("--no-calibrate")) c.calibrate = false;
    return c;
}

void print_inference(const ssg::InferenceResult& r, const ssg::RunConfig& c) {
    std::cout << "Q=" << r.hyper.Q << " xi0=" << ssg::format_real(r.hyper.xi0)
              << " sigma1=" << ssg::format_real(r.hyper.sigma1) << " edges=" << ssg::edge_count(r.decision.adjacency)
              << " converged=" << (r.fit.converged ? "yes" : "no") << " -> " << c.output_dir.string() << '\n';
}

int cmd_generate(const ssg::RunConfig& c) {
    if (!c.synthetic) throw ssg::SpecError("generate needs --topology (or a synthetic config)");
    c.validate();
    ssg::RunConfig plain = c;
    plain.standardize = plain.nonparanormal = false;
    ssg::PreparedData d = ssg::prepare_data(plain);
    const auto& dir = c.output_dir;
    std::filesystem::create_directories(dir);
    const auto& names = d.data.names();
    ssg::write_matrix_csv(dir / "data.csv", d.data.data(), names);
    ssg::write_adjacency_csv(dir / "true_adjacency.csv", d.truth->adjacency, names);
    ssg::write_matrix_csv(dir / "true_precision.csv", d.truth->precision, names);
    if (!d.truth->labels.empty()) ssg::write_labels_csv(dir / "true_labels.csv", d.truth->labels);
    auto manifest = ssg::to_json(c);
    manifest["version"] = ssg::library_version();
    manifest["command"] = "generate";
    std::ofstream(dir / "manifest.json", std::ios::binary) << manifest.dump(2) << '\n';
    std::cout << "wrote n=" << d.data.n() << " p=" << d.data.p() << " edges=" << ssg::edge_count(d.truth->adjacency)
              << " -> " << dir.string() << '\n';
    return 0;
}

int cmd_transform(const ssg::RunConfig& c) {
    if (!c.input) throw ssg::SpecError("transform needs --input");
    if (!c.standardize && !c.nonparanormal) throw ssg::SpecError("transform needs --standardize and/or --nonparanormal");
    ssg::ObservationMatrix d = ssg::ingest_csv(*c.input);
    if (c.nonparanormal) d = ssg::nonparanormal(d);
    if (c.standardize) d = ssg::standardize(d);
    std::filesystem::create_directories(c.output_dir);
    ssg::write_matrix_csv(c.output_dir / "transformed.csv", d.data(), d.names());
    std::cout << "wrote " << (c.output_dir / "transformed.csv").string() << '\n';
    return 0;
}

int cmd_benchmark(const ssg::RunConfig& c) {
    c.validate();
    const auto records = ssg::run_benchmark(c);
    ssg::write_benchmark(c.output_dir, records, c);
    for (const auto& s : ssg::summarize(records)) {
        std::cout << ssg::to_string(s.topology) << ": reps=" << s.replications << " failures=" << s.failures
                  << " mean_fdp=" << s.mean_fdp << " median_fdp=" << s.median_fdp << " mean_tdp=" << s.mean_tdp
                  << " baseline_tdp=" << s.mean_baseline_tdp << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spike-and-slab graphical model with block-structured edge prior and FDR-controlled selection"};
    app.require_subcommand(1);

    Flags f;
    Options o;
    auto* generate = app.add_subcommand("generate", "simulate a benchmark graph and Gaussian data");
    auto* fit = app.add_subcommand("fit", "fit with fixed hyperparameters and select edges");
    auto* calibrate = app.add_subcommand("calibrate", "choose (xi0, sigma1, Q) by BIC, then select edges");
    auto* benchmark = app.add_subcommand("benchmark", "FDP/TDP over replicated simulations");
    auto* transform = app.add_subcommand("transform", "standardize or rank-Gaussianize a CSV");

    for (auto* cmd : {generate, fit, calibrate, benchmark, transform}) {
        Options local;
        add_data_flags(*cmd, f, local);
        if (cmd != generate && cmd != transform) add_model_flags(*cmd, f, local);
        if (cmd == benchmark) {
            local.all.push_back(cmd->add_option("--topologies", f.topologies)->delimiter(','));
            local.all.push_back(cmd->add_option("--replications", f.replications));
            local.all.push_back(cmd->add_flag("--calibrate", "calibrate every replication (default)"));
            local.all.push_back(cmd->add_flag("--no-calibrate", "use the fixed --c/--sigma1/--Q"));
        }
        o.all.insert(o.all.end(), local.all.begin(), local.all.end());
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    // Only the options of the chosen subcommand can be set; restrict lookups to it.
    CLI::App* chosen = app.get_subcommands().front();
    Options active;
    for (auto* opt : o.all) {
        for (const auto* mine : chosen->get_options()) {
            if (mine == opt) active.all.push_back(opt);
        }
    }

    try {
        ssg::RunConfig base;
        if (chosen == fit) base.calibrate = false;
        if (chosen == generate) base.synthetic = ssg::SyntheticSource{};
        ssg::RunConfig config = build_config(f, active, base);
        if (chosen == generate) return cmd_generate(config);
        if (chosen == transform) return cmd_transform(config);
        if (chosen == benchmark) {
            if (!config.synthetic) config.synthetic = ssg::SyntheticSource{};
            return cmd_benchmark(config);
        }
        if (chosen == calibrate) config.calibrate = true;
        const auto result = ssg::run_inference(config);
        print_inference(result, config);
        return 0;
    } catch (const ssg::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ssg::SpecError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ssg::PreprocessError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ssg::DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ssg::Error& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
}
