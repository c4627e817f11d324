#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include <nethop/nethop.hpp>

namespace nethop::cli {

namespace fs = std::filesystem;
using report::json;

struct InterferenceFlags {
    double lambda = 2.0;
    double delta = 0.05;
    std::optional<double> sigma_bar;
    std::string sigma_mode;
    std::size_t max_depth = 0;

    void add_to(CLI::App& cmd)
    {
        cmd.add_option("--lambda", lambda, "pruning multiplier (> 1)")->capture_default_str();
        cmd.add_option("--delta", delta, "confidence parameter in (0,1)")->capture_default_str();
        cmd.add_option("--sigma-bar", sigma_bar, "sub-Gaussian noise scale bound");
        cmd.add_option("--sigma-mode", sigma_mode, "`supplied` or `pooled` (default: pooled unless --sigma-bar)")
            ->check(CLI::IsMember({"supplied", "pooled"}));
        cmd.add_option("--max-depth", max_depth, "depth cap M (0 = min(diameter, 10))")->capture_default_str();
    }

    InterferenceConfig config(std::size_t workers) const
    {
        InterferenceConfig c;
        c.lambda = lambda;
        c.delta = delta;
        c.max_depth = max_depth;
        c.workers = workers;
        const bool pooled = sigma_mode == "pooled" || (sigma_mode.empty() && !sigma_bar);
        if (pooled) {
            if (sigma_bar)
                throw std::invalid_argument("--sigma-bar conflicts with --sigma-mode pooled");
            c.sigma_mode = SigmaMode::pooled_control_sd;
        } else {
            if (!sigma_bar)
                throw std::invalid_argument("--sigma-mode supplied requires --sigma-bar");
            c.sigma_mode = SigmaMode::supplied;
            c.sigma_bar = *sigma_bar;
        }
        c.validate();
        return c;
    }
};

//! `constant:<e0>`, `stratified`, or `supplied:<csv with id,e>`.
inline PropensityModel parse_propensity(const std::string& text, double clip, std::size_t n)
{
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
    PropensityModel m;
    if (kind == "constant") {
        if (arg.empty())
            throw std::invalid_argument("--propensity constant needs a value, e.g. constant:0.5");
        m = PropensityModel::constant(std::stod(arg));
    } else if (kind == "stratified") {
        m = PropensityModel::stratified();
    } else if (kind == "supplied") {
        std::ifstream in(arg);
        if (!in)
            throw InputError("cannot open propensity file `" + arg + "`");
        m = PropensityModel::from_values(csv::read_node_values(in, n, arg));
    } else {
        throw std::invalid_argument("unknown propensity kind `" + kind + "`");
    }
    m.clip = clip;
    m.validate();
    return m;
}

inline std::ifstream open_input(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open `" + path + "`");
    return in;
}

inline std::ofstream open_output(const fs::path& path)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw InputError("cannot write `" + path.string() + "`");
    return out;
}

struct Dataset {
    Graph graph;
    std::vector<NodeObservation> obs;
};

inline Dataset load_dataset(const std::string& graph_path, const std::string& nodes_path, bool edge_header)
{
    auto nodes_in = open_input(nodes_path);
    Dataset d;
    d.obs = csv::read_node_table(nodes_in, nodes_path);
    auto edges_in = open_input(graph_path);
    const auto edges = csv::read_edge_list(edges_in, edge_header, graph_path);
    if (edges.max_id_plus_one > d.obs.size())
        throw InputError(graph_path + ": edge references node id " + std::to_string(edges.max_id_plus_one - 1)
                         + " but the node table has " + std::to_string(d.obs.size()) + " rows");
    d.graph = load_graph(edges.edges, d.obs.size());
    return d;
}

inline Labels synthetic_labels(std::span<const double> e_hat, std::uint64_t seed)
{
    const CounterRng rng(seed, "synthetic");
    Labels out(e_hat.size());
    for (std::size_t i = 0; i < e_hat.size(); ++i)
        out[i] = rng.bernoulli(i, e_hat[i]) ? 1 : 0;
    return out;
}

inline void write_json(const fs::path& path, const json& j)
{
    auto out = open_output(path);
    out << j.dump(2) << '\n';
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Direct-effect estimation under unknown interference radii"};
    app.require_subcommand(1);

    std::uint64_t seed = 1;
    std::size_t workers = 1;
    double level = 0.95;
    double clip = 0.01;
    std::string propensity = "stratified";
    std::string out_dir;
    std::string graph_path, nodes_path, spec_path;
    bool edge_header = false;
    bool decouple = false;
    bool kept_only = false;
    std::string format = "text";
    std::size_t reps = 100;
    std::optional<std::uint64_t> seed_override;
    InterferenceFlags flags;

    auto add_data = [&](CLI::App* cmd) {
        cmd->add_option("--graph", graph_path, "edge list CSV (u,v)")->required();
        cmd->add_option("--nodes", nodes_path, "node table CSV (id,z,y[,x])")->required();
        cmd->add_flag("--edge-header", edge_header, "edge list has a header line");
    };
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--workers", workers, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    };

    auto* estimate = app.add_subcommand("estimate", "fit interference, report OR and DR estimates");
    add_data(estimate);
    add_common(estimate);
    flags.add_to(*estimate);
    estimate->add_flag("--decouple", decouple, "build patterns from synthetic labels");
    estimate->add_option("--propensity", propensity, "constant:<e> | stratified | supplied:<file>")
        ->capture_default_str();
    estimate->add_option("--clip", clip, "propensity clipping constant")->capture_default_str();
    estimate->add_option("--seed", seed, "seed for synthetic labels")->capture_default_str();
    estimate->add_option("--level", level, "confidence level")->capture_default_str();
    estimate->add_option("--out", out_dir, "output directory")->required();

    auto* simulate = app.add_subcommand("simulate", "draw one data set from a DGP spec");
    simulate->add_option("--spec", spec_path, "DGP spec JSON")->required();
    simulate->add_option("--seed", seed_override, "override the spec seed");
    simulate->add_option("--out", out_dir, "output directory")->required();

    auto* mc = app.add_subcommand("mc", "Monte Carlo study over a DGP spec");
    mc->add_option("--spec", spec_path, "DGP spec JSON")->required();
    mc->add_option("--reps", reps, "replicates")->capture_default_str()->check(CLI::PositiveNumber);
    add_common(mc);
    flags.add_to(*mc);
    mc->add_option("--propensity", propensity, "constant:<e> | stratified")->capture_default_str();
    mc->add_option("--clip", clip, "propensity clipping constant")->capture_default_str();
    mc->add_option("--seed", seed_override, "override the spec seed");
    mc->add_option("--level", level, "confidence level")->capture_default_str();
    mc->add_option("--out", out_dir, "output directory")->required();

    auto* tree = app.add_subcommand("tree-dump", "dump the pattern tree and the kept keys");
    add_data(tree);
    add_common(tree);
    flags.add_to(*tree);
    tree->add_flag("--decouple", decouple, "build patterns from synthetic labels");
    tree->add_option("--propensity", propensity, "propensity for synthetic labels")->capture_default_str();
    tree->add_option("--clip", clip, "propensity clipping constant")->capture_default_str();
    tree->add_option("--seed", seed, "seed for synthetic labels")->capture_default_str();
    tree->add_flag("--kept-only", kept_only, "text dump lists kept keys only");
    tree->add_option("--format", format, "stdout format when --out is absent")
        ->check(CLI::IsMember({"text", "json"}))
        ->capture_default_str();
    tree->add_option("--out", out_dir, "output directory (tree.tsv, tree.json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (!(level > 0.0 && level < 1.0))
            throw std::invalid_argument("--level must lie in (0,1)");

        if (*estimate) {
            const auto config = flags.config(workers);
            const auto data = load_dataset(graph_path, nodes_path, edge_header);
            const auto model = parse_propensity(propensity, clip, data.obs.size());
            const auto e_hat = estimate_propensity(data.obs, model);
            InterferenceFit fitted;
            if (decouple) {
                const auto synthetic = synthetic_labels(e_hat, seed);
                fitted = fit_decoupled(data.graph, data.obs, synthetic, config);
            } else {
                fitted = fit(data.graph, data.obs, config);
            }
            const auto or_est = estimate_or(data.obs, fitted.f_hat);
            const auto dr_est = estimate_dr(data.obs, fitted.f_hat, e_hat, level);
            json rep = {{"schema_version", report::kSchemaVersion},
                        {"kind", "estimate"},
                        {"estimates", {report::to_json(or_est), report::to_json(dr_est)}},
                        {"config",
                         {{"interference", report::to_json(fitted.config)},
                          {"propensity", report::to_json(model)},
                          {"level", level},
                          {"seed", seed},
                          {"decouple", decouple}}},
                        {"fit_digest", report::fit_digest(fitted)}};
            write_json(fs::path(out_dir) / "estimate.json", rep);
            write_json(fs::path(out_dir) / "fit.json", report::to_json(fitted, data.obs));
            out << "tau_or\t" << or_est.tau_hat << "\ntau_dr\t" << dr_est.tau_hat << "\t[" << dr_est.ci_low << ", "
                << dr_est.ci_high << "]\n";
            return 0;
        }

        if (*simulate) {
            auto spec = report::dgp_from_json(json::parse(open_input(spec_path), nullptr, true));
            if (seed_override)
                spec.seed = *seed_override;
            const auto data = sim::simulate(spec);
            const fs::path dir(out_dir);
            {
                auto f = open_output(dir / "edges.csv");
                csv::write_edge_list(f, data.graph);
            }
            {
                auto f = open_output(dir / "nodes.csv");
                csv::write_node_table(f, data.observations);
            }
            {
                auto f = open_output(dir / "truth.csv");
                f << "id,f,tau,epsilon,e\n";
                char buf[160];
                for (std::size_t i = 0; i < data.f.size(); ++i) {
                    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", i, data.f[i], data.tau[i],
                                  data.epsilon[i], data.propensity[i]);
                    f << buf;
                }
            }
            write_json(dir / "simulation.json", {{"schema_version", report::kSchemaVersion},
                                                 {"kind", "simulation"},
                                                 {"spec", report::to_json(spec)},
                                                 {"n", data.graph.num_nodes()},
                                                 {"edges", data.graph.num_edges()},
                                                 {"true_adtt", report::number(data.true_adtt)},
                                                 {"true_adte", report::number(data.true_adte)}});
            return 0;
        }

        if (*mc) {
            auto spec = report::dgp_from_json(json::parse(open_input(spec_path), nullptr, true));
            if (seed_override)
                spec.seed = *seed_override;
            sim::McConfig config;
            config.interference = flags.config(1);
            if (propensity.rfind("supplied", 0) == 0)
                throw std::invalid_argument("mc supports constant:<e> or stratified propensities");
            config.propensity = parse_propensity(propensity, clip, 0);
            config.level = level;
            config.workers = workers;
            const auto result = sim::monte_carlo(spec, reps, config);
            write_json(fs::path(out_dir) / "mc_summary.json", report::to_json(result));
            auto f = open_output(fs::path(out_dir) / "mc_reps.csv");
            report::write_rep_csv(f, result);
            return 0;
        }

        if (*tree) {
            const auto config = flags.config(workers);
            const auto data = load_dataset(graph_path, nodes_path, edge_header);
            const auto result = [&] {
                if (!decouple)
                    return fit_with_index(data.graph, data.obs, config);
                const auto model = parse_propensity(propensity, clip, data.obs.size());
                const auto e_hat = estimate_propensity(data.obs, model);
                return fit_decoupled_with_index(data.graph, data.obs, synthetic_labels(e_hat, seed), config);
            }();
            const auto& [index, fitted] = result;
            const auto pruned = prune(index, fitted.config);
            std::ostringstream text;
            dump_tree(text, index, kept_only ? &pruned.kept : nullptr);
            json j = report::tree_json(index, &pruned.kept);
            j["config"] = report::to_json(fitted.config);
            if (out_dir.empty()) {
                if (format == "json")
                    out << j.dump(2) << '\n';
                else
                    out << text.str();
            } else {
                auto f = open_output(fs::path(out_dir) / "tree.tsv");
                f << text.str();
                write_json(fs::path(out_dir) / "tree.json", j);
            }
            return 0;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

} // namespace nethop::cli
