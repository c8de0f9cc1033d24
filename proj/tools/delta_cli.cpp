// Command-line front end for the delta library: synthetic data generation,
// training, active selection, evaluation, and the uncertainty-stage benchmark.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "delta/harness.hpp"

namespace {

delta::ExperimentSpec load_spec(const std::string& config_path) {
    delta::ExperimentSpec spec;
    if (!config_path.empty()) {
        std::ifstream f(config_path);
        if (!f) throw std::invalid_argument("cannot open config file " + config_path);
        spec = delta::parse_config(f);
    }
    return spec;
}

void apply_overrides(delta::ExperimentSpec& spec, std::uint64_t* seed, const std::string& out) {
    if (seed) spec.base_seed = *seed;
    if (!out.empty()) spec.out_dir = out;
}

std::string out_path(const delta::ExperimentSpec& spec, const std::string& name) {
    if (spec.out_dir.empty()) return name;
    std::filesystem::create_directories(spec.out_dir);
    return (std::filesystem::path(spec.out_dir) / name).string();
}

std::pair<delta::Graph, delta::Graph> make_pair(const delta::ExperimentSpec& spec) {
    if (spec.files) {
        const auto& f = *spec.files;
        return {delta::load_graph(f.source_edges, f.source_features, f.source_labels, f.source_mask),
                delta::load_graph(f.target_edges, f.target_features, f.target_labels, f.target_mask)};
    }
    return delta::generate_shifted_pair(spec.sbm, spec.base_seed);
}

delta::DualNets train_pair(const delta::ExperimentSpec& spec, const delta::Graph& source,
                           const delta::Graph& target) {
    delta::TrainConfig tcfg = spec.train;
    tcfg.seed = spec.base_seed;
    return delta::train_dual(source, target, tcfg);
}

int cmd_synth(const delta::ExperimentSpec& spec) {
    auto [source, target] = delta::generate_shifted_pair(spec.sbm, spec.base_seed);
    delta::save_graph_files(source, out_path(spec, "source"));
    delta::save_graph_files(target, out_path(spec, "target"));
    std::cout << "wrote source (" << source.num_nodes << " nodes, "
              << source.undirected_edge_count() << " edges) and target ("
              << target.num_nodes << " nodes, " << target.undirected_edge_count()
              << " edges) to " << (spec.out_dir.empty() ? "." : spec.out_dir) << "\n";
    return 0;
}

int cmd_train(const delta::ExperimentSpec& spec) {
    auto [source, target] = make_pair(spec);
    delta::DualNets nets = train_pair(spec, source, target);
    {
        std::ofstream f(out_path(spec, "checkpoint.txt"));
        delta::save_checkpoint(nets, spec.train, f);
    }
    {
        std::ofstream f(out_path(spec, "trace_edge.csv"));
        delta::write_trace_csv(nets.edge_trace, f);
    }
    {
        std::ofstream f(out_path(spec, "trace_path.csv"));
        delta::write_trace_csv(nets.path_trace, f);
    }
    std::cout << "trained " << spec.train.epochs << " epochs; final losses edge="
              << nets.edge_trace.back().total << " path=" << nets.path_trace.back().total
              << "; checkpoint written\n";
    return 0;
}

int cmd_select(const delta::ExperimentSpec& spec) {
    auto [source, target] = make_pair(spec);
    delta::DualNets nets = train_pair(spec, source, target);
    delta::DualLogits dual = delta::target_logits(nets, target);
    delta::Selection sel = delta::select(source, target, dual, spec.select);
    nlohmann::json j = delta::selection_report_json(sel, spec.select);
    delta::detail::write_atomic(out_path(spec, "selection.json"), j.dump(2) + "\n");
    std::cout << "selected " << sel.ids.size() << " of " << sel.candidate_count
              << " candidates; ids:";
    for (std::size_t id : sel.ids) std::cout << ' ' << id;
    std::cout << "\n";
    return 0;
}

int cmd_evaluate(const delta::ExperimentSpec& spec) {
    delta::EvalReport r = delta::run_experiment(spec);
    delta::detail::write_atomic(out_path(spec, "report_" + spec.strategy + ".json"),
                                delta::report_to_json(r).dump(2) + "\n");
    std::cout << spec.strategy << ": macro-F1 " << r.macro_mean << " +/- " << r.macro_std
              << ", micro-F1 " << r.micro_mean << " +/- " << r.micro_std
              << " over " << r.seeds.size() << " seed(s)\n";
    return 0;
}

int cmd_run(const delta::ExperimentSpec& base) {
    for (const char* strategy : {"random", "degree", "uncertainty", "density", "delta"}) {
        delta::ExperimentSpec spec = base;
        spec.strategy = strategy;
        delta::EvalReport r = delta::run_experiment(spec);
        delta::detail::write_atomic(out_path(spec, std::string("report_") + strategy + ".json"),
                                    delta::report_to_json(r).dump(2) + "\n");
        std::cout << strategy << ": macro-F1 " << r.macro_mean << " +/- " << r.macro_std
                  << ", micro-F1 " << r.micro_mean << " +/- " << r.micro_std << "\n";
    }
    return 0;
}

int cmd_bench(const delta::ExperimentSpec& spec, const std::vector<std::size_t>& sizes) {
    auto pts = delta::bench_uncertainty(sizes, spec.select.hop_radius, spec.base_seed);
    nlohmann::json j = nlohmann::json::array();
    for (const auto& p : pts) {
        j.push_back({{"nodes", p.num_nodes}, {"seconds", p.seconds}});
        std::cout << p.num_nodes << " nodes: " << p.seconds << " s\n";
    }
    delta::detail::write_atomic(out_path(spec, "bench_uncertainty.json"), j.dump(2) + "\n");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"delta: dual-subnetwork active selection for graph domain adaptation"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    app.add_option("--config", config_path, "experiment config file (key = value lines)");
    app.add_option("--seed", seed, "base seed override")->each([&](const std::string&) { seed_set = true; });
    app.add_option("--out", out_dir, "output directory");

    auto* synth = app.add_subcommand("synth", "generate a shifted synthetic graph pair");
    auto* train = app.add_subcommand("train", "train the dual subnetworks, write checkpoint + traces");
    auto* select = app.add_subcommand("select", "train then rank and pick target nodes");
    auto* evaluate = app.add_subcommand("evaluate", "full protocol for one strategy");
    auto* run = app.add_subcommand("run", "full protocol for every strategy");
    auto* bench = app.add_subcommand("bench-uncertainty", "time the uncertainty stage across sizes");
    std::vector<std::size_t> sizes = {200, 400, 800};
    bench->add_option("--sizes", sizes, "graph sizes to probe");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return 2;
    }

    try {
        delta::ExperimentSpec spec = load_spec(config_path);
        apply_overrides(spec, seed_set ? &seed : nullptr, out_dir);
        spec.validate();
        if (synth->parsed()) return cmd_synth(spec);
        if (train->parsed()) return cmd_train(spec);
        if (select->parsed()) return cmd_select(spec);
        if (evaluate->parsed()) return cmd_evaluate(spec);
        if (run->parsed()) return cmd_run(spec);
        if (bench->parsed()) return cmd_bench(spec, sizes);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
