#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "delta/graph.hpp"
#include "delta/metrics.hpp"
#include "delta/sbm.hpp"
#include "delta/select.hpp"
#include "delta/subnet.hpp"

namespace delta {

struct FileDataset {
    std::string source_edges, source_features, source_labels, source_mask;
    std::string target_edges, target_features, target_labels, target_mask;
};

struct ExperimentSpec {
    // either file paths or synthetic generator parameters
    std::optional<FileDataset> files;
    SbmPairParams sbm = default_sbm_params();

    TrainConfig train;
    SelectConfig select;
    std::string strategy = "delta"; // delta | random | degree | density | uncertainty
    std::size_t num_seeds = 1;
    std::uint64_t base_seed = 0;
    std::string out_dir = ".";

    void validate() const {
        static const char* known[] = {"delta", "random", "degree", "density", "uncertainty"};
        bool ok = false;
        for (const char* s : known) ok = ok || strategy == s;
        if (!ok) throw std::invalid_argument("ExperimentSpec: unknown strategy " + strategy);
        if (num_seeds < 1) throw std::invalid_argument("ExperimentSpec: seeds must be >= 1");
        train.validate();
        select.validate();
    }
};

struct SeedResult {
    std::uint64_t seed = 0;
    double macro_f1 = 0.0;
    double micro_f1 = 0.0;
    std::vector<std::size_t> selected;
    double select_seconds = 0.0; // excluded from the deterministic report body
};

struct EvalReport {
    std::string strategy;
    std::size_t budget = 0;
    std::vector<SeedResult> seeds;
    double macro_mean = 0.0, macro_std = 0.0;
    double micro_mean = 0.0, micro_std = 0.0;
};

namespace detail {

inline void mean_std(const std::vector<double>& v, double& mean, double& sd) {
    long double m = 0.0L;
    for (double x : v) m += x;
    m /= static_cast<long double>(v.size());
    long double var = 0.0L;
    for (double x : v) var += (x - m) * (x - m);
    var /= static_cast<long double>(v.size());
    mean = static_cast<double>(m);
    sd = static_cast<double>(std::sqrt(var));
}

inline void write_atomic(const std::string& path, const std::string& content) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + tmp);
        f << content;
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

} // namespace detail

// Timing is serialized only when include_timing is set, so the default
// report body is bitwise reproducible for fixed seeds.
inline nlohmann::json report_to_json(const EvalReport& r, bool include_timing = false) {
    nlohmann::json j;
    j["strategy"] = r.strategy;
    j["budget"] = r.budget;
    j["macro_mean"] = r.macro_mean;
    j["macro_std"] = r.macro_std;
    j["micro_mean"] = r.micro_mean;
    j["micro_std"] = r.micro_std;
    j["seeds"] = nlohmann::json::array();
    for (const auto& s : r.seeds) {
        nlohmann::json js;
        js["seed"] = s.seed;
        js["macro_f1"] = s.macro_f1;
        js["micro_f1"] = s.micro_f1;
        js["selected"] = s.selected;
        if (include_timing) js["select_seconds"] = s.select_seconds;
        j["seeds"].push_back(std::move(js));
    }
    return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport r;
    r.strategy = j.at("strategy").get<std::string>();
    r.budget = j.at("budget").get<std::size_t>();
    r.macro_mean = j.at("macro_mean").get<double>();
    r.macro_std = j.at("macro_std").get<double>();
    r.micro_mean = j.at("micro_mean").get<double>();
    r.micro_std = j.at("micro_std").get<double>();
    for (const auto& js : j.at("seeds")) {
        SeedResult s;
        s.seed = js.at("seed").get<std::uint64_t>();
        s.macro_f1 = js.at("macro_f1").get<double>();
        s.micro_f1 = js.at("micro_f1").get<double>();
        s.selected = js.at("selected").get<std::vector<std::size_t>>();
        if (js.contains("select_seconds")) s.select_seconds = js.at("select_seconds").get<double>();
        r.seeds.push_back(std::move(s));
    }
    return r;
}

// Structured dump of a DELTA selection: config, candidate count, per-node
// score provenance, and the final ordered pick.
inline nlohmann::json selection_report_json(const Selection& sel, const SelectConfig& cfg) {
    nlohmann::json j;
    j["config"] = {{"gamma", cfg.gamma}, {"khop", cfg.hop_radius},
                   {"budget", cfg.budget}, {"normalize", cfg.normalize_scores}};
    j["candidate_count"] = sel.candidate_count;
    j["scores"] = nlohmann::json::array();
    for (const auto& row : sel.scores)
        j["scores"].push_back({{"id", row.id}, {"d", row.inconsistency},
                               {"U", row.uncertainty}, {"D", row.discrepancy},
                               {"I", row.composite}});
    j["selection"] = sel.ids;
    return j;
}

// Run one strategy once: returns the chosen target node ids and, for DELTA,
// the full score table.
inline std::pair<std::vector<std::size_t>, std::optional<Selection>>
run_strategy(const std::string& strategy, const GraphOperators& ops_t,
             const Graph& source, const Graph& target,
             const DualNets& nets, const SelectConfig& scfg, std::uint64_t seed) {
    if (strategy == "delta") {
        DualLogits dual = target_logits(nets, target, ops_t);
        Selection sel = select(source, target, dual, scfg);
        return {sel.ids, std::move(sel)};
    }
    BaselineInputs in;
    in.target = &target;
    auto [emb, logits] = forward_edge(nets.edge, target, ops_t.gcn);
    in.edge_logits = &logits;
    in.edge_embeddings = &emb;
    return {baseline_select(baseline_from_name(strategy), in, scfg.budget, seed), std::nullopt};
}

// Combined prediction from both subnetworks: argmax of the mean of the two
// softmax outputs.
inline std::vector<int> predict_dual(const DualNets& nets, const Graph& g,
                                     const GraphOperators& ops) {
    DualLogits dual = target_logits(nets, g, ops);
    DenseMatrix pe = row_softmax(dual.edge);
    DenseMatrix pp = row_softmax(dual.path);
    std::vector<int> pred(g.num_nodes, 0);
    for (std::size_t i = 0; i < g.num_nodes; ++i) {
        double best = -1.0;
        for (std::size_t c = 0; c < pe.cols(); ++c) {
            double p = 0.5 * (pe(i, c) + pp(i, c));
            if (p > best) { best = p; pred[i] = static_cast<int>(c); }
        }
    }
    return pred;
}

inline std::vector<int> predict_dual(const DualNets& nets, const Graph& g) {
    return predict_dual(nets, g, GraphOperators(g, nets.path.path_len));
}

// One seed of the protocol, given already-trained nets: select under budget,
// annotate the selected target nodes with ground truth, retrain from fresh
// initialization, and evaluate on the remaining labeled target nodes.
// Operators depend only on graph structure, which annotation leaves
// untouched, so both graphs' operators are computed once and reused.
inline SeedResult run_protocol_seed(const Graph& source, const Graph& target, const DualNets& nets,
                                    const std::string& strategy, const TrainConfig& tcfg,
                                    const SelectConfig& scfg, std::uint64_t seed,
                                    const GraphOperators* pre_s = nullptr,
                                    const GraphOperators* pre_t = nullptr) {
    GraphOperators local_s = pre_s ? GraphOperators() : GraphOperators(source, tcfg.path_len);
    GraphOperators local_t = pre_t ? GraphOperators() : GraphOperators(target, tcfg.path_len);
    const GraphOperators& ops_s = pre_s ? *pre_s : local_s;
    const GraphOperators& ops_t = pre_t ? *pre_t : local_t;

    auto t0 = std::chrono::steady_clock::now();
    auto [picked, sel] = run_strategy(strategy, ops_t, source, target, nets, scfg, seed);
    auto t1 = std::chrono::steady_clock::now();

    // annotate with ground truth; source labels are untouched
    Graph annotated = target;
    for (std::size_t id : picked) {
        if (annotated.labels[id] < 0)
            throw std::runtime_error("run_protocol_seed: selected node has no ground-truth label (seed " +
                                     std::to_string(seed) + ")");
        annotated.labeled_mask[id] = 1;
    }

    TrainConfig rcfg = tcfg;
    rcfg.seed = rng::splitmix64(seed ^ 0x7e7a11ULL); // fresh initialization
    DualNets retrained = train_dual(source, annotated, rcfg, &ops_s, &ops_t);

    // evaluate on unlabeled target nodes only: annotated nodes excluded
    std::vector<std::uint8_t> eval_mask(target.num_nodes, 0);
    for (std::size_t v = 0; v < target.num_nodes; ++v)
        eval_mask[v] = !annotated.labeled_mask[v] && annotated.labels[v] >= 0;
    std::vector<int> pred = predict_dual(retrained, annotated, ops_t);
    F1Scores f1 = macro_micro_f1(pred, annotated.labels, eval_mask, annotated.num_classes);

    SeedResult sr;
    sr.seed = seed;
    sr.macro_f1 = f1.macro;
    sr.micro_f1 = f1.micro;
    sr.selected = picked;
    sr.select_seconds = std::chrono::duration<double>(t1 - t0).count();
    return sr;
}

// Full protocol over all seeds of an experiment spec.
inline EvalReport run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    EvalReport report;
    report.strategy = spec.strategy;
    report.budget = spec.select.budget;

    Graph file_source, file_target;
    if (spec.files) {
        file_source = load_graph(spec.files->source_edges, spec.files->source_features,
                                 spec.files->source_labels, spec.files->source_mask);
        file_target = load_graph(spec.files->target_edges, spec.files->target_features,
                                 spec.files->target_labels, spec.files->target_mask);
    }

    for (std::size_t i = 0; i < spec.num_seeds; ++i) {
        const std::uint64_t seed = spec.base_seed + i;
        Graph source, target;
        if (spec.files) {
            source = file_source;
            target = file_target;
        } else {
            auto pair = generate_shifted_pair(spec.sbm, seed);
            source = std::move(pair.first);
            target = std::move(pair.second);
        }

        TrainConfig tcfg = spec.train;
        tcfg.seed = seed;
        GraphOperators ops_s(source, tcfg.path_len), ops_t(target, tcfg.path_len);
        DualNets nets = train_dual(source, target, tcfg, &ops_s, &ops_t);
        report.seeds.push_back(run_protocol_seed(source, target, nets, spec.strategy, tcfg,
                                                 spec.select, seed, &ops_s, &ops_t));
    }

    std::vector<double> macros, micros;
    for (const auto& s : report.seeds) {
        macros.push_back(s.macro_f1);
        micros.push_back(s.micro_f1);
    }
    detail::mean_std(macros, report.macro_mean, report.macro_std);
    detail::mean_std(micros, report.micro_mean, report.micro_std);
    return report;
}

// Flat key = value config text; '#' comments; unknown keys rejected.
inline ExperimentSpec parse_config(std::istream& is) {
    ExperimentSpec spec;
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        auto pos = line.find('#');
        if (pos != std::string::npos) line.erase(pos);
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
            if (!blank) throw std::invalid_argument("config line " + std::to_string(lineno) +
                                                    ": expected key = value");
            continue;
        }
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty())
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key or value");
        kv[key] = val;
    }

    FileDataset fd;
    bool any_file = false;
    auto take = [&](const char* key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    auto take_d = [&](const char* key, double& dst) {
        if (auto v = take(key)) dst = std::stod(*v);
    };
    auto take_u = [&](const char* key, std::size_t& dst) {
        if (auto v = take(key)) dst = std::stoull(*v);
    };

    if (auto v = take("dataset")) {
        if (*v == "files") any_file = true;
        else if (*v != "synthetic")
            throw std::invalid_argument("config: dataset must be synthetic or files");
    }
    auto take_file = [&](const char* key, std::string& dst) {
        if (auto v = take(key)) { dst = *v; any_file = true; }
    };
    take_file("source.edges", fd.source_edges);
    take_file("source.features", fd.source_features);
    take_file("source.labels", fd.source_labels);
    take_file("source.mask", fd.source_mask);
    take_file("target.edges", fd.target_edges);
    take_file("target.features", fd.target_features);
    take_file("target.labels", fd.target_labels);
    take_file("target.mask", fd.target_mask);
    if (any_file) spec.files = fd;

    std::size_t npc = 120, ncls = 5, nfeat = 32;
    take_u("sbm.nodes_per_class", npc);
    take_u("sbm.classes", ncls);
    take_u("sbm.features", nfeat);
    spec.sbm = default_sbm_params(npc, ncls, nfeat);
    take_d("sbm.p_intra", spec.sbm.p_intra);
    take_d("sbm.p_inter", spec.sbm.p_inter);
    take_d("sbm.noise", spec.sbm.noise_scale);
    take_d("sbm.label_fraction", spec.sbm.source_label_fraction);

    take_u("train.epochs", spec.train.epochs);
    take_d("train.lr", spec.train.learning_rate);
    take_d("train.weight_decay", spec.train.weight_decay);
    take_u("train.hidden", spec.train.hidden);
    take_u("train.out", spec.train.out);
    take_d("train.dropout", spec.train.dropout);
    take_d("train.lambda", spec.train.lambda_da);
    take_u("train.path_len", spec.train.path_len);
    take_d("train.temperature", spec.train.temperature);

    take_d("select.gamma", spec.select.gamma);
    take_u("select.khop", spec.select.hop_radius);
    take_u("select.k", spec.select.budget);
    if (auto v = take("select.normalize"))
        spec.select.normalize_scores = (*v == "1" || *v == "true");

    if (auto v = take("strategy")) spec.strategy = *v;
    take_u("seeds", spec.num_seeds);
    if (auto v = take("seed")) spec.base_seed = std::stoull(*v);
    if (auto v = take("out")) spec.out_dir = *v;

    if (!kv.empty())
        throw std::invalid_argument("config: unknown key '" + kv.begin()->first + "'");
    spec.validate();
    return spec;
}

// Scaling probe for the uncertainty stage: time U_j over every node at
// growing graph sizes, edge density held roughly constant per node.
struct BenchPoint {
    std::size_t num_nodes = 0;
    double seconds = 0.0;
};

inline std::vector<BenchPoint> bench_uncertainty(const std::vector<std::size_t>& sizes,
                                                 std::size_t hop_radius, std::uint64_t seed) {
    std::vector<BenchPoint> out;
    for (std::size_t v : sizes) {
        const std::size_t classes = 5;
        SbmPairParams p = default_sbm_params(v / classes, classes, 16);
        // keep expected degree constant as V grows
        p.p_intra = std::min(1.0, 8.0 / static_cast<double>(v));
        p.p_inter = std::min(1.0, 2.0 / static_cast<double>(v));
        Graph g = generate_shifted_pair(p, seed).second;
        DualLogits dual;
        dual.edge = DenseMatrix(g.num_nodes, classes);
        dual.path = DenseMatrix(g.num_nodes, classes);
        rng::Stream r(seed, 0xbe9cULL);
        for (double& x : dual.edge.raw()) x = r.normal();
        for (double& x : dual.path.raw()) x = r.normal();
        std::vector<std::size_t> all(g.num_nodes);
        for (std::size_t i = 0; i < g.num_nodes; ++i) all[i] = i;
        auto t0 = std::chrono::steady_clock::now();
        auto u = topo_uncertainty(g, dual, all, hop_radius);
        auto t1 = std::chrono::steady_clock::now();
        (void)u;
        out.push_back({g.num_nodes, std::chrono::duration<double>(t1 - t0).count()});
    }
    return out;
}

} // namespace delta
