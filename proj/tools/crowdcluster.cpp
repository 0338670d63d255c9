#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crowdcluster/crowdcluster.hpp"

namespace cc = crowdcluster;
namespace fs = std::filesystem;

namespace {

struct RunConfig {
    std::string dataset;
    cc::LabelScheme scheme;
    bool have_scheme = false;
    bool seed_given = false;
    std::size_t min_overlap = 2;
    cc::ImputePolicy impute = cc::ImputePolicy::zero;
    std::optional<std::size_t> clusters;
    cc::ClusterMethod method = cc::ClusterMethod::kmeans;
    std::uint64_t seed = 0;
    std::size_t restarts = 10;
    cc::TieBreakPolicy policy;
    cc::TrainConfig train;
    cc::FeatureConfig features;
    std::string out = "out";
};

cc::ImputePolicy impute_from_string(const std::string& s) {
    if (s == "zero") return cc::ImputePolicy::zero;
    if (s == "mean") return cc::ImputePolicy::mean;
    throw cc::InvalidInputError("unknown impute policy '" + s + "'");
}

nlohmann::json load_json_file(const std::string& path, const char* what) {
    if (!fs::exists(path))
        throw cc::IoError(std::string(what) + " file not found: " + path);
    std::ifstream in(path);
    if (!in) throw cc::IoError(std::string("cannot open ") + what + " file: " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw cc::ParseError(path + ": " + e.what());
    }
}

// Missing keys and type mismatches in user JSON are user errors, not crashes.
template <typename F>
auto parsing(const std::string& path, F&& f) {
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw cc::ParseError(path + ": " + e.what());
    }
}

RunConfig parse_config(const nlohmann::json& j) {
    RunConfig cfg;
    if (j.contains("dataset")) cfg.dataset = j.at("dataset").get<std::string>();
    if (j.contains("scheme")) {
        cfg.scheme = cc::LabelScheme::from_json(j.at("scheme"));
        cfg.have_scheme = true;
    } else if (j.contains("scheme_file")) {
        cfg.scheme = cc::LabelScheme::from_json(
            load_json_file(j.at("scheme_file").get<std::string>(), "scheme"));
        cfg.have_scheme = true;
    }
    if (j.contains("min_overlap")) cfg.min_overlap = j.at("min_overlap").get<std::size_t>();
    if (j.contains("impute")) cfg.impute = impute_from_string(j.at("impute").get<std::string>());
    if (j.contains("clusters") && !j.at("clusters").is_null())
        cfg.clusters = j.at("clusters").get<std::size_t>();
    if (j.contains("method"))
        cfg.method = cc::cluster_method_from_string(j.at("method").get<std::string>());
    if (j.contains("restarts")) cfg.restarts = j.at("restarts").get<std::size_t>();
    if (j.contains("tie_policy")) {
        const auto& p = j.at("tie_policy");
        if (p.contains("chain")) {
            cfg.policy.chain.clear();
            for (const auto& step : p.at("chain"))
                cfg.policy.chain.push_back(cc::tie_step_from_string(step.get<std::string>()));
        }
        if (p.contains("priority"))
            cfg.policy.priority = p.at("priority").get<std::vector<std::string>>();
    }
    if (j.contains("train")) cfg.train = cc::TrainConfig::from_json(j.at("train"));
    if (j.contains("features")) cfg.features = cc::FeatureConfig::from_json(j.at("features"));
    if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
    // One root seed drives every stage; a seed inside the train block is
    // overridden deliberately.
    if (j.contains("seed")) {
        cfg.seed = j.at("seed").get<std::uint64_t>();
        cfg.seed_given = true;
    }
    cfg.train.seed = cfg.seed;
    return cfg;
}

struct Flags {
    std::string config_path;
    std::string dataset;
    std::string out;
    std::string method;
    std::string approach = "majority";
    std::string granularity = "clustered";
    std::string spec_path;
    std::uint64_t seed = 0;
    std::size_t clusters = 0;
};

RunConfig make_config(const Flags& f, const CLI::App* sub) {
    RunConfig cfg;
    if (!f.config_path.empty())
        cfg = parsing(f.config_path,
                      [&] { return parse_config(load_json_file(f.config_path, "config")); });
    auto given = [sub](const std::string& name) {
        const CLI::Option* opt = sub->get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
    };
    if (given("dataset")) cfg.dataset = f.dataset;
    if (given("--out")) cfg.out = f.out;
    if (given("--method")) cfg.method = cc::cluster_method_from_string(f.method);
    if (given("--clusters")) cfg.clusters = f.clusters;
    if (given("--seed")) {
        cfg.seed = f.seed;
        cfg.train.seed = f.seed;
        cfg.seed_given = true;
    }
    return cfg;
}

cc::AnnotationMatrix load_input(const RunConfig& cfg) {
    if (cfg.dataset.empty())
        throw cc::InvalidConfigError(
            "no dataset given (positional argument or config key \"dataset\")");
    if (!fs::exists(cfg.dataset)) throw cc::IoError("dataset file not found: " + cfg.dataset);
    if (!cfg.have_scheme)
        throw cc::InvalidConfigError(
            "no label scheme (config key \"scheme\" or \"scheme_file\")");
    return cc::load_dataset(cfg.dataset, cfg.scheme);
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw cc::IoError("cannot create output directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw cc::IoError("cannot write " + path.string());
    out << content;
    if (!out) throw cc::IoError("failed writing " + path.string());
}

void note(const fs::path& path) { std::cout << "wrote " << path.string() << "\n"; }

// Stage wrappers shared by the individual commands and the pipeline.

void emit_summary(const cc::AnnotationMatrix& m, const RunConfig& cfg, const fs::path& dir) {
    const cc::DatasetSummary summary = cc::summarize(m, cfg.policy);
    write_text(dir / "summary.json", summary.to_json().dump(2) + "\n");
    note(dir / "summary.json");
}

cc::AgreementResult emit_agreement(const cc::AnnotationMatrix& m, const RunConfig& cfg,
                                   const fs::path& dir) {
    const cc::AgreementResult result = cc::similarity_matrix(m, cfg.min_overlap, cfg.impute);
    std::ostringstream sim, dist;
    result.similarity.to_csv(sim);
    cc::to_distance(result.similarity).to_csv(dist);
    write_text(dir / "similarity.csv", sim.str());
    write_text(dir / "distance.csv", dist.str());
    note(dir / "similarity.csv");
    note(dir / "distance.csv");
    return result;
}

cc::ClusterAssignment compute_clusters(const cc::AnnotationMatrix& m, const RunConfig& cfg) {
    const cc::AgreementResult result = cc::similarity_matrix(m, cfg.min_overlap, cfg.impute);
    const cc::DistanceMatrix dist = cc::to_distance(result.similarity);
    const std::size_t c = cc::cluster_count(m, cfg.clusters);
    return cc::cluster_annotators(dist, c, cfg.seed, cfg.restarts, cfg.method);
}

void emit_clusters(const cc::ClusterAssignment& assignment, const fs::path& dir) {
    write_text(dir / "clusters.json", assignment.to_json().dump(2) + "\n");
    note(dir / "clusters.json");
}

cc::ClusteredDataset emit_aggregate(const cc::AnnotationMatrix& m,
                                    const cc::ClusterAssignment& assignment,
                                    const RunConfig& cfg, const fs::path& dir) {
    const cc::ClusteredDataset clustered = cc::aggregate_clusters(m, assignment, cfg.policy);
    std::ostringstream records, ties;
    clustered.to_jsonl(records);
    clustered.tie_report_csv(ties);
    write_text(dir / "clustered_dataset.jsonl", records.str());
    write_text(dir / "tie_report.csv", ties.str());
    note(dir / "clustered_dataset.jsonl");
    note(dir / "tie_report.csv");
    return clustered;
}

void emit_models(const cc::ClusteredDataset& clustered, const RunConfig& cfg,
                 const fs::path& dir, const std::string& approach) {
    ensure_dir(dir);
    const bool all = approach == "all";
    if (all || approach == "majority") {
        const auto model = cc::train_single<float>(cc::gold_training_set(clustered),
                                                   clustered.scheme, cfg.train, cfg.features);
        cc::save_model_file((dir / "majority.ccm").string(), model);
        note(dir / "majority.ccm");
    }
    if (all || approach == "ensemble") {
        const auto members = cc::train_ensemble<float>(clustered, cfg.train, cfg.features);
        for (std::size_t i = 0; i < members.size(); ++i) {
            const fs::path p = dir / ("ensemble_" + std::to_string(i) + ".ccm");
            cc::save_model_file(p.string(), members[i]);
            note(p);
        }
    }
    if (all || approach == "multilabel") {
        const auto model = cc::train_multilabel_head<float>(clustered, cfg.train, cfg.features);
        cc::save_model_file((dir / "multilabel.ccm").string(), model);
        note(dir / "multilabel.ccm");
    }
    if (all || approach == "multitask") {
        const auto model = cc::train_multitask<float>(clustered, cfg.train, cfg.features);
        cc::save_model_file((dir / "multitask.ccm").string(), model);
        note(dir / "multitask.ccm");
    }
}

cc::ExperimentPlan make_plan(const RunConfig& cfg, cc::Approach approach,
                             cc::Granularity granularity) {
    cc::ExperimentPlan plan;
    plan.approach = approach;
    plan.granularity = granularity;
    plan.n_clusters = cfg.clusters;
    plan.policy = cfg.policy;
    plan.train = cfg.train;
    plan.features = cfg.features;
    plan.min_overlap = cfg.min_overlap;
    plan.impute = cfg.impute;
    plan.method = cfg.method;
    return plan;
}

std::string report_name(cc::Approach approach, cc::Granularity granularity) {
    if (approach == cc::Approach::majority) return "majority";
    return std::string(cc::to_string(granularity)) + "_" + cc::to_string(approach);
}

std::string format_score(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", value);
    return buf;
}

std::string comparison_markdown(const std::vector<cc::EvalReport>& reports) {
    std::ostringstream md;
    md << "# Approach comparison\n\n";
    md << "Macro-F1 is the mean over " << reports.front().repeats
       << " repeats with the sample standard deviation; accuracy is the mean.\n\n";
    md << "| metric |";
    for (const cc::EvalReport& r : reports) {
        if (r.approach == cc::Approach::majority) {
            md << " majority |";
        } else {
            md << ' ' << cc::to_string(r.granularity) << ' ' << cc::to_string(r.approach)
               << " |";
        }
    }
    md << "\n|---|";
    for (std::size_t i = 0; i < reports.size(); ++i) md << "---|";
    md << "\n| macro-F1 |";
    for (const cc::EvalReport& r : reports)
        md << ' ' << format_score(r.macro_f1) << " ± " << format_score(r.std_dev) << " |";
    md << "\n| accuracy |";
    for (const cc::EvalReport& r : reports) md << ' ' << format_score(r.accuracy) << " |";
    md << "\n";
    return md.str();
}

int cmd_summarize(const RunConfig& cfg) {
    const cc::AnnotationMatrix m = load_input(cfg);
    ensure_dir(cfg.out);
    emit_summary(m, cfg, cfg.out);
    return 0;
}

int cmd_agreement(const RunConfig& cfg) {
    const cc::AnnotationMatrix m = load_input(cfg);
    ensure_dir(cfg.out);
    emit_agreement(m, cfg, cfg.out);
    return 0;
}

int cmd_cluster(const RunConfig& cfg) {
    const cc::AnnotationMatrix m = load_input(cfg);
    ensure_dir(cfg.out);
    emit_clusters(compute_clusters(m, cfg), cfg.out);
    return 0;
}

int cmd_aggregate(const RunConfig& cfg) {
    const cc::AnnotationMatrix m = load_input(cfg);
    ensure_dir(cfg.out);
    emit_aggregate(m, compute_clusters(m, cfg), cfg, cfg.out);
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& approach,
              const std::string& granularity) {
    const cc::AnnotationMatrix m = load_input(cfg);
    ensure_dir(cfg.out);
    cc::ClusterAssignment assignment;
    if (granularity == "individual" || approach == "majority") {
        assignment = cc::detail::identity_assignment(m);
    } else {
        assignment = compute_clusters(m, cfg);
    }
    const cc::ClusteredDataset clustered =
        cc::aggregate_clusters(m, assignment, cfg.policy);
    emit_models(clustered, cfg, fs::path(cfg.out) / "models", approach);
    return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& approach,
                 const std::string& granularity) {
    const cc::AnnotationMatrix m = load_input(cfg);
    const fs::path reports_dir = fs::path(cfg.out) / "reports";
    ensure_dir(reports_dir);
    const cc::Approach a = cc::approach_from_string(approach);
    const cc::Granularity g = cc::granularity_from_string(granularity);
    const cc::EvalReport report = cc::run_experiment(m, make_plan(cfg, a, g));
    const fs::path path = reports_dir / (report_name(a, g) + ".json");
    write_text(path, report.to_json().dump(2) + "\n");
    note(path);
    return 0;
}

int cmd_simulate(const RunConfig& cfg, const std::string& spec_path) {
    cc::PerspectiveSpec spec = parsing(spec_path, [&] {
        return cc::PerspectiveSpec::from_json(load_json_file(spec_path, "spec"));
    });
    if (cfg.seed_given) spec.seed = cfg.seed;
    const cc::SyntheticData data = cc::generate(spec);
    ensure_dir(cfg.out);
    std::ostringstream records;
    cc::save_dataset(data.matrix, records);
    write_text(fs::path(cfg.out) / "dataset.jsonl", records.str());
    note(fs::path(cfg.out) / "dataset.jsonl");
    write_text(fs::path(cfg.out) / "planted.json", data.sidecar().dump(2) + "\n");
    note(fs::path(cfg.out) / "planted.json");
    return 0;
}

int cmd_pipeline(const RunConfig& cfg) {
    const cc::AnnotationMatrix m = load_input(cfg);
    const fs::path out(cfg.out);
    ensure_dir(out);

    cc::log_debug("pipeline: summarizing " + cfg.dataset);
    cc::detail::with_stage("summary", [&] { emit_summary(m, cfg, out); });
    cc::detail::with_stage("agreement", [&] { emit_agreement(m, cfg, out); });
    const cc::ClusterAssignment assignment =
        cc::detail::with_stage("clustering", [&] { return compute_clusters(m, cfg); });
    emit_clusters(assignment, out);
    const cc::ClusteredDataset clustered = cc::detail::with_stage(
        "aggregation", [&] { return emit_aggregate(m, assignment, cfg, out); });
    cc::detail::with_stage("training",
                           [&] { emit_models(clustered, cfg, out / "models", "all"); });

    const fs::path reports_dir = out / "reports";
    ensure_dir(reports_dir);
    std::vector<std::pair<cc::Approach, cc::Granularity>> slots = {
        {cc::Approach::majority, cc::Granularity::clustered},
        {cc::Approach::ensemble, cc::Granularity::individual},
        {cc::Approach::multilabel, cc::Granularity::individual},
        {cc::Approach::multitask, cc::Granularity::individual},
        {cc::Approach::ensemble, cc::Granularity::clustered},
        {cc::Approach::multilabel, cc::Granularity::clustered},
        {cc::Approach::multitask, cc::Granularity::clustered}};
    std::vector<cc::EvalReport> reports;
    for (const auto& [a, g] : slots) {
        cc::ExperimentPlan plan = make_plan(cfg, a, g);
        reports.push_back(cc::run_experiment(m, plan));
        const fs::path path = reports_dir / (report_name(a, g) + ".json");
        write_text(path, reports.back().to_json().dump(2) + "\n");
        note(path);
    }

    write_text(out / "comparison.md", comparison_markdown(reports));
    note(out / "comparison.md");
    return 0;
}

int exit_code_for(const cc::Error& e) {
    // User-correctable problems exit 2; internal inconsistencies exit 1.
    if (dynamic_cast<const cc::ParseError*>(&e) != nullptr ||
        dynamic_cast<const cc::ValidationError*>(&e) != nullptr ||
        dynamic_cast<const cc::DuplicateError*>(&e) != nullptr ||
        dynamic_cast<const cc::InvalidInputError*>(&e) != nullptr ||
        dynamic_cast<const cc::InvalidConfigError*>(&e) != nullptr ||
        dynamic_cast<const cc::IoError*>(&e) != nullptr)
        return 2;
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"crowdcluster: annotator clustering and perspective-aware training"};
    app.require_subcommand(1);
    Flags flags;

    auto add_common = [&](CLI::App* sub, bool with_dataset) {
        if (with_dataset)
            sub->add_option("dataset", flags.dataset, "annotation JSONL file");
        sub->add_option("--config", flags.config_path, "run configuration JSON file");
        sub->add_option("--seed", flags.seed, "root random seed");
        sub->add_option("--clusters", flags.clusters, "cluster count override");
        sub->add_option("--method", flags.method, "clustering method")
            ->check(CLI::IsMember({"kmeans", "kmedoids"}));
        sub->add_option("--out", flags.out, "output directory");
        return sub;
    };
    auto add_plan = [&](CLI::App* sub) {
        sub->add_option("--approach", flags.approach, "model approach")
            ->check(CLI::IsMember({"majority", "ensemble", "multilabel", "multitask"}));
        sub->add_option("--granularity", flags.granularity, "annotator grouping")
            ->check(CLI::IsMember({"individual", "clustered"}));
        return sub;
    };

    CLI::App* summarize = add_common(app.add_subcommand("summarize", "dataset statistics"), true);
    CLI::App* agreement =
        add_common(app.add_subcommand("agreement", "pairwise agreement matrices"), true);
    CLI::App* cluster = add_common(app.add_subcommand("cluster", "cluster annotators"), true);
    CLI::App* aggregate =
        add_common(app.add_subcommand("aggregate", "per-cluster labels"), true);
    CLI::App* train =
        add_plan(add_common(app.add_subcommand("train", "train and save models"), true));
    CLI::App* evaluate =
        add_plan(add_common(app.add_subcommand("evaluate", "run a scored experiment"), true));
    CLI::App* simulate =
        add_common(app.add_subcommand("simulate", "generate a synthetic dataset"), false);
    simulate->add_option("spec", flags.spec_path, "perspective spec JSON file")->required();
    CLI::App* pipeline =
        add_common(app.add_subcommand("pipeline", "full end-to-end run"), true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        const RunConfig cfg = make_config(flags, sub);
        if (sub == summarize) return cmd_summarize(cfg);
        if (sub == agreement) return cmd_agreement(cfg);
        if (sub == cluster) return cmd_cluster(cfg);
        if (sub == aggregate) return cmd_aggregate(cfg);
        if (sub == train) return cmd_train(cfg, flags.approach, flags.granularity);
        if (sub == evaluate) return cmd_evaluate(cfg, flags.approach, flags.granularity);
        if (sub == simulate) return cmd_simulate(cfg, flags.spec_path);
        if (sub == pipeline) return cmd_pipeline(cfg);
        std::cerr << "error: unknown subcommand\n";
        return 2;
    } catch (const cc::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
