#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdcluster/aggregation.hpp"
#include "crowdcluster/agreement.hpp"
#include "crowdcluster/clustering.hpp"
#include "crowdcluster/errors.hpp"
#include "crowdcluster/log.hpp"
#include "crowdcluster/models.hpp"

namespace crowdcluster {

enum class Approach { majority, ensemble, multilabel, multitask };
enum class Granularity { individual, clustered };

inline const char* to_string(Approach a) {
    switch (a) {
        case Approach::majority: return "majority";
        case Approach::ensemble: return "ensemble";
        case Approach::multilabel: return "multilabel";
        case Approach::multitask: return "multitask";
    }
    return "majority";
}

inline Approach approach_from_string(const std::string& s) {
    if (s == "majority") return Approach::majority;
    if (s == "ensemble") return Approach::ensemble;
    if (s == "multilabel") return Approach::multilabel;
    if (s == "multitask") return Approach::multitask;
    throw InvalidInputError("unknown approach '" + s + "'");
}

inline const char* to_string(Granularity g) {
    return g == Granularity::individual ? "individual" : "clustered";
}

inline Granularity granularity_from_string(const std::string& s) {
    if (s == "individual") return Granularity::individual;
    if (s == "clustered") return Granularity::clustered;
    throw InvalidInputError("unknown granularity '" + s + "'");
}

/// Metric scores as fractions in [0,1]; reports scale them to percent.
struct MetricScores {
    double macro_f1 = 0.0;
    double accuracy = 0.0;
    std::map<std::string, double> per_class_f1;
};

/// Macro-F1, per-class F1, and exact-match accuracy against gold label sets.
/// Multiclass scores come from the confusion matrix; multilabel scores are
/// per-label binary F1 over presence. A scheme class absent from both gold
/// and predictions scores 0 with a warning.
inline MetricScores macro_f1(const std::vector<LabelSet>& gold,
                             const std::vector<LabelSet>& predicted,
                             const LabelScheme& scheme) {
    if (gold.size() != predicted.size())
        throw InvalidInputError("macro_f1: gold and predictions differ in length");
    if (gold.empty()) throw InvalidInputError("macro_f1: empty input");

    const std::size_t n_labels = scheme.n_labels();
    std::vector<std::size_t> tp(n_labels, 0), fp(n_labels, 0), fn(n_labels, 0);
    std::size_t exact = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] == predicted[i]) ++exact;
        for (std::size_t l = 0; l < n_labels; ++l) {
            const bool in_gold = gold[i].contains(l);
            const bool in_pred = predicted[i].contains(l);
            if (in_gold && in_pred) ++tp[l];
            if (!in_gold && in_pred) ++fp[l];
            if (in_gold && !in_pred) ++fn[l];
        }
    }

    MetricScores out;
    out.accuracy = static_cast<double>(exact) / static_cast<double>(gold.size());
    double total = 0.0;
    for (std::size_t l = 0; l < n_labels; ++l) {
        const std::size_t denom = 2 * tp[l] + fp[l] + fn[l];
        double f1 = 0.0;
        if (denom == 0) {
            log_warn("class '" + scheme.labels[l] +
                     "' absent from gold and predictions; F1 scored 0");
        } else {
            f1 = 2.0 * static_cast<double>(tp[l]) / static_cast<double>(denom);
        }
        out.per_class_f1[scheme.labels[l]] = f1;
        total += f1;
    }
    out.macro_f1 = total / static_cast<double>(n_labels);
    return out;
}

/// Collapse a per-cluster prediction grid to one label set per instance by
/// majority vote under the aggregation tie policy. C = 1 is the identity.
inline std::vector<LabelSet> vote_predictions(
    const std::vector<std::vector<LabelSet>>& per_cluster_preds, const LabelScheme& scheme,
    const TieBreakPolicy& policy, std::vector<TieEvent>* events = nullptr,
    const std::vector<std::string>* instance_ids = nullptr) {
    if (per_cluster_preds.empty()) return {};
    const std::size_t c = per_cluster_preds.front().size();
    if (c == 0) throw InvalidInputError("vote_predictions: zero clusters");
    if (instance_ids != nullptr && instance_ids->size() != per_cluster_preds.size())
        throw ShapeError("vote_predictions: instance id list does not match grid");

    std::vector<LabelSet> out;
    out.reserve(per_cluster_preds.size());
    for (std::size_t i = 0; i < per_cluster_preds.size(); ++i) {
        const auto& row = per_cluster_preds[i];
        if (row.size() != c)
            throw ShapeError("vote_predictions: ragged grid at instance " + std::to_string(i));
        TieContext ctx;
        ctx.global_counts.assign(scheme.n_labels(), 0);
        for (const LabelSet& v : row)
            v.for_each([&](std::size_t l) { ++ctx.global_counts[l]; });
        ctx.global_voters = c;
        ctx.events = events;
        ctx.instance_id =
            instance_ids != nullptr ? (*instance_ids)[i] : std::to_string(i);
        ctx.site = "vote";
        out.push_back(majority_vote(row, scheme, policy, &ctx));
    }
    return out;
}

/// One experiment configuration: which architecture, at which granularity,
/// and every knob the pipeline stages need.
struct ExperimentPlan {
    Approach approach = Approach::majority;
    Granularity granularity = Granularity::clustered;
    std::optional<std::size_t> n_clusters;
    TieBreakPolicy policy;
    TrainConfig train;
    FeatureConfig features;
    std::size_t min_overlap = 2;
    ImputePolicy impute = ImputePolicy::zero;
    ClusterMethod method = ClusterMethod::kmeans;
};

struct EvalReport {
    Approach approach = Approach::majority;
    Granularity granularity = Granularity::clustered;
    std::size_t n_clusters = 1;
    double macro_f1 = 0.0;   // percent
    double accuracy = 0.0;   // percent
    double std_dev = 0.0;    // percent, sample std of macro-F1 over repeats
    std::map<std::string, double> per_class_f1;  // percent
    std::size_t repeats = 0;
    std::vector<std::uint64_t> seeds;

    nlohmann::json to_json() const {
        return {{"approach", to_string(approach)},
                {"granularity", to_string(granularity)},
                {"n_clusters", n_clusters},
                {"macro_f1", macro_f1},
                {"accuracy", accuracy},
                {"std_dev", std_dev},
                {"per_class_f1", per_class_f1},
                {"repeats", repeats},
                {"seeds", seeds}};
    }
};

namespace detail {

template <typename F>
auto with_stage(const char* stage, F&& f) {
    try {
        return f();
    } catch (const Error&) {
        rethrow_prefixed(std::string(stage) + " stage: ");
    }
}

inline ClusterAssignment identity_assignment(const AnnotationMatrix& m) {
    ClusterAssignment a;
    a.n_clusters = m.n_annotators();
    a.annotators = m.annotators();
    a.membership.resize(m.n_annotators());
    for (std::size_t i = 0; i < a.membership.size(); ++i) a.membership[i] = i;
    a.method = ClusterMethod::identity;
    return a;
}

}  // namespace detail

/// Run the full pipeline (agreement, clustering, aggregation, training,
/// voting, metrics) `repeats` times with training seeds seed+0..seed+r-1 and
/// report mean scores with the sample std of macro-F1. Clustering itself uses
/// the root seed, so every repeat scores the same partition.
inline EvalReport run_experiment(const AnnotationMatrix& m, const ExperimentPlan& plan) {
    plan.train.validate();
    plan.features.validate();
    const LabelScheme& scheme = m.scheme();

    ClusterAssignment assignment;
    if (plan.approach == Approach::majority || plan.granularity == Granularity::individual) {
        assignment = detail::identity_assignment(m);
    } else {
        const DistanceMatrix dist = detail::with_stage("agreement", [&] {
            return to_distance(similarity_matrix(m, plan.min_overlap, plan.impute).similarity);
        });
        assignment = detail::with_stage("clustering", [&] {
            const std::size_t c = cluster_count(m, plan.n_clusters);
            return cluster_annotators(dist, c, plan.train.seed, 10, plan.method);
        });
    }

    const ClusteredDataset clustered = detail::with_stage(
        "aggregation", [&] { return aggregate_clusters(m, assignment, plan.policy); });

    std::vector<std::size_t> test_idx;
    for (std::size_t x = 0; x < clustered.n_instances(); ++x) {
        if (clustered.splits[x] == Split::test) test_idx.push_back(x);
    }
    if (test_idx.empty()) throw InvalidInputError("run_experiment: no test instances");
    std::vector<std::string> test_texts;
    std::vector<LabelSet> test_gold;
    for (std::size_t x : test_idx) {
        test_texts.push_back(clustered.texts[x]);
        test_gold.push_back(clustered.gold[x]);
    }

    EvalReport report;
    report.approach = plan.approach;
    report.granularity = plan.granularity;
    report.n_clusters = plan.approach == Approach::majority ? 1 : assignment.n_clusters;
    report.repeats = plan.train.repeats;

    std::vector<double> macro_runs;
    std::vector<double> acc_runs;
    std::map<std::string, double> class_sums;
    for (std::size_t r = 0; r < plan.train.repeats; ++r) {
        TrainConfig cfg = plan.train;
        cfg.seed = plan.train.seed + r;
        report.seeds.push_back(cfg.seed);

        std::vector<LabelSet> preds = detail::with_stage("training", [&] {
            switch (plan.approach) {
                case Approach::majority: {
                    const auto model =
                        train_single<float>(gold_training_set(clustered), scheme, cfg,
                                            plan.features);
                    return model.predict(test_texts);
                }
                case Approach::ensemble: {
                    const auto members = train_ensemble<float>(clustered, cfg, plan.features);
                    const auto grid =
                        predict_grid(members, test_texts, scheme, clustered.n_clusters);
                    return vote_predictions(grid, scheme, plan.policy);
                }
                case Approach::multilabel: {
                    const auto model = train_multilabel_head<float>(clustered, cfg, plan.features);
                    const auto grid =
                        predict_grid(model, test_texts, scheme, clustered.n_clusters);
                    return vote_predictions(grid, scheme, plan.policy);
                }
                case Approach::multitask: {
                    const auto model = train_multitask<float>(clustered, cfg, plan.features);
                    const auto grid =
                        predict_grid(model, test_texts, scheme, clustered.n_clusters);
                    return vote_predictions(grid, scheme, plan.policy);
                }
            }
            throw InvalidConfigError("run_experiment: unknown approach");
        });

        const MetricScores scores =
            detail::with_stage("metrics", [&] { return macro_f1(test_gold, preds, scheme); });
        macro_runs.push_back(scores.macro_f1);
        acc_runs.push_back(scores.accuracy);
        for (const auto& [label, f1] : scores.per_class_f1) class_sums[label] += f1;
    }

    const double n = static_cast<double>(macro_runs.size());
    double macro_mean = 0.0, acc_mean = 0.0;
    for (double v : macro_runs) macro_mean += v;
    for (double v : acc_runs) acc_mean += v;
    macro_mean /= n;
    acc_mean /= n;
    double var = 0.0;
    for (double v : macro_runs) var += (v - macro_mean) * (v - macro_mean);
    const double std_dev = macro_runs.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;

    report.macro_f1 = 100.0 * macro_mean;
    report.accuracy = 100.0 * acc_mean;
    report.std_dev = 100.0 * std_dev;
    for (const auto& [label, total] : class_sums) report.per_class_f1[label] = 100.0 * total / n;
    return report;
}

}  // namespace crowdcluster
