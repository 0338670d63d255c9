// Acceptance harness: each numbered criterion prints exactly one PASS/FAIL
// line; the process exits nonzero when any criterion fails. Tolerances and
// budgets are pinned here on purpose.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "crowdcluster/crowdcluster.hpp"

namespace cc = crowdcluster;
namespace fs = std::filesystem;

namespace {

constexpr double kOracleTol = 1e-12;
constexpr double kKappaBudgetSeconds = 5.0;
constexpr int kOracleTrials = 1000;
constexpr int kDistanceMatrices = 200;
constexpr double kAriThreshold = 0.9;
constexpr int kAriSeeds = 20;
constexpr int kAriRequired = 19;
constexpr double kRecoveryBudgetSeconds = 60.0;
constexpr double kMarginPoints = 2.0;
constexpr double kDirectionalBudgetSeconds = 300.0;
constexpr double kGradStep = 1e-4;
constexpr double kGradRelTol = 1e-4;

// Directional-claim fixture: three communities of equal size, each one
// contesting its own signature class, heavy-tailed workloads. The data seed
// pins a workload draw where one community dominates coverage, which is the
// regime where instance-level majority voting corrupts the contested class.
constexpr std::size_t kDirInstances = 2000;
constexpr double kDirDominant = 0.9;
constexpr double kDirAlpha = 1.1;
constexpr double kDirVocabularyOverlap = 0.1;
constexpr std::uint64_t kDirDataSeed = 42;
constexpr std::uint64_t kDirTrainSeed = 7;
constexpr std::size_t kDirEpochs = 6;
constexpr std::size_t kDirRepeats = 5;
constexpr std::uint32_t kDirFeatureDim = 1u << 16;
constexpr std::size_t kDirSharedDim = 64;

struct Outcome {
    bool pass;
    std::string detail;
};

Outcome pass(std::string detail = "") { return {true, std::move(detail)}; }
Outcome fail(std::string detail) { return {false, std::move(detail)}; }

int g_failures = 0;

void run(int index, const char* name, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome outcome{false, ""};
    try {
        outcome = body();
    } catch (const std::exception& e) {
        outcome = fail(std::string("unexpected exception: ") + e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%2d] %s %-18s (%6.2f s)%s%s\n", index, outcome.pass ? "PASS" : "FAIL",
                name, seconds, outcome.detail.empty() ? "" : " ",
                outcome.detail.c_str());
    std::fflush(stdout);
    if (!outcome.pass) ++g_failures;
}

// ---------------------------------------------------------------- criterion 1

Outcome kappa_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    {
        const std::vector<std::string> a = {"pos", "pos", "neg", "neu"};
        const std::vector<std::string> b = {"pos", "neg", "neg", "neu"};
        if (cc::cohen_kappa(a, b) != 7.0 / 11.0)
            return fail("worked example did not equal 7/11 exactly");
    }
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < kOracleTrials; ++trial) {
        const std::size_t classes = 2 + rng() % 4;
        const std::size_t n = 5 + rng() % 46;
        std::vector<std::size_t> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = rng() % classes;
            b[i] = rng() % classes;
        }
        // From-definition oracle: po and pe as plain frequencies.
        std::size_t agree = 0;
        std::vector<double> ca(classes, 0.0), cb(classes, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (a[i] == b[i]) ++agree;
            ca[a[i]] += 1.0;
            cb[b[i]] += 1.0;
        }
        double oracle;
        if (agree == n) {
            oracle = 1.0;
        } else {
            const double dn = static_cast<double>(n);
            const double po = static_cast<double>(agree) / dn;
            double pe = 0.0;
            for (std::size_t c = 0; c < classes; ++c) pe += (ca[c] / dn) * (cb[c] / dn);
            oracle = (po - pe) / (1.0 - pe);
        }
        const double got = cc::cohen_kappa(a, b);
        if (std::abs(got - oracle) > kOracleTol)
            return fail("trial " + std::to_string(trial) + ": |" + std::to_string(got) +
                        " - " + std::to_string(oracle) + "| > 1e-12");
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (seconds >= kKappaBudgetSeconds)
        return fail("runtime " + std::to_string(seconds) + " s exceeds 5 s budget");
    return pass(std::to_string(kOracleTrials) + " randomized pairs within 1e-12");
}

// ---------------------------------------------------------------- criterion 2

Outcome jaccard_oracle() {
    {
        const std::vector<cc::LabelSet> empty_pair(3);
        if (cc::jaccard_agreement(empty_pair, empty_pair) != 1.0)
            return fail("empty-vs-empty convention broke");
    }
    std::mt19937_64 rng(202);
    for (int trial = 0; trial < kOracleTrials; ++trial) {
        const std::size_t labels = 1 + rng() % 6;
        const std::size_t n = 1 + rng() % 30;
        std::vector<cc::LabelSet> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t l = 0; l < labels; ++l) {
                if (rng() % 5 < 2) a[i].add(l);
                if (rng() % 5 < 2) b[i].add(l);
            }
        }
        // Brute-force set-arithmetic oracle.
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::set<std::size_t> sa, sb, inter, uni;
            for (std::size_t l = 0; l < labels; ++l) {
                if (a[i].contains(l)) sa.insert(l);
                if (b[i].contains(l)) sb.insert(l);
            }
            std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(),
                                  std::inserter(inter, inter.begin()));
            std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(),
                           std::inserter(uni, uni.begin()));
            total += uni.empty() ? 1.0
                                 : static_cast<double>(inter.size()) /
                                       static_cast<double>(uni.size());
        }
        const double oracle = total / static_cast<double>(n);
        const double got = cc::jaccard_agreement(a, b);
        if (std::abs(got - oracle) > kOracleTol)
            return fail("trial " + std::to_string(trial) + " off by more than 1e-12");
    }
    return pass(std::to_string(kOracleTrials) + " randomized pairs within 1e-12");
}

// ---------------------------------------------------------------- criterion 3

Outcome distance_contract() {
    std::mt19937_64 rng(303);
    for (int trial = 0; trial < kDistanceMatrices; ++trial) {
        const bool multilabel = trial % 2 == 1;
        const std::size_t n_ann = 3 + rng() % 6;
        const std::size_t n_inst = 8 + rng() % 23;
        const std::size_t n_labels = 2 + rng() % 4;
        cc::LabelScheme scheme;
        scheme.task_kind = multilabel ? cc::TaskKind::multilabel : cc::TaskKind::multiclass;
        for (std::size_t l = 0; l < n_labels; ++l)
            scheme.labels.push_back("l" + std::to_string(l));

        std::vector<cc::AnnotationRecord> records;
        for (std::size_t a = 0; a < n_ann; ++a) {
            for (std::size_t x = 0; x < n_inst; ++x) {
                if (x != a % n_inst && rng() % 4 == 0) continue;
                std::vector<std::string> labels;
                if (multilabel) {
                    for (std::size_t l = 0; l < n_labels; ++l)
                        if (rng() % 3 == 0) labels.push_back(scheme.labels[l]);
                    if (labels.empty()) labels.push_back(scheme.labels[rng() % n_labels]);
                } else {
                    labels.push_back(scheme.labels[rng() % n_labels]);
                }
                records.push_back({"x" + std::to_string(x), "a" + std::to_string(a),
                                   labels, cc::Split::train, ""});
            }
        }
        const cc::AnnotationMatrix m = cc::AnnotationMatrix::from_records(records, scheme);
        const std::size_t min_overlap = 1 + rng() % 3;
        const cc::ImputePolicy impute =
            trial % 4 < 2 ? cc::ImputePolicy::zero : cc::ImputePolicy::mean;
        const cc::SimilarityMatrix sim =
            cc::similarity_matrix(m, min_overlap, impute).similarity;
        const cc::DistanceMatrix dist = cc::to_distance(sim);

        const std::size_t n = sim.values.rows;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double a = sim.values.at(i, j);
                const double d = dist.values.at(i, j);
                if (d != 1.0 - a) return fail("D != 1 - A elementwise");
                if (d != dist.values.at(j, i)) return fail("D not symmetric");
                if (i == j && d != 0.0) return fail("diagonal not zero");
                if (d < 0.0 || d > 1.0) return fail("entry outside [0, 1]");
            }
        }
    }
    return pass(std::to_string(kDistanceMatrices) + " random similarity matrices checked");
}

// ---------------------------------------------------------------- criterion 4

Outcome condition_one() {
    cc::PerspectiveSpec spec;
    spec.scheme.task_kind = cc::TaskKind::multiclass;
    spec.scheme.labels = {"against", "favor", "none"};
    spec.n_perspectives = 2;
    spec.confusion = cc::rotated_confusions(2, 3, 0.85);
    spec.annotators_per_perspective = {2, 3};
    spec.annotations_per_instance = 5;  // equals N: everyone labels everything
    spec.n_instances = 40;
    spec.seed = 3;
    const cc::AnnotationMatrix m = cc::generate(spec).matrix;

    const std::size_t c = cc::cluster_count(m, std::nullopt);
    if (c != m.n_annotators()) return fail("cluster count did not equal N");
    const cc::DistanceMatrix dist =
        cc::to_distance(cc::similarity_matrix(m).similarity);
    const cc::ClusterAssignment assignment = cc::cluster_annotators(dist, c, 9);
    if (assignment.method != cc::ClusterMethod::identity)
        return fail("expected the identity method");
    for (std::size_t i = 0; i < assignment.membership.size(); ++i)
        if (assignment.membership[i] != i) return fail("membership is not the identity");

    const cc::ClusteredDataset clustered = cc::aggregate_clusters(m, assignment, {});
    // Bit-for-bit: cluster c of instance x must equal annotator c's own label.
    std::map<std::string, std::size_t> index_of;
    for (std::size_t i = 0; i < assignment.annotators.size(); ++i)
        index_of[assignment.annotators[i]] = i;
    for (std::size_t a = 0; a < m.n_annotators(); ++a) {
        const std::size_t cluster = index_of.at(m.annotators()[a]);
        for (const auto& [x, set] : m.annotator_entries(a)) {
            const auto& target = clustered.cluster_labels[x][cluster];
            if (!target.has_value()) return fail("cluster label missing under condition 1");
            if (target->raw() != set.raw()) return fail("cluster label differs from annotator");
        }
    }
    return pass("identity clustering, labels bit-for-bit");
}

// ---------------------------------------------------------------- criterion 5

Outcome planted_recovery() {
    const auto t0 = std::chrono::steady_clock::now();
    int successes = 0;
    double min_ari = 1.0;
    for (int s = 1; s <= kAriSeeds; ++s) {
        cc::PerspectiveSpec spec;
        spec.scheme.task_kind = cc::TaskKind::multiclass;
        spec.scheme.labels = {"against", "favor", "none"};
        spec.n_perspectives = 3;
        spec.confusion = cc::rotated_confusions(3, 3, 0.9);
        spec.annotators_per_perspective = {3, 3, 3};
        spec.annotations_per_instance = 3;
        spec.n_instances = 500;
        spec.seed = static_cast<std::uint64_t>(s);
        const cc::SyntheticData data = cc::generate(spec);

        const cc::DistanceMatrix dist =
            cc::to_distance(cc::similarity_matrix(data.matrix).similarity);
        const std::size_t c = cc::cluster_count(data.matrix, std::nullopt);
        const cc::ClusterAssignment assignment =
            cc::cluster_annotators(dist, c, static_cast<std::uint64_t>(s));
        std::vector<std::size_t> planted;
        for (const std::string& name : assignment.annotators)
            planted.push_back(data.planted.at(name));
        const double ari = cc::adjusted_rand_index(assignment.membership, planted);
        min_ari = std::min(min_ari, ari);
        if (ari >= kAriThreshold) ++successes;
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::string detail = std::to_string(successes) + "/" + std::to_string(kAriSeeds) +
                         " seeds at ARI >= 0.9, min ARI " + std::to_string(min_ari);
    if (seconds >= kRecoveryBudgetSeconds)
        return fail("runtime " + std::to_string(seconds) + " s exceeds 60 s budget");
    if (successes < kAriRequired) return fail(detail);
    return pass(detail);
}

// ---------------------------------------------------------------- criterion 6

Outcome directional_claim() {
    const auto t0 = std::chrono::steady_clock::now();
    cc::PerspectiveSpec spec;
    spec.scheme.task_kind = cc::TaskKind::multiclass;
    spec.scheme.labels = {"against", "favor", "none"};
    spec.n_perspectives = 3;
    spec.confusion = cc::contested_confusions(3, 3, kDirDominant);
    spec.annotators_per_perspective = {3, 3, 3};
    spec.workload = cc::Workload::skewed;
    spec.alpha = kDirAlpha;
    spec.annotations_per_instance = 3;
    spec.n_instances = kDirInstances;
    spec.vocabulary_overlap = kDirVocabularyOverlap;
    spec.seed = kDirDataSeed;
    const cc::AnnotationMatrix m = cc::generate(spec).matrix;

    cc::ExperimentPlan plan;
    plan.train.epochs = kDirEpochs;
    plan.train.repeats = kDirRepeats;
    plan.train.seed = kDirTrainSeed;
    plan.train.multitask_dim = kDirSharedDim;
    plan.features.dimension = kDirFeatureDim;

    plan.approach = cc::Approach::multitask;
    plan.granularity = cc::Granularity::clustered;
    const cc::EvalReport clustered_multitask = cc::run_experiment(m, plan);

    plan.approach = cc::Approach::majority;
    const cc::EvalReport majority = cc::run_experiment(m, plan);

    plan.approach = cc::Approach::ensemble;
    plan.granularity = cc::Granularity::individual;
    const cc::EvalReport individual_ensemble = cc::run_experiment(m, plan);

    const double vs_majority = clustered_multitask.macro_f1 - majority.macro_f1;
    const double vs_ensemble = clustered_multitask.macro_f1 - individual_ensemble.macro_f1;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "clustered multitask %.1f vs majority %.1f (+%.1f) vs ensemble %.1f (+%.1f)",
                  clustered_multitask.macro_f1, majority.macro_f1, vs_majority,
                  individual_ensemble.macro_f1, vs_ensemble);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (seconds >= kDirectionalBudgetSeconds)
        return fail("runtime " + std::to_string(seconds) + " s exceeds 300 s budget");
    if (vs_majority < kMarginPoints || vs_ensemble < kMarginPoints)
        return fail(std::string(buf) + "; required margin 2.0");
    return pass(buf);
}

// ---------------------------------------------------------------- criterion 7

Outcome macro_f1_oracle() {
    cc::LabelScheme ab;
    ab.task_kind = cc::TaskKind::multiclass;
    ab.labels = {"A", "B"};
    const std::vector<cc::LabelSet> gold = {
        cc::LabelSet::single(0), cc::LabelSet::single(0), cc::LabelSet::single(1),
        cc::LabelSet::single(1)};
    const std::vector<cc::LabelSet> pred = {
        cc::LabelSet::single(0), cc::LabelSet::single(1), cc::LabelSet::single(1),
        cc::LabelSet::single(1)};
    const cc::MetricScores scores = cc::macro_f1(gold, pred, ab);
    // Exact to double rounding: per-class F1 are the single divisions 2/3 and
    // 4/5, macro is their mean, and 11/15 is the same value up to one ulp.
    if (scores.per_class_f1.at("A") != 2.0 / 3.0) return fail("F1(A) != 2/3 exactly");
    if (scores.per_class_f1.at("B") != 4.0 / 5.0) return fail("F1(B) != 4/5 exactly");
    if (scores.macro_f1 != (2.0 / 3.0 + 4.0 / 5.0) / 2.0)
        return fail("macro != mean(2/3, 4/5) exactly");
    if (std::abs(scores.macro_f1 - 11.0 / 15.0) > 1e-15)
        return fail("macro not within 1e-15 of 11/15");
    if (scores.accuracy != 0.75) return fail("accuracy != 0.75 exactly");

    std::mt19937_64 rng(707);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n_labels = 2 + rng() % 4;
        const std::size_t n = 4 + rng() % 40;
        const bool multilabel = trial % 2 == 1;
        cc::LabelScheme scheme;
        scheme.task_kind = multilabel ? cc::TaskKind::multilabel : cc::TaskKind::multiclass;
        for (std::size_t l = 0; l < n_labels; ++l)
            scheme.labels.push_back("name" + std::to_string(l));
        std::vector<cc::LabelSet> g(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (multilabel) {
                for (std::size_t l = 0; l < n_labels; ++l) {
                    if (rng() % 3 == 0) g[i].add(l);
                    if (rng() % 3 == 0) p[i].add(l);
                }
            } else {
                g[i] = cc::LabelSet::single(rng() % n_labels);
                p[i] = cc::LabelSet::single(rng() % n_labels);
            }
        }
        std::vector<std::size_t> perm(n_labels);
        for (std::size_t l = 0; l < n_labels; ++l) perm[l] = l;
        std::shuffle(perm.begin(), perm.end(), rng);
        cc::LabelScheme permuted = scheme;
        for (std::size_t l = 0; l < n_labels; ++l)
            permuted.labels[perm[l]] = scheme.labels[l];
        auto remap = [&](const std::vector<cc::LabelSet>& in) {
            std::vector<cc::LabelSet> out(in.size());
            for (std::size_t i = 0; i < in.size(); ++i)
                in[i].for_each([&](std::size_t l) { out[i].add(perm[l]); });
            return out;
        };
        const cc::MetricScores base = cc::macro_f1(g, p, scheme);
        const cc::MetricScores moved = cc::macro_f1(remap(g), remap(p), permuted);
        if (std::abs(base.macro_f1 - moved.macro_f1) > kOracleTol)
            return fail("macro-F1 changed under class-name permutation");
        if (base.accuracy != moved.accuracy)
            return fail("accuracy changed under class-name permutation");
        for (std::size_t l = 0; l < n_labels; ++l) {
            const std::string& name = scheme.labels[l];
            if (std::abs(base.per_class_f1.at(name) - moved.per_class_f1.at(name)) >
                kOracleTol)
                return fail("per-class F1 changed for " + name);
        }
    }
    return pass("worked example exact, 300 permutation trials invariant");
}

// ---------------------------------------------------------------- criterion 8

cc::ClusteredDataset gradcheck_fixture(const cc::LabelScheme& scheme,
                                       std::size_t n_clusters, std::size_t n_instances) {
    const std::vector<std::string> words = {"red crate",  "blue crate", "red bird",
                                            "blue bird",  "red wrench", "blue wrench",
                                            "green boat", "green kite", "green drum"};
    cc::ClusteredDataset d;
    d.scheme = scheme;
    d.n_clusters = n_clusters;
    for (std::size_t x = 0; x < n_instances; ++x) {
        d.instances.push_back("i" + std::to_string(x));
        d.splits.push_back(cc::Split::train);
        d.texts.push_back(words[x % words.size()]);
        std::vector<std::optional<cc::LabelSet>> row;
        for (std::size_t c = 0; c < n_clusters; ++c)
            row.emplace_back(cc::LabelSet::single((x + c) % scheme.n_labels()));
        d.cluster_labels.push_back(row);
        d.gold.push_back(cc::LabelSet::single(x % scheme.n_labels()));
    }
    d.coverage.assign(n_clusters, 1.0);
    return d;
}

Outcome gradient_check() {
    cc::LabelScheme scheme;
    scheme.task_kind = cc::TaskKind::multilabel;
    scheme.labels = {"anger", "fear", "joy"};
    cc::ClusteredDataset d = gradcheck_fixture(scheme, 3, 10);
    for (std::size_t x = 0; x < d.n_instances(); ++x) {
        if (x % 3 == 0) d.cluster_labels[x][1].reset();
        if (x % 4 == 1) {
            cc::LabelSet two;
            two.add(0);
            two.add(2);
            d.cluster_labels[x][0] = two;
        }
    }
    cc::FeatureConfig features;
    features.dimension = 1u << 12;
    cc::TrainConfig config;
    config.epochs = 1;
    config.multitask_dim = 8;
    config.seed = 21;
    auto model = cc::train_multitask<double>(d, config, features);
    const std::vector<cc::ClusterExample> examples = cc::cluster_examples(d, features);
    const cc::MultitaskGradients analytic = cc::multitask_gradients(model, examples);

    std::size_t checked = 0;
    double worst = 0.0;
    auto check = [&](double& param, double expected) {
        const double keep = param;
        param = keep + kGradStep;
        const double up = model.dataset_loss(examples);
        param = keep - kGradStep;
        const double down = model.dataset_loss(examples);
        param = keep;
        const double numeric = (up - down) / (2.0 * kGradStep);
        const double scale = std::max({std::abs(numeric), std::abs(expected), kGradStep});
        worst = std::max(worst, std::abs(numeric - expected) / scale);
        ++checked;
    };
    for (const auto& [col, g] : analytic.projection) {
        std::vector<double>& column = model.column(col);
        for (std::size_t r = 0; r < model.shared_dim; ++r) check(column[r], g[r]);
    }
    for (std::size_t r = 0; r < model.shared_dim; ++r)
        check(model.proj_bias[r], analytic.proj_bias[r]);
    for (std::size_t i = 0; i < model.head_w.size(); ++i)
        check(model.head_w[i], analytic.head_w[i]);
    for (std::size_t i = 0; i < model.head_b.size(); ++i)
        check(model.head_b[i], analytic.head_b[i]);
    if (worst >= kGradRelTol)
        return fail("max relative error " + std::to_string(worst) + " over " +
                    std::to_string(checked) + " parameters");

    // MISSING-target masking: head-2 gradients from a masked example are 0.
    cc::LabelScheme binary;
    binary.task_kind = cc::TaskKind::multiclass;
    binary.labels = {"neg", "pos"};
    cc::ClusteredDataset masked = gradcheck_fixture(binary, 3, 6);
    for (std::size_t x = 0; x < masked.n_instances(); ++x)
        masked.cluster_labels[x][2].reset();
    masked.cluster_labels[0][2] = cc::LabelSet::single(0);
    auto masked_model = cc::train_multitask<double>(masked, config, features);
    const auto masked_examples = cc::cluster_examples(masked, features);
    const cc::MultitaskGradients g =
        cc::multitask_gradients(masked_model, {masked_examples[1]});
    for (std::size_t l = 0; l < binary.n_labels(); ++l) {
        const std::size_t row = 2 * binary.n_labels() + l;
        if (g.head_b[row] != 0.0) return fail("masked head bias gradient nonzero");
        for (std::size_t r = 0; r < masked_model.shared_dim; ++r)
            if (g.head_w[row * masked_model.shared_dim + r] != 0.0)
                return fail("masked head weight gradient nonzero");
    }
    return pass("max relative error " + std::to_string(worst) + " over " +
                std::to_string(checked) + " parameters; masked head exactly zero");
}

// ---------------------------------------------------------------- criterion 9

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int run_cli(const fs::path& dir, const std::string& args) {
    const std::string cmd = "cd " + dir.string() + " && " + CROWDCLUSTER_CLI_PATH + " " +
                            args + " > cli_stdout.txt 2> cli_stderr.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome pipeline_determinism() {
    const fs::path dir = fs::temp_directory_path() / "crowdcluster_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "spec.json") << R"({
      "scheme": {"task_kind": "multiclass", "labels": ["against", "favor", "none"]},
      "n_perspectives": 3,
      "annotators_per_perspective": [3, 3, 3],
      "annotations_per_instance": 3,
      "n_instances": 150,
      "confusion_preset": {"family": "rotated", "dominant": 0.9},
      "seed": 7
    })";
    std::ofstream(dir / "config.json") << R"({
      "scheme": {"task_kind": "multiclass", "labels": ["against", "favor", "none"]},
      "seed": 7,
      "train": {"epochs": 4, "repeats": 2},
      "features": {"dimension": 4096}
    })";
    if (run_cli(dir, "simulate spec.json --out sim") != 0)
        return fail("simulate failed: " + slurp(dir / "cli_stderr.txt"));
    if (run_cli(dir, "pipeline sim/dataset.jsonl --config config.json --out run1") != 0)
        return fail("first pipeline run failed: " + slurp(dir / "cli_stderr.txt"));
    if (run_cli(dir, "pipeline sim/dataset.jsonl --config config.json --out run2") != 0)
        return fail("second pipeline run failed: " + slurp(dir / "cli_stderr.txt"));

    std::size_t compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(dir / "run1")) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), dir / "run1");
        if (!fs::exists(dir / "run2" / rel))
            return fail("second run missing " + rel.string());
        if (slurp(entry.path()) != slurp(dir / "run2" / rel))
            return fail(rel.string() + " differs between runs");
        ++compared;
    }
    if (compared < 15) return fail("only " + std::to_string(compared) + " artifacts found");
    return pass(std::to_string(compared) + " artifacts byte-identical");
}

// --------------------------------------------------------------- criterion 10

Outcome tie_policy() {
    cc::LabelScheme scheme;
    scheme.task_kind = cc::TaskKind::multiclass;
    scheme.labels = {"hate", "abuse", "neither"};
    cc::TieBreakPolicy policy;
    policy.priority = {"hate"};

    std::vector<cc::TieEvent> events;
    cc::TieContext ctx;
    ctx.events = &events;
    ctx.instance_id = "t0";
    ctx.site = "gold";
    const std::vector<cc::LabelSet> votes = {
        cc::LabelSet::single(0), cc::LabelSet::single(0), cc::LabelSet::single(1),
        cc::LabelSet::single(1)};
    const cc::LabelSet resolved = cc::majority_vote(votes, scheme, policy, &ctx);
    if (resolved != cc::LabelSet::single(0)) return fail("2-2 vote did not resolve to hate");
    if (events.size() != 1 || events[0].rule != "priority_label" ||
        events[0].resolved != "hate")
        return fail("tie event not recorded with the priority rule");

    // End to end: two clusters of two annotators, ties at both cluster sites
    // and the gold site; each resolution must show up in the CSV.
    std::vector<cc::AnnotationRecord> records;
    auto vote = [&](const std::string& inst, const std::string& ann,
                    const std::string& label) {
        records.push_back({inst, ann, {label}, cc::Split::train, ""});
    };
    // t0: full 2-2 split inside each cluster and overall.
    vote("t0", "a0", "hate");
    vote("t0", "a1", "abuse");
    vote("t0", "b0", "hate");
    vote("t0", "b1", "abuse");
    // t1: agreement, no tie anywhere.
    vote("t1", "a0", "neither");
    vote("t1", "a1", "neither");
    vote("t1", "b0", "neither");
    vote("t1", "b1", "neither");
    const cc::AnnotationMatrix m =
        cc::AnnotationMatrix::from_records(records, scheme);
    cc::ClusterAssignment assignment;
    assignment.n_clusters = 2;
    assignment.annotators = {"a0", "a1", "b0", "b1"};
    assignment.membership = {0, 0, 1, 1};
    const cc::ClusteredDataset clustered =
        cc::aggregate_clusters(m, assignment, policy);

    if (clustered.gold[0] != cc::LabelSet::single(0))
        return fail("gold tie on t0 did not resolve to hate");
    std::ostringstream csv;
    clustered.tie_report_csv(csv);
    const std::string report = csv.str();
    if (report.find("instance_id,site,tied,resolved,rule") == std::string::npos)
        return fail("tie report header missing");
    for (const char* needle :
         {"t0,cluster_0,hate|abuse,hate,priority_label",
          "t0,cluster_1,hate|abuse,hate,priority_label",
          "t0,gold,hate|abuse,hate,priority_label"}) {
        if (report.find(needle) == std::string::npos)
            return fail(std::string("missing tie row: ") + needle);
    }
    if (clustered.ties.size() != 3)
        return fail("expected exactly 3 recorded ties, got " +
                    std::to_string(clustered.ties.size()));
    if (report.find("t1,") != std::string::npos)
        return fail("untied instance leaked into the tie report");
    return pass("hate wins the 2-2 vote; all 3 resolutions in the CSV");
}

}  // namespace

int main() {
    // Keep the one-line-per-criterion report clean; randomized fixtures
    // legitimately trip the absent-class warning.
    cc::log_sink() = [](cc::LogLevel, const std::string&) {};
    std::printf("crowdcluster acceptance criteria\n");
    run(1, "kappa oracle", kappa_oracle);
    run(2, "jaccard oracle", jaccard_oracle);
    run(3, "distance contract", distance_contract);
    run(4, "condition 1", condition_one);
    run(5, "planted recovery", planted_recovery);
    run(6, "directional claim", directional_claim);
    run(7, "macro-F1 oracle", macro_f1_oracle);
    run(8, "gradient check", gradient_check);
    run(9, "determinism", pipeline_determinism);
    run(10, "tie policy", tie_policy);
    if (g_failures == 0) {
        std::printf("all 10 criteria passed\n");
        return 0;
    }
    std::printf("%d criteria failed\n", g_failures);
    return 1;
}
