#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "crowdcluster/agreement.hpp"
#include "crowdcluster/summary.hpp"
#include "crowdcluster/synthetic.hpp"

using namespace crowdcluster;

namespace {

LabelScheme stance_scheme() {
    LabelScheme s;
    s.task_kind = TaskKind::multiclass;
    s.labels = {"against", "favor", "none"};
    return s;
}

PerspectiveSpec base_spec() {
    PerspectiveSpec spec;
    spec.scheme = stance_scheme();
    spec.n_perspectives = 3;
    spec.confusion = rotated_confusions(3, 3, 0.9);
    spec.annotators_per_perspective = {3, 3, 3};
    spec.annotations_per_instance = 3;
    spec.n_instances = 500;
    spec.seed = 1;
    return spec;
}

double pair_kappa(const AnnotationMatrix& m, std::size_t a, std::size_t b) {
    const auto [la, lb] = co_annotations(m, a, b);
    std::vector<std::size_t> ia, ib;
    for (const LabelSet& s : la) ia.push_back(s.sole());
    for (const LabelSet& s : lb) ib.push_back(s.sole());
    return cohen_kappa(ia, ib);
}

}  // namespace

TEST_CASE("spec validation catches malformed populations", "[synthetic]") {
    PerspectiveSpec spec = base_spec();
    REQUIRE_NOTHROW(spec.validate());

    spec.n_perspectives = 0;
    REQUIRE_THROWS_AS(spec.validate(), InvalidConfigError);

    spec = base_spec();
    spec.annotators_per_perspective = {3, 3};
    REQUIRE_THROWS_AS(spec.validate(), InvalidConfigError);

    spec = base_spec();
    spec.confusion[1].data[0] = 0.5;  // row no longer sums to 1
    REQUIRE_THROWS_AS(spec.validate(), InvalidConfigError);

    spec = base_spec();
    spec.annotations_per_instance = 10;
    REQUIRE_THROWS_AS(spec.validate(), InvalidConfigError);

    spec = base_spec();
    spec.vocabulary_per_class = {{"a"}, {}, {"b"}};
    REQUIRE_THROWS_AS(spec.validate(), InvalidConfigError);

    spec = base_spec();
    spec.workload = Workload::skewed;
    spec.alpha = 0.0;
    REQUIRE_THROWS_AS(spec.validate(), InvalidConfigError);
}

TEST_CASE("confusion helpers produce row-stochastic matrices", "[synthetic]") {
    for (const auto& family :
         {rotated_confusions(3, 4, 0.85), contested_confusions(3, 4, 0.85)}) {
        REQUIRE(family.size() == 3);
        for (const DenseMatrix& m : family) {
            for (std::size_t r = 0; r < m.rows; ++r) {
                double sum = 0.0;
                for (std::size_t c = 0; c < m.cols; ++c) sum += m.at(r, c);
                REQUIRE_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-12));
            }
        }
    }

    // Rotation: perspective p sends class c to (c+p) mod L.
    const auto rot = rotated_confusions(3, 3, 0.9);
    REQUIRE(rot[1].at(0, 1) == 0.9);
    REQUIRE(rot[2].at(2, 1) == 0.9);
    // Contested: perspective p only disagrees on class p.
    const auto con = contested_confusions(3, 3, 0.9);
    REQUIRE(con[1].at(0, 0) == 0.9);
    REQUIRE(con[1].at(1, 2) == 0.9);
    REQUIRE(con[1].at(2, 2) == 0.9);
}

TEST_CASE("one perspective with identity confusion agrees everywhere", "[synthetic]") {
    PerspectiveSpec spec = base_spec();
    spec.n_perspectives = 1;
    spec.confusion = rotated_confusions(1, 3, 1.0);
    spec.annotators_per_perspective = {4};
    spec.n_instances = 120;

    const SyntheticData data = generate(spec);
    const DatasetSummary summary = summarize(data.matrix);
    REQUIRE(summary.pct_full_agreement == 100.0);
    REQUIRE_THAT(summary.overall_kappa, Catch::Matchers::WithinAbs(1.0, 1e-12));

    // Every pair with overlap is at kappa 1 in the similarity matrix.
    const AgreementResult agreement = similarity_matrix(data.matrix, 2);
    for (const PairAgreement& p : agreement.pairs) {
        if (!p.imputed) REQUIRE_THAT(p.score, Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("generation is byte-identical under a fixed seed", "[synthetic]") {
    const PerspectiveSpec spec = base_spec();
    const SyntheticData a = generate(spec);
    const SyntheticData b = generate(spec);
    REQUIRE(a.matrix == b.matrix);
    REQUIRE(a.planted == b.planted);
    REQUIRE(a.sidecar().dump() == b.sidecar().dump());

    PerspectiveSpec other = spec;
    other.seed = 2;
    REQUIRE_FALSE(generate(other).matrix == a.matrix);
}

TEST_CASE("planted perspectives separate intra from inter kappa", "[synthetic]") {
    // Mean agreement gap across 20 seeds; rotated confusions make
    // cross-perspective annotators systematically disagree.
    double gap_total = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        PerspectiveSpec spec = base_spec();
        spec.seed = seed;
        const SyntheticData data = generate(spec);

        double intra = 0.0, inter = 0.0;
        std::size_t n_intra = 0, n_inter = 0;
        const std::size_t n = data.matrix.n_annotators();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const auto [la, lb] = co_annotations(data.matrix, i, j);
                if (la.size() < 2) continue;
                const double k = pair_kappa(data.matrix, i, j);
                const std::size_t pi = data.planted.at(data.matrix.annotators()[i]);
                const std::size_t pj = data.planted.at(data.matrix.annotators()[j]);
                if (pi == pj) {
                    intra += k;
                    ++n_intra;
                } else {
                    inter += k;
                    ++n_inter;
                }
            }
        }
        REQUIRE(n_intra > 0);
        REQUIRE(n_inter > 0);
        gap_total += intra / static_cast<double>(n_intra) -
                     inter / static_cast<double>(n_inter);
    }
    REQUIRE(gap_total / 20.0 > 0.3);
}

TEST_CASE("skewed workloads concentrate annotations", "[synthetic]") {
    PerspectiveSpec spec = base_spec();
    spec.n_perspectives = 1;
    spec.confusion = rotated_confusions(1, 3, 0.9);
    spec.annotators_per_perspective = {11};
    spec.workload = Workload::skewed;
    spec.alpha = 2.0;
    spec.n_instances = 500;
    spec.seed = 7;

    const SyntheticData data = generate(spec);
    std::size_t min_count = std::numeric_limits<std::size_t>::max(), max_count = 0;
    for (std::size_t a = 0; a < data.matrix.n_annotators(); ++a) {
        const std::size_t c = data.matrix.annotator_entries(a).size();
        min_count = std::min(min_count, c);
        max_count = std::max(max_count, c);
    }
    REQUIRE(min_count >= 1);
    REQUIRE(static_cast<double>(max_count) / static_cast<double>(min_count) > 5.0);
}

TEST_CASE("idle annotators are given a slot by the fix-up", "[synthetic]") {
    PerspectiveSpec spec = base_spec();
    spec.n_perspectives = 1;
    spec.confusion = rotated_confusions(1, 3, 0.9);
    spec.annotators_per_perspective = {12};
    spec.workload = Workload::skewed;
    spec.alpha = 1.2;  // extreme skew: some annotators never get sampled
    spec.annotations_per_instance = 2;
    spec.n_instances = 40;
    spec.seed = 3;

    const SyntheticData data = generate(spec);
    REQUIRE(data.matrix.n_annotators() == 12);
    for (std::size_t a = 0; a < 12; ++a)
        REQUIRE(data.matrix.annotator_entries(a).size() >= 1);
}

TEST_CASE("instances split 80/10/10 by index", "[synthetic]") {
    PerspectiveSpec spec = base_spec();
    spec.n_instances = 10;
    const SyntheticData data = generate(spec);
    REQUIRE(data.matrix.instances_in_split(Split::train).size() == 8);
    REQUIRE(data.matrix.instances_in_split(Split::dev).size() == 1);
    REQUIRE(data.matrix.instances_in_split(Split::test).size() == 1);
}

TEST_CASE("infeasible coverage is an error", "[synthetic]") {
    PerspectiveSpec spec = base_spec();
    spec.n_perspectives = 1;
    spec.confusion = rotated_confusions(1, 3, 0.9);
    spec.annotators_per_perspective = {5};
    spec.annotations_per_instance = 2;
    spec.n_instances = 1;  // 2 slots can never cover 5 annotators
    REQUIRE_THROWS_AS(generate(spec), ConsistencyError);
}

TEST_CASE("multilabel generation flips label presence per perspective", "[synthetic]") {
    LabelScheme scheme;
    scheme.task_kind = TaskKind::multilabel;
    scheme.labels = {"anger", "fear", "joy"};

    PerspectiveSpec spec;
    spec.scheme = scheme;
    spec.n_perspectives = 2;
    spec.flip_probs = {{0.0, 0.0, 0.0}, {0.5, 0.0, 0.0}};
    spec.annotators_per_perspective = {2, 2};
    spec.annotations_per_instance = 3;
    spec.n_instances = 200;
    spec.seed = 5;

    const SyntheticData data = generate(spec);
    REQUIRE(data.matrix.n_annotators() == 4);

    // Perspective 0 annotators reproduce the planted truth exactly.
    const auto& ids = data.matrix.annotators();
    for (std::size_t a = 0; a < 4; ++a) {
        if (data.planted.at(ids[a]) != 0) continue;
        for (const auto& [inst, labels] : data.matrix.annotator_entries(a)) {
            const std::string inst_id = data.matrix.instances()[inst];
            REQUIRE(labels == data.true_labels.at(inst_id));
        }
    }

    // Perspective 1 disagrees with the truth on anger for a fair share.
    std::size_t flips = 0, total = 0;
    for (std::size_t a = 0; a < 4; ++a) {
        if (data.planted.at(ids[a]) != 1) continue;
        for (const auto& [inst, labels] : data.matrix.annotator_entries(a)) {
            const std::string inst_id = data.matrix.instances()[inst];
            const LabelSet truth = data.true_labels.at(inst_id);
            ++total;
            if (labels.contains(0) != truth.contains(0)) ++flips;
            REQUIRE(labels.contains(1) == truth.contains(1));
            REQUIRE(labels.contains(2) == truth.contains(2));
        }
    }
    REQUIRE(total > 50);
    REQUIRE(static_cast<double>(flips) / static_cast<double>(total) > 0.3);
    REQUIRE(static_cast<double>(flips) / static_cast<double>(total) < 0.7);
}
