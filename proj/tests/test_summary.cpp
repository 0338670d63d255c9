#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "crowdcluster/summary.hpp"

using namespace crowdcluster;

namespace {

LabelScheme sentiment_scheme() {
    LabelScheme s;
    s.task_kind = TaskKind::multiclass;
    s.labels = {"pos", "neg", "neu"};
    return s;
}

}  // namespace

TEST_CASE("summary counts and agreement percentage") {
    LabelScheme s = sentiment_scheme();
    // 4 instances; full agreement on all but x2.
    std::vector<AnnotationRecord> records = {
        {"x1", "a1", {"pos"}, Split::train, ""}, {"x1", "a2", {"pos"}, Split::train, ""},
        {"x2", "a1", {"pos"}, Split::train, ""}, {"x2", "a2", {"neg"}, Split::train, ""},
        {"x3", "a1", {"neu"}, Split::dev, ""},   {"x3", "a2", {"neu"}, Split::dev, ""},
        {"x4", "a1", {"neg"}, Split::test, ""},  {"x4", "a2", {"neg"}, Split::test, ""},
    };
    auto m = AnnotationMatrix::from_records(records, s);
    auto sum = summarize(m);

    REQUIRE(sum.pct_full_agreement == 75.0);
    REQUIRE(sum.n_train == 2);
    REQUIRE(sum.n_dev == 1);
    REQUIRE(sum.n_test == 1);
    REQUIRE(sum.total_annotators == 2);
    REQUIRE(sum.annotators_per_instance_min == 2);
    REQUIRE(sum.annotators_per_instance_max == 2);
    REQUIRE(sum.annotators_per_instance_mean == 2.0);
    REQUIRE(sum.annotation_counts_per_annotator.at("a1") == 4);
}

TEST_CASE("annotators per instance minimum") {
    LabelScheme s = sentiment_scheme();
    std::vector<AnnotationRecord> records;
    const std::size_t counts[] = {3, 3, 4, 5};
    for (std::size_t x = 0; x < 4; ++x) {
        for (std::size_t a = 0; a < counts[x]; ++a) {
            records.push_back({"x" + std::to_string(x), "a" + std::to_string(a), {"pos"},
                               Split::train, ""});
        }
    }
    auto m = AnnotationMatrix::from_records(records, s);
    auto sum = summarize(m);
    REQUIRE(sum.annotators_per_instance_min == 3);
    REQUIRE(sum.annotators_per_instance_max == 5);
}

TEST_CASE("identical annotators give overall kappa 1") {
    LabelScheme s = sentiment_scheme();
    std::vector<AnnotationRecord> records;
    const char* labels[] = {"pos", "neg", "neu", "pos", "neg"};
    for (const auto* a : {"a1", "a2"}) {
        for (std::size_t x = 0; x < 5; ++x)
            records.push_back({"x" + std::to_string(x), a, {labels[x]}, Split::train, ""});
    }
    auto m = AnnotationMatrix::from_records(records, s);
    auto sum = summarize(m);
    REQUIRE(sum.overall_kappa == 1.0);
    REQUIRE(sum.pct_full_agreement == 100.0);
}

TEST_CASE("overall kappa is the overlap-weighted pair mean") {
    LabelScheme s = sentiment_scheme();
    // a1/a2 share 4 instances, a1/a3 share 2; a2/a3 share 2.
    std::vector<AnnotationRecord> records = {
        {"x1", "a1", {"pos"}, Split::train, ""}, {"x1", "a2", {"pos"}, Split::train, ""},
        {"x2", "a1", {"pos"}, Split::train, ""}, {"x2", "a2", {"neg"}, Split::train, ""},
        {"x3", "a1", {"neg"}, Split::train, ""}, {"x3", "a2", {"neg"}, Split::train, ""},
        {"x4", "a1", {"neu"}, Split::train, ""}, {"x4", "a2", {"neu"}, Split::train, ""},
        {"x5", "a1", {"pos"}, Split::train, ""}, {"x5", "a3", {"pos"}, Split::train, ""},
        {"x6", "a1", {"neg"}, Split::train, ""}, {"x6", "a3", {"pos"}, Split::train, ""},
        {"x5", "a2", {"pos"}, Split::train, ""}, {"x6", "a2", {"neg"}, Split::train, ""},
    };
    auto m = AnnotationMatrix::from_records(records, s);
    auto sum = summarize(m);

    // Direct weighted mean over the three pairs.
    auto kappa_of = [&](const char* a, const char* b) {
        std::size_t ia = m.n_annotators();
        std::size_t ib = m.n_annotators();
        for (std::size_t i = 0; i < m.n_annotators(); ++i) {
            if (m.annotators()[i] == a) ia = i;
            if (m.annotators()[i] == b) ib = i;
        }
        auto [la, lb] = co_annotations(m, ia, ib);
        std::vector<std::size_t> va;
        std::vector<std::size_t> vb;
        for (std::size_t i = 0; i < la.size(); ++i) {
            va.push_back(la[i].sole());
            vb.push_back(lb[i].sole());
        }
        return std::make_pair(cohen_kappa(va, vb), la.size());
    };
    auto [k12, o12] = kappa_of("a1", "a2");
    auto [k13, o13] = kappa_of("a1", "a3");
    auto [k23, o23] = kappa_of("a2", "a3");
    const double want = (k12 * o12 + k13 * o13 + k23 * o23) /
                        static_cast<double>(o12 + o13 + o23);
    REQUIRE_THAT(sum.overall_kappa, Catch::Matchers::WithinAbs(want, 1e-12));
}

TEST_CASE("no scorable pairs warns and reports zero") {
    LabelScheme s = sentiment_scheme();
    std::vector<AnnotationRecord> records = {
        {"x1", "a1", {"pos"}, Split::train, ""},
        {"x2", "a2", {"neg"}, Split::train, ""},
    };
    auto m = AnnotationMatrix::from_records(records, s);
    std::vector<std::string> warnings;
    log_sink() = [&](LogLevel l, const std::string& msg) {
        if (l == LogLevel::warn) warnings.push_back(msg);
    };
    auto sum = summarize(m);
    log_sink() = nullptr;
    REQUIRE(sum.overall_kappa == 0.0);
    REQUIRE_FALSE(warnings.empty());
}

TEST_CASE("label distribution from majority votes") {
    LabelScheme s = sentiment_scheme();
    std::vector<AnnotationRecord> records = {
        {"x1", "a1", {"pos"}, Split::train, ""}, {"x1", "a2", {"pos"}, Split::train, ""},
        {"x2", "a1", {"pos"}, Split::train, ""}, {"x2", "a2", {"pos"}, Split::train, ""},
        {"x3", "a1", {"neg"}, Split::train, ""}, {"x3", "a2", {"neg"}, Split::train, ""},
        {"x4", "a1", {"neu"}, Split::train, ""}, {"x4", "a2", {"neu"}, Split::train, ""},
    };
    auto m = AnnotationMatrix::from_records(records, s);
    auto sum = summarize(m);

    REQUIRE(sum.label_distribution.at("pos") == 50.0);
    REQUIRE(sum.label_distribution.at("neg") == 25.0);
    REQUIRE(sum.label_distribution.at("neu") == 25.0);
    double total = 0.0;
    for (const auto& [_, pct] : sum.label_distribution) total += pct;
    REQUIRE_THAT(total, Catch::Matchers::WithinAbs(100.0, 0.5));
}

TEST_CASE("multilabel distribution counts occurrences") {
    LabelScheme s;
    s.task_kind = TaskKind::multilabel;
    s.labels = {"anger", "joy"};
    std::vector<AnnotationRecord> records = {
        {"x1", "a1", {"anger", "joy"}, Split::train, ""},
        {"x1", "a2", {"anger", "joy"}, Split::train, ""},
        {"x2", "a1", {}, Split::train, ""},
        {"x2", "a2", {}, Split::train, ""},
    };
    auto m = AnnotationMatrix::from_records(records, s);
    auto sum = summarize(m);

    // Gold is {anger, joy} and {}; three occurrence slots in total.
    REQUIRE_THAT(sum.label_distribution.at("anger"),
                 Catch::Matchers::WithinAbs(100.0 / 3.0, 1e-9));
    REQUIRE_THAT(sum.label_distribution.at("(none)"),
                 Catch::Matchers::WithinAbs(100.0 / 3.0, 1e-9));
    double total = 0.0;
    for (const auto& [_, pct] : sum.label_distribution) total += pct;
    REQUIRE_THAT(total, Catch::Matchers::WithinAbs(100.0, 0.5));

    // Binarized pair kappa: identical annotators still score 1.
    REQUIRE(sum.overall_kappa == 1.0);
}

TEST_CASE("summarize is pure and exports cleanly") {
    LabelScheme s = sentiment_scheme();
    std::vector<AnnotationRecord> records = {
        {"x1", "a1", {"pos"}, Split::train, ""}, {"x1", "a2", {"neg"}, Split::train, ""},
        {"x2", "a1", {"neg"}, Split::train, ""}, {"x2", "a2", {"neg"}, Split::train, ""},
    };
    auto m = AnnotationMatrix::from_records(records, s);
    auto s1 = summarize(m);
    auto s2 = summarize(m);
    REQUIRE(s1.to_json() == s2.to_json());

    std::ostringstream csv;
    s1.to_csv(csv);
    const std::string text = csv.str();
    REQUIRE(text.rfind("n_train,", 0) == 0);
    REQUIRE(std::count(text.begin(), text.end(), '\n') == 2);

    std::ostringstream csv_no_header;
    s1.to_csv(csv_no_header, false);
    const std::string row = csv_no_header.str();
    REQUIRE(std::count(row.begin(), row.end(), '\n') == 1);
}
