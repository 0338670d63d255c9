#pragma once

#include <algorithm>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdcluster/aggregation.hpp"
#include "crowdcluster/agreement.hpp"
#include "crowdcluster/dataset.hpp"
#include "crowdcluster/log.hpp"
#include "crowdcluster/matrix.hpp"

namespace crowdcluster {

/// Table-1-style dataset statistics.
struct DatasetSummary {
    std::size_t n_train = 0;
    std::size_t n_dev = 0;
    std::size_t n_test = 0;
    std::size_t total_annotators = 0;
    std::size_t annotators_per_instance_min = 0;
    std::size_t annotators_per_instance_max = 0;
    double annotators_per_instance_mean = 0.0;
    std::map<std::string, double> label_distribution;
    double pct_full_agreement = 0.0;
    double overall_kappa = 0.0;
    std::map<std::string, std::size_t> annotation_counts_per_annotator;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["n_train"] = n_train;
        j["n_dev"] = n_dev;
        j["n_test"] = n_test;
        j["total_annotators"] = total_annotators;
        j["annotators_per_instance"] = {{"min", annotators_per_instance_min},
                                        {"mean", annotators_per_instance_mean},
                                        {"max", annotators_per_instance_max}};
        j["label_distribution"] = label_distribution;
        j["pct_full_agreement"] = pct_full_agreement;
        // Weighted-mean convention over pairwise kappas, not a paper-defined
        // quantity; see kappa_convention.
        j["overall_kappa"] = overall_kappa;
        j["kappa_convention"] = "overlap-weighted mean of pairwise kappas, pairs with overlap < 2 excluded";
        j["annotation_counts_per_annotator"] = annotation_counts_per_annotator;
        return j;
    }

    /// One concatenation-friendly CSV row; per-annotator counts stay in JSON.
    void to_csv(std::ostream& out, bool with_header = true) const {
        if (with_header)
            out << "n_train,n_dev,n_test,total_annotators,ann_per_inst_min,ann_per_inst_mean,"
                   "ann_per_inst_max,pct_full_agreement,overall_kappa,label_distribution\n";
        std::string dist;
        for (const auto& [label, pct] : label_distribution) {
            if (!dist.empty()) dist += ';';
            dist += label + "=" + format_double(pct);
        }
        out << n_train << ',' << n_dev << ',' << n_test << ',' << total_annotators << ','
            << annotators_per_instance_min << ',' << format_double(annotators_per_instance_mean)
            << ',' << annotators_per_instance_max << ',' << format_double(pct_full_agreement)
            << ',' << format_double(overall_kappa) << ',' << csv_escape(dist) << '\n';
    }
};

namespace detail {

/// Pairwise kappa for the overall statistic. Multilabel pairs are binarized:
/// one 0/1 presence item per (co-annotated instance, label).
inline double pair_kappa(const AnnotationMatrix& m, std::size_t a, std::size_t b,
                         std::size_t* overlap_out) {
    auto [la, lb] = co_annotations(m, a, b);
    *overlap_out = la.size();
    if (la.size() < 2) return 0.0;
    std::vector<std::size_t> va;
    std::vector<std::size_t> vb;
    if (m.scheme().task_kind == TaskKind::multiclass) {
        for (std::size_t i = 0; i < la.size(); ++i) {
            va.push_back(la[i].sole());
            vb.push_back(lb[i].sole());
        }
    } else {
        for (std::size_t i = 0; i < la.size(); ++i) {
            for (std::size_t l = 0; l < m.scheme().n_labels(); ++l) {
                va.push_back(la[i].contains(l) ? 1 : 0);
                vb.push_back(lb[i].contains(l) ? 1 : 0);
            }
        }
    }
    return cohen_kappa(va, vb);
}

}  // namespace detail

inline DatasetSummary summarize(const AnnotationMatrix& m, const TieBreakPolicy& policy = {}) {
    policy.validate(m.scheme());
    DatasetSummary s;
    s.total_annotators = m.n_annotators();

    std::size_t full_agreement = 0;
    std::vector<LabelSet> gold;
    s.annotators_per_instance_min = m.n_annotators() + 1;
    for (std::size_t x = 0; x < m.n_instances(); ++x) {
        switch (m.split(x)) {
            case Split::train: ++s.n_train; break;
            case Split::dev: ++s.n_dev; break;
            case Split::test: ++s.n_test; break;
        }
        const auto& entries = m.instance_entries(x);
        s.annotators_per_instance_min = std::min(s.annotators_per_instance_min, entries.size());
        s.annotators_per_instance_max = std::max(s.annotators_per_instance_max, entries.size());

        bool identical = true;
        std::vector<LabelSet> votes;
        for (const auto& [a, set] : entries) {
            votes.push_back(set);
            if (set != entries[0].second) identical = false;
        }
        if (identical) ++full_agreement;
        gold.push_back(majority_vote(votes, m.scheme(), policy));
    }
    s.annotators_per_instance_mean =
        static_cast<double>(m.n_entries()) / static_cast<double>(m.n_instances());
    s.pct_full_agreement =
        100.0 * static_cast<double>(full_agreement) / static_cast<double>(m.n_instances());

    // Distribution over majority-vote labels. Multilabel distributions count
    // label occurrences, with "(none)" covering empty gold sets, so the
    // percentages still sum to 100.
    std::map<std::string, std::size_t> occur;
    std::size_t total_occur = 0;
    for (const LabelSet& g : gold) {
        if (g.empty()) {
            ++occur["(none)"];
            ++total_occur;
            continue;
        }
        g.for_each([&](std::size_t l) {
            ++occur[m.scheme().labels[l]];
            ++total_occur;
        });
    }
    for (const auto& [label, count] : occur) {
        s.label_distribution[label] =
            100.0 * static_cast<double>(count) / static_cast<double>(total_occur);
    }

    for (std::size_t a = 0; a < m.n_annotators(); ++a)
        s.annotation_counts_per_annotator[m.annotators()[a]] = m.annotator_entries(a).size();

    if (m.n_annotators() < 2) {
        s.overall_kappa = 1.0;
        return s;
    }
    double weighted = 0.0;
    std::size_t weight_total = 0;
    for (std::size_t a = 0; a < m.n_annotators(); ++a) {
        for (std::size_t b = a + 1; b < m.n_annotators(); ++b) {
            std::size_t overlap = 0;
            const double kappa = detail::pair_kappa(m, a, b, &overlap);
            if (overlap < 2) continue;
            weighted += kappa * static_cast<double>(overlap);
            weight_total += overlap;
        }
    }
    if (weight_total == 0) {
        log_warn("overall_kappa: no annotator pair overlaps on 2+ instances; reporting 0");
        s.overall_kappa = 0.0;
    } else {
        s.overall_kappa = weighted / static_cast<double>(weight_total);
    }
    return s;
}

}  // namespace crowdcluster
