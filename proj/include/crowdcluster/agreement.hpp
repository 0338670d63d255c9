#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdcluster/dataset.hpp"
#include "crowdcluster/errors.hpp"
#include "crowdcluster/matrix.hpp"

namespace crowdcluster {

/// Agreement between one annotator pair. score is the value entered into the
/// similarity matrix; raw_score keeps the unclamped coefficient (NaN when the
/// overlap was too small to score and the value had to be imputed).
struct PairAgreement {
    std::string annotator_a;
    std::string annotator_b;
    std::size_t overlap = 0;
    double score = 0.0;
    double raw_score = std::numeric_limits<double>::quiet_NaN();
    bool imputed = false;
};

struct SimilarityMatrix {
    std::vector<std::string> annotators;
    DenseMatrix values;
    CountMatrix overlaps;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["annotators"] = annotators;
        j["values"] = matrix_to_json(values);
        j["overlaps"] = matrix_to_json(overlaps);
        return j;
    }

    void to_csv(std::ostream& out) const { write_labeled_csv(out, annotators, values); }
};

struct DistanceMatrix {
    std::vector<std::string> annotators;
    DenseMatrix values;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["annotators"] = annotators;
        j["values"] = matrix_to_json(values);
        return j;
    }

    void to_csv(std::ostream& out) const { write_labeled_csv(out, annotators, values); }
};

/// Cohen's kappa over two aligned multiclass label-index vectors. Computed in
/// integer form, kappa = (agree*L - sum_c na_c*nb_c) / (L*L - sum_c na_c*nb_c),
/// so the only rounding is the final division.
inline double cohen_kappa(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    if (a.size() != b.size())
        throw InvalidInputError("cohen_kappa: label vectors differ in length");
    const std::size_t n = a.size();
    if (n < 2) throw InvalidInputError("cohen_kappa: need at least 2 items");

    std::map<std::size_t, std::uint64_t> count_a;
    std::map<std::size_t, std::uint64_t> count_b;
    std::uint64_t agree = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] == b[i]) ++agree;
        ++count_a[a[i]];
        ++count_b[b[i]];
    }
    if (agree == n) return 1.0;

    std::uint64_t chance = 0;
    for (const auto& [label, ca] : count_a) {
        auto it = count_b.find(label);
        if (it != count_b.end()) chance += ca * it->second;
    }
    const std::uint64_t total = static_cast<std::uint64_t>(n) * n;
    if (chance == total) return 0.0;
    const std::int64_t numer = static_cast<std::int64_t>(agree * n) -
                               static_cast<std::int64_t>(chance);
    const std::int64_t denom = static_cast<std::int64_t>(total) -
                               static_cast<std::int64_t>(chance);
    return static_cast<double>(numer) / static_cast<double>(denom);
}

/// Convenience overload on label names; labels are compared as strings.
inline double cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::map<std::string, std::size_t> index;
    auto intern = [&](const std::vector<std::string>& v) {
        std::vector<std::size_t> out;
        out.reserve(v.size());
        for (const auto& s : v) {
            auto [it, _] = index.emplace(s, index.size());
            out.push_back(it->second);
        }
        return out;
    };
    std::vector<std::size_t> ia = intern(a);
    std::vector<std::size_t> ib = intern(b);
    return cohen_kappa(ia, ib);
}

/// Mean per-instance Jaccard over aligned label-set vectors. Two empty sets
/// count as full agreement: both chose "no label applies".
inline double jaccard_agreement(const std::vector<LabelSet>& a, const std::vector<LabelSet>& b) {
    if (a.size() != b.size())
        throw InvalidInputError("jaccard_agreement: set vectors differ in length");
    if (a.empty()) throw InvalidInputError("jaccard_agreement: need at least 1 item");
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const std::size_t inter = (a[i] & b[i]).size();
        const std::size_t uni = (a[i] | b[i]).size();
        total += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    }
    return total / static_cast<double>(a.size());
}

/// Aligned label sets on the instances both annotators covered, in instance
/// index order.
inline std::pair<std::vector<LabelSet>, std::vector<LabelSet>>
co_annotations(const AnnotationMatrix& m, std::size_t a, std::size_t b) {
    const auto& ea = m.annotator_entries(a);
    const auto& eb = m.annotator_entries(b);
    std::vector<LabelSet> out_a;
    std::vector<LabelSet> out_b;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < ea.size() && j < eb.size()) {
        if (ea[i].first < eb[j].first) {
            ++i;
        } else if (eb[j].first < ea[i].first) {
            ++j;
        } else {
            out_a.push_back(ea[i].second);
            out_b.push_back(eb[j].second);
            ++i;
            ++j;
        }
    }
    return {std::move(out_a), std::move(out_b)};
}

enum class ImputePolicy { zero, mean };

struct AgreementResult {
    SimilarityMatrix similarity;
    std::vector<PairAgreement> pairs;
};

/// Pairwise similarity over all annotators: kappa for multiclass schemes,
/// Jaccard for multilabel. Pairs with too little overlap are imputed per
/// policy; negative kappas are clamped to 0 in the matrix so that the
/// distance transform stays in [0, 1]. Raw coefficients live in pairs.
inline AgreementResult similarity_matrix(const AnnotationMatrix& m, std::size_t min_overlap = 2,
                                         ImputePolicy policy = ImputePolicy::zero) {
    const std::size_t n = m.n_annotators();
    if (n < 2) throw InvalidInputError("similarity_matrix: need at least 2 annotators");
    const bool multiclass = m.scheme().task_kind == TaskKind::multiclass;
    // Kappa is undefined below 2 items, Jaccard below 1, whatever the config says.
    const std::size_t floor_overlap = multiclass ? 2 : 1;
    const std::size_t need = std::max(min_overlap, floor_overlap);

    AgreementResult result;
    result.similarity.annotators = m.annotators();
    result.similarity.values = DenseMatrix(n, n, 0.0);
    result.similarity.overlaps = CountMatrix(n, n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        result.similarity.values.at(i, i) = 1.0;
        result.similarity.overlaps.at(i, i) = m.annotator_entries(i).size();
    }

    double defined_sum = 0.0;
    std::size_t defined_count = 0;
    std::vector<std::pair<std::size_t, std::size_t>> imputed_cells;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = i + 1; k < n; ++k) {
            auto [la, lb] = co_annotations(m, i, k);
            PairAgreement pa;
            pa.annotator_a = m.annotators()[i];
            pa.annotator_b = m.annotators()[k];
            pa.overlap = la.size();
            result.similarity.overlaps.at(i, k) = pa.overlap;
            result.similarity.overlaps.at(k, i) = pa.overlap;
            if (pa.overlap < need) {
                pa.imputed = true;
                imputed_cells.emplace_back(i, k);
            } else {
                double raw;
                if (multiclass) {
                    std::vector<std::size_t> va(la.size());
                    std::vector<std::size_t> vb(lb.size());
                    for (std::size_t t = 0; t < la.size(); ++t) {
                        va[t] = la[t].sole();
                        vb[t] = lb[t].sole();
                    }
                    raw = cohen_kappa(va, vb);
                } else {
                    raw = jaccard_agreement(la, lb);
                }
                pa.raw_score = raw;
                pa.score = std::clamp(raw, 0.0, 1.0);
                result.similarity.values.at(i, k) = pa.score;
                result.similarity.values.at(k, i) = pa.score;
                defined_sum += pa.score;
                ++defined_count;
            }
            result.pairs.push_back(std::move(pa));
        }
    }

    double fill = 0.0;
    if (policy == ImputePolicy::mean && defined_count > 0)
        fill = defined_sum / static_cast<double>(defined_count);
    for (auto [i, k] : imputed_cells) {
        result.similarity.values.at(i, k) = fill;
        result.similarity.values.at(k, i) = fill;
    }
    for (auto& pa : result.pairs) {
        if (pa.imputed) pa.score = fill;
    }
    return result;
}

inline DistanceMatrix to_distance(const SimilarityMatrix& sim) {
    DistanceMatrix d;
    d.annotators = sim.annotators;
    const std::size_t n = sim.values.rows;
    d.values = DenseMatrix(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            d.values.at(i, k) = i == k ? 0.0 : 1.0 - sim.values.at(i, k);
        }
    }
    return d;
}

}  // namespace crowdcluster
