#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdcluster/dataset.hpp"
#include "crowdcluster/errors.hpp"
#include "crowdcluster/matrix.hpp"
#include "crowdcluster/rng.hpp"

namespace crowdcluster {

enum class Workload { uniform, skewed };

inline const char* to_string(Workload w) {
    return w == Workload::uniform ? "uniform" : "skewed";
}

inline Workload workload_from_string(const std::string& s) {
    if (s == "uniform") return Workload::uniform;
    if (s == "skewed") return Workload::skewed;
    throw InvalidInputError("unknown workload '" + s + "'");
}

inline std::vector<DenseMatrix> rotated_confusions(std::size_t k, std::size_t l,
                                                   double dominant);
inline std::vector<DenseMatrix> contested_confusions(std::size_t k, std::size_t l,
                                                     double dominant);

/// A planted annotator population: K perspective communities, each with its
/// own labeling behavior over a shared true label per instance.
struct PerspectiveSpec {
    LabelScheme scheme;
    std::size_t n_perspectives = 1;
    /// Multiclass: one row-stochastic |labels| x |labels| matrix per
    /// perspective (row = true label, column = emitted label).
    std::vector<DenseMatrix> confusion;
    /// Multilabel: per-perspective per-label presence flip probability.
    std::vector<std::vector<double>> flip_probs;
    std::vector<std::size_t> annotators_per_perspective;
    Workload workload = Workload::uniform;
    double alpha = 2.0;
    std::size_t annotations_per_instance = 3;
    std::size_t n_instances = 100;
    /// Empty = auto-generate one token list per label.
    std::vector<std::vector<std::string>> vocabulary_per_class;
    /// Probability that a token comes from the shared filler list instead of
    /// the class vocabulary.
    double vocabulary_overlap = 0.1;
    std::uint64_t seed = 0;

    std::size_t n_annotators() const {
        std::size_t total = 0;
        for (std::size_t c : annotators_per_perspective) total += c;
        return total;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["scheme"] = scheme.to_json();
        j["n_perspectives"] = n_perspectives;
        if (scheme.task_kind == TaskKind::multiclass) {
            nlohmann::json matrices = nlohmann::json::array();
            for (const DenseMatrix& m : confusion) matrices.push_back(matrix_to_json(m));
            j["confusion"] = matrices;
        } else {
            j["flip_probs"] = flip_probs;
        }
        j["annotators_per_perspective"] = annotators_per_perspective;
        j["workload"] = to_string(workload);
        j["alpha"] = alpha;
        j["annotations_per_instance"] = annotations_per_instance;
        j["n_instances"] = n_instances;
        if (!vocabulary_per_class.empty()) j["vocabulary_per_class"] = vocabulary_per_class;
        j["vocabulary_overlap"] = vocabulary_overlap;
        j["seed"] = seed;
        return j;
    }

    /// Accepts either explicit "confusion" matrices or a "confusion_preset"
    /// of {"family": "rotated"|"contested", "dominant": p}.
    static PerspectiveSpec from_json(const nlohmann::json& j) {
        PerspectiveSpec spec;
        spec.scheme = LabelScheme::from_json(j.at("scheme"));
        spec.n_perspectives = j.at("n_perspectives").get<std::size_t>();
        spec.annotators_per_perspective =
            j.at("annotators_per_perspective").get<std::vector<std::size_t>>();
        if (j.contains("workload"))
            spec.workload = workload_from_string(j.at("workload").get<std::string>());
        if (j.contains("alpha")) spec.alpha = j.at("alpha").get<double>();
        if (j.contains("annotations_per_instance"))
            spec.annotations_per_instance = j.at("annotations_per_instance").get<std::size_t>();
        if (j.contains("n_instances"))
            spec.n_instances = j.at("n_instances").get<std::size_t>();
        if (j.contains("vocabulary_per_class"))
            spec.vocabulary_per_class =
                j.at("vocabulary_per_class").get<std::vector<std::vector<std::string>>>();
        if (j.contains("vocabulary_overlap"))
            spec.vocabulary_overlap = j.at("vocabulary_overlap").get<double>();
        if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();

        const std::size_t l = spec.scheme.n_labels();
        if (spec.scheme.task_kind == TaskKind::multiclass) {
            if (j.contains("confusion")) {
                for (const auto& rows : j.at("confusion")) {
                    DenseMatrix m;
                    m.rows = rows.size();
                    m.cols = m.rows > 0 ? rows.at(0).size() : 0;
                    for (const auto& row : rows) {
                        if (row.size() != m.cols)
                            throw ParseError("spec: ragged confusion matrix");
                        for (const auto& v : row) m.data.push_back(v.get<double>());
                    }
                    spec.confusion.push_back(std::move(m));
                }
            } else if (j.contains("confusion_preset")) {
                const auto& preset = j.at("confusion_preset");
                const std::string family = preset.at("family").get<std::string>();
                const double dominant = preset.at("dominant").get<double>();
                if (family == "rotated") {
                    spec.confusion = rotated_confusions(spec.n_perspectives, l, dominant);
                } else if (family == "contested") {
                    spec.confusion = contested_confusions(spec.n_perspectives, l, dominant);
                } else {
                    throw ParseError("spec: unknown confusion preset '" + family + "'");
                }
            } else {
                throw ParseError("spec: multiclass needs confusion or confusion_preset");
            }
        } else {
            spec.flip_probs = j.at("flip_probs").get<std::vector<std::vector<double>>>();
        }
        spec.validate();
        return spec;
    }

    void validate() const {
        scheme.validate();
        const std::size_t l = scheme.n_labels();
        if (n_perspectives == 0) throw InvalidConfigError("spec: K must be >= 1");
        if (annotators_per_perspective.size() != n_perspectives)
            throw InvalidConfigError("spec: annotator counts must list every perspective");
        for (std::size_t c : annotators_per_perspective) {
            if (c == 0) throw InvalidConfigError("spec: empty perspective");
        }
        if (scheme.task_kind == TaskKind::multiclass) {
            if (confusion.size() != n_perspectives)
                throw InvalidConfigError("spec: need one confusion matrix per perspective");
            for (const DenseMatrix& m : confusion) {
                if (m.rows != l || m.cols != l)
                    throw InvalidConfigError("spec: confusion matrix must be |labels| square");
                for (std::size_t r = 0; r < l; ++r) {
                    double sum = 0.0;
                    for (std::size_t c = 0; c < l; ++c) {
                        if (m.at(r, c) < 0.0)
                            throw InvalidConfigError("spec: negative confusion entry");
                        sum += m.at(r, c);
                    }
                    if (std::abs(sum - 1.0) > 1e-9)
                        throw InvalidConfigError("spec: confusion row does not sum to 1");
                }
            }
        } else {
            if (flip_probs.size() != n_perspectives)
                throw InvalidConfigError("spec: need flip probabilities per perspective");
            for (const auto& row : flip_probs) {
                if (row.size() != l)
                    throw InvalidConfigError("spec: need one flip probability per label");
                for (double p : row) {
                    if (p < 0.0 || p > 1.0)
                        throw InvalidConfigError("spec: flip probability outside [0,1]");
                }
            }
        }
        if (annotations_per_instance == 0)
            throw InvalidConfigError("spec: annotations per instance must be >= 1");
        if (annotations_per_instance > n_annotators())
            throw InvalidConfigError("spec: cannot sample " +
                                     std::to_string(annotations_per_instance) +
                                     " distinct annotators from " +
                                     std::to_string(n_annotators()));
        if (n_instances == 0) throw InvalidConfigError("spec: no instances");
        if (workload == Workload::skewed && alpha <= 0.0)
            throw InvalidConfigError("spec: skew exponent must be positive");
        if (!vocabulary_per_class.empty() && vocabulary_per_class.size() != l)
            throw InvalidConfigError("spec: need one vocabulary per label");
        for (const auto& v : vocabulary_per_class) {
            if (v.empty()) throw InvalidConfigError("spec: empty class vocabulary");
        }
        if (vocabulary_overlap < 0.0 || vocabulary_overlap > 1.0)
            throw InvalidConfigError("spec: vocabulary overlap outside [0,1]");
    }
};

/// Perspective p reads true label c as (c + p) mod L with the dominant mass;
/// the remainder spreads evenly. Maximally separated communities.
inline std::vector<DenseMatrix> rotated_confusions(std::size_t k, std::size_t l,
                                                   double dominant) {
    if (l == 0) throw InvalidConfigError("rotated_confusions: no labels");
    if (dominant < 0.0 || dominant > 1.0)
        throw InvalidConfigError("rotated_confusions: dominant mass outside [0,1]");
    const double rest = l > 1 ? (1.0 - dominant) / static_cast<double>(l - 1) : 0.0;
    std::vector<DenseMatrix> out;
    for (std::size_t p = 0; p < k; ++p) {
        DenseMatrix m;
        m.rows = l;
        m.cols = l;
        m.data.assign(l * l, rest);
        if (l == 1) m.data[0] = 1.0;
        for (std::size_t c = 0; c < l; ++c) {
            if (l > 1) m.data[c * l + (c + p) % l] = dominant;
        }
        out.push_back(std::move(m));
    }
    return out;
}

/// Perspective p agrees with the identity map except on class p mod L, which
/// it reads as the next label. Communities share most classes and contest one
/// each, so cross-perspective majority votes stay decisive.
inline std::vector<DenseMatrix> contested_confusions(std::size_t k, std::size_t l,
                                                     double dominant) {
    if (l < 2) throw InvalidConfigError("contested_confusions: need at least 2 labels");
    if (dominant < 0.0 || dominant > 1.0)
        throw InvalidConfigError("contested_confusions: dominant mass outside [0,1]");
    const double rest = (1.0 - dominant) / static_cast<double>(l - 1);
    std::vector<DenseMatrix> out;
    for (std::size_t p = 0; p < k; ++p) {
        DenseMatrix m;
        m.rows = l;
        m.cols = l;
        m.data.assign(l * l, rest);
        for (std::size_t c = 0; c < l; ++c) {
            const std::size_t target = c == p % l ? (c + 1) % l : c;
            m.data[c * l + target] = dominant;
        }
        out.push_back(std::move(m));
    }
    return out;
}

/// Auto vocabulary: distinctive per-class token families plus shared filler.
inline std::vector<std::vector<std::string>> default_vocabulary(std::size_t l,
                                                                std::size_t per_class = 20) {
    std::vector<std::vector<std::string>> out(l);
    for (std::size_t c = 0; c < l; ++c) {
        for (std::size_t t = 0; t < per_class; ++t)
            out[c].push_back("c" + std::to_string(c) + "tok" + std::to_string(t));
    }
    return out;
}

struct SyntheticData {
    AnnotationMatrix matrix;
    std::map<std::string, std::size_t> planted;      // annotator id -> perspective
    std::map<std::string, LabelSet> true_labels;     // instance id -> planted truth

    nlohmann::json sidecar() const {
        nlohmann::json j;
        j["planted"] = planted;
        nlohmann::json truth = nlohmann::json::object();
        for (const auto& [id, set] : true_labels) truth[id] = matrix.scheme().names(set);
        j["true_labels"] = truth;
        return j;
    }
};

namespace detail {

/// Weighted sample of n distinct indices; weights of chosen indices are
/// zeroed between draws.
inline std::vector<std::size_t> sample_distinct(Rng& rng, std::vector<double> weights,
                                                std::size_t n) {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t idx = rng.weighted(weights);
        out.push_back(idx);
        weights[idx] = 0.0;
    }
    return out;
}

}  // namespace detail

/// Generate a synthetic annotated dataset with planted perspectives. Fully
/// deterministic under spec.seed; instances split 80/10/10 by index.
inline SyntheticData generate(const PerspectiveSpec& spec) {
    spec.validate();
    const LabelScheme& scheme = spec.scheme;
    const std::size_t l = scheme.n_labels();
    const std::size_t n_ann = spec.n_annotators();
    const std::size_t m = spec.n_instances;

    std::vector<std::size_t> perspective_of(n_ann);
    {
        std::size_t a = 0;
        for (std::size_t p = 0; p < spec.n_perspectives; ++p) {
            for (std::size_t c = 0; c < spec.annotators_per_perspective[p]; ++c)
                perspective_of[a++] = p;
        }
    }

    const std::vector<std::vector<std::string>> vocab =
        spec.vocabulary_per_class.empty() ? default_vocabulary(l) : spec.vocabulary_per_class;
    std::vector<std::string> filler;
    for (std::size_t t = 0; t < 12; ++t) filler.push_back("filler" + std::to_string(t));

    Rng truth_rng = Rng(spec.seed).derive(0xA1);
    Rng text_rng = Rng(spec.seed).derive(0xA2);
    Rng workload_rng = Rng(spec.seed).derive(0xA3);
    Rng sample_rng = Rng(spec.seed).derive(0xA4);
    Rng label_rng = Rng(spec.seed).derive(0xA5);

    // Planted truth per instance.
    std::vector<LabelSet> truths(m);
    for (std::size_t x = 0; x < m; ++x) {
        if (scheme.task_kind == TaskKind::multiclass) {
            truths[x] = LabelSet::single(truth_rng.below(l));
        } else {
            LabelSet s;
            for (std::size_t c = 0; c < l; ++c) {
                if (truth_rng.uniform01() < 0.45) s.add(c);
            }
            truths[x] = s;
        }
    }

    // Class-conditional texts.
    std::vector<std::string> texts(m);
    for (std::size_t x = 0; x < m; ++x) {
        std::vector<std::size_t> classes;
        truths[x].for_each([&](std::size_t c) { classes.push_back(c); });
        const std::size_t len = 6 + text_rng.below(5);
        std::string text;
        for (std::size_t t = 0; t < len; ++t) {
            const std::string* token;
            if (classes.empty() || text_rng.uniform01() < spec.vocabulary_overlap) {
                token = &filler[text_rng.below(filler.size())];
            } else {
                const std::size_t c = classes[text_rng.below(classes.size())];
                token = &vocab[c][text_rng.below(vocab[c].size())];
            }
            if (!text.empty()) text += ' ';
            text += *token;
        }
        texts[x] = text;
    }

    // Workload weights; skewed draws Pareto-tailed weights u^(-1/alpha).
    std::vector<double> weights(n_ann, 1.0);
    if (spec.workload == Workload::skewed) {
        for (std::size_t a = 0; a < n_ann; ++a)
            weights[a] = std::pow(workload_rng.uniform01_open0(), -1.0 / spec.alpha);
    }

    // Annotator slots per instance.
    std::vector<std::vector<std::size_t>> slots(m);
    for (std::size_t x = 0; x < m; ++x)
        slots[x] = detail::sample_distinct(sample_rng, weights, spec.annotations_per_instance);

    // Fix-up: every annotator must appear at least once. Idle annotators take
    // one slot from the busiest annotator on the first instance that lacks
    // them.
    std::vector<std::size_t> load(n_ann, 0);
    for (const auto& s : slots) {
        for (std::size_t a : s) ++load[a];
    }
    for (std::size_t idle = 0; idle < n_ann; ++idle) {
        if (load[idle] > 0) continue;
        std::size_t donor = 0;
        for (std::size_t a = 1; a < n_ann; ++a) {
            if (load[a] > load[donor]) donor = a;
        }
        // A donor at load 1 would itself go idle, so the request is infeasible.
        if (load[donor] < 2)
            throw ConsistencyError("generate: too few annotation slots to cover annotator " +
                                   std::to_string(idle));
        bool placed = false;
        for (std::size_t x = 0; x < m && !placed; ++x) {
            bool has_idle = false, has_donor = false;
            std::size_t donor_slot = 0;
            for (std::size_t k = 0; k < slots[x].size(); ++k) {
                if (slots[x][k] == idle) has_idle = true;
                if (slots[x][k] == donor) {
                    has_donor = true;
                    donor_slot = k;
                }
            }
            if (!has_idle && has_donor) {
                slots[x][donor_slot] = idle;
                --load[donor];
                ++load[idle];
                placed = true;
            }
        }
        if (!placed)
            throw ConsistencyError("generate: could not place annotator " +
                                   std::to_string(idle));
    }

    // Labels drawn in deterministic (instance, ascending annotator) order.
    std::vector<AnnotationRecord> records;
    records.reserve(m * spec.annotations_per_instance);
    const std::size_t train_end = (m * 8) / 10;
    const std::size_t dev_end = (m * 9) / 10;
    for (std::size_t x = 0; x < m; ++x) {
        std::sort(slots[x].begin(), slots[x].end());
        const Split split = x < train_end ? Split::train
                            : x < dev_end ? Split::dev
                                          : Split::test;
        for (std::size_t a : slots[x]) {
            const std::size_t p = perspective_of[a];
            LabelSet emitted;
            if (scheme.task_kind == TaskKind::multiclass) {
                const std::size_t truth = truths[x].sole();
                std::vector<double> row(l);
                for (std::size_t j = 0; j < l; ++j) row[j] = spec.confusion[p].at(truth, j);
                emitted = LabelSet::single(label_rng.weighted(row));
            } else {
                for (std::size_t c = 0; c < l; ++c) {
                    bool present = truths[x].contains(c);
                    if (label_rng.uniform01() < spec.flip_probs[p][c]) present = !present;
                    if (present) emitted.add(c);
                }
            }
            records.push_back({"x" + std::to_string(x), "ann" + std::to_string(a),
                               scheme.names(emitted), split, texts[x]});
        }
    }

    SyntheticData out;
    out.matrix = AnnotationMatrix::from_records(records, scheme);
    for (std::size_t a = 0; a < n_ann; ++a)
        out.planted["ann" + std::to_string(a)] = perspective_of[a];
    for (std::size_t x = 0; x < m; ++x) out.true_labels["x" + std::to_string(x)] = truths[x];
    return out;
}

}  // namespace crowdcluster
