#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "crowdcluster/aggregation.hpp"
#include "crowdcluster/errors.hpp"
#include "crowdcluster/features.hpp"
#include "crowdcluster/log.hpp"
#include "crowdcluster/rng.hpp"
#include "crowdcluster/scheme.hpp"

namespace crowdcluster {

struct TrainConfig {
    std::size_t epochs = 10;
    double learning_rate = 0.1;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    std::size_t repeats = 5;
    std::size_t multitask_dim = 256;

    void validate() const {
        if (epochs == 0) throw InvalidConfigError("train config: epochs must be positive");
        if (learning_rate <= 0.0)
            throw InvalidConfigError("train config: learning_rate must be positive");
        if (batch_size == 0) throw InvalidConfigError("train config: batch_size must be positive");
        if (repeats == 0) throw InvalidConfigError("train config: repeats must be >= 1");
        if (multitask_dim == 0)
            throw InvalidConfigError("train config: multitask_dim must be positive");
    }

    nlohmann::json to_json() const {
        return {{"epochs", epochs},         {"learning_rate", learning_rate},
                {"batch_size", batch_size}, {"seed", seed},
                {"repeats", repeats},       {"multitask_dim", multitask_dim}};
    }

    static TrainConfig from_json(const nlohmann::json& j) {
        TrainConfig c;
        if (j.contains("epochs")) c.epochs = j.at("epochs").get<std::size_t>();
        if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
        if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("repeats")) c.repeats = j.at("repeats").get<std::size_t>();
        if (j.contains("multitask_dim"))
            c.multitask_dim = j.at("multitask_dim").get<std::size_t>();
        c.validate();
        return c;
    }
};

/// One training example for the single-task paths.
struct LabeledText {
    std::string text;
    LabelSet labels;
};

/// One training example for the clustered paths; targets[c] is MISSING when
/// cluster c never saw the instance.
struct ClusterExample {
    SparseVector features;
    std::vector<std::optional<LabelSet>> targets;
};

namespace detail {

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline void softmax_inplace(std::vector<double>& z) {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : z) m = std::max(m, v);
    double total = 0.0;
    for (double& v : z) {
        v = std::exp(v - m);
        total += v;
    }
    for (double& v : z) v /= total;
}

inline double safe_log(double p) { return std::log(std::max(p, 1e-12)); }

template <typename S>
double dot_row(const std::vector<S>& w, std::size_t row, std::size_t dim,
               const SparseVector& x) {
    double acc = 0.0;
    const S* base = w.data() + row * dim;
    for (const auto& [i, v] : x) acc += static_cast<double>(base[i]) * v;
    return acc;
}

template <typename S>
void axpy_row(std::vector<S>& w, std::size_t row, std::size_t dim, double alpha,
              const SparseVector& x) {
    S* base = w.data() + row * dim;
    for (const auto& [i, v] : x) base[i] += static_cast<S>(alpha * v);
}

/// Per-label logistic loss and gradient for one example. Returns the loss;
/// writes dz (sigmoid(z) - y).
inline double logistic_example(const std::vector<double>& z, LabelSet y,
                               std::vector<double>& dz) {
    double loss = 0.0;
    for (std::size_t l = 0; l < z.size(); ++l) {
        const double p = sigmoid(z[l]);
        const double target = y.contains(l) ? 1.0 : 0.0;
        dz[l] = p - target;
        loss -= target * safe_log(p) + (1.0 - target) * safe_log(1.0 - p);
    }
    return loss;
}

/// Softmax cross-entropy loss and gradient for one example. Returns the loss;
/// writes dz (p - onehot).
inline double softmax_example(std::vector<double> z, std::size_t target,
                              std::vector<double>& dz) {
    softmax_inplace(z);
    const double loss = -safe_log(z[target]);
    for (std::size_t l = 0; l < z.size(); ++l) dz[l] = z[l] - (l == target ? 1.0 : 0.0);
    return loss;
}

inline void warn_absent_labels(const std::vector<LabeledText>& data, const LabelScheme& scheme) {
    std::vector<bool> seen(scheme.n_labels(), false);
    for (const auto& ex : data) ex.labels.for_each([&](std::size_t l) { seen[l] = true; });
    for (std::size_t l = 0; l < scheme.n_labels(); ++l) {
        if (!seen[l])
            log_warn("training data has no example for label '" + scheme.labels[l] + "'");
    }
}

}  // namespace detail

/// Linear model over hashed features: softmax for multiclass schemes,
/// independent per-label logistics for multilabel.
template <typename S = float>
struct SingleTaskModel {
    LabelScheme scheme;
    FeatureConfig features;
    std::uint64_t seed = 0;
    std::vector<S> weights;
    std::vector<S> bias;
    std::vector<double> epoch_loss;

    std::vector<double> scores(const SparseVector& x) const {
        std::vector<double> z(scheme.n_labels());
        for (std::size_t l = 0; l < z.size(); ++l)
            z[l] = detail::dot_row(weights, l, features.dimension, x) +
                   static_cast<double>(bias[l]);
        return z;
    }

    /// Multiclass: argmax, ties to the lowest label index. Multilabel: every
    /// label whose sigmoid clears 0.5; may be empty.
    LabelSet predict_one(const SparseVector& x) const {
        const std::vector<double> z = scores(x);
        if (scheme.task_kind == TaskKind::multiclass) {
            std::size_t best = 0;
            for (std::size_t l = 1; l < z.size(); ++l) {
                if (z[l] > z[best]) best = l;
            }
            return LabelSet::single(best);
        }
        LabelSet out;
        for (std::size_t l = 0; l < z.size(); ++l) {
            if (z[l] >= 0.0) out.add(l);
        }
        return out;
    }

    std::vector<LabelSet> predict(const std::vector<std::string>& texts) const {
        FeatureExtractor fx(features);
        std::vector<LabelSet> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(predict_one(fx.extract(t)));
        return out;
    }
};

/// Train a single-task linear model with seeded minibatch SGD; gradients are
/// taken at batch-start weights and the learning rate decays as lr/(1+epoch).
template <typename S = float>
SingleTaskModel<S> train_single(const std::vector<LabeledText>& data, const LabelScheme& scheme,
                                const TrainConfig& config,
                                const FeatureConfig& feature_config = {}) {
    scheme.validate();
    config.validate();
    feature_config.validate();
    if (data.empty()) throw InvalidInputError("train_single: empty dataset");
    detail::warn_absent_labels(data, scheme);

    const std::size_t n_labels = scheme.n_labels();
    const std::size_t dim = feature_config.dimension;
    FeatureExtractor fx(feature_config);
    std::vector<SparseVector> xs;
    xs.reserve(data.size());
    for (const auto& ex : data) xs.push_back(fx.extract(ex.text));

    SingleTaskModel<S> model;
    model.scheme = scheme;
    model.features = feature_config;
    model.seed = config.seed;
    model.weights.assign(n_labels * dim, S{});
    model.bias.assign(n_labels, S{});

    const bool multiclass = scheme.task_kind == TaskKind::multiclass;
    Rng rng = Rng(config.seed).derive(0x51);
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<double> dz(n_labels);
    std::vector<std::pair<std::size_t, std::vector<double>>> batch;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = config.learning_rate / (1.0 + static_cast<double>(epoch));
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            batch.clear();
            for (std::size_t t = start; t < stop; ++t) {
                const std::size_t i = order[t];
                const std::vector<double> z = model.scores(xs[i]);
                if (multiclass) {
                    detail::softmax_example(z, data[i].labels.sole(), dz);
                } else {
                    detail::logistic_example(z, data[i].labels, dz);
                }
                batch.emplace_back(i, dz);
            }
            const double scale = lr / static_cast<double>(stop - start);
            for (const auto& [i, g] : batch) {
                for (std::size_t l = 0; l < n_labels; ++l) {
                    if (g[l] == 0.0) continue;
                    detail::axpy_row(model.weights, l, dim, -scale * g[l], xs[i]);
                    model.bias[l] -= static_cast<S>(scale * g[l]);
                }
            }
        }
        double total = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const std::vector<double> z = model.scores(xs[i]);
            if (multiclass) {
                total += detail::softmax_example(z, data[i].labels.sole(), dz);
            } else {
                total += detail::logistic_example(z, data[i].labels, dz);
            }
        }
        model.epoch_loss.push_back(total / static_cast<double>(data.size()));
    }
    return model;
}

/// Training rows for the gold single-task path: train-split instances with
/// their majority-vote gold label.
inline std::vector<LabeledText> gold_training_set(const ClusteredDataset& d) {
    std::vector<LabeledText> out;
    for (std::size_t x = 0; x < d.n_instances(); ++x) {
        if (d.splits[x] != Split::train) continue;
        out.push_back({d.texts[x], d.gold[x]});
    }
    return out;
}

/// Training rows for one cluster: train-split instances the cluster labeled.
inline std::vector<LabeledText> cluster_training_set(const ClusteredDataset& d, std::size_t c) {
    std::vector<LabeledText> out;
    for (std::size_t x = 0; x < d.n_instances(); ++x) {
        if (d.splits[x] != Split::train) continue;
        if (!d.cluster_labels[x][c].has_value()) continue;
        out.push_back({d.texts[x], *d.cluster_labels[x][c]});
    }
    return out;
}

/// Clustered training examples (train split only), features pre-extracted.
inline std::vector<ClusterExample> cluster_examples(const ClusteredDataset& d,
                                                    const FeatureConfig& feature_config) {
    FeatureExtractor fx(feature_config);
    std::vector<ClusterExample> out;
    for (std::size_t x = 0; x < d.n_instances(); ++x) {
        if (d.splits[x] != Split::train) continue;
        out.push_back({fx.extract(d.texts[x]), d.cluster_labels[x]});
    }
    return out;
}

/// One model per cluster, each trained only on its own column.
template <typename S = float>
std::vector<SingleTaskModel<S>> train_ensemble(const ClusteredDataset& clustered,
                                               const TrainConfig& config,
                                               const FeatureConfig& feature_config = {}) {
    config.validate();
    std::vector<SingleTaskModel<S>> members;
    for (std::size_t c = 0; c < clustered.n_clusters; ++c) {
        std::vector<LabeledText> data = cluster_training_set(clustered, c);
        if (data.empty())
            throw InvalidConfigError("ensemble: cluster " + std::to_string(c) +
                                     " has no training labels");
        TrainConfig member = config;
        member.seed = mix_seed(config.seed, c);
        members.push_back(train_single<S>(data, clustered.scheme, member, feature_config));
    }
    return members;
}

/// One joint linear model with C blocks of |labels| logistic outputs.
template <typename S = float>
struct MultiLabelHeadModel {
    LabelScheme scheme;
    FeatureConfig features;
    std::uint64_t seed = 0;
    std::size_t n_clusters = 0;
    std::vector<S> weights;  // (C * n_labels) x dimension
    std::vector<S> bias;
    std::vector<double> epoch_loss;

    std::size_t rows() const { return n_clusters * scheme.n_labels(); }

    std::vector<double> scores(const SparseVector& x) const {
        std::vector<double> z(rows());
        for (std::size_t r = 0; r < z.size(); ++r)
            z[r] = detail::dot_row(weights, r, features.dimension, x) +
                   static_cast<double>(bias[r]);
        return z;
    }

    /// Per-cluster decode: block argmax for multiclass, 0.5 threshold for
    /// multilabel.
    std::vector<LabelSet> predict_one(const SparseVector& x) const {
        const std::vector<double> z = scores(x);
        const std::size_t n_labels = scheme.n_labels();
        std::vector<LabelSet> out(n_clusters);
        for (std::size_t c = 0; c < n_clusters; ++c) {
            const double* block = z.data() + c * n_labels;
            if (scheme.task_kind == TaskKind::multiclass) {
                std::size_t best = 0;
                for (std::size_t l = 1; l < n_labels; ++l) {
                    if (block[l] > block[best]) best = l;
                }
                out[c] = LabelSet::single(best);
            } else {
                for (std::size_t l = 0; l < n_labels; ++l) {
                    if (block[l] >= 0.0) out[c].add(l);
                }
            }
        }
        return out;
    }

    std::vector<std::vector<LabelSet>> predict(const std::vector<std::string>& texts) const {
        FeatureExtractor fx(features);
        std::vector<std::vector<LabelSet>> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(predict_one(fx.extract(t)));
        return out;
    }

    /// Loss on one example; rows of MISSING blocks contribute nothing. Writes
    /// dz over all rows (zero for missing blocks).
    double example_loss(const ClusterExample& ex, std::vector<double>& dz) const {
        const std::vector<double> z = scores(ex.features);
        const std::size_t n_labels = scheme.n_labels();
        std::fill(dz.begin(), dz.end(), 0.0);
        double loss = 0.0;
        for (std::size_t c = 0; c < n_clusters; ++c) {
            if (!ex.targets[c].has_value()) continue;
            const LabelSet y = *ex.targets[c];
            for (std::size_t l = 0; l < n_labels; ++l) {
                const std::size_t r = c * n_labels + l;
                const double p = detail::sigmoid(z[r]);
                const double target = y.contains(l) ? 1.0 : 0.0;
                dz[r] = p - target;
                loss -= target * detail::safe_log(p) +
                        (1.0 - target) * detail::safe_log(1.0 - p);
            }
        }
        return loss;
    }
};

/// Joint multi-label head over all clusters; multiclass cluster targets are
/// one-hot within their block and every output row trains as an independent
/// logistic.
template <typename S = float>
MultiLabelHeadModel<S> train_multilabel_head(const ClusteredDataset& clustered,
                                             const TrainConfig& config,
                                             const FeatureConfig& feature_config = {}) {
    config.validate();
    feature_config.validate();
    std::vector<ClusterExample> examples = cluster_examples(clustered, feature_config);
    if (examples.empty()) throw InvalidInputError("train_multilabel_head: empty dataset");

    MultiLabelHeadModel<S> model;
    model.scheme = clustered.scheme;
    model.features = feature_config;
    model.seed = config.seed;
    model.n_clusters = clustered.n_clusters;
    model.weights.assign(model.rows() * feature_config.dimension, S{});
    model.bias.assign(model.rows(), S{});

    Rng rng = Rng(config.seed).derive(0x52);
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<double> dz(model.rows());
    std::vector<std::pair<std::size_t, std::vector<double>>> batch;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = config.learning_rate / (1.0 + static_cast<double>(epoch));
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            batch.clear();
            for (std::size_t t = start; t < stop; ++t) {
                const std::size_t i = order[t];
                model.example_loss(examples[i], dz);
                batch.emplace_back(i, dz);
            }
            const double scale = lr / static_cast<double>(stop - start);
            for (const auto& [i, g] : batch) {
                for (std::size_t r = 0; r < model.rows(); ++r) {
                    if (g[r] == 0.0) continue;
                    detail::axpy_row(model.weights, r, feature_config.dimension, -scale * g[r],
                                     examples[i].features);
                    model.bias[r] -= static_cast<S>(scale * g[r]);
                }
            }
        }
        double total = 0.0;
        for (const auto& ex : examples) total += model.example_loss(ex, dz);
        model.epoch_loss.push_back(total / static_cast<double>(examples.size()));
    }
    return model;
}

/// Shared rectified projection feeding one affine head per cluster. The
/// projection is stored column-sparse: a column materializes on first touch
/// with values that are a pure function of (init_seed, column, row), so the
/// touch order cannot change the model.
template <typename S = float>
struct MultitaskModel {
    LabelScheme scheme;
    FeatureConfig features;
    std::uint64_t seed = 0;
    std::uint64_t init_seed = 0;
    std::size_t n_clusters = 0;
    std::size_t shared_dim = 256;
    mutable std::unordered_map<std::uint32_t, std::vector<S>> projection;
    std::vector<S> proj_bias;
    std::vector<S> head_w;  // C x n_labels x shared_dim
    std::vector<S> head_b;  // C x n_labels
    std::vector<double> epoch_loss;

    static S init_value(std::uint64_t init_seed, std::uint32_t col, std::size_t row,
                        std::size_t d) {
        std::uint64_t state = mix_seed(init_seed, (static_cast<std::uint64_t>(col) << 20) ^
                                                      static_cast<std::uint64_t>(row));
        const double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
        const double a = std::sqrt(3.0 / static_cast<double>(d));
        return static_cast<S>((2.0 * u - 1.0) * a);
    }

    std::vector<S>& column(std::uint32_t f) const {
        auto it = projection.find(f);
        if (it != projection.end()) return it->second;
        std::vector<S> col(shared_dim);
        for (std::size_t r = 0; r < shared_dim; ++r)
            col[r] = init_value(init_seed, f, r, shared_dim);
        return projection.emplace(f, std::move(col)).first->second;
    }

    /// Pre-activation then ReLU. hidden_pre is exposed for the backward pass.
    std::vector<double> hidden_pre(const SparseVector& x) const {
        std::vector<double> h(shared_dim);
        for (std::size_t r = 0; r < shared_dim; ++r) h[r] = static_cast<double>(proj_bias[r]);
        for (const auto& [i, v] : x) {
            const std::vector<S>& col = column(i);
            for (std::size_t r = 0; r < shared_dim; ++r)
                h[r] += static_cast<double>(col[r]) * v;
        }
        return h;
    }

    std::vector<double> task_scores(const std::vector<double>& h, std::size_t c) const {
        const std::size_t n_labels = scheme.n_labels();
        std::vector<double> z(n_labels);
        for (std::size_t l = 0; l < n_labels; ++l) {
            const S* w = head_w.data() + (c * n_labels + l) * shared_dim;
            double acc = static_cast<double>(head_b[c * n_labels + l]);
            for (std::size_t r = 0; r < shared_dim; ++r)
                acc += static_cast<double>(w[r]) * h[r];
            z[l] = acc;
        }
        return z;
    }

    std::vector<LabelSet> predict_one(const SparseVector& x) const {
        std::vector<double> h = hidden_pre(x);
        for (double& v : h) v = std::max(v, 0.0);
        const std::size_t n_labels = scheme.n_labels();
        std::vector<LabelSet> out(n_clusters);
        for (std::size_t c = 0; c < n_clusters; ++c) {
            const std::vector<double> z = task_scores(h, c);
            if (scheme.task_kind == TaskKind::multiclass) {
                std::size_t best = 0;
                for (std::size_t l = 1; l < n_labels; ++l) {
                    if (z[l] > z[best]) best = l;
                }
                out[c] = LabelSet::single(best);
            } else {
                for (std::size_t l = 0; l < n_labels; ++l) {
                    if (z[l] >= 0.0) out[c].add(l);
                }
            }
        }
        return out;
    }

    std::vector<std::vector<LabelSet>> predict(const std::vector<std::string>& texts) const {
        FeatureExtractor fx(features);
        std::vector<std::vector<LabelSet>> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(predict_one(fx.extract(t)));
        return out;
    }

    /// Summed loss over present targets of one example.
    double example_loss(const ClusterExample& ex) const {
        std::vector<double> h = hidden_pre(ex.features);
        for (double& v : h) v = std::max(v, 0.0);
        const std::size_t n_labels = scheme.n_labels();
        std::vector<double> dz(n_labels);
        double loss = 0.0;
        for (std::size_t c = 0; c < n_clusters; ++c) {
            if (!ex.targets[c].has_value()) continue;
            std::vector<double> z = task_scores(h, c);
            if (scheme.task_kind == TaskKind::multiclass) {
                loss += detail::softmax_example(std::move(z), ex.targets[c]->sole(), dz);
            } else {
                loss += detail::logistic_example(z, *ex.targets[c], dz);
            }
        }
        return loss;
    }

    double dataset_loss(const std::vector<ClusterExample>& examples) const {
        double total = 0.0;
        for (const auto& ex : examples) total += example_loss(ex);
        return total;
    }
};

/// Analytic gradients of the summed multitask loss; exposed for the
/// finite-difference verification path.
struct MultitaskGradients {
    std::map<std::uint32_t, std::vector<double>> projection;
    std::vector<double> proj_bias;
    std::vector<double> head_w;
    std::vector<double> head_b;
};

namespace detail {

/// Forward and backward for one example. Accumulates into grads when given;
/// returns the loss.
template <typename S>
double multitask_example(const MultitaskModel<S>& model, const ClusterExample& ex,
                         MultitaskGradients* grads) {
    const std::size_t n_labels = model.scheme.n_labels();
    const std::size_t d = model.shared_dim;
    std::vector<double> pre = model.hidden_pre(ex.features);
    std::vector<double> h(pre);
    for (double& v : h) v = std::max(v, 0.0);

    std::vector<double> dh(d, 0.0);
    std::vector<double> dz(n_labels);
    double loss = 0.0;
    for (std::size_t c = 0; c < model.n_clusters; ++c) {
        if (!ex.targets[c].has_value()) continue;
        std::vector<double> z = model.task_scores(h, c);
        if (model.scheme.task_kind == TaskKind::multiclass) {
            loss += softmax_example(std::move(z), ex.targets[c]->sole(), dz);
        } else {
            loss += logistic_example(z, *ex.targets[c], dz);
        }
        if (grads == nullptr) continue;
        for (std::size_t l = 0; l < n_labels; ++l) {
            if (dz[l] == 0.0) continue;
            const std::size_t row = c * n_labels + l;
            double* gw = grads->head_w.data() + row * d;
            const S* w = model.head_w.data() + row * d;
            for (std::size_t r = 0; r < d; ++r) {
                gw[r] += dz[l] * h[r];
                dh[r] += dz[l] * static_cast<double>(w[r]);
            }
            grads->head_b[row] += dz[l];
        }
    }
    if (grads == nullptr) return loss;

    // Through the ReLU, then into the touched projection columns.
    for (std::size_t r = 0; r < d; ++r) {
        if (pre[r] <= 0.0) dh[r] = 0.0;
    }
    for (std::size_t r = 0; r < d; ++r) grads->proj_bias[r] += dh[r];
    for (const auto& [i, v] : ex.features) {
        auto it = grads->projection.try_emplace(i, std::vector<double>(d, 0.0)).first;
        for (std::size_t r = 0; r < d; ++r) it->second[r] += dh[r] * v;
    }
    return loss;
}

}  // namespace detail

template <typename S>
MultitaskGradients multitask_gradients(const MultitaskModel<S>& model,
                                       const std::vector<ClusterExample>& examples) {
    MultitaskGradients g;
    g.proj_bias.assign(model.shared_dim, 0.0);
    g.head_w.assign(model.head_w.size(), 0.0);
    g.head_b.assign(model.head_b.size(), 0.0);
    for (const auto& ex : examples) detail::multitask_example(model, ex, &g);
    return g;
}

/// Joint multitask training: summed per-task losses, shared projection
/// updated by every present task, per-task heads only by their own targets.
template <typename S = float>
MultitaskModel<S> train_multitask(const ClusteredDataset& clustered, const TrainConfig& config,
                                  const FeatureConfig& feature_config = {}) {
    config.validate();
    feature_config.validate();
    std::vector<ClusterExample> examples = cluster_examples(clustered, feature_config);
    if (examples.empty()) throw InvalidInputError("train_multitask: empty dataset");

    MultitaskModel<S> model;
    model.scheme = clustered.scheme;
    model.features = feature_config;
    model.seed = config.seed;
    model.init_seed = mix_seed(config.seed, 0xB00);
    model.n_clusters = clustered.n_clusters;
    model.shared_dim = config.multitask_dim;
    model.proj_bias.assign(model.shared_dim, S{});
    const std::size_t n_labels = clustered.scheme.n_labels();
    model.head_w.assign(model.n_clusters * n_labels * model.shared_dim, S{});
    model.head_b.assign(model.n_clusters * n_labels, S{});
    {
        // Small seeded head init so the shared projection receives gradient
        // from the first step.
        Rng hr = Rng(config.seed).derive(0x53);
        for (auto& w : model.head_w) w = static_cast<S>(hr.uniform(-0.05, 0.05));
    }

    Rng rng = Rng(config.seed).derive(0x54);
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = config.learning_rate / (1.0 + static_cast<double>(epoch));
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            MultitaskGradients g;
            g.proj_bias.assign(model.shared_dim, 0.0);
            g.head_w.assign(model.head_w.size(), 0.0);
            g.head_b.assign(model.head_b.size(), 0.0);
            for (std::size_t t = start; t < stop; ++t)
                detail::multitask_example(model, examples[order[t]], &g);
            const double scale = lr / static_cast<double>(stop - start);
            for (std::size_t i = 0; i < model.head_w.size(); ++i)
                model.head_w[i] -= static_cast<S>(scale * g.head_w[i]);
            for (std::size_t i = 0; i < model.head_b.size(); ++i)
                model.head_b[i] -= static_cast<S>(scale * g.head_b[i]);
            for (std::size_t r = 0; r < model.shared_dim; ++r)
                model.proj_bias[r] -= static_cast<S>(scale * g.proj_bias[r]);
            for (const auto& [col, gcol] : g.projection) {
                std::vector<S>& target = model.column(col);
                for (std::size_t r = 0; r < model.shared_dim; ++r)
                    target[r] -= static_cast<S>(scale * gcol[r]);
            }
        }
        model.epoch_loss.push_back(model.dataset_loss(examples) /
                                   static_cast<double>(examples.size()));
    }
    return model;
}

/// Shape-checked prediction grids (instances x clusters).

template <typename S>
std::vector<std::vector<LabelSet>> predict_grid(const std::vector<SingleTaskModel<S>>& ensemble,
                                                const std::vector<std::string>& texts,
                                                const LabelScheme& scheme, std::size_t c) {
    if (ensemble.size() != c)
        throw ShapeError("ensemble size " + std::to_string(ensemble.size()) +
                         " does not match C=" + std::to_string(c));
    for (const auto& m : ensemble) {
        if (m.scheme.labels != scheme.labels || m.scheme.task_kind != scheme.task_kind)
            throw ShapeError("ensemble member scheme does not match");
    }
    std::vector<std::vector<LabelSet>> grid(texts.size(), std::vector<LabelSet>(c));
    for (std::size_t mc = 0; mc < c; ++mc) {
        const std::vector<LabelSet> preds = ensemble[mc].predict(texts);
        for (std::size_t i = 0; i < texts.size(); ++i) grid[i][mc] = preds[i];
    }
    return grid;
}

template <typename S>
std::vector<std::vector<LabelSet>> predict_grid(const MultiLabelHeadModel<S>& model,
                                                const std::vector<std::string>& texts,
                                                const LabelScheme& scheme, std::size_t c) {
    if (model.n_clusters != c)
        throw ShapeError("multilabel head has C=" + std::to_string(model.n_clusters) +
                         ", expected " + std::to_string(c));
    if (model.scheme.labels != scheme.labels || model.scheme.task_kind != scheme.task_kind)
        throw ShapeError("multilabel head scheme does not match");
    return model.predict(texts);
}

template <typename S>
std::vector<std::vector<LabelSet>> predict_grid(const MultitaskModel<S>& model,
                                                const std::vector<std::string>& texts,
                                                const LabelScheme& scheme, std::size_t c) {
    if (model.n_clusters != c)
        throw ShapeError("multitask model has C=" + std::to_string(model.n_clusters) +
                         ", expected " + std::to_string(c));
    if (model.scheme.labels != scheme.labels || model.scheme.task_kind != scheme.task_kind)
        throw ShapeError("multitask model scheme does not match");
    return model.predict(texts);
}

template <typename S>
std::vector<LabelSet> predict_instances(const SingleTaskModel<S>& model,
                                        const std::vector<std::string>& texts,
                                        const LabelScheme& scheme) {
    if (model.scheme.labels != scheme.labels || model.scheme.task_kind != scheme.task_kind)
        throw ShapeError("single-task model scheme does not match");
    return model.predict(texts);
}

}  // namespace crowdcluster
