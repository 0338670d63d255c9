#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "crowdcluster/errors.hpp"
#include "crowdcluster/models.hpp"

namespace crowdcluster {

/// Binary model container: magic "CCM1", little-endian u32 format version,
/// u64 JSON header length, JSON header, then raw little-endian scalar
/// payloads in the order the header's "tensors" array names them.

inline constexpr char kModelMagic[4] = {'C', 'C', 'M', '1'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace detail {

template <typename T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!in) throw ParseError("model file: truncated");
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

template <typename S>
void write_scalars(std::ostream& out, const std::vector<S>& values) {
    for (S v : values) write_le(out, v);
}

template <typename S>
std::vector<S> read_scalars(std::istream& in, std::size_t count) {
    std::vector<S> values(count);
    for (std::size_t i = 0; i < count; ++i) values[i] = read_le<S>(in);
    return values;
}

template <typename S>
const char* scalar_name() {
    if constexpr (std::is_same_v<S, float>) {
        return "f32";
    } else {
        static_assert(std::is_same_v<S, double>, "unsupported scalar type");
        return "f64";
    }
}

inline void write_container(std::ostream& out, const nlohmann::json& header) {
    out.write(kModelMagic, 4);
    write_le(out, kModelFormatVersion);
    const std::string text = header.dump();
    write_le(out, static_cast<std::uint64_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

inline nlohmann::json read_container(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kModelMagic, 4) != 0)
        throw ParseError("model file: bad magic");
    const auto version = read_le<std::uint32_t>(in);
    if (version != kModelFormatVersion)
        throw ParseError("model file: format version " + std::to_string(version) +
                         " is not supported (expected " +
                         std::to_string(kModelFormatVersion) + ")");
    const auto header_len = read_le<std::uint64_t>(in);
    std::string text(header_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw ParseError("model file: truncated header");
    return nlohmann::json::parse(text);
}

template <typename S>
void check_scalar(const nlohmann::json& header) {
    const std::string stored = header.at("scalar").get<std::string>();
    if (stored != scalar_name<S>())
        throw ParseError("model file: scalar type " + stored + " does not match " +
                         scalar_name<S>());
}

inline nlohmann::json common_header(const char* model_type, const char* scalar,
                                    const LabelScheme& scheme, const FeatureConfig& features,
                                    std::uint64_t seed,
                                    const std::vector<double>& epoch_loss) {
    nlohmann::json j;
    j["model_type"] = model_type;
    j["scalar"] = scalar;
    j["scheme"] = scheme.to_json();
    j["features"] = features.to_json();
    j["seed"] = seed;
    j["epoch_loss"] = epoch_loss;
    return j;
}

}  // namespace detail

template <typename S>
void save_model(std::ostream& out, const SingleTaskModel<S>& model) {
    nlohmann::json header =
        detail::common_header("single_task", detail::scalar_name<S>(), model.scheme,
                              model.features, model.seed, model.epoch_loss);
    header["tensors"] = {{"weights", model.weights.size()}, {"bias", model.bias.size()}};
    detail::write_container(out, header);
    detail::write_scalars(out, model.weights);
    detail::write_scalars(out, model.bias);
}

template <typename S>
void save_model(std::ostream& out, const MultiLabelHeadModel<S>& model) {
    nlohmann::json header =
        detail::common_header("multilabel_head", detail::scalar_name<S>(), model.scheme,
                              model.features, model.seed, model.epoch_loss);
    header["n_clusters"] = model.n_clusters;
    header["tensors"] = {{"weights", model.weights.size()}, {"bias", model.bias.size()}};
    detail::write_container(out, header);
    detail::write_scalars(out, model.weights);
    detail::write_scalars(out, model.bias);
}

template <typename S>
void save_model(std::ostream& out, const MultitaskModel<S>& model) {
    nlohmann::json header =
        detail::common_header("multitask", detail::scalar_name<S>(), model.scheme,
                              model.features, model.seed, model.epoch_loss);
    header["n_clusters"] = model.n_clusters;
    header["shared_dim"] = model.shared_dim;
    header["init_seed"] = model.init_seed;
    std::vector<std::uint32_t> cols;
    cols.reserve(model.projection.size());
    for (const auto& [c, _] : model.projection) cols.push_back(c);
    std::sort(cols.begin(), cols.end());
    header["projection_columns"] = cols;
    header["tensors"] = {{"proj_bias", model.proj_bias.size()},
                         {"head_w", model.head_w.size()},
                         {"head_b", model.head_b.size()}};
    detail::write_container(out, header);
    for (std::uint32_t c : cols) detail::write_scalars(out, model.projection.at(c));
    detail::write_scalars(out, model.proj_bias);
    detail::write_scalars(out, model.head_w);
    detail::write_scalars(out, model.head_b);
}

/// Peek the model_type string without loading payloads.
inline std::string model_type_of(std::istream& in) {
    return detail::read_container(in).at("model_type").get<std::string>();
}

template <typename S>
SingleTaskModel<S> load_single_task(std::istream& in) {
    const nlohmann::json header = detail::read_container(in);
    if (header.at("model_type") != "single_task")
        throw ParseError("model file: expected single_task, found " +
                         header.at("model_type").get<std::string>());
    detail::check_scalar<S>(header);
    SingleTaskModel<S> model;
    model.scheme = LabelScheme::from_json(header.at("scheme"));
    model.features = FeatureConfig::from_json(header.at("features"));
    model.seed = header.at("seed").get<std::uint64_t>();
    model.epoch_loss = header.at("epoch_loss").get<std::vector<double>>();
    model.weights =
        detail::read_scalars<S>(in, header.at("tensors").at("weights").get<std::size_t>());
    model.bias = detail::read_scalars<S>(in, header.at("tensors").at("bias").get<std::size_t>());
    if (model.weights.size() != model.scheme.n_labels() * model.features.dimension)
        throw ShapeError("model file: weight shape does not match scheme and features");
    return model;
}

template <typename S>
MultiLabelHeadModel<S> load_multilabel_head(std::istream& in) {
    const nlohmann::json header = detail::read_container(in);
    if (header.at("model_type") != "multilabel_head")
        throw ParseError("model file: expected multilabel_head, found " +
                         header.at("model_type").get<std::string>());
    detail::check_scalar<S>(header);
    MultiLabelHeadModel<S> model;
    model.scheme = LabelScheme::from_json(header.at("scheme"));
    model.features = FeatureConfig::from_json(header.at("features"));
    model.seed = header.at("seed").get<std::uint64_t>();
    model.epoch_loss = header.at("epoch_loss").get<std::vector<double>>();
    model.n_clusters = header.at("n_clusters").get<std::size_t>();
    model.weights =
        detail::read_scalars<S>(in, header.at("tensors").at("weights").get<std::size_t>());
    model.bias = detail::read_scalars<S>(in, header.at("tensors").at("bias").get<std::size_t>());
    if (model.weights.size() != model.rows() * model.features.dimension)
        throw ShapeError("model file: weight shape does not match scheme and features");
    return model;
}

template <typename S>
MultitaskModel<S> load_multitask(std::istream& in) {
    const nlohmann::json header = detail::read_container(in);
    if (header.at("model_type") != "multitask")
        throw ParseError("model file: expected multitask, found " +
                         header.at("model_type").get<std::string>());
    detail::check_scalar<S>(header);
    MultitaskModel<S> model;
    model.scheme = LabelScheme::from_json(header.at("scheme"));
    model.features = FeatureConfig::from_json(header.at("features"));
    model.seed = header.at("seed").get<std::uint64_t>();
    model.epoch_loss = header.at("epoch_loss").get<std::vector<double>>();
    model.n_clusters = header.at("n_clusters").get<std::size_t>();
    model.shared_dim = header.at("shared_dim").get<std::size_t>();
    model.init_seed = header.at("init_seed").get<std::uint64_t>();
    const auto cols = header.at("projection_columns").get<std::vector<std::uint32_t>>();
    for (std::uint32_t c : cols)
        model.projection.emplace(c, detail::read_scalars<S>(in, model.shared_dim));
    model.proj_bias =
        detail::read_scalars<S>(in, header.at("tensors").at("proj_bias").get<std::size_t>());
    model.head_w =
        detail::read_scalars<S>(in, header.at("tensors").at("head_w").get<std::size_t>());
    model.head_b =
        detail::read_scalars<S>(in, header.at("tensors").at("head_b").get<std::size_t>());
    if (model.head_w.size() != model.n_clusters * model.scheme.n_labels() * model.shared_dim)
        throw ShapeError("model file: head shape does not match header");
    return model;
}

template <typename Model>
void save_model_file(const std::string& path, const Model& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    save_model(out, model);
    if (!out) throw IoError("failed writing " + path);
}

template <typename S>
SingleTaskModel<S> load_single_task_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return load_single_task<S>(in);
}

template <typename S>
MultiLabelHeadModel<S> load_multilabel_head_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return load_multilabel_head<S>(in);
}

template <typename S>
MultitaskModel<S> load_multitask_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return load_multitask<S>(in);
}

}  // namespace crowdcluster
