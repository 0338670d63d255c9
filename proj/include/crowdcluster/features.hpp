#pragma once

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdcluster/errors.hpp"

namespace crowdcluster {

/// Hashed bag-of-ngrams configuration: word unigrams plus character 3-5
/// grams, folded into a power-of-two feature space and L2-normalized.
struct FeatureConfig {
    std::uint32_t dimension = 1u << 18;
    std::size_t char_min = 3;
    std::size_t char_max = 5;
    bool word_unigrams = true;

    void validate() const {
        if (dimension < 2 || !std::has_single_bit(dimension))
            throw InvalidConfigError("feature dimension must be a power of two >= 2");
        if (char_min > char_max)
            throw InvalidConfigError("char n-gram range is inverted");
    }

    nlohmann::json to_json() const {
        return {{"dimension", dimension},
                {"char_min", char_min},
                {"char_max", char_max},
                {"word_unigrams", word_unigrams}};
    }

    static FeatureConfig from_json(const nlohmann::json& j) {
        FeatureConfig c;
        if (j.contains("dimension")) c.dimension = j.at("dimension").get<std::uint32_t>();
        if (j.contains("char_min")) c.char_min = j.at("char_min").get<std::size_t>();
        if (j.contains("char_max")) c.char_max = j.at("char_max").get<std::size_t>();
        if (j.contains("word_unigrams"))
            c.word_unigrams = j.at("word_unigrams").get<bool>();
        c.validate();
        return c;
    }

    friend bool operator==(const FeatureConfig& a, const FeatureConfig& b) {
        return a.dimension == b.dimension && a.char_min == b.char_min &&
               a.char_max == b.char_max && a.word_unigrams == b.word_unigrams;
    }
};

/// Sparse feature vector: (index, value) sorted by index, indices unique.
using SparseVector = std::vector<std::pair<std::uint32_t, double>>;

inline std::uint64_t fnv1a64(const char* data, std::size_t len, std::uint64_t seed = 0) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= 0x100000001b3ULL;
    }
    return h;
}

class FeatureExtractor {
public:
    explicit FeatureExtractor(FeatureConfig config = {}) : config_(config) {
        config_.validate();
    }

    const FeatureConfig& config() const { return config_; }

    /// Deterministic: equal text yields an identical vector. Empty or
    /// feature-free text yields an empty vector.
    SparseVector extract(const std::string& text) const {
        std::string lower;
        lower.reserve(text.size());
        for (char c : text)
            lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));

        const std::uint32_t mask = config_.dimension - 1;
        std::map<std::uint32_t, double> counts;
        if (config_.word_unigrams) {
            std::size_t start = 0;
            while (start < lower.size()) {
                while (start < lower.size() &&
                       !std::isalnum(static_cast<unsigned char>(lower[start])))
                    ++start;
                std::size_t end = start;
                while (end < lower.size() &&
                       std::isalnum(static_cast<unsigned char>(lower[end])))
                    ++end;
                if (end > start) {
                    const std::uint64_t h = fnv1a64(lower.data() + start, end - start, 0x77);
                    counts[static_cast<std::uint32_t>(h) & mask] += 1.0;
                }
                start = end;
            }
        }
        for (std::size_t n = config_.char_min; n <= config_.char_max; ++n) {
            if (lower.size() < n) break;
            for (std::size_t i = 0; i + n <= lower.size(); ++i) {
                const std::uint64_t h = fnv1a64(lower.data() + i, n, 0xC0 + n);
                counts[static_cast<std::uint32_t>(h) & mask] += 1.0;
            }
        }

        double norm_sq = 0.0;
        for (const auto& [_, v] : counts) norm_sq += v * v;
        SparseVector out;
        out.reserve(counts.size());
        if (norm_sq > 0.0) {
            const double inv = 1.0 / std::sqrt(norm_sq);
            for (const auto& [i, v] : counts) out.emplace_back(i, v * inv);
        }
        return out;
    }

private:
    FeatureConfig config_;
};

}  // namespace crowdcluster
