#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdcluster/errors.hpp"

namespace crowdcluster {

enum class TaskKind { multiclass, multilabel };

enum class Split { train, dev, test };

inline const char* to_string(TaskKind k) {
    return k == TaskKind::multiclass ? "multiclass" : "multilabel";
}

inline const char* to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        case Split::test: return "test";
    }
    return "train";
}

inline Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "dev") return Split::dev;
    if (s == "test") return Split::test;
    throw ValidationError("unknown split '" + s + "' (expected train|dev|test)");
}

/// Set of label indices packed into a 64-bit mask. Label indices refer to
/// positions in LabelScheme::labels; schemes are capped at 64 labels.
class LabelSet {
public:
    LabelSet() = default;
    explicit LabelSet(std::uint64_t bits) : bits_(bits) {}

    static LabelSet single(std::size_t index) { return LabelSet(1ULL << index); }

    void add(std::size_t index) { bits_ |= 1ULL << index; }
    void remove(std::size_t index) { bits_ &= ~(1ULL << index); }
    bool contains(std::size_t index) const { return (bits_ >> index) & 1ULL; }

    std::size_t size() const { return static_cast<std::size_t>(std::popcount(bits_)); }
    bool empty() const { return bits_ == 0; }
    std::uint64_t raw() const { return bits_; }

    /// Index of the lone member; only meaningful for singleton sets.
    std::size_t sole() const { return static_cast<std::size_t>(std::countr_zero(bits_)); }

    friend bool operator==(LabelSet a, LabelSet b) { return a.bits_ == b.bits_; }
    friend bool operator!=(LabelSet a, LabelSet b) { return a.bits_ != b.bits_; }
    friend LabelSet operator&(LabelSet a, LabelSet b) { return LabelSet(a.bits_ & b.bits_); }
    friend LabelSet operator|(LabelSet a, LabelSet b) { return LabelSet(a.bits_ | b.bits_); }

    template <typename Fn>
    void for_each(Fn&& fn) const {
        std::uint64_t b = bits_;
        while (b != 0) {
            std::size_t i = static_cast<std::size_t>(std::countr_zero(b));
            fn(i);
            b &= b - 1;
        }
    }

private:
    std::uint64_t bits_ = 0;
};

/// Label inventory for one task, plus the optional tie priority order
/// (highest first) used when votes deadlock.
struct LabelScheme {
    TaskKind task_kind = TaskKind::multiclass;
    std::vector<std::string> labels;
    std::vector<std::string> tie_priority;

    std::size_t n_labels() const { return labels.size(); }

    void validate() const {
        if (labels.empty()) throw ValidationError("scheme: labels must be non-empty");
        if (labels.size() > 64) throw ValidationError("scheme: at most 64 labels supported");
        for (std::size_t i = 0; i < labels.size(); ++i) {
            for (std::size_t j = i + 1; j < labels.size(); ++j) {
                if (labels[i] == labels[j])
                    throw ValidationError("scheme: duplicate label '" + labels[i] + "'");
            }
        }
        for (const auto& p : tie_priority) {
            if (find(p) < 0)
                throw ValidationError("scheme: tie_priority label '" + p + "' not in labels");
        }
    }

    /// Index of a label name, or -1.
    int find(const std::string& name) const {
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == name) return static_cast<int>(i);
        }
        return -1;
    }

    std::size_t index_of(const std::string& name) const {
        int i = find(name);
        if (i < 0) throw ValidationError("label '" + name + "' not in scheme");
        return static_cast<std::size_t>(i);
    }

    LabelSet set_from_names(const std::vector<std::string>& names) const {
        LabelSet s;
        for (const auto& n : names) s.add(index_of(n));
        return s;
    }

    std::vector<std::string> names(LabelSet s) const {
        std::vector<std::string> out;
        s.for_each([&](std::size_t i) { out.push_back(labels[i]); });
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["task_kind"] = to_string(task_kind);
        j["labels"] = labels;
        if (!tie_priority.empty()) j["tie_priority"] = tie_priority;
        return j;
    }

    static LabelScheme from_json(const nlohmann::json& j) {
        LabelScheme s;
        const std::string kind = j.at("task_kind").get<std::string>();
        if (kind == "multiclass") {
            s.task_kind = TaskKind::multiclass;
        } else if (kind == "multilabel") {
            s.task_kind = TaskKind::multilabel;
        } else {
            throw ValidationError("scheme: unknown task_kind '" + kind + "'");
        }
        s.labels = j.at("labels").get<std::vector<std::string>>();
        if (j.contains("tie_priority"))
            s.tie_priority = j.at("tie_priority").get<std::vector<std::string>>();
        s.validate();
        return s;
    }
};

}  // namespace crowdcluster
