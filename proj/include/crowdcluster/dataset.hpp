#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crowdcluster/errors.hpp"
#include "crowdcluster/scheme.hpp"

namespace crowdcluster {

/// One annotator's judgment on one instance; the unit of the JSON-lines format.
struct AnnotationRecord {
    std::string instance_id;
    std::string annotator_id;
    std::vector<std::string> labels;
    Split split = Split::train;
    std::string text;
};

/// Sparse annotator-by-instance label store. Annotator and instance order is
/// first-appearance order of the source records; both index spaces are dense.
class AnnotationMatrix {
public:
    using Entry = std::pair<std::uint32_t, LabelSet>;

    static AnnotationMatrix from_records(const std::vector<AnnotationRecord>& records,
                                         const LabelScheme& scheme) {
        scheme.validate();
        AnnotationMatrix m;
        m.scheme_ = scheme;
        std::map<std::string, std::uint32_t> annotator_index;
        std::map<std::string, std::uint32_t> instance_index;
        std::map<std::pair<std::uint32_t, std::uint32_t>, bool> seen;

        for (const auto& rec : records) {
            if (rec.instance_id.empty() || rec.annotator_id.empty())
                throw ValidationError("record with empty instance_id or annotator_id");
            LabelSet set = scheme.set_from_names(rec.labels);
            if (scheme.task_kind == TaskKind::multiclass && set.size() != 1)
                throw ValidationError("instance '" + rec.instance_id +
                                      "': multiclass record must carry exactly one label");

            auto [ai, a_new] = intern(annotator_index, rec.annotator_id, m.annotators_);
            auto [xi, x_new] = intern(instance_index, rec.instance_id, m.instances_);
            if (x_new) {
                m.splits_.push_back(rec.split);
                m.texts_.push_back(rec.text);
                m.by_instance_.emplace_back();
            } else {
                if (m.splits_[xi] != rec.split)
                    throw ValidationError("instance '" + rec.instance_id +
                                          "' appears in more than one split");
                if (m.texts_[xi].empty() && !rec.text.empty()) m.texts_[xi] = rec.text;
            }
            if (a_new) m.by_annotator_.emplace_back();

            auto key = std::make_pair(ai, xi);
            if (seen.count(key))
                throw DuplicateError("duplicate annotation for (annotator '" + rec.annotator_id +
                                     "', instance '" + rec.instance_id + "')");
            seen[key] = true;
            m.by_instance_[xi].emplace_back(ai, set);
            m.by_annotator_[ai].emplace_back(xi, set);
            ++m.n_entries_;
        }
        if (m.instances_.empty()) throw ValidationError("dataset contains no records");
        for (auto& row : m.by_instance_) sort_entries(row);
        for (auto& row : m.by_annotator_) sort_entries(row);
        return m;
    }

    const LabelScheme& scheme() const { return scheme_; }
    std::size_t n_annotators() const { return annotators_.size(); }
    std::size_t n_instances() const { return instances_.size(); }
    std::size_t n_entries() const { return n_entries_; }

    const std::vector<std::string>& annotators() const { return annotators_; }
    const std::vector<std::string>& instances() const { return instances_; }

    Split split(std::size_t instance) const { return splits_[instance]; }
    const std::string& text(std::size_t instance) const { return texts_[instance]; }

    /// Entries for one instance, sorted by annotator index.
    const std::vector<Entry>& instance_entries(std::size_t instance) const {
        return by_instance_[instance];
    }

    /// Entries for one annotator, sorted by instance index.
    const std::vector<Entry>& annotator_entries(std::size_t annotator) const {
        return by_annotator_[annotator];
    }

    std::optional<LabelSet> entry(std::size_t annotator, std::size_t instance) const {
        for (const auto& [ai, set] : by_instance_[instance]) {
            if (ai == annotator) return set;
        }
        return std::nullopt;
    }

    /// Instances restricted to one split, preserving order. Annotators without
    /// any entry in the split are dropped.
    AnnotationMatrix filter_split(Split split) const {
        std::vector<AnnotationRecord> records;
        for (std::size_t x = 0; x < n_instances(); ++x) {
            if (splits_[x] != split) continue;
            for (const auto& [ai, set] : by_instance_[x]) {
                records.push_back({instances_[x], annotators_[ai], scheme_.names(set), split,
                                   texts_[x]});
            }
        }
        if (records.empty())
            throw InvalidInputError(std::string("no instances in split '") + to_string(split) +
                                    "'");
        return from_records(records, scheme_);
    }

    std::vector<std::size_t> instances_in_split(Split split) const {
        std::vector<std::size_t> out;
        for (std::size_t x = 0; x < n_instances(); ++x) {
            if (splits_[x] == split) out.push_back(x);
        }
        return out;
    }

    friend bool operator==(const AnnotationMatrix& a, const AnnotationMatrix& b) {
        return a.annotators_ == b.annotators_ && a.instances_ == b.instances_ &&
               a.splits_ == b.splits_ && a.texts_ == b.texts_ &&
               a.by_instance_ == b.by_instance_ && a.scheme_.labels == b.scheme_.labels &&
               a.scheme_.task_kind == b.scheme_.task_kind;
    }

private:
    static std::pair<std::uint32_t, bool> intern(std::map<std::string, std::uint32_t>& index,
                                                 const std::string& id,
                                                 std::vector<std::string>& order) {
        auto it = index.find(id);
        if (it != index.end()) return {it->second, false};
        auto i = static_cast<std::uint32_t>(order.size());
        index.emplace(id, i);
        order.push_back(id);
        return {i, true};
    }

    static void sort_entries(std::vector<Entry>& row) {
        std::sort(row.begin(), row.end(),
                  [](const Entry& a, const Entry& b) { return a.first < b.first; });
    }

    LabelScheme scheme_;
    std::vector<std::string> annotators_;
    std::vector<std::string> instances_;
    std::vector<Split> splits_;
    std::vector<std::string> texts_;
    std::vector<std::vector<Entry>> by_instance_;
    std::vector<std::vector<Entry>> by_annotator_;
    std::size_t n_entries_ = 0;
};

/// Parse one JSON-lines record. Throws ParseError/ValidationError mentioning
/// the 1-based line number.
inline AnnotationRecord parse_record_line(const std::string& line, std::size_t line_no) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
        AnnotationRecord rec;
        rec.instance_id = j.at("instance_id").get<std::string>();
        rec.annotator_id = j.at("annotator_id").get<std::string>();
        rec.labels = j.at("labels").get<std::vector<std::string>>();
        rec.split = split_from_string(j.at("split").get<std::string>());
        if (j.contains("text")) rec.text = j.at("text").get<std::string>();
        return rec;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
}

inline AnnotationMatrix parse_dataset(std::istream& in, const LabelScheme& scheme) {
    std::vector<AnnotationRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        records.push_back(parse_record_line(line, line_no));
    }
    try {
        return AnnotationMatrix::from_records(records, scheme);
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("dataset: ") + e.what());
    }
}

inline AnnotationMatrix load_dataset(const std::filesystem::path& path,
                                     const LabelScheme& scheme) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file '" + path.string() + "'");
    return parse_dataset(in, scheme);
}

/// Writes the matrix back as JSON-lines, instance-major, annotators in index
/// order. Reparsing the output reproduces an equal matrix.
inline void save_dataset(const AnnotationMatrix& m, std::ostream& out) {
    for (std::size_t x = 0; x < m.n_instances(); ++x) {
        for (const auto& [ai, set] : m.instance_entries(x)) {
            nlohmann::json j;
            j["instance_id"] = m.instances()[x];
            j["annotator_id"] = m.annotators()[ai];
            j["labels"] = m.scheme().names(set);
            j["split"] = to_string(m.split(x));
            if (!m.text(x).empty()) j["text"] = m.text(x);
            out << j.dump() << '\n';
        }
    }
}

inline void save_dataset(const AnnotationMatrix& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write dataset file '" + path.string() + "'");
    save_dataset(m, out);
}

}  // namespace crowdcluster
