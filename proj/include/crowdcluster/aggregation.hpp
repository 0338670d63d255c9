#pragma once

#include <algorithm>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdcluster/clustering.hpp"
#include "crowdcluster/dataset.hpp"
#include "crowdcluster/errors.hpp"
#include "crowdcluster/matrix.hpp"

namespace crowdcluster {

enum class TieStep { priority_label, global_majority, lexicographic };

inline const char* to_string(TieStep s) {
    switch (s) {
        case TieStep::priority_label: return "priority_label";
        case TieStep::global_majority: return "global_majority";
        case TieStep::lexicographic: return "lexicographic";
    }
    return "lexicographic";
}

inline TieStep tie_step_from_string(const std::string& s) {
    if (s == "priority_label") return TieStep::priority_label;
    if (s == "global_majority") return TieStep::global_majority;
    if (s == "lexicographic") return TieStep::lexicographic;
    throw InvalidInputError("unknown tie-break step '" + s + "'");
}

/// Deterministic stand-in for the adjudicator a live annotation round would
/// recruit on a tie. Steps run in order; lexicographic must close the chain
/// because it is the only step guaranteed to resolve.
struct TieBreakPolicy {
    std::vector<TieStep> chain = {TieStep::priority_label, TieStep::global_majority,
                                  TieStep::lexicographic};
    std::vector<std::string> priority;

    void validate(const LabelScheme& scheme) const {
        if (chain.empty()) throw InvalidConfigError("tie policy: chain must be non-empty");
        if (chain.back() != TieStep::lexicographic)
            throw InvalidConfigError("tie policy: chain must end with lexicographic");
        for (const auto& p : priority) {
            if (scheme.find(p) < 0)
                throw InvalidConfigError("tie policy: priority label '" + p + "' not in scheme");
        }
    }

    /// Priority order from the scheme when the policy itself carries none.
    std::vector<std::string> effective_priority(const LabelScheme& scheme) const {
        return priority.empty() ? scheme.tie_priority : priority;
    }
};

/// One recorded tie resolution; site says where the vote happened
/// ("gold" or "cluster_<c>"). resolved is empty when a half-tied multilabel
/// label was dropped.
struct TieEvent {
    std::string instance_id;
    std::string site;
    std::vector<std::string> tied;
    std::string resolved;
    std::string rule;
};

/// Extra context for tie resolution: label counts over all annotators of the
/// instance (not just the cluster being voted), plus the event collector.
struct TieContext {
    std::vector<std::size_t> global_counts;
    std::size_t global_voters = 0;
    std::vector<TieEvent>* events = nullptr;
    std::string instance_id;
    std::string site;
};

namespace detail {

inline void record_tie(const TieContext* ctx, const LabelScheme& scheme,
                       const std::vector<std::size_t>& tied, const std::string& resolved,
                       const std::string& rule) {
    if (ctx == nullptr || ctx->events == nullptr) return;
    TieEvent ev;
    ev.instance_id = ctx->instance_id;
    ev.site = ctx->site;
    for (std::size_t l : tied) ev.tied.push_back(scheme.labels[l]);
    ev.resolved = resolved;
    ev.rule = rule;
    ctx->events->push_back(std::move(ev));
}

inline std::size_t resolve_multiclass_tie(std::vector<std::size_t> candidates,
                                          const LabelScheme& scheme,
                                          const TieBreakPolicy& policy,
                                          const std::vector<std::size_t>& local_counts,
                                          const TieContext* ctx, std::string& rule_out) {
    const std::vector<std::size_t>& global =
        ctx != nullptr && !ctx->global_counts.empty() ? ctx->global_counts : local_counts;
    for (TieStep step : policy.chain) {
        switch (step) {
            case TieStep::priority_label: {
                for (const auto& name : policy.effective_priority(scheme)) {
                    const auto idx = static_cast<std::size_t>(scheme.find(name));
                    if (std::find(candidates.begin(), candidates.end(), idx) !=
                        candidates.end()) {
                        rule_out = to_string(step);
                        return idx;
                    }
                }
                break;
            }
            case TieStep::global_majority: {
                std::size_t best = 0;
                for (std::size_t c : candidates) best = std::max(best, global[c]);
                std::vector<std::size_t> narrowed;
                for (std::size_t c : candidates) {
                    if (global[c] == best) narrowed.push_back(c);
                }
                if (narrowed.size() == 1) {
                    rule_out = to_string(step);
                    return narrowed[0];
                }
                candidates = std::move(narrowed);
                break;
            }
            case TieStep::lexicographic: {
                std::size_t best = candidates[0];
                for (std::size_t c : candidates) {
                    if (scheme.labels[c] < scheme.labels[best]) best = c;
                }
                rule_out = to_string(step);
                return best;
            }
        }
    }
    throw ConsistencyError("tie policy chain failed to resolve");
}

/// Exact-half multilabel decision for one label. Returns include/exclude.
inline bool resolve_half_tie(std::size_t label, const LabelScheme& scheme,
                             const TieBreakPolicy& policy, const TieContext* ctx,
                             std::string& rule_out) {
    for (TieStep step : policy.chain) {
        switch (step) {
            case TieStep::priority_label: {
                for (const auto& name : policy.effective_priority(scheme)) {
                    if (static_cast<std::size_t>(scheme.find(name)) == label) {
                        rule_out = to_string(step);
                        return true;
                    }
                }
                break;
            }
            case TieStep::global_majority: {
                if (ctx != nullptr && !ctx->global_counts.empty() && ctx->global_voters > 0) {
                    const std::size_t g = ctx->global_counts[label];
                    if (2 * g > ctx->global_voters) {
                        rule_out = to_string(step);
                        return true;
                    }
                    if (2 * g < ctx->global_voters) {
                        rule_out = to_string(step);
                        return false;
                    }
                }
                break;
            }
            case TieStep::lexicographic: {
                // Terminal step keeps the label: ties lean towards assigning
                // every label the voters produced.
                rule_out = to_string(step);
                return true;
            }
        }
    }
    throw ConsistencyError("tie policy chain failed to resolve");
}

}  // namespace detail

/// Majority vote over label sets. Multiclass: the most frequent label, ties
/// through the policy chain. Multilabel: per-label majority, exact halves
/// through the policy chain.
inline LabelSet majority_vote(const std::vector<LabelSet>& votes, const LabelScheme& scheme,
                              const TieBreakPolicy& policy, const TieContext* ctx = nullptr) {
    if (votes.empty()) throw InvalidInputError("majority_vote: no votes");
    policy.validate(scheme);
    const std::size_t n_labels = scheme.n_labels();
    std::vector<std::size_t> counts(n_labels, 0);
    for (const LabelSet& v : votes) {
        if (scheme.task_kind == TaskKind::multiclass && v.size() != 1)
            throw InvalidInputError("majority_vote: multiclass votes must be single labels");
        v.for_each([&](std::size_t l) { ++counts[l]; });
    }

    if (scheme.task_kind == TaskKind::multiclass) {
        std::size_t best = 0;
        for (std::size_t c : counts) best = std::max(best, c);
        std::vector<std::size_t> candidates;
        for (std::size_t l = 0; l < n_labels; ++l) {
            if (counts[l] == best) candidates.push_back(l);
        }
        if (candidates.size() == 1) return LabelSet::single(candidates[0]);
        std::string rule;
        const std::size_t pick =
            detail::resolve_multiclass_tie(candidates, scheme, policy, counts, ctx, rule);
        detail::record_tie(ctx, scheme, candidates, scheme.labels[pick], rule);
        return LabelSet::single(pick);
    }

    LabelSet out;
    const std::size_t n = votes.size();
    for (std::size_t l = 0; l < n_labels; ++l) {
        if (2 * counts[l] > n) {
            out.add(l);
        } else if (2 * counts[l] == n && counts[l] > 0) {
            std::string rule;
            const bool keep = detail::resolve_half_tie(l, scheme, policy, ctx, rule);
            detail::record_tie(ctx, scheme, {l}, keep ? scheme.labels[l] : "", rule);
            if (keep) out.add(l);
        }
    }
    return out;
}

/// Instance-by-cluster label table plus the global majority gold.
struct ClusteredDataset {
    LabelScheme scheme;
    std::size_t n_clusters = 0;
    std::vector<std::string> instances;
    std::vector<Split> splits;
    std::vector<std::string> texts;
    std::vector<std::vector<std::optional<LabelSet>>> cluster_labels;
    std::vector<LabelSet> gold;
    std::vector<double> coverage;
    std::vector<TieEvent> ties;

    std::size_t n_instances() const { return instances.size(); }

    void validate() const {
        for (std::size_t x = 0; x < n_instances(); ++x) {
            bool any = false;
            for (const auto& cl : cluster_labels[x]) {
                if (!cl.has_value()) continue;
                any = true;
                if (scheme.task_kind == TaskKind::multiclass && cl->size() != 1)
                    throw ConsistencyError("clustered dataset: non-singleton multiclass label");
            }
            if (!any)
                throw ConsistencyError("clustered dataset: instance '" + instances[x] +
                                       "' has no cluster label");
        }
    }

    void to_jsonl(std::ostream& out) const {
        for (std::size_t x = 0; x < n_instances(); ++x) {
            nlohmann::json j;
            j["instance_id"] = instances[x];
            j["split"] = to_string(splits[x]);
            if (!texts[x].empty()) j["text"] = texts[x];
            j["gold"] = scheme.names(gold[x]);
            for (std::size_t c = 0; c < n_clusters; ++c) {
                const std::string key = "cluster_" + std::to_string(c);
                if (cluster_labels[x][c].has_value()) {
                    j[key] = scheme.names(*cluster_labels[x][c]);
                } else {
                    j[key] = nullptr;
                }
            }
            out << j.dump() << '\n';
        }
    }

    void tie_report_csv(std::ostream& out) const {
        out << "instance_id,site,tied,resolved,rule\n";
        for (const auto& ev : ties) {
            std::string joined;
            for (std::size_t i = 0; i < ev.tied.size(); ++i) {
                if (i > 0) joined += '|';
                joined += ev.tied[i];
            }
            out << csv_escape(ev.instance_id) << ',' << ev.site << ',' << csv_escape(joined)
                << ',' << csv_escape(ev.resolved) << ',' << ev.rule << '\n';
        }
    }

    static ClusteredDataset from_jsonl(std::istream& in, const LabelScheme& scheme) {
        ClusteredDataset d;
        d.scheme = scheme;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
            }
            if (d.instances.empty()) {
                std::size_t c = 0;
                while (j.contains("cluster_" + std::to_string(c))) ++c;
                if (c == 0)
                    throw ValidationError("line " + std::to_string(line_no) +
                                          ": no cluster_<i> keys");
                d.n_clusters = c;
            }
            d.instances.push_back(j.at("instance_id").get<std::string>());
            d.splits.push_back(j.contains("split")
                                   ? split_from_string(j.at("split").get<std::string>())
                                   : Split::train);
            d.texts.push_back(j.contains("text") ? j.at("text").get<std::string>() : "");
            d.gold.push_back(
                scheme.set_from_names(j.at("gold").get<std::vector<std::string>>()));
            std::vector<std::optional<LabelSet>> row;
            for (std::size_t c = 0; c < d.n_clusters; ++c) {
                const auto& v = j.at("cluster_" + std::to_string(c));
                if (v.is_null()) {
                    row.push_back(std::nullopt);
                } else {
                    row.push_back(scheme.set_from_names(v.get<std::vector<std::string>>()));
                }
            }
            d.cluster_labels.push_back(std::move(row));
        }
        if (d.instances.empty()) throw ValidationError("clustered dataset: no records");
        d.coverage.assign(d.n_clusters, 0.0);
        for (std::size_t c = 0; c < d.n_clusters; ++c) {
            std::size_t have = 0;
            for (std::size_t x = 0; x < d.n_instances(); ++x) {
                if (d.cluster_labels[x][c].has_value()) ++have;
            }
            d.coverage[c] = static_cast<double>(have) / static_cast<double>(d.n_instances());
        }
        d.validate();
        return d;
    }
};

/// Vote each cluster's members per instance. Multiclass ties go through the
/// policy chain; multilabel cluster ties keep all tied labels ("assign all
/// available labels"). Clusters with no annotator on an instance stay MISSING
/// unless impute_missing_with_gold is set.
inline ClusteredDataset aggregate_clusters(const AnnotationMatrix& m,
                                           const ClusterAssignment& assignment,
                                           const TieBreakPolicy& policy,
                                           bool impute_missing_with_gold = false) {
    policy.validate(m.scheme());
    assignment.validate();

    // Matrix annotator index -> cluster index.
    std::vector<std::size_t> cluster_of(m.n_annotators());
    for (std::size_t a = 0; a < m.n_annotators(); ++a) {
        bool found = false;
        for (std::size_t t = 0; t < assignment.annotators.size(); ++t) {
            if (assignment.annotators[t] == m.annotators()[a]) {
                cluster_of[a] = assignment.membership[t];
                found = true;
                break;
            }
        }
        if (!found)
            throw ConsistencyError("annotator '" + m.annotators()[a] +
                                   "' missing from cluster assignment");
    }

    ClusteredDataset d;
    d.scheme = m.scheme();
    d.n_clusters = assignment.n_clusters;
    const std::size_t n_labels = m.scheme().n_labels();
    const bool multiclass = m.scheme().task_kind == TaskKind::multiclass;

    for (std::size_t x = 0; x < m.n_instances(); ++x) {
        d.instances.push_back(m.instances()[x]);
        d.splits.push_back(m.split(x));
        d.texts.push_back(m.text(x));

        const auto& entries = m.instance_entries(x);
        std::vector<std::vector<LabelSet>> votes(assignment.n_clusters);
        std::vector<LabelSet> all_votes;
        TieContext ctx;
        ctx.global_counts.assign(n_labels, 0);
        ctx.instance_id = m.instances()[x];
        ctx.events = &d.ties;
        for (const auto& [a, set] : entries) {
            votes[cluster_of[a]].push_back(set);
            all_votes.push_back(set);
            set.for_each([&](std::size_t l) { ++ctx.global_counts[l]; });
        }
        ctx.global_voters = all_votes.size();

        std::vector<std::optional<LabelSet>> row(assignment.n_clusters);
        for (std::size_t c = 0; c < assignment.n_clusters; ++c) {
            if (votes[c].empty()) continue;
            ctx.site = "cluster_" + std::to_string(c);
            if (multiclass) {
                row[c] = majority_vote(votes[c], m.scheme(), policy, &ctx);
            } else {
                // Per-label majority with the union rule on exact halves.
                LabelSet set;
                std::vector<std::size_t> counts(n_labels, 0);
                for (const LabelSet& v : votes[c])
                    v.for_each([&](std::size_t l) { ++counts[l]; });
                std::vector<std::size_t> tied;
                for (std::size_t l = 0; l < n_labels; ++l) {
                    if (2 * counts[l] > votes[c].size()) {
                        set.add(l);
                    } else if (2 * counts[l] == votes[c].size() && counts[l] > 0) {
                        set.add(l);
                        tied.push_back(l);
                    }
                }
                if (!tied.empty()) {
                    std::string resolved;
                    for (std::size_t i = 0; i < tied.size(); ++i) {
                        if (i > 0) resolved += '|';
                        resolved += m.scheme().labels[tied[i]];
                    }
                    detail::record_tie(&ctx, m.scheme(), tied, resolved, "assign_all");
                }
                row[c] = set;
            }
        }

        ctx.site = "gold";
        d.gold.push_back(majority_vote(all_votes, m.scheme(), policy, &ctx));
        if (impute_missing_with_gold) {
            for (auto& cl : row) {
                if (!cl.has_value()) cl = d.gold.back();
            }
        }
        d.cluster_labels.push_back(std::move(row));
    }

    d.coverage.assign(d.n_clusters, 0.0);
    for (std::size_t c = 0; c < d.n_clusters; ++c) {
        std::size_t have = 0;
        for (std::size_t x = 0; x < d.n_instances(); ++x) {
            if (d.cluster_labels[x][c].has_value()) ++have;
        }
        d.coverage[c] = static_cast<double>(have) / static_cast<double>(d.n_instances());
    }
    d.validate();
    return d;
}

}  // namespace crowdcluster
