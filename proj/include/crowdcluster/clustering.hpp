#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdcluster/agreement.hpp"
#include "crowdcluster/dataset.hpp"
#include "crowdcluster/errors.hpp"
#include "crowdcluster/log.hpp"
#include "crowdcluster/rng.hpp"

namespace crowdcluster {

enum class ClusterMethod { identity, kmeans, kmedoids };

inline const char* to_string(ClusterMethod m) {
    switch (m) {
        case ClusterMethod::identity: return "identity";
        case ClusterMethod::kmeans: return "kmeans";
        case ClusterMethod::kmedoids: return "kmedoids";
    }
    return "kmeans";
}

inline ClusterMethod cluster_method_from_string(const std::string& s) {
    if (s == "identity") return ClusterMethod::identity;
    if (s == "kmeans") return ClusterMethod::kmeans;
    if (s == "kmedoids") return ClusterMethod::kmedoids;
    throw ValidationError("unknown cluster method '" + s + "'");
}

struct ClusterAssignment {
    std::size_t n_clusters = 0;
    std::vector<std::string> annotators;
    std::vector<std::size_t> membership;
    ClusterMethod method = ClusterMethod::kmeans;
    std::uint64_t seed = 0;
    double inertia = 0.0;

    /// Annotator indices per cluster, ascending inside each cluster.
    std::vector<std::vector<std::size_t>> groups() const {
        std::vector<std::vector<std::size_t>> g(n_clusters);
        for (std::size_t i = 0; i < membership.size(); ++i) g[membership[i]].push_back(i);
        return g;
    }

    std::size_t cluster_of(const std::string& annotator) const {
        for (std::size_t i = 0; i < annotators.size(); ++i) {
            if (annotators[i] == annotator) return membership[i];
        }
        throw InvalidInputError("annotator '" + annotator + "' not in assignment");
    }

    nlohmann::json to_json() const {
        nlohmann::json members = nlohmann::json::object();
        for (std::size_t i = 0; i < annotators.size(); ++i) members[annotators[i]] = membership[i];
        nlohmann::json j;
        j["n_clusters"] = n_clusters;
        j["membership"] = std::move(members);
        j["provenance"] = {{"method", to_string(method)}, {"seed", seed}, {"inertia", inertia}};
        return j;
    }

    static ClusterAssignment from_json(const nlohmann::json& j) {
        ClusterAssignment a;
        a.n_clusters = j.at("n_clusters").get<std::size_t>();
        // nlohmann objects iterate in sorted key order; keep ids sorted so the
        // file alone defines the assignment.
        for (const auto& [id, idx] : j.at("membership").items()) {
            a.annotators.push_back(id);
            a.membership.push_back(idx.get<std::size_t>());
        }
        const auto& prov = j.at("provenance");
        a.method = cluster_method_from_string(prov.at("method").get<std::string>());
        a.seed = prov.at("seed").get<std::uint64_t>();
        a.inertia = prov.at("inertia").get<double>();
        a.validate();
        return a;
    }

    void validate() const {
        if (annotators.size() != membership.size())
            throw ConsistencyError("cluster assignment: annotators and membership disagree");
        std::vector<std::size_t> sizes(n_clusters, 0);
        for (std::size_t m : membership) {
            if (m >= n_clusters) throw ConsistencyError("cluster assignment: index out of range");
            ++sizes[m];
        }
        for (std::size_t s : sizes) {
            if (s == 0) throw ConsistencyError("cluster assignment: empty cluster");
        }
    }
};

/// Cluster count policy: explicit override, or the minimum number of
/// annotators any instance received. Odd counts are preferred; even results
/// only get a warning.
inline std::size_t cluster_count(const AnnotationMatrix& m,
                                 std::optional<std::size_t> override_count = std::nullopt) {
    const std::size_t n = m.n_annotators();
    if (override_count.has_value()) {
        if (*override_count < 2 || *override_count > n)
            throw InvalidConfigError("cluster count override " + std::to_string(*override_count) +
                                     " outside [2, " + std::to_string(n) + "]");
        return *override_count;
    }
    std::size_t c = n;
    for (std::size_t x = 0; x < m.n_instances(); ++x)
        c = std::min(c, m.instance_entries(x).size());
    if (c % 2 == 0)
        log_warn("cluster count " + std::to_string(c) + " is even; odd counts avoid vote ties");
    return c;
}

namespace detail {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

/// k-means++ seeding; falls back to uniform draws when every remaining point
/// coincides with a chosen center.
inline std::vector<std::vector<double>> seed_centers(const std::vector<std::vector<double>>& pts,
                                                     std::size_t k, Rng& rng) {
    std::vector<std::vector<double>> centers;
    centers.push_back(pts[rng.below(pts.size())]);
    std::vector<double> d2(pts.size(), 0.0);
    while (centers.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centers) best = std::min(best, sq_dist(pts[i], c));
            d2[i] = best;
            total += best;
        }
        if (total > 0.0) {
            centers.push_back(pts[rng.weighted(d2)]);
        } else {
            centers.push_back(pts[rng.below(pts.size())]);
        }
    }
    return centers;
}

struct KmeansRun {
    std::vector<std::size_t> membership;
    double inertia = 0.0;
};

inline KmeansRun kmeans_once(const std::vector<std::vector<double>>& pts, std::size_t k, Rng rng,
                             std::size_t max_iter) {
    const std::size_t n = pts.size();
    std::vector<std::vector<double>> centers = seed_centers(pts, k, rng);
    std::vector<std::size_t> membership(n, 0);
    std::vector<std::size_t> prev;

    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        // Assign: nearest center, ties to the lowest index.
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t c = 0; c < k; ++c) {
                const double d = sq_dist(pts[i], centers[c]);
                if (d < best) {
                    best = d;
                    arg = c;
                }
            }
            membership[i] = arg;
        }
        // Repair empty clusters with the globally farthest point; points that
        // are sole members stay put so the repair cannot create new holes.
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t m : membership) ++sizes[m];
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] != 0) continue;
            double worst = -1.0;
            std::size_t arg = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (sizes[membership[i]] < 2) continue;
                const double d = sq_dist(pts[i], centers[membership[i]]);
                if (d > worst) {
                    worst = d;
                    arg = i;
                }
            }
            if (arg == n) throw ConsistencyError("kmeans: cannot repair empty cluster");
            --sizes[membership[arg]];
            membership[arg] = c;
            ++sizes[c];
        }
        if (membership == prev) break;
        prev = membership;
        // Update centroids.
        const std::size_t dim = pts[0].size();
        centers.assign(k, std::vector<double>(dim, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t d = 0; d < dim; ++d) centers[membership[i]][d] += pts[i][d];
        }
        for (std::size_t c = 0; c < k; ++c) {
            for (std::size_t d = 0; d < dim; ++d)
                centers[c][d] /= static_cast<double>(sizes[c]);
        }
    }

    KmeansRun run;
    run.membership = membership;
    // Inertia against centroids of the final membership.
    const std::size_t dim = pts[0].size();
    std::vector<std::vector<double>> centroid(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        ++sizes[membership[i]];
        for (std::size_t d = 0; d < dim; ++d) centroid[membership[i]][d] += pts[i][d];
    }
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t d = 0; d < dim; ++d) centroid[c][d] /= static_cast<double>(sizes[c]);
    }
    for (std::size_t i = 0; i < n; ++i) run.inertia += sq_dist(pts[i], centroid[membership[i]]);
    return run;
}

inline KmeansRun kmedoids_once(const DenseMatrix& dist, std::size_t k, Rng rng,
                               std::size_t max_iter) {
    const std::size_t n = dist.rows;
    // Greedy spread seeding on the raw distances, mirroring k-means++.
    std::vector<std::size_t> medoids;
    medoids.push_back(rng.below(n));
    while (medoids.size() < k) {
        std::vector<double> d2(n, 0.0);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t m : medoids) best = std::min(best, dist.at(i, m));
            d2[i] = best * best;
            total += d2[i];
        }
        if (total > 0.0) {
            medoids.push_back(rng.weighted(d2));
        } else {
            medoids.push_back(rng.below(n));
        }
    }

    std::vector<std::size_t> membership(n, 0);
    std::vector<std::size_t> prev;
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t c = 0; c < k; ++c) {
                const double d = dist.at(i, medoids[c]);
                if (d < best) {
                    best = d;
                    arg = c;
                }
            }
            membership[i] = arg;
        }
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t m : membership) ++sizes[m];
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] != 0) continue;
            double worst = -1.0;
            std::size_t arg = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (sizes[membership[i]] < 2) continue;
                const double d = dist.at(i, medoids[membership[i]]);
                if (d > worst) {
                    worst = d;
                    arg = i;
                }
            }
            if (arg == n) throw ConsistencyError("kmedoids: cannot repair empty cluster");
            --sizes[membership[arg]];
            membership[arg] = c;
            ++sizes[c];
            medoids[c] = arg;
        }
        if (membership == prev) break;
        prev = membership;
        // New medoid: member minimizing total distance to its cluster.
        for (std::size_t c = 0; c < k; ++c) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t arg = medoids[c];
            for (std::size_t i = 0; i < n; ++i) {
                if (membership[i] != c) continue;
                double total = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    if (membership[j] == c) total += dist.at(i, j);
                }
                if (total < best) {
                    best = total;
                    arg = i;
                }
            }
            medoids[c] = arg;
        }
    }

    KmeansRun run;
    run.membership = membership;
    for (std::size_t i = 0; i < n; ++i) run.inertia += dist.at(i, medoids[membership[i]]);
    return run;
}

}  // namespace detail

/// Partition annotators from the distance matrix. C = N short-circuits to the
/// identity assignment: each annotator is its own cluster and no clustering
/// runs. Otherwise annotator i is embedded as row i of D and Euclidean
/// k-means runs `restarts` times; the run with the lowest inertia wins, ties
/// to the earliest restart.
inline ClusterAssignment cluster_annotators(const DistanceMatrix& dist, std::size_t c,
                                            std::uint64_t seed, std::size_t restarts = 10,
                                            ClusterMethod method = ClusterMethod::kmeans,
                                            std::size_t max_iter = 300) {
    const std::size_t n = dist.values.rows;
    if (c < 2 || c > n)
        throw InvalidInputError("cluster_annotators: C=" + std::to_string(c) +
                                " outside [2, " + std::to_string(n) + "]");
    if (restarts == 0) throw InvalidInputError("cluster_annotators: restarts must be positive");

    ClusterAssignment out;
    out.annotators = dist.annotators;
    out.n_clusters = c;
    out.seed = seed;

    if (c == n) {
        out.method = ClusterMethod::identity;
        out.membership.resize(n);
        for (std::size_t i = 0; i < n; ++i) out.membership[i] = i;
        out.inertia = 0.0;
        return out;
    }
    if (method == ClusterMethod::identity)
        throw InvalidInputError("cluster_annotators: identity method requires C = N");

    std::vector<std::vector<double>> pts(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) pts[i][j] = dist.values.at(i, j);
    }

    out.method = method;
    detail::KmeansRun best;
    bool have = false;
    Rng root(seed);
    for (std::size_t r = 0; r < restarts; ++r) {
        Rng rr = root.derive(r);
        detail::KmeansRun run = out.method == ClusterMethod::kmedoids
                                    ? detail::kmedoids_once(dist.values, c, rr, max_iter)
                                    : detail::kmeans_once(pts, c, rr, max_iter);
        if (!have || run.inertia < best.inertia) {
            best = std::move(run);
            have = true;
        }
    }
    out.membership = std::move(best.membership);
    out.inertia = best.inertia;
    out.validate();
    return out;
}

/// Adjusted Rand index between two labelings of the same points.
inline double adjusted_rand_index(const std::vector<std::size_t>& a,
                                  const std::vector<std::size_t>& b) {
    if (a.size() != b.size())
        throw InvalidInputError("adjusted_rand_index: labelings differ in length");
    if (a.empty()) throw InvalidInputError("adjusted_rand_index: empty labelings");
    if (a.size() == 1) return 1.0;
    std::map<std::pair<std::size_t, std::size_t>, std::uint64_t> cont;
    std::map<std::size_t, std::uint64_t> ra;
    std::map<std::size_t, std::uint64_t> rb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++cont[{a[i], b[i]}];
        ++ra[a[i]];
        ++rb[b[i]];
    }
    auto choose2 = [](std::uint64_t x) { return static_cast<double>(x) * (x - 1) / 2.0; };
    double sum_ij = 0.0;
    for (const auto& [_, v] : cont) sum_ij += choose2(v);
    double sum_a = 0.0;
    for (const auto& [_, v] : ra) sum_a += choose2(v);
    double sum_b = 0.0;
    for (const auto& [_, v] : rb) sum_b += choose2(v);
    const double pairs = choose2(static_cast<std::uint64_t>(a.size()));
    const double expected = sum_a * sum_b / pairs;
    const double denom = 0.5 * (sum_a + sum_b) - expected;
    if (denom == 0.0) return 1.0;
    return (sum_ij - expected) / denom;
}

}  // namespace crowdcluster
