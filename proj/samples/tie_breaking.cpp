// Hand-built toxicity snippet showing how tied votes resolve. Two annotator
// pairs disagree 2-2 on the first post; the scheme's priority order settles
// it and the tie report records every resolution.

#include <iostream>

#include "crowdcluster/crowdcluster.hpp"

namespace cc = crowdcluster;

int main() {
    cc::LabelScheme scheme;
    scheme.task_kind = cc::TaskKind::multiclass;
    scheme.labels = {"hate", "abuse", "neither"};
    scheme.tie_priority = {"hate", "abuse", "neither"};

    std::vector<cc::AnnotationRecord> records = {
        {"post0", "a0", {"hate"}, cc::Split::train, "first post"},
        {"post0", "a1", {"hate"}, cc::Split::train, ""},
        {"post0", "b0", {"abuse"}, cc::Split::train, ""},
        {"post0", "b1", {"abuse"}, cc::Split::train, ""},
        {"post1", "a0", {"neither"}, cc::Split::train, "second post"},
        {"post1", "a1", {"neither"}, cc::Split::train, ""},
        {"post1", "b0", {"neither"}, cc::Split::train, ""},
        {"post1", "b1", {"neither"}, cc::Split::train, ""},
    };
    const cc::AnnotationMatrix m = cc::AnnotationMatrix::from_records(records, scheme);

    // Two manual clusters: the a-pair and the b-pair.
    cc::ClusterAssignment assignment;
    assignment.annotators = m.annotators();
    for (const std::string& name : assignment.annotators)
        assignment.membership.push_back(name[0] == 'a' ? 0 : 1);
    assignment.n_clusters = 2;
    assignment.method = cc::ClusterMethod::identity;

    const cc::ClusteredDataset clustered = cc::aggregate_clusters(m, assignment, {});
    const std::string gold = scheme.names(clustered.gold[0])[0];
    std::cout << "post0 gold label: " << gold << " (2-2 vote, priority wins)\n\n";

    std::cout << "tie report:\n";
    clustered.tie_report_csv(std::cout);
    return 0;
}
