#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "core/dense.hpp"

namespace mvq {

enum class Viewpoint : int { Front = 0, Side = 1, Rear = 2 };

const char* viewpoint_name(Viewpoint v);
Viewpoint viewpoint_from_name(const std::string& name);

// One ranked gallery entry as seen by the metrics.
struct JudgedEntry {
    bool positive = false;
    std::string camera_id;
    Viewpoint viewpoint = Viewpoint::Front;
    Vec viewpoint_feature;
};
using JudgedList = std::vector<JudgedEntry>;

enum class EmptyPositivePolicy { CountZero, Exclude };

// Same-camera similarity test for CSP: Euclidean distance between viewpoint
// features (default), or discrete label equality for galleries without
// viewpoint features.
enum class SuppressionMode { Features, Labels };

struct MetricConfig {
    std::vector<size_t> cmc_ranks{1, 5, 10};
    double epsilon = 0.5;
    EmptyPositivePolicy empty_policy = EmptyPositivePolicy::CountZero;
    SuppressionMode suppression = SuppressionMode::Features;
};

// 1 iff a positive appears within the first k positions (full list when k
// exceeds its length).
double cmc_at_k(const JudgedList& list, size_t k);

// Mean over positives of (#positives at ranks <= r) / r. Returns 0 when the
// list has no positives.
double average_precision(const JudgedList& list);

// (#positives) / (rank of the last positive).
double inp(const JudgedList& list);

// Collapse each camera's positives to its best-ranked one, then AP.
double cgm(const JudgedList& list);

struct CspResult {
    double value = 0.0;
    size_t retained_positives = 0;
    size_t suppressed = 0;
};
// Greedy scan in rank order: a positive is deleted when a previously
// retained positive of the same camera has a similar viewpoint; negatives
// are never deleted. AP over the filtered list.
CspResult csp(const JudgedList& list, double epsilon,
              SuppressionMode mode = SuppressionMode::Features);

struct QueryMetrics {
    std::vector<double> cmc;  // parallel to config.cmc_ranks
    double ap = 0.0;
    double inp = 0.0;
    double cgm = 0.0;
    double csp = 0.0;
    size_t positives = 0;
    size_t csp_positives = 0;
    size_t suppressed = 0;
    bool flagged = false;  // zero (remaining) positives somewhere
};
QueryMetrics evaluate_query(const JudgedList& list, const MetricConfig& config);

struct PerQueryRow {
    std::string query_id;
    std::string target_id;
    QueryMetrics metrics;
};

struct EvalReport {
    MetricConfig config;
    std::vector<PerQueryRow> per_query;
    std::vector<std::pair<std::string, double>> aggregates;
};

struct NamedJudgedList {
    std::string query_id;
    std::string target_id;
    JudgedList list;
};

EvalReport evaluate(const std::vector<NamedJudgedList>& lists,
                    const MetricConfig& config);

}  // namespace mvq
