#pragma once

#include <string>
#include <vector>

#include "core/cvfr.hpp"
#include "core/inference.hpp"
#include "core/io.hpp"
#include "core/synth.hpp"
#include "core/vcc.hpp"

namespace mvq {

std::vector<FeatureRecord> embed_records(const VccModel& model,
                                         const std::vector<RawRecord>& records);

// Unit-norm mean viewpoint feature per class.
std::array<Vec, 3> viewpoint_centroids(const std::vector<FeatureRecord>& records);

// Record-level aligned triples for recovery training: per identity, the
// per-viewpoint record lists are shuffled and zipped round-by-round, capped
// at `rounds_per_identity`.
std::vector<AlignedTriple> aligned_triples(const std::vector<FeatureRecord>& records,
                                           size_t rounds_per_identity,
                                           uint64_t seed);

enum class EvalMode { Single, Average, Multi };

EvalMode eval_mode_from_name(const std::string& name);
const char* eval_mode_name(EvalMode mode);

struct EvalJob {
    EvalMode mode = EvalMode::Multi;
    MetricConfig metric;
    InferenceOptions options;
    const CvfrModel* cvfr = nullptr;
    size_t threads = 1;
};

// Single mode ranks each query record independently; average and multi rank
// once per query set.
EvalReport run_eval(const std::vector<QuerySet>& query_sets,
                    const std::vector<FeatureRecord>& gallery,
                    const EvalJob& job);

// Fused scoring with explicit per-set query records (the query-count sweep
// uses sets that repeat viewpoints).
EvalReport run_eval_fused(const std::vector<std::string>& targets,
                          const std::vector<std::vector<FeatureRecord>>& per_set_queries,
                          const std::vector<FeatureRecord>& gallery,
                          const MetricConfig& metric,
                          const InferenceOptions& options,
                          size_t threads);

struct ExperimentSetting {
    std::string label;
    EvalReport report;
};

struct ExperimentResult {
    std::vector<ExperimentSetting> settings;
    std::string summary_csv;  // one row per setting
};

// Gallery-modification sweep: add_k in {0, 5, 10}, multi-query inference.
ExperimentResult experiment_fig8(const SynthDataset& ds, const VccModel& vcc,
                                 const MetricConfig& metric,
                                 const InferenceOptions& options, uint64_t seed);

// Missing-viewpoint ablation rows (a)-(e).
ExperimentResult experiment_table5(const SynthDataset& ds, const VccModel& vcc,
                                   const CvfrModel& cvfr,
                                   const MetricConfig& metric,
                                   const InferenceOptions& options, uint64_t seed);

// Query-count sweep 1..3 distinct viewpoints, then labeled repeat rows.
ExperimentResult experiment_fig10(const SynthDataset& ds, const VccModel& vcc,
                                  const MetricConfig& metric,
                                  const InferenceOptions& options, uint64_t seed,
                                  size_t max_queries = 5);

}  // namespace mvq
