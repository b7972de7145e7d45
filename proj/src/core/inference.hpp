#pragma once

#include <optional>

#include "core/cvfr.hpp"
#include "core/records.hpp"

namespace mvq {

// With unit-norm features a weighted sum of cosines and an inner product on
// weighted features are the same number, so the second route normalizes the
// fused feature before the cosine.
enum class FusionRule {
    WeightedSum,      // score = sum_i w_i * cos(f_a^{q_i}, f_a^g)
    WeightedFeature,  // score = cos(sum_i w_i f_a^{q_i}, f_a^g)
};

struct InferenceOptions {
    bool junk_filter = true;
    FusionRule fusion = FusionRule::WeightedSum;
    // Permit multi-query scoring over fewer than three viewpoints without a
    // recovery model (the 2-view ablation and the query-count sweeps).
    bool allow_partial = false;
};

// Indices of gallery records admitted for a query set: records sharing both
// vehicle and camera with any query record are excluded unless the filter is
// off.
std::vector<size_t> admit_gallery(const QuerySet& qs,
                                  const std::vector<FeatureRecord>& gallery,
                                  bool junk_filter);

RankedList score_single(const FeatureRecord& query,
                        const std::vector<FeatureRecord>& gallery,
                        const std::vector<size_t>& admitted);

RankedList score_average(const QuerySet& qs,
                         const std::vector<FeatureRecord>& gallery,
                         const std::vector<size_t>& admitted);

// Softmax over per-query viewpoint similarities to one gallery item.
Vec viewpoint_weights(const std::vector<Vec>& query_view_features,
                      const Vec& gallery_view_feature);

// Weighted fusion with explicit queries; exposed for the partial modes and
// for direct testing of the fusion layer.
RankedList score_fused(const std::vector<FeatureRecord>& queries,
                       const std::vector<FeatureRecord>& gallery,
                       const std::vector<size_t>& admitted,
                       FusionRule rule);

RankedList score_multi(const QuerySet& qs,
                       const std::vector<FeatureRecord>& gallery,
                       const std::vector<size_t>& admitted,
                       const CvfrModel* cvfr,
                       const InferenceOptions& options);

}  // namespace mvq
