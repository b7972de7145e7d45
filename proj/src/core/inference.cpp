#include "core/inference.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "core/error.hpp"

namespace mvq {

void validate_query_set(const QuerySet& qs, bool multi_mode) {
    if (qs.records.empty())
        throw data_error("query set '" + qs.target_id + "' has no records");
    if (qs.records.size() > 3)
        throw data_error("query set '" + qs.target_id + "' has more than 3 records");
    std::set<Viewpoint> seen;
    for (const auto& r : qs.records) {
        if (!seen.insert(r.viewpoint).second)
            throw data_error("query set '" + qs.target_id +
                             "' has duplicate viewpoint " +
                             viewpoint_name(r.viewpoint));
    }
    for (Viewpoint v : qs.missing) {
        if (seen.count(v))
            throw data_error("query set '" + qs.target_id +
                             "' lists present viewpoint as missing");
    }
    if (multi_mode && qs.records.size() + qs.missing.size() != 3)
        throw data_error("query set '" + qs.target_id +
                         "' does not partition the three viewpoints");
}

std::vector<size_t> admit_gallery(const QuerySet& qs,
                                  const std::vector<FeatureRecord>& gallery,
                                  bool junk_filter) {
    std::vector<size_t> admitted;
    admitted.reserve(gallery.size());
    if (!junk_filter) {
        for (size_t i = 0; i < gallery.size(); ++i) admitted.push_back(i);
        return admitted;
    }
    std::set<std::pair<std::string, std::string>> blocked;
    for (const auto& q : qs.records)
        blocked.emplace(q.vehicle_id, q.camera_id);
    for (size_t i = 0; i < gallery.size(); ++i) {
        if (!blocked.count({gallery[i].vehicle_id, gallery[i].camera_id}))
            admitted.push_back(i);
    }
    return admitted;
}

namespace {

RankedList rank_by_scores(const std::vector<size_t>& admitted, const Vec& scores,
                          const std::vector<FeatureRecord>& gallery) {
    std::vector<size_t> order(admitted.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return gallery[admitted[a]].record_id < gallery[admitted[b]].record_id;
    });
    RankedList out;
    out.indices.reserve(order.size());
    out.scores.reserve(order.size());
    for (size_t i : order) {
        out.indices.push_back(admitted[i]);
        out.scores.push_back(scores[i]);
    }
    return out;
}

}  // namespace

RankedList score_single(const FeatureRecord& query,
                        const std::vector<FeatureRecord>& gallery,
                        const std::vector<size_t>& admitted) {
    if (admitted.empty())
        throw data_error("score_single: empty admitted gallery");
    Vec scores(admitted.size());
    for (size_t i = 0; i < admitted.size(); ++i)
        scores[i] = cosine_sim(query.appearance, gallery[admitted[i]].appearance);
    return rank_by_scores(admitted, scores, gallery);
}

RankedList score_average(const QuerySet& qs,
                         const std::vector<FeatureRecord>& gallery,
                         const std::vector<size_t>& admitted) {
    if (qs.records.empty())
        throw data_error("score_average: empty query set");
    if (admitted.empty())
        throw data_error("score_average: empty admitted gallery");
    Vec mean(qs.records[0].appearance.size(), 0.0);
    for (const auto& q : qs.records) axpy(mean, 1.0, q.appearance);
    for (auto& v : mean) v /= static_cast<double>(qs.records.size());
    if (norm(mean) < 1e-12)
        throw data_error("score_average: query features cancel to zero norm");
    const Vec fused = l2_normalize(mean);
    Vec scores(admitted.size());
    for (size_t i = 0; i < admitted.size(); ++i)
        scores[i] = cosine_sim(fused, gallery[admitted[i]].appearance);
    return rank_by_scores(admitted, scores, gallery);
}

Vec viewpoint_weights(const std::vector<Vec>& query_view_features,
                      const Vec& gallery_view_feature) {
    if (query_view_features.empty())
        throw data_error("viewpoint_weights: no query viewpoint features");
    Vec sims(query_view_features.size());
    for (size_t i = 0; i < query_view_features.size(); ++i) {
        if (query_view_features[i].empty())
            throw data_error("viewpoint_weights: missing viewpoint feature");
        sims[i] = cosine_sim(query_view_features[i], gallery_view_feature);
    }
    return softmax(sims);
}

RankedList score_fused(const std::vector<FeatureRecord>& queries,
                       const std::vector<FeatureRecord>& gallery,
                       const std::vector<size_t>& admitted,
                       FusionRule rule) {
    if (queries.empty())
        throw data_error("score_fused: no queries");
    if (admitted.empty())
        throw data_error("score_fused: empty admitted gallery");

    std::vector<Vec> view_feats(queries.size());
    for (size_t i = 0; i < queries.size(); ++i)
        view_feats[i] = queries[i].viewpoint_feature;

    Vec scores(admitted.size());
    for (size_t gi = 0; gi < admitted.size(); ++gi) {
        const FeatureRecord& g = gallery[admitted[gi]];
        const Vec w = viewpoint_weights(view_feats, g.viewpoint_feature);
        if (rule == FusionRule::WeightedSum) {
            Vec terms(queries.size());
            for (size_t i = 0; i < queries.size(); ++i)
                terms[i] = w[i] * cosine_sim(queries[i].appearance, g.appearance);
            scores[gi] = sum(terms);
        } else {
            Vec fused(queries[0].appearance.size(), 0.0);
            for (size_t i = 0; i < queries.size(); ++i)
                axpy(fused, w[i], queries[i].appearance);
            if (norm(fused) < 1e-12)
                throw data_error("score_fused: weighted features cancel to zero norm");
            scores[gi] = cosine_sim(fused, g.appearance);
        }
    }
    return rank_by_scores(admitted, scores, gallery);
}

RankedList score_multi(const QuerySet& qs,
                       const std::vector<FeatureRecord>& gallery,
                       const std::vector<size_t>& admitted,
                       const CvfrModel* cvfr,
                       const InferenceOptions& options) {
    validate_query_set(qs, true);

    std::vector<FeatureRecord> queries(qs.records.begin(), qs.records.end());
    if (!qs.missing.empty()) {
        if (cvfr != nullptr) {
            std::map<Viewpoint, Vec> available;
            for (const auto& q : qs.records)
                available[q.viewpoint] = q.appearance;
            for (Viewpoint mv : qs.missing) {
                FeatureRecord synth;
                synth.record_id = qs.target_id + ":recovered:" +
                                  viewpoint_name(mv);
                synth.vehicle_id = qs.target_id;
                synth.camera_id = "";
                synth.viewpoint = mv;
                synth.appearance = recover(*cvfr, available, mv);
                const Vec& centroid =
                    cvfr->viewpoint_centroids[static_cast<size_t>(mv)];
                if (centroid.empty())
                    throw model_error("score_multi: recovery model lacks viewpoint centroids");
                synth.viewpoint_feature = centroid;
                queries.push_back(std::move(synth));
            }
        } else if (!options.allow_partial) {
            throw model_error("score_multi: query set '" + qs.target_id +
                              "' is missing viewpoints and no recovery model was given");
        }
    }
    // fixed viewpoint order keeps weight triples deterministic
    std::sort(queries.begin(), queries.end(),
              [](const FeatureRecord& a, const FeatureRecord& b) {
                  return static_cast<int>(a.viewpoint) < static_cast<int>(b.viewpoint);
              });
    return score_fused(queries, gallery, admitted, options.fusion);
}

}  // namespace mvq
