#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "core/error.hpp"

namespace mvq {

const char* viewpoint_name(Viewpoint v) {
    switch (v) {
        case Viewpoint::Front: return "front";
        case Viewpoint::Side:  return "side";
        case Viewpoint::Rear:  return "rear";
    }
    return "front";
}

Viewpoint viewpoint_from_name(const std::string& name) {
    if (name == "front") return Viewpoint::Front;
    if (name == "side") return Viewpoint::Side;
    if (name == "rear") return Viewpoint::Rear;
    throw data_error("unknown viewpoint label: " + name);
}

double cmc_at_k(const JudgedList& list, size_t k) {
    if (k == 0)
        throw data_error("cmc_at_k: k must be positive");
    const size_t limit = std::min(k, list.size());
    for (size_t i = 0; i < limit; ++i)
        if (list[i].positive) return 1.0;
    return 0.0;
}

double average_precision(const JudgedList& list) {
    size_t positives = 0;
    Vec terms;
    for (size_t i = 0; i < list.size(); ++i) {
        if (list[i].positive) {
            ++positives;
            terms.push_back(static_cast<double>(positives) /
                            static_cast<double>(i + 1));
        }
    }
    if (positives == 0) return 0.0;
    return sum(terms) / static_cast<double>(positives);
}

double inp(const JudgedList& list) {
    size_t positives = 0;
    size_t last_rank = 0;
    for (size_t i = 0; i < list.size(); ++i) {
        if (list[i].positive) {
            ++positives;
            last_rank = i + 1;
        }
    }
    if (positives == 0) return 0.0;
    return static_cast<double>(positives) / static_cast<double>(last_rank);
}

double cgm(const JudgedList& list) {
    JudgedList collapsed;
    collapsed.reserve(list.size());
    std::unordered_map<std::string, bool> seen_camera;
    for (const auto& e : list) {
        if (e.positive) {
            auto [it, inserted] = seen_camera.try_emplace(e.camera_id, true);
            (void)it;
            if (!inserted) continue;  // later positive of an already-seen camera
        }
        collapsed.push_back(e);
    }
    return average_precision(collapsed);
}

CspResult csp(const JudgedList& list, double epsilon, SuppressionMode mode) {
    if (epsilon <= 0.0)
        throw data_error("csp: epsilon must be positive");

    JudgedList filtered;
    filtered.reserve(list.size());
    std::unordered_map<std::string, std::vector<const JudgedEntry*>> retained;
    size_t suppressed = 0;

    for (const auto& e : list) {
        if (!e.positive) {
            filtered.push_back(e);
            continue;
        }
        bool similar = false;
        auto it = retained.find(e.camera_id);
        if (it != retained.end()) {
            for (const JudgedEntry* r : it->second) {
                if (mode == SuppressionMode::Labels) {
                    if (r->viewpoint == e.viewpoint) { similar = true; break; }
                } else {
                    if (r->viewpoint_feature.size() != e.viewpoint_feature.size())
                        throw data_error("csp: viewpoint feature dimension mismatch");
                    double d = std::sqrt(squared_distance(r->viewpoint_feature,
                                                          e.viewpoint_feature));
                    if (d < epsilon) { similar = true; break; }
                }
            }
        }
        if (similar) {
            ++suppressed;
            continue;
        }
        retained[e.camera_id].push_back(&e);
        filtered.push_back(e);
    }

    CspResult out;
    out.suppressed = suppressed;
    for (const auto& e : filtered)
        if (e.positive) ++out.retained_positives;
    out.value = average_precision(filtered);
    return out;
}

QueryMetrics evaluate_query(const JudgedList& list, const MetricConfig& config) {
    if (list.empty())
        throw data_error("evaluate_query: empty judged list");
    QueryMetrics qm;
    for (size_t k : config.cmc_ranks) qm.cmc.push_back(cmc_at_k(list, k));
    qm.ap = average_precision(list);
    qm.inp = inp(list);
    qm.cgm = cgm(list);
    const CspResult cs = csp(list, config.epsilon, config.suppression);
    qm.csp = cs.value;
    qm.csp_positives = cs.retained_positives;
    qm.suppressed = cs.suppressed;
    for (const auto& e : list)
        if (e.positive) ++qm.positives;
    qm.flagged = (qm.positives == 0) || (qm.csp_positives == 0);
    return qm;
}

EvalReport evaluate(const std::vector<NamedJudgedList>& lists,
                    const MetricConfig& config) {
    if (lists.empty())
        throw data_error("evaluate: no queries");

    EvalReport report;
    report.config = config;
    for (const auto& nl : lists) {
        PerQueryRow row;
        row.query_id = nl.query_id;
        row.target_id = nl.target_id;
        row.metrics = evaluate_query(nl.list, config);
        report.per_query.push_back(std::move(row));
    }

    std::vector<const QueryMetrics*> counted;
    for (const auto& row : report.per_query) {
        if (config.empty_policy == EmptyPositivePolicy::Exclude &&
            row.metrics.positives == 0)
            continue;
        counted.push_back(&row.metrics);
    }
    if (counted.empty())
        throw data_error("evaluate: all queries excluded by empty-positive policy");

    const double inv = 1.0 / static_cast<double>(counted.size());
    auto mean_of = [&](auto&& get) {
        Vec vals;
        vals.reserve(counted.size());
        for (const auto* qm : counted) vals.push_back(get(*qm));
        return sum(vals) * inv;
    };

    for (size_t r = 0; r < config.cmc_ranks.size(); ++r) {
        report.aggregates.emplace_back(
            "rank" + std::to_string(config.cmc_ranks[r]),
            mean_of([&](const QueryMetrics& q) { return q.cmc[r]; }));
    }
    report.aggregates.emplace_back("map", mean_of([](const QueryMetrics& q) { return q.ap; }));
    report.aggregates.emplace_back("minp", mean_of([](const QueryMetrics& q) { return q.inp; }));
    report.aggregates.emplace_back("mcgm", mean_of([](const QueryMetrics& q) { return q.cgm; }));
    report.aggregates.emplace_back("mcsp", mean_of([](const QueryMetrics& q) { return q.csp; }));
    return report;
}

}  // namespace mvq
