#include "core/experiments.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <thread>

#include "core/error.hpp"

namespace mvq {

std::vector<FeatureRecord> embed_records(const VccModel& model,
                                         const std::vector<RawRecord>& records) {
    std::vector<FeatureRecord> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        Embedding e = embed(model, r.x);
        FeatureRecord f;
        f.record_id = r.record_id;
        f.vehicle_id = r.vehicle_id;
        f.camera_id = r.camera_id;
        f.viewpoint = r.viewpoint;
        f.appearance = std::move(e.appearance);
        f.viewpoint_feature = std::move(e.viewpoint_feature);
        out.push_back(std::move(f));
    }
    return out;
}

std::array<Vec, 3> viewpoint_centroids(const std::vector<FeatureRecord>& records) {
    if (records.empty())
        throw data_error("viewpoint_centroids: no records");
    const size_t dv = records[0].viewpoint_feature.size();
    std::array<Vec, 3> acc{Vec(dv, 0.0), Vec(dv, 0.0), Vec(dv, 0.0)};
    std::array<size_t, 3> count{0, 0, 0};
    for (const auto& r : records) {
        axpy(acc[static_cast<size_t>(r.viewpoint)], 1.0, r.viewpoint_feature);
        ++count[static_cast<size_t>(r.viewpoint)];
    }
    for (size_t v = 0; v < 3; ++v) {
        if (count[v] == 0)
            throw data_error("viewpoint_centroids: viewpoint class missing from records");
        for (auto& x : acc[v]) x /= static_cast<double>(count[v]);
        acc[v] = l2_normalize(acc[v]);
    }
    return acc;
}

std::vector<AlignedTriple> aligned_triples(const std::vector<FeatureRecord>& records,
                                           size_t rounds_per_identity,
                                           uint64_t seed) {
    SeededRng rng(seed);
    std::map<std::string, std::array<std::vector<const FeatureRecord*>, 3>> pool;
    for (const auto& r : records)
        pool[r.vehicle_id][static_cast<size_t>(r.viewpoint)].push_back(&r);

    std::vector<AlignedTriple> out;
    for (auto& [vid, views] : pool) {
        size_t depth = SIZE_MAX;
        for (size_t v = 0; v < 3; ++v) {
            if (views[v].empty())
                throw data_error("aligned_triples: identity '" + vid +
                                 "' is missing a viewpoint");
            rng.shuffle(views[v]);
            depth = std::min(depth, views[v].size());
        }
        depth = std::min(depth, rounds_per_identity);
        for (size_t d = 0; d < depth; ++d) {
            AlignedTriple t;
            for (size_t v = 0; v < 3; ++v) t.features[v] = views[v][d]->appearance;
            out.push_back(std::move(t));
        }
    }
    return out;
}

EvalMode eval_mode_from_name(const std::string& name) {
    if (name == "single") return EvalMode::Single;
    if (name == "average") return EvalMode::Average;
    if (name == "multi") return EvalMode::Multi;
    throw config_error("unknown inference mode: " + name);
}

const char* eval_mode_name(EvalMode mode) {
    switch (mode) {
        case EvalMode::Single:  return "single";
        case EvalMode::Average: return "average";
        case EvalMode::Multi:   return "multi";
    }
    return "multi";
}

namespace {

void parallel_for(size_t n, size_t threads, const std::function<void(size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const size_t workers = std::min(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

JudgedList judge(const RankedList& ranked, const std::vector<FeatureRecord>& gallery,
                 const std::string& target_id) {
    JudgedList list;
    list.reserve(ranked.indices.size());
    for (size_t idx : ranked.indices) {
        const FeatureRecord& g = gallery[idx];
        JudgedEntry e;
        e.positive = (g.vehicle_id == target_id);
        e.camera_id = g.camera_id;
        e.viewpoint = g.viewpoint;
        e.viewpoint_feature = g.viewpoint_feature;
        list.push_back(std::move(e));
    }
    return list;
}

}  // namespace

EvalReport run_eval(const std::vector<QuerySet>& query_sets,
                    const std::vector<FeatureRecord>& gallery,
                    const EvalJob& job) {
    if (query_sets.empty())
        throw data_error("run_eval: no query sets");
    if (gallery.empty())
        throw data_error("run_eval: empty gallery");

    struct Unit {
        const QuerySet* set;
        const FeatureRecord* record;  // single mode only
    };
    std::vector<Unit> units;
    for (const auto& qs : query_sets) {
        validate_query_set(qs, job.mode == EvalMode::Multi);
        if (job.mode == EvalMode::Single) {
            for (const auto& r : qs.records) units.push_back({&qs, &r});
        } else {
            units.push_back({&qs, nullptr});
        }
    }

    std::vector<NamedJudgedList> judged(units.size());
    parallel_for(units.size(), job.threads, [&](size_t i) {
        const Unit& u = units[i];
        RankedList ranked;
        if (job.mode == EvalMode::Single) {
            QuerySet lone;
            lone.target_id = u.set->target_id;
            lone.records.push_back(*u.record);
            const auto admitted = admit_gallery(lone, gallery, job.options.junk_filter);
            ranked = score_single(*u.record, gallery, admitted);
            judged[i].query_id = u.record->record_id;
        } else {
            const auto admitted = admit_gallery(*u.set, gallery, job.options.junk_filter);
            if (job.mode == EvalMode::Average)
                ranked = score_average(*u.set, gallery, admitted);
            else
                ranked = score_multi(*u.set, gallery, admitted, job.cvfr, job.options);
            judged[i].query_id = u.set->target_id;
        }
        judged[i].target_id = u.set->target_id;
        judged[i].list = judge(ranked, gallery, u.set->target_id);
    });
    return evaluate(judged, job.metric);
}

EvalReport run_eval_fused(const std::vector<std::string>& targets,
                          const std::vector<std::vector<FeatureRecord>>& per_set_queries,
                          const std::vector<FeatureRecord>& gallery,
                          const MetricConfig& metric,
                          const InferenceOptions& options,
                          size_t threads) {
    if (targets.size() != per_set_queries.size())
        throw data_error("run_eval_fused: targets/queries size mismatch");
    std::vector<NamedJudgedList> judged(targets.size());
    parallel_for(targets.size(), threads, [&](size_t i) {
        QuerySet pseudo;
        pseudo.target_id = targets[i];
        pseudo.records = per_set_queries[i];
        // admission uses (vehicle, camera) pairs only; duplicates are fine
        const auto admitted = admit_gallery(pseudo, gallery, options.junk_filter);
        RankedList ranked = score_fused(per_set_queries[i], gallery, admitted,
                                        options.fusion);
        judged[i].query_id = targets[i];
        judged[i].target_id = targets[i];
        judged[i].list = judge(ranked, gallery, targets[i]);
    });
    return evaluate(judged, metric);
}

namespace {

std::string summary_header(const MetricConfig& metric) {
    std::string out = "setting";
    for (size_t k : metric.cmc_ranks) out += ",rank" + std::to_string(k);
    out += ",map,minp,mcgm,mcsp\n";
    return out;
}

std::string summary_row(const std::string& label, const EvalReport& report) {
    std::string out = label;
    for (const auto& [name, value] : report.aggregates) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.12g", value);
        out += ",";
        out += buf;
    }
    out += "\n";
    return out;
}

}  // namespace

ExperimentResult experiment_fig8(const SynthDataset& ds, const VccModel& vcc,
                                 const MetricConfig& metric,
                                 const InferenceOptions& options, uint64_t seed) {
    const auto query_features = embed_records(vcc, ds.query);
    const auto query_sets = build_query_sets(query_features, seed);

    ExperimentResult result;
    result.summary_csv = summary_header(metric);
    for (size_t add_k : {size_t{0}, size_t{5}, size_t{10}}) {
        // one seed for every setting: the add-10 modification extends the
        // add-5 one (same duplicate sources, nested deletion sets)
        const auto modified = modify_gallery(ds.gallery, add_k, seed);
        const auto gallery_features = embed_records(vcc, modified);
        EvalJob job;
        job.mode = EvalMode::Multi;
        job.metric = metric;
        job.options = options;
        EvalReport report = run_eval(query_sets, gallery_features, job);
        const std::string label = "add" + std::to_string(add_k);
        result.summary_csv += summary_row(label, report);
        result.settings.push_back({label, std::move(report)});
    }
    return result;
}

ExperimentResult experiment_table5(const SynthDataset& ds, const VccModel& vcc,
                                   const CvfrModel& cvfr,
                                   const MetricConfig& metric,
                                   const InferenceOptions& options, uint64_t seed) {
    const auto query_features = embed_records(vcc, ds.query);
    const auto gallery_features = embed_records(vcc, ds.gallery);
    const auto full_sets = build_query_sets(query_features, seed);

    // drop one random viewpoint per set
    SeededRng rng(seed ^ 0x7ab1e5ULL);
    std::vector<QuerySet> reduced;
    for (const auto& qs : full_sets) {
        const size_t drop = rng.uniform_int(qs.records.size());
        QuerySet r;
        r.target_id = qs.target_id;
        for (size_t i = 0; i < qs.records.size(); ++i) {
            if (i == drop)
                r.missing.push_back(qs.records[i].viewpoint);
            else
                r.records.push_back(qs.records[i]);
        }
        reduced.push_back(std::move(r));
    }

    // recovery-completed sets for rows (c) and (e)
    std::vector<QuerySet> completed;
    for (const auto& qs : reduced) {
        QuerySet c = qs;
        std::map<Viewpoint, Vec> available;
        for (const auto& r : c.records) available[r.viewpoint] = r.appearance;
        for (Viewpoint mv : qs.missing) {
            FeatureRecord rec;
            rec.record_id = qs.target_id + ":recovered:" + viewpoint_name(mv);
            rec.vehicle_id = qs.target_id;
            rec.camera_id = "";
            rec.viewpoint = mv;
            rec.appearance = recover(cvfr, available, mv);
            rec.viewpoint_feature = cvfr.viewpoint_centroids[static_cast<size_t>(mv)];
            c.records.push_back(std::move(rec));
        }
        c.missing.clear();
        std::sort(c.records.begin(), c.records.end(),
                  [](const FeatureRecord& a, const FeatureRecord& b) {
                      return static_cast<int>(a.viewpoint) < static_cast<int>(b.viewpoint);
                  });
        completed.push_back(std::move(c));
    }

    // row (a): one available record per set
    std::vector<QuerySet> singles;
    for (const auto& qs : reduced) {
        QuerySet s;
        s.target_id = qs.target_id;
        s.records.push_back(qs.records.front());
        singles.push_back(std::move(s));
    }

    ExperimentResult result;
    result.summary_csv = summary_header(metric);
    auto add_setting = [&](const std::string& label, EvalReport report) {
        result.summary_csv += summary_row(label, report);
        result.settings.push_back({label, std::move(report)});
    };

    EvalJob job;
    job.metric = metric;
    job.options = options;

    job.mode = EvalMode::Average;  // single-record sets rank like score_single
    add_setting("(a) single", run_eval(singles, gallery_features, job));

    job.mode = EvalMode::Average;
    add_setting("(b) average", run_eval(reduced, gallery_features, job));

    add_setting("(c) cvfr+average", run_eval(completed, gallery_features, job));

    job.mode = EvalMode::Multi;
    job.options.allow_partial = true;
    add_setting("(d) multi-2views", run_eval(reduced, gallery_features, job));

    job.options.allow_partial = false;
    job.cvfr = &cvfr;
    add_setting("(e) cvfr+multi", run_eval(reduced, gallery_features, job));
    return result;
}

ExperimentResult experiment_fig10(const SynthDataset& ds, const VccModel& vcc,
                                  const MetricConfig& metric,
                                  const InferenceOptions& options, uint64_t seed,
                                  size_t max_queries) {
    if (max_queries < 1)
        throw config_error("experiment_fig10: max_queries must be >= 1");
    const auto query_features = embed_records(vcc, ds.query);
    const auto gallery_features = embed_records(vcc, ds.gallery);
    const auto full_sets = build_query_sets(query_features, seed);

    std::map<std::string, std::vector<const FeatureRecord*>> pool;
    for (const auto& r : query_features) pool[r.vehicle_id].push_back(&r);

    SeededRng rng(seed ^ 0xf16a10ULL);
    std::vector<std::string> targets;
    std::vector<std::vector<FeatureRecord>> chosen(full_sets.size());
    for (const auto& qs : full_sets) targets.push_back(qs.target_id);

    // the distinct-viewpoint order per set is a fixed random permutation; the
    // k-th row uses the first k entries, so rows grow monotonically
    std::vector<std::vector<FeatureRecord>> order(full_sets.size());
    for (size_t s = 0; s < full_sets.size(); ++s) {
        std::vector<FeatureRecord> recs = full_sets[s].records;
        rng.shuffle(recs);
        order[s] = std::move(recs);
    }

    ExperimentResult result;
    result.summary_csv = summary_header(metric);
    for (size_t k = 1; k <= max_queries; ++k) {
        for (size_t s = 0; s < full_sets.size(); ++s) {
            if (k <= 3) {
                chosen[s] = std::vector<FeatureRecord>(order[s].begin(),
                                                       order[s].begin() + static_cast<long>(k));
            } else {
                // reuse viewpoints: draw one more record from the pool
                const auto& candidates = pool.at(targets[s]);
                chosen[s].push_back(*candidates[rng.uniform_int(candidates.size())]);
            }
        }
        EvalReport report = run_eval_fused(targets, chosen, gallery_features,
                                           metric, options, 1);
        const std::string label =
            k <= 3 ? std::to_string(k) : "3+repeat(" + std::to_string(k) + ")";
        result.summary_csv += summary_row(label, report);
        result.settings.push_back({label, std::move(report)});
    }
    return result;
}

}  // namespace mvq
