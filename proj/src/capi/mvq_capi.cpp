#include "mvq/mvq.h"

#include <cctype>
#include <cstring>
#include <filesystem>
#include <map>
#include <string>

#include "core/error.hpp"
#include "core/experiments.hpp"
#include "core/io.hpp"

using mvq::OrderedJson;

struct mvq_dataset {
    mvq::SynthDataset ds;
};
struct mvq_features {
    std::vector<mvq::FeatureRecord> records;
};
struct mvq_vcc {
    mvq::VccModel model;
};
struct mvq_cvfr {
    mvq::CvfrModel model;
};
struct mvq_report {
    std::string json_text;
    std::string csv_text;
    std::vector<std::pair<std::string, double>> aggregates;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
int wrap(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return MVQ_OK;
    } catch (const mvq::Error& e) {
        g_last_error = e.what();
        return e.exit_code();
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return MVQ_ERR_DATA;
    }
}

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void require(bool ok, const char* what) {
    if (!ok) throw mvq::config_error(std::string("null argument: ") + what);
}

OrderedJson parse_config(const char* config_json, const char* what) {
    if (config_json == nullptr || config_json[0] == '\0')
        return OrderedJson::object();
    OrderedJson j = OrderedJson::parse(config_json, nullptr, false);
    if (j.is_discarded())
        throw mvq::config_error(std::string(what) + ": invalid JSON");
    return j;
}

struct EvalOptions {
    mvq::EvalMode mode = mvq::EvalMode::Multi;
    mvq::MetricConfig metric;
    mvq::InferenceOptions inference;
    size_t threads = 1;
    uint64_t seed = 7;
    size_t max_queries = 5;  // fig10 only
    std::string hash;
};

EvalOptions parse_eval_options(const char* options_json) {
    OrderedJson j = parse_config(options_json, "eval options");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (key != "mode" && key != "junk_filter" && key != "fusion" &&
            key != "allow_partial" && key != "threads" && key != "seed" &&
            key != "metric" && key != "max_queries")
            throw mvq::config_error("eval options: unknown key '" + key + "'");
    }
    EvalOptions o;
    if (j.contains("mode"))
        o.mode = mvq::eval_mode_from_name(j.at("mode").get<std::string>());
    if (j.contains("junk_filter"))
        o.inference.junk_filter = j.at("junk_filter").get<bool>();
    if (j.contains("fusion")) {
        const std::string f = j.at("fusion").get<std::string>();
        if (f == "weighted_sum")
            o.inference.fusion = mvq::FusionRule::WeightedSum;
        else if (f == "weighted_feature")
            o.inference.fusion = mvq::FusionRule::WeightedFeature;
        else
            throw mvq::config_error("eval options: unknown fusion rule '" + f + "'");
    }
    if (j.contains("allow_partial"))
        o.inference.allow_partial = j.at("allow_partial").get<bool>();
    if (j.contains("threads")) o.threads = j.at("threads").get<size_t>();
    if (j.contains("seed")) o.seed = j.at("seed").get<uint64_t>();
    if (j.contains("max_queries")) o.max_queries = j.at("max_queries").get<size_t>();
    if (j.contains("metric"))
        o.metric = mvq::metric_config_from_json(j.at("metric"));
    o.hash = mvq::config_hash(j);
    return o;
}

OrderedJson eval_context(const EvalOptions& o, const char* mode_override = nullptr) {
    OrderedJson ctx;
    ctx["mode"] = mode_override ? mode_override : mvq::eval_mode_name(o.mode);
    ctx["junk_filter"] = o.inference.junk_filter;
    ctx["fusion"] = o.inference.fusion == mvq::FusionRule::WeightedSum
                        ? "weighted_sum"
                        : "weighted_feature";
    ctx["threads"] = o.threads;
    ctx["seed"] = o.seed;
    ctx["options_hash"] = o.hash;
    return ctx;
}

mvq_report* make_report(const mvq::EvalReport& report, const OrderedJson& context) {
    auto* r = new mvq_report;
    r->json_text = mvq::report_to_json_text(report, context);
    r->csv_text = mvq::report_to_csv_text(report);
    r->aggregates = report.aggregates;
    return r;
}

std::string sanitize_label(const std::string& label) {
    std::string out;
    for (char c : label) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            out += c;
        else if (!out.empty() && out.back() != '_')
            out += '_';
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out;
}

}  // namespace

extern "C" {

const char* mvq_version(void) { return "1.0.0"; }

const char* mvq_last_error(void) { return g_last_error.c_str(); }

void mvq_string_free(char* s) { delete[] s; }

int mvq_synth_generate(const char* config_json, mvq_dataset** out) {
    return wrap([&] {
        require(out != nullptr, "out");
        const mvq::SynthConfig config =
            mvq::synth_config_from_json(parse_config(config_json, "synth config"));
        auto* handle = new mvq_dataset{mvq::generate(config)};
        *out = handle;
    });
}

int mvq_dataset_write(const mvq_dataset* ds, const char* out_dir) {
    return wrap([&] {
        require(ds != nullptr, "dataset");
        require(out_dir != nullptr, "out_dir");
        mvq::write_dataset(ds->ds, out_dir);
    });
}

int mvq_dataset_read(const char* dir, mvq_dataset** out) {
    return wrap([&] {
        require(dir != nullptr, "dir");
        require(out != nullptr, "out");
        *out = new mvq_dataset{mvq::read_dataset(dir)};
    });
}

int mvq_dataset_counts(const mvq_dataset* ds, size_t* train, size_t* query,
                       size_t* gallery) {
    return wrap([&] {
        require(ds != nullptr, "dataset");
        if (train) *train = ds->ds.train.size();
        if (query) *query = ds->ds.query.size();
        if (gallery) *gallery = ds->ds.gallery.size();
    });
}

void mvq_dataset_free(mvq_dataset* ds) { delete ds; }

int mvq_vcc_train(const mvq_dataset* ds, const char* config_json, mvq_vcc** out,
                  char** trace_csv) {
    return wrap([&] {
        require(ds != nullptr, "dataset");
        require(out != nullptr, "out");
        const mvq::VccTrainConfig config =
            mvq::vcc_config_from_json(parse_config(config_json, "vcc config"));
        std::vector<mvq::TrainSample> samples;
        samples.reserve(ds->ds.train.size());
        for (const auto& r : ds->ds.train)
            samples.push_back({r.x, r.vehicle_id, r.viewpoint});
        mvq::VccTrainResult result = mvq::train_vcc(samples, config);
        if (trace_csv) *trace_csv = dup_string(mvq::vcc_trace_to_csv(result.trace));
        *out = new mvq_vcc{std::move(result.model)};
    });
}

int mvq_vcc_save(const mvq_vcc* model, const char* path) {
    return wrap([&] {
        require(model != nullptr, "model");
        require(path != nullptr, "path");
        mvq::save_vcc(model->model, path);
    });
}

int mvq_vcc_load(const char* path, mvq_vcc** out) {
    return wrap([&] {
        require(path != nullptr, "path");
        require(out != nullptr, "out");
        *out = new mvq_vcc{mvq::load_vcc(path)};
    });
}

void mvq_vcc_free(mvq_vcc* model) { delete model; }

int mvq_embed_split(const mvq_vcc* model, const mvq_dataset* ds,
                    const char* split, mvq_features** out) {
    return wrap([&] {
        require(model != nullptr, "model");
        require(ds != nullptr, "dataset");
        require(split != nullptr, "split");
        require(out != nullptr, "out");
        const std::string s = split;
        const std::vector<mvq::RawRecord>* records = nullptr;
        if (s == "train") records = &ds->ds.train;
        else if (s == "query") records = &ds->ds.query;
        else if (s == "gallery") records = &ds->ds.gallery;
        else throw mvq::config_error("unknown split '" + s + "'");
        *out = new mvq_features{mvq::embed_records(model->model, *records)};
    });
}

int mvq_features_write_jsonl(const mvq_features* f, const char* path) {
    return wrap([&] {
        require(f != nullptr, "features");
        require(path != nullptr, "path");
        mvq::write_text_file(path, mvq::feature_records_to_jsonl(f->records));
    });
}

int mvq_features_write_binary(const mvq_features* f, const char* path) {
    return wrap([&] {
        require(f != nullptr, "features");
        require(path != nullptr, "path");
        mvq::write_text_file(path, mvq::feature_records_to_binary(f->records));
    });
}

int mvq_features_read(const char* path, mvq_features** out) {
    return wrap([&] {
        require(path != nullptr, "path");
        require(out != nullptr, "out");
        const std::string bytes = mvq::read_text_file(path);
        if (bytes.rfind("MURF1", 0) == 0)
            *out = new mvq_features{mvq::feature_records_from_binary(bytes)};
        else
            *out = new mvq_features{mvq::feature_records_from_jsonl(bytes)};
    });
}

int mvq_features_count(const mvq_features* f, size_t* count) {
    return wrap([&] {
        require(f != nullptr, "features");
        require(count != nullptr, "count");
        *count = f->records.size();
    });
}

void mvq_features_free(mvq_features* f) { delete f; }

int mvq_cvfr_train(const mvq_vcc* vcc, const mvq_dataset* ds,
                   const char* config_json, mvq_cvfr** out, char** trace_csv) {
    return wrap([&] {
        require(vcc != nullptr, "vcc");
        require(ds != nullptr, "dataset");
        require(out != nullptr, "out");
        const mvq::CvfrTrainConfig config =
            mvq::cvfr_config_from_json(parse_config(config_json, "cvfr config"));
        const auto train_features = mvq::embed_records(vcc->model, ds->ds.train);
        const auto triples = mvq::aligned_triples(
            train_features, config.rounds_per_identity, config.seed);
        mvq::CvfrTrainResult result = mvq::train_cvfr(triples, config);
        result.model.viewpoint_centroids = mvq::viewpoint_centroids(train_features);
        if (trace_csv) *trace_csv = dup_string(mvq::cvfr_trace_to_csv(result.trace));
        *out = new mvq_cvfr{std::move(result.model)};
    });
}

int mvq_cvfr_save(const mvq_cvfr* model, const char* path) {
    return wrap([&] {
        require(model != nullptr, "model");
        require(path != nullptr, "path");
        mvq::save_cvfr(model->model, path);
    });
}

int mvq_cvfr_load(const char* path, mvq_cvfr** out) {
    return wrap([&] {
        require(path != nullptr, "path");
        require(out != nullptr, "out");
        *out = new mvq_cvfr{mvq::load_cvfr(path)};
    });
}

void mvq_cvfr_free(mvq_cvfr* model) { delete model; }

int mvq_cvfr_recover(const mvq_cvfr* model, const char* const* available_viewpoints,
                     const double* const* available_features,
                     size_t available_count, size_t feature_dim,
                     const char* missing_viewpoint, double* out_feature) {
    return wrap([&] {
        require(model != nullptr, "model");
        require(available_viewpoints != nullptr, "available_viewpoints");
        require(available_features != nullptr, "available_features");
        require(missing_viewpoint != nullptr, "missing_viewpoint");
        require(out_feature != nullptr, "out_feature");
        std::map<mvq::Viewpoint, mvq::Vec> available;
        for (size_t i = 0; i < available_count; ++i) {
            mvq::Vec f(available_features[i], available_features[i] + feature_dim);
            available[mvq::viewpoint_from_name(available_viewpoints[i])] = std::move(f);
        }
        const mvq::Vec recovered = mvq::recover(
            model->model, available, mvq::viewpoint_from_name(missing_viewpoint));
        if (recovered.size() != feature_dim)
            throw mvq::data_error("recover: feature_dim does not match the model");
        std::memcpy(out_feature, recovered.data(), feature_dim * sizeof(double));
    });
}

int mvq_eval(const mvq_features* queries, const mvq_features* gallery,
             const mvq_cvfr* cvfr, const char* options_json, mvq_report** out) {
    return wrap([&] {
        require(queries != nullptr, "queries");
        require(gallery != nullptr, "gallery");
        require(out != nullptr, "out");
        const EvalOptions o = parse_eval_options(options_json);
        const auto query_sets = mvq::build_query_sets(queries->records, o.seed);
        mvq::EvalJob job;
        job.mode = o.mode;
        job.metric = o.metric;
        job.options = o.inference;
        job.cvfr = cvfr ? &cvfr->model : nullptr;
        job.threads = o.threads;
        const mvq::EvalReport report =
            mvq::run_eval(query_sets, gallery->records, job);
        *out = make_report(report, eval_context(o));
    });
}

int mvq_report_json(const mvq_report* r, char** out_text) {
    return wrap([&] {
        require(r != nullptr, "report");
        require(out_text != nullptr, "out_text");
        *out_text = dup_string(r->json_text);
    });
}

int mvq_report_csv(const mvq_report* r, char** out_text) {
    return wrap([&] {
        require(r != nullptr, "report");
        require(out_text != nullptr, "out_text");
        *out_text = dup_string(r->csv_text);
    });
}

int mvq_report_aggregate(const mvq_report* r, const char* name, double* out_value) {
    return wrap([&] {
        require(r != nullptr, "report");
        require(name != nullptr, "name");
        require(out_value != nullptr, "out_value");
        for (const auto& [key, value] : r->aggregates) {
            if (key == name) {
                *out_value = value;
                return;
            }
        }
        throw mvq::data_error(std::string("unknown aggregate '") + name + "'");
    });
}

void mvq_report_free(mvq_report* r) { delete r; }

int mvq_experiment(const char* name, const char* data_dir, const char* vcc_path,
                   const char* cvfr_path, const char* options_json,
                   const char* out_dir) {
    return wrap([&] {
        require(name != nullptr, "name");
        require(data_dir != nullptr, "data_dir");
        require(vcc_path != nullptr, "vcc_path");
        require(out_dir != nullptr, "out_dir");
        const std::string experiment = name;
        const EvalOptions o = parse_eval_options(options_json);
        const mvq::SynthDataset ds = mvq::read_dataset(data_dir);
        const mvq::VccModel vcc = mvq::load_vcc(vcc_path);

        mvq::ExperimentResult result;
        if (experiment == "fig8") {
            result = mvq::experiment_fig8(ds, vcc, o.metric, o.inference, o.seed);
        } else if (experiment == "table5") {
            if (cvfr_path == nullptr)
                throw mvq::model_error("experiment table5 requires a cvfr model");
            const mvq::CvfrModel cvfr = mvq::load_cvfr(cvfr_path);
            result = mvq::experiment_table5(ds, vcc, cvfr, o.metric, o.inference, o.seed);
        } else if (experiment == "fig10") {
            result = mvq::experiment_fig10(ds, vcc, o.metric, o.inference, o.seed,
                                           o.max_queries);
        } else {
            throw mvq::config_error("unknown experiment '" + experiment + "'");
        }

        std::filesystem::create_directories(out_dir);
        const std::string dir = out_dir;
        mvq::write_text_file(dir + "/summary.csv", result.summary_csv);
        for (const auto& setting : result.settings) {
            OrderedJson ctx = eval_context(o, "multi");
            ctx["experiment"] = experiment;
            ctx["setting"] = setting.label;
            mvq::write_text_file(
                dir + "/report_" + sanitize_label(setting.label) + ".json",
                mvq::report_to_json_text(setting.report, ctx));
        }
    });
}

}  // extern "C"
