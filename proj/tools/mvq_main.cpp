// Command-line shell over the mvq shared library.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mvq/mvq.h"

namespace {

using Json = nlohmann::ordered_json;

int fail(int status) {
    std::cerr << "error: " << mvq_last_error() << "\n";
    return status == 0 ? 3 : status;
}

#define TRY(call)                     \
    do {                              \
        const int status__ = (call);  \
        if (status__ != MVQ_OK) return fail(status__); \
    } while (0)

std::optional<std::string> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) return false;
    out << content;
    return static_cast<bool>(out);
}

// Load a JSON config file and apply command-line overrides.
int load_config(const std::string& path, const std::optional<uint64_t>& seed,
                Json& out) {
    out = Json::object();
    if (!path.empty()) {
        auto text = read_file(path);
        if (!text) {
            std::cerr << "error: cannot open config file: " << path << "\n";
            return 3;
        }
        out = Json::parse(*text, nullptr, false);
        if (out.is_discarded()) {
            std::cerr << "error: invalid JSON in config file: " << path << "\n";
            return 2;
        }
    }
    if (seed) out["seed"] = *seed;
    return 0;
}

struct EvalFlags {
    std::string mode = "multi";
    std::string metric_config_path;
    double metric_epsilon = -1.0;
    bool no_junk_filter = false;
    std::string fusion = "weighted_sum";
    bool allow_partial = false;
    size_t threads = 1;
    std::optional<uint64_t> seed;
    size_t max_queries = 5;
};

int build_eval_options(const EvalFlags& flags, Json& out) {
    out = Json::object();
    out["mode"] = flags.mode;
    out["junk_filter"] = !flags.no_junk_filter;
    out["fusion"] = flags.fusion;
    if (flags.allow_partial) out["allow_partial"] = true;
    out["threads"] = flags.threads;
    if (flags.seed) out["seed"] = *flags.seed;
    out["max_queries"] = flags.max_queries;
    Json metric = Json::object();
    if (!flags.metric_config_path.empty()) {
        auto text = read_file(flags.metric_config_path);
        if (!text) {
            std::cerr << "error: cannot open metric config: "
                      << flags.metric_config_path << "\n";
            return 3;
        }
        metric = Json::parse(*text, nullptr, false);
        if (metric.is_discarded()) {
            std::cerr << "error: invalid JSON in metric config\n";
            return 2;
        }
    }
    if (flags.metric_epsilon > 0.0) metric["epsilon"] = flags.metric_epsilon;
    if (!metric.empty()) out["metric"] = metric;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-query vehicle re-identification toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", mvq_version());

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark dataset");
    std::string synth_config, synth_out;
    std::optional<uint64_t> synth_seed;
    synth->add_option("--config", synth_config, "synth config JSON file");
    synth->add_option("--seed", synth_seed, "seed override");
    synth->add_option("--out", synth_out, "output directory")->required();

    // ---- train ----
    auto* train = app.add_subcommand("train", "train a model (vcc or cvfr)");
    std::string train_kind, train_data, train_config_path, train_out_model,
        train_out_trace, train_vcc_path;
    std::optional<uint64_t> train_seed;
    train->add_option("kind", train_kind, "vcc | cvfr")->required();
    train->add_option("--data", train_data, "dataset directory")->required();
    train->add_option("--config", train_config_path, "training config JSON file");
    train->add_option("--seed", train_seed, "seed override");
    train->add_option("--vcc", train_vcc_path, "trained vcc model (cvfr only)");
    train->add_option("--out-model", train_out_model, "output model path")->required();
    train->add_option("--out-trace", train_out_trace, "loss trace CSV path");

    // ---- embed ----
    auto* embed = app.add_subcommand("embed", "embed a dataset split into features");
    std::string embed_data, embed_split = "gallery", embed_vcc, embed_out;
    bool embed_binary = false;
    embed->add_option("--data", embed_data, "dataset directory")->required();
    embed->add_option("--split", embed_split, "train | query | gallery");
    embed->add_option("--vcc", embed_vcc, "trained vcc model")->required();
    embed->add_option("--out", embed_out, "output feature file")->required();
    embed->add_flag("--binary", embed_binary, "write the packed binary cache");

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "rank a gallery and evaluate metrics");
    std::string eval_query, eval_gallery, eval_cvfr, eval_report, eval_csv;
    EvalFlags eval_flags;
    eval->add_option("--mode", eval_flags.mode, "single | average | multi");
    eval->add_option("--query", eval_query, "query feature file")->required();
    eval->add_option("--gallery", eval_gallery, "gallery feature file")->required();
    eval->add_option("--cvfr", eval_cvfr, "recovery model for missing viewpoints");
    eval->add_option("--metric-config", eval_flags.metric_config_path, "metric config JSON");
    eval->add_option("--metric-epsilon", eval_flags.metric_epsilon,
                     "viewpoint similarity threshold");
    eval->add_flag("--no-junk-filter", eval_flags.no_junk_filter,
                   "keep same-vehicle same-camera gallery records");
    eval->add_option("--fusion", eval_flags.fusion, "weighted_sum | weighted_feature");
    eval->add_flag("--allow-partial", eval_flags.allow_partial,
                   "multi mode with fewer than 3 viewpoints and no recovery model");
    eval->add_option("--threads", eval_flags.threads, "worker threads");
    eval->add_option("--seed", eval_flags.seed, "query-set sampling seed");
    eval->add_option("--out-report", eval_report, "report JSON path")->required();
    eval->add_option("--out-csv", eval_csv, "per-query CSV path");

    // ---- experiment ----
    auto* experiment = app.add_subcommand("experiment", "run a benchmark experiment");
    std::string exp_name, exp_data, exp_vcc, exp_cvfr, exp_out;
    EvalFlags exp_flags;
    experiment->add_option("name", exp_name, "fig8 | table5 | fig10")->required();
    experiment->add_option("--data", exp_data, "dataset directory")->required();
    experiment->add_option("--vcc", exp_vcc, "trained vcc model")->required();
    experiment->add_option("--cvfr", exp_cvfr, "trained cvfr model (table5)");
    experiment->add_option("--metric-config", exp_flags.metric_config_path, "metric config JSON");
    experiment->add_option("--metric-epsilon", exp_flags.metric_epsilon,
                           "viewpoint similarity threshold");
    experiment->add_flag("--no-junk-filter", exp_flags.no_junk_filter,
                         "keep same-vehicle same-camera gallery records");
    experiment->add_option("--fusion", exp_flags.fusion, "weighted_sum | weighted_feature");
    experiment->add_option("--threads", exp_flags.threads, "worker threads");
    experiment->add_option("--seed", exp_flags.seed, "experiment seed");
    experiment->add_option("--max-queries", exp_flags.max_queries,
                           "largest query count for fig10");
    experiment->add_option("--out", exp_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (synth->parsed()) {
        Json config;
        if (int rc = load_config(synth_config, synth_seed, config)) return rc;
        mvq_dataset* ds = nullptr;
        TRY(mvq_synth_generate(config.dump().c_str(), &ds));
        const int rc = mvq_dataset_write(ds, synth_out.c_str());
        mvq_dataset_free(ds);
        if (rc != MVQ_OK) return fail(rc);
        std::cout << "dataset written to " << synth_out << "\n";
        return 0;
    }

    if (train->parsed()) {
        Json config;
        if (int rc = load_config(train_config_path, train_seed, config)) return rc;
        mvq_dataset* ds = nullptr;
        TRY(mvq_dataset_read(train_data.c_str(), &ds));

        char* trace = nullptr;
        int rc = MVQ_OK;
        if (train_kind == "vcc") {
            mvq_vcc* model = nullptr;
            rc = mvq_vcc_train(ds, config.dump().c_str(), &model, &trace);
            if (rc == MVQ_OK) rc = mvq_vcc_save(model, train_out_model.c_str());
            mvq_vcc_free(model);
        } else if (train_kind == "cvfr") {
            if (train_vcc_path.empty()) {
                std::cerr << "error: train cvfr requires --vcc\n";
                mvq_dataset_free(ds);
                return 2;
            }
            mvq_vcc* vcc = nullptr;
            rc = mvq_vcc_load(train_vcc_path.c_str(), &vcc);
            if (rc == MVQ_OK) {
                mvq_cvfr* model = nullptr;
                rc = mvq_cvfr_train(vcc, ds, config.dump().c_str(), &model, &trace);
                if (rc == MVQ_OK) rc = mvq_cvfr_save(model, train_out_model.c_str());
                mvq_cvfr_free(model);
            }
            mvq_vcc_free(vcc);
        } else {
            std::cerr << "error: unknown model kind '" << train_kind << "'\n";
            mvq_dataset_free(ds);
            return 2;
        }
        mvq_dataset_free(ds);
        if (rc != MVQ_OK) {
            mvq_string_free(trace);
            return fail(rc);
        }
        const std::string trace_path = train_out_trace.empty()
                                           ? train_out_model + ".trace.csv"
                                           : train_out_trace;
        const bool ok = write_file(trace_path, trace ? trace : "");
        mvq_string_free(trace);
        if (!ok) {
            std::cerr << "error: cannot write loss trace: " << trace_path << "\n";
            return 3;
        }
        std::cout << "model written to " << train_out_model << "\n";
        return 0;
    }

    if (embed->parsed()) {
        mvq_dataset* ds = nullptr;
        TRY(mvq_dataset_read(embed_data.c_str(), &ds));
        mvq_vcc* vcc = nullptr;
        int rc = mvq_vcc_load(embed_vcc.c_str(), &vcc);
        mvq_features* features = nullptr;
        if (rc == MVQ_OK)
            rc = mvq_embed_split(vcc, ds, embed_split.c_str(), &features);
        if (rc == MVQ_OK)
            rc = embed_binary ? mvq_features_write_binary(features, embed_out.c_str())
                              : mvq_features_write_jsonl(features, embed_out.c_str());
        mvq_features_free(features);
        mvq_vcc_free(vcc);
        mvq_dataset_free(ds);
        if (rc != MVQ_OK) return fail(rc);
        std::cout << "features written to " << embed_out << "\n";
        return 0;
    }

    if (eval->parsed()) {
        Json options;
        if (int rc = build_eval_options(eval_flags, options)) return rc;
        mvq_features* queries = nullptr;
        mvq_features* gallery = nullptr;
        mvq_cvfr* cvfr = nullptr;
        TRY(mvq_features_read(eval_query.c_str(), &queries));
        int rc = mvq_features_read(eval_gallery.c_str(), &gallery);
        if (rc == MVQ_OK && !eval_cvfr.empty())
            rc = mvq_cvfr_load(eval_cvfr.c_str(), &cvfr);
        mvq_report* report = nullptr;
        if (rc == MVQ_OK)
            rc = mvq_eval(queries, gallery, cvfr, options.dump().c_str(), &report);
        std::string json_text, csv_text;
        if (rc == MVQ_OK) {
            char* text = nullptr;
            rc = mvq_report_json(report, &text);
            if (rc == MVQ_OK) json_text = text;
            mvq_string_free(text);
        }
        if (rc == MVQ_OK && !eval_csv.empty()) {
            char* text = nullptr;
            rc = mvq_report_csv(report, &text);
            if (rc == MVQ_OK) csv_text = text;
            mvq_string_free(text);
        }
        mvq_report_free(report);
        mvq_cvfr_free(cvfr);
        mvq_features_free(gallery);
        mvq_features_free(queries);
        if (rc != MVQ_OK) return fail(rc);
        if (!write_file(eval_report, json_text)) {
            std::cerr << "error: cannot write report: " << eval_report << "\n";
            return 3;
        }
        if (!eval_csv.empty() && !write_file(eval_csv, csv_text)) {
            std::cerr << "error: cannot write CSV: " << eval_csv << "\n";
            return 3;
        }
        std::cout << "report written to " << eval_report << "\n";
        return 0;
    }

    if (experiment->parsed()) {
        exp_flags.mode = "multi";
        Json options;
        if (int rc = build_eval_options(exp_flags, options)) return rc;
        TRY(mvq_experiment(exp_name.c_str(), exp_data.c_str(), exp_vcc.c_str(),
                           exp_cvfr.empty() ? nullptr : exp_cvfr.c_str(),
                           options.dump().c_str(), exp_out.c_str()));
        std::cout << "experiment results written to " << exp_out << "\n";
        return 0;
    }

    return 2;
}
