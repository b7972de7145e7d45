#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "core/cvfr.hpp"
#include "core/metrics.hpp"
#include "core/records.hpp"
#include "core/synth.hpp"
#include "core/vcc.hpp"

namespace mvq {

using OrderedJson = nlohmann::ordered_json;

// ---- plain files ----
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// ---- JSONL record files ----
// Fixed key order and canonical float32 formatting: loading then
// re-serializing a file reproduces it byte for byte.
std::string raw_records_to_jsonl(const std::vector<RawRecord>& records);
std::vector<RawRecord> raw_records_from_jsonl(const std::string& text);

std::string feature_records_to_jsonl(const std::vector<FeatureRecord>& records);
std::vector<FeatureRecord> feature_records_from_jsonl(const std::string& text);

// Returns true when the file's lines carry embedded features rather than
// raw generator vectors.
bool jsonl_is_feature_file(const std::string& text);

// ---- packed binary cache ("MURF1", little-endian f32) ----
std::string feature_records_to_binary(const std::vector<FeatureRecord>& records);
std::vector<FeatureRecord> feature_records_from_binary(const std::string& bytes);

// ---- model documents ----
OrderedJson mlp_to_json(const MlpModel& model);
MlpModel mlp_from_json(const OrderedJson& j);

OrderedJson vcc_to_json(const VccModel& model);
VccModel vcc_from_json(const OrderedJson& j);

OrderedJson cvfr_to_json(const CvfrModel& model);
CvfrModel cvfr_from_json(const OrderedJson& j);

void save_vcc(const VccModel& model, const std::string& path);
VccModel load_vcc(const std::string& path);
void save_cvfr(const CvfrModel& model, const std::string& path);
CvfrModel load_cvfr(const std::string& path);

// ---- configs ----
// All keys optional (defaults apply); unknown keys are rejected.
SynthConfig synth_config_from_json(const OrderedJson& j);
VccTrainConfig vcc_config_from_json(const OrderedJson& j);
CvfrTrainConfig cvfr_config_from_json(const OrderedJson& j);
MetricConfig metric_config_from_json(const OrderedJson& j);

OrderedJson synth_config_to_json(const SynthConfig& config);
OrderedJson metric_config_to_json(const MetricConfig& config);

OrderedJson parse_json(const std::string& text, const std::string& what);

// FNV-1a over the canonical dump, rendered as fixed-width hex.
std::string config_hash(const OrderedJson& j);

// ---- dataset directory ----
struct DatasetPaths {
    std::string train, query, gallery, ground_truth, manifest;
};
DatasetPaths dataset_paths(const std::string& dir);
void write_dataset(const SynthDataset& ds, const std::string& dir);
SynthDataset read_dataset(const std::string& dir);

// ---- reports ----
std::string report_to_json_text(const EvalReport& report,
                                const OrderedJson& context);
std::string report_to_csv_text(const EvalReport& report);

std::string vcc_trace_to_csv(const std::vector<EpochLoss>& trace);
std::string cvfr_trace_to_csv(const std::vector<double>& trace);

}  // namespace mvq
