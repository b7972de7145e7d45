#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/records.hpp"
#include "core/rng.hpp"

namespace mvq {

struct IlluminationLevel {
    std::string name;
    double magnitude = 0.0;
};

struct SynthConfig {
    size_t num_identities = 50;
    size_t num_cameras = 200;
    size_t cameras_min = 30;
    size_t cameras_max = 50;
    size_t records_per_camera_min = 1;
    size_t records_per_camera_max = 2;
    size_t input_dim = 96;
    double appearance_noise = 0.04;    // i.i.d. per coordinate
    double camera_style_noise = 0.10;  // magnitude of the per-camera style vector
    std::vector<IlluminationLevel> illumination{
        {"morning", 0.08}, {"afternoon", 0.05}, {"night", 0.15}};
    double viewpoint_offset_magnitude = 0.6;
    // How far each identity's viewpoint offsets rotate away from the shared
    // class directions (0 = identical across identities).
    double viewpoint_identity_rotation = 0.25;
    // Identity bases are drawn around a small set of cluster directions:
    // same-cluster identities are confusable the way same-model vehicles are.
    size_t identity_clusters = 10;
    double identity_cluster_spread = 0.5;  // 0 = independent identities
    double train_fraction = 0.4;
    double query_fraction = 0.12;
    double gallery_fraction = 0.48;
    uint64_t seed = 7;
};

void validate(const SynthConfig& config);

struct GroundTruth {
    std::map<std::string, Vec> identity_basis;
    std::map<std::string, std::array<Vec, 3>> viewpoint_offsets;
    std::map<std::string, Vec> camera_styles;
    std::map<std::string, Vec> illumination_shifts;
};

struct SynthDataset {
    SynthConfig config;
    std::vector<RawRecord> train;
    std::vector<RawRecord> query;    // query pool of the test identities
    std::vector<RawRecord> gallery;  // gallery records of the test identities
    GroundTruth ground_truth;
};

// x = identity basis + per-identity viewpoint offset + camera style
//   + illumination shift + i.i.d. noise. Identity-disjoint train and
//   test splits; the test records are divided into query pool and gallery
//   per (identity, viewpoint).
SynthDataset generate(const SynthConfig& config);

// Per identity: add `add_k` near-duplicates of one randomly chosen record
// (same camera, same viewpoint) and delete `add_k` records of that identity
// from other cameras, keeping per-identity counts unchanged.
std::vector<RawRecord> modify_gallery(const std::vector<RawRecord>& gallery,
                                      size_t add_k, uint64_t seed);

// One query set per identity that has all three viewpoints in the pool:
// a random record per viewpoint.
std::vector<QuerySet> build_query_sets(
    const std::vector<FeatureRecord>& query_pool, uint64_t seed);

}  // namespace mvq
