#pragma once

#include <string>
#include <vector>

#include "core/dense.hpp"
#include "core/metrics.hpp"

namespace mvq {

// One embedded vehicle observation.
struct FeatureRecord {
    std::string record_id;
    std::string vehicle_id;
    std::string camera_id;
    Viewpoint viewpoint = Viewpoint::Front;
    Vec appearance;         // unit norm
    Vec viewpoint_feature;  // unit norm
};

// One raw (pre-embedding) observation from the synthetic generator.
struct RawRecord {
    std::string record_id;
    std::string vehicle_id;
    std::string camera_id;
    Viewpoint viewpoint = Viewpoint::Front;
    Vec x;
};

// Up to three query records with pairwise-distinct viewpoints; `missing`
// holds the absent viewpoint labels of a 3-view set.
struct QuerySet {
    std::string target_id;
    std::vector<FeatureRecord> records;
    std::vector<Viewpoint> missing;
};

void validate_query_set(const QuerySet& qs, bool multi_mode);

struct RankedList {
    std::vector<size_t> indices;  // gallery indices, descending score
    Vec scores;
};

}  // namespace mvq
