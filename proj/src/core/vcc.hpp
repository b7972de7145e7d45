#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "core/metrics.hpp"
#include "core/mlp.hpp"

namespace mvq {

// Two-branch embedding network. The viewpoint branch produces a viewpoint
// feature (trunk output, pre-classifier) and a 3-class prediction; every
// appearance-branch layer receives an additive projection of the raw
// viewpoint feature into its pre-activation.
struct VccModel {
    MlpModel view_trunk;  // input -> viewpoint feature
    MlpModel view_head;   // viewpoint feature -> 3 logits
    MlpModel app_branch;  // input -> appearance feature, conditioned per layer
    MlpModel id_head;     // appearance feature -> identity logits
    std::vector<std::string> identity_vocab;

    size_t input_dim() const { return view_trunk.input_dim(); }
    size_t viewpoint_dim() const { return view_trunk.output_dim(); }
    size_t appearance_dim() const { return app_branch.output_dim(); }
};

struct VccTrainConfig {
    size_t epochs = 15;
    double base_lr = 0.05;
    double warmup_fraction = 0.05;   // of total steps
    double decay1_at = 0.75;         // of epochs, x0.1
    double decay2_at = 0.94;         // of epochs, x0.1 again
    size_t p_identities = 6;
    size_t k_instances = 6;
    double margin = 0.3;
    size_t view_hidden = 64;
    size_t view_dim = 16;
    std::vector<size_t> app_hidden{96, 80};
    size_t app_dim = 64;
    uint64_t seed = 1;
};

struct TrainSample {
    Vec x;
    std::string vehicle_id;
    Viewpoint viewpoint = Viewpoint::Front;
};

struct EpochLoss {
    double total = 0.0;
    double view = 0.0;
    double appearance = 0.0;
};

struct VccTrainResult {
    VccModel model;
    std::vector<EpochLoss> trace;
};

VccModel init_vcc(size_t input_dim, const VccTrainConfig& config,
                  std::vector<std::string> identity_vocab, SeededRng& rng);

VccTrainResult train_vcc(const std::vector<TrainSample>& train_set,
                         const VccTrainConfig& config);

struct Embedding {
    Vec appearance;         // unit norm
    Vec viewpoint_feature;  // unit norm
};

Embedding embed(const VccModel& model, const Vec& x);

std::pair<Viewpoint, Vec> predict_viewpoint(const VccModel& model, const Vec& x);

double lr_at_step(const VccTrainConfig& config, size_t step, size_t total_steps,
                  size_t epoch);

}  // namespace mvq
