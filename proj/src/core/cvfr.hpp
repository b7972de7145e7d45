#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "core/metrics.hpp"
#include "core/mlp.hpp"

namespace mvq {

// Cross-view feature recovery: one encoder/decoder per viewpoint plus a
// predictor for each ordered viewpoint pair, all sharing latent dim K.
struct CvfrModel {
    std::array<MlpModel, 3> encoders;  // appearance dim -> K
    std::array<MlpModel, 3> decoders;  // K -> appearance dim
    // predictors[u][v], u != v: latent of view u -> latent of view v
    std::array<std::array<MlpModel, 3>, 3> predictors;
    // Unit-norm mean training viewpoint feature per class; used at inference
    // time when a missing view needs a stand-in viewpoint feature.
    std::array<Vec, 3> viewpoint_centroids;
    size_t latent_dim = 0;
    // Unit-norm features have coordinates of order 1/sqrt(dim); the networks
    // see and reproduce input_scale * x instead.
    double input_scale = 1.0;

    size_t appearance_dim() const { return encoders[0].input_dim(); }
};

// Linear encoders/decoders/predictors with a full-width latent are the
// default: the cross-view feature map is near-linear, and linear nets are
// the only variant that generalizes from the training identities to held-out
// ones at this scale.
struct CvfrTrainConfig {
    size_t epochs = 250;
    double lr = 0.1;
    size_t latent_dim = 64;
    double alpha = 9.0;       // entropy weight in the contrastive loss
    size_t hidden_width = 0;  // 0 -> 4 * latent_dim
    size_t hidden_layers = 0; // 0 -> purely linear networks
    double input_scale = 0.0; // 0 -> sqrt(appearance dim)
    // record-level aligned triples drawn per identity by the pipeline
    size_t rounds_per_identity = 10;
    uint64_t seed = 1;
};

// One identity's appearance features, indexed by Viewpoint.
struct AlignedTriple {
    std::array<Vec, 3> features;
};

struct CvfrTrainResult {
    CvfrModel model;
    std::vector<double> trace;  // per-epoch combined loss
};

CvfrModel init_cvfr(size_t appearance_dim, const CvfrTrainConfig& config,
                    SeededRng& rng);

CvfrTrainResult train_cvfr(const std::vector<AlignedTriple>& aligned,
                           const CvfrTrainConfig& config);

// Combined loss of Eqs. 6-9 summed over the three viewpoint pairs, evaluated
// on unit-norm aligned features.
double cvfr_total_loss(const CvfrModel& model,
                       const std::vector<AlignedTriple>& aligned, double alpha);

// Recover the appearance feature of `missing` from the available views:
// mean over candidates D_missing(G_{u->missing}(E_u(x_u))), L2-normalized.
Vec recover(const CvfrModel& model, const std::map<Viewpoint, Vec>& available,
            Viewpoint missing);

// Autoencoding through one viewpoint's encoder/decoder pair, mapped back to
// the caller's feature scale.
Vec cvfr_autoencode(const CvfrModel& model, Viewpoint view, const Vec& feature);

}  // namespace mvq
