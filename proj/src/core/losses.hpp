#pragma once

#include <vector>

#include "core/dense.hpp"

namespace mvq {

struct Triplet {
    Vec anchor;
    Vec positive;
    Vec negative;
};

// ---- scalar loss values ----

// Mean negative log-softmax probability of the true class. Logit rows are
// batch entries; exactly 3 columns (front/side/rear).
double loss_view(const Mat& logits, const std::vector<int>& labels);

// Mean over batch of max(0, margin + d(a,p) - d(a,n)), Euclidean d.
double loss_triplet(const std::vector<Triplet>& batch, double margin);
double loss_triplet(const Vec& anchor, const Vec& positive, const Vec& negative,
                    double margin);

// Identity cross-entropy plus triplet term, unweighted sum.
double loss_appearance(const Mat& id_logits, const std::vector<int>& id_labels,
                       const std::vector<Triplet>& triplets, double margin);

double loss_vcc(double view_loss, double appearance_loss);

// Sum over samples of squared Euclidean reconstruction error.
double loss_recon(const std::vector<Vec>& originals,
                  const std::vector<Vec>& reconstructions);

// Negated mutual information plus alpha-weighted marginal entropies of the
// batch joint distribution (per-sample softmax, batch-averaged outer
// product, symmetrized).
double loss_contrastive(const std::vector<Vec>& z1, const std::vector<Vec>& z2,
                        double alpha);

// Sum over samples of squared error between predicted and target latents.
double loss_prediction(const std::vector<Vec>& predicted,
                       const std::vector<Vec>& targets);

// ---- value + gradient forms used by the trainers ----

struct CeResult {
    double loss = 0.0;
    std::vector<Vec> dlogits;
};
CeResult cross_entropy_with_grad(const std::vector<Vec>& logits,
                                 const std::vector<int>& labels);

struct BatchHardResult {
    double loss = 0.0;
    std::vector<Vec> feature_grads;
    std::vector<size_t> hardest_positive;  // per anchor
    std::vector<size_t> hardest_negative;
};
// Batch-hard mining: per anchor, the farthest same-label feature and the
// nearest different-label feature.
BatchHardResult batch_hard_triplet(const std::vector<Vec>& features,
                                   const std::vector<int>& labels,
                                   double margin);

// True when every anchor's mined selections are unique by at least `gap`
// and its hinge term is at least `gap` away from zero. The loss is only
// differentiable at such points, so finite-difference checks require them.
bool batch_hard_is_smooth(const std::vector<Vec>& features,
                          const std::vector<int>& labels, double margin,
                          double gap);

struct PairResult {
    double loss = 0.0;
    std::vector<Vec> d_first;
    std::vector<Vec> d_second;
};
PairResult recon_with_grad(const std::vector<Vec>& originals,
                           const std::vector<Vec>& reconstructions);
PairResult contrastive_with_grad(const std::vector<Vec>& z1,
                                 const std::vector<Vec>& z2, double alpha);

}  // namespace mvq
