#pragma once

#include <functional>
#include <vector>

#include "core/mlp.hpp"
#include "core/rng.hpp"

namespace mvq {

// Flat mutable view over the parameters of one or more models, in model
// order. Lets the finite-difference checker perturb any scalar parameter.
class ParamPack {
public:
    explicit ParamPack(std::vector<MlpModel*> models);

    size_t size() const { return total_; }
    double get(size_t idx) const;
    void set(size_t idx, double value);

private:
    std::vector<MlpModel*> models_;
    std::vector<size_t> offsets_;
    size_t total_ = 0;
};

// Max over probed parameters of |analytic - central difference| /
// max(|analytic|, |numeric|, 1e-8). `loss_fn` must evaluate the loss on the
// current parameters; `analytic` is the full flat gradient in ParamPack
// order. Errors if the loss is non-finite.
double grad_check(ParamPack& params,
                  const std::function<double()>& loss_fn,
                  const std::vector<double>& analytic,
                  size_t probe_count,
                  double epsilon,
                  SeededRng& rng);

// True when every relu pre-activation of the forward pass stays at least
// `margin` away from zero; central differences would otherwise straddle the
// kink.
bool relu_margins_ok(const MlpModel& model, const Vec& input,
                     const Vec* condition, double margin);

}  // namespace mvq
