#include "core/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "core/error.hpp"

namespace mvq {

ParamPack::ParamPack(std::vector<MlpModel*> models) : models_(std::move(models)) {
    for (const auto* m : models_) {
        offsets_.push_back(total_);
        total_ += param_count(*m);
    }
}

double ParamPack::get(size_t idx) const {
    for (size_t i = models_.size(); i-- > 0;) {
        if (idx >= offsets_[i]) return get_param(*models_[i], idx - offsets_[i]);
    }
    throw data_error("ParamPack: index out of range");
}

void ParamPack::set(size_t idx, double value) {
    for (size_t i = models_.size(); i-- > 0;) {
        if (idx >= offsets_[i]) {
            set_param(*models_[i], idx - offsets_[i], value);
            return;
        }
    }
    throw data_error("ParamPack: index out of range");
}

double grad_check(ParamPack& params,
                  const std::function<double()>& loss_fn,
                  const std::vector<double>& analytic,
                  size_t probe_count,
                  double epsilon,
                  SeededRng& rng) {
    if (analytic.size() != params.size())
        throw data_error("grad_check: analytic gradient size mismatch");
    if (params.size() == 0)
        throw data_error("grad_check: no parameters");

    // Without replacement when probing most of the pack, otherwise sampled.
    std::vector<size_t> indices;
    if (probe_count >= params.size()) {
        indices.resize(params.size());
        for (size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    } else {
        indices.reserve(probe_count);
        for (size_t i = 0; i < probe_count; ++i)
            indices.push_back(static_cast<size_t>(rng.uniform_int(params.size())));
    }

    double max_rel = 0.0;
    for (size_t idx : indices) {
        const double saved = params.get(idx);
        params.set(idx, saved + epsilon);
        const double up = loss_fn();
        params.set(idx, saved - epsilon);
        const double down = loss_fn();
        params.set(idx, saved);
        if (!std::isfinite(up) || !std::isfinite(down))
            throw data_error("grad_check: non-finite loss");
        const double numeric = (up - down) / (2.0 * epsilon);
        const double a = analytic[idx];
        // Finite differences cannot resolve gradients below the rounding
        // noise of the two loss evaluations; both sides under that floor
        // count as agreement.
        const double scale = std::max({std::abs(up), std::abs(down), 1.0});
        const double noise_floor = 32.0 * std::numeric_limits<double>::epsilon() *
                                   scale / (2.0 * epsilon);
        if (std::abs(numeric) <= noise_floor && std::abs(a) <= noise_floor)
            continue;
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
        max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
    }
    return max_rel;
}

bool relu_margins_ok(const MlpModel& model, const Vec& input,
                     const Vec* condition, double margin) {
    ForwardCache cache;
    mlp_forward(model, input, condition, &cache);
    for (size_t l = 0; l < model.layers.size(); ++l) {
        if (model.layers[l].act != Activation::Relu) continue;
        for (double z : cache.pre[l])
            if (std::abs(z) < margin) return false;
    }
    return true;
}

}  // namespace mvq
