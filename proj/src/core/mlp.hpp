#pragma once

#include <vector>

#include "core/dense.hpp"
#include "core/rng.hpp"

namespace mvq {

enum class Activation { Relu, Identity };

struct Layer {
    Mat weight;  // out x in
    Vec bias;    // out
    Activation act = Activation::Identity;
};

// Small dense network. When `conditioning` is non-empty it holds one
// projection per layer; the projected condition vector is added to that
// layer's pre-activation.
struct MlpModel {
    std::vector<Layer> layers;
    std::vector<Mat> conditioning;

    bool conditioned() const { return !conditioning.empty(); }
    size_t input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols; }
    size_t output_dim() const { return layers.empty() ? 0 : layers.back().weight.rows; }
    size_t condition_dim() const { return conditioning.empty() ? 0 : conditioning.front().cols; }
};

struct ForwardCache {
    Vec input;
    Vec condition;
    std::vector<Vec> pre;   // per-layer pre-activation
    std::vector<Vec> post;  // per-layer activation
};

struct MlpGradients {
    std::vector<Mat> weight;
    std::vector<Vec> bias;
    std::vector<Mat> conditioning;
    Vec input;
    Vec condition;
};

// Xavier-uniform weights, zero biases, deterministic draw order.
MlpModel make_mlp(const std::vector<size_t>& dims,
                  const std::vector<Activation>& acts,
                  size_t condition_dim,
                  SeededRng& rng);

Vec mlp_forward(const MlpModel& model, const Vec& input,
                const Vec* condition = nullptr,
                ForwardCache* cache = nullptr);

MlpGradients mlp_backward(const MlpModel& model, const ForwardCache& cache,
                          const Vec& output_grad);

// Allocation-free variant for training loops: accumulates parameter
// gradients into `acc` and optionally reports the input and condition
// gradients. `acc` must have been produced by zero_gradients(model).
void mlp_backward_into(const MlpModel& model, const ForwardCache& cache,
                       const Vec& output_grad, MlpGradients& acc,
                       Vec* input_grad, Vec* condition_grad);

MlpGradients zero_gradients(const MlpModel& model);
void add_scaled(MlpGradients& acc, const MlpGradients& g, double s);
void sgd_step(MlpModel& model, const MlpGradients& grads, double lr);

size_t param_count(const MlpModel& model);
double get_param(const MlpModel& model, size_t idx);
void set_param(MlpModel& model, size_t idx, double value);
std::vector<double> flatten_gradients(const MlpGradients& g);

bool same_shape(const MlpModel& a, const MlpModel& b);

}  // namespace mvq
