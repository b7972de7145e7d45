#include "core/mlp.hpp"

#include <cmath>

#include "core/error.hpp"

namespace mvq {

MlpModel make_mlp(const std::vector<size_t>& dims,
                  const std::vector<Activation>& acts,
                  size_t condition_dim,
                  SeededRng& rng) {
    if (dims.size() < 2)
        throw config_error("make_mlp: need at least input and output dims");
    if (acts.size() != dims.size() - 1)
        throw config_error("make_mlp: one activation per layer required");

    MlpModel model;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer layer;
        layer.weight = Mat(dims[l + 1], dims[l]);
        const double bound = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
        for (auto& w : layer.weight.values) w = rng.uniform(-bound, bound);
        layer.bias = Vec(dims[l + 1], 0.0);
        layer.act = acts[l];
        model.layers.push_back(std::move(layer));
    }
    if (condition_dim > 0) {
        for (size_t l = 0; l + 1 < dims.size(); ++l) {
            Mat proj(dims[l + 1], condition_dim);
            const double bound = std::sqrt(6.0 / static_cast<double>(condition_dim + dims[l + 1]));
            for (auto& w : proj.values) w = rng.uniform(-bound, bound);
            model.conditioning.push_back(std::move(proj));
        }
    }
    return model;
}

Vec mlp_forward(const MlpModel& model, const Vec& input,
                const Vec* condition, ForwardCache* cache) {
    if (model.layers.empty())
        throw data_error("mlp_forward: empty model");
    if (input.size() != model.input_dim())
        throw data_error("mlp_forward: input dimension mismatch");
    if (model.conditioned()) {
        if (condition == nullptr)
            throw data_error("mlp_forward: model requires a condition vector");
        if (condition->size() != model.condition_dim())
            throw data_error("mlp_forward: condition dimension mismatch");
    } else if (condition != nullptr) {
        throw data_error("mlp_forward: model has no conditioning projections");
    }

    if (cache) {
        cache->input = input;
        cache->condition = condition ? *condition : Vec{};
        cache->pre.clear();
        cache->post.clear();
    }

    Vec a = input;
    for (size_t l = 0; l < model.layers.size(); ++l) {
        const Layer& layer = model.layers[l];
        Vec z = matvec(layer.weight, a);
        for (size_t i = 0; i < z.size(); ++i) z[i] += layer.bias[i];
        if (model.conditioned()) {
            Vec c = matvec(model.conditioning[l], *condition);
            for (size_t i = 0; i < z.size(); ++i) z[i] += c[i];
        }
        Vec out(z.size());
        if (layer.act == Activation::Relu) {
            for (size_t i = 0; i < z.size(); ++i) out[i] = z[i] > 0.0 ? z[i] : 0.0;
        } else {
            out = z;
        }
        if (cache) {
            cache->pre.push_back(z);
            cache->post.push_back(out);
        }
        a = std::move(out);
    }
    return a;
}

MlpGradients mlp_backward(const MlpModel& model, const ForwardCache& cache,
                          const Vec& output_grad) {
    MlpGradients g = zero_gradients(model);
    mlp_backward_into(model, cache, output_grad, g, &g.input,
                      model.conditioned() ? &g.condition : nullptr);
    return g;
}

void mlp_backward_into(const MlpModel& model, const ForwardCache& cache,
                       const Vec& output_grad, MlpGradients& acc,
                       Vec* input_grad, Vec* condition_grad) {
    const size_t n = model.layers.size();
    if (cache.pre.size() != n || cache.post.size() != n)
        throw data_error("mlp_backward: cache does not match model");
    if (cache.input.size() != model.input_dim())
        throw data_error("mlp_backward: cached input dimension mismatch");
    if (output_grad.size() != model.output_dim())
        throw data_error("mlp_backward: output gradient dimension mismatch");
    if (model.conditioned() && cache.condition.size() != model.condition_dim())
        throw data_error("mlp_backward: cached condition dimension mismatch");
    if (acc.weight.size() != n)
        throw data_error("mlp_backward: gradient accumulator shape mismatch");

    Vec delta = output_grad;  // gradient w.r.t. current layer's activation

    for (size_t li = n; li-- > 0;) {
        const Layer& layer = model.layers[li];
        if (cache.pre[li].size() != layer.weight.rows)
            throw data_error("mlp_backward: cache layer width mismatch");

        // through the activation
        if (layer.act == Activation::Relu) {
            for (size_t i = 0; i < delta.size(); ++i)
                if (cache.pre[li][i] <= 0.0) delta[i] = 0.0;
        }

        const Vec& layer_input = (li == 0) ? cache.input : cache.post[li - 1];
        add_outer(acc.weight[li], 1.0, delta, layer_input);
        for (size_t i = 0; i < delta.size(); ++i) acc.bias[li][i] += delta[i];
        if (model.conditioned()) {
            add_outer(acc.conditioning[li], 1.0, delta, cache.condition);
            if (condition_grad) {
                Vec cg = matvec_transpose(model.conditioning[li], delta);
                axpy(*condition_grad, 1.0, cg);
            }
        }
        if (li == 0 && input_grad == nullptr) break;  // skip the last transpose
        delta = matvec_transpose(layer.weight, delta);
    }
    if (input_grad) *input_grad = std::move(delta);
}

MlpGradients zero_gradients(const MlpModel& model) {
    MlpGradients g;
    for (const auto& layer : model.layers) {
        g.weight.emplace_back(layer.weight.rows, layer.weight.cols);
        g.bias.emplace_back(layer.bias.size(), 0.0);
    }
    for (const auto& proj : model.conditioning)
        g.conditioning.emplace_back(proj.rows, proj.cols);
    g.input = Vec(model.input_dim(), 0.0);
    if (model.conditioned()) g.condition = Vec(model.condition_dim(), 0.0);
    return g;
}

void add_scaled(MlpGradients& acc, const MlpGradients& g, double s) {
    for (size_t l = 0; l < acc.weight.size(); ++l) {
        for (size_t i = 0; i < acc.weight[l].values.size(); ++i)
            acc.weight[l].values[i] += s * g.weight[l].values[i];
        for (size_t i = 0; i < acc.bias[l].size(); ++i)
            acc.bias[l][i] += s * g.bias[l][i];
    }
    for (size_t l = 0; l < acc.conditioning.size(); ++l)
        for (size_t i = 0; i < acc.conditioning[l].values.size(); ++i)
            acc.conditioning[l].values[i] += s * g.conditioning[l].values[i];
}

void sgd_step(MlpModel& model, const MlpGradients& grads, double lr) {
    if (grads.weight.size() != model.layers.size() ||
        grads.conditioning.size() != model.conditioning.size())
        throw data_error("sgd_step: gradient shape mismatch");
    for (size_t l = 0; l < model.layers.size(); ++l) {
        Layer& layer = model.layers[l];
        if (!layer.weight.same_shape(grads.weight[l]) ||
            layer.bias.size() != grads.bias[l].size())
            throw data_error("sgd_step: gradient shape mismatch");
        for (size_t i = 0; i < layer.weight.values.size(); ++i)
            layer.weight.values[i] -= lr * grads.weight[l].values[i];
        for (size_t i = 0; i < layer.bias.size(); ++i)
            layer.bias[i] -= lr * grads.bias[l][i];
    }
    for (size_t l = 0; l < model.conditioning.size(); ++l) {
        if (!model.conditioning[l].same_shape(grads.conditioning[l]))
            throw data_error("sgd_step: conditioning gradient shape mismatch");
        for (size_t i = 0; i < model.conditioning[l].values.size(); ++i)
            model.conditioning[l].values[i] -= lr * grads.conditioning[l].values[i];
    }
}

size_t param_count(const MlpModel& model) {
    size_t n = 0;
    for (const auto& layer : model.layers)
        n += layer.weight.values.size() + layer.bias.size();
    for (const auto& proj : model.conditioning) n += proj.values.size();
    return n;
}

namespace {

// Parameter order: per layer weights then bias, then conditioning matrices.
template <typename ModelT, typename Fn>
void locate_param(ModelT& model, size_t idx, Fn&& fn) {
    for (auto& layer : model.layers) {
        if (idx < layer.weight.values.size()) {
            fn(layer.weight.values[idx]);
            return;
        }
        idx -= layer.weight.values.size();
        if (idx < layer.bias.size()) {
            fn(layer.bias[idx]);
            return;
        }
        idx -= layer.bias.size();
    }
    for (auto& proj : model.conditioning) {
        if (idx < proj.values.size()) {
            fn(proj.values[idx]);
            return;
        }
        idx -= proj.values.size();
    }
    throw data_error("parameter index out of range");
}

}  // namespace

double get_param(const MlpModel& model, size_t idx) {
    double out = 0.0;
    locate_param(model, idx, [&](const double& p) { out = p; });
    return out;
}

void set_param(MlpModel& model, size_t idx, double value) {
    locate_param(model, idx, [&](double& p) { p = value; });
}

std::vector<double> flatten_gradients(const MlpGradients& g) {
    std::vector<double> flat;
    for (size_t l = 0; l < g.weight.size(); ++l) {
        flat.insert(flat.end(), g.weight[l].values.begin(), g.weight[l].values.end());
        flat.insert(flat.end(), g.bias[l].begin(), g.bias[l].end());
    }
    for (const auto& proj : g.conditioning)
        flat.insert(flat.end(), proj.values.begin(), proj.values.end());
    return flat;
}

bool same_shape(const MlpModel& a, const MlpModel& b) {
    if (a.layers.size() != b.layers.size() ||
        a.conditioning.size() != b.conditioning.size())
        return false;
    for (size_t l = 0; l < a.layers.size(); ++l) {
        if (!a.layers[l].weight.same_shape(b.layers[l].weight) ||
            a.layers[l].bias.size() != b.layers[l].bias.size() ||
            a.layers[l].act != b.layers[l].act)
            return false;
    }
    for (size_t l = 0; l < a.conditioning.size(); ++l)
        if (!a.conditioning[l].same_shape(b.conditioning[l])) return false;
    return true;
}

}  // namespace mvq
