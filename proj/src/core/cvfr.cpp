#include "core/cvfr.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"
#include "core/losses.hpp"

namespace mvq {

namespace {

constexpr std::array<std::pair<size_t, size_t>, 3> kPairs{{{0, 1}, {0, 2}, {1, 2}}};

}  // namespace

CvfrModel init_cvfr(size_t appearance_dim, const CvfrTrainConfig& config,
                    SeededRng& rng) {
    if (config.latent_dim < 2)
        throw config_error("init_cvfr: latent dim must be >= 2");
    if (config.alpha < 0.0)
        throw config_error("init_cvfr: alpha must be >= 0");

    const size_t k = config.latent_dim;
    const size_t h = config.hidden_width > 0 ? config.hidden_width : 4 * k;

    CvfrModel model;
    model.latent_dim = k;
    // hidden_layers == 0 gives purely linear encoders/decoders/predictors
    std::vector<size_t> hidden(config.hidden_layers, h);
    std::vector<Activation> acts(config.hidden_layers, Activation::Relu);
    acts.push_back(Activation::Identity);
    auto dims_of = [&](size_t in, size_t out) {
        std::vector<size_t> dims{in};
        dims.insert(dims.end(), hidden.begin(), hidden.end());
        dims.push_back(out);
        return dims;
    };
    for (size_t v = 0; v < 3; ++v) {
        model.encoders[v] = make_mlp(dims_of(appearance_dim, k), acts, 0, rng);
        model.decoders[v] = make_mlp(dims_of(k, appearance_dim), acts, 0, rng);
    }
    for (size_t u = 0; u < 3; ++u)
        for (size_t v = 0; v < 3; ++v)
            if (u != v)
                model.predictors[u][v] = make_mlp(dims_of(k, k), acts, 0, rng);
    return model;
}

namespace {

struct CvfrGradients {
    std::array<MlpGradients, 3> enc, dec;
    std::array<std::array<MlpGradients, 3>, 3> pred;
};

// One full-batch pass: combined loss of Eqs. 6-9 over the three pairs, and
// (when grads is non-null) the gradients of every network.
double full_pass(const CvfrModel& model, const std::vector<AlignedTriple>& aligned,
                 double alpha, CvfrGradients* grads) {
    const size_t m = aligned.size();
    std::array<std::vector<ForwardCache>, 3> enc_cache;
    std::array<std::vector<Vec>, 3> x, z, dz;
    for (size_t v = 0; v < 3; ++v) {
        enc_cache[v].resize(m);
        x[v].resize(m);
        z[v].resize(m);
        if (grads) dz[v].assign(m, Vec(model.latent_dim, 0.0));
        for (size_t t = 0; t < m; ++t) {
            x[v][t] = aligned[t].features[v];
            z[v][t] = mlp_forward(model.encoders[v], x[v][t], nullptr,
                                  grads ? &enc_cache[v][t] : nullptr);
        }
    }
    if (grads) {
        for (size_t v = 0; v < 3; ++v) {
            grads->enc[v] = zero_gradients(model.encoders[v]);
            grads->dec[v] = zero_gradients(model.decoders[v]);
        }
        for (size_t u = 0; u < 3; ++u)
            for (size_t v = 0; v < 3; ++v)
                if (u != v) grads->pred[u][v] = zero_gradients(model.predictors[u][v]);
    }

    Vec parts;
    for (const auto& [u, v] : kPairs) {
        // reconstruction of both views (Eq. 6 shape)
        for (size_t w : {u, v}) {
            std::vector<ForwardCache> dc(m);
            std::vector<Vec> rec(m);
            for (size_t t = 0; t < m; ++t)
                rec[t] = mlp_forward(model.decoders[w], z[w][t], nullptr,
                                     grads ? &dc[t] : nullptr);
            PairResult pr = recon_with_grad(x[w], rec);
            parts.push_back(pr.loss);
            if (grads) {
                for (size_t t = 0; t < m; ++t) {
                    Vec din;
                    mlp_backward_into(model.decoders[w], dc[t], pr.d_second[t],
                                      grads->dec[w], &din, nullptr);
                    axpy(dz[w][t], 1.0, din);
                }
            }
        }
        // contrastive alignment of the two latent batches (Eq. 7 shape)
        {
            PairResult cl = contrastive_with_grad(z[u], z[v], alpha);
            parts.push_back(cl.loss);
            if (grads) {
                for (size_t t = 0; t < m; ++t) {
                    axpy(dz[u][t], 1.0, cl.d_first[t]);
                    axpy(dz[v][t], 1.0, cl.d_second[t]);
                }
            }
        }
        // dual prediction and decoded prediction (Eqs. 8 and 9 shapes)
        for (const auto& [a, b] : {std::pair{u, v}, std::pair{v, u}}) {
            std::vector<ForwardCache> pc(m), dc(m);
            std::vector<Vec> pred(m), dec(m);
            for (size_t t = 0; t < m; ++t) {
                pred[t] = mlp_forward(model.predictors[a][b], z[a][t], nullptr,
                                      grads ? &pc[t] : nullptr);
                dec[t] = mlp_forward(model.decoders[b], pred[t], nullptr,
                                     grads ? &dc[t] : nullptr);
            }
            PairResult pr = recon_with_grad(pred, z[b]);  // Eq. 8 on (g, Z)
            parts.push_back(pr.loss);
            PairResult r2 = recon_with_grad(x[b], dec);   // Eq. 9
            parts.push_back(r2.loss);
            if (grads) {
                for (size_t t = 0; t < m; ++t) {
                    Vec dg;
                    mlp_backward_into(model.decoders[b], dc[t], r2.d_second[t],
                                      grads->dec[b], &dg, nullptr);
                    Vec dpred = pr.d_first[t];
                    axpy(dpred, 1.0, dg);
                    Vec din;
                    mlp_backward_into(model.predictors[a][b], pc[t], dpred,
                                      grads->pred[a][b], &din, nullptr);
                    axpy(dz[a][t], 1.0, din);
                    axpy(dz[b][t], 1.0, pr.d_second[t]);  // target side of Eq. 8
                }
            }
        }
    }

    if (grads) {
        for (size_t v = 0; v < 3; ++v)
            for (size_t t = 0; t < m; ++t)
                mlp_backward_into(model.encoders[v], enc_cache[v][t], dz[v][t],
                                  grads->enc[v], nullptr, nullptr);
    }
    return sum(parts);
}

void apply_step(CvfrModel& model, const CvfrGradients& grads, double lr) {
    for (size_t v = 0; v < 3; ++v) {
        sgd_step(model.encoders[v], grads.enc[v], lr);
        sgd_step(model.decoders[v], grads.dec[v], lr);
    }
    for (size_t u = 0; u < 3; ++u)
        for (size_t v = 0; v < 3; ++v)
            if (u != v) sgd_step(model.predictors[u][v], grads.pred[u][v], lr);
}

}  // namespace

namespace {

std::vector<AlignedTriple> scale_triples(const std::vector<AlignedTriple>& aligned,
                                         double scale) {
    if (scale == 1.0) return aligned;
    std::vector<AlignedTriple> out = aligned;
    for (auto& t : out)
        for (auto& f : t.features)
            for (auto& v : f) v *= scale;
    return out;
}

}  // namespace

double cvfr_total_loss(const CvfrModel& model,
                       const std::vector<AlignedTriple>& aligned, double alpha) {
    return full_pass(model, scale_triples(aligned, model.input_scale), alpha, nullptr);
}

CvfrTrainResult train_cvfr(const std::vector<AlignedTriple>& aligned,
                           const CvfrTrainConfig& config) {
    const size_t m = aligned.size();
    if (m < 2)
        throw data_error("train_cvfr: need at least 2 aligned samples");
    const size_t dim = aligned[0].features[0].size();
    for (const auto& tr : aligned)
        for (const auto& f : tr.features) {
            if (f.empty())
                throw data_error("train_cvfr: every identity must supply all three viewpoints");
            if (f.size() != dim)
                throw data_error("train_cvfr: inconsistent feature dimensions");
        }
    if (config.epochs < 1)
        throw config_error("train_cvfr: epochs must be >= 1");

    SeededRng rng(config.seed);
    CvfrTrainResult result;
    result.model = init_cvfr(dim, config, rng);
    CvfrModel& model = result.model;
    model.input_scale = config.input_scale > 0.0
                            ? config.input_scale
                            : std::sqrt(static_cast<double>(dim));
    const std::vector<AlignedTriple> scaled =
        scale_triples(aligned, model.input_scale);

    const double inv_m = 1.0 / static_cast<double>(m);

    // Full-batch descent with step halving on non-descent: every accepted
    // epoch has loss <= the previous one, so the trace is monotone.
    CvfrGradients grads;
    double current = full_pass(model, scaled, config.alpha, &grads);
    double lr = config.lr;
    for (size_t epoch = 0; epoch < config.epochs; ++epoch) {
        result.trace.push_back(current);
        if (config.lr <= 0.0) continue;
        bool accepted = false;
        for (int attempt = 0; attempt < 40; ++attempt) {
            CvfrModel candidate = model;
            apply_step(candidate, grads, lr * inv_m);
            CvfrGradients next_grads;
            const double next = full_pass(candidate, scaled, config.alpha, &next_grads);
            if (next <= current) {
                model = std::move(candidate);
                grads = std::move(next_grads);
                current = next;
                lr = std::min(lr * 1.2, config.lr);
                accepted = true;
                break;
            }
            lr *= 0.5;
        }
        if (!accepted) {  // stalled at numerical resolution
            while (result.trace.size() < config.epochs)
                result.trace.push_back(current);
            break;
        }
    }
    return result;
}

Vec recover(const CvfrModel& model, const std::map<Viewpoint, Vec>& available,
            Viewpoint missing) {
    if (available.empty())
        throw data_error("recover: no available viewpoints");
    if (available.count(missing))
        throw data_error("recover: missing viewpoint listed as available");
    if (available.size() > 2)
        throw data_error("recover: more than two available viewpoints");

    const size_t mv = static_cast<size_t>(missing);
    Vec acc(model.appearance_dim(), 0.0);
    // std::map iterates in Viewpoint order, so candidate order is fixed.
    for (const auto& [view, feature] : available) {
        const size_t uv = static_cast<size_t>(view);
        Vec x = feature;
        for (auto& v : x) v *= model.input_scale;
        Vec z = mlp_forward(model.encoders[uv], x);
        Vec g = mlp_forward(model.predictors[uv][mv], z);
        Vec cand = mlp_forward(model.decoders[mv], g);
        axpy(acc, 1.0, cand);
    }
    for (auto& v : acc) v /= static_cast<double>(available.size());
    return l2_normalize(acc);
}

Vec cvfr_autoencode(const CvfrModel& model, Viewpoint view, const Vec& feature) {
    const size_t v = static_cast<size_t>(view);
    Vec x = feature;
    for (auto& val : x) val *= model.input_scale;
    Vec z = mlp_forward(model.encoders[v], x);
    Vec rec = mlp_forward(model.decoders[v], z);
    for (auto& val : rec) val /= model.input_scale;
    return rec;
}

}  // namespace mvq
