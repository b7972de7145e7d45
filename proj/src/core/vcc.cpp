#include "core/vcc.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "core/error.hpp"
#include "core/losses.hpp"

namespace mvq {

VccModel init_vcc(size_t input_dim, const VccTrainConfig& config,
                  std::vector<std::string> identity_vocab, SeededRng& rng) {
    if (identity_vocab.empty())
        throw data_error("init_vcc: empty identity vocabulary");

    VccModel model;
    model.view_trunk = make_mlp({input_dim, config.view_hidden, config.view_dim},
                                {Activation::Relu, Activation::Identity}, 0, rng);
    model.view_head = make_mlp({config.view_dim, 3}, {Activation::Identity}, 0, rng);

    std::vector<size_t> app_dims{input_dim};
    app_dims.insert(app_dims.end(), config.app_hidden.begin(), config.app_hidden.end());
    app_dims.push_back(config.app_dim);
    std::vector<Activation> app_acts(app_dims.size() - 1, Activation::Relu);
    app_acts.back() = Activation::Identity;
    model.app_branch = make_mlp(app_dims, app_acts, config.view_dim, rng);

    model.id_head = make_mlp({config.app_dim, identity_vocab.size()},
                             {Activation::Identity}, 0, rng);
    model.identity_vocab = std::move(identity_vocab);
    return model;
}

double lr_at_step(const VccTrainConfig& config, size_t step, size_t total_steps,
                  size_t epoch) {
    const size_t warm = std::max<size_t>(
        1, static_cast<size_t>(std::llround(config.warmup_fraction *
                                            static_cast<double>(total_steps))));
    double lr = config.base_lr;
    if (step < warm) {
        lr *= static_cast<double>(step + 1) / static_cast<double>(warm);
    }
    const auto boundary = [&](double frac) {
        return static_cast<size_t>(std::floor(frac * static_cast<double>(config.epochs)));
    };
    if (config.epochs > 1) {
        if (epoch >= boundary(config.decay1_at)) lr *= 0.1;
        if (epoch >= boundary(config.decay2_at)) lr *= 0.1;
    }
    return lr;
}

namespace {

struct BatchSampler {
    // PK sampler: P identities per batch, K records each, deterministic.
    std::vector<std::vector<size_t>> per_identity;  // record indices
    std::vector<size_t> id_deck;
    size_t id_cursor = 0;
    std::vector<size_t> record_cursor;
    SeededRng* rng = nullptr;

    void refill_ids() {
        id_cursor = 0;
        rng->shuffle(id_deck);
    }

    std::vector<size_t> next_batch(size_t p, size_t k) {
        std::vector<size_t> batch;
        batch.reserve(p * k);
        for (size_t i = 0; i < p; ++i) {
            if (id_cursor >= id_deck.size()) refill_ids();
            const size_t id = id_deck[id_cursor++];
            auto& recs = per_identity[id];
            for (size_t j = 0; j < k; ++j) {
                if (record_cursor[id] >= recs.size()) {
                    record_cursor[id] = 0;
                    rng->shuffle(recs);
                }
                batch.push_back(recs[record_cursor[id]++]);
            }
        }
        return batch;
    }
};

}  // namespace

VccTrainResult train_vcc(const std::vector<TrainSample>& train_set,
                         const VccTrainConfig& config) {
    if (train_set.empty())
        throw data_error("train_vcc: empty training set");
    if (config.epochs < 1)
        throw config_error("train_vcc: epochs must be >= 1");
    if (config.p_identities < 2 || config.k_instances < 2)
        throw config_error("train_vcc: need P >= 2 and K >= 2");

    const size_t input_dim = train_set[0].x.size();
    std::map<std::string, std::vector<size_t>> by_identity;
    std::set<Viewpoint> seen_views;
    for (size_t i = 0; i < train_set.size(); ++i) {
        if (train_set[i].x.size() != input_dim)
            throw data_error("train_vcc: inconsistent input dimensions");
        by_identity[train_set[i].vehicle_id].push_back(i);
        seen_views.insert(train_set[i].viewpoint);
    }
    if (by_identity.size() < 2)
        throw data_error("train_vcc: need at least 2 identities, got " +
                         std::to_string(by_identity.size()));
    if (seen_views.size() < 3)
        throw data_error("train_vcc: all three viewpoint classes must be present");
    for (const auto& [id, recs] : by_identity) {
        if (recs.size() < config.k_instances)
            throw data_error("train_vcc: identity '" + id + "' has " +
                             std::to_string(recs.size()) + " records, needs >= " +
                             std::to_string(config.k_instances));
    }

    std::vector<std::string> vocab;
    vocab.reserve(by_identity.size());
    for (const auto& [id, recs] : by_identity) vocab.push_back(id);
    std::sort(vocab.begin(), vocab.end());
    std::map<std::string, int> id_index;
    for (size_t i = 0; i < vocab.size(); ++i) id_index[vocab[i]] = static_cast<int>(i);

    SeededRng rng(config.seed);
    VccTrainResult result;
    result.model = init_vcc(input_dim, config, vocab, rng);
    VccModel& model = result.model;

    BatchSampler sampler;
    sampler.rng = &rng;
    sampler.per_identity.resize(vocab.size());
    for (const auto& [id, recs] : by_identity)
        sampler.per_identity[static_cast<size_t>(id_index[id])] = recs;
    sampler.id_deck.resize(vocab.size());
    for (size_t i = 0; i < vocab.size(); ++i) sampler.id_deck[i] = i;
    sampler.refill_ids();
    sampler.record_cursor.resize(vocab.size());
    for (size_t i = 0; i < sampler.record_cursor.size(); ++i)
        sampler.record_cursor[i] = sampler.per_identity[i].size();  // reshuffle on first draw

    const size_t p_eff = std::min(config.p_identities, vocab.size());
    const size_t batch_size = p_eff * config.k_instances;
    const size_t steps_per_epoch =
        std::max<size_t>(1, train_set.size() / batch_size);
    const size_t total_steps = steps_per_epoch * config.epochs;

    size_t step = 0;
    for (size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Vec epoch_total, epoch_view, epoch_app;
        for (size_t s = 0; s < steps_per_epoch; ++s, ++step) {
            const std::vector<size_t> batch = sampler.next_batch(p_eff, config.k_instances);
            const size_t n = batch.size();

            std::vector<ForwardCache> trunk_cache(n), head_cache(n), app_cache(n), id_cache(n);
            std::vector<Vec> view_logits(n), id_logits(n), fa(n), fv(n);
            std::vector<int> view_labels(n), id_labels(n);
            for (size_t i = 0; i < n; ++i) {
                const TrainSample& sample = train_set[batch[i]];
                fv[i] = mlp_forward(model.view_trunk, sample.x, nullptr, &trunk_cache[i]);
                view_logits[i] = mlp_forward(model.view_head, fv[i], nullptr, &head_cache[i]);
                fa[i] = mlp_forward(model.app_branch, sample.x, &fv[i], &app_cache[i]);
                id_logits[i] = mlp_forward(model.id_head, fa[i], nullptr, &id_cache[i]);
                view_labels[i] = static_cast<int>(sample.viewpoint);
                id_labels[i] = id_index.at(sample.vehicle_id);
            }

            const CeResult view_ce = cross_entropy_with_grad(view_logits, view_labels);
            const CeResult id_ce = cross_entropy_with_grad(id_logits, id_labels);
            const BatchHardResult tri = batch_hard_triplet(fa, id_labels, config.margin);
            const double appearance_loss = id_ce.loss + tri.loss;
            const double total = loss_vcc(view_ce.loss, appearance_loss);

            MlpGradients g_trunk = zero_gradients(model.view_trunk);
            MlpGradients g_head = zero_gradients(model.view_head);
            MlpGradients g_app = zero_gradients(model.app_branch);
            MlpGradients g_id = zero_gradients(model.id_head);

            for (size_t i = 0; i < n; ++i) {
                Vec dfa;
                mlp_backward_into(model.id_head, id_cache[i], id_ce.dlogits[i],
                                  g_id, &dfa, nullptr);
                axpy(dfa, 1.0, tri.feature_grads[i]);

                Vec dcond(model.view_trunk.output_dim(), 0.0);
                mlp_backward_into(model.app_branch, app_cache[i], dfa,
                                  g_app, nullptr, &dcond);

                Vec dfv;  // from the classifier
                mlp_backward_into(model.view_head, head_cache[i], view_ce.dlogits[i],
                                  g_head, &dfv, nullptr);
                axpy(dfv, 1.0, dcond);  // plus the conditioning path
                mlp_backward_into(model.view_trunk, trunk_cache[i], dfv,
                                  g_trunk, nullptr, nullptr);
            }

            const double lr = lr_at_step(config, step, total_steps, epoch);
            sgd_step(model.view_trunk, g_trunk, lr);
            sgd_step(model.view_head, g_head, lr);
            sgd_step(model.app_branch, g_app, lr);
            sgd_step(model.id_head, g_id, lr);

            epoch_total.push_back(total);
            epoch_view.push_back(view_ce.loss);
            epoch_app.push_back(appearance_loss);
        }
        EpochLoss el;
        el.total = sum(epoch_total) / static_cast<double>(epoch_total.size());
        el.view = sum(epoch_view) / static_cast<double>(epoch_view.size());
        el.appearance = sum(epoch_app) / static_cast<double>(epoch_app.size());
        result.trace.push_back(el);
    }
    return result;
}

Embedding embed(const VccModel& model, const Vec& x) {
    Vec fv = mlp_forward(model.view_trunk, x);
    Vec fa = mlp_forward(model.app_branch, x, &fv);
    Embedding e;
    e.appearance = l2_normalize(fa);
    e.viewpoint_feature = l2_normalize(fv);
    return e;
}

std::pair<Viewpoint, Vec> predict_viewpoint(const VccModel& model, const Vec& x) {
    Vec fv = mlp_forward(model.view_trunk, x);
    Vec logits = mlp_forward(model.view_head, fv);
    Vec probs = softmax(logits);
    size_t best = 0;
    for (size_t i = 1; i < probs.size(); ++i)
        if (probs[i] > probs[best]) best = i;
    return {static_cast<Viewpoint>(static_cast<int>(best)), probs};
}

}  // namespace mvq
