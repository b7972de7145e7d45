#include "core/losses.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace mvq {

namespace {

double safe_log(double x) {
    return std::log(std::max(x, 1e-300));
}

double euclidean(const Vec& a, const Vec& b) {
    return std::sqrt(squared_distance(a, b));
}

}  // namespace

double loss_view(const Mat& logits, const std::vector<int>& labels) {
    if (logits.cols != 3)
        throw data_error("loss_view: expected exactly 3 viewpoint classes");
    if (logits.rows == 0 || logits.rows != labels.size())
        throw data_error("loss_view: batch size mismatch");
    std::vector<Vec> rows(logits.rows);
    for (size_t r = 0; r < logits.rows; ++r)
        rows[r] = Vec(logits.values.begin() + r * logits.cols,
                      logits.values.begin() + (r + 1) * logits.cols);
    return cross_entropy_with_grad(rows, labels).loss;
}

double loss_triplet(const std::vector<Triplet>& batch, double margin) {
    if (batch.empty())
        throw data_error("loss_triplet: empty batch");
    if (margin < 0.0)
        throw data_error("loss_triplet: negative margin");
    Vec terms;
    terms.reserve(batch.size());
    for (const auto& t : batch) {
        if (t.anchor.size() != t.positive.size() || t.anchor.size() != t.negative.size())
            throw data_error("loss_triplet: dimension mismatch");
        double v = margin + euclidean(t.anchor, t.positive) - euclidean(t.anchor, t.negative);
        terms.push_back(v > 0.0 ? v : 0.0);
    }
    return sum(terms) / static_cast<double>(terms.size());
}

double loss_triplet(const Vec& anchor, const Vec& positive, const Vec& negative,
                    double margin) {
    return loss_triplet(std::vector<Triplet>{{anchor, positive, negative}}, margin);
}

double loss_appearance(const Mat& id_logits, const std::vector<int>& id_labels,
                       const std::vector<Triplet>& triplets, double margin) {
    if (id_logits.rows != id_labels.size())
        throw data_error("loss_appearance: batch size mismatch");
    std::vector<Vec> rows(id_logits.rows);
    for (size_t r = 0; r < id_logits.rows; ++r)
        rows[r] = Vec(id_logits.values.begin() + r * id_logits.cols,
                      id_logits.values.begin() + (r + 1) * id_logits.cols);
    return cross_entropy_with_grad(rows, id_labels).loss + loss_triplet(triplets, margin);
}

double loss_vcc(double view_loss, double appearance_loss) {
    return view_loss + appearance_loss;
}

double loss_recon(const std::vector<Vec>& originals,
                  const std::vector<Vec>& reconstructions) {
    if (originals.size() != reconstructions.size())
        throw data_error("loss_recon: batch size mismatch");
    Vec terms;
    terms.reserve(originals.size());
    for (size_t t = 0; t < originals.size(); ++t) {
        if (originals[t].size() != reconstructions[t].size())
            throw data_error("loss_recon: shape mismatch");
        terms.push_back(squared_distance(originals[t], reconstructions[t]));
    }
    return sum(terms);
}

double loss_contrastive(const std::vector<Vec>& z1, const std::vector<Vec>& z2,
                        double alpha) {
    return contrastive_with_grad(z1, z2, alpha).loss;
}

double loss_prediction(const std::vector<Vec>& predicted,
                       const std::vector<Vec>& targets) {
    return loss_recon(predicted, targets);
}

CeResult cross_entropy_with_grad(const std::vector<Vec>& logits,
                                 const std::vector<int>& labels) {
    if (logits.empty() || logits.size() != labels.size())
        throw data_error("cross_entropy: batch size mismatch");
    const double inv_n = 1.0 / static_cast<double>(logits.size());
    CeResult out;
    out.dlogits.resize(logits.size());
    Vec terms;
    terms.reserve(logits.size());
    for (size_t t = 0; t < logits.size(); ++t) {
        const int label = labels[t];
        if (label < 0 || static_cast<size_t>(label) >= logits[t].size())
            throw data_error("cross_entropy: label out of range");
        Vec p = softmax(logits[t]);
        terms.push_back(-safe_log(p[static_cast<size_t>(label)]));
        for (auto& v : p) v *= inv_n;
        p[static_cast<size_t>(label)] -= inv_n;
        out.dlogits[t] = std::move(p);
    }
    out.loss = sum(terms) * inv_n;
    return out;
}

BatchHardResult batch_hard_triplet(const std::vector<Vec>& features,
                                   const std::vector<int>& labels,
                                   double margin) {
    const size_t n = features.size();
    if (n == 0 || n != labels.size())
        throw data_error("batch_hard_triplet: batch size mismatch");

    Mat dist(n, n);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            double d = euclidean(features[i], features[j]);
            dist(i, j) = d;
            dist(j, i) = d;
        }

    BatchHardResult out;
    out.feature_grads.assign(n, Vec(features[0].size(), 0.0));
    out.hardest_positive.resize(n);
    out.hardest_negative.resize(n);

    const double inv_n = 1.0 / static_cast<double>(n);
    Vec terms;
    terms.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        double dp = -1.0, dn = -1.0;
        size_t pi = n, ni = n;
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            if (labels[j] == labels[i]) {
                if (dist(i, j) > dp) { dp = dist(i, j); pi = j; }
            } else {
                if (dn < 0.0 || dist(i, j) < dn) { dn = dist(i, j); ni = j; }
            }
        }
        if (pi == n)
            throw data_error("batch_hard_triplet: anchor without a positive");
        if (ni == n)
            throw data_error("batch_hard_triplet: anchor without a negative");
        out.hardest_positive[i] = pi;
        out.hardest_negative[i] = ni;

        const double term = margin + dp - dn;
        terms.push_back(term > 0.0 ? term : 0.0);
        if (term > 0.0) {
            // d d(a,b)/da = (a-b)/d
            if (dp > 1e-30) {
                for (size_t k = 0; k < features[i].size(); ++k) {
                    double g = (features[i][k] - features[pi][k]) / dp * inv_n;
                    out.feature_grads[i][k] += g;
                    out.feature_grads[pi][k] -= g;
                }
            }
            if (dn > 1e-30) {
                for (size_t k = 0; k < features[i].size(); ++k) {
                    double g = (features[i][k] - features[ni][k]) / dn * inv_n;
                    out.feature_grads[i][k] -= g;
                    out.feature_grads[ni][k] += g;
                }
            }
        }
    }
    out.loss = sum(terms) * inv_n;
    return out;
}

bool batch_hard_is_smooth(const std::vector<Vec>& features,
                          const std::vector<int>& labels, double margin,
                          double gap) {
    const size_t n = features.size();
    if (n == 0 || n != labels.size())
        throw data_error("batch_hard_is_smooth: batch size mismatch");
    Mat dist(n, n);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            double d = std::sqrt(squared_distance(features[i], features[j]));
            dist(i, j) = d;
            dist(j, i) = d;
        }
    for (size_t i = 0; i < n; ++i) {
        double dp = -1.0, dp2 = -1.0, dn = -1.0, dn2 = -1.0;
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d = dist(i, j);
            if (labels[j] == labels[i]) {
                if (d > dp) { dp2 = dp; dp = d; }
                else if (d > dp2) { dp2 = d; }
            } else {
                if (dn < 0.0 || d < dn) { dn2 = dn; dn = d; }
                else if (dn2 < 0.0 || d < dn2) { dn2 = d; }
            }
        }
        if (dp < 0.0 || dn < 0.0) return false;
        if (dp2 >= 0.0 && dp - dp2 < gap) return false;
        if (dn2 >= 0.0 && dn2 - dn < gap) return false;
        if (std::abs(margin + dp - dn) < gap) return false;
        if (dp < gap || dn < gap) return false;  // sqrt kink at zero distance
    }
    return true;
}

PairResult recon_with_grad(const std::vector<Vec>& originals,
                           const std::vector<Vec>& reconstructions) {
    PairResult out;
    out.loss = loss_recon(originals, reconstructions);
    out.d_first.resize(originals.size());
    out.d_second.resize(originals.size());
    for (size_t t = 0; t < originals.size(); ++t) {
        const size_t dim = originals[t].size();
        out.d_first[t] = Vec(dim);
        out.d_second[t] = Vec(dim);
        for (size_t k = 0; k < dim; ++k) {
            double d = originals[t][k] - reconstructions[t][k];
            out.d_first[t][k] = 2.0 * d;
            out.d_second[t][k] = -2.0 * d;
        }
    }
    return out;
}

PairResult contrastive_with_grad(const std::vector<Vec>& z1,
                                 const std::vector<Vec>& z2, double alpha) {
    const size_t m = z1.size();
    if (m < 2)
        throw data_error("loss_contrastive: batch size must be at least 2");
    if (z2.size() != m)
        throw data_error("loss_contrastive: batch size mismatch");
    const size_t dim = z1[0].size();
    for (size_t t = 0; t < m; ++t)
        if (z1[t].size() != dim || z2[t].size() != dim)
            throw data_error("loss_contrastive: latent dimension mismatch");

    std::vector<Vec> s1(m), s2(m);
    for (size_t t = 0; t < m; ++t) {
        s1[t] = softmax(z1[t]);
        s2[t] = softmax(z2[t]);
    }

    const double inv_m = 1.0 / static_cast<double>(m);
    Mat joint(dim, dim);
    for (size_t t = 0; t < m; ++t)
        add_outer(joint, inv_m, s1[t], s2[t]);
    // symmetrize
    for (size_t i = 0; i < dim; ++i)
        for (size_t j = i + 1; j < dim; ++j) {
            double v = 0.5 * (joint(i, j) + joint(j, i));
            joint(i, j) = v;
            joint(j, i) = v;
        }

    Vec p1(dim, 0.0), p2(dim, 0.0);
    for (size_t i = 0; i < dim; ++i)
        for (size_t j = 0; j < dim; ++j) {
            p1[i] += joint(i, j);
            p2[j] += joint(i, j);
        }

    // loss = -sum_ij P_ij (ln P_ij - (1+alpha)(ln p1_i + ln p2_j))
    const double lam = 1.0 + alpha;
    double loss = 0.0;
    for (size_t i = 0; i < dim; ++i)
        for (size_t j = 0; j < dim; ++j) {
            double p = joint(i, j);
            if (p <= 0.0) continue;
            loss -= p * (safe_log(p) - lam * (safe_log(p1[i]) + safe_log(p2[j])));
        }

    // dL/dP_sym
    Mat dsym(dim, dim);
    for (size_t i = 0; i < dim; ++i)
        for (size_t j = 0; j < dim; ++j) {
            double p = std::max(joint(i, j), 1e-300);
            dsym(i, j) = -(safe_log(p) + 1.0) + lam * (safe_log(p1[i]) + 1.0) +
                         lam * (safe_log(p2[j]) + 1.0);
        }
    // through symmetrization into the raw average of outer products
    Mat draw(dim, dim);
    for (size_t i = 0; i < dim; ++i)
        for (size_t j = 0; j < dim; ++j)
            draw(i, j) = 0.5 * (dsym(i, j) + dsym(j, i));

    PairResult out;
    out.loss = loss;
    out.d_first.resize(m);
    out.d_second.resize(m);
    for (size_t t = 0; t < m; ++t) {
        Vec ds1 = matvec(draw, s2[t]);             // dL/ds1
        Vec ds2 = matvec_transpose(draw, s1[t]);   // dL/ds2
        for (auto& v : ds1) v *= inv_m;
        for (auto& v : ds2) v *= inv_m;
        // softmax backward: dz_k = s_k (g_k - sum_j g_j s_j)
        double inner1 = dot(ds1, s1[t]);
        double inner2 = dot(ds2, s2[t]);
        out.d_first[t] = Vec(dim);
        out.d_second[t] = Vec(dim);
        for (size_t k = 0; k < dim; ++k) {
            out.d_first[t][k] = s1[t][k] * (ds1[k] - inner1);
            out.d_second[t][k] = s2[t][k] * (ds2[k] - inner2);
        }
    }
    return out;
}

}  // namespace mvq
