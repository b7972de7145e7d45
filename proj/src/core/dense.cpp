#include "core/dense.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace mvq {

double sum(const Vec& v) {
    double s = 0.0, c = 0.0;
    for (double x : v) {
        double t = s + x;
        if (std::abs(s) >= std::abs(x)) {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    return s + c;
}

double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size())
        throw data_error("dot: dimension mismatch");
    double s = 0.0, c = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double x = a[i] * b[i];
        double t = s + x;
        if (std::abs(s) >= std::abs(x)) {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    return s + c;
}

double norm(const Vec& v) {
    return std::sqrt(dot(v, v));
}

double squared_distance(const Vec& a, const Vec& b) {
    if (a.size() != b.size())
        throw data_error("squared_distance: dimension mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void axpy(Vec& a, double s, const Vec& b) {
    if (a.size() != b.size())
        throw data_error("axpy: dimension mismatch");
    for (size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
}

Vec l2_normalize(const Vec& v) {
    double n = norm(v);
    if (n < 1e-150)
        throw data_error("l2_normalize: zero-norm vector");
    Vec out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
    return out;
}

double cosine_sim(const Vec& a, const Vec& b) {
    if (a.size() != b.size())
        throw data_error("cosine_sim: dimension mismatch");
    double na = norm(a);
    double nb = norm(b);
    if (na < 1e-150 || nb < 1e-150)
        throw data_error("cosine_sim: zero-norm input");
    double c = dot(a, b) / (na * nb);
    return std::clamp(c, -1.0, 1.0);
}

Vec softmax(const Vec& v) {
    if (v.empty())
        throw data_error("softmax: empty input");
    double mx = *std::max_element(v.begin(), v.end());
    Vec out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = std::exp(v[i] - mx);
    double z = sum(out);
    for (auto& x : out) x /= z;
    return out;
}

Vec matvec(const Mat& w, const Vec& x) {
    if (w.cols != x.size())
        throw data_error("matvec: dimension mismatch");
    Vec y(w.rows, 0.0);
    const size_t n = w.cols;
    for (size_t r = 0; r < w.rows; ++r) {
        const double* row = w.values.data() + r * n;
        // four fixed-order partial sums; deterministic and vectorizable
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
        size_t c = 0;
        for (; c + 4 <= n; c += 4) {
            s0 += row[c] * x[c];
            s1 += row[c + 1] * x[c + 1];
            s2 += row[c + 2] * x[c + 2];
            s3 += row[c + 3] * x[c + 3];
        }
        for (; c < n; ++c) s0 += row[c] * x[c];
        y[r] = ((s0 + s1) + (s2 + s3));
    }
    return y;
}

Vec matvec_transpose(const Mat& w, const Vec& x) {
    if (w.rows != x.size())
        throw data_error("matvec_transpose: dimension mismatch");
    Vec y(w.cols, 0.0);
    for (size_t r = 0; r < w.rows; ++r) {
        const double* row = w.values.data() + r * w.cols;
        const double xr = x[r];
        for (size_t c = 0; c < w.cols; ++c) y[c] += row[c] * xr;
    }
    return y;
}

void add_outer(Mat& w, double s, const Vec& x, const Vec& y) {
    if (w.rows != x.size() || w.cols != y.size())
        throw data_error("add_outer: dimension mismatch");
    for (size_t r = 0; r < w.rows; ++r) {
        double* row = w.values.data() + r * w.cols;
        const double sx = s * x[r];
        for (size_t c = 0; c < w.cols; ++c) row[c] += sx * y[c];
    }
}

bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace mvq
