#pragma once

#include <cstddef>
#include <vector>

namespace mvq {

using Vec = std::vector<double>;

// Row-major dense matrix.
struct Mat {
    size_t rows = 0;
    size_t cols = 0;
    Vec values;

    Mat() = default;
    Mat(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

    double& operator()(size_t r, size_t c) { return values[r * cols + c]; }
    double operator()(size_t r, size_t c) const { return values[r * cols + c]; }

    bool same_shape(const Mat& other) const {
        return rows == other.rows && cols == other.cols;
    }
};

// Compensated (Neumaier) summation; fixed left-to-right order.
double sum(const Vec& v);
double dot(const Vec& a, const Vec& b);

double norm(const Vec& v);
double squared_distance(const Vec& a, const Vec& b);

// In-place a += s * b.
void axpy(Vec& a, double s, const Vec& b);

Vec l2_normalize(const Vec& v);

// Cosine similarity in [-1, 1]. Errors on dimension mismatch or zero norm.
double cosine_sim(const Vec& a, const Vec& b);

// Max-shifted softmax; entries sum to 1. Errors on empty input.
Vec softmax(const Vec& v);

// y = W x  (W: m x n, x: n)
Vec matvec(const Mat& w, const Vec& x);
// y = W^T x  (W: m x n, x: m)
Vec matvec_transpose(const Mat& w, const Vec& x);
// W += s * x y^T  (x: m, y: n)
void add_outer(Mat& w, double s, const Vec& x, const Vec& y);

bool all_finite(const Vec& v);

}  // namespace mvq
