#include "survey/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "survey/errors.hpp"

namespace survey::kernels {

void Matrix::push_row(const Vec& v) {
    if (dim == 0) dim = v.size();
    if (v.size() != dim) throw ArgumentError("matrix row dim mismatch");
    data.insert(data.end(), v.begin(), v.end());
    ++rows;
}

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double norm(const double* a, std::size_t n) {
    return std::sqrt(dot(a, a, n));
}

bool normalize(double* a, std::size_t n) {
    double nrm = norm(a, n);
    if (nrm <= 0.0) return false;
    for (std::size_t i = 0; i < n; ++i) a[i] /= nrm;
    return true;
}

static inline double cosine_row(const Vec& query, double query_norm, const Matrix& m,
                                std::size_t i) {
    const double* r = m.row(i);
    double rn = norm(r, m.dim);
    if (rn <= 0.0 || query_norm <= 0.0) return 0.0;
    return dot(query.data(), r, m.dim) / (query_norm * rn);
}

std::vector<double> cosine_scores_serial(const Vec& query, const Matrix& m) {
    if (!m.empty() && query.size() != m.dim) throw ArgumentError("query dim mismatch");
    std::vector<double> scores(m.rows);
    double qn = norm(query.data(), query.size());
    for (std::size_t i = 0; i < m.rows; ++i) scores[i] = cosine_row(query, qn, m, i);
    return scores;
}

std::vector<double> cosine_scores(const Vec& query, const Matrix& m) {
    if (!m.empty() && query.size() != m.dim) throw ArgumentError("query dim mismatch");
    std::vector<double> scores(m.rows);
    double qn = norm(query.data(), query.size());
    const std::int64_t n = static_cast<std::int64_t>(m.rows);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        scores[static_cast<std::size_t>(i)] = cosine_row(query, qn, m, static_cast<std::size_t>(i));
    }
    return scores;
}

std::vector<std::size_t> top_k_indices(const std::vector<double>& scores, std::size_t k) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    k = std::min(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (scores[a] != scores[b]) return scores[a] > scores[b];
                          return a < b;
                      });
    idx.resize(k);
    return idx;
}

static inline int nearest_centroid(const Matrix& points, const Matrix& centroids, std::size_t i) {
    const double* p = points.row(i);
    double pn = norm(p, points.dim);
    int best = 0;
    double best_score = -2.0;
    for (std::size_t c = 0; c < centroids.rows; ++c) {
        const double* cv = centroids.row(c);
        double cn = norm(cv, centroids.dim);
        double s = (pn <= 0.0 || cn <= 0.0) ? 0.0 : dot(p, cv, points.dim) / (pn * cn);
        if (s > best_score) {
            best_score = s;
            best = static_cast<int>(c);
        }
    }
    return best;
}

std::vector<int> assign_to_centroids_serial(const Matrix& points, const Matrix& centroids) {
    if (centroids.empty()) throw ArgumentError("no centroids");
    if (points.dim != centroids.dim && !points.empty())
        throw ArgumentError("centroid dim mismatch");
    std::vector<int> assign(points.rows);
    for (std::size_t i = 0; i < points.rows; ++i) assign[i] = nearest_centroid(points, centroids, i);
    return assign;
}

std::vector<int> assign_to_centroids(const Matrix& points, const Matrix& centroids) {
    if (centroids.empty()) throw ArgumentError("no centroids");
    if (points.dim != centroids.dim && !points.empty())
        throw ArgumentError("centroid dim mismatch");
    std::vector<int> assign(points.rows);
    const std::int64_t n = static_cast<std::int64_t>(points.rows);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        assign[static_cast<std::size_t>(i)] =
            nearest_centroid(points, centroids, static_cast<std::size_t>(i));
    }
    return assign;
}

Matrix mean_by_assignment(const Matrix& points, const std::vector<int>& assignment, std::size_t k) {
    Matrix means(points.dim);
    means.rows = k;
    means.data.assign(k * points.dim, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.rows; ++i) {
        int c = assignment[i];
        const double* p = points.row(i);
        double* m = means.row(static_cast<std::size_t>(c));
        for (std::size_t d = 0; d < points.dim; ++d) m[d] += p[d];
        ++counts[static_cast<std::size_t>(c)];
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) continue;
        double* m = means.row(c);
        for (std::size_t d = 0; d < points.dim; ++d) m[d] /= static_cast<double>(counts[c]);
    }
    return means;
}

}  // namespace survey::kernels
