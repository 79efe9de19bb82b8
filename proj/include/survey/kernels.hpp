#pragma once

#include <cstddef>
#include <vector>

namespace survey::kernels {

using Vec = std::vector<double>;

// Row-major embedding matrix. Rows are appended once and never mutated.
struct Matrix {
    std::vector<double> data;
    std::size_t rows = 0;
    std::size_t dim = 0;

    Matrix() = default;
    explicit Matrix(std::size_t dimension) : dim(dimension) {}

    const double* row(std::size_t i) const { return data.data() + i * dim; }
    double* row(std::size_t i) { return data.data() + i * dim; }
    void push_row(const Vec& v);
    bool empty() const { return rows == 0; }
};

double dot(const double* a, const double* b, std::size_t n);
double norm(const double* a, std::size_t n);

// Normalizes in place. Returns false (vector left untouched) on zero norm.
bool normalize(double* a, std::size_t n);

// scores[i] = cos(query, m.row(i)); zero-norm rows score 0.
// The OpenMP version parallelizes over rows; each row's accumulation is
// serial, so results are bitwise identical to the serial reference.
std::vector<double> cosine_scores_serial(const Vec& query, const Matrix& m);
std::vector<double> cosine_scores(const Vec& query, const Matrix& m);

// Indices of the k largest scores, ordered by (score desc, index asc).
std::vector<std::size_t> top_k_indices(const std::vector<double>& scores, std::size_t k);

// Nearest centroid by cosine for each point; ties go to the lower centroid
// index. Parallel over points, bitwise identical to the serial reference.
std::vector<int> assign_to_centroids_serial(const Matrix& points, const Matrix& centroids);
std::vector<int> assign_to_centroids(const Matrix& points, const Matrix& centroids);

// Arithmetic mean of the rows assigned to each centroid, accumulated in row
// order (deterministic). Empty clusters yield zero vectors.
Matrix mean_by_assignment(const Matrix& points, const std::vector<int>& assignment, std::size_t k);

}  // namespace survey::kernels
