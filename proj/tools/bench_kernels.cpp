// Compares the OpenMP kernels against the serial reference implementations
// and checks that both produce identical results.

#include <chrono>
#include <cstdio>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "survey/kernels.hpp"
#include "survey/util.hpp"

using namespace survey;

namespace {

kernels::Matrix random_matrix(std::size_t rows, std::size_t dim, std::uint64_t seed) {
    kernels::Matrix m(dim);
    std::uint64_t state = seed;
    for (std::size_t r = 0; r < rows; ++r) {
        kernels::Vec v(dim);
        for (std::size_t d = 0; d < dim; ++d) {
            v[d] = static_cast<double>(util::splitmix64(state) >> 11) *
                       (1.0 / 4503599627370496.0) -
                   1.0;
        }
        m.push_row(v);
    }
    return m;
}

template <typename F>
double time_ms(F&& fn, int reps) {
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

}  // namespace

int main(int argc, char** argv) {
    std::size_t rows = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 50000;
    std::size_t dim = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 128;
    std::size_t centroids_n = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 32;
    int reps = 5;

#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (OpenMP disabled)\n");
#endif
    std::printf("rows=%zu dim=%zu centroids=%zu reps=%d\n\n", rows, dim, centroids_n, reps);

    auto points = random_matrix(rows, dim, 1);
    auto centroids = random_matrix(centroids_n, dim, 2);
    kernels::Vec query(points.row(0), points.row(0) + dim);

    auto scores_serial = kernels::cosine_scores_serial(query, points);
    auto scores_par = kernels::cosine_scores(query, points);
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < scores_serial.size(); ++i) {
        if (scores_serial[i] != scores_par[i]) ++mismatches;
    }

    double t_serial = time_ms([&] { kernels::cosine_scores_serial(query, points); }, reps);
    double t_par = time_ms([&] { kernels::cosine_scores(query, points); }, reps);
    std::printf("cosine_scores   serial %8.2f ms   omp %8.2f ms   speedup %.2fx   mismatches %zu\n",
                t_serial, t_par, t_serial / t_par, mismatches);

    auto assign_serial = kernels::assign_to_centroids_serial(points, centroids);
    auto assign_par = kernels::assign_to_centroids(points, centroids);
    mismatches = 0;
    for (std::size_t i = 0; i < assign_serial.size(); ++i) {
        if (assign_serial[i] != assign_par[i]) ++mismatches;
    }

    double a_serial = time_ms([&] { kernels::assign_to_centroids_serial(points, centroids); }, reps);
    double a_par = time_ms([&] { kernels::assign_to_centroids(points, centroids); }, reps);
    std::printf("assign          serial %8.2f ms   omp %8.2f ms   speedup %.2fx   mismatches %zu\n",
                a_serial, a_par, a_serial / a_par, mismatches);

    return mismatches == 0 ? 0 : 1;
}
