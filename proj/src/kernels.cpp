#include "aesl/kernels.hpp"

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace aesl::kernels {

namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelWork = std::size_t{1} << 15;

using Index = std::int64_t;

}  // namespace

namespace serial {

void gemm(const double* a, const double* b, double* c, GemmShape s) {
  for (std::size_t i = 0; i < s.m; ++i) {
    for (std::size_t j = 0; j < s.n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < s.k; ++p) acc += a[i * s.k + p] * b[p * s.n + j];
      c[i * s.n + j] = acc;
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, GemmShape s) {
  for (std::size_t i = 0; i < s.m; ++i) {
    for (std::size_t j = 0; j < s.n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < s.k; ++p) acc += a[p * s.m + i] * b[p * s.n + j];
      c[i * s.n + j] = acc;
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, GemmShape s) {
  for (std::size_t i = 0; i < s.m; ++i) {
    for (std::size_t j = 0; j < s.n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < s.k; ++p) acc += a[i * s.k + p] * b[j * s.k + p];
      c[i * s.n + j] = acc;
    }
  }
}

void pairwise_sq_dist(const double* x, double* d, std::size_t n, std::size_t dim) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < dim; ++p) {
        const double diff = x[i * dim + p] - x[j * dim + p];
        acc += diff * diff;
      }
      d[i * n + j] = acc;
    }
  }
}

}  // namespace serial

namespace parallel {

void gemm(const double* a, const double* b, double* c, GemmShape s) {
  const Index m = static_cast<Index>(s.m);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < s.n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < s.k; ++p) acc += a[i * s.k + p] * b[p * s.n + j];
      c[i * s.n + j] = acc;
    }
  }
}

void gemm_tn(const double* a, const double* b, double* c, GemmShape s) {
  const Index m = static_cast<Index>(s.m);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < s.n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < s.k; ++p) acc += a[p * s.m + i] * b[p * s.n + j];
      c[i * s.n + j] = acc;
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, GemmShape s) {
  const Index m = static_cast<Index>(s.m);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < s.n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < s.k; ++p) acc += a[i * s.k + p] * b[j * s.k + p];
      c[i * s.n + j] = acc;
    }
  }
}

void pairwise_sq_dist(const double* x, double* d, std::size_t n, std::size_t dim) {
  const Index rows = static_cast<Index>(n);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < dim; ++p) {
        const double diff = x[i * dim + p] - x[j * dim + p];
        acc += diff * diff;
      }
      d[i * n + j] = acc;
    }
  }
}

}  // namespace parallel

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {
bool worth_parallel(std::size_t work) { return work >= kParallelWork && max_threads() > 1; }
}  // namespace

void gemm(const double* a, const double* b, double* c, GemmShape s) {
  if (worth_parallel(s.m * s.k * s.n))
    parallel::gemm(a, b, c, s);
  else
    serial::gemm(a, b, c, s);
}

void gemm_tn(const double* a, const double* b, double* c, GemmShape s) {
  if (worth_parallel(s.m * s.k * s.n))
    parallel::gemm_tn(a, b, c, s);
  else
    serial::gemm_tn(a, b, c, s);
}

void gemm_nt(const double* a, const double* b, double* c, GemmShape s) {
  if (worth_parallel(s.m * s.k * s.n))
    parallel::gemm_nt(a, b, c, s);
  else
    serial::gemm_nt(a, b, c, s);
}

void pairwise_sq_dist(const double* x, double* d, std::size_t n, std::size_t dim) {
  if (worth_parallel(n * n * dim))
    parallel::pairwise_sq_dist(x, d, n, dim);
  else
    serial::pairwise_sq_dist(x, d, n, dim);
}

}  // namespace aesl::kernels
