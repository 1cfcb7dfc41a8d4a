#pragma once

// Dense kernels in two flavours. `serial` is the reference path. `parallel`
// splits the output across OpenMP threads; every output cell is still reduced
// by exactly one thread in the same left-to-right order, so both flavours
// produce bitwise identical results.

#include <cstddef>

namespace aesl::kernels {

struct GemmShape {
  std::size_t m;  // rows of the output
  std::size_t k;  // reduction length
  std::size_t n;  // cols of the output
};

namespace serial {

/// c = a(m×k) · b(k×n)
void gemm(const double* a, const double* b, double* c, GemmShape s);
/// c = aᵀ · b, with a stored k×m
void gemm_tn(const double* a, const double* b, double* c, GemmShape s);
/// c = a · bᵀ, with b stored n×k
void gemm_nt(const double* a, const double* b, double* c, GemmShape s);
/// d(n×n) with d_ij = ‖x_i − x_j‖², x stored n×dim
void pairwise_sq_dist(const double* x, double* d, std::size_t n, std::size_t dim);

}  // namespace serial

namespace parallel {

void gemm(const double* a, const double* b, double* c, GemmShape s);
void gemm_tn(const double* a, const double* b, double* c, GemmShape s);
void gemm_nt(const double* a, const double* b, double* c, GemmShape s);
void pairwise_sq_dist(const double* x, double* d, std::size_t n, std::size_t dim);

}  // namespace parallel

/// Number of worker threads the parallel kernels may use (1 without OpenMP).
int max_threads();

// Dispatchers used by the rest of the library: pick the parallel flavour when
// the problem is large enough to amortise thread start-up.
void gemm(const double* a, const double* b, double* c, GemmShape s);
void gemm_tn(const double* a, const double* b, double* c, GemmShape s);
void gemm_nt(const double* a, const double* b, double* c, GemmShape s);
void pairwise_sq_dist(const double* x, double* d, std::size_t n, std::size_t dim);

}  // namespace aesl::kernels
