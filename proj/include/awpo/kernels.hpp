#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Numeric inner loops used by the advantage pipeline, the tabular policy and
// the bound verifiers. Every operation has a scalar reference implementation
// and, on x86-64, an AVX2 variant selected at runtime. Elementwise kernels are
// bit-identical between variants; reductions may differ in the last ulp from
// lane-wise accumulation order. Inputs are expected to be finite (no NaN
// handling).
namespace awpo::kernels {

enum class Isa { scalar, avx2 };

// Active variant, detected once at startup. The environment variable
// AWPO_KERNELS=scalar|avx2|auto overrides detection; requesting an
// unsupported level falls back to scalar.
Isa active();
void force(Isa isa);  // test hook; silently degrades to scalar if unsupported
bool cpu_has_avx2();
std::string_view isa_name(Isa isa);

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;  // population variance (divide by n)
};

double sum(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);
double max_value(std::span<const double> x);  // -inf on empty input
MeanVar mean_var(std::span<const double> x);  // two-pass population statistics
// sum_i w[i] * v[i]^2
double weighted_sumsq(std::span<const double> w, std::span<const double> v);

// out[i] = (x[i] - shift) / denom
void normalize(std::span<const double> x, double shift, double denom,
               std::span<double> out);
// out[i] = d * ((1 - w) * a[i] + w * b[i])
void blend(std::span<const double> a, std::span<const double> b, double w,
           double d, std::span<double> out);
// y[i] += alpha * x[i]
void axpy(double alpha, std::span<const double> x, std::span<double> y);
// sum_i min(r[i] * adv[i], clamp(r[i], 1-eps, 1+eps) * adv[i])
double clip_objective_sum(std::span<const double> ratios,
                          std::span<const double> adv, double eps);

// Max-subtracted softmax; out must have the same length as logits and may not
// alias it. The exp loop is scalar in both variants; max and normalization
// dispatch.
void softmax(std::span<const double> logits, std::span<double> out);

namespace detail::scalar {
double sum(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);
double max_value(std::span<const double> x);
MeanVar mean_var(std::span<const double> x);
double weighted_sumsq(std::span<const double> w, std::span<const double> v);
void normalize(std::span<const double> x, double shift, double denom,
               std::span<double> out);
void blend(std::span<const double> a, std::span<const double> b, double w,
           double d, std::span<double> out);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
double clip_objective_sum(std::span<const double> ratios,
                          std::span<const double> adv, double eps);
}  // namespace detail::scalar

#if defined(AWPO_BUILD_AVX2)
namespace detail::avx2 {
double sum(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);
double max_value(std::span<const double> x);
MeanVar mean_var(std::span<const double> x);
double weighted_sumsq(std::span<const double> w, std::span<const double> v);
void normalize(std::span<const double> x, double shift, double denom,
               std::span<double> out);
void blend(std::span<const double> a, std::span<const double> b, double w,
           double d, std::span<double> out);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
double clip_objective_sum(std::span<const double> ratios,
                          std::span<const double> adv, double eps);
}  // namespace detail::avx2
#endif

}  // namespace awpo::kernels
