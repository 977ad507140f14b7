#include "awpo/kernels.hpp"

#include <atomic>
#include <cassert>
#include <cmath>
#include <cstdlib>
#include <limits>

namespace awpo::kernels {

namespace detail::scalar {

double sum(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s;
}

double dot(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double max_value(std::span<const double> x) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : x) m = v > m ? v : m;
  return m;
}

MeanVar mean_var(std::span<const double> x) {
  MeanVar mv;
  if (x.empty()) return mv;
  const double n = static_cast<double>(x.size());
  mv.mean = sum(x) / n;
  double ssd = 0.0;
  for (double v : x) {
    const double d = v - mv.mean;
    ssd += d * d;
  }
  mv.var = ssd / n;
  return mv;
}

double weighted_sumsq(std::span<const double> w, std::span<const double> v) {
  assert(w.size() == v.size());
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * v[i] * v[i];
  return s;
}

void normalize(std::span<const double> x, double shift, double denom,
               std::span<double> out) {
  assert(x.size() == out.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - shift) / denom;
}

void blend(std::span<const double> a, std::span<const double> b, double w,
           double d, std::span<double> out) {
  assert(a.size() == b.size() && a.size() == out.size());
  const double wa = 1.0 - w;
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = d * (wa * a[i] + w * b[i]);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double clip_objective_sum(std::span<const double> ratios,
                          std::span<const double> adv, double eps) {
  assert(ratios.size() == adv.size());
  const double lo = 1.0 - eps;
  const double hi = 1.0 + eps;
  double s = 0.0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const double r = ratios[i];
    const double rc = r < lo ? lo : (r > hi ? hi : r);
    const double t1 = r * adv[i];
    const double t2 = rc * adv[i];
    s += t1 < t2 ? t1 : t2;
  }
  return s;
}

}  // namespace detail::scalar

namespace {

Isa detect() {
#if defined(AWPO_BUILD_AVX2)
  if (const char* env = std::getenv("AWPO_KERNELS")) {
    const std::string_view e{env};
    if (e == "scalar") return Isa::scalar;
    if (e == "avx2") return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
    // anything else (including "auto") falls through to detection
  }
  return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
#else
  return Isa::scalar;
#endif
}

std::atomic<Isa> g_isa{detect()};

}  // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") != 0;
#else
  return false;
#endif
}

Isa active() { return g_isa.load(std::memory_order_relaxed); }

void force(Isa isa) {
  if (isa == Isa::avx2 && !cpu_has_avx2()) isa = Isa::scalar;
#if !defined(AWPO_BUILD_AVX2)
  isa = Isa::scalar;
#endif
  g_isa.store(isa, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

#if defined(AWPO_BUILD_AVX2)
#define AWPO_DISPATCH(fn, ...)                              \
  do {                                                      \
    if (g_isa.load(std::memory_order_relaxed) == Isa::avx2) \
      return detail::avx2::fn(__VA_ARGS__);                 \
    return detail::scalar::fn(__VA_ARGS__);                 \
  } while (0)
#else
#define AWPO_DISPATCH(fn, ...) return detail::scalar::fn(__VA_ARGS__)
#endif

double sum(std::span<const double> x) { AWPO_DISPATCH(sum, x); }

double dot(std::span<const double> x, std::span<const double> y) {
  AWPO_DISPATCH(dot, x, y);
}

double max_value(std::span<const double> x) { AWPO_DISPATCH(max_value, x); }

MeanVar mean_var(std::span<const double> x) { AWPO_DISPATCH(mean_var, x); }

double weighted_sumsq(std::span<const double> w, std::span<const double> v) {
  AWPO_DISPATCH(weighted_sumsq, w, v);
}

void normalize(std::span<const double> x, double shift, double denom,
               std::span<double> out) {
  AWPO_DISPATCH(normalize, x, shift, denom, out);
}

void blend(std::span<const double> a, std::span<const double> b, double w,
           double d, std::span<double> out) {
  AWPO_DISPATCH(blend, a, b, w, d, out);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  AWPO_DISPATCH(axpy, alpha, x, y);
}

double clip_objective_sum(std::span<const double> ratios,
                          std::span<const double> adv, double eps) {
  AWPO_DISPATCH(clip_objective_sum, ratios, adv, eps);
}

#undef AWPO_DISPATCH

void softmax(std::span<const double> logits, std::span<double> out) {
  assert(logits.size() == out.size());
  if (logits.empty()) return;
  const double m = max_value(logits);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = std::exp(logits[i] - m);
  const double z = sum(out);
  normalize(out, 0.0, z, out);
}

}  // namespace awpo::kernels
