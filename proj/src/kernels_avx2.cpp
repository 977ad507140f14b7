// AVX2 kernel variants. This translation unit is compiled with -mavx2 and must
// only be entered after a runtime cpu_has_avx2() check. Tail elements use the
// same per-element expressions as the scalar reference so elementwise kernels
// stay bit-identical across variants.

#include <immintrin.h>

#include <cassert>
#include <limits>

#include "awpo/kernels.hpp"

namespace awpo::kernels::detail::avx2 {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

inline double hmax(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_max_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_max_sd(lo, sh));
}

}  // namespace

double sum(std::span<const double> x) {
  const double* p = x.data();
  std::size_t n = x.size();
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(p + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += p[i];
  return s;
}

double dot(std::span<const double> x, std::span<const double> y) {
  assert(x.size() == y.size());
  const double* px = x.data();
  const double* py = y.data();
  std::size_t n = x.size();
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(px + i),
                                           _mm256_loadu_pd(py + i)));
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += px[i] * py[i];
  return s;
}

double max_value(std::span<const double> x) {
  const double* p = x.data();
  std::size_t n = x.size();
  double m = -std::numeric_limits<double>::infinity();
  __m256d acc = _mm256_set1_pd(m);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, _mm256_loadu_pd(p + i));
  if (i > 0) m = hmax(acc);
  for (; i < n; ++i) m = p[i] > m ? p[i] : m;
  return m;
}

MeanVar mean_var(std::span<const double> x) {
  MeanVar mv;
  if (x.empty()) return mv;
  const double n = static_cast<double>(x.size());
  mv.mean = sum(x) / n;
  const double* p = x.data();
  const __m256d mean_vec = _mm256_set1_pd(mv.mean);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= x.size(); i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(p + i), mean_vec);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double ssd = hsum(acc);
  for (; i < x.size(); ++i) {
    const double d = p[i] - mv.mean;
    ssd += d * d;
  }
  mv.var = ssd / n;
  return mv;
}

double weighted_sumsq(std::span<const double> w, std::span<const double> v) {
  assert(w.size() == v.size());
  const double* pw = w.data();
  const double* pv = v.data();
  std::size_t n = w.size();
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vv = _mm256_loadu_pd(pv + i);
    acc = _mm256_add_pd(
        acc, _mm256_mul_pd(_mm256_loadu_pd(pw + i), _mm256_mul_pd(vv, vv)));
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += pw[i] * pv[i] * pv[i];
  return s;
}

void normalize(std::span<const double> x, double shift, double denom,
               std::span<double> out) {
  assert(x.size() == out.size());
  const double* p = x.data();
  double* po = out.data();
  const __m256d shift_vec = _mm256_set1_pd(shift);
  const __m256d denom_vec = _mm256_set1_pd(denom);
  std::size_t i = 0;
  for (; i + 4 <= x.size(); i += 4) {
    _mm256_storeu_pd(
        po + i,
        _mm256_div_pd(_mm256_sub_pd(_mm256_loadu_pd(p + i), shift_vec),
                      denom_vec));
  }
  for (; i < x.size(); ++i) po[i] = (p[i] - shift) / denom;
}

void blend(std::span<const double> a, std::span<const double> b, double w,
           double d, std::span<double> out) {
  assert(a.size() == b.size() && a.size() == out.size());
  const double wa = 1.0 - w;
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  const __m256d wa_vec = _mm256_set1_pd(wa);
  const __m256d w_vec = _mm256_set1_pd(w);
  const __m256d d_vec = _mm256_set1_pd(d);
  std::size_t i = 0;
  for (; i + 4 <= a.size(); i += 4) {
    const __m256d mix =
        _mm256_add_pd(_mm256_mul_pd(wa_vec, _mm256_loadu_pd(pa + i)),
                      _mm256_mul_pd(w_vec, _mm256_loadu_pd(pb + i)));
    _mm256_storeu_pd(po + i, _mm256_mul_pd(d_vec, mix));
  }
  for (; i < a.size(); ++i) po[i] = d * (wa * pa[i] + w * pb[i]);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  const double* px = x.data();
  double* py = y.data();
  const __m256d alpha_vec = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= x.size(); i += 4) {
    _mm256_storeu_pd(
        py + i, _mm256_add_pd(_mm256_loadu_pd(py + i),
                              _mm256_mul_pd(alpha_vec, _mm256_loadu_pd(px + i))));
  }
  for (; i < x.size(); ++i) py[i] += alpha * px[i];
}

double clip_objective_sum(std::span<const double> ratios,
                          std::span<const double> adv, double eps) {
  assert(ratios.size() == adv.size());
  const double lo = 1.0 - eps;
  const double hi = 1.0 + eps;
  const double* pr = ratios.data();
  const double* pa = adv.data();
  std::size_t n = ratios.size();
  const __m256d lo_vec = _mm256_set1_pd(lo);
  const __m256d hi_vec = _mm256_set1_pd(hi);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d r = _mm256_loadu_pd(pr + i);
    const __m256d a = _mm256_loadu_pd(pa + i);
    const __m256d rc = _mm256_min_pd(_mm256_max_pd(r, lo_vec), hi_vec);
    const __m256d term =
        _mm256_min_pd(_mm256_mul_pd(r, a), _mm256_mul_pd(rc, a));
    acc = _mm256_add_pd(acc, term);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double r = pr[i];
    const double rc = r < lo ? lo : (r > hi ? hi : r);
    const double t1 = r * pa[i];
    const double t2 = rc * pa[i];
    s += t1 < t2 ? t1 : t2;
  }
  return s;
}

}  // namespace awpo::kernels::detail::avx2
