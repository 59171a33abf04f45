#include <omp.h>

#include <cstdlib>
#include <string>
#include <vector>

#include "conv_offsets.hpp"
#include "segsemi/kernels.hpp"

namespace segsemi::kernels {

namespace {
// Below this many multiply-adds the fork/join costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;
}  // namespace

namespace omp {

template <class S>
void conv1d_forward(const ConvGeometry& g, const S* x, const S* w, const S* bias, S* out) {
  const std::size_t ci_n = g.in_channels, co_n = g.out_channels;
  const auto frames = static_cast<std::ptrdiff_t>(g.frames);
  const bool par = g.frames * g.taps * ci_n * co_n > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t t = 0; t < frames; ++t) {
    S* __restrict__ o = out + t * co_n;
    for (std::size_t co = 0; co < co_n; ++co) o[co] = bias ? bias[co] : S{0};
    for (std::size_t j = 0; j < g.taps; ++j) {
      const std::ptrdiff_t s = t + detail::tap_offset(g, j);
      if (s < 0 || s >= frames) continue;
      const S* xs = x + s * ci_n;
      for (std::size_t ci = 0; ci < ci_n; ++ci) {
        const S a = xs[ci];
        const S* __restrict__ wr = w + (j * ci_n + ci) * co_n;
#pragma omp simd
        for (std::size_t co = 0; co < co_n; ++co) o[co] += a * wr[co];
      }
    }
  }
}

template <class S>
void conv1d_backward_input(const ConvGeometry& g, const S* grad_out, const S* w, S* grad_x) {
  const std::size_t ci_n = g.in_channels, co_n = g.out_channels;
  // [taps, out, in] copy so the inner loop runs along input channels.
  std::vector<S> wt(g.taps * co_n * ci_n);
  for (std::size_t j = 0; j < g.taps; ++j)
    for (std::size_t ci = 0; ci < ci_n; ++ci)
      for (std::size_t co = 0; co < co_n; ++co) wt[(j * co_n + co) * ci_n + ci] = w[(j * ci_n + ci) * co_n + co];

  const auto frames = static_cast<std::ptrdiff_t>(g.frames);
  const bool par = g.frames * g.taps * ci_n * co_n > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t s = 0; s < frames; ++s) {
    S* __restrict__ gx = grad_x + s * ci_n;
    // Descending taps visit source frames t = s - offset in ascending order,
    // matching the serial accumulation order.
    for (std::size_t jj = g.taps; jj-- > 0;) {
      const std::ptrdiff_t t = s - detail::tap_offset(g, jj);
      if (t < 0 || t >= frames) continue;
      const S* go = grad_out + t * co_n;
      for (std::size_t co = 0; co < co_n; ++co) {
        const S a = go[co];
        const S* __restrict__ wr = wt.data() + (jj * co_n + co) * ci_n;
#pragma omp simd
        for (std::size_t ci = 0; ci < ci_n; ++ci) gx[ci] += a * wr[ci];
      }
    }
  }
}

template <class S>
void conv1d_backward_weight(const ConvGeometry& g, const S* x, const S* grad_out, S* grad_w, S* grad_bias) {
  const std::size_t ci_n = g.in_channels, co_n = g.out_channels;
  if (grad_bias) {
    for (std::size_t t = 0; t < g.frames; ++t) {
      const S* go = grad_out + t * co_n;
      for (std::size_t co = 0; co < co_n; ++co) grad_bias[co] += go[co];
    }
  }
  const auto rows = static_cast<std::ptrdiff_t>(g.taps * ci_n);
  const bool par = g.frames * g.taps * ci_n * co_n > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t j = static_cast<std::size_t>(r) / ci_n;
    const std::size_t ci = static_cast<std::size_t>(r) % ci_n;
    const auto off = detail::tap_offset(g, j);
    const auto range = detail::valid_range(g, off);
    S* __restrict__ gw = grad_w + r * co_n;
    for (std::size_t t = range.begin; t < range.end; ++t) {
      const S a = x[(t + off) * ci_n + ci];
      const S* __restrict__ go = grad_out + t * co_n;
#pragma omp simd
      for (std::size_t co = 0; co < co_n; ++co) gw[co] += a * go[co];
    }
  }
}

template <class S>
void gemm(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  const bool par = m * k * n > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    S* __restrict__ ci = c + i * n;
    if (!accumulate) {
      for (std::size_t j = 0; j < n; ++j) ci[j] = S{0};
    }
    for (std::size_t p = 0; p < k; ++p) {
      const S av = a[i * k + p];
      const S* __restrict__ bp = b + p * n;
#pragma omp simd
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

template <class S>
void gemm_at_b(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n) {
  const bool par = m * k * n > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    S* __restrict__ ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const S av = a[p * m + i];
      const S* __restrict__ bp = b + p * n;
#pragma omp simd
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

template <class S>
void gemm_a_bt(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n) {
  std::vector<S> bt(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  gemm(a, bt.data(), c, m, k, n, true);
}

#define SEGSEMI_INSTANTIATE(S)                                                                          \
  template void conv1d_forward<S>(const ConvGeometry&, const S*, const S*, const S*, S*);               \
  template void conv1d_backward_input<S>(const ConvGeometry&, const S*, const S*, S*);                  \
  template void conv1d_backward_weight<S>(const ConvGeometry&, const S*, const S*, S*, S*);             \
  template void gemm<S>(const S*, const S*, S*, std::size_t, std::size_t, std::size_t, bool);           \
  template void gemm_at_b<S>(const S*, const S*, S*, std::size_t, std::size_t, std::size_t);            \
  template void gemm_a_bt<S>(const S*, const S*, S*, std::size_t, std::size_t, std::size_t);

SEGSEMI_INSTANTIATE(float)
SEGSEMI_INSTANTIATE(double)
#undef SEGSEMI_INSTANTIATE

}  // namespace omp

int configure_threads_from_env() {
  if (const char* env = std::getenv("SEGSEMI_THREADS"); env && *env) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) omp_set_num_threads(n);
    } catch (const std::exception&) {
      // Unparseable values leave the OpenMP default in place.
    }
  }
  return omp_get_max_threads();
}

}  // namespace segsemi::kernels
