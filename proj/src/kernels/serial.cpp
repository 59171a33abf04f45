#include "conv_offsets.hpp"
#include "segsemi/kernels.hpp"

namespace segsemi::kernels::serial {

template <class S>
void conv1d_forward(const ConvGeometry& g, const S* x, const S* w, const S* bias, S* out) {
  const std::size_t ci_n = g.in_channels, co_n = g.out_channels;
  for (std::size_t t = 0; t < g.frames; ++t) {
    S* o = out + t * co_n;
    for (std::size_t co = 0; co < co_n; ++co) o[co] = bias ? bias[co] : S{0};
    for (std::size_t j = 0; j < g.taps; ++j) {
      const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t) + detail::tap_offset(g, j);
      if (s < 0 || s >= static_cast<std::ptrdiff_t>(g.frames)) continue;
      const S* xs = x + static_cast<std::size_t>(s) * ci_n;
      for (std::size_t ci = 0; ci < ci_n; ++ci) {
        const S* wr = w + (j * ci_n + ci) * co_n;
        for (std::size_t co = 0; co < co_n; ++co) o[co] += xs[ci] * wr[co];
      }
    }
  }
}

template <class S>
void conv1d_backward_input(const ConvGeometry& g, const S* grad_out, const S* w, S* grad_x) {
  const std::size_t ci_n = g.in_channels, co_n = g.out_channels;
  for (std::size_t t = 0; t < g.frames; ++t) {
    const S* go = grad_out + t * co_n;
    for (std::size_t j = 0; j < g.taps; ++j) {
      const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t) + detail::tap_offset(g, j);
      if (s < 0 || s >= static_cast<std::ptrdiff_t>(g.frames)) continue;
      S* gx = grad_x + static_cast<std::size_t>(s) * ci_n;
      for (std::size_t ci = 0; ci < ci_n; ++ci) {
        const S* wr = w + (j * ci_n + ci) * co_n;
        for (std::size_t co = 0; co < co_n; ++co) gx[ci] += go[co] * wr[co];
      }
    }
  }
}

template <class S>
void conv1d_backward_weight(const ConvGeometry& g, const S* x, const S* grad_out, S* grad_w, S* grad_bias) {
  const std::size_t ci_n = g.in_channels, co_n = g.out_channels;
  for (std::size_t t = 0; t < g.frames; ++t) {
    const S* go = grad_out + t * co_n;
    if (grad_bias) {
      for (std::size_t co = 0; co < co_n; ++co) grad_bias[co] += go[co];
    }
    for (std::size_t j = 0; j < g.taps; ++j) {
      const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t) + detail::tap_offset(g, j);
      if (s < 0 || s >= static_cast<std::ptrdiff_t>(g.frames)) continue;
      const S* xs = x + static_cast<std::size_t>(s) * ci_n;
      for (std::size_t ci = 0; ci < ci_n; ++ci) {
        S* gw = grad_w + (j * ci_n + ci) * co_n;
        for (std::size_t co = 0; co < co_n; ++co) gw[co] += xs[ci] * go[co];
      }
    }
  }
}

template <class S>
void gemm(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    S* ci = c + i * n;
    if (!accumulate) {
      for (std::size_t j = 0; j < n; ++j) ci[j] = S{0};
    }
    for (std::size_t p = 0; p < k; ++p) {
      const S av = a[i * k + p];
      const S* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

template <class S>
void gemm_at_b(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const S* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const S av = a[p * m + i];
      S* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

template <class S>
void gemm_a_bt(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t p = 0; p < k; ++p) c[i * n + j] += a[i * k + p] * b[j * k + p];
    }
  }
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

}  // namespace segsemi::kernels::serial
