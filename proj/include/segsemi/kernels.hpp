#pragma once

#include <cstddef>

// Dense kernels behind the convolution and matrix-multiply graph ops.
//
// Two implementations share one contract: `serial` is the plain reference
// kept for testing; `omp` is the OpenMP version the graph uses. Each output
// element is accumulated in the same order in both, so with contraction
// disabled they agree bit for bit at any thread count.
//
// Sequences are time-major: x is [frames, in_channels]. Convolution weights
// are [taps, in_channels, out_channels] with symmetric zero padding, so tap j
// reads frame t + (j - (taps - 1) / 2) * dilation and output length equals
// input length.

namespace segsemi::kernels {

struct ConvGeometry {
  std::size_t frames = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t taps = 1;
  std::size_t dilation = 1;
};

namespace serial {

// out = conv(x, w) + bias; bias may be null.
template <class S>
void conv1d_forward(const ConvGeometry& g, const S* x, const S* w, const S* bias, S* out);
// grad_x += conv^T(grad_out, w)
template <class S>
void conv1d_backward_input(const ConvGeometry& g, const S* grad_out, const S* w, S* grad_x);
// grad_w += x (*) grad_out; grad_bias += column sums of grad_out (if non-null)
template <class S>
void conv1d_backward_weight(const ConvGeometry& g, const S* x, const S* grad_out, S* grad_w, S* grad_bias);

// c (+)= a[m,k] * b[k,n]
template <class S>
void gemm(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);
// c[m,n] += a[k,m]^T * b[k,n]
template <class S>
void gemm_at_b(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n);
// c[m,n] += a[m,k] * b[n,k]^T
template <class S>
void gemm_a_bt(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n);

}  // namespace serial

namespace omp {

template <class S>
void conv1d_forward(const ConvGeometry& g, const S* x, const S* w, const S* bias, S* out);
template <class S>
void conv1d_backward_input(const ConvGeometry& g, const S* grad_out, const S* w, S* grad_x);
template <class S>
void conv1d_backward_weight(const ConvGeometry& g, const S* x, const S* grad_out, S* grad_w, S* grad_bias);

template <class S>
void gemm(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n, bool accumulate);
template <class S>
void gemm_at_b(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n);
template <class S>
void gemm_a_bt(const S* a, const S* b, S* c, std::size_t m, std::size_t k, std::size_t n);

}  // namespace omp

// Caps the OpenMP worker count from SEGSEMI_THREADS when set. Returns the
// resulting cap.
int configure_threads_from_env();

}  // namespace segsemi::kernels
