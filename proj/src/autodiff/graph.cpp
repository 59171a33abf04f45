#include "segsemi/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "segsemi/kernels.hpp"

namespace segsemi {

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace {

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

template <class S>
void require_matrix(const char* op, const char* what, const Tensor<S>& t) {
  if (t.ndim() != 2) shape_fail(op, std::string(what) + " must be 2-D, got " + shape_string(t.shape()));
}

template <class S>
void add_into(Tensor<S>& dst, const Tensor<S>& src) {
  S* d = dst.data();
  const S* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

}  // namespace

template <class S>
const typename Graph<S>::Node& Graph<S>::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw InvalidArgument("graph: invalid node handle");
  return nodes_[v.id];
}

template <class S>
typename Graph<S>::Node& Graph<S>::node(Var v) {
  if (!v.valid() || v.id >= nodes_.size()) throw InvalidArgument("graph: invalid node handle");
  return nodes_[v.id];
}

template <class S>
Tensor<S>& Graph<S>::grad_buffer(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor<S>(n.value.shape());
  return n.grad;
}

template <class S>
Var Graph<S>::push(Tensor<S> value, bool requires_grad, std::function<void(Graph&, const Tensor<S>&)> backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = record_ && requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <class S>
Var Graph<S>::constant(Tensor<S> value) {
  return push(std::move(value), false, nullptr);
}

template <class S>
Var Graph<S>::parameter(Parameter<S>& p) {
  Var v = push(p.value, true, nullptr);
  if (record_) nodes_[v.id].param = &p;
  return v;
}

template <class S>
Var Graph<S>::detach(Var x) {
  return push(node(x).value, false, nullptr);
}

template <class S>
Var Graph<S>::conv1d(Var x, Var w, Var bias, std::size_t dilation) {
  const auto& xv = node(x).value;
  const auto& wv = node(w).value;
  require_matrix("conv1d", "input", xv);
  if (wv.ndim() != 3) shape_fail("conv1d", "weight must be [taps, in, out], got " + shape_string(wv.shape()));
  if (wv.dim(0) % 2 == 0) shape_fail("conv1d", "tap count must be odd, got " + std::to_string(wv.dim(0)));
  if (wv.dim(1) != xv.cols()) {
    shape_fail("conv1d", "input has " + std::to_string(xv.cols()) + " channels but weight expects " +
                             std::to_string(wv.dim(1)));
  }
  if (dilation == 0) shape_fail("conv1d", "dilation must be >= 1");
  const S* bptr = nullptr;
  if (bias.valid()) {
    const auto& bv = node(bias).value;
    if (bv.size() != wv.dim(2)) {
      shape_fail("conv1d", "bias has " + std::to_string(bv.size()) + " entries but weight has " +
                               std::to_string(wv.dim(2)) + " outputs");
    }
    bptr = bv.data();
  }
  kernels::ConvGeometry geo{xv.rows(), wv.dim(1), wv.dim(2), wv.dim(0), dilation};
  Tensor<S> out = Tensor<S>::matrix(geo.frames, geo.out_channels);
  kernels::omp::conv1d_forward(geo, xv.data(), wv.data(), bptr, out.data());

  const bool rg = needs(x) || needs(w) || needs(bias);
  return push(std::move(out), rg, [x, w, bias, geo](Graph& g, const Tensor<S>& gout) {
    if (g.needs(x)) {
      kernels::omp::conv1d_backward_input(geo, gout.data(), g.nodes_[w.id].value.data(), g.grad_buffer(x.id).data());
    }
    if (g.needs(w) || g.needs(bias)) {
      S* gb = nullptr;
      Tensor<S> scratch_b;
      if (bias.valid()) {
        if (g.needs(bias)) {
          gb = g.grad_buffer(bias.id).data();
        } else {
          scratch_b = Tensor<S>({geo.out_channels});
          gb = scratch_b.data();
        }
      }
      Tensor<S> scratch_w;
      S* gw;
      if (g.needs(w)) {
        gw = g.grad_buffer(w.id).data();
      } else {
        scratch_w = Tensor<S>(g.nodes_[w.id].value.shape());
        gw = scratch_w.data();
      }
      kernels::omp::conv1d_backward_weight(geo, g.nodes_[x.id].value.data(), gout.data(), gw, gb);
    }
  });
}

template <class S>
Var Graph<S>::matmul(Var a, Var b) {
  const auto& av = node(a).value;
  const auto& bv = node(b).value;
  require_matrix("matmul", "lhs", av);
  require_matrix("matmul", "rhs", bv);
  if (av.cols() != bv.rows()) {
    shape_fail("matmul", "lhs " + shape_string(av.shape()) + " and rhs " + shape_string(bv.shape()) +
                             " disagree on the inner dimension");
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor<S> out = Tensor<S>::matrix(m, n);
  kernels::omp::gemm(av.data(), bv.data(), out.data(), m, k, n, false);
  return push(std::move(out), needs(a) || needs(b), [a, b, m, k, n](Graph& g, const Tensor<S>& gout) {
    if (g.needs(a)) {
      kernels::omp::gemm_a_bt(gout.data(), g.nodes_[b.id].value.data(), g.grad_buffer(a.id).data(), m, n, k);
    }
    if (g.needs(b)) {
      kernels::omp::gemm_at_b(g.nodes_[a.id].value.data(), gout.data(), g.grad_buffer(b.id).data(), k, m, n);
    }
  });
}

template <class S>
Var Graph<S>::transpose(Var a) {
  const auto& av = node(a).value;
  require_matrix("transpose", "input", av);
  const std::size_t m = av.rows(), n = av.cols();
  Tensor<S> out = Tensor<S>::matrix(n, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(j, i) = av(i, j);
  return push(std::move(out), needs(a), [a, m, n](Graph& g, const Tensor<S>& gout) {
    auto& ga = g.grad_buffer(a.id);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga(i, j) += gout(j, i);
  });
}

template <class S>
Var Graph<S>::add(Var a, Var b) {
  const auto& av = node(a).value;
  const auto& bv = node(b).value;
  if (av.shape() != bv.shape()) {
    shape_fail("add", "operands " + shape_string(av.shape()) + " and " + shape_string(bv.shape()) + " differ");
  }
  Tensor<S> out = av;
  add_into(out, bv);
  return push(std::move(out), needs(a) || needs(b), [a, b](Graph& g, const Tensor<S>& gout) {
    if (g.needs(a)) add_into(g.grad_buffer(a.id), gout);
    if (g.needs(b)) add_into(g.grad_buffer(b.id), gout);
  });
}

template <class S>
Var Graph<S>::add_row(Var x, Var row) {
  const auto& xv = node(x).value;
  const auto& rv = node(row).value;
  require_matrix("add_row", "input", xv);
  if (rv.size() != xv.cols()) {
    shape_fail("add_row", "row " + shape_string(rv.shape()) + " does not match " + std::to_string(xv.cols()) +
                              " columns of " + shape_string(xv.shape()));
  }
  Tensor<S> out = xv;
  const std::size_t m = xv.rows(), n = xv.cols();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) += rv[j];
  return push(std::move(out), needs(x) || needs(row), [x, row, m, n](Graph& g, const Tensor<S>& gout) {
    if (g.needs(x)) add_into(g.grad_buffer(x.id), gout);
    if (g.needs(row)) {
      auto& gr = g.grad_buffer(row.id);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gr[j] += gout(i, j);
    }
  });
}

template <class S>
Var Graph<S>::mul(Var a, Var b) {
  const auto& av = node(a).value;
  const auto& bv = node(b).value;
  if (av.shape() != bv.shape()) {
    shape_fail("mul", "operands " + shape_string(av.shape()) + " and " + shape_string(bv.shape()) + " differ");
  }
  Tensor<S> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return push(std::move(out), needs(a) || needs(b), [a, b](Graph& g, const Tensor<S>& gout) {
    if (g.needs(a)) {
      auto& ga = g.grad_buffer(a.id);
      const auto& bv = g.nodes_[b.id].value;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gout[i] * bv[i];
    }
    if (g.needs(b)) {
      auto& gb = g.grad_buffer(b.id);
      const auto& av = g.nodes_[a.id].value;
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gout[i] * av[i];
    }
  });
}

template <class S>
Var Graph<S>::scale(Var a, S factor) {
  Tensor<S> out = node(a).value;
  for (auto& v : out.values()) v *= factor;
  return push(std::move(out), needs(a), [a, factor](Graph& g, const Tensor<S>& gout) {
    auto& ga = g.grad_buffer(a.id);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gout[i] * factor;
  });
}

template <class S>
Var Graph<S>::sum(Var x) {
  const auto& xv = node(x).value;
  S total{0};
  for (S v : xv.values()) total += v;
  return push(Tensor<S>({1}, total), needs(x), [x](Graph& g, const Tensor<S>& gout) {
    auto& gx = g.grad_buffer(x.id);
    for (auto& v : gx.values()) v += gout[0];
  });
}

template <class S>
Var Graph<S>::relu(Var x) {
  Tensor<S> out = node(x).value;
  for (auto& v : out.values()) v = v > S{0} ? v : S{0};
  return push(std::move(out), needs(x), [x](Graph& g, const Tensor<S>& gout) {
    auto& gx = g.grad_buffer(x.id);
    const auto& xv = g.nodes_[x.id].value;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += xv[i] > S{0} ? gout[i] : S{0};
  });
}

template <class S>
Var Graph<S>::sigmoid(Var x) {
  Tensor<S> out = node(x).value;
  for (auto& v : out.values()) v = S{1} / (S{1} + std::exp(-v));
  Var y = push(std::move(out), needs(x), nullptr);
  if (nodes_[y.id].requires_grad) {
    nodes_[y.id].backward = [x, y](Graph& g, const Tensor<S>& gout) {
      auto& gx = g.grad_buffer(x.id);
      const auto& yv = g.nodes_[y.id].value;
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gout[i] * yv[i] * (S{1} - yv[i]);
    };
  }
  return y;
}

template <class S>
Var Graph<S>::tanh(Var x) {
  Tensor<S> out = node(x).value;
  for (auto& v : out.values()) v = std::tanh(v);
  Var y = push(std::move(out), needs(x), nullptr);
  if (nodes_[y.id].requires_grad) {
    nodes_[y.id].backward = [x, y](Graph& g, const Tensor<S>& gout) {
      auto& gx = g.grad_buffer(x.id);
      const auto& yv = g.nodes_[y.id].value;
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gout[i] * (S{1} - yv[i] * yv[i]);
    };
  }
  return y;
}

template <class S>
Var Graph<S>::dropout(Var x, S rate, std::mt19937_64& rng) {
  if (rate <= S{0}) return x;
  if (rate >= S{1}) throw InvalidArgument("dropout: rate must be < 1");
  const auto& xv = node(x).value;
  const S keep_scale = S{1} / (S{1} - rate);
  std::vector<S> mask(xv.size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& m : mask) m = unit(rng) < static_cast<double>(rate) ? S{0} : keep_scale;
  Tensor<S> out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return push(std::move(out), needs(x), [x, mask = std::move(mask)](Graph& g, const Tensor<S>& gout) {
    auto& gx = g.grad_buffer(x.id);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gout[i] * mask[i];
  });
}

template <class S>
Var Graph<S>::softmax(Var x) {
  const auto& xv = node(x).value;
  require_matrix("softmax", "input", xv);
  Tensor<S> out = xv;
  const std::size_t m = xv.rows(), n = xv.cols();
  for (std::size_t i = 0; i < m; ++i) {
    auto r = out.row(i);
    const S mx = *std::max_element(r.begin(), r.end());
    S z{0};
    for (auto& v : r) z += (v = std::exp(v - mx));
    for (auto& v : r) v /= z;
  }
  Var y = push(std::move(out), needs(x), nullptr);
  if (nodes_[y.id].requires_grad) {
    nodes_[y.id].backward = [x, y, m, n](Graph& g, const Tensor<S>& gout) {
      auto& gx = g.grad_buffer(x.id);
      const auto& yv = g.nodes_[y.id].value;
      for (std::size_t i = 0; i < m; ++i) {
        S dot{0};
        for (std::size_t j = 0; j < n; ++j) dot += gout(i, j) * yv(i, j);
        for (std::size_t j = 0; j < n; ++j) gx(i, j) += yv(i, j) * (gout(i, j) - dot);
      }
    };
  }
  return y;
}

template <class S>
Var Graph<S>::log_softmax(Var x) {
  const auto& xv = node(x).value;
  require_matrix("log_softmax", "input", xv);
  Tensor<S> out = xv;
  const std::size_t m = xv.rows(), n = xv.cols();
  for (std::size_t i = 0; i < m; ++i) {
    auto r = out.row(i);
    const S mx = *std::max_element(r.begin(), r.end());
    S z{0};
    for (S v : r) z += std::exp(v - mx);
    const S lse = mx + std::log(z);
    for (auto& v : r) v -= lse;
  }
  Var y = push(std::move(out), needs(x), nullptr);
  if (nodes_[y.id].requires_grad) {
    nodes_[y.id].backward = [x, y, m, n](Graph& g, const Tensor<S>& gout) {
      auto& gx = g.grad_buffer(x.id);
      const auto& yv = g.nodes_[y.id].value;
      for (std::size_t i = 0; i < m; ++i) {
        S total{0};
        for (std::size_t j = 0; j < n; ++j) total += gout(i, j);
        for (std::size_t j = 0; j < n; ++j) gx(i, j) += gout(i, j) - std::exp(yv(i, j)) * total;
      }
    };
  }
  return y;
}

template <class S>
Var Graph<S>::segment_max_pool(Var x, std::vector<RowRange> ranges) {
  const auto& xv = node(x).value;
  require_matrix("segment_max_pool", "input", xv);
  const std::size_t n = xv.cols();
  Tensor<S> out = Tensor<S>::matrix(ranges.size(), n);
  std::vector<std::size_t> arg(ranges.size() * n);
  for (std::size_t k = 0; k < ranges.size(); ++k) {
    const auto [b, e] = ranges[k];
    if (b >= e || e > xv.rows()) {
      shape_fail("segment_max_pool", "range [" + std::to_string(b) + ", " + std::to_string(e) +
                                         ") is empty or exceeds " + std::to_string(xv.rows()) + " rows");
    }
    for (std::size_t c = 0; c < n; ++c) {
      std::size_t best = b;
      for (std::size_t r = b + 1; r < e; ++r) {
        if (xv(r, c) > xv(best, c)) best = r;
      }
      out(k, c) = xv(best, c);
      arg[k * n + c] = best;
    }
  }
  return push(std::move(out), needs(x), [x, n, arg = std::move(arg)](Graph& g, const Tensor<S>& gout) {
    auto& gx = g.grad_buffer(x.id);
    for (std::size_t i = 0; i < arg.size(); ++i) gx(arg[i], i % n) += gout[i];
  });
}

template <class S>
Var Graph<S>::concat_cols(Var a, Var b) {
  const auto& av = node(a).value;
  const auto& bv = node(b).value;
  require_matrix("concat_cols", "lhs", av);
  require_matrix("concat_cols", "rhs", bv);
  if (av.rows() != bv.rows()) {
    shape_fail("concat_cols", "row counts differ: " + shape_string(av.shape()) + " vs " + shape_string(bv.shape()));
  }
  const std::size_t m = av.rows(), na = av.cols(), nb = bv.cols();
  Tensor<S> out = Tensor<S>::matrix(m, na + nb);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(av.data() + i * na, na, out.data() + i * (na + nb));
    std::copy_n(bv.data() + i * nb, nb, out.data() + i * (na + nb) + na);
  }
  return push(std::move(out), needs(a) || needs(b), [a, b, m, na, nb](Graph& g, const Tensor<S>& gout) {
    if (g.needs(a)) {
      auto& ga = g.grad_buffer(a.id);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < na; ++j) ga(i, j) += gout(i, j);
    }
    if (g.needs(b)) {
      auto& gb = g.grad_buffer(b.id);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < nb; ++j) gb(i, j) += gout(i, na + j);
    }
  });
}

template <class S>
Var Graph<S>::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) shape_fail("concat_rows", "no inputs");
  const std::size_t n = node(parts[0]).value.cols();
  std::size_t m = 0;
  bool rg = false;
  for (Var p : parts) {
    const auto& pv = node(p).value;
    require_matrix("concat_rows", "part", pv);
    if (pv.cols() != n) {
      shape_fail("concat_rows", "column counts differ: " + std::to_string(n) + " vs " + std::to_string(pv.cols()));
    }
    m += pv.rows();
    rg = rg || needs(p);
  }
  Tensor<S> out = Tensor<S>::matrix(m, n);
  std::size_t off = 0;
  for (Var p : parts) {
    const auto& pv = node(p).value;
    std::copy(pv.values().begin(), pv.values().end(), out.data() + off);
    off += pv.size();
  }
  std::vector<Var> ids(parts.begin(), parts.end());
  return push(std::move(out), rg, [ids = std::move(ids)](Graph& g, const Tensor<S>& gout) {
    std::size_t off = 0;
    for (Var p : ids) {
      const std::size_t len = g.nodes_[p.id].value.size();
      if (g.needs(p)) {
        auto& gp = g.grad_buffer(p.id);
        for (std::size_t i = 0; i < len; ++i) gp[i] += gout[off + i];
      }
      off += len;
    }
  });
}

template <class S>
Var Graph<S>::slice_cols(Var x, std::size_t begin, std::size_t end) {
  const auto& xv = node(x).value;
  require_matrix("slice_cols", "input", xv);
  if (begin >= end || end > xv.cols()) {
    shape_fail("slice_cols", "columns [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of " +
                                 shape_string(xv.shape()));
  }
  const std::size_t m = xv.rows(), n = xv.cols(), w = end - begin;
  Tensor<S> out = Tensor<S>::matrix(m, w);
  for (std::size_t i = 0; i < m; ++i) std::copy_n(xv.data() + i * n + begin, w, out.data() + i * w);
  return push(std::move(out), needs(x), [x, m, n, w, begin](Graph& g, const Tensor<S>& gout) {
    auto& gx = g.grad_buffer(x.id);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) gx[i * n + begin + j] += gout[i * w + j];
  });
}

template <class S>
Var Graph<S>::gather_rows(Var x, std::vector<std::size_t> rows) {
  const auto& xv = node(x).value;
  require_matrix("gather_rows", "input", xv);
  const std::size_t n = xv.cols();
  Tensor<S> out = Tensor<S>::matrix(rows.size(), n);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= xv.rows()) {
      shape_fail("gather_rows", "row " + std::to_string(rows[i]) + " out of " + shape_string(xv.shape()));
    }
    std::copy_n(xv.data() + rows[i] * n, n, out.data() + i * n);
  }
  return push(std::move(out), needs(x), [x, n, rows = std::move(rows)](Graph& g, const Tensor<S>& gout) {
    auto& gx = g.grad_buffer(x.id);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < n; ++j) gx(rows[i], j) += gout(i, j);
  });
}

template <class S>
Var Graph<S>::nll(Var logp, std::vector<std::size_t> targets) {
  const auto& lv = node(logp).value;
  require_matrix("nll", "log-probabilities", lv);
  if (targets.size() != lv.rows()) {
    shape_fail("nll", std::to_string(targets.size()) + " targets for " + std::to_string(lv.rows()) + " rows");
  }
  if (lv.rows() == 0) shape_fail("nll", "no rows");
  S total{0};
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] >= lv.cols()) {
      throw InvalidArgument("nll: target " + std::to_string(targets[i]) + " at row " + std::to_string(i) +
                            " is outside [0, " + std::to_string(lv.cols()) + ")");
    }
    total -= lv(i, targets[i]);
  }
  const S inv = S{1} / static_cast<S>(targets.size());
  return push(Tensor<S>({1}, total * inv), needs(logp),
              [logp, inv, targets = std::move(targets)](Graph& g, const Tensor<S>& gout) {
                auto& gl = g.grad_buffer(logp.id);
                for (std::size_t i = 0; i < targets.size(); ++i) gl(i, targets[i]) -= gout[0] * inv;
              });
}

template <class S>
Var Graph<S>::truncated_smoothing(Var logp, S tau) {
  const auto& lv = node(logp).value;
  require_matrix("truncated_smoothing", "log-probabilities", lv);
  const std::size_t m = lv.rows(), n = lv.cols();
  const S inv = S{1} / static_cast<S>(m * n);
  S total{0};
  for (std::size_t t = 1; t < m; ++t) {
    for (std::size_t c = 0; c < n; ++c) {
      const S d = std::min(tau, std::abs(lv(t, c) - lv(t - 1, c)));
      total += d * d;
    }
  }
  return push(Tensor<S>({1}, total * inv), needs(logp), [logp, tau, inv, m, n](Graph& g, const Tensor<S>& gout) {
    auto& gl = g.grad_buffer(logp.id);
    const auto& lv = g.nodes_[logp.id].value;
    for (std::size_t t = 1; t < m; ++t) {
      for (std::size_t c = 0; c < n; ++c) {
        const S d = lv(t, c) - lv(t - 1, c);
        if (std::abs(d) >= tau) continue;
        const S gd = gout[0] * inv * S{2} * d;
        gl(t, c) += gd;
        gl(t - 1, c) -= gd;
      }
    }
  });
}

template <class S>
Var Graph<S>::truncated_l1(Var a, Var b, S tau) {
  const auto& av = node(a).value;
  const auto& bv = node(b).value;
  if (av.shape() != bv.shape()) {
    shape_fail("truncated_l1", "operands " + shape_string(av.shape()) + " and " + shape_string(bv.shape()) + " differ");
  }
  if (av.empty()) shape_fail("truncated_l1", "empty operands");
  const S inv = S{1} / static_cast<S>(av.size());
  S total{0};
  for (std::size_t i = 0; i < av.size(); ++i) total += std::min(tau, std::abs(av[i] - bv[i]));
  return push(Tensor<S>({1}, total * inv), needs(a) || needs(b), [a, b, tau, inv](Graph& g, const Tensor<S>& gout) {
    const auto& av = g.nodes_[a.id].value;
    const auto& bv = g.nodes_[b.id].value;
    const bool ga_on = g.needs(a), gb_on = g.needs(b);
    for (std::size_t i = 0; i < av.size(); ++i) {
      const S d = av[i] - bv[i];
      if (std::abs(d) >= tau || d == S{0}) continue;
      const S s = (d > S{0} ? S{1} : S{-1}) * gout[0] * inv;
      if (ga_on) g.grad_buffer(a.id)[i] += s;
      if (gb_on) g.grad_buffer(b.id)[i] -= s;
    }
  });
}

template <class S>
void Graph<S>::backward(Var loss) {
  Node& root = node(loss);
  if (root.value.size() != 1) {
    throw InvalidArgument("backward: loss must be scalar, got shape " + shape_string(root.value.shape()));
  }
  if (!record_ || !root.requires_grad) return;
  grad_buffer(loss.id)[0] += S{1};
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param) add_into(n.param->grad, n.grad);
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace segsemi
