// Copyright 2026 The AMRConvNet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "amrconvnet/tensor.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

namespace amrconvnet {

namespace {

size_t shape_numel(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor: dimensions must be > 0");
    n *= static_cast<size_t>(d);
  }
  return shape.empty() ? 0 : n;
}

// "Same" zero padding: total pad so that output length is ceil(L / stride),
// extra zero on the right when the total is odd.
int same_pad_total(int length, int kernel, int stride) {
  const int out_len = (length + stride - 1) / stride;
  return std::max(0, (out_len - 1) * stride + kernel - length);
}

}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  if (shape_.empty() || shape_.size() > 3) {
    throw std::invalid_argument("tensor: rank must be 1..3");
  }
  values_.assign(shape_numel(shape_), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_.empty() || shape_.size() > 3) {
    throw std::invalid_argument("tensor: rank must be 1..3");
  }
  if (shape_numel(shape_) != values_.size()) {
    throw std::invalid_argument("tensor: value count does not match shape");
  }
}

bool Tensor::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Var Graph::push(Tensor value, std::vector<Var> parents, BackwardFn back) {
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  n.back = std::move(back);
  for (Var p : n.parents) {
    if (node(p).requires_grad) {
      n.requires_grad = true;
      break;
    }
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Graph::Node& Graph::node(Var v) {
  if (!v.valid() || v.index >= static_cast<int>(nodes_.size())) {
    throw std::invalid_argument("graph: invalid node handle");
  }
  return nodes_[static_cast<size_t>(v.index)];
}

const Graph::Node& Graph::node(Var v) const {
  if (!v.valid() || v.index >= static_cast<int>(nodes_.size())) {
    throw std::invalid_argument("graph: invalid node handle");
  }
  return nodes_[static_cast<size_t>(v.index)];
}

Var Graph::constant(Tensor value) { return push(std::move(value), {}, {}); }

Var Graph::parameter(Tensor value) {
  Var v = push(std::move(value), {}, {});
  node(v).requires_grad = true;
  return v;
}

const Tensor& Graph::value(Var v) const { return node(v).value; }

bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

const Tensor& Graph::grad(Var v) const {
  const Node& n = node(v);
  if (!n.requires_grad) {
    throw std::invalid_argument("graph: node does not track gradients");
  }
  if (!backward_done_) {
    throw std::logic_error("graph: backward() has not run");
  }
  return n.grad;
}

Tensor& Graph::grad_mut(Var v) {
  Node& n = node(v);
  if (n.grad.empty()) {
    n.grad = Tensor(n.value.shape());
  }
  return n.grad;
}

void Graph::backward(Var loss) {
  Node& loss_node = node(loss);
  if (loss_node.value.numel() != 1) {
    throw std::invalid_argument("backward: loss node must be scalar");
  }
  // Zero-fill grads for every tracked node so unreached parameters report
  // zero rather than garbage.
  for (Node& n : nodes_) {
    if (n.requires_grad) {
      n.grad = Tensor(n.value.shape());
    }
  }
  // Mark ancestors of the loss; only they can receive gradient.
  std::vector<char> reachable(nodes_.size(), 0);
  std::vector<int> stack = {loss.index};
  reachable[static_cast<size_t>(loss.index)] = 1;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    for (Var p : nodes_[static_cast<size_t>(i)].parents) {
      if (!reachable[static_cast<size_t>(p.index)]) {
        reachable[static_cast<size_t>(p.index)] = 1;
        stack.push_back(p.index);
      }
    }
  }

  grad_mut(loss).at(0) = 1.0;
  for (int i = loss.index; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!reachable[static_cast<size_t>(i)] || !n.requires_grad || !n.back) {
      continue;
    }
    n.back(*this, n.grad, n.parents);
  }
  backward_done_ = true;
}

Var Graph::conv1d(Var input, Var kernels, Var bias, int stride) {
  const Tensor& in = value(input);
  const Tensor& ker = value(kernels);
  const Tensor& b = value(bias);
  if (in.rank() != 2 || ker.rank() != 3 || b.rank() != 1) {
    throw std::invalid_argument("conv1d: expected input [C,L], kernels "
                                "[Cout,Cin,k], bias [Cout]");
  }
  if (stride < 1) throw std::invalid_argument("conv1d: stride must be >= 1");
  const int c_in = in.dim(0);
  const int length = in.dim(1);
  const int c_out = ker.dim(0);
  if (ker.dim(1) != c_in) {
    throw std::invalid_argument("conv1d: kernel input channels (" +
                                std::to_string(ker.dim(1)) +
                                ") do not match input (" +
                                std::to_string(c_in) + ")");
  }
  if (b.dim(0) != c_out) {
    throw std::invalid_argument("conv1d: bias size does not match kernels");
  }
  const int k = ker.dim(2);
  const int out_len = (length + stride - 1) / stride;
  const int pad_left = same_pad_total(length, k, stride) / 2;

  Tensor out({c_out, out_len});
  for (int co = 0; co < c_out; ++co) {
    double* orow = out.data() + static_cast<size_t>(co) * out_len;
    const double bco = b.at(co);
    for (int t = 0; t < out_len; ++t) orow[t] = bco;
    for (int ci = 0; ci < c_in; ++ci) {
      const double* irow = in.data() + static_cast<size_t>(ci) * length;
      for (int j = 0; j < k; ++j) {
        const double w = ker.at(co, ci, j);
        if (w == 0.0) continue;
        // x = t*stride + j - pad_left must lie in [0, length)
        const int off = j - pad_left;
        int t_lo = off < 0 ? (-off + stride - 1) / stride : 0;
        int t_hi = out_len;  // exclusive
        while (t_hi > t_lo && (t_hi - 1) * stride + off >= length) --t_hi;
        const double* x = irow + t_lo * stride + off;
        for (int t = t_lo; t < t_hi; ++t, x += stride) {
          orow[t] += w * *x;
        }
      }
    }
  }

  return push(std::move(out), {input, kernels, bias},
              [stride, c_in, c_out, length, k, out_len, pad_left](
                  Graph& g, const Tensor& up, const std::vector<Var>& ps) {
                const Tensor& in_v = g.value(ps[0]);
                const Tensor& ker_v = g.value(ps[1]);
                const bool need_in = g.requires_grad(ps[0]);
                const bool need_ker = g.requires_grad(ps[1]);
                const bool need_bias = g.requires_grad(ps[2]);
                Tensor* gin = need_in ? &g.grad_mut(ps[0]) : nullptr;
                Tensor* gker = need_ker ? &g.grad_mut(ps[1]) : nullptr;
                Tensor* gbias = need_bias ? &g.grad_mut(ps[2]) : nullptr;
                for (int co = 0; co < c_out; ++co) {
                  const double* urow =
                      up.data() + static_cast<size_t>(co) * out_len;
                  if (gbias) {
                    double s = 0.0;
                    for (int t = 0; t < out_len; ++t) s += urow[t];
                    gbias->at(co) += s;
                  }
                  if (!gin && !gker) continue;
                  for (int ci = 0; ci < c_in; ++ci) {
                    const double* irow =
                        in_v.data() + static_cast<size_t>(ci) * length;
                    double* girow =
                        gin ? gin->data() + static_cast<size_t>(ci) * length
                            : nullptr;
                    for (int j = 0; j < k; ++j) {
                      const int off = j - pad_left;
                      int t_lo = off < 0 ? (-off + stride - 1) / stride : 0;
                      int t_hi = out_len;
                      while (t_hi > t_lo &&
                             (t_hi - 1) * stride + off >= length) {
                        --t_hi;
                      }
                      if (gker) {
                        double s = 0.0;
                        const double* x = irow + t_lo * stride + off;
                        for (int t = t_lo; t < t_hi; ++t, x += stride) {
                          s += urow[t] * *x;
                        }
                        gker->at(co, ci, j) += s;
                      }
                      if (girow) {
                        const double w = ker_v.at(co, ci, j);
                        if (w == 0.0) continue;
                        double* x = girow + t_lo * stride + off;
                        for (int t = t_lo; t < t_hi; ++t, x += stride) {
                          *x += w * urow[t];
                        }
                      }
                    }
                  }
                }
              });
}

Var Graph::subpixel_upsample(Var input) {
  const Tensor& in = value(input);
  if (in.rank() != 2) {
    throw std::invalid_argument("subpixel_upsample: expected [C,L]");
  }
  const int c = in.dim(0);
  const int length = in.dim(1);
  if (c % 2 != 0) {
    throw std::invalid_argument(
        "subpixel_upsample: channel count must be even");
  }
  Tensor out({c / 2, 2 * length});
  for (int co = 0; co < c / 2; ++co) {
    for (int t = 0; t < length; ++t) {
      out.at(co, 2 * t) = in.at(2 * co, t);
      out.at(co, 2 * t + 1) = in.at(2 * co + 1, t);
    }
  }
  return push(std::move(out), {input},
              [c, length](Graph& g, const Tensor& up,
                          const std::vector<Var>& ps) {
                if (!g.requires_grad(ps[0])) return;
                Tensor& gin = g.grad_mut(ps[0]);
                for (int co = 0; co < c / 2; ++co) {
                  for (int t = 0; t < length; ++t) {
                    gin.at(2 * co, t) += up.at(co, 2 * t);
                    gin.at(2 * co + 1, t) += up.at(co, 2 * t + 1);
                  }
                }
              });
}

Var Graph::dropout(Var input, double rate, bool training,
                   std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw std::invalid_argument("dropout: rate must be in [0, 1)");
  }
  const Tensor& in = value(input);
  if (!training || rate == 0.0) {
    Tensor out = in;
    return push(std::move(out), {input},
                [](Graph& g, const Tensor& up, const std::vector<Var>& ps) {
                  if (!g.requires_grad(ps[0])) return;
                  Tensor& gin = g.grad_mut(ps[0]);
                  for (int i = 0; i < up.numel(); ++i) gin.at(i) += up.at(i);
                });
  }
  // Inverted dropout: survivors are scaled by 1/(1-rate) so the expected
  // activation is unchanged.
  const double keep_scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(in.numel());
  Tensor out(in.shape());
  for (int i = 0; i < in.numel(); ++i) {
    const double m = uniform_unit(rng) < rate ? 0.0 : keep_scale;
    (*mask)[static_cast<size_t>(i)] = m;
    out.at(i) = m * in.at(i);
  }
  return push(std::move(out), {input},
              [mask](Graph& g, const Tensor& up, const std::vector<Var>& ps) {
                if (!g.requires_grad(ps[0])) return;
                Tensor& gin = g.grad_mut(ps[0]);
                for (int i = 0; i < up.numel(); ++i) {
                  gin.at(i) += (*mask)[static_cast<size_t>(i)] * up.at(i);
                }
              });
}

Var Graph::leaky_relu(Var input, double slope) {
  const Tensor& in = value(input);
  Tensor out(in.shape());
  for (int i = 0; i < in.numel(); ++i) {
    const double x = in.at(i);
    out.at(i) = x >= 0.0 ? x : slope * x;
  }
  return push(std::move(out), {input},
              [slope](Graph& g, const Tensor& up, const std::vector<Var>& ps) {
                if (!g.requires_grad(ps[0])) return;
                const Tensor& in_v = g.value(ps[0]);
                Tensor& gin = g.grad_mut(ps[0]);
                for (int i = 0; i < up.numel(); ++i) {
                  gin.at(i) += (in_v.at(i) >= 0.0 ? 1.0 : slope) * up.at(i);
                }
              });
}

Var Graph::concat_channels(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.rank() != 2 || tb.rank() != 2) {
    throw std::invalid_argument("concat_channels: expected [C,L] operands");
  }
  if (ta.dim(1) != tb.dim(1)) {
    throw std::invalid_argument("concat_channels: length mismatch (" +
                                std::to_string(ta.dim(1)) + " vs " +
                                std::to_string(tb.dim(1)) + ")");
  }
  const int ca = ta.dim(0);
  const int cb = tb.dim(0);
  const int length = ta.dim(1);
  Tensor out({ca + cb, length});
  std::copy(ta.data(), ta.data() + ta.numel(), out.data());
  std::copy(tb.data(), tb.data() + tb.numel(), out.data() + ta.numel());
  return push(std::move(out), {a, b},
              [ca, cb, length](Graph& g, const Tensor& up,
                               const std::vector<Var>& ps) {
                const size_t na = static_cast<size_t>(ca) * length;
                const size_t nb = static_cast<size_t>(cb) * length;
                if (g.requires_grad(ps[0])) {
                  Tensor& ga = g.grad_mut(ps[0]);
                  for (size_t i = 0; i < na; ++i) {
                    ga.data()[i] += up.data()[i];
                  }
                }
                if (g.requires_grad(ps[1])) {
                  Tensor& gb = g.grad_mut(ps[1]);
                  for (size_t i = 0; i < nb; ++i) {
                    gb.data()[i] += up.data()[na + i];
                  }
                }
              });
}

Var Graph::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) {
    throw std::invalid_argument("add: shape mismatch");
  }
  Tensor out(ta.shape());
  for (int i = 0; i < ta.numel(); ++i) out.at(i) = ta.at(i) + tb.at(i);
  return push(std::move(out), {a, b},
              [](Graph& g, const Tensor& up, const std::vector<Var>& ps) {
                for (Var p : ps) {
                  if (!g.requires_grad(p)) continue;
                  Tensor& gp = g.grad_mut(p);
                  for (int i = 0; i < up.numel(); ++i) gp.at(i) += up.at(i);
                }
              });
}

Var Graph::mul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) {
    throw std::invalid_argument("mul: shape mismatch");
  }
  Tensor out(ta.shape());
  for (int i = 0; i < ta.numel(); ++i) out.at(i) = ta.at(i) * tb.at(i);
  return push(std::move(out), {a, b},
              [](Graph& g, const Tensor& up, const std::vector<Var>& ps) {
                const Tensor& va = g.value(ps[0]);
                const Tensor& vb = g.value(ps[1]);
                if (g.requires_grad(ps[0])) {
                  Tensor& ga = g.grad_mut(ps[0]);
                  for (int i = 0; i < up.numel(); ++i) {
                    ga.at(i) += vb.at(i) * up.at(i);
                  }
                }
                if (g.requires_grad(ps[1])) {
                  Tensor& gb = g.grad_mut(ps[1]);
                  for (int i = 0; i < up.numel(); ++i) {
                    gb.at(i) += va.at(i) * up.at(i);
                  }
                }
              });
}

Var Graph::scale(Var a, double s) {
  const Tensor& ta = value(a);
  Tensor out(ta.shape());
  for (int i = 0; i < ta.numel(); ++i) out.at(i) = s * ta.at(i);
  return push(std::move(out), {a},
              [s](Graph& g, const Tensor& up, const std::vector<Var>& ps) {
                if (!g.requires_grad(ps[0])) return;
                Tensor& gp = g.grad_mut(ps[0]);
                for (int i = 0; i < up.numel(); ++i) gp.at(i) += s * up.at(i);
              });
}

Var Graph::sum(Var a) {
  const Tensor& ta = value(a);
  double s = 0.0;
  for (int i = 0; i < ta.numel(); ++i) s += ta.at(i);
  return push(Tensor::scalar(s), {a},
              [](Graph& g, const Tensor& up, const std::vector<Var>& ps) {
                if (!g.requires_grad(ps[0])) return;
                Tensor& gp = g.grad_mut(ps[0]);
                const double u = up.at(0);
                for (int i = 0; i < gp.numel(); ++i) gp.at(i) += u;
              });
}

Var Graph::custom(Tensor value, std::vector<Var> parents, BackwardFn back) {
  return push(std::move(value), std::move(parents), std::move(back));
}

}  // namespace amrconvnet
