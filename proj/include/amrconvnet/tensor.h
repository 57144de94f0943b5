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

#ifndef AMRCONVNET_TENSOR_H_
#define AMRCONVNET_TENSOR_H_

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace amrconvnet {

// Dense array of rank <= 3. Activations are [channels, length], convolution
// kernels are [out_channels, in_channels, kernel], scalars are [1].
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<double> values);
  static Tensor scalar(double value) { return Tensor({1}, {value}); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int numel() const { return static_cast<int>(values_.size()); }
  bool empty() const { return values_.empty(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::span<const double> view() const { return values_; }

  double& at(int i) { return values_[static_cast<size_t>(i)]; }
  double at(int i) const { return values_[static_cast<size_t>(i)]; }
  double& at(int c, int t) {
    return values_[static_cast<size_t>(c) * shape_[1] + t];
  }
  double at(int c, int t) const {
    return values_[static_cast<size_t>(c) * shape_[1] + t];
  }
  double& at(int o, int i, int k) {
    return values_[(static_cast<size_t>(o) * shape_[1] + i) * shape_[2] + k];
  }
  double at(int o, int i, int k) const {
    return values_[(static_cast<size_t>(o) * shape_[1] + i) * shape_[2] + k];
  }

  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  std::vector<int> shape_;
  std::vector<double> values_;
};

// Handle to a node on a Graph tape.
struct Var {
  int index = -1;
  bool valid() const { return index >= 0; }
};

// Reverse-mode tape. Operations append nodes in execution order; backward()
// walks the tape once in reverse, accumulating gradients additively so a
// tensor used by several consumers receives the sum of their contributions.
class Graph {
 public:
  using BackwardFn =
      std::function<void(Graph&, const Tensor& upstream,
                         const std::vector<Var>& parents)>;

  // Leaf without gradient tracking.
  Var constant(Tensor value);
  // Leaf whose gradient is wanted (a model parameter or probed input).
  Var parameter(Tensor value);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  // Gradient of the last backward() target with respect to node v.
  // Zero-filled for tracked leaves the loss never reached.
  const Tensor& grad(Var v) const;
  Tensor& grad_mut(Var v);

  // Reverse pass from a scalar node. Throws std::invalid_argument when the
  // node is not a scalar.
  void backward(Var loss);

  // Primitive operations.
  Var conv1d(Var input, Var kernels, Var bias, int stride);
  Var subpixel_upsample(Var input);
  Var dropout(Var input, double rate, bool training, std::mt19937_64& rng);
  Var leaky_relu(Var input, double slope);
  Var concat_channels(Var a, Var b);
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var sum(Var a);

  // Escape hatch for fused operations (the loss terms). `back` receives the
  // node's upstream gradient and must accumulate into the parents' grads.
  Var custom(Tensor value, std::vector<Var> parents, BackwardFn back);

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<Var> parents;
    BackwardFn back;
  };

  Var push(Tensor value, std::vector<Var> parents, BackwardFn back);
  Node& node(Var v);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Uniform double in [0, 1) with 53 random bits; pinned to mt19937_64 output
// so results are identical across standard library implementations.
inline double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace amrconvnet

#endif  // AMRCONVNET_TENSOR_H_
