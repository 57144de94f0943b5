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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "amrconvnet/prng.h"
#include "amrconvnet/tensor.h"
#include "test_util.h"

using namespace amrconvnet;

namespace {

Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  for (int i = 0; i < t.numel(); ++i) t.at(i) = 2.0 * uniform_unit(rng) - 1.0;
  return t;
}

}  // namespace

TEST_CASE("conv1d worked example: [1,2,3] * [1,1,1] -> [3,6,5]") {
  Graph g;
  Var in = g.constant(Tensor({1, 3}, {1, 2, 3}));
  Var ker = g.constant(Tensor({1, 1, 3}, {1, 1, 1}));
  Var bias = g.constant(Tensor({1}, {0}));
  Var out = g.conv1d(in, ker, bias, 1);
  const Tensor& v = g.value(out);
  // Oracle agrees:
  const auto oracle =
      testutil::direct_conv1d({{1, 2, 3}}, {{{1, 1, 1}}}, {0}, 1);
  CHECK(v.at(0, 0) == oracle[0][0]);
  CHECK(v.at(0, 0) == 3.0);
  CHECK(v.at(0, 1) == 6.0);
  CHECK(v.at(0, 2) == 5.0);
}

TEST_CASE("conv1d with a centered delta kernel is the identity") {
  std::mt19937_64 rng(3);
  Graph g;
  Tensor input = random_tensor({2, 16}, rng);
  Tensor ker({2, 2, 5});
  ker.at(0, 0, 2) = 1.0;
  ker.at(1, 1, 2) = 1.0;
  Var out = g.conv1d(g.constant(input), g.constant(ker),
                     g.constant(Tensor({2})), 1);
  for (int i = 0; i < input.numel(); ++i) {
    CHECK(g.value(out).at(i) == input.at(i));
  }
}

TEST_CASE("conv1d output length is ceil(L/stride) for every kernel") {
  std::mt19937_64 rng(4);
  for (int k : {3, 9, 17}) {
    for (int stride : {1, 2}) {
      for (int len : {5, 64, 31}) {
        Graph g;
        Var out = g.conv1d(g.constant(random_tensor({1, len}, rng)),
                           g.constant(random_tensor({1, 1, k}, rng)),
                           g.constant(Tensor({1})), stride);
        CHECK(g.value(out).dim(1) == (len + stride - 1) / stride);
      }
    }
  }
}

TEST_CASE("conv1d matches the direct-summation oracle on random shapes") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const int c_in = 1 + static_cast<int>(bounded_rand(rng, 4));
    const int c_out = 1 + static_cast<int>(bounded_rand(rng, 4));
    const int len = 1 + static_cast<int>(bounded_rand(rng, 32));
    const int k = std::vector<int>{3, 9, 17}[bounded_rand(rng, 3)];
    const int stride = 1 + static_cast<int>(bounded_rand(rng, 2));

    Tensor in_t = random_tensor({c_in, len}, rng);
    Tensor ker_t = random_tensor({c_out, c_in, k}, rng);
    Tensor bias_t = random_tensor({c_out}, rng);

    std::vector<std::vector<double>> in(static_cast<size_t>(c_in));
    for (int c = 0; c < c_in; ++c) {
      for (int t = 0; t < len; ++t) in[static_cast<size_t>(c)].push_back(in_t.at(c, t));
    }
    std::vector<std::vector<std::vector<double>>> ker(
        static_cast<size_t>(c_out));
    for (int co = 0; co < c_out; ++co) {
      ker[static_cast<size_t>(co)].resize(static_cast<size_t>(c_in));
      for (int ci = 0; ci < c_in; ++ci) {
        for (int j = 0; j < k; ++j) {
          ker[static_cast<size_t>(co)][static_cast<size_t>(ci)].push_back(
              ker_t.at(co, ci, j));
        }
      }
    }
    std::vector<double> bias(bias_t.values());

    Graph g;
    Var out = g.conv1d(g.constant(in_t), g.constant(ker_t),
                       g.constant(bias_t), stride);
    const auto oracle = testutil::direct_conv1d(in, ker, bias, stride);
    const Tensor& v = g.value(out);
    REQUIRE(v.dim(0) == c_out);
    REQUIRE(v.dim(1) == static_cast<int>(oracle[0].size()));
    for (int co = 0; co < c_out; ++co) {
      for (int t = 0; t < v.dim(1); ++t) {
        CHECK(testutil::close(v.at(co, t),
                              oracle[static_cast<size_t>(co)]
                                    [static_cast<size_t>(t)],
                              1e-9, 1e-12));
      }
    }
  }
}

TEST_CASE("conv1d rejects mismatched shapes") {
  Graph g;
  Var in = g.constant(Tensor({2, 8}));
  Var ker = g.constant(Tensor({1, 3, 3}));  // expects 3 input channels
  Var bias = g.constant(Tensor({1}));
  CHECK_THROWS_AS(g.conv1d(in, ker, bias, 1), std::invalid_argument);
}

TEST_CASE("subpixel_upsample interleaves channel pairs") {
  Graph g;
  Var in = g.constant(Tensor({2, 2}, {1, 2, 3, 4}));
  Var out = g.subpixel_upsample(in);
  const Tensor& v = g.value(out);
  REQUIRE(v.shape() == std::vector<int>{1, 4});
  CHECK(v.at(0) == 1.0);
  CHECK(v.at(1) == 3.0);
  CHECK(v.at(2) == 2.0);
  CHECK(v.at(3) == 4.0);
}

TEST_CASE("subpixel_upsample preserves element count; odd channels rejected") {
  std::mt19937_64 rng(5);
  for (int c : {2, 4, 8}) {
    for (int l : {1, 5, 16}) {
      Graph g;
      Var out = g.subpixel_upsample(g.constant(random_tensor({c, l}, rng)));
      CHECK(g.value(out).numel() == c * l);
      CHECK(g.value(out).dim(0) == c / 2);
      CHECK(g.value(out).dim(1) == 2 * l);
    }
  }
  Graph g;
  CHECK_THROWS_AS(g.subpixel_upsample(g.constant(Tensor({3, 4}))),
                  std::invalid_argument);
}

TEST_CASE("subpixel adjoint is the inverse permutation") {
  // Forward then backward with a one-hot upstream recovers each index.
  std::mt19937_64 rng(6);
  Tensor input = random_tensor({4, 6}, rng);
  for (int probe = 0; probe < 24; ++probe) {
    Graph g;
    Var in = g.parameter(input);
    Var out = g.subpixel_upsample(in);
    Tensor pick(g.value(out).shape());
    pick.at(probe) = 1.0;
    Var loss = g.sum(g.mul(out, g.constant(pick)));
    g.backward(loss);
    // Exactly one 1 in the input gradient, at the preimage of `probe`.
    int ones = 0;
    for (int i = 0; i < input.numel(); ++i) {
      const double gi = g.grad(in).at(i);
      if (gi == 1.0) {
        ++ones;
        // forward maps that input slot to `probe`
        Graph g2;
        Tensor onehot(input.shape());
        onehot.at(i) = 1.0;
        Var fwd = g2.subpixel_upsample(g2.constant(onehot));
        CHECK(g2.value(fwd).at(probe) == 1.0);
      } else {
        CHECK(gi == 0.0);
      }
    }
    CHECK(ones == 1);
  }
}

TEST_CASE("dropout is the identity in eval mode and at rate 0") {
  std::mt19937_64 rng(7);
  Tensor input = random_tensor({3, 9}, rng);
  Graph g;
  Var in = g.constant(input);
  Var eval_out = g.dropout(in, 0.5, /*training=*/false, rng);
  Var rate0_out = g.dropout(in, 0.0, /*training=*/true, rng);
  for (int i = 0; i < input.numel(); ++i) {
    CHECK(g.value(eval_out).at(i) == input.at(i));
    CHECK(g.value(rate0_out).at(i) == input.at(i));
  }
}

TEST_CASE("dropout keeps the expected mean (Monte Carlo)") {
  std::mt19937_64 rng(2026);
  Graph g;
  Tensor ones({1, 100000});
  for (int i = 0; i < ones.numel(); ++i) ones.at(i) = 1.0;
  Var out = g.dropout(g.constant(ones), 0.5, /*training=*/true, rng);
  double mean = 0.0;
  for (int i = 0; i < ones.numel(); ++i) mean += g.value(out).at(i);
  mean /= ones.numel();
  CHECK(std::abs(mean - 1.0) < 0.02);
}

TEST_CASE("dropout is deterministic given the seed") {
  Tensor input({1, 64});
  for (int i = 0; i < 64; ++i) input.at(i) = 1.0;
  std::mt19937_64 rng_a(99), rng_b(99);
  Graph ga, gb;
  Var a = ga.dropout(ga.constant(input), 0.3, true, rng_a);
  Var b = gb.dropout(gb.constant(input), 0.3, true, rng_b);
  for (int i = 0; i < 64; ++i) {
    CHECK(ga.value(a).at(i) == gb.value(b).at(i));
  }
}

TEST_CASE("leaky_relu closed form and slopes") {
  Graph g;
  Var out = g.leaky_relu(g.constant(Tensor({1, 3}, {-1, 0, 2})), 0.2);
  CHECK(g.value(out).at(0) == doctest::Approx(-0.2));
  CHECK(g.value(out).at(1) == 0.0);
  CHECK(g.value(out).at(2) == 2.0);

  // slope 1 is the identity
  std::mt19937_64 rng(8);
  Tensor input = random_tensor({2, 5}, rng);
  Graph g2;
  Var id = g2.leaky_relu(g2.constant(input), 1.0);
  for (int i = 0; i < input.numel(); ++i) {
    CHECK(g2.value(id).at(i) == input.at(i));
  }
}

TEST_CASE("leaky_relu gradient at x<0 equals the slope (finite differences)") {
  const double slope = 0.2;
  Tensor input({1, 2}, {-0.7, 0.9});
  Graph g;
  Var in = g.parameter(input);
  Var loss = g.sum(g.leaky_relu(in, slope));
  g.backward(loss);
  for (int i = 0; i < 2; ++i) {
    const double fd = testutil::central_difference(
        [&](double xi) {
          Tensor probe = input;
          probe.at(i) = xi;
          Graph g2;
          Var out = g2.sum(g2.leaky_relu(g2.constant(probe), slope));
          return g2.value(out).at(0);
        },
        input.at(i), 1e-4);
    CHECK(testutil::close(g.grad(in).at(i), fd, 1e-9, 1e-12));
  }
  CHECK(g.grad(in).at(0) == slope);
  CHECK(g.grad(in).at(1) == 1.0);
}

TEST_CASE("concat_channels stacks and rejects length mismatch") {
  Graph g;
  Var a = g.constant(Tensor({1, 2}, {1, 2}));
  Var b = g.constant(Tensor({1, 2}, {3, 4}));
  Var out = g.concat_channels(a, b);
  const Tensor& v = g.value(out);
  REQUIRE(v.shape() == std::vector<int>{2, 2});
  CHECK(v.at(0, 0) == 1.0);
  CHECK(v.at(0, 1) == 2.0);
  CHECK(v.at(1, 0) == 3.0);
  CHECK(v.at(1, 1) == 4.0);

  CHECK_THROWS_AS(g.concat_channels(a, g.constant(Tensor({1, 3}))),
                  std::invalid_argument);
}

TEST_CASE("backward: sum(w*w) has gradient 2w") {
  Graph g;
  Var w = g.parameter(Tensor({2}, {1.0, -2.0}));
  Var loss = g.sum(g.mul(w, w));
  g.backward(loss);
  CHECK(g.value(loss).at(0) == 5.0);
  CHECK(g.grad(w).at(0) == 2.0);
  CHECK(g.grad(w).at(1) == -4.0);
}

TEST_CASE("backward accumulates over branches sharing a tensor") {
  Graph g;
  Var x = g.parameter(Tensor({1}, {3.0}));
  Var branch_a = g.scale(x, 2.0);       // d/dx = 2
  Var branch_b = g.mul(x, x);           // d/dx = 2x = 6
  Var loss = g.sum(g.add(branch_a, branch_b));
  g.backward(loss);
  CHECK(g.grad(x).at(0) == 8.0);
}

TEST_CASE("backward rejects non-scalar targets") {
  Graph g;
  Var x = g.parameter(Tensor({2}, {1.0, 2.0}));
  CHECK_THROWS_AS(g.backward(x), std::invalid_argument);
}

TEST_CASE("unreached parameters report zero gradient") {
  Graph g;
  Var used = g.parameter(Tensor({1}, {2.0}));
  Var unused = g.parameter(Tensor({3}, {1.0, 1.0, 1.0}));
  Var loss = g.sum(g.mul(used, used));
  g.backward(loss);
  CHECK(g.grad(used).at(0) == 4.0);
  for (int i = 0; i < 3; ++i) CHECK(g.grad(unused).at(i) == 0.0);
}

TEST_CASE("three-layer composition matches finite differences end to end") {
  // conv(stride 2) -> leaky_relu -> conv(stride 1) -> subpixel -> concat
  // -> sum of squares. Every parameter checked against central differences.
  std::mt19937_64 rng(77);
  Tensor input = random_tensor({1, 16}, rng);
  Tensor k1 = random_tensor({4, 1, 3}, rng);
  Tensor b1 = random_tensor({4}, rng);
  Tensor k2 = random_tensor({2, 4, 3}, rng);
  Tensor b2 = random_tensor({2}, rng);

  auto run = [&](const Tensor& k1v, const Tensor& b1v, const Tensor& k2v,
                 const Tensor& b2v, Graph* out_graph,
                 std::vector<Var>* out_params) {
    Graph& g = *out_graph;
    Var in = g.constant(input);
    Var vk1 = g.parameter(k1v);
    Var vb1 = g.parameter(b1v);
    Var vk2 = g.parameter(k2v);
    Var vb2 = g.parameter(b2v);
    Var h = g.conv1d(in, vk1, vb1, 2);
    h = g.leaky_relu(h, 0.2);
    h = g.conv1d(h, vk2, vb2, 1);
    h = g.subpixel_upsample(h);
    h = g.concat_channels(h, in);
    Var loss = g.sum(g.mul(h, h));
    if (out_params != nullptr) *out_params = {vk1, vb1, vk2, vb2};
    return loss;
  };

  Graph g;
  std::vector<Var> params;
  Var loss = run(k1, b1, k2, b2, &g, &params);
  g.backward(loss);

  std::vector<Tensor*> tensors = {&k1, &b1, &k2, &b2};
  for (size_t p = 0; p < tensors.size(); ++p) {
    for (int i = 0; i < tensors[p]->numel(); ++i) {
      const double orig = tensors[p]->at(i);
      const double fd = testutil::central_difference(
          [&](double xi) {
            tensors[p]->at(i) = xi;
            Graph g2;
            Var l2 = run(k1, b1, k2, b2, &g2, nullptr);
            tensors[p]->at(i) = orig;
            return g2.value(l2).at(0);
          },
          orig, 1e-4);
      CHECK(testutil::close(g.grad(params[p]).at(i), fd, 1e-3, 1e-6));
    }
  }
}

TEST_CASE("tensor invariants: shape arithmetic and finiteness") {
  Tensor t({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.all_finite());
  t.at(1, 2) = std::numeric_limits<double>::infinity();
  CHECK(!t.all_finite());
  CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({0, 3}), std::invalid_argument);
}
