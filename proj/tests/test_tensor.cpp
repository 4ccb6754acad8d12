#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "eegx/tensor.hpp"
#include "testutil.hpp"

using namespace eegx;
using testutil::gradcheck;
using testutil::random_const;
using testutil::random_leaf;

TEST_CASE("matmul values and gradient of identity product") {
  Tensor I = Tensor::constant({2, 2}, {1, 0, 0, 1});
  Tensor A = Tensor::leaf({2, 2}, {1, 2, 3, 4});
  Tensor P = matmul(I, A);
  CHECK(P.data() == std::vector<real>{1, 2, 3, 4});
  backward(sum(P));
  CHECK(A.grad() == std::vector<real>{1, 1, 1, 1});
}

TEST_CASE("matmul shape mismatch names the op") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({2, 3});
  CHECK_THROWS_WITH_AS(matmul(a, b),
                       doctest::Contains("matmul"), std::invalid_argument);
}

TEST_CASE("softmax of a constant vector is uniform") {
  Tensor x = Tensor::constant({1, 4}, {3, 3, 3, 3});
  Tensor y = softmax_rows(x);
  for (real v : y.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("conv1d dilated example") {
  Tensor x = Tensor::constant({1, 4}, {1, 2, 3, 4});
  Tensor w = Tensor::constant({1, 1, 2}, {1, -1});
  Tensor y = conv1d(x, w, /*dilation=*/2, /*groups=*/1, Pad::valid);
  REQUIRE(y.shape() == Shape{1, 2});
  CHECK(y.data()[0] == doctest::Approx(-2));
  CHECK(y.data()[1] == doctest::Approx(-2));
}

TEST_CASE("backward: sum gives ones, squared norm gives 2x") {
  Tensor x = Tensor::leaf({2}, {3, 4});
  backward(sum(x));
  CHECK(x.grad() == std::vector<real>{1, 1});
  x.zero_grad();
  backward(squared_l2(x));
  CHECK(x.grad()[0] == doctest::Approx(6));
  CHECK(x.grad()[1] == doctest::Approx(8));
}

TEST_CASE("backward rejects non-scalar loss") {
  Tensor x = Tensor::leaf({3}, {1, 2, 3});
  Tensor y = scale(x, 2);
  CHECK_THROWS_AS(backward(y), std::invalid_argument);
}

TEST_CASE("backward is idempotent after zeroing") {
  std::mt19937_64 rng(7);
  Tensor x = random_leaf({3, 3}, rng);
  auto run = [&] {
    x.zero_grad();
    backward(squared_l2(gelu(x)));
    return x.grad();
  };
  const auto g1 = run();
  const auto g2 = run();
  CHECK(g1 == g2);
}

TEST_CASE("max_rows ties to the lowest index") {
  Tensor x = Tensor::leaf({2, 3}, {5, 5, 1, 0, 7, 7});
  std::vector<int> winners;
  Tensor m = max_rows(x, &winners);
  CHECK(winners == std::vector<int>{0, 1});
  backward(sum(m));
  CHECK(x.grad() == std::vector<real>{1, 0, 0, 0, 1, 0});
}

TEST_CASE("gradients only reach leaves, not constants") {
  std::mt19937_64 rng(3);
  Tensor a = random_leaf({2, 2}, rng);
  Tensor c = random_const({2, 2}, rng);
  Tensor y = mul(a, c);
  backward(sum(y));
  CHECK(a.has_grad());
  CHECK_FALSE(c.on_tape());
}

TEST_CASE("detach cuts the graph") {
  Tensor a = Tensor::leaf({2}, {1, 2});
  Tensor d = scale(a, 3).detach();
  CHECK_FALSE(d.on_tape());
  CHECK(d.data() == std::vector<real>{3, 6});
}

TEST_CASE("finite-difference check: every op") {
  std::mt19937_64 rng(42);
  std::string msg;

  SUBCASE("matmul") {
    Tensor a = random_leaf({3, 4}, rng), b = random_leaf({4, 2}, rng);
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(matmul(a, b)); }, {&a, &b},
                            1e-4, 1e-5, &msg), msg);
  }
  SUBCASE("add/sub/mul/scale/add_scalar") {
    Tensor a = random_leaf({2, 3}, rng), b = random_leaf({2, 3}, rng);
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(add(a, b)); }, {&a, &b},
                            1e-4, 1e-5, &msg), msg);
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(sub(a, b)); }, {&a, &b},
                            1e-4, 1e-5, &msg), msg);
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(mul(a, b)); }, {&a, &b},
                            1e-4, 1e-5, &msg), msg);
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(scale(a, real(-1.7))); }, {&a},
                            1e-4, 1e-5, &msg), msg);
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(add_scalar(a, real(0.3))); },
                            {&a}, 1e-4, 1e-5, &msg), msg);
  }
  SUBCASE("add_rowwise") {
    Tensor a = random_leaf({3, 4}, rng), v = random_leaf({4}, rng);
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(add_rowwise(a, v)); },
                            {&a, &v}, 1e-4, 1e-5, &msg), msg);
  }
  SUBCASE("concat and slice") {
    Tensor a = random_leaf({2, 3}, rng), b = random_leaf({2, 3}, rng);
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(concat({a, b}, 0)); },
                            {&a, &b}, 1e-4, 1e-5, &msg), msg);
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(concat({a, b}, 1)); },
                            {&a, &b}, 1e-4, 1e-5, &msg), msg);
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(slice(a, 0, 1, 1)); }, {&a},
                            1e-4, 1e-5, &msg), msg);
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(slice(a, 1, 1, 2)); }, {&a},
                            1e-4, 1e-5, &msg), msg);
  }
  SUBCASE("transpose/reshape") {
    Tensor a = random_leaf({2, 3}, rng);
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(transpose(a)); }, {&a},
                            1e-4, 1e-5, &msg), msg);
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(reshape(a, {3, 2})); }, {&a},
                            1e-4, 1e-5, &msg), msg);
  }
  SUBCASE("reductions") {
    Tensor a = random_leaf({3, 4}, rng);
    CHECK_MESSAGE(gradcheck([&] { return sum(a); }, {&a}, 1e-4, 1e-5, &msg), msg);
    CHECK_MESSAGE(gradcheck([&] { return mean(a); }, {&a}, 1e-4, 1e-5, &msg), msg);
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(col_mean(a)); }, {&a},
                            1e-4, 1e-5, &msg), msg);
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(row_variance(a)); }, {&a},
                            1e-4, 1e-5, &msg), msg);
  }
  SUBCASE("softmax/layer_norm") {
    Tensor a = random_leaf({3, 5}, rng);
    Tensor g = random_leaf({5}, rng), b = random_leaf({5}, rng);
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(softmax_rows(a)); }, {&a},
                            1e-4, 1e-5, &msg), msg);
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(layer_norm(a, g, b)); },
                            {&a, &g, &b}, 1e-4, 1e-5, &msg), msg);
  }
  SUBCASE("pointwise nonlinearities") {
    Tensor a = random_leaf({2, 4}, rng);
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(gelu(a)); }, {&a}, 1e-4,
                            1e-5, &msg), msg);
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(relu(add_scalar(a, real(0.01)))); },
                            {&a}, 1e-4, 1e-5, &msg), msg);
    Tensor p = Tensor::leaf({3}, {0.5, 1.5, 2.5});
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(sqrt_eps(p, real(1e-4))); },
                            {&p}, 1e-4, 1e-5, &msg), msg);
  }
  SUBCASE("conv1d variants") {
    Tensor x = random_leaf({2, 12}, rng);
    Tensor w = random_leaf({2, 2, 3}, rng);
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(conv1d(x, w, 1, 1, Pad::valid)); },
                            {&x, &w}, 1e-4, 1e-5, &msg), msg);
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(conv1d(x, w, 2, 1, Pad::same)); },
                            {&x, &w}, 1e-4, 1e-5, &msg), msg);
    Tensor wg = random_leaf({2, 1, 3}, rng);  // groups=2
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(conv1d(x, wg, 1, 2, Pad::same)); },
                            {&x, &wg}, 1e-4, 1e-5, &msg), msg);
  }
  SUBCASE("conv1d_transpose") {
    Tensor x = random_leaf({3, 4}, rng);
    Tensor w = random_leaf({3, 2, 5}, rng);
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(conv1d_transpose(x, w, 3)); },
                            {&x, &w}, 1e-4, 1e-5, &msg), msg);
  }
  SUBCASE("max_rows winner routing") {
    Tensor x = random_leaf({4, 5}, rng);
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(max_rows(x)); }, {&x},
                            1e-4, 1e-5, &msg), msg);
  }
  SUBCASE("gather/scatter/fill") {
    Tensor x = random_leaf({4, 3}, rng);
    Tensor rows = random_leaf({2, 3}, rng);
    Tensor v = random_leaf({3}, rng);
    const std::vector<int> idx{2, 0, 2};
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(rows_select(x, idx)); }, {&x},
                            1e-4, 1e-5, &msg), msg);
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(rows_scatter(5, rows, {4, 1})); },
                            {&rows}, 1e-4, 1e-5, &msg), msg);
    const std::vector<char> mask{1, 0, 1, 0};
    CHECK_MESSAGE(gradcheck([&] { return squared_l2(masked_fill_rows(x, mask, v)); },
                            {&x, &v}, 1e-4, 1e-5, &msg), msg);
  }
}

TEST_CASE("ops are deterministic") {
  std::mt19937_64 rng(11);
  Tensor a = random_leaf({4, 4}, rng), b = random_leaf({4, 4}, rng);
  Tensor y1 = matmul(gelu(a), softmax_rows(b));
  Tensor y2 = matmul(gelu(a), softmax_rows(b));
  CHECK(y1.data() == y2.data());
}
