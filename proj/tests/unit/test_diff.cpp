#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "fixtures.hpp"
#include "meshstyle/diff.hpp"
#include "meshstyle/errors.hpp"

using namespace meshstyle;

static conv_layer identity_conv(uint32_t channels) {
  auto conv = conv_layer{"identity", channels, channels, 3, {}, {}};
  conv.weights.assign(size_t(channels) * channels * 9, 0);
  conv.bias.assign(channels, 0);
  for (uint32_t c = 0; c < channels; c++) conv.weights[(size_t(c) * channels + c) * 9 + 4] = 1;
  return conv;
}

static precomputed flat_data(int resolution, uint32_t levels) {
  auto options        = precompute_options{};
  options.width       = resolution;
  options.height      = resolution;
  options.pool_levels = levels;
  return precompute(testing::flat_grid(), options);
}

static gram_matrix<double> scalar_gram(const std::string& layer, double value) {
  return {layer, 1, {value}};
}

// -----------------------------------------------------------------------------
// GRAM
// -----------------------------------------------------------------------------

TEST_CASE("gram: constants give the outer product") {
  auto map = feature_map<double>(3, 5);
  auto v   = std::array<double, 3>{0.5, -2, 3};
  for (uint32_t c = 0; c < 3; c++)
    for (size_t p = 0; p < 5; p++) map.at(c, p) = v[c];
  auto g = gram(map);
  for (uint32_t a = 0; a < 3; a++)
    for (uint32_t b = 0; b < 3; b++) CHECK(g(a, b) == doctest::Approx(v[a] * v[b]));
}

TEST_CASE("gram: disjoint supports are orthogonal") {
  auto map = feature_map<double>(2, 4);
  map.values = {1, 2, 0, 0, 0, 0, 3, 4};
  auto g     = gram(map);
  CHECK(g(0, 1) == 0);
  CHECK(g(1, 0) == 0);
  CHECK(g(0, 0) == doctest::Approx(5.0 / 4));
  CHECK(g(1, 1) == doctest::Approx(25.0 / 4));
}

TEST_CASE("gram: brute force, symmetry and semidefiniteness") {
  auto map = testing::random_map(3, 7, 11);
  auto g   = gram(map, "layer");
  CHECK(g.layer == "layer");
  for (uint32_t a = 0; a < 3; a++)
    for (uint32_t b = 0; b < 3; b++) {
      auto sum = 0.0;
      for (size_t p = 0; p < 7; p++) sum += map.at(a, p) * map.at(b, p);
      CHECK(g(a, b) == doctest::Approx(sum / 7).epsilon(1e-14));
      CHECK(g(a, b) == g(b, a));
    }
  auto big    = gram(testing::random_map(6, 50, 2));
  auto matrix = Eigen::Map<Eigen::MatrixXd>(big.values.data(), 6, 6);
  auto eigen  = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(matrix);
  CHECK(eigen.eigenvalues().minCoeff() > -1e-12);
  CHECK_THROWS_AS(gram(feature_map<double>(2, 0)), error);
}

TEST_CASE("gram backward matches finite differences") {
  auto map  = testing::random_map(3, 6, 5);
  auto seed = gram_matrix<double>{"", 3, testing::random_map(1, 9, 6).values};
  auto grad = gram_backward(map, seed);
  auto objective = [&](const feature_map<double>& f) {
    auto g   = gram(f);
    auto sum = 0.0;
    for (size_t k = 0; k < 9; k++) sum += g.values[k] * seed.values[k];
    return sum;
  };
  for (size_t k = 0; k < map.values.size(); k++) {
    auto plus = map, minus = map;
    plus.values[k] += 1e-6;
    minus.values[k] -= 1e-6;
    auto numeric = (objective(plus) - objective(minus)) / 2e-6;
    CHECK(grad.values[k] == doctest::Approx(numeric).epsilon(1e-7));
  }
}

// -----------------------------------------------------------------------------
// LOSSES
// -----------------------------------------------------------------------------

TEST_CASE("style loss examples") {
  auto same = style_loss<double>({scalar_gram("a", 2)}, {scalar_gram("a", 2)});
  CHECK(same.loss == 0);
  auto nine = style_loss<double>({scalar_gram("a", 4)}, {scalar_gram("a", 1)});
  CHECK(nine.loss == doctest::Approx(9));
  CHECK(nine.seeds[0].values[0] == doctest::Approx(6));

  auto g1 = gram(testing::random_map(3, 10, 1), "x");
  auto r1 = gram(testing::random_map(3, 10, 2), "x");
  auto g2 = gram(testing::random_map(4, 10, 3), "y");
  auto r2 = gram(testing::random_map(4, 10, 4), "y");
  auto both = style_loss<double>({g1, g2}, {r1, r2}).loss;
  CHECK(both == doctest::Approx(style_loss<double>({g1}, {r1}).loss +
                                style_loss<double>({g2}, {r2}).loss));
  CHECK_THROWS_AS(style_loss<double>({g1}, {r2}), error);
  CHECK_THROWS_AS(style_loss<double>({g1, g2}, {r1}), error);
}

TEST_CASE("content loss examples") {
  auto a = feature_map<double>(2, 4);
  auto b = a;
  CHECK(content_loss(a, b, 1000).loss == 0);
  b.values[5] = 2;
  auto r      = content_loss(a, b, 1000);
  CHECK(r.loss == doctest::Approx(500));
  CHECK(r.seed.values[5] == doctest::Approx(2 * 1000 * -2.0 / 8));
  CHECK(content_loss(a, b, 3000).loss == doctest::Approx(1500));
  CHECK_THROWS_AS(content_loss(a, feature_map<double>(2, 5), 1), error);
}

// -----------------------------------------------------------------------------
// BACKWARD
// -----------------------------------------------------------------------------

TEST_CASE("backward: identity conv with a sum of squares") {
  auto data   = flat_data(16, 0);
  auto spec   = network_spec{};
  spec.means  = {0.3f, 0.4f, 0.5f};
  spec.layers = {identity_conv(3)};
  auto net    = mesh_network(spec, data);
  auto x      = testing::random_map(3, data.used_texels(), 3);
  auto acts   = net.forward(x);
  auto seed   = acts.outputs[0];
  for (auto& v : seed.values) v *= 2;
  auto grad = net.backward<double>(acts, {seed});
  auto pre  = preprocess(spec, x);
  for (size_t k = 0; k < grad.values.size(); k++)
    CHECK(grad.values[k] == doctest::Approx(2 * pre.values[k]).epsilon(1e-12));
}

TEST_CASE("backward: relu masks exact zeros") {
  auto data   = flat_data(16, 0);
  auto spec   = network_spec{};
  spec.means  = {0.5f, 0.5f, 0.5f};
  spec.layers = {identity_conv(3), relu_layer{"relu"}};
  auto net    = mesh_network(spec, data);
  auto x      = feature_map<double>(3, data.used_texels());
  for (size_t k = 0; k < x.values.size(); k++) x.values[k] = (k % 3 == 0) ? 0.5 : (k % 3 == 1 ? 0.9 : 0.1);
  auto acts = net.forward(x);
  auto ones = feature_map<double>(3, x.count);
  std::fill(ones.values.begin(), ones.values.end(), 1.0);
  auto grad = net.backward<double>(acts, {std::nullopt, ones});
  for (size_t k = 0; k < x.values.size(); k++) CHECK(grad.values[k] == (k % 3 == 1 ? 1.0 : 0.0));
}

TEST_CASE("backward: pooling routes the group gradient to its argmax") {
  auto data   = flat_data(16, 1);
  auto spec   = network_spec{};
  spec.layers = {identity_conv(3), pool_layer{"pool", 2}};
  auto net    = mesh_network(spec, data);
  auto x      = testing::random_map(3, data.used_texels(), 9);
  auto acts   = net.forward(x);
  auto seed   = testing::random_map(3, data.pools[0].group_count(), 10);
  auto grad   = net.backward<double>(acts, {std::nullopt, seed});
  auto& pool  = data.pools[0];
  for (uint32_t c = 0; c < 3; c++)
    for (size_t g = 0; g < pool.group_count(); g++) {
      auto sum = 0.0;
      auto hit = 0;
      for (auto m : pool.group(g)) {
        sum += grad.at(c, m);
        hit += grad.at(c, m) != 0;
      }
      CHECK(sum == doctest::Approx(seed.at(c, g)).epsilon(1e-14));
      CHECK(hit == 1);
    }
}

// -----------------------------------------------------------------------------
// ADAM
// -----------------------------------------------------------------------------

TEST_CASE("adam: schedule") {
  auto lr = learning_schedule{};
  CHECK(lr(0) == 0.1);
  CHECK(lr(199) == 0.1);
  CHECK(lr(200) == 0.05);
  CHECK(lr(399) == 0.05);
  CHECK(lr(400) == 0.025);
  CHECK(lr(499) == 0.025);
}

TEST_CASE("adam: zero gradient keeps parameters and decays moments") {
  auto state  = adam_state{};
  auto params = std::vector<double>{1, 2};
  adam_step(state, params, std::vector<double>{1, -1});
  auto kept   = params;
  auto first  = state.first;
  auto second = state.second;
  adam_step(state, params, std::vector<double>{0, 0});
  CHECK(state.first[0] == doctest::Approx(0.9 * first[0]));
  CHECK(state.second[1] == doctest::Approx(0.999 * second[1]));
  auto zero   = adam_state{};
  auto still  = std::vector<double>{1, 2};
  adam_step(zero, still, std::vector<double>{0, 0});
  CHECK(still == std::vector<double>{1, 2});
  CHECK(zero.step == 1);
  // after a nonzero step the decayed first moment still moves them
  CHECK(kept != params);
}

TEST_CASE("adam: hand-computed steps") {
  auto state = adam_state{};
  auto x     = std::vector<double>{0};
  adam_step(state, x, std::vector<double>{1});
  CHECK(x[0] == doctest::Approx(-0.1 / (1 + 1e-8)).epsilon(1e-15));
  adam_step(state, x, std::vector<double>{0.5});
  auto m = 0.9 * 0.1 + 0.1 * 0.5, v = 0.999 * 0.001 + 0.001 * 0.25;
  auto mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  CHECK(x[0] == doctest::Approx(-0.1 / (1 + 1e-8) - 0.1 * mh / (std::sqrt(vh) + 1e-8)).epsilon(1e-14));
}

TEST_CASE("adam: non-finite gradients name the iteration") {
  auto state = adam_state{};
  state.step = 17;
  auto x     = std::vector<float>{0, 0};
  try {
    adam_step(state, x, std::vector<float>{0, std::numeric_limits<float>::quiet_NaN()});
    FAIL("expected a numerical error");
  } catch (const error& e) {
    CHECK(e.kind == error_kind::numerical);
    CHECK(std::string{e.what()}.find("iteration 17") != std::string::npos);
  }
}
