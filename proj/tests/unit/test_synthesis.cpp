#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "meshstyle/errors.hpp"
#include "meshstyle/image.hpp"
#include "meshstyle/synthesis.hpp"

using namespace meshstyle;

static precomputed flat_data(int resolution, uint32_t levels) {
  auto options        = precompute_options{};
  options.width       = resolution;
  options.height      = resolution;
  options.pool_levels = levels;
  return precompute(testing::flat_grid(), options);
}

static double rms(const feature_map<float>& a, const feature_map<float>& b) {
  auto sum = 0.0;
  for (size_t k = 0; k < a.values.size(); k++) {
    auto d = double(a.values[k]) - b.values[k];
    sum += d * d;
  }
  return std::sqrt(sum / double(a.values.size()));
}

// -----------------------------------------------------------------------------
// INITIALIZATION
// -----------------------------------------------------------------------------

TEST_CASE("init texture: range and determinism") {
  auto a = init_texture(5000, 7);
  auto b = init_texture(5000, 7);
  auto c = init_texture(5000, 8);
  CHECK(a.channels == 3);
  CHECK(a.count == 5000);
  CHECK(a.values == b.values);
  auto differ = size_t{0};
  for (size_t k = 0; k < a.values.size(); k++) {
    CHECK(a.values[k] >= 0.0f);
    CHECK(a.values[k] <= 0.2f);
    differ += a.values[k] != c.values[k];
  }
  CHECK(double(differ) >= 0.99 * double(a.values.size()));
}

// -----------------------------------------------------------------------------
// SYNTHESIS
// -----------------------------------------------------------------------------

TEST_CASE("synthesize: zero iterations returns the initialization") {
  auto data          = flat_data(32, 1);
  auto spec          = testing::random_network({8, 8}, {0}, 2);
  auto config        = synthesis_config{};
  config.style_layers = {"all"};
  config.iterations  = 0;
  config.seed        = 5;
  auto result = synthesize(spec, data, testing::pattern_image(32, 32, 1), config);
  CHECK(result.texture.values == init_texture(data.used_texels(), 5).values);
  REQUIRE(result.history.size() == 1);
  CHECK(result.history[0].style > 0);
  CHECK_FALSE(result.aborted);
}

TEST_CASE("synthesize: loss decreases and stays finite") {
  auto data           = flat_data(32, 1);
  auto spec           = testing::random_network({8, 8}, {0}, 2);
  auto config         = synthesis_config{};
  config.style_layers = {"conv1", "conv2"};
  config.iterations   = 60;
  auto result = synthesize(spec, data, testing::pattern_image(32, 32, 1), config);
  REQUIRE(result.history.size() == 61);
  for (auto& r : result.history) CHECK(std::isfinite(r.total));
  CHECK(result.history.back().total < result.history.front().total);
  auto csv = format_loss_csv(result.history);
  CHECK(csv.rfind("iteration,style_loss,content_loss,total\n0,", 0) == 0);
}

TEST_CASE("transfer: zero content weight follows the pure style trajectory") {
  auto data           = flat_data(32, 1);
  auto spec           = testing::random_network({8, 8}, {0}, 2);
  auto exemplar       = testing::pattern_image(32, 32, 1);
  auto content        = texture_from_image(testing::random_image(32, 32, 4), data);
  auto config         = synthesis_config{};
  config.style_layers = {"all"};
  config.iterations   = 20;
  config.seed         = 9;
  config.content_layer  = "conv2";
  config.content_weight = 0;
  auto plain = synthesize(spec, data, exemplar, config);
  auto mixed = synthesize(spec, data, exemplar, config, &content);
  CHECK(plain.texture.values == mixed.texture.values);
  for (size_t t = 0; t < plain.history.size(); t++)
    CHECK(plain.history[t].style == mixed.history[t].style);
}

TEST_CASE("transfer: an overwhelming content weight reproduces the content") {
  auto data           = flat_data(32, 1);
  auto spec           = testing::random_network({16, 8}, {0}, 2);
  auto content        = texture_from_image(testing::pattern_image(32, 32, 3), data);
  auto config         = synthesis_config{};
  config.style_layers = {"all"};
  config.content_layer  = "conv1";
  config.content_weight = 1e9;
  config.iterations     = 300;
  auto result = synthesize(spec, data, testing::pattern_image(32, 32, 8), config, &content);
  CHECK_FALSE(result.aborted);
  CHECK(rms(result.texture, content) < 0.02);
}

TEST_CASE("transfer: pure content fitting on a 64 grid") {
  auto data             = flat_data(64, 1);
  auto spec             = testing::random_network({16, 16}, {0}, 6);
  auto content          = texture_from_image(testing::pattern_image(64, 64, 2), data);
  auto config           = synthesis_config{};
  config.style_layers   = {};
  config.content_layer  = "conv2";
  config.content_weight = 1000;
  auto result = synthesize(spec, data, testing::pattern_image(64, 64, 5), config, &content);
  REQUIRE(result.history.size() == 501);
  CHECK(result.history.back().style == 0);
  CHECK(result.history.back().content < 0.01 * result.history.front().content);
}

// Gram of the positions at least `margin` away from the border of a
// side x side grid; the mesh side maps each position through its coords.
template <typename Index>
static gram_matrix<float> interior_gram(const feature_map<float>& map, int side, int margin,
    Index&& grid) {
  auto kept = std::vector<size_t>{};
  for (size_t p = 0; p < map.count; p++) {
    auto [i, j] = grid(p);
    if (i >= margin && j >= margin && i < side - margin && j < side - margin) kept.push_back(p);
  }
  auto sub = feature_map<float>(map.channels, kept.size());
  for (uint32_t c = 0; c < map.channels; c++)
    for (size_t k = 0; k < kept.size(); k++) sub.at(c, k) = map.at(c, kept[k]);
  return gram(sub);
}

TEST_CASE("flat grid exemplar Grams match the image path") {
  auto data     = flat_data(64, 1);
  auto spec     = testing::random_network({8, 8}, {0}, 12);
  auto exemplar = testing::pattern_image(64, 64, 1);
  auto net      = mesh_network(spec, data);
  auto flat     = forward_image(spec, exemplar);
  // conv1 after relu at full resolution, conv2 after relu on the pooled grid
  struct probe {
    size_t layer;
    int    level, side, margin;
  };
  auto probes  = std::vector<probe>{{1, 0, 64, 1}, {4, 1, 32, 2}};
  auto targets = std::vector<gram_matrix<float>>{};
  for (auto& p : probes)
    targets.push_back(interior_gram(flat[p.layer], p.side, p.margin, [&](size_t q) {
      return std::pair{int(q) % p.side, int(q) / p.side};
    }));
  auto loss_of = [&](const feature_map<float>& texture) {
    auto saved = net.forward(texture);
    auto grams = std::vector<gram_matrix<float>>{};
    for (auto& p : probes) {
      auto& coords = data.levels[p.level].coords;
      auto  shift  = p.level;
      grams.push_back(interior_gram(saved.outputs[p.layer], p.side, p.margin, [&](size_t q) {
        return std::pair{int(coords[q][0] >> shift), int(coords[q][1] >> shift)};
      }));
    }
    return style_loss(grams, targets).loss;
  };
  auto matched = loss_of(texture_from_image(exemplar, data));
  auto random  = loss_of(init_texture(data.used_texels(), 1));
  CHECK(matched < 1e-3 * random);
}

TEST_CASE("synthesize: style layers must exist") {
  auto data           = flat_data(32, 1);
  auto spec           = testing::random_network({8}, {}, 2);
  auto config         = synthesis_config{};
  config.iterations   = 1;
  CHECK_THROWS_AS(synthesize(spec, data, testing::pattern_image(32, 32, 1), config), error);
}

// -----------------------------------------------------------------------------
// EXPORT
// -----------------------------------------------------------------------------

TEST_CASE("export: quantization and clamping") {
  CHECK(quantize(0.5) == 128);
  CHECK(quantize(1.7) == 255);
  CHECK(quantize(-0.3) == 0);
  CHECK(quantize(0.2) == 51);
  auto data    = flat_data(16, 0);
  auto texture = feature_map<float>(3, data.used_texels());
  for (size_t t = 0; t < texture.count; t++) {
    texture.at(0, t) = 0.5f;
    texture.at(1, t) = 1.7f;
    texture.at(2, t) = -1;
  }
  auto bytes = export_texture(texture, data);
  REQUIRE(bytes.size() == 16 * 16 * 3);
  for (size_t p = 0; p < 256; p++) {
    CHECK(bytes[p * 3 + 0] == 128);
    CHECK(bytes[p * 3 + 1] == 255);
    CHECK(bytes[p * 3 + 2] == 0);
  }
}

TEST_CASE("export: dilation fills from used neighbors") {
  auto mesh      = mesh_data{};
  mesh.positions = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  mesh.faces     = {{0, 1, 2}, {0, 2, 3}};
  mesh.uvs       = {{vec2{0, 0}, vec2{0.5, 0}, vec2{0.5, 1}}, {vec2{0, 0}, vec2{0.5, 1}, vec2{0, 1}}};
  build_topology(mesh);
  auto options        = precompute_options{};
  options.width       = 8;
  options.height      = 8;
  options.pool_levels = 0;
  auto data           = precompute(mesh, options);
  REQUIRE(data.used_texels() == 32);
  auto texture = feature_map<float>(3, 32);
  std::fill(texture.values.begin(), texture.values.end(), 0.4f);
  auto v   = quantize(0.4f);
  auto one = export_texture(texture, data, 1);
  for (int y = 0; y < 8; y++) {
    CHECK(one[(size_t(y) * 8 + 4) * 3] == v);
    CHECK(one[(size_t(y) * 8 + 5) * 3] == 0);
  }
  auto all = export_texture(texture, data);
  for (int y = 0; y < 8; y++) CHECK(all[(size_t(y) * 8 + 7) * 3] == v);
  auto none = export_texture(texture, data, 0);
  CHECK(none[4 * 3] == 0);

  auto path = testing::temp_dir("export_unit") + "/t.png";
  save_texture(path, texture, data);
  auto back = load_png(path);
  CHECK(back.width == 8);
  CHECK(back.at(0, 7) == doctest::Approx(v / 255.0));
}

TEST_CASE("texture from image requires the atlas resolution") {
  auto data = flat_data(16, 0);
  try {
    texture_from_image(testing::random_image(8, 8, 1), data);
    FAIL("expected an error");
  } catch (const error& e) {
    CHECK(std::string{e.what()}.find("resolution mismatch") != std::string::npos);
  }
  auto image   = testing::random_image(16, 16, 1);
  auto texture = texture_from_image(image, data);
  auto bytes   = export_texture(texture, data);
  for (size_t p = 0; p < 256; p++) CHECK(bytes[p * 3 + 1] == quantize(image.at(1, p)));
}
