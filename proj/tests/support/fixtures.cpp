#include "fixtures.hpp"

#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <random>

namespace meshstyle::testing {

// -----------------------------------------------------------------------------
// MESHES
// -----------------------------------------------------------------------------

mesh_data flat_grid(double size) {
  auto mesh      = mesh_data{};
  mesh.positions = {{0, 0, 0}, {size, 0, 0}, {size, size, 0}, {0, size, 0}};
  mesh.faces     = {{0, 1, 2}, {0, 2, 3}};
  mesh.uvs       = {{vec2{0, 0}, vec2{1, 0}, vec2{1, 1}},
            {vec2{0, 0}, vec2{1, 1}, vec2{0, 1}}};
  build_topology(mesh);
  return mesh;
}

mesh_data two_islands() {
  auto mesh      = mesh_data{};
  mesh.positions = {{0, 0, 0}, {1, 0, 0}, {1, 2, 0}, {0, 2, 0},  //
      {3, 0, 0}, {4, 0, 0}, {4, 2, 0}, {3, 2, 0}};
  mesh.faces = {{0, 1, 2}, {0, 2, 3}, {4, 5, 6}, {4, 6, 7}};
  auto left  = [](vec3 p) { return vec2{p.x / 2, p.y / 2}; };
  auto right = [](vec3 p) { return vec2{0.5 + (4 - p.x) / 2, p.y / 2}; };
  for (size_t f = 0; f < mesh.faces.size(); f++) {
    auto uv = std::array<vec2, 3>{};
    for (int c = 0; c < 3; c++) {
      auto p = mesh.positions[mesh.faces[f][c]];
      uv[c]  = f < 2 ? left(p) : right(p);
    }
    mesh.uvs.push_back(uv);
  }
  build_topology(mesh);
  return mesh;
}

mesh_data icosphere(int subdivisions) {
  // 3d corners: north pole, upper ring, lower ring, south pole
  auto h     = std::sqrt(3.0) / 2;
  auto ring  = std::atan(0.5);
  auto upper = [&](int i) {
    auto a = 2 * std::numbers::pi * (i % 5) / 5;
    return vec3{std::cos(ring) * std::cos(a), std::cos(ring) * std::sin(a), std::sin(ring)};
  };
  auto lower = [&](int i) {
    auto a = 2 * std::numbers::pi * ((i % 5) + 0.5) / 5;
    return vec3{std::cos(ring) * std::cos(a), std::cos(ring) * std::sin(a), -std::sin(ring)};
  };
  struct corner {
    vec3 position;
    vec2 net;
  };
  auto big = std::vector<std::array<corner, 3>>{};
  for (int i = 0; i < 5; i++) {
    auto ui = corner{upper(i), {double(i), 2 * h}};
    auto uj = corner{upper(i + 1), {double(i + 1), 2 * h}};
    auto li = corner{lower(i), {i + 0.5, h}};
    auto lj = corner{lower(i + 1), {i + 1.5, h}};
    big.push_back({ui, uj, corner{{0, 0, 1}, {i + 0.5, 3 * h}}});
    big.push_back({ui, li, uj});
    big.push_back({uj, li, lj});
    big.push_back({li, corner{{0, 0, -1}, {i + 1.0, 0}}, lj});
  }

  auto mesh   = mesh_data{};
  auto lookup = std::map<std::array<int64_t, 3>, uint32_t>{};
  auto vertex = [&](vec3 p) {
    p        = normalize(p);
    auto key = std::array<int64_t, 3>{std::llround(p.x * 1e9), std::llround(p.y * 1e9),
        std::llround(p.z * 1e9)};
    auto it  = lookup.find(key);
    if (it != lookup.end()) return it->second;
    auto id = uint32_t(mesh.positions.size());
    mesh.positions.push_back(p);
    lookup[key] = id;
    return id;
  };
  auto margin = 0.25;
  auto extent = 5.5 + 2 * margin;
  auto to_uv  = [&](vec2 net) {
    return vec2{(net.x + margin) / extent, (net.y + margin) / extent};
  };
  auto n = subdivisions;
  for (auto& tri : big) {
    auto point = [&](int a, int b) {
      auto wa = double(a) / n, wb = double(b) / n, wc = 1 - wa - wb;
      return corner{tri[0].position * wc + tri[1].position * wa + tri[2].position * wb,
          tri[0].net * wc + tri[1].net * wa + tri[2].net * wb};
    };
    auto emit = [&](corner p, corner q, corner r) {
      auto face = std::array<uint32_t, 3>{vertex(p.position), vertex(q.position),
          vertex(r.position)};
      auto uv   = std::array<vec2, 3>{to_uv(p.net), to_uv(q.net), to_uv(r.net)};
      auto c    = (mesh.positions[face[0]] + mesh.positions[face[1]] +
                 mesh.positions[face[2]]);
      auto nrm  = cross(mesh.positions[face[1]] - mesh.positions[face[0]],
           mesh.positions[face[2]] - mesh.positions[face[0]]);
      if (dot(nrm, c) < 0) std::swap(face[1], face[2]), std::swap(uv[1], uv[2]);
      mesh.faces.push_back(face);
      mesh.uvs.push_back(uv);
    };
    for (int a = 0; a < n; a++) {
      for (int b = 0; a + b < n; b++) {
        emit(point(a, b), point(a + 1, b), point(a, b + 1));
        if (a + b + 1 < n) emit(point(a + 1, b), point(a + 1, b + 1), point(a, b + 1));
      }
    }
  }
  build_topology(mesh);
  return mesh;
}

mesh_data cylinder(int around, int along) {
  auto mesh = mesh_data{};
  for (int j = 0; j <= along; j++)
    for (int i = 0; i < around; i++) {
      auto a = 2 * std::numbers::pi * i / around;
      mesh.positions.push_back({std::cos(a), std::sin(a), 2.0 * j / along - 1});
    }
  auto index = [&](int i, int j) { return uint32_t(j * around + (i % around)); };
  auto uv    = [&](int i, int j) {
    return vec2{0.05 + 0.9 * i / around, 0.05 + 0.9 * j / along};
  };
  for (int j = 0; j < along; j++) {
    for (int i = 0; i < around; i++) {
      mesh.faces.push_back({index(i, j), index(i + 1, j), index(i + 1, j + 1)});
      mesh.uvs.push_back({uv(i, j), uv(i + 1, j), uv(i + 1, j + 1)});
      mesh.faces.push_back({index(i, j), index(i + 1, j + 1), index(i, j + 1)});
      mesh.uvs.push_back({uv(i, j), uv(i + 1, j + 1), uv(i, j + 1)});
    }
  }
  build_topology(mesh);
  return mesh;
}

// -----------------------------------------------------------------------------
// NETWORKS AND IMAGES
// -----------------------------------------------------------------------------

network_spec random_network(const std::vector<uint32_t>& channels,
    const std::vector<size_t>& pool_after, uint64_t seed, uint32_t kernel) {
  auto spec = network_spec{};
  auto rng  = std::mt19937_64{seed};
  auto in   = uint32_t{3};
  for (size_t c = 0; c < channels.size(); c++) {
    auto conv         = conv_layer{};
    conv.name         = "conv" + std::to_string(c + 1);
    conv.in_channels  = in;
    conv.out_channels = channels[c];
    conv.kernel       = kernel;
    auto scale = std::sqrt(6.0 / (double(in) * kernel * kernel));
    auto dist  = std::uniform_real_distribution<double>(-scale, scale);
    conv.weights.resize(size_t(channels[c]) * in * kernel * kernel);
    for (auto& w : conv.weights) w = float(dist(rng));
    conv.bias.resize(channels[c]);
    for (auto& b : conv.bias) b = float(0.1 * dist(rng));
    spec.layers.emplace_back(std::move(conv));
    spec.layers.emplace_back(relu_layer{"relu" + std::to_string(c + 1)});
    if (std::find(pool_after.begin(), pool_after.end(), c) != pool_after.end())
      spec.layers.emplace_back(pool_layer{"pool" + std::to_string(c + 1), 2});
    in = channels[c];
  }
  return spec;
}

feature_map<float> random_image(int width, int height, uint64_t seed) {
  auto image = feature_map<float>::image(3, width, height);
  auto rng   = std::mt19937_64{seed};
  auto dist  = std::uniform_real_distribution<double>(0, 1);
  for (auto& v : image.values) v = float(dist(rng));
  return image;
}

feature_map<double> random_map(uint32_t channels, size_t count, uint64_t seed) {
  auto map  = feature_map<double>(channels, count);
  auto rng  = std::mt19937_64{seed};
  auto dist = std::uniform_real_distribution<double>(-1, 1);
  for (auto& v : map.values) v = dist(rng);
  return map;
}

feature_map<float> pattern_image(int width, int height, uint64_t seed) {
  auto image = feature_map<float>::image(3, width, height);
  auto rng   = std::mt19937_64{seed};
  auto dist  = std::uniform_real_distribution<double>(0, 1);
  auto blobs = std::vector<std::array<double, 3>>{};
  for (int b = 0; b < 12; b++)
    blobs.push_back({dist(rng) * width, dist(rng) * height, 2 + 4 * dist(rng)});
  for (int y = 0; y < height; y++) {
    for (int x = 0; x < width; x++) {
      auto stripe = 0.5 + 0.5 * std::sin(2 * std::numbers::pi * (x + 0.5 * y) / 8);
      auto blob   = 0.0;
      for (auto [bx, by, r] : blobs) {
        auto d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
        blob    = std::max(blob, std::exp(-d2 / (r * r)));
      }
      auto p = size_t(y) * width + x;
      image.at(0, p) = float(0.2 + 0.6 * stripe);
      image.at(1, p) = float(0.1 + 0.8 * blob);
      image.at(2, p) = float(0.3 + 0.3 * stripe * (1 - blob));
    }
  }
  return image;
}

feature_map<float> atlas_to_image(const feature_map<float>& texture,
    const level_geometry& level, int width, int height) {
  auto image = feature_map<float>::image(texture.channels, width, height);
  for (size_t t = 0; t < level.size(); t++)
    for (uint32_t c = 0; c < texture.channels; c++)
      image.at(c, size_t(level.coords[t][1]) * width + level.coords[t][0]) =
          texture.at(c, t);
  return image;
}

std::string temp_dir(const std::string& name) {
  auto path = std::filesystem::temp_directory_path() / ("meshstyle_" + name);
  std::filesystem::remove_all(path);
  std::filesystem::create_directories(path);
  return path.string();
}

}  // namespace meshstyle::testing
