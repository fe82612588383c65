#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "meshstyle/geodesic.hpp"
#include "meshstyle/precompute.hpp"

using namespace meshstyle;

static vec3 bary_position(const mesh_data& mesh, uint32_t face, std::array<double, 3> b) {
  return eval_position(mesh, surface_point{face, b});
}

static surface_point point_on_face(const mesh_data& mesh, uint32_t face, vec3 p) {
  return {face, closest_point_barycentric(
                    p, mesh.corner(face, 0), mesh.corner(face, 1), mesh.corner(face, 2))};
}

TEST_CASE("geodesic: straight lines on a plane") {
  auto mesh  = testing::flat_grid();
  auto rng   = std::mt19937_64{1};
  auto coord = std::uniform_real_distribution<double>(0.3, 0.7);
  auto angle = std::uniform_real_distribution<double>(0, 2 * std::numbers::pi);
  for (int n = 0; n < 200; n++) {
    auto start = vec3{coord(rng), coord(rng), 0};
    auto face  = uint32_t(start.x >= start.y ? 0 : 1);
    auto point = point_on_face(mesh, face, start);
    auto a     = angle(rng);
    auto d     = vec2{std::cos(a), std::sin(a)};
    auto trace = trace_geodesic(mesh, point, d, 0.25);
    auto frame = face_frame(mesh, face);
    auto want  = start + 0.25 * (d.x * frame.tangent + d.y * frame.bitangent);
    auto got   = eval_position(mesh, trace.end);
    CHECK(length(got - want) < 1e-9);
    CHECK_FALSE(trace.terminated_at_boundary);
  }
  auto point = point_on_face(mesh, 0, {0.6, 0.2, 0});
  auto end   = eval_position(mesh, trace_geodesic(mesh, point, {1, 0}, 0.3).end);
  CHECK(length(end - vec3{0.9, 0.2, 0}) < 1e-12);
}

TEST_CASE("geodesic: unfolding across a 90 degree fold") {
  auto mesh      = mesh_data{};
  mesh.positions = {{-1, -1, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, 1}};
  mesh.faces     = {{0, 1, 2}, {2, 1, 3}};
  mesh.uvs       = {{vec2{0, 0}, vec2{0.4, 0}, vec2{0.4, 0.8}},
            {vec2{0.6, 0.8}, vec2{0.6, 0}, vec2{1, 0.4}}};
  build_topology(mesh);
  REQUIRE(mesh.adjacency[0][1] == 1);
  auto start = point_on_face(mesh, 0, {-0.2, 0, 0});
  auto trace = trace_geodesic(mesh, start, {1, 0}, 0.5);
  CHECK(trace.end.face == 1);
  CHECK(length(eval_position(mesh, trace.end) - vec3{0, 0, 0.3}) < 1e-9);
  CHECK_FALSE(trace.terminated_at_boundary);
}

TEST_CASE("geodesic: zero length stays put") {
  auto mesh  = testing::icosphere(2);
  auto start = surface_point{5, {0.2, 0.3, 0.5}};
  auto trace = trace_geodesic(mesh, start, {0.3, -0.7}, 0);
  CHECK(trace.end.face == start.face);
  CHECK(length(eval_position(mesh, trace.end) - eval_position(mesh, start)) < 1e-15);
  CHECK(trace.path.size() <= 1);
}

TEST_CASE("geodesic: traced length is preserved on a curved mesh") {
  auto mesh  = testing::icosphere(4);
  auto rng   = std::mt19937_64{7};
  auto face  = std::uniform_int_distribution<uint32_t>(0, uint32_t(mesh.face_count() - 1));
  auto unit  = std::uniform_real_distribution<double>(0.05, 0.9);
  auto angle = std::uniform_real_distribution<double>(0, 2 * std::numbers::pi);
  for (int n = 0; n < 300; n++) {
    auto a = unit(rng), b = unit(rng) * (1 - a);
    auto start = surface_point{face(rng), {a, b, 1 - a - b}};
    auto t     = angle(rng);
    auto len   = 0.05 + 0.4 * unit(rng);
    auto trace = trace_geodesic(mesh, start, {std::cos(t), std::sin(t)}, len);
    REQUIRE_FALSE(trace.terminated_at_boundary);
    auto total = 0.0;
    auto arc   = -1.0;
    for (auto& s : trace.segments) {
      total += length(bary_position(mesh, s.face, s.to) - bary_position(mesh, s.face, s.from));
      CHECK(s.arc_to > s.arc_from);
    }
    for (auto& p : trace.path) {
      CHECK(p.arc > arc);
      arc = p.arc;
    }
    CHECK(total == doctest::Approx(len).epsilon(1e-9));
  }
}

TEST_CASE("geodesic: boundary terminates the trace") {
  auto mesh  = testing::flat_grid();
  auto start = point_on_face(mesh, 0, {0.9, 0.5, 0});
  auto trace = trace_geodesic(mesh, start, {1, 0}, 0.5);
  CHECK(trace.terminated_at_boundary);
  CHECK(eval_position(mesh, trace.end).x == doctest::Approx(1));
}

// -----------------------------------------------------------------------------
// SAMPLE RESOLUTION
// -----------------------------------------------------------------------------

struct flat_setup {
  mesh_data      mesh  = testing::flat_grid();
  texel_atlas    atlas = rasterize_atlas(mesh, 16, 16);
  texel_graph    graph = build_texel_graph(mesh, atlas);
  level_geometry level = make_finest_level(mesh, atlas, graph);
  uint32_t       texel(int i, int j) const { return uint32_t(atlas.texel_at(i, j)); }
};

TEST_CASE("resolve: nearest lands on the adjacent texel") {
  auto f     = flat_setup{};
  auto c     = f.texel(5, 5);
  auto trace = trace_geodesic(f.mesh, f.atlas.points[c], {1, 0}, f.atlas.texel_size);
  auto taps  = resolve_sample(f.mesh, trace, f.atlas, f.level.view(), c, interpolation::nearest);
  REQUIRE(taps.taps.size() == 1);
  CHECK(taps.taps[0].texel == f.texel(6, 5));
  CHECK(taps.taps[0].weight == 1);
  CHECK_FALSE(taps.corrected);
}

TEST_CASE("resolve: bilinear identities") {
  auto f     = flat_setup{};
  auto c     = f.texel(5, 5);
  auto s     = f.atlas.texel_size;
  auto exact = resolve_sample(f.mesh, trace_geodesic(f.mesh, f.atlas.points[c], {0, 1}, s),
      f.atlas, f.level.view(), c, interpolation::bilinear);
  auto nonzero = std::vector<sample_tap>{};
  for (auto& t : exact.taps)
    if (t.weight > 1e-12) nonzero.push_back(t);
  REQUIRE(nonzero.size() == 1);
  CHECK(nonzero[0].texel == f.texel(5, 4));
  CHECK(nonzero[0].weight == doctest::Approx(1));

  auto half = resolve_sample(f.mesh, trace_geodesic(f.mesh, f.atlas.points[c], {1, 0}, s / 2),
      f.atlas, f.level.view(), c, interpolation::bilinear);
  auto weights = std::map<uint32_t, double>{};
  for (auto& t : half.taps)
    if (t.weight > 1e-12) weights[t.texel] += t.weight;
  REQUIRE(weights.size() == 2);
  CHECK(weights[c] == doctest::Approx(0.5));
  CHECK(weights[f.texel(6, 5)] == doctest::Approx(0.5));
}

TEST_CASE("resolve: taps are adjacent and weights sum to one") {
  for (auto& mesh : {testing::icosphere(3), testing::cylinder(10, 3), testing::two_islands()}) {
    auto atlas = rasterize_atlas(mesh, 64, 64);
    auto graph = build_texel_graph(mesh, atlas);
    auto level = make_finest_level(mesh, atlas, graph);
    auto rng   = std::mt19937_64{3};
    auto pick  = std::uniform_int_distribution<size_t>(0, atlas.size() - 1);
    auto angle = std::uniform_real_distribution<double>(0, 2 * std::numbers::pi);
    for (int n = 0; n < 2000; n++) {
      auto c = uint32_t(pick(rng));
      auto a = angle(rng);
      auto trace = trace_geodesic(mesh, atlas.points[c], {std::cos(a), std::sin(a)},
          std::sqrt(2.0) * atlas.texel_size, atlas.texel_size);
      for (auto interp : {interpolation::nearest, interpolation::bilinear}) {
        auto taps = resolve_sample(mesh, trace, atlas, level.view(), c, interp);
        auto sum  = 0.0;
        for (auto& t : taps.taps) {
          CHECK(t.weight >= 0);
          sum += t.weight;
          CHECK((t.texel == c || kernel_adjacent(graph, c, t.texel)));
        }
        CHECK(sum == doctest::Approx(1).epsilon(1e-9));
      }
    }
  }
}
