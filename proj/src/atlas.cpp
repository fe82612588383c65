#include "meshstyle/atlas.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "meshstyle/errors.hpp"

namespace meshstyle {

// -----------------------------------------------------------------------------
// GRAPH
// -----------------------------------------------------------------------------

bool texel_graph::adjacent(uint32_t a, uint32_t b) const {
  auto list = neighbors(a);
  return std::binary_search(list.begin(), list.end(), b);
}

texel_graph make_texel_graph(
    size_t count, std::vector<std::pair<uint32_t, uint32_t>> edges) {
  auto both = std::vector<std::pair<uint32_t, uint32_t>>{};
  both.reserve(edges.size() * 2);
  for (auto [a, b] : edges) {
    if (a == b) continue;
    both.emplace_back(a, b);
    both.emplace_back(b, a);
  }
  std::sort(both.begin(), both.end());
  both.erase(std::unique(both.begin(), both.end()), both.end());
  auto graph = texel_graph{};
  graph.offsets.assign(count + 1, 0);
  for (auto [a, b] : both) graph.offsets[a + 1]++;
  std::partial_sum(graph.offsets.begin(), graph.offsets.end(), graph.offsets.begin());
  graph.targets.reserve(both.size());
  for (auto [a, b] : both) graph.targets.push_back(b);
  return graph;
}

// -----------------------------------------------------------------------------
// UV HELPERS
// -----------------------------------------------------------------------------

vec2 uv_to_texel_space(vec2 uv, int width, int height) {
  return {uv.x * width - 0.5, (1 - uv.y) * height - 0.5};
}

vec2 texel_center_uv(int column, int row, int width, int height) {
  return {(column + 0.5) / width, 1 - (row + 0.5) / height};
}

namespace {

struct union_find {
  std::vector<uint32_t> parent;
  explicit union_find(size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0u);
  }
  uint32_t find(uint32_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void join(uint32_t a, uint32_t b) {
    a = find(a), b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

constexpr double uv_match_tolerance = 1e-9;

bool same_uv(vec2 a, vec2 b) {
  return std::abs(a.x - b.x) <= uv_match_tolerance &&
         std::abs(a.y - b.y) <= uv_match_tolerance;
}

int corner_of(const mesh_data& mesh, size_t face, uint32_t vertex) {
  for (int c = 0; c < 3; c++)
    if (mesh.faces[face][c] == vertex) return c;
  return -1;
}

double uv_area(const std::array<vec2, 3>& uv) {
  return cross(uv[1] - uv[0], uv[2] - uv[0]) / 2;
}

// barycentric coordinates of p in a 2d triangle with signed double area
std::array<double, 3> uv_barycentric(
    const std::array<vec2, 3>& uv, vec2 p, double area2) {
  return {cross(uv[1] - p, uv[2] - p) / area2,
      cross(uv[2] - p, uv[0] - p) / area2, cross(uv[0] - p, uv[1] - p) / area2};
}

}  // namespace

std::vector<uint32_t> compute_face_charts(const mesh_data& mesh) {
  auto sets = union_find{mesh.faces.size()};
  for (size_t f = 0; f < mesh.faces.size(); f++) {
    for (int e = 0; e < 3; e++) {
      auto g = mesh.adjacency[f][e];
      if (g == boundary_edge) continue;
      auto a = mesh.faces[f][e], b = mesh.faces[f][(e + 1) % 3];
      auto ga = corner_of(mesh, g, a), gb = corner_of(mesh, g, b);
      if (ga < 0 || gb < 0) continue;
      if (same_uv(mesh.uvs[f][e], mesh.uvs[g][ga]) &&
          same_uv(mesh.uvs[f][(e + 1) % 3], mesh.uvs[g][gb]))
        sets.join(uint32_t(f), uint32_t(g));
    }
  }
  auto label  = std::vector<uint32_t>(mesh.faces.size());
  auto remap  = std::map<uint32_t, uint32_t>{};
  for (size_t f = 0; f < mesh.faces.size(); f++) {
    auto root = sets.find(uint32_t(f));
    auto it   = remap.try_emplace(root, uint32_t(remap.size())).first;
    label[f]  = it->second;
  }
  return label;
}

// -----------------------------------------------------------------------------
// RASTERIZATION
// -----------------------------------------------------------------------------

texel_atlas rasterize_atlas(const mesh_data& mesh, int width, int height) {
  if (width < 4 || height < 4)
    throw precondition_error(
        fmt::format("atlas resolution {}x{} below 4x4", width, height));
  if (mesh.uvs.size() != mesh.faces.size())
    throw precondition_error("mesh has no UVs; UV unwrapping is a precondition");

  auto atlas   = texel_atlas{};
  atlas.width  = width;
  atlas.height = height;
  atlas.lookup.assign(size_t(width) * height, unused_texel);
  atlas.face_chart = compute_face_charts(mesh);

  // owner face and barycentrics per texel; lowest face id wins because faces
  // are visited in order and only strictly-inside hits count as overlap
  constexpr auto no_face  = ~uint32_t{0};
  auto owner    = std::vector<uint32_t>(size_t(width) * height, no_face);
  auto owner_bc = std::vector<std::array<double, 3>>(size_t(width) * height);
  auto overlaps = size_t{0};
  for (size_t f = 0; f < mesh.faces.size(); f++) {
    auto& uv    = mesh.uvs[f];
    auto  area2 = 2 * uv_area(uv);
    if (std::abs(area2) < 2e-12) continue;
    auto lo = uv_to_texel_space(uv[0], width, height), hi = lo;
    for (int c = 1; c < 3; c++) {
      auto t = uv_to_texel_space(uv[c], width, height);
      lo = {std::min(lo.x, t.x), std::min(lo.y, t.y)};
      hi = {std::max(hi.x, t.x), std::max(hi.y, t.y)};
    }
    auto i0 = std::max(0, int(std::ceil(lo.x - 1e-9)));
    auto i1 = std::min(width - 1, int(std::floor(hi.x + 1e-9)));
    auto j0 = std::max(0, int(std::ceil(lo.y - 1e-9)));
    auto j1 = std::min(height - 1, int(std::floor(hi.y + 1e-9)));
    for (auto j = j0; j <= j1; j++) {
      for (auto i = i0; i <= i1; i++) {
        auto bc = uv_barycentric(uv, texel_center_uv(i, j, width, height), area2);
        if (bc[0] < -1e-12 || bc[1] < -1e-12 || bc[2] < -1e-12) continue;
        auto index = size_t(j) * width + i;
        if (owner[index] != no_face) {
          if (bc[0] > 1e-9 && bc[1] > 1e-9 && bc[2] > 1e-9) {
            auto& prev = owner_bc[index];
            if (prev[0] > 1e-9 && prev[1] > 1e-9 && prev[2] > 1e-9) overlaps++;
          }
          continue;
        }
        for (auto& b : bc) b = std::clamp(b, 0.0, 1.0);
        auto sum = bc[0] + bc[1] + bc[2];
        for (auto& b : bc) b /= sum;
        owner[index]    = uint32_t(f);
        owner_bc[index] = bc;
      }
    }
  }

  for (int j = 0; j < height; j++) {
    for (int i = 0; i < width; i++) {
      auto index = size_t(j) * width + i;
      if (owner[index] == no_face) continue;
      atlas.lookup[index] = int32_t(atlas.coords.size());
      atlas.coords.push_back({uint32_t(i), uint32_t(j)});
      atlas.points.push_back({owner[index], owner_bc[index]});
      atlas.chart.push_back(atlas.face_chart[owner[index]]);
    }
  }
  if (atlas.coords.empty())
    throw precondition_error("degenerate UV layout: no texel centers covered");
  if (overlaps)
    atlas.warnings.push_back(fmt::format(
        "{} texels covered by overlapping UV triangles; lowest face id kept",
        overlaps));

  auto estimate    = estimate_texel_size(mesh, width, height);
  atlas.texel_size = estimate.size;
  if (estimate.distorted_faces)
    atlas.warnings.push_back(fmt::format(
        "uv distortion: {} faces deviate more than 2x from the median texel size",
        estimate.distorted_faces));
  return atlas;
}

texel_size_estimate estimate_texel_size(
    const mesh_data& mesh, int width, int height) {
  auto estimate = texel_size_estimate{};
  estimate.per_face.assign(mesh.faces.size(), 0);
  auto values = std::vector<double>{};
  for (size_t f = 0; f < mesh.faces.size(); f++) {
    auto area = std::abs(uv_area(mesh.uvs[f]));
    if (area < 1e-12 || mesh.areas[f] <= 0) continue;
    auto size = std::sqrt(mesh.areas[f] / (area * width * height));
    estimate.per_face[f] = size;
    values.push_back(size);
  }
  if (values.empty())
    throw precondition_error("all faces have degenerate UV or world area");
  std::sort(values.begin(), values.end());
  auto mid      = values.size() / 2;
  estimate.size = values.size() % 2 ? values[mid]
                                    : (values[mid - 1] + values[mid]) / 2;
  for (auto v : values)
    if (v > 2 * estimate.size || v < estimate.size / 2) estimate.distorted_faces++;
  return estimate;
}

// -----------------------------------------------------------------------------
// TEXEL LOOKUP
// -----------------------------------------------------------------------------

namespace {

int32_t nearest_chart_texel(
    const texel_atlas& atlas, vec2 uv, uint32_t chart, double max_distance) {
  auto p     = uv_to_texel_space(uv, atlas.width, atlas.height);
  auto i     = int(std::floor(p.x + 0.5)), j = int(std::floor(p.y + 0.5));
  auto best  = unused_texel;
  auto bestd = max_distance * max_distance;
  for (auto dj = -1; dj <= 1; dj++) {
    for (auto di = -1; di <= 1; di++) {
      auto t = atlas.texel_at(i + di, j + dj);
      if (t == unused_texel || atlas.chart[t] != chart) continue;
      auto dx = p.x - (i + di), dy = p.y - (j + dj);
      auto d  = dx * dx + dy * dy;
      if (d < bestd || (d == bestd && t < best)) {
        best  = t;
        bestd = d;
      }
    }
  }
  return best;
}

}  // namespace

int32_t locate_texel(
    const mesh_data& mesh, const texel_atlas& atlas, const surface_point& point) {
  auto uv    = eval_uv(mesh, point);
  auto chart = atlas.face_chart[point.face];
  auto i = int(std::floor(uv.x * atlas.width)),
       j = int(std::floor((1 - uv.y) * atlas.height));
  i = std::clamp(i, 0, atlas.width - 1);
  j = std::clamp(j, 0, atlas.height - 1);
  auto t = atlas.texel_at(i, j);
  if (t != unused_texel && atlas.chart[t] == chart) return t;
  return nearest_chart_texel(atlas, uv, chart, 1.5);
}

// -----------------------------------------------------------------------------
// TEXEL GRAPH
// -----------------------------------------------------------------------------

namespace {

struct edge_interval {
  uint32_t texel;
  double   begin, end;  // parameter along the mesh edge, in [0, 1]
};

// Texels of one chart lining a UV edge, with the stretch of the edge each
// of them borders.
std::vector<edge_interval> seam_intervals(
    const texel_atlas& atlas, vec2 uv_a, vec2 uv_b, uint32_t chart) {
  auto delta   = uv_b - uv_a;
  auto texels  = length(vec2{delta.x * atlas.width, delta.y * atlas.height});
  auto samples = std::max(2, int(std::ceil(16 * texels)));
  auto first   = std::map<uint32_t, std::pair<int, int>>{};
  for (auto k = 0; k < samples; k++) {
    auto t  = (k + 0.5) / samples;
    auto uv = uv_a + t * delta;
    auto i  = std::clamp(int(std::floor(uv.x * atlas.width)), 0, atlas.width - 1);
    auto j  = std::clamp(
        int(std::floor((1 - uv.y) * atlas.height)), 0, atlas.height - 1);
    auto texel = atlas.texel_at(i, j);
    if (texel == unused_texel || atlas.chart[texel] != chart)
      texel = nearest_chart_texel(atlas, uv, chart, 1.5);
    if (texel == unused_texel) continue;
    auto [it, fresh] = first.try_emplace(uint32_t(texel), k, k);
    if (!fresh) {
      it->second.first  = std::min(it->second.first, k);
      it->second.second = std::max(it->second.second, k);
    }
  }
  auto intervals = std::vector<edge_interval>{};
  for (auto& [texel, range] : first)
    intervals.push_back({texel, double(range.first) / samples,
        double(range.second + 1) / samples});
  return intervals;
}

}  // namespace

texel_graph build_texel_graph(const mesh_data& mesh, const texel_atlas& atlas) {
  auto edges = std::vector<std::pair<uint32_t, uint32_t>>{};
  for (size_t t = 0; t < atlas.size(); t++) {
    auto [i, j] = atlas.coords[t];
    for (auto [di, dj] : {std::pair{1, 0}, std::pair{0, 1}}) {
      auto n = atlas.texel_at(int(i) + di, int(j) + dj);
      if (n != unused_texel && atlas.chart[n] == atlas.chart[t])
        edges.emplace_back(uint32_t(t), uint32_t(n));
    }
  }

  // seams: mesh edges whose two sides carry different UVs
  auto min_overlap = 0.1 * atlas.texel_size;
  for (size_t f = 0; f < mesh.faces.size(); f++) {
    for (int e = 0; e < 3; e++) {
      auto g = mesh.adjacency[f][e];
      if (g == boundary_edge || size_t(g) < f) continue;
      auto a = mesh.faces[f][e], b = mesh.faces[f][(e + 1) % 3];
      auto ga = corner_of(mesh, g, a), gb = corner_of(mesh, g, b);
      auto& fuv = mesh.uvs[f];
      auto& guv = mesh.uvs[g];
      if (same_uv(fuv[e], guv[ga]) && same_uv(fuv[(e + 1) % 3], guv[gb])) continue;
      auto world = length(mesh.positions[b] - mesh.positions[a]);
      auto side_f = seam_intervals(atlas, fuv[e], fuv[(e + 1) % 3], atlas.face_chart[f]);
      auto side_g = seam_intervals(atlas, guv[ga], guv[gb], atlas.face_chart[g]);
      for (auto& p : side_f) {
        for (auto& q : side_g) {
          auto overlap = std::min(p.end, q.end) - std::max(p.begin, q.begin);
          if (overlap * world >= min_overlap) edges.emplace_back(p.texel, q.texel);
        }
      }
    }
  }
  return make_texel_graph(atlas.size(), std::move(edges));
}

}  // namespace meshstyle
