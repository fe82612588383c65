#include "meshstyle/geodesic.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "meshstyle/errors.hpp"

namespace meshstyle {

// -----------------------------------------------------------------------------
// TRACING
// -----------------------------------------------------------------------------

namespace {

constexpr double vertex_tolerance = 1e-12;
constexpr double vertex_nudge     = 1e-9;

int corner_of(const mesh_data& mesh, size_t face, uint32_t vertex) {
  for (int c = 0; c < 3; c++)
    if (mesh.faces[face][c] == vertex) return c;
  return -1;
}

// Unit vector in the face plane, perpendicular to the edge, pointing at the
// third corner.
vec3 inward(const mesh_data& mesh, size_t face, int edge) {
  auto a = mesh.corner(face, edge), b = mesh.corner(face, (edge + 1) % 3);
  auto c = mesh.corner(face, (edge + 2) % 3);
  auto e = normalize(b - a);
  auto d = c - a;
  return normalize(d - dot(d, e) * e);
}

std::array<vec3, 3> bary_gradients(const mesh_data& mesh, size_t face) {
  auto a = mesh.corner(face, 0), b = mesh.corner(face, 1), c = mesh.corner(face, 2);
  auto n     = mesh.normals[face];
  auto area2 = 2 * mesh.areas[face];
  return {cross(n, c - b) / area2, cross(n, a - c) / area2, cross(n, b - a) / area2};
}

void normalize_bary(std::array<double, 3>& bary) {
  for (auto& b : bary) b = std::max(b, 0.0);
  auto sum = bary[0] + bary[1] + bary[2];
  for (auto& b : bary) b /= sum;
}

void validate_point(const mesh_data& mesh, const surface_point& point) {
  if (point.face >= mesh.faces.size())
    throw precondition_error(fmt::format("surface point on missing face {}", point.face));
  auto sum = point.bary[0] + point.bary[1] + point.bary[2];
  for (auto b : point.bary)
    if (!(b >= -1e-9 && b <= 1 + 1e-9))
      throw precondition_error("surface point barycentrics outside [0,1]");
  if (std::abs(sum - 1) > 1e-6)
    throw precondition_error("surface point barycentrics do not sum to 1");
}

}  // namespace

geodesic_trace trace_geodesic(const mesh_data& mesh, const surface_point& start,
    vec2 direction, double length, double texel_size) {
  validate_point(mesh, start);
  if (!(length >= 0)) throw precondition_error("negative trace length");
  auto trace  = geodesic_trace{};
  trace.start = start;
  trace.end   = start;
  if (length == 0) return trace;
  auto dir_length = meshstyle::length(direction);
  if (!(dir_length > 0) || !std::isfinite(dir_length))
    throw precondition_error("trace direction must be non-zero");

  auto frame = face_frame(mesh, start.face);
  auto dir   = normalize((direction.x / dir_length) * frame.tangent +
                         (direction.y / dir_length) * frame.bitangent);
  auto face      = start.face;
  auto bary      = start.bary;
  auto remaining = length;
  auto arc       = 0.0;
  auto entry     = -1;  // edge of `face` the trace came in through
  auto budget    = texel_size > 0
                       ? std::max(64.0, std::ceil(64 * length / texel_size))
                       : double(1 << 20);
  auto crossings = 0;
  auto nudges    = 0;
  normalize_bary(bary);

  auto push = [&](const std::array<double, 3>& to, double step) {
    if (!(step > 0)) return;
    trace.segments.push_back({face, bary, to, arc, arc + step});
    trace.path.push_back({{face, to}, arc + step});
  };

  while (true) {
    if (mesh.areas[face] <= 0) {
      trace.terminated_at_boundary = true;
      trace.end = {face, bary};
      break;
    }
    auto grads = bary_gradients(mesh, face);
    auto rates = std::array<double, 3>{};
    for (int i = 0; i < 3; i++) rates[i] = dot(grads[i], dir);

    auto skip   = entry >= 0 ? (entry + 2) % 3 : -1;
    auto best_t = std::numeric_limits<double>::infinity();
    auto best_i = -1;
    for (int i = 0; i < 3; i++) {
      if (i == skip) continue;
      if (rates[i] < -1e-12 * meshstyle::length(grads[i])) {
        auto t = std::max(bary[i], 0.0) / -rates[i];
        if (t < best_t) best_t = t, best_i = i;
      }
    }

    if (best_i < 0 || best_t >= remaining) {
      auto end = bary;
      for (int i = 0; i < 3; i++) end[i] += remaining * rates[i];
      normalize_bary(end);
      push(end, remaining);
      bary      = end;
      trace.end = {face, end};
      break;
    }

    auto exit = bary;
    for (int i = 0; i < 3; i++) exit[i] += best_t * rates[i];
    exit[best_i] = 0;

    // exact vertex hits have no well defined continuation: nudge sideways
    auto at_vertex = false;
    for (int j = 0; j < 3; j++)
      if (j != best_i && exit[j] <= vertex_tolerance) at_vertex = true;
    if (at_vertex && nudges < 8) {
      auto side  = normalize(cross(mesh.normals[face], dir)) *
                  (vertex_nudge * std::sqrt(mesh.areas[face]) * (1 << nudges));
      nudges++;
      auto moved = bary;
      for (int i = 0; i < 3; i++) moved[i] += dot(grads[i], side);
      if (std::min({moved[0], moved[1], moved[2]}) < 0) {
        moved = bary;
        for (int i = 0; i < 3; i++) moved[i] -= dot(grads[i], side);
      }
      normalize_bary(moved);
      bary = moved;
      continue;
    }
    normalize_bary(exit);
    exit[best_i] = 0;

    push(exit, best_t);
    arc += best_t;
    remaining -= best_t;
    bary = exit;

    auto edge = (best_i + 1) % 3;
    auto next = mesh.adjacency[face][edge];
    if (next == boundary_edge) {
      trace.terminated_at_boundary = true;
      trace.end = {face, exit};
      break;
    }
    if (++crossings > budget)
      throw numerical_error(fmt::format(
          "geodesic trace exceeded its crossing budget ({} crossings)", crossings));

    auto va = mesh.faces[face][edge], vb = mesh.faces[face][(edge + 1) % 3];
    auto pa = mesh.positions[va], pb = mesh.positions[vb];
    auto along = normalize(pb - pa);
    auto a     = dot(dir, along);
    auto c     = dot(dir, inward(mesh, face, edge));
    auto point = exit[edge] * pa + exit[(edge + 1) % 3] * pb;
    auto next_edge = int(mesh.adjacency_edge[face][edge]);

    if (mesh.areas[next] <= 1e-12 * mesh.areas[face]) {
      // hop over a zero-area face through its longest connected edge
      trace.degenerate_faces_skipped++;
      auto hop = -1;
      auto hop_length = -1.0;
      for (int e = 0; e < 3; e++) {
        if (e == next_edge) continue;
        auto h = mesh.adjacency[next][e];
        if (h == boundary_edge || uint32_t(h) == face || mesh.areas[h] <= 0) continue;
        auto l = meshstyle::length(
            mesh.corner(next, (e + 1) % 3) - mesh.corner(next, e));
        if (l > hop_length) hop = e, hop_length = l;
      }
      if (hop < 0) {
        trace.terminated_at_boundary = true;
        trace.end = {face, exit};
        break;
      }
      auto qa = mesh.corner(next, hop), qb = mesh.corner(next, (hop + 1) % 3);
      auto hop_along = normalize(qb - qa);
      auto tau = std::clamp(dot(point - qa, qb - qa) / dot(qb - qa, qb - qa), 0.0, 1.0);
      if (dot(hop_along, along) < 0) a = -a;
      auto ha = mesh.faces[next][hop], hb = mesh.faces[next][(hop + 1) % 3];
      auto target      = uint32_t(mesh.adjacency[next][hop]);
      auto target_edge = int(mesh.adjacency_edge[next][hop]);
      auto nb = std::array<double, 3>{};
      nb[corner_of(mesh, target, ha)] = 1 - tau;
      nb[corner_of(mesh, target, hb)] = tau;
      dir   = normalize(a * hop_along - c * inward(mesh, target, target_edge));
      face  = target;
      bary  = nb;
      entry = target_edge;
      continue;
    }

    auto nb = std::array<double, 3>{};
    nb[corner_of(mesh, next, va)] = exit[edge];
    nb[corner_of(mesh, next, vb)] = exit[(edge + 1) % 3];
    dir   = normalize(a * along - c * inward(mesh, next, next_edge));
    face  = uint32_t(next);
    bary  = nb;
    entry = next_edge;
  }
  return trace;
}

// -----------------------------------------------------------------------------
// SAMPLE RESOLUTION
// -----------------------------------------------------------------------------

bool kernel_adjacent(const texel_graph& graph, uint32_t center, uint32_t texel) {
  if (center == texel || graph.adjacent(center, texel)) return true;
  auto shared = 0;
  for (auto n : graph.neighbors(center))
    if (graph.adjacent(n, texel) && ++shared >= 2) return true;
  return false;
}

sample_taps resolve_sample(const mesh_data& mesh, const geodesic_trace& trace,
    const texel_atlas& atlas, const level_view& level, uint32_t center,
    interpolation interp) {
  auto& graph = *level.graph;
  auto owner  = [&](const surface_point& point) -> std::optional<uint32_t> {
    auto finest = locate_texel(mesh, atlas, point);
    if (finest == unused_texel) return std::nullopt;
    return level.from_finest(uint32_t(finest));
  };
  auto accepts = [&](std::optional<uint32_t> texel) {
    return texel && kernel_adjacent(graph, center, *texel);
  };

  auto result = sample_taps{};
  auto chosen = std::optional<surface_point>{};
  auto held   = owner(trace.end);
  if (accepts(held)) {
    chosen = trace.end;
  } else {
    result.corrected = true;
    auto spacing     = atlas.texel_size / 4;
    for (auto s = trace.segments.rbegin(); s != trace.segments.rend() && !chosen; s++) {
      auto steps = std::max(1, int(std::ceil((s->arc_to - s->arc_from) / spacing)));
      auto first = s == trace.segments.rbegin() ? 1 : 0;
      for (auto k = first; k <= steps; k++) {
        auto t     = 1 - double(k) / steps;
        auto point = surface_point{s->face, {}};
        for (int i = 0; i < 3; i++)
          point.bary[i] = (1 - t) * s->from[i] + t * s->to[i];
        auto candidate = owner(point);
        if (accepts(candidate)) {
          chosen = point;
          held   = candidate;
          break;
        }
      }
    }
  }
  if (!chosen) {
    result.degenerate = true;
    result.taps       = {{center, 1.0}};
    return result;
  }

  if (interp == interpolation::nearest || !level.finest_to_level.empty()) {
    result.taps = {{*held, 1.0}};
    return result;
  }

  auto chart = atlas.chart[*held];
  auto p     = uv_to_texel_space(eval_uv(mesh, *chosen), atlas.width, atlas.height);
  auto i0 = int(std::floor(p.x)), j0 = int(std::floor(p.y));
  auto fx = p.x - i0, fy = p.y - j0;
  auto total = 0.0;
  for (auto [di, dj, w] : {std::tuple{0, 0, (1 - fx) * (1 - fy)},
           std::tuple{1, 0, fx * (1 - fy)}, std::tuple{0, 1, (1 - fx) * fy},
           std::tuple{1, 1, fx * fy}}) {
    if (w <= 1e-9) continue;
    auto t = atlas.texel_at(i0 + di, j0 + dj);
    if (t == unused_texel || atlas.chart[t] != chart) continue;
    if (!kernel_adjacent(graph, center, uint32_t(t))) continue;
    result.taps.push_back({uint32_t(t), w});
    total += w;
  }
  if (total <= 0) {
    result.taps = {{*held, 1.0}};
    return result;
  }
  for (auto& tap : result.taps) tap.weight /= total;
  return result;
}

}  // namespace meshstyle
