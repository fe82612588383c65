#include "meshstyle/precompute.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "meshstyle/errors.hpp"
#include "meshstyle/parallel.hpp"

namespace meshstyle {

// -----------------------------------------------------------------------------
// LEVEL GEOMETRY
// -----------------------------------------------------------------------------

level_geometry make_finest_level(const mesh_data& mesh, const texel_atlas& atlas,
    const texel_graph& graph) {
  auto level       = level_geometry{};
  level.points     = atlas.points;
  level.coords     = atlas.coords;
  level.graph      = graph;
  level.texel_size = atlas.texel_size;
  level.positions.reserve(atlas.size());
  for (auto& p : atlas.points) level.positions.push_back(eval_position(mesh, p));
  level.areas.assign(atlas.size(), atlas.texel_size * atlas.texel_size);
  return level;
}

double level_step(double texel_size, uint32_t window, uint32_t level) {
  return texel_size * std::pow(double(window), double(level));
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

}  // namespace

std::pair<pool_level, level_geometry> build_pool_level(const mesh_data& mesh,
    const level_geometry& finer, uint32_t n, uint32_t window, double texel_size,
    vec3 origin) {
  if (n < 1) throw precondition_error("pooling index starts at 1");
  if (window < 2) throw precondition_error("pooling window must be at least 2");
  auto pool       = pool_level{};
  pool.voxel_size = level_step(texel_size, window, n);

  auto count = finer.size();
  auto voxel = std::vector<std::array<int64_t, 3>>(count);
  for (size_t t = 0; t < count; t++) {
    auto rel = (finer.positions[t] - origin) / pool.voxel_size;
    voxel[t] = {int64_t(std::floor(rel.x)), int64_t(std::floor(rel.y)),
        int64_t(std::floor(rel.z))};
  }

  auto sets = union_find{count};
  for (size_t a = 0; a < count; a++)
    for (auto b : finer.graph.neighbors(a))
      if (b > a && voxel[a] == voxel[b]) sets.join(uint32_t(a), b);

  // groups numbered by their lowest member
  constexpr auto none = ~uint32_t{0};
  auto group_of_root = std::vector<uint32_t>(count, none);
  pool.parent.resize(count);
  auto groups = uint32_t{0};
  for (size_t t = 0; t < count; t++) {
    auto root = sets.find(uint32_t(t));
    if (group_of_root[root] == none) group_of_root[root] = groups++;
    pool.parent[t] = group_of_root[root];
  }
  pool.offsets.assign(groups + 1, 0);
  for (auto g : pool.parent) pool.offsets[g + 1]++;
  std::partial_sum(pool.offsets.begin(), pool.offsets.end(), pool.offsets.begin());
  pool.members.resize(count);
  auto fill = std::vector<uint32_t>(pool.offsets.begin(), pool.offsets.end() - 1);
  for (size_t t = 0; t < count; t++) pool.members[fill[pool.parent[t]]++] = uint32_t(t);

  auto coarse = level_geometry{};
  coarse.texel_size = pool.voxel_size;
  coarse.points.resize(groups);
  coarse.positions.resize(groups);
  coarse.areas.resize(groups);
  coarse.coords.resize(groups);
  for (uint32_t g = 0; g < groups; g++) {
    auto members = pool.group(g);
    auto mean    = vec3{};
    auto area    = 0.0;
    for (auto m : members) {
      mean += finer.areas[m] * finer.positions[m];
      area += finer.areas[m];
    }
    mean = mean / area;
    auto faces = std::vector<uint32_t>{};
    for (auto m : members) faces.push_back(finer.points[m].face);
    std::sort(faces.begin(), faces.end());
    faces.erase(std::unique(faces.begin(), faces.end()), faces.end());
    auto best      = surface_point{};
    auto best_dist = std::numeric_limits<double>::infinity();
    for (auto f : faces) {
      auto bary = closest_point_barycentric(
          mean, mesh.corner(f, 0), mesh.corner(f, 1), mesh.corner(f, 2));
      auto point = surface_point{f, bary};
      auto dist  = length(eval_position(mesh, point) - mean);
      if (dist < best_dist) best = point, best_dist = dist;
    }
    coarse.points[g]    = best;
    coarse.positions[g] = eval_position(mesh, best);
    coarse.areas[g]     = area;
    coarse.coords[g]    = finer.coords[members.front()];
  }

  auto edges = std::vector<std::pair<uint32_t, uint32_t>>{};
  for (size_t a = 0; a < count; a++)
    for (auto b : finer.graph.neighbors(a))
      if (b > a && pool.parent[a] != pool.parent[b])
        edges.emplace_back(pool.parent[a], pool.parent[b]);
  coarse.graph = make_texel_graph(groups, std::move(edges));

  if (finer.finest_to_level.empty()) {
    coarse.finest_to_level = pool.parent;
  } else {
    coarse.finest_to_level.resize(finer.finest_to_level.size());
    for (size_t t = 0; t < finer.finest_to_level.size(); t++)
      coarse.finest_to_level[t] = pool.parent[finer.finest_to_level[t]];
  }
  return {std::move(pool), std::move(coarse)};
}

// -----------------------------------------------------------------------------
// NEIGHBOR TABLES
// -----------------------------------------------------------------------------

neighbor_table build_neighbor_table(const mesh_data& mesh,
    const texel_atlas& atlas, const level_geometry& level, uint32_t level_index,
    uint32_t kernel, double step, interpolation interp,
    precompute_diagnostics* diagnostics) {
  if (kernel % 2 == 0) throw precondition_error("kernel width must be odd");
  if (!(step > 0)) throw precondition_error("kernel step must be positive");
  auto table   = neighbor_table{};
  table.level  = level_index;
  table.kernel = kernel;
  table.step   = step;
  table.interp = interp;

  struct chunk_result {
    std::vector<uint8_t>  counts;
    std::vector<uint32_t> texels;
    std::vector<float>    weights;
    size_t degenerate = 0, corrected = 0, boundary = 0, skipped = 0;
  };
  auto half    = int(kernel / 2);
  auto offsets = size_t(kernel) * kernel;
  auto view    = level.view();
  constexpr auto grain = size_t{256};
  auto chunks = std::vector<chunk_result>((level.size() + grain - 1) / grain);
  parallel_for(level.size(), grain, [&](size_t begin, size_t end) {
    auto& out = chunks[begin / grain];
    out.counts.reserve((end - begin) * offsets);
    for (auto t = begin; t < end; t++) {
      for (auto dy = -half; dy <= half; dy++) {
        for (auto dx = -half; dx <= half; dx++) {
          if (dx == 0 && dy == 0) {
            out.counts.push_back(1);
            out.texels.push_back(uint32_t(t));
            out.weights.push_back(1);
            continue;
          }
          // image rows run against the bitangent
          auto offset = vec2{double(dx), double(-dy)};
          auto trace  = trace_geodesic(mesh, level.points[t], offset,
               length(offset) * step, atlas.texel_size);
          auto taps = resolve_sample(mesh, trace, atlas, view, uint32_t(t), interp);
          out.degenerate += taps.degenerate;
          out.corrected += taps.corrected;
          out.boundary += trace.terminated_at_boundary;
          out.skipped += size_t(trace.degenerate_faces_skipped);
          out.counts.push_back(uint8_t(taps.taps.size()));
          for (auto& tap : taps.taps) {
            out.texels.push_back(tap.texel);
            out.weights.push_back(float(tap.weight));
          }
        }
      }
    }
  });

  table.offsets.reserve(level.size() * offsets + 1);
  auto totals = chunk_result{};
  for (auto& chunk : chunks) {
    for (auto c : chunk.counts) table.offsets.push_back(table.offsets.back() + c);
    table.texels.insert(table.texels.end(), chunk.texels.begin(), chunk.texels.end());
    table.weights.insert(
        table.weights.end(), chunk.weights.begin(), chunk.weights.end());
    totals.degenerate += chunk.degenerate;
    totals.corrected += chunk.corrected;
    totals.boundary += chunk.boundary;
    totals.skipped += chunk.skipped;
  }
  if (diagnostics) {
    diagnostics->degenerate_taps += totals.degenerate;
    diagnostics->corrected_taps += totals.corrected;
    diagnostics->boundary_terminations += totals.boundary;
    diagnostics->degenerate_faces_skipped += totals.skipped;
    auto traced = level.size() * (offsets - 1);
    if (traced && totals.degenerate * 100 > traced)
      diagnostics->warnings.push_back(fmt::format(
          "level {}: {} of {} taps fell back to the center texel", level_index,
          totals.degenerate, traced));
  }
  return table;
}

// -----------------------------------------------------------------------------
// FULL PRECOMPUTATION
// -----------------------------------------------------------------------------

precomputed precompute(const mesh_data& mesh, const precompute_options& options) {
  auto start  = std::chrono::steady_clock::now();
  auto data   = precomputed{};
  data.options = options;
  data.hash    = content_hash(mesh, options);
  data.face_normals = mesh.normals;

  auto atlas      = rasterize_atlas(mesh, options.width, options.height);
  data.texel_size = atlas.texel_size;
  data.diagnostics.warnings = mesh.warnings;
  for (auto& w : atlas.warnings) data.diagnostics.warnings.push_back(w);

  auto graph = build_texel_graph(mesh, atlas);
  data.levels.push_back(make_finest_level(mesh, atlas, graph));
  auto origin = mesh_bounds(mesh)[0];
  for (uint32_t n = 1; n <= options.pool_levels; n++) {
    auto [pool, coarse] = build_pool_level(
        mesh, data.levels.back(), n, options.pool_window, atlas.texel_size, origin);
    data.pools.push_back(std::move(pool));
    data.levels.push_back(std::move(coarse));
  }
  for (uint32_t l = 0; l < data.levels.size(); l++) {
    auto interp = l == 0 ? options.first_interp : options.other_interp;
    data.tables.push_back(build_neighbor_table(mesh, atlas, data.levels[l], l,
        options.kernel, level_step(atlas.texel_size, options.pool_window, l),
        interp, &data.diagnostics));
  }
  data.seconds = std::chrono::duration<double>(
      std::chrono::steady_clock::now() - start).count();
  return data;
}

}  // namespace meshstyle
