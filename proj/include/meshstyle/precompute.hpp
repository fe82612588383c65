//
// Per-level texel geometry, pooling groups and convolution neighbor tables.
//
// Level 0 is the texel atlas itself. Level n > 0 groups the texels of level
// n - 1 that fall into the same voxel of edge pool_window^n * s and are
// connected through the level n - 1 texel graph inside that voxel.
//

#ifndef MESHSTYLE_PRECOMPUTE_HPP
#define MESHSTYLE_PRECOMPUTE_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "atlas.hpp"
#include "geodesic.hpp"
#include "mesh.hpp"

namespace meshstyle {

struct level_geometry {
  std::vector<surface_point>           points;
  std::vector<vec3>                    positions;
  std::vector<double>                  areas;
  std::vector<std::array<uint32_t, 2>> coords;  // representative finest texel
  std::vector<uint32_t>                finest_to_level;  // empty at level 0
  texel_graph                          graph;
  double                               texel_size = 0;

  size_t     size() const { return points.size(); }
  level_view view() const { return {&graph, finest_to_level, texel_size}; }
};

// Groups of level n - 1 texels forming the texels of level n.
struct pool_level {
  std::vector<uint32_t> offsets = {0};  // CSR over groups
  std::vector<uint32_t> members;        // ascending within a group
  std::vector<uint32_t> parent;         // finer texel -> group
  double                voxel_size = 0;

  size_t group_count() const { return offsets.size() - 1; }
  std::span<const uint32_t> group(size_t g) const {
    return {members.data() + offsets[g], offsets[g + 1] - offsets[g]};
  }
};

// Taps for every (texel, kernel offset) pair, row-major over the k x k
// offsets: entry = texel * k * k + (dy + k/2) * k + (dx + k/2).
struct neighbor_table {
  uint32_t              level  = 0;
  uint32_t              kernel = 0;
  double                step   = 0;
  interpolation         interp = interpolation::nearest;
  std::vector<uint32_t> offsets = {0};
  std::vector<uint32_t> texels;
  std::vector<float>    weights;

  size_t texel_count() const {
    return kernel ? (offsets.size() - 1) / (size_t(kernel) * kernel) : 0;
  }
};

struct precompute_diagnostics {
  size_t degenerate_taps      = 0;
  size_t corrected_taps       = 0;
  size_t boundary_terminations = 0;
  size_t degenerate_faces_skipped = 0;
  std::vector<std::string> warnings;
};

struct precompute_options {
  int           width       = 256;
  int           height      = 256;
  uint32_t      kernel      = 3;
  uint32_t      pool_window = 2;
  uint32_t      pool_levels = 5;
  interpolation first_interp = interpolation::bilinear;
  interpolation other_interp = interpolation::nearest;
};

struct precomputed {
  precompute_options          options;
  std::array<uint8_t, 32>     hash = {};
  double                      texel_size = 0;
  std::vector<vec3>           face_normals;
  std::vector<level_geometry> levels;  // pool_levels + 1 entries
  std::vector<pool_level>     pools;   // pools[n - 1] builds levels[n]
  std::vector<neighbor_table> tables;  // one per level
  precompute_diagnostics      diagnostics;
  double                      seconds = 0;

  size_t used_texels() const { return levels.front().size(); }
};

level_geometry make_finest_level(const mesh_data& mesh, const texel_atlas& atlas,
    const texel_graph& graph);

// Builds pooling level n from level n - 1. Voxels are anchored at `origin`.
std::pair<pool_level, level_geometry> build_pool_level(const mesh_data& mesh,
    const level_geometry& finer, uint32_t n, uint32_t window, double texel_size,
    vec3 origin);

// The world step for kernel offsets at a level: s * window^level.
double level_step(double texel_size, uint32_t window, uint32_t level);

neighbor_table build_neighbor_table(const mesh_data& mesh,
    const texel_atlas& atlas, const level_geometry& level, uint32_t level_index,
    uint32_t kernel, double step, interpolation interp,
    precompute_diagnostics* diagnostics = nullptr);

// Full precomputation for a mesh at the given atlas resolution.
precomputed precompute(const mesh_data& mesh, const precompute_options& options);

// Content hash of the mesh and every option that shapes the tables.
std::array<uint8_t, 32> content_hash(
    const mesh_data& mesh, const precompute_options& options);
std::string hex_string(const std::array<uint8_t, 32>& hash);

// Binary cache. load_cache checks the format version and, when given,
// the expected content hash.
inline constexpr uint32_t cache_version = 1;
void        save_cache(const std::string& filename, const precomputed& data);
std::vector<uint8_t> serialize_cache(const precomputed& data);
precomputed load_cache(const std::string& filename,
    const std::array<uint8_t, 32>* expected_hash = nullptr);
precomputed parse_cache(const std::vector<uint8_t>& bytes,
    const std::array<uint8_t, 32>* expected_hash = nullptr);

}  // namespace meshstyle

#endif
