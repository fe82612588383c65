//
// Texel atlas: which texels of the UV layout are covered by the mesh, where
// each one lives on the surface, and how texels connect across UV seams.
//
// Texel (i, j) is column i, row j counted from the top of the image, so its
// center has uv ((i + 0.5) / width, 1 - (j + 0.5) / height).
//

#ifndef MESHSTYLE_ATLAS_HPP
#define MESHSTYLE_ATLAS_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mesh.hpp"

namespace meshstyle {

inline constexpr int32_t unused_texel = -1;

struct texel_atlas {
  int width  = 0;
  int height = 0;
  std::vector<std::array<uint32_t, 2>> coords;  // (column, row) per used texel
  std::vector<surface_point>           points;  // texel center on the surface
  std::vector<uint32_t>                chart;   // chart id per used texel
  std::vector<uint32_t>                face_chart;
  std::vector<int32_t>                 lookup;  // row-major, unused_texel if empty
  double                               texel_size = 0;
  std::vector<std::string>             warnings;

  size_t  size() const { return coords.size(); }
  int32_t texel_at(int column, int row) const {
    if (column < 0 || row < 0 || column >= width || row >= height)
      return unused_texel;
    return lookup[size_t(row) * width + column];
  }
};

// Undirected texel adjacency in CSR form.
struct texel_graph {
  std::vector<uint32_t> offsets = {0};
  std::vector<uint32_t> targets;

  size_t size() const { return offsets.size() - 1; }
  std::span<const uint32_t> neighbors(size_t texel) const {
    return {targets.data() + offsets[texel], offsets[texel + 1] - offsets[texel]};
  }
  bool adjacent(uint32_t a, uint32_t b) const;
};

// Builds a symmetric, self-loop free graph from an unordered edge list.
texel_graph make_texel_graph(
    size_t count, std::vector<std::pair<uint32_t, uint32_t>> edges);

// Continuous texel coordinates: texel (i, j) has its center at (i, j).
vec2 uv_to_texel_space(vec2 uv, int width, int height);
vec2 texel_center_uv(int column, int row, int width, int height);

// Charts: faces joined across edges whose shared vertices have equal UVs.
std::vector<uint32_t> compute_face_charts(const mesh_data& mesh);

texel_atlas rasterize_atlas(const mesh_data& mesh, int width, int height);

struct texel_size_estimate {
  double              size = 0;
  std::vector<double> per_face;  // 0 for faces excluded as degenerate
  size_t              distorted_faces = 0;  // outside [median/2, 2*median]
};
texel_size_estimate estimate_texel_size(
    const mesh_data& mesh, int width, int height);

texel_graph build_texel_graph(const mesh_data& mesh, const texel_atlas& atlas);

// Used texel owning a surface point: the texel containing its UV if that
// texel belongs to the point's chart, otherwise the nearest same-chart used
// texel within one texel. Returns unused_texel when none qualifies.
int32_t locate_texel(
    const mesh_data& mesh, const texel_atlas& atlas, const surface_point& point);

}  // namespace meshstyle

#endif
