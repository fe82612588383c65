//
// Straightest geodesics on the piecewise-flat mesh, and resolution of traced
// end points to texel taps.
//

#ifndef MESHSTYLE_GEODESIC_HPP
#define MESHSTYLE_GEODESIC_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "atlas.hpp"
#include "mesh.hpp"

namespace meshstyle {

// A straight piece of a trace inside one face.
struct trace_segment {
  uint32_t              face = 0;
  std::array<double, 3> from = {}, to = {};
  double                arc_from = 0, arc_to = 0;
};

struct path_vertex {
  surface_point point;
  double        arc = 0;
};

struct geodesic_trace {
  surface_point              start;
  surface_point              end;
  std::vector<path_vertex>   path;  // segment end points, arc strictly increasing
  std::vector<trace_segment> segments;
  bool                       terminated_at_boundary = false;
  int                        degenerate_faces_skipped = 0;
};

// Walks `length` world units from `start` along `direction`, given in the
// (tangent, bitangent) frame of the start face. texel_size bounds the number
// of face crossings to 64 * length / texel_size; pass 0 to use a fixed cap.
geodesic_trace trace_geodesic(const mesh_data& mesh, const surface_point& start,
    vec2 direction, double length, double texel_size = 0);

enum struct interpolation : uint8_t { nearest = 0, bilinear = 1 };

struct sample_tap {
  uint32_t texel  = 0;
  double   weight = 0;
};

struct sample_taps {
  std::vector<sample_tap> taps;
  bool corrected  = false;  // end point was walked back
  bool degenerate = false;  // walk exhausted, fell back to the center
};

// One level of the texel hierarchy as seen by sample resolution.
struct level_view {
  const texel_graph*     graph = nullptr;
  std::span<const uint32_t> finest_to_level;  // empty at the finest level
  double                 texel_size = 0;      // world size of one level texel

  uint32_t from_finest(uint32_t finest) const {
    return finest_to_level.empty() ? finest : finest_to_level[finest];
  }
};

// Texels a kernel tap may land on around `center`: the center itself, its
// graph neighbors, and corner neighbors (texels sharing at least two graph
// neighbors with the center, the diagonals of a regular grid).
bool kernel_adjacent(const texel_graph& graph, uint32_t center, uint32_t texel);

// Resolves a trace to taps around `center`. If the end point's texel is not
// kernel-adjacent to the center, the trace is walked backward until it is.
// Bilinear weights are only available at the finest level; coarser levels
// always resolve to the nearest texel.
sample_taps resolve_sample(const mesh_data& mesh, const geodesic_trace& trace,
    const texel_atlas& atlas, const level_view& level, uint32_t center,
    interpolation interp);

}  // namespace meshstyle

#endif
