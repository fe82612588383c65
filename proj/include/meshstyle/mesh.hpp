//
// Triangle meshes with per-corner UVs, face adjacency and tangent frames.
//

#ifndef MESHSTYLE_MESH_HPP
#define MESHSTYLE_MESH_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "math.hpp"

namespace meshstyle {

inline constexpr int32_t boundary_edge = -1;

// Indexed triangle mesh. Edge e of face f runs from faces[f][e] to
// faces[f][(e + 1) % 3]; adjacency[f][e] is the face on the other side of
// that edge (or boundary_edge) and adjacency_edge[f][e] the matching edge
// index inside that face.
struct mesh_data {
  std::vector<vec3>                    positions;
  std::vector<std::array<uint32_t, 3>> faces;
  std::vector<std::array<vec2, 3>>     uvs;  // per corner, in [0,1]^2
  std::vector<vec3>                    normals;
  std::vector<std::array<int32_t, 3>>  adjacency;
  std::vector<std::array<int8_t, 3>>   adjacency_edge;
  std::vector<double>                  areas;
  std::vector<std::string>             warnings;

  size_t face_count() const { return faces.size(); }
  vec3   corner(size_t face, int c) const { return positions[faces[face][c]]; }
};

// A point on the surface: face id plus barycentric weights.
struct surface_point {
  uint32_t              face = 0;
  std::array<double, 3> bary = {1, 0, 0};
};

struct tangent_frame {
  vec3 tangent, bitangent, normal;
};

// Global reference vectors for Gram-Schmidt frames. The fallback is used
// when the reference is parallel to the normal.
inline constexpr vec3   frame_reference          = {1, 0, 0};
inline constexpr vec3   frame_reference_fallback = {0, 1, 0};
inline constexpr double frame_parallel_tolerance = 1e-6;

// Loads a Wavefront OBJ. Polygons are fan-triangulated; faces without UVs
// are rejected. Non-manifold edges and out-of-range UVs are reported in
// mesh.warnings.
mesh_data load_mesh(const std::string& filename);
mesh_data parse_obj(const std::string& text, const std::string& source = "");

// Builds normals, areas and adjacency for a mesh whose positions, faces and
// uvs are already filled in.
void build_topology(mesh_data& mesh);

void        save_obj(const std::string& filename, const mesh_data& mesh);
std::string format_obj(const mesh_data& mesh);

tangent_frame make_tangent_frame(vec3 normal, vec3 reference = frame_reference,
    vec3 fallback = frame_reference_fallback);

inline tangent_frame face_frame(const mesh_data& mesh, size_t face) {
  return make_tangent_frame(mesh.normals[face]);
}

vec3 eval_position(const mesh_data& mesh, const surface_point& point);
vec2 eval_uv(const mesh_data& mesh, const surface_point& point);

// Canonical byte serialization used for content hashing.
std::vector<uint8_t> mesh_bytes(const mesh_data& mesh);

// Axis aligned bounds of the vertex positions.
std::array<vec3, 2> mesh_bounds(const mesh_data& mesh);

}  // namespace meshstyle

#endif
