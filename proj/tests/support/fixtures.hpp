//
// Meshes, networks and images shared by the unit and acceptance tests.
//

#ifndef MESHSTYLE_TESTS_FIXTURES_HPP
#define MESHSTYLE_TESTS_FIXTURES_HPP

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "meshstyle/mesh.hpp"
#include "meshstyle/network.hpp"
#include "meshstyle/precompute.hpp"

namespace meshstyle::testing {

// -----------------------------------------------------------------------------
// MESHES
// -----------------------------------------------------------------------------

// Square [0, size]^2 in the z = 0 plane, two triangles, uv = (x, y) / size.
mesh_data flat_grid(double size = 1);

// Two disjoint unit-scale squares. The left one fills uv [0, 0.5] x [0, 1];
// the right one is mirrored so its uv column next to u = 0.5 lies far away
// on the surface.
mesh_data two_islands();

// Icosahedron with each face split into n^2 triangles and pushed onto the
// unit sphere. UVs follow the classic 5-strip net, so the atlas has seams.
mesh_data icosphere(int subdivisions);

// Open cylinder of radius 1 and height 2 with one UV seam along x > 0.
mesh_data cylinder(int around, int along);

// -----------------------------------------------------------------------------
// NETWORKS AND IMAGES
// -----------------------------------------------------------------------------

// Random conv layers with the given output channels. Every conv gets a ReLU;
// a pool follows each conv whose index is in pool_after.
network_spec random_network(const std::vector<uint32_t>& channels,
    const std::vector<size_t>& pool_after, uint64_t seed, uint32_t kernel = 3);

feature_map<float>  random_image(int width, int height, uint64_t seed);
feature_map<double> random_map(uint32_t channels, size_t count, uint64_t seed);

// Smooth stripes plus blobs in [0, 1]; a textured exemplar for synthesis runs.
feature_map<float> pattern_image(int width, int height, uint64_t seed);

// Texels of a flat grid atlas as an image (row-major, all texels used).
feature_map<float> atlas_to_image(const feature_map<float>& texture,
    const level_geometry& level, int width, int height);

// -----------------------------------------------------------------------------
// UTILITIES
// -----------------------------------------------------------------------------

struct stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::string temp_dir(const std::string& name);

}  // namespace meshstyle::testing

#endif
