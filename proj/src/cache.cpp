#include <fmt/format.h>

#include <cstring>

#include "binary_io.hpp"
#include "meshstyle/errors.hpp"
#include "meshstyle/precompute.hpp"

namespace meshstyle {

// -----------------------------------------------------------------------------
// HASHING
// -----------------------------------------------------------------------------

using detail::reader;
using detail::sha256;
using detail::writer;

std::array<uint8_t, 32> content_hash(
    const mesh_data& mesh, const precompute_options& options) {
  auto out = writer{};
  out.bytes = mesh_bytes(mesh);
  out.put(int32_t(options.width));
  out.put(int32_t(options.height));
  out.put(options.kernel);
  out.put(options.pool_window);
  out.put(options.pool_levels);
  out.put(uint8_t(options.first_interp));
  out.put(uint8_t(options.other_interp));
  return sha256(out.bytes);
}

std::string hex_string(const std::array<uint8_t, 32>& hash) {
  auto text = std::string{};
  for (auto b : hash) text += fmt::format("{:02x}", b);
  return text;
}

// -----------------------------------------------------------------------------
// SERIALIZATION
// -----------------------------------------------------------------------------

std::vector<uint8_t> serialize_cache(const precomputed& data) {
  auto out = writer{};
  out.put_bytes(reinterpret_cast<const uint8_t*>("MSTX"), 4);
  out.put(cache_version);
  out.put_bytes(data.hash.data(), data.hash.size());

  auto header = writer{};
  header.put(int32_t(data.options.width));
  header.put(int32_t(data.options.height));
  header.put(data.options.kernel);
  header.put(data.options.pool_window);
  header.put(data.options.pool_levels);
  header.put(uint8_t(data.options.first_interp));
  header.put(uint8_t(data.options.other_interp));
  header.put(data.texel_size);
  header.put(uint32_t(data.face_normals.size()));
  for (auto& n : data.face_normals)
    for (int i = 0; i < 3; i++) header.put(float(n[i]));
  auto& diag = data.diagnostics;
  header.put(uint64_t(diag.degenerate_taps));
  header.put(uint64_t(diag.corrected_taps));
  header.put(uint64_t(diag.boundary_terminations));
  header.put(uint64_t(diag.degenerate_faces_skipped));
  header.put(uint32_t(diag.warnings.size()));
  for (auto& w : diag.warnings) header.put_string(w);
  header.put(data.seconds);
  out.put_section(header);

  out.put(uint32_t(data.levels.size()));
  for (uint32_t l = 0; l < data.levels.size(); l++) {
    auto& level = data.levels[l];
    out.put(l);

    auto coords = writer{};
    coords.put(uint32_t(level.coords.size()));
    for (auto [i, j] : level.coords) coords.put(i), coords.put(j);
    out.put_section(coords);

    auto graph = writer{};
    graph.put(uint32_t(level.graph.size()));
    for (auto o : level.graph.offsets) graph.put(o);
    graph.put(uint32_t(level.graph.targets.size()));
    for (auto t : level.graph.targets) graph.put(t);
    out.put_section(graph);

    auto taps = writer{};
    if (l < data.tables.size()) {
      auto& table = data.tables[l];
      taps.put(table.kernel);
      taps.put(table.step);
      taps.put(uint8_t(table.interp));
      taps.put(uint32_t(table.offsets.size() - 1));
      for (size_t e = 0; e + 1 < table.offsets.size(); e++) {
        taps.put(uint8_t(table.offsets[e + 1] - table.offsets[e]));
        for (auto k = table.offsets[e]; k < table.offsets[e + 1]; k++) {
          taps.put(table.texels[k]);
          taps.put(table.weights[k]);
        }
      }
    } else {
      taps.put(uint32_t(0));
      taps.put(0.0);
      taps.put(uint8_t(0));
      taps.put(uint32_t(0));
    }
    out.put_section(taps);

    auto groups = writer{};
    if (l > 0) {
      auto& pool = data.pools[l - 1];
      groups.put(uint32_t(pool.group_count()));
      for (auto o : pool.offsets) groups.put(o);
      groups.put(uint32_t(pool.members.size()));
      for (auto m : pool.members) groups.put(m);
      groups.put(pool.voxel_size);
    } else {
      groups.put(uint32_t(0));
      groups.put(uint32_t(0));
      groups.put(uint32_t(0));
      groups.put(0.0);
    }
    out.put_section(groups);

    auto points = writer{};
    points.put(uint32_t(level.points.size()));
    for (auto& p : level.points) {
      points.put(p.face);
      for (auto b : p.bary) points.put(float(b));
    }
    out.put_section(points);
  }
  return std::move(out.bytes);
}

void save_cache(const std::string& filename, const precomputed& data) {
  detail::write_file(filename, serialize_cache(data), "cache");
}

precomputed parse_cache(
    const std::vector<uint8_t>& bytes, const std::array<uint8_t, 32>* expected_hash) {
  auto in = reader{bytes.data(), bytes.size(), 0, "file header"};
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "MSTX", 4) != 0)
    throw compatibility_error("cache magic mismatch: not an MSTX file");
  in.pos       = 4;
  auto version = in.get<uint32_t>();
  if (version != cache_version)
    throw compatibility_error(fmt::format(
        "cache version mismatch: file has {}, expected {}", version, cache_version));
  auto data = precomputed{};
  for (auto& b : data.hash) b = in.get<uint8_t>();
  if (expected_hash && *expected_hash != data.hash)
    throw compatibility_error("cache hash mismatch: mesh or precompute options differ");

  auto header = in.section("header");
  data.options.width        = header.get<int32_t>();
  data.options.height       = header.get<int32_t>();
  data.options.kernel       = header.get<uint32_t>();
  data.options.pool_window  = header.get<uint32_t>();
  data.options.pool_levels  = header.get<uint32_t>();
  data.options.first_interp = interpolation(header.get<uint8_t>());
  data.options.other_interp = interpolation(header.get<uint8_t>());
  data.texel_size           = header.get<double>();
  auto faces                = header.count(12);
  data.face_normals.resize(faces);
  for (auto& n : data.face_normals)
    for (int i = 0; i < 3; i++) n[i] = header.get<float>();
  auto& diag                    = data.diagnostics;
  diag.degenerate_taps          = header.get<uint64_t>();
  diag.corrected_taps           = header.get<uint64_t>();
  diag.boundary_terminations    = header.get<uint64_t>();
  diag.degenerate_faces_skipped = header.get<uint64_t>();
  auto warnings                 = header.count(4);
  for (uint32_t w = 0; w < warnings; w++) diag.warnings.push_back(header.get_string());
  data.seconds = header.get<double>();

  in.where    = "level count";
  auto levels = in.get<uint32_t>();
  if (levels != data.options.pool_levels + 1)
    throw compatibility_error("cache level count disagrees with header");
  for (uint32_t l = 0; l < levels; l++) {
    in.where = fmt::format("level {}", l);
    if (in.get<uint32_t>() != l)
      throw compatibility_error(fmt::format("cache level {} out of order", l));
    auto level       = level_geometry{};
    level.texel_size = level_step(data.texel_size, data.options.pool_window, l);
    auto name        = [&](const char* section) {
      return fmt::format("section '{}' of level {}", section, l);
    };

    auto coords = in.section(name("coords"));
    level.coords.resize(coords.count(8));
    for (auto& c : level.coords) c = {coords.get<uint32_t>(), coords.get<uint32_t>()};

    auto graph = in.section(name("graph"));
    auto nodes = graph.count(4);
    level.graph.offsets.resize(size_t(nodes) + 1);
    for (auto& o : level.graph.offsets) o = graph.get<uint32_t>();
    level.graph.targets.resize(graph.count(4));
    for (auto& t : level.graph.targets) t = graph.get<uint32_t>();

    auto taps  = in.section(name("taps"));
    auto table = neighbor_table{};
    table.level   = l;
    table.kernel  = taps.get<uint32_t>();
    table.step    = taps.get<double>();
    table.interp  = interpolation(taps.get<uint8_t>());
    auto entries  = taps.count(1);
    table.offsets.reserve(size_t(entries) + 1);
    for (uint32_t e = 0; e < entries; e++) {
      auto n = taps.get<uint8_t>();
      for (int k = 0; k < n; k++) {
        table.texels.push_back(taps.get<uint32_t>());
        table.weights.push_back(taps.get<float>());
      }
      table.offsets.push_back(uint32_t(table.texels.size()));
    }

    auto groups = in.section(name("groups"));
    auto pool   = pool_level{};
    auto ngroup = groups.count(4);
    pool.offsets.resize(size_t(ngroup) + 1);
    for (auto& o : pool.offsets) o = groups.get<uint32_t>();
    pool.members.resize(groups.count(4));
    for (auto& m : pool.members) m = groups.get<uint32_t>();
    pool.voxel_size = groups.get<double>();

    auto points = in.section(name("points"));
    level.points.resize(points.count(16));
    for (auto& p : level.points) {
      p.face = points.get<uint32_t>();
      for (auto& b : p.bary) b = points.get<float>();
    }

    if (level.coords.size() != level.points.size() ||
        level.graph.size() != level.points.size())
      throw compatibility_error(fmt::format("cache level {} sizes disagree", l));
    if (table.kernel &&
        table.offsets.size() - 1 != level.size() * table.kernel * table.kernel)
      throw compatibility_error(fmt::format("cache taps of level {} incomplete", l));
    for (auto t : level.graph.targets)
      if (t >= level.size())
        throw compatibility_error(fmt::format("cache graph of level {} out of range", l));
    for (auto t : table.texels)
      if (t >= level.size())
        throw compatibility_error(fmt::format("cache taps of level {} out of range", l));

    if (l > 0) {
      auto& finer = data.levels.back();
      if (pool.group_count() != level.size() || pool.members.size() != finer.size())
        throw compatibility_error(fmt::format("cache groups of level {} inconsistent", l));
      pool.parent.assign(finer.size(), 0);
      for (uint32_t g = 0; g < pool.group_count(); g++)
        for (auto m : pool.group(g)) {
          if (m >= finer.size())
            throw compatibility_error(fmt::format("cache groups of level {} out of range", l));
          pool.parent[m] = g;
        }
      if (finer.finest_to_level.empty()) {
        level.finest_to_level = pool.parent;
      } else {
        level.finest_to_level.resize(finer.finest_to_level.size());
        for (size_t t = 0; t < finer.finest_to_level.size(); t++)
          level.finest_to_level[t] = pool.parent[finer.finest_to_level[t]];
      }
      data.pools.push_back(std::move(pool));
    }
    data.levels.push_back(std::move(level));
    data.tables.push_back(std::move(table));
  }
  return data;
}

precomputed load_cache(
    const std::string& filename, const std::array<uint8_t, 32>* expected_hash) {
  return parse_cache(detail::read_file(filename, "cache"), expected_hash);
}

}  // namespace meshstyle
