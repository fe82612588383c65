#include "meshstyle/mesh.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string_view>

#include "meshstyle/errors.hpp"

namespace meshstyle {

// -----------------------------------------------------------------------------
// OBJ PARSING
// -----------------------------------------------------------------------------

namespace {

std::string_view next_token(std::string_view& line) {
  auto start = line.find_first_not_of(" \t\r");
  if (start == std::string_view::npos) {
    line = {};
    return {};
  }
  line.remove_prefix(start);
  auto end   = line.find_first_of(" \t\r");
  auto token = line.substr(0, end);
  line.remove_prefix(end == std::string_view::npos ? line.size() : end);
  return token;
}

double parse_double(std::string_view token, const std::string& where) {
  // from_chars for double is missing in older libstdc++
  auto text  = std::string{token};
  char* end  = nullptr;
  auto value = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size())
    throw precondition_error(fmt::format("{}: bad number '{}'", where, text));
  return value;
}

long parse_index(std::string_view token, const std::string& where) {
  long value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size())
    throw precondition_error(
        fmt::format("{}: bad index '{}'", where, std::string{token}));
  return value;
}

// OBJ indices are 1-based; negative values count back from the end.
uint32_t resolve_index(long index, size_t count, const std::string& where) {
  auto resolved = index > 0 ? index - 1 : long(count) + index;
  if (index == 0 || resolved < 0 || resolved >= long(count))
    throw precondition_error(
        fmt::format("{}: index {} out of range", where, index));
  return uint32_t(resolved);
}

double wrap_unit(double value, bool& wrapped) {
  if (value >= 0 && value <= 1) return value;
  wrapped = true;
  return value - std::floor(value);
}

}  // namespace

mesh_data parse_obj(const std::string& text, const std::string& source) {
  auto mesh      = mesh_data{};
  auto texcoords = std::vector<vec2>{};
  auto wrapped   = false;
  auto dropped   = 0;
  auto stream    = std::istringstream{text};
  auto line      = std::string{};
  auto line_no   = 0;
  while (std::getline(stream, line)) {
    line_no++;
    auto where = fmt::format("{}:{}", source, line_no);
    auto rest  = std::string_view{line};
    auto cmd   = next_token(rest);
    if (cmd == "v") {
      auto p = vec3{};
      for (int i = 0; i < 3; i++) p[i] = parse_double(next_token(rest), where);
      mesh.positions.push_back(p);
    } else if (cmd == "vt") {
      auto uv = vec2{};
      for (int i = 0; i < 2; i++)
        uv[i] = wrap_unit(parse_double(next_token(rest), where), wrapped);
      texcoords.push_back(uv);
    } else if (cmd == "f") {
      auto corners = std::vector<std::pair<uint32_t, uint32_t>>{};
      for (auto token = next_token(rest); !token.empty();
           token      = next_token(rest)) {
        auto slash = token.find('/');
        auto vtok  = token.substr(0, slash);
        if (slash == std::string_view::npos) {
          throw precondition_error(fmt::format(
              "{}: face without texture coordinates; UV unwrapping is a "
              "precondition",
              where));
        }
        auto rest_tok = token.substr(slash + 1);
        auto ttok     = rest_tok.substr(0, rest_tok.find('/'));
        if (ttok.empty()) {
          throw precondition_error(fmt::format(
              "{}: face without texture coordinates; UV unwrapping is a "
              "precondition",
              where));
        }
        corners.emplace_back(
            resolve_index(parse_index(vtok, where), mesh.positions.size(), where),
            resolve_index(parse_index(ttok, where), texcoords.size(), where));
      }
      if (corners.size() < 3)
        throw precondition_error(fmt::format("{}: face with fewer than 3 corners", where));
      // fan triangulation around the first corner
      for (size_t i = 1; i + 1 < corners.size(); i++) {
        auto tri = std::array{corners[0], corners[i], corners[i + 1]};
        if (tri[0].first == tri[1].first || tri[1].first == tri[2].first ||
            tri[0].first == tri[2].first) {
          dropped++;
          continue;
        }
        mesh.faces.push_back({tri[0].first, tri[1].first, tri[2].first});
        mesh.uvs.push_back(
            {texcoords[tri[0].second], texcoords[tri[1].second],
                texcoords[tri[2].second]});
      }
    }
  }
  if (mesh.faces.empty())
    throw precondition_error(fmt::format("{}: mesh has no faces", source));
  if (wrapped)
    mesh.warnings.push_back("uv coordinates outside [0,1] wrapped by fractional part");
  if (dropped)
    mesh.warnings.push_back(
        fmt::format("dropped {} faces with repeated vertices", dropped));
  build_topology(mesh);
  return mesh;
}

mesh_data load_mesh(const std::string& filename) {
  auto file = std::ifstream{filename, std::ios::binary};
  if (!file) throw io_error("cannot open mesh " + filename);
  auto buffer = std::stringstream{};
  buffer << file.rdbuf();
  if (file.bad()) throw io_error("cannot read mesh " + filename);
  return parse_obj(buffer.str(), filename);
}

// -----------------------------------------------------------------------------
// TOPOLOGY
// -----------------------------------------------------------------------------

void build_topology(mesh_data& mesh) {
  auto nfaces = mesh.faces.size();
  mesh.normals.assign(nfaces, {0, 0, 1});
  mesh.areas.assign(nfaces, 0);
  mesh.adjacency.assign(nfaces, {boundary_edge, boundary_edge, boundary_edge});
  mesh.adjacency_edge.assign(nfaces, {-1, -1, -1});

  auto degenerate = 0;
  for (size_t f = 0; f < nfaces; f++) {
    for (auto v : mesh.faces[f])
      if (v >= mesh.positions.size())
        throw precondition_error(fmt::format("face {} references missing vertex {}", f, v));
    auto n     = cross(mesh.corner(f, 1) - mesh.corner(f, 0),
            mesh.corner(f, 2) - mesh.corner(f, 0));
    auto len   = length(n);
    mesh.areas[f] = len / 2;
    if (len > 0 && std::isfinite(len)) {
      mesh.normals[f] = n / len;
    } else {
      degenerate++;
    }
  }
  if (degenerate)
    mesh.warnings.push_back(fmt::format("{} zero-area faces", degenerate));

  auto edges = std::map<std::pair<uint32_t, uint32_t>,
      std::vector<std::pair<uint32_t, int8_t>>>{};
  for (size_t f = 0; f < nfaces; f++) {
    for (int e = 0; e < 3; e++) {
      auto a = mesh.faces[f][e], b = mesh.faces[f][(e + 1) % 3];
      edges[{std::min(a, b), std::max(a, b)}].emplace_back(uint32_t(f), int8_t(e));
    }
  }
  auto nonmanifold = 0;
  for (auto& [key, users] : edges) {
    if (users.size() == 2) {
      auto [fa, ea] = users[0];
      auto [fb, eb] = users[1];
      mesh.adjacency[fa][ea]      = int32_t(fb);
      mesh.adjacency_edge[fa][ea] = eb;
      mesh.adjacency[fb][eb]      = int32_t(fa);
      mesh.adjacency_edge[fb][eb] = ea;
    } else if (users.size() > 2) {
      nonmanifold++;
    }
  }
  if (nonmanifold)
    mesh.warnings.push_back(fmt::format(
        "{} non-manifold edges left unconnected", nonmanifold));
}

// -----------------------------------------------------------------------------
// OBJ WRITING
// -----------------------------------------------------------------------------

std::string format_obj(const mesh_data& mesh) {
  auto out = std::string{};
  for (auto& p : mesh.positions)
    out += fmt::format("v {:.17g} {:.17g} {:.17g}\n", p.x, p.y, p.z);
  for (auto& face_uv : mesh.uvs)
    for (auto& uv : face_uv) out += fmt::format("vt {:.17g} {:.17g}\n", uv.x, uv.y);
  for (size_t f = 0; f < mesh.faces.size(); f++) {
    auto& face = mesh.faces[f];
    out += fmt::format("f {}/{} {}/{} {}/{}\n", face[0] + 1, 3 * f + 1,
        face[1] + 1, 3 * f + 2, face[2] + 1, 3 * f + 3);
  }
  return out;
}

void save_obj(const std::string& filename, const mesh_data& mesh) {
  auto file = std::ofstream{filename, std::ios::binary};
  if (!file) throw io_error("cannot write mesh " + filename);
  file << format_obj(mesh);
  if (!file) throw io_error("cannot write mesh " + filename);
}

// -----------------------------------------------------------------------------
// FRAMES AND EVALUATION
// -----------------------------------------------------------------------------

tangent_frame make_tangent_frame(vec3 normal, vec3 reference, vec3 fallback) {
  auto projected = reference - dot(reference, normal) * normal;
  if (length(projected) < frame_parallel_tolerance)
    projected = fallback - dot(fallback, normal) * normal;
  auto tangent = normalize(projected);
  return {tangent, cross(normal, tangent), normal};
}

vec3 eval_position(const mesh_data& mesh, const surface_point& point) {
  auto& face = mesh.faces[point.face];
  return point.bary[0] * mesh.positions[face[0]] +
         point.bary[1] * mesh.positions[face[1]] +
         point.bary[2] * mesh.positions[face[2]];
}

vec2 eval_uv(const mesh_data& mesh, const surface_point& point) {
  auto& uv = mesh.uvs[point.face];
  return point.bary[0] * uv[0] + point.bary[1] * uv[1] + point.bary[2] * uv[2];
}

std::vector<uint8_t> mesh_bytes(const mesh_data& mesh) {
  auto bytes = std::vector<uint8_t>{};
  auto put   = [&](const void* data, size_t size) {
    auto ptr = static_cast<const uint8_t*>(data);
    bytes.insert(bytes.end(), ptr, ptr + size);
  };
  auto put_u64 = [&](uint64_t value) {
    for (int i = 0; i < 8; i++) bytes.push_back(uint8_t(value >> (8 * i)));
  };
  put_u64(mesh.positions.size());
  for (auto& p : mesh.positions) put(&p, sizeof(p));
  put_u64(mesh.faces.size());
  for (size_t f = 0; f < mesh.faces.size(); f++) {
    for (auto v : mesh.faces[f]) put_u64(v);
    for (auto& uv : mesh.uvs[f]) put(&uv, sizeof(uv));
  }
  return bytes;
}

std::array<vec3, 2> mesh_bounds(const mesh_data& mesh) {
  auto lo = mesh.positions.front(), hi = lo;
  for (auto& p : mesh.positions) {
    for (int i = 0; i < 3; i++) {
      lo[i] = std::min(lo[i], p[i]);
      hi[i] = std::max(hi[i], p[i]);
    }
  }
  return {lo, hi};
}

}  // namespace meshstyle
