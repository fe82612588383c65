#include <fmt/format.h>

#include <cmath>
#include <cstring>

#include "binary_io.hpp"
#include "meshstyle/errors.hpp"
#include "meshstyle/network.hpp"

namespace meshstyle {

// -----------------------------------------------------------------------------
// SPEC QUERIES
// -----------------------------------------------------------------------------

const std::string& layer_name(const layer& l) {
  return std::visit([](auto& x) -> const std::string& { return x.name; }, l);
}

void validate_network(const network_spec& spec) {
  if (spec.architecture != "vgg19" && spec.architecture != "custom")
    throw precondition_error("unknown architecture '" + spec.architecture + "'");
  for (auto m : spec.means)
    if (!std::isfinite(m)) throw precondition_error("non-finite channel mean");

  auto channels = uint32_t{3};
  auto conv     = 0;
  for (size_t i = 0; i < spec.layers.size(); i++) {
    auto& l = spec.layers[i];
    if (auto c = std::get_if<conv_layer>(&l)) {
      conv++;
      auto label = fmt::format("layer {} (conv {} '{}')", i, conv, c->name);
      if (c->kernel % 2 == 0 || c->kernel == 0)
        throw precondition_error(label + ": kernel width must be odd");
      if (c->in_channels != channels)
        throw precondition_error(fmt::format(
            "{}: expects {} input channels, previous layer gives {}", label,
            c->in_channels, channels));
      if (spec.architecture == "vgg19") {
        if (conv > int(vgg19_channels.size()))
          throw precondition_error(label + ": vgg19 has 16 conv layers");
        if (c->out_channels != vgg19_channels[conv - 1])
          throw precondition_error(fmt::format(
              "{}: vgg19 expects {} output channels, file has {}", label,
              vgg19_channels[conv - 1], c->out_channels));
        if (c->kernel != 3) throw precondition_error(label + ": vgg19 uses 3x3 kernels");
      }
      if (c->weights.size() != size_t(c->out_channels) * c->in_channels * c->kernel * c->kernel ||
          c->bias.size() != c->out_channels)
        throw precondition_error(label + ": coefficient count does not match shape");
      for (auto w : c->weights)
        if (!std::isfinite(w)) throw precondition_error(label + ": non-finite weight");
      for (auto b : c->bias)
        if (!std::isfinite(b)) throw precondition_error(label + ": non-finite bias");
      channels = c->out_channels;
    } else if (auto p = std::get_if<pool_layer>(&l)) {
      if (p->window < 2)
        throw precondition_error(fmt::format("layer {}: pool window below 2", i));
    }
  }
  if (spec.architecture == "vgg19" && conv != int(vgg19_channels.size()))
    throw precondition_error(
        fmt::format("vgg19 needs 16 conv layers, file has {}", conv));
}

size_t feature_layer(const network_spec& spec, const std::string& name) {
  for (size_t i = 0; i < spec.layers.size(); i++) {
    if (layer_name(spec.layers[i]) != name) continue;
    if (std::holds_alternative<conv_layer>(spec.layers[i]) &&
        i + 1 < spec.layers.size() &&
        std::holds_alternative<relu_layer>(spec.layers[i + 1]))
      return i + 1;
    return i;
  }
  throw precondition_error("network has no layer named '" + name + "'");
}

std::vector<std::string> conv_layer_names(const network_spec& spec) {
  auto names = std::vector<std::string>{};
  for (auto& l : spec.layers)
    if (std::holds_alternative<conv_layer>(l)) names.push_back(layer_name(l));
  return names;
}

uint32_t layer_level(const network_spec& spec, size_t index) {
  auto level = uint32_t{0};
  for (size_t i = 0; i < index && i < spec.layers.size(); i++)
    if (std::holds_alternative<pool_layer>(spec.layers[i])) level++;
  return level;
}

// -----------------------------------------------------------------------------
// MSWT FILES
// -----------------------------------------------------------------------------

namespace {
enum struct layer_kind : uint8_t { conv = 0, relu = 1, pool = 2 };
}

std::vector<uint8_t> serialize_weights(const network_spec& spec) {
  auto out = detail::writer{};
  out.put_bytes("MSWT", 4);
  out.put(weights_version);
  out.put_string(spec.architecture);
  out.put(uint8_t(spec.order));
  for (auto m : spec.means) out.put(m);
  out.put(uint32_t(spec.layers.size()));
  for (auto& l : spec.layers) {
    if (auto c = std::get_if<conv_layer>(&l)) {
      out.put(uint8_t(layer_kind::conv));
      out.put_string(c->name);
      out.put(c->out_channels);
      out.put(c->in_channels);
      out.put(c->kernel);
      for (auto w : c->weights) out.put(w);
      for (auto b : c->bias) out.put(b);
    } else if (auto r = std::get_if<relu_layer>(&l)) {
      out.put(uint8_t(layer_kind::relu));
      out.put_string(r->name);
    } else if (auto p = std::get_if<pool_layer>(&l)) {
      out.put(uint8_t(layer_kind::pool));
      out.put_string(p->name);
      out.put(p->window);
    }
  }
  return std::move(out.bytes);
}

network_spec parse_weights(const std::vector<uint8_t>& bytes) {
  auto in = detail::reader{bytes.data(), bytes.size(), 0, "weights header",
      error_kind::precondition};
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "MSWT", 4) != 0)
    throw precondition_error("weights magic mismatch: not an MSWT file");
  in.pos       = 4;
  auto version = in.get<uint32_t>();
  if (version != weights_version)
    throw precondition_error(fmt::format(
        "weights version mismatch: file has {}, expected {}", version, weights_version));
  auto spec         = network_spec{};
  spec.architecture = in.get_string();
  auto order        = in.get<uint8_t>();
  if (order > 1) throw precondition_error("weights: bad channel order flag");
  spec.order = channel_order(order);
  for (auto& m : spec.means) m = in.get<float>();
  auto count = in.get<uint32_t>();
  for (uint32_t i = 0; i < count; i++) {
    in.where  = fmt::format("weights layer {}", i);
    auto kind = in.get<uint8_t>();
    auto name = in.get_string();
    if (kind == uint8_t(layer_kind::conv)) {
      auto c         = conv_layer{};
      c.name         = name;
      c.out_channels = in.get<uint32_t>();
      c.in_channels  = in.get<uint32_t>();
      c.kernel       = in.get<uint32_t>();
      auto n = uint64_t(c.out_channels) * c.in_channels * c.kernel * c.kernel;
      if ((in.size - in.pos) / 4 < n + c.out_channels) in.fail();
      c.weights.resize(n);
      for (auto& w : c.weights) w = in.get<float>();
      c.bias.resize(c.out_channels);
      for (auto& b : c.bias) b = in.get<float>();
      spec.layers.emplace_back(std::move(c));
    } else if (kind == uint8_t(layer_kind::relu)) {
      spec.layers.emplace_back(relu_layer{name});
    } else if (kind == uint8_t(layer_kind::pool)) {
      spec.layers.emplace_back(pool_layer{name, in.get<uint32_t>()});
    } else {
      throw precondition_error(fmt::format("weights layer {}: unknown kind {}", i, kind));
    }
  }
  validate_network(spec);
  return spec;
}

network_spec load_weights(const std::string& filename) {
  return parse_weights(detail::read_file(filename, "weights"));
}

void save_weights(const std::string& filename, const network_spec& spec) {
  detail::write_file(filename, serialize_weights(spec), "weights");
}

std::array<uint8_t, 32> coefficient_hash(const network_spec& spec) {
  auto out = detail::writer{};
  for (auto& l : spec.layers) {
    if (auto c = std::get_if<conv_layer>(&l)) {
      out.put_bytes(c->weights.data(), c->weights.size() * sizeof(float));
      out.put_bytes(c->bias.data(), c->bias.size() * sizeof(float));
    }
  }
  return detail::sha256(out.bytes);
}

std::array<uint8_t, 32> file_hash(const std::string& filename) {
  return detail::sha256(detail::read_file(filename, "input"));
}

}  // namespace meshstyle
