#include "meshstyle/network.hpp"

#include <fmt/format.h>

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "meshstyle/errors.hpp"
#include "meshstyle/parallel.hpp"

namespace meshstyle {

namespace {

template <typename T>
using row_matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using strided_map = Eigen::Map<row_matrix<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using const_strided_map = Eigen::Map<const row_matrix<T>, 0, Eigen::OuterStride<>>;

constexpr size_t spatial_grain = 256;

// weights as an out x (in * k * k) matrix in the working precision
template <typename T>
row_matrix<T> weight_matrix(const conv_layer& layer) {
  auto cols = Eigen::Index(layer.in_channels) * layer.kernel * layer.kernel;
  return Eigen::Map<const row_matrix<float>>(
      layer.weights.data(), layer.out_channels, cols)
      .template cast<T>();
}

}  // namespace

template <typename T>
bool all_finite(const feature_map<T>& map) {
  return std::all_of(map.values.begin(), map.values.end(),
      [](T v) { return std::isfinite(v); });
}

// -----------------------------------------------------------------------------
// SHARED LAYERS
// -----------------------------------------------------------------------------

template <typename T>
feature_map<T> preprocess(const network_spec& spec, const feature_map<T>& input) {
  if (input.channels != 3)
    throw precondition_error("network input must have 3 channels");
  auto out = input;
  for (uint32_t c = 0; c < 3; c++) {
    auto src = spec.order == channel_order::reverse ? 2 - c : c;
    auto in  = input.channel(src);
    auto dst = out.channel(c);
    for (size_t p = 0; p < input.count; p++) dst[p] = in[p] - T(spec.means[c]);
  }
  return out;
}

template <typename T>
feature_map<T> relu(const feature_map<T>& input) {
  auto out = input;
  for (auto& v : out.values) v = v > 0 ? v : T(0);
  return out;
}

// -----------------------------------------------------------------------------
// IMAGE PATH
// -----------------------------------------------------------------------------

template <typename T>
feature_map<T> conv_2d(const feature_map<T>& input, const conv_layer& layer) {
  if (input.channels != layer.in_channels)
    throw precondition_error(fmt::format("conv '{}': expected {} channels, got {}",
        layer.name, layer.in_channels, input.channels));
  auto width = input.width, height = input.height;
  auto k     = int(layer.kernel);
  auto half  = k / 2;
  auto rows  = Eigen::Index(layer.in_channels) * k * k;
  auto out   = feature_map<T>::image(layer.out_channels, width, height);
  auto w     = weight_matrix<T>(layer);
  parallel_for(input.count, spatial_grain, [&](size_t begin, size_t end) {
    auto n    = Eigen::Index(end - begin);
    auto cols = row_matrix<T>(rows, n);
    for (uint32_t i = 0; i < layer.in_channels; i++) {
      auto src = input.channel(i);
      for (auto ky = 0; ky < k; ky++) {
        for (auto kx = 0; kx < k; kx++) {
          auto row = (Eigen::Index(i) * k + ky) * k + kx;
          for (auto p = begin; p < end; p++) {
            auto x = int(p % width) + kx - half, y = int(p / width) + ky - half;
            cols(row, Eigen::Index(p - begin)) =
                x >= 0 && y >= 0 && x < width && y < height
                    ? src[size_t(y) * width + x]
                    : T(0);
          }
        }
      }
    }
    auto result = strided_map<T>(out.values.data() + begin, layer.out_channels, n,
        Eigen::OuterStride<>(Eigen::Index(out.count)));
    result.noalias() = w * cols;
    for (uint32_t o = 0; o < layer.out_channels; o++)
      result.row(o).array() += T(layer.bias[o]);
  });
  return out;
}

template <typename T>
feature_map<T> pool_2d(const feature_map<T>& input, uint32_t window) {
  auto k   = int(window);
  auto out = feature_map<T>::image(input.channels, input.width / k, input.height / k);
  for (uint32_t c = 0; c < input.channels; c++) {
    auto src = input.channel(c);
    auto dst = out.channel(c);
    for (auto y = 0; y < out.height; y++) {
      for (auto x = 0; x < out.width; x++) {
        auto best = src[size_t(y * k) * input.width + x * k];
        for (auto dy = 0; dy < k; dy++)
          for (auto dx = 0; dx < k; dx++)
            best = std::max(best, src[size_t(y * k + dy) * input.width + x * k + dx]);
        dst[size_t(y) * out.width + x] = best;
      }
    }
  }
  return out;
}

template <typename T>
std::vector<feature_map<T>> forward_image(
    const network_spec& spec, const feature_map<T>& image) {
  auto outputs = std::vector<feature_map<T>>{};
  auto current = preprocess(spec, image);
  for (auto& l : spec.layers) {
    if (auto c = std::get_if<conv_layer>(&l)) {
      current = conv_2d(current, *c);
    } else if (std::holds_alternative<relu_layer>(l)) {
      current = relu(current);
    } else {
      current = pool_2d(current, std::get<pool_layer>(l).window);
    }
    outputs.push_back(current);
  }
  return outputs;
}

// -----------------------------------------------------------------------------
// MESH PATH
// -----------------------------------------------------------------------------

template <typename T>
feature_map<T> conv_mesh(const feature_map<T>& input, const conv_layer& layer,
    const neighbor_table& table) {
  if (input.channels != layer.in_channels)
    throw precondition_error(fmt::format("conv '{}': expected {} channels, got {}",
        layer.name, layer.in_channels, input.channels));
  if (table.kernel != layer.kernel || table.texel_count() != input.count)
    throw precondition_error(fmt::format(
        "conv '{}': neighbor table of level {} does not match the input",
        layer.name, table.level));
  auto taps = size_t(layer.kernel) * layer.kernel;
  auto rows = Eigen::Index(layer.in_channels * taps);
  auto out  = feature_map<T>(layer.out_channels, input.count);
  auto w    = weight_matrix<T>(layer);
  parallel_for(input.count, spatial_grain, [&](size_t begin, size_t end) {
    auto n      = Eigen::Index(end - begin);
    auto gather = row_matrix<T>(rows, n);
    for (uint32_t i = 0; i < layer.in_channels; i++) {
      auto src = input.channel(i);
      for (auto p = begin; p < end; p++) {
        for (size_t d = 0; d < taps; d++) {
          auto entry = p * taps + d;
          auto sum   = T(0);
          for (auto k = table.offsets[entry]; k < table.offsets[entry + 1]; k++)
            sum += T(table.weights[k]) * src[table.texels[k]];
          gather(Eigen::Index(i * taps + d), Eigen::Index(p - begin)) = sum;
        }
      }
    }
    auto result = strided_map<T>(out.values.data() + begin, layer.out_channels, n,
        Eigen::OuterStride<>(Eigen::Index(out.count)));
    result.noalias() = w * gather;
    for (uint32_t o = 0; o < layer.out_channels; o++)
      result.row(o).array() += T(layer.bias[o]);
  });
  return out;
}

template <typename T>
feature_map<T> pool_mesh(const feature_map<T>& input, const pool_level& pool,
    std::vector<uint32_t>* argmax) {
  if (pool.members.size() != input.count)
    throw precondition_error("pooling level does not match the input texels");
  auto groups = pool.group_count();
  auto out    = feature_map<T>(input.channels, groups);
  if (argmax) argmax->assign(size_t(input.channels) * groups, 0);
  for (uint32_t c = 0; c < input.channels; c++) {
    auto src = input.channel(c);
    auto dst = out.channel(c);
    for (size_t g = 0; g < groups; g++) {
      auto members = pool.group(g);
      auto best    = members.front();
      for (auto m : members)
        if (src[m] > src[best]) best = m;
      dst[g] = src[best];
      if (argmax) (*argmax)[size_t(c) * groups + g] = best;
    }
  }
  return out;
}

transposed_table transpose_table(const neighbor_table& table) {
  auto count = table.texel_count();
  auto out   = transposed_table{};
  out.offsets.assign(count + 1, 0);
  for (auto t : table.texels) out.offsets[t + 1]++;
  for (size_t t = 0; t < count; t++) out.offsets[t + 1] += out.offsets[t];
  out.entries.resize(table.texels.size());
  out.weights.resize(table.texels.size());
  auto fill = std::vector<uint32_t>(out.offsets.begin(), out.offsets.end() - 1);
  for (size_t e = 0; e + 1 < table.offsets.size(); e++) {
    for (auto k = table.offsets[e]; k < table.offsets[e + 1]; k++) {
      auto slot         = fill[table.texels[k]]++;
      out.entries[slot] = uint32_t(e);
      out.weights[slot] = table.weights[k];
    }
  }
  return out;
}

template <typename T>
feature_map<T> conv_mesh_backward(const feature_map<T>& output_grad,
    const conv_layer& layer, const neighbor_table& table,
    const transposed_table& transpose, size_t input_count) {
  auto taps  = size_t(layer.kernel) * layer.kernel;
  auto count = output_grad.count;
  auto grad  = feature_map<T>(layer.in_channels, input_count);
  auto w     = weight_matrix<T>(layer);
  auto dout  = const_strided_map<T>(output_grad.values.data(), layer.out_channels,
       Eigen::Index(count), Eigen::OuterStride<>(Eigen::Index(count)));
  constexpr uint32_t block = 16;
  for (uint32_t c0 = 0; c0 < layer.in_channels; c0 += block) {
    auto c1   = std::min(layer.in_channels, c0 + block);
    auto rows = Eigen::Index((c1 - c0) * taps);
    // gradient of the gathered samples for this channel block
    auto dgather = row_matrix<T>(rows, Eigen::Index(count));
    auto wblock  = w.middleCols(Eigen::Index(c0 * taps), rows);
    parallel_for(count, spatial_grain, [&](size_t begin, size_t end) {
      auto n = Eigen::Index(end - begin);
      dgather.middleCols(Eigen::Index(begin), n).noalias() =
          wblock.transpose() * dout.middleCols(Eigen::Index(begin), n);
    });
    parallel_for(input_count, spatial_grain, [&](size_t begin, size_t end) {
      for (auto q = begin; q < end; q++) {
        for (auto k = transpose.offsets[q]; k < transpose.offsets[q + 1]; k++) {
          auto p  = transpose.entries[k] / taps;
          auto d  = transpose.entries[k] % taps;
          auto wk = T(transpose.weights[k]);
          for (auto c = c0; c < c1; c++)
            grad.at(c, q) += wk * dgather(Eigen::Index((c - c0) * taps + d), Eigen::Index(p));
        }
      }
    });
  }
  (void)table;
  return grad;
}

// -----------------------------------------------------------------------------
// MESH NETWORK
// -----------------------------------------------------------------------------

mesh_network::mesh_network(const network_spec& spec, const precomputed& data)
    : spec_(&spec), data_(&data) {
  auto level = uint32_t{0};
  for (size_t i = 0; i < spec.layers.size(); i++) {
    auto& l = spec.layers[i];
    levels_.push_back(level);
    if (auto c = std::get_if<conv_layer>(&l)) {
      if (level >= data.tables.size() || data.tables[level].kernel != c->kernel)
        throw compatibility_error(fmt::format(
            "conv '{}' at level {} has no {}x{} neighbor table", c->name, level,
            c->kernel, c->kernel));
    } else if (auto p = std::get_if<pool_layer>(&l)) {
      if (level >= data.pools.size() || p->window != data.options.pool_window)
        throw compatibility_error(fmt::format(
            "pool '{}' needs pooling level {} with window {}", p->name, level + 1,
            p->window));
      level++;
    }
  }
  for (auto& table : data.tables) transposes_.push_back(transpose_table(table));
}

template <typename T>
mesh_activations<T> mesh_network::forward(const feature_map<T>& texture) const {
  if (texture.count != data_->used_texels())
    throw precondition_error(fmt::format("texture has {} texels, atlas uses {}",
        texture.count, data_->used_texels()));
  auto saved  = mesh_activations<T>{};
  saved.input = preprocess(*spec_, texture);
  saved.argmax.resize(spec_->layers.size());
  const feature_map<T>* current = &saved.input;
  for (size_t i = 0; i < spec_->layers.size(); i++) {
    auto& l = spec_->layers[i];
    if (auto c = std::get_if<conv_layer>(&l)) {
      saved.outputs.push_back(conv_mesh(*current, *c, data_->tables[levels_[i]]));
    } else if (std::holds_alternative<relu_layer>(l)) {
      saved.outputs.push_back(relu(*current));
    } else {
      saved.outputs.push_back(
          pool_mesh(*current, data_->pools[levels_[i]], &saved.argmax[i]));
    }
#ifndef NDEBUG
    if (!all_finite(saved.outputs.back()))
      throw numerical_error(fmt::format(
          "non-finite activation after layer '{}'", layer_name(l)));
#endif
    current = &saved.outputs.back();
  }
  return saved;
}

template <typename T>
feature_map<T> mesh_network::backward(const mesh_activations<T>& saved,
    const std::vector<std::optional<feature_map<T>>>& output_grads) const {
  if (saved.outputs.size() != spec_->layers.size())
    throw precondition_error("backward needs the saved activations of every layer");
  auto grad = std::optional<feature_map<T>>{};
  for (auto i = spec_->layers.size(); i-- > 0;) {
    if (i < output_grads.size() && output_grads[i]) {
      if (!grad) {
        grad = *output_grads[i];
      } else {
        for (size_t k = 0; k < grad->values.size(); k++)
          grad->values[k] += output_grads[i]->values[k];
      }
    }
    if (!grad) continue;
    auto& input = i == 0 ? saved.input : saved.outputs[i - 1];
    auto& l     = spec_->layers[i];
    if (auto c = std::get_if<conv_layer>(&l)) {
      auto level = levels_[i];
      grad = conv_mesh_backward(
          *grad, *c, data_->tables[level], transposes_[level], input.count);
    } else if (std::holds_alternative<relu_layer>(l)) {
      for (size_t k = 0; k < grad->values.size(); k++)
        if (!(input.values[k] > 0)) grad->values[k] = 0;
    } else {
      auto routed  = feature_map<T>(input.channels, input.count);
      auto& argmax = saved.argmax[i];
      auto groups  = grad->count;
      for (uint32_t c = 0; c < input.channels; c++)
        for (size_t g = 0; g < groups; g++)
          routed.at(c, argmax[size_t(c) * groups + g]) += grad->at(c, g);
      grad = std::move(routed);
    }
  }
  auto texture = feature_map<T>(3, saved.input.count);
  if (!grad) return texture;
  for (uint32_t c = 0; c < 3; c++) {
    auto src = spec_->order == channel_order::reverse ? 2 - c : c;
    std::copy_n(grad->channel(c), texture.count, texture.channel(src));
  }
  return texture;
}

// -----------------------------------------------------------------------------
// INSTANTIATIONS
// -----------------------------------------------------------------------------

#define MESHSTYLE_INSTANTIATE(T)                                                  \
  template bool           all_finite(const feature_map<T>&);                      \
  template feature_map<T> preprocess(const network_spec&, const feature_map<T>&); \
  template feature_map<T> relu(const feature_map<T>&);                            \
  template feature_map<T> conv_2d(const feature_map<T>&, const conv_layer&);      \
  template feature_map<T> pool_2d(const feature_map<T>&, uint32_t);               \
  template std::vector<feature_map<T>> forward_image(                             \
      const network_spec&, const feature_map<T>&);                                \
  template feature_map<T> conv_mesh(                                              \
      const feature_map<T>&, const conv_layer&, const neighbor_table&);           \
  template feature_map<T> pool_mesh(                                              \
      const feature_map<T>&, const pool_level&, std::vector<uint32_t>*);          \
  template feature_map<T> conv_mesh_backward(const feature_map<T>&,               \
      const conv_layer&, const neighbor_table&, const transposed_table&, size_t); \
  template mesh_activations<T> mesh_network::forward(const feature_map<T>&) const; \
  template feature_map<T>      mesh_network::backward(                            \
      const mesh_activations<T>&,                                                 \
      const std::vector<std::optional<feature_map<T>>>&) const;

MESHSTYLE_INSTANTIATE(float)
MESHSTYLE_INSTANTIATE(double)

#undef MESHSTYLE_INSTANTIATE

}  // namespace meshstyle
