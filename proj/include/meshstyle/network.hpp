//
// Shared CNN description and its two evaluators: a standard 2D path over
// images and a surface path over the texels of a precomputed atlas. Both
// consume the same coefficient arrays.
//

#ifndef MESHSTYLE_NETWORK_HPP
#define MESHSTYLE_NETWORK_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "precompute.hpp"

namespace meshstyle {

// -----------------------------------------------------------------------------
// NETWORK DESCRIPTION
// -----------------------------------------------------------------------------

struct conv_layer {
  std::string        name;
  uint32_t           in_channels  = 0;
  uint32_t           out_channels = 0;
  uint32_t           kernel       = 3;
  std::vector<float> weights;  // out, in, row, column
  std::vector<float> bias;

  float weight(uint32_t o, uint32_t i, uint32_t row, uint32_t col) const {
    return weights[((size_t(o) * in_channels + i) * kernel + row) * kernel + col];
  }
};

struct relu_layer {
  std::string name;
};

struct pool_layer {
  std::string name;
  uint32_t    window = 2;
};

using layer = std::variant<conv_layer, relu_layer, pool_layer>;

enum struct channel_order : uint8_t { keep = 0, reverse = 1 };

struct network_spec {
  std::string          architecture = "custom";
  channel_order        order        = channel_order::keep;
  std::array<float, 3> means        = {0, 0, 0};
  std::vector<layer>   layers;
};

const std::string& layer_name(const layer& l);

// Conv output channel chain of VGG-19.
inline constexpr std::array<uint32_t, 16> vgg19_channels = {64, 64, 128, 128,
    256, 256, 256, 256, 512, 512, 512, 512, 512, 512, 512, 512};

// Checks the channel chain, the vgg19 layout when declared, and that every
// coefficient is finite. Throws precondition_error naming the layer.
void validate_network(const network_spec& spec);

inline constexpr uint32_t weights_version = 1;
network_spec         load_weights(const std::string& filename);
network_spec         parse_weights(const std::vector<uint8_t>& bytes);
void                 save_weights(const std::string& filename, const network_spec& spec);
std::vector<uint8_t> serialize_weights(const network_spec& spec);
std::array<uint8_t, 32> coefficient_hash(const network_spec& spec);
std::array<uint8_t, 32> file_hash(const std::string& filename);

// Index of the layer whose output represents `name` in losses. A conv layer
// directly followed by a ReLU is read after the activation.
size_t feature_layer(const network_spec& spec, const std::string& name);
std::vector<std::string> conv_layer_names(const network_spec& spec);

// Number of pooling layers before layer `index`.
uint32_t layer_level(const network_spec& spec, size_t index);

// -----------------------------------------------------------------------------
// FEATURE MAPS
// -----------------------------------------------------------------------------

// Channel-major values over `count` spatial positions. Image maps also carry
// their width and height (count = width * height, row-major).
template <typename T>
struct feature_map {
  uint32_t       channels = 0;
  size_t         count    = 0;
  int            width = 0, height = 0;
  std::vector<T> values;

  feature_map() = default;
  feature_map(uint32_t channels, size_t count)
      : channels(channels), count(count), values(size_t(channels) * count) {}
  static feature_map image(uint32_t channels, int width, int height) {
    auto map   = feature_map(channels, size_t(width) * height);
    map.width  = width;
    map.height = height;
    return map;
  }

  T&       at(uint32_t c, size_t p) { return values[size_t(c) * count + p]; }
  const T& at(uint32_t c, size_t p) const { return values[size_t(c) * count + p]; }
  T*       channel(uint32_t c) { return values.data() + size_t(c) * count; }
  const T* channel(uint32_t c) const { return values.data() + size_t(c) * count; }
};

template <typename T, typename U>
feature_map<T> cast_map(const feature_map<U>& map) {
  auto out   = feature_map<T>(map.channels, map.count);
  out.width  = map.width;
  out.height = map.height;
  for (size_t i = 0; i < map.values.size(); i++) out.values[i] = T(map.values[i]);
  return out;
}

template <typename T>
bool all_finite(const feature_map<T>& map);

// -----------------------------------------------------------------------------
// LAYER OPERATIONS
// -----------------------------------------------------------------------------

// Mean subtraction after the optional channel reversal.
template <typename T>
feature_map<T> preprocess(const network_spec& spec, const feature_map<T>& input);

template <typename T>
feature_map<T> relu(const feature_map<T>& input);

// Cross-correlation with zero padding of kernel / 2, plus bias.
template <typename T>
feature_map<T> conv_2d(const feature_map<T>& input, const conv_layer& layer);

// Non-overlapping max pooling; trailing rows / columns that do not fill a
// window are dropped.
template <typename T>
feature_map<T> pool_2d(const feature_map<T>& input, uint32_t window);

template <typename T>
feature_map<T> conv_mesh(const feature_map<T>& input, const conv_layer& layer,
    const neighbor_table& table);

// Max over each pooling group. argmax, when given, receives the winning
// member per (channel, group); ties go to the lowest member id.
template <typename T>
feature_map<T> pool_mesh(const feature_map<T>& input, const pool_level& pool,
    std::vector<uint32_t>* argmax = nullptr);

// Outputs of every layer of the 2D path.
template <typename T>
std::vector<feature_map<T>> forward_image(
    const network_spec& spec, const feature_map<T>& image);

// -----------------------------------------------------------------------------
// MESH NETWORK
// -----------------------------------------------------------------------------

// Tap table transposed for gathering gradients: for each texel, the
// (entry, weight) pairs of the forward table that read it.
struct transposed_table {
  std::vector<uint32_t> offsets = {0};
  std::vector<uint32_t> entries;
  std::vector<float>    weights;
};
transposed_table transpose_table(const neighbor_table& table);

template <typename T>
struct mesh_activations {
  feature_map<T>                     input;    // preprocessed texture
  std::vector<feature_map<T>>        outputs;  // one per layer
  std::vector<std::vector<uint32_t>> argmax;   // pooling layers only
};

// The surface evaluator bound to one precomputation. Checks up front that
// every conv and pool level of the spec has matching tables.
class mesh_network {
 public:
  mesh_network(const network_spec& spec, const precomputed& data);

  const network_spec& spec() const { return *spec_; }
  size_t              texel_count() const { return data_->used_texels(); }

  template <typename T>
  mesh_activations<T> forward(const feature_map<T>& texture) const;

  // Gradient with respect to the raw texture given per-layer output
  // gradients (missing entries count as zero).
  template <typename T>
  feature_map<T> backward(const mesh_activations<T>& saved,
      const std::vector<std::optional<feature_map<T>>>& output_grads) const;

 private:
  const network_spec*           spec_;
  const precomputed*            data_;
  std::vector<uint32_t>         levels_;
  std::vector<transposed_table> transposes_;
};

template <typename T>
feature_map<T> conv_mesh_backward(const feature_map<T>& output_grad,
    const conv_layer& layer, const neighbor_table& table,
    const transposed_table& transpose, size_t input_count);

}  // namespace meshstyle

#endif
