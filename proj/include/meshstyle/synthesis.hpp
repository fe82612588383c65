//
// Texture optimization on the atlas: random initialization, the style (and
// optional content) objective, Adam iterations, and export to an image.
//

#ifndef MESHSTYLE_SYNTHESIS_HPP
#define MESHSTYLE_SYNTHESIS_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "diff.hpp"
#include "network.hpp"
#include "precompute.hpp"

namespace meshstyle {

inline const std::vector<std::string> default_style_layers = {"block1_conv1",
    "block2_conv1", "block3_conv1", "block4_conv1", "block5_conv1"};

struct synthesis_config {
  std::vector<std::string> style_layers   = default_style_layers;  // or {"all"}
  std::string              content_layer  = "block4_conv2";
  double                   content_weight = 1000;
  int                      iterations     = 500;
  learning_schedule        schedule       = {};
  uint64_t                 seed           = 0;
  int reference_width = 0, reference_height = 0;  // 0 keeps the exemplar size
};

// Layer indices read by the style loss. "all" selects every conv layer.
std::vector<size_t> resolve_style_layers(
    const network_spec& spec, const std::vector<std::string>& names);

// Uniform [0, 0.2] per channel of every used texel.
feature_map<float> init_texture(size_t texels, uint64_t seed);

struct loss_record {
  int    iteration = 0;
  double style = 0, content = 0, total = 0;
};

struct synthesis_result {
  feature_map<float>       texture;
  std::vector<loss_record> history;  // one row per evaluated texture
  bool                     aborted = false;
  int                      abort_iteration = -1;
  std::string              abort_message;
  std::vector<double>      seconds_per_100;  // wall time of each 100 iterations
};

// Runs the configured iterations. When content is given the objective adds
// the content term at config.content_layer. The final history row holds the
// loss of the returned texture. A non-finite loss or gradient stops the run
// and returns the last texture with a finite loss.
synthesis_result synthesize(const network_spec& spec, const precomputed& data,
    const feature_map<float>& exemplar, const synthesis_config& config,
    const feature_map<float>* content = nullptr,
    const std::function<void(const loss_record&)>& progress = {});

// -----------------------------------------------------------------------------
// ATLAS IMAGES
// -----------------------------------------------------------------------------

// Samples an atlas-resolution image at the used texels.
feature_map<float> texture_from_image(
    const feature_map<float>& image, const precomputed& data);

// Interleaved 8 bit RGB at atlas resolution. Unused texels take the mean of
// already filled 4-neighbors for `dilation` passes and stay black otherwise.
std::vector<uint8_t> export_texture(
    const feature_map<float>& texture, const precomputed& data, int dilation = 8);

void save_texture(const std::string& filename, const feature_map<float>& texture,
    const precomputed& data, int dilation = 8);

void save_loss_csv(const std::string& filename, const std::vector<loss_record>& history);
std::string format_loss_csv(const std::vector<loss_record>& history);

}  // namespace meshstyle

#endif
