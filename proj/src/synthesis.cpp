#include "meshstyle/synthesis.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>

#include "meshstyle/errors.hpp"
#include "meshstyle/image.hpp"

namespace meshstyle {

// -----------------------------------------------------------------------------
// SETUP
// -----------------------------------------------------------------------------

std::vector<size_t> resolve_style_layers(
    const network_spec& spec, const std::vector<std::string>& names) {
  auto selected = names;
  if (names.size() == 1 && names.front() == "all") selected = conv_layer_names(spec);
  if (selected.empty()) return {};
  auto indices = std::vector<size_t>{};
  for (auto& name : selected) indices.push_back(feature_layer(spec, name));
  return indices;
}

feature_map<float> init_texture(size_t texels, uint64_t seed) {
  auto texture = feature_map<float>(3, texels);
  auto rng     = std::mt19937_64{seed};
  for (size_t t = 0; t < texels; t++) {
    for (uint32_t c = 0; c < 3; c++) {
      auto u = double(rng() >> 11) * 0x1.0p-53;
      texture.at(c, t) = std::min(float(0.2 * u), 0.2f);
    }
  }
  return texture;
}

namespace {

// Layers up to and including the deepest one the losses read.
network_spec truncate_network(const network_spec& spec, size_t last) {
  auto out = spec;
  out.layers.resize(last + 1);
  return out;
}

void accumulate(std::optional<feature_map<float>>& slot, feature_map<float>&& grad) {
  if (!slot) {
    slot = std::move(grad);
  } else {
    for (size_t k = 0; k < grad.values.size(); k++) slot->values[k] += grad.values[k];
  }
}

}  // namespace

// -----------------------------------------------------------------------------
// OPTIMIZATION
// -----------------------------------------------------------------------------

synthesis_result synthesize(const network_spec& spec, const precomputed& data,
    const feature_map<float>& exemplar, const synthesis_config& config,
    const feature_map<float>* content,
    const std::function<void(const loss_record&)>& progress) {
  if (config.iterations < 0) throw precondition_error("iteration count is negative");
  if (data.levels.empty() || data.used_texels() == 0)
    throw precondition_error("atlas has no used texels");
  if (exemplar.channels != 3 || exemplar.width <= 0 || exemplar.height <= 0)
    throw precondition_error("exemplar must be a 3-channel image");

  auto style_indices = resolve_style_layers(spec, config.style_layers);
  auto content_index = std::optional<size_t>{};
  if (content) {
    if (content->channels != 3 || content->count != data.used_texels())
      throw precondition_error(fmt::format(
          "content texture covers {} texels, atlas uses {}", content->count,
          data.used_texels()));
    content_index = feature_layer(spec, config.content_layer);
  }
  if (style_indices.empty() && !content_index)
    throw precondition_error("no style or content layers selected");
  auto last = size_t{0};
  for (auto i : style_indices) last = std::max(last, i);
  if (content_index) last = std::max(last, *content_index);
  auto net_spec = truncate_network(spec, last);
  auto network  = mesh_network{net_spec, data};

  auto names = std::vector<std::string>{};
  for (auto i : style_indices) names.push_back(layer_name(spec.layers[i]));

  // reference statistics, fixed for the whole run
  auto reference = exemplar;
  if (config.reference_width > 0 && config.reference_height > 0)
    reference = resize_bilinear(exemplar, config.reference_width, config.reference_height);
  auto targets = std::vector<gram_matrix<float>>{};
  if (!style_indices.empty()) {
    auto image_outputs = forward_image(net_spec, reference);
    for (size_t s = 0; s < style_indices.size(); s++)
      targets.push_back(gram(image_outputs[style_indices[s]], names[s]));
  }
  auto content_target = feature_map<float>{};
  if (content_index) {
    auto saved     = network.forward(*content);
    content_target = std::move(saved.outputs[*content_index]);
  }

  auto result    = synthesis_result{};
  result.texture = init_texture(data.used_texels(), config.seed);
  auto good      = result.texture;
  auto state     = adam_state{};
  state.schedule = config.schedule;
  auto clock     = std::chrono::steady_clock::now();

  for (int t = 0; t <= config.iterations; t++) {
    auto saved = network.forward(result.texture);
    auto grads = std::vector<std::optional<feature_map<float>>>(net_spec.layers.size());
    auto record      = loss_record{};
    record.iteration = t;
    if (!style_indices.empty()) {
      auto grams = std::vector<gram_matrix<float>>{};
      for (size_t s = 0; s < style_indices.size(); s++)
        grams.push_back(gram(saved.outputs[style_indices[s]], names[s]));
      auto style   = style_loss(grams, targets);
      record.style = style.loss;
      for (size_t s = 0; s < style_indices.size(); s++) {
        auto index = style_indices[s];
        accumulate(grads[index], gram_backward(saved.outputs[index], style.seeds[s]));
      }
    }
    if (content_index) {
      auto term = content_loss(
          saved.outputs[*content_index], content_target, config.content_weight);
      record.content = term.loss;
      accumulate(grads[*content_index], std::move(term.seed));
    }
    record.total = record.style + record.content;
    if (!std::isfinite(record.total)) {
      result.aborted         = true;
      result.abort_iteration = t;
      result.abort_message   = fmt::format("non-finite loss at iteration {}", t);
      result.texture         = std::move(good);
      return result;
    }
    result.history.push_back(record);
    if (progress) progress(record);
    good = result.texture;
    if (t == config.iterations) break;

    auto grad = network.backward(saved, grads);
    try {
      adam_step(state, result.texture.values, grad.values);
    } catch (const error& e) {
      if (e.kind != error_kind::numerical) throw;
      result.aborted         = true;
      result.abort_iteration = t;
      result.abort_message   = e.what();
      return result;
    }
    if ((t + 1) % 100 == 0 || t + 1 == config.iterations) {
      auto now = std::chrono::steady_clock::now();
      result.seconds_per_100.push_back(
          std::chrono::duration<double>(now - clock).count());
      clock = now;
    }
  }
  return result;
}

// -----------------------------------------------------------------------------
// ATLAS IMAGES
// -----------------------------------------------------------------------------

feature_map<float> texture_from_image(
    const feature_map<float>& image, const precomputed& data) {
  if (image.width != data.options.width || image.height != data.options.height)
    throw precondition_error(fmt::format(
        "texture resolution mismatch: image is {}x{}, atlas is {}x{}", image.width,
        image.height, data.options.width, data.options.height));
  auto& coords  = data.levels.front().coords;
  auto  texture = feature_map<float>(3, coords.size());
  for (size_t t = 0; t < coords.size(); t++)
    for (uint32_t c = 0; c < 3; c++)
      texture.at(c, t) = image.at(c, size_t(coords[t][1]) * image.width + coords[t][0]);
  return texture;
}

std::vector<uint8_t> export_texture(
    const feature_map<float>& texture, const precomputed& data, int dilation) {
  auto  width  = data.options.width;
  auto  height = data.options.height;
  auto& coords = data.levels.front().coords;
  if (texture.channels != 3 || texture.count != coords.size())
    throw precondition_error("texture does not cover the atlas texels");
  auto pixels = size_t(width) * height;
  auto color  = std::vector<double>(pixels * 3, 0.0);
  auto filled = std::vector<uint8_t>(pixels, 0);
  for (size_t t = 0; t < coords.size(); t++) {
    auto p = size_t(coords[t][1]) * width + coords[t][0];
    for (uint32_t c = 0; c < 3; c++)
      color[p * 3 + c] = std::clamp(double(texture.at(c, t)), 0.0, 1.0);
    filled[p] = 1;
  }

  for (int pass = 0; pass < dilation; pass++) {
    auto next  = color;
    auto grown = filled;
    auto any   = false;
    for (int y = 0; y < height; y++) {
      for (int x = 0; x < width; x++) {
        auto p = size_t(y) * width + x;
        if (filled[p]) continue;
        auto sum = std::array<double, 3>{0, 0, 0};
        auto n   = 0;
        for (auto [dx, dy] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
          auto nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
          auto q = size_t(ny) * width + nx;
          if (!filled[q]) continue;
          for (int c = 0; c < 3; c++) sum[c] += color[q * 3 + c];
          n++;
        }
        if (!n) continue;
        for (int c = 0; c < 3; c++) next[p * 3 + c] = sum[c] / n;
        grown[p] = 1;
        any      = true;
      }
    }
    color  = std::move(next);
    filled = std::move(grown);
    if (!any) break;
  }

  auto rgb = std::vector<uint8_t>(pixels * 3);
  for (size_t k = 0; k < rgb.size(); k++) rgb[k] = quantize(color[k]);
  return rgb;
}

void save_texture(const std::string& filename, const feature_map<float>& texture,
    const precomputed& data, int dilation) {
  save_png(filename, data.options.width, data.options.height,
      export_texture(texture, data, dilation));
}

std::string format_loss_csv(const std::vector<loss_record>& history) {
  auto text = std::string{"iteration,style_loss,content_loss,total\n"};
  for (auto& r : history)
    text += fmt::format("{},{},{},{}\n", r.iteration, r.style, r.content, r.total);
  return text;
}

void save_loss_csv(const std::string& filename, const std::vector<loss_record>& history) {
  auto file = std::ofstream{filename, std::ios::binary};
  if (!file) throw io_error("cannot write loss file " + filename);
  file << format_loss_csv(history);
  if (!file) throw io_error("failed writing loss file " + filename);
}

}  // namespace meshstyle
