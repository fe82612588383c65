#include "meshstyle/diff.hpp"

#include <fmt/format.h>

#include <Eigen/Core>
#include <cmath>

#include "meshstyle/errors.hpp"
#include "meshstyle/parallel.hpp"

namespace meshstyle {

namespace {
template <typename T>
using row_matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using const_matrix_map = Eigen::Map<const row_matrix<T>>;
template <typename T>
using matrix_map = Eigen::Map<row_matrix<T>>;
}  // namespace

// -----------------------------------------------------------------------------
// GRAM MATRICES
// -----------------------------------------------------------------------------

template <typename T>
gram_matrix<T> gram(const feature_map<T>& feature, const std::string& layer) {
  if (feature.count == 0)
    throw precondition_error(fmt::format("gram of '{}': empty feature map", layer));
  auto out     = gram_matrix<T>{layer, feature.channels, {}};
  auto c       = Eigen::Index(feature.channels);
  auto f       = const_matrix_map<T>(feature.values.data(), c, Eigen::Index(feature.count));
  out.values.resize(size_t(c) * c);
  auto g       = matrix_map<T>(out.values.data(), c, c);
  g.noalias()  = f * f.transpose();
  g           /= T(feature.count);
  return out;
}

template <typename T>
feature_map<T> gram_backward(const feature_map<T>& feature, const gram_matrix<T>& seed) {
  if (seed.channels != feature.channels)
    throw precondition_error(fmt::format("gram backward of '{}': {} channels vs {}",
        seed.layer, seed.channels, feature.channels));
  auto grad = feature_map<T>(feature.channels, feature.count);
  grad.width  = feature.width;
  grad.height = feature.height;
  auto c    = Eigen::Index(feature.channels);
  auto m    = Eigen::Index(feature.count);
  auto s    = const_matrix_map<T>(seed.values.data(), c, c);
  auto sym  = row_matrix<T>((s + s.transpose()) / T(feature.count));
  auto f    = const_matrix_map<T>(feature.values.data(), c, m);
  auto out  = matrix_map<T>(grad.values.data(), c, m);
  parallel_for(feature.count, 4096, [&](size_t begin, size_t end) {
    auto n = Eigen::Index(end - begin);
    out.middleCols(Eigen::Index(begin), n).noalias() =
        sym * f.middleCols(Eigen::Index(begin), n);
  });
  return grad;
}

// -----------------------------------------------------------------------------
// LOSSES
// -----------------------------------------------------------------------------

template <typename T>
style_result<T> style_loss(
    const std::vector<gram_matrix<T>>& grams, const std::vector<gram_matrix<T>>& targets) {
  if (grams.size() != targets.size())
    throw precondition_error(fmt::format(
        "style loss: {} layers against {} reference layers", grams.size(), targets.size()));
  auto result = style_result<T>{};
  for (size_t l = 0; l < grams.size(); l++) {
    auto& g = grams[l];
    auto& r = targets[l];
    if (g.layer != r.layer || g.channels != r.channels)
      throw precondition_error(fmt::format("style loss: layer '{}' ({} channels) "
                                           "does not match reference '{}' ({} channels)",
          g.layer, g.channels, r.layer, r.channels));
    auto norm = 1.0 / (double(g.channels) * g.channels);
    auto seed = gram_matrix<T>{g.layer, g.channels, std::vector<T>(g.values.size())};
    auto sum  = 0.0;
    for (size_t k = 0; k < g.values.size(); k++) {
      auto d = double(g.values[k]) - double(r.values[k]);
      sum += d * d;
      seed.values[k] = T(2 * norm * d);
    }
    result.loss += norm * sum;
    result.seeds.push_back(std::move(seed));
  }
  return result;
}

template <typename T>
content_result<T> content_loss(
    const feature_map<T>& feature, const feature_map<T>& target, double weight) {
  if (feature.channels != target.channels || feature.count != target.count)
    throw precondition_error(fmt::format(
        "content loss: feature {}x{} does not match target {}x{}", feature.channels,
        feature.count, target.channels, target.count));
  auto result = content_result<T>{};
  result.seed = feature_map<T>(feature.channels, feature.count);
  auto n      = double(feature.values.size());
  auto sum    = 0.0;
  for (size_t k = 0; k < feature.values.size(); k++) {
    auto d = double(feature.values[k]) - double(target.values[k]);
    sum += d * d;
    result.seed.values[k] = T(2 * weight * d / n);
  }
  result.loss = n > 0 ? weight * sum / n : 0;
  return result;
}

// -----------------------------------------------------------------------------
// OPTIMIZER
// -----------------------------------------------------------------------------

double learning_schedule::operator()(int iteration) const {
  auto rate = base;
  for (auto m : milestones)
    if (iteration >= m) rate *= 0.5;
  return rate;
}

template <typename T>
void adam_step(adam_state& state, std::vector<T>& params, const std::vector<T>& grads) {
  if (params.size() != grads.size())
    throw precondition_error(fmt::format(
        "adam: {} parameters but {} gradients", params.size(), grads.size()));
  for (size_t k = 0; k < grads.size(); k++)
    if (!std::isfinite(grads[k]))
      throw numerical_error(fmt::format(
          "non-finite gradient at iteration {} (parameter {})", state.step, k));
  if (state.first.size() != params.size()) {
    state.first.assign(params.size(), 0);
    state.second.assign(params.size(), 0);
  }
  auto rate  = state.schedule(state.step);
  auto t     = double(state.step + 1);
  auto fix1  = 1 - std::pow(state.beta1, t);
  auto fix2  = 1 - std::pow(state.beta2, t);
  parallel_for(params.size(), 4096, [&](size_t begin, size_t end) {
    for (auto k = begin; k < end; k++) {
      auto g = double(grads[k]);
      auto& m = state.first[k];
      auto& v = state.second[k];
      m = state.beta1 * m + (1 - state.beta1) * g;
      v = state.beta2 * v + (1 - state.beta2) * g * g;
      params[k] -= T(rate * (m / fix1) / (std::sqrt(v / fix2) + state.epsilon));
    }
  });
  state.step++;
}

// -----------------------------------------------------------------------------
// INSTANTIATIONS
// -----------------------------------------------------------------------------

#define MESHSTYLE_INSTANTIATE(T)                                                   \
  template gram_matrix<T>    gram(const feature_map<T>&, const std::string&);      \
  template feature_map<T>    gram_backward(const feature_map<T>&, const gram_matrix<T>&); \
  template style_result<T>   style_loss(                                           \
      const std::vector<gram_matrix<T>>&, const std::vector<gram_matrix<T>>&);     \
  template content_result<T> content_loss(                                         \
      const feature_map<T>&, const feature_map<T>&, double);                       \
  template void adam_step(adam_state&, std::vector<T>&, const std::vector<T>&);

MESHSTYLE_INSTANTIATE(float)
MESHSTYLE_INSTANTIATE(double)

#undef MESHSTYLE_INSTANTIATE

}  // namespace meshstyle
