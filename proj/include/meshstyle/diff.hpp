//
// Losses over feature maps and the optimizer used to fit the texture.
//

#ifndef MESHSTYLE_DIFF_HPP
#define MESHSTYLE_DIFF_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "network.hpp"

namespace meshstyle {

// -----------------------------------------------------------------------------
// GRAM MATRICES
// -----------------------------------------------------------------------------

// Channel inner products divided by the spatial count, row-major C x C.
template <typename T>
struct gram_matrix {
  std::string    layer;
  uint32_t       channels = 0;
  std::vector<T> values;

  T  operator()(uint32_t a, uint32_t b) const { return values[size_t(a) * channels + b]; }
  T& operator()(uint32_t a, uint32_t b) { return values[size_t(a) * channels + b]; }
};

template <typename T>
gram_matrix<T> gram(const feature_map<T>& feature, const std::string& layer = {});

// Gradient with respect to the feature map given dL/dG. The upstream
// gradient is symmetrized first.
template <typename T>
feature_map<T> gram_backward(const feature_map<T>& feature, const gram_matrix<T>& seed);

// -----------------------------------------------------------------------------
// LOSSES
// -----------------------------------------------------------------------------

// Sum over layers of squared Gram differences divided by C^2. seeds receive
// dL/dG per layer.
template <typename T>
struct style_result {
  double                      loss = 0;
  std::vector<gram_matrix<T>> seeds;
};
template <typename T>
style_result<T> style_loss(
    const std::vector<gram_matrix<T>>& grams, const std::vector<gram_matrix<T>>& targets);

// weight times the mean squared difference; seed is dL/dfeature.
template <typename T>
struct content_result {
  double         loss = 0;
  feature_map<T> seed;
};
template <typename T>
content_result<T> content_loss(
    const feature_map<T>& feature, const feature_map<T>& target, double weight);

// -----------------------------------------------------------------------------
// OPTIMIZER
// -----------------------------------------------------------------------------

struct learning_schedule {
  double           base       = 0.1;
  std::vector<int> milestones = {200, 400};  // rate halves at each
  double operator()(int iteration) const;
};

struct adam_state {
  std::vector<double> first, second;
  int                 step     = 0;
  learning_schedule   schedule = {};
  double              beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
};

// One Adam update of params in place at the state's current step. Throws
// numerical_error naming the iteration on a non-finite gradient.
template <typename T>
void adam_step(adam_state& state, std::vector<T>& params, const std::vector<T>& grads);

}  // namespace meshstyle

#endif
