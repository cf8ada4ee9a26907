#include "agreesum/nn/conv_head.hpp"

#include <algorithm>

#include "agreesum/error.hpp"

namespace agreesum::nn {

ConvPoolHead::ConvPoolHead(ParameterStore& store, const std::string& name,
                           Eigen::Index input_dim, std::vector<int> windows, int filters,
                           std::mt19937_64& rng)
    : windows_(std::move(windows)), filters_(filters) {
  if (windows_.empty() || filters_ < 1) throw ArgumentError("conv head needs windows and filters");
  for (int w : windows_) {
    if (w < 1) throw ArgumentError("conv window must be >= 1");
    banks_.emplace_back(store, name + ".w" + std::to_string(w), input_dim * w, filters_, rng);
  }
}

Var ConvPoolHead::operator()(const Var& sequence) const {
  std::vector<Var> pooled;
  pooled.reserve(banks_.size());
  const auto len = static_cast<int>(sequence.rows());
  for (std::size_t i = 0; i < banks_.size(); ++i) {
    const int w = windows_[i];
    const Var windows = unfold(sequence, w, 0, std::max(0, w - len));
    pooled.push_back(max_rows(relu(banks_[i](windows))));
  }
  return concat_cols(pooled);
}

}  // namespace agreesum::nn
