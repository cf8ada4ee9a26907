#pragma once

#include <random>
#include <string>
#include <vector>

#include "agreesum/nn/parameters.hpp"

namespace agreesum::nn {

// Kim-style convolutional pooling head: one bank of `filters` ReLU filters per
// window size, each max-pooled over time, outputs concatenated.
class ConvPoolHead {
 public:
  ConvPoolHead() = default;
  ConvPoolHead(ParameterStore& store, const std::string& name, Eigen::Index input_dim,
               std::vector<int> windows, int filters, std::mt19937_64& rng);

  // (L x input_dim) -> (1 x windows.size() * filters). Sequences shorter than
  // a window are zero-padded at the end.
  Var operator()(const Var& sequence) const;

  Eigen::Index output_dim() const {
    return static_cast<Eigen::Index>(windows_.size()) * filters_;
  }
  const std::vector<int>& windows() const { return windows_; }
  int filters() const { return filters_; }

 private:
  std::vector<int> windows_;
  int filters_ = 0;
  std::vector<Linear> banks_;
};

}  // namespace agreesum::nn
