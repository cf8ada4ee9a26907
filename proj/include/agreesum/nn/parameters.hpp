#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "agreesum/nn/autodiff.hpp"

namespace agreesum::nn {

// Named, ordered set of trainable leaves owned by one model.
class ParameterStore {
 public:
  Var add(std::string name, Matrix init);
  Var get(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  const std::vector<std::pair<std::string, Var>>& entries() const { return entries_; }
  std::vector<std::pair<std::string, Var>>& entries() { return entries_; }

  void zero_grad();
  double grad_norm() const;

  std::vector<Matrix> snapshot() const;
  void restore(const std::vector<Matrix>& values);
  bool equals(const ParameterStore& other) const;

  // Little-endian binary blob: magic, count, then (name, rows, cols, values).
  std::string serialize() const;
  // Loads values into already-registered parameters; names and shapes must match.
  void deserialize(std::string_view blob);

 private:
  std::vector<std::pair<std::string, Var>> entries_;
};

Matrix xavier_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double gain = 1.0);
Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng);

// y = x W + b, with x as rows of features.
struct Linear {
  Var weight;
  Var bias;

  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, Eigen::Index in, Eigen::Index out,
         std::mt19937_64& rng, double gain = 1.0);
  Var operator()(const Var& x) const { return add_row(matmul(x, weight), bias); }
};

struct OptimizerConfig {
  enum class Kind { sgd, adam };
  Kind kind = Kind::sgd;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 0.0;  // 0 disables global-norm clipping
};

OptimizerConfig::Kind parse_optimizer_kind(std::string_view name);

// Applies accumulated leaf gradients of one store, then clears them.
class Optimizer {
 public:
  Optimizer(ParameterStore& store, OptimizerConfig config);
  void step();
  const OptimizerConfig& config() const { return config_; }
  std::int64_t steps() const { return steps_; }

 private:
  ParameterStore* store_;
  OptimizerConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::int64_t steps_ = 0;
};

}  // namespace agreesum::nn
