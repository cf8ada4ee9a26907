#include "agreesum/nn/parameters.hpp"

#include <cmath>
#include <cstring>

#include "agreesum/error.hpp"

namespace agreesum::nn {
namespace {

constexpr char kMagic[8] = {'A', 'G', 'S', 'M', 'P', 'R', 'M', '1'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(std::string_view& in) {
  if (in.size() < sizeof(T)) throw ParseError("truncated parameter blob");
  T v;
  std::memcpy(&v, in.data(), sizeof(T));
  in.remove_prefix(sizeof(T));
  return v;
}

}  // namespace

Var ParameterStore::add(std::string name, Matrix init) {
  for (const auto& [n, v] : entries_)
    if (n == name) throw ArgumentError("duplicate parameter " + name);
  Var v = leaf(std::move(init));
  entries_.emplace_back(std::move(name), v);
  return v;
}

Var ParameterStore::get(std::string_view name) const {
  for (const auto& [n, v] : entries_)
    if (n == name) return v;
  throw ArgumentError("unknown parameter " + std::string(name));
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, v] : entries_) n += static_cast<std::size_t>(v.value().size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [name, v] : entries_) v.zero_grad();
}

double ParameterStore::grad_norm() const {
  double total = 0;
  for (const auto& [name, v] : entries_)
    if (v.has_grad()) total += v.grad().squaredNorm();
  return std::sqrt(total);
}

std::vector<Matrix> ParameterStore::snapshot() const {
  std::vector<Matrix> out;
  out.reserve(entries_.size());
  for (const auto& [name, v] : entries_) out.push_back(v.value());
  return out;
}

void ParameterStore::restore(const std::vector<Matrix>& values) {
  if (values.size() != entries_.size()) throw ArgumentError("snapshot size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& v = entries_[i].second;
    if (values[i].rows() != v.rows() || values[i].cols() != v.cols())
      throw ArgumentError("snapshot shape mismatch for " + entries_[i].first);
    v.mutable_value() = values[i];
  }
}

bool ParameterStore::equals(const ParameterStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first != other.entries_[i].first) return false;
    const auto& a = entries_[i].second.value();
    const auto& b = other.entries_[i].second.value();
    if (a.rows() != b.rows() || a.cols() != b.cols() || a != b) return false;
  }
  return true;
}

std::string ParameterStore::serialize() const {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint64_t>(out, entries_.size());
  for (const auto& [name, v] : entries_) {
    put<std::uint64_t>(out, name.size());
    out += name;
    put<std::int64_t>(out, v.rows());
    put<std::int64_t>(out, v.cols());
    const Matrix& m = v.value();
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) put<double>(out, m(r, c));
  }
  return out;
}

void ParameterStore::deserialize(std::string_view blob) {
  if (blob.size() < sizeof kMagic || std::memcmp(blob.data(), kMagic, sizeof kMagic) != 0)
    throw ParseError("not a parameter blob");
  blob.remove_prefix(sizeof kMagic);
  const auto count = take<std::uint64_t>(blob);
  if (count != entries_.size())
    throw ValidationError("parameter count mismatch: blob has " + std::to_string(count) +
                          ", model has " + std::to_string(entries_.size()));
  for (auto& [name, v] : entries_) {
    const auto len = take<std::uint64_t>(blob);
    if (blob.size() < len) throw ParseError("truncated parameter blob");
    std::string stored(blob.substr(0, len));
    blob.remove_prefix(len);
    if (stored != name) throw ValidationError("parameter name mismatch: " + stored + " vs " + name);
    const auto rows = take<std::int64_t>(blob);
    const auto cols = take<std::int64_t>(blob);
    if (rows != v.rows() || cols != v.cols())
      throw ValidationError("parameter shape mismatch for " + name);
    Matrix& m = v.mutable_value();
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = take<double>(blob);
  }
  if (!blob.empty()) throw ParseError("trailing bytes in parameter blob");
}

Matrix xavier_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double gain) {
  const double a = gain * std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-a, a);
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
  return m;
}

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
  return m;
}

Linear::Linear(ParameterStore& store, const std::string& name, Eigen::Index in, Eigen::Index out,
               std::mt19937_64& rng, double gain)
    : weight(store.add(name + ".weight", xavier_uniform(in, out, rng, gain))),
      bias(store.add(name + ".bias", Matrix::Zero(1, out))) {}

OptimizerConfig::Kind parse_optimizer_kind(std::string_view name) {
  if (name == "sgd") return OptimizerConfig::Kind::sgd;
  if (name == "adam") return OptimizerConfig::Kind::adam;
  throw ValidationError("unknown optimizer '" + std::string(name) + "'");
}

Optimizer::Optimizer(ParameterStore& store, OptimizerConfig config)
    : store_(&store), config_(config) {
  if (!(config_.learning_rate > 0)) throw ValidationError("learning_rate must be > 0");
  if (config_.kind == OptimizerConfig::Kind::adam) {
    for (const auto& [name, v] : store.entries()) {
      m_.push_back(Matrix::Zero(v.rows(), v.cols()));
      v_.push_back(Matrix::Zero(v.rows(), v.cols()));
    }
  }
}

void Optimizer::step() {
  ++steps_;
  double factor = 1.0;
  if (config_.clip_norm > 0) {
    const double norm = store_->grad_norm();
    if (norm > config_.clip_norm) factor = config_.clip_norm / norm;
  }
  const double lr = config_.learning_rate;
  auto& entries = store_->entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Var& p = entries[i].second;
    if (!p.has_grad()) continue;
    const Matrix g = p.grad() * factor;
    if (config_.kind == OptimizerConfig::Kind::sgd) {
      p.mutable_value() -= lr * g;
    } else {
      m_[i] = config_.beta1 * m_[i] + (1 - config_.beta1) * g;
      v_[i] = config_.beta2 * v_[i] + (1 - config_.beta2) * g.cwiseProduct(g);
      const double bc1 = 1 - std::pow(config_.beta1, static_cast<double>(steps_));
      const double bc2 = 1 - std::pow(config_.beta2, static_cast<double>(steps_));
      p.mutable_value().array() -=
          lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + config_.epsilon);
    }
  }
  store_->zero_grad();
}

}  // namespace agreesum::nn
