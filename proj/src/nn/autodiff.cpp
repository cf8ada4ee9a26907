#include "agreesum/nn/autodiff.hpp"

#include <cmath>
#include <unordered_set>

#include "agreesum/error.hpp"

namespace agreesum::nn {
namespace {

thread_local bool g_grad_enabled = true;


Var make(Matrix value, std::vector<std::shared_ptr<Node>> parents,
         std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || p->requires_grad;
    if (needs) {
      node->requires_grad = true;
      node->parents = std::move(parents);
      node->backward = std::move(backward);
    }
  }
  return Var(std::move(node));
}

void push_grad(Node& parent, const Matrix& g) {
  if (parent.requires_grad) parent.accumulate(g);
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ArgumentError(std::string(op) + ": shape mismatch");
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }
NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var leaf(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

Var scalar_constant(double v) { return constant(Matrix::Constant(1, 1, v)); }

void backward(const Var& output) {
  if (output.rows() != 1 || output.cols() != 1)
    throw ArgumentError("backward requires a scalar output");
  if (!output.requires_grad()) return;
  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{output.node(), 0}};
  seen.insert(output.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !p->parents.empty() && seen.insert(p).second)
        stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  output.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
  // Free interior gradients; leaves keep theirs for the optimizer.
  for (Node* n : order)
    if (!n->parents.empty()) n->grad.resize(0, 0);
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw ArgumentError("matmul: inner dimension mismatch");
  return make(a.value() * b.value(), {a.shared(), b.shared()}, [](Node& n) {
    Node& a = *n.parents[0];
    Node& b = *n.parents[1];
    if (a.requires_grad) a.accumulate(n.grad * b.value.transpose());
    if (b.requires_grad) b.accumulate(a.value.transpose() * n.grad);
  });
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  return make(a.value() + b.value(), {a.shared(), b.shared()}, [](Node& n) {
    push_grad(*n.parents[0], n.grad);
    push_grad(*n.parents[1], n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  return make(a.value() - b.value(), {a.shared(), b.shared()}, [](Node& n) {
    push_grad(*n.parents[0], n.grad);
    push_grad(*n.parents[1], -n.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  return make(a.value().cwiseProduct(b.value()), {a.shared(), b.shared()}, [](Node& n) {
    Node& a = *n.parents[0];
    Node& b = *n.parents[1];
    if (a.requires_grad) a.accumulate(n.grad.cwiseProduct(b.value));
    if (b.requires_grad) b.accumulate(n.grad.cwiseProduct(a.value));
  });
}

Var scale(const Var& a, double s) {
  return make(a.value() * s, {a.shared()}, [s](Node& n) { push_grad(*n.parents[0], n.grad * s); });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ArgumentError("add_row: shape mismatch");
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return make(std::move(out), {a.shared(), row.shared()}, [](Node& n) {
    push_grad(*n.parents[0], n.grad);
    if (n.parents[1]->requires_grad) n.parents[1]->accumulate(n.grad.colwise().sum());
  });
}

Var transpose(const Var& a) {
  return make(a.value().transpose(), {a.shared()},
              [](Node& n) { push_grad(*n.parents[0], n.grad.transpose()); });
}

Var tanh(const Var& a) {
  Matrix out = a.value().array().tanh().matrix();
  return make(out, {a.shared()}, [](Node& n) {
    push_grad(*n.parents[0], n.grad.cwiseProduct((1.0 - n.value.array().square()).matrix()));
  });
}

Var sigmoid(const Var& a) {
  Matrix out = a.value().unaryExpr([](double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
  return make(out, {a.shared()}, [](Node& n) {
    push_grad(*n.parents[0],
              n.grad.cwiseProduct((n.value.array() * (1.0 - n.value.array())).matrix()));
  });
}

Var relu(const Var& a) {
  Matrix out = a.value().cwiseMax(0.0);
  return make(out, {a.shared()}, [](Node& n) {
    Matrix mask = (n.value.array() > 0.0).cast<double>().matrix();
    push_grad(*n.parents[0], n.grad.cwiseProduct(mask));
  });
}

Var log_sigmoid(const Var& a) {
  // log σ(x) = min(x, 0) - log1p(exp(-|x|))
  Matrix out = a.value().unaryExpr(
      [](double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x))); });
  return make(out, {a.shared()}, [](Node& n) {
    const Matrix& x = n.parents[0]->value;
    // d/dx log σ(x) = 1 - σ(x) = σ(-x)
    Matrix d = x.unaryExpr([](double v) {
      return v >= 0 ? std::exp(-v) / (1.0 + std::exp(-v)) : 1.0 / (1.0 + std::exp(v));
    });
    push_grad(*n.parents[0], n.grad.cwiseProduct(d));
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ArgumentError("concat_cols: no inputs");
  Eigen::Index rows = parts[0].rows(), cols = 0;
  std::vector<std::shared_ptr<Node>> parents;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ArgumentError("concat_cols: row mismatch");
    cols += p.cols();
    parents.push_back(p.shared());
  }
  Matrix out(rows, cols);
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  return make(std::move(out), std::move(parents), [](Node& n) {
    Eigen::Index off = 0;
    for (auto& p : n.parents) {
      const auto c = p->value.cols();
      if (p->requires_grad) p->accumulate(n.grad.middleCols(off, c));
      off += c;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ArgumentError("concat_rows: no inputs");
  Eigen::Index cols = parts[0].cols(), rows = 0;
  std::vector<std::shared_ptr<Node>> parents;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ArgumentError("concat_rows: column mismatch");
    rows += p.rows();
    parents.push_back(p.shared());
  }
  Matrix out(rows, cols);
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    offset += p.rows();
  }
  return make(std::move(out), std::move(parents), [](Node& n) {
    Eigen::Index off = 0;
    for (auto& p : n.parents) {
      const auto r = p->value.rows();
      if (p->requires_grad) p->accumulate(n.grad.middleRows(off, r));
      off += r;
    }
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows())
    throw ArgumentError("slice_rows: out of range");
  return make(a.value().middleRows(start, count), {a.shared()}, [start, count](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
    g.middleRows(start, count) = n.grad;
    p.accumulate(g);
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols())
    throw ArgumentError("slice_cols: out of range");
  return make(a.value().middleCols(start, count), {a.shared()}, [start, count](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
    g.middleCols(start, count) = n.grad;
    p.accumulate(g);
  });
}

Var gather_rows(const Var& table, std::span<const std::int32_t> ids) {
  std::vector<std::int32_t> idx(ids.begin(), ids.end());
  Matrix out(static_cast<Eigen::Index>(idx.size()), table.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= table.rows()) throw ArgumentError("gather_rows: id out of range");
    out.row(static_cast<Eigen::Index>(i)) = table.value().row(idx[i]);
  }
  return make(std::move(out), {table.shared()}, [idx = std::move(idx)](Node& n) {
    Node& t = *n.parents[0];
    if (!t.requires_grad) return;
    if (t.grad.size() == 0) t.grad = Matrix::Zero(t.value.rows(), t.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
      t.grad.row(idx[i]) += n.grad.row(static_cast<Eigen::Index>(i));
  });
}

Var unfold(const Var& a, int window, int pad_front, int pad_back) {
  if (window < 1 || pad_front < 0 || pad_back < 0) throw ArgumentError("unfold: bad geometry");
  const Eigen::Index len = a.rows(), dim = a.cols();
  const Eigen::Index out_rows = len + pad_front + pad_back - window + 1;
  if (out_rows < 1) throw ArgumentError("unfold: sequence shorter than window");
  Matrix out = Matrix::Zero(out_rows, dim * window);
  for (Eigen::Index t = 0; t < out_rows; ++t)
    for (int j = 0; j < window; ++j) {
      const Eigen::Index src = t - pad_front + j;
      if (src >= 0 && src < len) out.block(t, j * dim, 1, dim) = a.value().row(src);
    }
  return make(std::move(out), {a.shared()}, [window, pad_front, out_rows](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    const Eigen::Index len = p.value.rows(), dim = p.value.cols();
    Matrix g = Matrix::Zero(len, dim);
    for (Eigen::Index t = 0; t < out_rows; ++t)
      for (int j = 0; j < window; ++j) {
        const Eigen::Index src = t - pad_front + j;
        if (src >= 0 && src < len) g.row(src) += n.grad.block(t, j * dim, 1, dim);
      }
    p.accumulate(g);
  });
}

Var softmax_rows(const Var& a, const std::vector<bool>* masked) {
  Matrix out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < out.cols(); ++c)
      if (!masked || !(*masked)[static_cast<std::size_t>(c)]) mx = std::max(mx, out(r, c));
    double total = 0;
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      const bool off = masked && (*masked)[static_cast<std::size_t>(c)];
      out(r, c) = off ? 0.0 : std::exp(out(r, c) - mx);
      total += out(r, c);
    }
    if (total > 0) out.row(r) /= total;
  }
  return make(std::move(out), {a.shared()}, [](Node& n) {
    const Matrix& y = n.value;
    Matrix dot = (n.grad.cwiseProduct(y)).rowwise().sum();
    Matrix g = y.cwiseProduct(n.grad - dot.replicate(1, y.cols()));
    push_grad(*n.parents[0], g);
  });
}

Matrix log_softmax(const Matrix& logits) {
  Matrix out = logits;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double mx = out.row(r).maxCoeff();
    const double lse = mx + std::log((out.row(r).array() - mx).exp().sum());
    out.row(r).array() -= lse;
  }
  return out;
}

Var log_softmax_rows(const Var& a) {
  return make(log_softmax(a.value()), {a.shared()}, [](Node& n) {
    Matrix p = n.value.array().exp().matrix();
    Matrix total = n.grad.rowwise().sum();
    push_grad(*n.parents[0], n.grad - p.cwiseProduct(total.replicate(1, p.cols())));
  });
}

Var pick(const Var& a, std::span<const std::int32_t> cols) {
  if (static_cast<Eigen::Index>(cols.size()) != a.rows()) throw ArgumentError("pick: size mismatch");
  std::vector<std::int32_t> idx(cols.begin(), cols.end());
  Matrix out(a.rows(), 1);
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const auto c = idx[static_cast<std::size_t>(r)];
    if (c < 0 || c >= a.cols()) throw ArgumentError("pick: column out of range");
    out(r, 0) = a.value()(r, c);
  }
  return make(std::move(out), {a.shared()}, [idx = std::move(idx)](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, idx[static_cast<std::size_t>(r)]) = n.grad(r, 0);
    p.accumulate(g);
  });
}

Var sum(const Var& a) {
  return make(Matrix::Constant(1, 1, a.value().sum()), {a.shared()}, [](Node& n) {
    Node& p = *n.parents[0];
    push_grad(p, Matrix::Constant(p.value.rows(), p.value.cols(), n.grad(0, 0)));
  });
}

Var mean(const Var& a) {
  const double count = static_cast<double>(a.value().size());
  return make(Matrix::Constant(1, 1, a.value().mean()), {a.shared()}, [count](Node& n) {
    Node& p = *n.parents[0];
    push_grad(p, Matrix::Constant(p.value.rows(), p.value.cols(), n.grad(0, 0) / count));
  });
}

Var mean_rows(const Var& a) {
  const double count = static_cast<double>(a.rows());
  return make(a.value().colwise().mean(), {a.shared()}, [count](Node& n) {
    Node& p = *n.parents[0];
    push_grad(p, (n.grad / count).replicate(p.value.rows(), 1));
  });
}

Var max_rows(const Var& a) {
  if (a.rows() == 0) throw ArgumentError("max_rows: empty input");
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(a.cols()));
  Matrix out(1, a.cols());
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    Eigen::Index r = 0;
    out(0, c) = a.value().col(c).maxCoeff(&r);
    arg[static_cast<std::size_t>(c)] = r;
  }
  return make(std::move(out), {a.shared()}, [arg = std::move(arg)](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    Matrix g = Matrix::Zero(p.value.rows(), p.value.cols());
    for (std::size_t c = 0; c < arg.size(); ++c)
      g(arg[c], static_cast<Eigen::Index>(c)) = n.grad(0, static_cast<Eigen::Index>(c));
    p.accumulate(g);
  });
}

}  // namespace agreesum::nn
