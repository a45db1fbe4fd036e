#include "cmig/autodiff/value.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "cmig/errors.hpp"

namespace cmig::ad {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractViolation(msg);
}

void require_matrix(const Value& a, const char* op) {
  require(a.defined(), std::string(op) + ": undefined operand");
  require(a.rank() == 2, std::string(op) + ": expected a rank-2 operand, got " + shape_str(a.shape()));
}

void mismatch(const char* op, const Value& a, const Value& b) {
  throw ContractViolation(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
}

using BackwardFn = std::function<void(Node&)>;

Value make_node(Shape shape, std::vector<double> data, std::initializer_list<Value> parents,
                const char* op, BackwardFn fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  if (any) {
    node->requires_grad = true;
    for (const auto& p : parents) node->parents.push_back(p.ptr());
    node->backward_fn = std::move(fn);
  }
  return Value(std::move(node));
}

Value make_node_v(Shape shape, std::vector<double> data, std::span<const Value> parents,
                  const char* op, BackwardFn fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  bool any = false;
  for (const auto& p : parents) any = any || p.requires_grad();
  if (any) {
    node->requires_grad = true;
    for (const auto& p : parents) node->parents.push_back(p.ptr());
    node->backward_fn = std::move(fn);
  }
  return Value(std::move(node));
}

// Parent gradient buffer or nullptr when the parent does not need one.
double* grad_of(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  if (!p.requires_grad) return nullptr;
  p.ensure_grad();
  return p.grad.data();
}

struct Broadcast {
  std::size_t rows, cols;
  std::size_t ar, ac, br, bc;
  std::size_t ia(std::size_t r, std::size_t c) const { return (ar == 1 ? 0 : r) * ac + (ac == 1 ? 0 : c); }
  std::size_t ib(std::size_t r, std::size_t c) const { return (br == 1 ? 0 : r) * bc + (bc == 1 ? 0 : c); }
};

Broadcast broadcast_shapes(const Value& a, const Value& b, const char* op) {
  require_matrix(a, op);
  require_matrix(b, op);
  Broadcast bc{0, 0, a.rows(), a.cols(), b.rows(), b.cols()};
  auto dim = [&](std::size_t x, std::size_t y) -> std::size_t {
    if (x == y) return x;
    if (x == 1) return y;
    if (y == 1) return x;
    mismatch(op, a, b);
    return 0;
  };
  bc.rows = dim(bc.ar, bc.br);
  bc.cols = dim(bc.ac, bc.bc);
  return bc;
}

template <typename Fwd, typename DA, typename DB>
Value binary(const Value& a, const Value& b, const char* op, Fwd fwd, DA da, DB db) {
  const Broadcast bc = broadcast_shapes(a, b, op);
  std::vector<double> out(bc.rows * bc.cols);
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t r = 0; r < bc.rows; ++r)
    for (std::size_t c = 0; c < bc.cols; ++c) out[r * bc.cols + c] = fwd(ad[bc.ia(r, c)], bd[bc.ib(r, c)]);
  return make_node({bc.rows, bc.cols}, std::move(out), {a, b}, op, [bc, da, db](Node& self) {
    const auto& A = self.parents[0]->data;
    const auto& B = self.parents[1]->data;
    double* ga = grad_of(self, 0);
    double* gb = grad_of(self, 1);
    for (std::size_t r = 0; r < bc.rows; ++r) {
      for (std::size_t c = 0; c < bc.cols; ++c) {
        const double g = self.grad[r * bc.cols + c];
        const double x = A[bc.ia(r, c)];
        const double y = B[bc.ib(r, c)];
        if (ga) ga[bc.ia(r, c)] += g * da(x, y);
        if (gb) gb[bc.ib(r, c)] += g * db(x, y);
      }
    }
  });
}

template <typename Fwd, typename Deriv>
Value unary(const Value& a, const char* op, Fwd fwd, Deriv deriv) {
  require(a.defined(), std::string(op) + ": undefined operand");
  const auto ad = a.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < ad.size(); ++i) out[i] = fwd(ad[i]);
  return make_node(a.shape(), std::move(out), {a}, op, [deriv](Node& self) {
    const auto& x = self.parents[0]->data;
    double* ga = grad_of(self, 0);
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += self.grad[i] * deriv(x[i], self.data[i]);
  });
}

void check_axis(int axis, const char* op) {
  require(axis == 0 || axis == 1, std::string(op) + ": axis must be 0 or 1");
}

}  // namespace

// ---- Value ---------------------------------------------------------------

Value Value::constant(Shape shape, std::vector<double> data) {
  require(shape_size(shape) == data.size(),
          "Value: data length " + std::to_string(data.size()) + " does not match shape " + shape_str(shape));
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  return Value(std::move(node));
}

Value Value::parameter(Shape shape, std::vector<double> data) {
  Value v = constant(std::move(shape), std::move(data));
  v.node_->requires_grad = true;
  v.node_->op = "param";
  return v;
}

Value Value::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  Value v = constant({rows, cols}, std::vector<double>(rows * cols, 0.0));
  v.node_->requires_grad = requires_grad;
  return v;
}

Value Value::full(std::size_t rows, std::size_t cols, double x) {
  return constant({rows, cols}, std::vector<double>(rows * cols, x));
}

Value Value::scalar(double x) { return constant({1, 1}, {x}); }

Value Value::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return constant({rows, cols}, std::move(data));
}

std::size_t Value::rows() const {
  require(rank() == 2, "Value::rows: rank-2 value required, got " + shape_str(shape()));
  return node_->shape[0];
}

std::size_t Value::cols() const {
  require(rank() == 2, "Value::cols: rank-2 value required, got " + shape_str(shape()));
  return node_->shape[1];
}

double Value::item() const {
  require(size() == 1, "Value::item: expected a single element, got " + shape_str(shape()));
  return node_->data[0];
}

Value Value::detach() const { return constant(shape(), node_->data); }

// ---- backward ------------------------------------------------------------

void backward(const Value& root) {
  require(root.defined(), "backward: undefined root");
  require(root.size() == 1, "backward: root must be scalar, got " + shape_str(root.shape()));
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (Node* n : order)
    if (!n->is_leaf()) n->grad.assign(n->data.size(), 0.0);
  root.node()->ensure_grad();
  root.node()->grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->is_leaf()) n->backward_fn(*n);
  }
}

// ---- linear algebra ------------------------------------------------------

Value matmul(const Value& a, const Value& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) mismatch("matmul", a, b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* o = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = A[i * k + p];
      if (s == 0.0) continue;
      const double* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += s * brow[j];
    }
  }
  return make_node({m, n}, std::move(out), {a, b}, "matmul", [m, k, n](Node& self) {
    const double* A = self.parents[0]->data.data();
    const double* B = self.parents[1]->data.data();
    const double* G = self.grad.data();
    if (double* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = B + p * n;
          const double* grow = G + i * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[i * k + p] += acc;
        }
    }
    if (double* gb = grad_of(self, 1)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double s = A[i * k + p];
          if (s == 0.0) continue;
          const double* grow = G + i * n;
          double* out = gb + p * n;
          for (std::size_t j = 0; j < n; ++j) out[j] += s * grow[j];
        }
    }
  });
}

Value transpose(const Value& a) {
  require_matrix(a, "transpose");
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r * c);
  const auto ad = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = ad[i * c + j];
  return make_node({c, r}, std::move(out), {a}, "transpose", [r, c](Node& self) {
    double* ga = grad_of(self, 0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += self.grad[j * r + i];
  });
}

Value reshape(const Value& a, std::size_t rows, std::size_t cols) {
  require(a.defined(), "reshape: undefined operand");
  if (rows * cols != a.size())
    throw ContractViolation("reshape: cannot view " + shape_str(a.shape()) + " as " +
                            shape_str({rows, cols}));
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_node({rows, cols}, std::move(out), {a}, "reshape", [](Node& self) {
    double* ga = grad_of(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
  });
}

// ---- elementwise ---------------------------------------------------------

Value add(const Value& a, const Value& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Value sub(const Value& a, const Value& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Value mul(const Value& a, const Value& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Value div(const Value& a, const Value& b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Value scale(const Value& a, double s) {
  return unary(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Value add_scalar(const Value& a, double s) {
  return unary(a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Value neg(const Value& a) { return scale(a, -1.0); }

Value square(const Value& a) {
  return unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Value exp(const Value& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Value log(const Value& a) {
  for (double x : a.data())
    if (!(x > 0.0)) throw DomainError("log: non-positive operand " + std::to_string(x));
  return unary(a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Value sigmoid(const Value& a) {
  return unary(
      a, "sigmoid",
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Value leaky_relu(const Value& a, double slope) {
  return unary(
      a, "leaky_relu", [slope](double x) { return x > 0 ? x : slope * x; },
      [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Value relu(const Value& a) { return leaky_relu(a, 0.0); }

Value clamp(const Value& a, double lo, double hi) {
  require(lo <= hi, "clamp: lo > hi");
  return unary(
      a, "clamp", [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

// ---- structural ----------------------------------------------------------

Value broadcast_to(const Value& a, std::size_t rows, std::size_t cols) {
  require_matrix(a, "broadcast_to");
  const std::size_t ar = a.rows(), ac = a.cols();
  if (!((ar == rows || ar == 1) && (ac == cols || ac == 1)))
    throw ContractViolation("broadcast_to: cannot broadcast " + shape_str(a.shape()) + " to " +
                            shape_str({rows, cols}));
  std::vector<double> out(rows * cols);
  const auto ad = a.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = ad[(ar == 1 ? 0 : r) * ac + (ac == 1 ? 0 : c)];
  return make_node({rows, cols}, std::move(out), {a}, "broadcast", [rows, cols, ar, ac](Node& self) {
    double* ga = grad_of(self, 0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        ga[(ar == 1 ? 0 : r) * ac + (ac == 1 ? 0 : c)] += self.grad[r * cols + c];
  });
}

Value concat(std::span<const Value> parts, int axis) {
  check_axis(axis, "concat");
  require(!parts.empty(), "concat: no operands");
  for (const auto& p : parts) require_matrix(p, "concat");
  std::vector<std::size_t> extent;
  std::size_t rows = 0, cols = 0;
  if (axis == 0) {
    cols = parts[0].cols();
    for (const auto& p : parts) {
      if (p.cols() != cols) mismatch("concat", parts[0], p);
      extent.push_back(p.rows());
      rows += p.rows();
    }
  } else {
    rows = parts[0].rows();
    for (const auto& p : parts) {
      if (p.rows() != rows) mismatch("concat", parts[0], p);
      extent.push_back(p.cols());
      cols += p.cols();
    }
  }
  std::vector<double> out(rows * cols);
  if (axis == 0) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      std::copy(p.data().begin(), p.data().end(), out.begin() + static_cast<std::ptrdiff_t>(off));
      off += p.size();
    }
  } else {
    std::size_t coff = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const auto pd = parts[k].data();
      const std::size_t pc = extent[k];
      for (std::size_t r = 0; r < rows; ++r)
        std::copy_n(pd.begin() + static_cast<std::ptrdiff_t>(r * pc), pc,
                    out.begin() + static_cast<std::ptrdiff_t>(r * cols + coff));
      coff += pc;
    }
  }
  return make_node_v({rows, cols}, std::move(out), parts, "concat", [axis, extent, rows, cols](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < extent.size(); ++k) {
      double* g = grad_of(self, k);
      if (axis == 0) {
        const std::size_t n = extent[k] * cols;
        if (g)
          for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[off + i];
        off += n;
      } else {
        const std::size_t pc = extent[k];
        if (g)
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < pc; ++c) g[r * pc + c] += self.grad[r * cols + off + c];
        off += pc;
      }
    }
  });
}

Value concat(std::initializer_list<Value> parts, int axis) {
  return concat(std::span<const Value>(parts.begin(), parts.size()), axis);
}

Value gather_rows(const Value& a, std::span<const std::size_t> indices) {
  require_matrix(a, "gather_rows");
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  std::vector<double> out(idx.size() * c);
  const auto ad = a.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= r)
      throw ContractViolation("gather_rows: index " + std::to_string(idx[i]) + " out of range for " +
                              shape_str(a.shape()));
    std::copy_n(ad.begin() + static_cast<std::ptrdiff_t>(idx[i] * c), c,
                out.begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  const std::size_t n = idx.size();
  return make_node({n, c}, std::move(out), {a}, "gather_rows", [idx = std::move(idx), c](Node& self) {
    double* ga = grad_of(self, 0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      double* dst = ga + idx[i] * c;
      const double* src = self.grad.data() + i * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
  });
}

Value gather_elements(const Value& a, std::span<const std::size_t> flat_indices) {
  require(a.defined(), "gather_elements: undefined operand");
  std::vector<std::size_t> idx(flat_indices.begin(), flat_indices.end());
  std::vector<double> out(idx.size());
  const auto ad = a.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= ad.size()) throw ContractViolation("gather_elements: index out of range");
    out[i] = ad[idx[i]];
  }
  const std::size_t n = idx.size();
  return make_node({n, 1}, std::move(out), {a}, "gather_elements", [idx = std::move(idx)](Node& self) {
    double* ga = grad_of(self, 0);
    for (std::size_t i = 0; i < idx.size(); ++i) ga[idx[i]] += self.grad[i];
  });
}

// ---- reductions ----------------------------------------------------------

Value sum(const Value& a, int axis) {
  check_axis(axis, "sum");
  require_matrix(a, "sum");
  const std::size_t r = a.rows(), c = a.cols();
  const auto ad = a.data();
  Shape shape = axis == 0 ? Shape{1, c} : Shape{r, 1};
  std::vector<double> out(axis == 0 ? c : r, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[axis == 0 ? j : i] += ad[i * c + j];
  return make_node(shape, std::move(out), {a}, "sum", [axis, r, c](Node& self) {
    double* ga = grad_of(self, 0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += self.grad[axis == 0 ? j : i];
  });
}

Value mean(const Value& a, int axis) {
  check_axis(axis, "mean");
  require_matrix(a, "mean");
  const std::size_t n = axis == 0 ? a.rows() : a.cols();
  require(n > 0, "mean: empty axis");
  return scale(sum(a, axis), 1.0 / static_cast<double>(n));
}

Value sum_all(const Value& a) {
  require(a.defined(), "sum_all: undefined operand");
  double s = 0.0;
  for (double x : a.data()) s += x;
  return make_node({1, 1}, {s}, {a}, "sum_all", [](Node& self) {
    double* ga = grad_of(self, 0);
    const double g = self.grad[0];
    for (std::size_t i = 0; i < self.parents[0]->data.size(); ++i) ga[i] += g;
  });
}

Value mean_all(const Value& a) {
  require(a.size() > 0, "mean_all: empty operand");
  return scale(sum_all(a), 1.0 / static_cast<double>(a.size()));
}

std::vector<std::size_t> argmax(const Value& a, int axis) {
  check_axis(axis, "argmax");
  require_matrix(a, "argmax");
  const std::size_t r = a.rows(), c = a.cols();
  require(r > 0 && c > 0, "argmax: empty operand");
  const auto ad = a.data();
  std::vector<std::size_t> best;
  if (axis == 0) {
    best.assign(c, 0);
    for (std::size_t j = 0; j < c; ++j)
      for (std::size_t i = 1; i < r; ++i)
        if (ad[i * c + j] > ad[best[j] * c + j]) best[j] = i;
  } else {
    best.assign(r, 0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 1; j < c; ++j)
        if (ad[i * c + j] > ad[i * c + best[i]]) best[i] = j;
  }
  return best;
}

Value max_reduce(const Value& a, int axis) {
  auto best = argmax(a, axis);
  const std::size_t c = a.cols();
  const auto ad = a.data();
  std::vector<std::size_t> flat(best.size());
  std::vector<double> out(best.size());
  for (std::size_t k = 0; k < best.size(); ++k) {
    flat[k] = axis == 0 ? best[k] * c + k : k * c + best[k];
    out[k] = ad[flat[k]];
  }
  Shape shape = axis == 0 ? Shape{1, c} : Shape{a.rows(), 1};
  return make_node(shape, std::move(out), {a}, "max_reduce", [flat = std::move(flat)](Node& self) {
    double* ga = grad_of(self, 0);
    for (std::size_t k = 0; k < flat.size(); ++k) ga[flat[k]] += self.grad[k];
  });
}

Value softmax(const Value& a, int axis) {
  check_axis(axis, "softmax");
  require_matrix(a, "softmax");
  const std::size_t r = a.rows(), c = a.cols();
  const auto ad = a.data();
  for (double x : ad)
    if (!std::isfinite(x)) throw DomainError("softmax: non-finite operand");
  const std::size_t groups = axis == 1 ? r : c;
  const std::size_t len = axis == 1 ? c : r;
  auto at = [&](std::size_t g, std::size_t k) { return axis == 1 ? g * c + k : k * c + g; };
  std::vector<double> out(r * c);
  for (std::size_t g = 0; g < groups; ++g) {
    double mx = ad[at(g, 0)];
    for (std::size_t k = 1; k < len; ++k) mx = std::max(mx, ad[at(g, k)]);
    double z = 0.0;
    for (std::size_t k = 0; k < len; ++k) z += (out[at(g, k)] = std::exp(ad[at(g, k)] - mx));
    for (std::size_t k = 0; k < len; ++k) out[at(g, k)] /= z;
  }
  return make_node({r, c}, std::move(out), {a}, "softmax", [axis, r, c](Node& self) {
    double* ga = grad_of(self, 0);
    const std::size_t groups = axis == 1 ? r : c;
    const std::size_t len = axis == 1 ? c : r;
    auto at = [&](std::size_t g, std::size_t k) { return axis == 1 ? g * c + k : k * c + g; };
    for (std::size_t g = 0; g < groups; ++g) {
      double dot = 0.0;
      for (std::size_t k = 0; k < len; ++k) dot += self.grad[at(g, k)] * self.data[at(g, k)];
      for (std::size_t k = 0; k < len; ++k) {
        const std::size_t i = at(g, k);
        ga[i] += self.data[i] * (self.grad[i] - dot);
      }
    }
  });
}

Value l2norm(const Value& a, int axis) {
  check_axis(axis, "l2norm");
  require_matrix(a, "l2norm");
  const std::size_t r = a.rows(), c = a.cols();
  const auto ad = a.data();
  Shape shape = axis == 0 ? Shape{1, c} : Shape{r, 1};
  std::vector<double> out(axis == 0 ? c : r, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[axis == 0 ? j : i] += ad[i * c + j] * ad[i * c + j];
  for (double& x : out) x = std::sqrt(x);
  return make_node(shape, std::move(out), {a}, "l2norm", [axis, r, c](Node& self) {
    double* ga = grad_of(self, 0);
    const auto& x = self.parents[0]->data;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        const std::size_t o = axis == 0 ? j : i;
        const double n = self.data[o];
        if (n > 0.0) ga[i * c + j] += self.grad[o] * x[i * c + j] / n;
      }
  });
}

}  // namespace cmig::ad
