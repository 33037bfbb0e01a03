#include "gp2f/tape.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "gp2f/error.hpp"
#include "gp2f/kernels.hpp"

namespace gp2f {

namespace {
const kernels::Backend& K() { return kernels::active(); }

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_logsigmoid(double x) {
  // log σ(x) = −softplus(−x)
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}
}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::input: return "input";
    case Op::constant: return "constant";
    case Op::matmul: return "matmul";
    case Op::matmul_nt: return "matmul_nt";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::add_rowvec: return "add_rowvec";
    case Op::scale: return "scale";
    case Op::mul_scalar: return "mul_scalar";
    case Op::affine_mix: return "affine_mix";
    case Op::mul_mask: return "mul_mask";
    case Op::relu: return "relu";
    case Op::sigmoid: return "sigmoid";
    case Op::logsigmoid: return "logsigmoid";
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::row_l2_normalize: return "row_l2_normalize";
    case Op::row_sum: return "row_sum";
    case Op::sum: return "sum";
    case Op::masked_sum: return "masked_sum";
    case Op::gather_rows: return "gather_rows";
    case Op::softmax_cross_entropy: return "softmax_cross_entropy";
  }
  return "?";
}

const Tape::Node& Tape::node(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    throw ContractError("tape: bad node id " + std::to_string(id));
  return nodes_[static_cast<std::size_t>(id)];
}

Tape::Node& Tape::node(int id) {
  return const_cast<Node&>(static_cast<const Tape*>(this)->node(id));
}

const DenseMatrix& Tape::grad(int id) const {
  const Node& n = node(id);
  if (n.grad.size() == 0) throw ContractError("tape: gradient not computed for node");
  return n.grad;
}

double Tape::scalar_value(int id) const {
  const Node& n = node(id);
  if (n.value.rows != 1 || n.value.cols != 1)
    throw DimensionError("tape: node is not scalar (1x1)");
  return n.value.data[0];
}

// Forward evaluation of one node. When `replay` is set, inputs are read from
// it instead of the recorded snapshots (replay_matches uses this).
DenseMatrix Tape::eval(const Node& n, const std::vector<DenseMatrix>* replay) const {
  auto in = [&](int id) -> const DenseMatrix& {
    return replay ? (*replay)[static_cast<std::size_t>(id)] : node(id).value;
  };
  switch (n.op) {
    case Op::input:
    case Op::constant:
      return n.value;
    case Op::matmul: {
      const DenseMatrix &a = in(n.a), &b = in(n.b);
      DenseMatrix c(a.rows, b.cols);
      K().gemm_nn(a.data.data(), b.data.data(), c.data.data(), a.rows, a.cols, b.cols, false);
      return c;
    }
    case Op::matmul_nt: {
      const DenseMatrix &a = in(n.a), &b = in(n.b);
      DenseMatrix c(a.rows, b.rows);
      K().gemm_nt(a.data.data(), b.data.data(), c.data.data(), a.rows, a.cols, b.rows, false);
      return c;
    }
    case Op::add: {
      const DenseMatrix &a = in(n.a), &b = in(n.b);
      DenseMatrix c(a.rows, a.cols);
      K().add(a.data.data(), b.data.data(), c.data.data(), a.size());
      return c;
    }
    case Op::sub: {
      const DenseMatrix &a = in(n.a), &b = in(n.b);
      DenseMatrix c(a.rows, a.cols);
      K().sub(a.data.data(), b.data.data(), c.data.data(), a.size());
      return c;
    }
    case Op::add_rowvec: {
      const DenseMatrix &a = in(n.a), &v = in(n.b);
      DenseMatrix c(a.rows, a.cols);
      for (int i = 0; i < a.rows; ++i)
        K().add(a.row(i), v.data.data(), c.row(i), static_cast<std::size_t>(a.cols));
      return c;
    }
    case Op::scale: {
      const DenseMatrix& a = in(n.a);
      DenseMatrix c(a.rows, a.cols);
      K().scale(a.data.data(), n.scalar, c.data.data(), a.size());
      return c;
    }
    case Op::mul_scalar: {
      const DenseMatrix& a = in(n.a);
      const double s = in(n.b).data[0];
      DenseMatrix c(a.rows, a.cols);
      K().scale(a.data.data(), s, c.data.data(), a.size());
      return c;
    }
    case Op::affine_mix: {
      const DenseMatrix &x = in(n.a), &y = in(n.b);
      const double s = in(n.c).data[0];
      DenseMatrix c(x.rows, x.cols);
      for (std::size_t i = 0; i < x.size(); ++i)
        c.data[i] = s * x.data[i] + (1.0 - s) * y.data[i];
      return c;
    }
    case Op::mul_mask: {
      const DenseMatrix& a = in(n.a);
      DenseMatrix c(a.rows, a.cols);
      K().mul(a.data.data(), n.mask->data.data(), c.data.data(), a.size());
      return c;
    }
    case Op::relu: {
      const DenseMatrix& a = in(n.a);
      DenseMatrix c(a.rows, a.cols);
      K().relu(a.data.data(), c.data.data(), a.size());
      return c;
    }
    case Op::sigmoid: {
      const DenseMatrix& a = in(n.a);
      DenseMatrix c(a.rows, a.cols);
      for (std::size_t i = 0; i < a.size(); ++i) c.data[i] = stable_sigmoid(a.data[i]);
      return c;
    }
    case Op::logsigmoid: {
      const DenseMatrix& a = in(n.a);
      DenseMatrix c(a.rows, a.cols);
      for (std::size_t i = 0; i < a.size(); ++i) c.data[i] = stable_logsigmoid(a.data[i]);
      return c;
    }
    case Op::exp: {
      const DenseMatrix& a = in(n.a);
      DenseMatrix c(a.rows, a.cols);
      for (std::size_t i = 0; i < a.size(); ++i) c.data[i] = std::exp(a.data[i]);
      return c;
    }
    case Op::log: {
      const DenseMatrix& a = in(n.a);
      DenseMatrix c(a.rows, a.cols);
      for (std::size_t i = 0; i < a.size(); ++i) c.data[i] = std::log(a.data[i]);
      return c;
    }
    case Op::row_l2_normalize:
      return gp2f::row_l2_normalize(in(n.a));
    case Op::row_sum: {
      const DenseMatrix& a = in(n.a);
      DenseMatrix c(a.rows, 1);
      for (int i = 0; i < a.rows; ++i)
        c.data[static_cast<std::size_t>(i)] = K().sum(a.row(i), static_cast<std::size_t>(a.cols));
      return c;
    }
    case Op::sum: {
      DenseMatrix c(1, 1);
      c.data[0] = K().sum(in(n.a).data.data(), in(n.a).size());
      return c;
    }
    case Op::masked_sum: {
      const DenseMatrix& a = in(n.a);
      DenseMatrix c(1, 1);
      c.data[0] = K().dot(a.data.data(), n.mask->data.data(), a.size());
      return c;
    }
    case Op::gather_rows: {
      const DenseMatrix& a = in(n.a);
      DenseMatrix c(static_cast<int>(n.indices.size()), a.cols);
      for (std::size_t t = 0; t < n.indices.size(); ++t)
        std::memcpy(c.row(static_cast<int>(t)), a.row(n.indices[t]),
                    sizeof(double) * static_cast<std::size_t>(a.cols));
      return c;
    }
    case Op::softmax_cross_entropy: {
      const DenseMatrix& x = in(n.a);
      double total = 0.0;
      for (int i = 0; i < x.rows; ++i) {
        const double* r = x.row(i);
        double mx = r[0];
        for (int j = 1; j < x.cols; ++j) mx = std::max(mx, r[j]);
        double denom = 0.0;
        for (int j = 0; j < x.cols; ++j) denom += std::exp(r[j] - mx);
        total += mx + std::log(denom) - r[n.indices[static_cast<std::size_t>(i)]];
      }
      DenseMatrix c(1, 1);
      c.data[0] = total / x.rows;
      return c;
    }
  }
  throw ContractError("tape: unhandled op");
}

int Tape::push(Node n, const char* what) {
  n.value = eval(n, nullptr);
  require_finite(n.value, std::string("tape op ") + what);
  if (n.op == Op::softmax_cross_entropy) {
    // Cache softmax probabilities for the backward pass.
    const DenseMatrix& x = node(n.a).value;
    DenseMatrix probs(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i) {
      const double* r = x.row(i);
      double mx = r[0];
      for (int j = 1; j < x.cols; ++j) mx = std::max(mx, r[j]);
      double denom = 0.0;
      for (int j = 0; j < x.cols; ++j) denom += std::exp(r[j] - mx);
      for (int j = 0; j < x.cols; ++j) probs.at(i, j) = std::exp(r[j] - mx) / denom;
    }
    n.aux = std::move(probs);
  }
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::input(DenseMatrix value) {
  require_finite(value, "tape input");
  Node n;
  n.op = Op::input;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::constant(DenseMatrix value) {
  require_finite(value, "tape constant");
  Node n;
  n.op = Op::constant;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

namespace {
void check_dims(bool ok, const char* what) {
  if (!ok) throw DimensionError(std::string("tape op ") + what + ": shape mismatch");
}
}  // namespace

int Tape::matmul(int a, int b) {
  check_dims(node(a).value.cols == node(b).value.rows, "matmul");
  Node n;
  n.op = Op::matmul;
  n.a = a;
  n.b = b;
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  return push(std::move(n), "matmul");
}

int Tape::matmul_nt(int a, int b) {
  check_dims(node(a).value.cols == node(b).value.cols, "matmul_nt");
  Node n;
  n.op = Op::matmul_nt;
  n.a = a;
  n.b = b;
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  return push(std::move(n), "matmul_nt");
}

int Tape::add(int a, int b) {
  check_dims(node(a).value.same_shape(node(b).value), "add");
  Node n;
  n.op = Op::add;
  n.a = a;
  n.b = b;
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  return push(std::move(n), "add");
}

int Tape::sub(int a, int b) {
  check_dims(node(a).value.same_shape(node(b).value), "sub");
  Node n;
  n.op = Op::sub;
  n.a = a;
  n.b = b;
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  return push(std::move(n), "sub");
}

int Tape::add_rowvec(int a, int v) {
  check_dims(node(v).value.rows == 1 && node(v).value.cols == node(a).value.cols,
             "add_rowvec");
  Node n;
  n.op = Op::add_rowvec;
  n.a = a;
  n.b = v;
  n.requires_grad = node(a).requires_grad || node(v).requires_grad;
  return push(std::move(n), "add_rowvec");
}

int Tape::scale(int a, double s) {
  Node n;
  n.op = Op::scale;
  n.a = a;
  n.scalar = s;
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n), "scale");
}

int Tape::mul_scalar(int a, int s) {
  check_dims(node(s).value.rows == 1 && node(s).value.cols == 1, "mul_scalar");
  Node n;
  n.op = Op::mul_scalar;
  n.a = a;
  n.b = s;
  n.requires_grad = node(a).requires_grad || node(s).requires_grad;
  return push(std::move(n), "mul_scalar");
}

int Tape::affine_mix(int x, int y, int s) {
  check_dims(node(x).value.same_shape(node(y).value), "affine_mix");
  check_dims(node(s).value.rows == 1 && node(s).value.cols == 1, "affine_mix");
  Node n;
  n.op = Op::affine_mix;
  n.a = x;
  n.b = y;
  n.c = s;
  n.requires_grad = node(x).requires_grad || node(y).requires_grad || node(s).requires_grad;
  return push(std::move(n), "affine_mix");
}

int Tape::mul_mask(int a, DenseMatrix mask) {
  check_dims(node(a).value.same_shape(mask), "mul_mask");
  Node n;
  n.op = Op::mul_mask;
  n.a = a;
  n.mask = std::make_shared<const DenseMatrix>(std::move(mask));
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n), "mul_mask");
}

int Tape::relu(int a) {
  Node n;
  n.op = Op::relu;
  n.a = a;
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n), "relu");
}

int Tape::sigmoid(int a) {
  Node n;
  n.op = Op::sigmoid;
  n.a = a;
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n), "sigmoid");
}

int Tape::logsigmoid(int a) {
  Node n;
  n.op = Op::logsigmoid;
  n.a = a;
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n), "logsigmoid");
}

int Tape::exp(int a) {
  Node n;
  n.op = Op::exp;
  n.a = a;
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n), "exp");
}

int Tape::log(int a) {
  Node n;
  n.op = Op::log;
  n.a = a;
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n), "log");
}

int Tape::row_l2_normalize(int a) {
  Node n;
  n.op = Op::row_l2_normalize;
  n.a = a;
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n), "row_l2_normalize");
}

int Tape::row_sum(int a) {
  Node n;
  n.op = Op::row_sum;
  n.a = a;
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n), "row_sum");
}

int Tape::sum(int a) {
  Node n;
  n.op = Op::sum;
  n.a = a;
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n), "sum");
}

int Tape::masked_sum(int a, DenseMatrix mask) {
  check_dims(node(a).value.same_shape(mask), "masked_sum");
  Node n;
  n.op = Op::masked_sum;
  n.a = a;
  n.mask = std::make_shared<const DenseMatrix>(std::move(mask));
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n), "masked_sum");
}

int Tape::gather_rows(int a, std::vector<int> rows) {
  for (int r : rows)
    if (r < 0 || r >= node(a).value.rows)
      throw DimensionError("tape op gather_rows: row index out of range");
  Node n;
  n.op = Op::gather_rows;
  n.a = a;
  n.indices = std::move(rows);
  n.requires_grad = node(a).requires_grad;
  return push(std::move(n), "gather_rows");
}

int Tape::softmax_cross_entropy(int logits, std::vector<int> labels) {
  const DenseMatrix& x = node(logits).value;
  if (static_cast<int>(labels.size()) != x.rows)
    throw DimensionError("tape op softmax_cross_entropy: label count != rows");
  for (int y : labels)
    if (y < 0 || y >= x.cols)
      throw ValidationError("softmax_cross_entropy: label " + std::to_string(y) +
                            " outside [0," + std::to_string(x.cols) + ")");
  Node n;
  n.op = Op::softmax_cross_entropy;
  n.a = logits;
  n.indices = std::move(labels);
  n.requires_grad = node(logits).requires_grad;
  return push(std::move(n), "softmax_cross_entropy");
}

void Tape::backward(int output) {
  Node& out = node(output);
  if (out.value.rows != 1 || out.value.cols != 1)
    throw DimensionError("tape backward: output must be 1x1");
  if (!out.requires_grad)
    throw ContractError("tape backward: output does not depend on any input");

  for (Node& n : nodes_) n.grad = DenseMatrix();
  auto ensure_grad = [this](int id) -> DenseMatrix& {
    Node& n = node(id);
    if (n.grad.size() == 0) n.grad = DenseMatrix(n.value.rows, n.value.cols);
    return n.grad;
  };
  ensure_grad(output).data[0] = 1.0;

  for (int id = output; id >= 0; --id) {
    Node& n = node(id);
    if (!n.requires_grad || n.grad.size() == 0) continue;
    const DenseMatrix& g = n.grad;
    switch (n.op) {
      case Op::input:
      case Op::constant:
        break;
      case Op::matmul: {
        const DenseMatrix &a = node(n.a).value, &b = node(n.b).value;
        if (node(n.a).requires_grad) {
          DenseMatrix& da = ensure_grad(n.a);  // dA += G · Bᵀ
          K().gemm_nt(g.data.data(), b.data.data(), da.data.data(), g.rows, g.cols, b.rows,
                      true);
        }
        if (node(n.b).requires_grad) {
          DenseMatrix& db = ensure_grad(n.b);  // dB += Aᵀ · G
          K().gemm_tn(a.data.data(), g.data.data(), db.data.data(), a.rows, a.cols, g.cols,
                      true);
        }
        break;
      }
      case Op::matmul_nt: {
        const DenseMatrix &a = node(n.a).value, &b = node(n.b).value;
        if (node(n.a).requires_grad) {
          DenseMatrix& da = ensure_grad(n.a);  // dA += G · B
          K().gemm_nn(g.data.data(), b.data.data(), da.data.data(), g.rows, b.rows, b.cols,
                      true);
        }
        if (node(n.b).requires_grad) {
          DenseMatrix& db = ensure_grad(n.b);  // dB += Gᵀ · A
          K().gemm_tn(g.data.data(), a.data.data(), db.data.data(), g.rows, g.cols, a.cols,
                      true);
        }
        break;
      }
      case Op::add:
        if (node(n.a).requires_grad)
          K().axpy(1.0, g.data.data(), ensure_grad(n.a).data.data(), g.size());
        if (node(n.b).requires_grad)
          K().axpy(1.0, g.data.data(), ensure_grad(n.b).data.data(), g.size());
        break;
      case Op::sub:
        if (node(n.a).requires_grad)
          K().axpy(1.0, g.data.data(), ensure_grad(n.a).data.data(), g.size());
        if (node(n.b).requires_grad)
          K().axpy(-1.0, g.data.data(), ensure_grad(n.b).data.data(), g.size());
        break;
      case Op::add_rowvec: {
        if (node(n.a).requires_grad)
          K().axpy(1.0, g.data.data(), ensure_grad(n.a).data.data(), g.size());
        if (node(n.b).requires_grad) {
          DenseMatrix& dv = ensure_grad(n.b);
          for (int i = 0; i < g.rows; ++i)
            K().add(dv.data.data(), g.row(i), dv.data.data(),
                    static_cast<std::size_t>(g.cols));
        }
        break;
      }
      case Op::scale:
        if (node(n.a).requires_grad)
          K().axpy(n.scalar, g.data.data(), ensure_grad(n.a).data.data(), g.size());
        break;
      case Op::mul_scalar: {
        const double s = node(n.b).value.data[0];
        if (node(n.a).requires_grad)
          K().axpy(s, g.data.data(), ensure_grad(n.a).data.data(), g.size());
        if (node(n.b).requires_grad)
          ensure_grad(n.b).data[0] +=
              K().dot(g.data.data(), node(n.a).value.data.data(), g.size());
        break;
      }
      case Op::affine_mix: {
        const double s = node(n.c).value.data[0];
        if (node(n.a).requires_grad)
          K().axpy(s, g.data.data(), ensure_grad(n.a).data.data(), g.size());
        if (node(n.b).requires_grad)
          K().axpy(1.0 - s, g.data.data(), ensure_grad(n.b).data.data(), g.size());
        if (node(n.c).requires_grad) {
          const DenseMatrix &x = node(n.a).value, &y = node(n.b).value;
          double acc = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i)
            acc += g.data[i] * (x.data[i] - y.data[i]);
          ensure_grad(n.c).data[0] += acc;
        }
        break;
      }
      case Op::mul_mask:
        if (node(n.a).requires_grad) {
          DenseMatrix& da = ensure_grad(n.a);
          for (std::size_t i = 0; i < g.size(); ++i) da.data[i] += g.data[i] * n.mask->data[i];
        }
        break;
      case Op::relu:
        if (node(n.a).requires_grad)
          K().relu_bwd(g.data.data(), node(n.a).value.data.data(),
                       ensure_grad(n.a).data.data(), g.size());
        break;
      case Op::sigmoid:
        if (node(n.a).requires_grad) {
          DenseMatrix& da = ensure_grad(n.a);
          for (std::size_t i = 0; i < g.size(); ++i) {
            const double s = n.value.data[i];
            da.data[i] += g.data[i] * s * (1.0 - s);
          }
        }
        break;
      case Op::logsigmoid:
        if (node(n.a).requires_grad) {
          DenseMatrix& da = ensure_grad(n.a);
          for (std::size_t i = 0; i < g.size(); ++i)
            da.data[i] += g.data[i] * stable_sigmoid(-node(n.a).value.data[i]);
        }
        break;
      case Op::exp:
        if (node(n.a).requires_grad) {
          DenseMatrix& da = ensure_grad(n.a);
          for (std::size_t i = 0; i < g.size(); ++i) da.data[i] += g.data[i] * n.value.data[i];
        }
        break;
      case Op::log:
        if (node(n.a).requires_grad) {
          DenseMatrix& da = ensure_grad(n.a);
          for (std::size_t i = 0; i < g.size(); ++i)
            da.data[i] += g.data[i] / node(n.a).value.data[i];
        }
        break;
      case Op::row_l2_normalize: {
        if (!node(n.a).requires_grad) break;
        const DenseMatrix& x = node(n.a).value;
        DenseMatrix& da = ensure_grad(n.a);
        constexpr double eps = 1e-12;
        for (int i = 0; i < x.rows; ++i) {
          const double* xr = x.row(i);
          const double* yr = n.value.row(i);
          const double* gr = g.row(i);
          double* dr = da.row(i);
          const auto cols = static_cast<std::size_t>(x.cols);
          const double norm = std::sqrt(K().dot(xr, xr, cols));
          if (norm > eps) {
            const double yg = K().dot(yr, gr, cols);
            for (std::size_t j = 0; j < cols; ++j) dr[j] += (gr[j] - yr[j] * yg) / norm;
          } else {
            // Below the guard the map is linear: y = x / eps.
            for (std::size_t j = 0; j < cols; ++j) dr[j] += gr[j] / eps;
          }
        }
        break;
      }
      case Op::row_sum: {
        if (!node(n.a).requires_grad) break;
        DenseMatrix& da = ensure_grad(n.a);
        for (int i = 0; i < da.rows; ++i) {
          const double gi = g.data[static_cast<std::size_t>(i)];
          double* dr = da.row(i);
          for (int j = 0; j < da.cols; ++j) dr[j] += gi;
        }
        break;
      }
      case Op::sum:
        if (node(n.a).requires_grad) {
          DenseMatrix& da = ensure_grad(n.a);
          const double g0 = g.data[0];
          for (std::size_t i = 0; i < da.size(); ++i) da.data[i] += g0;
        }
        break;
      case Op::masked_sum:
        if (node(n.a).requires_grad)
          K().axpy(g.data[0], n.mask->data.data(), ensure_grad(n.a).data.data(),
                   n.mask->size());
        break;
      case Op::gather_rows:
        if (node(n.a).requires_grad) {
          DenseMatrix& da = ensure_grad(n.a);
          for (std::size_t t = 0; t < n.indices.size(); ++t)
            K().add(da.row(n.indices[t]), g.row(static_cast<int>(t)), da.row(n.indices[t]),
                    static_cast<std::size_t>(da.cols));
        }
        break;
      case Op::softmax_cross_entropy: {
        if (!node(n.a).requires_grad) break;
        DenseMatrix& da = ensure_grad(n.a);
        const DenseMatrix& probs = n.aux;
        const double g0 = g.data[0] / probs.rows;
        for (int i = 0; i < probs.rows; ++i)
          for (int j = 0; j < probs.cols; ++j) {
            double p = probs.at(i, j);
            if (j == n.indices[static_cast<std::size_t>(i)]) p -= 1.0;
            da.at(i, j) += g0 * p;
          }
        break;
      }
    }
  }
}

bool Tape::replay_matches() const {
  std::vector<DenseMatrix> replayed;
  replayed.reserve(nodes_.size());
  for (const Node& n : nodes_) replayed.push_back(eval(n, &replayed));
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& a = nodes_[i].value.data;
    const auto& b = replayed[i].data;
    if (a.size() != b.size() ||
        std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

double Tape::min_abs_relu_input() const {
  double m = std::numeric_limits<double>::infinity();
  for (const Node& n : nodes_)
    if (n.op == Op::relu)
      for (double v : nodes_[static_cast<std::size_t>(n.a)].value.data)
        m = std::min(m, std::fabs(v));
  return m;
}

ForwardGrad forward_and_grad(const Program& program, const std::vector<DenseMatrix>& params) {
  Tape tape;
  std::vector<int> ids;
  ids.reserve(params.size());
  for (const DenseMatrix& p : params) ids.push_back(tape.input(p));
  int out = program(tape, ids);
  tape.backward(out);
  ForwardGrad r;
  r.value = tape.scalar_value(out);
  r.grads.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (tape.has_grad(ids[i]))
      r.grads.push_back(tape.grad(ids[i]));
    else  // parameter unused by the program
      r.grads.push_back(DenseMatrix(params[i].rows, params[i].cols));
  }
  return r;
}

double program_value(const Program& program, const std::vector<DenseMatrix>& params) {
  Tape tape;
  std::vector<int> ids;
  ids.reserve(params.size());
  for (const DenseMatrix& p : params) ids.push_back(tape.input(p));
  int out = program(tape, ids);
  return tape.scalar_value(out);
}

double finite_diff_check(const Program& program, const std::vector<DenseMatrix>& params,
                         double h) {
  ForwardGrad analytic = forward_and_grad(program, params);
  std::vector<DenseMatrix> work = params;
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double orig = work[p].data[i];
      work[p].data[i] = orig + h;
      const double fp = program_value(program, work);
      work[p].data[i] = orig - h;
      const double fm = program_value(program, work);
      work[p].data[i] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double err =
          std::fabs(analytic.grads[p].data[i] - fd) / std::max(1e-8, std::fabs(fd));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace gp2f
