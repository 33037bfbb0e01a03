#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gp2f/matrix.hpp"

namespace gp2f {

// Primitive op set of the reverse-mode engine. Every loss in this project is
// a composition of these; the engine differentiates exactly this set and
// nothing else.
enum class Op {
  input,
  constant,
  matmul,      // A · B
  matmul_nt,   // A · Bᵀ (transpose-product)
  add,
  sub,
  add_rowvec,  // (n×m) + broadcast (1×m)
  scale,       // constant scalar multiple
  mul_scalar,  // node-valued 1×1 scalar multiple
  affine_mix,  // s·X + (1−s)·Y with node-valued 1×1 s
  mul_mask,    // elementwise product with a constant mask
  relu,
  sigmoid,
  logsigmoid,
  exp,
  log,
  row_l2_normalize,
  row_sum,     // (n×m) → (n×1)
  sum,         // → (1×1)
  masked_sum,  // Σ X⊙M → (1×1)
  gather_rows,
  softmax_cross_entropy,  // mean over rows → (1×1)
};

const char* op_name(Op op);

// Eager tape: each builder call evaluates the op immediately and records a
// node with a value snapshot. backward() walks the record once in reverse.
// Node ids are indices into the record; inputs always precede consumers.
class Tape {
 public:
  struct Node {
    Op op;
    int a = -1, b = -1, c = -1;
    double scalar = 0.0;
    DenseMatrix value;
    DenseMatrix grad;
    DenseMatrix aux;  // op-specific cache (softmax probabilities)
    std::shared_ptr<const DenseMatrix> mask;
    std::vector<int> indices;  // gather rows / class labels
    bool requires_grad = false;
  };

  int input(DenseMatrix value);
  int constant(DenseMatrix value);

  int matmul(int a, int b);
  int matmul_nt(int a, int b);
  int add(int a, int b);
  int sub(int a, int b);
  int add_rowvec(int a, int v);
  int scale(int a, double s);
  int mul_scalar(int a, int s);
  int affine_mix(int x, int y, int s);
  int mul_mask(int a, DenseMatrix mask);
  int relu(int a);
  int sigmoid(int a);
  int logsigmoid(int a);
  int exp(int a);
  int log(int a);
  int row_l2_normalize(int a);
  int row_sum(int a);
  int sum(int a);
  int masked_sum(int a, DenseMatrix mask);
  int gather_rows(int a, std::vector<int> rows);
  int softmax_cross_entropy(int logits, std::vector<int> labels);

  const DenseMatrix& value(int id) const { return node(id).value; }
  const DenseMatrix& grad(int id) const;
  bool has_grad(int id) const { return node(id).grad.size() != 0; }
  bool requires_grad(int id) const { return node(id).requires_grad; }
  double scalar_value(int id) const;  // value of a 1×1 node
  std::size_t num_nodes() const { return nodes_.size(); }

  // Reverse pass from a scalar (1×1) output. Each node is visited exactly
  // once, in reverse record order.
  void backward(int output);

  // Recomputes every node from the recorded inputs and compares bit-for-bit.
  bool replay_matches() const;

  // Smallest |preactivation| over all relu nodes (infinity when there are
  // none). Finite-difference checks use this to keep clear of the kink.
  double min_abs_relu_input() const;

 private:
  const Node& node(int id) const;
  Node& node(int id);
  int push(Node n, const char* what);
  DenseMatrix eval(const Node& n, const std::vector<DenseMatrix>* replay) const;

  std::vector<Node> nodes_;
};

// A differentiable program: builds a composition on the tape from parameter
// node ids and returns the id of its scalar output.
using Program = std::function<int(Tape&, const std::vector<int>&)>;

struct ForwardGrad {
  double value = 0.0;
  std::vector<DenseMatrix> grads;  // one per parameter, same shapes
};

// Runs `program` with `params` registered as gradient-carrying inputs and
// returns the scalar output plus exact reverse-mode gradients.
ForwardGrad forward_and_grad(const Program& program, const std::vector<DenseMatrix>& params);

// Forward evaluation only.
double program_value(const Program& program, const std::vector<DenseMatrix>& params);

// Max over all parameter entries of the relative error between the
// reverse-mode gradient and a central finite difference with step h:
// |analytic − fd| / max(1e-8, |fd|).
double finite_diff_check(const Program& program, const std::vector<DenseMatrix>& params,
                         double h = 1e-5);

}  // namespace gp2f
