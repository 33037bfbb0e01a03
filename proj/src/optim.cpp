#include "gp2f/optim.hpp"

#include <cmath>

#include "gp2f/error.hpp"

namespace gp2f {

void AdamState::step(const std::vector<DenseMatrix*>& params,
                     const std::vector<const DenseMatrix*>& grads) {
  if (params.size() != grads.size())
    throw ContractError("AdamState::step: params/grads size mismatch");
  if (m_.empty()) {
    for (const DenseMatrix* p : params) {
      m_.emplace_back(p->rows, p->cols);
      v_.emplace_back(p->rows, p->cols);
    }
  }
  if (m_.size() != params.size())
    throw ContractError("AdamState::step: parameter count changed between steps");

  ++t_;
  const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(t_));

  for (std::size_t k = 0; k < params.size(); ++k) {
    DenseMatrix& p = *params[k];
    const DenseMatrix& g = *grads[k];
    if (!p.same_shape(g) || !p.same_shape(m_[k]))
      throw DimensionError("AdamState::step: shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      // Decoupled weight decay, applied before the Adam increment.
      p.data[i] -= hyper_.lr * hyper_.weight_decay * p.data[i];
      double& m = m_[k].data[i];
      double& v = v_[k].data[i];
      m = hyper_.beta1 * m + (1.0 - hyper_.beta1) * g.data[i];
      v = hyper_.beta2 * v + (1.0 - hyper_.beta2) * g.data[i] * g.data[i];
      const double mhat = m / bc1;
      const double vhat = v / bc2;
      p.data[i] -= hyper_.lr * mhat / (std::sqrt(vhat) + hyper_.eps);
    }
  }
}

}  // namespace gp2f
