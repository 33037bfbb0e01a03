#pragma once

#include <vector>

#include "gp2f/matrix.hpp"

namespace gp2f {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// Adam with bias correction and decoupled weight decay. One instance serves
// one parameter group; first- and second-moment buffers mirror the parameter
// shapes and are allocated on the first step.
class AdamState {
 public:
  explicit AdamState(AdamHyper hyper) : hyper_(hyper) {}

  // Applies p ← p − lr·wd·p, then the bias-corrected Adam increment.
  // `params` and `grads` must line up one-to-one, in a stable order.
  void step(const std::vector<DenseMatrix*>& params,
            const std::vector<const DenseMatrix*>& grads);

  const AdamHyper& hyper() const { return hyper_; }
  long step_count() const { return t_; }

 private:
  AdamHyper hyper_;
  long t_ = 0;
  std::vector<DenseMatrix> m_;
  std::vector<DenseMatrix> v_;
};

}  // namespace gp2f
