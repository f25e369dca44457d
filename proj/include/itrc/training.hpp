#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "itrc/corpus.hpp"
#include "itrc/model.hpp"

namespace itrc {

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LossReport {
  double nll_tri = 0.0;
  double nll_model = 0.0;
  double total = 0.0;
};

// Joint NLL of the gold span under the triage head (layer-T features) and
// the model head (layer-L features). Both heads see the full unpruned
// golden paragraph; early-exit and pruning are off.
LossReport joint_loss(const Parameters& params, const ModelConfig& config,
                      const QASample& sample);

// Analytic gradient of joint_loss w.r.t. every parameter, accumulated into
// grad_out (zero it first for a plain gradient). Returns the loss of the
// same forward pass.
LossReport grad(const Parameters& params, const ModelConfig& config,
                const QASample& sample, Parameters& grad_out);

// Plain per-sample gradient descent in a seeded shuffle order. Throws
// TrainingError naming the sample when the loss goes non-finite.
Parameters train(Parameters params, const ModelConfig& config,
                 const std::vector<QASample>& corpus, std::size_t epochs,
                 double step_size, std::vector<LossReport>* epoch_trace = nullptr);

}  // namespace itrc
