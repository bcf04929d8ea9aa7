#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sensenet/model.hpp"

namespace sensenet {

struct TrainConfig {
  double lambda = 0.08;  // weight of the sentence-selection loss
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 5.0;  // global gradient norm ceiling; <= 0 disables
  double init_range = 0.1;
  int batch_size = 8;
  int epochs = 10;
  uint64_t seed = 1;
  int patience = 0;  // stop after this many epochs without a new best; 0 = off
  bool resume = false;

  void validate() const;  // throws std::invalid_argument
  std::string to_json() const;
};

// Value-level twin of the tape's binary cross-entropy op (summed over
// sentences, probabilities clamped away from 0 and 1 by eps).
double bce_value(const std::vector<double>& eta, const std::vector<int>& labels,
                 double eps = 1e-7);
double total_loss_value(double mle, double bce, double lambda);

// Scales all gradients so their global l2 norm is at most max_norm.
// Returns the pre-clip norm.
double clip_global_norm(std::vector<Parameter>& params, double max_norm);

class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  long steps() const { return t_; }
  void set_steps(long t) { t_ = t; }
  void step(std::vector<Parameter>& params);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

// Greedy-decodes every document and scores the predictions against the
// labeled gold, with present and absent blocks merged before routing.
EvalReport evaluate_model(Model& model, const Vocab& vocab,
                          const std::vector<LabeledExample>& data,
                          const MatchConfig& match,
                          const GateOverride& ov = {});

struct TrainResult {
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val_f1 = -1;  // present F1 over all predictions; -1 without val
};

// Writes train_log.jsonl, best.ckpt and last.ckpt under out_dir. Model
// selection uses present-keyphrase F1 over all predictions on the
// validation set; without one, best.ckpt mirrors the final weights.
// With cfg.resume, picks up epoch counter, optimizer moments and batch
// shuffling state from out_dir/last.ckpt and appends to the log.
TrainResult train(Model& model, const Vocab& vocab,
                  const std::vector<LabeledExample>& train_set,
                  const std::vector<LabeledExample>& val_set,
                  const TrainConfig& cfg, const std::string& out_dir,
                  const std::string& run_config_json);

}  // namespace sensenet
