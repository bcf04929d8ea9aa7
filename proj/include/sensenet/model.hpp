#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sensenet/corpus.hpp"
#include "sensenet/metrics.hpp"
#include "sensenet/rng.hpp"
#include "sensenet/tape.hpp"
#include "sensenet/vocab.hpp"

namespace sensenet {

struct ModelConfig {
  int vocab_size = 0;
  int embed_dim = 300;
  int hidden_dim = 300;  // total encoder state (both directions) and decoder state; even
  int significance_embed_dim = 300;  // must equal hidden_dim (F = H + G)
  std::vector<int> cnn_kernels = {1, 3, 5};
  int cnn_channels = 100;
  int selector_hidden = 100;
  std::string selector_input = "embedding";  // or "hidden"
  std::string encoder = "gru";               // seam; only "gru" is implemented
  double gate_threshold = 0.5;
  int max_decode_len = 60;

  int sentence_repr_dim() const {
    return cnn_channels * static_cast<int>(cnn_kernels.size());
  }
  int cnn_input_dim() const {
    return selector_input == "hidden" ? hidden_dim : embed_dim;
  }
  void validate() const;  // throws std::invalid_argument
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

// How the sentence gates feed the significance embedding.
//  hard:   value 1[eta > threshold], gradient passed straight through to eta
//  forced: externally fixed 0/1 per sentence, no gradient to eta
//  frozen: eta plus a caller-supplied constant offset per sentence (the
//          straight-through path with the hard/soft gap frozen at a base
//          point; used to finite-difference the training loss)
enum class GateMode { hard, forced, frozen };

struct GateOverride {
  GateMode mode = GateMode::hard;
  std::vector<int> forced;
  std::vector<double> offsets;
};

struct EncoderState {
  Expr X;                      // embeddings, input_dim x T
  Expr H;                      // encoder states, hidden x T
  Expr G;                      // significance embeddings, hidden x T
  Expr F;                      // H + G
  Expr eta;                    // S x 1 selector probabilities
  Expr gate;                   // S x 1 gate values actually applied
  Expr s0;                     // hidden x 1 initial decoder state
  std::vector<int> hard_gate;  // binary gate in effect: 1[eta > threshold],
                               // or the forced pattern under GateMode::forced
  int n_tokens = 0;
};

struct DecoderStep {
  Expr s;        // hidden x 1
  Expr alpha;    // T x 1
  Expr p_joint;  // (vocab + T) x 1, sums to 1
};

struct ForwardResult {
  Expr loss;  // mle + lambda * bce
  Expr mle;   // negative log-likelihood summed over target steps
  Expr bce;   // summed over sentences; zero constant when no labels given
  std::vector<int> hard_gate;
};

struct DecodeResult {
  std::vector<std::string> tokens;   // raw emitted surface, markers included
  std::vector<Phrase> present;       // before the first <peos>
  std::vector<Phrase> absent;        // after it
  std::vector<int> emitted_ids;      // extended-vocab ids
  std::vector<int> hard_gate;
  std::vector<double> eta;
  std::vector<std::vector<double>> alphas;  // per emitted step, length T each
};

class Model {
 public:
  explicit Model(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }
  Parameter& p(const std::string& name);

  void init_uniform(Rng& rng, double range);
  void zero_grads();
  size_t n_weights() const;

  EncoderState encode(Tape& t, const std::vector<int>& source_ids,
                      const std::vector<Span>& sentence_spans,
                      const GateOverride& ov = {});

  // input_vocab_id is the generator-side id of the previous output
  // (out-of-vocabulary emissions feed <unk>).
  DecoderStep decode_step(Tape& t, const EncoderState& enc, Expr s_prev,
                          int input_vocab_id);

  // Probability mass of one extended-vocab id: the generator entry (when in
  // vocabulary) plus every copy position holding that id.
  Expr target_prob(Tape& t, Expr p_joint, const TokenizedExample& ex,
                   int target_ext_id);

  // Collapses a joint distribution onto the extended vocabulary.
  Eigen::VectorXd extended_distribution(const Mat& p_joint,
                                        const TokenizedExample& ex) const;

  ForwardResult forward_loss(Tape& t, const TokenizedExample& ex,
                             const std::vector<int>& sentence_labels,
                             double lambda, const GateOverride& ov = {});

  DecodeResult greedy_decode(const TokenizedExample& ex, const Vocab& vocab,
                             const MatchConfig& dedup_cfg,
                             const GateOverride& ov = {});

 private:
  Parameter& add(const std::string& name, int rows, int cols);
  Expr gru_cell(Tape& t, const std::string& prefix, Expr x, Expr h);
  Expr sentence_reprs(Tape& t, Expr inputs, const std::vector<Span>& spans);

  ModelConfig cfg_;
  std::vector<Parameter> params_;
  std::map<std::string, size_t> index_;
};

struct Checkpoint {
  ModelConfig config;
  Vocab vocab;
  std::unique_ptr<Model> model;
  std::string meta_json;  // free-form, written by the trainer
  bool has_adam = false;
  long adam_step = 0;
};

void save_checkpoint(const std::string& path, Model& model, const Vocab& vocab,
                     const std::string& meta_json, bool with_adam = false,
                     long adam_step = 0);
// Reconstructs the model (and optimizer state when present).
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sensenet
