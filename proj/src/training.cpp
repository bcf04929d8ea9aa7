#include "sensenet/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "sensenet/labeling.hpp"
#include "sensenet/rng.hpp"

namespace sensenet {

using json = nlohmann::ordered_json;

void TrainConfig::validate() const {
  if (!(lambda >= 0)) throw std::invalid_argument("train: lambda must be >= 0");
  if (!(lr > 0)) throw std::invalid_argument("train: lr must be > 0");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size < 1");
  if (epochs < 1) throw std::invalid_argument("train: epochs < 1");
  if (patience < 0) throw std::invalid_argument("train: patience < 0");
  if (!(init_range > 0)) throw std::invalid_argument("train: init_range <= 0");
}

std::string TrainConfig::to_json() const {
  json j;
  j["lambda"] = lambda;
  j["lr"] = lr;
  j["adam_beta1"] = adam_beta1;
  j["adam_beta2"] = adam_beta2;
  j["adam_eps"] = adam_eps;
  j["clip_norm"] = clip_norm;
  j["init_range"] = init_range;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["seed"] = seed;
  j["patience"] = patience;
  j["resume"] = resume;
  return j.dump();
}

double bce_value(const std::vector<double>& eta, const std::vector<int>& labels,
                 double eps) {
  if (eta.size() != labels.size() || eta.empty())
    throw std::invalid_argument("bce_value: shape mismatch");
  double loss = 0;
  for (size_t i = 0; i < eta.size(); ++i) {
    loss -= labels[i] ? std::log(std::max(eta[i], eps))
                      : std::log(std::max(1.0 - eta[i], eps));
  }
  return loss;
}

double total_loss_value(double mle, double bce, double lambda) {
  return mle + lambda * bce;
}

double clip_global_norm(std::vector<Parameter>& params, double max_norm) {
  double sq = 0;
  for (const auto& p : params) sq += p.grad.squaredNorm();
  double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    double s = max_norm / norm;
    for (auto& p : params) p.grad *= s;
  }
  return norm;
}

void Adam::step(std::vector<Parameter>& params) {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& p : params) {
    p.adam_m = beta1_ * p.adam_m + (1.0 - beta1_) * p.grad;
    p.adam_v = beta2_ * p.adam_v.array() +
               (1.0 - beta2_) * p.grad.array().square();
    Eigen::ArrayXXd mhat = p.adam_m.array() / bc1;
    Eigen::ArrayXXd vhat = p.adam_v.array() / bc2;
    p.value.array() -= lr_ * mhat / (vhat.sqrt() + eps_);
  }
}

EvalReport evaluate_model(Model& model, const Vocab& vocab,
                          const std::vector<LabeledExample>& data,
                          const MatchConfig& match, const GateOverride& ov) {
  std::vector<std::vector<Phrase>> preds;
  preds.reserve(data.size());
  for (const auto& le : data) {
    TokenizedExample ex = encode_example(le.document, vocab);
    DecodeResult dec = model.greedy_decode(ex, vocab, match, ov);
    std::vector<Phrase> combined = dec.present;
    combined.insert(combined.end(), dec.absent.begin(), dec.absent.end());
    preds.push_back(std::move(combined));
  }
  return evaluate_corpus(data, preds, match);
}

namespace {

struct EpochStats {
  double mle = 0, bce = 0, loss = 0;
  long examples = 0;
  long batches = 0;
  double grad_norm_sum = 0;
  long gates_on = 0, gates_total = 0, gates_correct = 0;
};

json epoch_line(int epoch, const EpochStats& st) {
  json j;
  j["epoch"] = epoch;
  j["split"] = "train_epoch";
  j["loss"] = st.loss / static_cast<double>(st.examples);
  j["mle"] = st.mle / static_cast<double>(st.examples);
  j["bce"] = st.bce / static_cast<double>(st.examples);
  j["gate_rate"] =
      static_cast<double>(st.gates_on) / static_cast<double>(st.gates_total);
  j["gate_accuracy"] = static_cast<double>(st.gates_correct) /
                       static_cast<double>(st.gates_total);
  j["grad_norm"] = st.grad_norm_sum / static_cast<double>(st.batches);
  j["examples"] = st.examples;
  j["batches"] = st.batches;
  return j;
}

void dump_nan_diagnostics(const std::string& out_dir, int epoch, size_t batch,
                          const std::vector<size_t>& batch_indices,
                          size_t example_index, Model& model) {
  json j;
  j["epoch"] = epoch;
  j["batch"] = batch;
  j["batch_examples"] = batch_indices;
  j["failing_example"] = example_index;
  json norms;
  for (const auto& p : model.params()) {
    norms[p.name] = {{"value_norm", p.value.norm()},
                     {"grad_norm", p.grad.norm()}};
  }
  j["parameters"] = std::move(norms);
  std::ofstream out(out_dir + "/nan_dump.json", std::ios::binary);
  out << j.dump(2) << "\n";
}

}  // namespace

TrainResult train(Model& model, const Vocab& vocab,
                  const std::vector<LabeledExample>& train_set,
                  const std::vector<LabeledExample>& val_set,
                  const TrainConfig& cfg, const std::string& out_dir,
                  const std::string& run_config_json) {
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty train set");
  std::filesystem::create_directories(out_dir);

  std::vector<TokenizedExample> examples;
  examples.reserve(train_set.size());
  for (const auto& le : train_set) {
    examples.push_back(encode_example(
        le.document, vocab, format_target(le.document, le.categories)));
  }

  // Length-sorted batches; the batch order is reshuffled every epoch.
  std::vector<size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return examples[a].source_ids.size() < examples[b].source_ids.size();
  });
  std::vector<std::vector<size_t>> batches;
  for (size_t at = 0; at < order.size(); at += cfg.batch_size) {
    size_t end = std::min(order.size(), at + cfg.batch_size);
    batches.emplace_back(order.begin() + at, order.begin() + end);
  }

  Rng rng(cfg.seed);
  Adam adam(cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  TrainResult result;
  int start_epoch = 1;
  int since_improve = 0;
  const std::string log_path = out_dir + "/train_log.jsonl";
  const std::string best_path = out_dir + "/best.ckpt";
  const std::string last_path = out_dir + "/last.ckpt";

  if (cfg.resume) {
    Checkpoint ck = load_checkpoint(last_path);
    if (ck.config.to_json() != model.config().to_json())
      throw std::runtime_error("resume: checkpoint config differs");
    auto& dst = model.params();
    auto& src = ck.model->params();
    for (size_t i = 0; i < dst.size(); ++i) {
      dst[i].value = src[i].value;
      dst[i].adam_m = src[i].adam_m;
      dst[i].adam_v = src[i].adam_v;
    }
    adam.set_steps(ck.adam_step);
    json meta = json::parse(ck.meta_json);
    start_epoch = meta.at("epoch").get<int>() + 1;
    result.best_epoch = meta.at("best_epoch").get<int>();
    result.best_val_f1 = meta.at("best_val_f1").get<double>();
    since_improve = meta.at("epochs_since_improve").get<int>();
    rng.set_state(meta.at("rng_state").get<std::string>());
  } else {
    Rng init_rng(cfg.seed);
    model.init_uniform(init_rng, cfg.init_range);
  }

  std::ofstream log(log_path,
                    cfg.resume ? std::ios::binary | std::ios::app
                               : std::ios::binary);
  if (!log) throw std::runtime_error("cannot write " + log_path);
  if (!cfg.resume) {
    json header;
    header["_run_config"] = run_config_json.empty()
                                ? json(json::value_t::object)
                                : json::parse(run_config_json);
    header["train_config"] = json::parse(cfg.to_json());
    header["mle_reduction"] = "sum_over_target_tokens";
    header["bce_reduction"] = "sum_over_sentences";
    header["batch_loss"] = "mean_over_examples";
    log << header.dump() << "\n";
  }

  MatchConfig match;
  for (int epoch = start_epoch; epoch <= cfg.epochs; ++epoch) {
    // Shuffle a fresh copy of the sorted base arrangement: the epoch's
    // batch order is then a function of the rng state alone, which is what
    // lets a resumed run replay the schedule of an uninterrupted one.
    std::vector<std::vector<size_t>> epoch_batches = batches;
    rng.shuffle(epoch_batches);
    EpochStats st;
    for (size_t b = 0; b < epoch_batches.size(); ++b) {
      const auto& batch = epoch_batches[b];
      model.zero_grads();
      double inv = 1.0 / static_cast<double>(batch.size());
      double batch_loss = 0, batch_mle = 0, batch_bce = 0;
      for (size_t idx : batch) {
        Tape t;
        ForwardResult res = model.forward_loss(
            t, examples[idx], train_set[idx].sentence_labels, cfg.lambda);
        double loss_v = t.value(res.loss)(0, 0);
        if (!std::isfinite(loss_v)) {
          dump_nan_diagnostics(out_dir, epoch, b, batch, idx, model);
          throw std::runtime_error(
              "training diverged (non-finite loss); diagnostics in " +
              out_dir + "/nan_dump.json");
        }
        t.backward(t.scale(res.loss, inv));
        batch_mle += t.value(res.mle)(0, 0);
        batch_bce += t.value(res.bce)(0, 0);
        batch_loss += loss_v;
        ++st.examples;
        const auto& labels = train_set[idx].sentence_labels;
        for (size_t i = 0; i < res.hard_gate.size(); ++i) {
          st.gates_on += res.hard_gate[i];
          ++st.gates_total;
          if (i < labels.size() && res.hard_gate[i] == labels[i])
            ++st.gates_correct;
        }
      }
      double grad_norm = clip_global_norm(model.params(), cfg.clip_norm);
      adam.step(model.params());
      st.loss += batch_loss;
      st.mle += batch_mle;
      st.bce += batch_bce;
      st.grad_norm_sum += grad_norm;
      ++st.batches;
      json sj;
      sj["epoch"] = epoch;
      sj["step"] =
          static_cast<long>(epoch - 1) * static_cast<long>(batches.size()) +
          static_cast<long>(b) + 1;
      sj["split"] = "train";
      sj["loss"] = batch_loss * inv;
      sj["mle"] = batch_mle * inv;
      sj["bce"] = batch_bce * inv;
      sj["batch_examples"] = batch.size();
      sj["grad_norm"] = grad_norm;
      log << sj.dump() << "\n";
    }
    log << epoch_line(epoch, st).dump() << "\n";
    result.epochs_run = epoch;

    bool is_best = false;
    if (!val_set.empty()) {
      EvalReport rep = evaluate_model(model, vocab, val_set, match);
      double f1 = rep.present.at_m.f1;
      is_best = f1 > result.best_val_f1;
      if (is_best) {
        result.best_val_f1 = f1;
        result.best_epoch = epoch;
        since_improve = 0;
      } else {
        ++since_improve;
      }
      json vj;
      vj["epoch"] = epoch;
      vj["split"] = "val";
      vj["present_f1_5"] = rep.present.at_5.f1;
      vj["present_f1_m"] = rep.present.at_m.f1;
      vj["absent_f1_5"] = rep.absent.at_5.f1;
      vj["absent_f1_m"] = rep.absent.at_m.f1;
      vj["best"] = is_best;
      log << vj.dump() << "\n";
      if (is_best) {
        json meta;
        meta["epoch"] = epoch;
        meta["val_present_f1_m"] = f1;
        save_checkpoint(best_path, model, vocab, meta.dump());
      }
    }

    json meta;
    meta["epoch"] = epoch;
    meta["best_epoch"] = result.best_epoch;
    meta["best_val_f1"] = result.best_val_f1;
    meta["epochs_since_improve"] = since_improve;
    meta["rng_state"] = rng.state();
    meta["train_examples"] = static_cast<long>(train_set.size());
    save_checkpoint(last_path, model, vocab, meta.dump(), true, adam.steps());

    if (cfg.patience > 0 && !val_set.empty() && since_improve >= cfg.patience)
      break;
  }

  if (val_set.empty()) {
    // No selection signal: the best checkpoint is the final state.
    json meta;
    meta["epoch"] = result.epochs_run;
    meta["val_present_f1_m"] = nullptr;
    save_checkpoint(best_path, model, vocab, meta.dump());
  }
  log.flush();
  if (!log) throw std::runtime_error("write failed: " + log_path);
  return result;
}

}  // namespace sensenet
