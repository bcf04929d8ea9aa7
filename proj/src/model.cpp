#include "sensenet/model.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace sensenet {

using json = nlohmann::ordered_json;

void ModelConfig::validate() const {
  if (vocab_size < static_cast<int>(Vocab::specials().size()))
    throw std::invalid_argument("config: vocab_size too small");
  if (embed_dim < 1) throw std::invalid_argument("config: embed_dim < 1");
  if (hidden_dim < 2 || hidden_dim % 2 != 0)
    throw std::invalid_argument("config: hidden_dim must be even and >= 2");
  if (significance_embed_dim != hidden_dim)
    throw std::invalid_argument(
        "config: significance_embed_dim must equal hidden_dim");
  if (cnn_kernels.empty())
    throw std::invalid_argument("config: cnn_kernels empty");
  for (int k : cnn_kernels)
    if (k < 1) throw std::invalid_argument("config: cnn kernel width < 1");
  if (std::set<int>(cnn_kernels.begin(), cnn_kernels.end()).size() !=
      cnn_kernels.size())
    throw std::invalid_argument("config: duplicate cnn kernel width");
  if (cnn_channels < 1) throw std::invalid_argument("config: cnn_channels < 1");
  if (selector_hidden < 1)
    throw std::invalid_argument("config: selector_hidden < 1");
  if (selector_input != "embedding" && selector_input != "hidden")
    throw std::invalid_argument("config: selector_input must be 'embedding' or 'hidden'");
  if (encoder != "gru")
    throw std::invalid_argument("config: only the gru encoder is implemented");
  if (!(gate_threshold > 0.0 && gate_threshold < 1.0))
    throw std::invalid_argument("config: gate_threshold must be in (0, 1)");
  if (max_decode_len < 1)
    throw std::invalid_argument("config: max_decode_len < 1");
}

std::string ModelConfig::to_json() const {
  json j;
  j["vocab_size"] = vocab_size;
  j["embed_dim"] = embed_dim;
  j["hidden_dim"] = hidden_dim;
  j["significance_embed_dim"] = significance_embed_dim;
  j["cnn_kernels"] = cnn_kernels;
  j["cnn_channels"] = cnn_channels;
  j["selector_hidden"] = selector_hidden;
  j["selector_input"] = selector_input;
  j["encoder"] = encoder;
  j["gate_threshold"] = gate_threshold;
  j["max_decode_len"] = max_decode_len;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.significance_embed_dim = j.at("significance_embed_dim").get<int>();
  c.cnn_kernels = j.at("cnn_kernels").get<std::vector<int>>();
  c.cnn_channels = j.at("cnn_channels").get<int>();
  c.selector_hidden = j.at("selector_hidden").get<int>();
  c.selector_input = j.at("selector_input").get<std::string>();
  c.encoder = j.at("encoder").get<std::string>();
  c.gate_threshold = j.at("gate_threshold").get<double>();
  c.max_decode_len = j.at("max_decode_len").get<int>();
  return c;
}

Model::Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const int e = cfg_.embed_dim;
  const int h = cfg_.hidden_dim;
  const int hd = h / 2;  // per direction
  const int ci = cfg_.cnn_input_dim();
  const int rdim = cfg_.sentence_repr_dim();
  const int v = cfg_.vocab_size;

  params_.reserve(64);
  add("embed", e, v);
  for (const char* dir : {"enc_fw", "enc_bw"}) {
    for (const char* gate : {"z", "r", "n"}) {
      add(std::string(dir) + "_W" + gate, hd, e);
      add(std::string(dir) + "_U" + gate, hd, hd);
      add(std::string(dir) + "_b" + gate, hd, 1);
    }
  }
  for (int k : cfg_.cnn_kernels) {
    add("cnn_W" + std::to_string(k), cfg_.cnn_channels, ci * k);
    add("cnn_b" + std::to_string(k), cfg_.cnn_channels, 1);
  }
  add("sel_W1", cfg_.selector_hidden, rdim);
  add("sel_b1", cfg_.selector_hidden, 1);
  add("sel_wm", 1, cfg_.selector_hidden);  // output head: a bare dot product
  add("sig_embed", h, 2);
  add("dec_init_W", h, h);
  add("dec_init_b", h, 1);
  for (const char* gate : {"z", "r", "n"}) {
    add(std::string("dec_W") + gate, h, e + h);
    add(std::string("dec_U") + gate, h, h);
    add(std::string("dec_b") + gate, h, 1);
  }
  add("att_Ws", h, h);
  add("att_Wh", h, h);
  add("att_v", h, 1);
  // generation scores: one affine layer over [y_emb; s_t; u_t]
  add("out_W", v, e + 2 * h);
  add("out_b", v, 1);
  add("copy_W", h, h);
}

Parameter& Model::add(const std::string& name, int rows, int cols) {
  index_[name] = params_.size();
  params_.emplace_back(name, rows, cols);
  return params_.back();
}

Parameter& Model::p(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end())
    throw std::out_of_range("no such parameter: " + name);
  return params_[it->second];
}

void Model::init_uniform(Rng& rng, double range) {
  for (auto& prm : params_) {
    for (long c = 0; c < prm.value.cols(); ++c)
      for (long r = 0; r < prm.value.rows(); ++r)
        prm.value(r, c) = rng.uniform(-range, range);
  }
}

void Model::zero_grads() {
  for (auto& prm : params_) prm.grad.setZero();
}

size_t Model::n_weights() const {
  size_t n = 0;
  for (const auto& prm : params_)
    n += static_cast<size_t>(prm.value.rows() * prm.value.cols());
  return n;
}

Expr Model::gru_cell(Tape& t, const std::string& prefix, Expr x, Expr h) {
  auto W = [&](const char* g) { return t.param(p(prefix + "_W" + g)); };
  auto U = [&](const char* g) { return t.param(p(prefix + "_U" + g)); };
  auto b = [&](const char* g) { return t.param(p(prefix + "_b" + g)); };
  Expr z = t.sigmoid_(
      t.add(t.add(t.matmul(W("z"), x), t.matmul(U("z"), h)), b("z")));
  Expr r = t.sigmoid_(
      t.add(t.add(t.matmul(W("r"), x), t.matmul(U("r"), h)), b("r")));
  Expr n = t.tanh_(t.add(
      t.add(t.matmul(W("n"), x), t.cmul(r, t.matmul(U("n"), h))), b("n")));
  // h' = (1-z) * n + z * h
  return t.add(t.cmul(t.one_minus(z), n), t.cmul(z, h));
}

Expr Model::sentence_reprs(Tape& t, Expr inputs,
                           const std::vector<Span>& spans) {
  std::vector<Expr> cols;
  cols.reserve(spans.size());
  for (const auto& sp : spans) {
    Expr chunk = t.slice_cols(inputs, sp.first, sp.second - sp.first);
    std::vector<Expr> per_kernel;
    for (int k : cfg_.cnn_kernels) {
      Expr padded = chunk;
      int len = sp.second - sp.first;
      if (len < k) {
        // symmetric zero padding up to the window size, extra column on
        // the right
        int missing = k - len;
        padded = t.pad_cols(chunk, missing / 2, missing - missing / 2);
      }
      Expr windows = t.sliding_windows(padded, k);
      Expr conv = t.colwise_add(
          t.matmul(t.param(p("cnn_W" + std::to_string(k))), windows),
          t.param(p("cnn_b" + std::to_string(k))));
      per_kernel.push_back(t.rowwise_max(t.tanh_(conv)));
    }
    Expr r = per_kernel[0];
    for (size_t i = 1; i < per_kernel.size(); ++i)
      r = t.concat_rows(r, per_kernel[i]);
    cols.push_back(r);
  }
  return t.stack_cols(cols);
}

EncoderState Model::encode(Tape& t, const std::vector<int>& source_ids,
                           const std::vector<Span>& sentence_spans,
                           const GateOverride& ov) {
  if (source_ids.empty()) throw std::invalid_argument("encode: empty source");
  if (sentence_spans.empty())
    throw std::invalid_argument("encode: no sentence spans");
  const int T = static_cast<int>(source_ids.size());
  const int S = static_cast<int>(sentence_spans.size());
  const int hd = cfg_.hidden_dim / 2;

  EncoderState enc;
  enc.n_tokens = T;
  enc.X = t.lookup(t.param(p("embed")), source_ids);

  std::vector<Expr> fw(T), bw(T);
  Expr h = t.input(Mat::Zero(hd, 1));
  for (int i = 0; i < T; ++i) {
    h = gru_cell(t, "enc_fw", t.slice_cols(enc.X, i, 1), h);
    fw[i] = h;
  }
  Expr hfw_last = h;
  h = t.input(Mat::Zero(hd, 1));
  for (int i = T - 1; i >= 0; --i) {
    h = gru_cell(t, "enc_bw", t.slice_cols(enc.X, i, 1), h);
    bw[i] = h;
  }
  Expr hbw_first = h;
  enc.H = t.concat_rows(t.stack_cols(fw), t.stack_cols(bw));

  Expr sel_in = cfg_.selector_input == "hidden" ? enc.H : enc.X;
  Expr R = sentence_reprs(t, sel_in, sentence_spans);
  Expr hid = t.tanh_(
      t.colwise_add(t.matmul(t.param(p("sel_W1")), R), t.param(p("sel_b1"))));
  Expr eta_row = t.sigmoid_(t.matmul(t.param(p("sel_wm")), hid));
  enc.eta = t.transpose(eta_row);

  enc.hard_gate.resize(S);
  for (int i = 0; i < S; ++i)
    enc.hard_gate[i] = t.value(enc.eta)(i, 0) > cfg_.gate_threshold ? 1 : 0;

  switch (ov.mode) {
    case GateMode::hard: {
      // u = eta + (z - eta) with the gap frozen: value exactly z, gradient
      // du/deta = 1 (the straight-through pass).
      Mat gap(S, 1);
      for (int i = 0; i < S; ++i)
        gap(i, 0) = static_cast<double>(enc.hard_gate[i]) - t.value(enc.eta)(i, 0);
      enc.gate = t.add(enc.eta, t.input(std::move(gap)));
      break;
    }
    case GateMode::forced: {
      if (static_cast<int>(ov.forced.size()) != S)
        throw std::invalid_argument("encode: forced gate count mismatch");
      Mat u(S, 1);
      for (int i = 0; i < S; ++i) {
        if (ov.forced[i] != 0 && ov.forced[i] != 1)
          throw std::invalid_argument("encode: forced gates must be 0/1");
        u(i, 0) = static_cast<double>(ov.forced[i]);
      }
      enc.gate = t.input(std::move(u));
      enc.hard_gate = ov.forced;
      break;
    }
    case GateMode::frozen: {
      if (static_cast<int>(ov.offsets.size()) != S)
        throw std::invalid_argument("encode: frozen offset count mismatch");
      Mat gap(S, 1);
      for (int i = 0; i < S; ++i) gap(i, 0) = ov.offsets[i];
      enc.gate = t.add(enc.eta, t.input(std::move(gap)));
      break;
    }
  }

  enc.G = t.gate_embed(enc.gate, t.param(p("sig_embed")), sentence_spans, T);
  enc.F = t.add(enc.H, enc.G);

  Expr s0_in = t.concat_rows(hfw_last, hbw_first);
  enc.s0 = t.tanh_(t.colwise_add(t.matmul(t.param(p("dec_init_W")), s0_in),
                                 t.param(p("dec_init_b"))));
  return enc;
}

DecoderStep Model::decode_step(Tape& t, const EncoderState& enc, Expr s_prev,
                               int input_vocab_id) {
  // additive attention over F conditioned on the previous state
  Expr keys = t.matmul(t.param(p("att_Wh")), enc.F);
  Expr query = t.matmul(t.param(p("att_Ws")), s_prev);
  Expr scores =
      t.matmul(t.transpose(t.param(p("att_v"))), t.tanh_(t.colwise_add(keys, query)));
  DecoderStep st;
  st.alpha = t.softmax_vec(t.transpose(scores));
  Expr context = t.matmul(enc.F, st.alpha);

  Expr y_emb = t.lookup(t.param(p("embed")), {input_vocab_id});
  Expr x = t.concat_rows(y_emb, context);
  st.s = gru_cell(t, "dec", x, s_prev);

  Expr gen_in = t.concat_rows(y_emb, t.concat_rows(st.s, context));
  Expr gen_logits =
      t.add(t.matmul(t.param(p("out_W")), gen_in), t.param(p("out_b")));
  // copy score for source position j: sigmoid(F_j' Wc) . s_t
  Expr copy_scores = t.matmul(
      t.sigmoid_(t.matmul(t.transpose(enc.F), t.param(p("copy_W")))), st.s);
  st.p_joint = t.softmax_vec(t.concat_rows(gen_logits, copy_scores));
  return st;
}

Expr Model::target_prob(Tape& t, Expr p_joint, const TokenizedExample& ex,
                        int target_ext_id) {
  std::vector<int> entries;
  if (target_ext_id < cfg_.vocab_size) entries.push_back(target_ext_id);
  for (size_t j = 0; j < ex.source_extended_ids.size(); ++j) {
    if (ex.source_extended_ids[j] == target_ext_id)
      entries.push_back(cfg_.vocab_size + static_cast<int>(j));
  }
  if (entries.empty())
    throw std::logic_error("target id unreachable by generation or copy");
  return t.sum_entries(p_joint, std::move(entries));
}

Eigen::VectorXd Model::extended_distribution(const Mat& p_joint,
                                             const TokenizedExample& ex) const {
  const int V = cfg_.vocab_size;
  const int T = static_cast<int>(ex.source_extended_ids.size());
  if (p_joint.rows() != V + T || p_joint.cols() != 1)
    throw std::invalid_argument("extended_distribution: shape mismatch");
  int ext = V + static_cast<int>(ex.oov_tokens.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(ext);
  out.head(V) = p_joint.col(0).head(V);
  for (int j = 0; j < T; ++j) {
    int id = ex.source_extended_ids[j];
    if (id < 0 || id >= ext)
      throw std::out_of_range("extended_distribution: bad source id");
    out(id) += p_joint(V + j, 0);
  }
  return out;
}

ForwardResult Model::forward_loss(Tape& t, const TokenizedExample& ex,
                                  const std::vector<int>& sentence_labels,
                                  double lambda, const GateOverride& ov) {
  if (ex.target_ids.empty())
    throw std::invalid_argument("forward_loss: empty target");
  EncoderState enc = encode(t, ex.source_ids, ex.sentence_spans, ov);

  Expr s = enc.s0;
  int prev_id = Vocab::kPad;  // decoder start input
  Expr nll_sum = t.input(Mat::Zero(1, 1));
  for (int step = 0; step < static_cast<int>(ex.target_ids.size()); ++step) {
    DecoderStep st = decode_step(t, enc, s, prev_id);
    Expr prob = target_prob(t, st.p_joint, ex, ex.target_ids[step]);
    nll_sum = t.add(nll_sum, t.neg_log(prob));
    int target = ex.target_ids[step];
    prev_id = target < cfg_.vocab_size ? target : Vocab::kUnk;
    s = st.s;
  }
  ForwardResult res;
  res.hard_gate = enc.hard_gate;
  res.mle = nll_sum;  // summed over target steps
  if (sentence_labels.empty()) {
    res.bce = t.input(Mat::Zero(1, 1));
  } else {
    if (sentence_labels.size() != ex.sentence_spans.size())
      throw std::invalid_argument("forward_loss: label count mismatch");
    res.bce = t.binary_cross_entropy(enc.eta, sentence_labels, 1e-7);
  }
  res.loss = t.add(res.mle, t.scale(res.bce, lambda));
  return res;
}

DecodeResult Model::greedy_decode(const TokenizedExample& ex,
                                  const Vocab& vocab,
                                  const MatchConfig& dedup_cfg,
                                  const GateOverride& ov) {
  if (vocab.size() != cfg_.vocab_size)
    throw std::invalid_argument("greedy_decode: vocab size mismatch");
  Tape t;
  EncoderState enc = encode(t, ex.source_ids, ex.sentence_spans, ov);

  DecodeResult res;
  res.hard_gate = enc.hard_gate;
  for (int i = 0; i < t.rows(enc.eta); ++i)
    res.eta.push_back(t.value(enc.eta)(i, 0));

  Expr s = enc.s0;
  int prev_id = Vocab::kPad;
  for (int step = 0; step < cfg_.max_decode_len; ++step) {
    DecoderStep st = decode_step(t, enc, s, prev_id);
    Eigen::VectorXd p_ext = extended_distribution(t.value(st.p_joint), ex);
    int best = 0;
    for (int i = 1; i < p_ext.size(); ++i)
      if (p_ext(i) > p_ext(best)) best = i;

    std::vector<double> alpha(static_cast<size_t>(t.rows(st.alpha)));
    for (int i = 0; i < t.rows(st.alpha); ++i)
      alpha[static_cast<size_t>(i)] = t.value(st.alpha)(i, 0);
    res.alphas.push_back(std::move(alpha));
    res.emitted_ids.push_back(best);
    res.tokens.push_back(best < cfg_.vocab_size
                             ? vocab.token(best)
                             : ex.oov_tokens[static_cast<size_t>(
                                   best - cfg_.vocab_size)]);
    if (best == Vocab::kEos) break;
    prev_id = best < cfg_.vocab_size ? best : Vocab::kUnk;
    s = st.s;
  }

  // Split the emitted stream into phrases: <sep> closes a phrase, the first
  // <peos> switches from the present block to the absent block, <eos> ends.
  std::vector<Phrase> present_raw, absent_raw;
  bool in_absent = false;
  Phrase cur;
  auto flush = [&](std::vector<Phrase>& block) {
    if (!cur.empty()) block.push_back(cur);
    cur.clear();
  };
  for (const auto& tok : res.tokens) {
    if (tok == "<eos>") break;
    if (tok == "<sep>") {
      flush(in_absent ? absent_raw : present_raw);
    } else if (tok == "<peos>") {
      flush(in_absent ? absent_raw : present_raw);
      in_absent = true;
    } else {
      cur.push_back(tok);
    }
  }
  flush(in_absent ? absent_raw : present_raw);

  // Global dedup across both blocks, first occurrence wins.
  std::set<std::string> seen;
  auto keep = [&](const Phrase& ph) {
    Phrase norm = normalize_phrase(ph, dedup_cfg);
    std::string key;
    for (size_t i = 0; i < norm.size(); ++i) {
      if (i) key += ' ';
      key += norm[i];
    }
    return seen.insert(key).second;
  };
  for (const auto& ph : present_raw)
    if (keep(ph)) res.present.push_back(ph);
  for (const auto& ph : absent_raw)
    if (keep(ph)) res.absent.push_back(ph);
  return res;
}

// ---- checkpoint io ----

namespace {

constexpr char kMagic[8] = {'S', 'N', 'C', 'K', 'P', 'T', '0', '1'};

void write_mat(std::ofstream& out, const Mat& m) {
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}

void read_mat(std::ifstream& in, Mat& m) {
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!in) throw std::runtime_error("checkpoint truncated");
}

}  // namespace

void save_checkpoint(const std::string& path, Model& model, const Vocab& vocab,
                     const std::string& meta_json, bool with_adam,
                     long adam_step) {
  if (vocab.size() != model.config().vocab_size)
    throw std::invalid_argument("save_checkpoint: vocab size mismatch");
  json header;
  header["config"] = json::parse(model.config().to_json());
  header["vocab"] = vocab.tokens();
  json manifest = json::array();
  for (const auto& prm : model.params()) {
    manifest.push_back({{"name", prm.name},
                        {"rows", prm.value.rows()},
                        {"cols", prm.value.cols()}});
  }
  header["params"] = std::move(manifest);
  header["has_adam"] = with_adam;
  header["adam_step"] = adam_step;
  header["meta"] = meta_json.empty() ? json(json::value_t::object)
                                     : json::parse(meta_json);
  std::string htext = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  uint64_t hlen = htext.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  for (const auto& prm : model.params()) write_mat(out, prm.value);
  if (with_adam) {
    for (const auto& prm : model.params()) write_mat(out, prm.adam_m);
    for (const auto& prm : model.params()) write_mat(out, prm.adam_v);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error(path + ": not a checkpoint file");
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!in || hlen > (1ull << 31))
    throw std::runtime_error(path + ": corrupt checkpoint header");
  std::string htext(hlen, '\0');
  in.read(htext.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw std::runtime_error(path + ": corrupt checkpoint header");
  json header = json::parse(htext);

  Checkpoint ck;
  ck.config = ModelConfig::from_json(header.at("config").dump());
  ck.vocab = Vocab::from_tokens(
      header.at("vocab").get<std::vector<std::string>>());
  if (ck.vocab.size() != ck.config.vocab_size)
    throw std::runtime_error(path + ": vocab does not match config");
  ck.meta_json = header.at("meta").dump();
  ck.has_adam = header.at("has_adam").get<bool>();
  ck.adam_step = header.at("adam_step").get<long>();

  ck.model = std::make_unique<Model>(ck.config);
  const auto& manifest = header.at("params");
  auto& prms = ck.model->params();
  if (manifest.size() != prms.size())
    throw std::runtime_error(path + ": parameter manifest mismatch");
  for (size_t i = 0; i < prms.size(); ++i) {
    const auto& m = manifest.at(i);
    if (m.at("name").get<std::string>() != prms[i].name ||
        m.at("rows").get<long>() != prms[i].value.rows() ||
        m.at("cols").get<long>() != prms[i].value.cols())
      throw std::runtime_error(path + ": parameter manifest mismatch at " +
                               prms[i].name);
  }
  for (auto& prm : prms) read_mat(in, prm.value);
  if (ck.has_adam) {
    for (auto& prm : prms) read_mat(in, prm.adam_m);
    for (auto& prm : prms) read_mat(in, prm.adam_v);
  }
  return ck;
}

}  // namespace sensenet
