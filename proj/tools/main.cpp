// Command-line front end: preprocess -> label -> stats -> train ->
// predict -> eval -> analyze -> dump-attention. Option precedence is
// flags > config file > built-in defaults (config files are TOML, one
// key per flag). Every output embeds the exact configuration that
// produced it under "_run_config".

#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sensenet/corpus.hpp"
#include "sensenet/labeling.hpp"
#include "sensenet/metrics.hpp"
#include "sensenet/model.hpp"
#include "sensenet/training.hpp"
#include "sensenet/vocab.hpp"

using json = nlohmann::ordered_json;
using namespace sensenet;

namespace {

constexpr const char* kConfigHelp =
    "TOML file supplying defaults for any flag of this subcommand";

json match_to_json(const MatchConfig& m) {
  return json{{"stemmer", m.stemmer}, {"lowercase", m.lowercase}};
}

void add_match_flags(CLI::App* cmd, MatchConfig& match) {
  cmd->add_option("--stemmer", match.stemmer,
                  "phrase-matching stemmer: porter or none")
      ->check(CLI::IsMember({"porter", "none"}))
      ->capture_default_str();
  cmd->add_flag("--lowercase,!--no-lowercase", match.lowercase,
                "lowercase phrases before matching")
      ->capture_default_str();
}

// Reads predictions written by `predict` (or hand-built files with the
// same shape): one JSON object per line holding "present" and/or
// "absent" phrase lists, or a single combined "predictions" list.
std::vector<std::vector<Phrase>> read_predictions(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open input file: " + path);
  std::vector<std::vector<Phrase>> out;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": invalid JSON: " + e.what());
    }
    if (j.is_object() && j.contains("_run_config")) continue;
    std::vector<Phrase> preds;
    try {
      if (j.contains("predictions")) {
        preds = j.at("predictions").get<std::vector<Phrase>>();
      } else {
        if (j.contains("present"))
          preds = j.at("present").get<std::vector<Phrase>>();
        if (j.contains("absent"))
          for (auto& p : j.at("absent").get<std::vector<Phrase>>())
            preds.push_back(std::move(p));
      }
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": bad prediction record: " + e.what());
    }
    out.push_back(std::move(preds));
  }
  return out;
}

json decode_run_to_json(const DecodeResult& dec, bool with_alphas) {
  json j;
  j["present"] = dec.present;
  j["absent"] = dec.absent;
  j["eta"] = dec.eta;
  j["z"] = dec.hard_gate;
  j["emitted"] = dec.tokens;
  if (with_alphas) {
    json steps = json::array();
    for (size_t t = 0; t < dec.tokens.size(); ++t) {
      json st;
      st["token"] = dec.tokens[t];
      st["alpha"] = dec.alphas[t];
      steps.push_back(std::move(st));
    }
    j["steps"] = std::move(steps);
  }
  return j;
}

// ---- subcommand bodies --------------------------------------------------

struct PreprocessArgs {
  std::string input, output, vocab_out;
  int vocab_size = 50000;
  int max_source_len = 400;
};

int run_preprocess(const PreprocessArgs& a) {
  json rc{{"command", "preprocess"},
          {"input", a.input},
          {"output", a.output},
          {"vocab_size", a.vocab_size},
          {"vocab_out", a.vocab_out},
          {"max_source_len", a.max_source_len}};
  auto records = read_raw_records(a.input);
  std::vector<Document> docs;
  docs.reserve(records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    try {
      docs.push_back(build_document(records[i], a.max_source_len));
    } catch (const std::exception& e) {
      throw std::runtime_error(a.input + ": record " + std::to_string(i + 1) +
                               ": " + e.what());
    }
  }
  write_documents(a.output, docs, rc.dump());
  if (!a.vocab_out.empty()) {
    Vocab vocab = build_vocab(records, a.vocab_size);
    vocab.save(a.vocab_out);
    std::cout << "wrote " << docs.size() << " documents to " << a.output
              << " and a " << vocab.size() << "-token vocabulary to "
              << a.vocab_out << "\n";
  } else {
    std::cout << "wrote " << docs.size() << " documents to " << a.output
              << "\n";
  }
  return 0;
}

struct LabelArgs {
  std::string input, output;
};

int run_label(const LabelArgs& a) {
  json rc{{"command", "label"}, {"input", a.input}, {"output", a.output}};
  auto docs = read_documents(a.input);
  std::vector<LabeledExample> labeled;
  labeled.reserve(docs.size());
  for (const auto& doc : docs) labeled.push_back(label_example(doc));
  write_labeled(a.output, labeled, rc.dump());
  std::cout << "labeled " << labeled.size() << " documents into " << a.output
            << "\n";
  return 0;
}

struct StatsArgs {
  std::string input, report;
};

int run_stats(const StatsArgs& a) {
  json rc{{"command", "stats"}, {"input", a.input}, {"report", a.report}};
  auto labeled = read_labeled(a.input);
  CorpusStats st = corpus_stats(labeled);
  json j;
  j["schema_version"] = 1;
  j["_run_config"] = rc;
  j["documents"] = st.documents;
  j["keyphrases"] = st.keyphrases;
  j["mean_sentences"] = st.mean_sentences;
  j["mean_significant"] = st.mean_significant;
  j["significant_fraction"] = st.significant_fraction;
  j["semi_present_share_of_absent"] = st.semi_present_share_of_absent;
  j["present"] = st.present;
  j["semi_present"] = st.semi_present;
  j["absent_other"] = st.absent_other;
  std::ofstream out(a.report, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write output file: " + a.report);
  out << j.dump(2) << "\n";
  std::cout << j.dump(2) << "\n";
  return 0;
}

struct TrainArgs {
  std::string data, val, vocab, out;
  ModelConfig model;
  TrainConfig train;
};

int run_train(TrainArgs& a) {
  Vocab vocab = Vocab::load(a.vocab);
  a.model.vocab_size = vocab.size();
  a.model.validate();
  a.train.validate();
  json rc{{"command", "train"},
          {"data", a.data},
          {"val", a.val},
          {"vocab", a.vocab},
          {"out", a.out},
          {"model", json::parse(a.model.to_json())},
          {"train", json::parse(a.train.to_json())}};
  auto train_set = read_labeled(a.data);
  std::vector<LabeledExample> val_set;
  if (!a.val.empty()) val_set = read_labeled(a.val);

  Model model(a.model);
  TrainResult res =
      train(model, vocab, train_set, val_set, a.train, a.out, rc.dump());
  std::cout << "trained " << res.epochs_run << " epochs";
  if (!val_set.empty())
    std::cout << "; best epoch " << res.best_epoch << " (validation F1 "
              << res.best_val_f1 << ")";
  std::cout << "; checkpoints in " << a.out << "\n";
  return 0;
}

struct PredictArgs {
  std::string checkpoint, input, output;
};

int run_predict(const PredictArgs& a) {
  json rc{{"command", "predict"},
          {"checkpoint", a.checkpoint},
          {"input", a.input},
          {"output", a.output}};
  Checkpoint ck = load_checkpoint(a.checkpoint);
  rc["model"] = json::parse(ck.config.to_json());
  auto docs = read_documents(a.input);
  std::ofstream out(a.output, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write output file: " + a.output);
  out << json{{"_run_config", rc}}.dump() << "\n";
  MatchConfig dedup;
  for (const auto& doc : docs) {
    TokenizedExample ex = encode_example(doc, ck.vocab);
    DecodeResult dec = ck.model->greedy_decode(ex, ck.vocab, dedup);
    out << decode_run_to_json(dec, false).dump() << "\n";
  }
  std::cout << "predicted " << docs.size() << " documents into " << a.output
            << "\n";
  return 0;
}

struct EvalArgs {
  std::string pred, gold, report;
  MatchConfig match;
};

int run_eval(const EvalArgs& a) {
  json rc{{"command", "eval"},
          {"pred", a.pred},
          {"gold", a.gold},
          {"report", a.report},
          {"match", match_to_json(a.match)}};
  auto gold = read_labeled(a.gold);
  auto preds = read_predictions(a.pred);
  if (gold.size() != preds.size())
    throw std::runtime_error(
        "prediction/gold size mismatch: " + std::to_string(preds.size()) +
        " prediction lines vs " + std::to_string(gold.size()) +
        " gold documents");
  EvalReport rep = evaluate_corpus(gold, preds, a.match);
  write_report(a.report, rep, rc.dump());
  std::cout << "present F1@5 " << rep.present.at_5.f1 << " F1@M "
            << rep.present.at_m.f1 << "; absent F1@5 " << rep.absent.at_5.f1
            << " F1@M " << rep.absent.at_m.f1 << " over " << rep.n_documents
            << " documents; report in " << a.report << "\n";
  return 0;
}

struct AnalyzeArgs {
  std::string baseline, treatment, out;
  int buckets = 5;
};

int run_analyze(const AnalyzeArgs& a) {
  json rc{{"command", "analyze"},
          {"baseline", a.baseline},
          {"treatment", a.treatment},
          {"buckets", a.buckets},
          {"out", a.out}};
  EvalReport base = read_report(a.baseline);
  EvalReport treat = read_report(a.treatment);
  BucketReport rep = bucket_analysis(base, treat, a.buckets);
  if (!a.out.empty()) {
    write_bucket_report(a.out, rep, rc.dump());
    std::cout << "wrote " << rep.buckets.size() << " buckets ("
              << rep.omitted_buckets << " omitted) to " << a.out << "\n";
  } else {
    std::cout << bucket_report_json(rep, rc.dump()) << "\n";
  }
  return 0;
}

struct DumpAttentionArgs {
  std::string checkpoint, input, out;
};

int run_dump_attention(const DumpAttentionArgs& a) {
  json rc{{"command", "dump-attention"},
          {"checkpoint", a.checkpoint},
          {"input", a.input},
          {"out", a.out}};
  Checkpoint ck = load_checkpoint(a.checkpoint);
  rc["model"] = json::parse(ck.config.to_json());
  auto docs = read_documents(a.input);
  MatchConfig dedup;
  json report;
  report["schema_version"] = 1;
  report["_run_config"] = rc;
  json arr = json::array();
  for (const auto& doc : docs) {
    TokenizedExample ex = encode_example(doc, ck.vocab);
    int n_sent = static_cast<int>(ex.sentence_spans.size());
    GateOverride on{GateMode::forced, std::vector<int>(n_sent, 1), {}};
    GateOverride off{GateMode::forced, std::vector<int>(n_sent, 0), {}};
    json dj;
    dj["tokens"] = ex.tokens;
    dj["sentences"] = n_sent;
    dj["natural"] =
        decode_run_to_json(ck.model->greedy_decode(ex, ck.vocab, dedup), true);
    dj["forced_on"] = decode_run_to_json(
        ck.model->greedy_decode(ex, ck.vocab, dedup, on), true);
    dj["forced_off"] = decode_run_to_json(
        ck.model->greedy_decode(ex, ck.vocab, dedup, off), true);
    arr.push_back(std::move(dj));
  }
  report["documents"] = std::move(arr);
  std::ofstream out(a.out, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write output file: " + a.out);
  out << report.dump(2) << "\n";
  std::cout << "dumped attention for " << docs.size() << " documents to "
            << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Keyphrase generation with sentence-selection gating: preprocessing, "
      "weak labeling, training, decoding and evaluation."};
  app.require_subcommand(1);

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand(
      "preprocess", "Tokenize raw title/abstract/keywords records");
  c_pre->set_config("--config", "", kConfigHelp);
  c_pre->add_option("--input", pre.input, "raw JSONL records")
      ->required()
      ->check(CLI::ExistingFile);
  c_pre->add_option("--output", pre.output, "tokenized documents (JSONL)")
      ->required();
  c_pre->add_option("--vocab-size", pre.vocab_size, "vocabulary cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_pre->add_option("--vocab-out", pre.vocab_out,
                    "write the frequency-ranked vocabulary here");
  c_pre->add_option("--max-source-len", pre.max_source_len,
                    "truncate documents beyond this many tokens")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  LabelArgs lab;
  auto* c_lab = app.add_subcommand(
      "label", "Categorize keyphrases and derive weak sentence labels");
  c_lab->set_config("--config", "", kConfigHelp);
  c_lab->add_option("--input", lab.input, "tokenized documents (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  c_lab->add_option("--output", lab.output, "labeled examples (JSONL)")
      ->required();

  StatsArgs sta;
  auto* c_sta =
      app.add_subcommand("stats", "Corpus statistics over labeled examples");
  c_sta->set_config("--config", "", kConfigHelp);
  c_sta->add_option("--input", sta.input, "labeled examples (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  c_sta->add_option("--report", sta.report, "JSON report path")->required();

  TrainArgs tra;
  auto* c_tra = app.add_subcommand("train", "Train a model from scratch");
  c_tra->set_config("--config", "", kConfigHelp);
  c_tra->add_option("--data", tra.data, "labeled training set (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  c_tra->add_option("--val", tra.val, "labeled validation set (JSONL)")
      ->check(CLI::ExistingFile);
  c_tra->add_option("--vocab", tra.vocab, "vocabulary file from preprocess")
      ->required()
      ->check(CLI::ExistingFile);
  c_tra->add_option("--out", tra.out,
                    "output directory (train_log.jsonl, best.ckpt, last.ckpt)")
      ->required();
  c_tra->add_option("--lambda", tra.train.lambda,
                    "weight of the sentence-selection loss")
      ->capture_default_str();
  c_tra->add_option("--seed", tra.train.seed, "random seed")
      ->capture_default_str();
  c_tra->add_option("--lr", tra.train.lr, "learning rate")
      ->capture_default_str();
  c_tra->add_option("--batch-size", tra.train.batch_size, "examples per step")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_tra->add_option("--epochs", tra.train.epochs, "training epochs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_tra->add_option("--patience", tra.train.patience,
                    "early-stop epochs without improvement (0 disables)")
      ->capture_default_str();
  c_tra->add_option("--clip-norm", tra.train.clip_norm,
                    "global gradient-norm ceiling (<= 0 disables)")
      ->capture_default_str();
  c_tra->add_option("--init-range", tra.train.init_range,
                    "uniform init half-width")
      ->capture_default_str();
  c_tra->add_flag("--resume", tra.train.resume,
                  "continue from <out>/last.ckpt");
  c_tra->add_option("--embed-dim", tra.model.embed_dim, "embedding width")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_tra->add_option("--hidden-dim", tra.model.hidden_dim,
                    "encoder/decoder state width (even)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  auto* sig_opt =
      c_tra
          ->add_option("--significance-embed-dim",
                       tra.model.significance_embed_dim,
                       "significance embedding width (must equal; tracks "
                       "--hidden-dim when unset)")
          ->check(CLI::PositiveNumber);
  c_tra->add_option("--cnn-kernels", tra.model.cnn_kernels,
                    "sentence-encoder window widths")
      ->capture_default_str();
  c_tra->add_option("--cnn-channels", tra.model.cnn_channels,
                    "feature maps per window width")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_tra->add_option("--selector-hidden", tra.model.selector_hidden,
                    "selector hidden width")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_tra->add_option("--selector-input", tra.model.selector_input,
                    "sentence-encoder input: embedding or hidden")
      ->check(CLI::IsMember({"embedding", "hidden"}))
      ->capture_default_str();
  c_tra->add_option("--gate-threshold", tra.model.gate_threshold,
                    "sentence-gate threshold")
      ->capture_default_str();
  c_tra->add_option("--max-decode-len", tra.model.max_decode_len,
                    "decoding step cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  PredictArgs prd;
  auto* c_prd =
      app.add_subcommand("predict", "Greedy-decode keyphrases per document");
  c_prd->set_config("--config", "", kConfigHelp);
  c_prd->add_option("--checkpoint", prd.checkpoint, "trained checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  c_prd->add_option("--input", prd.input,
                    "tokenized or labeled documents (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  c_prd->add_option("--output", prd.output, "predictions (JSONL)")->required();

  EvalArgs evl;
  auto* c_evl =
      app.add_subcommand("eval", "Score predictions against labeled gold");
  c_evl->set_config("--config", "", kConfigHelp);
  c_evl->add_option("--pred", evl.pred, "predictions (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  c_evl->add_option("--gold", evl.gold, "labeled examples (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  c_evl->add_option("--report", evl.report, "JSON report path")->required();
  add_match_flags(c_evl, evl.match);

  AnalyzeArgs ana;
  auto* c_ana = app.add_subcommand(
      "analyze", "Per-bucket gains between two evaluation reports");
  c_ana->set_config("--config", "", kConfigHelp);
  c_ana->add_option("--baseline", ana.baseline, "baseline eval report")
      ->required()
      ->check(CLI::ExistingFile);
  c_ana->add_option("--treatment", ana.treatment, "treatment eval report")
      ->required()
      ->check(CLI::ExistingFile);
  c_ana->add_option("--buckets", ana.buckets,
                    "sentence-count quantile buckets")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_ana->add_option("--out", ana.out, "JSON report path (stdout when unset)");

  DumpAttentionArgs dat;
  auto* c_dat = app.add_subcommand(
      "dump-attention",
      "Per-step attention with natural and forced sentence gates");
  c_dat->set_config("--config", "", kConfigHelp);
  c_dat->add_option("--checkpoint", dat.checkpoint, "trained checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  c_dat->add_option("--input", dat.input,
                    "tokenized or labeled documents (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  c_dat->add_option("--out", dat.out, "JSON report path")->required();

  CLI11_PARSE(app, argc, argv);
  if (*c_tra && sig_opt->count() == 0)
    tra.model.significance_embed_dim = tra.model.hidden_dim;

  try {
    if (*c_pre) return run_preprocess(pre);
    if (*c_lab) return run_label(lab);
    if (*c_sta) return run_stats(sta);
    if (*c_tra) return run_train(tra);
    if (*c_prd) return run_predict(prd);
    if (*c_evl) return run_eval(evl);
    if (*c_ana) return run_analyze(ana);
    if (*c_dat) return run_dump_attention(dat);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
