#include "sensenet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "sensenet/stemmer.hpp"
#include "sensenet/text.hpp"

namespace sensenet {

using json = nlohmann::ordered_json;

Phrase normalize_phrase(const Phrase& kp, const MatchConfig& cfg) {
  Phrase out;
  out.reserve(kp.size());
  for (const auto& w : kp) {
    std::string t = w;
    if (cfg.lowercase) {
      for (auto& c : t)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    if (cfg.stemmer == "porter") t = porter_stem(t);
    out.push_back(std::move(t));
  }
  return out;
}

namespace {

std::string phrase_key(const Phrase& kp) {
  std::string key;
  for (size_t i = 0; i < kp.size(); ++i) {
    if (i) key += ' ';
    key += kp[i];
  }
  return key;
}

std::set<std::string> key_set(const std::vector<Phrase>& phrases,
                              const MatchConfig& cfg) {
  std::set<std::string> keys;
  for (const auto& p : phrases) keys.insert(phrase_key(normalize_phrase(p, cfg)));
  return keys;
}

PRF score(int matched, int n_pred_denominator, int n_gold) {
  PRF r;
  r.matched = matched;
  if (n_gold == 0) {
    r.empty_gold = true;
    return r;
  }
  r.precision = n_pred_denominator > 0
                    ? static_cast<double>(matched) / n_pred_denominator
                    : 0.0;
  r.recall = static_cast<double>(matched) / n_gold;
  r.f1 = (r.precision + r.recall) > 0
             ? 2 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

int count_matches(const std::vector<Phrase>& predictions, size_t limit,
                  const std::set<std::string>& gold_keys,
                  const MatchConfig& cfg) {
  int matched = 0;
  for (size_t i = 0; i < predictions.size() && i < limit; ++i) {
    if (gold_keys.count(phrase_key(normalize_phrase(predictions[i], cfg))))
      ++matched;
  }
  return matched;
}

}  // namespace

std::vector<Phrase> dedup_phrases(const std::vector<Phrase>& phrases,
                                  const MatchConfig& cfg) {
  std::vector<Phrase> out;
  std::set<std::string> seen;
  for (const auto& p : phrases) {
    if (seen.insert(phrase_key(normalize_phrase(p, cfg))).second) out.push_back(p);
  }
  return out;
}

PRF f1_at_m(const std::vector<Phrase>& predictions,
            const std::vector<Phrase>& gold, const MatchConfig& cfg) {
  auto gold_keys = key_set(gold, cfg);
  int matched = count_matches(predictions, predictions.size(), gold_keys, cfg);
  return score(matched, static_cast<int>(predictions.size()),
               static_cast<int>(gold_keys.size()));
}

PRF f1_at_5(const std::vector<Phrase>& predictions,
            const std::vector<Phrase>& gold, const MatchConfig& cfg) {
  auto gold_keys = key_set(gold, cfg);
  int matched = count_matches(predictions, 5, gold_keys, cfg);
  return score(matched, 5, static_cast<int>(gold_keys.size()));
}

namespace {

bool contiguous_in(const std::vector<std::string>& tokens, const Phrase& kp) {
  return first_occurrence(tokens, kp) >= 0;
}

SplitScores split_scores(const std::vector<Phrase>& preds,
                         const std::vector<Phrase>& gold,
                         const MatchConfig& cfg) {
  SplitScores s;
  s.gold_count = static_cast<int>(key_set(gold, cfg).size());
  s.at_5 = f1_at_5(preds, gold, cfg);
  s.at_m = f1_at_m(preds, gold, cfg);
  return s;
}

}  // namespace

DocEval split_eval(const Document& doc, const std::vector<Phrase>& predictions,
                   const std::vector<KeyphraseCategory>& categories,
                   const MatchConfig& cfg) {
  if (doc.keyphrases.size() != categories.size())
    throw std::invalid_argument("split_eval: category count mismatch");
  DocEval ev;
  ev.sentences = static_cast<int>(doc.sentence_spans.size());
  ev.predictions_raw = static_cast<int>(predictions.size());
  auto deduped = dedup_phrases(predictions, cfg);
  ev.predictions_deduped = static_cast<int>(deduped.size());

  std::vector<Phrase> gold_present, gold_absent, gold_semi, gold_other;
  for (size_t i = 0; i < doc.keyphrases.size(); ++i) {
    switch (categories[i]) {
      case KeyphraseCategory::present:
        gold_present.push_back(doc.keyphrases[i]);
        break;
      case KeyphraseCategory::semi_present:
        gold_absent.push_back(doc.keyphrases[i]);
        gold_semi.push_back(doc.keyphrases[i]);
        break;
      case KeyphraseCategory::absent_other:
        gold_absent.push_back(doc.keyphrases[i]);
        gold_other.push_back(doc.keyphrases[i]);
        break;
    }
  }

  std::vector<Phrase> pred_present, pred_absent;
  for (const auto& p : deduped) {
    if (contiguous_in(doc.tokens, p))
      pred_present.push_back(p);
    else
      pred_absent.push_back(p);
  }

  ev.present = split_scores(pred_present, gold_present, cfg);
  ev.absent = split_scores(pred_absent, gold_absent, cfg);
  ev.semi_present = split_scores(pred_absent, gold_semi, cfg);
  ev.absent_without_semi = split_scores(pred_absent, gold_other, cfg);
  return ev;
}

namespace {

void accumulate(SplitAggregate& agg, const SplitScores& s) {
  agg.gold_total += s.gold_count;
  if (s.at_m.empty_gold) {
    ++agg.docs_empty_gold;
    return;
  }
  ++agg.docs_evaluated;
  agg.at_5.precision += s.at_5.precision;
  agg.at_5.recall += s.at_5.recall;
  agg.at_5.f1 += s.at_5.f1;
  agg.matched_at_5 += s.at_5.matched;
  agg.at_m.precision += s.at_m.precision;
  agg.at_m.recall += s.at_m.recall;
  agg.at_m.f1 += s.at_m.f1;
  agg.matched_at_m += s.at_m.matched;
}

void finalize(SplitAggregate& agg) {
  if (agg.docs_evaluated == 0) return;
  double n = agg.docs_evaluated;
  agg.at_5.precision /= n;
  agg.at_5.recall /= n;
  agg.at_5.f1 /= n;
  agg.at_m.precision /= n;
  agg.at_m.recall /= n;
  agg.at_m.f1 /= n;
}

}  // namespace

EvalReport evaluate_corpus(const std::vector<LabeledExample>& gold,
                           const std::vector<std::vector<Phrase>>& predictions,
                           const MatchConfig& cfg) {
  if (gold.size() != predictions.size())
    throw std::invalid_argument("evaluate_corpus: prediction count mismatch");
  EvalReport rep;
  rep.match = cfg;
  rep.n_documents = static_cast<int>(gold.size());
  for (size_t i = 0; i < gold.size(); ++i) {
    DocEval ev = split_eval(gold[i].document, predictions[i],
                            gold[i].categories, cfg);
    rep.predictions_raw_total += ev.predictions_raw;
    rep.predictions_deduped_total += ev.predictions_deduped;
    accumulate(rep.present, ev.present);
    accumulate(rep.absent, ev.absent);
    accumulate(rep.semi_present, ev.semi_present);
    accumulate(rep.absent_without_semi, ev.absent_without_semi);
    rep.per_document.push_back(std::move(ev));
  }
  finalize(rep.present);
  finalize(rep.absent);
  finalize(rep.semi_present);
  finalize(rep.absent_without_semi);
  return rep;
}

namespace {

json prf_json(const PRF& p) {
  return json{{"precision", p.precision},
              {"recall", p.recall},
              {"f1", p.f1},
              {"matched", p.matched}};
}

PRF prf_from(const json& j) {
  PRF p;
  p.precision = j.at("precision").get<double>();
  p.recall = j.at("recall").get<double>();
  p.f1 = j.at("f1").get<double>();
  p.matched = j.at("matched").get<int>();
  return p;
}

json agg_json(const SplitAggregate& a) {
  return json{{"f1_5", prf_json(a.at_5)},
              {"f1_m", prf_json(a.at_m)},
              {"matched_at_5", a.matched_at_5},
              {"matched_at_m", a.matched_at_m},
              {"gold_total", a.gold_total},
              {"docs_evaluated", a.docs_evaluated},
              {"docs_empty_gold", a.docs_empty_gold}};
}

SplitAggregate agg_from(const json& j) {
  SplitAggregate a;
  a.at_5 = prf_from(j.at("f1_5"));
  a.at_m = prf_from(j.at("f1_m"));
  a.matched_at_5 = j.at("matched_at_5").get<long>();
  a.matched_at_m = j.at("matched_at_m").get<long>();
  a.gold_total = j.at("gold_total").get<long>();
  a.docs_evaluated = j.at("docs_evaluated").get<int>();
  a.docs_empty_gold = j.at("docs_empty_gold").get<int>();
  return a;
}

json split_json(const SplitScores& s) {
  return json{{"f1_5", prf_json(s.at_5)},
              {"f1_m", prf_json(s.at_m)},
              {"gold_count", s.gold_count},
              {"empty_gold", s.at_m.empty_gold}};
}

SplitScores split_from(const json& j) {
  SplitScores s;
  s.at_5 = prf_from(j.at("f1_5"));
  s.at_m = prf_from(j.at("f1_m"));
  s.gold_count = j.at("gold_count").get<int>();
  bool empty = j.at("empty_gold").get<bool>();
  s.at_5.empty_gold = empty;
  s.at_m.empty_gold = empty;
  return s;
}

constexpr int kReportSchemaVersion = 1;

}  // namespace

void write_report(const std::string& path, const EvalReport& report,
                  const std::string& run_config_json) {
  json j;
  j["schema_version"] = kReportSchemaVersion;
  if (!run_config_json.empty()) j["_run_config"] = json::parse(run_config_json);
  j["match"] = {{"stemmer", report.match.stemmer},
                {"lowercase", report.match.lowercase}};
  j["n_documents"] = report.n_documents;
  j["predictions_raw_total"] = report.predictions_raw_total;
  j["predictions_deduped_total"] = report.predictions_deduped_total;
  j["splits"] = {{"present", agg_json(report.present)},
                 {"absent", agg_json(report.absent)},
                 {"semi_present", agg_json(report.semi_present)},
                 {"absent_without_semi", agg_json(report.absent_without_semi)}};
  json docs = json::array();
  for (const auto& d : report.per_document) {
    docs.push_back(
        {{"sentences", d.sentences},
         {"predictions_raw", d.predictions_raw},
         {"predictions_deduped", d.predictions_deduped},
         {"present", split_json(d.present)},
         {"absent", split_json(d.absent)},
         {"semi_present", split_json(d.semi_present)},
         {"absent_without_semi", split_json(d.absent_without_semi)}});
  }
  j["per_document"] = std::move(docs);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

EvalReport read_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  json j = json::parse(in);
  if (j.at("schema_version").get<int>() != kReportSchemaVersion)
    throw std::runtime_error(path + ": unsupported report schema");
  EvalReport rep;
  rep.match.stemmer = j.at("match").at("stemmer").get<std::string>();
  rep.match.lowercase = j.at("match").at("lowercase").get<bool>();
  rep.n_documents = j.at("n_documents").get<int>();
  rep.predictions_raw_total = j.at("predictions_raw_total").get<long>();
  rep.predictions_deduped_total = j.at("predictions_deduped_total").get<long>();
  const auto& sp = j.at("splits");
  rep.present = agg_from(sp.at("present"));
  rep.absent = agg_from(sp.at("absent"));
  rep.semi_present = agg_from(sp.at("semi_present"));
  rep.absent_without_semi = agg_from(sp.at("absent_without_semi"));
  for (const auto& dj : j.at("per_document")) {
    DocEval d;
    d.sentences = dj.at("sentences").get<int>();
    d.predictions_raw = dj.at("predictions_raw").get<int>();
    d.predictions_deduped = dj.at("predictions_deduped").get<int>();
    d.present = split_from(dj.at("present"));
    d.absent = split_from(dj.at("absent"));
    d.semi_present = split_from(dj.at("semi_present"));
    d.absent_without_semi = split_from(dj.at("absent_without_semi"));
    rep.per_document.push_back(std::move(d));
  }
  return rep;
}

namespace {

// Mean F1 over docs in [begin,end) with gold in the split; 0 when none have.
double mean_f1(const std::vector<const DocEval*>& docs, size_t begin,
               size_t end, bool present_split, bool at5) {
  double sum = 0;
  int n = 0;
  for (size_t i = begin; i < end; ++i) {
    const SplitScores& s = present_split ? docs[i]->present : docs[i]->absent;
    const PRF& p = at5 ? s.at_5 : s.at_m;
    if (p.empty_gold) continue;
    sum += p.f1;
    ++n;
  }
  return n ? sum / n : 0.0;
}

std::optional<double> rel_gain(double base, double treat) {
  if (base == 0.0) return std::nullopt;
  return (treat - base) / base;
}

}  // namespace

BucketReport bucket_analysis(const EvalReport& baseline,
                             const EvalReport& treatment, int n_buckets) {
  if (n_buckets < 1) throw std::invalid_argument("bucket_analysis: n_buckets");
  if (baseline.n_documents != treatment.n_documents ||
      baseline.per_document.size() != treatment.per_document.size())
    throw std::invalid_argument("bucket_analysis: document sets differ");
  size_t n = baseline.per_document.size();
  for (size_t i = 0; i < n; ++i) {
    if (baseline.per_document[i].sentences !=
        treatment.per_document[i].sentences)
      throw std::invalid_argument("bucket_analysis: document sets differ");
  }

  // Sort by sentence count, ties by original index, then cut into
  // near-equal quantile chunks.
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return baseline.per_document[a].sentences <
           baseline.per_document[b].sentences;
  });
  std::vector<const DocEval*> base_docs(n), treat_docs(n);
  for (size_t i = 0; i < n; ++i) {
    base_docs[i] = &baseline.per_document[order[i]];
    treat_docs[i] = &treatment.per_document[order[i]];
  }

  BucketReport rep;
  for (int b = 0; b < n_buckets; ++b) {
    size_t begin = n * b / n_buckets;
    size_t end = n * (b + 1) / n_buckets;
    if (begin == end) {
      ++rep.omitted_buckets;
      continue;
    }
    Bucket bk;
    bk.n_docs = static_cast<int>(end - begin);
    bk.min_sentences = base_docs[begin]->sentences;
    bk.max_sentences = base_docs[end - 1]->sentences;
    bk.base_present_5 = mean_f1(base_docs, begin, end, true, true);
    bk.base_present_m = mean_f1(base_docs, begin, end, true, false);
    bk.base_absent_5 = mean_f1(base_docs, begin, end, false, true);
    bk.base_absent_m = mean_f1(base_docs, begin, end, false, false);
    bk.treat_present_5 = mean_f1(treat_docs, begin, end, true, true);
    bk.treat_present_m = mean_f1(treat_docs, begin, end, true, false);
    bk.treat_absent_5 = mean_f1(treat_docs, begin, end, false, true);
    bk.treat_absent_m = mean_f1(treat_docs, begin, end, false, false);
    bk.gain_present_5 = rel_gain(bk.base_present_5, bk.treat_present_5);
    bk.gain_present_m = rel_gain(bk.base_present_m, bk.treat_present_m);
    bk.gain_absent_5 = rel_gain(bk.base_absent_5, bk.treat_absent_5);
    bk.gain_absent_m = rel_gain(bk.base_absent_m, bk.treat_absent_m);
    rep.buckets.push_back(bk);
  }
  return rep;
}

std::string bucket_report_json(const BucketReport& report,
                               const std::string& run_config_json) {
  json j;
  j["schema_version"] = kReportSchemaVersion;
  if (!run_config_json.empty()) j["_run_config"] = json::parse(run_config_json);
  j["omitted_buckets"] = report.omitted_buckets;
  json arr = json::array();
  for (const auto& b : report.buckets) {
    json bj = {{"min_sentences", b.min_sentences},
               {"max_sentences", b.max_sentences},
               {"n_docs", b.n_docs},
               {"baseline",
                {{"present_f1_5", b.base_present_5},
                 {"present_f1_m", b.base_present_m},
                 {"absent_f1_5", b.base_absent_5},
                 {"absent_f1_m", b.base_absent_m}}},
               {"treatment",
                {{"present_f1_5", b.treat_present_5},
                 {"present_f1_m", b.treat_present_m},
                 {"absent_f1_5", b.treat_absent_5},
                 {"absent_f1_m", b.treat_absent_m}}}};
    json gains;
    gains["present_f1_5"] =
        b.gain_present_5 ? json(*b.gain_present_5) : json(nullptr);
    gains["present_f1_m"] =
        b.gain_present_m ? json(*b.gain_present_m) : json(nullptr);
    gains["absent_f1_5"] =
        b.gain_absent_5 ? json(*b.gain_absent_5) : json(nullptr);
    gains["absent_f1_m"] =
        b.gain_absent_m ? json(*b.gain_absent_m) : json(nullptr);
    bj["relative_gain"] = std::move(gains);
    arr.push_back(std::move(bj));
  }
  j["buckets"] = std::move(arr);
  return j.dump(2);
}

void write_bucket_report(const std::string& path, const BucketReport& report,
                         const std::string& run_config_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << bucket_report_json(report, run_config_json) << "\n";
}

}  // namespace sensenet
