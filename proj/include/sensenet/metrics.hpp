#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sensenet/labeling.hpp"

namespace sensenet {

using Phrase = std::vector<std::string>;

struct MatchConfig {
  std::string stemmer = "porter";  // "none" or "porter"
  bool lowercase = true;
};

// Canonical form used for both matching and dedup. Marker tokens like
// <digit> pass through untouched.
Phrase normalize_phrase(const Phrase& kp, const MatchConfig& cfg);

// Keeps the first occurrence of each normalized form.
std::vector<Phrase> dedup_phrases(const std::vector<Phrase>& phrases,
                                  const MatchConfig& cfg);

struct PRF {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  int matched = 0;
  bool empty_gold = false;  // scores forced to 0, flagged
};

// F1 over all emitted predictions. Lists are assumed deduplicated.
PRF f1_at_m(const std::vector<Phrase>& predictions,
            const std::vector<Phrase>& gold, const MatchConfig& cfg);

// F1 at exactly five predictions: longer lists are cut to the first five,
// shorter ones padded with guaranteed-wrong entries (precision denominator
// is always 5).
PRF f1_at_5(const std::vector<Phrase>& predictions,
            const std::vector<Phrase>& gold, const MatchConfig& cfg);

struct SplitScores {
  PRF at_5;
  PRF at_m;
  int gold_count = 0;
};

struct DocEval {
  int sentences = 0;
  SplitScores present, absent, semi_present, absent_without_semi;
  int predictions_raw = 0;
  int predictions_deduped = 0;
};

// Routes gold by its labeled category and predictions by contiguity in the
// source (the model's own block placement is not trusted). The absent-side
// prediction pool scores the absent, semi-present and absent-without-semi
// splits.
DocEval split_eval(const Document& doc, const std::vector<Phrase>& predictions,
                   const std::vector<KeyphraseCategory>& categories,
                   const MatchConfig& cfg);

struct SplitAggregate {
  PRF at_5;  // macro average over documents with gold in the split
  PRF at_m;
  long matched_at_5 = 0;
  long matched_at_m = 0;
  long gold_total = 0;
  int docs_evaluated = 0;
  int docs_empty_gold = 0;
};

struct EvalReport {
  MatchConfig match;
  int n_documents = 0;
  SplitAggregate present, absent, semi_present, absent_without_semi;
  std::vector<DocEval> per_document;
  long predictions_raw_total = 0;
  long predictions_deduped_total = 0;
};

EvalReport evaluate_corpus(const std::vector<LabeledExample>& gold,
                           const std::vector<std::vector<Phrase>>& predictions,
                           const MatchConfig& cfg);

void write_report(const std::string& path, const EvalReport& report,
                  const std::string& run_config_json);
EvalReport read_report(const std::string& path);

struct Bucket {
  int min_sentences = 0;
  int max_sentences = 0;
  int n_docs = 0;
  // mean per-document F1 for [present|absent] x [@5|@M]
  double base_present_5 = 0, base_present_m = 0;
  double base_absent_5 = 0, base_absent_m = 0;
  double treat_present_5 = 0, treat_present_m = 0;
  double treat_absent_5 = 0, treat_absent_m = 0;
  // (treatment - baseline) / baseline; empty when the baseline mean is 0
  std::optional<double> gain_present_5, gain_present_m;
  std::optional<double> gain_absent_5, gain_absent_m;
};

struct BucketReport {
  std::vector<Bucket> buckets;
  int omitted_buckets = 0;
};

// Requires both reports to cover the same documents in the same order.
BucketReport bucket_analysis(const EvalReport& baseline,
                             const EvalReport& treatment, int n_buckets);

// Rendered JSON document; write_bucket_report writes exactly this.
std::string bucket_report_json(const BucketReport& report,
                               const std::string& run_config_json);

void write_bucket_report(const std::string& path, const BucketReport& report,
                         const std::string& run_config_json);

}  // namespace sensenet
