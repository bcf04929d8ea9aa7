#pragma once

#include <string>
#include <vector>

#include "sensenet/corpus.hpp"

namespace sensenet {

enum class KeyphraseCategory : int {
  present = 0,       // contiguous token subsequence of the source
  semi_present = 1,  // all words inside one sentence, not contiguous
  absent_other = 2,
};

const char* category_name(KeyphraseCategory c);
KeyphraseCategory category_from_name(const std::string& name);

// Index of the first contiguous match of kp in tokens, -1 if none.
int first_occurrence(const std::vector<std::string>& tokens,
                     const std::vector<std::string>& kp);

struct Classification {
  KeyphraseCategory category;
  // present: sentences holding a full contiguous match; semi-present:
  // sentences whose word set covers the keyphrase. Empty otherwise (a
  // present match may straddle sentence boundaries).
  std::vector<int> supporting_sentences;
};

// Throws std::invalid_argument on an empty keyphrase.
Classification classify_keyphrase(const Document& doc,
                                  const std::vector<std::string>& kp);

// a_i = 1 iff sentence i supports some present or semi-present keyphrase.
std::vector<int> weak_labels(const Document& doc,
                             const std::vector<std::vector<std::string>>& kps);

struct LabeledExample {
  Document document;
  std::vector<KeyphraseCategory> categories;
  std::vector<std::vector<int>> supporting_sentences;  // per keyphrase
  std::vector<int> sentence_labels;                    // a_i per sentence
};

LabeledExample label_example(const Document& doc);

struct CorpusStats {
  double mean_sentences = 0;
  double mean_significant = 0;
  double significant_fraction = 0;          // significant / all sentences
  double semi_present_share_of_absent = 0;  // semi / (semi + absent_other)
  long documents = 0;
  long keyphrases = 0;
  long present = 0;
  long semi_present = 0;
  long absent_other = 0;
};

// Throws std::invalid_argument on an empty dataset.
CorpusStats corpus_stats(const std::vector<LabeledExample>& dataset);

void write_labeled(const std::string& path,
                   const std::vector<LabeledExample>& examples,
                   const std::string& run_config_json);
std::vector<LabeledExample> read_labeled(const std::string& path);

}  // namespace sensenet
