#include "sensenet/labeling.hpp"

#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace sensenet {

const char* category_name(KeyphraseCategory c) {
  switch (c) {
    case KeyphraseCategory::present: return "present";
    case KeyphraseCategory::semi_present: return "semi_present";
    case KeyphraseCategory::absent_other: return "absent_other";
  }
  return "absent_other";
}

KeyphraseCategory category_from_name(const std::string& name) {
  if (name == "present") return KeyphraseCategory::present;
  if (name == "semi_present") return KeyphraseCategory::semi_present;
  if (name == "absent_other") return KeyphraseCategory::absent_other;
  throw std::invalid_argument("unknown keyphrase category: " + name);
}

int first_occurrence(const std::vector<std::string>& tokens,
                     const std::vector<std::string>& kp) {
  if (kp.empty() || kp.size() > tokens.size()) return -1;
  const int n = static_cast<int>(tokens.size());
  const int m = static_cast<int>(kp.size());
  for (int s = 0; s + m <= n; ++s) {
    bool hit = true;
    for (int j = 0; j < m; ++j) {
      if (tokens[s + j] != kp[j]) {
        hit = false;
        break;
      }
    }
    if (hit) return s;
  }
  return -1;
}

Classification classify_keyphrase(const Document& doc,
                                  const std::vector<std::string>& kp) {
  if (kp.empty()) throw std::invalid_argument("empty keyphrase");
  const int m = static_cast<int>(kp.size());

  if (first_occurrence(doc.tokens, kp) >= 0) {
    Classification c{KeyphraseCategory::present, {}};
    for (size_t i = 0; i < doc.sentence_spans.size(); ++i) {
      auto [b, e] = doc.sentence_spans[i];
      if (e - b < m) continue;
      for (int s = b; s + m <= e; ++s) {
        bool hit = true;
        for (int j = 0; j < m; ++j) {
          if (doc.tokens[s + j] != kp[j]) {
            hit = false;
            break;
          }
        }
        if (hit) {
          c.supporting_sentences.push_back(static_cast<int>(i));
          break;
        }
      }
    }
    return c;
  }

  // Semi-present: some single sentence contains every word (set
  // containment; repeats in the keyphrase are not required twice).
  std::unordered_set<std::string> need(kp.begin(), kp.end());
  Classification c{KeyphraseCategory::absent_other, {}};
  for (size_t i = 0; i < doc.sentence_spans.size(); ++i) {
    auto [b, e] = doc.sentence_spans[i];
    std::unordered_set<std::string> have;
    for (int t = b; t < e; ++t) have.insert(doc.tokens[t]);
    bool covered = true;
    for (const auto& w : need) {
      if (!have.count(w)) {
        covered = false;
        break;
      }
    }
    if (covered) {
      c.category = KeyphraseCategory::semi_present;
      c.supporting_sentences.push_back(static_cast<int>(i));
    }
  }
  return c;
}

std::vector<int> weak_labels(const Document& doc,
                             const std::vector<std::vector<std::string>>& kps) {
  std::vector<int> labels(doc.sentence_spans.size(), 0);
  for (const auto& kp : kps) {
    if (kp.empty()) continue;
    Classification c = classify_keyphrase(doc, kp);
    if (c.category == KeyphraseCategory::absent_other) continue;
    for (int s : c.supporting_sentences) labels[s] = 1;
  }
  return labels;
}

LabeledExample label_example(const Document& doc) {
  LabeledExample ex;
  ex.document = doc;
  ex.sentence_labels.assign(doc.sentence_spans.size(), 0);
  for (const auto& kp : doc.keyphrases) {
    Classification c = classify_keyphrase(doc, kp);
    if (c.category != KeyphraseCategory::absent_other)
      for (int s : c.supporting_sentences) ex.sentence_labels[s] = 1;
    ex.categories.push_back(c.category);
    ex.supporting_sentences.push_back(std::move(c.supporting_sentences));
  }
  return ex;
}

CorpusStats corpus_stats(const std::vector<LabeledExample>& dataset) {
  if (dataset.empty())
    throw std::invalid_argument("corpus_stats requires a non-empty dataset");
  CorpusStats st;
  long total_sentences = 0;
  long total_significant = 0;
  for (const auto& ex : dataset) {
    ++st.documents;
    total_sentences += static_cast<long>(ex.sentence_labels.size());
    for (int a : ex.sentence_labels) total_significant += a;
    for (auto c : ex.categories) {
      ++st.keyphrases;
      switch (c) {
        case KeyphraseCategory::present: ++st.present; break;
        case KeyphraseCategory::semi_present: ++st.semi_present; break;
        case KeyphraseCategory::absent_other: ++st.absent_other; break;
      }
    }
  }
  st.mean_sentences = static_cast<double>(total_sentences) / st.documents;
  st.mean_significant = static_cast<double>(total_significant) / st.documents;
  st.significant_fraction =
      total_sentences ? static_cast<double>(total_significant) / total_sentences
                      : 0.0;
  long absent = st.semi_present + st.absent_other;
  st.semi_present_share_of_absent =
      absent ? static_cast<double>(st.semi_present) / absent : 0.0;
  return st;
}

namespace {
using nlohmann::json;
}

void write_labeled(const std::string& path,
                   const std::vector<LabeledExample>& examples,
                   const std::string& run_config_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write output file: " + path);
  if (!run_config_json.empty())
    out << "{\"_run_config\":" << run_config_json << "}\n";
  for (const auto& ex : examples) {
    json j;
    j["tokens"] = ex.document.tokens;
    json spans = json::array();
    for (const auto& sp : ex.document.sentence_spans)
      spans.push_back(json::array({sp.first, sp.second}));
    j["sentence_spans"] = spans;
    j["keyphrases"] = ex.document.keyphrases;
    json cats = json::array();
    for (auto c : ex.categories) cats.push_back(category_name(c));
    j["categories"] = cats;
    j["supporting_sentences"] = ex.supporting_sentences;
    j["sentence_labels"] = ex.sentence_labels;
    out << j.dump() << "\n";
  }
}

std::vector<LabeledExample> read_labeled(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open input file: " + path);
  std::vector<LabeledExample> out;
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
    LabeledExample ex;
    try {
      ex.document.tokens = j.at("tokens").get<std::vector<std::string>>();
      for (const auto& sp : j.at("sentence_spans"))
        ex.document.sentence_spans.emplace_back(sp.at(0).get<int>(),
                                                sp.at(1).get<int>());
      ex.document.keyphrases =
          j.at("keyphrases").get<std::vector<std::vector<std::string>>>();
      for (const auto& c : j.at("categories"))
        ex.categories.push_back(category_from_name(c.get<std::string>()));
      ex.supporting_sentences =
          j.at("supporting_sentences").get<std::vector<std::vector<int>>>();
      ex.sentence_labels = j.at("sentence_labels").get<std::vector<int>>();
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": bad labeled example: " + e.what());
    }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace sensenet
