#include "sensenet/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "sensenet/labeling.hpp"

namespace sensenet {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool ends_with_period(const std::string& s) {
  return !s.empty() && s.back() == '.';
}

}  // namespace

Document build_document(const RawRecord& rec, int max_source_len) {
  std::string title = trim(rec.title);
  std::string abstract = trim(rec.abstract);
  if (title.empty()) throw std::invalid_argument("record has empty title");
  if (abstract.empty())
    throw std::invalid_argument("record has empty abstract");

  std::string joined = title + (ends_with_period(title) ? " " : " . ") + abstract;
  Document doc;
  doc.tokens = tokenize(joined);
  if (max_source_len > 0 && static_cast<int>(doc.tokens.size()) > max_source_len) {
    auto spans = split_sentences(doc.tokens);
    int keep = 0;
    for (const auto& sp : spans) {
      if (sp.second <= max_source_len)
        keep = sp.second;
      else
        break;
    }
    if (keep == 0) keep = max_source_len;  // first sentence too long
    doc.tokens.resize(keep);
  }
  doc.sentence_spans = split_sentences(doc.tokens);
  for (const auto& kp : rec.keyphrases) {
    auto toks = tokenize(kp);
    if (!toks.empty()) doc.keyphrases.push_back(std::move(toks));
  }
  return doc;
}

Vocab build_vocab(const std::vector<RawRecord>& records, int max_size) {
  if (records.empty())
    throw std::invalid_argument("cannot build a vocabulary from an empty corpus");
  std::unordered_map<std::string, long> freq;
  std::unordered_set<std::string> special_set(Vocab::specials().begin(),
                                              Vocab::specials().end());
  auto count = [&](const std::vector<std::string>& toks) {
    for (const auto& t : toks)
      if (!special_set.count(t)) ++freq[t];
  };
  for (const auto& rec : records) {
    Document doc = build_document(rec, 0);
    count(doc.tokens);
    for (const auto& kp : doc.keyphrases) count(kp);
  }
  std::vector<std::pair<std::string, long>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (max_size >= 0 && static_cast<int>(ranked.size()) > max_size)
    ranked.resize(max_size);
  std::vector<std::string> toks;
  toks.reserve(ranked.size());
  for (auto& p : ranked) toks.push_back(std::move(p.first));
  return Vocab(toks);
}

std::vector<std::string> format_target(
    const Document& doc, const std::vector<KeyphraseCategory>& categories) {
  if (categories.size() != doc.keyphrases.size())
    throw std::invalid_argument("categories/keyphrases length mismatch");

  // Present keyphrases sorted by first contiguous occurrence in the source.
  std::vector<std::pair<int, int>> present;  // (position, kp index)
  std::vector<int> rest;
  for (size_t k = 0; k < doc.keyphrases.size(); ++k) {
    if (categories[k] == KeyphraseCategory::present) {
      int pos = first_occurrence(doc.tokens, doc.keyphrases[k]);
      present.emplace_back(pos, static_cast<int>(k));
    } else {
      rest.push_back(static_cast<int>(k));
    }
  }
  std::stable_sort(present.begin(), present.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<std::string> out;
  auto append_block = [&](const std::vector<int>& idxs) {
    bool first = true;
    for (int k : idxs) {
      if (!first) out.push_back("<sep>");
      first = false;
      for (const auto& t : doc.keyphrases[k]) out.push_back(t);
    }
  };
  std::vector<int> present_idx;
  for (auto& p : present) present_idx.push_back(p.second);
  append_block(present_idx);
  out.push_back("<peos>");
  append_block(rest);
  out.push_back("<eos>");
  return out;
}

TokenizedExample encode_example(const Document& doc, const Vocab& vocab,
                                const std::vector<std::string>& target_tokens) {
  TokenizedExample ex;
  ex.tokens = doc.tokens;
  ex.sentence_spans = doc.sentence_spans;
  std::unordered_map<std::string, int> oov_slot;
  for (const auto& tok : doc.tokens) {
    if (vocab.contains(tok)) {
      int id = vocab.id(tok);
      ex.source_ids.push_back(id);
      ex.source_extended_ids.push_back(id);
    } else {
      ex.source_ids.push_back(Vocab::kUnk);
      auto it = oov_slot.find(tok);
      int slot;
      if (it == oov_slot.end()) {
        slot = static_cast<int>(ex.oov_tokens.size());
        oov_slot[tok] = slot;
        ex.oov_tokens.push_back(tok);
      } else {
        slot = it->second;
      }
      ex.source_extended_ids.push_back(vocab.size() + slot);
    }
  }
  for (const auto& tok : target_tokens) {
    if (vocab.contains(tok)) {
      ex.target_ids.push_back(vocab.id(tok));
    } else {
      auto it = oov_slot.find(tok);
      ex.target_ids.push_back(it == oov_slot.end()
                                  ? Vocab::kUnk
                                  : vocab.size() + it->second);
    }
  }
  return ex;
}

std::vector<std::string> decode_ids(const std::vector<int>& ids,
                                    const Vocab& vocab,
                                    const std::vector<std::string>& oov_tokens) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id < vocab.size())
      out.push_back(vocab.token(id));
    else
      out.push_back(oov_tokens.at(id - vocab.size()));
  }
  return out;
}

// ---- JSONL I/O ---------------------------------------------------------

namespace {

using nlohmann::json;

json parse_line(const std::string& line, const std::string& path, long lineno) {
  try {
    return json::parse(line);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ":" + std::to_string(lineno) +
                             ": invalid JSON: " + e.what());
  }
}

bool is_header(const json& j) { return j.is_object() && j.contains("_run_config"); }

}  // namespace

std::vector<RawRecord> read_raw_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open input file: " + path);
  std::vector<RawRecord> out;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j = parse_line(line, path, lineno);
    if (is_header(j)) continue;
    RawRecord rec;
    try {
      rec.title = j.at("title").get<std::string>();
      rec.abstract = j.at("abstract").get<std::string>();
      if (j.contains("keywords")) {
        std::string kws = j.at("keywords").get<std::string>();
        size_t b = 0;
        while (b <= kws.size()) {
          size_t e = kws.find(';', b);
          std::string kp = trim(kws.substr(b, e == std::string::npos
                                                  ? std::string::npos
                                                  : e - b));
          if (!kp.empty()) rec.keyphrases.push_back(kp);
          if (e == std::string::npos) break;
          b = e + 1;
        }
      }
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": bad record: " + e.what());
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void write_documents(const std::string& path, const std::vector<Document>& docs,
                     const std::string& run_config_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write output file: " + path);
  if (!run_config_json.empty())
    out << "{\"_run_config\":" << run_config_json << "}\n";
  for (const auto& doc : docs) {
    json j;
    j["tokens"] = doc.tokens;
    json spans = json::array();
    for (const auto& sp : doc.sentence_spans)
      spans.push_back(json::array({sp.first, sp.second}));
    j["sentence_spans"] = spans;
    j["keyphrases"] = doc.keyphrases;
    out << j.dump() << "\n";
  }
}

std::vector<Document> read_documents(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open input file: " + path);
  std::vector<Document> out;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j = parse_line(line, path, lineno);
    if (is_header(j)) continue;
    Document doc;
    try {
      doc.tokens = j.at("tokens").get<std::vector<std::string>>();
      for (const auto& sp : j.at("sentence_spans"))
        doc.sentence_spans.emplace_back(sp.at(0).get<int>(), sp.at(1).get<int>());
      if (j.contains("keyphrases"))
        doc.keyphrases =
            j.at("keyphrases").get<std::vector<std::vector<std::string>>>();
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": bad document: " + e.what());
    }
    out.push_back(std::move(doc));
  }
  return out;
}

}  // namespace sensenet
