#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sensenet/text.hpp"
#include "sensenet/vocab.hpp"

namespace sensenet {

enum class KeyphraseCategory : int;

// One raw input line: title, abstract and the gold keyphrase strings.
struct RawRecord {
  std::string title;
  std::string abstract;
  std::vector<std::string> keyphrases;
};

// Tokenized document. sentence_spans partitions [0, |tokens|); the title
// is sentence 0 (it is joined to the abstract with a "." before
// tokenization).
struct Document {
  std::vector<std::string> tokens;
  std::vector<Span> sentence_spans;
  std::vector<std::vector<std::string>> keyphrases;
};

// Index-encoded example over vocab + per-example OOV slots.
struct TokenizedExample {
  std::vector<int> source_ids;           // ids into vocab (unk for OOV)
  std::vector<int> source_extended_ids;  // OOVs get vocab_size + slot
  std::vector<std::string> oov_tokens;   // slot order = first occurrence
  std::vector<int> target_ids;           // over the extended vocabulary
  std::vector<Span> sentence_spans;
  std::vector<std::string> tokens;       // source tokens, for rendering
};

// Throws std::invalid_argument when title or abstract is blank.
// Documents longer than max_source_len tokens are truncated at a sentence
// boundary (the first sentence is hard-truncated if it alone exceeds the
// limit).
Document build_document(const RawRecord& rec, int max_source_len = 400);

// Frequency-ranked vocabulary over source and keyphrase tokens, ties
// broken lexicographically. Throws on an empty record list.
Vocab build_vocab(const std::vector<RawRecord>& records, int max_size);

// Concatenated target: present keyphrases sorted by first occurrence in
// the source, then <peos>, then the remaining keyphrases in gold order,
// then <eos>. <sep> joins keyphrases inside each block.
std::vector<std::string> format_target(
    const Document& doc, const std::vector<KeyphraseCategory>& categories);

TokenizedExample encode_example(const Document& doc, const Vocab& vocab,
                                const std::vector<std::string>& target_tokens = {});

// Renders extended ids back to tokens through vocab + oov_tokens.
std::vector<std::string> decode_ids(const std::vector<int>& ids,
                                    const Vocab& vocab,
                                    const std::vector<std::string>& oov_tokens);

// ---- JSONL I/O ---------------------------------------------------------
// Readers skip the leading {"_run_config": ...} header line if present and
// report schema problems with the offending line number.

std::vector<RawRecord> read_raw_records(const std::string& path);
void write_documents(const std::string& path,
                     const std::vector<Document>& docs,
                     const std::string& run_config_json);
std::vector<Document> read_documents(const std::string& path);

}  // namespace sensenet
