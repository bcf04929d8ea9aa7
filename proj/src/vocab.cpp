#include "sensenet/vocab.hpp"

#include <fstream>
#include <stdexcept>

namespace sensenet {

const std::vector<std::string>& Vocab::specials() {
  static const std::vector<std::string> s = {"<pad>", "<unk>", "<eos>",
                                             "<sep>", "<peos>", "<digit>"};
  return s;
}

Vocab::Vocab(const std::vector<std::string>& ranked) {
  for (const auto& tok : specials()) {
    token_to_id_[tok] = static_cast<int>(id_to_token_.size());
    id_to_token_.push_back(tok);
  }
  for (const auto& tok : ranked) {
    if (token_to_id_.count(tok)) continue;
    token_to_id_[tok] = static_cast<int>(id_to_token_.size());
    id_to_token_.push_back(tok);
  }
}

Vocab Vocab::from_tokens(const std::vector<std::string>& all) {
  if (all.size() < specials().size())
    throw std::invalid_argument("vocab token list truncated");
  for (size_t i = 0; i < specials().size(); ++i) {
    if (all[i] != specials()[i])
      throw std::invalid_argument("vocab token list missing marker tokens");
  }
  Vocab v;
  for (const auto& tok : all) {
    if (v.token_to_id_.count(tok))
      throw std::invalid_argument("duplicate token in vocab list: " + tok);
    v.token_to_id_[tok] = static_cast<int>(v.id_to_token_.size());
    v.id_to_token_.push_back(tok);
  }
  return v;
}

int Vocab::id(const std::string& tok) const {
  auto it = token_to_id_.find(tok);
  return it == token_to_id_.end() ? kUnk : it->second;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocab file: " + path);
  for (const auto& tok : id_to_token_) out << tok << "\n";
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read vocab file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  if (lines.size() < specials().size())
    throw std::runtime_error("vocab file truncated: " + path);
  for (size_t i = 0; i < specials().size(); ++i) {
    if (lines[i] != specials()[i])
      throw std::runtime_error("vocab file missing marker tokens: " + path);
  }
  Vocab v;
  for (const auto& tok : lines) {
    if (v.token_to_id_.count(tok))
      throw std::runtime_error("duplicate token in vocab file: " + tok);
    v.token_to_id_[tok] = static_cast<int>(v.id_to_token_.size());
    v.id_to_token_.push_back(tok);
  }
  return v;
}

}  // namespace sensenet
