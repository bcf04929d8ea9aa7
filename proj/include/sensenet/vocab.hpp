#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace sensenet {

// Token <-> id bijection. The first six ids are fixed marker tokens; all
// other tokens follow in corpus-frequency order.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kEos = 2;
  static constexpr int kSep = 3;
  static constexpr int kPeos = 4;
  static constexpr int kDigit = 5;

  static const std::vector<std::string>& specials();

  Vocab() = default;
  // `ranked` excludes the specials; they are prepended here.
  explicit Vocab(const std::vector<std::string>& ranked);
  // `all` is a complete id-ordered token list starting with the specials.
  static Vocab from_tokens(const std::vector<std::string>& all);

  int size() const { return static_cast<int>(id_to_token_.size()); }
  bool contains(const std::string& tok) const {
    return token_to_id_.count(tok) > 0;
  }
  // Returns kUnk for unknown tokens.
  int id(const std::string& tok) const;
  const std::string& token(int id) const { return id_to_token_.at(id); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

}  // namespace sensenet
