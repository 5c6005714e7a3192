#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace collabrec::lm {

// Word-level tokenizer: lowercased, punctuation-delimited, with reserved
// ids for the ID placeholders, the answer tokens, unknown and padding.
class Tokenizer {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kUid = 2;   // <userid>
  static constexpr int kIid = 3;   // <targetitemid>
  static constexpr int kYes = 4;
  static constexpr int kNo = 5;
  static constexpr int kNumSpecials = 6;

  // Vocabulary = specials + all corpus tokens, ids assigned by
  // (frequency desc, lexicographic) after the specials.
  static Tokenizer build(const std::vector<std::string>& corpus);

  std::vector<int> encode(const std::string& text) const;
  std::string decode(const std::vector<int>& ids) const;

  int vocab_size() const { return static_cast<int>(id_to_token_.size()); }
  int id_of(const std::string& token) const;  // kUnk when absent
  const std::string& token_of(int id) const;

  void save(const std::string& path) const;
  static Tokenizer load(const std::string& path);

  // Lowercased word split; placeholder literals survive as single tokens.
  static std::vector<std::string> split_words(const std::string& text);

 private:
  void add_token(const std::string& tok);

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

}  // namespace collabrec::lm
