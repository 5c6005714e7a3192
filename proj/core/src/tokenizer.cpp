#include "collabrec/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>

namespace collabrec::lm {

namespace {

constexpr const char* kSpecialTokens[Tokenizer::kNumSpecials] = {
    "<pad>", "<unk>", "<userid>", "<targetitemid>", "yes", "no"};

bool word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '\'';
}

}  // namespace

std::vector<std::string> Tokenizer::split_words(const std::string& text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  std::vector<std::string> out;
  size_t i = 0;
  const std::string uid = "<userid>", iid = "<targetitemid>";
  while (i < lower.size()) {
    if (lower.compare(i, uid.size(), uid) == 0) {
      out.push_back(uid);
      i += uid.size();
    } else if (lower.compare(i, iid.size(), iid) == 0) {
      out.push_back(iid);
      i += iid.size();
    } else if (word_char(lower[i])) {
      size_t j = i;
      while (j < lower.size() && word_char(lower[j])) ++j;
      out.push_back(lower.substr(i, j - i));
      i = j;
    } else {
      ++i;  // whitespace / punctuation delimiter
    }
  }
  return out;
}

void Tokenizer::add_token(const std::string& tok) {
  token_to_id_.emplace(tok, static_cast<int>(id_to_token_.size()));
  id_to_token_.push_back(tok);
}

Tokenizer Tokenizer::build(const std::vector<std::string>& corpus) {
  if (corpus.empty()) throw std::invalid_argument("Tokenizer: empty corpus");
  Tokenizer t;
  for (const char* s : kSpecialTokens) t.add_token(s);

  std::map<std::string, long> freq;
  for (const auto& text : corpus)
    for (const auto& w : split_words(text)) ++freq[w];

  std::vector<std::pair<std::string, long>> words(freq.begin(), freq.end());
  std::sort(words.begin(), words.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  for (const auto& [w, f] : words)
    if (!t.token_to_id_.count(w)) t.add_token(w);
  return t;
}

int Tokenizer::id_of(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Tokenizer::token_of(int id) const {
  if (id < 0 || id >= vocab_size())
    throw std::out_of_range("Tokenizer: id out of range");
  return id_to_token_[id];
}

std::vector<int> Tokenizer::encode(const std::string& text) const {
  std::vector<int> ids;
  for (const auto& w : split_words(text)) ids.push_back(id_of(w));
  return ids;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += token_of(ids[i]);
  }
  return out;
}

void Tokenizer::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write vocab: " + path);
  for (const auto& tok : id_to_token_) out << tok << "\n";
}

Tokenizer Tokenizer::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocab: " + path);
  Tokenizer t;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) t.add_token(line);
  }
  if (t.vocab_size() < kNumSpecials)
    throw std::runtime_error("vocab file too small: " + path);
  for (int i = 0; i < kNumSpecials; ++i)
    if (t.id_to_token_[i] != kSpecialTokens[i])
      throw std::runtime_error("vocab file missing specials: " + path);
  return t;
}

}  // namespace collabrec::lm
