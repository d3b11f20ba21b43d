#include "cgep/tokenizer.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <unordered_map>

namespace cgep {

namespace {

const std::array<std::pair<const char*, int>, 5>& special_literals() {
  static const std::array<std::pair<const char*, int>, 5> table = {{
      {"[PAD]", 0}, {"[CLS]", 1}, {"[SEP]", 2}, {"[MASK]", 3}, {"[UNK]", 4},
  }};
  return table;
}

// returns the special id at text[pos] and its literal length, or {-1, 0}
std::pair<int, int> match_special(const std::string& text, size_t pos) {
  if (text[pos] != '[') return {-1, 0};
  for (const auto& [lit, id] : special_literals()) {
    size_t n = std::char_traits<char>::length(lit);
    if (text.compare(pos, n, lit) == 0) return {id, static_cast<int>(n)};
  }
  return {-1, 0};
}

constexpr int kCharBase = 5;      // ids below are special tokens
constexpr int kFirstChar = 32;    // ' '
constexpr int kLastChar = 126;    // '~'

}  // namespace

std::vector<int> Tokenizer::positions_in_span(const Tokenized& tok, int start,
                                              int end) const {
  std::vector<int> out;
  for (size_t i = 0; i < tok.spans.size(); ++i)
    if (tok.spans[i].start >= start && tok.spans[i].end <= end)
      out.push_back(static_cast<int>(i));
  return out;
}

CharTokenizer::CharTokenizer() = default;

int CharTokenizer::vocab_size() const { return kCharBase + (kLastChar - kFirstChar + 1); }

Tokenized CharTokenizer::encode(const std::string& text) const {
  Tokenized out;
  out.ids.reserve(text.size());
  size_t i = 0;
  while (i < text.size()) {
    auto [sid, len] = match_special(text, i);
    if (sid >= 0) {
      out.ids.push_back(sid);
      out.spans.push_back({static_cast<int>(i), static_cast<int>(i) + len});
      i += static_cast<size_t>(len);
      continue;
    }
    unsigned char c = static_cast<unsigned char>(text[i]);
    int id = (c >= kFirstChar && c <= kLastChar)
                 ? kCharBase + (c - kFirstChar)
                 : unk_id();
    out.ids.push_back(id);
    out.spans.push_back({static_cast<int>(i), static_cast<int>(i) + 1});
    ++i;
  }
  return out;
}

WordTokenizer::WordTokenizer(const std::filesystem::path& vocab_file) {
  std::ifstream in(vocab_file);
  if (!in) throw Error("cannot open vocab file: " + vocab_file.string());
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    lookup_.emplace(line, static_cast<int>(vocab_.size()));
    vocab_.push_back(line);
  }
  auto find = [&](const char* tok) {
    auto it = lookup_.find(tok);
    if (it == lookup_.end())
      throw Error(std::string("vocab file missing required token ") + tok);
    return it->second;
  };
  pad_ = find("[PAD]");
  cls_ = find("[CLS]");
  sep_ = find("[SEP]");
  mask_ = find("[MASK]");
  unk_ = find("[UNK]");
}

Tokenized WordTokenizer::encode(const std::string& text) const {
  Tokenized out;
  size_t i = 0;
  auto push = [&](const std::string& word, size_t start, size_t end) {
    auto it = lookup_.find(word);
    out.ids.push_back(it == lookup_.end() ? unk_ : it->second);
    out.spans.push_back({static_cast<int>(start), static_cast<int>(end)});
  };
  while (i < text.size()) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    auto [sid, len] = match_special(text, i);
    if (sid >= 0) {
      out.ids.push_back(sid == 0   ? pad_
                        : sid == 1 ? cls_
                        : sid == 2 ? sep_
                        : sid == 3 ? mask_
                                   : unk_);
      out.spans.push_back({static_cast<int>(i), static_cast<int>(i) + len});
      i += static_cast<size_t>(len);
      continue;
    }
    if (std::isalnum(c)) {
      size_t j = i;
      while (j < text.size() && std::isalnum(static_cast<unsigned char>(text[j]))) ++j;
      push(text.substr(i, j - i), i, j);
      i = j;
    } else {
      push(text.substr(i, 1), i, i + 1);
      ++i;
    }
  }
  return out;
}

std::unique_ptr<Tokenizer> make_char_tokenizer() {
  return std::make_unique<CharTokenizer>();
}

}  // namespace cgep
