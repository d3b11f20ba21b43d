#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "cgep/util.hpp"

namespace cgep {

struct TokenSpan {
  int start = 0;
  int end = 0;
};

struct Tokenized {
  std::vector<int> ids;
  std::vector<TokenSpan> spans;  // char interval of each token in the input
};

// Vocabulary and text segmentation contract shared by all encoder profiles.
// Special-token literals ([PAD], [MASK], ...) occurring inside text are
// emitted as single tokens, so leakage-masked sentences round-trip.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  virtual Tokenized encode(const std::string& text) const = 0;
  virtual int vocab_size() const = 0;

  virtual int pad_id() const = 0;
  virtual int cls_id() const = 0;
  virtual int sep_id() const = 0;
  virtual int mask_id() const = 0;
  virtual int unk_id() const = 0;

  virtual std::string name() const = 0;

  // token positions (indices into ids) fully covered by [start, end)
  std::vector<int> positions_in_span(const Tokenized& tok, int start, int end) const;
};

// Character-level vocabulary over printable ASCII; used by the toy profile.
class CharTokenizer : public Tokenizer {
 public:
  CharTokenizer();
  Tokenized encode(const std::string& text) const override;
  int vocab_size() const override;
  int pad_id() const override { return 0; }
  int cls_id() const override { return 1; }
  int sep_id() const override { return 2; }
  int mask_id() const override { return 3; }
  int unk_id() const override { return 4; }
  std::string name() const override { return "char"; }
};

// Whitespace/punctuation word vocabulary loaded from a file (one token per
// line); profile for full-scale runs with exported pretrained weights.
class WordTokenizer : public Tokenizer {
 public:
  explicit WordTokenizer(const std::filesystem::path& vocab_file);
  Tokenized encode(const std::string& text) const override;
  int vocab_size() const override { return static_cast<int>(vocab_.size()); }
  int pad_id() const override { return pad_; }
  int cls_id() const override { return cls_; }
  int sep_id() const override { return sep_; }
  int mask_id() const override { return mask_; }
  int unk_id() const override { return unk_; }
  std::string name() const override { return "word"; }

 private:
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> lookup_;
  int pad_ = -1, cls_ = -1, sep_ = -1, mask_ = -1, unk_ = -1;
};

std::unique_ptr<Tokenizer> make_char_tokenizer();

}  // namespace cgep
