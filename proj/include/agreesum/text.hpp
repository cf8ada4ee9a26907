#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace agreesum {

// Model tokenization: whitespace split, with punctuation runs detached into
// their own tokens. Case is preserved.
std::vector<std::string> split_tokens(std::string_view text);

// Metric tokenization: lower-cased alphanumeric words, punctuation dropped.
std::vector<std::string> normalized_words(std::string_view text);

using TokenId = std::int32_t;

// Word-level vocabulary with four reserved ids: pad, bos, eos and the
// article separator, followed by <unk> and corpus tokens by descending
// frequency (ties broken lexicographically).
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kSep = 3;
  static constexpr TokenId kUnk = 4;
  static constexpr int kReserved = 5;

  Vocabulary();
  static Vocabulary build(std::span<const std::string> texts, int min_count = 1,
                          std::size_t max_size = 8000);
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;

  std::vector<TokenId> encode(std::string_view text) const;
  // Joins non-special tokens with single spaces, stopping at eos.
  std::string decode(std::span<const TokenId> ids) const;

  std::uint64_t hash() const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  nlohmann::ordered_json special_tokens_json() const;

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, TokenId, std::less<>> index_;
};

}  // namespace agreesum
