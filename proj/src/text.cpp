#include "agreesum/text.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>

#include "agreesum/error.hpp"
#include "agreesum/hash.hpp"

namespace agreesum {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_word(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) != 0 || u >= 0x80 || c == '\'' || c == '_';
}

constexpr const char* kSpecial[] = {"<pad>", "<s>", "</s>", "<sep>", "<unk>"};

}  // namespace

std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    if (is_word(text[i])) {
      while (j < text.size() && is_word(text[j])) ++j;
    } else {
      while (j < text.size() && !is_space(text[j]) && !is_word(text[j])) ++j;
    }
    out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string> normalized_words(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) != 0 || u >= 0x80) {
      current.push_back(static_cast<char>(std::tolower(u)));
    } else if (c == '\'' && !current.empty()) {
      continue;  // "don't" -> "dont"
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

Vocabulary::Vocabulary() {
  for (const char* s : kSpecial) {
    index_.emplace(s, static_cast<TokenId>(tokens_.size()));
    tokens_.emplace_back(s);
  }
}

Vocabulary Vocabulary::build(std::span<const std::string> texts, int min_count,
                             std::size_t max_size) {
  std::unordered_map<std::string, long> counts;
  for (const auto& t : texts)
    for (auto& tok : split_tokens(t)) ++counts[tok];
  std::vector<std::pair<std::string, long>> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocabulary v;
  for (auto& [tok, n] : sorted) {
    if (v.size() >= max_size) break;
    if (n < min_count) continue;
    if (v.index_.contains(tok)) continue;
    v.index_.emplace(tok, static_cast<TokenId>(v.tokens_.size()));
    v.tokens_.push_back(tok);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kReserved)
    throw ValidationError("vocabulary is missing reserved tokens");
  for (int i = 0; i < kReserved; ++i)
    if (tokens[static_cast<std::size_t>(i)] != kSpecial[i])
      throw ValidationError("vocabulary reserved token mismatch at id " + std::to_string(i));
  Vocabulary v;
  v.tokens_.clear();
  v.index_.clear();
  for (auto& t : tokens) {
    if (!v.index_.emplace(t, static_cast<TokenId>(v.tokens_.size())).second)
      throw ValidationError("duplicate vocabulary token '" + t + "'");
    v.tokens_.push_back(std::move(t));
  }
  return v;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw ArgumentError("token id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& tok : split_tokens(text)) ids.push_back(id(tok));
  return ids;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id == kEos) break;
    if (id == kPad || id == kBos || id == kSep) continue;
    if (!out.empty()) out += ' ';
    out += token(id);
  }
  return out;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = fnv1a("vocab");
  for (const auto& t : tokens_) {
    h = fnv1a(t, h);
    h = fnv1a(std::string_view("\0", 1), h);
  }
  return h;
}

nlohmann::ordered_json Vocabulary::special_tokens_json() const {
  nlohmann::ordered_json j;
  j["pad"] = {{"token", tokens_[kPad]}, {"id", kPad}};
  j["bos"] = {{"token", tokens_[kBos]}, {"id", kBos}};
  j["eos"] = {{"token", tokens_[kEos]}, {"id", kEos}};
  j["separator"] = {{"token", tokens_[kSep]}, {"id", kSep}};
  j["unk"] = {{"token", tokens_[kUnk]}, {"id", kUnk}};
  return j;
}

}  // namespace agreesum
