#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace eags {

// Fixed ids of the special tokens; content tokens start at kNumSpecial.
inline constexpr int kMask = 0;
inline constexpr int kPad = 1;
inline constexpr int kSep = 2;
inline constexpr int kUnk = 3;
inline constexpr int kNumSpecial = 4;

enum class Granularity { word, character };

Granularity parse_granularity(std::string_view s);
std::string_view to_string(Granularity g);

class Vocab {
 public:
  // Specials first, then tokens with frequency >= min_freq ordered by
  // frequency (descending) and then lexicographically.
  static Vocab build(std::span<const std::string> corpus_lines, Granularity granularity, int min_freq);
  // One token per line; the first four lines must be the specials.
  static Vocab load(const std::filesystem::path& path, Granularity granularity);
  static Vocab from_tokens(std::vector<std::string> tokens, Granularity granularity);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return id_to_token_.size(); }
  std::size_t content_size() const { return size() - kNumSpecial; }
  Granularity granularity() const { return granularity_; }

  // kUnk for unknown tokens.
  int id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;
  static bool is_special(int id) { return id >= 0 && id < kNumSpecial; }

  std::vector<std::string> tokenize(std::string_view text) const;
  std::vector<int> encode(std::string_view text) const;
  std::string decode(std::span<const int> ids) const;

  // 1 for content tokens, 0 for specials; the support of every sampling
  // distribution.
  const std::vector<std::uint8_t>& content_mask() const { return content_mask_; }

  const std::vector<std::string>& tokens() const { return id_to_token_; }

 private:
  Vocab(std::vector<std::string> tokens, Granularity granularity);

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::uint8_t> content_mask_;
  Granularity granularity_ = Granularity::word;
};

// One raw `condition<TAB>target` line.
struct RawPair {
  std::string condition;
  std::string target;
  std::size_t line = 0;  // 1-based line number in the source file
};

struct CondPair {
  std::vector<int> condition;  // Y
  std::vector<int> target;     // X, unpadded
  std::string raw_condition;
  std::string raw_target;
};

struct EncodeLimits {
  std::size_t max_condition = 64;
  std::size_t max_target = 64;
};

// Throws InputError when either side exceeds its limit or is empty on the
// target side.
CondPair encode_pair(std::string_view raw_condition, std::string_view raw_target, const Vocab& vocab,
                     const EncodeLimits& limits = {});

// Encodes every pair; errors name the source line.
std::vector<CondPair> encode_pairs(std::span<const RawPair> raw, const Vocab& vocab, const EncodeLimits& limits);

// Splits on the first TAB. Empty lines are skipped, CRLF is accepted.
std::vector<RawPair> load_tsv(const std::filesystem::path& path);
std::vector<RawPair> parse_tsv(std::string_view text, std::string_view source_name = "<memory>");

// All condition and target strings of a corpus, for build_vocab.
std::vector<std::string> corpus_lines(std::span<const RawPair> pairs);

// Layout [Y, SEP, X] with per-position flags.
struct TokenSeq {
  std::vector<int> ids;
  std::vector<std::uint8_t> is_condition;
  std::vector<std::uint8_t> is_fixed;
  int timestep = 0;
  std::size_t x_begin = 0;  // first target position

  std::size_t size() const { return ids.size(); }
  std::size_t x_len() const { return ids.size() - x_begin; }
  int x(std::size_t i) const { return ids[x_begin + i]; }
  std::vector<int> target_ids() const;
  std::size_t count_masked() const;
};

// Clean sequence: X = target padded with PAD to length L. PAD positions are
// fixed; content target positions are free.
TokenSeq make_clean_sequence(std::span<const int> condition, std::span<const int> target, std::size_t L);
// Fully masked X of length L, nothing fixed in X.
TokenSeq make_masked_sequence(std::span<const int> condition, std::size_t L);

// Throws InvariantError unless: condition positions are fixed, no fixed
// position holds MASK, flag vectors match ids in length, SEP sits at
// x_begin - 1.
void validate(const TokenSeq& seq);

}  // namespace eags
