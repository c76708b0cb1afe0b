#include "eags/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "eags/error.hpp"

namespace eags {

namespace {

const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> s{"[MASK]", "[PAD]", "[SEP]", "[UNK]"};
  return s;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

// UTF-8 code points; invalid lead bytes are taken as single bytes.
std::vector<std::string> split_chars(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if ((c & 0xE0) == 0xC0) len = 2;
    else if ((c & 0xF0) == 0xE0) len = 3;
    else if ((c & 0xF8) == 0xF0) len = 4;
    len = std::min(len, text.size() - i);
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

std::vector<std::string> tokenize_with(std::string_view text, Granularity g) {
  return g == Granularity::word ? split_words(text) : split_chars(text);
}

}  // namespace

Granularity parse_granularity(std::string_view s) {
  if (s == "word") return Granularity::word;
  if (s == "char" || s == "character") return Granularity::character;
  throw InputError("unknown granularity '" + std::string(s) + "' (expected word or char)");
}

std::string_view to_string(Granularity g) { return g == Granularity::word ? "word" : "char"; }

Vocab::Vocab(std::vector<std::string> tokens, Granularity granularity)
    : id_to_token_(std::move(tokens)), granularity_(granularity) {
  content_mask_.assign(id_to_token_.size(), 1);
  for (int i = 0; i < kNumSpecial; ++i) content_mask_[static_cast<std::size_t>(i)] = 0;
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    auto [it, inserted] = token_to_id_.emplace(id_to_token_[i], static_cast<int>(i));
    if (!inserted) throw InputError("vocab: duplicate token '" + id_to_token_[i] + "'");
  }
}

Vocab Vocab::build(std::span<const std::string> corpus_lines, Granularity granularity, int min_freq) {
  if (corpus_lines.empty()) throw InputError("build_vocab: empty corpus");
  std::map<std::string, long> freq;
  for (const std::string& line : corpus_lines)
    for (std::string& tok : tokenize_with(line, granularity)) ++freq[std::move(tok)];
  for (const std::string& s : special_tokens()) freq.erase(s);

  std::vector<std::pair<std::string, long>> kept;
  for (auto& [tok, n] : freq)
    if (n >= min_freq) kept.emplace_back(tok, n);
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens = special_tokens();
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return Vocab(std::move(tokens), granularity);
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens, Granularity granularity) {
  const auto& sp = special_tokens();
  if (tokens.size() < sp.size() || !std::equal(sp.begin(), sp.end(), tokens.begin()))
    throw InputError("vocab: the first four entries must be [MASK], [PAD], [SEP], [UNK]");
  return Vocab(std::move(tokens), granularity);
}

Vocab Vocab::load(const std::filesystem::path& path, Granularity granularity) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open vocab file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return from_tokens(std::move(tokens), granularity);
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write vocab file " + path.string());
  for (const std::string& t : id_to_token_) out << t << '\n';
}

int Vocab::id(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const { return token_to_id_.count(std::string(token)) > 0; }

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
    throw InputError("vocab: id " + std::to_string(id) + " out of range");
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::vector<std::string> Vocab::tokenize(std::string_view text) const { return tokenize_with(text, granularity_); }

std::vector<int> Vocab::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const std::string& t : tokenize(text)) ids.push_back(id(t));
  return ids;
}

std::string Vocab::decode(std::span<const int> ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (granularity_ == Granularity::word && i > 0) out += ' ';
    out += token(ids[i]);
  }
  return out;
}

CondPair encode_pair(std::string_view raw_condition, std::string_view raw_target, const Vocab& vocab,
                     const EncodeLimits& limits) {
  CondPair p;
  p.raw_condition = std::string(raw_condition);
  p.raw_target = std::string(raw_target);
  p.condition = vocab.encode(raw_condition);
  p.target = vocab.encode(raw_target);
  if (p.target.empty()) throw InputError("empty target");
  if (p.target.size() > limits.max_target)
    throw InputError("target has " + std::to_string(p.target.size()) + " tokens, maximum is " +
                     std::to_string(limits.max_target));
  if (p.condition.size() > limits.max_condition)
    throw InputError("condition has " + std::to_string(p.condition.size()) + " tokens, maximum is " +
                     std::to_string(limits.max_condition));
  return p;
}

std::vector<CondPair> encode_pairs(std::span<const RawPair> raw, const Vocab& vocab, const EncodeLimits& limits) {
  std::vector<CondPair> out;
  out.reserve(raw.size());
  for (const RawPair& r : raw) {
    try {
      out.push_back(encode_pair(r.condition, r.target, vocab, limits));
    } catch (const InputError& e) {
      throw InputError("line " + std::to_string(r.line) + ": " + e.what() + ": " + r.condition + "\t" + r.target);
    }
  }
  return out;
}

std::vector<RawPair> parse_tsv(std::string_view text, std::string_view source_name) {
  std::vector<RawPair> out;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos)
      throw InputError(std::string(source_name) + ":" + std::to_string(line_no) + ": missing TAB separator");
    out.push_back(RawPair{std::string(line.substr(0, tab)), std::string(line.substr(tab + 1)), line_no});
  }
  return out;
}

std::vector<RawPair> load_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open corpus file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_tsv(ss.str(), path.string());
}

std::vector<std::string> corpus_lines(std::span<const RawPair> pairs) {
  std::vector<std::string> lines;
  lines.reserve(pairs.size() * 2);
  for (const RawPair& p : pairs) {
    lines.push_back(p.condition);
    lines.push_back(p.target);
  }
  return lines;
}

// ---- TokenSeq ----------------------------------------------------------------

std::vector<int> TokenSeq::target_ids() const {
  return {ids.begin() + static_cast<std::ptrdiff_t>(x_begin), ids.end()};
}

std::size_t TokenSeq::count_masked() const {
  return static_cast<std::size_t>(std::count(ids.begin() + static_cast<std::ptrdiff_t>(x_begin), ids.end(), kMask));
}

namespace {

TokenSeq condition_prefix(std::span<const int> condition, std::size_t L) {
  TokenSeq s;
  const std::size_t n = condition.size() + 1 + L;
  s.ids.reserve(n);
  s.ids.assign(condition.begin(), condition.end());
  s.ids.push_back(kSep);
  s.is_condition.assign(n, 0);
  s.is_fixed.assign(n, 0);
  for (std::size_t i = 0; i <= condition.size(); ++i) s.is_condition[i] = s.is_fixed[i] = 1;
  s.x_begin = condition.size() + 1;
  return s;
}

}  // namespace

TokenSeq make_clean_sequence(std::span<const int> condition, std::span<const int> target, std::size_t L) {
  if (target.size() > L)
    throw InputError("target length " + std::to_string(target.size()) + " exceeds L=" + std::to_string(L));
  TokenSeq s = condition_prefix(condition, L);
  for (std::size_t i = 0; i < L; ++i) {
    const int id = i < target.size() ? target[i] : kPad;
    s.ids.push_back(id);
    if (id == kPad) s.is_fixed[s.x_begin + i] = 1;
  }
  s.timestep = 0;
  return s;
}

TokenSeq make_masked_sequence(std::span<const int> condition, std::size_t L) {
  TokenSeq s = condition_prefix(condition, L);
  s.ids.insert(s.ids.end(), L, kMask);
  return s;
}

void validate(const TokenSeq& seq) {
  const std::size_t n = seq.ids.size();
  if (seq.is_condition.size() != n || seq.is_fixed.size() != n)
    throw InvariantError("TokenSeq: flag vectors do not match sequence length");
  if (seq.x_begin == 0 || seq.x_begin > n || seq.ids[seq.x_begin - 1] != kSep)
    throw InvariantError("TokenSeq: SEP must precede the target region");
  for (std::size_t i = 0; i < n; ++i) {
    if (seq.is_condition[i] && !seq.is_fixed[i])
      throw InvariantError("TokenSeq: condition position " + std::to_string(i) + " is not fixed");
    if (seq.is_fixed[i] && seq.ids[i] == kMask)
      throw InvariantError("TokenSeq: fixed position " + std::to_string(i) + " holds MASK");
    if ((i < seq.x_begin) != static_cast<bool>(seq.is_condition[i]))
      throw InvariantError("TokenSeq: condition flag mismatch at " + std::to_string(i));
  }
}

}  // namespace eags
