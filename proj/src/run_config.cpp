#include "eags/run_config.hpp"

#include <charconv>
#include <sstream>

#include "eags/error.hpp"

namespace eags {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename Int>
Int parse_unsigned(const std::string& key, const std::string& v) {
  Int out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw InputError("config: " + key + " expects a non-negative integer, got '" + v + "'");
  return out;
}

std::string format(double d) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, r.ptr);
}

}  // namespace

const std::vector<RunConfigFieldInfo>& run_config_fields() {
  static const std::vector<RunConfigFieldInfo> f{
      {"corpus", &RunConfig::corpus, "training corpus, condition<TAB>target per line"},
      {"ckpt", &RunConfig::ckpt, "checkpoint path"},
      {"vocab", &RunConfig::vocab, "vocabulary file (default <ckpt>.vocab)"},
      {"granularity", &RunConfig::granularity, "tokenization: word or char"},
      {"min_freq", &RunConfig::min_freq, "minimum token frequency kept in the vocabulary"},
      {"max_condition", &RunConfig::max_condition, "maximum condition length in tokens"},
      {"T", &RunConfig::T, "number of diffusion steps"},
      {"L", &RunConfig::L, "target region length"},
      {"d_model", &RunConfig::d_model, "model width"},
      {"n_layers", &RunConfig::n_layers, "encoder layers"},
      {"n_heads", &RunConfig::n_heads, "attention heads"},
      {"d_ff", &RunConfig::d_ff, "feed-forward width"},
      {"max_positions", &RunConfig::max_positions, "maximum [Y, SEP, X] length"},
      {"dropout", &RunConfig::dropout, "dropout probability during training"},
      {"pretrain_epochs", &RunConfig::pretrain_epochs, "phase-1 masked LM epochs"},
      {"epochs", &RunConfig::epochs, "phase-2 diffusion epochs"},
      {"lr", &RunConfig::lr, "learning rate"},
      {"batch_size", &RunConfig::batch_size, "examples per optimizer step"},
      {"mask_ratio", &RunConfig::mask_ratio, "phase-1 masking ratio"},
      {"optimizer", &RunConfig::optimizer, "adam or sgd"},
      {"seed", &RunConfig::seed, "root random seed"},
      {"conditions", &RunConfig::conditions, "condition file, one per line"},
      {"keywords", &RunConfig::keywords, "keyword spec file, position:token items per condition line"},
      {"out", &RunConfig::out, "output file (default stdout)"},
      {"trace", &RunConfig::trace, "trace output file"},
      {"mode", &RunConfig::mode, "eags, random_order, lowest_entropy_first or one_shot"},
      {"n_candidates", &RunConfig::n_candidates, "chains sampled per condition"},
      {"n_keep", &RunConfig::n_keep, "lowest pseudo-perplexity chains kept"},
      {"temperature", &RunConfig::temperature, "sampling temperature"},
      {"greedy", &RunConfig::greedy, "argmax decoding instead of sampling"},
      {"threads", &RunConfig::threads, "worker threads for candidate chains"},
      {"scorer", &RunConfig::scorer, "pseudo-perplexity model: mlm or denoiser"},
      {"input", &RunConfig::input, "generation file to evaluate, or trace file to export"},
      {"compare", &RunConfig::compare, "second generation file for a side-by-side comparison"},
      {"vendi_n", &RunConfig::vendi_n, "highest n-gram order in the Vendi kernel"},
      {"bleu_max_n", &RunConfig::bleu_max_n, "highest n-gram order in self-BLEU"},
      {"pairs", &RunConfig::pairs, "pairs emitted by make-corpus"},
  };
  return f;
}

std::map<std::string, std::string> RunConfig::to_kv() const {
  std::map<std::string, std::string> kv;
  for (const auto& info : run_config_fields()) {
    std::visit(
        [&](auto member) {
          const auto& v = this->*member;
          using V = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<V, std::string>) kv[info.key] = v;
          else if constexpr (std::is_same_v<V, double>) kv[info.key] = format(v);
          else if constexpr (std::is_same_v<V, bool>) kv[info.key] = v ? "true" : "false";
          else kv[info.key] = std::to_string(v);
        },
        info.field);
  }
  return kv;
}

std::string RunConfig::to_text() const {
  const auto kv = to_kv();
  std::string out;
  for (const auto& info : run_config_fields()) out += std::string(info.key) + "=" + kv.at(info.key) + "\n";
  return out;
}

void RunConfig::apply(const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    const RunConfigFieldInfo* info = nullptr;
    for (const auto& f : run_config_fields())
      if (key == f.key) info = &f;
    if (!info) throw InputError("config: unknown key '" + key + "'");
    std::visit(
        [&](auto member) {
          auto& v = this->*member;
          using V = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<V, std::string>) {
            v = value;
          } else if constexpr (std::is_same_v<V, double>) {
            char* end = nullptr;
            v = std::strtod(value.c_str(), &end);
            if (value.empty() || end != value.c_str() + value.size())
              throw InputError("config: " + key + " expects a number, got '" + value + "'");
          } else if constexpr (std::is_same_v<V, bool>) {
            if (value == "true" || value == "1") v = true;
            else if (value == "false" || value == "0") v = false;
            else throw InputError("config: " + key + " expects true/false, got '" + value + "'");
          } else {
            v = parse_unsigned<V>(key, value);
          }
        },
        info->field);
  }
}

std::map<std::string, std::string> parse_config_text(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(text)};
  std::size_t no = 0;
  for (std::string line; std::getline(in, line);) {
    ++no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw InputError("config line " + std::to_string(no) + ": expected key=value");
    kv[trim(std::string_view(t).substr(0, eq))] = trim(std::string_view(t).substr(eq + 1));
  }
  return kv;
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig c;
  c.apply(parse_config_text(text));
  return c;
}

}  // namespace eags
