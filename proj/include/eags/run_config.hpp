#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

namespace eags {

// Every knob of every command. Resolved as defaults < config file < flags.
struct RunConfig {
  // data
  std::string corpus;
  std::string ckpt = "model.ckpt";
  std::string vocab;  // default: <ckpt>.vocab
  std::string granularity = "word";
  std::size_t min_freq = 1;
  std::size_t max_condition = 32;
  // schedule
  std::size_t T = 4;
  std::size_t L = 12;
  // model
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_ff = 128;
  std::size_t max_positions = 64;
  double dropout = 0.0;
  // training
  std::size_t pretrain_epochs = 10;
  std::size_t epochs = 20;
  double lr = 1e-3;
  std::size_t batch_size = 16;
  double mask_ratio = 0.15;
  std::string optimizer = "adam";
  std::uint64_t seed = 1;
  // generation
  std::string conditions;
  std::string keywords;
  std::string out;
  std::string trace;
  std::string mode = "eags";
  std::size_t n_candidates = 20;
  std::size_t n_keep = 5;
  double temperature = 1.0;
  bool greedy = false;
  std::size_t threads = 1;
  std::string scorer = "mlm";  // mlm (phase-1 model) or denoiser
  // evaluation
  std::string input;
  std::string compare;
  std::size_t vendi_n = 2;
  std::size_t bleu_max_n = 4;
  // synthetic corpus
  std::size_t pairs = 2000;

  bool operator==(const RunConfig&) const = default;

  // key=value lines in field order; parse_config_text(to_text()) == *this.
  std::string to_text() const;
  std::map<std::string, std::string> to_kv() const;
  // Applies key=value pairs; unknown keys and unparsable values throw InputError.
  void apply(const std::map<std::string, std::string>& kv);
};

static_assert(std::is_same_v<std::uint64_t, std::size_t>);
using RunConfigField =
    std::variant<std::string RunConfig::*, std::size_t RunConfig::*, double RunConfig::*, bool RunConfig::*>;

struct RunConfigFieldInfo {
  const char* key;
  RunConfigField field;
  const char* help;
};

const std::vector<RunConfigFieldInfo>& run_config_fields();

// `key=value` per line; blank lines and `#` comments ignored.
std::map<std::string, std::string> parse_config_text(std::string_view text);
RunConfig parse_run_config(std::string_view text);

}  // namespace eags
