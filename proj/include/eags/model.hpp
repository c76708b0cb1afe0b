#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "eags/autodiff.hpp"
#include "eags/corpus.hpp"
#include "eags/rng.hpp"
#include "eags/tensor.hpp"

namespace eags {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_ff = 128;
  std::size_t max_positions = 64;
  double dropout = 0.0;

  // Throws InputError on inconsistent fields.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Weights of the bidirectional masked LM: token and position embeddings,
// pre-LayerNorm encoder blocks, final LayerNorm and the output projection.
class ModelParams {
 public:
  ModelParams() = default;

  // Small random init (N(0, 0.02) embeddings, scaled normal projections,
  // unit LayerNorm gains), fully determined by the seed.
  static ModelParams init(const ModelConfig& config, std::uint64_t seed);
  static ModelParams zeros(const ModelConfig& config);
  // Rebuilds from named tensors (checkpoint loading); names and shapes must
  // match the layout implied by config.
  static ModelParams from_tensors(const ModelConfig& config, std::vector<std::string> names,
                                  std::vector<nn::Tensor> tensors);

  const ModelConfig& config() const { return config_; }
  std::span<nn::Tensor> tensors() { return tensors_; }
  std::span<const nn::Tensor> tensors() const { return tensors_; }
  const std::vector<std::string>& names() const { return names_; }
  const nn::Tensor& tensor(std::string_view name) const;
  nn::Tensor& tensor(std::string_view name);
  std::size_t parameter_count() const;

  void zero_grad();
  bool all_finite() const;

  // Bitwise comparison of configs and values (gradients ignored).
  bool same_values(const ModelParams& other) const;

 private:
  ModelConfig config_;
  std::vector<std::string> names_;
  std::vector<nn::Tensor> tensors_;
};

struct ForwardOptions {
  bool training = false;  // enables dropout
  Rng* dropout_rng = nullptr;
  // Rows of the output projection to compute; empty = every position.
  std::span<const std::size_t> output_rows = {};
};

// Logits [rows x V] on a graph. The mutable overload binds parameters so that
// Graph::backward fills their gradients.
nn::Var forward_logits(nn::Graph& g, ModelParams& params, std::span<const int> ids, const ForwardOptions& opt = {});
nn::Var forward_logits(nn::Graph& g, const ModelParams& params, std::span<const int> ids,
                       const ForwardOptions& opt = {});

// Eval-mode logits for every position, [L_total x V]. Throws InputError when
// the sequence is longer than max_positions or holds out-of-range ids.
nn::Tensor logits(const ModelParams& params, std::span<const int> ids);
nn::Tensor logits(const ModelParams& params, const TokenSeq& seq);

// 1 for content ids (>= kNumSpecial), 0 for specials.
std::vector<std::uint8_t> content_support(std::size_t vocab_size);

// softmax(row / temperature) over content tokens; specials get exactly 0.
std::vector<double> distribution_from_logits(std::span<const double> logit_row, double temperature);

// `position` indexes the full [Y, SEP, X] layout.
std::vector<double> token_distribution(const ModelParams& params, const TokenSeq& seq, std::size_t position,
                                       double temperature);

// ---- phase-1 masked LM training ----------------------------------------------

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double accuracy = 0.0;  // argmax accuracy on the loss positions
  std::size_t positions = 0;
};

struct TrainingLog {
  std::vector<EpochStats> epochs;
};

struct PretrainConfig {
  std::size_t L = 12;
  double mask_ratio = 0.15;
  int epochs = 10;
  double lr = 1e-3;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  bool use_adam = true;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Standard MLM training: each example masks max(1, round(mask_ratio * n))
// uniformly chosen target positions and takes cross-entropy on them.
// Throws InputError for mask_ratio outside (0, 1).
TrainingLog pretrain_mlm(ModelParams& params, std::span<const CondPair> corpus, const PretrainConfig& cfg,
                         const EpochCallback& on_epoch = {});

// Masked-token argmax accuracy with a fresh draw of masks (eval mode).
double masked_accuracy(const ModelParams& params, std::span<const CondPair> corpus, std::size_t L, double mask_ratio,
                       std::uint64_t seed);

// ---- checkpoints ---------------------------------------------------------------

// Textual manifest (meta, configs, tensor names, shapes, byte offsets) then the
// raw little-endian doubles. load(save(x)) is bit-identical.
struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, ModelParams>> models;

  const ModelParams& model(std::string_view name) const;
  std::string meta_value(std::string_view key, std::string_view fallback = {}) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace eags
