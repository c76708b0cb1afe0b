#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eags/cmrf.hpp"
#include "eags/corpus.hpp"
#include "eags/model.hpp"

namespace eags {

// How each reverse step chooses the positions it denoises.
enum class SelectionMode {
  eags,                  // highest entropy first
  random_order,          // uniform over masked positions (naive Gibbs order)
  lowest_entropy_first,  // reverse of EAGS
  one_shot,              // a single step filling every position
};

SelectionMode parse_selection_mode(std::string_view s);
std::string_view to_string(SelectionMode m);

struct SampleConfig {
  std::size_t T = 4;
  std::size_t L = 12;
  double temperature = 1.0;
  bool greedy = false;  // argmax instead of categorical sampling
  std::size_t n_candidates = 20;
  std::size_t n_keep = 5;
  SelectionMode mode = SelectionMode::eags;
  std::uint64_t seed = 1;
  bool trace_energy = false;  // exact cMRF energy per step (L extra passes per step)
  std::size_t threads = 1;    // candidate-level parallelism; output does not depend on it

  void validate() const;
  std::size_t effective_T() const { return mode == SelectionMode::one_shot ? 1 : T; }
};

// A keyword placed verbatim at X positions [position, position + tokens.size()).
struct KeywordSpan {
  std::size_t position = 0;
  std::vector<int> tokens;
};

struct StepRecord {
  int t = 0;                          // timestep of the state entering the step
  std::vector<int> state;             // X ids entering the step
  std::vector<std::size_t> masked;    // masked X positions entering the step
  std::vector<double> entropy;        // per X position; 0 at fixed positions
  std::vector<std::size_t> selected;  // M_t, ascending
  std::vector<int> sampled;           // token placed at each selected position
  double total_entropy = 0.0;         // sum over masked positions
  // Exact energy of the entering state with its masked positions provisionally
  // completed from this step's distributions; NaN unless trace_energy.
  double total_energy = 0.0;
  std::size_t n_masked = 0;
};

struct GenerationTrace {
  std::size_t candidate = 0;
  std::vector<int> condition;
  std::vector<StepRecord> steps;  // one per reverse step, t = T .. 1
  std::vector<int> output;        // final X ids
  double final_energy = 0.0;      // exact energy of the output; NaN unless trace_energy
  double pseudo_ppl = 0.0;
};

// exp(mean over non-PAD X positions of -log p(x_l | X \ {x_l}, Y)).
// Throws InputError when X holds MASK.
double pseudo_perplexity(const ModelParams& params, const TokenSeq& seq);
double pseudo_perplexity(const ModelParams& params, std::span<const int> condition, std::span<const int> x);

// Checks keyword spans against L: in range, non-overlapping, content tokens.
void validate_keywords(std::span<const KeywordSpan> keywords, std::size_t L, std::size_t vocab_size);

// One reverse chain for candidate `index`, unscored (pseudo_ppl = 0).
GenerationTrace run_chain(const ModelParams& model, std::span<const int> condition,
                          std::span<const KeywordSpan> keywords, const SampleConfig& cfg, std::size_t index);

// Every candidate chain, scored with `scorer`, in candidate order.
std::vector<GenerationTrace> run_candidates(const ModelParams& model, const ModelParams& scorer,
                                            std::span<const int> condition, std::span<const KeywordSpan> keywords,
                                            const SampleConfig& cfg);

// The n_keep traces with the smallest pseudo-perplexity (ties: lower
// candidate index), ascending.
std::vector<GenerationTrace> select_best(std::vector<GenerationTrace> candidates, std::size_t n_keep);

// run_candidates + select_best. scorer == nullptr scores with `model`.
std::vector<GenerationTrace> generate(const ModelParams& model, std::span<const int> condition,
                                      const SampleConfig& cfg, const ModelParams* scorer = nullptr);

std::vector<GenerationTrace> infill(const ModelParams& model, std::span<const int> condition,
                                    std::span<const KeywordSpan> keywords, const SampleConfig& cfg,
                                    const ModelParams* scorer = nullptr);

// generate() under an explicit selection mode.
std::vector<GenerationTrace> ablation_mode_run(const ModelParams& model, std::span<const int> condition,
                                               SampleConfig cfg, SelectionMode mode,
                                               const ModelParams* scorer = nullptr);

}  // namespace eags
