#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "eags/corpus.hpp"
#include "eags/model.hpp"

namespace eags {

// Positions in this module are indices into the target region X (0..L-1),
// not into the full [Y, SEP, X] layout.

enum class EnergyMode {
  exact,        // one forward pass per position with that position masked
  single_pass,  // APPROXIMATE: logits of the unmasked sequence, one pass
};

struct EnergyReport {
  std::vector<std::size_t> positions;         // X positions included
  std::vector<double> per_position_log_potential;
  double total_energy = 0.0;                  // -sum of the log-potentials
  int timestep = 0;
  EnergyMode mode = EnergyMode::exact;
};

struct EntropyProfile {
  std::vector<double> entropy;          // nats, per X position; 0 where not eligible
  std::vector<std::size_t> eligible;    // ascending
  std::vector<std::size_t> selected;    // ascending
  double threshold = 0.0;               // entropy of the last selected position
  std::size_t requested_k = 0;
  bool clamped = false;                 // requested_k exceeded |eligible|
};

// Logit rows [positions x V] where row r was computed with X position
// positions[r] replaced by MASK (everything else as in seq).
nn::Tensor leave_one_out_logits(const ModelParams& params, const TokenSeq& seq,
                                std::span<const std::size_t> positions);

// Raw logit of the token at X position i with that position masked.
// Throws InputError when i is outside X or holds MASK/PAD.
double log_potential(const ModelParams& params, const TokenSeq& seq, std::size_t i);

// E = -sum of log-potentials over non-PAD X positions. MASK positions are an
// error unless skip_masked is set, in which case they are left out.
EnergyReport sequence_energy(const ModelParams& params, const TokenSeq& seq, EnergyMode mode = EnergyMode::exact,
                             bool skip_masked = false);

// Entropy (nats) of the content-token softmax of one logit row.
double entropy_from_logits(std::span<const double> logit_row);

// Top-k highest entropies among eligible positions; ties go to the lowest
// index. k is clamped to |eligible| (recorded in the profile).
EntropyProfile select_top_entropy(std::span<const double> entropy, std::span<const std::size_t> eligible,
                                  std::size_t top_k);

// One forward pass on seq, entropies at eligible positions, then
// select_top_entropy. Throws InputError for top_k == 0 or empty eligible.
EntropyProfile entropy_profile(const ModelParams& params, const TokenSeq& seq, std::span<const std::size_t> eligible,
                               std::size_t top_k);

}  // namespace eags
