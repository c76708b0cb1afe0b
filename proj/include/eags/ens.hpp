#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "eags/autodiff.hpp"
#include "eags/corpus.hpp"
#include "eags/model.hpp"

namespace eags {

// Per-step masking quotas for the forward process: floor(n/T) each, with the
// remainder given one extra position at a time to the earliest steps.
// quotas[s - 1] is the number of positions newly masked at step s.
std::vector<std::size_t> step_quotas(std::size_t n, std::size_t T);

struct NoiseConfig {
  std::size_t T = 4;
  std::size_t L = 12;

  void validate() const;
  std::vector<std::size_t> quotas() const { return step_quotas(L, T); }
};

inline constexpr std::size_t kNeverMasked = std::numeric_limits<std::size_t>::max();

// Materialized forward plan: which X positions are absorbed into MASK at
// which step. Positions outside the plan (PAD) keep kNeverMasked.
struct MaskTrajectory {
  std::size_t T = 0;
  std::vector<std::size_t> order;    // planned positions, ascending entropy
  std::vector<std::size_t> step_of;  // per X position, 1..T or kNeverMasked
  std::vector<std::size_t> quotas;   // per step, sums to order.size()

  // X positions masked in X^(t), ascending.
  std::vector<std::size_t> masked_at(std::size_t t) const;
  // masked_at(t) \ masked_at(t - 1), ascending. t in 1..T.
  std::vector<std::size_t> delta(std::size_t t) const;
};

// Sorts the planned positions by ascending entropy (ties: lower index) and
// assigns the t-th quota block to step t. `planned` defaults to every
// position of `entropy`.
MaskTrajectory plan_trajectory(std::span<const double> entropy, std::size_t T,
                               std::span<const std::size_t> planned = {});

// X^(t): MASK exactly where step_of <= t, everything else from x0.
// Throws InputError for t > T and when x0 already holds MASK in X.
TokenSeq apply_forward(const TokenSeq& x0, const MaskTrajectory& traj, std::size_t t);

// Mean over the delta set D = masks(t+1) \ masks(t) of -log p(x0_i | X^(t+1)),
// on the graph so gradients reach params. Throws InvariantError on an empty
// delta set and InputError for t >= T. A non-null dropout_rng turns on
// training-mode dropout.
nn::Var diffusion_loss(nn::Graph& g, ModelParams& params, const TokenSeq& x0, const MaskTrajectory& traj,
                       std::size_t t, Rng* dropout_rng = nullptr);
double diffusion_loss_value(const ModelParams& params, const TokenSeq& x0, const MaskTrajectory& traj, std::size_t t);

// Leave-one-out entropies of every X position of the clean sequence under the
// (frozen) entropy model; PAD positions get 0.
std::vector<double> clean_entropies(const ModelParams& entropy_model, const TokenSeq& x0);

// One clean_entropies row per corpus pair.
std::vector<std::vector<double>> compute_entropy_cache(const ModelParams& entropy_model,
                                                       std::span<const CondPair> corpus, std::size_t L);

struct EnsConfig {
  NoiseConfig noise;
  int epochs = 20;
  double lr = 1e-3;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  bool use_adam = true;
};

// Algorithm: per example, plan the trajectory from its cached clean-sequence
// entropies, draw t uniformly from the steps whose delta set is non-empty
// (all of [0, T) when every quota is positive), accumulate diffusion_loss,
// step the optimizer per batch. When `entropy_cache` is empty it is computed
// from entropy_model.
TrainingLog train_ens(ModelParams& params, std::span<const CondPair> corpus, const ModelParams& entropy_model,
                      const EnsConfig& cfg, std::vector<std::vector<double>> entropy_cache = {},
                      const EpochCallback& on_epoch = {});

}  // namespace eags
