#include "eags/ens.hpp"

#include <algorithm>
#include <numeric>

#include "eags/cmrf.hpp"
#include "eags/error.hpp"

namespace eags {

std::vector<std::size_t> step_quotas(std::size_t n, std::size_t T) {
  if (T == 0) throw InputError("noise schedule: T must be >= 1");
  std::vector<std::size_t> q(T, n / T);
  for (std::size_t s = 0; s < n % T; ++s) ++q[s];
  return q;
}

void NoiseConfig::validate() const {
  if (T == 0) throw InputError("noise schedule: T must be >= 1");
  if (L == 0) throw InputError("noise schedule: L must be >= 1");
}

std::vector<std::size_t> MaskTrajectory::masked_at(std::size_t t) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < step_of.size(); ++i)
    if (step_of[i] != kNeverMasked && step_of[i] <= t) out.push_back(i);
  return out;
}

std::vector<std::size_t> MaskTrajectory::delta(std::size_t t) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < step_of.size(); ++i)
    if (step_of[i] == t) out.push_back(i);
  return out;
}

MaskTrajectory plan_trajectory(std::span<const double> entropy, std::size_t T, std::span<const std::size_t> planned) {
  MaskTrajectory tr;
  tr.T = T;
  if (planned.empty()) {
    tr.order.resize(entropy.size());
    std::iota(tr.order.begin(), tr.order.end(), 0);
  } else {
    tr.order.assign(planned.begin(), planned.end());
    std::sort(tr.order.begin(), tr.order.end());
    for (std::size_t i : tr.order)
      if (i >= entropy.size()) throw InputError("plan_trajectory: planned index out of range");
  }
  std::stable_sort(tr.order.begin(), tr.order.end(),
                   [&](std::size_t a, std::size_t b) { return entropy[a] < entropy[b]; });
  tr.quotas = step_quotas(tr.order.size(), T);
  tr.step_of.assign(entropy.size(), kNeverMasked);
  std::size_t k = 0;
  for (std::size_t s = 1; s <= T; ++s)
    for (std::size_t q = 0; q < tr.quotas[s - 1]; ++q) tr.step_of[tr.order[k++]] = s;
  return tr;
}

TokenSeq apply_forward(const TokenSeq& x0, const MaskTrajectory& traj, std::size_t t) {
  if (t > traj.T) throw InputError("apply_forward: t=" + std::to_string(t) + " outside [0, " + std::to_string(traj.T) + "]");
  if (traj.step_of.size() != x0.x_len()) throw InputError("apply_forward: trajectory length does not match sequence");
  TokenSeq xt = x0;
  for (std::size_t i = 0; i < x0.x_len(); ++i) {
    if (x0.x(i) == kMask) throw InputError("apply_forward: clean sequence already holds MASK");
    if (traj.step_of[i] != kNeverMasked && traj.step_of[i] <= t) {
      xt.ids[x0.x_begin + i] = kMask;
      xt.is_fixed[x0.x_begin + i] = 0;
    }
  }
  xt.timestep = static_cast<int>(t);
  return xt;
}

namespace {

struct LossInputs {
  TokenSeq noised;
  std::vector<std::size_t> rows;  // absolute positions of the delta set
  std::vector<int> targets;
};

LossInputs loss_inputs(const TokenSeq& x0, const MaskTrajectory& traj, std::size_t t) {
  if (t >= traj.T) throw InputError("diffusion_loss: t must be < T");
  LossInputs in{apply_forward(x0, traj, t + 1), {}, {}};
  for (std::size_t i : traj.delta(t + 1)) {
    in.rows.push_back(x0.x_begin + i);
    in.targets.push_back(x0.x(i));
  }
  if (in.rows.empty())
    throw InvariantError("diffusion_loss: empty delta set at t=" + std::to_string(t) + " (corrupt trajectory)");
  return in;
}

}  // namespace

nn::Var diffusion_loss(nn::Graph& g, ModelParams& params, const TokenSeq& x0, const MaskTrajectory& traj,
                       std::size_t t, Rng* dropout_rng) {
  const LossInputs in = loss_inputs(x0, traj, t);
  nn::Var z = forward_logits(g, params, in.noised.ids,
                             {.training = dropout_rng != nullptr, .dropout_rng = dropout_rng, .output_rows = in.rows});
  const std::vector<double> w(in.rows.size(), 1.0);
  return nn::cross_entropy(z, in.targets, w, content_support(params.config().vocab_size));
}

double diffusion_loss_value(const ModelParams& params, const TokenSeq& x0, const MaskTrajectory& traj, std::size_t t) {
  const LossInputs in = loss_inputs(x0, traj, t);
  nn::Graph g(false);
  nn::Var z = forward_logits(g, params, in.noised.ids, {.output_rows = in.rows});
  const std::vector<double> w(in.rows.size(), 1.0);
  return nn::cross_entropy(z, in.targets, w, content_support(params.config().vocab_size)).value().data[0];
}

std::vector<double> clean_entropies(const ModelParams& entropy_model, const TokenSeq& x0) {
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < x0.x_len(); ++i)
    if (x0.x(i) != kPad) positions.push_back(i);
  const nn::Tensor z = leave_one_out_logits(entropy_model, x0, positions);
  std::vector<double> h(x0.x_len(), 0.0);
  const std::size_t V = z.cols();
  for (std::size_t r = 0; r < positions.size(); ++r)
    h[positions[r]] = entropy_from_logits(std::span<const double>(z.data).subspan(r * V, V));
  return h;
}

std::vector<std::vector<double>> compute_entropy_cache(const ModelParams& entropy_model,
                                                       std::span<const CondPair> corpus, std::size_t L) {
  std::vector<std::vector<double>> cache;
  cache.reserve(corpus.size());
  for (const CondPair& p : corpus) cache.push_back(clean_entropies(entropy_model, make_clean_sequence(p.condition, p.target, L)));
  return cache;
}

TrainingLog train_ens(ModelParams& params, std::span<const CondPair> corpus, const ModelParams& entropy_model,
                      const EnsConfig& cfg, std::vector<std::vector<double>> entropy_cache,
                      const EpochCallback& on_epoch) {
  cfg.noise.validate();
  if (corpus.empty()) throw InputError("train_ens: empty corpus");
  if (cfg.batch_size == 0) throw InputError("train_ens: batch_size must be positive");
  if (entropy_cache.empty()) entropy_cache = compute_entropy_cache(entropy_model, corpus, cfg.noise.L);
  if (entropy_cache.size() != corpus.size()) throw InputError("train_ens: entropy cache does not match corpus");

  // Trajectories depend only on the cached clean entropies.
  std::vector<TokenSeq> clean;
  std::vector<MaskTrajectory> plans;
  std::vector<std::vector<std::size_t>> usable_t;  // steps t with non-empty delta(t+1)
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    clean.push_back(make_clean_sequence(corpus[k].condition, corpus[k].target, cfg.noise.L));
    std::vector<std::size_t> planned;
    for (std::size_t i = 0; i < clean.back().x_len(); ++i)
      if (clean.back().x(i) != kPad) planned.push_back(i);
    plans.push_back(plan_trajectory(entropy_cache[k], cfg.noise.T, planned));
    std::vector<std::size_t> ts;
    for (std::size_t t = 0; t < cfg.noise.T; ++t)
      if (plans.back().quotas[t] > 0) ts.push_back(t);
    usable_t.push_back(std::move(ts));
  }

  nn::Adam adam(cfg.lr);
  params.zero_grad();
  TrainingLog log;
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = Rng::stream(cfg.seed, "ens-epoch", static_cast<std::uint64_t>(epoch));
    Rng drop_rng = Rng::stream(cfg.seed, "ens-dropout", static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng.engine());
    double loss_sum = 0.0;
    std::size_t n = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(e - b);
      for (std::size_t k = b; k < e; ++k) {
        const std::size_t ex = order[k];
        const auto& ts = usable_t[ex];
        const std::size_t t = ts[rng.below(ts.size())];
        nn::Graph g;
        nn::Var loss = diffusion_loss(g, params, clean[ex], plans[ex], t, &drop_rng);
        g.backward(nn::scale(loss, inv_batch));
        loss_sum += loss.value().data[0];
        ++n;
      }
      if (cfg.use_adam) adam.step(params.tensors());
      else nn::sgd_step(params.tensors(), cfg.lr);
    }
    EpochStats st{epoch, loss_sum / static_cast<double>(n), 0.0, n};
    log.epochs.push_back(st);
    if (on_epoch) on_epoch(st);
  }
  return log;
}

}  // namespace eags
