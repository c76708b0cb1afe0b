#include "eags/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "eags/ens.hpp"
#include "eags/error.hpp"

namespace eags {

SelectionMode parse_selection_mode(std::string_view s) {
  if (s == "eags") return SelectionMode::eags;
  if (s == "random_order") return SelectionMode::random_order;
  if (s == "lowest_entropy_first") return SelectionMode::lowest_entropy_first;
  if (s == "one_shot") return SelectionMode::one_shot;
  throw InputError("unknown mode '" + std::string(s) +
                   "' (expected eags, random_order, lowest_entropy_first, one_shot)");
}

std::string_view to_string(SelectionMode m) {
  switch (m) {
    case SelectionMode::eags: return "eags";
    case SelectionMode::random_order: return "random_order";
    case SelectionMode::lowest_entropy_first: return "lowest_entropy_first";
    case SelectionMode::one_shot: return "one_shot";
  }
  return "?";
}

void SampleConfig::validate() const {
  if (T == 0) throw InputError("sampling: T must be >= 1");
  if (L == 0) throw InputError("sampling: L must be >= 1");
  if (!(temperature > 0.0)) throw InputError("sampling: temperature must be > 0");
  if (n_candidates == 0) throw InputError("sampling: n_candidates must be >= 1");
  if (n_keep == 0 || n_keep > n_candidates) throw InputError("sampling: need 1 <= n_keep <= n_candidates");
  if (threads == 0) throw InputError("sampling: threads must be >= 1");
}

double pseudo_perplexity(const ModelParams& params, const TokenSeq& seq) {
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < seq.x_len(); ++i) {
    if (seq.x(i) == kMask) throw InputError("pseudo_perplexity: MASK at target position " + std::to_string(i));
    if (seq.x(i) != kPad) positions.push_back(i);
  }
  if (positions.empty()) throw InputError("pseudo_perplexity: no target tokens");
  const nn::Tensor z = leave_one_out_logits(params, seq, positions);
  const std::size_t V = z.cols();
  double nll = 0.0;
  for (std::size_t r = 0; r < positions.size(); ++r) {
    const auto row = std::span<const double>(z.data).subspan(r * V, V);
    // log-softmax over content tokens, computed directly so tiny
    // probabilities do not underflow to log(0).
    double mx = -INFINITY;
    for (std::size_t j = kNumSpecial; j < V; ++j) mx = std::max(mx, row[j]);
    double s = 0.0;
    for (std::size_t j = kNumSpecial; j < V; ++j) s += std::exp(row[j] - mx);
    nll += mx + std::log(s) - row[static_cast<std::size_t>(seq.x(positions[r]))];
  }
  return std::exp(nll / static_cast<double>(positions.size()));
}

double pseudo_perplexity(const ModelParams& params, std::span<const int> condition, std::span<const int> x) {
  return pseudo_perplexity(params, make_clean_sequence(condition, x, x.size()));
}

void validate_keywords(std::span<const KeywordSpan> keywords, std::size_t L, std::size_t vocab_size) {
  std::vector<std::uint8_t> used(L, 0);
  for (const KeywordSpan& k : keywords) {
    if (k.tokens.empty()) throw InputError("keyword at position " + std::to_string(k.position) + " is empty");
    if (k.position >= L || k.tokens.size() > L - k.position)
      throw InputError("keyword at position " + std::to_string(k.position) + " does not fit in L=" + std::to_string(L));
    for (std::size_t j = 0; j < k.tokens.size(); ++j) {
      const int tok = k.tokens[j];
      if (tok < kNumSpecial || static_cast<std::size_t>(tok) >= vocab_size)
        throw InputError("keyword at position " + std::to_string(k.position) + " holds a non-content token");
      if (used[k.position + j]) throw InputError("keyword spans overlap at position " + std::to_string(k.position + j));
      used[k.position + j] = 1;
    }
  }
}

namespace {

int sample_token(std::span<const double> p, bool greedy, Rng& rng) {
  if (greedy) {
    return static_cast<int>(std::max_element(p.begin() + kNumSpecial, p.end()) - p.begin());
  }
  const double u = rng.uniform();
  double c = 0.0;
  int last = kNumSpecial;
  for (std::size_t j = kNumSpecial; j < p.size(); ++j) {
    if (p[j] <= 0.0) continue;
    c += p[j];
    last = static_cast<int>(j);
    if (u < c) return last;
  }
  return last;  // rounding: u landed past the accumulated mass
}

std::vector<std::size_t> select_positions(SelectionMode mode, std::span<const double> entropy,
                                          const std::vector<std::size_t>& masked, std::size_t k, Rng& rng) {
  switch (mode) {
    case SelectionMode::eags:
      return select_top_entropy(entropy, masked, k).selected;
    case SelectionMode::lowest_entropy_first: {
      std::vector<std::size_t> ranked = masked;
      std::stable_sort(ranked.begin(), ranked.end(),
                       [&](std::size_t a, std::size_t b) { return entropy[a] < entropy[b]; });
      ranked.resize(k);
      std::sort(ranked.begin(), ranked.end());
      return ranked;
    }
    case SelectionMode::random_order: {
      std::vector<std::size_t> pool = masked;
      for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
      pool.resize(k);
      std::sort(pool.begin(), pool.end());
      return pool;
    }
    case SelectionMode::one_shot:
      return masked;
  }
  return {};
}

}  // namespace

GenerationTrace run_chain(const ModelParams& model, std::span<const int> condition,
                          std::span<const KeywordSpan> keywords, const SampleConfig& cfg, std::size_t index) {
  cfg.validate();
  const std::size_t V = model.config().vocab_size;
  validate_keywords(keywords, cfg.L, V);
  Rng rng = Rng::stream(cfg.seed, "candidate", index);
  Rng completion_rng = Rng::stream(cfg.seed, "trace-completion", index);

  TokenSeq seq = make_masked_sequence(condition, cfg.L);
  for (const KeywordSpan& k : keywords)
    for (std::size_t j = 0; j < k.tokens.size(); ++j) {
      seq.ids[seq.x_begin + k.position + j] = k.tokens[j];
      seq.is_fixed[seq.x_begin + k.position + j] = 1;
    }

  const std::size_t T = cfg.effective_T();
  const std::vector<std::size_t> quotas = step_quotas(seq.count_masked(), T);
  GenerationTrace trace;
  trace.candidate = index;
  trace.condition.assign(condition.begin(), condition.end());
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::size_t expected_masked = seq.count_masked();
  for (std::size_t t = T; t >= 1; --t) {
    seq.timestep = static_cast<int>(t);
    StepRecord rec;
    rec.t = static_cast<int>(t);
    rec.state = seq.target_ids();
    for (std::size_t i = 0; i < seq.x_len(); ++i)
      if (seq.x(i) == kMask) rec.masked.push_back(i);
    rec.n_masked = rec.masked.size();
    if (rec.n_masked != expected_masked)
      throw InvariantError("sampler: " + std::to_string(rec.n_masked) + " masks at t=" + std::to_string(t) +
                           ", schedule says " + std::to_string(expected_masked));

    const nn::Tensor z = logits(model, seq);
    auto row = [&](std::size_t i) { return std::span<const double>(z.data).subspan((seq.x_begin + i) * V, V); };
    rec.entropy.assign(seq.x_len(), 0.0);
    for (std::size_t i : rec.masked) {
      rec.entropy[i] = entropy_from_logits(row(i));
      rec.total_entropy += rec.entropy[i];
    }

    rec.total_energy = nan;
    if (cfg.trace_energy) {
      TokenSeq completed = seq;
      for (std::size_t i : rec.masked)
        completed.ids[seq.x_begin + i] =
            sample_token(distribution_from_logits(row(i), cfg.temperature), cfg.greedy, completion_rng);
      rec.total_energy = sequence_energy(model, completed).total_energy;
    }

    const std::size_t k = quotas[t - 1];
    if (k > 0) {
      rec.selected = select_positions(cfg.mode, rec.entropy, rec.masked, k, rng);
      for (std::size_t i : rec.selected) {
        const int tok = sample_token(distribution_from_logits(row(i), cfg.temperature), cfg.greedy, rng);
        seq.ids[seq.x_begin + i] = tok;
        seq.is_fixed[seq.x_begin + i] = 1;
        rec.sampled.push_back(tok);
      }
    }
    expected_masked -= k;
    trace.steps.push_back(std::move(rec));
  }

  seq.timestep = 0;
  validate(seq);
  if (seq.count_masked() != 0) throw InvariantError("sampler: masks remain after the final step");
  trace.output = seq.target_ids();
  trace.final_energy = cfg.trace_energy ? sequence_energy(model, seq).total_energy : nan;
  return trace;
}

std::vector<GenerationTrace> run_candidates(const ModelParams& model, const ModelParams& scorer,
                                            std::span<const int> condition, std::span<const KeywordSpan> keywords,
                                            const SampleConfig& cfg) {
  cfg.validate();
  std::vector<GenerationTrace> out(cfg.n_candidates);
  auto work = [&](std::size_t i) {
    out[i] = run_chain(model, condition, keywords, cfg, i);
    out[i].pseudo_ppl = pseudo_perplexity(scorer, condition, out[i].output);
  };
  const std::size_t workers = std::min(cfg.threads, cfg.n_candidates);
  if (workers <= 1) {
    for (std::size_t i = 0; i < cfg.n_candidates; ++i) work(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < cfg.n_candidates; i += workers) work(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (std::thread& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

std::vector<GenerationTrace> select_best(std::vector<GenerationTrace> candidates, std::size_t n_keep) {
  std::stable_sort(candidates.begin(), candidates.end(), [](const GenerationTrace& a, const GenerationTrace& b) {
    if (a.pseudo_ppl != b.pseudo_ppl) return a.pseudo_ppl < b.pseudo_ppl;
    return a.candidate < b.candidate;
  });
  if (candidates.size() > n_keep) candidates.resize(n_keep);
  return candidates;
}

std::vector<GenerationTrace> generate(const ModelParams& model, std::span<const int> condition,
                                      const SampleConfig& cfg, const ModelParams* scorer) {
  return infill(model, condition, {}, cfg, scorer);
}

std::vector<GenerationTrace> infill(const ModelParams& model, std::span<const int> condition,
                                    std::span<const KeywordSpan> keywords, const SampleConfig& cfg,
                                    const ModelParams* scorer) {
  return select_best(run_candidates(model, scorer ? *scorer : model, condition, keywords, cfg), cfg.n_keep);
}

std::vector<GenerationTrace> ablation_mode_run(const ModelParams& model, std::span<const int> condition,
                                               SampleConfig cfg, SelectionMode mode, const ModelParams* scorer) {
  cfg.mode = mode;
  return generate(model, condition, cfg, scorer);
}

}  // namespace eags
