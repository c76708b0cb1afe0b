#include "eags/cmrf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eags/error.hpp"

namespace eags {

nn::Tensor leave_one_out_logits(const ModelParams& params, const TokenSeq& seq,
                                std::span<const std::size_t> positions) {
  const std::size_t V = params.config().vocab_size;
  nn::Tensor out = nn::Tensor::matrix(positions.size(), V);
  std::vector<int> ids = seq.ids;
  for (std::size_t r = 0; r < positions.size(); ++r) {
    const std::size_t abs = seq.x_begin + positions[r];
    if (positions[r] >= seq.x_len()) throw InputError("leave_one_out_logits: position outside target region");
    const int saved = ids[abs];
    ids[abs] = kMask;
    const std::size_t rows[] = {abs};
    nn::Graph g(false);
    const nn::Tensor& z = forward_logits(g, params, ids, {.output_rows = rows}).value();
    std::copy(z.data.begin(), z.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(r * V));
    ids[abs] = saved;
  }
  return out;
}

double log_potential(const ModelParams& params, const TokenSeq& seq, std::size_t i) {
  if (i >= seq.x_len()) throw InputError("log_potential: position " + std::to_string(i) + " outside target region");
  const int tok = seq.x(i);
  if (tok == kMask || tok == kPad)
    throw InputError("log_potential: position " + std::to_string(i) + " holds no content token");
  const std::size_t pos[] = {i};
  return leave_one_out_logits(params, seq, pos).data[static_cast<std::size_t>(tok)];
}

EnergyReport sequence_energy(const ModelParams& params, const TokenSeq& seq, EnergyMode mode, bool skip_masked) {
  EnergyReport rep;
  rep.mode = mode;
  rep.timestep = seq.timestep;
  for (std::size_t i = 0; i < seq.x_len(); ++i) {
    const int tok = seq.x(i);
    if (tok == kPad) continue;
    if (tok == kMask) {
      if (skip_masked) continue;
      throw InputError("sequence_energy: MASK at target position " + std::to_string(i));
    }
    rep.positions.push_back(i);
  }
  const std::size_t V = params.config().vocab_size;
  if (mode == EnergyMode::exact) {
    const nn::Tensor z = leave_one_out_logits(params, seq, rep.positions);
    for (std::size_t r = 0; r < rep.positions.size(); ++r)
      rep.per_position_log_potential.push_back(z.data[r * V + static_cast<std::size_t>(seq.x(rep.positions[r]))]);
  } else {
    const nn::Tensor z = logits(params, seq);
    for (std::size_t i : rep.positions)
      rep.per_position_log_potential.push_back(z.data[(seq.x_begin + i) * V + static_cast<std::size_t>(seq.x(i))]);
  }
  double s = 0.0;
  for (double lp : rep.per_position_log_potential) s += lp;
  rep.total_energy = -s;
  return rep;
}

double entropy_from_logits(std::span<const double> logit_row) {
  const std::vector<double> p = distribution_from_logits(logit_row, 1.0);
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return std::max(0.0, h);
}

EntropyProfile select_top_entropy(std::span<const double> entropy, std::span<const std::size_t> eligible,
                                  std::size_t top_k) {
  if (top_k == 0) throw InputError("entropy_profile: top_k must be >= 1");
  if (eligible.empty()) throw InputError("entropy_profile: no eligible positions");
  EntropyProfile prof;
  prof.entropy.assign(entropy.size(), 0.0);
  prof.eligible.assign(eligible.begin(), eligible.end());
  std::sort(prof.eligible.begin(), prof.eligible.end());
  for (std::size_t i : prof.eligible) {
    if (i >= entropy.size()) throw InputError("entropy_profile: eligible index out of range");
    prof.entropy[i] = entropy[i];
  }
  prof.requested_k = top_k;
  prof.clamped = top_k > prof.eligible.size();
  const std::size_t k = std::min(top_k, prof.eligible.size());

  std::vector<std::size_t> ranked = prof.eligible;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](std::size_t a, std::size_t b) { return entropy[a] > entropy[b]; });
  prof.selected.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k));
  prof.threshold = entropy[prof.selected.back()];
  std::sort(prof.selected.begin(), prof.selected.end());
  return prof;
}

EntropyProfile entropy_profile(const ModelParams& params, const TokenSeq& seq, std::span<const std::size_t> eligible,
                               std::size_t top_k) {
  if (top_k == 0) throw InputError("entropy_profile: top_k must be >= 1");
  if (eligible.empty()) throw InputError("entropy_profile: no eligible positions");
  const nn::Tensor z = logits(params, seq);
  const std::size_t V = z.cols();
  std::vector<double> h(seq.x_len(), 0.0);
  for (std::size_t i : eligible) {
    if (i >= seq.x_len()) throw InputError("entropy_profile: eligible index out of range");
    h[i] = entropy_from_logits(std::span<const double>(z.data).subspan((seq.x_begin + i) * V, V));
  }
  return select_top_entropy(h, eligible, top_k);
}

}  // namespace eags
