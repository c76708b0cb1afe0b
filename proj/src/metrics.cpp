#include "eags/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "eags/error.hpp"

namespace eags {

namespace {

using NGram = std::vector<int>;

std::map<NGram, std::size_t> ngram_counts(const TokenList& s, std::size_t n) {
  std::map<NGram, std::size_t> c;
  if (s.size() < n) return c;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++c[NGram(s.begin() + static_cast<std::ptrdiff_t>(i),
                                                          s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return c;
}

}  // namespace

std::vector<double> symmetric_eigenvalues(std::vector<double> a, std::size_t k, double tol, int max_sweeps) {
  if (a.size() != k * k) throw InputError("symmetric_eigenvalues: matrix is not k x k");
  auto at = [&](std::size_t i, std::size_t j) -> double& { return a[i * k + j]; };
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j) off += at(i, j) * at(i, j);
    if (off < tol * tol) break;
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t q = p + 1; q < k; ++q) {
        const double apq = at(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t r = 0; r < k; ++r) {
          const double arp = at(r, p), arq = at(r, q);
          at(r, p) = c * arp - s * arq;
          at(r, q) = s * arp + c * arq;
        }
        for (std::size_t r = 0; r < k; ++r) {
          const double apr = at(p, r), aqr = at(q, r);
          at(p, r) = c * apr - s * aqr;
          at(q, r) = s * apr + c * aqr;
        }
      }
    }
  }
  std::vector<double> ev(k);
  for (std::size_t i = 0; i < k; ++i) ev[i] = at(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

double vendi_ngram(std::span<const TokenList> samples, std::size_t max_n) {
  if (samples.empty()) throw InputError("vendi_ngram: empty sample set");
  if (max_n == 0) throw InputError("vendi_ngram: n must be >= 1");
  const std::size_t k = samples.size();
  // Feature = (order, n-gram); orders are kept apart by the map key length.
  std::vector<std::map<NGram, double>> feats(k);
  for (std::size_t s = 0; s < k; ++s) {
    if (samples[s].size() < max_n)
      throw InputError("vendi_ngram: sample " + std::to_string(s) + " is shorter than n=" + std::to_string(max_n));
    for (std::size_t n = 1; n <= max_n; ++n)
      for (auto& [g, c] : ngram_counts(samples[s], n)) feats[s][g] = static_cast<double>(c);
    double norm = 0.0;
    for (auto& [g, v] : feats[s]) norm += v * v;
    norm = std::sqrt(norm);
    for (auto& [g, v] : feats[s]) v /= norm;
  }
  std::vector<double> K(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i; j < k; ++j) {
      double dot = 0.0;
      for (const auto& [g, v] : feats[i]) {
        auto it = feats[j].find(g);
        if (it != feats[j].end()) dot += v * it->second;
      }
      K[i * k + j] = K[j * k + i] = dot / static_cast<double>(k);
    }
  double h = 0.0;
  for (double lam : symmetric_eigenvalues(std::move(K), k))
    if (lam > 0.0) h -= lam * std::log(lam);
  return std::clamp(std::exp(h), 1.0, static_cast<double>(k));
}

double sentence_bleu(const TokenList& hyp, std::span<const TokenList> refs, std::size_t max_n) {
  if (refs.empty()) throw InputError("bleu: no references");
  if (hyp.empty()) return 0.0;
  const std::size_t orders = std::min(max_n, hyp.size());
  double log_p = 0.0;
  for (std::size_t n = 1; n <= orders; ++n) {
    const auto hc = ngram_counts(hyp, n);
    std::map<NGram, std::size_t> max_ref;
    for (const TokenList& r : refs)
      for (const auto& [g, c] : ngram_counts(r, n)) max_ref[g] = std::max(max_ref[g], c);
    std::size_t clipped = 0, total = 0;
    for (const auto& [g, c] : hc) {
      total += c;
      auto it = max_ref.find(g);
      if (it != max_ref.end()) clipped += std::min(c, it->second);
    }
    if (clipped == 0) return 0.0;
    log_p += std::log(static_cast<double>(clipped) / static_cast<double>(total));
  }
  // Closest reference length, shorter one on ties.
  const auto c = static_cast<double>(hyp.size());
  double r = static_cast<double>(refs.front().size());
  for (const TokenList& ref : refs) {
    const auto len = static_cast<double>(ref.size());
    if (std::abs(len - c) < std::abs(r - c) || (std::abs(len - c) == std::abs(r - c) && len < r)) r = len;
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_p / static_cast<double>(orders));
}

double self_bleu(std::span<const TokenList> samples, std::size_t max_n) {
  if (samples.size() < 2) throw InputError("self_bleu: needs at least 2 samples");
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::vector<TokenList> refs;
    for (std::size_t j = 0; j < samples.size(); ++j)
      if (j != i) refs.push_back(samples[j]);
    total += sentence_bleu(samples[i], refs, max_n);
  }
  return total / static_cast<double>(samples.size());
}

double distinct_n(std::span<const TokenList> samples, std::size_t n) {
  if (n == 0) throw InputError("distinct_n: n must be >= 1");
  std::map<NGram, std::size_t> pooled;
  std::size_t total = 0;
  for (const TokenList& s : samples)
    for (const auto& [g, c] : ngram_counts(s, n)) {
      pooled[g] += c;
      total += c;
    }
  if (total == 0) throw InputError("distinct_n: no " + std::to_string(n) + "-grams in the sample set");
  return static_cast<double>(pooled.size()) / static_cast<double>(total);
}

DiversityReport diversity_report(std::span<const TokenList> samples, std::size_t vendi_n, std::size_t bleu_max_n) {
  DiversityReport r;
  r.vs_ngram = vendi_ngram(samples, vendi_n);
  r.self_bleu = samples.size() >= 2 ? self_bleu(samples, bleu_max_n) : 1.0;
  r.distinct_1 = distinct_n(samples, 1);
  r.distinct_2 = distinct_n(samples, 2);
  return r;
}

TraceSummary summarize_traces(std::span<const GenerationTrace> traces) {
  if (traces.empty()) throw InputError("summarize_traces: no traces");
  const std::size_t T = traces.front().steps.size();
  for (const GenerationTrace& tr : traces)
    if (tr.steps.size() != T) throw InputError("summarize_traces: traces have different step counts");
  TraceSummary sum;
  sum.runs = traces.size();
  const auto n = static_cast<double>(traces.size());
  for (std::size_t s = 0; s < T; ++s) {
    StepSummary st;
    st.t = traces.front().steps[s].t;
    for (const GenerationTrace& tr : traces) {
      st.mean_entropy += tr.steps[s].total_entropy;
      st.mean_energy += tr.steps[s].total_energy;
      st.mean_masked += static_cast<double>(tr.steps[s].n_masked);
    }
    st.mean_entropy /= n;
    st.mean_energy /= n;
    st.mean_masked /= n;
    for (const GenerationTrace& tr : traces) {
      st.std_entropy += (tr.steps[s].total_entropy - st.mean_entropy) * (tr.steps[s].total_entropy - st.mean_entropy);
      st.std_energy += (tr.steps[s].total_energy - st.mean_energy) * (tr.steps[s].total_energy - st.mean_energy);
    }
    st.std_entropy = std::sqrt(st.std_entropy / n);
    st.std_energy = std::sqrt(st.std_energy / n);
    if (!sum.steps.empty()) {
      sum.entropy_nonincreasing = sum.entropy_nonincreasing && st.mean_entropy <= sum.steps.back().mean_entropy;
      sum.energy_nonincreasing = sum.energy_nonincreasing && st.mean_energy <= sum.steps.back().mean_energy;
    }
    sum.steps.push_back(st);
  }
  return sum;
}

}  // namespace eags
