#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "eags/sampler.hpp"

namespace eags {

using TokenList = std::vector<int>;

// Eigenvalues of a symmetric matrix (row-major, k x k) by cyclic Jacobi
// rotations, ascending.
std::vector<double> symmetric_eigenvalues(std::vector<double> a, std::size_t k, double tol = 1e-12,
                                          int max_sweeps = 100);

// Effective number of distinct samples: exp of the Shannon entropy of the
// eigenvalues of K/k, where K is the cosine similarity of n-gram count
// vectors (orders 1..max_n concatenated). In [1, k].
double vendi_ngram(std::span<const TokenList> samples, std::size_t max_n = 2);

// Corpus-free sentence BLEU against multiple references: geometric mean of
// clipped n-gram precisions (orders 1..max_n, capped at the hypothesis
// length) times the brevity penalty against the closest reference length.
// No smoothing, so any zero precision gives 0.
double sentence_bleu(const TokenList& hypothesis, std::span<const TokenList> references, std::size_t max_n = 4);

// Mean BLEU of each sample against all the others. Needs >= 2 samples.
double self_bleu(std::span<const TokenList> samples, std::size_t max_n = 4);

// Unique n-grams / total n-grams pooled over samples.
double distinct_n(std::span<const TokenList> samples, std::size_t n);

struct DiversityReport {
  double vs_ngram = 0.0;
  double self_bleu = 0.0;
  double distinct_1 = 0.0;
  double distinct_2 = 0.0;
};

DiversityReport diversity_report(std::span<const TokenList> samples, std::size_t vendi_n = 2,
                                 std::size_t bleu_max_n = 4);

struct StepSummary {
  int t = 0;
  double mean_entropy = 0.0, std_entropy = 0.0;
  double mean_energy = 0.0, std_energy = 0.0;
  double mean_masked = 0.0;
};

struct TraceSummary {
  std::size_t runs = 0;
  std::vector<StepSummary> steps;  // t = T .. 1
  bool entropy_nonincreasing = true;
  bool energy_nonincreasing = true;
};

// Per-step means and population standard deviations across traces. Throws
// InputError when the traces differ in step count.
TraceSummary summarize_traces(std::span<const GenerationTrace> traces);

}  // namespace eags
