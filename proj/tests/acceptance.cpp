// Acceptance suite: one line per criterion, exit status 0 only when all pass.

#include <sys/wait.h>

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "eags/cmrf.hpp"
#include "eags/corpus.hpp"
#include "eags/ens.hpp"
#include "eags/error.hpp"
#include "eags/metrics.hpp"
#include "eags/model.hpp"
#include "eags/sampler.hpp"
#include "eags/synthetic.hpp"
#include "gradcheck.hpp"

using namespace eags;
namespace fs = std::filesystem;

namespace {

constexpr int kAcceptPretrainEpochs = 15;
constexpr int kAcceptEnsEpochs = 25;
constexpr double kAcceptMaskRatio = 0.15;
constexpr std::size_t kAcceptT = 12;
constexpr std::size_t kAblationPerCondition = 10;

int failures = 0;

void report(const char* id, bool pass, const std::string& what) {
  std::printf("[%s] %s %s\n", pass ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// Two-sided Welch t-test p-value.
double welch_p(const std::vector<double>& a, const std::vector<double>& b) {
  const double va = variance(a) / static_cast<double>(a.size()), vb = variance(b) / static_cast<double>(b.size());
  const double t = (mean(a) - mean(b)) / std::sqrt(va + vb);
  const double df = (va + vb) * (va + vb) /
                    (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

// ---- 1 ---------------------------------------------------------------------

void ac1_forward_structure() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng = Rng::stream(1, "ac1");
  bool ok = true;
  for (int c = 0; c < 200 && ok; ++c) {
    const std::size_t L = 1 + rng.below(24), T = 1 + rng.below(L);
    std::vector<double> h(L);
    for (double& v : h) v = static_cast<double>(rng.below(6)) / 2.0;
    std::vector<int> target(L);
    for (int& t : target) t = kNumSpecial + static_cast<int>(rng.below(50));
    const TokenSeq x0 = make_clean_sequence(std::vector<int>{4, 5}, target, L);
    const MaskTrajectory tr = plan_trajectory(h, T);
    const auto quotas = step_quotas(L, T);
    ok = ok && apply_forward(x0, tr, 0).ids == x0.ids;
    ok = ok && apply_forward(x0, tr, T).count_masked() == L;
    std::size_t total = 0;
    for (std::size_t t = 1; t <= T; ++t) {
      const auto prev = tr.masked_at(t - 1), cur = tr.masked_at(t);
      ok = ok && std::includes(cur.begin(), cur.end(), prev.begin(), prev.end());
      ok = ok && tr.delta(t).size() == quotas[t - 1] && cur.size() == prev.size() + quotas[t - 1];
      total += tr.delta(t).size();
      const TokenSeq xt = apply_forward(x0, tr, t);
      for (std::size_t i = 0; i < L; ++i) ok = ok && (xt.x(i) == kMask) == (tr.step_of[i] <= t);
    }
    ok = ok && total == L && std::accumulate(quotas.begin(), quotas.end(), std::size_t{0}) == L;
  }
  const double s = seconds_since(t0);
  report("AC1", ok && s < 1.0, fmt("forward-process structure over 200 random configurations (%.3f s)", s));
}

// ---- 2 ---------------------------------------------------------------------

struct ChainCheck {
  bool fixed = true, schedule = true, selection = true, specials = true;
};

void check_chain(const GenerationTrace& tr, const SampleConfig& cfg, std::size_t masked0, ChainCheck& c) {
  const std::size_t T = cfg.effective_T();
  const auto quotas = step_quotas(masked0, T);
  if (tr.steps.size() != T) {
    c.schedule = false;
    return;
  }
  for (std::size_t s = 0; s < T; ++s) {
    const StepRecord& r = tr.steps[s];
    const std::size_t t = T - s;
    const std::size_t expect = std::accumulate(quotas.begin(), quotas.begin() + static_cast<std::ptrdiff_t>(t), std::size_t{0});
    c.schedule = c.schedule && r.n_masked == expect && r.selected.size() == quotas[t - 1];
    const auto& next = s + 1 < T ? tr.steps[s + 1].state : tr.output;
    for (std::size_t i = 0; i < r.state.size(); ++i)
      if (r.state[i] != kMask) c.fixed = c.fixed && next[i] == r.state[i];
    if (cfg.mode != SelectionMode::eags || r.selected.empty()) continue;
    double lo = INFINITY;
    std::size_t lo_idx = 0;
    for (std::size_t i : r.selected)
      if (r.entropy[i] < lo || (r.entropy[i] == lo && i > lo_idx)) lo = r.entropy[i], lo_idx = i;
    for (std::size_t i : r.masked) {
      if (std::binary_search(r.selected.begin(), r.selected.end(), i)) continue;
      c.selection = c.selection && (r.entropy[i] < lo || (r.entropy[i] == lo && i > lo_idx));
    }
  }
  for (int id : tr.output) c.specials = c.specials && !Vocab::is_special(id);
}

void ac2_sampler_structure(const ModelConfig& mc, const std::vector<CondPair>& pairs) {
  const auto t0 = std::clock();
  const ModelParams untrained = ModelParams::init(mc, 2024);
  SampleConfig cfg;
  cfg.T = 4;
  cfg.L = 12;
  ChainCheck c;
  for (std::size_t g = 0; g < 500; ++g) {
    cfg.seed = 1000 + g;
    const auto& cond = pairs[g % pairs.size()].condition;
    check_chain(run_chain(untrained, cond, {}, cfg, g), cfg, cfg.L, c);
  }
  const double s = static_cast<double>(std::clock() - t0) / CLOCKS_PER_SEC;
  report("AC2", c.fixed && c.schedule && c.selection && c.specials && s < 30.0,
         fmt("EAGS structure over 500 generations: fixed=%d schedule=%d selection=%d no-specials=%d (%.1f s CPU)",
             c.fixed, c.schedule, c.selection, c.specials, s));
}

// ---- 3 ---------------------------------------------------------------------

void ac3_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string worst_name;
  std::size_t ops = 0;
  auto note = [&](const std::string& name, double err) {
    if (err > worst) worst = err, worst_name = name;
  };
  for (const auto& op : gradcheck::op_cases()) {
    Rng rng = Rng::stream(3, op.name);
    for (int trial = 0; trial < 20; ++trial) {
      auto [inputs, loss] = op.make(rng);
      note(op.name, gradcheck::check(std::move(inputs), loss).max_rel_error);
    }
    ++ops;
  }
  Rng rng = Rng::stream(3, "model");
  for (int trial = 0; trial < 20; ++trial) note("encoder", gradcheck::check_encoder_trial(rng).max_rel_error);
  for (int trial = 0; trial < 20; ++trial) note("diffusion_loss", gradcheck::check_diffusion_loss_trial(rng).max_rel_error);
  const double s = seconds_since(t0);
  report("AC3", worst < 1e-3 && s < 30.0,
         fmt("finite-difference gradients, %zu ops + encoder + diffusion loss, 20 trials each: max rel err %.2e (%s) "
             "(%.1f s)",
             ops, worst, worst_name.c_str(), s));
}

// ---- trained toy model ------------------------------------------------------

struct Trained {
  Vocab vocab;
  std::vector<CondPair> pairs;
  ModelParams denoiser, scorer;
  std::vector<std::vector<int>> conditions;
  double cpu_seconds = 0.0;
  double mlm_loss = 0.0, ens_loss = 0.0;
};

Trained train_toy(int pretrain_epochs, int ens_epochs) {
  const auto c0 = std::clock();
  const auto raw = make_grammar_corpus({2000, 12, 7});
  const auto lines = corpus_lines(raw);
  Vocab vocab = Vocab::build(lines, Granularity::word, 1);
  auto pairs = encode_pairs(raw, vocab, {8, 12});
  ModelConfig mc;
  mc.vocab_size = vocab.size();
  ModelParams mlm = ModelParams::init(mc, Rng::stream(1, "init").next());
  PretrainConfig pc;
  pc.L = 12;
  pc.epochs = pretrain_epochs;
  pc.mask_ratio = kAcceptMaskRatio;
  pc.lr = 1e-3;
  pc.batch_size = 16;
  const TrainingLog pre = pretrain_mlm(mlm, pairs, pc);
  ModelParams denoiser = mlm;
  EnsConfig ec;
  ec.noise = {kAcceptT, 12};
  ec.epochs = ens_epochs;
  ec.lr = 1e-3;
  ec.batch_size = 16;
  const TrainingLog ens = train_ens(denoiser, pairs, mlm, ec);
  Trained t{std::move(vocab), std::move(pairs), std::move(denoiser), std::move(mlm), {}, 0.0, 0.0, 0.0};
  t.cpu_seconds = static_cast<double>(std::clock() - c0) / CLOCKS_PER_SEC;
  t.mlm_loss = pre.epochs.empty() ? 0.0 : pre.epochs.back().mean_loss;
  t.ens_loss = ens.epochs.empty() ? 0.0 : ens.epochs.back().mean_loss;
  for (const std::string& c : grammar_conditions()) t.conditions.push_back(t.vocab.encode(c));
  return t;
}

SampleConfig toy_sampling(std::uint64_t seed) {
  SampleConfig cfg;
  cfg.T = kAcceptT;
  cfg.L = 12;
  cfg.seed = seed;
  return cfg;
}

// ---- 4 ---------------------------------------------------------------------

void ac4_descent(const Trained& t) {
  SampleConfig cfg = toy_sampling(404);
  cfg.trace_energy = true;
  std::vector<double> first_energy, final_energy, first_entropy, last_entropy;
  std::size_t decreased = 0;
  const std::size_t runs = 60;
  for (std::size_t g = 0; g < runs; ++g) {
    const GenerationTrace tr = run_chain(t.denoiser, t.conditions[g % t.conditions.size()], {}, cfg, g);
    first_energy.push_back(tr.steps.front().total_energy);
    final_energy.push_back(tr.final_energy);
    first_entropy.push_back(tr.steps.front().total_entropy);
    last_entropy.push_back(0.0);  // t = 0: nothing left masked
    decreased += tr.final_energy <= tr.steps.front().total_energy;
  }
  const double frac = static_cast<double>(decreased) / static_cast<double>(runs);
  const bool ok = t.cpu_seconds < 600.0 && mean(final_energy) < mean(first_energy) &&
                  mean(last_entropy) < mean(first_entropy) && frac >= 0.85;
  report("AC4", ok,
         fmt("energy/entropy descent over %zu runs: energy %.2f -> %.2f, entropy %.2f -> %.2f, final<=initial in "
             "%.0f%% (training %.0f s CPU)",
             runs, mean(first_energy), mean(final_energy), mean(first_entropy), mean(last_entropy), 100.0 * frac,
             t.cpu_seconds));
}

// ---- 5, 6 --------------------------------------------------------------------

std::vector<double> mode_ppl(const Trained& t, SelectionMode mode, std::size_t per_condition) {
  SampleConfig cfg = toy_sampling(505);
  cfg.mode = mode;
  cfg.n_candidates = per_condition;
  cfg.n_keep = per_condition;
  std::vector<double> out;
  for (const auto& cond : t.conditions)
    for (const GenerationTrace& tr : run_candidates(t.denoiser, t.scorer, cond, {}, cfg)) out.push_back(tr.pseudo_ppl);
  return out;
}

void ac5_ac6_ablation(const Trained& t) {
  const auto eags = mode_ppl(t, SelectionMode::eags, kAblationPerCondition);
  const auto rnd = mode_ppl(t, SelectionMode::random_order, kAblationPerCondition);
  const auto low = mode_ppl(t, SelectionMode::lowest_entropy_first, kAblationPerCondition);
  const auto one = mode_ppl(t, SelectionMode::one_shot, kAblationPerCondition);
  const double p1 = welch_p(eags, rnd), p2 = welch_p(rnd, low), p3 = welch_p(one, eags);
  report("AC5", mean(eags) < mean(rnd) && mean(rnd) < mean(low) && p1 < 0.05 && p2 < 0.05,
         fmt("pseudo-PPL over %zu generations per mode: eags %.3f < random_order %.3f (p=%.2g) < lowest_entropy_first "
             "%.3f (p=%.2g)",
             eags.size(), mean(eags), mean(rnd), p1, mean(low), p2));
  report("AC6", mean(one) > mean(eags) && p3 < 0.05,
         fmt("one_shot pseudo-PPL %.3f > eags %.3f (p=%.2g)", mean(one), mean(eags), p3));
}

// ---- 7 ---------------------------------------------------------------------

void ac7_infill(const Trained& t) {
  Rng rng = Rng::stream(7, "ac7");
  std::size_t outputs = 0, kept = 0;
  for (std::size_t run = 0; run < 100; ++run) {
    std::vector<KeywordSpan> kw;
    std::size_t pos = rng.below(4);
    while (pos < 12 && kw.size() < 3) {
      const std::size_t len = std::min<std::size_t>(1 + rng.below(2), 12 - pos);
      KeywordSpan k{pos, {}};
      for (std::size_t j = 0; j < len; ++j)
        k.tokens.push_back(kNumSpecial + static_cast<int>(rng.below(t.vocab.content_size())));
      kw.push_back(k);
      pos += len + 1 + rng.below(4);
    }
    SampleConfig cfg = toy_sampling(7000 + run);
    cfg.n_candidates = 4;
    cfg.n_keep = 2;
    for (const GenerationTrace& tr : infill(t.denoiser, t.conditions[run % t.conditions.size()], kw, cfg, &t.scorer)) {
      ++outputs;
      bool all = true;
      for (const KeywordSpan& k : kw)
        for (std::size_t j = 0; j < k.tokens.size(); ++j) all = all && tr.output[k.position + j] == k.tokens[j];
      kept += all;
    }
  }
  report("AC7", kept == outputs, fmt("keywords verbatim in %zu/%zu outputs of 100 infill runs", kept, outputs));
}

// ---- 8 ---------------------------------------------------------------------

void ac8_best_of_n(const Trained& t) {
  std::size_t exact = 0;
  for (std::size_t run = 0; run < 50; ++run) {
    SampleConfig cfg = toy_sampling(8000 + run);
    cfg.n_candidates = 20;
    cfg.n_keep = 5;
    const auto& cond = t.conditions[run % t.conditions.size()];
    const auto all = run_candidates(t.denoiser, t.scorer, cond, {}, cfg);
    std::vector<std::pair<double, std::size_t>> brute;
    for (const GenerationTrace& tr : all) brute.push_back({pseudo_perplexity(t.scorer, cond, tr.output), tr.candidate});
    std::sort(brute.begin(), brute.end());
    const auto kept = select_best(all, 5);
    bool same = kept.size() == 5;
    for (std::size_t i = 0; same && i < 5; ++i) same = kept[i].candidate == brute[i].second;
    exact += same;
  }
  report("AC8", exact == 50, fmt("best-of-N equals brute-force sort in %zu/50 runs (keep 5 of 20)", exact));
}

// ---- 9 ---------------------------------------------------------------------

void ac9_diversity(const Trained& t) {
  auto measure = [&](bool greedy) {
    double d2 = 0.0, vs = 0.0;
    const std::size_t n = 20;
    for (std::size_t c = 0; c < n; ++c) {
      SampleConfig cfg = toy_sampling(909 + c);
      cfg.greedy = greedy;
      std::vector<TokenList> samples;
      for (const GenerationTrace& tr : generate(t.denoiser, t.conditions[c * 3], cfg, &t.scorer))
        samples.push_back(tr.output);
      d2 += distinct_n(samples, 2);
      vs += vendi_ngram(samples, 2);
    }
    return std::pair{d2 / n, vs / n};
  };
  const auto cat = measure(false), greedy = measure(true);
  report("AC9", cat.first > greedy.first && cat.second > greedy.second,
         fmt("diversity over 20 conditions x 5 samples: distinct-2 %.3f > %.3f, vs_ngram %.3f > %.3f (sampled vs greedy)",
             cat.first, greedy.first, cat.second, greedy.second));
}

// ---- 10 --------------------------------------------------------------------

void ac10_metric_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  auto words = [](std::initializer_list<int> w) { return TokenList(w); };
  const std::vector<TokenList> same(5, words({1, 2, 3}));
  const std::vector<TokenList> disjoint{words({1, 2}), words({3, 4}), words({5, 6}), words({7, 8}), words({9, 10})};
  const std::vector<TokenList> two_one{words({1, 2}), words({1, 2}), words({3, 4})};
  const std::vector<TokenList> bleu_pair{words({1, 2, 3, 4}), words({1, 2, 5, 6})};
  const double v1 = vendi_ngram(same, 2), vk = vendi_ngram(disjoint, 2), v21 = vendi_ngram(two_one, 2);
  const double sb = self_bleu(bleu_pair, 2);
  const double d1 = distinct_n(std::vector<TokenList>{words({1, 1, 2})}, 1);
  const double d_unique = distinct_n(std::vector<TokenList>{words({1, 2, 3}), words({4, 5})}, 1);
  const double d2 = distinct_n(std::vector<TokenList>{words({1, 2}), words({1, 2})}, 2);
  const bool ok = std::abs(v1 - 1.0) < 1e-9 && std::abs(vk - 5.0) < 1e-9 && std::abs(v21 - 1.8899) < 1e-3 &&
                  std::abs(sb - 0.4082) < 1e-4 && d1 == 2.0 / 3.0 && d_unique == 1.0 && d2 == 0.5;
  const double s = seconds_since(t0);
  report("AC10", ok && s < 1.0,
         fmt("metric oracles: VS %.6f / %.6f / %.6f, self-BLEU %.6f, distinct %.6f %.6f %.6f (%.3f s)", v1, vk, v21, sb, d1,
             d_unique, d2, s));
}

// ---- 11 --------------------------------------------------------------------

struct Cli {
  fs::path dir;
  int run(const std::string& args) const {
    const std::string cmd = "cd '" + dir.string() + "' && '" EAGS_CLI_PATH "' " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string read(const std::string& name) const {
    std::ifstream in(dir / name, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
};

void ac11_reproducibility(const Trained& t) {
  Cli cli{fs::temp_directory_path() / ("eags_accept_" + std::to_string(::getpid()))};
  fs::remove_all(cli.dir);
  fs::create_directories(cli.dir);
  std::ofstream(cli.dir / "conds.txt") << "animals fox\nocean whale\nschool pupil\n";
  std::vector<std::string> mismatches;
  auto twice = [&](const std::string& tag, const std::string& a, const std::string& b,
                   const std::vector<std::pair<std::string, std::string>>& files) {
    if (cli.run(a) != 0 || cli.run(b) != 0) {
      mismatches.push_back(tag + " (exit)");
      return;
    }
    for (const auto& [x, y] : files)
      if (cli.read(x) != cli.read(y) || cli.read(x).empty()) mismatches.push_back(tag + ":" + x);
  };
  twice("make-corpus", "make-corpus --pairs 60 --out c1.tsv", "make-corpus --pairs 60 --out c2.tsv", {{"c1.tsv", "c2.tsv"}});
  {
    // Keywords taken from the first corpus target so they are in the vocabulary.
    std::istringstream first(cli.read("c1.tsv").substr(cli.read("c1.tsv").find('\t') + 1));
    std::vector<std::string> w;
    for (std::string tok; first >> tok && w.size() < 3;) w.push_back(tok);
    std::ofstream(cli.dir / "kw.txt") << "0:" << w.at(0) << "\n2:" << w.at(2) << "\n0:" << w.at(0) << " 1:" << w.at(1) << "\n";
  }
  const std::string train = "train --corpus c1.tsv --pretrain-epochs 3 --epochs 3 --seed 5";
  twice("train", train + " --ckpt a.bin", train + " --ckpt b.bin",
        {{"a.bin", "b.bin"}, {"a.bin.vocab", "b.bin.vocab"}, {"a.bin.entropy", "b.bin.entropy"}});
  const std::string gen = "generate --ckpt a.bin --conditions conds.txt --n-candidates 8 --n-keep 3";
  twice("generate", gen + " --out g1.tsv --trace t1.tsv", gen + " --out g2.tsv --trace t2.tsv --threads 4",
        {{"g1.tsv", "g2.tsv"}, {"t1.tsv", "t2.tsv"}});
  const std::string inf = "infill --ckpt a.bin --conditions conds.txt --keywords kw.txt --n-candidates 6 --n-keep 2";
  twice("infill", inf + " --out i1.tsv", inf + " --out i2.tsv --threads 3", {{"i1.tsv", "i2.tsv"}});
  twice("eval", "eval --input g1.tsv --compare i1.tsv --out e1.tsv", "eval --input g1.tsv --compare i1.tsv --out e2.tsv",
        {{"e1.tsv", "e2.tsv"}});
  twice("trace-plot-export", "trace-plot-export --input t1.tsv --out p1.tsv", "trace-plot-export --input t1.tsv --out p2.tsv",
        {{"p1.tsv", "p2.tsv"}});
  fs::remove_all(cli.dir);

  // In-process: the trained model under serial and threaded candidate runs.
  SampleConfig cfg = toy_sampling(1111);
  cfg.trace_energy = true;
  const auto serial = run_candidates(t.denoiser, t.scorer, t.conditions[0], {}, cfg);
  cfg.threads = 4;
  const auto threaded = run_candidates(t.denoiser, t.scorer, t.conditions[0], {}, cfg);
  bool same = serial.size() == threaded.size();
  for (std::size_t i = 0; same && i < serial.size(); ++i)
    same = serial[i].output == threaded[i].output && serial[i].pseudo_ppl == threaded[i].pseudo_ppl &&
           serial[i].final_energy == threaded[i].final_energy;
  if (!same) mismatches.push_back("in-process threads");

  std::string detail = "byte-identical reruns of make-corpus, train, generate (threads 1 vs 4), infill, eval, "
                       "trace-plot-export";
  for (const auto& m : mismatches) detail += " MISMATCH:" + m;
  report("AC11", mismatches.empty(), detail);
}

}  // namespace

int main() {
  try {
    ac1_forward_structure();
    ac3_gradients();
    ac10_metric_oracles();

    const auto raw = make_grammar_corpus({2000, 12, 7});
    const auto lines = corpus_lines(raw);
    const Vocab vocab = Vocab::build(lines, Granularity::word, 1);
    ModelConfig mc;
    mc.vocab_size = vocab.size();
    ac2_sampler_structure(mc, encode_pairs(raw, vocab, {8, 12}));

    std::printf("training toy model (%zu pairs, |V|=%zu, L=12, T=%zu) ...\n", raw.size(), vocab.size(), kAcceptT);
    std::fflush(stdout);
    const Trained t = train_toy(kAcceptPretrainEpochs, kAcceptEnsEpochs);
    std::printf("trained in %.0f s CPU: masked-LM loss %.3f, diffusion loss %.3f\n", t.cpu_seconds, t.mlm_loss,
                t.ens_loss);
    ac4_descent(t);
    ac5_ac6_ablation(t);
    ac7_infill(t);
    ac8_best_of_n(t);
    ac9_diversity(t);
    ac11_reproducibility(t);
  } catch (const std::exception& e) {
    std::printf("[FAIL] acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
