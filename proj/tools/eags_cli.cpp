#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "eags/cmrf.hpp"
#include "eags/corpus.hpp"
#include "eags/ens.hpp"
#include "eags/error.hpp"
#include "eags/formats.hpp"
#include "eags/metrics.hpp"
#include "eags/model.hpp"
#include "eags/run_config.hpp"
#include "eags/sampler.hpp"
#include "eags/synthetic.hpp"

namespace {

using namespace eags;
namespace fs = std::filesystem;

struct Command {
  CLI::App* app = nullptr;
  std::string config_file;
  std::map<std::string, std::string> flags;
};

void bind_keys(Command& cmd, const std::vector<std::string>& keys) {
  cmd.app->add_option("--config", cmd.config_file, "key=value config file (flags take precedence)");
  for (const std::string& key : keys) {
    const RunConfigFieldInfo* info = nullptr;
    for (const auto& f : run_config_fields())
      if (key == f.key) info = &f;
    if (!info) throw InvariantError("cli: no config field " + key);
    std::string names = "--" + key;
    std::string dashed = key;
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    if (dashed != key) names += ",--" + dashed;
    auto* flags = &cmd.flags;
    if (std::holds_alternative<bool RunConfig::*>(info->field)) {
      cmd.app->add_flag_callback(names, [flags, key] { (*flags)[key] = "true"; }, info->help);
    } else {
      cmd.app->add_option_function<std::string>(names, [flags, key](const std::string& v) { (*flags)[key] = v; },
                                                info->help);
    }
  }
}

std::map<std::string, std::string> collect(const Command& cmd) {
  std::map<std::string, std::string> kv;
  if (!cmd.config_file.empty()) {
    std::ifstream in(cmd.config_file, std::ios::binary);
    if (!in) throw InputError("cannot open config file " + cmd.config_file);
    std::stringstream ss;
    ss << in.rdbuf();
    kv = parse_config_text(ss.str());
  }
  for (const auto& [k, v] : cmd.flags) kv[k] = v;
  return kv;
}

void echo_config(const std::string& command, const RunConfig& cfg) {
  spdlog::info("{}: resolved config", command);
  std::istringstream lines(cfg.to_text());
  for (std::string line; std::getline(lines, line);) spdlog::info("  {}", line);
}

std::string vocab_path(const RunConfig& cfg) { return cfg.vocab.empty() ? cfg.ckpt + ".vocab" : cfg.vocab; }

std::ofstream open_out(const std::string& path, std::string_view what) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + std::string(what) + " " + path);
  return out;
}

// Writes to --out when given, stdout otherwise.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) file_ = std::make_unique<std::ofstream>(open_out(path, "output file"));
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

int cmd_train(const RunConfig& cfg) {
  if (cfg.corpus.empty()) throw InputError("train: --corpus is required");
  if (cfg.optimizer != "adam" && cfg.optimizer != "sgd")
    throw InputError("train: optimizer must be adam or sgd, got '" + cfg.optimizer + "'");
  const Granularity gran = parse_granularity(cfg.granularity);
  const std::vector<RawPair> raw = load_tsv(cfg.corpus);
  if (raw.empty()) throw InputError("corpus file " + cfg.corpus + " holds no pairs");
  const std::vector<std::string> lines = corpus_lines(raw);
  const Vocab vocab = Vocab::build(lines, gran, static_cast<int>(cfg.min_freq));
  if (cfg.max_condition + 1 + cfg.L > cfg.max_positions)
    throw InputError("max_condition + 1 + L = " + std::to_string(cfg.max_condition + 1 + cfg.L) +
                     " exceeds max_positions " + std::to_string(cfg.max_positions));
  const std::vector<CondPair> pairs = encode_pairs(raw, vocab, {cfg.max_condition, cfg.L});
  NoiseConfig{cfg.T, cfg.L}.validate();

  ModelConfig mc{vocab.size(), cfg.d_model, cfg.n_layers, cfg.n_heads, cfg.d_ff, cfg.max_positions, cfg.dropout};
  mc.validate();
  spdlog::info("train: {} pairs, vocab {} tokens", pairs.size(), vocab.size());

  std::ofstream log = open_out(cfg.ckpt + ".log", "training log");
  log << cfg.to_text();
  auto epoch_logger = [&](std::string_view phase) {
    return [&log, phase](const EpochStats& st) {
      log << phase << " epoch " << st.epoch + 1 << " loss " << format_real(st.mean_loss) << '\n';
      spdlog::info("{} epoch {} loss {:.4f}", phase, st.epoch + 1, st.mean_loss);
    };
  };

  const bool adam = cfg.optimizer == "adam";
  ModelParams mlm = ModelParams::init(mc, Rng::stream(cfg.seed, "init").next());
  PretrainConfig pc{cfg.L, cfg.mask_ratio, static_cast<int>(cfg.pretrain_epochs), cfg.lr, cfg.batch_size, cfg.seed,
                    adam};
  const TrainingLog pre = pretrain_mlm(mlm, pairs, pc, epoch_logger("mlm"));

  const auto cache = compute_entropy_cache(mlm, pairs, cfg.L);
  {
    std::ofstream out = open_out(cfg.ckpt + ".entropy", "entropy cache");
    char buf[40];
    for (const auto& row : cache) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", row[i]);
        out << (i ? "\t" : "") << buf;
      }
      out << '\n';
    }
  }

  ModelParams denoiser = mlm;
  EnsConfig ec{{cfg.T, cfg.L}, static_cast<int>(cfg.epochs), cfg.lr, cfg.batch_size, cfg.seed, adam};
  const TrainingLog ens = train_ens(denoiser, pairs, mlm, ec, cache, epoch_logger("ens"));
  if (!denoiser.all_finite()) throw InvariantError("train: non-finite parameters after training");

  Checkpoint ckpt;
  ckpt.meta = {{"T", std::to_string(cfg.T)},
               {"L", std::to_string(cfg.L)},
               {"granularity", std::string(to_string(gran))},
               {"seed", std::to_string(cfg.seed)}};
  ckpt.models = {{"denoiser", std::move(denoiser)}, {"scorer", std::move(mlm)}};
  save_checkpoint(cfg.ckpt, ckpt);
  vocab.save(vocab_path(cfg));

  const double final_loss = ens.epochs.empty() ? (pre.epochs.empty() ? 0.0 : pre.epochs.back().mean_loss)
                                               : ens.epochs.back().mean_loss;
  log << "final loss " << format_real(final_loss) << '\n';
  spdlog::info("train: final loss {:.6f}; wrote {}", final_loss, cfg.ckpt);
  return 0;
}

struct Loaded {
  Checkpoint ckpt;
  Vocab vocab;
  const ModelParams* denoiser;
  const ModelParams* scorer;
};

Loaded load_model(const RunConfig& cfg) {
  Checkpoint ck = load_checkpoint(cfg.ckpt);
  const Granularity gran = parse_granularity(ck.meta_value("granularity", "word"));
  Vocab vocab = Vocab::load(vocab_path(cfg), gran);
  Loaded m{std::move(ck), std::move(vocab), nullptr, nullptr};
  m.denoiser = &m.ckpt.model("denoiser");
  if (m.denoiser->config().vocab_size != m.vocab.size())
    throw InputError("vocab " + vocab_path(cfg) + " does not match checkpoint " + cfg.ckpt);
  if (cfg.scorer == "mlm") m.scorer = &m.ckpt.model("scorer");
  else if (cfg.scorer == "denoiser") m.scorer = m.denoiser;
  else throw InputError("scorer must be mlm or denoiser, got '" + cfg.scorer + "'");
  return m;
}

// T and L fall back to the values the checkpoint was trained with.
void apply_checkpoint_defaults(RunConfig& cfg, const std::map<std::string, std::string>& kv) {
  if (kv.count("T") && kv.count("L")) return;
  const Checkpoint ck = load_checkpoint(cfg.ckpt);
  std::map<std::string, std::string> fill;
  if (!kv.count("T") && !ck.meta_value("T").empty()) fill["T"] = ck.meta_value("T");
  if (!kv.count("L") && !ck.meta_value("L").empty()) fill["L"] = ck.meta_value("L");
  cfg.apply(fill);
}

SampleConfig sample_config(const RunConfig& cfg, bool trace) {
  SampleConfig sc;
  sc.T = cfg.T;
  sc.L = cfg.L;
  sc.temperature = cfg.temperature;
  sc.greedy = cfg.greedy;
  sc.n_candidates = cfg.n_candidates;
  sc.n_keep = cfg.n_keep;
  sc.mode = parse_selection_mode(cfg.mode);
  sc.seed = cfg.seed;
  sc.trace_energy = trace;
  sc.threads = cfg.threads;
  sc.validate();
  return sc;
}

struct ConditionLine {
  std::size_t line;
  std::string text;
  std::vector<int> ids;
};

std::vector<ConditionLine> load_conditions(const RunConfig& cfg, const Loaded& m) {
  if (cfg.conditions.empty()) throw InputError("--conditions is required");
  const std::size_t max_len = m.denoiser->config().max_positions - std::min(m.denoiser->config().max_positions,
                                                                            cfg.L + 1);
  std::vector<ConditionLine> out;
  const auto lines = load_lines(cfg.conditions);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t") == std::string::npos) continue;
    ConditionLine c{i + 1, lines[i], m.vocab.encode(lines[i])};
    if (c.ids.size() > max_len)
      throw InputError(cfg.conditions + ":" + std::to_string(c.line) + ": condition has " +
                       std::to_string(c.ids.size()) + " tokens, at most " + std::to_string(max_len) +
                       " fit with L=" + std::to_string(cfg.L));
    for (int id : c.ids)
      if (id == kUnk) spdlog::warn("{}:{}: condition holds out-of-vocabulary tokens", cfg.conditions, c.line);
    out.push_back(std::move(c));
  }
  if (out.empty()) throw InputError("condition file " + cfg.conditions + " is empty");
  return out;
}

// Shared body of generate and infill. keywords[i] belongs to conditions[i].
int run_generation(const RunConfig& cfg, const Loaded& m, const std::vector<ConditionLine>& conds,
                   const std::vector<std::vector<KeywordSpan>>& keywords) {
  const SampleConfig sc = sample_config(cfg, !cfg.trace.empty());
  std::unique_ptr<std::ofstream> trace;
  if (!cfg.trace.empty()) {
    trace = std::make_unique<std::ofstream>(open_out(cfg.trace, "trace file"));
    write_trace_header(*trace);
  }
  Output out(cfg.out);
  for (std::size_t c = 0; c < conds.size(); ++c) {
    const std::vector<KeywordSpan> none;
    const auto& kw = keywords.empty() ? none : keywords[c];
    try {
      validate_keywords(kw, sc.L, m.vocab.size());
    } catch (const InputError& e) {
      throw InputError(cfg.keywords + ":" + std::to_string(conds[c].line) + ": " + e.what());
    }
    std::vector<GenerationTrace> cands = run_candidates(*m.denoiser, *m.scorer, conds[c].ids, kw, sc);
    if (trace)
      for (const GenerationTrace& tr : cands) write_trace_rows(*trace, c * sc.n_candidates + tr.candidate, tr);
    for (const GenerationTrace& tr : select_best(std::move(cands), sc.n_keep))
      write_generation_row(out.stream(), {conds[c].text, m.vocab.decode(tr.output), tr.pseudo_ppl, 0});
    spdlog::debug("condition {} done", conds[c].line);
  }
  out.stream().flush();
  return 0;
}

int cmd_generate(const RunConfig& cfg) {
  const Loaded m = load_model(cfg);
  return run_generation(cfg, m, load_conditions(cfg, m), {});
}

int cmd_infill(const RunConfig& cfg) {
  if (cfg.keywords.empty()) throw InputError("infill: --keywords is required");
  const Loaded m = load_model(cfg);
  const auto conds = load_conditions(cfg, m);
  const auto kw_lines = load_lines(cfg.keywords);
  std::vector<std::vector<KeywordSpan>> keywords;
  for (const ConditionLine& c : conds) {
    if (c.line > kw_lines.size())
      throw InputError(cfg.keywords + ": no keyword line for condition line " + std::to_string(c.line));
    try {
      keywords.push_back(parse_keyword_line(kw_lines[c.line - 1], m.vocab));
    } catch (const InputError& e) {
      throw InputError(cfg.keywords + ":" + std::to_string(c.line) + ": " + e.what());
    }
  }
  return run_generation(cfg, m, conds, keywords);
}

int cmd_eval(const RunConfig& cfg) {
  if (cfg.input.empty()) throw InputError("eval: --input is required");
  const auto a = evaluate_rows(load_generation_file(cfg.input), cfg.vendi_n, cfg.bleu_max_n);
  Output out(cfg.out);
  if (cfg.compare.empty()) {
    write_eval_report(out.stream(), a);
    return 0;
  }
  const auto b = evaluate_rows(load_generation_file(cfg.compare), cfg.vendi_n, cfg.bleu_max_n);
  out.stream() << "# " << cfg.input << '\n';
  write_eval_report(out.stream(), a);
  out.stream() << "\n# " << cfg.compare << '\n';
  write_eval_report(out.stream(), b);
  out.stream() << '\n';
  write_eval_comparison(out.stream(), cfg.input, a, cfg.compare, b);
  return 0;
}

int cmd_trace_export(const RunConfig& cfg) {
  if (cfg.input.empty()) throw InputError("trace-plot-export: --input is required");
  const auto traces = load_trace_file(cfg.input);
  Output out(cfg.out);
  write_trace_summary(out.stream(), summarize_traces(traces));
  return 0;
}

int cmd_make_corpus(const RunConfig& cfg) {
  Output out(cfg.out);
  for (const RawPair& p : make_grammar_corpus({cfg.pairs, cfg.L, cfg.seed}))
    out.stream() << p.condition << '\t' << p.target << '\n';
  if (!cfg.conditions.empty()) {
    std::ofstream conds = open_out(cfg.conditions, "condition file");
    for (const std::string& c : grammar_conditions()) conds << c << '\n';
  }
  return 0;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("eags");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* lvl = std::getenv("EAGS_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Entropy-adaptive discrete diffusion text generation"};
  app.require_subcommand(1);

  const std::vector<std::string> model_keys{"corpus", "ckpt", "vocab", "granularity", "min_freq", "max_condition",
                                            "T", "L", "d_model", "n_layers", "n_heads", "d_ff", "max_positions",
                                            "dropout", "pretrain_epochs", "epochs", "lr", "batch_size", "mask_ratio",
                                            "optimizer", "seed"};
  const std::vector<std::string> gen_keys{"ckpt", "vocab", "conditions", "out", "trace", "T", "L", "mode",
                                          "n_candidates", "n_keep", "temperature", "greedy", "threads", "scorer",
                                          "seed"};
  std::vector<std::string> infill_keys = gen_keys;
  infill_keys.push_back("keywords");

  struct Entry {
    Command cmd;
    std::vector<std::string> keys;
    int (*run)(const RunConfig&);
    bool checkpoint_defaults;
  };
  std::vector<Entry> entries;
  auto add = [&](const std::string& name, const std::string& help, const std::vector<std::string>& keys,
                 int (*run)(const RunConfig&), bool ckpt_defaults) {
    entries.push_back({Command{app.add_subcommand(name, help), {}, {}}, keys, run, ckpt_defaults});
  };
  add("train", "pretrain the masked LM, then train the denoiser with entropy-ordered noise", model_keys, cmd_train,
      false);
  add("generate", "sample from conditions, keep the lowest pseudo-perplexity candidates", gen_keys, cmd_generate,
      true);
  add("infill", "generate with keywords fixed at given positions", infill_keys, cmd_infill, true);
  add("eval", "diversity and pseudo-perplexity report of generation files",
      {"input", "compare", "out", "vendi_n", "bleu_max_n"}, cmd_eval, false);
  add("trace-plot-export", "per-step entropy/energy summary of a trace file", {"input", "out"}, cmd_trace_export,
      false);
  add("make-corpus", "write the synthetic topic-grammar corpus", {"out", "conditions", "pairs", "L", "seed"},
      cmd_make_corpus, false);
  // Bind after the vector stops growing: callbacks hold pointers into each Command.
  for (Entry& e : entries) bind_keys(e.cmd, e.keys);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    for (Entry& e : entries) {
      if (!e.cmd.app->parsed()) continue;
      const auto kv = collect(e.cmd);
      RunConfig cfg;
      cfg.apply(kv);
      if (e.checkpoint_defaults) apply_checkpoint_defaults(cfg, kv);
      echo_config(e.cmd.app->get_name(), cfg);
      return e.run(cfg);
    }
  } catch (const InputError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const InvariantError& e) {
    spdlog::error("invariant violated: {}", e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return 3;
  }
  return 2;
}
