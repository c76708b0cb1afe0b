#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "eags/cmrf.hpp"
#include "eags/corpus.hpp"
#include "eags/ens.hpp"
#include "eags/error.hpp"
#include "eags/metrics.hpp"
#include "eags/model.hpp"
#include "eags/sampler.hpp"
#include "eags/synthetic.hpp"

namespace py = pybind11;
using namespace eags;

namespace {

std::vector<double> losses(const TrainingLog& log) {
  std::vector<double> out;
  for (const EpochStats& e : log.epochs) out.push_back(e.mean_loss);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Entropy-ordered absorbing diffusion over a small masked LM";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<InvariantError>(m, "InvariantError", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);

  m.attr("MASK") = kMask;
  m.attr("PAD") = kPad;
  m.attr("SEP") = kSep;
  m.attr("UNK") = kUnk;

  py::enum_<Granularity>(m, "Granularity")
      .value("word", Granularity::word)
      .value("char", Granularity::character);

  py::class_<Vocab>(m, "Vocab")
      .def_static(
          "build",
          [](const std::vector<std::string>& lines, Granularity g, int min_freq) { return Vocab::build(lines, g, min_freq); },
          py::arg("lines"), py::arg("granularity") = Granularity::word, py::arg("min_freq") = 1)
      .def_static("load", &Vocab::load, py::arg("path"), py::arg("granularity") = Granularity::word)
      .def("save", &Vocab::save, py::arg("path"))
      .def("encode", &Vocab::encode, py::arg("text"))
      .def("decode", [](const Vocab& v, const std::vector<int>& ids) { return v.decode(ids); }, py::arg("ids"))
      .def("token", &Vocab::token, py::arg("id"))
      .def("id", &Vocab::id, py::arg("token"))
      .def("__len__", &Vocab::size)
      .def("__contains__", &Vocab::contains);

  py::class_<RawPair>(m, "RawPair")
      .def_readonly("condition", &RawPair::condition)
      .def_readonly("target", &RawPair::target)
      .def("__repr__", [](const RawPair& p) { return "RawPair(" + p.condition + " | " + p.target + ")"; });

  m.def("load_tsv", &load_tsv, py::arg("path"));
  m.def("parse_tsv", [](const std::string& text) { return parse_tsv(text); }, py::arg("text"));
  m.def(
      "make_grammar_corpus",
      [](std::size_t pairs, std::size_t length, std::uint64_t seed) { return make_grammar_corpus({pairs, length, seed}); },
      py::arg("pairs") = 2000, py::arg("length") = 12, py::arg("seed") = 7);
  m.def("grammar_conditions", &grammar_conditions);

  py::class_<CondPair>(m, "CondPair")
      .def_readonly("condition", &CondPair::condition)
      .def_readonly("target", &CondPair::target);
  m.def(
      "encode_pairs",
      [](const std::vector<RawPair>& raw, const Vocab& vocab, std::size_t max_condition, std::size_t max_target) {
        return encode_pairs(raw, vocab, {max_condition, max_target});
      },
      py::arg("raw"), py::arg("vocab"), py::arg("max_condition") = 32, py::arg("max_target") = 12);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("vocab_size", &ModelConfig::vocab_size)
      .def_readwrite("d_model", &ModelConfig::d_model)
      .def_readwrite("n_layers", &ModelConfig::n_layers)
      .def_readwrite("n_heads", &ModelConfig::n_heads)
      .def_readwrite("d_ff", &ModelConfig::d_ff)
      .def_readwrite("max_positions", &ModelConfig::max_positions)
      .def_readwrite("dropout", &ModelConfig::dropout);

  py::class_<ModelParams>(m, "ModelParams")
      .def_static("init", &ModelParams::init, py::arg("config"), py::arg("seed"))
      .def_static("zeros", &ModelParams::zeros, py::arg("config"))
      .def_property_readonly("config", &ModelParams::config)
      .def("parameter_count", &ModelParams::parameter_count)
      .def("copy", [](const ModelParams& p) { return p; })
      .def("same_values", &ModelParams::same_values);

  py::class_<PretrainConfig>(m, "PretrainConfig")
      .def(py::init<>())
      .def_readwrite("L", &PretrainConfig::L)
      .def_readwrite("mask_ratio", &PretrainConfig::mask_ratio)
      .def_readwrite("epochs", &PretrainConfig::epochs)
      .def_readwrite("lr", &PretrainConfig::lr)
      .def_readwrite("batch_size", &PretrainConfig::batch_size)
      .def_readwrite("seed", &PretrainConfig::seed);

  py::class_<EnsConfig>(m, "EnsConfig")
      .def(py::init<>())
      .def_property(
          "T", [](const EnsConfig& c) { return c.noise.T; }, [](EnsConfig& c, std::size_t v) { c.noise.T = v; })
      .def_property(
          "L", [](const EnsConfig& c) { return c.noise.L; }, [](EnsConfig& c, std::size_t v) { c.noise.L = v; })
      .def_readwrite("epochs", &EnsConfig::epochs)
      .def_readwrite("lr", &EnsConfig::lr)
      .def_readwrite("batch_size", &EnsConfig::batch_size)
      .def_readwrite("seed", &EnsConfig::seed);

  m.def(
      "pretrain_mlm",
      [](ModelParams& p, const std::vector<CondPair>& corpus, const PretrainConfig& cfg) {
        py::gil_scoped_release release;
        return losses(pretrain_mlm(p, corpus, cfg));
      },
      py::arg("params"), py::arg("corpus"), py::arg("config"), "Trains in place; returns per-epoch mean loss.");
  m.def(
      "train_ens",
      [](ModelParams& p, const std::vector<CondPair>& corpus, const ModelParams& entropy_model, const EnsConfig& cfg) {
        py::gil_scoped_release release;
        return losses(train_ens(p, corpus, entropy_model, cfg));
      },
      py::arg("params"), py::arg("corpus"), py::arg("entropy_model"), py::arg("config"),
      "Trains in place; returns per-epoch mean loss.");

  m.def(
      "load_checkpoint",
      [](const std::string& path) {
        const Checkpoint ck = load_checkpoint(path);
        py::dict out, meta;
        for (const auto& [k, v] : ck.meta) meta[py::str(k)] = v;
        for (const auto& [name, params] : ck.models) out[py::str(name)] = params;
        out["meta"] = meta;
        return out;
      },
      py::arg("path"), "Returns {'meta': {...}, <model name>: ModelParams, ...}.");

  m.def("step_quotas", &step_quotas, py::arg("n"), py::arg("T"));
  m.def(
      "plan_trajectory",
      [](const std::vector<double>& entropy, std::size_t T) {
        const MaskTrajectory tr = plan_trajectory(entropy, T);
        std::vector<long> step_of;
        for (std::size_t s : tr.step_of) step_of.push_back(s == kNeverMasked ? -1 : static_cast<long>(s));
        return py::make_tuple(tr.order, step_of);
      },
      py::arg("entropy"), py::arg("T"), "Returns (order, step_of).");

  py::enum_<SelectionMode>(m, "SelectionMode")
      .value("eags", SelectionMode::eags)
      .value("random_order", SelectionMode::random_order)
      .value("lowest_entropy_first", SelectionMode::lowest_entropy_first)
      .value("one_shot", SelectionMode::one_shot);

  py::class_<SampleConfig>(m, "SampleConfig")
      .def(py::init<>())
      .def_readwrite("T", &SampleConfig::T)
      .def_readwrite("L", &SampleConfig::L)
      .def_readwrite("temperature", &SampleConfig::temperature)
      .def_readwrite("greedy", &SampleConfig::greedy)
      .def_readwrite("n_candidates", &SampleConfig::n_candidates)
      .def_readwrite("n_keep", &SampleConfig::n_keep)
      .def_readwrite("mode", &SampleConfig::mode)
      .def_readwrite("seed", &SampleConfig::seed)
      .def_readwrite("trace_energy", &SampleConfig::trace_energy)
      .def_readwrite("threads", &SampleConfig::threads);

  py::class_<KeywordSpan>(m, "KeywordSpan")
      .def(py::init([](std::size_t position, std::vector<int> tokens) { return KeywordSpan{position, std::move(tokens)}; }),
           py::arg("position"), py::arg("tokens"))
      .def_readwrite("position", &KeywordSpan::position)
      .def_readwrite("tokens", &KeywordSpan::tokens);

  py::class_<StepRecord>(m, "StepRecord")
      .def_readonly("t", &StepRecord::t)
      .def_readonly("state", &StepRecord::state)
      .def_readonly("selected", &StepRecord::selected)
      .def_readonly("sampled", &StepRecord::sampled)
      .def_readonly("entropy", &StepRecord::entropy)
      .def_readonly("total_entropy", &StepRecord::total_entropy)
      .def_readonly("total_energy", &StepRecord::total_energy)
      .def_readonly("n_masked", &StepRecord::n_masked);

  py::class_<GenerationTrace>(m, "GenerationTrace")
      .def_readonly("candidate", &GenerationTrace::candidate)
      .def_readonly("steps", &GenerationTrace::steps)
      .def_readonly("output", &GenerationTrace::output)
      .def_readonly("final_energy", &GenerationTrace::final_energy)
      .def_readonly("pseudo_ppl", &GenerationTrace::pseudo_ppl);

  m.def(
      "generate",
      [](const ModelParams& model, const std::vector<int>& condition, const SampleConfig& cfg, const ModelParams* scorer) {
        py::gil_scoped_release release;
        return generate(model, condition, cfg, scorer);
      },
      py::arg("model"), py::arg("condition"), py::arg("config"), py::arg("scorer") = nullptr);
  m.def(
      "infill",
      [](const ModelParams& model, const std::vector<int>& condition, const std::vector<KeywordSpan>& keywords,
         const SampleConfig& cfg, const ModelParams* scorer) {
        py::gil_scoped_release release;
        return infill(model, condition, keywords, cfg, scorer);
      },
      py::arg("model"), py::arg("condition"), py::arg("keywords"), py::arg("config"), py::arg("scorer") = nullptr);
  m.def(
      "pseudo_perplexity",
      [](const ModelParams& p, const std::vector<int>& condition, const std::vector<int>& x) {
        return pseudo_perplexity(p, condition, x);
      },
      py::arg("params"), py::arg("condition"), py::arg("x"));

  m.def(
      "vendi_ngram", [](const std::vector<TokenList>& s, std::size_t n) { return vendi_ngram(s, n); }, py::arg("samples"),
      py::arg("n") = 2);
  m.def(
      "self_bleu", [](const std::vector<TokenList>& s, std::size_t n) { return self_bleu(s, n); }, py::arg("samples"),
      py::arg("max_n") = 4);
  m.def(
      "distinct_n", [](const std::vector<TokenList>& s, std::size_t n) { return distinct_n(s, n); }, py::arg("samples"),
      py::arg("n"));

#ifdef VERSION_INFO
  m.attr("__version__") = VERSION_INFO;
#else
  m.attr("__version__") = "dev";
#endif
}
