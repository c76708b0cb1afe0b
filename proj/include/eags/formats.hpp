#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eags/corpus.hpp"
#include "eags/metrics.hpp"
#include "eags/sampler.hpp"

namespace eags {

// Generation output: `condition<TAB>generated_text<TAB>pseudo_ppl`, one line
// per kept sample.
struct GenerationRow {
  std::string condition;
  std::string text;
  double pseudo_ppl = 0.0;
  std::size_t line = 0;
};

void write_generation_row(std::ostream& out, const GenerationRow& row);
// Throws InputError naming the row number of the first malformed line.
std::vector<GenerationRow> parse_generation_rows(std::string_view content, std::string_view source = "<memory>");
std::vector<GenerationRow> load_generation_file(const std::filesystem::path& path);

// Trace file: TSV with header `run_id step total_entropy total_energy n_masked`.
void write_trace_header(std::ostream& out);
void write_trace_rows(std::ostream& out, std::size_t run_id, const GenerationTrace& trace);
// Rebuilds per-run traces (scalar step fields only), ordered by run id.
std::vector<GenerationTrace> parse_trace_rows(std::string_view content, std::string_view source = "<memory>");
std::vector<GenerationTrace> load_trace_file(const std::filesystem::path& path);

// Per-step summary rows for plotting.
void write_trace_summary(std::ostream& out, const TraceSummary& summary);

// Evaluation report: `condition_id pseudo_ppl_mean vs_ngram self_bleu distinct_1 distinct_2`.
struct EvalRow {
  std::size_t condition_id = 0;
  std::string condition;
  std::size_t samples = 0;
  double pseudo_ppl_mean = 0.0;
  DiversityReport diversity;
};

// Groups rows by condition (first-appearance order) and scores each group.
// Words are compared as whitespace-separated tokens.
std::vector<EvalRow> evaluate_rows(std::span<const GenerationRow> rows, std::size_t vendi_n = 2,
                                   std::size_t bleu_max_n = 4);
void write_eval_report(std::ostream& out, std::span<const EvalRow> rows);
// Means over conditions of two runs, one metric per line.
void write_eval_comparison(std::ostream& out, std::string_view name_a, std::span<const EvalRow> a,
                           std::string_view name_b, std::span<const EvalRow> b);

// Keyword spec line: whitespace-separated `position:token` items. Adjacent
// positions form one span. Tokens must be in the vocabulary.
std::vector<KeywordSpan> parse_keyword_line(std::string_view line, const Vocab& vocab);

// Condition file: one condition per non-empty line.
std::vector<std::string> load_lines(const std::filesystem::path& path);

std::string format_real(double v);

}  // namespace eags
