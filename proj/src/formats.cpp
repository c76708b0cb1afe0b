#include "eags/formats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "eags/error.hpp"

namespace eags {

namespace {

std::string read_file(const std::filesystem::path& path, std::string_view what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + std::string(what) + " " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Lines with CR stripped, paired with their 1-based numbers.
std::vector<std::pair<std::size_t, std::string_view>> split_lines(std::string_view content) {
  std::vector<std::pair<std::size_t, std::string_view>> out;
  std::size_t pos = 0, no = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.emplace_back(++no, line);
    pos = end + 1;
  }
  return out;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> f;
  std::size_t pos = 0;
  while (true) {
    const std::size_t tab = line.find('\t', pos);
    f.push_back(line.substr(pos, tab == std::string_view::npos ? std::string_view::npos : tab - pos));
    if (tab == std::string_view::npos) break;
    pos = tab + 1;
  }
  return f;
}

bool parse_double(std::string_view s, double& out) {
  std::string tmp(s);
  if (tmp == "nan") {
    out = std::numeric_limits<double>::quiet_NaN();
    return true;
  }
  char* end = nullptr;
  out = std::strtod(tmp.c_str(), &end);
  return !tmp.empty() && end == tmp.c_str() + tmp.size();
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

std::vector<int> intern_words(std::string_view text, std::map<std::string, int>& ids) {
  std::vector<int> out;
  std::istringstream ss{std::string(text)};
  for (std::string w; ss >> w;) out.push_back(ids.emplace(w, static_cast<int>(ids.size())).first->second);
  return out;
}

}  // namespace

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_generation_row(std::ostream& out, const GenerationRow& row) {
  out << row.condition << '\t' << row.text << '\t' << format_real(row.pseudo_ppl) << '\n';
}

std::vector<GenerationRow> parse_generation_rows(std::string_view content, std::string_view source) {
  std::vector<GenerationRow> rows;
  for (auto [no, line] : split_lines(content)) {
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    const auto f = split_tabs(line);
    GenerationRow r;
    r.line = no;
    if (f.size() != 3 || !parse_double(f[2], r.pseudo_ppl))
      throw InputError(std::string(source) + ": malformed row " + std::to_string(no) +
                       " (expected condition<TAB>text<TAB>pseudo_ppl)");
    r.condition = std::string(f[0]);
    r.text = std::string(f[1]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<GenerationRow> load_generation_file(const std::filesystem::path& path) {
  return parse_generation_rows(read_file(path, "generation file"), path.string());
}

void write_trace_header(std::ostream& out) { out << "run_id\tstep\ttotal_entropy\ttotal_energy\tn_masked\n"; }

void write_trace_rows(std::ostream& out, std::size_t run_id, const GenerationTrace& trace) {
  for (const StepRecord& s : trace.steps)
    out << run_id << '\t' << s.t << '\t' << format_real(s.total_entropy) << '\t' << format_real(s.total_energy)
        << '\t' << s.n_masked << '\n';
}

std::vector<GenerationTrace> parse_trace_rows(std::string_view content, std::string_view source) {
  std::map<std::size_t, GenerationTrace> runs;
  for (auto [no, line] : split_lines(content)) {
    if (line.empty() || line.starts_with("run_id")) continue;
    const auto f = split_tabs(line);
    std::size_t run = 0, masked = 0;
    StepRecord s;
    if (f.size() != 5 || !parse_int(f[0], run) || !parse_int(f[1], s.t) || !parse_double(f[2], s.total_entropy) ||
        !parse_double(f[3], s.total_energy) || !parse_int(f[4], masked))
      throw InputError(std::string(source) + ": malformed trace row " + std::to_string(no));
    s.n_masked = masked;
    GenerationTrace& tr = runs[run];
    tr.candidate = run;
    tr.steps.push_back(std::move(s));
  }
  std::vector<GenerationTrace> out;
  for (auto& [id, tr] : runs) out.push_back(std::move(tr));
  return out;
}

std::vector<GenerationTrace> load_trace_file(const std::filesystem::path& path) {
  return parse_trace_rows(read_file(path, "trace file"), path.string());
}

void write_trace_summary(std::ostream& out, const TraceSummary& summary) {
  out << "step\truns\tmean_entropy\tstd_entropy\tmean_energy\tstd_energy\tmean_masked\n";
  for (const StepSummary& s : summary.steps)
    out << s.t << '\t' << summary.runs << '\t' << format_real(s.mean_entropy) << '\t' << format_real(s.std_entropy)
        << '\t' << format_real(s.mean_energy) << '\t' << format_real(s.std_energy) << '\t'
        << format_real(s.mean_masked) << '\n';
  out << "# entropy_nonincreasing=" << (summary.entropy_nonincreasing ? "true" : "false")
      << " energy_nonincreasing=" << (summary.energy_nonincreasing ? "true" : "false") << '\n';
}

std::vector<EvalRow> evaluate_rows(std::span<const GenerationRow> rows, std::size_t vendi_n, std::size_t bleu_max_n) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const GenerationRow*>> groups;
  for (const GenerationRow& r : rows) {
    auto [it, inserted] = groups.try_emplace(r.condition);
    if (inserted) order.push_back(r.condition);
    it->second.push_back(&r);
  }
  std::vector<EvalRow> out;
  for (std::size_t c = 0; c < order.size(); ++c) {
    const auto& g = groups[order[c]];
    std::map<std::string, int> ids;
    std::vector<TokenList> samples;
    double ppl = 0.0;
    for (const GenerationRow* r : g) {
      samples.push_back(intern_words(r->text, ids));
      ppl += r->pseudo_ppl;
      if (samples.back().empty())
        throw InputError("row " + std::to_string(r->line) + ": empty generated text");
    }
    EvalRow e;
    e.condition_id = c;
    e.condition = order[c];
    e.samples = g.size();
    e.pseudo_ppl_mean = ppl / static_cast<double>(g.size());
    try {
      e.diversity = diversity_report(samples, vendi_n, bleu_max_n);
    } catch (const InputError& err) {
      throw InputError("condition '" + order[c] + "': " + err.what());
    }
    out.push_back(std::move(e));
  }
  return out;
}

void write_eval_report(std::ostream& out, std::span<const EvalRow> rows) {
  out << "condition_id\tpseudo_ppl_mean\tvs_ngram\tself_bleu\tdistinct_1\tdistinct_2\n";
  for (const EvalRow& r : rows)
    out << r.condition_id << '\t' << format_real(r.pseudo_ppl_mean) << '\t' << format_real(r.diversity.vs_ngram)
        << '\t' << format_real(r.diversity.self_bleu) << '\t' << format_real(r.diversity.distinct_1) << '\t'
        << format_real(r.diversity.distinct_2) << '\n';
}

void write_eval_comparison(std::ostream& out, std::string_view name_a, std::span<const EvalRow> a,
                           std::string_view name_b, std::span<const EvalRow> b) {
  auto mean = [](std::span<const EvalRow> rows, auto field) {
    double s = 0.0;
    for (const EvalRow& r : rows) s += field(r);
    return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
  };
  struct Metric {
    const char* name;
    double (*get)(const EvalRow&);
  };
  const Metric metrics[] = {
      {"pseudo_ppl_mean", [](const EvalRow& r) { return r.pseudo_ppl_mean; }},
      {"vs_ngram", [](const EvalRow& r) { return r.diversity.vs_ngram; }},
      {"self_bleu", [](const EvalRow& r) { return r.diversity.self_bleu; }},
      {"distinct_1", [](const EvalRow& r) { return r.diversity.distinct_1; }},
      {"distinct_2", [](const EvalRow& r) { return r.diversity.distinct_2; }},
  };
  out << "metric\t" << name_a << '\t' << name_b << '\n';
  for (const Metric& m : metrics)
    out << m.name << '\t' << format_real(mean(a, m.get)) << '\t' << format_real(mean(b, m.get)) << '\n';
}

std::vector<KeywordSpan> parse_keyword_line(std::string_view line, const Vocab& vocab) {
  std::vector<std::pair<std::size_t, int>> items;
  std::istringstream ss{std::string(line)};
  for (std::string item; ss >> item;) {
    const auto colon = item.find(':');
    std::size_t pos = 0;
    if (colon == std::string::npos || !parse_int(std::string_view(item).substr(0, colon), pos))
      throw InputError("keyword item '" + item + "' is not position:token");
    const std::string tok = item.substr(colon + 1);
    if (!vocab.contains(tok) || Vocab::is_special(vocab.id(tok)))
      throw InputError("keyword token '" + tok + "' is not in the vocabulary");
    items.emplace_back(pos, vocab.id(tok));
  }
  std::sort(items.begin(), items.end());
  std::vector<KeywordSpan> spans;
  for (const auto& [pos, id] : items) {
    if (!spans.empty() && spans.back().position + spans.back().tokens.size() == pos)
      spans.back().tokens.push_back(id);
    else if (!spans.empty() && spans.back().position + spans.back().tokens.size() > pos)
      throw InputError("keyword spans overlap at position " + std::to_string(pos));
    else
      spans.push_back(KeywordSpan{pos, {id}});
  }
  return spans;
}

std::vector<std::string> load_lines(const std::filesystem::path& path) {
  const std::string content = read_file(path, "file");
  std::vector<std::string> out;
  for (auto [no, line] : split_lines(content)) out.emplace_back(line);
  return out;
}

}  // namespace eags
