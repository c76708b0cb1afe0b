#include "eags/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "eags/error.hpp"

namespace eags {

namespace {

constexpr const char* kLayerSlots[] = {"ln1.gain", "ln1.bias", "attn.wq", "attn.bq", "attn.wk", "attn.bk",
                                       "attn.wv",  "attn.bv",  "attn.wo", "attn.bo", "ln2.gain", "ln2.bias",
                                       "ffn.w1",   "ffn.b1",   "ffn.w2",  "ffn.b2"};
constexpr std::size_t kSlotsPerLayer = std::size(kLayerSlots);

// Names and shapes of every tensor, in storage order.
std::vector<std::pair<std::string, std::vector<std::size_t>>> layout(const ModelConfig& c) {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
  const std::size_t d = c.d_model, f = c.d_ff, v = c.vocab_size;
  out.push_back({"tok_emb", {v, d}});
  out.push_back({"pos_emb", {c.max_positions, d}});
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    const std::vector<std::vector<std::size_t>> shapes = {{d}, {d}, {d, d}, {d}, {d, d}, {d}, {d, d}, {d},
                                                          {d, d}, {d}, {d}, {d}, {d, f}, {f}, {f, d}, {d}};
    for (std::size_t s = 0; s < kSlotsPerLayer; ++s) out.push_back({p + kLayerSlots[s], shapes[s]});
  }
  out.push_back({"lnf.gain", {d}});
  out.push_back({"lnf.bias", {d}});
  out.push_back({"out.w", {d, v}});
  out.push_back({"out.b", {v}});
  return out;
}

bool is_gain(const std::string& name) { return name.ends_with(".gain"); }
bool is_bias(const std::string& name) { return name.ends_with(".bias") || name.ends_with(".b") ||
                                               name.ends_with(".bq") || name.ends_with(".bk") ||
                                               name.ends_with(".bv") || name.ends_with(".bo") ||
                                               name.ends_with(".b1") || name.ends_with(".b2"); }

// Transformer body shared by the const and mutable forward paths. `w` holds
// the bound parameter vars in storage order.
nn::Var forward_body(const ModelConfig& c, const std::vector<nn::Var>& w, std::span<const int> ids,
                     const ForwardOptions& opt) {
  const std::size_t n = ids.size();
  if (n == 0) throw InputError("forward: empty sequence");
  if (n > c.max_positions)
    throw InputError("forward: sequence length " + std::to_string(n) + " exceeds max_positions " +
                     std::to_string(c.max_positions));
  for (int id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= c.vocab_size)
      throw InputError("forward: token id " + std::to_string(id) + " outside vocabulary");

  const bool drop = opt.training && c.dropout > 0.0;
  if (drop && opt.dropout_rng == nullptr) throw InvariantError("forward: dropout needs an rng");
  auto maybe_drop = [&](nn::Var v) { return drop ? nn::dropout(v, c.dropout, *opt.dropout_rng) : v; };

  std::vector<int> positions(n);
  std::iota(positions.begin(), positions.end(), 0);
  nn::Var x = nn::add(nn::embedding(w[0], ids), nn::embedding(w[1], positions));
  x = maybe_drop(x);

  std::vector<std::uint8_t> key_allowed(n);
  for (std::size_t i = 0; i < n; ++i) key_allowed[i] = ids[i] != kPad;

  const std::size_t dh = c.d_model / c.n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    const nn::Var* p = &w[2 + l * kSlotsPerLayer];
    nn::Var h = nn::layernorm(x, p[0], p[1]);
    nn::Var q = nn::add_bias(nn::matmul(h, p[2]), p[3]);
    nn::Var k = nn::add_bias(nn::matmul(h, p[4]), p[5]);
    nn::Var v = nn::add_bias(nn::matmul(h, p[6]), p[7]);
    std::vector<nn::Var> heads;
    heads.reserve(c.n_heads);
    for (std::size_t hd = 0; hd < c.n_heads; ++hd) {
      nn::Var qh = nn::slice_cols(q, hd * dh, dh);
      nn::Var kh = nn::slice_cols(k, hd * dh, dh);
      nn::Var vh = nn::slice_cols(v, hd * dh, dh);
      nn::Var scores = nn::scale(nn::matmul(qh, nn::transpose(kh)), inv_sqrt);
      nn::Var attn = maybe_drop(nn::softmax(scores, -1, key_allowed));
      heads.push_back(nn::matmul(attn, vh));
    }
    nn::Var a = nn::add_bias(nn::matmul(nn::concat_cols(heads), p[8]), p[9]);
    x = nn::add(x, maybe_drop(a));
    h = nn::layernorm(x, p[10], p[11]);
    nn::Var f = nn::gelu(nn::add_bias(nn::matmul(h, p[12]), p[13]));
    f = nn::add_bias(nn::matmul(f, p[14]), p[15]);
    x = nn::add(x, maybe_drop(f));
  }
  const std::size_t tail = 2 + c.n_layers * kSlotsPerLayer;
  x = nn::layernorm(x, w[tail], w[tail + 1]);
  if (!opt.output_rows.empty()) x = nn::gather_rows(x, opt.output_rows);
  return nn::add_bias(nn::matmul(x, w[tail + 2]), w[tail + 3]);
}

template <typename Params>
std::vector<nn::Var> bind(nn::Graph& g, Params& params) {
  std::vector<nn::Var> w;
  w.reserve(params.tensors().size());
  for (auto& t : params.tensors()) w.push_back(g.parameter(t));
  return w;
}

}  // namespace

// ---- config / params ---------------------------------------------------------

void ModelConfig::validate() const {
  if (vocab_size <= static_cast<std::size_t>(kNumSpecial)) throw InputError("model: vocab_size must exceed the specials");
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0)
    throw InputError("model: d_model must be a positive multiple of n_heads");
  if (d_ff == 0 || max_positions == 0) throw InputError("model: d_ff and max_positions must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InputError("model: dropout must be in [0,1)");
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.config_ = config;
  for (auto& [name, shape] : layout(config)) {
    p.names_.push_back(name);
    p.tensors_.emplace_back(shape, 0.0);
  }
  return p;
}

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p = zeros(config);
  Rng rng = Rng::stream(seed, "init");
  for (std::size_t i = 0; i < p.tensors_.size(); ++i) {
    const std::string& name = p.names_[i];
    nn::Tensor& t = p.tensors_[i];
    if (is_gain(name)) {
      std::fill(t.data.begin(), t.data.end(), 1.0);
    } else if (!is_bias(name)) {
      for (double& v : t.data) v = rng.normal(0.0, 0.02);
    }
  }
  return p;
}

ModelParams ModelParams::from_tensors(const ModelConfig& config, std::vector<std::string> names,
                                      std::vector<nn::Tensor> tensors) {
  config.validate();
  const auto expected = layout(config);
  if (names.size() != expected.size() || tensors.size() != expected.size())
    throw InputError("model: expected " + std::to_string(expected.size()) + " tensors, got " +
                     std::to_string(tensors.size()));
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (names[i] != expected[i].first || tensors[i].shape != expected[i].second)
      throw InputError("model: tensor " + names[i] + " " + tensors[i].shape_string() + " does not match layout entry " +
                       expected[i].first);
  }
  ModelParams p;
  p.config_ = config;
  p.names_ = std::move(names);
  p.tensors_ = std::move(tensors);
  return p;
}

const nn::Tensor& ModelParams::tensor(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return tensors_[i];
  throw InputError("model: no tensor named " + std::string(name));
}

nn::Tensor& ModelParams::tensor(std::string_view name) {
  return const_cast<nn::Tensor&>(static_cast<const ModelParams&>(*this).tensor(name));
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const nn::Tensor& t : tensors_) n += t.size();
  return n;
}

void ModelParams::zero_grad() {
  for (nn::Tensor& t : tensors_) t.zero_grad();
}

bool ModelParams::all_finite() const {
  for (const nn::Tensor& t : tensors_)
    for (double v : t.data)
      if (!std::isfinite(v)) return false;
  return true;
}

bool ModelParams::same_values(const ModelParams& other) const {
  if (!(config_ == other.config_) || names_ != other.names_) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const auto& a = tensors_[i].data;
    const auto& b = other.tensors_[i].data;
    if (a.size() != b.size() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

// ---- forward -------------------------------------------------------------------

nn::Var forward_logits(nn::Graph& g, ModelParams& params, std::span<const int> ids, const ForwardOptions& opt) {
  return forward_body(params.config(), bind(g, params), ids, opt);
}

nn::Var forward_logits(nn::Graph& g, const ModelParams& params, std::span<const int> ids,
                       const ForwardOptions& opt) {
  return forward_body(params.config(), bind(g, params), ids, opt);
}

nn::Tensor logits(const ModelParams& params, std::span<const int> ids) {
  nn::Graph g(false);
  nn::Tensor out = forward_logits(g, params, ids).value();
  return out;
}

nn::Tensor logits(const ModelParams& params, const TokenSeq& seq) { return logits(params, seq.ids); }

std::vector<std::uint8_t> content_support(std::size_t vocab_size) {
  std::vector<std::uint8_t> m(vocab_size, 1);
  for (std::size_t i = 0; i < std::min<std::size_t>(vocab_size, kNumSpecial); ++i) m[i] = 0;
  return m;
}

std::vector<double> distribution_from_logits(std::span<const double> row, double temperature) {
  if (!(temperature > 0.0)) throw InputError("token_distribution: temperature must be > 0");
  if (row.size() <= static_cast<std::size_t>(kNumSpecial))
    throw InputError("token_distribution: vocabulary has no content tokens");
  std::vector<double> p(row.size(), 0.0);
  double mx = -INFINITY;
  for (std::size_t j = kNumSpecial; j < row.size(); ++j) mx = std::max(mx, row[j]);
  double z = 0.0;
  for (std::size_t j = kNumSpecial; j < row.size(); ++j) {
    p[j] = std::exp((row[j] - mx) / temperature);
    z += p[j];
  }
  for (std::size_t j = kNumSpecial; j < row.size(); ++j) p[j] /= z;
  return p;
}

std::vector<double> token_distribution(const ModelParams& params, const TokenSeq& seq, std::size_t position,
                                       double temperature) {
  if (position >= seq.size()) throw InputError("token_distribution: position out of range");
  const std::size_t rows[] = {position};
  nn::Graph g(false);
  const nn::Tensor& z = forward_logits(g, params, seq.ids, {.output_rows = rows}).value();
  return distribution_from_logits(z.data, temperature);
}

// ---- phase-1 training ------------------------------------------------------------

namespace {

std::vector<std::size_t> free_target_positions(const TokenSeq& s) {
  std::vector<std::size_t> out;
  for (std::size_t i = s.x_begin; i < s.size(); ++i)
    if (s.ids[i] != kPad) out.push_back(i);
  return out;
}

// Chooses k of the free positions uniformly, returned sorted.
std::vector<std::size_t> choose_masked(std::vector<std::size_t> free, double ratio, Rng& rng) {
  const auto k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(ratio * static_cast<double>(free.size()))));
  for (std::size_t i = 0; i < k && i < free.size(); ++i) std::swap(free[i], free[i + rng.below(free.size() - i)]);
  free.resize(std::min(k, free.size()));
  std::sort(free.begin(), free.end());
  return free;
}

}  // namespace

TrainingLog pretrain_mlm(ModelParams& params, std::span<const CondPair> corpus, const PretrainConfig& cfg,
                         const EpochCallback& on_epoch) {
  if (!(cfg.mask_ratio > 0.0 && cfg.mask_ratio < 1.0))
    throw InputError("pretrain_mlm: mask_ratio must be in (0,1), got " + std::to_string(cfg.mask_ratio));
  if (corpus.empty()) throw InputError("pretrain_mlm: empty corpus");
  if (cfg.batch_size == 0) throw InputError("pretrain_mlm: batch_size must be positive");

  const auto support = content_support(params.config().vocab_size);
  nn::Adam adam(cfg.lr);
  params.zero_grad();
  TrainingLog log;
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = Rng::stream(cfg.seed, "pretrain-epoch", static_cast<std::uint64_t>(epoch));
    Rng drop_rng = Rng::stream(cfg.seed, "pretrain-dropout", static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng.engine());
    double loss_sum = 0.0;
    std::size_t correct = 0, positions = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(e - b);
      for (std::size_t k = b; k < e; ++k) {
        const CondPair& pair = corpus[order[k]];
        TokenSeq seq = make_clean_sequence(pair.condition, pair.target, cfg.L);
        const std::vector<std::size_t> masked = choose_masked(free_target_positions(seq), cfg.mask_ratio, rng);
        std::vector<int> targets;
        for (std::size_t pos : masked) {
          targets.push_back(seq.ids[pos]);
          seq.ids[pos] = kMask;
        }
        nn::Graph g;
        nn::Var z = forward_logits(g, params, seq.ids,
                                   {.training = true, .dropout_rng = &drop_rng, .output_rows = masked});
        const std::vector<double> w(masked.size(), 1.0);
        nn::Var loss = nn::cross_entropy(z, targets, w, support);
        g.backward(nn::scale(loss, inv_batch));
        loss_sum += loss.value().data[0] * static_cast<double>(masked.size());
        positions += masked.size();
        const nn::Tensor& zv = z.value();
        for (std::size_t r = 0; r < masked.size(); ++r) {
          auto row = std::span<const double>(zv.data).subspan(r * zv.cols(), zv.cols());
          const auto best = std::max_element(row.begin() + kNumSpecial, row.end()) - row.begin();
          correct += best == targets[r];
        }
      }
      if (cfg.use_adam) adam.step(params.tensors());
      else nn::sgd_step(params.tensors(), cfg.lr);
    }
    EpochStats st{epoch, loss_sum / static_cast<double>(positions),
                  static_cast<double>(correct) / static_cast<double>(positions), positions};
    log.epochs.push_back(st);
    if (on_epoch) on_epoch(st);
  }
  return log;
}

double masked_accuracy(const ModelParams& params, std::span<const CondPair> corpus, std::size_t L, double mask_ratio,
                       std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "masked-accuracy");
  std::size_t correct = 0, total = 0;
  for (const CondPair& pair : corpus) {
    TokenSeq seq = make_clean_sequence(pair.condition, pair.target, L);
    const std::vector<std::size_t> masked = choose_masked(free_target_positions(seq), mask_ratio, rng);
    std::vector<int> truth;
    for (std::size_t pos : masked) {
      truth.push_back(seq.ids[pos]);
      seq.ids[pos] = kMask;
    }
    nn::Graph g(false);
    const nn::Tensor& z = forward_logits(g, params, seq.ids, {.output_rows = masked}).value();
    for (std::size_t r = 0; r < masked.size(); ++r) {
      auto row = std::span<const double>(z.data).subspan(r * z.cols(), z.cols());
      correct += (std::max_element(row.begin() + kNumSpecial, row.end()) - row.begin()) == truth[r];
      ++total;
    }
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

// ---- checkpoints -------------------------------------------------------------------

namespace {

constexpr const char* kMagic = "EAGS-CHECKPOINT 1";

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string config_line(const ModelConfig& c) {
  std::ostringstream os;
  os << "vocab_size=" << c.vocab_size << " d_model=" << c.d_model << " n_layers=" << c.n_layers
     << " n_heads=" << c.n_heads << " d_ff=" << c.d_ff << " max_positions=" << c.max_positions
     << " dropout=" << format_double(c.dropout);
  return os.str();
}

ModelConfig parse_config(std::istringstream& fields) {
  ModelConfig c;
  std::string kv;
  while (fields >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InputError("checkpoint: malformed config field " + kv);
    const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
    if (key == "vocab_size") c.vocab_size = std::stoul(val);
    else if (key == "d_model") c.d_model = std::stoul(val);
    else if (key == "n_layers") c.n_layers = std::stoul(val);
    else if (key == "n_heads") c.n_heads = std::stoul(val);
    else if (key == "d_ff") c.d_ff = std::stoul(val);
    else if (key == "max_positions") c.max_positions = std::stoul(val);
    else if (key == "dropout") c.dropout = std::stod(val);
    else throw InputError("checkpoint: unknown config field " + key);
  }
  return c;
}

void write_le(std::ostream& out, const std::vector<double>& v) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  } else {
    for (double d : v) {
      auto bits = std::bit_cast<std::uint64_t>(d);
      char bytes[8];
      for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
      out.write(bytes, 8);
    }
  }
}

void read_le(std::istream& in, std::vector<double>& v) {
  std::vector<unsigned char> bytes(v.size() * 8);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw InputError("checkpoint: truncated tensor data");
  for (std::size_t k = 0; k < v.size(); ++k) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[k * 8 + static_cast<std::size_t>(i)]) << (8 * i);
    v[k] = std::bit_cast<double>(bits);
  }
}

}  // namespace

const ModelParams& Checkpoint::model(std::string_view name) const {
  for (const auto& [n, p] : models)
    if (n == name) return p;
  throw InputError("checkpoint has no model named " + std::string(name));
}

std::string Checkpoint::meta_value(std::string_view key, std::string_view fallback) const {
  for (const auto& [k, v] : meta)
    if (k == key) return v;
  return std::string(fallback);
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out << kMagic << '\n';
  for (const auto& [k, v] : ckpt.meta) out << "meta " << k << '=' << v << '\n';
  std::size_t offset = 0;
  for (const auto& [name, p] : ckpt.models) {
    out << "model " << name << ' ' << config_line(p.config()) << '\n';
    for (std::size_t i = 0; i < p.names().size(); ++i) {
      const nn::Tensor& t = p.tensors()[i];
      out << "tensor " << name << '/' << p.names()[i] << ' ';
      for (std::size_t d = 0; d < t.shape.size(); ++d) out << (d ? "," : "") << t.shape[d];
      out << ' ' << offset << '\n';
      offset += t.size() * sizeof(double);
    }
  }
  out << "data_bytes " << offset << '\n' << "END\n";
  for (const auto& [name, p] : ckpt.models)
    for (const nn::Tensor& t : p.tensors()) write_le(out, t.data);
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw InputError("checkpoint: bad header");
  struct Pending {
    std::string name;
    ModelConfig config;
    std::vector<std::string> names;
    std::vector<nn::Tensor> tensors;
  };
  std::vector<Pending> pending;
  Checkpoint ckpt;
  std::size_t expected_offset = 0, data_bytes = 0;
  while (true) {
    if (!std::getline(in, line)) throw InputError("checkpoint: missing END marker");
    if (line == "END") break;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string rest;
      std::getline(ls >> std::ws, rest);
      const auto eq = rest.find('=');
      if (eq == std::string::npos) throw InputError("checkpoint: malformed meta line");
      ckpt.meta.emplace_back(rest.substr(0, eq), rest.substr(eq + 1));
    } else if (kind == "model") {
      Pending p;
      ls >> p.name;
      p.config = parse_config(ls);
      pending.push_back(std::move(p));
    } else if (kind == "tensor") {
      std::string full, shape_s;
      std::size_t offset = 0;
      ls >> full >> shape_s >> offset;
      if (pending.empty() || !full.starts_with(pending.back().name + "/"))
        throw InputError("checkpoint: tensor " + full + " outside its model block");
      std::vector<std::size_t> shape;
      std::istringstream ss(shape_s);
      for (std::string d; std::getline(ss, d, ',');) shape.push_back(std::stoul(d));
      if (offset != expected_offset) throw InputError("checkpoint: unexpected byte offset for " + full);
      nn::Tensor t(shape);
      expected_offset += t.size() * sizeof(double);
      pending.back().names.push_back(full.substr(pending.back().name.size() + 1));
      pending.back().tensors.push_back(std::move(t));
    } else if (kind == "data_bytes") {
      ls >> data_bytes;
    } else {
      throw InputError("checkpoint: unknown manifest line '" + line + "'");
    }
  }
  if (data_bytes != expected_offset) throw InputError("checkpoint: data size mismatch");
  for (Pending& p : pending) {
    for (nn::Tensor& t : p.tensors) read_le(in, t.data);
    ckpt.models.emplace_back(p.name, ModelParams::from_tensors(p.config, std::move(p.names), std::move(p.tensors)));
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint " + path);
  write_checkpoint(out, ckpt);
  if (!out) throw InputError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path);
  return read_checkpoint(in);
}

}  // namespace eags
