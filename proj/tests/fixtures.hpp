#pragma once

#include <string>
#include <vector>

#include "eags/corpus.hpp"
#include "eags/ens.hpp"
#include "eags/model.hpp"

namespace fixtures {

struct Toy {
  eags::Vocab vocab;
  std::vector<eags::CondPair> pairs;
  eags::ModelParams model;
};

inline eags::ModelConfig small_config(std::size_t vocab_size) {
  eags::ModelConfig c;
  c.vocab_size = vocab_size;
  c.d_model = 24;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 32;
  c.max_positions = 16;
  return c;
}

inline Toy make_toy(const std::vector<eags::RawPair>& raw, std::size_t L) {
  const auto lines = eags::corpus_lines(raw);
  eags::Vocab vocab = eags::Vocab::build(lines, eags::Granularity::word, 1);
  auto pairs = eags::encode_pairs(raw, vocab, {8, L});
  eags::ModelParams model = eags::ModelParams::init(small_config(vocab.size()), 5);
  return {std::move(vocab), std::move(pairs), std::move(model)};
}

// Condition "a" always continues with "b"; "d" with "c", so both tokens are in
// the vocabulary but only "b" ever follows "a".
inline const Toy& two_token_model() {
  static const Toy toy = [] {
    std::vector<eags::RawPair> raw;
    for (int i = 0; i < 8; ++i) {
      raw.push_back({"a", "b", 0});
      raw.push_back({"d", "c", 0});
    }
    Toy t = make_toy(raw, 1);
    eags::PretrainConfig cfg;
    cfg.L = 1;
    cfg.epochs = 40;
    cfg.lr = 3e-3;
    cfg.batch_size = 4;
    eags::pretrain_mlm(t.model, t.pairs, cfg);
    return t;
  }();
  return toy;
}

// Condition "a" always yields "b c" (two-position target).
inline const Toy& bc_model() {
  static const Toy toy = [] {
    std::vector<eags::RawPair> raw;
    for (int i = 0; i < 8; ++i) {
      raw.push_back({"a", "b c", 0});
      raw.push_back({"d", "c e", 0});
    }
    Toy t = make_toy(raw, 2);
    eags::PretrainConfig pc;
    pc.L = 2;
    pc.epochs = 40;
    pc.lr = 3e-3;
    pc.batch_size = 4;
    pc.mask_ratio = 0.9;  // both positions hidden: learn X from Y alone
    eags::pretrain_mlm(t.model, t.pairs, pc);
    eags::ModelParams entropy_model = t.model;
    eags::EnsConfig ec;
    ec.noise = {2, 2};
    ec.epochs = 40;
    ec.lr = 3e-3;
    ec.batch_size = 4;
    eags::train_ens(t.model, t.pairs, entropy_model, ec);
    return t;
  }();
  return toy;
}

}  // namespace fixtures
