#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "eags/autodiff.hpp"
#include "eags/ens.hpp"
#include "eags/model.hpp"
#include "eags/rng.hpp"

namespace gradcheck {

using eags::Rng;
using eags::nn::Graph;
using eags::nn::Tensor;
using eags::nn::Var;

// Builds a scalar loss from the leaves (one Var per input tensor).
using LossFn = std::function<Var(Graph&, const std::vector<Var>&)>;

struct Result {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// |analytic - numeric| / max(|analytic|, |numeric|, floor), maximised over
// every input entry. Numeric = central difference with step h.
inline Result check(std::vector<Tensor> inputs, const LossFn& loss, double h = 1e-5, double floor = 1e-6) {
  for (Tensor& t : inputs) t.grad.clear();
  {
    Graph g;
    std::vector<Var> leaves;
    for (Tensor& t : inputs) leaves.push_back(g.parameter(t));
    g.backward(loss(g, leaves));
  }
  auto eval = [&]() {
    Graph g(false);
    std::vector<Var> leaves;
    for (const Tensor& t : inputs) leaves.push_back(g.parameter(static_cast<const Tensor&>(t)));
    return loss(g, leaves).value().data[0];
  };
  Result r;
  for (Tensor& t : inputs) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double saved = t.data[i];
      t.data[i] = saved + h;
      const double up = eval();
      t.data[i] = saved - h;
      const double down = eval();
      t.data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = t.grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
      r.max_rel_error = std::max(r.max_rel_error, std::abs(analytic - numeric) / denom);
      ++r.checked;
    }
  }
  return r;
}

inline Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double sd = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.normal(0.0, sd);
  return t;
}

// loss = sum(out * R) with a fixed random R, so every output entry matters.
inline Var project(Var out, std::uint64_t seed) {
  Rng rng(seed);
  Tensor R(out.value().shape);
  for (double& v : R.data) v = rng.normal();
  return eags::nn::sum(eags::nn::mul(out, out.graph().constant(std::move(R))));
}

struct OpCase {
  std::string name;
  // Builds inputs and the loss for one trial.
  std::function<std::pair<std::vector<Tensor>, LossFn>(Rng&)> make;
};

inline std::size_t dim(Rng& rng, std::size_t lo = 1, std::size_t hi = 5) { return lo + rng.below(hi - lo + 1); }

inline std::vector<OpCase> op_cases() {
  namespace nn = eags::nn;
  std::vector<OpCase> c;
  c.push_back({"matmul", [](Rng& rng) {
                 const std::size_t m = dim(rng), k = dim(rng), n = dim(rng);
                 return std::pair{std::vector{random_tensor({m, k}, rng), random_tensor({k, n}, rng)},
                                  LossFn([](Graph&, const std::vector<Var>& v) {
                                    return project(nn::matmul(v[0], v[1]), 11);
                                  })};
               }});
  c.push_back({"add", [](Rng& rng) {
                 const std::size_t m = dim(rng), n = dim(rng);
                 return std::pair{std::vector{random_tensor({m, n}, rng), random_tensor({m, n}, rng)},
                                  LossFn([](Graph&, const std::vector<Var>& v) { return project(nn::add(v[0], v[1]), 12); })};
               }});
  c.push_back({"add_bias", [](Rng& rng) {
                 const std::size_t m = dim(rng), n = dim(rng);
                 return std::pair{std::vector{random_tensor({m, n}, rng), random_tensor({n}, rng)},
                                  LossFn([](Graph&, const std::vector<Var>& v) {
                                    return project(nn::add_bias(v[0], v[1]), 13);
                                  })};
               }});
  c.push_back({"mul", [](Rng& rng) {
                 const std::size_t m = dim(rng), n = dim(rng);
                 return std::pair{std::vector{random_tensor({m, n}, rng), random_tensor({m, n}, rng)},
                                  LossFn([](Graph&, const std::vector<Var>& v) { return project(nn::mul(v[0], v[1]), 14); })};
               }});
  c.push_back({"scale", [](Rng& rng) {
                 const double s = rng.normal();
                 return std::pair{std::vector{random_tensor({dim(rng), dim(rng)}, rng)},
                                  LossFn([s](Graph&, const std::vector<Var>& v) { return project(nn::scale(v[0], s), 15); })};
               }});
  c.push_back({"sum", [](Rng& rng) {
                 return std::pair{std::vector{random_tensor({dim(rng), dim(rng)}, rng)},
                                  LossFn([](Graph&, const std::vector<Var>& v) {
                                    return nn::mul(nn::sum(v[0]), nn::sum(v[0]));
                                  })};
               }});
  for (int axis : {-1, 0}) {
    c.push_back({axis == 0 ? "softmax_col" : "softmax_row", [axis](Rng& rng) {
                   return std::pair{std::vector{random_tensor({dim(rng), dim(rng, 2)}, rng)},
                                    LossFn([axis](Graph&, const std::vector<Var>& v) {
                                      return project(nn::softmax(v[0], axis), 16);
                                    })};
                 }});
  }
  c.push_back({"softmax_masked", [](Rng& rng) {
                 const std::size_t n = dim(rng, 2, 6);
                 std::vector<std::uint8_t> allowed(n);
                 for (auto& a : allowed) a = rng.uniform() < 0.6;
                 allowed[rng.below(n)] = 1;
                 return std::pair{std::vector{random_tensor({dim(rng), n}, rng)},
                                  LossFn([allowed](Graph&, const std::vector<Var>& v) {
                                    return project(nn::softmax(v[0], -1, allowed), 17);
                                  })};
               }});
  c.push_back({"layernorm", [](Rng& rng) {
                 const std::size_t m = dim(rng), n = dim(rng, 2, 6);
                 return std::pair{std::vector{random_tensor({m, n}, rng), random_tensor({n}, rng), random_tensor({n}, rng)},
                                  LossFn([](Graph&, const std::vector<Var>& v) {
                                    return project(nn::layernorm(v[0], v[1], v[2]), 18);
                                  })};
               }});
  c.push_back({"gelu", [](Rng& rng) {
                 return std::pair{std::vector{random_tensor({dim(rng), dim(rng)}, rng, 2.0)},
                                  LossFn([](Graph&, const std::vector<Var>& v) { return project(nn::gelu(v[0]), 19); })};
               }});
  c.push_back({"embedding", [](Rng& rng) {
                 const std::size_t rows = dim(rng, 2, 7), d = dim(rng);
                 std::vector<int> ids(dim(rng, 1, 8));
                 for (int& id : ids) id = static_cast<int>(rng.below(rows));
                 return std::pair{std::vector{random_tensor({rows, d}, rng)},
                                  LossFn([ids](Graph&, const std::vector<Var>& v) {
                                    return project(nn::embedding(v[0], ids), 20);
                                  })};
               }});
  c.push_back({"transpose", [](Rng& rng) {
                 return std::pair{std::vector{random_tensor({dim(rng), dim(rng)}, rng)},
                                  LossFn([](Graph&, const std::vector<Var>& v) { return project(nn::transpose(v[0]), 21); })};
               }});
  c.push_back({"slice_cols", [](Rng& rng) {
                 const std::size_t n = dim(rng, 2, 6);
                 const std::size_t b = rng.below(n), w = 1 + rng.below(n - b);
                 return std::pair{std::vector{random_tensor({dim(rng), n}, rng)},
                                  LossFn([b, w](Graph&, const std::vector<Var>& v) {
                                    return project(nn::slice_cols(v[0], b, w), 22);
                                  })};
               }});
  c.push_back({"concat_cols", [](Rng& rng) {
                 const std::size_t m = dim(rng);
                 return std::pair{std::vector{random_tensor({m, dim(rng)}, rng), random_tensor({m, dim(rng)}, rng),
                                              random_tensor({m, dim(rng)}, rng)},
                                  LossFn([](Graph&, const std::vector<Var>& v) {
                                    return project(nn::concat_cols(v), 23);
                                  })};
               }});
  c.push_back({"gather_rows", [](Rng& rng) {
                 const std::size_t m = dim(rng, 2, 6);
                 std::vector<std::size_t> rows(dim(rng, 1, 6));
                 for (auto& r : rows) r = rng.below(m);
                 return std::pair{std::vector{random_tensor({m, dim(rng)}, rng)},
                                  LossFn([rows](Graph&, const std::vector<Var>& v) {
                                    return project(nn::gather_rows(v[0], rows), 24);
                                  })};
               }});
  c.push_back({"dropout", [](Rng& rng) {
                 const std::uint64_t seed = rng.next();
                 return std::pair{std::vector{random_tensor({dim(rng), dim(rng)}, rng)},
                                  LossFn([seed](Graph&, const std::vector<Var>& v) {
                                    Rng mask_rng(seed);  // same mask on every evaluation
                                    return project(nn::dropout(v[0], 0.3, mask_rng), 25);
                                  })};
               }});
  c.push_back({"cross_entropy", [](Rng& rng) {
                 const std::size_t m = dim(rng), n = dim(rng, 3, 7);
                 std::vector<std::uint8_t> allowed(n, 1);
                 allowed[0] = 0;
                 std::vector<int> targets(m);
                 std::vector<double> weights(m);
                 for (std::size_t i = 0; i < m; ++i) {
                   targets[i] = 1 + static_cast<int>(rng.below(n - 1));
                   weights[i] = rng.uniform() + 0.1;
                 }
                 return std::pair{std::vector{random_tensor({m, n}, rng)},
                                  LossFn([=](Graph&, const std::vector<Var>& v) {
                                    return nn::cross_entropy(v[0], targets, weights, allowed);
                                  })};
               }});
  return c;
}

inline eags::ModelConfig tiny_config() {
  eags::ModelConfig c;
  c.vocab_size = 10;
  c.d_model = 8;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_ff = 12;
  c.max_positions = 12;
  return c;
}

// Random tiny model with non-trivial LayerNorm parameters.
inline eags::ModelParams random_model(Rng& rng) {
  eags::ModelParams p = eags::ModelParams::init(tiny_config(), rng.next());
  for (Tensor& t : p.tensors())
    for (double& v : t.data) v += rng.normal(0.0, 0.3);
  return p;
}

// Gradient of a loss w.r.t. every model tensor against central differences.
inline Result check_model(eags::ModelParams params,
                          const std::function<Var(Graph&, eags::ModelParams&)>& loss, double h = 1e-5,
                          double floor = 1e-6) {
  params.zero_grad();
  {
    Graph g;
    g.backward(loss(g, params));
  }
  std::vector<std::vector<double>> analytic;
  for (const Tensor& t : params.tensors()) analytic.push_back(t.grad);
  auto eval = [&]() {
    Graph g(false);
    return loss(g, params).value().data[0];
  };
  Result r;
  auto tensors = params.tensors();
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    for (std::size_t i = 0; i < tensors[k].size(); ++i) {
      const double saved = tensors[k].data[i];
      tensors[k].data[i] = saved + h;
      const double up = eval();
      tensors[k].data[i] = saved - h;
      const double down = eval();
      tensors[k].data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k][i];
      r.max_rel_error = std::max(r.max_rel_error, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor}));
      ++r.checked;
    }
  }
  return r;
}

// Masked-LM loss through the full encoder stack on a random sequence.
inline Result check_encoder_trial(Rng& rng) {
  eags::ModelParams p = random_model(rng);
  const std::size_t n = dim(rng, 3, 8);
  std::vector<int> ids(n);
  for (int& id : ids) id = static_cast<int>(rng.below(p.config().vocab_size));
  ids.back() = eags::kPad;  // exercises key masking
  std::vector<int> targets(n);
  for (int& t : targets) t = eags::kNumSpecial + static_cast<int>(rng.below(p.config().vocab_size - eags::kNumSpecial));
  const std::vector<double> w(n, 1.0);
  const auto support = eags::content_support(p.config().vocab_size);
  return check_model(p, [&](Graph& g, eags::ModelParams& m) {
    return eags::nn::cross_entropy(eags::forward_logits(g, m, ids), targets, w, support);
  });
}

// Diffusion loss on a random clean sequence and trajectory.
inline Result check_diffusion_loss_trial(Rng& rng) {
  eags::ModelParams p = random_model(rng);
  const std::size_t L = dim(rng, 2, 6), T = dim(rng, 1, L);
  std::vector<int> cond(dim(rng, 1, 3)), target(L);
  const int V = static_cast<int>(p.config().vocab_size);
  for (int& c : cond) c = eags::kNumSpecial + static_cast<int>(rng.below(static_cast<std::size_t>(V - eags::kNumSpecial)));
  for (int& c : target) c = eags::kNumSpecial + static_cast<int>(rng.below(static_cast<std::size_t>(V - eags::kNumSpecial)));
  const eags::TokenSeq x0 = eags::make_clean_sequence(cond, target, L);
  std::vector<double> entropy(L);
  for (double& e : entropy) e = rng.uniform();
  const eags::MaskTrajectory traj = eags::plan_trajectory(entropy, T);
  const std::size_t t = rng.below(T);
  return check_model(p, [&](Graph& g, eags::ModelParams& m) { return eags::diffusion_loss(g, m, x0, traj, t); });
}

}  // namespace gradcheck
