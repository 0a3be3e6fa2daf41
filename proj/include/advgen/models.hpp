#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "advgen/constraints.hpp"
#include "advgen/data.hpp"
#include "advgen/graph.hpp"
#include "advgen/losses.hpp"
#include "advgen/nn.hpp"
#include "advgen/optim.hpp"
#include "advgen/repair.hpp"
#include "advgen/repair_node.hpp"
#include "advgen/schema.hpp"
#include "advgen/textutil.hpp"
#include "advgen/transforms.hpp"

namespace advgen {

// ---------------------------------------------------------------------------
// Target classifier

struct TargetArch {
  std::vector<std::size_t> hidden = {16};
  double lr = 0.01;
  std::size_t epochs = 40;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

struct TargetClassifier {
  DenseNet net;               // over g-space
  TransformPipeline g;
  std::vector<std::string> label_names;
  double clean_error = -1.0;  // error rate on held-out test data; < 0 = unset
  std::vector<double> val_accuracy;  // per epoch
};

inline std::vector<int> predict_labels(const TargetClassifier& h,
                                       const std::vector<Record>& records) {
  return argmax_rows(predict(h.net, h.g.transform(records)));
}

inline double error_rate(const TargetClassifier& h, const Dataset& ds) {
  if (ds.size() == 0) throw ValidationError("error_rate: empty dataset");
  std::vector<int> preds = predict_labels(h, ds.rows);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i] != ds.labels[i]) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(preds.size());
}

inline TargetClassifier train_target(const Dataset& train, const Dataset& val,
                                     const TargetArch& arch) {
  train.validate();
  val.validate();
  if (train.size() == 0) throw ValidationError("train_target: empty training set");
  bool multi_class = false;
  for (int y : train.labels)
    if (y != train.labels[0]) multi_class = true;
  if (!multi_class)
    throw ValidationError("train_target: training data has a single class");

  TargetClassifier h;
  h.g = TransformPipeline::fit(train, "classifier");
  h.label_names = train.label_names;
  Rng rng(arch.seed);
  h.net = make_dense_net(h.g.width(), arch.hidden, h.label_names.size(),
                         Activation::tanh, Activation::linear, rng);

  Tensor x = h.g.transform(train.rows);
  std::size_t n = train.size(), d = h.g.width();
  std::vector<Tensor*> params = h.net.parameters();
  AdamState state = make_adam_state(params);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < arch.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += arch.batch_size) {
      std::size_t bs = std::min(arch.batch_size, n - start);
      Tensor xb({bs, d});
      std::vector<int> yb(bs);
      for (std::size_t i = 0; i < bs; ++i) {
        std::size_t src = order[start + i];
        for (std::size_t c = 0; c < d; ++c) xb.at(i, c) = x.at(src, c);
        yb[i] = train.labels[src];
      }
      Graph g;
      auto [bound, logits] = forward_bound(g, h.net, g.constant(xb));
      g.backward(cross_entropy(logits, yb));
      std::vector<Tensor> grads;
      for (Var p : bound.params) grads.push_back(g.grad(p));
      adam_step(params, grads, state, arch.lr);
    }
    h.val_accuracy.push_back(val.size() ? 1.0 - error_rate(h, val) : 0.0);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Adversarial generative models

enum class ConstraintMode { none, at_sampling, during_training };

inline std::string mode_name(ConstraintMode m) {
  switch (m) {
    case ConstraintMode::none: return "none";
    case ConstraintMode::at_sampling: return "P";
    case ConstraintMode::during_training: return "C";
  }
  return "none";
}

inline ConstraintMode mode_from_name(const std::string& s) {
  if (s == "none") return ConstraintMode::none;
  if (s == "P") return ConstraintMode::at_sampling;
  if (s == "C") return ConstraintMode::during_training;
  throw ValidationError("unknown constraint mode '" + s + "' (none|P|C)");
}

struct AdvConfig {
  std::string backbone = "wgan";  // wgan | tvae
  double alpha = 0.0;
  double beta = 0.0;
  ConstraintMode mode = ConstraintMode::none;
  double lr = 0.005;
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  double critic_clip = 0.01;      // wgan
  std::size_t critic_steps = 5;   // critic updates per generator update
  std::size_t latent_dim = 8;     // tvae
  std::vector<std::size_t> gen_hidden = {64, 64};
  std::vector<std::size_t> critic_hidden = {64, 64};
  double delta_cap = 1.0;         // max |delta| per continuous column, f-space
  double eps_eval = 0.5;          // default attack budget for reports
  std::uint64_t seed = 0;

  void validate() const {
    if (backbone != "wgan" && backbone != "tvae")
      throw ValidationError("config: backbone must be wgan or tvae");
    if (!(alpha >= 0.0) || !std::isfinite(alpha) || !(beta >= 0.0) ||
        !std::isfinite(beta))
      throw ValidationError("config: alpha/beta must be finite and >= 0");
    if (batch_size < 1) throw ValidationError("config: batch size must be >= 1");
    if (epochs < 1) throw ValidationError("config: epochs must be >= 1");
    if (lr <= 0.0) throw ValidationError("config: learning rate must be positive");
    if (backbone == "tvae" && latent_dim < 1)
      throw ValidationError("config: latent width must be >= 1");
    if (backbone == "wgan" && (critic_clip <= 0.0 || critic_steps < 1))
      throw ValidationError("config: critic clip/steps must be positive");
    if (!(delta_cap > 0.0) || !std::isfinite(delta_cap))
      throw ValidationError("config: delta cap must be positive");
  }
};

struct EpochStats {
  double l_dgm = 0.0;
  double l_adv = 0.0;
  double l_pert = 0.0;
};

struct AdvGenerator {
  AdvConfig config;
  TransformPipeline f;
  DenseNet generator;  // wgan: f-space -> head; tvae: decoder, latent -> head
  DenseNet critic;     // wgan only
  DenseNet encoder;    // tvae only, f-space -> [mu, logvar]
  std::optional<RepairPlan> plan;  // present for modes P and C
  std::string constraint_hash;     // fingerprint of the canonical set text
  std::vector<EpochStats> history;
};

struct AttackExample {
  Record original;
  Record adversarial;          // original data space, post repair/argmax
  std::vector<double> delta;   // f-space row: f(adversarial) - f(original)
  double delta_norm = 0.0;     // L2 of delta
  int label = 0;
  int pred_before = 0;
  int pred_after = 0;
};

inline std::string constraint_set_hash(const ConstraintSet& set) {
  return to_hex(fnv1a64(render(set)));
}

namespace detail {

/// x_tilde from a backbone head, in f-space: continuous mutable columns get
/// the residual x + delta_cap * tanh(head), so the perturbation is explicit
/// and |delta| per column stays below the cap; categorical mutable blocks get
/// softmax(head); immutable features copy the input.
inline Var compose_adversarial(Graph& g, const TransformPipeline& f, Var x_f, Var head,
                               double delta_cap) {
  (void)g;
  std::vector<Var> parts;
  for (const TransformPipeline::Column& c : f.columns()) {
    const Feature& feat = f.schema().features[c.feature_index];
    if (!feat.is_mutable) {
      parts.push_back(slice_cols(x_f, c.first_col, c.width));
    } else if (feat.continuous()) {
      Var delta = tanh(slice_cols(head, c.first_col, 1));
      if (delta_cap != 1.0) delta = mul_scalar(delta, delta_cap);
      parts.push_back(add(slice_cols(x_f, c.first_col, 1), delta));
    } else {
      parts.push_back(softmax(slice_cols(head, c.first_col, c.width)));
    }
  }
  return concat_cols(parts);
}

/// Squared-error mask: 1 on continuous columns, 0 on one-hot blocks.
inline Tensor continuous_mask(const TransformPipeline& f, std::size_t rows) {
  Tensor mask({rows, f.width()});
  for (const TransformPipeline::Column& c : f.columns())
    if (f.schema().features[c.feature_index].continuous())
      for (std::size_t r = 0; r < rows; ++r) mask.at(r, c.first_col) = 1.0;
  return mask;
}

struct ForwardPieces {
  Var x_tilde_f;   // final f-space adversarial batch (post repair in mode C)
  Var x_tilde_raw; // original-data-space tensor (one-hot blocks untouched)
  Var head;        // raw head output (pre softmax/tanh), for tvae recon
};

/// Shared forward path: compose, then (mode C only) route through repair in
/// the original data space and back before anything downstream sees the batch.
inline ForwardPieces adversarial_forward(Graph& g, const AdvGenerator& model, Var x_f,
                                         Var head, bool with_repair) {
  ForwardPieces out;
  out.head = head;
  Var x_tilde = compose_adversarial(g, model.f, x_f, head, model.config.delta_cap);
  if (with_repair) {
    Var raw = model.f.to_raw(x_tilde);
    Var repaired = repair_node(raw, *model.plan);
    out.x_tilde_raw = repaired;
    out.x_tilde_f = model.f.to_model(repaired);
  } else {
    out.x_tilde_f = x_tilde;
    out.x_tilde_raw = model.f.to_raw(x_tilde);
  }
  return out;
}

struct BatchTensors {
  Tensor x;                 // f-space batch
  std::vector<int> labels;
};

inline BatchTensors gather_batch(const Tensor& x_all, const std::vector<int>& labels,
                                 const std::vector<std::size_t>& order,
                                 std::size_t start, std::size_t bs) {
  std::size_t d = x_all.cols();
  BatchTensors out{Tensor({bs, d}), std::vector<int>(bs)};
  for (std::size_t i = 0; i < bs; ++i) {
    std::size_t src = order[start + i];
    for (std::size_t c = 0; c < d; ++c) out.x.at(i, c) = x_all.at(src, c);
    out.labels[i] = labels[src];
  }
  return out;
}

}  // namespace detail

/// Trains an adversarial DGM. `target` may be null only when alpha == 0;
/// constraint set/ordering are required for modes P and C. This single loop
/// also serves as the plain backbone when alpha = beta = 0 and mode none:
/// the zero-coefficient guards keep the tape identical to an unmodified
/// WGAN/TVAE, which the degenerate-equivalence test pins bitwise.
inline AdvGenerator train_advdgm(const Dataset& data, const TargetClassifier* target,
                                 const ConstraintSet* set, const RepairOrdering* ordering,
                                 const AdvConfig& config) {
  config.validate();
  data.validate();
  if (data.size() == 0) throw ValidationError("train_advdgm: empty dataset");
  if (config.alpha != 0.0 && !target)
    throw ValidationError("train_advdgm: alpha > 0 requires a target classifier");
  if (config.mode != ConstraintMode::none && !set)
    throw ValidationError("train_advdgm: constraint mode " + mode_name(config.mode) +
                          " requires a constraint set");
  if (set && schema_fingerprint(set->schema) != schema_fingerprint(data.schema))
    throw ValidationError("train_advdgm: constraint schema differs from data schema");
  if (target &&
      schema_fingerprint(target->g.schema()) != schema_fingerprint(data.schema))
    throw ValidationError("train_advdgm: target schema differs from data schema");

  AdvGenerator model;
  model.config = config;
  model.f = TransformPipeline::fit(data, "generator");
  std::size_t d = model.f.width();

  if (set) {
    RepairOrdering ord =
        ordering ? *ordering : random_ordering(*set, config.seed);
    model.plan = compile_plan(*set, ord, 0.0, model.f.continuous_columns());
    model.constraint_hash = constraint_set_hash(*set);
  }
  bool repair_in_training = config.mode == ConstraintMode::during_training;

  Rng rng(config.seed);
  bool is_wgan = config.backbone == "wgan";
  if (is_wgan) {
    model.generator = make_dense_net(d, config.gen_hidden, d, Activation::tanh,
                                     Activation::linear, rng);
    model.critic = make_dense_net(d, config.critic_hidden, 1, Activation::tanh,
                                  Activation::linear, rng);
  } else {
    model.encoder = make_dense_net(d, config.gen_hidden, 2 * config.latent_dim,
                                   Activation::tanh, Activation::linear, rng);
    model.generator = make_dense_net(config.latent_dim, config.gen_hidden, d,
                                     Activation::tanh, Activation::linear, rng);
  }

  Tensor x_all = model.f.transform(data.rows);
  std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  std::vector<Tensor*> gen_params = model.generator.parameters();
  std::vector<Tensor*> enc_params = model.encoder.parameters();
  std::vector<Tensor*> critic_params = model.critic.parameters();
  // TVAE updates encoder and decoder together through one optimizer.
  std::vector<Tensor*> gen_side_params = gen_params;
  if (!is_wgan)
    gen_side_params.insert(gen_side_params.end(), enc_params.begin(), enc_params.end());
  AdamState gen_state = make_adam_state(gen_side_params);
  AdamState critic_state = make_adam_state(critic_params);

  Tensor mask = detail::continuous_mask(model.f, config.batch_size);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    EpochStats stats;
    std::size_t gen_steps = 0, batch_index = 0;

    for (std::size_t start = 0; start < n; start += config.batch_size, ++batch_index) {
      std::size_t bs = std::min(config.batch_size, n - start);
      detail::BatchTensors batch =
          detail::gather_batch(x_all, data.labels, order, start, bs);

      Tensor eps({bs, config.latent_dim});
      if (!is_wgan)
        for (double& v : eps.data) v = rng.normal();

      if (is_wgan) {
        // Critic step on every batch; fakes are detached (and repaired in
        // mode C -- the critic sees what sampling would produce).
        Tensor fake;
        {
          Graph g;
          Var x = g.constant(batch.x);
          auto [gb, head] = forward_bound(g, model.generator, x, false);
          (void)gb;
          detail::ForwardPieces fp =
              detail::adversarial_forward(g, model, x, head, repair_in_training);
          fake = g.value(fp.x_tilde_f);
        }
        {
          Graph g;
          auto [cb, c_real] = forward_bound(g, model.critic, g.constant(batch.x));
          Var c_fake = forward(g, model.critic, cb, g.constant(fake));
          g.backward(sub(mean(c_fake), mean(c_real)));
          std::vector<Tensor> grads;
          for (Var p : cb.params) grads.push_back(g.grad(p));
          adam_step(critic_params, grads, critic_state, config.lr);
          weight_clip(critic_params, config.critic_clip);
        }
        if ((batch_index + 1) % config.critic_steps != 0) continue;
      }

      // Generator (or encoder/decoder) step.
      Graph g;
      Var x = g.constant(batch.x);
      Var head{}, kl{};
      BoundNet gen_bound, enc_bound;
      if (is_wgan) {
        auto [bound, h] = forward_bound(g, model.generator, x);
        gen_bound = bound;
        head = h;
      } else {
        auto [eb, enc_out] = forward_bound(g, model.encoder, x);
        enc_bound = eb;
        Var mu = slice_cols(enc_out, 0, config.latent_dim);
        Var logvar = slice_cols(enc_out, config.latent_dim, config.latent_dim);
        Var z = add(mu, mul(exp(mul_scalar(logvar, 0.5)), g.constant(eps)));
        auto [db, h] = forward_bound(g, model.generator, z);
        gen_bound = db;
        head = h;
        kl = kl_gaussian_node(g, mu, logvar);
      }
      detail::ForwardPieces fp =
          detail::adversarial_forward(g, model, x, head, repair_in_training);

      Var l_dgm{};
      if (is_wgan) {
        auto [cb, c_fake] = forward_bound(g, model.critic, fp.x_tilde_f, false);
        (void)cb;
        l_dgm = neg(mean(c_fake));
      } else {
        Tensor* m = &mask;
        Tensor partial;
        if (bs != mask.rows()) {
          partial = detail::continuous_mask(model.f, bs);
          m = &partial;
        }
        Var diff = sub(fp.x_tilde_f, x);
        Var recon = mean(sum_rows(mul(mul(diff, diff), g.constant(*m))));
        for (const TransformPipeline::Block& b : model.f.categorical_blocks()) {
          Var logits = slice_cols(fp.head, b.first_col, b.width);
          Var targets = slice_cols(x, b.first_col, b.width);
          recon = add(recon, cross_entropy_soft(logits, targets));
        }
        l_dgm = add(recon, kl);
      }

      Var l_adv{}, l_pert{};
      bool have_adv = config.alpha != 0.0;
      bool have_pert = config.beta != 0.0;
      if (have_adv) {
        Var g_space = target->g.to_model(fp.x_tilde_raw);
        l_adv = adv_loss_node(g, target->net, g_space, batch.labels);
      }
      if (have_pert) l_pert = pert_loss_node(g, sub(fp.x_tilde_f, x));
      Var total = total_loss_node(g, l_dgm, have_adv ? &l_adv : nullptr,
                                  have_pert ? &l_pert : nullptr, config.alpha,
                                  config.beta);

      g.backward(total);
      std::vector<Tensor> grads;
      for (Var p : gen_bound.params) grads.push_back(g.grad(p));
      if (!is_wgan)
        for (Var p : enc_bound.params) grads.push_back(g.grad(p));
      adam_step(gen_side_params, grads, gen_state, config.lr);

      stats.l_dgm += g.value(l_dgm).item();
      if (have_adv) stats.l_adv += g.value(l_adv).item();
      if (have_pert) stats.l_pert += g.value(l_pert).item();
      ++gen_steps;
    }

    if (gen_steps) {
      stats.l_dgm /= static_cast<double>(gen_steps);
      stats.l_adv /= static_cast<double>(gen_steps);
      stats.l_pert /= static_cast<double>(gen_steps);
    }
    model.history.push_back(stats);
  }
  return model;
}

inline AdvGenerator train_advdgm(const Dataset& data, const TargetClassifier& target,
                                 const ConstraintSet* set, const RepairOrdering* ordering,
                                 const AdvConfig& config) {
  return train_advdgm(data, &target, set, ordering, config);
}

/// Unmodified backbone training (WGAN or TVAE): the reference trajectory the
/// degenerate adversarial config must reproduce bit-for-bit.
inline AdvGenerator train_backbone(const Dataset& data, const AdvConfig& config) {
  AdvConfig plain = config;
  plain.alpha = 0.0;
  plain.beta = 0.0;
  plain.mode = ConstraintMode::none;
  return train_advdgm(data, nullptr, nullptr, nullptr, plain);
}

// ---------------------------------------------------------------------------
// Sampling

inline std::vector<AttackExample> generate(const AdvGenerator& model,
                                           const TargetClassifier& target,
                                           const Dataset& originals) {
  originals.validate();
  if (schema_fingerprint(originals.schema) != schema_fingerprint(model.f.schema()))
    throw ValidationError("generate: originals schema differs from model schema");
  if (schema_fingerprint(target.g.schema()) != schema_fingerprint(model.f.schema()))
    throw ValidationError("generate: target schema differs from model schema");
  bool is_wgan = model.config.backbone == "wgan";
  std::size_t n = originals.size();

  Tensor x_f = model.f.transform(originals.rows);
  Rng rng(model.config.seed);
  Tensor x_tilde;
  {
    Graph g;
    Var x = g.constant(x_f);
    Var head{};
    if (is_wgan) {
      auto [b, h] = forward_bound(g, model.generator, x, false);
      (void)b;
      head = h;
    } else {
      auto [eb, enc_out] = forward_bound(g, model.encoder, x, false);
      (void)eb;
      Var mu = slice_cols(enc_out, 0, model.config.latent_dim);
      Var logvar = slice_cols(enc_out, model.config.latent_dim, model.config.latent_dim);
      Tensor eps({n, model.config.latent_dim});
      for (double& v : eps.data) v = rng.normal();
      Var z = add(mu, mul(exp(mul_scalar(logvar, 0.5)), g.constant(eps)));
      auto [db, h] = forward_bound(g, model.generator, z, false);
      (void)db;
      head = h;
    }
    // Sampling always emits raw composed output; repair happens on records.
    x_tilde = g.value(detail::compose_adversarial(g, model.f, x, head,
                                                  model.config.delta_cap));
  }

  std::vector<Record> adversarial = model.f.inverse_transform(x_tilde);
  // Immutable features must come through untouched; re-copy them so the
  // scale/un-scale round trip cannot perturb the last bit.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < originals.schema.features.size(); ++c)
      if (!originals.schema.features[c].is_mutable)
        adversarial[i].values[c] = originals.rows[i].values[c];
  if (model.config.mode != ConstraintMode::none) {
    if (!model.plan) throw ValidationError("generate: mode requires a repair plan");
    for (Record& rec : adversarial) {
      RepairOutcome out = repair(*model.plan, value_map(originals.schema, rec));
      for (std::size_t i = 0; i < originals.schema.features.size(); ++i) {
        const Feature& f = originals.schema.features[i];
        if (f.continuous()) rec.values[i] = out.repaired.at(f.name);
      }
    }
  }

  Tensor adv_f = model.f.transform(adversarial);
  std::vector<int> before = predict_labels(target, originals.rows);
  std::vector<int> after = predict_labels(target, adversarial);

  std::vector<AttackExample> out(n);
  std::size_t d = model.f.width();
  for (std::size_t i = 0; i < n; ++i) {
    AttackExample& ex = out[i];
    ex.original = originals.rows[i];
    ex.adversarial = adversarial[i];
    ex.delta.resize(d);
    double sq = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      ex.delta[c] = adv_f.at(i, c) - x_f.at(i, c);
      sq += ex.delta[c] * ex.delta[c];
    }
    ex.delta_norm = std::sqrt(sq);
    ex.label = originals.labels[i];
    ex.pred_before = before[i];
    ex.pred_after = after[i];
  }
  return out;
}

/// Violation rate of generated adversarial records against a set.
inline double attack_violation_rate(const ConstraintSet& set,
                                    const std::vector<AttackExample>& examples) {
  std::vector<std::map<std::string, double>> records;
  records.reserve(examples.size());
  for (const AttackExample& ex : examples)
    records.push_back(value_map(set.schema, ex.adversarial));
  return violation_rate(set, records);
}

}  // namespace advgen
