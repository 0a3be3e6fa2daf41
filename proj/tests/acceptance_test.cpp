// Acceptance suite: ten end-to-end checks over the bundled fixtures, one
// printed line per criterion. Unlike the unit tests this is a plain binary so
// the full list always runs and the summary reads as a checklist; the exit
// code is the number of failed criteria.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "advgen/constraints.hpp"
#include "advgen/csv.hpp"
#include "advgen/data.hpp"
#include "advgen/graph.hpp"
#include "advgen/losses.hpp"
#include "advgen/metrics.hpp"
#include "advgen/models.hpp"
#include "advgen/nn.hpp"
#include "advgen/repair.hpp"
#include "advgen/repair_node.hpp"
#include "advgen/rng.hpp"
#include "advgen/runconfig.hpp"
#include "advgen/schema.hpp"
#include "advgen/tensor.hpp"
#include "advgen/textutil.hpp"
#include "advgen/transforms.hpp"

using namespace advgen;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void run_criterion(int n, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  std::printf("criterion %2d: %s - %s\n", n, o.pass ? "PASS" : "FAIL",
              o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(double v, int digits = 4) { return format_fixed(v, digits); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

bool bits_equal(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

bool bits_equal(const std::map<std::string, double>& a,
                const std::map<std::string, double>& b) {
  if (a.size() != b.size()) return false;
  auto it = b.begin();
  for (const auto& [key, value] : a) {
    if (key != it->first || !bits_equal(value, it->second)) return false;
    ++it;
  }
  return true;
}

bool bits_equal(const DenseNet& a, const DenseNet& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const Tensor& wa = a.layers[i].weight;
    const Tensor& wb = b.layers[i].weight;
    const Tensor& ba = a.layers[i].bias;
    const Tensor& bb = b.layers[i].bias;
    if (wa.size() != wb.size() || ba.size() != bb.size()) return false;
    for (std::size_t j = 0; j < wa.size(); ++j)
      if (!bits_equal(wa[j], wb[j])) return false;
    for (std::size_t j = 0; j < ba.size(); ++j)
      if (!bits_equal(ba[j], bb[j])) return false;
  }
  return true;
}

std::map<std::string, double> uniform_record(Rng& rng, const FeatureSchema& schema) {
  std::map<std::string, double> rec;
  for (const Feature& f : schema.features)
    if (f.continuous()) rec[f.name] = rng.uniform(f.min, f.max);
  return rec;
}

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double lo = -2.0,
                     double hi = 2.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

Var weighted_sum(Graph& g, Var out, const Tensor& weights) {
  return sum(mul(out, g.constant(weights)));
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Everything the later criteria share: the fixture files plus one trained
// target classifier over the standard fixture split.
struct Shared {
  std::string dir = FIXTURES_DIR;
  FeatureSchema schema;
  ConstraintSet linear;
  ConstraintSet mixed;
  RepairOrdering linear_ord;
  RepairOrdering mixed_ord;
  RepairPlan linear_plan;
  RepairPlan mixed_plan;
  Dataset toy;
  RunConfig cfg;
  SplitResult parts;
  TargetClassifier target;
  double clean_error = 0.0;

  // Filled by criterion 5 and reused by 6.
  std::vector<std::vector<AttackExample>> generated;

  Shared() {
    schema = schema_from_json(
        nlohmann::json::parse(read_file(dir + "/toy_schema.json")));
    linear = parse_constraints(read_file(dir + "/toy_linear.cons"), schema);
    mixed = parse_constraints(read_file(dir + "/toy_mixed.cons"), schema);
    linear_ord = random_ordering(linear, 0);
    mixed_ord = random_ordering(mixed, 0);
    linear_plan = compile_plan(linear, linear_ord);
    mixed_plan = compile_plan(mixed, mixed_ord);
    cfg = load_runconfig(dir + "/toy_run.json");
    toy = load_csv(cfg.dataset, schema, cfg.label_column);
    parts = split(toy, cfg.split);
    target = train_target(parts.train, parts.val, cfg.target);
    clean_error = error_rate(target, parts.test);
  }
};

}  // namespace

int main() {
  std::optional<Shared> shared;
  try {
    shared.emplace();
  } catch (const std::exception& e) {
    std::printf("fixture setup failed: %s\n", e.what());
    return 10;
  }
  Shared& sh = *shared;

  // 1. Repair guarantee: uniform random records over the schema domains come
  // out of repair satisfying every constraint, fast.
  run_criterion(1, [&]() -> Outcome {
    constexpr std::size_t kRecords = 10000;
    auto t0 = std::chrono::steady_clock::now();
    struct Case {
      const char* name;
      const ConstraintSet* set;
      const RepairPlan* plan;
    };
    for (const Case& c : {Case{"toy_linear", &sh.linear, &sh.linear_plan},
                          Case{"toy_mixed", &sh.mixed, &sh.mixed_plan}}) {
      Rng rng(90210);
      std::vector<std::map<std::string, double>> repaired;
      repaired.reserve(kRecords);
      for (std::size_t i = 0; i < kRecords; ++i) {
        RepairOutcome out = repair(*c.plan, uniform_record(rng, sh.schema));
        if (!out.infeasible.empty())
          return {false, std::string(c.name) + ": repair reported infeasible"};
        repaired.push_back(std::move(out.repaired));
      }
      double rate = violation_rate(*c.set, repaired);
      if (rate != 0.0)
        return {false, std::string(c.name) + ": post-repair violation rate " + fmt(rate)};
    }
    double secs = seconds_since(t0);
    if (secs >= 10.0) return {false, "took " + fmt(secs, 2) + "s (budget 10s)"};
    return {true, "post-repair violation rate 0 on both feasible sets, 10000 records each, " +
                      fmt(secs, 2) + "s"};
  });

  // 2. Identity on satisfying records and idempotence of double repair, both
  // bitwise.
  run_criterion(2, [&]() -> Outcome {
    constexpr std::size_t kRecords = 10000;
    struct Case {
      const char* name;
      const ConstraintSet* set;
      const RepairPlan* plan;
    };
    for (const Case& c : {Case{"toy_linear", &sh.linear, &sh.linear_plan},
                          Case{"toy_mixed", &sh.mixed, &sh.mixed_plan}}) {
      Rng rng(31337);
      for (std::size_t i = 0; i < kRecords; ++i) {
        std::map<std::string, double> rec;
        do {
          rec = uniform_record(rng, sh.schema);
        } while (violation_rate(*c.set, {rec}) != 0.0);
        RepairOutcome out = repair(*c.plan, rec);
        if (out.changed || !bits_equal(out.repaired, rec))
          return {false, std::string(c.name) + ": satisfying record was altered"};
      }
      for (std::size_t i = 0; i < kRecords; ++i) {
        RepairOutcome once = repair(*c.plan, uniform_record(rng, sh.schema));
        RepairOutcome twice = repair(*c.plan, once.repaired);
        if (!bits_equal(twice.repaired, once.repaired))
          return {false, std::string(c.name) + ": double repair diverged from single"};
      }
    }
    return {true, "10000 satisfying records bitwise unchanged, double repair bitwise "
                  "idempotent, both sets"};
  });

  // 3. Finite-difference agreement for (a) every graph op, (b) repair_node
  // composed with a dense layer, (c) the full mode-C generator objective.
  run_criterion(3, [&]() -> Outcome {
    constexpr double kTol = 1e-4;
    double worst = 0.0;
    auto note = [&](const GradCheckResult& r) {
      worst = std::max(worst, r.max_rel_err);
      return r.max_rel_err <= kTol;
    };

    // (a) Op sweep, 100 random points per op, kinks avoided by margin.
    {
      Rng rng(20240817);
      auto resample_away_from = [&](Tensor& t, double kink, double margin) {
        for (double& v : t.data)
          while (std::abs(v - kink) < margin) v = rng.uniform(-2.0, 2.0);
      };
      for (int i = 0; i < 100; ++i) {
        Tensor w23 = random_tensor(rng, {2, 3});
        Tensor a23 = random_tensor(rng, {2, 3});
        Tensor b23 = random_tensor(rng, {2, 3});
        Tensor w22 = random_tensor(rng, {2, 2});
        Tensor w21 = random_tensor(rng, {2, 1});
        Tensor wcat = random_tensor(rng, {2, 6});

        bool ok =
            note(grad_check(
                [&](Graph& g, const std::vector<Var>& v) {
                  return weighted_sum(g, add(v[0], v[1]), w23);
                },
                {a23, b23})) &&
            note(grad_check(
                [&](Graph& g, const std::vector<Var>& v) {
                  return weighted_sum(g, sub(v[0], v[1]), w23);
                },
                {a23, b23})) &&
            note(grad_check(
                [&](Graph& g, const std::vector<Var>& v) {
                  return weighted_sum(g, mul(v[0], v[1]), w23);
                },
                {a23, b23})) &&
            note(grad_check(
                [&](Graph& g, const std::vector<Var>& v) {
                  return weighted_sum(g, add_scalar(mul_scalar(v[0], -1.7), 0.3), w23);
                },
                {a23})) &&
            note(grad_check(
                [&](Graph& g, const std::vector<Var>& v) {
                  return weighted_sum(g, add_rowvec(v[0], v[1]), w23);
                },
                {a23, random_tensor(rng, {3})})) &&
            note(grad_check(
                [&](Graph& g, const std::vector<Var>& v) {
                  return weighted_sum(g, matmul(v[0], v[1]), w22);
                },
                {a23, random_tensor(rng, {3, 2})})) &&
            note(grad_check(
                [&](Graph& g, const std::vector<Var>& v) {
                  return weighted_sum(g, neg(tanh(v[0])), w23);
                },
                {a23})) &&
            note(grad_check(
                [&](Graph& g, const std::vector<Var>& v) {
                  return weighted_sum(g, sigmoid(v[0]), w23);
                },
                {a23})) &&
            note(grad_check(
                [&](Graph& g, const std::vector<Var>& v) {
                  return weighted_sum(g, exp(v[0]), w23);
                },
                {a23})) &&
            note(grad_check(
                [&](Graph& g, const std::vector<Var>& v) {
                  return weighted_sum(g, softmax(v[0]), w23);
                },
                {a23}));
        if (!ok) return {false, "op sweep rel err " + fmt(worst, 6) + " > 1e-4"};

        Tensor rin = random_tensor(rng, {2, 3});
        resample_away_from(rin, 0.0, 0.05);
        ok = note(grad_check(
            [&](Graph& g, const std::vector<Var>& v) {
              return weighted_sum(g, relu(v[0]), w23);
            },
            {rin}));

        Tensor pos = random_tensor(rng, {2, 3}, 0.2, 3.0);
        ok = ok &&
             note(grad_check(
                 [&](Graph& g, const std::vector<Var>& v) {
                   return weighted_sum(g, log(v[0]), w23);
                 },
                 {pos})) &&
             note(grad_check(
                 [&](Graph& g, const std::vector<Var>& v) {
                   return weighted_sum(g, sqrt(v[0]), w23);
                 },
                 {pos}));

        Tensor ma = random_tensor(rng, {2, 3});
        Tensor mb = random_tensor(rng, {2, 3});
        for (std::size_t j = 0; j < ma.size(); ++j)
          while (std::abs(ma[j] - mb[j]) < 0.05) mb[j] = rng.uniform(-2.0, 2.0);
        ok = ok &&
             note(grad_check(
                 [&](Graph& g, const std::vector<Var>& v) {
                   return weighted_sum(g, min(v[0], v[1]), w23);
                 },
                 {ma, mb})) &&
             note(grad_check(
                 [&](Graph& g, const std::vector<Var>& v) {
                   return weighted_sum(g, max(v[0], v[1]), w23);
                 },
                 {ma, mb}));

        Tensor cin = random_tensor(rng, {2, 3});
        resample_away_from(cin, -1.0, 0.05);
        resample_away_from(cin, 1.0, 0.05);
        ok = ok && note(grad_check(
                       [&](Graph& g, const std::vector<Var>& v) {
                         return weighted_sum(g, clamp(v[0], -1.0, 1.0), w23);
                       },
                       {cin}));

        ok = ok &&
             note(grad_check(
                 [&](Graph&, const std::vector<Var>& v) { return sum(v[0]); }, {a23})) &&
             note(grad_check(
                 [&](Graph&, const std::vector<Var>& v) { return mean(v[0]); }, {a23})) &&
             note(grad_check(
                 [&](Graph& g, const std::vector<Var>& v) {
                   return weighted_sum(g, sum_rows(v[0]), w21);
                 },
                 {a23}));

        Tensor nin = random_tensor(rng, {4});
        while (std::sqrt(nin[0] * nin[0] + nin[1] * nin[1] + nin[2] * nin[2] +
                         nin[3] * nin[3]) < 0.1)
          nin = random_tensor(rng, {4});
        ok = ok && note(grad_check(
                       [&](Graph&, const std::vector<Var>& v) { return l2_norm(v[0]); },
                       {nin}));

        Tensor soft = random_tensor(rng, {2, 3}, 0.1, 1.0);
        for (std::size_t row = 0; row < 2; ++row) {
          double s = soft.at(row, 0) + soft.at(row, 1) + soft.at(row, 2);
          for (std::size_t col = 0; col < 3; ++col) soft.at(row, col) /= s;
        }
        ok = ok &&
             note(grad_check(
                 [&](Graph&, const std::vector<Var>& v) {
                   return cross_entropy(v[0], {1, 0});
                 },
                 {a23})) &&
             note(grad_check(
                 [&](Graph& g, const std::vector<Var>& v) {
                   return cross_entropy_soft(v[0], g.constant(soft));
                 },
                 {a23}));

        ok = ok &&
             note(grad_check(
                 [&](Graph& g, const std::vector<Var>& v) {
                   return weighted_sum(g, slice_cols(v[0], 1, 2), w22);
                 },
                 {a23})) &&
             note(grad_check(
                 [&](Graph& g, const std::vector<Var>& v) {
                   return weighted_sum(g, concat_cols({v[0], v[1]}), wcat);
                 },
                 {a23, b23})) &&
             note(grad_check(
                 [&](Graph& g, const std::vector<Var>& v) {
                   return weighted_sum(
                       g, col_affine(v[0], {2.0, -0.5, 1.25}, {0.1, 0.0, -3.0}), w23);
                 },
                 {a23}));
        if (!ok) return {false, "op sweep rel err " + fmt(worst, 6) + " > 1e-4"};
      }
    }

    // (b) repair_node under a dense head on the 10-constraint fixture set,
    // batches resampled away from clamp/gate switching surfaces.
    {
      Rng rng(404);
      auto non_kink_batch = [&](std::size_t rows) {
        Tensor batch({rows, 2});
        for (std::size_t r = 0; r < rows; ++r) {
          for (;;) {
            std::map<std::string, double> rec = uniform_record(rng, sh.schema);
            if (repair(sh.mixed_plan, rec).min_switch_margin > 1e-3) {
              batch.at(r, 0) = rec.at("x1");
              batch.at(r, 1) = rec.at("x2");
              break;
            }
          }
        }
        return batch;
      };
      Rng nrng(808);
      DenseNet net =
          make_dense_net(2, {5}, 1, Activation::tanh, Activation::linear, nrng);
      // Records span [-8, 8]; shrink the first layer so tanh stays out of its
      // saturated tail, where gradients sink below finite-difference noise.
      for (double& w : net.layers[0].weight.data) w *= 0.1;
      for (int trial = 0; trial < 100; ++trial) {
        std::vector<Tensor> point;
        point.push_back(non_kink_batch(2));
        for (const Tensor* p : net.parameters()) point.push_back(*p);
        bool ok = note(grad_check(
            [&](Graph& g, const std::vector<Var>& v) {
              BoundNet b;
              b.params.assign(v.begin() + 1, v.end());
              return mean(forward(g, net, b, repair_node(v[0], sh.mixed_plan)));
            },
            point));
        if (!ok)
          return {false, "repair_node+dense rel err " + fmt(worst, 6) + " > 1e-4"};
      }
    }

    // (c) The complete mode-C objective (WGAN term + alpha/beta terms through
    // the repair layer) differentiated w.r.t. the generator parameters.
    {
      AdvConfig cfg;
      cfg.backbone = "wgan";
      cfg.mode = ConstraintMode::during_training;
      cfg.alpha = 5.0;
      cfg.beta = 1.0;
      cfg.epochs = 2;
      cfg.batch_size = 32;
      cfg.gen_hidden = {8, 8};
      cfg.critic_hidden = {8, 8};
      cfg.delta_cap = 0.3;
      cfg.seed = 7;
      AdvGenerator model =
          train_advdgm(sh.parts.train, &sh.target, &sh.mixed, &sh.mixed_ord, cfg);
      std::size_t d = model.f.width();
      std::map<std::string, std::size_t> cols = model.f.continuous_columns();

      int rounds = 0;
      for (std::uint64_t attempt = 0; rounds < 10; ++attempt) {
        if (attempt > 200) return {false, "mode-C loss: no non-kink round found"};
        Rng prng(1000 + attempt);
        DenseNet gen = make_dense_net(d, {8, 8}, d, Activation::tanh,
                                      Activation::linear, prng);
        std::size_t bs = 8;
        Tensor xb({bs, d});
        std::vector<Record> rows(bs);
        std::vector<int> yb(bs);
        for (std::size_t i = 0; i < bs; ++i) {
          std::size_t src = (attempt * bs + i) % sh.parts.train.size();
          rows[i] = sh.parts.train.rows[src];
          yb[i] = sh.parts.train.labels[src];
        }
        Tensor xf = model.f.transform(rows);
        for (std::size_t i = 0; i < xb.size(); ++i) xb[i] = xf[i];

        // Composed raw rows must sit clear of every repair switching surface,
        // or the finite differences would straddle a kink.
        bool clear = true;
        {
          Graph g;
          Var x = g.constant(xb);
          auto [bound, head] = forward_bound(g, gen, x, false);
          (void)bound;
          Var xt = detail::compose_adversarial(g, model.f, x, head, cfg.delta_cap);
          Tensor raw = g.value(model.f.to_raw(xt));
          for (std::size_t r = 0; r < bs && clear; ++r) {
            std::map<std::string, double> rec;
            for (const auto& [name, col] : cols) rec[name] = raw.at(r, col);
            if (repair(*model.plan, rec).min_switch_margin <= 1e-3) clear = false;
          }
        }
        if (!clear) continue;

        std::vector<Tensor> point;
        for (const Tensor* p : gen.parameters()) point.push_back(*p);
        bool ok = note(grad_check(
            [&](Graph& g, const std::vector<Var>& v) {
              BoundNet b;
              b.params = v;
              Var x = g.constant(xb);
              Var head = forward(g, gen, b, x);
              detail::ForwardPieces fp =
                  detail::adversarial_forward(g, model, x, head, true);
              auto [cb, c_fake] = forward_bound(g, model.critic, fp.x_tilde_f, false);
              (void)cb;
              Var l_dgm = neg(mean(c_fake));
              Var l_adv = adv_loss_node(g, sh.target.net,
                                        sh.target.g.to_model(fp.x_tilde_raw), yb);
              Var l_pert = pert_loss_node(g, sub(fp.x_tilde_f, x));
              return total_loss_node(g, l_dgm, &l_adv, &l_pert, cfg.alpha, cfg.beta);
            },
            point));
        if (!ok) return {false, "mode-C loss rel err " + fmt(worst, 6) + " > 1e-4"};
        ++rounds;
      }
    }
    return {true, "op sweep, repair_node+dense and mode-C loss all within 1e-4 "
                  "(worst rel err " + fmt(worst, 6) + ")"};
  });

  // 4. alpha = beta = 0 with mode none must be the plain backbone, bit for
  // bit, even with a target classifier supplied.
  run_criterion(4, [&]() -> Outcome {
    for (const char* backbone : {"wgan", "tvae"}) {
      AdvConfig cfg;
      cfg.backbone = backbone;
      cfg.alpha = 0.0;
      cfg.beta = 0.0;
      cfg.mode = ConstraintMode::none;
      cfg.epochs = 50;
      cfg.seed = 7;
      AdvGenerator degenerate = train_advdgm(sh.toy, &sh.target, nullptr, nullptr, cfg);
      AdvGenerator plain = train_backbone(sh.toy, cfg);
      if (degenerate.history.size() != plain.history.size())
        return {false, std::string(backbone) + ": history length differs"};
      for (std::size_t e = 0; e < plain.history.size(); ++e)
        if (!bits_equal(degenerate.history[e].l_dgm, plain.history[e].l_dgm) ||
            !bits_equal(degenerate.history[e].l_adv, plain.history[e].l_adv) ||
            !bits_equal(degenerate.history[e].l_pert, plain.history[e].l_pert))
          return {false, std::string(backbone) + ": loss sequence differs at epoch " +
                             std::to_string(e)};
      if (!bits_equal(degenerate.generator, plain.generator) ||
          !bits_equal(degenerate.critic, plain.critic) ||
          !bits_equal(degenerate.encoder, plain.encoder))
        return {false, std::string(backbone) + ": final parameters differ"};
    }
    return {true, "50-epoch trajectories and final parameters bit-identical to the "
                  "plain backbone, wgan and tvae"};
  });

  // 5. Toy end-to-end: accurate target, then the fixture attack grid; the
  // constrained modes must be violation-free and beat the clean error at
  // eps = 0.5.
  run_criterion(5, [&]() -> Outcome {
    auto t0 = std::chrono::steady_clock::now();
    double accuracy = 1.0 - sh.clean_error;
    if (accuracy < 0.95)
      return {false, "target test accuracy " + fmt(accuracy) + " < 0.95"};

    std::string modes;
    double violation_none = 0.0;
    double asr_c = 0.0;
    for (const RunConfig::GridPoint& point : sh.cfg.grid_points()) {
      AdvGenerator model = train_advdgm(sh.parts.train, &sh.target, &sh.linear,
                                        &sh.linear_ord, point.config);
      std::vector<AttackExample> examples = generate(model, sh.target, sh.parts.test);
      double violation = attack_violation_rate(sh.linear, examples);
      double rate = asr(examples, &sh.linear, 0.5);
      std::string mode = mode_name(point.config.mode);
      if (mode == "none") {
        violation_none = violation;
      } else {
        if (violation != 0.0)
          return {false, point.tag + ": violation rate " + fmt(violation) + " != 0"};
        if (!(rate > sh.clean_error))
          return {false, point.tag + ": ASR(0.5) " + fmt(rate) +
                             " not above clean error " + fmt(sh.clean_error)};
        if (mode == "C") asr_c = rate;
      }
      if (!modes.empty()) modes += ", ";
      modes += mode;
      sh.generated.push_back(std::move(examples));
    }
    double secs = seconds_since(t0);
    if (secs >= 300.0) return {false, "took " + fmt(secs, 1) + "s (budget 300s)"};
    return {true, "accuracy " + fmt(accuracy) + ", C-AdvWGAN ASR(0.5) " + fmt(asr_c) +
                      " > clean error " + fmt(sh.clean_error) +
                      ", P/C violation 0, unconstrained violation " +
                      fmt(violation_none) + " (modes " + modes + ", " +
                      fmt(secs, 1) + "s)"};
  });

  // 6. ASR semantics: the hand-built 4-example set scores exactly one half,
  // and ASR never decreases with the budget on any generated set.
  run_criterion(6, [&]() -> Outcome {
    auto example = [&](double x1, double x2, double norm, int before, int after) {
      AttackExample ex;
      ex.original = Record{{0.0, 0.0}};
      ex.adversarial = Record{{x1, x2}};
      ex.delta = {norm, 0.0};
      ex.delta_norm = norm;
      ex.label = before;
      ex.pred_before = before;
      ex.pred_after = after;
      return ex;
    };
    // Two clean successes, one non-flip, one success-but-over-budget.
    std::vector<AttackExample> hand = {
        example(0.1, 0.2, 0.20, 1, 0),
        example(-0.5, 0.4, 0.25, 0, 1),
        example(0.0, 0.3, 0.10, 1, 1),
        example(0.2, 0.9, 0.90, 1, 0),
    };
    double rate = asr(hand, &sh.linear, 0.5);
    if (rate != 0.5) return {false, "hand fixture ASR " + fmt(rate) + " != 0.5"};

    if (sh.generated.empty())
      return {false, "no generated sets available (criterion 5 failed earlier)"};
    for (std::size_t i = 0; i < sh.generated.size(); ++i) {
      double a3 = asr(sh.generated[i], &sh.linear, 0.3);
      double a4 = asr(sh.generated[i], &sh.linear, 0.4);
      double a5 = asr(sh.generated[i], &sh.linear, 0.5);
      if (a3 > a4 || a4 > a5)
        return {false, "set " + std::to_string(i) + ": ASR not monotone (" + fmt(a3) +
                           ", " + fmt(a4) + ", " + fmt(a5) + ")"};
    }
    return {true, "hand fixture ASR exactly 0.5; ASR monotone over eps 0.3/0.4/0.5 on all " +
                      std::to_string(sh.generated.size()) + " generated sets"};
  });

  // 7. Boundary band geometry: the 3-4-5 triangle exactly, and Monte-Carlo
  // occupancy on the unit square against the closed form.
  run_criterion(7, [&]() -> Outcome {
    if (band_width(3.0, 4.0, 1.0) != 5.0)
      return {false, "band_width(3,4,1) = " + fmt(band_width(3.0, 4.0, 1.0))};

    FeatureSchema unit;
    Feature u1;
    u1.name = "u1";
    u1.min = 0.0;
    u1.max = 1.0;
    Feature u2 = u1;
    u2.name = "u2";
    unit.features = {u1, u2};
    ConstraintSet set = parse_constraints("u1 >= u2", unit);

    Rng rng(24601);
    std::vector<std::map<std::string, double>> records;
    records.reserve(100000);
    for (int i = 0; i < 100000; ++i)
      records.push_back({{"u1", rng.uniform(0.0, 1.0)}, {"u2", rng.uniform(0.0, 1.0)}});

    double worst = 0.0;
    for (double p : {0.05, 0.1, 0.2}) {
      double occupancy = boundary_occupancy(records, set.linear[0], unit, p);
      // Strip |u1 - u2| <= p over the unit square has area 2p - p^2.
      double closed = 100.0 * (2.0 * p - p * p);
      worst = std::max(worst, std::abs(occupancy - closed));
      if (std::abs(occupancy - closed) > 1.0)
        return {false, "p=" + fmt(p, 2) + ": occupancy " + fmt(occupancy, 2) +
                           "% vs closed form " + fmt(closed, 2) + "%"};
    }
    return {true, "band_width(3,4,1) = 5 exactly; Monte-Carlo occupancy within " +
                      fmt(worst, 3) + "% of closed form at 1e5 samples"};
  });

  // 8. Constraint-layer overhead: sampling with mode P stays under 2x the
  // unconstrained sampling time; training mode C stays under 5x mode none.
  run_criterion(8, [&]() -> Outcome {
    Dataset big;
    big.schema = sh.schema;
    big.label_names = sh.toy.label_names;
    big.name = "toy_x1000";
    for (std::size_t i = 0; i < 1000; ++i) {
      big.rows.push_back(sh.toy.rows[i % sh.toy.size()]);
      big.labels.push_back(sh.toy.labels[i % sh.toy.size()]);
    }

    AdvConfig sample_cfg;
    sample_cfg.backbone = "wgan";
    sample_cfg.alpha = 0.0;
    sample_cfg.beta = 0.0;
    sample_cfg.epochs = 2;
    sample_cfg.seed = 7;
    AdvConfig sample_p = sample_cfg;
    sample_p.mode = ConstraintMode::at_sampling;
    AdvGenerator model_none = train_advdgm(sh.toy, nullptr, nullptr, nullptr, sample_cfg);
    AdvGenerator model_p =
        train_advdgm(sh.toy, nullptr, &sh.mixed, &sh.mixed_ord, sample_p);

    double med_none =
        runtime_bench([&] { generate(model_none, sh.target, big); }, 5).median;
    double med_p = runtime_bench([&] { generate(model_p, sh.target, big); }, 5).median;
    if (!(med_p < 2.0 * med_none))
      return {false, "sampling mode P " + fmt(med_p, 4) + "s vs none " +
                         fmt(med_none, 4) + "s (ratio " + fmt(med_p / med_none, 2) +
                         " >= 2)"};

    AdvConfig train_cfg = sh.cfg.grid_points().front().config;
    train_cfg.alpha = 50.0;
    train_cfg.beta = 1.0;
    AdvConfig train_c = train_cfg;
    train_c.mode = ConstraintMode::during_training;
    AdvConfig train_none = train_cfg;
    train_none.mode = ConstraintMode::none;
    double med_train_c =
        runtime_bench(
            [&] { train_advdgm(sh.parts.train, &sh.target, &sh.mixed, &sh.mixed_ord, train_c); },
            5)
            .median;
    double med_train_none =
        runtime_bench(
            [&] { train_advdgm(sh.parts.train, &sh.target, nullptr, nullptr, train_none); },
            5)
            .median;
    if (!(med_train_c < 5.0 * med_train_none))
      return {false, "training mode C " + fmt(med_train_c, 3) + "s vs none " +
                         fmt(med_train_none, 3) + "s (ratio " +
                         fmt(med_train_c / med_train_none, 2) + " >= 5)"};
    return {true, "sampling P/none ratio " + fmt(med_p / med_none, 2) +
                      " < 2, training C/none ratio " +
                      fmt(med_train_c / med_train_none, 2) + " < 5 (medians of 5)"};
  });

  // 9. Transform round trip on every fixture record, both datasets, both
  // pipeline kinds.
  run_criterion(9, [&]() -> Outcome {
    FeatureSchema mixed_schema = schema_from_json(
        nlohmann::json::parse(read_file(sh.dir + "/mixed_schema.json")));
    Dataset mixed_ds = load_csv(sh.dir + "/mixed.csv", mixed_schema, "label");

    std::size_t checked = 0;
    for (const Dataset* ds : {&sh.toy, &mixed_ds}) {
      for (const char* kind : {"generator", "classifier"}) {
        TransformPipeline pipe = TransformPipeline::fit(*ds, kind);
        std::vector<Record> back = pipe.inverse_transform(pipe.transform(ds->rows));
        for (std::size_t r = 0; r < ds->size(); ++r) {
          for (std::size_t c = 0; c < ds->schema.features.size(); ++c) {
            double a = ds->rows[r].values[c];
            double b = back[r].values[c];
            if (ds->schema.features[c].continuous()) {
              if (std::abs(a - b) > 1e-9)
                return {false, ds->name + "/" + kind + ": row " + std::to_string(r) +
                                   " continuous drift " + fmt(std::abs(a - b), 12)};
            } else if (a != b) {
              return {false, ds->name + "/" + kind + ": row " + std::to_string(r) +
                                 " categorical index changed"};
            }
          }
          ++checked;
        }
      }
    }
    return {true, "inverse(transform) identity on " + std::to_string(checked) +
                      " records (continuous <= 1e-9, categorical exact)"};
  });

  // 10. Pipeline determinism: two full CLI runs from the same config produce
  // byte-identical report CSVs (runtime.csv holds wall times and is exempt).
  run_criterion(10, [&]() -> Outcome {
    namespace fs = std::filesystem;
    fs::path base = fs::temp_directory_path() / "advgen_acceptance";
    std::error_code ec;
    fs::remove_all(base, ec);
    std::vector<fs::path> outs = {base / "run1", base / "run2"};
    std::string config = sh.dir + "/toy_run.json";
    for (const fs::path& out : outs) {
      fs::create_directories(out);
      for (const char* verb : {"train-target", "train-attack", "attack", "evaluate"}) {
        std::string cmd = "ADVGEN_OUT=" + out.string() + " " + ADVGEN_BIN + " " + verb +
                          " " + config + " > /dev/null 2>&1";
        int rc = std::system(cmd.c_str());
        if (rc != 0)
          return {false, std::string(verb) + " exited nonzero in " + out.string()};
      }
    }

    std::vector<std::string> compared;
    for (const auto& entry : fs::directory_iterator(outs[0])) {
      std::string name = entry.path().filename().string();
      auto ends_with = [&](const char* suffix) {
        std::string s = suffix;
        return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
      };
      if (!ends_with("_asr.csv") && !ends_with("_asr.md") && !ends_with("_boundary.csv"))
        continue;
      if (slurp((outs[0] / name).string()) != slurp((outs[1] / name).string()))
        return {false, name + " differs between identical runs"};
      compared.push_back(name);
    }
    if (compared.empty()) return {false, "no report files produced"};
    return {true, std::to_string(compared.size()) +
                      " report files byte-identical across repeated runs"};
  });

  if (failures == 0) std::printf("all 10 criteria passed\n");
  return failures;
}
