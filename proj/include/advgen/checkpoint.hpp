#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "advgen/csv.hpp"
#include "advgen/models.hpp"
#include "advgen/schema.hpp"
#include "advgen/textutil.hpp"

namespace advgen {

/// A downstream command asked for an artifact that no prior step produced.
struct MissingArtifactError : std::runtime_error {
  explicit MissingArtifactError(const std::string& what_) : std::runtime_error(what_) {}
};

namespace detail {

inline nlohmann::json tensor_to_json(const Tensor& t) {
  nlohmann::json j;
  j["shape"] = t.shape;
  j["data"] = t.data;
  return j;
}

inline Tensor tensor_from_json(const nlohmann::json& j) {
  Tensor t(j.at("shape").get<std::vector<std::size_t>>(),
           j.at("data").get<std::vector<double>>());
  return t;
}

inline nlohmann::json net_to_json(const DenseNet& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const DenseNet::Layer& l : net.layers) {
    nlohmann::json j;
    j["weight"] = tensor_to_json(l.weight);
    j["bias"] = tensor_to_json(l.bias);
    j["activation"] = activation_name(l.activation);
    layers.push_back(j);
  }
  return layers;
}

inline DenseNet net_from_json(const nlohmann::json& j) {
  DenseNet net;
  for (const nlohmann::json& l : j)
    net.layers.push_back({tensor_from_json(l.at("weight")),
                          tensor_from_json(l.at("bias")),
                          activation_from_name(l.at("activation").get<std::string>())});
  return net;
}

inline nlohmann::json pipeline_to_json(const TransformPipeline& p) {
  nlohmann::json cols = nlohmann::json::array();
  for (const TransformPipeline::Column& c : p.columns()) {
    nlohmann::json j;
    j["feature"] = c.feature_index;
    j["first_col"] = c.first_col;
    j["width"] = c.width;
    j["min"] = c.min;
    j["max"] = c.max;
    cols.push_back(j);
  }
  nlohmann::json j;
  j["kind"] = p.kind();
  j["columns"] = cols;
  return j;
}

inline TransformPipeline pipeline_from_json(const nlohmann::json& j,
                                            const FeatureSchema& schema) {
  std::vector<TransformPipeline::Column> cols;
  for (const nlohmann::json& c : j.at("columns"))
    cols.push_back({c.at("feature").get<std::size_t>(),
                    c.at("first_col").get<std::size_t>(),
                    c.at("width").get<std::size_t>(), c.at("min").get<double>(),
                    c.at("max").get<double>()});
  return TransformPipeline::restore(schema, j.at("kind").get<std::string>(),
                                    std::move(cols));
}

/// Wraps a payload with its FNV-1a fingerprint so tampering and truncation
/// are caught at load time.
inline std::string seal(const nlohmann::json& payload) {
  nlohmann::json j;
  j["checksum"] = to_hex(fnv1a64(payload.dump()));
  j["payload"] = payload;
  return j.dump(2) + "\n";
}

inline nlohmann::json unseal(const std::string& path, const std::string& kind) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::invalid_argument&) {
    throw MissingArtifactError("missing artifact: " + path);
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint " + path + ": not valid JSON: " + e.what());
  }
  if (!j.contains("payload") || !j.contains("checksum"))
    throw ValidationError("checkpoint " + path + ": missing checksum envelope");
  nlohmann::json payload = j.at("payload");
  if (j.at("checksum").get<std::string>() != to_hex(fnv1a64(payload.dump())))
    throw ValidationError("checkpoint " + path + ": checksum mismatch");
  if (payload.value("kind", "") != kind)
    throw ValidationError("checkpoint " + path + ": expected kind '" + kind +
                          "', found '" + payload.value("kind", "") + "'");
  return payload;
}

}  // namespace detail

inline nlohmann::json advconfig_to_json(const AdvConfig& c) {
  nlohmann::json j;
  j["backbone"] = c.backbone;
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["mode"] = mode_name(c.mode);
  j["lr"] = c.lr;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["critic_clip"] = c.critic_clip;
  j["critic_steps"] = c.critic_steps;
  j["latent_dim"] = c.latent_dim;
  j["gen_hidden"] = c.gen_hidden;
  j["critic_hidden"] = c.critic_hidden;
  j["delta_cap"] = c.delta_cap;
  j["eps_eval"] = c.eps_eval;
  j["seed"] = c.seed;
  return j;
}

inline AdvConfig advconfig_from_json(const nlohmann::json& j) {
  AdvConfig c;
  c.backbone = j.value("backbone", c.backbone);
  c.alpha = j.value("alpha", c.alpha);
  c.beta = j.value("beta", c.beta);
  if (j.contains("mode")) c.mode = mode_from_name(j.at("mode").get<std::string>());
  c.lr = j.value("lr", c.lr);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.critic_clip = j.value("critic_clip", c.critic_clip);
  c.critic_steps = j.value("critic_steps", c.critic_steps);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.gen_hidden = j.value("gen_hidden", c.gen_hidden);
  c.critic_hidden = j.value("critic_hidden", c.critic_hidden);
  c.delta_cap = j.value("delta_cap", c.delta_cap);
  c.eps_eval = j.value("eps_eval", c.eps_eval);
  c.seed = j.value("seed", c.seed);
  return c;
}

// ---------------------------------------------------------------------------
// Target classifier checkpoints

inline void save_target_checkpoint(const std::string& path, const TargetClassifier& h) {
  nlohmann::json j;
  j["kind"] = "target";
  j["schema"] = schema_to_json(h.g.schema());
  j["pipeline"] = detail::pipeline_to_json(h.g);
  j["net"] = detail::net_to_json(h.net);
  j["label_names"] = h.label_names;
  j["clean_error"] = h.clean_error;
  write_file(path, detail::seal(j));
}

inline TargetClassifier load_target_checkpoint(const std::string& path) {
  nlohmann::json j = detail::unseal(path, "target");
  TargetClassifier h;
  FeatureSchema schema = schema_from_json(j.at("schema"));
  h.g = detail::pipeline_from_json(j.at("pipeline"), schema);
  h.net = detail::net_from_json(j.at("net"));
  h.label_names = j.at("label_names").get<std::vector<std::string>>();
  h.clean_error = j.at("clean_error").get<double>();
  return h;
}

// ---------------------------------------------------------------------------
// Adversarial generator checkpoints

struct AdvCheckpoint {
  AdvGenerator model;
  double train_seconds = 0.0;
};

inline void save_adv_checkpoint(const std::string& path, const AdvGenerator& model,
                                double train_seconds) {
  nlohmann::json j;
  j["kind"] = "advdgm";
  j["config"] = advconfig_to_json(model.config);
  j["schema"] = schema_to_json(model.f.schema());
  j["pipeline"] = detail::pipeline_to_json(model.f);
  j["generator"] = detail::net_to_json(model.generator);
  j["critic"] = detail::net_to_json(model.critic);
  j["encoder"] = detail::net_to_json(model.encoder);
  j["constraint_hash"] = model.constraint_hash;
  if (model.plan) {
    nlohmann::json p;
    p["ordering"] = model.plan->ordering.order;
    if (model.plan->ordering.seed) p["ordering_seed"] = *model.plan->ordering.seed;
    p["tau"] = model.plan->tau;
    j["plan"] = p;
  }
  nlohmann::json hist = nlohmann::json::array();
  for (const EpochStats& e : model.history)
    hist.push_back({{"l_dgm", e.l_dgm}, {"l_adv", e.l_adv}, {"l_pert", e.l_pert}});
  j["history"] = hist;
  j["train_seconds"] = train_seconds;
  write_file(path, detail::seal(j));
}

/// `set` supplies the constraints for plan recompilation; required exactly
/// when the checkpoint was trained with one, and it must be the same set.
inline AdvCheckpoint load_adv_checkpoint(const std::string& path,
                                         const ConstraintSet* set) {
  nlohmann::json j = detail::unseal(path, "advdgm");
  AdvCheckpoint out;
  AdvGenerator& m = out.model;
  m.config = advconfig_from_json(j.at("config"));
  FeatureSchema schema = schema_from_json(j.at("schema"));
  m.f = detail::pipeline_from_json(j.at("pipeline"), schema);
  m.generator = detail::net_from_json(j.at("generator"));
  m.critic = detail::net_from_json(j.at("critic"));
  m.encoder = detail::net_from_json(j.at("encoder"));
  m.constraint_hash = j.value("constraint_hash", "");

  if (j.contains("plan")) {
    if (!set)
      throw ValidationError("checkpoint " + path +
                            ": trained with constraints; pass the constraint set");
    if (constraint_set_hash(*set) != m.constraint_hash)
      throw ValidationError("checkpoint " + path +
                            ": constraint set does not match the one used in training");
    RepairOrdering ordering;
    ordering.order = j.at("plan").at("ordering").get<std::vector<std::string>>();
    if (j.at("plan").contains("ordering_seed"))
      ordering.seed = j.at("plan").at("ordering_seed").get<std::uint64_t>();
    m.plan = compile_plan(*set, ordering, j.at("plan").value("tau", 0.0),
                          m.f.continuous_columns());
  }
  for (const nlohmann::json& e : j.value("history", nlohmann::json::array()))
    m.history.push_back({e.at("l_dgm").get<double>(), e.at("l_adv").get<double>(),
                         e.at("l_pert").get<double>()});
  out.train_seconds = j.value("train_seconds", 0.0);
  return out;
}

// ---------------------------------------------------------------------------
// Generated attack examples

struct ExamplesArtifact {
  std::string tag;       // grid-point tag the examples came from
  std::string backbone;
  std::string mode;
  double alpha = 0.0;
  double beta = 0.0;
  double lr = 0.0;
  double clean_error = 0.0;
  double train_seconds = 0.0;
  std::vector<AttackExample> examples;
};

inline void save_examples_artifact(const std::string& path,
                                   const ExamplesArtifact& art) {
  nlohmann::json j;
  j["kind"] = "examples";
  j["tag"] = art.tag;
  j["backbone"] = art.backbone;
  j["mode"] = art.mode;
  j["alpha"] = art.alpha;
  j["beta"] = art.beta;
  j["lr"] = art.lr;
  j["clean_error"] = art.clean_error;
  j["train_seconds"] = art.train_seconds;
  nlohmann::json rows = nlohmann::json::array();
  for (const AttackExample& ex : art.examples) {
    nlohmann::json r;
    r["original"] = ex.original.values;
    r["adversarial"] = ex.adversarial.values;
    r["delta"] = ex.delta;
    r["delta_norm"] = ex.delta_norm;
    r["label"] = ex.label;
    r["pred_before"] = ex.pred_before;
    r["pred_after"] = ex.pred_after;
    rows.push_back(r);
  }
  j["examples"] = rows;
  write_file(path, detail::seal(j));
}

inline ExamplesArtifact load_examples_artifact(const std::string& path) {
  nlohmann::json j = detail::unseal(path, "examples");
  ExamplesArtifact art;
  art.tag = j.value("tag", "");
  art.backbone = j.value("backbone", "");
  art.mode = j.value("mode", "");
  art.alpha = j.value("alpha", 0.0);
  art.beta = j.value("beta", 0.0);
  art.lr = j.value("lr", 0.0);
  art.clean_error = j.value("clean_error", 0.0);
  art.train_seconds = j.value("train_seconds", 0.0);
  for (const nlohmann::json& r : j.at("examples")) {
    AttackExample ex;
    ex.original.values = r.at("original").get<std::vector<double>>();
    ex.adversarial.values = r.at("adversarial").get<std::vector<double>>();
    ex.delta = r.at("delta").get<std::vector<double>>();
    ex.delta_norm = r.at("delta_norm").get<double>();
    ex.label = r.at("label").get<int>();
    ex.pred_before = r.at("pred_before").get<int>();
    ex.pred_after = r.at("pred_after").get<int>();
    art.examples.push_back(ex);
  }
  return art;
}

}  // namespace advgen
