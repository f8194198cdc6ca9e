// SPDX-License-Identifier: Apache-2.0
#include "sinflow/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "sinflow/errors.hpp"

namespace sinflow {

using ordered_json = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail_config(const std::string& msg) { throw ConfigError("config: " + msg); }

const ordered_json& require(const ordered_json& j, const std::string& ctx, const char* key) {
  if (!j.contains(key)) fail_config("missing field '" + ctx + key + "'");
  return j.at(key);
}

void check_known_keys(const ordered_json& j, const std::string& ctx,
                      const std::set<std::string>& known) {
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) fail_config("unknown field '" + ctx + item.key() + "'");
  }
}

double as_number(const ordered_json& j, const std::string& where) {
  if (!j.is_number()) fail_config("field '" + where + "' must be a number");
  return j.get<double>();
}

std::size_t as_count(const ordered_json& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<double>() < 0) {
    fail_config("field '" + where + "' must be a nonnegative integer");
  }
  return j.get<std::size_t>();
}

std::string as_string(const ordered_json& j, const std::string& where) {
  if (!j.is_string()) fail_config("field '" + where + "' must be a string");
  return j.get<std::string>();
}

bool as_bool(const ordered_json& j, const std::string& where) {
  if (!j.is_boolean()) fail_config("field '" + where + "' must be a boolean");
  return j.get<bool>();
}

DatasetSpec dataset_from_json(const ordered_json& j) {
  if (!j.is_object()) fail_config("'dataset' must be an object");
  DatasetSpec spec;
  const std::string kind = as_string(require(j, "dataset.", "kind"), "dataset.kind");
  if (kind == "toy2d") {
    spec.kind = DatasetSpec::Kind::kToy2d;
    check_known_keys(j, "dataset.", {"kind", "name", "n"});
    spec.toy_name = as_string(require(j, "dataset.", "name"), "dataset.name");
    toy_name_from_string(spec.toy_name);  // validates the name early
  } else if (kind == "mixture1d") {
    spec.kind = DatasetSpec::Kind::kMixture1d;
    check_known_keys(j, "dataset.", {"kind", "means", "std", "n"});
    if (j.contains("means")) {
      const auto& means = j.at("means");
      if (!means.is_array() || means.empty()) fail_config("'dataset.means' must be a nonempty array");
      spec.mixture.means.clear();
      for (const auto& m : means) spec.mixture.means.push_back(as_number(m, "dataset.means[]"));
    }
    if (j.contains("std")) spec.mixture.stddev = as_number(j.at("std"), "dataset.std");
    if (!(spec.mixture.stddev > 0.0)) fail_config("'dataset.std' must be > 0");
  } else if (kind == "csv") {
    spec.kind = DatasetSpec::Kind::kCsv;
    check_known_keys(j, "dataset.", {"kind", "path", "has_header"});
    spec.csv_path = as_string(require(j, "dataset.", "path"), "dataset.path");
    if (j.contains("has_header")) {
      spec.csv_has_header = as_bool(j.at("has_header"), "dataset.has_header");
    }
  } else {
    fail_config("'dataset.kind' must be one of toy2d, mixture1d, csv");
  }
  if (spec.kind != DatasetSpec::Kind::kCsv && j.contains("n")) {
    spec.n = as_count(j.at("n"), "dataset.n");
    if (spec.n == 0) fail_config("'dataset.n' must be >= 1");
  }
  return spec;
}

ModelConfig model_from_json(const ordered_json& j) {
  ModelConfig m;
  if (j.is_null()) return m;
  if (!j.is_object()) fail_config("'model' must be an object");
  check_known_keys(j, "model.",
                   {"dim", "blocks", "d_scales", "embedding_dim", "hidden_sizes", "use_shifts",
                    "d_layer", "phase_init"});
  if (j.contains("dim")) m.dim = as_count(j.at("dim"), "model.dim");
  if (j.contains("blocks")) m.blocks = as_count(j.at("blocks"), "model.blocks");
  if (j.contains("d_scales")) m.d_scales = as_count(j.at("d_scales"), "model.d_scales");
  if (j.contains("embedding_dim")) {
    m.embedding_dim = as_count(j.at("embedding_dim"), "model.embedding_dim");
  }
  if (j.contains("hidden_sizes")) {
    const auto& hs = j.at("hidden_sizes");
    if (!hs.is_array()) fail_config("'model.hidden_sizes' must be an array");
    m.hidden_sizes.clear();
    for (const auto& h : hs) m.hidden_sizes.push_back(as_count(h, "model.hidden_sizes[]"));
  }
  if (j.contains("use_shifts")) m.use_shifts = as_bool(j.at("use_shifts"), "model.use_shifts");
  if (j.contains("d_layer")) {
    const std::string k = as_string(j.at("d_layer"), "model.d_layer");
    if (k == "sinusoidal") {
      m.d_kind = DLayerKind::kSinusoidal;
    } else if (k == "affine") {
      m.d_kind = DLayerKind::kAffine;
    } else {
      fail_config("'model.d_layer' must be 'sinusoidal' or 'affine'");
    }
  }
  if (j.contains("phase_init")) {
    const std::string k = as_string(j.at("phase_init"), "model.phase_init");
    if (k == "zero") {
      m.phase_init = PhaseInit::kZero;
    } else if (k == "random") {
      m.phase_init = PhaseInit::kRandom;
    } else {
      fail_config("'model.phase_init' must be 'zero' or 'random'");
    }
  }
  return m;
}

TrainConfig train_from_json(const ordered_json& j) {
  TrainConfig t;
  if (j.is_null()) return t;
  if (!j.is_object()) fail_config("'train' must be an object");
  check_known_keys(j, "train.",
                   {"steps", "batch_size", "lr0", "schedule", "gamma", "lr_min", "weight_decay",
                    "optimizer", "seed", "validation_every", "grad_clip", "clip_enabled"});
  if (j.contains("steps")) t.steps = as_count(j.at("steps"), "train.steps");
  if (j.contains("batch_size")) t.batch_size = as_count(j.at("batch_size"), "train.batch_size");
  if (j.contains("lr0")) t.lr0 = as_number(j.at("lr0"), "train.lr0");
  if (j.contains("schedule")) {
    const std::string s = as_string(j.at("schedule"), "train.schedule");
    if (s == "none") {
      t.schedule = Schedule::kNone;
    } else if (s == "exponential") {
      t.schedule = Schedule::kExponential;
    } else if (s == "cosine") {
      t.schedule = Schedule::kCosine;
    } else {
      fail_config("'train.schedule' must be none, exponential or cosine");
    }
  }
  if (j.contains("gamma")) t.gamma = as_number(j.at("gamma"), "train.gamma");
  if (j.contains("lr_min")) t.lr_min = as_number(j.at("lr_min"), "train.lr_min");
  if (j.contains("weight_decay")) t.weight_decay = as_number(j.at("weight_decay"), "train.weight_decay");
  if (j.contains("optimizer")) {
    const std::string s = as_string(j.at("optimizer"), "train.optimizer");
    if (s == "adam") {
      t.optimizer = Optim::kAdam;
    } else if (s == "adamw") {
      t.optimizer = Optim::kAdamW;
    } else {
      fail_config("'train.optimizer' must be adam or adamw");
    }
  }
  if (j.contains("seed")) t.seed = as_count(j.at("seed"), "train.seed");
  if (j.contains("validation_every")) {
    t.validation_every = as_count(j.at("validation_every"), "train.validation_every");
  }
  if (j.contains("grad_clip")) t.grad_clip = as_number(j.at("grad_clip"), "train.grad_clip");
  if (j.contains("clip_enabled")) t.clip_enabled = as_bool(j.at("clip_enabled"), "train.clip_enabled");
  return t;
}

SplitSpec split_from_json(const ordered_json& j) {
  SplitSpec s;
  if (j.is_null()) return s;
  if (!j.is_object()) fail_config("'split' must be an object");
  check_known_keys(j, "split.", {"train", "val", "test"});
  if (j.contains("train")) s.train = as_number(j.at("train"), "split.train");
  if (j.contains("val")) s.val = as_number(j.at("val"), "split.val");
  if (j.contains("test")) s.test = as_number(j.at("test"), "split.test");
  return s;
}

RunConfig config_from_json(const ordered_json& j) {
  if (!j.is_object()) fail_config("top level must be an object");
  check_known_keys(j, "", {"dataset", "model", "train", "split", "out_dir", "seed"});
  RunConfig cfg;
  cfg.dataset = dataset_from_json(require(j, "", "dataset"));
  cfg.model = model_from_json(j.contains("model") ? j.at("model") : ordered_json());
  cfg.train = train_from_json(j.contains("train") ? j.at("train") : ordered_json());
  cfg.split = split_from_json(j.contains("split") ? j.at("split") : ordered_json());
  if (j.contains("out_dir")) cfg.out_dir = as_string(j.at("out_dir"), "out_dir");
  if (j.contains("seed")) {
    cfg.seed = as_count(j.at("seed"), "seed");
    if (!j.contains("train") || !j.at("train").contains("seed")) cfg.train.seed = cfg.seed;
  }
  cfg.validate();
  return cfg;
}

ordered_json dataset_to_json(const DatasetSpec& spec) {
  ordered_json j;
  switch (spec.kind) {
    case DatasetSpec::Kind::kToy2d:
      j["kind"] = "toy2d";
      j["name"] = spec.toy_name;
      j["n"] = spec.n;
      break;
    case DatasetSpec::Kind::kMixture1d:
      j["kind"] = "mixture1d";
      j["means"] = spec.mixture.means;
      j["std"] = spec.mixture.stddev;
      j["n"] = spec.n;
      break;
    case DatasetSpec::Kind::kCsv:
      j["kind"] = "csv";
      j["path"] = spec.csv_path;
      j["has_header"] = spec.csv_has_header;
      break;
  }
  return j;
}

ordered_json config_to_json(const RunConfig& cfg) {
  ordered_json j;
  j["dataset"] = dataset_to_json(cfg.dataset);
  ordered_json m;
  m["dim"] = cfg.model.dim;
  m["blocks"] = cfg.model.blocks;
  m["d_scales"] = cfg.model.d_scales;
  m["embedding_dim"] = cfg.model.embedding_dim;
  m["hidden_sizes"] = cfg.model.hidden_sizes;
  m["use_shifts"] = cfg.model.use_shifts;
  m["d_layer"] = cfg.model.d_kind == DLayerKind::kSinusoidal ? "sinusoidal" : "affine";
  m["phase_init"] = cfg.model.phase_init == PhaseInit::kZero ? "zero" : "random";
  j["model"] = std::move(m);
  ordered_json t;
  t["steps"] = cfg.train.steps;
  t["batch_size"] = cfg.train.batch_size;
  t["lr0"] = cfg.train.lr0;
  t["schedule"] = cfg.train.schedule == Schedule::kNone
                      ? "none"
                      : (cfg.train.schedule == Schedule::kExponential ? "exponential" : "cosine");
  t["gamma"] = cfg.train.gamma;
  t["lr_min"] = cfg.train.lr_min;
  t["weight_decay"] = cfg.train.weight_decay;
  t["optimizer"] = cfg.train.optimizer == Optim::kAdam ? "adam" : "adamw";
  t["seed"] = cfg.train.seed;
  t["validation_every"] = cfg.train.validation_every;
  t["grad_clip"] = cfg.train.grad_clip;
  t["clip_enabled"] = cfg.train.clip_enabled;
  j["train"] = std::move(t);
  ordered_json s;
  s["train"] = cfg.split.train;
  s["val"] = cfg.split.val;
  s["test"] = cfg.split.test;
  j["split"] = std::move(s);
  j["out_dir"] = cfg.out_dir;
  j["seed"] = cfg.seed;
  return j;
}

}  // namespace

void RunConfig::validate() const {
  if (model.blocks < 1) fail_config("'model.blocks' must be >= 1");
  if (model.d_scales < 1) fail_config("'model.d_scales' must be >= 1");
  if (model.embedding_dim < 1) fail_config("'model.embedding_dim' must be >= 1");
  for (std::size_t h : model.hidden_sizes) {
    if (h < 1) fail_config("'model.hidden_sizes' entries must be >= 1");
  }
  train.validate();
  if (!(split.train > 0.0) || !(split.val > 0.0) || !(split.test > 0.0)) {
    fail_config("'split' fractions must be positive");
  }
  if (split.train + split.val + split.test > 1.0 + 1e-12) {
    fail_config("'split' fractions must sum to at most 1");
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config: parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  return config_from_json(j);
}

Dataset make_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case DatasetSpec::Kind::kToy2d:
      return gen_toy2d(spec.toy_name, spec.n, seed);
    case DatasetSpec::Kind::kMixture1d:
      return gen_mixture1d(spec.mixture, spec.n, seed);
    case DatasetSpec::Kind::kCsv:
      return load_csv(spec.csv_path, spec.csv_has_header);
  }
  throw ConfigError("config: unsupported dataset kind");
}

Checkpoint make_checkpoint(const RunConfig& config, const FlowModel& model, std::size_t step,
                           double best_val_nll) {
  Checkpoint c;
  c.config = config;
  c.config.model = model.config();
  c.standardizer = model.standardizer ? *model.standardizer : Standardizer::identity(model.dim());
  const ParamStore& store = model.params();
  c.params.reserve(store.count());
  for (std::size_t i = 0; i < store.count(); ++i) {
    c.params.emplace_back(store.item(i).name, store.item(i).value);
  }
  c.step = step;
  c.best_val_nll = best_val_nll;
  return c;
}

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw DataError("short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

void checkpoint_save(const Checkpoint& ckpt, const std::string& path) {
  ordered_json j;
  j["version"] = ckpt.version;
  j["config"] = config_to_json(ckpt.config);
  ordered_json st;
  st["mean"] = ckpt.standardizer.mean();
  st["std"] = ckpt.standardizer.stddev();
  j["standardizer"] = std::move(st);
  ordered_json params = ordered_json::array();
  for (const auto& [name, tensor] : ckpt.params) {
    ordered_json p;
    p["name"] = name;
    p["shape"] = tensor.shape();
    p["data"] = tensor.vec();
    params.push_back(std::move(p));
  }
  j["params"] = std::move(params);
  j["step"] = ckpt.step;
  j["best_val_nll"] = ckpt.best_val_nll;
  atomic_write(path, j.dump(2) + "\n");
}

Checkpoint checkpoint_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open '" + path + "'");
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("checkpoint: parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }

  Checkpoint c;
  try {
    if (!j.contains("version")) throw DataError("checkpoint: missing field 'version'");
    c.version = j.at("version").get<int>();
    if (c.version != 1) {
      throw DataError("checkpoint: unsupported version " + std::to_string(c.version));
    }
    for (const char* key : {"config", "standardizer", "params", "step", "best_val_nll"}) {
      if (!j.contains(key)) throw DataError("checkpoint: missing field '" + std::string(key) + "'");
    }
    c.config = config_from_json(j.at("config"));
    const auto& st = j.at("standardizer");
    c.standardizer = Standardizer(st.at("mean").get<std::vector<double>>(),
                                  st.at("std").get<std::vector<double>>());
    for (const auto& p : j.at("params")) {
      const std::string name = p.at("name").get<std::string>();
      const auto shape = p.at("shape").get<std::vector<std::size_t>>();
      auto data = p.at("data").get<std::vector<double>>();
      if (data.size() != shape_product(shape)) {
        throw DataError("checkpoint: parameter '" + name + "' data length " +
                        std::to_string(data.size()) + " does not match shape " + shape_str(shape));
      }
      c.params.emplace_back(name, Tensor(shape, std::move(data)));
    }
    c.step = j.at("step").get<std::size_t>();
    c.best_val_nll = j.at("best_val_nll").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint: " + std::string(e.what()));
  }
  return c;
}

FlowModel model_from_checkpoint(const Checkpoint& ckpt) {
  FlowModel model = FlowModel::build(ckpt.config.model, ckpt.config.seed);
  ParamStore& store = model.params();
  if (store.count() != ckpt.params.size()) {
    throw DataError("checkpoint: has " + std::to_string(ckpt.params.size()) +
                    " parameters, model expects " + std::to_string(store.count()));
  }
  for (const auto& [name, tensor] : ckpt.params) {
    Parameter* p = store.find(name);
    if (!p) throw DataError("checkpoint: unexpected parameter '" + name + "'");
    if (!p->value.same_shape(tensor)) {
      throw DataError("checkpoint: parameter '" + name + "' has shape " +
                      shape_str(tensor.shape()) + ", model expects " +
                      shape_str(p->value.shape()));
    }
    p->value = tensor;
  }
  if (ckpt.standardizer.dim() != model.dim()) {
    throw DataError("checkpoint: standardizer width does not match model dimension");
  }
  model.standardizer = ckpt.standardizer;
  return model;
}

}  // namespace sinflow
