// SPDX-License-Identifier: Apache-2.0
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "discond/app.hpp"

namespace discond {
namespace {

using Json = nlohmann::ordered_json;

const std::set<std::string> kDatasets = {"condsprites", "dsprites", "mnist"};

void reject_unknown(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ValidationError("config: unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const Json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

// Shortest decimal that reads back to the same float, so 0.67f prints as 0.67.
double shortest(float v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::stod(std::string(buf, r.ptr));
}

}  // namespace

void RunConfig::validate() const {
  try {
    model.validate();
    weights.validate();
    prior.validate();
  } catch (const ValidationError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
  if (!kDatasets.count(dataset)) throw ValidationError("config: unknown dataset '" + dataset + "'");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("config: lr must be positive");
  if (epochs == 0) throw ValidationError("config: epochs must be positive");
  if (batch_size == 0) throw ValidationError("config: batch_size must be positive");
  if (!(temperature > 0.0f)) throw ValidationError("config: temperature must be positive");
  if (eval.repeats == 0) throw ValidationError("config: eval.repeats must be positive");
  if (eval.nll_samples == 0) throw ValidationError("config: eval.nll_samples must be positive");
  if (eval.mig.bins < 2) throw ValidationError("config: eval.mig_bins must be >= 2");
  if (dataset == "mnist" && model.discrete_dim != 10) {
    throw ValidationError("config: mnist needs discrete_dim 10, got " + std::to_string(model.discrete_dim));
  }
  if (dataset == "condsprites" && model.discrete_dim != 2) {
    throw ValidationError("config: condsprites needs discrete_dim 2, got " + std::to_string(model.discrete_dim));
  }
  if (dataset == "dsprites" && model.discrete_dim != 3) {
    throw ValidationError("config: dsprites needs discrete_dim 3, got " + std::to_string(model.discrete_dim));
  }
  if (dataset == "mnist" && model.image_extent != 32) throw ValidationError("config: mnist runs at image_extent 32");
}

std::string config_to_json(const RunConfig& cfg) {
  Json j;
  j["name"] = cfg.name;
  j["dataset"] = cfg.dataset;
  j["variant"] = variant_name(cfg.model.variant);
  j["public_dim"] = cfg.model.public_dim;
  j["private_dim"] = cfg.model.private_dim;
  j["discrete_dim"] = cfg.model.discrete_dim;
  j["image_extent"] = cfg.model.image_extent;
  j["trunk"] = trunk_name(cfg.model.trunk);
  j["mlp_hidden"] = cfg.model.mlp_hidden;
  j["beta_z"] = cfg.weights.beta_z;
  j["beta_w"] = cfg.weights.beta_w;
  j["beta_c"] = cfg.weights.beta_c;
  j["cap_z"] = cfg.weights.cap_z.target;
  j["cap_w"] = cfg.weights.cap_w.target;
  j["cap_c"] = cfg.weights.cap_c.target;
  j["cap_iters_z"] = cfg.weights.cap_z.ramp_iters;
  j["cap_iters_w"] = cfg.weights.cap_w.ramp_iters;
  j["cap_iters_c"] = cfg.weights.cap_c.ramp_iters;
  j["lr"] = cfg.lr;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  j["prior_policy"] = policy_name(cfg.prior.mode);
  j["prior_fraction"] = cfg.prior.fraction;
  j["temperature"] = shortest(cfg.temperature);
  j["max_iters"] = cfg.max_iters;
  j["subset"] = cfg.subset;
  Json e;
  e["repeats"] = cfg.eval.repeats;
  e["vote_batch"] = cfg.eval.factorvae.batch_size;
  e["train_votes"] = cfg.eval.factorvae.train_votes;
  e["eval_votes"] = cfg.eval.factorvae.eval_votes;
  e["mig_bins"] = cfg.eval.mig.bins;
  e["mig_max_samples"] = cfg.eval.mig.max_samples;
  e["nll_samples"] = cfg.eval.nll_samples;
  e["nll_examples"] = cfg.eval.nll_examples;
  e["max_examples"] = cfg.eval.max_examples;
  e["min_per_class"] = cfg.eval.min_per_class;
  j["eval"] = e;
  j["dsprites_path"] = cfg.dsprites_path;
  j["mnist_dir"] = cfg.mnist_dir;
  j["condsprites_cache"] = cfg.condsprites_cache;
  return j.dump(2) + "\n";
}

RunConfig config_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("config: top level must be an object");
  reject_unknown(j,
                 {"name", "dataset", "variant", "public_dim", "private_dim", "discrete_dim", "image_extent", "trunk",
                  "mlp_hidden", "beta_z", "beta_w", "beta_c", "cap_z", "cap_w", "cap_c", "cap_iters_z", "cap_iters_w",
                  "cap_iters_c", "lr", "epochs", "batch_size", "seed", "prior_policy", "prior_fraction",
                  "temperature", "max_iters", "subset", "eval", "dsprites_path", "mnist_dir", "condsprites_cache"},
                 "config");
  RunConfig cfg;
  read(j, "name", cfg.name);
  read(j, "dataset", cfg.dataset);
  try {
    if (j.contains("variant")) cfg.model.variant = parse_variant(j.at("variant").get<std::string>());
    if (j.contains("trunk")) cfg.model.trunk = parse_trunk(j.at("trunk").get<std::string>());
    if (j.contains("prior_policy")) cfg.prior.mode = parse_policy(j.at("prior_policy").get<std::string>());
  } catch (const std::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  read(j, "public_dim", cfg.model.public_dim);
  read(j, "private_dim", cfg.model.private_dim);
  read(j, "discrete_dim", cfg.model.discrete_dim);
  read(j, "image_extent", cfg.model.image_extent);
  read(j, "mlp_hidden", cfg.model.mlp_hidden);
  read(j, "beta_z", cfg.weights.beta_z);
  read(j, "beta_w", cfg.weights.beta_w);
  read(j, "beta_c", cfg.weights.beta_c);
  read(j, "cap_z", cfg.weights.cap_z.target);
  read(j, "cap_w", cfg.weights.cap_w.target);
  read(j, "cap_c", cfg.weights.cap_c.target);
  read(j, "cap_iters_z", cfg.weights.cap_z.ramp_iters);
  read(j, "cap_iters_w", cfg.weights.cap_w.ramp_iters);
  read(j, "cap_iters_c", cfg.weights.cap_c.ramp_iters);
  read(j, "lr", cfg.lr);
  read(j, "epochs", cfg.epochs);
  read(j, "batch_size", cfg.batch_size);
  read(j, "seed", cfg.seed);
  read(j, "prior_fraction", cfg.prior.fraction);
  read(j, "temperature", cfg.temperature);
  read(j, "max_iters", cfg.max_iters);
  read(j, "subset", cfg.subset);
  read(j, "dsprites_path", cfg.dsprites_path);
  read(j, "mnist_dir", cfg.mnist_dir);
  read(j, "condsprites_cache", cfg.condsprites_cache);
  if (j.contains("eval")) {
    const Json& e = j.at("eval");
    if (!e.is_object()) throw ValidationError("config: 'eval' must be an object");
    reject_unknown(e,
                   {"repeats", "vote_batch", "train_votes", "eval_votes", "mig_bins", "mig_max_samples",
                    "nll_samples", "nll_examples", "max_examples", "min_per_class"},
                   "eval");
    read(e, "repeats", cfg.eval.repeats);
    read(e, "vote_batch", cfg.eval.factorvae.batch_size);
    read(e, "train_votes", cfg.eval.factorvae.train_votes);
    read(e, "eval_votes", cfg.eval.factorvae.eval_votes);
    read(e, "mig_bins", cfg.eval.mig.bins);
    read(e, "mig_max_samples", cfg.eval.mig.max_samples);
    read(e, "nll_samples", cfg.eval.nll_samples);
    read(e, "nll_examples", cfg.eval.nll_examples);
    read(e, "max_examples", cfg.eval.max_examples);
    read(e, "min_per_class", cfg.eval.min_per_class);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str());
}

}  // namespace discond
