// SPDX-License-Identifier: Apache-2.0
#include <array>
#include <cstdio>

#include "discond/app.hpp"

namespace discond {
namespace {

struct Column {
  const char* dataset;
  std::size_t pb, pr, d;
  double beta_z, beta_w, beta_c;
  double c_z, c_w, c_c;
  std::uint64_t ramp;
};

constexpr std::array kExact = {
    Column{"condsprites", 10, 3, 2, 30, 30, 30, 30, 30, 5, 25000},
    Column{"condsprites", 8, 2, 2, 30, 30, 40, 30, 30, 5, 25000},
    Column{"condsprites", 5, 3, 2, 30, 30, 30, 30, 30, 5, 25000},
    Column{"condsprites", 3, 2, 2, 30, 30, 40, 30, 30, 10, 25000},
    Column{"dsprites", 6, 2, 3, 200, 200, 200, 20, 20, 1.1, 300000},
    Column{"dsprites", 4, 2, 3, 100, 100, 100, 20, 20, 1.1, 300000},
    Column{"dsprites", 2, 2, 3, 200, 200, 200, 20, 20, 1.1, 300000},
    Column{"mnist", 10, 3, 10, 25, 25, 5, 5, 5, 25, 25000},
    Column{"mnist", 8, 2, 10, 25, 25, 2.5, 5, 5, 25, 25000},
    Column{"mnist", 4, 3, 10, 25, 25, 5, 5, 5, 25, 25000},
    Column{"mnist", 2, 2, 10, 25, 25, 3, 5, 5, 25, 25000},
};

constexpr std::array kApprox = {
    Column{"condsprites", 10, 3, 2, 10, 20, 20, 20, 20, 5, 25000},
    Column{"condsprites", 8, 2, 2, 10, 20, 20, 20, 20, 5, 25000},
    Column{"condsprites", 5, 3, 2, 10, 20, 20, 20, 20, 5, 25000},
    Column{"condsprites", 3, 2, 2, 20, 40, 40, 10, 10, 5, 25000},
    Column{"dsprites", 6, 2, 3, 20, 40, 40, 10, 10, 5, 300000},
    Column{"dsprites", 4, 2, 3, 20, 40, 40, 10, 10, 5, 300000},
    Column{"dsprites", 2, 2, 3, 20, 40, 40, 10, 10, 5, 300000},
    Column{"mnist", 10, 3, 10, 30, 60, 60, 10, 10, 10, 25000},
    Column{"mnist", 8, 2, 10, 10, 20, 20, 10, 10, 10, 25000},
    Column{"mnist", 4, 3, 10, 20, 40, 40, 10, 10, 5, 25000},
    Column{"mnist", 2, 2, 10, 10, 20, 20, 10, 10, 10, 25000},
};

constexpr std::array kJoint = {
    Column{"condsprites", 10, 0, 2, 30, 0, 30, 30, 0, 5, 25000},
    Column{"condsprites", 5, 0, 2, 30, 0, 30, 30, 0, 5, 25000},
    Column{"dsprites", 6, 0, 3, 150, 0, 150, 40, 0, 1.1, 300000},
    Column{"dsprites", 4, 0, 3, 150, 0, 150, 40, 0, 1.1, 300000},
    Column{"mnist", 10, 0, 10, 30, 0, 30, 5, 0, 5, 25000},
    Column{"mnist", 4, 0, 10, 30, 0, 30, 5, 0, 5, 25000},
};

struct Schedule {
  std::size_t epochs;
  double lr;
};

Schedule schedule_for(Variant v, const std::string& dataset) {
  if (v == Variant::approx) {
    if (dataset == "mnist") return {100, 2e-3};
    if (dataset == "dsprites") return {20, 1e-3};
    return {300, 1e-3};
  }
  if (dataset == "mnist") return {100, 5e-4};
  if (dataset == "dsprites") return {30, 5e-4};
  return {200, 5e-4};
}

std::string column_name(Variant v, const Column& c) {
  std::string name = variant_name(v) + "-" + c.dataset + "-pb" + std::to_string(c.pb);
  if (v != Variant::joint) name += "-pr" + std::to_string(c.pr);
  return name;
}

RunConfig from_column(Variant v, const Column& c) {
  RunConfig cfg;
  cfg.name = column_name(v, c);
  cfg.dataset = c.dataset;
  cfg.model.variant = v;
  cfg.model.public_dim = c.pb;
  cfg.model.private_dim = c.pr;
  cfg.model.discrete_dim = c.d;
  cfg.model.image_extent = 32;
  cfg.weights.beta_z = c.beta_z;
  cfg.weights.beta_w = c.beta_w;
  cfg.weights.beta_c = c.beta_c;
  cfg.weights.cap_z = {c.c_z, c.ramp};
  cfg.weights.cap_w = {c.c_w, c.ramp};
  cfg.weights.cap_c = {c.c_c, c.ramp};
  const Schedule s = schedule_for(v, cfg.dataset);
  cfg.epochs = s.epochs;
  cfg.lr = s.lr;
  cfg.batch_size = 64;
  // Approx draws its mode means from N(0, 1); exact keeps them at zero.
  cfg.prior.mode = v == Variant::approx ? PriorPolicyMode::fixed_random : PriorPolicyMode::fixed_zero;
  return cfg;
}

template <class Fn>
void for_each_column(Fn&& fn) {
  for (const Column& c : kExact) fn(Variant::exact, c);
  for (const Column& c : kApprox) fn(Variant::approx, c);
  for (const Column& c : kJoint) fn(Variant::joint, c);
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for_each_column([&](Variant v, const Column& c) { names.push_back(column_name(v, c)); });
  return names;
}

RunConfig preset(const std::string& name) {
  RunConfig found;
  bool hit = false;
  for_each_column([&](Variant v, const Column& c) {
    if (!hit && column_name(v, c) == name) {
      found = from_column(v, c);
      hit = true;
    }
  });
  if (!hit) throw ValidationError("unknown preset '" + name + "'");
  return found;
}

}  // namespace discond
