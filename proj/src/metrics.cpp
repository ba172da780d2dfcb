// SPDX-License-Identifier: Apache-2.0
#include "discond/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "discond/ops.hpp"

namespace discond {
namespace {

void check_reps(const Tensor& reps, const FactorTable& factors, const char* who) {
  if (reps.rank() != 2) throw ShapeError(std::string(who) + ": reps must be [N, D], got " + shape_str(reps.shape()));
  if (factors.rows() != reps.size(0)) {
    throw ShapeError(std::string(who) + ": " + std::to_string(reps.size(0)) + " representations vs " +
                     std::to_string(factors.rows()) + " factor rows");
  }
}

// Factors taking more than one value in the table.
std::vector<std::size_t> active_factors(const FactorTable& factors) {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < factors.factors(); ++f) {
    const std::size_t first = factors.at(0, f);
    for (std::size_t r = 1; r < factors.rows(); ++r) {
      if (factors.at(r, f) != first) {
        out.push_back(f);
        break;
      }
    }
  }
  return out;
}

}  // namespace

Tensor select_rows(const Tensor& reps, std::span<const std::size_t> index) {
  const std::size_t width = reps.size(1);
  Tensor out({index.size(), width});
  for (std::size_t k = 0; k < index.size(); ++k) {
    std::copy_n(reps.values().data() + index[k] * width, width, out.values().data() + k * width);
  }
  return out;
}

FactorTable select_rows(const FactorTable& factors, std::span<const std::size_t> index) {
  FactorTable out;
  out.names = factors.names;
  out.cardinality = factors.cardinality;
  const std::size_t nf = factors.factors();
  out.index.resize(index.size() * nf);
  for (std::size_t k = 0; k < index.size(); ++k) {
    std::copy_n(factors.index.data() + index[k] * nf, nf, out.index.data() + k * nf);
  }
  return out;
}

RepresentationDump dump_representations(const Model& model, const ImageDataset& data, std::size_t batch_size) {
  NoGradGuard guard;
  const std::size_t n = data.size(), d = model.config().discrete_dim;
  const std::size_t width = model.config().public_dim + model.config().private_dim;
  RepresentationDump dump{Tensor({n, width}), Tensor({n, d})};
  std::vector<std::size_t> index(n);
  std::iota(index.begin(), index.end(), std::size_t{0});
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t count = std::min(batch_size, n - start);
    const EncoderOutput out = model.encode(data.images(std::span(index).subspan(start, count)));
    const Tensor reps = model.representation(out);
    std::copy_n(reps.values().data(), count * width, dump.reps.values().data() + start * width);
    std::copy_n(out.c.probs.values().data(), count * d, dump.alpha.values().data() + start * d);
  }
  return dump;
}

double factorvae_metric(const Tensor& reps, const FactorTable& factors, const FactorVaeOptions& options,
                        RandomSource& rng) {
  check_reps(reps, factors, "factorvae_metric");
  const std::size_t n = reps.size(0), dims = reps.size(1);
  if (options.batch_size == 0 || options.train_votes == 0 || options.eval_votes == 0) {
    throw std::invalid_argument("factorvae_metric: batch size and vote counts must be positive");
  }
  const std::vector<std::size_t> active = active_factors(factors);
  if (active.size() < 2) {
    throw std::invalid_argument("factorvae_metric: needs at least 2 non-constant factors, found " +
                                std::to_string(active.size()));
  }
  const auto v = reps.values();
  // Global per-dimension scale.
  std::vector<double> scale(dims, 0.0);
  std::vector<std::size_t> kept;
  for (std::size_t j = 0; j < dims; ++j) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += v[r * dims + j];
    mean /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
      const double diff = v[r * dims + j] - mean;
      sq += diff * diff;
    }
    const double sd = std::sqrt(sq / static_cast<double>(n));
    if (sd >= kCollapsedStd) {
      scale[j] = 1.0 / sd;
      kept.push_back(j);
    }
  }
  if (kept.empty()) throw std::invalid_argument("factorvae_metric: every representation dimension has collapsed");

  // Examples grouped by (factor, value).
  std::vector<std::map<std::size_t, std::vector<std::size_t>>> groups(factors.factors());
  for (std::size_t f : active) {
    for (std::size_t r = 0; r < n; ++r) groups[f][factors.at(r, f)].push_back(r);
  }
  auto vote = [&]() -> std::pair<std::size_t, std::size_t> {
    const std::size_t k = static_cast<std::size_t>(rng.below(active.size()));
    const std::size_t f = active[k];
    const std::size_t value = factors.at(static_cast<std::size_t>(rng.below(n)), f);
    const std::vector<std::size_t>& pool = groups[f].at(value);
    std::vector<double> mean(dims, 0.0), sq(dims, 0.0);
    std::vector<std::size_t> rows(options.batch_size);
    for (auto& r : rows) r = pool[static_cast<std::size_t>(rng.below(pool.size()))];
    for (std::size_t r : rows) {
      for (std::size_t j : kept) mean[j] += v[r * dims + j] * scale[j];
    }
    for (std::size_t j : kept) mean[j] /= static_cast<double>(rows.size());
    for (std::size_t r : rows) {
      for (std::size_t j : kept) {
        const double diff = v[r * dims + j] * scale[j] - mean[j];
        sq[j] += diff * diff;
      }
    }
    std::size_t best = kept[0];
    for (std::size_t j : kept) {
      if (sq[j] < sq[best]) best = j;
    }
    return {best, k};
  };

  std::vector<std::size_t> table(dims * active.size(), 0);
  for (std::size_t t = 0; t < options.train_votes; ++t) {
    const auto [dim, k] = vote();
    ++table[dim * active.size() + k];
  }
  std::vector<std::size_t> majority(dims, 0);
  for (std::size_t j = 0; j < dims; ++j) {
    for (std::size_t k = 1; k < active.size(); ++k) {
      if (table[j * active.size() + k] > table[j * active.size() + majority[j]]) majority[j] = k;
    }
  }
  std::size_t correct = 0;
  for (std::size_t t = 0; t < options.eval_votes; ++t) {
    const auto [dim, k] = vote();
    if (majority[dim] == k) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(options.eval_votes);
}

double mig(const Tensor& reps, const FactorTable& factors, const MigOptions& options, RandomSource& rng) {
  check_reps(reps, factors, "mig");
  if (options.bins < 2) throw std::invalid_argument("mig: needs at least 2 bins");
  std::size_t n = reps.size(0);
  const std::size_t dims = reps.size(1);
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (options.max_samples != 0 && n > options.max_samples) {
    for (std::size_t i = 0; i < options.max_samples; ++i) {
      std::swap(rows[i], rows[i + static_cast<std::size_t>(rng.below(n - i))]);
    }
    rows.resize(options.max_samples);
    std::sort(rows.begin(), rows.end());
    n = rows.size();
  }
  const auto v = reps.values();
  // Equal-count bins from ranks. Tied values take the bin of their first
  // rank; splitting a tie by row order would leak whatever the rows are
  // sorted by.
  std::vector<std::vector<std::uint16_t>> binned(dims, std::vector<std::uint16_t>(n));
  std::vector<std::size_t> order(n);
  for (std::size_t j = 0; j < dims; ++j) {
    auto value = [&](std::size_t k) { return v[rows[k] * dims + j]; };
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return value(a) < value(b); });
    std::size_t first = 0;
    for (std::size_t rank = 0; rank < n; ++rank) {
      if (rank > 0 && value(order[rank]) != value(order[rank - 1])) first = rank;
      binned[j][order[rank]] = static_cast<std::uint16_t>(first * options.bins / n);
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t f = 0; f < factors.factors(); ++f) {
    const std::size_t card = factors.cardinality[f];
    std::vector<double> pf(card, 0.0);
    for (std::size_t r = 0; r < n; ++r) pf[factors.at(rows[r], f)] += inv_n;
    double entropy = 0.0;
    std::size_t distinct = 0;
    for (double p : pf) {
      if (p > 0.0) {
        entropy -= p * std::log(p);
        ++distinct;
      }
    }
    if (distinct < 2) continue;  // single-valued factor carries no information
    std::vector<double> mi(dims, 0.0);
    std::vector<double> joint(options.bins * card), pb(options.bins);
    for (std::size_t j = 0; j < dims; ++j) {
      std::fill(joint.begin(), joint.end(), 0.0);
      std::fill(pb.begin(), pb.end(), 0.0);
      for (std::size_t r = 0; r < n; ++r) {
        joint[binned[j][r] * card + factors.at(rows[r], f)] += inv_n;
        pb[binned[j][r]] += inv_n;
      }
      for (std::size_t b = 0; b < options.bins; ++b) {
        for (std::size_t c = 0; c < card; ++c) {
          const double p = joint[b * card + c];
          if (p > 0.0) mi[j] += p * std::log(p / (pb[b] * pf[c]));
        }
      }
    }
    std::sort(mi.begin(), mi.end(), std::greater<>());
    const double gap = mi[0] - (dims > 1 ? mi[1] : 0.0);
    total += gap / entropy;
    ++counted;
  }
  if (counted == 0) throw std::invalid_argument("mig: no factor takes more than one value");
  return total / static_cast<double>(counted);
}

ConditionalResult conditional_metric(const MetricFn& metric, const Tensor& reps, const FactorTable& factors,
                                     std::span<const std::int32_t> labels, RandomSource& rng,
                                     std::size_t min_per_class) {
  if (labels.size() != reps.size(0)) {
    throw ShapeError("conditional_metric: " + std::to_string(labels.size()) + " labels vs " +
                     std::to_string(reps.size(0)) + " representations");
  }
  std::map<std::int32_t, std::vector<std::size_t>> members;
  for (std::size_t r = 0; r < labels.size(); ++r) members[labels[r]].push_back(r);
  ConditionalResult result;
  for (const auto& [cls, rows] : members) {
    if (rows.size() < min_per_class) {
      throw std::invalid_argument("conditional_metric: class " + std::to_string(cls) + " has " +
                                  std::to_string(rows.size()) + " examples, below the minimum of " +
                                  std::to_string(min_per_class));
    }
  }
  for (const auto& [cls, rows] : members) {
    const double score = metric(select_rows(reps, rows), select_rows(factors, rows), rng);
    result.classes.push_back(cls);
    result.per_class.push_back(score);
    result.counts.push_back(rows.size());
    result.value += score * static_cast<double>(rows.size()) / static_cast<double>(labels.size());
  }
  return result;
}

double unsupervised_accuracy(std::span<const std::size_t> clusters, std::span<const std::int32_t> labels) {
  if (clusters.empty()) throw std::invalid_argument("unsupervised_accuracy: empty input");
  if (clusters.size() != labels.size()) {
    throw std::invalid_argument("unsupervised_accuracy: " + std::to_string(clusters.size()) + " predictions vs " +
                                std::to_string(labels.size()) + " labels");
  }
  std::map<std::size_t, std::map<std::int32_t, std::size_t>> counts;
  for (std::size_t i = 0; i < clusters.size(); ++i) ++counts[clusters[i]][labels[i]];
  std::size_t correct = 0;
  for (const auto& [cluster, by_label] : counts) {
    std::size_t best = 0;
    for (const auto& [label, count] : by_label) best = std::max(best, count);  // map order: lowest label wins ties
    correct += best;
  }
  return static_cast<double>(correct) / static_cast<double>(clusters.size());
}

double iwae_from_log_weights(std::span<const double> log_weights, std::size_t samples) {
  if (samples == 0 || log_weights.empty()) throw std::invalid_argument("iwae: needs at least one sample");
  if (log_weights.size() % samples != 0) {
    throw std::invalid_argument("iwae: " + std::to_string(log_weights.size()) + " log weights do not split into " +
                                std::to_string(samples) + " samples");
  }
  const double mx = *std::max_element(log_weights.begin(), log_weights.end());
  double acc = 0.0;
  for (double lw : log_weights) acc += std::exp(lw - mx);
  return -(mx + std::log(acc) - std::log(static_cast<double>(samples)));
}

std::vector<double> iwae_nll(const Model& model, const Tensor& x, const PriorMeans& prior, std::size_t samples,
                             RandomSource& rng) {
  NoGradGuard guard;
  if (samples == 0) throw std::invalid_argument("iwae_nll: K must be >= 1");
  const ModelConfig& cfg = model.config();
  const std::size_t batch = x.size(0), d = cfg.discrete_dim, pb = cfg.public_dim, pr = cfg.private_dim;
  const bool has_w = cfg.variant != Variant::joint;
  if (has_w && prior.mu.shape() != Shape{d, pr}) {
    throw ShapeError("iwae_nll: prior means " + shape_str(prior.mu.shape()) + " do not match [" + std::to_string(d) +
                     ", " + std::to_string(pr) + "]");
  }
  const EncoderOutput enc = model.encode(x);
  const double log_pc = -std::log(static_cast<double>(d));
  std::vector<double> logw(batch * samples * d);  // [B, K, d]
  const auto zmu = enc.z.mu.values(), zlv = enc.z.logvar.values();
  for (std::size_t k = 0; k < samples; ++k) {
    Tensor eps_z({batch, pb});
    rng.fill_normal(eps_z.values());
    const Tensor z = gaussian_reparam(enc.z, eps_z);
    const auto zv = z.values();
    for (std::size_t c = 0; c < d; ++c) {
      const std::vector<std::size_t> cls(batch, c);
      LatentSample s;
      s.z = z;
      s.discrete_repr = one_hot(cls, d);
      s.selected_mode = cls;
      Tensor wmu, wlv;
      if (has_w) {
        wmu = gather_mode(enc.w.mu, cls);
        wlv = gather_mode(enc.w.logvar, cls);
        Tensor eps_w({batch, pr});
        rng.fill_normal(eps_w.values());
        s.w = gaussian_reparam({wmu, wlv}, eps_w);
      }
      const Tensor recon = bce_with_logits(model.decode(s), x);
      for (std::size_t b = 0; b < batch; ++b) {
        double lw = log_pc - recon.values()[b];
        const auto zb = zv.subspan(b * pb, pb);
        lw += log_normal_diag(zb, std::vector<float>(pb, 0.0f), {}) -
              log_normal_diag(zb, zmu.subspan(b * pb, pb), zlv.subspan(b * pb, pb));
        if (has_w) {
          const auto wb = s.w.values().subspan(b * pr, pr);
          lw += log_normal_diag(wb, prior.mu.values().subspan(c * pr, pr), {}) -
                log_normal_diag(wb, wmu.values().subspan(b * pr, pr), wlv.values().subspan(b * pr, pr));
        }
        logw[(b * samples + k) * d + c] = lw;
      }
    }
  }
  std::vector<double> out(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    out[b] = iwae_from_log_weights(std::span(logw).subspan(b * samples * d, samples * d), samples);
  }
  return out;
}

}  // namespace discond
