// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>

#include "discond/app.hpp"
#include "discond/ops.hpp"

namespace discond {
namespace {

constexpr std::uint64_t kEvalStream = 0x6576616c;  // "eval"
constexpr std::uint64_t kNllStream = 0x6e6c6c;     // "nll"
constexpr std::size_t kNllChunk = 25;

struct Series {
  std::string metric;
  std::vector<double> values;
};

// mean, population std and best over the repeats, mirroring "Mean (std)" and
// "Best" columns.
void summarize(const Series& s, std::uint64_t seed, std::vector<MetricReport>& out) {
  const double n = static_cast<double>(s.values.size());
  const double mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : s.values) var += (v - mean) * (v - mean);
  out.push_back({s.metric + "_mean", mean, "all", seed, s.values.size()});
  out.push_back({s.metric + "_std", std::sqrt(var / n), "all", seed, s.values.size()});
  out.push_back({s.metric + "_best", *std::max_element(s.values.begin(), s.values.end()), "all", seed,
                 s.values.size()});
}

void write_csv(const std::filesystem::path& path, const std::vector<MetricReport>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "metric,value,class,seed,n\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    out << r.metric << ',' << buf << ',' << r.cls << ',' << r.seed << ',' << r.n << '\n';
  }
}

}  // namespace

std::vector<MetricReport> run_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                                   const std::filesystem::path& csv_path, std::ostream* progress) {
  cfg.validate();
  const LoadedModel loaded = load_checkpoint(cfg, checkpoint);
  const ImageDataset data = load_eval_data(cfg);
  const RepresentationDump dump = dump_representations(loaded.model, data);
  std::vector<MetricReport> rows;

  if (!data.labels.empty()) {
    const auto clusters = argmax_rows(dump.alpha);
    rows.push_back({"accuracy", unsupervised_accuracy(clusters, data.labels), "all", cfg.seed, data.size()});
    if (progress) *progress << "accuracy " << rows.back().value << '\n';
  }

  if (data.factors.factors() != 0) {
    const bool conditional = cfg.dataset == "condsprites";
    const MetricFn fvae = [&](const Tensor& r, const FactorTable& f, RandomSource& rng) {
      return factorvae_metric(r, f, cfg.eval.factorvae, rng);
    };
    const MetricFn migfn = [&](const Tensor& r, const FactorTable& f, RandomSource& rng) {
      return mig(r, f, cfg.eval.mig, rng);
    };
    Series fv{conditional ? "cond_factorvae" : "factorvae", {}};
    Series mg{conditional ? "cond_mig" : "mig", {}};
    for (std::size_t r = 0; r < cfg.eval.repeats; ++r) {
      const std::uint64_t seed = cfg.seed + r;
      RandomSource rng(seed, kEvalStream);
      for (auto [series, fn] : {std::pair{&fv, &fvae}, std::pair{&mg, &migfn}}) {
        if (conditional) {
          const ConditionalResult res =
              conditional_metric(*fn, dump.reps, data.factors, data.labels, rng, cfg.eval.min_per_class);
          rows.push_back({series->metric, res.value, "all", seed, data.size()});
          for (std::size_t c = 0; c < res.classes.size(); ++c) {
            rows.push_back({series->metric, res.per_class[c], std::to_string(res.classes[c]), seed, res.counts[c]});
          }
          series->values.push_back(res.value);
        } else {
          const double v = (*fn)(dump.reps, data.factors, rng);
          rows.push_back({series->metric, v, "all", seed, data.size()});
          series->values.push_back(v);
        }
      }
      if (progress) {
        *progress << "repeat " << r << " " << fv.metric << " " << fv.values.back() << " " << mg.metric << " "
                  << mg.values.back() << '\n';
      }
    }
    summarize(fv, cfg.seed, rows);
    summarize(mg, cfg.seed, rows);
  }

  if (cfg.dataset == "mnist") {
    const std::size_t count = std::min(cfg.eval.nll_examples, data.size());
    RandomSource rng(cfg.seed, kNllStream);
    double total = 0.0;
    for (std::size_t begin = 0; begin < count; begin += kNllChunk) {
      std::vector<std::size_t> idx(std::min(kNllChunk, count - begin));
      std::iota(idx.begin(), idx.end(), begin);
      for (double v : iwae_nll(loaded.model, data.images(idx), loaded.prior, cfg.eval.nll_samples, rng)) total += v;
    }
    rows.push_back({"nll", total / static_cast<double>(count), "all", cfg.seed, count});
    if (progress) *progress << "nll " << rows.back().value << '\n';
  }

  write_csv(csv_path, rows);
  return rows;
}

}  // namespace discond
