// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "discond/app.hpp"

namespace discond {
namespace {

namespace fs = std::filesystem;

// Stream ids keep the data order, per-step noise and subset draws independent.
constexpr std::uint64_t kDataStream = 0x64617461;    // "data"
constexpr std::uint64_t kStepStream = 0x73746570;    // "step"
constexpr std::uint64_t kSubsetStream = 0x73756273;  // "subs"
constexpr std::uint64_t kEvalSubsetStream = 0x65737562;

const char* kLossHeader = "iter,recon,kl_z,kl_w,kl_c,C_z,C_w,C_c,total";

ImageDataset load_condsprites_for(const RunConfig& cfg) {
  if (!cfg.condsprites_cache.empty() && fs::exists(cfg.condsprites_cache)) {
    return dataset_from_archive(read_archive(cfg.condsprites_cache), "condsprites");
  }
  if (cfg.dsprites_path.empty()) {
    throw ValidationError("condsprites needs --condsprites <cache> or --dsprites <archive>");
  }
  return load_condsprites(cfg.dsprites_path, cfg.model.image_extent);
}

ImageDataset load_dsprites_for(const RunConfig& cfg) {
  if (cfg.dsprites_path.empty()) throw ValidationError("dsprites needs --dsprites <archive>");
  return load_dsprites(cfg.dsprites_path, cfg.model.image_extent);
}

MnistSplits load_mnist_for(const RunConfig& cfg) {
  if (cfg.mnist_dir.empty()) throw ValidationError("mnist needs --mnist-dir <dir>");
  return load_mnist(cfg.mnist_dir);
}

// Seeded draw of `keep` rows, returned in ascending order.
ImageDataset random_subset(const ImageDataset& data, std::size_t keep, RandomSource rng) {
  if (keep == 0 || keep >= data.size()) return data;
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(order.size() - i));
    std::swap(order[i], order[j]);
  }
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return data.subset(order);
}

std::string loss_row(std::uint64_t iter, const LossBreakdown& l) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%llu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", static_cast<unsigned long long>(iter),
                l.recon, l.kl_z, l.kl_w, l.kl_c, l.cap_z, l.cap_w, l.cap_c, l.total_value);
  return buf;
}

// Keeps the header and rows logged before `resume_iter`.
void truncate_loss_log(const fs::path& path, std::uint64_t resume_iter) {
  std::vector<std::string> kept;
  if (std::ifstream in(path); in) {
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (header) {
        header = false;
        continue;
      }
      if (line.empty()) continue;
      if (std::stoull(line.substr(0, line.find(','))) < resume_iter) kept.push_back(line);
    }
  }
  std::ofstream out(path, std::ios::trunc);
  out << kLossHeader << '\n';
  for (const auto& l : kept) out << l << '\n';
}

void save_checkpoint(const fs::path& path, const Model& model, const Adam& adam, const PriorMeans& prior,
                     std::uint64_t iter) {
  Archive a;
  model.parameters().save(a, "param/");
  adam.save(a);
  if (prior.mu.defined()) a["prior.mu"] = prior.mu.detach();
  archive_put_u64(a, "train.iter", iter);
  write_archive(path, a);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

ImageDataset load_train_data(const RunConfig& cfg) {
  ImageDataset data;
  if (cfg.dataset == "condsprites") {
    data = load_condsprites_for(cfg);
  } else if (cfg.dataset == "dsprites") {
    data = load_dsprites_for(cfg);
  } else {
    data = load_mnist_for(cfg).train;
  }
  if (data.extent != cfg.model.image_extent) {
    throw ValidationError("dataset extent " + std::to_string(data.extent) + " does not match image_extent " +
                          std::to_string(cfg.model.image_extent));
  }
  return random_subset(data, cfg.subset, RandomSource(cfg.seed, kSubsetStream));
}

ImageDataset load_eval_data(const RunConfig& cfg) {
  if (cfg.dataset == "condsprites") return load_condsprites_for(cfg);
  if (cfg.dataset == "dsprites") {
    return random_subset(load_dsprites_for(cfg), cfg.eval.max_examples, RandomSource(cfg.seed, kEvalSubsetStream));
  }
  return load_mnist_for(cfg).test;
}

LoadedModel load_checkpoint(const RunConfig& cfg, const fs::path& checkpoint) {
  const Archive a = read_archive(checkpoint);
  LoadedModel loaded{Model(cfg.model, cfg.seed), PriorMeans{}};
  try {
    loaded.model.parameters().load(a, "param/");
  } catch (const ArchiveError& e) {
    throw ValidationError(std::string("checkpoint does not fit the config: ") + e.what());
  } catch (const ShapeError& e) {
    throw ValidationError(std::string("checkpoint does not fit the config: ") + e.what());
  }
  if (cfg.model.variant != Variant::joint) {
    const Tensor& mu = archive_get(a, "prior.mu");
    const Shape want{cfg.model.discrete_dim, cfg.model.private_dim};
    if (mu.shape() != want) {
      throw ValidationError("checkpoint prior.mu: expected " + shape_str(want) + ", found " + shape_str(mu.shape()));
    }
    loaded.prior.mu = mu.detach();
  }
  return loaded;
}

TrainSummary run_train(const RunConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  if (options.out_dir.empty()) throw ValidationError("train: output directory required");
  fs::create_directories(options.out_dir);
  write_text(options.out_dir / "config.json", config_to_json(cfg));

  const ImageDataset data = load_train_data(cfg);
  const std::size_t n = data.size();
  if (n == 0) throw ValidationError("train: empty training set");
  const bool joint = cfg.model.variant == Variant::joint;

  Model model(cfg.model, cfg.seed);
  PriorMeans prior;
  if (!joint) prior = initial_prior(cfg.prior, cfg.model.discrete_dim, cfg.model.private_dim, cfg.seed);
  Adam adam(model.parameters(), AdamOptions{static_cast<float>(cfg.lr)});

  const std::uint64_t per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  std::uint64_t total = per_epoch * cfg.epochs;
  if (cfg.max_iters != 0) total = std::min(total, cfg.max_iters);
  const std::uint64_t save_every = std::max<std::uint64_t>(1, (total + 9) / 10);

  TrainSummary summary;
  summary.checkpoint = options.out_dir / "checkpoint.dcvk";
  const fs::path loss_path = options.out_dir / "loss.csv";

  std::uint64_t start = 0;
  if (!options.resume.empty()) {
    const Archive a = read_archive(options.resume);
    model.parameters().load(a, "param/");
    adam.load(a);
    if (!joint) prior.mu = archive_get(a, "prior.mu").detach();
    start = archive_get_u64(a, "train.iter");
    if (start > total) throw ValidationError("resume: checkpoint is past the configured run length");
  }
  truncate_loss_log(loss_path, start);
  std::ofstream log(loss_path, std::ios::app);

  const RandomSource data_rng(cfg.seed, kDataStream);
  const RandomSource step_root(cfg.seed, kStepStream);
  std::vector<std::vector<std::size_t>> order;
  std::uint64_t order_epoch = ~std::uint64_t{0};

  for (std::uint64_t t = start; t < total; ++t) {
    const std::uint64_t epoch = t / per_epoch;
    if (epoch != order_epoch) {
      order = batches(n, cfg.batch_size, data_rng.fork(epoch));
      order_epoch = epoch;
    }
    const Tensor x = data.images(order[t % per_epoch]);
    RandomSource step_rng = step_root.fork(t);

    model.parameters().zero_grad();
    LossBreakdown loss;
    try {
      const EncoderOutput out = model.encode(x);
      const LatentNoise noise = LatentNoise::draw(cfg.model, x.size(0), step_rng);
      const Tensor logits = model.decode(model.reparam(out, cfg.temperature, noise));
      loss = joint ? jointvae_loss(x, out, logits, cfg.weights, t)
                   : discond_loss(x, out, logits, prior, cfg.weights, t);
      if (!std::isfinite(loss.total_value)) {
        throw NumericalError("non-finite loss " + std::to_string(loss.total_value));
      }
      backward(loss.total);
    } catch (const NumericalError& e) {
      throw NumericalAbort("iteration " + std::to_string(t) + ": " + e.what() + "; last good checkpoint kept at " +
                           summary.checkpoint.string());
    }
    adam.step();

    log << loss_row(t, loss) << '\n';
    if (t == start) summary.first_recon = loss.recon;
    summary.last_recon = loss.recon;
    if (options.progress && (t % options.progress_every == 0 || t + 1 == total)) {
      *options.progress << "iter " << t << "/" << total << " recon " << loss.recon << " kl_z " << loss.kl_z
                        << " kl_w " << loss.kl_w << " kl_c " << loss.kl_c << " total " << loss.total_value << '\n';
    }

    const std::uint64_t done = t + 1;
    if (!joint && done % per_epoch == 0) {
      apply_policy(cfg.prior, static_cast<std::size_t>(done / per_epoch), cfg.epochs, model, data, prior);
    }
    if (done % save_every == 0 || done == total) {
      log.flush();
      save_checkpoint(summary.checkpoint, model, adam, prior, done);
    }
  }
  summary.iterations = total;
  log.close();

  const ImageDataset eval = (cfg.dataset == "condsprites" && cfg.subset == 0) ? data : load_eval_data(cfg);
  const RepresentationDump dump = dump_representations(model, eval);
  write_archive(options.out_dir / "dump.dcvk", Archive{{"reps", dump.reps}, {"alpha", dump.alpha}});
  return summary;
}

}  // namespace discond
