// SPDX-License-Identifier: Apache-2.0
#include <chrono>

#include "discond/app.hpp"
#include "discond/png.hpp"

namespace discond {

namespace fs = std::filesystem;

std::vector<fs::path> run_traverse(const RunConfig& cfg, const fs::path& checkpoint,
                                   const std::vector<std::size_t>& indices, std::size_t steps, float range,
                                   const fs::path& out_dir) {
  cfg.validate();
  if (steps == 0) throw ValidationError("traverse: steps must be >= 1");
  if (indices.empty()) throw ValidationError("traverse: no example indices given");
  if (!(range > 0.0f)) throw ValidationError("traverse: range must be positive");
  const LoadedModel loaded = load_checkpoint(cfg, checkpoint);
  const ImageDataset data = load_eval_data(cfg);
  for (std::size_t i : indices) {
    if (i >= data.size()) {
      throw ValidationError("traverse: example index " + std::to_string(i) + " outside dataset of " +
                            std::to_string(data.size()));
    }
  }
  fs::create_directories(out_dir);
  const Tensor x = data.images(indices);
  const Model& model = loaded.model;
  std::vector<fs::path> written;
  auto emit = [&](const std::string& name, TraverseKind kind, std::size_t axis) {
    const fs::path path = out_dir / name;
    write_image_grid(path, model.traverse(x, kind, axis, range, steps));
    written.push_back(path);
  };
  for (std::size_t a = 0; a < cfg.model.public_dim; ++a) {
    emit("public_" + std::to_string(a) + ".png", TraverseKind::public_axis, a);
  }
  for (std::size_t a = 0; a < cfg.model.private_dim; ++a) {
    emit("private_" + std::to_string(a) + ".png", TraverseKind::private_axis, a);
  }
  emit("discrete.png", TraverseKind::discrete, 0);
  return written;
}

CondspritesSummary run_make_condsprites(const fs::path& dsprites, const fs::path& out_dir, std::size_t extent) {
  const auto t0 = std::chrono::steady_clock::now();
  const ImageDataset data = load_condsprites(dsprites, extent);
  fs::create_directories(out_dir);
  write_archive(out_dir / "condsprites.dcvk", dataset_to_archive(data));
  write_factor_csv(out_dir / "condsprites_factors.csv", data);
  CondspritesSummary s;
  s.total = data.size();
  for (std::int32_t label : data.labels) {
    if (label == kSquare) ++s.squares;
    if (label == kEllipse) ++s.ellipses;
    if (label == kHeart) ++s.hearts;
  }
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

}  // namespace discond
