// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <fstream>

#include "support.hpp"

#include "discond/app.hpp"

using namespace discond;
namespace fs = std::filesystem;

namespace {

// 64 images: squares (label 0) and crosses (label 1) at 16 positions and 2 sizes.
ImageDataset toy_condsprites() {
  ImageDataset d;
  d.name = "condsprites";
  d.extent = 32;
  d.factors.names = {"scale", "pos"};
  d.factors.cardinality = {2, 16};
  const std::size_t n = 64;
  d.pixels.assign(n * 32 * 32, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % 2, scale = (i / 2) % 2, pos = i / 4;
    const std::size_t half = 3 + 2 * scale, cx = 6 + (pos % 4) * 6, cy = 6 + (pos / 4) * 6;
    for (std::size_t y = cy - half; y <= cy + half; ++y) {
      for (std::size_t x = cx - half; x <= cx + half; ++x) {
        const bool on = label == 0 || x == cx || y == cy;
        if (on) d.pixels[(i * 32 + y) * 32 + x] = 1;
      }
    }
    d.labels.push_back(static_cast<std::int32_t>(label));
    d.factors.index.push_back(static_cast<std::uint16_t>(scale));
    d.factors.index.push_back(static_cast<std::uint16_t>(pos));
  }
  return d;
}

RunConfig toy_config(const fs::path& cache) {
  RunConfig cfg = preset("exact-condsprites-pb3-pr2");
  cfg.name = "toy";
  cfg.condsprites_cache = cache.string();
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.seed = 7;
  cfg.weights.cap_z.ramp_iters = cfg.weights.cap_w.ramp_iters = cfg.weights.cap_c.ramp_iters = 8;
  cfg.eval.repeats = 2;
  cfg.eval.factorvae = {8, 20, 10};
  cfg.eval.min_per_class = 8;
  return cfg;
}

struct Toy {
  test::ScratchDir dir{"app"};
  fs::path cache = dir / "toy.dcvk";
  Toy() { write_archive(cache, dataset_to_archive(toy_condsprites())); }
};

int cli(const std::string& args) {
  const std::string cmd = std::string(DISCOND_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config json round trip") {
  for (const auto& name : preset_names()) {
    const RunConfig cfg = preset(name);
    const std::string json = config_to_json(cfg);
    CHECK(config_to_json(config_from_json(json)) == json);
  }
}

TEST_CASE("config rejects unknown keys and bad values") {
  const std::string base = config_to_json(preset("exact-mnist-pb10-pr3"));
  auto edited = [&](const std::string& from, const std::string& to) {
    std::string s = base;
    const auto pos = s.find(from);
    REQUIRE(pos != std::string::npos);
    return s.replace(pos, from.size(), to);
  };
  try {
    config_from_json(edited("\"lr\"", "\"learning_rate\""));
    FAIL("unknown key accepted");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("learning_rate") != std::string::npos);
  }
  CHECK_THROWS_AS(config_from_json(edited("\"repeats\"", "\"repeat\"")), ValidationError);
  CHECK_THROWS_AS(config_from_json(edited("\"lr\": 0.0005", "\"lr\": -1")), ValidationError);
  CHECK_THROWS_AS(config_from_json(edited("\"lr\": 0.0005", "\"lr\": \"fast\"")), ValidationError);
  CHECK_THROWS_AS(config_from_json(edited("\"discrete_dim\": 10", "\"discrete_dim\": 3")), ValidationError);
  CHECK_THROWS_AS(config_from_json(edited("\"variant\": \"exact\"", "\"variant\": \"fuzzy\"")), ValidationError);
  CHECK_THROWS_AS(config_from_json(edited("\"batch_size\": 64", "\"batch_size\": 0")), ValidationError);
  CHECK_THROWS_AS(config_from_json("[1, 2]"), ValidationError);
  CHECK_THROWS_AS(config_from_json("{"), ValidationError);
  CHECK_NOTHROW(config_from_json("{\"dataset\": \"condsprites\", \"discrete_dim\": 2}"));
}

TEST_CASE("presets carry the table hyperparameters") {
  CHECK(preset_names().size() == 28);
  const RunConfig a = preset("exact-dsprites-pb6-pr2");
  CHECK(a.model.variant == Variant::exact);
  CHECK(a.model.discrete_dim == 3);
  CHECK(a.weights.beta_z == 200);
  CHECK(a.weights.cap_c.target == 1.1);
  CHECK(a.weights.cap_z.ramp_iters == 300000);
  CHECK(a.epochs == 30);
  CHECK(a.lr == 5e-4);
  const RunConfig b = preset("approx-mnist-pb8-pr2");
  CHECK(b.prior.mode == PriorPolicyMode::fixed_random);
  CHECK(b.lr == 2e-3);
  CHECK(b.epochs == 100);
  const RunConfig j = preset("joint-condsprites-pb5");
  CHECK(j.model.variant == Variant::joint);
  CHECK(j.model.private_dim == 0);
  CHECK(j.weights.beta_w == 0);
  CHECK_THROWS_AS(preset("exact-condsprites-pb4-pr3"), ValidationError);
}

TEST_CASE("checked-in preset files match the built-in presets") {
  for (const auto& name : preset_names()) {
    const fs::path file = fs::path(DISCOND_PRESET_DIR) / (name + ".json");
    INFO(file.string());
    REQUIRE(fs::exists(file));
    CHECK(config_to_json(load_config(file)) == config_to_json(preset(name)));
  }
}

TEST_CASE("cli exit codes") {
  CHECK(cli("presets") == 0);
  CHECK(cli("selftest") == 0);
  CHECK(cli("") == 2);
  CHECK(cli("train --preset nonexistent --print-config") == 2);
  CHECK(cli("train --preset exact-mnist-pb10-pr3 --print-config") == 0);
  CHECK(cli("train --preset exact-mnist-pb10-pr3 --out /nonexistent/x --mnist-dir /nonexistent") == 2);
  CHECK(cli("eval --preset exact-mnist-pb10-pr3 --checkpoint /nonexistent.dcvk --csv /dev/null") != 0);
  CHECK(cli("train --bogus-flag") == 2);
}

TEST_CASE("training is deterministic and resumes exactly") {
  Toy toy;
  const RunConfig cfg = toy_config(toy.cache);
  const TrainSummary a = run_train(cfg, {toy.dir / "a"});
  run_train(cfg, {toy.dir / "b"});
  CHECK(a.iterations == 8);
  CHECK(std::isfinite(a.last_recon));
  for (const char* f : {"checkpoint.dcvk", "dump.dcvk", "loss.csv", "config.json"}) {
    INFO(f);
    CHECK(test::read_bytes(toy.dir / "a" / f) == test::read_bytes(toy.dir / "b" / f));
  }
  // Stop after 3 iterations, then continue to the end.
  RunConfig part = cfg;
  part.max_iters = 3;
  CHECK(run_train(part, {toy.dir / "c"}).iterations == 3);
  TrainOptions resume{toy.dir / "c"};
  resume.resume = toy.dir / "c" / "checkpoint.dcvk";
  CHECK(run_train(cfg, resume).iterations == 8);
  CHECK(test::read_bytes(toy.dir / "a" / "checkpoint.dcvk") == test::read_bytes(toy.dir / "c" / "checkpoint.dcvk"));
  CHECK(test::read_bytes(toy.dir / "a" / "loss.csv") == test::read_bytes(toy.dir / "c" / "loss.csv"));

  RunConfig other = cfg;
  other.seed = 8;
  run_train(other, {toy.dir / "d"});
  CHECK(test::read_bytes(toy.dir / "a" / "checkpoint.dcvk") != test::read_bytes(toy.dir / "d" / "checkpoint.dcvk"));

  // A checkpoint from a different architecture is refused with a clear error.
  RunConfig wider = cfg;
  wider.model.public_dim = 4;
  CHECK_THROWS_AS(load_checkpoint(wider, toy.dir / "a" / "checkpoint.dcvk"), ValidationError);
}

TEST_CASE("evaluation writes deterministic metric rows") {
  Toy toy;
  const RunConfig cfg = toy_config(toy.cache);
  run_train(cfg, {toy.dir / "run"});
  const fs::path ckpt = toy.dir / "run" / "checkpoint.dcvk";
  const auto rows = run_eval(cfg, ckpt, toy.dir / "m1.csv");
  run_eval(cfg, ckpt, toy.dir / "m2.csv");
  CHECK(test::read_bytes(toy.dir / "m1.csv") == test::read_bytes(toy.dir / "m2.csv"));
  std::ifstream in(toy.dir / "m1.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "metric,value,class,seed,n");
  bool accuracy = false, factorvae = false, mig_mean = false;
  for (const auto& r : rows) {
    CHECK(std::isfinite(r.value));
    accuracy |= r.metric == "accuracy";
    factorvae |= r.metric == "cond_factorvae" && r.cls == "all";
    mig_mean |= r.metric == "cond_mig_mean";
    if (r.metric == "accuracy") {
      CHECK(r.value >= 0.5);
      CHECK(r.value <= 1.0);
    }
  }
  CHECK(accuracy);
  CHECK(factorvae);
  CHECK(mig_mean);
}

TEST_CASE("traversals write one grid per axis") {
  Toy toy;
  RunConfig cfg = toy_config(toy.cache);
  cfg.max_iters = 2;
  run_train(cfg, {toy.dir / "run"});
  const fs::path ckpt = toy.dir / "run" / "checkpoint.dcvk";
  const auto files = run_traverse(cfg, ckpt, {0, 5}, 4, 2.0f, toy.dir / "trav");
  CHECK(files.size() == cfg.model.public_dim + cfg.model.private_dim + 1);
  for (const auto& f : files) {
    CHECK(fs::exists(f));
    CHECK(test::read_bytes(f).substr(1, 3) == "PNG");
  }
  CHECK(fs::exists(toy.dir / "trav" / "discrete.png"));
  CHECK_THROWS_AS(run_traverse(cfg, ckpt, {0}, 0, 2.0f, toy.dir / "t0"), ValidationError);
  CHECK_THROWS_AS(run_traverse(cfg, ckpt, {64}, 3, 2.0f, toy.dir / "t1"), ValidationError);
  CHECK_THROWS_AS(run_traverse(cfg, ckpt, {}, 3, 2.0f, toy.dir / "t2"), ValidationError);
}
