// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include "discond/archive.hpp"
#include "discond/nn.hpp"

using namespace discond;

TEST_CASE("parameter set registers, rejects duplicates and iterates by name") {
  ParameterSet ps;
  ps.add("b", Tensor({2}));
  ps.add("a", Tensor({3, 2}));
  CHECK(ps.at("a").requires_grad());
  CHECK(ps.size() == 2);
  CHECK(ps.numel() == 8);
  CHECK_THROWS_AS(ps.add("a", Tensor({1})), std::invalid_argument);
  CHECK_THROWS_AS(ps.at("missing"), std::out_of_range);
  std::vector<std::string> names;
  for (const auto& [name, t] : ps) names.push_back(name);
  CHECK(names == std::vector<std::string>{"a", "b"});
}

TEST_CASE("parameter load lists every mismatch") {
  ParameterSet ps;
  ps.add("x.weight", Tensor({2, 3}));
  ps.add("y.weight", Tensor({4}));
  Archive a;
  a["p/x.weight"] = Tensor({3, 2});
  try {
    ps.load(a, "p/");
    FAIL("expected ArchiveError");
  } catch (const ArchiveError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("p/x.weight: expected [2, 3], found [3, 2]") != std::string::npos);
    CHECK(msg.find("p/y.weight: expected [4], found nothing") != std::string::npos);
  }
  Archive good;
  good["x.weight"] = Tensor({2, 3}, {1, 2, 3, 4, 5, 6});
  good["y.weight"] = Tensor({4}, {7, 8, 9, 10});
  ps.load(good);
  CHECK(ps.at("y.weight").to_vector() == std::vector<float>{7, 8, 9, 10});
}

TEST_CASE("kaiming uniform respects its bound and is seeded") {
  Tensor w({64, 32});
  RandomSource rng(1);
  kaiming_uniform(w, 32, rng);
  const double bound = std::sqrt(6.0 / 32.0);
  double sq = 0.0;
  for (float v : w.values()) {
    CHECK(std::abs(v) <= bound);
    sq += double(v) * v;
  }
  // Var of U(-b, b) is b^2 / 3.
  CHECK(sq / w.numel() == doctest::Approx(bound * bound / 3.0).epsilon(0.05));
  Tensor w2({64, 32});
  RandomSource rng2(1);
  kaiming_uniform(w2, 32, rng2);
  CHECK(w.to_vector() == w2.to_vector());
}

TEST_CASE("layers create named parameters with the documented shapes") {
  ParameterSet ps;
  RandomSource rng(0);
  const Linear l = Linear::create(ps, "fc", 5, 3, rng);
  const Conv2d c = Conv2d::create(ps, "conv", 2, 4, 4, rng);
  const ConvTranspose2d d = ConvTranspose2d::create(ps, "deconv", 4, 2, 4, rng);
  CHECK(ps.at("fc.weight").shape() == Shape{3, 5});
  CHECK(ps.at("conv.weight").shape() == Shape{4, 2, 4, 4});
  CHECK(ps.at("deconv.weight").shape() == Shape{4, 2, 4, 4});
  CHECK(ps.at("deconv.bias").shape() == Shape{2});
  for (float v : ps.at("fc.bias").values()) CHECK(v == 0.0f);
  const double deconv_bound = std::sqrt(6.0 / (4.0 * 2.0 * 2.0));
  for (float v : ps.at("deconv.weight").values()) CHECK(std::abs(v) <= deconv_bound);
  const Tensor x({1, 2, 8, 8});
  CHECK(c(x).shape() == Shape{1, 4, 4, 4});
  CHECK(d(c(x)).shape() == Shape{1, 2, 8, 8});
  CHECK(l(Tensor({7, 5})).shape() == Shape{7, 3});
  const Linear bound = Linear::bind(ps, "fc");
  CHECK(bound.weight.node() == l.weight.node());
}

TEST_CASE("adam matches the oracle trajectory") {
  ParameterSet ps;
  Tensor p = ps.add("p", Tensor({6}, test::pattern(6, 0.9, 0.1)));
  Adam adam(ps, AdamOptions{1e-2f});
  for (int step = 0; step < 5; ++step) {
    for (std::size_t i = 0; i < 6; ++i) p.grad()[i] = static_cast<float>(std::cos(0.5 * double(i) + step));
    adam.step();
  }
  CHECK(adam.steps() == 5);
  CHECK(test::normwise_error(p.values(), test::oracle("adam.param")) < 1e-6);
}

TEST_CASE("adam state round-trips through an archive") {
  auto run = [](int split) {
    ParameterSet ps;
    Tensor p = ps.add("p", Tensor({4}, {0.5f, -1.0f, 2.0f, 0.0f}));
    auto adam = std::make_unique<Adam>(ps, AdamOptions{1e-2f});
    for (int step = 0; step < 6; ++step) {
      if (step == split) {
        Archive a;
        adam->save(a);
        ps.save(a);
        const Archive back = decode_archive(encode_archive(a));
        adam = std::make_unique<Adam>(ps, AdamOptions{1e-2f});
        adam->load(back);
        ps.load(back);
      }
      for (std::size_t i = 0; i < 4; ++i) p.grad()[i] = std::sin(1.0f + i + step);
      adam->step();
    }
    return p.to_vector();
  };
  CHECK(run(-1) == run(3));
}

TEST_CASE("archive round trip, ordering and u64 limbs") {
  Archive a;
  a["zeta"] = Tensor({2, 2}, {1.0f, -0.0f, 3.5f, 1e-30f});
  a["alpha"] = Tensor::scalar(42.0f);
  for (std::uint64_t v : {0ull, 1ull, 65535ull, 65536ull, 0xFFFFFFFFFFFFFFFFull, 123456789012345ull}) {
    archive_put_u64(a, "n", v);
    CHECK(archive_get_u64(decode_archive(encode_archive(a)), "n") == v);
  }
  const std::string bytes = encode_archive(a);
  CHECK(bytes.substr(0, 5) == "DCVK1");
  CHECK(bytes.find("alpha") < bytes.find("zeta"));
  const Archive back = decode_archive(bytes);
  CHECK(back.at("zeta").shape() == Shape{2, 2});
  CHECK(back.at("zeta").to_vector() == a.at("zeta").to_vector());
  CHECK(encode_archive(back) == bytes);
}

TEST_CASE("archive decoding rejects damaged input") {
  Archive a;
  a["x"] = Tensor({3}, {1, 2, 3});
  const std::string bytes = encode_archive(a);
  CHECK_THROWS_AS(decode_archive(bytes.substr(0, bytes.size() - 1)), ArchiveError);
  CHECK_THROWS_AS(decode_archive(bytes + "x"), ArchiveError);
  CHECK_THROWS_AS(decode_archive("DCVK0" + bytes.substr(5)), ArchiveError);
  CHECK_THROWS_AS(decode_archive(""), ArchiveError);
  CHECK_THROWS_AS(archive_get(a, "nope"), ArchiveError);
}

TEST_CASE("archive writes are atomic replacements") {
  test::ScratchDir dir("archive_atomic");
  const auto path = dir / "a.dcvk";
  Archive a;
  a["x"] = Tensor::scalar(1.0f);
  write_archive(path, a);
  a["x"] = Tensor::scalar(2.0f);
  write_archive(path, a);
  CHECK(read_archive(path).at("x").item() == 2.0f);
  CHECK_FALSE(std::filesystem::exists(dir / "a.dcvk.tmp"));
  CHECK_THROWS_AS(read_archive(dir / "missing.dcvk"), ArchiveError);
}
