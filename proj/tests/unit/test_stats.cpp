#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "saml/error.hpp"
#include "saml/json_io.hpp"
#include "saml/provenance.hpp"
#include "saml/rng.hpp"
#include "saml/stats.hpp"

using namespace saml;

TEST_CASE("quantiles match the sorted-order reference") {
  Pcg32 rng(1);
  for (int n : {1, 2, 3, 10, 57}) {
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(rng.uniform(-5, 5));
    for (double q : {0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0})
      CHECK(quantile(v, q) == doctest::Approx(saml::testing::sorted_quantile(v, q)).epsilon(1e-14));
  }
  CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
  CHECK(quantile({1, 2, 3, 4}, 0.25) == 1.75);
  CHECK_THROWS(quantile({}, 0.5));
}

TEST_CASE("summary statistics") {
  const std::vector<double> v{4, 1, 3, 2, 5};
  const Summary s = summarize(v);
  CHECK(s.count == 5);
  CHECK(s.mean == 3.0);
  CHECK(s.std == doctest::Approx(std::sqrt(2.5)));
  CHECK(s.min == 1.0);
  CHECK(s.max == 5.0);
  CHECK(s.median == 3.0);
  CHECK(s.q1 == 2.0);
  CHECK(s.q3 == 4.0);
}

TEST_CASE("bootstrap interval brackets the mean and is reproducible") {
  Pcg32 rng(2);
  std::vector<double> v;
  for (int i = 0; i < 200; ++i) v.push_back(1.0 + rng.normal());
  const BootstrapInterval a = bootstrap_mean(v, 2000, 0.95, 9);
  const BootstrapInterval b = bootstrap_mean(v, 2000, 0.95, 9);
  CHECK(a.estimate == summarize(v).mean);
  CHECK(a.lower < a.estimate);
  CHECK(a.estimate < a.upper);
  CHECK(a.lower == b.lower);
  CHECK(a.upper == b.upper);
  // normal-theory half width 1.96 s / sqrt(n)
  const double half = 1.96 * summarize(v).std / std::sqrt(200.0);
  CHECK((a.upper - a.lower) / 2.0 == doctest::Approx(half).epsilon(0.15));
  const std::vector<double> constant(30, 0.25);
  const BootstrapInterval c = bootstrap_mean(constant, 100, 0.95, 1);
  CHECK(c.lower == 0.25);
  CHECK(c.upper == 0.25);
}

TEST_CASE("bootstrap coverage of a known mean") {
  Pcg32 rng(3);
  int covered = 0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    std::vector<double> v;
    for (int i = 0; i < 100; ++i) v.push_back(rng.normal());
    const BootstrapInterval b = bootstrap_mean(v, 1000, 0.95, static_cast<std::uint64_t>(r));
    covered += b.lower <= 0.0 && 0.0 <= b.upper;
  }
  CHECK(covered >= 180);
}

TEST_CASE("git blob hashes") {
  CHECK(git_blob_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
  CHECK(git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  const auto dir = std::filesystem::temp_directory_path() / "saml_hash_tree";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir / "sub");
  write_text_file(dir / "a.txt", "hello\n");
  write_text_file(dir / "sub" / "b.txt", "");
  write_text_file(dir / "manifest.json", "{}");
  const nlohmann::json tree = hash_tree(dir, {"manifest.json"});
  CHECK(tree.size() == 2);
  CHECK(tree.at("a.txt") == "ce013625030ba8dba906f756967f9e9ca394464a");
  CHECK(tree.at("sub/b.txt") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(git_blob_hash_file(dir / "a.txt") == git_blob_hash("hello\n"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("random streams are fixed") {
  Pcg32 a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u32();
    CHECK(x == b.next_u32());
    (void)c.next_u32();
  }
  CHECK(Pcg32(42).next_u64() != Pcg32(43).next_u64());
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
  Pcg32 r(5);
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / 1e5) < 0.02);
  CHECK(std::abs(sq / 1e5 - 1.0) < 0.02);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform(-2.0, 3.0);
    REQUIRE(u >= -2.0);
    REQUIRE(u < 3.0);
    REQUIRE(r.below(7) < 7);
  }
}

TEST_CASE("doubles survive a text round trip") {
  Pcg32 r(6);
  for (int i = 0; i < 1000; ++i) {
    const double x = (r.uniform() - 0.5) * std::pow(10.0, r.uniform(-20, 20));
    REQUIRE(std::stod(format_double(x)) == x);
  }
}
