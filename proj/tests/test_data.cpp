// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "sinflow/data.hpp"
#include "sinflow/errors.hpp"
#include "support/oracles.hpp"

using namespace sinflow;

TEST_SUITE_BEGIN("data");

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const auto path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("rings samples stay inside the annuli by construction") {
  const Dataset ds = gen_toy2d(ToyName::kRings, 20000, 5);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    CHECK(toy::in_rings_support(ds.samples.at(r, 0), ds.samples.at(r, 1)));
  }
}

TEST_CASE("checkerboard samples never land in white cells") {
  const Dataset ds = gen_toy2d(ToyName::kCheckerboard, 100000, 6);
  std::size_t outside = 0;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    if (!toy::in_checkerboard_support(ds.samples.at(r, 0), ds.samples.at(r, 1))) ++outside;
  }
  CHECK(static_cast<double>(outside) / static_cast<double>(ds.size()) < 0.001);
}

TEST_CASE("eight gaussians center at the origin within the CLT bound") {
  const std::size_t n = 100000;
  const Dataset ds = gen_toy2d(ToyName::kEightGaussians, n, 7);
  double mx = 0.0, my = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    mx += ds.samples.at(r, 0);
    my += ds.samples.at(r, 1);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  // per-coordinate sigma^2 = r^2/2 + noise^2
  const double sigma = std::sqrt(toy::kEightGaussRadius * toy::kEightGaussRadius / 2.0 +
                                 toy::kEightGaussSigma * toy::kEightGaussSigma);
  const double bound = 3.0 * sigma / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(mx) < bound);
  CHECK(std::abs(my) < bound);
}

TEST_CASE("all generators are pure functions of (name, n, seed)") {
  for (const ToyName name : {ToyName::kCheckerboard, ToyName::kRings, ToyName::kTwoMoons,
                             ToyName::kEightGaussians, ToyName::kTwoSpirals}) {
    const Dataset a = gen_toy2d(name, 512, 11);
    const Dataset b = gen_toy2d(name, 512, 11);
    CHECK(std::memcmp(a.samples.data(), b.samples.data(), sizeof(double) * a.samples.size()) == 0);
    CHECK(a.samples.all_finite());
    // longer runs extend shorter ones (per-sample streams)
    const Dataset longer = gen_toy2d(name, 1024, 11);
    CHECK(std::memcmp(a.samples.data(), longer.samples.data(),
                      sizeof(double) * a.samples.size()) == 0);
  }
  CHECK_THROWS_AS(gen_toy2d("nonsense", 10, 0), ConfigError);
}

TEST_CASE("mixture1d log-density") {
  SUBCASE("single standard component at the origin") {
    MixtureSpec spec;
    spec.means = {0.0};
    spec.stddev = 1.0;
    CHECK(spec.logpdf(0.0) == doctest::Approx(-0.5 * std::log(2.0 * M_PI)).epsilon(1e-15));
  }

  SUBCASE("far-apart component dominates, against direct summation") {
    const MixtureSpec spec;  // seven components, means -9..9, sigma 0.5
    const double x = 9.0;
    // the nearest other component sits 6 sigma away and contributes ~1.5e-8
    const double expected = std::log(1.0 / 7.0) -
                            0.5 * std::log(2.0 * M_PI * spec.stddev * spec.stddev);
    CHECK(spec.logpdf(x) == doctest::Approx(expected).epsilon(1e-7));

    double direct = 0.0;
    for (double mu : spec.means) {
      const double u = (x - mu) / spec.stddev;
      direct += std::exp(-0.5 * u * u) / (7.0 * spec.stddev * std::sqrt(2.0 * M_PI));
    }
    CHECK(spec.logpdf(x) == doctest::Approx(std::log(direct)).epsilon(1e-12));
  }

  SUBCASE("log-sum-exp stays finite far into the tails") {
    const MixtureSpec spec;
    CHECK(std::isfinite(spec.logpdf(1e6 * spec.stddev)));
    CHECK(std::isfinite(spec.logpdf(-1e6 * spec.stddev)));
    CHECK(spec.logpdf(1e6) < -1e9);
  }

  SUBCASE("Monte-Carlo entropy is reproducible across seeds within 0.003 nats") {
    const MixtureSpec spec;
    const auto entropy = [&](std::uint64_t seed) {
      const Dataset ds = gen_mixture1d(spec, 1000000, seed);
      double s = 0.0;
      for (std::size_t r = 0; r < ds.size(); ++r) s -= spec.logpdf(ds.samples[r]);
      return s / static_cast<double>(ds.size());
    };
    const double h1 = entropy(101);
    const double h2 = entropy(202);
    CHECK(std::abs(h1 - h2) < 0.003);
  }
}

TEST_CASE("csv loading") {
  SUBCASE("plain 2x2 matrix") {
    const auto path = write_temp("sf_ok.csv", "1.0,2.0\n3.0,4.0\n");
    const Dataset ds = load_csv(path, false);
    CHECK(ds.size() == 2);
    CHECK(ds.dim() == 2);
    CHECK(ds.samples.at(1, 1) == 4.0);
  }

  SUBCASE("header skipping and CRLF endings") {
    const auto path = write_temp("sf_hdr.csv", "x,y\r\n1.5,2.5\r\n-3.0,0.25\r\n");
    const Dataset ds = load_csv(path, true);
    CHECK(ds.size() == 2);
    CHECK(ds.samples.at(0, 0) == 1.5);
    CHECK(ds.samples.at(1, 1) == 0.25);
  }

  SUBCASE("parse failure names line and column") {
    const auto path = write_temp("sf_bad.csv", "1.0,x\n");
    CHECK_THROWS_WITH_AS(load_csv(path, false),
                         "csv: line 1, column 2: cannot parse 'x' as a number", DataError);
  }

  SUBCASE("ragged rows name the offending line") {
    const auto path = write_temp("sf_ragged.csv", "1,2\n3,4,5\n");
    CHECK_THROWS_WITH_AS(load_csv(path, false), "csv: line 2 has 3 fields, expected 2", DataError);
  }

  SUBCASE("empty files are rejected") {
    const auto path = write_temp("sf_empty.csv", "");
    CHECK_THROWS_AS(load_csv(path, false), DataError);
    const auto hdr_only = write_temp("sf_hdr_only.csv", "x,y\n");
    CHECK_THROWS_AS(load_csv(hdr_only, true), DataError);
  }
}

TEST_CASE("standardizer") {
  SUBCASE("population convention on the {0, 2} column") {
    const Tensor data({2, 1}, {0.0, 2.0});
    const Standardizer st = Standardizer::fit(data);
    CHECK(st.mean()[0] == 1.0);
    CHECK(st.stddev()[0] == 1.0);
    const Tensor z = st.apply(data);
    CHECK(z[0] == -1.0);
    CHECK(z[1] == 1.0);
  }

  SUBCASE("apply then invert is the identity within 1e-12") {
    CounterRng rng(31, 0);
    Tensor data({64, 3});
    oracles::fill_normal(data, rng, 5.0);
    for (std::size_t r = 0; r < 64; ++r) data.at(r, 1) = data.at(r, 1) * 0.01 + 100.0;
    const Standardizer st = Standardizer::fit(data);
    const Tensor round = st.invert(st.apply(data));
    for (std::size_t i = 0; i < data.size(); ++i) {
      CHECK(std::abs(round[i] - data[i]) < 1e-12 * std::max(1.0, std::abs(data[i])));
    }
    // standardized columns have mean ~0 and std ~1
    const Tensor z = st.apply(data);
    for (std::size_t j = 0; j < 3; ++j) {
      double m = 0.0, s = 0.0;
      for (std::size_t r = 0; r < 64; ++r) m += z.at(r, j);
      m /= 64.0;
      for (std::size_t r = 0; r < 64; ++r) s += (z.at(r, j) - m) * (z.at(r, j) - m);
      s = std::sqrt(s / 64.0);
      CHECK(std::abs(m) < 1e-10);
      CHECK(std::abs(s - 1.0) < 1e-10);
    }
  }

  SUBCASE("constant columns are rejected by index") {
    const Tensor data({3, 2}, {1.0, 7.0, 2.0, 7.0, 3.0, 7.0});
    CHECK_THROWS_WITH_AS(Standardizer::fit(data), "standardizer: column 1 is constant", DataError);
  }

  SUBCASE("log-det correction against a hand-computed change of variables") {
    // densities: p_raw(x) = p_std(u) / prod sigma, so NLL_raw - NLL_std = sum log sigma
    const Standardizer st({1.0, -2.0}, {2.0, 0.25});
    CHECK(st.log_sigma_sum() == doctest::Approx(std::log(2.0) + std::log(0.25)).epsilon(1e-15));
  }
}

TEST_CASE("splitting") {
  Dataset ds;
  ds.samples = Tensor({10, 1}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9});

  SUBCASE("floor sizes 8/1/1 for n = 10") {
    const DataSplits s = split(ds, 0.8, 0.1, 0.1, 3);
    CHECK(s.train.size() == 8);
    CHECK(s.val.size() == 1);
    CHECK(s.test.size() == 1);
  }

  SUBCASE("same seed gives identical splits, union preserves the multiset") {
    const DataSplits a = split(ds, 0.8, 0.1, 0.1, 4);
    const DataSplits b = split(ds, 0.8, 0.1, 0.1, 4);
    CHECK(std::memcmp(a.train.samples.data(), b.train.samples.data(), 8 * sizeof(double)) == 0);
    CHECK(a.val.samples[0] == b.val.samples[0]);
    CHECK(a.test.samples[0] == b.test.samples[0]);

    std::vector<double> all;
    for (std::size_t i = 0; i < 8; ++i) all.push_back(a.train.samples[i]);
    all.push_back(a.val.samples[0]);
    all.push_back(a.test.samples[0]);
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < 10; ++i) CHECK(all[i] == static_cast<double>(i));
  }

  SUBCASE("degenerate requests are rejected") {
    CHECK_THROWS_AS(split(ds, 0.8, 0.1, 0.0, 0), ConfigError);   // non-positive fraction
    CHECK_THROWS_AS(split(ds, 0.9, 0.08, 0.08, 0), ConfigError); // sums above 1
    Dataset tiny;
    tiny.samples = Tensor({5, 1});
    CHECK_THROWS_AS(split(tiny, 0.8, 0.1, 0.1, 0), ConfigError); // empty val/test
  }
}

TEST_SUITE_END();
