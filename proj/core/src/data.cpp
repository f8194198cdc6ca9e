// SPDX-License-Identifier: Apache-2.0
#include "sinflow/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "sinflow/errors.hpp"
#include "sinflow/flow.hpp"
#include "sinflow/rng.hpp"

namespace sinflow {

double MixtureSpec::logpdf(double x) const {
  // log of mean_j N(x | mu_j, sigma^2) via log-sum-exp
  const double log_norm = -0.5 * std::log(2.0 * M_PI * stddev * stddev);
  double mx = -INFINITY;
  std::vector<double> terms(means.size());
  for (std::size_t j = 0; j < means.size(); ++j) {
    const double u = (x - means[j]) / stddev;
    terms[j] = log_norm - 0.5 * u * u;
    mx = std::max(mx, terms[j]);
  }
  double s = 0.0;
  for (double t : terms) s += std::exp(t - mx);
  return mx + std::log(s) - std::log(static_cast<double>(means.size()));
}

ToyName toy_name_from_string(const std::string& name) {
  if (name == "checkerboard") return ToyName::kCheckerboard;
  if (name == "rings") return ToyName::kRings;
  if (name == "two_moons") return ToyName::kTwoMoons;
  if (name == "eight_gaussians") return ToyName::kEightGaussians;
  if (name == "two_spirals") return ToyName::kTwoSpirals;
  throw ConfigError("unknown toy dataset '" + name +
                    "' (valid: checkerboard, rings, two_moons, eight_gaussians, two_spirals)");
}

std::string to_string(ToyName name) {
  switch (name) {
    case ToyName::kCheckerboard: return "checkerboard";
    case ToyName::kRings: return "rings";
    case ToyName::kTwoMoons: return "two_moons";
    case ToyName::kEightGaussians: return "eight_gaussians";
    case ToyName::kTwoSpirals: return "two_spirals";
  }
  return "?";
}

namespace toy {

bool checkerboard_cell_is_black(int ci, int cj) { return (ci + cj) % 2 == 0; }

bool in_checkerboard_support(double x, double y) {
  if (std::abs(x) > kCheckerHalfWidth || std::abs(y) > kCheckerHalfWidth) return false;
  const int ci = std::min(3, static_cast<int>((x + kCheckerHalfWidth) / 2.0));
  const int cj = std::min(3, static_cast<int>((y + kCheckerHalfWidth) / 2.0));
  return checkerboard_cell_is_black(ci, cj);
}

bool in_rings_support(double x, double y, double margin_sigmas) {
  const double r = std::hypot(x, y);
  const double m = margin_sigmas * kRingSigma;
  return (r >= kRingInnerRadius - m && r <= kRingInnerRadius + m) ||
         (r >= kRingOuterRadius - m && r <= kRingOuterRadius + m);
}

}  // namespace toy

namespace {

// Gaussian draw truncated to +-3 sigma by rejection; keeps the ring samples
// inside the annuli by construction.
double truncated_normal(CounterRng& rng, double sigma) {
  for (;;) {
    const double v = rng.normal();
    if (std::abs(v) <= 3.0) return v * sigma;
  }
}

void gen_row(ToyName name, CounterRng& rng, double* out) {
  switch (name) {
    case ToyName::kCheckerboard: {
      // 8 black cells of the 4x4 tiling of [-4,4]^2
      for (;;) {
        const int ci = static_cast<int>(rng.below(4));
        const int cj = static_cast<int>(rng.below(4));
        if (!toy::checkerboard_cell_is_black(ci, cj)) continue;
        out[0] = -toy::kCheckerHalfWidth + 2.0 * ci + rng.uniform(0.0, 2.0);
        out[1] = -toy::kCheckerHalfWidth + 2.0 * cj + rng.uniform(0.0, 2.0);
        return;
      }
    }
    case ToyName::kRings: {
      const double radius =
          rng.below(2) == 0 ? toy::kRingInnerRadius : toy::kRingOuterRadius;
      const double theta = rng.uniform(0.0, 2.0 * M_PI);
      const double r = radius + truncated_normal(rng, toy::kRingSigma);
      out[0] = r * std::cos(theta);
      out[1] = r * std::sin(theta);
      return;
    }
    case ToyName::kTwoMoons: {
      const double t = rng.uniform(0.0, M_PI);
      if (rng.below(2) == 0) {
        out[0] = std::cos(t);
        out[1] = std::sin(t);
      } else {
        out[0] = 1.0 - std::cos(t);
        out[1] = 0.5 - std::sin(t);
      }
      out[0] += rng.normal() * toy::kMoonSigma;
      out[1] += rng.normal() * toy::kMoonSigma;
      return;
    }
    case ToyName::kEightGaussians: {
      const double angle = 2.0 * M_PI * static_cast<double>(rng.below(8)) / 8.0;
      out[0] = toy::kEightGaussRadius * std::cos(angle) + rng.normal() * toy::kEightGaussSigma;
      out[1] = toy::kEightGaussRadius * std::sin(angle) + rng.normal() * toy::kEightGaussSigma;
      return;
    }
    case ToyName::kTwoSpirals: {
      // Archimedean pair over 540 degrees, mirrored through the origin
      const double t = 3.0 * M_PI * std::sqrt(rng.uniform());
      const double sign = rng.below(2) == 0 ? 1.0 : -1.0;
      out[0] = sign * (-std::cos(t) * t) / 3.0 + rng.normal() * toy::kSpiralSigma;
      out[1] = sign * (std::sin(t) * t) / 3.0 + rng.normal() * toy::kSpiralSigma;
      return;
    }
  }
}

}  // namespace

Dataset gen_toy2d(ToyName name, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("gen_toy2d: n must be >= 1");
  Dataset ds;
  ds.samples = Tensor({n, 2});
  for (std::size_t r = 0; r < n; ++r) {
    CounterRng rng(seed, stream_id(streams::kData, r));
    gen_row(name, rng, ds.samples.data() + 2 * r);
  }
  ds.provenance = "toy2d:" + to_string(name);
  return ds;
}

Dataset gen_toy2d(const std::string& name, std::size_t n, std::uint64_t seed) {
  return gen_toy2d(toy_name_from_string(name), n, seed);
}

Dataset gen_mixture1d(const MixtureSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("gen_mixture1d: n must be >= 1");
  if (spec.means.empty() || !(spec.stddev > 0.0)) {
    throw ConfigError("gen_mixture1d: need >= 1 component and positive std");
  }
  Dataset ds;
  ds.samples = Tensor({n, 1});
  for (std::size_t r = 0; r < n; ++r) {
    CounterRng rng(seed, stream_id(streams::kData, r));
    const std::size_t j = static_cast<std::size_t>(rng.below(spec.means.size()));
    ds.samples[r] = spec.means[j] + spec.stddev * rng.normal();
  }
  ds.logpdf = [spec](const double* x, std::size_t) { return spec.logpdf(x[0]); };
  ds.provenance = "mixture1d";
  return ds;
}

Dataset load_csv(const std::string& path, bool has_header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("csv: cannot open '" + path + "'");

  Dataset ds;
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, lineno = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (has_header && lineno == 1) continue;
    if (line.empty()) continue;

    std::size_t col = 0, pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = std::min(line.find(',', pos), line.size());
      ++col;
      const char* first = line.data() + pos;
      const char* last = line.data() + comma;
      while (first < last && (*first == ' ' || *first == '\t')) ++first;
      while (last > first && (last[-1] == ' ' || last[-1] == '\t')) --last;
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last || first == last) {
        throw DataError("csv: line " + std::to_string(lineno) + ", column " + std::to_string(col) +
                        ": cannot parse '" + std::string(line.data() + pos, line.data() + comma) +
                        "' as a number");
      }
      values.push_back(v);
      pos = comma + 1;
    }
    if (cols == 0) {
      cols = col;
    } else if (col != cols) {
      throw DataError("csv: line " + std::to_string(lineno) + " has " + std::to_string(col) +
                      " fields, expected " + std::to_string(cols));
    }
    ++rows;
  }
  if (rows == 0 || cols == 0) throw DataError("csv: '" + path + "' contains no data rows");
  ds.samples = Tensor({rows, cols}, std::move(values));
  if (!ds.samples.all_finite()) throw DataError("csv: '" + path + "' contains non-finite values");
  ds.provenance = "csv:" + path;
  return ds;
}

DataSplits split(const Dataset& data, double train_frac, double val_frac, double test_frac,
                 std::uint64_t seed) {
  if (!(train_frac > 0.0) || !(val_frac > 0.0) || !(test_frac > 0.0)) {
    throw ConfigError("split: fractions must be positive");
  }
  if (train_frac + val_frac + test_frac > 1.0 + 1e-12) {
    throw ConfigError("split: fractions must sum to at most 1");
  }
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  const std::size_t n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * val_frac));
  const std::size_t n_test =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * test_frac));
  if (n_val + n_test >= n) throw ConfigError("split: not enough rows for the requested fractions");
  const std::size_t n_train = n - n_val - n_test;  // remainder goes to train
  if (n_train == 0 || n_val == 0 || n_test == 0) {
    throw ConfigError("split: a split would be empty (n=" + std::to_string(n) + ")");
  }

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  CounterRng rng(seed, stream_id(streams::kSplit, 0));
  rng.shuffle(idx);

  const auto take = [&](std::size_t from, std::size_t count) {
    Dataset part;
    part.samples = Tensor({count, d});
    for (std::size_t r = 0; r < count; ++r) {
      const double* src = data.samples.data() + idx[from + r] * d;
      std::copy(src, src + d, part.samples.data() + r * d);
    }
    part.logpdf = data.logpdf;
    part.provenance = data.provenance;
    return part;
  };

  DataSplits out;
  out.train = take(0, n_train);
  out.val = take(n_train, n_val);
  out.test = take(n_train + n_val, n_test);
  return out;
}

std::pair<Standardizer, Dataset> standardize_fit_apply(const Dataset& train) {
  Standardizer st = Standardizer::fit(train.samples);
  Dataset out;
  out.samples = st.apply(train.samples);
  out.logpdf = nullptr;  // densities no longer match raw-space oracle
  out.provenance = train.provenance + ":standardized";
  return {std::move(st), std::move(out)};
}

}  // namespace sinflow
