// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <optional>

#include "sinflow/checkpoint.hpp"

namespace sinflow::cli {

inline constexpr double kDefaultTol = 1e-6;
inline constexpr std::size_t kDefaultMaxIter = 100;

struct TrainOutputs {
  std::string best_path;
  std::string final_path;
  std::string history_path;
  double best_val_nll = 0.0;
  NllSummary test_std;
  NllSummary test_raw;
};

/// Trains per config; writes best/final checkpoints and the history CSV into
/// config.out_dir, prints final validation and test NLL.
TrainOutputs cmd_train(const RunConfig& config, std::ostream& out);

struct EvalReport {
  NllSummary standardized;
  NllSummary raw;
};

/// NLL of a checkpoint on its config-derived test split, or on an explicit
/// CSV; reports both standardized and raw nats.
EvalReport cmd_eval(const std::string& checkpoint_path, const std::optional<std::string>& csv_path,
                    bool csv_has_header, std::ostream& out);

/// Draws n samples (raw coordinates) to out_dir/samples.csv and prints
/// per-layer inversion diagnostics.
std::string cmd_sample(const std::string& checkpoint_path, std::size_t n, std::uint64_t seed,
                       double tol, std::size_t max_iter, const std::string& out_dir,
                       std::ostream& out);

/// Raw-coordinate log-density grid (resolution^2 rows for 2D models, a curve
/// for 1D) written to out_dir/grid.csv.
std::string cmd_density_grid(const std::string& checkpoint_path, const std::vector<double>& bounds,
                             std::size_t resolution, const std::string& out_dir, std::ostream& out);

/// Reconstruction error sweep over iteration caps; writes out_dir/recon.csv
/// and returns the per-cap mean l2 errors.
struct ReconReport {
  std::vector<std::size_t> caps;
  std::vector<double> errors;
  double frac_converged_70 = 1.0;  // at the largest cap
  std::string csv_path;
};
ReconReport cmd_recon_analysis(const std::string& checkpoint_path,
                               const std::optional<std::string>& csv_path, bool csv_has_header,
                               const std::vector<std::size_t>& iteration_caps, double tol,
                               std::size_t row_limit, const std::string& out_dir,
                               std::ostream& out);

/// %.17g formatting: enough digits to round-trip any double.
std::string format_double(double v);

}  // namespace sinflow::cli
