// SPDX-License-Identifier: Apache-2.0
#include "sinflow/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <sstream>

#include "sinflow/errors.hpp"

namespace sinflow::cli {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::string history_csv(const std::vector<HistoryRow>& history) {
  std::string s = "step,train_loss,val_nll,lr\n";
  for (const HistoryRow& row : history) {
    s += std::to_string(row.step);
    s += ',';
    s += format_double(row.train_loss);
    s += ',';
    if (row.has_val) s += format_double(row.val_nll);
    s += ',';
    s += format_double(row.lr);
    s += '\n';
  }
  return s;
}

struct LoadedData {
  DataSplits splits;        // standardized
  Standardizer standardizer;
};

// Regenerates the config's dataset and reproduces the training-time split and
// standardizer. Keeping this deterministic is what lets eval/recon commands
// run from a checkpoint alone.
LoadedData prepare_data(const RunConfig& cfg) {
  Dataset raw = make_dataset(cfg.dataset, cfg.seed);
  DataSplits splits = split(raw, cfg.split.train, cfg.split.val, cfg.split.test, cfg.seed);
  LoadedData out;
  auto [st, train_std] = standardize_fit_apply(splits.train);
  out.standardizer = st;
  out.splits.train = std::move(train_std);
  out.splits.val.samples = st.apply(splits.val.samples);
  out.splits.test.samples = st.apply(splits.test.samples);
  return out;
}

NllSummary to_raw(const NllSummary& std_nll, const Standardizer& st) {
  NllSummary raw = std_nll;
  raw.mean += st.log_sigma_sum();
  return raw;
}

void print_nll(std::ostream& out, const char* label, const NllSummary& s) {
  out << label << ": " << s.mean << " +/- " << s.std_error << " nats (n=" << s.n << ")\n";
}

}  // namespace

TrainOutputs cmd_train(const RunConfig& config, std::ostream& out) {
  RunConfig cfg = config;
  cfg.validate();

  LoadedData data = prepare_data(cfg);
  cfg.model.dim = data.splits.train.dim();

  FlowModel model = FlowModel::build(cfg.model, cfg.seed);
  model.standardizer = data.standardizer;

  TrainResult result = train(model, data.splits, cfg.train);

  TrainOutputs outputs;
  const fs::path dir(cfg.out_dir);
  outputs.history_path = (dir / "history.csv").string();
  outputs.final_path = (dir / "final.ckpt.json").string();
  outputs.best_path = (dir / "best.ckpt.json").string();

  atomic_write(outputs.history_path, history_csv(result.history));

  if (result.status == TrainStatus::kAbortedNonFinite) {
    // parameters still hold the last state whose loss was finite
    checkpoint_save(make_checkpoint(cfg, model, result.abort_step, result.best_val_nll),
                    outputs.final_path);
    model.params().set_values(result.best_params);
    checkpoint_save(make_checkpoint(cfg, model, result.best_step, result.best_val_nll),
                    outputs.best_path);
    throw NumericError("training aborted: non-finite loss at step " +
                       std::to_string(result.abort_step) + " (last-good checkpoint written to " +
                       outputs.final_path + ")");
  }

  checkpoint_save(make_checkpoint(cfg, model, cfg.train.steps, result.best_val_nll),
                  outputs.final_path);
  model.params().set_values(result.best_params);
  checkpoint_save(make_checkpoint(cfg, model, result.best_step, result.best_val_nll),
                  outputs.best_path);

  outputs.best_val_nll = result.best_val_nll;
  outputs.test_std = eval_nll(model, data.splits.test.samples);
  outputs.test_raw = to_raw(outputs.test_std, data.standardizer);

  out << "trained " << cfg.train.steps << " steps; best val NLL " << result.best_val_nll
      << " nats at step " << result.best_step << "\n";
  print_nll(out, "test NLL (standardized)", outputs.test_std);
  print_nll(out, "test NLL (raw)", outputs.test_raw);
  out << "wrote " << outputs.best_path << ", " << outputs.final_path << ", "
      << outputs.history_path << "\n";
  return outputs;
}

EvalReport cmd_eval(const std::string& checkpoint_path, const std::optional<std::string>& csv_path,
                    bool csv_has_header, std::ostream& out) {
  const Checkpoint ckpt = checkpoint_load(checkpoint_path);
  const FlowModel model = model_from_checkpoint(ckpt);

  Tensor standardized;
  if (csv_path) {
    Dataset ds = load_csv(*csv_path, csv_has_header);
    if (ds.dim() != model.dim()) {
      throw DataError("eval: data has " + std::to_string(ds.dim()) + " columns, model expects " +
                      std::to_string(model.dim()));
    }
    standardized = model.standardizer->apply(ds.samples);
  } else {
    standardized = prepare_data(ckpt.config).splits.test.samples;
  }

  EvalReport report;
  report.standardized = eval_nll(model, standardized);
  report.raw = to_raw(report.standardized, *model.standardizer);
  print_nll(out, "NLL (standardized)", report.standardized);
  print_nll(out, "NLL (raw)", report.raw);
  return report;
}

namespace {

void print_inversion_stats(std::ostream& out, const ModelInversionStats& stats) {
  for (std::size_t b = 0; b < stats.blocks.size(); ++b) {
    const BlockStats& bs = stats.blocks[b];
    out << "block " << b << ": L mean iters " << bs.l_shift.mean_iterations() << " (fallbacks "
        << bs.l_shift.fallbacks << "), D mean iters " << bs.d_scale.mean_iterations()
        << ", U mean iters " << bs.u_shift.mean_iterations() << " (fallbacks "
        << bs.u_shift.fallbacks << ")\n";
  }
  const InversionStats total = stats.total();
  out << "inversions: " << total.calls << " calls, mean " << total.mean_iterations()
      << " iters, max " << total.max_iterations << ", sequential fallbacks " << stats.fallbacks()
      << "\n";
}

std::string samples_csv(const Tensor& samples) {
  std::string s;
  for (std::size_t r = 0; r < samples.extent(0); ++r) {
    for (std::size_t j = 0; j < samples.extent(1); ++j) {
      if (j) s += ',';
      s += format_double(samples.at(r, j));
    }
    s += '\n';
  }
  return s;
}

}  // namespace

std::string cmd_sample(const std::string& checkpoint_path, std::size_t n, std::uint64_t seed,
                       double tol, std::size_t max_iter, const std::string& out_dir,
                       std::ostream& out) {
  if (n < 1) throw ConfigError("sample: n must be >= 1");
  const Checkpoint ckpt = checkpoint_load(checkpoint_path);
  const FlowModel model = model_from_checkpoint(ckpt);

  ModelInversionStats stats;
  Tensor samples = model.sample(n, seed, tol, max_iter, &stats);
  samples = model.standardizer->invert(samples);

  const std::string path = (fs::path(out_dir) / "samples.csv").string();
  atomic_write(path, samples_csv(samples));
  out << "wrote " << n << " samples to " << path << "\n";
  print_inversion_stats(out, stats);
  return path;
}

std::string cmd_density_grid(const std::string& checkpoint_path, const std::vector<double>& bounds,
                             std::size_t resolution, const std::string& out_dir,
                             std::ostream& out) {
  const Checkpoint ckpt = checkpoint_load(checkpoint_path);
  const FlowModel model = model_from_checkpoint(ckpt);
  const std::size_t dim = model.dim();
  if (dim > 2) {
    throw ConfigError("density-grid: only 1D and 2D models are supported (marginal slices of a " +
                      std::to_string(dim) + "D model are not)");
  }
  if (resolution < 2) throw ConfigError("density-grid: resolution must be >= 2");
  if (bounds.size() != 2 && bounds.size() != 4) {
    throw ConfigError("density-grid: bounds must be 'lo,hi' or 'xlo,xhi,ylo,yhi'");
  }
  const double xlo = bounds[0], xhi = bounds[1];
  const double ylo = bounds.size() == 4 ? bounds[2] : bounds[0];
  const double yhi = bounds.size() == 4 ? bounds[3] : bounds[1];
  if (!(xhi > xlo) || (dim == 2 && !(yhi > ylo))) {
    throw ConfigError("density-grid: bounds must satisfy lo < hi");
  }

  const double correction = model.standardizer->log_sigma_sum();
  const auto grid_coord = [resolution](double lo, double hi, std::size_t i) {
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(resolution - 1);
  };

  std::string csv;
  if (dim == 1) {
    Tensor xs({resolution, 1});
    for (std::size_t i = 0; i < resolution; ++i) xs[i] = grid_coord(xlo, xhi, i);
    const Tensor lp = model.log_prob(model.standardizer->apply(xs));
    csv = "x,log_density\n";
    for (std::size_t i = 0; i < resolution; ++i) {
      csv += format_double(xs[i]) + "," + format_double(lp[i] - correction) + "\n";
    }
  } else {
    Tensor xs({resolution * resolution, 2});
    std::size_t r = 0;
    for (std::size_t iy = 0; iy < resolution; ++iy) {
      for (std::size_t ix = 0; ix < resolution; ++ix, ++r) {
        xs.at(r, 0) = grid_coord(xlo, xhi, ix);
        xs.at(r, 1) = grid_coord(ylo, yhi, iy);
      }
    }
    const Tensor lp = model.log_prob(model.standardizer->apply(xs));
    csv = "x,y,log_density\n";
    for (std::size_t i = 0; i < xs.extent(0); ++i) {
      csv += format_double(xs.at(i, 0)) + "," + format_double(xs.at(i, 1)) + "," +
             format_double(lp[i] - correction) + "\n";
    }
  }

  const std::string path = (fs::path(out_dir) / "grid.csv").string();
  atomic_write(path, csv);
  out << "wrote " << path << "\n";
  return path;
}

ReconReport cmd_recon_analysis(const std::string& checkpoint_path,
                               const std::optional<std::string>& csv_path, bool csv_has_header,
                               const std::vector<std::size_t>& iteration_caps, double tol,
                               std::size_t row_limit, const std::string& out_dir,
                               std::ostream& out) {
  if (iteration_caps.empty()) throw ConfigError("recon-analysis: iteration list must be nonempty");
  for (std::size_t i = 1; i < iteration_caps.size(); ++i) {
    if (iteration_caps[i] <= iteration_caps[i - 1]) {
      throw ConfigError("recon-analysis: iteration caps must be strictly ascending");
    }
  }
  if (iteration_caps.front() < 1) throw ConfigError("recon-analysis: caps must be >= 1");

  const Checkpoint ckpt = checkpoint_load(checkpoint_path);
  const FlowModel model = model_from_checkpoint(ckpt);

  Tensor standardized;
  if (csv_path) {
    Dataset ds = load_csv(*csv_path, csv_has_header);
    standardized = model.standardizer->apply(ds.samples);
  } else {
    standardized = prepare_data(ckpt.config).splits.test.samples;
  }
  const std::size_t rows = std::min(row_limit, standardized.extent(0));
  Tensor batch({rows, model.dim()});
  std::copy(standardized.data(), standardized.data() + rows * model.dim(), batch.data());

  ReconReport report;
  report.caps = iteration_caps;
  std::string csv = "max_iter,mean_l2_error\n";
  for (std::size_t cap : iteration_caps) {
    ModelInversionStats stats;
    const ReconResult rr = model.reconstruct(batch, cap, tol, &stats);
    report.errors.push_back(rr.l2_error);
    csv += std::to_string(cap) + "," + format_double(rr.l2_error) + "\n";
    if (cap == iteration_caps.back()) {
      report.frac_converged_70 = stats.total().frac_converged_within(70);
      out << "cap " << cap << ": mean l2 " << rr.l2_error << ", converged within 70 iters: "
          << 100.0 * report.frac_converged_70 << "% of layer inversions, fallbacks "
          << stats.fallbacks() << "\n";
    } else {
      out << "cap " << cap << ": mean l2 " << rr.l2_error << "\n";
    }
  }

  report.csv_path = (fs::path(out_dir) / "recon.csv").string();
  atomic_write(report.csv_path, csv);
  out << "wrote " << report.csv_path << "\n";
  return report;
}

}  // namespace sinflow::cli
