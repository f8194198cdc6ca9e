// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: train, eval, sample, density-grid, recon-analysis.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sinflow/commands.hpp"
#include "sinflow/errors.hpp"

namespace {

std::vector<double> parse_bounds(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    out.push_back(std::stod(text.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return out;
}

std::vector<std::size_t> parse_caps(const std::string& text) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    out.push_back(static_cast<std::size_t>(std::stoul(text.substr(pos, comma - pos))));
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sinusoidal Flow density estimation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string checkpoint_path;
  std::string out_dir = ".";
  std::string data_csv;
  bool has_header = false;
  std::uint64_t seed = 0;
  double tol = sinflow::cli::kDefaultTol;
  std::size_t max_iter = sinflow::cli::kDefaultMaxIter;

  auto* train = app.add_subcommand("train", "Train a flow from a JSON config");
  train->add_option("--config", config_path, "Run configuration (JSON)")->required();
  auto* train_out =
      train->add_option("--out", out_dir, "Override the config's output directory");
  auto* train_seed = train->add_option("--seed", seed, "Override the config's seed");

  auto* eval = app.add_subcommand("eval", "Report NLL of a checkpoint");
  eval->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  eval->add_option("--data", data_csv, "Evaluate this CSV instead of the config's test split");
  eval->add_flag("--has-header", has_header, "CSV has a header row");

  auto* sample = app.add_subcommand("sample", "Draw samples by inverting the flow");
  sample->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  std::size_t n = 10000;
  sample->add_option("--n", n, "Number of samples")->capture_default_str();
  sample->add_option("--seed", seed, "Sampling seed")->capture_default_str();
  sample->add_option("--tol", tol, "Fixed-point stopping tolerance")->capture_default_str();
  sample->add_option("--max-iter", max_iter, "Fixed-point iteration cap")->capture_default_str();
  sample->add_option("--out", out_dir, "Output directory")->capture_default_str();

  auto* grid = app.add_subcommand("density-grid", "Export a raw-coordinate log-density grid");
  grid->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  std::string bounds = "-4,4";
  std::size_t resolution = 200;
  grid->add_option("--bounds", bounds, "lo,hi or xlo,xhi,ylo,yhi (raw coordinates)")->capture_default_str();
  grid->add_option("--resolution", resolution, "Grid points per axis")->capture_default_str();
  grid->add_option("--out", out_dir, "Output directory")->capture_default_str();

  auto* recon = app.add_subcommand("recon-analysis", "Reconstruction error vs iteration cap");
  recon->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  std::string caps = "1,2,5,10,20,50,100";
  std::size_t limit = 1024;
  recon->add_option("--iters", caps, "Ascending iteration caps")->capture_default_str();
  recon->add_option("--data", data_csv, "Reconstruct this CSV instead of the test split");
  recon->add_flag("--has-header", has_header, "CSV has a header row");
  recon->add_option("--tol", tol, "Fixed-point stopping tolerance")->capture_default_str();
  recon->add_option("--limit", limit, "Maximum rows to reconstruct")->capture_default_str();
  recon->add_option("--out", out_dir, "Output directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      sinflow::RunConfig cfg = sinflow::load_run_config(config_path);
      if (train_out->count()) cfg.out_dir = out_dir;
      if (train_seed->count()) {
        cfg.seed = seed;
        cfg.train.seed = seed;
      }
      sinflow::cli::cmd_train(cfg, std::cout);
    } else if (eval->parsed()) {
      const std::optional<std::string> csv =
          data_csv.empty() ? std::nullopt : std::optional<std::string>(data_csv);
      sinflow::cli::cmd_eval(checkpoint_path, csv, has_header, std::cout);
    } else if (sample->parsed()) {
      sinflow::cli::cmd_sample(checkpoint_path, n, seed, tol, max_iter, out_dir, std::cout);
    } else if (grid->parsed()) {
      sinflow::cli::cmd_density_grid(checkpoint_path, parse_bounds(bounds), resolution, out_dir,
                                     std::cout);
    } else if (recon->parsed()) {
      const std::optional<std::string> csv =
          data_csv.empty() ? std::nullopt : std::optional<std::string>(data_csv);
      sinflow::cli::cmd_recon_analysis(checkpoint_path, csv, has_header, parse_caps(caps), tol,
                                       limit, out_dir, std::cout);
    }
  } catch (const sinflow::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const sinflow::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const sinflow::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
