#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "semtag_cli/commands.hpp"

namespace {

using semtag::GlrmConfig;

const std::map<std::string, bool> kOnOff{{"on", true}, {"off", false}};

void add_fit_flags(CLI::App& cmd, GlrmConfig& cfg) {
  cmd.add_option("-k,--rank", cfg.k, "Number of topics")->check(CLI::PositiveNumber);
  cmd.add_option("--lambda", cfg.lambda, "L1 weight on X and Y")->capture_default_str();
  cmd.add_option("--subsample-c", cfg.subsample_c, "N = C k(m+n-k) draws; 0 uses all observed entries")
      ->capture_default_str();
  cmd.add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  cmd.add_option("--noise-high", cfg.noise_high, "Upper end of the warm-start noise on X")->capture_default_str();
  cmd.add_option("--impute", cfg.impute_fill, "Fill for missing tags before the SVD")->capture_default_str();
  cmd.add_option("--max-sweeps", cfg.max_sweeps, "Sweep limit")->capture_default_str();
  cmd.add_option("--tol", cfg.rel_tol, "Relative objective change that stops the fit")->capture_default_str();
  cmd.add_option("--anchor", cfg.anchor, "Pin each topic to its tag (on|off)")
      ->transform(CLI::CheckedTransformer(kOnOff, CLI::ignore_case))
      ->default_str("on");
  cmd.add_option("--nonneg-y", cfg.nonneg_y, "Clamp Y at zero (on|off)")
      ->transform(CLI::CheckedTransformer(kOnOff, CLI::ignore_case))
      ->default_str("off");
  cmd.add_option("--nonneg-x", cfg.nonneg_x, "Clamp X at zero (on|off); unstable")
      ->transform(CLI::CheckedTransformer(kOnOff, CLI::ignore_case))
      ->default_str("off");
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = semtag::cli;
  CLI::App app{"Semantic tagging of dataset catalogs with anchored topic models"};
  app.set_version_flag("--version", cli::kToolVersion);
  app.require_subcommand(1);

  cli::IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Encode a JSON Lines catalog as a ternary matrix");
  ingest_cmd->add_option("catalog", ingest.catalog, "Catalog (.jsonl)")->required();
  ingest_cmd->add_option("-o,--out", ingest.out_prefix, "Output prefix")->required();

  cli::FitArgs fit;
  std::string manifest;
  auto* fit_cmd = app.add_subcommand("fit", "Fit the topic model to a matrix");
  fit_cmd->add_option("matrix", fit.matrix, "Matrix written by ingest");
  fit_cmd->add_option("-o,--out", fit.out_dir, "Output directory")->required();
  fit_cmd->add_option("--extra-tags", fit.extra_tags, "Hypothetical all-missing tag columns to add")
      ->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--manifest", manifest, "Rerun the fit recorded in a run.json")->check(CLI::ExistingFile);
  add_fit_flags(*fit_cmd, fit.config);

  cli::PredictArgs predict;
  std::string target = "tags";
  std::string predict_matrix;
  auto* predict_cmd = app.add_subcommand("predict", "Write presence probabilities and flag disagreements");
  predict_cmd->add_option("model", predict.model_dir, "Directory written by fit")->required();
  predict_cmd->add_option("-o,--out", predict.out, "Probability CSV")->required();
  predict_cmd->add_option("--target", target, "tags|features")
      ->check(CLI::IsMember({"tags", "features"}))
      ->capture_default_str();
  predict_cmd->add_option("--matrix", predict_matrix, "Matrix with the declared values (default: from run.json)");

  cli::StatsArgs stats;
  auto* stats_cmd = app.add_subcommand("stats", "Rank-frequency tables and power-law fits");
  stats_cmd->add_option("catalog", stats.catalog, "Catalog (.jsonl)")->required();
  stats_cmd->add_option("-o,--out-dir", stats.out_dir, "Output directory")->capture_default_str();

  cli::SweepArgs sweep;
  std::string sweep_matrix;
  auto* sweep_cmd = app.add_subcommand("sweep", "Final loss against subsample size");
  sweep_cmd->add_option("--matrix", sweep_matrix, "Fit this matrix instead of a planted one");
  sweep_cmd->add_option("--rows", sweep.rows, "Planted matrix rows")->capture_default_str();
  sweep_cmd->add_option("--cols", sweep.cols, "Planted matrix columns")->capture_default_str();
  sweep_cmd->add_option("--planted-rank", sweep.planted_rank, "Planted rank")->capture_default_str();
  sweep_cmd->add_option("--ranks", sweep.ranks, "Fit ranks")->delimiter(',');
  sweep_cmd->add_option("--c-values", sweep.c_values, "Multipliers of k(m+n-k); 0 means every entry")
      ->delimiter(',');
  sweep_cmd->add_option("--samples", sweep.sample_counts, "Absolute sample counts")->delimiter(',');
  sweep_cmd->add_option("--seeds", sweep.seeds, "Replicates per cell")->capture_default_str();
  sweep_cmd->add_option("--base-seed", sweep.base_seed, "Seed for the planted matrix and cell seeds")
      ->capture_default_str();
  sweep_cmd->add_option("-o,--out", sweep.out, "Output CSV")->capture_default_str();
  sweep.config.anchor = false;
  sweep.config.lambda = 0.0;
  add_fit_flags(*sweep_cmd, sweep.config);

  cli::ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Topic report and monosemy profile");
  report_cmd->add_option("model", report.model_dir, "Directory written by fit")->required();
  report_cmd->add_option("--topic", report.topic, "Tag name or topic index")->required();
  report_cmd->add_flag("--json", report.json, "Emit JSON instead of text");
  report_cmd->add_option("--threshold", report.monosemy_threshold, "Monosemy threshold on |Y_t|")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  if (*ingest_cmd) return cli::cmd_ingest(ingest, std::cout, std::cerr);
  if (*fit_cmd) {
    if (!manifest.empty()) {
      try {
        auto rerun = cli::fit_args_from_manifest(manifest);
        if (!fit.out_dir.empty()) rerun.out_dir = fit.out_dir;
        return cli::cmd_fit(rerun, std::cout, std::cerr);
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
      }
    }
    if (fit.matrix.empty()) {
      std::cerr << "error: fit needs a matrix or --manifest\n";
      return 1;
    }
    return cli::cmd_fit(fit, std::cout, std::cerr);
  }
  if (*predict_cmd) {
    predict.target = target == "features" ? cli::Target::Features : cli::Target::Tags;
    if (!predict_matrix.empty()) predict.matrix = predict_matrix;
    return cli::cmd_predict(predict, std::cout, std::cerr);
  }
  if (*stats_cmd) return cli::cmd_stats(stats, std::cout, std::cerr);
  if (*sweep_cmd) {
    if (!sweep_matrix.empty()) sweep.matrix = sweep_matrix;
    return cli::cmd_sweep(sweep, std::cout, std::cerr);
  }
  if (*report_cmd) return cli::cmd_report(report, std::cout, std::cerr);
  return 1;
}
