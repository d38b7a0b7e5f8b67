#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "semtag/glrm.hpp"
#include "semtag/ternary_matrix.hpp"

namespace semtag::cli {

inline constexpr const char* kToolVersion = "0.1.0";

struct IngestArgs {
  std::filesystem::path catalog;
  std::filesystem::path out_prefix;
};

/// Writes <prefix>.matrix, <prefix>.vocab.json and <prefix>.ids (one dataset id
/// per line). Returns the exit code; messages go to `out` and `err`.
int cmd_ingest(const IngestArgs& args, std::ostream& out, std::ostream& err);

struct FitArgs {
  std::filesystem::path matrix;
  std::filesystem::path out_dir;
  GlrmConfig config;
  /// Hypothetical tag columns appended before fitting.
  Index extra_tags = 0;
};

/// Writes <out_dir>/model.{X,Y_t,Y_f}.csv, model.model.json, run.json and
/// loss_trace.csv. Names come from the sibling .vocab.json/.ids when present.
int cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& err);

/// Rebuilds FitArgs from a run.json written by cmd_fit.
FitArgs fit_args_from_manifest(const std::filesystem::path& manifest);

enum class Target { Tags, Features };

struct PredictArgs {
  std::filesystem::path model_dir;
  std::filesystem::path out;
  Target target = Target::Tags;
  /// Defaults to the matrix recorded in run.json.
  std::optional<std::filesystem::path> matrix;
};

/// Probability CSV at `out`, plus `<out>.flags.csv` listing suspects
/// (declared present, p < 0.5) and candidates (not declared, p > 0.5).
int cmd_predict(const PredictArgs& args, std::ostream& out, std::ostream& err);

struct StatsArgs {
  std::filesystem::path catalog;
  std::filesystem::path out_dir = ".";
};

int cmd_stats(const StatsArgs& args, std::ostream& out, std::ostream& err);

struct ReportArgs {
  std::filesystem::path model_dir;
  std::string topic;  // tag name or topic index
  bool json = false;
  double monosemy_threshold = 0.5;
};

int cmd_report(const ReportArgs& args, std::ostream& out, std::ostream& err);

/// A = 1[X'Y > 0] with X (rank x rows) and Y (rank x cols) i.i.d. N(0, 1).
/// Every column is a feature column, so the matrix is fully observed.
TernaryMatrix planted_sign_matrix(Index rows, Index cols, Index rank, std::uint64_t seed);

struct SweepArgs {
  /// Use this matrix instead of the planted generator.
  std::optional<std::filesystem::path> matrix;
  Index rows = 200;
  Index cols = 300;
  Index planted_rank = 1;
  std::vector<Index> ranks = {1};
  /// Multipliers of k(m + n - k); 0 means every observed entry once.
  std::vector<double> c_values = {0.05, 0.5, 1.0, 2.0, 4.0, 0.0};
  /// Absolute sample counts, run in addition to c_values.
  std::vector<Index> sample_counts;
  Index seeds = 3;
  std::uint64_t base_seed = 0;
  GlrmConfig config;  // k and subsample_c are overwritten per cell
  std::filesystem::path out = "sweep.csv";
};

struct SweepCell {
  Index rank = 0;
  double c = 0.0;
  Index requested = 0;  // sample count asked for (0 = all of Omega)
  Index n_samples = 0;
  Index replicate = 0;
  std::uint64_t seed = 0;
  double final_loss = 0.0;
  double loss_per_sample = 0.0;
  /// Data loss of the fitted model averaged over every observed entry.
  double full_loss_per_entry = 0.0;
  std::int64_t sweeps = 0;
  bool converged = false;
  double seconds = 0.0;
  std::string error;
};

/// Runs the grid in order; failed cells keep their error text and the run
/// continues.
std::vector<SweepCell> run_sweep(const SweepArgs& args);
void write_sweep_csv(std::ostream& out, const std::vector<SweepCell>& cells);

int cmd_sweep(const SweepArgs& args, std::ostream& out, std::ostream& err);

/// Deterministic per-cell seed from (base, index).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

std::string sha256_file(const std::filesystem::path& p);

}  // namespace semtag::cli
