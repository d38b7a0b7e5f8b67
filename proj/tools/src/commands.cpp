#include "semtag_cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <tuple>

#include <json.hpp>
#include <openssl/evp.h>

#include "semtag/catalog.hpp"
#include "semtag/error.hpp"
#include "semtag/inference.hpp"
#include "semtag/persistence.hpp"

namespace semtag::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + p.string());
  return in;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + p.string());
  return out;
}

void close_checked(std::ofstream& out, const fs::path& p) {
  out.close();
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + p.string());
}

TernaryMatrix read_matrix(const fs::path& p) {
  auto in = open_in(p);
  return TernaryMatrix::read(in);
}

fs::path sibling(const fs::path& matrix, const std::string& suffix) {
  fs::path base = matrix;
  if (base.extension() == ".matrix") base.replace_extension();
  return fs::path(base.string() + suffix);
}

/// Names for a matrix written by ingest; empty lists when the files are absent.
struct MatrixNames {
  std::vector<std::string> row_ids;
  std::vector<std::string> tags;
  std::vector<std::string> features;
};

MatrixNames names_for(const fs::path& matrix, const TernaryMatrix& A) {
  MatrixNames n;
  const fs::path vocab_path = sibling(matrix, ".vocab.json");
  if (fs::exists(vocab_path)) {
    auto in = open_in(vocab_path);
    std::stringstream ss;
    ss << in.rdbuf();
    const auto vocab = Vocabulary::from_json(ss.str());
    if (vocab.tag_count() == A.tag_cols() && vocab.feature_count() == A.feature_cols()) {
      n.tags = vocab.tags();
      n.features = vocab.feature_names();
    }
  }
  const fs::path ids_path = sibling(matrix, ".ids");
  if (fs::exists(ids_path)) {
    auto in = open_in(ids_path);
    std::vector<std::string> ids;
    for (std::string line; std::getline(in, line);) ids.push_back(line);
    if (static_cast<Index>(ids.size()) == A.rows()) n.row_ids = std::move(ids);
  }
  return n;
}

json config_json(const GlrmConfig& c) {
  return {{"k", c.k},
          {"lambda", c.lambda},
          {"subsample_c", c.subsample_c},
          {"seed", c.seed},
          {"noise_low", c.noise_low},
          {"noise_high", c.noise_high},
          {"impute_fill", c.impute_fill},
          {"max_sweeps", c.max_sweeps},
          {"rel_tol", c.rel_tol},
          {"anchor", c.anchor},
          {"nonneg_y", c.nonneg_y},
          {"nonneg_x", c.nonneg_x}};
}

GlrmConfig config_from_json(const json& j) {
  GlrmConfig c;
  c.k = j.at("k").get<Index>();
  c.lambda = j.at("lambda").get<double>();
  c.subsample_c = j.at("subsample_c").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.noise_low = j.at("noise_low").get<double>();
  c.noise_high = j.at("noise_high").get<double>();
  c.impute_fill = j.at("impute_fill").get<double>();
  c.max_sweeps = j.at("max_sweeps").get<std::int64_t>();
  c.rel_tol = j.at("rel_tol").get<double>();
  c.anchor = j.at("anchor").get<bool>();
  c.nonneg_y = j.at("nonneg_y").get<bool>();
  c.nonneg_x = j.value("nonneg_x", false);
  return c;
}

/// Runs `body`, turning library and IO failures into a message and exit 1.
template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
  }
  return 1;
}

double sampled_data_loss(const Factorization& f, const TernaryMatrix& A, const SampleMultiset& s) {
  GlrmConfig unregularized;
  unregularized.lambda = 0.0;
  return total_loss(f, A, s, unregularized);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  // splitmix64 finalizer over the pair; cheap and well mixed.
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string sha256_file(const fs::path& p) {
  auto in = open_in(p);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error(ErrorCode::IoError, "sha256 unavailable");
  }
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

int cmd_ingest(const IngestArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto in = open_in(args.catalog);
    const auto records = parse_catalog(in);
    if (records.empty()) {
      err << "error: no records in " << args.catalog.string() << '\n';
      return 1;
    }
    const auto vocab = Vocabulary::from_records(records);
    const auto A = encode(records, vocab);

    const fs::path matrix_path = args.out_prefix.string() + ".matrix";
    const fs::path vocab_path = args.out_prefix.string() + ".vocab.json";
    const fs::path ids_path = args.out_prefix.string() + ".ids";
    {
      auto o = open_out(matrix_path);
      A.write(o);
      close_checked(o, matrix_path);
    }
    {
      auto o = open_out(vocab_path);
      o << vocab.to_json() << '\n';
      close_checked(o, vocab_path);
    }
    {
      auto o = open_out(ids_path);
      for (const auto& r : records) o << r.dataset_id << '\n';
      close_checked(o, ids_path);
    }
    out << "matrix " << A.rows() << "x(" << A.tag_cols() << "+" << A.feature_cols() << ")"
        << ", observed " << A.observed_set().size() << ", missing " << A.missing_count() << '\n';
    return 0;
  });
}

FitArgs fit_args_from_manifest(const fs::path& manifest) {
  auto in = open_in(manifest);
  json j;
  in >> j;
  FitArgs a;
  a.matrix = j.at("inputs").at("path").get<std::string>();
  a.config = config_from_json(j.at("config"));
  a.extra_tags = j.value("extra_tags", Index{0});
  a.out_dir = manifest.parent_path();
  return a;
}

int cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const std::string started = utc_now();
    const auto t0 = std::chrono::steady_clock::now();
    const std::string digest = sha256_file(args.matrix);
    TernaryMatrix A = read_matrix(args.matrix);
    MatrixNames names = names_for(args.matrix, A);
    if (args.extra_tags > 0) {
      A = augment_hypothetical(A, args.extra_tags);
      if (!names.tags.empty()) {
        for (Index i = 0; i < args.extra_tags; ++i) names.tags.push_back("hypothetical_" + std::to_string(i));
      }
    }

    FitResult result = fit(A, args.config);

    fs::create_directories(args.out_dir);
    save_model(args.out_dir / "model", SavedModel{result.factors, names.row_ids, names.tags, names.features});

    const fs::path trace_path = args.out_dir / "loss_trace.csv";
    {
      auto o = open_out(trace_path);
      o << "sweep,L,L_per_N\n" << std::setprecision(12);
      for (std::size_t s = 0; s < result.loss_trace.size(); ++s) {
        o << s << ',' << result.loss_trace[s] << ','
          << result.loss_trace[s] / static_cast<double>(result.n_samples) << '\n';
      }
      close_checked(o, trace_path);
    }

    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json manifest;
    manifest["config"] = config_json(args.config);
    manifest["inputs"] = {{"path", fs::absolute(args.matrix).string()}, {"sha256", digest}};
    manifest["extra_tags"] = args.extra_tags;
    manifest["seed"] = args.config.seed;
    manifest["rng"] = result.rng;
    manifest["started"] = started;
    manifest["finished"] = utc_now();
    manifest["seconds"] = seconds;
    manifest["tool_version"] = kToolVersion;
    manifest["n_samples"] = result.n_samples;
    manifest["sweeps"] = result.sweeps;
    manifest["converged"] = result.converged;
    manifest["final_loss"] = result.final_loss();
    const fs::path run_path = args.out_dir / "run.json";
    auto o = open_out(run_path);
    o << manifest.dump(2) << '\n';
    close_checked(o, run_path);

    out << "loss " << result.final_loss() << " (L/N " << result.final_loss() / static_cast<double>(result.n_samples)
        << ", N " << result.n_samples << ") after " << result.sweeps << " sweeps"
        << (result.converged ? "" : ", not converged") << '\n';
    return 0;
  });
}

int cmd_predict(const PredictArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const SavedModel model = load_model(args.model_dir / "model");
    fs::path matrix_path;
    Index extra_tags = 0;
    if (args.matrix) {
      matrix_path = *args.matrix;
    } else {
      auto in = open_in(args.model_dir / "run.json");
      json j;
      in >> j;
      matrix_path = j.at("inputs").at("path").get<std::string>();
      extra_tags = j.value("extra_tags", Index{0});
    }
    TernaryMatrix A = read_matrix(matrix_path);
    if (extra_tags > 0) A = A.with_extra_tag_cols(extra_tags);
    const auto& f = model.factors;
    if (A.rows() != f.rows() || A.tag_cols() != f.tag_cols() || A.feature_cols() != f.feature_cols()) {
      throw Error(ErrorCode::ShapeMismatch, "matrix does not match the model");
    }

    const bool tags = args.target == Target::Tags;
    ProbabilityMatrix p = tags ? tag_probabilities(f) : feature_probabilities(f);
    p.row_ids = model.row_ids;
    p.col_names = tags ? model.tag_names : model.feature_names;
    {
      auto o = open_out(args.out);
      p.write_csv(o);
      close_checked(o, args.out);
    }

    const fs::path flags_path = args.out.string() + ".flags.csv";
    auto o = open_out(flags_path);
    o << "dataset_id,name,probability,declared,flag\n" << std::setprecision(6);
    Index suspects = 0;
    Index candidates = 0;
    const Index offset = tags ? 0 : A.tag_cols();
    for (Index i = 0; i < p.values.rows(); ++i) {
      for (Index j = 0; j < p.values.cols(); ++j) {
        const TernaryValue v = A.at(i, j + offset);
        const double prob = p.values(i, j);
        const char* flag = nullptr;
        if (v == TernaryValue::One && prob < 0.5) {
          flag = "suspect";
          ++suspects;
        } else if (v != TernaryValue::One && prob > 0.5) {
          flag = "candidate";
          ++candidates;
        }
        if (flag) {
          o << p.row_ids[static_cast<std::size_t>(i)] << ',' << p.col_names[static_cast<std::size_t>(j)] << ','
            << prob << ',' << to_char(v) << ',' << flag << '\n';
        }
      }
    }
    close_checked(o, flags_path);
    out << suspects << " suspects, " << candidates << " candidates\n";
    return 0;
  });
}

int cmd_stats(const StatsArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto in = open_in(args.catalog);
    const auto records = parse_catalog(in);
    fs::create_directories(args.out_dir);
    int status = 0;
    for (const auto& [kind, file, label] :
         {std::tuple{TokenKind::Tags, "tags_rankfreq.csv", "tags"},
          std::tuple{TokenKind::Features, "features_rankfreq.csv", "features"}}) {
      std::map<std::string, std::int64_t> counts;
      for (const auto& r : records) {
        if (kind == TokenKind::Tags) {
          for (const auto& t : r.tags) ++counts[t];
        } else {
          for (const auto& f : r.features) ++counts[f.first];
        }
      }
      RankFrequency rf;
      bool fitted = true;
      try {
        rf = rank_frequency(counts);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::TooFewItems && e.code() != ErrorCode::DegenerateFit) throw;
        err << "warning: " << label << ": " << e.what() << '\n';
        fitted = false;
        for (const auto& [name, c] : counts) rf.items.emplace_back(name, c);
        std::stable_sort(rf.items.begin(), rf.items.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
      }
      const fs::path path = args.out_dir / file;
      auto o = open_out(path);
      rf.write_csv(o);
      close_checked(o, path);
      if (fitted) {
        out << label << ": " << rf.items.size() << " distinct, alpha " << rf.fitted_exponent << " +/- "
            << rf.fit_stderr << '\n';
      } else {
        out << label << ": " << rf.items.size() << " distinct, no fit\n";
      }
    }
    return status;
  });
}

int cmd_report(const ReportArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const SavedModel model = load_model(args.model_dir / "model");
    Index topic = -1;
    for (std::size_t i = 0; i < model.tag_names.size(); ++i) {
      if (model.tag_names[i] == args.topic) topic = static_cast<Index>(i);
    }
    if (topic < 0) {
      try {
        std::size_t used = 0;
        topic = std::stoll(args.topic, &used);
        if (used != args.topic.size()) topic = -1;
      } catch (const std::exception&) {
        topic = -1;
      }
    }
    if (topic < 0) throw Error(ErrorCode::TopicOutOfRange, "unknown topic '" + args.topic + "'");

    const auto report = topic_report(model.factors, topic, model.tag_names, model.feature_names);
    const auto mono = monosemy_profile(model.factors, args.monosemy_threshold, model.tag_names);
    if (args.json) {
      json j = json::parse(report.to_json());
      json m = json::object();
      for (std::size_t i = 0; i < mono.tags.size(); ++i) m[mono.tags[i]] = mono.n_semy[i];
      j["monosemy"] = {{"threshold", args.monosemy_threshold}, {"n_semy", m}};
      out << j.dump(2) << '\n';
    } else {
      report.write_text(out);
      out << "n-semy (|Y_t| >= " << args.monosemy_threshold << ")\n";
      std::size_t width = 8;
      for (const auto& t : mono.tags) width = std::max(width, t.size());
      for (std::size_t i = 0; i < mono.tags.size(); ++i) {
        out << "  " << std::left << std::setw(static_cast<int>(width)) << mono.tags[i] << "  " << std::right
            << std::setw(4) << mono.n_semy[i] << '\n';
      }
    }
    return 0;
  });
}

TernaryMatrix planted_sign_matrix(Index rows, Index cols, Index rank, std::uint64_t seed) {
  if (rows < 1 || cols < 1 || rank < 1) throw Error(ErrorCode::InvalidArgument, "planted matrix needs positive sizes");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd X(rank, rows);
  Eigen::MatrixXd Y(rank, cols);
  for (Index j = 0; j < rows; ++j) {
    for (Index t = 0; t < rank; ++t) X(t, j) = normal(rng);
  }
  for (Index j = 0; j < cols; ++j) {
    for (Index t = 0; t < rank; ++t) Y(t, j) = normal(rng);
  }
  const Eigen::MatrixXd B = X.transpose() * Y;
  std::vector<Triplet> ones;
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      if (B(i, j) > 0.0) ones.push_back({i, j, TernaryValue::One});
    }
  }
  return TernaryMatrix::build(rows, 0, cols, ones);
}

std::vector<SweepCell> run_sweep(const SweepArgs& args) {
  const TernaryMatrix A = args.matrix ? read_matrix(*args.matrix)
                                      : planted_sign_matrix(args.rows, args.cols, args.planted_rank, args.base_seed);
  const ObservedSet omega = A.observed_set();
  const SampleMultiset everything = all_samples(omega);

  struct Plan {
    double c;
    Index absolute;
  };
  std::vector<Plan> plans;
  for (double c : args.c_values) plans.push_back({c, 0});
  for (Index n : args.sample_counts) plans.push_back({0.0, n});

  std::vector<SweepCell> cells;
  std::uint64_t index = 0;
  for (Index k : args.ranks) {
    for (const auto& plan : plans) {
      for (Index rep = 0; rep < args.seeds; ++rep, ++index) {
        SweepCell cell;
        cell.rank = k;
        cell.c = plan.c;
        cell.replicate = rep;
        cell.seed = derive_seed(args.base_seed, index);
        const auto t0 = std::chrono::steady_clock::now();
        try {
          GlrmConfig cfg = args.config;
          cfg.k = k;
          cfg.seed = cell.seed;
          FitOptions opts;
          if (plan.absolute > 0) {
            cell.requested = plan.absolute;
            opts.samples = draw_subsample(omega, plan.absolute, derive_seed(cell.seed, 1));
          } else if (plan.c > 0.0) {
            cfg.subsample_c = plan.c;
            cell.requested = sample_count(A.rows(), A.cols(), k, plan.c);
          } else {
            cfg.subsample_c = 0.0;
          }
          const FitResult r = fit(A, cfg, std::nullopt, opts);
          cell.n_samples = r.n_samples;
          cell.final_loss = r.final_loss();
          cell.loss_per_sample = r.final_loss() / static_cast<double>(r.n_samples);
          cell.full_loss_per_entry =
              sampled_data_loss(r.factors, A, everything) / static_cast<double>(everything.size());
          cell.sweeps = r.sweeps;
          cell.converged = r.converged;
        } catch (const Error& e) {
          cell.error = e.what();
        }
        cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepCell>& cells) {
  out << "rank,c,requested,n_samples,replicate,seed,final_loss,loss_per_sample,full_loss_per_entry,"
         "sweeps,converged,seconds,error\n";
  out << std::setprecision(10);
  for (const auto& c : cells) {
    std::string error = c.error;
    for (char& ch : error) {
      if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
    }
    out << c.rank << ',' << c.c << ',' << c.requested << ',' << c.n_samples << ',' << c.replicate << ','
        << c.seed << ',' << c.final_loss << ',' << c.loss_per_sample << ',' << c.full_loss_per_entry << ','
        << c.sweeps << ',' << (c.converged ? 1 : 0) << ',' << c.seconds << ',' << error << '\n';
  }
}

int cmd_sweep(const SweepArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto cells = run_sweep(args);
    auto o = open_out(args.out);
    write_sweep_csv(o, cells);
    close_checked(o, args.out);
    Index failed = 0;
    for (const auto& c : cells) failed += c.error.empty() ? 0 : 1;
    out << cells.size() << " cells, " << failed << " failed, written to " << args.out.string() << '\n';
    return 0;
  });
}

}  // namespace semtag::cli
