#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "lcwr/error.hpp"
#include "lcwr/estimation.hpp"
#include "lcwr/io.hpp"
#include "lcwr/metrics.hpp"
#include "lcwr/synthetic.hpp"

namespace lcwr::cli {
namespace {

constexpr const char* kLogLevelEnv = "LCWR_LOG_LEVEL";

struct Context {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
  std::shared_ptr<spdlog::logger> log;
};

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, /*force_flush=*/true);
  auto log = std::make_shared<spdlog::logger>("lcwr", sink);
  log->set_pattern("lcwr: %l: %v");
  log->set_level(spdlog::level::warn);
  if (const char* level = std::getenv(kLogLevelEnv)) log->set_level(spdlog::level::from_str(level));
  return log;
}

std::vector<AnnotationRecord> read_records(const std::string& path, Context& ctx) {
  if (path == "-") return read_annotations(ctx.in);
  return load_annotations(path);
}

template <class Fn>
void write_to(const std::string& path, Context& ctx, Fn&& write) {
  if (path == "-") {
    write(ctx.out);
    ctx.out.flush();
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  write(f);
  f.flush();
  if (!f) throw DataError("failed writing '" + path + "'");
}

std::ifstream open_text(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open '" + path + "' for reading");
  return f;
}

// Whitespace-separated "model_id value" lines.
std::map<std::string, double> read_scores(const std::string& path) {
  auto f = open_text(path);
  std::map<std::string, double> scores;
  std::string line;
  for (int lineno = 1; std::getline(f, line); ++lineno) {
    std::istringstream ss(line);
    std::string id;
    if (!(ss >> id)) continue;
    double v = 0.0;
    std::string extra;
    if (!(ss >> v) || (ss >> extra)) {
      throw DataError(fmt::format("{}: line {}: expected '<model_id> <score>'", path, lineno));
    }
    if (!scores.emplace(id, v).second) {
      throw DataError(fmt::format("{}: line {}: duplicate model '{}'", path, lineno, id));
    }
  }
  return scores;
}

std::vector<VerbosityTriple> read_triples(const std::string& path) {
  auto f = open_text(path);
  std::vector<VerbosityTriple> triples;
  std::string line;
  for (int lineno = 1; std::getline(f, line); ++lineno) {
    std::istringstream ss(line);
    VerbosityTriple t;
    if (!(ss >> t.model_id)) continue;
    std::string extra;
    if (!(ss >> t.concise >> t.standard >> t.verbose) || (ss >> extra)) {
      throw DataError(fmt::format("{}: line {}: expected '<model_id> <concise> <standard> <verbose>'", path, lineno));
    }
    triples.push_back(std::move(t));
  }
  return triples;
}

// Fits from several archives. They must agree on gamma and may not repeat a
// model.
struct FitSet {
  GammaTable gamma;
  std::vector<ModelFit> fits;
};

FitSet load_fits(const std::vector<std::string>& paths) {
  FitSet set;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    auto archive = load_archive(paths[i]);
    if (i == 0) {
      set.gamma = archive.gamma;
    } else if (!(archive.gamma == set.gamma)) {
      throw DataError("'" + paths[i] + "' was fitted with a different gamma table than '" + paths[0] + "'");
    }
    for (auto& fit : archive.fits) {
      if (!seen.emplace(fit.model_id, fit.baseline_id).second) {
        throw DataError("model '" + fit.model_id + "' appears in more than one fit");
      }
      set.fits.push_back(std::move(fit));
    }
  }
  return set;
}

std::string fixed(double v) { return fmt::format("{:.6f}", v); }

struct Options {
  // fit-gamma / fit
  std::string annotations;
  std::string gamma_path;
  std::string output = "-";
  std::optional<double> lambda_phi;
  double lambda_theta_psi = kDefaultLambdaThetaPsi;
  bool cv = false;
  int cv_folds = 5;
  std::vector<std::string> models;
  bool strict = false;
  int max_iterations = FitConfig{}.max_iterations;
  std::uint64_t seed = 0;
  // leaderboard / matrix
  std::vector<std::string> fit_files;
  std::string sort = "lc";
  // gameability / correlate
  std::string triples;
  std::string scores_a, scores_b, arena;
  int bootstrap = 0;
  // synth
  int n_models = 0;
  int n_instructions = 0;
  double verbosity = 1.0;
  std::string attack_model;
  AttackConfig attack;
  bool hard_labels = false;
};

int cmd_fit_gamma(const Options& o, Context& ctx) {
  FitConfig config;
  config.lambda_theta_psi = o.lambda_theta_psi;
  config.max_iterations = o.max_iterations;
  config.validate();
  const auto records = read_records(o.annotations, ctx);
  ctx.log->info("fitting gamma on {} records", records.size());
  const auto fit = fit_gamma_detailed(records, config);
  ctx.log->info("gamma fit: {} parameters, {} iterations, loss {}", fit.n_parameters, fit.diagnostics.iterations,
                fit.diagnostics.final_loss);
  if (!fit.diagnostics.converged) {
    ctx.log->warn("gamma fit did not converge after {} iterations", fit.diagnostics.iterations);
    if (o.strict) {
      ctx.err << "lcwr: gamma fit did not converge\n";
      return kNotConverged;
    }
  }
  write_to(o.output, ctx, [&](std::ostream& s) { write_gamma(s, fit.gamma); });
  return kOk;
}

int cmd_fit(const Options& o, Context& ctx) {
  FitConfig config;
  config.lambda_theta_psi = o.lambda_theta_psi;
  if (o.lambda_phi) config.lambda_phi = *o.lambda_phi;
  config.cross_validate = o.cv;
  config.cv_folds = o.cv_folds;
  config.rng_seed = o.seed;
  config.max_iterations = o.max_iterations;
  config.validate();

  const auto records = read_records(o.annotations, ctx);
  FitArchive archive;
  archive.gamma = load_gamma(o.gamma_path);
  archive.config = config;

  const std::set<std::string> wanted(o.models.begin(), o.models.end());
  std::set<std::string> found;
  bool all_converged = true;
  for (const auto& group : group_by_model(records)) {
    const auto& id = group.front().model_id;
    if (!wanted.empty() && !wanted.contains(id)) continue;
    found.insert(id);
    auto fit = fit_model(group, archive.gamma, config);
    ctx.log->info("{}: theta {} phi {} psi {} ({} iterations)", id, fit.params.theta, fit.params.phi,
                  fit.params.psi, fit.diagnostics.iterations);
    if (!fit.diagnostics.converged) {
      all_converged = false;
      ctx.log->warn("{}: fit did not converge after {} iterations", id, fit.diagnostics.iterations);
    }
    archive.fits.push_back(std::move(fit));
  }
  for (const auto& id : wanted) {
    if (!found.contains(id)) throw DataError("no annotations for model '" + id + "'");
  }
  if (archive.fits.empty()) throw DataError("no annotations to fit");
  for (const auto& f : archive.fits) {
    if (f.baseline_id != archive.fits.front().baseline_id) {
      throw DataError("annotations mix baselines '" + f.baseline_id + "' and '" + archive.fits.front().baseline_id +
                      "'; fit them separately");
    }
  }
  if (o.strict && !all_converged) {
    ctx.err << "lcwr: at least one model fit did not converge\n";
    return kNotConverged;
  }
  write_to(o.output, ctx, [&](std::ostream& s) { write_archive(s, archive); });
  return kOk;
}

int cmd_leaderboard(const Options& o, Context& ctx) {
  const auto set = load_fits(o.fit_files);
  const auto records = read_records(o.annotations, ctx);
  std::map<std::pair<std::string, std::string>, std::vector<AnnotationRecord>> groups;
  for (auto& g : group_by_model(records)) {
    auto key = std::make_pair(g.front().model_id, g.front().baseline_id);
    groups.emplace(std::move(key), std::move(g));
  }
  std::vector<LeaderboardRow> rows;
  for (const auto& fit : set.fits) {
    const auto it = groups.find({fit.model_id, fit.baseline_id});
    if (it == groups.end()) {
      throw DataError("no annotations for model '" + fit.model_id + "' against '" + fit.baseline_id + "'");
    }
    rows.push_back(leaderboard_row(fit, set.gamma, it->second));
  }
  sort_leaderboard(rows, o.sort == "raw" ? SortKey::kRaw : SortKey::kLengthControlled);

  ctx.out << "model\tlc_winrate\traw_winrate\tavg_length\tn_examples\n";
  for (const auto& r : rows) {
    ctx.out << fmt::format("{}\t{}\t{}\t{:.2f}\t{}\n", r.model_id, fixed(r.lc_winrate), fixed(r.raw_winrate),
                           r.avg_length, r.n_examples);
  }
  return kOk;
}

int cmd_matrix(const Options& o, Context& ctx) {
  auto set = load_fits(o.fit_files);
  const auto baseline = set.fits.front().baseline_id;
  const bool has_baseline =
      std::any_of(set.fits.begin(), set.fits.end(), [&](const ModelFit& f) { return f.model_id == baseline; });
  if (!has_baseline) {
    ModelFit b;
    b.model_id = baseline;
    b.baseline_id = baseline;
    b.scale = LengthScale::degenerate_scale();
    set.fits.push_back(b);
  }
  std::sort(set.fits.begin(), set.fits.end(),
            [](const ModelFit& a, const ModelFit& b) { return a.model_id < b.model_id; });
  const auto ids = set.gamma.instruction_ids();
  const auto m = winrate_matrix(set.fits, set.gamma, ids);

  ctx.out << "model";
  for (const auto& id : m.model_ids) ctx.out << '\t' << id;
  ctx.out << '\n';
  for (Eigen::Index i = 0; i < m.percent.rows(); ++i) {
    ctx.out << m.model_ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.percent.cols(); ++j) ctx.out << '\t' << fixed(m.percent(i, j));
    ctx.out << '\n';
  }
  return kOk;
}

int cmd_gameability(const Options& o, Context& ctx) {
  const auto triples = read_triples(o.triples);
  for (const auto& t : triples) ctx.out << fmt::format("{}\t{}\n", t.model_id, fixed(normalized_std(t)));
  ctx.out << fmt::format("gameability\t{}\n", fixed(gameability(triples)));
  return kOk;
}

int cmd_correlate(const Options& o, Context& ctx) {
  const auto a = read_scores(o.scores_a);
  const auto b = read_scores(o.scores_b);
  const auto arena = read_scores(o.arena);
  std::vector<double> xa, xb, xr;
  for (const auto& [id, score] : arena) {
    const auto ia = a.find(id);
    const auto ib = b.find(id);
    if (ia == a.end() || ib == b.end()) continue;
    xa.push_back(ia->second);
    xb.push_back(ib->second);
    xr.push_back(score);
  }
  ctx.log->info("{} models common to all three score files", xr.size());
  ctx.out << fmt::format("n_models\t{}\n", xr.size());
  ctx.out << fmt::format("spearman_a\t{}\n", fixed(spearman(xa, xr)));
  ctx.out << fmt::format("spearman_b\t{}\n", fixed(spearman(xb, xr)));
  if (o.bootstrap > 0) {
    ctx.out << fmt::format("p_value\t{}\n", fixed(bootstrap_corr_pvalue(xa, xb, xr, o.bootstrap, o.seed)));
  }
  return kOk;
}

int cmd_synth(const Options& o, Context& ctx) {
  WorldOptions options;
  if (o.hard_labels) options.label_mode = LabelMode::kHard;
  const auto world = make_world(o.n_models, o.n_instructions, o.seed, options);
  if (!o.attack_model.empty() &&
      std::find(world.model_ids.begin(), world.model_ids.end(), o.attack_model) == world.model_ids.end()) {
    throw InvalidArgument("attack target '" + o.attack_model + "' is not a model of this world");
  }
  if (!(o.verbosity > 0.0)) throw InvalidArgument("--verbosity-multiplier must be positive");

  std::vector<AnnotationRecord> records;
  for (const auto& id : world.model_ids) {
    auto rs = gen_dataset(world, id);
    if (id != world.baseline_id) {
      if (o.verbosity != 1.0) rs = apply_verbosity(world, rs, o.verbosity);
      if (id == o.attack_model) rs = apply_truncation_attack(world, rs, o.attack);
    }
    records.insert(records.end(), rs.begin(), rs.end());
  }
  ctx.log->info("{} records for {} models", records.size(), world.model_ids.size());
  write_to(o.output, ctx, [&](std::ostream& s) { write_annotations(s, records); });
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  Context ctx{in, out, err, make_logger(err)};
  Options o;

  CLI::App app{"Length-controlled win rates from pairwise annotations", "lcwr"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  auto* fit_gamma_cmd = app.add_subcommand("fit-gamma", "Fit per-instruction difficulties jointly over all models");
  fit_gamma_cmd->add_option("annotations", o.annotations, "Annotation file ('-' for stdin)")->required();
  fit_gamma_cmd->add_option("-o,--output", o.output, "Gamma file ('-' for stdout)");
  fit_gamma_cmd->add_option("--lambda-theta-psi", o.lambda_theta_psi, "L2 weight on theta and gamma");
  fit_gamma_cmd->add_option("--max-iterations", o.max_iterations, "Optimizer iteration cap");
  fit_gamma_cmd->add_flag("--strict", o.strict, "Exit 3 if the fit does not converge");

  auto* fit_cmd = app.add_subcommand("fit", "Fit each model against the baseline");
  fit_cmd->add_option("annotations", o.annotations, "Annotation file ('-' for stdin)")->required();
  fit_cmd->add_option("--gamma", o.gamma_path, "Gamma file from fit-gamma")->required();
  fit_cmd->add_option("-o,--output", o.output, "Fit archive ('-' for stdout)");
  auto* lambda_opt = fit_cmd->add_option("--lambda-phi", o.lambda_phi, "L2 weight on the length coefficient");
  fit_cmd->add_flag("--cv", o.cv, "Choose the length weight by cross-validation")->excludes(lambda_opt);
  fit_cmd->add_option("--cv-folds", o.cv_folds, "Folds for --cv");
  fit_cmd->add_option("--lambda-theta-psi", o.lambda_theta_psi, "L2 weight on theta and psi");
  fit_cmd->add_option("--model", o.models, "Only fit these models (repeatable)");
  fit_cmd->add_option("--seed", o.seed, "Seed for cross-validation folds");
  fit_cmd->add_option("--max-iterations", o.max_iterations, "Newton iteration cap per model");
  fit_cmd->add_flag("--strict", o.strict, "Exit 3 if any fit does not converge");

  auto* lb_cmd = app.add_subcommand("leaderboard", "Tabulate LC and raw win rates");
  lb_cmd->add_option("fits", o.fit_files, "Fit archives")->required();
  lb_cmd->add_option("--annotations", o.annotations, "Annotation file ('-' for stdin)")->required();
  lb_cmd->add_option("--sort", o.sort, "Sort key")->check(CLI::IsMember({"lc", "raw"}));

  auto* matrix_cmd = app.add_subcommand("matrix", "Pairwise LC win rates between fitted models");
  matrix_cmd->add_option("fits", o.fit_files, "Fit archives")->required();

  auto* game_cmd = app.add_subcommand("gameability", "Normalized spread of win rates across verbosity prompts");
  game_cmd->add_option("triples", o.triples, "Lines of '<model> <concise> <standard> <verbose>'")->required();

  auto* corr_cmd = app.add_subcommand("correlate", "Spearman correlation of two score sets with a reference");
  corr_cmd->add_option("scores_a", o.scores_a, "Lines of '<model> <score>'")->required();
  corr_cmd->add_option("scores_b", o.scores_b, "Lines of '<model> <score>'")->required();
  corr_cmd->add_option("arena", o.arena, "Reference scores")->required();
  corr_cmd->add_option("--bootstrap", o.bootstrap, "Bootstrap resamples for a p-value")->check(CLI::NonNegativeNumber);
  corr_cmd->add_option("--seed", o.seed, "Bootstrap seed");

  auto* synth_cmd = app.add_subcommand("synth", "Generate annotations from a synthetic world");
  synth_cmd->add_option("--models", o.n_models, "Models including the baseline")->required();
  synth_cmd->add_option("--instructions", o.n_instructions, "Instructions")->required();
  synth_cmd->add_option("--seed", o.seed, "World seed")->required();
  synth_cmd->add_option("--verbosity-multiplier", o.verbosity, "Scale every non-baseline output length");
  synth_cmd->add_option("--attack", o.attack_model, "Apply the truncation attack to this model");
  synth_cmd->add_option("--attack-threshold", o.attack.win_threshold, "Keep outputs at least this likely to win");
  synth_cmd->add_option("--attack-window", o.attack.length_window, "Keep outputs within this many sigmas");
  synth_cmd->add_option("--attack-truncate", o.attack.truncate_to, "Length of truncated outputs");
  synth_cmd->add_flag("--hard-labels", o.hard_labels, "Sample 0/1 labels instead of probabilities");
  synth_cmd->add_option("-o,--output", o.output, "Annotation file ('-' for stdout)");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*fit_gamma_cmd) return cmd_fit_gamma(o, ctx);
    if (*fit_cmd) return cmd_fit(o, ctx);
    if (*lb_cmd) return cmd_leaderboard(o, ctx);
    if (*matrix_cmd) return cmd_matrix(o, ctx);
    if (*game_cmd) return cmd_gameability(o, ctx);
    if (*corr_cmd) return cmd_correlate(o, ctx);
    if (*synth_cmd) return cmd_synth(o, ctx);
  } catch (const Error& e) {
    err << "lcwr: error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace lcwr::cli
