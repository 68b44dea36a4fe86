#pragma once

// Command-line front end. dispatch() is the whole program; the binary in tools/ only
// forwards argv and the standard streams.
//
// Exit codes: 0 success, 1 validation or usage error, 2 I/O error.

#include "ensemblekit/combiner.hpp"
#include "ensemblekit/diversity.hpp"
#include "ensemblekit/error.hpp"
#include "ensemblekit/gaussmodel.hpp"
#include "ensemblekit/metrics.hpp"
#include "ensemblekit/parallel.hpp"
#include "ensemblekit/predictions.hpp"
#include "ensemblekit/report.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace ensemblekit::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kIo = 2 };

struct LoadFlags {
  std::string manifest;
  double row_sum_tol = kDefaultRowSumTol;
  bool strict = false;
  bool renormalize = false;

  LoadOptions options() const {
    return {strict ? kStrictRowSumTol : row_sum_tol, renormalize};
  }
};

/// Everything any subcommand can be given.
struct RunConfig {
  unsigned threads = 0; // 0: ENSEMBLEKIT_THREADS or hardware concurrency
  bool verbose = false;
  LoadFlags load;
  std::string rule = "aa";
  double floor = kDefaultGeometricFloor;
  int top_k = 0; // 0: all classes
  std::optional<double> baseline_accuracy;
  std::string restrict_to = "none";
  std::string model;
  std::string sigma_divisor = "n";
  std::string profile;
  std::uint64_t replicas = 1'000'000;
  std::uint64_t seed = 0;
  bool renormalize_draws = false;
  bool no_renormalize = false;
  std::size_t n_models = 3;
  std::size_t n_samples = 1000;
  double rho = 0.0;
  std::string out;
  std::string out_dir;
  std::string predictions_out;
};

namespace detail {

struct Context {
  const RunConfig& cfg;
  std::ostream& out;
  std::ostream& err;
  unsigned threads;
};

inline void emit(const Context& ctx, const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    ctx.out << text;
  else
    ensemblekit::detail::write_text_file(path, text);
}

inline EnsembleRun load(const Context& ctx) {
  std::vector<std::string> warnings;
  auto run = load_run(ctx.cfg.load.manifest, ctx.cfg.load.options(), &warnings);
  for (const auto& w : warnings)
    ctx.err << "warning: " << w << "\n";
  if (ctx.cfg.verbose)
    ctx.err << "loaded " << run.n_models() << " model(s), " << run.n_samples() << " samples, "
            << run.n_classes() << " classes\n";
  return run;
}

inline Rule parse_rule(const std::string& s) {
  if (s == "aa")
    return Rule::arithmetic;
  if (s == "ga")
    return Rule::geometric;
  throw ValidationError("unknown rule '" + s + "' (expected aa or ga)");
}

inline void check_floor(double floor) {
  if (!(floor > 0.0) || floor > 1.0)
    throw ValidationError("--floor must lie in (0, 1]");
}

inline int run_combine(const Context& ctx) {
  const Rule rule = parse_rule(ctx.cfg.rule);
  check_floor(ctx.cfg.floor);
  const auto run = load(ctx);
  const auto result = combine(run, rule, ctx.cfg.floor, ctx.threads);
  std::filesystem::path out(ctx.cfg.out);
  std::filesystem::path pred = ctx.cfg.predictions_out;
  if (pred.empty())
    pred = out.parent_path() / (out.stem().string() + "_predictions.csv");
  write_confidence_csv(out, result.combined, run.labels());
  ensemblekit::detail::write_text_file(pred, predictions_csv(result, run.labels()));
  if (ctx.cfg.verbose)
    ctx.err << "wrote " << out.string() << " and " << pred.string() << "\n";
  return kOk;
}

struct Selection {
  std::string name;
  ConfidenceMatrix confidences;
  std::vector<ClassId> predicted;
};

inline Selection select(const Context& ctx, const EnsembleRun& run, const std::string& spec) {
  if (spec.rfind("single:", 0) == 0) {
    const std::string name = spec.substr(7);
    auto idx = run.find_model(name);
    if (!idx)
      throw ValidationError("no model named '" + name + "' in the manifest");
    const auto& m = run.model(*idx);
    return {name, m, argmax_rows(m)};
  }
  const Rule rule = parse_rule(spec);
  auto result = combine(run, rule, ctx.cfg.floor, ctx.threads);
  return {rule == Rule::arithmetic ? "ensemble_aa" : "ensemble_ga", std::move(result.combined),
          std::move(result.predicted)};
}

inline void check_rule_spec(const std::string& spec) {
  if (spec.rfind("single:", 0) == 0) {
    if (spec.size() == 7)
      throw ValidationError("--rule single:<model> needs a model name");
    return;
  }
  parse_rule(spec);
}

inline void check_baseline(const RunConfig& cfg) {
  if (cfg.baseline_accuracy && !(*cfg.baseline_accuracy >= 0.0 && *cfg.baseline_accuracy <= 1.0))
    throw ValidationError("--baseline-acc must lie in [0, 1]");
}

inline std::size_t resolve_top_k(const RunConfig& cfg, const EnsembleRun& run) {
  if (cfg.top_k == 0)
    return run.n_classes();
  if (cfg.top_k < 0 || static_cast<std::size_t>(cfg.top_k) > run.n_classes())
    throw ValidationError("--topk must lie in [1, " + std::to_string(run.n_classes()) + "]");
  return static_cast<std::size_t>(cfg.top_k);
}

inline ReportRow make_row(const Context& ctx, const EnsembleRun& run, Selection sel,
                          std::size_t k_max) {
  ReportRow row;
  row.name = std::move(sel.name);
  row.metrics = score(sel.predicted, run.truth(), run.labels(), run.sample_ids());
  row.top_k = top_k_curve(sel.confidences, run.truth(), run.labels(), k_max);
  if (ctx.cfg.baseline_accuracy)
    row.baseline = compare_to_baseline(row.metrics, *ctx.cfg.baseline_accuracy);
  return row;
}

inline int run_evaluate(const Context& ctx) {
  check_rule_spec(ctx.cfg.rule);
  check_floor(ctx.cfg.floor);
  check_baseline(ctx.cfg);
  if (ctx.cfg.top_k < 0)
    throw ValidationError("--topk must be positive");
  const auto run = load(ctx);
  const std::size_t k_max = resolve_top_k(ctx.cfg, run);
  auto row = make_row(ctx, run, select(ctx, run, ctx.cfg.rule), k_max);
  const auto weights = class_weights(run.truth(), run.labels());
  for (const auto& w : weights.warnings)
    ctx.err << "warning: " << w << "\n";

  ordered_json j;
  j["rule"] = ctx.cfg.rule;
  const auto metrics = metrics_to_json(row.metrics, run.labels(), row.top_k, row.baseline);
  for (const auto& [key, value] : metrics.items())
    j[key] = value;
  j["class_weights"] = class_weights_to_json(weights, run.labels());
  emit(ctx, ctx.cfg.out, j.dump(2) + "\n");
  if (!ctx.cfg.out.empty() && ctx.cfg.out != "-")
    ctx.out << render_table({row});
  return kOk;
}

inline int run_diversity(const Context& ctx) {
  const std::string& r = ctx.cfg.restrict_to;
  if (r != "none" && r != "aa" && r != "ga")
    throw ValidationError("--restrict must be aa, ga or none");
  check_floor(ctx.cfg.floor);
  const auto run = load(ctx);
  std::optional<EnsembleResult> restriction;
  if (r != "none")
    restriction = combine(run, parse_rule(r), ctx.cfg.floor, ctx.threads);
  const EnsembleResult* restrict_ptr = restriction ? &*restriction : nullptr;

  ordered_json j = run.n_models() >= 2 ? similarity_to_json(similarity(run)) : ordered_json{};
  if (run.n_models() < 2) {
    ctx.err << "warning: similarity needs at least two models; mean_S omitted\n";
    j["mean_S"] = nullptr;
    j["se_S"] = nullptr;
  }
  j["n_models"] = run.n_models();
  j["n_samples"] = run.n_samples();
  j["histogram"] = histogram_to_json(agreement_histogram(run, restrict_ptr));
  if (run.n_models() == 3)
    j["rww_split"] = split_to_json(wrong_agreement_split(run, restrict_ptr));
  else
    j["rww_split"] = nullptr;
  emit(ctx, ctx.cfg.out, j.dump(2) + "\n");
  return kOk;
}

inline int run_gaussmodel(const Context& ctx) {
  const std::string& d = ctx.cfg.sigma_divisor;
  if (d != "n" && d != "n-1")
    throw ValidationError("--sigma-divisor must be n or n-1");
  const auto run = load(ctx);
  auto idx = run.find_model(ctx.cfg.model);
  if (!idx)
    throw ValidationError("no model named '" + ctx.cfg.model + "' in the manifest");
  const auto profile = estimate_profile(run.model(*idx), d == "n" ? SigmaDivisor::population
                                                                   : SigmaDivisor::sample);
  ordered_json j;
  j["model"] = ctx.cfg.model;
  j["profile"] = profile_to_json(profile);
  if (profile.size() >= 3) {
    const auto scenario = scenario_to_json(scenario_probabilities(profile));
    for (const auto& [key, value] : scenario.items())
      j[key] = value;
  } else {
    ctx.err << "warning: fewer than 3 classes; scenario probabilities omitted\n";
  }
  emit(ctx, ctx.cfg.out, j.dump(2) + "\n");
  return kOk;
}

inline int run_simulate(const Context& ctx) {
  if (ctx.cfg.replicas < 1)
    throw ValidationError("--replicas must be at least 1");
  const auto profile = read_profile(ctx.cfg.profile);
  const auto sim = simulate_rww(profile, ctx.cfg.replicas, ctx.cfg.seed,
                                ctx.cfg.renormalize_draws, ctx.threads);
  ordered_json j;
  j["profile"] = profile_to_json(profile);
  j["seed"] = ctx.cfg.seed;
  j["renormalize"] = ctx.cfg.renormalize_draws;
  j["analytic"] = scenario_to_json(scenario_probabilities(profile));
  j["empirical"] = simulation_to_json(sim);
  emit(ctx, ctx.cfg.out, j.dump(2) + "\n");
  return kOk;
}

inline int run_synth(const Context& ctx) {
  if (!(ctx.cfg.rho >= 0.0 && ctx.cfg.rho <= 1.0))
    throw ValidationError("--rho must lie in [0, 1]");
  if (ctx.cfg.n_models < 1 || ctx.cfg.n_samples < 1)
    throw ValidationError("--models and --samples must be at least 1");
  SyntheticRunConfig config{read_profile(ctx.cfg.profile), ctx.cfg.n_models, ctx.cfg.n_samples,
                            ctx.cfg.rho, ctx.cfg.seed, !ctx.cfg.no_renormalize};
  const auto run = generate_synthetic_run(config, ctx.threads);
  const auto manifest = write_run(ctx.cfg.out_dir, run);
  if (ctx.cfg.no_renormalize)
    ctx.err << "warning: rows are not renormalized; load with a loose --row-sum-tol\n";
  ctx.out << manifest.string() << "\n";
  return kOk;
}

inline int run_compare(const Context& ctx) {
  check_floor(ctx.cfg.floor);
  check_baseline(ctx.cfg);
  if (ctx.cfg.top_k < 0)
    throw ValidationError("--topk must be positive");
  const auto run = load(ctx);
  const std::size_t k_max = resolve_top_k(ctx.cfg, run);
  const std::filesystem::path dir(ctx.cfg.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw IoError(dir.string(), "cannot create directory: " + ec.message());

  std::vector<ReportRow> rows;
  for (const auto& m : run.models())
    rows.push_back(make_row(ctx, run, select(ctx, run, "single:" + m.model_name()), k_max));
  rows.push_back(make_row(ctx, run, select(ctx, run, "aa"), k_max));
  rows.push_back(make_row(ctx, run, select(ctx, run, "ga"), k_max));

  const auto cmp = compare_rules(run, ctx.cfg.floor, ctx.threads);
  ordered_json j;
  j["n_samples"] = run.n_samples();
  j["n_disagree"] = cmp.n_disagree;
  j["aa_only_correct"] = cmp.aa_only_correct;
  j["ga_only_correct"] = cmp.ga_only_correct;
  ordered_json disagreements = ordered_json::array();
  for (std::size_t s = 0; s < cmp.samples.size(); ++s)
    if (!cmp.samples[s].agree)
      disagreements.push_back({{"sample_id", run.sample_ids()[s]},
                               {"true", run.labels().name(run.truth()[s])},
                               {"aa", run.labels().name(cmp.samples[s].aa_class)},
                               {"ga", run.labels().name(cmp.samples[s].ga_class)}});
  j["disagreements"] = std::move(disagreements);
  ordered_json reports;
  for (const auto& r : rows)
    reports[r.name] = metrics_to_json(r.metrics, run.labels(), r.top_k, r.baseline);
  j["reports"] = std::move(reports);

  ensemblekit::detail::write_text_file(dir / "compare.json", j.dump(2) + "\n");
  ensemblekit::detail::write_text_file(dir / "errors.csv", errors_csv(rows));
  for (const auto& r : rows)
    ensemblekit::detail::write_text_file(dir / ("topk_" + r.name + ".csv"), top_k_csv(*r.top_k));
  ctx.out << render_table(rows);
  return kOk;
}

} // namespace detail

/// Parses `args` (args[0] is the program name) and runs the selected subcommand.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  RunConfig cfg;
  CLI::App app{"Combine, score and diagnose classifier ensembles", "ensemblekit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--threads", cfg.threads, "Worker threads (default: $ENSEMBLEKIT_THREADS or all cores)")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("-v,--verbose", cfg.verbose, "Progress messages on stderr");

  auto add_load = [&](CLI::App* sub) {
    sub->add_option("--manifest", cfg.load.manifest, "Run manifest (JSON)")->required();
    sub->add_option("--row-sum-tol", cfg.load.row_sum_tol, "Allowed |row sum - 1|")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--strict", cfg.load.strict, "Row-sum tolerance 1e-9");
    sub->add_flag("--renormalize-input", cfg.load.renormalize,
                  "Divide rows by their sums after validation");
  };
  auto add_floor = [&](CLI::App* sub) {
    sub->add_option("--floor", cfg.floor, "Confidence floor before log (geometric rule)");
  };

  auto* combine_cmd = app.add_subcommand("combine", "Combine models into one ensemble prediction");
  add_load(combine_cmd);
  combine_cmd->add_option("--rule", cfg.rule, "aa or ga")->required();
  add_floor(combine_cmd);
  combine_cmd->add_option("--out", cfg.out, "Combined confidence CSV")->required();
  combine_cmd->add_option("--predictions", cfg.predictions_out,
                          "Predictions CSV (default: <out>_predictions.csv)");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score one model or an ensemble");
  add_load(evaluate_cmd);
  evaluate_cmd->add_option("--rule", cfg.rule, "aa, ga or single:<model>");
  add_floor(evaluate_cmd);
  evaluate_cmd->add_option("--topk", cfg.top_k, "Largest k of the top-k curve (default: all)");
  evaluate_cmd->add_option("--baseline-acc", cfg.baseline_accuracy, "Baseline accuracy");
  evaluate_cmd->add_option("--out", cfg.out, "Report JSON (default: stdout)");

  auto* diversity_cmd = app.add_subcommand("diversity", "Similarity and agreement patterns");
  add_load(diversity_cmd);
  diversity_cmd->add_option("--restrict", cfg.restrict_to, "aa, ga or none");
  add_floor(diversity_cmd);
  diversity_cmd->add_option("--out", cfg.out, "Diversity JSON (default: stdout)");

  auto* gauss_cmd = app.add_subcommand("gaussmodel", "Confidence profile and analytic scenario");
  add_load(gauss_cmd);
  gauss_cmd->add_option("--model", cfg.model, "Model name from the manifest")->required();
  gauss_cmd->add_option("--sigma-divisor", cfg.sigma_divisor, "n (population) or n-1");
  gauss_cmd->add_option("--out", cfg.out, "Output JSON (default: stdout)");

  auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo check of the scenario");
  simulate_cmd->add_option("--profile", cfg.profile, "Profile JSON {\"C\":[..],\"sigma\":[..]}")
      ->required();
  simulate_cmd->add_option("--replicas", cfg.replicas, "Number of replicas");
  simulate_cmd->add_option("--seed", cfg.seed, "Master seed");
  simulate_cmd->add_flag("--renormalize", cfg.renormalize_draws,
                         "Clip and renormalize each drawn vector");
  simulate_cmd->add_option("--out", cfg.out, "Output JSON (default: stdout)");

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic ensemble run");
  synth_cmd->add_option("--profile", cfg.profile, "Profile JSON")->required();
  synth_cmd->add_option("--models", cfg.n_models, "Number of models");
  synth_cmd->add_option("--samples", cfg.n_samples, "Number of samples");
  synth_cmd->add_option("--rho", cfg.rho, "Inter-model correlation in [0,1]");
  synth_cmd->add_option("--seed", cfg.seed, "Master seed");
  synth_cmd->add_flag("--no-renormalize", cfg.no_renormalize, "Keep clipped rows unnormalized");
  synth_cmd->add_option("--out-dir", cfg.out_dir, "Output directory")->required();

  auto* compare_cmd =
      app.add_subcommand("compare", "Members vs arithmetic vs geometric, with plot data");
  add_load(compare_cmd);
  add_floor(compare_cmd);
  compare_cmd->add_option("--topk", cfg.top_k, "Largest k of the top-k curves (default: all)");
  compare_cmd->add_option("--baseline-acc", cfg.baseline_accuracy, "Baseline accuracy");
  compare_cmd->add_option("--out-dir", cfg.out_dir, "Output directory")->required();

  std::vector<std::string> rest(args.empty() ? args.end() : args.begin() + 1, args.end());
  std::reverse(rest.begin(), rest.end()); // CLI11 consumes from the back
  try {
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err); // --help
      return kOk;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return kValidation;
  }

  const detail::Context ctx{cfg, out, err, resolve_threads(cfg.threads)};
  try {
    if (combine_cmd->parsed())
      return detail::run_combine(ctx);
    if (evaluate_cmd->parsed())
      return detail::run_evaluate(ctx);
    if (diversity_cmd->parsed())
      return detail::run_diversity(ctx);
    if (gauss_cmd->parsed())
      return detail::run_gaussmodel(ctx);
    if (simulate_cmd->parsed())
      return detail::run_simulate(ctx);
    if (synth_cmd->parsed())
      return detail::run_synth(ctx);
    if (compare_cmd->parsed())
      return detail::run_compare(ctx);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  }
  err << app.help();
  return kValidation;
}

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  return dispatch(std::vector<std::string>(argv, argv + argc), out, err);
}

} // namespace ensemblekit::cli
