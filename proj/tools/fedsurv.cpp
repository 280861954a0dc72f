// fedsurv: generate synthetic federated survival data, train and
// cross-validate the scheme zoo, and demonstrate what summary-sharing
// federations leak. Every run writes a manifest.json next to its outputs
// recording the exact configuration, seed and versions that produced them.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fedsurv/datagen.hpp"
#include "fedsurv/errors.hpp"
#include "fedsurv/evaluation.hpp"
#include "fedsurv/io.hpp"
#include "fedsurv/schemes.hpp"
#include "fedsurv/survival.hpp"
#include "fedsurv/threading.hpp"
#include "fedsurv/webdisco.hpp"

namespace {

using nlohmann::json;

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  int threads = 0;  // 0 = FEDSURV_THREADS or 1
};

// Scheme knobs shared by `train` and `cv`.
struct SchemeOptions {
  int rounds = 5000;
  int batch_size = 100;
  std::string batch_mode = "replacement";
  double learning_rate = 1e-3;
  int local_steps = 1;
  int loss_trace_stride = 0;
  double bin_width = 0.0;  // 0 = unset: grid of observed times
  bool weighted_bce = false;
  std::vector<int> phi_layers;
  int newton_max_iterations = 100;
  double newton_tolerance = 1e-7;

  void register_on(CLI::App* cmd) {
    cmd->add_option("--rounds", rounds, "communication rounds for the minibatch schemes");
    cmd->add_option("--batch-size", batch_size, "global minibatch size");
    cmd->add_option("--batch-mode", batch_mode, "replacement | epochs")
        ->check(CLI::IsMember({"replacement", "epochs"}));
    cmd->add_option("--lr", learning_rate, "Adam learning rate");
    cmd->add_option("--local-steps", local_steps, "local optimizer steps per round (>1 = federated averaging)");
    cmd->add_option("--trace-every", loss_trace_stride, "record the training loss every N rounds (0 = never)");
    cmd->add_option("--bin-width", bin_width, "DT-FL time quantization bin width (0 = distinct observed times)");
    cmd->add_flag("--weighted-bce", weighted_bce, "weight positive stacked samples by #neg/#pos");
    cmd->add_option("--phi-layers", phi_layers, "risk function MLP layer widths (empty = identity)");
    cmd->add_option("--newton-iters", newton_max_iterations, "Newton iteration cap for POOL/LOCAL/ENS");
    cmd->add_option("--newton-tol", newton_tolerance, "Newton gradient max-norm tolerance");
  }

  fedsurv::SchemeConfig to_config(fedsurv::Scheme scheme, std::uint64_t seed) const {
    fedsurv::SchemeConfig config;
    config.scheme = scheme;
    config.rounds = rounds;
    config.batch_size = batch_size;
    config.batch_mode =
        batch_mode == "epochs" ? fedsurv::BatchMode::WithoutReplacementEpochs : fedsurv::BatchMode::WithReplacement;
    config.adam.learning_rate = learning_rate;
    config.local_steps = local_steps;
    config.loss_trace_stride = loss_trace_stride;
    if (bin_width > 0.0) {
      config.bin_width = bin_width;
    }
    config.weighted_bce = weighted_bce;
    config.phi_layers = phi_layers;
    config.newton.max_iterations = newton_max_iterations;
    config.newton.gradient_tolerance = newton_tolerance;
    config.seed = seed;
    return config;
  }

  json echo() const {
    return json{{"rounds", rounds},
                {"batch_size", batch_size},
                {"batch_mode", batch_mode},
                {"lr", learning_rate},
                {"local_steps", local_steps},
                {"trace_every", loss_trace_stride},
                {"bin_width", bin_width},
                {"weighted_bce", weighted_bce},
                {"phi_layers", phi_layers},
                {"newton_iters", newton_max_iterations},
                {"newton_tol", newton_tolerance}};
  }
};

fedsurv::Scheme parse_scheme_or_throw(const std::string& name) {
  const auto scheme = fedsurv::parse_scheme(name);
  if (!scheme) {
    throw fedsurv::ConfigError("unknown scheme '" + name + "'; expected POOL, LOCAL, ENS, MINI, N-FL or DT-FL");
  }
  return *scheme;
}

json base_manifest(const std::string& command, const GlobalOptions& global, const CLI::App& app) {
  json manifest;
  manifest["command"] = command;
  manifest["version"] = FEDSURV_VERSION;
  manifest["compiler"] = __VERSION__;
  manifest["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION);
  manifest["seed"] = global.seed;
  manifest["threads"] = fedsurv::resolve_threads(global.threads);
  manifest["config_file"] = nullptr;
  const CLI::Option* config_option = app.get_config_ptr();
  const std::string config_path =
      (config_option != nullptr && config_option->count() > 0) ? config_option->as<std::string>() : "";
  if (!config_path.empty()) {
    std::ifstream in(config_path, std::ios::binary);
    std::ostringstream content;
    content << in.rdbuf();
    manifest["config_file"] = json{{"path", config_path}, {"content", std::move(content).str()}};
  }
  return manifest;
}

void write_manifest(json manifest, const std::filesystem::path& out_dir,
                    const std::chrono::steady_clock::time_point& started) {
  manifest["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  fedsurv::atomic_write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

json comm_json(const fedsurv::CommMeter& comm) {
  return json{{"rounds", comm.rounds}, {"values_down", comm.values_down}, {"values_up", comm.values_up}};
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

fedsurv::SyntheticConfig synthetic_config(int centers, int per_center, int covariates, const std::string& split,
                                          double beta_norm, const std::string& censoring, std::uint64_t seed) {
  fedsurv::SyntheticConfig config;
  config.num_centers = centers;
  config.per_center = per_center;
  config.num_covariates = covariates;
  config.split = split == "sorted" ? fedsurv::SplitKind::SortedByEndpoint : fedsurv::SplitKind::Uniform;
  config.beta_norm = beta_norm;
  config.censoring =
      censoring == "baseline-median" ? fedsurv::CensoringBound::BaselineMedian : fedsurv::CensoringBound::PerIndividual;
  config.seed = seed;
  return config;
}

int run_generate(const GlobalOptions& global, const CLI::App& app, int centers, int per_center, int covariates,
                 const std::string& split, double beta_norm, const std::string& censoring) {
  const auto started = std::chrono::steady_clock::now();
  const fedsurv::SyntheticData generated =
      fedsurv::generate_synthetic(synthetic_config(centers, per_center, covariates, split, beta_norm, censoring,
                                                   global.seed));
  std::vector<std::string> labels;
  for (int k = 0; k < centers; ++k) {
    labels.push_back("c" + std::to_string(k));
  }
  const std::filesystem::path out_dir(global.out_dir);
  fedsurv::write_dataset_csv(out_dir / "dataset.csv", generated.data, generated.partition, labels);

  json manifest = base_manifest("generate", global, app);
  manifest["options"] = json{{"centers", centers},       {"per_center", per_center}, {"covariates", covariates},
                             {"split", split},           {"beta_norm", beta_norm},   {"censoring", censoring}};
  manifest["censored_fraction"] = generated.censored_fraction;
  manifest["true_beta"] = to_std(generated.true_beta);
  manifest["outputs"] = json::array({"dataset.csv"});
  write_manifest(std::move(manifest), out_dir, started);

  std::cout << "wrote " << (out_dir / "dataset.csv").string() << ": " << generated.data.size() << " individuals, "
            << covariates << " covariates, " << centers << " centers, "
            << fedsurv::format_fixed(100.0 * generated.censored_fraction, 1) << "% censored\n";
  return 0;
}

json model_json(const fedsurv::TrainedModel& model) {
  json out;
  out["scheme"] = std::string(fedsurv::scheme_name(model.scheme()));
  if (const auto* linear = model.linear()) {
    out["type"] = "linear";
    out["beta"] = to_std(linear->beta);
  } else if (const auto* discrete = model.discrete()) {
    out["type"] = "discrete";
    out["alpha"] = to_std(discrete->alpha);
    out["beta"] = to_std(discrete->beta);
    out["theta"] = to_std(discrete->theta);
    out["pos_weight"] = model.pos_weight_used;
    out["grid_size"] = model.grid_size_used;
  } else {
    out["type"] = "per-center";
    json betas = json::array();
    for (const fedsurv::LinearRiskModel& m : *model.per_center()) {
      betas.push_back(to_std(m.beta));
    }
    out["models"] = std::move(betas);
  }
  return out;
}

int run_train(const GlobalOptions& global, const CLI::App& app, const std::string& data_path,
              const std::string& scheme_name_str, const SchemeOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  const fedsurv::LoadedData loaded = fedsurv::load_dataset_csv(data_path);
  const fedsurv::Scheme scheme = parse_scheme_or_throw(scheme_name_str);
  const fedsurv::SchemeConfig config = options.to_config(scheme, global.seed);
  const fedsurv::TrainedModel model = fedsurv::train_scheme(config, loaded.data, loaded.partition);

  const std::filesystem::path out_dir(global.out_dir);
  json model_out = model_json(model);
  model_out["comm"] = comm_json(model.comm);
  model_out["loss_trace"] = model.loss_trace;
  fedsurv::atomic_write_file(out_dir / "model.json", model_out.dump(2) + "\n");

  json manifest = base_manifest("train", global, app);
  manifest["options"] = options.echo();
  manifest["options"]["data"] = data_path;
  manifest["options"]["scheme"] = scheme_name_str;
  manifest["comm"] = comm_json(model.comm);
  manifest["outputs"] = json::array({"model.json"});
  write_manifest(std::move(manifest), out_dir, started);

  std::cout << "trained " << scheme_name_str << " on " << loaded.data.size() << " individuals ("
            << loaded.partition.num_centers() << " centers); wrote " << (out_dir / "model.json").string() << "\n";
  return 0;
}

int run_cv_command(const GlobalOptions& global, const CLI::App& app, const std::string& data_path,
                   const std::vector<std::string>& scheme_names, const std::string& mode, int folds, int repeats,
                   const SchemeOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  const fedsurv::LoadedData loaded = fedsurv::load_dataset_csv(data_path);

  std::vector<fedsurv::SchemeConfig> configs;
  for (const std::string& name : scheme_names) {
    configs.push_back(options.to_config(parse_scheme_or_throw(name), global.seed));
  }
  fedsurv::CvPlan plan;
  plan.mode = mode == "out-of-center" ? fedsurv::CvMode::OutOfCenter : fedsurv::CvMode::PerCenterFolds;
  plan.folds = folds;
  plan.repeats = repeats;
  plan.seed = global.seed;

  const std::vector<fedsurv::CvRow> rows =
      fedsurv::run_cv(loaded.data, loaded.partition, configs, plan, loaded.center_labels, global.threads);

  const std::filesystem::path out_dir(global.out_dir);
  fedsurv::write_cv_results_csv(out_dir / "results.csv", rows);

  // Per-scheme aggregates for the manifest and the console.
  json summary = json::object();
  for (const std::string& name : scheme_names) {
    double total = 0.0;
    int ok = 0;
    int failed = 0;
    for (const fedsurv::CvRow& row : rows) {
      if (row.scheme != name) {
        continue;
      }
      if (row.failed) {
        ++failed;
      } else {
        total += row.c_index;
        ++ok;
      }
    }
    json entry{{"folds", ok + failed}, {"failed", failed}};
    entry["mean_c_index"] = ok > 0 ? json(total / ok) : json();
    summary[name] = std::move(entry);
  }

  json manifest = base_manifest("cv", global, app);
  manifest["options"] = options.echo();
  manifest["options"]["data"] = data_path;
  manifest["options"]["schemes"] = scheme_names;
  manifest["options"]["mode"] = mode;
  manifest["options"]["folds"] = folds;
  manifest["options"]["repeats"] = repeats;
  manifest["summary"] = summary;
  manifest["outputs"] = json::array({"results.csv"});
  write_manifest(std::move(manifest), out_dir, started);

  std::cout << "wrote " << (out_dir / "results.csv").string() << " (" << rows.size() << " rows)\n";
  for (const auto& [name, stats] : summary.items()) {
    std::cout << "  " << name << ": mean c-index "
              << (stats["mean_c_index"].is_null() ? std::string("n/a")
                                                  : fedsurv::format_fixed(stats["mean_c_index"].get<double>(), 4))
              << " over " << stats["folds"] << " folds (" << stats["failed"] << " failed)\n";
  }
  return 0;
}

int run_attack_demo(const GlobalOptions& global, const CLI::App& app, int centers, int per_center, int covariates,
                    int rounds, double learning_rate) {
  const auto started = std::chrono::steady_clock::now();
  const fedsurv::SyntheticData generated = fedsurv::generate_synthetic(
      synthetic_config(centers, per_center, covariates, "uniform", 2.0, "per-individual", global.seed));

  const std::vector<fedsurv::Center> center_holders = fedsurv::make_centers(generated.data, generated.partition);
  std::vector<const fedsurv::Dataset*> parts;
  for (const fedsurv::Center& center : center_holders) {
    parts.push_back(&center.data());
  }
  // Continuous synthetic times are almost surely distinct, so the grid of
  // observed times makes every event a singleton departure somewhere.
  const fedsurv::TimeGrid grid = fedsurv::build_time_grid(parts, std::nullopt);
  const fedsurv::WebDiscoTrainResult run =
      fedsurv::run_webdisco_gradient_descent(parts, grid, rounds, learning_rate);

  int reconstructed = 0;
  int unmatched = 0;
  double worst_error = 0.0;
  for (std::size_t k = 0; k < center_holders.size(); ++k) {
    const fedsurv::Dataset& local = center_holders[k].data();
    const auto found = fedsurv::telescoping_attack(run.center_streams[k]);
    for (const fedsurv::ReconstructedIndividual& r : found) {
      // Ground truth: the single row of this center observed at that grid time.
      int match = -1;
      int hits = 0;
      for (int i = 0; i < local.size(); ++i) {
        if (local.time(i) == grid.time(r.grid_index)) {
          match = i;
          ++hits;
        }
      }
      if (hits != 1) {
        ++unmatched;
        continue;
      }
      ++reconstructed;
      worst_error =
          std::max(worst_error, (r.covariates - Eigen::VectorXd(local.covariates(match))).lpNorm<Eigen::Infinity>());
    }
    std::cout << "center c" << k << ": " << found.size() << " individuals reconstructed from " << rounds
              << " observed rounds\n";
  }
  std::cout << "total: " << reconstructed << " reconstructions, max abs error "
            << fedsurv::format_double(worst_error) << ", " << unmatched
            << " not matching any individual (should be 0)\n";
  std::cout << "traffic: " << run.comm.values_up << " values uploaded ("
            << centers << " centers x " << rounds << " rounds x T*(P+2) = "
            << static_cast<std::int64_t>(centers) * rounds * grid.size() * (covariates + 2) << " expected)\n";

  json manifest = base_manifest("attack-demo", global, app);
  manifest["options"] = json{{"centers", centers},
                             {"per_center", per_center},
                             {"covariates", covariates},
                             {"rounds", rounds},
                             {"lr", learning_rate}};
  manifest["reconstructed"] = reconstructed;
  manifest["unmatched"] = unmatched;
  manifest["max_abs_error"] = worst_error;
  manifest["comm"] = comm_json(run.comm);
  manifest["outputs"] = json::array();
  write_manifest(std::move(manifest), std::filesystem::path(global.out_dir), started);
  return 0;
}

int run_appendix_check(const GlobalOptions& global, const CLI::App& app, int individuals, int covariates,
                       std::vector<double> shifts) {
  const auto started = std::chrono::steady_clock::now();
  if (shifts.empty()) {
    shifts = {-5.0, -10.0, -15.0, -20.0};
  }
  const fedsurv::SyntheticData generated = fedsurv::generate_synthetic(
      synthetic_config(1, individuals, covariates, "uniform", 2.0, "per-individual", global.seed));

  std::cout << "shift      worst contribution gap\n";
  std::vector<double> gaps;
  bool decreasing = true;
  for (const double shift : shifts) {
    const double gap = fedsurv::event_contribution_gap(generated.data, generated.true_beta, shift);
    if (!gaps.empty() && gap >= gaps.back()) {
      decreasing = false;
    }
    gaps.push_back(gap);
    std::cout << fedsurv::format_fixed(shift, 1) << "      " << fedsurv::format_double(gap) << "\n";
  }
  std::cout << (decreasing ? "gap strictly decreases as the shift grows more negative\n"
                           : "gap is NOT strictly decreasing\n");

  json manifest = base_manifest("appendix-a-check", global, app);
  manifest["options"] = json{{"individuals", individuals}, {"covariates", covariates}, {"shifts", shifts}};
  manifest["gaps"] = gaps;
  manifest["strictly_decreasing"] = decreasing;
  manifest["outputs"] = json::array();
  write_manifest(std::move(manifest), std::filesystem::path(global.out_dir), started);
  return decreasing ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated survival analysis: synthetic data, scheme training, cross-validation, and"
               " a demonstration of what per-time risk summaries leak"};
  app.require_subcommand(1);
  // Global flags (--seed/--out/--threads) may follow the subcommand.
  app.fallthrough();
  app.set_config("--config", "", "read options from an INI/TOML file (sections per subcommand)");

  GlobalOptions global;
  app.add_option("--seed", global.seed, "seed for everything derived in this run")->capture_default_str();
  app.add_option("--out", global.out_dir, "output directory")->capture_default_str();
  app.add_option("--threads", global.threads, "worker threads (0 = FEDSURV_THREADS or 1)")->capture_default_str();

  // generate
  auto* generate = app.add_subcommand("generate", "write a synthetic federated survival dataset");
  int gen_centers = 5;
  int gen_per_center = 1000;
  int gen_covariates = 200;
  std::string gen_split = "uniform";
  double gen_beta_norm = 2.0;
  std::string gen_censoring = "per-individual";
  generate->add_option("--centers", gen_centers, "number of centers")->capture_default_str();
  generate->add_option("--per-center", gen_per_center, "individuals per center")->capture_default_str();
  generate->add_option("--covariates", gen_covariates, "covariate count")->capture_default_str();
  generate->add_option("--split", gen_split, "uniform | sorted")->check(CLI::IsMember({"uniform", "sorted"}));
  generate->add_option("--beta-norm", gen_beta_norm, "norm of the drawn true coefficients")->capture_default_str();
  generate->add_option("--censoring", gen_censoring, "per-individual | baseline-median")
      ->check(CLI::IsMember({"per-individual", "baseline-median"}));

  // train
  auto* train = app.add_subcommand("train", "fit one scheme on a dataset CSV");
  std::string train_data;
  std::string train_scheme = "POOL";
  SchemeOptions train_options;
  train->add_option("--data", train_data, "dataset CSV path")->required();
  train->add_option("--scheme", train_scheme, "POOL | LOCAL | ENS | MINI | N-FL | DT-FL")->capture_default_str();
  train_options.register_on(train);

  // cv
  auto* cv = app.add_subcommand("cv", "cross-validate schemes on a dataset CSV");
  std::string cv_data;
  std::vector<std::string> cv_schemes;
  std::string cv_mode = "per-center-folds";
  int cv_folds = 5;
  int cv_repeats = 1;
  SchemeOptions cv_options;
  cv->add_option("--data", cv_data, "dataset CSV path")->required();
  cv->add_option("--scheme", cv_schemes, "scheme to evaluate (repeatable)")->required();
  cv->add_option("--mode", cv_mode, "per-center-folds | out-of-center")
      ->check(CLI::IsMember({"per-center-folds", "out-of-center"}));
  cv->add_option("--folds", cv_folds, "folds per center")->capture_default_str();
  cv->add_option("--repeats", cv_repeats, "repetitions with reshuffled folds")->capture_default_str();
  cv_options.register_on(cv);

  // attack-demo
  auto* attack = app.add_subcommand("attack-demo",
                                    "reconstruct individuals from per-time risk summaries a curious server sees");
  int atk_centers = 3;
  int atk_per_center = 30;
  int atk_covariates = 5;
  int atk_rounds = 3;
  double atk_lr = 0.05;
  attack->add_option("--centers", atk_centers)->capture_default_str();
  attack->add_option("--per-center", atk_per_center)->capture_default_str();
  attack->add_option("--covariates", atk_covariates)->capture_default_str();
  attack->add_option("--rounds", atk_rounds, "observed federation rounds")->capture_default_str();
  attack->add_option("--lr", atk_lr, "gradient descent step size")->capture_default_str();

  // appendix-a-check
  auto* appendix = app.add_subcommand(
      "appendix-a-check", "verify the discrete-time contributions approach the continuous-time ones");
  int apx_individuals = 20;
  int apx_covariates = 5;
  std::vector<double> apx_shifts;
  appendix->add_option("--individuals", apx_individuals)->capture_default_str();
  appendix->add_option("--covariates", apx_covariates)->capture_default_str();
  appendix->add_option("--shifts", apx_shifts, "logit shifts to evaluate (default -5 -10 -15 -20)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help/version exit 0; anything else is a configuration problem
  }

  try {
    if (app.got_subcommand(generate)) {
      return run_generate(global, app, gen_centers, gen_per_center, gen_covariates, gen_split, gen_beta_norm,
                          gen_censoring);
    }
    if (app.got_subcommand(train)) {
      return run_train(global, app, train_data, train_scheme, train_options);
    }
    if (app.got_subcommand(cv)) {
      return run_cv_command(global, app, cv_data, cv_schemes, cv_mode, cv_folds, cv_repeats, cv_options);
    }
    if (app.got_subcommand(attack)) {
      return run_attack_demo(global, app, atk_centers, atk_per_center, atk_covariates, atk_rounds, atk_lr);
    }
    if (app.got_subcommand(appendix)) {
      return run_appendix_check(global, app, apx_individuals, apx_covariates, apx_shifts);
    }
  } catch (const fedsurv::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const fedsurv::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const fedsurv::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
