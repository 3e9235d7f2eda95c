#include "cli.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "CLI11.hpp"
#include "pfcast/config.hpp"
#include "pfcast/csv.hpp"
#include "pfcast/error.hpp"
#include "pfcast/pipeline.hpp"
#include "pfcast/synthetic.hpp"

namespace pfcast::cli {

namespace {

namespace fs = std::filesystem;

std::string fixed(double v, int digits = 6) {
  if (is_missing(v)) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void print_report_row(std::ostream& out, const RunReport& r) {
  out << r.model << ": train_rmse " << fixed(r.train_rmse) << ", val_rmse " << fixed(r.val_rmse);
  if (!is_missing(r.test_rmse)) out << ", test_rmse " << fixed(r.test_rmse);
  out << " (" << fixed(r.wall_seconds, 1) << " s)\n";
}

int synth(const fs::path& dir, std::uint64_t seed, int months, int shops, int items, std::ostream& out) {
  SyntheticSpec spec;
  spec.seed = seed;
  spec.n_months = months;
  spec.n_shops = shops;
  spec.n_items = items;
  if (months < 4) throw UsageError("synth: --months must be >= 4");
  const auto data = generate(spec);
  write_dataset(data, dir);

  RunConfig cfg;
  cfg.paths = {".", "cache", "out"};
  cfg.split = SplitSpec{0, months - 3, months - 2, months - 1};
  cfg.features.burn_in_blocks = std::min(cfg.features.burn_in_blocks, months - 3);
  cfg.seed = seed;
  auto j = cfg.to_json();
  j.erase("jobs");
  j["gbt"].erase("seed");
  j["lstm"].erase("seed");
  j["tuner"].erase("seed");
  write_file(dir / "config.json", j.dump(2) + "\n");
  out << "wrote " << data.records.size() << " transactions, " << data.test_ids.size() << " test rows and "
      << (dir / "config.json").string() << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const std::map<std::string, std::string>& env) {
  CLI::App app{"Monthly retail sales forecasting pipeline", "pfcast"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> sets;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--set", sets, "Override a config key, e.g. --set gbt.eta=0.1 (repeatable)");
  app.add_option("--jobs", jobs, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed, "Global random seed");

  auto* synth_cmd = app.add_subcommand("synth", "Write a seeded synthetic dataset and matching config");
  std::string synth_out;
  int months = 24, shops = 20, items = 50;
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--months", months, "Number of months");
  synth_cmd->add_option("--shops", shops, "Number of shops");
  synth_cmd->add_option("--items", items, "Number of items");

  auto* ingest_cmd = app.add_subcommand("ingest", "Clean raw files and build the monthly grid cache");
  auto* features_cmd = app.add_subcommand("features", "Build the feature matrix cache");
  auto* train_cmd = app.add_subcommand("train", "Train one model: gbt, arima or lstm");
  std::string train_model;
  train_cmd->add_option("model", train_model, "gbt | arima | lstm")->required();
  auto* predict_cmd = app.add_subcommand("predict", "Write submission.csv from a trained model");
  std::string predict_model = "gbt";
  predict_cmd->add_option("--model", predict_model, "gbt | arima | lstm");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Print the RMSE of a model on one partition");
  std::string eval_model = "gbt", eval_split = "validation";
  evaluate_cmd->add_option("--model", eval_model, "gbt | arima | lstm | mean");
  evaluate_cmd->add_option("--split", eval_split, "train | validation | test");
  auto* tune_cmd = app.add_subcommand("tune", "Random search over GBT parameters");
  auto* compare_cmd = app.add_subcommand("compare", "Train all three models and print the comparison table");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "pfcast: " << e.what() << "\n";
    return static_cast<int>(ExitCode::usage);
  }

  try {
    if (synth_cmd->parsed()) {
      return synth(synth_out, seed.value_or(0), months, shops, items, out);
    }

    ConfigSources src;
    if (!config_path.empty()) src.file = config_path;
    src.env = env;
    src.sets = sets;
    src.seed = seed;
    src.jobs = jobs;
    const RunConfig cfg = load_config(src);
    if (cfg.jobs > 0) omp_set_num_threads(cfg.jobs);
    Pipeline pipe(cfg);

    if (ingest_cmd->parsed()) {
      const auto s = pipe.ingest();
      out << "rows read " << s.report.rows_read << ", kept " << s.report.rows_kept << ", dropped "
          << s.report.rows_dropped << ", prices imputed " << s.report.values_imputed << ", clipped months "
          << s.report.clip_events << "\n";
      out << "grid cells " << s.grid_cells << (s.has_test_labels ? " (test month labelled)" : "") << " -> "
          << (cfg.paths.cache_dir / "grid.csv").string() << "\n";
    } else if (features_cmd->parsed()) {
      const auto names = pipe.features();
      out << names.size() << " feature columns -> " << (cfg.paths.cache_dir / "features.csv").string() << "\n";
      for (const auto& n : names) out << "  " << n << "\n";
    } else if (train_cmd->parsed()) {
      const auto model = parse_model(train_model, false);
      try {
        RunReport r = model == Model::gbt     ? pipe.train_gbt()
                      : model == Model::arima ? pipe.train_arima()
                                              : pipe.train_lstm();
        print_report_row(out, r);
        if (model == Model::arima) {
          out << "fallback rate " << fixed(r.params.value("fallback_rate", 0.0), 4) << " -> "
              << (cfg.paths.output_dir / "arima_diagnostics.csv").string() << "\n";
        }
        if (model == Model::gbt) {
          out << "top features by split count:";
          for (const auto& f : r.params["importance_top"]) {
            out << " " << f[0].get<std::string>() << "=" << f[1].get<int>();
          }
          out << "\n";
        }
      } catch (const Error& e) {
        const std::string msg = train_model + ": " + e.what();
        if (dynamic_cast<const NumericError*>(&e)) throw NumericError(msg);
        if (dynamic_cast<const DataError*>(&e)) throw DataError(msg);
        throw Error(msg, e.code());
      }
    } else if (predict_cmd->parsed()) {
      const auto path = pipe.predict(parse_model(predict_model, false));
      out << "wrote " << path.string() << "\n";
    } else if (evaluate_cmd->parsed()) {
      const auto model = parse_model(eval_model, true);
      const auto part = parse_partition(eval_split);
      out << model_label(model) << " " << eval_split << " rmse " << fixed(pipe.evaluate(model, part), 6) << "\n";
    } else if (tune_cmd->parsed()) {
      const auto t = pipe.tune();
      const auto& w = t.search.winner();
      std::size_t failed = 0;
      for (const auto& trial : t.search.trials) failed += trial.ok() ? 0 : 1;
      out << t.search.trials.size() << " trials (" << failed << " failed) -> " << cfg.trial_log_path().string()
          << "\n";
      out << "best trial " << w.index << ": val_rmse " << fixed(w.val_rmse) << "\n";
      out << "best params " << t.best.to_json().dump() << " -> " << (cfg.paths.output_dir / "best_params.json").string()
          << "\n";
    } else if (compare_cmd->parsed()) {
      const auto reports = pipe.compare();
      out << render_table(reports);
    }
    return 0;
  } catch (const Error& e) {
    err << "pfcast: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    err << "pfcast: " << e.what() << "\n";
    return static_cast<int>(ExitCode::data);
  }
}

}  // namespace pfcast::cli
