// Experiment driver: `run` sweeps (seed x mode) cells and writes records,
// summary and report; `report` re-derives the table from a summary.csv;
// `gen` dumps one generated stream as CSV.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "cpnn/errors.hpp"
#include "cpnn/experiment.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::string scenario, modes, seeds, out;
  int batch_size = 0, window = 0, epochs = 0, hidden = 0, points = 0, workers = 0;
  double lr = 0.0, step_max = 0.0, alpha = 0.0;

  CLI::Option *o_scenario = nullptr, *o_modes = nullptr, *o_seeds = nullptr, *o_out = nullptr;
  CLI::Option *o_batch = nullptr, *o_window = nullptr, *o_epochs = nullptr, *o_hidden = nullptr;
  CLI::Option *o_points = nullptr, *o_workers = nullptr;
  CLI::Option *o_lr = nullptr, *o_step = nullptr, *o_alpha = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key=value config file; flags override it");
    o_scenario = cmd->add_option("--scenario", scenario, "comma list of concepts, e.g. s1+,s1-");
    o_modes = cmd->add_option("--modes", modes, "architectures to run: cpnn,clstm,mclstm");
    o_seeds = cmd->add_option("--seeds", seeds, "seed list: 1..10 or 1,2,7");
    o_batch = cmd->add_option("--batch-size", batch_size, "points per training batch");
    o_window = cmd->add_option("--window", window, "sliding window length");
    o_epochs = cmd->add_option("--epochs", epochs, "training epochs per batch");
    o_lr = cmd->add_option("--lr", lr, "SGD learning rate");
    o_hidden = cmd->add_option("--hidden", hidden, "LSTM hidden size");
    o_points = cmd->add_option("--points-per-concept", points, "stream length per concept");
    o_step = cmd->add_option("--step-max", step_max, "random-walk maximum step size");
    o_out = cmd->add_option("--out", out, "output directory");
    o_workers = cmd->add_option("--workers", workers, "parallel (seed x mode) cells");
    o_alpha = cmd->add_option("--alpha", alpha, "significance level for the report");
  }

  cpnn::ExperimentConfig resolve() const {
    cpnn::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = cpnn::load_config_file(config_path);
    if (*o_scenario) cfg.scenario = scenario;
    if (*o_modes) cfg.modes = cpnn::parse_mode_list(modes);
    if (*o_seeds) cfg.seeds = cpnn::parse_seed_list(seeds);
    if (*o_batch) cfg.batch_size = batch_size;
    if (*o_window) cfg.window = window;
    if (*o_epochs) cfg.epochs = epochs;
    if (*o_lr) cfg.lr = lr;
    if (*o_hidden) cfg.hidden = hidden;
    if (*o_points) cfg.points_per_concept = points;
    if (*o_step) cfg.step_max = step_max;
    if (*o_out) cfg.out_dir = out;
    if (*o_workers) cfg.workers = workers;
    if (*o_alpha) cfg.alpha = alpha;
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streaming continual-learning experiments (progressive LSTM columns)"};
  app.require_subcommand(1);

  CLI::App* run_cmd = app.add_subcommand("run", "run the (seed x mode) experiment grid");
  Overrides run_opts;
  run_opts.attach(run_cmd);

  CLI::App* report_cmd = app.add_subcommand("report", "rebuild report.txt from a summary.csv");
  std::string summary_path, report_out = "report.txt";
  double report_alpha = 0.05;
  report_cmd->add_option("summary", summary_path, "summary.csv produced by run")->required();
  report_cmd->add_option("--out", report_out, "report file to write");
  report_cmd->add_option("--alpha", report_alpha, "significance level");

  CLI::App* gen_cmd = app.add_subcommand("gen", "dump one generated stream as CSV");
  Overrides gen_opts;
  gen_opts.attach(gen_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run_cmd->parsed()) {
      cpnn::run_experiment(run_opts.resolve());
    } else if (report_cmd->parsed()) {
      cpnn::write_report_from_summary(summary_path, report_out, report_alpha);
    } else if (gen_cmd->parsed()) {
      cpnn::ExperimentConfig cfg = gen_opts.resolve();
      cfg.validate();
      if (cfg.seeds.size() != 1) {
        throw cpnn::ConfigError("gen writes one stream; give exactly one seed");
      }
      cpnn::WalkConfig wc;
      wc.step_max = cfg.step_max;
      wc.seed = cfg.generator_seed(cfg.seeds[0]);
      cpnn::DriftScenario scenario{cpnn::parse_scenario(cfg.scenario), cfg.points_per_concept};
      std::vector<cpnn::LabeledPoint> stream = cpnn::generate_scenario(scenario, wc);
      // for gen, --out names the CSV file rather than a directory
      std::string path = *gen_opts.o_out ? cfg.out_dir : "stream.csv";
      std::ofstream out(path, std::ios::binary);
      if (!out) throw cpnn::ConfigError("cannot write " + path);
      out << cpnn::comment_header(cfg.serialize());
      cpnn::write_stream_csv(out, stream);
    }
  } catch (const cpnn::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const cpnn::GenerationError& e) {
    std::cerr << "generation failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
