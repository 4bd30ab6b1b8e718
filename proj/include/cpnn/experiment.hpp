#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cpnn/prequential.hpp"
#include "cpnn/progressive.hpp"
#include "cpnn/streamgen.hpp"

namespace cpnn {

struct ExperimentConfig {
  std::string scenario = "s1+,s1-";
  std::vector<Mode> modes = {Mode::cpnn, Mode::clstm, Mode::mclstm};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  int batch_size = 128;
  int window = 10;
  int epochs = 10;
  int hidden = 50;
  double lr = 0.1;
  int points_per_concept = 50000;
  double step_max = WalkConfig{}.step_max;
  double alpha = 0.05;
  int workers = 1;
  std::string out_dir = "results";

  // Substream seeds: every stochastic consumer hashes the root seed with
  // its own label, so all modes under one root seed see the same stream
  // (paired comparison) while model initializations stay mode-specific.
  std::uint64_t generator_seed(std::uint64_t root) const;
  std::uint64_t model_seed(std::uint64_t root, Mode mode) const;

  // The config in the key=value form load/parse round-trip; the same text
  // is embedded as a '#' comment header in every output file.
  std::string serialize() const;

  // Throws ConfigError on inconsistent values (W > B, E < 1, empty or
  // duplicate seeds, bad scenario, ...).
  void validate() const;
};

// key=value lines, blank lines and '#' comments ignored; unknown keys
// rejected.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::filesystem::path& path);

// "3", "1,2,9", "1..10" (inclusive) or a comma mix of those forms.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);
std::vector<Mode> parse_mode_list(const std::string& text);

// One (seed, mode) experiment cell: regenerates the scenario stream for
// the seed, runs the prequential loop, returns the records.
std::vector<BatchRecord> run_cell(const ExperimentConfig& cfg, std::uint64_t seed, Mode mode);

// One case-accuracy per (mode, concept, case, seed), the summary.csv row.
struct SummaryRow {
  Mode mode = Mode::cpnn;
  std::string scenario;
  int concept_id = 0;
  CaseId case_id = CaseId::whole;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
};

// Runs every (seed x mode) cell, cells in parallel when cfg.workers > 1,
// and writes one record CSV per cell plus summary.csv and report.txt
// under cfg.out_dir.  All outputs are byte-stable across reruns.
void run_experiment(const ExperimentConfig& cfg);

// Plain-text result table: per concept (2nd onward) and case, `mean, std`
// cells per mode with best/worst/non-normality markers from the
// comparison protocol.  config_header is reproduced at the top.
std::string render_report(const std::vector<SummaryRow>& rows, const std::string& config_header,
                          double alpha);

// Re-derives a report from an existing summary.csv.
void write_report_from_summary(const std::filesystem::path& summary_csv,
                               const std::filesystem::path& report_path, double alpha);

// CSV writers and readers shared by run, report and the tests.
void write_records_csv(std::ostream& out, const ExperimentConfig& cfg, std::uint64_t seed,
                       Mode mode, std::span<const BatchRecord> records);
void write_summary_csv(std::ostream& out, const ExperimentConfig& cfg,
                       std::span<const SummaryRow> rows);
std::vector<SummaryRow> read_summary_csv(std::istream& in);

// Shortest decimal form that parses back to exactly the same double; all
// floating-point output goes through this so files are byte-stable.
std::string format_double(double x);

// key=value text as a '#' comment block for output-file headers.
std::string comment_header(const std::string& text);

}  // namespace cpnn
