#include "cpnn/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <system_error>
#include <tuple>
#include <cmath>
#include <cstdlib>

#include "cpnn/errors.hpp"
#include "cpnn/stats.hpp"

namespace cpnn {

namespace fs = std::filesystem;

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  size_t pos = 0;
  while (pos <= s.size()) {
    size_t next = s.find(sep, pos);
    if (next == std::string::npos) next = s.size();
    parts.push_back(s.substr(pos, next - pos));
    pos = next + 1;
  }
  return parts;
}

std::uint64_t parse_u64(const std::string& text, const char* what) {
  std::uint64_t v = 0;
  std::string t = trim(text);
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ConfigError(std::string("bad ") + what + " '" + text + "'");
  }
  return v;
}

int parse_int(const std::string& text, const char* what) {
  int v = 0;
  std::string t = trim(text);
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ConfigError(std::string("bad ") + what + " '" + text + "'");
  }
  return v;
}

double parse_double(const std::string& text, const char* what) {
  std::string t = trim(text);
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || t.empty()) {
    throw ConfigError(std::string("bad ") + what + " '" + text + "'");
  }
  return v;
}

CaseId parse_case(const std::string& token) {
  for (CaseId c : all_cases) {
    if (token == case_name(c)) return c;
  }
  throw ConfigError("unknown case token '" + token + "'");
}

// display labels for the per-concept batch-index ranges
const char* case_range(CaseId c) {
  switch (c) {
    case CaseId::first50: return "[1,50]";
    case CaseId::first100: return "[1,100]";
    case CaseId::after100: return "(100,)";
    case CaseId::whole: return "[1,)";
  }
  return "?";
}

// compact cell number: 3 decimals, trailing zeros trimmed but one digit
// kept, leading zero dropped (0.960 -> ".96", 1.0 -> "1.0")
std::string fmt3(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", x);
  std::string s = buf;
  while (s.size() > 1 && s.back() == '0') s.pop_back();
  if (s.back() == '.') s += '0';
  if (s.size() > 2 && s[0] == '0' && s[1] == '.') s.erase(0, 1);
  return s;
}

}  // namespace

std::string comment_header(const std::string& text) {
  std::string out;
  for (const std::string& line : split(text, '\n')) {
    if (line.empty()) continue;
    out += "# " + line + "\n";
  }
  return out;
}

std::uint64_t ExperimentConfig::generator_seed(std::uint64_t root) const {
  return mix_seed(root, "gen:" + scenario);
}

std::uint64_t ExperimentConfig::model_seed(std::uint64_t root, Mode mode) const {
  return mix_seed(root, "model:" + mode_name(mode));
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream out;
  out << "scenario=" << scenario << '\n';
  out << "modes=";
  for (size_t i = 0; i < modes.size(); ++i) out << (i ? "," : "") << mode_name(modes[i]);
  out << '\n';
  out << "seeds=";
  for (size_t i = 0; i < seeds.size(); ++i) out << (i ? "," : "") << seeds[i];
  out << '\n';
  out << "batch_size=" << batch_size << '\n';
  out << "window=" << window << '\n';
  out << "epochs=" << epochs << '\n';
  out << "hidden=" << hidden << '\n';
  out << "lr=" << format_double(lr) << '\n';
  out << "points_per_concept=" << points_per_concept << '\n';
  out << "step_max=" << format_double(step_max) << '\n';
  out << "alpha=" << format_double(alpha) << '\n';
  out << "workers=" << workers << '\n';
  out << "out=" << out_dir << '\n';
  return out.str();
}

void ExperimentConfig::validate() const {
  std::vector<ClassificationFn> fns = parse_scenario(scenario);  // throws on bad tokens
  if (fns.empty()) throw ConfigError("scenario has no concepts");
  if (modes.empty()) throw ConfigError("no modes selected");
  if (std::set<Mode>(modes.begin(), modes.end()).size() != modes.size()) {
    throw ConfigError("duplicate modes");
  }
  if (seeds.empty()) throw ConfigError("no seeds given");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("duplicate seeds");
  }
  if (window < 1) throw ConfigError("window must be >= 1");
  if (batch_size < window) throw ConfigError("batch size must be >= window");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (hidden < 1) throw ConfigError("hidden size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
  if (points_per_concept < 1) throw ConfigError("points per concept must be >= 1");
  if (!(step_max > 0.0 && step_max < 1.0)) throw ConfigError("step_max must be in (0,1)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in (0,1)");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (out_dir.empty()) throw ConfigError("output directory not set");
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const std::string& part : split(text, ',')) {
    std::string t = trim(part);
    if (t.empty()) throw ConfigError("empty seed entry");
    size_t dots = t.find("..");
    if (dots == std::string::npos) {
      seeds.push_back(parse_u64(t, "seed"));
    } else {
      std::uint64_t lo = parse_u64(t.substr(0, dots), "seed range start");
      std::uint64_t hi = parse_u64(t.substr(dots + 2), "seed range end");
      if (hi < lo) throw ConfigError("seed range '" + t + "' is backwards");
      for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
    }
  }
  return seeds;
}

std::vector<Mode> parse_mode_list(const std::string& text) {
  std::vector<Mode> modes;
  for (const std::string& part : split(text, ',')) modes.push_back(parse_mode(trim(part)));
  return modes;
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  for (const std::string& raw : split(text, '\n')) {
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line without '=': " + line);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key == "scenario") cfg.scenario = value;
    else if (key == "modes") cfg.modes = parse_mode_list(value);
    else if (key == "seeds") cfg.seeds = parse_seed_list(value);
    else if (key == "batch_size") cfg.batch_size = parse_int(value, "batch_size");
    else if (key == "window") cfg.window = parse_int(value, "window");
    else if (key == "epochs") cfg.epochs = parse_int(value, "epochs");
    else if (key == "hidden") cfg.hidden = parse_int(value, "hidden");
    else if (key == "lr") cfg.lr = parse_double(value, "lr");
    else if (key == "points_per_concept") cfg.points_per_concept = parse_int(value, "points_per_concept");
    else if (key == "step_max") cfg.step_max = parse_double(value, "step_max");
    else if (key == "alpha") cfg.alpha = parse_double(value, "alpha");
    else if (key == "workers") cfg.workers = parse_int(value, "workers");
    else if (key == "out") cfg.out_dir = value;
    else throw ConfigError("unknown config key '" + key + "'");
  }
  return cfg;
}

ExperimentConfig load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::vector<BatchRecord> run_cell(const ExperimentConfig& cfg, std::uint64_t seed, Mode mode) {
  WalkConfig wc;
  wc.step_max = cfg.step_max;
  wc.seed = cfg.generator_seed(seed);
  DriftScenario scenario{parse_scenario(cfg.scenario), cfg.points_per_concept};
  std::vector<LabeledPoint> stream = generate_scenario(scenario, wc);

  ProgressiveNet net(mode, cfg.hidden, cfg.model_seed(seed, mode));
  RunParams params;
  params.batch_size = cfg.batch_size;
  params.window = cfg.window;
  params.epochs = cfg.epochs;
  params.lr = cfg.lr;
  return run_stream(net, stream, params);
}

void write_records_csv(std::ostream& out, const ExperimentConfig& cfg, std::uint64_t seed,
                       Mode mode, std::span<const BatchRecord> records) {
  out << comment_header(cfg.serialize());
  out << "seed,mode,scenario,concept,batch_index,n_points,accuracy\n";
  for (const BatchRecord& r : records) {
    out << seed << ',' << mode_name(mode) << ',' << cfg.scenario << ',' << r.concept_id << ','
        << r.batch_index << ',' << r.n_points << ',' << format_double(r.accuracy) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const ExperimentConfig& cfg,
                       std::span<const SummaryRow> rows) {
  out << comment_header(cfg.serialize());
  out << "mode,scenario,concept,case,seed,accuracy\n";
  for (const SummaryRow& r : rows) {
    out << mode_name(r.mode) << ',' << r.scenario << ',' << r.concept_id << ','
        << case_name(r.case_id) << ',' << r.seed << ',' << format_double(r.accuracy) << '\n';
  }
}

std::vector<SummaryRow> read_summary_csv(std::istream& in) {
  std::vector<SummaryRow> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {  // column header
      header_seen = true;
      continue;
    }
    std::vector<std::string> f = split(line, ',');
    // the scenario itself contains commas, so fields are: mode, scenario
    // tokens..., concept, case, seed, accuracy
    if (f.size() < 6) throw ConfigError("bad summary row: " + line);
    SummaryRow r;
    r.mode = parse_mode(f[0]);
    size_t ntok = f.size() - 5;
    r.scenario = f[1];
    for (size_t i = 2; i < 1 + ntok; ++i) r.scenario += "," + f[i];
    r.concept_id = parse_int(f[1 + ntok], "concept");
    r.case_id = parse_case(f[2 + ntok]);
    r.seed = parse_u64(f[3 + ntok], "seed");
    r.accuracy = parse_double(f[4 + ntok], "accuracy");
    rows.push_back(r);
  }
  return rows;
}

std::string render_report(const std::vector<SummaryRow>& rows, const std::string& config_header,
                          double alpha) {
  std::ostringstream out;
  out << comment_header(config_header);
  out << "#\n# cells are `mean, std` over seeds; ** best, _ _ worst, ~ sample not normal"
      << " (alpha=" << format_double(alpha) << ")\n\n";
  if (rows.empty()) {
    out << "no results\n";
    return out.str();
  }

  // modes in first-appearance order; seeds sorted; both shared by all cells
  std::vector<Mode> modes;
  for (const SummaryRow& r : rows) {
    if (std::find(modes.begin(), modes.end(), r.mode) == modes.end()) modes.push_back(r.mode);
  }
  std::map<Mode, std::set<std::uint64_t>> seed_sets;
  for (const SummaryRow& r : rows) seed_sets[r.mode].insert(r.seed);
  for (const auto& [mode, s] : seed_sets) {
    if (s != seed_sets.begin()->second) {
      throw ConfigError("seed sets differ across modes; paired comparison impossible");
    }
  }
  std::vector<std::uint64_t> seeds(seed_sets.begin()->second.begin(),
                                   seed_sets.begin()->second.end());

  std::string scenario = rows.front().scenario;
  std::vector<ClassificationFn> fns;
  try {
    fns = parse_scenario(scenario);
  } catch (const ConfigError&) {
    // scenario string from a foreign summary may be unparseable; per-
    // concept labels are then omitted
  }

  // accuracy by (concept, case, mode, seed)
  std::map<std::tuple<int, CaseId, Mode, std::uint64_t>, double> acc;
  std::set<int> concepts;
  for (const SummaryRow& r : rows) {
    acc[{r.concept_id, r.case_id, r.mode, r.seed}] = r.accuracy;
    concepts.insert(r.concept_id);
  }

  out << "scenario " << scenario << "\n";
  for (int concept_id : concepts) {
    if (concept_id < 2) continue;  // comparisons only make sense after the first drift
    out << "\nconcept " << concept_id;
    if (concept_id <= static_cast<int>(fns.size())) {
      out << " (" << fn_token(fns[concept_id - 1]) << ")";
    }
    out << "\n";

    // cells first, then column widths
    std::vector<std::vector<std::string>> table;
    table.push_back({"case"});
    for (Mode m : modes) table.back().push_back(mode_name(m));
    for (CaseId c : all_cases) {
      std::vector<std::vector<double>> samples(modes.size());
      bool complete = true;
      for (size_t mi = 0; mi < modes.size(); ++mi) {
        for (std::uint64_t s : seeds) {
          auto it = acc.find({concept_id, c, modes[mi], s});
          if (it != acc.end()) samples[mi].push_back(it->second);
        }
        if (samples[mi].size() != seeds.size()) complete = false;
      }
      ProtocolFlags flags;
      bool marked = complete && modes.size() >= 2 && seeds.size() >= 3;
      if (marked) flags = protocol_compare(samples, alpha);

      std::vector<std::string> row{case_range(c)};
      for (size_t mi = 0; mi < modes.size(); ++mi) {
        if (samples[mi].empty()) {
          row.push_back("-");
          continue;
        }
        MeanStd ms = aggregate_runs(samples[mi]);
        std::string cell = fmt3(ms.mean) + ", " + fmt3(ms.std);
        if (marked) {
          if (flags.best[mi]) cell = "**" + cell + "**";
          if (flags.worst[mi]) cell = "_" + cell + "_";
          if (flags.non_normal[mi]) cell += "~";
        }
        row.push_back(cell);
      }
      table.push_back(row);
    }

    std::vector<size_t> width(modes.size() + 1, 0);
    for (const auto& row : table) {
      for (size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
    }
    for (const auto& row : table) {
      for (size_t i = 0; i < row.size(); ++i) {
        out << (i ? " | " : "  ") << row[i] << std::string(width[i] - row[i].size(), ' ');
      }
      out << "\n";
    }
  }
  return out.str();
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
  if (!out) throw ConfigError("write failed for " + path.string());
}

}  // namespace

void run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + cfg.out_dir);

  struct Cell {
    std::uint64_t seed;
    Mode mode;
    std::vector<BatchRecord> records;
  };
  std::vector<Cell> cells;
  for (std::uint64_t seed : cfg.seeds) {
    for (Mode mode : cfg.modes) cells.push_back({seed, mode, {}});
  }

  std::exception_ptr failure = nullptr;
  // worker parallelism across independent cells; the LSTM kernels inside
  // notice the active outer region and stay serial
#pragma omp parallel for schedule(dynamic, 1) num_threads(cfg.workers) if (cfg.workers > 1)
  for (int i = 0; i < static_cast<int>(cells.size()); ++i) {
    try {
      cells[i].records = run_cell(cfg, cells[i].seed, cells[i].mode);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<SummaryRow> rows;
  for (const Cell& cell : cells) {
    std::ostringstream name;
    name << "records_" << mode_name(cell.mode) << "_seed" << cell.seed << ".csv";
    std::ostringstream body;
    write_records_csv(body, cfg, cell.seed, cell.mode, cell.records);
    write_file(fs::path(cfg.out_dir) / name.str(), body.str());
  }
  // summary rows ordered mode-major in cfg order, then concept, case, seed
  for (Mode mode : cfg.modes) {
    std::set<int> concepts;
    for (const Cell& cell : cells) {
      if (cell.mode != mode) continue;
      for (const BatchRecord& r : cell.records) concepts.insert(r.concept_id);
    }
    for (int concept_id : concepts) {
      for (CaseId c : all_cases) {
        for (const Cell& cell : cells) {
          if (cell.mode != mode) continue;
          if (auto a = case_accuracy(cell.records, concept_id, c)) {
            rows.push_back({mode, cfg.scenario, concept_id, c, cell.seed, *a});
          }
        }
      }
    }
  }
  std::ostringstream summary;
  write_summary_csv(summary, cfg, rows);
  write_file(fs::path(cfg.out_dir) / "summary.csv", summary.str());
  write_file(fs::path(cfg.out_dir) / "report.txt",
             render_report(rows, cfg.serialize(), cfg.alpha));
}

void write_report_from_summary(const fs::path& summary_csv, const fs::path& report_path,
                               double alpha) {
  std::ifstream in(summary_csv);
  if (!in) throw ConfigError("cannot read " + summary_csv.string());
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();

  // carry the original config header over into the report
  std::string header;
  for (const std::string& line : split(text, '\n')) {
    std::string t = trim(line);
    if (t.rfind("# ", 0) == 0) header += t.substr(2) + "\n";
  }
  std::istringstream rows_in(text);
  std::vector<SummaryRow> rows = read_summary_csv(rows_in);
  if (rows.empty()) throw ConfigError("summary has no rows: " + summary_csv.string());
  std::set<Mode> modes;
  for (const SummaryRow& r : rows) modes.insert(r.mode);
  if (modes.size() < 2) throw ConfigError("report needs at least two modes in the summary");
  write_file(report_path, render_report(rows, header, alpha));
}

}  // namespace cpnn
