#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "mpest/csv.hpp"
#include "mpest/errors.hpp"
#include "mpest/estimator.hpp"
#include "mpest/harness.hpp"
#include "mpest/scenario.hpp"

namespace mpest::cli {
namespace {

namespace fs = std::filesystem;
using scenario::Scenario;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Invocation {
  std::string config_path;
  std::string out_path;
  std::map<std::string, std::string> overrides;  // dotted key -> value
};

Scenario load(const Invocation& inv) {
  scenario::ConfigMap map;
  if (!inv.config_path.empty()) {
    std::ifstream in(inv.config_path);
    if (!in) throw IoError("cannot read config file '" + inv.config_path + "'");
    map = scenario::parse_config(in, inv.config_path);
  }
  for (const auto& [key, value] : inv.overrides) scenario::set_entry(map, key, value, "--" + key);
  return scenario::build_scenario(map);
}

class OutFile {
 public:
  explicit OutFile(const fs::path& path) : path_(path), os_(path) {
    if (!os_) throw IoError("cannot open '" + path.string() + "' for writing");
  }
  std::ostream& stream() { return os_; }
  void close() {
    os_.close();
    if (!os_) throw IoError("write to '" + path_.string() + "' failed");
  }

 private:
  fs::path path_;
  std::ofstream os_;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw IoError("cannot create output directory '" + dir.string() + "'");
}

void write_signal(const fs::path& path, const SampledSignal& signal, const Scenario& sc,
                  const std::string& what) {
  OutFile file(path);
  csv::Metadata meta = scenario::metadata(sc);
  meta.extra.push_back("record: " + what);
  meta.extra.push_back("t_s: " + csv::format_double(signal.t_s));
  csv::write_metadata(file.stream(), meta);
  csv::write_row(file.stream(), {"index", "value"});
  for (std::size_t n = 0; n < signal.size(); ++n)
    csv::write_row(file.stream(), {std::to_string(n), csv::format_double(signal.samples[n])});
  file.close();
}

int cmd_synth(const Scenario& sc, const Invocation& inv, std::ostream& out) {
  const fs::path dir = inv.out_path.empty() ? fs::path(".") : fs::path(inv.out_path);
  const harness::Records rec = harness::synthesize(sc);
  ensure_dir(dir);
  write_signal(dir / "pulse.csv", rec.pulse, sc, "pulse");
  write_signal(dir / "received.csv", rec.received, sc, "received");
  out << "record power: " << csv::format_double(rec.received.power()) << '\n';
  out << "clean record power: " << csv::format_double(rec.clean.power()) << '\n';
  if (rec.empirical_snr_db)
    out << "empirical SNR (dB): " << csv::format_double(*rec.empirical_snr_db) << '\n';
  out << "wrote " << (dir / "pulse.csv").string() << ", " << (dir / "received.csv").string() << '\n';
  return kOk;
}

int cmd_sweep(const Scenario& sc, const Invocation& inv, std::ostream& out) {
  const harness::SweepParam param = [&] {
    try {
      return harness::parse_sweep_param(sc.sweep.param, sc.channel.num_paths());
    } catch (const DomainError& e) {
      const auto it = inv.overrides.find("sweep.param");
      throw scenario::ConfigError(std::string(it != inv.overrides.end() ? "--sweep.param: " : "") +
                                  e.what());
    }
  }();
  const double from = sc.sweep.from.value_or(param.is_delay ? 0.0 : -2.0);
  const double to =
      sc.sweep.to.value_or(param.is_delay ? static_cast<double>(sc.record_len - 1) : 2.0);
  const std::size_t steps = sc.sweep.steps.value_or(param.is_delay ? sc.record_len : 401);
  const fs::path path = inv.out_path.empty() ? fs::path("sweep.csv") : fs::path(inv.out_path);
  OutFile file(path);

  const harness::Records rec = harness::synthesize(sc);
  const harness::SliceEvaluator eval(sc, rec);
  const std::vector<harness::SweepPoint> points = harness::sweep(eval, param, from, to, steps);

  csv::Metadata meta = scenario::metadata(sc);
  meta.extra.push_back("parameter: " + sc.sweep.param);
  csv::write_metadata(file.stream(), meta);
  csv::write_row(file.stream(), {"parameter_value", "E_c"});
  for (const harness::SweepPoint& p : points)
    csv::write_row(file.stream(), {csv::format_double(p.value), csv::format_double(p.objective)});
  file.close();

  const harness::SweepPoint best = harness::argmin(points);
  out << "argmin " << sc.sweep.param << " = " << csv::format_double(best.value)
      << "  E_c = " << csv::format_double(best.objective) << '\n';
  return kOk;
}

int cmd_estimate(const Scenario& sc, const Invocation& inv, std::ostream& out) {
  const fs::path dir = inv.out_path.empty() ? fs::path(".") : fs::path(inv.out_path);
  ensure_dir(dir);
  const harness::Records rec = harness::synthesize(sc);
  const EstimationTask task = harness::make_task(sc, rec, harness::ga_seed(sc.seed, 0));
  const auto start = std::chrono::steady_clock::now();
  const ChannelEstimate est = estimate(task);
  const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
  const double energy = prepare(task).support.r_tilde.squaredNorm();

  OutFile report(dir / "estimate.csv");
  csv::write_metadata(report.stream(), scenario::metadata(sc));
  csv::write_row(report.stream(), {"quantity", "value"});
  const std::size_t m = est.channel.num_paths();
  for (std::size_t k = 0; k < m; ++k)
    csv::write_row(report.stream(),
                   {harness::amplitude_name(k), csv::format_double(est.channel.amplitudes[k])});
  for (std::size_t k = 0; k < m; ++k)
    csv::write_row(report.stream(),
                   {harness::delay_name(k), csv::format_double(est.channel.delays[k])});
  csv::write_row(report.stream(), {"objective", csv::format_double(est.objective_at_estimate)});
  csv::write_row(report.stream(), {"reference_energy", csv::format_double(energy)});
  csv::write_row(report.stream(), {"generations", std::to_string(est.history.size())});
  csv::write_row(report.stream(), {"residual_imag_norm", csv::format_double(est.residual_imag_norm)});
  csv::write_row(report.stream(), {"quality_warning", est.quality_warning ? "1" : "0"});
  report.close();

  OutFile history(dir / "history.csv");
  csv::write_metadata(history.stream(), scenario::metadata(sc));
  csv::write_row(history.stream(), {"generation", "best_E_c", "mean_E_c"});
  for (const ga::GenerationStats& g : est.history)
    csv::write_row(history.stream(), {std::to_string(g.generation), csv::format_double(g.best),
                                      csv::format_double(g.mean)});
  history.close();

  for (std::size_t k = 0; k < m; ++k)
    out << harness::amplitude_name(k) << " = " << csv::format_double(est.channel.amplitudes[k])
        << "  " << harness::delay_name(k) << " = " << csv::format_double(est.channel.delays[k])
        << '\n';
  out << "objective = " << csv::format_double(est.objective_at_estimate)
      << " (reference energy " << csv::format_double(energy) << ")\n";
  out << "generations = " << est.history.size() << '\n';
  if (est.quality_warning)
    out << "warning: unconstrained amplitudes are far from real (imag ratio "
        << csv::format_double(est.residual_imag_norm) << ")\n";
  out << "wall time = " << wall.count() << " s\n";
  return kOk;
}

int cmd_bench(const Scenario& sc, const Invocation& inv, std::ostream& out) {
  if (sc.num_paths != sc.channel.num_paths())
    throw scenario::ConfigError("bench: estimate.num_paths must equal the channel's path count");
  const fs::path path = inv.out_path.empty() ? fs::path("bench.csv") : fs::path(inv.out_path);
  const fs::path trials_path = fs::path(path.string() + ".trials.csv");
  OutFile table(path);
  OutFile trials(trials_path);

  const harness::BenchResult bench = harness::run_bench(sc, sc.threads);
  const std::size_t m = sc.channel.num_paths();

  csv::write_metadata(table.stream(), scenario::metadata(sc));
  csv::write_row(table.stream(), {"snr_db", "parameter_name", "mse", "trials"});
  for (const harness::SnrSummary& s : bench.summary) {
    const std::string snr = csv::format_double(s.snr_db);
    for (std::size_t k = 0; k < m; ++k)
      csv::write_row(table.stream(), {snr, harness::amplitude_name(k),
                                      csv::format_double(s.mse.amplitude[k]), std::to_string(s.mse.runs)});
    for (std::size_t k = 0; k < m; ++k)
      csv::write_row(table.stream(), {snr, harness::delay_name(k), csv::format_double(s.mse.delay[k]),
                                      std::to_string(s.mse.runs)});
  }
  table.close();

  csv::write_metadata(trials.stream(), scenario::metadata(sc));
  std::vector<std::string> header{"snr_db", "trial"};
  for (std::size_t k = 0; k < m; ++k) header.push_back(harness::amplitude_name(k));
  for (std::size_t k = 0; k < m; ++k) header.push_back(harness::delay_name(k));
  for (std::size_t k = 0; k < m; ++k) header.push_back("sq_err_" + harness::amplitude_name(k));
  for (std::size_t k = 0; k < m; ++k) header.push_back("sq_err_" + harness::delay_name(k));
  header.insert(header.end(), {"objective", "quality_warning"});
  csv::write_row(trials.stream(), header);
  for (const harness::TrialRecord& r : bench.trials) {
    std::vector<std::string> row{csv::format_double(r.snr_db), std::to_string(r.trial)};
    for (double a : r.estimate.amplitudes) row.push_back(csv::format_double(a));
    for (double d : r.estimate.delays) row.push_back(csv::format_double(d));
    for (double e : r.errors.amplitude) row.push_back(csv::format_double(e));
    for (double e : r.errors.delay) row.push_back(csv::format_double(e));
    row.push_back(csv::format_double(r.objective));
    row.push_back(r.quality_warning ? "1" : "0");
    csv::write_row(trials.stream(), row);
  }
  trials.close();

  for (const harness::SnrSummary& s : bench.summary) {
    out << "SNR " << csv::format_double(s.snr_db) << " dB:";
    for (std::size_t k = 0; k < m; ++k)
      out << ' ' << harness::delay_name(k) << '=' << csv::format_double(s.mse.delay[k]);
    out << '\n';
  }
  out << "wrote " << path.string() << ", " << trials_path.string() << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multipath channel estimation by genetic search over a thresholded "
               "frequency-domain least-squares error"};
  app.name(args.empty() ? "mpest" : args[0]);
  app.require_subcommand(1);

  Invocation inv;
  std::map<std::string, std::string> flag_values;

  // Global flags are accepted before or after the subcommand.
  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", inv.config_path, "scenario file (key = value)");
    cmd->add_option("--out", inv.out_path, "output path");
    for (const scenario::KeyInfo& key : scenario::known_keys())
      cmd->add_option("--" + std::string(key.name), flag_values[key.name], key.help);
  };
  add_common(&app);

  CLI::App* synth = app.add_subcommand("synth", "write pulse and received records (out: directory)");
  CLI::App* sweep = app.add_subcommand("sweep", "error-surface slice over one parameter (out: file)");
  CLI::App* est = app.add_subcommand("estimate", "estimate the channel once (out: directory)");
  CLI::App* bench = app.add_subcommand("bench", "MSE-vs-SNR benchmark (out: file)");
  for (CLI::App* cmd : {synth, sweep, est, bench}) add_common(cmd);
  sweep->add_option("--param", flag_values["sweep.param"], "tau1..tauM or a1..aM");
  sweep->add_option("--from", flag_values["sweep.from"], "range start");
  sweep->add_option("--to", flag_values["sweep.to"], "range end");
  sweep->add_option("--steps", flag_values["sweep.steps"], "number of points");

  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }
  for (const auto& [key, value] : flag_values)
    if (!value.empty()) inv.overrides[key] = value;

  try {
    const Scenario sc = load(inv);
    if (synth->parsed()) return cmd_synth(sc, inv, out);
    if (sweep->parsed()) return cmd_sweep(sc, inv, out);
    if (est->parsed()) return cmd_estimate(sc, inv, out);
    return cmd_bench(sc, inv, out);
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kIoError;
  } catch (const scenario::ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const EstimationError& e) {
    err << "estimation error: " << e.what() << '\n';
    return kEstimationError;
  } catch (const DomainError& e) {
    err << "validation error: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace mpest::cli
