#pragma once

// Scenario configuration: a flat "key = value" text format with dotted keys
// (optionally grouped under [section] headers), command-line overrides of
// the same names, and validation against every module's preconditions.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "mpest/csv.hpp"
#include "mpest/errors.hpp"
#include "mpest/estimator.hpp"
#include "mpest/ga.hpp"
#include "mpest/signal.hpp"

namespace mpest::scenario {

/// Invalid configuration. The message names the offending source location.
class ConfigError : public DomainError {
 public:
  using DomainError::DomainError;
};

struct Entry {
  std::string value;
  std::string origin;  // "file:line" or "--flag"
};

using ConfigMap = std::map<std::string, Entry>;

struct KeyInfo {
  const char* name;
  const char* help;
};

inline const std::vector<KeyInfo>& known_keys() {
  static const std::vector<KeyInfo> keys = {
      {"seed", "master seed (u64)"},
      {"mode", "search mode: full or hybrid"},
      {"record_len", "received record length in samples"},
      {"chirp.n_sig", "pulse length in samples"},
      {"chirp.n_w", "window ramp length (default n_sig/10)"},
      {"chirp.f1", "start frequency, cycles/sample"},
      {"chirp.f2", "end frequency, cycles/sample"},
      {"channel.amplitudes", "comma-separated path amplitudes"},
      {"channel.delays", "comma-separated path delays in samples"},
      {"noise.snr_db", "SNR in dB, or inf / noiseless"},
      {"noise.noiseless", "true to disable noise"},
      {"estimate.num_paths", "number of paths to estimate (default: channel size)"},
      {"estimate.threshold_frac", "band threshold as a fraction of the spectral peak"},
      {"estimate.delay_bits", "bits per delay gene"},
      {"estimate.amplitude_bits", "bits per amplitude gene (full mode)"},
      {"estimate.amplitude_min", "amplitude gene lower bound (full mode)"},
      {"estimate.amplitude_max", "amplitude gene upper bound (full mode)"},
      {"estimate.restarts", "independent GA runs, best kept"},
      {"estimate.local_iterations", "LM iterations per individual (hybrid mode)"},
      {"estimate.polish", "final LM polish of the winner (hybrid mode)"},
      {"ga.population_size", "population size"},
      {"ga.crossover_prob", "crossover probability"},
      {"ga.mutation_prob", "per-bit mutation probability"},
      {"ga.elitism_count", "individuals copied unchanged"},
      {"ga.crossover_points", "cut points per crossover"},
      {"ga.termination", "generations, plateau or uniform"},
      {"ga.max_generations", "generation budget for termination=generations"},
      {"ga.plateau_window", "window for termination=plateau"},
      {"ga.plateau_epsilon", "improvement threshold for termination=plateau"},
      {"ga.max_generations_cap", "hard generation cap"},
      {"bench.trials", "trials per SNR"},
      {"bench.snr_list", "comma-separated SNRs in dB (inf allowed)"},
      {"bench.threads", "worker threads, 0 = hardware concurrency"},
      {"sweep.param", "swept parameter: tau1..tauM or a1..aM"},
      {"sweep.from", "sweep start"},
      {"sweep.to", "sweep end"},
      {"sweep.steps", "number of sweep points"},
  };
  return keys;
}

inline bool is_known_key(const std::string& key) {
  for (const KeyInfo& k : known_keys())
    if (key == k.name) return true;
  return false;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace detail

/// Adds or replaces one key. Unknown keys are rejected.
inline void set_entry(ConfigMap& map, const std::string& key, const std::string& value,
                      const std::string& origin) {
  if (!is_known_key(key)) throw ConfigError(origin + ": unknown key '" + key + "'");
  map[key] = Entry{value, origin};
}

/// Parses "key = value" lines. '#' and ';' start comments; "[section]"
/// prefixes following keys with "section.".
inline ConfigMap parse_config(std::istream& in, const std::string& source) {
  ConfigMap map;
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string origin = source + ":" + std::to_string(lineno);
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(origin + ": malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ": expected 'key = value'");
    std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ": missing key");
    if (!section.empty()) key = section + "." + key;
    if (map.count(key)) throw ConfigError(origin + ": duplicate key '" + key + "' (first set at " +
                                          map[key].origin + ")");
    set_entry(map, key, value, origin);
  }
  return map;
}

struct SweepSpec {
  std::string param = "tau1";
  std::optional<double> from;
  std::optional<double> to;
  std::optional<std::size_t> steps;
};

struct Scenario {
  std::uint64_t seed = 1;
  SearchMode mode = SearchMode::kFullGa;
  std::size_t record_len = 1000;
  ChirpSpec chirp;
  MultipathChannel channel{{1.0, -0.8, 0.4}, {200.0, 204.0, 220.0}};
  double snr_db = std::numeric_limits<double>::infinity();

  std::size_t num_paths = 3;
  double threshold_frac = 0.05;
  unsigned delay_bits = 16;
  unsigned amplitude_bits = 12;
  double amplitude_min = -2.0;
  double amplitude_max = 2.0;
  std::size_t restarts = 1;
  std::size_t local_iterations = 10;
  bool polish = true;
  ga::GaConfig ga;

  std::size_t trials = 50;
  std::vector<double> snr_list{20.0, 10.0, 0.0, -10.0};
  std::size_t threads = 0;

  SweepSpec sweep;

  bool noiseless() const { return std::isinf(snr_db) && snr_db > 0.0; }
};

namespace detail {

[[noreturn]] inline void bad_value(const std::string& key, const Entry& e, const std::string& what) {
  throw ConfigError(e.origin + ": " + key + " = '" + e.value + "': " + what);
}

inline double to_double(const std::string& key, const Entry& e) {
  const std::string& s = e.value;
  double v = 0.0;
  const char* begin = s.data();
  if (!s.empty() && s[0] == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) bad_value(key, e, "not a number");
  return v;
}

inline double to_finite(const std::string& key, const Entry& e) {
  const double v = to_double(key, e);
  if (!std::isfinite(v)) bad_value(key, e, "must be finite");
  return v;
}

inline std::uint64_t to_u64(const std::string& key, const Entry& e) {
  const std::string& s = e.value;
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    bad_value(key, e, "not a non-negative integer");
  return v;
}

inline bool to_bool(const std::string& key, const Entry& e) {
  const std::string& s = e.value;
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad_value(key, e, "not a boolean");
}

inline double to_snr(const std::string& key, const Entry& e) {
  if (e.value == "inf" || e.value == "+inf" || e.value == "noiseless")
    return std::numeric_limits<double>::infinity();
  const double v = to_double(key, e);
  if (std::isnan(v) || (std::isinf(v) && v < 0.0)) bad_value(key, e, "SNR must be finite or inf");
  return v;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

template <class F>
auto to_list(const std::string& key, const Entry& e, F&& convert) {
  std::vector<decltype(convert(key, e))> out;
  for (const std::string& item : split_list(e.value)) {
    if (item.empty()) bad_value(key, e, "empty list element");
    out.push_back(convert(key, Entry{item, e.origin}));
  }
  if (out.empty()) bad_value(key, e, "empty list");
  return out;
}

}  // namespace detail

/// Resolves a config map into a validated scenario. Unset keys take their
/// defaults; GA settings start from the mode's preset.
inline Scenario build_scenario(const ConfigMap& map) {
  using namespace detail;
  Scenario sc;
  const auto get = [&](const char* key) -> const Entry* {
    const auto it = map.find(key);
    return it == map.end() ? nullptr : &it->second;
  };
  const auto where = [&](std::initializer_list<const char*> keys) {
    std::string out;
    for (const char* k : keys)
      if (const Entry* e = get(k)) out += (out.empty() ? "" : ", ") + e->origin;
    return out.empty() ? std::string("defaults") : out;
  };
  // Runs a module validator and re-raises its message with the source locations.
  const auto check = [&](std::initializer_list<const char*> keys, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const DomainError& err) {
      throw ConfigError(where(keys) + ": " + err.what());
    }
  };

  if (const Entry* e = get("seed")) sc.seed = to_u64("seed", *e);
  if (const Entry* e = get("mode")) {
    try {
      sc.mode = parse_mode(e->value);
    } catch (const DomainError&) {
      bad_value("mode", *e, "expected full or hybrid");
    }
  }
  if (const Entry* e = get("record_len")) sc.record_len = to_u64("record_len", *e);

  if (const Entry* e = get("chirp.n_sig")) sc.chirp.n_sig = to_u64("chirp.n_sig", *e);
  sc.chirp.n_w = sc.chirp.n_sig / 10;
  if (const Entry* e = get("chirp.n_w")) sc.chirp.n_w = to_u64("chirp.n_w", *e);
  if (const Entry* e = get("chirp.f1")) sc.chirp.f1 = to_finite("chirp.f1", *e);
  if (const Entry* e = get("chirp.f2")) sc.chirp.f2 = to_finite("chirp.f2", *e);
  check({"chirp.n_sig", "chirp.n_w", "chirp.f1", "chirp.f2"}, [&] { sc.chirp.validate(); });

  if (sc.record_len < 2) throw ConfigError(where({"record_len"}) + ": record_len must be >= 2");
  if (sc.chirp.n_sig > sc.record_len)
    throw ConfigError(where({"chirp.n_sig", "record_len"}) + ": pulse longer than record_len");

  if (const Entry* e = get("channel.amplitudes"))
    sc.channel.amplitudes = to_list("channel.amplitudes", *e, to_finite);
  if (const Entry* e = get("channel.delays"))
    sc.channel.delays = to_list("channel.delays", *e, to_finite);
  check({"channel.amplitudes", "channel.delays", "record_len"},
        [&] { sc.channel.validate(sc.record_len); });

  const Entry* snr = get("noise.snr_db");
  if (snr) sc.snr_db = to_snr("noise.snr_db", *snr);
  if (const Entry* e = get("noise.noiseless"); e && to_bool("noise.noiseless", *e)) {
    if (snr && !sc.noiseless())
      throw ConfigError(where({"noise.noiseless", "noise.snr_db"}) +
                        ": noise.noiseless = true conflicts with a finite noise.snr_db");
    sc.snr_db = std::numeric_limits<double>::infinity();
  }

  sc.num_paths = sc.channel.num_paths();
  if (const Entry* e = get("estimate.num_paths")) sc.num_paths = to_u64("estimate.num_paths", *e);
  if (sc.num_paths < 1) throw ConfigError(where({"estimate.num_paths"}) + ": num_paths must be >= 1");
  if (const Entry* e = get("estimate.threshold_frac"))
    sc.threshold_frac = to_finite("estimate.threshold_frac", *e);
  if (!(sc.threshold_frac > 0.0 && sc.threshold_frac < 1.0))
    throw ConfigError(where({"estimate.threshold_frac"}) + ": threshold_frac must lie in (0, 1)");
  const auto bits = [&](const char* key, unsigned& field) {
    if (const Entry* e = get(key)) {
      const std::uint64_t v = to_u64(key, *e);
      if (v < 1 || v > 52) bad_value(key, *e, "bits must lie in [1, 52]");
      field = static_cast<unsigned>(v);
    }
  };
  bits("estimate.delay_bits", sc.delay_bits);
  bits("estimate.amplitude_bits", sc.amplitude_bits);
  if (const Entry* e = get("estimate.amplitude_min"))
    sc.amplitude_min = to_finite("estimate.amplitude_min", *e);
  if (const Entry* e = get("estimate.amplitude_max"))
    sc.amplitude_max = to_finite("estimate.amplitude_max", *e);
  if (!(sc.amplitude_min < sc.amplitude_max))
    throw ConfigError(where({"estimate.amplitude_min", "estimate.amplitude_max"}) +
                      ": amplitude_min must be below amplitude_max");

  const SearchPreset preset = preset_for(sc.mode);
  sc.ga = preset.ga;
  sc.restarts = preset.restarts;
  if (const Entry* e = get("estimate.restarts")) sc.restarts = to_u64("estimate.restarts", *e);
  if (sc.restarts < 1) throw ConfigError(where({"estimate.restarts"}) + ": restarts must be >= 1");
  if (const Entry* e = get("estimate.local_iterations"))
    sc.local_iterations = to_u64("estimate.local_iterations", *e);
  if (const Entry* e = get("estimate.polish")) sc.polish = to_bool("estimate.polish", *e);

  if (const Entry* e = get("ga.population_size"))
    sc.ga.population_size = to_u64("ga.population_size", *e);
  if (const Entry* e = get("ga.crossover_prob"))
    sc.ga.crossover_prob = to_finite("ga.crossover_prob", *e);
  if (const Entry* e = get("ga.mutation_prob"))
    sc.ga.mutation_prob = to_finite("ga.mutation_prob", *e);
  if (const Entry* e = get("ga.elitism_count"))
    sc.ga.elitism_count = to_u64("ga.elitism_count", *e);
  if (const Entry* e = get("ga.crossover_points"))
    sc.ga.crossover_points = to_u64("ga.crossover_points", *e);

  std::string termination = "generations";
  if (std::holds_alternative<ga::FitnessPlateau>(sc.ga.termination)) termination = "plateau";
  if (std::holds_alternative<ga::UniformPopulation>(sc.ga.termination)) termination = "uniform";
  if (const Entry* e = get("ga.termination")) {
    termination = e->value;
    if (termination != "generations" && termination != "plateau" && termination != "uniform")
      bad_value("ga.termination", *e, "expected generations, plateau or uniform");
  }
  if (termination == "generations") {
    ga::MaxGenerations rule;
    if (const auto* m = std::get_if<ga::MaxGenerations>(&sc.ga.termination)) rule = *m;
    if (const Entry* e = get("ga.max_generations")) {
      rule.generations = to_u64("ga.max_generations", *e);
      // An explicit budget lifts the preset cap unless the cap is set too.
      if (!get("ga.max_generations_cap")) sc.ga.max_generations_cap = rule.generations;
    }
    sc.ga.termination = rule;
  } else if (termination == "plateau") {
    ga::FitnessPlateau rule;
    if (const Entry* e = get("ga.plateau_window")) rule.window = to_u64("ga.plateau_window", *e);
    if (const Entry* e = get("ga.plateau_epsilon")) rule.epsilon = to_finite("ga.plateau_epsilon", *e);
    sc.ga.termination = rule;
  } else {
    sc.ga.termination = ga::UniformPopulation{};
  }
  if (const Entry* e = get("ga.max_generations_cap"))
    sc.ga.max_generations_cap = to_u64("ga.max_generations_cap", *e);
  check({"ga.population_size", "ga.crossover_prob", "ga.mutation_prob", "ga.elitism_count",
         "ga.crossover_points", "ga.termination", "ga.max_generations", "ga.plateau_window",
         "ga.max_generations_cap"},
        [&] { sc.ga.validate(); });

  if (const Entry* e = get("bench.trials")) sc.trials = to_u64("bench.trials", *e);
  if (sc.trials < 1) throw ConfigError(where({"bench.trials"}) + ": trials must be >= 1");
  if (const Entry* e = get("bench.snr_list")) sc.snr_list = to_list("bench.snr_list", *e, to_snr);
  if (const Entry* e = get("bench.threads")) sc.threads = to_u64("bench.threads", *e);

  if (const Entry* e = get("sweep.param")) sc.sweep.param = e->value;
  if (const Entry* e = get("sweep.from")) sc.sweep.from = to_finite("sweep.from", *e);
  if (const Entry* e = get("sweep.to")) sc.sweep.to = to_finite("sweep.to", *e);
  if (const Entry* e = get("sweep.steps")) {
    sc.sweep.steps = to_u64("sweep.steps", *e);
    if (*sc.sweep.steps < 1) bad_value("sweep.steps", *e, "steps must be >= 1");
  }
  return sc;
}

inline Scenario default_scenario() { return build_scenario({}); }

/// Canonical text of every resolved setting except the seed.
inline std::string canonical_text(const Scenario& sc) {
  std::ostringstream os;
  const auto num = [](double x) { return csv::format_double(x); };
  const auto list = [&](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + num(v[i]);
    return s;
  };
  os << "mode=" << to_string(sc.mode) << '\n'
     << "record_len=" << sc.record_len << '\n'
     << "chirp=" << sc.chirp.n_sig << ',' << sc.chirp.n_w << ',' << num(sc.chirp.f1) << ','
     << num(sc.chirp.f2) << '\n'
     << "channel.amplitudes=" << list(sc.channel.amplitudes) << '\n'
     << "channel.delays=" << list(sc.channel.delays) << '\n'
     << "snr_db=" << num(sc.snr_db) << '\n'
     << "estimate=" << sc.num_paths << ',' << num(sc.threshold_frac) << ',' << sc.delay_bits << ','
     << sc.amplitude_bits << ',' << num(sc.amplitude_min) << ',' << num(sc.amplitude_max) << ','
     << sc.restarts << ',' << sc.local_iterations << ',' << sc.polish << '\n'
     << "ga=" << sc.ga.population_size << ',' << num(sc.ga.crossover_prob) << ','
     << num(sc.ga.mutation_prob) << ',' << sc.ga.elitism_count << ',' << sc.ga.crossover_points
     << ',' << sc.ga.max_generations_cap << '\n';
  std::visit(
      [&](const auto& rule) {
        using T = std::decay_t<decltype(rule)>;
        if constexpr (std::is_same_v<T, ga::MaxGenerations>)
          os << "termination=generations," << rule.generations << '\n';
        else if constexpr (std::is_same_v<T, ga::FitnessPlateau>)
          os << "termination=plateau," << rule.window << ',' << num(rule.epsilon) << '\n';
        else
          os << "termination=uniform\n";
      },
      sc.ga.termination);
  os << "bench=" << sc.trials << ';' << list(sc.snr_list) << '\n';
  os << "sweep=" << sc.sweep.param << ',' << (sc.sweep.from ? num(*sc.sweep.from) : "-") << ','
     << (sc.sweep.to ? num(*sc.sweep.to) : "-") << ','
     << (sc.sweep.steps ? std::to_string(*sc.sweep.steps) : "-") << '\n';
  return os.str();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t config_hash(const Scenario& sc) { return fnv1a(canonical_text(sc)); }

inline csv::Metadata metadata(const Scenario& sc) {
  return csv::Metadata{sc.seed, config_hash(sc), {"mode: " + to_string(sc.mode)}};
}

}  // namespace mpest::scenario
