#include "cvkf/config.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace cvkf {

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"experiment", {"scenario", "dt", "horizon", "seed"}},
      {"scenario", {}},  // validated against the scenario's own parameters
      {"prior", {"mean", "cov", "x0"}},
      {"expectation", {"kind", "kappa", "order", "samples", "mc_seed"}},
      {"filter", {"kinds", "propagation", "update", "max_iter", "tol",
                  "damping"}},
      {"oracle", {"particles"}},
      {"output", {"directory"}},
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void fail(int line, const std::string& message) {
  throw std::invalid_argument("config line " + std::to_string(line) + ": " +
                              message);
}

[[noreturn]] void fail(const std::string& message) {
  throw std::invalid_argument("config: " + message);
}

struct RawEntry {
  std::string value;
  int line = 0;
};

struct RawConfig {
  std::map<std::string, std::map<std::string, RawEntry>> sections;

  const RawEntry* find(const std::string& section, const std::string& key) {
    auto s = sections.find(section);
    if (s == sections.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    return &k->second;
  }
};

RawConfig tokenize(const std::string& text) {
  RawConfig raw;
  std::istringstream stream(text);
  std::string line;
  std::string section;
  int number = 0;
  while (std::getline(stream, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') fail(number, "unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      if (!known_keys().count(section)) {
        fail(number, "unknown section '" + section + "'");
      }
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      fail(number, "expected 'key = value'");
    }
    if (section.empty()) {
      fail(number, "key outside any section");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) fail(number, "empty key");
    if (value.empty()) fail(number, "key '" + key + "' has no value");
    const auto& allowed = known_keys().at(section);
    if (!allowed.empty() && !allowed.count(key)) {
      fail(number, "section [" + section + "] has no key '" + key + "'");
    }
    auto& slot = raw.sections[section][key];
    if (slot.line != 0) {
      fail(number, "duplicate key '" + key + "' (first on line " +
                       std::to_string(slot.line) + ")");
    }
    slot.value = value;
    slot.line = number;
  }
  return raw;
}

double parse_double(const RawEntry& e, const std::string& key) {
  const char* begin = e.value.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end != begin + e.value.size() || errno == ERANGE || !std::isfinite(v)) {
    fail(e.line, "key '" + key + "': expected a finite number, got '" +
                     e.value + "'");
  }
  return v;
}

std::int64_t parse_integer(const RawEntry& e, const std::string& key) {
  std::int64_t v = 0;
  const auto [ptr, ec] =
      std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
  if (ec != std::errc() || ptr != e.value.data() + e.value.size()) {
    fail(e.line, "key '" + key + "': expected an integer, got '" + e.value +
                     "'");
  }
  return v;
}

std::uint64_t parse_unsigned(const RawEntry& e, const std::string& key) {
  std::uint64_t v = 0;
  const auto [ptr, ec] =
      std::from_chars(e.value.data(), e.value.data() + e.value.size(), v);
  if (ec != std::errc() || ptr != e.value.data() + e.value.size()) {
    fail(e.line, "key '" + key + "': expected an unsigned integer, got '" +
                     e.value + "'");
  }
  return v;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream stream(value);
  while (std::getline(stream, item, ',')) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

std::vector<double> parse_double_list(const RawEntry& e,
                                      const std::string& key) {
  std::vector<double> out;
  for (const std::string& item : split_list(e.value)) {
    RawEntry sub{item, e.line};
    out.push_back(parse_double(sub, key));
  }
  if (out.empty()) fail(e.line, "key '" + key + "': empty list");
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return "0";
  return std::string(buf, ptr);
}

std::string format_double_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += format_double(values[i]);
  }
  return out;
}

const std::vector<std::string>& canonical_filter_order() {
  static const std::vector<std::string> order = {
      "cvkf", "kalman-bucy", "propagation-only", "update-only"};
  return order;
}

}  // namespace

ExperimentConfig default_config(const std::string& scenario) {
  ExperimentConfig cfg;
  cfg.scenario = scenario;
  cfg.scenario_params = default_scenario_params(scenario);
  const Scenario s = make_scenario(scenario, cfg.scenario_params);
  const int d = s.dynamics.dim;
  cfg.prior_mean.assign(d, 0.0);
  cfg.prior_cov.assign(d, 1.0);
  cfg.x0.assign(d, 0.0);
  return cfg;
}

ExperimentConfig parse_config(const std::string& text) {
  RawConfig raw = tokenize(text);

  const RawEntry* scen = raw.find("experiment", "scenario");
  const std::string scenario_name = scen ? scen->value : "linear-1d";

  ScenarioParams overrides;
  if (auto s = raw.sections.find("scenario"); s != raw.sections.end()) {
    for (auto& [key, entry] : s->second) {
      overrides[key] = parse_double_list(entry, key);
    }
  }

  ExperimentConfig cfg;
  cfg.scenario = scenario_name;
  try {
    cfg.scenario_params = resolve_scenario_params(scenario_name, overrides);
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  Scenario scenario;
  try {
    scenario = make_scenario(scenario_name, cfg.scenario_params);
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  const int d = scenario.dynamics.dim;
  cfg.prior_mean.assign(d, 0.0);
  cfg.prior_cov.assign(d, 1.0);
  cfg.x0.assign(d, 0.0);

  if (const RawEntry* e = raw.find("experiment", "dt")) {
    cfg.dt = parse_double(*e, "dt");
    if (!(cfg.dt > 0.0)) fail(e->line, "dt must be positive");
  }
  if (const RawEntry* e = raw.find("experiment", "horizon")) {
    cfg.horizon = parse_double(*e, "horizon");
  }
  if (!(cfg.horizon >= cfg.dt)) {
    fail("horizon must be at least dt");
  }
  if (const RawEntry* e = raw.find("experiment", "seed")) {
    cfg.seed = parse_unsigned(*e, "seed");
  }

  auto read_state_vector = [&](const char* key, std::vector<double>* out) {
    if (const RawEntry* e = raw.find("prior", key)) {
      *out = parse_double_list(*e, key);
      if (static_cast<int>(out->size()) != d) {
        fail(e->line, std::string("key '") + key + "': expected " +
                          std::to_string(d) + " value(s)");
      }
    }
  };
  read_state_vector("mean", &cfg.prior_mean);
  read_state_vector("cov", &cfg.prior_cov);
  read_state_vector("x0", &cfg.x0);
  for (double v : cfg.prior_cov) {
    if (!(v > 0.0)) fail("prior cov entries must be positive");
  }

  if (const RawEntry* e = raw.find("expectation", "kind")) {
    if (e->value == "exact-linear") {
      cfg.method.kind = ExpectationMethod::Kind::ExactLinear;
    } else if (e->value == "unscented") {
      cfg.method.kind = ExpectationMethod::Kind::Unscented;
    } else if (e->value == "gauss-hermite") {
      cfg.method.kind = ExpectationMethod::Kind::GaussHermite;
    } else if (e->value == "monte-carlo") {
      cfg.method.kind = ExpectationMethod::Kind::MonteCarlo;
    } else {
      fail(e->line, "unknown expectation kind '" + e->value + "'");
    }
  }
  if (const RawEntry* e = raw.find("expectation", "kappa")) {
    if (e->value == "auto") {
      cfg.method.kappa = ExpectationMethod::kAutoKappa;
    } else {
      cfg.method.kappa = parse_double(*e, "kappa");
    }
  }
  if (const RawEntry* e = raw.find("expectation", "order")) {
    const std::int64_t order = parse_integer(*e, "order");
    if (order < 2 || order > 10) {
      fail(e->line, "order must be in 2..10");
    }
    cfg.method.gh_order = static_cast<int>(order);
  }
  if (const RawEntry* e = raw.find("expectation", "samples")) {
    cfg.method.mc_samples = parse_integer(*e, "samples");
    if (cfg.method.mc_samples < 1) fail(e->line, "samples must be >= 1");
  }
  if (const RawEntry* e = raw.find("expectation", "mc_seed")) {
    cfg.method.mc_seed = parse_unsigned(*e, "mc_seed");
  }
  if (cfg.method.kind == ExpectationMethod::Kind::GaussHermite && d > 4) {
    fail("gauss-hermite expectation is limited to state dimension <= 4");
  }
  if (cfg.method.kind == ExpectationMethod::Kind::ExactLinear &&
      (!scenario.dynamics.quadratic_form ||
       !scenario.observation.linear_map)) {
    fail("exact-linear expectation requires a fully linear scenario");
  }

  if (const RawEntry* e = raw.find("filter", "kinds")) {
    cfg.filter_kinds = split_list(e->value);
    if (cfg.filter_kinds.empty()) fail(e->line, "kinds is empty");
    std::set<std::string> seen;
    for (const std::string& kind : cfg.filter_kinds) {
      const auto& order = canonical_filter_order();
      if (std::find(order.begin(), order.end(), kind) == order.end()) {
        fail(e->line, "unknown filter kind '" + kind + "'");
      }
      if (!seen.insert(kind).second) {
        fail(e->line, "duplicate filter kind '" + kind + "'");
      }
    }
    // canonical order, so the echo does not depend on listing order
    std::sort(cfg.filter_kinds.begin(), cfg.filter_kinds.end(),
              [](const std::string& a, const std::string& b) {
                const auto& order = canonical_filter_order();
                return std::find(order.begin(), order.end(), a) <
                       std::find(order.begin(), order.end(), b);
              });
  }
  if (std::find(cfg.filter_kinds.begin(), cfg.filter_kinds.end(),
                "kalman-bucy") != cfg.filter_kinds.end() &&
      !scenario.linear) {
    fail("kalman-bucy requires a linear scenario");
  }

  if (const RawEntry* e = raw.find("filter", "propagation")) {
    if (e->value == "explicit") {
      cfg.propagation = PropagationKind::Explicit;
    } else if (e->value == "implicit") {
      cfg.propagation = PropagationKind::Implicit;
    } else {
      fail(e->line, "propagation must be 'explicit' or 'implicit'");
    }
  }
  if (const RawEntry* e = raw.find("filter", "update")) {
    if (e->value == "precision") {
      cfg.update = UpdateKind::Precision;
    } else if (e->value == "covariance") {
      cfg.update = UpdateKind::Covariance;
    } else if (e->value == "natural-gradient") {
      cfg.update = UpdateKind::NaturalGradient;
    } else {
      fail(e->line,
           "update must be 'precision', 'covariance' or 'natural-gradient'");
    }
  }
  if (const RawEntry* e = raw.find("filter", "max_iter")) {
    const std::int64_t v = parse_integer(*e, "max_iter");
    if (v < 1) fail(e->line, "max_iter must be >= 1");
    cfg.fixed_point.max_iter = static_cast<int>(v);
  }
  if (const RawEntry* e = raw.find("filter", "tol")) {
    cfg.fixed_point.tol = parse_double(*e, "tol");
    if (!(cfg.fixed_point.tol > 0.0)) fail(e->line, "tol must be positive");
  }
  if (const RawEntry* e = raw.find("filter", "damping")) {
    cfg.fixed_point.damping = parse_double(*e, "damping");
    if (!(cfg.fixed_point.damping > 0.0) || cfg.fixed_point.damping > 1.0) {
      fail(e->line, "damping must be in (0, 1]");
    }
  }

  if (const RawEntry* e = raw.find("oracle", "particles")) {
    cfg.oracle_particles = parse_integer(*e, "particles");
    if (cfg.oracle_particles < 0) {
      fail(e->line, "particles must be >= 0");
    }
    if (cfg.oracle_particles == 1) {
      fail(e->line, "particles must be 0 (off) or >= 2");
    }
  }

  if (const RawEntry* e = raw.find("output", "directory")) {
    cfg.output_directory = e->value;
  }

  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::invalid_argument("config: cannot open '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string emit_config(const ExperimentConfig& cfg) {
  std::string out;
  out += "[experiment]\n";
  out += "scenario = " + cfg.scenario + "\n";
  out += "dt = " + format_double(cfg.dt) + "\n";
  out += "horizon = " + format_double(cfg.horizon) + "\n";
  out += "seed = " + std::to_string(cfg.seed) + "\n";
  out += "\n[scenario]\n";
  for (const auto& [key, values] : cfg.scenario_params) {
    out += key + " = " + format_double_list(values) + "\n";
  }
  out += "\n[prior]\n";
  out += "mean = " + format_double_list(cfg.prior_mean) + "\n";
  out += "cov = " + format_double_list(cfg.prior_cov) + "\n";
  out += "x0 = " + format_double_list(cfg.x0) + "\n";
  out += "\n[expectation]\n";
  out += std::string("kind = ") + to_string(cfg.method.kind) + "\n";
  out += "kappa = ";
  out += std::isnan(cfg.method.kappa) ? "auto"
                                      : format_double(cfg.method.kappa);
  out += "\n";
  out += "order = " + std::to_string(cfg.method.gh_order) + "\n";
  out += "samples = " + std::to_string(cfg.method.mc_samples) + "\n";
  out += "mc_seed = " + std::to_string(cfg.method.mc_seed) + "\n";
  out += "\n[filter]\n";
  out += "kinds = ";
  for (std::size_t i = 0; i < cfg.filter_kinds.size(); ++i) {
    if (i) out += ", ";
    out += cfg.filter_kinds[i];
  }
  out += "\n";
  out += std::string("propagation = ") +
         (cfg.propagation == PropagationKind::Explicit ? "explicit"
                                                       : "implicit") +
         "\n";
  out += "update = ";
  switch (cfg.update) {
    case UpdateKind::Precision:
      out += "precision";
      break;
    case UpdateKind::Covariance:
      out += "covariance";
      break;
    case UpdateKind::NaturalGradient:
      out += "natural-gradient";
      break;
  }
  out += "\n";
  out += "max_iter = " + std::to_string(cfg.fixed_point.max_iter) + "\n";
  out += "tol = " + format_double(cfg.fixed_point.tol) + "\n";
  out += "damping = " + format_double(cfg.fixed_point.damping) + "\n";
  out += "\n[oracle]\n";
  out += "particles = " + std::to_string(cfg.oracle_particles) + "\n";
  out += "\n[output]\n";
  out += "directory = " + cfg.output_directory + "\n";
  return out;
}

std::vector<FilterKind> filter_kinds_of(const ExperimentConfig& cfg) {
  std::vector<FilterKind> kinds;
  for (const std::string& token : cfg.filter_kinds) {
    FilterKind kind;
    if (token == "cvkf") {
      kind.family = FilterKind::Family::Cvkf;
    } else if (token == "kalman-bucy") {
      kind.family = FilterKind::Family::KalmanBucy;
    } else if (token == "propagation-only") {
      kind.family = FilterKind::Family::PropagationOnly;
    } else if (token == "update-only") {
      kind.family = FilterKind::Family::UpdateOnly;
    } else {
      throw std::invalid_argument("unknown filter kind '" + token + "'");
    }
    kind.propagation = cfg.propagation;
    kind.update = cfg.update;
    kinds.push_back(kind);
  }
  return kinds;
}

}  // namespace cvkf
