#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qplab/errors.hpp"
#include "qplab/lyapunov.hpp"
#include "qplab/model.hpp"

namespace qplab {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

enum class Command { lyapunov, ldt, green, pave, localize, lowerbound, recursion };

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"lyapunov", "ldt", "green", "pave", "localize", "lowerbound",
                                              "recursion"};
  return names;
}

inline std::string to_string(Command c) { return command_names()[static_cast<std::size_t>(c)]; }

inline std::optional<Command> parse_command(const std::string& s) {
  const auto& names = command_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == s) return static_cast<Command>(i);
  return std::nullopt;
}

enum class Format { csv, json };

/// Fully resolved experiment: every default is filled in, so `to_json` is the
/// complete provenance record and re-parses to the same config.
struct ExperimentConfig {
  Command command = Command::lyapunov;
  json potential;   ///< {kind, coupling, strip_width[, value | terms]}
  json frequency;   ///< {kind, dio_A, dio_c[, values]}
  std::vector<double> energies;
  std::vector<long long> n;
  std::size_t samples = 0;
  Quadrature quadrature = Quadrature::grid;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string output = "qplab_out";
  Format format = Format::csv;
  json params = json::object();
};

namespace detail {

inline json potential_spec(const std::string& kind, double coupling) {
  return {{"kind", kind}, {"coupling", coupling}, {"strip_width", 1.0}};
}

inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = count == 1 ? lo : lo + (hi - lo) * double(i) / double(count - 1);
  return out;
}

/// Per-command defaults. localize and recursion carry the two flagship runs.
inline json command_defaults(Command c) {
  json d = {{"schema_version", kSchemaVersion}, {"command", to_string(c)}, {"seed", 1}, {"threads", 1},
            {"output", "qplab_out"}, {"quadrature", "grid"}, {"samples", 0}};
  switch (c) {
    case Command::lyapunov:
      d["potential"] = potential_spec("cosine", 5.0);
      d["frequency"] = {{"kind", "golden"}};
      d["energies"] = {{"min", -7.0}, {"max", 7.0}, {"count", 50}};
      d["n"] = {2000};
      d["samples"] = 200;
      d["format"] = "csv";
      d["params"] = json::object();
      break;
    case Command::ldt:
      d["potential"] = potential_spec("cosine", 5.0);
      d["frequency"] = {{"kind", "golden"}};
      d["energies"] = {0.0};
      d["n"] = {50, 100, 200, 400};
      d["samples"] = 100000;
      d["format"] = "csv";
      d["params"] = {{"sigma", 0.3}, {"general_form", false}, {"side", "two_sided"}};
      break;
    case Command::green:
      d["potential"] = potential_spec("cosine", 5.0);
      d["frequency"] = {{"kind", "golden"}};
      d["energies"] = {0.3};
      d["n"] = {100};
      d["format"] = "csv";
      d["params"] = {{"first", 1}, {"theta", {0.0, 0.0}}, {"method", "solve"}};
      break;
    case Command::pave:
      d["potential"] = potential_spec("cosine", 10.0);
      d["frequency"] = {{"kind", "golden"}};
      d["energies"] = {13.0};
      d["n"] = {50};
      d["format"] = "json";
      d["params"] = {{"first", 1}, {"size", 1000}, {"theta", {0.0, 0.0}}, {"rate", nullptr}, {"beta", 0.1}};
      break;
    case Command::localize:
      d["potential"] = potential_spec("cosine", 5.0);
      d["frequency"] = {{"kind", "golden"}};
      d["energies"] = json::array();
      d["n"] = {200};
      d["format"] = "json";
      d["params"] = {{"first", -500}, {"last", 500}, {"theta", {0.0, 0.0}}, {"min_rate", nullptr},
                     {"min_r2", 0.95}, {"delta", 0.5}, {"top", 20}};
      break;
    case Command::lowerbound:
      d["potential"] = potential_spec("cosine", 1.0);
      d["frequency"] = {{"kind", "golden"}};
      d["energies"] = json::array();
      d["n"] = {1000};
      d["format"] = "json";
      d["params"] = {{"delta", 0.1},
                     {"targets", {0.0, 0.5}},
                     {"lambda_epsilon", 101.0},
                     {"energy_fractions", {0.0, 0.5}},
                     {"sublevel_targets", {0.0, 1.0}},
                     {"sublevel_exponents", {-10, -4}},
                     {"sublevel_samples", 1000000}};
      break;
    case Command::recursion:
      d["potential"] = potential_spec("cosine_sum_2d", 50.0);
      d["frequency"] = {{"kind", "default_2d"}};
      d["energies"] = {0.0};
      d["n"] = {200, 400, 800, 1600};
      d["samples"] = 4096;
      d["quadrature"] = "monte_carlo";
      d["format"] = "json";
      d["params"] = {{"sigma", 0.1}, {"ldt_samples", 2000}, {"strict", false}};
      break;
  }
  return d;
}

[[noreturn]] inline void invalid(const std::string& path, const std::string& what) {
  throw ConfigInvalid(path + ": " + what);
}

inline double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) invalid(path, "expected a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) invalid(path, "must be finite");
  return x;
}

inline long long get_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) invalid(path, "expected an integer");
  return j.get<long long>();
}

inline std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) invalid(path, "expected a string");
  return j.get<std::string>();
}

inline void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) invalid(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) invalid(path + "." + it.key(), "unknown key");
  }
}

inline json resolve_potential(const json& p, const std::string& path) {
  check_keys(p, path, {"kind", "coupling", "strip_width", "value", "terms"});
  json out = p;
  const std::string kind = get_string(p.value("kind", json("cosine")), path + ".kind");
  out["kind"] = kind;
  out["coupling"] = get_number(p.value("coupling", json(1.0)), path + ".coupling");
  out["strip_width"] = get_number(p.value("strip_width", json(1.0)), path + ".strip_width");
  if (out["coupling"].get<double>() < 0.0) invalid(path + ".coupling", "must be >= 0");
  if (out["strip_width"].get<double>() <= 0.0) invalid(path + ".strip_width", "must be > 0");
  if (kind == "constant") {
    out["value"] = get_number(p.value("value", json(0.0)), path + ".value");
  } else if (kind == "fourier") {
    if (!p.contains("terms") || !p["terms"].is_array() || p["terms"].empty())
      invalid(path + ".terms", "expected a nonempty array of {k, re, im}");
    for (std::size_t i = 0; i < p["terms"].size(); ++i) {
      const json& t = p["terms"][i];
      const std::string tp = path + ".terms[" + std::to_string(i) + "]";
      check_keys(t, tp, {"k", "re", "im"});
      if (!t.contains("k") || !t["k"].is_array() || t["k"].empty() || t["k"].size() > 2)
        invalid(tp + ".k", "expected 1 or 2 integers");
      for (std::size_t a = 0; a < t["k"].size(); ++a) get_integer(t["k"][a], tp + ".k[" + std::to_string(a) + "]");
      out["terms"][i]["re"] = get_number(t.value("re", json(0.0)), tp + ".re");
      out["terms"][i]["im"] = get_number(t.value("im", json(0.0)), tp + ".im");
    }
  } else if (kind != "cosine" && kind != "cosine_sum_2d" && kind != "zero") {
    invalid(path + ".kind", "unknown potential '" + kind + "'");
  }
  return out;
}

inline json resolve_frequency(const json& f, const std::string& path) {
  check_keys(f, path, {"kind", "values", "dio_A", "dio_c"});
  json out = f;
  const std::string kind = get_string(f.value("kind", json("golden")), path + ".kind");
  out["kind"] = kind;
  if (kind == "golden" || kind == "default_2d") {
    out["dio_A"] = get_number(f.value("dio_A", json(kind == "golden" ? 2.0 : 4.0)), path + ".dio_A");
    out["dio_c"] = get_number(f.value("dio_c", json(kind == "golden" ? 0.2 : 0.01)), path + ".dio_c");
  } else if (kind == "custom") {
    if (!f.contains("values") || !f["values"].is_array() || f["values"].empty() || f["values"].size() > 2)
      invalid(path + ".values", "expected 1 or 2 numbers");
    for (std::size_t i = 0; i < f["values"].size(); ++i)
      get_number(f["values"][i], path + ".values[" + std::to_string(i) + "]");
    out["dio_A"] = get_number(f.value("dio_A", json(2.0)), path + ".dio_A");
    out["dio_c"] = get_number(f.value("dio_c", json(0.01)), path + ".dio_c");
  } else {
    invalid(path + ".kind", "unknown frequency '" + kind + "'");
  }
  if (out["dio_A"].get<double>() < 1.0) invalid(path + ".dio_A", "must be >= 1");
  if (out["dio_c"].get<double>() <= 0.0) invalid(path + ".dio_c", "must be > 0");
  return out;
}

inline std::vector<double> resolve_energies(const json& e, const std::string& path) {
  std::vector<double> out;
  if (e.is_array()) {
    for (std::size_t i = 0; i < e.size(); ++i) out.push_back(get_number(e[i], path + "[" + std::to_string(i) + "]"));
    return out;
  }
  check_keys(e, path, {"min", "max", "count"});
  for (const char* k : {"min", "max", "count"})
    if (!e.contains(k)) invalid(path + "." + k, "missing");
  const double lo = get_number(e["min"], path + ".min"), hi = get_number(e["max"], path + ".max");
  const long long count = get_integer(e["count"], path + ".count");
  if (count < 1) invalid(path + ".count", "must be >= 1");
  if (hi < lo) invalid(path + ".max", "must be >= min");
  return linspace(lo, hi, static_cast<std::size_t>(count));
}

}  // namespace detail

inline bool is_manifest(const json& j) { return j.is_object() && j.contains("config") && j["config"].is_object(); }

/// Validates `j` against the schema and fills in defaults for its command.
/// A manifest (an object whose "config" key holds an object) is accepted and
/// re-runs the recorded config.
inline ExperimentConfig parse_config(const json& input) {
  using namespace detail;
  const json& j = is_manifest(input) ? input["config"] : input;
  if (!j.is_object()) invalid("$", "expected an object");
  if (!j.contains("schema_version")) invalid("$.schema_version", "missing");
  if (get_integer(j["schema_version"], "$.schema_version") != kSchemaVersion)
    invalid("$.schema_version", "unsupported version (expected " + std::to_string(kSchemaVersion) + ")");
  if (!j.contains("command")) invalid("$.command", "missing");
  const auto cmd = parse_command(get_string(j["command"], "$.command"));
  if (!cmd) invalid("$.command", "unknown command '" + j["command"].get<std::string>() + "'");
  check_keys(j, "$", {"schema_version", "command", "potential", "frequency", "energies", "n", "samples",
                      "quadrature", "seed", "threads", "output", "format", "params"});

  json d = command_defaults(*cmd);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "params" && it->is_object())
      d["params"].update(*it);
    else
      d[it.key()] = *it;
  }

  ExperimentConfig c;
  c.command = *cmd;
  c.potential = resolve_potential(d["potential"], "$.potential");
  c.frequency = resolve_frequency(d["frequency"], "$.frequency");
  c.energies = resolve_energies(d["energies"], "$.energies");
  if (d["n"].is_number_integer()) d["n"] = json::array({d["n"]});
  if (!d["n"].is_array() || d["n"].empty()) invalid("$.n", "expected a nonempty array of integers");
  for (std::size_t i = 0; i < d["n"].size(); ++i) {
    const long long n = get_integer(d["n"][i], "$.n[" + std::to_string(i) + "]");
    if (n < 1) invalid("$.n[" + std::to_string(i) + "]", "must be >= 1");
    c.n.push_back(n);
  }
  const long long samples = get_integer(d["samples"], "$.samples");
  if (samples < 0) invalid("$.samples", "must be >= 0");
  c.samples = static_cast<std::size_t>(samples);
  const std::string quad = get_string(d["quadrature"], "$.quadrature");
  if (quad != "grid" && quad != "monte_carlo") invalid("$.quadrature", "expected 'grid' or 'monte_carlo'");
  c.quadrature = quad == "grid" ? Quadrature::grid : Quadrature::monte_carlo;
  const long long seed = get_integer(d["seed"], "$.seed");
  if (seed < 0) invalid("$.seed", "must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);
  const long long threads = get_integer(d["threads"], "$.threads");
  if (threads < 1 || threads > 1024) invalid("$.threads", "must lie in [1, 1024]");
  c.threads = static_cast<unsigned>(threads);
  c.output = get_string(d["output"], "$.output");
  if (c.output.empty()) invalid("$.output", "must be nonempty");
  const std::string fmt = get_string(d["format"], "$.format");
  if (fmt != "csv" && fmt != "json") invalid("$.format", "expected 'csv' or 'json'");
  c.format = fmt == "csv" ? Format::csv : Format::json;
  if (!d["params"].is_object()) invalid("$.params", "expected an object");
  c.params = d["params"];
  return c;
}

/// Parses JSON text; syntax errors become ConfigInvalid at "$".
inline ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    detail::invalid("$", std::string("malformed JSON (") + e.what() + ")");
  }
  return parse_config(j);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigInvalid("$: cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

inline ExperimentConfig default_config(Command c) { return parse_config(detail::command_defaults(c)); }

/// Canonical form: resolved fields only, keys sorted by nlohmann's object map.
inline json to_json(const ExperimentConfig& c) {
  return {{"schema_version", kSchemaVersion},
          {"command", to_string(c.command)},
          {"potential", c.potential},
          {"frequency", c.frequency},
          {"energies", c.energies},
          {"n", c.n},
          {"samples", c.samples},
          {"quadrature", to_string(c.quadrature)},
          {"seed", c.seed},
          {"threads", c.threads},
          {"output", c.output},
          {"format", c.format == Format::csv ? "csv" : "json"},
          {"params", c.params}};
}

inline TrigPotential make_potential(const ExperimentConfig& c) {
  const json& p = c.potential;
  const std::string kind = p["kind"];
  const double coupling = p["coupling"], strip = p["strip_width"];
  const int dim = c.frequency["kind"] == "default_2d" ||
                          (c.frequency["kind"] == "custom" && c.frequency["values"].size() == 2)
                      ? 2
                      : 1;
  if (kind == "cosine") {
    if (dim != 1) throw ConfigInvalid("$.potential.kind: cosine needs a one-dimensional frequency");
    return TrigPotential::cosine(coupling, strip);
  }
  if (kind == "cosine_sum_2d") {
    if (dim != 2) throw ConfigInvalid("$.potential.kind: cosine_sum_2d needs a two-dimensional frequency");
    return TrigPotential::cosine_sum_2d(coupling, strip);
  }
  if (kind == "zero") return TrigPotential::zero(dim);
  if (kind == "constant") return TrigPotential::constant(p["value"].get<double>(), dim);
  std::vector<TrigPotential::Term> terms;
  for (const auto& t : p["terms"]) {
    const Mode k{t["k"][0].get<int>(), t["k"].size() > 1 ? t["k"][1].get<int>() : 0};
    if (dim == 1 && k[1] != 0) throw ConfigInvalid("$.potential.terms: second mode index needs a 2-d frequency");
    terms.push_back({k, {t["re"].get<double>(), t["im"].get<double>()}});
  }
  try {
    return TrigPotential(dim, terms, strip, coupling);
  } catch (const std::invalid_argument& e) {
    throw ConfigInvalid(std::string("$.potential: ") + e.what());
  }
}

inline Frequency make_frequency(const ExperimentConfig& c) {
  const json& f = c.frequency;
  const double A = f["dio_A"], cc = f["dio_c"];
  if (f["kind"] == "golden") return Frequency::golden(A, cc);
  if (f["kind"] == "default_2d") return Frequency::default_2d(A, cc);
  return Frequency(f["values"].get<std::vector<double>>(), A, cc);
}

inline Sampler make_sampler(const ExperimentConfig& c) {
  Sampler s = c.quadrature == Quadrature::grid ? Sampler::grid(c.samples) : Sampler::monte_carlo(c.samples, c.seed);
  s.threads = c.threads;
  return s;
}

}  // namespace qplab
