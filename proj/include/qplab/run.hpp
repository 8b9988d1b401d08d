#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "qplab/config.hpp"
#include "qplab/greens.hpp"
#include "qplab/io.hpp"
#include "qplab/ldt.hpp"
#include "qplab/localization.hpp"
#include "qplab/lowerbound.hpp"
#include "qplab/lyapunov.hpp"

namespace qplab {

struct RunReport {
  fs::path directory;
  std::vector<std::string> outputs;  ///< file names inside `directory`, manifest last
  double wall_time = 0.0;
};

namespace detail {

/// Outputs collected in memory; `run` writes them one by one, each atomically.
struct OutputSet {
  std::vector<std::pair<std::string, std::string>> files;
  std::vector<PlotData> plots;
  std::vector<std::string> plot_stems;

  void add(std::string name, std::string content) { files.emplace_back(std::move(name), std::move(content)); }
  void plot(PlotData p, std::string stem) {
    plots.push_back(std::move(p));
    plot_stems.push_back(std::move(stem));
  }
};

inline json param(const ExperimentConfig& c, const char* key) {
  if (!c.params.contains(key)) invalid(std::string("$.params.") + key, "missing");
  return c.params[key];
}

inline double param_number(const ExperimentConfig& c, const char* key) {
  return get_number(param(c, key), std::string("$.params.") + key);
}

inline long long param_integer(const ExperimentConfig& c, const char* key) {
  return get_integer(param(c, key), std::string("$.params.") + key);
}

inline std::vector<double> param_numbers(const ExperimentConfig& c, const char* key) {
  const json p = param(c, key);
  const std::string path = std::string("$.params.") + key;
  if (!p.is_array()) invalid(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < p.size(); ++i) out.push_back(get_number(p[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline Phase param_theta(const ExperimentConfig& c) {
  const auto t = param_numbers(c, "theta");
  if (t.empty() || t.size() > 2) invalid("$.params.theta", "expected 1 or 2 numbers");
  return {t[0], t.size() > 1 ? t[1] : 0.0};
}

inline double single_energy(const ExperimentConfig& c) {
  if (c.energies.size() != 1) invalid("$.energies", "this command takes exactly one energy");
  return c.energies[0];
}

inline std::string csv_text(const ExperimentConfig& c, const std::string& header, const std::vector<std::string>& rows) {
  std::string s = provenance_line(c) + header + "\n";
  for (const auto& r : rows) s += r + "\n";
  return s;
}

/// Table output in the configured format: CSV with the provenance line, or a
/// JSON object {config, columns, rows}.
inline void add_table(OutputSet& out, const ExperimentConfig& c, const std::string& stem, const std::string& header,
                      const std::vector<std::string>& rows, const json& json_rows) {
  if (c.format == Format::csv) {
    out.add(stem + ".csv", csv_text(c, header, rows));
  } else {
    json cols = json::array();
    std::stringstream hs(header);
    for (std::string col; std::getline(hs, col, ',');) cols.push_back(col);
    out.add(stem + ".json", json{{"config", provenance_json(c)}, {"columns", cols}, {"rows", json_rows}}.dump(2) + "\n");
  }
}

inline void run_lyapunov(const ExperimentConfig& c, OutputSet& out) {
  const auto v = make_potential(c);
  const auto w = make_frequency(c);
  if (c.energies.empty()) invalid("$.energies", "must be nonempty");
  const Sampler s = make_sampler(c);
  std::vector<std::string> rows;
  json jrows = json::array();
  PlotData plot{PlotKind::lyapunov_vs_E, {}, {"potential coupling " + json(c.potential["coupling"]).dump()}, {}};
  for (long long n : c.n) {
    PlotBlock b{"n=" + std::to_string(n), {}};
    for (double E : c.energies) {
      const auto e = lyapunov_n(w, E, n, v, s);
      rows.push_back(to_csv(e));
      jrows.push_back({e.n, e.E, e.value, e.std_error, e.samples, to_string(e.quadrature)});
      b.points.emplace_back(E, e.value);
    }
    plot.blocks.push_back(std::move(b));
  }
  add_table(out, c, "lyapunov", lyapunov_csv_header(), rows, jrows);
  out.plot(std::move(plot), "lyapunov_vs_E");
}

inline void run_ldt(const ExperimentConfig& c, OutputSet& out) {
  const auto v = make_potential(c);
  const auto w = make_frequency(c);
  if (c.energies.empty()) invalid("$.energies", "must be nonempty");
  const double sigma = param_number(c, "sigma");
  DeviationOptions opt;
  const json gf = param(c, "general_form");
  if (!gf.is_boolean()) invalid("$.params.general_form", "expected a boolean");
  opt.general_form = gf.get<bool>();
  const std::string side = get_string(param(c, "side"), "$.params.side");
  if (side == "two_sided") opt.side = Side::two_sided;
  else if (side == "below") opt.side = Side::below;
  else if (side == "above") opt.side = Side::above;
  else invalid("$.params.side", "expected 'two_sided', 'below' or 'above'");
  opt.threads = c.threads;
  std::vector<std::string> rows;
  json jrows = json::array();
  PlotData plot{PlotKind::ldt_scaling, {}, {"sigma " + json(sigma).dump()}, {}};
  for (double E : c.energies) {
    const auto t = ldt_scaling_table(w, E, v, sigma, c.n, c.samples, c.seed, opt);
    PlotBlock b{"E=" + json(E).dump(), {}};
    for (const auto& r : t.rows) {
      std::ostringstream os;
      os.precision(17);
      os << E << ',' << to_csv(r);
      rows.push_back(os.str());
      jrows.push_back({E, r.profile.n, r.profile.sigma, r.profile.threshold, r.profile.fraction, r.profile.std_error,
                       r.reference});
      b.points.emplace_back(double(r.profile.n), r.profile.fraction);
    }
    plot.blocks.push_back(std::move(b));
  }
  add_table(out, c, "ldt", "E," + ldt_csv_header(), rows, jrows);
  out.plot(std::move(plot), "ldt_scaling");
}

inline void run_green(const ExperimentConfig& c, OutputSet& out) {
  const auto v = make_potential(c);
  const auto w = make_frequency(c);
  const double E = single_energy(c);
  const long long first = param_integer(c, "first");
  const Interval box{first, first + c.n.front() - 1};
  const auto op = build_operator(box, w, param_theta(c), v);
  const std::string method = get_string(param(c, "method"), "$.params.method");
  GreenMatrix g;
  if (method == "solve") g = green_solve(op, E);
  else if (method == "cramer") g = green_cramer_matrix(op, E);
  else invalid("$.params.method", "expected 'solve' or 'cramer'");
  std::vector<std::string> rows;
  json jrows = json::array();
  const std::string body = green_csv(g);
  std::stringstream ss(body);
  std::string line;
  std::getline(ss, line);
  while (std::getline(ss, line)) rows.push_back(line);
  for (long long i = 0; i < g.size(); ++i)
    for (long long j = 0; j < g.size(); ++j) {
      const LogScalar& e = g.local(i, j);
      jrows.push_back({box.first + i, box.first + j, e.sign(), e.log_mag()});
    }
  add_table(out, c, "green", "n1,n2,sign,log_mag", rows, jrows);
}

inline void run_pave(const ExperimentConfig& c, OutputSet& out) {
  const auto v = make_potential(c);
  const auto w = make_frequency(c);
  const double E = single_energy(c);
  const Phase theta = param_theta(c);
  const long long n = c.n.front();
  const long long size = param_integer(c, "size");
  if (size < n) invalid("$.params.size", "must be >= the window size n");
  const Interval I{param_integer(c, "first"), param_integer(c, "first") + size - 1};
  const json rate = param(c, "rate");
  double rate_c;
  bool measured = false;
  if (rate.is_null()) {
    // Smallest decay rate over the window lattice of step n/5.
    if (n < 40) invalid("$.n", "measuring the window rate needs n >= 40");
    rate_c = std::numeric_limits<double>::infinity();
    for (long long s = I.first; s + n - 1 <= I.last; s += std::max(1LL, n / 5))
      rate_c = std::min(rate_c, decay_fit(green_solve({s, s + n - 1}, w, theta, E, v), n / 10).rate);
    measured = true;
  } else {
    rate_c = get_number(rate, "$.params.rate");
  }
  PaveOptions opt;
  opt.beta = param_number(c, "beta");
  opt.threads = c.threads;
  const auto r = pave(I, n, w, theta, E, v, rate_c, {}, opt);
  const auto& cert = r.certificate;
  json windows = json::array();
  for (const auto& iw : cert.windows_used) windows.push_back({iw.first, iw.last});
  json j = {{"config", provenance_json(c)},
            {"interval", {I.first, I.last}},
            {"window_size", n},
            {"window_rate", cert.window_rate},
            {"window_rate_measured", measured},
            {"rate", cert.rate},
            {"intercept", cert.intercept},
            {"max_excess", cert.max_excess},
            {"certified", cert.certified},
            {"contraction", cert.contraction},
            {"iterations", cert.iterations},
            {"windows_used", windows},
            {"failures", cert.failures}};
  out.add("pave.json", j.dump(2) + "\n");
}

inline void run_localize(const ExperimentConfig& c, OutputSet& out) {
  const auto v = make_potential(c);
  const auto w = make_frequency(c);
  if (v.dim() != 1) invalid("$.frequency", "localize works on the circle (d = 1)");
  const Phase theta = param_theta(c);
  const Interval box{param_integer(c, "first"), param_integer(c, "last")};
  if (box.size() < 2) invalid("$.params.last", "box must have at least two sites");
  const double lambda = c.potential["coupling"].get<double>();
  const json mr = param(c, "min_rate");
  const double min_rate = mr.is_null() ? (lambda > 2.0 ? 0.8 * std::log(lambda / 2.0) : 0.0)
                                       : get_number(mr, "$.params.min_rate");
  const double min_r2 = param_number(c, "min_r2");
  const double delta = param_number(c, "delta");
  const long long top = param_integer(c, "top");
  const long long N = c.n.front();
  const auto op = build_operator(box, w, theta, v);
  const auto pairs = eigensystem(op, c.threads);
  const auto summary = summarize_localization(pairs, lambda, min_rate, min_r2);

  std::vector<DecayProfile> profiles;
  std::vector<std::string> rows;
  double max_residual = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    profiles.push_back(decay_profile(pairs[i]));
    const double res = eigen_residual(op, pairs[i]);
    max_residual = std::max(max_residual, res);
    std::ostringstream os;
    os.precision(17);
    os << i << ',' << pairs[i].energy << ',' << profiles[i].center << ',' << profiles[i].rate << ',' << profiles[i].r2
       << ',' << res;
    rows.push_back(os.str());
  }
  out.add("eigen.csv", csv_text(c, "index,energy,center,rate,r2,residual", rows));

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return profiles[a].rate > profiles[b].rate; });
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(std::max(top, 0LL))));
  std::vector<std::string> wrows;
  long long passed = 0;
  for (std::size_t i : order) {
    const long long center = profiles[i].center;
    const int side = center <= (box.first + box.last) / 2 ? 1 : -1;
    std::ostringstream os;
    os.precision(17);
    os << i << ',' << pairs[i].energy << ',' << center << ',' << side << ',';
    try {
      const auto wb = window_bound_check(pairs[i], N, w, theta, pairs[i].energy, delta, v, center, side);
      passed += wb.holds && wb.decay_holds;
      os << wb.holds << ',' << wb.two_term_holds << ',' << wb.worst_ratio << ',' << wb.residual_share << ','
         << wb.log_xi << ',' << wb.log_bound << ',' << wb.decay_holds << ",";
    } catch (const std::invalid_argument& e) {
      os << "0,0,nan,nan,nan,nan,0," << '"' << e.what() << '"';
    }
    wrows.push_back(os.str());
  }
  out.add("window_bounds.csv",
          csv_text(c,
                   "index,energy,center,side,holds,two_term_holds,worst_ratio,residual_share,log_xi,log_bound,"
                   "decay_holds,note",
                   wrows));

  json j = {{"config", provenance_json(c)},
            {"box", {box.first, box.last}},
            {"lambda", lambda},
            {"eigenpairs", pairs.size()},
            {"pct_localized", summary.pct_localized},
            {"median_rate", summary.median_rate},
            {"min_rate", min_rate},
            {"min_r2", min_r2},
            {"max_residual", max_residual},
            {"window_bounds_checked", order.size()},
            {"window_bounds_passed", passed}};
  out.add("summary.json", j.dump(2) + "\n");

  if (!order.empty()) {
    const auto& best = pairs[order.front()];
    PlotBlock b{"E=" + json(best.energy).dump(), {}};
    const long long center = best.center();
    for (long long k = box.first; k <= box.last; ++k)
      b.points.emplace_back(double(std::llabs(k - center)), best.log_abs[static_cast<std::size_t>(k - box.first)]);
    std::stable_sort(b.points.begin(), b.points.end(),
                     [](const auto& a, const auto& q) { return a.first < q.first; });
    out.plot({PlotKind::decay_profile, {std::move(b)}, {"center " + std::to_string(center)}, {}}, "decay_profile");
  }
}

inline void run_lowerbound(const ExperimentConfig& c, OutputSet& out) {
  const auto v = make_potential(c);
  const auto w = make_frequency(c);
  const double delta = param_number(c, "delta");
  const auto targets = param_numbers(c, "targets");
  const auto gap = epsilon_gap(v, delta, targets);
  double lambda;
  if (c.params.contains("lambda") && !c.params["lambda"].is_null()) {
    lambda = param_number(c, "lambda");
  } else {
    lambda = param_number(c, "lambda_epsilon") / gap.epsilon;
  }
  std::vector<double> energies = c.energies;
  if (energies.empty())
    for (double f : param_numbers(c, "energy_fractions")) energies.push_back(f * lambda);
  json growth = json::array();
  for (double E : energies) {
    const auto g = complexified_growth_check(lambda, v, w, E, gap.y0, gap.epsilon, c.n.front());
    growth.push_back({{"E", E},
                      {"lambda_epsilon", g.lambda_epsilon},
                      {"log_rate", g.log_rate},
                      {"grid_infimum", g.grid_infimum},
                      {"margin", g.margin},
                      {"min_margin", g.min_margin},
                      {"u_dominates", g.u_dominates},
                      {"per_step_growth", g.per_step_growth},
                      {"steps", g.steps}});
  }
  const auto ex = param_numbers(c, "sublevel_exponents");
  if (ex.size() != 2 || ex[0] > ex[1]) invalid("$.params.sublevel_exponents", "expected [lo, hi] with lo <= hi");
  const auto sl_targets = param_numbers(c, "sublevel_targets");
  const long long sl_samples = param_integer(c, "sublevel_samples");
  if (sl_samples < 0) invalid("$.params.sublevel_samples", "must be >= 0");
  const auto sm = sublevel_measure(v.with_coupling(1.0), sl_targets, dyadic_ladder(int(ex[0]), int(ex[1])),
                                   static_cast<std::size_t>(sl_samples), c.seed, c.threads);
  json fits = json::array();
  for (const auto& f : sm.fits) fits.push_back({{"E1", f.E1}, {"c0", f.c0}, {"r2", f.r2}});
  json j = {{"config", provenance_json(c)},
            {"epsilon_gap",
             {{"delta", gap.delta},
              {"y0", gap.y0},
              {"epsilon", gap.epsilon},
              {"grid_minimum", gap.grid_minimum},
              {"E1", gap.E1},
              {"stable", gap.stable}}},
            {"lambda", lambda},
            {"complexified_growth", growth},
            {"sublevel", fits}};
  out.add("lowerbound.json", j.dump(2) + "\n");
}

inline void run_recursion(const ExperimentConfig& c, OutputSet& out) {
  const auto v = make_potential(c);
  const auto w = make_frequency(c);
  const double lambda = c.potential["coupling"].get<double>();
  RecursionOptions opt;
  opt.E = single_energy(c);
  opt.samples = c.samples ? c.samples : 4096;
  opt.seed = c.seed;
  opt.threads = c.threads;
  const json strict = param(c, "strict");
  if (!strict.is_boolean()) invalid("$.params.strict", "expected a boolean");
  opt.strict = strict.get<bool>();
  const long long ldt_samples = param_integer(c, "ldt_samples");
  if (ldt_samples < 0) invalid("$.params.ldt_samples", "must be >= 0");
  opt.ldt_samples = static_cast<std::size_t>(ldt_samples);
  const auto ladder = multiscale_recursion(lambda, v.with_coupling(1.0), w, c.n, param_number(c, "sigma"), opt);

  json rungs = json::array(), brief = json::array();
  PlotBlock b{"L_n", {}};
  for (const auto& r : ladder.rungs) {
    brief.push_back({{"n", r.n}, {"L", r.L}, {"std_error", r.std_error}, {"rho", r.rho}, {"gate_ok", r.gate_ok},
                     {"drop_margin", r.drop_margin}});
    rungs.push_back({{"n", r.n},
                     {"L", r.L},
                     {"std_error", r.std_error},
                     {"rho", r.rho},
                     {"gate_lhs", r.gate_lhs},
                     {"gate_rhs", r.gate_rhs},
                     {"gate_ok", r.gate_ok},
                     {"gamma", r.gamma},
                     {"drop", r.drop},
                     {"drop_bound", r.drop_bound},
                     {"drop_margin", r.drop_margin},
                     {"drop_ok", r.drop_ok},
                     {"short_drop_bound", r.short_drop_bound},
                     {"short_drop_ok", r.short_drop_ok},
                     {"bad_fraction", r.bad_fraction},
                     {"bad_reference", r.bad_reference}});
    b.points.emplace_back(double(r.n), r.L);
  }
  out.add("ladder.json", brief.dump(2) + "\n");
  json j = {{"config", provenance_json(c)},
            {"rungs", rungs},
            {"log_v", ladder.log_v},
            {"sigma", ladder.sigma},
            {"min_L", ladder.min_L},
            {"half_log_lambda", ladder.half_log_lambda},
            {"lower_bound_ok", ladder.lower_bound_ok},
            {"gates_ok", ladder.gates_ok},
            {"drops_ok", ladder.drops_ok},
            {"product_bound", ladder.product_bound},
            {"product_ok", ladder.product_ok},
            {"schedule_note", ladder.schedule_note}};
  out.add("recursion.json", j.dump(2) + "\n");
  out.plot({PlotKind::ladder, {std::move(b)}, {"half_log_lambda " + json(ladder.half_log_lambda).dump()},
            ladder.half_log_lambda},
           "ladder");
}

}  // namespace detail

/// Runs the configured command, then writes every output and finally the
/// manifest into `config.output`, one file at a time.
inline RunReport run(const ExperimentConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  const unsigned saved = default_threads();
  default_threads() = c.threads;
  detail::OutputSet out;
  try {
    switch (c.command) {
      case Command::lyapunov: detail::run_lyapunov(c, out); break;
      case Command::ldt: detail::run_ldt(c, out); break;
      case Command::green: detail::run_green(c, out); break;
      case Command::pave: detail::run_pave(c, out); break;
      case Command::localize: detail::run_localize(c, out); break;
      case Command::lowerbound: detail::run_lowerbound(c, out); break;
      case Command::recursion: detail::run_recursion(c, out); break;
    }
  } catch (const error&) {
    default_threads() = saved;
    throw;
  } catch (const std::invalid_argument& e) {
    default_threads() = saved;
    throw ConfigInvalid(std::string("$.params: rejected by ") + to_string(c.command) + " (" + e.what() + ")");
  } catch (...) {
    default_threads() = saved;
    throw;
  }
  default_threads() = saved;

  RunReport rep;
  rep.directory = c.output;
  fs::create_directories(rep.directory);
  for (const auto& [name, content] : out.files) {
    write_atomic(rep.directory / name, content);
    rep.outputs.push_back(name);
  }
  for (std::size_t i = 0; i < out.plots.size(); ++i)
    for (const auto& p : emit_plot_data(out.plots[i], rep.directory, out.plot_stems[i]))
      rep.outputs.push_back(fs::path(p).filename().string());
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_atomic(rep.directory / "manifest.json", manifest_json(c, rep.wall_time, rep.outputs).dump(2) + "\n");
  rep.outputs.push_back("manifest.json");
  return rep;
}

/// Column documentation printed by `qplab --help`.
inline std::string output_columns_help() {
  return "Outputs (CSV files start with a '# config {...}' provenance line):\n"
         "  lyapunov    lyapunov.csv       n,E,value,std_error,samples,quadrature\n"
         "              lyapunov_vs_E.dat  E  L_n(E), one block per n\n"
         "  ldt         ldt.csv            E,n,sigma,threshold,fraction,std_error,bound_reference\n"
         "              ldt_scaling.dat    n  fraction, one block per E\n"
         "  green       green.csv          n1,n2,sign,log_mag  (G(n1,n2) = sign * exp(log_mag))\n"
         "  pave        pave.json          certificate: window_rate, rate, max_excess, certified, contraction, ...\n"
         "  localize    eigen.csv          index,energy,center,rate,r2,residual\n"
         "              window_bounds.csv  index,energy,center,side,holds,two_term_holds,worst_ratio,\n"
         "                                 residual_share,log_xi,log_bound,decay_holds,note\n"
         "              summary.json       box, lambda, pct_localized, median_rate, ...\n"
         "              decay_profile.dat  |k - center|  log|xi_k| for the most localized eigenvector\n"
         "  lowerbound  lowerbound.json    epsilon_gap, complexified_growth per E, sublevel fits\n"
         "  recursion   ladder.json        [{n, L, std_error, rho, gate_ok, drop_margin}]\n"
         "              recursion.json     full ladder report\n"
         "              ladder.dat         n_j  L_{n_j}, header holds half_log_lambda\n"
         "  every run   manifest.json      config, config_hash, versions, wall time, outputs\n"
         "With \"format\": \"json\", lyapunov/ldt/green write {config, columns, rows} instead of CSV.\n";
}

}  // namespace qplab
