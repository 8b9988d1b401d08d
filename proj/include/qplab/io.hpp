#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qplab/config.hpp"

namespace qplab {

inline constexpr const char* kVersion = "0.1.0";

namespace fs = std::filesystem;

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers see either the old file or the complete new one.
/// If `fill` throws, the temporary is removed and the target is untouched.
inline void write_atomic(const fs::path& path, const std::function<void(std::ostream&)>& fill) {
  const fs::path tmp = path.parent_path() / ("." + path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    try {
      fill(out);
      out.flush();
      if (!out) throw std::runtime_error("write to " + tmp.string() + " failed");
    } catch (...) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw;
    }
  }
  fs::rename(tmp, path);
}

inline void write_atomic(const fs::path& path, const std::string& content) {
  write_atomic(path, [&](std::ostream& os) { os << content; });
}

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// The config without `output` and `threads`, which do not affect results.
/// This is what data files echo and what the hash covers, so a re-run into
/// another directory or with another thread count gives identical bytes.
inline json provenance_json(const ExperimentConfig& c) {
  json j = to_json(c);
  j.erase("output");
  j.erase("threads");
  return j;
}

inline std::string config_hash(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(provenance_json(c).dump())));
  return buf;
}

/// "# config {...}" line echoed at the top of every CSV output.
inline std::string provenance_line(const ExperimentConfig& c) { return "# config " + provenance_json(c).dump() + "\n"; }

inline json manifest_json(const ExperimentConfig& c, double wall_time, const std::vector<std::string>& outputs) {
  return {{"schema_version", kSchemaVersion},
          {"command", to_string(c.command)},
          {"config", to_json(c)},
          {"config_hash", config_hash(c)},
          {"versions", {{"qplab", kVersion}, {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                                    std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                                    std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
#if defined(__clang__)
                        {"compiler", "clang " __clang_version__},
#elif defined(__GNUC__)
                        {"compiler", "gcc " __VERSION__},
#else
                        {"compiler", "unknown"},
#endif
                        {"cxx", static_cast<long>(__cplusplus)}}},
          {"wall_time_seconds", wall_time},
          {"outputs", outputs}};
}

enum class PlotKind { lyapunov_vs_E, decay_profile, ldt_scaling, ladder };

inline const char* to_string(PlotKind k) {
  switch (k) {
    case PlotKind::lyapunov_vs_E: return "lyapunov_vs_E";
    case PlotKind::decay_profile: return "decay_profile";
    case PlotKind::ldt_scaling: return "ldt_scaling";
    case PlotKind::ladder: return "ladder";
  }
  return "";
}

/// One gnuplot data block (blocks are separated by two blank lines).
struct PlotBlock {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

struct PlotData {
  PlotKind kind = PlotKind::lyapunov_vs_E;
  std::vector<PlotBlock> blocks;
  std::vector<std::string> notes;  ///< extra header lines, without the leading '#'
  std::optional<double> reference; ///< horizontal reference line drawn by the stub
};

/// Writes `<stem>.dat` (whitespace-separated two-column blocks) and `<stem>.gp`
/// (a gnuplot script that plots it). Nothing is rendered. Returns both paths.
inline std::vector<std::string> emit_plot_data(const PlotData& data, const fs::path& dir, const std::string& stem) {
  std::size_t total = 0;
  for (const auto& b : data.blocks) total += b.points.size();
  if (total == 0) throw std::invalid_argument("emit_plot_data: empty result set, nothing written");
  const char* xl = "x";
  const char* yl = "y";
  switch (data.kind) {
    case PlotKind::lyapunov_vs_E: xl = "E", yl = "L_n(E)"; break;
    case PlotKind::decay_profile: xl = "|k - center|", yl = "log|xi_k|"; break;
    case PlotKind::ldt_scaling: xl = "n", yl = "deviation fraction"; break;
    case PlotKind::ladder: xl = "n_j", yl = "L_{n_j}"; break;
  }
  std::ostringstream dat;
  dat.precision(17);
  dat << "# kind " << to_string(data.kind) << "\n# columns: " << xl << "  " << yl << "\n";
  for (const auto& note : data.notes) dat << "# " << note << "\n";
  bool first = true;
  for (const auto& b : data.blocks) {
    if (b.points.empty()) continue;
    if (!first) dat << "\n\n";
    first = false;
    dat << "# block " << b.label << "\n";
    for (const auto& [x, y] : b.points) dat << x << ' ' << y << '\n';
  }
  std::ostringstream gp;
  gp.precision(17);
  gp << "set xlabel '" << xl << "'\nset ylabel '" << yl << "'\n";
  if (data.kind == PlotKind::ldt_scaling) gp << "set logscale xy\n";
  gp << "plot ";
  std::size_t idx = 0;
  for (const auto& b : data.blocks) {
    if (b.points.empty()) continue;
    gp << (idx ? ", \\\n     " : "") << "'" << stem << ".dat' index " << idx << " with linespoints title '" << b.label
       << "'";
    ++idx;
  }
  if (data.reference) gp << ", \\\n     " << *data.reference << " title 'reference'";
  gp << "\n";
  const fs::path dat_path = dir / (stem + ".dat"), gp_path = dir / (stem + ".gp");
  write_atomic(dat_path, dat.str());
  write_atomic(gp_path, gp.str());
  return {dat_path.string(), gp_path.string()};
}

}  // namespace qplab
