#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qplab/cli.hpp"

using namespace qplab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  fs::path p = fs::temp_directory_path() / "qplab_test_cli" / (std::string(info->test_suite_name()) + "_" +
                                                              info->name() + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

struct CliResult {
  int code;
  std::string out, err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "qplab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> data_lines(const std::string& csv) {
  std::vector<std::string> rows;
  std::stringstream ss(csv);
  for (std::string line; std::getline(ss, line);)
    if (!line.empty() && line[0] != '#') rows.push_back(line);
  return rows;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);) out.push_back(item);
  return out;
}

json minimal(const std::string& command) { return {{"schema_version", 1}, {"command", command}}; }

std::string config_error(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigInvalid& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  for (const auto& name : command_names()) {
    const auto c = default_config(*parse_command(name));
    const json j = to_json(c);
    EXPECT_EQ(to_json(parse_config(j)), j) << name;
    EXPECT_EQ(config_hash(parse_config(j)), config_hash(c));
  }
}

TEST(Config, FlagshipDefaults) {
  const auto loc = default_config(Command::localize);
  EXPECT_EQ(loc.potential["coupling"], 5.0);
  EXPECT_EQ(loc.params["first"], -500);
  EXPECT_EQ(loc.params["last"], 500);
  const auto rec = default_config(Command::recursion);
  EXPECT_EQ(rec.potential["coupling"], 50.0);
  EXPECT_EQ(make_potential(rec).dim(), 2);
  EXPECT_EQ(rec.n, (std::vector<long long>{200, 400, 800, 1600}));
}

TEST(Config, EnergyGrid) {
  json j = minimal("lyapunov");
  j["energies"] = {{"min", -7.0}, {"max", 7.0}, {"count", 50}};
  const auto c = parse_config(j);
  ASSERT_EQ(c.energies.size(), 50u);
  EXPECT_EQ(c.energies.front(), -7.0);
  EXPECT_EQ(c.energies.back(), 7.0);
  EXPECT_NEAR(c.energies[1] - c.energies[0], 14.0 / 49.0, 1e-15);
}

TEST(Config, UserParamsMergeWithDefaults) {
  json j = minimal("localize");
  j["params"] = {{"first", -50}, {"last", 50}};
  const auto c = parse_config(j);
  EXPECT_EQ(c.params["first"], -50);
  EXPECT_EQ(c.params["delta"], 0.5);
}

TEST(Config, SchemaPathsInErrors) {
  EXPECT_NE(config_error(json{{"command", "ldt"}}).find("$.schema_version"), std::string::npos);
  EXPECT_NE(config_error(json{{"schema_version", 2}, {"command", "ldt"}}).find("$.schema_version"), std::string::npos);
  EXPECT_NE(config_error(minimal("nope")).find("$.command"), std::string::npos);
  json j = minimal("ldt");
  j["bogus"] = 1;
  EXPECT_NE(config_error(j).find("$.bogus"), std::string::npos);
  j = minimal("ldt");
  j["potential"] = {{"kind", "cosine"}, {"coupling", "five"}};
  EXPECT_NE(config_error(j).find("$.potential.coupling"), std::string::npos);
  j = minimal("lyapunov");
  j["energies"] = {{"min", 0.0}, {"max", 1.0}, {"count", 0}};
  EXPECT_NE(config_error(j).find("$.energies.count"), std::string::npos);
  j = minimal("ldt");
  j["n"] = {50, -1};
  EXPECT_NE(config_error(j).find("$.n[1]"), std::string::npos);
  j = minimal("ldt");
  j["frequency"] = {{"kind", "custom"}, {"values", json::array()}};
  EXPECT_NE(config_error(j).find("$.frequency.values"), std::string::npos);
  j = minimal("ldt");
  j["potential"] = {{"kind", "fourier"}, {"terms", {{{"k", {1}}, {"re", 0.5}, {"phase", 0.0}}}}};
  EXPECT_NE(config_error(j).find("$.potential.terms[0].phase"), std::string::npos);
  EXPECT_THROW(parse_config_text("{\"schema_version\": 1,"), ConfigInvalid);
  EXPECT_THROW(parse_config(json::array()), ConfigInvalid);
}

TEST(Config, FourierPotentialMatchesCosine) {
  json j = minimal("lyapunov");
  j["potential"] = {{"kind", "fourier"},
                    {"coupling", 3.0},
                    {"terms", {{{"k", {1}}, {"re", 0.5}}, {{"k", {-1}}, {"re", 0.5}}}}};
  const auto v = make_potential(parse_config(j));
  const auto cosv = TrigPotential::cosine(3.0);
  for (double x : {0.0, 0.1, 0.37, 0.8}) EXPECT_NEAR(v({x, 0.0}), cosv({x, 0.0}), 1e-14);
  j["potential"]["terms"][1]["re"] = 0.4;
  EXPECT_THROW(make_potential(parse_config(j)), ConfigInvalid);
  j = minimal("lyapunov");
  j["potential"] = {{"kind", "cosine_sum_2d"}};
  EXPECT_THROW(make_potential(parse_config(j)), ConfigInvalid);
}

TEST(Run, LyapunovScanShape) {
  const auto dir = scratch("out");
  json j = minimal("lyapunov");
  j["energies"] = {{"min", -7.0}, {"max", 7.0}, {"count", 50}};
  j["n"] = {2000};
  j["output"] = dir.string();
  const auto cfg = parse_config(j);
  const auto rep = run(cfg);
  EXPECT_EQ(rep.outputs.back(), "manifest.json");
  const std::string csv = slurp(dir / "lyapunov.csv");
  EXPECT_EQ(csv.rfind("# config {", 0), 0u);
  const auto rows = data_lines(csv);
  ASSERT_EQ(rows.size(), 51u);
  EXPECT_EQ(rows[0], "n,E,value,std_error,samples,quadrature");
  for (std::size_t i = 1; i < rows.size(); ++i) ASSERT_EQ(split(rows[i], ',').size(), 6u);
  // Row values agree with a direct call.
  const auto direct = lyapunov_n(make_frequency(cfg), 7.0, 2000, make_potential(cfg), make_sampler(cfg));
  const auto last = split(rows.back(), ',');
  EXPECT_EQ(std::stod(last[1]), 7.0);
  EXPECT_EQ(std::stod(last[2]), direct.value);
  EXPECT_EQ(std::stoul(last[4]), 200u);
  // Plot data: one block of 50 (E, L) pairs.
  const auto dat = data_lines(slurp(dir / "lyapunov_vs_E.dat"));
  EXPECT_EQ(dat.size(), 50u);
  EXPECT_TRUE(fs::exists(dir / "lyapunov_vs_E.gp"));
}

TEST(Run, LdtOneRowPerScale) {
  const auto dir = scratch("out");
  json j = minimal("ldt");
  j["n"] = {20, 40, 80};
  j["samples"] = 2000;
  j["output"] = dir.string();
  run(parse_config(j));
  const auto rows = data_lines(slurp(dir / "ldt.csv"));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "E,n,sigma,threshold,fraction,std_error,bound_reference");
  EXPECT_EQ(split(rows[1], ',')[1], "20");
  EXPECT_EQ(split(rows[3], ',')[1], "80");
}

TEST(Run, JsonTableFormat) {
  const auto dir = scratch("out");
  json j = minimal("green");
  j["n"] = {12};
  j["format"] = "json";
  j["output"] = dir.string();
  run(parse_config(j));
  const json g = json::parse(slurp(dir / "green.json"));
  EXPECT_EQ(g["columns"], json({"n1", "n2", "sign", "log_mag"}));
  EXPECT_EQ(g["rows"].size(), 144u);
  EXPECT_EQ(g["config"]["n"], json({12}));
}

TEST(Run, LocalizeSmallBox) {
  const auto dir = scratch("out");
  json j = minimal("localize");
  j["params"] = {{"first", -60}, {"last", 60}, {"top", 3}};
  j["n"] = {20};
  j["output"] = dir.string();
  run(parse_config(j));
  const json s = json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(s["box"], json({-60, 60}));
  EXPECT_EQ(s["eigenpairs"], 121);
  EXPECT_GT(s["pct_localized"].get<double>(), 50.0);
  EXPECT_EQ(data_lines(slurp(dir / "eigen.csv")).size(), 122u);
  EXPECT_EQ(data_lines(slurp(dir / "window_bounds.csv")).size(), 4u);
  // decay profile pairs (|k - center|, log|xi_k|) start at distance 0
  const auto dat = data_lines(slurp(dir / "decay_profile.dat"));
  ASSERT_EQ(dat.size(), 121u);
  EXPECT_EQ(split(dat[0], ' ')[0], "0");
}

TEST(Run, RecursionLadderReport) {
  const auto dir = scratch("out");
  json j = minimal("recursion");
  j["n"] = {20, 40};
  j["samples"] = 256;
  j["params"] = {{"ldt_samples", 0}};
  j["output"] = dir.string();
  run(parse_config(j));
  const json ladder = json::parse(slurp(dir / "ladder.json"));
  ASSERT_EQ(ladder.size(), 2u);
  for (const char* key : {"n", "L", "std_error", "rho", "gate_ok", "drop_margin"})
    EXPECT_TRUE(ladder[0].contains(key)) << key;
  EXPECT_EQ(ladder[0].size(), 6u);
  const std::string dat = slurp(dir / "ladder.dat");
  const json full = json::parse(slurp(dir / "recursion.json"));
  std::ostringstream ref;
  ref << "# half_log_lambda " << json(full["half_log_lambda"]).dump();
  EXPECT_NE(dat.find(ref.str()), std::string::npos);
  EXPECT_NEAR(full["half_log_lambda"].get<double>(), 0.5 * std::log(50.0), 1e-12);
}

TEST(Run, LowerboundReport) {
  const auto dir = scratch("out");
  json j = minimal("lowerbound");
  j["n"] = {100};
  j["params"] = {{"sublevel_samples", 20000}};
  j["output"] = dir.string();
  run(parse_config(j));
  const json r = json::parse(slurp(dir / "lowerbound.json"));
  const double eps = r["epsilon_gap"]["epsilon"];
  EXPECT_NEAR(r["lambda"].get<double>() * eps, 101.0, 1e-9);
  ASSERT_EQ(r["complexified_growth"].size(), 2u);
  EXPECT_TRUE(r["complexified_growth"][1]["u_dominates"].get<bool>());
  EXPECT_EQ(r["sublevel"].size(), 2u);
}

TEST(Run, ByteIdenticalReruns) {
  const auto dir = scratch("out");
  json j = minimal("lyapunov");
  j["energies"] = {0.0, 1.5};
  j["n"] = {50, 100};
  j["quadrature"] = "monte_carlo";
  j["samples"] = 300;
  j["seed"] = 7;
  j["output"] = dir.string();
  const auto cfg = parse_config(j);
  const auto first = run(cfg);
  std::vector<std::string> before;
  for (const auto& f : first.outputs)
    if (f != "manifest.json") before.push_back(slurp(dir / f));
  const auto second = run(cfg);
  ASSERT_EQ(first.outputs, second.outputs);
  std::size_t k = 0;
  for (const auto& f : second.outputs)
    if (f != "manifest.json") EXPECT_EQ(slurp(dir / f), before[k++]) << f;
  // A different seed changes the Monte Carlo values.
  j["seed"] = 8;
  run(parse_config(j));
  EXPECT_NE(slurp(dir / "lyapunov.csv"), before[0]);
}

TEST(Run, ThreadCountDoesNotChangeValues) {
  const auto a = scratch("a"), b = scratch("b");
  json j = minimal("ldt");
  j["n"] = {30, 60};
  j["samples"] = 3000;
  j["params"] = {{"sigma", 0.05}};
  j["output"] = a.string();
  run(parse_config(j));
  j["threads"] = 3;
  j["output"] = b.string();
  run(parse_config(j));
  EXPECT_EQ(slurp(a / "ldt.csv"), slurp(b / "ldt.csv"));
  EXPECT_EQ(slurp(a / "ldt_scaling.dat"), slurp(b / "ldt_scaling.dat"));
}

TEST(Run, ManifestRoundTrip) {
  const auto dir = scratch("out");
  json j = minimal("ldt");
  j["n"] = {25, 50};
  j["samples"] = 1500;
  j["seed"] = 11;
  j["output"] = dir.string();
  const auto cfg = parse_config(j);
  run(cfg);
  const std::string csv = slurp(dir / "ldt.csv");
  const json m = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(m["schema_version"], 1);
  EXPECT_EQ(m["command"], "ldt");
  EXPECT_EQ(m["config_hash"], config_hash(cfg));
  EXPECT_EQ(m["versions"]["qplab"], kVersion);
  EXPECT_GE(m["wall_time_seconds"].get<double>(), 0.0);
  EXPECT_EQ(m["outputs"], json({"ldt.csv", "ldt_scaling.dat", "ldt_scaling.gp"}));
  // The manifest is itself a valid config and re-runs to the same bytes.
  const auto again = parse_config(m);
  EXPECT_EQ(config_hash(again), config_hash(cfg));
  const auto copy = dir / "manifest_copy.json";
  spit(copy, m.dump());
  fs::remove(dir / "ldt.csv");
  auto r = cli({"ldt", "--config", copy.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir / "ldt.csv"), csv);
  // Elsewhere, with more threads: same bytes, same hash.
  const auto other = scratch("other");
  r = cli({"ldt", "--config", (dir / "manifest.json").string(), "--out", other.string(), "--threads", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(other / "ldt.csv"), csv);
  EXPECT_EQ(json::parse(slurp(other / "manifest.json"))["config_hash"], m["config_hash"]);
}

TEST(Io, AtomicWriteKeepsOldContentOnFailure) {
  const auto dir = scratch("io");
  const auto target = dir / "table.csv";
  write_atomic(target, std::string("old\n"));
  EXPECT_THROW(write_atomic(target,
                            [](std::ostream& os) {
                              os << "partial";
                              throw std::runtime_error("interrupted");
                            }),
               std::runtime_error);
  EXPECT_EQ(slurp(target), "old\n");
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    ++files;
    EXPECT_EQ(e.path().filename(), "table.csv");
  }
  EXPECT_EQ(files, 1u);
  write_atomic(target, std::string("new\n"));
  EXPECT_EQ(slurp(target), "new\n");
  EXPECT_THROW(write_atomic(dir / "missing" / "x.csv", std::string("x")), std::runtime_error);
}

TEST(Io, RunLeavesNoTemporaries) {
  const auto dir = scratch("out");
  json j = minimal("green");
  j["n"] = {8};
  j["output"] = dir.string();
  const auto rep = run(parse_config(j));
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  auto expected = rep.outputs;
  std::sort(expected.begin(), expected.end());
  EXPECT_EQ(names, expected);
}

TEST(Io, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(PlotData, EmptySetRefusedBeforeWrite) {
  const auto dir = scratch("plot");
  EXPECT_THROW(emit_plot_data({PlotKind::ladder, {}, {}, {}}, dir, "ladder"), std::invalid_argument);
  EXPECT_THROW(emit_plot_data({PlotKind::ladder, {{"L_n", {}}}, {}, {}}, dir, "ladder"), std::invalid_argument);
  EXPECT_TRUE(fs::is_empty(dir));
}

TEST(PlotData, BlocksAndStub) {
  const auto dir = scratch("plot");
  PlotData d{PlotKind::lyapunov_vs_E, {{"n=10", {{0.0, 1.0}, {1.0, 2.0}}}, {"n=20", {{0.0, 1.5}}}}, {"note"}, {}};
  const auto files = emit_plot_data(d, dir, "scan");
  ASSERT_EQ(files.size(), 2u);
  const std::string dat = slurp(dir / "scan.dat");
  EXPECT_NE(dat.find("0 1\n1 2\n\n\n# block n=20\n0 1.5\n"), std::string::npos);
  EXPECT_NE(dat.find("# note\n"), std::string::npos);
  const std::string gp = slurp(dir / "scan.gp");
  EXPECT_NE(gp.find("'scan.dat' index 1"), std::string::npos);
}

TEST(Cli, MalformedJsonExitsTwo) {
  const auto dir = scratch("cfg");
  spit(dir / "bad.json", "{\"schema_version\": 1, \"command\": ");
  const auto r = cli({"ldt", "--config", (dir / "bad.json").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("ConfigInvalid", 0), 0u);
  EXPECT_NE(r.err.find("malformed JSON"), std::string::npos);
}

TEST(Cli, ConfigErrorsExitTwo) {
  const auto dir = scratch("cfg");
  EXPECT_EQ(cli({"ldt", "--config", (dir / "absent.json").string()}).code, 2);
  spit(dir / "ldt.json", minimal("ldt").dump());
  EXPECT_EQ(cli({"green", "--config", (dir / "ldt.json").string()}).code, 2);
  EXPECT_EQ(cli({"recursion", "--schedule", "200,x"}).code, 2);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({"ldt", "--threads", "0"}).code, 2);
  // A value the module rejects is reported as a config problem too.
  json j = minimal("ldt");
  j["samples"] = 10;
  spit(dir / "few.json", j.dump());
  const auto r = cli({"ldt", "--config", (dir / "few.json").string(), "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("ConfigInvalid"), std::string::npos);
}

TEST(Cli, ModuleErrorNameOnStderr) {
  const auto dir = scratch("cfg");
  json j = minimal("lowerbound");
  j["params"] = {{"delta", 0.5}};
  spit(dir / "strip.json", j.dump());
  const auto r = cli({"lowerbound", "--config", (dir / "strip.json").string(), "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(r.err.rfind("StripExceeded", 0), 0u);
  EXPECT_FALSE(fs::exists(dir / "o" / "manifest.json"));
}

TEST(Cli, OverridesAndSchedule) {
  const auto dir = scratch("out");
  json j = minimal("recursion");
  j["samples"] = 256;
  j["params"] = {{"ldt_samples", 0}};
  spit(dir / "rec.json", j.dump());
  const auto r = cli({"recursion", "--config", (dir / "rec.json").string(), "--schedule", "16,32,64", "--seed", "5",
                      "--threads", "2", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json m = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(m["config"]["n"], json({16, 32, 64}));
  EXPECT_EQ(m["config"]["seed"], 5);
  EXPECT_EQ(m["config"]["threads"], 2);
  EXPECT_EQ(json::parse(slurp(dir / "ladder.json")).size(), 3u);
}

TEST(Cli, HelpDocumentsColumns) {
  const auto r = cli({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("n,E,value,std_error,samples,quadrature"), std::string::npos);
  EXPECT_NE(r.out.find("E,n,sigma,threshold,fraction,std_error,bound_reference"), std::string::npos);
  EXPECT_NE(r.out.find("--schedule"), std::string::npos);
}
