#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <json.hpp>

#include "sfwm/io/config.hpp"
#include "sfwm/io/csv.hpp"

using namespace sfwm;
using namespace sfwm::io;
namespace fs = std::filesystem;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// CSV body without metadata lines.
std::string body(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line, out;
  while (std::getline(in, line))
    if (line.empty() || line[0] != '#') out += line + "\n";
  return out;
}

Table table(const fs::path& p) {
  std::ifstream in(p);
  return read_csv(in);
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sfwm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
    return path(name);
  }
  static std::string config(const std::string& name) { return std::string(SFWM_CONFIG_DIR) + "/" + name; }

  // Runs the CLI; stdout+stderr go to `log`. Returns the exit status.
  int run(const std::string& args) {
    log_ = path("log.txt");
    const std::string cmd = std::string(SFWM_CLI) + " " + args + " > " + log_.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string log() const { return slurp(log_); }

  fs::path dir_;
  fs::path log_;
};

// First number after `label` in the CLI log.
double summary_value(const std::string& log, const std::string& label) {
  const auto at = log.find(label);
  if (at == std::string::npos) return std::nan("");
  return std::stod(log.substr(at + label.size()));
}

}  // namespace

// --- config ---

TEST(Config, EmptyFileGivesDefaults) {
  const auto c = parse("");
  EXPECT_EQ(c.medium.alpha_s, 82.0);
  EXPECT_NEAR(c.drive.omega_c, 2.7, 1e-12);
  EXPECT_NEAR(c.drive.omega_p, 2.0, 1e-12);
  EXPECT_EQ(c.etalons.fwhm_hz.size(), 2u);
  EXPECT_EQ(c.detection.seed, 1u);
}

TEST(Config, ExternalUnitsAreConverted) {
  const auto c = parse(
      "# comment\n"
      "[medium]\n"
      "optical_depth_s = 80   # trailing comment\n"
      "decoherence_mhz = 0.168\n"
      "[drive]\n"
      "coupling_rabi_mhz = 15.6\n"
      "pump_detuning_mhz = -2000\n"
      "[run]\n"
      "seed = 42\n");
  EXPECT_EQ(c.medium.alpha_s, 80.0);
  EXPECT_NEAR(c.medium.gamma, 0.028, 1e-12);
  EXPECT_NEAR(c.drive.omega_c, 2.6, 1e-12);
  EXPECT_NEAR(c.drive.delta_p, -333.333333333, 1e-6);
  EXPECT_EQ(c.detection.seed, 42u);
}

TEST(Config, CouplingPowerSetsRabiFrequency) {
  const auto c = parse("[drive]\ncoupling_power_mw = 0.05\n");
  EXPECT_NEAR(c.drive.omega_c, 2.7 * std::sqrt(0.05), 1e-12);
  EXPECT_EQ(c.coupling_power_mw, 0.05);
}

TEST(Config, EtalonsCanBeDisabled) {
  const auto c = parse("[etalon]\nenabled = false\n");
  EXPECT_TRUE(c.etalons.fwhm_hz.empty());
  const auto d = parse("[etalon]\nfwhm_mhz = 30\nmode = intensity\n");
  ASSERT_EQ(d.etalons.fwhm_hz.size(), 1u);
  EXPECT_EQ(d.etalons.fwhm_hz[0], 30e6);
  EXPECT_EQ(d.etalons.mode, biphoton::FilterMode::intensity);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse("[medium]\nfoo = 1\n"), UsageError);
  EXPECT_THROW(parse("[nowhere]\n"), UsageError);
  EXPECT_THROW(parse("[medium]\noptical_depth_s = 80\noptical_depth_s = 81\n"), UsageError);
  EXPECT_THROW(parse("optical_depth_s = 80\n"), UsageError);
  EXPECT_THROW(parse("[medium\n"), UsageError);
  EXPECT_THROW(parse("[medium]\noptical_depth_s\n"), UsageError);
  EXPECT_THROW(parse("[medium]\noptical_depth_s = eighty\n"), UsageError);
  EXPECT_THROW(parse("[medium]\noptical_depth_s = -1\n"), UsageError);
  EXPECT_THROW(parse("[synth]\nsuccess_probability = 0.01\ntarget_sbr = 5\n"), UsageError);
  EXPECT_THROW(parse("[etalon]\nmode = phase\n"), UsageError);
  EXPECT_THROW(parse("[run]\nseed = -3\n"), UsageError);
  EXPECT_THROW(parse("[grid]\ncount = 10.5\n"), UsageError);
}

TEST(Config, CanonicalTextIgnoresLayout) {
  const auto a = parse("[medium]\noptical_depth_s = 80\ndecoherence_mhz = 0.168\n");
  const auto b = parse("# x\n[medium]\n  decoherence_mhz=0.168  \n\noptical_depth_s= 80 # y\n");
  EXPECT_EQ(a.canonical, b.canonical);
}

TEST(Config, ShippedConfigsParse) {
  for (const char* name : {"eit_strong.cfg", "eit_weak.cfg", "packet_strong.cfg", "packet_weak.cfg", "sweep.cfg", "synth.cfg"})
    EXPECT_NO_THROW(load_config(std::string(SFWM_CONFIG_DIR) + "/" + name)) << name;
  EXPECT_THROW(load_config("/nonexistent/file.cfg"), UsageError);
}

// --- CSV ---

TEST(Csv, RoundTripKeepsNineDigits) {
  boost::random::mt19937_64 rng(4);
  boost::random::uniform_real_distribution<double> mant(-1.0, 1.0), expo(-12.0, 12.0);
  Table t{{"a", "b"}, {}};
  for (int i = 0; i < 500; ++i) t.rows.push_back({mant(rng) * std::pow(10.0, expo(rng)), mant(rng)});
  t.rows.push_back({0.0, -0.0});
  std::stringstream ss;
  write_csv(ss, {{"seed", "4"}, {"note", "x=y"}}, t);
  Metadata meta;
  const auto back = read_csv(ss, &meta);
  ASSERT_EQ(back.columns, t.columns);
  ASSERT_EQ(back.rows.size(), t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    for (std::size_t j = 0; j < 2; ++j)
      EXPECT_NEAR(back.rows[i][j], t.rows[i][j], 1e-9 * std::abs(t.rows[i][j]));
  ASSERT_EQ(meta.size(), 2u);
  EXPECT_EQ(meta[1].first, "note");
  EXPECT_EQ(meta[1].second, "x=y");
}

TEST(Csv, MalformedInputIsAUsageError) {
  std::istringstream fields("a,b\n1,2,3\n");
  EXPECT_THROW(read_csv(fields), UsageError);
  std::istringstream text("a,b\n1,two\n");
  EXPECT_THROW(read_csv(text), UsageError);
  std::istringstream empty("# only metadata\n");
  EXPECT_THROW(read_csv(empty), UsageError);
  const Table t{{"a"}, {{1.0}}};
  EXPECT_THROW(t.column("b"), UsageError);
}

// --- CLI ---

TEST_F(Cli, SimulateEitStrongCoupling) {
  ASSERT_EQ(run("simulate-eit -c " + config("eit_strong.cfg") + " -o " + path("e.csv").string()), 0) << log();
  EXPECT_NEAR(summary_value(log(), "EIT FWHM:"), 560.0, 56.0);
  const auto t = table(path("e.csv"));
  EXPECT_EQ(t.columns, (std::vector<std::string>{"detuning_hz", "transmission"}));
  EXPECT_EQ(t.rows.size(), 801u);
}

TEST_F(Cli, SimulateEitEdgeCases) {
  EXPECT_EQ(run("simulate-eit --range-mhz 1 1"), 2);
  EXPECT_EQ(run("simulate-eit --points 1"), 2);
  const auto cfg = write("noc.cfg", "[drive]\ncoupling_rabi_mhz = 0\n");
  EXPECT_EQ(run("simulate-eit -c " + cfg.string() + " -o " + path("e.csv").string()), 0);
  EXPECT_NE(log().find("no transparency window"), std::string::npos) << log();
}

TEST_F(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(run("simulate-eit -c /nonexistent.cfg"), 2);
  const auto cfg = write("bad.cfg", "[medium]\nfoo = 1\n");
  EXPECT_EQ(run("simulate-eit -c " + cfg.string()), 2);
  EXPECT_NE(log().find("medium.foo"), std::string::npos);
  EXPECT_EQ(run("no-such-command"), 2);
}

TEST_F(Cli, SimulateBiphotonWeakCoupling) {
  ASSERT_EQ(run("simulate-biphoton -c " + config("packet_weak.cfg") + " -o " + path("b.csv").string()), 0) << log();
  EXPECT_NEAR(summary_value(log(), "fitted time constant:"), 560.0, 0.15 * 560.0);
  EXPECT_FALSE(std::isnan(summary_value(log(), "predicted SBR:")));
  const auto t = table(path("b.csv"));
  EXPECT_EQ(t.columns, (std::vector<std::string>{"delay_ns", "g2_arb"}));
  for (const auto& r : t.rows) EXPECT_GE(r[1], 0.0);
}

TEST_F(Cli, SimulateBiphotonEdgeCases) {
  const auto nop = write("nop.cfg", "[drive]\npump_rabi_mhz = 0\n");
  ASSERT_EQ(run("simulate-biphoton -c " + nop.string() + " -o " + path("b.csv").string()), 0) << log();
  for (const auto& r : table(path("b.csv")).rows) EXPECT_EQ(r[1], 0.0);

  const auto coarse = write("coarse.cfg", "[grid]\ncount = 1024\n");
  EXPECT_EQ(run("simulate-biphoton -c " + coarse.string() + " -o " + path("c.csv").string()), 3);
  EXPECT_NE(log().find("aliasing"), std::string::npos) << log();
}

TEST_F(Cli, FitEitRecoversNoiselessSpectrum) {
  ASSERT_EQ(run("simulate-eit -c " + config("eit_weak.cfg") + " -o " + path("e.csv").string()), 0);
  ASSERT_EQ(run("fit-eit " + path("e.csv").string() + " --alpha 70 --rabi-mhz 5 --decoherence-mhz 0.2 -o " +
                path("f.json").string()),
            0)
      << log();
  const auto j = nlohmann::json::parse(slurp(path("f.json")));
  EXPECT_NEAR(j["alpha_s"].get<double>(), 82.0, 0.01 * 82.0);
  EXPECT_NEAR(j["omega_c_gamma"].get<double>(), 0.65, 0.01 * 0.65);
  EXPECT_NEAR(j["gamma_gamma"].get<double>(), 0.024, 0.01 * 0.024);
  EXPECT_TRUE(j["converged"].get<bool>());
}

TEST_F(Cli, FitEitMalformedCsvExitsTwo) {
  const auto bad = write("bad.csv", "detuning_hz,transmission\n1,2,3\n");
  EXPECT_EQ(run("fit-eit " + bad.string()), 2);
  const auto missing = write("missing.csv", "x,y\n1,2\n");
  EXPECT_EQ(run("fit-eit " + missing.string()), 2);
}

TEST_F(Cli, FitBiphotonOnSyntheticHistogram) {
  ASSERT_EQ(run("synth -c " + config("packet_weak.cfg") + " -o " + path("h.csv").string()), 0) << log();
  ASSERT_EQ(run("fit-biphoton " + path("h.csv").string() + " -o " + path("f.json").string()), 0) << log();
  const auto j = nlohmann::json::parse(slurp(path("f.json")));
  const double tau = j["tau_ns"].get<double>();
  EXPECT_NEAR(tau, 520.0, 3.0 * j["sigma_tau_ns"].get<double>() + 0.15 * 520.0);
  EXPECT_NEAR(j["cs_violation"].get<double>(), std::pow(j["sbr"].get<double>(), 2) / 4.0, 1e-9);
}

TEST_F(Cli, FitBiphotonFlatFileHasNoSignal) {
  std::string text = "delay_ns,counts\n";
  for (int k = 0; k < 320; ++k) text += std::to_string(25.6 * k) + ",20\n";
  const auto flat = write("flat.csv", text);
  ASSERT_EQ(run("fit-biphoton " + flat.string() + " -o " + path("f.json").string()), 0) << log();
  const auto j = nlohmann::json::parse(slurp(path("f.json")));
  EXPECT_EQ(j["sbr"].get<double>(), 0.0);
}

TEST_F(Cli, SweepRows) {
  ASSERT_EQ(run("sweep -c " + config("sweep.cfg") + " --powers 1 -o " + path("s.csv").string()), 0) << log();
  const auto t = table(path("s.csv"));
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_NEAR(t.rows[0][t.column("sbr")], 42.0, 1e-6);
  EXPECT_EQ(run("sweep --powers=-1"), 2);
  EXPECT_EQ(run("sweep --powers 0.5,abc"), 2);
}

TEST_F(Cli, SynthIsDeterministic) {
  const std::string base = "synth -c " + config("synth.cfg") + " --seed 9 ";
  ASSERT_EQ(run(base + "-o " + path("a.csv").string() + " --timetags " + path("a.tags").string()), 0) << log();
  ASSERT_EQ(run(base + "-o " + path("b.csv").string() + " --timetags " + path("b.tags").string()), 0) << log();
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_EQ(slurp(path("a.tags")), slurp(path("b.tags")));
  EXPECT_NE(slurp(path("a.csv")).find("# seed=9"), std::string::npos);
  ASSERT_EQ(run("synth -c " + config("synth.cfg") + " --seed 10 -o " + path("c.csv").string()), 0);
  EXPECT_NE(body(path("a.csv")), body(path("c.csv")));
}

TEST_F(Cli, SimulationBodiesAreDeterministic) {
  ASSERT_EQ(run("simulate-eit -c " + config("eit_strong.cfg") + " -o " + path("a.csv").string()), 0);
  ASSERT_EQ(run("simulate-eit -c " + config("eit_strong.cfg") + " -o " + path("b.csv").string()), 0);
  EXPECT_EQ(body(path("a.csv")), body(path("b.csv")));
}

TEST_F(Cli, SynthZeroDurationAndAccumulation) {
  const auto cfg = write("z.cfg",
                         "[detection]\naccumulation_s = 0\n[synth]\nshape = exponential\n"
                         "success_probability = 0.0088\nduration_s = 0\n");
  ASSERT_EQ(run("synth -c " + cfg.string() + " -o " + path("h.csv").string() + " --timetags " +
                path("t.tags").string()),
            0)
      << log();
  EXPECT_EQ(body(path("h.csv")), "delay_ns,counts\n");
  EXPECT_EQ(body(path("t.tags")), "stream,timestamp_ps\n");
}

TEST_F(Cli, RelativeOutputGoesToOutputDir) {
  const auto cfg = write("o.cfg", "[run]\noutput_dir = " + dir_.string() + "\n");
  ASSERT_EQ(run("simulate-eit --points 11 -c " + cfg.string() + " -o rel.csv"), 0) << log();
  EXPECT_TRUE(fs::exists(path("rel.csv")));
}
