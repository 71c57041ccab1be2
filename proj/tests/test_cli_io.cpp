#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pgc/cli.hpp"

using namespace pgc;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "pgc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string tmp(const std::string& name) {
  const fs::path dir(PGC_TEST_TMPDIR);
  fs::create_directories(dir);
  return (dir / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

Dataset parse(const std::string& text, const CsvOptions& o = {}) {
  std::istringstream in(text);
  return parse_csv(in, "mem", o);
}

ErrorCode parse_error(const std::string& text, const CsvOptions& o = {}) {
  try {
    parse(text, o);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::NumericalError;
}

// One line, prefixed error[Code]:.
void expect_single_line_error(const CliResult& r, const std::string& code) {
  EXPECT_EQ(r.err.rfind("error[" + code + "]: ", 0), 0u) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1) << r.err;
}

std::string simulate_design(const std::string& name, int threads = 1) {
  const std::string path = tmp(name);
  const CliResult r = run_cli({"--seed", "42", "--threads", std::to_string(threads), "--quiet", "simulate", "--marginal",
                               "pareto:2", "--marginal", "pareto:3", "--rho", "0.3", "--n", "10000", "--out", path});
  EXPECT_EQ(r.code, 0) << r.err;
  return path;
}

}  // namespace

TEST(Csv, FiveRows) {
  const Dataset ds = parse("a,b\n1,2\n3,4\n5,6\n7,8\n9,10\n");
  EXPECT_EQ(ds.n(), 5);
  EXPECT_EQ(ds.d(), 2);
  EXPECT_EQ(ds.names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(ds.values(4, 1), 10.0);
  EXPECT_EQ(ds.missing, (std::vector<std::size_t>{0, 0}));
}

TEST(Csv, MissingCellsAreCounted) {
  const Dataset ds = parse("a,b\n1,NA\n,4\n5,abc\n7,8\n");
  EXPECT_EQ(ds.n(), 4);
  EXPECT_EQ(ds.missing, (std::vector<std::size_t>{1, 2}));
  EXPECT_TRUE(std::isnan(ds.values(0, 1)));
  EXPECT_TRUE(std::isnan(ds.values(1, 0)));
  EXPECT_EQ(ds.column_values(1), (std::vector<double>{4.0, 8.0}));
}

TEST(Csv, EmptyAndMalformed) {
  EXPECT_EQ(parse_error(""), ErrorCode::EmptyData);
  EXPECT_EQ(parse_error("a,b\n"), ErrorCode::EmptyData);
  EXPECT_EQ(parse_error("a,b\n1,2\n3\n"), ErrorCode::ParseError);
  EXPECT_EQ(parse_error("a,a\n1,2\n"), ErrorCode::ParseError);
  try {
    parse("a,b\n1,2\n3,4,5\n");
  } catch (const Error& e) {
    EXPECT_NE(e.detail().find("mem:3"), std::string::npos) << e.detail();
  }
  try {
    load_csv(tmp("does_not_exist.csv"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
}

TEST(Csv, OptionsAndEncodings) {
  CsvOptions o;
  o.header = false;
  o.delimiter = ';';
  const Dataset ds = parse("1;2;3\n4;5;6\n", o);
  EXPECT_EQ(ds.names, (std::vector<std::string>{"c1", "c2", "c3"}));
  EXPECT_EQ(ds.n(), 2);
  const Dataset bom = parse("\xEF\xBB\xBFx,y\r\n1.5,+2\r\n\r\n-3e2, 4 \r\n");
  EXPECT_EQ(bom.names[0], "x");
  EXPECT_EQ(bom.n(), 2);
  EXPECT_EQ(bom.values(0, 1), 2.0);
  EXPECT_EQ(bom.values(1, 0), -300.0);
  EXPECT_EQ(bom.values(1, 1), 4.0);
  EXPECT_EQ(bom.column("y"), 1);
  EXPECT_EQ(bom.column("1"), 0);
  EXPECT_THROW(bom.column("3"), Error);
  EXPECT_THROW(bom.column("z"), Error);
}

TEST(CsvProperty, WriteLoadRoundTrip) {
  RandomStream s(3, 0);
  Matrix m(200, 3);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = std::exp(40.0 * (s.uniform() - 0.5)) * (s.uniform() < 0.1 ? -1 : 1);
  m(5, 1) = NAN;
  m(7, 2) = 1e-300;
  m(8, 0) = 1.7976931348623157e308;
  const std::string path = tmp("round_trip.csv");
  write_csv(path, {"a", "b", "c"}, m);
  const Dataset back = load_csv(path);
  ASSERT_EQ(back.n(), m.rows());
  EXPECT_EQ(back.missing, (std::vector<std::size_t>{0, 1, 0}));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (std::isnan(m(i, j))) {
        EXPECT_TRUE(std::isnan(back.values(i, j)));
        continue;
      }
      EXPECT_EQ(round12(back.values(i, j)), round12(m(i, j)));
      EXPECT_EQ(back.values(i, j), m(i, j));
    }
  }
}

TEST(Json, NumbersAtTwelveDigits) {
  EXPECT_EQ(json_number(1.0 / 3.0).dump(), "0.333333333333");
  EXPECT_EQ(json_number(NAN).dump(), "null");
  EXPECT_EQ(json_number(INFINITY).dump(), "null");
  EXPECT_EQ(json_number(2.0).dump(), "2.0");
  EXPECT_EQ(round12(0.1 + 0.2), 0.3);
}

TEST(Json, ReportSchema) {
  const PgcModel m = build_model({MarginalSpec::pareto(2.0), MarginalSpec::pareto(3.0)}, CorrelationMatrix::bivariate(0.3));
  Matrix x = sample(m, 2000, RandomStream(1, 0)).values;
  const json doc = report_json(fit_pgc(x, KPolicy::fixed(100)), {"u", "v"});
  for (const char* key : {"n", "k_policy", "margins", "pairs", "sigma_raw", "sigma_psd", "sigma_psd_changed"})
    EXPECT_TRUE(doc.contains(key)) << key;
  for (const char* key : {"col", "k", "alpha", "se", "ci", "theta", "n_dropped"})
    EXPECT_TRUE(doc["margins"][0].contains(key)) << key;
  for (const char* key : {"j", "l", "gamma", "ci", "rho", "rho_ci", "regime", "clamped"})
    EXPECT_TRUE(doc["pairs"][0].contains(key)) << key;
  EXPECT_EQ(doc["margins"][1]["name"], "v");
  EXPECT_EQ(doc["n"], 2000);
}

TEST(Cli, HelpAndUsage) {
  const CliResult help = run_cli({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("simulate"), std::string::npos);
  expect_single_line_error(run_cli({}), "UsageError");
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"bogus"}).code, 2);
  EXPECT_EQ(run_cli({"fit"}).code, 2);
  EXPECT_EQ(run_cli({"--threads", "0", "qp", "--sigma", "[[1]]", "--alpha", "2"}).code, 2);
}

TEST(Cli, SimulateWritesSampleAndModel) {
  const std::string path = tmp("sim.csv");
  const CliResult r = run_cli({"simulate", "--marginal", "pareto:2", "--marginal", "pareto:3", "--rho", "0.3", "--n",
                               "10000", "--out", path});
  ASSERT_EQ(r.code, 0) << r.err;
  const Dataset ds = load_csv(path);
  EXPECT_EQ(ds.n(), 10000);
  EXPECT_EQ(ds.names, (std::vector<std::string>{"x1", "x2"}));
  const json info = json::parse(r.out);
  EXPECT_EQ(info["rows"], 10000);
  EXPECT_EQ(info["seed"], 42);
  EXPECT_EQ(info["fingerprint"], "296aea405171fa5796a030a92a359e3ecf40c0651bada6907e55f3ab748ba1ee");
  const PgcModel model = PgcModel::from_json(json::parse(slurp(path + ".model.json")));
  EXPECT_EQ(model.fingerprint(), info["fingerprint"]);
  // The file holds exactly the library sample.
  const SampleMatrix s = sample(model, 10000, RandomStream(42, 0));
  EXPECT_TRUE(ds.values == s.values);
}

TEST(Cli, SimulateThreeDimensionsAndModelFile) {
  const std::string sigma = tmp("sigma.json");
  spit(sigma, R"({"sigma": [[1, 0.2, 0.1], [0.2, 1, 0.3], [0.1, 0.3, 1]]})");
  const std::string path = tmp("sim3.csv");
  CliResult r = run_cli({"--quiet", "simulate", "--marginal", "pareto:2", "--marginal", "frechet:3,0,1", "--marginal",
                         "burr:1.5,2", "--sigma", sigma, "--n", "10000", "--out", path});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  EXPECT_EQ(load_csv(path).d(), 3);
  const std::string again = tmp("sim3b.csv");
  r = run_cli({"--quiet", "simulate", "--model", path + ".model.json", "--n", "10000", "--out", again});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(again), slurp(path));
}

TEST(Cli, SimulateErrors) {
  CliResult r = run_cli({"simulate", "--marginal", "pareto:2", "--marginal", "pareto:3", "--rho", "1.0", "--n", "10",
                         "--out", tmp("bad.csv")});
  EXPECT_EQ(r.code, 2);
  expect_single_line_error(r, "NotPositiveDefinite");
  r = run_cli({"simulate", "--marginal", "pareto:-2", "--n", "10", "--out", tmp("bad.csv")});
  EXPECT_EQ(r.code, 2);
  expect_single_line_error(r, "DomainError");
  r = run_cli({"simulate", "--marginal", "pareto:2", "--marginal", "pareto:3", "--n", "10", "--out", tmp("bad.csv")});
  EXPECT_EQ(r.code, 2);
  r = run_cli({"simulate", "--marginal", "pareto:2", "--n", "10", "--out", tmp("no_such_dir/x.csv")});
  EXPECT_EQ(r.code, 2);
  expect_single_line_error(r, "IoError");
  r = run_cli({"simulate", "--sigma", "[[1, 0.5], [0.5, 1]", "--marginal", "pareto:2", "--marginal", "pareto:3",
               "--n", "10", "--out", tmp("bad.csv")});
  EXPECT_NE(r.code, 0);
  expect_single_line_error(r, "ParseError");
}

TEST(Cli, FitMiddleDesign) {
  const std::string path = simulate_design("fit_design.csv");
  const CliResult r = run_cli({"fit", "--data", path, "--k", "1000"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json doc = json::parse(r.out);
  EXPECT_LE(std::abs(doc["pairs"][0]["rho"].get<double>() - 0.3), 0.15);
  EXPECT_EQ(doc["margins"][0]["k"], 1000);
  EXPECT_EQ(doc["margins"][0]["name"], "x1");
}

TEST(Cli, FitSingleColumnIndependentAndErrors) {
  const std::string path = tmp("indep.csv");
  ASSERT_EQ(run_cli({"--quiet", "--seed", "5", "simulate", "--marginal", "pareto:2", "--marginal", "pareto:3", "--rho",
                     "0", "--n", "20000", "--out", path})
                .code,
            0);
  CliResult r = run_cli({"fit", "--data", path});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LE(std::abs(json::parse(r.out)["sigma_raw"][0][1].get<double>()), 0.1);
  r = run_cli({"fit", "--data", path, "--cols", "x2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json one = json::parse(r.out);
  EXPECT_EQ(one["pairs"].size(), 0u);
  EXPECT_EQ(one["margins"][0]["name"], "x2");

  r = run_cli({"fit", "--data", tmp("missing.csv")});
  EXPECT_EQ(r.code, 2);
  expect_single_line_error(r, "IoError");
  r = run_cli({"fit", "--data", path, "--k", "abc"});
  EXPECT_EQ(r.code, 2);
  expect_single_line_error(r, "UsageError");
  r = run_cli({"fit", "--data", path, "--cols", "nope"});
  EXPECT_EQ(r.code, 2);
  const std::string empty = tmp("empty.csv");
  spit(empty, "a,b\n");
  r = run_cli({"fit", "--data", empty});
  EXPECT_EQ(r.code, 3);
  expect_single_line_error(r, "EmptyData");
  const std::string small = tmp("small.csv");
  spit(small, "a\n1\n2\n3\n");
  r = run_cli({"fit", "--data", small});
  EXPECT_EQ(r.code, 3);
  expect_single_line_error(r, "InsufficientData");
}

TEST(Cli, FitKeepsPartialResults) {
  const std::string path = tmp("partial.csv");
  std::ofstream f(path);
  f << "a,b,c\n";
  RandomStream s(2, 0);
  for (int i = 0; i < 500; ++i) f << 1.0 / s.uniform() << ",7," << 1.0 / s.uniform() << "\n";
  f.close();
  const CliResult r = run_cli({"fit", "--data", path});
  ASSERT_EQ(r.code, 0) << r.err;
  const json doc = json::parse(r.out);
  EXPECT_EQ(doc["margins"][1]["error"], "DegenerateTail");
  EXPECT_TRUE(doc["margins"][0].contains("alpha"));
  EXPECT_TRUE(doc["pairs"][1].contains("rho"));
}

TEST(Cli, SeriesCommands) {
  const std::string path = simulate_design("series_design.csv");
  CliResult r = run_cli({"hill", "--data", path, "--col", "x1", "--k-range", "20:100"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string header;
  std::getline(lines, header);
  EXPECT_EQ(header, "x,y,lo,hi");
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 82);

  const std::string out = tmp("rho_series.csv");
  r = run_cli({"rho-series", "--data", path, "--cols", "1,2", "--k-range", "50:60", "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  const json sidecar = json::parse(slurp(out + ".json"));
  EXPECT_EQ(sidecar["label"], "rho");
  EXPECT_EQ(sidecar["points"], 11);
  EXPECT_EQ(sidecar["data_columns"], json::array({"x1", "x2"}));
  EXPECT_EQ(load_csv(out).n(), 11);

  const std::string qq_json = tmp("qq_meta.json");
  r = run_cli({"--json", qq_json, "qq", "--data", path, "--col", "x2", "--top", "0.05", "--out", tmp("qq.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const json qq = json::parse(slurp(qq_json));
  EXPECT_EQ(qq["columns"], json::array({"x", "y", "lo", "hi", "observed"}));
  EXPECT_EQ(qq["replicates"], 999);
  EXPECT_NEAR(qq["alpha_from_slope"].get<double>(), 3.0, 0.6);
  EXPECT_EQ(load_csv(tmp("qq.csv")).d(), 5);

  r = run_cli({"hill", "--data", path, "--col", "x1", "--k-range", "20-100"});
  EXPECT_EQ(r.code, 2);
  expect_single_line_error(r, "UsageError");
  r = run_cli({"hill", "--data", path, "--col", "x1", "--k-range", "20:20000"});
  EXPECT_EQ(r.code, 3);
  r = run_cli({"rho-series", "--data", path, "--cols", "1"});
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, QpAndTailprob) {
  CliResult r = run_cli({"qp", "--sigma", "[[1, 0.3], [0.3, 1]]", "--alpha", "2,3"});
  ASSERT_EQ(r.code, 0) << r.err;
  json doc = json::parse(r.out);
  EXPECT_NEAR(doc["gamma"].get<double>(), 3.87945731245, 1e-10);
  EXPECT_EQ(doc["active_set"], json::array({1, 2}));
  r = run_cli({"qp", "--sigma", "[[1, 0.9], [0.9, 1]]", "--alpha", "2,3"});
  doc = json::parse(r.out);
  EXPECT_EQ(doc["gamma"], 3.0);
  EXPECT_EQ(doc["active_set"], json::array({2}));
  r = run_cli({"qp", "--sigma", "[[1, 0.3], [0.3, 1]]", "--alpha", "2,3,4"});
  EXPECT_EQ(r.code, 2);
  expect_single_line_error(r, "DimensionMismatch");

  const std::string model = R"({"marginals": ["pareto:2", "pareto:3"], "sigma": [[1, 0], [0, 1]]})";
  r = run_cli({"tailprob", "--model", model, "--t", "10", "--x", "1,1", "--mc", "100000"});
  ASSERT_EQ(r.code, 0) << r.err;
  doc = json::parse(r.out);
  EXPECT_NEAR(doc["asymptotic"].get<double>(), 1e-5, 1e-17);
  EXPECT_EQ(doc["mc"]["draws"], 100000);
  r = run_cli({"tailprob", "--model", model, "--t", "2", "--x", "1,1"});
  EXPECT_EQ(r.code, 2);
  r = run_cli({"tailprob", "--model", model, "--t", "10", "--x", "1"});
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, ConfigFileIsOverriddenByFlags) {
  const std::string cfg = tmp("pgc.toml");
  spit(cfg, "seed = 7\nquiet = true\n");
  const std::string a = tmp("cfg_a.csv");
  const std::string b = tmp("cfg_b.csv");
  const std::string c = tmp("cfg_c.csv");
  CliResult r = run_cli({"--config", cfg, "simulate", "--marginal", "pareto:2", "--n", "100", "--out", a});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  ASSERT_EQ(run_cli({"--quiet", "--seed", "7", "simulate", "--marginal", "pareto:2", "--n", "100", "--out", b}).code, 0);
  ASSERT_EQ(run_cli({"--config", cfg, "--seed", "8", "simulate", "--marginal", "pareto:2", "--n", "100", "--out", c}).code,
            0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_NE(slurp(a), slurp(c));
}

TEST(CliProperty, SimulateFitIsByteIdenticalAcrossRunsAndThreads) {
  const std::string p1 = simulate_design("det_1.csv", 1);
  const std::string p4 = simulate_design("det_4.csv", 4);
  EXPECT_EQ(slurp(p1), slurp(p4));
  const CliResult f1 = run_cli({"--threads", "1", "fit", "--data", p1, "--k", "1000"});
  const CliResult f1b = run_cli({"--threads", "1", "fit", "--data", p1, "--k", "1000"});
  const CliResult f4 = run_cli({"--threads", "4", "fit", "--data", p4, "--k", "1000"});
  ASSERT_EQ(f1.code, 0);
  EXPECT_EQ(f1.out, f1b.out);
  EXPECT_EQ(f1.out, f4.out);
}
