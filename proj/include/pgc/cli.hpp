#pragma once

// The `pgc` command-line tool: simulate, fit, hill, rho-series, qq, qp, tailprob.

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "pgc/diagnostics.hpp"
#include "pgc/io.hpp"
#include "pgc/model.hpp"
#include "pgc/qp_tail.hpp"

namespace pgc::cli {

struct GlobalOptions {
  std::uint64_t seed = 42;
  int threads = 1;
  std::string json_path;
  bool quiet = false;
};

struct DataOptions {
  std::string path;
  char delimiter = ',';
  bool no_header = false;

  Dataset load() const {
    CsvOptions o;
    o.delimiter = delimiter;
    o.header = !no_header;
    return load_csv(path, o);
  }
};

inline json load_json_arg(const std::string& arg) {
  std::string text;
  const auto first = arg.find_first_not_of(" \t\n");
  if (first != std::string::npos && (arg[first] == '[' || arg[first] == '{')) {
    text = arg;
  } else {
    std::ifstream in(arg);
    if (!in) fail(ErrorCode::IoError, "cannot open '" + arg + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    text = buf.str();
  }
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, "invalid JSON in '" + arg + "': " + e.what());
  }
}

inline Matrix sigma_from_arg(const std::string& arg) {
  const json doc = load_json_arg(arg);
  return PgcModel::matrix_from_json(doc.is_object() ? doc.at("sigma") : doc);
}

inline std::pair<int, int> parse_k_range(const std::string& text) {
  const auto colon = text.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument(text);
    std::size_t u1 = 0;
    std::size_t u2 = 0;
    const int a = std::stoi(text.substr(0, colon), &u1);
    const int b = std::stoi(text.substr(colon + 1), &u2);
    if (u1 != colon || u2 != text.size() - colon - 1) throw std::invalid_argument(text);
    return {a, b};
  } catch (const std::exception&) {
    fail(ErrorCode::UsageError, "k range must look like a:b, got '" + text + "'");
  }
}

/// Writes `doc` to the --json path when given and to `out` unless quiet.
inline void emit_json(const json& doc, const GlobalOptions& g, std::ostream& out) {
  const std::string text = doc.dump(2) + "\n";
  if (!g.json_path.empty()) {
    std::ofstream f(g.json_path);
    if (!f) fail(ErrorCode::IoError, "cannot write '" + g.json_path + "'");
    f << text;
  }
  if (!g.quiet) out << text;
}

inline void emit_series(const SeriesWithBands& s, const json& meta, const std::string& out_path,
                        const GlobalOptions& g, std::ostream& out,
                        const std::vector<std::pair<std::string, std::vector<double>>>& extra = {}) {
  json sidecar = series_sidecar_json(s);
  for (const auto& [name, values] : extra) sidecar["columns"].push_back(name);
  sidecar.update(meta);
  if (out_path.empty()) {
    if (!g.quiet) write_series_csv(out, s, extra);
  } else {
    std::ofstream f(out_path);
    if (!f) fail(ErrorCode::IoError, "cannot write '" + out_path + "'");
    write_series_csv(f, s, extra);
  }
  const std::string sidecar_path = !g.json_path.empty() ? g.json_path : out_path.empty() ? "" : out_path + ".json";
  if (!sidecar_path.empty()) {
    std::ofstream f(sidecar_path);
    if (!f) fail(ErrorCode::IoError, "cannot write '" + sidecar_path + "'");
    f << sidecar.dump(2) << "\n";
  }
}

inline void add_data_options(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--data", d.path, "input CSV file")->required();
  cmd->add_option("--delimiter", d.delimiter, "field delimiter");
  cmd->add_flag("--no-header", d.no_header, "first row is data; columns are named c1..cd");
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Pareto-tailed Gaussian copula: simulation, tail asymptotics and estimation", "pgc"};
  app.set_config("--config", "", "read options from a TOML or INI file (flags override it)");
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--json", g.json_path, "also write the JSON result to this file");
  app.add_flag("--quiet", g.quiet, "print nothing on success");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "draw a sample from a model");
  std::vector<std::string> marginals;
  double rho = 0.0;
  std::string sigma_arg;
  std::string model_arg;
  std::size_t n = 0;
  std::string out_path;
  std::string model_out;
  simulate->add_option("--marginal", marginals, "marginal spec family:p1[,p2[,p3]], once per column");
  auto* rho_opt = simulate->add_option("--rho", rho, "correlation of a two-column model");
  auto* sigma_opt = simulate->add_option("--sigma", sigma_arg, "correlation matrix as JSON (file or inline)");
  auto* model_opt = simulate->add_option("--model", model_arg, "model JSON (file or inline)");
  simulate->add_option("--n", n, "number of rows")->required()->check(CLI::PositiveNumber);
  simulate->add_option("--out", out_path, "output CSV")->required();
  simulate->add_option("--model-out", model_out, "where to write the model JSON (default <out>.model.json)");
  rho_opt->excludes(sigma_opt);
  model_opt->excludes(rho_opt)->excludes(sigma_opt);

  // fit
  auto* fit = app.add_subcommand("fit", "estimate tail indices and correlations");
  DataOptions data;
  std::string k_text;
  double level = 0.95;
  std::vector<std::string> cols;
  add_data_options(fit, data);
  fit->add_option("--k", k_text, "order statistics: integer, fraction (0.05) or percentage (5%)");
  fit->add_option("--level", level, "confidence level")->check(CLI::Range(0.0, 1.0));
  fit->add_option("--cols", cols, "columns to use (names or 1-based positions)")->delimiter(',');

  // hill
  auto* hill = app.add_subcommand("hill", "Hill estimates over a range of k");
  std::string col;
  std::string k_range = "20:500";
  std::string series_out;
  add_data_options(hill, data);
  hill->add_option("--col", col, "column (name or 1-based position)")->required();
  hill->add_option("--k-range", k_range, "k values a:b");
  hill->add_option("--level", level, "confidence level")->check(CLI::Range(0.0, 1.0));
  hill->add_option("--out", series_out, "output CSV (default standard output)");

  // rho-series
  auto* rho_series_cmd = app.add_subcommand("rho-series", "correlation estimates over a range of k");
  add_data_options(rho_series_cmd, data);
  rho_series_cmd->add_option("--cols", cols, "two columns j,l")->required()->delimiter(',');
  rho_series_cmd->add_option("--k-range", k_range, "k values a:b");
  rho_series_cmd->add_option("--level", level, "confidence level")->check(CLI::Range(0.0, 1.0));
  rho_series_cmd->add_option("--out", series_out, "output CSV (default standard output)");

  // qq
  auto* qq = app.add_subcommand("qq", "exponential QQ data with a bootstrap band");
  double top = 0.01;
  add_data_options(qq, data);
  qq->add_option("--col", col, "column (name or 1-based position)")->required();
  qq->add_option("--top", top, "fraction of the largest observations")->check(CLI::Range(0.0, 0.2));
  qq->add_option("--level", level, "band level")->check(CLI::Range(0.0, 1.0));
  qq->add_option("--out", series_out, "output CSV (default standard output)");

  // qp
  auto* qp = app.add_subcommand("qp", "solve min z' Sigma^-1 z subject to z >= sqrt(alpha)");
  std::vector<double> alpha;
  qp->add_option("--sigma", sigma_arg, "correlation matrix as JSON (file or inline)")->required();
  qp->add_option("--alpha", alpha, "tail indices a1,a2,...")->required()->delimiter(',');

  // tailprob
  auto* tailprob = app.add_subcommand("tailprob", "asymptotic joint exceedance probability");
  double t = 0.0;
  std::vector<double> x;
  std::uint64_t mc = 0;
  tailprob->add_option("--model", model_arg, "model JSON (file or inline)")->required();
  tailprob->add_option("--t", t, "scale t (> e)")->required();
  tailprob->add_option("--x", x, "thresholds x1,x2,...")->required()->delimiter(',');
  tailprob->add_option("--mc", mc, "also estimate by Monte Carlo with this many draws");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error[UsageError]: " << msg << "\n";
    return exit_code(ErrorCode::UsageError);
  }

  try {
    const RandomStream stream(g.seed, 0);
    if (simulate->parsed()) {
      std::optional<PgcModel> model;
      if (!model_arg.empty()) {
        model = PgcModel::from_json(load_json_arg(model_arg));
      } else {
        if (marginals.empty()) fail(ErrorCode::UsageError, "simulate needs --marginal (one per column) or --model");
        std::vector<MarginalSpec> specs;
        for (const auto& m : marginals) specs.push_back(MarginalSpec::parse(m));
        Matrix sigma;
        if (!sigma_arg.empty()) {
          sigma = sigma_from_arg(sigma_arg);
        } else if (rho_opt->count() > 0) {
          if (specs.size() != 2) fail(ErrorCode::UsageError, "--rho needs exactly two marginals; use --sigma otherwise");
          sigma = CorrelationMatrix::bivariate(rho).matrix();
        } else {
          if (specs.size() != 1) fail(ErrorCode::UsageError, "give --rho or --sigma for more than one marginal");
          sigma = Matrix::Identity(1, 1);
        }
        model = build_model(std::move(specs), sigma);
      }
      const SampleMatrix s = sample(*model, n, stream, g.threads);
      std::vector<std::string> names;
      for (int j = 0; j < model->dim(); ++j) names.push_back("x" + std::to_string(j + 1));
      write_csv(out_path, names, s.values);
      const std::string model_path = model_out.empty() ? out_path + ".model.json" : model_out;
      {
        std::ofstream f(model_path);
        if (!f) fail(ErrorCode::IoError, "cannot write '" + model_path + "'");
        f << model->to_json().dump(2) << "\n";
      }
      emit_json({{"rows", n}, {"cols", model->dim()}, {"seed", g.seed}, {"fingerprint", model->fingerprint()},
                 {"data", out_path}, {"model", model_path}},
                g, out);
    } else if (fit->parsed()) {
      const Dataset ds = data.load();
      Matrix values = ds.values;
      std::vector<std::string> names = ds.names;
      if (!cols.empty()) {
        std::vector<int> idx;
        for (const auto& c : cols) idx.push_back(ds.column(c));
        values.resize(ds.n(), static_cast<Eigen::Index>(idx.size()));
        names.clear();
        for (std::size_t c = 0; c < idx.size(); ++c) {
          values.col(static_cast<Eigen::Index>(c)) = ds.values.col(idx[c]);
          names.push_back(ds.names[static_cast<std::size_t>(idx[c])]);
        }
      }
      const FitReport report = fit_pgc(values, KPolicy::parse(k_text), level, g.threads);
      json doc = report_json(report, names);
      emit_json(doc, g, out);
    } else if (hill->parsed()) {
      const Dataset ds = data.load();
      const auto [a, b] = parse_k_range(k_range);
      const int c = ds.column(col);
      const auto values = ds.column_values(c);
      const SeriesWithBands s = hill_series(values, a, b, level);
      emit_series(s, {{"column", ds.names[static_cast<std::size_t>(c)]}, {"source", ds.source}}, series_out, g, out);
    } else if (rho_series_cmd->parsed()) {
      if (cols.size() != 2) fail(ErrorCode::UsageError, "--cols needs exactly two columns");
      const Dataset ds = data.load();
      const auto [a, b] = parse_k_range(k_range);
      const int j = ds.column(cols[0]);
      const int l = ds.column(cols[1]);
      const SeriesWithBands s = rho_series(ds.values, j, l, a, b, level);
      emit_series(s,
                  {{"data_columns", json::array({ds.names[static_cast<std::size_t>(j)], ds.names[static_cast<std::size_t>(l)]})},
                   {"source", ds.source}},
                  series_out, g, out);
    } else if (qq->parsed()) {
      const Dataset ds = data.load();
      const int c = ds.column(col);
      const auto values = ds.column_values(c);
      const QqResult r = exp_qq(values, top, level, stream);
      emit_series(r.series,
                  {{"column", ds.names[static_cast<std::size_t>(c)]},
                   {"source", ds.source},
                   {"slope", json_number(r.slope)},
                   {"intercept", json_number(r.intercept)},
                   {"alpha_from_slope", json_number(1.0 / r.slope)},
                   {"replicates", r.replicates},
                   {"seed", g.seed}},
                  series_out, g, out, {{"observed", r.observed}});
    } else if (qp->parsed()) {
      const CorrelationMatrix sigma(sigma_from_arg(sigma_arg));
      const Vector a = Eigen::Map<const Vector>(alpha.data(), static_cast<Eigen::Index>(alpha.size()));
      emit_json(qp_json(solve_tail_qp(sigma, a)), g, out);
    } else if (tailprob->parsed()) {
      const PgcModel model = PgcModel::from_json(load_json_arg(model_arg));
      if (static_cast<int>(x.size()) != model.dim()) {
        fail(ErrorCode::DimensionMismatch, "--x needs one value per model dimension");
      }
      const Vector xv = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
      IndexSet all;
      for (int j = 0; j < model.dim(); ++j) all.push_back(j);
      const TailAsymptotic a = joint_tail_asymptotic(model, all);
      json doc = {{"t", json_number(t)}, {"asymptotic", json_number(a.evaluate(t, xv))}, {"terms", tail_asymptotic_json(a)}};
      if (mc > 0) {
        const McEstimate e = mc_joint_tail(model, t, xv, mc, stream, g.threads);
        doc["mc"] = {{"estimate", json_number(e.estimate)}, {"standard_error", json_number(e.standard_error)},
                     {"hits", e.hits}, {"draws", e.n_draws}, {"seed", g.seed}};
      }
      emit_json(doc, g, out);
    }
  } catch (const Error& e) {
    std::string msg = e.detail();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error[" << to_string(e.code()) << "]: " << msg << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "error[Internal]: " << e.what() << "\n";
    return 4;
  }
  return 0;
}

}  // namespace pgc::cli
