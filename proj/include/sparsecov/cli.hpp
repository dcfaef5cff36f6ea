#pragma once

// Command-line front end. Kept in a header so tests can drive every
// subcommand in-process through cli::run.
//
// Exit codes: 0 success, 1 usage / invalid configuration, 2 runtime error,
// 3 a requested --check failed.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "sparsecov/json.hpp"
#include "sparsecov/sparsecov.hpp"

namespace sparsecov {

/// Data CSV: one header row (column names, ignored), then n rows of p numbers.
inline DataMatrix read_data_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("data csv: missing header");
  const std::size_t p = detail::split(detail::trim(line), ',').size();
  if (p == 0) throw InvalidInput("data csv: empty header");
  DataMatrix data;
  data.p = p;
  while (std::getline(in, line)) {
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto fields = detail::split(line, ',');
    if (fields.size() != p) throw InvalidInput("data csv: row " + std::to_string(data.n + 1) + " has wrong width");
    for (const auto& f : fields) data.values.push_back(detail::to_double(detail::trim(f), "observation"));
    ++data.n;
  }
  return data;
}

inline void write_data_csv(std::ostream& out, const DataMatrix& data) {
  for (std::size_t j = 0; j < data.p; ++j) out << (j ? "," : "") << 'x' << (j + 1);
  out << '\n';
  for (std::size_t t = 0; t < data.n; ++t) {
    for (std::size_t j = 0; j < data.p; ++j) out << (j ? "," : "") << format_double(data(t, j));
    out << '\n';
  }
}

namespace cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2, kCheckFailed = 3 };

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

template <typename E>
E enum_option(const std::string& s) {
  return parse_enum<E>(s);
}

}  // namespace detail

struct EstimateOptions {
  std::string data;
  std::string out;
  std::string estimator = "soft";
  double tau = 0.0;
  double A = 2.0;
  double gamma = 1.0;
  double delta = 1.0;
  std::string centering = "zero_mean";
};

inline int cmd_estimate(const EstimateOptions& o, std::ostream& stdout_stream, std::ostream& log) {
  std::ifstream in(o.data);
  if (!in) throw std::runtime_error("cannot open data file '" + o.data + "'");
  const DataMatrix data = read_data_csv(in);
  const SymMatrix sigma_star = sample_covariance(data, parse_enum<Centering>(o.centering));
  const auto est = parse_enum<EstimatorKind>(o.estimator);
  double tau = o.tau;
  if (est != EstimatorKind::Sample && tau <= 0.0) {
    const Threshold th = threshold_value({o.A, o.gamma, o.delta, data.n, data.p});
    if (th.exceeds_cap) log << "warning: tau = " << th.tau << " exceeds delta = " << o.delta << '\n';
    tau = th.tau;
  }
  const SymMatrix result = sparsecov::detail::apply_estimator(est, sigma_star, tau);
  if (o.out.empty()) {
    write_matrix(stdout_stream, result);
  } else {
    auto out = detail::open_out(o.out);
    write_matrix(out, result);
  }
  return kOk;
}

struct SweepOptions {
  std::string spec;
  std::string out = "sweep_out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t threads = 0;
  std::string format = "csv";
  bool timing = false;
  bool check = false;
};

inline int cmd_sweep(const SweepOptions& o, std::ostream& log) {
  ExperimentSpec spec;
  try {
    spec = load_spec(o.spec);
    if (o.seed_set) spec.seed = RngSeed{o.seed};
    spec.validate();
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kUsage;
  }
  const auto records = run_sweep(spec, o.threads);
  const std::filesystem::path dir(o.out);
  std::filesystem::create_directories(dir);
  if (o.format == "json") {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : records) arr.push_back(to_json(r));
    auto out = detail::open_out(dir / "records.json");
    out << arr.dump(1) << '\n';
  } else {
    auto out = detail::open_out(dir / "records.csv");
    write_records_csv(out, records, o.timing);
  }

  const auto summary = summarize(records);
  nlohmann::json doc;
  doc["seed"] = spec.seed.value;
  doc["trials"] = spec.trials;
  doc["records"] = records.size();
  std::size_t violations = 0;
  for (const auto& s : summary) {
    doc["groups"].push_back(to_json(s));
    if (s.estimator == EstimatorKind::Soft && s.loss == LossKind::Frobenius) violations += s.deterministic_violations;
  }
  doc["deterministic_violations"] = violations;
  {
    auto out = detail::open_out(dir / "summary.json");
    out << doc.dump(2) << '\n';
  }
  log << "wrote " << records.size() << " records to " << dir.string() << '\n';
  if (o.check && violations > 0) {
    log << "check failed: " << violations << " trials violate the deterministic oracle inequality\n";
    return kCheckFailed;
  }
  return kOk;
}

struct CalibrateOptions {
  std::size_t p = 50;
  std::size_t n = 100;
  std::size_t trials = 200;
  double quantile = 0.99;
  std::uint64_t seed = 0;
};

inline int cmd_calibrate(const CalibrateOptions& o, std::ostream& out) {
  const double g = calibrate_gamma(o.p, o.n, o.trials, o.quantile, RngSeed{o.seed});
  nlohmann::json doc{{"p", o.p}, {"n", o.n}, {"trials", o.trials}, {"quantile", o.quantile},
                     {"seed", o.seed}, {"gamma", g}};
  out << doc.dump(2) << '\n';
  return kOk;
}

struct PackingOptions {
  std::size_t p = 32;
  std::size_t k = 4;
  std::string variant = "banded";
  std::size_t n = 1000;
  double a0 = 0.1;
  std::size_t target = 64;
  std::size_t attempts = 4096;
  std::uint64_t seed = 0;
  double kl_budget = 1.0 / 16.0;
  std::string out;
  bool check = false;
};

inline int cmd_packing(const PackingOptions& o, std::ostream& out) {
  PackingVariant variant;
  if (o.variant == "banded") variant = PackingVariant::Banded;
  else if (o.variant == "first_row") variant = PackingVariant::FirstRow;
  else throw InvalidParameter("unknown packing variant '" + o.variant + "'");
  PackingFamily fam = build_packing({o.p, o.k, o.a0, variant, o.n}, o.target, o.attempts, RngSeed{o.seed});
  if (o.kl_budget != fam.certificate.kl_budget)
    fam.certificate = certify(fam, o.n, fam.certificate.psi, o.kl_budget);
  const auto doc = certificate_document(fam);
  if (o.out.empty()) {
    out << doc.dump(2) << '\n';
  } else {
    auto f = detail::open_out(o.out);
    f << doc.dump(2) << '\n';
  }
  if (o.check && !fam.certificate.satisfied()) return kCheckFailed;
  return kOk;
}

struct RatesOptions {
  std::vector<std::size_t> ns{100, 200, 400, 800, 1600};
  std::vector<std::size_t> ps{100};
  double R = 10.0;
  double q = 0.0;
  std::string cls = "global";
  double c0 = std::numbers::e / 4.0;
  double C0 = 1.0;
  std::string out;
};

/// CSV table: n,p,R,q,class,rate,rate_exponent,upper_rate,cond_first,cond_second,cond_third,admissible
inline int cmd_rates(const RatesOptions& o, std::ostream& stdout_stream) {
  const auto variant = parse_enum<ClassVariant>(o.cls);
  const bool global = variant == ClassVariant::Global;
  if (!(o.q >= 0.0 && o.q <= (global ? 2.0 : 1.0)))
    throw InvalidParameter("rates: q out of range for the selected class");
  std::ostringstream table;
  table << "n,p,R,q,class,rate,rate_exponent,upper_rate,cond_first,cond_second,cond_third,admissible\n";
  for (std::size_t p : o.ps) {
    for (std::size_t n : o.ns) {
      const RateParams rp{o.c0, n, p, o.R, o.q};
      const double rate = global ? rate_psi0(rp) : rate_psi1(rp);
      const double expo = global ? psi0_exponent(o.q) : psi1_exponent(o.q);
      const double upper = global ? upper_rate0(rp) : upper_rate1(rp);
      const Conditions2 c = check_conditions_2(rp, o.C0);
      table << n << ',' << p << ',' << format_double(o.R) << ',' << format_double(o.q) << ',' << o.cls << ','
            << format_double(rate) << ',' << format_double(expo) << ',' << format_double(upper) << ','
            << c.first << ',' << c.second << ',' << c.third << ','
            << (global ? c.frobenius() : c.operator_l1()) << '\n';
    }
  }
  if (o.out.empty()) {
    stdout_stream << table.str();
  } else {
    auto f = detail::open_out(o.out);
    f << table.str();
  }
  return kOk;
}

struct PlotOptions {
  std::string records;
  std::string out = "plotdata";
};

/// Writes one two-column file per (estimator, loss, p, squared/unsquared):
/// x = n, y = mean loss. A manifest.json lists the series.
inline int cmd_plotdata(const PlotOptions& o, std::ostream& log) {
  std::ifstream in(o.records);
  if (!in) throw std::runtime_error("cannot open records file '" + o.records + "'");
  const auto records = read_records_csv(in);
  const auto summary = summarize(records);
  const std::filesystem::path dir(o.out);
  std::filesystem::create_directories(dir);

  using Key = std::tuple<int, int, std::size_t>;
  std::map<Key, std::vector<const SummaryRow*>> series;
  for (const auto& s : summary) series[{static_cast<int>(s.estimator), static_cast<int>(s.loss), s.p}].push_back(&s);

  nlohmann::json manifest = nlohmann::json::array();
  for (auto& [key, rows] : series) {
    std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->n < b->n; });
    const auto est = static_cast<EstimatorKind>(std::get<0>(key));
    const auto loss = static_cast<LossKind>(std::get<1>(key));
    const std::size_t p = std::get<2>(key);
    for (bool squared : {false, true}) {
      const std::string name = std::string(to_string(est)) + "_" + to_string(loss) + (squared ? "_sq" : "") + "_p" +
                               std::to_string(p) + ".dat";
      auto f = detail::open_out(dir / name);
      for (const auto* r : rows)
        f << r->n << ' ' << format_double(squared ? r->mean_loss_squared : r->mean_loss) << '\n';
      manifest.push_back({{"file", name},
                          {"estimator", to_string(est)},
                          {"loss", to_string(loss)},
                          {"squared", squared},
                          {"p", p},
                          {"x", "n"},
                          {"y", squared ? "mean_loss_squared" : "mean_loss"},
                          {"points", rows.size()}});
    }
  }
  auto mf = detail::open_out(dir / "manifest.json");
  mf << manifest.dump(2) << '\n';
  log << "wrote " << manifest.size() << " series to " << dir.string() << '\n';
  return kOk;
}

/// Parses and dispatches. `out` receives primary output, `log` diagnostics.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& log = std::cerr) {
  CLI::App app{"sparsecov: sparse covariance estimation by thresholding, lower-bound packings and Monte Carlo checks"};
  app.require_subcommand(1);

  EstimateOptions est;
  auto* c_est = app.add_subcommand("estimate", "estimate a covariance matrix from a data CSV");
  c_est->add_option("--data", est.data, "data CSV (header row + n rows of p values)")->required();
  c_est->add_option("--out", est.out, "output matrix file (default: stdout)");
  c_est->add_option("--estimator", est.estimator, "sample | hard | soft")
      ->check(CLI::IsMember({"sample", "hard", "soft"}));
  c_est->add_option("--tau", est.tau, "explicit threshold (overrides A, gamma)");
  c_est->add_option("--A", est.A, "threshold multiplier A > 1");
  c_est->add_option("--gamma", est.gamma, "noise constant gamma");
  c_est->add_option("--delta", est.delta, "validity cap on tau");
  c_est->add_option("--centering", est.centering, "zero_mean | demean")
      ->check(CLI::IsMember({"zero_mean", "demean"}));

  SweepOptions sw;
  auto* c_sweep = app.add_subcommand("sweep", "run a Monte Carlo sweep from a spec file");
  c_sweep->add_option("--spec", sw.spec, "spec file")->required();
  c_sweep->add_option("--out", sw.out, "output directory");
  auto* seed_opt = c_sweep->add_option("--seed", sw.seed, "override the spec's base seed");
  c_sweep->add_option("--threads", sw.threads, "worker threads (default: SPARSECOV_THREADS or all cores)");
  c_sweep->add_option("--format", sw.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  c_sweep->add_flag("--timing", sw.timing, "append wall-clock column to the CSV");
  c_sweep->add_flag("--check", sw.check, "exit 3 on deterministic oracle-inequality violations");

  CalibrateOptions cal;
  auto* c_cal = app.add_subcommand("calibrate-gamma", "estimate gamma for Gaussian data");
  c_cal->add_option("--p", cal.p, "dimension")->required();
  c_cal->add_option("--n", cal.n, "sample size")->required();
  c_cal->add_option("--trials", cal.trials, "simulated datasets (>= 100)");
  c_cal->add_option("--quantile", cal.quantile, "quantile level in (0,1)");
  c_cal->add_option("--seed", cal.seed, "seed");

  PackingOptions pk;
  auto* c_pk = app.add_subcommand("packing", "build and certify a lower-bound packing family");
  c_pk->add_option("--p", pk.p, "dimension")->required();
  c_pk->add_option("--k", pk.k, "number of ones")->required();
  c_pk->add_option("--variant", pk.variant, "banded | first_row")->check(CLI::IsMember({"banded", "first_row"}));
  c_pk->add_option("--n", pk.n, "sample size entering the amplitude");
  c_pk->add_option("--a0", pk.a0, "amplitude constant");
  c_pk->add_option("--target", pk.target, "target cardinality");
  c_pk->add_option("--attempts", pk.attempts, "maximum candidate draws");
  c_pk->add_option("--seed", pk.seed, "seed");
  c_pk->add_option("--kl-budget", pk.kl_budget, "factor in n KL <= budget * log(card)");
  c_pk->add_option("--out", pk.out, "certificate JSON file (default: stdout)");
  c_pk->add_flag("--check", pk.check, "exit 3 if the certificate is not satisfied");

  RatesOptions rt;
  auto* c_rates = app.add_subcommand("rates", "tabulate minimax rates and admissibility conditions");
  c_rates->add_option("--n", rt.ns, "sample sizes")->delimiter(',');
  c_rates->add_option("--p", rt.ps, "dimensions")->delimiter(',');
  c_rates->add_option("--R", rt.R, "radius");
  c_rates->add_option("--q", rt.q, "sparsity exponent");
  c_rates->add_option("--class", rt.cls, "global | column")->check(CLI::IsMember({"global", "column"}));
  c_rates->add_option("--c0", rt.c0, "constant inside the logarithm");
  c_rates->add_option("--C0", rt.C0, "constant of the admissibility conditions");
  c_rates->add_option("--out", rt.out, "CSV file (default: stdout)");

  PlotOptions pl;
  auto* c_plot = app.add_subcommand("plotdata", "aggregate sweep records into x/y series");
  c_plot->add_option("--records", pl.records, "records CSV")->required();
  c_plot->add_option("--out", pl.out, "output directory");

  std::vector<std::string> argv_store{"sparsecov"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    log << "usage error: " << e.what() << '\n';
    return kUsage;
  }
  sw.seed_set = seed_opt->count() > 0;

  try {
    if (c_est->parsed()) return cmd_estimate(est, out, log);
    if (c_sweep->parsed()) return cmd_sweep(sw, log);
    if (c_cal->parsed()) return cmd_calibrate(cal, out);
    if (c_pk->parsed()) return cmd_packing(pk, out);
    if (c_rates->parsed()) return cmd_rates(rt, out);
    if (c_plot->parsed()) return cmd_plotdata(pl, log);
  } catch (const InvalidParameter& e) {
    log << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DomainError& e) {
    log << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}

}  // namespace cli
}  // namespace sparsecov
