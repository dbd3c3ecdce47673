#pragma once

// Batch driver: each subcommand reads its declared inputs, writes outputs
// atomically and leaves a JSON manifest with parameters and SHA-256 hashes.

#include <CLI11.hpp>
#include <Eigen/Core>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <boost/version.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "concentration.hpp"
#include "csv.hpp"
#include "data_model.hpp"
#include "delineation.hpp"
#include "econometrics.hpp"
#include "errors.hpp"
#include "minwage_analysis.hpp"
#include "oligopsony.hpp"
#include "pipeline.hpp"
#include "synth.hpp"

namespace monopsono::cli {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = "0.1.0";

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s{"synth",      "ingest",     "delineate", "concentration",
                                          "instrument", "regress",    "elasticity", "bounds",
                                          "simulate",   "report"};
  return s;
}

// ---------------------------------------------------------------------------
// Logging

enum class LogLevel { error = 0, info = 1, debug = 2 };

inline LogLevel log_level() {
  const char* v = std::getenv("MONOPSONO_LOG");
  if (!v) return LogLevel::error;
  const std::string s(v);
  if (s == "debug") return LogLevel::debug;
  if (s == "info") return LogLevel::info;
  return LogLevel::error;
}

class Logger {
 public:
  explicit Logger(std::ostream& err) : err_(err), level_(log_level()) {}
  void info(const std::string& m) const { emit(LogLevel::info, "info", m); }
  void debug(const std::string& m) const { emit(LogLevel::debug, "debug", m); }

 private:
  void emit(LogLevel l, const char* tag, const std::string& m) const {
    if (static_cast<int>(l) <= static_cast<int>(level_)) err_ << "monopsono: " << tag << ": " << m << '\n';
  }
  std::ostream& err_;
  LogLevel level_;
};

// ---------------------------------------------------------------------------
// Settings: flag > [subcommand] section > global keys > default

class Settings {
 public:
  Settings() = default;

  static Settings load(const std::string& path, const std::string& section) {
    Settings s;
    if (path.empty()) return s;
    if (!fs::exists(path)) throw ParseError("config file '" + path + "' does not exist");
    boost::property_tree::ptree pt;
    try {
      boost::property_tree::ini_parser::read_ini(path, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ParseError("config: " + std::string(e.what()));
    }
    for (const auto& [k, v] : pt) {
      if (v.empty()) s.values_[k] = v.data();
    }
    if (auto sec = pt.get_child_optional(section))
      for (const auto& [k, v] : *sec) s.values_[k] = v.data();
    return s;
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string str(const std::string& key, const std::string& def) const {
    auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
  }
  double num(const std::string& key, double def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    auto v = csv::to_double(it->second);
    if (!v) throw ParseError("config key '" + key + "' expects a number, got '" + it->second + "'");
    return *v;
  }
  long long integer(const std::string& key, long long def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    auto v = csv::to_int(it->second);
    if (!v) throw ParseError("config key '" + key + "' expects an integer, got '" + it->second + "'");
    return *v;
  }
  bool flag(const std::string& key, bool def) const {
    auto it = values_.find(key);
    return it == values_.end() ? def : detail::parse_bool(it->second);
  }

 private:
  std::map<std::string, std::string> values_;
};

/// Comma list of numbers; "a,b,...,z" expands to the arithmetic sequence.
inline std::vector<double> parse_grid(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string p;
  while (std::getline(ss, p, ',')) parts.push_back(detail::trim(p));
  auto num = [&](const std::string& s) {
    auto v = csv::to_double(s);
    if (!v) throw ParseError("grid: '" + s + "' is not a number");
    return *v;
  };
  auto dots = std::find(parts.begin(), parts.end(), "...");
  if (dots == parts.end()) {
    std::vector<double> out;
    for (const auto& s : parts) out.push_back(num(s));
    if (out.empty()) throw ParseError("grid is empty");
    return out;
  }
  if (parts.size() != 4 || dots != parts.begin() + 2)
    throw ParseError("grid: ellipsis form is 'first,second,...,last'");
  const double a = num(parts[0]), b = num(parts[1]), z = num(parts[3]);
  const double step = b - a;
  if (!(step > 0.0) || z < a) throw ParseError("grid: ellipsis needs an increasing sequence");
  const auto n = static_cast<long long>(std::floor((z - a) / step + 1e-9));
  std::vector<double> out;
  for (long long i = 0; i <= n; ++i) out.push_back(std::round((a + step * static_cast<double>(i)) * 1e12) / 1e12);
  if (std::abs(out.back() - z) > 1e-9 * std::max(1.0, std::abs(z))) out.push_back(z);
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

inline std::string sha256_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ParseError("cannot read '" + p.string() + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

struct Context {
  std::string subcommand;
  fs::path out_dir;
  fs::path in_dir;
  Settings settings;
  std::uint64_t seed = 1;
  int digits = 4;
  ObjectKind object = ObjectKind::employment;
  std::string spec;
  int threads = 1;
  std::vector<fs::path> inputs, outputs;
  nlohmann::ordered_json parameters = nlohmann::ordered_json::object();
  std::ostream* out = &std::cout;
  const Logger* log = nullptr;

  fs::path input(const std::string& key, const std::string& file) {
    fs::path p = settings.has(key) ? fs::path(settings.str(key, "")) : in_dir / file;
    if (!fs::exists(p)) throw ParseError("missing input '" + p.string() + "'");
    inputs.push_back(p);
    return p;
  }
  std::optional<fs::path> optional_input(const std::string& key, const std::string& file) {
    fs::path p = settings.has(key) ? fs::path(settings.str(key, "")) : in_dir / file;
    if (!fs::exists(p)) return std::nullopt;
    inputs.push_back(p);
    return p;
  }
  void write(const std::string& file, const std::string& content) {
    const fs::path p = out_dir / file;
    csv::write_atomic(p, content);
    outputs.push_back(p);
    if (log) log->info("wrote " + p.string());
  }

  void write_manifest() {
    nlohmann::ordered_json m;
    m["subcommand"] = subcommand;
    m["versions"] = {{"monopsono", kVersion},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                   "." + std::to_string(EIGEN_MINOR_VERSION)},
                     {"boost", BOOST_LIB_VERSION}};
    m["parameters"] = parameters;
    auto files = [](const std::vector<fs::path>& v) {
      nlohmann::ordered_json a = nlohmann::ordered_json::array();
      for (const auto& p : v) a.push_back({{"path", p.generic_string()}, {"sha256", sha256_file(p)}});
      return a;
    };
    m["inputs"] = files(inputs);
    m["outputs"] = files(outputs);
    csv::write_atomic(out_dir / ("manifest_" + subcommand + ".json"), m.dump(2) + "\n");
  }
};

// ---------------------------------------------------------------------------
// Shared loaders

inline Delineation load_delineation(Context& ctx) {
  const std::string source = ctx.settings.str("delineation_source", "file");
  ctx.parameters["delineation_source"] = source;
  if (source == "file") return parse_delineation(csv::read(ctx.input("delineation", "delineation.csv")));
  if (source == "computed") {
    const auto fm = parse_flows(csv::read(ctx.input("flows", "flows.csv")));
    const auto grid = parse_grid(ctx.settings.str("tau_grid", "0.01,0.02,...,0.5"));
    const auto res = sweep_thresholds(fm, grid);
    return zone_labels(fm, res.partition);
  }
  throw ParseError("delineation_source must be 'file' or 'computed'");
}

inline SpecConfig load_spec(Context& ctx, const std::string& fallback) {
  SpecConfig c;
  if (ctx.settings.has("spec_file")) {
    std::ifstream in(ctx.input("spec_file", ""));
    std::stringstream ss;
    ss << in.rdbuf();
    c = parse_spec_text(ss.str());
  } else {
    c = named_spec(ctx.spec.empty() ? fallback : ctx.spec);
  }
  static const std::vector<std::string> keys{
      "outcome",         "design",         "fe_scheme",          "iv",
      "interaction",     "controls_on",    "time_trends_on",     "implicit_minwage_on",
      "hhi_source",      "restrict_pre_regulation", "hhi_band_cuts", "kaitz_cuts",
      "trend_base_year"};
  for (const auto& k : keys)
    if (ctx.settings.has(k)) apply_spec_setting(c, k, ctx.settings.str(k, ""));
  c.validate();
  ctx.parameters["spec"] = c.name;
  ctx.parameters["outcome"] = c.outcome;
  return c;
}

inline EstabPanel load_estab_panel(Context& ctx) {
  auto panel = read_estab_panel_csv(csv::read(ctx.input("estab_panel", "estab_panel.csv")));
  if (auto p = ctx.optional_input("instrument", "instrument.csv"))
    attach_instrument(panel, read_instrument_csv(csv::read(*p)));
  return panel;
}

inline FitOptions fit_options(const Context& ctx) {
  FitOptions o;
  o.tol = ctx.settings.num("absorb_tol", 1e-8);
  o.max_iter = static_cast<int>(ctx.settings.integer("absorb_max_iter", 10000));
  const std::string v = ctx.settings.str("vcov", "cluster");
  if (v == "cluster") o.vcov.kind = econ::VcovKind::cluster;
  else if (v == "hc1") o.vcov.kind = econ::VcovKind::hc1;
  else if (v == "classical") o.vcov.kind = econ::VcovKind::classical;
  else throw ParseError("vcov must be cluster, hc1 or classical");
  return o;
}

inline std::string key_value_csv(const std::vector<std::pair<std::string, std::string>>& kv) {
  csv::Writer w({"key", "value"});
  for (const auto& [k, v] : kv) w.row({k, v});
  return w.str();
}

// ---------------------------------------------------------------------------
// Subcommands

inline void cmd_synth(Context& ctx) {
  SynthConfig c;
  const auto& s = ctx.settings;
  c.seed = ctx.seed;
  c.threads = ctx.threads;
  c.n_industries = static_cast<int>(s.integer("n_industries", c.n_industries));
  c.n_zones = static_cast<int>(s.integer("n_zones", c.n_zones));
  c.n_years = static_cast<int>(s.integer("n_years", c.n_years));
  c.start_year = static_cast<int>(s.integer("start_year", c.start_year));
  c.theta = s.num("theta", c.theta);
  c.lambda = s.num("lambda", c.lambda);
  c.j_base = s.num("j_base", c.j_base);
  c.j_max = static_cast<int>(s.integer("j_max", c.j_max));
  c.heads_at_base = s.num("heads_at_base", c.heads_at_base);
  c.minwage_on = s.flag("minwage_on", c.minwage_on);
  c.n_sectors = static_cast<int>(s.integer("n_sectors", c.n_sectors));
  c.n_regulated = static_cast<int>(s.integer("n_regulated", c.n_regulated));
  c.alpha_w = s.num("alpha_w", c.alpha_w);
  c.beta_w = s.num("beta_w", c.beta_w);
  c.alpha_l = s.num("alpha_l", c.alpha_l);
  c.beta_l = s.num("beta_l", c.beta_l);
  if (!s.flag("noise", true)) c.without_noise();
  ctx.parameters["seed"] = c.seed;
  ctx.parameters["n_industries"] = c.n_industries;
  ctx.parameters["n_zones"] = c.n_zones;
  ctx.parameters["n_years"] = c.n_years;
  ctx.parameters["theta"] = c.theta;
  ctx.parameters["minwage_on"] = c.minwage_on;

  const auto out = synth_panel(c);
  ctx.write("snapshots.csv", snapshots_csv(out.records));
  ctx.write("sectors.csv", sectors_csv(out.sectors));
  ctx.write("minwage.csv", minwage_csv(out.minwage));
  ctx.write("controls.csv", controls_csv(out.controls));
  ctx.write("flows.csv", flows_csv(out.districts, out.flows));
  ctx.write("delineation.csv", delineation_csv(out.delineation));
  ctx.write("ground_truth.csv", truth_csv(out.truth));
  *ctx.out << "synth: " << out.records.size() << " snapshot records\n";
}

inline void cmd_delineate(Context& ctx) {
  const auto fm = parse_flows(csv::read(ctx.input("flows", "flows.csv")));
  const std::string grid_text = ctx.settings.str("tau_grid", "0.01,0.02,...,0.5");
  ctx.parameters["tau_grid"] = grid_text;
  const auto res = sweep_thresholds(fm, parse_grid(grid_text));
  ctx.write("delineation.csv", delineation_csv(zone_labels(fm, res.partition)));
  csv::Writer sweep({"tau", "q", "zones", "cross_zone_share"});
  for (const auto& p : res.points)
    sweep.row({csv::fmt(p.tau), csv::fmt(p.q), std::to_string(p.zone_count), csv::fmt(p.cross_zone_share)});
  ctx.write("delineation_sweep.csv", sweep.str());
  ctx.write("delineation_summary.csv",
            key_value_csv({{"districts", std::to_string(fm.size())},
                           {"tau_star", csv::fmt(res.tau_star)},
                           {"zones", std::to_string(res.partition.zone_count)},
                           {"q_star", csv::fmt(res.q_star)},
                           {"cross_zone_share", csv::fmt(res.cross_zone_share)},
                           {"q_initial", csv::fmt(res.q_initial)},
                           {"cross_zone_share_initial", csv::fmt(res.cross_zone_share_initial)}}));
  *ctx.out << "delineate: " << res.partition.zone_count << " zones at tau " << csv::fmt(res.tau_star) << "\n";
}

inline std::vector<SnapshotRecord> load_snapshots(Context& ctx) {
  return parse_snapshots(csv::read(ctx.input("snapshots", "snapshots.csv")));
}

inline void cmd_concentration(Context& ctx) {
  const auto records = load_snapshots(ctx);
  const auto delineation = load_delineation(ctx);
  const auto panel = build_market_panel(records, delineation, ctx.digits, ctx.object);
  const auto rows = concentration_table(panel);
  ctx.write("concentration.csv", concentration_csv(rows));
  std::vector<double> values, weights;
  for (const auto& r : rows) {
    values.push_back(r.hhi);
    weights.push_back(static_cast<double>(r.total));
  }
  std::vector<std::pair<std::string, std::string>> kv{{"cells", std::to_string(rows.size())}};
  if (!rows.empty()) {
    const auto w = weighted_summary(values, weights);
    kv.insert(kv.end(), {{"hhi_mean", csv::fmt(w.mean)},
                         {"hhi_sd", csv::fmt(w.sd)},
                         {"hhi_p25", csv::fmt(w.p25)},
                         {"hhi_p50", csv::fmt(w.p50)},
                         {"hhi_p75", csv::fmt(w.p75)},
                         {"hhi_min", csv::fmt(w.min)},
                         {"hhi_max", csv::fmt(w.max)},
                         {"share_medium", csv::fmt(w.share_medium)},
                         {"share_high", csv::fmt(w.share_high)}});
  }
  std::string omitted;
  for (int y : panel.omitted_years) omitted += (omitted.empty() ? "" : ";") + std::to_string(y);
  kv.emplace_back("omitted_years", omitted);
  ctx.write("concentration_summary.csv", key_value_csv(kv));
  *ctx.out << "concentration: " << rows.size() << " market-years\n";
}

inline void cmd_ingest(Context& ctx) {
  const auto records = load_snapshots(ctx);
  PipelineInputs in;
  in.records = &records;
  in.delineation = load_delineation(ctx);
  in.sectors = parse_sectors(csv::read(ctx.input("sectors", "sectors.csv")));
  if (auto p = ctx.optional_input("minwage", "minwage.csv")) in.minwage = parse_minwage(csv::read(*p));
  if (auto p = ctx.optional_input("controls", "controls.csv")) in.controls = parse_controls(csv::read(*p));
  in.industry_digits = ctx.digits;
  in.object_kind = ctx.object;
  const auto prepared = prepare_records(records);
  const auto market = build_market_panel(records, prepared, in.delineation, in.industry_digits, in.object_kind);
  EstabPanelOptions opt;
  opt.delineation = in.delineation;
  opt.controls = in.controls;
  const auto panel = build_estab_panel(records, prepared, in.sectors, in.minwage, market, opt);
  ctx.write("market_panel.csv", market_panel_csv(market));
  ctx.write("estab_panel.csv", estab_panel_csv(panel));
  std::size_t skipped = 0;
  for (const auto& [ind, n] : panel.skipped_unmapped) skipped += n;
  *ctx.out << "ingest: " << panel.rows.size() << " establishment-years, " << market.cells.size()
           << " market-years, " << skipped << " skipped (no sector)\n";
}

inline void cmd_instrument(Context& ctx) {
  const auto rows = read_concentration_csv(csv::read(ctx.input("concentration", "concentration.csv")));
  std::vector<CellFirmCount> cells;
  std::set<std::string> zones;
  for (const auto& r : rows) {
    cells.push_back({r.key, r.j});
    zones.insert(r.key.zone);
  }
  std::size_t z = zones.size();
  if (auto p = ctx.optional_input("delineation", "delineation.csv"))
    z = zone_count(parse_delineation(csv::read(*p)));
  const bool strict = ctx.settings.flag("strict_zone_count", false);
  ctx.parameters["strict_zone_count"] = strict;
  ctx.parameters["zone_count"] = z;
  const auto inst = leave_one_out_instrument(cells, z, strict);
  ctx.write("instrument.csv", instrument_csv(inst));
  *ctx.out << "instrument: " << inst.size() << " of " << cells.size() << " market-years\n";
}

inline void cmd_regress(Context& ctx) {
  const auto spec = load_spec(ctx, "eq2_iv");
  const auto panel = load_estab_panel(ctx);
  const auto a = assemble_spec(panel, spec);
  for (const auto& t : a.trace) ctx.log->info(t);
  const auto fit = fit_frame(a.frame, spec.iv, fit_options(ctx));
  ctx.write("regression_" + spec.name + ".csv", econ::fit_result_csv(fit));
  *ctx.out << "regress " << spec.name << ": " << a.main_term << " = " << csv::fmt(fit.coef(a.main_term))
           << " (se " << csv::fmt(fit.se(a.main_term)) << ", n " << fit.n << ")\n";
}

inline void cmd_elasticity(Context& ctx) {
  auto spec = load_spec(ctx, "eq4_linear");
  if (spec.design != Design::minwage_eq4) throw DomainError("elasticity needs a minimum-wage specification");
  const std::string grid_text = ctx.settings.str("grid", "0,0.05,...,1");
  ctx.parameters["grid"] = grid_text;
  const auto grid = parse_grid(grid_text);
  const auto panel = load_estab_panel(ctx);
  const auto opt = fit_options(ctx);
  const auto a = assemble_spec(panel, spec);
  const auto fit = fit_frame(a.frame, false, opt);
  const auto curve = curve_from_fit(fit, a.main_term, a.interaction_term);
  ctx.write("elasticities.csv", elasticities_csv(curve, grid));
  const int reps = static_cast<int>(ctx.settings.integer("ratio_reps", 0));
  ctx.parameters["ratio_reps"] = reps;
  if (reps > 0) {
    SpecConfig emp = spec, wage = spec;
    emp.outcome = ctx.settings.str("employment_outcome", "emp_ft");
    wage.outcome = ctx.settings.str("wage_outcome", "mean_wage");
    const auto ratios = ratio_elasticity(assemble_spec(panel, emp), assemble_spec(panel, wage), grid, reps,
                                         ctx.seed, opt, ctx.threads);
    csv::Writer w({"hhi", "ratio", "se_bootstrap", "failed_replicates"});
    for (const auto& r : ratios)
      w.row({csv::fmt(r.hhi), csv::fmt(r.value), csv::fmt(r.se_bootstrap), std::to_string(r.failed_replicates)});
    ctx.write("ratio_elasticities.csv", w.str());
  }
  *ctx.out << "elasticity " << spec.name << ": alpha " << csv::fmt(curve.alpha) << ", beta "
           << csv::fmt(curve.beta) << "\n";
}

inline void cmd_bounds(Context& ctx) {
  auto spec = load_spec(ctx, "eq2_iv");
  if (!spec.iv) throw DomainError("bounds need an instrumented specification");
  const auto panel = load_estab_panel(ctx);
  const auto opt = fit_options(ctx);
  const auto a = assemble_spec(panel, spec);
  const auto absorbed = econ::absorb_fixed_effects(a.frame, opt.tol, opt.max_iter).frame;
  const auto rf = reduced_form(a.frame, opt);
  const double rf_coef = rf.coef(absorbed.z_names.front());
  const double phi_min = ctx.settings.num("phi_min", std::min(rf_coef, 0.0));
  const double phi_max = ctx.settings.num("phi_max", std::max(rf_coef, 0.0));
  const int points = static_cast<int>(ctx.settings.integer("grid_points", 101));
  const double level = ctx.settings.num("level", 0.90);
  ctx.parameters["phi_min"] = phi_min;
  ctx.parameters["phi_max"] = phi_max;
  ctx.parameters["grid_points"] = points;
  ctx.parameters["level"] = level;
  const auto res = econ::conley_bounds(absorbed, phi_min, phi_max, points, level, opt.vcov);
  csv::Writer w({"phi", "beta", "lo", "hi"});
  for (const auto& p : res.points) w.row({csv::fmt(p.phi), csv::fmt(p.beta), csv::fmt(p.lo), csv::fmt(p.hi)});
  ctx.write("bounds.csv", w.str());
  ctx.write("bounds_summary.csv",
            key_value_csv({{"theta_lo", csv::fmt(res.theta_lo)},
                           {"theta_hi", csv::fmt(res.theta_hi)},
                           {"phi_min", csv::fmt(phi_min)},
                           {"phi_max", csv::fmt(phi_max)},
                           {"reduced_form", csv::fmt(rf_coef)},
                           {"phi_negative", res.phi_negative ? csv::fmt(*res.phi_negative) : ""}}));
  *ctx.out << "bounds: [" << csv::fmt(res.theta_lo) << ", " << csv::fmt(res.theta_hi) << "]\n";
}

inline void cmd_simulate(Context& ctx) {
  const auto& s = ctx.settings;
  OligopsonyEconomy base;
  base.a = s.num("a", base.a);
  base.b = s.num("b", base.b);
  base.c = s.num("c", base.c);
  base.d = s.num("d", base.d);
  const std::string firms_text = s.str("firms", "1,2,5");
  const std::string grid_text =
      s.str("wmin_grid", "0," + csv::fmt(base.c / 100.0) + ",...," + csv::fmt(1.2 * base.c));
  ctx.parameters["a"] = base.a;
  ctx.parameters["b"] = base.b;
  ctx.parameters["c"] = base.c;
  ctx.parameters["d"] = base.d;
  ctx.parameters["firms"] = firms_text;
  ctx.parameters["wmin_grid"] = grid_text;
  const auto grid = parse_grid(grid_text);
  std::vector<std::pair<OligopsonyEconomy, std::vector<ResponsePoint>>> curves;
  csv::Writer eq({"j", "cournot_wage", "cournot_employment", "competitive_wage", "competitive_employment",
                  "markdown"});
  for (double jf : parse_grid(firms_text)) {
    OligopsonyEconomy e = base;
    e.j = static_cast<int>(jf);
    if (e.j != jf) throw ParseError("firm counts must be integers");
    const auto co = cournot_equilibrium(e);
    const auto cp = competitive_equilibrium(e);
    eq.row({std::to_string(e.j), csv::fmt(co.wage), csv::fmt(co.employment_total), csv::fmt(cp.wage),
            csv::fmt(cp.employment_total), csv::fmt(markdown(e))});
    curves.emplace_back(e, response_curve(e, grid));
  }
  ctx.write("response_curves.csv", response_curve_csv(curves));
  ctx.write("equilibria.csv", eq.str());
  *ctx.out << "simulate: " << curves.size() << " curves x " << grid.size() << " points\n";
}

inline void cmd_report(Context& ctx) {
  std::ostringstream md;
  md << "# Run report\n";
  auto table = [&](const fs::path& p, const std::string& title) {
    const auto t = csv::read(p);
    ctx.inputs.push_back(p);
    md << "\n## " << title << "\n\n|";
    for (const auto& h : t.header) md << ' ' << h << " |";
    md << "\n|";
    for (std::size_t i = 0; i < t.header.size(); ++i) md << " --- |";
    md << '\n';
    for (const auto& r : t.rows) {
      md << '|';
      for (const auto& f : r) md << ' ' << f << " |";
      md << '\n';
    }
  };
  std::vector<fs::path> found;
  for (const auto& name : {"ground_truth.csv", "delineation_summary.csv", "concentration_summary.csv",
                           "bounds_summary.csv", "elasticities.csv", "ratio_elasticities.csv", "equilibria.csv"}) {
    const fs::path p = ctx.in_dir / name;
    if (fs::exists(p)) found.push_back(p);
  }
  std::vector<fs::path> regressions;
  if (fs::exists(ctx.in_dir))
    for (const auto& e : fs::directory_iterator(ctx.in_dir)) {
      const auto n = e.path().filename().string();
      if (n.rfind("regression_", 0) == 0 && e.path().extension() == ".csv") regressions.push_back(e.path());
    }
  std::sort(regressions.begin(), regressions.end());
  if (found.empty() && regressions.empty()) throw ParseError("no artifacts to report in '" + ctx.in_dir.string() + "'");
  for (const auto& p : found) table(p, p.stem().string());
  for (const auto& p : regressions) table(p, p.stem().string());
  ctx.write("report.md", md.str());
  *ctx.out << "report: " << found.size() + regressions.size() << " tables\n";
}

// ---------------------------------------------------------------------------
// Entry point

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Labor-market concentration and minimum-wage pipeline", "monopsono"};
  app.set_version_flag("--version", kVersion);
  std::string config, out_dir = "out", in_dir, spec, object = "employment", grid, phi_min, phi_max;
  std::uint64_t seed = 1;
  int digits = 4, threads = 1;
  app.add_option("--config", config, "INI config file; [subcommand] sections override global keys");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--in", in_dir, "input directory (defaults to --out)");
  auto* seed_opt = app.add_option("--seed", seed, "random seed");
  auto* digits_opt = app.add_option("--digits", digits, "industry digits")->check(CLI::IsMember({3, 4, 5}));
  auto* object_opt = app.add_option("--object", object, "concentration object")->check(CLI::IsMember({"employment", "hires"}));
  app.add_option("--spec", spec, "named specification");
  auto* threads_opt = app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  auto* grid_opt = app.add_option("--grid", grid, "HHI grid, e.g. 0,0.05,...,1");
  auto* phi_min_opt = app.add_option("--phi-min", phi_min, "lower bound of the direct effect");
  auto* phi_max_opt = app.add_option("--phi-max", phi_max, "upper bound of the direct effect");
  std::string sub;
  app.add_option("subcommand", sub, "one of: synth ingest delineate concentration instrument regress "
                                     "elasticity bounds simulate report")
      ->required();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "monopsono: " << e.what() << '\n' << app.help();
    return 2;
  }
  if (std::find(subcommands().begin(), subcommands().end(), sub) == subcommands().end()) {
    err << "monopsono: unknown subcommand '" << sub << "'\n" << app.help();
    return 2;
  }

  const Logger log(err);
  try {
    Context ctx;
    ctx.subcommand = sub;
    ctx.out = &out;
    ctx.log = &log;
    ctx.settings = Settings::load(config, sub);
    if (!config.empty()) ctx.inputs.push_back(config);
    auto cfg_int = [&](const char* key, long long def) { return ctx.settings.integer(key, def); };
    ctx.out_dir = ctx.settings.str("out", out_dir);
    if (app.count("--out")) ctx.out_dir = out_dir;
    ctx.in_dir = !in_dir.empty() ? fs::path(in_dir) : fs::path(ctx.settings.str("in", ctx.out_dir.string()));
    ctx.seed = seed_opt->count() ? seed : static_cast<std::uint64_t>(cfg_int("seed", 1));
    ctx.digits = digits_opt->count() ? digits : static_cast<int>(cfg_int("digits", 4));
    if (ctx.digits < 3 || ctx.digits > 5) throw ParseError("digits must be 3, 4 or 5");
    ctx.object = parse_object_kind(object_opt->count() ? object : ctx.settings.str("object", "employment"));
    ctx.spec = !spec.empty() ? spec : ctx.settings.str("spec", "");
    ctx.threads = threads_opt->count() ? threads : static_cast<int>(cfg_int("threads", 1));
    if (grid_opt->count()) ctx.settings.set("grid", grid);
    if (phi_min_opt->count()) ctx.settings.set("phi_min", phi_min);
    if (phi_max_opt->count()) ctx.settings.set("phi_max", phi_max);
    ctx.parameters["digits"] = ctx.digits;
    ctx.parameters["object"] = std::string(to_string(ctx.object));
    ctx.parameters["seed"] = ctx.seed;
    fs::create_directories(ctx.out_dir);
    log.debug("subcommand " + sub + ", out " + ctx.out_dir.string() + ", in " + ctx.in_dir.string());

    if (sub == "synth") cmd_synth(ctx);
    else if (sub == "ingest") cmd_ingest(ctx);
    else if (sub == "delineate") cmd_delineate(ctx);
    else if (sub == "concentration") cmd_concentration(ctx);
    else if (sub == "instrument") cmd_instrument(ctx);
    else if (sub == "regress") cmd_regress(ctx);
    else if (sub == "elasticity") cmd_elasticity(ctx);
    else if (sub == "bounds") cmd_bounds(ctx);
    else if (sub == "simulate") cmd_simulate(ctx);
    else if (sub == "report") cmd_report(ctx);
    ctx.write_manifest();
    return 0;
  } catch (const ParseError& e) {
    err << "monopsono: parse error: " << e.what() << '\n';
  } catch (const DomainError& e) {
    err << "monopsono: domain error: " << e.what() << '\n';
  } catch (const EstimationError& e) {
    err << "monopsono: estimation error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "monopsono: error: " << e.what() << '\n';
  }
  return 1;
}

}  // namespace monopsono::cli
