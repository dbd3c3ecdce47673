#pragma once

// Regression specifications for concentration effects (log outcome on log
// HHI, optionally instrumented) and minimum-wage effects (log outcome on log
// minimum wage interacted with concentration), plus the elasticity objects
// derived from them.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "concentration.hpp"
#include "csv.hpp"
#include "data_model.hpp"
#include "econometrics.hpp"
#include "errors.hpp"

namespace monopsono {

// ---------------------------------------------------------------------------
// Leave-one-out instrument

struct CellFirmCount {
  MarketKey key;
  std::size_t j = 0;
};

/// Average of ln(1/J) over the other zones of the same industry and year.
/// By default the divisor counts only zones where the industry exists; with
/// strict_zone_count it is zone_count - 1. Cells whose industry exists in no
/// other zone get no value.
inline std::map<MarketKey, double> leave_one_out_instrument(const std::vector<CellFirmCount>& cells,
                                                            std::size_t zone_count,
                                                            bool strict_zone_count = false) {
  if (strict_zone_count && zone_count < 2) throw DomainError("strict divisor needs at least two zones");
  std::map<std::pair<std::string, int>, std::vector<std::pair<const MarketKey*, double>>> groups;
  for (const auto& c : cells) {
    if (c.j == 0) throw DomainError("cell with zero firms");
    groups[{c.key.industry, c.key.year}].push_back(
        {&c.key, std::log(1.0 / static_cast<double>(c.j))});
  }
  std::map<MarketKey, double> out;
  for (const auto& [g, members] : groups) {
    double total = 0.0;
    for (const auto& m : members) total += m.second;
    const std::size_t others = members.size() - 1;
    if (others == 0) continue;
    const double divisor = strict_zone_count ? static_cast<double>(zone_count - 1)
                                             : static_cast<double>(others);
    for (const auto& [key, v] : members) out[*key] = (total - v) / divisor;
  }
  return out;
}

inline std::map<MarketKey, double> leave_one_out_instrument(const MarketPanel& panel,
                                                            std::size_t zone_count,
                                                            bool strict_zone_count = false) {
  std::vector<CellFirmCount> cells;
  cells.reserve(panel.cells.size());
  for (const auto& [k, c] : panel.cells) cells.push_back({k, c.firm_count()});
  return leave_one_out_instrument(cells, zone_count, strict_zone_count);
}

inline std::string instrument_csv(const std::map<MarketKey, double>& inst) {
  csv::Writer w({"industry", "zone", "year", "instrument"});
  for (const auto& [k, v] : inst) w.row({k.industry, k.zone, std::to_string(k.year), csv::fmt(v)});
  return w.str();
}

inline std::map<MarketKey, double> read_instrument_csv(const csv::Table& t) {
  const auto ci = t.require("industry"), cz = t.require("zone"), cy = t.require("year"),
             cv = t.require("instrument");
  std::map<MarketKey, double> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    out[{t.rows[r][ci], t.rows[r][cz], static_cast<int>(csv::field_int(t, r, cy))}] =
        csv::field_double(t, r, cv);
  return out;
}

inline void attach_instrument(EstabPanel& panel, const std::map<MarketKey, double>& inst) {
  for (auto& r : panel.rows) {
    auto it = inst.find({r.market_industry, r.zone, r.year});
    r.instrument = it == inst.end() ? std::nullopt : std::optional<double>(it->second);
  }
}

// ---------------------------------------------------------------------------
// Specification config

enum class Design { concentration_eq2, minwage_eq4 };
enum class FeScheme { estab, estab_year, estab_year_zone };
enum class Interaction { none, linear_hhi, hhi_bands, kaitz_quintiles_triple, akm_extra };
enum class HhiSource { avg, predetermined, current };

struct SpecConfig {
  std::string name = "custom";
  std::string outcome = "mean_wage";
  Design design = Design::concentration_eq2;
  FeScheme fe_scheme = FeScheme::estab_year_zone;
  bool iv = false;
  Interaction interaction = Interaction::none;
  bool controls_on = false;
  bool time_trends_on = false;
  bool implicit_minwage_on = false;
  HhiSource hhi_source = HhiSource::avg;
  bool restrict_pre_regulation = true;  // concentration design only
  std::vector<double> hhi_band_cuts{0.05, 0.10, 0.20, 0.40};
  std::vector<double> kaitz_cuts = default_kaitz_cuts();
  std::optional<int> trend_base_year;

  void validate() const {
    if (iv && design != Design::concentration_eq2)
      throw DomainError("instrumenting is only defined for the concentration design");
    if (design == Design::concentration_eq2 && interaction != Interaction::none)
      throw DomainError("interactions are only defined for the minimum-wage design");
    if (!std::is_sorted(hhi_band_cuts.begin(), hhi_band_cuts.end()) ||
        !std::is_sorted(kaitz_cuts.begin(), kaitz_cuts.end()))
      throw DomainError("cut points must be ascending");
  }
};

namespace detail {

inline bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ParseError("expected a boolean, got '" + std::string(v) + "'");
}

inline std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return std::string(s.substr(a, b - a + 1));
}

inline std::vector<double> parse_doubles(std::string_view v) {
  std::vector<double> out;
  for (const auto& f : csv::split_line(v)) {
    auto d = csv::to_double(trim(f));
    if (!d) throw ParseError("expected a number list, got '" + std::string(v) + "'");
    out.push_back(*d);
  }
  return out;
}

}  // namespace detail

inline void apply_spec_setting(SpecConfig& c, const std::string& key, const std::string& value) {
  if (key == "name") c.name = value;
  else if (key == "outcome") c.outcome = value;
  else if (key == "design") {
    if (value == "concentration_eq2") c.design = Design::concentration_eq2;
    else if (value == "minwage_eq4") c.design = Design::minwage_eq4;
    else throw ParseError("unknown design '" + value + "'");
  } else if (key == "fe_scheme") {
    if (value == "estab") c.fe_scheme = FeScheme::estab;
    else if (value == "estab+year" || value == "estab_year") c.fe_scheme = FeScheme::estab_year;
    else if (value == "estab+year×zone" || value == "estab+year_zone" || value == "estab_year_zone")
      c.fe_scheme = FeScheme::estab_year_zone;
    else throw ParseError("unknown fe_scheme '" + value + "'");
  } else if (key == "iv") c.iv = detail::parse_bool(value);
  else if (key == "interaction") {
    if (value == "none") c.interaction = Interaction::none;
    else if (value == "linear_hhi") c.interaction = Interaction::linear_hhi;
    else if (value == "hhi_bands") c.interaction = Interaction::hhi_bands;
    else if (value == "kaitz_quintiles_triple") c.interaction = Interaction::kaitz_quintiles_triple;
    else if (value == "akm_extra") c.interaction = Interaction::akm_extra;
    else throw ParseError("unknown interaction '" + value + "'");
  } else if (key == "controls_on") c.controls_on = detail::parse_bool(value);
  else if (key == "time_trends_on") c.time_trends_on = detail::parse_bool(value);
  else if (key == "implicit_minwage_on") c.implicit_minwage_on = detail::parse_bool(value);
  else if (key == "hhi_source") {
    if (value == "avg") c.hhi_source = HhiSource::avg;
    else if (value == "predetermined") c.hhi_source = HhiSource::predetermined;
    else if (value == "current") c.hhi_source = HhiSource::current;
    else throw ParseError("unknown hhi_source '" + value + "'");
  } else if (key == "restrict_pre_regulation") c.restrict_pre_regulation = detail::parse_bool(value);
  else if (key == "hhi_band_cuts") c.hhi_band_cuts = detail::parse_doubles(value);
  else if (key == "kaitz_cuts") c.kaitz_cuts = detail::parse_doubles(value);
  else if (key == "trend_base_year") {
    auto v = csv::to_int(value);
    if (!v) throw ParseError("trend_base_year must be an integer");
    c.trend_base_year = static_cast<int>(*v);
  } else
    throw ParseError("unknown spec key '" + key + "'");
}

/// Named specifications: the four concentration columns and the
/// minimum-wage baseline with its robustness variants.
inline SpecConfig named_spec(std::string_view name) {
  SpecConfig c;
  c.name = std::string(name);
  auto eq4 = [&] {
    c.design = Design::minwage_eq4;
    c.outcome = "emp_ft";
    c.fe_scheme = FeScheme::estab_year_zone;
    c.interaction = Interaction::linear_hhi;
    c.controls_on = true;
    c.time_trends_on = true;
  };
  if (name == "eq2_estab") c.fe_scheme = FeScheme::estab;
  else if (name == "eq2_estab_year") c.fe_scheme = FeScheme::estab_year;
  else if (name == "eq2_zone_year") c.fe_scheme = FeScheme::estab_year_zone;
  else if (name == "eq2_iv") c.iv = true;
  else if (name == "eq4_estab") {
    eq4();
    c.fe_scheme = FeScheme::estab;
    c.controls_on = c.time_trends_on = false;
  } else if (name == "eq4_estab_year") {
    eq4();
    c.fe_scheme = FeScheme::estab_year;
    c.controls_on = c.time_trends_on = false;
  } else if (name == "eq4_zone_year") {
    eq4();
    c.controls_on = c.time_trends_on = false;
  } else if (name == "eq4_linear") eq4();
  else if (name == "eq4_bands") {
    eq4();
    c.interaction = Interaction::hhi_bands;
  } else if (name == "eq4_kaitz") {
    eq4();
    c.interaction = Interaction::kaitz_quintiles_triple;
  } else if (name == "eq4_akm") {
    eq4();
    c.interaction = Interaction::akm_extra;
  } else if (name == "eq4_implicit") {
    eq4();
    c.implicit_minwage_on = true;
  } else if (name == "eq4_predetermined") {
    eq4();
    c.hhi_source = HhiSource::predetermined;
  } else if (name == "eq4_current") {
    eq4();
    c.hhi_source = HhiSource::current;
  } else if (name == "eq4_no_trends") {
    eq4();
    c.time_trends_on = false;
  } else if (name == "eq4_closure") {
    eq4();
    c.outcome = "closure";
  } else
    throw ParseError("unknown specification '" + std::string(name) + "'");
  return c;
}

/// key = value lines; '#' starts a comment. A `base` key selects a named
/// specification that later keys override.
inline SpecConfig parse_spec_text(const std::string& text) {
  SpecConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("spec line " + std::to_string(lineno) + ": expected key = value");
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (key == "base") {
      const auto keep_name = c.name;
      c = named_spec(value);
      if (keep_name != "custom") c.name = keep_name;
    } else {
      apply_spec_setting(c, key, value);
    }
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Assembly

struct AssembledSpec {
  econ::RegressionFrame frame;
  std::vector<std::size_t> panel_rows;       // panel row of each frame row
  std::vector<std::string> cluster_labels;   // market id of each frame row
  std::vector<std::string> trace;            // "filter: remaining rows"
  std::string main_term;                     // coefficient of interest
  std::string interaction_term;              // linear HHI interaction when present
};

namespace detail {

inline std::optional<double> outcome_value(const EstabRow& r, const std::string& name) {
  auto count = [](long long v) { return std::optional<double>(static_cast<double>(v)); };
  if (name == "mean_wage") return r.mean_wage;
  if (name == "p05_wage") return r.p05_wage;
  if (name == "p25_wage") return r.p25_wage;
  if (name == "p50_wage") return r.p50_wage;
  if (name == "p75_wage") return r.p75_wage;
  if (name == "emp_ft") return count(r.emp_ft);
  if (name == "emp_pt") return count(r.emp_pt);
  if (name == "emp_marginal") return count(r.emp_marginal);
  if (name == "emp_overall") return count(r.emp_overall);
  if (name == "closure") return r.closure ? 1.0 : 0.0;
  throw DomainError("unknown outcome column '" + name + "'");
}

inline std::optional<double> hhi_value(const EstabRow& r, HhiSource s) {
  switch (s) {
    case HhiSource::avg: return r.hhi_avg;
    case HhiSource::predetermined: return r.hhi_predetermined;
    case HhiSource::current: return r.hhi_current;
  }
  return std::nullopt;
}

struct ColumnBuilder {
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;

  std::vector<double>& add(std::string name, std::size_t n) {
    names.push_back(std::move(name));
    cols.emplace_back(n, 0.0);
    return cols.back();
  }

  // Drops columns that are identically zero (absent categories).
  void drop_zero_columns(std::size_t keep_first) {
    for (std::size_t j = cols.size(); j-- > keep_first;) {
      if (std::all_of(cols[j].begin(), cols[j].end(), [](double v) { return v == 0.0; })) {
        cols.erase(cols.begin() + static_cast<std::ptrdiff_t>(j));
        names.erase(names.begin() + static_cast<std::ptrdiff_t>(j));
      }
    }
  }

  Eigen::MatrixXd matrix(std::size_t n) const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j)
      for (std::size_t i = 0; i < n; ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cols[j][i];
    return m;
  }
};

}  // namespace detail

/// Builds the regression frame for one specification. Log outcomes (closure
/// stays a 0/1 indicator); the concentration design regresses on log HHI
/// over pre-regulation years; the minimum-wage design regresses on log
/// minimum wage and its interactions. Time-invariant HHI main effects are
/// absorbed by the establishment fixed effect. Absent categories are dropped,
/// the lowest present one serving as reference.
inline AssembledSpec assemble_spec(const EstabPanel& panel, const SpecConfig& cfg) {
  cfg.validate();
  AssembledSpec out;
  const bool log_outcome = cfg.outcome != "closure";
  std::vector<std::size_t> keep;
  keep.reserve(panel.rows.size());
  std::vector<double> y, mw, h;

  std::map<std::string, std::size_t> dropped;
  auto drop = [&](const char* why) { ++dropped[why]; };

  for (std::size_t i = 0; i < panel.rows.size(); ++i) {
    const auto& r = panel.rows[i];
    auto yv = detail::outcome_value(r, cfg.outcome);
    if (!yv) { drop("outcome missing"); continue; }
    if (log_outcome && !(*yv > 0.0)) { drop("outcome not positive (log undefined)"); continue; }
    if (cfg.design == Design::concentration_eq2) {
      if (cfg.restrict_pre_regulation &&
          (r.minwage || (r.first_regulated_year && r.year >= *r.first_regulated_year))) {
        drop("minimum wage in force (pre-regulation sample)");
        continue;
      }
      if (!r.hhi_current || !(*r.hhi_current > 0.0)) { drop("HHI missing"); continue; }
      if (cfg.iv && !r.instrument) { drop("instrument missing"); continue; }
      h.push_back(std::log(*r.hhi_current));
      mw.push_back(0.0);
    } else {
      std::optional<double> m = r.minwage;
      if (!m && cfg.implicit_minwage_on) m = r.implicit_minwage;
      if (!m || !(*m > 0.0)) { drop("no minimum wage (log undefined)"); continue; }
      auto hv = detail::hhi_value(r, cfg.hhi_source);
      if (!hv) { drop("HHI missing"); continue; }
      if (cfg.controls_on && (!r.log_employment || !r.cba_share)) { drop("controls missing"); continue; }
      if (cfg.interaction == Interaction::akm_extra && !r.akm_premium) { drop("AKM premium missing"); continue; }
      if (cfg.interaction == Interaction::kaitz_quintiles_triple && !r.kaitz_avg) { drop("Kaitz index missing"); continue; }
      mw.push_back(std::log(*m));
      h.push_back(*hv);
    }
    y.push_back(log_outcome ? std::log(*yv) : *yv);
    keep.push_back(i);
  }

  out.trace.push_back("panel rows: " + std::to_string(panel.rows.size()));
  for (const auto& [why, n] : dropped) out.trace.push_back("dropped " + std::to_string(n) + ": " + why);
  out.trace.push_back("estimation rows: " + std::to_string(keep.size()));
  if (keep.empty()) {
    std::string msg = "empty estimation sample for '" + cfg.name + "'";
    for (const auto& t : out.trace) msg += "; " + t;
    throw EstimationError(msg);
  }

  const std::size_t n = keep.size();
  auto& f = out.frame;
  f.y_name = (log_outcome ? "log_" : "") + cfg.outcome;
  f.y = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(n));

  detail::ColumnBuilder xb;
  std::size_t fixed_cols = 0;
  if (cfg.design == Design::concentration_eq2) {
    out.main_term = "log_hhi";
    Eigen::VectorXd lh = Eigen::Map<const Eigen::VectorXd>(h.data(), static_cast<Eigen::Index>(n));
    if (cfg.iv) {
      f.endog_names = {"log_hhi"};
      f.endog = lh;
      f.z_names = {"loo_log_ins"};
      f.Z.resize(static_cast<Eigen::Index>(n), 1);
      for (std::size_t i = 0; i < n; ++i) f.Z(static_cast<Eigen::Index>(i), 0) = *panel.rows[keep[i]].instrument;
    } else {
      xb.add("log_hhi", n).assign(h.begin(), h.end());
    }
    fixed_cols = xb.cols.size();
  } else {
    out.main_term = "log_minwage";
    xb.add("log_minwage", n).assign(mw.begin(), mw.end());
    if (cfg.interaction != Interaction::none && cfg.interaction != Interaction::hhi_bands) {
      auto& c = xb.add("log_minwage_x_hhi", n);
      for (std::size_t i = 0; i < n; ++i) c[i] = mw[i] * h[i];
      out.interaction_term = "log_minwage_x_hhi";
    }
    fixed_cols = xb.cols.size();
    if (cfg.interaction == Interaction::hhi_bands) {
      std::vector<int> band(n);
      for (std::size_t i = 0; i < n; ++i) band[i] = group_of(h[i], cfg.hhi_band_cuts);
      const int ref = *std::min_element(band.begin(), band.end());
      for (int b = ref + 1; b <= static_cast<int>(cfg.hhi_band_cuts.size()); ++b) {
        auto& c = xb.add("log_minwage_x_band" + std::to_string(b + 1), n);
        for (std::size_t i = 0; i < n; ++i) c[i] = band[i] == b ? mw[i] : 0.0;
      }
    } else if (cfg.interaction == Interaction::kaitz_quintiles_triple) {
      std::vector<int> q(n);
      for (std::size_t i = 0; i < n; ++i) q[i] = group_of(*panel.rows[keep[i]].kaitz_avg, cfg.kaitz_cuts);
      const int ref = *std::min_element(q.begin(), q.end());
      for (int g = ref + 1; g <= static_cast<int>(cfg.kaitz_cuts.size()); ++g) {
        auto& c = xb.add("log_minwage_x_kaitz_q" + std::to_string(g + 1), n);
        for (std::size_t i = 0; i < n; ++i) c[i] = q[i] == g ? mw[i] : 0.0;
      }
      for (int g = ref + 1; g <= static_cast<int>(cfg.kaitz_cuts.size()); ++g) {
        auto& c = xb.add("log_minwage_x_hhi_x_kaitz_q" + std::to_string(g + 1), n);
        for (std::size_t i = 0; i < n; ++i) c[i] = q[i] == g ? mw[i] * h[i] : 0.0;
      }
    } else if (cfg.interaction == Interaction::akm_extra) {
      auto& c = xb.add("log_minwage_x_akm", n);
      for (std::size_t i = 0; i < n; ++i) c[i] = mw[i] * *panel.rows[keep[i]].akm_premium;
    }
    xb.drop_zero_columns(fixed_cols);
    if (cfg.hhi_source == HhiSource::current) xb.add("hhi", n).assign(h.begin(), h.end());
    if (cfg.controls_on) {
      auto& le = xb.add("log_employment", n);
      for (std::size_t i = 0; i < n; ++i) le[i] = *panel.rows[keep[i]].log_employment;
      auto& cb = xb.add("cba_share", n);
      for (std::size_t i = 0; i < n; ++i) cb[i] = *panel.rows[keep[i]].cba_share;
    }
    if (cfg.time_trends_on) {
      std::set<std::string> sectors;
      int base = cfg.trend_base_year.value_or(panel.rows[keep[0]].year);
      if (!cfg.trend_base_year)
        for (std::size_t i : keep) base = std::min(base, panel.rows[i].year);
      for (std::size_t i : keep) sectors.insert(panel.rows[i].sector);
      auto it = sectors.begin();
      // The sum of all sector trends is a common trend absorbed by year effects.
      if (cfg.fe_scheme != FeScheme::estab) ++it;
      for (; it != sectors.end(); ++it) {
        auto& c = xb.add("trend_" + *it, n);
        for (std::size_t i = 0; i < n; ++i)
          if (panel.rows[keep[i]].sector == *it) c[i] = panel.rows[keep[i]].year - base;
      }
    }
  }
  f.x_names = xb.names;
  f.X = xb.matrix(n);

  std::vector<std::string> estab(n), year(n), zone_year(n);
  out.cluster_labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = panel.rows[keep[i]];
    estab[i] = r.estab_id;
    year[i] = std::to_string(r.year);
    zone_year[i] = r.zone + "|" + year[i];
    out.cluster_labels[i] = r.market_id();
  }
  f.fe.push_back(econ::make_factor("estab", estab));
  if (cfg.fe_scheme == FeScheme::estab_year) f.fe.push_back(econ::make_factor("year", year));
  if (cfg.fe_scheme == FeScheme::estab_year_zone) f.fe.push_back(econ::make_factor("zone_year", zone_year));
  f.cluster = econ::make_factor("market", out.cluster_labels);
  out.panel_rows = std::move(keep);
  return out;
}

struct FitOptions {
  double tol = 1e-8;
  int max_iter = 10000;
  econ::VcovOptions vcov{};
};

/// Absorbs the fixed effects and runs OLS or 2SLS.
inline econ::FitResult fit_frame(const econ::RegressionFrame& frame, bool iv, const FitOptions& opt = {}) {
  const auto absorbed = econ::absorb_fixed_effects(frame, opt.tol, opt.max_iter);
  return iv ? econ::tsls(absorbed.frame, opt.vcov) : econ::ols(absorbed.frame, opt.vcov);
}

/// Regression of the outcome on the excluded instrument in place of the
/// endogenous regressor; its coefficient bounds the instrument's direct effect.
inline econ::FitResult reduced_form(const econ::RegressionFrame& frame, const FitOptions& opt = {}) {
  econ::RegressionFrame rf = frame;
  rf.X = econ::hcat(frame.X, frame.Z, frame.rows());
  rf.x_names.insert(rf.x_names.end(), frame.z_names.begin(), frame.z_names.end());
  rf.endog.resize(0, 0);
  rf.endog_names.clear();
  rf.Z.resize(0, 0);
  rf.z_names.clear();
  return fit_frame(rf, false, opt);
}

// ---------------------------------------------------------------------------
// Elasticities

struct ElasticityCurve {
  double alpha = 0.0;
  double beta = 0.0;
  Eigen::Matrix2d vcov_ab = Eigen::Matrix2d::Zero();
  int dof = 0;  // 0 selects the normal reference distribution

  void validate() const {
    if (std::abs(vcov_ab(0, 1) - vcov_ab(1, 0)) > 1e-12 * (1.0 + vcov_ab.cwiseAbs().maxCoeff()))
      throw DomainError("elasticity covariance is not symmetric");
    if (vcov_ab(0, 0) < 0.0 || vcov_ab(1, 1) < 0.0) throw DomainError("negative variance in elasticity curve");
  }
};

inline ElasticityCurve curve_from_fit(const econ::FitResult& fit, const std::string& main_term,
                                      const std::string& interaction_term) {
  ElasticityCurve c;
  const auto a = static_cast<Eigen::Index>(fit.index_of(main_term));
  c.alpha = fit.beta[a];
  c.vcov_ab(0, 0) = fit.vcov(a, a);
  if (!interaction_term.empty()) {
    const auto b = static_cast<Eigen::Index>(fit.index_of(interaction_term));
    c.beta = fit.beta[b];
    c.vcov_ab(1, 1) = fit.vcov(b, b);
    c.vcov_ab(0, 1) = c.vcov_ab(1, 0) = fit.vcov(a, b);
  }
  c.dof = fit.dof;
  return c;
}

struct ElasticityPoint {
  double hhi = 0.0;
  double eta = 0.0;
  double se = 0.0;
};

/// eta(HHI) = alpha + beta * HHI with a delta-method standard error.
inline ElasticityPoint elasticity_at(const ElasticityCurve& c, double hhi_value) {
  c.validate();
  if (!(hhi_value >= 0.0 && hhi_value <= 1.0)) throw DomainError("HHI outside [0,1]");
  const double var = c.vcov_ab(0, 0) + hhi_value * hhi_value * c.vcov_ab(1, 1) +
                     2.0 * hhi_value * c.vcov_ab(0, 1);
  return {hhi_value, c.alpha + c.beta * hhi_value, std::sqrt(std::max(0.0, var))};
}

inline double critical_value(int dof, double level) {
  const double q = 0.5 + 0.5 * level;
  if (dof > 0) return boost::math::quantile(boost::math::students_t(dof), q);
  return boost::math::quantile(boost::math::normal(), q);
}

inline std::string elasticities_csv(const ElasticityCurve& c, const std::vector<double>& grid) {
  csv::Writer w({"hhi", "eta", "se", "lo90", "hi90"});
  const double z = critical_value(c.dof, 0.90);
  for (double h : grid) {
    const auto p = elasticity_at(c, h);
    w.row({csv::fmt(h), csv::fmt(p.eta), csv::fmt(p.se), csv::fmt(p.eta - z * p.se),
           csv::fmt(p.eta + z * p.se)});
  }
  return w.str();
}

inline constexpr double kNonBindingThreshold = 1e-6;

/// Employment over earnings elasticity at one HHI value.
inline double ratio_point(const ElasticityCurve& emp, const ElasticityCurve& wage, double hhi_value) {
  const double num = elasticity_at(emp, hhi_value).eta;
  const double den = elasticity_at(wage, hhi_value).eta;
  if (std::abs(den) < kNonBindingThreshold)
    throw DomainError("earnings elasticity near zero at HHI " + csv::fmt(hhi_value) +
                      ": minimum wage does not bind");
  return num / den;
}

struct RatioElasticity {
  double hhi = 0.0;
  double value = 0.0;
  double se_bootstrap = 0.0;
  int failed_replicates = 0;
};

/// Ratio elasticities on an HHI grid with cluster-bootstrap standard errors;
/// each replicate re-estimates both regressions on the same cluster draw.
inline std::vector<RatioElasticity> ratio_elasticity(const AssembledSpec& emp, const AssembledSpec& wage,
                                                     const std::vector<double>& hhi_grid, int b,
                                                     std::uint64_t seed, const FitOptions& opt = {},
                                                     int threads = 1) {
  const auto emp_fit = fit_frame(emp.frame, false, opt);
  const auto wage_fit = fit_frame(wage.frame, false, opt);
  const auto emp_curve = curve_from_fit(emp_fit, emp.main_term, emp.interaction_term);
  const auto wage_curve = curve_from_fit(wage_fit, wage.main_term, wage.interaction_term);

  std::vector<RatioElasticity> out;
  for (double h : hhi_grid) out.push_back({h, ratio_point(emp_curve, wage_curve, h), 0.0, 0});

  // Shared cluster universe across both frames.
  std::map<std::string, int> universe;
  for (const auto& l : emp.cluster_labels) universe.emplace(l, 0);
  for (const auto& l : wage.cluster_labels) universe.emplace(l, 0);
  int next = 0;
  for (auto& [l, id] : universe) id = next++;
  auto rows_by_cluster = [&](const AssembledSpec& s) {
    std::vector<std::vector<Eigen::Index>> rows(universe.size());
    for (std::size_t i = 0; i < s.cluster_labels.size(); ++i)
      rows[static_cast<std::size_t>(universe.at(s.cluster_labels[i]))].push_back(static_cast<Eigen::Index>(i));
    return rows;
  };
  const auto emp_rows = rows_by_cluster(emp);
  const auto wage_rows = rows_by_cluster(wage);

  for (auto& r : out) {
    const auto boot = econ::bootstrap_clusters(
        static_cast<int>(universe.size()), b, seed,
        [&](std::span<const int> draw) -> std::optional<double> {
          const auto fe = fit_frame(econ::resample_clusters(emp.frame, emp_rows, draw), false, opt);
          const auto fw = fit_frame(econ::resample_clusters(wage.frame, wage_rows, draw), false, opt);
          return ratio_point(curve_from_fit(fe, emp.main_term, emp.interaction_term),
                             curve_from_fit(fw, wage.main_term, wage.interaction_term), r.hhi);
        },
        threads);
    r.se_bootstrap = boot.se;
    r.failed_replicates = boot.failed;
  }
  return out;
}

/// Wage elasticity of labor supply from employment and earnings elasticities.
inline double labor_supply_elasticity(double emp_elast, double wage_elast) {
  if (wage_elast == 0.0) throw DomainError("earnings elasticity is zero");
  return emp_elast / wage_elast;
}

/// Standard error of a/b from independent estimates.
inline double delta_method_ratio(double a, double b, double var_a, double var_b) {
  if (b == 0.0) throw DomainError("ratio denominator is zero");
  return std::sqrt(var_a / (b * b) + a * a * var_b / (b * b * b * b));
}

/// Closure effect at an HHI per one percent effective wage increase.
inline double normalize_closure_effect(double closure_coef, double closure_interact,
                                       const ElasticityCurve& wage_curve, double hhi_value) {
  const double den = elasticity_at(wage_curve, hhi_value).eta;
  if (den == 0.0) throw DomainError("earnings elasticity is zero");
  return (closure_coef + closure_interact * hhi_value) / den;
}

}  // namespace monopsono
