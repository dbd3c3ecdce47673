#pragma once

// Symmetric Cournot oligopsony with linear market labor supply w = a + b*L
// and linear per-firm marginal revenue product c - d*l. J = 1 is the
// textbook monopsony; the wage-taking benchmark is the competitive outcome.

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "csv.hpp"
#include "errors.hpp"

namespace monopsono {

struct OligopsonyEconomy {
  double a = 0.0;  // supply intercept
  double b = 1.0;  // supply slope
  double c = 10.0; // MRPL intercept
  double d = 0.0;  // per-firm MRPL slope
  int j = 1;       // number of symmetric firms

  void validate() const {
    if (!(b > 0.0)) throw DomainError("labor supply slope b must be positive");
    if (!(c >= a)) throw DomainError("MRPL intercept c must not fall below supply intercept a");
    if (!(d >= 0.0)) throw DomainError("MRPL slope d must be non-negative");
    if (j < 1) throw DomainError("firm count must be at least 1");
  }

  double supply_wage(double total_employment) const { return a + b * total_employment; }
  double mrpl(double per_firm_employment) const { return c - d * per_firm_employment; }
};

enum class Regime { free, unconstrained, supply_determined, demand_determined };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::free: return "free";
    case Regime::unconstrained: return "unconstrained";
    case Regime::supply_determined: return "supply_determined";
    case Regime::demand_determined: return "demand_determined";
  }
  return "free";
}

struct EquilibriumPoint {
  double wage = 0.0;
  double employment_total = 0.0;
  double employment_per_firm = 0.0;
  Regime regime = Regime::free;
};

/// Each firm equates its MRPL with its marginal cost of labor
/// a + b*J*l + b*l, so l = (c - a) / (d + b(J + 1)).
inline EquilibriumPoint cournot_equilibrium(const OligopsonyEconomy& e) {
  e.validate();
  const double l = (e.c - e.a) / (e.d + e.b * (e.j + 1));
  const double L = e.j * l;
  return {e.supply_wage(L), L, l, Regime::free};
}

/// Wage-taking firms hire until MRPL equals the market supply wage.
inline EquilibriumPoint competitive_equilibrium(const OligopsonyEconomy& e) {
  e.validate();
  const double l = (e.c - e.a) / (e.d + e.b * e.j);
  const double L = e.j * l;
  return {e.supply_wage(L), L, l, Regime::free};
}

/// Outcome under a binding-or-not minimum wage. Below or at the Cournot wage
/// nothing changes; up to the competitive wage employment follows market
/// supply; above it employment follows wage-taking demand J*(c - wmin)/d.
inline EquilibriumPoint minwage_response(const OligopsonyEconomy& e, double wmin) {
  if (!(wmin >= 0.0)) throw DomainError("minimum wage must be non-negative");
  const auto free = cournot_equilibrium(e);
  const auto comp = competitive_equilibrium(e);
  if (wmin <= free.wage) {
    auto p = free;
    p.regime = Regime::unconstrained;
    return p;
  }
  EquilibriumPoint p;
  p.wage = wmin;
  if (wmin <= comp.wage) {
    p.employment_total = (wmin - e.a) / e.b;
    p.regime = Regime::supply_determined;
  } else {
    p.employment_total = e.d > 0.0 ? std::max(0.0, e.j * (e.c - wmin) / e.d) : 0.0;
    p.regime = Regime::demand_determined;
  }
  p.employment_per_firm = p.employment_total / e.j;
  return p;
}

struct ResponsePoint {
  double wmin = 0.0;
  double d_wage = 0.0;
  double d_employment = 0.0;
  double d_employment_per_firm = 0.0;
  Regime regime = Regime::unconstrained;
};

/// Deviations from the free-market Cournot outcome along a sorted grid.
inline std::vector<ResponsePoint> response_curve(const OligopsonyEconomy& e,
                                                 const std::vector<double>& grid) {
  if (!std::is_sorted(grid.begin(), grid.end())) throw DomainError("minimum wage grid must be sorted");
  const auto free = cournot_equilibrium(e);
  std::vector<ResponsePoint> out;
  out.reserve(grid.size());
  for (double w : grid) {
    const auto p = minwage_response(e, w);
    out.push_back({w, p.wage - free.wage, p.employment_total - free.employment_total,
                   p.employment_per_firm - free.employment_per_firm, p.regime});
  }
  return out;
}

/// Elasticity of market labor supply at a point, w / (b L).
inline double supply_elasticity(const OligopsonyEconomy& e, const EquilibriumPoint& p) {
  return p.wage / (e.b * p.employment_total);
}

/// (MRPL - w) / w at the Cournot equilibrium. Equals 1/mu for a monopsony and
/// 1/(J mu) in general, the firm's residual supply elasticity being J mu.
inline double markdown(const OligopsonyEconomy& e) {
  const auto p = cournot_equilibrium(e);
  return (e.mrpl(p.employment_per_firm) - p.wage) / p.wage;
}

inline std::string response_curve_csv(
    const std::vector<std::pair<OligopsonyEconomy, std::vector<ResponsePoint>>>& curves) {
  csv::Writer w({"j", "wmin", "d_wage", "d_employment", "regime"});
  for (const auto& [econ, pts] : curves)
    for (const auto& p : pts)
      w.row({std::to_string(econ.j), csv::fmt(p.wmin), csv::fmt(p.d_wage), csv::fmt(p.d_employment),
             std::string(to_string(p.regime))});
  return w.str();
}

}  // namespace monopsono
