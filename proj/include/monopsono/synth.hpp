#pragma once

// Synthetic worker-level snapshots for testing the estimation pipeline.
//
// Markets are industry x zone. Each market-year draws a firm count from
// industry, zone, market, industry-year and idiosyncratic entry shocks; firms
// hire heads in proportion to the Cournot per-firm employment for that count,
// scaled by a persistent firm size. Log daily wages are linear in the realized
// log HHI (elasticity theta) plus firm, zone-year and local-shock terms. The
// local shock also enlarges the market's first firm, which makes HHI
// endogenous, while firm counts elsewhere in the industry stay a valid
// instrument. Firm counts never respond to the local shock, so which firms
// are active is unrelated to the wage error. Regulated sectors get
// minimum-wage schedules with planted wage and employment elasticities that
// are linear in concentration.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iterator>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "csv.hpp"
#include "data_model.hpp"
#include "delineation.hpp"
#include "errors.hpp"
#include "oligopsony.hpp"
#include "random.hpp"

namespace monopsono {

struct SynthConfig {
  int n_industries = 40;
  int n_zones = 50;
  int n_years = 10;
  int start_year = 2011;
  std::uint64_t seed = 1;

  double theta = -0.05;   // wage elasticity with respect to HHI
  double lambda = 0.30;   // local shock loading in wages
  OligopsonyEconomy economy{};  // shapes heads per firm through Cournot employment
  double j_base = 5.0;
  int j_max = 30;
  double heads_at_base = 4.0;
  double daily_wage_base = 70.0;

  double sigma_industry = 0.30;
  double sigma_zone = 0.20;
  double sigma_market = 0.30;
  double sigma_industry_year = 0.25;
  double sigma_entry = 0.15;
  double sigma_local = 0.25;
  double local_size_loading = 1.0;  // local shock effect on the first firm's log size
  double sigma_zone_year = 0.05;
  double sigma_firm_size = 0.50;
  double sigma_heads = 0.20;
  double sigma_firm_wage = 0.15;
  double sigma_firm_year_wage = 0.10;
  double sigma_worker_wage = 0.02;

  bool minwage_on = true;
  int n_sectors = 8;
  int n_regulated = 3;
  double alpha_w = 0.074, beta_w = 0.260;
  double alpha_l = -0.230, beta_l = 1.160;

  int threads = 1;

  /// Drops entry, local, head and wage noise; industry-year
  /// shocks remain so concentration still varies.
  SynthConfig& without_noise() {
    sigma_entry = sigma_local = sigma_heads = sigma_firm_year_wage = sigma_worker_wage = 0.0;
    return *this;
  }

  void validate() const {
    if (n_industries < 1 || n_zones < 2 || n_years < 1) throw DomainError("synth dimensions must be positive");
    if (n_zones > 16 * 500) throw DomainError("too many zones for district codes");
    if (n_industries > 9000) throw DomainError("too many industries for 4-digit codes");
    if (j_max < 1 || !(j_base >= 1.0)) throw DomainError("firm counts must be at least 1");
    if (n_regulated > n_sectors || n_sectors < 1) throw DomainError("regulated sectors exceed sector count");
    economy.validate();
  }
};

struct SynthOutput {
  std::vector<SnapshotRecord> records;
  SectorMap sectors;
  MinWageSchedule minwage;
  Controls controls;
  std::vector<std::string> districts;
  std::vector<std::vector<double>> flows;  // districts x districts
  Delineation delineation;
  std::vector<std::pair<std::string, std::string>> truth;  // key, value

  FlowMatrix flow_matrix() const { return FlowMatrix(districts, flows); }
};

namespace detail {

inline std::string synth_industry(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d", 1000 + i);
  return buf;
}

inline std::string synth_district(int zone, int k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d%03d", zone % 16 + 1, (zone / 16) * 2 + k);
  return buf;
}

inline std::string synth_sector(int s) { return "S" + std::to_string(s); }

struct SynthShocks {
  std::vector<double> industry, zone;
  std::vector<std::vector<double>> industry_year, zone_year;
  // sector -> territory(west, east) -> year -> hourly minimum wage (0 = none)
  std::vector<std::array<std::vector<double>, 2>> minwage;
};

inline SynthShocks draw_shocks(const SynthConfig& c) {
  SynthShocks s;
  std::mt19937_64 rng(derived_seed(c.seed, 0xC0FFEEull));
  std::normal_distribution<double> n01(0.0, 1.0);
  for (int i = 0; i < c.n_industries; ++i) s.industry.push_back(c.sigma_industry * n01(rng));
  for (int z = 0; z < c.n_zones; ++z) s.zone.push_back(c.sigma_zone * n01(rng));
  s.industry_year.assign(static_cast<std::size_t>(c.n_industries), std::vector<double>(static_cast<std::size_t>(c.n_years)));
  for (auto& v : s.industry_year)
    for (auto& x : v) x = c.sigma_industry_year * n01(rng);
  s.zone_year.assign(static_cast<std::size_t>(c.n_zones), std::vector<double>(static_cast<std::size_t>(c.n_years)));
  for (auto& v : s.zone_year)
    for (auto& x : v) x = c.sigma_zone_year * n01(rng);
  std::uniform_real_distribution<double> step(0.0, 0.06);
  s.minwage.resize(static_cast<std::size_t>(c.n_sectors));
  for (int sec = 0; sec < c.n_sectors; ++sec) {
    for (int terr = 0; terr < 2; ++terr) {
      auto& path = s.minwage[static_cast<std::size_t>(sec)][static_cast<std::size_t>(terr)];
      path.assign(static_cast<std::size_t>(c.n_years), 0.0);
      if (!c.minwage_on || sec >= c.n_regulated) continue;
      const int intro = std::min(c.n_years - 1, 3 + sec % 3);
      double level = (9.0 + 0.5 * sec) * (terr == 0 ? 1.0 : 0.85);
      for (int t = intro; t < c.n_years; ++t) {
        if (t > intro) level *= std::exp(step(rng));
        path[static_cast<std::size_t>(t)] = std::round(level * 100.0) / 100.0;
      }
    }
  }
  return s;
}

inline int wage_territory_index(const std::string& district) {
  return territory_of_district(district) == Territory::east ? 1 : 0;  // berlin joins west
}

struct SynthMarket {
  std::vector<SnapshotRecord> records;  // (year, firm, worker) order
  std::vector<std::pair<std::string, double>> premia;  // estab -> log wage premium
};

inline SynthMarket synth_market(const SynthConfig& c, const SynthShocks& s, int ind,
                                                int zone) {
  const int market = ind * c.n_zones + zone;
  std::mt19937_64 rng(derived_seed(c.seed, static_cast<std::uint64_t>(market) + 1));
  std::normal_distribution<double> n01(0.0, 1.0);
  const auto ui = static_cast<std::size_t>(ind), uz = static_cast<std::size_t>(zone);
  const double market_effect = c.sigma_market * n01(rng);
  const int slots = c.j_max;
  std::vector<double> size(static_cast<std::size_t>(slots)), premium(static_cast<std::size_t>(slots));
  for (int k = 0; k < slots; ++k) {
    size[static_cast<std::size_t>(k)] = c.sigma_firm_size * n01(rng);
    premium[static_cast<std::size_t>(k)] = c.sigma_firm_wage * n01(rng);
  }
  const int sector = ind % c.n_sectors;
  const std::string industry4 = synth_industry(ind);
  const std::string districts[2] = {synth_district(zone, 0), synth_district(zone, 1)};

  const auto per_firm = [&](double j) {
    OligopsonyEconomy e = c.economy;
    e.j = std::max(1, static_cast<int>(j));
    return cournot_equilibrium(e).employment_per_firm;
  };
  const double l_base = per_firm(std::round(c.j_base));

  const auto T = static_cast<std::size_t>(c.n_years);
  std::vector<std::vector<long long>> heads(T, std::vector<long long>(static_cast<std::size_t>(slots), 0));
  std::vector<double> local(T), log_hhi(T);
  std::vector<double> mw_rel(static_cast<std::size_t>(slots * c.n_years), 0.0);  // ln(mw_t / mw_intro) per firm-year
  std::vector<char> mw_in_force(static_cast<std::size_t>(slots * c.n_years), 0);

  for (std::size_t t = 0; t < T; ++t) {
    local[t] = c.sigma_local * n01(rng);
    const double log_j = std::log(c.j_base) + s.industry[ui] + s.zone[uz] + market_effect +
                         s.industry_year[ui][t] + c.sigma_entry * n01(rng);
    const int j = std::clamp(static_cast<int>(std::lround(std::exp(log_j))), 1, c.j_max);
    const double base = c.heads_at_base * per_firm(j) / l_base;
    long long total = 0;
    for (int k = 0; k < slots; ++k) {
      const double noise = c.sigma_heads * n01(rng);  // drawn for every slot to keep streams aligned
      if (k >= j) continue;
      double n = base * std::exp(size[static_cast<std::size_t>(k)] + noise +
                                 (k == 0 ? c.local_size_loading * local[t] : 0.0));
      const auto& path = s.minwage[static_cast<std::size_t>(sector)]
                                  [static_cast<std::size_t>(wage_territory_index(districts[k % 2]))];
      if (path[t] > 0.0) {
        const double intro = *std::find_if(path.begin(), path.end(), [](double v) { return v > 0.0; });
        const double rel = std::log(path[t] / intro);
        mw_rel[static_cast<std::size_t>(k * c.n_years) + t] = rel;
        mw_in_force[static_cast<std::size_t>(k * c.n_years) + t] = 1;
        n *= std::exp((c.alpha_l + c.beta_l / j) * rel);
      }
      const long long h = std::max(1LL, std::llround(n));
      heads[t][static_cast<std::size_t>(k)] = h;
      total += h;
    }
    double hh = 0.0;
    for (int k = 0; k < slots; ++k) {
      const double sh = static_cast<double>(heads[t][static_cast<std::size_t>(k)]) / static_cast<double>(total);
      hh += sh * sh;
    }
    log_hhi[t] = std::log(hh);
  }

  // Average HHI over each firm's active years, as the establishment panel computes it.
  std::vector<double> hhi_avg(static_cast<std::size_t>(slots), 0.0);
  for (int k = 0; k < slots; ++k) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t t = 0; t < T; ++t)
      if (heads[t][static_cast<std::size_t>(k)] > 0) {
        sum += std::exp(log_hhi[t]);
        ++n;
      }
    if (n) hhi_avg[static_cast<std::size_t>(k)] = sum / n;
  }

  SynthMarket out;
  char buf[48];
  for (int k = 0; k < slots; ++k) {
    bool active = false;
    for (std::size_t t = 0; t < T; ++t) active = active || heads[t][static_cast<std::size_t>(k)] > 0;
    if (!active) continue;
    std::snprintf(buf, sizeof buf, "E%05d%02d", market, k);
    out.premia.emplace_back(buf, premium[static_cast<std::size_t>(k)]);
  }
  for (std::size_t t = 0; t < T; ++t) {
    for (int k = 0; k < slots; ++k) {
      const long long h = heads[t][static_cast<std::size_t>(k)];
      if (h == 0) continue;
      const auto uk = static_cast<std::size_t>(k);
      double log_w = std::log(c.daily_wage_base) + premium[uk] + c.theta * log_hhi[t] +
                     s.zone_year[uz][t] + c.lambda * local[t] + c.sigma_firm_year_wage * n01(rng);
      if (mw_in_force[uk * T + t])
        log_w += (c.alpha_w + c.beta_w * hhi_avg[uk]) * mw_rel[uk * T + t];
      std::snprintf(buf, sizeof buf, "E%05d%02d", market, k);
      const std::string estab = buf;
      const std::string industry = industry4 + std::to_string(k % 3);
      for (long long w = 0; w < h; ++w) {
        std::snprintf(buf, sizeof buf, "W%05d%02d%04lld", market, k, w);
        const double wage = std::exp(log_w + c.sigma_worker_wage * n01(rng));
        out.records.push_back({buf, estab, industry, districts[k % 2], c.start_year + static_cast<int>(t),
                       wage, Contract::regular_ft});
      }
    }
  }
  return out;
}

}  // namespace detail

inline SynthOutput synth_panel(const SynthConfig& c) {
  c.validate();
  const auto shocks = detail::draw_shocks(c);
  SynthOutput out;

  const int markets = c.n_industries * c.n_zones;
  std::vector<detail::SynthMarket> parts(static_cast<std::size_t>(markets));
  auto work = [&](int begin, int end) {
    for (int m = begin; m < end; ++m)
      parts[static_cast<std::size_t>(m)] = detail::synth_market(c, shocks, m / c.n_zones, m % c.n_zones);
  };
  const int threads = std::clamp(c.threads, 1, markets);
  if (threads == 1) {
    work(0, markets);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work, markets * t / threads, markets * (t + 1) / threads);
    for (auto& th : pool) th.join();
  }
  std::size_t total = 0;
  for (const auto& p : parts) total += p.records.size();
  out.records.reserve(total);
  for (auto& p : parts) {
    std::move(p.records.begin(), p.records.end(), std::back_inserter(out.records));
    for (const auto& [e, v] : p.premia) out.controls.akm_premium[e] = v;
    p = {};
  }

  // Geography: two districts per zone, strongly linked to each other.
  for (int z = 0; z < c.n_zones; ++z)
    for (int k = 0; k < 2; ++k) out.districts.push_back(detail::synth_district(z, k));
  std::sort(out.districts.begin(), out.districts.end());
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < out.districts.size(); ++i) pos[out.districts[i]] = i;
  const std::size_t nd = out.districts.size();
  out.flows.assign(nd, std::vector<double>(nd, 0.0));
  std::mt19937_64 geo(derived_seed(c.seed, 0xF10Dull));
  std::uniform_int_distribution<std::size_t> pick(0, nd - 1);
  std::uniform_int_distribution<int> small(1, 20);
  for (int z = 0; z < c.n_zones; ++z) {
    const auto a = pos[detail::synth_district(z, 0)], b = pos[detail::synth_district(z, 1)];
    out.flows[a][a] = out.flows[b][b] = 1000.0;
    out.flows[a][b] = out.flows[b][a] = 150.0;
    out.delineation[out.districts[a]] = "cz" + out.districts[a];
    out.delineation[out.districts[b]] = "cz" + out.districts[a];
    for (auto d : {a, b}) {
      const auto other = pick(geo);
      if (other != a && other != b) out.flows[d][other] += small(geo);
    }
  }

  // Sectors and minimum wages.
  for (int i = 0; i < c.n_industries; ++i)
    out.sectors.emplace_back(detail::synth_industry(i), detail::synth_sector(i % c.n_sectors));
  std::vector<MinWageSpell> spells;
  for (int s = 0; s < c.n_sectors; ++s)
    for (int terr = 0; terr < 2; ++terr)
      for (int t = 0; t < c.n_years; ++t) {
        const double v = shocks.minwage[static_cast<std::size_t>(s)][static_cast<std::size_t>(terr)][static_cast<std::size_t>(t)];
        if (v <= 0.0) continue;
        const std::string y = std::to_string(c.start_year + t);
        spells.push_back({detail::synth_sector(s), terr == 0 ? Territory::west : Territory::east,
                          y + "-01-01", y + "-12-31", v});
      }
  out.minwage = MinWageSchedule(std::move(spells));

  // Controls: sector-territory-year aggregates and firm wage premia.
  std::mt19937_64 ctl(derived_seed(c.seed, 0xC7A1ull));
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> cba(0.3, 0.6);
  for (int s = 0; s < c.n_sectors; ++s)
    for (Territory terr : {Territory::west, Territory::east})
      for (int t = 0; t < c.n_years; ++t)
        out.controls.sector[{detail::synth_sector(s), terr, c.start_year + t}] = {10.0 + 0.1 * n01(ctl), cba(ctl)};

  auto num = [](double v) { return csv::fmt(v); };
  out.truth = {{"theta", num(c.theta)},
               {"lambda", num(c.lambda)},
               {"alpha_w", num(c.alpha_w)},
               {"beta_w", num(c.beta_w)},
               {"alpha_l", num(c.alpha_l)},
               {"beta_l", num(c.beta_l)},
               {"seed", std::to_string(c.seed)},
               {"n_industries", std::to_string(c.n_industries)},
               {"n_zones", std::to_string(c.n_zones)},
               {"n_years", std::to_string(c.n_years)},
               {"start_year", std::to_string(c.start_year)},
               {"minwage_on", c.minwage_on ? "true" : "false"},
               {"records", std::to_string(out.records.size())}};
  return out;
}

inline std::string sectors_csv(const SectorMap& m) {
  csv::Writer w({"industry_prefix", "sector"});
  for (const auto& [p, s] : m) w.row({p, s});
  return w.str();
}

inline std::string minwage_csv(const MinWageSchedule& s) {
  csv::Writer w({"sector", "territory", "valid_from", "valid_to", "hourly_wage"});
  for (const auto& sp : s.spells())
    w.row({sp.sector, std::string(to_string(sp.territory)), sp.valid_from, sp.valid_to, csv::fmt(sp.hourly_wage)});
  return w.str();
}

inline std::string controls_csv(const Controls& c) {
  csv::Writer w({"sector", "territory", "year", "log_employment", "cba_share", "estab_id", "akm_premium"});
  for (const auto& [k, v] : c.sector)
    w.row({std::get<0>(k), std::string(to_string(std::get<1>(k))), std::to_string(std::get<2>(k)),
           csv::fmt(v.log_employment), csv::fmt(v.cba_share), "", ""});
  for (const auto& [e, p] : c.akm_premium) w.row({"", "", "", "", "", e, csv::fmt(p)});
  return w.str();
}

inline std::string flows_csv(const std::vector<std::string>& districts,
                             const std::vector<std::vector<double>>& flows) {
  csv::Writer w({"origin", "destination", "commuters"});
  for (std::size_t i = 0; i < districts.size(); ++i)
    for (std::size_t j = 0; j < districts.size(); ++j)
      if (flows[i][j] > 0.0) w.row({districts[i], districts[j], csv::fmt(flows[i][j])});
  return w.str();
}

inline std::string delineation_csv(const Delineation& d) {
  csv::Writer w({"district", "zone"});
  for (const auto& [k, v] : d) w.row({k, v});
  return w.str();
}

inline std::string truth_csv(const std::vector<std::pair<std::string, std::string>>& truth) {
  csv::Writer w({"key", "value"});
  for (const auto& [k, v] : truth) w.row({k, v});
  return w.str();
}

}  // namespace monopsono
