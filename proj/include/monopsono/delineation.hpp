#pragma once

// Commuting-zone delineation: districts are joined along dominant commuting
// flows, and the flow threshold is chosen to maximize directed modularity.

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "csv.hpp"
#include "errors.hpp"

namespace monopsono {

/// flows[i][j] = commuters living in region i and working in region j.
class FlowMatrix {
 public:
  FlowMatrix(std::vector<std::string> regions, std::vector<std::vector<double>> flows)
      : regions_(std::move(regions)), flows_(std::move(flows)) {
    const std::size_t n = regions_.size();
    if (flows_.size() != n) throw DomainError("flow matrix dimension mismatch");
    row_sums_.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (flows_[i].size() != n) throw DomainError("flow matrix is not square");
      for (double f : flows_[i]) {
        if (!(f >= 0.0)) throw DomainError("negative commuting flow");
        row_sums_[i] += f;
      }
      if (!(row_sums_[i] > 0.0))
        throw DomainError("region '" + regions_[i] + "' has no resident workers");
    }
  }

  std::size_t size() const { return regions_.size(); }
  const std::vector<std::string>& regions() const { return regions_; }
  double operator()(std::size_t i, std::size_t j) const { return flows_[i][j]; }
  double row_sum(std::size_t i) const { return row_sums_[i]; }

  double total() const { return std::accumulate(row_sums_.begin(), row_sums_.end(), 0.0); }

 private:
  std::vector<std::string> regions_;
  std::vector<std::vector<double>> flows_;
  std::vector<double> row_sums_;
};

/// Builds a matrix from origin,destination,commuters rows; duplicate pairs are
/// summed (pooled years) and regions are sorted by code.
inline FlowMatrix parse_flows(const csv::Table& t) {
  const auto co = t.require("origin"), cd = t.require("destination"),
             cc = t.require("commuters");
  std::map<std::string, std::size_t> index;
  for (const auto& row : t.rows) {
    index.emplace(row[co], 0);
    index.emplace(row[cd], 0);
  }
  std::vector<std::string> regions;
  for (auto& [code, i] : index) {
    i = regions.size();
    regions.push_back(code);
  }
  std::vector<std::vector<double>> flows(regions.size(), std::vector<double>(regions.size(), 0.0));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    flows[index[t.rows[r][co]]][index[t.rows[r][cd]]] += csv::field_double(t, r, cc);
  }
  return FlowMatrix(std::move(regions), std::move(flows));
}

struct Link {
  std::size_t from = 0;
  std::size_t to = 0;
  bool operator==(const Link&) const = default;
};

/// A region links to its single largest out-commuting destination when that
/// flow's share of the region's residents reaches tau. Ties in the argmax go
/// to the lower region index.
inline std::vector<Link> dominant_flow_links(const FlowMatrix& fm, double tau) {
  std::vector<Link> links;
  for (std::size_t i = 0; i < fm.size(); ++i) {
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < fm.size(); ++k) {
      if (k == i) continue;
      if (!best || fm(i, k) > fm(i, *best)) best = k;
    }
    if (!best || fm(i, *best) <= 0.0) continue;
    if (fm(i, *best) / fm.row_sum(i) >= tau) links.push_back({i, *best});
  }
  return links;
}

struct Partition {
  std::vector<int> assignment;  // region index -> zone id
  int zone_count = 0;
};

/// Weakly connected components of the link graph. Zone ids are dense and
/// numbered in order of each zone's first region.
inline Partition merge_zones(std::size_t region_count, const std::vector<Link>& links) {
  std::vector<std::size_t> parent(region_count);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (const auto& l : links) {
    if (l.from >= region_count || l.to >= region_count) throw DomainError("link outside region set");
    const auto a = find(l.from), b = find(l.to);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  Partition p;
  p.assignment.assign(region_count, -1);
  std::map<std::size_t, int> ids;
  for (std::size_t i = 0; i < region_count; ++i) {
    auto [it, fresh] = ids.emplace(find(i), p.zone_count);
    if (fresh) ++p.zone_count;
    p.assignment[i] = it->second;
  }
  return p;
}

/// Directed weighted modularity with self-flows included in the total weight:
/// Q = sum_c [ A_cc / m - out_c * in_c / m^2 ].
inline double modularity(const FlowMatrix& fm, const Partition& p) {
  if (p.assignment.size() != fm.size()) throw DomainError("partition does not cover the regions");
  const double m = fm.total();
  if (!(m > 0.0)) throw DomainError("total flow is zero");
  const auto zones = static_cast<std::size_t>(p.zone_count);
  std::vector<double> within(zones, 0.0), out(zones, 0.0), in(zones, 0.0);
  for (std::size_t i = 0; i < fm.size(); ++i) {
    const auto ci = static_cast<std::size_t>(p.assignment[i]);
    for (std::size_t j = 0; j < fm.size(); ++j) {
      const double a = fm(i, j);
      if (a == 0.0) continue;
      const auto cj = static_cast<std::size_t>(p.assignment[j]);
      out[ci] += a;
      in[cj] += a;
      if (ci == cj) within[ci] += a;
    }
  }
  double q = 0.0;
  for (std::size_t c = 0; c < zones; ++c) q += within[c] / m - (out[c] / m) * (in[c] / m);
  return q;
}

/// Commuting flow between different zones over all commuting (off-diagonal) flow.
inline double cross_zone_share(const FlowMatrix& fm, const Partition& p) {
  double commuting = 0.0, cross = 0.0;
  for (std::size_t i = 0; i < fm.size(); ++i)
    for (std::size_t j = 0; j < fm.size(); ++j) {
      if (i == j) continue;
      commuting += fm(i, j);
      if (p.assignment[i] != p.assignment[j]) cross += fm(i, j);
    }
  return commuting > 0.0 ? cross / commuting : 0.0;
}

struct SweepPoint {
  double tau = 0.0;
  double q = 0.0;
  int zone_count = 0;
  double cross_zone_share = 0.0;
};

struct SweepResult {
  double tau_star = 0.0;
  Partition partition;
  double q_star = 0.0;
  double cross_zone_share = 0.0;
  double q_initial = 0.0;               // every district its own zone
  double cross_zone_share_initial = 0.0;
  std::vector<SweepPoint> points;       // in grid order
};

/// Evaluates every tau and keeps the modularity maximizer; ties go to the
/// larger tau.
inline SweepResult sweep_thresholds(const FlowMatrix& fm, const std::vector<double>& grid) {
  if (grid.empty()) throw DomainError("threshold grid is empty");
  SweepResult res;
  const Partition singletons = merge_zones(fm.size(), {});
  res.q_initial = modularity(fm, singletons);
  res.cross_zone_share_initial = cross_zone_share(fm, singletons);
  bool have = false;
  for (double tau : grid) {
    Partition p = merge_zones(fm.size(), dominant_flow_links(fm, tau));
    const double q = modularity(fm, p);
    const double cz = cross_zone_share(fm, p);
    res.points.push_back({tau, q, p.zone_count, cz});
    if (!have || q > res.q_star || (q == res.q_star && tau > res.tau_star)) {
      res.tau_star = tau;
      res.q_star = q;
      res.cross_zone_share = cz;
      res.partition = std::move(p);
      have = true;
    }
  }
  return res;
}

/// District -> zone label, with zones named by their lowest district code.
inline std::map<std::string, std::string> zone_labels(const FlowMatrix& fm, const Partition& p) {
  std::vector<std::string> label(static_cast<std::size_t>(p.zone_count));
  for (std::size_t i = 0; i < fm.size(); ++i) {
    auto& l = label[static_cast<std::size_t>(p.assignment[i])];
    if (l.empty() || fm.regions()[i] < l) l = fm.regions()[i];
  }
  std::map<std::string, std::string> out;
  for (std::size_t i = 0; i < fm.size(); ++i)
    out[fm.regions()[i]] = "cz" + label[static_cast<std::size_t>(p.assignment[i])];
  return out;
}

}  // namespace monopsono
