#pragma once

#include <compare>
#include <map>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace monopsono {

enum class ObjectKind { employment, hires };

inline std::string_view to_string(ObjectKind k) {
  return k == ObjectKind::employment ? "employment" : "hires";
}

inline ObjectKind parse_object_kind(std::string_view s) {
  if (s == "employment") return ObjectKind::employment;
  if (s == "hires") return ObjectKind::hires;
  throw ParseError("unknown object kind '" + std::string(s) + "'");
}

// One labor-market x year cell: truncated industry code, zone, year.
struct MarketKey {
  std::string industry;
  std::string zone;
  int year = 0;

  auto operator<=>(const MarketKey&) const = default;
  bool operator==(const MarketKey&) const = default;

  // The market without its year, used for clustering.
  std::string market_id() const { return industry + "|" + zone; }
};

struct MarketKeyHash {
  std::size_t operator()(const MarketKey& k) const {
    const std::hash<std::string> h;
    return (h(k.industry) * 1000003u ^ h(k.zone)) * 1000003u ^ static_cast<std::size_t>(k.year);
  }
};

struct FirmShare {
  std::string estab_id;
  double share = 0.0;
  long long count = 0;
};

struct MarketCell {
  std::vector<FirmShare> firms;  // sorted by estab_id
  long long total = 0;

  std::size_t firm_count() const { return firms.size(); }

  std::vector<double> shares() const {
    std::vector<double> s;
    s.reserve(firms.size());
    for (const auto& f : firms) s.push_back(f.share);
    return s;
  }
};

struct MarketPanel {
  ObjectKind object_kind = ObjectKind::employment;
  int industry_digits = 4;
  std::map<MarketKey, MarketCell> cells;
  // Years skipped for hires because no predecessor year exists in the data.
  std::vector<int> omitted_years;
};

}  // namespace monopsono
