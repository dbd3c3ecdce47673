// Minimum wage response of a small Cournot labor market for a few firm counts.
#include <cstdio>
#include <vector>

#include <monopsono/oligopsony.hpp>

int main() {
  using namespace monopsono;
  std::vector<double> grid;
  for (int i = 0; i <= 24; ++i) grid.push_back(0.5 * i);
  for (int j : {1, 2, 5}) {
    OligopsonyEconomy e;
    e.d = 0.2;
    e.j = j;
    const auto co = cournot_equilibrium(e);
    const auto cp = competitive_equilibrium(e);
    std::printf("J=%d  cournot w=%.3f L=%.3f  competitive w=%.3f L=%.3f  markdown=%.3f\n", j, co.wage,
                co.employment_total, cp.wage, cp.employment_total, markdown(e));
    for (const auto& p : response_curve(e, grid))
      std::printf("  wmin %5.2f  dL %+7.3f  %s\n", p.wmin, p.d_employment, std::string(to_string(p.regime)).c_str());
  }
}
