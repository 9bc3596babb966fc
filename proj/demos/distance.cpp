// Time separation in three catalog metrics, by shooting and by curve ascent.
//
//   ./demo_distance

#include "c1split/c1split.hpp"

#include <cstdio>

using namespace c1split;

static void report(const char* label, const MetricField& g, const Vec& x, const Vec& y) {
  const SeparationValue s = lorentz_distance(g, x, y);
  if (!s.related) {
    std::printf("%-22s unrelated\n", label);
    return;
  }
  std::printf("%-22s l = %.12f  shoot %.12f  ascent %.12f%s\n", label, s.value, s.shoot_value, s.ascent_value,
              s.disagreement ? "  (methods disagree)" : "");
}

int main() {
  const ChartWindow box(make_vec({-0.5, -1.5}), make_vec({2.5, 1.5}), {33, 33});
  report("minkowski (0,0)->(2,1)", minkowski(box), make_vec({0, 0}), make_vec({2, 1}));
  report("minkowski (0,0)->(1,1.2)", minkowski(box), make_vec({0, 0}), make_vec({1, 1.2}));

  const ChartWindow cosmo(make_vec({0, -1}), make_vec({1.5, 1}), {33, 33});
  report("flrw-exp comoving", flrw(cosmo, ScaleFactor::Exp), make_vec({0, 0}), make_vec({1, 0}));
  report("flrw-exp drifting", flrw(cosmo, ScaleFactor::Exp), make_vec({0, 0}), make_vec({1, 0.3}));

  const ChartWindow strip(make_vec({-0.5, -0.6}), make_vec({1.5, 0.6}), {33, 33});
  report("c1-perturbed across", c1_perturbed(strip), make_vec({0, -0.2}), make_vec({1, 0.2}));
  return 0;
}
