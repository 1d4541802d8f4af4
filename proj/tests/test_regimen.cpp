#include <doctest.h>

#include <mmopt/regimen.hpp>

#include <cmath>
#include <limits>

using namespace mmopt;

namespace {

PiecewiseConstantRegimen four_blocks() {
  PiecewiseConstantRegimen r;
  r.period = 90.0;
  r.doses = {Dose{204.93, 0.8831, 90.0}, Dose{51.2325, 3.5325, 0.0},
             Dose{0.0, 1.7663, 90.0}, Dose{153.6975, 2.6494, 0.0}};
  return r;
}

}  // namespace

TEST_CASE("dose lookup per regimen type") {
  const Regimen pw = four_blocks();
  CHECK(dose_at(pw, 0.0)[0] == 204.93);
  CHECK(dose_at(pw, 89.999)[0] == 204.93);
  CHECK(dose_at(pw, 90.0)[0] == 51.2325);  // blocks are right-continuous
  CHECK(dose_at(pw, 359.0)[0] == 153.6975);
  CHECK(dose_at(pw, 360.0)[0] == 153.6975);  // duration endpoint keeps the last block
  CHECK_THROWS_AS(dose_at(pw, -0.001), std::out_of_range);
  CHECK_THROWS_AS(dose_at(pw, 360.001), std::out_of_range);
  CHECK(regimen_duration(pw) == 360.0);

  const Regimen c = ConstantRegimen{Dose{10.0, 1.0, 5.0}};
  CHECK(dose_at(c, 0.0)[1] == 1.0);
  CHECK(dose_at(c, 1e7)[1] == 1.0);
  CHECK(regimen_duration(c) == std::numeric_limits<double>::infinity());

  SampledRegimen s;
  s.times = {0.0, 10.0, 30.0};
  s.doses = {Dose{0.0, 0.0, 0.0}, Dose{10.0, 1.0, 2.0}, Dose{10.0, 0.0, 6.0}};
  const Regimen sr = s;
  CHECK(dose_at(sr, 0.0)[0] == 0.0);
  CHECK(dose_at(sr, 10.0)[0] == 10.0);   // node values are exact
  CHECK(dose_at(sr, 5.0)[0] == 5.0);     // linear in between
  CHECK(dose_at(sr, 20.0)[1] == 0.5);
  CHECK(dose_at(sr, 30.0)[2] == 6.0);
  CHECK(regimen_duration(sr) == 30.0);
  CHECK_THROWS_AS(dose_at(sr, 30.5), std::out_of_range);
}

TEST_CASE("switch times enumerate interior block boundaries") {
  const auto ts = switch_times(Regimen(four_blocks()), 360.0);
  REQUIRE(ts.size() == 3);
  CHECK(ts[0] == 90.0);
  CHECK(ts[1] == 180.0);
  CHECK(ts[2] == 270.0);
  CHECK(switch_times(Regimen(ConstantRegimen{Dose::Zero()}), 360.0).empty());

  SampledRegimen s;
  s.times = {0.0, 10.0, 30.0};
  s.doses = {Dose::Zero(), Dose::Zero(), Dose::Zero()};
  const auto ns = switch_times(Regimen(s), 30.0);
  REQUIRE(ns.size() == 1);
  CHECK(ns[0] == 10.0);
}

TEST_CASE("dose integrals are exact closed forms") {
  const Regimen pw = four_blocks();
  // spans one block boundary: 45 days of each neighbor
  CHECK(dose_integral(pw, 45.0, 135.0)[0] == 204.93 * 45.0 + 51.2325 * 45.0);
  CHECK(dose_integral(pw, 0.0, 360.0)[1] ==
        (0.8831 + 3.5325 + 1.7663 + 2.6494) * 90.0);
  CHECK(dose_integral(pw, 100.0, 101.0)[0] == 51.2325);

  const Regimen c = ConstantRegimen{Dose{10.0, 1.0, 5.0}};
  CHECK(dose_integral(c, 3.0, 17.0)[0] == 10.0 * 14.0);

  SampledRegimen s;
  s.times = {0.0, 10.0};
  s.doses = {Dose::Zero(), Dose{10.0, 2.0, 4.0}};
  CHECK(dose_integral(Regimen(s), 0.0, 10.0)[0] == 50.0);  // triangle area
  CHECK(dose_integral(Regimen(s), 5.0, 10.0)[0] == 0.5 * (5.0 + 10.0) * 5.0);
}

TEST_CASE("nearest grid level rounds half-gaps down") {
  const DoseGrid grid;
  CHECK(nearest_level(122.958, grid.levels[0]) == 102.465);
  CHECK(nearest_level(130.0, grid.levels[0]) == 153.6975);
  CHECK(nearest_level(0.0, grid.levels[0]) == 0.0);
  CHECK(nearest_level(204.93, grid.levels[0]) == 204.93);
  CHECK(nearest_level(500.0, grid.levels[0]) == 204.93);
  // exact midpoint of {0, 51.2325} resolves to the lower level
  CHECK(nearest_level(25.61625, grid.levels[0]) == 0.0);
  CHECK(nearest_level(45.0, std::vector<double>{0.0, 90.0}) == 0.0);
}

TEST_CASE("grid enumeration is lexicographic with the first axis slowest") {
  const DoseGrid grid;
  const auto all = enumerate_grid(grid);
  REQUIRE(all.size() == 50);
  CHECK(all.front()[0] == 0.0);
  CHECK(all.front()[1] == 0.0);
  CHECK(all.front()[2] == 0.0);
  CHECK(all.back()[0] == 204.93);
  CHECK(all.back()[1] == 3.5325);
  CHECK(all.back()[2] == 90.0);
  CHECK(all[1][2] == 90.0);  // last axis varies fastest
  CHECK(all[1][1] == 0.0);

  DoseGrid small;
  small.levels = {{{0.0, 1.0}, {0.0, 2.0}, {0.0}}};
  const auto few = enumerate_grid(small);
  REQUIRE(few.size() == 4);
  CHECK(few[1][1] == 2.0);
  CHECK(few[2][0] == 1.0);

  DoseGrid bad;
  bad.levels = {{{0.0, -1.0}, {0.0}, {0.0}}};
  CHECK(!bad.validate(Dose{204.93, 3.5325, 95.0}).empty());
  DoseGrid over;
  over.levels = {{{0.0, 300.0}, {0.0}, {0.0}}};
  CHECK(!over.validate(Dose{204.93, 3.5325, 95.0}).empty());
}

TEST_CASE("piecewise approximation snaps block means to the grid") {
  const DoseGrid grid;

  SampledRegimen s;
  s.times = {0.0, 360.0};
  s.doses = {Dose{122.958, 0.0, 0.0}, Dose{122.958, 0.0, 0.0}};
  const auto approx = pc_approximate(Regimen(s), 90.0, grid);
  REQUIRE(approx.doses.size() == 4);
  for (const auto& d : approx.doses) {
    CHECK(d[0] == 102.465);
    CHECK(d[1] == 0.0);
    CHECK(d[2] == 0.0);
  }

  // a ramp averages differently per block; block means of u(t) = 204.93*t/720
  // are 204.93*(2k+1)/16, each well inside a rounding basin
  SampledRegimen ramp;
  ramp.times = {0.0, 360.0};
  ramp.doses = {Dose::Zero(), Dose{102.465, 0.0, 90.0}};
  const auto ra = pc_approximate(Regimen(ramp), 90.0, grid);
  CHECK(ra.doses[0][0] == 0.0);
  CHECK(ra.doses[1][0] == 51.2325);
  CHECK(ra.doses[2][0] == 51.2325);
  CHECK(ra.doses[3][0] == 102.465);
  CHECK(ra.doses[3][2] == 90.0);  // mean 78.75 of the third-drug ramp rounds up to 90
}

TEST_CASE("grid-valued block regimens are fixed points of the approximation") {
  const DoseGrid grid;
  PiecewiseConstantRegimen r;
  r.period = 90.0;
  r.doses = {Dose{0.0, 0.8831, 90.0}, Dose{51.2325, 3.5325, 0.0},
             Dose{204.93, 0.0, 90.0}, Dose{153.6975, 1.7663, 0.0}};
  const auto back = pc_approximate(Regimen(r), 90.0, grid);
  REQUIRE(back.doses.size() == 4);
  CHECK(back.period == r.period);
  for (size_t k = 0; k < 4; ++k)
    for (int i = 0; i < 3; ++i) CHECK(back.doses[k][i] == r.doses[k][i]);
}

TEST_CASE("approximation rejects ill-posed requests") {
  const DoseGrid grid;
  // a constant regimen has no finite duration to tile
  CHECK_THROWS_AS(pc_approximate(Regimen(ConstantRegimen{Dose::Zero()}), 90.0, grid),
                  std::invalid_argument);

  SampledRegimen odd;
  odd.times = {0.0, 361.0};
  odd.doses = {Dose::Zero(), Dose::Zero()};
  CHECK_THROWS_AS(pc_approximate(Regimen(odd), 90.0, grid), std::invalid_argument);

  SampledRegimen s;
  s.times = {0.0, 360.0};
  s.doses = {Dose::Zero(), Dose::Zero()};
  DoseGrid empty;
  empty.levels = {{{}, {0.0}, {0.0}}};
  CHECK_THROWS_AS(pc_approximate(Regimen(s), 90.0, empty), std::invalid_argument);
}
