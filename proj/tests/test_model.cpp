#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "switchlq/model.hpp"
#include "test_instances.hpp"

using namespace switchlq;
using switchlq::testing::make_process;
using switchlq::testing::make_twostate;

namespace {

model::InhomogeneityProcess ramp_process() {
  // One regime, dim 1, support [0, 2], samples 2 -> 4 -> 0 at {0.5, 1, 2}.
  Mat table(1, 3);
  table << 2.0, 4.0, 0.0;
  return make_process(2.0, {0.5, 1.0, 2.0}, {table});
}

}  // namespace

TEST_CASE("inhomogeneity sampling: clamping, interpolation, compact support") {
  const model::InhomogeneityProcess p = ramp_process();
  CHECK(p.dim() == 1);
  CHECK(!p.is_zero());
  CHECK(p.g_at(0.2, 0)(0) == 2.0);    // clamped before the first breakpoint
  CHECK(p.g_at(0.5, 0)(0) == 2.0);
  CHECK(p.g_at(0.75, 0)(0) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(p.g_at(1.5, 0)(0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(p.g_at(2.0, 0)(0) == 0.0);
  CHECK(p.g_at(2.0 + 1e-9, 0)(0) == 0.0);  // hard zero past the support end
  CHECK(p.h_at(0.75, 0)(0) == 0.0);

  // Clamp between the last breakpoint and a later support end.
  Mat flat(1, 2);
  flat << 1.0, 1.0;
  const model::InhomogeneityProcess q = make_process(3.0, {0.0, 1.0}, {flat});
  CHECK(q.g_at(2.5, 0)(0) == 1.0);
  CHECK(q.g_at(3.0, 0)(0) == 1.0);
  CHECK(q.g_at(3.0 + 1e-9, 0)(0) == 0.0);

  // Allocation-free sampling agrees with the allocating variant.
  Vec out(1);
  for (double t : {0.0, 0.3, 0.75, 1.2, 1.999, 2.0, 2.5}) {
    p.g_at(t, 0, out);
    CHECK(out(0) == p.g_at(t, 0)(0));
    p.h_at(t, 0, out);
    CHECK(out(0) == p.h_at(t, 0)(0));
  }

  const model::InhomogeneityProcess z = model::InhomogeneityProcess::zero(3, 2);
  CHECK(z.is_zero());
  CHECK(z.g_at(0.5, 1).size() == 3);
  CHECK(z.g_at(0.5, 1).norm() == 0.0);
}

TEST_CASE("component projection keeps one part and is idempotent") {
  Mat g(1, 2), h(1, 2);
  g << 1.0, 2.0;
  h << -3.0, 0.5;
  const model::InhomogeneityProcess p = make_process(1.0, {0.0, 1.0}, {g}, {h});

  const model::InhomogeneityProcess p1 = model::project(1, p);
  CHECK(p1.g_at(0.4, 0)(0) == 0.0);
  CHECK(p1.h_at(0.4, 0)(0) == p.h_at(0.4, 0)(0));

  const model::InhomogeneityProcess p2 = model::project(2, p);
  CHECK(p2.g_at(0.4, 0)(0) == p.g_at(0.4, 0)(0));
  CHECK(p2.h_at(0.4, 0)(0) == 0.0);

  const model::InhomogeneityProcess p11 = model::project(1, p1);
  CHECK((p11.h[0] - p1.h[0]).norm() == 0.0);
  CHECK_THROWS_AS(model::project(3, p), Error);
}

TEST_CASE("merge_sum adds processes on the breakpoint union") {
  Mat ga(1, 2);
  ga << 1.0, 0.0;  // ramp 1 -> 0 on [0, 1], continuous at its support end
  const model::InhomogeneityProcess a = make_process(1.0, {0.0, 1.0}, {ga});

  Mat gb(1, 3);
  gb << 0.0, 2.0, 0.0;  // tent on [0, 2] peaking at 0.5
  const model::InhomogeneityProcess b = make_process(2.0, {0.0, 0.5, 2.0}, {gb});

  const model::InhomogeneityProcess sum = model::merge_sum(a, b);
  CHECK(sum.T_in == 2.0);
  // Both summands decay to zero at their own support ends, so the merge is
  // exact at every time, not only at the union breakpoints.
  for (double t : {0.0, 0.25, 0.5, 0.75, 1.0 - 1e-9, 1.0, 1.5, 2.0}) {
    const double expected = a.g_at(t, 0)(0) + b.g_at(t, 0)(0);
    CHECK(sum.g_at(t, 0)(0) == doctest::Approx(expected).epsilon(1e-12));
  }
  // The union grid contains both sets of breakpoints.
  bool has_half = false;
  for (double t : sum.breakpoints) has_half = has_half || std::abs(t - 0.5) < 1e-15;
  CHECK(has_half);

  // A summand that jumps at its own support end is linearized between the
  // surrounding union breakpoints; the merge stays exact at the breakpoints
  // themselves.
  Mat gc(1, 2);
  gc << 1.0, 1.0;  // constant 1 on [0, 1], jumps to 0 past the end
  const model::InhomogeneityProcess c = make_process(1.0, {0.0, 1.0}, {gc});
  const model::InhomogeneityProcess jump = model::merge_sum(c, b);
  for (double t : jump.breakpoints) {
    const double expected = c.g_at(t, 0)(0) + b.g_at(t, 0)(0);
    CHECK(jump.g_at(t, 0)(0) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("validation flags each error class") {
  model::ProblemSpec good = make_twostate();
  CHECK(model::validate(good).ok());

  model::ProblemSpec asym = make_twostate();
  asym.regimes[0].Q(0, 1) += 0.3;
  const model::ValidationReport r1 = model::validate(asym);
  CHECK(!r1.ok());
  bool found = false;
  for (const auto& e : r1.errors) found = found || e.code == ErrorCode::NotSymmetric;
  CHECK(found);

  model::ProblemSpec indef = make_twostate();
  indef.regimes[1].R(0, 0) = -1.0;
  indef.regimes[1].Rbar(0, 0) = 0.0;
  const model::ValidationReport r2 = model::validate(indef);
  CHECK(!r2.ok());
  found = false;
  for (const auto& e : r2.errors) found = found || e.code == ErrorCode::NotPositiveDefinite;
  CHECK(found);

  model::ProblemSpec baddim = make_twostate();
  baddim.regimes[0].B = Mat::Zero(3, 1);
  const model::ValidationReport r3 = model::validate(baddim);
  CHECK(!r3.ok());
  found = false;
  for (const auto& e : r3.errors) found = found || e.code == ErrorCode::DimensionMismatch;
  CHECK(found);

  model::ProblemSpec stochbar = make_twostate();
  Mat hq(2, 3);
  hq.setZero();
  hq(0, 0) = 0.1;
  stochbar.qbar.h = {hq, hq};
  const model::ValidationReport r4 = model::validate(stochbar);
  CHECK(!r4.ok());
  found = false;
  for (const auto& e : r4.errors) found = found || e.code == ErrorCode::UnsupportedInput;
  CHECK(found);
}

TEST_CASE("validation reports positive weight margins on the working instance") {
  const model::ValidationReport report = model::validate(make_twostate());
  REQUIRE(report.ok());
  // One margin per (component, regime).
  CHECK(report.control_weight_margins.size() == 4);
  CHECK(report.state_weight_margins.size() == 4);
  for (double margin : report.control_weight_margins) CHECK(margin > 0.0);
  for (double margin : report.state_weight_margins) CHECK(margin > 0.0);
}

TEST_CASE("decompose and recompose invert each other") {
  const model::ProblemSpec spec = make_twostate();
  const model::DecomposedModel dm = model::decompose(spec);

  CHECK(dm.n == 2);
  CHECK(dm.m == 1);
  CHECK(dm.num_regimes() == 2);
  for (int i = 0; i < 2; ++i) {
    const auto& rc = spec.regimes[i];
    const auto& dr = dm.regimes[i];
    CHECK((dr.A1 - rc.A).norm() == 0.0);
    CHECK((dr.A2 - (rc.A + rc.Abar)).norm() == 0.0);
    CHECK((dr.B2 - (rc.B + rc.Bbar)).norm() == 0.0);
    CHECK((dr.C2 - (rc.C + rc.Cbar)).norm() == 0.0);
    CHECK((dr.D2 - (rc.D + rc.Dbar)).norm() == 0.0);
    CHECK((dr.Q2 - (rc.Q + rc.Qbar)).norm() == 0.0);
    CHECK((dr.S2 - (rc.S + rc.Sbar)).norm() == 0.0);
    CHECK((dr.R2 - (rc.R + rc.Rbar)).norm() == 0.0);
    CHECK((dr.Q1 - rc.Q).norm() == 0.0);
    CHECK((dr.R1 - rc.R).norm() == 0.0);
  }

  // Component split of the inhomogeneities.
  CHECK(dm.b1.g[0].norm() == 0.0);
  const bool b2_deterministic = dm.b2.h.empty() || dm.b2.h[0].norm() == 0.0;
  CHECK(b2_deterministic);
  for (double t : {0.0, 0.2, 0.45, 0.8, 1.0}) {
    for (int i = 0; i < 2; ++i) {
      CHECK((dm.b1.h_at(t, i) - spec.b.h_at(t, i)).norm() < 1e-14);
      CHECK((dm.b2.g_at(t, i) - spec.b.g_at(t, i)).norm() < 1e-14);
      // q2 carries the mean-weight fold: g-parts of q and qbar summed.
      const Vec expected_q2 = spec.q.g_at(t, i) + spec.qbar.g_at(t, i);
      CHECK((dm.q2.g_at(t, i) - expected_q2).norm() < 1e-14);
      CHECK((dm.q1.h_at(t, i) - spec.q.h_at(t, i)).norm() < 1e-14);
      const Vec expected_r2 = spec.r.g_at(t, i) + spec.rbar.g_at(t, i);
      CHECK((dm.r2.g_at(t, i) - expected_r2).norm() < 1e-14);
    }
  }

  const model::ProblemSpec back = model::recompose(dm);
  for (int i = 0; i < 2; ++i) {
    CHECK((back.regimes[i].A - spec.regimes[i].A).norm() == 0.0);
    CHECK((back.regimes[i].Abar - spec.regimes[i].Abar).norm() < 1e-14);
    CHECK((back.regimes[i].Qbar - spec.regimes[i].Qbar).norm() < 1e-14);
    CHECK((back.regimes[i].Rbar - spec.regimes[i].Rbar).norm() < 1e-14);
  }
  CHECK(model::validate(back).ok());

  model::ProblemSpec invalid = make_twostate();
  invalid.regimes[0].Q(0, 1) += 1.0;
  CHECK_THROWS_AS(model::decompose(invalid), ConfigError);
}

TEST_CASE("input support end scans all inhomogeneities") {
  const model::DecomposedModel with = model::decompose(make_twostate(true));
  CHECK(model::input_support_end(with) == 1.0);
  const model::DecomposedModel without = model::decompose(make_twostate(false));
  CHECK(model::input_support_end(without) == 0.0);
}
