#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mmsched/bellman4d.hpp"
#include "mmsched/verifier.hpp"

using namespace mmsched;

namespace {

RateParams paper(double lambda, double beta) {
  RateParams p = uniformize({lambda, 100.0, 100.0, 1.0, 0.6, 0.0}).params;
  p.beta = beta;
  return p;
}

struct Q {
  int q0, l1, q1, l2;
};

/// Expectation tree over the 4-D chain, written out state by state: each
/// event is followed by the cheapest of hold, A1, A2, Ab and the renege
/// (processing server first), skipping any choice that leaves the processing
/// server idle while the head buffer is non-empty.
double tree4(const RateParams& p, const TruncationBox& box, Q s, int depth) {
  const double cost = s.q0 + s.l1 + s.q1 + s.l2;
  if (depth == 0) return cost;
  const auto best = [&](Q t) {
    std::vector<Q> options{t};
    if (t.q0 >= 1 && t.l1 == 0) options.push_back({t.q0 - 1, 1, t.q1, t.l2});
    if (t.q0 >= 1 && t.l2 == 0) options.push_back({t.q0 - 1, t.l1, t.q1, 1});
    if (t.q0 >= 2 && t.l1 == 0 && t.l2 == 0) options.push_back({t.q0 - 2, 1, t.q1, 1});
    if (t.l2 == 0 && t.l1 == 1) {
      options.push_back({t.q0, 0, t.q1, 1});
    } else if (t.l2 == 0 && t.q1 >= 1) {
      options.push_back({t.q0, t.l1, t.q1 - 1, 1});
    }
    double v = 1e300;
    for (const Q& o : options) {
      if (o.q0 >= 1 && o.l1 == 0) continue;
      v = std::min(v, tree4(p, box, o, depth - 1));
    }
    return v;
  };
  const Q arrival = s.q0 + s.l1 >= box.x_max ? s : Q{s.q0 + 1, s.l1, s.q1, s.l2};
  const Q processing = (s.l1 == 1 && s.q1 < box.q1_max) ? Q{s.q0, 0, s.q1 + 1, s.l2} : s;
  const Q mm{s.q0, s.l1, std::max(s.q1 - 1, 0), s.l2};
  const Q sub6{s.q0, s.l1, s.q1, 0};
  return cost + p.beta * (p.lambda * best(arrival) + p.mu_p * best(processing) + p.mm_rate() * best(mm) +
                          p.mu_sub6 * best(sub6));
}

}  // namespace

TEST(Bellman4D, FourApplicationsMatchExpectationTree) {
  const RateParams p = paper(45.0, 0.95);
  const TruncationBox box{6, 6};
  ValueFunction4D v = ValueFunction4D::total_count(box);
  for (int n = 0; n < 4; ++n) v = bellman_operator_4d(v, p);
  double worst = 0.0;
  v.for_each_state([&](const SystemState& s) {
    worst = std::max(worst, std::abs(v(s) - tree4(p, box, {s.q0, s.l1, s.q1, s.l2}, 4)));
  });
  EXPECT_LT(worst, 1e-9);
}

TEST(Bellman4D, OperatorRequiresNormalizedRates) {
  const ValueFunction4D v = ValueFunction4D::total_count({5, 5});
  EXPECT_THROW(bellman_operator_4d(v, RateParams{45.0, 100.0, 100.0, 1.0, 0.6, 0.9}), ParamsNotUniformized);
}

TEST(Bellman4D, StateSetRespectsBox) {
  const TruncationBox box{4, 5};
  const ValueFunction4D v(box);
  int n = 0;
  v.for_each_state([&](const SystemState& s) {
    EXPECT_LE(s.q0 + s.l1, box.x_max);
    ++n;
  });
  // x = q0 + l1 in [0, 4]: x = 0 has one split, every other x has two
  EXPECT_EQ(n, (1 + 2 * 4) * 6 * 2);
  EXPECT_FALSE(v.contains({4, 1, 0, 0}));
  EXPECT_THROW(v.at({4, 1, 0, 0}), OutOfBox);
}

TEST(Bellman4D, BestControlFollowsTieOrder) {
  // on the total-count function every control ties, so the first admissible
  // candidate (A1) wins
  const ValueFunction4D v = ValueFunction4D::total_count({6, 6});
  EXPECT_EQ(best_control(v, {2, 0, 1, 0}), Action::ScheduleOnMmWave);
  EXPECT_EQ(best_control(v, {2, 1, 1, 0}), Action::Hold);
}

TEST(Bellman4D, NeverIdlesProcessingWithWaitingPackets) {
  // holding at (3,0,1,0) would look cheapest here, but it idles the
  // processing server
  ValueFunction4D v = ValueFunction4D::total_count({6, 6});
  v({3, 0, 1, 0}) = -10.0;
  v({2, 0, 1, 1}) = -20.0;  // A2 without A1 idles it too
  EXPECT_FALSE(usable_control({3, 0, 1, 0}, Action::Hold));
  EXPECT_FALSE(usable_control({3, 0, 1, 0}, Action::ScheduleOnSub6));
  EXPECT_TRUE(usable_control({1, 0, 1, 0}, Action::ScheduleOnSub6));
  EXPECT_TRUE(usable_control({0, 0, 1, 0}, Action::Hold));
  EXPECT_EQ(best_control(v, {3, 0, 1, 0}), Action::ScheduleOnMmWave);
}

TEST(Bellman4D, FixedPointAgreesWithCollapsedSolver) {
  const RateParams p = paper(45.0, 0.99);
  const TruncationBox box{24, 24};
  SolveOptions opts;
  opts.tol = 1e-10;
  const DiscountedSolution s3 = solve_discounted(p, box, opts);
  const Solution4D s4 = solve_4d(p, box, opts);
  const int band = verification_band(box);
  double worst = 0.0;
  for (int x = 0; x <= box.x_max - band; ++x)
    for (int q1 = 0; q1 <= box.q1_max - band; ++q1)
      for (int l2 = 0; l2 <= 1; ++l2) {
        const CollapsedState c{x, q1, l2};
        worst = std::max(worst, std::abs(s3.values(c) - s4.values(expand(c))));
      }
  EXPECT_LT(worst, 10 * opts.tol);
}
