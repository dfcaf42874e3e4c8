#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "zic/eval.hpp"

using namespace zic;

namespace {

EvalConfig unit_config() {
  EvalConfig c;
  c.channel.variance = 0.0;
  c.n_channel_draws = 4;
  c.n_symbols_per_point = 100000;
  c.seed = 17;
  return c;
}

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

/// Fraction of Tx1 bits lost by the joint detector on noiseless
/// superpositions of QPSK/QPSK at unit cross gain, computed by enumeration.
double overlap_floor() {
  const double r = 1.0 / std::sqrt(2.0);
  const Complex pts[4] = {{-r, -r}, {-r, r}, {r, -r}, {r, r}};
  int errors = 0;
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      const Complex y = pts[a] + pts[b];
      int best = -1;
      double best_d = 1e300;
      for (int k = 0; k < 16; ++k) {
        const double d = std::norm(y - (pts[k / 4] + pts[k % 4]));
        if (d < best_d - 1e-12) {
          best_d = d;
          best = k;
        }
      }
      const int decided = best / 4;
      errors += ((decided ^ a) & 1) + (((decided ^ a) >> 1) & 1);
    }
  }
  return errors / 32.0;
}

}  // namespace

TEST(Eval, SchemeNames) {
  EXPECT_EQ(parse_scheme("baseline2"), SchemeKind::kBaseline2);
  EXPECT_EQ(scheme_name(SchemeKind::kDae), "dae");
  EXPECT_THROW(parse_scheme("qam"), ConfigError);
}

TEST(Eval, NoiselessWithoutInterferenceHasNoErrors) {
  Rng rng = make_stream(1, {1});
  const auto counts = run_point(Scheme{}, perfect_link(0.0, 0.0), 0.0, 10000, rng);
  EXPECT_EQ(counts.errors1, 0);
  EXPECT_EQ(counts.errors2, 0);
  EXPECT_EQ(counts.symbols, 10000);
}

TEST(Eval, AwgnMatchesAnalyticQpsk) {
  EvalConfig c = unit_config();
  c.alpha_grid = {0.0};
  c.n_symbols_per_point = 0;  // adaptive
  c.min_errors = 1000;
  const auto r = evaluate_grid(c, c.scheme(SchemeKind::kBaseline1));
  const auto& p = r.points.at(0);
  const double expected = q_function(std::sqrt(10.0));
  EXPECT_NEAR(expected, 7.83e-4, 1e-6);
  EXPECT_GE(std::max(p.errors1, p.errors2), 1000);
  const double se = std::sqrt(expected * (1.0 - expected) / p.n_bits);
  EXPECT_NEAR(p.ber1, expected, 3.0 * se);
  EXPECT_NEAR(p.ber2, expected, 3.0 * se);
}

TEST(Eval, OverlapFloorAtHighSnr) {
  EvalConfig c = unit_config();
  c.snr_grid_db = {40.0};
  const auto p = evaluate_grid(c, c.scheme(SchemeKind::kBaseline1)).points.at(0);
  const double floor = overlap_floor();
  EXPECT_NEAR(floor, 0.25, 1e-12);
  EXPECT_NEAR(p.ber_worst, floor, 3.0 * std::sqrt(floor * (1 - floor) / p.n_bits));
}

TEST(Eval, RotationBeatsPlainQamUnderStrongInterference) {
  EvalConfig c = unit_config();
  const auto b1 = evaluate_grid(c, c.scheme(SchemeKind::kBaseline1)).points.at(0);
  const auto b2 = evaluate_grid(c, c.scheme(SchemeKind::kBaseline2)).points.at(0);
  EXPECT_LT(b2.ber_worst + 3.0 * (b1.std_error() + b2.std_error()), b1.ber_worst);
}

TEST(Eval, PlainQamPeaksNearUnitGain) {
  EvalConfig c = unit_config();
  c.alpha_grid = {0.5, 1.0, 1.5};
  const auto r = sweep_alpha(c, c.scheme(SchemeKind::kBaseline1), 10.0);
  ASSERT_EQ(r.points.size(), 3u);
  EXPECT_GT(r.points[1].ber_worst, r.points[0].ber_worst);
  EXPECT_GT(r.points[1].ber_worst, r.points[2].ber_worst);
}

TEST(Eval, RotationIrrelevantWithoutInterference) {
  EvalConfig c = unit_config();
  c.alpha_grid = {0.0};
  const auto b1 = evaluate_grid(c, c.scheme(SchemeKind::kBaseline1)).points.at(0);
  const auto b2 = evaluate_grid(c, c.scheme(SchemeKind::kBaseline2)).points.at(0);
  EXPECT_EQ(b1.errors1, b2.errors1);
  EXPECT_EQ(b1.errors2, b2.errors2);
}

TEST(Eval, RotatedQamImprovesWithSnr) {
  EvalConfig c = unit_config();
  c.snr_grid_db = {0.0, 4.0, 8.0, 12.0};
  const auto r = sweep_snr(c, c.scheme(SchemeKind::kBaseline2), 1.0);
  for (std::size_t i = 1; i < r.points.size(); ++i) {
    const double slack = 2.0 * (r.points[i].std_error() + r.points[i - 1].std_error());
    EXPECT_LE(r.points[i].ber_worst, r.points[i - 1].ber_worst + slack);
  }
}

TEST(Eval, WorstIsMaxOfUsers) {
  EvalConfig c = unit_config();
  c.alpha_grid = {0.0, 0.7, 1.4};
  c.channel.variance = 0.1;
  for (const auto& p : evaluate_grid(c, c.scheme(SchemeKind::kBaseline1)).points) {
    EXPECT_EQ(p.ber_worst, std::max(p.ber1, p.ber2));
    EXPECT_GE(p.ber1, 0.0);
    EXPECT_LE(p.ber1, 1.0);
  }
}

TEST(Eval, StandardErrorScaling) {
  BerPoint p = make_point("x", 0, 0, PointCounts{100, 10, 5000}, 2);
  BerPoint q = make_point("x", 0, 0, PointCounts{200, 20, 10000}, 2);
  EXPECT_NEAR(p.std_error() / q.std_error(), std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(p.std_error(), std::sqrt(0.01 * 0.99 / 10000.0), 1e-15);
}

TEST(Eval, DeterministicAndThreadIndependent) {
  EvalConfig c = unit_config();
  c.channel.variance = 0.1;
  c.alpha_grid = {0.2, 0.9};
  c.snr_grid_db = {5.0, 10.0};
  c.csi.imperfect = true;
  c.csi.estimation.sigma_e2 = 0.01;
  c.csi.n_q = 4;
  const auto a = evaluate_grid(c, c.scheme(SchemeKind::kBaseline2));
  c.threads = 3;
  const auto b = evaluate_grid(c, c.scheme(SchemeKind::kBaseline2));
  std::ostringstream sa, sb;
  write_ber_csv_rows(sa, a);
  write_ber_csv_rows(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(a.points.size(), 4u);
}

TEST(Eval, CompareReduction) {
  BerResult a, b;
  for (double alpha : {0.5, 1.0}) {
    BerPoint p;
    p.alpha = alpha;
    p.ber_worst = 0.01 * alpha;
    a.points.push_back(p);
    p.ber_worst *= 2.0;
    b.points.push_back(p);
  }
  EXPECT_DOUBLE_EQ(compare_reduction(a, a), 0.0);
  EXPECT_NEAR(compare_reduction(a, b), 50.0, 1e-12);
  b.points.pop_back();
  EXPECT_THROW(compare_reduction(a, b), ConfigError);
}

TEST(Eval, DaeRoutingErrors) {
  ModelSet set;
  EvalConfig c = unit_config();
  EXPECT_THROW(evaluate_grid(c, c.scheme(SchemeKind::kDae, &set)), ConfigError);
  ModelSpec s;
  s.shape = {4, 1, 2};
  s.alpha_min = 0.0;
  s.alpha_max = 0.5;
  set.add(std::make_shared<DaeZicModel>(s, 1));
  EXPECT_NO_THROW(set.route(0.2));
  try {
    set.route(1.2);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("[1, 1.5)"), std::string::npos) << e.what();
  }
  EXPECT_THROW(set.route(3.5), ConfigError);
  c.alpha_grid = {0.1, 3.2};
  EXPECT_THROW(evaluate_grid(c, c.scheme(SchemeKind::kDae, &set)), ConfigError);
}

TEST(Eval, DaeSchemeRuns) {
  ModelSet set;
  ModelSpec s;
  s.shape = {4, 1, 2};
  s.alpha_min = 0.5;
  s.alpha_max = 1.5;
  set.add(std::make_shared<DaeZicModel>(s, 1));
  EvalConfig c = unit_config();
  c.n_symbols_per_point = 5000;
  const auto r = evaluate_grid(c, c.scheme(SchemeKind::kDae, &set));
  EXPECT_EQ(r.points.at(0).n_bits, 10000);
  EXPECT_EQ(r.points.at(0).scheme, "dae");
}

TEST(Eval, CsvLayout) {
  EvalConfig c = unit_config();
  c.alpha_grid = {0.0, 0.5, 1.0};
  c.n_symbols_per_point = 1000;
  std::ostringstream os;
  write_ber_csv_header(os);
  write_ber_csv_rows(os, evaluate_grid(c, c.scheme(SchemeKind::kBaseline1)));
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "scheme,snr_db,alpha,ber1,ber2,ber_worst,stderr,n_bits");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(line.rfind("baseline1,10,", 0), 0u) << line;
  }
  EXPECT_EQ(rows, 3);
}

TEST(Eval, ConfigValidation) {
  EvalConfig c;
  c.alpha_grid.clear();
  EXPECT_THROW(c.validate(), ConfigError);
  c = EvalConfig{};
  c.n_channel_draws = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}
