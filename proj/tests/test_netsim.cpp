#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "petc/errors.hpp"
#include "petc/graph.hpp"
#include "petc/matlib.hpp"
#include "petc/netsim.hpp"
#include "petc/synthesis.hpp"

using petc::Matrix;
using petc::Vector;
namespace graph = petc::graph;
namespace matlib = petc::matlib;
namespace netsim = petc::netsim;
namespace synthesis = petc::synthesis;

namespace {

synthesis::Design flat_pair_design(double eta) {
  Matrix A = Matrix::Zero(1, 1);
  Matrix B = Matrix::Ones(1, 1);
  synthesis::SynthOptions opts;
  opts.mode = synthesis::Mode::kNoDelay;
  opts.h = 0.01;
  opts.alpha = 0.5;
  opts.eps = 0.0;
  opts.eta_override = eta;
  Vector x0(2);
  x0 << 1.0, -1.0;
  return synthesis::synthesize(synthesis::make_plant(A, B),
                               graph::make_topology(2, {{0, 1}}), opts, x0);
}

synthesis::Design vi_design(synthesis::Mode mode) {
  Matrix A(2, 2), B(2, 1), P(2, 2);
  A << 0.2, -0.8, 0.26, 0.05;
  B << 0.7, -1.1;
  P << 0.5859, -0.1575, -0.1575, 0.4274;
  synthesis::SynthOptions opts;
  opts.mode = mode;
  opts.h = 0.002;
  opts.alpha = 0.01;
  opts.P_witness = P;
  if (mode != synthesis::Mode::kContinuous) opts.eta_override = 10.85;
  if (mode == synthesis::Mode::kDelay) opts.d = 0.014;
  Vector x0(8);
  x0 << -5.5, -6.1, -1.6, -1.5, 5.9, 2.5, 12.35, 15.1;
  return synthesis::synthesize(synthesis::make_plant(A, B),
                               graph::make_topology(4, {{0, 1}, {1, 2}, {2, 3}}), opts,
                               x0);
}

Vector vi_x0() {
  Vector x0(8);
  x0 << -5.5, -6.1, -1.6, -1.5, 5.9, 2.5, 12.35, 15.1;
  return x0;
}

netsim::RunOptions vi_delay_options() {
  netsim::RunOptions opts;
  opts.duration = 20.0;
  opts.seed = 2027;
  opts.delay_values = {0.010, 0.012, 0.014};
  return opts;
}

}  // namespace

TEST_CASE("delay rounding lands on the expected grid slots") {
  CHECK(netsim::round_delay(0.0115, 0.002) == 6);
  CHECK(netsim::round_delay(0.012, 0.002) == 6);
  CHECK(netsim::round_delay(0.014, 0.002) == 7);
  CHECK(netsim::round_delay(0.0001, 0.002) == 1);
}

TEST_CASE("delay draws are deterministic and in range") {
  const std::size_t a = netsim::draw_delay_index(7, 2, 5, 0, 3);
  const std::size_t b = netsim::draw_delay_index(7, 2, 5, 0, 3);
  CHECK(a == b);
  CHECK(a < 3);
  bool any_different = false;
  for (long long k = 0; k < 16; ++k) {
    if (netsim::draw_delay_index(7, 2, k, 0, 3) != a) any_different = true;
  }
  CHECK(any_different);
}

TEST_CASE("two steps of the scalar pair match the hand computation") {
  const synthesis::Design design = flat_pair_design(1.0);
  Vector x0(2);
  x0 << 1.0, -1.0;
  netsim::RunOptions opts;
  opts.duration = 0.02;
  opts.record_debug = true;
  const netsim::RunResult result = netsim::simulate(design, x0, opts);

  REQUIRE(result.trajectory.t.size() == 3);
  CHECK(result.trajectory.x[0][0](0) == doctest::Approx(1.0));
  CHECK(result.trajectory.u[0][0](0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(result.trajectory.x[1][0](0) == doctest::Approx(0.99).epsilon(1e-12));
  CHECK(result.trajectory.x[1][1](0) == doctest::Approx(-0.99).epsilon(1e-12));
  CHECK(result.trajectory.u[1][0](0) == doctest::Approx(-0.995).epsilon(1e-12));
  CHECK(result.trajectory.x[2][0](0) == doctest::Approx(0.98005).epsilon(1e-12));

  // Only the opening exchange fires; the drift stays under eta = 1.
  REQUIRE(result.events.size() == 2);
  CHECK(result.events[0].step == 0);
  CHECK(result.events[1].step == 0);

  CHECK(result.metrics.V[0] == doctest::Approx(2.0).epsilon(1e-12));
  const netsim::StepRecord& rec = result.debug[1][0];
  CHECK(rec.model_error_pre(0) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(rec.zcheck(0) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(rec.echeck(0) == doctest::Approx(-0.01).epsilon(1e-12));
}

TEST_CASE("grid advance matches a fine Runge-Kutta integration") {
  const synthesis::Design design = vi_design(synthesis::Mode::kNoDelay);
  netsim::RunOptions opts;
  opts.duration = 0.002;
  opts.record_debug = true;
  const netsim::RunResult result = netsim::simulate(design, vi_x0(), opts);

  for (int agent = 0; agent < 4; ++agent) {
    const Vector want = oracles::rk4_hold(
        design.plant.A, design.plant.B, result.debug[0][agent].x,
        result.debug[0][agent].u, 0.002, 400);
    CHECK((result.debug[1][agent].x - want).norm() < 1e-8);
  }
}

TEST_CASE("fixed seeds reproduce delay runs exactly") {
  const synthesis::Design design = vi_design(synthesis::Mode::kDelay);
  netsim::RunOptions opts = vi_delay_options();
  opts.duration = 2.0;
  const netsim::RunResult first = netsim::simulate(design, vi_x0(), opts);
  const netsim::RunResult second = netsim::simulate(design, vi_x0(), opts);

  REQUIRE(first.events.size() == second.events.size());
  for (std::size_t k = 0; k < first.events.size(); ++k) {
    CHECK(first.events[k].step == second.events[k].step);
    CHECK(first.events[k].agent == second.events[k].agent);
  }
  REQUIRE(first.deliveries.size() == second.deliveries.size());
  const Vector last_a = first.trajectory.x.back()[3];
  const Vector last_b = second.trajectory.x.back()[3];
  CHECK((last_a - last_b).norm() == 0.0);
}

TEST_CASE("every scheduled message is delivered or still pending") {
  const synthesis::Design design = vi_design(synthesis::Mode::kDelay);
  netsim::RunOptions opts = vi_delay_options();
  opts.duration = 2.0;
  const netsim::RunResult result = netsim::simulate(design, vi_x0(), opts);

  long long scheduled = 0;
  for (const netsim::Event& evn : result.events) {
    if (evn.step == 0) continue;  // the opening exchange seeds models directly
    scheduled += design.topo.degree_of(evn.agent);
  }
  CHECK(scheduled ==
        static_cast<long long>(result.deliveries.size()) + result.undelivered);

  for (const netsim::DeliveryRecord& rec : result.deliveries) {
    const long long span = rec.deliver_step - rec.send_step;
    CHECK(span >= 1);
    CHECK(span <= design.event.p);
  }
}

TEST_CASE("agents already in consensus never fire after the opening exchange") {
  const synthesis::Design design = flat_pair_design(1.0);
  Vector x0(2);
  x0 << 2.0, 2.0;
  netsim::RunOptions opts;
  opts.duration = 1.0;
  const netsim::RunResult result = netsim::simulate(design, x0, opts);
  REQUIRE(result.events.size() == 2);
  CHECK(result.events[0].step == 0);
  CHECK(result.events[1].step == 0);
  CHECK(result.trajectory.x.back()[0](0) == doctest::Approx(2.0));
  CHECK(result.metrics.window_counts[0][0] == 1);
}

TEST_CASE("an uncontrolled unstable plant trips the divergence guard") {
  synthesis::Design design;
  Matrix A(1, 1), B(1, 1);
  A << 3.0;
  B << 1.0;
  design.plant = synthesis::make_plant(A, B);
  design.topo = graph::make_topology(2, {{0, 1}});
  design.gains.P = Matrix::Identity(1, 1);
  design.gains.F = Matrix::Zero(1, 1);
  design.gains.c = 0.5;
  design.gains.c1 = 1.0;
  design.analysis.L_hat = design.topo.laplacian;
  design.event.mode = synthesis::Mode::kNoDelay;
  design.event.h = 0.01;
  design.event.sigma = 0.5;
  design.event.eta = 1.0;
  auto gh = matlib::zoh_pair(A, B, 0.01);
  design.event.G = gh.first;
  design.event.H = gh.second;
  design.event.M = Matrix::Zero(1, 1);
  design.trigger.resize(2);

  Vector x0(2);
  x0 << 1.0, -1.0;
  netsim::RunOptions opts;
  opts.duration = 20.0;
  CHECK_THROWS_AS(netsim::simulate(design, x0, opts), petc::DivergenceError);
}

TEST_CASE("zero duration produces empty logs") {
  const synthesis::Design design = flat_pair_design(1.0);
  Vector x0(2);
  x0 << 1.0, -1.0;
  netsim::RunOptions opts;
  opts.duration = 0.0;
  const netsim::RunResult result = netsim::simulate(design, x0, opts);
  CHECK(result.trajectory.t.empty());
  CHECK(result.events.empty());
  CHECK(result.metrics.V.empty());
  CHECK(result.metrics.guarantees_ok);
}

TEST_CASE("per-step broadcasting contracts the disagreement monotonically") {
  Matrix A = Matrix::Zero(1, 1);
  Matrix B = Matrix::Ones(1, 1);
  synthesis::SynthOptions sopts;
  sopts.mode = synthesis::Mode::kContinuous;
  sopts.h = 0.01;
  sopts.alpha = 0.5;
  sopts.eps = 0.0;
  Vector x0(2);
  x0 << 1.0, -1.0;
  const synthesis::Design design = synthesis::synthesize(
      synthesis::make_plant(A, B), graph::make_topology(2, {{0, 1}}), sopts, x0);

  netsim::RunOptions opts;
  opts.duration = 20.0;
  const netsim::RunResult result = netsim::simulate(design, x0, opts);
  CHECK(result.events.empty());
  CHECK(result.metrics.monotone_violations == 0);
  CHECK(result.metrics.guarantees_ok);
  CHECK(result.metrics.max_disagreement.back() < 1e-6);
}

TEST_CASE("sub-sampling the plant advance changes logging, not the grid states") {
  const synthesis::Design design = vi_design(synthesis::Mode::kNoDelay);
  netsim::RunOptions coarse;
  coarse.duration = 0.02;
  netsim::RunOptions fine = coarse;
  fine.substeps = 4;

  const netsim::RunResult a = netsim::simulate(design, vi_x0(), coarse);
  const netsim::RunResult b = netsim::simulate(design, vi_x0(), fine);
  REQUIRE(a.trajectory.t.size() == 11);
  REQUIRE(b.trajectory.t.size() == 41);
  CHECK(b.trajectory.t[1] == doctest::Approx(0.0005).epsilon(1e-12));
  const Vector last_a = a.trajectory.x.back()[2];
  const Vector last_b = b.trajectory.x.back()[2];
  CHECK((last_a - last_b).norm() < 1e-10);
  CHECK(a.metrics.t.size() == b.metrics.t.size());
}
