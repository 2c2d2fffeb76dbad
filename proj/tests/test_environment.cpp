#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bcomd/environment.hpp"
#include "bcomd/errors.hpp"
#include "bcomd/oracle.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace bcomd;
namespace fs = std::filesystem;

namespace {

TraceGenConfig quiet(int n, std::int64_t horizon)
{
  TraceGenConfig cfg;
  cfg.n = n;
  cfg.horizon = horizon;
  cfg.noise_std = 0.0;
  return cfg;
}

std::string message_of(const std::function<void()> &fn)
{
  try {
    fn();
  } catch (const std::exception &e) {
    return e.what();
  }
  return "";
}

Trace read_text(const std::string &text)
{
  std::istringstream in(text);
  return read_trace(in);
}

} // namespace

TEST_CASE("shifting trace example")
{
  TraceGenConfig cfg;
  cfg.window = 200;
  cfg.horizon = 1400;
  const Trace trace = generate_shifting_trace(cfg, 3);
  validate(trace);
  CHECK(std::stod(trace.metadata.at("rho_hat")) > 0.0);
  CHECK(trace.n == 25);
  CHECK(trace.horizon == 1400);

  const Trace base = generate_shifting_trace(quiet(25, 10), 3);
  CHECK(base.losses(0, 0) == 0.0);
  CHECK(base.losses(0, 12) == doctest::Approx(1.0));
}

TEST_CASE("constraint profile threshold")
{
  const Trace one = generate_shifting_trace(quiet(25, 1), 1);
  CHECK(one.metadata.at("indicator_threshold") == "16");
  for (int a = 0; a < 25; ++a)
    CHECK(one.constraints(0, a) == (a + 1 <= 16 ? 0.25 : -0.25));

  TraceGenConfig zero = quiet(25, 1);
  zero.zero_based_indicator = true;
  const Trace z = generate_shifting_trace(zero, 1);
  for (int a = 0; a < 25; ++a)
    CHECK(z.constraints(0, a) == (a <= 16 ? 0.25 : -0.25));
}

TEST_CASE("noise-free trace without shifts is stationary")
{
  TraceGenConfig cfg = quiet(7, 50);
  cfg.shift = 0;
  const Trace trace = generate_shifting_trace(cfg, 1);
  for (std::int64_t t = 1; t < 50; ++t) {
    CHECK(trace.losses.row(t) == trace.losses.row(0));
    CHECK(trace.constraints.row(t) == trace.constraints.row(0));
  }
  const RegularityResult r = regularity_measures(trace);
  CHECK(r.measures.path_length == 0.0);
  CHECK(r.measures.temporal_variation == 0.0);
}

TEST_CASE("profiles rotate by the shift each window and stop after the repetitions")
{
  TraceGenConfig cfg = quiet(10, 100);
  cfg.window = 10;
  cfg.shift = 3;
  cfg.repetitions = 4;
  const Trace trace = generate_shifting_trace(cfg, 1);
  for (std::int64_t t = 0; t < 100; ++t) {
    const std::int64_t count = std::min<std::int64_t>(t / 10, 4);
    const std::int64_t offset = (3 * count) % 10;
    for (int a = 0; a < 10; ++a) {
      const auto src = static_cast<int>(((a - offset) % 10 + 10) % 10);
      REQUIRE(trace.losses(t, a) == trace.losses(0, src));
      REQUIRE(trace.constraints(t, a) == trace.constraints(0, src));
    }
  }
  // Period n / gcd(n, shift) windows when repetitions do not cap it.
  cfg.repetitions = 1000;
  cfg.shift = 5;
  const Trace periodic = generate_shifting_trace(cfg, 1);
  CHECK(periodic.losses.row(0) == periodic.losses.row(20));
  CHECK(periodic.losses.row(0) != periodic.losses.row(10));
}

TEST_CASE("generation is deterministic per seed")
{
  TraceGenConfig cfg;
  cfg.horizon = 500;
  CHECK(generate_shifting_trace(cfg, 8) == generate_shifting_trace(cfg, 8));
  CHECK_FALSE(generate_shifting_trace(cfg, 8) == generate_shifting_trace(cfg, 9));
}

TEST_CASE("noisy values stay in range")
{
  TraceGenConfig cfg;
  cfg.horizon = 2000;
  cfg.noise_std = 0.5;
  const Trace trace = generate_shifting_trace(cfg, 2);
  CHECK(trace.losses.minCoeff() >= 0.0);
  CHECK(trace.losses.maxCoeff() <= 1.0);
  CHECK(trace.constraints.minCoeff() >= -1.0);
  CHECK(trace.constraints.maxCoeff() <= 1.0);

  cfg.clip = ClipMode::reject;
  CHECK_THROWS_AS(generate_shifting_trace(cfg, 2), ValidationError);
}

TEST_CASE("infeasible traces are refused")
{
  TraceGenConfig cfg = quiet(25, 10);
  cfg.rho_target = 0.5;
  CHECK_THROWS_AS(generate_shifting_trace(cfg, 1), InfeasibleError);
  cfg.allow_infeasible = true;
  CHECK_NOTHROW(generate_shifting_trace(cfg, 1));
}

TEST_CASE("generator config validation")
{
  TraceGenConfig cfg;
  cfg.shift = 25;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
  cfg = TraceGenConfig{};
  cfg.window = 0;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
  cfg = TraceGenConfig{};
  cfg.noise_std = -1;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
}

TEST_CASE("fixture examples")
{
  const Trace small = generate_incomparability_fixture(FixtureKind::vt_small_pt_large, 4, 3);
  CHECK(small.losses(0, 0) == 0.0);
  CHECK(small.losses(0, 1) == 0.25);
  CHECK(small.losses(0, 2) == 1.0);
  CHECK(small.losses(1, 0) == 0.25);
  CHECK(small.losses(1, 1) == 0.0);
  CHECK((small.constraints.array() == -0.5).all());
  const RegularityResult rs = regularity_measures(small);
  CHECK(rs.measures.temporal_variation == 0.75);
  CHECK(rs.measures.path_length == 6.0);
  CHECK(small.metadata.at("analytic_P_T") == "6");
  CHECK(small.metadata.at("analytic_V_T") == "0.75");

  const Trace large = generate_incomparability_fixture(FixtureKind::vt_large_pt_small, 4);
  CHECK(large.n == 2);
  CHECK(large.losses(1, 1) == 0.5);
  const RegularityResult rl = regularity_measures(large);
  CHECK(rl.measures.path_length == 0.0);
  CHECK(rl.measures.temporal_variation == 1.5);

  for (FixtureKind kind : {FixtureKind::vt_small_pt_large, FixtureKind::vt_large_pt_small}) {
    const RegularityResult r = regularity_measures(generate_incomparability_fixture(kind, 2));
    CHECK(r.measures.temporal_variation == 0.5);
    CHECK(r.measures.path_length == (kind == FixtureKind::vt_small_pt_large ? 2.0 : 0.0));
  }
  CHECK_THROWS_AS(generate_incomparability_fixture(FixtureKind::vt_large_pt_small, 1), ValidationError);
  CHECK(parse_fixture_kind("vt_small_pt_large") == FixtureKind::vt_small_pt_large);
  CHECK_THROWS_AS(parse_fixture_kind("nope"), ValidationError);
}

TEST_CASE("trace file roundtrip")
{
  TraceGenConfig cfg;
  cfg.horizon = 300;
  const Trace trace = generate_shifting_trace(cfg, 4);
  const fs::path path = fs::temp_directory_path() / "bcomd_roundtrip_trace.txt";
  CHECK(trace_roundtrip(trace, path) == trace);
  fs::remove(path);

  const Trace fixture = generate_incomparability_fixture(FixtureKind::vt_small_pt_large, 7, 4);
  std::stringstream buf;
  write_trace(buf, fixture);
  CHECK(read_trace(buf) == fixture);
}

TEST_CASE("trace file errors")
{
  const std::string ok = "2 1 custom 0\n0.5 0.5 -0.1 0.2\n";
  CHECK_NOTHROW(read_text(ok));
  CHECK(message_of([] { read_text("2 1 custom 0\n1.5 0.5 -0.1 0.2\n"); }).find("loss out of [0,1] at (t=0, a=0)") !=
        std::string::npos);
  CHECK(message_of([] { read_text("2 1 custom 0\n0.5 0.5 -0.1 2\n"); }).find("constraint out of [-1,1]") !=
        std::string::npos);
  CHECK(message_of([] { read_text("2 1 custom 0\n0.5 0.5 -0.1\n"); }).find("schema error") != std::string::npos);
  CHECK(message_of([] { read_text("2 2 custom 0\n0.5 0.5 -0.1 0.2\n"); }).find("schema error") != std::string::npos);
  CHECK(message_of([] { read_text(""); }).find("schema error") != std::string::npos);
  CHECK_THROWS_AS(read_text("2 1 custom 0\n0.5 abc -0.1 0.2\n"), ValidationError);
  CHECK_THROWS_AS(read_trace(fs::path("/nonexistent/trace.txt")), ValidationError);
}

TEST_CASE("trace validation names the offending entry")
{
  Trace trace = generate_incomparability_fixture(FixtureKind::vt_large_pt_small, 4);
  trace.losses(2, 1) = -0.1;
  CHECK(message_of([&] { validate(trace); }).find("(t=2, a=1)") != std::string::npos);
}

TEST_CASE("slater margin")
{
  Eigen::VectorXd f(3), g(3);
  f << 0.1, 0.2, 0.3;
  g << 0.5, -0.2, -0.4;
  CHECK(slater_margin(generate_stationary_trace(f, g, 5)) == doctest::Approx(0.4));
  g << 0.5, 0.2, 0.4;
  CHECK(slater_margin(generate_stationary_trace(f, g, 5)) == doctest::Approx(-0.2));
}
