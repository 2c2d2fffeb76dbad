#include "bcomd/environment.hpp"

#include "bcomd/errors.hpp"
#include "bcomd/random.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <vector>

namespace bcomd {

bool Trace::operator==(const Trace &other) const
{
  return n == other.n && horizon == other.horizon && generator == other.generator && seed == other.seed &&
         losses == other.losses && constraints == other.constraints;
}

void validate(const Trace &trace)
{
  if (trace.n < 2)
    throw ValidationError(fmt::format("trace needs at least 2 arms, has {}", trace.n));
  if (trace.horizon < 1)
    throw ValidationError("trace horizon must be at least 1");
  if (trace.losses.rows() != trace.horizon || trace.losses.cols() != trace.n ||
      trace.constraints.rows() != trace.horizon || trace.constraints.cols() != trace.n)
    throw ValidationError("trace matrices do not match the declared shape");
  for (std::int64_t t = 0; t < trace.horizon; ++t)
    for (int a = 0; a < trace.n; ++a) {
      const double f = trace.losses(t, a);
      const double g = trace.constraints(t, a);
      if (!(f >= 0.0 && f <= 1.0))
        throw ValidationError(fmt::format("loss out of [0,1] at (t={}, a={}): {}", t, a, f));
      if (!(g >= -1.0 && g <= 1.0))
        throw ValidationError(fmt::format("constraint out of [-1,1] at (t={}, a={}): {}", t, a, g));
    }
}

double slater_margin(const Trace &trace)
{
  double margin = std::numeric_limits<double>::infinity();
  for (std::int64_t t = 0; t < trace.horizon; ++t)
    margin = std::min(margin, -trace.constraints.row(t).minCoeff());
  return margin;
}

void validate(const TraceGenConfig &cfg)
{
  if (cfg.n < 2)
    throw ValidationError("generator: n must be at least 2");
  if (cfg.horizon < 1)
    throw ValidationError("generator: horizon must be at least 1");
  if (cfg.window < 1)
    throw ValidationError("generator: window must be at least 1");
  if (cfg.shift < 0 || cfg.shift >= cfg.n)
    throw ValidationError(fmt::format("generator: shift {} must lie in [0, n)", cfg.shift));
  if (cfg.repetitions < 0)
    throw ValidationError("generator: repetitions must be nonnegative");
  if (!(cfg.noise_std >= 0) || !std::isfinite(cfg.noise_std))
    throw ValidationError("generator: noise_std must be finite and nonnegative");
}

namespace {

double clip_or_reject(double v, double lo, double hi, ClipMode mode, const char *what, std::int64_t t, int a)
{
  if (v >= lo && v <= hi)
    return v;
  if (mode == ClipMode::reject)
    throw ValidationError(fmt::format("{} out of [{},{}] at (t={}, a={}): {}", what, lo, hi, t, a, v));
  return std::clamp(v, lo, hi);
}

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

} // namespace

Trace generate_shifting_trace(const TraceGenConfig &cfg, std::uint64_t seed)
{
  validate(cfg);
  const int n = cfg.n;
  const int threshold = static_cast<int>(std::floor(n / 1.5));
  Eigen::VectorXd base_loss(n);
  Eigen::VectorXd base_constraint(n);
  for (int a = 0; a < n; ++a) {
    const double raw = 1.0 + std::sin(std::numbers::pi * (static_cast<double>(a) / (n - 1)));
    base_loss(a) = raw - 1.0; // [1, 2] -> [0, 1]
    const int index = cfg.zero_based_indicator ? a : a + 1;
    base_constraint(a) = 0.5 * (index <= threshold ? 1.0 : 0.0) - 0.25;
  }

  Trace trace;
  trace.n = n;
  trace.horizon = cfg.horizon;
  trace.generator = "shifting";
  trace.seed = seed;
  trace.losses.resize(cfg.horizon, n);
  trace.constraints.resize(cfg.horizon, n);

  CounterRng noise(seed, 1);
  for (std::int64_t t = 0; t < cfg.horizon; ++t) {
    const std::int64_t shifts = std::min<std::int64_t>(t / cfg.window, cfg.repetitions);
    const std::int64_t offset = (shifts * cfg.shift) % n;
    for (int a = 0; a < n; ++a) {
      const auto src = static_cast<Eigen::Index>(((a - offset) % n + n) % n);
      double f = base_loss(src);
      double g = base_constraint(src);
      if (cfg.noise_std > 0) {
        f += cfg.noise_std * noise.normal();
        g += cfg.noise_std * noise.normal();
      }
      trace.losses(t, a) = clip_or_reject(f, 0.0, 1.0, cfg.clip, "loss", t, a);
      trace.constraints(t, a) = clip_or_reject(g, -1.0, 1.0, cfg.clip, "constraint", t, a);
    }
  }

  const double margin = slater_margin(trace);
  trace.metadata["window"] = std::to_string(cfg.window);
  trace.metadata["shift"] = std::to_string(cfg.shift);
  trace.metadata["repetitions"] = std::to_string(cfg.repetitions);
  trace.metadata["noise_std"] = format_double(cfg.noise_std);
  trace.metadata["indicator_convention"] = cfg.zero_based_indicator ? "zero_based" : "one_based";
  trace.metadata["indicator_threshold"] = std::to_string(threshold);
  trace.metadata["loss_rescale"] = "affine [1,2] -> [0,1], then clip";
  trace.metadata["constraint_truncation"] = "clip to [-1,1] (stated truncation [-1e3, inf) is implied)";
  trace.metadata["rho_hat"] = format_double(margin);

  if (!cfg.allow_infeasible && !(margin > std::max(0.0, cfg.rho_target)))
    throw InfeasibleError(fmt::format("generated trace has Slater margin {} (needs > {})", margin,
                                      std::max(0.0, cfg.rho_target)));
  validate(trace);
  return trace;
}

Trace generate_stationary_trace(const Eigen::Ref<const Eigen::VectorXd> &losses,
                                const Eigen::Ref<const Eigen::VectorXd> &constraints, std::int64_t horizon)
{
  if (losses.size() != constraints.size())
    throw ValidationError("stationary trace: loss and constraint vectors differ in length");
  Trace trace;
  trace.n = static_cast<int>(losses.size());
  trace.horizon = horizon;
  trace.generator = "stationary";
  trace.losses = losses.transpose().replicate(horizon, 1);
  trace.constraints = constraints.transpose().replicate(horizon, 1);
  validate(trace);
  trace.metadata["rho_hat"] = format_double(slater_margin(trace));
  return trace;
}

FixtureKind parse_fixture_kind(const std::string &name)
{
  if (name == "vt_small_pt_large")
    return FixtureKind::vt_small_pt_large;
  if (name == "vt_large_pt_small")
    return FixtureKind::vt_large_pt_small;
  throw ValidationError("unknown fixture kind '" + name + "'");
}

std::string to_string(FixtureKind kind)
{
  return kind == FixtureKind::vt_small_pt_large ? "vt_small_pt_large" : "vt_large_pt_small";
}

Trace generate_incomparability_fixture(FixtureKind kind, std::int64_t horizon, int n, double rho)
{
  if (horizon < 2)
    throw ValidationError("incomparability fixtures need T >= 2");
  if (!(rho > 0 && rho <= 1))
    throw ValidationError("fixture rho must lie in (0, 1]");
  const int min_n = kind == FixtureKind::vt_small_pt_large ? 3 : 2;
  if (n == 0)
    n = min_n;
  if (n < min_n)
    throw ValidationError(fmt::format("{} needs n >= {}", to_string(kind), min_n));

  const double t_count = static_cast<double>(horizon);
  Trace trace;
  trace.n = n;
  trace.horizon = horizon;
  trace.generator = to_string(kind);
  trace.losses.resize(horizon, n);
  trace.constraints = TraceMatrix::Constant(horizon, n, -rho);

  for (std::int64_t t = 0; t < horizon; ++t) {
    const bool even = t % 2 == 0;
    if (kind == FixtureKind::vt_small_pt_large) {
      trace.losses.row(t).setOnes();
      trace.losses(t, 0) = even ? 0.0 : 1.0 / t_count;
      trace.losses(t, 1) = even ? 1.0 / t_count : 0.0;
    } else {
      trace.losses.row(t).setOnes();
      trace.losses(t, 0) = 0.0;
      trace.losses(t, 1) = even ? 1.0 : 0.5;
    }
  }
  if (kind == FixtureKind::vt_small_pt_large) {
    trace.metadata["analytic_P_T"] = format_double(2.0 * (t_count - 1));
    trace.metadata["analytic_V_T"] = format_double((t_count - 1) / t_count);
  } else {
    trace.metadata["analytic_P_T"] = format_double(0.0);
    trace.metadata["analytic_V_T"] = format_double((t_count - 1) / 2.0);
  }
  trace.metadata["rho_hat"] = format_double(rho);
  validate(trace);
  return trace;
}

void write_trace(std::ostream &out, const Trace &trace)
{
  validate(trace);
  if (trace.generator.empty() || trace.generator.find_first_of(" \t\r\n") != std::string::npos)
    throw ValidationError("generator name must be a single non-empty token");
  out << fmt::format("{} {} {} {}\n", trace.n, trace.horizon, trace.generator, trace.seed);
  std::string line;
  for (std::int64_t t = 0; t < trace.horizon; ++t) {
    line.clear();
    for (int a = 0; a < trace.n; ++a) {
      line += format_double(trace.losses(t, a));
      line += ' ';
    }
    for (int a = 0; a < trace.n; ++a) {
      line += format_double(trace.constraints(t, a));
      line += a + 1 < trace.n ? ' ' : '\n';
    }
    out << line;
  }
  if (!out)
    throw std::runtime_error("failed writing trace");
}

void write_trace(const std::filesystem::path &path, const Trace &trace)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_trace(out, trace);
}

namespace {

std::vector<std::string_view> split(std::string_view line)
{
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r'))
      ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r')
      ++i;
    if (i > start)
      fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no, std::size_t column)
{
  T value{};
  const auto *end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end)
    throw ValidationError(
        fmt::format("line {}, column {}: cannot parse '{}' as a number", line_no, column + 1, field));
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(value))
      throw ValidationError(fmt::format("line {}, column {}: non-finite value '{}'", line_no, column + 1, field));
  return value;
}

} // namespace

Trace read_trace(std::istream &in)
{
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError("schema error: empty trace file");
  const auto header = split(line);
  if (header.size() != 4)
    throw ValidationError(
        fmt::format("schema error: header must be 'n T generator seed', found {} fields", header.size()));

  Trace trace;
  trace.n = parse_number<int>(header[0], 1, 0);
  trace.horizon = parse_number<std::int64_t>(header[1], 1, 1);
  trace.generator = std::string(header[2]);
  trace.seed = parse_number<std::uint64_t>(header[3], 1, 3);
  if (trace.n < 2 || trace.horizon < 1)
    throw ValidationError("schema error: header needs n >= 2 and T >= 1");

  const auto columns = static_cast<std::size_t>(2 * trace.n);
  trace.losses.resize(trace.horizon, trace.n);
  trace.constraints.resize(trace.horizon, trace.n);
  for (std::int64_t t = 0; t < trace.horizon; ++t) {
    const std::size_t line_no = static_cast<std::size_t>(t) + 2;
    if (!std::getline(in, line))
      throw ValidationError(fmt::format("schema error: expected {} data lines, file ends after {}", trace.horizon, t));
    const auto fields = split(line);
    if (fields.size() != columns)
      throw ValidationError(fmt::format("schema error: line {} has {} columns, expected {} ({} losses + {} constraints)",
                                        line_no, fields.size(), columns, trace.n, trace.n));
    for (int a = 0; a < trace.n; ++a) {
      const double f = parse_number<double>(fields[static_cast<std::size_t>(a)], line_no, static_cast<std::size_t>(a));
      const double g = parse_number<double>(fields[static_cast<std::size_t>(a + trace.n)], line_no,
                                            static_cast<std::size_t>(a + trace.n));
      if (!(f >= 0.0 && f <= 1.0))
        throw ValidationError(fmt::format("loss out of [0,1] at (t={}, a={}): {} (line {})", t, a, f, line_no));
      if (!(g >= -1.0 && g <= 1.0))
        throw ValidationError(fmt::format("constraint out of [-1,1] at (t={}, a={}): {} (line {})", t, a, g, line_no));
      trace.losses(t, a) = f;
      trace.constraints(t, a) = g;
    }
  }
  while (std::getline(in, line))
    if (!split(line).empty())
      throw ValidationError(fmt::format("schema error: more than {} data lines", trace.horizon));
  trace.metadata["rho_hat"] = format_double(slater_margin(trace));
  return trace;
}

Trace read_trace(const std::filesystem::path &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ValidationError("cannot open trace file " + path.string());
  return read_trace(in);
}

Trace trace_roundtrip(const Trace &trace, const std::filesystem::path &path)
{
  write_trace(path, trace);
  return read_trace(path);
}

} // namespace bcomd
