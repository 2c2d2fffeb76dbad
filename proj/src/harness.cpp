#include "bcomd/harness.hpp"

#include "bcomd/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace bcomd {

using nlohmann::json;

PolicyKind parse_policy_kind(const std::string &name)
{
  if (name == "bcomd-theorem1")
    return PolicyKind::bcomd_theorem1;
  if (name == "bcomd-manual")
    return PolicyKind::bcomd_manual;
  if (name == "mbcomd")
    return PolicyKind::mbcomd;
  if (name == "exp3")
    return PolicyKind::exp3;
  throw ValidationError("unknown policy '" + name + "' (expected bcomd-theorem1, bcomd-manual, mbcomd or exp3)");
}

std::string to_string(PolicyKind kind)
{
  switch (kind) {
  case PolicyKind::bcomd_theorem1:
    return "bcomd-theorem1";
  case PolicyKind::bcomd_manual:
    return "bcomd-manual";
  case PolicyKind::mbcomd:
    return "mbcomd";
  case PolicyKind::exp3:
    return "exp3";
  }
  return "unknown";
}

std::vector<std::uint64_t> default_seeds()
{
  std::vector<std::uint64_t> seeds(20);
  for (std::size_t i = 0; i < seeds.size(); ++i)
    seeds[i] = i + 1;
  return seeds;
}

namespace {

void reject_unknown_keys(const json &obj, const std::set<std::string> &allowed, const std::string &where)
{
  if (!obj.is_object())
    throw ValidationError("config: '" + where + "' must be a JSON object");
  for (const auto &[key, _] : obj.items())
    if (!allowed.count(key))
      throw ValidationError("config: unknown field '" + key + "' in " + where);
}

template <typename T>
void read_field(const json &obj, const char *key, T &out)
{
  if (!obj.contains(key))
    return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception &e) {
    throw ValidationError(fmt::format("config: field '{}' has the wrong type ({})", key, e.what()));
  }
}

TraceGenConfig generator_from_json(const json &j)
{
  reject_unknown_keys(j, {"n", "horizon", "window", "shift", "repetitions", "noise_std", "rho_target", "clip",
                          "zero_based_indicator", "allow_infeasible"},
                      "trace.generator");
  TraceGenConfig cfg;
  read_field(j, "n", cfg.n);
  read_field(j, "horizon", cfg.horizon);
  read_field(j, "window", cfg.window);
  read_field(j, "shift", cfg.shift);
  read_field(j, "repetitions", cfg.repetitions);
  read_field(j, "noise_std", cfg.noise_std);
  read_field(j, "rho_target", cfg.rho_target);
  read_field(j, "zero_based_indicator", cfg.zero_based_indicator);
  read_field(j, "allow_infeasible", cfg.allow_infeasible);
  std::string clip = "clip";
  read_field(j, "clip", clip);
  if (clip == "clip")
    cfg.clip = ClipMode::clip;
  else if (clip == "reject")
    cfg.clip = ClipMode::reject;
  else
    throw ValidationError("config: trace.generator.clip must be 'clip' or 'reject'");
  validate(cfg);
  return cfg;
}

json generator_to_json(const TraceGenConfig &cfg)
{
  return json{{"n", cfg.n},
              {"horizon", cfg.horizon},
              {"window", cfg.window},
              {"shift", cfg.shift},
              {"repetitions", cfg.repetitions},
              {"noise_std", cfg.noise_std},
              {"rho_target", cfg.rho_target},
              {"clip", cfg.clip == ClipMode::clip ? "clip" : "reject"},
              {"zero_based_indicator", cfg.zero_based_indicator},
              {"allow_infeasible", cfg.allow_infeasible}};
}

MetaConstants meta_from_json(const json &j)
{
  reject_unknown_keys(j, {"eta_meta", "gamma_meta", "gamma", "cap_grid_at_sqrt_length", "expert_stabilizer"},
                      "policy.meta");
  MetaConstants m;
  read_field(j, "eta_meta", m.eta_meta);
  read_field(j, "gamma_meta", m.gamma_meta);
  read_field(j, "gamma", m.gamma);
  read_field(j, "cap_grid_at_sqrt_length", m.cap_grid_at_sqrt_length);
  read_field(j, "expert_stabilizer", m.expert_stabilizer);
  return m;
}

double mean_of(const std::vector<double> &v)
{
  double s = 0;
  for (double x : v)
    s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double> &v)
{
  if (v.size() < 2)
    return 0.0;
  const double m = mean_of(v);
  double ss = 0;
  for (double x : v)
    ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn &&fn)
{
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i)
      fn(i);
    return;
  }
  std::mutex mutex;
  std::size_t next = 0;
  std::exception_ptr failure;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i;
        {
          std::lock_guard lock(mutex);
          if (next >= count || failure)
            return;
          i = next++;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mutex);
          if (!failure)
            failure = std::current_exception();
        }
      }
    });
  for (auto &t : pool)
    t.join();
  if (failure)
    std::rethrow_exception(failure);
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

} // namespace

json to_json(const TraceSource &source)
{
  json j;
  std::visit(
      [&](const auto &s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, TraceGenConfig>)
          j["generator"] = generator_to_json(s);
        else if constexpr (std::is_same_v<S, std::filesystem::path>)
          j["file"] = s.string();
        else if constexpr (std::is_same_v<S, FixtureSpec>)
          j["fixture"] = json{{"kind", to_string(s.kind)}, {"horizon", s.horizon}, {"n", s.n}, {"rho", s.rho}};
        else
          j["stationary"] = json{{"losses", s.losses}, {"constraints", s.constraints}, {"horizon", s.horizon}};
      },
      source.source);
  j["seed"] = source.seed;
  return j;
}

ExperimentConfig config_from_json(const json &doc)
{
  reject_unknown_keys(doc, {"trace", "policy", "rho", "seeds", "output_dir", "emit_expected", "jobs", "label"},
                      "config");
  ExperimentConfig cfg;

  if (doc.contains("trace")) {
    const json &t = doc.at("trace");
    reject_unknown_keys(t, {"generator", "file", "fixture", "stationary", "seed"}, "trace");
    const int kinds = static_cast<int>(t.contains("generator")) + static_cast<int>(t.contains("file")) +
                      static_cast<int>(t.contains("fixture")) + static_cast<int>(t.contains("stationary"));
    if (kinds > 1)
      throw ValidationError("config: trace must name exactly one of generator, file, fixture, stationary");
    read_field(t, "seed", cfg.trace.seed);
    if (t.contains("generator"))
      cfg.trace.source = generator_from_json(t.at("generator"));
    else if (t.contains("file"))
      cfg.trace.source = std::filesystem::path(t.at("file").get<std::string>());
    else if (t.contains("fixture")) {
      const json &f = t.at("fixture");
      reject_unknown_keys(f, {"kind", "horizon", "n", "rho"}, "trace.fixture");
      FixtureSpec spec;
      std::string kind = to_string(spec.kind);
      read_field(f, "kind", kind);
      spec.kind = parse_fixture_kind(kind);
      read_field(f, "horizon", spec.horizon);
      read_field(f, "n", spec.n);
      read_field(f, "rho", spec.rho);
      cfg.trace.source = spec;
    } else if (t.contains("stationary")) {
      const json &s = t.at("stationary");
      reject_unknown_keys(s, {"losses", "constraints", "horizon"}, "trace.stationary");
      StationarySpec spec;
      read_field(s, "losses", spec.losses);
      read_field(s, "constraints", spec.constraints);
      read_field(s, "horizon", spec.horizon);
      cfg.trace.source = spec;
    }
  }

  if (doc.contains("policy")) {
    const json &p = doc.at("policy");
    reject_unknown_keys(p, {"kind", "eta", "mu", "gamma", "omega", "meta"}, "policy");
    std::string kind = to_string(cfg.policy.kind);
    read_field(p, "kind", kind);
    cfg.policy.kind = parse_policy_kind(kind);
    if (p.contains("eta") || p.contains("gamma") || p.contains("mu") || p.contains("omega")) {
      ManualParams m;
      if (!p.contains("eta") || !p.contains("gamma"))
        throw ValidationError("config: manual parameters need at least eta and gamma");
      read_field(p, "eta", m.eta);
      read_field(p, "gamma", m.gamma);
      m.mu = m.eta / 2;
      read_field(p, "mu", m.mu);
      read_field(p, "omega", m.omega);
      cfg.policy.manual = m;
    }
    if (p.contains("meta"))
      cfg.policy.meta = meta_from_json(p.at("meta"));
  }
  if (cfg.policy.kind == PolicyKind::bcomd_manual && !cfg.policy.manual)
    throw ValidationError("config: bcomd-manual needs eta and gamma (mu defaults to eta/2, omega to 0)");

  if (doc.contains("rho")) {
    double rho = 0;
    read_field(doc, "rho", rho);
    cfg.rho = rho;
  }
  cfg.seeds = default_seeds();
  read_field(doc, "seeds", cfg.seeds);
  if (cfg.seeds.empty())
    throw ValidationError("config: at least one seed is required");
  std::string out;
  read_field(doc, "output_dir", out);
  cfg.output_dir = out;
  read_field(doc, "emit_expected", cfg.emit_expected);
  read_field(doc, "jobs", cfg.jobs);
  read_field(doc, "label", cfg.label);
  return cfg;
}

json to_json(const ExperimentConfig &cfg)
{
  json policy{{"kind", to_string(cfg.policy.kind)}};
  if (cfg.policy.manual) {
    policy["eta"] = cfg.policy.manual->eta;
    policy["mu"] = cfg.policy.manual->mu;
    policy["gamma"] = cfg.policy.manual->gamma;
    policy["omega"] = cfg.policy.manual->omega;
  }
  policy["meta"] = json{{"eta_meta", cfg.policy.meta.eta_meta},
                        {"gamma_meta", cfg.policy.meta.gamma_meta},
                        {"gamma", cfg.policy.meta.gamma},
                        {"cap_grid_at_sqrt_length", cfg.policy.meta.cap_grid_at_sqrt_length},
                        {"expert_stabilizer", cfg.policy.meta.expert_stabilizer}};
  json doc{{"trace", to_json(cfg.trace)},
           {"policy", policy},
           {"seeds", cfg.seeds},
           {"output_dir", cfg.output_dir.string()},
           {"emit_expected", cfg.emit_expected},
           {"jobs", cfg.jobs},
           {"label", cfg.label}};
  if (cfg.rho)
    doc["rho"] = *cfg.rho;
  return doc;
}

Trace load_trace(const TraceSource &source)
{
  return std::visit(
      [&](const auto &s) -> Trace {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, TraceGenConfig>)
          return generate_shifting_trace(s, source.seed);
        else if constexpr (std::is_same_v<S, std::filesystem::path>)
          return read_trace(s);
        else if constexpr (std::is_same_v<S, FixtureSpec>)
          return generate_incomparability_fixture(s.kind, s.horizon, s.n, s.rho);
        else {
          const Eigen::Map<const Eigen::VectorXd> f(s.losses.data(), static_cast<Eigen::Index>(s.losses.size()));
          const Eigen::Map<const Eigen::VectorXd> g(s.constraints.data(),
                                                    static_cast<Eigen::Index>(s.constraints.size()));
          return generate_stationary_trace(f, g, s.horizon);
        }
      },
      source.source);
}

PreparedTrace prepare_trace(Trace trace)
{
  validate(trace);
  PreparedTrace p;
  p.comparator = comparator_sequence(trace);
  p.measures = measure(trace, p.comparator);
  p.rho_hat = slater_margin(trace);
  p.trace = std::move(trace);
  return p;
}

double effective_rho(const PreparedTrace &prepared, std::optional<double> rho, PolicyKind kind)
{
  const bool needs_slater = kind == PolicyKind::bcomd_theorem1 || kind == PolicyKind::mbcomd;
  if (needs_slater && !(prepared.rho_hat > 0))
    throw InfeasibleError(fmt::format("Slater check failed: measured margin {} is not positive", prepared.rho_hat));
  if (rho) {
    if (!(*rho > 0 && *rho <= 1))
      throw ValidationError(fmt::format("rho = {} must lie in (0, 1]", *rho));
    if (needs_slater && *rho > prepared.rho_hat + Tolerances::identity)
      throw InfeasibleError(
          fmt::format("Slater check failed: rho = {} exceeds the measured margin {}", *rho, prepared.rho_hat));
    return *rho;
  }
  return prepared.rho_hat > 0 ? std::min(1.0, prepared.rho_hat) : 1.0;
}

RunResult simulate(const PreparedTrace &prepared, const PolicySpec &policy, double rho, std::uint64_t seed)
{
  const auto start = std::chrono::steady_clock::now();
  const Trace &trace = prepared.trace;
  const int n = trace.n;
  const std::int64_t horizon = trace.horizon;

  RunResult result;
  result.seed = seed;
  std::vector<PlayedRound> rounds;
  rounds.reserve(static_cast<std::size_t>(horizon));
  result.expected.reserve(static_cast<std::size_t>(horizon));

  double cum_f = 0, cum_g = 0, cum_cmp = 0;
  auto record_expected = [&](std::int64_t t, const ActionDistribution &x) {
    const double f = trace.losses.row(t).dot(x.transpose());
    const double g = trace.constraints.row(t).dot(x.transpose());
    cum_f += f;
    cum_g += g;
    cum_cmp += prepared.comparator.values(t);
    result.expected.push_back(ExpectedRecord{t + 1, f, g, cum_f, cum_g, cum_f - cum_cmp});
  };

  auto run_single = [&](BcomdPolicy learner) {
    result.params = learner.params();
    for (std::int64_t t = 0; t < horizon; ++t) {
      record_expected(t, learner.distribution());
      const RoundRecord rec = learner.step([&](int a) { return Feedback{trace.losses(t, a), trace.constraints(t, a)}; });
      rounds.push_back(PlayedRound{rec.action, rec.loss, rec.constraint, rec.lambda});
    }
    result.exponent_clamps = learner.exponent_clamps();
  };

  switch (policy.kind) {
  case PolicyKind::bcomd_theorem1: {
    const Regularity reg{prepared.measures.path_length, prepared.measures.temporal_variation};
    run_single(BcomdPolicy(compute_parameters(n, horizon, rho, reg, Theorem1Schedule{}), seed));
    break;
  }
  case PolicyKind::bcomd_manual:
    if (!policy.manual)
      throw ValidationError("bcomd-manual needs manual parameters");
    run_single(BcomdPolicy(compute_parameters(n, horizon, rho, std::nullopt, *policy.manual), seed));
    break;
  case PolicyKind::exp3: {
    ManualParams m;
    if (policy.manual) {
      m = *policy.manual;
    } else {
      m.eta = std::sqrt(2.0 * std::log(static_cast<double>(n)) / (n * static_cast<double>(horizon)));
      m.gamma = std::min(1.0 / n, 1.0 / std::sqrt(static_cast<double>(horizon)));
    }
    run_single(exp3_mode(BcomdPolicy(compute_parameters(n, horizon, rho, std::nullopt, m), seed)));
    break;
  }
  case PolicyKind::mbcomd: {
    MbcomdPolicy meta(n, horizon, rho, seed, policy.meta);
    for (std::int64_t t = 0; t < horizon; ++t) {
      record_expected(t, meta.distribution());
      const MetaRoundRecord rec =
          meta.step([&](int a) { return Feedback{trace.losses(t, a), trace.constraints(t, a)}; });
      rounds.push_back(PlayedRound{rec.action, rec.loss, rec.constraint, rec.lambda_max});
    }
    result.exponent_clamps = meta.exponent_clamps();
    break;
  }
  }

  result.records = evaluate_run(trace, prepared.comparator, rounds);
  if (!result.records.empty()) {
    result.final_regret = result.records.back().regret_prefix;
    result.final_violation = result.records.back().cum_violation;
    result.final_expected_regret = result.expected.back().regret_prefix;
    result.final_expected_violation = result.expected.back().cum_violation;
  }
  for (const RunRecord &r : result.records)
    result.max_lambda = std::max(result.max_lambda, r.lambda);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (result.exponent_clamps > 0)
    fmt::print(stderr, "warning: seed {}: {} exponent clamps during the run\n", seed, result.exponent_clamps);
  return result;
}

std::filesystem::path run_csv_path(const std::filesystem::path &dir, std::uint64_t seed)
{
  return dir / fmt::format("run_seed{}.csv", seed);
}

void write_run_csv(const std::filesystem::path &path, const std::vector<RunRecord> &records)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  std::string buf = std::string(run_csv_header) + "\n";
  for (const RunRecord &r : records) {
    buf += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.t, r.action + 1, num(r.loss), num(r.constraint), num(r.lambda),
                       num(r.cum_loss), num(r.cum_violation), num(r.comparator_value), num(r.regret_prefix));
    if (buf.size() > (1u << 20)) {
      out << buf;
      buf.clear();
    }
  }
  out << buf;
  if (!out)
    throw std::runtime_error("failed writing " + path.string());
}

std::vector<RunRecord> read_run_csv(const std::filesystem::path &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ValidationError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != run_csv_header)
    throw ValidationError("run CSV " + path.string() + " has an unexpected header");
  std::vector<RunRecord> records;
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ','))
      cells.push_back(cell);
    if (cells.size() != 9)
      throw ValidationError(fmt::format("run CSV line {} has {} columns", records.size() + 2, cells.size()));
    RunRecord r;
    r.t = std::stoll(cells[0]);
    r.action = std::stoi(cells[1]) - 1;
    r.loss = std::stod(cells[2]);
    r.constraint = std::stod(cells[3]);
    r.lambda = std::stod(cells[4]);
    r.cum_loss = std::stod(cells[5]);
    r.cum_violation = std::stod(cells[6]);
    r.comparator_value = std::stod(cells[7]);
    r.regret_prefix = std::stod(cells[8]);
    records.push_back(r);
  }
  return records;
}

void write_expected_csv(const std::filesystem::path &path, const std::vector<ExpectedRecord> &records)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "t,expected_loss,expected_constraint,cum_expected_loss,cum_expected_violation,expected_regret_prefix\n";
  for (const ExpectedRecord &r : records)
    out << fmt::format("{},{},{},{},{},{}\n", r.t, num(r.loss), num(r.constraint), num(r.cum_loss),
                       num(r.cum_violation), num(r.regret_prefix));
}

ExperimentSummary run_experiment(const ExperimentConfig &config)
{
  return run_experiment(config, prepare_trace(load_trace(config.trace)));
}

ExperimentSummary run_experiment(const ExperimentConfig &config, const PreparedTrace &prepared)
{
  if (config.seeds.empty())
    throw ValidationError("experiment needs at least one seed");
  const auto start = std::chrono::steady_clock::now();
  ExperimentSummary summary;
  summary.label = config.label;
  summary.measures = prepared.measures;
  summary.rho_hat = prepared.rho_hat;
  summary.rho = effective_rho(prepared, config.rho, config.policy.kind);

  if (!config.output_dir.empty())
    std::filesystem::create_directories(config.output_dir);

  summary.runs.resize(config.seeds.size());
  parallel_for(config.seeds.size(), config.jobs, [&](std::size_t i) {
    RunResult r = simulate(prepared, config.policy, summary.rho, config.seeds[i]);
    if (!config.output_dir.empty()) {
      write_run_csv(run_csv_path(config.output_dir, r.seed), r.records);
      if (config.emit_expected)
        write_expected_csv(config.output_dir / fmt::format("run_seed{}_expected.csv", r.seed), r.expected);
    }
    summary.runs[i] = std::move(r);
  });

  std::vector<double> regrets, violations;
  for (const RunResult &r : summary.runs) {
    regrets.push_back(r.final_regret);
    violations.push_back(r.final_violation);
  }
  summary.mean_regret = mean_of(regrets);
  summary.se_regret = stderr_of(regrets);
  summary.mean_violation = mean_of(violations);
  summary.se_violation = stderr_of(violations);
  summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (!config.output_dir.empty()) {
    std::ofstream out(config.output_dir / "summary.json", std::ios::binary);
    out << to_json(summary).dump(2) << "\n";
  }
  return summary;
}

json to_json(const ExperimentSummary &s)
{
  json runs = json::array();
  for (const RunResult &r : s.runs)
    runs.push_back(json{{"seed", r.seed},
                        {"final_regret", r.final_regret},
                        {"final_violation", r.final_violation},
                        {"max_lambda", r.max_lambda},
                        {"final_expected_regret", r.final_expected_regret},
                        {"final_expected_violation", r.final_expected_violation},
                        {"omega", r.params.omega},
                        {"eta", r.params.eta},
                        {"mu", r.params.mu},
                        {"gamma", r.params.gamma},
                        {"exponent_clamps", r.exponent_clamps},
                        {"wall_seconds", r.seconds}});
  return json{{"label", s.label},
              {"P_T", s.measures.path_length},
              {"V_T", s.measures.temporal_variation},
              {"rho_hat", s.rho_hat},
              {"rho", s.rho},
              {"mean_regret", s.mean_regret},
              {"se_regret", s.se_regret},
              {"mean_violation", s.mean_violation},
              {"se_violation", s.se_violation},
              {"wall_seconds", s.seconds},
              {"runs", runs}};
}

SweepTable sweep(const std::vector<ExperimentConfig> &grid, double violation_threshold)
{
  if (grid.empty())
    throw ValidationError("sweep: empty grid");
  SweepTable table;
  table.violation_threshold = violation_threshold;

  // Configs that share a trace source share its comparator computation.
  std::map<std::string, std::shared_ptr<const PreparedTrace>> cache;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const ExperimentConfig &cfg = grid[i];
    const std::string label = cfg.label.empty() ? fmt::format("config{}", i) : cfg.label;
    SweepAggregate agg;
    agg.config_index = i;
    agg.label = label;
    try {
      const std::string key = to_json(cfg.trace).dump();
      auto it = cache.find(key);
      if (it == cache.end())
        it = cache.emplace(key, std::make_shared<const PreparedTrace>(prepare_trace(load_trace(cfg.trace)))).first;
      const ExperimentSummary s = run_experiment(cfg, *it->second);
      for (const RunResult &r : s.runs)
        table.rows.push_back(SweepRow{i, label, r.seed, true, "", r.final_regret, r.final_violation, r.max_lambda});
      agg.seeds = s.runs.size();
      agg.mean_regret = s.mean_regret;
      agg.se_regret = s.se_regret;
      agg.mean_violation = s.mean_violation;
      agg.se_violation = s.se_violation;
    } catch (const std::exception &e) {
      agg.ok = false;
      agg.error = e.what();
      for (std::uint64_t seed : cfg.seeds)
        table.rows.push_back(SweepRow{i, label, seed, false, e.what(), 0, 0, 0});
    }
    table.aggregates.push_back(agg);
  }

  for (std::size_t i = 0; i < table.aggregates.size(); ++i) {
    const SweepAggregate &a = table.aggregates[i];
    if (!a.ok || a.mean_violation > violation_threshold)
      continue;
    if (!table.best || a.mean_regret < table.aggregates[*table.best].mean_regret)
      table.best = i;
  }
  return table;
}

std::vector<ExperimentConfig> sweep_configs_from_json(const json &doc)
{
  reject_unknown_keys(doc, {"configs", "base", "grid", "violation_threshold"}, "sweep");
  std::vector<ExperimentConfig> configs;
  if (doc.contains("configs")) {
    for (const json &c : doc.at("configs"))
      configs.push_back(config_from_json(c));
    return configs;
  }
  if (!doc.contains("base") || !doc.contains("grid"))
    throw ValidationError("sweep: need either 'configs' or both 'base' and 'grid'");
  const json &grid = doc.at("grid");
  reject_unknown_keys(grid, {"eta", "gamma"}, "sweep.grid");
  std::vector<double> etas, gammas;
  read_field(grid, "eta", etas);
  read_field(grid, "gamma", gammas);
  if (etas.empty() || gammas.empty())
    throw ValidationError("sweep: grid needs non-empty eta and gamma lists");
  for (double eta : etas)
    for (double gamma : gammas) {
      ExperimentConfig cfg = config_from_json(doc.at("base"));
      if (cfg.policy.kind == PolicyKind::bcomd_theorem1 || cfg.policy.kind == PolicyKind::mbcomd)
        throw ValidationError("sweep: an eta/gamma grid applies to bcomd-manual or exp3 only");
      cfg.policy.manual = experiment_preset(eta, gamma);
      cfg.label = fmt::format("{}{}eta={} gamma={}", cfg.label, cfg.label.empty() ? "" : ":", eta, gamma);
      if (!cfg.output_dir.empty())
        cfg.output_dir /= fmt::format("eta{}_gamma{}", eta, gamma);
      configs.push_back(std::move(cfg));
    }
  return configs;
}

void write_sweep_csv(const std::filesystem::path &path, const SweepTable &table)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "config,label,seed,status,final_regret,final_violation,max_lambda,error\n";
  for (const SweepRow &r : table.rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    std::string label = r.label;
    std::replace(label.begin(), label.end(), ',', ';');
    out << fmt::format("{},{},{},{},{},{},{},{}\n", r.config_index, label, r.seed, r.ok ? "ok" : "failed",
                       num(r.final_regret), num(r.final_violation), num(r.max_lambda), err);
  }
}

} // namespace bcomd
