#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "oracles.hpp"
#include "rankgauntlet/config.hpp"
#include "rankgauntlet/error.hpp"
#include "rankgauntlet/sim.hpp"

namespace rankgauntlet::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

bool is_config_error(const Error& e) {
  return e.code() == ErrorCode::kInvalidConfig || e.code() == ErrorCode::kParseError ||
         e.code() == ErrorCode::kInvalidZeta || e.code() == ErrorCode::kInvalidSparsity ||
         e.code() == ErrorCode::kInvalidArchitecture;
}

std::string fixed(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

struct PointResult {
  std::string dir;
  MetricsReport report;
};

// Runs one resolved config and writes its directory.
PointResult execute(const ConfigMap& resolved, const ExperimentConfig& cfg, const std::string& out_root) {
  const auto start = std::chrono::steady_clock::now();
  PointResult res;
  res.report = run_experiment(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const std::string hash = config_hash(resolved);
  const fs::path dir = fs::path(out_root) / hash;
  fs::create_directories(dir);
  res.dir = dir.string();
  {
    std::ofstream os(dir / "rounds.csv");
    write_rounds_csv(os, res.report.attacked);
  }
  if (cfg.attack != AttackKind::kNone) {
    std::ofstream os(dir / "benign_rounds.csv");
    write_rounds_csv(os, res.report.benign);
  }
  {
    std::ofstream os(dir / "summary.txt");
    write_summary(os, res.report);
  }
  {
    std::ofstream os(dir / "config.ini");
    write_config(os, resolved);
  }
  {
    std::ofstream os(dir / "manifest.txt");
    os << "config_hash=" << hash << '\n'
       << "artifact_version=" << kVersion << '\n'
       << "seed=" << cfg.seed << '\n'
       << "output_dir=" << dir.string() << '\n'
       << "duration_seconds=" << std::fixed << std::setprecision(3) << secs << '\n';
    for (const auto& [k, v] : resolved) os << "config." << k << '=' << v << '\n';
  }
  return res;
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_config_error(e) ? kConfigError : kRuntimeError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

}  // namespace

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  ConfigMap resolved;
  ExperimentConfig cfg;
  const int rc = guarded(err, [&] {
    resolved = resolve_config(opts.config, opts.overrides, std::getenv("RANKGAUNTLET_SEED"));
    cfg = to_experiment(resolved);
    return 0;
  });
  if (rc != 0) return kConfigError;
  return guarded(err, [&] {
    const auto res = execute(resolved, cfg, opts.out);
    out << "wrote " << res.dir << '\n' << "phi=" << fixed(res.report.phi) << '\n';
    return 0;
  });
}

int cmd_sweep(const RunOptions& opts, const std::string& axis, const std::vector<std::string>& values, int jobs,
              std::ostream& out, std::ostream& err) {
  if (values.empty()) {
    err << "error: sweep needs at least one value\n";
    return kConfigError;
  }
  if (jobs < 1) {
    err << "error: --jobs must be >= 1\n";
    return kConfigError;
  }
  ConfigMap base;
  std::vector<ConfigMap> points;
  std::vector<ExperimentConfig> cfgs;
  const int rc = guarded(err, [&] {
    base = resolve_config(opts.config, opts.overrides, std::getenv("RANKGAUNTLET_SEED"));
    for (const auto& v : values) {
      ConfigMap p = base;
      apply_override(p, axis + "=" + v);
      cfgs.push_back(to_experiment(p));
      points.push_back(std::move(p));
    }
    return 0;
  });
  if (rc != 0) return kConfigError;

  std::vector<std::optional<MetricsReport>> reports(points.size());
  std::vector<std::string> failures(points.size());
  std::size_t next = 0;
  std::mutex lock;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> g(lock);
        if (next >= points.size()) return;
        i = next++;
      }
      try {
        reports[i] = execute(points[i], cfgs[i], opts.out).report;
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 0; j < std::min<int>(jobs, static_cast<int>(points.size())); ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (!failures[i].empty()) {
      err << "error: " << axis << '=' << values[i] << ": " << failures[i] << '\n';
      return kRuntimeError;
    }
  }
  return guarded(err, [&] {
    const fs::path dir = fs::path(opts.out) / ("sweep-" + config_hash(base));
    fs::create_directories(dir);
    std::ofstream os(dir / "sweep.csv");
    os << "value,phi,rho,est_acc\n";
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto& r = *reports[i];
      os << values[i] << ',' << fixed(r.phi) << ',' << fixed(r.mean_rho) << ','
         << (r.mean_est_acc ? fixed(*r.mean_est_acc) : std::string()) << '\n';
    }
    out << "wrote " << (dir / "sweep.csv").string() << '\n';
    return 0;
  });
}

int cmd_verify(std::uint64_t seed, std::ostream& out) {
  const auto results = oracle::run_suite(seed);
  bool ok = true;
  out << std::left << std::setw(11) << "family" << std::setw(8) << "result" << std::setw(7) << "cases"
      << "detail\n";
  for (const auto& r : results) {
    ok = ok && r.passed();
    out << std::left << std::setw(11) << r.family << std::setw(8) << (r.passed() ? "PASS" : "FAIL") << std::setw(7)
        << r.instances << r.check << (r.detail.empty() ? "" : " (" + r.detail + ")") << "\n";
  }
  out << (ok ? "all oracles passed\n" : "oracle failures\n");
  return ok ? 0 : 1;
}

int main(int argc, char** argv) {
  CLI::App app{"Federated ranking learning simulator"};
  app.require_subcommand(1);

  RunOptions run_opts;
  std::string config_path;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "INI config file");
    sub->add_option("--set", run_opts.overrides, "override, key=value (repeatable)");
    sub->add_option("--out", run_opts.out, "output root directory");
  };

  auto* run = app.add_subcommand("run", "run one paired experiment");
  add_common(run);

  auto* sweep = app.add_subcommand("sweep", "run one experiment per axis value");
  add_common(sweep);
  std::string axis;
  std::string values_text;
  int jobs = 1;
  sweep->add_option("--axis", axis, "config key to vary")->required();
  sweep->add_option("--values", values_text, "comma-separated values")->required();
  sweep->add_option("--jobs", jobs, "concurrent points");

  auto* verify = app.add_subcommand("verify", "run the embedded oracle suite");
  std::uint64_t verify_seed = 7;
  verify->add_option("--seed", verify_seed, "oracle instance seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }
  if (!config_path.empty()) run_opts.config = config_path;

  if (run->parsed()) return cmd_run(run_opts, std::cout, std::cerr);
  if (sweep->parsed()) {
    std::vector<std::string> values;
    std::stringstream ss(values_text);
    std::string v;
    while (std::getline(ss, v, ','))
      if (!v.empty()) values.push_back(v);
    return cmd_sweep(run_opts, axis, values, jobs, std::cout, std::cerr);
  }
  return cmd_verify(verify_seed, std::cout);
}

}  // namespace rankgauntlet::cli
