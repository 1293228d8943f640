#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "lowformer/bench.hpp"
#include "lowformer/cost.hpp"
#include "lowformer/goldens.hpp"
#include "lowformer/gradcheck.hpp"
#include "lowformer/registry.hpp"

using namespace lowformer;

namespace {

// Exit codes: 0 ok, 1 check failed, 2 usage or lookup error.
constexpr int kFail = 1, kUsage = 2;

struct Options {
  int res = 0, batch = 1, iters = 0, warmup = 5, threads = 0;
  std::uint64_t seed = 0;
  std::string format = "table", out, policy_attn = "on", goldens, experiment;
  double tolerance = 0.03;
  bool dry_run = false;
};

void emit(const Options& o, const std::string& text) {
  if (o.out.empty())
    std::cout << text;
  else
    write_file(o.out, text);
}

std::string millions(long long v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1fM", static_cast<double>(v) / 1e6);
  return buf;
}

std::string registry_listing() {
  std::string s = "Registry ids:\n";
  for (const auto& e : registry()) s += "  " + e.id + "  " + e.description + "\n";
  return s;
}

int cmd_analyze(const Options& o, const std::string& id) {
  CostPolicy policy;
  policy.count_attention_matmuls = o.policy_attn == "on";
  const CostReport r = analyze(build_model(id), o.res, policy);
  if (o.format == "json") {
    emit(o, to_json(r));
  } else if (o.format == "csv") {
    emit(o, to_csv(r));
  } else {
    std::string s;
    char line[256];
    for (const auto& e : r.entries) {
      std::snprintf(line, sizeof line, "%-48s %-16s %14lld %12lld\n", e.name.c_str(), e.out_shape.str().c_str(), e.macs, e.params);
      s += line;
    }
    s += id + " @" + std::to_string(r.resolution) + ": " + millions(r.total_macs) + " MACs (" + std::to_string(r.total_macs) +
         "), " + millions(r.total_params) + " params (" + std::to_string(r.total_params) + ")\n";
    emit(o, s);
  }
  return 0;
}

int cmd_verify(const Options& o, const std::string& suite) {
  CostPolicy policy;
  policy.count_attention_matmuls = o.policy_attn == "on";
  const Goldens g = load_goldens(o.goldens.empty() ? default_goldens_path() : o.goldens);
  const SuiteResult s = verify_suite(g, suite, o.tolerance, policy);
  std::string text;
  char line[256];
  for (const auto& row : s.rows) {
    std::string fields;
    for (const auto& f : row.result.fields) {
      std::snprintf(line, sizeof line, " %s %.2fM vs %.2fM (%+.2f%%)%s", f.field.c_str(), f.actual / 1e6, f.expected / 1e6,
                    f.delta * 100, f.pass ? "" : " FAIL");
      fields += line;
    }
    text += std::string(row.result.pass ? "PASS " : "FAIL ") + row.row.model + ":" + fields + "  [" + row.row.citation + "]\n";
  }
  std::snprintf(line, sizeof line, "%s: %s at tolerance %.2f%%\n", suite.c_str(), s.pass ? "pass" : "FAIL", o.tolerance * 100);
  text += line;
  emit(o, text);
  return s.pass ? 0 : kFail;
}

int cmd_bench(const Options& o, const std::string& id) {
  BenchProtocol p = o.batch >= 200 ? BenchProtocol::throughput() : BenchProtocol::latency();
  p.batch = o.batch;
  if (o.iters > 0) p.iterations = o.iters;
  p.warmup = o.warmup;
  p.threads = o.threads;
  p.seed = o.seed;
  p.resolution = o.res;
  const bool json = o.format == "json";
  if (!o.experiment.empty()) {
    ExperimentOptions eo;
    eo.protocol = p;
    if (o.dry_run)
      eo.runner = [](const std::string&, const ModelGraph&, const BenchProtocol& q) {
        BenchResult r;
        r.protocol = q;
        r.device_label = "dry-run";
        return r;
      };
    const ExperimentTable t = run_experiment(o.experiment, eo);
    emit(o, json ? to_json(t) : to_csv(t));
    return 0;
  }
  if (o.dry_run) throw CLI::ValidationError("--dry-run applies to --experiment only");
  const BenchResult r = measure(build_model(id), p);
  emit(o, json ? to_json(r) : to_csv(r));
  return 0;
}

int cmd_gradcheck(const std::string& target, std::uint64_t seed) {
  const GradcheckResult r = gradcheck(target, seed);
  std::printf("%s %s on %s: max relative error %.3e (tolerance %.0e)\n", r.pass() ? "PASS" : "FAIL", r.target.c_str(),
              r.shape.c_str(), r.max_relative_error, kGradcheckTolerance);
  return r.pass() ? 0 : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cost analysis, verification and benchmarking for LowFormer-family models"};
  app.set_config("--config", "", "Flat key=value file mirroring the long flags; command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();
  app.footer(registry_listing());

  Options o;
  app.add_option("--res", o.res, "Input resolution (default: model default)")->check(CLI::NonNegativeNumber);
  app.add_option("--batch", o.batch, "Batch size (1 latency, 200 throughput)")->check(CLI::PositiveNumber);
  app.add_option("--iters", o.iters, "Timed iterations (default 200 latency, 100 throughput)")->check(CLI::NonNegativeNumber);
  app.add_option("--warmup", o.warmup, "Untimed warm-up iterations")->check(CLI::NonNegativeNumber);
  app.add_option("--threads", o.threads, "Worker threads (0 = LOWFORMER_THREADS or all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", o.seed, "Seed for weights and inputs");
  app.add_option("--format", o.format, "Output format")->check(CLI::IsMember({"table", "csv", "json"}));
  app.add_option("--out", o.out, "Write output to this path instead of stdout");
  app.add_option("--tolerance", o.tolerance, "Relative tolerance for verify")->check(CLI::PositiveNumber);
  app.add_option("--policy-attn", o.policy_attn, "Count attention matmuls")->check(CLI::IsMember({"on", "off"}));
  app.add_option("--goldens", o.goldens, "Golden values file (default: bundled data/goldens.json)");
  app.add_option("--experiment", o.experiment, "Experiment grid for bench")->check(CLI::IsMember(experiment_names()));
  app.add_flag("--dry-run", o.dry_run, "Bench experiments without timing (cost columns only)");

  std::string model, suite, target;
  auto* analyze_cmd = app.add_subcommand("analyze", "Per-layer MACs and parameters of a registry model");
  analyze_cmd->add_option("model", model, "Registry id")->required();
  auto* verify_cmd = app.add_subcommand("verify", "Check a golden suite: table5, table9, table10-11");
  verify_cmd->add_option("suite", suite, "Suite name")->required();
  auto* bench_cmd = app.add_subcommand("bench", "Time a registry model or an experiment grid");
  bench_cmd->add_option("model", model, "Registry id (omit with --experiment)");
  auto* grad_cmd = app.add_subcommand("gradcheck", "Compare vjp with finite differences");
  grad_cmd->add_option("block", target, "lowtention, mbconv, sda or mlp")->required()->check(CLI::IsMember(gradcheck_targets()));
  auto* list_cmd = app.add_subcommand("list-models", "Print every registry id");

  try {
    app.parse(argc, argv);
    if (bench_cmd->parsed() && model.empty() == o.experiment.empty())
      throw CLI::ValidationError("bench takes exactly one of a model id or --experiment");
    if (!o.experiment.empty() && !bench_cmd->parsed()) throw CLI::ValidationError("--experiment applies to bench only");
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kUsage;
  }

  try {
    if (analyze_cmd->parsed()) return cmd_analyze(o, model);
    if (verify_cmd->parsed()) return cmd_verify(o, suite);
    if (bench_cmd->parsed()) return cmd_bench(o, model);
    if (grad_cmd->parsed()) return cmd_gradcheck(target, o.seed);
    if (list_cmd->parsed()) {
      for (const auto& e : registry()) std::cout << e.id << "\n";
      return 0;
    }
  } catch (const UnknownModel& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const GoldenError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFail;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
