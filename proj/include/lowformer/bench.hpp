#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "lowformer/cost.hpp"
#include "lowformer/model.hpp"

namespace lowformer {

struct BenchProtocol {
  int batch = 1;
  int iterations = 200;
  int warmup = 5;
  int threads = 0;  // 0 = all available
  std::uint64_t seed = 0;
  int resolution = 0;  // 0 = model default

  static BenchProtocol latency() { return {1, 200, 5, 0, 0, 0}; }
  static BenchProtocol throughput() { return {200, 100, 5, 0, 0, 0}; }
  void validate() const;
};

class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now_ms() = 0;
  virtual double resolution_ms() const = 0;
};

class SteadyClock final : public Clock {
 public:
  double now_ms() override;
  double resolution_ms() const override;
};

// Manually advanced clock; counts reads so tests can audit what was timed.
class FakeClock final : public Clock {
 public:
  explicit FakeClock(double resolution = 1e-6) : resolution_(resolution) {}
  double now_ms() override {
    ++reads_;
    return t_;
  }
  double resolution_ms() const override { return resolution_; }
  void advance(double ms) { t_ += ms; }
  int reads() const { return reads_; }

 private:
  double t_ = 0, resolution_;
  int reads_ = 0;
};

// One forward pass per run(); prepare() runs once, untimed, before warm-up.
class Workload {
 public:
  virtual ~Workload() = default;
  virtual void prepare(const BenchProtocol&) {}
  virtual void run() = 0;
  virtual bool output_finite() const { return true; }
  virtual std::uint64_t output_digest() const { return 0; }
};

// Materialized model with an input tensor generated in prepare().
class ModelWorkload final : public Workload {
 public:
  explicit ModelWorkload(std::shared_ptr<const ModelGraph> graph, std::uint64_t seed = 0);
  void prepare(const BenchProtocol& p) override;
  void run() override;
  bool output_finite() const override;
  std::uint64_t output_digest() const override;  // FNV-1a over the output bytes
  const Model& model() const { return model_; }

 private:
  Model model_;
  Tensor input_, output_;
};

struct NonFiniteOutput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BenchResult {
  std::string config_id;
  int resolution = 0;
  long long macs = 0, params = 0;
  BenchProtocol protocol;
  int threads = 1;  // actually used
  std::vector<double> times_ms;
  double median_latency_ms = 0, iqr_ms = 0, throughput_ips = 0;
  bool coarse_timer = false;  // clock resolution above 1% of the median
  std::string device_label;
  std::uint64_t output_digest = 0;
};

// Order statistics over a copy of v; even counts average the two central values.
double median(std::vector<double> v);
// Linear interpolation between order statistics at (n - 1) * q.
double quantile(std::vector<double> v, double q);
double interquartile_range(const std::vector<double>& v);
// Rounds to the 1e-6 grid used by every emitted decimal, so emission round-trips exactly.
double quantize(double v);

std::string default_device_label();

// Holds a process-wide lock for the duration; timed sections never overlap.
BenchResult measure(Workload& w, const BenchProtocol& p, Clock& clock);
BenchResult measure(const ModelGraph& g, const BenchProtocol& p, Clock* clock = nullptr);

// a/b for latency, throughput, MACs and params. Refuses differing thread counts unless forced.
std::vector<RatioRow> relative_report(const BenchResult& a, const BenchResult& b, bool force = false);

// ---- experiments ----

struct ExperimentRow {
  BenchResult result;
  std::vector<double> extra;  // one value per ExperimentTable::extra_columns
};

struct ExperimentTable {
  std::string name;
  BenchProtocol protocol;
  std::string device_label;
  std::vector<std::string> extra_columns;
  std::vector<ExperimentRow> rows;
};

using Runner = std::function<BenchResult(const std::string& config_id, const ModelGraph&, const BenchProtocol&)>;

struct ExperimentOptions {
  BenchProtocol protocol;
  std::vector<std::string> only;  // restrict to these config ids; empty = whole grid
  Runner runner;                  // default: measure() on the host clock
};

const std::vector<std::string>& experiment_names();
// grouping, mbconv_sweep, res_vs_chan, attention. Throws std::invalid_argument otherwise.
ExperimentTable run_experiment(const std::string& name, const ExperimentOptions& options = {});

std::vector<std::string> csv_columns();
std::string to_csv(const ExperimentTable& t);
std::string to_json(const ExperimentTable& t);
std::string to_csv(const BenchResult& r);
std::string to_json(const BenchResult& r);
// Inverse of to_csv(ExperimentTable) for the tabulated fields.
ExperimentTable parse_csv(const std::string& csv);

void write_file(const std::string& path, const std::string& content);

}  // namespace lowformer
