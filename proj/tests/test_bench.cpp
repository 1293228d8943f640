#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "json.hpp"
#include "lowformer/bench.hpp"
#include "lowformer/registry.hpp"

using namespace lowformer;

namespace {

double sorted_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

// Advances a fake clock by a repeating pattern on each run and records call order.
class SleepWorkload final : public Workload {
 public:
  SleepWorkload(FakeClock& c, std::vector<double> pattern, double prepare_ms = 0)
      : clock_(c), pattern_(std::move(pattern)), prepare_ms_(prepare_ms) {}
  void prepare(const BenchProtocol&) override {
    ++prepares;
    clock_.advance(prepare_ms_);
  }
  void run() override {
    clock_.advance(pattern_[runs % pattern_.size()]);
    ++runs;
  }
  bool output_finite() const override { return finite; }
  int runs = 0, prepares = 0;
  bool finite = true;

 private:
  FakeClock& clock_;
  std::vector<double> pattern_;
  double prepare_ms_;
};

BenchResult fixed_result(const std::string& id, double latency_ms, int threads = 1) {
  BenchResult r;
  r.config_id = id;
  r.median_latency_ms = latency_ms;
  r.throughput_ips = 1000.0 / latency_ms;
  r.threads = threads;
  r.macs = 100;
  r.params = 10;
  return r;
}

// Deterministic runner: latency proportional to MACs, so relative columns are predictable.
Runner proportional_runner() {
  return [](const std::string&, const ModelGraph& g, const BenchProtocol& p) {
    BenchResult r;
    r.protocol = p;
    r.threads = 1;
    r.median_latency_ms = quantize(static_cast<double>(analyze(g, p.resolution).total_macs) / 1e6);
    r.throughput_ips = quantize(p.batch * 1000.0 / r.median_latency_ms);
    r.device_label = "fake";
    return r;
  };
}

}  // namespace

TEST_CASE("median equals the sorted-order oracle on random multisets") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(1, 64), small(0, 9);
  std::uniform_real_distribution<double> real(-1e3, 1e3);
  int odd = 0, even = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> v(len(rng));
    const bool ties = trial % 3 == 0;
    for (auto& x : v) x = ties ? small(rng) : real(rng);
    (v.size() % 2 ? odd : even)++;
    CHECK(median(v) == sorted_median(v));
  }
  CHECK(odd > 100);
  CHECK(even > 100);
  CHECK_THROWS_AS(median({}), std::invalid_argument);
}

TEST_CASE("quantiles interpolate between order statistics") {
  const std::vector<double> v{4, 1, 3, 2, 5};
  CHECK(quantile(v, 0.0) == 1);
  CHECK(quantile(v, 1.0) == 5);
  CHECK(quantile(v, 0.25) == 2);
  CHECK(interquartile_range(v) == 2);
  CHECK(quantile({1, 2}, 0.5) == 1.5);
  CHECK_THROWS_AS(quantile(v, 1.5), std::invalid_argument);
}

TEST_CASE("fake clock: median of a {3,1,2} sleep pattern is 2") {
  FakeClock clock;
  SleepWorkload w(clock, {3, 1, 2});
  BenchProtocol p{1, 3, 0, 1, 0, 0};
  const auto r = measure(w, p, clock);
  CHECK(r.times_ms == std::vector<double>{3, 1, 2});
  CHECK(r.median_latency_ms == 2);
  CHECK(r.iqr_ms == 1);
  CHECK(r.throughput_ips == 500);
}

TEST_CASE("warm-up runs execute but are never timed") {
  FakeClock clock;
  // Warm-up runs sleep 1000 ms; a leak into the sample would dominate the median.
  SleepWorkload w(clock, {1000, 1000, 1000, 1000, 1000, 7, 7, 7});
  BenchProtocol p{1, 3, 5, 1, 0, 0};
  const auto r = measure(w, p, clock);
  CHECK(w.runs == 8);
  CHECK(clock.reads() == 6);
  CHECK(r.times_ms.size() == 3);
  CHECK(r.median_latency_ms == 7);
}

TEST_CASE("prepare is excluded from timing") {
  FakeClock clock;
  SleepWorkload w(clock, {2}, 500);
  const auto r = measure(w, {1, 4, 1, 1, 0, 0}, clock);
  CHECK(w.prepares == 1);
  CHECK(r.median_latency_ms == 2);
  CHECK(*std::max_element(r.times_ms.begin(), r.times_ms.end()) == 2);
}

TEST_CASE("throughput = batch * 1000 / median latency") {
  FakeClock clock;
  SleepWorkload w(clock, {50});
  const auto r = measure(w, {200, 5, 0, 1, 0, 0}, clock);
  CHECK(r.throughput_ips == 4000);
  for (double ms : {0.37, 1.0, 12.5, 333.3}) {
    FakeClock c;
    SleepWorkload s(c, {ms});
    const auto q = measure(s, {7, 3, 0, 1, 0, 0}, c);
    // Emitted values sit on the 1e-6 grid.
    CHECK(std::abs(q.throughput_ips - 7 * 1000.0 / q.median_latency_ms) <= 5e-7 + 1e-12);
  }
}

TEST_CASE("coarse timer flag") {
  FakeClock fine(1e-6), coarse(1.0);
  SleepWorkload a(fine, {10}), b(coarse, {10});
  CHECK_FALSE(measure(a, {1, 3, 0, 1, 0, 0}, fine).coarse_timer);
  CHECK(measure(b, {1, 3, 0, 1, 0, 0}, coarse).coarse_timer);
}

TEST_CASE("protocol validation and non-finite outputs") {
  FakeClock clock;
  SleepWorkload w(clock, {1});
  CHECK_THROWS_AS(measure(w, {0, 3, 0, 1, 0, 0}, clock), std::invalid_argument);
  CHECK_THROWS_AS(measure(w, {1, 0, 0, 1, 0, 0}, clock), std::invalid_argument);
  CHECK_THROWS_AS(measure(w, {1, 3, -1, 1, 0, 0}, clock), std::invalid_argument);
  w.finite = false;
  CHECK_THROWS_AS(measure(w, {1, 3, 1, 1, 0, 0}, clock), NonFiniteOutput);
  CHECK(BenchProtocol::latency().batch == 1);
  CHECK(BenchProtocol::latency().iterations == 200);
  CHECK(BenchProtocol::throughput().batch == 200);
  CHECK(BenchProtocol::throughput().iterations == 100);
  CHECK(BenchProtocol::throughput().warmup == 5);
}

TEST_CASE("measuring a model fills cost columns and is output-deterministic") {
  const auto g = build_model("toy-grouping-2");
  FakeClock clock;
  BenchProtocol p{1, 2, 1, 1, 11, 0};
  const auto a = measure(g, p, &clock), b = measure(g, p, &clock);
  CHECK(a.config_id == "toy-grouping-2");
  CHECK(a.macs == analyze(g).total_macs);
  CHECK(a.params == analyze(g).total_params);
  CHECK(a.resolution == g.resolution);
  CHECK(a.output_digest == b.output_digest);
  CHECK(a.output_digest != 0);
  p.seed = 12;
  CHECK(measure(g, p, &clock).output_digest != a.output_digest);
  CHECK_FALSE(a.device_label.empty());
  CHECK(a.device_label.find(',') == std::string::npos);
}

TEST_CASE("relative report refuses mismatched thread counts") {
  const auto a = fixed_result("a", 4.0, 4), b = fixed_result("b", 2.0, 1);
  CHECK_THROWS_AS(relative_report(a, b), std::invalid_argument);
  const auto rel = relative_report(a, b, true);
  CHECK(rel[0].metric == "latency_ms");
  CHECK(rel[0].ratio == 2.0);
  CHECK(rel[1].ratio == 0.5);
  CHECK(relative_report(a, fixed_result("c", 1.0, 4))[0].ratio == 4.0);
}

TEST_CASE("CSV and JSON emission is byte-stable and round-trips") {
  ExperimentOptions o;
  o.runner = proportional_runner();
  const auto t = run_experiment("res_vs_chan", o);
  const std::string csv = to_csv(t), json = to_json(t);
  CHECK(csv == to_csv(run_experiment("res_vs_chan", o)));
  CHECK(json == to_json(run_experiment("res_vs_chan", o)));
  const auto back = parse_csv(csv);
  CHECK(to_csv(back) == csv);
  REQUIRE(back.rows.size() == t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    CHECK(back.rows[i].result.median_latency_ms == t.rows[i].result.median_latency_ms);
    CHECK(back.rows[i].extra == t.rows[i].extra);
  }
  const auto j = nlohmann::json::parse(json);
  CHECK(j["rows"].size() == t.rows.size());
  CHECK(j["protocol"]["statistic"] == "median");
  CHECK(j["rows"][0]["macs"].get<long long>() == t.rows[0].result.macs);
  CHECK(to_csv(fixed_result("x", 3.0)) == to_csv(fixed_result("x", 3.0)));
  CHECK(nlohmann::json::parse(to_json(fixed_result("x", 3.0)))["config_id"] == "x");
}

TEST_CASE("CSV header and empty tables") {
  ExperimentTable empty;
  std::string expected;
  for (const auto& c : csv_columns()) expected += (expected.empty() ? "" : ",") + c;
  CHECK(to_csv(empty) == expected + "\n");
  CHECK(parse_csv(to_csv(empty)).rows.empty());
  CHECK_THROWS_AS(parse_csv("a,b,c\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_csv(""), std::invalid_argument);
}

TEST_CASE("experiment grids have the expected structure") {
  ExperimentOptions o;
  o.runner = proportional_runner();
  CHECK(run_experiment("grouping", o).rows.size() == 6);
  CHECK(run_experiment("res_vs_chan", o).rows.size() == 14);
  CHECK(run_experiment("mbconv_sweep", o).rows.size() == 54);
  CHECK(run_experiment("attention", o).rows.size() == 16);
  CHECK_THROWS_AS(run_experiment("nope", o), std::invalid_argument);
  o.only = {mbconv_probe_id(64, 56, true)};
  CHECK(run_experiment("mbconv_sweep", o).rows.size() == 2);
}

TEST_CASE("cost columns come from the analyzer regardless of the runner") {
  ExperimentOptions o;
  o.runner = [](const std::string&, const ModelGraph&, const BenchProtocol&) {
    BenchResult r;
    r.macs = 1;
    r.params = 1;
    r.median_latency_ms = 1;
    r.throughput_ips = 1000;
    return r;
  };
  for (const auto& name : experiment_names())
    for (const auto& row : run_experiment(name, o).rows) {
      const auto cost = analyze(build_model(row.result.config_id));
      CHECK(row.result.macs == cost.total_macs);
      CHECK(row.result.params == cost.total_params);
    }
}

TEST_CASE("fused rows report fused divided by unfused") {
  ExperimentOptions o;
  o.runner = proportional_runner();
  const auto t = run_experiment("mbconv_sweep", o);
  for (std::size_t i = 0; i < t.rows.size(); i += 2) {
    const auto& f = t.rows[i];
    const auto& u = t.rows[i + 1];
    REQUIRE(f.extra[1] == 1.0);
    REQUIRE(u.extra[1] == 0.0);
    CHECK(f.extra[2] == quantize(double(f.result.macs) / double(u.result.macs)));
    CHECK(f.extra[2] > 1.0);
    CHECK(u.extra[2] < 1.0);
    CHECK(f.extra[3] == quantize(f.result.median_latency_ms / u.result.median_latency_ms));
    CHECK(f.extra[4] == quantize(f.result.throughput_ips / u.result.throughput_ips));
  }
}

TEST_CASE("attention deltas are relative to mhsa at the same resolution") {
  ExperimentOptions o;
  o.runner = proportional_runner();
  const auto t = run_experiment("attention", o);
  for (std::size_t i = 0; i < t.rows.size(); i += 4) {
    CHECK(t.rows[i].result.config_id.find("mhsa") != std::string::npos);
    CHECK(t.rows[i].extra[0] == 0.0);
    // chcompr halves every MAC of the stack.
    CHECK(t.rows[i + 1].extra[0] == doctest::Approx(-50.0));
    for (std::size_t k = 1; k < 4; ++k) CHECK(t.rows[i + k].extra[0] < 0);
  }
}
