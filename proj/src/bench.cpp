#include "lowformer/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include "json.hpp"
#include "lowformer/parallel.hpp"
#include "lowformer/registry.hpp"
#include "lowformer/simd.hpp"

namespace lowformer {

void BenchProtocol::validate() const {
  if (batch < 1) throw std::invalid_argument("batch must be >= 1");
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (warmup < 0) throw std::invalid_argument("warmup must be >= 0");
  if (threads < 0) throw std::invalid_argument("threads must be >= 0");
  if (resolution < 0) throw std::invalid_argument("resolution must be >= 0");
}

double SteadyClock::now_ms() {
  using namespace std::chrono;
  return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

double SteadyClock::resolution_ms() const {
  using P = std::chrono::steady_clock::period;
  return 1e3 * static_cast<double>(P::num) / static_cast<double>(P::den);
}

ModelWorkload::ModelWorkload(std::shared_ptr<const ModelGraph> graph, std::uint64_t seed)
    : model_(materialize(std::move(graph), seed)) {}

void ModelWorkload::prepare(const BenchProtocol& p) {
  input_ = random_tensor<float>(model_.graph->input_shape(p.batch, p.resolution), p.seed + 1);
}

void ModelWorkload::run() { output_ = forward(model_, input_); }

bool ModelWorkload::output_finite() const { return output_.all_finite(); }

std::uint64_t ModelWorkload::output_digest() const {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(output_.data());
  for (std::size_t i = 0; i < output_.size() * sizeof(float); ++i) h = (h ^ bytes[i]) * 1099511628211ULL;
  return h;
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty sample");
  const std::size_t n = v.size(), mid = n / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double hi = v[mid];
  if (n % 2) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + mid);
  return (lo + hi) / 2;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile of empty sample");
  if (q < 0 || q > 1) throw std::invalid_argument("quantile outside [0, 1]");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t i = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(i);
  return i + 1 < v.size() ? v[i] + frac * (v[i + 1] - v[i]) : v[i];
}

double interquartile_range(const std::vector<double>& v) { return quantile(v, 0.75) - quantile(v, 0.25); }

double quantize(double v) {
  if (!std::isfinite(v)) return v;
  return std::round(v * 1e6) / 1e6;
}

std::string default_device_label() {
  std::string label = "host";
  std::ifstream in("/proc/cpuinfo");
  for (std::string line; std::getline(in, line);)
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) label = line.substr(line.find_first_not_of(' ', colon + 1));
      break;
    }
  label += " [" + std::string(simd::name(simd::active())) + "]";
  for (auto& ch : label)
    if (ch == ',' || ch == '"' || ch == '\n') ch = ';';
  return label;
}

namespace {

std::mutex& measure_lock() {
  static std::mutex m;
  return m;
}

}  // namespace

BenchResult measure(Workload& w, const BenchProtocol& p, Clock& clock) {
  p.validate();
  std::lock_guard<std::mutex> lock(measure_lock());
  ThreadScope pin(p.threads > 0 ? p.threads : num_threads());
  BenchResult r;
  r.protocol = p;
  r.resolution = p.resolution;
  r.threads = num_threads();
  w.prepare(p);
  for (int i = 0; i < p.warmup; ++i) {
    w.run();
    if (!w.output_finite()) throw NonFiniteOutput("non-finite output during warm-up run " + std::to_string(i + 1));
  }
  r.times_ms.reserve(p.iterations);
  for (int i = 0; i < p.iterations; ++i) {
    const double t0 = clock.now_ms();
    w.run();
    const double t1 = clock.now_ms();
    r.times_ms.push_back(t1 - t0);
  }
  if (!w.output_finite()) throw NonFiniteOutput("non-finite output");
  r.output_digest = w.output_digest();
  for (auto& t : r.times_ms) t = quantize(t);
  r.median_latency_ms = quantize(median(r.times_ms));
  r.iqr_ms = quantize(interquartile_range(r.times_ms));
  r.throughput_ips = r.median_latency_ms > 0 ? quantize(p.batch * 1000.0 / r.median_latency_ms) : 0.0;
  r.coarse_timer = clock.resolution_ms() > 0.01 * r.median_latency_ms;
  return r;
}

BenchResult measure(const ModelGraph& g, const BenchProtocol& p, Clock* clock) {
  p.validate();
  BenchProtocol q = p;
  if (q.resolution == 0) q.resolution = g.resolution;
  const CostReport cost = analyze(g, q.resolution);
  ModelWorkload w(std::make_shared<const ModelGraph>(g), q.seed);
  SteadyClock steady;
  BenchResult r = measure(w, q, clock ? *clock : steady);
  r.config_id = g.name;
  r.macs = cost.total_macs;
  r.params = cost.total_params;
  r.device_label = default_device_label();
  return r;
}

std::vector<RatioRow> relative_report(const BenchResult& a, const BenchResult& b, bool force) {
  if (a.threads != b.threads && !force)
    throw std::invalid_argument("refusing to compare runs at " + std::to_string(a.threads) + " and " +
                                std::to_string(b.threads) + " threads");
  auto row = [](std::string m, double x, double y) {
    if (y == 0) throw std::domain_error("relative_report: zero denominator for " + m);
    return RatioRow{std::move(m), x, y, x / y};
  };
  return {row("latency_ms", a.median_latency_ms, b.median_latency_ms),
          row("throughput_ips", a.throughput_ips, b.throughput_ips),
          row("macs", static_cast<double>(a.macs), static_cast<double>(b.macs)),
          row("params", static_cast<double>(a.params), static_cast<double>(b.params))};
}

// ---- experiments ----

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> n{"grouping", "mbconv_sweep", "res_vs_chan", "attention"};
  return n;
}

namespace {

double ratio(double a, double b) { return b != 0 ? a / b : std::nan(""); }
double pct_delta(double a, double b) { return b != 0 ? (a - b) / b * 100.0 : std::nan(""); }

struct Planned {
  std::string id;
  std::vector<double> fixed;  // extra columns known before measurement
  int partner = -1;           // index of the row used as the relative reference
};

bool selected(const ExperimentOptions& o, const std::string& id) {
  return o.only.empty() || std::find(o.only.begin(), o.only.end(), id) != o.only.end();
}

}  // namespace

ExperimentTable run_experiment(const std::string& name, const ExperimentOptions& options) {
  options.protocol.validate();
  ExperimentTable t;
  t.name = name;
  t.protocol = options.protocol;
  t.protocol.resolution = 0;  // each toy runs at its own resolution

  std::vector<Planned> plan;
  auto add_pair = [&](const std::string& a, const std::string& b, std::vector<double> fa, std::vector<double> fb) {
    if (!selected(options, a) && !selected(options, b)) return;
    const int i = static_cast<int>(plan.size());
    plan.push_back({a, std::move(fa), i + 1});
    plan.push_back({b, std::move(fb), i});
  };
  enum class Rel { none, partner, vs_mhsa } rel = Rel::none;

  if (name == "grouping") {
    t.extra_columns = {"group", "depthwise", "published_macs_m"};
    for (const auto& toy : grouping_toys()) {
      const std::string id = "toy-grouping-" + std::to_string(toy.id);
      if (selected(options, id))
        plan.push_back({id, {static_cast<double>((toy.id + 1) / 2), toy.depthwise ? 1.0 : 0.0, toy.published_macs_m}});
    }
  } else if (name == "mbconv_sweep") {
    // Relative columns are this row over its partner: fused / unfused on fused rows.
    t.extra_columns = {"channels", "fused", "rel_macs", "rel_latency", "rel_throughput"};
    rel = Rel::partner;
    for (auto [c, r] : mbconv_sweep_grid())
      add_pair(mbconv_probe_id(c, r, true), mbconv_probe_id(c, r, false), {double(c), 1.0}, {double(c), 0.0});
  } else if (name == "res_vs_chan") {
    t.extra_columns = {"scenario", "channels", "rel_macs", "rel_latency", "rel_throughput"};
    rel = Rel::partner;
    int s = 0;
    for (const auto& [a, b] : res_vs_chan_scenarios()) {
      ++s;
      add_pair(conv_stack_id(a.resolution, a.channels), conv_stack_id(b.resolution, b.channels), {double(s), double(a.channels)},
               {double(s), double(b.channels)});
    }
  } else if (name == "attention") {
    t.extra_columns = {"delta_macs_pct", "delta_latency_pct", "delta_throughput_pct"};
    rel = Rel::vs_mhsa;
    for (int r : kAttentionResolutions) {
      const bool any = std::any_of(kAttentionStackKinds.begin(), kAttentionStackKinds.end(),
                                   [&](AttentionKind k) { return selected(options, attention_stack_id(k, r)); });
      if (!any) continue;
      const int base = static_cast<int>(plan.size());
      for (auto k : kAttentionStackKinds) plan.push_back({attention_stack_id(k, r), {}, base});
    }
  } else {
    throw std::invalid_argument("unknown experiment: " + name);
  }

  const Runner runner = options.runner ? options.runner : Runner([](const std::string&, const ModelGraph& g, const BenchProtocol& p) {
    return measure(g, p);
  });
  for (const auto& p : plan) {
    const ModelGraph g = build_model(p.id);
    BenchProtocol proto = t.protocol;
    proto.resolution = g.resolution;
    BenchResult r = runner(p.id, g, proto);
    // Cost columns always come from the analyzer, whatever the runner reports.
    const CostReport cost = analyze(g, proto.resolution);
    r.config_id = p.id;
    r.resolution = proto.resolution;
    r.macs = cost.total_macs;
    r.params = cost.total_params;
    r.protocol = proto;
    t.rows.push_back({std::move(r), p.fixed});
  }
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (rel == Rel::none) continue;
    const BenchResult& a = t.rows[i].result;
    const BenchResult& b = t.rows[plan[i].partner].result;
    auto& x = t.rows[i].extra;
    if (rel == Rel::partner) {
      x.push_back(quantize(ratio(double(a.macs), double(b.macs))));
      x.push_back(quantize(ratio(a.median_latency_ms, b.median_latency_ms)));
      x.push_back(quantize(ratio(a.throughput_ips, b.throughput_ips)));
    } else {
      x.push_back(quantize(pct_delta(double(a.macs), double(b.macs))));
      x.push_back(quantize(pct_delta(a.median_latency_ms, b.median_latency_ms)));
      x.push_back(quantize(pct_delta(a.throughput_ips, b.throughput_ips)));
    }
  }
  if (!t.rows.empty()) t.device_label = t.rows.front().result.device_label;
  for (auto& row : t.rows)
    for (auto& v : row.extra) v = quantize(v);
  return t;
}

// ---- emission ----

std::vector<std::string> csv_columns() {
  return {"config_id", "resolution", "batch", "macs", "params", "median_latency_ms", "iqr_ms", "throughput_ips",
          "device_label", "threads", "seed"};
}

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string csv_row(const BenchResult& r) {
  std::ostringstream os;
  os << r.config_id << ',' << r.resolution << ',' << r.protocol.batch << ',' << r.macs << ',' << r.params << ','
     << fixed6(r.median_latency_ms) << ',' << fixed6(r.iqr_ms) << ',' << fixed6(r.throughput_ips) << ',' << r.device_label
     << ',' << r.threads << ',' << r.protocol.seed;
  return os.str();
}

std::string header(const std::vector<std::string>& extra) {
  std::string h;
  for (const auto& c : csv_columns()) h += (h.empty() ? "" : ",") + c;
  for (const auto& c : extra) h += "," + c;
  return h + "\n";
}

nlohmann::json protocol_json(const BenchProtocol& p) {
  return {{"batch", p.batch}, {"iterations", p.iterations}, {"warmup", p.warmup}, {"threads", p.threads},
          {"seed", p.seed},   {"resolution", p.resolution}, {"statistic", "median"}};
}

// Doubles go through the fixed 6-decimal text so JSON matches the CSV digits exactly.
nlohmann::json num(double v) { return nlohmann::json::parse(std::isfinite(v) ? fixed6(v) : "null"); }

nlohmann::json result_json(const BenchResult& r, bool with_times) {
  nlohmann::json j{{"config_id", r.config_id},
                   {"resolution", r.resolution},
                   {"batch", r.protocol.batch},
                   {"macs", r.macs},
                   {"params", r.params},
                   {"median_latency_ms", num(r.median_latency_ms)},
                   {"iqr_ms", num(r.iqr_ms)},
                   {"throughput_ips", num(r.throughput_ips)},
                   {"device_label", r.device_label},
                   {"threads", r.threads},
                   {"seed", r.protocol.seed}};
  if (with_times) {
    nlohmann::json times = nlohmann::json::array();
    for (double t : r.times_ms) times.push_back(num(t));
    j["times_ms"] = std::move(times);
    j["protocol"] = protocol_json(r.protocol);
    j["coarse_timer"] = r.coarse_timer;
    char digest[32];
    std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(r.output_digest));
    j["output_digest"] = digest;
  }
  return j;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string to_csv(const ExperimentTable& t) {
  std::string s = header(t.extra_columns);
  for (const auto& row : t.rows) {
    s += csv_row(row.result);
    for (double v : row.extra) s += "," + fixed6(v);
    s += "\n";
  }
  return s;
}

std::string to_json(const ExperimentTable& t) {
  nlohmann::json j;
  j["experiment"] = t.name;
  j["device_label"] = t.device_label;
  j["protocol"] = protocol_json(t.protocol);
  std::vector<std::string> cols = csv_columns();
  cols.insert(cols.end(), t.extra_columns.begin(), t.extra_columns.end());
  j["columns"] = cols;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : t.rows) {
    nlohmann::json r = result_json(row.result, false);
    for (std::size_t i = 0; i < t.extra_columns.size() && i < row.extra.size(); ++i) r[t.extra_columns[i]] = num(row.extra[i]);
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

std::string to_csv(const BenchResult& r) { return header({}) + csv_row(r) + "\n"; }

std::string to_json(const BenchResult& r) { return result_json(r, true).dump(2) + "\n"; }

ExperimentTable parse_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty CSV");
  const auto cols = split(line);
  const auto base = csv_columns();
  if (cols.size() < base.size() || !std::equal(base.begin(), base.end(), cols.begin()))
    throw std::invalid_argument("CSV header does not match the bench schema");
  ExperimentTable t;
  t.extra_columns.assign(cols.begin() + static_cast<long>(base.size()), cols.end());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != cols.size()) throw std::invalid_argument("CSV row has " + std::to_string(f.size()) + " fields");
    ExperimentRow row;
    BenchResult& r = row.result;
    r.config_id = f[0];
    r.resolution = std::stoi(f[1]);
    r.protocol.batch = std::stoi(f[2]);
    r.macs = std::stoll(f[3]);
    r.params = std::stoll(f[4]);
    r.median_latency_ms = std::stod(f[5]);
    r.iqr_ms = std::stod(f[6]);
    r.throughput_ips = std::stod(f[7]);
    r.device_label = f[8];
    r.threads = std::stoi(f[9]);
    r.protocol.seed = std::stoull(f[10]);
    r.protocol.resolution = r.resolution;
    for (std::size_t i = base.size(); i < f.size(); ++i) row.extra.push_back(std::stod(f[i]));
    t.rows.push_back(std::move(row));
  }
  if (!t.rows.empty()) {
    t.protocol.batch = t.rows.front().result.protocol.batch;
    t.protocol.seed = t.rows.front().result.protocol.seed;
    t.device_label = t.rows.front().result.device_label;
  }
  return t;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace lowformer
