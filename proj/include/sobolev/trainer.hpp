#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "sobolev/adam.hpp"
#include "sobolev/autodiff.hpp"
#include "sobolev/error.hpp"
#include "sobolev/loss.hpp"
#include "sobolev/metrics.hpp"
#include "sobolev/network.hpp"
#include "sobolev/problems.hpp"
#include "sobolev/reference.hpp"
#include "sobolev/sampling.hpp"
#include "sobolev/tape.hpp"

namespace sobolev {

/// Auto: iterative for Poisson, fixed otherwise.
enum class SamplingMode { Auto, Fixed, Iterative };

struct SamplingPlan {
  SamplingMode mode = SamplingMode::Auto;
  GridCounts counts;
  int toy_points = 100;
  int points_per_epoch = 500;
  int boundary_per_epoch = 500;
};

inline SamplingMode resolve_mode(const SamplingPlan& s, const ProblemDef& p) {
  if (s.mode != SamplingMode::Auto) return s.mode;
  return p.kind == ProblemKind::Poisson ? SamplingMode::Iterative : SamplingMode::Fixed;
}

inline std::string to_string(SamplingMode m) {
  switch (m) {
    case SamplingMode::Auto: return "auto";
    case SamplingMode::Fixed: return "fixed";
    case SamplingMode::Iterative: return "iterative";
  }
  return "auto";
}

inline SamplingMode parse_sampling_mode(const std::string& s) {
  if (s == "auto") return SamplingMode::Auto;
  if (s == "fixed") return SamplingMode::Fixed;
  if (s == "iterative") return SamplingMode::Iterative;
  throw ConfigError("sampling mode must be auto, fixed or iterative");
}

struct TrainConfig {
  std::string problem = "heat";
  std::string loss = "hb0";
  std::vector<int> hidden = {64, 64};
  std::optional<double> lr;  // unset: 1e-4 for Poisson, 1e-3 otherwise
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  SamplingPlan sampling;
  int epochs = 1000;
  double threshold = 1e-3;
  bool stop_at_threshold = true;
  int eval_stride = 10;
  int test_grid = 101;
  int test_points = 10000;
  int toy_test_points = 1000;
  std::string reference;  // FP reference grid file; empty computes one
  int fp_nx = 128, fp_nv = 256, fp_n_out = 10, fp_restrict = 2;
  std::uint64_t seed = 0;
  int chunk = 2048;

  double learning_rate(const ProblemDef& p) const {
    return lr.value_or(p.kind == ProblemKind::Poisson ? 1e-4 : 1e-3);
  }

  void validate() const {
    if (epochs < 1) throw ConfigError("epoch budget must be >= 1");
    if (!(threshold > 0)) throw ConfigError("threshold must be positive");
    if (eval_stride < 1) throw ConfigError("evaluation stride must be >= 1");
    if (chunk < 1) throw ConfigError("chunk size must be >= 1");
    if (hidden.empty()) throw ConfigError("at least one hidden layer is required");
    if (lr && !(*lr > 0)) throw ConfigError("learning rate must be positive");
    const auto& c = sampling.counts;
    if (sampling.mode != SamplingMode::Iterative && (c.n_t < 2 || c.n_x < 2 || c.n_b < 2 || c.n_v < 2))
      throw ConfigError("fixed grid counts must be >= 2");
    if (sampling.toy_points < 1) throw ConfigError("toy_points must be >= 1");
    if (sampling.mode == SamplingMode::Iterative && (sampling.points_per_epoch < 1 || sampling.boundary_per_epoch < 0))
      throw ConfigError("iterative sampling needs points_per_epoch >= 1");
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["problem"] = c.problem;
  j["loss"] = c.loss;
  j["hidden"] = c.hidden;
  j["lr"] = c.lr ? nlohmann::json(*c.lr) : nlohmann::json(nullptr);
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["eps"] = c.eps;
  j["sampling"] = {{"mode", to_string(c.sampling.mode)},
                   {"toy_points", c.sampling.toy_points},
                   {"n_t", c.sampling.counts.n_t},
                   {"n_x", c.sampling.counts.n_x},
                   {"n_b", c.sampling.counts.n_b},
                   {"n_v", c.sampling.counts.n_v},
                   {"points_per_epoch", c.sampling.points_per_epoch},
                   {"boundary_per_epoch", c.sampling.boundary_per_epoch}};
  j["epochs"] = c.epochs;
  j["threshold"] = c.threshold;
  j["stop_at_threshold"] = c.stop_at_threshold;
  j["eval_stride"] = c.eval_stride;
  j["test_grid"] = c.test_grid;
  j["test_points"] = c.test_points;
  j["toy_test_points"] = c.toy_test_points;
  j["reference"] = c.reference;
  j["fp_nx"] = c.fp_nx;
  j["fp_nv"] = c.fp_nv;
  j["fp_n_out"] = c.fp_n_out;
  j["fp_restrict"] = c.fp_restrict;
  j["seed"] = c.seed;
  j["chunk"] = c.chunk;
  return j;
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline TrainConfig config_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> known = {
      "problem", "loss",      "hidden",    "lr",         "beta1",           "beta2",     "eps",
      "sampling", "epochs",   "threshold", "stop_at_threshold", "eval_stride", "test_grid", "test_points",
      "toy_test_points", "reference", "fp_nx", "fp_nv", "fp_n_out", "fp_restrict", "seed", "chunk"};
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError("unknown config key '" + k + "'");
  TrainConfig c;
  try {
    c.problem = j.value("problem", c.problem);
    c.loss = j.value("loss", c.loss);
    c.hidden = j.value("hidden", c.hidden);
    if (j.contains("lr") && !j.at("lr").is_null()) c.lr = j.at("lr").get<double>();
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    if (j.contains("sampling")) {
      const auto& s = j.at("sampling");
      c.sampling.mode = parse_sampling_mode(s.value("mode", std::string("auto")));
      c.sampling.toy_points = s.value("toy_points", c.sampling.toy_points);
      c.sampling.counts.n_t = s.value("n_t", c.sampling.counts.n_t);
      c.sampling.counts.n_x = s.value("n_x", c.sampling.counts.n_x);
      c.sampling.counts.n_b = s.value("n_b", c.sampling.counts.n_b);
      c.sampling.counts.n_v = s.value("n_v", c.sampling.counts.n_v);
      c.sampling.points_per_epoch = s.value("points_per_epoch", c.sampling.points_per_epoch);
      c.sampling.boundary_per_epoch = s.value("boundary_per_epoch", c.sampling.boundary_per_epoch);
    }
    c.epochs = j.value("epochs", c.epochs);
    c.threshold = j.value("threshold", c.threshold);
    c.stop_at_threshold = j.value("stop_at_threshold", c.stop_at_threshold);
    c.eval_stride = j.value("eval_stride", c.eval_stride);
    c.test_grid = j.value("test_grid", c.test_grid);
    c.test_points = j.value("test_points", c.test_points);
    c.toy_test_points = j.value("toy_test_points", c.toy_test_points);
    c.reference = j.value("reference", c.reference);
    c.fp_nx = j.value("fp_nx", c.fp_nx);
    c.fp_nv = j.value("fp_nv", c.fp_nv);
    c.fp_n_out = j.value("fp_n_out", c.fp_n_out);
    c.fp_restrict = j.value("fp_restrict", c.fp_restrict);
    c.seed = j.value("seed", c.seed);
    c.chunk = j.value("chunk", c.chunk);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

struct Evaluation {
  int epoch;
  double error;
  bool operator==(const Evaluation&) const = default;
};

struct TrainRecord {
  TrainConfig config;
  std::string problem;
  std::string variant;
  std::string metric;
  std::uint64_t seed = 0;
  std::vector<double> losses;            // losses[e-1]: loss before update e
  std::vector<Evaluation> evaluations;   // test error after `epoch` updates
  std::optional<int> epochs_to_threshold;
  int epochs_run = 0;
  bool diverged = false;
  std::string divergence_reason;
  double final_error = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
  MlpParams params;

  /// Numeric content only (timing excluded).
  bool same_numbers(const TrainRecord& o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    if (losses.size() != o.losses.size() || evaluations.size() != o.evaluations.size()) return false;
    for (std::size_t i = 0; i < losses.size(); ++i)
      if (!same(losses[i], o.losses[i])) return false;
    for (std::size_t i = 0; i < evaluations.size(); ++i)
      if (evaluations[i].epoch != o.evaluations[i].epoch || !same(evaluations[i].error, o.evaluations[i].error))
        return false;
    return epochs_to_threshold == o.epochs_to_threshold && epochs_run == o.epochs_run && diverged == o.diverged &&
           same(final_error, o.final_error) && params == o.params;
  }
};

inline nlohmann::json to_json(const TrainRecord& r, const std::string& checkpoint = "") {
  nlohmann::json j;
  j["config"] = to_json(r.config);
  j["problem"] = r.problem;
  j["variant"] = r.variant;
  j["metric"] = r.metric;
  j["seed"] = r.seed;
  j["epochs_run"] = r.epochs_run;
  j["epochs_to_threshold"] = r.epochs_to_threshold ? nlohmann::json(*r.epochs_to_threshold) : nlohmann::json(nullptr);
  j["final_error"] = std::isfinite(r.final_error) ? nlohmann::json(r.final_error) : nlohmann::json(nullptr);
  j["diverged"] = r.diverged;
  j["divergence_reason"] = r.divergence_reason;
  j["seconds"] = r.seconds;
  j["checkpoint"] = checkpoint;
  auto& loss = j["loss"] = nlohmann::json::array();
  for (double l : r.losses) loss.push_back(std::isfinite(l) ? nlohmann::json(l) : nlohmann::json(nullptr));
  auto& ev = j["evaluations"] = nlohmann::json::array();
  for (const auto& e : r.evaluations)
    ev.push_back({e.epoch, std::isfinite(e.error) ? nlohmann::json(e.error) : nlohmann::json(nullptr)});
  return j;
}

/// Inverse of to_json for the summary and series fields (no parameters).
inline TrainRecord record_from_json(const nlohmann::json& j) {
  TrainRecord r;
  r.config = config_from_json(j.at("config"));
  r.problem = j.at("problem").get<std::string>();
  r.variant = j.at("variant").get<std::string>();
  r.metric = j.value("metric", std::string());
  r.seed = j.at("seed").get<std::uint64_t>();
  r.epochs_run = j.at("epochs_run").get<int>();
  if (!j.at("epochs_to_threshold").is_null()) r.epochs_to_threshold = j.at("epochs_to_threshold").get<int>();
  if (!j.at("final_error").is_null()) r.final_error = j.at("final_error").get<double>();
  r.diverged = j.at("diverged").get<bool>();
  r.divergence_reason = j.value("divergence_reason", std::string());
  r.seconds = j.value("seconds", 0.0);
  for (const auto& l : j.at("loss")) r.losses.push_back(l.is_null() ? std::numeric_limits<double>::quiet_NaN() : l.get<double>());
  for (const auto& e : j.at("evaluations"))
    r.evaluations.push_back({e.at(0).get<int>(), e.at(1).is_null() ? std::numeric_limits<double>::quiet_NaN() : e.at(1).get<double>()});
  return r;
}

namespace detail {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace detail

/// epoch,loss,test_error; test_error is empty where not evaluated. Row 0
/// holds the initial evaluation and no loss.
inline std::string record_csv(const TrainRecord& r) {
  std::ostringstream s;
  s << "epoch,loss,test_error\n";
  std::size_t k = 0;
  for (int e = 0; e <= r.epochs_run; ++e) {
    s << e << ',';
    if (e >= 1 && static_cast<std::size_t>(e) <= r.losses.size()) s << detail::fmt(r.losses[static_cast<std::size_t>(e - 1)]);
    s << ',';
    while (k < r.evaluations.size() && r.evaluations[k].epoch < e) ++k;
    if (k < r.evaluations.size() && r.evaluations[k].epoch == e) s << detail::fmt(r.evaluations[k].error);
    s << '\n';
  }
  return s.str();
}

// ---- reference and test-set caches -----------------------------------------------

/// FP test reference for a config: the file named by `reference`, or a
/// solve at (fp_nx, fp_nv) restricted by fp_restrict in x and v. Cached per
/// key so sweeps share one solve.
inline std::shared_ptr<const ReferenceGrid> fp_reference_for(const ProblemDef& p, const TrainConfig& c) {
  static std::mutex mutex;
  static std::map<std::string, std::shared_ptr<const ReferenceGrid>> cache;
  const std::string key = c.reference.empty() ? p.name + "/" + std::to_string(c.fp_nx) + "/" + std::to_string(c.fp_nv) +
                                                   "/" + std::to_string(c.fp_n_out) + "/" + std::to_string(c.fp_restrict)
                                             : "file:" + c.reference;
  std::lock_guard lock(mutex);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  std::shared_ptr<const ReferenceGrid> g;
  if (!c.reference.empty()) {
    g = std::make_shared<const ReferenceGrid>(load_grid(c.reference));
  } else {
    FpResolution res;
    res.nx = c.fp_nx;
    res.nv = c.fp_nv;
    res.n_out = c.fp_n_out;
    g = std::make_shared<const ReferenceGrid>(restrict_grid(fp_solve(p, res), c.fp_restrict, c.fp_restrict));
  }
  cache.emplace(key, g);
  return g;
}

inline std::shared_ptr<const TestSet> test_set_for(const ProblemDef& p, const TrainConfig& c) {
  static std::mutex mutex;
  static std::map<std::string, std::shared_ptr<const TestSet>> cache;
  std::shared_ptr<const ReferenceGrid> grid;
  if (p.kind == ProblemKind::FokkerPlanck) grid = fp_reference_for(p, c);
  std::ostringstream key;
  key << p.name << '/' << c.test_grid << '/' << c.test_points << '/' << c.toy_test_points << '/' << grid.get();
  std::lock_guard lock(mutex);
  auto it = cache.find(key.str());
  if (it != cache.end()) return it->second;
  TestSetOptions o;
  o.grid = c.test_grid;
  o.poisson_points = c.test_points;
  o.toy_points = c.toy_test_points;
  o.fp_reference = grid.get();
  auto s = std::make_shared<const TestSet>(make_test_set(p, o));
  cache.emplace(key.str(), s);
  return s;
}

// ---- training ----------------------------------------------------------------------

/// Loss value and parameter gradient, one tape per chunk of at most
/// `chunk` points per term.
inline std::pair<double, Eigen::VectorXd> loss_and_gradient(const MlpParams& params, const ProblemDef& p,
                                                            const LossVariant& v, const SampleBatch& batch,
                                                            std::size_t chunk) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.size()));
  double loss = 0.0;
  Tape tape(params.size());
  for (LossTerm term : loss_terms(p, v)) {
    const PointSet& pts = term_points(batch, term);
    const bool paired = term == LossTerm::BC && p.boundary == BoundaryKind::Periodic;
    for (std::size_t b = 0; b < pts.size(); b += chunk) {
      const std::size_t n = std::min(chunk, pts.size() - b);
      const PointSet part = pts.slice(b, n);
      PointSet partner;
      if (paired) partner = batch.boundary_partner.slice(b, n);
      tape.clear();
      TapedNetwork net(params, tape);
      const Var l = term_loss(net, p, v, term, part, paired ? &partner : nullptr);
      loss += l.value();
      grad += tape.gradient(l);
    }
  }
  return {loss, grad};
}

inline constexpr double kDivergenceError = 1e6;

/// Grid seeds are derived from the run seed so that runs with equal seeds
/// share initial parameters and collocation points across loss variants.
inline std::uint64_t grid_seed(std::uint64_t seed) { return seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL; }

inline TrainRecord train(const TrainConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const ProblemDef p = parse_problem(cfg.problem);
  const LossVariant variant = parse_variant(cfg.loss);
  check_compatible(p, variant);
  const SamplingMode mode = resolve_mode(cfg.sampling, p);
  if (mode == SamplingMode::Iterative && p.kind != ProblemKind::Poisson)
    throw ConfigError("iterative sampling is only supported for Poisson problems");

  TrainRecord rec;
  rec.config = cfg;
  rec.problem = p.name;
  rec.variant = variant.name();
  rec.seed = cfg.seed;
  const auto test = test_set_for(p, cfg);
  rec.metric = to_string(test->metric);

  rec.params = init_uniform(Architecture::mlp(p.input_dim(), cfg.hidden), cfg.seed);
  AdamConfig ac;
  ac.lr = cfg.learning_rate(p);
  ac.beta1 = cfg.beta1;
  ac.beta2 = cfg.beta2;
  ac.eps = cfg.eps;
  AdamState adam(rec.params.size(), ac);

  std::mt19937_64 rng(grid_seed(cfg.seed));
  SampleBatch batch;
  if (mode == SamplingMode::Fixed) {
    GridCounts counts = cfg.sampling.counts;
    if (p.kind == ProblemKind::Toy) counts.n_x = cfg.sampling.toy_points;
    batch = make_fixed_grid(p, counts, grid_seed(cfg.seed));
  }

  auto evaluate = [&](int epoch) {
    const double err = test_error(rec.params, *test);
    rec.evaluations.push_back({epoch, err});
    rec.final_error = err;
    if (!std::isfinite(err) || err > kDivergenceError) {
      rec.diverged = true;
      rec.divergence_reason = "test error " + detail::fmt(err) + " exceeds the divergence bound";
      return false;
    }
    if (err <= cfg.threshold && !rec.epochs_to_threshold) rec.epochs_to_threshold = epoch;
    return true;
  };

  bool running = evaluate(0);
  bool near = running && rec.final_error <= 2.0 * cfg.threshold;
  if (rec.epochs_to_threshold && cfg.stop_at_threshold) running = false;
  for (int e = 1; running && e <= cfg.epochs; ++e) {
    if (mode == SamplingMode::Iterative)
      batch = resample_uniform(p, cfg.sampling.points_per_epoch, cfg.sampling.boundary_per_epoch, rng);
    auto [loss, grad] = loss_and_gradient(rec.params, p, variant, batch, static_cast<std::size_t>(cfg.chunk));
    rec.losses.push_back(loss);
    rec.epochs_run = e;
    if (!std::isfinite(loss)) {
      rec.diverged = true;
      rec.divergence_reason = "non-finite loss at epoch " + std::to_string(e);
      break;
    }
    try {
      adam_step(adam, rec.params, grad);
    } catch (const NonFiniteGradient& ex) {
      rec.diverged = true;
      rec.divergence_reason = std::string(ex.what()) + " at epoch " + std::to_string(e);
      break;
    }
    if (e % cfg.eval_stride == 0 || near || e == cfg.epochs) {
      if (!evaluate(e)) break;
      near = rec.final_error <= 2.0 * cfg.threshold;
      if (rec.epochs_to_threshold && cfg.stop_at_threshold) break;
    }
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

// ---- sweeps ------------------------------------------------------------------------

struct SweepSummary {
  int runs = 0;
  int diverged = 0;
  int reached = 0;
  double mean_epochs = std::numeric_limits<double>::quiet_NaN();  // over runs that reached the threshold
  double std_epochs = std::numeric_limits<double>::quiet_NaN();
  double mean_epochs_censored = std::numeric_limits<double>::quiet_NaN();  // unreached runs count as the budget
  double mean_final_error = std::numeric_limits<double>::quiet_NaN();
  double std_final_error = std::numeric_limits<double>::quiet_NaN();
  double mean_seconds = 0.0;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  if (v.size() == 1) return {m, 0.0};
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / static_cast<double>(v.size() - 1))};
}

}  // namespace detail

/// Statistics over non-diverged runs; std is the sample deviation (0 for one run).
inline SweepSummary summarize(const std::vector<TrainRecord>& records) {
  SweepSummary s;
  s.runs = static_cast<int>(records.size());
  std::vector<double> epochs, censored, errors;
  double secs = 0.0;
  for (const auto& r : records) {
    secs += r.seconds;
    if (r.diverged) {
      ++s.diverged;
      continue;
    }
    errors.push_back(r.final_error);
    if (r.epochs_to_threshold) {
      ++s.reached;
      epochs.push_back(*r.epochs_to_threshold);
      censored.push_back(*r.epochs_to_threshold);
    } else {
      censored.push_back(r.config.epochs);
    }
  }
  std::tie(s.mean_epochs, s.std_epochs) = detail::mean_std(epochs);
  s.mean_epochs_censored = detail::mean_std(censored).first;
  std::tie(s.mean_final_error, s.std_final_error) = detail::mean_std(errors);
  s.mean_seconds = records.empty() ? 0.0 : secs / static_cast<double>(records.size());
  return s;
}

struct HistogramBin {
  double left, right;
  int count;
};

/// Equal-width bins over [min, max] of the reached epochs-to-threshold.
inline std::vector<HistogramBin> epochs_histogram(const std::vector<TrainRecord>& records, int bins = 10) {
  std::vector<double> v;
  for (const auto& r : records)
    if (!r.diverged && r.epochs_to_threshold) v.push_back(*r.epochs_to_threshold);
  std::vector<HistogramBin> out;
  if (v.empty() || bins < 1) return out;
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  double lo = *lo_it, hi = *hi_it;
  if (hi == lo) hi = lo + 1.0;
  const double w = (hi - lo) / bins;
  for (int b = 0; b < bins; ++b) out.push_back({lo + b * w, b + 1 == bins ? hi : lo + (b + 1) * w, 0});
  for (double x : v) {
    int b = static_cast<int>((x - lo) / w);
    b = std::clamp(b, 0, bins - 1);
    ++out[static_cast<std::size_t>(b)].count;
  }
  return out;
}

/// Runs seeds cfg.seed .. cfg.seed + n_seeds - 1 on up to `jobs` threads.
/// Records come back in seed order and do not depend on `jobs`.
inline std::vector<TrainRecord> sweep(const TrainConfig& cfg, int n_seeds, int jobs = 1) {
  if (n_seeds < 1) throw ConfigError("sweep needs at least one seed");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  cfg.validate();
  {
    // Resolve names and shared references before fanning out.
    const ProblemDef p = parse_problem(cfg.problem);
    check_compatible(p, parse_variant(cfg.loss));
    test_set_for(p, cfg);
  }
  std::vector<TrainRecord> out(static_cast<std::size_t>(n_seeds));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_seeds));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n_seeds; i = next++) {
      TrainConfig c = cfg;
      c.seed = cfg.seed + static_cast<std::uint64_t>(i);
      try {
        out[static_cast<std::size_t>(i)] = train(c);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  const int threads = std::min(jobs, n_seeds);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

inline std::string sweep_csv(const std::vector<TrainRecord>& records) {
  std::ostringstream s;
  s << "seed,epochs_to_threshold,final_error,seconds,diverged\n";
  for (const auto& r : records)
    s << r.seed << ',' << (r.epochs_to_threshold ? std::to_string(*r.epochs_to_threshold) : "") << ','
      << detail::fmt(r.final_error) << ',' << detail::fmt(r.seconds) << ',' << (r.diverged ? 1 : 0) << '\n';
  return s.str();
}

inline std::string histogram_csv(const std::vector<HistogramBin>& bins) {
  std::ostringstream s;
  s << "bin_left,bin_right,count\n";
  for (const auto& b : bins) s << detail::fmt(b.left) << ',' << detail::fmt(b.right) << ',' << b.count << '\n';
  return s.str();
}

}  // namespace sobolev
