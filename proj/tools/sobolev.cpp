#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sobolev/sobolev.hpp"

namespace fs = std::filesystem;
using namespace sobolev;

namespace {

enum Exit { kOk = 0, kInternal = 1, kUsage = 2, kDiverged = 3, kIo = 4 };

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string default_out_dir() {
  const char* env = std::getenv("SOBOLEV_OUT");
  return env && *env ? env : "runs";
}

std::string catalog_help() {
  std::string s = "\nProblems:";
  for (const auto& n : catalog_names()) s += "\n  " + n;
  s += "\nLoss variants:";
  for (const auto& n : variant_names()) s += " " + n;
  s += "\nEnvironment: SOBOLEV_OUT sets the default output directory (default: runs).";
  s += "\nExit codes: 0 success, 2 usage, 3 divergence, 4 I/O.\n";
  return s;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write on " + path.string());
}

std::string seed_stem(std::uint64_t seed) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%03llu", static_cast<unsigned long long>(seed));
  return buf;
}

// Writes NNN.json (record), NNN.csv (error curve) and NNN.params.json.
void write_record(const TrainRecord& r, const fs::path& dir) {
  ensure_dir(dir);
  const std::string stem = seed_stem(r.seed);
  const std::string ckpt = stem + ".params.json";
  try {
    save_params(r.params, dir / ckpt);
  } catch (const std::runtime_error& e) {
    throw IoError(e.what());
  }
  write_text(dir / (stem + ".json"), to_json(r, ckpt).dump(2) + "\n");
  write_text(dir / (stem + ".csv"), record_csv(r));
}

std::string describe(const TrainRecord& r) {
  std::ostringstream s;
  s << r.problem << ' ' << r.variant << " seed " << r.seed << ": epochs_run " << r.epochs_run << ", epochs_to_threshold "
    << (r.epochs_to_threshold ? std::to_string(*r.epochs_to_threshold) : "not reached") << ", final " << r.metric << ' '
    << r.final_error << ", " << r.seconds << " s";
  if (r.diverged) s << " [diverged: " << r.divergence_reason << "]";
  return s.str();
}

// TrainConfig fields settable from the command line. A flag overrides the
// config file only when it was given.
class ConfigFlags {
 public:
  void attach(CLI::App& app, bool multi_loss) {
    app.add_option("--config", config_path_, "JSON config mirroring TrainConfig field names; flags take precedence")
        ->check(CLI::ExistingFile);
    add<std::string>(app, "--problem", "problem name (see catalog below)", [](TrainConfig& c, const std::string& v) {
      c.problem = v;
    });
    add<std::string>(app, "--loss",
                     multi_loss ? "loss variant, or a comma-separated list of variants" : "loss variant",
                     [](TrainConfig& c, const std::string& v) { c.loss = v; });
    add<std::vector<int>>(app, "--hidden", "hidden widths, e.g. 64,64", [](TrainConfig& c, const std::vector<int>& v) {
      c.hidden = v;
    })->delimiter(',');
    add<double>(app, "--lr", "learning rate (default 1e-3, Poisson 1e-4)", [](TrainConfig& c, double v) { c.lr = v; });
    add<double>(app, "--beta1", "Adam beta1", [](TrainConfig& c, double v) { c.beta1 = v; });
    add<double>(app, "--beta2", "Adam beta2", [](TrainConfig& c, double v) { c.beta2 = v; });
    add<double>(app, "--eps", "Adam epsilon", [](TrainConfig& c, double v) { c.eps = v; });
    add<int>(app, "--epochs", "epoch budget", [](TrainConfig& c, int v) { c.epochs = v; });
    add<double>(app, "--threshold", "test-error threshold", [](TrainConfig& c, double v) { c.threshold = v; });
    add<bool>(app, "--stop-at-threshold", "stop once the threshold is met (true/false)",
              [](TrainConfig& c, bool v) { c.stop_at_threshold = v; });
    add<std::uint64_t>(app, "--seed", "run seed (sweeps: first seed)", [](TrainConfig& c, std::uint64_t v) { c.seed = v; });
    add<std::string>(app, "--sampling", "auto, fixed or iterative", [](TrainConfig& c, const std::string& v) {
      c.sampling.mode = parse_sampling_mode(v);
    });
    add<int>(app, "--nt", "fixed grid: time samples N_t", [](TrainConfig& c, int v) { c.sampling.counts.n_t = v; });
    add<int>(app, "--nx", "fixed grid: space samples N_x", [](TrainConfig& c, int v) { c.sampling.counts.n_x = v; });
    add<int>(app, "--nb", "fixed grid: boundary samples N_B", [](TrainConfig& c, int v) { c.sampling.counts.n_b = v; });
    add<int>(app, "--nv", "fixed grid: velocity samples N_v", [](TrainConfig& c, int v) { c.sampling.counts.n_v = v; });
    add<int>(app, "--toy-points", "toy regression points", [](TrainConfig& c, int v) { c.sampling.toy_points = v; });
    add<int>(app, "--points-per-epoch", "iterative sampling: interior points per epoch",
             [](TrainConfig& c, int v) { c.sampling.points_per_epoch = v; });
    add<int>(app, "--boundary-per-epoch", "iterative sampling: boundary points per epoch",
             [](TrainConfig& c, int v) { c.sampling.boundary_per_epoch = v; });
    add<int>(app, "--eval-stride", "evaluate the test error every N epochs", [](TrainConfig& c, int v) {
      c.eval_stride = v;
    });
    add<int>(app, "--test-grid", "heat/Burgers test grid size per axis", [](TrainConfig& c, int v) { c.test_grid = v; });
    add<int>(app, "--test-points", "Poisson test points", [](TrainConfig& c, int v) { c.test_points = v; });
    add<int>(app, "--toy-test-points", "toy test points", [](TrainConfig& c, int v) { c.toy_test_points = v; });
    add<std::string>(app, "--reference", "Fokker-Planck reference grid file (default: solve one)",
                     [](TrainConfig& c, const std::string& v) { c.reference = v; });
    add<int>(app, "--fp-nx", "Fokker-Planck reference solve: x nodes", [](TrainConfig& c, int v) { c.fp_nx = v; });
    add<int>(app, "--fp-nv", "Fokker-Planck reference solve: v intervals", [](TrainConfig& c, int v) { c.fp_nv = v; });
    add<int>(app, "--fp-n-out", "Fokker-Planck reference solve: stored time slices",
             [](TrainConfig& c, int v) { c.fp_n_out = v; });
    add<int>(app, "--fp-restrict", "Fokker-Planck reference: test-grid stride in x and v",
             [](TrainConfig& c, int v) { c.fp_restrict = v; });
    add<int>(app, "--chunk", "points per tape chunk", [](TrainConfig& c, int v) { c.chunk = v; });
  }

  TrainConfig resolve() const {
    TrainConfig c;
    if (!config_path_.empty()) {
      std::ifstream in(config_path_);
      if (!in) throw IoError("cannot read config " + config_path_);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + config_path_ + ": " + e.what());
      }
      c = config_from_json(j);
    }
    for (const auto& f : apply_) f(c);
    return c;
  }

 private:
  template <class T, class F>
  CLI::Option* add(CLI::App& app, const std::string& name, const std::string& help, F apply) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app.add_option(name, *value, help)->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    apply_.push_back([opt, value, apply](TrainConfig& c) {
      if (opt->count() > 0) apply(c, *value);
    });
    return opt;
  }

  std::string config_path_;
  std::vector<std::function<void(TrainConfig&)>> apply_;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  if (out.empty()) throw ConfigError("empty loss list");
  return out;
}

int cmd_train(const ConfigFlags& flags, const std::string& out) {
  const TrainConfig cfg = flags.resolve();
  const TrainRecord r = train(cfg);
  write_record(r, out);
  std::cout << describe(r) << "\n";
  return r.diverged ? kDiverged : kOk;
}

int cmd_sweep(const ConfigFlags& flags, const std::string& out, int seeds, int jobs, int bins) {
  const TrainConfig base = flags.resolve();
  const auto losses = split_list(base.loss);
  // Validate every variant before spending time on any of them.
  const ProblemDef p = parse_problem(base.problem);
  for (const auto& l : losses) check_compatible(p, parse_variant(l));
  bool diverged = false;
  for (const auto& l : losses) {
    TrainConfig cfg = base;
    cfg.loss = l;
    const auto records = sweep(cfg, seeds, jobs);
    const std::string tag = p.name + "-" + parse_variant(l).name();
    const fs::path dir = fs::path(out) / tag;
    for (const auto& r : records) write_record(r, dir);
    write_text(fs::path(out) / (tag + "-summary.csv"), sweep_csv(records));
    write_text(fs::path(out) / (tag + "-histogram.csv"), histogram_csv(epochs_histogram(records, bins)));
    const auto s = summarize(records);
    std::cout << tag << ": runs " << s.runs << ", diverged " << s.diverged << ", reached " << s.reached
              << ", epochs " << s.mean_epochs << " +- " << s.std_epochs << " (censored mean " << s.mean_epochs_censored
              << "), final error " << s.mean_final_error << " +- " << s.std_final_error << "\n";
    diverged |= s.diverged > 0;
  }
  return diverged ? kDiverged : kOk;
}

int cmd_reference(const std::string& problem, const FpResolution& res, std::string out) {
  const ProblemDef p = parse_problem(problem);
  if (p.kind != ProblemKind::FokkerPlanck)
    throw ConfigError(p.name + " has a closed-form solution; reference grids are only generated for fp-f1 and fp-f2");
  const ReferenceGrid g = fp_solve(p, res);
  if (out.empty()) {
    ensure_dir(default_out_dir());
    out = (fs::path(default_out_dir()) / (p.name + ".grid")).string();
  } else if (fs::path(out).has_parent_path()) {
    ensure_dir(fs::path(out).parent_path());
  }
  try {
    save_grid(g, out);
  } catch (const std::runtime_error& e) {
    throw IoError(e.what());
  }
  const auto& m = g.metadata;
  std::cout << "wrote " << out << " (" << g.axes[0].size() << " x " << g.axes[1].size() << " x " << g.axes[2].size()
            << ", nt " << m.at("nt") << ")\n"
            << "mass initial " << m.at("mass_initial") << ", final " << m.at("mass_final") << ", relative drift "
            << m.at("mass_relative_drift") << "\n";
  return kOk;
}

std::string fmt_num(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream s;
  s << std::setprecision(8) << v;
  return s.str();
}

int cmd_report(const std::string& in, const std::string& format) {
  if (!fs::is_directory(in)) throw IoError("not a directory: " + in);
  std::map<std::pair<std::string, std::string>, std::vector<TrainRecord>> groups;
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(in))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream is(f);
    if (!is) throw IoError("cannot read " + f.string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception&) {
      std::cerr << "skipping unparsable " << f.string() << "\n";
      continue;
    }
    if (!j.is_object() || !j.contains("variant") || !j.contains("epochs_run")) continue;
    TrainRecord r = record_from_json(j);
    groups[{r.problem, r.variant}].push_back(std::move(r));
  }
  if (format == "csv") {
    std::cout << "problem,variant,runs,diverged,reached,mean_epochs,std_epochs,mean_epochs_censored,mean_final_error,"
                 "std_final_error\n";
    for (const auto& [key, records] : groups) {
      const auto s = summarize(records);
      std::cout << key.first << ',' << key.second << ',' << s.runs << ',' << s.diverged << ',' << s.reached << ','
                << fmt_num(s.mean_epochs) << ',' << fmt_num(s.std_epochs) << ',' << fmt_num(s.mean_epochs_censored)
                << ',' << fmt_num(s.mean_final_error) << ',' << fmt_num(s.std_final_error) << '\n';
    }
  } else {
    std::printf("%-18s %-8s %5s %5s %7s %24s %28s\n", "problem", "variant", "runs", "div", "reached",
                "epochs (mean +- std)", "final error (mean +- std)");
    for (const auto& [key, records] : groups) {
      const auto s = summarize(records);
      const std::string ep = s.reached ? fmt_num(s.mean_epochs) + " +- " + fmt_num(s.std_epochs) : "-";
      std::printf("%-18s %-8s %5d %5d %7d %24s %28s\n", key.first.c_str(), key.second.c_str(), s.runs, s.diverged,
                  s.reached, ep.c_str(), (fmt_num(s.mean_final_error) + " +- " + fmt_num(s.std_final_error)).c_str());
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sobolev-norm PINN training, sweeps, reference grids and reports"};
  app.footer(catalog_help());
  app.require_subcommand(1);

  std::string out = default_out_dir();

  auto* train_cmd = app.add_subcommand("train", "train one network and write NNN.json, NNN.csv, NNN.params.json");
  ConfigFlags train_flags;
  train_flags.attach(*train_cmd, false);
  train_cmd->add_option("--out", out, "output directory")->capture_default_str();
  train_cmd->footer(catalog_help());

  auto* sweep_cmd = app.add_subcommand("sweep", "train over consecutive seeds for one or more loss variants");
  ConfigFlags sweep_flags;
  sweep_flags.attach(*sweep_cmd, true);
  int seeds = 10, jobs = 1, bins = 10;
  sweep_cmd->add_option("--seeds", seeds, "number of seeds")->check(CLI::Range(1, 1 << 20))->capture_default_str();
  sweep_cmd->add_option("--jobs", jobs, "parallel runs")->check(CLI::Range(1, 1 << 20))->capture_default_str();
  sweep_cmd->add_option("--bins", bins, "histogram bins")->check(CLI::Range(1, 1 << 20))->capture_default_str();
  sweep_cmd->add_option("--out", out, "output directory")->capture_default_str();
  sweep_cmd->footer(catalog_help());

  auto* ref_cmd = app.add_subcommand("reference", "solve a Fokker-Planck reference grid");
  std::string ref_problem, ref_out;
  FpResolution res;
  ref_cmd->add_option("--problem", ref_problem, "fp-f1 or fp-f2")->required();
  ref_cmd->add_option("--nx", res.nx, "x nodes (>= 64)")->capture_default_str();
  ref_cmd->add_option("--nv", res.nv, "v intervals (>= 128)")->capture_default_str();
  ref_cmd->add_option("--nt", res.nt, "RK4 steps (0: smallest stable count)")->capture_default_str();
  ref_cmd->add_option("--n-out", res.n_out, "stored time slices after t = 0")->capture_default_str();
  ref_cmd->add_option("--out", ref_out, "output file (default: $SOBOLEV_OUT/<problem>.grid)");
  ref_cmd->footer(catalog_help());

  auto* report_cmd = app.add_subcommand("report", "summarise run records grouped by (problem, variant)");
  std::string report_in = default_out_dir(), format = "text";
  report_cmd->add_option("--in", report_in, "directory searched recursively for run records")->capture_default_str();
  report_cmd->add_option("--format", format, "text or csv")
      ->check(CLI::IsMember({"text", "csv"}))
      ->capture_default_str();
  report_cmd->footer(catalog_help());

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train_flags, out);
    if (*sweep_cmd) return cmd_sweep(sweep_flags, out, seeds, jobs, bins);
    if (*ref_cmd) return cmd_reference(ref_problem, res, ref_out);
    if (*report_cmd) return cmd_report(report_in, format);
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const IncompatibleVariant& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}
