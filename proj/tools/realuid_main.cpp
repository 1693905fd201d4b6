// Command-line laboratory: teacher training, distillation, fine-tuning,
// ablation sweeps, closed-form oracle dumps, sampling and evaluation.
#include "CLI11.hpp"

#include "realuid/engine.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

using namespace realuid;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitAborted = 3;
constexpr int kExitMode = 4;
constexpr int kExitVerify = 5;

int resolve_threads(int requested) {
  int cap = requested > 0 ? requested : 1;
  if (const char* env = std::getenv("REALUID_THREADS")) {
    const int c = std::atoi(env);
    if (c > 0) cap = std::min(cap, c);
  }
  return std::max(1, cap);
}

json load_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + std::string(e.what()));
  }
  return j;
}

struct RunDir {
  fs::path root;
  std::ofstream metrics;

  explicit RunDir(const std::string& out) : root(out) {
    fs::create_directories(root / "checkpoints");
    fs::create_directories(root / "samples");
    metrics.open(root / "metrics.jsonl", std::ios::app);
  }
  void write_config(const RunConfig& cfg) {
    std::ofstream f(root / "config.json");
    f << cfg.to_json().dump(2) << "\n";
  }
  MetricsSink sink() {
    MetricsSink s;
    s.emit = [this](const MetricsRecord& r) {
      metrics << r.to_json_line() << "\n";
      metrics.flush();
    };
    return s;
  }
  std::string ckpt(const std::string& name) const { return (root / "checkpoints" / name).string(); }
};

void write_samples_csv(const fs::path& path, std::span<const double> samples, int dim) {
  std::ofstream f(path);
  for (int d = 0; d < dim; ++d) f << (d ? "," : "") << "x" << (d + 1);
  f << "\n";
  const size_t n = samples.size() / dim;
  for (size_t i = 0; i < n; ++i) {
    for (int d = 0; d < dim; ++d)
      f << (d ? "," : "") << format_double(samples[i * dim + d]);
    f << "\n";
  }
}

std::vector<double> read_samples_csv(const fs::path& path, int& dim) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open samples file '" + path.string() + "'");
  std::string line;
  std::getline(f, line);  // header
  dim = 1 + static_cast<int>(std::count(line.begin(), line.end(), ','));
  std::vector<double> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    size_t pos = 0;
    for (int d = 0; d < dim; ++d) {
      const size_t next = line.find(',', pos);
      out.push_back(std::stod(line.substr(pos, next - pos)));
      pos = next == std::string::npos ? line.size() : next + 1;
    }
  }
  return out;
}

std::string teacher_prefix(const std::string& path) {
  if (fs::is_directory(path)) return (fs::path(path) / "checkpoints" / "teacher").string();
  return path;
}

Mlp load_teacher(const std::string& path) {
  const std::string prefix = teacher_prefix(path);
  if (!fs::exists(prefix + ".manifest.json"))
    throw ConfigError("teacher checkpoint not found at '" + prefix + "'");
  auto ck = load_checkpoint(prefix);
  return mlp_from_manifest(ck.manifest, ck.segment("params"));
}

struct GeneratorBundle {
  Generator gen;
  std::vector<double> ema;
};

GeneratorBundle load_generator(const std::string& path, const std::string& which = "generator_best") {
  std::string prefix = path;
  if (fs::is_directory(path)) prefix = (fs::path(path) / "checkpoints" / which).string();
  if (!fs::exists(prefix + ".manifest.json"))
    throw ConfigError("generator checkpoint not found at '" + prefix + "'");
  auto ck = load_checkpoint(prefix);
  GeneratorBundle b;
  b.gen = generator_from_manifest(ck.manifest, ck.segment("params"));
  auto ema = ck.segment("ema");
  b.ema.assign(ema.begin(), ema.end());
  return b;
}

void save_distill_checkpoints(RunDir& dir, const RunConfig& cfg, const DistillResult& res) {
  auto manifest = generator_manifest(res.gen, true);
  manifest["seed"] = cfg.train.seed;
  manifest["path"] = cfg.to_json()["path"];
  manifest["coeffs"] = cfg.to_json()["coeffs"];

  std::vector<double> blob = res.best_gen_params;
  blob.insert(blob.end(), res.best_ema_shadow.begin(), res.best_ema_shadow.end());
  save_checkpoint(dir.ckpt("generator_best"), manifest, blob);

  blob = res.gen.net.params();
  blob.insert(blob.end(), res.ema.shadow.begin(), res.ema.shadow.end());
  save_checkpoint(dir.ckpt("generator_final"), manifest, blob);

  auto fake_manifest = mlp_manifest(res.fake);
  fake_manifest["seed"] = cfg.train.seed;
  save_checkpoint(dir.ckpt("fake_final"), fake_manifest, res.fake.params());
}

RunConfig resolved_config(const json& base) { return RunConfig::from_json(base); }

// ----- subcommand bodies -----

int cmd_train_teacher(const json& cfg_json, const std::string& out) {
  RunConfig cfg = resolved_config(cfg_json);
  RunDir dir(out);
  dir.write_config(cfg);
  TeacherResult res;
  if (cfg.train.mode == Mode::coupling) {
    auto data = make_coupling_dataset(cfg.data);
    res = train_teacher_coupling(cfg, data, dir.sink());
  } else {
    auto data = make_dataset(cfg.data);
    res = train_teacher(cfg, data, dir.sink());
  }
  auto manifest = mlp_manifest(res.net);
  manifest["seed"] = cfg.train.seed;
  manifest["path"] = cfg.to_json()["path"];
  save_checkpoint(dir.ckpt("teacher"), manifest, res.net.params());
  if (res.aborted) {
    std::cerr << "training aborted by the NaN policy; last good checkpoint kept\n";
    return kExitAborted;
  }
  std::cout << "teacher written to " << dir.ckpt("teacher") << " (matching loss "
            << format_double(res.eval_loss) << ")\n";
  return 0;
}

int run_distill(const RunConfig& cfg, const std::string& teacher_path, const std::string& out,
                const DistillInit* init) {
  Mlp teacher = load_teacher(teacher_path);
  RunDir dir(out);
  dir.write_config(cfg);
  auto sink = dir.sink();
  DistillResult res;
  if (cfg.train.mode == Mode::coupling) {
    auto data = make_coupling_dataset(cfg.data);
    res = distill_coupling(teacher, cfg, data, sink, init);
  } else {
    auto data = make_dataset(cfg.data);
    res = distill(teacher, cfg, data, sink, init);
  }
  save_distill_checkpoints(dir, cfg, res);
  {
    Rng srng(Rng(cfg.train.seed).substream(31));
    const int64_t n = std::min<int64_t>(cfg.eval.n_samples, 50000);
    std::vector<double> samples;
    if (res.gen.conditional) {
      auto data = make_coupling_dataset(cfg.data);
      std::vector<double> x0(static_cast<size_t>(n * data.dim)), xT(static_cast<size_t>(n * data.dim));
      data.sample_pair(srng, x0, xT);
      samples = sample_generator_cond(res.gen, xT, srng, res.ema.shadow);
    } else {
      samples = sample_generator(res.gen, n, srng, res.ema.shadow);
    }
    write_samples_csv(dir.root / "samples" / "generator_final.csv", samples,
                      static_cast<int>(res.gen.dim()));
  }
  if (res.aborted) {
    std::cerr << "distillation aborted by the NaN policy after " << res.steps_done << " steps\n";
    return kExitAborted;
  }
  std::cout << "best metric " << format_double(res.best_metric) << " at step " << res.best_step
            << "; checkpoints in " << (dir.root / "checkpoints").string() << "\n";
  return 0;
}

struct CoeffOverrides {
  double alpha = -1, beta = -1, gamma = -1, alpha_sid = -1;
  std::string mode;
  int64_t iters = -1;
  int64_t seed = -1;

  void apply(json& cfg) const {
    if (alpha >= 0) cfg["coeffs"]["alpha"] = alpha;
    if (beta >= 0) cfg["coeffs"]["beta"] = beta;
    if (gamma >= 0) cfg["coeffs"]["gamma"] = gamma;
    if (alpha_sid >= 0) cfg["coeffs"]["alpha_sid"] = alpha_sid;
    if (!mode.empty()) cfg["train"]["mode"] = mode;
    if (iters >= 0) cfg["train"]["n_iters"] = iters;
    if (seed >= 0) cfg["train"]["seed"] = seed;
  }
};

int cmd_ablate(const json& base_cfg, const std::string& teacher_path, const std::string& out,
               const std::string& grid, const std::string& pairs, int64_t iters, int threads) {
  std::vector<std::pair<double, double>> cells;
  if (!pairs.empty()) {
    size_t pos = 0;
    while (pos < pairs.size()) {
      size_t semi = pairs.find(';', pos);
      if (semi == std::string::npos) semi = pairs.size();
      const std::string cell = pairs.substr(pos, semi - pos);
      const size_t comma = cell.find(',');
      if (comma == std::string::npos) throw ConfigError("bad --pairs cell '" + cell + "'");
      cells.emplace_back(std::stod(cell.substr(0, comma)), std::stod(cell.substr(comma + 1)));
      pos = semi + 1;
    }
  } else {
    double lo = 0.94, hi = 1.0, step = 0.02;
    if (!grid.empty() && std::sscanf(grid.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3)
      throw ConfigError("bad --grid spec '" + grid + "' (expected lo:hi:step)");
    for (double a = lo; a <= hi + 1e-12; a += step)
      for (double b = lo; b <= hi + 1e-12; b += step) cells.emplace_back(a, b);
  }

  fs::create_directories(out);
  struct CellResult {
    double alpha, beta, metric = -1.0;
    int64_t steps_to_threshold = -1;
    bool failed = false;
  };
  std::vector<CellResult> results(cells.size());

  Mlp teacher = load_teacher(teacher_path);
  const RunConfig base = resolved_config(base_cfg);

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) {
      auto [a, b] = cells[i];
      CellResult& r = results[i];
      r.alpha = a;
      r.beta = b;
      try {
        json cj = base.to_json();
        cj["coeffs"]["alpha"] = a;
        cj["coeffs"]["beta"] = b;
        cj["train"]["mode"] = (a == 1.0 && b == 1.0) ? "uid" : "real_uid";
        if (iters > 0) cj["train"]["n_iters"] = iters;
        cj["train"]["seed"] = base.train.seed + 1000 * static_cast<uint64_t>(i);
        RunConfig cc = resolved_config(cj);
        char name[64];
        std::snprintf(name, sizeof(name), "cell_a%.2f_b%.2f", a, b);
        RunDir dir((fs::path(out) / name).string());
        dir.write_config(cc);
        auto data = make_dataset(cc.data);
        int64_t hit = -1;
        auto sink = dir.sink();
        auto outer = sink.emit;
        const double threshold = cc.eval.threshold;
        sink.emit = [&hit, threshold, outer](const MetricsRecord& rec) {
          outer(rec);
          if (threshold > 0 && hit < 0) {
            const double m =
                rec.w2_gauss ? *rec.w2_gauss : (rec.sliced_w2 ? *rec.sliced_w2 : 1e300);
            if (m <= threshold) hit = rec.step;
          }
        };
        auto res = distill(teacher, cc, data, sink);
        save_distill_checkpoints(dir, cc, res);
        r.metric = res.best_metric;
        r.steps_to_threshold = hit;
        r.failed = res.aborted;
      } catch (const std::exception& e) {
        r.failed = true;  // per-cell failures recorded, sweep continues
        std::cerr << "cell (" << a << ", " << b << ") failed: " << e.what() << "\n";
      }
    }
  };
  const int nthreads = std::min<int>(resolve_threads(threads), static_cast<int>(cells.size()));
  std::vector<std::thread> pool;
  for (int k = 1; k < nthreads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::ofstream csv(fs::path(out) / "ablation.csv");
  csv << "alpha,beta,metric,steps_to_threshold\n";
  for (const auto& r : results) {
    csv << format_double(r.alpha) << "," << format_double(r.beta) << ","
        << (r.failed ? "nan" : format_double(r.metric)) << "," << r.steps_to_threshold << "\n";
  }
  std::cout << "ablation summary in " << (fs::path(out) / "ablation.csv").string() << "\n";
  return 0;
}

int cmd_oracle(const std::string& sub, double mu_star, double mu_theta, const Coeffs& coeffs,
               const std::string& out_csv) {
  using namespace oracle;
  if (sub == "surface" || sub == "optimal-fake") {
    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!out_csv.empty()) {
      file.open(out_csv);
      os = &file;
    }
    *os << "t,x," << (sub == "surface" ? "l_t" : "f_opt") << "\n";
    for (int it = 1; it <= 19; ++it) {
      const double t = it / 20.0;
      for (double x = -6.0; x <= 6.0001; x += 0.05) {
        const double v = sub == "surface" ? pointwise_distance(mu_star, mu_theta, t, x, coeffs)
                                          : optimal_fake(mu_star, mu_theta, t, x, coeffs);
        *os << format_double(t) << "," << format_double(x) << "," << format_double(v) << "\n";
      }
    }
    return 0;
  }
  if (sub == "distance") {
    auto rule = QuadratureRule::make();
    const DistanceKind kind =
        coeffs.gamma != coeffs.alpha ? DistanceKind::general : DistanceKind::real_uid;
    std::cout << format_double(loss_by_quadrature(kind, mu_star, mu_theta, coeffs, rule)) << "\n";
    return 0;
  }
  if (sub == "verify") {
    auto rule = QuadratureRule::make();
    int failures = 0;
    auto report = [&](const char* name, double err, double tol) {
      const bool ok = err <= tol;
      failures += ok ? 0 : 1;
      std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << ": max error " << format_double(err)
                << " (tolerance " << format_double(tol) << ")\n";
    };
    if (rule.mass_check() < 1.0 - 1e-10) {
      std::cout << "[FAIL] quadrature window mass check\n";
      return kExitVerify;
    }

    Rng rng(2024);
    double worst_gap = 0.0;  // nudging the optimal fake must lower the objective
    for (int k = 0; k < 100; ++k) {
      Coeffs c;
      c.alpha = rng.uniform(0.9, 1.0);
      c.beta = rng.uniform(0.9, 1.0);
      c.gamma = c.alpha;
      const double ms = rng.uniform(-1, 1), mt = rng.uniform(-1, 3);
      const double t = rng.uniform(0.05, 0.95), x = rng.uniform(-4, 4);
      const double d_opt = uncond_field(ms, t, x) - optimal_fake(ms, mt, t, x, c);
      const double at = delta_objective(ms, mt, t, x, c, d_opt);
      const double up = delta_objective(ms, mt, t, x, c, d_opt + 1e-3);
      const double dn = delta_objective(ms, mt, t, x, c, d_opt - 1e-3);
      worst_gap = std::max({worst_gap, up - at, dn - at});
    }
    report("argmax consistency (perturbations decrease the objective)", worst_gap, 0.0);

    double worst_rel = 0.0;
    for (int k = 0; k < 10; ++k) {
      const double ms = rng.uniform(-1.5, 1.5), mt = rng.uniform(-1.5, 1.5);
      Coeffs one;
      const double a = loss_by_quadrature(DistanceKind::uid, ms, mt, one, rule);
      const double b = uid_distance_gridmax(ms, mt, rule);
      worst_rel = std::max(worst_rel, std::abs(a - b) / std::max(1e-12, std::abs(a)));
    }
    report("per-gridpoint maximization equals the closed-form distance", worst_rel, 1e-6);

    double worst_neg = 0.0, at_zero = 0.0;
    for (int k = 0; k < 10; ++k) {
      Coeffs c;
      c.alpha = rng.uniform(0.9, 1.0);
      c.beta = rng.uniform(0.9, 1.0);
      c.gamma = c.alpha;
      const double ms = rng.uniform(-1, 1);
      const double d =
          loss_by_quadrature(DistanceKind::real_uid, ms, ms + rng.uniform(0.5, 2.0), c, rule);
      worst_neg = std::min(worst_neg, d);
      at_zero = std::max(at_zero, loss_by_quadrature(DistanceKind::real_uid, ms, ms, c, rule));
    }
    report("nonnegativity of distance integrals", -worst_neg, 0.0);
    report("zero distance at matched means", at_zero, 1e-10);

    Coeffs c;
    c.alpha = 0.94;
    c.beta = 0.96;
    c.gamma = c.alpha;
    double prev = -1.0;
    bool monotone = true;
    for (int i = 0; i <= 10; ++i) {
      const double d = loss_by_quadrature(DistanceKind::real_uid, 0.0, 0.3 * i, c, rule);
      monotone = monotone && d > prev;
      prev = d;
    }
    report("distance increases with the mean gap", monotone ? 0.0 : 1.0, 0.0);

    return failures == 0 ? 0 : kExitVerify;
  }
  throw ConfigError("unknown oracle subcommand '" + sub +
                    "' (expected surface, distance, optimal-fake, verify)");
}

int cmd_sample(const std::string& from, bool teacher, bool use_ema, int64_t n, int nfe,
               uint64_t seed, const std::string& out) {
  Rng rng(seed);
  std::vector<double> samples;
  int dim = 1;
  if (teacher) {
    Mlp net = load_teacher(from);
    PathSpec spec;
    if (fs::is_directory(from) && fs::exists(fs::path(from) / "config.json")) {
      RunConfig cfg = RunConfig::from_file((fs::path(from) / "config.json").string());
      spec = cfg.path;
    }
    dim = static_cast<int>(net.spec().widths.back());
    samples = sample_teacher_ode(net, spec, nfe, n, rng);
  } else {
    auto b = load_generator(from);
    dim = static_cast<int>(b.gen.dim());
    if (b.gen.conditional) {
      RunConfig cfg = RunConfig::from_file((fs::path(from) / "config.json").string());
      auto data = make_coupling_dataset(cfg.data);
      std::vector<double> x0(static_cast<size_t>(n * dim)), xT(static_cast<size_t>(n * dim));
      data.sample_pair(rng, x0, xT);
      samples = sample_generator_cond(b.gen, xT, rng, use_ema ? b.ema : std::span<const double>{});
    } else {
      samples = sample_generator(b.gen, n, rng, use_ema ? b.ema : std::span<const double>{});
    }
  }
  fs::path out_path = out.empty() ? fs::path("samples.csv") : fs::path(out);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_samples_csv(out_path, samples, dim);
  std::cout << n << " samples written to " << out_path.string() << "\n";
  return 0;
}

int cmd_eval(const std::string& gen_dir, const std::string& ref, int64_t n, uint64_t seed) {
  RunConfig cfg = RunConfig::from_file((fs::path(gen_dir) / "config.json").string());
  auto b = load_generator(gen_dir);
  Rng rng(seed);
  auto samples = sample_generator(b.gen, n, rng, b.ema);
  const int dim = static_cast<int>(b.gen.dim());

  std::vector<double> reference;
  std::optional<Gauss1D> gauss;
  if (ref == "data") {
    auto data = make_dataset(cfg.data);
    reference = data.draw(rng, n);
    gauss = data.gauss;
  } else {
    int rdim = 0;
    reference = read_samples_csv(ref, rdim);
    if (rdim != dim) throw ConfigError("reference dimension does not match the generator");
  }

  MetricsRecord rec;
  rec.step = -1;
  rec.sliced_w2 = sliced_w2(samples, reference, dim, cfg.eval.n_projections, rng);
  const size_t cap = 2048 * static_cast<size_t>(dim);
  rec.energy_dist = energy_distance(
      std::span<const double>(samples).subspan(0, std::min(samples.size(), cap)),
      std::span<const double>(reference).subspan(0, std::min(reference.size(), cap)), dim);
  if (dim == 1 && gauss) rec.w2_gauss = w2_gaussian(fit_gauss1d(samples), *gauss);
  std::ofstream f(fs::path(gen_dir) / "metrics.jsonl", std::ios::app);
  f << rec.to_json_line() << "\n";
  std::cout << rec.to_json_line() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"one-step distillation laboratory for matching models"};
  app.require_subcommand(1);

  std::string config_path, out_dir, teacher_path, from_path;
  int threads = 1;
  int64_t seed_flag = -1;
  app.add_option("--threads", threads, "worker-thread cap (REALUID_THREADS also applies)");

  CoeffOverrides ov;

  auto* tt = app.add_subcommand("train-teacher", "pretrain the matching teacher on a dataset");
  tt->add_option("--config", config_path)->required();
  tt->add_option("--out", out_dir)->required();
  tt->add_option("--seed", seed_flag);

  auto* di = app.add_subcommand("distill", "run the alternating distillation loop");
  di->add_option("--config", config_path)->required();
  di->add_option("--teacher", teacher_path)->required();
  di->add_option("--out", out_dir)->required();
  di->add_option("--mode", ov.mode);
  di->add_option("--alpha", ov.alpha);
  di->add_option("--beta", ov.beta);
  di->add_option("--gamma", ov.gamma);
  di->add_option("--alpha-sid", ov.alpha_sid);
  di->add_option("--iters", ov.iters);
  di->add_option("--seed", seed_flag);

  double alpha_ft = -1, beta_ft = -1;
  auto* ft = app.add_subcommand(
      "finetune", "continue a run with fresh coefficients; the fake restarts from the teacher");
  ft->add_option("--from", from_path, "source run directory")->required();
  ft->add_option("--teacher", teacher_path)->required();
  ft->add_option("--out", out_dir)->required();
  ft->add_option("--alpha-ft", alpha_ft);
  ft->add_option("--beta-ft", beta_ft);
  ft->add_option("--iters", ov.iters);
  ft->add_option("--seed", seed_flag);
  ft->add_option("--config", config_path, "optional config overriding the source run's");

  std::string grid, pairs;
  auto* ab = app.add_subcommand("ablate", "sweep (alpha, beta) cells and summarize");
  ab->add_option("--config", config_path)->required();
  ab->add_option("--teacher", teacher_path)->required();
  ab->add_option("--out", out_dir)->required();
  ab->add_option("--grid", grid, "lo:hi:step over both axes");
  ab->add_option("--pairs", pairs, "explicit cells a,b;a,b;...");
  ab->add_option("--iters", ov.iters, "per-cell iteration override");
  ab->add_option("--seed", seed_flag);

  std::string oracle_sub, oracle_out;
  double mu_star = 0.0, mu_theta = 2.0;
  Coeffs oracle_coeffs;
  double oracle_gamma = -1.0;
  auto* orc = app.add_subcommand("oracle", "closed-form 1-D Gaussian ground truth");
  orc->add_option("subcommand", oracle_sub, "surface | distance | optimal-fake | verify")
      ->required();
  orc->add_option("--mu-star", mu_star);
  orc->add_option("--mu-theta", mu_theta);
  orc->add_option("--alpha", oracle_coeffs.alpha);
  orc->add_option("--beta", oracle_coeffs.beta);
  orc->add_option("--gamma", oracle_gamma);
  orc->add_option("--out", oracle_out, "CSV output path (stdout when omitted)");

  bool sample_teacher = false, sample_ema = false;
  int64_t sample_n = 10000;
  int nfe = 100;
  std::string sample_out;
  auto* sa = app.add_subcommand("sample", "draw samples from a checkpoint");
  sa->add_option("--from", from_path, "run directory or checkpoint prefix")->required();
  sa->add_flag("--teacher", sample_teacher, "integrate the teacher ODE instead");
  sa->add_flag("--ema", sample_ema, "use the EMA generator weights");
  sa->add_option("--n", sample_n);
  sa->add_option("--nfe", nfe, "teacher ODE steps");
  sa->add_option("--seed", seed_flag);
  sa->add_option("--out", sample_out);

  std::string eval_ref = "data";
  int64_t eval_n = 10000;
  auto* ev = app.add_subcommand("eval", "distribution metrics for a finished run");
  ev->add_option("--gen", from_path, "run directory")->required();
  ev->add_option("--ref", eval_ref, "'data' or a samples CSV");
  ev->add_option("--n", eval_n);
  ev->add_option("--seed", seed_flag);

  CLI11_PARSE(app, argc, argv);

  try {
    const uint64_t seed = seed_flag >= 0 ? static_cast<uint64_t>(seed_flag) : 0;
    if (tt->parsed()) {
      json cj = load_json_file(config_path);
      if (seed_flag >= 0) cj["train"]["seed"] = seed;
      return cmd_train_teacher(cj, out_dir);
    }
    if (di->parsed()) {
      json cj = load_json_file(config_path);
      if (seed_flag >= 0) ov.seed = seed_flag;
      ov.apply(cj);
      return run_distill(resolved_config(cj), teacher_path, out_dir, nullptr);
    }
    if (ft->parsed()) {
      const fs::path src(from_path);
      json cj = load_json_file(config_path.empty() ? (src / "config.json").string() : config_path);
      if (alpha_ft >= 0) cj["coeffs"]["alpha"] = alpha_ft;
      if (beta_ft >= 0) cj["coeffs"]["beta"] = beta_ft;
      if (!cj.contains("train")) cj["train"] = json::object();
      cj["train"]["lr_gen"] = 1e-5;  // fine-tuning step size; no warm-up via DistillInit
      cj["train"]["lr_fake"] = 1e-5;
      if (ov.iters >= 0) cj["train"]["n_iters"] = ov.iters;
      if (seed_flag >= 0) cj["train"]["seed"] = seed;
      RunConfig cfg = resolved_config(cj);
      auto bundle = load_generator(from_path);
      DistillInit init;
      init.gen_params = bundle.gen.net.params();
      init.ema_shadow = bundle.ema;
      init.fake_from_teacher = true;
      init.no_warmup = true;
      return run_distill(cfg, teacher_path, out_dir, &init);
    }
    if (ab->parsed()) {
      json cj = load_json_file(config_path);
      if (seed_flag >= 0) cj["train"]["seed"] = seed;
      return cmd_ablate(cj, teacher_path, out_dir, grid, pairs, ov.iters, threads);
    }
    if (orc->parsed()) {
      oracle_coeffs.gamma = oracle_gamma >= 0 ? oracle_gamma : oracle_coeffs.alpha;
      oracle_coeffs.validate();
      return cmd_oracle(oracle_sub, mu_star, mu_theta, oracle_coeffs, oracle_out);
    }
    if (sa->parsed())
      return cmd_sample(from_path, sample_teacher, sample_ema, sample_n, nfe, seed, sample_out);
    if (ev->parsed()) return cmd_eval(from_path, eval_ref, eval_n, seed);
  } catch (const ModeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMode;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const TrainingAborted& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAborted;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return 0;
}
