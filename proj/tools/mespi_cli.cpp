// Command-line pipeline driver: simulation, reconstruction baselines,
// self-supervised training, inference, fMRI analysis and reporting, all
// exchanging data through on-disk stores.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "mespi/acquisition.hpp"
#include "mespi/bold.hpp"
#include "mespi/datastore.hpp"
#include "mespi/png_io.hpp"
#include "mespi/solvers.hpp"
#include "mespi/ssdu.hpp"
#include "mespi/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mespi;

namespace {

// JSON config file: keys mirror the long option names; explicit command-line
// flags win over config values.
struct ConfigFile {
  json j = json::object();

  void load(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config file " + path);
    in >> j;
  }
  template <typename T>
  void fill(const CLI::App &app, const std::string &flag, T &var) const {
    if (app.count("--" + flag) == 0 && j.contains(flag)) var = j.at(flag).get<T>();
  }
};

std::string frame_name(const std::string &prefix, int t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_f%04d", prefix.c_str(), t);
  return buf;
}

// ---- store <-> domain type helpers ----

void put_traj(Store &store, const std::string &prefix, const Trajectory &traj) {
  std::vector<double> kx(traj.kx.begin(), traj.kx.end());
  std::vector<double> ky(traj.ky.begin(), traj.ky.end());
  const std::vector<int64_t> shape = {traj.arm_count, traj.samples_per_arm};
  store[prefix + "_kx"] = ArrayData::real(shape, kx);
  store[prefix + "_ky"] = ArrayData::real(shape, ky);
}

Trajectory get_traj(const Store &store, const std::string &prefix) {
  const ArrayData &kx = require(store, prefix + "_kx");
  const ArrayData &ky = require(store, prefix + "_ky");
  if (kx.shape.size() != 2 || kx.shape != ky.shape)
    throw std::runtime_error("malformed trajectory arrays for " + prefix);
  Trajectory traj;
  traj.arm_count = static_cast<int>(kx.shape[0]);
  traj.samples_per_arm = static_cast<int>(kx.shape[1]);
  const std::vector<double> x = kx.as_real(), y = ky.as_real();
  traj.kx.assign(x.begin(), x.end());
  traj.ky.assign(y.begin(), y.end());
  return traj;
}

void put_stack(Store &store, const std::string &name, const ImageStack &x) {
  store[name] = ArrayData::complex({x.echoes, x.grid.rows, x.grid.cols}, x.v);
}

ImageStack get_stack(const Store &store, const std::string &name) {
  const ArrayData &a = require(store, name);
  if (a.shape.size() != 3) throw std::runtime_error("array " + name + " is not an image stack");
  ImageStack x(static_cast<int>(a.shape[0]),
               {static_cast<int>(a.shape[1]), static_cast<int>(a.shape[2])});
  x.v = a.as_complex();
  return x;
}

void put_maps(Store &store, const CoilMaps &maps) {
  store["maps"] = ArrayData::complex({maps.coil_count, maps.grid.rows, maps.grid.cols}, maps.maps);
}

CoilMaps get_maps(const Store &store) {
  const ArrayData &a = require(store, "maps");
  if (a.shape.size() != 3) throw std::runtime_error("array maps is not a coil stack");
  CoilMaps maps(static_cast<int>(a.shape[0]),
                {static_cast<int>(a.shape[1]), static_cast<int>(a.shape[2])});
  maps.maps = a.as_complex();
  return maps;
}

void put_kspace(Store &store, const std::string &name, const MultiEchoKSpace &y) {
  store[name] = ArrayData::complex({y.coils, y.echoes, y.samples}, y.v);
}

MultiEchoKSpace get_kspace(const Store &store, const std::string &name) {
  const ArrayData &a = require(store, name);
  if (a.shape.size() != 3) throw std::runtime_error("array " + name + " is not k-space data");
  MultiEchoKSpace y(static_cast<int>(a.shape[0]), static_cast<int>(a.shape[1]),
                    static_cast<int>(a.shape[2]));
  y.v = a.as_complex();
  return y;
}

EchoSchedule sched_from_meta(const json &meta) {
  EchoSchedule sched;
  sched.tes = meta.at("tes").get<std::vector<double>>();
  return sched;
}

void save_params(const std::string &dir, const ModelParams &params,
                 const std::vector<double> &epoch_loss, const Provenance &prov) {
  Store store;
  for (size_t d = 0; d < params.layers.size(); ++d) {
    const ConvLayer &layer = params.layers[d];
    const std::string base = "layer" + std::to_string(d);
    store[base + "_w"] = ArrayData::real({layer.out_ch, layer.in_ch, 3, 3}, layer.w);
    store[base + "_b"] = ArrayData::real({layer.out_ch}, layer.b);
  }
  store["mu_log"] = ArrayData::real({1}, {params.mu_log});
  if (!epoch_loss.empty())
    store["epoch_loss"] = ArrayData::real({static_cast<int64_t>(epoch_loss.size())}, epoch_loss);
  const ModelConfig &mc = params.config;
  json meta = {{"echoes", mc.echoes},       {"depth", mc.depth},
               {"width", mc.width},         {"unrolls", mc.unrolls},
               {"df_iterations", mc.df_iterations}, {"mu_init", mc.mu_init},
               {"df_warm_start", mc.df_warm_start}};
  save_store(dir, store, prov, &meta);
}

ModelParams load_params(const std::string &dir) {
  json meta;
  const Store store = load_store(dir, nullptr, &meta);
  ModelConfig mc;
  mc.echoes = meta.at("echoes").get<int>();
  mc.depth = meta.at("depth").get<int>();
  mc.width = meta.at("width").get<int>();
  mc.unrolls = meta.at("unrolls").get<int>();
  mc.df_iterations = meta.at("df_iterations").get<int>();
  mc.mu_init = meta.at("mu_init").get<double>();
  mc.df_warm_start = meta.at("df_warm_start").get<bool>();
  ModelParams params = init_params(mc, 0);
  for (size_t d = 0; d < params.layers.size(); ++d) {
    const std::string base = "layer" + std::to_string(d);
    ConvLayer &layer = params.layers[d];
    layer.w = require(store, base + "_w").as_real();
    layer.b = require(store, base + "_b").as_real();
    if (static_cast<int>(layer.w.size()) != layer.out_ch * layer.in_ch * 9 ||
        static_cast<int>(layer.b.size()) != layer.out_ch)
      throw std::runtime_error("checkpoint layer " + std::to_string(d) + " has the wrong shape");
  }
  params.mu_log = require(store, "mu_log").as_real().at(0);
  return params;
}

double percentile_window(std::vector<double> mags, double pct) {
  if (mags.empty()) return 1.0;
  const size_t k = std::min(mags.size() - 1,
                            static_cast<size_t>(pct / 100.0 * (mags.size() - 1)));
  std::nth_element(mags.begin(), mags.begin() + k, mags.end());
  return std::max(mags[k], 1e-30);
}

json nrmse_report(const ImageStack &recon, const ImageStack &truth) {
  if (recon.echoes != truth.echoes || !(recon.grid == truth.grid))
    throw std::runtime_error("recon/truth shape mismatch");
  auto safe_nrmse = [](const cplx *a, const cplx *b, size_t n) {
    double d2 = 0, b2 = 0;
    for (size_t i = 0; i < n; ++i) {
      d2 += std::norm(a[i] - b[i]);
      b2 += std::norm(b[i]);
    }
    if (b2 == 0) return d2 == 0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(d2 / b2);
  };
  json out;
  out["nrmse"] = safe_nrmse(recon.v.data(), truth.v.data(), recon.v.size());
  json per = json::array();
  for (int e = 0; e < recon.echoes; ++e)
    per.push_back(safe_nrmse(recon.echo(e), truth.echo(e),
                             static_cast<size_t>(recon.grid.pixels())));
  out["per_echo_nrmse"] = per;
  return out;
}

// ---- subcommands ----

struct SimulateArgs {
  std::string out, config;
  uint64_t seed = 0;
  int grid = 64, coils = 8, arms = 10, spa = 3000, echoes = 6;
  double turns = 3.3, noise = 0.01;
};

void run_simulate(const CLI::App &app, SimulateArgs &a) {
  ConfigFile cf;
  if (!a.config.empty()) cf.load(a.config);
  cf.fill(app, "grid", a.grid);
  cf.fill(app, "coils", a.coils);
  cf.fill(app, "arms", a.arms);
  cf.fill(app, "samples-per-arm", a.spa);
  cf.fill(app, "echoes", a.echoes);
  cf.fill(app, "turns", a.turns);
  cf.fill(app, "noise", a.noise);

  const Grid grid{a.grid, a.grid};
  EchoSchedule sched = EchoSchedule::paper_defaults();
  if (a.echoes < 1 || a.echoes > sched.count())
    throw std::runtime_error("echoes must be between 1 and " + std::to_string(sched.count()));
  sched.tes.resize(a.echoes);

  const Trajectory full = make_spiral(grid, a.arms, a.spa, a.turns);
  const Trajectory accel = subsample_arms(full, {0});
  const CoilMaps maps = simulate_coils(grid, a.coils);
  const Phantom ph = make_phantom(grid, a.seed);
  const ImageStack truth = phantom_echo_images(ph, sched);

  Store store;
  put_traj(store, "traj", full);
  put_traj(store, "traj_r10", accel);
  put_maps(store, maps);
  put_stack(store, "truth", truth);
  store["m0"] = ArrayData::real({grid.rows, grid.cols}, ph.m0);
  store["t2star"] = ArrayData::real({grid.rows, grid.cols}, ph.t2star);
  put_kspace(store, "kspace", simulate_kspace(truth, maps, full, a.noise, CounterRng::mix(a.seed, 1)));
  put_kspace(store, "kspace_r10", simulate_kspace(truth, maps, accel, a.noise, CounterRng::mix(a.seed, 2)));

  json meta = {{"grid", {grid.rows, grid.cols}}, {"tes", sched.tes},
               {"arms", a.arms},                 {"samples_per_arm", a.spa},
               {"turns", a.turns},               {"noise", a.noise},
               {"coils", a.coils}};
  Provenance prov;
  prov.seed = a.seed;
  save_store(a.out, store, prov, &meta);
}

struct DcfArgs {
  std::string in, out, config, traj = "r10";
  uint64_t seed = 0;
  int iterations = 30;
};

void run_dcf(const CLI::App &app, DcfArgs &a) {
  ConfigFile cf;
  if (!a.config.empty()) cf.load(a.config);
  cf.fill(app, "traj", a.traj);
  cf.fill(app, "iterations", a.iterations);
  json meta;
  const Store in = load_store(a.in, nullptr, &meta);
  const Trajectory traj = get_traj(in, a.traj == "full" ? "traj" : "traj_r10");
  const auto g = meta.at("grid").get<std::vector<int>>();
  const DcfWeights w = pipe_menon(traj, {g[0], g[1]}, a.iterations);
  Store out;
  out["weights"] = ArrayData::real({traj.samples()}, w.w);
  Provenance prov;
  prov.seed = a.seed;
  json ometa = {{"traj", a.traj}, {"iterations", a.iterations}, {"clamped", w.clamped}};
  save_store(a.out, out, prov, &ometa);
}

struct ReconArgs {
  std::string in, out, config, traj = "r10";
  uint64_t seed = 0;
  int iterations = 30;
  double lambda = -1.0;
};

void run_recon_baseline(const CLI::App &app, ReconArgs &a, bool cgsense) {
  ConfigFile cf;
  if (!a.config.empty()) cf.load(a.config);
  cf.fill(app, "traj", a.traj);
  if (cgsense) {
    cf.fill(app, "iterations", a.iterations);
    cf.fill(app, "lambda", a.lambda);
  }
  json meta;
  const Store in = load_store(a.in, nullptr, &meta);
  const bool full = a.traj == "full";
  const Trajectory traj = get_traj(in, full ? "traj" : "traj_r10");
  const MultiEchoKSpace y = get_kspace(in, full ? "kspace" : "kspace_r10");
  const CoilMaps maps = get_maps(in);
  const auto g = meta.at("grid").get<std::vector<int>>();
  const Grid grid{g[0], g[1]};
  const SenseOperator op(std::make_shared<NufftPlan>(grid, traj), maps, pipe_menon(traj, grid));

  ImageStack recon;
  json ometa = {{"traj", a.traj}};
  if (cgsense) {
    auto [x, report] = cg_sense(op, y, a.iterations, a.lambda);
    recon = std::move(x);
    ometa["method"] = "cg-sense";
    ometa["iterations"] = report.iterations_run;
  } else {
    recon = gridding_recon(op, y);
    ometa["method"] = "gridding";
  }
  ometa["tes"] = meta.at("tes");
  Store out;
  put_stack(out, "recon", recon);
  Provenance prov;
  prov.seed = a.seed;
  save_store(a.out, out, prov, &ometa);
}

struct MasksArgs {
  std::string in, out, config;
  uint64_t seed = 0;
  int count = 7, center = 32;
  double fraction = 0.6;
};

void run_masks(const CLI::App &app, MasksArgs &a) {
  ConfigFile cf;
  if (!a.config.empty()) cf.load(a.config);
  cf.fill(app, "count", a.count);
  cf.fill(app, "center", a.center);
  cf.fill(app, "fraction", a.fraction);
  const Store in = load_store(a.in);
  const Trajectory traj = get_traj(in, "traj_r10");
  const SsduMaskSet set = make_masks(traj.samples(), a.count, a.fraction, a.center, a.seed);
  Store out;
  for (int j = 0; j < a.count; ++j) {
    out["theta" + std::to_string(j)] =
        ArrayData::ints({static_cast<int64_t>(set.masks[j].theta.size())}, set.masks[j].theta);
    out["lambda" + std::to_string(j)] =
        ArrayData::ints({static_cast<int64_t>(set.masks[j].lambda.size())}, set.masks[j].lambda);
  }
  Provenance prov;
  prov.seed = a.seed;
  json meta = {{"count", a.count},       {"fraction", a.fraction},
               {"center", a.center},     {"omega_size", set.omega_size}};
  save_store(a.out, out, prov, &meta);
}

struct TrainArgs {
  std::vector<std::string> in;
  std::string out, config, optimizer = "adaptive-moments";
  uint64_t seed = 0;
  int epochs = 100, mask_count = 7, center = 32;
  double lr = 5e-4, fraction = 0.6;
  int depth = 5, width = 32, unrolls = 10, df_iterations = 15;
  double mu_init = 0.05;
  int checkpoint_every = 0;
};

void run_train(const CLI::App &app, TrainArgs &a) {
  ConfigFile cf;
  if (!a.config.empty()) cf.load(a.config);
  cf.fill(app, "epochs", a.epochs);
  cf.fill(app, "mask-count", a.mask_count);
  cf.fill(app, "center", a.center);
  cf.fill(app, "learning-rate", a.lr);
  cf.fill(app, "fraction", a.fraction);
  cf.fill(app, "optimizer", a.optimizer);
  cf.fill(app, "depth", a.depth);
  cf.fill(app, "width", a.width);
  cf.fill(app, "unrolls", a.unrolls);
  cf.fill(app, "df-iterations", a.df_iterations);
  cf.fill(app, "mu-init", a.mu_init);
  cf.fill(app, "checkpoint-every", a.checkpoint_every);

  std::vector<TrainSample> dataset;
  int echoes = 0;
  for (const std::string &dir : a.in) {
    const Store store = load_store(dir);
    TrainSample s{get_kspace(store, "kspace_r10"), get_traj(store, "traj_r10"), get_maps(store)};
    if (echoes == 0)
      echoes = s.kspace.echoes;
    else if (echoes != s.kspace.echoes)
      throw std::runtime_error("training inputs disagree on echo count");
    dataset.push_back(std::move(s));
  }

  TrainConfig cfg;
  cfg.learning_rate = a.lr;
  cfg.epochs = a.epochs;
  cfg.mask_count = a.mask_count;
  cfg.theta_fraction = a.fraction;
  cfg.center_retained = a.center;
  cfg.seed = a.seed;
  cfg.optimizer = a.optimizer == "plain-sgd" ? Optimizer::kPlainSgd : Optimizer::kAdaptiveMoments;
  cfg.model.echoes = echoes;
  cfg.model.depth = a.depth;
  cfg.model.width = a.width;
  cfg.model.unrolls = a.unrolls;
  cfg.model.df_iterations = a.df_iterations;
  cfg.model.mu_init = a.mu_init;

  Provenance prov;
  prov.seed = a.seed;
  fs::create_directories(a.out);
  std::ofstream tsv(fs::path(a.out) / "loss.tsv");
  tsv << "epoch\tmean_loss\n";
  const TrainResult result =
      train(dataset, cfg, [&](int epoch, double loss, const ModelParams &params) {
        char row[64];
        std::snprintf(row, sizeof(row), "%d\t%.12g\n", epoch, loss);
        tsv << row;
        tsv.flush();
        if (a.checkpoint_every > 0 && (epoch + 1) % a.checkpoint_every == 0) {
          char sub[32];
          std::snprintf(sub, sizeof(sub), "epoch_%04d", epoch);
          save_params((fs::path(a.out) / sub).string(), params, {}, prov);
        }
      });
  save_params(a.out, result.params, result.epoch_loss, prov);
}

struct PddlArgs {
  std::string in, checkpoint, out, config;
  uint64_t seed = 0;
  bool series = false;
};

void run_recon_pddl(const CLI::App &app, PddlArgs &a) {
  ConfigFile cf;
  if (!a.config.empty()) cf.load(a.config);
  (void)app;
  const ModelParams params = load_params(a.checkpoint);
  json meta;
  const Store in = load_store(a.in, nullptr, &meta);
  const CoilMaps maps = get_maps(in);
  Store out;
  json ometa = {{"method", "pd-dl"}, {"tes", meta.at("tes")}};
  Provenance prov;
  prov.seed = a.seed;
  if (a.series) {
    const Trajectory traj = get_traj(in, "traj_r10");
    const int frames = meta.at("frames").get<int>();
    for (int t = 0; t < frames; ++t) {
      const MultiEchoKSpace y = get_kspace(in, frame_name("kspace", t));
      put_stack(out, frame_name("recon", t), reconstruct(params, y, traj, maps));
    }
    ometa["frames"] = frames;
    ometa["tr"] = meta.at("tr");
  } else {
    const Trajectory traj = get_traj(in, "traj_r10");
    const MultiEchoKSpace y = get_kspace(in, "kspace_r10");
    put_stack(out, "recon", reconstruct(params, y, traj, maps));
  }
  save_store(a.out, out, prov, &ometa);
}

struct FmriArgs {
  std::string out, config;
  uint64_t seed = 0;
  int grid = 64, coils = 8, spa = 3000, echoes = 6, blocks = 6;
  double turns = 3.3, noise = 0.01, tr = 2.0, on = 20.0, off = 20.0, amp = 0.02;
};

void run_fmri_sim(const CLI::App &app, FmriArgs &a) {
  ConfigFile cf;
  if (!a.config.empty()) cf.load(a.config);
  cf.fill(app, "grid", a.grid);
  cf.fill(app, "coils", a.coils);
  cf.fill(app, "samples-per-arm", a.spa);
  cf.fill(app, "echoes", a.echoes);
  cf.fill(app, "turns", a.turns);
  cf.fill(app, "noise", a.noise);
  cf.fill(app, "tr", a.tr);
  cf.fill(app, "block-on", a.on);
  cf.fill(app, "block-off", a.off);
  cf.fill(app, "blocks", a.blocks);
  cf.fill(app, "amp", a.amp);

  const Grid grid{a.grid, a.grid};
  EchoSchedule sched = EchoSchedule::paper_defaults();
  sched.tes.resize(a.echoes);
  const double duration = a.off + a.blocks * (a.on + a.off);
  const int frames = static_cast<int>(std::ceil(duration / a.tr));

  // accelerated single-arm acquisition per frame
  const Trajectory full = make_spiral(grid, 10, a.spa, a.turns);
  const Trajectory accel = subsample_arms(full, {0});
  const CoilMaps maps = simulate_coils(grid, a.coils);
  const Phantom ph = make_phantom(grid, a.seed);

  // disc of activated tissue off the phantom center
  std::vector<double> mask(static_cast<size_t>(grid.pixels()), 0.0);
  const double mr = 0.40 * grid.rows, mc = 0.58 * grid.cols;
  const double rad = 0.10 * std::min(grid.rows, grid.cols);
  for (int r = 0; r < grid.rows; ++r)
    for (int q = 0; q < grid.cols; ++q) {
      const size_t i = static_cast<size_t>(r) * grid.cols + q;
      if (std::hypot(r - mr, q - mc) <= rad && ph.m0[i] > 0.1) mask[i] = 1.0;
    }

  // task regressor, unit plateau
  const DesignMatrix design = build_design(frames, a.tr, a.on, a.off, a.blocks);
  std::vector<double> task = design.columns[0];
  double peak = 0;
  for (double v : task) peak = std::max(peak, v);
  for (double &v : task) v /= peak;

  Store store;
  put_traj(store, "traj_r10", accel);
  put_maps(store, maps);
  store["mask"] = ArrayData::real({grid.rows, grid.cols}, mask);
  store["m0"] = ArrayData::real({grid.rows, grid.cols}, ph.m0);
  store["t2star"] = ArrayData::real({grid.rows, grid.cols}, ph.t2star);
  for (int t = 0; t < frames; ++t) {
    Phantom mod = ph;
    for (int i = 0; i < grid.pixels(); ++i)
      mod.m0[i] *= 1.0 + a.amp * task[t] * mask[i];
    const ImageStack truth = phantom_echo_images(mod, sched);
    put_stack(store, frame_name("truth", t), truth);
    put_kspace(store, frame_name("kspace", t),
               simulate_kspace(truth, maps, accel, a.noise, CounterRng::mix(a.seed, 100 + t)));
  }
  json meta = {{"grid", {grid.rows, grid.cols}}, {"tes", sched.tes},   {"frames", frames},
               {"tr", a.tr},                     {"block_on", a.on},   {"block_off", a.off},
               {"blocks", a.blocks},             {"amp", a.amp},       {"noise", a.noise},
               {"coils", a.coils}};
  Provenance prov;
  prov.seed = a.seed;
  save_store(a.out, store, prov, &meta);
}

struct BoldArgs {
  std::string in, sim, out, config, source = "recon";
  uint64_t seed = 0;
  bool fit_t2star = false;
};

void run_bold(const CLI::App &app, BoldArgs &a) {
  ConfigFile cf;
  if (!a.config.empty()) cf.load(a.config);
  cf.fill(app, "source", a.source);
  if (a.sim.empty()) a.sim = a.in;
  json meta_in, meta_sim;
  const Store frames_store = load_store(a.in, nullptr, &meta_in);
  const Store sim_store = load_store(a.sim, nullptr, &meta_sim);

  const EchoSchedule sched = sched_from_meta(meta_sim);
  const int frames = meta_sim.at("frames").get<int>();
  const double tr = meta_sim.at("tr").get<double>();
  const auto g = meta_sim.at("grid").get<std::vector<int>>();
  const Grid grid{g[0], g[1]};
  const std::string prefix = a.source == "truth" ? "truth" : "recon";

  std::vector<TimeSeries> echo_series(sched.count(), TimeSeries(frames, grid, tr));
  ImageStack mean_echoes(sched.count(), grid);
  for (int t = 0; t < frames; ++t) {
    const ImageStack frame = get_stack(frames_store, frame_name(prefix, t));
    if (frame.echoes != sched.count() || !(frame.grid == grid))
      throw std::runtime_error("frame " + std::to_string(t) + " has the wrong shape");
    for (int e = 0; e < sched.count(); ++e) {
      for (int i = 0; i < grid.pixels(); ++i) {
        echo_series[e].frame(t)[i] = std::abs(frame.echo(e)[i]);
        mean_echoes.echo(e)[i] += frame.echo(e)[i] / static_cast<double>(frames);
      }
    }
  }

  std::vector<double> t2star;
  if (a.fit_t2star) {
    t2star = t2star_fit(mean_echoes, sched);
  } else {
    t2star = require(sim_store, "t2star").as_real();
    for (double &v : t2star) v = std::max(v, 1e-3);
  }
  const TimeSeries combined = echo_combine(echo_series, sched, t2star);
  const DesignMatrix design =
      build_design(frames, tr, meta_sim.at("block_on").get<double>(),
                   meta_sim.at("block_off").get<double>(), meta_sim.at("blocks").get<int>());
  const GlmResult glm = glm_fit(combined, design);

  Store out;
  out["t_map"] = ArrayData::real({grid.rows, grid.cols}, glm.t_map);
  out["beta_task"] = ArrayData::real({grid.rows, grid.cols}, glm.beta[0]);
  Provenance prov;
  prov.seed = a.seed;
  json ometa = {{"source", prefix}, {"frames", frames}, {"grid", {grid.rows, grid.cols}}};
  save_store(a.out, out, prov, &ometa);
  write_signed_map((fs::path(a.out) / "t_map.png").string(), glm.t_map, grid);
}

struct ReportArgs {
  std::string in, truth, bold, sim, out, config;
  uint64_t seed = 0;
  double window = 99.0;
};

void run_report(const CLI::App &app, ReportArgs &a) {
  ConfigFile cf;
  if (!a.config.empty()) cf.load(a.config);
  cf.fill(app, "window", a.window);
  const Store in = load_store(a.in);
  const ImageStack recon = get_stack(in, "recon");

  json report;
  if (!a.truth.empty()) {
    const Store truth_store = load_store(a.truth);
    report = nrmse_report(recon, get_stack(truth_store, "truth"));
  } else {
    report = nrmse_report(recon, recon);
  }

  if (!a.bold.empty()) {
    const Store bold_store = load_store(a.bold);
    const std::vector<double> t_map = require(bold_store, "t_map").as_real();
    json t_stats = {{"max", t_map.empty() ? 0.0 : *std::max_element(t_map.begin(), t_map.end())}};
    if (!a.sim.empty()) {
      const Store sim_store = load_store(a.sim);
      const std::vector<double> mask = require(sim_store, "mask").as_real();
      if (mask.size() != t_map.size()) throw std::runtime_error("mask/t_map size mismatch");
      double in_sum = 0, out_sum = 0;
      int in_n = 0, out_n = 0;
      for (size_t i = 0; i < mask.size(); ++i) {
        if (mask[i] > 0.5) {
          in_sum += t_map[i];
          ++in_n;
        } else {
          out_sum += std::abs(t_map[i]);
          ++out_n;
        }
      }
      t_stats["mean_in_mask"] = in_n ? in_sum / in_n : 0.0;
      t_stats["mean_out_mask_abs"] = out_n ? out_sum / out_n : 0.0;
    }
    report["t_stats"] = t_stats;
  } else {
    report["t_stats"] = json::object();
  }

  fs::create_directories(a.out);
  {
    std::ofstream jf(fs::path(a.out) / "report.json");
    jf << report.dump(2) << "\n";
    if (!jf) throw std::runtime_error("cannot write report.json in " + a.out);
  }
  write_magnitude_montage((fs::path(a.out) / "montage.png").string(), recon, a.window);
  std::printf("%s\n", report.dump().c_str());
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"multi-echo spiral reconstruction pipeline"};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App *c_sim = app.add_subcommand("simulate", "phantom, coils, trajectory and k-space");
  c_sim->add_option("--out", sim.out)->required();
  c_sim->add_option("--seed", sim.seed);
  c_sim->add_option("--config", sim.config);
  c_sim->add_option("--grid", sim.grid);
  c_sim->add_option("--coils", sim.coils);
  c_sim->add_option("--arms", sim.arms);
  c_sim->add_option("--samples-per-arm", sim.spa);
  c_sim->add_option("--echoes", sim.echoes);
  c_sim->add_option("--turns", sim.turns);
  c_sim->add_option("--noise", sim.noise);

  DcfArgs dcf;
  CLI::App *c_dcf = app.add_subcommand("dcf", "density compensation weights");
  c_dcf->add_option("--in", dcf.in)->required();
  c_dcf->add_option("--out", dcf.out)->required();
  c_dcf->add_option("--seed", dcf.seed);
  c_dcf->add_option("--config", dcf.config);
  c_dcf->add_option("--traj", dcf.traj)->check(CLI::IsMember({"full", "r10"}));
  c_dcf->add_option("--iterations", dcf.iterations);

  ReconArgs grid_args, cg_args;
  CLI::App *c_grid = app.add_subcommand("recon-grid", "density-compensated gridding baseline");
  CLI::App *c_cg = app.add_subcommand("recon-cgsense", "iterative SENSE baseline");
  for (auto [cmd, args] : {std::pair{c_grid, &grid_args}, std::pair{c_cg, &cg_args}}) {
    cmd->add_option("--in", args->in)->required();
    cmd->add_option("--out", args->out)->required();
    cmd->add_option("--seed", args->seed);
    cmd->add_option("--config", args->config);
    cmd->add_option("--traj", args->traj)->check(CLI::IsMember({"full", "r10"}));
  }
  c_cg->add_option("--iterations", cg_args.iterations);
  c_cg->add_option("--lambda", cg_args.lambda);

  MasksArgs masks;
  CLI::App *c_masks = app.add_subcommand("masks", "self-supervision mask sets");
  c_masks->add_option("--in", masks.in)->required();
  c_masks->add_option("--out", masks.out)->required();
  c_masks->add_option("--seed", masks.seed);
  c_masks->add_option("--config", masks.config);
  c_masks->add_option("--count", masks.count);
  c_masks->add_option("--fraction", masks.fraction);
  c_masks->add_option("--center", masks.center);

  TrainArgs tr;
  CLI::App *c_train = app.add_subcommand("train-ssdu", "self-supervised training loop");
  c_train->add_option("--in", tr.in)->required()->expected(-1);
  c_train->add_option("--out", tr.out)->required();
  c_train->add_option("--seed", tr.seed);
  c_train->add_option("--config", tr.config);
  c_train->add_option("--epochs", tr.epochs);
  c_train->add_option("--mask-count", tr.mask_count);
  c_train->add_option("--center", tr.center);
  c_train->add_option("--learning-rate", tr.lr);
  c_train->add_option("--fraction", tr.fraction);
  c_train->add_option("--optimizer", tr.optimizer)
      ->check(CLI::IsMember({"adaptive-moments", "plain-sgd"}));
  c_train->add_option("--depth", tr.depth);
  c_train->add_option("--width", tr.width);
  c_train->add_option("--unrolls", tr.unrolls);
  c_train->add_option("--df-iterations", tr.df_iterations);
  c_train->add_option("--mu-init", tr.mu_init);
  c_train->add_option("--checkpoint-every", tr.checkpoint_every);

  PddlArgs pddl;
  CLI::App *c_pddl = app.add_subcommand("recon-pddl", "inference with a trained checkpoint");
  c_pddl->add_option("--in", pddl.in)->required();
  c_pddl->add_option("--checkpoint", pddl.checkpoint)->required();
  c_pddl->add_option("--out", pddl.out)->required();
  c_pddl->add_option("--seed", pddl.seed);
  c_pddl->add_option("--config", pddl.config);
  c_pddl->add_flag("--series", pddl.series, "reconstruct every frame of an fMRI store");

  FmriArgs fmri;
  CLI::App *c_fmri = app.add_subcommand("fmri-sim", "block-design multi-echo time series");
  c_fmri->add_option("--out", fmri.out)->required();
  c_fmri->add_option("--seed", fmri.seed);
  c_fmri->add_option("--config", fmri.config);
  c_fmri->add_option("--grid", fmri.grid);
  c_fmri->add_option("--coils", fmri.coils);
  c_fmri->add_option("--samples-per-arm", fmri.spa);
  c_fmri->add_option("--echoes", fmri.echoes);
  c_fmri->add_option("--turns", fmri.turns);
  c_fmri->add_option("--noise", fmri.noise);
  c_fmri->add_option("--tr", fmri.tr);
  c_fmri->add_option("--block-on", fmri.on);
  c_fmri->add_option("--block-off", fmri.off);
  c_fmri->add_option("--blocks", fmri.blocks);
  c_fmri->add_option("--amp", fmri.amp);

  BoldArgs bold;
  CLI::App *c_bold = app.add_subcommand("bold", "echo combination, GLM and t-map");
  c_bold->add_option("--in", bold.in)->required();
  c_bold->add_option("--sim", bold.sim);
  c_bold->add_option("--out", bold.out)->required();
  c_bold->add_option("--seed", bold.seed);
  c_bold->add_option("--config", bold.config);
  c_bold->add_option("--source", bold.source)->check(CLI::IsMember({"recon", "truth"}));
  c_bold->add_flag("--fit-t2star", bold.fit_t2star, "estimate T2* from the data");

  ReportArgs rep;
  CLI::App *c_rep = app.add_subcommand("report", "PNG montage and JSON summary");
  c_rep->add_option("--in", rep.in)->required();
  c_rep->add_option("--truth", rep.truth);
  c_rep->add_option("--bold", rep.bold);
  c_rep->add_option("--sim", rep.sim);
  c_rep->add_option("--out", rep.out)->required();
  c_rep->add_option("--seed", rep.seed);
  c_rep->add_option("--config", rep.config);
  c_rep->add_option("--window", rep.window);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_sim->parsed()) run_simulate(*c_sim, sim);
    if (c_dcf->parsed()) run_dcf(*c_dcf, dcf);
    if (c_grid->parsed()) run_recon_baseline(*c_grid, grid_args, false);
    if (c_cg->parsed()) run_recon_baseline(*c_cg, cg_args, true);
    if (c_masks->parsed()) run_masks(*c_masks, masks);
    if (c_train->parsed()) run_train(*c_train, tr);
    if (c_pddl->parsed()) run_recon_pddl(*c_pddl, pddl);
    if (c_fmri->parsed()) run_fmri_sim(*c_fmri, fmri);
    if (c_bold->parsed()) run_bold(*c_bold, bold);
    if (c_rep->parsed()) run_report(*c_rep, rep);
  } catch (const std::exception &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
