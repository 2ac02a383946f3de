#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mespi/acquisition.hpp"
#include "mespi/bold.hpp"
#include "mespi/datastore.hpp"
#include "mespi/solvers.hpp"
#include "mespi/ssdu.hpp"
#include "mespi/training.hpp"

namespace py = pybind11;
using namespace mespi;

namespace {

using CArray = py::array_t<cplx, py::array::c_style | py::array::forcecast>;
using RArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

ImageStack to_stack(const CArray &a) {
  if (a.ndim() != 3) throw std::invalid_argument("expected a (echo, row, col) complex array");
  ImageStack x(static_cast<int>(a.shape(0)),
               {static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2))});
  std::copy(a.data(), a.data() + a.size(), x.v.begin());
  return x;
}

py::array from_stack(const ImageStack &x) {
  py::array_t<cplx> out({x.echoes, x.grid.rows, x.grid.cols});
  std::copy(x.v.begin(), x.v.end(), out.mutable_data());
  return out;
}

CoilMaps to_maps(const CArray &a) {
  if (a.ndim() != 3) throw std::invalid_argument("expected a (coil, row, col) complex array");
  CoilMaps maps(static_cast<int>(a.shape(0)),
                {static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2))});
  std::copy(a.data(), a.data() + a.size(), maps.maps.begin());
  return maps;
}

py::array from_maps(const CoilMaps &maps) {
  py::array_t<cplx> out({maps.coil_count, maps.grid.rows, maps.grid.cols});
  std::copy(maps.maps.begin(), maps.maps.end(), out.mutable_data());
  return out;
}

MultiEchoKSpace to_kspace(const CArray &a) {
  if (a.ndim() != 3) throw std::invalid_argument("expected a (coil, echo, sample) complex array");
  MultiEchoKSpace y(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                    static_cast<int>(a.shape(2)));
  std::copy(a.data(), a.data() + a.size(), y.v.begin());
  return y;
}

py::array from_kspace(const MultiEchoKSpace &y) {
  py::array_t<cplx> out({y.coils, y.echoes, y.samples});
  std::copy(y.v.begin(), y.v.end(), out.mutable_data());
  return out;
}

py::array real2d(const std::vector<double> &v, Grid grid) {
  py::array_t<double> out({grid.rows, grid.cols});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

SenseOperator make_op(const Trajectory &traj, const CoilMaps &maps, int rows, int cols,
                      const std::vector<double> &weights) {
  DcfWeights w;
  w.w = weights.empty() ? pipe_menon(traj, {rows, cols}).w : weights;
  return SenseOperator(std::make_shared<NufftPlan>(Grid{rows, cols}, traj), maps,
                       DcfWeights{std::move(w.w)});
}

}  // namespace

PYBIND11_MODULE(_mespi, m) {
  m.doc() = "multi-echo spiral reconstruction core";

  py::class_<Trajectory>(m, "Trajectory")
      .def(py::init([](RArray kx, RArray ky, int arm_count) {
             if (kx.size() != ky.size()) throw std::invalid_argument("kx/ky size mismatch");
             Trajectory t;
             t.kx.assign(kx.data(), kx.data() + kx.size());
             t.ky.assign(ky.data(), ky.data() + ky.size());
             t.arm_count = arm_count;
             t.samples_per_arm = arm_count > 0 ? static_cast<int>(kx.size()) / arm_count : 0;
             return t;
           }),
           py::arg("kx"), py::arg("ky"), py::arg("arm_count") = 1)
      .def_property_readonly("kx", [](const Trajectory &t) { return py::array(py::cast(t.kx)); })
      .def_property_readonly("ky", [](const Trajectory &t) { return py::array(py::cast(t.ky)); })
      .def_readonly("arm_count", &Trajectory::arm_count)
      .def_readonly("samples_per_arm", &Trajectory::samples_per_arm)
      .def("samples", &Trajectory::samples);

  py::class_<ModelParams>(m, "ModelParams")
      .def_property_readonly("mu", &ModelParams::mu)
      .def_property_readonly("depth",
                             [](const ModelParams &p) { return p.config.depth; });

  m.def("make_spiral",
        [](int rows, int cols, int arms, int spa, double turns) {
          return make_spiral({rows, cols}, arms, spa, turns);
        },
        py::arg("rows"), py::arg("cols"), py::arg("arms") = 10,
        py::arg("samples_per_arm") = 3000, py::arg("turns") = 3.3);
  m.def("subsample_arms", &subsample_arms);
  m.def("subsample_points", &subsample_points);

  m.def("make_phantom",
        [](int rows, int cols, uint64_t seed) {
          const Phantom ph = make_phantom({rows, cols}, seed);
          return py::make_tuple(real2d(ph.m0, ph.grid), real2d(ph.t2star, ph.grid));
        },
        py::arg("rows"), py::arg("cols"), py::arg("seed") = 0);
  m.def("default_tes", [] { return EchoSchedule::paper_defaults().tes; });
  m.def("phantom_echo_images",
        [](RArray m0, RArray t2star, const std::vector<double> &tes) {
          if (m0.ndim() != 2 || t2star.ndim() != 2)
            throw std::invalid_argument("expected 2D maps");
          Phantom ph;
          ph.grid = {static_cast<int>(m0.shape(0)), static_cast<int>(m0.shape(1))};
          ph.m0.assign(m0.data(), m0.data() + m0.size());
          ph.t2star.assign(t2star.data(), t2star.data() + t2star.size());
          return from_stack(phantom_echo_images(ph, EchoSchedule{tes}));
        });
  m.def("simulate_coils", [](int rows, int cols, int coils) {
    return from_maps(simulate_coils({rows, cols}, coils));
  });
  m.def("simulate_kspace",
        [](CArray img, CArray maps, const Trajectory &traj, double noise_sd, uint64_t seed) {
          return from_kspace(simulate_kspace(to_stack(img), to_maps(maps), traj, noise_sd, seed));
        },
        py::arg("images"), py::arg("maps"), py::arg("traj"), py::arg("noise_sd") = 0.0,
        py::arg("seed") = 0);

  m.def("nufft_forward", [](CArray img, const Trajectory &traj) {
    if (img.ndim() != 2) throw std::invalid_argument("expected a 2D complex image");
    Image x({static_cast<int>(img.shape(0)), static_cast<int>(img.shape(1))});
    std::copy(img.data(), img.data() + img.size(), x.v.begin());
    NufftPlan plan(x.grid, traj);
    return py::array(py::cast(plan.forward(x)));
  });
  m.def("nufft_adjoint", [](CArray samples, const Trajectory &traj, int rows, int cols) {
    NufftPlan plan({rows, cols}, traj);
    std::vector<cplx> s(samples.data(), samples.data() + samples.size());
    Image out(plan.grid());
    plan.adjoint(s.data(), out.v.data());
    py::array_t<cplx> a({rows, cols});
    std::copy(out.v.begin(), out.v.end(), a.mutable_data());
    return a;
  });

  m.def("pipe_menon",
        [](const Trajectory &traj, int rows, int cols, int iterations) {
          return py::array(py::cast(pipe_menon(traj, {rows, cols}, iterations).w));
        },
        py::arg("traj"), py::arg("rows"), py::arg("cols"), py::arg("iterations") = 30);

  m.def("gridding_recon",
        [](CArray kspace, const Trajectory &traj, CArray maps, std::vector<double> weights) {
          const CoilMaps cm = to_maps(maps);
          return from_stack(gridding_recon(
              make_op(traj, cm, cm.grid.rows, cm.grid.cols, weights), to_kspace(kspace)));
        },
        py::arg("kspace"), py::arg("traj"), py::arg("maps"),
        py::arg("weights") = std::vector<double>{});
  m.def("cg_sense",
        [](CArray kspace, const Trajectory &traj, CArray maps, int iterations, double lam) {
          const CoilMaps cm = to_maps(maps);
          auto [x, report] = cg_sense(make_op(traj, cm, cm.grid.rows, cm.grid.cols, {}),
                                      to_kspace(kspace), iterations, lam);
          return from_stack(x);
        },
        py::arg("kspace"), py::arg("traj"), py::arg("maps"), py::arg("iterations") = 30,
        py::arg("lambda_tikhonov") = -1.0);

  m.def("estimate_coil_maps",
        [](CArray kspace, const Trajectory &traj, int rows, int cols, double calib_radius) {
          return from_maps(estimate_coil_maps(to_kspace(kspace), traj, {rows, cols}, calib_radius));
        },
        py::arg("kspace"), py::arg("traj"), py::arg("rows"), py::arg("cols"),
        py::arg("calib_radius"));

  m.def("make_masks",
        [](int omega_size, int j_count, double theta_fraction, int center_retained,
           uint64_t seed) {
          const SsduMaskSet set =
              make_masks(omega_size, j_count, theta_fraction, center_retained, seed);
          py::list out;
          for (const auto &pair : set.masks)
            out.append(py::make_tuple(py::array(py::cast(pair.theta)),
                                      py::array(py::cast(pair.lambda))));
          return out;
        },
        py::arg("omega_size"), py::arg("j_count") = 7, py::arg("theta_fraction") = 0.6,
        py::arg("center_retained") = 32, py::arg("seed") = 0);

  m.def("train_ssdu",
        [](const std::vector<std::tuple<CArray, Trajectory, CArray>> &dataset, int epochs,
           double learning_rate, int mask_count, double theta_fraction, int center_retained,
           uint64_t seed, const std::string &optimizer, int depth, int width, int unrolls,
           int df_iterations, double mu_init) {
          std::vector<TrainSample> ds;
          int echoes = 0;
          for (const auto &[k, t, mp] : dataset) {
            TrainSample s{to_kspace(k), t, to_maps(mp)};
            echoes = s.kspace.echoes;
            ds.push_back(std::move(s));
          }
          TrainConfig cfg;
          cfg.epochs = epochs;
          cfg.learning_rate = learning_rate;
          cfg.mask_count = mask_count;
          cfg.theta_fraction = theta_fraction;
          cfg.center_retained = center_retained;
          cfg.seed = seed;
          cfg.optimizer =
              optimizer == "plain-sgd" ? Optimizer::kPlainSgd : Optimizer::kAdaptiveMoments;
          cfg.model.echoes = echoes;
          cfg.model.depth = depth;
          cfg.model.width = width;
          cfg.model.unrolls = unrolls;
          cfg.model.df_iterations = df_iterations;
          cfg.model.mu_init = mu_init;
          TrainResult result = train(ds, cfg);
          return py::make_tuple(result.params, py::array(py::cast(result.epoch_loss)));
        },
        py::arg("dataset"), py::arg("epochs") = 100, py::arg("learning_rate") = 5e-4,
        py::arg("mask_count") = 7, py::arg("theta_fraction") = 0.6,
        py::arg("center_retained") = 32, py::arg("seed") = 0,
        py::arg("optimizer") = "adaptive-moments", py::arg("depth") = 5, py::arg("width") = 32,
        py::arg("unrolls") = 10, py::arg("df_iterations") = 15, py::arg("mu_init") = 0.05);
  m.def("reconstruct",
        [](const ModelParams &params, CArray kspace, const Trajectory &traj, CArray maps) {
          return from_stack(reconstruct(params, to_kspace(kspace), traj, to_maps(maps)));
        });

  m.def("nrmse", [](CArray got, CArray want) {
    return nrmse(to_stack(got), to_stack(want));
  });

  m.def("canonical_hrf",
        [](double tr, double length) { return py::array(py::cast(canonical_hrf(tr, length))); },
        py::arg("tr_seconds"), py::arg("length_seconds") = 32.0);
  m.def("build_design",
        [](int n_volumes, double tr, double on, double off, int blocks) {
          const DesignMatrix d = build_design(n_volumes, tr, on, off, blocks);
          py::dict out;
          for (size_t j = 0; j < d.columns.size(); ++j)
            out[d.labels[j].c_str()] = py::array(py::cast(d.columns[j]));
          return out;
        },
        py::arg("n_volumes"), py::arg("tr"), py::arg("block_on_seconds") = 20.0,
        py::arg("block_off_seconds") = 20.0, py::arg("n_blocks") = 6);
  m.def("glm_fit",
        [](RArray series, double tr, double on, double off, int blocks) {
          if (series.ndim() != 3)
            throw std::invalid_argument("expected a (time, row, col) array");
          const int frames = static_cast<int>(series.shape(0));
          const Grid grid{static_cast<int>(series.shape(1)), static_cast<int>(series.shape(2))};
          TimeSeries ts(frames, grid, tr);
          std::copy(series.data(), series.data() + series.size(), ts.v.begin());
          const GlmResult r = glm_fit(ts, build_design(frames, tr, on, off, blocks));
          return py::make_tuple(real2d(r.beta[0], grid), real2d(r.t_map, grid));
        },
        py::arg("series"), py::arg("tr"), py::arg("block_on_seconds") = 20.0,
        py::arg("block_off_seconds") = 20.0, py::arg("n_blocks") = 6);

  m.def("load_store", [](const std::string &dir) {
    const Store store = load_store(dir);
    py::dict out;
    for (const auto &[name, arr] : store) {
      std::vector<py::ssize_t> shape(arr.shape.begin(), arr.shape.end());
      if (arr.dtype == "c64") {
        py::array_t<std::complex<float>> a(shape);
        std::memcpy(a.mutable_data(), arr.f32.data(), arr.f32.size() * sizeof(float));
        out[name.c_str()] = a;
      } else if (arr.dtype == "f32") {
        py::array_t<float> a(shape);
        std::copy(arr.f32.begin(), arr.f32.end(), a.mutable_data());
        out[name.c_str()] = a;
      } else {
        py::array_t<int32_t> a(shape);
        std::copy(arr.i32.begin(), arr.i32.end(), a.mutable_data());
        out[name.c_str()] = a;
      }
    }
    return out;
  });
}
