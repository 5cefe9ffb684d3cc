// Python face of the pipeline: config in, file-driven runs out, candidate
// matrices as numpy arrays.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "feederid/io.hpp"
#include "feederid/library.hpp"
#include "feederid/metrics.hpp"
#include "feederid/pipeline.hpp"
#include "feederid/polytope.hpp"
#include "feederid/simulate.hpp"

namespace py = pybind11;
using namespace feederid;

namespace {

// mirrors the CLI verb: synthesize under out_dir/<config hash>, return the dir
std::string simulate_run(const RunConfig& cfg) {
  cfg.validate();
  require(!cfg.feeder.empty() && !cfg.library.empty(),
          ErrorCode::InvalidArgument, "simulate needs feeder and library paths");
  require(cfg.noise_length == 0.0, ErrorCode::InvalidArgument,
          "length noise only applies to sweep runs (it would desynchronize "
          "the written ground truth)");
  const FeederFile feeder = load_feeder(cfg.feeder);
  const CableLibrary library =
      load_library(cfg.library, feeder.topology.edge_count(), feeder.z_base(),
                   cfg.envelope);
  std::vector<int> asg;
  const std::vector<int>* asg_ptr = nullptr;
  if (!cfg.truth.empty()) {
    asg = load_ground_truth(cfg.truth, feeder.topology.edge_count());
    asg_ptr = &asg;
  }
  SynthesizedCase cs = synthesize_case(feeder.topology, library, cfg, asg_ptr,
                                       0.0, cfg.synth_seed);
  MeterDataset data = std::move(cs.data);
  if (cfg.noise_injection > 0.0 || cfg.noise_voltage > 0.0) {
    NoiseSpec spec;
    spec.injection_halfwidth = cfg.noise_injection;
    spec.voltage_sigma = cfg.noise_voltage;
    spec.seed = cfg.noise_seed;
    data = apply_noise(data, spec);
  }
  const std::string dir = make_run_dir(cfg.out_dir, config_hash(cfg));
  write_text_file(dir + "/config.json", config_to_json_text(cfg));
  write_meter_csv(dir + "/meter.csv", feeder, data);
  write_ground_truth(dir + "/truth.json", cs.assignment);
  return dir;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "branch impedance range identification for radial LV feeders";

  py::class_<RunConfig>(mod, "RunConfig")
      .def(py::init<>())
      .def_readwrite("feeder", &RunConfig::feeder)
      .def_readwrite("meter", &RunConfig::meter)
      .def_readwrite("library", &RunConfig::library)
      .def_readwrite("truth", &RunConfig::truth)
      .def_readwrite("out_dir", &RunConfig::out_dir)
      .def_readwrite("kappa", &RunConfig::kappa)
      .def_readwrite("lambda_", &RunConfig::lambda)
      .def_readwrite("rho", &RunConfig::rho)
      .def_readwrite("m", &RunConfig::m)
      .def_readwrite("m_prime", &RunConfig::m_prime)
      .def_readwrite("K", &RunConfig::K)
      .def_readwrite("seed", &RunConfig::seed)
      .def_readwrite("snapshot_subset", &RunConfig::snapshot_subset)
      .def_readwrite("snapshot_seed", &RunConfig::snapshot_seed)
      .def_readwrite("free_indices", &RunConfig::free_indices)
      .def_readwrite("walk", &RunConfig::walk)
      .def_readwrite("chains", &RunConfig::chains)
      .def_readwrite("dikin_step", &RunConfig::dikin_step)
      .def_readwrite("refine_max_iters", &RunConfig::refine_max_iters)
      .def_readwrite("verbose", &RunConfig::verbose)
      .def_readwrite("noise_length", &RunConfig::noise_length)
      .def_readwrite("noise_injection", &RunConfig::noise_injection)
      .def_readwrite("noise_voltage", &RunConfig::noise_voltage)
      .def_readwrite("noise_seed", &RunConfig::noise_seed)
      .def_readwrite("synth_T", &RunConfig::synth_T)
      .def_readwrite("synth_p_lo", &RunConfig::synth_p_lo)
      .def_readwrite("synth_p_hi", &RunConfig::synth_p_hi)
      .def_readwrite("synth_pf", &RunConfig::synth_pf)
      .def_readwrite("synth_q_lo", &RunConfig::synth_q_lo)
      .def_readwrite("synth_q_hi", &RunConfig::synth_q_hi)
      .def_readwrite("synth_seed", &RunConfig::synth_seed)
      .def_readwrite("synth_model", &RunConfig::synth_model)
      .def_readwrite("sweep_parameter", &RunConfig::sweep_parameter)
      .def_readwrite("sweep_levels", &RunConfig::sweep_levels)
      .def_readwrite("sweep_seeds", &RunConfig::sweep_seeds)
      .def("effective_rho", &RunConfig::effective_rho)
      .def("validate", &RunConfig::validate);

  py::class_<EdgeEnvelope>(mod, "EdgeEnvelope")
      .def_readonly("min", &EdgeEnvelope::min)
      .def_readonly("max", &EdgeEnvelope::max)
      .def_readonly("median", &EdgeEnvelope::median);

  py::class_<RangeReport>(mod, "RangeReport")
      .def_readonly("r", &RangeReport::r)
      .def_readonly("x", &RangeReport::x)
      .def_readonly("z_mag", &RangeReport::z_mag)
      .def_readonly("has_truth", &RangeReport::has_truth)
      .def_readonly("contained", &RangeReport::contained)
      .def_readonly("out_of_range", &RangeReport::out_of_range)
      .def_readonly("mape_r", &RangeReport::mape_r)
      .def_readonly("mape_x", &RangeReport::mape_x);

  py::class_<IdentifiabilityReport>(mod, "IdentifiabilityReport")
      .def_readonly("singular_values", &IdentifiabilityReport::singular_values)
      .def_readonly("numerical_rank", &IdentifiabilityReport::numerical_rank)
      .def_readonly("duplicate_column_groups",
                    &IdentifiabilityReport::duplicate_column_groups)
      .def_readonly("constant_pf_collapse",
                    &IdentifiabilityReport::constant_pf_collapse)
      .def_readonly("tan_phi_estimate",
                    &IdentifiabilityReport::tan_phi_estimate)
      .def_readonly("pinv_norm1", &IdentifiabilityReport::pinv_norm1);

  py::class_<PartOutcome>(mod, "PartOutcome")
      .def_readonly("edge_to_full", &PartOutcome::edge_to_full)
      .def_readonly("node_to_full", &PartOutcome::node_to_full)
      .def_readonly("delta_star", &PartOutcome::delta_star)
      .def_readonly("duality_gap", &PartOutcome::duality_gap)
      .def_readonly("cheb_radius", &PartOutcome::cheb_radius)
      .def_readonly("cheb_center", &PartOutcome::cheb_center)
      .def_readonly("diag", &PartOutcome::diag)
      .def_readonly("free_indices", &PartOutcome::free_indices)
      .def_readonly("rows_data", &PartOutcome::rows_data)
      .def_readonly("rows_bounded", &PartOutcome::rows_bounded)
      .def_readonly("rows_reduced", &PartOutcome::rows_reduced);

  py::class_<IdentifyOutcome>(mod, "IdentifyOutcome")
      .def_readonly("ok", &IdentifyOutcome::ok)
      .def_readonly("exit_code", &IdentifyOutcome::exit_code)
      .def_readonly("failure_stage", &IdentifyOutcome::failure_stage)
      .def_readonly("failure_message", &IdentifyOutcome::failure_message)
      .def_readonly("delta_star_max", &IdentifyOutcome::delta_star_max)
      .def_readonly("parts", &IdentifyOutcome::parts)
      .def_readonly("B", &IdentifyOutcome::B)
      .def_readonly("C", &IdentifyOutcome::C)
      .def_readonly("Z", &IdentifyOutcome::Z)
      .def_readonly("thin_ranking", &IdentifyOutcome::thin_ranking)
      .def_readonly("report", &IdentifyOutcome::report)
      .def_readonly("report_raw", &IdentifyOutcome::report_raw)
      .def_readonly("report_refined", &IdentifyOutcome::report_refined)
      .def_readonly("mape_r_collapsed", &IdentifyOutcome::mape_r_collapsed)
      .def_readonly("mape_x_collapsed", &IdentifyOutcome::mape_x_collapsed)
      .def_readonly("q_before", &IdentifyOutcome::q_before)
      .def_readonly("q_after", &IdentifyOutcome::q_after)
      .def_readonly("z_true", &IdentifyOutcome::z_true)
      .def_property_readonly("final", [](const IdentifyOutcome& o) {
        return Eigen::MatrixXd(o.final_matrix());
      });

  py::class_<SweepCell>(mod, "SweepCell")
      .def_readonly("level", &SweepCell::level)
      .def_readonly("seed", &SweepCell::seed)
      .def_readonly("ok", &SweepCell::ok)
      .def_readonly("exit_code", &SweepCell::exit_code)
      .def_readonly("message", &SweepCell::message)
      .def_readonly("delta_star", &SweepCell::delta_star)
      .def_readonly("mape_r", &SweepCell::mape_r)
      .def_readonly("mape_x", &SweepCell::mape_x);

  py::class_<SweepLevelSummary>(mod, "SweepLevelSummary")
      .def_readonly("level", &SweepLevelSummary::level)
      .def_readonly("survivors", &SweepLevelSummary::survivors)
      .def_readonly("median_r", &SweepLevelSummary::median_r)
      .def_readonly("q25_r", &SweepLevelSummary::q25_r)
      .def_readonly("q75_r", &SweepLevelSummary::q75_r)
      .def_readonly("median_x", &SweepLevelSummary::median_x)
      .def_readonly("q25_x", &SweepLevelSummary::q25_x)
      .def_readonly("q75_x", &SweepLevelSummary::q75_x);

  py::class_<SweepOutcome>(mod, "SweepOutcome")
      .def_readonly("cells", &SweepOutcome::cells)
      .def_readonly("levels", &SweepOutcome::levels);

  py::class_<DiagnoseOutcome>(mod, "DiagnoseOutcome")
      .def_readonly("parts", &DiagnoseOutcome::parts)
      .def_readonly("delta_star_max", &DiagnoseOutcome::delta_star_max);

  mod.def("identify", &run_identify, py::arg("cfg"),
          py::call_guard<py::gil_scoped_release>(),
          "load inputs, identify impedance ranges, write run artifacts");
  mod.def("simulate", &simulate_run, py::arg("cfg"),
          py::call_guard<py::gil_scoped_release>(),
          "synthesize a benchmark dataset; returns the run directory");
  mod.def("noise_sweep", &run_noise_sweep, py::arg("cfg"),
          py::call_guard<py::gil_scoped_release>(),
          "synthetic (level, seed) grid over the configured noise parameter");
  mod.def("diagnose", &run_diagnose, py::arg("cfg"),
          py::call_guard<py::gil_scoped_release>(),
          "data-only feasibility and identifiability diagnostics");
  mod.def("config_hash", &config_hash, py::arg("cfg"),
          "hash naming the run directory for a config");
}
