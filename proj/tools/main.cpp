// Command-line driver: identify / simulate / sweep / diagnose.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "feederid/io.hpp"
#include "feederid/pipeline.hpp"
#include "feederid/simulate.hpp"

namespace {

using namespace feederid;

// Every RunConfig knob as a CLI flag; only flags the user actually passed
// override the config file.
struct Flags {
  std::string config;
  std::string feeder, meter, library, truth, out_dir;
  double kappa = 0, lambda = 0, rho = 0, dikin_step = 0;
  int m = 0, m_prime = 0, K = 0, chains = 0, refine_iters = 0;
  std::uint64_t seed = 0, snapshot_seed = 0, noise_seed = 0, synth_seed = 0;
  int snapshot_subset = 0;
  std::vector<int> free_indices;
  std::string walk;
  bool verbose = false;
  std::vector<double> envelope;
  double noise_length = 0, noise_injection = 0, noise_voltage = 0;
  int synth_T = 0;
  double synth_p_lo = 0, synth_p_hi = 0, synth_pf = 0, synth_q_lo = 0,
         synth_q_hi = 0;
  std::string synth_model;
  std::string sweep_parameter;
  std::vector<double> sweep_levels;
  int sweep_seeds = 0;

  CLI::Option *o_feeder = nullptr, *o_meter = nullptr, *o_library = nullptr,
              *o_truth = nullptr, *o_out = nullptr, *o_kappa = nullptr,
              *o_lambda = nullptr, *o_rho = nullptr, *o_m = nullptr,
              *o_m_prime = nullptr, *o_K = nullptr, *o_seed = nullptr,
              *o_subset = nullptr, *o_subset_seed = nullptr, *o_free = nullptr,
              *o_walk = nullptr, *o_chains = nullptr, *o_dikin = nullptr,
              *o_refine = nullptr, *o_verbose = nullptr, *o_envelope = nullptr,
              *o_nlen = nullptr, *o_ninj = nullptr, *o_nvolt = nullptr,
              *o_nseed = nullptr, *o_T = nullptr, *o_plo = nullptr,
              *o_phi = nullptr, *o_pf = nullptr, *o_qlo = nullptr,
              *o_qhi = nullptr, *o_sseed = nullptr, *o_model = nullptr,
              *o_sparam = nullptr, *o_levels = nullptr, *o_sseeds = nullptr;
};

void add_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON config file");
  f.o_feeder = sub->add_option("--feeder", f.feeder, "feeder JSON");
  f.o_meter = sub->add_option("--meter", f.meter, "meter CSV");
  f.o_library = sub->add_option("--library", f.library, "cable library JSON");
  f.o_truth = sub->add_option("--truth", f.truth, "ground truth JSON");
  f.o_out = sub->add_option("--out", f.out_dir, "output root (default runs)");
  f.o_kappa = sub->add_option("--kappa", f.kappa, "slack inflation, > 1");
  f.o_lambda = sub->add_option("--lambda", f.lambda, "descent learning rate");
  f.o_rho = sub->add_option("--rho", f.rho, "feasibility penalty coefficient");
  f.o_m = sub->add_option("-m,--samples", f.m, "candidate count");
  f.o_m_prime = sub->add_option("--m-prime", f.m_prime,
                                "thinned count (omit to skip thinning)");
  f.o_K = sub->add_option("-K,--neighbors", f.K, "similarity graph degree");
  f.o_seed = sub->add_option("--seed", f.seed, "sampling seed");
  f.o_subset = sub->add_option("--snapshots", f.snapshot_subset,
                               "random snapshot subset size");
  f.o_subset_seed =
      sub->add_option("--snapshot-seed", f.snapshot_seed, "subset seed");
  f.o_free = sub->add_option("--free", f.free_indices,
                             "freed impedance coordinates (full indexing)");
  f.o_walk = sub->add_option("--walk", f.walk, "char | dikin");
  f.o_chains = sub->add_option("--chains", f.chains, "walk chains");
  f.o_dikin = sub->add_option("--dikin-step", f.dikin_step, "dikin step size");
  f.o_refine =
      sub->add_option("--refine-iters", f.refine_iters, "descent iteration cap");
  f.o_verbose = sub->add_flag("--verbose", f.verbose, "per-row refine log");
  f.o_envelope = sub->add_option(
      "--envelope", f.envelope,
      "r_lo r_hi x_lo x_hi m_hi b_hi m_lo b_lo (ohm/km scale)")
      ->expected(8);
  f.o_nlen = sub->add_option("--noise-length", f.noise_length,
                             "declared length noise sigma");
  f.o_ninj = sub->add_option("--noise-injection", f.noise_injection,
                             "uniform injection noise half-width");
  f.o_nvolt = sub->add_option("--noise-voltage", f.noise_voltage,
                              "gaussian voltage noise sigma");
  f.o_nseed = sub->add_option("--noise-seed", f.noise_seed, "noise seed");
  f.o_T = sub->add_option("-T,--snapshots-synth", f.synth_T,
                          "synthesized snapshot count");
  f.o_plo = sub->add_option("--p-lo", f.synth_p_lo, "min leaf P (per-unit)");
  f.o_phi = sub->add_option("--p-hi", f.synth_p_hi, "max leaf P (per-unit)");
  f.o_pf = sub->add_option("--pf", f.synth_pf,
                           "fixed power factor (0 = uniform Q)");
  f.o_qlo = sub->add_option("--q-lo", f.synth_q_lo, "min leaf Q (per-unit)");
  f.o_qhi = sub->add_option("--q-hi", f.synth_q_hi, "max leaf Q (per-unit)");
  f.o_sseed = sub->add_option("--synth-seed", f.synth_seed, "synthesis seed");
  f.o_model = sub->add_option("--model", f.synth_model, "ac | ldf");
  f.o_sparam = sub->add_option("--parameter", f.sweep_parameter,
                               "sweep parameter: length | injection | voltage");
  f.o_levels = sub->add_option("--levels", f.sweep_levels, "sweep noise levels");
  f.o_sseeds = sub->add_option("--sweep-seeds", f.sweep_seeds,
                               "seeds per sweep level");
}

RunConfig merge(const Flags& f) {
  RunConfig cfg;
  if (!f.config.empty()) cfg = config_from_json_file(f.config);
  if (f.o_feeder->count()) cfg.feeder = f.feeder;
  if (f.o_meter->count()) cfg.meter = f.meter;
  if (f.o_library->count()) cfg.library = f.library;
  if (f.o_truth->count()) cfg.truth = f.truth;
  if (f.o_out->count()) cfg.out_dir = f.out_dir;
  if (f.o_kappa->count()) cfg.kappa = f.kappa;
  if (f.o_lambda->count()) cfg.lambda = f.lambda;
  if (f.o_rho->count()) cfg.rho = f.rho;
  if (f.o_m->count()) cfg.m = f.m;
  if (f.o_m_prime->count()) cfg.m_prime = f.m_prime;
  if (f.o_K->count()) cfg.K = f.K;
  if (f.o_seed->count()) cfg.seed = f.seed;
  if (f.o_subset->count()) cfg.snapshot_subset = f.snapshot_subset;
  if (f.o_subset_seed->count()) cfg.snapshot_seed = f.snapshot_seed;
  if (f.o_free->count()) cfg.free_indices = f.free_indices;
  if (f.o_walk->count()) cfg.walk = f.walk;
  if (f.o_chains->count()) cfg.chains = f.chains;
  if (f.o_dikin->count()) cfg.dikin_step = f.dikin_step;
  if (f.o_refine->count()) cfg.refine_max_iters = f.refine_iters;
  if (f.o_verbose->count()) cfg.verbose = f.verbose;
  if (f.o_envelope->count()) {
    require(f.envelope.size() == 8, ErrorCode::InvalidArgument,
            "--envelope takes exactly 8 numbers");
    EnvelopeSpec s;
    s.r_lo = f.envelope[0];
    s.r_hi = f.envelope[1];
    s.x_lo = f.envelope[2];
    s.x_hi = f.envelope[3];
    s.m_hi = f.envelope[4];
    s.b_hi = f.envelope[5];
    s.m_lo = f.envelope[6];
    s.b_lo = f.envelope[7];
    cfg.envelope = s;
  }
  if (f.o_nlen->count()) cfg.noise_length = f.noise_length;
  if (f.o_ninj->count()) cfg.noise_injection = f.noise_injection;
  if (f.o_nvolt->count()) cfg.noise_voltage = f.noise_voltage;
  if (f.o_nseed->count()) cfg.noise_seed = f.noise_seed;
  if (f.o_T->count()) cfg.synth_T = f.synth_T;
  if (f.o_plo->count()) cfg.synth_p_lo = f.synth_p_lo;
  if (f.o_phi->count()) cfg.synth_p_hi = f.synth_p_hi;
  if (f.o_pf->count()) cfg.synth_pf = f.synth_pf;
  if (f.o_qlo->count()) cfg.synth_q_lo = f.synth_q_lo;
  if (f.o_qhi->count()) cfg.synth_q_hi = f.synth_q_hi;
  if (f.o_sseed->count()) cfg.synth_seed = f.synth_seed;
  if (f.o_model->count()) cfg.synth_model = f.synth_model;
  if (f.o_sparam->count()) cfg.sweep_parameter = f.sweep_parameter;
  if (f.o_levels->count()) cfg.sweep_levels = f.sweep_levels;
  if (f.o_sseeds->count()) cfg.sweep_seeds = f.sweep_seeds;
  return cfg;
}

int do_identify(const RunConfig& cfg) {
  const IdentifyOutcome out = run_identify(cfg);
  const std::string dir = cfg.out_dir + "/" + config_hash(cfg);
  std::cout << "run " << config_hash(cfg) << " -> " << dir << "\n";
  std::cout << "delta_star " << fmt_double(out.delta_star_max) << " over "
            << out.parts.size() << " part(s)\n";
  if (!out.ok) {
    std::cerr << "identification failed at " << out.failure_stage << ": "
              << out.failure_message << "\n";
    return out.exit_code;
  }
  std::cout << "candidates " << out.B.rows() << ", library distance "
            << fmt_double(out.q_before) << " -> " << fmt_double(out.q_after)
            << "\n";
  if (out.z_true) {
    std::cout << "mape_r " << fmt_double(out.report.mape_r) << "% mape_x "
              << fmt_double(out.report.mape_x) << "%\n";
  }
  if (out.Z.rows()) {
    std::cout << "thinned to " << out.Z.rows() << " rows\n";
  }
  return out.exit_code;
}

int do_simulate(const RunConfig& cfg) {
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
  const std::string hash = config_hash(cfg);
  const std::string dir = make_run_dir(cfg.out_dir, hash);
  write_text_file(dir + "/config.json", config_to_json_text(cfg));
  write_meter_csv(dir + "/meter.csv", feeder, data);
  write_ground_truth(dir + "/truth.json", cs.assignment);
  std::cout << "wrote " << dir << "/meter.csv (" << data.T << " snapshots) and "
            << dir << "/truth.json\n";
  return 0;
}

int do_sweep(const RunConfig& cfg) {
  const SweepOutcome out = run_noise_sweep(cfg);
  const std::string dir = cfg.out_dir + "/" + config_hash(cfg);
  std::cout << "sweep " << config_hash(cfg) << " -> " << dir << "\n";
  std::printf("%10s %9s %12s %12s %12s %12s\n", "level", "survive", "med_r%",
              "iqr_r%", "med_x%", "iqr_x%");
  for (const auto& lv : out.levels) {
    std::printf("%10.4g %4d/%-4d %12.4g %5.4g-%-6.4g %12.4g %5.4g-%-6.4g\n",
                lv.level, lv.survivors, cfg.sweep_seeds, lv.median_r, lv.q25_r,
                lv.q75_r, lv.median_x, lv.q25_x, lv.q75_x);
  }
  return 0;
}

int do_diagnose(const RunConfig& cfg) {
  const DiagnoseOutcome out = run_diagnose(cfg);
  std::cout << "delta_star " << fmt_double(out.delta_star_max) << " over "
            << out.parts.size() << " part(s)\n";
  for (size_t i = 0; i < out.parts.size(); ++i) {
    const PartOutcome& po = out.parts[i];
    std::cout << "part " << i << ": " << po.edge_to_full.size() << " edges, "
              << "delta_star " << fmt_double(po.delta_star) << ", rank "
              << po.diag.numerical_rank << "/"
              << po.diag.singular_values.size() << ", |pinv|_1 "
              << fmt_double(po.diag.pinv_norm1) << "\n";
    if (po.diag.constant_pf_collapse) {
      std::cout << "  constant power factor detected: tan(phi) ~ "
                << fmt_double(po.diag.tan_phi_estimate)
                << " (reactive columns proportional to active ones)\n";
    }
    for (const auto& grp : po.diag.duplicate_column_groups) {
      std::cout << "  indistinguishable coordinates:";
      for (int c : grp) std::cout << " " << c;
      std::cout << "\n";
    }
  }
  std::cout << "diagnostics written under " << cfg.out_dir << "/"
            << config_hash(cfg) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"impedance range identification for radial LV feeders"};
  app.require_subcommand(1);

  Flags fi, fs, fw, fd;
  CLI::App* identify =
      app.add_subcommand("identify", "run the full identification pipeline");
  add_flags(identify, fi);
  CLI::App* simulate =
      app.add_subcommand("simulate", "synthesize a benchmark dataset");
  add_flags(simulate, fs);
  CLI::App* sweep =
      app.add_subcommand("sweep", "noise sweep: synthesize + identify grid");
  add_flags(sweep, fw);
  CLI::App* diagnose =
      app.add_subcommand("diagnose", "data diagnostics without identification");
  add_flags(diagnose, fd);

  CLI11_PARSE(app, argc, argv);

  try {
    if (identify->parsed()) return do_identify(merge(fi));
    if (simulate->parsed()) return do_simulate(merge(fs));
    if (sweep->parsed()) return do_sweep(merge(fw));
    if (diagnose->parsed()) return do_diagnose(merge(fd));
  } catch (const feederid::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return feederid::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return feederid::kExitError;
  }
  return feederid::kExitError;
}
