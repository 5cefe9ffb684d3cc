#include "feederid/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <thread>

#include "feederid/refine.hpp"
#include "feederid/rng.hpp"
#include "feederid/sample.hpp"
#include "feederid/simulate.hpp"
#include "feederid/thin.hpp"
#include "json.hpp"

namespace feederid {

using nlohmann::json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Infeasible:
    case ErrorCode::InfeasibleFixedPoint:
      return kExitInfeasibleData;
    case ErrorCode::NumericalDegeneracy:
    case ErrorCode::StartInfeasible:
    case ErrorCode::Unbounded:
    case ErrorCode::DegenerateInput:
      return kExitSamplerDegenerate;
    default:
      return kExitError;
  }
}

SubFeeder whole_feeder(const FeederTopology& topology, MeterDataset data) {
  SubFeeder part;
  part.node_to_full.resize(static_cast<size_t>(topology.node_count()));
  std::iota(part.node_to_full.begin(), part.node_to_full.end(), 0);
  part.edge_to_full.resize(static_cast<size_t>(topology.edge_count()));
  std::iota(part.edge_to_full.begin(), part.edge_to_full.end(), 0);
  part.topology = topology;
  part.data = std::move(data);
  return part;
}

namespace {

// full-coordinate index for a part impedance coordinate
int to_full_coord(const SubFeeder& part, int part_coord, int ne_full) {
  const int ne_part = part.topology.edge_count();
  const bool is_x = part_coord >= ne_part;
  const int e = is_x ? part_coord - ne_part : part_coord;
  const int ef = part.edge_to_full[static_cast<size_t>(e)];
  return is_x ? ne_full + ef : ef;
}

double mean_library_distance(const Eigen::MatrixXd& rows,
                             const CableLibrary& library,
                             const Eigen::VectorXd& lengths) {
  if (rows.rows() == 0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    acc += library_distance(rows.row(i).transpose(), library, lengths);
  }
  return acc / static_cast<double>(rows.rows());
}

}  // namespace

IdentifyOutcome identify_parts(const FeederTopology& full,
                               const std::vector<SubFeeder>& parts,
                               const CableLibrary& library,
                               const RunConfig& cfg,
                               const std::optional<Eigen::VectorXd>& z_true) {
  cfg.validate();
  const int ne_full = full.edge_count();
  require(library.edge_count() == ne_full, ErrorCode::DimensionMismatch,
          "library edge count does not match the feeder");
  require(!parts.empty(), ErrorCode::InvalidArgument, "no sub-feeders given");
  if (z_true) {
    require(z_true->size() == 2 * ne_full, ErrorCode::DimensionMismatch,
            "ground truth length != 2 * edge count");
  }
  {
    std::vector<int> claimed(static_cast<size_t>(ne_full), 0);
    for (const auto& part : parts) {
      for (int ef : part.edge_to_full) {
        require(ef >= 0 && ef < ne_full && !claimed[static_cast<size_t>(ef)],
                ErrorCode::InvalidArgument,
                "sub-feeders must partition the edge set");
        claimed[static_cast<size_t>(ef)] = 1;
      }
    }
    for (int c : claimed) {
      require(c == 1, ErrorCode::InvalidArgument,
              "sub-feeders must cover every edge");
    }
  }
  for (int f : cfg.free_indices) {
    require(f < 2 * ne_full, ErrorCode::InvalidArgument,
            "free index " + std::to_string(f) + " out of range");
  }

  IdentifyOutcome out;
  out.z_true = z_true;
  std::string stage = "setup";
  try {
    std::vector<Eigen::MatrixXd> b_parts;
    std::vector<HalfSpaceSystem> systems;
    for (size_t pi = 0; pi < parts.size(); ++pi) {
      const SubFeeder& part = parts[pi];
      const int ne_part = part.topology.edge_count();
      PartOutcome po;
      po.edge_to_full = part.edge_to_full;
      po.node_to_full = part.node_to_full;

      stage = "flows";
      const AggregatedFlows flows = aggregate_flows(part.topology, part.data);

      stage = "delta-lp";
      const DeltaSolution ds = solve_delta_lp(part.topology, part.data, flows);
      po.delta_star = ds.delta_star;
      po.duality_gap = ds.duality_gap;
      out.delta_star_max = std::max(out.delta_star_max, ds.delta_star);

      stage = "polytope";
      const HalfSpaceSystem data_sys = assemble_halfspaces(
          part.topology, part.data, flows, ds.delta_star, cfg.kappa);
      po.rows_data = data_sys.rows();

      stage = "diagnostics";
      po.diag = diagnose_identifiability(data_sys);

      stage = "bounds";
      const HalfSpaceSystem sys = apply_library_bounds(
          data_sys, part.topology.lengths(), library.bounds());
      po.rows_bounded = sys.rows();

      stage = "chebyshev";
      const ChebyshevResult cheb = chebyshev_center(sys);
      po.cheb_radius = cheb.radius;
      po.cheb_center = cheb.center;

      stage = "directions";
      std::vector<int> free_part;
      if (!cfg.free_indices.empty()) {
        for (int f : cfg.free_indices) {
          const bool is_x = f >= ne_full;
          const int ef = is_x ? f - ne_full : f;
          for (int e = 0; e < ne_part; ++e) {
            if (part.edge_to_full[static_cast<size_t>(e)] == ef) {
              free_part.push_back(is_x ? ne_part + e : e);
            }
          }
        }
        std::sort(free_part.begin(), free_part.end());
        free_part.erase(std::unique(free_part.begin(), free_part.end()),
                        free_part.end());
      } else {
        free_part = auto_select_free(po.diag, part.topology);
      }
      po.free_indices = free_part;

      Eigen::MatrixXd bp;
      if (free_part.empty()) {
        // nothing to explore: the anchor point is the whole candidate set
        bp = cheb.center.transpose().replicate(cfg.m, 1);
        po.rows_reduced = 0;
      } else {
        const DirectionSplit split =
            split_directions(sys, cheb.center, free_part);

        stage = "redundancy";
        const HalfSpaceSystem lean = remove_redundant(split.reduced);
        po.rows_reduced = lean.rows();

        stage = "rounding";
        const RoundedPolytope rp =
            round_polytope(lean, mix_seed(cfg.seed, 0x726F756E64ULL + pi));

        stage = "sampling";
        WalkOptions wo;
        wo.kind = cfg.walk == "dikin" ? WalkOptions::Kind::Dikin
                                      : WalkOptions::Kind::CoordinateHitAndRun;
        wo.chains = cfg.chains;
        wo.dikin_step = cfg.dikin_step;
        const Eigen::MatrixXd su =
            sample_walk(rp, cfg.m, mix_seed(cfg.seed, pi), wo);
        bp = lift_to_full(su, split);
      }
      b_parts.push_back(std::move(bp));
      systems.push_back(sys);
      out.parts.push_back(std::move(po));
    }

    stage = "merge";
    out.B = Eigen::MatrixXd::Zero(cfg.m, 2 * ne_full);
    int total_rows = 0;
    for (size_t pi = 0; pi < parts.size(); ++pi) {
      const int ne_part = parts[pi].topology.edge_count();
      for (int c = 0; c < 2 * ne_part; ++c) {
        out.B.col(to_full_coord(parts[pi], c, ne_full)) = b_parts[pi].col(c);
      }
      total_rows += systems[pi].rows();
    }
    Eigen::MatrixXd merged_m = Eigen::MatrixXd::Zero(total_rows, 2 * ne_full);
    Eigen::VectorXd merged_d(total_rows);
    {
      int at = 0;
      for (size_t pi = 0; pi < parts.size(); ++pi) {
        const HalfSpaceSystem& sys = systems[pi];
        const int ne_part = parts[pi].topology.edge_count();
        for (int c = 0; c < 2 * ne_part; ++c) {
          merged_m.block(at, to_full_coord(parts[pi], c, ne_full), sys.rows(),
                         1) = sys.M.col(c);
        }
        merged_d.segment(at, sys.rows()) = sys.d;
        at += sys.rows();
      }
    }
    const HalfSpaceSystem merged = make_system(merged_m, merged_d);

    stage = "refine";
    const Eigen::VectorXd full_lengths = full.lengths();
    RefinementConfig rc;
    rc.lambda = cfg.lambda;
    rc.rho = cfg.effective_rho();
    rc.max_iters = cfg.refine_max_iters;
    rc.verbose = cfg.verbose;
    out.C = refine_candidates(out.B, merged, library, full_lengths, rc);
    out.q_before = mean_library_distance(out.B, library, full_lengths);
    out.q_after = mean_library_distance(out.C, library, full_lengths);

    stage = "thin";
    if (cfg.m_prime >= 1) {
      if (out.C.rows() == 1) {
        out.thin_ranking = {0};
        out.Z = out.C;
      } else {
        const int k = std::min(cfg.K, static_cast<int>(out.C.rows()) - 1);
        const SimilarityGraph graph = knn_graph(out.C, k);
        out.thin_ranking = facility_location_select(graph, cfg.m_prime);
        out.Z.resize(static_cast<Eigen::Index>(out.thin_ranking.size()),
                     out.C.cols());
        for (size_t i = 0; i < out.thin_ranking.size(); ++i) {
          out.Z.row(static_cast<Eigen::Index>(i)) =
              out.C.row(out.thin_ranking[i]);
        }
      }
    }

    stage = "metrics";
    out.report_raw = range_report(out.B, z_true, full);
    out.report_refined = range_report(out.C, z_true, full);
    out.report = out.Z.rows() ? range_report(out.Z, z_true, full)
                              : out.report_refined;
    if (z_true) {
      const Eigen::VectorXd zc = collapse_chains(full, *z_true).z;
      if ((zc.array().abs() > 0.0).all()) {
        const Eigen::MatrixXd cc = collapse_rows(full, out.final_matrix());
        const auto [mr, mx] = mape_star(cc, zc);
        out.mape_r_collapsed = mr;
        out.mape_x_collapsed = mx;
      }
    }

    out.ok = true;
    out.exit_code = kExitOk;
  } catch (const Error& e) {
    out.ok = false;
    out.exit_code = exit_code_for(e.code());
    out.failure_stage = stage;
    out.failure_message = e.what();
  }
  return out;
}

SynthesizedCase synthesize_case(const FeederTopology& topology,
                                const CableLibrary& library,
                                const RunConfig& cfg,
                                const std::vector<int>* assignment,
                                double length_sigma, std::uint64_t seed) {
  cfg.validate();
  require(library.edge_count() == topology.edge_count(),
          ErrorCode::DimensionMismatch,
          "library edge count does not match the feeder");
  SynthesizedCase out;
  if (assignment) {
    require(static_cast<int>(assignment->size()) == topology.edge_count(),
            ErrorCode::DimensionMismatch, "assignment length != edge count");
    out.assignment = *assignment;
  } else {
    Rng rng(mix_seed(seed, 0xA551676E4D454E54ULL));
    for (int e = 0; e < topology.edge_count(); ++e) {
      out.assignment.push_back(static_cast<int>(
          rng.below(library.candidates(e).size())));
    }
  }

  NoiseSpec len_spec;
  len_spec.length_sigma = length_sigma;
  len_spec.seed = seed;
  out.lengths_m = apply_noise(topology.lengths(), len_spec);
  FeederTopology truth_topo = topology;
  if (length_sigma > 0.0) {
    std::vector<Edge> edges = topology.edges();
    for (size_t e = 0; e < edges.size(); ++e) {
      edges[e].length_m = out.lengths_m(static_cast<Eigen::Index>(e));
    }
    truth_topo = FeederTopology(topology.node_count(), std::move(edges));
  }

  const GroundTruthAssignment gt =
      materialize_assignment(truth_topo, library, out.assignment);
  out.z = gt.z;

  const InjectionSampler sampler =
      cfg.synth_pf > 0.0
          ? fixed_pf_sampler(cfg.synth_p_lo, cfg.synth_p_hi, cfg.synth_pf)
          : uniform_pq_sampler(cfg.synth_p_lo, cfg.synth_p_hi, cfg.synth_q_lo,
                               cfg.synth_q_hi);
  out.data = cfg.synth_model == "ldf"
                 ? make_dataset_lindistflow(truth_topo, gt.z, sampler,
                                            cfg.synth_T, seed)
                 : make_dataset(truth_topo, gt.z, sampler, cfg.synth_T, seed);
  return out;
}

double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double h = p * static_cast<double>(v.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  const double frac = h - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

SweepOutcome sweep_cells(const FeederTopology& topology,
                         const CableLibrary& library, const RunConfig& cfg,
                         const std::vector<int>* assignment) {
  cfg.validate();
  require(!cfg.sweep_levels.empty(), ErrorCode::InvalidArgument,
          "sweep grid is empty");

  // one cable assignment shared by every cell
  std::vector<int> asg;
  if (assignment) {
    asg = *assignment;
  } else {
    Rng rng(mix_seed(cfg.synth_seed, 0xA551676E4D454E54ULL));
    for (int e = 0; e < topology.edge_count(); ++e) {
      asg.push_back(static_cast<int>(rng.below(library.candidates(e).size())));
    }
  }

  const size_t n_cells =
      cfg.sweep_levels.size() * static_cast<size_t>(cfg.sweep_seeds);
  SweepOutcome out;
  out.cells.resize(n_cells);

  auto run_cell = [&](size_t idx) {
    SweepCell cell;
    const size_t li = idx / static_cast<size_t>(cfg.sweep_seeds);
    const int s = static_cast<int>(idx % static_cast<size_t>(cfg.sweep_seeds));
    cell.level = cfg.sweep_levels[li];
    cell.seed = static_cast<std::uint64_t>(s);
    try {
      const std::uint64_t synth_seed =
          mix_seed(cfg.synth_seed, 1000 + static_cast<std::uint64_t>(s));
      const std::uint64_t noise_seed =
          mix_seed(cfg.noise_seed, 2000 + static_cast<std::uint64_t>(s));

      RunConfig ccfg = cfg;
      ccfg.verbose = false;
      const double len_sigma =
          cfg.sweep_parameter == "length" ? cell.level : 0.0;
      ccfg.noise_length = len_sigma;  // drives the rho default

      SynthesizedCase cs =
          synthesize_case(topology, library, cfg, &asg, len_sigma, synth_seed);
      MeterDataset data = std::move(cs.data);
      if (cfg.sweep_parameter == "injection" && cell.level > 0.0) {
        NoiseSpec spec;
        spec.injection_halfwidth = cell.level;
        spec.seed = noise_seed;
        data = apply_noise(data, spec);
      } else if (cfg.sweep_parameter == "voltage" && cell.level > 0.0) {
        NoiseSpec spec;
        spec.voltage_sigma = cell.level;
        spec.seed = noise_seed;
        data = apply_noise(data, spec);
      }

      std::vector<SubFeeder> parts;
      parts.push_back(whole_feeder(topology, std::move(data)));
      const IdentifyOutcome res =
          identify_parts(topology, parts, library, ccfg, cs.z);
      cell.ok = res.ok;
      cell.exit_code = res.exit_code;
      cell.delta_star = res.delta_star_max;
      if (res.ok) {
        cell.mape_r = res.report.mape_r;
        cell.mape_x = res.report.mape_x;
      } else {
        cell.message = res.failure_stage + ": " + res.failure_message;
      }
    } catch (const Error& e) {
      cell.ok = false;
      cell.exit_code = exit_code_for(e.code());
      cell.message = e.what();
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.exit_code = kExitError;
      cell.message = e.what();
    }
    out.cells[idx] = std::move(cell);
  };

  int workers = 0;
  if (const char* env = std::getenv("FEEDERID_WORKERS")) {
    workers = std::atoi(env);
  }
  if (workers <= 0) {
    workers = static_cast<int>(std::thread::hardware_concurrency());
  }
  workers = std::clamp(workers, 1, static_cast<int>(n_cells));

  if (workers == 1) {
    for (size_t i = 0; i < n_cells; ++i) run_cell(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (size_t i; (i = next.fetch_add(1)) < n_cells;) run_cell(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  for (size_t li = 0; li < cfg.sweep_levels.size(); ++li) {
    SweepLevelSummary sum;
    sum.level = cfg.sweep_levels[li];
    std::vector<double> mr, mx;
    for (int s = 0; s < cfg.sweep_seeds; ++s) {
      const SweepCell& cell =
          out.cells[li * static_cast<size_t>(cfg.sweep_seeds) +
                    static_cast<size_t>(s)];
      if (!cell.ok) continue;
      mr.push_back(cell.mape_r);
      mx.push_back(cell.mape_x);
    }
    sum.survivors = static_cast<int>(mr.size());
    if (!mr.empty()) {
      sum.median_r = percentile(mr, 0.5);
      sum.q25_r = percentile(mr, 0.25);
      sum.q75_r = percentile(mr, 0.75);
      sum.median_x = percentile(mx, 0.5);
      sum.q25_x = percentile(mx, 0.25);
      sum.q75_x = percentile(mx, 0.75);
    }
    out.levels.push_back(sum);
  }
  return out;
}

namespace {

json envelope_list(const std::vector<EdgeEnvelope>& env) {
  json arr = json::array();
  for (const auto& e : env) {
    arr.push_back({{"min", e.min}, {"max", e.max}, {"median", e.median}});
  }
  return arr;
}

json report_json(const RangeReport& rep) {
  json j;
  j["r"] = envelope_list(rep.r);
  j["x"] = envelope_list(rep.x);
  j["z_mag"] = envelope_list(rep.z_mag);
  if (rep.has_truth) {
    j["contained"] = rep.contained;
    j["out_of_range"] = rep.out_of_range;
    j["mape_r"] = rep.mape_r;
    j["mape_x"] = rep.mape_x;
  }
  return j;
}

json diag_json(const IdentifiabilityReport& diag) {
  json j;
  j["singular_values"] = std::vector<double>(
      diag.singular_values.data(),
      diag.singular_values.data() + diag.singular_values.size());
  j["numerical_rank"] = diag.numerical_rank;
  j["duplicate_column_groups"] = diag.duplicate_column_groups;
  j["constant_pf_collapse"] = diag.constant_pf_collapse;
  j["tan_phi_estimate"] = diag.tan_phi_estimate;
  j["pinv_norm1"] = diag.pinv_norm1;
  return j;
}

json part_json(const PartOutcome& po, int ne_full) {
  json j;
  j["delta_star"] = po.delta_star;
  j["duality_gap"] = po.duality_gap;
  j["chebyshev_radius"] = po.cheb_radius;
  j["rows_data"] = po.rows_data;
  j["rows_bounded"] = po.rows_bounded;
  j["rows_reduced"] = po.rows_reduced;
  j["edges"] = po.edge_to_full;
  std::vector<int> free_full;
  const int ne_part = static_cast<int>(po.edge_to_full.size());
  for (int f : po.free_indices) {
    const bool is_x = f >= ne_part;
    const int e = is_x ? f - ne_part : f;
    free_full.push_back(is_x ? ne_full + po.edge_to_full[static_cast<size_t>(e)]
                             : po.edge_to_full[static_cast<size_t>(e)]);
  }
  std::sort(free_full.begin(), free_full.end());
  j["free_coordinates"] = free_full;
  return j;
}

void write_report(const std::string& dir, const std::string& hash,
                  const FeederFile* feeder, const IdentifyOutcome& out) {
  const int ne_full =
      feeder ? feeder->topology.edge_count()
             : (out.B.cols() ? static_cast<int>(out.B.cols()) / 2 : 0);
  json j;
  j["config_hash"] = hash;
  j["ok"] = out.ok;
  j["exit_code"] = out.exit_code;
  if (out.ok) {
    j["failure"] = nullptr;
  } else {
    j["failure"] = {{"stage", out.failure_stage},
                    {"message", out.failure_message}};
  }
  j["delta_star_max"] = out.delta_star_max;
  j["parts"] = json::array();
  for (const auto& po : out.parts) j["parts"].push_back(part_json(po, ne_full));

  if (feeder) {
    json edges = json::array();
    for (int e = 0; e < feeder->topology.edge_count(); ++e) {
      const Edge& ed = feeder->topology.edge(e);
      edges.push_back(
          {{"index", e},
           {"from", feeder->node_labels[static_cast<size_t>(ed.parent)]},
           {"to", feeder->node_labels[static_cast<size_t>(ed.child)]},
           {"length_m", ed.length_m}});
    }
    j["edges"] = edges;
    j["name"] = feeder->name;
  }

  if (out.ok) {
    j["ranges"] = report_json(out.report);
    j["ranges_raw"] = report_json(out.report_raw);
    j["ranges_refined"] = report_json(out.report_refined);
    j["library_distance"] = {{"before", out.q_before}, {"after", out.q_after}};
    if (out.z_true) {
      j["mape_collapsed"] = {{"r", out.mape_r_collapsed},
                             {"x", out.mape_x_collapsed}};
    }
    if (out.Z.rows()) {
      j["thinning"] = {{"kept", static_cast<int>(out.Z.rows())},
                       {"ranking", out.thin_ranking}};
    } else {
      j["thinning"] = nullptr;
    }
  }
  write_text_file(dir + "/report.json", j.dump(2) + "\n");
}

void write_diagnostics(const std::string& dir, const std::string& hash,
                       const std::vector<PartOutcome>& parts) {
  json j;
  j["config_hash"] = hash;
  j["parts"] = json::array();
  for (const auto& po : parts) {
    json p = diag_json(po.diag);
    p["delta_star"] = po.delta_star;
    p["duality_gap"] = po.duality_gap;
    p["edges"] = po.edge_to_full;
    j["parts"].push_back(p);
  }
  write_text_file(dir + "/diagnostics.json", j.dump(2) + "\n");
}

void apply_subset_and_noise(RawMeterData& raw, const RunConfig& cfg) {
  if (cfg.snapshot_subset > 0) {
    require(cfg.snapshot_subset <= raw.T, ErrorCode::InvalidArgument,
            "snapshot subset exceeds available snapshots");
    const int s = cfg.snapshot_subset;
    std::vector<int> idx(static_cast<size_t>(raw.T));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(mix_seed(cfg.snapshot_seed, 0x73756273ULL));
    for (int i = 0; i < s; ++i) {
      const int k =
          i + static_cast<int>(rng.below(static_cast<std::uint64_t>(raw.T - i)));
      std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(k)]);
    }
    idx.resize(static_cast<size_t>(s));
    std::sort(idx.begin(), idx.end());
    Eigen::MatrixXd P(s, raw.P.cols()), Q(s, raw.Q.cols()), V(s, raw.v2.cols());
    for (int i = 0; i < s; ++i) {
      P.row(i) = raw.P.row(idx[static_cast<size_t>(i)]);
      Q.row(i) = raw.Q.row(idx[static_cast<size_t>(i)]);
      V.row(i) = raw.v2.row(idx[static_cast<size_t>(i)]);
    }
    raw.P = P;
    raw.Q = Q;
    raw.v2 = V;
    raw.T = s;
  }
  if (cfg.noise_injection > 0.0 || cfg.noise_voltage > 0.0) {
    MeterDataset tmp;
    tmp.T = raw.T;
    tmp.P = raw.P;
    tmp.Q = raw.Q;
    tmp.v2 = raw.v2;
    tmp.v2_nodes = raw.v2_nodes;
    NoiseSpec spec;
    spec.injection_halfwidth = cfg.noise_injection;
    spec.voltage_sigma = cfg.noise_voltage;
    spec.seed = cfg.noise_seed;
    tmp = apply_noise(tmp, spec);
    raw.P = tmp.P;
    raw.Q = tmp.Q;
    raw.v2 = tmp.v2;
  }
}

}  // namespace

IdentifyOutcome run_identify(const RunConfig& cfg) {
  cfg.validate();
  require(!cfg.feeder.empty() && !cfg.meter.empty() && !cfg.library.empty(),
          ErrorCode::InvalidArgument,
          "identify needs feeder, meter and library paths");
  const FeederFile feeder = load_feeder(cfg.feeder);
  RawMeterData raw = load_meter_csv(cfg.meter, feeder);
  const CableLibrary library =
      load_library(cfg.library, feeder.topology.edge_count(), feeder.z_base(),
                   cfg.envelope);
  std::optional<Eigen::VectorXd> z_true;
  if (!cfg.truth.empty()) {
    const std::vector<int> asg =
        load_ground_truth(cfg.truth, feeder.topology.edge_count());
    z_true = materialize_assignment(feeder.topology, library, asg).z;
  }

  apply_subset_and_noise(raw, cfg);
  const std::vector<SubFeeder> parts = split_at_metered_nodes(feeder, raw);
  IdentifyOutcome out =
      identify_parts(feeder.topology, parts, library, cfg, z_true);

  const std::string hash = config_hash(cfg);
  const std::string dir = make_run_dir(cfg.out_dir, hash);
  write_text_file(dir + "/config.json", config_to_json_text(cfg));
  write_report(dir, hash, &feeder, out);
  write_diagnostics(dir, hash, out.parts);
  if (out.ok) {
    const auto names = impedance_column_names(feeder.topology.edge_count());
    write_candidates_csv(dir + "/B.csv", out.B, names, hash);
    write_candidates_csv(dir + "/C.csv", out.C, names, hash);
    if (out.Z.rows()) write_candidates_csv(dir + "/Z.csv", out.Z, names, hash);
  }
  return out;
}

SweepOutcome run_noise_sweep(const RunConfig& cfg) {
  cfg.validate();
  require(!cfg.feeder.empty() && !cfg.library.empty(),
          ErrorCode::InvalidArgument, "sweep needs feeder and library paths");
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

  const SweepOutcome out = sweep_cells(feeder.topology, library, cfg, asg_ptr);

  const std::string hash = config_hash(cfg);
  const std::string dir = make_run_dir(cfg.out_dir, hash);
  write_text_file(dir + "/config.json", config_to_json_text(cfg));

  json j;
  j["config_hash"] = hash;
  j["parameter"] = cfg.sweep_parameter;
  j["levels"] = json::array();
  for (const auto& lv : out.levels) {
    j["levels"].push_back({{"level", lv.level},
                           {"survivors", lv.survivors},
                           {"median_r", lv.median_r},
                           {"q25_r", lv.q25_r},
                           {"q75_r", lv.q75_r},
                           {"median_x", lv.median_x},
                           {"q25_x", lv.q25_x},
                           {"q75_x", lv.q75_x}});
  }
  j["cells"] = json::array();
  for (const auto& cell : out.cells) {
    j["cells"].push_back({{"level", cell.level},
                          {"seed", cell.seed},
                          {"ok", cell.ok},
                          {"exit_code", cell.exit_code},
                          {"message", cell.message},
                          {"delta_star", cell.delta_star},
                          {"mape_r", cell.mape_r},
                          {"mape_x", cell.mape_x}});
  }
  write_text_file(dir + "/sweep.json", j.dump(2) + "\n");

  std::string csv = "# config_hash=" + hash + "\n";
  csv += "level,seed,ok,exit_code,delta_star,mape_r,mape_x\n";
  for (const auto& cell : out.cells) {
    csv += fmt_double(cell.level) + "," + std::to_string(cell.seed) + "," +
           (cell.ok ? "1" : "0") + "," + std::to_string(cell.exit_code) + "," +
           fmt_double(cell.delta_star) + "," + fmt_double(cell.mape_r) + "," +
           fmt_double(cell.mape_x) + "\n";
  }
  write_text_file(dir + "/sweep.csv", csv);
  return out;
}

DiagnoseOutcome run_diagnose(const RunConfig& cfg) {
  cfg.validate();
  require(!cfg.feeder.empty() && !cfg.meter.empty(), ErrorCode::InvalidArgument,
          "diagnose needs feeder and meter paths");
  const FeederFile feeder = load_feeder(cfg.feeder);
  RawMeterData raw = load_meter_csv(cfg.meter, feeder);
  apply_subset_and_noise(raw, cfg);
  const std::vector<SubFeeder> parts = split_at_metered_nodes(feeder, raw);

  DiagnoseOutcome out;
  for (const SubFeeder& part : parts) {
    PartOutcome po;
    po.edge_to_full = part.edge_to_full;
    po.node_to_full = part.node_to_full;
    const AggregatedFlows flows = aggregate_flows(part.topology, part.data);
    const DeltaSolution ds = solve_delta_lp(part.topology, part.data, flows);
    po.delta_star = ds.delta_star;
    po.duality_gap = ds.duality_gap;
    out.delta_star_max = std::max(out.delta_star_max, ds.delta_star);
    const HalfSpaceSystem sys = assemble_halfspaces(
        part.topology, part.data, flows, ds.delta_star, cfg.kappa);
    po.rows_data = sys.rows();
    po.diag = diagnose_identifiability(sys);
    out.parts.push_back(std::move(po));
  }

  const std::string hash = config_hash(cfg);
  const std::string dir = make_run_dir(cfg.out_dir, hash);
  write_text_file(dir + "/config.json", config_to_json_text(cfg));
  write_diagnostics(dir, hash, out.parts);
  return out;
}

}  // namespace feederid
