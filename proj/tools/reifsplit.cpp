#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "reifsplit/error.hpp"
#include "reifsplit/examples.hpp"
#include "reifsplit/holder.hpp"
#include "reifsplit/io.hpp"
#include "reifsplit/map_builder.hpp"
#include "reifsplit/splitting.hpp"

namespace fs = std::filesystem;
using namespace reifsplit;

namespace {

enum Exit { kPass = 0, kCertificationFailure = 1, kInvalidInput = 2, kInfeasible = 3, kDegenerate = 4 };

// Fills options of `sub` that were not given on the command line from a JSON object
// whose keys are long option names, with '_' or '-'.
void apply_json_config(CLI::App* sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgumentError("cannot read config file " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const std::exception& e) {
    throw InvalidArgumentError(std::string("invalid JSON config: ") + e.what());
  }
  if (!j.is_object()) throw InvalidArgumentError("JSON config must be an object");
  for (const auto& [key, value] : j.items()) {
    std::string name = key;
    std::replace(name.begin(), name.end(), '_', '-');
    CLI::Option* opt = sub->get_option_no_throw("--" + name);
    if (opt == nullptr || name == "config") throw InvalidArgumentError("unknown config key " + key);
    if (opt->count() > 0) continue;
    std::vector<std::string> inputs;
    auto text = [](const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    if (value.is_array()) {
      for (const auto& v : value) inputs.push_back(text(v));
    } else if (value.is_primitive() && !value.is_null()) {
      inputs.push_back(text(value));
    } else {
      throw InvalidArgumentError("unsupported config value for " + key);
    }
    for (const auto& v : inputs) opt->add_result(v);
    try {
      opt->run_callback();
    } catch (const CLI::ParseError& e) {
      throw InvalidArgumentError("config key " + key + ": " + e.what());
    }
  }
}

struct RunConfig {
  std::string config;
  std::string output_dir = ".";
  std::uint64_t seed = 1;

  // generate
  std::string kind = "merging-lines";
  double delta = 0.01;
  double alpha_twist = 1.5 * M_PI;
  double h = 5e-4;
  int n = 2;
  int k = 1;
  bool flat = false;

  // shared inputs
  std::string input;
  std::string pyramid;
  double input_h = 0.0;
  int k_override = 0;
  int sheets = 0;
  double delta_override = 0.0;

  // detect
  int balls = 100;
  double radius_min = 0.05;
  double radius_max = 0.4;
  int chains = 0;
  int chain_m = 4;
  int chain_depth = 5;

  // build
  double alpha = 0.1;
  int m = 4;
  int i_max = 0;
  bool allow_subresolution = false;
  int probes = 20;

  // certify
  int pairs = 500;
  int continuity_pairs = 10000;
  int audit = 200;
  double constant_ceiling = 100.0;
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InvalidArgumentError("cannot create output directory " + dir + ": " + ec.message());
}

std::string in_dir(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

PointSample load_sample(const std::string& path, double h) {
  if (!fs::exists(path)) throw InvalidArgumentError("input file not found: " + path);
  if (fs::path(path).extension() == ".json") return sample_from_json(read_json_file(path));
  if (!(h > 0.0)) throw InvalidArgumentError("CSV input needs --h");
  return read_sample_csv(path, h);
}

std::string input_path(const RunConfig& cfg) {
  return cfg.input.empty() ? in_dir(cfg.output_dir, "sample.json") : cfg.input;
}

// ground_truth.json next to the input, when the input came from `generate`.
std::optional<Json> sibling_ground_truth(const std::string& input) {
  const fs::path gt = fs::path(input).parent_path() / "ground_truth.json";
  if (!fs::exists(gt)) return std::nullopt;
  return read_json_file(gt.string());
}

struct ModelParams {
  int k = 1;
  int sheets = 1;
  double delta = 0.01;
  std::optional<ExampleSpec> spec;
};

ModelParams resolve_model(const RunConfig& cfg, const std::string& input) {
  ModelParams p;
  if (auto gt = sibling_ground_truth(input)) {
    p.spec = example_spec_from_json(gt->at("spec"));
    p.k = p.spec->k;
    p.delta = p.spec->delta;
    p.sheets = gt->at("max_sheets").get<int>();
  }
  if (cfg.k_override > 0) p.k = cfg.k_override;
  if (cfg.sheets > 0) p.sheets = cfg.sheets;
  if (cfg.delta_override > 0.0) p.delta = cfg.delta_override;
  return p;
}

int cmd_generate(const RunConfig& cfg) {
  ExampleSpec spec;
  try {
    spec.kind = example_kind_from_string(cfg.kind);
    spec.delta = cfg.delta;
    spec.alpha_twist = cfg.alpha_twist;
    spec.h = cfg.h;
    spec.n = cfg.n;
    spec.k = cfg.k;
    spec.flat = cfg.flat;
    if (spec.kind == ExampleKind::Twist && cfg.n == 2 && cfg.k == 1) {
      spec.n = 3;
      spec.k = 2;
    }
    validate(spec);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalidInput;
  }
  auto [sample, truth] = generate(spec);
  ensure_dir(cfg.output_dir);
  write_sample_csv(sample, in_dir(cfg.output_dir, "sample.csv"));
  write_json_file(sample_to_json(sample), in_dir(cfg.output_dir, "sample.json"));
  write_json_file(truth.metadata(), in_dir(cfg.output_dir, "ground_truth.json"));
  std::cout << "generated " << sample.size() << " points (" << to_string(spec.kind) << ", n = " << sample.dim()
            << ", h = " << format_double(sample.resolution()) << ")\n";
  return kPass;
}

int cmd_detect(const RunConfig& cfg) {
  const std::string input = input_path(cfg);
  const PointSample s = load_sample(input, cfg.input_h);
  const ModelParams model = resolve_model(cfg, input);
  if (!(cfg.radius_min > 0.0 && cfg.radius_min <= cfg.radius_max)) throw InvalidArgumentError("bad radius range");

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Json certs = Json::array();
  double max_defect = 0.0, sum_defect = 0.0, max_diam = 0.0;
  std::size_t max_offsets = 0;
  const std::vector<std::size_t> pool = s.indices_within(Vector::Zero(s.dim()), 1.99 - cfg.radius_min);
  if (pool.empty()) throw EmptySetError("no sample points inside the sweep domain");
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  int produced = 0;
  for (int attempt = 0; produced < cfg.balls; ++attempt) {
    if (attempt > 100 * cfg.balls + 100) throw EmptySetError("could not place sweep balls inside the domain");
    const double r = cfg.radius_min + (cfg.radius_max - cfg.radius_min) * unit(rng);
    const Vector c = s.point(pool[pick(rng)]);
    if (c.norm() + r > 1.99) continue;
    const SplittingCertificate cert = detect_splitting(s, Ball(c, r), model.k, model.sheets);
    max_defect = std::max(max_defect, cert.defect);
    sum_defect += cert.defect;
    max_diam = std::max(max_diam, cert.offset_diameter);
    max_offsets = std::max(max_offsets, cert.offsets.size());
    certs.push_back(to_json(cert));
    ++produced;
  }

  Json censuses = Json::array();
  if (cfg.chains > 0) {
    WindowSampler sampler;
    if (model.spec) sampler = window_sampler(*model.spec);
    // Chains start at radius 1, so their centers are drawn from S cap B_1.
    const std::vector<std::size_t> starts = s.indices_within(Vector::Zero(s.dim()), 1.0);
    if (starts.empty()) throw EmptySetError("no sample points in B_1 to start a census chain");
    std::uniform_int_distribution<std::size_t> pick_start(0, starts.size() - 1);
    for (int c = 0; c < cfg.chains; ++c) {
      const Vector start = s.point(starts[pick_start(rng)]);
      const std::uint64_t chain_seed = rng();
      std::vector<Ball> chain;
      BadScaleReport report;
      if (sampler) {
        chain = descending_chain(sampler, start, 1.0, cfg.chain_m, cfg.chain_depth, chain_seed);
        report = census_bad_scales(sampler, chain, model.k, model.sheets, cfg.chain_m);
      } else {
        chain = descending_chain(s, start, 1.0, cfg.chain_m, cfg.chain_depth, chain_seed);
        report = census_bad_scales(s, chain, model.k, model.sheets, cfg.chain_m);
      }
      censuses.push_back(to_json(report));
    }
  }

  Json out;
  out["certificates"] = std::move(certs);
  out["summary"] = Json{{"count", produced},
                        {"max_defect", max_defect},
                        {"mean_defect", produced ? sum_defect / produced : 0.0},
                        {"max_offsets", max_offsets},
                        {"max_offset_diameter", max_diam}};
  out["censuses"] = std::move(censuses);
  ensure_dir(cfg.output_dir);
  write_json_file(out, in_dir(cfg.output_dir, "certificates.json"));
  std::cout << "detected " << produced << " balls: max defect " << format_double(max_defect) << ", max offsets "
            << max_offsets << "\n";
  return kPass;
}

int cmd_build(const RunConfig& cfg) {
  const std::string input = input_path(cfg);
  const PointSample s = load_sample(input, cfg.input_h);
  const ModelParams model = resolve_model(cfg, input);
  PyramidParams params;
  params.k = model.k;
  params.n = s.dim();
  params.max_sheets = model.sheets;
  params.m = cfg.m;
  params.delta_nominal = model.delta;
  params.alpha = cfg.alpha;
  params.h = s.resolution();
  const int resolved = max_resolved_stage(cfg.m, s.resolution());
  params.i_max = cfg.i_max > 0 ? cfg.i_max : std::max(resolved, 1);
  if (params.i_max > resolved && !cfg.allow_subresolution) {
    std::cerr << "error: stage " << params.i_max << " needs r_i = 2^(-m i) = "
              << format_double(std::pow(2.0, -cfg.m * params.i_max)) << " >= 10 h = "
              << format_double(10.0 * s.resolution()) << "; the sample resolves up to stage " << resolved << "\n";
    return kInfeasible;
  }
  BuildOptions options;
  options.cover.allow_subresolution = cfg.allow_subresolution;
  MapPyramid pyr = initialize_pyramid(s, params, options);
  CertificateCache cache;
  for (int i = 1; i <= params.i_max; ++i) {
    try {
      pyr = build_stage(pyr, s, options, &cache);
    } catch (const Error& e) {
      std::cerr << "error: stage " << i << ": " << e.what() << "\n";
      return kInfeasible;
    }
    std::cout << "stage " << i << ": " << pyr.stage(i).cover.size() << " centers, "
              << pyr.stage(i).cover.certificates.size() << " certificates\n";
  }
  ensure_dir(cfg.output_dir);
  const std::string path = in_dir(cfg.output_dir, "pyramid.json");
  write_json_file(to_json(pyr), path);

  // Round trip through the file: reloaded values must agree with the built ones.
  const MapPyramid reloaded = pyramid_from_json(read_json_file(path));
  std::mt19937_64 rng(cfg.seed);
  const std::vector<std::size_t> inside = s.indices_within(Vector::Zero(s.dim()), 1.0);
  if (inside.empty()) throw EmptySetError("no sample points in B_1");
  std::uniform_int_distribution<std::size_t> pick(0, inside.size() - 1);
  double spot = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Vector x = s.point(inside[pick(rng)]);
    spot = std::max(spot, (reloaded.value(x) - pyr.value(x)).norm());
  }

  std::vector<Vector> probes;
  for (int t = 0; t < cfg.probes; ++t) probes.push_back(s.point(inside[pick(rng)]));
  std::ofstream table(in_dir(cfg.output_dir, "regularity.csv"));
  table << "stage,probe,regularity,lower_norm,lower_inv_norm,kernel_gap\n";
  std::cout << "stage  max regularity  max |L|  max |L^-1|  r_i^-alpha\n";
  for (int i = 1; i <= params.i_max; ++i) {
    const std::vector<RegularityRow> rows = regularity_profile(pyr, i, probes, s);
    double reg = 0.0, ln = 0.0, li = 0.0;
    for (std::size_t p = 0; p < rows.size(); ++p) {
      const RegularityRow& row = rows[p];
      reg = std::max(reg, row.regularity);
      ln = std::max(ln, row.lower_norm);
      li = std::max(li, row.lower_inv_norm);
      table << i << "," << p << "," << format_double(row.regularity) << "," << format_double(row.lower_norm) << ","
            << format_double(row.lower_inv_norm) << ","
            << (row.kernel_gap ? format_double(*row.kernel_gap) : std::string()) << "\n";
    }
    std::cout << i << "  " << format_double(reg) << "  " << format_double(ln) << "  " << format_double(li) << "  "
              << format_double(std::pow(pyr.radius(i), -params.alpha)) << "\n";
  }
  std::cout << "reload spot-check max difference " << format_double(spot) << "\n";
  if (spot > 1e-12) {
    std::cerr << "error: reloaded pyramid differs from the built one by " << format_double(spot) << "\n";
    return kCertificationFailure;
  }
  return kPass;
}

int cmd_certify(const RunConfig& cfg) {
  const std::string input = input_path(cfg);
  const PointSample s = load_sample(input, cfg.input_h);
  const std::string pyramid_path = cfg.pyramid.empty() ? in_dir(cfg.output_dir, "pyramid.json") : cfg.pyramid;
  if (!fs::exists(pyramid_path)) throw InvalidArgumentError("pyramid file not found: " + pyramid_path);
  const MapPyramid pyr = pyramid_from_json(read_json_file(pyramid_path));
  const PyramidParams& params = pyr.params();
  if (s.dim() != params.n) throw DimensionMismatchError("sample and pyramid dimensions differ");
  const double alpha = params.alpha;
  const double delta = params.delta_nominal;

  const FiberIndex index(pyr, s);
  std::mt19937_64 rng(cfg.seed);
  CertifyOptions copts;
  copts.constant_ceiling = cfg.constant_ceiling;
  const HolderReport report = certify_biholder(index, random_parameter_pairs(params.k, cfg.pairs, rng()), alpha, copts);
  if (report.pairs.empty() || static_cast<double>(report.skipped) > 0.1 * cfg.pairs) {
    std::cerr << "error: " << report.skipped << " of " << cfg.pairs << " sampled pairs hit an empty fiber\n";
    return kDegenerate;
  }

  const ContinuityReport cont =
      holder_continuity(pyr, random_sample_pairs(s, cfg.continuity_pairs, rng()), alpha, delta);
  const bool cont_pass = cont.stable && cont.c_fit <= cfg.constant_ceiling;

  std::vector<Vector> cs;
  {
    const auto draws = random_parameter_pairs(params.k, cfg.audit, rng());
    for (const auto& d : draws) cs.push_back(d.first);
  }
  const CardinalityAudit audit = cardinality_audit(index, cs, params.max_sheets);
  const bool audit_pass = audit.max_size <= static_cast<std::size_t>(params.max_sheets);

  const CoverageReport coverage = fiber_coverage(index);

  std::vector<Fiber> fibers;
  for (const Vector& c : cs) fibers.push_back(index.fiber(c));

  ensure_dir(cfg.output_dir);
  write_json_file(to_json(report), in_dir(cfg.output_dir, "holder_report.json"));
  write_fibers_csv(index, fibers, in_dir(cfg.output_dir, "fibers.csv"));
  {
    std::ofstream plot(in_dir(cfg.output_dir, "holder_pairs.csv"));
    plot << "separation,hausdorff,lower_bound,upper_bound\n";
    for (const PairRecord& p : report.pairs) {
      plot << format_double(p.separation) << "," << format_double(p.hausdorff) << ","
           << format_double((1.0 - report.c_lower * delta) * std::pow(p.separation, 1.0 / (1.0 - alpha))) << ","
           << format_double((1.0 + report.c_upper * delta) * std::pow(p.separation, 1.0 - alpha)) << "\n";
    }
  }
  const bool pass = report.pass && cont_pass && audit_pass && coverage.complete();
  Json summary;
  summary["biholder"] = Json{{"pass", report.pass},
                             {"C_lower", report.c_lower},
                             {"C_upper", report.c_upper},
                             {"violations", report.violations.size()}};
  summary["continuity"] = to_json(cont);
  summary["continuity"]["pass"] = cont_pass;
  summary["cardinality"] = to_json(audit);
  summary["cardinality"]["pass"] = audit_pass;
  summary["coverage"] = to_json(coverage);
  summary["pass"] = pass;
  write_json_file(summary, in_dir(cfg.output_dir, "certification.json"));

  std::cout << "biholder: C_lower " << format_double(report.c_lower) << ", C_upper " << format_double(report.c_upper)
            << ", violations " << report.violations.size() << (report.pass ? ", pass" : ", FAIL") << "\n"
            << "continuity: C " << format_double(cont.c_fit) << (cont_pass ? ", pass" : ", FAIL") << "\n"
            << "cardinality: max " << audit.max_size << " (bound " << params.max_sheets << ")"
            << (audit_pass ? ", pass" : ", FAIL") << "\n"
            << "coverage: " << coverage.exact << " / " << coverage.points << (coverage.complete() ? ", pass" : ", FAIL")
            << "\n";
  if (!report.pass) {
    for (const auto& [id, reason] : report.violations) {
      const PairRecord& p = report.pairs[id];
      std::cout << "  violation " << reason << ": |c-d| " << format_double(p.separation) << ", d_H "
                << format_double(p.hausdorff) << "\n";
    }
  }
  return pass ? kPass : kCertificationFailure;
}

void add_common(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--config", cfg.config, "JSON file with option values");
  sub->add_option("--output-dir", cfg.output_dir, "Directory for all artifacts");
  sub->add_option("--seed", cfg.seed, "Seed for randomized sweeps");
}

void add_inputs(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--input", cfg.input, "Sample file (.json or .csv); default <output-dir>/sample.json");
  sub->add_option("--h", cfg.input_h, "Resolution of a CSV input");
  sub->add_option("-k,--k", cfg.k_override, "Splitting dimension");
  sub->add_option("-N,--sheets", cfg.sheets, "Maximal number of sheets");
  sub->add_option("--delta", cfg.delta_override, "Nominal delta");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-sheeted splitting detection, map building and biHolder certification"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  RunConfig cfg;

  CLI::App* gen = app.add_subcommand("generate", "Generate an example set");
  add_common(gen, cfg);
  gen->add_option("--kind", cfg.kind, "merging-lines | twist | cantor-product | single-graph");
  gen->add_option("--delta", cfg.delta, "Example delta");
  gen->add_option("--alpha-twist", cfg.alpha_twist, "Twist angle in (pi, 2 pi]");
  gen->add_option("--h", cfg.h, "Sample resolution");
  gen->add_option("-n,--n", cfg.n, "Ambient dimension");
  gen->add_option("-k,--k", cfg.k, "Sheet dimension");
  gen->add_flag("--flat", cfg.flat, "Single-graph without curvature");

  CLI::App* det = app.add_subcommand("detect", "Splitting detection sweep over random balls");
  add_common(det, cfg);
  add_inputs(det, cfg);
  det->add_option("--balls", cfg.balls, "Number of random balls");
  det->add_option("--radius-min", cfg.radius_min, "Smallest ball radius");
  det->add_option("--radius-max", cfg.radius_max, "Largest ball radius");
  det->add_option("--chains", cfg.chains, "Number of bad-scale censuses");
  det->add_option("--chain-m", cfg.chain_m, "Scale ratio exponent of census chains");
  det->add_option("--chain-depth", cfg.chain_depth, "Number of scales below the top in each chain");

  CLI::App* bld = app.add_subcommand("build", "Build the map pyramid");
  add_common(bld, cfg);
  add_inputs(bld, cfg);
  bld->add_option("--alpha", cfg.alpha, "Holder exponent loss");
  bld->add_option("-m,--m", cfg.m, "Scale ratio exponent");
  bld->add_option("--i-max", cfg.i_max, "Top stage; default is the finest stage with r_i >= 10 h");
  bld->add_flag("--allow-subresolution", cfg.allow_subresolution, "Build stages below 10 h at radius 10 h");
  bld->add_option("--probes", cfg.probes, "Regularity profile probes per stage");

  CLI::App* cer = app.add_subcommand("certify", "Certify the Holder estimates of a built pyramid");
  add_common(cer, cfg);
  cer->add_option("--input", cfg.input, "Sample file (.json or .csv); default <output-dir>/sample.json");
  cer->add_option("--h", cfg.input_h, "Resolution of a CSV input");
  cer->add_option("--pyramid", cfg.pyramid, "Pyramid file; default <output-dir>/pyramid.json");
  cer->add_option("--pairs", cfg.pairs, "Parameter pairs for the biHolder report");
  cer->add_option("--continuity-pairs", cfg.continuity_pairs, "Point pairs for the continuity report");
  cer->add_option("--audit", cfg.audit, "Fibers sampled by the cardinality audit");
  cer->add_option("--constant-ceiling", cfg.constant_ceiling, "Largest acceptable fitted constant");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kInvalidInput;
  }

  try {
    if (!cfg.config.empty()) {
      for (CLI::App* sub : {gen, det, bld, cer}) {
        if (*sub) apply_json_config(sub, cfg.config);
      }
    }
    if (*gen) return cmd_generate(cfg);
    if (*det) return cmd_detect(cfg);
    if (*bld) return cmd_build(cfg);
    if (*cer) return cmd_certify(cfg);
  } catch (const InvalidArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const DimensionMismatchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const EmptySetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDegenerate;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInfeasible;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed JSON input: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalidInput;
  }
  return kInvalidInput;
}
