// cmig: command line front end for training, registration and evaluation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cmig/data/io.hpp"
#include "cmig/data/protocol.hpp"
#include "cmig/errors.hpp"
#include "cmig/geometry/metrics.hpp"
#include "cmig/harness/ablation.hpp"
#include "cmig/harness/config.hpp"
#include "cmig/harness/evaluation.hpp"
#include "cmig/harness/gradcheck_suite.hpp"
#include "cmig/harness/pipeline.hpp"
#include "cmig/harness/training.hpp"
#include "cmig/log.hpp"
#include "cmig/projection.hpp"

namespace fs = std::filesystem;
using namespace cmig;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  bool verbose = false;
};

harness::RunConfig resolve(const Globals& g) {
  harness::RunConfig cfg = g.config_path.empty() ? harness::RunConfig{} : harness::load_config(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  cfg.validate();
  return cfg;
}

fs::path prepare_out(const Globals& g, const harness::RunConfig& cfg) {
  const fs::path out(g.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + out.string() + ": " + ec.message());
  harness::save_config(out / "config.resolved.json", cfg);
  return out;
}

network::Model load_or_init(const harness::RunConfig& cfg, const std::string& checkpoint) {
  network::Model model = harness::initial_model(cfg);
  if (checkpoint.empty()) {
    log_warning("no --checkpoint given: using randomly initialised parameters");
    return model;
  }
  model.load(checkpoint);
  return model;
}

// Bundles are subdirectories holding sample.json, in name order.
harness::Dataset read_bundles(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> found;
  if (fs::exists(dir / "sample.json")) found.push_back(dir);
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() && fs::exists(e.path() / "sample.json")) found.push_back(e.path());
  std::sort(found.begin(), found.end());
  if (found.empty()) throw IoError("no sample bundles under " + dir.string());
  harness::Dataset out;
  for (const auto& p : found) out.push_back(data::read_sample(p));
  return out;
}

void write_transform(const fs::path& path, const geometry::RigidTransform& t, bool degenerate) {
  nlohmann::ordered_json j;
  std::vector<double> rot;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(t.rotation(r, c));
  j["rotation"] = rot;
  j["translation"] = {t.translation.x(), t.translation.y(), t.translation.z()};
  j["degenerate"] = degenerate;
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

int cmd_synth(const Globals& g, std::size_t count) {
  auto cfg = resolve(g);
  if (count > 0) cfg.data.eval_samples = count;
  const fs::path out = prepare_out(g, cfg);
  const auto shapes = harness::training_shapes(cfg);
  fs::create_directories(out / "shapes");
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "shape_%03zu.xyz", i);
    data::write_xyz(out / "shapes" / name, shapes[i]);
  }
  const auto samples = harness::make_eval_set(cfg);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "sample_%03zu", i);
    data::write_sample(out / "samples" / name, samples[i]);
  }
  std::cout << "wrote " << shapes.size() << " shapes and " << samples.size() << " samples to " << out.string() << '\n';
  return 0;
}

int cmd_train(const Globals& g, const std::string& resume) {
  const auto cfg = resolve(g);
  const fs::path out = prepare_out(g, cfg);
  network::Model model = harness::initial_model(cfg);
  if (!resume.empty()) model.load(resume);

  harness::TrainHooks hooks;
  hooks.checkpoint_path = out / "checkpoint.cmig";
  hooks.on_step = [&](const harness::LossRow& r) {
    if (r.step == 1 || r.step % 10 == 0 || r.step == cfg.train.steps)
      log_info("step " + std::to_string(r.step) + " epoch " + std::to_string(r.epoch) + " total " +
               std::to_string(r.total));
  };
  const auto curve = harness::train(model, cfg, hooks);
  harness::write_losses_csv(out / "losses.csv", curve);
  if (curve.empty()) model.save(out / "checkpoint.cmig");

  const auto set = harness::make_training_set(cfg, 0);
  auto report = harness::evaluate(model, set, harness::pipeline_options(cfg), cfg.eval.workers);
  report.config_hash = harness::config_hash(cfg);
  harness::write_metrics_csv(out / "metrics.csv", report);
  if (!curve.empty())
    std::printf("trained %zu steps: total loss %.6g -> %.6g; training-set MAE(R) %.4f deg\n", curve.size(),
                curve.front().total, curve.back().total, report.aggregate.mae_rot_deg);
  else
    std::printf("zero steps: parameters unchanged\n");
  return 0;
}

int cmd_register(const Globals& g, const std::string& checkpoint, const std::string& sample_dir,
                 const std::string& source, const std::string& target) {
  const auto cfg = resolve(g);
  data::RegistrationSample sample;
  bool has_gt = false;
  if (!sample_dir.empty()) {
    sample = data::read_sample(sample_dir);
    has_gt = true;
  } else {
    if (source.empty() || target.empty())
      throw ContractViolation("register needs --sample <dir> or both --source and --target");
    sample.source = data::load_cloud(source, data::format_from_path(source), cfg.data.n_points, cfg.seed);
    sample.target = data::load_cloud(target, data::format_from_path(target), cfg.data.n_points, cfg.seed + 1);
  }
  const fs::path out = prepare_out(g, cfg);
  const network::Model model = load_or_init(cfg, checkpoint);
  const auto r = harness::run_pipeline(model, sample.source, sample.target, harness::pipeline_options(cfg));
  write_transform(out / "transform.json", r.transform, r.degenerate);
  if (has_gt) {
    harness::EvalReport report;
    harness::SampleResult row;
    row.error = geometry::registration_error(r.transform, sample.gt);
    report.samples.push_back(row);
    report.aggregate = harness::aggregate(report.samples);
    harness::write_metrics_csv(out / "metrics.csv", report);
    std::printf("MAE(R) %.6f deg, MAE(t) %.6f\n", row.error.mae_rot_deg, row.error.mae_trans);
  }
  std::printf("%zu iterations in %.2f ms%s\n", r.iterations.size(), r.times.total_ms,
              r.degenerate ? " (stopped on a degenerate SVD)" : "");
  return 0;
}

int cmd_eval(const Globals& g, const std::string& checkpoint, const std::string& samples_dir) {
  const auto cfg = resolve(g);
  const harness::Dataset samples = samples_dir.empty() ? harness::make_eval_set(cfg) : read_bundles(samples_dir);
  const fs::path out = prepare_out(g, cfg);
  const network::Model model = load_or_init(cfg, checkpoint);

  auto report = harness::evaluate(model, samples, harness::pipeline_options(cfg), cfg.eval.workers,
                                   cfg.eval.timing_repeats);
  report.config_hash = harness::config_hash(cfg);
  harness::write_metrics_csv(out / "metrics.csv", report);
  harness::write_samples_csv(out / "samples.csv", report);
  std::vector<harness::EvalReport> timing = {report};
  if (cfg.eval.icp) {
    const auto icp = harness::evaluate_icp(samples);
    harness::write_metrics_csv(out / "metrics_icp.csv", icp);
    timing.push_back(icp);
  }
  if (!cfg.eval.iteration_sweep.empty()) {
    const auto sweep = harness::sweep_iterations(model, samples, harness::pipeline_options(cfg),
                                                 cfg.eval.iteration_sweep, cfg.eval.timing_repeats);
    harness::write_iterations_csv(out / "iterations.csv", sweep);
  }
  harness::write_timing_csv(out / "timing.csv", timing);
  std::printf("RMSE_R,MAE_R,RMSE_t,MAE_t\n%s\n", harness::format_error_row(report.aggregate).c_str());
  return 0;
}

int cmd_ablate(const Globals& g, const std::string& axes_path) {
  const auto cfg = resolve(g);
  harness::AblationAxes axes;
  if (axes_path.empty())
    axes.toggles = {"all", "no_tf", "no_cmd", "no_mcl", "no_mp"};
  else
    axes = harness::load_axes(axes_path);
  const fs::path out = prepare_out(g, cfg);
  std::vector<harness::AblationRow> done;
  harness::ablate(cfg, axes, [&](const harness::AblationRow& row) {
    done.push_back(row);
    harness::write_ablation_csv(out / "ablation.csv", done);  // partial results survive interruption
  });
  std::ifstream is(out / "ablation.csv");
  std::cout << is.rdbuf();
  return 0;
}

int cmd_gradcheck(const Globals& g, std::size_t probes, double epsilon) {
  harness::GradSuiteOptions o;
  o.epsilon = epsilon;
  o.seed = g.seed.value_or(0);
  o.probes_per_input = probes;
  const fs::path out(g.out);
  fs::create_directories(out);
  const auto result = harness::run_gradcheck_suite(o);
  harness::write_gradcheck_csv(out / "gradcheck.csv", result);
  for (const auto& e : result.entries)
    std::printf("%-36s %s  max_rel=%.3e  probed=%zu\n", e.name.c_str(), e.report.passed ? "PASS" : "FAIL",
                e.report.max_rel_error, e.report.probed);
  std::printf("%zu checks in %.1f s: %s\n", result.entries.size(), result.seconds,
              result.passed() ? "all passed" : "FAILURES");
  return result.passed() ? 0 : 1;
}

int cmd_render(const Globals& g, const std::string& input) {
  const auto cfg = resolve(g);
  const geometry::PointCloud cloud = input.empty()
                                         ? harness::training_shapes(cfg).front()
                                         : data::load_cloud(input, data::format_from_path(input), cfg.data.n_points,
                                                            cfg.seed);
  const fs::path out = prepare_out(g, cfg);
  const auto views = projection::render_views(cloud, cfg.model.views, cfg.model.resolution);
  const auto files = projection::write_pgm(views, out / "views", "view");
  for (const auto& f : files) std::cout << f.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cmig: cross-modal point cloud registration (train, register, evaluate)"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "JSON run configuration");
  app.add_option("--seed", g.seed, "Override the configured seed");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_flag("-v,--verbose", g.verbose, "Progress messages on stderr");

  std::size_t synth_count = 0;
  auto* synth = app.add_subcommand("synth", "Write the synthetic shapes and evaluation sample bundles");
  synth->add_option("--count", synth_count, "Number of samples (default: data.eval_samples)");

  std::string resume;
  auto* train = app.add_subcommand("train", "Train a model; writes losses.csv, checkpoint.cmig, metrics.csv");
  train->add_option("--resume", resume, "Start from this checkpoint");

  std::string checkpoint, sample_dir, source, target;
  auto* reg = app.add_subcommand("register", "Register one pair and write transform.json");
  reg->add_option("--checkpoint", checkpoint, "Model parameters");
  reg->add_option("--sample", sample_dir, "Sample bundle directory (has ground truth)");
  reg->add_option("--source", source, "Source cloud (OFF, PLY or XYZ)");
  reg->add_option("--target", target, "Target cloud (OFF, PLY or XYZ)");

  std::string samples_dir;
  auto* eval = app.add_subcommand("eval", "Evaluate on a sample set; writes metrics.csv and per-sample rows");
  eval->add_option("--checkpoint", checkpoint, "Model parameters (random if omitted)");
  eval->add_option("--samples", samples_dir, "Directory of sample bundles (default: generated from config)");

  std::string axes;
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate a grid of configurations");
  ablate->add_option("--axes", axes, "JSON axes file (default: component toggles)");

  std::size_t probes = 12;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every loss and block");
  gradcheck->add_option("--probes", probes, "Elements probed per input tensor (0 = all)")->capture_default_str();
  double epsilon = 1e-5;
  gradcheck->add_option("--epsilon", epsilon, "Central-difference step")->capture_default_str();

  std::string input;
  auto* render = app.add_subcommand("render-debug", "Dump the depth views of a cloud as PGM images");
  render->add_option("--input", input, "Cloud file (default: first training shape)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }
  set_log_level(g.verbose ? LogLevel::kInfo : LogLevel::kWarning);

  try {
    if (*synth) return cmd_synth(g, synth_count);
    if (*train) return cmd_train(g, resume);
    if (*reg) return cmd_register(g, checkpoint, sample_dir, source, target);
    if (*eval) return cmd_eval(g, checkpoint, samples_dir);
    if (*ablate) return cmd_ablate(g, axes);
    if (*gradcheck) return cmd_gradcheck(g, probes, epsilon);
    if (*render) return cmd_render(g, input);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
