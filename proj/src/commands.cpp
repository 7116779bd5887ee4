#include "motionfc/commands.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "motionfc/config.hpp"
#include "motionfc/core.hpp"
#include "motionfc/metrics.hpp"
#include "motionfc/predict.hpp"
#include "motionfc/synth.hpp"
#include "motionfc/train.hpp"

namespace motionfc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

void write_text(const fs::path& path, const std::string& body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << body;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

json format_versions() {
  return {{"dataset", "jsonl-1"}, {"checkpoint", kCheckpointVersion}, {"report", 1}};
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ValidationError("'" + item + "' is not a number");
    }
  }
  return out;
}

struct SynthArgs {
  std::size_t dims = 3;
  std::size_t sequences = 64;
  std::size_t frames = 30;
  std::size_t joints = 13;
  std::size_t per_video = 1;
  double occlusion = -1.0;
  double interval = -1.0;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  SynthSpec spec = SynthSpec::defaults_for(a.dims);
  spec.num_sequences = a.sequences;
  spec.frames = a.frames;
  spec.joints = a.joints;
  spec.sequences_per_video = a.per_video;
  spec.seed = a.seed;
  if (a.occlusion >= 0.0) spec.occlusion_rate = a.occlusion;
  if (a.interval > 0.0) spec.frame_interval_ms = a.interval;
  const Dataset ds = generate_dataset(spec);
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  save_dataset(ds, a.out);
  out << "wrote " << ds.sequences.size() << " sequences to " << a.out << "\n";
  return 0;
}

struct CommonArgs {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out;
};

json load_config(const CommonArgs& c) {
  std::vector<std::string> sets = c.sets;
  if (c.seed) sets.push_back("seed=" + std::to_string(*c.seed));
  return load_run_config(c.config.empty() ? std::nullopt : std::optional<fs::path>(c.config), sets);
}

int cmd_train(const CommonArgs& c, bool short_term, const std::string& init, std::ostream& out) {
  json config = load_config(c);
  if (!c.out.empty()) config["output_dir"] = c.out;
  if (config["data"]["train"].is_null()) throw ValidationError("data.train is not set");
  const Dataset train_set = load_dataset(config["data"]["train"].get<std::string>());
  RunConfig run = resolve_run_config(config, train_set.skeleton.joints(), train_set.dims);
  std::optional<Dataset> val;
  if (run.validation_data) val = load_dataset(*run.validation_data);

  TrainHooks hooks;
  if (!init.empty()) hooks.initial_model = load_model(init, run.train.model);
  TrainResult result =
      short_term ? train_short_term(train_set, run.train, run.seed, run.fusion.short_frames,
                                    val ? &*val : nullptr, hooks)
                 : train(train_set, run.train, run.seed, val ? &*val : nullptr, hooks);

  fs::create_directories(run.output_dir);
  save_forecaster(result.forecaster, run.output_dir / "model.ckpt");
  write_text(run.output_dir / "train_report.csv", result.report.to_csv());
  write_text(run.output_dir / "train_report.json", result.report.to_json());
  json snapshot = run.resolved;
  if (short_term) snapshot["short_term_frames"] = run.fusion.short_frames;
  snapshot["formats"] = format_versions();
  write_text(run.output_dir / "resolved_config.json", snapshot.dump(2) + "\n");

  const auto& epochs = result.report.epochs;
  out << "trained " << epochs.size() << " epochs";
  if (!epochs.empty()) out << ", final loss " << epochs.back().loss;
  out << "; best epoch " << result.report.best_epoch << "; checkpoint "
      << (run.output_dir / "model.ckpt").string() << "\n";
  if (result.report.diverged) {
    std::cerr << "training diverged: " << result.report.diagnostic << "\n";
    return kExitRuntime;
  }
  return 0;
}

struct PredictArgs {
  std::string model;
  std::vector<std::string> fuse;
  std::vector<std::string> extra;
  std::string input;
  std::size_t stride = 0;
  std::size_t short_frames = 0;
};

int cmd_predict(const CommonArgs& c, const PredictArgs& p, std::ostream& out) {
  const json config = load_config(c);
  if (c.out.empty()) throw ValidationError("--out is required");
  const Dataset data = load_dataset(p.input);
  const std::size_t stride =
      p.stride > 0 ? p.stride : config["window"]["eval_stride"].get<std::size_t>();
  FusionConfig fusion;
  fusion.short_frames =
      p.short_frames > 0 ? p.short_frames : config["fusion"]["short_frames"].get<std::size_t>();

  PredictionSet preds;
  if (!p.fuse.empty()) {
    if (p.fuse.size() != 2) throw ValidationError("--fuse takes a short and a long checkpoint");
    const Forecaster short_model = load_forecaster(p.fuse[0]);
    const Forecaster long_model = load_forecaster(p.fuse[1]);
    std::vector<Forecaster> extras;
    for (const auto& e : p.extra) extras.push_back(load_forecaster(e));
    preds = predict_dataset_fused(short_model, long_model, extras, data, stride, fusion);
    json sidecar = {{"short_model", p.fuse[0]},
                    {"long_model", p.fuse[1]},
                    {"extra_models", p.extra},
                    {"extra_models_combination", "coordinate-wise mean with the long model"},
                    {"short_frames", fusion.short_frames},
                    {"frames_from_short", {1, fusion.short_frames}},
                    {"frames_from_long", {fusion.short_frames + 1, long_model.output_frames}},
                    {"formats", format_versions()}};
    write_text(c.out + ".fusion.json", sidecar.dump(2) + "\n");
  } else {
    if (p.model.empty()) throw ValidationError("--model or --fuse is required");
    preds = predict_dataset(load_forecaster(p.model), data, stride);
  }
  if (fs::path(c.out).has_parent_path()) fs::create_directories(fs::path(c.out).parent_path());
  save_predictions(preds, c.out);
  out << "wrote " << preds.predictions.size() << " predictions to " << c.out << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& c, const std::string& pred_path, const std::string& gt_path,
             std::ostream& out) {
  const json config = load_config(c);
  if (c.out.empty()) throw ValidationError("--out is required");
  const Dataset gt = load_dataset(gt_path);
  const PredictionSet preds = load_predictions(pred_path);
  const RunConfig run = resolve_run_config(config, gt.skeleton.joints(), gt.dims);
  const MetricReport report = evaluate(preds, gt, run.train.metric);
  if (fs::path(c.out).has_parent_path()) fs::create_directories(fs::path(c.out).parent_path());
  write_report(report, c.out);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  out << to_string(report.kind) << " average " << std::setprecision(6) << report.average << " over "
      << report.per_sample.size() << " windows\n";
  return 0;
}

struct SweepRow {
  double scale = 0.0;
  std::size_t blocks = 0;
  std::size_t channels = 0;
  std::optional<double> average;
  std::string error;
};

int cmd_sweep(const CommonArgs& c, const std::string& scales, const std::string& blocks,
              const std::string& channels, std::size_t jobs, std::ostream& out,
              std::ostream& err) {
  json config = load_config(c);
  if (!c.out.empty()) config["output_dir"] = c.out;
  if (!scales.empty()) config["sweep"]["scale"] = parse_list(scales);
  auto as_sizes = [](const std::string& s) {
    std::vector<std::size_t> v;
    for (double d : parse_list(s)) v.push_back(static_cast<std::size_t>(d));
    return v;
  };
  if (!blocks.empty()) config["sweep"]["num_blocks"] = as_sizes(blocks);
  if (!channels.empty()) config["sweep"]["hidden_channels"] = as_sizes(channels);
  if (jobs > 0) config["sweep"]["jobs"] = jobs;
  if (config["data"]["train"].is_null()) throw ValidationError("data.train is not set");

  const Dataset train_set = load_dataset(config["data"]["train"].get<std::string>());
  const RunConfig run = resolve_run_config(config, train_set.skeleton.joints(), train_set.dims);
  const Dataset eval_set = run.validation_data ? load_dataset(*run.validation_data) : train_set;
  if (run.sweep.scale.empty() || run.sweep.num_blocks.empty() || run.sweep.hidden_channels.empty()) {
    throw ValidationError("sweep grid is empty");
  }

  std::vector<SweepRow> rows;
  for (double s : run.sweep.scale)
    for (std::size_t b : run.sweep.num_blocks)
      for (std::size_t ch : run.sweep.hidden_channels) rows.push_back({s, b, ch, {}, {}});

  auto run_member = [&](SweepRow& row) {
    try {
      TrainConfig cfg = run.train;
      cfg.preprocess.scale = row.scale;
      cfg.model.num_blocks = row.blocks;
      cfg.model.hidden_channels = row.channels;
      const TrainResult r = train(train_set, cfg, run.seed,
                                  run.validation_data ? &eval_set : nullptr);
      if (r.report.diverged) throw DivergenceError(r.report.diagnostic);
      row.average = validate_forecaster(r.forecaster, eval_set, cfg.metric, cfg.eval_stride).average;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  };

  const std::size_t workers = std::min(run.sweep.jobs, rows.size());
  if (workers <= 1) {
    for (auto& row : rows) run_member(row);
  } else {
    std::mutex lock;
    std::size_t next = 0;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        while (true) {
          std::size_t i;
          {
            std::lock_guard<std::mutex> g(lock);
            if (next >= rows.size()) return;
            i = next++;
          }
          run_member(rows[i]);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  // Failed members are left out of the tables and listed on their own.
  auto err_log = [&](const SweepRow& r) {
    err << "sweep member scale=" << r.scale << " blocks=" << r.blocks << " channels=" << r.channels
        << " failed: " << r.error << "\n";
  };
  std::ostringstream csv;
  csv << std::setprecision(17) << "scale,num_blocks,hidden_channels,average\n";
  json table = json::array(), failed = json::array();
  std::ostringstream md;
  md << "| Scale | #Block | #Channel | " << to_string(run.train.metric.kind) << " average |\n"
     << "|---|---|---|---|\n";
  for (const auto& r : rows) {
    if (!r.average) {
      failed.push_back({{"scale", r.scale},
                        {"num_blocks", r.blocks},
                        {"hidden_channels", r.channels},
                        {"error", r.error}});
      err_log(r);
      continue;
    }
    csv << r.scale << "," << r.blocks << "," << r.channels << "," << *r.average << "\n";
    table.push_back({{"scale", r.scale},
                     {"num_blocks", r.blocks},
                     {"hidden_channels", r.channels},
                     {"average", *r.average}});
    md << "| " << r.scale << " | " << r.blocks << " | " << r.channels << " | " << std::fixed
       << std::setprecision(2) << *r.average << " |\n";
    md.unsetf(std::ios::fixed);
  }
  const std::size_t failures = failed.size();
  fs::create_directories(run.output_dir);
  write_text(run.output_dir / "sweep.csv", csv.str());
  json doc = {{"rows", table}, {"failures", failed}, {"seed", run.seed}, {"config", run.resolved},
              {"formats", format_versions()}};
  write_text(run.output_dir / "sweep.json", doc.dump(2) + "\n");
  write_text(run.output_dir / "sweep.md", md.str());
  out << md.str();
  out << rows.size() - failures << " of " << rows.size() << " runs succeeded\n";
  return failures == rows.size() ? kExitRuntime : 0;
}

void add_common(CLI::App* cmd, CommonArgs& c, bool needs_out) {
  cmd->add_option("--config", c.config, "Run config JSON")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.sets, "Override a config key: dotted.key=value");
  cmd->add_option("--seed", c.seed, "Random seed (overrides config)");
  auto* o = cmd->add_option("--out", c.out, "Output path");
  if (needs_out) o->required();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Single-person global motion forecasting: DCT trajectories + residual GCN",
               "motionfc"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->add_option("--dims", synth.dims, "2 or 3")->check(CLI::IsMember({2, 3}));
  synth_cmd->add_option("--sequences", synth.sequences, "Number of sequences");
  synth_cmd->add_option("--frames", synth.frames, "Frames per sequence");
  synth_cmd->add_option("--joints", synth.joints, "Joints per pose");
  synth_cmd->add_option("--sequences-per-video", synth.per_video,
                        "Consecutive sequences sharing a video id");
  synth_cmd->add_option("--occlusion", synth.occlusion, "Occlusion run start rate (2D)");
  synth_cmd->add_option("--frame-interval", synth.interval, "Milliseconds per frame");
  synth_cmd->add_option("--seed", synth.seed, "Random seed");
  synth_cmd->add_option("--out", synth.out, "Dataset file")->required();

  CommonArgs train_args;
  bool short_term = false;
  std::string init;
  auto* train_cmd = app.add_subcommand("train", "Train a forecaster");
  add_common(train_cmd, train_args, false);
  train_cmd->add_flag("--short-term", short_term,
                      "Restrict the loss to the first fusion.short_frames forecast frames");
  train_cmd->add_option("--init", init, "Start from this model checkpoint")->check(CLI::ExistingFile);

  CommonArgs predict_args;
  PredictArgs predict;
  auto* predict_cmd = app.add_subcommand("predict", "Forecast every window of a dataset");
  add_common(predict_cmd, predict_args, true);
  predict_cmd->add_option("--model", predict.model, "Forecaster checkpoint");
  predict_cmd->add_option("--fuse", predict.fuse, "Short-term and long-term checkpoints")
      ->expected(2);
  predict_cmd->add_option("--extra", predict.extra, "Extra checkpoints averaged into the long part");
  predict_cmd->add_option("--input", predict.input, "Dataset file")->required();
  predict_cmd->add_option("--stride", predict.stride, "Window stride (default window.eval_stride)");
  predict_cmd->add_option("--short-frames", predict.short_frames,
                          "Frames taken from the short-term model (default fusion.short_frames)");

  CommonArgs eval_args;
  std::string pred_path, gt_path;
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against ground truth");
  add_common(eval_cmd, eval_args, true);
  eval_cmd->add_option("--pred", pred_path, "Prediction file")->required();
  eval_cmd->add_option("--gt", gt_path, "Ground-truth dataset")->required();

  CommonArgs sweep_args;
  std::string scales, blocks, channels;
  std::size_t jobs = 0;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train and score a scale x blocks x channels grid");
  add_common(sweep_cmd, sweep_args, false);
  sweep_cmd->add_option("--scales", scales, "Comma-separated coordinate scales");
  sweep_cmd->add_option("--blocks", blocks, "Comma-separated block counts");
  sweep_cmd->add_option("--channels", channels, "Comma-separated hidden channel counts");
  sweep_cmd->add_option("--jobs", jobs, "Members trained concurrently");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    if (*synth_cmd) return cmd_synth(synth, out);
    if (*train_cmd) return cmd_train(train_args, short_term, init, out);
    if (*predict_cmd) return cmd_predict(predict_args, predict, out);
    if (*eval_cmd) return cmd_eval(eval_args, pred_path, gt_path, out);
    if (*sweep_cmd) return cmd_sweep(sweep_args, scales, blocks, channels, jobs, out, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace motionfc
