// Experiment runner: train / evaluate / infer / kb-match over the semantic
// communication pipeline. Exit codes: 0 ok, 2 config error, 3 data error,
// 4 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "semcom/checkpoint.hpp"
#include "semcom/common.hpp"
#include "semcom/config.hpp"
#include "semcom/data.hpp"
#include "semcom/evaluation.hpp"
#include "semcom/metrics.hpp"
#include "semcom/pipeline.hpp"
#include "semcom/report.hpp"
#include "semcom/task_kb.hpp"
#include "semcom/training.hpp"

namespace fs = std::filesystem;
using namespace semcom;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string checkpoint_path;
  std::string out_dir = ".";
  std::string snr_csv;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int steps = 0;
  bool force = false;
};

std::vector<double> parse_snr_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  if (out.empty()) throw ConfigError("--snr list is empty");
  return out;
}

ExperimentConfig load_config(const CommonArgs& args) {
  ExperimentConfig cfg;
  if (!args.config_path.empty()) cfg = parse_config_file(args.config_path);
  apply_env_overrides(cfg);
  if (args.seed_set) cfg.seed = args.seed;
  if (args.steps > 0) cfg.eval_refine_steps = args.steps;
  if (!args.snr_csv.empty()) cfg.eval_snr_list = parse_snr_list(args.snr_csv);
  return cfg;
}

std::shared_ptr<const Embedder> make_embedder(const ExperimentConfig& cfg) {
  if (cfg.kb_embedder == "hashing") {
    return std::make_shared<HashingEmbedder>(cfg.kb_embed_dim);
  }
  if (cfg.kb_embedder == "http") {
    if (cfg.kb_embedder_url.empty()) {
      throw ConfigError("kb.embedder = http requires kb.embedder_url");
    }
    return std::make_shared<HttpEmbedder>(cfg.kb_embedder_url, cfg.kb_embed_dim);
  }
  throw ConfigError("unknown kb.embedder '" + cfg.kb_embedder + "'");
}

TaskKb make_task_kb(const ExperimentConfig& cfg) {
  auto embedder = make_embedder(cfg);
  if (cfg.kb_memory_file.empty()) return TaskKb(TaskKb::default_memory(), embedder);
  return TaskKb::from_memory_file(cfg.kb_memory_file, embedder);
}

// Loads the checkpoint and rebuilds the pipeline it was trained with. A
// config file, when supplied, must hash-match unless --force is given.
struct LoadedModel {
  ExperimentConfig cfg;
  std::unique_ptr<Pipeline> pipeline;
  TaskId task;
};

LoadedModel load_model(const CommonArgs& args) {
  if (args.checkpoint_path.empty()) throw ConfigError("--checkpoint is required");
  const Checkpoint ckpt = load_checkpoint(args.checkpoint_path);

  LoadedModel out;
  if (!args.config_path.empty()) {
    out.cfg = parse_config_file(args.config_path);
    require_config_match(ckpt, config_hash(out.cfg), args.force);
  } else {
    out.cfg = parse_config_text(ckpt.config_text, args.checkpoint_path + "#config");
  }
  apply_env_overrides(out.cfg);
  if (args.seed_set) out.cfg.seed = args.seed;
  if (args.steps > 0) out.cfg.eval_refine_steps = args.steps;
  if (!args.snr_csv.empty()) out.cfg.eval_snr_list = parse_snr_list(args.snr_csv);

  out.pipeline = std::make_unique<Pipeline>(out.cfg);
  restore_params(ckpt, out.pipeline->params());
  out.task = task_id_from_string(ckpt.task);
  return out;
}

int cmd_train(const CommonArgs& args) {
  ExperimentConfig cfg = load_config(args);
  if (cfg.task.empty()) {
    throw ConfigError("config key 'task' is required for training "
                      "(task = RECONSTRUCT or task = SEGMENT)");
  }
  const TaskId task = task_id_from_string(cfg.task);
  Pipeline pipeline(cfg);
  const BandwidthReport bw = pipeline.encoder().bandwidth();
  std::printf("task %s | %lld parameters | %lld symbols (%.0f bits, %s 20 Kbit bound)\n",
              cfg.task.c_str(), static_cast<long long>(pipeline.params().total_size()),
              static_cast<long long>(bw.symbol_count), bw.bits,
              bw.within_bound ? "within" : "exceeds");

  Dataset train = Dataset::load(pipeline.dataset_spec(Split::train));
  std::printf("training on %zu samples, %d epochs, batch %d\n", train.size(), cfg.epochs,
              cfg.batch_size);

  fs::create_directories(args.out_dir);
  const std::string log_path = (fs::path(args.out_dir) / "training_log.csv").string();
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw DataError("cannot open '" + log_path + "' for writing");
  log << "epoch,loss,lr,wall_time_s\n";

  Trainer trainer(pipeline, task);
  trainer.fit(train, [&](const EpochLog& e) {
    log << e.epoch << ',' << format_number(e.mean_loss) << ',' << format_number(e.lr) << ','
        << format_number(e.wall_time_s) << '\n';
    log.flush();
    std::printf("epoch %3d  loss %.6f  lr %.2e  (%.1fs)\n", e.epoch, e.mean_loss, e.lr,
                e.wall_time_s);
    std::fflush(stdout);
  });

  const std::string ckpt_path = (fs::path(args.out_dir) / "checkpoint.ckpt").string();
  save_checkpoint(ckpt_path, make_checkpoint(pipeline.params(), cfg.task,
                                             pipeline.model_hash(), serialize_config(cfg)));
  std::printf("checkpoint written to %s\ntraining log written to %s\n", ckpt_path.c_str(),
              log_path.c_str());
  return 0;
}

int cmd_evaluate(const CommonArgs& args, int visualize) {
  LoadedModel model = load_model(args);
  Dataset val = Dataset::load(model.pipeline->dataset_spec(Split::val));

  fs::create_directories(args.out_dir);
  EvalOptions opts;
  opts.snr_list = model.cfg.eval_snr_list;
  opts.seed = model.cfg.seed;
  opts.refine_steps = model.cfg.eval_refine_steps;
  opts.threads = model.cfg.threads;
  opts.visualize_count = visualize > 0 ? visualize : model.cfg.visualize_count;
  if (opts.visualize_count > 0) opts.visualize_dir = args.out_dir;

  const auto points = evaluate_sweep(*model.pipeline, val, model.task, opts);

  const bool seg = model.task == TaskId::SEGMENT;
  std::vector<std::string> header =
      seg ? std::vector<std::string>{"snr_db", "mean_iou", "pixel_accuracy", "symbol_count",
                                     "bandwidth_bits", "bound_compliant"}
          : std::vector<std::string>{"snr_db", "psnr_db", "symbol_count", "bandwidth_bits",
                                     "bound_compliant"};
  std::vector<std::vector<std::string>> rows;
  std::vector<double> xs, ys;
  for (const auto& pt : points) {
    xs.push_back(pt.snr_db);
    ys.push_back(seg ? pt.mean_iou : pt.psnr_db);
    std::vector<std::string> row{format_number(pt.snr_db)};
    if (seg) {
      row.push_back(format_number(pt.mean_iou));
      row.push_back(format_number(pt.pixel_accuracy));
    } else {
      row.push_back(format_number(pt.psnr_db));
    }
    row.push_back(std::to_string(pt.symbol_count));
    row.push_back(format_number(pt.bandwidth_bits));
    row.push_back(pt.bound_compliant ? "true" : "false");
    rows.push_back(std::move(row));
  }
  const std::string csv_path = (fs::path(args.out_dir) / "evaluation.csv").string();
  write_csv(csv_path, header, rows);
  const std::string plot_path =
      (fs::path(args.out_dir) / (seg ? "miou_vs_snr.svg" : "psnr_vs_snr.svg")).string();
  write_line_plot_svg(plot_path, seg ? "Mean IoU vs SNR" : "PSNR vs SNR", "SNR (dB)",
                      seg ? "mean IoU" : "PSNR (dB)", xs, ys);

  for (std::size_t i = 0; i < points.size(); ++i) {
    if (seg) {
      std::printf("snr %6.2f dB  mean_iou %.4f  pixel_acc %.4f\n", points[i].snr_db,
                  points[i].mean_iou, points[i].pixel_accuracy);
    } else {
      std::printf("snr %6.2f dB  psnr %s dB\n", points[i].snr_db,
                  format_number(points[i].psnr_db).c_str());
    }
  }
  std::printf("results written to %s and %s\n", csv_path.c_str(), plot_path.c_str());
  return 0;
}

int cmd_infer(const CommonArgs& args, const std::string& image_path,
              const std::string& requirement, double snr_db, bool snr_given,
              bool noiseless) {
  std::string trimmed = requirement;
  while (!trimmed.empty() && (trimmed.back() == ' ' || trimmed.back() == '\t')) trimmed.pop_back();
  while (!trimmed.empty() && (trimmed.front() == ' ' || trimmed.front() == '\t')) trimmed.erase(0, 1);
  if (trimmed.empty()) throw ConfigError("the task requirement text is empty");

  LoadedModel model = load_model(args);
  const TaskKb kb = make_task_kb(model.cfg);
  const auto matches = kb.rank(trimmed);
  const TaskInstruction instruction = matches.front().instruction;
  std::printf("requirement: \"%s\"\n", trimmed.c_str());
  for (const auto& m : matches) {
    std::printf("  %-11s similarity %.4f%s\n", to_string(m.instruction.id).c_str(),
                m.similarity, m.instruction.id == instruction.id ? "  <- selected" : "");
  }
  if (instruction.id != model.task) {
    throw ConfigError("requirement routes to " + to_string(instruction.id) +
                      " but the checkpoint was trained for " + to_string(model.task));
  }

  Tensor image = png_to_image(read_png_rgb(image_path));
  if (image.dim(0) != model.cfg.image_size || image.dim(1) != model.cfg.image_size) {
    image = resize_bilinear(image, model.cfg.image_size, model.cfg.image_size);
  }

  ChannelConfig ch = model.cfg.channel_config(
      snr_given ? snr_db : model.cfg.channel_snr_db, derive_seed(model.cfg.seed, 0x1f));
  if (noiseless) ch.noiseless = true;

  fs::create_directories(args.out_dir);
  if (instruction.id == TaskId::RECONSTRUCT) {
    const Tensor out = model.pipeline->reconstruct(image, ch, model.cfg.eval_refine_steps);
    const std::string path = (fs::path(args.out_dir) / "reconstruction.png").string();
    write_png_rgb(path, image_to_png(out));
    const std::string sbs = (fs::path(args.out_dir) / "side_by_side.png").string();
    write_png_rgb(sbs, hstack(image_to_png(image), image_to_png(out)));
    std::printf("psnr vs input: %s dB\n", format_number(psnr(image, out)).c_str());
    std::printf("wrote %s and %s\n", path.c_str(), sbs.c_str());
  } else {
    const SegmentationMask mask = model.pipeline->segment(image, ch);
    const std::string path = (fs::path(args.out_dir) / "mask.png").string();
    write_png_gray(path, mask_to_png(mask));
    const std::string color = (fs::path(args.out_dir) / "mask_color.png").string();
    write_png_rgb(color, hstack(image_to_png(image), colorize_mask(mask)));
    std::printf("wrote %s and %s\n", path.c_str(), color.c_str());
  }
  return 0;
}

int cmd_kb_match(const CommonArgs& args, const std::string& requirement) {
  ExperimentConfig cfg = load_config(args);
  const TaskKb kb = make_task_kb(cfg);
  const auto matches = kb.rank(requirement);
  for (const auto& m : matches) {
    std::printf("%.6f\t%s\t%s\n", m.similarity, to_string(m.instruction.id).c_str(),
                m.instruction.canonical_text.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semcom: multi-task semantic communication experiments"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string image_path, requirement;
  double snr_db = 0.0;
  bool noiseless = false;
  int visualize = 0;

  auto add_common = [&](CLI::App* sub, bool with_ckpt) {
    sub->add_option("--config", args.config_path, "experiment config file");
    if (with_ckpt) {
      sub->add_option("--checkpoint", args.checkpoint_path, "model checkpoint");
      sub->add_flag("--force", args.force, "load despite a config-hash mismatch");
    }
    sub->add_option("--out-dir", args.out_dir, "output directory");
    auto* seed_opt = sub->add_option("--seed", args.seed, "override the experiment seed");
    seed_opt->each([&](const std::string&) { args.seed_set = true; });
    sub->add_option("--steps", args.steps, "refinement step count K for reconstruction");
  };

  CLI::App* train = app.add_subcommand("train", "train a task pipeline end to end");
  add_common(train, false);

  CLI::App* evaluate = app.add_subcommand("evaluate", "SNR sweep over the validation set");
  add_common(evaluate, true);
  evaluate->add_option("--snr", args.snr_csv, "comma-separated SNR points in dB");
  evaluate->add_option("--visualize", visualize, "write N side-by-side images per SNR point");

  CLI::App* infer = app.add_subcommand("infer", "run one image through the system");
  add_common(infer, true);
  infer->add_option("--image", image_path, "input image (PNG)")->required();
  infer->add_option("--requirement", requirement, "free-text task requirement")->required();
  auto* snr_opt = infer->add_option("--snr", snr_db, "channel SNR in dB");
  infer->add_flag("--noiseless", noiseless, "disable channel noise");

  CLI::App* kb = app.add_subcommand("kb-match", "rank task instructions for a requirement");
  kb->add_option("--config", args.config_path, "experiment config file");
  kb->add_option("requirement", requirement, "free-text task requirement")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) return cmd_train(args);
    if (evaluate->parsed()) return cmd_evaluate(args, visualize);
    if (infer->parsed()) {
      return cmd_infer(args, image_path, requirement, snr_db, snr_opt->count() > 0,
                       noiseless);
    }
    if (kb->parsed()) return cmd_kb_match(args, requirement);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const EmbedderError& e) {
    std::fprintf(stderr, "embedder error: %s\n", e.what());
    return 3;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
