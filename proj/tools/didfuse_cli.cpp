#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>

#include "didfuse/didfuse.hpp"

using namespace didfuse;

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct TrainArgs {
  std::string data, out, split, config, log;
  std::optional<int> epochs, batch, crop;
  std::optional<std::uint64_t> seed;
};

struct DecomposeArgs {
  std::string ckpt, image, prefix;
};

struct FuseArgs {
  std::string ckpt, ir, vis, out, strategy = "sum", classical;
  double lambda = 5.0;
  int radius = 15;
};

struct EvalArgs {
  std::string ckpt, fused, data, split, strategy = "all", report, per_image;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path + " for writing");
  f << text;
  if (!f) throw DataError("failed writing " + path);
}

int run_train(const TrainArgs& a) {
  TrainConfig c = a.config.empty() ? TrainConfig{} : load_config(a.config);
  if (a.epochs) c.epochs = *a.epochs;
  if (a.batch) c.batch_size = *a.batch;
  if (a.seed) c.seed = *a.seed;
  if (a.crop) c.crop_height = c.crop_width = *a.crop;
  c.validate();
  const auto ds = PairedDataset::scan(a.data, a.split);
  for (const auto& name : ds.unmatched) std::cerr << "warning: unmatched file " << name << '\n';
  if (ds.empty()) throw DataError(a.data + ": no image pairs found");
  const auto set = load_training_set<float>(ds, c);
  std::ofstream log;
  if (!a.log.empty()) {
    log.open(a.log);
    if (!log) throw DataError("cannot open " + a.log + " for writing");
  }
  const auto result = train<float>(set, c, [&](const EpochRecord& r) {
    write_epoch_record(std::cerr, r);
    if (log) write_epoch_record(log, r);
  });
  save_checkpoint(result.params, c, a.out);
  std::cout << "trained " << set.size() << " pairs for " << c.epochs << " epochs, wrote " << a.out << '\n';
  return kOk;
}

// Channel 0 stretched to the full 8-bit range.
GrayImage visualize(const Tensor4<float>& t) {
  auto p = tensor_plane(t, 0, 0, 1.0);
  const auto [lo, hi] = std::minmax_element(p.data.begin(), p.data.end());
  const double span = *hi - *lo;
  const double base = *lo;
  for (double& v : p.data) v = span > 0 ? 255.0 * (v - base) / span : 0.0;
  return to_gray(p);
}

int run_decompose(const DecomposeArgs& a) {
  const auto ck = load_checkpoint(a.ckpt);
  const auto img = preprocess<float>(load_image(a.image), Mode::Eval);
  const auto maps = decompose(img, ck.params, Mode::Eval);
  save_image(visualize(maps.background), a.prefix + "_background.pgm");
  save_image(visualize(maps.detail), a.prefix + "_detail.pgm");
  std::cout << "wrote " << a.prefix << "_background.pgm and " << a.prefix << "_detail.pgm\n";
  return kOk;
}

int run_fuse(const FuseArgs& a) {
  const GrayImage ir = load_image(a.ir);
  const GrayImage vis = load_image(a.vis);
  if (ir.height != vis.height || ir.width != vis.width) {
    throw DataError("infrared " + a.ir + " is " + size_string(ir.height, ir.width) + " but visible " + a.vis +
                    " is " + size_string(vis.height, vis.width));
  }
  GrayImage fused;
  if (!a.classical.empty()) {
    ClassicalMethod method = Optimize{a.lambda};
    if (a.classical == "box") method = Box{a.radius};
    auto scaled = [](const GrayImage& g) {
      auto p = to_plane<float>(g);
      for (float& v : p.data) v /= 255.0f;
      return p;
    };
    auto out = classical_fuse(scaled(ir), scaled(vis), method);
    Plane<double> p(out.height, out.width);
    for (std::size_t i = 0; i < out.size(); ++i) p.data[i] = 255.0 * out.data[i];
    fused = to_gray(p);
  } else {
    if (a.ckpt.empty()) throw ConfigError("fuse: --ckpt is required unless --classical is given");
    const auto strategy = parse_strategy(a.strategy);
    const auto ck = load_checkpoint(a.ckpt);
    fused = tensor_to_gray(
        fuse_images(preprocess<float>(ir, Mode::Eval), preprocess<float>(vis, Mode::Eval), ck.params, strategy));
  }
  save_image(fused, a.out);
  std::cout << "wrote " << a.out << " (" << size_string(fused.height, fused.width) << ")\n";
  return kOk;
}

int run_eval(const EvalArgs& a) {
  if (a.ckpt.empty() == a.fused.empty()) throw ConfigError("eval: give exactly one of --ckpt or --fused");
  const auto ds = PairedDataset::scan(a.data, a.split);
  if (ds.empty()) throw DataError(a.data + ": no image pairs found");
  std::vector<DirectoryScore> scores;
  std::optional<Checkpoint> ck;
  if (!a.fused.empty()) {
    scores.push_back(score_directory(ds, "fused", directory_source(a.fused), &std::cerr));
  } else {
    ck = load_checkpoint(a.ckpt);
    std::vector<std::string> names = a.strategy == "all" ? std::vector<std::string>{"sum", "avg", "l1"}
                                                         : std::vector<std::string>{a.strategy};
    for (const auto& n : names) {
      scores.push_back(score_directory(ds, n, model_source(ck->params, parse_strategy(n)), &std::cerr));
    }
  }
  for (const auto& s : scores) {
    if (s.per_image.empty()) throw DataError("eval: no pair of " + a.data + " could be scored");
  }
  std::ostringstream table;
  write_summary_table(table, scores);
  if (a.report.empty()) {
    std::cout << table.str();
  } else {
    write_text(a.report, table.str());
    std::cout << "wrote " << a.report << '\n';
  }
  if (!a.per_image.empty()) {
    std::ostringstream rows;
    write_per_image(rows, scores);
    write_text(a.per_image, rows.str());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Infrared/visible image fusion by deep image decomposition"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  train_cmd->add_option("--data", ta.data, "Directory with ir/ and vis/")->required();
  train_cmd->add_option("--out", ta.out, "Checkpoint to write")->required();
  train_cmd->add_option("--split", ta.split, "Subdirectory of --data to use when present");
  train_cmd->add_option("--epochs", ta.epochs);
  train_cmd->add_option("--batch", ta.batch);
  train_cmd->add_option("--seed", ta.seed);
  train_cmd->add_option("--crop", ta.crop, "Square training crop side");
  train_cmd->add_option("--config", ta.config, "key = value file; flags override it");
  train_cmd->add_option("--log", ta.log, "Per-epoch loss log");

  DecomposeArgs da;
  auto* decompose_cmd = app.add_subcommand("decompose", "Write background/detail channel-0 images");
  decompose_cmd->add_option("--ckpt", da.ckpt)->required();
  decompose_cmd->add_option("--image", da.image)->required();
  decompose_cmd->add_option("--out-prefix", da.prefix)->required();

  FuseArgs fa;
  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse an infrared/visible pair");
  fuse_cmd->add_option("--ckpt", fa.ckpt);
  fuse_cmd->add_option("--ir", fa.ir)->required();
  fuse_cmd->add_option("--vis", fa.vis)->required();
  fuse_cmd->add_option("--out", fa.out)->required();
  fuse_cmd->add_option("--strategy", fa.strategy)->check(CLI::IsMember({"sum", "avg", "l1"}));
  auto* classical = fuse_cmd->add_option("--classical", fa.classical, "Two-scale baseline instead of the network")
                        ->check(CLI::IsMember({"opt", "box"}));
  fuse_cmd->add_option("--lambda", fa.lambda, "Smoothing weight for --classical opt")->needs(classical);
  fuse_cmd->add_option("--radius", fa.radius, "Box radius for --classical box")->needs(classical);

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Score fused images with EN, MI, SD, SF, VIF, AG");
  eval_cmd->add_option("--ckpt", ea.ckpt);
  eval_cmd->add_option("--fused", ea.fused, "Directory of already fused images named like the pairs");
  eval_cmd->add_option("--data", ea.data)->required();
  eval_cmd->add_option("--split", ea.split);
  eval_cmd->add_option("--strategy", ea.strategy)->check(CLI::IsMember({"sum", "avg", "l1", "all"}));
  eval_cmd->add_option("--report", ea.report, "Summary table (stdout if omitted)");
  eval_cmd->add_option("--per-image", ea.per_image);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (*train_cmd) return run_train(ta);
    if (*decompose_cmd) return run_decompose(da);
    if (*fuse_cmd) return run_fuse(fa);
    return run_eval(ea);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
}
