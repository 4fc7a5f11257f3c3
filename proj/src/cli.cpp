#include "histo/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "histo/aggregate.hpp"
#include "histo/augment.hpp"
#include "histo/dataset.hpp"
#include "histo/error.hpp"
#include "histo/image_io.hpp"
#include "histo/metrics.hpp"
#include "histo/nn/tensor_store.hpp"
#include "histo/pipeline.hpp"
#include "histo/rng.hpp"
#include "histo/scaling.hpp"
#include "histo/service.hpp"
#include "histo/tiler.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace histo::cli {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  bool json_out = false;
  bool strict_repro = false;
};

struct Context {
  Globals g;
  std::ostream& out;
  std::ostream& err;

  std::uint64_t seed(const char* command) const {
    if (g.seed) return *g.seed;
    if (g.strict_repro) {
      throw UsageError(std::string(command) + " needs an explicit --seed under --strict-repro");
    }
    std::random_device rd;
    const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    err << "seed: " << s << "\n";
    return s;
  }

  json config_json() const {
    if (g.config.empty()) return json::object();
    std::ifstream in(g.config);
    if (!in) throw Error(ErrorCode::IoError, "cannot open config " + g.config);
    try {
      return json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, "config " + g.config + ": " + e.what());
    }
  }

  void emit(const json& j, const std::string& text) const {
    if (g.json_out) {
      out << j.dump(2) << "\n";
    } else {
      out << text;
    }
  }
};

std::vector<fs::path> png_inputs(const fs::path& input, bool recursive = false) {
  if (fs::is_regular_file(input)) return {input};
  if (!fs::is_directory(input)) throw Error(ErrorCode::IoError, "no such input " + input.string());
  std::vector<fs::path> files;
  auto consider = [&](const fs::directory_entry& e) {
    if (!e.is_regular_file()) return;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") files.push_back(e.path());
  };
  if (recursive) {
    for (const auto& e : fs::recursive_directory_iterator(input)) consider(e);
  } else {
    for (const auto& e : fs::directory_iterator(input)) consider(e);
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::EmptyInput, "no PNG files under " + input.string());
  return files;
}

void print_warnings(const Context& ctx, const Manifest& m) {
  for (const auto& w : m.warnings) ctx.err << "warning: " << w << "\n";
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

json tally_json(const VoteTally& t) {
  json j = json::object();
  for (ClassLabel c : kAllLabels) j[std::string(label_name(c))] = t.counts[index_of(c)];
  return j;
}

// ---------------------------------------------------------------------------

struct TileArgs {
  std::string input, out;
  int window = 512;
  double overlap = 0.5;
  bool include_tail = false;
};

int run_tile(const Context& ctx, const TileArgs& a) {
  const TileSpec spec{a.window, a.overlap, a.include_tail};
  spec.stride();
  json images = json::array();
  std::string text;
  std::size_t total = 0;
  for (const auto& file : png_inputs(a.input)) {
    const Image image = read_png(file);
    const TilingResult tiling = extract_patches(image, spec);
    const std::string stem = file.stem().string();
    write_patches(a.out, stem, tiling);
    total += tiling.patches.size();
    images.push_back({{"input", file.string()},
                      {"stem", stem},
                      {"cols", tiling.grid.cols},
                      {"rows", tiling.grid.rows},
                      {"patches", tiling.patches.size()}});
    text += file.filename().string() + ": " + std::to_string(tiling.grid.cols) + "x" +
            std::to_string(tiling.grid.rows) + " grid, " + std::to_string(tiling.patches.size()) +
            " patches\n";
  }
  ctx.emit({{"window", a.window}, {"overlap", a.overlap}, {"stride", spec.stride()},
            {"images", images}, {"patches", total}},
           text + "total: " + std::to_string(total) + " patches\n");
  return kExitOk;
}

struct AugmentArgs {
  std::string input, out;
  int count = 1;
};

int run_augment(const Context& ctx, const AugmentArgs& a) {
  if (a.count < 1) throw UsageError("--count must be >= 1");
  AugmentParams params;
  const json cfg = ctx.config_json();
  if (!cfg.empty()) params = augment_params_from_json(cfg.dump());
  params.validate();
  const std::uint64_t seed = ctx.seed("augment");
  Rng seeds(seed);
  fs::create_directories(a.out);
  json written = json::array();
  for (const auto& file : png_inputs(a.input)) {
    const Image image = read_png(file);
    for (int k = 0; k < a.count; ++k) {
      const fs::path dst = fs::path(a.out) / (file.stem().string() + "_aug" + std::to_string(k) + ".png");
      write_png(dst, random_augment(image, params, seeds.next_u64()));
      written.push_back(dst.string());
    }
  }
  ctx.emit({{"seed", seed}, {"params", json::parse(augment_params_to_json(params))},
            {"outputs", written}},
           "wrote " + std::to_string(written.size()) + " augmented images to " + a.out + "\n");
  return kExitOk;
}

std::string counts_text(const Manifest& m) {
  const auto c = m.counts();
  std::string s;
  for (ClassLabel l : kAllLabels) {
    s += std::string(label_name(l)) + "=" + std::to_string(c[index_of(l)]) + " ";
  }
  return s + "total=" + std::to_string(m.size());
}

struct SplitArgs {
  std::string input, out;
  std::vector<double> ratios{0.7, 0.2, 0.1};
};

int run_split(const Context& ctx, const SplitArgs& a) {
  if (a.ratios.size() != 3) throw UsageError("--ratios takes three values a,b,c");
  const SplitRatios ratios{a.ratios[0], a.ratios[1], a.ratios[2]};
  ratios.validate();
  const std::uint64_t seed = ctx.seed("split");
  const Manifest m = load_manifest(a.input);
  print_warnings(ctx, m);
  const SplitResult r = split(m, ratios, seed);
  write_split(a.out, r, ratios, seed);
  ctx.emit({{"seed", seed},
            {"train", r.train.size()},
            {"valid", r.valid.size()},
            {"test", r.test.size()}},
           "train: " + counts_text(r.train) + "\nvalid: " + counts_text(r.valid) +
               "\ntest:  " + counts_text(r.test) + "\n");
  return kExitOk;
}

struct SynthArgs {
  std::string out;
  int per_class = 50;
  int size = 128;
  int noise = 12;
};

int run_synth(const Context& ctx, const SynthArgs& a) {
  SyntheticConfig cfg;
  cfg.images_per_class = a.per_class;
  cfg.image_size = a.size;
  cfg.noise = a.noise;
  cfg.seed = ctx.seed("synth");
  const Manifest m = generate_synthetic(cfg, a.out);
  ctx.emit({{"seed", cfg.seed}, {"images", m.size()}, {"manifest", (fs::path(a.out) / "manifest.csv").string()}},
           "wrote " + std::to_string(m.size()) + " images to " + a.out + "\n");
  return kExitOk;
}

struct TrainArgs {
  std::string input, valid, out;
  std::string model = "compact";
  int window = 512;
  double overlap = 0.5;
  int phi = 0;
  int width = 8;
  int resolution = 0;
  int epochs = 3;
  double lr = 0.02;
  int batch_size = 16;
  int augment_copies = 0;
  std::optional<double> alpha, beta, gamma;
};

int run_train(const Context& ctx, const TrainArgs& a) {
  PatchTrainingConfig cfg;
  cfg.tile = TileSpec{a.window, a.overlap, false};
  cfg.tile.stride();
  cfg.trainer.epochs = a.epochs;
  cfg.trainer.lr0 = a.lr;
  cfg.trainer.batch_size = a.batch_size;
  const json file = ctx.config_json();
  cfg.trainer.lr0 = file.value("lr0", cfg.trainer.lr0);
  cfg.trainer.momentum = file.value("momentum", cfg.trainer.momentum);
  cfg.trainer.step_size = file.value("step_size", cfg.trainer.step_size);
  cfg.trainer.gamma = file.value("gamma", cfg.trainer.gamma);
  cfg.trainer.epochs = file.value("epochs", cfg.trainer.epochs);
  cfg.trainer.batch_size = file.value("batch_size", cfg.trainer.batch_size);
  cfg.trainer.validate();
  if (file.contains("augment")) cfg.augment.params = augment_params_from_json(file["augment"].dump());
  cfg.augment.copies = a.augment_copies;

  const std::uint64_t seed = ctx.seed("train");
  Rng seeds(seed);
  const std::uint64_t init_seed = seeds.next_u64();
  cfg.trainer.shuffle_seed = seeds.next_u64();
  cfg.batch_seed = seeds.next_u64();
  cfg.augment.seed = seeds.next_u64();

  nn::Model model;
  if (a.model == "compact") {
    model = nn::build_compact_model(a.resolution > 0 ? a.resolution : a.window, a.width, kNumClasses,
                                    init_seed);
  } else if (a.model == "efficientnet") {
    ScalingCoefficients c;
    c.phi = a.phi;
    if (a.alpha) c.alpha = *a.alpha;
    if (a.beta) c.beta = *a.beta;
    if (a.gamma) c.gamma = *a.gamma;
    ArchSpec spec = efficientnet_variant(a.phi, c);
    if (a.resolution > 0) spec.input_resolution = a.resolution;
    model = nn::build_model(spec, kNumClasses, init_seed);
  } else {
    throw UsageError("--model must be compact or efficientnet");
  }

  const Manifest train = load_manifest(a.input);
  print_warnings(ctx, train);
  const Manifest valid = a.valid.empty() ? Manifest{} : load_manifest(a.valid);
  const nn::History history = train_on_patches(model, train, valid, cfg);
  nn::save_weights(model, a.out);

  json epochs = json::array();
  std::string text;
  for (const auto& e : history) {
    epochs.push_back({{"epoch", e.epoch},
                      {"lr", e.lr},
                      {"train_loss", e.train_loss},
                      {"train_accuracy", e.train_accuracy},
                      {"valid_loss", e.valid_loss},
                      {"valid_accuracy", e.valid_accuracy}});
    text += "epoch " + std::to_string(e.epoch) + "  lr " + fixed(e.lr, 5) + "  loss " +
            fixed(e.train_loss, 4) + "  acc " + fixed(e.train_accuracy, 4);
    if (!valid.entries.empty()) {
      text += "  val_loss " + fixed(e.valid_loss, 4) + "  val_acc " + fixed(e.valid_accuracy, 4);
    }
    text += "\n";
  }
  ctx.emit({{"seed", seed},
            {"weights", a.out},
            {"parameters", model.parameter_count()},
            {"history", epochs}},
           text + "weights: " + a.out + "\n");
  return kExitOk;
}

struct PredictArgs {
  std::string input, weights, out;
  int window = 512;
  double overlap = 0.5;
};

int run_predict(const Context& ctx, const PredictArgs& a) {
  const TileSpec spec{a.window, a.overlap, false};
  spec.stride();
  const nn::Model model = nn::load_model(a.weights);
  std::vector<std::string> paths;
  const fs::path in(a.input);
  if (fs::is_regular_file(in) && in.extension() == ".csv") {
    for (const auto& e : load_manifest(in).entries) paths.push_back(e.path);
  } else {
    for (const auto& p : png_inputs(in, true)) paths.push_back(p.string());
  }
  json rows = json::array();
  std::string text, csv = "path,label\n";
  for (const auto& p : paths) {
    const auto r = classify_image(model, read_png(p), spec);
    const std::string abs = fs::absolute(p).lexically_normal().string();
    const std::string label(label_name(r.label));
    rows.push_back({{"path", abs},
                    {"label", label},
                    {"votes", tally_json(r.tally)},
                    {"grid", {{"rows", r.grid.rows}, {"cols", r.grid.cols}}}});
    csv += abs + "," + label + "\n";
    text += p + "  " + label + "  [";
    for (ClassLabel c : kAllLabels) {
      text += std::string(c == ClassLabel::Normal ? "" : " ") + std::string(label_name(c)) + "=" +
              std::to_string(r.tally.counts[index_of(c)]);
    }
    text += "]\n";
  }
  if (!a.out.empty()) {
    write_file_atomic(a.out, {reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()});
  }
  ctx.emit({{"predictions", rows}}, text);
  return kExitOk;
}

struct EvaluateArgs {
  std::string pred, truth;
};

int run_evaluate(const Context& ctx, const EvaluateArgs& a) {
  const Manifest truth = load_manifest(a.truth);
  const Manifest pred = load_manifest(a.pred);
  auto key = [](const std::string& p) { return fs::absolute(p).lexically_normal().string(); };
  std::map<std::string, ClassLabel> predicted;
  for (const auto& e : pred.entries) predicted.emplace(key(e.path), e.label);
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(pred.size()) + " predictions for " +
                                               std::to_string(truth.size()) + " truth rows");
  }
  std::vector<ClassLabel> y_true, y_pred;
  for (const auto& e : truth.entries) {
    const auto it = predicted.find(key(e.path));
    if (it == predicted.end()) throw Error(ErrorCode::LengthMismatch, "no prediction for " + e.path);
    y_true.push_back(e.label);
    y_pred.push_back(it->second);
  }
  const ConfusionMatrix cm = confusion_matrix(y_true, y_pred);
  if (ctx.g.json_out) {
    ctx.out << json::parse(metrics_report_json(cm)).dump(2) << "\n";
  } else {
    ctx.out << metrics_report_text(cm);
  }
  return kExitOk;
}

struct ScaleArgs {
  int phi = 0;
  std::optional<double> alpha, beta, gamma;
  double tol = 0.1;
};

int run_scale_calc(const Context& ctx, const ScaleArgs& a) {
  ScalingCoefficients c;
  c.phi = a.phi;
  if (a.alpha) c.alpha = *a.alpha;
  if (a.beta) c.beta = *a.beta;
  if (a.gamma) c.gamma = *a.gamma;
  c.validate();
  const Multipliers m = compound_scale(c);
  const ConstraintCheck check = check_compute_constraint(c, a.tol);
  const ArchSpec spec = generate_architecture(efficientnet_b0_base(), c);
  const LayerInventory inv = count_layers(spec);
  json j = {{"phi", c.phi},
            {"alpha", c.alpha},
            {"beta", c.beta},
            {"gamma", c.gamma},
            {"multipliers", {{"depth", m.depth}, {"width", m.width}, {"resolution", m.resolution}}},
            {"constraint", {{"value", check.value}, {"tolerance", a.tol}, {"pass", check.pass}}},
            {"architecture", spec},
            {"layers", inv.total()}};
  std::ostringstream t;
  t << "phi " << c.phi << "  alpha " << c.alpha << "  beta " << c.beta << "  gamma " << c.gamma
    << "\n"
    << "depth x" << fixed(m.depth, 6) << "  width x" << fixed(m.width, 6) << "  resolution x"
    << fixed(m.resolution, 6) << "\n"
    << "alpha*beta^2*gamma^2 = " << fixed(check.value, 6) << " (" << (check.pass ? "pass" : "fail")
    << " at tol " << a.tol << ")\n\n"
    << format_block_table(spec);
  ctx.emit(j, t.str());
  return kExitOk;
}

struct ServeArgs {
  std::string weights, host, store;
  int port = -1;
};

service::HttpServer* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

int run_serve(const Context& ctx, const ServeArgs& a) {
  service::ServiceConfig cfg = service::ServiceConfig::load(ctx.g.config);
  if (!a.weights.empty()) cfg.model_path = a.weights;
  if (!a.host.empty()) cfg.listen_host = a.host;
  if (a.port >= 0) cfg.listen_port = a.port;
  if (!a.store.empty()) cfg.store_dir = a.store;
  service::DiagnosisService svc(cfg);
  if (!svc.model_loaded()) ctx.err << "warning: no model configured; /api/diagnose returns 503\n";
  service::HttpServer server(svc);
  const int port = server.bind(cfg.listen_host, cfg.listen_port);
  ctx.err << "listening on http://" << cfg.listen_host << ":" << port << "\n";
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.listen();
  g_server = nullptr;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Histopathology patch pipeline", "histo"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random stream");
  app.add_option("--config", g.config, "JSON config file for the subcommand");
  app.add_flag("--json", g.json_out, "Machine-readable output");
  app.add_flag("--strict-repro", g.strict_repro, "Refuse to run randomized commands without --seed");

  std::function<int(const Context&)> action;

  TileArgs tile;
  auto* t = app.add_subcommand("tile", "Cut images into overlapping square patches");
  t->add_option("--input", tile.input, "PNG file or directory")->required();
  t->add_option("--out", tile.out, "Output directory")->required();
  t->add_option("--window", tile.window, "Window side in pixels")->capture_default_str();
  t->add_option("--overlap", tile.overlap, "Fractional overlap")->capture_default_str();
  t->add_flag("--include-tail", tile.include_tail, "Add a window flush with the far edges");
  t->callback([&] { action = [&](const Context& c) { return run_tile(c, tile); }; });

  AugmentArgs aug;
  auto* au = app.add_subcommand("augment", "Write seeded random geometric augmentations");
  au->add_option("--input", aug.input, "PNG file or directory")->required();
  au->add_option("--out", aug.out, "Output directory")->required();
  au->add_option("--count", aug.count, "Augmented copies per image")->capture_default_str();
  au->callback([&] { action = [&](const Context& c) { return run_augment(c, aug); }; });

  SplitArgs sp;
  auto* s = app.add_subcommand("split", "Stratified train/valid/test split of a manifest");
  s->add_option("--input", sp.input, "Class-per-directory tree or path,label CSV")->required();
  s->add_option("--out", sp.out, "Output directory")->required();
  s->add_option("--ratios", sp.ratios, "train,valid,test")->delimiter(',')->expected(3);
  s->callback([&] { action = [&](const Context& c) { return run_split(c, sp); }; });

  SynthArgs syn;
  auto* sy = app.add_subcommand("synth", "Generate a synthetic four-class texture dataset");
  sy->add_option("--out", syn.out, "Output directory")->required();
  sy->add_option("--per-class", syn.per_class, "Images per class")->capture_default_str();
  sy->add_option("--size", syn.size, "Image side in pixels")->capture_default_str();
  sy->add_option("--noise", syn.noise, "Per-pixel noise amplitude")->capture_default_str();
  sy->callback([&] { action = [&](const Context& c) { return run_synth(c, syn); }; });

  TrainArgs tr;
  auto* trc = app.add_subcommand("train", "Train a patch classifier and save its weights");
  trc->add_option("--input", tr.input, "Training manifest (directory or CSV)")->required();
  trc->add_option("--valid", tr.valid, "Validation manifest");
  trc->add_option("--out", tr.out, "Weight file to write")->required();
  trc->add_option("--model", tr.model, "compact or efficientnet")->capture_default_str();
  trc->add_option("--window", tr.window, "Patch window")->capture_default_str();
  trc->add_option("--overlap", tr.overlap, "Patch overlap")->capture_default_str();
  trc->add_option("--phi", tr.phi, "EfficientNet scaling exponent")->check(CLI::Range(0, 3));
  trc->add_option("--alpha", tr.alpha, "Depth base");
  trc->add_option("--beta", tr.beta, "Width base");
  trc->add_option("--gamma", tr.gamma, "Resolution base");
  trc->add_option("--width", tr.width, "Compact model channel width")->capture_default_str();
  trc->add_option("--resolution", tr.resolution, "Model input side (default: window)");
  trc->add_option("--epochs", tr.epochs, "Epochs")->capture_default_str();
  trc->add_option("--lr", tr.lr, "Initial learning rate")->capture_default_str();
  trc->add_option("--batch-size", tr.batch_size, "Batch size")->capture_default_str();
  trc->add_option("--augment-copies", tr.augment_copies, "Augmented copies per patch")
      ->capture_default_str();
  trc->callback([&] { action = [&](const Context& c) { return run_train(c, tr); }; });

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Classify images by patch majority vote");
  p->add_option("--input", pr.input, "PNG file, directory, or manifest CSV")->required();
  p->add_option("--weights", pr.weights, "Weight file")->required();
  p->add_option("--out", pr.out, "Write predictions as path,label CSV");
  p->add_option("--window", pr.window, "Patch window")->capture_default_str();
  p->add_option("--overlap", pr.overlap, "Patch overlap")->capture_default_str();
  p->callback([&] { action = [&](const Context& c) { return run_predict(c, pr); }; });

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Confusion matrix and per-class metrics");
  e->add_option("--pred", ev.pred, "Predictions CSV (path,label)")->required();
  e->add_option("--truth", ev.truth, "Ground-truth manifest")->required();
  e->callback([&] { action = [&](const Context& c) { return run_evaluate(c, ev); }; });

  ScaleArgs sc;
  auto* scc = app.add_subcommand("scale-calc", "Compound-scaling multipliers and block table");
  scc->add_option("--phi", sc.phi, "Scaling exponent")->check(CLI::Range(0, 3))->capture_default_str();
  scc->add_option("--alpha", sc.alpha, "Depth base");
  scc->add_option("--beta", sc.beta, "Width base");
  scc->add_option("--gamma", sc.gamma, "Resolution base");
  scc->add_option("--tol", sc.tol, "Constraint tolerance around 2")->capture_default_str();
  scc->callback([&] { action = [&](const Context& c) { return run_scale_calc(c, sc); }; });

  ServeArgs sv;
  auto* se = app.add_subcommand("serve", "Run the diagnosis HTTP service");
  se->add_option("--weights", sv.weights, "Weight file (overrides config)");
  se->add_option("--host", sv.host, "Listen host");
  se->add_option("--port", sv.port, "Listen port (0 picks a free one)");
  se->add_option("--store", sv.store, "Record store directory");
  se->callback([&] { action = [&](const Context& c) { return run_serve(c, sv); }; });

  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--seed" || a == "--config") {
      ++i;
      continue;
    }
    if (a.empty() || a[0] == '-') continue;
    bool known = true;
    try {
      (void)app.get_subcommand_ptr(a);
    } catch (const CLI::OptionNotFound&) {
      known = false;
    }
    if (!known) {
      err << "error: unknown subcommand '" << a << "'\nrun with --help for usage\n";
      return kExitUsage;
    }
    break;
  }

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }

  const Context ctx{g, out, err};
  try {
    return action(ctx);
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitRuntime;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace histo::cli
