#include "uld/cli.hpp"

#include <filesystem>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "uld/anchors.hpp"
#include "uld/annotations.hpp"
#include "uld/errors.hpp"
#include "uld/eval.hpp"
#include "uld/fusion.hpp"
#include "uld/io.hpp"
#include "uld/preprocess.hpp"
#include "uld/rng.hpp"
#include "uld/synthgen.hpp"
#include "uld/text.hpp"
#include "uld/windowing.hpp"

#ifndef ULD_VERSION
#define ULD_VERSION "0.0.0"
#endif

namespace uld::cli {

namespace fs = std::filesystem;

namespace {

struct WindowArgs {
  std::string volume;
  std::size_t slice = 0;
  std::vector<std::string> windows;
  std::string windows_file;
  std::string out_dir;
};

struct PreprocessArgs {
  std::string volume;
  std::string out_dir;
  std::string spacing = "0.8,0.8,2";
  bool no_crop = false;
  std::string annotations;
};

struct AnchorArgs {
  std::string gt;
  std::uint64_t seed = 0;
  std::size_t generations = 200;
  std::size_t population = 50;
  double mutation = 0.5;
  double crossover = 0.9;
  std::size_t sizes = 5;
  std::size_t ratios = 5;
  std::string out;
};

struct FuseArgs {
  std::size_t h = 8;
  std::size_t w = 8;
  std::uint64_t seed = 0;
  std::string save_params;
};

struct EvalArgs {
  std::string dets;
  std::string gts;
  std::string images;
  std::string strata = "none";
  std::string fp_rates = "0.5,1,2,4";
  double iou = 0.5;
  std::optional<double> fp_denominator;
  std::string split = "all";
  std::string out;
};

struct SynthArgs {
  std::string spec;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

void emit(const std::string& data, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << data;
  } else {
    if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    io::write_file(path, data);
  }
}

int run_window(const WindowArgs& a, std::ostream& out) {
  const auto volume = io::read_volume(a.volume);
  if (a.slice >= volume.slices()) throw Error(ErrorCode::kInvalidArgument, "slice index outside volume");
  windowing::WindowSet windows;
  if (!a.windows_file.empty()) windows = windowing::load_window_set(a.windows_file);
  for (const auto& w : a.windows) windows.push_back(windowing::parse_window(w));
  if (windows.empty()) windows = windowing::default_window_set();

  // Key slice with one neighbour either side, repeating the key slice at the volume ends.
  const std::size_t above = a.slice == 0 ? 0 : a.slice - 1;
  const std::size_t below = std::min(a.slice + 1, volume.slices() - 1);
  const std::vector<Image> context = {volume.slice(above), volume.slice(a.slice), volume.slice(below)};
  const auto stack = windowing::multi_intensity_stack(context, windows);

  fs::create_directories(a.out_dir);
  const auto dir = fs::path(a.out_dir);
  io::write_file(dir / "stack.raw", io::encode_f32_le(stack.data));
  nlohmann::ordered_json header;
  header["dims"] = {stack.views, stack.channels, stack.rows, stack.cols};
  auto wj = nlohmann::ordered_json::array();
  for (const auto& w : windows) wj.push_back({w.level, w.width});
  header["windows"] = wj;
  header["dtype"] = "float32";
  header["raw"] = "stack.raw";
  io::write_file(dir / "stack.json", header.dump(2) + "\n");
  out << "stack " << stack.views << "x" << stack.channels << "x" << stack.rows << "x" << stack.cols << " -> "
      << (dir / "stack.json").string() << "\n";
  return kExitOk;
}

int run_preprocess(const PreprocessArgs& a, std::ostream& out) {
  auto volume = io::read_volume(a.volume);
  const auto sp = text::parse_double_list(a.spacing, ',');
  if (!sp || sp->size() != 3) throw Error(ErrorCode::kInvalidArgument, "--spacing needs x,y,z");
  preprocess::CropRect rect{0, 0, volume.cols(), volume.rows()};
  const auto original_rows = volume.rows();
  const auto original_cols = volume.cols();
  if (!a.no_crop) std::tie(volume, rect) = preprocess::crop_volume(volume);
  const auto resampled = preprocess::resample(volume, Spacing{(*sp)[0], (*sp)[1], (*sp)[2]});

  const auto dir = fs::path(a.out_dir);
  fs::create_directories(dir);
  io::write_volume(resampled, dir / "volume.json");
  nlohmann::ordered_json meta;
  meta["crop_rect"] = {rect.x0, rect.y0, rect.x1, rect.y1};
  meta["dims"] = {resampled.slices(), resampled.rows(), resampled.cols()};
  meta["spacing_mm"] = {resampled.spacing().x, resampled.spacing().y, resampled.spacing().z};

  if (!a.annotations.empty()) {
    const auto records = annotations::load_annotations(a.annotations);
    fs::create_directories(dir / "masks");
    auto masks = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto mask = preprocess::recist_to_mask(records[i].recist, original_rows, original_cols);
      const auto name = std::to_string(i) + "_" + records[i].image_key + ".pgm";
      io::write_pgm(mask, dir / "masks" / name);
      masks.push_back({{"image_key", records[i].image_key}, {"file", "masks/" + name}, {"pixels", mask.count()}});
    }
    meta["masks"] = masks;
  }
  io::write_file(dir / "preprocess.json", meta.dump(2) + "\n");
  out << "volume " << resampled.slices() << "x" << resampled.rows() << "x" << resampled.cols() << " -> "
      << (dir / "volume.json").string() << "\n";
  return kExitOk;
}

int run_anchors(const AnchorArgs& a, std::size_t threads, std::ostream& out) {
  const auto boxes = anchors::load_boxes(a.gt);
  anchors::DeParams p;
  p.seed = a.seed;
  p.generations = a.generations;
  p.population = a.population;
  p.mutation = a.mutation;
  p.crossover = a.crossover;
  p.num_sizes = a.sizes;
  p.num_ratios = a.ratios;
  p.threads = threads;
  const auto result = anchors::optimize_anchors_de(boxes, p);
  emit(anchors::config_to_json(result.config, result.fitness), a.out, out);
  return kExitOk;
}

int run_fuse_demo(const FuseArgs& a, std::ostream& out) {
  if (a.h == 0 || a.w == 0) throw Error(ErrorCode::kInvalidArgument, "--h and --w must be positive");
  const auto cfg = fusion::FusionConfig::standard();
  const auto params = fusion::init_params(cfg, a.seed);
  const auto block = fusion::random_block(cfg, a.h, a.w, a.seed + 1);
  const auto fused = fusion::fuse(block, params.attention, params.conv);
  const auto attn = fusion::mhsa_forward(fusion::concat_views(block), params.attention);
  double max_dev = 0.0;
  for (const auto& weights : attn.weights) {
    const auto n = weights.dim(0);
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < n; ++c) s += weights[r * n + c];
      max_dev = std::max(max_dev, std::abs(s - 1.0));
    }
  }

  const auto small = fusion::FusionConfig::small();
  const auto small_params = fusion::init_params(small, a.seed + 2);
  const auto small_block = fusion::random_block(small, a.h, a.w, a.seed + 3);
  Rng rng(a.seed + 4);
  Tensor upstream({small.output_channels(), a.h, a.w});
  for (auto& v : upstream.data()) v = rng.uniform(-1.0, 1.0);
  const auto report = fusion::gradient_check(small_block, small_params, upstream);

  if (!a.save_params.empty()) fusion::save_params(params, a.save_params);

  nlohmann::ordered_json j;
  j["output_shape"] = fused.shape();
  j["attention_row_sum_max_deviation"] = max_dev;
  j["gradcheck_max_relative_error"] = report.max_relative_error;
  j["gradcheck_entries"] = report.entries_checked;
  out << j.dump(2) << "\n";
  return kExitOk;
}

int run_evaluate(const EvalArgs& a, std::ostream& out) {
  auto records = annotations::load_annotations(a.gts);
  if (a.split != "all") {
    const auto parts = annotations::split_records(records);
    if (a.split == "train") records = parts.train;
    else if (a.split == "val") records = parts.val;
    else records = parts.test;
  }
  const auto gts = eval::ground_truth_from(records);
  const auto dets = eval::load_detections(a.dets);
  eval::EvalOptions opts;
  const auto rates = text::parse_double_list(a.fp_rates, ',');
  if (!rates || rates->empty()) throw Error(ErrorCode::kInvalidArgument, "--fp-rates needs a comma list");
  opts.fp_rates = *rates;
  opts.iou_threshold = a.iou;
  opts.fp_denominator = a.fp_denominator;
  if (!a.images.empty()) opts.extra_image_keys = eval::load_image_list(a.images);

  std::vector<eval::StratumRow> rows;
  if (a.strata == "none") {
    rows.push_back({"all", gts.size(), eval::sensitivity_at_fp(dets, gts, opts)});
  } else {
    rows = eval::stratified_report(dets, gts, a.strata == "organ" ? eval::Strata::kOrgan : eval::Strata::kSize, opts);
  }
  emit(eval::report_csv(rows, opts.fp_rates), a.out, out);
  return kExitOk;
}

int run_synth(const SynthArgs& a, std::ostream& out) {
  auto spec = a.spec.empty() ? synthgen::example_spec(a.seed.value_or(0)) : synthgen::load_spec(a.spec);
  if (a.seed) spec.seed = *a.seed;
  const auto phantom = synthgen::generate_phantom(spec);
  synthgen::write_phantom(phantom, a.out_dir);
  out << "phantom " << phantom.volume.slices() << "x" << phantom.volume.rows() << "x" << phantom.volume.cols()
      << " with " << phantom.records.size() << " lesions -> " << a.out_dir << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Universal lesion detection toolkit: HU windowing, anchor search, attention fusion, FROC scoring"};
  app.name("uld");
  app.set_version_flag("--version", ULD_VERSION);
  app.require_subcommand(1);
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--threads", threads, "Cap on worker threads")->check(CLI::PositiveNumber);

  WindowArgs wa;
  auto* window = app.add_subcommand("window", "Build the multi-intensity stack for one key slice");
  window->add_option("--volume", wa.volume, "Volume header JSON")->required();
  window->add_option("--slice", wa.slice, "Key slice index")->required();
  window->add_option("--window", wa.windows, "Window as level,width (repeatable)");
  window->add_option("--windows-file", wa.windows_file, "File with one level,width per line");
  window->add_option("--out-dir", wa.out_dir, "Output directory")->required();

  PreprocessArgs pa;
  auto* prep = app.add_subcommand("preprocess", "Crop black borders, resample, rasterize RECIST masks");
  prep->add_option("--volume", pa.volume, "Volume header JSON")->required();
  prep->add_option("--out-dir", pa.out_dir, "Output directory")->required();
  prep->add_option("--spacing", pa.spacing, "Target spacing x,y,z in mm")->capture_default_str();
  prep->add_flag("--no-crop", pa.no_crop, "Skip black-border cropping");
  prep->add_option("--annotations", pa.annotations, "Annotation CSV; writes one PGM mask per lesion");

  AnchorArgs aa;
  auto* anc = app.add_subcommand("anchors-optimize", "Differential-evolution anchor search");
  anc->add_option("--gt", aa.gt, "Annotation CSV or x1,y1,x2,y2 lines")->required();
  anc->add_option("--seed", aa.seed)->capture_default_str();
  anc->add_option("--generations", aa.generations)->capture_default_str();
  anc->add_option("--population", aa.population)->capture_default_str();
  anc->add_option("--mutation", aa.mutation, "F")->capture_default_str();
  anc->add_option("--crossover", aa.crossover, "CR")->capture_default_str();
  anc->add_option("--num-sizes", aa.sizes)->capture_default_str();
  anc->add_option("--num-ratios", aa.ratios)->capture_default_str();
  anc->add_option("--out", aa.out, "Output JSON (stdout when omitted)");

  FuseArgs fa;
  auto* fuse = app.add_subcommand("fuse-demo", "Run the fusion block on synthetic features and check gradients");
  fuse->set_help_flag("--help", "Print this help message and exit");
  fuse->add_option("--h", fa.h)->capture_default_str();
  fuse->add_option("--w", fa.w)->capture_default_str();
  fuse->add_option("--seed", fa.seed)->capture_default_str();
  fuse->add_option("--save-params", fa.save_params, "Directory for params.bin + params.json");

  EvalArgs ea;
  auto* ev = app.add_subcommand("evaluate", "Sensitivity at fixed false positives per image");
  ev->add_option("--dets", ea.dets, "Detections JSONL")->required();
  ev->add_option("--gts", ea.gts, "Annotation CSV")->required();
  ev->add_option("--images", ea.images, "Image list counted in the FP denominator");
  ev->add_option("--strata", ea.strata)->check(CLI::IsMember({"none", "organ", "size"}))->capture_default_str();
  ev->add_option("--fp-rates", ea.fp_rates)->capture_default_str();
  ev->add_option("--iou", ea.iou, "TP needs IoU strictly above this")->capture_default_str();
  ev->add_option("--fp-denominator", ea.fp_denominator, "Override the image count used per FP rate");
  ev->add_option("--split", ea.split)->check(CLI::IsMember({"all", "train", "val", "test"}))->capture_default_str();
  ev->add_option("--out", ea.out, "Report CSV (stdout when omitted)");

  SynthArgs sa;
  auto* syn = app.add_subcommand("synth", "Generate a synthetic CT phantom with planted lesions");
  syn->add_option("--spec", sa.spec, "Phantom spec JSON (built-in layout when omitted)");
  syn->add_option("--seed", sa.seed, "Overrides the spec seed");
  syn->add_option("--out-dir", sa.out_dir, "Output directory")->required();

  // Name the offending token instead of CLI11's generic "subcommand required".
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--threads") {
      ++i;
      continue;
    }
    if (args[i].starts_with("-")) continue;
    if (!app.get_subcommand_no_throw(args[i])) {
      err << "error: unknown subcommand '" << args[i] << "'\n\n" << app.help();
      return kExitUsage;
    }
    break;
  }

  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.emplace_back("uld");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << ULD_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (window->parsed()) return run_window(wa, out);
    if (prep->parsed()) return run_preprocess(pa, out);
    if (anc->parsed()) return run_anchors(aa, threads, out);
    if (fuse->parsed()) return run_fuse_demo(fa, out);
    if (ev->parsed()) return run_evaluate(ea, out);
    if (syn->parsed()) return run_synth(sa, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace uld::cli
