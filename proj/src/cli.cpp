#include "monofill/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "monofill/classical.hpp"
#include "monofill/diffnet/grad_check.hpp"
#include "monofill/errors.hpp"
#include "monofill/image_io.hpp"
#include "monofill/maskgen.hpp"
#include "monofill/mono_completer.hpp"
#include "monofill/rng.hpp"

namespace fs = std::filesystem;

namespace monofill::cli {

Method parse_method(const std::string& name) {
  if (name == "progressive" || name == "full") return Method::Progressive;
  if (name == "base") return Method::Base;
  if (name == "levin") return Method::Levin;
  if (name == "diffusion-only") return Method::DiffusionOnly;
  throw InvalidArgument("unknown method '" + name + "' (valid: " + valid_methods() + ")");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Progressive: return "progressive";
    case Method::Base: return "base";
    case Method::Levin: return "levin";
    case Method::DiffusionOnly: return "diffusion-only";
  }
  return "unknown";
}

std::string valid_methods() { return "progressive (or full), base, levin, diffusion-only"; }

int default_jobs() {
  const char* env = std::getenv("MONOFILL_JOBS");
  if (!env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1) return 1;
  return static_cast<int>(std::min<long>(v, 256));
}

ColorizeConfig make_colorize_config(const ScheduleOverrides& o, std::uint64_t seed) {
  ColorizeConfig cfg;
  cfg.seed = seed;
  int height = o.height.value_or(0);
  if (height == 0) {
    if (!o.iterations.empty())
      height = static_cast<int>(o.iterations.size());
    else if (!o.learning_rates.empty())
      height = static_cast<int>(o.learning_rates.size());
    else
      height = cfg.pyramid_height;
  }
  cfg.pyramid_height = height;
  cfg.schedules = default_schedule(height);
  auto check = [&](std::size_t n, const char* what) {
    if (n != 0 && n != static_cast<std::size_t>(height))
      throw InvalidArgument(std::string(what) + " lists " + std::to_string(n) + " values for a pyramid of height " +
                            std::to_string(height));
  };
  check(o.iterations.size(), "--iterations");
  check(o.learning_rates.size(), "--lr");
  for (std::size_t i = 0; i < o.iterations.size(); ++i) cfg.schedules[i].iterations = o.iterations[i];
  for (std::size_t i = 0; i < o.learning_rates.size(); ++i) cfg.schedules[i].learning_rate = o.learning_rates[i];
  validate(cfg);
  return cfg;
}

RgbImage run_method(Method m, const GrayImage& gray, const RgbImage& known_color, const Mask& mask,
                    const ColorizeConfig& cfg, ColorizeResult* trace) {
  switch (m) {
    case Method::Progressive:
    case Method::Base: {
      ColorizeResult r = m == Method::Progressive ? colorize(gray, known_color, mask, cfg)
                                                  : colorize_base(gray, known_color, mask, cfg);
      RgbImage out = r.output;
      if (trace) *trace = std::move(r);
      return out;
    }
    case Method::Levin: {
      RgbImage color = known_color;
      Mask known = mask;
      apply_hints(cfg.hints, color, known);
      RgbImage out = levin_colorize(gray, color, known);
      return cfg.reattach_luminance ? reattach_luminance(out, gray) : out;
    }
    case Method::DiffusionOnly: {
      RgbImage color = known_color;
      Mask known = mask;
      apply_hints(cfg.hints, color, known);
      RgbImage out = diffusion_colorize(color, known);
      return cfg.reattach_luminance ? reattach_luminance(out, gray) : out;
    }
  }
  throw InvalidArgument("unknown method");
}

namespace {

std::string default_trace_path(const std::string& output) {
  fs::path p(output);
  return (p.parent_path() / (p.stem().string() + "_loss.csv")).string();
}

ColorizeConfig config_for(const PipelineConfig& cfg, std::ostream& out) {
  ColorizeConfig c = make_colorize_config(cfg.schedule, cfg.seed);
  c.reattach_luminance = cfg.reattach_luminance;
  if (!cfg.hints.empty()) c.hints = load_hints(cfg.hints);
  if (cfg.verbose)
    c.progress = [&out](int level, std::size_t it, double loss) {
      if (it % 100 == 0) out << "  level " << level << " iteration " << it << " loss " << loss << '\n';
    };
  return c;
}

void write_trace(const ColorizeResult& trace, const std::string& path) {
  write_loss_trace_csv(trace, path);  // header only for classical methods
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir, "cannot create directory: " + ec.message());
}

void report_levels(const ColorizeResult& trace, std::ostream& out) {
  for (std::size_t n = 0; n < trace.loss_traces.size(); ++n) {
    const auto& t = trace.loss_traces[n];
    if (t.empty()) continue;
    out << "  level " << n << ": " << t.size() << " iterations, loss " << t.front() << " -> " << t.back() << '\n';
  }
}

RgbImage composite_known(const RgbImage& generated, const RgbImage& original, const Mask& mask) {
  RgbImage out = generated;
  for (std::size_t c = 0; c < 3; ++c)
    out.channels[c] = (mask.values != 0).select(generated.channels[c], original.channels[c]);
  return out;
}

double known_pixel_psnr(const RgbImage& a, const RgbImage& b, const Mask& mask) {
  Mask known = mask;
  known.values = (mask.values == 0).cast<std::uint8_t>();
  if (known.missing_count() == 0) return kPsnrIdentical;
  return psnr(a, b, known);
}

}  // namespace

void cmd_inpaint(const PipelineConfig& cfg, std::ostream& out) {
  if (cfg.output.empty()) throw InvalidArgument("inpaint needs --out");
  const RgbImage input = load_image(cfg.input);
  const Mask mask = load_mask(cfg.mask);
  require_same_size(input, mask, "input image and mask");
  const std::string trace_path = cfg.trace.empty() ? default_trace_path(cfg.output) : cfg.trace;
  ColorizeConfig ccfg = config_for(cfg, out);

  if (mask.missing_count() == 0 && ccfg.hints.empty()) {
    save_image(input, cfg.output);
    write_trace(ColorizeResult{}, trace_path);
    out << "mask is empty; wrote the input unchanged to " << cfg.output << '\n';
    return;
  }

  const GrayImage gray = to_monochrome(input);
  const MonoCompletion mono =
      cfg.mono.empty() ? diffusion_fill(gray, mask) : load_external_mono(cfg.mono, gray, mask, !cfg.force_mono);
  if (!cfg.mono_output.empty()) save_gray(mono.gray, cfg.mono_output);

  const RgbImage known = hide_masked_color(input, mask);
  ColorizeResult trace;
  RgbImage result = run_method(cfg.method, mono.gray, known, mask, ccfg, &trace);
  if (cfg.composite) result = composite_known(result, input, mask);
  save_image(result, cfg.output);
  write_trace(trace, trace_path);

  out << "method " << to_string(cfg.method) << ", seed " << cfg.seed << ", mask ratio " << mask_ratio(mask) << '\n';
  out << "monochrome: "
      << (mono.provenance == MonoProvenance::ExternalFile ? "external file " + *mono.source_path
                                                          : "diffusion fill (" + std::to_string(mono.iterations) +
                                                                " sweeps)")
      << '\n';
  report_levels(trace, out);
  out << "known-pixel PSNR " << known_pixel_psnr(result, input, mask) << " dB\n";
  out << "wrote " << cfg.output << " and " << trace_path << '\n';
}

void cmd_colorize(const PipelineConfig& cfg, std::ostream& out) {
  if (cfg.output.empty()) throw InvalidArgument("colorize needs --out");
  const GrayImage gray = load_gray(cfg.mono);
  RgbImage known;
  Mask mask;
  if (!cfg.input.empty()) {
    known = load_image(cfg.input);
    require_same_size(gray, known, "gray and colour images");
    mask = cfg.mask.empty() ? make_mask(gray.height(), gray.width()) : load_mask(cfg.mask);
    require_same_size(gray, mask, "gray image and mask");
    known = hide_masked_color(known, mask);
  } else {
    if (!cfg.mask.empty()) throw InvalidArgument("--mask needs --color");
    known = make_rgb(gray.height(), gray.width());
    mask = make_mask(gray.height(), gray.width(), 1);
  }
  ColorizeConfig ccfg = config_for(cfg, out);
  if (mask.missing_count() == mask.values.size() && ccfg.hints.empty())
    throw InvalidArgument("no known colour: give --color (with an optional --mask) or --hints");
  const std::string trace_path = cfg.trace.empty() ? default_trace_path(cfg.output) : cfg.trace;

  ColorizeResult trace;
  const RgbImage result = run_method(cfg.method, gray, known, mask, ccfg, &trace);
  save_image(result, cfg.output);
  write_trace(trace, trace_path);
  out << "method " << to_string(cfg.method) << ", seed " << cfg.seed << ", " << ccfg.hints.size() << " hints\n";
  report_levels(trace, out);
  out << "wrote " << cfg.output << " and " << trace_path << '\n';
}

namespace {

std::pair<int, int> parse_stroke_range(const std::string& text) {
  const auto colon = text.find(':');
  std::size_t used_lo = 0, used_hi = 0;
  try {
    if (colon == std::string::npos) throw std::invalid_argument(text);
    const int lo = std::stoi(text.substr(0, colon), &used_lo);
    const int hi = std::stoi(text.substr(colon + 1), &used_hi);
    if (used_lo != colon || used_hi != text.size() - colon - 1) throw std::invalid_argument(text);
    if (lo < 0 || hi < lo) throw std::invalid_argument(text);
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw InvalidArgument("--strokes expects min:max with 0 <= min <= max, got '" + text + "'");
  }
}

}  // namespace

void cmd_maskgen(const PipelineConfig& cfg, std::ostream& out) {
  if (cfg.output.empty()) throw InvalidArgument("maskgen needs --out");
  Index h = cfg.height, w = cfg.width;
  if (!cfg.like.empty()) {
    const RgbImage ref = load_image(cfg.like);
    h = ref.height();
    w = ref.width();
  }
  if (h < 1 || w < 1) throw InvalidArgument("mask size must be positive");
  const MaskType type = parse_mask_type(cfg.mask_type);
  Mask mask;
  if (type == MaskType::Rect && !cfg.rect.empty()) {
    if (cfg.rect.size() != 4) throw InvalidArgument("--rect takes top,left,height,width");
    if (cfg.ratio) throw InvalidArgument("--rect and --ratio are mutually exclusive");
    mask = rectangle_mask(h, w, cfg.rect[0], cfg.rect[1], cfg.rect[2], cfg.rect[3]);
  } else if (type == MaskType::Rect) {
    if (!cfg.strokes.empty()) throw InvalidArgument("--strokes applies to free-form masks only");
    mask = benchmark_mask(h, w, {type, cfg.ratio.value_or(0.25), cfg.ratio_tolerance}, cfg.seed);
  } else {
    MaskGenConfig mg;
    mg.seed = cfg.seed;
    if (!cfg.strokes.empty()) {
      const auto [lo, hi] = parse_stroke_range(cfg.strokes);
      mg.min_strokes = lo;
      mg.max_strokes = hi;
    }
    mask = free_form_mask(h, w, mg.scaled_to(h, w));
    if (cfg.ratio) mask = scale_mask_to_ratio(mask, *cfg.ratio, cfg.ratio_tolerance);
  }
  save_mask(mask, cfg.output);
  out << "wrote " << h << "x" << w << " " << to_string(type) << " mask to " << cfg.output << " (ratio "
      << mask_ratio(mask) << ")\n";
}

namespace {

std::vector<NamedImage> load_dataset(const std::string& dir) {
  if (!fs::is_directory(dir)) throw InvalidArgument("dataset '" + dir + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") files.push_back(entry.path());
  }
  if (files.empty()) throw InvalidArgument("dataset '" + dir + "' contains no .png images");
  std::sort(files.begin(), files.end());
  std::vector<NamedImage> images;
  for (const auto& f : files) images.push_back({f.stem().string(), load_image(f.string())});
  return images;
}

}  // namespace

MetricReport cmd_eval(const PipelineConfig& cfg, std::ostream& out) {
  if (cfg.methods.empty()) throw InvalidArgument("--methods is empty (valid: " + valid_methods() + ")");
  std::vector<BenchmarkMethod> methods;
  const ColorizeConfig base_cfg = config_for(cfg, out);
  for (const std::string& name : cfg.methods) {
    const Method m = parse_method(name);
    methods.push_back({name, [m, base_cfg](const GrayImage& g, const RgbImage& k, const Mask& mask,
                                            std::uint64_t seed) {
                         ColorizeConfig c = base_cfg;
                         c.seed = seed;
                         c.progress = {};
                         return run_method(m, g, k, mask, c);
                       }});
  }
  if (cfg.seeds < 1) throw InvalidArgument("--seeds must be >= 1");
  const std::vector<NamedImage> images = load_dataset(cfg.dataset);

  BenchmarkOptions opts;
  opts.mask.type = parse_mask_type(cfg.mask_type);
  opts.mask.ratio = cfg.ratio.value_or(0.25);
  opts.mask.tolerance = cfg.ratio_tolerance;
  opts.realizations = cfg.seeds;
  opts.seed = cfg.seed;
  opts.jobs = cfg.jobs;
  const MetricReport report = benchmark_decolorize(images, methods, opts);

  if (!cfg.output_dir.empty()) {
    ensure_dir(cfg.output_dir);
    report.write_csv((fs::path(cfg.output_dir) / "report.csv").string());
    std::ofstream summary(fs::path(cfg.output_dir) / "summary.txt", std::ios::trunc);
    if (!summary) throw IoError(cfg.output_dir + "/summary.txt", "cannot open for writing");
    summary << report.table();
  }
  out << report.table();
  return report;
}

void cmd_ablate_ratio(const PipelineConfig& cfg, std::ostream& out) {
  if (cfg.output_dir.empty()) throw InvalidArgument("ablate-ratio needs --out");
  if (cfg.ratios.empty()) throw InvalidArgument("--ratios is empty");
  for (double r : cfg.ratios)
    if (!(r > 0.0 && r < 1.0)) throw InvalidArgument("ratios must lie in (0,1), got " + std::to_string(r));
  if (cfg.seeds < 1) throw InvalidArgument("--seeds must be >= 1");
  const RgbImage input = load_image(cfg.input);
  const GrayImage gray = to_monochrome(input);
  ensure_dir(cfg.output_dir);
  const ColorizeConfig base_cfg = config_for(cfg, out);

  std::ostringstream csv;
  csv << "ratio,seed,achieved_ratio,psnr_masked,output,status\n" << std::setprecision(10);
  for (int s = 0; s < cfg.seeds; ++s) {
    const std::uint64_t run_seed = derive_seed(cfg.seed, "ablate-ratio", static_cast<std::uint64_t>(s));
    for (double ratio : cfg.ratios) {
      std::ostringstream name;
      name << "ratio_" << ratio;
      if (cfg.seeds > 1) name << "_seed" << s;
      name << ".png";
      csv << ratio << ',' << s << ',';
      Mask mask;
      try {
        mask = benchmark_mask(input.height(), input.width(), {MaskType::FreeForm, ratio, cfg.ratio_tolerance},
                              run_seed);
      } catch (const UnreachableRatio& e) {
        csv << e.achieved() << ",,,unreachable\n";
        out << "ratio " << ratio << " seed " << s << ": unreachable (achieved " << e.achieved() << ")\n";
        continue;
      }
      ColorizeConfig c = base_cfg;
      c.seed = run_seed;
      const GrayImage mono = diffusion_fill(gray, mask).gray;
      try {
        const RgbImage result = run_method(cfg.method, mono, hide_masked_color(input, mask), mask, c);
        const std::string path = (fs::path(cfg.output_dir) / name.str()).string();
        save_image(result, path);
        const double p = psnr(result, input, mask);
        csv << mask_ratio(mask) << ',' << p << ',' << name.str() << ",ok\n";
        out << "ratio " << ratio << " seed " << s << ": achieved " << mask_ratio(mask) << ", masked PSNR " << p
            << " dB -> " << path << '\n';
      } catch (const NumericError& e) {
        csv << mask_ratio(mask) << ",,,\"failed: " << e.what() << "\"\n";
        out << "ratio " << ratio << " seed " << s << ": failed: " << e.what() << '\n';
      }
    }
  }
  const std::string csv_path = (fs::path(cfg.output_dir) / "ratios.csv").string();
  std::ofstream f(csv_path, std::ios::trunc);
  if (!f) throw IoError(csv_path, "cannot open for writing");
  f << csv.str();
  if (!f) throw IoError(csv_path, "write failed");
}

bool cmd_gradcheck(const PipelineConfig& cfg, std::ostream& out) {
  diffnet::BackwardHooks hooks;
  hooks.corrupt_leaky_relu = cfg.corrupt_gradient;
  const auto outcomes = diffnet::run_grad_check_suite(cfg.tolerance, cfg.seed, hooks);
  bool all = true;
  out << std::left << std::setw(16) << "layer" << std::right << std::setw(16) << "max_rel_error" << std::setw(10)
      << "coords" << std::setw(10) << "seconds" << "  result\n";
  for (const auto& o : outcomes) {
    Index coords = 0;
    for (const auto& e : o.report.entries) coords += e.coords_checked;
    out << std::left << std::setw(16) << o.name << std::right << std::setw(16) << std::scientific
        << std::setprecision(3) << o.report.max_rel_error << std::setw(10) << coords << std::setw(10) << std::fixed
        << std::setprecision(2) << o.seconds << "  " << (o.report.passed ? "PASS" : "FAIL") << '\n';
    all = all && o.report.passed;
  }
  out << (all ? "all layers pass" : "gradient check FAILED") << " at tol " << std::scientific << cfg.tolerance
      << std::defaultfloat << '\n';
  return all;
}

// ---------------------------------------------------------------------------

namespace {

void add_common(CLI::App* sub, PipelineConfig& cfg, std::string& config_file) {
  sub->add_option("--config", config_file, "key=value file of long option names; command-line flags win");
  sub->add_option("--seed", cfg.seed, "Run seed; all randomness derives from it")->capture_default_str();
  sub->add_flag("-v,--verbose", cfg.verbose, "Print training progress");
}

// CLI11 reads config files for the top-level app only, so subcommand files
// are applied here. Options already given on the command line are kept.
void apply_config_file(CLI::App& sub, const std::string& path) {
  if (!fs::is_regular_file(path)) throw IoError(path, "cannot read config file");
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_file(path);
  } catch (const CLI::Error& e) {
    throw IoError(path, e.what());
  }
  for (const CLI::ConfigItem& item : items) {
    if (!item.parents.empty() || item.name == "++" || item.name == "--")
      throw InvalidArgument(path + ": sections are not supported ('" + item.fullname() + "')");
    CLI::Option* opt = sub.get_option_no_throw("--" + item.name);
    if (opt == nullptr || item.name == "config")
      throw InvalidArgument(path + ": '" + item.name + "' is not an option of " + sub.get_name());
    if (opt->count() > 0) continue;
    try {
      opt->add_result(item.inputs);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw InvalidArgument(path + ": " + item.name + ": " + e.what());
    }
  }
}

void add_schedule(CLI::App* sub, PipelineConfig& cfg, std::string& method) {
  sub->add_option("--method", method, "progressive|full, base, levin, diffusion-only")->capture_default_str();
  sub->add_option("--height", cfg.schedule.height, "Pyramid height (default 3)");
  sub->add_option("--iterations", cfg.schedule.iterations, "Iterations per level, coarsest first")->delimiter(',');
  sub->add_option("--lr", cfg.schedule.learning_rates, "Learning rate per level, coarsest first")->delimiter(',');
  sub->add_flag("--reattach", cfg.reattach_luminance, "Re-impose the input luminance on the output");
  sub->add_option("--hints", cfg.hints, "Colour hints file ('row col R G B' per line)");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  PipelineConfig cfg;
  std::string config_file;
  cfg.jobs = default_jobs();
  std::string method = "progressive";

  CLI::App app{"Image inpainting: complete the gray image, then colorize the hole", "monofill"};
  app.require_subcommand(1);

  auto* inpaint = app.add_subcommand("inpaint", "Complete the monochrome, then colorize the hole");
  inpaint->add_option("input", cfg.input, "Input RGB image")->required();
  inpaint->add_option("mask", cfg.mask, "Mask image (>= 128 marks missing pixels)")->required();
  inpaint->add_option("-o,--out", cfg.output, "Output image")->required();
  inpaint->add_option("--mono", cfg.mono, "Externally completed monochrome (default: diffusion fill)");
  inpaint->add_flag("--force-mono", cfg.force_mono, "Overwrite known pixels of --mono instead of rejecting it");
  inpaint->add_option("--trace", cfg.trace, "Loss trace CSV (default: <out>_loss.csv)");
  inpaint->add_option("--mono-out", cfg.mono_output, "Also save the completed monochrome");
  inpaint->add_flag("--composite", cfg.composite, "Paste known input pixels over the result");
  add_schedule(inpaint, cfg, method);
  add_common(inpaint, cfg, config_file);

  auto* colorize_cmd = app.add_subcommand("colorize", "Colorize a gray image from known colours and/or hints");
  colorize_cmd->add_option("gray", cfg.mono, "Gray (completed monochrome) image")->required();
  colorize_cmd->add_option("--color", cfg.input, "Image supplying known colours");
  colorize_cmd->add_option("--mask", cfg.mask, "Pixels of --color to ignore");
  colorize_cmd->add_option("-o,--out", cfg.output, "Output image")->required();
  colorize_cmd->add_option("--trace", cfg.trace, "Loss trace CSV (default: <out>_loss.csv)");
  add_schedule(colorize_cmd, cfg, method);
  add_common(colorize_cmd, cfg, config_file);

  auto* maskgen = app.add_subcommand("maskgen", "Generate a free-form or rectangular mask");
  maskgen->add_option("-o,--out", cfg.output, "Output mask image")->required();
  maskgen->add_option("--type", cfg.mask_type, "freeform or rect")->capture_default_str();
  maskgen->add_option("--height", cfg.height, "Mask height")->capture_default_str();
  maskgen->add_option("--width", cfg.width, "Mask width")->capture_default_str();
  maskgen->add_option("--like", cfg.like, "Take the size from this image");
  maskgen->add_option("--ratio", cfg.ratio, "Target missing ratio");
  maskgen->add_option("--ratio-tol", cfg.ratio_tolerance, "Tolerance on the ratio")->capture_default_str();
  maskgen->add_option("--strokes", cfg.strokes, "Stroke count range min:max (free-form)");
  maskgen->add_option("--rect", cfg.rect, "Explicit rectangle top,left,height,width")->delimiter(',');
  add_common(maskgen, cfg, config_file);

  auto* eval = app.add_subcommand("eval", "De-colorization benchmark over a directory of images");
  eval->add_option("--dataset", cfg.dataset, "Directory of ground-truth PNG images")->required();
  eval->add_option("--mask-type", cfg.mask_type, "rect or freeform")->capture_default_str();
  eval->add_option("--methods", cfg.methods, "Methods to compare")->delimiter(',')->capture_default_str();
  eval->add_option("--seeds", cfg.seeds, "Mask realizations per image")->capture_default_str();
  eval->add_option("--ratio", cfg.ratio, "Mask ratio (default 0.25)");
  eval->add_option("--jobs", cfg.jobs, "Images processed concurrently (default $MONOFILL_JOBS or 1)");
  eval->add_option("-o,--out", cfg.output_dir, "Directory for report.csv and summary.txt");
  eval->add_option("--height", cfg.schedule.height, "Pyramid height (default 3)");
  eval->add_option("--iterations", cfg.schedule.iterations, "Iterations per level")->delimiter(',');
  eval->add_option("--lr", cfg.schedule.learning_rates, "Learning rate per level")->delimiter(',');
  add_common(eval, cfg, config_file);

  auto* ablate = app.add_subcommand("ablate-ratio", "Colorize under free-form masks of increasing ratio");
  ablate->add_option("input", cfg.input, "Input RGB image")->required();
  ablate->add_option("--ratios", cfg.ratios, "Mask ratios")->delimiter(',')->capture_default_str();
  ablate->add_option("--seeds", cfg.seeds, "Mask realizations")->capture_default_str();
  ablate->add_option("--ratio-tol", cfg.ratio_tolerance, "Tolerance on each ratio")->capture_default_str();
  ablate->add_option("-o,--out", cfg.output_dir, "Output directory")->required();
  add_schedule(ablate, cfg, method);
  add_common(ablate, cfg, config_file);

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every layer's gradients");
  gradcheck->add_option("--tol", cfg.tolerance, "Maximum relative error")->capture_default_str();
  gradcheck->add_flag("--corrupt-leaky-relu", cfg.corrupt_gradient)->group("");  // negative control
  add_common(gradcheck, cfg, config_file);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kBadArguments;
  }

  try {
    if (!config_file.empty())
      for (CLI::App* sub : app.get_subcommands()) apply_config_file(*sub, config_file);
    cfg.method = parse_method(method);
    if (cfg.jobs < 1) throw InvalidArgument("--jobs must be >= 1");
    if (app.got_subcommand(inpaint)) cmd_inpaint(cfg, out);
    if (app.got_subcommand(colorize_cmd)) cmd_colorize(cfg, out);
    if (app.got_subcommand(maskgen)) cmd_maskgen(cfg, out);
    if (app.got_subcommand(eval)) cmd_eval(cfg, out);
    if (app.got_subcommand(ablate)) cmd_ablate_ratio(cfg, out);
    if (app.got_subcommand(gradcheck) && !cmd_gradcheck(cfg, out)) return kFailed;
  } catch (const InvalidArgument& e) {
    err << "monofill: " << e.what() << '\n';
    return kBadArguments;
  } catch (const IoError& e) {
    err << "monofill: " << e.what() << '\n';
    return kIoFailure;
  } catch (const NumericError& e) {
    err << "monofill: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const std::exception& e) {
    err << "monofill: internal error: " << e.what() << '\n';
    return kFailed;
  }
  return kOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"monofill"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace monofill::cli
