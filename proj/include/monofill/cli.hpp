#pragma once

// Command implementations behind the `monofill` executable. Kept in the
// library so tests can drive whole commands in-process.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "monofill/colorizer.hpp"
#include "monofill/metrics.hpp"

namespace monofill::cli {

enum ExitCode : int { kOk = 0, kFailed = 1, kBadArguments = 2, kIoFailure = 3, kNumericFailure = 4 };

enum class Method { Progressive, Base, Levin, DiffusionOnly };

/// Accepts progressive (alias full), base, levin, diffusion-only; the error lists them.
Method parse_method(const std::string& name);
std::string to_string(Method m);
std::string valid_methods();

struct ScheduleOverrides {
  std::optional<int> height;
  std::vector<std::size_t> iterations;  // empty: defaults for the height
  std::vector<double> learning_rates;
};

ColorizeConfig make_colorize_config(const ScheduleOverrides& overrides, std::uint64_t seed);

/// Runs one colorization method. `trace` receives loss traces for the
/// network methods and stays empty for the classical ones.
RgbImage run_method(Method m, const GrayImage& gray, const RgbImage& known_color, const Mask& mask,
                    const ColorizeConfig& cfg, ColorizeResult* trace = nullptr);

/// All parameters of one run; every artefact is a function of these alone.
struct PipelineConfig {
  std::uint64_t seed = 0;
  Method method = Method::Progressive;
  ScheduleOverrides schedule;
  bool reattach_luminance = false;
  bool verbose = false;

  // inpaint / colorize
  std::string input;
  std::string mask;
  std::string mono;  // inpaint: externally completed monochrome; colorize: the gray input
  bool force_mono = false;
  std::string hints;
  std::string output;
  std::string trace;  // default: <output stem>_loss.csv
  std::string mono_output;
  bool composite = false;

  // maskgen
  std::string mask_type = "freeform";
  Index height = 256;
  Index width = 256;
  std::string like;
  std::optional<double> ratio;
  double ratio_tolerance = 0.01;
  std::vector<Index> rect;  // top,left,height,width
  std::string strokes;      // "min:max"

  // eval / ablate-ratio
  std::string dataset;
  std::vector<std::string> methods = {"full", "base", "levin"};
  int seeds = 1;
  int jobs = 1;
  std::string output_dir;
  std::vector<double> ratios = {0.225, 0.489, 0.734};

  // gradcheck
  double tolerance = 1e-4;
  bool corrupt_gradient = false;
};

void cmd_inpaint(const PipelineConfig& cfg, std::ostream& out);
void cmd_colorize(const PipelineConfig& cfg, std::ostream& out);
void cmd_maskgen(const PipelineConfig& cfg, std::ostream& out);
MetricReport cmd_eval(const PipelineConfig& cfg, std::ostream& out);
void cmd_ablate_ratio(const PipelineConfig& cfg, std::ostream& out);
/// Returns true when every case passes.
bool cmd_gradcheck(const PipelineConfig& cfg, std::ostream& out);

/// Parses argv, dispatches, and maps exceptions to exit codes:
/// 2 bad arguments, 3 I/O failure, 4 numeric failure, 1 failed gradient check.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Reads MONOFILL_JOBS; 1 when unset or malformed.
int default_jobs();

}  // namespace monofill::cli
