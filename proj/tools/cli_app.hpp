// Copyright 2026 The mpsl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Command-line driver: pattern, simulate, reconstruct, merge, analyze and
// metrics subcommands. run() is callable in-process for tests.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mpsl/mpsl.hpp"

namespace mpsl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  int threads = 1;
};

namespace detail {

inline std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

inline void require_dir(const std::string& stage, const std::string& dir) {
  if (!fs::is_directory(dir)) throw StageError(stage, "output directory '" + dir + "' does not exist");
}

/// Runs `f`, turning any non-stage exception into a StageError for `stage`.
template <typename F>
auto staged(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

inline void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
}

/// NaN and infinities are written as null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json metrics_json(const ErrorMetrics& m) {
  return {{"overlap", m.overlap},
          {"rms", number(m.rms)},
          {"mean_abs", number(m.mean_abs)},
          {"outlier_fraction", number(m.outlier_fraction)},
          {"coverage", m.coverage},
          {"truth_coverage", m.truth_coverage},
          {"truth_depth_range", m.truth_depth_range},
          {"rms_relative", m.truth_depth_range > 0 ? number(m.rms / m.truth_depth_range) : json(nullptr)},
          {"compared", m.compared}};
}

inline std::string camera_stem(int c) { return "cam" + std::to_string(c); }
inline std::string pair_stem(int c, int p) { return camera_stem(c) + "_proj" + std::to_string(p); }

inline ExperimentConfig load(const std::string& path, const GlobalOptions& g) {
  auto cfg = staged("config", [&] { return load_config(path); });
  if (g.seed) cfg.noise.seed = *g.seed;
  cfg.render.threads = g.threads;
  cfg.pipeline.threads = g.threads;
  return cfg;
}

inline void apply_sigma(const std::vector<double>& sigma, ExperimentConfig& cfg) {
  if (sigma.empty()) return;
  if (sigma.size() != 3) throw StageError("config", "--sigma needs three values");
  for (std::size_t c = 0; c < 3; ++c) {
    if (!(sigma[c] >= 0.0)) throw StageError("config", "--sigma values must be non-negative");
    cfg.noise.sigma_rgb[c] = sigma[c];
    cfg.pipeline.noise_sigma[c] = sigma[c];
  }
}

}  // namespace detail

inline void cmd_pattern(const GlobalOptions& g, int k, int colors, int stripe_width, int height, std::ostream& out) {
  detail::require_dir("pattern", g.out);
  const auto pattern = detail::staged("pattern", [&] { return generate_pattern(k, colors, stripe_width); });
  const std::string stem = "pattern_k" + std::to_string(k) + "_n" + std::to_string(colors);
  detail::staged("output", [&] {
    std::ofstream txt(detail::join(g.out, stem + ".txt"));
    if (!txt) throw IoError("cannot write pattern text");
    txt << to_text(pattern);
    const auto raster = rasterize_pattern(pattern, pattern.size() * stripe_width, height, stripe_width);
    write_pnm(detail::join(g.out, stem + ".ppm"), quantize(raster).image);
    write_pnm(detail::join(g.out, stem + "_derivative.ppm"), derivative_visualization(raster));
    return 0;
  });
  out << "pattern k=" << k << " colors=" << colors << ": " << pattern.size() << " stripes, "
      << pattern.window_count() << " windows -> " << detail::join(g.out, stem) << ".{txt,ppm}\n";
}

inline void cmd_simulate(const GlobalOptions& g, const std::string& config, const std::vector<double>& sigma,
                         std::ostream& out) {
  detail::require_dir("simulate", g.out);
  auto cfg = detail::load(config, g);
  detail::apply_sigma(sigma, cfg);
  const auto renders = detail::staged("render", [&] { return render(cfg.scene, cfg.rig, cfg.ambient, cfg.render); });
  json summary = {{"seed", cfg.noise.seed},
                  {"sigma_rgb", cfg.noise.sigma_rgb},
                  {"exposure", cfg.exposure},
                  {"cameras", json::array()}};
  for (int c = 0; c < int(renders.size()); ++c) {
    const auto& r = renders[std::size_t(c)];
    RadianceImage exposed = r.radiance;
    for (auto& v : exposed.data()) v = float(v * cfg.exposure);
    const auto q = detail::staged("noise", [&] { return quantize(add_noise(exposed, cfg.noise, std::uint64_t(c))); });
    detail::staged("output", [&] {
      write_pnm(detail::join(g.out, detail::camera_stem(c) + ".ppm"), q.image);
      write_range(detail::join(g.out, detail::camera_stem(c) + "_truth"), r.truth.depth);
      for (int p = 0; p < int(r.truth.stripe_coordinate.size()); ++p) {
        const auto& coord = r.truth.stripe_coordinate[std::size_t(p)];
        FloatImage index(coord.width(), coord.height(), 1, -1.0f);
        for (std::size_t i = 0; i < coord.data().size(); ++i) {
          if (!std::isnan(coord.data()[i])) index.data()[i] = std::floor(coord.data()[i]);
        }
        write_pfm(detail::join(g.out, detail::pair_stem(c, p) + "_truth_coord.pfm"), coord);
        write_pfm(detail::join(g.out, detail::pair_stem(c, p) + "_truth_index.pfm"), index);
      }
      return 0;
    });
    summary["cameras"].push_back({{"camera", c},
                                  {"name", cfg.rig.cameras[std::size_t(c)].name},
                                  {"clipped_fraction", q.clipped_fraction},
                                  {"truth_coverage", r.truth.depth.coverage()}});
    out << "camera " << c << ": " << detail::join(g.out, detail::camera_stem(c) + ".ppm")
        << " clipped " << q.clipped_fraction << '\n';
  }
  detail::staged("output", [&] {
    detail::write_json(detail::join(g.out, "simulate.json"), summary);
    return 0;
  });
}

struct ReconstructOptions {
  std::string config;
  std::string images;  // defaults to the output directory
  std::vector<double> sigma;
  std::optional<bool> global_directions;
  std::optional<std::string> merge;
  std::optional<double> presmooth;
  std::optional<int> normalize_radius;
};

inline void cmd_reconstruct(const GlobalOptions& g, const ReconstructOptions& o, std::ostream& out) {
  detail::require_dir("reconstruct", g.out);
  auto cfg = detail::load(o.config, g);
  detail::apply_sigma(o.sigma, cfg);
  if (o.global_directions) cfg.pipeline.global_directions = *o.global_directions;
  if (o.presmooth) cfg.pipeline.separation.presmooth_sigma = *o.presmooth;
  if (o.normalize_radius) cfg.pipeline.normalize_radius = *o.normalize_radius;
  if (o.merge) cfg.pipeline.merge = detail::staged("config", [&] { return merge_policy_from_string(*o.merge); });
  const std::string images = o.images.empty() ? g.out : o.images;

  std::vector<RangeImage> ranges;
  json pairs = json::array();
  json directions = json::array();
  bool have_truth = true;
  for (int c = 0; c < int(cfg.rig.cameras.size()); ++c) {
    const std::string img_path = detail::join(images, detail::camera_stem(c) + ".ppm");
    const auto image = detail::staged("input", [&] { return to_radiance(read_pnm(img_path)); });
    const auto decoding = detail::staged("decode", [&] { return decode_camera(image, cfg.rig, c, cfg.pipeline); });
    directions.push_back(decoding.directions.global_deg);
    const auto cam_ranges =
        detail::staged("range", [&] { return reconstruct_camera(decoding, cfg.rig, c, g.threads, cfg.pipeline.range_filter); });
    const std::string truth_path = detail::join(images, detail::camera_stem(c) + "_truth.pfm");
    std::optional<RangeImage> truth;
    if (fs::exists(truth_path)) truth = detail::staged("input", [&] { return read_range(truth_path); });
    else have_truth = false;
    for (std::size_t i = 0; i < cam_ranges.size(); ++i) {
      const int p = decoding.decoded[i].projector;
      const std::string stem = detail::pair_stem(c, p);
      detail::staged("output", [&] {
        write_range(detail::join(g.out, "range_" + stem), cam_ranges[i]);
        write_pfm(detail::join(g.out, "decoded_" + stem + ".pfm"), decoding.decoded[i].coordinate);
        return 0;
      });
      json entry = {{"camera", c},
                    {"projector", p},
                    {"order", decoding.decoded[i].order},
                    {"decoded", decoding.decoded[i].decoded_count()},
                    {"range_coverage", cam_ranges[i].coverage()}};
      const std::string coord_path = detail::join(images, stem + "_truth_coord.pfm");
      if (fs::exists(coord_path)) {
        const auto coord = detail::staged("input", [&] { return read_pfm(coord_path); });
        const auto acc = detail::staged("metrics", [&] { return decode_accuracy(decoding.decoded[i], coord); });
        entry["accuracy"] = acc.accuracy;
        entry["decode_coverage"] = acc.coverage;
      }
      if (truth) entry["depth"] = detail::metrics_json(error_metrics(cam_ranges[i], *truth));
      pairs.push_back(entry);
      out << "camera " << c << " projector " << p << ": range coverage " << cam_ranges[i].coverage();
      if (entry.contains("accuracy")) out << ", decode accuracy " << entry["accuracy"].get<double>();
      out << '\n';
    }
    ranges.insert(ranges.end(), cam_ranges.begin(), cam_ranges.end());
  }
  const auto merged = detail::staged("merge", [&] {
    return merge_ranges(ranges, cfg.rig, cfg.pipeline.merge, cfg.pipeline.reference_camera);
  });
  detail::staged("output", [&] {
    write_range(detail::join(g.out, "merged"), merged);
    return 0;
  });
  json report = {{"merge_policy", to_string(cfg.pipeline.merge)},
                 {"reference_camera", cfg.pipeline.reference_camera},
                 {"directions_deg", directions},
                 {"pairs", pairs},
                 {"merged", {{"coverage", merged.coverage()}}}};
  const std::string ref_truth =
      detail::join(images, detail::camera_stem(cfg.pipeline.reference_camera) + "_truth.pfm");
  if (have_truth && fs::exists(ref_truth)) {
    const auto truth = detail::staged("input", [&] { return read_range(ref_truth); });
    const auto m = detail::staged("metrics", [&] { return error_metrics(merged, truth); });
    report["merged"]["depth"] = detail::metrics_json(m);
    out << "merged: coverage " << merged.coverage() << ", rms " << m.rms;
    if (m.truth_depth_range > 0.0) out << " (" << 100.0 * m.rms / m.truth_depth_range << "% of depth range)";
    out << '\n';
  } else {
    out << "merged: coverage " << merged.coverage() << '\n';
  }
  detail::staged("output", [&] {
    detail::write_json(detail::join(g.out, have_truth ? "metrics.json" : "reconstruct.json"), report);
    return 0;
  });
}

inline void cmd_merge(const GlobalOptions& g, const std::vector<std::string>& inputs, const std::string& policy,
                      const std::string& name, std::ostream& out) {
  detail::require_dir("merge", g.out);
  const auto pol = detail::staged("config", [&] { return merge_policy_from_string(policy); });
  std::vector<RangeImage> ranges;
  for (const auto& path : inputs) ranges.push_back(detail::staged("input", [&] { return read_range(path); }));
  const auto merged = detail::staged("merge", [&] {
    if (ranges.empty()) throw std::invalid_argument("no input ranges");
    if (ranges.size() == 1) return ranges.front();
    if (pol == MergePolicy::WindowedTwo) {
      if (ranges.size() != 2) throw std::invalid_argument("windowed_two merging needs exactly two ranges");
      return merge_windowed_two(ranges[0], ranges[1]);
    }
    return merge_median(ranges);
  });
  detail::staged("output", [&] {
    write_range(detail::join(g.out, name), merged);
    return 0;
  });
  out << "merged " << ranges.size() << " ranges (" << policy << "): coverage " << merged.coverage() << '\n';
}

inline void cmd_analyze_coverage(const GlobalOptions& g, std::optional<double> loss, std::ostream& out) {
  detail::require_dir("analyze", g.out);
  const auto fit = detail::staged("analyze", [] { return fit_loss_parameter(kPublishedCoverage); });
  const double l = loss.value_or(fit.loss);
  std::ostringstream csv;
  csv << "projectors,cameras,amount,amount_rounded,published_amount,completeness,published_completeness\n";
  out << "fitted per-triangulation loss " << std::setprecision(6) << fit.loss << " (sum of squares "
      << fit.sum_squares << ")\n";
  out << " P C  amount published  completeness published\n";
  for (const auto& r : kPublishedCoverage) {
    const auto row = coverage_row(r.projectors, r.cameras, l);
    csv << r.projectors << ',' << r.cameras << ',' << row.amount << ',' << row.amount_rounded() << ',' << r.amount
        << ',' << row.completeness << ',' << r.completeness << '\n';
    out << ' ' << r.projectors << ' ' << r.cameras << std::setw(8) << row.amount_rounded() << std::setw(10)
        << r.amount << std::setw(14) << row.completeness_rounded() << std::setw(10) << r.completeness << '\n';
  }
  detail::staged("output", [&] {
    std::ofstream f(detail::join(g.out, "coverage.csv"));
    if (!f) throw IoError("cannot write coverage.csv");
    f << csv.str();
    return 0;
  });
}

inline void cmd_analyze_separability(const GlobalOptions& g, double phi1, double phi2, int samples,
                                     std::ostream& out) {
  detail::require_dir("analyze", g.out);
  const auto curve = detail::staged("analyze", [&] { return separability_curve(phi1, phi2, samples); });
  detail::staged("output", [&] {
    std::ofstream f(detail::join(g.out, "separability.csv"));
    if (!f) throw IoError("cannot write separability.csv");
    f << to_csv(curve);
    return 0;
  });
  out << "argmax of D over phi_alpha: " << separability_argmax(phi1, phi2) << " deg\n";
}

inline void cmd_analyze_chromaticity(const GlobalOptions& g, const std::string& image, const std::string& mask,
                                     std::ostream& out) {
  detail::require_dir("analyze", g.out);
  const auto img = detail::staged("input", [&] { return read_pnm(image); });
  std::optional<Mask> m;
  if (!mask.empty()) m = detail::staged("input", [&] { return read_mask(mask); });
  const auto pts = detail::staged("analyze", [&] { return chromaticity_scatter(img, m ? &*m : nullptr); });
  detail::staged("output", [&] {
    std::ofstream f(detail::join(g.out, "chromaticity.csv"));
    if (!f) throw IoError("cannot write chromaticity.csv");
    f << std::setprecision(8) << "r,g\n";
    for (const auto& p : pts) f << p.x << ',' << p.y << '\n';
    return 0;
  });
  out << pts.size() << " chromaticity points\n";
}

inline void cmd_metrics(const GlobalOptions& g, const std::string& range, const std::string& truth,
                        std::ostream& out) {
  detail::require_dir("metrics", g.out);
  const auto r = detail::staged("input", [&] { return read_range(range); });
  const auto t = detail::staged("input", [&] { return read_range(truth); });
  const auto m = detail::staged("metrics", [&] { return error_metrics(r, t); });
  const json j = detail::metrics_json(m);
  detail::staged("output", [&] {
    detail::write_json(detail::join(g.out, "metrics.json"), j);
    return 0;
  });
  out << j.dump(2) << '\n';
}

/// Parses `argv` and runs one subcommand. Returns the process exit code.
inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Multi-projector color structured-light range imaging"};
  app.require_subcommand(1);
  GlobalOptions g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Noise seed (overrides the config)");
  app.add_option("--out", g.out, "Output directory (must exist)")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  int k = 7, colors = 3, stripe_width = 4, height = 64;
  auto* pat = app.add_subcommand("pattern", "Generate a stripe pattern and its rasters");
  pat->add_option("--k", k, "Window length")->capture_default_str();
  pat->add_option("--colors", colors, "Number of colors")->capture_default_str();
  pat->add_option("--stripe-width", stripe_width, "Stripe width in projector pixels")->capture_default_str();
  pat->add_option("--height", height, "Raster height")->capture_default_str();

  std::string config;
  std::vector<double> sigma;
  auto* sim = app.add_subcommand("simulate", "Render camera images and ground truth");
  sim->add_option("--config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sim->add_option("--sigma", sigma, "Noise sigma per channel (R G B)")->expected(3);

  ReconstructOptions ro;
  bool global_dirs = false, block_dirs = false;
  double presmooth = 0.0;
  int normalize = 0;
  std::string merge_policy;
  auto* rec = app.add_subcommand("reconstruct", "Decode images, triangulate and merge");
  rec->add_option("--config", ro.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  rec->add_option("--images", ro.images, "Directory with camN.ppm (default: --out)");
  rec->add_option("--sigma", ro.sigma, "Noise sigma per channel for thresholds (R G B)")->expected(3);
  auto* gflag = rec->add_flag("--global-directions", global_dirs, "Use nominal rig directions");
  rec->add_flag("--block-directions", block_dirs, "Estimate directions per block")->excludes(gflag);
  auto* ps_opt = rec->add_option("--presmooth", presmooth, "Pre-smoothing sigma before differentiation");
  auto* nr_opt = rec->add_option("--normalize-radius", normalize, "Local color normalization radius, 0 = off");
  auto* mp_opt = rec->add_option("--merge", merge_policy, "median or windowed_two");

  std::vector<std::string> inputs;
  std::string policy = "median", name = "merged";
  auto* mrg = app.add_subcommand("merge", "Merge range images on a common grid");
  mrg->add_option("inputs", inputs, "Range PFM files")->required()->check(CLI::ExistingFile);
  mrg->add_option("--policy", policy, "median or windowed_two")->capture_default_str();
  mrg->add_option("--name", name, "Output stem")->capture_default_str();

  auto* ana = app.add_subcommand("analyze", "Coverage table, separability curve, chromaticity scatter");
  ana->require_subcommand(1);
  double loss = 0.0;
  auto* cov = ana->add_subcommand("coverage", "Projector/camera coverage model");
  auto* loss_opt = cov->add_option("--loss", loss, "Per-triangulation loss (default: fitted)");
  double phi1 = 0.0, phi2 = 70.0;
  int samples = 1800;
  auto* sep = ana->add_subcommand("separability", "Separability curve D over the differentiation angle");
  sep->add_option("--phi1", phi1, "First encoding direction, degrees")->capture_default_str();
  sep->add_option("--phi2", phi2, "Second encoding direction, degrees")->capture_default_str();
  sep->add_option("--samples", samples, "Samples over [0, 180)")->capture_default_str();
  std::string chroma_image, chroma_mask;
  auto* chr = ana->add_subcommand("chromaticity", "Chromaticity scatter of an 8-bit image");
  chr->add_option("--image", chroma_image, "PPM image")->required()->check(CLI::ExistingFile);
  chr->add_option("--mask", chroma_mask, "PGM mask")->check(CLI::ExistingFile);

  std::string range_path, truth_path;
  auto* met = app.add_subcommand("metrics", "Depth error metrics of a range against truth");
  met->add_option("--range", range_path, "Range PFM")->required()->check(CLI::ExistingFile);
  met->add_option("--truth", truth_path, "Truth PFM")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*pat) {
      cmd_pattern(g, k, colors, stripe_width, height, out);
    } else if (*sim) {
      cmd_simulate(g, config, sigma, out);
    } else if (*rec) {
      if (global_dirs) ro.global_directions = true;
      if (block_dirs) ro.global_directions = false;
      if (*ps_opt) ro.presmooth = presmooth;
      if (*nr_opt) ro.normalize_radius = normalize;
      if (*mp_opt) ro.merge = merge_policy;
      cmd_reconstruct(g, ro, out);
    } else if (*mrg) {
      cmd_merge(g, inputs, policy, name, out);
    } else if (*ana) {
      if (*cov) cmd_analyze_coverage(g, *loss_opt ? std::optional<double>(loss) : std::nullopt, out);
      if (*sep) cmd_analyze_separability(g, phi1, phi2, samples, out);
      if (*chr) cmd_analyze_chromaticity(g, chroma_image, chroma_mask, out);
    } else if (*met) {
      cmd_metrics(g, range_path, truth_path, out);
    }
  } catch (const StageError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace mpsl::cli
