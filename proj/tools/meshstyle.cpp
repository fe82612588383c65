//
// meshstyle: precompute atlas caches, synthesize textures, inspect caches.
//

#include <fmt/format.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "meshstyle/errors.hpp"
#include "meshstyle/image.hpp"
#include "meshstyle/parallel.hpp"
#include "meshstyle/precompute.hpp"
#include "meshstyle/synthesis.hpp"

using namespace meshstyle;
namespace fs = std::filesystem;

static constexpr auto tool_version = "0.1.0";

// -----------------------------------------------------------------------------
// SHARED HELPERS
// -----------------------------------------------------------------------------

static int exit_code(error_kind kind) {
  switch (kind) {
    case error_kind::io: return 2;
    case error_kind::precondition: return 2;
    case error_kind::compatibility: return 3;
    case error_kind::numerical: return 4;
  }
  return 1;
}

static fs::path cache_dir() {
  auto env = std::getenv("MESHSTYLE_CACHE_DIR");
  return env && *env ? fs::path{env} : fs::current_path();
}

static fs::path default_cache_path(const std::array<uint8_t, 32>& hash) {
  return cache_dir() / (hex_string(hash).substr(0, 16) + ".mstx");
}

static std::string sibling(const std::string& out, const std::string& suffix) {
  auto path = fs::path{out};
  return (path.parent_path() / (path.stem().string() + suffix)).string();
}

// Loads `path` when it exists and matches `hash`, otherwise builds and saves.
static precomputed obtain_cache(const mesh_data& mesh, const precompute_options& options,
    const fs::path& path, bool* reused) {
  auto hash = content_hash(mesh, options);
  if (fs::exists(path)) {
    try {
      auto data = load_cache(path.string(), &hash);
      if (reused) *reused = true;
      return data;
    } catch (const error& e) {
      if (e.kind != error_kind::compatibility) throw;
    }
  }
  auto data = precompute(mesh, options);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_cache(path.string(), data);
  if (reused) *reused = false;
  return data;
}

static void print_cache_stats(const precomputed& data) {
  auto total = size_t(data.options.width) * data.options.height;
  fmt::print("used texels: {} of {} ({:.2f}%)\n", data.used_texels(), total,
      100.0 * double(data.used_texels()) / double(total));
  for (size_t l = 0; l < data.levels.size(); l++)
    fmt::print("level {}: {} groups\n", l, data.levels[l].size());
  fmt::print("degenerate taps: {}, corrected taps: {}, boundary terminations: {}\n",
      data.diagnostics.degenerate_taps, data.diagnostics.corrected_taps,
      data.diagnostics.boundary_terminations);
  for (auto& w : data.diagnostics.warnings) fmt::print("warning: {}\n", w);
}

// -----------------------------------------------------------------------------
// PRECOMPUTE
// -----------------------------------------------------------------------------

struct precompute_args {
  std::string mesh, out_cache;
  int         resolution = 256;
  uint32_t    kernel = 3, levels = 5;
  int         threads = 0;
};

static int run_precompute(const precompute_args& args) {
  if (args.threads > 0) set_thread_count(args.threads);
  auto mesh    = load_mesh(args.mesh);
  auto options = precompute_options{};
  options.width = options.height = args.resolution;
  options.kernel      = args.kernel;
  options.pool_levels = args.levels;
  auto path   = args.out_cache.empty()
                    ? default_cache_path(content_hash(mesh, options))
                    : fs::path{args.out_cache};
  auto reused = false;
  auto data   = obtain_cache(mesh, options, path, &reused);
  fmt::print("cache: {} ({})\n", path.string(), reused ? "reused" : "written");
  fmt::print("hash: {}\n", hex_string(data.hash));
  fmt::print("precompute seconds: {:.3f}\n", data.seconds);
  print_cache_stats(data);
  return 0;
}

// -----------------------------------------------------------------------------
// SYNTHESIZE
// -----------------------------------------------------------------------------

struct synthesize_args {
  std::string              mesh, exemplar, weights, cache, out, content;
  std::string              loss_csv, manifest;
  std::vector<std::string> style_layers = default_style_layers;
  std::string              content_layer  = "block4_conv2";
  double                   content_weight = 1000;
  int                      resolution = 256, iters = 500, threads = 0;
  uint32_t                 kernel = 3, levels = 5;
  double                   lr   = 0.1;
  uint64_t                 seed = 0;
  std::vector<int>         milestones = {200, 400};
  std::vector<int>         reference_size;
  bool                     quiet         = false;
  bool                     options_given = false;  // any of resolution, kernel, levels
};

static int run_synthesize(const synthesize_args& args) {
  if (args.threads > 0) set_thread_count(args.threads);
  auto start = std::chrono::steady_clock::now();
  auto mesh  = load_mesh(args.mesh);

  auto data   = precomputed{};
  auto reused = true;
  auto cache  = fs::path{};
  auto options  = precompute_options{};
  options.width = options.height = args.resolution;
  options.kernel      = args.kernel;
  options.pool_levels = args.levels;
  if (!args.cache.empty() && fs::exists(args.cache)) {
    cache = args.cache;
    data  = load_cache(args.cache);
    // without explicit options the cache's own settings are checked
    if (!args.options_given) options = data.options;
    if (content_hash(mesh, options) != data.hash)
      throw compatibility_error("cache hash mismatch: " + args.cache +
                                " was built for a different mesh or options");
  } else {
    cache = args.cache.empty() ? default_cache_path(content_hash(mesh, options))
                               : fs::path{args.cache};
    data  = obtain_cache(mesh, options, cache, &reused);
  }

  auto spec     = load_weights(args.weights);
  auto exemplar = load_png(args.exemplar);
  auto config   = synthesis_config{};
  config.style_layers        = args.style_layers;
  config.content_layer       = args.content_layer;
  config.content_weight      = args.content_weight;
  config.iterations          = args.iters;
  config.schedule.base       = args.lr;
  config.schedule.milestones = args.milestones;
  config.seed                = args.seed;
  if (!args.reference_size.empty()) {
    if (args.reference_size.size() != 2)
      throw precondition_error("--reference-size takes width,height");
    config.reference_width  = args.reference_size[0];
    config.reference_height = args.reference_size[1];
  }
  auto content = std::optional<feature_map<float>>{};
  if (!args.content.empty())
    content = texture_from_image(load_png(args.content), data);

  auto setup  = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  auto result = synthesize(spec, data, exemplar, config, content ? &*content : nullptr,
      [&](const loss_record& r) {
        if (!args.quiet && (r.iteration % 50 == 0 || r.iteration == config.iterations))
          fmt::print("iter {:4d}  style {:.6g}  content {:.6g}  total {:.6g}\n",
              r.iteration, r.style, r.content, r.total);
      });

  auto loss_csv = args.loss_csv.empty() ? sibling(args.out, "_loss.csv") : args.loss_csv;
  auto manifest = args.manifest.empty() ? sibling(args.out, "_manifest.json") : args.manifest;
  save_texture(args.out, result.texture, data);
  save_loss_csv(loss_csv, result.history);

  auto style_names = std::vector<std::string>{};
  for (auto i : resolve_style_layers(spec, config.style_layers))
    style_names.push_back(layer_name(spec.layers[i]));
  auto json = nlohmann::ordered_json{};
  json["tool_version"] = tool_version;
  json["config"]       = {
      {"mesh", args.mesh},
      {"exemplar", args.exemplar},
      {"weights", args.weights},
      {"content", args.content},
      {"resolution", data.options.width},
      {"kernel", data.options.kernel},
      {"pool_levels", data.options.pool_levels},
      {"style_layers", style_names},
      {"content_layer", content ? config.content_layer : ""},
      {"content_weight", content ? config.content_weight : 0.0},
      {"iterations", config.iterations},
      {"learning_rate", config.schedule.base},
      {"milestones", config.schedule.milestones},
      {"threads", thread_count()},
      {"gram_normalization", "1/M per layer, squared error scaled by 1/C^2"},
      {"outputs", {{"texture", args.out}, {"loss_csv", loss_csv}}},
  };
  json["cache"] = {{"path", cache.string()}, {"hash", hex_string(data.hash)},
      {"reused", reused}};
  json["weights_hash"]     = hex_string(file_hash(args.weights));
  json["coefficient_hash"] = hex_string(coefficient_hash(spec));
  json["seed"]             = config.seed;
  json["timing"] = {{"precompute_seconds", data.seconds}, {"setup_seconds", setup},
      {"per_100_iteration_seconds", result.seconds_per_100}};
  auto distortion = nlohmann::ordered_json::array();
  for (auto& w : data.diagnostics.warnings) distortion.push_back(w);
  json["diagnostics"] = {{"degenerate_taps", data.diagnostics.degenerate_taps},
      {"corrected_taps", data.diagnostics.corrected_taps},
      {"boundary_terminations", data.diagnostics.boundary_terminations},
      {"warnings", distortion}};
  json["result"] = {{"aborted", result.aborted},
      {"abort_iteration", result.abort_iteration},
      {"abort_message", result.abort_message},
      {"initial_loss", result.history.empty() ? 0.0 : result.history.front().total},
      {"final_loss", result.history.empty() ? 0.0 : result.history.back().total}};
  auto file = std::ofstream{manifest};
  if (!file) throw io_error("cannot write manifest " + manifest);
  file << json.dump(2) << "\n";

  if (result.aborted) {
    fmt::print(stderr, "error: {}\n", result.abort_message);
    return exit_code(error_kind::numerical);
  }
  return 0;
}

// -----------------------------------------------------------------------------
// INSPECT
// -----------------------------------------------------------------------------

struct inspect_args {
  std::string           cache, what;
  std::vector<uint32_t> texel;
  uint32_t              level = 0;
};

static int run_inspect(const inspect_args& args) {
  auto data = load_cache(args.cache);
  if (args.level >= data.levels.size())
    throw precondition_error(fmt::format("level {} not in cache (0..{})", args.level,
        data.levels.size() - 1));
  if (args.texel.size() != 2) throw precondition_error("--texel takes i,j");
  auto& finest = data.levels.front();
  auto  found  = std::find(finest.coords.begin(), finest.coords.end(),
        std::array<uint32_t, 2>{args.texel[0], args.texel[1]});
  if (found == finest.coords.end())
    throw precondition_error(fmt::format(
        "texel {},{} is not a used texel", args.texel[0], args.texel[1]));
  auto  texel = uint32_t(found - finest.coords.begin());
  auto  id    = args.level ? data.levels[args.level].finest_to_level[texel] : texel;
  auto& level = data.levels[args.level];
  auto  coord = [&](const level_geometry& l, uint32_t t) {
    return fmt::format("{},{}", l.coords[t][0], l.coords[t][1]);
  };

  if (args.what == "graph") {
    fmt::print("neighbor,column,row\n");
    for (auto n : level.graph.neighbors(id)) fmt::print("{},{}\n", n, coord(level, n));
  } else if (args.what == "groups") {
    if (args.level == 0) throw precondition_error("groups start at level 1");
    auto& finer = data.levels[args.level - 1];
    auto& pool  = data.pools[args.level - 1];
    fmt::print("group {} at level {}\nmember,column,row\n", id, args.level);
    for (auto m : pool.group(id)) fmt::print("{},{}\n", m, coord(finer, m));
  } else if (args.what == "taps") {
    auto& table = data.tables[args.level];
    auto  k     = int(table.kernel);
    fmt::print("dx,dy,texel,column,row,weight\n");
    for (int e = 0; e < k * k; e++) {
      auto entry = size_t(id) * k * k + e;
      for (auto t = table.offsets[entry]; t < table.offsets[entry + 1]; t++)
        fmt::print("{},{},{},{},{:.6f}\n", e % k - k / 2, e / k - k / 2, table.texels[t],
            coord(level, table.texels[t]), table.weights[t]);
    }
  } else if (args.what == "frames") {
    auto& point = level.points[id];
    auto  frame = make_tangent_frame(data.face_normals[point.face]);
    fmt::print("face {}\n", point.face);
    auto row = [](const char* name, vec3 v) {
      fmt::print("{} {:.6f} {:.6f} {:.6f}\n", name, v.x, v.y, v.z);
    };
    row("tangent", frame.tangent);
    row("bitangent", frame.bitangent);
    row("normal", frame.normal);
  } else {
    throw precondition_error("--what must be graph, groups, taps or frames");
  }
  return 0;
}

// -----------------------------------------------------------------------------
// MAIN
// -----------------------------------------------------------------------------

int main(int argc, char** argv) {
  auto app = CLI::App{"Texture synthesis on UV-mapped triangle meshes", "meshstyle"};
  app.set_version_flag("--version", tool_version);
  app.require_subcommand(1);

  auto pre  = precompute_args{};
  auto cpre = app.add_subcommand("precompute", "build the atlas cache of a mesh");
  cpre->add_option("--mesh", pre.mesh, "OBJ mesh with UVs")->required();
  cpre->add_option("--resolution", pre.resolution, "texture width and height");
  cpre->add_option("--kernel", pre.kernel, "convolution kernel width");
  cpre->add_option("--levels", pre.levels, "pooling levels");
  cpre->add_option("--out-cache", pre.out_cache, "cache file");
  cpre->add_option("--threads", pre.threads, "worker threads");

  auto syn  = synthesize_args{};
  auto csyn = app.add_subcommand("synthesize", "optimize a texture to match an exemplar");
  csyn->set_config("--config", "", "key = value file; flags override it");
  csyn->add_option("--mesh", syn.mesh, "OBJ mesh with UVs")->required();
  csyn->add_option("--exemplar", syn.exemplar, "style exemplar PNG")->required();
  csyn->add_option("--weights", syn.weights, "MSWT network weights")->required();
  csyn->add_option("--out", syn.out, "output texture PNG")->required();
  csyn->add_option("--cache", syn.cache, "precomputed cache");
  auto geometry = std::vector<CLI::Option*>{
      csyn->add_option("--resolution", syn.resolution, "texture width and height"),
      csyn->add_option("--kernel", syn.kernel, "convolution kernel width"),
      csyn->add_option("--levels", syn.levels, "pooling levels")};
  csyn->add_option("--iters", syn.iters, "iterations");
  csyn->add_option("--lr", syn.lr, "base learning rate");
  csyn->add_option("--milestones", syn.milestones, "iterations halving the rate")
      ->delimiter(',');
  csyn->add_option("--seed", syn.seed, "random seed");
  csyn->add_option("--threads", syn.threads, "worker threads; 1 is fully serial");
  csyn->add_option("--content", syn.content, "content texture PNG (transfer mode)");
  csyn->add_option("--content-weight", syn.content_weight, "content loss weight");
  csyn->add_option("--content-layer", syn.content_layer, "content feature layer");
  csyn->add_option("--style-layers", syn.style_layers, "style layer names or 'all'")
      ->delimiter(',');
  csyn->add_option("--reference-size", syn.reference_size, "exemplar resize w,h")
      ->delimiter(',');
  csyn->add_option("--loss-csv", syn.loss_csv, "loss history CSV");
  csyn->add_option("--manifest", syn.manifest, "run manifest JSON");
  csyn->add_flag("--quiet", syn.quiet, "no progress output");

  auto ins  = inspect_args{};
  auto cins = app.add_subcommand("inspect", "dump cache structures for one texel");
  cins->add_option("--cache", ins.cache, "cache file")->required();
  cins->add_option("--what", ins.what, "graph, groups, taps or frames")->required();
  cins->add_option("--texel", ins.texel, "column,row")->delimiter(',')->required();
  cins->add_option("--level", ins.level, "pyramid level");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    auto code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*cpre) return run_precompute(pre);
    if (*csyn) {
      for (auto option : geometry) syn.options_given |= option->count() > 0;
      return run_synthesize(syn);
    }
    if (*cins) return run_inspect(ins);
  } catch (const error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return exit_code(e.kind);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
