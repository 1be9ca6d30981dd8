// Copyright 2026 The pcm-toolkit Authors.
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
//
// pcm_toolkit: command-line front end for the map-maintenance pipeline.
//
//   build | edit | export | import | project | delete | add | eval | synth
//
// Every run stages its outputs in a hidden sibling of --out and renames it
// into place only on success, then leaves a manifest.json next to them.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "pcm/pcm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// JSON config files for CLI11. Nested objects address subcommands; keys may
// use '_' or '-'.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      input >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config must be a JSON object");
    std::vector<CLI::ConfigItem> out;
    walk(j, {}, out);
    return out;
  }

 private:
  static void walk(const json& obj, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      std::string name = it.key();
      std::replace(name.begin(), name.end(), '_', '-');
      if (it->is_object()) {
        auto p = parents;
        p.push_back(it.key());
        walk(*it, p, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = name;
      if (it->is_array()) {
        for (const auto& v : *it) item.inputs.push_back(scalar(v, name));
      } else {
        item.inputs.push_back(scalar(*it, name));
      }
      out.push_back(std::move(item));
    }
  }
  static std::string scalar(const json& v, const std::string& name) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConversionError("unsupported config value for " + name);
  }
};

struct Common {
  double resolution = 0.20;
  int radius_px = 2;
  double margin_m = 0.3;
  bool oracle = false;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string out;
  std::string config;

  pcm::OcclusionParams occlusion() const {
    pcm::OcclusionParams p;
    p.radius_px = radius_px;
    p.margin_m = margin_m;
    p.validate();
    return p;
  }
  json to_json() const {
    return {{"resolution", resolution}, {"occlusion_radius_px", radius_px}, {"occlusion_margin_m", margin_m},
            {"oracle", oracle},         {"seed", seed},                     {"threads", threads}};
  }
};

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

std::vector<fs::path> files_under(const fs::path& root) {
  std::vector<fs::path> out;
  if (fs::is_regular_file(root)) return {root};
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

// One invocation: staged outputs plus the manifest.
class Run {
 public:
  Run(std::string subcommand, const Common& common) : sub_(std::move(subcommand)), common_(common) {
    if (common.out.empty()) throw pcm::Error("--out is required");
    if (common.threads == 0) throw pcm::Error("--threads must be at least 1");
    if (!(common.resolution > 0.0)) throw pcm::Error("voxel resolution must be positive");
    started_ = utc_now();
    out_ = fs::absolute(common.out).lexically_normal();
    if (out_.filename().empty()) out_ = out_.parent_path();
    stage_ = out_.parent_path() / ("." + out_.filename().string() + ".partial-" + std::to_string(::getpid()));
    fs::remove_all(stage_);
    fs::create_directories(stage_);
  }
  ~Run() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(stage_, ec);
    }
  }
  Run(const Run&) = delete;
  Run& operator=(const Run&) = delete;

  /// Declares an input; it must exist.
  fs::path input(const std::string& role, const std::string& path) {
    if (path.empty()) throw pcm::Error("missing required input: " + role);
    const fs::path p(path);
    if (!fs::exists(p)) throw pcm::Error(role + " not found: " + path);
    for (const auto& f : files_under(p))
      inputs_.push_back({{"role", role}, {"path", f.string()}, {"digest", pcm::to_hex(pcm::io::file_digest(f))}});
    return p;
  }

  fs::path output(const std::string& rel) const {
    const fs::path p = stage_ / rel;
    fs::create_directories(p.parent_path());
    return p;
  }

  const fs::path& dir() const { return stage_; }
  json& summary() { return summary_; }
  json& parameters() { return params_; }

  void commit() {
    json outputs = json::array();
    for (const auto& f : files_under(stage_))
      outputs.push_back({{"path", fs::relative(f, stage_).generic_string()},
                         {"digest", pcm::to_hex(pcm::io::file_digest(f))}});
    json params = common_.to_json();
    for (auto it = params_.begin(); it != params_.end(); ++it) params[it.key()] = it.value();
    if (!common_.config.empty()) params["config"] = common_.config;
    const json manifest{{"tool", "pcm_toolkit"},
                        {"subcommand", sub_},
                        {"parameters", params},
                        {"inputs", inputs_},
                        {"outputs", outputs},
                        {"summary", summary_},
                        {"started_at", started_},
                        {"finished_at", utc_now()}};
    pcm::io::write_text(stage_ / "manifest.json", manifest.dump(2) + "\n");

    fs::path backup;
    if (fs::exists(out_)) {
      backup = out_.parent_path() / ("." + out_.filename().string() + ".old-" + std::to_string(::getpid()));
      fs::remove_all(backup);
      fs::rename(out_, backup);
    }
    fs::rename(stage_, out_);
    committed_ = true;
    if (!backup.empty()) fs::remove_all(backup);
    spdlog::info("{}: wrote {} files to {}", sub_, outputs.size() + 1, out_.string());
  }

 private:
  std::string sub_;
  const Common& common_;
  std::string started_;
  fs::path out_, stage_;
  json inputs_ = json::array();
  json summary_ = json::object();
  json params_ = json::object();
  bool committed_ = false;
};

json read_json(const fs::path& p) {
  try {
    return json::parse(pcm::io::read_text(p));
  } catch (const json::exception& e) {
    throw pcm::Error(p.string() + ": invalid JSON: " + e.what());
  }
}

std::vector<pcm::BinaryMask> read_masks(const fs::path& dir, const std::vector<pcm::CameraModel>& cams) {
  std::vector<pcm::BinaryMask> out;
  for (const auto& c : cams) {
    auto m = pcm::io::read_mask_png(dir / (c.name + ".png"));
    if (m.width != c.width || m.height != c.height) throw pcm::Error("mask dimensions do not match camera");
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<pcm::CameraModel> read_cameras(const fs::path& p) {
  auto cams = pcm::cameras_from_json(read_json(p));
  std::set<std::string> names;
  for (std::size_t n = 0; n < cams.size(); ++n) {
    if (cams[n].name.empty()) cams[n].name = "cam_" + std::to_string(n);
    if (!names.insert(cams[n].name).second) throw pcm::Error("duplicate camera name '" + cams[n].name + "'");
  }
  return cams;
}

std::vector<pcm::PosedScan> read_camera_scans(const fs::path& dir, std::size_t cameras) {
  auto scans = pcm::read_scan_directory(dir);
  if (scans.size() != cameras)
    throw pcm::Error("expected one camera scan per camera (" + std::to_string(cameras) + "), found " +
                     std::to_string(scans.size()));
  return scans;
}

pcm::LabelTaxonomy read_taxonomy(Run& run, const std::string& path) {
  if (path.empty()) return pcm::LabelTaxonomy::defaults();
  return pcm::LabelTaxonomy::from_json(read_json(run.input("taxonomy", path)));
}

std::string numbered(const std::string& stem, std::size_t n, const std::string& ext) {
  std::ostringstream s;
  s << stem << std::setw(4) << std::setfill('0') << n << ext;
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_st("pcm_toolkit");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* lv = std::getenv("PCM_TOOLKIT_LOG")) spdlog::set_level(spdlog::level::from_str(lv));

  CLI::App app{"Point-cloud map maintenance toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<JsonConfig>());

  Common common;
  auto* config_opt = app.set_config("--config", "", "JSON config file; command-line flags take precedence");
  app.add_option("--resolution", common.resolution, "Voxel resolution in meters")->capture_default_str();
  app.add_option("--occlusion-radius-px", common.radius_px, "Occlusion neighborhood radius (pixels)")
      ->capture_default_str();
  app.add_option("--occlusion-margin-m", common.margin_m, "Occlusion depth margin (meters)")->capture_default_str();
  app.add_flag("--oracle", common.oracle, "Brute-force nearest neighbors in eval");
  auto* seed_opt = app.add_option("--seed", common.seed, "Generator seed")->capture_default_str();
  app.add_option("--threads", common.threads, "Worker thread cap")->capture_default_str();
  app.add_option("--out", common.out, "Output directory");

  // build
  std::string scans_dir, cuboids_path, taxonomy_path;
  auto* build = app.add_subcommand("build", "Voxelize posed scans into a scene with provenance");
  build->add_option("--scans", scans_dir, "Scan directory (*.ply + poses.txt)")->required();
  build->add_option("--cuboids", cuboids_path, "Cuboid annotations (JSON array)");
  build->add_option("--taxonomy", taxonomy_path, "Label taxonomy (JSON)");

  // edit
  std::string scene_path, script_path, patches_dir, ground_path;
  auto* edit = app.add_subcommand("edit", "Apply an edit script to a scene");
  edit->add_option("--scene", scene_path)->required();
  edit->add_option("--script", script_path)->required();
  edit->add_option("--patches", patches_dir, "Patch database directory");
  edit->add_option("--ground", ground_path, "Ground model (JSON or binary)");
  edit->add_option("--taxonomy", taxonomy_path);

  // export / import
  std::string deltas_dir, archive_path;
  auto* exp = app.add_subcommand("export", "Write deltas into a portable archive");
  exp->add_option("--base", scene_path)->required();
  exp->add_option("--deltas", deltas_dir, "Directory of delta JSON files")->required();
  auto* imp = app.add_subcommand("import", "Rebuild edited scenes from a portable archive");
  imp->add_option("--base", scene_path)->required();
  imp->add_option("--archive", archive_path)->required();

  // project
  std::string changes_path, cameras_path, camera_scans_dir;
  auto* project = app.add_subcommand("project", "Project 3D changes into per-camera masks");
  project->add_option("--changes", changes_path)->required();
  project->add_option("--cameras", cameras_path)->required();
  project->add_option("--camera-scans", camera_scans_dir)->required();

  // delete
  std::string masks_dir;
  bool literal = false;
  auto* del = app.add_subcommand("delete", "Predict deleted voxels from change masks");
  del->add_option("--scene", scene_path)->required();
  del->add_option("--cameras", cameras_path)->required();
  del->add_option("--masks", masks_dir)->required();
  del->add_option("--camera-scans", camera_scans_dir)->required();
  del->add_flag("--no-free-space-check", literal, "Delete on visibility alone");

  // add
  std::string prediction_path, corr_path, deleted_path;
  auto* add = app.add_subcommand("add", "Register predicted additions and update the map");
  add->add_option("--scene", scene_path)->required();
  add->add_option("--prediction", prediction_path)->required();
  add->add_option("--correspondences", corr_path)->required();
  add->add_option("--cameras", cameras_path)->required();
  add->add_option("--masks", masks_dir)->required();
  add->add_option("--deleted", deleted_path, "Deleted keys (JSON) to apply in the same update");

  // eval
  std::string outdated_path, updated_path, truth_path;
  auto* eval = app.add_subcommand("eval", "Compare an updated map against ground truth");
  eval->add_option("--outdated", outdated_path)->required();
  eval->add_option("--updated", updated_path)->required();
  eval->add_option("--truth", truth_path)->required();

  // synth
  std::string recipe_path;
  bool tall = false, occluders = false;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic fixture");
  synth->add_option("--recipe", recipe_path, "Scene recipe (JSON)");
  synth->add_flag("--tall", tall, "Tall-structure scenario");
  synth->add_flag("--occluders", occluders, "Place occluders in front of cameras");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (config_opt->count() > 0) common.config = config_opt->as<std::string>();

  try {
    if (build->parsed()) {
      Run run("build", common);
      const auto scans = pcm::read_scan_directory(run.input("scans", scans_dir));
      std::vector<pcm::Cuboid> cuboids;
      if (!cuboids_path.empty()) cuboids = pcm::cuboids_from_json(read_json(run.input("cuboids", cuboids_path)));
      const auto taxonomy = read_taxonomy(run, taxonomy_path);
      pcm::VoxelGrid grid;
      grid.resolution = common.resolution;
      const auto scene = pcm::build_scene(scans, cuboids, taxonomy, grid);
      pcm::write_scene(run.output("scene.pcms"), scene);
      run.summary() = {{"scans", scans.size()}, {"voxels", scene.size()}, {"fingerprint", pcm::to_hex(scene.fingerprint())}};
      run.commit();
    } else if (edit->parsed()) {
      Run run("edit", common);
      const auto scene = pcm::read_scene(run.input("scene", scene_path));
      const auto script = pcm::edit_script_from_json(read_json(run.input("script", script_path)));
      pcm::PatchDatabase db;
      if (!patches_dir.empty()) db = pcm::PatchDatabase::load(run.input("patches", patches_dir));
      pcm::GroundModel ground;
      if (!ground_path.empty()) ground = pcm::GroundModel::load(run.input("ground", ground_path));
      const auto taxonomy = read_taxonomy(run, taxonomy_path);
      const auto deltas = pcm::run_edit_script(scene, script, db, ground, taxonomy);
      std::size_t removed = 0, inserted = 0;
      for (std::size_t n = 0; n < deltas.size(); ++n) {
        pcm::io::write_text(run.output("deltas/" + numbered("delta_", n, ".json")), pcm::to_json(deltas[n]).dump(2) + "\n");
        removed += deltas[n].removed_keys.size();
        for (const auto& i : deltas[n].insertions) inserted += i.inserted_keys.size();
      }
      const auto edited = pcm::apply_delta(scene, pcm::combine_deltas(deltas));
      pcm::write_scene(run.output("edited.pcms"), edited);
      run.summary() = {{"ops", deltas.size()},
                       {"removed_keys", removed},
                       {"inserted_keys", inserted},
                       {"voxels", edited.size()},
                       {"fingerprint", pcm::to_hex(edited.fingerprint())}};
      run.commit();
    } else if (exp->parsed()) {
      Run run("export", common);
      const auto base_file = run.input("base", scene_path);
      const auto base = pcm::read_scene(base_file);
      std::vector<pcm::EditDelta> deltas;
      for (const auto& f : files_under(run.input("deltas", deltas_dir)))
        if (f.extension() == ".json") deltas.push_back(pcm::delta_from_json(read_json(f)));
      for (const auto& d : deltas)
        if (d.scene_fingerprint != base.fingerprint()) throw pcm::Error("delta does not belong to the base scene");
      pcm::export_portable(base_file.filename().string(), base.fingerprint(), deltas, run.output("edits.pcme"));
      run.summary() = {{"deltas", deltas.size()},
                       {"archive_bytes", fs::file_size(run.output("edits.pcme"))}};
      run.commit();
    } else if (imp->parsed()) {
      Run run("import", common);
      const auto base = pcm::read_scene(run.input("base", scene_path));
      const auto scenes = pcm::import_portable(run.input("archive", archive_path), base);
      json prints = json::array();
      for (std::size_t n = 0; n < scenes.size(); ++n) {
        pcm::write_scene(run.output(numbered("scene_", n, ".pcms")), scenes[n]);
        prints.push_back(pcm::to_hex(scenes[n].fingerprint()));
      }
      run.summary() = {{"scenes", scenes.size()}, {"fingerprints", prints}};
      run.commit();
    } else if (project->parsed()) {
      Run run("project", common);
      const auto changes = pcm::change_set_from_json(read_json(run.input("changes", changes_path)));
      const auto cams = read_cameras(run.input("cameras", cameras_path));
      const auto scans = read_camera_scans(run.input("camera scans", camera_scans_dir), cams.size());
      const auto params = common.occlusion();
      json per_camera = json::object();
      for (std::size_t c = 0; c < cams.size(); ++c) {
        const auto mask = pcm::build_change_mask(changes, cams[c], scans[c], params).second;
        pcm::io::write_mask_png(run.output("masks/" + cams[c].name + ".png"), mask.raster);
        pcm::io::write_text(run.output("masks/" + cams[c].name + ".json"),
                            pcm::mask_sidecar(mask, cams[c].name).dump(2) + "\n");
        per_camera[cams[c].name] = mask.raster.count();
      }
      run.summary() = {{"cameras", cams.size()}, {"change_objects", changes.objects.size()}, {"mask_pixels", per_camera}};
      run.commit();
    } else if (del->parsed()) {
      Run run("delete", common);
      const auto scene = pcm::read_scene(run.input("scene", scene_path));
      const auto cams = read_cameras(run.input("cameras", cameras_path));
      const auto masks = read_masks(run.input("masks", masks_dir), cams);
      const auto scans = read_camera_scans(run.input("camera scans", camera_scans_dir), cams.size());
      pcm::DeletionParams dp;
      dp.occlusion = common.occlusion();
      dp.require_free_space = !literal;
      std::vector<pcm::DepthReference> refs;
      std::vector<pcm::DeletionView> views;
      for (std::size_t c = 0; c < cams.size(); ++c) refs.push_back(pcm::depth_reference(scans[c], cams[c]));
      for (std::size_t c = 0; c < cams.size(); ++c) views.push_back({&cams[c], &masks[c], &refs[c]});
      const auto keys = pcm::predict_deletion_keys(scene, views, dp);
      pcm::io::write_ply(run.output("deleted.ply"), pcm::key_centers(keys, scene.grid));
      pcm::io::write_text(run.output("deleted_keys.json"), pcm::keys_to_json(keys).dump() + "\n");
      run.parameters()["free_space_check"] = dp.require_free_space;
      run.summary() = {{"deletions", keys.size()}, {"cameras", cams.size()}};
      run.commit();
    } else if (add->parsed()) {
      Run run("add", common);
      const auto scene = pcm::read_scene(run.input("scene", scene_path));
      const auto pred = pcm::read_prediction(run.input("prediction", prediction_path));
      const auto corr = pcm::parse_correspondences(pcm::io::read_text(run.input("correspondences", corr_path)));
      const auto cams = read_cameras(run.input("cameras", cameras_path));
      const auto masks = read_masks(run.input("masks", masks_dir), cams);
      pcm::KeySet deleted;
      if (!deleted_path.empty()) {
        const auto k = pcm::keys_from_json(read_json(run.input("deleted", deleted_path)));
        deleted.insert(k.begin(), k.end());
      }
      const auto result = pcm::register_addition(pred, corr, masks);
      const std::vector<pcm::PointCloud> batches{result.points};
      const auto added = pcm::accumulate_addition_keys(batches, scene.grid);
      pcm::io::write_ply(run.output("added.ply"), pcm::key_centers(added, scene.grid));
      pcm::io::write_text(run.output("added_keys.json"), pcm::keys_to_json(added).dump() + "\n");
      const auto updated = pcm::apply_update(scene, deleted, added);
      pcm::write_scene(run.output("updated.pcms"), updated);
      json fit = nullptr;
      if (result.fitted)
        fit = {{"scale", result.fit.transform.scale}, {"rmse", result.fit.rmse}, {"correspondences", corr.size()}};
      run.summary() = {{"additions", added.size()}, {"deletions", deleted.size()}, {"fit", fit},
                       {"voxels", updated.size()}};
      run.commit();
    } else if (eval->parsed()) {
      Run run("eval", common);
      const auto outdated = pcm::read_scene(run.input("outdated", outdated_path));
      const auto updated = pcm::read_scene(run.input("updated", updated_path));
      const auto truth = pcm::read_scene(run.input("truth", truth_path));
      pcm::MetricOptions opt;
      opt.oracle = common.oracle;
      opt.threads = common.threads;
      const auto report = pcm::evaluate_update(outdated, updated, truth, opt).to_json();
      pcm::io::write_text(run.output("report.json"), report.dump(2) + "\n");
      run.summary() = report;
      run.commit();
    } else if (synth->parsed()) {
      Run run("synth", common);
      pcm::SceneRecipe recipe;
      if (!recipe_path.empty()) recipe = pcm::recipe_from_json(read_json(run.input("recipe", recipe_path)));
      else if (tall) recipe = pcm::SceneRecipe::tall_building(common.seed);
      if (seed_opt->count() > 0 || recipe_path.empty()) recipe.seed = common.seed;
      if (app.get_option("--resolution")->count() > 0 || recipe_path.empty()) recipe.resolution = common.resolution;
      if (occluders) recipe.occluders = true;
      const auto b = pcm::generate(recipe);
      const fs::path dir = run.dir();
      pcm::write_bundle(b, dir);
      // Oracle predictor output for the add stage.
      const auto masks = pcm::truth_masks(b, common.occlusion());
      std::vector<pcm::BinaryMask> rasters;
      for (const auto& m : masks) rasters.push_back(m.raster);
      const auto pred = pcm::oracle_prediction(b.truth, b.cameras, b.predictor_frame);
      pcm::write_prediction(dir / "prediction.ply", pred.pred);
      pcm::io::write_text(dir / "correspondences.txt", pcm::format_correspondences(pcm::oracle_correspondences(pred, rasters)));
      run.summary() = {{"truth_voxels", b.truth.size()},
                       {"outdated_voxels", b.outdated.size()},
                       {"cameras", b.cameras.size()},
                       {"added_keys", b.truth_diff.add_star.size()},
                       {"deleted_keys", b.truth_diff.del_star.size()},
                       {"recipe", pcm::to_json(recipe)}};
      run.commit();
    }
  } catch (const std::exception& e) {
    std::cerr << "pcm_toolkit: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
