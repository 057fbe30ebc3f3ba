#pragma once

#include <json.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "capvo/image_io.hpp"
#include "capvo/scene.hpp"
#include "capvo/sfs.hpp"
#include "capvo/trajectory.hpp"

// On-disk dataset layout, rooted at a directory:
//   manifest.json
//   traj_NN/frames/NNNNNN.png   8-bit RGB frames
//   traj_NN/depth/NNNNNN.f32    true depth, row-major float32 LE
//   traj_NN/poses.csv           timestamp,tx,ty,tz,qw,qx,qy,qz (camera->world)
// The manifest records the scene, every trajectory spec with its split tag,
// and the 8 per-channel means ([R,G,B,D] twice) measured on the train split
// after 8-bit quantization, with D from shape-from-shading — exactly what the
// network consumes.

namespace capvo {

struct DatasetTrajectory {
  std::string dir;    // e.g. "traj_00", relative to the dataset root
  std::string split;  // train | val | test
  std::size_t frames = 0;
  TrajectorySpec spec;
};

struct DatasetManifest {
  int version = 1;
  SceneConfig scene;
  std::vector<DatasetTrajectory> trajectories;
  std::array<double, 8> channel_means{};
};

// ---------------------------------------------------------------------------
// Poses CSV. %.17g lets every double round-trip exactly.

inline void write_poses_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for write: " + path);
  os << "timestamp,tx,ty,tz,qw,qx,qy,qz\n";
  char buf[64];
  auto emit = [&](double v, char sep) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf << sep;
  };
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const Pose& p = traj.poses[i];
    emit(traj.timestamps[i], ',');
    emit(p.t.x(), ',');
    emit(p.t.y(), ',');
    emit(p.t.z(), ',');
    emit(p.q.w(), ',');
    emit(p.q.x(), ',');
    emit(p.q.y(), ',');
    emit(p.q.z(), '\n');
  }
  if (!os) throw IoError("write failed: " + path);
}

inline Trajectory read_poses_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(is, line) ||
      line != "timestamp,tx,ty,tz,qw,qx,qy,qz")
    throw ValidationError("poses csv: bad header in " + path);
  Trajectory traj;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::array<double, 8> v{};
    std::istringstream ss(line);
    for (int k = 0; k < 8; ++k) {
      std::string cell;
      if (!std::getline(ss, cell, ','))
        throw ValidationError("poses csv: short row at " + path + ":" +
                              std::to_string(lineno));
      try {
        v[k] = std::stod(cell);
      } catch (const std::exception&) {
        throw ValidationError("poses csv: bad number at " + path + ":" +
                              std::to_string(lineno));
      }
    }
    Pose p;
    p.t = Eigen::Vector3d(v[1], v[2], v[3]);
    p.q = Eigen::Quaterniond(v[4], v[5], v[6], v[7]);
    if (std::abs(p.q.norm() - 1.0) > 1e-6)
      throw ValidationError("poses csv: non-unit quaternion at " + path + ":" +
                            std::to_string(lineno));
    if (!traj.timestamps.empty() && v[0] <= traj.timestamps.back())
      throw ValidationError("poses csv: timestamps not increasing at " + path +
                            ":" + std::to_string(lineno));
    traj.timestamps.push_back(v[0]);
    traj.poses.push_back(p);
  }
  if (traj.size() == 0) throw ValidationError("poses csv: empty: " + path);
  return traj;
}

// ---------------------------------------------------------------------------
// Manifest JSON.

inline nlohmann::json scene_to_json(const SceneConfig& s) {
  return nlohmann::json{{"albedo_base", s.albedo_base},
                        {"bump_amplitude", s.bump_amplitude},
                        {"falloff", s.falloff},
                        {"focal_px", s.focal_px},
                        {"image_h", s.image_h},
                        {"image_w", s.image_w},
                        {"principal_x", s.principal_x},
                        {"principal_y", s.principal_y},
                        {"radius_wobble", s.radius_wobble},
                        {"texture_amplitude", s.texture_amplitude},
                        {"texture_seed", s.texture_seed},
                        {"tint", s.tint},
                        {"tube_radius", s.tube_radius}};
}

inline SceneConfig scene_from_json(const nlohmann::json& j) {
  SceneConfig s;
  try {
    j.at("albedo_base").get_to(s.albedo_base);
    j.at("bump_amplitude").get_to(s.bump_amplitude);
    j.at("falloff").get_to(s.falloff);
    j.at("focal_px").get_to(s.focal_px);
    j.at("image_h").get_to(s.image_h);
    j.at("image_w").get_to(s.image_w);
    j.at("principal_x").get_to(s.principal_x);
    j.at("principal_y").get_to(s.principal_y);
    j.at("radius_wobble").get_to(s.radius_wobble);
    j.at("texture_amplitude").get_to(s.texture_amplitude);
    j.at("texture_seed").get_to(s.texture_seed);
    j.at("tint").get_to(s.tint);
    j.at("tube_radius").get_to(s.tube_radius);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("scene json: ") + e.what());
  }
  s.validate();
  return s;
}

inline nlohmann::json traj_spec_to_json(const TrajectorySpec& t) {
  return nlohmann::json{{"class", traj_class_name(t.cls)},
                        {"frames", t.frames},
                        {"length", t.length},
                        {"max_rot_step", t.max_rot_step},
                        {"max_trans_step", t.max_trans_step},
                        {"seed", t.seed}};
}

inline TrajectorySpec traj_spec_from_json(const nlohmann::json& j) {
  TrajectorySpec t;
  try {
    t.cls = traj_class_from_name(j.at("class").get<std::string>());
    j.at("frames").get_to(t.frames);
    j.at("length").get_to(t.length);
    j.at("max_rot_step").get_to(t.max_rot_step);
    j.at("max_trans_step").get_to(t.max_trans_step);
    j.at("seed").get_to(t.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("trajectory json: ") + e.what());
  }
  return t;
}

inline void save_manifest(const std::string& path, const DatasetManifest& m) {
  nlohmann::json trajs = nlohmann::json::array();
  for (const auto& t : m.trajectories)
    trajs.push_back(nlohmann::json{{"dir", t.dir},
                                   {"frames", t.frames},
                                   {"spec", traj_spec_to_json(t.spec)},
                                   {"split", t.split}});
  nlohmann::json j{{"channel_means", m.channel_means},
                   {"scene", scene_to_json(m.scene)},
                   {"trajectories", trajs},
                   {"version", m.version}};
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for write: " + path);
  os << j.dump(2) << "\n";
  if (!os) throw IoError("write failed: " + path);
}

inline DatasetManifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("manifest parse: " + std::string(e.what()));
  }
  DatasetManifest m;
  try {
    j.at("version").get_to(m.version);
    m.scene = scene_from_json(j.at("scene"));
    j.at("channel_means").get_to(m.channel_means);
    for (const auto& tj : j.at("trajectories")) {
      DatasetTrajectory t;
      tj.at("dir").get_to(t.dir);
      tj.at("split").get_to(t.split);
      tj.at("frames").get_to(t.frames);
      t.spec = traj_spec_from_json(tj.at("spec"));
      m.trajectories.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("manifest json: ") + e.what());
  }
  for (const auto& t : m.trajectories)
    if (t.split != "train" && t.split != "val" && t.split != "test")
      throw ValidationError("manifest: unknown split tag " + t.split);
  for (double v : m.channel_means)
    if (!std::isfinite(v))
      throw ValidationError("manifest: non-finite channel mean");
  return m;
}

// ---------------------------------------------------------------------------
// Frame access.

inline std::string frame_path(const std::string& root,
                              const DatasetTrajectory& t, std::size_t i) {
  char name[32];
  std::snprintf(name, sizeof name, "%06zu.png", i);
  return root + "/" + t.dir + "/frames/" + name;
}

inline std::string depth_path(const std::string& root,
                              const DatasetTrajectory& t, std::size_t i) {
  char name[32];
  std::snprintf(name, sizeof name, "%06zu.f32", i);
  return root + "/" + t.dir + "/depth/" + name;
}

inline std::string poses_path(const std::string& root,
                              const DatasetTrajectory& t) {
  return root + "/" + t.dir + "/poses.csv";
}

// Quantize floats exactly the way the PNG writer will, so statistics can be
// computed without a write/read cycle.
inline float quantize8(float v) {
  if (v < 0.0f) v = 0.0f;
  if (v > 1.0f) v = 1.0f;
  return static_cast<float>(static_cast<int>(v * 255.0f + 0.5f)) / 255.0f;
}

// ---------------------------------------------------------------------------
// Generation.

inline DatasetManifest build_dataset(const SceneConfig& scene,
                                     const std::vector<TrajectorySpec>& specs,
                                     const std::vector<std::string>& splits,
                                     const std::string& out_dir,
                                     const SfSConfig& sfs = SfSConfig{}) {
  if (specs.size() != splits.size())
    throw ConfigError("build_dataset: one split tag per trajectory required");
  if (specs.empty()) throw ConfigError("build_dataset: no trajectories");
  scene.validate();
  sfs.validate();

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

  DatasetManifest manifest;
  manifest.scene = scene;

  // channel mean accumulators over the train split, post-quantization
  std::array<double, 4> mean_acc{};
  std::size_t mean_pixels = 0;

  for (std::size_t ti = 0; ti < specs.size(); ++ti) {
    DatasetTrajectory rec;
    char dir[32];
    std::snprintf(dir, sizeof dir, "traj_%02zu", ti);
    rec.dir = dir;
    rec.split = splits[ti];
    rec.spec = specs[ti];
    rec.frames = specs[ti].frames;
    if (rec.split != "train" && rec.split != "val" && rec.split != "test")
      throw ConfigError("build_dataset: bad split tag " + rec.split);

    const std::string troot = out_dir + "/" + rec.dir;
    fs::create_directories(troot + "/frames", ec);
    fs::create_directories(troot + "/depth", ec);
    if (ec) throw IoError("cannot create " + troot + ": " + ec.message());

    Trajectory traj = generate_trajectory(rec.spec, scene);
    write_poses_csv(poses_path(out_dir, rec), traj);

    for (std::size_t i = 0; i < traj.size(); ++i) {
      RenderedFrame frame = render_frame(traj.poses[i], scene);
      write_png_rgb8(frame_path(out_dir, rec, i), frame.image);
      write_f32(depth_path(out_dir, rec, i), frame.depth);

      if (rec.split == "train") {
        Tensor<float> quant(frame.image.shape());
        for (std::size_t k = 0; k < quant.size(); ++k)
          quant[k] = quantize8(frame.image[k]);
        auto depth = tsai_shah_depth(rgb_to_intensity(quant), sfs);
        const std::size_t hw = scene.image_h * scene.image_w;
        for (int c = 0; c < 3; ++c)
          for (std::size_t k = 0; k < hw; ++k)
            mean_acc[c] += quant[c * hw + k];
        for (std::size_t k = 0; k < hw; ++k)
          mean_acc[3] += depth.values[k];
        mean_pixels += hw;
      }
    }
    manifest.trajectories.push_back(std::move(rec));
  }

  if (mean_pixels == 0)
    throw ConfigError("build_dataset: no train split, cannot compute means");
  for (int c = 0; c < 4; ++c) {
    const double m = mean_acc[c] / static_cast<double>(mean_pixels);
    manifest.channel_means[c] = m;
    manifest.channel_means[4 + c] = m;  // both pair halves share statistics
  }
  save_manifest(out_dir + "/manifest.json", manifest);
  return manifest;
}

// Load one trajectory's frames and preprocess them the way the network wants:
// quantized RGB in [0,1] plus its shape-from-shading depth map.
struct PreprocessedFrame {
  Tensor<float> rgb;    // [3,H,W]
  Tensor<float> depth;  // [H,W], normalized SfS output
};

inline std::vector<PreprocessedFrame> load_and_preprocess(
    const std::string& root, const DatasetTrajectory& t,
    const SfSConfig& sfs = SfSConfig{}) {
  std::vector<PreprocessedFrame> frames;
  frames.reserve(t.frames);
  for (std::size_t i = 0; i < t.frames; ++i) {
    PreprocessedFrame f;
    f.rgb = read_png_rgb8(frame_path(root, t, i));
    f.depth = tsai_shah_depth(rgb_to_intensity(f.rgb), sfs).values;
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace capvo
