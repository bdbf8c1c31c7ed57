#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fdgan/common.hpp"
#include "fdgan/shape.hpp"

namespace fdgan::pose {

inline constexpr int kNumJoints = 18;

/// Joint index table (fixed ordering for the 18-channel map):
///   0 nose        1 neck        2 r_shoulder  3 r_elbow    4 r_wrist
///   5 l_shoulder  6 l_elbow     7 l_wrist     8 r_hip      9 r_knee
///  10 r_ankle    11 l_hip      12 l_knee     13 l_ankle   14 r_eye
///  15 l_eye      16 r_ear      17 l_ear
inline const std::array<const char*, kNumJoints>& joint_names() {
  static const std::array<const char*, kNumJoints> names = {
      "nose",   "neck",   "r_shoulder", "r_elbow", "r_wrist", "l_shoulder",
      "l_elbow", "l_wrist", "r_hip",     "r_knee",  "r_ankle", "l_hip",
      "l_knee", "l_ankle", "r_eye",      "l_eye",   "r_ear",   "l_ear"};
  return names;
}

/// Limb segments used when sketching a skeleton (visualization only).
inline const std::vector<std::pair<int, int>>& skeleton_edges() {
  static const std::vector<std::pair<int, int>> edges = {
      {1, 2}, {2, 3},  {3, 4},  {1, 5},  {5, 6},  {6, 7},  {1, 8},
      {8, 9}, {9, 10}, {1, 11}, {11, 12}, {12, 13}, {0, 1}, {0, 14},
      {0, 15}, {14, 16}, {15, 17}};
  return edges;
}

struct Landmark {
  double x = 0;
  double y = 0;
  bool visible = false;
};

/// 18 named body keypoints in pixel coordinates of a given frame.
struct PoseLandmarks {
  std::array<Landmark, kNumJoints> points{};
  Index frame_height = 0;
  Index frame_width = 0;

  /// Marks out-of-frame points invisible; call after any coordinate rescale.
  void clamp_visibility() {
    for (auto& p : points)
      if (p.visible && (p.x < 0 || p.x >= static_cast<double>(frame_width) ||
                        p.y < 0 || p.y >= static_cast<double>(frame_height)))
        p.visible = false;
  }

  PoseLandmarks rescaled(Index new_h, Index new_w) const {
    PoseLandmarks out = *this;
    const double sx = static_cast<double>(new_w) / static_cast<double>(frame_width);
    const double sy = static_cast<double>(new_h) / static_cast<double>(frame_height);
    for (auto& p : out.points) {
      p.x *= sx;
      p.y *= sy;
    }
    out.frame_height = new_h;
    out.frame_width = new_w;
    out.clamp_visibility();
    return out;
  }
};

/// 18-channel Gaussian heatmap stack, flat (C,H,W) storage, values in [0,1].
template <typename S>
struct PoseMap {
  ArrayX<S> channels;  // kNumJoints * height * width
  Index height = 0;
  Index width = 0;
  S bandwidth = S(0);

  S at(int joint, Index y, Index x) const {
    return channels[(static_cast<Index>(joint) * height + y) * width + x];
  }
};

/// Renders amplitude-1 Gaussian bumps, one channel per joint. Channels of
/// invisible joints are identically zero. Landmark coordinates must already
/// be scaled to `out_h` x `out_w` by the caller.
template <typename S>
PoseMap<S> render_pose_map(const PoseLandmarks& lm, S bandwidth, Index out_h,
                           Index out_w) {
  require(bandwidth > S(0), "render_pose_map: bandwidth must be positive");
  require(out_h > 0 && out_w > 0, "render_pose_map: empty frame");
  PoseMap<S> map;
  map.height = out_h;
  map.width = out_w;
  map.bandwidth = bandwidth;
  map.channels = ArrayX<S>::Zero(kNumJoints * out_h * out_w);
  const S inv2s2 = S(1) / (S(2) * bandwidth * bandwidth);
  for (int k = 0; k < kNumJoints; ++k) {
    const Landmark& p = lm.points[static_cast<std::size_t>(k)];
    if (!p.visible) continue;
    if (p.x < 0 || p.x >= static_cast<double>(out_w) || p.y < 0 ||
        p.y >= static_cast<double>(out_h))
      continue;  // off-frame joints behave as invisible
    for (Index v = 0; v < out_h; ++v) {
      const S dy = static_cast<S>(static_cast<double>(v) - p.y);
      S* row = map.channels.data() + (static_cast<Index>(k) * out_h + v) * out_w;
      for (Index u = 0; u < out_w; ++u) {
        const S dx = static_cast<S>(static_cast<double>(u) - p.x);
        row[u] = std::exp(-(dx * dx + dy * dy) * inv2s2);
      }
    }
  }
  return map;
}

/// Online bandwidth augmentation draw: sigma ~ Uniform[lo, hi].
template <typename S>
S sample_bandwidth(Rng& rng, S lo = S(4), S hi = S(6)) {
  require(lo > S(0), "sample_bandwidth: lower bound must be positive");
  require(lo <= hi, "sample_bandwidth: lo > hi");
  if (lo == hi) return lo;
  return draw_uniform<S>(rng, lo, hi);
}

// ---------------------------------------------------------------------------
// landmark file format: one record per image,
//   <image-id>,x0,y0,v0,x1,y1,v1,...,x17,y17,v17
// Comma or whitespace delimited; lines starting with '#' are comments.

inline std::string landmark_header_comment() {
  std::string s = "# image_id";
  for (const char* n : joint_names()) {
    s += ",";
    s += n;
    s += "_x,";
    s += n;
    s += "_y,";
    s += n;
    s += "_v";
  }
  return s;
}

inline void write_landmark_record(std::ostream& os, const std::string& image_id,
                                  const PoseLandmarks& lm) {
  os << image_id;
  for (const auto& p : lm.points)
    os << ',' << p.x << ',' << p.y << ',' << (p.visible ? 1 : 0);
  os << '\n';
}

/// Parses a landmark file; `frame_h`/`frame_w` give records their frame.
inline std::map<std::string, PoseLandmarks> read_landmark_file(
    const std::string& path, Index frame_h, Index frame_w) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open landmark file: " + path);
  std::map<std::string, PoseLandmarks> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    for (auto& ch : line)
      if (ch == ',') ch = ' ';
    std::istringstream ss(line);
    std::string id;
    ss >> id;
    PoseLandmarks lm;
    lm.frame_height = frame_h;
    lm.frame_width = frame_w;
    bool ok = true;
    for (auto& p : lm.points) {
      int v = 0;
      if (!(ss >> p.x >> p.y >> v)) {
        ok = false;
        break;
      }
      p.visible = v != 0;
    }
    if (!ok) throw config_error("malformed landmark record for '" + id +
                                "' in " + path);
    lm.clamp_visibility();
    out[id] = lm;
  }
  return out;
}

}  // namespace fdgan::pose
