#pragma once

// Multiview projection, DLT triangulation and zero-phase smoothing.

#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "pingsim/types.hpp"

namespace pingsim {

using Mat34 = Eigen::Matrix<double, 3, 4>;

struct CameraModel {
  int id = 0;
  Mat34 projection = Mat34::Zero();
  int width = 0;   // pixels
  int height = 0;

  bool in_image(double u, double v) const { return u >= 0 && v >= 0 && u <= width && v <= height; }
};

struct PixelObservation {
  int camera_id = 0;
  double u = 0.0;
  double v = 0.0;
  int frame = 0;
};

// Homogeneous projection divided by the third coordinate. Throws when the
// point is not strictly in front of the camera.
Eigen::Vector2d project(const CameraModel& camera, const Vec3& point);

struct Triangulation {
  Vec3 point = Vec3::Zero();
  double reprojection_rms = 0.0;  // pixels
  double condition = 0.0;         // sigma_3 / sigma_1 of the stacked system
};

// Least-squares DLT: smallest right singular vector of the row-normalised
// 2n x 4 system, dehomogenised. Needs two or more views from distinct cameras.
Triangulation triangulate_dlt(std::span<const PixelObservation> observations,
                              std::span<const CameraModel> cameras);

// Camera looking from `eye` at `target` with the given focal length and a
// principal point at the image centre.
CameraModel look_at_camera(int id, const Vec3& eye, const Vec3& target, double focal_px, int width,
                           int height);

// Four corner cameras covering the table and both players.
std::vector<CameraModel> default_rig();

nlohmann::json rig_to_json(std::span<const CameraModel> rig);
std::vector<CameraModel> rig_from_json(const nlohmann::json& j);
std::vector<CameraModel> load_rig(const std::filesystem::path& path);

// Centred moving average with a window that shrinks symmetrically at the
// edges. Rows are time samples, columns are channels.
Eigen::MatrixXd lowpass_filter(const Eigen::MatrixXd& signal, int window);

}  // namespace pingsim
