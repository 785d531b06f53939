#include "pingsim/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "pingsim/error.hpp"
#include "pingsim/segment_io.hpp"

namespace pingsim {

using nlohmann::json;

Eigen::Vector2d project(const CameraModel& camera, const Vec3& point) {
  const Eigen::Vector3d h = camera.projection * point.homogeneous();
  if (!(h.z() > 0.0)) fail(ErrorCode::InvalidArgument, "project: point is not in front of the camera");
  return h.hnormalized();
}

namespace {

const CameraModel& find_camera(std::span<const CameraModel> cameras, int id) {
  for (const CameraModel& c : cameras)
    if (c.id == id) return c;
  fail(ErrorCode::InvalidArgument, "triangulate_dlt: unknown camera id " + std::to_string(id));
}

}  // namespace

Triangulation triangulate_dlt(std::span<const PixelObservation> observations,
                              std::span<const CameraModel> cameras) {
  const int n = static_cast<int>(observations.size());
  if (n < 2) fail(ErrorCode::InvalidArgument, "triangulate_dlt: at least two views are required");
  std::set<int> seen;
  for (const PixelObservation& o : observations)
    if (!seen.insert(o.camera_id).second)
      fail(ErrorCode::InvalidArgument, "triangulate_dlt: views must come from distinct cameras");

  Eigen::MatrixXd a(2 * n, 4);
  for (int i = 0; i < n; ++i) {
    const PixelObservation& o = observations[i];
    const CameraModel& cam = find_camera(cameras, o.camera_id);
    if (!cam.in_image(o.u, o.v))
      fail(ErrorCode::InvalidArgument, "triangulate_dlt: observation outside image bounds");
    const Mat34& p = cam.projection;
    Eigen::RowVector4d r0 = o.u * p.row(2) - p.row(0);
    Eigen::RowVector4d r1 = o.v * p.row(2) - p.row(1);
    // Unit rows make the solution independent of the scale of each P.
    a.row(2 * i) = r0 / r0.norm();
    a.row(2 * i + 1) = r1 / r1.norm();
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  Triangulation out;
  out.condition = sv(2) / sv(0);
  if (!(out.condition > 1e-10))
    fail(ErrorCode::Singular,
         "triangulate_dlt: degenerate view geometry (sigma3/sigma1 = " + std::to_string(out.condition) + ")");
  const Eigen::Vector4d xh = svd.matrixV().col(3);
  if (std::abs(xh(3)) < 1e-12 * xh.head<3>().norm())
    fail(ErrorCode::Singular, "triangulate_dlt: solution at infinity (parallel rays)");
  out.point = xh.hnormalized();

  double ss = 0.0;
  for (const PixelObservation& o : observations) {
    const CameraModel& cam = find_camera(cameras, o.camera_id);
    const Eigen::Vector3d h = cam.projection * out.point.homogeneous();
    const Eigen::Vector2d uv = h.hnormalized();
    ss += (uv - Eigen::Vector2d(o.u, o.v)).squaredNorm();
  }
  out.reprojection_rms = std::sqrt(ss / n);
  return out;
}

CameraModel look_at_camera(int id, const Vec3& eye, const Vec3& target, double focal_px, int width,
                           int height) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(Vec3::UnitZ());
  require(right.norm() > 1e-9, "look_at_camera: view direction parallel to up");
  right.normalize();
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = forward.transpose();
  Mat3 k = Mat3::Identity();
  k(0, 0) = focal_px;
  k(1, 1) = focal_px;
  k(0, 2) = 0.5 * width;
  k(1, 2) = 0.5 * height;
  CameraModel cam;
  cam.id = id;
  cam.width = width;
  cam.height = height;
  cam.projection.leftCols<3>() = k * r;
  cam.projection.col(3) = -k * r * eye;
  return cam;
}

std::vector<CameraModel> default_rig() {
  const Vec3 target(0.0, 40.0, 30.0);
  std::vector<CameraModel> rig;
  int id = 0;
  for (double sx : {-1.0, 1.0})
    for (double sy : {-1.0, 1.0})
      rig.push_back(look_at_camera(id++, Vec3(300.0 * sx, 450.0 * sy, 220.0), target, 700.0, 1440, 1080));
  return rig;
}

json rig_to_json(std::span<const CameraModel> rig) {
  json cams = json::array();
  for (const CameraModel& c : rig) {
    json p = json::array();
    for (int r = 0; r < 3; ++r) p.push_back({c.projection(r, 0), c.projection(r, 1), c.projection(r, 2), c.projection(r, 3)});
    cams.push_back({{"id", c.id}, {"P", p}, {"image_size", {c.width, c.height}}});
  }
  return {{"version", 1}, {"cameras", cams}};
}

std::vector<CameraModel> rig_from_json(const json& j) {
  if (j.value("version", 0) != 1) fail(ErrorCode::Config, "camera rig: missing or unsupported version");
  std::vector<CameraModel> rig;
  try {
    for (const json& c : j.at("cameras")) {
      CameraModel cam;
      cam.id = c.at("id").get<int>();
      const json& p = c.at("P");
      if (p.size() != 3) fail(ErrorCode::Config, "camera rig: P must be 3x4");
      for (int r = 0; r < 3; ++r) {
        if (p[r].size() != 4) fail(ErrorCode::Config, "camera rig: P must be 3x4");
        for (int k = 0; k < 4; ++k) cam.projection(r, k) = p[r][k].get<double>();
      }
      cam.width = c.at("image_size")[0].get<int>();
      cam.height = c.at("image_size")[1].get<int>();
      Eigen::JacobiSVD<Mat34> svd(cam.projection);
      if (svd.singularValues()(2) <= 1e-12 * svd.singularValues()(0))
        fail(ErrorCode::Config, "camera rig: P of camera " + std::to_string(cam.id) + " is not rank 3");
      rig.push_back(cam);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::Config, std::string("camera rig: ") + e.what());
  }
  return rig;
}

std::vector<CameraModel> load_rig(const std::filesystem::path& path) {
  return rig_from_json(json::parse(read_text_file(path)));
}

Eigen::MatrixXd lowpass_filter(const Eigen::MatrixXd& signal, int window) {
  const int n = static_cast<int>(signal.rows());
  if (n == 0) fail(ErrorCode::InvalidArgument, "lowpass_filter: empty signal");
  if (window < 1 || window % 2 == 0 || window > n)
    fail(ErrorCode::InvalidArgument, "lowpass_filter: window must be odd, >= 1 and <= signal length");
  const int half = window / 2;
  Eigen::MatrixXd out(signal.rows(), signal.cols());
  for (int i = 0; i < n; ++i) {
    const int h = std::min({half, i, n - 1 - i});
    out.row(i) = signal.middleRows(i - h, 2 * h + 1).colwise().mean();
  }
  return out;
}

}  // namespace pingsim
