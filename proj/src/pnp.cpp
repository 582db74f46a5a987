#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "engage/error.hpp"
#include "engage/visual.hpp"

namespace engage::visual {

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

Mat3 skew(const Vec3& u) {
  Mat3 k;
  k << 0.0, -u.z(), u.y(), u.z(), 0.0, -u.x(), -u.y(), u.x(), 0.0;
  return k;
}

struct Linearization {
  Mat6 jtj = Mat6::Zero();
  Vec6 jtr = Vec6::Zero();
  double cost = 0.0;
  bool valid = true;
};

// Cost only (no Jacobian); +inf if any point lands behind the camera.
double reprojection_cost(std::span<const Vec3> model, std::span<const Point2> image, const Mat3& r,
                         const Vec3& t, const CameraModel& cam) {
  double cost = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const Vec3 pc = r * model[i] + t;
    if (!(pc.z() > 0.0)) return std::numeric_limits<double>::infinity();
    const double du = cam.focal_length * pc.x() / pc.z() + cam.cx - image[i].x;
    const double dv = cam.focal_length * pc.y() / pc.z() + cam.cy - image[i].y;
    cost += du * du + dv * dv;
  }
  return cost;
}

// Jacobian w.r.t. a left-multiplied rotation increment exp(d) * R and an
// additive translation increment.
Linearization linearize(std::span<const Vec3> model, std::span<const Point2> image, const Mat3& r,
                        const Vec3& t, const CameraModel& cam) {
  Linearization lin;
  const double f = cam.focal_length;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const Vec3 xr = r * model[i];
    const Vec3 pc = xr + t;
    if (!(pc.z() > 0.0)) {
      lin.valid = false;
      return lin;
    }
    const double iz = 1.0 / pc.z();
    const double res_u = f * pc.x() * iz + cam.cx - image[i].x;
    const double res_v = f * pc.y() * iz + cam.cy - image[i].y;
    Eigen::Matrix<double, 2, 3> dproj;
    dproj << f * iz, 0.0, -f * pc.x() * iz * iz,  //
        0.0, f * iz, -f * pc.y() * iz * iz;
    Eigen::Matrix<double, 2, 6> j;
    j.leftCols<3>() = dproj * (-skew(xr));
    j.rightCols<3>() = dproj;
    const Eigen::Vector2d res(res_u, res_v);
    lin.jtj += j.transpose() * j;
    lin.jtr += j.transpose() * res;
    lin.cost += res.squaredNorm();
  }
  return lin;
}

void check_non_degenerate(std::span<const Point2> image) {
  double mx = 0.0, my = 0.0;
  for (const auto& p : image) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<double>(image.size());
  my /= static_cast<double>(image.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : image) {
    const Eigen::Vector2d d(p.x - mx, p.y - my);
    cov += d * d.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
  const double lo = es.eigenvalues()(0);
  const double hi = es.eigenvalues()(1);
  if (!(hi > 0.0) || lo <= 1e-9 * hi)
    throw DegenerateError("degenerate PnP configuration: image points are collinear");
}

}  // namespace

const std::array<Vec3, 6>& face_model_points() {
  static const std::array<Vec3, 6> pts{
      Vec3(0.0, 0.0, 0.0),          // nose tip
      Vec3(0.0, 330.0, 65.0),       // chin
      Vec3(-225.0, -170.0, 135.0),  // left eye outer corner
      Vec3(225.0, -170.0, 135.0),   // right eye outer corner
      Vec3(-150.0, 150.0, 125.0),   // left mouth corner
      Vec3(150.0, 150.0, 125.0)};   // right mouth corner
  return pts;
}

Point2 project_point(const Vec3& model_point, const Mat3& r, const Vec3& t, const CameraModel& cam) {
  const Vec3 pc = r * model_point + t;
  return {cam.focal_length * pc.x() / pc.z() + cam.cx, cam.focal_length * pc.y() / pc.z() + cam.cy};
}

PnpResult solve_pnp(std::span<const Vec3> model_points, std::span<const Point2> image_points,
                    const CameraModel& cam, const PnpOptions& opts) {
  if (model_points.size() != image_points.size() || model_points.size() < 4)
    throw DegenerateError("PnP needs at least 4 matching correspondences");
  if (!(cam.focal_length > 0.0)) throw DegenerateError("camera focal length must be positive");
  check_non_degenerate(image_points);

  Mat3 r = Mat3::Identity();
  Vec3 t(0.0, 0.0, 3.0 * cam.focal_length);
  Linearization lin = linearize(model_points, image_points, r, t, cam);
  if (!lin.valid) throw DegenerateError("initial pose places model behind the camera");

  double lambda = 1e-3 * lin.jtj.diagonal().maxCoeff();
  bool converged = false;
  int iter = 0;
  while (iter < opts.max_iterations) {
    ++iter;
    Mat6 a = lin.jtj;
    for (int k = 0; k < 6; ++k) a(k, k) += lambda * std::max(lin.jtj(k, k), 1e-12);
    const Eigen::LDLT<Mat6> ldlt(a);
    if (ldlt.info() != Eigen::Success) throw DegenerateError("singular PnP normal equations");
    const Vec6 step = ldlt.solve(-lin.jtr);
    if (!step.allFinite()) throw DegenerateError("non-finite PnP update");

    const Mat3 r_new = rodrigues({step.head<3>()}) * r;
    const Vec3 t_new = t + step.tail<3>();
    const double cost_new = reprojection_cost(model_points, image_points, r_new, t_new, cam);
    if (cost_new < lin.cost) {
      r = r_new;
      t = t_new;
      lin = linearize(model_points, image_points, r, t, cam);
      lambda = std::max(lambda / 10.0, 1e-12);
    } else {
      lambda *= 10.0;
    }
    if (step.norm() < opts.step_tolerance || lin.cost == 0.0) {
      converged = true;
      break;
    }
  }

  const double rms = std::sqrt(lin.cost / static_cast<double>(model_points.size()));
  if (!converged)
    throw ConvergenceError("PnP did not converge in " + std::to_string(opts.max_iterations) +
                               " iterations (rms " + std::to_string(rms) + " px)",
                           rms);
  if (!(t.z() > 0.0)) throw DegenerateError("PnP solution lies behind the camera");

  PnpResult out;
  out.rotation = rotation_log(r);
  out.translation = t;
  out.rms_reprojection_px = rms;
  out.iterations = iter;
  return out;
}

EulerAngles estimate_head_pose(const LandmarkFrame& frame, const CameraModel& cam) {
  std::array<Point2, 6> image;
  for (std::size_t k = 0; k < kPoseAnchorIndices.size(); ++k)
    image[k] = frame.points[kPoseAnchorIndices[k]];
  const auto& model = face_model_points();
  const PnpResult pose = solve_pnp(model, image, cam);
  return rotation_to_euler(rodrigues(pose.rotation));
}

}  // namespace engage::visual
